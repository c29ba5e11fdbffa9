"""Transmitter: convolutional encoder, interleaver, Gray QPSK and pilots."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

import numpy as np

QPSK_ALPHABET = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)
"""Alphabet indexed by the bit pair ``2*b0 + b1``."""

PILOT_SYMBOL = (1 + 1j) / np.sqrt(2)


@dataclass(frozen=True)
class CodeSpec:
    """Feedforward rate-1/n convolutional code, generators in octal."""

    generators: tuple = (0o23, 0o35)
    constraint_length: int = 5

    def __post_init__(self):
        for g in self.generators:
            if g >> self.constraint_length or not g >> (self.constraint_length - 1):
                raise ValueError(f"generator {g:o} does not match K={self.constraint_length}")

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> Fraction:
        return Fraction(1, self.n_out)

    @property
    def memory(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.memory

    @property
    def tail(self) -> int:
        return self.memory

    def taps(self) -> np.ndarray:
        """Tap matrix ``(n_out, K)``; column 0 multiplies the current input."""
        K = self.constraint_length
        return np.array([[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in self.generators],
                        dtype=np.int8)


DEFAULT_CODE = CodeSpec()


def conv_encode(bits, code: CodeSpec = DEFAULT_CODE) -> np.ndarray:
    """Encode and zero-terminate; output is interleaved per time step
    (``c[2t], c[2t+1]`` come from generators 0 and 1)."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.ndim != 1 or np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be a 1-D binary vector")
    padded = np.concatenate([bits, np.zeros(code.tail, dtype=np.int64)])
    streams = [np.convolve(padded, t)[: padded.size] % 2 for t in code.taps()]
    return np.stack(streams, axis=1).reshape(-1).astype(np.int8)


def make_permutation(n: int, seed: int) -> np.ndarray:
    """Seeded Fisher-Yates permutation of ``range(n)``."""
    return np.random.default_rng(seed).permutation(n)


def interleave(c, perm) -> np.ndarray:
    c = np.asarray(c)
    if c.shape[0] != len(perm):
        raise ValueError(f"length {c.shape[0]} != interleaver length {len(perm)}")
    return c[perm]


def deinterleave(v, perm) -> np.ndarray:
    v = np.asarray(v)
    if v.shape[0] != len(perm):
        raise ValueError(f"length {v.shape[0]} != interleaver length {len(perm)}")
    out = np.empty_like(v)
    out[perm] = v
    return out


def qpsk_map(c) -> np.ndarray:
    """Gray QPSK: ``(b0, b1) -> ((1-2 b0) + j (1-2 b1)) / sqrt(2)``."""
    c = np.asarray(c)
    if c.size % 2:
        raise ValueError("QPSK mapping needs an even number of bits")
    pairs = c.reshape(-1, 2).astype(float)
    return ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1])) / np.sqrt(2)


def qpsk_demap_hard(x) -> np.ndarray:
    x = np.asarray(x)
    return np.stack([x.real < 0, x.imag < 0], axis=1).astype(np.int8).reshape(-1)


@dataclass(frozen=True)
class FrameLayout:
    """Pilot/data arrangement of one frame.

    The frame is a sequence of blocks, each made of ``pilots_per_block``
    pilots followed by up to ``pilot_period`` data symbols.
    """

    n_data_symbols: int = 1024
    pilot_period: int = 256
    pilots_per_block: int = 5

    def __post_init__(self):
        if self.n_data_symbols < 1 or self.pilot_period < 1 or self.pilots_per_block < 0:
            raise ValueError("invalid frame layout")

    @cached_property
    def pilot_positions(self) -> np.ndarray:
        n_blocks = -(-self.n_data_symbols // self.pilot_period)
        stride = self.pilot_period + self.pilots_per_block
        pos = [b * stride + i for b in range(n_blocks) for i in range(self.pilots_per_block)]
        return np.array(pos, dtype=np.int64)

    @property
    def total_symbols(self) -> int:
        return self.n_data_symbols + len(self.pilot_positions)

    @cached_property
    def pilot_mask(self) -> np.ndarray:
        mask = np.zeros(self.total_symbols, dtype=bool)
        mask[self.pilot_positions] = True
        return mask

    def n_coded_bits(self, code: CodeSpec = DEFAULT_CODE) -> int:
        return self.n_data_symbols * 2

    def n_info_bits(self, code: CodeSpec = DEFAULT_CODE) -> int:
        n = self.n_coded_bits(code)
        if n % code.n_out:
            raise ValueError("coded length not a multiple of the code's output width")
        k = n // code.n_out - code.tail
        if k < 1:
            raise ValueError("frame too short for the code termination")
        return k


def insert_pilots(x_data, layout: FrameLayout):
    """Return ``(x_full, pilot_mask)``."""
    x_data = np.asarray(x_data, dtype=complex)
    if x_data.size != layout.n_data_symbols:
        raise ValueError(f"{x_data.size} data symbols, layout expects {layout.n_data_symbols}")
    mask = layout.pilot_mask
    x = np.empty(layout.total_symbols, dtype=complex)
    x[mask] = PILOT_SYMBOL
    x[~mask] = x_data
    return x, mask.copy()


@dataclass(frozen=True)
class FrameFormat:
    """Everything both ends of the link agree on."""

    layout: FrameLayout = FrameLayout()
    code: CodeSpec = DEFAULT_CODE
    interleaver_seed: int = 0

    @property
    def n_info(self) -> int:
        return self.layout.n_info_bits(self.code)

    @property
    def n_coded(self) -> int:
        return self.layout.n_coded_bits(self.code)

    @cached_property
    def permutation(self) -> np.ndarray:
        return make_permutation(self.n_coded, self.interleaver_seed)


def transmit(bits, fmt: FrameFormat):
    """Run the full chain; returns ``(coded, interleaved, x_full, pilot_mask)``."""
    coded = conv_encode(bits, fmt.code)
    c = interleave(coded, fmt.permutation)
    x, mask = insert_pilots(qpsk_map(c), fmt.layout)
    return coded, c, x, mask
