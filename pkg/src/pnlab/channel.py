"""Wiener phase noise and the ISI observation model."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

PROAKIS_C = np.array([0.227, 0.460, 0.668, 0.460, 0.227])


@dataclass(frozen=True)
class ChannelSpec:
    taps: np.ndarray = field(default_factory=lambda: PROAKIS_C.copy())
    noise_var: float = 0.1
    pn_var: float = 1e-4
    theta0_mode: str = "zero"

    def __post_init__(self):
        taps = np.atleast_1d(np.asarray(self.taps, dtype=complex))
        if taps.ndim != 1 or taps.size < 1:
            raise ValueError("channel needs at least one tap")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")
        if self.pn_var < 0:
            raise ValueError("pn_var must be nonnegative")
        if self.theta0_mode not in ("zero", "uniform"):
            raise ValueError(f"unknown theta0_mode {self.theta0_mode!r}")
        object.__setattr__(self, "taps", taps)

    @property
    def L(self) -> int:
        return self.taps.size

    @property
    def snr_db(self) -> float:
        return snr_db_from_noise(self.taps, self.noise_var)


def noise_var_from_snr(taps, snr_db: float, symbol_energy: float = 1.0) -> float:
    """Receive SNR convention: ``||h||^2 E|x|^2 / sigma_n^2``."""
    return float(np.sum(np.abs(taps) ** 2) * symbol_energy / 10 ** (snr_db / 10))


def snr_db_from_noise(taps, noise_var: float, symbol_energy: float = 1.0) -> float:
    return float(10 * np.log10(np.sum(np.abs(taps) ** 2) * symbol_energy / noise_var))


def gen_pn(n: int, pn_var: float, theta0_mode: str, rng: np.random.Generator) -> np.ndarray:
    """Wiener phase trajectory of length ``n``."""
    if pn_var < 0:
        raise ValueError("pn_var must be nonnegative")
    theta0 = rng.uniform(0, 2 * np.pi) if theta0_mode == "uniform" else 0.0
    steps = rng.standard_normal(n - 1) * np.sqrt(pn_var)
    return theta0 + np.concatenate([[0.0], np.cumsum(steps)])


def isi(x, taps) -> np.ndarray:
    """Noiseless linear convolution, length ``len(x) + L - 1``."""
    return np.convolve(np.asarray(x, dtype=complex), np.asarray(taps, dtype=complex))


def observe(x, theta, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    """``y_k = exp(j theta_k) sum_l h_l x_{k-l} + n_k`` for k = 0 .. M+L-2."""
    clean = isi(x, spec.taps)
    theta = np.asarray(theta, dtype=float)
    if theta.size != clean.size:
        raise ValueError(f"theta has {theta.size} samples, need {clean.size}")
    noise = (rng.standard_normal(clean.size) + 1j * rng.standard_normal(clean.size))
    return np.exp(1j * theta) * clean + np.sqrt(spec.noise_var / 2) * noise


@dataclass
class FrameTruth:
    bits: np.ndarray
    coded: np.ndarray
    x: np.ndarray
    pilot_mask: np.ndarray
    theta: np.ndarray
    y_clean: np.ndarray
    y: np.ndarray

    def states(self, L: int) -> np.ndarray:
        """Channel states ``s_k = [x_{k-L+1}, ..., x_k]`` for every k."""
        padded = np.concatenate([np.zeros(L - 1, complex), self.x, np.zeros(L - 1, complex)])
        K = self.x.size + L - 1
        idx = np.arange(K)[:, None] + np.arange(L)[None, :]
        return padded[idx]

    def dump_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "theta", "re_y", "im_y"])
            for k, (t, y) in enumerate(zip(self.theta, self.y)):
                w.writerow([k, repr(float(t)), repr(float(y.real)), repr(float(y.imag))])


def simulate_frame(fmt, spec: ChannelSpec, rng: np.random.Generator) -> FrameTruth:
    """Draw info bits, phase noise and noise for one frame, in that order."""
    from .tx import transmit

    bits = rng.integers(0, 2, fmt.n_info).astype(np.int8)
    coded, _, x, mask = transmit(bits, fmt)
    K = x.size + spec.L - 1
    theta = gen_pn(K, spec.pn_var, spec.theta0_mode, rng)
    clean = isi(x, spec.taps)
    y = observe(x, theta, spec, rng)
    return FrameTruth(bits, coded, x, mask, theta, clean, y)
