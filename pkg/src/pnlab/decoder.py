"""Log-domain BCJR for zero-terminated feedforward convolutional codes.

LLRs follow ``log p(bit=0) / p(bit=1)`` everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .tx import DEFAULT_CODE, CodeSpec


@dataclass(frozen=True)
class Trellis:
    n_states: int
    next_state: np.ndarray   # (S, 2)
    outputs: np.ndarray      # (S, 2, n_out) coded bits per branch

    @classmethod
    def from_code(cls, code: CodeSpec = DEFAULT_CODE) -> "Trellis":
        S = code.n_states
        K = code.constraint_length
        nxt = np.empty((S, 2), np.int64)
        out = np.empty((S, 2, code.n_out), np.int8)
        for s in range(S):
            for u in range(2):
                reg = (u << (K - 1)) | s     # bit K-1 is the newest input
                nxt[s, u] = reg >> 1
                for j, g in enumerate(code.generators):
                    out[s, u, j] = bin(reg & g).count("1") & 1
        return cls(S, nxt, out)


@njit(cache=True)
def _lse(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + np.log1p(np.exp(b - a))
    return b + np.log1p(np.exp(a - b))


@njit(cache=True)
def _bcjr(llr, nxt, out):
    S = nxt.shape[0]
    n_out = out.shape[2]
    T = llr.size // n_out
    # branch metric: sum_j (1 - 2 c_j) llr_j / 2
    gam = np.empty((T, S, 2))
    for t in range(T):
        for s in range(S):
            for u in range(2):
                g = 0.0
                for j in range(n_out):
                    g += (0.5 - out[s, u, j]) * llr[t * n_out + j]
                gam[t, s, u] = g
    alpha = np.full((T + 1, S), -np.inf)
    beta = np.full((T + 1, S), -np.inf)
    alpha[0, 0] = 0.0
    beta[T, 0] = 0.0
    for t in range(T):
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                ns = nxt[s, u]
                alpha[t + 1, ns] = _lse(alpha[t + 1, ns], a + gam[t, s, u])
        top = alpha[t + 1].max()
        for s in range(S):
            alpha[t + 1, s] -= top
    for t in range(T - 1, -1, -1):
        for s in range(S):
            acc = -np.inf
            for u in range(2):
                acc = _lse(acc, gam[t, s, u] + beta[t + 1, nxt[s, u]])
            beta[t, s] = acc
        top = beta[t].max()
        for s in range(S):
            beta[t, s] -= top
    info = np.empty(T)
    coded = np.empty(T * n_out)
    num = np.empty(n_out)
    den = np.empty(n_out)
    for t in range(T):
        u0 = -np.inf
        u1 = -np.inf
        for j in range(n_out):
            num[j] = -np.inf
            den[j] = -np.inf
        for s in range(S):
            a = alpha[t, s]
            if a == -np.inf:
                continue
            for u in range(2):
                m = a + gam[t, s, u] + beta[t + 1, nxt[s, u]]
                if u == 0:
                    u0 = _lse(u0, m)
                else:
                    u1 = _lse(u1, m)
                for j in range(n_out):
                    if out[s, u, j] == 0:
                        num[j] = _lse(num[j], m)
                    else:
                        den[j] = _lse(den[j], m)
        info[t] = u0 - u1
        for j in range(n_out):
            coded[t * n_out + j] = num[j] - den[j]
    return info, coded, alpha[T]


def bcjr(coded_llrs, trellis: Trellis, n_info: int | None = None, return_final_alpha=False):
    """MAP decoding of a zero-terminated codeword.

    Parameters
    ----------
    coded_llrs : array_like
        Channel LLRs in code order, length ``n_out * (n_info + tail)``.
    trellis : Trellis
    n_info : int, optional
        Number of information bits; defaults to all stages minus the tail
        implied by the trellis memory.

    Returns
    -------
    info_posteriors : ndarray, shape (n_info,)
    coded_extrinsics : ndarray
        Posterior minus intrinsic LLR for every coded bit.
    """
    llr = np.ascontiguousarray(coded_llrs, dtype=float)
    if not np.all(np.isfinite(llr)):
        raise ValueError("non-finite input LLRs")
    n_out = trellis.outputs.shape[2]
    if llr.size % n_out:
        raise ValueError("LLR length not a multiple of the code output width")
    memory = int(np.log2(trellis.n_states))
    T = llr.size // n_out
    if n_info is None:
        n_info = T - memory
    if n_info + memory != T:
        raise ValueError(f"{T} trellis stages do not match {n_info} info bits + {memory} tail")
    info, post, alpha_end = _bcjr(llr, trellis.next_state, trellis.outputs)
    if return_final_alpha:
        return info[:n_info], post - llr, alpha_end
    return info[:n_info], post - llr


def hard_decide(llrs) -> np.ndarray:
    """Bit 1 only for strictly negative LLRs."""
    return (np.asarray(llrs) < 0).astype(np.int8)
