"""Brute-force reference computations.

None of these share numerical code with the modules they are used to
check: they build the full joint problem and solve it directly.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg


def dense_gaussian_oracle(P, h, full_cov: bool = False):
    """Moments of ``exp(-x^H P x / c + Re[x^H h] ...)`` given precision ``P`` and
    precision-mean ``h``.

    Returns ``(mean, marginal_variances)`` or ``(mean, cov)`` with
    ``full_cov``.
    """
    P = np.asarray(P)
    if P.shape[0] > 512:
        raise ValueError("dense oracle limited to 512 dimensions")
    try:
        cov = scipy.linalg.inv(P)
    except scipy.linalg.LinAlgError as exc:
        raise ValueError("singular joint precision") from exc
    mean = scipy.linalg.solve(P, h)
    if full_cov:
        return mean, cov
    return mean, np.real(np.diag(cov)).copy()


def wiener_system(inc_mean, inc_prec, pn_var, theta0_prec):
    """Joint precision of a Wiener chain with a Gaussian prior on the first
    sample and independent Gaussian evidence on every sample."""
    inc_mean = np.asarray(inc_mean, float)
    n = inc_mean.size
    q = 1.0 / pn_var
    P = np.diag(np.asarray(inc_prec, float).copy())
    for k in range(1, n):
        P[k, k] += q
        P[k - 1, k - 1] += q
        P[k, k - 1] -= q
        P[k - 1, k] -= q
    P[0, 0] += theta0_prec
    h = np.asarray(inc_prec, float) * inc_mean
    return P, h


def isi_system(x_mean, x_var, obs_W, obs_b):
    """Joint complex precision over the M symbols for the state-space model
    with Gaussian symbol priors and information-form evidence on every state.

    Returns ``(P, h, selectors)`` where ``selectors[k]`` maps the symbol
    vector to ``s_k`` (zero padding dropped).
    """
    x_mean = np.asarray(x_mean, complex)
    x_var = np.asarray(x_var, float)
    M = x_mean.size
    obs_b = np.asarray(obs_b, complex)
    K, L = obs_b.shape
    obs_W = np.broadcast_to(np.asarray(obs_W, complex), (K, L, L))
    P = np.diag(1.0 / x_var).astype(complex)
    h = x_mean / x_var
    selectors = []
    for k in range(K):
        A = np.zeros((L, M), complex)
        for i in range(L):
            idx = k - L + 1 + i
            if 0 <= idx < M:
                A[i, idx] = 1.0
        selectors.append(A)
        P += A.conj().T @ obs_W[k] @ A
        h = h + A.conj().T @ obs_b[k]
    return P, h, selectors


def isi_state_marginals(x_mean, x_var, obs_W, obs_b):
    """Exact marginal mean/covariance of every state ``s_k``."""
    P, h, sel = isi_system(x_mean, x_var, obs_W, obs_b)
    mean, cov = dense_gaussian_oracle(P, h, full_cov=True)
    means = np.array([A @ mean for A in sel])
    covs = np.array([A @ cov @ A.conj().T for A in sel])
    return means, covs


def _poly_encode(bits, generators, K):
    taps = [[(g >> (K - 1 - i)) & 1 for i in range(K)] for g in generators]
    u = list(bits) + [0] * (K - 1)
    out = []
    for t in range(len(u)):
        for tp in taps:
            acc = 0
            for i, c in enumerate(tp):
                if c and t - i >= 0:
                    acc ^= u[t - i]
            out.append(acc)
    return out


def exhaustive_map(coded_llrs, n_info, generators=(0o23, 0o35), K=5):
    """Exact per-bit posteriors by enumerating every information word.

    Returns ``(info_posteriors, coded_posteriors)`` as LLRs.
    """
    llr = np.asarray(coded_llrs, float)
    words = np.array(list(itertools.product((0, 1), repeat=n_info)), dtype=np.int64)
    code = np.array([_poly_encode(w, generators, K) for w in words], dtype=np.int64)
    if code.shape[1] != llr.size:
        raise ValueError("LLR length mismatch")
    logp = ((0.5 - code) * llr).sum(axis=1)

    def marg(bits):
        l0 = np.logaddexp.reduce(np.where(bits == 0, logp[:, None], -np.inf), axis=0)
        l1 = np.logaddexp.reduce(np.where(bits == 1, logp[:, None], -np.inf), axis=0)
        return l0 - l1

    return marg(words), marg(code)


@dataclass
class GridPosterior:
    grid: np.ndarray
    marginals: np.ndarray       # (K, n_grid), rows sum to one
    mean: np.ndarray
    variance: np.ndarray
    under_resolved: np.ndarray  # posterior std below 3 grid steps


def grid_pn_oracle(y, states, taps, noise_var, pn_var, n_grid=4096, theta0="delta"):
    """Discretised forward-backward for the phase given known channel states.

    ``states`` is the (K, L) array of true ``s_k``.  The grid covers
    ``[-pi, pi)``; transitions use a wrapped Gaussian kernel.
    """
    y = np.asarray(y, complex)
    K = y.size
    if K > 8 + len(taps) - 1:
        raise ValueError("grid oracle is restricted to frames of at most 8 symbols")
    step = 2 * np.pi / n_grid
    grid = -np.pi + step * np.arange(n_grid)
    a = np.asarray(states, complex) @ np.asarray(taps, complex)[::-1]
    resid = y[:, None] - np.exp(1j * grid)[None, :] * a[:, None]
    loglik = -np.abs(resid) ** 2 / noise_var
    lik = np.exp(loglik - loglik.max(axis=1, keepdims=True))
    d = grid[:, None] - grid[None, :]
    d = (d + np.pi) % (2 * np.pi) - np.pi
    if pn_var > 0:
        T = np.exp(-0.5 * d ** 2 / pn_var)
        T /= T.sum(axis=0, keepdims=True)
    else:
        T = np.eye(n_grid)
    if theta0 == "delta":
        prior = np.zeros(n_grid)
        prior[np.argmin(np.abs(grid))] = 1.0
    elif theta0 == "uniform":
        prior = np.full(n_grid, 1.0 / n_grid)
    else:
        raise ValueError(f"unknown theta0 {theta0!r}")
    fwd = np.empty((K, n_grid))
    f = prior
    for k in range(K):
        if k:
            f = T @ (fwd[k - 1] * lik[k - 1])
            f /= f.sum()
        fwd[k] = f
    bwd = np.empty((K, n_grid))
    bwd[-1] = 1.0
    for k in range(K - 2, -1, -1):
        g = T.T @ (bwd[k + 1] * lik[k + 1])
        bwd[k] = g / g.sum()
    post = fwd * bwd * lik
    post /= post.sum(axis=1, keepdims=True)
    mean = np.angle(post @ np.exp(1j * grid))
    dev = (grid[None, :] - mean[:, None] + np.pi) % (2 * np.pi) - np.pi
    var = (post * dev ** 2).sum(axis=1)
    return GridPosterior(grid, post, mean, var, np.sqrt(var) < 3 * step)
