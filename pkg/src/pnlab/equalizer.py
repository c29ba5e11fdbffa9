"""Gaussian BP over the channel-state chain with EP symbol priors.

The state ``s_k = [x_{k-L+1}, ..., x_k]`` evolves as ``s_k = G s_{k-1} + e x_k``.
Forward messages are kept in moment form, since the zero-padded start state
and pilot symbols make their covariances singular.  Backward messages are
kept in information form, since they start vacuous and the observation
messages are rank one.  A belief combines one of each by solving
``(I + C W) X = [C, m + C b]``, which stays well posed for singular ``C`` or
``W``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import log_expit

from .gaussian import DEFAULT_TOL, CGaussInfo, Tolerances, cs_divide

SQRT8 = 2.0 * np.sqrt(2.0)


@dataclass(frozen=True)
class StateModel:
    L: int

    @property
    def G(self) -> np.ndarray:
        return np.eye(self.L, k=1)

    @property
    def e(self) -> np.ndarray:
        e = np.zeros(self.L)
        e[-1] = 1.0
        return e


@dataclass
class EqEdgeState:
    """Every message of one equalizer sweep, indexed by k = 0 .. K-1."""

    fwd_mean: np.ndarray     # (K, L)   moment form
    fwd_cov: np.ndarray      # (K, L, L)
    bwd_W: np.ndarray        # (K, L, L) information form
    bwd_b: np.ndarray        # (K, L)
    obs_W: np.ndarray        # (K, L, L)
    obs_b: np.ndarray        # (K, L)
    x_mean: np.ndarray       # (K,) padded symbol priors
    x_var: np.ndarray        # (K,)
    belief_mean: np.ndarray  # (K, L)
    belief_cov: np.ndarray   # (K, L, L)

    def fwd(self, k) -> CGaussInfo:
        return CGaussInfo.from_moments(self.fwd_mean[k], self.fwd_cov[k])

    def bwd(self, k) -> CGaussInfo:
        return CGaussInfo(self.bwd_W[k], self.bwd_b[k])

    def obs(self, k) -> CGaussInfo:
        return CGaussInfo(self.obs_W[k], self.obs_b[k])


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@njit(cache=True)
def _solve(A, R):
    """Overwrite R with A^{-1} R (partial pivoting); A is destroyed."""
    n = A.shape[0]
    ncol = R.shape[1]
    for c in range(n):
        p = c
        best = abs(A[c, c])
        for r in range(c + 1, n):
            v = abs(A[r, c])
            if v > best:
                best = v
                p = r
        if p != c:
            for j in range(n):
                t = A[c, j]
                A[c, j] = A[p, j]
                A[p, j] = t
            for j in range(ncol):
                t = R[c, j]
                R[c, j] = R[p, j]
                R[p, j] = t
        inv = 1.0 / A[c, c]
        for r in range(c + 1, n):
            f = A[r, c] * inv
            if f != 0:
                for j in range(c + 1, n):
                    A[r, j] -= f * A[c, j]
                for j in range(ncol):
                    R[r, j] -= f * R[c, j]
    for c in range(n - 1, -1, -1):
        inv = 1.0 / A[c, c]
        for j in range(ncol):
            s = R[c, j]
            for k in range(c + 1, n):
                s -= A[c, k] * R[k, j]
            R[c, j] = s * inv


@njit(cache=True)
def _absorb(m, C, W, b, out_m, out_C, A, R):
    """Moment-form N(m, C) times information-form (W, b)."""
    L = m.size
    for i in range(L):
        s = m[i]
        for l in range(L):
            s += C[i, l] * b[l]
        R[i, L] = s
        for j in range(L):
            acc = 0j
            for l in range(L):
                acc += C[i, l] * W[l, j]
            A[i, j] = acc
            R[i, j] = C[i, j]
        A[i, i] += 1.0
    _solve(A, R)
    for i in range(L):
        out_m[i] = R[i, L]
        for j in range(L):
            out_C[i, j] = 0.5 * (R[i, j] + np.conj(R[j, i]))


@njit(cache=True)
def _forward(xm, xv, Wo, bo, fm, fC, um, uC):
    K, L = bo.shape
    A = np.empty((L, L), np.complex128)
    R = np.empty((L, L + 1), np.complex128)
    fm[0, :] = 0.0
    fC[0, :, :] = 0.0
    fm[0, L - 1] = xm[0]
    fC[0, L - 1, L - 1] = xv[0]
    for k in range(1, K):
        _absorb(fm[k - 1], fC[k - 1], Wo[k - 1], bo[k - 1], um[k - 1], uC[k - 1], A, R)
        for i in range(L - 1):
            fm[k, i] = um[k - 1, i + 1]
            for j in range(L - 1):
                fC[k, i, j] = uC[k - 1, i + 1, j + 1]
            fC[k, i, L - 1] = 0.0
            fC[k, L - 1, i] = 0.0
        fm[k, L - 1] = xm[k]
        fC[k, L - 1, L - 1] = xv[k]
    _absorb(fm[K - 1], fC[K - 1], Wo[K - 1], bo[K - 1], um[K - 1], uC[K - 1], A, R)


@njit(cache=True)
def _backward(xm, xv, Wo, bo, Wb, qb):
    K, L = bo.shape
    n = L - 1
    Q = np.empty((L, L), np.complex128)
    q = np.empty(L, np.complex128)
    Wb[K - 1, :, :] = 0.0
    qb[K - 1, :] = 0.0
    for k in range(K - 2, -1, -1):
        for i in range(L):
            q[i] = qb[k + 1, i] + bo[k + 1, i]
            for j in range(L):
                Q[i, j] = Wb[k + 1, i, j] + Wo[k + 1, i, j]
        Wb[k, :, :] = 0.0
        qb[k, :] = 0.0
        v = xv[k + 1]
        mu = xm[k + 1]
        if v > 0.0:
            d = Q[n, n].real + 1.0 / v
            a = q[n] + mu / v
            for i in range(n):
                qb[k, i + 1] = q[i] - Q[i, n] * a / d
                for j in range(n):
                    Wb[k, i + 1, j + 1] = Q[i, j] - Q[i, n] * Q[n, j] / d
        else:
            for i in range(n):
                qb[k, i + 1] = q[i] - Q[i, n] * mu
                for j in range(n):
                    Wb[k, i + 1, j + 1] = Q[i, j]


@njit(cache=True)
def _beliefs(um, uC, Wb, qb, bm, bC):
    K, L = um.shape
    A = np.empty((L, L), np.complex128)
    R = np.empty((L, L + 1), np.complex128)
    for k in range(K):
        _absorb(um[k], uC[k], Wb[k], qb[k], bm[k], bC[k], A, R)


# ---------------------------------------------------------------------------
# public surface
# ---------------------------------------------------------------------------

def _pad_priors(x_mean, x_var, L):
    xm = np.concatenate([np.asarray(x_mean, complex), np.zeros(L - 1, complex)])
    xv = np.concatenate([np.asarray(x_var, float), np.zeros(L - 1)])
    return xm, xv


def _obs_arrays(obs_W, obs_b):
    obs_b = np.ascontiguousarray(obs_b, dtype=complex)
    K, L = obs_b.shape
    obs_W = np.asarray(obs_W, dtype=complex)
    if obs_W.shape == (L, L):
        obs_W = np.broadcast_to(obs_W, (K, L, L))
    return np.ascontiguousarray(obs_W), obs_b


def eq_forward(x_mean, x_var, obs_W, obs_b):
    """Forward messages ``fwd[k]`` as ``(mean, cov)`` arrays of shape (K, L), (K, L, L).

    ``x_mean``/``x_var`` are the Gaussian priors on the M data/pilot symbols;
    positions beyond the frame are zero padding.  Also returns the forward
    messages already multiplied by the local observation message.
    """
    Wo, bo = _obs_arrays(obs_W, obs_b)
    K, L = bo.shape
    xm, xv = _pad_priors(x_mean, x_var, L)
    fm = np.empty((K, L), complex)
    fC = np.empty((K, L, L), complex)
    um = np.empty((K, L), complex)
    uC = np.empty((K, L, L), complex)
    _forward(xm, xv, Wo, bo, fm, fC, um, uC)
    return fm, fC, um, uC


def eq_backward(x_mean, x_var, obs_W, obs_b):
    """Backward messages in information form, ``(W, b)`` of shape (K, L, L), (K, L)."""
    Wo, bo = _obs_arrays(obs_W, obs_b)
    K, L = bo.shape
    xm, xv = _pad_priors(x_mean, x_var, L)
    Wb = np.empty((K, L, L), complex)
    qb = np.empty((K, L), complex)
    _backward(xm, xv, Wo, bo, Wb, qb)
    return Wb, qb


def state_beliefs(filt_mean, filt_cov, bwd_W, bwd_b):
    """Combine forward-times-observation messages with backward messages."""
    K, L = filt_mean.shape
    bm = np.empty((K, L), complex)
    bC = np.empty((K, L, L), complex)
    _beliefs(np.ascontiguousarray(filt_mean), np.ascontiguousarray(filt_cov),
             np.ascontiguousarray(bwd_W), np.ascontiguousarray(bwd_b), bm, bC)
    return bm, bC


def run_equalizer(x_mean, x_var, obs_W, obs_b) -> EqEdgeState:
    """One forward sweep, one backward sweep and the state beliefs."""
    Wo, bo = _obs_arrays(obs_W, obs_b)
    fm, fC, um, uC = eq_forward(x_mean, x_var, Wo, bo)
    Wb, qb = eq_backward(x_mean, x_var, Wo, bo)
    bm, bC = state_beliefs(um, uC, Wb, qb)
    xm, xv = _pad_priors(x_mean, x_var, bo.shape[1])
    return EqEdgeState(fm, fC, Wb, qb, Wo, bo, xm, xv, bm, bC)


def symbol_marginals(belief_mean, belief_cov, M):
    """Marginal of ``x_k`` read off the last coordinate of ``s_k``."""
    return belief_mean[:M, -1].copy(), np.maximum(belief_cov[:M, -1, -1].real, 0.0)


def x_extrinsic(belief_mean, belief_cov, x_mean, x_var, tol: Tolerances = DEFAULT_TOL):
    """Extrinsic symbol messages ``(mean, var, clamped)`` for k = 0 .. M-1."""
    x_mean = np.asarray(x_mean, complex)
    mm, mv = symbol_marginals(belief_mean, belief_cov, x_mean.size)
    return cs_divide(mm, mv, x_mean, x_var, tol)


def llr_from_extrinsic(mean, var) -> np.ndarray:
    """Gray-QPSK bit LLRs ``log p(b=0)/p(b=1)``, shape (n, 2)."""
    mean = np.atleast_1d(np.asarray(mean, complex))
    var = np.atleast_1d(np.asarray(var, float))
    return np.stack([SQRT8 * mean.real / var, SQRT8 * mean.imag / var], axis=1)


def log_probs_from_llr(llrs) -> np.ndarray:
    """Symbol log-probabilities over ``QPSK_ALPHABET`` from bit LLRs (n, 2)."""
    llrs = np.atleast_2d(np.asarray(llrs, float))
    lp0, lp1 = log_expit(llrs), log_expit(-llrs)   # log p(b=0), log p(b=1)
    return np.stack([lp0[:, 0] + lp0[:, 1], lp0[:, 0] + lp1[:, 1],
                     lp1[:, 0] + lp0[:, 1], lp1[:, 0] + lp1[:, 1]], axis=1)


def probs_from_llr(llrs) -> np.ndarray:
    return np.exp(log_probs_from_llr(llrs))
