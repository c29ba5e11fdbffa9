"""Iterative receivers: BP-MF-EP, soft-input EKS and the known-PN reference.

All three share one outer loop (phase beliefs -> state messages -> equalizer
-> decoder -> EP symbol priors -> phase update).  They differ only in the
phase tracker that turns state beliefs into phase beliefs.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from numba import njit

from .decoder import Trellis, bcjr, hard_decide
from .equalizer import llr_from_extrinsic, log_probs_from_llr, run_equalizer, x_extrinsic
from .errors import MessageError
from .gaussian import DEFAULT_TOL, Tolerances, ep_project_many
from .obsfactor import state_messages, state_precision, state_vector, theta_messages
from .pn import RealGaussianArray, smooth, wrap_jumps
from .tx import PILOT_SYMBOL, QPSK_ALPHABET, CodeSpec, FrameFormat, deinterleave, interleave

RECEIVERS = ("bpmfep", "eks", "known_pn")


@dataclass(frozen=True)
class ReceiverOptions:
    circular_moment: str = "taylor"   # or "exact"
    damping: float = 1.0              # 1 = no damping of EP symbol messages
    eq_inner_iters: int = 1
    theta0_var: float = 0.0           # prior variance of the first phase sample
    tol: Tolerances = DEFAULT_TOL

    def __post_init__(self):
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.eq_inner_iters < 1:
            raise ValueError("eq_inner_iters must be >= 1")


@dataclass
class Diagnostics:
    pn_mse: list = field(default_factory=list)
    bit_errors: list = field(default_factory=list)
    theta_clamps: list = field(default_factory=list)
    extrinsic_clamps: list = field(default_factory=list)
    ep_clamps: list = field(default_factory=list)
    wrap_flags: list = field(default_factory=list)
    iteration_ms: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ReceiverResult:
    bits: np.ndarray
    theta_mean: np.ndarray
    theta_var: np.ndarray
    info_llr: np.ndarray
    bits_per_iteration: list
    diagnostics: Diagnostics


# ---------------------------------------------------------------------------
# phase trackers
# ---------------------------------------------------------------------------

class BpMfTracker:
    """Gaussianised mean-field messages into the Wiener-chain smoother."""

    name = "bpmfep"

    def __init__(self, y, taps, noise_var, pn_var, opts: ReceiverOptions):
        self.y, self.taps, self.noise_var, self.pn_var, self.opts = y, taps, noise_var, pn_var, opts

    def initial(self):
        # no observation messages yet: vacuous m_{f_y -> theta} for every k
        edge = smooth(RealGaussianArray.vacuous(self.y.size), self.pn_var,
                      self.opts.theta0_var, self.opts.tol)
        return edge.belief.mean, edge.belief.variance, 0

    def update(self, theta_mean, state_mean, state_cov):
        m, p, clamped = theta_messages(self.y, self.taps, self.noise_var, state_mean,
                                       theta_mean, self.opts.tol)
        edge = smooth(RealGaussianArray(m, p), self.pn_var, self.opts.theta0_var, self.opts.tol)
        return edge.belief.mean, edge.belief.variance, int(clamped.sum())


@njit(cache=True)
def _eks(y, a, R, pn_var, p0, use_obs):
    K = y.size
    mp = np.empty(K)
    pp = np.empty(K)
    mf = np.empty(K)
    pf = np.empty(K)
    for k in range(K):
        if k == 0:
            mp[0] = 0.0
            pp[0] = p0
        else:
            mp[k] = mf[k - 1]
            pp[k] = pf[k - 1] + pn_var
        if not use_obs or pp[k] == 0.0:
            mf[k] = mp[k]
            pf[k] = pp[k]
            continue
        rot = np.exp(1j * mp[k])
        H = 1j * rot * a[k]                    # d/dtheta of e^{j theta} a at the prediction
        nu = y[k] - rot * a[k]
        gain = 2.0 * (H.real * H.real + H.imag * H.imag) / R[k]
        pf[k] = 1.0 / (1.0 / pp[k] + gain)
        mf[k] = mp[k] + pf[k] * 2.0 * (np.conj(H) * nu).real / R[k]
    ms = mf.copy()
    ps = pf.copy()
    for k in range(K - 2, -1, -1):
        if pp[k + 1] > 0.0:
            g = pf[k] / pp[k + 1]
        else:
            g = 0.0
        ms[k] = mf[k] + g * (ms[k + 1] - mp[k + 1])
        ps[k] = pf[k] + g * g * (ps[k + 1] - pp[k + 1])
    return ms, ps


def eks_smooth(y, a, R, pn_var, theta0_var=0.0, use_obs=True):
    """Extended Kalman smoother for ``y_k = e^{j theta_k} a_k + w_k``,
    ``w_k ~ CN(0, R_k)``, linearised at the one-step prediction."""
    y = np.ascontiguousarray(y, dtype=complex)
    return _eks(y, np.ascontiguousarray(a, dtype=complex), np.ascontiguousarray(R, dtype=float),
                float(pn_var), float(theta0_var), bool(use_obs))


class EksTracker:
    """Soft-input EKS: first-order linearisation of the observation model,
    soft symbol means as regressors, symbol uncertainty added to the noise."""

    name = "eks"

    def __init__(self, y, taps, noise_var, pn_var, opts: ReceiverOptions):
        self.y, self.taps, self.noise_var, self.pn_var, self.opts = y, taps, noise_var, pn_var, opts
        self.hv = state_vector(taps)

    def initial(self):
        ones = np.ones(self.y.size)
        m, v = eks_smooth(self.y, ones, ones, self.pn_var, self.opts.theta0_var, use_obs=False)
        return m, v, 0

    def update(self, theta_mean, state_mean, state_cov):
        a = state_mean @ self.hv
        R = self.noise_var + np.einsum("i,kij,j->k", self.hv, state_cov, self.hv.conj()).real
        m, v = eks_smooth(self.y, a, np.maximum(R, self.noise_var), self.pn_var,
                          self.opts.theta0_var)
        return m, v, 0


class KnownTracker:
    name = "known_pn"

    def __init__(self, theta_true, opts: ReceiverOptions):
        self.theta = np.asarray(theta_true, float)
        self.var = np.full(self.theta.size, 1.0 / opts.tol.delta_precision)

    def initial(self):
        return self.theta.copy(), self.var.copy(), 0

    def update(self, theta_mean, state_mean, state_cov):
        return self.theta.copy(), self.var.copy(), 0


# ---------------------------------------------------------------------------
# shared loop
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _trellis(code: CodeSpec) -> Trellis:
    return Trellis.from_code(code)


def _receive(y, taps, noise_var, fmt: FrameFormat, iters, tracker, opts: ReceiverOptions,
             theta_true=None, bits_true=None, pin_theta=None) -> ReceiverResult:
    if iters < 1:
        raise ValueError("iters must be >= 1")
    y = np.asarray(y, complex)
    taps = np.asarray(taps, complex)
    layout, tol = fmt.layout, opts.tol
    M, L = layout.total_symbols, taps.size
    if y.size != M + L - 1:
        raise ValueError(f"expected {M + L - 1} observations, got {y.size}")
    pilot = layout.pilot_mask
    data = ~pilot
    trellis = _trellis(fmt.code)
    perm = fmt.permutation
    n_info = fmt.n_info

    x_mean = np.where(pilot, PILOT_SYMBOL, 0j)
    x_var = np.where(pilot, tol.pilot_variance, 1.0)
    obs_W = state_precision(taps, noise_var)

    def pinned(mean, var):
        if pin_theta is None:
            return mean, var
        return np.asarray(pin_theta, float).copy(), np.full(M + L - 1, 1.0 / tol.delta_precision)

    th_m, th_v, _ = tracker.initial()
    th_m, th_v = pinned(th_m, th_v)
    diag = Diagnostics()
    per_iter = []
    for it in range(iters):
        t0 = time.perf_counter()
        obs_b = state_messages(y, taps, noise_var, th_m, th_v, opts.circular_moment)
        n_ext = n_ep = 0
        for _ in range(opts.eq_inner_iters):
            eq = run_equalizer(x_mean, x_var, obs_W, obs_b)
            em, ev, ext_cl = x_extrinsic(eq.belief_mean, eq.belief_cov, x_mean, x_var, tol)
            em, ev = em[data], ev[data]
            llr_c = llr_from_extrinsic(em, ev).reshape(-1)
            info_llr, ext_code = bcjr(deinterleave(llr_c, perm), trellis, n_info)
            logp = log_probs_from_llr(interleave(ext_code, perm).reshape(-1, 2))
            _, _, mm, mv, ep_cl = ep_project_many(em, ev, logp, QPSK_ALPHABET, tol)
            if opts.damping < 1.0:
                mm, mv = _damp(x_mean[data], x_var[data], mm, mv, opts.damping)
            x_mean[data], x_var[data] = mm, mv
            n_ext += int(ext_cl[data].sum())
            n_ep += int(ep_cl.sum())
        bits = hard_decide(info_llr)
        per_iter.append(bits)
        # state beliefs with the decoder-updated symbol priors
        eq = run_equalizer(x_mean, x_var, obs_W, obs_b)
        try:
            th_m, th_v, n_th = tracker.update(th_m, eq.belief_mean, eq.belief_cov)
        except MessageError as exc:
            raise type(exc)(f"iteration {it + 1}: {exc}") from exc
        th_m, th_v = pinned(th_m, th_v)
        diag.iteration_ms.append(1e3 * (time.perf_counter() - t0))
        diag.theta_clamps.append(n_th)
        diag.extrinsic_clamps.append(n_ext)
        diag.ep_clamps.append(n_ep)
        diag.wrap_flags.append(int(wrap_jumps(th_m).size))
        if theta_true is not None:
            diag.pn_mse.append(float(np.mean((th_m - theta_true) ** 2)))
        if bits_true is not None:
            diag.bit_errors.append(int(np.count_nonzero(bits != bits_true)))
    return ReceiverResult(bits, th_m, th_v, info_llr, per_iter, diag)


def _damp(old_m, old_v, new_m, new_v, d):
    old_p, new_p = 1.0 / old_v, 1.0 / new_v
    p = d * new_p + (1 - d) * old_p
    return (d * new_p * new_m + (1 - d) * old_p * old_m) / p, 1.0 / p


def bpmfep_receive(y, taps, noise_var, pn_var, fmt: FrameFormat, iters=5, *, opts=None,
                   theta_true=None, bits_true=None, pin_theta=None) -> ReceiverResult:
    """Combined BP-MF-EP receiver.

    ``theta_true``/``bits_true`` only feed the per-iteration diagnostics.
    ``pin_theta`` replaces the phase beliefs by deltas at the given
    trajectory after every update (the message computations still run).
    """
    opts = opts or ReceiverOptions()
    tracker = BpMfTracker(np.asarray(y, complex), np.asarray(taps, complex), noise_var, pn_var, opts)
    return _receive(y, taps, noise_var, fmt, iters, tracker, opts, theta_true, bits_true, pin_theta)


def eks_receive(y, taps, noise_var, pn_var, fmt: FrameFormat, iters=5, *, opts=None,
                theta_true=None, bits_true=None, pin_theta=None) -> ReceiverResult:
    """Soft-input EKS phase tracking inside the same equalizer/decoder loop."""
    opts = opts or ReceiverOptions()
    tracker = EksTracker(np.asarray(y, complex), np.asarray(taps, complex), noise_var, pn_var, opts)
    return _receive(y, taps, noise_var, fmt, iters, tracker, opts, theta_true, bits_true, pin_theta)


def known_pn_receive(y, taps, noise_var, theta_true, fmt: FrameFormat, iters=5, *, opts=None,
                     bits_true=None) -> ReceiverResult:
    opts = opts or ReceiverOptions()
    tracker = KnownTracker(theta_true, opts)
    return _receive(y, taps, noise_var, fmt, iters, tracker, opts, theta_true, bits_true)


def receive(name, y, taps, noise_var, pn_var, fmt, iters, theta_true, bits_true=None, opts=None):
    if name == "bpmfep":
        return bpmfep_receive(y, taps, noise_var, pn_var, fmt, iters, opts=opts,
                              theta_true=theta_true, bits_true=bits_true)
    if name == "eks":
        return eks_receive(y, taps, noise_var, pn_var, fmt, iters, opts=opts,
                           theta_true=theta_true, bits_true=bits_true)
    if name == "known_pn":
        return known_pn_receive(y, taps, noise_var, theta_true, fmt, iters, opts=opts,
                                bits_true=bits_true)
    raise ValueError(f"unknown receiver {name!r}; choose from {RECEIVERS}")


def estimate_pn_known_symbols(y, states, taps, noise_var, pn_var, iters=20,
                              opts: ReceiverOptions | None = None):
    """BP-MF phase estimation with the channel states known exactly.

    The state beliefs are deltas at ``states``; only the phase messages
    iterate.  Returns the final phase belief ``(mean, variance)``.
    """
    opts = opts or ReceiverOptions()
    tracker = BpMfTracker(np.asarray(y, complex), np.asarray(taps, complex), noise_var, pn_var, opts)
    states = np.asarray(states, complex)
    cov = np.zeros(states.shape + (states.shape[1],), complex)
    m, v, _ = tracker.initial()
    for _ in range(iters):
        m, v, _ = tracker.update(m, states, cov)
    return m, v
