"""Forward/backward Gaussian smoothing over the Wiener phase chain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import AllVacuousError
from .gaussian import DEFAULT_TOL, RealGaussian, Tolerances


@dataclass
class RealGaussianArray:
    """Scalar Gaussian messages indexed by time, precision form."""

    mean: np.ndarray
    precision: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.precision = np.asarray(self.precision, dtype=float)
        if self.mean.shape != self.precision.shape:
            raise ValueError("mean/precision shape mismatch")

    @classmethod
    def vacuous(cls, n: int) -> "RealGaussianArray":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_list(cls, msgs) -> "RealGaussianArray":
        return cls([m.mean for m in msgs], [m.precision for m in msgs])

    def __len__(self):
        return self.mean.size

    def __getitem__(self, k) -> RealGaussian:
        return RealGaussian(float(self.mean[k]), float(self.precision[k]))

    @property
    def variance(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.where(self.precision > 0, 1.0 / self.precision, np.inf)


@dataclass
class PnEdgeState:
    fwd: RealGaussianArray
    bwd: RealGaussianArray
    incoming: RealGaussianArray
    belief: RealGaussianArray


@njit(cache=True)
def _chain_pass(inc_m, inc_p, pn_var, start_m, start_p, reverse):
    K = inc_m.size
    out_m = np.empty(K)
    out_p = np.empty(K)
    first = K - 1 if reverse else 0
    out_m[first] = start_m
    out_p[first] = start_p
    for step in range(1, K):
        k = K - 1 - step if reverse else step
        j = k + 1 if reverse else k - 1
        p = out_p[j] + inc_p[j]
        if p == 0.0:
            out_m[k] = 0.0
            out_p[k] = 0.0
        else:
            out_m[k] = (out_p[j] * out_m[j] + inc_p[j] * inc_m[j]) / p
            out_p[k] = 1.0 / (1.0 / p + pn_var)
    return out_m, out_p


def initial_precision(theta0_var: float, tol: Tolerances = DEFAULT_TOL) -> float:
    if theta0_var == 0:
        return tol.delta_precision
    return 0.0 if np.isinf(theta0_var) else 1.0 / theta0_var


def forward_pass(incoming: RealGaussianArray, pn_var: float, theta0_var: float = 0.0,
                 tol: Tolerances = DEFAULT_TOL) -> RealGaussianArray:
    """Forward messages; index 0 carries the initial phase prior N(0, theta0_var)."""
    m, p = _chain_pass(incoming.mean, incoming.precision, float(pn_var),
                       0.0, initial_precision(theta0_var, tol), False)
    return RealGaussianArray(m, p)


def backward_pass(incoming: RealGaussianArray, pn_var: float) -> RealGaussianArray:
    m, p = _chain_pass(incoming.mean, incoming.precision, float(pn_var), 0.0, 0.0, True)
    return RealGaussianArray(m, p)


def compute_beliefs(fwd: RealGaussianArray, bwd: RealGaussianArray,
                    incoming: RealGaussianArray) -> RealGaussianArray:
    prec = fwd.precision + bwd.precision + incoming.precision
    bad = np.flatnonzero(prec <= 0)
    if bad.size:
        raise AllVacuousError(int(bad[0]))
    pm = (fwd.precision * fwd.mean + bwd.precision * bwd.mean
          + incoming.precision * incoming.mean)
    return RealGaussianArray(pm / prec, prec)


def smooth(incoming: RealGaussianArray, pn_var: float, theta0_var: float = 0.0,
           tol: Tolerances = DEFAULT_TOL) -> PnEdgeState:
    """One full forward/backward sweep and the resulting phase beliefs."""
    fwd = forward_pass(incoming, pn_var, theta0_var, tol)
    bwd = backward_pass(incoming, pn_var)
    return PnEdgeState(fwd, bwd, incoming, compute_beliefs(fwd, bwd, incoming))


def wrap_jumps(belief_mean, threshold: float = np.pi / 2) -> np.ndarray:
    """Indices where consecutive phase estimates jump by more than ``threshold``."""
    return np.flatnonzero(np.abs(np.diff(belief_mean)) > threshold) + 1
