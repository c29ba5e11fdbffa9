"""Gaussian messages and the EP moment-matching projection.

Three message families flow on the receiver's factor graph:

* :class:`RealGaussian` -- scalar real message on a phase sample, kept in
  precision form so that vacuous messages (precision 0) are exact.
* :class:`CGaussInfo` -- circular complex Gaussian over a channel state
  vector in information form ``exp(-s^H W s + 2 Re[s^H b])``.  ``W`` may be
  singular (observation messages are rank one).
* :class:`ScalarCGauss` -- circular complex Gaussian on one symbol, in moment
  form.  Zero variance encodes a known symbol.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DegeneratePriorError, NegativePrecisionError, SingularBeliefError


@dataclass(frozen=True)
class Tolerances:
    """Numerical constants shared by all kernels.

    Every field can be overridden from a run configuration.
    """

    delta_precision: float = 1e12      # stands in for an infinite precision
    vacuous_variance: float = 1e12     # stands in for an infinite variance
    divide_clamp: float = 1e-12        # precisions below this become vacuous
    negative_precision: float = 1e-9   # slack before a division is an error
    ep_variance_floor: float = 1e-8
    pilot_variance: float = 1e-12
    max_condition: float = 1e12
    ridge: float = 1e-10
    curvature_eps: float = 1e-9
    hermitian_tol: float = 1e-10

    def updated(self, **overrides) -> "Tolerances":
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})


DEFAULT_TOL = Tolerances()


# ---------------------------------------------------------------------------
# Real scalar messages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RealGaussian:
    mean: float = 0.0
    precision: float = 0.0

    def __post_init__(self):
        if not self.precision >= 0.0:
            raise NegativePrecisionError(f"precision {self.precision} < 0")

    @classmethod
    def vacuous(cls) -> "RealGaussian":
        return cls(0.0, 0.0)

    @classmethod
    def from_moments(cls, mean: float, variance: float, tol: Tolerances = DEFAULT_TOL) -> "RealGaussian":
        if variance < 0:
            raise NegativePrecisionError(f"variance {variance} < 0")
        if variance == 0:
            return cls(float(mean), tol.delta_precision)
        if np.isinf(variance):
            return cls(0.0, 0.0)
        return cls(float(mean), 1.0 / variance)

    @property
    def is_vacuous(self) -> bool:
        return self.precision == 0.0

    @property
    def variance(self) -> float:
        return np.inf if self.precision == 0.0 else 1.0 / self.precision


def rg_product(msgs: Sequence[RealGaussian]) -> RealGaussian:
    """Multiply scalar Gaussian messages (precisions add)."""
    prec = 0.0
    pm = 0.0
    for m in msgs:
        prec += m.precision
        pm += m.precision * m.mean
    if prec == 0.0:
        return RealGaussian.vacuous()
    return RealGaussian(pm / prec, prec)


def rg_divide(num: RealGaussian, den: RealGaussian, tol: Tolerances = DEFAULT_TOL) -> RealGaussian:
    """Extrinsic of ``num`` with respect to ``den``."""
    prec = num.precision - den.precision
    if prec < -tol.negative_precision:
        raise NegativePrecisionError(
            f"cannot divide precision {num.precision} by {den.precision}")
    if prec < tol.divide_clamp:
        return RealGaussian.vacuous()
    pm = num.precision * num.mean - den.precision * den.mean
    return RealGaussian(pm / prec, prec)


# ---------------------------------------------------------------------------
# Complex vector messages, information form
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CGaussInfo:
    W: np.ndarray
    b: np.ndarray
    _moments: list = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=complex))
        b = np.atleast_1d(np.asarray(self.b, dtype=complex))
        if W.shape != (b.size, b.size):
            raise ValueError(f"W shape {W.shape} incompatible with b of size {b.size}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.b.size

    @classmethod
    def vacuous(cls, dim: int) -> "CGaussInfo":
        return cls(np.zeros((dim, dim), complex), np.zeros(dim, complex))

    @classmethod
    def from_moments(cls, mean, cov) -> "CGaussInfo":
        W = np.linalg.inv(np.asarray(cov, dtype=complex))
        W = 0.5 * (W + W.conj().T)
        return cls(W, W @ np.asarray(mean, dtype=complex))

    def check(self, tol: Tolerances = DEFAULT_TOL) -> None:
        """Assert the Hermitian/PSD invariants."""
        asym = np.max(np.abs(self.W - self.W.conj().T)) if self.dim else 0.0
        if asym > tol.hermitian_tol * max(1.0, np.max(np.abs(self.W))):
            raise ValueError(f"W not Hermitian (asymmetry {asym:.3g})")
        lo = np.linalg.eigvalsh(0.5 * (self.W + self.W.conj().T)).min()
        if lo < -tol.hermitian_tol * max(1.0, np.max(np.abs(self.W))):
            raise ValueError(f"W not PSD (min eigenvalue {lo:.3g})")

    def moments(self, regularize: bool = False, tol: Tolerances = DEFAULT_TOL):
        """Return ``(mean, cov)``.

        A combination with condition number above ``tol.max_condition`` is
        singular; with ``regularize`` a ridge of
        ``tol.ridge * trace(W) / dim`` is added instead of raising.
        """
        if self._moments:
            return self._moments[0]
        W = 0.5 * (self.W + self.W.conj().T)
        cond = np.linalg.cond(W) if np.any(W) else np.inf
        if not cond < tol.max_condition:
            if not regularize or not np.any(W):
                raise SingularBeliefError(f"precision matrix singular (cond={cond:.3g})")
            W = W + tol.ridge * np.trace(W).real / self.dim * np.eye(self.dim)
        cov = np.linalg.inv(W)
        cov = 0.5 * (cov + cov.conj().T)
        out = (cov @ self.b, cov)
        self._moments.append(out)
        return out


def cg_combine(msgs: Sequence[CGaussInfo]) -> CGaussInfo:
    """Product of complex Gaussian messages in information form."""
    if not msgs:
        raise ValueError("nothing to combine")
    dim = msgs[0].dim
    if any(m.dim != dim for m in msgs):
        raise ValueError("dimension mismatch in cg_combine")
    return CGaussInfo(sum(m.W for m in msgs), sum(m.b for m in msgs))


# ---------------------------------------------------------------------------
# Scalar complex messages and EP
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarCGauss:
    mean: complex = 0j
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance >= 0.0:
            raise NegativePrecisionError(f"variance {self.variance} < 0")


def cs_divide(num_mean, num_var, den_mean, den_var, tol: Tolerances = DEFAULT_TOL):
    """Vectorised Gaussian division ``N(num) / N(den)`` on complex scalars.

    Returns ``(mean, var, clamped)``.  Entries whose precision difference is
    below ``tol.divide_clamp`` come back vacuous (variance
    ``tol.vacuous_variance``) and are flagged in ``clamped``.
    """
    num_mean = np.asarray(num_mean, dtype=complex)
    num_var = np.asarray(num_var, dtype=float)
    den_var = np.asarray(den_var, dtype=float)
    num_prec = 1.0 / np.maximum(num_var, 1e-300)
    den_prec = np.where(den_var >= tol.vacuous_variance, 0.0, 1.0 / np.maximum(den_var, 1e-300))
    prec = num_prec - den_prec
    clamped = prec < tol.divide_clamp
    safe = np.where(clamped, 1.0, prec)
    mean = (num_prec * num_mean - den_prec * np.asarray(den_mean, dtype=complex)) / safe
    var = 1.0 / safe
    mean = np.where(clamped, 0j, mean)
    var = np.where(clamped, tol.vacuous_variance, var)
    return mean, var, clamped


def ep_project_many(ext_mean, ext_var, log_prior, alphabet, tol: Tolerances = DEFAULT_TOL):
    """Moment-match the discrete symbol posterior for a batch of symbols.

    Parameters
    ----------
    ext_mean, ext_var : array_like, shape (n,)
        Extrinsic Gaussian message from the equalizer on each symbol.
    log_prior : array_like, shape (n, q)
        Log prior probabilities over the alphabet (unnormalised is fine).
    alphabet : array_like, shape (q,)

    Returns
    -------
    bel_mean, bel_var, msg_mean, msg_var, clamped
        Projected belief moments, the new Gaussian message towards the
        equalizer (belief divided by the extrinsic) and a boolean mask of
        divisions that were clamped to vacuous.
    """
    ext_mean = np.asarray(ext_mean, dtype=complex)
    ext_var = np.maximum(np.asarray(ext_var, dtype=float), tol.ep_variance_floor)
    alphabet = np.asarray(alphabet, dtype=complex)
    log_prior = np.asarray(log_prior, dtype=float)
    d2 = np.abs(alphabet[None, :] - ext_mean[:, None]) ** 2
    with np.errstate(invalid="ignore"):
        logw = log_prior - d2 / ext_var[:, None]
    top = np.max(logw, axis=1)
    if not np.all(np.isfinite(top)):
        raise DegeneratePriorError("prior mass vanishes on every alphabet point")
    w = np.exp(logw - top[:, None])
    w /= w.sum(axis=1, keepdims=True)
    bel_mean = w @ alphabet
    bel_var = np.maximum(w @ np.abs(alphabet) ** 2 - np.abs(bel_mean) ** 2, 0.0)
    bel_var = np.maximum(bel_var, tol.ep_variance_floor)
    msg_mean, msg_var, clamped = cs_divide(bel_mean, bel_var, ext_mean, ext_var, tol)
    msg_var = np.where(clamped, msg_var, np.maximum(msg_var, tol.ep_variance_floor))
    return bel_mean, bel_var, msg_mean, msg_var, clamped


def ep_project(extrinsic: ScalarCGauss, prior_probs, alphabet, tol: Tolerances = DEFAULT_TOL):
    """Single-symbol EP step: returns ``(belief_moments, new_msg)``."""
    p = np.asarray(prior_probs, dtype=float)
    if p.sum() <= 0 or not np.all(np.isfinite(p)):
        raise DegeneratePriorError("prior probabilities carry no mass")
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    bm, bv, mm, mv, _ = ep_project_many(
        [extrinsic.mean], [extrinsic.variance], logp[None, :], alphabet, tol)
    return ScalarCGauss(complex(bm[0]), float(bv[0])), ScalarCGauss(complex(mm[0]), float(mv[0]))
