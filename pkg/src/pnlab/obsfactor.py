"""Messages out of the nonlinear observation factors.

The factor ``p(y_k | s_k, theta_k)`` is handled with mean-field rules.  Towards
the phase it yields a Tikhonov-shaped message ``exp(Re[r_k e^{j theta}])``
which is Gaussianised by a second-order expansion around the current phase
estimate.  Towards the channel state it yields a rank-one complex Gaussian.

``taps`` are always in convolution order ``h_0 .. h_{L-1}``; the state vector
is ``s_k = [x_{k-L+1}, ..., x_k]`` so ``sum_l h_l x_{k-l} = taps[::-1] @ s_k``.
"""
from __future__ import annotations

import numpy as np
from scipy.integrate import trapezoid

from .gaussian import DEFAULT_TOL, CGaussInfo, RealGaussian, Tolerances


def state_vector(taps) -> np.ndarray:
    return np.asarray(taps, dtype=complex)[::-1]


def tikhonov_param(y, taps, noise_var, s_mean):
    """``r_k = 2 y_k^* h^T s_hat_k / sigma_n^2`` (vectorised over k)."""
    hv = state_vector(taps)
    return 2.0 / noise_var * np.conj(y) * (np.asarray(s_mean) @ hv)


def theta_messages(y, taps, noise_var, s_mean, theta_hat, tol: Tolerances = DEFAULT_TOL):
    """Gaussian messages to every phase sample.

    Returns ``(mean, precision, clamped)``.  Where the curvature
    ``Re[r e^{j theta_hat}]`` is not positive the message is vacuous.
    """
    theta_hat = np.asarray(theta_hat, dtype=float)
    z = tikhonov_param(y, taps, noise_var, s_mean) * np.exp(1j * theta_hat)
    prec = z.real
    pm = (z * (1j + theta_hat)).real
    clamped = prec <= tol.curvature_eps
    safe = np.where(clamped, 1.0, prec)
    mean = np.where(clamped, 0.0, pm / safe)
    return mean, np.where(clamped, 0.0, prec), clamped


def msg_to_theta(y_k, taps, noise_var, s_mean, theta_hat, tol: Tolerances = DEFAULT_TOL) -> RealGaussian:
    m, p, _ = theta_messages(np.atleast_1d(y_k), taps, noise_var,
                             np.atleast_2d(s_mean), np.atleast_1d(theta_hat), tol)
    return RealGaussian(float(m[0]), float(p[0]))


def circular_factor(theta_var, mode: str = "taylor") -> np.ndarray:
    """Magnitude of ``<e^{-j theta}>`` under N(theta_hat, theta_var).

    ``taylor`` uses ``1 - var/2`` clipped to [0, 1]; ``exact`` uses
    ``exp(-var/2)``.
    """
    theta_var = np.asarray(theta_var, dtype=float)
    if mode == "taylor":
        return np.clip(1.0 - 0.5 * theta_var, 0.0, 1.0)
    if mode == "exact":
        return np.exp(-0.5 * theta_var)
    raise ValueError(f"unknown circular moment mode {mode!r}")


def state_precision(taps, noise_var) -> np.ndarray:
    """``sigma_n^{-2} h^* h^T``; identical for every k."""
    hv = state_vector(taps)
    return np.outer(hv.conj(), hv) / noise_var


def state_messages(y, taps, noise_var, theta_mean, theta_var, mode: str = "taylor"):
    """Precision-mean vectors ``b_k`` of the messages to every state (K, L)."""
    hv = state_vector(taps)
    c = np.exp(-1j * np.asarray(theta_mean)) * circular_factor(theta_var, mode)
    return (np.asarray(y) * c / noise_var)[:, None] * hv.conj()[None, :]


def msg_to_state(y_k, taps, noise_var, theta_belief: RealGaussian, mode: str = "taylor") -> CGaussInfo:
    b = state_messages(np.atleast_1d(y_k), taps, noise_var,
                       [theta_belief.mean], [theta_belief.variance], mode)[0]
    return CGaussInfo(state_precision(taps, noise_var), b)


def tikhonov_oracle(r, grid_size: int = 20001):
    """Mean and variance of ``exp(Re[r e^{j theta}])`` by trapezoidal quadrature.

    The integration window has width 2 pi and is centred on the mode
    ``-arg r``.
    """
    if grid_size < 10_000:
        raise ValueError("grid_size must be at least 1e4")
    r = complex(r)
    centre = -np.angle(r) if r != 0 else 0.0
    theta = np.linspace(centre - np.pi, centre + np.pi, grid_size)
    logw = (r * np.exp(1j * theta)).real
    w = np.exp(logw - logw.max())
    z = trapezoid(w, theta)
    mean = trapezoid(w * theta, theta) / z
    var = trapezoid(w * (theta - mean) ** 2, theta) / z
    return float(mean), float(var)
