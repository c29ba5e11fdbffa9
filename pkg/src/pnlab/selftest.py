"""Quick oracle cross-checks, run by ``pnlab selftest``.

Each check compares a production kernel against the brute-force reference in
:mod:`pnlab.oracles` on a handful of random instances and returns
``(name, passed, detail)``.
"""
from __future__ import annotations

import numpy as np

from .decoder import Trellis, bcjr
from .equalizer import run_equalizer
from .obsfactor import msg_to_theta, tikhonov_oracle
from .oracles import dense_gaussian_oracle, exhaustive_map, isi_state_marginals, wiener_system
from .pn import RealGaussianArray, smooth


def check_pn_smoother(rng, n=10, M=64, pn_var=1e-4):
    err_m = err_v = 0.0
    for _ in range(n):
        inc_m = rng.normal(0, 0.3, M)
        inc_p = rng.uniform(10, 1000, M)
        edge = smooth(RealGaussianArray(inc_m, inc_p), pn_var, theta0_var=1.0)
        P, h = wiener_system(inc_m, inc_p, pn_var, theta0_prec=1.0)
        m, v = dense_gaussian_oracle(P, h)
        err_m = max(err_m, np.max(np.abs(edge.belief.mean - m)))
        err_v = max(err_v, np.max(np.abs(edge.belief.variance - v) / v))
    return "pn smoother vs dense Gaussian", err_m < 1e-8 and err_v < 1e-6, \
        f"mean err {err_m:.2e}, rel var err {err_v:.2e}"


def random_equalizer_instance(rng, M, L):
    x_mean = rng.normal(size=M) + 1j * rng.normal(size=M)
    x_var = rng.uniform(0.1, 2.0, M)
    K = M + L - 1
    obs_W = np.empty((K, L, L), complex)
    for k in range(K):
        A = rng.normal(size=(L, L)) + 1j * rng.normal(size=(L, L))
        obs_W[k] = A @ A.conj().T / L
    obs_b = rng.normal(size=(K, L)) + 1j * rng.normal(size=(K, L))
    return x_mean, x_var, obs_W, obs_b


def check_equalizer(rng, n=10):
    err = 0.0
    for _ in range(n):
        M, L = int(rng.integers(4, 33)), int(rng.integers(1, 4))
        args = random_equalizer_instance(rng, M, L)
        eq = run_equalizer(*args)
        ref, _ = isi_state_marginals(*args)
        err = max(err, np.max(np.abs(eq.belief_mean - ref)))
    return "equalizer vs dense Gaussian", err < 1e-8, f"mean err {err:.2e}"


def check_bcjr(rng, n=20, n_info=8):
    trellis = Trellis.from_code()
    err = 0.0
    for _ in range(n):
        llr = rng.normal(0, 3, 2 * (n_info + 4))
        info, ext = bcjr(llr, trellis, n_info)
        ref_info, ref_coded = exhaustive_map(llr, n_info)
        err = max(err, np.max(np.abs(info - ref_info)), np.max(np.abs(ext + llr - ref_coded)))
    return "BCJR vs exhaustive MAP", err < 1e-6, f"LLR err {err:.2e}"


def check_taylor(rng, n=20):
    dm = dv = 0.0
    for _ in range(n):
        r = rng.uniform(20, 200) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        mode = -np.angle(r)
        # msg_to_theta takes y, h, s so that r = 2 y^* h^T s / nv
        g = msg_to_theta(np.conj(r) / 2, [1.0], 1.0, [1.0], mode)
        om, ov = tikhonov_oracle(r)
        dm = max(dm, abs(g.mean - om))
        dv = max(dv, abs(g.variance - ov) / ov)
    return "Taylor vs Tikhonov quadrature", dm < 0.02 and dv < 0.1, \
        f"mean err {dm:.2e}, rel var err {dv:.2e}"


CHECKS = (check_pn_smoother, check_equalizer, check_bcjr, check_taylor)


def run_all(seed: int = 0):
    rng = np.random.default_rng(seed)
    return [chk(rng) for chk in CHECKS]
