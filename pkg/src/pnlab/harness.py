"""Monte-Carlo driver: BER and phase-noise MSE per SNR and iteration.

Every (SNR, frame) pair is an independent work item.  Frame ``i`` draws its
bits, phase trajectory and noise from ``default_rng(master_seed ^ i)``, so
the same frame is seen by every receiver and at every SNR (the noise is only
rescaled), and a run over frames ``[0, 100)`` aggregates to the same counts
as two runs over ``[0, 50)`` and ``[50, 100)``.

Two CSV files are written: the per-(receiver, snr, iteration) table and a
``.frames.csv`` sidecar holding one record per frame, which ``summarize``
needs for the paired sign test.
"""
from __future__ import annotations

import csv
import logging
import math
import multiprocessing as mp
import os
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import binomtest

from .channel import PROAKIS_C, ChannelSpec, noise_var_from_snr, simulate_frame
from .errors import MessageError
from .gaussian import DEFAULT_TOL
from .receiver import RECEIVERS, ReceiverOptions, receive
from .tx import FrameFormat, FrameLayout

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

RESULT_FIELDS = ("receiver", "snr_db", "iteration", "n_frames", "n_bit_errors", "n_bits",
                 "ber", "pn_mse_mean", "pn_mse_median", "wall_ms_per_frame", "seed")
FRAME_FIELDS = ("receiver", "snr_db", "iteration", "frame", "seed", "n_bit_errors", "n_bits",
                "pn_mse", "wall_ms")
SUMMARY_FIELDS = ("snr_db", "iteration", "n_frames", "baseline", "subject", "mse_ratio",
                  "ber_ratio", "n_subject_better", "n_baseline_better", "sign_test_p")


class ConfigError(ValueError):
    def __init__(self, field_name, msg):
        super().__init__(f"{field_name}: {msg}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    """Experiment description.  Defaults reproduce the reference setup."""

    snr_db_grid: tuple = (6.0, 8.0, 10.0, 12.0, 14.0, 16.0)
    n_frames: int = 1000
    frame_offset: int = 0
    iters: int = 5
    receiver: tuple = ("bpmfep",)
    pn_var: float = 1e-4
    taps: tuple = tuple(PROAKIS_C)
    theta0_mode: str = "zero"
    n_data_symbols: int = 1024
    pilot_period: int = 256
    pilots_per_block: int = 5
    master_seed: int = 0
    interleaver_seed: int = 0
    circular_moment: str = "taylor"
    damping: float = 1.0
    eq_inner_iters: int = 1
    tolerances: dict = field(default_factory=dict)
    record_timing: bool = True
    out: str = "results.csv"

    def __post_init__(self):
        grid = self.snr_db_grid
        if isinstance(grid, (int, float)):
            grid = (grid,)
        object.__setattr__(self, "snr_db_grid", tuple(float(s) for s in grid))
        rx = (self.receiver,) if isinstance(self.receiver, str) else tuple(self.receiver)
        object.__setattr__(self, "receiver", rx)
        object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))
        object.__setattr__(self, "tolerances", dict(self.tolerances))
        self.validate()

    def validate(self):
        if not self.snr_db_grid:
            raise ConfigError("snr_db_grid", "must not be empty")
        if not all(math.isfinite(s) for s in self.snr_db_grid):
            raise ConfigError("snr_db_grid", "values must be finite")
        if self.n_frames < 1:
            raise ConfigError("n_frames", f"must be >= 1, got {self.n_frames}")
        if self.frame_offset < 0:
            raise ConfigError("frame_offset", "must be >= 0")
        if self.iters < 1:
            raise ConfigError("iters", f"must be >= 1, got {self.iters}")
        if not self.receiver:
            raise ConfigError("receiver", "no receiver selected")
        for r in self.receiver:
            if r not in RECEIVERS:
                raise ConfigError("receiver", f"unknown receiver {r!r}; choose from {RECEIVERS}")
        if len(set(self.receiver)) != len(self.receiver):
            raise ConfigError("receiver", "duplicate receiver names")
        if not self.pn_var >= 0:
            raise ConfigError("pn_var", "must be >= 0")
        if not self.taps:
            raise ConfigError("taps", "need at least one tap")
        if self.theta0_mode not in ("zero", "uniform"):
            raise ConfigError("theta0_mode", "must be 'zero' or 'uniform'")
        if self.master_seed < 0:
            raise ConfigError("master_seed", "must be >= 0")
        if self.circular_moment not in ("taylor", "exact"):
            raise ConfigError("circular_moment", "must be 'taylor' or 'exact'")
        if not 0 < self.damping <= 1:
            raise ConfigError("damping", "must lie in (0, 1]")
        if self.eq_inner_iters < 1:
            raise ConfigError("eq_inner_iters", "must be >= 1")
        try:
            DEFAULT_TOL.updated(**self.tolerances)
        except KeyError as exc:
            raise ConfigError("tolerances", str(exc)) from None
        try:
            self.frame_format().n_info
        except ValueError as exc:
            raise ConfigError("n_data_symbols", str(exc)) from None

    def frame_format(self) -> FrameFormat:
        layout = FrameLayout(self.n_data_symbols, self.pilot_period, self.pilots_per_block)
        return FrameFormat(layout, interleaver_seed=self.interleaver_seed)

    def receiver_options(self) -> ReceiverOptions:
        return ReceiverOptions(circular_moment=self.circular_moment, damping=self.damping,
                               eq_inner_iters=self.eq_inner_iters,
                               tol=DEFAULT_TOL.updated(**self.tolerances))

    def frame_seed(self, frame: int) -> int:
        return self.master_seed ^ frame


def load_config(path, **overrides) -> RunConfig:
    """Read a flat TOML file.

    Keys are ``RunConfig`` field names; tolerance overrides are written as
    ``tol_<name>``.  Unknown keys are ignored with a warning so that newer
    files still load.
    """
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in fields(RunConfig)}
    kw, tol = {}, {}
    for key, val in raw.items():
        if isinstance(val, dict):
            raise ConfigError(key, "nested tables are not supported; use flat keys")
        if key.startswith("tol_"):
            tol[key[4:]] = val
        elif key in known and key != "tolerances":
            kw[key] = val
        else:
            log.warning("unknown config key %r ignored", key)
    if tol:
        kw["tolerances"] = tol
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**kw)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from None


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------

_WARM = set()


def _warm_up(name):
    """Compile the numba kernels outside the timed region (once per process)."""
    if name in _WARM:
        return
    fmt = FrameFormat(FrameLayout(16, 8, 1))
    spec = ChannelSpec(taps=PROAKIS_C, noise_var=0.1)
    truth = simulate_frame(fmt, spec, np.random.default_rng(0))
    receive(name, truth.y, spec.taps, 0.1, 1e-4, fmt, 1, truth.theta, truth.bits)
    _WARM.add(name)


def run_frame(cfg: RunConfig, snr_db: float, frame: int) -> list[dict]:
    """Simulate one frame at one SNR and run every selected receiver.

    Returns one record per (receiver, iteration).
    """
    fmt = cfg.frame_format()
    taps = np.asarray(cfg.taps)
    nv = noise_var_from_snr(taps, snr_db)
    spec = ChannelSpec(taps=taps, noise_var=nv, pn_var=cfg.pn_var, theta0_mode=cfg.theta0_mode)
    seed = cfg.frame_seed(frame)
    truth = simulate_frame(fmt, spec, np.random.default_rng(seed))
    opts = cfg.receiver_options()
    out = []
    for name in cfg.receiver:
        if cfg.record_timing:
            _warm_up(name)
        t0 = time.perf_counter()
        try:
            res = receive(name, truth.y, spec.taps, nv, cfg.pn_var, fmt, cfg.iters,
                          truth.theta, truth.bits, opts)
        except MessageError as exc:
            raise type(exc)(f"{name}, snr {snr_db} dB, frame {frame}: {exc}") from exc
        wall = 1e3 * (time.perf_counter() - t0) if cfg.record_timing else math.nan
        d = res.diagnostics
        for it in range(cfg.iters):
            out.append(dict(receiver=name, snr_db=snr_db, iteration=it + 1, frame=frame,
                            seed=seed, n_bit_errors=d.bit_errors[it], n_bits=fmt.n_info,
                            pn_mse=d.pn_mse[it], wall_ms=wall))
    return out


_WORKER_CFG = None


def _init_worker(cfg):
    global _WORKER_CFG
    _WORKER_CFG = cfg


def _work(item):
    return run_frame(_WORKER_CFG, *item)


def n_workers() -> int:
    env = os.environ.get("PNLAB_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("PNLAB_THREADS must be >= 1")
        return n
    return os.cpu_count() or 1


def run_frames(cfg: RunConfig, workers: int | None = None) -> list[dict]:
    """All per-frame records, sorted by key.

    On KeyboardInterrupt the records finished so far are returned with
    the exception attached as ``run_frames.interrupted``.
    """
    items = [(snr, cfg.frame_offset + i) for snr in cfg.snr_db_grid for i in range(cfg.n_frames)]
    workers = workers or n_workers()
    records = []
    try:
        if workers == 1:
            for item in items:
                records.extend(run_frame(cfg, *item))
        else:
            with mp.get_context("fork").Pool(workers, _init_worker, (cfg,)) as pool:
                for recs in pool.imap_unordered(_work, items):
                    records.extend(recs)
    except KeyboardInterrupt:
        log.warning("interrupted after %d of %d frame jobs", len(records), len(items))
        records.sort(key=_frame_key)
        raise _Interrupted(records) from None
    records.sort(key=_frame_key)
    return records


class _Interrupted(KeyboardInterrupt):
    def __init__(self, records):
        super().__init__("interrupted")
        self.records = records


def _frame_key(r):
    return (r["receiver"], r["snr_db"], r["iteration"], r["frame"])


def aggregate(records, master_seed: int) -> list[dict]:
    """Collapse per-frame records into ResultRow dicts."""
    groups: dict = {}
    for r in sorted(records, key=_frame_key):
        groups.setdefault((r["receiver"], r["snr_db"], r["iteration"]), []).append(r)
    rows = []
    for (name, snr, it), recs in sorted(groups.items()):
        errs = sum(int(r["n_bit_errors"]) for r in recs)
        bits = sum(int(r["n_bits"]) for r in recs)
        mse = np.array([r["pn_mse"] for r in recs], dtype=float)
        wall = np.array([r["wall_ms"] for r in recs], dtype=float)
        rows.append(dict(receiver=name, snr_db=snr, iteration=it, n_frames=len(recs),
                         n_bit_errors=errs, n_bits=bits, ber=errs / bits,
                         pn_mse_mean=float(np.mean(mse)), pn_mse_median=float(np.median(mse)),
                         wall_ms_per_frame=float(np.mean(wall)), seed=master_seed))
    return rows


def run_experiment(cfg: RunConfig, workers: int | None = None, write: bool = True):
    """Run the configured sweep and return ``(rows, frame_records)``.

    With ``write`` the table goes to ``cfg.out`` and the per-frame records
    to the matching ``.frames.csv``.  An interrupted run still writes what
    it finished before re-raising.
    """
    try:
        records = run_frames(cfg, workers)
    except _Interrupted as exc:
        if write:
            write_outputs(cfg.out, aggregate(exc.records, cfg.master_seed), exc.records)
        raise KeyboardInterrupt from None
    rows = aggregate(records, cfg.master_seed)
    if write:
        write_outputs(cfg.out, rows, records)
    return rows, records


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def sidecar_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".frames.csv")


def write_csv(path, rows, header):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(r[k]) for k in header])


def write_outputs(path, rows, records):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    write_csv(path, rows, RESULT_FIELDS)
    write_csv(sidecar_path(path), records, FRAME_FIELDS)


_INT_COLS = {"iteration", "n_frames", "n_bit_errors", "n_bits", "seed", "frame"}


def read_csv(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k, v in r.items():
            if k == "receiver":
                continue
            r[k] = int(v) if k in _INT_COLS else float(v)
    return rows


def merge_records(*parts) -> list[dict]:
    """Concatenate per-frame records from split runs, rejecting overlaps."""
    seen, out = set(), []
    for part in parts:
        for r in part:
            key = _frame_key(r)
            if key in seen:
                raise ValueError(f"duplicate frame record {key}")
            seen.add(key)
            out.append(r)
    out.sort(key=_frame_key)
    return out


# ---------------------------------------------------------------------------
# paired comparison
# ---------------------------------------------------------------------------

def _ratio(num, den):
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


def summarize(records, baseline: str, subject: str) -> list[dict]:
    """Paired comparison of two receivers over the same frames.

    For each (snr, iteration): ratio of median PN MSE (subject over
    baseline), ratio of BER, how many frames each receiver had the lower
    MSE on, and the two-sided sign-test p-value (ties dropped).
    """
    by = {}
    for r in records:
        by.setdefault((r["receiver"], r["snr_db"], r["iteration"]), {})[(r["frame"], r["seed"])] = r
    cells = lambda name: {(s, i) for (n, s, i) in by if n == name}
    cb, cs = cells(baseline), cells(subject)
    if not cb:
        raise ValueError(f"receiver {baseline!r} not in table")
    if not cs:
        raise ValueError(f"receiver {subject!r} not in table")
    if cb != cs:
        raise ValueError(f"mismatched grids: {sorted(cb ^ cs)}")
    out = []
    for snr, it in sorted(cb):
        b, s = by[(baseline, snr, it)], by[(subject, snr, it)]
        if b.keys() != s.keys():
            raise ValueError(f"mismatched frames/seeds at snr {snr}, iteration {it}")
        keys = sorted(b)
        mb = np.array([b[k]["pn_mse"] for k in keys])
        ms = np.array([s[k]["pn_mse"] for k in keys])
        eb = sum(b[k]["n_bit_errors"] for k in keys)
        es = sum(s[k]["n_bit_errors"] for k in keys)
        wins, losses = int(np.sum(ms < mb)), int(np.sum(ms > mb))
        p = binomtest(wins, wins + losses, 0.5).pvalue if wins + losses else 1.0
        out.append(dict(snr_db=snr, iteration=it, n_frames=len(keys), baseline=baseline,
                        subject=subject, mse_ratio=_ratio(np.median(ms), np.median(mb)),
                        ber_ratio=_ratio(es, eb), n_subject_better=wins,
                        n_baseline_better=losses, sign_test_p=float(p)))
    return out
