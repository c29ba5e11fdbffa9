import hashlib
import logging
import math

import numpy as np
import pytest

from pnlab import harness
from pnlab.harness import (RESULT_FIELDS, ConfigError, RunConfig, aggregate, load_config,
                           merge_records, read_csv, run_experiment, sidecar_path, summarize)

QUICK = dict(n_data_symbols=128, pilot_period=64, pilots_per_block=3, iters=2)


def untimed(rows):
    return [{k: v for k, v in r.items() if not k.startswith("wall_ms")} for r in rows]


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_defaults_match_reference_setup():
    cfg = RunConfig()
    assert cfg.pn_var == 1e-4
    assert cfg.n_data_symbols == 1024 and cfg.pilot_period == 256 and cfg.pilots_per_block == 5
    assert cfg.taps == (0.227, 0.460, 0.668, 0.460, 0.227)
    assert cfg.frame_format().n_info == 1020


@pytest.mark.parametrize("kw,field", [
    (dict(n_frames=0), "n_frames"), (dict(snr_db_grid=()), "snr_db_grid"),
    (dict(iters=0), "iters"), (dict(receiver="magic"), "receiver"),
    (dict(pn_var=-1), "pn_var"), (dict(damping=2), "damping"),
    (dict(tolerances={"bogus": 1}), "tolerances"), (dict(n_data_symbols=2), "n_data_symbols"),
])
def test_validation_names_field(kw, field):
    with pytest.raises(ConfigError) as exc:
        RunConfig(**kw)
    assert exc.value.field == field


def test_load_config(tmp_path, caplog):
    p = tmp_path / "c.toml"
    p.write_text('snr_db_grid = [10, 12]\nn_frames = 3\nreceiver = ["eks", "bpmfep"]\n'
                 'tol_ep_variance_floor = 1e-7\nfuture_key = 1\n')
    with caplog.at_level(logging.WARNING):
        cfg = load_config(p, n_frames=5)
    assert "future_key" in caplog.text
    assert cfg.snr_db_grid == (10.0, 12.0)
    assert cfg.n_frames == 5
    assert cfg.receiver == ("eks", "bpmfep")
    assert cfg.receiver_options().tol.ep_variance_floor == 1e-7


def test_load_config_rejects_tables(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("[section]\nx = 1\n")
    with pytest.raises(ConfigError):
        load_config(p)


def test_known_pn_error_free_at_high_snr(tmp_path):
    cfg = RunConfig(snr_db_grid=[30], n_frames=20, receiver="known_pn", iters=3,
                    out=str(tmp_path / "k.csv"))
    rows, _ = run_experiment(cfg, workers=1)
    assert all(r["ber"] == 0 for r in rows)
    assert rows[-1]["n_bits"] == 20 * 1020


def test_csv_format_and_determinism(tmp_path):
    kw = dict(snr_db_grid=[8, 12], n_frames=3, receiver=["bpmfep", "eks"],
              record_timing=False, **QUICK)
    a = RunConfig(out=str(tmp_path / "a.csv"), **kw)
    b = RunConfig(out=str(tmp_path / "b.csv"), **kw)
    rows, _ = run_experiment(a, workers=1)
    run_experiment(b, workers=1)
    assert sha(tmp_path / "a.csv") == sha(tmp_path / "b.csv")
    assert sha(sidecar_path(a.out)) == sha(sidecar_path(b.out))
    raw = (tmp_path / "a.csv").read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == ",".join(RESULT_FIELDS)
    assert len(lines) == 1 + 2 * 2 * 2
    back = read_csv(a.out)
    for r, s in zip(rows, back):
        assert s["pn_mse_mean"] == r["pn_mse_mean"]      # 17 digits round-trip exactly
        assert s["ber"] == r["n_bit_errors"] / r["n_bits"]
        assert math.isnan(s["wall_ms_per_frame"])
    keys = [(r["receiver"], r["snr_db"], r["iteration"]) for r in back]
    assert keys == sorted(keys)


def test_timing_positive(tmp_path):
    cfg = RunConfig(snr_db_grid=[10], n_frames=2, out=str(tmp_path / "t.csv"), **QUICK)
    rows, _ = run_experiment(cfg, workers=1)
    assert all(r["wall_ms_per_frame"] > 0 for r in rows)


def test_frame_split_merges_exactly(tmp_path):
    kw = dict(snr_db_grid=[10], receiver="bpmfep", record_timing=False, **QUICK)
    _, whole = run_experiment(RunConfig(n_frames=20, **kw), workers=1, write=False)
    _, p1 = run_experiment(RunConfig(n_frames=10, **kw), workers=1, write=False)
    _, p2 = run_experiment(RunConfig(n_frames=10, frame_offset=10, **kw), workers=1, write=False)
    assert untimed(aggregate(merge_records(p1, p2), 0)) == untimed(aggregate(whole, 0))
    with pytest.raises(ValueError):
        merge_records(p1, p1)


def test_worker_pool_matches_serial():
    kw = dict(snr_db_grid=[8, 12], n_frames=3, receiver="eks", record_timing=False, **QUICK)
    _, serial = run_experiment(RunConfig(**kw), workers=1, write=False)
    _, pooled = run_experiment(RunConfig(**kw), workers=2, write=False)
    assert untimed(serial) == untimed(pooled)


def test_thread_env(monkeypatch):
    monkeypatch.setenv("PNLAB_THREADS", "3")
    assert harness.n_workers() == 3
    monkeypatch.setenv("PNLAB_THREADS", "0")
    with pytest.raises(ValueError):
        harness.n_workers()


def test_interrupt_flushes_partial(tmp_path, monkeypatch):
    real = harness.run_frame
    calls = []

    def flaky(cfg, snr, frame):
        if len(calls) == 2:
            raise KeyboardInterrupt
        calls.append(frame)
        return real(cfg, snr, frame)

    monkeypatch.setattr(harness, "run_frame", flaky)
    cfg = RunConfig(snr_db_grid=[10], n_frames=5, out=str(tmp_path / "p.csv"), **QUICK)
    with pytest.raises(KeyboardInterrupt):
        run_experiment(cfg, workers=1)
    rows = read_csv(cfg.out)
    assert rows and all(r["n_frames"] == 2 for r in rows)


def _records(name, mses, errors=None, snr=10.0, it=1):
    errors = errors or [0] * len(mses)
    return [dict(receiver=name, snr_db=snr, iteration=it, frame=i, seed=i, n_bit_errors=e,
                 n_bits=100, pn_mse=m, wall_ms=1.0) for i, (m, e) in enumerate(zip(mses, errors))]


def test_summarize_identical():
    rng = np.random.default_rng(0)
    mses = list(rng.uniform(0, 1, 20))
    errs = list(rng.integers(0, 5, 20))
    recs = _records("eks", mses, errs) + _records("bpmfep", mses, errs)
    (row,) = summarize(recs, "eks", "bpmfep")
    assert row["mse_ratio"] == 1.0 and row["ber_ratio"] == 1.0
    assert row["sign_test_p"] == pytest.approx(1.0)


def test_summarize_strictly_better():
    base = list(np.linspace(1, 2, 20))
    recs = _records("eks", base, [5] * 20) + _records("bpmfep", [b / 2 for b in base], [1] * 20)
    (row,) = summarize(recs, "eks", "bpmfep")
    assert row["n_subject_better"] == 20
    assert row["sign_test_p"] < 1e-3
    assert row["mse_ratio"] == pytest.approx(0.5)
    assert row["ber_ratio"] == pytest.approx(0.2)


def test_summarize_mismatch():
    recs = _records("eks", [1, 2]) + _records("bpmfep", [1, 2], snr=12.0)
    with pytest.raises(ValueError, match="mismatched"):
        summarize(recs, "eks", "bpmfep")
    with pytest.raises(ValueError):
        summarize(_records("eks", [1]), "eks", "bpmfep")
