import json
import math
import os

import numpy as np
import pytest

from rmcmc.cli import main
from rmcmc.config import ConfigError, RunConfig, build_config, parse_config_file
from rmcmc.coupling import ChainConfig, exact_kernel, first_separation_time, run_chain
from rmcmc.cli import build_coupled
from rmcmc.targets import sum_marginal_pdf
from rmcmc import rng as streams


def _read_csv(path):
    headers, rows, footers = [], [], []
    with open(path) as fh:
        lines = [l.rstrip("\n") for l in fh]
    body = False
    for line in lines:
        if line.startswith("#"):
            (footers if body else headers).append(line)
        else:
            if not body:
                columns = line.split(",")
                body = True
            else:
                rows.append(line.split(","))
    return headers, columns, rows, footers


def test_trace_deterministic_bytes(tmp_path):
    out = tmp_path / "trace.csv"
    args = ["trace", "--n-updates", "400", "--burn-in", "300", "--no-timestamp",
            "--out", str(out)]
    assert main(args) == 0
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


def test_trace_timestamp_line_is_only_difference(tmp_path):
    out = tmp_path / "trace.csv"
    args = ["trace", "--n-updates", "50", "--burn-in", "50", "--out", str(out)]
    assert main(args) == 0
    a = [l for l in out.read_text().splitlines() if not l.startswith("# timestamp")]
    assert main(args) == 0
    b = [l for l in out.read_text().splitlines() if not l.startswith("# timestamp")]
    assert a == b
    assert any(l.startswith("# timestamp") for l in out.read_text().splitlines())


def test_trace_zero_updates_header_only(tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["trace", "--n-updates", "0", "--burn-in", "0", "--no-timestamp",
                 "--out", str(out)]) == 0
    headers, columns, rows, _ = _read_csv(str(out))
    assert columns == ["t", "theta_sum_exact", "theta_sum_approx", "B_t", "coalesced"]
    assert rows == []
    # header is self-describing: every config field appears
    keys = {l.split("=")[0].strip("# ") for l in headers}
    assert {"pair", "proposal", "m", "seed", "n_updates"} <= keys


def test_trace_first_mark_matches_first_separation_time(tmp_path):
    out = tmp_path / "trace.csv"
    seed = 5
    assert main(["trace", "--n-updates", "3000", "--burn-in", "1000", "--seed", str(seed),
                 "--no-timestamp", "--out", str(out)]) == 0
    _, _, rows, _ = _read_csv(str(out))
    first_mark = next(int(r[0]) for r in rows if r[3] == "1")

    cfg = build_config({}, {"seed": str(seed), "burn_in": "1000"})
    cc = build_coupled(cfg)
    ek = ChainConfig(cc.target, cc.proposal, exact_kernel(cc.pair), cc.hastings)
    s0 = run_chain(ek, 1000, streams.substream(seed, streams.BURNIN), (3.0, 3.0),
                   record=False).final_state
    t = first_separation_time(cc, streams.substream(seed, streams.TRACE), s0)
    assert first_mark == t


def test_density_grid_contract(tmp_path):
    out = tmp_path / "density.csv"
    assert main(["density", "--n-updates", "30000", "--burn-in", "2000",
                 "--no-timestamp", "--out", str(out)]) == 0
    _, columns, rows, _ = _read_csv(str(out))
    assert columns == ["s", "pdf_true", "pdf_penalty_est", "pdf_naive_est"]
    assert len(rows) == 361
    s = np.array([float(r[0]) for r in rows])
    assert s[0] == 0.0 and s[-1] == 18.0
    # pdf_true column equals the closed-form sum marginal pointwise
    for r in rows[::30]:
        assert float(r[1]) == pytest.approx(sum_marginal_pdf(float(r[0])), rel=1e-12)


def test_density_naive_overdispersed(tmp_path):
    out = tmp_path / "density.csv"
    assert main(["density", "--n-updates", "60000", "--burn-in", "5000", "--m", "8",
                 "--no-timestamp", "--out", str(out)]) == 0
    _, _, rows, _ = _read_csv(str(out))
    s = np.array([float(r[0]) for r in rows])
    true_pdf = np.array([float(r[1]) for r in rows])
    naive_pdf = np.array([float(r[3]) for r in rows])

    def implied_var(pdf):
        w = pdf / pdf.sum()
        mu = (w * s).sum()
        return (w * (s - mu) ** 2).sum()

    assert implied_var(naive_pdf) > implied_var(true_pdf)


def test_septimes_single_m_no_regression(tmp_path):
    out = tmp_path / "sep.csv"
    assert main(["septimes", "--m-list", "8", "--replicates", "60", "--burn-in", "500",
                 "--events-target", "40", "--mark-min-updates", "500",
                 "--no-timestamp", "--out", str(out)]) == 0
    _, columns, rows, footers = _read_csv(str(out))
    assert columns[:3] == ["m", "pair", "proposal"]
    assert len(rows) == 1 and rows[0][0] == "8"
    assert footers == []


def test_septimes_regression_footer(tmp_path):
    out = tmp_path / "sep.csv"
    assert main(["septimes", "--m-list", "8,16", "--replicates", "60", "--burn-in", "500",
                 "--events-target", "40", "--mark-min-updates", "500",
                 "--no-timestamp", "--out", str(out)]) == 0
    _, _, rows, footers = _read_csv(str(out))
    assert len(rows) == 2
    assert any(f.startswith("# regression_slope =") for f in footers)
    assert any(f.startswith("# regression_r2 =") for f in footers)


def test_septimes_threads_same_rows(tmp_path):
    rows = {}
    for threads in ("1", "2"):
        out = tmp_path / f"sep{threads}.csv"
        assert main(["septimes", "--m-list", "8", "--replicates", "40", "--burn-in", "400",
                     "--events-target", "30", "--mark-min-updates", "400",
                     "--threads", threads, "--no-timestamp", "--out", str(out)]) == 0
        rows[threads] = _read_csv(str(out))[2]
    assert rows["1"] == rows["2"]


def test_empty_m_list_usage_error(tmp_path, capsys):
    assert main(["septimes", "--m-list", "", "--out", str(tmp_path / "x.csv")]) == 1


def test_unknown_key_usage_error():
    assert main(["trace", "--not-a-key", "1"]) == 1


def test_unknown_command_usage_error():
    assert main(["frobnicate"]) == 1


def test_malformed_config_names_line(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("seed = 4\nthis line is broken\n")
    assert main(["trace", "--config", str(cfg)]) == 1
    err = capsys.readouterr().err
    assert "2" in err and "run.cfg" in err


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 9\nn_updates = 40\nburn_in = 10\n")
    out = tmp_path / "t.csv"
    assert main(["trace", "--config", str(cfg), "--seed", "11", "--no-timestamp",
                 "--out", str(out)]) == 0
    headers = _read_csv(str(out))[0]
    assert "# seed = 11" in headers  # override wins
    assert "# n_updates = 40" in headers


def test_outdir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("RMCMC_OUTDIR", str(tmp_path))
    assert main(["trace", "--n-updates", "20", "--burn-in", "10", "--no-timestamp",
                 "--out", "rel.csv"]) == 0
    assert (tmp_path / "rel.csv").exists()


def test_io_error_exit_code(tmp_path):
    assert main(["trace", "--n-updates", "10", "--burn-in", "10",
                 "--out", str(tmp_path / "missing_dir" / "x.csv")]) == 3


def test_verify_all_pass(tmp_path):
    out = tmp_path / "verify.jsonl"
    assert main(["verify", "--n-points", "200", "--n-pairs", "200", "--n-mc", "4000",
                 "--out", str(out)]) == 0
    records = [json.loads(l) for l in out.read_text().splitlines()]
    assert all(r["passed"] for r in records)
    names = {r["name"] for r in records}
    assert {"vdb_toy_mixture", "vdb_penalty_mixture", "vdb_sve_ising",
            "db_average_toy_3state", "peskun_toy_mixture",
            "minorization_toy_5state"} <= names


def test_verify_negative_controls(tmp_path):
    out = tmp_path / "verify.jsonl"
    assert main(["verify", "--n-points", "150", "--n-pairs", "150", "--n-mc", "3000",
                 "--negative-controls", "--out", str(out)]) == 0
    records = [json.loads(l) for l in out.read_text().splitlines()]
    controls = [r for r in records if r["expected_failure"]]
    assert len(controls) == 2
    assert all(r["passed"] for r in controls)
    assert all(r["value"] > r["tolerance"] for r in controls)


def test_config_validation_errors():
    with pytest.raises(ConfigError):
        build_config({}, {"pair": "nope"})
    with pytest.raises(ConfigError):
        build_config({}, {"m": "not-a-number"})
    with pytest.raises(ConfigError):
        build_config({}, {"seed": "-3"})
    cfg = build_config({}, {"hastings": "auto", "proposal": "is"})
    assert cfg.hastings_on
    cfg = build_config({}, {"hastings": "off", "proposal": "is"})
    assert not cfg.hastings_on
