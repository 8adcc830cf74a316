import csv
import os
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from pinncert.cli import CSV_HEADER, main
from pinncert.surrogate import init_params, load_params, params_vector
from pinncert.training import build_architecture
from pinncert.problems import get_problem


def write(tmp_path, name, body):
    p = tmp_path / name
    p.write_text(textwrap.dedent(body), encoding="utf-8")
    return p


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def heat_oracle(tmp_path, bound, delta=0.01, csv_name="cert.csv", extra=""):
    return write(
        tmp_path,
        f"{bound}-{delta}.toml",
        f"""
        problem = "heat"
        [surrogate]
        kind = "oracle"
        mode = "sine_decay"
        delta = {delta}
        [certificate]
        bound = "{bound}"
        n_time = 65
        csv = "{csv_name}"
        {extra}
        """,
    )


def test_zero_delta_oracle(tmp_path):
    cfg = heat_oracle(tmp_path, "contraction", delta=0.0, extra="n_eval = 6")
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "out")]) == 0
    text = (tmp_path / "out" / "cert.csv").read_text()
    assert text.splitlines()[0] == CSV_HEADER
    rows = read_rows(tmp_path / "out" / "cert.csv")
    assert len(rows) == 6
    for r in rows:
        assert float(r["E_tot"]) <= 1e-7
        assert r["E_rel"] == ""


def test_eigenmode_tightness_and_bound_ratio(tmp_path):
    out = tmp_path / "out"
    for bound in ("exp-decay", "contraction"):
        cfg = heat_oracle(tmp_path, bound, csv_name=f"{bound}.csv", extra="eval_times = [0.0, 0.25, 0.5]")
        assert main(["certify", "--config", str(cfg), "--out", str(out)]) == 0
    exp = read_rows(out / "exp-decay.csv")
    con = read_rows(out / "contraction.csv")
    assert [float(r["t"]) for r in exp] == [0.0, 0.25, 0.5]
    ratio = float(exp[-1]["E_tot"]) / float(exp[-1]["E_ref"])
    assert 1.0 <= ratio <= 1.1
    assert float(exp[-1]["E_rel"]) == pytest.approx(ratio, rel=1e-15)
    assert float(con[-1]["E_tot"]) / float(exp[-1]["E_tot"]) >= 2.0
    report = (out / "exp-decay.report.txt").read_text()
    assert "K_estimated = True" in report


def test_csv_format_and_idempotence(tmp_path):
    cfg = heat_oracle(tmp_path, "exp-decay", extra="n_eval = 5")
    main(["certify", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["certify", "--config", str(cfg), "--out", str(tmp_path / "b")])
    a = (tmp_path / "a" / "cert.csv").read_bytes()
    assert a == (tmp_path / "b" / "cert.csv").read_bytes()
    for row in read_rows(tmp_path / "a" / "cert.csv"):
        e_pi = float(row["E_PI"])
        parts = float(row["E_init"]) + e_pi + float(row["E_bc"])
        assert float(row["E_tot"]) == pytest.approx(parts, rel=1e-15)
        for v in row.values():
            if v:
                assert float(format(float(v), ".17g")) == float(v)


def test_off_grid_eval_time_is_config_error(tmp_path, capsys):
    cfg = heat_oracle(tmp_path, "exp-decay", extra="eval_times = [0.1234]")
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "configuration error" in capsys.readouterr().err


@pytest.mark.parametrize(
    "body",
    [
        'problem = "wave"',
        'problem = "heat"\n[certificate]\nbound = "nope"',
        'problem = "heat"\n[surrogate]\nkind = "oracle"\nmode = "missing"',
        'problem = "transport2d"\n[certificate]\nboundary = "soft"',
        "not toml [",
    ],
)
def test_bad_configs(tmp_path, body):
    cfg = write(tmp_path, "bad.toml", body)
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_soft_boundary_certificate(tmp_path):
    cfg = write(
        tmp_path,
        "soft.toml",
        """
        problem = "heat"
        [surrogate]
        kind = "oracle"
        mode = "linear"
        delta = 0.01
        [certificate]
        bound = "contraction"
        boundary = "soft"
        n_eval = 5
        """,
    )
    assert main(["certify", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = read_rows(tmp_path / "o" / "certificate.csv")
    for r in rows[1:]:
        assert float(r["E_bc"]) == pytest.approx(0.01 / 3, rel=1e-12)
        assert float(r["E_tot"]) >= float(r["E_ref"])


TRAIN = """
problem = "heat"
[train]
hidden_layers = 2
hidden_units = 4
n_data = 10
n_eq = 20
epochs = {epochs}
learning_rate = {lr}
seed = 5
kappa = 1.0
rho = 10.0
"""


def test_train_zero_lr_writes_initialization(tmp_path):
    cfg = write(tmp_path, "t.toml", TRAIN.format(epochs=1, lr=0.0))
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    heat = get_problem("heat")
    arch = build_architecture(heat, [4, 4], "hard")
    init = init_params(arch, np.random.default_rng(5))
    loaded, meta = load_params(tmp_path / "o" / "heat.params.json", init)
    np.testing.assert_array_equal(params_vector(loaded), params_vector(init))
    assert meta["report"]["zeta_bar"] > 0


def test_train_is_reproducible_and_certifiable(tmp_path):
    cfg = write(tmp_path, "t.toml", TRAIN.format(epochs=20, lr=1e-2))
    for d in ("a", "b"):
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path / d)]) == 0
    for name in ("heat.params.json", "heat.train_report.txt", "heat.loss_history.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    cert = write(
        tmp_path,
        "c.toml",
        f"""
        problem = "heat"
        [surrogate]
        kind = "params"
        path = "{(tmp_path / 'a' / 'heat.params.json').as_posix()}"
        [certificate]
        bound = "exp-decay"
        n_eval = 3
        """,
    )
    assert main(["certify", "--config", str(cert), "--out", str(tmp_path / "c")]) == 0
    rows = read_rows(tmp_path / "c" / "certificate.csv")
    assert len(rows) == 3
    assert all(float(r["E_tot"]) >= float(r["E_ref"]) for r in rows)


def test_estimate_m(tmp_path, capsys):
    cfg = write(tmp_path, "m.toml", "[estimate_m]\nn_samples = 5\nt_grid = [0.0]\n")
    assert main(["estimate-m", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    report = (tmp_path / "o" / "estimate_m.report.txt").read_text()
    assert "M_lower_l2 = 1.0" in report
    assert "M_lower_kg_energy = 1.0" in report
    assert "l2: M >=" in capsys.readouterr().out


def test_module_entry_point(tmp_path):
    cfg = heat_oracle(tmp_path, "contraction", delta=0.0, extra="n_eval = 2")
    env = dict(os.environ, PINNCERT_LOG_LEVEL="INFO")
    proc = subprocess.run(
        [sys.executable, "-m", "pinncert", "certify", "--config", str(cfg), "--out", str(tmp_path / "o")],
        capture_output=True,
        text=True,
        env=env,
    )
    assert proc.returncode == 0, proc.stderr
    assert "INFO" in proc.stderr
    assert (tmp_path / "o" / "cert.csv").exists()
