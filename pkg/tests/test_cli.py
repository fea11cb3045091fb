import csv
import json

import pytest

from twoprobe import cli
from twoprobe.config import load_config, parse_config
from twoprobe.model import ConfigError
from twoprobe.output import fmt

WEAK = {
    "backend": "bogoliubov",
    "model": {"num_sites": 1000, "num_particles": 1000, "hopping": 1.0, "interaction": 0.1},
    "probes": {"coupling": 0.4, "separations": list(range(16))},
    "equilibrium": {"kind": "thermal", "beta": 10.0},
    "grid": {"step": 0.01, "count": 20},
    "noise": {"runs": 10000, "seed": 1},
}
EXACT = {
    "backend": "exact",
    "model": {"num_sites": 6, "num_particles": 6, "interaction": 3.0, "n_max": 3},
    "probes": {"coupling": 1.0, "separations": [0, 1, 2]},
    "noise": {"runs": 1000, "seed": 4},
}


def write_config(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run(tmp_path, command, doc, *extra, out="out"):
    cfg = write_config(tmp_path, doc)
    code = cli.main([command, "--config", str(cfg), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_parse_defaults():
    cfg = parse_config({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1.0}})
    assert cfg.backend == "bogoliubov"
    assert cfg.separations == (0,)
    assert cfg.noise is None and cfg.seed == 0
    assert cfg.n_max == 4
    assert cfg.grid.step == 0.01 and cfg.grid.count == 20


@pytest.mark.parametrize("doc,match", [
    ({"model": {"num_sites": 8, "num_particles": 8, "hoping": 1.0}, "probes": {"coupling": 1}}, "unknown key"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1}, "extra": {}}, "unknown key"),
    ({"model": {"num_sites": 8}, "probes": {"coupling": 1}}, "num_particles"),
    ({"model": {"num_sites": "8", "num_particles": 8}, "probes": {"coupling": 1}}, "type"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": True}}, "boolean"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1, "separations": [9]}}, "separation"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1},
      "equilibrium": {"kind": "thermal"}}, "beta"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1}, "backend": "tnt"}, "backend"),
    ({"model": {"num_sites": 8, "num_particles": 8}, "probes": {"coupling": 1},
      "sweep": {"parameter": "hopping", "values": [1]}}, "sweep"),
])
def test_parse_rejects(doc, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)


def test_float_format():
    assert fmt(0.1) == "0.10000000000000001"
    assert fmt(1.0) == "1"
    assert fmt(3) == "3"
    assert float(fmt(2 / 3)) == 2 / 3


def test_bogoliubov_outputs(tmp_path):
    code, out = run(tmp_path, "bogoliubov", WEAK)
    assert code == 0
    analytic = read_csv(out / "g2_analytic.csv")
    assert analytic[0] == ["delta_c", "cor", "cor_err", "g2", "g2_err", "method", "seed"]
    assert len(analytic) == 17
    assert {row[5] for row in analytic[1:]} == {"analytic"}
    assert {row[6] for row in analytic[1:]} == {"1"}
    protocol = read_csv(out / "g2_protocol.csv")
    assert protocol[0] == analytic[0]
    assert {row[5] for row in protocol[1:]} == {"protocol"}
    series = read_csv(out / "zeta_series.csv")
    assert series[0] == ["delta_c", "t", "re_zeta", "im_zeta", "re_err", "im_err"]
    assert series[1] == ["0", "0", "1", "0", "0", "0"]
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["seed"] == 1 and manifest["backend"] == "bogoliubov"
    assert set(manifest["outputs"]) == {"g2_analytic.csv", "zeta_series.csv", "g2_protocol.csv",
                                        "zeta_noisy.csv", "density.csv"}
    assert manifest["config"] == WEAK


def test_single_separation_series(tmp_path):
    doc = {"model": {"num_sites": 1000, "num_particles": 1000, "interaction": 0.1},
           "probes": {"coupling": 0.4, "separations": [5]},
           "equilibrium": {"kind": "thermal", "beta": 10.0}}
    code, out = run(tmp_path, "bogoliubov", doc)
    assert code == 0
    rows = read_csv(out / "zeta_series.csv")
    assert len(rows) == 22 and all(r[0] == "5" for r in rows[1:])
    assert not (out / "g2_protocol.csv").exists()


def test_missing_beta_fails(tmp_path, capsys):
    doc = json.loads(json.dumps(WEAK))
    del doc["equilibrium"]["beta"]
    code, out = run(tmp_path, "bogoliubov", doc)
    assert code == 2
    assert "beta" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_key_fails(tmp_path, capsys):
    doc = json.loads(json.dumps(WEAK))
    doc["noise"]["sed"] = 1
    code, _ = run(tmp_path, "protocol", doc)
    assert code == 2
    assert "noise.sed" in capsys.readouterr().err


def test_seed_flag_overrides(tmp_path):
    code, out = run(tmp_path, "protocol", WEAK, "--seed", "99")
    assert code == 0
    assert json.loads((out / "run_manifest.json").read_text())["seed"] == 99
    assert {row[6] for row in read_csv(out / "g2_protocol.csv")[1:]} == {"99"}


def test_protocol_repeat_is_identical(tmp_path):
    _, a = run(tmp_path, "protocol", WEAK, out="a")
    _, b = run(tmp_path, "protocol", WEAK, out="b")
    for name in ("g2_protocol.csv", "zeta_noisy.csv", "density.csv", "g2_analytic.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_manifest_rerun_bit_identical_across_threads(tmp_path):
    code, a = run(tmp_path, "protocol", EXACT, "--threads", "1", out="a")
    assert code == 0
    manifest = a / "run_manifest.json"
    code = cli.main(["protocol", "--config", str(manifest), "--out", str(tmp_path / "b"), "--threads", "3"])
    assert code == 0
    for name in json.loads(manifest.read_text())["outputs"]:
        assert (a / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert json.loads((tmp_path / "b" / "run_manifest.json").read_text())["threads"] == 3


def test_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("TWOPROBE_THREADS", "2")
    _, out = run(tmp_path, "protocol", EXACT, out="env")
    assert json.loads((out / "run_manifest.json").read_text())["threads"] == 2
    _, out = run(tmp_path, "protocol", EXACT, "--threads", "1", out="flag")
    assert json.loads((out / "run_manifest.json").read_text())["threads"] == 1
    monkeypatch.setenv("TWOPROBE_THREADS", "many")
    code, _ = run(tmp_path, "protocol", EXACT, out="bad")
    assert code == 2


def test_exact_command(tmp_path):
    code, out = run(tmp_path, "exact", EXACT)
    assert code == 0
    rows = read_csv(out / "g2_exact.csv")
    assert [r[0] for r in rows[1:]] == ["0", "1", "2"]
    assert {r[5] for r in rows[1:]} == {"exact"}
    assert (out / "zeta_series.csv").exists()


def test_exact_strong_coupling(tmp_path):
    doc = {"backend": "exact", "model": {"num_sites": 8, "num_particles": 8, "interaction": 100.0},
           "probes": {"coupling": 1.0, "separations": list(range(8))}}
    code, out = run(tmp_path, "exact", doc)
    assert code == 0
    assert all(abs(float(r[3])) < 0.01 for r in read_csv(out / "g2_exact.csv")[1:])


def test_interaction_sweep(tmp_path):
    doc = {"backend": "exact", "model": {"num_sites": 6, "num_particles": 6, "n_max": 4},
           "probes": {"coupling": 1.0, "separations": [0, 1]},
           "sweep": {"parameter": "interaction", "values": [1, 3, 10, 30, 100]}}
    code, out = run(tmp_path, "exact", doc)
    assert code == 0
    rows = read_csv(out / "g2_vs_UJ.csv")
    assert rows[0] == ["parameter", "value", "delta_c", "cor", "cor_err", "g2", "g2_err", "method", "seed"]
    local = [float(r[5]) for r in rows[1:] if r[2] == "0"]
    assert len(local) == 5
    assert all(a > b for a, b in zip(local, local[1:]))


def test_nmax_sweep_reports_convergence(tmp_path):
    doc = {"backend": "exact", "model": {"num_sites": 6, "num_particles": 6, "interaction": 3.0},
           "probes": {"coupling": 1.0, "separations": [0, 1, 2]},
           "sweep": {"parameter": "n_max", "values": [3, 4, 5]}}
    code, out = run(tmp_path, "sweep", doc)
    assert code == 0
    conv = read_csv(out / "nmax_convergence.csv")
    assert conv[0] == ["n_max", "next_n_max", "max_abs_delta_g2"]
    assert float(conv[2][2]) < float(conv[1][2])


def test_beta_sweep_analytic(tmp_path):
    doc = json.loads(json.dumps(WEAK))
    del doc["noise"]
    doc["sweep"] = {"parameter": "beta", "values": [10.0, 100.0]}
    code, out = run(tmp_path, "sweep", doc)
    assert code == 0
    rows = read_csv(out / "g2_vs_beta.csv")
    assert len(rows) == 1 + 2 * 16


def test_sweep_requires_section(tmp_path):
    code, _ = run(tmp_path, "sweep", WEAK)
    assert code == 2


def test_nmax_sweep_requires_exact(tmp_path):
    doc = json.loads(json.dumps(WEAK))
    doc["sweep"] = {"parameter": "n_max", "values": [3, 4]}
    code, _ = run(tmp_path, "sweep", doc)
    assert code == 2


def test_pairs_option(tmp_path):
    a_doc = json.loads(json.dumps(WEAK))
    a_doc["noise"] = {"runs": 100, "pairs": 100, "seed": 1}
    _, a = run(tmp_path, "protocol", a_doc, out="a")
    _, b = run(tmp_path, "protocol", WEAK, out="b")
    err_a = [r[4] for r in read_csv(a / "g2_protocol.csv")[1:]]
    err_b = [r[4] for r in read_csv(b / "g2_protocol.csv")[1:]]
    assert err_a == err_b


def test_non_convergence_exit_code(tmp_path, monkeypatch, capsys):
    from twoprobe.krylov import ConvergenceError

    class Stuck:
        def __init__(self, *args, **kwargs):
            raise ConvergenceError("iteration cap reached")

    monkeypatch.setattr(cli, "ExactBackend", Stuck)
    code, out = run(tmp_path, "exact", EXACT)
    assert code == 3
    assert "converge" in capsys.readouterr().err
    assert not (out / "run_manifest.json").exists()
