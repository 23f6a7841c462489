import csv
import json

import numpy as np
import pytest
import yaml

from sobe.cli import main
from sobe.config import load_config, parse_config
from sobe.errors import ConfigError

SMALL_GRID = {"x_extent": 40.0, "nx": 512, "t_extent": 4.0, "nt": 256}


def write_cfg(path, body):
    path.write_text(yaml.safe_dump(body))
    return str(path)


def bump_cfg(out, amp=0.05):
    return {
        "seed": 0,
        "out_dir": str(out),
        "problem": {"phi": {"profile": "gaussian-truncated", "amplitude": amp, "center": 10.0, "width": 1.5}},
        "solver": {"lam": 1.0, "grid": SMALL_GRID},
    }


def test_missing_config(tmp_path, capsys):
    assert main(["solve", "--config", str(tmp_path / "nope.yaml")]) == 1
    assert "config not found" in capsys.readouterr().err


def test_unknown_suite(tmp_path, capsys):
    assert main(["verify", "everything", "--out-dir", str(tmp_path)]) == 1
    assert "unknown suite" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", {"solver": {"lamda": 2.0}})
    assert main(["solve", "--config", cfg]) == 1
    assert "unknown keys" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        parse_config({"solver": {"grid": {"nx": "many"}}})
    with pytest.raises(ConfigError):
        parse_config({"problem": {"beta": 2}})
    with pytest.raises(ConfigError):
        parse_config({"problem": {"phi": {"profile": "square"}}})


def test_bad_exponents_are_config_errors(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", {"out_dir": str(tmp_path / "o"), "solver": {"s": -0.9}})
    assert main(["solve", "--config", cfg]) == 1


def test_zero_config_solves_to_zero(tmp_path):
    out = tmp_path / "zero"
    cfg = write_cfg(tmp_path / "z.yaml", {"out_dir": str(out), "solver": {"grid": SMALL_GRID}})
    assert main(["solve", "--config", cfg]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    with (out / "solution.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all(float(r["u"]) == 0.0 for r in rows)


def test_solve_is_bit_identical(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        cfg = write_cfg(tmp_path / f"c{k}.yaml", bump_cfg(out))
        assert main(["solve", "--config", cfg]) == 0
        outs.append(out)
    m0, m1 = (json.loads((o / "manifest.json").read_text()) for o in outs)
    assert m0["config_hash"] == m1["config_hash"]
    assert m0["outputs"] == m1["outputs"]
    for name in m0["outputs"]:
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    assert m0["lambda_chosen"] == 1.0
    assert max(m0["contraction_ratios"]) < 1


def test_large_data_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml", bump_cfg(tmp_path / "big", amp=50.0))
    assert main(["solve", "--config", cfg]) == 2
    assert "NoContraction" in capsys.readouterr().err


def test_seed_override_changes_hash(tmp_path):
    cfg = load_config(write_cfg(tmp_path / "c.yaml", {"seed": 1}))
    assert cfg.digest() != parse_config({"seed": 2}).digest()
    assert parse_config({"out_dir": "a"}).digest() == parse_config({"out_dir": "b"}).digest()


def test_verify_roots(tmp_path):
    out = tmp_path / "v"
    cfg = write_cfg(tmp_path / "v.yaml", {"out_dir": str(out), "verify": {"roots_samples": 100}})
    assert main(["verify", "roots", "--config", cfg]) == 0
    verdicts = json.loads((out / "verdicts.json").read_text())
    assert verdicts["roots"]["pass"] is True
    assert (out / "verify_roots.csv").exists()


def test_verify_lemmas(tmp_path):
    out = tmp_path / "lem"
    assert main(["verify", "lemmas", "--out-dir", str(out)]) == 0
    with (out / "verify_lemmas.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert {r["check_id"] for r in rows} >= {"lemma_int_tau", "lemma_quad_half", "lemma_cubic_third",
                                             "lemma_quad_product"}


def test_boundary_csv_input(tmp_path):
    t = np.linspace(0, 1, 101)
    r = np.clip((t - 0.2) / 0.6, 0, 1)
    inner = (r > 0) & (r < 1)
    h1 = np.zeros_like(t)
    h1[inner] = 0.01 * np.exp(1 - 1 / (4 * r[inner] * (1 - r[inner])))
    data = np.column_stack([t, h1, np.zeros_like(t), np.zeros_like(t)])
    np.savetxt(tmp_path / "h.csv", data, delimiter=",", header="t,h1,h2,h3", comments="")
    out = tmp_path / "lin"
    cfg = write_cfg(tmp_path / "b.yaml", {"out_dir": str(out), "problem": {"boundary": {"csv": "h.csv"}},
                                          "solver": {"lam": 1.0}})
    assert main(["linear", "--config", cfg]) == 0
    with (out / "boundary_reproduction.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert [r["channel"] for r in rows] == ["u", "u_xx", "u_xxxx"]
    res = json.loads((out / "manifest.json").read_text())["residuals"]
    assert res["boundary_rel_l2"][0] <= 1e-3
    assert res["pde_relative"] <= 1e-3
    missing = write_cfg(tmp_path / "m.yaml", {"problem": {"boundary": {"csv": "absent.csv"}}})
    assert main(["linear", "--config", missing, "--out-dir", str(tmp_path / "m")]) == 1
