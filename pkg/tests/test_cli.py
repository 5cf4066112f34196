from __future__ import annotations

import csv
import json

import numpy as np
import pytest

from fuzzylab import cli


def write_cfg(path, cfg):
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return str(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) for v in r] for r in rows[1:]])


def sphere_scan_cfg(out):
    return {
        "model": {"tag": "fuzzy_sphere", "params": {"j": 2, "r": 1.0}},
        "task": "Scan",
        "task_params": {"grid": {"s1": [0.15, 2.99], "s2": [0.0, 6.0868], "n1": 16, "n2": 32}},
        "output": {"dir": str(out), "formats": ["csv", "json"]},
    }


def test_sphere_scan_writes_chart(tmp_path):
    cfg = write_cfg(tmp_path / "scan.json", sphere_scan_cfg(tmp_path / "out"))
    assert cli.main(["run", cfg]) == cli.EXIT_OK
    header, data = read_csv(tmp_path / "out" / "chart.csv")
    assert header == ["s1", "s2", "x1", "x2", "x3", "norm", "lambda0", "gap"]
    assert data.shape == (512, 8)
    np.testing.assert_allclose(data[:, 5], 2.0, atol=1e-12)
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["summary"]["nodes"] == 512
    assert manifest["kernel_backend"] in ("cython", "python")
    assert "chart.csv" in manifest["outputs"]


def test_runs_are_byte_identical(tmp_path):
    cfg = sphere_scan_cfg(tmp_path / "a")
    cfg["task_params"]["grid"].update(n1=8, n2=12)
    path = write_cfg(tmp_path / "c.json", cfg)
    assert cli.main(["run", path]) == 0
    assert cli.main(["run", path, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "chart.csv").read_bytes() == (tmp_path / "b" / "chart.csv").read_bytes()


def test_plane_geodesic_is_straight(tmp_path):
    cfg = {
        "model": {"tag": "fuzzy_plane", "fock_dim": 40},
        "task": "Geodesic",
        "task_params": {
            "grid": {"s1": [-0.6, 0.6], "s2": [-0.6, 0.6], "n1": 13, "n2": 13},
            "families": ["GMLM", "SAAG"],
            "s0": [-0.2, 0.1],
            "sdot0": [0.3, -0.2],
            "t_max": 1.0,
            "h_t": 0.05,
        },
        "output": {"dir": str(tmp_path / "g")},
    }
    assert cli.main(["run", write_cfg(tmp_path / "g.json", cfg), "--threads", "2"]) == 0
    header, data = read_csv(tmp_path / "g" / "path_gmlm.csv")
    assert header == list(cli.PATH_HEADER)
    np.testing.assert_allclose(data[-1, 1:3], [0.1, -0.1], atol=1e-10)
    np.testing.assert_allclose(data[:, 8], np.hypot(0.3, 0.2), atol=1e-10)
    _, saag = read_csv(tmp_path / "g" / "path_saag.csv")
    np.testing.assert_allclose(saag[:, 9:] - saag[0, 9:], 0.0, atol=1e-8)
    svg = (tmp_path / "g" / "geodesics.svg").read_text()
    assert svg.startswith("<svg") or svg.startswith("<?xml")


def test_flow_task(tmp_path):
    cfg = {
        "model": {"tag": "fuzzy_plane", "fock_dim": 40},
        "task": "Flow",
        "task_params": {"x0": [0.5, 0.0, 0.0], "t_max": 1.0, "h_t": 0.01,
                        "driver": {"kind": "heisenberg_number", "omega": 2.0}},
        "output": {"dir": str(tmp_path / "f"), "formats": ["csv"]},
    }
    assert cli.main(["run", write_cfg(tmp_path / "f.json", cfg)]) == 0
    _, data = read_csv(tmp_path / "f" / "flow.csv")
    np.testing.assert_allclose(data[:, 1] + 1j * data[:, 2], 0.5 * np.exp(-2j * data[:, 0]), atol=1e-8)


def test_distance_and_perturb_tasks(tmp_path):
    base = {"model": {"tag": "fuzzy_plane", "fock_dim": 40}, "output": {"dir": str(tmp_path / "d")}}
    dist = dict(base, task="Distance", task_params={"points": [[0, 0, 0], [0.03, 0.04, 0]]})
    assert cli.main(["run", write_cfg(tmp_path / "d.json", dist)]) == 0
    _, data = read_csv(tmp_path / "d" / "distance.csv")
    assert data[1, 2] == pytest.approx(0.05, abs=1e-10)
    pert = dict(base, task="Perturb",
                task_params={"points": [[0.5, 0.0, 0.0]], "epsilon": 0.01, "perturbation": "number"})
    pert["output"] = {"dir": str(tmp_path / "p")}
    assert cli.main(["run", write_cfg(tmp_path / "p.json", pert)]) == 0
    _, data = read_csv(tmp_path / "p" / "perturb.csv")
    np.testing.assert_allclose(data[0, 3:6], [0, 0, 0.01 * 0.75], atol=1e-13)


def test_validate_reports_ok_and_truncation(tmp_path, capsys):
    cfg = {
        "model": {"tag": "fuzzy_plane", "fock_dim": 8},
        "task": "Scan",
        "task_params": {"grid": {"s1": [-3, 3], "s2": [-3, 3], "n1": 5, "n2": 5}},
        "output": {"dir": str(tmp_path)},
    }
    assert cli.main(["validate", write_cfg(tmp_path / "t.json", cfg)]) == 0
    out = capsys.readouterr().out
    assert "warning: truncation" in out and out.strip().endswith("OK")
    # tail of a Poisson(|alpha|^2) distribution above the cut
    assert cli.truncation_tail(8, 0.0) == 0.0
    assert cli.truncation_tail(1, 1.0) == pytest.approx(1 - np.exp(-1.0))


@pytest.mark.parametrize(
    "mutate,needle",
    [
        (lambda c: c["model"].update(tag="torus"), "unknown model"),
        (lambda c: c.update(task="Dance"), "field task"),
        (lambda c: c["task_params"].pop("grid"), "needs grid"),
        (lambda c: c["task_params"]["grid"].update(n1=2), "field task_params/grid/n1"),
        (lambda c: c.update(extra=1), "<root>"),
    ],
)
def test_schema_errors_exit_2(tmp_path, capsys, mutate, needle):
    cfg = sphere_scan_cfg(tmp_path / "o")
    mutate(cfg)
    assert cli.main(["validate", write_cfg(tmp_path / "bad.json", cfg)]) == cli.EXIT_SCHEMA
    assert needle in capsys.readouterr().err


def test_malformed_json_reports_position(tmp_path, capsys):
    p = tmp_path / "broken.json"
    p.write_text('{"model": {\n  "tag": }', encoding="utf-8")
    assert cli.main(["validate", str(p)]) == cli.EXIT_SCHEMA
    assert "line 2" in capsys.readouterr().err


def test_numeric_failure_exit_code(tmp_path):
    cfg = sphere_scan_cfg(tmp_path / "n")
    cfg["task_params"]["seed"] = [0.0, 0.0, 5.0]
    assert cli.main(["run", write_cfg(tmp_path / "n.json", cfg)]) == cli.EXIT_NUMERIC


def test_models_listing(capsys):
    assert cli.main(["models"]) == 0
    out = capsys.readouterr().out
    for tag in ("fuzzy_sphere", "elliptic_paraboloid", "fuzzy_circle"):
        assert tag in out
