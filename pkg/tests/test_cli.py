import csv
import json

import pytest

from qvcz.cli import main
from qvcz.correlators import g2_closed_form
from qvcz.source import default_config, save_config


def rows(path):
    with open(path, newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def test_version_and_help(capsys):
    assert main(["--version"]) == 0
    assert "qvcz" in capsys.readouterr().out
    assert main(["nonsense"]) == 2


def test_scan_sub_shot_noise(tmp_path):
    assert main(["scan-g2", "--selector", "VHHV,HHVV", "--out", str(tmp_path)]) == 0
    for sel in ("VHHV", "HHVV"):
        data = rows(tmp_path / f"g2_{sel}.csv")
        assert len(data) == 25
        assert all(float(r["g2"]) < 1 for r in data)
        assert float(data[0]["nu"]) == pytest.approx(0.1) and float(data[-1]["nu"]) == pytest.approx(4.0)
        assert (tmp_path / f"g2_{sel}.csv.manifest.json").exists()


def test_scan_single_point(tmp_path):
    assert main(["scan-g2", "--points", "1", "--nu-min", "0.5", "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "g2_HHHH.csv")
    assert len(data) == 1
    assert float(data[0]["g2"]) == pytest.approx(g2_closed_form("HHHH", 0.5), rel=1e-15)


def test_scan_all_methods(tmp_path):
    args = ["scan-g2", "--method", "all", "--points", "20", "--realizations", "200",
            "--out", str(tmp_path)]
    assert main(args) == 0
    data = rows(tmp_path / "g2_HHHH.csv")
    assert len(data) == 20
    gap = max(abs(float(r["g2_closed"]) - float(r["g2_quadrature"])) for r in data)
    assert gap <= 1e-4
    assert {"g2_mc", "stderr_mc", "n_realizations"} <= set(data[0])


def test_scan_quadrature_and_mc(tmp_path):
    assert main(["scan-g2", "--method", "quadrature", "--selector", "HVVH", "--points", "3",
                 "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "g2_HVVH.csv")[0]["method"] == "quadrature"
    assert main(["scan-g2", "--method", "mc", "--points", "2", "--realizations", "200",
                 "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "g2_HHHH.csv")
    assert data[0]["method"] == "mc" and data[0]["n_realizations"] == "200"


@pytest.mark.parametrize("sel", ["HHH", "HHHX", ""])
def test_bad_selector(tmp_path, sel):
    assert main(["scan-g2", "--selector", sel, "--out", str(tmp_path)]) == 2


def test_closed_method_unsupported_selector(tmp_path):
    assert main(["scan-g2", "--selector", "HVVH", "--out", str(tmp_path)]) == 2


def test_photon_dist_defaults(tmp_path, capsys):
    assert main(["photon-dist", "--out", str(tmp_path)]) == 0
    path = tmp_path / "pnd_HHHH_analytic.csv"
    header = json.loads(path.read_text().splitlines()[0][2:])
    assert header["cutoff"] == 20 and header["tail_mass"] <= 1e-6
    assert {"selector", "nu", "z_m", "cutoff", "tail_mass"} <= set(header)
    assert len(rows(path)) == 21 * 21
    assert "tail_mass" in capsys.readouterr().out


def test_photon_dist_mc(tmp_path, capsys):
    assert main(["photon-dist", "--method", "mc", "--nu", "1.0", "--realizations", "2000",
                 "--out", str(tmp_path)]) == 0
    path = tmp_path / "pnd_HHHH_mc.csv"
    header = json.loads(path.read_text().splitlines()[0][2:])
    assert header["tv_to_analytic"] <= 0.05
    assert "total-variation" in capsys.readouterr().out
    assert set(rows(path)[0]) == {"n1", "n2", "p", "g2_tilde", "stderr", "n_realizations"}


def test_photon_dist_off_diagonal(tmp_path, capsys):
    assert main(["photon-dist", "--selector", "VHHV", "--out", str(tmp_path)]) == 2
    assert "off-diagonal" in capsys.readouterr().err


def test_photon_dist_cutoff_too_small(tmp_path):
    assert main(["photon-dist", "--cutoff", "3", "--out", str(tmp_path)]) == 3


def test_bad_config_exit_2(tmp_path):
    doc = default_config().to_json_dict()
    doc["coherence_area_m2"] = (2 * doc["pixel_size_m"]) ** 2
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert main(["scan-g2", "--config", str(path), "--out", str(tmp_path)]) == 2
    assert main(["validate", "--config", str(path)]) == 2
    assert main(["scan-g2", "--config", str(tmp_path / "missing.json")]) != 0


def test_unwritable_output_exit_4(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["scan-g2", "--out", str(blocker / "sub")]) == 4


def test_config_file_and_seed(tmp_path):
    cfg = tmp_path / "c.json"
    save_config(default_config(), cfg)
    assert main(["scan-g2", "--config", str(cfg), "--seed", "9", "--points", "2",
                 "--out", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "g2_HHHH.csv.manifest.json").read_text())
    assert manifest["seed"] == 9 and manifest["config"]["seed"] == 9
    for key in ("tool", "tool_version", "subcommand", "config", "derived", "outputs", "timestamp"):
        assert key in manifest


def test_manifest_replay(tmp_path, capsys):
    assert main(["photon-dist", "--method", "mc", "--realizations", "300", "--seed", "4",
                 "--out", str(tmp_path)]) == 0
    manifest = tmp_path / "pnd_HHHH_mc.csv.manifest.json"
    assert main(["replay", str(manifest)]) == 0
    assert "identical" in capsys.readouterr().out
    (tmp_path / "pnd_HHHH_mc.csv").write_text("tampered")
    doc = json.loads(manifest.read_text())
    doc["outputs"]["pnd_HHHH_mc.csv"] = "0" * 64
    manifest.write_text(json.dumps(doc))
    assert main(["replay", str(manifest)]) == 3


def test_oracle_subcommand(tmp_path):
    assert main(["oracle", "--selector", "HHHH", "--realizations", "2000", "--no-fail",
                 "--out", str(tmp_path)]) == 0
    data = rows(tmp_path / "oracle_validation.csv")
    assert len(data) == 5 and all(r["method"] == "mc" for r in data)
    assert main(["oracle", "--selector", "HVVH", "--out", str(tmp_path)]) == 2


def test_validate_default_config(tmp_path, capsys):
    code = main(["validate", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    report = json.loads((tmp_path / "validation_report.json").read_text())
    assert [r["criterion"] for r in report] == list(range(1, 11))
    assert all("measured" in r and "tolerance" in r for r in report)
    assert out.count("[PASS]") + out.count("[FAIL]") == 10
    assert code == 0, "acceptance matrix not fully green: " + ", ".join(
        str(r["criterion"]) for r in report if not r["passed"])
