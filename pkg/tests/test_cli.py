"""Command line driver: artifacts, exit codes, warnings."""

import os
from pathlib import Path

import numpy as np
import pytest

from hyperdrum.cli import main
from hyperdrum.formats import (read_headed_json, read_mode, read_scan_csv)

DATA = Path(__file__).resolve().parents[1] / "src" / "hyperdrum" / "data"
WEEKS = str(DATA / "weeks.mfd")


@pytest.fixture(scope="module")
def scan_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scan")
    rc = main(["scan", "--manifold", WEEKS, "--k-lo", "5.08",
               "--k-hi", "5.26", "--out", str(out)])
    assert rc == 0
    return out


@pytest.fixture(scope="module")
def refine_dir(scan_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("refine")
    rc = main(["refine", "--manifold", WEEKS,
               "--scan", str(scan_dir / "scan.csv"), "--out", str(out)])
    assert rc == 0
    return out


def test_scan_writes_headed_csv_and_manifest(scan_dir):
    ks, chi2, params, cfg = read_scan_csv(scan_dir / "scan.csv")
    assert cfg["k_lo"] == 5.08 and cfg["d"] == 20
    assert len(ks) == len(params) == chi2.shape[0] == 19
    assert chi2.shape[1] == 5
    man = read_headed_json(scan_dir / "manifest.txt", "hyperdrum-manifest")
    assert "version" in man and "stages" in man
    assert man["config"]["seed"] == 0
    assert man["stages"]["scan"] > 0


def test_scan_csv_is_reproducible(scan_dir, tmp_path):
    rc = main(["scan", "--manifold", WEEKS, "--k-lo", "5.08",
               "--k-hi", "5.26", "--out", str(tmp_path)])
    assert rc == 0
    assert (tmp_path / "scan.csv").read_bytes() \
        == (scan_dir / "scan.csv").read_bytes()


def test_refine_emits_mode_and_summary(refine_dir):
    rec = read_mode(refine_dir / "mode_00.txt")
    assert rec["manifold"].startswith("m003")
    assert rec["q2"] == pytest.approx(27.8, rel=0.01)
    assert rec["multiplicity"] == 1
    summary = (refine_dir / "summary.txt").read_text().splitlines()
    assert summary[0].startswith("# hyperdrum-report 1")
    assert any("q2" in ln for ln in summary)
    assert any("multiplicity" in ln for ln in summary)


def test_refine_requires_config_echo(tmp_path, scan_dir):
    stripped = tmp_path / "stripped.csv"
    lines = (scan_dir / "scan.csv").read_text().splitlines()
    stripped.write_text("\n".join(
        ln for ln in lines if not ln.startswith("# config")) + "\n")
    rc = main(["refine", "--manifold", WEEKS, "--scan", str(stripped),
               "--out", str(tmp_path / "r")])
    assert rc == 1


def test_validate_weyl_on_fixture(tmp_path):
    rc = main(["validate", "--manifold", WEEKS, "--check", "weyl",
               "--spectrum", str(DATA / "spectrum_weeks.csv"),
               "--out", str(tmp_path)])
    assert rc == 0
    rep = read_headed_json(tmp_path / "report_weyl.txt", "hyperdrum-report")
    assert rep["passed"] is True
    assert rep["coeff"] == pytest.approx(rep["expected"], rel=0.15)


def test_validate_bounds_uses_metadata_diameter(refine_dir, tmp_path):
    rc = main(["validate", "--manifold", WEEKS, "--check", "bounds",
               "--modes", str(refine_dir / "mode_00.txt"),
               "--out", str(tmp_path)])
    assert rc == 0
    rep = read_headed_json(tmp_path / "report_bounds.txt",
                           "hyperdrum-report")
    assert rep["passed"] is True
    assert rep["lower"] < rep["observed"] < rep["upper"]


def test_validate_circles_on_refined_mode(refine_dir, tmp_path):
    rc = main(["validate", "--manifold", WEEKS, "--check", "circles",
               "--modes", str(refine_dir / "mode_00.txt"),
               "--rho", "1.0", "--out", str(tmp_path)])
    assert rc == 0
    rep = read_headed_json(tmp_path / "report_circles.txt",
                           "hyperdrum-report")
    assert rep["passed"] is True
    assert len(rep["circles"]) >= 6
    assert all(r["ratio"] < 0.05 for r in rep["circles"])


def test_validate_ortho_needs_two_modes(refine_dir, tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["validate", "--manifold", WEEKS, "--check", "ortho",
              "--modes", str(refine_dir / "mode_00.txt"),
              "--out", str(tmp_path)])
    assert e.value.code == 2


def test_validate_rejects_foreign_mode(refine_dir, tmp_path):
    rc = main(["validate", "--manifold", str(DATA / "m188.mfd"),
               "--check", "circles",
               "--modes", str(refine_dir / "mode_00.txt"),
               "--out", str(tmp_path)])
    assert rc == 1


def test_slice_grid_shape_and_nan_exterior(refine_dir, tmp_path):
    out = tmp_path / "slice.csv"
    rc = main(["slice", "--manifold", WEEKS,
               "--mode", str(refine_dir / "mode_00.txt"),
               "--plane", "z", "--resolution", "17", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# hyperdrum-slice 1")
    rows = [ln for ln in lines if not ln.startswith("#")]
    grid = np.array([[float(v) for v in r.split(",")] for r in rows])
    assert grid.shape == (17, 17)
    assert np.isnan(grid[0, 0])          # corner is outside the ball
    center = grid[8, 8]
    assert np.isfinite(center)


def test_sphere_samples_and_circle_annotations(refine_dir, tmp_path):
    out = tmp_path / "sphere.csv"
    rc = main(["sphere", "--manifold", WEEKS,
               "--mode", str(refine_dir / "mode_00.txt"),
               "--rho", "1.0", "--resolution", "12", "--out", str(out)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# hyperdrum-sphere 1")
    data = [ln for ln in lines if "," in ln and not ln.startswith("#")
            and not ln.startswith("circle") and not ln.startswith("phi")]
    assert len(data) == 12 * 24
    circles = [ln for ln in lines if ln.startswith("circle")]
    assert len(circles) >= 6
    z = np.array([float(r.split(",")[1]) for r in data])
    # equal-area rows: cos(theta) strata are uniform
    assert abs(z.mean()) < 1e-9


def test_usage_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["scan", "--manifold", WEEKS, "--k-lo", "6.0",
              "--k-hi", "5.0", "--out", "/tmp/x"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["scan", "--manifold", WEEKS, "--k-lo", "0.05",
              "--k-hi", "0.10", "--out", "/tmp/x"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["scan", "--manifold", WEEKS, "--k-lo", "5.0",
              "--k-hi", "5.1", "--dk", "-0.01", "--out", "/tmp/x"])
    assert e.value.code == 2


def test_missing_manifold_is_computational_error(tmp_path, capsys):
    rc = main(["scan", "--manifold", str(tmp_path / "nope.mfd"),
               "--k-lo", "5.0", "--k-hi", "5.05", "--out", str(tmp_path)])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_low_k_warns_about_blind_spot(tmp_path, capsys):
    rc = main(["scan", "--manifold", WEEKS, "--k-lo", "0.9",
               "--k-hi", "0.93", "--out", str(tmp_path)])
    assert rc == 0
    assert "q^2 < 1" in capsys.readouterr().err


def test_env_seed_override(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYPERDRUM_SEED", "7")
    rc = main(["scan", "--manifold", WEEKS, "--k-lo", "5.1",
               "--k-hi", "5.12", "--out", str(tmp_path)])
    assert rc == 0
    man = read_headed_json(tmp_path / "manifest.txt", "hyperdrum-manifest")
    assert man["config"]["seed"] == 7
    monkeypatch.setenv("HYPERDRUM_SEED", "not-a-number")
    assert main(["scan", "--manifold", WEEKS, "--k-lo", "5.1",
                 "--k-hi", "5.12", "--out", str(tmp_path)]) == 2


def test_no_minima_warns_and_exits_zero(tmp_path, capsys):
    scan_out = tmp_path / "s"
    rc = main(["scan", "--manifold", WEEKS, "--k-lo", "4.70",
               "--k-hi", "4.76", "--out", str(scan_out)])
    assert rc == 0
    rc = main(["refine", "--manifold", WEEKS,
               "--scan", str(scan_out / "scan.csv"),
               "--out", str(tmp_path / "r")])
    assert rc == 0
    assert "no " in capsys.readouterr().err.lower()