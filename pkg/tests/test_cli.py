import csv
import json

import pytest

from multibeta.cli import main
from multibeta.reports import config_hash


def write_config(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2) + "\n")
    return str(path)


def read_csv(path):
    with open(path, newline="") as handle:
        return list(csv.reader(handle))


CONE_CFG = {
    "field": {"kind": "cone", "dim": 2, "params": {"x0": [0.4, 0.6]}},
    "depth": 2,
    "quad": {"nodes": 5, "restricted_nodes": 9, "mc_samples": 32},
    "seed": 7,
}


class TestExitCodes:
    def test_analyze_ok(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", CONE_CFG)
        assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "out"),
                     "--quiet"]) == 0
        assert (tmp_path / "out" / "analyze.csv").exists()
        assert (tmp_path / "out" / "manifest.json").exists()

    def test_missing_config_file(self, tmp_path, capsys):
        assert main(["analyze", "--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "out")]) == 2
        assert "does not exist" in capsys.readouterr().err

    def test_invalid_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "field": {,}\n}\n')
        assert main(["analyze", "--config", str(path),
                     "--out", str(tmp_path / "out")]) == 2
        err = capsys.readouterr().err
        assert f"{path}:2:" in err

    def test_missing_grid_file_names_path(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "cfg.json",
                           {"field": {"grid_csv": str(tmp_path / "ghost.csv")}})
        assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert "ghost.csv" in capsys.readouterr().err

    def test_bad_selector_names_key(self, tmp_path, capsys):
        cfg = write_config(tmp_path, "cfg.json", dict(CONE_CFG, selector="bogus"))
        assert main(["carleson", "--config", cfg, "--out", str(tmp_path / "out")]) == 2
        assert '"selector"' in capsys.readouterr().err

    def test_verify_passes(self, tmp_path):
        assert main(["verify", "--out", str(tmp_path / "out"), "--quiet"]) == 0
        rows = read_csv(tmp_path / "out" / "verify.csv")
        assert rows[0] == ["property", "passed", "detail"]
        assert all(r[1] == "true" for r in rows[1:])


class TestArtifacts:
    def test_affine_analyze_all_zero(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", {
            "field": {"kind": "affine", "dim": 2,
                      "params": {"a": [0.5, -0.25], "b": 0.1}},
            "depth": 1,
            "quad": {"nodes": 5, "restricted_nodes": 9, "mc_samples": 16},
        })
        out = tmp_path / "out"
        assert main(["analyze", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        rows = read_csv(out / "analyze.csv")
        assert rows[0] == ["level", "index", "beta_1", "beta_2", "beta_inf"]
        assert len(rows) == 1 + 1 + 4
        for row in rows[1:]:
            assert all(abs(float(v)) <= 1e-10 for v in row[2:])

    def test_carleson_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", dict(CONE_CFG, selector="beta2"))
        out = tmp_path / "out"
        assert main(["carleson", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        for name in ("carleson_levels.csv", "carleson_cubes.csv",
                     "carleson_scales.svg", "carleson_heatmap.svg"):
            assert (out / name).exists(), name
        levels = read_csv(out / "carleson_levels.csv")
        assert [r[0] for r in levels[1:]] == ["0", "1", "2"]
        cumul = [float(r[3]) for r in levels[1:]]
        assert cumul == sorted(cumul)

    def test_parabolic_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", {
            "field": {"kind": "p_additive", "dim": 2,
                      "params": {"space": "cone", "space_params": {"x0": [0.4]},
                                 "time": "sin"}},
            "depth": 1,
            "quad": {"nodes": 5, "mc_samples": 16},
            "L": 2.0,
            "seed": 0,
        })
        out = tmp_path / "out"
        assert main(["parabolic", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        coeffs = read_csv(out / "parabolic_coefficients.csv")
        assert coeffs[0][:4] == ["affinity", "osc", "beta2", "beta_inf"]
        assert float(coeffs[1][2]) > 0  # beta2 of a cone is positive
        boxes = read_csv(out / "parabolic_boxes.csv")
        assert len(boxes) == 1 + 1 + 8  # header, root, 2^(n+1) children

    def test_reconstruct_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", {
            "field": {"kind": "cone", "dim": 2, "params": {"x0": [0.45, 0.55]}},
            "quad": {"nodes": 5, "restricted_nodes": 9, "mc_samples": 32},
            "seed": 7,
        })
        out = tmp_path / "out"
        assert main(["reconstruct", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        rows = read_csv(out / "reconstruct.csv")
        rec = dict(zip(rows[0], rows[1]))
        assert rec["accepted"] == "true"
        assert float(rec["beta2_small_direct"]) <= float(rec["beta2_small_via_affine"]) + 1e-12
        assert (out / "reconstruct.svg").exists()

    def test_rademacher_artifacts(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", {
            "field": {"kind": "p_additive", "dim": 2,
                      "params": {"space": "square", "time": "sin"}},
            "point": [0.3, 0.5],
            "radii": [0.2, 0.1, 0.05],
            "quad": {"nodes": 9},
        })
        out = tmp_path / "out"
        assert main(["rademacher", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        rows = read_csv(out / "rademacher.csv")
        assert len(rows) == 4
        summary = read_csv(out / "rademacher_summary.csv")
        assert summary[0] == ["point", "gradient", "slope"]


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", dict(CONE_CFG, selector="beta2"))
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["carleson", "--config", cfg, "--out", str(out),
                         "--quiet"]) == 0
        for name in ("carleson_levels.csv", "carleson_cubes.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        # manifests agree except for the artifact paths themselves
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        m1.pop("outputs"), m2.pop("outputs")
        assert m1 == m2

    def test_verify_reruns_identical(self, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["verify", "--out", str(out), "--quiet"]) == 0
        assert (out1 / "verify.csv").read_bytes() == (out2 / "verify.csv").read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", CONE_CFG)
        out = tmp_path / "out"
        assert main(["igbeta", "--config", cfg, "--out", str(out), "--quiet",
                     "--seed", "11"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 11


class TestManifest:
    def test_hash_tracks_config_content(self, tmp_path):
        cfg_a = dict(CONE_CFG)
        cfg_b = dict(CONE_CFG, depth=3)
        assert config_hash(cfg_a) == config_hash(dict(CONE_CFG))
        assert config_hash(cfg_a) != config_hash(cfg_b)

    def test_manifest_fields(self, tmp_path):
        cfg = write_config(tmp_path, "cfg.json", CONE_CFG)
        out = tmp_path / "out"
        assert main(["analyze", "--config", cfg, "--out", str(out), "--quiet"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["schema_version"] == 1
        assert manifest["seed"] == 7
        assert manifest["config_sha256"] == config_hash(CONE_CFG)
        assert str(out / "analyze.csv") in manifest["outputs"]
        assert {"multibeta", "numpy", "scipy", "python"} <= set(manifest["versions"])
