import json
import warnings

import pytest

from curres.cli import ConfigError, main, run_experiment, validate_config


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def test_missing_seed_defaults_and_is_noted():
    cfg, notes = validate_config({}, "kernels")
    assert cfg["seed"] == 0 and any("seed" in n for n in notes)


def test_non_integer_inverse_eps_names_field():
    with pytest.raises(ConfigError) as info:
        validate_config({"eps": 0.003}, "hydro")
    assert any(p.startswith("eps:") for p in info.value.problems)


def test_coarse_grid_refined_with_warning():
    with pytest.warns(RuntimeWarning):
        cfg, notes = validate_config({"m": 20, "delta": 1 / 1024, "times": [0.5]}, "converge")
    assert cfg["m"] == 64 and any("refined" in n for n in notes)


def test_replica_minimum():
    with pytest.raises(ConfigError) as info:
        validate_config({"replicas": 20}, "critical")
    assert any(p.startswith("replicas:") for p in info.value.problems)


def test_unknown_and_typed_fields():
    with pytest.raises(ConfigError) as info:
        validate_config({"bogus": 1, "replicas": 2.5, "profile": {"kind": "wavy"}}, "hydro")
    fields = {p.split(":")[0] for p in info.value.problems}
    assert {"bogus", "replicas", "profile"} <= fields


def test_stationary_needs_one_of_R_A():
    with pytest.raises(ConfigError):
        validate_config({"R": 0.5, "A": 1.0}, "stationary")
    cfg, _ = validate_config({"A": 1.0}, "stationary")
    assert cfg["R"] is None and cfg["A"] == 1.0


def test_exit_codes(tmp_path, capsys):
    assert main(["validate", "--config", write(tmp_path, {"eps": 0.003}), "--experiment", "hydro"]) == 2
    assert main(["run", "kernels", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["bogus"]) == 2
    out = tmp_path / "k"
    assert main(["run", "kernels", "--config", write(tmp_path, {}), "--out", str(out)]) == 0
    assert "PASS kernels" in capsys.readouterr().out
    bad = write(tmp_path, {"row_tol": 1e-30}, "tight.json")
    assert main(["run", "kernels", "--config", bad, "--out", str(tmp_path / "k2")]) == 1


def test_manifest_lists_files_with_hashes(tmp_path):
    cfg, notes = validate_config({"seed": 5}, "kernels")
    res = run_experiment(cfg, tmp_path, notes)
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 5 and man["config"]["experiment"] == "kernels"
    assert set(man["files"]) == {p.name for p in res.files}
    assert all(len(h) == 64 for h in man["files"].values())
    assert {"numpy", "scipy", "python"} <= set(man["versions"])
    assert "wall_clock_seconds" in man


def test_csvs_have_units_line_and_header(tmp_path):
    cfg, _ = validate_config({"replicas": 2, "eps": 0.05, "t": 0.2}, "hydro")
    res = run_experiment(cfg, tmp_path)
    for f in res.files:
        lines = f.read_text().splitlines()
        assert lines[0].startswith("# ") and "," in lines[1]


@pytest.mark.parametrize("exp,raw", [
    ("hydro", {"eps": 0.05, "replicas": 3, "t": 0.2, "sample_times": [0.1, 0.2]}),
    ("couple", {"eps": 0.05, "n": 8, "replicas": 3, "times": [0.5, 1.0]}),
    ("masswalk", {"eps": 0.05, "replicas": 100, "t": 0.2}),
    ("critical", {"eps": 0.05, "replicas": 100, "source": "sim"}),
])
def test_reruns_are_byte_identical(tmp_path, exp, raw):
    cfg, _ = validate_config({**raw, "seed": 11}, exp)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    for fa, fb in zip(a.files, b.files):
        assert fa.read_bytes() == fb.read_bytes()


def test_masswalk_calibration_flag(tmp_path):
    cfg, _ = validate_config({"eps": 0.05, "replicas": 100, "t": 0.2, "calibrate": True,
                              "meta_replicas": 100}, "masswalk")
    res = run_experiment(cfg, tmp_path)
    calib = [c for c in res.checks if "calibration" in c.name]
    assert calib and calib[0].passed
