import json

import numpy as np
import pytest

from foliate.cli import (
    EXIT_CONFIG,
    EXIT_OK,
    ExperimentSpec,
    main,
    realizations_for,
)
from foliate.generators import GenSpec
from foliate.patterns import ConfigError, Domain, PointPattern
from foliate.shifts import ShiftKind, ShiftMap


def test_generate_writes_pattern(tmp_path):
    out = tmp_path / "pattern.json"
    code = main(
        [
            "generate",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "20x20",
            "--seed",
            "7",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    pat = PointPattern.from_json(out.read_text())
    assert pat.domain.extents == (20.0, 20.0)
    assert pat.metadata["seed"] == 7


def test_generate_is_byte_deterministic(tmp_path):
    args = [
        "generate",
        "--model",
        "bernoulli_grid",
        "--p",
        "0.5",
        "--torus",
        "10x10",
        "--seed",
        "3",
    ]
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_foliate_stage_roundtrip(tmp_path):
    pattern_file = tmp_path / "pattern.json"
    main(
        [
            "generate",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "20x20",
            "--seed",
            "9",
            "--out",
            str(pattern_file),
        ]
    )
    out = tmp_path / "fol"
    code = main(
        [
            "foliate",
            "--pattern",
            str(pattern_file),
            "--shift",
            "mnn",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    sm = ShiftMap.from_json((out / "shiftmap.json").read_text(), kind="mnn")
    assert len(sm) == len(PointPattern.from_json(pattern_file.read_text()))
    obj = json.loads((out / "foliation.json").read_text())
    assert obj["schema_version"] == 1
    lines = (out / "components.csv").read_text().splitlines()
    assert lines[0] == "id,size,cycle_length,n_foils,class"


def test_verify_exits_zero_and_reports_exact(tmp_path):
    out = tmp_path / "rep"
    code = main(
        [
            "verify",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "30x30",
            "--seed",
            "11",
            "--shift",
            "mnn",
            "--realizations",
            "3",
            "--n-max",
            "3",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    text = (out / "verify.csv").read_text()
    assert "descendant_mean_n1" in text
    assert ",true," in text


def test_verify_on_pattern_file(tmp_path):
    pattern_file = tmp_path / "p.json"
    main(
        [
            "generate",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "15x15",
            "--seed",
            "2",
            "--out",
            str(pattern_file),
        ]
    )
    out = tmp_path / "rep"
    code = main(
        [
            "verify",
            "--pattern",
            str(pattern_file),
            "--shift",
            "mnn",
            "--n-max",
            "2",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK


def test_config_error_exit_code():
    code = main(
        [
            "verify",
            "--model",
            "poisson",
            "--intensity",
            "-1",
            "--torus",
            "10x10",
            "--shift",
            "mnn",
        ]
    )
    assert code == EXIT_CONFIG


def test_next_row_on_non_grid_is_config_error(tmp_path):
    code = main(
        [
            "verify",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "10x10",
            "--seed",
            "1",
            "--shift",
            "next_row",
        ]
    )
    assert code == EXIT_CONFIG


def test_run_matches_staged_verify(tmp_path):
    common = [
        "--model",
        "bernoulli_grid",
        "--p",
        "0.5",
        "--torus",
        "20x20",
        "--seed",
        "5",
        "--shift",
        "next_row",
        "--realizations",
        "4",
        "--n-max",
        "3",
    ]
    staged = tmp_path / "staged"
    mono = tmp_path / "mono"
    assert main(["verify"] + common + ["--out", str(staged)]) == EXIT_OK
    assert main(["run"] + common + ["--out", str(mono)]) == EXIT_OK
    assert (staged / "verify.csv").read_bytes() == (mono / "verify.csv").read_bytes()


def test_run_is_byte_deterministic(tmp_path):
    common = [
        "run",
        "--model",
        "poisson",
        "--intensity",
        "1",
        "--torus",
        "25x25",
        "--seed",
        "6",
        "--shift",
        "mnn",
        "--realizations",
        "3",
        "--n-max",
        "2",
    ]
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert main(common + ["--out", str(a)]) == EXIT_OK
    assert main(common + ["--out", str(b)]) == EXIT_OK
    for name in ("verify.csv", "verify.json", "stats.csv", "stats.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_jobs_do_not_change_results(tmp_path):
    spec = ExperimentSpec(
        gen=GenSpec("poisson", Domain.torus(20, 20), seed=8, intensity=1.0),
        shift=ShiftKind("mnn"),
        n_realizations=4,
        n_max=2,
    )
    serial = realizations_for(spec)
    parallel = realizations_for(
        ExperimentSpec(
            gen=spec.gen,
            shift=spec.shift,
            n_realizations=4,
            n_max=2,
            jobs=2,
        )
    )
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.pattern.coords, b.pattern.coords)
        assert np.array_equal(a.shift_map.image, b.shift_map.image)


def test_ladder_subcommand(tmp_path):
    out = tmp_path / "lad"
    code = main(
        [
            "ladder",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--window",
            "80x80",
            "--buffer",
            "6",
            "--seed",
            "4",
            "--shift",
            "strip",
            "--fractions",
            "0.5,1.0",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    text = (out / "ladder.csv").read_text()
    assert text.splitlines()[0].startswith("fraction,")
    assert "class," in text


def test_stats_subcommand(tmp_path):
    out = tmp_path / "st"
    code = main(
        [
            "stats",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "20x20",
            "--seed",
            "12",
            "--shift",
            "mnn",
            "--realizations",
            "2",
            "--n-max",
            "2",
            "--out",
            str(out),
        ]
    )
    assert code == EXIT_OK
    assert "descendants_mean_n1" in (out / "stats.csv").read_text()


def test_env_seed_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("FOLIATE_SEED", "99")
    out = tmp_path / "p.json"
    main(
        [
            "generate",
            "--model",
            "poisson",
            "--intensity",
            "1",
            "--torus",
            "10x10",
            "--out",
            str(out),
        ]
    )
    pat = PointPattern.from_json(out.read_text())
    assert pat.metadata["seed"] == 99


def test_config_file_driving(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "model = poisson\ndomain = torus\nextents = 20x20\nintensity = 1.0\n"
        "shift = mnn\nrealizations = 2\nn_max = 2\nseed = 13\n"
    )
    out = tmp_path / "rep"
    code = main(["verify", "--config", str(cfg), "--out", str(out)])
    assert code == EXIT_OK
    assert (out / "verify.csv").exists()


def test_experiment_spec_validation():
    gen = GenSpec("poisson", Domain.torus(10, 10), seed=0, intensity=1.0)
    with pytest.raises(ConfigError):
        ExperimentSpec(gen=gen, shift=ShiftKind("mnn"), n_realizations=0)
    with pytest.raises(ConfigError):
        ExperimentSpec(gen=gen, shift=ShiftKind("mnn"), fractions=(0.5, 0.25))
