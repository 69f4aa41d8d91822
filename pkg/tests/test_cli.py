import csv
import json
import subprocess
import sys

import pytest

from qscramble import cli
from qscramble.config import PRESETS, apply_override, expand_times, load_config, resolve
from qscramble.errors import ConfigError, ResourceLimitError
from qscramble.runner import format_value, run_experiment


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def run_cli(*argv):
    return cli.main([str(a) for a in argv])


def small(preset, **extra):
    """Overrides that shrink a preset to a few seconds of work."""
    sets = {
        "n_qubits": 6,
        "times": "{start: 0, stop: 3, step: 0.25}",
        "sizes": "[4, 6]",
        "operator_sizes": "[4, 5]",
    }
    sets.update(extra)
    out = []
    for k, v in sets.items():
        out += ["--set", f"{k}={v}"]
    return out


def test_presets_listing(capsys):
    assert run_cli("presets") == 0
    text = capsys.readouterr().out
    names = [line.split()[0] for line in text.strip().splitlines()]
    assert "fig3-operator-state" in names
    assert "sm-velocities" in names
    assert len(names) >= 8
    assert set(names) == set(PRESETS)


def test_empty_time_grid_writes_nothing(tmp_path, capsys):
    out = tmp_path / "out"
    code = run_cli("run", "fig1b-entropy", "--set", "times=[]", "-o", out)
    assert code == 2
    assert not out.exists()
    assert "times" in capsys.readouterr().err


@pytest.mark.parametrize(
    "override, key",
    [
        ("n_qubits=1", "n_qubits"),
        ("initial_state=W+", "initial_state"),
        ("models.0.family=ring", "models.0.family"),
        ("probe.w_site=40", "probe.w_site"),
        ("bogus=3", "<root>"),
        ("times={start: 0, stop: 1, step: 0}", "times"),
        ("regions=[[3, 1]]", "regions.0"),
    ],
)
def test_schema_errors_name_the_key(override, key, tmp_path, capsys):
    assert run_cli("run", "fig1b-entropy", "--set", override, "-o", tmp_path / "x") == 2
    assert f"'{key}'" in capsys.readouterr().err
    assert not (tmp_path / "x").exists()


def test_resource_limit_exit_code(tmp_path, capsys):
    code = run_cli("run", "fig4-opsize", "--set", "n_qubits=16", "-o", tmp_path / "x")
    assert code == 3
    err = capsys.readouterr().err
    assert "N=16" in err and "13" in err
    assert run_cli("run", "fig1b-entropy", "--set", "n_qubits=30", "-o", tmp_path / "y") == 3


def test_numerical_failure_exit_code(tmp_path):
    code = run_cli(
        "run", "fig1b-entropy", *small("fig1b-entropy"),
        "--set", "propagator=krylov", "--set", "limits.krylov_dim=2",
        "--set", "limits.krylov_tol=1e-15", "--set", "limits.dt=3",
        "-o", tmp_path / "x",
    )
    assert code == 4


def test_unknown_config_source(capsys):
    assert run_cli("validate", "no-such-preset") == 2


def test_validate_prints_resolved_config(capsys):
    assert run_cli("validate", "sm-velocities", "--set", "n_qubits=8") == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["n_qubits"] == 8
    assert cfg["probe"]["v_sites"] == list(range(1, 9))
    assert cfg["times"][:3] == [0.0, 0.05, 0.1]
    assert [m["label"] for m in cfg["models"]][:2] == ["local", "alpha6_kac"]


def test_yaml_config_file(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text(
        "preset: fig1b-entropy\n"
        "n_qubits: 5\n"
        "models:\n"
        "  - {family: powerlaw, alpha: 2.0, kac: true, label: mine}\n"
        "times: [0, 0.5, 1.0]\n"
    )
    cfg = load_config(str(path), ["models.0.alpha=3.0"])
    assert cfg["models"][0]["alpha"] == 3.0 and cfg["models"][0]["label"] == "mine"
    assert cfg["output"].endswith("fig1b-entropy")
    written = run_experiment(cfg, tmp_path / "run")
    header, rows = read_csv(tmp_path / "run" / "entropy.csv")
    assert header == ["t", "model", "S_halfchain", "S_over_page"]
    assert [r[1] for r in rows] == ["mine"] * 3
    assert {p.name for p in written} == {"entropy.csv", "metadata.json"}


def test_override_helpers():
    cfg = {"a": {"b": [1, 2]}}
    apply_override(cfg, "a.b.1=5")
    apply_override(cfg, "a.c=[x, y]")
    assert cfg == {"a": {"b": [1, 5], "c": ["x", "y"]}}
    with pytest.raises(ConfigError):
        apply_override(cfg, "a.b.7=1")
    with pytest.raises(ConfigError):
        apply_override(cfg, "no-equals")
    assert expand_times({"start": 0, "stop": 1, "step": 0.25}) == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_resolve_errors():
    with pytest.raises(ConfigError):
        resolve({"preset": "fig1b-entropy", "times": [0.0, 0.0]})
    with pytest.raises(ResourceLimitError):
        resolve({"preset": "fig4-opsize", "n_qubits": 14})


def test_workers_environment(monkeypatch):
    monkeypatch.setenv("QSCRAMBLE_WORKERS", "3")
    assert load_config("fig1b-entropy")["workers"] == 3
    assert load_config("fig1b-entropy", ["workers=2"])["workers"] == 2
    monkeypatch.setenv("QSCRAMBLE_WORKERS", "many")
    with pytest.raises(ConfigError):
        load_config("fig1b-entropy")


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert float(format_value(1 / 3)) == 1 / 3
    assert format_value(float("nan")) == "nan"
    assert format_value(True) == "true"
    assert format_value(7) == "7"


def test_fig1b_entropy_columns(tmp_path):
    out = tmp_path / "fig1b"
    assert run_cli("run", "fig1b-entropy", "--set", "n_qubits=10", "--set", "times={start: 0, stop: 5, step: 0.25}", "-o", out) == 0
    header, rows = read_csv(out / "entropy.csv")
    assert header == ["t", "model", "S_halfchain", "S_over_page"]
    assert list(dict.fromkeys(r[1] for r in rows)) == ["local", "alpha1.1_kac", "fs", "alpha0.4_k1"]
    assert len(rows) == 4 * 21
    meta = json.loads((out / "metadata.json").read_text())
    assert meta["config"]["n_qubits"] == 10
    assert meta["tables"]["entropy"]["rows"] == 84
    for key in ("code_version", "numpy_version", "started_utc", "wall_time_s"):
        assert key in meta


def test_fig4_opsize_columns(tmp_path):
    out = tmp_path / "fig4"
    assert run_cli("run", "fig4-opsize", "--set", "n_qubits=8", "--set", "times={start: 0, stop: 4, step: 0.5}", "-o", out) == 0
    header, rows = read_csv(out / "operator_size.csv")
    assert header == ["t", "model", "L", "L_over_haar"]
    assert float(rows[0][2]) == pytest.approx(1.0)
    for label in ["local", "alpha1.1_kac", "fs", "alpha0.4_k1"]:
        dheader, drows = read_csv(out / f"density_{label}.csv")
        assert dheader == ["t", "p0"] + [f"p{k}" for k in range(1, 9)]
        assert len(drows) == 9
        for row in drows:
            assert sum(float(x) for x in row[1:]) == pytest.approx(1, abs=1e-9)


EXPECTED_TABLES = {
    "fig1a-lightcone": {"lightcone_field", "lightcone_contours"},
    "fig1b-entropy": {"entropy"},
    "fig3-operator-state": {"operator_state"},
    "fig4-opsize": {"operator_size", "density_local", "density_alpha1.1_kac", "density_fs", "density_alpha0.4_k1"},
    "sm-thermalization": {"thermalization", "magnetization_finite_size"},
    "sm-velocities": {"velocities", "entropy_collapse", "commutator_collapse"},
    "sm-lightcones": {"lightcone_fields", "lightcone_contours"},
    "sm-finite-size": {"operator_state_finite_size", "operator_size_finite_size"},
}


def _bodies(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.glob("*.csv"))}


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_every_preset_runs_deterministically(preset, tmp_path):
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run_cli("run", preset, *small(preset), "-o", a) == 0
    assert run_cli("run", preset, *small(preset), "-o", b) == 0
    assert run_cli("run", preset, *small(preset), "-o", c, "-j", 3) == 0
    assert {p[:-4] for p in _bodies(a)} == EXPECTED_TABLES[preset]
    assert _bodies(a) == _bodies(b) == _bodies(c)
    meta = json.loads((a / "metadata.json").read_text())
    assert meta["config"]["preset"] == preset
    assert meta["config"]["workers"] == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "qscramble", "run", "fig1b-entropy", *small("fig1b-entropy"), "-o", str(tmp_path / "m")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "m" / "entropy.csv").exists()
