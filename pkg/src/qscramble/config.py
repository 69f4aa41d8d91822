"""Experiment configuration: presets, YAML loading, dotted overrides, validation.

A configuration is a nested mapping. Resolution order is
built-in defaults < preset < config file < ``--set key.path=value`` overrides.
The resolved mapping is fully explicit (time grids expanded to lists, probe
sites and regions spelled out) and is embedded verbatim in every run's
metadata.
"""
import copy
import json
import logging
import math
import os
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .errors import ConfigError, ResourceLimitError
from .hamiltonians import HamiltonianSpec

WORKERS_ENV = "QSCRAMBLE_WORKERS"
LARGE_STATE_WARNING = 16

log = logging.getLogger("qscramble")

DEFAULTS = {
    "pipeline": "quench-entropy",
    "n_qubits": 10,
    "models": [{"family": "local"}],
    "size_models": [],
    "initial_state": "Y+",
    "probe": {
        "w_kind": "Y",
        "w_site": 1,
        "w_kinds": ["Y"],
        "v_kind": "Y",
        "v_sites": "all",
        "collapse_site": None,
    },
    "times": {"start": 0.0, "stop": 10.0, "step": 0.1},
    "regions": ["half"],
    "thresholds": [0.5],
    "sizes": [],
    "operator_sizes": [],
    "average_window": [20.0, 40.0],
    "velocity": {"theta": 0.5, "site_window": None, "entropy_window": None},
    "propagator": "auto",
    "limits": {
        "dense_eigen": 14,
        "dense_operator": 13,
        "spectral_auto": 12,
        "krylov": 22,
        "krylov_dim": 40,
        "krylov_tol": 1e-12,
        "dt": 0.1,
    },
    "output": None,
    "workers": None,
}

REFERENCE_MODELS = [
    {"family": "local"},
    {"family": "powerlaw", "alpha": 1.1, "kac": True},
    {"family": "fast_scrambler", "gamma": 0.5},
    {"family": "powerlaw", "alpha": 0.4, "kac": False},
]


def _kac_alphas(alphas):
    return [{"family": "local"} if a == "inf" else {"family": "powerlaw", "alpha": a, "kac": True} for a in alphas]


PRESETS = {
    "fig1a-lightcone": (
        "Squared-commutator lightcone C_r(t) and its threshold contours for the four model variants",
        {
            "pipeline": "lightcone",
            "n_qubits": 12,
            "models": REFERENCE_MODELS,
            "times": {"start": 0.0, "stop": 10.0, "step": 0.1},
            "thresholds": [0.01, 0.5, 0.85],
        },
    ),
    "fig1b-entropy": (
        "Half-chain entropy after a quench from |Y+>, normalised by the Page value, four model variants",
        {
            "pipeline": "quench-entropy",
            "n_qubits": 12,
            "models": REFERENCE_MODELS,
            "times": {"start": 0.0, "stop": 20.0, "step": 0.1},
        },
    ),
    "fig3-operator-state": (
        "Entropy of W(t)|Y+> on the left half vs C_r at the edges of the right half",
        {
            "pipeline": "operator-state",
            "n_qubits": 12,
            "models": REFERENCE_MODELS,
            "times": {"start": 0.0, "stop": 12.0, "step": 0.1},
        },
    ),
    "fig4-opsize": (
        "Operator size L(t) relative to the Haar value and the operator density p_l(t)",
        {
            "pipeline": "operator-size",
            "n_qubits": 10,
            "models": REFERENCE_MODELS,
            "times": {"start": 0.0, "stop": 20.0, "step": 0.25},
        },
    ),
    "sm-thermalization": (
        "Magnetisation, its running time average and two-qubit trace distance (plus alpha=0.5 size scan)",
        {
            "pipeline": "thermalization",
            "n_qubits": 12,
            "models": _kac_alphas(["inf", 2.3, 1.5, 1.0, 0.8, 0.5]),
            "size_models": _kac_alphas([0.5]),
            "sizes": [6, 8, 10, 12],
            "times": {"start": 0.0, "stop": 40.0, "step": 0.2},
        },
    ),
    "sm-velocities": (
        "Entanglement and butterfly velocities in the local regime with collapse rescalings",
        {
            "pipeline": "velocities",
            "n_qubits": 12,
            "models": _kac_alphas(["inf", 6.0, 5.0, 4.0, 3.0, 2.5, 2.3, 2.1]),
            "times": {"start": 0.0, "stop": 10.0, "step": 0.05},
            "thresholds": [0.5],
        },
    ),
    "sm-lightcones": (
        "OTOC F_r(t) and 1 - S_A(W(t)|Y+>)/S_P lightcone fields with threshold contours",
        {
            "pipeline": "lightcones",
            "n_qubits": 12,
            "models": REFERENCE_MODELS,
            "times": {"start": 0.0, "stop": 10.0, "step": 0.1},
            "thresholds": [0.01, 0.5, 0.85],
        },
    ),
    "sm-finite-size": (
        "System-size scans of operator-state entropy vs C_N and of the operator size",
        {
            "pipeline": "finite-size",
            "n_qubits": 10,
            "models": [{"family": "local"}, {"family": "powerlaw", "alpha": 1.1, "kac": True}],
            "size_models": _kac_alphas([0.8]),
            "sizes": [6, 8, 10, 12],
            "operator_sizes": [6, 7, 8, 9, 10],
            "probe": {"w_kinds": ["X", "Y", "Z"]},
            "times": {"start": 0.0, "stop": 15.0, "step": 0.1},
        },
    ),
}


def list_presets():
    return "\n".join(f"{name:<22} {desc}" for name, (desc, _) in PRESETS.items())


def schema():
    text = resources.files("qscramble").joinpath("config.schema.json").read_text()
    return json.loads(text)


def deep_merge(base, update):
    out = copy.deepcopy(base)
    for key, value in update.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def apply_override(cfg, assignment):
    """Apply ``a.b.0.c=value``; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key.path=value")
    path, raw = assignment.split("=", 1)
    keys = path.strip().split(".")
    value = yaml.safe_load(raw)
    if isinstance(value, str):
        # PyYAML follows YAML 1.1, which reads "1e-12" (no dot) as a string
        try:
            number = float(value)
        except ValueError:
            number = None
        if number is not None and math.isfinite(number):
            value = number
    node = cfg
    for i, key in enumerate(keys):
        last = i == len(keys) - 1
        if isinstance(node, list):
            try:
                key = int(key)
                node[key]
            except (ValueError, IndexError):
                raise ConfigError(f"config key '{path}': '{keys[i]}' is not a valid list index") from None
        elif not isinstance(node, dict):
            raise ConfigError(f"config key '{path}': cannot descend into a {type(node).__name__}")
        if last:
            node[key] = value
        else:
            if isinstance(node, dict) and not isinstance(node.get(key), (dict, list)):
                node[key] = {}
            node = node[key]
    return cfg


def _key(path):
    return ".".join(str(p) for p in path) or "<root>"


def load_raw(source):
    """A preset name or a YAML file path -> raw mapping (before defaults)."""
    if source in PRESETS and not Path(source).exists():
        return {"preset": source}
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"config file {source!r} not found (and not a preset name)")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {source!r} is not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config file must contain a mapping at the top level")
    return data


def expand_times(spec):
    if isinstance(spec, dict):
        start, stop, step = float(spec["start"]), float(spec["stop"]), float(spec["step"])
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [float(x) for x in np.round(start + step * np.arange(max(count, 0)), 12)]
    return [float(t) for t in spec]


def resolve(raw, overrides=()):
    """Merge defaults, preset, raw mapping and overrides; validate; expand."""
    raw = copy.deepcopy(raw)
    overrides = list(overrides)
    # the preset decides the base layer, so it is overridden first
    for assignment in overrides:
        if assignment.split("=", 1)[0].strip() == "preset":
            apply_override(raw, assignment)
    preset = raw.get("preset")
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"config key 'preset': unknown preset {preset!r}; see `qscramble presets`")
        cfg = deep_merge(cfg, PRESETS[preset][1])
    cfg = deep_merge(cfg, raw)
    for assignment in overrides:
        if assignment.split("=", 1)[0].strip() != "preset":
            apply_override(cfg, assignment)
    if cfg["output"] is None:
        cfg["output"] = str(Path("results") / (preset or cfg["pipeline"]))

    validator = jsonschema.Draft202012Validator(schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(f"config key '{_key(err.absolute_path)}': {err.message}")
    return _expand(cfg)


def _expand(cfg):
    n = cfg["n_qubits"]
    cfg["times"] = expand_times(cfg["times"])
    times = cfg["times"]
    if not times:
        raise ConfigError("config key 'times': time grid is empty")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("config key 'times': time grid must be strictly increasing")
    if times[0] < 0:
        raise ConfigError("config key 'times': times must be >= 0")

    for group in ("models", "size_models"):
        for i, model in enumerate(cfg[group]):
            model.setdefault("n_qubits", n)
            try:
                spec = spec_from_model(model)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config key '{group}.{i}': {exc}") from None
            model.setdefault("label", spec.label)

    probe = cfg["probe"]
    if probe["v_sites"] == "all":
        probe["v_sites"] = list(range(1, n + 1))
    for key in ("w_site",):
        if not 1 <= probe[key] <= n:
            raise ConfigError(f"config key 'probe.{key}': site {probe[key]} outside 1..{n}")
    for i, r in enumerate(probe["v_sites"]):
        if not 1 <= r <= n:
            raise ConfigError(f"config key 'probe.v_sites.{i}': site {r} outside 1..{n}")
    if probe["collapse_site"] is None:
        probe["collapse_site"] = n // 2 + 1
    elif not 1 <= probe["collapse_site"] <= n:
        raise ConfigError(f"config key 'probe.collapse_site': site outside 1..{n}")

    regions = []
    for i, region in enumerate(cfg["regions"]):
        if region == "half":
            region = list(range(1, n // 2 + 1))
        if any(b <= a for a, b in zip(region, region[1:])) or not all(1 <= s <= n for s in region):
            raise ConfigError(f"config key 'regions.{i}': sites must be strictly increasing within 1..{n}")
        if len(region) == n:
            raise ConfigError(f"config key 'regions.{i}': region must be a proper subset of the chain")
        regions.append(list(region))
    cfg["regions"] = regions

    if cfg["average_window"][1] <= cfg["average_window"][0]:
        raise ConfigError("config key 'average_window': window must be increasing")
    if cfg["workers"] is None:
        env = os.environ.get(WORKERS_ENV)
        try:
            cfg["workers"] = max(1, int(env)) if env else 1
        except ValueError:
            raise ConfigError(f"environment variable {WORKERS_ENV}={env!r} is not an integer") from None
    _check_limits(cfg)
    return cfg


def spec_from_model(model):
    fields = {k: v for k, v in model.items() if k != "label"}
    return HamiltonianSpec.from_dict(fields)


def _check_limits(cfg):
    """Pre-flight resource checks so no work starts on an impossible run."""
    lim = cfg["limits"]
    pipeline = cfg["pipeline"]
    state_sizes = [m["n_qubits"] for m in cfg["models"]]
    op_sizes = list(state_sizes)
    if pipeline == "finite-size":
        state_sizes = list(cfg["sizes"])
        op_sizes = list(cfg["operator_sizes"])
    elif pipeline == "thermalization":
        state_sizes += list(cfg["sizes"])
    if pipeline in ("operator-size", "finite-size"):
        for n in op_sizes:
            if n > lim["dense_operator"]:
                raise ResourceLimitError("dense Heisenberg operator", n, lim["dense_operator"])
    if pipeline != "operator-size":
        for n in sorted(set(state_sizes)):
            if n > LARGE_STATE_WARNING:
                # each complex state vector is 16 * 2^N bytes; field pipelines hold one per time sample
                per_state = 16 * 2.0**n / 2**20
                log.warning(
                    "N=%d: %.0f MiB per state vector, %.1f GiB for %d time samples",
                    n, per_state, per_state * len(cfg["times"]) / 1024, len(cfg["times"]),
                )
        for n in state_sizes:
            if n > lim["krylov"]:
                raise ResourceLimitError("Krylov state propagation", n, lim["krylov"])
            if cfg["propagator"] == "spectral" and n > lim["dense_eigen"]:
                raise ResourceLimitError("eigendecomposition", n, lim["dense_eigen"])


def load_config(source, overrides=()):
    return resolve(load_raw(source), overrides)
