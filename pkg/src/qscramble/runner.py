"""Pipelines behind the presets, table assembly and CSV/JSON output.

Every pipeline maps a resolved configuration to a list of ``Table`` objects.
Work is split into independent per-model (or per-size) tasks that may run on a
thread pool; results are always assembled in declaration order, so the
output does not depend on the worker count.
"""
import csv
import io
import json
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import spec_from_model
from .hamiltonians import build_hamiltonian
from .hilbert import half_chain, left_block, local_operator, product_state
from .lightcone import (
    InsufficientDataError,
    ScramblingField,
    extract_contour,
    fit_butterfly_velocity,
    fit_entanglement_velocity,
)
from .observables import (
    entanglement_entropy,
    local_trace_distance,
    operator_states,
    page_value_for,
    squared_commutator_field,
    time_average,
    total_magnetization_z,
)
from .operators import haar_operator_size, operator_density_profile, operator_size
from .propagation import KrylovConfig, KrylovPropagator, eigendecompose, heisenberg_operators


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)

    def extend(self, rows):
        self.rows.extend(rows)


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return format(value, ".17g")
    return str(value)


def table_to_csv(table):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


# -- propagator selection ---------------------------------------------------


def _krylov(h, cfg):
    lim = cfg["limits"]
    conf = KrylovConfig(max_dim=lim["krylov_dim"], tol=lim["krylov_tol"], dt=lim["dt"])
    return KrylovPropagator(h, conf, limit=lim["krylov"])


def field_propagator(h, cfg):
    """Propagator for quantities needing forward and backward evolution."""
    lim = cfg["limits"]
    choice = cfg["propagator"]
    if choice == "spectral" or (choice == "auto" and h.n_qubits <= lim["spectral_auto"]):
        return eigendecompose(h, limit=lim["dense_eigen"])
    return _krylov(h, cfg)


def quench_propagator(h, cfg):
    """Propagator for a single forward trajectory (Krylov unless forced spectral)."""
    if cfg["propagator"] == "spectral":
        return eigendecompose(h, limit=cfg["limits"]["dense_eigen"])
    return _krylov(h, cfg)


def _model(model_cfg, n=None):
    spec = spec_from_model(model_cfg)
    if n is not None:
        spec = spec.replace(n_qubits=n)
    return spec, build_hamiltonian(spec)


def _map(func, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


# -- pipelines ----------------------------------------------------------------


def run_quench_entropy(cfg):
    times = np.asarray(cfg["times"])
    regions = cfg["regions"]
    names = [_region_name(r, cfg["n_qubits"]) for r in regions]
    columns = ["t", "model"]
    for name in names:
        columns += [f"S_{name}", "S_over_page" if len(regions) == 1 else f"S_{name}_over_page"]

    def task(model):
        spec, h = _model(model)
        psi = product_state(cfg["initial_state"], spec.n_qubits)
        traj = quench_propagator(h, cfg).trajectory(psi, times).T
        cols = []
        for region in regions:
            s = entanglement_entropy(traj, region)
            cols += [s, s / page_value_for(region, spec.n_qubits)]
        return [[t, model["label"], *vals] for t, *vals in zip(times, *cols)]

    table = Table("entropy", columns)
    for rows in _map(task, cfg["models"], cfg["workers"]):
        table.extend(rows)
    return [table]


def _region_name(region, n):
    if list(region) == list(half_chain(n)):
        return "halfchain"
    return "sites" + "-".join(str(s) for s in region)


def _commutator_field(model, cfg, n=None):
    spec, h = _model(model, n)
    n = spec.n_qubits
    probe = cfg["probe"]
    psi = product_state(cfg["initial_state"], n)
    prop = field_propagator(h, cfg)
    sites = list(range(1, n + 1)) if n != model["n_qubits"] else list(probe["v_sites"])
    c, f = squared_commutator_field(prop, probe["w_site"], probe["w_kind"], sites, probe["v_kind"], psi, cfg["times"])
    return spec, prop, psi, sites, c, f


def run_lightcone(cfg):
    times = np.asarray(cfg["times"])
    field_t = Table("lightcone_field", ["model", "r", "t", "C", "F_re", "F_im"])
    contour_t = Table("lightcone_contours", ["model", "theta", "r", "t_theta", "crossings"])

    def task(model):
        _, _, _, sites, c, f = _commutator_field(model, cfg)
        rows = [
            [model["label"], r, t, c[i, k], f[i, k].real, f[i, k].imag]
            for i, r in enumerate(sites)
            for k, t in enumerate(times)
        ]
        fld = ScramblingField(np.asarray(sites), times, c, {"model": model["label"]})
        crows = []
        for theta in cfg["thresholds"]:
            cont = extract_contour(fld, theta)
            crows += [[model["label"], theta, r, tt, n] for r, tt, n in zip(cont.sites, cont.times, cont.crossings)]
        return rows, crows

    for rows, crows in _map(task, cfg["models"], cfg["workers"]):
        field_t.extend(rows)
        contour_t.extend(crows)
    return [field_t, contour_t]


def run_operator_state(cfg):
    times = np.asarray(cfg["times"])
    probe = cfg["probe"]
    columns = ["t", "model", "S_A", "S_A_over_page", "C_B_left", "C_B_right"]

    def task(model):
        spec, h = _model(model)
        n = spec.n_qubits
        region = cfg["regions"][0]
        b_left, b_right = max(region) + 1, n
        psi = product_state(cfg["initial_state"], n)
        prop = field_propagator(h, cfg)
        phi = operator_states(prop, probe["w_site"], probe["w_kind"], psi, times)
        s = entanglement_entropy(phi, region)
        c, _ = squared_commutator_field(prop, probe["w_site"], probe["w_kind"], [b_left, b_right], probe["v_kind"], psi, times)
        sp = page_value_for(region, n)
        return [[t, model["label"], s[k], s[k] / sp, c[0, k], c[1, k]] for k, t in enumerate(times)]

    table = Table("operator_state", columns)
    for rows in _map(task, cfg["models"], cfg["workers"]):
        table.extend(rows)
    return [table]


def _operator_size_series(spec, h, cfg, w_kind):
    n = spec.n_qubits
    lim = cfg["limits"]
    sp = eigendecompose(h, limit=lim["dense_eigen"])
    w0 = local_operator(w_kind, cfg["probe"]["w_site"], n)
    profiles = [
        operator_density_profile(wt, t)
        for t, wt in zip(cfg["times"], heisenberg_operators(sp, w0, cfg["times"], limit=lim["dense_operator"]))
    ]
    return profiles


def run_operator_size(cfg):
    size_t = Table("operator_size", ["t", "model", "L", "L_over_haar"])

    def task(model):
        spec, h = _model(model)
        n = spec.n_qubits
        profiles = _operator_size_series(spec, h, cfg, cfg["probe"]["w_kind"])
        haar = haar_operator_size(n)
        rows = [[p.time, model["label"], operator_size(p), operator_size(p) / haar] for p in profiles]
        dens = Table(f"density_{model['label']}", ["t", "p0"] + [f"p{ell}" for ell in range(1, n + 1)])
        dens.extend([[p.time, p.p0, *p.p] for p in profiles])
        return rows, dens

    tables = []
    for rows, dens in _map(task, cfg["models"], cfg["workers"]):
        size_t.extend(rows)
        tables.append(dens)
    return [size_t] + tables


def _middle_pair(n):
    return [n // 2, n // 2 + 1]


def run_thermalization(cfg):
    times = np.asarray(cfg["times"])
    main = Table("thermalization", ["t", "model", "M_Z", "M_Z_time_avg", "D2"])
    scan = Table("magnetization_finite_size", ["N", "model", "t", "M_Z", "M_Z_time_avg", "M_Z_time_avg_over_N"])

    def task(item):
        model, n = item
        spec, h = _model(model, n)
        psi = product_state(cfg["initial_state"], spec.n_qubits)
        traj = quench_propagator(h, cfg).trajectory(psi, times)
        mz = total_magnetization_z(traj.T)
        avg = time_average(times, mz)
        pair = _middle_pair(spec.n_qubits)
        d2 = np.array([local_trace_distance(state, pair) for state in traj])
        return spec.n_qubits, mz, avg, d2

    items = [(m, None) for m in cfg["models"]]
    items += [(m, n) for m in cfg["size_models"] for n in cfg["sizes"]]
    results = _map(task, items, cfg["workers"])
    for (model, n), (nq, mz, avg, d2) in zip(items, results):
        if n is None:
            main.extend([[t, model["label"], mz[k], avg[k], d2[k]] for k, t in enumerate(times)])
        else:
            scan.extend([[nq, model["label"], t, mz[k], avg[k], avg[k] / nq] for k, t in enumerate(times)])
    return [main, scan] if scan_needed(cfg) else [main]


def scan_needed(cfg):
    return bool(cfg["size_models"]) and bool(cfg["sizes"])


def _try_fit(fit, *args, **kwargs):
    try:
        return fit(*args, **kwargs)
    except InsufficientDataError:
        return None


def run_velocities(cfg):
    times = np.asarray(cfg["times"])
    vel = cfg["velocity"]
    probe = cfg["probe"]
    vel_t = Table(
        "velocities",
        ["model", "alpha", "v_E", "v_E_residual", "v_E_t_start", "v_E_t_stop", "v_B", "v_B_residual", "v_B_r_first", "v_B_r_last"],
    )
    ent_t = Table("entropy_collapse", ["t", "model", "S_halfchain", "S_over_page", "S_over_vE"])
    com_t = Table("commutator_collapse", ["t", "model", "r", "C", "t_times_vB"])

    def task(model):
        spec, prop, psi, sites, c, _ = _commutator_field(model, cfg)
        n = spec.n_qubits
        region = half_chain(n)
        traj = prop.trajectory(psi, times).T
        s = entanglement_entropy(traj, region)
        sp = page_value_for(region, n)
        window = vel["entropy_window"]
        ve = _try_fit(fit_entanglement_velocity, times, s, window=window, page=sp)
        fld = ScramblingField(np.asarray(sites), times, c)
        contour = extract_contour(fld, vel["theta"])
        site_window = tuple(vel["site_window"] or (4, n - 2))
        vb = _try_fit(fit_butterfly_velocity, contour, site_window)
        v_e = ve.velocity if ve else math.nan
        v_b = vb.velocity if vb else math.nan
        alpha = "inf" if math.isinf(spec.alpha) else spec.alpha
        vrow = [
            model["label"], alpha,
            v_e, ve.residual if ve else math.nan,
            ve.window[0] if ve else math.nan, ve.window[1] if ve else math.nan,
            v_b, vb.residual if vb else math.nan,
            site_window[0], site_window[1],
        ]
        erows = [[t, model["label"], s[k], s[k] / sp, s[k] / v_e] for k, t in enumerate(times)]
        r = probe["collapse_site"]
        i = sites.index(r)
        crows = [[t, model["label"], r, c[i, k], t * v_b] for k, t in enumerate(times)]
        return vrow, erows, crows

    for vrow, erows, crows in _map(task, cfg["models"], cfg["workers"]):
        vel_t.rows.append(vrow)
        ent_t.extend(erows)
        com_t.extend(crows)
    return [vel_t, ent_t, com_t]


def run_lightcones(cfg):
    times = np.asarray(cfg["times"])
    probe = cfg["probe"]
    fields_t = Table("lightcone_fields", ["model", "r", "t", "F_re", "F_im", "C", "S_over_page", "one_minus_S_over_page"])
    contour_t = Table("lightcone_contours", ["model", "quantity", "theta", "r", "t_theta", "crossings"])

    def task(model):
        spec, prop, psi, sites, c, f = _commutator_field(model, cfg)
        n = spec.n_qubits
        phi = operator_states(prop, probe["w_site"], probe["w_kind"], psi, times)
        # region A = sites 1..r-1, so the entropy front at r matches C_r
        s_norm = np.full((len(sites), len(times)), np.nan)
        for i, r in enumerate(sites):
            if 2 <= r:
                region = left_block(r - 1)
                s_norm[i] = entanglement_entropy(phi, region) / page_value_for(region, n)
        rows = [
            [model["label"], r, t, f[i, k].real, f[i, k].imag, c[i, k],
             s_norm[i, k], 1.0 - s_norm[i, k]]
            for i, r in enumerate(sites)
            for k, t in enumerate(times)
        ]
        crows = []
        valid = ~np.isnan(s_norm[:, 0])
        fields = {
            "C": ScramblingField(np.asarray(sites), times, c),
            "S_over_page": ScramblingField(np.asarray(sites)[valid], times, s_norm[valid]),
        }
        for quantity, fld in fields.items():
            for theta in cfg["thresholds"]:
                cont = extract_contour(fld, theta)
                crows += [[model["label"], quantity, theta, r, tt, k] for r, tt, k in zip(cont.sites, cont.times, cont.crossings)]
        return rows, crows

    for rows, crows in _map(task, cfg["models"], cfg["workers"]):
        fields_t.extend(rows)
        contour_t.extend(crows)
    return [fields_t, contour_t]


def run_finite_size(cfg):
    times = np.asarray(cfg["times"])
    probe = cfg["probe"]
    state_t = Table("operator_state_finite_size", ["N", "model", "t", "S_A", "S_A_over_page", "C_N"])
    size_t = Table("operator_size_finite_size", ["N", "model", "w_kind", "t", "L", "L_over_haar"])

    def state_task(item):
        model, n = item
        spec, h = _model(model, n)
        psi = product_state(cfg["initial_state"], n)
        prop = field_propagator(h, cfg)
        region = half_chain(n)
        s = entanglement_entropy(operator_states(prop, probe["w_site"], probe["w_kind"], psi, times), region)
        c, _ = squared_commutator_field(prop, probe["w_site"], probe["w_kind"], [n], probe["v_kind"], psi, times)
        sp = page_value_for(region, n)
        return [[n, model["label"], t, s[k], s[k] / sp, c[0, k]] for k, t in enumerate(times)]

    def size_task(item):
        model, n, kind = item
        spec, h = _model(model, n)
        haar = haar_operator_size(n)
        return [
            [n, model["label"], kind, p.time, operator_size(p), operator_size(p) / haar]
            for p in _operator_size_series(spec, h, cfg, kind)
        ]

    state_items = [(m, n) for m in cfg["size_models"] for n in cfg["sizes"]]
    for rows in _map(state_task, state_items, cfg["workers"]):
        state_t.extend(rows)
    size_items = [(m, n, "Y") for m in cfg["models"][1:] for n in cfg["operator_sizes"]]
    if cfg["operator_sizes"]:
        n_max = max(cfg["operator_sizes"])
        size_items += [(m, n_max, k) for m in cfg["models"] for k in probe["w_kinds"]]
    for rows in _map(size_task, size_items, cfg["workers"]):
        size_t.extend(rows)
    return [state_t, size_t]


PIPELINES = {
    "quench-entropy": run_quench_entropy,
    "lightcone": run_lightcone,
    "operator-state": run_operator_state,
    "operator-size": run_operator_size,
    "thermalization": run_thermalization,
    "velocities": run_velocities,
    "lightcones": run_lightcones,
    "finite-size": run_finite_size,
}


def compute(cfg):
    return PIPELINES[cfg["pipeline"]](cfg)


def run_experiment(cfg, output=None):
    """Run a resolved configuration and write CSVs plus ``metadata.json``.

    Returns the list of written paths.
    """
    started = datetime.now(timezone.utc)
    tic = time.perf_counter()
    tables = compute(cfg)
    wall = time.perf_counter() - tic
    out_dir = Path(output or cfg["output"])
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for table in tables:
        path = out_dir / f"{table.name}.csv"
        path.write_text(table_to_csv(table), encoding="utf-8")
        written.append(path)
    meta = {
        "config": cfg,
        "tables": {t.name: {"file": f"{t.name}.csv", "columns": t.columns, "rows": len(t.rows)} for t in tables},
        "code_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "started_utc": started.isoformat(),
        "wall_time_s": wall,
    }
    meta_path = out_dir / "metadata.json"
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(meta_path)
    return written
