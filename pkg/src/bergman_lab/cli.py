"""Batch front-end: config parsing, experiment dispatch and reproducible outputs.

Every run writes into its output directory

* ``results.csv`` -- first line ``# manifest-sha256: <hash>``, then a header
  and the data rows (fixed float format, deterministic ordering);
* ``manifest.json`` -- every knob (defaults included), seeds and library
  versions under ``"deterministic"`` (the hashed part) and wall time under
  ``"runtime"``;
* ``summary.txt`` -- one ``PASS``/``FAIL`` line per declared check;
* ``error.json`` -- only on failure: machine-readable error record.

Exit codes: 0 pass, 2 check failure, 3 numeric error, 4 config error.
"""
import argparse
import configparser
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy
import sympy

from . import __version__
from .domains import is_ball_biholomorphic, parse_domain
from .errors import BergmanLabError, ConfigError
from .geodesics import bergman_distance
from .kernel import build_kernel, kernel_eval
from .metric import (caratheodory_distance, closed_form_bergman_distance, finite_difference_metric,
                     has_closed_form_distance, metric_tensor)

EXIT_PASS, EXIT_CHECK, EXIT_NUMERIC, EXIT_CONFIG = 0, 2, 3, 4
FLOAT = "{:.12e}"

KINDS = ("kernel-table", "metric-table", "distance-table", "scale-verify", "fridman-limit", "localization",
         "hahn-lu")
SUBCOMMANDS = {"kernel": "kernel-table", "metric": "metric-table", "distance": "distance-table",
               "scale": "scale-verify", "fridman": "fridman-limit", "localize": "localization", "hahnlu": "hahn-lu"}

# section -> key -> (parser, default, validator description)
SCHEMA = {
    "experiment": {
        "kind": (str, None),
        "domain": (str, "disc"),
        "seed": (int, 0),
        "output": (str, "berglab-out"),
        "workers": (int, 1),
    },
    "geometry": {
        "boundary_point": ("point", None),
        "class": (str, "strongly_pseudoconvex"),
        "approach": (str, "normal"),
        "aperture": (float, np.pi / 6),
        "deltas": ("floats", [1e-1, 10 ** -1.5, 1e-2, 10 ** -2.5, 1e-3]),
        "points": ("points", None),
        "neighborhood_radius": (float, 0.5),
    },
    "numerics": {
        "degree": (int, 60),
        "n_nodes": (int, 2 ** 16),
        "n_points": (int, 20),
        "point_scale": (float, 0.9),
        "n_pairs": (int, 50),
        "max_distance": (float, 3.0),
        "tol": (float, 1e-10),
        "n_dirs": (int, 0),
        "radius_grid": ("floats", [0.25, 1.3, 12.0]),
        "quantities": ("words", ["kernel", "metric", "christoffel", "distance", "ball"]),
        "radius": (float, 1.0),
        "eps": (float, 0.05),
        "kernel_tol": (float, 1e-10),
        "metric_tol": (float, 1e-5),
        "distance_tol": (float, 1e-4),
        "margin_tol": (float, 1e-4),
        "final_distance_gap": (float, 5e-3),
        "final_u_max": (float, 0.2),
        "stabilization": (float, 0.05),
        "soundness": ("bool", False),
    },
}

RANGES = {
    "seed": (0, 2 ** 32 - 1), "workers": (1, 64), "degree": (1, 200), "n_nodes": (1024, 2 ** 24),
    "n_points": (1, 10000), "point_scale": (0.01, 0.999), "n_pairs": (1, 10000), "max_distance": (0.0, 50.0),
    "tol": (1e-14, 1e-2),
    "n_dirs": (0, 100000), "radius": (1e-3, 20.0), "eps": (0.0, 1.0), "aperture": (0.0, np.pi / 2),
    "neighborhood_radius": (1e-3, 1e3),
}


def _parse_point(text):
    try:
        return np.array([complex(t.strip().replace(" ", "")) for t in text.split(",")])
    except ValueError as exc:
        raise ValueError(f"bad point {text!r}") from exc


def _convert(kind, text):
    if kind == "point":
        return _parse_point(text)
    if kind == "points":
        return [_parse_point(t) for t in text.split(";") if t.strip()]
    if kind == "floats":
        return [float(t) for t in text.replace(",", " ").split()]
    if kind == "words":
        return [t for t in text.replace(",", " ").split()]
    if kind == "bool":
        low = text.strip().lower()
        if low not in ("true", "false", "yes", "no", "1", "0"):
            raise ValueError(f"bad boolean {text!r}")
        return low in ("true", "yes", "1")
    return kind(text.strip())


@dataclass
class ExperimentConfig:
    """Validated experiment configuration (all knobs, defaults filled in)."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def as_json(self):
        out = {}
        for k, v in sorted(self.values.items()):
            out[k] = _jsonable(v)
        return out


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [float(FLOAT.format(v.real)), float(FLOAT.format(v.imag))]
    if isinstance(v, (np.floating, float)):
        return float(FLOAT.format(float(v)))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def parse_config(text, kind=None):
    """Strictly parse INI text into an ``ExperimentConfig``.

    Unknown sections or keys, malformed values and out-of-range knobs raise
    ``ConfigError`` naming the offending key.
    """
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", key=getattr(exc, "option", None) or "config") from exc
    values = {}
    for section, keys in SCHEMA.items():
        for key, (conv, default) in keys.items():
            values[key] = default
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, text_value in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
            conv = SCHEMA[section][key][0]
            try:
                values[key] = _convert(conv, text_value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"bad value for {key!r}: {exc}", key=key) from exc
    if kind is not None:
        if values["kind"] not in (None, kind):
            raise ConfigError(f"config kind {values['kind']!r} does not match subcommand ({kind!r})", key="kind")
        values["kind"] = kind
    if values["kind"] not in KINDS:
        raise ConfigError(f"unknown experiment kind {values['kind']!r}", key="kind")
    for key, (lo, hi) in RANGES.items():
        if not lo <= values[key] <= hi:
            raise ConfigError(f"{key} = {values[key]!r} outside [{lo}, {hi}]", key=key)
    d = values["deltas"]
    if not d or any(x <= 0 or x >= 1 for x in d) or np.any(np.diff(d) >= 0):
        raise ConfigError("deltas must be strictly decreasing in (0, 1)", key="deltas")
    g = values["radius_grid"]
    if len(g) != 3 or not (0 < g[0] < g[2]) or g[1] <= 1:
        raise ConfigError("radius_grid must be 'r_min ratio r_max' with ratio > 1", key="radius_grid")
    unknown = set(values["quantities"]) - {"kernel", "metric", "christoffel", "distance", "ball"}
    if unknown:
        raise ConfigError(f"unknown quantities {sorted(unknown)}", key="quantities")
    try:
        values["_domain"] = parse_domain(values["domain"])
    except BergmanLabError as exc:
        raise ConfigError(str(exc), key="domain") from exc
    n = values["_domain"].n
    if values["boundary_point"] is not None and len(values["boundary_point"]) != n:
        raise ConfigError("boundary_point has the wrong dimension", key="boundary_point")
    if values["points"] is not None and any(len(p) != n for p in values["points"]):
        raise ConfigError("points have the wrong dimension", key="points")
    return ExperimentConfig(values)


def load_config(path, kind=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", key="config") from exc
    return parse_config(text, kind)


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return FLOAT.format(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _cols(z, prefix):
    out = {}
    for k, c in enumerate(np.atleast_1d(z)):
        out[f"{prefix}{k + 1}_re"] = float(np.real(c))
        out[f"{prefix}{k + 1}_im"] = float(np.imag(c))
    return out


def sample_points(domain, count, seed, shrink=0.9):
    """Deterministic random points ``z`` with ``z / shrink`` in the (circular) domain."""
    if not domain.bounded:
        raise ConfigError("random points need a bounded domain; give [geometry] points", key="points")
    rng = np.random.default_rng(seed)
    lo, hi = domain.bounding_box()
    out = []
    while len(out) < count:
        X = lo + (hi - lo) * rng.random((4 * count, len(lo)))
        Z = X[:, 0::2] + 1j * X[:, 1::2]
        ok = domain.contains(Z)
        out.extend((shrink * Z[ok]).tolist())
    return np.array(out[:count], dtype=complex)


def _pmap(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _radius_grid(cfg):
    from .fridman import radius_grid

    r0, ratio, r1 = cfg["radius_grid"]
    return radius_grid(r0, ratio, r1)


@dataclass
class Outcome:
    columns: list
    rows: list
    checks: list  # (name, passed, detail)
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _points(cfg):
    if cfg["points"] is not None:
        return np.array(cfg["points"], dtype=complex)
    return sample_points(cfg["_domain"], cfg["n_points"], cfg["seed"], cfg["point_scale"])


def run_kernel_table(cfg):
    D = cfg["_domain"]
    model = build_kernel(D)
    Z = _points(cfg)
    K = np.atleast_1d(kernel_eval(model, Z))
    checks = [("kernel_positive", bool(np.all(K > 0) and np.all(np.isfinite(K))), f"min K = {K.min():.3e}")]
    reference = None
    if type(model).__name__ != "SeriesKernel":
        try:
            reference = build_kernel(D, degree=cfg["degree"], mode="series")
        except BergmanLabError:
            reference = None
    rel = np.full(len(Z), np.nan)
    if reference is not None:
        Kr = np.atleast_1d(kernel_eval(reference, Z))
        rel = np.abs(K - Kr) / np.abs(Kr)
        checks.append(("series_agreement", bool(np.max(rel) < cfg["kernel_tol"]),
                       f"max relative error {np.max(rel):.3e} (tol {cfg['kernel_tol']:.1e})"))
    rows = []
    for i, z in enumerate(Z):
        rows.append({"i": i, **_cols(z, "z"), "K": float(K[i]), "log_K": float(np.log(K[i])),
                     "rel_err_series": float(rel[i])})
    cols = ["i"] + [c for k in range(D.n) for c in (f"z{k + 1}_re", f"z{k + 1}_im")] + ["K", "log_K",
                                                                                         "rel_err_series"]
    return Outcome(cols, rows, checks, {"model": repr(model)})


def run_metric_table(cfg):
    D = cfg["_domain"]
    model = build_kernel(D)
    Z = _points(cfg)
    n = D.n

    def one(z):
        st = metric_tensor(model, z)
        fd = finite_difference_metric(model, z)
        return st, float(np.linalg.norm(st.g - fd) / np.linalg.norm(st.g))

    res = _pmap(one, list(Z), cfg["workers"])
    rows, worst = [], 0.0
    for i, (z, (st, err)) in enumerate(zip(Z, res)):
        row = {"i": i, **_cols(z, "z")}
        for a in range(n):
            for b in range(n):
                row[f"g{a + 1}{b + 1}_re"] = float(st.g[a, b].real)
                row[f"g{a + 1}{b + 1}_im"] = float(st.g[a, b].imag)
        row["min_eig"] = float(st.eigenvalues.min())
        row["rel_err_fd"] = err
        worst = max(worst, err)
        rows.append(row)
    cols = ["i"] + [c for k in range(n) for c in (f"z{k + 1}_re", f"z{k + 1}_im")]
    cols += [f"g{a + 1}{b + 1}_{p}" for a in range(n) for b in range(n) for p in ("re", "im")]
    cols += ["min_eig", "rel_err_fd"]
    checks = [("positive_definite", bool(min(r["min_eig"] for r in rows) > 0), ""),
              ("finite_difference_agreement", bool(worst < cfg["metric_tol"]),
               f"max relative error {worst:.3e} (tol {cfg['metric_tol']:.1e})")]
    return Outcome(cols, rows, checks)


def _pairs(cfg):
    D = cfg["_domain"]
    if cfg["points"] is not None:
        P = np.array(cfg["points"], dtype=complex)
        if len(P) % 2:
            raise ConfigError("points must come in pairs", key="points")
        return list(zip(P[0::2], P[1::2]))
    rng_seed = cfg["seed"]
    pairs = []
    attempt = 0
    while len(pairs) < cfg["n_pairs"]:
        Z = sample_points(D, 2 * cfg["n_pairs"], rng_seed + 7919 * attempt, cfg["point_scale"])
        for z, w in zip(Z[0::2], Z[1::2]):
            if has_closed_form_distance(D) and closed_form_bergman_distance(D, z, w) > cfg["max_distance"]:
                continue
            pairs.append((z, w))
        attempt += 1
    return pairs[: cfg["n_pairs"]]


def run_distance_table(cfg):
    D = cfg["_domain"]
    model = build_kernel(D)
    pairs = _pairs(cfg)
    closed = has_closed_form_distance(D)

    def one(zw):
        r = bergman_distance(model, zw[0], zw[1], method="shooting", tol=cfg["tol"], seed=cfg["seed"])
        ref = closed_form_bergman_distance(D, zw[0], zw[1]) if closed else np.nan
        return r, ref

    res = _pmap(one, pairs, cfg["workers"])
    rows = []
    for i, ((z, w), (r, ref)) in enumerate(zip(pairs, res)):
        rows.append({"i": i, **_cols(z, "z"), **_cols(w, "w"), "distance": r.distance, "miss": r.miss,
                     "closed_form": ref, "abs_err": abs(r.distance - ref) if closed else np.nan})
    n = D.n
    cols = ["i"] + [c for p in "zw" for k in range(n) for c in (f"{p}{k + 1}_re", f"{p}{k + 1}_im")]
    cols += ["distance", "miss", "closed_form", "abs_err"]
    checks = [("shooting_converged", bool(all(r["miss"] < 1e-6 for r in rows)), "")]
    if closed:
        worst = max(r["abs_err"] for r in rows)
        checks.append(("closed_form_agreement", bool(worst < cfg["distance_tol"]),
                       f"max error {worst:.3e} (tol {cfg['distance_tol']:.1e})"))
    return Outcome(cols, rows, checks)


def run_hahn_lu(cfg):
    D = cfg["_domain"]
    model = build_kernel(D)
    pairs = _pairs(cfg)

    def one(zw):
        db = bergman_distance(model, zw[0], zw[1], method="shooting", tol=cfg["tol"], seed=cfg["seed"]).distance
        return db, caratheodory_distance(D, zw[0], zw[1])

    res = _pmap(one, pairs, cfg["workers"])
    rows = []
    for i, ((z, w), (db, dc)) in enumerate(zip(pairs, res)):
        rows.append({"i": i, **_cols(z, "z"), **_cols(w, "w"), "bergman": db, "caratheodory": dc,
                     "margin": db - dc})
    n = D.n
    cols = ["i"] + [c for p in "zw" for k in range(n) for c in (f"{p}{k + 1}_re", f"{p}{k + 1}_im")]
    cols += ["bergman", "caratheodory", "margin"]
    worst = min(r["margin"] for r in rows)
    return Outcome(cols, rows, [("hahn_lu_margin", bool(worst >= -cfg["margin_tol"]),
                                 f"min margin {worst:.3e} (tol -{cfg['margin_tol']:.1e})")])


def _sequence(cfg):
    from .scaling import build_scaling

    D = cfg["_domain"]
    p0 = cfg["boundary_point"]
    if p0 is None:
        raise ConfigError("scaling experiments need [geometry] boundary_point", key="boundary_point")
    return build_scaling(D, p0, cls=cfg["class"], approach=cfg["approach"], deltas=np.array(cfg["deltas"]),
                         aperture=cfg["aperture"])


def run_scale_verify(cfg):
    from .scaling import verify_chain

    seq = _sequence(cfg)
    S = np.array(cfg["points"], dtype=complex) if cfg["points"] is not None else None
    reports = verify_chain(seq, S=S, quantities=cfg["quantities"], radius=cfg["radius"], eps=cfg["eps"],
                           n_dirs=cfg["n_dirs"] or None, seed=cfg["seed"])
    rows, checks = [], []
    for rep in reports:
        for j, (d, g, f) in enumerate(zip(rep.deltas, rep.gaps, rep.flags)):
            rows.append({"quantity": rep.quantity, "j": j + 1, "delta": float(d), "sup_gap": float(g),
                         "mode": rep.mode, "flags": ";".join(f)})
        checks.append((f"{rep.quantity}_decreasing", rep.decreasing,
                       " ".join(f"{g:.3e}" for g in rep.gaps)))
        checks.append((f"{rep.quantity}_saturation", rep.saturation_ok,
                       f"final {rep.final_gap:.3e}, predicted next {rep.predicted_next():.3e}"))
        if rep.quantity == "distance":
            checks.append(("final_distance_gap", bool(rep.final_gap < cfg["final_distance_gap"]),
                           f"{rep.final_gap:.3e} (tol {cfg['final_distance_gap']:.1e})"))
        if "inclusions" in rep.extra:
            inc = rep.extra["inclusions"]
            checks.append(("ball_inclusions", inc["holds"],
                           f"outer slack {inc['outer_slack']:.3e}, inner slack {inc['inner_slack']:.3e}"))
    cols = ["quantity", "j", "delta", "sup_gap", "mode", "flags"]
    return Outcome(cols, rows, checks, {"limit": repr(seq.limit), "notes": seq.notes})


def run_fridman_limit(cfg):
    from .fridman import boundary_limit_experiment, resample_check

    seq = _sequence(cfg)
    D = cfg["_domain"]
    res = boundary_limit_experiment(seq, radii=_radius_grid(cfg), n_dirs=cfg["n_dirs"] or None, seed=cfg["seed"])
    rows = []
    sound = []
    for r in res:
        e = r["estimate"]
        row = {"j": r["j"], "delta": r["delta"], "u": r["u"], "radius": r["radius"], "error": r["error"],
               "center_shift": np.nan, "level": np.nan, "a": np.nan, "b": np.nan, "worst_margin": np.nan,
               "resample_margin": np.nan}
        if e is not None and not e.certified_zero:
            row.update(center_shift=e.witness.params["s"], level=e.witness.params["level"],
                       a=e.witness.params["a"], b=e.witness.params["b"], worst_margin=e.diagnostics["worst_margin"])
            if cfg["soundness"]:
                m = build_kernel(seq.scaled[r["j"] - 1])
                row["resample_margin"] = resample_check(m, e, seed=cfg["seed"] + 1)
                sound.append(row["resample_margin"])
        rows.append(row)
    u = np.array([r["u"] for r in rows])
    checks = [("all_rows_estimated", bool(np.all(np.isfinite(u))), "")]
    if is_ball_biholomorphic(D):
        checks.append(("certified_zero", bool(np.all(u == 0)), ""))
    elif cfg["class"] == "strongly_pseudoconvex":
        checks.append(("strictly_decreasing", bool(np.all(np.diff(u) < 0)), " ".join(f"{x:.4f}" for x in u)))
        checks.append(("final_u", bool(u[-1] < cfg["final_u_max"]), f"{u[-1]:.4f} (max {cfg['final_u_max']})"))
    else:
        change = abs(u[-1] - u[-2]) / abs(u[-2]) if len(u) > 1 and u[-2] != 0 else np.nan
        checks.append(("positive", bool(np.all(u > 0)), ""))
        checks.append(("stabilized", bool(change < cfg["stabilization"]),
                       f"last relative change {change:.3e} (tol {cfg['stabilization']})"))
    if cfg["soundness"]:
        checks.append(("resample_soundness", bool(all(s >= -1e-6 for s in sound)),
                       f"min margin {min(sound) if sound else np.inf:.3e}"))
    cols = ["j", "delta", "u", "radius", "center_shift", "level", "a", "b", "worst_margin", "resample_margin", "error"]
    return Outcome(cols, rows, checks, {"notes": seq.notes})


def run_localization(cfg):
    from .fridman import localization_experiment

    seq = _sequence(cfg)
    rows = localization_experiment(cfg["_domain"], cfg["boundary_point"], cfg["neighborhood_radius"], seq=seq,
                                   radii=_radius_grid(cfg), n_dirs=cfg["n_dirs"] or None, seed=cfg["seed"])
    out = [{"delta": r["delta"], "u_full": r["u_full"], "u_local": r["u_local"], "ratio": r["ratio"]} for r in rows]
    checks = [("estimates_available", bool(all(np.isfinite(r["u_full"]) and np.isfinite(r["u_local"]) for r in out)),
               "diagnostic trend; no hard gate on the ratio")]
    return Outcome(["delta", "u_full", "u_local", "ratio"], out, checks)


RUNNERS = {
    "kernel-table": run_kernel_table,
    "metric-table": run_metric_table,
    "distance-table": run_distance_table,
    "hahn-lu": run_hahn_lu,
    "scale-verify": run_scale_verify,
    "fridman-limit": run_fridman_limit,
    "localization": run_localization,
}


# ---------------------------------------------------------------------------
# outputs
# ---------------------------------------------------------------------------


def manifest_core(cfg):
    """Deterministic manifest content (hashed)."""
    knobs = {k: v for k, v in cfg.as_json().items() if not k.startswith("_")}
    return {"knobs": knobs, "library": {"bergman_lab": __version__, "numpy": np.__version__,
                                        "scipy": scipy.__version__, "sympy": sympy.__version__},
            "cache_dir": os.environ.get("BERGLAB_CACHE", "")}


def manifest_hash(core):
    return hashlib.sha256(json.dumps(core, sort_keys=True).encode()).hexdigest()


def write_outputs(out_dir, cfg, outcome, wall):
    os.makedirs(out_dir, exist_ok=True)
    core = manifest_core(cfg)
    core["extra"] = _jsonable_tree(outcome.extra)
    digest = manifest_hash(core)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        fh.write(f"# manifest-sha256: {digest}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(outcome.columns)
        for row in outcome.rows:
            w.writerow([_fmt(row.get(c, "")) for c in outcome.columns])
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump({"sha256": digest, "deterministic": core, "runtime": {"wall_time_s": round(wall, 3)}}, fh,
                  indent=2, sort_keys=True)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}" + (f" -- {detail}" if detail else "")
             for name, ok, detail in outcome.checks]
    with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
        fh.write(f"experiment {cfg['kind']} on {cfg['domain']} (manifest {digest[:12]})\n")
        fh.write("\n".join(lines) + "\n")
    return digest, lines


def _jsonable_tree(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable_tree(v) for v in obj]
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    return _jsonable(obj) if isinstance(obj, (float, complex, np.ndarray, np.generic)) else str(obj)


def write_error(out_dir, exc, code):
    os.makedirs(out_dir, exist_ok=True)
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
           "key": getattr(exc, "key", None)}
    with open(os.path.join(out_dir, "error.json"), "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
    return rec


def run(cfg, out_dir=None):
    """Run one configured experiment; returns the exit code."""
    out_dir = cfg["output"] if out_dir is None else out_dir
    t0 = time.perf_counter()
    try:
        with np.errstate(all="ignore"):
            outcome = RUNNERS[cfg["kind"]](cfg)
    except ConfigError as exc:
        write_error(out_dir, exc, EXIT_CONFIG)
        return EXIT_CONFIG
    except (BergmanLabError, FloatingPointError, np.linalg.LinAlgError, ValueError, NotImplementedError) as exc:
        write_error(out_dir, exc, EXIT_NUMERIC)
        return EXIT_NUMERIC
    _, lines = write_outputs(out_dir, cfg, outcome, time.perf_counter() - t0)
    for line in lines:
        print(line)
    return EXIT_PASS if all(ok for _, ok, _ in outcome.checks) else EXIT_CHECK


# ---------------------------------------------------------------------------
# verify-all
# ---------------------------------------------------------------------------

QUICK_SUITE = {
    "kernel_disc": "[experiment]\nkind = kernel-table\ndomain = disc\n[numerics]\nn_points = 20\npoint_scale = 0.7\n",
    "kernel_egg": "[experiment]\nkind = kernel-table\ndomain = egg:2:4\n[numerics]\nn_points = 10\npoint_scale = 0.7\n",
    "metric_egg": "[experiment]\nkind = metric-table\ndomain = egg:2:4\n[numerics]\nn_points = 10\n",
    "distance_disc": "[experiment]\nkind = distance-table\ndomain = disc\n[numerics]\nn_pairs = 5\n",
    "hahnlu_bidisc": "[experiment]\nkind = hahn-lu\ndomain = bidisc\n[numerics]\nn_pairs = 5\n",
    "scale_disc": ("[experiment]\nkind = scale-verify\ndomain = disc\n[geometry]\nboundary_point = 1\n"
                   "deltas = 0.1 0.01 0.001\n[numerics]\nquantities = kernel metric christoffel\n"),
    "fridman_disc": ("[experiment]\nkind = fridman-limit\ndomain = disc\n[geometry]\nboundary_point = 1\n"
                     "deltas = 0.1 0.01\n"),
}

FULL_SUITE = dict(QUICK_SUITE)
FULL_SUITE.update({
    "distance_disc": "[experiment]\nkind = distance-table\ndomain = disc\n[numerics]\nn_pairs = 50\n",
    "hahnlu_disc": "[experiment]\nkind = hahn-lu\ndomain = disc\n[numerics]\nn_pairs = 100\n",
    "hahnlu_bidisc": "[experiment]\nkind = hahn-lu\ndomain = bidisc\n[numerics]\nn_pairs = 100\n",
    "scale_disc": ("[experiment]\nkind = scale-verify\ndomain = disc\n[geometry]\nboundary_point = 1\n"),
    "fridman_ellipsoid": ("[experiment]\nkind = fridman-limit\ndomain = ellipsoid:1,2\n[geometry]\n"
                          "boundary_point = 1, 0\n[numerics]\nsoundness = true\n"),
    "fridman_egg": ("[experiment]\nkind = fridman-limit\ndomain = egg:2:4\n[geometry]\nboundary_point = 1, 0\n"
                    "class = levi_corank_one\napproach = cone\n[numerics]\nsoundness = true\n"),
})

VERIFY_SCHEMA = {"experiment": {"seed", "output", "workers", "suite"}}


def parse_verify_config(text):
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}", key="config") from exc
    vals = {"seed": "0", "output": "berglab-verify", "workers": "1", "suite": "quick"}
    for section in cp.sections():
        if section not in VERIFY_SCHEMA:
            raise ConfigError(f"unknown section [{section}]", key=section)
        for key, v in cp.items(section):
            if key not in VERIFY_SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", key=key)
            vals[key] = v.strip()
    if vals["suite"] not in ("quick", "full"):
        raise ConfigError(f"unknown suite {vals['suite']!r}", key="suite")
    try:
        vals["seed"], vals["workers"] = int(vals["seed"]), int(vals["workers"])
    except ValueError as exc:
        raise ConfigError(str(exc), key="seed") from exc
    return vals


def verify_all(seed=0, output="berglab-verify", workers=1, suite="quick"):
    """Run the built-in check suite; each experiment writes to ``output/<name>``."""
    experiments = QUICK_SUITE if suite == "quick" else FULL_SUITE
    codes = {}
    for name, text in experiments.items():
        text = text.replace("[experiment]\n", f"[experiment]\nseed = {seed}\nworkers = {workers}\n", 1)
        cfg = parse_config(text)
        print(f"== {name}")
        codes[name] = run(cfg, os.path.join(output, name))
    with open(os.path.join(output, "summary.txt"), "w") as fh:
        for name, code in codes.items():
            fh.write(f"{'PASS' if code == 0 else 'FAIL'} {name} (exit {code})\n")
    return max(codes.values()) if codes else EXIT_PASS


def main(argv=None):
    parser = argparse.ArgumentParser(prog="berglab", description="Bergman geometry numerical laboratory")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run a {SUBCOMMANDS[name]} experiment")
        p.add_argument("config", help="INI experiment config")
        p.add_argument("-o", "--output", help="output directory (overrides the config)")
    p = sub.add_parser("verify-all", help="run the built-in check suite")
    p.add_argument("config", nargs="?", help="optional INI with [experiment] seed/output/workers/suite")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--suite", choices=("quick", "full"))
    args = parser.parse_args(argv)

    fallback = args.output or "."
    try:
        if args.command == "verify-all":
            vals = {"seed": 0, "output": "berglab-verify", "workers": 1, "suite": "quick"}
            if args.config:
                try:
                    with open(args.config) as fh:
                        vals = parse_verify_config(fh.read())
                except OSError as exc:
                    raise ConfigError(f"cannot read config: {exc}", key="config") from exc
            if args.seed is not None:
                vals["seed"] = args.seed
            if args.suite:
                vals["suite"] = args.suite
            if args.output:
                vals["output"] = args.output
            fallback = vals["output"]
            return verify_all(vals["seed"], vals["output"], vals["workers"], vals["suite"])
        cfg = load_config(args.config, SUBCOMMANDS[args.command])
        return run(cfg, args.output)
    except ConfigError as exc:
        rec = write_error(fallback, exc, EXIT_CONFIG)
        print(json.dumps(rec, sort_keys=True), file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
