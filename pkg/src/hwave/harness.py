"""Sweep orchestration, persistence, and power-law fitting.

A sweep is described by a manifest (experiment kind plus parameter grids),
expands into independent points, and persists one record file per point under
a directory keyed by the manifest hash.  Records are written atomically
(tmp + rename), so an interrupted sweep resumes by skipping the points whose
records already exist.  Per-point failures are recorded, never raised.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import analysis
from .errors import HwaveError, ValidationError

KINDS = ("linear-decay", "lifespan", "phase-diagram", "gn", "blowup-functional")


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


@dataclass
class SweepManifest:
    kind: str
    params: dict
    seed: int = 0
    out_dir: str = "hwave-out"
    max_minutes_per_point: float = 30.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown experiment kind {self.kind!r}; choose from {KINDS}")
        if self.seed < 0:
            raise ValidationError("seed must be a nonnegative integer")
        if self.max_minutes_per_point <= 0:
            raise ValidationError("per-point time limit must be positive")
        _validate_params(self.kind, self.params)

    def manifest_hash(self) -> str:
        payload = {"kind": self.kind, "params": self.params, "seed": self.seed}
        return hashlib.sha256(canonical_json(payload).encode()).hexdigest()[:16]

    def points(self) -> list[dict]:
        return _expand_points(self.kind, self.params)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepManifest":
        known = {k: d[k] for k in ("kind", "params", "seed", "out_dir",
                                   "max_minutes_per_point") if k in d}
        extra = set(d) - set(known)
        if "kind" not in known or "params" not in known:
            raise ValidationError("manifest needs at least 'kind' and 'params'")
        if extra:
            raise ValidationError(f"unknown manifest keys: {sorted(extra)}")
        return cls(**known)


def _require(params, *names):
    missing = [x for x in names if x not in params]
    if missing:
        raise ValidationError(f"missing required parameters: {missing}")


def _validate_params(kind: str, params: dict):
    if not isinstance(params, dict):
        raise ValidationError("params must be a mapping")
    if kind == "linear-decay":
        _require(params, "s_list", "gamma_list")
        if not params["s_list"] or not params["gamma_list"]:
            raise ValidationError("parameter grids must be non-empty")
    elif kind == "lifespan":
        _require(params, "Q", "gamma", "p", "eps_list")
        eps = params["eps_list"]
        if not eps:
            raise ValidationError("eps_list must be non-empty")
        if any(e <= 0 for e in eps) or any(a <= b for a, b in zip(eps, eps[1:])):
            raise ValidationError("eps_list must be positive and strictly decreasing")
        Q, gamma, p = params["Q"], params["gamma"], params["p"]
        if not 1 < p < analysis.critical_exponent(Q, gamma):
            raise ValidationError(
                f"p must lie in (1, p_crit = {analysis.critical_exponent(Q, gamma):.4f})"
            )
    elif kind == "phase-diagram":
        _require(params, "Q", "gamma_list", "p_list", "eps")
        if not params["gamma_list"] or not params["p_list"]:
            raise ValidationError("parameter grids must be non-empty")
    elif kind == "gn":
        _require(params, "q", "s")
    elif kind == "blowup-functional":
        _require(params, "Q", "gamma", "R_list")
        if not params["R_list"]:
            raise ValidationError("R_list must be non-empty")


def _expand_points(kind: str, params: dict) -> list[dict]:
    pts = []
    if kind == "linear-decay":
        for s in params["s_list"]:
            for g in params["gamma_list"]:
                pts.append({"kind": kind, "s": s, "gamma": g,
                            "n": params.get("n", 1)})
    elif kind == "lifespan":
        for e in params["eps_list"]:
            pts.append({"kind": kind, "Q": params["Q"], "gamma": params["gamma"],
                        "p": params["p"], "eps": e, "C0": params.get("C0", 1.0),
                        "s": params.get("s", 1.0)})
    elif kind == "phase-diagram":
        for g in params["gamma_list"]:
            for p in params["p_list"]:
                pts.append({"kind": kind, "Q": params["Q"], "gamma": g, "p": p,
                            "eps": params["eps"],
                            "horizon": params.get("horizon", 40.0)})
    elif kind == "gn":
        pts.append({"kind": kind, "q": params["q"], "s": params["s"],
                    "n": params.get("n", 1), "samples": params.get("samples", 50)})
    elif kind == "blowup-functional":
        for R in params["R_list"]:
            pts.append({"kind": kind, "Q": params["Q"], "gamma": params["gamma"],
                        "R": R, "C0": params.get("C0", 1.0)})
    return pts


def point_key(point: dict) -> str:
    return hashlib.sha256(canonical_json(point).encode()).hexdigest()[:16]


@dataclass
class ExperimentRecord:
    manifest_hash: str
    point: dict
    outputs: dict
    refinement: dict
    status: str
    error: str | None = None
    runtime_s: float = 0.0
    created_at: str = ""

    def payload(self) -> dict:
        return {
            "manifest_hash": self.manifest_hash,
            "point": self.point,
            "outputs": self.outputs,
            "refinement": self.refinement,
            "status": self.status,
            "error": self.error,
            "runtime_s": self.runtime_s,
            "created_at": self.created_at,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "ExperimentRecord":
        return cls(**d)


def atomic_write_json(path: str, payload: dict):
    d = os.path.dirname(path)
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def record_dir(manifest: SweepManifest) -> str:
    return os.path.join(manifest.out_dir, manifest.manifest_hash())


def load_records(manifest: SweepManifest) -> dict[str, ExperimentRecord]:
    d = record_dir(manifest)
    out = {}
    if not os.path.isdir(d):
        return out
    for name in sorted(os.listdir(d)):
        if not name.endswith(".json") or name == "summary.json":
            continue
        with open(os.path.join(d, name), encoding="utf-8") as fh:
            rec = ExperimentRecord.from_payload(json.load(fh))
        out[point_key(rec.point)] = rec
    return out


def run_sweep(manifest: SweepManifest, workers: int = 1, rng_seed=None,
              executor=None) -> list[ExperimentRecord]:
    """Execute all missing points, persisting records incrementally.

    Completed points (record file already present with status ok) are
    skipped, which makes an interrupted sweep resumable.  Failures never
    abort the sweep; they become records with status "failed".
    """
    existing = load_records(manifest)
    points = manifest.points()
    todo = [pt for pt in points
            if existing.get(point_key(pt), None) is None
            or existing[point_key(pt)].status != "ok"]
    runner = executor if executor is not None else _execute_point
    seed = manifest.seed if rng_seed is None else rng_seed

    def do_point(pt):
        t0 = time.time()
        try:
            outputs, refinement = runner(pt, seed)
            rec = ExperimentRecord(manifest.manifest_hash(), pt, outputs,
                                   refinement, "ok", None, time.time() - t0,
                                   time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
        except Exception as exc:           # per-point failures are recorded, not raised
            rec = ExperimentRecord(manifest.manifest_hash(), pt, {}, {},
                                   "failed", f"{type(exc).__name__}: {exc}",
                                   time.time() - t0,
                                   time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
        atomic_write_json(os.path.join(record_dir(manifest), point_key(pt) + ".json"),
                          rec.payload())
        return rec

    if workers > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(do_point, todo))
    else:
        for pt in todo:
            do_point(pt)
    final = load_records(manifest)
    return [final[point_key(pt)] for pt in points if point_key(pt) in final]


# ---------------------------------------------------------------------------
# Point executors


def _execute_point(point: dict, seed: int):
    kind = point["kind"]
    if kind == "linear-decay":
        return _point_linear_decay(point)
    if kind == "lifespan":
        return _point_lifespan(point)
    if kind == "phase-diagram":
        return _point_phase_cell(point)
    if kind == "gn":
        return _point_gn(point, seed)
    if kind == "blowup-functional":
        return _point_blowup_functional(point)
    raise ValidationError(f"unknown point kind {kind!r}")


def _point_linear_decay(point: dict):
    from .propagator import decay_experiment

    s, gamma, n = point["s"], point["gamma"], point.get("n", 1)
    res = decay_experiment(n, s, gamma, strict=False)
    theory = -(s + gamma) / 2.0
    out = {"slope": res.slope, "intercept": res.intercept, "theory": theory,
           "deviation": res.slope - theory, "max_residual": res.max_residual,
           "fit_window": list(res.fit_window)}
    return out, {"refinement_shift": res.refinement_shift,
                 "trusted": res.refinement_shift <= 0.02}


# tuned step-control constants shared by the nonlinear experiment paths
_RUN_OPTS = dict(dt0=0.15, dt_growth=0.15, dt_policy="rate")


def _lifespan_runner(point: dict, plan, data_field, t_max: float):
    from .nonlinear import run_nonlinear
    from .propagator import CauchyData

    def run(dt_scale: float):
        u0 = data_field.with_coeffs(data_field.coeffs * point["eps"])
        data = CauchyData(u0, u0.copy(), eps=point["eps"])
        opts = dict(_RUN_OPTS)
        opts["dt0"] *= dt_scale
        return run_nonlinear(data, p=point["p"], gamma=point["gamma"],
                             s=point.get("s", 1.0), t_max=t_max, plan=plan, **opts)

    return run


def _point_lifespan(point: dict, t_hint: float | None = None,
                    certify_dt: bool = False):
    from .nonlinear import certified_lifespan, make_run_plan
    from .sobolev import DataProfileSpec, profile_spectral_field

    Q, gamma = point["Q"], point["gamma"]
    n = (Q - 2) // 2
    spec = DataProfileSpec(C0=point.get("C0", 1.0), Q=Q, gamma=gamma)
    hint = t_hint if t_hint is not None else point.get("t_hint", 60.0)
    plan = make_run_plan(n, t_horizon=hint)
    F = profile_spectral_field(spec, plan.basis, plan.grid)
    run = _lifespan_runner(point, plan, F, t_max=1.6 * hint)
    if certify_dt:
        T, diag = certified_lifespan(run)
    else:
        from .nonlinear import detect_blowup
        rec = run(1.0)
        T = detect_blowup(rec)
        diag = {"lifespan": T, "certified": None, "dt_shift": None,
                "threshold_shift": None}
        if T is not None:
            T_hi = detect_blowup(rec, 10.0 * rec.threshold_factor)
            if T_hi is not None:
                diag["threshold_shift"] = abs(T_hi - T) / T
                diag["certified"] = diag["threshold_shift"] <= 0.05
    out = {"lifespan": T, "blowup": T is not None, "t_horizon": 1.6 * hint}
    return out, diag


def fit_power_law(pairs):
    """Least-squares exponent of T ~ eps^a from (eps, T) pairs, with stderr."""
    pairs = [(float(e), float(T)) for e, T in pairs]
    if len(pairs) < 4:
        raise ValidationError("need at least 4 points for a power-law fit")
    eps = np.array([e for e, _ in pairs])
    T = np.array([t for _, t in pairs])
    if np.any(eps <= 0) or np.any(T <= 0):
        raise ValidationError("power-law fit needs positive values")
    if eps.max() / eps.min() < 2.0:
        raise ValidationError("eps spread below factor 2; fit would be degenerate")
    x, y = np.log(eps), np.log(T)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    slope = float(coef[0])
    dof = len(pairs) - 2
    if dof > 0 and res.size:
        sigma2 = float(res[0]) / dof
        sxx = float(np.sum((x - x.mean()) ** 2))
        stderr = math.sqrt(sigma2 / sxx)
    else:
        stderr = 0.0
    return slope, stderr


def lifespan_experiment(Q, gamma, p, eps_list, C0=1.0, s=1.0, t_hint0=60.0,
                        certify_extremes=True, progress=None):
    """Blow-up lifespan vs data size: runs, certifies, fits, compares to theory.

    Runs the solver at each eps (descending) with slow-decay profile data,
    sizing each run's horizon from the previous lifespan and the theoretical
    scaling; collects certified lifespans; fits the power law and reports the
    fitted exponent against the closed-form one.  Any non-blow-up point marks
    the sweep inconclusive (horizon too short or eps too small).
    """
    if not 1 < p < analysis.critical_exponent(Q, gamma):
        raise ValidationError("p must lie strictly between 1 and the critical exponent")
    theory = analysis.lifespan_exponent(Q, gamma, p)
    sharp_ok = p >= 1 + 2 * gamma / Q
    eps_list = list(eps_list)
    results = []
    t_hint = t_hint0
    for i, eps in enumerate(eps_list):
        point = {"kind": "lifespan", "Q": Q, "gamma": gamma, "p": p, "eps": eps,
                 "C0": C0, "s": s}
        certify = certify_extremes and (i == 0 or i == len(eps_list) - 1)
        out, diag = _point_lifespan(point, t_hint=t_hint, certify_dt=certify)
        results.append({"point": point, "outputs": out, "diag": diag})
        if progress:
            progress(point, out, diag)
        T = out["lifespan"]
        if T is None:
            return {"status": "inconclusive", "theory_exponent": theory,
                    "sharpness_admissible": sharp_ok, "results": results,
                    "reason": f"no blow-up at eps={eps} within the horizon"}
        nxt = eps_list[i + 1] if i + 1 < len(eps_list) else None
        if nxt is not None:
            t_hint = max(1.3 * T * (nxt / eps) ** theory, 1.2 * T)
    fitted, stderr = fit_power_law([(r["point"]["eps"], r["outputs"]["lifespan"])
                                    for r in results])
    return {
        "status": "ok",
        "fitted_exponent": fitted,
        "stderr": stderr,
        "theory_exponent": theory,
        "relative_deviation": abs(fitted - theory) / abs(theory),
        "sharpness_admissible": sharp_ok,
        "results": results,
    }


def _point_phase_cell(point: dict):
    from .nonlinear import make_run_plan, profile_cauchy_data, run_nonlinear
    from .sobolev import DataProfileSpec

    Q, gamma, p = point["Q"], point["gamma"], point["p"]
    n = (Q - 2) // 2
    horizon = point.get("horizon", 40.0)
    p_crit = analysis.critical_exponent(Q, gamma)
    spec = DataProfileSpec(C0=1.0, Q=Q, gamma=gamma)
    plan = make_run_plan(n, t_horizon=horizon, k_max=16, per_sign=41)
    data = profile_cauchy_data(spec, plan, eps=point["eps"])
    rec = run_nonlinear(data, p=p, gamma=gamma, s=1.0, t_max=horizon, plan=plan,
                        **_RUN_OPTS)
    if rec.blowup_flag:
        verdict = "growing"
    else:
        l2 = rec.l2_norms
        tail = l2[rec.times >= 0.5 * horizon]
        if tail.size and tail[-1] < 0.9 * l2[0] and tail[-1] <= 1.05 * tail.min():
            verdict = "decaying"
        elif tail.size and l2[-1] > 3.0 * l2[0]:
            verdict = "growing"
        else:
            verdict = "inconclusive"
    out = {"class": verdict, "p_crit": p_crit, "lower_curve": 1 + 2 * gamma / Q,
           "final_l2_ratio": float(rec.l2_norms[-1] / rec.l2_norms[0]),
           "lifespan": rec.lifespan_estimate}
    return out, {"horizon": horizon}


def _point_gn(point: dict, seed: int):
    from .analysis import gn_ratio
    from .fourier import PhysicalField, standard_setup

    n, q, s = point.get("n", 1), point["q"], point["s"]
    samples = point.get("samples", 50)
    basis, grid, r_nodes, tau_nodes = standard_setup(n, "default")
    rng = np.random.default_rng(seed)

    def family(res_scale=1.0):
        r = np.linspace(r_nodes[0], r_nodes[-1], int(r_nodes.size * res_scale) // 2 * 2 + 1)
        t = np.linspace(tau_nodes[0], tau_nodes[-1], int(tau_nodes.size * res_scale) // 2 * 2 + 1)
        R, T = np.meshgrid(r, t, indexing="ij")
        out = []
        for _ in range(samples):
            a = rng.uniform(0.6, 1.6)
            lam0 = rng.uniform(1.5, 3.0)
            sig = rng.uniform(1.0, 1.6)
            mix = rng.uniform(0.0, 0.5)
            vals = np.exp(-a * R**2 / 2 - T**2 / (2 * sig**2)) * (
                np.cos(lam0 * T) + mix * np.sin(2 * lam0 * T) * R**2 * np.exp(-R**2 / 4))
            out.append(PhysicalField(r, t, vals, n=n))
        return out

    rng = np.random.default_rng(seed)
    ratios = [gn_ratio(f, q, s, basis, grid) for f in family()]
    rng = np.random.default_rng(seed)
    ratios_ref = [gn_ratio(f, q, s, basis, grid) for f in family(1.5)]
    mx, mx_ref = max(ratios), max(ratios_ref)
    out = {"max_ratio": mx, "mean_ratio": float(np.mean(ratios)), "samples": samples}
    return out, {"refined_max_ratio": mx_ref, "drift": abs(mx_ref - mx) / mx}


def _point_blowup_functional(point: dict):
    from .analysis import BumpSpec, data_lower_bound_check
    from .sobolev import DataProfileSpec

    prof = DataProfileSpec(C0=point.get("C0", 1.0), Q=point["Q"],
                           gamma=point["gamma"])
    spec = BumpSpec(R=point["R"])
    integral, bound = data_lower_bound_check(prof, spec)
    out = {"integral": integral, "bound": bound, "margin": integral / bound,
           "holds": integral >= bound}
    return out, {}


# ---------------------------------------------------------------------------
# Reporting


def summary_schema() -> dict:
    import importlib.resources as res

    with res.files("hwave").joinpath("schemas/summary.schema.json").open() as fh:
        return json.load(fh)


def emit_report(records: list[ExperimentRecord], out_dir: str, kind: str | None = None):
    """Write CSV series, a JSON summary, and plot-ready files; returns paths.

    The JSON summary validates against the packaged schema; theory columns
    come exclusively from the closed-form calculators.
    """
    os.makedirs(out_dir, exist_ok=True)
    paths = {}
    csv_path = os.path.join(out_dir, "records.csv")
    cols = sorted({k for r in records for k in r.outputs})
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("status,point," + ",".join(cols) + "\n")
        for r in records:
            vals = [json.dumps(r.outputs.get(c, "")) for c in cols]
            fh.write(f"{r.status},{canonical_json(r.point).replace(',', ';')},"
                     + ",".join(vals) + "\n")
    paths["csv"] = csv_path
    summary = {
        "kind": kind or (records[0].point.get("kind") if records else "empty"),
        "n_points": len(records),
        "ok": sum(r.status == "ok" for r in records),
        "failed": sum(r.status != "ok" for r in records),
        "records": [r.payload() for r in records],
    }
    try:
        import jsonschema

        jsonschema.validate(summary, summary_schema())
    except ImportError:
        pass
    sum_path = os.path.join(out_dir, "summary.json")
    atomic_write_json(sum_path, summary)
    paths["summary"] = sum_path
    plot_path = os.path.join(out_dir, "plotdata.csv")
    with open(plot_path, "w", encoding="utf-8") as fh:
        fh.write("index,status,key_metric\n")
        for i, r in enumerate(records):
            metric = ""
            for probe in ("slope", "lifespan", "max_ratio", "margin", "class"):
                if probe in r.outputs:
                    metric = r.outputs[probe]
                    break
            fh.write(f"{i},{r.status},{json.dumps(metric)}\n")
    paths["plotdata"] = plot_path
    return paths
