"""Named simulation presets: recovery, consistency, prediction, arctan-cluster, three-series.

Each preset runs replicate functions seeded by ``(seed, replicate)``, so a
replicate's data do not depend on how many replicates are requested or on
the order they run in.  Results are plain row dictionaries plus a summary.
"""

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines, simulate
from .data import center_series, from_series, train_test_split
from .exceptions import GPlagError, ValidationError
from .inference import FitConfig, default_lag_grid, fit_mle, fit_single_series, triangle_violation
from .kernels import KernelFamily, MultiParams, PairwiseParams, as_family
from .predict import blup_predict, mse, query_points

log = logging.getLogger(__name__)

NAMES = ("recovery", "consistency", "prediction", "arctan-cluster", "three-series")
TAU2 = 0.1

PRESETS = {
    "recovery": dict(family="lexp", replicates=100, n=100, range=(-50.0, 50.0), s_bounds=(0.0, 4.0),
                     params=dict(b=0.3, a=1.0, s=2.0, sigma2=4.0, tau2=TAU2)),
    "consistency": dict(family="lexp", replicates=100, sizes=(20, 50, 100, 200), range=(-50.0, 50.0),
                        s_bounds=(0.0, 4.0), params=dict(b=0.3, a=1.0, s=2.0, sigma2=4.0, tau2=TAU2)),
    "prediction": dict(family="lexp", replicates=100, n=50, range=(-25.0, 25.0), s_bounds=(-1.0, 5.0),
                       fraction=0.5, generator="gplag",
                       params=dict(b=1.0, a=0.3, s=2.0, sigma2=4.0, tau2=TAU2)),
    "arctan-cluster": dict(family="lexp", replicates=1, n=50, range=(-2.0, 2.0), s_bounds=(-1.0, 4.0),
                           ks=(0.01, 1.0, 10.0), shifts=(0.0, 0.5, 1.0), gamma=1.0, clusters=3),
    "three-series": dict(family="lexp", replicates=100, n=50, range=(-25.0, 25.0), s_bounds=(-1.0, 6.0),
                         params=dict(b=0.3, a=1.0, s2=2.0, s3=4.0, sigma2=4.0, tau2=TAU2)),
}


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    replicates: int = None
    seed: int = 0
    family: str = None
    overrides: dict = field(default_factory=dict)
    out_dir: str = None

    def __post_init__(self):
        if self.name not in NAMES:
            raise ValidationError(f"unknown experiment {self.name!r}; expected one of {NAMES}")
        if self.replicates is not None and self.replicates < 1:
            raise ValidationError("replicates must be >= 1")

    def settings(self):
        cfg = json.loads(json.dumps(PRESETS[self.name]))
        params = dict(cfg.get("params", {}))
        for key, value in self.overrides.items():
            if key in params:
                params[key] = float(value)
            else:
                cfg[key] = value
        if params:
            cfg["params"] = params
        if self.replicates is not None:
            cfg["replicates"] = self.replicates
        if self.family is not None:
            cfg["family"] = self.family
        cfg["seed"] = self.seed
        for key in ("range", "s_bounds"):
            cfg[key] = tuple(float(v) for v in cfg[key])
        return cfg


def worker_count():
    try:
        return max(1, int(os.environ.get("GPLAG_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# replicate functions (module level so they can be sent to worker processes)


def _pair_params(p):
    return PairwiseParams(sigma2=p["sigma2"], b=p["b"], a=p["a"], s=p["s"], tau2=p["tau2"])


def recovery_replicate(cfg, rep, n=None):
    n = cfg["n"] if n is None else n
    fam = as_family(cfg["family"])
    p = cfg["params"]
    design = simulate.gen_time_design(n, 2, lags=[0.0, p["s"]], range=cfg["range"],
                                      seed=[cfg["seed"], rep])
    ds = center_series(simulate.sample_gplag(fam, _pair_params(p), design, seed=[cfg["seed"], rep, 1]))
    fit = fit_mle(ds, fam, FitConfig(s_bounds=cfg["s_bounds"], seed=cfg["seed"], replicate=rep))
    est = fit.params
    return {"replicate": rep, "n": n, "a": est.a, "b": est.b, "s": est.s, "sigma2": est.sigma2,
            "tau2": est.tau2, "loglik": fit.loglik, "converged": fit.converged}


def prediction_replicate(cfg, rep):
    fam = as_family(cfg["family"])
    if cfg["generator"] == "linear_t":
        raw = simulate.gen_linear_t_noise(n=cfg.get("n_linear", 101), seed=[cfg["seed"], rep])
    else:
        p = cfg["params"]
        design = simulate.gen_time_design(cfg["n"], 2, lags=[0.0, p["s"]], range=cfg["range"],
                                          seed=[cfg["seed"], rep])
        raw = simulate.sample_gplag(fam, _pair_params(p), design, seed=[cfg["seed"], rep, 1])
    split = train_test_split(raw, cfg["fraction"], seed=[cfg["seed"], rep, 2])
    train = center_series(split.train)
    test = split.test
    config = FitConfig(s_bounds=cfg["s_bounds"], seed=cfg["seed"], replicate=rep)
    fit = fit_mle(train, fam, config)
    gplag_mse = mse(blup_predict(fit, fam, train, query_points(test)), test)
    # single-series GP: each series predicted from its own training points only
    sq = []
    for l in (1, 2):
        tr = train.select_series([l])
        te = test.select_series([l])
        single = fit_single_series(tr, fam, config)
        pred = blup_predict(single, fam, tr, query_points(te))
        sq.append(mse(pred, te) * te.n)
    single_mse = float(sum(sq) / test.n)
    return {"replicate": rep, "gplag_mse": gplag_mse, "single_mse": single_mse,
            "gplag_wins": gplag_mse < single_mse, "a": fit.params.a, "s": fit.params.s,
            "converged": fit.converged}


def three_series_replicate(cfg, rep):
    fam = as_family(cfg["family"])
    p = cfg["params"]
    lags = [0.0, p["s2"], p["s3"]]
    A = np.full((3, 3), p["a"]) - np.diag([p["a"]] * 3)
    truth = MultiParams(p["sigma2"], p["b"], p["tau2"], A, lags)
    design = simulate.gen_time_design(cfg["n"], 3, lags=lags, range=cfg["range"],
                                      seed=[cfg["seed"], rep])
    ds = center_series(simulate.sample_gplag(fam, truth, design, seed=[cfg["seed"], rep, 1]))
    fit = fit_mle(ds, fam, FitConfig(s_bounds=cfg["s_bounds"], seed=cfg["seed"], replicate=rep))
    est = fit.params
    return {"replicate": rep, "a12": est.A[0, 1], "a13": est.A[0, 2], "a23": est.A[1, 2],
            "s2": est.S[1], "s3": est.S[2], "b": est.b, "sigma2": est.sigma2, "tau2": est.tau2,
            "triangle_violation": triangle_violation(est.A), "loglik": fit.loglik,
            "converged": fit.converged}


def _call(job):
    fn, args = job
    try:
        return fn(*args), None
    except (GPlagError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_jobs(jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_call, jobs))
    return [_call(j) for j in jobs]


# ---------------------------------------------------------------------------
# summaries


def quartiles(values):
    v = np.asarray([x for x in values if x is not None and np.isfinite(x)], dtype=float)
    if len(v) == 0:
        return {"median": None, "q25": None, "q75": None, "iqr": None}
    q25, q50, q75 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"median": float(q50), "q25": float(q25), "q75": float(q75), "iqr": float(q75 - q25)}


def _numeric_summary(rows, keys):
    return {k: quartiles([r[k] for r in rows]) for k in keys}


def arctan_scores(cfg):
    """Per-pair dissimilarity scores of the target series against all nine arctan series."""
    fam = as_family(cfg["family"])
    n, rng = cfg["n"], cfg["range"]
    t0, y0 = simulate.gen_arctan(cfg["ks"][0], cfg["shifts"][0], n, rng)
    grid_cfg = FitConfig(s_bounds=cfg["s_bounds"], seed=cfg["seed"])
    rows = []
    pair_id = 0
    for k in cfg["ks"]:
        for s in cfg["shifts"]:
            pair_id += 1
            t, y = simulate.gen_arctan(k, s, n, rng)
            ds = center_series(from_series([t0, t], [y0, y]))
            fit = fit_mle(ds, fam, grid_cfg)
            scan = baselines.tlcc(ds, default_lag_grid(ds, cfg["s_bounds"]))
            dt = baselines.dtw(y0, y)
            soft = baselines.soft_dtw_divergence(y0, y, cfg["gamma"])
            common = {"pair_id": pair_id, "k": k, "shift": s}
            rows.append({**common, "method": "gplag", "score": fit.params.a, "lag": fit.params.s})
            rows.append({**common, "method": "tlcc", "score": scan.best_corr, "lag": scan.best_lag})
            rows.append({**common, "method": "dtw", "score": dt.distance, "lag": math.nan})
            rows.append({**common, "method": "soft_dtw", "score": soft, "lag": math.nan})
    return rows


def cluster_scores(rows, clusters=3, seed=0):
    """ARI and NMI of k-means on each method's scores against the k grouping."""
    out = {}
    methods = list(dict.fromkeys(r["method"] for r in rows))
    for m in methods:
        sub = [r for r in rows if r["method"] == m]
        truth = np.unique([r["k"] for r in sub], return_inverse=True)[1]
        scores = np.array([r["score"] for r in sub], dtype=float)
        k = min(clusters, len(np.unique(scores)))
        labels = baselines.kmeans(scores, k, seed=seed)
        out[m] = {"ari": baselines.ari(labels, truth), "nmi": baselines.nmi(labels, truth)}
    return out


# ---------------------------------------------------------------------------
# driver


@dataclass
class ExperimentResult:
    name: str
    rows: list
    summary: dict
    failures: list

    @property
    def failure_fraction(self):
        total = len(self.rows) + len(self.failures)
        return len(self.failures) / total if total else 0.0

    @property
    def exit_code(self):
        return 2 if self.failure_fraction > 0.10 else 0


def run_experiment(spec, workers=None):
    cfg = spec.settings()
    workers = worker_count() if workers is None else workers
    reps = range(cfg["replicates"])
    name = spec.name
    as_family(cfg["family"])

    if name == "arctan-cluster":
        rows = arctan_scores(cfg)
        summary = {"clustering": cluster_scores(rows, cfg["clusters"], cfg["seed"])}
        return ExperimentResult(name, rows, _finish(summary, cfg, rows, []), [])

    if name == "recovery":
        jobs = [(recovery_replicate, (cfg, r)) for r in reps]
    elif name == "consistency":
        jobs = [(recovery_replicate, (cfg, r, n)) for n in cfg["sizes"] for r in reps]
    elif name == "prediction":
        jobs = [(prediction_replicate, (cfg, r)) for r in reps]
    else:
        jobs = [(three_series_replicate, (cfg, r)) for r in reps]

    rows, failures = [], []
    for (fn, args), (row, err) in zip(jobs, _run_jobs(jobs, workers)):
        if err is None:
            rows.append(row)
        else:
            log.warning("replicate %s failed: %s", args[1:], err)
            failures.append({"replicate": args[1], "error": err,
                             **({"n": args[2]} if len(args) > 2 else {})})

    if name == "recovery":
        summary = _numeric_summary(rows, ("a", "b", "s", "sigma2", "tau2"))
    elif name == "consistency":
        summary = {str(n): _numeric_summary([r for r in rows if r["n"] == n], ("a", "s"))
                   for n in cfg["sizes"]}
    elif name == "prediction":
        summary = _numeric_summary(rows, ("gplag_mse", "single_mse", "a", "s"))
        summary["win_fraction"] = (float(np.mean([r["gplag_wins"] for r in rows]))
                                   if rows else None)
    else:
        summary = _numeric_summary(rows, ("a12", "a13", "a23", "s2", "s3"))
        summary["max_triangle_violation"] = (float(max(r["triangle_violation"] for r in rows))
                                             if rows else None)
    return ExperimentResult(name, rows, _finish(summary, cfg, rows, failures), failures)


def _finish(summary, cfg, rows, failures):
    return {"settings": cfg, "num_rows": len(rows), "num_failures": len(failures),
            "failures": failures, **summary}


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_outputs(result, out_dir):
    """``<name>_replicates.csv`` and ``<name>_summary.json`` in ``out_dir``."""
    os.makedirs(out_dir, exist_ok=True)
    stem = result.name.replace("-", "_")
    csv_path = os.path.join(out_dir, f"{stem}_replicates.csv")
    json_path = os.path.join(out_dir, f"{stem}_summary.json")
    keys = list(result.rows[0]) if result.rows else ["replicate"]
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for r in result.rows:
            w.writerow([_fmt(r[k]) for k in keys])
    with open(json_path, "w") as fh:
        json.dump(result.summary, fh, indent=2, default=_json_default)
    return csv_path, json_path


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, KernelFamily):
        return str(o)
    raise TypeError(f"not serializable: {type(o)}")
