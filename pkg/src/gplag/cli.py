"""Command-line interface: ``gplag <command> [options]``.

Exit codes: 0 success, 1 error (message on stderr), 2 degraded result
(non-converged fit, or more than 10% failed experiment replicates).
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import bayes, experiments, simulate
from .data import center_series, load_csv, save_csv
from .exceptions import GPlagError
from .inference import FitConfig, fit_mle
from .kernels import KernelFamily, PairwiseParams, spec_from_dict, spec_to_dict
from .predict import blup_predict

log = logging.getLogger("gplag")


def _family(args):
    return KernelFamily(args.family, getattr(args, "nu", None), getattr(args, "c", None))


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, default=experiments._json_default)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _add_family(p, default="lexp"):
    p.add_argument("--family", default=default, help="kernel family tag (lexp, lrbf, lmat, ...)")
    p.add_argument("--nu", type=float, default=None, help="Matern smoothness (0.5, 1.5, 2.5)")
    p.add_argument("--c", type=float, default=None, help="Gneiting separability constant")


def cmd_fit(args):
    fam = _family(args)
    data = center_series(load_csv(args.data))
    config = FitConfig(s_bounds=(args.s_lo, args.s_hi), seed=args.seed,
                       multistart_count=args.starts)
    fit = fit_mle(data, fam, config)
    out = spec_to_dict(fam, fit.params)
    out.update(fit.to_json())
    out["labels"] = list(data.labels)
    out["offsets"] = data.offsets.tolist()
    _write_json(out, args.out)
    if not fit.converged:
        print("warning: optimizer did not report convergence", file=sys.stderr)
        return 2
    return 0


def _read_query(path, labels):
    index = {lab: i + 1 for i, lab in enumerate(labels)}
    query = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header[:2] != ["t", "series"]:
            raise GPlagError(f"query header must start with t,series; got {header}")
        for row in reader:
            if not row:
                continue
            lab = row[1].strip()
            sid = index.get(lab)
            if sid is None:
                sid = int(lab)
            query.append((float(row[0]), sid))
    return query


def cmd_predict(args):
    with open(args.fit) as fh:
        fam, params = spec_from_dict(json.load(fh))
    train = center_series(load_csv(args.data))
    query = _read_query(args.query, train.labels) if args.query else [
        (float(t), int(s)) for t, s in zip(train.t, train.series)]
    pred = blup_predict(params, fam, train, query)
    fh = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(["t", "series", "mean", "variance"])
        for t, l, m, v in pred.rows():
            w.writerow([repr(t), train.labels[l - 1], repr(m), repr(v)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_simulate(args):
    fam = _family(args)
    params = PairwiseParams(args.sigma2, args.b, args.a, args.s, args.tau2)
    design = simulate.gen_time_design(args.n, 2, style=args.style, lags=[0.0, args.s],
                                      range=(args.range_lo, args.range_hi), seed=args.seed)
    data = simulate.sample_gplag(fam, params, design, seed=[args.seed, 1])
    save_csv(data, args.out)
    return 0


def cmd_bayes(args):
    fam = _family(args)
    data = center_series(load_csv(args.data))
    priors = bayes.default_priors(data, (args.s_lo, args.s_hi))
    samples = bayes.sample_posterior(data, fam, priors, args.draws, args.burnin, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["a", "b", "s", "sigma2", "tau2"])
        for row in samples.draws:
            w.writerow([repr(float(v)) for v in row])
    summary = {"acceptance_rate": samples.acceptance_rate, "seed": args.seed,
               "parameters": bayes.summarize(samples)}
    _write_json(summary, args.summary)
    return 0


def cmd_benchmark(args):
    spec = experiments.ExperimentSpec("arctan-cluster", seed=args.seed, family=args.family,
                                      overrides={"gamma": args.gamma})
    rows = experiments.arctan_scores(spec.settings())
    fh = sys.stdout if args.out in (None, "-") else open(args.out, "w", newline="")
    try:
        w = csv.writer(fh)
        w.writerow(["pair_id", "method", "score", "lag"])
        for r in rows:
            w.writerow([r["pair_id"], r["method"], repr(float(r["score"])),
                        "" if np.isnan(r["lag"]) else repr(float(r["lag"]))])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def _parse_override(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key.strip(), json.loads(value)
    except json.JSONDecodeError:
        return key.strip(), value


def cmd_experiment(args):
    family = _family(args) if args.family else None
    spec = experiments.ExperimentSpec(args.name, replicates=args.replicates, seed=args.seed,
                                      family=family, overrides=dict(args.set or []),
                                      out_dir=args.out_dir)
    result = experiments.run_experiment(spec)
    csv_path, json_path = experiments.write_outputs(result, args.out_dir)
    print(f"wrote {csv_path} and {json_path}", file=sys.stderr)
    if result.exit_code:
        print(f"{len(result.failures)} replicate(s) failed", file=sys.stderr)
    return result.exit_code


def build_parser():
    parser = argparse.ArgumentParser(prog="gplag", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a CSV dataset")
    p.add_argument("data")
    _add_family(p)
    p.add_argument("--s-lo", type=float, default=-4.0)
    p.add_argument("--s-hi", type=float, default=4.0)
    p.add_argument("--starts", type=int, default=5, help="number of optimizer starts")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predictive mean and variance from a fit")
    p.add_argument("data")
    p.add_argument("--fit", required=True, help="JSON written by the fit command")
    p.add_argument("--query", help="CSV with columns t,series (default: the data points)")
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="draw a two-series dataset from a GPlag kernel")
    _add_family(p)
    for name, default in (("b", 0.3), ("a", 1.0), ("s", 2.0), ("sigma2", 4.0),
                          ("tau2", experiments.TAU2)):
        p.add_argument(f"--{name}", type=float, default=default)
    p.add_argument("--n", type=int, default=100, help="points per series")
    p.add_argument("--style", default=simulate.JITTERED, choices=(simulate.JITTERED, simulate.REGULAR))
    p.add_argument("--range-lo", type=float, default=-50.0)
    p.add_argument("--range-hi", type=float, default=50.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bayes", help="posterior sampling for a two-series dataset")
    p.add_argument("data")
    _add_family(p)
    p.add_argument("--s-lo", type=float, default=-4.0)
    p.add_argument("--s-hi", type=float, default=4.0)
    p.add_argument("--draws", type=int, default=2000)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="draws CSV")
    p.add_argument("--summary", default="-", help="summary JSON")
    p.set_defaults(func=cmd_bayes)

    p = sub.add_parser("benchmark", help="GPlag, TLCC, DTW and soft-DTW scores on the arctan pairs")
    p.add_argument("--family", default="lexp")
    p.add_argument("--gamma", type=float, default=1.0, help="soft-DTW smoothing")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("experiment", help="run a named simulation preset")
    p.add_argument("name", choices=experiments.NAMES)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family", default=None, help="kernel family (default: the preset's)")
    p.add_argument("--nu", type=float, default=None, help="Matern smoothness (0.5, 1.5, 2.5)")
    p.add_argument("--c", type=float, default=None, help="Gneiting separability constant")
    p.add_argument("--set", action="append", type=_parse_override, metavar="KEY=VALUE",
                   help="override a preset setting, e.g. --set n=200 --set a=0.5")
    p.add_argument("--out-dir", default=".")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (GPlagError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
