"""Batch command line: data generation, inference, and the experiment runs.

Exit codes: 0 success, 1 usage or input error, 2 numerical or capacity error.
"""

import argparse
import sys

import numpy as np

from . import experiments as ex
from .asymptotics import PopulationModel, decay_exponent
from .dags import DagStructure, all_pairs, sample_uniform_dag
from .detection import DetectorConfig, absence_scores, detect_posterior
from .errors import (CalibrationError, CapacityError, DomainError, InvalidInputError,
                     NumericalError, UndefinedRateError)
from .io import emit, read_dataset, render_table, write_dataset_csv, write_semd
from .mcmc import ChainConfig, run_chain
from .posterior import PriorConfig, posterior_table
from .rng import RNG_ALGORITHM, make_rng
from .sem import Dataset, WeightedSem, random_weights, reference_truths, sample_dataset


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_globals(p, suppress):
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--seed", type=int, **({"default": 0} if not suppress else kw),
                   help="random seed (default 0)")
    p.add_argument("--sigma", type=float, **({"default": 1.0} if not suppress else kw),
                   help="noise standard deviation (default 1)")
    p.add_argument("--sigma-w", type=float, **({"default": 1.0} if not suppress else kw),
                   help="weight prior standard deviation (default 1)")
    p.add_argument("--out", **({"default": None} if not suppress else kw),
                   help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"),
                   **({"default": "csv"} if not suppress else kw))
    p.add_argument("--no-timestamp", action="store_true",
                   **({"default": False} if not suppress else kw),
                   help="omit the generation timestamp so reruns are byte-identical")


def build_parser():
    p = _Parser(prog="dagpost", description=__doc__.splitlines()[0])
    _add_globals(p, suppress=False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        _add_globals(sp, suppress=True)
        return sp

    g = add("generate", "sample a dataset from a linear Gaussian SEM")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--truth", default="a1",
                   help="a1, a2, random, or a row-major 0/1 adjacency string (unit weights)")
    g.add_argument("--d", type=int, default=3, help="dimension for --truth random")
    g.add_argument("--semd", action="store_true", help="write the binary SEMD format")

    po = add("posterior", "exact posterior table for a dataset")
    po.add_argument("--data", required=True)

    mc = add("mcmc", "run the structure sampler on a dataset")
    mc.add_argument("--data", required=True)
    mc.add_argument("--iterations", type=int, default=100_000)
    mc.add_argument("--burn-in", type=int, default=None)
    mc.add_argument("--thin", type=int, default=1)
    mc.add_argument("--trace-out", default=None,
                    help="also write every recorded state as an adjacency string")

    de = add("detect", "estimate the skeleton of a dataset")
    de.add_argument("--data", required=True)
    de.add_argument("--mode", choices=("exact_posterior", "mcmc"), default="exact_posterior")
    th = de.add_mutually_exclusive_group()
    th.add_argument("--tau", type=float, default=None)
    th.add_argument("--gamma-prime", type=float, default=None)
    de.add_argument("--iterations", type=int, default=100_000)

    eb = add("exp-binary", "posterior rate under the unit-weight model, all truths")
    eb.add_argument("--d", type=int, default=3)
    eb.add_argument("--n-max", type=int, default=10_000)

    em = add("exp-maximal", "posterior rate for the maximal reference truth")
    em.add_argument("--n-max", type=int, default=50_000)

    en = add("exp-nonmaximal", "posterior rate for the non-maximal reference truth")
    en.add_argument("--n-max", type=int, default=15_000_000)
    en.add_argument("--keep-samples", action="store_true",
                    help="retain all samples in memory (otherwise O(d^2) streaming)")

    ed = add("exp-detect", "edge-detection benchmark and ROC sweep")
    ed.add_argument("--d", type=int, default=4)
    ed.add_argument("--n", type=int, default=10)
    ed.add_argument("--replicates", type=int, default=200)
    ed.add_argument("--iterations", type=int, default=100_000)
    ed.add_argument("--alpha", type=float, default=0.1)
    ed.add_argument("--methods", default=",".join(ex.METHODS),
                    help="comma-separated subset of " + ",".join(ex.METHODS))
    return p


def _prior(a):
    return PriorConfig(a.sigma, a.sigma_w)


def _config(a, **extra):
    cfg = {"command": a.command, "seed": a.seed, "sigma": a.sigma, "sigma_w": a.sigma_w,
           "rng": RNG_ALGORITHM, "node_indexing": 0}
    cfg.update(extra)
    return cfg


def _out(a, columns, rows, config):
    emit(render_table(columns, rows, config, a.format, not a.no_timestamp), a.out)


def _load(a):
    return Dataset(read_dataset(a.data))


def _truth(a, rng):
    a1, a2 = reference_truths()
    if a.truth == "a1":
        return WeightedSem(a1.structure, a1.weights, a.sigma)
    if a.truth == "a2":
        return WeightedSem(a2.structure, a2.weights, a.sigma)
    if a.truth == "random":
        s = sample_uniform_dag(a.d, rng)
        return WeightedSem(s, random_weights(s, rng), a.sigma)
    return WeightedSem.binary(DagStructure.from_string(a.truth), a.sigma)


def cmd_generate(a):
    rng = make_rng(a.seed)
    sem = _truth(a, rng)
    X = sample_dataset(sem, a.n, rng).samples
    if a.out is None:
        raise InvalidInputError("generate needs --out")
    (write_semd if a.semd else write_dataset_csv)(a.out, X)


def cmd_posterior(a):
    data = _load(a)
    tab = posterior_table(data, _prior(a))
    rows = [(m.to_string(), lu, p) for m, lu, p in zip(tab.models, tab.log_unnorm, tab.probs)]
    _out(a, ["model", "log_unnorm", "prob"], rows, _config(a, n=data.n, d=data.d))


def _chain_cfg(a, iterations, burn_in=None, thin=1):
    return ChainConfig(iterations, burn_in, thin, a.seed)


def cmd_mcmc(a):
    data = _load(a)
    cfg = _chain_cfg(a, a.iterations, a.burn_in, a.thin)
    trace = run_chain(data, _prior(a), cfg)
    rows = [(p.i, p.j, trace.absence_freq[p.i, p.j]) for p in all_pairs(data.d)]
    _out(a, ["pair_i", "pair_j", "absence_freq"], rows,
         _config(a, n=data.n, iterations=cfg.iterations, burn_in=cfg.burn_in, thin=cfg.thin,
                 acceptance_rate=trace.acceptance_rate))
    if a.trace_out:
        with open(a.trace_out, "w") as fh:
            fh.write("model,log_score\n")
            for s, v in zip(trace.visited, trace.log_scores):
                fh.write(f"{s.to_string()},{v!r}\n")


def cmd_detect(a):
    data = _load(a)
    if a.gamma_prime is not None:
        cfg = DetectorConfig.from_gamma(a.gamma_prime, mode=a.mode)
    else:
        cfg = DetectorConfig(threshold=0.5 if a.tau is None else a.tau, mode=a.mode)
    if a.mode == "exact_posterior":
        source = posterior_table(data, _prior(a))
    else:
        source = run_chain(data, _prior(a), _chain_cfg(a, a.iterations))
    est = detect_posterior(source, cfg)
    scores = absence_scores(source)
    rows = [(p.i, p.j, scores[p.i, p.j], int(est.chi_hat[p.i, p.j])) for p in all_pairs(data.d)]
    _out(a, ["pair_i", "pair_j", "absence_score", "chi_hat"], rows,
         _config(a, n=data.n, mode=a.mode, tau=cfg.threshold, estimate=est.to_string()))


def _curve_rows(curve, label):
    diff = curve.diff if curve.diff is not None else [float("nan")] * len(curve.checkpoints)
    return [(label, int(n), p, lo, dg, df) for n, p, lo, dg, df in
            zip(curve.checkpoints, curve.posterior_true, curve.log_one_minus,
                curve.diagnostic, diff)]


_CURVE_COLS = ["truth", "n", "posterior_true", "log_one_minus", "diagnostic", "diff"]


def cmd_exp_binary(a):
    curves, rate = ex.run_binary_convergence(a.d, a.n_max, a.seed, sigma=a.sigma)
    rows = [r for c in curves for r in _curve_rows(c, c.truth.to_string())]
    _out(a, _CURVE_COLS, rows,
         _config(a, d=a.d, n_max=a.n_max, schedule="geometric ratio 1.3 plus endpoints",
                 exponent=rate.exponent,
                 diagnostic="prefix max of diff_n over checkpoints / sqrt(n log log n)"))


def cmd_exp_maximal(a):
    sem = reference_truths()[0]
    sem = WeightedSem(sem.structure, sem.weights, a.sigma)
    curve, rate = ex.run_maximal_convergence(sem, a.n_max, a.seed, _prior(a))
    res = decay_exponent(PopulationModel(sem))
    _out(a, _CURVE_COLS, _curve_rows(curve, sem.structure.to_string()),
         _config(a, n_max=a.n_max, schedule="geometric ratio 1.3 plus endpoints",
                 exponent=rate.exponent, argmin_model=res.argmin.to_string(),
                 diagnostic="prefix max of diff_n over checkpoints / sqrt(n log log n)"))


def cmd_exp_nonmaximal(a):
    sem = reference_truths()[1]
    sem = WeightedSem(sem.structure, sem.weights, a.sigma)
    curve = ex.run_nonmaximal_convergence(sem, a.n_max, a.seed, _prior(a), keep=a.keep_samples)
    _out(a, _CURVE_COLS, _curve_rows(curve, sem.structure.to_string()),
         _config(a, n_max=a.n_max, schedule="geometric ratio 1.3 plus endpoints",
                 diagnostic="-(2 / log n) log(1 - posterior_true)"))


def cmd_exp_detect(a):
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    rep = ex.run_detection_benchmark(a.d, a.n, a.replicates, methods, a.seed, _prior(a),
                                     a.iterations, a.alpha)
    rows = []
    for m, s in rep.methods.items():
        for t, ep, em in zip(s.roc.tau, s.roc.eps_plus, s.roc.eps_minus):
            rows.append((m, t, ep, em))
    calibrated = {m: {"tau": s.tau, "eps_plus": s.eps_plus, "eps_minus": s.eps_minus}
                  for m, s in rep.methods.items()}
    _out(a, ["method", "gamma_or_tau", "eps_plus", "eps_minus"], rows,
         _config(a, d=a.d, n=a.n, replicates=a.replicates, iterations=a.iterations,
                 alpha=a.alpha, threshold_kind="tau", calibrated=calibrated))


COMMANDS = {
    "generate": cmd_generate, "posterior": cmd_posterior, "mcmc": cmd_mcmc,
    "detect": cmd_detect, "exp-binary": cmd_exp_binary, "exp-maximal": cmd_exp_maximal,
    "exp-nonmaximal": cmd_exp_nonmaximal, "exp-detect": cmd_exp_detect,
}


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    if not argv:
        parser.print_help(sys.stderr)
        return 1
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            parser.print_help(sys.stderr)
            return 1
        COMMANDS[a.command](a)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (InvalidInputError, DomainError, FileNotFoundError) as exc:
        print(f"dagpost: error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, CapacityError, UndefinedRateError, CalibrationError) as exc:
        print(f"dagpost: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
