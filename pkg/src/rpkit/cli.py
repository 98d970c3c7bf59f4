"""Command-line entry point.

Every subcommand writes one JSON report to stdout and nothing else; human
notes go to stderr. Exit codes: 0 ok, 2 usage/validation, 3 file I/O,
4 numerical failure.
"""
import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import ann, completion, io, privacy, sensing, transform
from .core import RngStream
from .errors import BudgetExceededError, ConvergenceError, DimensionError, MatrixFileError

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# JSON with 17 significant digits

def _encode(obj):
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return io.format_float(x) if math.isfinite(x) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps_report(report):
    return _encode(report)


# ---------------------------------------------------------------------------
# argument types

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {v}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return v


def _open_unit(text):
    v = _positive_float(text)
    if not v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _budget_list(text):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("budgets must be positive integers")
    return vals


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_seed():
    raw = os.environ.get("RPKIT_SEED")
    if raw is None or raw == "":
        return 0
    try:
        return _seed(raw)
    except argparse.ArgumentTypeError as exc:
        raise UsageError(f"environment RPKIT_SEED: {exc}") from None


# ---------------------------------------------------------------------------
# handlers; each returns a dict of result fields

def _require_flags(args, *names):
    for name in names:
        if getattr(args, name) is None:
            raise UsageError(f"--{name.replace('_', '-')} is required")


def cmd_jl_dim(args):
    cfg = transform.JlConfig(args.c)
    k = transform.jl_min_dimension(args.n, args.eps, cfg)
    return {"k": k, "failure_bound": transform.failure_bound(args.eps, k, cfg)}


def cmd_project(args):
    data = io.read_matrix(args.input)
    spec = transform.ProjectionSpec(args.kind, data.shape[1], args.k, args.seed, args.scaling)
    out = transform.project(data, transform.sample_projection(spec))
    result = {"rows": data.shape[0], "input_dim": spec.input_dim, "output_dim": spec.output_dim,
              "reducing": spec.reducing}
    if args.output:
        io.write_matrix(args.output, out, args.format)
    else:
        result["projected"] = out
    return result


def cmd_audit(args):
    original = io.read_matrix(args.original)
    projected = io.read_matrix(args.projected)
    return transform.distortion_audit(original, projected, args.eps).to_dict()


def cmd_ann_build(args):
    data = io.read_matrix(args.data)
    forest = ann.build_forest(data, args.trees, args.leaf_size, args.seed, args.threads)
    ann.save_forest(args.output, forest)
    return {"rows": data.shape[0], "dim": data.shape[1],
            "nodes_per_tree": [t.n_nodes for t in forest.trees]}


def _query_results(forest, queries, top_k, budget, threads):
    results = ann.query_batch(forest, queries, top_k, budget, threads)
    return [{"indices": r.indices, "distances": r.distances, "candidate_count": r.candidate_count}
            for r in results]


def cmd_ann_query(args):
    data = io.read_matrix(args.data)
    forest = ann.load_forest(args.forest, data)
    queries = io.read_matrix(args.queries)
    budget = args.budget if args.budget is not None else ann.BUDGET_FACTOR * args.top_k
    return {"results": _query_results(forest, queries, args.top_k, budget, args.threads)}


def cmd_ann_bench(args):
    data = io.read_matrix(args.data)
    queries = io.read_matrix(args.queries)
    t0 = time.perf_counter()
    forest = ann.build_forest(data, args.trees, args.leaf_size, args.seed, args.threads)
    build_s = time.perf_counter() - t0
    t0 = time.perf_counter()
    exact = [ann.brute_force_knn(data, q, args.top_k).indices for q in queries]
    brute_s = time.perf_counter() - t0
    rows = []
    for budget in args.budgets:
        t0 = time.perf_counter()
        approx = [ann.query(forest, q, args.top_k, budget).indices for q in queries]
        query_s = time.perf_counter() - t0
        recall = float(np.mean([np.intersect1d(a, e).size / args.top_k for a, e in zip(approx, exact)]))
        rows.append({"budget": budget, "recall": recall, "query_seconds": query_s})
    return {"recall": rows, "timings": {"build_seconds": build_s, "brute_force_seconds": brute_s},
            "kernel_backend": ann.kernels.BACKEND}


def _release(args, path):
    u = io.read_matrix(path)
    return privacy.PerturbedDataset(u, u.shape[0], args.sigma_r, False)


def cmd_privacy_perturb(args):
    x = io.read_matrix(args.input)
    ds, key = privacy.perturb(x, args.k, args.sigma_r, args.seed, args.kind, privacy=not args.test_mode)
    io.write_matrix(args.output, ds.U, args.format)
    if args.emit_key:
        io.write_key(args.emit_key, key.R, key.sigma_r)
    return {"k": ds.k, "m": key.m, "n": ds.n, "column_norms_normalized": ds.column_norms_normalized,
            "key_emitted": bool(args.emit_key)}


def cmd_privacy_estimate(args):
    u = _release(args, args.u)
    v = _release(args, args.v) if args.v else u
    inner = privacy.estimate_inner(u, v)
    result = {"inner": inner}
    if args.normalized:
        clipped = np.clip(inner, -1.0, 1.0)
        result["cosine"] = clipped
        result["distance"] = np.sqrt(2.0 - 2.0 * clipped)
    return result


def cmd_privacy_attack(args):
    if args.mode == "exact":
        _require_flags(args, "key")
        r, sigma_r = io.read_key(args.key)
        u = io.read_matrix(args.u)
        ds = privacy.PerturbedDataset(u, u.shape[0], sigma_r, False)
        key = privacy.PerturbationKey(r, sigma_r)
        res = privacy.attack_exact(ds, key)
        out = {"verdict": res.verdict, "unique": res.unique,
               "max_residual": float(res.residual_norms.max())}
        if args.output:
            io.write_matrix(args.output, res.reconstruction, args.format)
        else:
            out["reconstruction"] = res.reconstruction
        return out
    _require_flags(args, "m")
    u = io.read_matrix(args.u)
    if not 0 <= args.column < u.shape[1]:
        raise UsageError(f"--column {args.column} outside the {u.shape[1]} released records")
    stats = privacy.attack_estimate(u[:, args.column], args.m, args.sigma_hat, args.trials,
                                    args.seed, args.kind)
    return {"trials": stats.trials, "mean": stats.mean, "variance": stats.variance,
            "standard_error": stats.standard_error, "predicted_variance": stats.predicted_variance}


def cmd_privacy_kmeans(args):
    ds = _release(args, args.u)
    res = privacy.kmeans_perturbed(ds, args.clusters, args.max_iters, args.seed, args.restarts)
    return {"assignments": res.assignments, "iterations": res.iterations,
            "converged": res.converged, "cost": res.cost}


def cmd_privacy_perceptron(args):
    ds = _release(args, args.u)
    labels = io.read_vector(args.labels)
    if not np.all(labels == np.round(labels)):
        raise UsageError("--labels must hold integer class labels")
    res = privacy.perceptron_perturbed(ds, labels.astype(int), args.epochs, args.seed)
    return {"weights": res.weights, "bias": res.bias, "accuracy": res.accuracy,
            "tie_label": res.tie_label}


def _sensing_matrix(args):
    if args.matrix:
        return io.read_matrix(args.matrix)
    if args.gaussian:
        rows, cols = args.gaussian
        return RngStream(args.seed, 0).gaussian(rows * cols).reshape(rows, cols) / math.sqrt(rows)
    raise UsageError("one of --matrix or --gaussian is required")


def cmd_sensing_rip(args):
    return sensing.rip_constant(_sensing_matrix(args), args.s).to_dict()


def cmd_sensing_recover(args):
    a = io.read_matrix(args.matrix)
    y = io.read_vector(args.y)
    res = sensing.recover_sparse(a, y, args.s)
    return {"support": list(res.signal.support), "values": res.signal.values,
            "residual": res.residual, "unique": res.unique}


def cmd_sensing_bound(args):
    return {"m": sensing.measurement_bound(args.s, args.n, args.constant)}


def cmd_completion_norm(args):
    return {"nuclear_norm": completion.nuclear_norm(io.read_matrix(args.matrix))}


def cmd_completion_coherence(args):
    return {"coherence": completion.coherence(io.read_matrix(args.basis))}


def cmd_completion_bound(args):
    params = completion.CoherenceParams(args.mu0, args.r, args.n)
    return {"m": completion.sample_count_bound(params, args.beta, args.C), "mu1": params.mu1}


def cmd_completion_check(args):
    shape, rows, cols, vals = io.read_observed(args.observed)
    obs = completion.ObservedMatrix(shape, rows, cols, vals)
    res = completion.check_completion(io.read_matrix(args.candidate), obs, args.tol)
    return {"feasible": res.feasible, "rank": res.rank, "nuclear_norm": res.nuclear_norm,
            "max_violation": res.max_violation}


# ---------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=_seed, default=None,
                        help="random seed (default: $RPKIT_SEED or 0)")
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1)
    common.add_argument("--format", choices=("csv", "rpkm"), default="csv",
                        help="format of matrix files written")

    p = _Parser(prog="rpkit", description="Random projection toolkit")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(container, name, handler, **kw):
        sp = container.add_parser(name, parents=[common], **kw)
        sp.set_defaults(handler=handler)
        return sp

    sp = add(sub, "jl-dim", cmd_jl_dim, help="minimum JL target dimension")
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--eps", type=_open_unit, required=True)
    sp.add_argument("--c", type=_positive_float, default=transform.DEFAULT_JL.c)

    sp = add(sub, "project", cmd_project, help="project the rows of a matrix")
    sp.add_argument("--input", required=True)
    sp.add_argument("--k", type=_positive_int, required=True)
    sp.add_argument("--kind", choices=transform.KINDS, default="gaussian")
    sp.add_argument("--scaling", choices=transform.SCALINGS, default="unit")
    sp.add_argument("--output")

    sp = add(sub, "audit", cmd_audit, help="pairwise distortion audit")
    sp.add_argument("--original", required=True)
    sp.add_argument("--projected", required=True)
    sp.add_argument("--eps", type=_open_unit, required=True)

    ann_p = sub.add_parser("ann", help="random-projection forest search")
    ann_sub = ann_p.add_subparsers(dest="ann_command", required=True, parser_class=_Parser)
    sp = add(ann_sub, "build", cmd_ann_build)
    sp.add_argument("--data", required=True)
    sp.add_argument("--trees", type=_positive_int, default=ann.DEFAULT_TREES)
    sp.add_argument("--leaf-size", type=_positive_int, default=ann.DEFAULT_LEAF_SIZE)
    sp.add_argument("--output", required=True)
    sp = add(ann_sub, "query", cmd_ann_query)
    sp.add_argument("--forest", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--top-k", type=_positive_int, default=10)
    sp.add_argument("--budget", type=_positive_int)
    sp = add(ann_sub, "bench", cmd_ann_bench)
    sp.add_argument("--data", required=True)
    sp.add_argument("--queries", required=True)
    sp.add_argument("--trees", type=_positive_int, default=ann.DEFAULT_TREES)
    sp.add_argument("--leaf-size", type=_positive_int, default=ann.DEFAULT_LEAF_SIZE)
    sp.add_argument("--top-k", type=_positive_int, default=10)
    sp.add_argument("--budgets", type=_budget_list, default=[50, 100, 200, 400])

    priv = sub.add_parser("privacy", help="multiplicative perturbation")
    priv_sub = priv.add_subparsers(dest="privacy_command", required=True, parser_class=_Parser)
    sp = add(priv_sub, "perturb", cmd_privacy_perturb)
    sp.add_argument("--input", required=True)
    sp.add_argument("--k", type=_positive_int, required=True)
    sp.add_argument("--sigma-r", type=_positive_float, default=1.0)
    sp.add_argument("--kind", choices=transform.KINDS, default="gaussian")
    sp.add_argument("--output", required=True)
    sp.add_argument("--emit-key", metavar="PATH", help="also write the secret key (RPKK)")
    sp.add_argument("--test-mode", action="store_true", help="allow k >= m")
    sp = add(priv_sub, "estimate", cmd_privacy_estimate)
    sp.add_argument("--u", required=True)
    sp.add_argument("--v")
    sp.add_argument("--sigma-r", type=_positive_float, default=1.0)
    sp.add_argument("--normalized", action="store_true",
                    help="sources had unit-norm columns; also report cosine and distance")
    sp = add(priv_sub, "attack", cmd_privacy_attack)
    sp.add_argument("--mode", choices=("exact", "estimate"), required=True)
    sp.add_argument("--u", required=True)
    sp.add_argument("--key")
    sp.add_argument("--output")
    sp.add_argument("--column", type=_nonneg_int, default=0)
    sp.add_argument("--m", type=_positive_int)
    sp.add_argument("--sigma-hat", type=_positive_float, default=1.0)
    sp.add_argument("--trials", type=_positive_int, default=10_000)
    sp.add_argument("--kind", choices=transform.KINDS, default="gaussian")
    sp = add(priv_sub, "kmeans", cmd_privacy_kmeans)
    sp.add_argument("--u", required=True)
    sp.add_argument("--clusters", type=_positive_int, required=True)
    sp.add_argument("--max-iters", type=_positive_int, default=100)
    sp.add_argument("--restarts", type=_positive_int, default=privacy.DEFAULT_RESTARTS)
    sp.add_argument("--sigma-r", type=_positive_float, default=1.0)
    sp = add(priv_sub, "perceptron", cmd_privacy_perceptron)
    sp.add_argument("--u", required=True)
    sp.add_argument("--labels", required=True)
    sp.add_argument("--epochs", type=_nonneg_int, default=20)
    sp.add_argument("--sigma-r", type=_positive_float, default=1.0)

    sens = sub.add_parser("sensing", help="RIP certification and sparse recovery")
    sens_sub = sens.add_subparsers(dest="sensing_command", required=True, parser_class=_Parser)
    sp = add(sens_sub, "rip", cmd_sensing_rip)
    sp.add_argument("--matrix")
    sp.add_argument("--gaussian", nargs=2, type=_positive_int, metavar=("ROWS", "COLS"),
                    help="sample a Gaussian matrix scaled by 1/sqrt(ROWS) instead of reading one")
    sp.add_argument("--s", type=_positive_int, required=True)
    sp = add(sens_sub, "recover", cmd_sensing_recover)
    sp.add_argument("--matrix", required=True)
    sp.add_argument("--y", required=True)
    sp.add_argument("--s", type=_positive_int, required=True)
    sp = add(sens_sub, "bound", cmd_sensing_bound)
    sp.add_argument("--s", type=_positive_int, required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--constant", type=_positive_float, default=1.0)

    comp = sub.add_parser("completion", help="matrix-completion utilities")
    comp_sub = comp.add_subparsers(dest="completion_command", required=True, parser_class=_Parser)
    sp = add(comp_sub, "norm", cmd_completion_norm)
    sp.add_argument("--matrix", required=True)
    sp = add(comp_sub, "coherence", cmd_completion_coherence)
    sp.add_argument("--basis", required=True)
    sp = add(comp_sub, "bound", cmd_completion_bound)
    sp.add_argument("--mu0", type=_positive_float, required=True)
    sp.add_argument("--r", type=_positive_int, required=True)
    sp.add_argument("--n", type=_positive_int, required=True)
    sp.add_argument("--beta", type=_positive_float, required=True)
    sp.add_argument("--C", type=_positive_float, default=1.0)
    sp = add(comp_sub, "check", cmd_completion_check)
    sp.add_argument("--candidate", required=True)
    sp.add_argument("--observed", required=True)
    sp.add_argument("--tol", type=_positive_float, default=1e-9)
    return p


_COMMAND_KEYS = ("command", "ann_command", "privacy_command", "sensing_command", "completion_command")


def _resolved_config(args):
    items = vars(args)
    config = {"subcommand": " ".join(items[k] for k in _COMMAND_KEYS if items.get(k))}
    for k, v in sorted(items.items()):
        if k not in _COMMAND_KEYS and k != "handler" and v is not None:
            config[k] = v
    return config


def run(argv=None, stdout=None, stderr=None):
    """Run one command; returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
        result = args.handler(args)
    except UsageError as exc:
        print(f"rpkit: error: {exc}", file=stderr)
        return EXIT_USAGE
    except MatrixFileError as exc:
        print(f"rpkit: I/O error: {exc}", file=stderr)
        return EXIT_IO
    except ConvergenceError as exc:
        print(f"rpkit: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except (ValueError, DimensionError, BudgetExceededError) as exc:
        print(f"rpkit: error: {exc}", file=stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"rpkit: I/O error: {exc}", file=stderr)
        return EXIT_IO
    report = {"config": _resolved_config(args)}
    report.update(result)
    print(dumps_report(report), file=stdout)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
