"""Command-line driver: ``ttgo train | solve | sample | benchmark | info``.

Exit codes: 0 success, 2 invalid arguments, 3 model-format error,
4 training finished with its sweep budget exhausted (the model is still
written).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from .cross import CrossOptions
from .errors import ModelFormatError, TTGOError
from .persist import load_model, save_model
from .pipeline import solve, train
from .problems import load_problem, problem_from_config
from .sampler import build_sampler, sample
from .tt import tt_num_params

EXIT_OK, EXIT_ARGS, EXIT_FORMAT, EXIT_BUDGET = 0, 2, 3, 4
SIDECAR_SUFFIX = ".problem.json"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v != ""]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _counts(values) -> list[int]:
    out = []
    for v in values:
        out += [int(x) for x in str(v).split(",") if x]
    return out


def sidecar_path(model_path) -> Path:
    p = Path(model_path)
    return p.with_name(p.name + SIDECAR_SUFFIX)


def _problem_for(model_path, override):
    path = Path(override) if override else sidecar_path(model_path)
    if not path.exists():
        raise UsageError(f"no problem description at {path}; pass --problem")
    return load_problem(path)


def cmd_train(args) -> int:
    cfg_path = Path(args.problem)
    cfg = json.loads(cfg_path.read_text())
    problem = problem_from_config(cfg)
    counts = _counts(args.grid_counts) if args.grid_counts else cfg.get("grid_counts")
    if counts is None:
        counts = [50] * problem.domain.d
    if len(counts) == 1:
        counts = counts * problem.domain.d
    if len(counts) != problem.domain.d:
        raise UsageError(f"need {problem.domain.d} grid counts, got {len(counts)}")
    opts = CrossOptions(max_rank=args.max_rank, n_sweeps=args.sweeps, tol=args.tol, seed=args.seed,
                        kick=args.kick)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = train(problem, counts, opts)
    save_model(model, args.out)
    sidecar_path(args.out).write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    rep = model.report
    print(json.dumps({"model": str(args.out), "ranks": list(model.tt.ranks),
                      "params": tt_num_params(model.tt), "oracle_calls": rep.oracle_calls,
                      "sweeps": rep.sweeps, "rel_rms": rep.rel_rms[-1] if rep.rel_rms else None,
                      "converged": rep.converged}))
    if rep.budget_exhausted:
        print(f"warning: sweep budget exhausted before reaching tol {args.tol:g}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def _write_table(header, rows, out):
    if out in (None, "-", "csv"):
        w = csv.writer(sys.stdout)
        w.writerow(header)
        w.writerows(rows)
    elif out == "json" or str(out).endswith(".json"):
        text = json.dumps([dict(zip(header, r)) for r in rows], indent=2)
        if out == "json":
            print(text)
        else:
            Path(out).write_text(text + "\n")
    else:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(rows)


def cmd_solve(args) -> int:
    model = load_model(args.model)
    problem = _problem_for(args.model, args.problem)
    task = _floats(args.task) if args.task else []
    if len(task) != model.split.d1:
        raise UsageError(f"model expects {model.split.d1} task values, got {len(task)}")
    res = solve(model, problem, task, alpha=args.alpha, n_samples=args.samples, k_best=args.top,
                seed=args.seed, do_refine=not args.no_refine)
    d2 = model.split.d2
    as_json = args.out == "json" or str(args.out).endswith(".json")
    fmt = (lambda v: float(v)) if as_json else (lambda v: f"{float(v):.17g}")
    header = ["rank"] + [f"x{k}" for k in range(d2)] + ["c_i", "c_f", "success"]
    rows = []
    if args.no_refine:
        for r, (x, ci) in enumerate(res.candidates):
            rows.append([r] + [fmt(v) for v in x] + [fmt(ci), None if as_json else "", bool(res.success[r])])
    else:
        for r, (x, cf, _, ci) in enumerate(res.refined):
            rows.append([r] + [fmt(v) for v in x] + [fmt(ci), fmt(cf), bool(res.success[r])])
    _write_table(header, rows, args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    model = load_model(args.model)
    task = _floats(args.task) if args.task else []
    if len(task) != model.split.d1:
        raise UsageError(f"model expects {model.split.d1} task values, got {len(task)}")
    state = build_sampler(model.conditioned(np.asarray(task)), args.alpha, args.seed)
    batch = sample(state, args.n, grid=model.decision_grid)
    if args.out in (None, "-"):
        batch.to_csv(sys.stdout)
    else:
        batch.to_csv(args.out)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    from .suites import SUITES, run_suite

    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    for name in names:
        if name not in SUITES:
            raise UsageError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    summary = []
    for name in names:
        out = run_suite(name, args.out, seed=args.seed, quick=args.quick, figures=not args.no_figures)
        out.pop("rows")
        summary.append(out)
        print(json.dumps(out))
    Path(args.out, "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_info(args) -> int:
    model = load_model(args.model)
    g = model.grid
    print(json.dumps({
        "d": g.d, "d1": model.split.d1, "d2": model.split.d2,
        "ranks": list(model.tt.ranks), "max_rank": model.tt.max_rank,
        "params": tt_num_params(model.tt), "beta": model.beta, "transform": model.transform,
        "grid": {"counts": list(g.counts), "lower": g.lower.tolist(), "upper": g.upper.tolist()},
    }, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ttgo", description="Tensor-train global optimization.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a TT model to a problem's density")
    t.add_argument("--problem", required=True, help="problem configuration (JSON)")
    t.add_argument("--out", required=True, help="model file to write")
    t.add_argument("--max-rank", type=int, default=20)
    t.add_argument("--sweeps", type=int, default=10)
    t.add_argument("--tol", type=float, default=1e-4)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--kick", type=int, default=2)
    t.add_argument("--grid-counts", nargs="+", help="nodes per dimension (one value applies to all)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="sample, rank and refine decisions for one task")
    s.add_argument("--model", required=True)
    s.add_argument("--problem", help="problem JSON (default: the sidecar written by train)")
    s.add_argument("--task", default="")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--samples", type=int, default=100)
    s.add_argument("--top", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--no-refine", action="store_true")
    s.add_argument("--out", default="csv", help="output path (.csv/.json), or csv/json for stdout")
    s.set_defaults(func=cmd_solve)

    a = sub.add_parser("sample", help="write raw prioritized samples")
    a.add_argument("--model", required=True)
    a.add_argument("--task", default="")
    a.add_argument("--alpha", type=float, default=0.0)
    a.add_argument("--n", type=int, default=100)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", default="-")
    a.set_defaults(func=cmd_sample)

    b = sub.add_parser("benchmark", help="run a standard suite and write metrics CSV and figures")
    b.add_argument("--suite", required=True, help="suite name or 'all'")
    b.add_argument("--out", required=True, help="output directory")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--quick", action="store_true", help="fewer tasks and sweeps")
    b.add_argument("--no-figures", action="store_true")
    b.set_defaults(func=cmd_benchmark)

    i = sub.add_parser("info", help="print ranks, parameter count and grid summary")
    i.add_argument("--model", required=True)
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ModelFormatError as exc:
        print(f"error: model file: {exc} [{exc.code}]", file=sys.stderr)
        return EXIT_FORMAT
    except (UsageError, TTGOError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
