"""Command-line interface: ``cprrt <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from ..conformal import PredictionRegions, load_model, read_records, recalibrate, save_model
from ..dynamics import ModelParams
from ..env import MAZE_CELLS, generate_maze_world, load_problem, save_problem
from ..planner import PlannerConfig, SamplerConfig, plan
from . import experiments as ex

log = logging.getLogger("cprrt")


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _shared(p: argparse.ArgumentParser, *, density_many: bool = False) -> None:
    p.add_argument("--model", choices=("holonomic", "dubins", "car5d"), default="holonomic")
    if density_many:
        p.add_argument("--density", type=int, nargs="+", default=[30])
    else:
        p.add_argument("--density", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--p-bias", type=float, default=0.5)
    p.add_argument("--iters", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--predictor", default="astar", help="astar or file:<path>")
    p.add_argument("--out", default="results")
    p.add_argument("--serial", action="store_true", help="run one plan at a time")
    p.add_argument("--full-scale", action="store_true", help="50 problems x 30 repeats")


def _calibrations(args, densities: Sequence[int], out: Path) -> dict:
    """Load ``--calib`` models or build them (records and model are saved under ``out``)."""
    if args.calib:
        models = [load_model(p) for p in args.calib]
        if len(models) == 1 and len(densities) == 1:
            return {densities[0]: models[0]}
        return {int(m.distribution_tag.lstrip("D")): m for m in models}
    cals = {}
    for d in densities:
        recs = ex.build_calibration(d, args.n_cal, args.calib_iters, args.seed,
                                    out=out / f"calib_d{d}.jsonl")
        model = ex.calibrate_records(recs, args.alpha, d)
        save_model(model, out / f"model_d{d}.json")
        log.info("density %d: q_hat = %.4g", d, model.q_hat)
        cals[d] = model
    return cals


def _experiment(args, **kw) -> ex.ExperimentConfig:
    base = dict(model=args.model, alpha=args.alpha, p_bias=args.p_bias, n_iters=args.iters,
                seed=args.seed, out_dir=str(_out(args)), predictor=args.predictor,
                serial=args.serial, workers=getattr(args, "workers", None))
    base.update(kw)
    if args.full_scale:
        return ex.ExperimentConfig.full_scale(**base)
    base.setdefault("n_worlds", args.worlds)
    base.setdefault("repeats", args.repeats)
    return ex.ExperimentConfig(**base)


def _print_summary(summary) -> None:
    w = max(len(r["planner"]) for r in summary)
    print(f"{'planner':<{w}}  success  median_s   mean_s  improv_mean%")
    for r in summary:
        imp = r["improvement_mean_pct"]
        print(f"{r['planner']:<{w}}  {r['success_rate']:7.2f}  "
              f"{(r['median_time_s'] or float('nan')):8.4f} {(r['mean_time_s'] or float('nan')):8.4f}  "
              f"{'' if imp is None else f'{imp:8.1f}'}")


# --- subcommands ------------------------------------------------------------------

def cmd_gen_worlds(args) -> int:
    out = _out(args)
    for i in range(args.n):
        pid = f"d{args.density}-{i:03d}"
        save_problem(ex.sample_problem(args.density, args.seed, 1, i), out / f"{pid}.json")
    print(f"wrote {args.n} problems to {out}")
    return 0


def cmd_gen_maze(args) -> int:
    out = _out(args)
    cfg = ex.ExperimentConfig(suite="maze", n_worlds=args.n, seed=args.seed,
                              maze_cells=args.cells, repeats=1)
    for pid, _, problem in ex.problem_suite(cfg):
        save_problem(problem, out / f"{pid}.json")
    print(f"wrote {args.n} mazes to {out}")
    return 0


def cmd_build_calib(args) -> int:
    out = _out(args)
    path = out / f"calib_d{args.density}.jsonl"
    recs = ex.build_calibration(args.density, args.n_cal, args.iters, args.seed, args.model, path)
    print(f"wrote {len(recs)} records to {path}")
    return 0


def cmd_calibrate(args) -> int:
    out = _out(args)
    recs = read_records(args.records)
    model = ex.calibrate_records(recs, args.alpha, args.density, args.predictor)
    path = out / f"model_d{args.density}.json"
    save_model(model, path)
    print(f"q_hat = {ex.fmt_float(model.q_hat)} (alpha={args.alpha}, n_cal={model.n_cal}) -> {path}")
    return 0


def cmd_plan(args) -> int:
    if args.problem:
        problem = load_problem(args.problem)
        pid = Path(args.problem).stem
    elif args.maze is not None:
        problem = generate_maze_world(args.maze, cells=args.cells)
        pid = f"maze-{args.maze:03d}"
    else:
        problem = ex.sample_problem(args.density, args.seed, 1, args.index)
        pid = f"d{args.density}-{args.index:03d}"
    regions = None
    if args.sampler == "cp":
        if args.q_hat is not None:
            q_hat = args.q_hat
        elif args.calib:
            m = load_model(args.calib[0])
            q_hat = recalibrate(m, args.alpha).q_hat if m.alpha != args.alpha else m.q_hat
        else:
            print("cp needs --q-hat or --calib", file=sys.stderr)
            return 2
        regions = PredictionRegions(ex.predict(problem, args.predictor, pid), q_hat)
    cfg = SamplerConfig(args.sampler, p_bias=args.p_bias if args.sampler == "cp" else 0.5)
    res = plan(problem, ModelParams(args.model), cfg,
               PlannerConfig(n_iters=args.iters, seed=args.seed, stop_at_first=args.first), regions)
    s = res.stats
    print(json.dumps({
        "problem": pid, "success": res.success, "iters_to_first": s.iters_to_first,
        "time_to_first": s.time_to_first, "first_cost": s.first_cost,
        "best_cost": None if res.best is None else res.best.length,
        "nodes": s.nodes, "fallbacks": s.fallbacks, "wall_time": s.wall_time}, indent=2))
    if args.dump_tree:
        out = _out(args)
        path = out / f"tree_{pid}_{args.sampler}.json"
        path.write_text(json.dumps(res.tree.to_dict()), encoding="utf-8")
        print(f"tree written to {path}")
    return 0 if res.success else 1


def cmd_bench(args) -> int:
    out = _out(args)
    maze = args.suite == "maze"
    densities = [10] if maze else args.density
    planners = tuple(ex.PlannerSpec(k) for k in args.planners)
    needs_cal = any(p.kind == "cp" for p in planners)
    cals = _calibrations(args, densities, out) if needs_cal else {}
    kw = dict(planners=planners, suite=args.suite, maze_cells=args.cells)
    if maze:
        kw["n_worlds"] = args.worlds if not args.full_scale else 10
        kw["repeats"] = args.repeats if not args.full_scale else 20
    else:
        kw["densities"] = tuple(densities)
    cfg = _experiment(args, **kw)
    bench = ex.run_benchmark(cfg, cals)
    _print_summary(bench.summary)
    print(f"rows: {bench.results_path}\nsummary: {bench.aggregate_path}")
    return 0


def cmd_sweep(args) -> int:
    out = _out(args)
    cals = _calibrations(args, args.density, out)
    cfg = _experiment(args, densities=tuple(args.density))
    alphas = args.alphas or ex.SWEEP_ALPHAS
    p_biases = args.p_biases or ex.SWEEP_P_BIAS
    bench, matrix = ex.sweep(cfg, cals, alphas, p_biases)
    _print_summary(bench.summary)
    print("improvement of mean time over uniform (%)")
    for row in matrix:
        cells = "  ".join(f"{k}: {ex.fmt_float(v) if v is not None else '-'}"
                          for k, v in row.items() if k != "alpha")
        print(f"alpha={row['alpha']}: {cells}")
    return 0


def cmd_coverage(args) -> int:
    out = _out(args)
    if args.calib:
        model = load_model(args.calib[0])
        if model.alpha != args.alpha:
            model = recalibrate(model, args.alpha)
    else:
        model = _calibrations(args, [args.density], out)[args.density]
    rep = ex.eval_coverage(args.density, model, args.n_test, args.iters, args.seed, args.model,
                           args.predictor)
    path = out / f"coverage_d{args.density}.json"
    payload = {"build": ex.build_id(), "config": vars(args) | {"func": None}} | rep.to_dict()
    path.write_text(json.dumps(payload, default=str), encoding="utf-8")
    print(f"coverage {rep.coverage:.3f} over {rep.n_test} problems "
          f"(q_hat={ex.fmt_float(rep.q_hat)}, {rep.resampled} resampled) -> {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cprrt", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-worlds", help="write density-world problems as JSON")
    _shared(p)
    p.add_argument("--n", type=int, default=20)
    p.set_defaults(func=cmd_gen_worlds)

    p = sub.add_parser("gen-maze", help="write maze problems as JSON")
    _shared(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--cells", type=int, default=MAZE_CELLS)
    p.set_defaults(func=cmd_gen_maze)

    p = sub.add_parser("build-calib", help="solve sampled problems with long RRT* runs")
    _shared(p)
    p.add_argument("--n-cal", type=int, default=50)
    p.set_defaults(func=cmd_build_calib)

    p = sub.add_parser("calibrate", help="conformal quantile from a calibration dataset")
    _shared(p)
    p.add_argument("--records", required=True, help="calibration JSONL file")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("plan", help="run a single planner")
    _shared(p)
    p.add_argument("--problem", help="problem JSON (default: draw from --density)")
    p.add_argument("--maze", type=int, help="plan in generated maze with this seed")
    p.add_argument("--cells", type=int, default=MAZE_CELLS)
    p.add_argument("--index", type=int, default=0, help="test-suite draw index")
    p.add_argument("--sampler", choices=("uniform", "goal_biased", "cp"), default="cp")
    p.add_argument("--q-hat", type=float)
    p.add_argument("--calib", nargs="+", help="calibration model JSON")
    p.add_argument("--first", action="store_true", help="stop at the first solution")
    p.add_argument("--dump-tree", action="store_true")
    p.set_defaults(func=cmd_plan)

    for name, fn, help_ in (("bench", cmd_bench, "comparative benchmark"),
                            ("sweep", cmd_sweep, "alpha x p_bias grid")):
        p = sub.add_parser(name, help=help_)
        _shared(p, density_many=True)
        p.add_argument("--worlds", type=int, default=20)
        p.add_argument("--repeats", type=int, default=10)
        p.add_argument("--workers", type=int)
        p.add_argument("--calib", nargs="+", help="calibration model JSON per density")
        p.add_argument("--n-cal", type=int, default=50)
        p.add_argument("--calib-iters", type=int, default=20_000)
        if name == "bench":
            p.add_argument("--planners", nargs="+", default=["uniform", "goal_biased", "cp"],
                           choices=("uniform", "goal_biased", "cp"))
            p.add_argument("--suite", choices=("density", "maze"), default="density")
            p.add_argument("--cells", type=int, default=MAZE_CELLS)
        else:
            p.add_argument("--alphas", type=float, nargs="+")
            p.add_argument("--p-biases", type=float, nargs="+")
        p.set_defaults(func=fn)

    p = sub.add_parser("coverage", help="empirical coverage on fresh problems")
    _shared(p)
    p.add_argument("--n-test", type=int, default=200)
    p.add_argument("--calib", nargs="+", help="calibration model JSON")
    p.add_argument("--n-cal", type=int, default=50)
    p.add_argument("--calib-iters", type=int, default=20_000)
    p.set_defaults(func=cmd_coverage)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
