"""Command-line interface: batch simulation, calibration, benchmark,
case-study replay, and the live-conduct HTTP server."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import casestudy as cs
from .benchmark import benchmark_pcs
from .calibrate import (
    STAGE1_SCENARIOS,
    STAGE2_SCENARIOS,
    calibrate_stage1,
    calibrate_stage2,
    default_stage1_nsim,
)
from .core import TrialConfig
from .designs import DESIGN_DEFAULTS, DESIGN_IDS, ConfigError
from .engine import simulate
from .scenarios import bundled_scenarios, get_scenario
from . import reports

EXIT_CONFIG = 2


def _load_config(args) -> dict:
    config = dict(DESIGN_DEFAULTS.get(args.design, {}))
    if getattr(args, "config", None):
        loaded = json.loads(Path(args.config).read_text())
        if "design" in loaded and loaded["design"] != args.design:
            raise ConfigError(
                f"config file is for design {loaded['design']!r}, not {args.design!r}"
            )
        config.update(loaded)
    config["design"] = args.design
    if getattr(args, "epsilon", None) is not None:
        config["epsilon"] = args.epsilon
    return config


def cmd_simulate(args) -> int:
    config = _load_config(args)
    scenario_names = (
        [str(s) for s in args.scenario]
        if args.scenario
        else sorted(bundled_scenarios(), key=int)
    )
    rows = []
    full = []
    for name in scenario_names:
        scenario = get_scenario(name, path=args.scenarios_file)
        oc = simulate(
            config,
            scenario,
            TrialConfig(),
            n_sim=args.nsim,
            master_seed=args.seed,
            n_jobs=args.jobs,
        )
        row = oc.row(args.design, name)
        rows.append(row)
        full.append(
            row
            | {
                "selection_histogram": oc.selection_histogram.tolist(),
                "allocation_histogram": oc.allocation_histogram.tolist(),
            }
        )
        print(
            f"{args.design} scenario {name}: pcs={row['pcs']:.4f} pas={row['pas']:.4f} "
            f"toxic={row['toxic_selection']:.4f} none={row['no_selection']:.4f}"
        )
    if args.out:
        reports.write_csv(rows, args.out, reports.OC_FIELDS)
        if args.plot:
            reports.plot_oc_bars(rows, reports.figure_path(args.out))
        print(f"wrote {args.out}")
    if args.json:
        path = Path(args.json)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps({"schema": 1, "results": full}, indent=1))
        print(f"wrote {path}")
    return 0


def cmd_calibrate(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.stage == 1:
        n_sim = args.nsim or default_stage1_nsim(args.design)
        rows = calibrate_stage1(
            args.design, n_sim=n_sim, master_seed=args.seed, n_jobs=args.jobs
        )
        table = [
            {"rank": k + 1, **r.setting, "gm_pcs": r.gm_pcs}
            | {f"pcs_{s}": r.pcs[s] for s in STAGE1_SCENARIOS}
            for k, r in enumerate(rows)
        ]
        path = out_dir / f"{args.design}_stage1.csv"
        reports.write_csv(table, path)
        if args.plot:
            reports.plot_stage1(table, path.with_suffix(".png"))
        best = rows[0]
        print(f"best setting: {best.setting} (geometric-mean PCS {best.gm_pcs:.4f})")
        print(f"wrote {path}")
        return 0
    config = _load_config(args)
    config["design"] = args.design
    eps_grid = None
    if args.eps_step:
        k = round(1.0 / args.eps_step)
        eps_grid = [round(1.0 - args.eps_step * t, 10) for t in range(1, k)]
    result = calibrate_stage2(
        config,
        epsilon_grid=eps_grid,
        n_sim=args.nsim or 1000,
        master_seed=args.seed,
        n_jobs=args.jobs,
    )
    table = [
        {
            "epsilon": p.epsilon,
            "no_selection_14": p.no_selection_14,
            **{f"pcs_{s}": p.pcs.get(s, float("nan")) for s in STAGE2_SCENARIOS if s != "14"},
            **{f"patients_at_toxic_{s}": p.patients_at_toxic.get(s, float("nan")) for s in STAGE2_SCENARIOS},
        }
        for p in result.curve
    ]
    path = out_dir / f"{args.design}_stage2.csv"
    reports.write_csv(table, path)
    if args.plot:
        reports.plot_stage2(table, path.with_suffix(".png"), result.threshold)
    if result.chosen_epsilon is None:
        print("no epsilon on the grid meets the threshold; see the curve")
    else:
        print(f"chosen epsilon: {result.chosen_epsilon}")
    print(f"wrote {path}")
    return 0


def cmd_benchmark(args) -> int:
    scenario_names = (
        [str(s) for s in args.scenario]
        if args.scenario
        else sorted(bundled_scenarios(), key=int)
    )
    rows = []
    for name in scenario_names:
        res = benchmark_pcs(
            get_scenario(name),
            TrialConfig(),
            n_sim=args.nsim,
            master_seed=args.seed,
            mode=args.mode,
        )
        rows.append({"scenario": name, "pcs": res.pcs, "pas": res.pas})
        print(f"benchmark scenario {name}: pcs={res.pcs:.4f} pas={res.pas:.4f}")
    if args.out:
        reports.write_csv(rows, args.out)
        if args.plot:
            reports.plot_benchmark(rows, reports.figure_path(args.out))
        print(f"wrote {args.out}")
    return 0


def cmd_casestudy(args) -> int:
    tape = cs.build_tape(args.seed)
    config = _load_config(args)
    result = cs.replay(config, tape, TrialConfig(), seed=args.seed)
    print(cs.format_replay(result))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    uvicorn.run(create_app(args.data_dir), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="combodose",
        description="dual-agent dose-combination designs: simulate, calibrate, replay, serve",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, design=True):
        if design:
            p.add_argument("--design", required=True, choices=DESIGN_IDS)
            p.add_argument("--config", help="JSON design config file")
            p.add_argument("--epsilon", type=float, help="override the overdose threshold")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("simulate", help="operating characteristics under a scenario")
    add_common(p)
    p.add_argument("--scenario", action="append", help="scenario name (repeatable; default all)")
    p.add_argument("--scenarios-file", help="JSON file with extra scenarios")
    p.add_argument("--nsim", type=int, default=2000)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--json", help="JSON output path (includes histograms)")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("calibrate", help="two-stage design calibration")
    add_common(p)
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--nsim", type=int)
    p.add_argument("--eps-step", type=float, help="stage-2 epsilon grid step (default 0.01)")
    p.add_argument("--out-dir", default="calibration")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(fn=cmd_calibrate)

    p = sub.add_parser("benchmark", help="non-parametric complete-information bound")
    add_common(p, design=False)
    p.add_argument("--scenario", action="append")
    p.add_argument("--nsim", type=int, default=2000)
    p.add_argument("--mode", choices=("isotonic", "order-average"), default="isotonic")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(fn=cmd_benchmark)

    p = sub.add_parser("casestudy", help="replay the combination study tape")
    add_common(p)
    p.set_defaults(fn=cmd_casestudy)

    p = sub.add_parser("serve", help="run the live trial-conduct API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--data-dir", help="session storage directory")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
