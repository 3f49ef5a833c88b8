"""Command-line entry point: run experiments and write the results CSV.

Precedence for settings is built-in defaults < --config file < explicit
flags.  Exit code is 0 on success; failures print a one-line reason to
stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import (ExperimentConfig, config_from_mapping, empirical_cdf,
                      filter_records, parse_config_file, run_experiment,
                      write_csv)
from .scenario import ORTHOGONAL, PARALLEL


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH",
                   help="flat key = value configuration file")
    p.add_argument("--layout", choices=["parallel", "orthogonal", "both"])
    p.add_argument("--model", choices=["phase", "atten"])
    p.add_argument("--zeta", type=float,
                   help="attenuation coefficient in Np/m (atten model)")
    p.add_argument("--realizations", type=int, metavar="B")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--swarm", type=int, metavar="I",
                   help="particle swarm size")
    p.add_argument("--es-spacing", type=float, metavar="F",
                   help="exhaustive-search grid spacing in meters")
    p.add_argument("--objective", choices=["ssr", "see", "both"])
    p.add_argument("--out", metavar="PATH", help="output CSV path")
    p.add_argument("--workers", type=int, metavar="W")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pinchsec",
        description="Pinching-antenna physical-layer-security experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("tables", "average-performance comparison batch"),
        ("cdf", "per-scenario batch plus an SSR CDF printout"),
        ("sweep", "sweep one axis holding the defaults otherwise"),
        ("special", "eavesdropper placed between transmitter and users"),
        ("single", "one realization, full pipeline"),
    ]
    for name, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        if name == "sweep":
            p.add_argument("axis", choices=["pmax", "n", "zeta"])
        _add_common(p)
    return parser


_EXPERIMENT_BY_COMMAND = {"tables": "tables", "cdf": "cdf",
                          "special": "special_in_front", "single": "single"}
_EXPERIMENT_BY_AXIS = {"pmax": "sweep_pmax", "n": "sweep_n",
                       "zeta": "sweep_zeta"}


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.command == "sweep":
        experiment = _EXPERIMENT_BY_AXIS[args.axis]
    else:
        experiment = _EXPERIMENT_BY_COMMAND[args.command]
    cfg = replace(cfg, experiment=experiment)
    if args.command == "single":
        cfg = replace(cfg, realizations=1)
    if args.config:
        cfg = config_from_mapping(parse_config_file(args.config), cfg)
    cfg = replace(cfg, experiment=experiment)

    overrides = {}
    if args.layout:
        overrides["layouts"] = ((PARALLEL, ORTHOGONAL) if args.layout == "both"
                                else (args.layout,))
    if args.model:
        overrides["model"] = args.model
    if args.zeta is not None:
        overrides["zetas"] = (args.zeta,)
        overrides.setdefault("model", "atten")
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if args.seed is not None:
        overrides["seed_base"] = args.seed
    if args.es_spacing is not None:
        overrides["es_spacing"] = args.es_spacing
    if args.objective:
        overrides["objectives"] = (("ssr", "see") if args.objective == "both"
                                   else (args.objective,))
    if args.out:
        overrides["out_path"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        cfg = replace(cfg, **overrides)
    if args.swarm is not None:
        cfg = replace(cfg, pso=replace(cfg.pso, swarm_size=args.swarm))
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        records = run_experiment(cfg)
        write_csv(records, cfg.out_path)
    except (ValueError, OSError) as exc:
        print(f"pinchsec: {exc}", file=sys.stderr)
        return 1
    ok = [r for r in records if not r.status.startswith("error")]
    print(f"wrote {len(records)} records ({len(ok)} ok) to {cfg.out_path}")
    if args.command == "cdf":
        sel = filter_records(records, stage="stage2", objective="ssr")
        if sel:
            print("SSR CDF (stage2):")
            for value, prob in empirical_cdf([r.ssr for r in sel]):
                print(f"  {value:.6g} {prob:.6g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
