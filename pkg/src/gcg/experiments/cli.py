"""``gcg`` command line: train, eval, sweep, plot, presets."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from gcg.config import RunConfig, load_config
from gcg.errors import ConfigError, ParseError, TrainingError, UsageError
from gcg.experiments.presets import PRESETS, preset

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def resolve_config(ref: str) -> RunConfig:
    """A preset name or a path to a YAML config."""
    if ref in PRESETS:
        return preset(ref)
    p = Path(ref)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return load_config(p)
    raise ConfigError(f"{ref!r} is neither a config file nor a preset; presets: {', '.join(PRESETS)}")


def _seeds(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"--seeds must be comma-separated integers, got {text!r}") from None


def _override(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "steps", None) is not None:
        cfg.steps = args.steps
    if getattr(args, "world", None) is not None:
        cfg.world = args.world
    cfg.validate()
    return cfg


def cmd_train(args) -> int:
    from gcg.driver.run import run
    from gcg.experiments.evaluate import final_distance

    cfg = _override(resolve_config(args.config), args)
    seed = cfg.seeds[0] if args.seed is None else args.seed
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"{cfg.name}_seed{seed}"
    res = run(cfg, seed=seed, out_dir=out)
    summary = {
        "out_dir": str(res.out_dir),
        "episodes": len(res.episodes),
        "final_distance_m": final_distance(res.episodes, res.steps, open_episode=res.open_episode),
        "checkpoint": str(res.checkpoints[-1]) if res.checkpoints else None,
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_eval(args) -> int:
    from gcg.experiments.evaluate import evaluate

    stats = evaluate(args.checkpoint, world=args.world, episodes=args.episodes, seed=args.seed,
                     config=args.config, max_steps=args.max_steps)
    print(json.dumps(stats.as_dict(), indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    from gcg.experiments.sweep import sweep

    cfg = _override(resolve_config(args.config), args)
    seeds = _seeds(args.seeds) if args.seeds else cfg.seeds
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"{cfg.name}_sweep"
    res = sweep(cfg, seeds, out, smoothing=args.smoothing, workers=args.workers)
    print(json.dumps({"aggregate": str(res.aggregate_csv), "seeds": {s: str(p) for s, p in res.seed_csvs.items()},
                      "failed": res.failed, "partial": res.partial}, indent=2))
    return EXIT_ABORT if res.partial else EXIT_OK


def cmd_plot(args) -> int:
    from gcg.experiments.plot import plot

    out = plot(args.csvs, args.out, smoothing=args.smoothing, title=args.title or "")
    print(out)
    return EXIT_OK


def cmd_presets(args) -> int:
    for name in PRESETS:
        g = preset(name).graph
        boot = "bootstrap" if g.bootstrap else "no-bootstrap"
        print(f"{name:22s} {g.output_mode:9s} {g.loss_mode:13s} H={g.horizon:<2d} N={g.label_horizon:<2d} {boot}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gcg", description="Collision-avoidance learning with generalized computation graphs.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the interaction/training loop for one seed")
    t.add_argument("config", help="preset name or YAML config path")
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--steps", type=int, help="override the step budget")
    t.add_argument("--world", help="override the world file or fixture name")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="greedy-policy distance statistics for a checkpoint")
    e.add_argument("checkpoint")
    e.add_argument("--world")
    e.add_argument("--episodes", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--config", help="run config (default: config.yaml next to the checkpoint)")
    e.add_argument("--max-steps", type=int, help="per-episode step cap")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sweep", help="run a config over several seeds and aggregate")
    s.add_argument("config")
    s.add_argument("--seeds", help="comma-separated, e.g. 0,1,2")
    s.add_argument("--out")
    s.add_argument("--steps", type=int)
    s.add_argument("--world")
    s.add_argument("--smoothing", type=int, default=5, help="moving-average window in eval intervals")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    pl = sub.add_parser("plot", help="SVG learning curves from curve/aggregate/metrics CSVs")
    pl.add_argument("csvs", nargs="*")
    pl.add_argument("--out", required=True)
    pl.add_argument("--smoothing", type=int, default=1)
    pl.add_argument("--title")
    pl.set_defaults(func=cmd_plot)

    pr = sub.add_parser("presets", help="list named configurations")
    pr.set_defaults(func=cmd_presets)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, ParseError, UsageError) as exc:
        print(f"gcg: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingError as exc:
        print(f"gcg: training aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
