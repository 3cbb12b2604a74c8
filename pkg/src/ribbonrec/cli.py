"""Batch command line: ingest, simulate, recommend, evaluate, report.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from datetime import date, datetime, time, timezone
from pathlib import Path

from . import __version__
from .catalog import (ARM_STRATEGY, ExperimentGroup, ValidationError, assign_group, derive_seed,
                      load_catalog, load_children)
from .config import RunConfig, load_config
from .evaluation import EvaluationConfig, SplitWindows, evaluate, render_text
from .evaluation.report import log_span
from .events import EventStore, QualificationPolicy, ingest_events, qualifying_games, write_jsonl
from .recommenders import RecommenderContext, UsageMatrix, assemble_ribbon
from .simulator import simulate

log = logging.getLogger("ribbonrec")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


class InputError(OSError):
    pass


# -- helpers ------------------------------------------------------------------

def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO-8601 date: {text!r}") from None


def _read_lines(path: Path) -> list[str]:
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "alpha", None) is not None:
        cfg = cfg.with_alpha(args.alpha)
    return cfg


def _finite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _dump(obj) -> str:
    return json.dumps(_finite(obj), sort_keys=True, indent=2) + "\n"


def _games_path(data: Path) -> tuple[Path, str]:
    if (data / "games.jsonl").exists() or not (data / "games.csv").exists():
        return data / "games.jsonl", "jsonl"
    return data / "games.csv", "csv"


def _load_data(data: Path, cfg: RunConfig, need_recs=True):
    apps_p, kids_p = data / "apps.jsonl", data / "children.jsonl"
    games_p, fmt = _games_path(data)
    clicks_p, recs_p = data / "clicks.jsonl", data / "recs.jsonl"
    try:
        catalog = load_catalog(_read_lines(apps_p))
    except ValidationError as exc:
        raise ValidationError(f"{apps_p}: {exc}") from None
    try:
        children = load_children(_read_lines(kids_p))
    except ValidationError as exc:
        raise ValidationError(f"{kids_p}: {exc}") from None
    children = [c if c.group is not None else c.with_group(assign_group(c.child_id, cfg.seed))
                for c in children]
    clicks = _read_lines(clicks_p) if clicks_p.exists() else []
    recs = _read_lines(recs_p) if need_recs or recs_p.exists() else []
    store = ingest_events(_read_lines(games_p), clicks, recs, games_format=fmt)
    inputs = {"apps": str(apps_p), "children": str(kids_p), "games": str(games_p),
              "clicks": str(clicks_p), "recs": str(recs_p)}
    return catalog, children, store, inputs


def _manifest(command: str, args, cfg: RunConfig, inputs: dict, **extra) -> dict:
    return {
        "tool_version": __version__,
        "command": command,
        "config_path": args.config,
        "seed": cfg.seed,
        "config": cfg.to_json(),
        "inputs": inputs,
        "arm_strategy": {g.value: s.value for g, s in ARM_STRATEGY.items()},
        "output_dir": str(args.out) if getattr(args, "out", None) else None,
        **extra,
    }


def _write(out: Path, name: str, text: str):
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot write {out / name}: {exc.strerror or exc}") from exc


# -- commands -------------------------------------------------------------------

def cmd_ingest(args) -> int:
    cfg = _config(args)
    catalog, children, store, _ = _load_data(Path(args.data), cfg, need_recs=False)
    print(f"apps: {len(catalog)} accepted")
    print(f"children: {len(children)} accepted")
    for rep in store.reports:
        print(rep.summary())
        for lineno, msg in rep.rejected[: args.show_errors]:
            print(f"  line {lineno}: {msg}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    result = simulate(cfg.sim, cfg.recommender)
    out = Path(args.out)
    for name, text in result.files().items():
        _write(out, name, text)
    _write(out, "manifest.json", _dump(_manifest("simulate", args, cfg, {})))
    print(f"simulated {len(result.children)} children, {len(result.catalog)} apps, "
          f"{len(result.games)} games, {len(result.clicks)} clicks, {len(result.recs)} ribbons -> {out}")
    return EXIT_OK


def cmd_recommend(args) -> int:
    cfg = _config(args)
    catalog, children, store, inputs = _load_data(Path(args.data), cfg, need_recs=False)
    by_id = {c.child_id: c for c in children}
    wanted = args.child or sorted(by_id)
    unknown = [c for c in wanted if c not in by_id]
    if unknown:
        raise ValidationError(f"unknown child id {unknown[0]!r}")
    generated_at = datetime.combine(args.as_of, time(0), tzinfo=timezone.utc)
    rcfg = cfg.recommender
    policy = QualificationPolicy.recommender(rcfg.popularity_min_duration_s, rcfg.outlier_filters)
    view = qualifying_games(store, policy).between(None, generated_at)
    usage = UsageMatrix.from_view(view, [c.child_id for c in children], catalog.app_ids())
    ctx = RecommenderContext(catalog, children, usage, rcfg)
    arm = ExperimentGroup(args.arm) if args.arm else None
    ribbons = []
    for cid in wanted:
        child = by_id[cid]
        strategy = ARM_STRATEGY[arm or child.group]
        seed = derive_seed(cfg.seed, "ribbon", cid, args.as_of.isoformat())
        ribbons.append(assemble_ribbon(child, strategy, ctx, seed, generated_at))
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_jsonl(out / "recs.jsonl", ribbons)
    except OSError as exc:
        raise InputError(f"cannot write {out / 'recs.jsonl'}: {exc.strerror or exc}") from exc
    _write(out, "manifest.json", _dump(_manifest("recommend", args, cfg, inputs, as_of=args.as_of.isoformat(),
                                                 arm=args.arm, children=wanted)))
    print(f"wrote {len(ribbons)} ribbons -> {out / 'recs.jsonl'}")
    return EXIT_OK


def _windows(args, store: EventStore) -> SplitWindows:
    given = [args.train_start, args.train_end, args.test_start, args.test_end]
    if all(v is not None for v in given):
        return SplitWindows(*given)
    base = SplitWindows.from_span(*log_span(store))
    return SplitWindows(
        args.train_start or base.train_start,
        args.train_end or base.train_end,
        args.test_start or base.test_start,
        args.test_end or base.test_end,
    )


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    catalog, children, store, inputs = _load_data(Path(args.data), cfg)
    windows = _windows(args, store)
    ecfg = EvaluationConfig(windows=windows, alpha=cfg.alpha, attribution=cfg.attribution,
                            policy=cfg.policy, mc_iterations=cfg.mc_iterations, seed=cfg.seed)
    report = evaluate(catalog, children, store, ecfg)
    report["config"] = {"alpha": cfg.alpha, "attribution": cfg.attribution,
                        "mc_iterations": cfg.mc_iterations, "seed": cfg.seed,
                        "policy": cfg.to_json()["policy"]}
    out = Path(args.out)
    _write(out, "report.json", _dump(report))
    _write(out, "report.txt", render_text(report))
    _write(out, "manifest.json", _dump(_manifest("evaluate", args, cfg, inputs, windows=windows.to_json())))
    print(f"report -> {out / 'report.json'}")
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.report)
    try:
        report = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from None
    missing = [s for s in ("engagement", "performance", "clicks", "significance") if s not in report]
    if missing:
        raise ValidationError(f"{path}: report missing section(s) {', '.join(missing)}")
    text = render_text(report, args.arm)
    if args.out:
        _write(Path(args.out), "report.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--seed", type=int, help="overrides the config seed")

    p = argparse.ArgumentParser(prog="ribbonrec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", parents=[common], help="validate logs and print acceptance stats")
    s.add_argument("--data", required=True, metavar="DIR")
    s.add_argument("--show-errors", type=int, default=5, metavar="N")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("simulate", parents=[common], help="generate a synthetic world and logs")
    s.add_argument("--out", required=True, metavar="DIR")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("recommend", parents=[common], help="emit recs.jsonl as of a date")
    s.add_argument("--data", required=True, metavar="DIR")
    s.add_argument("--as-of", required=True, type=_iso_date, metavar="DATE")
    s.add_argument("--child", action="append", metavar="ID", help="repeatable; default all children")
    s.add_argument("--arm", choices=["A", "B", "C"], help="force this arm's strategy")
    s.add_argument("--out", required=True, metavar="DIR")
    s.set_defaults(func=cmd_recommend)

    s = sub.add_parser("evaluate", parents=[common], help="metrics and significance -> report.json")
    s.add_argument("--data", required=True, metavar="DIR")
    for flag in ("--train-start", "--train-end", "--test-start", "--test-end"):
        s.add_argument(flag, type=_iso_date, metavar="DATE")
    s.add_argument("--alpha", type=float)
    s.add_argument("--out", required=True, metavar="DIR")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", help="render report.json as text tables")
    s.add_argument("--report", required=True, metavar="PATH")
    s.add_argument("--arm", choices=["A", "B", "C"])
    s.add_argument("--out", metavar="DIR")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
