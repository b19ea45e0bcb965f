"""Command-line entry points.

Exit codes: 0 success, 2 bad input, 3 success with degraded views, 4 abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import metrics, pipeline, scenegen
from .errors import HomerError, PipelineAbort, ValidationError
from .oracles import (
    BuiltinInpainter,
    BuiltinMatcher,
    BuiltinSegmenter,
    OracleSet,
    SubprocessInpainter,
    SubprocessMatcher,
    SubprocessSegmenter,
)
from .pipeline import PipelineConfig, ViewSet, config_from_json
from .prompts import PromptSet

log = logging.getLogger("homer")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGRADED = 3
EXIT_ABORT = 4

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = _LEVELS.get(os.environ.get("HOMER_LOG", "warn").lower(), logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def _load_json(path, what: str) -> dict:
    p = Path(path)
    if not p.exists():
        raise ValidationError(f"{what} file not found: {p}")
    try:
        return json.loads(p.read_text())
    except ValueError as exc:
        raise ValidationError(f"{what} file {p} is not valid JSON: {exc}") from exc


def _build_oracles(args) -> OracleSet:
    matcher = SubprocessMatcher(args.oracle_cmd_matcher) if args.oracle_cmd_matcher else BuiltinMatcher()
    segmenter = (
        SubprocessSegmenter(args.oracle_cmd_segmenter)
        if args.oracle_cmd_segmenter
        else BuiltinSegmenter(tol=12.0, max_region_frac=1 / 3)
    )
    inpainter = SubprocessInpainter(args.oracle_cmd_inpainter) if args.oracle_cmd_inpainter else BuiltinInpainter()
    return OracleSet(matcher=matcher, segmenter=segmenter, inpainter=inpainter)


def _build_config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if getattr(args, "config", None):
        cfg = config_from_json(_load_json(args.config, "config"))
    if getattr(args, "seed", None) is not None:
        import dataclasses

        cfg = dataclasses.replace(
            cfg,
            ransac=dataclasses.replace(cfg.ransac, rng_seed=args.seed),
            anchor=dataclasses.replace(
                cfg.anchor, sc=dataclasses.replace(cfg.anchor.sc, rng_seed=args.seed + 1)
            ),
        )
    return cfg


def cmd_gen_scene(args) -> int:
    spec = scenegen.spec_from_json(_load_json(args.spec, "scene spec"))
    manifest = scenegen.generate(spec, args.out)
    print(manifest)
    return EXIT_OK


def cmd_run(args) -> int:
    vs = ViewSet.from_manifest(args.manifest)
    prompts = PromptSet.from_json(_load_json(args.prompts, "prompts"))
    cfg = _build_config(args)
    oracles = _build_oracles(args)
    try:
        result = pipeline.run(vs, prompts, oracles, cfg, args.out)
    except (PipelineAbort, ValidationError) as exc:
        # Inputs parsed but the pipeline refused to start: that is an abort.
        print(f"abort: {exc}", file=sys.stderr)
        _write_abort_report(args.out, exc)
        return EXIT_ABORT
    degraded = result.degraded_views
    print(f"wrote {result.out_dir} ({len(result.views)} views, " f"{len(degraded)} degraded)")
    if degraded:
        print(f"degraded views: {degraded}", file=sys.stderr)
        return EXIT_DEGRADED
    return EXIT_OK


def _write_abort_report(out_dir, exc) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(
        json.dumps({"aborted": True, "error": str(exc)}, indent=1, sort_keys=True)
    )


def cmd_eval(args) -> int:
    gt = Path(args.gt)
    if not gt.is_dir():
        raise ValidationError(f"gt directory not found: {gt}")
    report = metrics.evaluate_run(args.run, gt, use_coarse=args.coarse)
    agg = report.aggregates
    line = ", ".join(
        f"{name} mean={vals['mean']:.4f} min={vals['min']:.4f}"
        for name, vals in agg.items()
        if vals["mean"] is not None
    )
    print(line or "nothing evaluated")
    if report.missing:
        for m in report.missing:
            print(f"missing: {m}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    vs = ViewSet.from_manifest(args.manifest)
    cfg = _build_config(args)
    oracles = _build_oracles(args)
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).resolve().parent.parent.parent / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    serve(vs, oracles, cfg, args.out, args.port, ui_dir=ui_dir, host=args.host)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="homer", description="Multi-view object removal toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-scene", help="render a synthetic test scene")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_gen_scene)

    p = sub.add_parser("run", help="run the removal pipeline")
    p.add_argument("--manifest", required=True)
    p.add_argument("--prompts", required=True, help="prompt set JSON")
    p.add_argument("--config", default=None, help="pipeline config JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--oracle-cmd-matcher", default=None)
    p.add_argument("--oracle-cmd-segmenter", default=None)
    p.add_argument("--oracle-cmd-inpainter", default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="score a run against scene ground truth")
    p.add_argument("--run", required=True, help="pipeline output directory")
    p.add_argument("--gt", required=True, help="scene gt/ directory")
    p.add_argument("--coarse", action="store_true", help="score coarse masks instead of refined")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="serve the annotation API/UI")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--out", default="homer_runs")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ui-dir", default=None)
    p.add_argument("--oracle-cmd-matcher", default=None)
    p.add_argument("--oracle-cmd-segmenter", default=None)
    p.add_argument("--oracle-cmd-inpainter", default=None)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineAbort as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except HomerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
