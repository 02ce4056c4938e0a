"""Single executable for the library.

Subcommands: ckg (validate | stats), reason, simulate, compare,
synth (ckg | raster), loss (eval).  Every run is deterministic given its
flags and seed; RZ_SEED supplies a default seed when neither a flag nor a
config provides one.  Errors print one machine-parsable line
``error:<category>: <message>`` and exit 1 (domain) or 2 (usage/config).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

from . import evaluation, grid_losses, synth
from .ckg import (
    canonical_json,
    ckg_stats,
    read_ckg,
    validate_ckg,
    write_ckg,
)
from .errors import ConfigError, ParseError, RecognizerError
from .pgm import read_pgm, write_pgm
from .reasoner import ReasonerParams, brute_force_reason, reason
from .softlabel import load_predictions
from .streams import Stream
from .synth import GlyphBox, SynthParams, generate_synthetic_ckg, splice_raster


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors keep the machine-parsable shape
        print(f"error:usage: {message}", file=sys.stderr)
        raise SystemExit(2)


def _default_seed() -> int:
    env = os.environ.get("RZ_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"RZ_SEED must be an integer, got {env!r}") from exc


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False))


def _cmd_ckg(args) -> int:
    if args.action == "validate":
        try:
            document = json.loads(Path(args.file).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ParseError(f"cannot read {args.file}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON in {args.file}: {exc}") from exc
        report = validate_ckg(document)
        if args.json:
            _print_json(report.to_json_dict())
        else:
            for issue in report.issues:
                print(f"{issue.severity}: {issue.entity}: {issue.message}")
            print("ok" if report.ok else "invalid")
        if not report.ok:
            errors = report.errors()
            category = "reference" if any("unknown" in e.message for e in errors) else (
                "duplicate" if any("duplicate" in e.message for e in errors) else "schema"
            )
            print(f"error:{category}: {errors[0].entity}: {errors[0].message}", file=sys.stderr)
            return 1
        return 0

    stats = ckg_stats(read_ckg(args.file))
    if args.json:
        _print_json(stats)
    else:
        rows = [
            ("characters", stats["n_characters"]),
            ("radicals", stats["n_radicals"]),
            ("structures", stats["n_structures"]),
            ("radicals used", stats["n_radicals_used"]),
            ("structures used", stats["n_structures_used"]),
        ]
        width = max(len(name) for name, _ in rows)
        for name, value in rows:
            print(f"{name:<{width}}  {value}")
        print(f"{'radicals/char':<{width}}  ", end="")
        print(
            ", ".join(f"{k}: {v}" for k, v in stats["radicals_per_character"].items())
        )
    return 0


def _cmd_reason(args) -> int:
    graph = read_ckg(args.ckg)
    preds = load_predictions(args.pred)
    if args.oracle:
        ranked = brute_force_reason(graph, preds, theta=args.theta, match_mode=args.match)
    else:
        params = ReasonerParams(
            theta=args.theta,
            top_k=args.top_k,
            cap=args.beam_cap,
            match_mode=args.match,
            max_structures=args.max_structures,
            min_conf=args.min_conf,
        )
        ranked = reason(graph, preds, params)
    if args.json:
        _print_json(ranked.to_json_dict())
    else:
        for cand in ranked.candidates:
            print(f"{cand.id} {cand.p:.6f}")
    if args.out:
        Path(args.out).write_text(
            canonical_json(ranked.to_json_dict()), encoding="utf-8", newline="\n"
        )
    return 0


def _experiment_config(args) -> evaluation.ExperimentConfig:
    config = evaluation.read_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    elif "seed" not in json.loads(Path(args.config).read_text(encoding="utf-8")):
        config = replace(config, seed=_default_seed())
    if args.out_dir is not None:
        config = replace(config, output_dir=args.out_dir)
    threads = args.threads if args.threads is not None else (os.cpu_count() or 1)
    return replace(config, threads=threads)


def _cmd_simulate(args) -> int:
    config = _experiment_config(args)
    report = evaluation.run_experiment(config)
    print(evaluation.render_csv([report]), end="")
    return 0


def _cmd_compare(args) -> int:
    config = _experiment_config(args)
    comparison = evaluation.compare_strategies(config)
    reports = [comparison.strategies[s] for s in config.strategies]
    print(evaluation.render_csv(reports), end="")
    for delta in comparison.deltas:
        z = "na" if delta["z"] is None else f"{delta['z']:.2f}"
        print(
            f"# {delta['a']} - {delta['b']}: {delta['delta_top1']:+.6f} "
            f"(paired se {delta['paired_se']:.6f}, z {z})"
        )
    return 0


def _parse_counts(spec: str) -> dict[int, float]:
    """'1-4' uniform range, '7' single count, or '1:2,2:1' weights."""
    spec = spec.strip()
    try:
        if ":" in spec:
            out = {}
            for part in spec.split(","):
                count, weight = part.split(":")
                out[int(count)] = float(weight)
            return out
        if "-" in spec:
            lo, hi = spec.split("-")
            return {c: 1.0 for c in range(int(lo), int(hi) + 1)}
        return {int(spec): 1.0}
    except ValueError as exc:
        raise ConfigError(f"bad --counts value {spec!r}: {exc}") from exc


def _cmd_synth(args) -> int:
    if args.action == "ckg":
        seed = args.seed if args.seed is not None else _default_seed()
        params = SynthParams(
            n_characters=args.chars,
            n_radicals=args.radicals,
            n_structures=args.structures,
            radical_counts=_parse_counts(args.counts),
            seed=seed,
        )
        graph = generate_synthetic_ckg(params)
        write_ckg(graph, args.out)
        print(f"wrote {args.out}: {len(graph)} characters")
        return 0

    graph = read_ckg(args.ckg)
    glyph_dir = Path(args.glyphs)
    glyphs = {}
    for entry in graph.characters.values():
        for rid in entry.radicals:
            if rid not in glyphs:
                path = glyph_dir / f"{rid}.pgm"
                if not path.exists():
                    raise ParseError(f"missing glyph bitmap {path}")
                glyphs[rid] = read_pgm(path)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else _default_seed()
    for i, entry in enumerate(graph.characters.values()):
        rng = Stream(seed, (i,)).generator() if args.jitter > 0 else None
        rects = synth.layout_with_fallback(
            entry.structure, len(entry.radicals), jitter=args.jitter, rng=rng
        )
        boxes = [GlyphBox(radical=rid, rect=rect) for rid, rect in zip(entry.radicals, rects)]
        raster = splice_raster(glyphs, boxes, canvas=args.size)
        write_pgm(out_dir / f"{entry.id}.pgm", raster)
    print(f"wrote {len(graph)} rasters to {out_dir}")
    return 0


def _cmd_loss(args) -> int:
    target_doc = grid_losses.read_grid_document(args.target)
    pred_doc = grid_losses.read_grid_document(args.pred)
    target, shape = grid_losses.target_from_document(target_doc)
    pred = grid_losses.prediction_from_document(pred_doc)
    breakdown = grid_losses.loss_total(
        target,
        pred,
        shape,
        no_object_weight=args.no_object_weight,
        structure_scale=args.structure_scale,
    )
    if args.json:
        _print_json(breakdown.to_json_dict())
    else:
        for name, value in breakdown.to_json_dict().items():
            print(f"{name:<14} {value:.9f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radreason", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_ckg = sub.add_parser("ckg", help="inspect a knowledge graph file")
    p_ckg.add_argument("action", choices=("validate", "stats"))
    p_ckg.add_argument("file")
    p_ckg.add_argument("--json", action="store_true")
    p_ckg.set_defaults(func=_cmd_ckg)

    p_reason = sub.add_parser("reason", help="rank characters for one prediction file")
    p_reason.add_argument("--ckg", required=True)
    p_reason.add_argument("--pred", required=True)
    p_reason.add_argument("--theta", type=float, default=0.7)
    p_reason.add_argument("--top-k", type=int, default=5)
    p_reason.add_argument("--beam-cap", type=int, default=1000)
    p_reason.add_argument("--match", choices=("exact", "subset"), default="exact")
    p_reason.add_argument("--max-structures", type=int, default=None)
    p_reason.add_argument("--min-conf", type=float, default=None)
    p_reason.add_argument("--oracle", action="store_true", help="use the brute-force path")
    p_reason.add_argument("--out", default=None, help="also write result JSON here")
    p_reason.add_argument("--json", action="store_true")
    p_reason.set_defaults(func=_cmd_reason)

    for name, func in (("simulate", _cmd_simulate), ("compare", _cmd_compare)):
        p = sub.add_parser(name, help=f"{name} from an experiment config")
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--out-dir", default=None)
        p.set_defaults(func=func)

    p_synth = sub.add_parser("synth", help="generate synthetic graphs or rasters")
    synth_sub = p_synth.add_subparsers(dest="action", required=True)
    p_sckg = synth_sub.add_parser("ckg")
    p_sckg.add_argument("--chars", type=int, required=True)
    p_sckg.add_argument("--radicals", type=int, required=True)
    p_sckg.add_argument("--structures", type=int, required=True)
    p_sckg.add_argument("--counts", default="1-4", help="radical-count distribution")
    p_sckg.add_argument("--seed", type=int, default=None)
    p_sckg.add_argument("--out", required=True)
    p_sckg.set_defaults(func=_cmd_synth)
    p_sraster = synth_sub.add_parser("raster")
    p_sraster.add_argument("--ckg", required=True)
    p_sraster.add_argument("--glyphs", required=True)
    p_sraster.add_argument("--size", type=int, default=416)
    p_sraster.add_argument("--jitter", type=float, default=0.0)
    p_sraster.add_argument("--seed", type=int, default=None)
    p_sraster.add_argument("--out", required=True)
    p_sraster.set_defaults(func=_cmd_synth)

    p_loss = sub.add_parser("loss", help="evaluate detector loss math")
    loss_sub = p_loss.add_subparsers(dest="action", required=True)
    p_leval = loss_sub.add_parser("eval")
    p_leval.add_argument("--target", required=True)
    p_leval.add_argument("--pred", required=True)
    p_leval.add_argument("--no-object-weight", type=float, default=0.05)
    p_leval.add_argument("--structure-scale", type=float, default=1.0)
    p_leval.add_argument("--json", action="store_true")
    p_leval.set_defaults(func=_cmd_loss)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except RecognizerError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code


def entry() -> None:  # console-script shim
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
