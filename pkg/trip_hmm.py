#!/usr/bin/env python3
"""
Trip HMM - learn an HMM of tourist trips from reviews and predict next visits.
Subcommands run one pipeline stage each and hand off through files.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

# Add current directory to path for imports
sys.path.insert(0, str(Path(__file__).parent))

from core.config import PipelineConfig, load_config
from core.errors import InputError, TripHmmError
from core import pipeline
from ui.console_ui import ConsoleUI

_log = logging.getLogger("trip_hmm")

DEFAULT_PATHS = {
    'reviews': 'reviews.jsonl',
    'sequences': 'sequences.txt',
    'fpt': 'fpt.json',
    'automaton': 'automaton.json',
    'hmm': 'hmm.json',
    'updated_hmm': 'hmm_updated.json',
    'predictions': 'predictions.json',
    'report': 'report.json',
}


def _path(value: Optional[str], cfg: PipelineConfig, key: str) -> str:
    """Explicit flag, then the config's paths section, then the built-in name."""
    if value is not None:
        return value
    return cfg.paths.get(key, DEFAULT_PATHS[key])


def _parse_prefix(tokens: List[str]) -> List[int]:
    items = []
    for token in ' '.join(tokens).replace(',', ' ').split():
        try:
            item = int(token)
        except ValueError:
            raise InputError(f"prefix items must be integers, got {token!r}")
        if item < 0:
            raise InputError(f"prefix items must be non-negative, got {item}")
        items.append(item)
    return items


def cmd_ingest(args, cfg, ui):
    return pipeline.run_ingest(cfg, _path(args.input, cfg, 'reviews'), _path(args.output, cfg, 'sequences'))


def cmd_build(args, cfg, ui):
    return pipeline.run_build(_path(args.input, cfg, 'sequences'), _path(args.output, cfg, 'fpt'))


def cmd_infer(args, cfg, ui):
    cfg = cfg.with_overrides('gi', alpha=args.alpha, mode=args.mode,
                             force_no_merge=True if args.no_merge else None,
                             include_termination=False if args.exclude_termination else None)
    return pipeline.run_infer(cfg, _path(args.input, cfg, 'fpt'), _path(args.output, cfg, 'automaton'))


def cmd_convert(args, cfg, ui):
    return pipeline.run_convert(_path(args.input, cfg, 'automaton'), _path(args.output, cfg, 'hmm'),
                                stochastic_output=args.stochastic, labels_path=args.labels)


def cmd_predict(args, cfg, ui):
    cfg = cfg.with_overrides('predict', length=args.length, top_k=args.top_k,
                             include_end_marker=False if args.no_end_marker else None,
                             keep_partial=True if args.keep_partial else None)
    prefix = _parse_prefix(args.prefix)
    result = pipeline.run_predict(cfg, _path(args.input, cfg, 'hmm'), prefix, args.output)
    ui.item_labels = result.item_labels
    ui.render_predictions(prefix, result.value)
    return result


def cmd_update(args, cfg, ui):
    cfg = cfg.with_overrides('eval', mape_threshold=args.mape_threshold, max_iters=args.max_iters,
                             scope=args.scope)
    observers = [ui] if args.progress else []
    result = pipeline.run_update(cfg, _path(args.input, cfg, 'hmm'), _path(args.sequences, cfg, 'sequences'),
                                 _path(args.output, cfg, 'updated_hmm'), observers)
    if not result.value.converged:
        ui.show_message(f"MAPE still {result.value.mapes[-1]:.2%} after {result.value.iterations} iterations")
    return result


def cmd_validate(args, cfg, ui):
    cfg = cfg.with_overrides('eval', mape_threshold=args.mape_threshold, scope=args.scope,
                             prediction_split=args.split, anomaly_bound=args.anomaly_bound)
    result = pipeline.run_validate(cfg, _path(args.input, cfg, 'hmm'), _path(args.sequences, cfg, 'sequences'),
                                   _path(args.output, cfg, 'report'))
    outcome = result.value
    ui.render_validation({
        'sequences': outcome.sequences.to_dict(),
        'predictions': dict(outcome.predictions.to_dict(), split=cfg.eval.prediction_split),
        'relaxation': outcome.relaxation.to_dict(),
    })
    return result


def cmd_generate(args, cfg, ui):
    return pipeline.run_generate(cfg, args.model, args.n, _path(args.output, cfg, 'sequences'),
                                 automaton_path=args.automaton)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="JSON config file (default: pipeline_config.json if present)")
    common.add_argument("--seed", type=int, default=None, help="Seed for every random choice")
    common.add_argument("--stats", action="store_true", help="Print the stage's stats")
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(prog="trip_hmm", description="Tourist trip HMM pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="Reviews JSONL -> sequence file")
    p.add_argument("--input", help="Reviews JSONL")
    p.add_argument("--output", help="Sequence file to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", parents=[common], help="Sequences -> frequency prefix tree")
    p.add_argument("--input", help="Sequence file")
    p.add_argument("--output", help="Tree JSON to write")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("infer", parents=[common], help="Prefix tree -> frequency automaton")
    p.add_argument("--input", help="Tree JSON")
    p.add_argument("--output", help="Automaton JSON to write")
    p.add_argument("--alpha", type=float, default=None, help="Hoeffding confidence (0 < alpha < 1)")
    p.add_argument("--mode", choices=["relaxed", "full"], default=None, help="Compatibility test")
    p.add_argument("--no-merge", action="store_true", help="Keep the tree as the automaton")
    p.add_argument("--exclude-termination", action="store_true",
                   help="Leave termination out of the compatibility test")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("convert", parents=[common], help="Frequency automaton -> HMM")
    p.add_argument("--input", help="Automaton JSON")
    p.add_argument("--output", help="HMM JSON to write")
    p.add_argument("--stochastic", default=None, help="Also write the stochastic automaton here")
    p.add_argument("--labels", default=None, help="Ingest report carrying item labels")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("predict", parents=[common], help="Rank suffixes after a prefix")
    p.add_argument("prefix", nargs="*", help="Observed items, e.g. \"0 5\"")
    p.add_argument("--input", help="HMM JSON")
    p.add_argument("--output", default=None, help="Predictions JSON to write")
    p.add_argument("--length", type=int, default=None, help="Suffix length L")
    p.add_argument("--top-k", type=int, default=None, help="Keep the k most probable suffixes")
    p.add_argument("--no-end-marker", action="store_true", help="Drop suffixes closed by #")
    p.add_argument("--keep-partial", action="store_true", help="Keep intermediate suffixes too")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("update", parents=[common], help="Baum-Welch until the MAPE threshold")
    p.add_argument("--input", help="HMM JSON")
    p.add_argument("--sequences", help="Sequence file")
    p.add_argument("--output", help="Updated HMM JSON to write")
    p.add_argument("--mape-threshold", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--scope", default=None, help="all, length2, length:K or top:N")
    p.add_argument("--progress", action="store_true", help="Print every iteration")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("validate", parents=[common], help="MAPE report and relaxation check")
    p.add_argument("--input", help="HMM JSON")
    p.add_argument("--sequences", help="Sequence file")
    p.add_argument("--output", help="Report JSON (CSV and plot data are written next to it)")
    p.add_argument("--mape-threshold", type=float, default=None, help="APE above which a sequence is listed")
    p.add_argument("--scope", default=None, help="all, length2, length:K or top:N")
    p.add_argument("--split", type=int, default=None, help="Suffix length |B| for prediction validation")
    p.add_argument("--anomaly-bound", type=float, default=None, help="Relaxation variation bound")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", parents=[common], help="Sample a synthetic sequence corpus")
    p.add_argument("--model", default="five-state", choices=sorted(pipeline.SYNTHETIC_MODELS))
    p.add_argument("--automaton", default=None, help="Stochastic automaton JSON to sample instead")
    p.add_argument("-n", type=int, default=10000, help="Number of sequences")
    p.add_argument("--output", help="Sequence file to write")
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    ui = ConsoleUI()

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        result = args.func(args, cfg, ui)
        for path in result.outputs:
            _log.info("wrote %s", path)
        if args.stats:
            ui.render_stats(args.command, result.stats)
        return 0
    except InputError as e:
        ui.show_error(str(e))
        for diagnostic in e.diagnostics:
            ui.show_error(f"  {diagnostic}")
        return e.exit_code
    except TripHmmError as e:
        ui.show_error(str(e))
        return e.exit_code
    except Exception as e:
        _log.debug("unexpected failure", exc_info=True)
        ui.show_error(f"unexpected failure: {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
