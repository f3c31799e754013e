"""
Main Execution Script for the Phase-Adaptive Scheduler.

Usage:
    phasesched <mode> --config <path> [--seed N] [--out DIR] [--override <policy>] [--workers N]

Modes: clone, train-stage1, train-stage2, eval, ablate, diagnose.
On failure a machine-readable error JSON goes to stdout and <out>/error.json.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

# Add current directory to path so imports work
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from models import ExperimentConfig, Mode, ScheduleOverride
from models.errors import PhaseSchedError, RejectedInputError
from harness.experiments import run_ablation, run_clone, run_diagnose, run_eval, train_stage

logger = logging.getLogger("Main")

EXIT_FAILURE = 1
EXIT_REJECTED_INPUT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phasesched", description="Phase-adaptive compute scheduling experiments.")
    parser.add_argument("mode", choices=[m.value for m in Mode])
    parser.add_argument("--config", type=Path, default=None, help="Experiment JSON; omitted means all defaults.")
    parser.add_argument("--seed", type=int, default=None, help="Overrides the config's master seed.")
    parser.add_argument("--out", type=Path, default=None, help="Overrides the config's output directory.")
    parser.add_argument("--override", choices=[o.value for o in ScheduleOverride], default=None,
                        help="Fixed policy to evaluate or diagnose.")
    parser.add_argument("--workers", type=int, default=None, help="Concurrent evaluation workers.")
    parser.add_argument("--verbose", action="store_true", help="DEBUG logging (per-step executor decisions).")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file first, then flag overrides; the merged result is validated once."""
    overrides = {"mode": args.mode}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    if args.override is not None:
        overrides["override"] = args.override
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.config is None:
        return ExperimentConfig.model_validate(overrides)
    return ExperimentConfig.from_file(args.config, **overrides)


def dispatch(config: ExperimentConfig) -> dict:
    if config.mode == Mode.CLONE:
        return run_clone(config)
    if config.mode == Mode.TRAIN_STAGE1:
        train_stage(config, 1)
        return {"checkpoint": str(Path(config.output_dir) / "stage1.json")}
    if config.mode == Mode.TRAIN_STAGE2:
        train_stage(config, 2)
        return {"checkpoint": str(Path(config.output_dir) / "stage2.json")}
    if config.mode == Mode.EVAL:
        return run_eval(config)
    if config.mode == Mode.ABLATE:
        return run_ablation(config)
    return run_diagnose(config)


def write_error(exc: Exception, mode: str, out: Optional[Path]) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "mode": mode}
    print(json.dumps(payload, sort_keys=True))
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
            with open(out / "error.json", 'w') as f:
                json.dump(payload, f, indent=2, sort_keys=True)
        except OSError as e:
            logger.error(f"❌ Could not write error.json to {out}: {e}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)]
    )

    out = args.out
    try:
        config = load_config(args)
        out = Path(config.output_dir)
        logger.info(f"🚀 phasesched {config.mode.value} (seed={config.seed}, out={out}, "
                    f"config={config.config_hash()[:12]})")
        result = dispatch(config)
    except (RejectedInputError, ValidationError, json.JSONDecodeError) as e:
        logger.error(f"❌ Rejected input: {e}")
        write_error(e, args.mode, out)
        return EXIT_REJECTED_INPUT
    except PhaseSchedError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        write_error(e, args.mode, out)
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"❌ Unexpected {type(e).__name__}: {e}")
        write_error(e, args.mode, out)
        return EXIT_FAILURE

    # --- REPORTING ---
    logger.info("=" * 50)
    logger.info(f"📊 {config.mode.value.upper()} COMPLETE")
    logger.info("=" * 50)
    if "aggregate" in result:
        agg = result["aggregate"]
        logger.info(f"Success: {agg['success_rate']:.2%} | Speedup: {agg['speedup']:.2f}x | "
                    f"Mean rho: {agg['mean_rho']:.4f}")
    for fail in result.get("failures", [])[:20]:
        logger.info(f"❌ {fail['reason']}: {fail['count']} seeds (e.g. {fail['seeds'][:5]})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
