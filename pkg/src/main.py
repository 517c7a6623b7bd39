"""Command-line entry point for the hypercol toolkit."""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import ValidationError as PydanticValidationError

from config.settings import settings
from core.result_store import result_store
from exceptions import HypercolException, ValidationError
from models.experiment import ExperimentConfig, ExperimentKind
from models.schemas import build_model
from services.experiment_service import experiment_service
from utils.logger import configure_application_logging, get_logger

logger = get_logger(__name__)

# argparse dest -> ExperimentConfig field
_FLAG_FIELDS = {
    "q": "q",
    "k": "k",
    "c": "c",
    "n": "n",
    "m": "m",
    "trials": "trials",
    "seed": "seed",
    "L": "L",
    "depth": "depth_budget",
    "planted": "planted",
    "workers": "workers",
    "frozen_sample": "frozen_sample",
    "samples": "samples",
    "directions": "directions",
    "timings": "include_timings",
    "out": "out",
    "format": "format",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypercol",
        description="Random hypergraph colouring: thresholds, cores, frozen vertices, "
        "cycle statistics and moment landscapes.",
    )
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ...")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", type=int, nargs="+", help="colour counts (grid)")
    common.add_argument("--k", type=int, nargs="+", help="edge arities (grid)")
    common.add_argument("--c", type=float, nargs="+", help="edge densities (grid)")
    common.add_argument("--n", type=int, help="vertex count")
    common.add_argument("--m", type=int, help="explicit edge count (c = m / n)")
    common.add_argument("--trials", type=int)
    common.add_argument("--seed", type=int, help="trial i uses seed + i")
    common.add_argument("--L", type=int, help="longest cycle length counted")
    common.add_argument("--depth", type=int, help="recolouring depth budget")
    common.add_argument("--planted", action="store_true", default=None)
    common.add_argument("--workers", type=int)
    common.add_argument("--frozen-sample", type=int, dest="frozen_sample")
    common.add_argument("--samples", type=int, help="landscape probes")
    common.add_argument("--directions", type=int, help="quadratic-check directions")
    common.add_argument("--timings", action="store_true", default=None)
    common.add_argument("--out", type=Path)
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--summary", action="store_true", help="write aggregate rows as CSV")
    common.add_argument("--config", type=Path, help="JSON file; its keys override flags")

    for kind in ExperimentKind:
        sub.add_parser(kind.value, parents=[common], help=f"run the {kind.value} experiment")

    serve = sub.add_parser("serve", help="start the HTTP API")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: Dict[str, Any] = {"kind": args.command}
    for dest, field in _FLAG_FIELDS.items():
        value = getattr(args, dest, None)
        if value is not None:
            data[field] = value
    if args.config is not None:
        try:
            overrides = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ValidationError(f"cannot read config file {args.config}: {e}") from e
        if not isinstance(overrides, dict):
            raise ValidationError("config file must hold a JSON object")
        overrides.pop("kind", None)
        data.update(overrides)
    return build_model(ExperimentConfig, **data)


def serve(host: str, port: int) -> int:
    import uvicorn

    uvicorn.run(
        "app:app",
        host=host,
        port=port,
        reload=settings.debug,
        log_level=settings.log_level.lower(),
    )
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_application_logging(
        level=(args.log_level or settings.log_level).upper(),
        include_colors=sys.stderr.isatty(),
        log_file=settings.log_file,
    )

    if args.command == "serve":
        return serve(args.host, args.port)

    try:
        config = build_config(args)
        result = experiment_service.run(config)
        if config.out is not None:
            result_store.write(result, config.out, config.format, summary=args.summary)
        else:
            sys.stdout.write(result_store.render(result, config.format, summary=args.summary))
        return 0
    except HypercolException as e:
        logger.error(f"{type(e).__name__}: {e.message} {e.details or ''}".rstrip())
        return e.exit_code
    except PydanticValidationError as e:
        logger.error(f"invalid configuration: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
