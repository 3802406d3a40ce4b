import argparse
import logging
import os
from typing import List, Optional

from app.core.config import settings
from app.core.exceptions import AppException, ConfigError
from app.repositories.file_repo import load_config, parse_config, resolve_output_dir, write_matrix, write_report_files
from app.repositories.preset_repo import emit_preset, get_preset, preset_names
from app.schemas.config import ExperimentConfig
from app.services.commutators import commutator_chain
from app.services.model_catalog import list_catalog
from app.services.runner import build_model, run_experiment

logger = logging.getLogger("cli")

# 단일 검사 래퍼 서브커맨드
SINGLE_CHECKS = ("rf", "kappa", "mourre", "ccr", "weyl", "sojourn")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="YAML experiment config path")
    src.add_argument("--preset", help="Shipped preset name (see emit-preset --list)")
    p.add_argument("--out", default=None, help=f"Output directory (default: config output.directory or {settings.OUTPUT_DIR})")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (overrides run.seed)")
    p.add_argument("--jobs", type=int, default=1, help="Worker threads for the r sweep (default: 1)")
    p.add_argument("--format", choices=("json", "csv", "both"), default=None, help="Report formats (overrides output.formats)")


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="python -m app.cli", description="Time operator / Mourre / sojourn-time verification")
    p.add_argument("--log-level", default=settings.LOG_LEVEL, help=f"Logging level (default: {settings.LOG_LEVEL})")
    sub = p.add_subparsers(dest="command", required=True)

    _add_config_args(sub.add_parser("run", help="Run the checks selected in the config"))
    for name in SINGLE_CHECKS:
        _add_config_args(sub.add_parser(name, help=f"Run only the '{name}' check"))

    sub.add_parser("list-catalog", help="List catalog models and default parameters")

    emit = sub.add_parser("emit-preset", help="Write a shipped preset as a YAML config")
    emit.add_argument("name", nargs="?", help="Preset name")
    emit.add_argument("--out", default=None, help="Output file (default: <OUTPUT_DIR>/<name>.yaml)")
    emit.add_argument("--list", action="store_true", help="List preset names")

    export = sub.add_parser("export-matrices", help="Dump H, Phi_j and H'_j of the configured model")
    export.add_argument("--config", default=None, help="YAML experiment config path")
    export.add_argument("--preset", default=None, help="Shipped preset name")
    export.add_argument("--out", default=None, help="Output directory")
    export.add_argument("--matrix-format", choices=("bin", "csv"), default=None, help="HMAT binary or row,col,re,im CSV")
    return p


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    if getattr(args, "preset", None):
        return parse_config(get_preset(args.preset), source=f"preset {args.preset}")
    raise ConfigError(detail="either --config or --preset is required")


def _only(config: ExperimentConfig, check: str) -> ExperimentConfig:
    data = config.model_dump()
    data["run"]["checks"] = [check]
    return parse_config(data, source=f"{check} subcommand")


def _run(args: argparse.Namespace) -> int:
    config = _resolve_config(args)
    if args.command != "run":
        config = _only(config, args.command)
    report = run_experiment(config, seed=args.seed, jobs=args.jobs)
    directory = args.out or config.output.directory
    formats = args.format or config.output.formats
    written = write_report_files(report, directory, formats)
    if config.output.dump_matrices:
        _export(config, directory, config.output.matrix_format)
    failed = report.failed_checks()
    print(f"{len(report.checks)} checks, {len(failed)} failed -> {os.path.dirname(written[0]) if written else directory}")
    for record in failed:
        print(f"  FAIL {record.name}: residual={record.residual:.3e} tolerance={record.tolerance:.1e} [{record.anchor}]")
    return 0 if report.passed else 2


def _export(config: ExperimentConfig, directory: Optional[str], fmt: str) -> List[str]:
    out = resolve_output_dir(directory)
    pair = build_model(config.model)
    derived = commutator_chain(pair, depth=1)
    written = [write_matrix(pair.H.entries, "H", out, fmt)]
    for j, phi in enumerate(pair.Phi):
        written.append(write_matrix(phi.entries, f"Phi_{j + 1}", out, fmt))
    for j, hp in enumerate(derived.hp):
        written.append(write_matrix(hp.entries, f"Hprime_{j + 1}", out, fmt))
    logger.info("exported %d matrices to %s", len(written), out)
    return written


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    # Basic logging configuration for CLI runs
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s [%(name)s] %(message)s",
    )
    try:
        if args.command == "list-catalog":
            print(list_catalog())
            return 0
        if args.command == "emit-preset":
            if args.list or not args.name:
                print("\n".join(preset_names()))
                return 0
            path = args.out or os.path.join(settings.OUTPUT_DIR, f"{args.name}.yaml")
            print(emit_preset(args.name, path))
            return 0
        if args.command == "export-matrices":
            config = _resolve_config(args)
            for path in _export(config, args.out or config.output.directory, args.matrix_format or config.output.matrix_format):
                print(path)
            return 0
        return _run(args)
    except AppException as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    except Exception:
        logger.exception("unexpected error")
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
