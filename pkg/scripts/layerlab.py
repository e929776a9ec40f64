import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

sys.path.append(str(Path(__file__).parent.parent))

from config import settings
from config.run_config import RunConfig, parse_levels
from data.field_io import ArtifactWriter, error_payload
from execution.pipeline import SUBCOMMANDS, PipelineEngine
from utils.logger import setup_logger_for_module
from utils.validators import LayerlabError, NumericalError, ValidationError

# flag -> (RunConfig field, converter)
FLAG_FIELDS = {
    'chart': ('chart', str),
    'p': ('p', float),
    'L': ('L', float),
    'n': ('n', int),
    'n_r': ('n_r', int),
    'n_theta': ('n_theta', int),
    'layer_n_r': ('layer_n_r', int),
    'layer_n_theta': ('layer_n_theta', int),
    'count': ('count', int),
    'robin_weight': ('robin_weight', float),
    'tol': ('tol', float),
    'samples': ('samples', int),
    'eps': ('eps', float),
    'eps_list': ('eps_list', lambda s: tuple(float(v) for v in s.split(','))),
    'levels': ('levels', parse_levels),
    'lambda0': ('lambda0', float),
    'q': ('q', float),
    'varrho': ('varrho', float),
    'sigma': ('sigma', float),
    'params': ('params', str),
    'f2_file': ('f2_file', str),
    'e_file': ('e_file', str),
    'output_dir': ('output_dir', str),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='layerlab', description='Concentration-layer construction toolkit')
    parser.add_argument('subcommand', choices=SUBCOMMANDS)
    parser.add_argument('--config', help='JSON file overriding the flags')
    for flag in FLAG_FIELDS:
        parser.add_argument('--' + flag.replace('_', '-'), dest=flag, default=None)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    """Flags given on the command line, then the JSON file on top."""
    updates = {}
    for flag, (name, convert) in FLAG_FIELDS.items():
        raw = getattr(args, flag)
        if raw is None:
            continue
        try:
            updates[name] = convert(raw)
        except ValueError:
            raise ValidationError(f"Bad value for --{flag.replace('_', '-')}: {raw}", {flag: raw})
    config = replace(RunConfig(), **updates)
    if args.config:
        config = RunConfig.from_json(args.config, base=config)
    return config.validate()


def print_summary(subcommand: str, report: dict, output_dir: str):
    print("\n" + "=" * 60)
    print(f"LAYERLAB {subcommand.upper()}")
    print("=" * 60)
    for key, value in report.items():
        if isinstance(value, (int, float, str, bool)):
            print(f"{key:<28} {value}")
    print(f"{'artifacts':<28} {output_dir}")
    print("=" * 60 + "\n")


def report_failure(subcommand: str, e: LayerlabError, config: Optional[RunConfig],
                   writer: Optional[ArtifactWriter], logger) -> int:
    logger.error(f"{subcommand} failed: {e.message}")
    config_hash = config.config_hash() if config is not None else None
    version = config.format_version if config is not None else settings.FORMAT_VERSION
    if writer is not None:
        writer.write_error(e)
    print(error_payload(e, config_hash, version))
    return e.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger = setup_logger_for_module('layerlab', settings.LOGS_DIR)

    config = None
    writer = None
    try:
        config = config_from_args(args)
        writer = ArtifactWriter(config.output_dir, config.config_hash(), config.format_version)
        engine = PipelineEngine(config, writer)
        report = engine.run(args.subcommand)
    except LayerlabError as e:
        return report_failure(args.subcommand, e, config, writer, logger)
    except (np.linalg.LinAlgError, ArithmeticError, ValueError) as e:
        logger.error(f"Unhandled numerical failure in {args.subcommand}: {e}", exc_info=True)
        wrapped = NumericalError(f"{type(e).__name__}: {e}", {"exception": type(e).__name__})
        return report_failure(args.subcommand, wrapped, config, writer, logger)

    print_summary(args.subcommand, report, config.output_dir)
    return 0


if __name__ == '__main__':
    sys.exit(main())
