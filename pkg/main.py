# FILE: main.py
import argparse
import configparser
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional

from commands.bowen_command import BowenCommand
from commands.cover_command import CoverCommand
from commands.options import add_common_arguments
from commands.pressure_command import PressureCommand
from commands.quad_command import QuadCommand
from commands.verify_command import VerifyCommand
from commands.witness_command import WitnessCommand
from recurdim import reporting, resources
from recurdim.errors import RecurdimError, ValidationError
from recurdim.ifs_core import DEFAULT_BUDGET

logger = logging.getLogger(__name__)

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
APP_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG_PATH = os.path.join(APP_DIR, 'config.ini')


class CliParser(argparse.ArgumentParser):
    """argparse parser that reports usage errors as ValidationError (exit 1)."""
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


class RecurdimApp:
    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or DEFAULT_CONFIG_PATH
        self.config = configparser.ConfigParser()
        self.notes: Optional[reporting.ReportLogHandler] = None
        self.resolved: Dict[str, Any] = {}

        self.commands = {}
        self.command_classes = {
            "pressure": PressureCommand, "bowen": BowenCommand,
            "cover": CoverCommand, "witness": WitnessCommand,
            "quad": QuadCommand, "verify": VerifyCommand,
        }
        self.create_all_commands()

    def create_all_commands(self):
        for name, CommandClass in self.command_classes.items():
            logger.debug(f"Creating command instance for: {name}")
            self.commands[name] = CommandClass(self)

    def load_config(self, path: Optional[str] = None):
        if path:
            if not os.path.exists(path):
                raise ValidationError(f"config file not found: {path}")
            self.config_path = path
        elif not os.path.exists(self.config_path):
            self.create_default_config(self.config_path)
        self.config = configparser.ConfigParser()
        self.config.read(self.config_path)

    def create_default_config(self, path):
        logger.info(f"Creating default config file at {path}")
        dc = configparser.ConfigParser()
        dc['RUN'] = {'budget': str(DEFAULT_BUDGET), 'format': 'json'}
        for name, command in self.commands.items():
            defaults = getattr(command, 'config_defaults', None)
            if defaults:
                dc[command.section] = {k: str(v) for k, v in defaults.items()}
        dc['PRECISION'] = {'dps': '50'}
        try:
            with open(path, 'w') as f:
                dc.write(f)
        except OSError as e:
            logger.error(f"Failed to write default config: {e}")

    # --- Option resolution: CLI flag > environment > config.ini > built-in ---
    def option(self, args, section: str, key: str, cast: Callable[[str], Any], default: Any) -> Any:
        value = getattr(args, key, None)
        if value is None:
            raw = self.config.get(section, key, fallback=None)
            if raw is not None and raw.strip():
                try:
                    value = cast(raw)
                except (ValueError, RecurdimError):
                    raise ValidationError(f"invalid value {raw!r} for [{section}] {key} in {self.config_path}") from None
            else:
                value = default
        self.resolved[key] = value
        return value

    def resolve_run_options(self, args) -> Dict[str, Any]:
        if args.workers is not None:
            workers = args.workers
        elif os.environ.get(resources.WORKERS_ENV, "").strip():
            workers = resources.default_workers()
        else:
            workers = self.config.getint('RUN', 'workers', fallback=0) or resources.default_workers()
        if workers < 1:
            raise ValidationError(f"worker count must be >= 1, got {workers}")
        budget = self.option(args, 'RUN', 'budget', int, DEFAULT_BUDGET)
        if budget < 1:
            raise ValidationError(f"budget must be positive, got {budget}")
        fmt = "csv" if args.csv else self.config.get('RUN', 'format', fallback='json')
        self.resolved.update({"command": args.command, "workers": workers, "format": fmt})
        return self.resolved

    def build_parser(self) -> argparse.ArgumentParser:
        common = CliParser(add_help=False)
        add_common_arguments(common)
        parser = CliParser(prog="recurdim", description="Pressure, Bowen roots and recurrence witnesses for finite conformal IFS.")
        subparsers = parser.add_subparsers(dest="command", required=True)
        for name, command in self.commands.items():
            sub = subparsers.add_parser(name, parents=[common], help=command.help)
            command.add_arguments(sub)
        return parser

    def setup_logging(self, args):
        level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
        logging.basicConfig(level=level, format=LOG_FORMAT)
        logging.getLogger().setLevel(level)

    # --- Report output ---
    def write_report(self, args, payload: dict, columns=None, rows=None):
        payload["config"] = dict(self.resolved)
        payload["notes"] = list(self.notes.notes) if self.notes else []
        if self.resolved.get("format") == "csv" and columns is not None:
            text = reporting.dumps_csv(columns, rows)
        else:
            text = reporting.dumps_report(payload)
        reporting.emit(text, args.output)

    def run(self, argv: Optional[List[str]] = None) -> int:
        self.resolved = {}
        try:
            args = self.build_parser().parse_args(argv)
            self.setup_logging(args)
            self.load_config(args.config)
            self.resolve_run_options(args)
            command = self.commands[args.command]
            with reporting.capture_notes() as handler:
                self.notes = handler
                return command.run(args)
        except RecurdimError as e:
            logger.error(f"{type(e).__name__}: {e}")
            return e.exit_code
        except Exception as e:
            logger.error(f"Command failed: {e}", exc_info=True)
            return 1
        finally:
            self.notes = None


def main(argv: Optional[List[str]] = None) -> int:
    return RecurdimApp().run(argv)


if __name__ == "__main__":
    sys.exit(main())
