# commands/cover_command.py
import logging

from commands.options import parse_grid
from recurdim import recurrence
from recurdim.ifs_core import build_system
from recurdim.potentials import parse_potential

logger = logging.getLogger(__name__)


class CoverCommand:
    help = "Covering series of the recurrence set over depths N..M"
    section = "COVER"
    config_defaults = {"potential": "const:c=0", "N": 4, "M": 10, "s_grid": "0:1:0.05"}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--system", required=True, help="System descriptor")
        parser.add_argument("--potential", help="Potential descriptor")
        parser.add_argument("--N", dest="N", type=int, help="Smallest depth")
        parser.add_argument("--M", dest="M", type=int, help="Largest depth")
        parser.add_argument("--s-grid", dest="s_grid", help="Grid 'a:b:step' or comma list")

    def run(self, args) -> int:
        c = self.controller
        defaults = self.config_defaults
        system = build_system(args.system)
        pot = parse_potential(c.option(args, self.section, "potential", str, defaults["potential"]))
        N = c.option(args, self.section, "N", int, defaults["N"])
        M = c.option(args, self.section, "M", int, defaults["M"])
        s_grid = parse_grid(c.option(args, self.section, "s_grid", str, defaults["s_grid"]))
        c.resolved["system"] = args.system

        report = recurrence.covering_report(system, pot, N, M, s_grid, c.resolved["workers"], c.resolved["budget"])
        if report.critical_exponent is not None:
            logger.info(f"Covering slopes change sign at s ~ {report.critical_exponent:.6f}")
        c.write_report(args, report.to_dict(), report.csv_columns, report.csv_rows())
        return 0
