# commands/pressure_command.py
import logging

from commands.options import parse_grid
from recurdim import thermo
from recurdim.ifs_core import build_system
from recurdim.potentials import parse_potential

logger = logging.getLogger(__name__)


class PressureCommand:
    help = "Tabulate the pressure approximant P_n(s) over a grid of s"
    section = "PRESSURE"
    config_defaults = {"potential": "const:c=0", "n": 8, "s_grid": "0:1:0.1"}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--system", required=True, help="System descriptor, e.g. badic:b=2")
        parser.add_argument("--potential", help="Potential descriptor, e.g. logderiv:t=1")
        parser.add_argument("--n", type=int, help="Cylinder depth")
        parser.add_argument("--s-grid", dest="s_grid", help="Grid 'a:b:step' or comma list")
        parser.add_argument("--sup-weights", dest="sup_weights", action="store_true",
                            help="Use cylinder-sup derivatives instead of periodic points")

    def run(self, args) -> int:
        c = self.controller
        system = build_system(args.system)
        pot = parse_potential(c.option(args, self.section, "potential", str, self.config_defaults["potential"]))
        n = c.option(args, self.section, "n", int, self.config_defaults["n"])
        s_grid = parse_grid(c.option(args, self.section, "s_grid", str, self.config_defaults["s_grid"]))
        c.resolved.update({"system": args.system, "sup_weights": args.sup_weights})

        samples = thermo.pressure_grid(system, pot, s_grid, n, c.resolved["workers"],
                                       c.resolved["budget"], args.sup_weights)
        logger.info(f"Pressure at depth {n} over {len(samples)} grid points")
        payload = {
            "system": system.to_dict(), "potential": pot.to_dict(), "n": n,
            "samples": [{"s": p.s, "n": p.n, "P": p.value} for p in samples],
        }
        c.write_report(args, payload, ("s", "n", "P"), [(p.s, p.n, p.value) for p in samples])
        return 0
