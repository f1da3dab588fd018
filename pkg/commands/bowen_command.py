# commands/bowen_command.py
import logging

from commands.options import parse_int_list
from recurdim import thermo
from recurdim.ifs_core import build_system
from recurdim.potentials import parse_potential

logger = logging.getLogger(__name__)


class BowenCommand:
    help = "Solve the Bowen equation at several depths and extrapolate s(f)"
    section = "BOWEN"
    config_defaults = {"potential": "const:c=0", "depths": "4,6,8,10,12",
                       "tol": thermo.DEFAULT_TOL, "delta": thermo.DEFAULT_DELTA, "s_max": ""}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--system", required=True, help="System descriptor")
        parser.add_argument("--potential", help="Potential descriptor")
        parser.add_argument("--depths", help="Depth schedule, e.g. 4,8 or 2:12:2")
        parser.add_argument("--tol", type=float, help="Root tolerance")
        parser.add_argument("--delta", type=float, help="Offset of the pressure bracket around the estimate")
        parser.add_argument("--s-max", dest="s_max", type=float, help="Initial upper end of the root bracket")
        parser.add_argument("--sweep-amax", dest="sweep_amax",
                            help="Also solve on the cf:amax=a subsystems for these a (at the smallest depth)")

    def run(self, args) -> int:
        c = self.controller
        defaults = self.config_defaults
        system = build_system(args.system)
        pot = parse_potential(c.option(args, self.section, "potential", str, defaults["potential"]))
        depths = parse_int_list(c.option(args, self.section, "depths", str, defaults["depths"]))
        tol = c.option(args, self.section, "tol", float, defaults["tol"])
        delta = c.option(args, self.section, "delta", float, defaults["delta"])
        s_max = c.option(args, self.section, "s_max", float, None)
        c.resolved["system"] = args.system
        workers, budget = c.resolved["workers"], c.resolved["budget"]

        report = thermo.dimension_report(system, pot, depths, tol, delta, s_max, workers, budget)
        payload = report.to_dict()
        if args.sweep_amax:
            amaxes = parse_int_list(args.sweep_amax)
            c.resolved["sweep_amax"] = amaxes
            sweep = thermo.truncation_sweep(amaxes, pot, min(depths), tol, workers, budget)
            payload["truncation"] = [{"amax": a, "n": min(depths), "s_n": s} for a, s in sweep]
        logger.info(f"Extrapolated s(f) = {report.extrapolated:.12f}")
        rows = [(x.n, x.s, x.residual) for x in report.samples]
        c.write_report(args, payload, ("n", "s_n", "residual"), rows)
        return 0
