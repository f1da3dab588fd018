# commands/quad_command.py
import logging
from fractions import Fraction

from commands.options import parse_int_list, parse_word
from recurdim import number_theory
from recurdim.errors import ValidationError

logger = logging.getLogger(__name__)

MODES = ("aq", "dtau", "chain")


def parse_real(text: str):
    """'0.25', '3/7' (exact) or 'period:2,3' (a purely periodic surd)."""
    text = str(text).strip()
    if text.startswith("period:"):
        return number_theory.surd_from_period(parse_word(text[len("period:"):]))
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse real {text!r}") from None
    return value if "/" in text else float(value)


class QuadCommand:
    help = "Quadratic surds A_q, D(tau) scans and the continued-fraction inequality chain"
    section = "QUAD"
    config_defaults = {"mode": "aq", "q": "1:10", "tau": 2.0, "q_max": 50, "amax": 2, "eps": 0.5}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--mode", choices=MODES, help="aq: dump A_q; dtau: scan x; chain: witness inequalities")
        parser.add_argument("--q", help="Denominators for the A_q dump, e.g. 2,3 or 1:20")
        parser.add_argument("--x", help="Point to scan: 0.25, 3/7 or period:2,3")
        parser.add_argument("--tau", type=float, help="Exponent tau")
        parser.add_argument("--q-max", dest="q_max", type=int, help="Largest q in the scan")
        parser.add_argument("--amax", type=int, help="Digit bound of the continued-fraction subsystem")
        parser.add_argument("--eps", type=float, help="Potential offset eps for the chain")
        parser.add_argument("--word", help="Continued-fraction digits for the chain, e.g. 1,2")

    def run(self, args) -> int:
        c = self.controller
        d = self.config_defaults
        mode = c.option(args, self.section, "mode", str, d["mode"])
        dps = c.option(args, "PRECISION", "dps", int, number_theory.DEFAULT_DPS)
        if mode == "aq":
            qs = parse_int_list(c.option(args, self.section, "q", str, d["q"]))
            sets = [number_theory.enumerate_Aq(q) for q in qs]
            rows = [row for aq in sets for row in aq.csv_rows()]
            c.write_report(args, {"sets": [aq.to_dict() for aq in sets]},
                           number_theory.AqSet.csv_columns, rows)
            return 0

        tau = c.option(args, self.section, "tau", float, d["tau"])
        if mode == "dtau":
            if not args.x:
                raise ValidationError("dtau mode needs --x")
            x = parse_real(args.x)
            q_max = c.option(args, self.section, "q_max", int, d["q_max"])
            c.resolved["x"] = args.x
            witnesses = number_theory.dtau_membership(x, tau, q_max, c.resolved["workers"],
                                                      c.resolved["budget"], dps)
            payload = {"x": args.x, "tau": tau, "q_max": q_max, "witnesses": [w.to_dict() for w in witnesses],
                       "scan_only": True}
            rows = [(w.q, w.distance, w.threshold, " ".join(map(str, w.nearest.period))) for w in witnesses]
            c.write_report(args, payload, ("q", "distance", "threshold", "period"), rows)
            return 0

        if mode == "chain":
            if not args.word:
                raise ValidationError("chain mode needs --word")
            amax = c.option(args, self.section, "amax", int, d["amax"])
            eps = c.option(args, self.section, "eps", float, d["eps"])
            c.resolved["word"] = args.word
            report = number_theory.proof_chain(amax, tau, eps, parse_word(args.word), dps)
            rows = [(r["point"], r["x"], r["shift"], r["to_x0"], r["to_aq"], r["cap"], all(r["checks"].values()))
                    for r in report.rows]
            c.write_report(args, report.to_dict(), ("point", "x", "shift", "to_x0", "to_aq", "cap", "holds"), rows)
            return 0 if report.holds else 1

        raise ValidationError(f"unknown quad mode {mode!r}")
