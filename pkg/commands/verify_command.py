# commands/verify_command.py
"""
Closed-form acceptance suite. Each case compares a computed value with an
independent closed form or an exact worked example and prints PASS/FAIL.
"""
import logging
import math
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, List

from recurdim import cantor_witness, number_theory, recurrence, thermo
from recurdim.errors import RecurdimError
from recurdim.ifs_core import build_system
from recurdim.potentials import Potential

logger = logging.getLogger(__name__)


@dataclass
class CaseResult:
    name: str
    expected: Any
    observed: Any
    passed: bool
    error: str = ""


class VerifyCommand:
    help = "Run the closed-form acceptance suite"
    section = "VERIFY"
    config_defaults = {"depth": 6, "tol": 1e-10}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--depth", type=int, help="Depth used for the closed-form Bowen roots")
        parser.add_argument("--tol", type=float, help="Tolerance for closed-form comparisons")

    # --- Cases ---
    def cases(self, n: int, tol: float) -> List[tuple]:
        cases = []
        for b in (2, 3, 5):
            for t in (0.0, 0.5, 1.0, 3.0):
                cases.append((f"badic b={b} logderiv t={t}", 1.0 / (1.0 + t), tol,
                              self._root(f"badic:b={b}", Potential.logderiv(t), n)))
        for t in (0.5, 1.0, 2.0):
            cases.append((f"dyadic digit frequency t={t}",
                          number_theory.closed_form_dimension("dyadic-frequency", t=t), max(tol, 1e-9),
                          self._root("badic:b=2", Potential.digitind(t, 0), n)))
        for t in (0.0, 1.0, 2.0):
            cases.append((f"triadic cantor t={t}", number_theory.closed_form_dimension("cantor-const", t=t), tol,
                          self._root("cantor:b=3,digits=0|2", Potential.logderiv(t), n)))
        cases.append(("richardson model sequence", 1.0, 0.0,
                      lambda: thermo.bowen_extrapolate([(2, 1.5), (4, 1.25)])))
        cases.append(("witness interval of 01", (Fraction(10, 32), Fraction(11, 32)), None, self._witness_interval))
        cases.append(("exact J_2(01)", (Fraction(1, 4), Fraction(5, 12), True, True), None, self._jn_interval))
        cases.append(("reference tree passes at 0.45", True, None, lambda: self._reference_tree(0.45)))
        cases.append(("reference tree fails at 0.55", False, None, lambda: self._reference_tree(0.55)))
        cases.append(("continued fractions of 3/7", ([2, 3], [2, 2, 1]), None,
                      lambda: number_theory.cf_expansions_of_rational(3, 7)))
        cases.append(("|A_q| <= 2q for q <= 50", True, None,
                      lambda: all(len(number_theory.enumerate_Aq(q)) <= 2 * q for q in range(1, 51))))
        cases.append(("inequality chain on cf:amax=2 word 12", True, None,
                      lambda: number_theory.proof_chain(2, 1.0, 0.5, (1, 2)).holds))
        cases.append(("triadic Mahler bridge", True, None, self._mahler))
        return cases

    def _root(self, descriptor: str, pot: Potential, n: int) -> Callable[[], float]:
        c = self.controller
        return lambda: thermo.bowen_root(build_system(descriptor), pot, n, tol=1e-13,
                                         workers=c.resolved["workers"], budget=c.resolved["budget"])

    def _witness_interval(self):
        w = recurrence.witness_cylinder(build_system("badic:b=2"), Potential.logderiv(1), (0, 1))
        return w.lo, w.hi

    def _jn_interval(self):
        span = recurrence.jn_exact_interval(build_system("badic:b=2"), Potential.logderiv(1), (0, 1))
        return span.lo, span.hi, span.lo_open, span.hi_open

    def _reference_tree(self, s_eps: float) -> bool:
        system = build_system("badic:b=2")
        tree = cantor_witness.build_block_tree(system, Potential.const(0), 2, 4, s_target=1.0)
        return cantor_witness.holder_check(tree, cantor_witness.assign_measure(tree), s_eps).passed

    def _mahler(self) -> bool:
        system = build_system("cantor:b=3,digits=0|2")
        pot = Potential.logderiv(1)
        return all(number_theory.mahler_check(system, recurrence.witness_cylinder(system, pot, w), 1).holds
                   for w in [(0, 1), (1, 1, 0), (1, 0, 1, 1)])

    # --- Runner ---
    def run_case(self, name, expected, tol, compute) -> CaseResult:
        try:
            observed = compute()
        except RecurdimError as e:
            return CaseResult(name, expected, None, False, f"{type(e).__name__}: {e}")
        if tol is None:
            passed = observed == expected
        else:
            passed = math.isclose(observed, expected, rel_tol=0.0, abs_tol=tol)
        return CaseResult(name, expected, observed, passed)

    def run(self, args) -> int:
        c = self.controller
        n = c.option(args, self.section, "depth", int, self.config_defaults["depth"])
        tol = c.option(args, self.section, "tol", float, self.config_defaults["tol"])
        results = [self.run_case(*case) for case in self.cases(n, tol)]
        for r in results:
            detail = r.error or f"observed {r.observed}, expected {r.expected}"
            sys.stdout.write(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {detail}\n")
        failed = [r.name for r in results if not r.passed]
        if failed:
            logger.error(f"{len(failed)} of {len(results)} verification cases failed")
        if args.output:
            payload = {"cases": [vars(r) for r in results], "passed": not failed}
            c.write_report(args, payload, ("name", "expected", "observed", "passed"),
                           [(r.name, r.expected, r.observed, r.passed) for r in results])
        return 1 if failed else 0
