# commands/witness_command.py
import logging
from fractions import Fraction

from commands.options import parse_blocks, parse_word
from recurdim import cantor_witness, number_theory, recurrence
from recurdim.errors import ValidationError
from recurdim.ifs_core import build_system
from recurdim.potentials import PotentialKind, parse_potential

logger = logging.getLogger(__name__)

MODES = ("levels", "blocks", "single")
DEFAULT_EXPONENT_SHARE = 0.9


class WitnessCommand:
    help = "Recurrence witnesses, the Cantor tree with its mass, and the Hoelder check"
    section = "WITNESS"
    config_defaults = {"potential": "logderiv:t=1", "mode": "levels", "m": 2, "eps": 0.5, "k_max": 1,
                       "blocks": "2", "start_depth": 1, "node_budget": cantor_witness.DEFAULT_NODE_BUDGET,
                       "s_eps": ""}

    def __init__(self, controller):
        self.controller = controller

    def add_arguments(self, parser):
        parser.add_argument("--system", required=True, help="System descriptor")
        parser.add_argument("--potential", help="Potential descriptor")
        parser.add_argument("--mode", choices=MODES, help="levels: full tree; blocks: selections only; single: one word")
        parser.add_argument("--word", help="Word for single mode, e.g. 011 or 1,2")
        parser.add_argument("--m", type=int, help="Block depth m")
        parser.add_argument("--eps", type=float, help="Epsilon of the construction")
        parser.add_argument("--k-max", dest="k_max", type=int, help="Number of generations")
        parser.add_argument("--blocks", help="Blocks per generation: one integer or a list")
        parser.add_argument("--s-eps", dest="s_eps", type=float, help="Hoelder exponent to test")
        parser.add_argument("--start-depth", dest="start_depth", type=int, help="Smallest cylinder depth in the check")
        parser.add_argument("--node-budget", dest="node_budget", type=int, help="Cap on tree nodes")

    def run(self, args) -> int:
        c = self.controller
        d = self.config_defaults
        system = build_system(args.system)
        pot = parse_potential(c.option(args, self.section, "potential", str, d["potential"]))
        mode = c.option(args, self.section, "mode", str, d["mode"])
        if mode not in MODES:
            raise ValidationError(f"unknown witness mode {mode!r}")
        c.resolved["system"] = args.system
        if mode == "single":
            return self.run_single(args, system, pot)

        m = c.option(args, self.section, "m", int, d["m"])
        blocks = parse_blocks(c.option(args, self.section, "blocks", str, d["blocks"]))
        start_depth = c.option(args, self.section, "start_depth", int, d["start_depth"])
        node_budget = c.option(args, self.section, "node_budget", int, d["node_budget"])
        workers, budget = c.resolved["workers"], c.resolved["budget"]

        if mode == "blocks":
            count = blocks if isinstance(blocks, int) else sum(blocks)
            tree = cantor_witness.build_block_tree(system, pot, m, count, budget=budget,
                                                   node_budget=node_budget, workers=workers)
        else:
            eps = c.option(args, self.section, "eps", float, d["eps"])
            k_max = c.option(args, self.section, "k_max", int, d["k_max"])
            tree = cantor_witness.build_levels(system, pot, m, eps, k_max, blocks, budget=budget,
                                               node_budget=node_budget, workers=workers)
        measures = cantor_witness.assign_measure(tree)
        s_eps = c.option(args, self.section, "s_eps", float, None)
        if s_eps is None:
            s_eps = self.default_exponent(tree)
            c.resolved["s_eps"] = s_eps
        holder = cantor_witness.holder_check(tree, measures, s_eps, start_depth)
        logger.info(f"{len(tree.nodes)} tree nodes; Hoelder check at {s_eps:.6g}: "
                    f"{'pass' if holder.passed else 'fail'}")
        payload = {"tree": tree.to_dict(measures), "holder": holder.to_dict(), "s_eps": s_eps}
        c.write_report(args, payload, holder.csv_columns, holder.csv_rows())
        return 0

    def default_exponent(self, tree) -> float:
        locals_ = [n.s_local for n in tree.nodes if n.s_local is not None]
        fallback = DEFAULT_EXPONENT_SHARE * min(locals_) if locals_ else 0.0
        if tree.eps is None:
            return fallback
        bound = cantor_witness.root_gap_bound(tree.m, tree.eps, tree.system.K, tree.system.rho)
        C = bound / tree.eps if tree.flags.get("weight_margin") else 0.0
        s = tree.s_reference if tree.s_reference is not None else tree.s_target
        target = cantor_witness.holder_target(s, C, tree.eps, tree.system.rho)
        if 0 < target < s:
            return target
        logger.warning(f"Target exponent {target:.6g} is not in (0, s(f)); testing {fallback:.6g} instead")
        return fallback

    def run_single(self, args, system, pot) -> int:
        c = self.controller
        if not args.word:
            raise ValidationError("single mode needs --word")
        word = parse_word(args.word)
        witness = recurrence.witness_cylinder(system, pot, word)
        payload = {"system": system.to_dict(), "potential": pot.to_dict(), "witness": witness.to_dict()}
        if system.is_affine:
            payload["J_n"] = recurrence.jn_exact_interval(system, pot, word, witness.radius).to_dict()
            uniform = all(b.slope == Fraction(1, system.base) for b in system.branches)
            if uniform and pot.kind is PotentialKind.LOGDERIV and pot.shift == 0:
                payload["mahler"] = number_theory.mahler_check(system, witness, pot.value).to_dict()
        eps = c.option(args, self.section, "eps", float, None)
        if eps is not None:
            payload["embedding_holds"] = recurrence.embedding_check(system, pot, word, eps)
        rows = [(witness.t, float(witness.radius), float(witness.lo), float(witness.hi), float(witness.diameter))]
        c.write_report(args, payload, ("t", "radius", "lo", "hi", "diameter"), rows)
        return 0
