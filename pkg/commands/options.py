# commands/options.py
# Option parsing shared by the command modules: grids, integer lists and
# the descriptor/worker/budget options every command accepts.

from fractions import Fraction
from typing import List, Union

import numpy as np

from recurdim.errors import ValidationError


def parse_grid(text: str) -> List[float]:
    """'a:b:step' (inclusive of b up to rounding) or a comma list."""
    text = str(text).strip()
    try:
        if ":" in text:
            start, stop, step = (float(Fraction(p)) for p in text.split(":"))
            if step <= 0 or stop < start:
                raise ValidationError(f"grid {text!r} needs step > 0 and start <= stop")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(Fraction(p.strip())) for p in text.split(",") if p.strip()]
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse grid {text!r}") from None


def parse_int_list(text: str) -> List[int]:
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            return list(range(start, stop + 1, step))
        return [int(p) for p in text.split(",") if p.strip()]
    except (ValueError, IndexError):
        raise ValidationError(f"cannot parse integer list {text!r}") from None


def parse_word(text: str) -> List[int]:
    """A symbol word given as '0,1,1' or '011' (single-digit symbols)."""
    text = str(text).strip()
    if "," in text or " " in text:
        return parse_int_list(text.replace(" ", ","))
    if not text.isdigit():
        raise ValidationError(f"cannot parse word {text!r}")
    return [int(ch) for ch in text]


def parse_blocks(text: str) -> Union[int, List[int]]:
    values = parse_int_list(text)
    return values[0] if len(values) == 1 else values


def add_common_arguments(parser) -> None:
    parser.add_argument("--config", help="Path to an ini file with option defaults")
    parser.add_argument("--workers", type=int, help="Worker threads for map-reduce steps")
    parser.add_argument("--budget", type=int, help="Cap on cylinders enumerated per level")
    parser.add_argument("--output", help="Write the report to this path instead of stdout")
    parser.add_argument("--csv", action="store_true", help="Emit the tabular part of the report as CSV")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    parser.add_argument("--quiet", action="store_true", help="Log warnings and errors only")
