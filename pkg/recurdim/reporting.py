# recurdim/reporting.py
import csv
import dataclasses
import io
import json
import logging
import math
import sys
from contextlib import contextmanager
from enum import Enum
from fractions import Fraction
from typing import Any, Iterable, Iterator, List, Optional, Sequence, TextIO

import mpmath
import numpy as np

logger = logging.getLogger(__name__)

NOTE_FORMAT = '%(name)s - %(levelname)s - %(message)s'


class ReportLogHandler(logging.Handler):
    """Collects warning records into the notes list of the report being built."""
    def __init__(self, level: int = logging.WARNING):
        super().__init__(level)
        self.notes: List[str] = []
        self.setFormatter(logging.Formatter(NOTE_FORMAT))

    def emit(self, record):
        try:
            message = self.format(record)
            if message not in self.notes:
                self.notes.append(message)
            if record.levelno >= logging.CRITICAL:
                sys.stderr.write(message + "\n")
        except Exception:
            self.handleError(record)


@contextmanager
def capture_notes(level: int = logging.WARNING) -> Iterator[ReportLogHandler]:
    handler = ReportLogHandler(level)
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield handler
    finally:
        root.removeHandler(handler)


# --- JSON conversion ---

def to_jsonable(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, str, int)):
        return obj
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return str(obj)
        return obj
    if isinstance(obj, Fraction):
        return float(obj)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, mpmath.mpf):
        return mpmath.nstr(obj, 30)
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if not f.name.startswith("_")}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [to_jsonable(v) for v in obj]
    return str(obj)


def dumps_report(payload: dict) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


def dumps_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(v) for v in row])
    return buffer.getvalue()


def _csv_cell(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    converted = to_jsonable(value)
    return converted if not isinstance(converted, (list, dict)) else json.dumps(converted)


def emit(text: str, path: Optional[str] = None, stream: Optional[TextIO] = None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        logger.info(f"Report written to {path}")
    else:
        (stream or sys.stdout).write(text)
