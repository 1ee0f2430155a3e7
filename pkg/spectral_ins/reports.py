import dataclasses
import json
import logging
import math
from typing import Any, Dict, Optional

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value):
    """Turn numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclasses.dataclass
class DiagnosticsReport:
    estimate_id: str
    measured_constant: Optional[float]
    passed: bool
    parameters: Dict[str, Any] = dataclasses.field(default_factory=dict)
    grid: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    details: Dict[str, Any] = dataclasses.field(default_factory=dict)
    provenance: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def to_dict(self):
        return _plain(
            {
                "estimate_id": self.estimate_id,
                "parameters": self.parameters,
                "measured_constant": self.measured_constant,
                "passed": bool(self.passed),
                "grid": self.grid,
                "seed": self.seed,
                "details": self.details,
                "provenance": self.provenance,
            }
        )

    def to_json(self):
        return json.dumps(self.to_dict(), indent=4, sort_keys=True, default=str)


def report(estimate_id, measured_constant, passed, grid=None, **kwargs) -> DiagnosticsReport:
    if measured_constant is not None:
        measured_constant = float(measured_constant)
    return DiagnosticsReport(
        estimate_id=estimate_id,
        measured_constant=measured_constant,
        passed=bool(passed),
        grid=grid.to_dict() if grid is not None else None,
        **kwargs,
    )


def ratio(lhs, rhs):
    """lhs / rhs, or None when both sides vanish."""
    if rhs == 0:
        return None if lhs == 0 else math.inf
    return lhs / rhs
