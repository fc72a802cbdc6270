"""Control functions gating the training / exploration / exploitation phases."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Phase(str, Enum):
    TRAINING = "training"
    EXPLORATION = "exploration"
    EXPLOITATION = "exploitation"

    def __str__(self):
        return self.value


TRAIN, EXPLORE, EXPLOIT = Phase.TRAINING, Phase.EXPLORATION, Phase.EXPLOITATION


def theorem_exponent(alpha: float, d: int, time_context: bool = False) -> float:
    """``2 alpha / (3 alpha + d)``; one extra dimension when time is part of the context."""
    return 2.0 * alpha / (3.0 * alpha + d + (1 if time_context else 0))


@dataclass(frozen=True)
class ControlParams:
    """``D_j(t) = c_j t^{z_j} ln t``.  By default all exponents equal ``z``,
    ``c_1 = c_3 = 1`` and ``c_2 = F_max``."""

    z: float
    F_max: int = 1
    z1: float | None = None
    z2: float | None = None
    z3: float | None = None
    c1: float = 1.0
    c2: float | None = None
    c3: float = 1.0

    def __post_init__(self):
        from .errors import ConfigurationError

        for name in ("z", "z1", "z2", "z3"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise ConfigurationError(f"{name}={v} must lie in (0, 1)")
        if self.F_max < 1:
            raise ConfigurationError("F_max must be a positive integer")

    def values(self, t: int) -> tuple[float, float, float]:
        if t < 1:
            raise ValueError("slot index starts at 1")
        lt = math.log(t)
        z = self.z
        d1 = self.c1 * t ** (self.z1 if self.z1 is not None else z) * lt
        d2 = (self.F_max if self.c2 is None else self.c2) * t ** (self.z2 if self.z2 is not None else z) * lt
        d3 = self.c3 * t ** (self.z3 if self.z3 is not None else z) * lt
        return d1, d2, d3


def control_values(t: int, params: ControlParams) -> tuple[float, float, float]:
    return params.values(t)


def slicing_parameter(T: int, alpha: float = 1.0, d: int = 1, time_context: bool = False,
                      exponent: float | None = None) -> int:
    """``ceil(T^{1/(3 alpha + d)})`` (``d + 1`` with time as context)."""
    if T < 1:
        raise ValueError("horizon must be at least 1")
    if exponent is None:
        exponent = 1.0 / (3.0 * alpha + d + (1 if time_context else 0))
    v = T ** exponent
    m = math.ceil(v)
    # exact powers (65536^(1/4)) may land a hair above the integer
    if m - v > 1.0 - 1e-9:
        m -= 1
    return max(1, m)


def dcza_parameters(alpha: float, d: int) -> tuple[float, float]:
    """Split exponent ``p = (3 alpha + sqrt(9 alpha^2 + 8 alpha d)) / 2`` and ``z = 2 alpha / p``."""
    if alpha <= 0 or d < 1:
        raise ValueError("alpha must be positive and d >= 1")
    p = (3.0 * alpha + math.sqrt(9.0 * alpha * alpha + 8.0 * alpha * d)) / 2.0
    return p, 2.0 * alpha / p


# Named parameter presets; Z2 CoS uses the theorem exponent for alpha=1, d=1.
PRESETS = {
    "Z1": {"z": 1 / 8, "F_max": 2, "m_T_exponent": 1 / 4, "A": 1.0, "p": 4.0},
    "Z2": {"z": 1 / 2, "F_max": 2, "m_T_exponent": 1 / 4, "A": 1.0, "p": (3 + math.sqrt(17)) / 2},
}
