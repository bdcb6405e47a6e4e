# fluctuations/errors.py
"""Exception types raised by the simulation engine."""

from __future__ import annotations

from typing import List, Sequence, Tuple


class FluctuationsError(RuntimeError):
    """Base class for engine failures that are not plain input validation errors."""


class SingularOriginError(FluctuationsError, ValueError):
    """A potential singular at the origin was evaluated at x = 0."""


class ClosePairError(FluctuationsError):
    """Two particles are closer than the potential's hard floor r_min."""

    def __init__(self, pairs: Sequence[Tuple[int, int]], distance: float, r_min: float):
        self.pairs: List[Tuple[int, int]] = [tuple(map(int, p)) for p in pairs]
        self.distance = float(distance)
        self.r_min = float(r_min)
        head = ", ".join(f"({i},{j})" for i, j in self.pairs[:5])
        more = "" if len(self.pairs) <= 5 else f" (+{len(self.pairs) - 5} more)"
        super().__init__(
            f"close pair below r_min={r_min:g}: min distance {distance:.6g} at {head}{more}"
        )


class StiffStepError(FluctuationsError):
    """An integration step kept producing close pairs after the allowed number of halvings."""

    def __init__(self, time: float, halvings: int, distance: float, pairs: Sequence[Tuple[int, int]] = ()):
        self.time = float(time)
        self.halvings = int(halvings)
        self.distance = float(distance)
        self.pairs = [tuple(map(int, p)) for p in pairs]
        super().__init__(
            f"stiff step at t={time:.6g}: close pair persists after {halvings} halvings "
            f"(min distance {distance:.6g}, pairs {self.pairs[:5]})"
        )


class QuadratureError(FluctuationsError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float):
        self.error_estimate = float(error_estimate)
        super().__init__(f"{message} (achieved error estimate {error_estimate:.3e})")


class OracleTractabilityError(FluctuationsError, ValueError):
    """The requested brute-force computation exceeds the tractability guard."""


class SupportError(FluctuationsError, ValueError):
    """A test function's support does not fit inside the scaled torus."""
