"""Nonnegative reals extended with +infinity.

Potentials take values in [0, +inf]; plain floats (with ``math.inf``)
carry those values through the hot paths, and :class:`ExtendedNonneg`
is the validated wrapper used at API boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering


def check_extended_nonneg(value: float) -> float:
    """Validate that ``value`` lies in [0, +inf] and return it as a float."""
    v = float(value)
    if math.isnan(v):
        raise ValueError("extended nonnegative value cannot be NaN")
    if v < 0.0:
        raise ValueError(f"extended nonnegative value cannot be negative: {v}")
    return v


@total_ordering
@dataclass(frozen=True)
class ExtendedNonneg:
    """A nonnegative real or +infinity.

    Addition saturates at +infinity and comparisons place +infinity above
    every finite value; both follow directly from IEEE float semantics,
    which this wrapper validates and exposes.
    """

    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", check_extended_nonneg(self.value))

    @classmethod
    def infinity(cls) -> "ExtendedNonneg":
        return cls(math.inf)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    @staticmethod
    def _coerce(other) -> float:
        if isinstance(other, ExtendedNonneg):
            return other.value
        return float(other)

    def __add__(self, other) -> "ExtendedNonneg":
        return ExtendedNonneg(self.value + self._coerce(other))

    __radd__ = __add__

    def __eq__(self, other) -> bool:
        try:
            return self.value == self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __lt__(self, other) -> bool:
        try:
            return self.value < self._coerce(other)
        except (TypeError, ValueError):
            return NotImplemented

    def __hash__(self):
        return hash(self.value)

    def __float__(self) -> float:
        return self.value

    def __repr__(self) -> str:
        return f"ExtendedNonneg({self.value!r})"
