"""Exact circle phases, the 4-coupling response curves and the joint state.

All arithmetic is on :class:`fractions.Fraction`, so event ordering and ties
are bit-exact.  Phases live in ``[0, 1)``; the value 1 is never stored.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import lcm
from typing import Union

Rat = Fraction
RatLike = Union[Fraction, int, str]

QUARTER = Fraction(1, 4)
HALF = Fraction(1, 2)


def as_rat(x: RatLike) -> Fraction:
    if isinstance(x, Phase):
        return x.value
    if isinstance(x, float):
        raise TypeError("floats are not accepted; pass a Fraction, int or 'p/q' string")
    return Fraction(x)


@dataclass(frozen=True, order=True)
class Phase:
    """A point of the circle R/Z, stored as an exact rational in [0, 1)."""

    value: Fraction

    def __init__(self, value: RatLike = 0):
        object.__setattr__(self, "value", as_rat(value) % 1)

    def __str__(self) -> str:
        return format_rat(self.value)

    def __repr__(self) -> str:
        return f"Phase({format_rat(self.value)})"

    @property
    def denominator(self) -> int:
        return self.value.denominator


def format_rat(x: Fraction) -> str:
    """Canonical ``num/den`` text form, e.g. ``3/8`` or ``0/1``."""
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_rat(text: str) -> Fraction:
    return Fraction(text.strip())


def phase_add(p: Phase | RatLike, d: RatLike) -> Phase:
    return Phase(as_rat(p) + as_rat(d))


def ccw_displacement(x: Phase | RatLike, y: Phase | RatLike) -> Fraction:
    """Length of the counterclockwise arc from ``x`` to ``y``: ``(x - y) mod 1``."""
    return (as_rat(x) - as_rat(y)) % 1


def prc_f0(x: RatLike) -> Fraction:
    """Phase response curve of the 4-coupling on [0, 1]."""
    x = as_rat(x)
    if x < 0 or x > 1:
        raise ValueError(f"PRC argument must lie in [0, 1], got {x}")
    if x <= QUARTER:
        return Fraction(0)
    if x <= HALF:
        return x - QUARTER
    return x


def adaptive_prc(x: RatLike, sigma: int) -> Fraction:
    """Rested nodes (sigma == 0) follow f0, refractory nodes ignore the pulse."""
    if sigma not in (0, 1, 2):
        raise ValueError(f"sigma must be in {{0, 1, 2}}, got {sigma}")
    y = prc_f0(x)
    return y if sigma == 0 else as_rat(x)


@dataclass(frozen=True)
class JointState:
    """Per-node state (phi, beta, mu1, mu2, mu3, sigma) of the adaptive 4-coupling."""

    phi: Phase
    beta: Phase = Phase(0)
    mu1: int = 3
    mu2: int = 0
    mu3: int = 0
    sigma: int = 0

    def __post_init__(self):
        if not isinstance(self.phi, Phase):
            object.__setattr__(self, "phi", Phase(self.phi))
        if not isinstance(self.beta, Phase):
            object.__setattr__(self, "beta", Phase(self.beta))
        if self.mu1 not in (1, 3):
            raise ValueError(f"mu1 must be 1 or 3, got {self.mu1}")
        if self.mu2 not in (0, 1):
            raise ValueError(f"mu2 must be 0 or 1, got {self.mu2}")
        if not 0 <= self.mu3 <= 3:
            raise ValueError(f"mu3 must be in 0..3, got {self.mu3}")
        if self.sigma not in (0, 1, 2):
            raise ValueError(f"sigma must be in 0..2, got {self.sigma}")

    @property
    def rested(self) -> bool:
        return self.sigma == 0

    @property
    def refractory(self) -> bool:
        return self.sigma != 0

    def as_dict(self) -> dict:
        return {
            "phi": str(self.phi),
            "beta": str(self.beta),
            "mu1": self.mu1,
            "mu2": self.mu2,
            "mu3": self.mu3,
            "sigma": self.sigma,
        }


def common_grid(values, base: int = 4) -> int:
    """Smallest L with ``base | L`` such that every value is a multiple of 1/L."""
    L = base
    for v in values:
        L = lcm(L, as_rat(v).denominator)
    return L
