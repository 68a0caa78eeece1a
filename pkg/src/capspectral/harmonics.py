"""Orthonormal circular harmonics Y_{k,i} and their trigonometric product integrals.

Y_{0,0} = sqrt(2)/2, Y_{k,0} = cos(k theta), Y_{k,1} = sin(k theta), orthonormal
under (1/pi) times the integral over [0, 2 pi).
"""
from dataclasses import dataclass

import numpy as np

__all__ = ["HarmonicIndex", "InvalidIndexError", "Y0", "eval_Y", "multiply_by", "product_integral"]

Y0 = np.sqrt(2) / 2


class InvalidIndexError(ValueError):
    pass


@dataclass(frozen=True)
class HarmonicIndex:
    k: int
    i: int = 0

    def __post_init__(self):
        if self.k < 0 or self.i not in (0, 1):
            raise InvalidIndexError(f"invalid harmonic index ({self.k}, {self.i})")
        if self.k == 0 and self.i == 1:
            raise InvalidIndexError("Y_{0,1} does not exist")


def _as_index(idx):
    if isinstance(idx, HarmonicIndex):
        return idx
    return HarmonicIndex(*idx)


def eval_Y(index, theta):
    index = _as_index(index)
    theta = np.asarray(theta, dtype=float)
    if index.k == 0:
        return np.full_like(theta, Y0)
    if index.i == 0:
        return np.cos(index.k * theta)
    return np.sin(index.k * theta)


def multiply_by(index, factor):
    """Expansion of Y_{k,i} * f(theta) in the Y basis, f in {"one", "cos", "sin"}.

    Returns a list of (coefficient, HarmonicIndex).  Product-to-sum identities;
    the constant cos(0 theta) = 1 is rewritten as sqrt(2) Y_{0,0}.
    """
    index = _as_index(index)
    k, i = index.k, index.i
    if factor == "one":
        return [(1.0, index)]
    if factor not in ("cos", "sin"):
        raise ValueError(f"unknown factor {factor!r}")

    if k == 0:
        return [(Y0, HarmonicIndex(1, 0 if factor == "cos" else 1))]

    terms = []

    def cos_term(c, m):
        if m == 0:
            terms.append((c * np.sqrt(2), HarmonicIndex(0, 0)))
        else:
            terms.append((c, HarmonicIndex(m, 0)))

    def sin_term(c, m):
        if m > 0:
            terms.append((c, HarmonicIndex(m, 1)))

    if factor == "cos" and i == 0:
        cos_term(0.5, k + 1)
        cos_term(0.5, k - 1)
    elif factor == "cos" and i == 1:
        sin_term(0.5, k + 1)
        sin_term(0.5, k - 1)
    elif factor == "sin" and i == 0:
        sin_term(0.5, k + 1)
        sin_term(-0.5, k - 1)
    else:
        cos_term(-0.5, k + 1)
        cos_term(0.5, k - 1)
    return terms


def product_integral(kA, kB, factor="one"):
    """Raw integral over [0, 2 pi) of Y_{kA} Y_{kB} f(theta), f in {"one", "cos", "sin"}."""
    kB = _as_index(kB)
    return float(sum(np.pi * c for c, idx in multiply_by(kA, factor) if idx == kB))
