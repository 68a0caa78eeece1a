"""Basis specification, coefficient orderings and the permutations between them.

DegreeMajor stores degree blocks n = 0..N, each of length 2n + 1 ordered
(k, i) = (0, 0), (1, 0), (1, 1), (2, 0), ...  FourierMajor stores mode blocks
k = 0..N: block 0 holds n = 0..N, block k >= 1 holds (n, i) for n = k..N with
i varying fastest.
"""
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np

__all__ = [
    "Ordering", "BasisSpec", "CoefficientVector", "OrderingError",
    "degree_major_index", "fourier_major_index", "fourier_block_start", "fourier_block_size",
    "block_sizes", "index_table", "reorder",
]


class OrderingError(ValueError):
    pass


class Ordering(str, Enum):
    DEGREE_MAJOR = "DegreeMajor"
    FOURIER_MAJOR = "FourierMajor"


@dataclass(frozen=True)
class BasisSpec:
    alpha: float
    a: int
    N: int

    def __post_init__(self):
        if not -1 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (-1, 1), got {self.alpha}")
        if self.a < 0 or int(self.a) != self.a:
            raise ValueError(f"a must be a non-negative integer, got {self.a}")
        if self.N < 0:
            raise ValueError(f"N must be non-negative, got {self.N}")

    @property
    def dim(self):
        return (self.N + 1) ** 2


def degree_major_index(n, k, i):
    n, k, i = (np.asarray(v) for v in (n, k, i))
    return n**2 + np.where(k == 0, 0, 2 * k - 1 + i)


def fourier_block_start(N, k):
    k = np.asarray(k)
    return np.where(k == 0, 0, (N + 1) + (k - 1) * (2 * N + 2 - k))


def fourier_block_size(N, k):
    return N + 1 if k == 0 else 2 * (N - k + 1)


def fourier_major_index(N, n, k, i):
    n, k, i = (np.asarray(v) for v in (n, k, i))
    return fourier_block_start(N, k) + np.where(k == 0, n, 2 * (n - k) + i)


def block_sizes(N, ordering):
    ordering = Ordering(ordering)
    if ordering is Ordering.DEGREE_MAJOR:
        return tuple(2 * n + 1 for n in range(N + 1))
    return tuple(fourier_block_size(N, k) for k in range(N + 1))


@lru_cache(maxsize=64)
def index_table(N):
    """Arrays (n, k, i, fourier_position) listed in DegreeMajor order."""
    n, k, i = [], [], []
    for nn in range(N + 1):
        for kk in range(nn + 1):
            for ii in ((0,) if kk == 0 else (0, 1)):
                n.append(nn)
                k.append(kk)
                i.append(ii)
    n, k, i = (np.array(v, dtype=np.int64) for v in (n, k, i))
    fpos = fourier_major_index(N, n, k, i).astype(np.int64)
    for arr in (n, k, i, fpos):
        arr.setflags(write=False)
    return n, k, i, fpos


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    values: np.ndarray
    ordering: Ordering
    spec: BasisSpec
    weighted: bool = False
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.spec.dim,):
            raise ValueError(f"expected {self.spec.dim} coefficients, got shape {values.shape}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ordering", Ordering(self.ordering))

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))

    def reorder(self, target):
        return reorder(self, target)

    def get(self, n, k, i=0):
        if self.ordering is Ordering.DEGREE_MAJOR:
            return self.values[int(degree_major_index(n, k, i))]
        return self.values[int(fourier_major_index(self.spec.N, n, k, i))]

    def degree_block_norms(self):
        """2-norm of each degree block n = 0..N."""
        dm = reorder(self, Ordering.DEGREE_MAJOR).values
        return np.array([np.linalg.norm(dm[n * n:(n + 1) ** 2]) for n in range(self.spec.N + 1)])

    @classmethod
    def zeros(cls, spec, ordering=Ordering.FOURIER_MAJOR, weighted=False):
        return cls(np.zeros(spec.dim), ordering, spec, weighted)


def reorder(coeffs, target):
    """Permute coefficients into ``target`` ordering."""
    target = Ordering(target)
    if coeffs.ordering is target:
        return coeffs
    fpos = index_table(coeffs.spec.N)[3]
    out = np.empty_like(coeffs.values)
    if target is Ordering.FOURIER_MAJOR:
        out[fpos] = coeffs.values
    else:
        out[:] = coeffs.values[fpos]
    return replace(coeffs, values=out, ordering=target)
