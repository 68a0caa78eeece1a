"""Banded-block-banded matrices: storage, arithmetic, serialization and banded solves.

A matrix is split into row blocks and column blocks.  Block (I, J) may be
nonzero only for -L <= J - I <= U, and inside it only the diagonals
-lo <= c - r <= up are stored, in LAPACK band layout ab[up + r - c, c].
Each block carries its own (lo, up), bounded by the common sub-block
bandwidths (lam, mu); blocks whose band is narrower keep the tighter mask.
"""
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, solve_banded

from .coeffs import CoefficientVector, Ordering, OrderingError

__all__ = [
    "BandedBlockBanded", "MaskError", "NotDecoupledError", "SingularSystemError",
    "ModeBlock", "FourierBlockSystem", "SolveResult",
    "bbb_matvec", "partition_by_mode", "solve", "product", "identity",
]

FORMAT_VERSION = 1


class MaskError(ValueError):
    """Write or value outside the band mask."""


class NotDecoupledError(ValueError):
    """The matrix couples distinct Fourier modes."""


class SingularSystemError(LinAlgError):
    def __init__(self, message, mode=None):
        super().__init__(message)
        self.mode = mode


def _offsets(sizes):
    return np.concatenate([[0], np.cumsum(sizes, dtype=np.int64)])


class BandedBlockBanded:
    def __init__(self, row_sizes, col_sizes, block_bandwidths, sub_block_bandwidths,
                 ordering=None, block_bands=None):
        self.row_sizes = tuple(int(s) for s in row_sizes)
        self.col_sizes = tuple(int(s) for s in col_sizes)
        self.block_bandwidths = tuple(int(v) for v in block_bandwidths)
        self.sub_block_bandwidths = tuple(int(v) for v in sub_block_bandwidths)
        self.ordering = None if ordering is None else Ordering(ordering)
        self._roff = _offsets(self.row_sizes)
        self._coff = _offsets(self.col_sizes)
        L, U = self.block_bandwidths
        lam, mu = self.sub_block_bandwidths

        if block_bands is None:
            block_bands = {
                (I, J): (lam, mu)
                for I in range(len(self.row_sizes))
                for J in range(max(0, I - L), min(len(self.col_sizes), I + U + 1))
            }
        self._bands = {}
        self._data_offset = {}
        size = 0
        for (I, J), (lo, up) in sorted(block_bands.items()):
            if not -L <= J - I <= U:
                raise MaskError(f"block ({I}, {J}) lies outside block bandwidths {(L, U)}")
            if lo > lam or up > mu:
                raise MaskError(f"block ({I}, {J}) band {(lo, up)} exceeds {(lam, mu)}")
            rows, cols = self.row_sizes[I], self.col_sizes[J]
            lo, up = min(lo, rows - 1), min(up, cols - 1)
            if lo + up < 0 or rows == 0 or cols == 0:
                continue
            self._bands[I, J] = (lo, up)
            self._data_offset[I, J] = size
            size += (lo + up + 1) * cols
        self.data = np.zeros(size)
        self._positions = None
        self._csr = None

    # ----------------------------------------------------------------- layout
    @property
    def shape(self):
        return int(self._roff[-1]), int(self._coff[-1])

    @property
    def nblocks(self):
        return len(self.row_sizes), len(self.col_sizes)

    def block_band(self, I, J):
        return self._bands.get((I, J))

    def stored_blocks(self):
        return sorted(self._bands)

    def band_data(self, I, J):
        """View of the LAPACK-style band array of block (I, J)."""
        lo, up = self._bands[I, J]
        cols = self.col_sizes[J]
        off = self._data_offset[I, J]
        return self.data[off: off + (lo + up + 1) * cols].reshape(lo + up + 1, cols)

    def _block_of(self, r, c):
        I = int(np.searchsorted(self._roff, r, side="right") - 1)
        J = int(np.searchsorted(self._coff, c, side="right") - 1)
        return I, J, r - int(self._roff[I]), c - int(self._coff[J])

    def _flat(self, r, c):
        rows, cols = self.shape
        if not (0 <= r < rows and 0 <= c < cols):
            raise IndexError(f"index ({r}, {c}) out of range for shape {self.shape}")
        I, J, lr, lc = self._block_of(r, c)
        band = self._bands.get((I, J))
        if band is None:
            return None
        lo, up = band
        if not -lo <= lc - lr <= up:
            return None
        return self._data_offset[I, J] + (up + lr - lc) * self.col_sizes[J] + lc

    def in_mask(self, r, c):
        return self._flat(r, c) is not None

    def __getitem__(self, rc):
        pos = self._flat(*rc)
        return 0.0 if pos is None else float(self.data[pos])

    def __setitem__(self, rc, value):
        pos = self._flat(*rc)
        if pos is None:
            raise MaskError(f"entry {rc} lies outside the band mask")
        self.data[pos] = value
        self._csr = None

    def _mask_positions(self):
        """Global (row, col, flat data position) of every in-mask slot."""
        if self._positions is None:
            rr, cc, pp = [], [], []
            for (I, J), (lo, up) in self._bands.items():
                rows, cols = self.row_sizes[I], self.col_sizes[J]
                r = np.arange(rows)[:, None]
                d = np.arange(-lo, up + 1)[None, :]
                c = r + d
                ok = (c >= 0) & (c < cols)
                r, c = np.broadcast_to(r, ok.shape)[ok], c[ok]
                rr.append(r + self._roff[I])
                cc.append(c + self._coff[J])
                pp.append(self._data_offset[I, J] + (up + r - c) * cols + c)
            if rr:
                self._positions = tuple(np.concatenate(v).astype(np.int64) for v in (rr, cc, pp))
            else:
                e = np.zeros(0, dtype=np.int64)
                self._positions = (e, e, e)
        return self._positions

    # ------------------------------------------------------------ conversion
    def to_sparse(self):
        if self._csr is None:
            r, c, p = self._mask_positions()
            vals = self.data[p]
            keep = vals != 0
            self._csr = sp.csr_matrix((vals[keep], (r[keep], c[keep])), shape=self.shape)
        return self._csr

    def mask_pattern(self):
        r, c, _ = self._mask_positions()
        return sp.csr_matrix((np.ones(len(r), dtype=bool), (r, c)), shape=self.shape)

    def toarray(self):
        return self.to_sparse().toarray()

    def dense_block(self, I, J):
        out = np.zeros((self.row_sizes[I], self.col_sizes[J]))
        if (I, J) in self._bands:
            lo, up = self._bands[I, J]
            ab = self.band_data(I, J)
            for d in range(-lo, up + 1):
                r0, r1 = max(0, -d), min(out.shape[0], out.shape[1] - d)
                if r1 > r0:
                    r = np.arange(r0, r1)
                    out[r, r + d] = ab[up - d, r + d]
        return out

    def set_block(self, I, J, block, tol=1e-13):
        """Write a dense block; nonzeros above ``tol`` outside the mask raise MaskError."""
        block = np.asarray(block, dtype=float)
        if block.shape != (self.row_sizes[I], self.col_sizes[J]):
            raise ValueError(f"block shape {block.shape} does not match ({I}, {J})")
        band = self._bands.get((I, J))
        if band is None:
            if np.any(np.abs(block) > tol):
                raise MaskError(f"block ({I}, {J}) is outside the mask but has nonzeros")
            return
        lo, up = band
        r, c = np.indices(block.shape)
        outside = (c - r < -lo) | (c - r > up)
        if np.any(np.abs(block[outside]) > tol):
            raise MaskError(f"block ({I}, {J}) has nonzeros outside band {(lo, up)}")
        ab = self.band_data(I, J)
        inside = ~outside
        ab[(up + r - c)[inside], c[inside]] = block[inside]
        self._csr = None

    def set_block_band(self, I, J, ab):
        """Write block (I, J) directly from a band array in this block's layout."""
        target = self.band_data(I, J)
        if target.shape != np.shape(ab):
            raise ValueError(f"band array shape {np.shape(ab)} does not match {target.shape}")
        target[...] = ab
        self._csr = None

    @classmethod
    def from_pattern(cls, pattern, row_sizes, col_sizes, ordering=None):
        """Empty matrix whose mask is the tightest banded-block-banded hull of ``pattern``."""
        pattern = sp.coo_matrix(pattern)
        roff, coff = _offsets(row_sizes), _offsets(col_sizes)
        r, c = pattern.row.astype(np.int64), pattern.col.astype(np.int64)
        I = np.searchsorted(roff, r, side="right") - 1
        J = np.searchsorted(coff, c, side="right") - 1
        d = (c - coff[J]) - (r - roff[I])
        bands = {}
        if len(r):
            key = I * len(col_sizes) + J
            order = np.argsort(key, kind="stable")
            key, d = key[order], d[order]
            uniq, start = np.unique(key, return_index=True)
            dmin = np.minimum.reduceat(d, start)
            dmax = np.maximum.reduceat(d, start)
            for kk, lo_d, up_d in zip(uniq, dmin, dmax):
                bands[int(kk // len(col_sizes)), int(kk % len(col_sizes))] = (int(-lo_d), int(up_d))
        L = max([I - J for I, J in bands] + [0])
        U = max([J - I for I, J in bands] + [0])
        lam = max([lo for lo, _ in bands.values()] + [0])
        mu = max([up for _, up in bands.values()] + [0])
        return cls(row_sizes, col_sizes, (L, U), (lam, mu), ordering, bands)

    @classmethod
    def from_sparse(cls, S, row_sizes, col_sizes, block_bandwidths=None,
                    sub_block_bandwidths=None, ordering=None, block_bands=None, tol=1e-13):
        """Pack a sparse matrix; any entry above ``tol`` outside the mask raises MaskError.

        Without bandwidths the mask is the structural hull of the sparsity pattern.
        """
        S = sp.coo_matrix(S)
        if block_bandwidths is None and block_bands is None:
            out = cls.from_pattern(S, row_sizes, col_sizes, ordering)
        else:
            out = cls(row_sizes, col_sizes, block_bandwidths, sub_block_bandwidths, ordering, block_bands)
        out._scatter(S, tol)
        return out

    def _scatter(self, S, tol):
        S = sp.coo_matrix(S)
        S.sum_duplicates()
        mask = self.mask_pattern().tocsr()
        inside = np.asarray(mask[S.row, S.col]).ravel().astype(bool) if S.nnz else np.zeros(0, bool)
        bad = ~inside & (np.abs(S.data) > tol)
        if np.any(bad):
            j = int(np.argmax(np.where(bad, np.abs(S.data), -1)))
            raise MaskError(f"entry ({S.row[j]}, {S.col[j]}) = {S.data[j]:.3e} lies outside the mask")
        r, c, p = self._mask_positions()
        lookup = sp.csr_matrix((p + 1, (r, c)), shape=self.shape)
        pos = np.asarray(lookup[S.row[inside], S.col[inside]]).ravel() - 1
        self.data[pos] = S.data[inside]
        self._csr = None

    def certified_bandwidths(self, tol=1e-13):
        """Bandwidths ((L, U), (lam, mu)) realised by entries with |value| > tol."""
        r, c, p = self._mask_positions()
        keep = np.abs(self.data[p]) > tol
        r, c = r[keep], c[keep]
        if not len(r):
            return (0, 0), (0, 0)
        I = np.searchsorted(self._roff, r, side="right") - 1
        J = np.searchsorted(self._coff, c, side="right") - 1
        d = (c - self._coff[J]) - (r - self._roff[I])
        return (int(max(0, np.max(I - J))), int(max(0, np.max(J - I)))), \
            (int(max(0, -np.min(d))), int(max(0, np.max(d))))

    def copy(self):
        out = BandedBlockBanded(self.row_sizes, self.col_sizes, self.block_bandwidths,
                                self.sub_block_bandwidths, self.ordering, dict(self._bands))
        out.data[:] = self.data
        return out

    # ------------------------------------------------------------ arithmetic
    def matvec(self, v):
        return bbb_matvec(self, v)

    def __matmul__(self, other):
        if isinstance(other, BandedBlockBanded):
            return product(self, other)
        return bbb_matvec(self, other)

    def _binary(self, other, sign):
        if self.row_sizes != other.row_sizes or self.col_sizes != other.col_sizes:
            raise ValueError("block structures differ")
        if self.ordering != other.ordering:
            raise OrderingError("ordering tags differ")
        pattern = self.mask_pattern() + other.mask_pattern()
        out = BandedBlockBanded.from_pattern(pattern, self.row_sizes, self.col_sizes, self.ordering)
        out._scatter(self.to_sparse() + sign * other.to_sparse(), 0.0)
        return out

    def __add__(self, other):
        return self._binary(other, 1.0)

    def __sub__(self, other):
        return self._binary(other, -1.0)

    def __mul__(self, scalar):
        out = self.copy()
        out.data *= float(scalar)
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def spy_triples(self, tol=0.0):
        """(row, col, |value|) of stored entries with |value| > tol, row-major order."""
        S = self.to_sparse().tocoo()
        keep = np.abs(S.data) > tol
        order = np.lexsort((S.col[keep], S.row[keep]))
        return S.row[keep][order], S.col[keep][order], np.abs(S.data[keep])[order]

    # --------------------------------------------------------- serialization
    def _header(self):
        return {
            "format": "banded-block-banded",
            "version": FORMAT_VERSION,
            "row_sizes": list(self.row_sizes),
            "col_sizes": list(self.col_sizes),
            "block_bandwidths": list(self.block_bandwidths),
            "sub_block_bandwidths": list(self.sub_block_bandwidths),
            "ordering": None if self.ordering is None else self.ordering.value,
            "blocks": [[I, J, lo, up] for (I, J), (lo, up) in sorted(self._bands.items())],
        }

    @classmethod
    def _from_header(cls, header):
        if header.get("format") != "banded-block-banded":
            raise ValueError("not a banded-block-banded file")
        if header.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {header.get('version')}")
        bands = {(I, J): (lo, up) for I, J, lo, up in header["blocks"]}
        return cls(header["row_sizes"], header["col_sizes"], header["block_bandwidths"],
                   header["sub_block_bandwidths"], header["ordering"], bands)

    def to_json(self):
        header = self._header()
        # json writes floats with repr, which round-trips binary64 exactly
        header["data"] = [float(v) for v in self.data]
        return json.dumps(header)

    @classmethod
    def from_json(cls, text):
        header = json.loads(text)
        out = cls._from_header(header)
        data = np.asarray(header["data"], dtype=float)
        if data.shape != out.data.shape:
            raise ValueError("packed data length does not match the header")
        out.data[:] = data
        return out

    def save_npz(self, path):
        np.savez(path, header=np.array(json.dumps(self._header())), data=self.data)

    @classmethod
    def load_npz(cls, path):
        with np.load(path, allow_pickle=False) as f:
            out = cls._from_header(json.loads(str(f["header"])))
            out.data[:] = f["data"]
        return out


def identity(sizes, ordering=None):
    A = BandedBlockBanded(sizes, sizes, (0, 0), (0, 0), ordering)
    A.data[:] = 1.0
    return A


def product(A, B):
    """A @ B with the mask taken from the structural product of the two masks."""
    if A.col_sizes != B.row_sizes:
        raise ValueError("inner block structures differ")
    if A.ordering != B.ordering:
        raise OrderingError("ordering tags differ")
    pattern = (A.mask_pattern().astype(np.int8) @ B.mask_pattern().astype(np.int8)) != 0
    out = BandedBlockBanded.from_pattern(pattern, A.row_sizes, B.col_sizes, A.ordering)
    out._scatter(A.to_sparse() @ B.to_sparse(), 0.0)
    return out


def bbb_matvec(A, v):
    """A v.  Accepts a CoefficientVector (ordering must match) or a plain array."""
    if isinstance(v, CoefficientVector):
        if A.ordering is not None and v.ordering is not A.ordering:
            raise OrderingError(f"matrix acts on {A.ordering.value}, vector is {v.ordering.value}")
        return v.with_values(A.to_sparse() @ v.values)
    return A.to_sparse() @ np.asarray(v, dtype=float)


@dataclass
class ModeBlock:
    k: int
    lower: int
    upper: int
    ab: np.ndarray
    rhs: np.ndarray


@dataclass
class FourierBlockSystem:
    blocks: list
    N: int

    def solve(self):
        parts = []
        for b in self.blocks:
            try:
                parts.append(solve_banded((b.lower, b.upper), b.ab, b.rhs, check_finite=False))
            except (LinAlgError, ValueError) as exc:
                raise SingularSystemError(f"mode {b.k} block is singular: {exc}", mode=b.k) from exc
            if not np.all(np.isfinite(parts[-1])):
                raise SingularSystemError(f"mode {b.k} block is singular", mode=b.k)
        return np.concatenate(parts) if parts else np.zeros(0)


def _as_array(rhs, A):
    if isinstance(rhs, CoefficientVector):
        if A.ordering is not None and rhs.ordering is not A.ordering:
            raise OrderingError(f"matrix acts on {A.ordering.value}, right-hand side is {rhs.ordering.value}")
        return rhs.values
    return np.asarray(rhs, dtype=float)


def _padded_band(A, I, lo, up):
    """Band array of diagonal block I padded to non-negative (lower, upper)."""
    size = A.row_sizes[I]
    lower, upper = max(lo, 0), max(up, 0)
    ab = np.zeros((lower + upper + 1, size))
    if (I, I) in A._bands:
        src = A.band_data(I, I)
        for d in range(-lo, up + 1):
            ab[upper - d] = src[up - d]
    return lower, upper, ab


def partition_by_mode(A, rhs, tol=1e-13):
    """Split a mode-decoupled FourierMajor matrix into independent banded systems."""
    if A.ordering is not Ordering.FOURIER_MAJOR:
        raise OrderingError("partition_by_mode needs a FourierMajor matrix")
    if A.row_sizes != A.col_sizes:
        raise ValueError("matrix must be square with matching block structure")
    for (I, J) in A.stored_blocks():
        if I != J and np.any(np.abs(A.band_data(I, J)) > tol):
            raise NotDecoupledError(f"modes {I} and {J} are coupled")
    b = _as_array(rhs, A)
    blocks = []
    for k, size in enumerate(A.row_sizes):
        lo, up = A._bands.get((k, k), (0, 0))
        lower, upper, ab = _padded_band(A, k, lo, up)
        s = A._roff[k]
        blocks.append(ModeBlock(k, lower, upper, ab, b[s:s + size].copy()))
    return FourierBlockSystem(blocks, len(A.row_sizes) - 1)


@dataclass
class SolveResult:
    solution: np.ndarray
    residual: float
    path: str

    def as_coefficients(self, like):
        return like.with_values(self.solution)


def _solve_global(A, b):
    S = A.to_sparse().tocoo()
    P = A.mask_pattern().tocoo()
    n = A.shape[0]
    lower = int(max(0, np.max(P.row - P.col))) if P.nnz else 0
    upper = int(max(0, np.max(P.col - P.row))) if P.nnz else 0
    ab = np.zeros((lower + upper + 1, n))
    ab[upper + S.row - S.col, S.col] = S.data
    try:
        x = solve_banded((lower, upper), ab, b, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise SingularSystemError(f"global system is singular: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("global system is singular")
    return x


def solve(A, rhs, path="auto"):
    """Solve A x = rhs by per-mode banded LU when decoupled, else one global banded LU.

    ``path`` is "auto", "decoupled" or "coupled".  The returned residual is
    max |A x - rhs|.
    """
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    b = _as_array(rhs, A)
    if path not in ("auto", "decoupled", "coupled"):
        raise ValueError(f"unknown path {path!r}")
    x = None
    used = "coupled"
    if path != "coupled" and A.ordering is Ordering.FOURIER_MAJOR and A.row_sizes == A.col_sizes:
        try:
            system = partition_by_mode(A, b)
        except NotDecoupledError:
            if path == "decoupled":
                raise
        else:
            x = system.solve()
            used = "decoupled"
    elif path == "decoupled":
        raise NotDecoupledError("decoupled path needs a square FourierMajor matrix")
    if x is None:
        x = _solve_global(A, b)
    residual = float(np.max(np.abs(A.to_sparse() @ x - b))) if len(b) else 0.0
    return SolveResult(x, residual, used)
