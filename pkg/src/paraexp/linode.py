"""Sparse operators, state vectors and the linear ODE model ``u' = A u + g(t)``.

State vectors are plain one-dimensional ``float64`` numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
import scipy.sparse as sp

__all__ = [
    "NumericalError",
    "SparseMatrix",
    "LinearOdeSystem",
    "SampledSolution",
    "spmv",
    "sample_grid",
    "weighted_norms",
]

#: relative tolerance used to decide whether a step divides an interval
GRID_RTOL = 1e-12


class NumericalError(ArithmeticError):
    """Raised when a computation produces NaN/Inf or otherwise breaks down."""


class SparseMatrix:
    """Real sparse matrix in compressed-row form.

    Instances are immutable: the index and value arrays are marked read-only
    so the same operator can be shared by concurrent workers.

    Parameters
    ----------
    nrows, ncols : int
        Shape.
    row_offsets : array_like of int, length ``nrows + 1``
    col_indices : array_like of int
    values : array_like of float
    """

    __slots__ = ("nrows", "ncols", "row_offsets", "col_indices", "values", "_csr")

    def __init__(self, nrows, ncols, row_offsets, col_indices, values):
        row_offsets = np.array(row_offsets, dtype=np.int64)
        col_indices = np.array(col_indices, dtype=np.int64)
        values = np.array(values, dtype=np.float64)
        nrows, ncols = int(nrows), int(ncols)
        if nrows < 0 or ncols < 0:
            raise ValueError("negative matrix dimension")
        if row_offsets.shape != (nrows + 1,):
            raise ValueError("row_offsets must have length nrows + 1")
        if row_offsets[0] != 0 or np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be non-decreasing")
        if row_offsets[-1] != values.size or col_indices.size != values.size:
            raise ValueError("row_offsets must end at the number of stored values")
        if col_indices.size and (col_indices.min() < 0 or col_indices.max() >= ncols):
            raise ValueError("column index out of range")
        for i in range(nrows):
            cols = col_indices[row_offsets[i]:row_offsets[i + 1]]
            if np.unique(cols).size != cols.size:
                raise ValueError(f"duplicate column index in row {i}")
        for arr in (row_offsets, col_indices, values):
            arr.flags.writeable = False
        self.nrows = nrows
        self.ncols = ncols
        self.row_offsets = row_offsets
        self.col_indices = col_indices
        self.values = values
        self._csr = sp.csr_matrix((values, col_indices, row_offsets), shape=(nrows, ncols))

    # -- construction -----------------------------------------------------

    @classmethod
    def from_triplets(cls, nrows, ncols, rows, cols, vals) -> "SparseMatrix":
        """Build from coordinate triplets; duplicates are summed.

        Entries are sorted by (row, column) before merging, so the result does
        not depend on the order in which the triplets were given.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= nrows):
            raise ValueError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= ncols):
            raise ValueError("column index out of range")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            new = np.ones(rows.size, dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            vals = np.add.reduceat(vals, starts)
            rows, cols = rows[starts], cols[starts]
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        return cls(nrows, ncols, np.cumsum(offsets), cols, vals)

    @classmethod
    def from_scipy(cls, mat) -> "SparseMatrix":
        csr = sp.csr_matrix(mat, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        return cls(csr.shape[0], csr.shape[1], csr.indptr, csr.indices, csr.data)

    @classmethod
    def from_dense(cls, arr) -> "SparseMatrix":
        arr = np.atleast_2d(np.asarray(arr, dtype=np.float64))
        return cls.from_scipy(sp.csr_matrix(arr))

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n))

    @classmethod
    def zeros(cls, nrows: int, ncols: int | None = None) -> "SparseMatrix":
        ncols = nrows if ncols is None else ncols
        return cls(nrows, ncols, np.zeros(nrows + 1), [], [])

    # -- views ------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    def to_scipy(self) -> sp.csr_matrix:
        """Return a copy as a scipy CSR matrix."""
        return self._csr.copy()

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr.T)

    @property
    def T(self) -> "SparseMatrix":
        return self.transpose()

    def dropzeros(self) -> "SparseMatrix":
        csr = self._csr.copy()
        csr.eliminate_zeros()
        return SparseMatrix.from_scipy(csr)

    def norm1(self) -> float:
        """Maximum absolute column sum."""
        if self.nnz == 0:
            return 0.0
        return float(np.max(np.bincount(self.col_indices, np.abs(self.values),
                                        minlength=self.ncols)))

    def __matmul__(self, x):
        if isinstance(x, SparseMatrix):
            if self.ncols != x.nrows:
                raise ValueError(f"shape mismatch {self.shape} @ {x.shape}")
            return SparseMatrix.from_scipy(self._csr @ x._csr)
        return spmv(self, x)

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def spmv(a: SparseMatrix, x) -> np.ndarray:
    """Return ``a @ x``.

    Each output entry is accumulated over the row's stored entries in
    column order.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != a.ncols:
        raise ValueError(f"vector of length {x.shape} incompatible with {a.shape}")
    return a._csr @ x


def sample_grid(t0: float, t_end: float, dt: float) -> np.ndarray:
    """Uniform grid ``t0, t0 + dt, ...`` not exceeding ``t_end``.

    Points are computed as ``t0 + k*dt`` (no running sums). If the interval is
    an integral number of steps (relative tolerance ``GRID_RTOL``) the last
    point is set to exactly ``t_end``.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not t_end > t0:
        raise ValueError(f"t_end must exceed t0 ({t0} >= {t_end})")
    ratio = (t_end - t0) / dt
    nsteps = round(ratio)
    if abs(ratio - nsteps) <= GRID_RTOL * max(1.0, ratio):
        times = t0 + np.arange(nsteps + 1) * dt
        times[-1] = t_end
        return times
    return t0 + np.arange(int(np.floor(ratio)) + 1) * dt


def weighted_norms(x) -> tuple[float, float]:
    """Return ``(max|x_i|, ||x||_2)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0, 0.0
    big = float(np.max(np.abs(x)))
    if big == 0.0:
        return 0.0, 0.0
    # scaled to avoid under/overflow of the squares
    y = x / big
    return big, big * float(np.sqrt(np.sum(y * y)))


def _zero_source(n: int) -> Callable[[float], np.ndarray]:
    zero = np.zeros(n)
    zero.flags.writeable = False
    return lambda t: zero


@dataclass(frozen=True)
class LinearOdeSystem:
    """The initial value problem ``u' = a u + source(t)``, ``u(t0) = u0``.

    ``structure`` optionally carries model-specific data; FIT systems store
    their :class:`~paraexp.fitwave.FitOperators` there, which enables the
    leapfrog stepper.
    """

    a: SparseMatrix
    source: Callable[[float], np.ndarray] | None = None
    u0: np.ndarray | None = None
    t0: float = 0.0
    structure: Any = field(default=None, compare=False)

    def __post_init__(self):
        if self.a.nrows != self.a.ncols:
            raise ValueError(f"system matrix must be square, got {self.a.shape}")
        n = self.a.nrows
        u0 = np.zeros(n) if self.u0 is None else np.array(self.u0, dtype=np.float64)
        if u0.shape != (n,):
            raise ValueError(f"u0 has shape {u0.shape}, expected ({n},)")
        u0.flags.writeable = False
        object.__setattr__(self, "u0", u0)
        if self.source is None:
            object.__setattr__(self, "source", _zero_source(n))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def n(self) -> int:
        return self.a.nrows

    def g(self, t: float) -> np.ndarray:
        val = np.asarray(self.source(t), dtype=np.float64)
        if val.shape != (self.n,):
            raise ValueError(f"source returned shape {val.shape}, expected ({self.n},)")
        return val

    def rhs(self, t: float, u) -> np.ndarray:
        return spmv(self.a, u) + self.g(t)

    def with_initial(self, u0, t0: float | None = None) -> "LinearOdeSystem":
        return LinearOdeSystem(self.a, self.source, u0,
                               self.t0 if t0 is None else t0, self.structure)

    def homogeneous(self) -> "LinearOdeSystem":
        return LinearOdeSystem(self.a, None, self.u0, self.t0, self.structure)


@dataclass(frozen=True)
class SampledSolution:
    """States ``states[k]`` at times ``times[k]``; ``states`` is (nt, n)."""

    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states, dtype=np.float64)
        if states.ndim == 1:
            states = states[:, None]
        if times.ndim != 1 or states.ndim != 2 or states.shape[0] != times.shape[0]:
            raise ValueError("times and states must have equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    def __len__(self) -> int:
        return self.times.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        """Index of the sample at time ``t`` (matched to ``rtol`` of the spacing)."""
        k = int(np.argmin(np.abs(self.times - t)))
        spacing = np.min(np.diff(self.times)) if len(self) > 1 else max(abs(t), 1.0)
        if abs(self.times[k] - t) > rtol * spacing:
            raise KeyError(f"no sample at t={t!r}")
        return k

    def at(self, t: float) -> np.ndarray:
        return self.states[self.index_of(t)]
