"""Matrix exponential: dense oracle and the scaled truncated-Taylor action."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .linode import NumericalError, SparseMatrix, spmv

__all__ = [
    "ExpmMode",
    "ExpmConfig",
    "DENSE_LIMIT",
    "expm_dense",
    "expm_action_taylor",
    "select_taylor_params",
    "expm_action",
]

#: largest dimension accepted by :func:`expm_dense`
DENSE_LIMIT = 4000
TAYLOR_ORDER = 20


class ExpmMode(str, enum.Enum):
    DENSE = "dense"
    TAYLOR = "taylor"

    @classmethod
    def parse(cls, value) -> "ExpmMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown expm mode {value!r}; choose from "
                             f"{[k.value for k in cls]}") from None


@dataclass(frozen=True)
class ExpmConfig:
    """How homogeneous solutions are propagated.

    With ``auto_params`` the Taylor order and substep count are chosen per
    time gap by :func:`select_taylor_params`; otherwise ``m`` and ``s`` are
    used as given. ``DENSE`` ignores all of them.
    """

    mode: ExpmMode = ExpmMode.DENSE
    m: int = TAYLOR_ORDER
    s: int = 1
    auto_params: bool = True
    tol: float = 1e-16

    def __post_init__(self):
        object.__setattr__(self, "mode", ExpmMode.parse(self.mode))
        if self.m < 1 or self.s < 1:
            raise ValueError(f"Taylor order and substeps must be >= 1 (m={self.m}, s={self.s})")


def _as_dense(a) -> np.ndarray:
    if isinstance(a, SparseMatrix):
        return a.to_dense()
    return np.atleast_2d(np.asarray(a, dtype=np.float64))


def expm_dense(a, t: float = 1.0) -> np.ndarray:
    """Return ``exp(t*a)`` as a dense array (scaling and squaring, Pade kernel)."""
    n_rows, n_cols = a.shape
    if n_rows != n_cols:
        raise ValueError(f"matrix must be square, got {a.shape}")
    if n_rows > DENSE_LIMIT:
        raise ValueError(f"dense exponential refused for n={n_rows} > {DENSE_LIMIT}; "
                         "use the Taylor action mode instead")
    return scipy.linalg.expm(t * _as_dense(a))


def select_taylor_params(a: SparseMatrix, t: float, tol: float = 1e-16) -> tuple[int, int]:
    """Pick ``(m, s)`` for :func:`expm_action_taylor`.

    ``s`` is the smallest count with ``||t*a||_1 / s <= 1``. The order is
    20, raised only if ``1/(m+1)!`` would not beat ``tol``.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tol must lie in (0, 1), got {tol}")
    m = TAYLOR_ORDER
    while 1.0 / math.factorial(m + 1) >= tol:
        m += 1
    norm = abs(t) * a.norm1()
    s = max(1, math.ceil(norm))
    return m, s


def expm_action_taylor(a: SparseMatrix, b, t: float, m: int, s: int) -> np.ndarray:
    """Approximate ``exp(t*a) @ b`` by ``s`` applications of a degree-``m`` Taylor
    polynomial of ``exp((t/s)*a)``.

    Each polynomial is evaluated in Horner form with ``m`` sparse products;
    no matrix power is ever formed.
    """
    if m < 1 or s < 1:
        raise ValueError(f"m and s must be >= 1 (m={m}, s={s})")
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (a.ncols,):
        raise ValueError(f"vector of shape {b.shape} incompatible with {a.shape}")
    h = t / s
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(s):
            y = b
            for j in range(m, 0, -1):
                y = b + (h / j) * spmv(a, y)
            b = y
            if not np.all(np.isfinite(b)):
                raise NumericalError(f"Taylor recurrence diverged (m={m}, s={s}) "
                                     f"at iterate {i + 1}")
    return b


def expm_action(a: SparseMatrix, b, t: float, cfg: ExpmConfig | None = None) -> np.ndarray:
    """``exp(t*a) @ b`` using the method selected in ``cfg``."""
    cfg = cfg or ExpmConfig()
    if cfg.mode is ExpmMode.DENSE:
        return expm_dense(a, t) @ np.asarray(b, dtype=np.float64)
    m, s = select_taylor_params(a, t, cfg.tol) if cfg.auto_params else (cfg.m, cfg.s)
    return expm_action_taylor(a, b, t, m, s)
