"""Series RLC circuit driven by a sinusoidal voltage source.

The loop current obeys ``L i'' + R i' + i/C = U0 w0 cos(w0 t)`` with
``i(0) = 0`` and ``i'(0) = -U_L0 / L``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linode import LinearOdeSystem, SparseMatrix

__all__ = ["RlcParams", "rlc_system", "rlc_closed_form", "rlc_closed_form_derivative"]


@dataclass(frozen=True)
class RlcParams:
    """Circuit data. R, L, C are artifact defaults (underdamped, w_n = 1e4 1/s)."""

    r: float = 10.0
    l: float = 1e-3
    c: float = 1e-5
    u0_amp: float = 10.0
    omega0: float = 2000.0 * math.pi**2
    u_l0: float = 12.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("resistance must be non-negative")
        if not (self.l > 0 and self.c > 0):
            raise ValueError("inductance and capacitance must be positive")

    @property
    def underdamped(self) -> bool:
        return self.r**2 < 4.0 * self.l / self.c


def rlc_system(p: RlcParams = RlcParams()) -> LinearOdeSystem:
    """First-order form with state ``[i, di/dt]``."""
    a = SparseMatrix.from_dense([[0.0, 1.0], [-1.0 / (p.l * p.c), -p.r / p.l]])
    amp = p.u0_amp * p.omega0 / p.l
    w0 = p.omega0

    def source(t):
        return np.array([0.0, amp * math.cos(w0 * t)])

    return LinearOdeSystem(a, source, np.array([0.0, -p.u_l0 / p.l]), 0.0)


def _coefficients(p: RlcParams):
    if not p.underdamped:
        raise ValueError("closed form implemented for the underdamped case R^2 < 4L/C only")
    alpha = p.r / p.l
    wn2 = 1.0 / (p.l * p.c)
    w0 = p.omega0
    force = p.u0_amp * w0 / p.l
    det = (wn2 - w0**2) ** 2 + (alpha * w0) ** 2
    # steady state a cos + b sin
    a = force * (wn2 - w0**2) / det
    b = force * alpha * w0 / det
    wd = math.sqrt(wn2 - 0.25 * alpha**2)
    c1 = -a
    c2 = (-p.u_l0 / p.l - b * w0 + 0.5 * alpha * c1) / wd
    return alpha, w0, wd, a, b, c1, c2


def rlc_closed_form(p: RlcParams, t):
    """Analytic loop current (A) at ``t``; scalar or array."""
    alpha, w0, wd, a, b, c1, c2 = _coefficients(p)
    t = np.asarray(t, dtype=np.float64)
    decay = np.exp(-0.5 * alpha * t)
    i = (a * np.cos(w0 * t) + b * np.sin(w0 * t)
         + decay * (c1 * np.cos(wd * t) + c2 * np.sin(wd * t)))
    return float(i) if i.ndim == 0 else i


def rlc_closed_form_derivative(p: RlcParams, t):
    """Analytic ``di/dt`` (A/s)."""
    alpha, w0, wd, a, b, c1, c2 = _coefficients(p)
    t = np.asarray(t, dtype=np.float64)
    decay = np.exp(-0.5 * alpha * t)
    cos_d, sin_d = np.cos(wd * t), np.sin(wd * t)
    di = (w0 * (b * np.cos(w0 * t) - a * np.sin(w0 * t))
          + decay * ((c2 * wd - 0.5 * alpha * c1) * cos_d
                     - (c1 * wd + 0.5 * alpha * c2) * sin_d))
    return float(di) if di.ndim == 0 else di
