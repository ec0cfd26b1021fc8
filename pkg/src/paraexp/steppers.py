"""Fixed-step explicit integrators: classical RK4 and the FIT leapfrog scheme."""
from __future__ import annotations

import enum
import warnings

import numpy as np

from .linode import (LinearOdeSystem, NumericalError, SampledSolution, sample_grid,
                     spmv)

__all__ = [
    "StepperKind",
    "CflWarning",
    "rk4_step",
    "leapfrog_step",
    "integrate",
    "step_times",
    "estimate_omega_max",
    "cfl_number",
]


class StepperKind(str, enum.Enum):
    RK4 = "rk4"
    LEAPFROG = "leapfrog"

    @classmethod
    def parse(cls, value) -> "StepperKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown stepper {value!r}; choose from "
                             f"{[k.value for k in cls]}") from None


# stability limits of dt * omega_max on the imaginary axis
CFL_LIMIT = {StepperKind.LEAPFROG: 2.0, StepperKind.RK4: 2.0 * np.sqrt(2.0)}


class CflWarning(RuntimeWarning):
    pass


def rk4_step(sys: LinearOdeSystem, u, t: float, dt: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``u' = A u + g(t)``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = np.asarray(u, dtype=np.float64)
    half = 0.5 * dt
    k1 = sys.rhs(t, u)
    k2 = sys.rhs(t + half, u + half * k1)
    k3 = sys.rhs(t + half, u + half * k2)
    k4 = sys.rhs(t + dt, u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def leapfrog_step(fit, h, e, t: float, dt: float, j):
    """Advance the staggered pair ``(h^{n-1/2}, e^n)`` to ``(h^{n+1/2}, e^{n+1})``.

    ``fit`` is a :class:`~paraexp.fitwave.FitOperators`, ``t`` the time of
    ``e`` and ``j(t)`` the current (A) impressed on the primal edges::

        h^{n+1/2} = h^{n-1/2} - dt * M_mu^-1 C e^n
        e^{n+1}   = e^n + dt * M_eps^-1 (C~ h^{n+1/2} - j(t + dt/2))
    """
    h_new = h - dt * (spmv(fit.c, e) / fit.m_mu)
    e_new = e + dt * ((spmv(fit.c_dual, h_new) - j(t + 0.5 * dt)) / fit.m_eps)
    return h_new, e_new


def step_times(t_a: float, t_b: float, dt: float) -> np.ndarray:
    """Sample times for a trajectory on ``[t_a, t_b]``; always ends on ``t_b``."""
    times = sample_grid(t_a, t_b, dt)
    if times[-1] < t_b:
        times = np.append(times, t_b)
    return times


def integrate(sys: LinearOdeSystem, interval, dt: float, kind=StepperKind.RK4,
              times=None) -> SampledSolution:
    """Integrate ``sys`` from ``sys.u0`` at ``interval[0]`` to ``interval[1]``.

    The trajectory is recorded at every step. When ``times`` is given it is
    used as the step grid verbatim (it must start at ``interval[0]`` and end
    at ``interval[1]``); otherwise a uniform grid with a shortened last step
    is used.
    """
    t_a, t_b = map(float, interval)
    if not t_b > t_a:
        raise ValueError(f"empty interval ({t_a}, {t_b}]")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    kind = StepperKind.parse(kind)
    if times is None:
        times = step_times(t_a, t_b, dt)
    else:
        times = np.asarray(times, dtype=np.float64)
        if times[0] != t_a or times[-1] != t_b:
            raise ValueError("times must start at interval[0] and end at interval[1]")
    if kind is StepperKind.RK4:
        states = _run_rk4(sys, times)
    else:
        states = _run_leapfrog(sys, times)
    return SampledSolution(times, states)


def _check_finite(u, k):
    if not np.all(np.isfinite(u)):
        raise NumericalError(f"non-finite state at step {k}")


def _run_rk4(sys, times):
    states = np.empty((times.size, sys.n))
    u = np.array(sys.u0)
    states[0] = u
    for k in range(times.size - 1):
        u = rk4_step(sys, u, times[k], times[k + 1] - times[k])
        _check_finite(u, k + 1)
        states[k + 1] = u
    return states


def _run_leapfrog(sys, times):
    fit = sys.structure
    if fit is None or not hasattr(fit, "m_eps"):
        raise ValueError("leapfrog needs a system carrying FIT operators")
    n_h = fit.n_h
    m_eps = fit.m_eps

    def current(t):
        # e-block of g is -M_eps^-1 j
        return -m_eps * sys.g(t)[n_h:]

    def curl_h(e):
        return spmv(fit.c, e) / fit.m_mu

    states = np.empty((times.size, sys.n))
    e = sys.u0[n_h:].copy()
    states[0] = sys.u0
    dt0 = times[1] - times[0]
    # forward-Euler half step bootstraps h^{1/2}
    h_half = sys.u0[:n_h] - 0.5 * dt0 * curl_h(e)
    last = times.size - 2
    for k in range(times.size - 1):
        t, dt = times[k], times[k + 1] - times[k]
        if k < last or abs(dt - dt0) <= 1e-9 * dt0:
            e = e + dt * ((spmv(fit.c_dual, h_half) - current(t + 0.5 * dt)) / m_eps)
            h_next = h_half - dt * curl_h(e)
            states[k + 1, :n_h] = 0.5 * (h_half + h_next)
            h_half = h_next
        else:
            # shortened final step: synchronized Stormer-Verlet step from h^n
            h_mid = states[k, :n_h] - 0.5 * dt * curl_h(e)
            e = e + dt * ((spmv(fit.c_dual, h_mid) - current(t + 0.5 * dt)) / m_eps)
            states[k + 1, :n_h] = h_mid - 0.5 * dt * curl_h(e)
        states[k + 1, n_h:] = e
        _check_finite(states[k + 1], k + 1)
    return states


def estimate_omega_max(a, weights=None, iters: int = 50, seed: int = 0) -> float:
    """Estimate the largest ``|lambda|`` of ``a`` by power iteration on ``a @ a``.

    ``weights`` is the diagonal of an inner product in which ``a`` is
    skew-adjoint (the FIT mass matrix); the iteration then converges from
    below to the true value.
    """
    n = a.nrows
    if n == 0:
        return 0.0
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    x = np.random.default_rng(seed).standard_normal(n)
    lam = 0.0
    for _ in range(iters):
        nrm = np.sqrt(np.sum(w * x * x))
        if nrm == 0.0:
            return 0.0
        x = x / nrm
        y = spmv(a, spmv(a, x))
        lam = np.sqrt(np.sum(w * y * y))
        x = y
    return float(np.sqrt(lam))


def cfl_number(sys: LinearOdeSystem, dt: float, kind=StepperKind.RK4,
               warn: bool = True) -> dict:
    """Return ``{"omega_max", "cfl", "limit", "ok"}`` and warn on violation."""
    kind = StepperKind.parse(kind)
    fit = sys.structure
    weights = None
    if fit is not None and hasattr(fit, "m_eps"):
        weights = np.concatenate([fit.m_mu, fit.m_eps])
    omega = estimate_omega_max(sys.a, weights)
    cfl = dt * omega
    info = {"omega_max": omega, "cfl": cfl, "limit": CFL_LIMIT[kind],
            "ok": bool(cfl <= CFL_LIMIT[kind])}
    if warn and not info["ok"]:
        warnings.warn(f"{kind.value}: dt*omega_max = {cfl:.3f} exceeds "
                      f"{CFL_LIMIT[kind]:.3f}", CflWarning, stacklevel=2)
    return info
