"""The ParaExp driver.

The horizon is cut into ``p`` intervals. Worker ``j`` integrates the
particular problem on its interval from a zero state with a time stepper and
then propagates the end value ``v_j(T_j)`` over the rest of the horizon with
the matrix exponential. Worker ``p`` instead propagates the initial value.
The total solution is the superposition of the pieces.
"""
from __future__ import annotations

import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .expm import ExpmConfig, ExpmMode, expm_action_taylor, expm_dense, select_taylor_params
from .linode import LinearOdeSystem, SampledSolution, SparseMatrix, sample_grid
from .steppers import StepperKind, integrate

__all__ = [
    "TimePartition",
    "ParaexpRun",
    "WorkerError",
    "partition_uniform",
    "solve_particular",
    "propagate_homogeneous",
    "superpose",
    "paraexp_solve",
]


class WorkerError(RuntimeError):
    def __init__(self, worker: int, cause: BaseException):
        super().__init__(f"worker {worker} failed: {type(cause).__name__}: {cause}")
        self.worker = worker
        self.cause = cause


@dataclass(frozen=True)
class TimePartition:
    """Interval endpoints ``T_0 < T_1 < ... < T_p``."""

    boundaries: np.ndarray

    def __post_init__(self):
        b = np.array(self.boundaries, dtype=np.float64)
        if b.ndim != 1 or b.size < 2:
            raise ValueError("a partition needs at least two boundaries")
        if np.any(np.diff(b) <= 0):
            raise ValueError("partition boundaries must be strictly increasing")
        b.flags.writeable = False
        object.__setattr__(self, "boundaries", b)

    @property
    def p(self) -> int:
        return self.boundaries.size - 1

    def interval(self, j: int) -> tuple[float, float]:
        """The interval ``(T_{j-1}, T_j]`` for ``j = 1..p``."""
        if not 1 <= j <= self.p:
            raise IndexError(f"interval index {j} outside 1..{self.p}")
        return float(self.boundaries[j - 1]), float(self.boundaries[j])


@dataclass
class ParaexpRun:
    """Everything a ParaExp solve produces.

    ``particular[j-1]`` is ``v_j`` sampled on ``[T_{j-1}, T_j]`` and
    ``homogeneous[i-1]`` is ``w_i`` sampled on ``[T_{i-1}, T_p]``; both
    include their starting point.
    """

    partition: TimePartition
    particular: list[SampledSolution]
    homogeneous: list[SampledSolution]
    total: SampledSolution | None = None
    metadata: dict = field(default_factory=dict)


def partition_uniform(t0: float, t_end: float, p: int) -> TimePartition:
    if p < 1:
        raise ValueError(f"need at least one interval, got p={p}")
    if not t_end > t0:
        raise ValueError(f"t_end must exceed t0 ({t0} >= {t_end})")
    bounds = t0 + np.arange(p + 1) * ((t_end - t0) / p)
    bounds[-1] = t_end
    return TimePartition(bounds)


def solve_particular(sys: LinearOdeSystem, interval, dt: float, kind=StepperKind.RK4,
                     times=None) -> SampledSolution:
    """Integrate ``v' = A v + g`` on ``interval`` starting from ``v = 0``."""
    t_a = float(interval[0])
    zero_start = sys.with_initial(np.zeros(sys.n), t0=t_a)
    return integrate(zero_start, interval, dt, kind, times=times)


def _same_gap(a: float, b: float) -> bool:
    return abs(a - b) <= 1e-9 * max(abs(a), abs(b))


def propagate_homogeneous(a: SparseMatrix, w0, t_start: float, out_times,
                          cfg: ExpmConfig | None = None) -> SampledSolution:
    """Sample ``w(t) = exp((t - t_start) a) w0`` at ``t_start`` and ``out_times``.

    The solution is advanced sample to sample. Gaps that agree to a relative
    1e-9 share one propagator (one dense exponential, or one Taylor
    parameter choice).
    """
    cfg = cfg or ExpmConfig()
    out_times = np.asarray(out_times, dtype=np.float64)
    if out_times.size and (out_times[0] <= t_start or np.any(np.diff(out_times) <= 0)):
        raise ValueError("out_times must be sorted and lie after t_start")
    w = np.array(w0, dtype=np.float64)
    times = np.concatenate([[t_start], out_times])
    states = np.empty((times.size, w.size))
    states[0] = w
    gap_ref = None
    prop = None
    for k in range(1, times.size):
        gap = times[k] - times[k - 1]
        if gap_ref is None or not _same_gap(gap, gap_ref):
            gap_ref = gap
            if cfg.mode is ExpmMode.DENSE:
                prop = expm_dense(a, gap)
            else:
                prop = (select_taylor_params(a, gap, cfg.tol) if cfg.auto_params
                        else (cfg.m, cfg.s))
        if not w.any():
            pass  # zero stays zero; skips the work for sourceless intervals
        elif cfg.mode is ExpmMode.DENSE:
            w = prop @ w
        else:
            w = expm_action_taylor(a, w, gap_ref, *prop)
        states[k] = w
    return SampledSolution(times, states)


def superpose(run: ParaexpRun, times=None) -> SampledSolution:
    """Assemble ``u(t) = v_j(t) + sum_{i<=j} w_i(t)`` for ``t`` in ``I_j``.

    A boundary ``T_j`` belongs to ``I_j``; ``t0`` itself belongs to ``I_1``.
    """
    bounds = run.partition.boundaries
    p = run.partition.p
    if len(run.particular) != p or len(run.homogeneous) != p:
        raise ValueError("run must hold p particular and p homogeneous solutions")
    if times is None:
        times = np.concatenate([run.particular[0].times]
                               + [v.times[1:] for v in run.particular[1:]])
    times = np.asarray(times, dtype=np.float64)
    n = run.particular[0].dim
    total = np.zeros((times.size, n))
    # global index of each boundary
    starts = [_locate(times, bounds[j]) for j in range(p + 1)]
    for j in range(1, p + 1):
        lo = starts[j - 1] if j == 1 else starts[j - 1] + 1
        hi = starts[j]
        v = run.particular[j - 1]
        _check_grid(v, times, starts[j - 1], hi, f"v_{j}")
        acc = v.states[lo - starts[j - 1]:].copy()
        for i in range(1, j + 1):
            w = run.homogeneous[i - 1]
            _check_grid(w, times, starts[i - 1], starts[p], f"w_{i}")
            acc += w.states[lo - starts[i - 1]:hi - starts[i - 1] + 1]
        total[lo:hi + 1] = acc
    return SampledSolution(times, total)


def _locate(times, t) -> int:
    k = int(np.searchsorted(times, t))
    if k >= times.size or times[k] != t:
        raise ValueError(f"partition boundary {t!r} is not a sample of the global grid")
    return k


def _check_grid(sol: SampledSolution, times, lo, hi, name):
    if len(sol) != hi - lo + 1 or not np.array_equal(sol.times, times[lo:hi + 1]):
        raise ValueError(f"{name} is not sampled on the global grid")


def global_grid(partition: TimePartition, dt: float) -> tuple[np.ndarray, TimePartition]:
    """Uniform grid over the partition with the boundaries snapped onto it."""
    t0, t_end = float(partition.boundaries[0]), float(partition.boundaries[-1])
    times = sample_grid(t0, t_end, dt)
    if times[-1] != t_end:
        raise ValueError(f"dt={dt} does not divide the horizon ({t0}, {t_end}]")
    snapped = []
    for b in partition.boundaries:
        k = int(round((b - t0) / dt))
        if not 0 <= k < times.size or abs(times[k] - b) > 1e-9 * dt:
            raise ValueError(f"partition boundary {b!r} is not a multiple of dt={dt}")
        snapped.append(times[k])
    return times, TimePartition(snapped)


def paraexp_solve(sys: LinearOdeSystem, t_end: float | None = None, p: int = 1,
                  dt: float = 1e-5, kind=StepperKind.RK4, cfg: ExpmConfig | None = None,
                  partition: TimePartition | None = None,
                  max_workers: int | None = None) -> ParaexpRun:
    """Solve ``sys`` on ``(t0, t_end]`` with ParaExp on ``p`` workers.

    Pass ``partition`` to use non-uniform intervals (then ``t_end`` and ``p``
    are taken from it). Each boundary must be a multiple of ``dt`` from
    ``sys.t0``. Results do not depend on worker scheduling.
    """
    cfg = cfg or ExpmConfig()
    kind = StepperKind.parse(kind)
    if partition is None:
        if t_end is None:
            raise ValueError("give t_end or a partition")
        partition = partition_uniform(sys.t0, t_end, p)
    elif partition.boundaries[0] != sys.t0:
        raise ValueError("partition must start at the system's t0")
    times, partition = global_grid(partition, dt)
    p = partition.p
    bounds = partition.boundaries
    index = [_locate(times, b) for b in bounds]
    a = sys.a

    def work(j):
        rec = {"worker": j, "particular": j, "homogeneous": j + 1 if j != p else 1,
               "thread": threading.get_ident()}
        tic = time.perf_counter()
        v = solve_particular(sys, partition.interval(j), dt, kind,
                             times=times[index[j - 1]:index[j] + 1])
        rec["particular_seconds"] = time.perf_counter() - tic
        if j != p:
            w = propagate_homogeneous(a, v.final, bounds[j], times[index[j] + 1:], cfg)
        else:
            w = propagate_homogeneous(a, sys.u0, bounds[0], times[1:], cfg)
        rec["wall_clock"] = time.perf_counter() - tic
        rec["homogeneous_thread"] = threading.get_ident()
        return v, w, rec

    workers = max_workers or p
    futures = {}
    tic = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="paraexp") as pool:
        for j in range(1, p + 1):
            futures[j] = pool.submit(work, j)
        results = {}
        for j in range(1, p + 1):
            try:
                results[j] = futures[j].result()
            except Exception as exc:
                for f in futures.values():
                    f.cancel()
                raise WorkerError(j, exc) from exc

    particular = [results[j][0] for j in range(1, p + 1)]
    homogeneous = [None] * p
    for j in range(1, p + 1):
        homogeneous[results[j][2]["homogeneous"] - 1] = results[j][1]
    metadata = {
        "stepper": kind.value,
        "dt": dt,
        "expm": {"mode": cfg.mode.value, "m": cfg.m, "s": cfg.s,
                 "auto_params": cfg.auto_params},
        "p": p,
        "boundaries": [float(b) for b in bounds],
        "workers": [results[j][2] for j in range(1, p + 1)],
    }
    run = ParaexpRun(partition, particular, homogeneous, metadata=metadata)
    run.total = superpose(run, times)
    run.metadata["total_seconds"] = time.perf_counter() - tic
    return run
