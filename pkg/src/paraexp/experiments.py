"""The RLC and cavity-wave experiments, error reports and CSV output."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

from . import fitwave
from .expm import ExpmConfig, ExpmMode
from .linode import LinearOdeSystem, NumericalError, SampledSolution, sample_grid
from .rlc import RlcParams, rlc_closed_form, rlc_system
from .solver import paraexp_solve
from .steppers import StepperKind, cfl_number, integrate

__all__ = [
    "RunConfig",
    "ErrorReport",
    "reference_solution",
    "compute_errors",
    "run_rlc",
    "run_wave",
    "write_csv",
]

log = logging.getLogger(__name__)

DEFAULTS = {
    "rlc": {"dt": 1e-5, "t_end": 3e-3, "expm": ExpmMode.DENSE, "snapshot_time": None},
    "wave": {"dt": 2e-9, "t_end": 6e-8, "expm": ExpmMode.TAYLOR, "snapshot_time": 4.4e-8},
}

NORMALIZATION = "rel_error = abs_error / max|reference|"


@dataclass(frozen=True)
class RunConfig:
    experiment: str = "rlc"
    p: int = 3
    dt: float | None = None
    t_end: float | None = None
    stepper: StepperKind = StepperKind.RK4
    expm: ExpmConfig | None = None
    output_dir: Path = Path("paraexp_out")
    snapshot_time: float | None = None
    rlc: RlcParams = field(default_factory=RlcParams)
    grid: fitwave.FitGrid = field(default_factory=fitwave.FitGrid)
    source: fitwave.WaveSourceConfig = field(default_factory=fitwave.WaveSourceConfig)

    def __post_init__(self):
        if self.experiment not in DEFAULTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.p < 1:
            raise ValueError("need at least one worker")
        d = DEFAULTS[self.experiment]
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        if self.dt is None:
            set_("dt", d["dt"])
        if self.t_end is None:
            set_("t_end", d["t_end"])
        if self.expm is None:
            set_("expm", ExpmConfig(mode=d["expm"]))
        if self.snapshot_time is None and self.experiment == "wave":
            set_("snapshot_time", min(d["snapshot_time"], self.t_end))
        set_("stepper", StepperKind.parse(self.stepper))
        set_("output_dir", Path(self.output_dir))
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if self.snapshot_time is not None and not 0 <= self.snapshot_time <= self.t_end:
            raise ValueError(f"snapshot_time={self.snapshot_time} lies outside [0, t_end]")
        if self.experiment == "rlc" and self.stepper is StepperKind.LEAPFROG:
            raise ValueError("leapfrog needs the FIT block structure; the RLC system has none")

    def echo(self) -> list[tuple[str, str]]:
        """Deterministic key/value description for file headers."""
        items = [("experiment", self.experiment), ("workers", self.p),
                 ("dt", _fmt(self.dt)), ("t_end", _fmt(self.t_end)),
                 ("stepper", self.stepper.value), ("expm", self.expm.mode.value)]
        if self.expm.mode is ExpmMode.TAYLOR:
            items.append(("taylor", "auto" if self.expm.auto_params
                          else f"m={self.expm.m} s={self.expm.s}"))
        if self.experiment == "rlc":
            items += [(k, _fmt(v)) for k, v in asdict(self.rlc).items()]
        else:
            g = self.grid
            items += [("grid", f"{g.nx}x{g.ny}x{g.nz} d=({_fmt(g.dx)},{_fmt(g.dy)},{_fmt(g.dz)})"),
                      ("i_max", _fmt(self.source.i_max)),
                      ("sigma_t", _fmt(self.source.sigma_t))]
            if self.snapshot_time is not None:
                items.append(("snapshot_time", _fmt(self.snapshot_time)))
        return [(k, str(v)) for k, v in items]


@dataclass
class ErrorReport:
    times: np.ndarray
    abs_error: np.ndarray
    rel_error: np.ndarray
    summary: dict

    @property
    def max_abs(self) -> float:
        return self.summary["max_abs"]


def reference_solution(sys: LinearOdeSystem, t_end: float, times=None,
                       rtol: float = 1e-10, atol: float = 1e-14) -> SampledSolution:
    """Adaptive Dormand-Prince 5(4) solution, densely sampled at ``times``."""
    if times is not None:
        times = np.asarray(times, dtype=np.float64)
    result = solve_ivp(sys.rhs, (sys.t0, t_end), np.array(sys.u0), method="RK45",
                       rtol=rtol, atol=atol, t_eval=times)
    if result.status != 0:
        raise NumericalError(f"reference integration failed: {result.message}")
    return SampledSolution(result.t, result.y.T)


def compute_errors(sol: SampledSolution, ref: SampledSolution, quantity=None) -> ErrorReport:
    """Error of a scalar diagnostic ``quantity(states)`` (default: first component)."""
    if len(sol) != len(ref) or not np.allclose(sol.times, ref.times, rtol=1e-12, atol=0.0):
        raise ValueError("solution and reference are sampled on different grids")
    if quantity is None:
        quantity = _first_component
    q = np.asarray(quantity(sol.states), dtype=np.float64)
    q_ref = np.asarray(quantity(ref.states), dtype=np.float64)
    abs_err = np.abs(q - q_ref)
    scale = np.max(np.abs(q_ref)) if q_ref.size else 0.0
    rel_err = abs_err / scale if scale > 0 else np.where(abs_err == 0, 0.0, np.inf)
    summary = {
        "max_abs": float(abs_err.max(initial=0.0)),
        "max_rel": float(rel_err.max(initial=0.0)),
        "l2": float(np.sqrt(np.sum(abs_err**2))),
    }
    return ErrorReport(sol.times.copy(), abs_err, rel_err, summary)


def _first_component(states):
    return states[:, 0]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], columns, comments=()) -> Path:
    """Write equal-length columns with 17 significant digits; ``None`` cells are blank."""
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        for key, value in comments:
            fh.write(f"# {key}: {value}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) if not isinstance(v, (int, np.integer)) else str(v)
                             for v in row])
    return path


def _write_metadata(cfg: RunConfig, out: Path, extra: dict) -> Path:
    meta = {"config": dict(cfg.echo()), **extra}
    path = out / "metadata.json"
    path.write_text(json.dumps(meta, indent=2, default=float) + "\n")
    return path


def _write_summary(out: Path, items, comments) -> Path:
    keys, values = zip(*items)
    return write_csv(out / "summary.csv", ["quantity", "value"],
                     [list(keys), [float(v) for v in values]], comments)


def run_rlc(cfg: RunConfig) -> dict:
    """Sequential RK4 and ParaExp on the RLC circuit against the closed form.

    Returns ``{"rk4": ErrorReport, "paraexp": ErrorReport, "run": ParaexpRun,
    "ratio": float, "files": [...]}``.
    """
    if cfg.experiment != "rlc":
        raise ValueError("run_rlc needs experiment='rlc'")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    sys = rlc_system(cfg.rlc)
    cfl = cfl_number(sys, cfg.dt, cfg.stepper)

    tic = time.perf_counter()
    seq = integrate(sys, (sys.t0, cfg.t_end), cfg.dt, cfg.stepper,
                    times=sample_grid(sys.t0, cfg.t_end, cfg.dt))
    seq_seconds = time.perf_counter() - tic
    run = paraexp_solve(sys, cfg.t_end, cfg.p, cfg.dt, cfg.stepper, cfg.expm)
    times = run.total.times
    if not np.array_equal(times, seq.times):
        raise ValueError(f"dt={cfg.dt} does not divide t_end={cfg.t_end}")

    exact = np.zeros((times.size, 2))
    exact[:, 0] = rlc_closed_form(cfg.rlc, times)
    ref = SampledSolution(times, exact)
    err_seq = compute_errors(seq, ref)
    err_pe = compute_errors(run.total, ref)
    ratio = (err_pe.max_abs / err_seq.max_abs if err_seq.max_abs > 0
             else (1.0 if err_pe.max_abs == 0 else np.inf))

    head = cfg.echo() + [("normalization", NORMALIZATION)]
    files = [
        write_csv(out / "trajectory.csv",
                  ["time_s", "i_closed_form_A", "i_rk4_A", "i_paraexp_A"],
                  [times, exact[:, 0], seq.states[:, 0], run.total.states[:, 0]], head),
        write_csv(out / "errors.csv",
                  ["time_s", "abs_error_rk4_A", "rel_error_rk4",
                   "abs_error_paraexp_A", "rel_error_paraexp"],
                  [times, err_seq.abs_error, err_seq.rel_error,
                   err_pe.abs_error, err_pe.rel_error], head),
        _write_decomposition(out / "decomposition.csv", run, times, head),
        _write_summary(out, [
            ("max_abs_error_rk4_A", err_seq.summary["max_abs"]),
            ("max_abs_error_paraexp_A", err_pe.summary["max_abs"]),
            ("max_rel_error_rk4", err_seq.summary["max_rel"]),
            ("max_rel_error_paraexp", err_pe.summary["max_rel"]),
            ("l2_error_rk4_A", err_seq.summary["l2"]),
            ("l2_error_paraexp_A", err_pe.summary["l2"]),
            ("paraexp/rk4 max-error ratio", ratio),
        ], head),
    ]
    files.append(_write_metadata(cfg, out, {
        "cfl": cfl, "rk4_seconds": seq_seconds, "paraexp": run.metadata}))
    log.info("paraexp/rk4 max-error ratio = %.6g", ratio)
    return {"rk4": err_seq, "paraexp": err_pe, "run": run, "sequential": seq,
            "ratio": ratio, "files": files}


def _write_decomposition(path, run, times, head):
    """Current component of every ``v_j`` and ``w_i``; blank outside their domain."""
    cols, names = [list(times)], ["time_s"]
    for label, sols in (("v", run.particular), ("w", run.homogeneous)):
        for i, sol in enumerate(sols, start=1):
            k0 = int(np.searchsorted(times, sol.times[0]))
            col = [None] * times.size
            col[k0:k0 + len(sol)] = list(sol.states[:, 0])
            cols.append(col)
            names.append(f"{label}{i}_A")
    return write_csv(path, names, cols, head)


def run_wave(cfg: RunConfig) -> dict:
    """RK4 and ParaExp on the FIT cavity; energy compared to an adaptive reference."""
    if cfg.experiment != "wave":
        raise ValueError("run_wave needs experiment='wave'")
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    sys = fitwave.build_wave_system(cfg.grid, cfg.source)
    ops = sys.structure
    cfl = cfl_number(sys, cfg.dt, cfg.stepper)

    grid_times = sample_grid(sys.t0, cfg.t_end, cfg.dt)
    tic = time.perf_counter()
    seq = integrate(sys, (sys.t0, cfg.t_end), cfg.dt, cfg.stepper, times=grid_times)
    seq_seconds = time.perf_counter() - tic
    run = paraexp_solve(sys, cfg.t_end, cfg.p, cfg.dt, cfg.stepper, cfg.expm)
    times = run.total.times
    if not np.array_equal(times, seq.times):
        raise ValueError(f"dt={cfg.dt} does not divide t_end={cfg.t_end}")
    tic = time.perf_counter()
    ref = reference_solution(sys, cfg.t_end, times)
    ref_seconds = time.perf_counter() - tic

    def energy_of(states):
        return fitwave.state_energy(states, ops)

    w_ref, w_seq, w_pe = energy_of(ref.states), energy_of(seq.states), energy_of(run.total.states)
    err_seq = compute_errors(seq, ref, energy_of)
    err_pe = compute_errors(run.total, ref, energy_of)

    head = cfg.echo() + [("normalization", NORMALIZATION),
                         ("reference", "RK45 rtol=1e-10 atol=1e-14")]
    files = [write_csv(out / "energy.csv",
                       ["time_s", "W_reference_J", "W_rk4_J", "W_paraexp_J",
                        "rel_error_rk4", "rel_error_paraexp"],
                       [times, w_ref, w_seq, w_pe, err_seq.rel_error, err_pe.rel_error], head)]
    t1 = run.partition.boundaries[1]
    after = times > t1
    better = bool(np.all(err_pe.rel_error[after] <= err_seq.rel_error[after]))
    summary = [
        ("max_rel_energy_error_rk4", err_seq.summary["max_rel"]),
        ("max_rel_energy_error_paraexp", err_pe.summary["max_rel"]),
        ("paraexp_le_rk4_after_T1", float(better)),
    ]
    if cfg.snapshot_time is not None:
        try:
            k = run.total.index_of(cfg.snapshot_time)
        except KeyError:
            raise ValueError(f"snapshot_time={cfg.snapshot_time} is not on the "
                             f"dt={cfg.dt} grid") from None
        _, e = ops.split(run.total.states[k])
        snap = fitwave.ez_snapshot(e, ops)
        files.append(write_csv(
            out / "ez_snapshot.csv", ["ix", "iy", "iz", "ez_volts_per_m"],
            [snap[:, 0].astype(int), snap[:, 1].astype(int), snap[:, 2].astype(int),
             snap[:, 3]],
            head + [("time_s", _fmt(times[k]))]))
    files.append(_write_summary(out, summary, head))
    files.append(_write_metadata(cfg, out, {
        "cfl": cfl, "rk4_seconds": seq_seconds, "reference_seconds": ref_seconds,
        "paraexp": run.metadata}))
    return {"rk4": err_seq, "paraexp": err_pe, "run": run, "sequential": seq,
            "reference": ref, "energy": {"reference": w_ref, "rk4": w_seq, "paraexp": w_pe},
            "files": files, "paraexp_better_after_T1": better}
