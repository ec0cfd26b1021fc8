"""Command-line front end: ``paraexp-run --experiment {rlc,wave} ...``.

Exit status is 0 on success, 1 on numerical failure and 2 on a bad
configuration. Settings come from flags, then a ``--config`` file of
``key=value`` lines, then the ``PARAEXP_WORKERS`` environment variable
(workers only), then the experiment defaults.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .expm import ExpmConfig
from .experiments import RunConfig, run_rlc, run_wave
from .linode import NumericalError
from .rlc import RlcParams
from .solver import WorkerError

EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2

# option name -> converter; names double as config-file keys
OPTIONS = {
    "experiment": str,
    "workers": int,
    "dt": float,
    "t-end": float,
    "stepper": str,
    "expm": str,
    "taylor-m": int,
    "taylor-s": int,
    "out": str,
    "snapshot-time": float,
    "u0-amp": float,
    "u-l0": float,
}


class ConfigError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="paraexp-run",
        description="Run the RLC or cavity-wave ParaExp experiment and write CSV results.")
    ap.add_argument("--experiment", choices=["rlc", "wave"])
    ap.add_argument("--workers", type=int, help="number of time intervals / workers")
    ap.add_argument("--dt", type=float, help="time step (s)")
    ap.add_argument("--t-end", type=float, help="end of the time horizon (s)")
    ap.add_argument("--stepper", choices=["rk4", "leapfrog"])
    ap.add_argument("--expm", choices=["dense", "taylor"])
    ap.add_argument("--taylor-m", type=int, help="fixed Taylor order (disables auto choice)")
    ap.add_argument("--taylor-s", type=int, help="fixed substep count (disables auto choice)")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--snapshot-time", type=float, help="time of the e_z snapshot (wave)")
    ap.add_argument("--u0-amp", type=float, help="RLC source amplitude (V)")
    ap.add_argument("--u-l0", type=float, help="RLC initial inductor voltage (V)")
    ap.add_argument("--config", type=Path, help="file with key=value lines")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def read_config_file(path: Path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = OPTIONS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def resolve(args: argparse.Namespace, environ=os.environ) -> RunConfig:
    """Merge flags, config file and environment into a :class:`RunConfig`."""
    merged = read_config_file(args.config) if args.config else {}
    for key in OPTIONS:
        value = getattr(args, key.replace("-", "_"))
        if value is not None:
            merged[key] = value
    if "workers" not in merged and environ.get("PARAEXP_WORKERS"):
        try:
            merged["workers"] = int(environ["PARAEXP_WORKERS"])
        except ValueError:
            raise ConfigError("PARAEXP_WORKERS must be an integer") from None

    experiment = merged.get("experiment", "rlc")
    expm = None
    if any(k in merged for k in ("expm", "taylor-m", "taylor-s")):
        fixed = "taylor-m" in merged or "taylor-s" in merged
        expm = ExpmConfig(mode=merged.get("expm", "taylor" if fixed else "dense"),
                          m=merged.get("taylor-m", 20), s=merged.get("taylor-s", 1),
                          auto_params=not fixed)
    rlc = RlcParams()
    if "u0-amp" in merged or "u-l0" in merged:
        rlc = RlcParams(u0_amp=merged.get("u0-amp", rlc.u0_amp),
                        u_l0=merged.get("u-l0", rlc.u_l0))
    return RunConfig(
        experiment=experiment,
        p=merged.get("workers", 3),
        dt=merged.get("dt"),
        t_end=merged.get("t-end"),
        stepper=merged.get("stepper", "rk4"),
        expm=expm,
        output_dir=Path(merged.get("out", f"paraexp_out/{experiment}")),
        snapshot_time=merged.get("snapshot-time"),
        rlc=rlc,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if cfg.experiment == "rlc":
            res = run_rlc(cfg)
            print(f"max abs error rk4      = {res['rk4'].max_abs:.6e} A")
            print(f"max abs error paraexp  = {res['paraexp'].max_abs:.6e} A")
            print(f"paraexp/rk4 max-error ratio = {res['ratio']:.6g}")
        else:
            res = run_wave(cfg)
            print(f"max rel energy error rk4     = {res['rk4'].summary['max_rel']:.6e}")
            print(f"max rel energy error paraexp = {res['paraexp'].summary['max_rel']:.6e}")
            print(f"paraexp <= rk4 after T1: {res['paraexp_better_after_T1']}")
    except (NumericalError, FloatingPointError, WorkerError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"results written to {cfg.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
