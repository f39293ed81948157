"""Command-line entry point: ``wavegrow <subcommand> --config <path> [--out DIR] [--seed N]``.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure, 4 IO error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from datetime import datetime, timezone

import numpy as np
import scipy

from . import __version__
from .config import emit_config, parse_config
from .errors import (
    ArityError,
    ConfigError,
    ConfigurationError,
    DomainError,
    NumericalFailure,
    StorageError,
)
from .experiments import (
    continuous_dependence_probe,
    fit_growth,
    run_dichotomy,
    run_recurrence_pipeline,
)
from .functionals import verify_identity_43, verify_identity_51
from .integrator import IntegratorConfig, evolve
from .presets import build_state, random_smooth
from .recurrence import RecurrenceParams, certify_envelope, log_extremal_sequence, min_envelope
from .spectral import State
from .storage import (
    RunLock,
    SeriesWriter,
    checkpoint,
    read_series,
    restore,
    truncate_series,
    write_json_atomic,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

SERIES_FILE = "series.csv"
CHECKPOINT_FILE = "checkpoint.bin"
CONFIG_FILE = "config.txt"
MANIFEST_FILE = "manifest.json"


def _now():
    return datetime.now(timezone.utc).isoformat()


class RunDirectory:
    """Owns one output directory for the lifetime of a command."""

    def __init__(self, path, cfg, command):
        self.path = os.path.abspath(path)
        self.cfg = cfg
        self.command = command
        self.files = []
        self.lock = None
        self.started = None
        self._t0 = None

    def __enter__(self):
        try:
            os.makedirs(self.path, exist_ok=True)
        except OSError as exc:
            raise StorageError(f"cannot create run directory {self.path}: {exc}") from exc
        self.lock = RunLock(self.path).acquire()
        self.started = _now()
        self._t0 = time.perf_counter()
        text = emit_config(self.cfg)
        with open(self.file(CONFIG_FILE), "w") as fh:
            fh.write(text)
        self.config_hash = hashlib.sha256(text.encode()).hexdigest()
        return self

    def file(self, name):
        full = os.path.join(self.path, name)
        if name not in self.files:
            self.files.append(name)
        return full

    def __exit__(self, exc_type, exc, tb):
        status = "ok"
        if exc is not None:
            status = f"error({type(exc).__name__}: {exc})"
        else:
            missing = [f for f in self.files if not os.path.isfile(os.path.join(self.path, f))]
            if missing:
                status = f"error(missing outputs: {', '.join(missing)})"
        manifest = {
            "command": self.command,
            "config_hash": self.config_hash,
            "code_version": __version__,
            "versions": {"python": sys.version.split()[0], "numpy": np.__version__, "scipy": scipy.__version__},
            "seed": self.cfg.seed,
            "start": self.started,
            "end": _now(),
            "wall_time_s": time.perf_counter() - self._t0,
            "status": status,
            "files": list(self.files),
        }
        try:
            write_json_atomic(manifest, os.path.join(self.path, MANIFEST_FILE))
        finally:
            self.lock.release()
        return False


def _initial_state(cfg):
    rng = np.random.default_rng(cfg.seed)
    return build_state(cfg.grid, cfg["data.preset"], cfg.data_params(), rng)


def run_simulation(cfg, out_dir, resume=False, on_sample=None):
    """``simulate``: stream diagnostics to CSV and checkpoint every few samples.

    With ``resume=True`` and an existing checkpoint, the CSV is cut back to
    the checkpoint time and the run continues from the stored state.
    """
    grid, spec = cfg.grid, cfg.potential
    icfg = cfg.integrator
    horizon = cfg["experiment.horizon"]
    every = cfg["experiment.sample_every"]
    ck_every = cfg["experiment.checkpoint_every"]
    identities = cfg["experiment.identities"]
    n_total = max(1, math.ceil(horizon / icfg.dt - 1e-9))
    dt = horizon / n_total

    with RunDirectory(out_dir, cfg, "simulate") as run:
        series_path = run.file(SERIES_FILE)
        ck_path = run.file(CHECKPOINT_FILE)
        state, step0 = _initial_state(cfg), 0
        appending = resume and os.path.exists(ck_path) and os.path.exists(series_path)
        if appending:
            state, step0 = restore(ck_path, with_step=True)
            truncate_series(series_path, state.t)
        if step0 >= n_total:
            return run.path
        names = _series_names(cfg)
        counter = {"n": 0}
        with SeriesWriter(series_path, names, append=appending) as writer:
            def hook(step, s, row):
                gstep = step0 + step
                writer.write(s.t, row)
                counter["n"] += 1
                if counter["n"] % ck_every == 0 or gstep == n_total:
                    checkpoint(s, ck_path, step=gstep)
                if on_sample is not None:
                    on_sample(gstep, s, row)

            evolve(state, spec, IntegratorConfig(dt, icfg.cubic_enabled), state.t + (n_total - step0) * dt,
                   sample_every=every, k_list=cfg.k_list, identities=identities, on_sample=hook,
                   include_initial=not appending)
    return run.path


def _series_names(cfg):
    k_list = cfg.k_list
    names = [f"H{k}" for k in k_list] + ["X1", "X2"] + [f"Y{k}" for k in k_list]
    if cfg["experiment.identities"]:
        names += ["I1", "J1", "J2", "res43", "res51"]
    return names


def run_dichotomy_cmd(cfg, out_dir):
    with RunDirectory(out_dir, cfg, "dichotomy") as run:
        rep = run_dichotomy(
            cfg.grid, _initial_state(cfg), cfg["dichotomy.amplitudes"], cfg["dichotomy.omegas"],
            horizon=cfg["experiment.horizon"], radius=cfg["potential.radius"], dt=cfg.integrator.dt,
            sample_every=cfg["experiment.sample_every"], workers=cfg["dichotomy.workers"],
        )
        write_json_atomic(rep.to_dict(), run.file("fit.json"))
        with open(run.file("fits.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["amplitude", "omega", "branch", "model", "rate", "exponent", "r2_polynomial",
                        "r2_exponential"])
            for e in rep.entries:
                for branch, f in (("linear", e.linear), ("nonlinear", e.nonlinear)):
                    w.writerow([repr(e.amplitude), repr(e.omega), branch, f.model, format(f.rate, ".17g"),
                                format(f.exponent, ".17g"), format(f.r2_polynomial, ".17g"),
                                format(f.r2_exponential, ".17g")])
        for (A, om, cubic), (t, v) in rep.series.items():
            name = f"series_A{A:g}_w{om:g}_{'nonlinear' if cubic else 'linear'}.csv"
            with SeriesWriter(run.file(name), [rep.column]) as w:
                for ti, vi in zip(t, v):
                    w.write(ti, {rep.column: vi})
        return rep


def run_pipeline_cmd(cfg, out_dir):
    with RunDirectory(out_dir, cfg, "pipeline") as run:
        rep = run_recurrence_pipeline(cfg.grid, cfg.potential, _initial_state(cfg), cfg["experiment.horizon"],
                                      rule=cfg.step_rule, steps_per_window=cfg["pipeline.steps_per_window"],
                                      cubic=cfg["integrator.cubic_enabled"])
        write_json_atomic(rep.to_dict(), run.file("fit.json"))
        with SeriesWriter(run.file(SERIES_FILE), ["X2"]) as w:
            for t, x in zip(rep.times, rep.X2):
                w.write(t, {"X2": x})
        return rep


def run_stability_cmd(cfg, out_dir):
    with RunDirectory(out_dir, cfg, "stability") as run:
        data = _initial_state(cfg)
        rng = np.random.default_rng([cfg.seed, 1])
        direction = random_smooth(cfg.grid, rng)
        rep = continuous_dependence_probe(data, direction, cfg["stability.deltas"], spec=cfg.potential,
                                          horizon=cfg["stability.horizon"], rule=cfg.step_rule,
                                          cubic=cfg["integrator.cubic_enabled"], k_list=cfg.k_list)
        write_json_atomic(rep.to_dict(), run.file("fit.json"))
        return rep


def run_fit_cmd(cfg, out_dir):
    src = cfg["fit.input"]
    src = cfg.resolve(src) if src else os.path.join(out_dir, SERIES_FILE)
    series = read_series(src)
    column = cfg["fit.column"]
    if column not in series.columns:
        raise ConfigError([("fit.column", f"column {column!r} not in {src} (has {series.names})")])
    t = series["t"]
    t0 = cfg["fit.t0"] if cfg["fit.t0"] is not None else float(t[0])
    t1 = cfg["fit.t1"] if cfg["fit.t1"] is not None else float(t[-1])
    with RunDirectory(out_dir, cfg, "fit") as run:
        fit = fit_growth(t, series[column], window=(t0, t1))
        out = fit.to_dict()
        out.update({"input": src, "column": column})
        write_json_atomic(out, run.file("fit.json"))
        return fit


def run_verify_identity_cmd(cfg, out_dir):
    """Identity residuals over one window at ``dt`` and ``dt/2``."""
    grid, spec = cfg.grid, cfg.potential
    data = _initial_state(cfg)
    window = cfg["identity.window"]
    alpha = cfg["identity.alpha"] or (1,) + (0,) * (grid.dim - 1)
    cubic = cfg["integrator.cubic_enabled"]
    dt = cfg.integrator.dt

    def residuals(step):
        states = []
        evolve(data, spec, IntegratorConfig(step, cubic), data.t + window, sample_every=1, k_list=(1,),
               on_sample=lambda i, s, row: states.append(s))
        return (verify_identity_43(states, spec) if cubic else float("nan"),
                verify_identity_51(states, spec, alpha, include_cubic=cubic))

    with RunDirectory(out_dir, cfg, "verify-identity") as run:
        r43, r51 = residuals(dt)
        h43, h51 = residuals(dt / 2)
        out = {
            "window": window, "dt": dt, "alpha": list(alpha),
            "res43": r43, "res43_half_dt": h43, "ratio43": r43 / h43 if h43 else float("inf"),
            "res51": r51, "res51_half_dt": h51, "ratio51": r51 / h51 if h51 else float("inf"),
        }
        write_json_atomic(out, run.file("fit.json"))
        return out


def lemma_check(gamma, C, y, alpha0, n_max=10_000):
    """Certified envelope and the extremal sequence's worst envelope ratio."""
    params = RecurrenceParams(gamma, C, y, alpha0)
    env = min_envelope(params)
    log_a = log_extremal_sequence(params, n_max)
    with np.errstate(invalid="ignore"):
        worst = float(np.max(np.exp(log_a - env.log_bound(np.arange(n_max + 1)))))
    return {
        "Ctilde": env.Ctilde,
        "exponent": env.exponent,
        "certified": bool(certify_envelope(params, log_Ctilde=env.log_Ctilde)),
        "worst_ratio": worst,
    }


def _build_parser():
    p = argparse.ArgumentParser(prog="wavegrow", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wavegrow {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "dichotomy", "pipeline", "stability", "fit", "verify-identity"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True)
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        if name == "simulate":
            s.add_argument("--resume", action="store_true", help="continue from the run's checkpoint")
    s = sub.add_parser("lemma-check")
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--C", type=float, required=True)
    s.add_argument("--y", type=float, default=0.0)
    s.add_argument("--alpha0", type=float, default=0.0)
    s.add_argument("--n-max", type=int, default=10_000)
    s.add_argument("--out")
    return p


_COMMANDS = {
    "dichotomy": run_dichotomy_cmd,
    "pipeline": run_pipeline_cmd,
    "stability": run_stability_cmd,
    "fit": run_fit_cmd,
    "verify-identity": run_verify_identity_cmd,
}


def _emit(obj, stream):
    stream.write(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "lemma-check":
            out = lemma_check(args.gamma, args.C, args.y, args.alpha0, args.n_max)
            _emit(out, sys.stdout)
            if args.out:
                write_json_atomic(out, args.out)
            return EXIT_OK
        cfg = parse_config(args.config)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["output__dir"] = args.out
        if overrides:
            cfg = cfg.with_overrides(**overrides)
        out_dir = args.out if args.out is not None else cfg.resolve(cfg["output.dir"])
        if args.command == "simulate":
            path = run_simulation(cfg, out_dir, resume=args.resume)
            _emit({"status": "ok", "run_dir": path}, sys.stdout)
        else:
            result = _COMMANDS[args.command](cfg, out_dir)
            summary = result.to_dict() if hasattr(result, "to_dict") else result
            if isinstance(summary, dict):
                summary = {k: v for k, v in summary.items() if k not in ("times", "X2", "entries")}
            _emit(summary, sys.stdout)
        return EXIT_OK
    except (ConfigError, ConfigurationError, DomainError, ArityError) as exc:
        print(f"wavegrow: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"wavegrow: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (StorageError, OSError) as exc:
        print(f"wavegrow: IO error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
