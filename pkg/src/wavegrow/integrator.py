"""Strang splitting: exact free flow around a pointwise potential/cubic kick."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import BlowUpError, ConfigurationError
from .functionals import Diagnostics
from .potential import potential_values
from .propagator import _free_tables, free_step_coeffs, kick_force
from .series import NormSeries
from .spectral import State, sobolev_norm_coeffs

__all__ = ["IntegratorConfig", "StrangStepper", "strang_step", "evolve", "default_dt"]


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    cubic_enabled: bool = True
    scheme: str = "strang"

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        if self.scheme != "strang":
            raise ConfigurationError(f"unknown scheme {self.scheme!r}")

    def check_grid(self, grid):
        if self.dt > 0.5 * grid.dx * (1 + 1e-12):
            raise ConfigurationError(f"dt={self.dt} exceeds half the grid spacing {grid.dx}")


def default_dt(grid, tau=None):
    """``min(dx/4, tau/20)``."""
    dt = 0.25 * grid.dx
    if tau is not None:
        dt = min(dt, tau / 20.0)
    return dt


class StrangStepper:
    """Reusable Strang step for a fixed grid, potential and (signed) step."""

    def __init__(self, grid, spec, dt, cubic=True):
        spec.check_grid(grid)
        self.grid, self.spec, self.dt, self.cubic = grid, spec, float(dt), cubic
        self.half = _free_tables(grid, 0.5 * dt)
        self.full = _free_tables(grid, dt)
        self.linear_only = spec.is_zero and not cubic

    def step(self, u_hat, ut_hat, t):
        g = self.grid
        if self.linear_only:
            return free_step_coeffs(g, u_hat, ut_hat, self.dt, self.full)
        u_hat, ut_hat = free_step_coeffs(g, u_hat, ut_hat, 0.5 * self.dt, self.half)
        q = None if self.spec.is_zero else potential_values(self.spec, t + 0.5 * self.dt, g)
        force = kick_force(g, u_hat, q, self.cubic)
        ut_hat = ut_hat - self.dt * force
        return free_step_coeffs(g, u_hat, ut_hat, 0.5 * self.dt, self.half)

    def state_step(self, state):
        u, ut = self.step(state.u.coeffs, state.ut.coeffs, state.t)
        return State.from_coeffs(self.grid, u, ut, state.t + self.dt)


def strang_step(state, spec, cfg):
    """One step: free flow ``dt/2``, kick with ``q(t + dt/2)``, free flow ``dt/2``."""
    return StrangStepper(state.grid, spec, cfg.dt, cfg.cubic_enabled).state_step(state)


def _column_names(k_list, identities):
    names = [f"H{k}" for k in k_list] + ["X1", "X2"] + [f"Y{k}" for k in k_list]
    if identities:
        names += ["I1", "J1", "J2", "res43", "res51"]
    return names


def evolve(state, spec, cfg, t_end, sample_every=1, k_list=(1, 2), identities=False,
           alpha=None, on_sample=None, include_initial=True, check_cfl=True):
    """March Strang steps from ``state.t`` to ``t_end`` and record diagnostics.

    The step is shrunk slightly so that an integer number of steps lands on
    ``t_end``.  Every ``sample_every`` steps (and at the final step) a row of
    ``H^k`` norms, ``X1``, ``X2`` and ``Y_k`` is recorded.  With
    ``identities=True`` the identity right-hand sides are evaluated at every
    step and ``res43``/``res51`` hold the Simpson-integrated mismatch over the
    interval since the previous sample (``alpha`` defaults to the unit
    multi-index along axis 0).

    ``on_sample(step_index, state, row)`` is called for every recorded row.
    Raises :class:`BlowUpError` on the first non-finite step.
    """
    grid = state.grid
    if check_cfl:
        cfg.check_grid(grid)
    span = t_end - state.t
    if not span > 0:
        raise ConfigurationError(f"t_end={t_end} must exceed the start time {state.t}")
    n_steps = max(1, int(np.ceil(span / cfg.dt - 1e-9)))
    dt = span / n_steps
    stepper = StrangStepper(grid, spec, dt, cfg.cubic_enabled)
    diag = Diagnostics(grid, spec)
    if alpha is None:
        alpha = (1,) + (0,) * (grid.dim - 1)
    k_list = tuple(k_list)
    t0 = state.t
    series = NormSeries()

    def rates(u, ut, t):
        r43 = sum(diag.terms43(u, ut, t))
        k1, k2 = diag.terms51(u, ut, t, alpha)
        return r43, k1 + (k2 if cfg.cubic_enabled else 0.0)

    def row_for(u, ut, t):
        row = {f"H{k}": sobolev_norm_coeffs(grid, u, k) for k in k_list}
        row["X1"] = diag.x1(u, ut, t)
        row["X2"] = diag.x2(u, ut, t)
        for k in k_list:
            row[f"Y{k}"] = sobolev_norm_coeffs(grid, u, k) ** 2 + sobolev_norm_coeffs(grid, ut, k - 1) ** 2
        return row

    u, ut = state.u.coeffs, state.ut.coeffs
    buf_t, buf43, buf51 = [], [], []
    last = {}
    if identities:
        r = rates(u, ut, t0)
        buf_t, buf43, buf51 = [t0], [r[0]], [r[1]]
        last = {"X2": diag.x2(u, ut, t0), "E": diag.e_alpha(u, ut, alpha)}

    def record(step, u, ut, t, row):
        if identities:
            ip = {"I1": 0.0, "J1": 0.0, "J2": 0.0}
            ip["I1"], ip["J1"], ip["J2"] = diag.terms43(u, ut, t)
            row.update(ip)
            if step == 0:
                row["res43"] = row["res51"] = 0.0
            else:
                e_now = diag.e_alpha(u, ut, alpha)
                int43 = simpson(buf43, x=buf_t) if len(buf_t) > 2 else np.trapezoid(buf43, x=buf_t)
                int51 = simpson(buf51, x=buf_t) if len(buf_t) > 2 else np.trapezoid(buf51, x=buf_t)
                row["res43"] = abs(row["X2"] - last["X2"] - int43) / (1.0 + last["X2"])
                row["res51"] = abs(e_now - last["E"] - int51) / (1.0 + last["E"])
                last["E"] = e_now
            last["X2"] = row["X2"]
        series.append(t, row)
        if on_sample is not None:
            on_sample(step, State.from_coeffs(grid, u, ut, t), row)

    if include_initial:
        record(0, u, ut, t0, row_for(u, ut, t0))
    last_finite = t0
    for i in range(1, n_steps + 1):
        t_prev = t0 + (i - 1) * dt
        with np.errstate(over="ignore", invalid="ignore"):
            u, ut = stepper.step(u, ut, t_prev)
        t = t0 + i * dt if i < n_steps else t_end
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            raise BlowUpError("non-finite field encountered", last_finite)
        last_finite = t
        if identities:
            r = rates(u, ut, t)
            buf_t.append(t)
            buf43.append(r[0])
            buf51.append(r[1])
        if i % sample_every == 0 or i == n_steps:
            record(i, u, ut, t, row_for(u, ut, t))
            if identities:
                buf_t, buf43, buf51 = [t], [buf43[-1]], [buf51[-1]]
    return series, State.from_coeffs(grid, u, ut, t_end)
