"""Free-wave propagator, Duhamel assembly and the local Picard iteration.

The local solution on ``[s, s + tau]`` is built as the limit of
``u_{n+1}`` solving the *linear* problem with source ``-u_n**3``::

    (u, u_t)(t) = U0(t - s) f - int_s^t U0(t - r) (0, q(r) u_{n+1}(r) + u_n(r)**3) dr

starting from ``u_0 = 0``.  The term linear in ``u_{n+1}`` is resolved by an
inner fixed point.  Sources are represented by their values at Gauss-Legendre
nodes in time (a degree ``n_quad - 1`` interpolant); the oscillatory kernel
``U0(t - r)`` is integrated against each Lagrange basis polynomial with a
sub-quadrature fine enough for the largest frequency on the grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, PicardDivergence
from .potential import potential_values
from .spectral import State, dealias, forward, hcal_norm, inverse

__all__ = [
    "free_step",
    "free_step_coeffs",
    "kick_force",
    "StepRule",
    "step_size",
    "PicardReport",
    "picard_solve",
    "calibrate_step_rule",
    "continuation_run",
    "pde_residual",
]


def _free_tables(grid, dt):
    """``cos(|xi| dt)``, ``sin(|xi| dt)/|xi|`` and ``|xi| sin(|xi| dt)``."""
    k = grid.xi_abs
    c = np.cos(k * dt)
    sn = np.sin(k * dt)
    with np.errstate(divide="ignore", invalid="ignore"):
        s_over = np.where(k > 0, sn / np.where(k > 0, k, 1.0), dt)
    return c, s_over, k * sn


def free_step_coeffs(grid, u_hat, ut_hat, dt, tables=None):
    c, s_over, k_sin = tables if tables is not None else _free_tables(grid, dt)
    return c * u_hat + s_over * ut_hat, c * ut_hat - k_sin * u_hat


def free_step(state, dt):
    """Exact free wave flow over ``dt`` (any sign)."""
    grid = state.grid
    u, ut = free_step_coeffs(grid, state.u.coeffs, state.ut.coeffs, dt)
    return State.from_coeffs(grid, u, ut, state.t + dt)


def kick_force(grid, u_hat, q_values=None, cubic=True):
    """Coefficients of the dealiased force ``P[q Pu + (Pu)**3]``.

    ``q_values`` of ``None`` means ``q = 0``.  Returns ``None`` when the
    force vanishes identically (no potential, cubic term off).
    """
    if q_values is None and not cubic:
        return None
    v = inverse(grid, dealias(grid, u_hat))
    w = v * v * v if cubic else np.zeros_like(v)
    if q_values is not None:
        w = w + q_values * v
    return dealias(grid, forward(grid, w))


@dataclass(frozen=True)
class StepRule:
    """Local existence time ``tau = c (1 + ||f||_H)^(-gamma)``."""

    c: float = 0.5
    gamma: float = 2.0

    def __post_init__(self):
        if not (np.isfinite(self.c) and 0 < self.c <= 1):
            raise ConfigurationError(f"step rule constant c must lie in (0, 1], got {self.c!r}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ConfigurationError(f"step rule exponent gamma must be > 0, got {self.gamma!r}")

    def tau_for_norm(self, norm):
        return self.c * (1.0 + norm) ** (-self.gamma)


def step_size(f, rule):
    return rule.tau_for_norm(hcal_norm(f))


# --- Duhamel kernel --------------------------------------------------------


def _lagrange_basis(nodes, points):
    """``out[p, m] = l_m(points[p])`` for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    points = np.asarray(points, dtype=float)
    out = np.ones((points.size, nodes.size))
    for m, xm in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if j != m:
                out[:, m] *= (points - xj) / (xm - xj)
    return out


class _DuhamelKernel:
    """Weights ``A_m(theta, xi)``, ``B_m(theta, xi)`` with

    ``B_m = int_0^theta sin(xi (theta - r))/xi l_m(r) dr`` and
    ``A_m = int_0^theta cos(xi (theta - r)) l_m(r) dr``,

    tabulated on the distinct values of ``|xi|`` of the grid.
    """

    def __init__(self, grid, nodes):
        self.grid = grid
        self.nodes = np.asarray(nodes, dtype=float)
        k2 = np.round(grid.xi2.ravel(), 12)
        self.k_unique, self.k_inverse = np.unique(k2, return_inverse=True)
        self.k_unique = np.sqrt(self.k_unique)
        self.k_inverse = self.k_inverse.reshape(grid.shape)
        self._cache = {}

    def weights(self, theta):
        key = float(theta)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        nq = self.nodes.size
        k = self.k_unique
        n_sub = nq + 16 + int(np.ceil(k[-1] * abs(theta)))
        z, w = np.polynomial.legendre.leggauss(n_sub)
        r = 0.5 * theta * (z + 1.0)
        wr = 0.5 * theta * w
        lag = _lagrange_basis(self.nodes, r)  # (n_sub, nq)
        lag_w = lag * wr[:, None]
        arg = np.outer(theta - r, k)  # (n_sub, nk)
        cos_t = np.cos(arg)
        with np.errstate(divide="ignore", invalid="ignore"):
            sin_t = np.where(k > 0, np.sin(arg) / np.where(k > 0, k, 1.0), theta - r[:, None])
        a = lag_w.T @ cos_t  # (nq, nk)
        b = lag_w.T @ sin_t
        out = (a[:, self.k_inverse], b[:, self.k_inverse])
        self._cache[key] = out
        return out


def _duhamel(kernel, theta, f_hat, sources):
    """``(u_hat, ut_hat)`` at local time ``theta`` given node sources."""
    grid = kernel.grid
    u, ut = free_step_coeffs(grid, f_hat[0], f_hat[1], theta)
    if sources is None:
        return u, ut
    a, b = kernel.weights(theta)
    u = u - np.einsum("m...,m...->...", b, sources)
    ut = ut - np.einsum("m...,m...->...", a, sources)
    return u, ut


@dataclass
class PicardReport:
    """Outcome of one local Picard solve on ``[t0, t0 + tau]``.

    ``successive_diffs[i]`` is the sup over the time nodes (and the endpoint)
    of ``||u_{i+1} - u_i||_H``, so entry 0 is the size of the first iterate.
    """

    iterates_used: int
    successive_diffs: list
    converged: bool
    final_state: State
    t0: float
    tau: float
    node_times: list = field(default_factory=list)
    _kernel: object = field(default=None, repr=False)
    _f_hat: tuple = field(default=None, repr=False)
    _sources: object = field(default=None, repr=False)

    @property
    def ratios(self):
        d = self.successive_diffs
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]

    def contraction_ratios(self):
        """Ratios from the second comparison on; the first involves the seed ``u_0 = 0``."""
        return self.ratios[1:]

    def state_at(self, t):
        """Picard limit evaluated at absolute time ``t`` inside the window."""
        theta = t - self.t0
        if not -1e-12 <= theta <= self.tau + 1e-12:
            raise ValueError(f"t={t} outside the window [{self.t0}, {self.t0 + self.tau}]")
        u, ut = _duhamel(self._kernel, theta, self._f_hat, self._sources)
        return State.from_coeffs(self.final_state.grid, u, ut, t)

    def to_dict(self):
        return {
            "iterates_used": self.iterates_used,
            "diffs": [float(d) for d in self.successive_diffs],
            "ratios": [float(r) for r in self.ratios],
            "converged": bool(self.converged),
            "window": [float(self.t0), float(self.t0 + self.tau)],
            "node_times": [float(t) for t in self.node_times],
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def picard_solve(init, spec, tau, n_quad=8, tol=1e-10, max_iter=60, cubic=True,
                 inner_iter=20, inner_tol=1e-12, window=None):
    """Picard iteration for the cubic problem on ``[init.t, init.t + tau]``.

    Convergence is declared once ``successive_diffs[-1] <= tol * ||init||_H``
    (or an exact zero difference).  Raises :class:`PicardDivergence` with the
    difference history when ``max_iter`` outer iterates do not suffice.
    """
    if not 0 < tau < 1:
        raise ConfigurationError(f"window length tau must lie in (0, 1), got {tau!r}")
    grid = init.grid
    s = init.t
    z, _ = np.polynomial.legendre.leggauss(n_quad)
    nodes = 0.5 * tau * (z + 1.0)
    targets = list(nodes) + [tau]
    kernel = _DuhamelKernel(grid, nodes)
    f_hat = (init.u.coeffs, init.ut.coeffs)

    q_nodes = None
    if not spec.is_zero:
        q_nodes = [potential_values(spec, s + th, grid) for th in nodes]

    scale = hcal_norm(init)
    threshold = tol * scale

    def sources_for(v_nodes, cube):
        if q_nodes is None and cube is None:
            return None
        out = np.zeros((n_quad,) + grid.shape, dtype=complex)
        for m in range(n_quad):
            lin = kick_force(grid, v_nodes[m], q_nodes[m], cubic=False) if q_nodes is not None else 0.0
            out[m] = lin + (cube[m] if cube is not None else 0.0)
        return out

    def trajectory(sources):
        return [_duhamel(kernel, th, f_hat, sources) for th in targets]

    prev_traj = [(np.zeros(grid.shape, complex), np.zeros(grid.shape, complex)) for _ in targets]
    u_nodes = np.zeros((n_quad,) + grid.shape, dtype=complex)
    diffs = []
    sources = None
    converged = False
    for it in range(1, max_iter + 1):
        cube = None
        if cubic and it > 1:
            cube = np.stack([kick_force(grid, u_nodes[m], None, cubic=True) for m in range(n_quad)])
        v = u_nodes.copy()
        sources = sources_for(v, cube)
        if q_nodes is not None:
            for _ in range(inner_iter):
                new = np.stack([_duhamel(kernel, th, f_hat, sources)[0] for th in nodes])
                change = np.max(np.abs(new - v))
                size = max(np.max(np.abs(new)), 1e-300)
                v = new
                sources = sources_for(v, cube)
                if change <= inner_tol * size:
                    break
        traj = trajectory(sources)
        diff = max(
            hcal_norm(State.from_coeffs(grid, a[0] - b[0], a[1] - b[1]))
            for a, b in zip(traj, prev_traj)
        )
        if not np.isfinite(diff):
            raise PicardDivergence("non-finite iterate", diffs + [diff], window)
        diffs.append(diff)
        prev_traj = traj
        u_nodes = np.stack([traj[i][0] for i in range(n_quad)])
        if diff <= threshold or diff == 0.0:
            converged = True
            break
    if not converged:
        raise PicardDivergence(
            f"no convergence to tol={tol} in {max_iter} iterates (tau={tau} likely too large)",
            diffs, window,
        )
    end_u, end_ut = prev_traj[-1]
    final = State.from_coeffs(grid, end_u, end_ut, s + tau)
    return PicardReport(
        iterates_used=len(diffs),
        successive_diffs=diffs,
        converged=converged,
        final_state=final,
        t0=s,
        tau=tau,
        node_times=[s + th for th in nodes],
        _kernel=kernel,
        _f_hat=f_hat,
        _sources=sources,
    )


def calibrate_step_rule(data, spec, gamma=2.0, target=0.5, c_min=1e-4, iterations=24, **picard_kw):
    """Largest ``c <= 1`` whose step rule keeps contraction ratios below ``target``.

    Bisection in ``log c`` over every state in ``data``; a diverging solve
    counts as a failure.
    """
    data = list(data)

    def ok(c):
        rule = StepRule(c, gamma)
        for f in data:
            try:
                rep = picard_solve(f, spec, step_size(f, rule), **picard_kw)
            except PicardDivergence:
                return False
            r = rep.contraction_ratios()
            if r and max(r) > target:
                return False
        return True

    if ok(1.0):
        return StepRule(1.0, gamma)
    lo, hi = np.log(c_min), 0.0
    if not ok(c_min):
        raise ConfigurationError(f"contraction target {target} not met even with c={c_min}")
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if ok(np.exp(mid)):
            lo = mid
        else:
            hi = mid
    return StepRule(float(np.exp(lo)), gamma)


def continuation_run(init, spec, rule, t_end, overlap=Fraction(2, 3), cubic=True, **picard_kw):
    """Chain local solves, restarting after ``overlap * tau`` of each window.

    The step rule is re-evaluated at every restart.  When the whole horizon
    fits in the first window it is solved directly.  Returns the states at
    all window boundaries, starting with ``init`` and ending at ``t_end``.
    """
    if not t_end > init.t:
        raise ConfigurationError("t_end must exceed the initial time")
    advance = float(overlap)
    if not 0 < advance <= 1:
        raise ConfigurationError("overlap must lie in (0, 1]")
    states = [init]
    state = init
    tau = step_size(init, rule)
    if t_end - init.t <= tau:
        rep = picard_solve(init, spec, t_end - init.t, cubic=cubic, window=0, **picard_kw)
        states.append(rep.final_state)
        return states
    window = 0
    while state.t < t_end - 1e-14:
        tau = step_size(state, rule)
        rep = picard_solve(state, spec, tau, cubic=cubic, window=window, **picard_kw)
        t_next = min(state.t + advance * tau, t_end)
        state = rep.state_at(t_next)
        if t_next == t_end:
            state = State(state.u, state.ut, t_end)
        states.append(state)
        window += 1
    return states


def pde_residual(report, spec, h=None, theta=None, cubic=True):
    """``||u_tt - Laplacian u + P[q u + u**3]||_{L^2}`` at a window time.

    ``u_tt`` is the centred difference of the stored ``u_t`` with step ``h``
    (default ``tau/8``) around ``theta`` (default the midpoint).
    """
    tau = report.tau
    theta = 0.5 * tau if theta is None else theta
    h = tau / 8.0 if h is None else h
    t = report.t0 + theta
    plus, mid, minus = report.state_at(t + h), report.state_at(t), report.state_at(t - h)
    grid = mid.grid
    utt = (plus.ut.coeffs - minus.ut.coeffs) / (2.0 * h)
    q = None if spec.is_zero else potential_values(spec, t, grid)
    force = kick_force(grid, mid.u.coeffs, q, cubic=cubic)
    res = utt + grid.xi2 * mid.u.coeffs + (force if force is not None else 0.0)
    return float(np.sqrt(grid.volume * np.sum(np.abs(res) ** 2)))
