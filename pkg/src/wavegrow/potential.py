"""Smooth, nonnegative, compactly supported, time-periodic potentials.

``q(t, x) = A * (1 + cos(omega t)) * b(|x| / rho)`` where ``b`` is the
standard C-infinity bump ``exp(1 - 1/(1 - s**2))`` for ``s < 1`` and zero
otherwise (peak value 1 at the origin).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError
from .spectral import Field, multi_derivative_coeffs, forward, inverse

__all__ = [
    "PotentialSpec",
    "DerivBoundReport",
    "eval_potential",
    "potential_values",
    "potential_gradient",
    "potential_dt",
    "estimate_deriv_bounds",
]


@dataclass(frozen=True)
class PotentialSpec:
    amplitude: float = 1.0
    radius: float = 1.0
    omega: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ConfigurationError(f"amplitude must be >= 0, got {self.amplitude!r}")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ConfigurationError(f"radius must be > 0, got {self.radius!r}")
        if not (np.isfinite(self.omega) and self.omega >= 0):
            raise ConfigurationError(f"omega must be >= 0, got {self.omega!r}")

    @classmethod
    def off(cls):
        return cls(amplitude=0.0, enabled=False)

    @property
    def is_zero(self):
        return not self.enabled or self.amplitude == 0.0

    @property
    def is_static(self):
        return self.is_zero or self.omega == 0.0

    @property
    def period(self):
        return 2.0 * np.pi / self.omega if self.omega > 0 else np.inf

    def time_factor(self, t, k=0):
        """``d^k/dt^k`` of ``1 + cos(omega t)``."""
        w = self.omega
        if k == 0:
            return 1.0 + np.cos(w * t)
        if w == 0.0:
            return 0.0
        # derivatives of cos cycle with period 4
        phase = w * t + k * np.pi / 2.0
        return w**k * np.cos(phase)

    def check_grid(self, grid):
        if self.radius >= grid.L:
            raise ConfigurationError(
                f"potential radius {self.radius} must be smaller than the half width L={grid.L}"
            )


@lru_cache(maxsize=64)
def _profile(radius, grid):
    """Bump values and analytic derivatives up to order two on ``grid``.

    Returns ``(b, grad, hess)`` with ``grad[j] = d_j b``,
    ``hess[i][j] = d_i d_j b``.
    """
    r2 = grid.radius**2
    s = r2 / radius**2
    inside = s < 1.0
    one_minus = np.where(inside, 1.0 - s, 1.0)
    b = np.where(inside, np.exp(1.0 - 1.0 / one_minus), 0.0)
    # g = -1/(1-s); b = exp(1 + g)
    coords = [np.broadcast_to(x, grid.shape) for x in grid.coords]
    ds = [2.0 * x / radius**2 for x in coords]
    dg = [-(one_minus**-2) * d for d in ds]
    grad = [np.where(inside, b * d, 0.0) for d in dg]
    hess = []
    for i in range(grid.dim):
        row = []
        for j in range(grid.dim):
            ddg = -2.0 * one_minus**-3 * ds[i] * ds[j]
            if i == j:
                ddg = ddg - one_minus**-2 * 2.0 / radius**2
            row.append(np.where(inside, b * (dg[i] * dg[j] + ddg), 0.0))
        hess.append(row)
    for a in [b, *grad, *itertools.chain.from_iterable(hess)]:
        a.setflags(write=False)
    return b, grad, hess


def spatial_profile(spec, grid):
    spec.check_grid(grid)
    return _profile(float(spec.radius), grid)[0]


def potential_values(spec, t, grid):
    """Samples of ``q(t, .)``; zeros if the potential is switched off."""
    spec.check_grid(grid)
    if spec.is_zero:
        return np.zeros(grid.shape)
    return spec.amplitude * spec.time_factor(t) * _profile(float(spec.radius), grid)[0]


def potential_gradient(spec, t, grid):
    """Analytic ``[d_j q(t, .)]`` for ``j < dim``."""
    spec.check_grid(grid)
    if spec.is_zero:
        return [np.zeros(grid.shape) for _ in range(grid.dim)]
    scale = spec.amplitude * spec.time_factor(t)
    return [scale * g for g in _profile(float(spec.radius), grid)[1]]


def potential_dt(spec, t, grid, k=1):
    """Analytic ``d_t^k q(t, .)``."""
    spec.check_grid(grid)
    if spec.is_zero or spec.omega == 0.0:
        return np.zeros(grid.shape)
    return spec.amplitude * spec.time_factor(t, k) * _profile(float(spec.radius), grid)[0]


def eval_potential(spec, t, grid):
    """``q(t, .)`` as a :class:`Field`."""
    return Field.from_values(grid, potential_values(spec, t, grid))


@dataclass
class DerivBoundReport:
    """Sampled ``sup |d_t^k d_x^alpha q|`` keyed by ``(k, alpha)``."""

    entries: dict = field(default_factory=dict)
    n_time_samples: int = 0

    def __getitem__(self, key):
        return self.entries[key]

    def row(self, k):
        return {alpha: v for (kk, alpha), v in self.entries.items() if kk == k}

    def max_constant(self):
        return max(self.entries.values(), default=0.0)


def _spatial_derivative(spec, grid, alpha):
    order = sum(alpha)
    b, grad, hess = _profile(float(spec.radius), grid)
    if order == 0:
        return b
    if order == 1:
        return grad[alpha.index(1)]
    if order == 2:
        axes = [a for a, m in enumerate(alpha) for _ in range(m)]
        return hess[axes[0]][axes[1]]
    # higher orders: spectral differentiation of the sampled bump
    return inverse(grid, multi_derivative_coeffs(grid, forward(grid, b), alpha))


def estimate_deriv_bounds(spec, grid, k_max=2, alpha_max=2, n_time_samples=64):
    """Sample the constants ``C_{k,alpha}`` bounding the potential's derivatives.

    The supremum in time runs over ``n_time_samples`` equispaced points of
    one period (a single sample for static potentials); the spatial supremum
    runs over all grid points.
    """
    spec.check_grid(grid)
    report = DerivBoundReport(n_time_samples=n_time_samples)
    if spec.omega > 0:
        times = np.arange(n_time_samples) * spec.period / n_time_samples
    else:
        times = np.zeros(1)
    report.n_time_samples = len(times)
    multi = [a for a in itertools.product(range(alpha_max + 1), repeat=grid.dim) if sum(a) <= alpha_max]
    for k in range(k_max + 1):
        if spec.is_zero:
            t_sup = 0.0
        else:
            t_sup = float(np.max(np.abs(np.atleast_1d(spec.time_factor(times, k)))))
        for alpha in multi:
            x_sup = float(np.max(np.abs(_spatial_derivative(spec, grid, alpha))))
            report.entries[(k, alpha)] = spec.amplitude * t_sup * x_sup if not spec.is_zero else 0.0
    return report
