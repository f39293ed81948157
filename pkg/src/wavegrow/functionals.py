"""Energy functionals, energy-identity terms and space-time norms.

Integrals of products are rectangle-rule sums over the grid; quadratic forms
in derivatives use Parseval.  The identities checked here are

* ``d/dt X2 = I1 + J1 + J2`` for the second-order energy ``X2`` (per axis
  ``j``: ``(u_jt)**2 + |grad u_j|**2 + 3 u**2 u_j**2 + q u_j**2``);
* ``d/dt E_alpha = K1 + K2`` with
  ``E_alpha = 1/2 (||grad d^alpha u||**2 + ||d^alpha u_t||**2)``.

Verification integrates the right-hand sides over a sampled window with
composite Simpson and normalises the mismatch by ``1 + energy(start)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .errors import ArityError, DomainError
from .potential import potential_dt, potential_gradient, potential_values
from .propagator import kick_force
from .spectral import (
    Field,
    _derivative_coeffs,
    bessel_potential,
    inverse,
    lp_norm,
    lp_norm_values,
    multi_derivative_coeffs,
    sobolev_norm_coeffs,
)

__all__ = [
    "energy_X1",
    "energy_X2",
    "energy_Yk",
    "energy_alpha",
    "identity_terms_43",
    "identity_terms_51",
    "verify_identity_43",
    "verify_identity_51",
    "StrichartzParams",
    "strichartz_norm",
    "product_estimate_probe",
    "Diagnostics",
]


def _inner(grid, a_hat, b_hat):
    """``int a b dx`` for real fields given by coefficients."""
    return float(grid.volume * np.real(np.vdot(b_hat, a_hat)))


class Diagnostics:
    """Array-level evaluation of every functional for one grid and potential."""

    def __init__(self, grid, spec):
        self.grid = grid
        self.spec = spec
        spec.check_grid(grid)
        self.w = grid.cell_volume

    def _q(self, t):
        return None if self.spec.is_zero else potential_values(self.spec, t, self.grid)

    def x1(self, u_hat, ut_hat, t):
        g = self.grid
        u = inverse(g, u_hat)
        kin = sobolev_norm_coeffs(g, ut_hat, 0) ** 2
        grad = sum(
            sobolev_norm_coeffs(g, _derivative_coeffs(g, u_hat, j, 1), 0) ** 2 for j in range(g.dim)
        )
        u2 = u * u
        pot = 0.5 * self.w * np.sum(u2 * u2)
        q = self._q(t)
        if q is not None:
            pot += self.w * np.sum(q * u2)
        return 0.5 * (kin + grad + pot)

    def x2(self, u_hat, ut_hat, t):
        g = self.grid
        u = inverse(g, u_hat)
        u2 = u * u
        q = self._q(t)
        total = 0.0
        for j in range(g.dim):
            uj_hat = _derivative_coeffs(g, u_hat, j, 1)
            ujt_hat = _derivative_coeffs(g, ut_hat, j, 1)
            total += sobolev_norm_coeffs(g, ujt_hat, 0) ** 2
            total += sum(
                sobolev_norm_coeffs(g, _derivative_coeffs(g, uj_hat, i, 1), 0) ** 2 for i in range(g.dim)
            )
            uj = inverse(g, uj_hat)
            uj2 = uj * uj
            total += 3.0 * self.w * np.sum(u2 * uj2)
            if q is not None:
                total += self.w * np.sum(q * uj2)
        return 0.5 * total

    def terms43(self, u_hat, ut_hat, t):
        g, spec = self.grid, self.spec
        u = inverse(g, u_hat)
        ut = inverse(g, ut_hat)
        zero_q = spec.is_zero
        grad_q = None if zero_q else potential_gradient(spec, t, g)
        q_t = None if spec.is_static else potential_dt(spec, t, g)
        i1 = j1 = j2 = 0.0
        for j in range(g.dim):
            uj = inverse(g, _derivative_coeffs(g, u_hat, j, 1))
            uj2 = uj * uj
            j1 += 3.0 * self.w * np.sum(u * ut * uj2)
            if grad_q is not None:
                ujt = inverse(g, _derivative_coeffs(g, ut_hat, j, 1))
                i1 -= self.w * np.sum(grad_q[j] * u * ujt)
            if q_t is not None:
                j2 += 0.5 * self.w * np.sum(q_t * uj2)
        return float(i1), float(j1), float(j2)

    def e_alpha(self, u_hat, ut_hat, alpha):
        g = self.grid
        da = multi_derivative_coeffs(g, u_hat, alpha)
        grad = sum(sobolev_norm_coeffs(g, _derivative_coeffs(g, da, i, 1), 0) ** 2 for i in range(g.dim))
        kin = sobolev_norm_coeffs(g, multi_derivative_coeffs(g, ut_hat, alpha), 0) ** 2
        return 0.5 * (grad + kin)

    def terms51(self, u_hat, ut_hat, t, alpha):
        g = self.grid
        dut = multi_derivative_coeffs(g, ut_hat, alpha)
        k1 = 0.0
        q = self._q(t)
        if q is not None:
            lin = kick_force(g, u_hat, q, cubic=False)
            k1 = -_inner(g, multi_derivative_coeffs(g, lin, alpha), dut)
        cube = kick_force(g, u_hat, None, cubic=True)
        k2 = -_inner(g, multi_derivative_coeffs(g, cube, alpha), dut)
        return k1, k2


def _diag(state, spec):
    return Diagnostics(state.grid, spec)


def energy_X1(state, spec):
    """``1/2 int (u_t**2 + |grad u|**2 + q u**2 + u**4 / 2)``."""
    return _diag(state, spec).x1(state.u.coeffs, state.ut.coeffs, state.t)


def energy_X2(state, spec):
    return _diag(state, spec).x2(state.u.coeffs, state.ut.coeffs, state.t)


def energy_Yk(state, k):
    """``||u||_{H^k}**2 + ||u_t||_{H^{k-1}}**2``."""
    if k < 1:
        raise DomainError("Y_k needs k >= 1")
    g = state.grid
    return sobolev_norm_coeffs(g, state.u.coeffs, k) ** 2 + sobolev_norm_coeffs(g, state.ut.coeffs, k - 1) ** 2


def energy_alpha(state, alpha):
    return Diagnostics(state.grid, _NO_POTENTIAL).e_alpha(state.u.coeffs, state.ut.coeffs, alpha)


def identity_terms_43(state, spec):
    """``(I1, J1, J2)``: ``-sum_j int (d_j q) u u_jt``, ``3 sum_j int u u_t u_j**2``,
    ``1/2 sum_j int q_t u_j**2``."""
    return _diag(state, spec).terms43(state.u.coeffs, state.ut.coeffs, state.t)


def identity_terms_51(state, spec, alpha):
    """``(K1, K2) = (-int d^a(q u) d^a u_t, -int d^a(u**3) d^a u_t)``."""
    return _diag(state, spec).terms51(state.u.coeffs, state.ut.coeffs, state.t, alpha)


def _window_arrays(window):
    states = list(window)
    if len(states) < 3:
        raise ArityError(f"identity verification needs >= 3 samples, got {len(states)}")
    times = np.array([s.t for s in states])
    if np.any(np.diff(times) <= 0):
        raise ArityError("window samples must have strictly increasing times")
    return states, times


def verify_identity_43(window, spec):
    """Relative mismatch ``|X2(end) - X2(start) - int (I1 + J1 + J2) dt| / (1 + X2(start))``."""
    states, times = _window_arrays(window)
    d = _diag(states[0], spec)
    rates = [sum(d.terms43(s.u.coeffs, s.ut.coeffs, s.t)) for s in states]
    x_start = d.x2(states[0].u.coeffs, states[0].ut.coeffs, states[0].t)
    x_end = d.x2(states[-1].u.coeffs, states[-1].ut.coeffs, states[-1].t)
    integral = simpson(rates, x=times)
    return abs(x_end - x_start - integral) / (1.0 + x_start)


def verify_identity_51(window, spec, alpha, include_cubic=True):
    """Relative mismatch of ``E_alpha(end) - E_alpha(start) = int (K1 + K2) dt``.

    ``include_cubic=False`` drops ``K2`` (for runs without the cubic term).
    """
    states, times = _window_arrays(window)
    d = _diag(states[0], spec)
    rates = []
    for s in states:
        k1, k2 = d.terms51(s.u.coeffs, s.ut.coeffs, s.t, alpha)
        rates.append(k1 + (k2 if include_cubic else 0.0))
    e_start = d.e_alpha(states[0].u.coeffs, states[0].ut.coeffs, alpha)
    e_end = d.e_alpha(states[-1].u.coeffs, states[-1].ut.coeffs, alpha)
    integral = simpson(rates, x=times)
    return abs(e_end - e_start - integral) / (1.0 + e_start)


class _NoPotential:
    is_zero = True
    is_static = True

    def check_grid(self, grid):
        pass


_NO_POTENTIAL = _NoPotential()


@dataclass(frozen=True)
class StrichartzParams:
    """Exponents ``(p, r)`` with ``1/p + 3/r = 1/2``; ``r = (4 + 2 eps)/eps``."""

    epsilon: float
    r: float
    p: float

    @classmethod
    def from_epsilon(cls, epsilon=0.1):
        if not 0 < epsilon <= 1:
            raise DomainError(f"epsilon must lie in (0, 1], got {epsilon!r}")
        r = (4.0 + 2.0 * epsilon) / epsilon
        inv_p = 0.5 - 3.0 / r
        p = np.inf if inv_p <= 1e-15 else 1.0 / inv_p
        return cls(epsilon, r, p)

    @classmethod
    def from_pair(cls, p, r):
        """Explicit pair; rejects non-admissible combinations."""
        inv_p = 0.0 if np.isinf(p) else 1.0 / p
        if not (p > 2 and r >= 6 and abs(inv_p + 3.0 / r - 0.5) <= 1e-12):
            raise DomainError(f"(p, r) = ({p}, {r}) violates 1/p + 3/r = 1/2 with p > 2")
        epsilon = 4.0 / (r - 2.0)
        return cls(epsilon, float(r), float(p))


def strichartz_norm(times, window, params):
    """``(int ||u(t)||_{L^r}**p dt)**(1/p)`` over sampled fields (sup if ``p = inf``).

    ``window`` holds :class:`Field` or state objects (their ``u`` is used).
    """
    if not isinstance(params, StrichartzParams):
        raise DomainError("params must be StrichartzParams")
    fields = [w.u if hasattr(w, "ut") else w for w in window]
    times = np.asarray(times, dtype=float)
    if len(fields) < 16 or len(times) != len(fields):
        raise ArityError(f"Strichartz norm needs >= 16 samples with matching times, got {len(fields)}")
    norms = np.array([lp_norm(f, params.r) for f in fields])
    if np.isinf(params.p):
        return float(norms.max())
    peak = norms.max()
    if peak == 0:
        return 0.0
    integral = simpson((norms / peak) ** params.p, x=times)
    return float(peak * max(integral, 0.0) ** (1.0 / params.p))


def _bessel_lp(field, s, p):
    return lp_norm_values(field.grid, bessel_potential(field, s).values, p)


def product_estimate_probe(f, g, s, exponents=(3.0, 6.0, 6.0, 3.0), p=2.0):
    """Ratio ``||f g||_{H^{s,p}} / (||f||_{q1} ||g||_{H^{s,q2}} + ||g||_{r1} ||f||_{H^{s,r2}})``.

    The exponents must satisfy ``1/p = 1/q1 + 1/q2 = 1/r1 + 1/r2``.
    """
    q1, q2, r1, r2 = exponents
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x  # noqa: E731
    for name, val in zip(("q1", "q2", "r1", "r2"), exponents):
        if not val > 1:
            raise DomainError(f"{name} must lie in (1, inf], got {val!r}")
    if not p > 1:
        raise DomainError(f"p must lie in (1, inf], got {p!r}")
    if abs(inv(q1) + inv(q2) - inv(p)) > 1e-12 or abs(inv(r1) + inv(r2) - inv(p)) > 1e-12:
        raise DomainError(f"Hoelder exponents {exponents} do not match p={p}")
    fg = Field.from_values(f.grid, f.values * g.values)
    lhs = _bessel_lp(fg, s, p)
    rhs = lp_norm(f, q1) * _bessel_lp(g, s, q2) + lp_norm(g, r1) * _bessel_lp(f, s, r2)
    if lhs == 0.0:
        return 0.0
    return lhs / rhs
