"""Polynomial envelopes for sequences obeying a sublinear growth recurrence.

Hypothesis on a nonnegative sequence::

    a_n <= a_{n-1} + C (a_{n-1}**(1 - gamma) + 1) (1 + n)**y,   n >= 1

with ``0 < gamma < 1``.  Conclusion: ``a_n <= Ct (1 + n)**((1 + y)/gamma)``.

The envelope constant ``Ct`` is constructed, not just asserted.  Shifting to
``b_n = a_n + 1`` gives ``b_n <= b_{n-1} + C2 b_{n-1}**(1-gamma) (1+n)**y``
with ``C2 = 2 C``, and the induction step closes whenever::

    f(n) = (n/(n+1))**e * (1 + eps/n * ((n+1)/n)**y) <= 1,   n >= 1,

where ``e = (1+y)/gamma`` and ``eps = C2 * Ct**(-gamma)``.  A certificate
requires the base case ``Ct >= a_0 + 1``, the derivative condition
``e >= eps (2 + y) 2**y`` (which makes ``f`` increasing towards its limit 1)
and a direct sweep of ``f`` over ``1 <= n <= sweep_max``.

All comparisons against the envelope are done in log space; the exponent
routinely exceeds 100.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArityError, DomainError, SequenceOverflowError

__all__ = [
    "RecurrenceParams",
    "Envelope",
    "C1",
    "normalize",
    "log_f",
    "certify_envelope",
    "min_envelope",
    "extremal_sequence",
    "log_extremal_sequence",
    "log_slack_sequences",
    "fit_C",
    "check_series",
]

C1 = 2.0
SWEEP_MAX = 100_000


@dataclass(frozen=True)
class RecurrenceParams:
    gamma: float
    C: float
    y: float = 0.0
    alpha0: float = 0.0

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma!r}")
        for name in ("C", "y", "alpha0"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v!r}")

    @property
    def exponent(self):
        return (1.0 + self.y) / self.gamma


@dataclass(frozen=True)
class Envelope:
    log_Ctilde: float
    exponent: float
    params: RecurrenceParams
    sweep_max: int = SWEEP_MAX

    @property
    def Ctilde(self):
        return float(np.exp(self.log_Ctilde))

    def log_bound(self, n):
        return self.log_Ctilde + self.exponent * np.log1p(np.asarray(n, dtype=float))


def normalize(params):
    """Parameters of the shifted sequence ``b_n = a_n + 1``.

    Uses ``a**(1-gamma) + 1 <= 2 (a + 1)**(1-gamma)`` (concavity), so the new
    constant is ``C2 = 2 C`` and the start value is ``a_0 + 1``.
    """
    return RecurrenceParams(params.gamma, C1 * params.C, params.y, params.alpha0 + 1.0)


def exponent(gamma, y):
    """``(1 + y)/gamma``; exact for rational inputs passed as ``Fraction``."""
    return (1 + y) / gamma


def _log_eps(params, log_Ct):
    c2 = C1 * params.C
    if c2 == 0:
        return -np.inf
    return np.log(c2) - params.gamma * log_Ct


def log_f(params, log_Ctilde, n):
    """``log f(n)`` evaluated without cancellation."""
    n = np.asarray(n, dtype=float)
    e = params.exponent
    log_a = np.log1p(-1.0 / (n + 1.0))  # log(n/(n+1))
    log_eps = _log_eps(params, log_Ctilde)
    if np.isneginf(log_eps):
        return e * log_a
    extra = np.exp(log_eps - params.y * log_a - np.log(n))
    return e * log_a + np.log1p(extra)


def _base_ok(params, log_Ct):
    return log_Ct >= np.log(params.alpha0 + 1.0)


def _derivative_ok(params, log_Ct):
    log_eps = _log_eps(params, log_Ct)
    if np.isneginf(log_eps):
        return True
    y = params.y
    return np.log(params.exponent) >= log_eps + np.log(2.0 + y) + y * np.log(2.0)


def _first_step_ok(params, log_Ct):
    # worst first step from the shifted start value must sit below Ct * 2**e
    b0 = params.alpha0 + 1.0
    b1 = b0 + C1 * params.C * b0 ** (1 - params.gamma) * 2.0**params.y
    return np.log(b1) <= log_Ct + params.exponent * np.log(2.0)


def _sweep_ok(params, log_Ct, sweep_max):
    lf = log_f(params, log_Ct, np.arange(1, sweep_max + 1))
    return bool(np.all(lf <= 0.0))


def certify_envelope(params, Ctilde=None, log_Ctilde=None, sweep_max=SWEEP_MAX):
    """True iff the envelope ``Ctilde (1 + n)**e`` is certified for ``params``.

    Pass either ``Ctilde`` or its logarithm (for constants beyond float range).
    """
    if log_Ctilde is None:
        if Ctilde is None or not Ctilde > 0:
            raise DomainError("Ctilde must be positive")
        log_Ctilde = float(np.log(Ctilde))
    return (
        _base_ok(params, log_Ctilde)
        and _derivative_ok(params, log_Ctilde)
        and _first_step_ok(params, log_Ctilde)
        and _sweep_ok(params, log_Ctilde, sweep_max)
    )


def _cheap_ok(params, log_Ct):
    return _base_ok(params, log_Ct) and _derivative_ok(params, log_Ct) and _first_step_ok(params, log_Ct)


def _bisect(pred, lo, hi, rtol):
    while hi - lo > np.log1p(rtol):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return hi


def min_envelope(params, rtol=1e-6, sweep_max=SWEEP_MAX):
    """Smallest certified ``Ctilde`` up to relative ``rtol`` (bisection in log space).

    Bisection runs on the closed-form conditions first; the numeric sweep is
    then confirmed at the result, with a second bisection if it fails there.
    """
    lo = float(np.log(params.alpha0 + 1.0))
    cert = lambda lc: certify_envelope(params, log_Ctilde=lc, sweep_max=sweep_max)  # noqa: E731
    if cert(lo):
        return Envelope(lo, params.exponent, params, sweep_max)
    hi = lo + 1.0
    while not _cheap_ok(params, hi):
        lo, hi = hi, hi + 2.0 * (hi - lo)
    hi = _bisect(lambda lc: _cheap_ok(params, lc), lo, hi, rtol)
    if not cert(hi):
        lo = hi
        hi = lo + 1.0
        while not cert(hi):
            lo, hi = hi, hi + 2.0 * (hi - lo)
        hi = _bisect(cert, lo, hi, rtol)
    return Envelope(hi, params.exponent, params, sweep_max)


def extremal_sequence(params, n_max):
    """Sequence with equality in the recurrence, ``a_0 .. a_{n_max}`` (float64).

    Raises :class:`SequenceOverflowError` at the first term that overflows.
    """
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    out = np.empty(n_max + 1)
    a = float(params.alpha0)
    out[0] = a
    g, C, y = params.gamma, params.C, params.y
    with np.errstate(over="ignore"):
        for n in range(1, n_max + 1):
            a = a + C * (a ** (1 - g) + 1.0) * (1.0 + n) ** y
            if not np.isfinite(a):
                raise SequenceOverflowError(n)
            out[n] = a
    return out


def _log_step(log_a, n, log_C, gamma, y, slack=None):
    """``log a_n`` from ``log a_{n-1}`` via ``a_n / a_{n-1} = 1 + s C (1+n)^y (a^-gamma + a^-1)``."""
    base = log_C + y * np.log1p(n)
    inc = np.exp(base - gamma * log_a) + np.exp(base - log_a)
    if slack is not None:
        inc = slack * inc
    return log_a + np.log1p(inc)


def log_extremal_sequence(params, n_max):
    """``log a_n`` of the extremal sequence, overflow-free."""
    if n_max < 1:
        raise DomainError("n_max must be >= 1")
    out = np.empty(n_max + 1)
    a0 = params.alpha0
    out[0] = np.log(a0) if a0 > 0 else -np.inf
    if params.C == 0:
        out[1:] = out[0]
        return out
    g, y, log_C = params.gamma, params.y, np.log(params.C)
    a1 = a0 + params.C * (a0 ** (1 - g) + 1.0) * 2.0**y
    out[1] = np.log(a1)
    for n in range(2, n_max + 1):
        out[n] = _log_step(out[n - 1], n, log_C, g, y)
    return out


def log_slack_sequences(gamma, C, y, alpha0, n_max, rng):
    """Random sequences obeying the recurrence with slack, in log space.

    Each step's increment is multiplied by an independent ``Uniform[0, 1)``
    draw.  Parameter arguments are broadcastable arrays (one entry per
    sequence).  Returns a generator of ``(n, log_a_n)`` for ``n = 0..n_max``.
    """
    gamma, C, y, alpha0 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (gamma, C, y, alpha0)))
    m = gamma.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(alpha0)
        log_C = np.log(C)
    yield 0, log_a
    s = rng.random(m)
    a1 = alpha0 + s * C * (alpha0 ** (1 - gamma) + 1.0) * 2.0**y
    with np.errstate(divide="ignore"):
        log_a = np.log(a1)
    yield 1, log_a
    alive = np.isfinite(log_a)
    for n in range(2, n_max + 1):
        s = rng.random(m)
        with np.errstate(invalid="ignore", over="ignore"):
            nxt = _log_step(log_a, n, log_C, gamma, y, s)
        log_a = np.where(alive, nxt, log_a)
        yield n, log_a


def fit_C(values, gamma, y):
    """Smallest ``C >= 0`` for which ``values`` satisfies the recurrence hypothesis."""
    a = np.asarray(values, dtype=float)
    if a.size < 2:
        raise ArityError("need at least two terms to fit C")
    if np.any(a < 0):
        raise DomainError("recurrence sequences must be nonnegative")
    n = np.arange(1, a.size)
    denom = (a[:-1] ** (1 - gamma) + 1.0) * (1.0 + n) ** y
    return float(max(0.0, np.max(np.diff(a) / denom)))


@dataclass
class SeriesCheck:
    fitted_C: float
    envelope: Envelope
    worst_log_ratio: float
    passed: bool

    @property
    def worst_ratio(self):
        return float(np.exp(self.worst_log_ratio))

    def to_dict(self):
        return {
            "fitted_C": self.fitted_C,
            "Ctilde": self.envelope.Ctilde,
            "log_Ctilde": self.envelope.log_Ctilde,
            "exponent": self.envelope.exponent,
            "worst_ratio": self.worst_ratio,
            "worst_log_ratio": self.worst_log_ratio,
            "passed": self.passed,
            "certificate_sweep_max": self.envelope.sweep_max,
        }


def check_series(times, values, gamma, y, rtol_uniform=1e-9):
    """Fit ``C`` to a sequence sampled at uniform times and test envelope membership.

    Reports ``max_n a_n / (1 + n)**e`` against the certified ``Ctilde``.
    """
    t = np.asarray(times, dtype=float)
    a = np.asarray(values, dtype=float)
    if t.size != a.size or t.size < 2:
        raise ArityError("times and values must have equal length >= 2")
    steps = np.diff(t)
    if np.any(steps <= 0) or np.ptp(steps) > rtol_uniform * max(abs(steps.mean()), 1e-300) + 1e-12 * np.abs(t).max():
        raise ArityError("series is not sampled on a uniform grid")
    C = fit_C(a, gamma, y)
    params = RecurrenceParams(gamma, C, y, float(a[0]))
    env = min_envelope(params)
    n = np.arange(a.size)
    with np.errstate(divide="ignore"):
        log_ratio = np.log(a) - env.exponent * np.log1p(n)
    worst = float(np.max(log_ratio))
    return SeriesCheck(C, env, worst, bool(worst <= env.log_Ctilde))
