"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import time

import numpy as np
import pytest

from wavegrow.cli import main
from wavegrow.config import emit_config, parse_config_text
from wavegrow.errors import ConfigError
from wavegrow.experiments import continuous_dependence_probe, run_dichotomy, run_recurrence_pipeline, x2_from_states
from wavegrow.functionals import energy_X1, verify_identity_43, verify_identity_51
from wavegrow.integrator import IntegratorConfig, evolve
from wavegrow.potential import PotentialSpec
from wavegrow.presets import gaussian_bump, random_smooth, single_mode
from wavegrow.propagator import calibrate_step_rule, free_step, picard_solve, step_size
from wavegrow.recurrence import (
    RecurrenceParams,
    certify_envelope,
    log_extremal_sequence,
    log_f,
    log_slack_sequences,
    min_envelope,
)
from wavegrow.spectral import Field, GridSpec, State, hcal_norm
from wavegrow.storage import checkpoint, read_series, restore, write_series
from wavegrow.series import NormSeries

from test_config import MINIMAL, _mutate

DESK = GridSpec(1, 512, 16.0)


def hdist(a, b):
    g = a.grid
    return hcal_norm(State.from_coeffs(g, a.u.coeffs - b.u.coeffs, a.ut.coeffs - b.ut.coeffs))


def smooth_trajectory(init, spec, dt, t_end):
    states = []
    evolve(init, spec, IntegratorConfig(dt), t_end, sample_every=1, k_list=(1,),
           on_sample=lambda i, s, row: states.append(s), check_cfl=False)
    return states


# --- recurrence envelopes ----------------------------------------------------

@pytest.fixture(scope="module")
def envelope_draws():
    rng = np.random.default_rng(101)
    params = [
        RecurrenceParams(rng.uniform(0.1, 0.9), rng.uniform(0, 10), rng.uniform(0, 12), rng.uniform(0, 100))
        for _ in range(200)
    ]
    t0 = time.perf_counter()
    envs = [min_envelope(p) for p in params]
    return params, envs, time.perf_counter() - t0


def test_criterion_01_envelope_domination(envelope_draws, criterion):
    params, envs, t_env = envelope_draws
    t0 = time.perf_counter()
    reps = 200
    gamma = np.repeat([p.gamma for p in params], reps)
    C = np.repeat([p.C for p in params], reps)
    y = np.repeat([p.y for p in params], reps)
    a0 = np.repeat([p.alpha0 for p in params], reps)
    log_ct = np.repeat([e.log_Ctilde for e in envs], reps)
    expo = np.repeat([e.exponent for e in envs], reps)
    violations = 0
    rng = np.random.default_rng(102)
    for n, log_a in log_slack_sequences(gamma, C, y, a0, 10_000, rng):
        violations += int(np.count_nonzero(log_a > log_ct + expo * np.log1p(n)))
    elapsed = t_env + time.perf_counter() - t0
    ok = violations == 0 and elapsed < 30.0
    criterion(1, ok, f"{len(params)}x{reps} slack sequences to n=1e4, violations={violations}, {elapsed:.1f}s")
    assert ok


def test_criterion_02_exponent_arithmetic(criterion):
    t0 = time.perf_counter()
    exps = []
    worst = -np.inf
    for C, a0 in ((1.0, 0.0), (0.3, 5.0), (4.0, 1.0)):
        p = RecurrenceParams(1 / 8, C, 12, a0)
        env = min_envelope(p)
        exps.append(env.exponent)
        n = np.arange(1001)
        gap = log_extremal_sequence(p, 1000) - env.log_bound(n)
        worst = max(worst, float(np.max(gap)))
        assert certify_envelope(p, log_Ctilde=env.log_Ctilde)
    elapsed = time.perf_counter() - t0
    ok = all(e == 104 for e in exps) and worst <= 0.0 and elapsed < 5.0
    criterion(2, ok, f"exponents={exps}, extremal max log(a_n/bound)={worst:.3f}, {elapsed:.2f}s")
    assert ok


def test_criterion_03_f_monotone(envelope_draws, criterion):
    params, envs, _ = envelope_draws
    n = np.arange(1, 100_001)
    bad = 0
    for p, e in zip(params, envs):
        lf = log_f(p, e.log_Ctilde, n)
        if not (np.all(lf < 0.0) and np.all(np.diff(lf) >= 0.0)):
            bad += 1
    ok = bad == 0
    criterion(3, ok, f"{len(envs)} envelopes, f sampled on [1, 1e5], violations={bad}")
    assert ok


# --- energy and identities ---------------------------------------------------

def test_criterion_04_energy_conservation(criterion):
    t0 = time.perf_counter()
    spec = PotentialSpec(2.0, 2.0, 0.0)
    init = gaussian_bump(DESK, 1.0, 1.0, velocity=0.5)
    x = []
    evolve(init, spec, IntegratorConfig(1e-3), 10.0, sample_every=10, k_list=(1,),
           on_sample=lambda i, s, row: x.append(row["X1"]))
    x = np.asarray(x)
    drift = float(np.max(np.abs(x - x[0])) / x[0])
    elapsed = time.perf_counter() - t0
    ok = drift <= 1e-6 and elapsed < 60.0
    criterion(4, ok, f"max relative X1 drift={drift:.2e} over {x.size} samples, {elapsed:.1f}s")
    assert ok


def test_criterion_05_identities(criterion):
    spec = PotentialSpec(2.0, 3.0, 3.0)
    init = gaussian_bump(DESK, 1.0, 1.0, velocity=0.5)
    coarse = smooth_trajectory(init, spec, 1e-3, 0.1)
    fine = smooth_trajectory(init, spec, 5e-4, 0.1)
    checks = {
        "X2 identity": (verify_identity_43(coarse, spec), verify_identity_43(fine, spec)),
        "E_a identity |a|=1": (verify_identity_51(coarse, spec, (1,)), verify_identity_51(fine, spec, (1,))),
        "E_a identity |a|=2": (verify_identity_51(coarse, spec, (2,)), verify_identity_51(fine, spec, (2,))),
    }
    ok = all(r1 <= 1e-5 and r1 / r2 >= 3.5 for r1, r2 in checks.values())
    detail = ", ".join(f"{k}: res={r1:.2e} ratio={r1 / r2:.2f}" for k, (r1, r2) in checks.items())
    criterion(5, ok, detail)
    assert ok


# --- solvers -----------------------------------------------------------------

def test_criterion_06_dual_solver(criterion):
    t0 = time.perf_counter()
    spec = PotentialSpec(1.0, 1.5, 2.0)
    errs = {}
    for name, g in (("1D", GridSpec(1, 256, 8.0)), ("3D", GridSpec(3, 32, 4.0))):
        init = gaussian_bump(g, 1.0, 1.0, velocity=0.5)
        rep = picard_solve(init, spec, 0.1)
        _, end = evolve(init, spec, IntegratorConfig(1e-3), 0.1, sample_every=100, k_list=(1,))
        errs[name] = hdist(rep.final_state, end) / hcal_norm(end)
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-5 and elapsed < 60.0
    criterion(6, ok, ", ".join(f"{k} rel H-distance={v:.2e}" for k, v in errs.items()) + f", {elapsed:.1f}s")
    assert ok


def test_criterion_07_picard_contraction(criterion):
    g = GridSpec(1, 128, 8.0)
    spec = PotentialSpec(1.0, 2.0, 2.0)
    parts, bad_total = [], 0
    # the default exponent leaves c = 1 slack; the weak exponent makes the bisection bind
    for gamma in (2.0, 0.25):
        rng = np.random.default_rng(707)
        held_out = [random_smooth(g, rng, amplitude=8.0) for _ in range(4)]
        rule = calibrate_step_rule(held_out, spec, gamma=gamma)
        worst, bad = 0.0, 0
        for _ in range(20):
            f = random_smooth(g, rng, amplitude=8.0)
            ratios = picard_solve(f, spec, step_size(f, rule)).contraction_ratios()
            worst = max(worst, max(ratios))
            bad += sum(r > 0.6 for r in ratios)
        bad_total += bad
        parts.append(f"gamma={gamma} c={rule.c:.3g}: worst ratio={worst:.3f}, violations={bad}")
    ok = bad_total == 0
    criterion(7, ok, "20 fresh data per rule; " + "; ".join(parts))
    assert ok


def test_criterion_08_free_propagator(criterion):
    rng = np.random.default_rng(808)
    closed = 0.0
    for dim, n, L, m in ((1, 64, 4.0, 1), (1, 64, 4.0, 7), (2, 16, 3.0, 2), (3, 8, 2.5, 1)):
        g = GridSpec(dim, n, L)
        A, dt = 0.8, 0.37
        init = single_mode(g, m, A)
        k = np.pi * m / L
        profile = np.sin(k * g.coords[0])
        out = free_step(init, dt)
        closed = max(closed,
                     float(np.max(np.abs(out.u.values - A * np.cos(dt * k) * profile))),
                     float(np.max(np.abs(out.ut.values + A * k * np.sin(dt * k) * profile))))
        c, d = 1.3, -0.4
        zero = free_step(State(Field.constant(g, c), Field.constant(g, d)), dt)
        closed = max(closed, float(np.max(np.abs(zero.u.values - (c + dt * d)))),
                     float(np.max(np.abs(zero.ut.values - d))))

    grids = [GridSpec(1, 64, 4.0), GridSpec(2, 16, 3.0), GridSpec(3, 8, 2.5)]
    group = rev = 0.0
    for i in range(1000):
        g = grids[i % 3]
        s = random_smooth(g, rng)
        a, b = rng.uniform(-5, 5, 2)
        lhs = free_step(s, a + b)
        rhs = free_step(free_step(s, a), b)
        group = max(group, hdist(lhs, rhs) / hcal_norm(lhs))
        back = free_step(free_step(s, a), -a)
        rev = max(rev, hdist(back, s) / hcal_norm(s))
    ok = closed <= 1e-10 and group <= 1e-11 and rev <= 1e-11
    criterion(8, ok, f"closed-form err={closed:.1e}, group law={group:.1e}, reversibility={rev:.1e} (1000 states)")
    assert ok


# --- experiments -------------------------------------------------------------

def test_criterion_09_dichotomy(criterion):
    t0 = time.perf_counter()
    rep = run_dichotomy(DESK, gaussian_bump(DESK, 1.0, 1.0), amplitudes=(0.0, 0.5, 1.0, 2.0, 4.0),
                        omegas=(0.5, 1.0, 2.0, 3.0, 4.0), horizon=200.0, radius=2.0, sample_every=16)
    elapsed = time.perf_counter() - t0
    bad = rep.nonlinear_exponential_violations
    rates = {(e.amplitude, e.omega): e.nonlinear.rate for e in rep.entries}
    ok = not bad and elapsed < 900.0
    detail = (f"noise floor={rep.noise_floor:.2e}, nonlinear exponential violations="
              f"{[(a, w, round(rates[(a, w)], 4)) for a, w in bad]}, "
              f"linear resonance candidates (descriptive)={rep.resonance_candidates}, {elapsed:.0f}s")
    criterion(9, ok, detail)
    assert ok


def test_criterion_10_recurrence_pipeline(criterion):
    t0 = time.perf_counter()
    spec = PotentialSpec(2.0, 2.0, 2.0)
    states = []
    rep = run_recurrence_pipeline(DESK, spec, gaussian_bump(DESK, 1.0, 1.0), 20.0,
                                  on_sample=lambda i, s, row: states.append(s))
    elapsed = time.perf_counter() - t0
    consistency = float(np.max(np.abs(x2_from_states(states, spec) - rep.X2) / np.maximum(rep.X2, 1e-300)))
    c = rep.check
    ok = bool(np.isfinite(c.fitted_C)) and rep.passed and consistency <= 1e-12 and elapsed < 300.0
    criterion(10, ok, f"N={rep.n_windows} tau={rep.tau:.3g}, fitted C={c.fitted_C:.2e}, "
                      f"worst ratio={c.worst_ratio:.3g} <= Ctilde={c.envelope.Ctilde:.3g}, "
                      f"X2 recompute err={consistency:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_11_continuous_dependence(criterion):
    rng = np.random.default_rng(1111)
    spec = PotentialSpec(1.0, 2.0, 2.0)
    data = gaussian_bump(DESK, 1.0, 1.0, velocity=0.5)
    direction = random_smooth(DESK, rng)
    deltas = [1e-3, 5e-4, 2.5e-4, 1.25e-4]
    rep = continuous_dependence_probe(data, direction, deltas, spec=spec)
    ratios = rep.ratios(1) + rep.ratios(2)
    ok = len(ratios) == 6 and all(0.4 <= r <= 0.6 for r in ratios)
    criterion(11, ok, "ratios k=1 " + ", ".join(f"{r:.4f}" for r in rep.ratios(1))
              + "; k=2 " + ", ".join(f"{r:.4f}" for r in rep.ratios(2)))
    assert ok


# --- infrastructure ----------------------------------------------------------

def test_criterion_12_infrastructure(tmp_path, criterion):
    rng = np.random.default_rng(1212)
    base = emit_config(parse_config_text(MINIMAL + "potential.radius = 2.0\n"))
    crashes = 0
    for _ in range(10_000):
        text = base
        for _ in range(rng.integers(1, 4)):
            text = _mutate(rng, text)
        try:
            parse_config_text(text)
        except ConfigError:
            pass
        except Exception:  # any other exception is a crash
            crashes += 1

    exact = True
    for g in (GridSpec(1, 64, 4.0), GridSpec(2, 16, 3.0), GridSpec(3, 8, 2.5)):
        s = random_smooth(g, rng)
        s = State(s.u, s.ut, 1.2345678901234567)
        checkpoint(s, tmp_path / "ck.bin", step=17)
        back, step = restore(tmp_path / "ck.bin", with_step=True)
        exact &= step == 17 and back.t == s.t
        for a, b in ((back.u, s.u), (back.ut, s.ut)):
            exact &= a.values.tobytes() == b.values.tobytes() and a.coeffs.tobytes() == b.coeffs.tobytes()

    series = NormSeries()
    vals = np.concatenate([rng.standard_normal(50) * 10.0 ** rng.integers(-300, 300, 50),
                           [0.0, 5e-324, 1.7976931348623157e308, np.pi]])
    for i, v in enumerate(vals):
        series.append(float(i) / 3.0, {"H1": abs(v), "X1": v})
    write_series(series, tmp_path / "s.csv")
    got = read_series(tmp_path / "s.csv")
    lossless = (np.array_equal(got.times, series.times) and np.array_equal(got["H1"], series["H1"])
                and np.array_equal(got["X1"], series["X1"]))

    cfg = tmp_path / "run.cfg"
    cfg.write_text(MINIMAL + "potential.radius = 2.0\ndata.preset = random-smooth\nexperiment.horizon = 2.0\n")
    outs = []
    for name in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / name), "--seed", "5"]) == 0
        outs.append((tmp_path / name / "series.csv").read_bytes())
    deterministic = outs[0] == outs[1]

    ok = crashes == 0 and exact and lossless and deterministic
    criterion(12, ok, f"config fuzz 1e4 cases crashes={crashes}, checkpoint bit-exact={exact}, "
                      f"CSV lossless={lossless}, seeded CSV byte-identical={deterministic}")
    assert ok
