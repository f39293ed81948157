import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wavegrow.errors import ConfigurationError, PicardDivergence
from wavegrow.integrator import IntegratorConfig, evolve
from wavegrow.potential import PotentialSpec
from wavegrow.presets import gaussian_bump, single_mode
from wavegrow.propagator import (
    StepRule,
    calibrate_step_rule,
    continuation_run,
    free_step,
    pde_residual,
    picard_solve,
    step_size,
)
from wavegrow.spectral import Field, GridSpec, State, hcal_norm, sobolev_norm

from conftest import random_state

OFF = PotentialSpec.off()


def hdist(a, b):
    return hcal_norm(State(a.u - b.u, a.ut - b.ut))


def test_free_step_identity_and_constants(grid, rng):
    s = random_state(grid, rng)
    z = free_step(s, 0.0)
    assert np.array_equal(z.u.coeffs, s.u.coeffs) and np.array_equal(z.ut.coeffs, s.ut.coeffs)
    c = State(Field.constant(grid, 1.5), Field.constant(grid, -0.5))
    out = free_step(c, 2.0)
    assert np.allclose(out.u.values, 0.5, atol=1e-14)
    assert np.allclose(out.ut.values, -0.5, atol=1e-14)


@pytest.mark.parametrize("dt", [0.3, -1.7, 5.0])
def test_free_step_single_mode(dt):
    g = GridSpec(1, 64, 4.0)
    A, k = 1.3, np.pi / g.L
    x = g.axis_points
    out = free_step(single_mode(g, 1, A), dt)
    assert np.max(np.abs(out.u.values - A * np.cos(dt * k) * np.sin(k * x))) < 1e-10
    assert np.max(np.abs(out.ut.values + A * k * np.sin(dt * k) * np.sin(k * x))) < 1e-10
    assert out.t == pytest.approx(dt)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_free_step_group_law_and_reversibility(seed, a, b):
    g = GridSpec(2, 16, 3.0)
    s = random_state(g, np.random.default_rng(seed))
    n = hcal_norm(s)
    assert hdist(free_step(s, a + b), free_step(free_step(s, a), b)) <= 1e-11 * n
    assert hdist(free_step(free_step(s, a), -a), s) <= 1e-12 * n


def test_free_step_conserves_energy(grid, rng):
    s = random_state(grid, rng)

    def energy(st_):
        return sobolev_norm(st_.ut, 0) ** 2 + sobolev_norm(st_.u, 1) ** 2 - sobolev_norm(st_.u, 0) ** 2

    e0 = energy(s)
    for dt in (0.1, 1.0, 13.0):
        assert energy(free_step(s, dt)) == pytest.approx(e0, rel=1e-10)


def _state_with_norm(grid, rng, norm):
    s = random_state(grid, rng)
    scale = norm / hcal_norm(s)
    return State(s.u * scale, s.ut * scale)


def test_step_size_examples(rng):
    g = GridSpec(1, 32, 2.0)
    rule = StepRule(0.5, 2.0)
    one = _state_with_norm(g, rng, 1.0)
    assert step_size(one, rule) == pytest.approx(0.125, rel=1e-12)
    assert step_size(State.zeros(g), rule) == 0.5
    assert step_size(_state_with_norm(g, rng, 3.0), rule) < step_size(one, rule)


@pytest.mark.parametrize("c,gamma", [(0.0, 2.0), (1.5, 2.0), (0.5, 0.0), (np.nan, 1.0)])
def test_step_rule_validation(c, gamma):
    with pytest.raises(ConfigurationError):
        StepRule(c, gamma)


def test_picard_zero_data():
    g = GridSpec(1, 32, 2.0)
    rep = picard_solve(State.zeros(g), OFF, 0.1)
    assert rep.converged and rep.iterates_used == 1
    assert np.all(rep.final_state.u.coeffs == 0)


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1])
def test_picard_rejects_window(tau):
    with pytest.raises(ConfigurationError):
        picard_solve(State.zeros(GridSpec(1, 8, 1.0)), OFF, tau)


def test_picard_matches_integrator_small_mode():
    g = GridSpec(1, 64, 4.0)
    init = single_mode(g, 2, 0.1)
    tau = 0.01
    rep = picard_solve(init, OFF, tau)
    _, ref = evolve(init, OFF, IntegratorConfig(1e-4), tau, sample_every=100)
    assert hdist(rep.final_state, ref) <= 1e-6 * hcal_norm(init)


def test_picard_with_potential_matches_integrator():
    g = GridSpec(1, 128, 8.0)
    init = gaussian_bump(g, 0.8, 1.0, velocity=0.3)
    spec = PotentialSpec(2.0, 2.0, 3.0)
    rep = picard_solve(init, spec, 0.1)
    _, ref = evolve(init, spec, IntegratorConfig(2.5e-4), 0.1, sample_every=400)
    assert hdist(rep.final_state, ref) <= 1e-6 * hcal_norm(init)


def test_picard_divergence_carries_history():
    g = GridSpec(1, 64, 4.0)
    init = gaussian_bump(g, 6.0, 1.0)
    with pytest.raises(PicardDivergence) as err:
        picard_solve(init, OFF, 0.9, max_iter=3)
    assert len(err.value.diffs) == 3


def test_picard_report_json():
    g = GridSpec(1, 32, 2.0)
    rep = picard_solve(gaussian_bump(g, 0.5, 0.7), OFF, 0.05)
    d = json.loads(rep.to_json())
    assert d["converged"] and d["iterates_used"] == rep.iterates_used
    assert len(d["diffs"]) == rep.iterates_used
    assert d["window"] == pytest.approx([0.0, 0.05])
    assert all(x > 0 for x in d["diffs"][:-1])


def test_calibrated_rule_contracts(rng):
    g = GridSpec(1, 64, 4.0)
    data = [gaussian_bump(g, 4.0, 1.0)]
    rule = calibrate_step_rule(data, OFF)
    rep = picard_solve(data[0], OFF, step_size(data[0], rule))
    assert max(rep.contraction_ratios()) <= 0.5


def test_calibration_bisects_when_needed():
    # a weak step-rule exponent makes c = 1 too large, forcing the bisection branch
    g = GridSpec(1, 64, 4.0)
    data = [gaussian_bump(g, 4.0, 1.0)]
    rule = calibrate_step_rule(data, OFF, gamma=0.25, target=0.05)
    assert rule.c < 1.0
    rep = picard_solve(data[0], OFF, step_size(data[0], rule))
    assert max(rep.contraction_ratios()) <= 0.05


def test_continuation_single_window():
    g = GridSpec(1, 32, 2.0)
    init = gaussian_bump(g, 0.5, 0.7)
    rule = StepRule(0.5, 2.0)
    t_end = 0.5 * step_size(init, rule)
    states = continuation_run(init, OFF, rule, t_end)
    assert len(states) == 2 and states[-1].t == pytest.approx(t_end)


def test_continuation_linear_free_flow_and_window_count():
    g = GridSpec(1, 32, 3.0)
    init = single_mode(g, 1, 0.3)
    rule = StepRule(0.5, 2.0)
    t_end = 2.0
    states = continuation_run(init, OFF, rule, t_end, cubic=False)
    ref = free_step(init, t_end)
    assert hdist(states[-1], ref) <= 1e-8 * hcal_norm(init)
    assert states[-1].t == t_end
    # free flow does not conserve the H norm exactly; use the extreme window lengths
    taus = [step_size(s, rule) for s in states[:-1]]
    m = len(states) - 1
    assert 1.5 * t_end <= m * max(taus) and m * min(taus) <= 1.5 * (t_end + 1)


def test_continuation_window_count_constant_norm():
    # constant data with zero velocity is a fixed point of the free flow: constant H norm
    g = GridSpec(1, 16, 2.0)
    init = State(Field.constant(g, 0.2), Field.zeros(g))
    rule = StepRule(0.5, 2.0)
    tau = step_size(init, rule)
    t_end = 1.0
    m = len(continuation_run(init, OFF, rule, t_end, cubic=False)) - 1
    assert 1.5 * t_end <= m * tau <= 1.5 * (t_end + 1)


def test_residual_is_second_order():
    g = GridSpec(1, 64, 4.0)
    init = gaussian_bump(g, 1.0, 1.0)
    spec = PotentialSpec(1.0, 2.0, 2.0)
    r1 = pde_residual(picard_solve(init, spec, 0.2), spec)
    r2 = pde_residual(picard_solve(init, spec, 0.1), spec)
    assert r1 / r2 >= 3.5
