import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snakedc.admittance import (
    AdmittanceGains,
    ShapeState,
    TorqueVector,
    admittance_step,
    shape_force,
)
from snakedc.errors import ConfigurationError
from snakedc.gait import GaitParams
from snakedc.reactive import ComplianceMode
from snakedc.windows import WindowLayout

from oracles import critically_damped_step

GAIT = GaitParams()
WIDE = AdmittanceGains(amp_max=50.0, amp_min=-50.0)


def simulate(state, force, gains, dt, seconds):
    out = []
    for _ in range(int(round(seconds / dt))):
        state = admittance_step(state, force, gains, dt)
        out.append(state.amp_desired[0])
    return state, np.array(out)


def _state(amp, vel=0.0, nominal=0.0, mode=ComplianceMode.NC):
    return ShapeState(
        amp_desired=np.array([amp], dtype=float),
        amp_vel=np.array([vel], dtype=float),
        amp_acc=np.zeros(1),
        amp_nominal=np.array([nominal], dtype=float),
        mode=np.array([mode], dtype=np.int8),
    )


def step_error(dt):
    _, traj = simulate(_state(0.0), np.ones(1), WIDE, dt, 10.0)
    t = dt * np.arange(1, traj.size + 1)
    exact = critically_damped_step(t, 1.0, WIDE.k_gain, WIDE.natural_frequency)
    return np.max(np.abs(traj - exact)) / np.max(np.abs(exact))


def test_default_gains_are_critically_damped():
    g = AdmittanceGains()
    assert g.damping_ratio == pytest.approx(1.0)
    assert g.natural_frequency == pytest.approx(2.0)


def test_step_response_matches_analytic_solution():
    assert step_error(1e-3) < 1e-3


def test_step_response_error_is_first_order():
    ratio = step_error(1e-3) / step_error(5e-4)
    assert 1.6 <= ratio <= 2.4


def test_equilibrium_is_fixed_point():
    s = _state(0.6, nominal=0.6)
    for _ in range(100):
        s = admittance_step(s, np.zeros(1), AdmittanceGains(), 0.005)
    assert s.amp_desired[0] == 0.6 and s.amp_vel[0] == 0.0


def test_zero_force_converges_to_nominal():
    s, _ = simulate(_state(1.2, nominal=0.6), np.zeros(1), AdmittanceGains(), 1e-3, 10.0)
    assert abs(s.amp_desired[0] - 0.6) < 1e-6


@settings(max_examples=60, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-2.0, 2.0), st.sampled_from([1e-3, 5e-3]))
def test_zero_force_energy_non_increasing(dev, vel, dt):
    gains = WIDE
    s = _state(0.6 + dev, vel, nominal=0.6)

    def energy(st_):
        return 0.5 * gains.m_gain * st_.amp_vel[0] ** 2 + 0.5 * gains.k_gain * (st_.amp_desired[0] - 0.6) ** 2

    e = energy(s)
    for _ in range(500):
        s = admittance_step(s, np.zeros(1), gains, dt)
        e_next = energy(s)
        assert e_next <= e + 1e-9
        e = e_next


@settings(max_examples=100)
@given(
    st.floats(-3.0, 3.0),
    st.floats(-20.0, 20.0),
    st.floats(-100.0, 100.0),
    st.sampled_from(list(ComplianceMode)),
)
def test_clamp_keeps_range_and_zeroes_outward_velocity(amp, vel, force, mode):
    gains = AdmittanceGains()
    s = _state(min(max(amp, 0.0), gains.amp_max), vel, nominal=0.6, mode=mode)
    out = admittance_step(s, np.array([force]), gains, 0.005)
    a, v = out.amp_desired[0], out.amp_vel[0]
    assert gains.amp_min <= a <= gains.amp_max
    if a == gains.amp_max:
        assert v <= 0.0
    if a == gains.amp_min:
        assert v >= 0.0


def test_filter_inserted_between_velocity_and_position():
    s = _state(0.6, 0.0, nominal=0.6, mode=ComplianceMode.PDC)
    out = admittance_step(s, np.array([-5.0]), AdmittanceGains(), 0.005)
    assert out.amp_vel[0] == 0.0 and out.amp_desired[0] == 0.6
    assert out.amp_acc[0] == pytest.approx(-5.0)
    s = _state(0.6, 0.0, nominal=0.6, mode=ComplianceMode.NDC)
    out = admittance_step(s, np.array([5.0]), AdmittanceGains(), 0.005)
    assert out.amp_vel[0] == 0.0 and out.amp_desired[0] == 0.6


def test_admittance_errors():
    s = ShapeState.nominal(3, 0.6)
    with pytest.raises(ValueError):
        admittance_step(s, np.zeros(3), AdmittanceGains(), 0.0)
    with pytest.raises(ConfigurationError):
        admittance_step(s, np.zeros(2), AdmittanceGains(), 0.005)
    with pytest.raises(FloatingPointError, match="window 1"):
        admittance_step(s, np.array([0.0, np.inf, 0.0]), AdmittanceGains(), 0.005)


@pytest.mark.parametrize("kwargs", [dict(m_gain=0.0), dict(b_gain=-1.0), dict(k_gain=0.0),
                                    dict(amp_min=1.0, amp_max=0.5)])
def test_gain_validation(kwargs):
    with pytest.raises(ConfigurationError):
        AdmittanceGains(**kwargs)


def test_shape_force_zero_torque():
    layout = WindowLayout.tiled(3, travelling=False)
    np.testing.assert_array_equal(shape_force(np.zeros(16), 1.0, layout, GAIT), np.zeros(3))


def test_single_torque_inside_a_window():
    layout = WindowLayout.tiled(3, travelling=False)
    i, t, tau_i = 8, 0.37, 0.8  # s = 0.5 sits in the middle window
    tau = np.zeros(16)
    tau[i] = tau_i
    force = shape_force(TorqueVector(tau), t, layout, GAIT)
    expected = math.sin(GAIT.eta * i * GAIT.delta_s - GAIT.omega * t) * tau_i
    assert force[1] == pytest.approx(expected, rel=1e-3)
    assert abs(force[0]) < 1e-3 * tau_i and abs(force[2]) < 1e-3 * tau_i


def test_torque_at_jacobian_null_gives_no_force():
    layout = WindowLayout.tiled(3, travelling=False)
    i = 4
    t = GAIT.eta * i * GAIT.delta_s / GAIT.omega  # phase zero at joint i
    tau = np.zeros(16)
    tau[i] = 1e3
    np.testing.assert_allclose(shape_force(tau, t, layout, GAIT), 0.0, atol=1e-9)


def test_shape_force_subset_of_joints_and_size_check():
    layout = WindowLayout.tiled(3, travelling=False)
    joints = np.arange(1, 16, 2)
    tau = np.linspace(-1, 1, 8)
    full = np.zeros(16)
    full[joints] = tau
    np.testing.assert_allclose(
        shape_force(tau, 0.9, layout, GAIT, joints), shape_force(full, 0.9, layout, GAIT), atol=1e-15
    )
    with pytest.raises(ConfigurationError):
        shape_force(np.zeros(15), 0.0, layout, GAIT)


def test_torque_vector_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        TorqueVector([0.0, np.nan])


def test_shift_in_resets_head_window():
    s = ShapeState(np.array([0.1, 0.2, 0.3]), np.ones(3), np.ones(3), np.full(3, 0.6),
                   np.array([1, 2, 1], dtype=np.int8))
    out = s.shift_in()
    np.testing.assert_array_equal(out.amp_desired, [0.6, 0.1, 0.2])
    np.testing.assert_array_equal(out.amp_vel, [0.0, 1.0, 1.0])
    np.testing.assert_array_equal(out.mode, [0, 1, 2])
