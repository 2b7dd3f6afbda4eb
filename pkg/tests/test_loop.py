import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snakedc.admittance import AdmittanceGains
from snakedc.gait import GaitParams, odd_joints, serpenoid_angle
from snakedc.loop import PlaneController, ThresholdSettings, Variant, planar_loop
from snakedc.reactive import ComplianceMode
from snakedc.simworld import WorldParams, WorldState
from snakedc.windows import WindowLayout

GAIT = GaitParams()
DT = 0.005


def controller(variant="NC", travelling=True, **kwargs):
    layout = WindowLayout.tiled(3, travelling=travelling)
    return PlaneController.build("odd", GAIT, odd_joints(16), layout, AdmittanceGains(), variant, DT, **kwargs)


def test_variant_fixed_modes():
    assert Variant.PDC.fixed_mode == ComplianceMode.PDC
    assert Variant.NDC.fixed_mode == ComplianceMode.NDC
    assert Variant.NC.fixed_mode == Variant.DS.fixed_mode == ComplianceMode.NC
    assert Variant("DS") is Variant.DS


def test_build_scales_thresholds_by_amplitude():
    c = controller(thresholds=ThresholdSettings(upper_scale=3.0, lower_scale=-1.5, exit_scale=0.01))
    amp0 = GAIT.nominal_amplitude
    assert c.tracker.thresh_upper == pytest.approx(3.0 * amp0)
    assert c.tracker.thresh_lower == pytest.approx(-1.5 * amp0)
    assert c.tracker.eps_exit == pytest.approx(0.01 * amp0)
    assert c.tracker.k == round(GAIT.period / DT)
    # head slot holds the youngest window
    assert list(c.window_ids) == [3, 2, 1, 0]


def test_nominal_scale_override():
    c = controller(nominal_scale=0.5)
    assert c.nominal_scale == 0.5
    assert c.tracker.thresh_upper == pytest.approx(1.0)


@pytest.mark.parametrize("t", [0.0, 0.37, 2.5])
def test_commanded_is_serpenoid_at_nominal(t):
    c = controller()
    expected = [serpenoid_angle(i, t, GAIT.nominal_amplitude, GAIT) for i in odd_joints(16)]
    np.testing.assert_allclose(c.commanded(t), expected, atol=1e-12)


def test_zero_torque_holds_nominal_amplitudes():
    c = controller(travelling=False)
    for k in range(400):
        c.step((k + 1) * DT, np.zeros(8))
    np.testing.assert_array_equal(c.state.amp_desired, GAIT.nominal_amplitude)
    np.testing.assert_array_equal(c.tracker.absition, 0.0)


def test_windows_cycle_and_get_fresh_ids():
    c = controller()
    # one window is born every (window width / phase velocity) seconds
    n = int(round(2 * GAIT.period / DT))
    for k in range(n):
        c.step((k + 1) * DT, np.zeros(8))
    assert c.window_ids[0] > 3
    assert np.all(np.diff(c.window_ids) == -1)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["PDC", "NDC"]))
def test_fixed_directional_variants_stay_on_one_side(seed, variant):
    rng = np.random.default_rng(seed)
    c = controller(variant)
    amp0 = GAIT.nominal_amplitude
    for k in range(300):
        c.step((k + 1) * DT, rng.normal(0.0, 3.0, 8))
        if variant == "PDC":
            assert c.state.amp_desired.min() >= amp0 - 1e-12
        else:
            assert c.state.amp_desired.max() <= amp0 + 1e-12


def test_ds_records_events_with_window_ids():
    c = controller("DS", travelling=False)
    # a sustained push opposing the shape drives the amplitudes down
    for k in range(int(6.0 / DT)):
        t = (k + 1) * DT
        jac = np.sin(GAIT.eta * c.positions - GAIT.omega * t)
        c.step(t, -2.0 * jac)
    assert c.events
    e = c.events[0]
    assert e.old == ComplianceMode.NC and e.new == ComplianceMode.PDC
    assert e.absition < c.tracker.thresh_lower
    assert e.as_dict()["to"] == "PDC"
    assert e.window_id == 2 - e.slot


def test_non_ds_variants_never_record_events():
    for v in ("NC", "PDC", "NDC"):
        c = controller(v, travelling=False)
        for k in range(int(4.0 / DT)):
            c.step((k + 1) * DT, np.full(8, -5.0))
        assert c.events == []


def test_planar_loop_holds_even_joints_straight():
    world = WorldState.from_joint_angles(WorldParams(), np.zeros(16))
    loop = planar_loop(world, GAIT, WindowLayout.tiled(3), AdmittanceGains(), "NC", dt=DT)
    cmd = loop.command(0.3)
    assert np.all(cmd[0::2] == 0.0)
    assert np.abs(cmd[1::2]).max() > 0.1
    loop.run(0.5)
    assert loop.time == pytest.approx(0.5)
    assert loop.torques.shape == (16,)
