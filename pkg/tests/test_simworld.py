import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snakedc.errors import GenerationError, SimulationError
from snakedc.gait import GaitParams, odd_joints, shape_function
from snakedc.simworld import (
    ContactForce,
    WorldParams,
    WorldState,
    geometric_center,
    resolve_contacts,
    sense_external_torques,
    spawn_peg_array,
    step_world,
)


def chain_nodes(head, phi0, joint_angles, link_len):
    """Node positions from the head node outwards, head link fixed."""
    phi = phi0 + np.concatenate([[0.0], np.cumsum(joint_angles)])
    steps = link_len * np.stack([np.cos(phi), np.sin(phi)], axis=1)
    return np.vstack([head, head + np.cumsum(steps, axis=0)])


def penalty_energy(nodes, peg, reach, k_n):
    total = 0.0
    for a, b in zip(nodes[:-1], nodes[1:]):
        e = b - a
        lam = np.clip(np.dot(peg - a, e) / np.dot(e, e), 0.0, 1.0)
        d = np.linalg.norm(a + lam * e - peg)
        if d < reach:
            total += 0.5 * k_n * (reach - d) ** 2
    return total


def bent_world(params=WorldParams(), amp=0.4):
    alpha = amp * np.sin(np.linspace(0, 2 * np.pi, params.n_joints))
    return WorldState.from_joint_angles(params, alpha, center=(0.3, -0.2), heading=0.7)


def test_static_when_commands_hold_current_angles():
    p = WorldParams().frictionless()
    world = bent_world(p)
    cmd = world.joint_angles.copy()
    for _ in range(400):
        world, _ = step_world(world, cmd, 0.005)
    assert np.abs(world.phi_vel).max() < 1e-9
    assert np.abs(world.com_vel).max() < 1e-9


def test_momentum_conserved_without_external_forces():
    p = WorldParams().frictionless()
    world = bent_world(p)
    world.com_vel[:] = [0.05, -0.02]
    m0 = world.momentum()
    gait = GaitParams(nominal_amplitude=math.pi / 5, n_joints=p.n_joints)
    joints = odd_joints(p.n_joints)
    for k in range(200):  # 1 s
        cmd = np.zeros(p.n_joints)
        cmd[joints] = shape_function(np.full(joints.size, gait.nominal_amplitude), k * 0.005, gait, joints)
        world, _ = step_world(world, cmd, 0.005)
    assert np.abs(world.momentum() - m0).max() < 1e-6


def test_node_positions_match_chain_kinematics():
    world = bent_world()
    nodes = world.nodes()
    expected = chain_nodes(nodes[0], world.phi[0], world.joint_angles, world.params.link_length)
    np.testing.assert_allclose(nodes, expected, atol=1e-12)


def test_contact_torque_matches_energy_gradient():
    p = WorldParams(friction_tangential=0.0, friction_normal=0.0)
    world = bent_world(p)
    nodes = world.nodes()
    # peg pressed 1 mm into the side of link 9
    a, b = nodes[9], nodes[10]
    e = (b - a) / np.linalg.norm(b - a)
    normal = np.array([-e[1], e[0]])
    reach = p.peg_radius + p.link_radius
    peg = a + 0.4 * (b - a) + normal * (reach - 1e-3)
    world.pegs = peg[None, :]

    contacts = [c for c in resolve_contacts(world) if c.peg >= 0]
    assert len(contacts) == 1 and contacts[0].link == 9
    tau = sense_external_torques(world, contacts)

    h = 1e-7
    grad = np.zeros(p.n_joints)
    for i in range(p.n_joints):
        up, dn = world.joint_angles.copy(), world.joint_angles.copy()
        up[i] += h
        dn[i] -= h
        e_up = penalty_energy(chain_nodes(nodes[0], world.phi[0], up, p.link_length), peg, reach,
                              p.contact_stiffness)
        e_dn = penalty_energy(chain_nodes(nodes[0], world.phi[0], dn, p.link_length), peg, reach,
                              p.contact_stiffness)
        grad[i] = (e_up - e_dn) / (2 * h)
    np.testing.assert_allclose(tau, -grad, atol=1e-6)
    assert np.all(tau[9:] == 0.0)
    assert np.any(tau[:9] != 0.0)


def three_link_world():
    p = WorldParams(n_joints=2)
    # head at the origin, body along -x
    return WorldState.from_joint_angles(p, np.zeros(2), center=(-0.15, 0.0), heading=0.0)


def test_three_link_moment_arms():
    world = three_link_world()
    np.testing.assert_allclose(world.nodes()[:, 0], [0.0, -0.1, -0.2, -0.3], atol=1e-12)
    f = ContactForce(force=np.array([0.0, 1.0]), point=np.array([-0.25, 0.0]), peg=0, link=2)
    np.testing.assert_allclose(sense_external_torques(world, [f]), [-0.15, -0.05], atol=1e-12)
    f = ContactForce(force=np.array([2.0, 0.0]), point=np.array([-0.15, 0.03]), peg=0, link=1)
    np.testing.assert_allclose(sense_external_torques(world, [f]), [-0.06, 0.0], atol=1e-12)
    head = ContactForce(force=np.array([0.0, 5.0]), point=np.array([-0.05, 0.0]), peg=0, link=0)
    np.testing.assert_array_equal(sense_external_torques(world, [head]), [0.0, 0.0])


def test_empty_contacts_frictionless_zero_torque():
    world = bent_world(WorldParams().frictionless())
    assert sense_external_torques(world, []).tolist() == [0.0] * 16
    assert sense_external_torques(world, resolve_contacts(world)).tolist() == [0.0] * 16


@settings(max_examples=30)
@given(
    st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3),
    st.integers(0, 16), st.integers(0, 16), st.floats(0.1, 4.0),
)
def test_torque_sensing_linear_and_superposed(f1x, f1y, f2x, f2y, l1, l2, scale):
    world = bent_world()
    centers = world.link_centers()
    c1 = ContactForce(np.array([f1x, f1y]), centers[l1], 0, l1)
    c2 = ContactForce(np.array([f2x, f2y]), centers[l2], 1, l2)
    t1 = sense_external_torques(world, [c1])
    t2 = sense_external_torques(world, [c2])
    scaled = ContactForce(scale * c1.force, c1.point, 0, l1)
    np.testing.assert_allclose(sense_external_torques(world, [scaled]), scale * t1, atol=1e-12)
    np.testing.assert_allclose(sense_external_torques(world, [c1, c2]), t1 + t2, atol=1e-12)


def test_peg_forces_repulsive_and_local():
    p = WorldParams()
    world = bent_world(p)
    world.com_vel[:] = [0.1, 0.05]
    world.phi_vel[:] = np.linspace(-0.5, 0.5, p.n_links)
    rng = np.random.default_rng(3)
    centers = world.link_centers()
    world.pegs = centers[rng.integers(0, p.n_links, 40)] + rng.normal(0, 0.05, size=(40, 2))
    reach = p.peg_radius + p.link_radius
    for c in resolve_contacts(world):
        if c.peg < 0:
            continue
        off = c.point - world.pegs[c.peg]
        assert np.linalg.norm(off) < reach
        assert np.dot(c.force, off) >= 0.0


def test_forward_progress_under_anisotropic_friction():
    p = WorldParams()
    world = WorldState.from_joint_angles(p, np.zeros(p.n_joints))
    gait = GaitParams(nominal_amplitude=math.pi / 5, n_joints=p.n_joints)
    joints = odd_joints(p.n_joints)
    start = geometric_center(world).copy()
    dt = 0.005
    for k in range(int(round(gait.period / dt))):
        cmd = np.zeros(p.n_joints)
        cmd[joints] = shape_function(np.full(joints.size, gait.nominal_amplitude), (k + 1) * dt, gait, joints)
        world, _ = step_world(world, cmd, dt)
    assert (geometric_center(world) - start)[0] > 0.0


def test_step_is_deterministic():
    def run():
        p = WorldParams()
        world = bent_world(p)
        world.pegs = spawn_peg_array(4, 10.0, 0.2, extent=(2.0, 2.0), origin=(-0.7, -1.2))
        gait = GaitParams(nominal_amplitude=math.pi / 5, n_joints=p.n_joints)
        joints = odd_joints(p.n_joints)
        taus = []
        for k in range(300):
            cmd = np.zeros(p.n_joints)
            cmd[joints] = shape_function(np.full(joints.size, 0.6), k * 0.005, gait, joints)
            world, r = step_world(world, cmd, 0.005)
            taus.append(r.torque_ext)
        return world, np.array(taus)

    w1, t1 = run()
    w2, t2 = run()
    assert np.array_equal(t1, t2)
    assert np.array_equal(w1.phi, w2.phi) and np.array_equal(w1.com, w2.com)


def test_readings_shapes_and_finiteness_with_pegs():
    p = WorldParams()
    gait = GaitParams(nominal_amplitude=math.pi / 5, n_joints=p.n_joints)
    joints = odd_joints(p.n_joints)

    def command(t):
        cmd = np.zeros(p.n_joints)
        cmd[joints] = shape_function(np.full(joints.size, gait.nominal_amplitude), t, gait, joints)
        return cmd

    world = WorldState.from_joint_angles(p, command(0.0), center=(0.3, -0.2), heading=0.7)
    pegs = spawn_peg_array(11, 10.0, 0.2, extent=(3.0, 3.0), origin=(-1.2, -1.7))
    gap = np.linalg.norm(pegs[:, None] - world.link_centers()[None], axis=2).min(axis=1)
    world.pegs = pegs[gap > 0.12]  # start clear of the body
    touched = 0
    for k in range(1200):
        world, r = step_world(world, command((k + 1) * 0.005), 0.005)
        touched += world.n_contacts > 0
        assert r.angle.shape == r.rate.shape == r.torque_ext.shape == (p.n_joints,)
        assert np.all(np.isfinite(r.torque_ext))
        assert np.abs(world.joint_angles).max() <= math.pi
        # penalty stiffness keeps penetration a small fraction of the peg radius
        assert world.max_penetration <= 0.05 * p.peg_radius
    assert touched > 100


def test_step_rejects_bad_inputs():
    world = bent_world()
    with pytest.raises(ValueError):
        step_world(world, np.zeros(16), 0.0)
    with pytest.raises(ValueError):
        step_world(world, np.full(16, np.nan), 0.005)
    with pytest.raises(ValueError):
        step_world(world, np.zeros(15), 0.005)


def test_energy_blowup_raises_simulation_error():
    world = bent_world()
    world.energy_bound = 1e-9
    with pytest.raises(SimulationError):
        step_world(world, np.full(16, 0.5), 0.005)


def test_peg_array_deterministic_and_spaced():
    a = spawn_peg_array(42, 10.0, 0.2, extent=(2.0, 3.0))
    b = spawn_peg_array(42, 10.0, 0.2, extent=(2.0, 3.0))
    assert a.tobytes() == b.tobytes()
    d = np.linalg.norm(a[:, None] - a[None], axis=2)
    np.fill_diagonal(d, np.inf)
    assert d.min() >= 0.2
    assert np.all((a >= 0) & (a <= [2.0, 3.0]))


def test_peg_count_across_seeds():
    counts = [spawn_peg_array(s, 10.0, 0.2, extent=(2.0, 3.0)).shape[0] for s in range(100)]
    assert all(45 <= c <= 75 for c in counts)


def test_peg_array_errors():
    with pytest.raises(ValueError):
        spawn_peg_array(0, 10.0, 0.05)
    with pytest.raises(GenerationError):
        spawn_peg_array(0, 200.0, 0.2, extent=(1.0, 1.0))


def test_geometric_center_examples():
    p = WorldParams()
    straight = WorldState.from_joint_angles(p, np.zeros(p.n_joints))
    np.testing.assert_allclose(geometric_center(straight), [0.0, 0.0], atol=1e-12)
    moved = straight.copy()
    moved.com = moved.com + [1.5, -0.25]
    np.testing.assert_allclose(geometric_center(moved), [1.5, -0.25], atol=1e-12)


def test_geometric_center_of_c_shape():
    # three links turning left by a right angle at each joint: a square "C"
    p = WorldParams(n_joints=2)
    world = WorldState.from_joint_angles(p, [math.pi / 2, math.pi / 2])
    nodes = world.nodes()
    by_hand = np.mean([(nodes[k] + nodes[k + 1]) / 2 for k in range(3)], axis=0)
    np.testing.assert_allclose(geometric_center(world), by_hand, atol=1e-12)
    # centres sit at L/2 along each side of the open square
    side = [np.linalg.norm(nodes[k + 1] - nodes[k]) for k in range(3)]
    np.testing.assert_allclose(side, 0.1, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(nodes[3] - nodes[0]), 0.1, atol=1e-12)


def test_from_joint_angles_pose():
    p = WorldParams()
    alpha = 0.3 * np.sin(np.arange(16))
    w = WorldState.from_joint_angles(p, alpha, center=(2.0, 1.0), heading=1.1)
    np.testing.assert_allclose(w.joint_angles, alpha, atol=1e-12)
    np.testing.assert_allclose(geometric_center(w), [2.0, 1.0], atol=1e-12)
    assert w.heading() == pytest.approx(1.1, abs=1e-12)
    with pytest.raises(ValueError):
        WorldState.from_joint_angles(p, np.zeros(3))
