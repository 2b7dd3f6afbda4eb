"""Compiled inner loop of the planar chain simulation.

Generalized coordinates are the centre of mass ``c`` and the absolute link
angles ``phi``; link ``l`` runs from node ``l`` to node ``l + 1`` and masses are
lumped at the nodes. Using the centre of mass decouples the translational block
of the mass matrix, so internal joint torques cannot change linear momentum.

Joint PD torques are integrated with the stable-PD correction (implicit in the
joint damping and stiffness); ground friction and peg contacts are explicit.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@njit(cache=True)
def node_positions(c, phi, masses, link_len):
    n_links = phi.shape[0]
    pos = np.zeros((n_links + 1, 2))
    for l in range(n_links):
        pos[l + 1, 0] = pos[l, 0] + link_len * np.cos(phi[l])
        pos[l + 1, 1] = pos[l, 1] + link_len * np.sin(phi[l])
    mtot = masses.sum()
    cx = 0.0
    cy = 0.0
    for n in range(n_links + 1):
        cx += masses[n] * pos[n, 0]
        cy += masses[n] * pos[n, 1]
    cx /= mtot
    cy /= mtot
    for n in range(n_links + 1):
        pos[n, 0] += c[0] - cx
        pos[n, 1] += c[1] - cy
    return pos


@njit(cache=True)
def node_velocities(cdot, phi, phidot, masses, link_len):
    n_links = phi.shape[0]
    vel = np.zeros((n_links + 1, 2))
    for l in range(n_links):
        vel[l + 1, 0] = vel[l, 0] - link_len * np.sin(phi[l]) * phidot[l]
        vel[l + 1, 1] = vel[l, 1] + link_len * np.cos(phi[l]) * phidot[l]
    mtot = masses.sum()
    vx = 0.0
    vy = 0.0
    for n in range(n_links + 1):
        vx += masses[n] * vel[n, 0]
        vy += masses[n] * vel[n, 1]
    vx /= mtot
    vy /= mtot
    for n in range(n_links + 1):
        vel[n, 0] += cdot[0] - vx
        vel[n, 1] += cdot[1] - vy
    return vel


@njit(cache=True)
def _head_generalized(force_on_link, torque_on_link, phi, link_len):
    """Generalized forces on the absolute angles with the head node held fixed.

    ``force_on_link[l]`` is the total force applied on link ``l`` and
    ``torque_on_link[l]`` its moment about node ``l``.
    """
    n_links = phi.shape[0]
    q = np.zeros(n_links)
    fx = 0.0
    fy = 0.0
    for k in range(n_links - 1, -1, -1):
        q[k] = link_len * _cross(np.cos(phi[k]), np.sin(phi[k]), fx, fy) + torque_on_link[k]
        fx += force_on_link[k, 0]
        fy += force_on_link[k, 1]
    return q


@njit(cache=True)
def ground_friction(pos, vel, phi, link_len, c_tan, c_norm, force_on_link, torque_on_link):
    """Anisotropic viscous drag at every node, accumulated onto links."""
    n_links = phi.shape[0]
    for n in range(n_links + 1):
        if n == 0:
            tx = np.cos(phi[0])
            ty = np.sin(phi[0])
            share = 0.5
        elif n == n_links:
            tx = np.cos(phi[n_links - 1])
            ty = np.sin(phi[n_links - 1])
            share = 0.5
        else:
            tx = np.cos(phi[n - 1]) + np.cos(phi[n])
            ty = np.sin(phi[n - 1]) + np.sin(phi[n])
            norm = np.sqrt(tx * tx + ty * ty)
            if norm < 1e-9:
                tx = np.cos(phi[n])
                ty = np.sin(phi[n])
            else:
                tx /= norm
                ty /= norm
            share = 1.0
        nx = -ty
        ny = tx
        vt = vel[n, 0] * tx + vel[n, 1] * ty
        vn = vel[n, 0] * nx + vel[n, 1] * ny
        ct = c_tan * link_len * share
        cn = c_norm * link_len * share
        fx = -(ct * vt * tx + cn * vn * nx)
        fy = -(ct * vt * ty + cn * vn * ny)
        if n == 0:
            force_on_link[0, 0] += fx
            force_on_link[0, 1] += fy
        else:
            l = n - 1
            force_on_link[l, 0] += fx
            force_on_link[l, 1] += fy
            torque_on_link[l] += link_len * _cross(np.cos(phi[l]), np.sin(phi[l]), fx, fy)


@njit(cache=True)
def peg_contacts(pos, vel, phi, link_len, link_radius, pegs, peg_radius, k_n, d_n, mu, v_eps,
                 force_on_link, torque_on_link, contact_out):
    """Penalty contacts between capsule links and circular pegs.

    Writes up to ``contact_out.shape[0]`` rows of
    ``[fx, fy, px, py, peg, link, penetration]`` and returns the number of
    active contacts.
    """
    n_links = phi.shape[0]
    reach = peg_radius + link_radius
    count = 0
    lo_x = pos[:, 0].min() - reach
    hi_x = pos[:, 0].max() + reach
    lo_y = pos[:, 1].min() - reach
    hi_y = pos[:, 1].max() + reach
    for p in range(pegs.shape[0]):
        px = pegs[p, 0]
        py = pegs[p, 1]
        if px < lo_x or px > hi_x or py < lo_y or py > hi_y:
            continue
        for l in range(n_links):
            ax = pos[l, 0]
            ay = pos[l, 1]
            bx = pos[l + 1, 0]
            by = pos[l + 1, 1]
            ex = bx - ax
            ey = by - ay
            lam = ((px - ax) * ex + (py - ay) * ey) / (link_len * link_len)
            if lam < 0.0:
                lam = 0.0
            elif lam > 1.0:
                lam = 1.0
            qx = ax + lam * ex
            qy = ay + lam * ey
            dx = qx - px
            dy = qy - py
            dist = np.sqrt(dx * dx + dy * dy)
            if dist >= reach or dist < 1e-12:
                continue
            nx = dx / dist
            ny = dy / dist
            pen = reach - dist
            vx = (1.0 - lam) * vel[l, 0] + lam * vel[l + 1, 0]
            vy = (1.0 - lam) * vel[l, 1] + lam * vel[l + 1, 1]
            vn = vx * nx + vy * ny
            fn = k_n * pen - d_n * vn
            if fn <= 0.0:
                continue
            tvx = vx - vn * nx
            tvy = vy - vn * ny
            vt = np.sqrt(tvx * tvx + tvy * tvy)
            fx = fn * nx
            fy = fn * ny
            if vt > 1e-12:
                scale = mu * fn * np.tanh(vt / v_eps) / vt
                fx -= scale * tvx
                fy -= scale * tvy
            force_on_link[l, 0] += fx
            force_on_link[l, 1] += fy
            torque_on_link[l] += lam * link_len * _cross(np.cos(phi[l]), np.sin(phi[l]), fx, fy)
            if count < contact_out.shape[0]:
                contact_out[count, 0] = fx
                contact_out[count, 1] = fy
                contact_out[count, 2] = qx
                contact_out[count, 3] = qy
                contact_out[count, 4] = p
                contact_out[count, 5] = l
                contact_out[count, 6] = pen
            count += 1
    return count


@njit(cache=True)
def joint_torques_from_head(q_head):
    """Torque at joint ``i`` (between links ``i`` and ``i+1``) from tail-side forces."""
    n_links = q_head.shape[0]
    tau = np.zeros(n_links - 1)
    acc = 0.0
    for k in range(n_links - 1, 0, -1):
        acc += q_head[k]
        tau[k - 1] = acc
    return tau


@njit(cache=True)
def mass_matrix(phi, masses, link_len):
    n_links = phi.shape[0]
    mtot = masses.sum()
    # tail[j] = total node mass from node j to the tail
    tail = np.zeros(n_links + 2)
    for n in range(n_links, -1, -1):
        tail[n] = tail[n + 1] + masses[n]
    a = np.empty((n_links, n_links))
    l2 = link_len * link_len
    cs = np.cos(phi)
    sn = np.sin(phi)
    for i in range(n_links):
        for j in range(i, n_links):
            coupling = tail[j + 1] - tail[i + 1] * tail[j + 1] / mtot
            a[i, j] = l2 * (cs[i] * cs[j] + sn[i] * sn[j]) * coupling
            a[j, i] = a[i, j]
    return a, tail, mtot


@njit(cache=True)
def solve_spd(a, b):
    """Solve ``a x = b`` for symmetric positive definite ``a`` (Cholesky, in place on ``a``)."""
    n = b.shape[0]
    for j in range(n):
        d = a[j, j]
        for k in range(j):
            d -= a[j, k] * a[j, k]
        d = np.sqrt(d)
        a[j, j] = d
        for i in range(j + 1, n):
            v = a[i, j]
            for k in range(j):
                v -= a[i, k] * a[j, k]
            a[i, j] = v / d
    x = b.copy()
    for i in range(n):
        v = x[i]
        for k in range(i):
            v -= a[i, k] * x[k]
        x[i] = v / a[i, i]
    for i in range(n - 1, -1, -1):
        v = x[i]
        for k in range(i + 1, n):
            v -= a[k, i] * x[k]
        x[i] = v / a[i, i]
    return x


@njit(cache=True)
def integrate(c, cdot, phi, phidot, cmd, cmd_rate, masses, link_len, link_radius, kp, kd, k_stop,
              c_tan, c_norm, pegs, peg_radius, k_n, d_n, mu, v_eps, dt, n_sub,
              tau_ext_mean, contact_out):
    """Advance the chain ``n_sub`` substeps of length ``dt`` in place.

    ``tau_ext_mean`` receives the external joint torques averaged over the
    substeps. Returns ``(kinetic_energy, max_penetration, n_contacts)`` at the
    final substep.
    """
    n_links = phi.shape[0]
    n_joints = n_links - 1
    for i in range(n_joints):
        tau_ext_mean[i] = 0.0
    max_pen = 0.0
    n_contacts = 0
    implicit_gain = dt * (kd + dt * kp)
    for _ in range(n_sub):
        pos = node_positions(c, phi, masses, link_len)
        vel = node_velocities(cdot, phi, phidot, masses, link_len)

        f_ext = np.zeros((n_links, 2))
        t_ext = np.zeros(n_links)
        ground_friction(pos, vel, phi, link_len, c_tan, c_norm, f_ext, t_ext)
        n_contacts = peg_contacts(pos, vel, phi, link_len, link_radius, pegs, peg_radius,
                                  k_n, d_n, mu, v_eps, f_ext, t_ext, contact_out)
        for k in range(min(n_contacts, contact_out.shape[0])):
            if contact_out[k, 6] > max_pen:
                max_pen = contact_out[k, 6]
        q_ext = _head_generalized(f_ext, t_ext, phi, link_len)
        tau_ext = joint_torques_from_head(q_ext)
        for i in range(n_joints):
            tau_ext_mean[i] += tau_ext[i] / n_sub

        # centripetal terms as fictitious node forces m_n * sum_{a<n} L phidot_a^2 u_a
        f_fic = np.zeros((n_links, 2))
        t_fic = np.zeros(n_links)
        ax = 0.0
        ay = 0.0
        for n in range(1, n_links + 1):
            l = n - 1
            ax += link_len * phidot[l] * phidot[l] * np.cos(phi[l])
            ay += link_len * phidot[l] * phidot[l] * np.sin(phi[l])
            hx = masses[n] * ax
            hy = masses[n] * ay
            f_fic[l, 0] += hx
            f_fic[l, 1] += hy
            t_fic[l] += link_len * _cross(np.cos(phi[l]), np.sin(phi[l]), hx, hy)
        q_fic = _head_generalized(f_fic, t_fic, phi, link_len)

        a, tail, mtot = mass_matrix(phi, masses, link_len)
        fx_all = 0.0
        fy_all = 0.0
        fx_ext = 0.0
        fy_ext = 0.0
        for l in range(n_links):
            fx_ext += f_ext[l, 0]
            fy_ext += f_ext[l, 1]
            fx_all += f_ext[l, 0] + f_fic[l, 0]
            fy_all += f_ext[l, 1] + f_fic[l, 1]
        q = np.empty(n_links)
        for k in range(n_links):
            gbar = link_len * tail[k + 1] / mtot
            # gbar_k * (-sin, cos) dotted with the total force
            q[k] = q_ext[k] + q_fic[k] - gbar * (-np.sin(phi[k]) * fx_all + np.cos(phi[k]) * fy_all)

        for i in range(n_joints):
            alpha = phi[i + 1] - phi[i]
            alpha_dot = phidot[i + 1] - phidot[i]
            tau = kp * (cmd[i] - alpha - dt * alpha_dot) + kd * (cmd_rate[i] - alpha_dot)
            if alpha > np.pi:
                tau -= k_stop * (alpha - np.pi)
            elif alpha < -np.pi:
                tau -= k_stop * (alpha + np.pi)
            q[i + 1] += tau
            q[i] -= tau
            a[i, i] += implicit_gain
            a[i + 1, i + 1] += implicit_gain
            a[i, i + 1] -= implicit_gain
            a[i + 1, i] -= implicit_gain

        phiddot = solve_spd(a, q)
        cdot[0] += dt * fx_ext / mtot
        cdot[1] += dt * fy_ext / mtot
        for k in range(n_links):
            phidot[k] += dt * phiddot[k]
        c[0] += dt * cdot[0]
        c[1] += dt * cdot[1]
        for k in range(n_links):
            phi[k] += dt * phidot[k]

    vel = node_velocities(cdot, phi, phidot, masses, link_len)
    ke = 0.0
    for n in range(n_links + 1):
        ke += 0.5 * masses[n] * (vel[n, 0] ** 2 + vel[n, 1] ** 2)
    return ke, max_pen, n_contacts
