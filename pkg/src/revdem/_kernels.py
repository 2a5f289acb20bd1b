"""Compiled inner loops of the engine step.

Everything here operates on flat packed arrays (see engine.pack_shapes) and
runs single-threaded in a fixed order, so replays are bit-identical.  The
math mirrors the reference implementations in contact.py and forces.py;
the agreement is enforced by tests.
"""

from __future__ import annotations

import numpy as np
from numba import njit

F8 = np.float64
NO_CONTACT = 1e300

KT_RATIO = 2.0 / 7.0
GT_RATIO = 0.5
E_FLOOR = 1e-6
# wall slave codes count down from the top of the 20-bit slave field so the
# history keys stay valid when particles are added to a running engine
WALL_CODE0 = (1 << 20) - 1


@njit(cache=True)
def _bsearch(keys, n, key):
    lo, hi = 0, n
    while lo < hi:
        mid = (lo + hi) // 2
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    if lo < n and keys[lo] == key:
        return lo
    return -1


@njit(cache=True)
def _sdf_sample(sid, x, z,
                sdf_ox, sdf_oz, sdf_ex1, sdf_ez1, fine_size, fine_nx, fine_nz,
                fine_off, fine_flat, leaf_off, leaf_x0, leaf_z0, leaf_sz,
                leaf_phi, leaf_dx, leaf_dz):
    """Bilinear SDF sample; returns (phi, dx, dz), phi=NO_CONTACT outside."""
    if x < sdf_ox[sid] or x > sdf_ex1[sid] or z < sdf_oz[sid] or z > sdf_ez1[sid]:
        return NO_CONTACT, 0.0, 0.0
    fs = fine_size[sid]
    xi = (x - sdf_ox[sid]) / fs
    zi = (z - sdf_oz[sid]) / fs
    fi = int(np.floor(xi))
    fj = int(np.floor(zi))
    if xi == fi and fi > 0:
        fi -= 1
    if zi == fj and fj > 0:
        fj -= 1
    nx = fine_nx[sid]
    nz = fine_nz[sid]
    if fi < 0:
        fi = 0
    elif fi > nx - 1:
        fi = nx - 1
    if fj < 0:
        fj = 0
    elif fj > nz - 1:
        fj = nz - 1
    leaf = leaf_off[sid] + fine_flat[fine_off[sid] + fi * nz + fj]
    size = leaf_sz[leaf]
    u = (x - leaf_x0[leaf]) / size
    v = (z - leaf_z0[leaf]) / size
    if u < 0.0:
        u = 0.0
    elif u > 1.0:
        u = 1.0
    if v < 0.0:
        v = 0.0
    elif v > 1.0:
        v = 1.0
    a0 = (1.0 - u) * leaf_phi[leaf, 0] + u * leaf_phi[leaf, 1]
    a1 = (1.0 - u) * leaf_phi[leaf, 3] + u * leaf_phi[leaf, 2]
    phi = (1.0 - v) * a0 + v * a1
    b0 = (1.0 - u) * leaf_dx[leaf, 0] + u * leaf_dx[leaf, 1]
    b1 = (1.0 - u) * leaf_dx[leaf, 3] + u * leaf_dx[leaf, 2]
    dx = (1.0 - v) * b0 + v * b1
    c0 = (1.0 - u) * leaf_dz[leaf, 0] + u * leaf_dz[leaf, 1]
    c1 = (1.0 - u) * leaf_dz[leaf, 3] + u * leaf_dz[leaf, 2]
    dz = (1.0 - v) * c0 + v * c1
    return phi, dx, dz


@njit(cache=True)
def _nearest_arc(sid, x, z, seg_off, seg_ax, seg_az, seg_dx, seg_dz,
                 seg_len, seg_arc):
    best = 1e300
    s_best = 0.0
    for k in range(seg_off[sid], seg_off[sid + 1]):
        dx = seg_dx[k]
        dz = seg_dz[k]
        l2 = dx * dx + dz * dz
        t = ((x - seg_ax[k]) * dx + (z - seg_az[k]) * dz) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        fx = seg_ax[k] + t * dx
        fz = seg_az[k] + t * dz
        d2 = (x - fx) * (x - fx) + (z - fz) * (z - fz)
        if d2 < best:
            best = d2
            s_best = seg_arc[k] + t * seg_len[k]
    return s_best


@njit(cache=True)
def _curv_at(sid, s, curv_off, curv_s, curv_h, curv_tot, curv_sym):
    tot = curv_tot[sid]
    if s < 0.0:
        s = 0.0
    elif s > tot:
        s = tot
    if curv_sym[sid]:
        half = 0.5 * tot
        s = half - abs(half - s)
    lo = curv_off[sid]
    hi = curv_off[sid + 1]
    if s <= curv_s[lo]:
        return curv_h[lo]
    if s >= curv_s[hi - 1]:
        return curv_h[hi - 1]
    a, b = lo, hi - 1
    while a + 1 < b:
        mid = (a + b) // 2
        if curv_s[mid] <= s:
            a = mid
        else:
            b = mid
    t = (s - curv_s[a]) / (curv_s[b] - curv_s[a])
    return curv_h[a] + t * (curv_h[b] - curv_h[a])


@njit(cache=True)
def _mean_curv_world(p, ax, ay, az, rot, pos,
                     seg_off, seg_ax, seg_az, seg_dx, seg_dz, seg_len, seg_arc,
                     curv_off, curv_s, curv_h, curv_tot, curv_sym, sid):
    """Mean curvature of particle p's surface at world point (ax, ay, az)."""
    rx = ax - pos[p, 0]
    ry = ay - pos[p, 1]
    rz = az - pos[p, 2]
    bx = rot[p, 0, 0] * rx + rot[p, 1, 0] * ry + rot[p, 2, 0] * rz
    by = rot[p, 0, 1] * rx + rot[p, 1, 1] * ry + rot[p, 2, 1] * rz
    bz = rot[p, 0, 2] * rx + rot[p, 1, 2] * ry + rot[p, 2, 2] * rz
    xm = np.sqrt(bx * bx + by * by)
    s = _nearest_arc(sid, xm, bz, seg_off, seg_ax, seg_az, seg_dx, seg_dz,
                     seg_len, seg_arc)
    return _curv_at(sid, s, curv_off, curv_s, curv_h, curv_tot, curv_sym)


@njit(cache=True)
def _inv_contact_mass(i, mass, inertia, rot, rx, ry, rz, nx, ny, nz):
    """Inverse effective mass of particle i along a contact normal.

    Includes the rotational term (r x n)^T I^-1 (r x n): the damping is
    calibrated to reproduce the restitution of the contact-point velocity,
    which oscillates with this mass, not the translational one.
    """
    tx = ry * nz - rz * ny
    ty = rz * nx - rx * nz
    tz = rx * ny - ry * nx
    bx = rot[i, 0, 0] * tx + rot[i, 1, 0] * ty + rot[i, 2, 0] * tz
    by = rot[i, 0, 1] * tx + rot[i, 1, 1] * ty + rot[i, 2, 1] * tz
    bz = rot[i, 0, 2] * tx + rot[i, 1, 2] * ty + rot[i, 2, 2] * tz
    return (1.0 / mass[i] + bx * bx / inertia[i, 0] + by * by / inertia[i, 1]
            + bz * bz / inertia[i, 2])


@njit(cache=True)
def _hm_force(dnx, dny, dnz, vx, vy, vz, htx, hty, htz,
              yeff, meff, beta, mu, rstar, dt):
    """Hertz-Mindlin force of one record.

    Returns (fx, fy, fz, new_dtx, new_dty, new_dtz, fn, ft, fn_elastic, kn).
    """
    delta = np.sqrt(dnx * dnx + dny * dny + dnz * dnz)
    nx = dnx / delta
    ny = dny / delta
    nz = dnz / delta
    kn = (4.0 / 3.0) * yeff * np.sqrt(rstar * delta)
    gn = np.sqrt(5.0) * abs(beta) * np.sqrt(meff * kn)

    vn_s = vx * nx + vy * ny + vz * nz
    vnx = vn_s * nx
    vny = vn_s * ny
    vnz = vn_s * nz
    vtx = vx - vnx
    vty = vy - vny
    vtz = vz - vnz

    fnx = kn * dnx - gn * vnx
    fny = kn * dny - gn * vny
    fnz = kn * dnz - gn * vnz
    fn = fnx * nx + fny * ny + fnz * nz

    # accumulate slip, project to the tangent plane, preserve magnitude
    dx = htx + vtx * dt
    dy = hty + vty * dt
    dz = htz + vtz * dt
    mag = np.sqrt(dx * dx + dy * dy + dz * dz)
    dot = dx * nx + dy * ny + dz * nz
    px = dx - dot * nx
    py = dy - dot * ny
    pz = dz - dot * nz
    pmag = np.sqrt(px * px + py * py + pz * pz)
    if pmag < 1e-300:
        px = 0.0
        py = 0.0
        pz = 0.0
    else:
        scale = mag / pmag
        px *= scale
        py *= scale
        pz *= scale

    kt = KT_RATIO * kn
    gt = GT_RATIO * gn
    ftx = -kt * px - gt * vtx
    fty = -kt * py - gt * vty
    ftz = -kt * pz - gt * vtz
    ft = np.sqrt(ftx * ftx + fty * fty + ftz * ftz)
    limit = mu * abs(fn)
    if ft > limit:
        if ft > 0.0 and limit > 0.0:
            s = limit / ft
            ftx *= s
            fty *= s
            ftz *= s
            px = -ftx / kt
            py = -fty / kt
            pz = -ftz / kt
            ft = limit
        else:
            ftx = 0.0
            fty = 0.0
            ftz = 0.0
            px = 0.0
            py = 0.0
            pz = 0.0
            ft = 0.0
    return (fnx + ftx, fny + fty, fnz + ftz, px, py, pz, fn, ft, kn * delta, kn)


@njit(cache=True)
def compute_forces(
        # particle state
        pos, vel, omega, rot, mass, inertia, fixed, shape_id,
        # per-particle material
        young, shear, poisson, e_pp, e_pw, mu_pp, mu_pw,
        # shape tables
        node_pts, node_off, bound_r, rect_xmax, rect_zmin, rect_zmax,
        rect_circ, convex, req, rstar_max,
        sdf_ox, sdf_oz, sdf_ex1, sdf_ez1, fine_size, fine_nx, fine_nz,
        fine_off, fine_flat, leaf_off, leaf_x0, leaf_z0, leaf_sz,
        leaf_phi, leaf_dx, leaf_dz,
        seg_off, seg_ax, seg_az, seg_dx, seg_dz, seg_len, seg_arc,
        curv_off, curv_s, curv_h, curv_tot, curv_sym,
        # walls
        wall_kind, wall_p, wall_n, wall_r, wall_omega, wall_axis,
        # pairs and history
        pairs, prev_key, prev_dt, prev_age,
        # parameters
        dt, curv_model, convex_mode,
        # probe
        probe_m, probe_s, probe_out,
        # outputs
        force, torque, new_key, new_dt, new_age,
        # scratch (max node count over shapes)
        c_node, c_phi, c_dn, c_pt, nodes_cache, cache_valid):
    """One force evaluation over all candidate pairs and walls.

    Returns (n_new_history, n_contacts, overflow).  History entries are
    appended per pair in ascending node order; the caller re-sorts the full
    array by key before the next step.
    """
    n = pos.shape[0]
    n_walls = wall_kind.shape[0]
    cap = new_key.shape[0]
    n_new = 0
    n_contacts = 0
    overflow = 0

    for i in range(n):
        force[i, 0] = 0.0
        force[i, 1] = 0.0
        force[i, 2] = 0.0
        torque[i, 0] = 0.0
        torque[i, 1] = 0.0
        torque[i, 2] = 0.0
        cache_valid[i] = 0

    # mark particles whose world nodes are needed this step
    for p in range(pairs.shape[0]):
        cache_valid[pairs[p, 0]] = 1
    if n_walls > 0:
        for i in range(n):
            sid = shape_id[i]
            br = bound_r[sid]
            for w in range(n_walls):
                kind = wall_kind[w]
                if kind == 0:
                    gap = ((pos[i, 0] - wall_p[w, 0]) * wall_n[w, 0]
                           + (pos[i, 1] - wall_p[w, 1]) * wall_n[w, 1]
                           + (pos[i, 2] - wall_p[w, 2]) * wall_n[w, 2])
                else:
                    rx = pos[i, 0] - wall_p[w, 0]
                    ry = pos[i, 1] - wall_p[w, 1]
                    rz = pos[i, 2] - wall_p[w, 2]
                    ax = rx * wall_n[w, 0] + ry * wall_n[w, 1] + rz * wall_n[w, 2]
                    qx = rx - ax * wall_n[w, 0]
                    qy = ry - ax * wall_n[w, 1]
                    qz = rz - ax * wall_n[w, 2]
                    rho = np.sqrt(qx * qx + qy * qy + qz * qz)
                    gap = wall_r[w] - rho if kind == 1 else rho - wall_r[w]
                if gap <= br:
                    cache_valid[i] = 1

    for i in range(n):
        if cache_valid[i] == 1:
            sid = shape_id[i]
            for k in range(node_off[sid], node_off[sid + 1]):
                kk = k - node_off[sid]
                bx = node_pts[k, 0]
                by = node_pts[k, 1]
                bz = node_pts[k, 2]
                nodes_cache[i, kk, 0] = (rot[i, 0, 0] * bx + rot[i, 0, 1] * by
                                         + rot[i, 0, 2] * bz + pos[i, 0])
                nodes_cache[i, kk, 1] = (rot[i, 1, 0] * bx + rot[i, 1, 1] * by
                                         + rot[i, 1, 2] * bz + pos[i, 1])
                nodes_cache[i, kk, 2] = (rot[i, 2, 0] * bx + rot[i, 2, 1] * by
                                         + rot[i, 2, 2] * bz + pos[i, 2])

    # ---- particle-particle pairs (master = lower index) -------------------
    for p in range(pairs.shape[0]):
        m = pairs[p, 0]
        s = pairs[p, 1]
        sid_m = shape_id[m]
        sid_s = shape_id[s]
        circ2 = rect_circ[sid_s] * rect_circ[sid_s]
        xmax = rect_xmax[sid_s]
        zmin = rect_zmin[sid_s]
        zmax = rect_zmax[sid_s]
        n_rec = 0

        for k in range(node_off[sid_m], node_off[sid_m + 1]):
            kk = k - node_off[sid_m]
            wx = nodes_cache[m, kk, 0]
            wy = nodes_cache[m, kk, 1]
            wz = nodes_cache[m, kk, 2]
            rx = wx - pos[s, 0]
            ry = wy - pos[s, 1]
            rz = wz - pos[s, 2]
            if rx * rx + ry * ry + rz * rz > circ2:
                continue
            bx = rot[s, 0, 0] * rx + rot[s, 1, 0] * ry + rot[s, 2, 0] * rz
            by = rot[s, 0, 1] * rx + rot[s, 1, 1] * ry + rot[s, 2, 1] * rz
            bz = rot[s, 0, 2] * rx + rot[s, 1, 2] * ry + rot[s, 2, 2] * rz
            xm = np.sqrt(bx * bx + by * by)
            if xm > xmax or bz < zmin or bz > zmax:
                continue
            phi, dvx, dvz = _sdf_sample(
                sid_s, xm, bz, sdf_ox, sdf_oz, sdf_ex1, sdf_ez1, fine_size,
                fine_nx, fine_nz, fine_off, fine_flat, leaf_off, leaf_x0,
                leaf_z0, leaf_sz, leaf_phi, leaf_dx, leaf_dz)
            if phi >= 0.0 or phi == NO_CONTACT:
                continue
            if xm > 1e-300:
                ux = bx / xm
                uy = by / xm
            else:
                ux = 1.0
                uy = 0.0
            dbx = dvx * ux
            dby = dvx * uy
            dbz = dvz
            c_node[n_rec] = kk
            c_phi[n_rec] = phi
            c_dn[n_rec, 0] = rot[s, 0, 0] * dbx + rot[s, 0, 1] * dby + rot[s, 0, 2] * dbz
            c_dn[n_rec, 1] = rot[s, 1, 0] * dbx + rot[s, 1, 1] * dby + rot[s, 1, 2] * dbz
            c_dn[n_rec, 2] = rot[s, 2, 0] * dbx + rot[s, 2, 1] * dby + rot[s, 2, 2] * dbz
            c_pt[n_rec, 0] = wx
            c_pt[n_rec, 1] = wy
            c_pt[n_rec, 2] = wz
            n_rec += 1
        if n_rec == 0:
            continue
        n_contacts += n_rec

        use_deepest = convex[sid_m] == 1 and convex[sid_s] == 1
        if convex_mode == 0:
            use_deepest = False
        elif convex_mode == 1:
            use_deepest = True

        # pair coefficients
        e = np.sqrt(e_pp[m] * e_pp[s])
        if e < E_FLOOR:
            e = E_FLOOR
        ln_e = np.log(e)
        beta = ln_e / np.sqrt(np.pi * np.pi + ln_e * ln_e)
        mu = np.sqrt(mu_pp[m] * mu_pp[s])
        yeff = 1.0 / ((1.0 - poisson[m] * poisson[m]) / young[m]
                      + (1.0 - poisson[s] * poisson[s]) / young[s])
        r_cap = min(rstar_max[sid_m], rstar_max[sid_s])

        lo = 0
        hi = n_rec
        if use_deepest:
            deep = 0
            for r in range(1, n_rec):
                if c_phi[r] < c_phi[deep]:
                    deep = r
            sx = 0.0
            sy = 0.0
            sz = 0.0
            wx = 0.0
            wy = 0.0
            wz = 0.0
            wsum = 0.0
            for r in range(n_rec):
                sx += c_dn[r, 0]
                sy += c_dn[r, 1]
                sz += c_dn[r, 2]
                wgt = (c_phi[r] * c_phi[r]) ** 2
                wx += wgt * c_pt[r, 0]
                wy += wgt * c_pt[r, 1]
                wz += wgt * c_pt[r, 2]
                wsum += wgt
            nrm = np.sqrt(sx * sx + sy * sy + sz * sz)
            if nrm <= 0.0:
                dd = np.sqrt(c_dn[deep, 0] ** 2 + c_dn[deep, 1] ** 2 + c_dn[deep, 2] ** 2)
                sx = c_dn[deep, 0] / dd
                sy = c_dn[deep, 1] / dd
                sz = c_dn[deep, 2] / dd
            else:
                sx /= nrm
                sy /= nrm
                sz /= nrm
            depth = -c_phi[deep]
            c_dn[deep, 0] = depth * sx
            c_dn[deep, 1] = depth * sy
            c_dn[deep, 2] = depth * sz
            # overlap-weighted contact point: averages away the node
            # quantization of the single deepest node
            c_pt[deep, 0] = wx / wsum
            c_pt[deep, 1] = wy / wsum
            c_pt[deep, 2] = wz / wsum
            lo = deep
            hi = deep + 1

        for r in range(lo, hi):
            ax = c_pt[r, 0]
            ay = c_pt[r, 1]
            az = c_pt[r, 2]
            # relative surface velocity, master vs slave
            rmx = ax - pos[m, 0]
            rmy = ay - pos[m, 1]
            rmz = az - pos[m, 2]
            rsx = ax - pos[s, 0]
            rsy = ay - pos[s, 1]
            rsz = az - pos[s, 2]
            vx = (vel[m, 0] + omega[m, 1] * rmz - omega[m, 2] * rmy
                  - vel[s, 0] - (omega[s, 1] * rsz - omega[s, 2] * rsy))
            vy = (vel[m, 1] + omega[m, 2] * rmx - omega[m, 0] * rmz
                  - vel[s, 1] - (omega[s, 2] * rsx - omega[s, 0] * rsz))
            vz = (vel[m, 2] + omega[m, 0] * rmy - omega[m, 1] * rmx
                  - vel[s, 2] - (omega[s, 0] * rsy - omega[s, 1] * rsx))

            if curv_model == 1:
                rstar = 1.0 / (1.0 / req[sid_m] + 1.0 / req[sid_s])
            else:
                h_m = _mean_curv_world(m, ax, ay, az, rot, pos, seg_off, seg_ax,
                                       seg_az, seg_dx, seg_dz, seg_len, seg_arc,
                                       curv_off, curv_s, curv_h, curv_tot,
                                       curv_sym, sid_m)
                h_s = _mean_curv_world(s, ax, ay, az, rot, pos, seg_off, seg_ax,
                                       seg_az, seg_dx, seg_dz, seg_len, seg_arc,
                                       curv_off, curv_s, curv_h, curv_tot,
                                       curv_sym, sid_s)
                hsum = h_m + h_s
                rstar = r_cap if hsum <= 0.0 else min(1.0 / hsum, r_cap)

            dd = np.sqrt(c_dn[r, 0] ** 2 + c_dn[r, 1] ** 2 + c_dn[r, 2] ** 2)
            nhx = c_dn[r, 0] / dd
            nhy = c_dn[r, 1] / dd
            nhz = c_dn[r, 2] / dd
            inv_m = 0.0
            if fixed[m] == 0:
                inv_m += _inv_contact_mass(m, mass, inertia, rot,
                                           rmx, rmy, rmz, nhx, nhy, nhz)
            if fixed[s] == 0:
                inv_m += _inv_contact_mass(s, mass, inertia, rot,
                                           rsx, rsy, rsz, nhx, nhy, nhz)
            meff = mass[m] if inv_m <= 0.0 else 1.0 / inv_m

            key = (np.int64(m) << 44) | (np.int64(s) << 24) | np.int64(c_node[r])
            hidx = _bsearch(prev_key, prev_key.shape[0], key)
            if hidx >= 0:
                htx = prev_dt[hidx, 0]
                hty = prev_dt[hidx, 1]
                htz = prev_dt[hidx, 2]
                age = prev_age[hidx] + 1
            else:
                htx = 0.0
                hty = 0.0
                htz = 0.0
                age = 1
            fx, fy, fz, ntx, nty, ntz, fn, ft, fnel, kn = _hm_force(
                c_dn[r, 0], c_dn[r, 1], c_dn[r, 2], vx, vy, vz,
                htx, hty, htz, yeff, meff, beta, mu, rstar, dt)

            force[m, 0] += fx
            force[m, 1] += fy
            force[m, 2] += fz
            force[s, 0] -= fx
            force[s, 1] -= fy
            force[s, 2] -= fz
            torque[m, 0] += rmy * fz - rmz * fy
            torque[m, 1] += rmz * fx - rmx * fz
            torque[m, 2] += rmx * fy - rmy * fx
            torque[s, 0] -= rsy * fz - rsz * fy
            torque[s, 1] -= rsz * fx - rsx * fz
            torque[s, 2] -= rsx * fy - rsy * fx

            if m == probe_m and s == probe_s:
                d_now = np.sqrt(c_dn[r, 0] ** 2 + c_dn[r, 1] ** 2 + c_dn[r, 2] ** 2)
                if d_now > probe_out[0]:
                    probe_out[0] = d_now
                    probe_out[1] = fn
                    probe_out[2] = ft
                    probe_out[3] = fnel
                    probe_out[4] = n_rec
                    probe_out[5] = kn
                    probe_out[6] = rstar
                    probe_out[7] = 1.0

            if use_deepest:
                # carry untouched histories of the other contact nodes
                for r2 in range(n_rec):
                    key2 = (np.int64(m) << 44) | (np.int64(s) << 24) | np.int64(c_node[r2])
                    if r2 == r:
                        if n_new < cap:
                            new_key[n_new] = key2
                            new_dt[n_new, 0] = ntx
                            new_dt[n_new, 1] = nty
                            new_dt[n_new, 2] = ntz
                            new_age[n_new] = age
                            n_new += 1
                        else:
                            overflow = 1
                    else:
                        h2 = _bsearch(prev_key, prev_key.shape[0], key2)
                        if h2 >= 0:
                            if n_new < cap:
                                new_key[n_new] = key2
                                new_dt[n_new, 0] = prev_dt[h2, 0]
                                new_dt[n_new, 1] = prev_dt[h2, 1]
                                new_dt[n_new, 2] = prev_dt[h2, 2]
                                new_age[n_new] = prev_age[h2] + 1
                                n_new += 1
                            else:
                                overflow = 1
            else:
                if n_new < cap:
                    new_key[n_new] = key
                    new_dt[n_new, 0] = ntx
                    new_dt[n_new, 1] = nty
                    new_dt[n_new, 2] = ntz
                    new_age[n_new] = age
                    n_new += 1
                else:
                    overflow = 1

    # ---- particle-wall contacts (particle is always the master) -----------
    for i in range(n):
        if cache_valid[i] == 0:
            continue
        sid = shape_id[i]
        br = bound_r[sid]
        for w in range(n_walls):
            kind = wall_kind[w]
            # center-level cull
            if kind == 0:
                gap_c = ((pos[i, 0] - wall_p[w, 0]) * wall_n[w, 0]
                         + (pos[i, 1] - wall_p[w, 1]) * wall_n[w, 1]
                         + (pos[i, 2] - wall_p[w, 2]) * wall_n[w, 2])
            else:
                rx = pos[i, 0] - wall_p[w, 0]
                ry = pos[i, 1] - wall_p[w, 1]
                rz = pos[i, 2] - wall_p[w, 2]
                axp = rx * wall_n[w, 0] + ry * wall_n[w, 1] + rz * wall_n[w, 2]
                qx = rx - axp * wall_n[w, 0]
                qy = ry - axp * wall_n[w, 1]
                qz = rz - axp * wall_n[w, 2]
                rho_c = np.sqrt(qx * qx + qy * qy + qz * qz)
                gap_c = wall_r[w] - rho_c if kind == 1 else rho_c - wall_r[w]
            if gap_c > br:
                continue

            n_rec = 0
            for k in range(node_off[sid], node_off[sid + 1]):
                kk = k - node_off[sid]
                wx = nodes_cache[i, kk, 0]
                wy = nodes_cache[i, kk, 1]
                wz = nodes_cache[i, kk, 2]
                if kind == 0:
                    sgn = ((wx - wall_p[w, 0]) * wall_n[w, 0]
                           + (wy - wall_p[w, 1]) * wall_n[w, 1]
                           + (wz - wall_p[w, 2]) * wall_n[w, 2])
                    nxw = wall_n[w, 0]
                    nyw = wall_n[w, 1]
                    nzw = wall_n[w, 2]
                else:
                    rx = wx - wall_p[w, 0]
                    ry = wy - wall_p[w, 1]
                    rz = wz - wall_p[w, 2]
                    axp = rx * wall_n[w, 0] + ry * wall_n[w, 1] + rz * wall_n[w, 2]
                    qx = rx - axp * wall_n[w, 0]
                    qy = ry - axp * wall_n[w, 1]
                    qz = rz - axp * wall_n[w, 2]
                    rho = np.sqrt(qx * qx + qy * qy + qz * qz)
                    if rho < 1e-300:
                        continue
                    if kind == 1:
                        sgn = wall_r[w] - rho
                        nxw = -qx / rho
                        nyw = -qy / rho
                        nzw = -qz / rho
                    else:
                        sgn = rho - wall_r[w]
                        nxw = qx / rho
                        nyw = qy / rho
                        nzw = qz / rho
                if sgn >= 0.0:
                    continue
                c_node[n_rec] = kk
                c_phi[n_rec] = sgn
                c_dn[n_rec, 0] = -sgn * nxw
                c_dn[n_rec, 1] = -sgn * nyw
                c_dn[n_rec, 2] = -sgn * nzw
                c_pt[n_rec, 0] = wx
                c_pt[n_rec, 1] = wy
                c_pt[n_rec, 2] = wz
                n_rec += 1
            if n_rec == 0:
                continue
            n_contacts += n_rec

            use_deepest = convex[sid] == 1
            if convex_mode == 0:
                use_deepest = False
            elif convex_mode == 1:
                use_deepest = True

            e = e_pw[i]
            if e < E_FLOOR:
                e = E_FLOOR
            ln_e = np.log(e)
            beta = ln_e / np.sqrt(np.pi * np.pi + ln_e * ln_e)
            mu = mu_pw[i]
            yeff = 1.0 / (2.0 * (1.0 - poisson[i] * poisson[i]) / young[i])
            r_cap = rstar_max[sid]
            if kind == 0:
                h_w = 0.0
            elif kind == 1:
                h_w = -0.5 / wall_r[w]
            else:
                h_w = 0.5 / wall_r[w]

            if use_deepest:
                deep = 0
                for r in range(1, n_rec):
                    if c_phi[r] < c_phi[deep]:
                        deep = r
                sx = 0.0
                sy = 0.0
                sz = 0.0
                wx = 0.0
                wy = 0.0
                wz = 0.0
                wsum = 0.0
                for r in range(n_rec):
                    sx += c_dn[r, 0]
                    sy += c_dn[r, 1]
                    sz += c_dn[r, 2]
                    wgt = (c_phi[r] * c_phi[r]) ** 2
                    wx += wgt * c_pt[r, 0]
                    wy += wgt * c_pt[r, 1]
                    wz += wgt * c_pt[r, 2]
                    wsum += wgt
                nrm = np.sqrt(sx * sx + sy * sy + sz * sz)
                if nrm <= 0.0:
                    dd = np.sqrt(c_dn[deep, 0] ** 2 + c_dn[deep, 1] ** 2
                                 + c_dn[deep, 2] ** 2)
                    sx = c_dn[deep, 0] / dd
                    sy = c_dn[deep, 1] / dd
                    sz = c_dn[deep, 2] / dd
                else:
                    sx /= nrm
                    sy /= nrm
                    sz /= nrm
                depth = -c_phi[deep]
                c_dn[deep, 0] = depth * sx
                c_dn[deep, 1] = depth * sy
                c_dn[deep, 2] = depth * sz
                c_pt[deep, 0] = wx / wsum
                c_pt[deep, 1] = wy / wsum
                c_pt[deep, 2] = wz / wsum
                lo = deep
                hi = deep + 1
            else:
                lo = 0
                hi = n_rec

            for r in range(lo, hi):
                ax = c_pt[r, 0]
                ay = c_pt[r, 1]
                az = c_pt[r, 2]
                rmx = ax - pos[i, 0]
                rmy = ay - pos[i, 1]
                rmz = az - pos[i, 2]
                # wall surface velocity from its rigid rotation
                wvx = wall_omega[w, 1] * (az - wall_axis[w, 2]) - wall_omega[w, 2] * (ay - wall_axis[w, 1])
                wvy = wall_omega[w, 2] * (ax - wall_axis[w, 0]) - wall_omega[w, 0] * (az - wall_axis[w, 2])
                wvz = wall_omega[w, 0] * (ay - wall_axis[w, 1]) - wall_omega[w, 1] * (ax - wall_axis[w, 0])
                vx = vel[i, 0] + omega[i, 1] * rmz - omega[i, 2] * rmy - wvx
                vy = vel[i, 1] + omega[i, 2] * rmx - omega[i, 0] * rmz - wvy
                vz = vel[i, 2] + omega[i, 0] * rmy - omega[i, 1] * rmx - wvz

                if curv_model == 1:
                    h_i = 1.0 / req[sid]
                else:
                    h_i = _mean_curv_world(i, ax, ay, az, rot, pos, seg_off,
                                           seg_ax, seg_az, seg_dx, seg_dz,
                                           seg_len, seg_arc, curv_off, curv_s,
                                           curv_h, curv_tot, curv_sym, sid)
                hsum = h_i + h_w
                rstar = r_cap if hsum <= 0.0 else min(1.0 / hsum, r_cap)

                dd = np.sqrt(c_dn[r, 0] ** 2 + c_dn[r, 1] ** 2 + c_dn[r, 2] ** 2)
                nhx = c_dn[r, 0] / dd
                nhy = c_dn[r, 1] / dd
                nhz = c_dn[r, 2] / dd
                if fixed[i] == 0:
                    inv_m = _inv_contact_mass(i, mass, inertia, rot,
                                              rmx, rmy, rmz, nhx, nhy, nhz)
                    meff = 1.0 / inv_m
                else:
                    meff = mass[i]

                slave_code = np.int64(WALL_CODE0 - w)
                key = (np.int64(i) << 44) | (slave_code << 24) | np.int64(c_node[r])
                hidx = _bsearch(prev_key, prev_key.shape[0], key)
                if hidx >= 0:
                    htx = prev_dt[hidx, 0]
                    hty = prev_dt[hidx, 1]
                    htz = prev_dt[hidx, 2]
                    age = prev_age[hidx] + 1
                else:
                    htx = 0.0
                    hty = 0.0
                    htz = 0.0
                    age = 1
                fx, fy, fz, ntx, nty, ntz, fn, ft, fnel, kn = _hm_force(
                    c_dn[r, 0], c_dn[r, 1], c_dn[r, 2], vx, vy, vz,
                    htx, hty, htz, yeff, meff, beta, mu, rstar, dt)

                force[i, 0] += fx
                force[i, 1] += fy
                force[i, 2] += fz
                torque[i, 0] += rmy * fz - rmz * fy
                torque[i, 1] += rmz * fx - rmx * fz
                torque[i, 2] += rmx * fy - rmy * fx

                if i == probe_m and probe_s == WALL_CODE0 - w:
                    d_now = np.sqrt(c_dn[r, 0] ** 2 + c_dn[r, 1] ** 2 + c_dn[r, 2] ** 2)
                    if d_now > probe_out[0]:
                        probe_out[0] = d_now
                        probe_out[1] = fn
                        probe_out[2] = ft
                        probe_out[3] = fnel
                        probe_out[4] = n_rec
                        probe_out[5] = kn
                        probe_out[6] = rstar
                        probe_out[7] = 1.0

                if use_deepest:
                    for r2 in range(n_rec):
                        key2 = (np.int64(i) << 44) | (slave_code << 24) | np.int64(c_node[r2])
                        if r2 == r:
                            if n_new < cap:
                                new_key[n_new] = key2
                                new_dt[n_new, 0] = ntx
                                new_dt[n_new, 1] = nty
                                new_dt[n_new, 2] = ntz
                                new_age[n_new] = age
                                n_new += 1
                            else:
                                overflow = 1
                        else:
                            h2 = _bsearch(prev_key, prev_key.shape[0], key2)
                            if h2 >= 0:
                                if n_new < cap:
                                    new_key[n_new] = key2
                                    new_dt[n_new, 0] = prev_dt[h2, 0]
                                    new_dt[n_new, 1] = prev_dt[h2, 1]
                                    new_dt[n_new, 2] = prev_dt[h2, 2]
                                    new_age[n_new] = prev_age[h2] + 1
                                    n_new += 1
                                else:
                                    overflow = 1
                else:
                    if n_new < cap:
                        new_key[n_new] = key
                        new_dt[n_new, 0] = ntx
                        new_dt[n_new, 1] = nty
                        new_dt[n_new, 2] = ntz
                        new_age[n_new] = age
                        n_new += 1
                    else:
                        overflow = 1

    return n_new, n_contacts, overflow
