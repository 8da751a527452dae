"""Compiled batch evaluation of the navigation potential.

Mirrors the numpy implementation in :mod:`se3nav.navigation`
(``_potential_batch``); an equivalence test keeps both in lockstep.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, fastmath=False)
def potential_kernel(
    R,            # (B, s, 3, 3)
    q,            # (B, s, 3)
    agent,        # int
    neighbors,    # (s-1,) int
    member_indptr,  # CSR over sphere nodes -> neighbor slots
    member_idx,
    fov_slots,    # (n_fov,) int
    group_indptr,  # per-level groups over all nodes (spheres then fov)
    group_nodes,
    radii_sum,    # (s-1,) precomputed (r_i + r_j)^2
    camera_axis,  # (3,)
    fov_half,     # float
    goal_R,       # (3, 3)
    goal_q,       # (3,)
    k_exp,        # float
    lam,
    inv_sigma,
    log_x,
    a0,
):
    B = R.shape[0]
    n_sphere = member_indptr.shape[0] - 1
    n_fov = fov_slots.shape[0]
    n_nodes = n_sphere + n_fov
    n_groups = group_indptr.shape[0] - 1

    psi = np.empty(B)
    logG = np.empty(B)
    gamma = np.empty(B)
    degenerate = 0

    beta = np.empty(neighbors.shape[0])
    b_vals = np.empty(n_nodes)
    pre = np.empty(n_nodes)
    suf = np.empty(n_nodes)

    for bi in range(B):
        # proximity values per neighbor slot
        for a in range(neighbors.shape[0]):
            j = neighbors[a]
            d2 = 0.0
            for c in range(3):
                diff = q[bi, agent, c] - q[bi, j, c]
                d2 += diff * diff
            beta[a] = d2 - radii_sum[a]

        for n in range(n_sphere):
            acc = 0.0
            for p in range(member_indptr[n], member_indptr[n + 1]):
                acc += beta[member_idx[p]]
            b_vals[n] = acc if acc > 0.0 else 0.0

        if n_fov > 0:
            ax = np.empty(3)
            for r in range(3):
                ax[r] = (
                    R[bi, agent, r, 0] * camera_axis[0]
                    + R[bi, agent, r, 1] * camera_axis[1]
                    + R[bi, agent, r, 2] * camera_axis[2]
                )
            for f in range(n_fov):
                j = neighbors[fov_slots[f]]
                ux = q[bi, j, 0] - q[bi, agent, 0]
                uy = q[bi, j, 1] - q[bi, agent, 1]
                uz = q[bi, j, 2] - q[bi, agent, 2]
                norm = math.sqrt(ux * ux + uy * uy + uz * uz)
                if norm < 1e-300:
                    norm = 1e-300
                cosang = (ax[0] * ux + ax[1] * uy + ax[2] * uz) / norm
                if cosang > 1.0:
                    cosang = 1.0
                elif cosang < -1.0:
                    cosang = -1.0
                angle = math.acos(cosang)
                val = angle * angle - fov_half * fov_half
                b_vals[n_sphere + f] = val if val > 0.0 else 0.0

        # log G accumulated as a renormalized product (one final log instead
        # of one per node)
        prod = 1.0
        exp2 = 0
        hit_zero = False
        for g in range(n_groups):
            lo = group_indptr[g]
            hi = group_indptr[g + 1]
            width = hi - lo
            if width == 1:
                node = group_nodes[lo]
                bv = b_vals[node]
                if bv == 0.0:
                    hit_zero = True
                else:
                    prod *= bv + lam * bv / (bv + 1.0)  # empty complement is 1
                    if prod > 1e250 or prod < 1e-250:
                        m, e = math.frexp(prod)
                        prod = m
                        exp2 += e
            else:
                # prefix/suffix products of the group values
                acc = 1.0
                for w in range(width):
                    pre[w] = acc
                    acc *= b_vals[group_nodes[lo + w]]
                acc = 1.0
                for w in range(width - 1, -1, -1):
                    suf[w] = acc
                    acc *= b_vals[group_nodes[lo + w]]
                for w in range(width):
                    node = group_nodes[lo + w]
                    bv = b_vals[node]
                    Bc = pre[w] * suf[w]
                    if bv == 0.0:
                        if Bc == 0.0:
                            degenerate |= 1
                        hit_zero = True
                    else:
                        Bq = Bc**inv_sigma
                        prod *= bv + lam * bv / (bv + Bq)
                        if prod > 1e250 or prod < 1e-250:
                            m, e = math.frexp(prod)
                            prod = m
                            exp2 += e
        if hit_zero:
            lg = -np.inf
        else:
            lg = math.log(prod) + 0.6931471805599453 * exp2
        logG[bi] = lg

        rot = 3.0 - (
            R[bi, agent, 0, 0] * goal_R[0, 0]
            + R[bi, agent, 0, 1] * goal_R[0, 1]
            + R[bi, agent, 0, 2] * goal_R[0, 2]
            + R[bi, agent, 1, 0] * goal_R[1, 0]
            + R[bi, agent, 1, 1] * goal_R[1, 1]
            + R[bi, agent, 1, 2] * goal_R[1, 2]
            + R[bi, agent, 2, 0] * goal_R[2, 0]
            + R[bi, agent, 2, 1] * goal_R[2, 1]
            + R[bi, agent, 2, 2] * goal_R[2, 2]
        )
        if rot < 0.0:
            rot = 0.0
        dq = 0.0
        for c in range(3):
            diff = q[bi, agent, c] - goal_q[c]
            dq += diff * diff
        gam = rot + dq
        gamma[bi] = gam

        if lg <= log_x:
            arg = lg - log_x
            if arg > 0.0:
                arg = 0.0
            ratio = math.exp(arg)
            f_corr = a0 * (1.0 - 3.0 * ratio * ratio + 2.0 * ratio * ratio * ratio)
        else:
            f_corr = 0.0

        A = gam + f_corr
        if A == 0.0 and lg == -np.inf:
            degenerate |= 2
            psi[bi] = np.nan
            continue
        la = np.log(A)  # -inf when A == 0
        psi[bi] = math.exp(la - np.logaddexp(k_exp * la, lg) / k_exp)

    return psi, logG, gamma, degenerate
