"""Numba-compiled batch kernels for the explicit solver hot loop.

All kernels parallelize over particles; each iteration writes only its own
particle's outputs and accumulates its bond sums in CSR order, so results
are bitwise independent of the worker-thread count.  fastmath stays off
everywhere for the same reason.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

# Material dispatch codes.
MAT_ELASTIC = 0
MAT_PLASTIC = 1
MAT_HERSCHEL_BULKLEY = 2
MAT_HOLZAPFEL_OGDEN = 3

# Hardening dispatch codes (plastic material parameter vector).
HARD_PERFECT = 0
HARD_LINEAR = 1
HARD_NONLINEAR = 2

_SQ23 = np.sqrt(2.0 / 3.0)
_NEWTON_RTOL = 1e-10
_NEWTON_MAXIT = 50
_VISCO_STEP_FRACTION = 0.05
_VISCO_MAX_SUBSTEPS = 2000

# Hourglass-limiter dead zone and saturation span.
LIMITER_LOW = 0.05
LIMITER_SPAN = 1.0


@njit(cache=True, inline="always")
def _det(a, d):
    if d == 2:
        return a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    return (
        a[0, 0] * (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1])
        - a[0, 1] * (a[1, 0] * a[2, 2] - a[1, 2] * a[2, 0])
        + a[0, 2] * (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0])
    )


@njit(cache=True, inline="always")
def _inv(a, out, d, det):
    inv_det = 1.0 / det
    if d == 2:
        out[0, 0] = a[1, 1] * inv_det
        out[0, 1] = -a[0, 1] * inv_det
        out[1, 0] = -a[1, 0] * inv_det
        out[1, 1] = a[0, 0] * inv_det
    else:
        out[0, 0] = (a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]) * inv_det
        out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * inv_det
        out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * inv_det
        out[1, 0] = (a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]) * inv_det
        out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * inv_det
        out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * inv_det
        out[2, 0] = (a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]) * inv_det
        out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * inv_det
        out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * inv_det


@njit(cache=True, inline="always")
def _matmul(a, b, out, d):
    for r in range(d):
        for c in range(d):
            s = 0.0
            for k in range(d):
                s += a[r, k] * b[k, c]
            out[r, c] = s


@njit(cache=True, inline="always")
def _matmul_abt(a, b, out, d):
    # out = a @ b.T
    for r in range(d):
        for c in range(d):
            s = 0.0
            for k in range(d):
                s += a[r, k] * b[c, k]
            out[r, c] = s


@njit(cache=True, inline="always")
def _trace(a, d):
    s = 0.0
    for k in range(d):
        s += a[k, k]
    return s


@njit(cache=True, inline="always")
def _flow_stress(hard_kind, tau_y, kappa, tau_sat, exponent, xi):
    if hard_kind == HARD_LINEAR:
        return tau_y + kappa * xi
    if hard_kind == HARD_NONLINEAR:
        return tau_y + kappa * xi + (tau_sat - tau_y) * (1.0 - np.exp(-exponent * xi))
    return tau_y


@njit(cache=True, inline="always")
def _flow_stress_slope(hard_kind, tau_y, kappa, tau_sat, exponent, xi):
    if hard_kind == HARD_LINEAR:
        return kappa
    if hard_kind == HARD_NONLINEAR:
        return kappa + (tau_sat - tau_y) * exponent * np.exp(-exponent * xi)
    return 0.0


@njit(cache=True, parallel=True)
def constitutive_pass(
    F,
    Fdot,
    B0,
    cp_inv,
    xi,
    Ta,
    mat_kind,
    mp,
    f0,
    s0,
    chi_eff,
    dt,
    c_out,
    be,
    tau_r,
    Finv,
    A,
    R,
    ws1,
    ws2,
    err,
):
    """Per-particle constitutive evaluation plus force-coefficient tensors.

    Writes, for each particle i:
      c_out[i], be[i], tau_r[i]  -- stress decomposition tau = c be + tau_r
      Finv[i]                    -- inverse deformation gradient
      A[i] = c be Finv^T B0      -- shear-force coefficient tensor
      R[i] = tau_r Finv^T B0^T   -- remaining-force coefficient tensor
    Plastic internal state (cp_inv, xi) is updated in place.  err[i] is set
    when det(F) <= 0 or an inner solve fails.
    """
    n = F.shape[0]
    d = F.shape[1]
    for i in prange(n):
        Fi = F[i]
        J = _det(Fi, d)
        if J <= 0.0 or not np.isfinite(J):
            err[i] = 1
            continue
        _inv(Fi, Finv[i], d, J)

        # Kelvin-Voigt damping seed: tau_r = chi_eff (Fdot F^T + F Fdot^T).
        _matmul_abt(Fdot[i], Fi, ws1[i], d)
        for r in range(d):
            for cc in range(d):
                tau_r[i, r, cc] = chi_eff * (ws1[i, r, cc] + ws1[i, cc, r])

        kind = mat_kind
        if kind == MAT_ELASTIC or kind == MAT_HOLZAPFEL_OGDEN:
            _matmul_abt(Fi, Fi, be[i], d)

        if kind == MAT_ELASTIC:
            K = mp[0]
            G = mp[1]
            det_be = _det(be[i], d)
            c = det_be ** (-1.0 / d) * G
            diag = 0.5 * K * (J * J - 1.0) - c * _trace(be[i], d) / d
            for r in range(d):
                tau_r[i, r, r] += diag
            c_out[i] = c

        elif kind == MAT_PLASTIC or kind == MAT_HERSCHEL_BULKLEY:
            K = mp[0]
            G = mp[1]
            tau_y = mp[2]
            # Trial elastic state from the stored inverse plastic tensor.
            _matmul(Fi, cp_inv[i], ws1[i], d)
            _matmul_abt(ws1[i], Fi, be[i], d)
            for r in range(d):
                for cc in range(r + 1, d):
                    sym = 0.5 * (be[i, r, cc] + be[i, cc, r])
                    be[i, r, cc] = sym
                    be[i, cc, r] = sym
            det_be = _det(be[i], d)
            scale = det_be ** (-1.0 / d)
            tr_be = _trace(be[i], d)
            devnorm2 = 0.0
            for r in range(d):
                for cc in range(d):
                    v = be[i, r, cc]
                    if r == cc:
                        v -= tr_be / d
                    devnorm2 += v * v
            norm_trial = G * scale * np.sqrt(devnorm2)

            plastic = False
            s_new = norm_trial
            dxi = 0.0
            G_tilde = (scale * tr_be / d) * G
            if kind == MAT_PLASTIC:
                hard_kind = int(mp[3])
                kappa = mp[4]
                tau_sat = mp[5]
                exponent = mp[6]
                f_trial = norm_trial - _SQ23 * _flow_stress(
                    hard_kind, tau_y, kappa, tau_sat, exponent, xi[i]
                )
                if f_trial > 0.0:
                    plastic = True
                    if hard_kind == HARD_NONLINEAR:
                        x = 0.5 * f_trial / (
                            G_tilde
                            + _flow_stress_slope(
                                hard_kind, tau_y, kappa, tau_sat, exponent, xi[i]
                            )
                            / 3.0
                        )
                        tol = _NEWTON_RTOL * tau_y
                        converged = False
                        for _ in range(_NEWTON_MAXIT):
                            xi_new = xi[i] + _SQ23 * x
                            g = (
                                norm_trial
                                - 2.0 * G_tilde * x
                                - _SQ23
                                * _flow_stress(
                                    hard_kind, tau_y, kappa, tau_sat, exponent, xi_new
                                )
                            )
                            if abs(g) <= tol:
                                converged = True
                                break
                            dg = -2.0 * G_tilde - (2.0 / 3.0) * _flow_stress_slope(
                                hard_kind, tau_y, kappa, tau_sat, exponent, xi_new
                            )
                            x -= g / dg
                        if not converged:
                            err[i] = 2
                            continue
                        dxi = x
                    else:
                        dxi = 0.5 * f_trial / (G_tilde + kappa / 3.0)
                    s_new = norm_trial - 2.0 * G_tilde * dxi
            else:
                # Viscoplastic overstress relaxation over the timestep dt.
                eta = mp[3]
                power = mp[4]
                s_yield = _SQ23 * tau_y
                if norm_trial > s_yield:
                    plastic = True
                    inv_power = 1.0 / power
                    s = norm_trial
                    over0 = s - s_yield
                    rate0 = (over0 / eta) ** inv_power
                    n_sub = int(
                        np.ceil(
                            2.0 * G_tilde * rate0 * dt / (_VISCO_STEP_FRACTION * over0)
                        )
                    )
                    if n_sub < 1:
                        n_sub = 1
                    if n_sub > _VISCO_MAX_SUBSTEPS:
                        n_sub = _VISCO_MAX_SUBSTEPS
                    h_sub = dt / n_sub
                    for _ in range(n_sub):
                        over = s - s_yield
                        if over <= 0.0:
                            s = s_yield
                            break
                        k1 = -2.0 * G_tilde * (over / eta) ** inv_power
                        over_mid = s + 0.5 * h_sub * k1 - s_yield
                        if over_mid < 0.0:
                            over_mid = 0.0
                        k2 = -2.0 * G_tilde * (over_mid / eta) ** inv_power
                        s = s + h_sub * k2
                        if s < s_yield:
                            s = s_yield
                    s_new = s
                    dxi = (norm_trial - s) / (2.0 * G_tilde)

            if plastic:
                xi[i] += _SQ23 * dxi
                # Rescale the deviator of be radially; trace is preserved.
                factor = scale * (s_new / norm_trial) if norm_trial > 0.0 else 0.0
                for r in range(d):
                    for cc in range(d):
                        v = be[i, r, cc]
                        if r == cc:
                            v -= tr_be / d
                        be[i, r, cc] = factor * v
                    be[i, r, r] += tr_be / d
                _matmul(Finv[i], be[i], ws1[i], d)
                _matmul_abt(ws1[i], Finv[i], cp_inv[i], d)
                for r in range(d):
                    for cc in range(r + 1, d):
                        sym = 0.5 * (cp_inv[i, r, cc] + cp_inv[i, cc, r])
                        cp_inv[i, r, cc] = sym
                        cp_inv[i, cc, r] = sym
                det_be = _det(be[i], d)

            c = det_be ** (-1.0 / d) * G
            diag = 0.5 * K * (J * J - 1.0) - c * _trace(be[i], d) / d
            for r in range(d):
                tau_r[i, r, r] += diag
            c_out[i] = c

        else:
            # Holzapfel-Ogden with optional active fiber stress.
            lam = mp[0]
            a = mp[1]
            b_exp = mp[2]
            a_f = mp[3]
            b_f = mp[4]
            a_s = mp[5]
            b_s = mp[6]
            a_fs = mp[7]
            b_fs = mp[8]
            I1 = _trace(be[i], d)
            Ff0 = Fi[0, 0] * f0[0] + Fi[0, 1] * f0[1] + Fi[0, 2] * f0[2]
            Ff1 = Fi[1, 0] * f0[0] + Fi[1, 1] * f0[1] + Fi[1, 2] * f0[2]
            Ff2 = Fi[2, 0] * f0[0] + Fi[2, 1] * f0[1] + Fi[2, 2] * f0[2]
            Fs0 = Fi[0, 0] * s0[0] + Fi[0, 1] * s0[1] + Fi[0, 2] * s0[2]
            Fs1 = Fi[1, 0] * s0[0] + Fi[1, 1] * s0[1] + Fi[1, 2] * s0[2]
            Fs2 = Fi[2, 0] * s0[0] + Fi[2, 1] * s0[1] + Fi[2, 2] * s0[2]
            I_ff = Ff0 * Ff0 + Ff1 * Ff1 + Ff2 * Ff2
            I_ss = Fs0 * Fs0 + Fs1 * Fs1 + Fs2 * Fs2
            I_fs = Ff0 * Fs0 + Ff1 * Fs1 + Ff2 * Fs2
            c = a * np.exp(b_exp * (I1 - 3.0))
            diag = lam * np.log(J) - a
            for r in range(d):
                tau_r[i, r, r] += diag
            coef_f = Ta[i]
            if a_f > 0.0:
                coef_f += (
                    2.0 * a_f * (I_ff - 1.0) * np.exp(b_f * (I_ff - 1.0) ** 2)
                )
            if coef_f != 0.0:
                tau_r[i, 0, 0] += coef_f * Ff0 * Ff0
                tau_r[i, 0, 1] += coef_f * Ff0 * Ff1
                tau_r[i, 0, 2] += coef_f * Ff0 * Ff2
                tau_r[i, 1, 0] += coef_f * Ff1 * Ff0
                tau_r[i, 1, 1] += coef_f * Ff1 * Ff1
                tau_r[i, 1, 2] += coef_f * Ff1 * Ff2
                tau_r[i, 2, 0] += coef_f * Ff2 * Ff0
                tau_r[i, 2, 1] += coef_f * Ff2 * Ff1
                tau_r[i, 2, 2] += coef_f * Ff2 * Ff2
            if a_s > 0.0:
                coef_s = 2.0 * a_s * (I_ss - 1.0) * np.exp(b_s * (I_ss - 1.0) ** 2)
                tau_r[i, 0, 0] += coef_s * Fs0 * Fs0
                tau_r[i, 0, 1] += coef_s * Fs0 * Fs1
                tau_r[i, 0, 2] += coef_s * Fs0 * Fs2
                tau_r[i, 1, 0] += coef_s * Fs1 * Fs0
                tau_r[i, 1, 1] += coef_s * Fs1 * Fs1
                tau_r[i, 1, 2] += coef_s * Fs1 * Fs2
                tau_r[i, 2, 0] += coef_s * Fs2 * Fs0
                tau_r[i, 2, 1] += coef_s * Fs2 * Fs1
                tau_r[i, 2, 2] += coef_s * Fs2 * Fs2
            if a_fs > 0.0:
                coef_fs = a_fs * I_fs * np.exp(b_fs * I_fs * I_fs)
                tau_r[i, 0, 0] += coef_fs * 2.0 * Ff0 * Fs0
                tau_r[i, 0, 1] += coef_fs * (Ff0 * Fs1 + Fs0 * Ff1)
                tau_r[i, 0, 2] += coef_fs * (Ff0 * Fs2 + Fs0 * Ff2)
                tau_r[i, 1, 0] += coef_fs * (Ff1 * Fs0 + Fs1 * Ff0)
                tau_r[i, 1, 1] += coef_fs * 2.0 * Ff1 * Fs1
                tau_r[i, 1, 2] += coef_fs * (Ff1 * Fs2 + Fs1 * Ff2)
                tau_r[i, 2, 0] += coef_fs * (Ff2 * Fs0 + Fs2 * Ff0)
                tau_r[i, 2, 1] += coef_fs * (Ff2 * Fs1 + Fs2 * Ff1)
                tau_r[i, 2, 2] += coef_fs * 2.0 * Ff2 * Fs2
            c_out[i] = c

        # Force-coefficient tensors.
        _matmul_abt(be[i], Finv[i], ws1[i], d)
        _matmul(ws1[i], B0[i], ws2[i], d)
        for r in range(d):
            for cc in range(d):
                A[i, r, cc] = c_out[i] * ws2[i, r, cc]
        _matmul_abt(tau_r[i], Finv[i], ws1[i], d)
        _matmul_abt(ws1[i], B0[i], ws2[i], d)
        for r in range(d):
            for cc in range(d):
                R[i, r, cc] = ws2[i, r, cc]


@njit(cache=True, parallel=True)
def coefficient_pass(F, c, be, tau_r, B0, Finv, A, R, ws1, ws2, err):
    """Force-coefficient tensors from an externally supplied decomposition.

    Performs exactly the same operation sequence as the tail of
    ``constitutive_pass`` so both paths produce bitwise-identical tensors.
    """
    n = F.shape[0]
    d = F.shape[1]
    for i in prange(n):
        J = _det(F[i], d)
        if J <= 0.0 or not np.isfinite(J):
            err[i] = 1
            continue
        _inv(F[i], Finv[i], d, J)
        _matmul_abt(be[i], Finv[i], ws1[i], d)
        _matmul(ws1[i], B0[i], ws2[i], d)
        for r in range(d):
            for cc in range(d):
                A[i, r, cc] = c[i] * ws2[i, r, cc]
        _matmul_abt(tau_r[i], Finv[i], ws1[i], d)
        _matmul_abt(ws1[i], B0[i], ws2[i], d)
        for r in range(d):
            for cc in range(d):
                R[i, r, cc] = ws2[i, r, cc]


@njit(cache=True, parallel=True)
def force_pass(
    pos,
    indptr,
    bj,
    r0,
    e0,
    w0,
    dwdr,
    vol0,
    rho0,
    A,
    R,
    Finv,
    w_at_zero,
    alpha,
    phi_fixed,
    use_phi_formula,
    acc_s,
    acc_r,
):
    """Hourglass-corrected shear plus remaining-stress accelerations.

    Per bond the shear force direction is e0 + phi * ehat where ehat is the
    tracing-back discrepancy 0.5 (Finv_i + Finv_j) r_ij / r0 - e0 and
    phi = alpha * d * (W0_ij / W(0)) * clip(|ehat| - 0.05, 0, 1); when
    ``use_phi_formula`` is false, phi takes the constant ``phi_fixed``.
    """
    n = pos.shape[0]
    d = pos.shape[1]
    for i in prange(n):
        for k in range(d):
            acc_s[i, k] = 0.0
            acc_r[i, k] = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = bj[p]
            coeff = dwdr[p] * vol0[j]
            inv_r0 = 1.0 / r0[p]
            ehat0 = 0.0
            ehat1 = 0.0
            ehat2 = 0.0
            # ehat = 0.5 (Finv_i + Finv_j) r_ij / r0 - e0
            for l in range(d):
                rl = (pos[i, l] - pos[j, l]) * inv_r0
                ehat0 += 0.5 * (Finv[i, 0, l] + Finv[j, 0, l]) * rl
                ehat1 += 0.5 * (Finv[i, 1, l] + Finv[j, 1, l]) * rl
                if d == 3:
                    ehat2 += 0.5 * (Finv[i, 2, l] + Finv[j, 2, l]) * rl
            ehat0 -= e0[p, 0]
            ehat1 -= e0[p, 1]
            if d == 3:
                ehat2 -= e0[p, 2]

            if use_phi_formula:
                mag = np.sqrt(ehat0 * ehat0 + ehat1 * ehat1 + ehat2 * ehat2)
                gamma = mag - LIMITER_LOW
                if gamma < 0.0:
                    gamma = 0.0
                elif gamma > LIMITER_SPAN:
                    gamma = LIMITER_SPAN
                phi = alpha * d * (w0[p] / w_at_zero) * gamma
            else:
                phi = phi_fixed

            dir0 = e0[p, 0] + phi * ehat0
            dir1 = e0[p, 1] + phi * ehat1
            dir2 = 0.0
            if d == 3:
                dir2 = e0[p, 2] + phi * ehat2

            for k in range(d):
                fs = (A[i, k, 0] + A[j, k, 0]) * dir0 + (A[i, k, 1] + A[j, k, 1]) * dir1
                fr = (R[i, k, 0] + R[j, k, 0]) * e0[p, 0] + (
                    R[i, k, 1] + R[j, k, 1]
                ) * e0[p, 1]
                if d == 3:
                    fs += (A[i, k, 2] + A[j, k, 2]) * dir2
                    fr += (R[i, k, 2] + R[j, k, 2]) * e0[p, 2]
                acc_s[i, k] += coeff * fs
                acc_r[i, k] += coeff * fr
        inv_rho = 1.0 / rho0[i]
        for k in range(d):
            acc_s[i, k] *= inv_rho
            acc_r[i, k] *= inv_rho


@njit(cache=True, parallel=True)
def deformation_rate_pass(vel, indptr, bj, e0, dwdr, vol0, B0, Fdot):
    """Rate of the deformation gradient from the corrected velocity gradient."""
    n = vel.shape[0]
    d = vel.shape[1]
    for i in prange(n):
        m00 = 0.0
        m01 = 0.0
        m02 = 0.0
        m10 = 0.0
        m11 = 0.0
        m12 = 0.0
        m20 = 0.0
        m21 = 0.0
        m22 = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            j = bj[p]
            w = dwdr[p] * vol0[j]
            dv0 = vel[j, 0] - vel[i, 0]
            dv1 = vel[j, 1] - vel[i, 1]
            g0 = w * e0[p, 0]
            g1 = w * e0[p, 1]
            m00 += dv0 * g0
            m01 += dv0 * g1
            m10 += dv1 * g0
            m11 += dv1 * g1
            if d == 3:
                dv2 = vel[j, 2] - vel[i, 2]
                g2 = w * e0[p, 2]
                m02 += dv0 * g2
                m12 += dv1 * g2
                m20 += dv2 * g0
                m21 += dv2 * g1
                m22 += dv2 * g2
        if d == 2:
            Fdot[i, 0, 0] = m00 * B0[i, 0, 0] + m01 * B0[i, 1, 0]
            Fdot[i, 0, 1] = m00 * B0[i, 0, 1] + m01 * B0[i, 1, 1]
            Fdot[i, 1, 0] = m10 * B0[i, 0, 0] + m11 * B0[i, 1, 0]
            Fdot[i, 1, 1] = m10 * B0[i, 0, 1] + m11 * B0[i, 1, 1]
        else:
            for r in range(3):
                if r == 0:
                    a0, a1, a2 = m00, m01, m02
                elif r == 1:
                    a0, a1, a2 = m10, m11, m12
                else:
                    a0, a1, a2 = m20, m21, m22
                Fdot[i, r, 0] = a0 * B0[i, 0, 0] + a1 * B0[i, 1, 0] + a2 * B0[i, 2, 0]
                Fdot[i, r, 1] = a0 * B0[i, 0, 1] + a1 * B0[i, 1, 1] + a2 * B0[i, 2, 1]
                Fdot[i, r, 2] = a0 * B0[i, 0, 2] + a1 * B0[i, 1, 2] + a2 * B0[i, 2, 2]


@njit(cache=True, parallel=True)
def half_kick_deformation(F, Fdot, rho, rho0, half_dt, err):
    """F += dt/2 * Fdot for every particle, then rho = rho0 / det(F)."""
    n = F.shape[0]
    d = F.shape[1]
    for i in prange(n):
        for r in range(d):
            for c in range(d):
                F[i, r, c] += half_dt * Fdot[i, r, c]
        J = _det(F[i], d)
        if J <= 0.0 or not np.isfinite(J):
            err[i] = 1
        else:
            rho[i] = rho0[i] / J


@njit(cache=True, parallel=True)
def drift_positions(pos, vel, constraint, half_dt):
    """Advance positions; clamped particles (kind 1) stay put."""
    n = pos.shape[0]
    d = pos.shape[1]
    for i in prange(n):
        if constraint[i] == 1:
            continue
        for k in range(d):
            pos[i, k] += half_dt * vel[i, k]


@njit(cache=True, parallel=True)
def kick_velocities(vel, acc, constraint, dt):
    """Velocity kick for free particles only (kind 0)."""
    n = vel.shape[0]
    d = vel.shape[1]
    for i in prange(n):
        if constraint[i] != 0:
            continue
        for k in range(d):
            vel[i, k] += dt * acc[i, k]


@njit(cache=True, parallel=True)
def enforce_wall(pos, vel, axis, wall_pos):
    """Rigid frictionless wall: clamp positions and zero inbound velocity."""
    n = pos.shape[0]
    for i in prange(n):
        if pos[i, axis] < wall_pos:
            pos[i, axis] = wall_pos
        if pos[i, axis] <= wall_pos and vel[i, axis] < 0.0:
            vel[i, axis] = 0.0


@njit(cache=True)
def timestep_candidates(vel, acc, cv, h):
    """Minima of the velocity- and acceleration-based step limits.

    Returns (min over particles of h / (cv_i + |v_i|),
             min over particles of sqrt(h / |a_i|)); the second entry is
    +inf when all accelerations vanish.
    """
    n = vel.shape[0]
    d = vel.shape[1]
    t_vel = np.inf
    t_acc = np.inf
    for i in range(n):
        v2 = 0.0
        a2 = 0.0
        for k in range(d):
            v2 += vel[i, k] * vel[i, k]
            a2 += acc[i, k] * acc[i, k]
        cand = h / (cv[i] + np.sqrt(v2))
        if cand < t_vel:
            t_vel = cand
        if a2 > 0.0:
            cand_a = np.sqrt(h / np.sqrt(a2))
            if cand_a < t_acc:
                t_acc = cand_a
    return t_vel, t_acc


@njit(cache=True, parallel=True)
def min_bond_distance(pos, indptr, bj):
    """Minimum current distance over all initially bonded pairs."""
    n = pos.shape[0]
    d = pos.shape[1]
    per_particle = np.empty(n)
    for i in prange(n):
        best = np.inf
        for p in range(indptr[i], indptr[i + 1]):
            j = bj[p]
            dist2 = 0.0
            for k in range(d):
                dx = pos[i, k] - pos[j, k]
                dist2 += dx * dx
            if dist2 < best:
                best = dist2
        per_particle[i] = best
    return np.sqrt(np.min(per_particle))
