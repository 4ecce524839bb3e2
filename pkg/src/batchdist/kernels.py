"""Hot numeric kernels: stage thermodynamics, balance residuals, FD Jacobian.

Every function here is plain vectorised numpy that also compiles under
``numba.njit`` (see :mod:`batchdist._jit`). Arrays are stage-major: a liquid
composition block has shape ``(S, C)``.

Packed parameter vectors
------------------------
``thermo`` arrays
    antoine (C, 3)   ln P[Pa] = A - B / (T[K] + C)
    cp (C, K)        liquid cp polynomial coefficients, J/mol/K
    watson (C, 4)    dh_ref J/mol, T_ref K, T_crit K, exponent
    tau_a, tau_b (C, C), alpha (C, C)   NRTL, tau = a + b / T
``par`` (float64[9])
    t_ref, n_hold, n_buffer, k_loss, t_amb, eps, q_in, dT_cond, dt
"""

import numpy as np

from ._jit import kernel

# indices into the packed ``par`` vector
T_REF, N_HOLD, N_BUFFER, K_LOSS, T_AMB, EPS, Q_IN, DT_COND, DT = range(9)
N_PAR = 9


@kernel
def ln_vapor_pressure(T, antoine):
    return antoine[:, 0][np.newaxis, :] - antoine[:, 1][np.newaxis, :] / (
        T[:, np.newaxis] + antoine[:, 2][np.newaxis, :]
    )


@kernel
def nrtl_ln_gamma(x, T, tau_a, tau_b, alpha):
    """NRTL log activity coefficients for a stack of compositions.

    ``x`` has shape (S, C) and ``T`` shape (S,). Zero mole fractions are
    fine: every denominator is a sum of positive G weighted by x with
    ``sum(x) = 1``.
    """
    tau = tau_a[np.newaxis, :, :] + tau_b[np.newaxis, :, :] / T[:, np.newaxis, np.newaxis]
    G = np.exp(-alpha[np.newaxis, :, :] * tau)
    xG = x[:, :, np.newaxis] * G
    den = xG.sum(axis=1)
    num = (xG * tau).sum(axis=1)
    ratio = num / den
    w = x[:, np.newaxis, :] * G / den[:, np.newaxis, :]
    corr = (w * (tau - ratio[:, np.newaxis, :])).sum(axis=2)
    return ratio + corr


@kernel
def nrtl_excess_gibbs(x, T, tau_a, tau_b, alpha):
    """Molar excess Gibbs energy over RT, shape (S,)."""
    tau = tau_a[np.newaxis, :, :] + tau_b[np.newaxis, :, :] / T[:, np.newaxis, np.newaxis]
    G = np.exp(-alpha[np.newaxis, :, :] * tau)
    xG = x[:, :, np.newaxis] * G
    den = xG.sum(axis=1)
    num = (xG * tau).sum(axis=1)
    return (x * num / den).sum(axis=1)


@kernel
def pure_liquid_enthalpy(T, cp, t_ref):
    """Integral of the cp polynomial from t_ref to T, shape (S, C)."""
    S = T.shape[0]
    C, K = cp.shape
    H = np.zeros((S, C))
    for k in range(K):
        p = k + 1.0
        H += cp[:, k][np.newaxis, :] * ((T ** p)[:, np.newaxis] - t_ref ** p) / p
    return H


@kernel
def pure_liquid_cp(T, cp):
    S = T.shape[0]
    C, K = cp.shape
    out = np.zeros((S, C))
    for k in range(K):
        out += cp[:, k][np.newaxis, :] * (T ** float(k))[:, np.newaxis]
    return out


@kernel
def enthalpy_of_vaporization(T, watson):
    reduced = (watson[:, 2][np.newaxis, :] - T[:, np.newaxis]) / (
        watson[:, 2] - watson[:, 1]
    )[np.newaxis, :]
    reduced = np.maximum(reduced, 0.0)
    return watson[:, 0][np.newaxis, :] * reduced ** watson[:, 3][np.newaxis, :]


@kernel
def stage_thermo(x, T, P, antoine, cp, watson, tau_a, tau_b, alpha, t_ref):
    """K-values, vapor compositions and phase enthalpies for all stages."""
    ln_k = (
        nrtl_ln_gamma(x, T, tau_a, tau_b, alpha)
        + ln_vapor_pressure(T, antoine)
        - np.log(P)[:, np.newaxis]
    )
    K = np.exp(ln_k)
    y = K * x
    H = pure_liquid_enthalpy(T, cp, t_ref)
    hL = (x * H).sum(axis=1)
    hV = (y * (H + enthalpy_of_vaporization(T, watson))).sum(axis=1)
    return K, y, hL, hV


@kernel
def balance_residual(x, T, n, xB, V, L, B, D, accM, accE, accB, y, hL, hV, hR, q_ext, W, eps):
    """Physical residual of the stage and buffer balances.

    ``accM``, ``accE``, ``accB`` are the accumulation terms (time derivatives
    of component holdups, stage energy contents and buffer component
    holdups); the caller decides whether they come from a chain-rule
    expansion or from a difference quotient. Returns rows ordered per stage
    as [C component rows, energy, sum(x) - 1, sum(y) - 1], followed by the
    C buffer rows, B - V^S and D - eps*B.
    """
    S, C = x.shape
    R = B - D
    zero1 = np.zeros(1)
    L_in = np.concatenate((L, np.array([R])))
    x_in = np.concatenate((x[1:], xB.reshape((1, C))))
    h_in = np.concatenate((hL[1:], np.array([hR])))
    V_in = np.concatenate((zero1, V[:-1]))
    y_in = np.concatenate((np.zeros((1, C)), y[:-1]))
    hV_in = np.concatenate((zero1, hV[:-1]))
    L_out = np.concatenate((zero1, L))

    net_M = (
        L_in[:, np.newaxis] * x_in
        + V_in[:, np.newaxis] * y_in
        - (L_out + W)[:, np.newaxis] * x
        - V[:, np.newaxis] * y
    )
    net_E = L_in * h_in + V_in * hV_in - (L_out + W) * hL - V * hV + q_ext

    block = np.empty((S, C + 3))
    block[:, :C] = accM - net_M
    block[:, C] = accE - net_E
    block[:, C + 1] = x.sum(axis=1) - 1.0
    block[:, C + 2] = y.sum(axis=1) - 1.0

    tail = np.empty(C + 2)
    tail[:C] = accB - (V[S - 1] * y[S - 1] - B * xB)
    tail[C] = B - V[S - 1]
    tail[C + 1] = D - eps * B
    return np.concatenate((block.ravel(), tail))


@kernel
def unpack(z, S, C):
    """Split the step unknown vector into its blocks."""
    o = S * C
    x = z[:o].reshape((S, C))
    T = z[o:o + S]
    o += S
    n1 = z[o]
    o += 1
    V = z[o:o + S]
    o += S
    L = z[o:o + S - 1]
    o += S - 1
    xB = z[o:o + C]
    o += C
    return x, T, n1, V, L, xB, z[o], z[o + 1]


@kernel
def step_residual(z, S, C, antoine, cp, watson, tau_a, tau_b, alpha,
                  cmat, q_loss, P, W, par, oldM, oldE, oldMB, row_scale):
    """Scaled residual of one implicit-Euler step in conservative variables."""
    x, T, n1, V, L, xB, B, D = unpack(z, S, C)
    t_ref = par[T_REF]
    dt = par[DT]
    n = np.full(S, par[N_HOLD])
    n[0] = n1

    K, y, hL, hV = stage_thermo(x, T, P, antoine, cp, watson, tau_a, tau_b, alpha, t_ref)
    T_R = np.array([T[S - 1] - par[DT_COND]])
    hR = (xB * pure_liquid_enthalpy(T_R, cp, t_ref)[0]).sum()

    E = n * hL + cmat * (T - t_ref)
    accM = (n[:, np.newaxis] * x - oldM) / dt
    accE = (E - oldE) / dt
    accB = (par[N_BUFFER] * xB - oldMB) / dt

    q_ext = -q_loss.copy()
    q_ext[0] = par[Q_IN] - par[K_LOSS] * (T[0] - par[T_AMB])
    r = balance_residual(x, T, n, xB, V, L, B, D, accM, accE, accB,
                         y, hL, hV, hR, q_ext, W, par[EPS])
    return r * row_scale


@kernel
def step_jacobian(z, S, C, antoine, cp, watson, tau_a, tau_b, alpha,
                  cmat, q_loss, P, W, par, oldM, oldE, oldMB, row_scale, z_typ):
    """Forward-difference Jacobian of :func:`step_residual`."""
    N = z.shape[0]
    r0 = step_residual(z, S, C, antoine, cp, watson, tau_a, tau_b, alpha,
                       cmat, q_loss, P, W, par, oldM, oldE, oldMB, row_scale)
    J = np.empty((N, N))
    zp = z.copy()
    for i in range(N):
        h = 1.4901161193847656e-08 * max(abs(z[i]), z_typ[i])
        zp[i] = z[i] + h
        h = zp[i] - z[i]
        ri = step_residual(zp, S, C, antoine, cp, watson, tau_a, tau_b, alpha,
                           cmat, q_loss, P, W, par, oldM, oldE, oldMB, row_scale)
        J[:, i] = (ri - r0) / h
        zp[i] = z[i]
    return J
