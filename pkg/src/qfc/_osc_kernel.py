"""Fused numba kernels for the eigenbasis SSE simulation.

One control step (the force is constant over it) factors the implicit
pentadiagonal matrix once and advances the wavefunction through the
mixed explicit/implicit order-1.5 scheme for every substep.  The
arithmetic mirrors qfc.sde.step_mixed_implicit_15 exactly; parity is
enforced by tests.

Band conventions: the Hamiltonian is real symmetric pentadiagonal with
diagonal h0[0..n-1], first off-diagonal h1[0..n-2] and second h2[0..n-3];
the position operator is tridiagonal with off-diagonal xoff.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _h_apply(h0, h1, h2, v, out):
    n = v.shape[0]
    for i in range(n):
        acc = h0[i] * v[i]
        if i >= 1:
            acc += h1[i - 1] * v[i - 1]
        if i + 1 < n:
            acc += h1[i] * v[i + 1]
        if i >= 2:
            acc += h2[i - 2] * v[i - 2]
        if i + 2 < n:
            acc += h2[i] * v[i + 2]
        out[i] = acc
    return out


@njit(cache=True)
def _mean_x(xoff, v):
    """(<x>, |v|^2) for the tridiagonal position operator."""
    n = v.shape[0]
    nrm2 = 0.0
    acc = 0.0
    for i in range(n):
        nrm2 += v[i].real * v[i].real + v[i].imag * v[i].imag
        if i + 1 < n:
            cross = (v[i].conjugate() * v[i + 1]).real
            acc += 2.0 * xoff[i] * cross
    return acc / nrm2, nrm2


@njit(cache=True)
def _xc_apply(xoff, shift, v, out):
    """(x - shift) v."""
    n = v.shape[0]
    for i in range(n):
        acc = -shift * v[i]
        if i >= 1:
            acc += xoff[i - 1] * v[i - 1]
        if i + 1 < n:
            acc += xoff[i] * v[i + 1]
        out[i] = acc
    return out


@njit(cache=True)
def _band_lu(m0, m1, m2):
    """LU of a complex symmetric pentadiagonal matrix, no pivoting.

    Returns (u0, u1, u2, l1, l2): upper bands of U and unit-lower
    multipliers.  The implicit matrix I + i dt/2 H is strongly diagonal
    dominant at the simulated time steps, so pivoting is unnecessary.
    """
    n = m0.shape[0]
    u0 = m0.astype(np.complex128).copy()
    u1 = np.zeros(n - 1, dtype=np.complex128)
    u2 = np.zeros(n - 2, dtype=np.complex128)
    for i in range(n - 1):
        u1[i] = m1[i]
    for i in range(n - 2):
        u2[i] = m2[i]
    l1 = np.zeros(n - 1, dtype=np.complex128)
    l2 = np.zeros(n - 2, dtype=np.complex128)
    # elimination preserves the symmetry of the trailing submatrix, so
    # the current subdiagonals equal u1/u2 and each symmetric pair of
    # Schur updates is recorded once
    for j in range(n):
        piv = u0[j]
        if j + 1 < n:
            l = u1[j] / piv
            l1[j] = l
            u0[j + 1] -= l * u1[j]
            if j + 2 < n:
                u1[j + 1] -= l * u2[j]
        if j + 2 < n:
            l = u2[j] / piv
            l2[j] = l
            u0[j + 2] -= l * u2[j]
    return u0, u1, u2, l1, l2


@njit(cache=True)
def _band_solve(u0, u1, u2, l1, l2, b, out):
    n = b.shape[0]
    # forward: L y = b
    for i in range(n):
        acc = b[i]
        if i >= 1:
            acc -= l1[i - 1] * out[i - 1]
        if i >= 2:
            acc -= l2[i - 2] * out[i - 2]
        out[i] = acc
    # backward: U x = y
    for i in range(n - 1, -1, -1):
        acc = out[i]
        if i + 1 < n:
            acc -= u1[i] * out[i + 1]
        if i + 2 < n:
            acc -= u2[i] * out[i + 2]
        out[i] = acc / u0[i]
    return out


@njit(cache=True)
def osc_control_step(
    psi, h0, h1, h2, xoff, gamma, dt, dws, dzs, third_order, signals_out
):
    """Advance one control step (len(dws) substeps); returns signal sum.

    psi is updated in place and renormalized after every substep; the
    per-substep measurement outcomes are written to signals_out.
    """
    n = psi.shape[0]
    cb = np.sqrt(gamma / 2.0)
    cd = gamma / 4.0
    sq = np.sqrt(dt)
    sig_coef = 1.0 / (np.sqrt(2.0 * gamma) * dt) if gamma > 0 else 0.0

    m0 = np.empty(n, dtype=np.complex128)
    m1 = np.empty(n - 1, dtype=np.complex128)
    m2 = np.empty(n - 2, dtype=np.complex128)
    half = 0.5j * dt
    for i in range(n):
        m0[i] = 1.0 + half * h0[i]
    for i in range(n - 1):
        m1[i] = half * h1[i]
    for i in range(n - 2):
        m2[i] = half * h2[i]
    u0, u1, u2, l1, l2 = _band_lu(m0, m1, m2)

    scratch1 = np.empty(n, dtype=np.complex128)
    scratch2 = np.empty(n, dtype=np.complex128)
    b = np.empty(n, dtype=np.complex128)
    a = np.empty(n, dtype=np.complex128)
    yp = np.empty(n, dtype=np.complex128)
    ym = np.empty(n, dtype=np.complex128)
    ap = np.empty(n, dtype=np.complex128)
    am = np.empty(n, dtype=np.complex128)
    a1p = np.empty(n, dtype=np.complex128)
    a1m = np.empty(n, dtype=np.complex128)
    a2p = np.empty(n, dtype=np.complex128)
    a2m = np.empty(n, dtype=np.complex128)
    bp = np.empty(n, dtype=np.complex128)
    bm = np.empty(n, dtype=np.complex128)
    bpp = np.empty(n, dtype=np.complex128)
    bpm = np.empty(n, dtype=np.complex128)
    phi = np.empty(n, dtype=np.complex128)
    rhs = np.empty(n, dtype=np.complex128)

    signal_sum = 0.0
    for step in range(dws.shape[0]):
        dw = dws[step]
        dz = dzs[step]

        ex, _ = _mean_x(xoff, psi)
        _xc_apply(xoff, ex, psi, scratch1)
        for i in range(n):
            b[i] = cb * scratch1[i]
        _xc_apply(xoff, ex, scratch1, scratch2)
        _h_apply(h0, h1, h2, psi, a)
        for i in range(n):
            a[i] = -1j * a[i] - cd * scratch2[i]
        for i in range(n):
            drift_i = psi[i] + a[i] * dt
            yp[i] = drift_i + b[i] * sq
            ym[i] = drift_i - b[i] * sq

        exp_, _ = _mean_x(xoff, yp)
        _xc_apply(xoff, exp_, yp, scratch1)
        for i in range(n):
            bp[i] = cb * scratch1[i]
        _xc_apply(xoff, exp_, scratch1, scratch2)
        _h_apply(h0, h1, h2, yp, a1p)
        for i in range(n):
            a1p[i] = -1j * a1p[i]
            a2p[i] = -cd * scratch2[i]
            ap[i] = a1p[i] + a2p[i]

        exm_, _ = _mean_x(xoff, ym)
        _xc_apply(xoff, exm_, ym, scratch1)
        for i in range(n):
            bm[i] = cb * scratch1[i]
        _xc_apply(xoff, exm_, scratch1, scratch2)
        _h_apply(h0, h1, h2, ym, a1m)
        for i in range(n):
            a1m[i] = -1j * a1m[i]
            a2m[i] = -cd * scratch2[i]
            am[i] = a1m[i] + a2m[i]

        # Phi+- = Y+ +- b(Y+) sqrt(dt)
        for i in range(n):
            phi[i] = yp[i] + bp[i] * sq
        exf, _ = _mean_x(xoff, phi)
        _xc_apply(xoff, exf, phi, scratch1)
        for i in range(n):
            bpp[i] = cb * scratch1[i]
        for i in range(n):
            phi[i] = yp[i] - bp[i] * sq
        exf, _ = _mean_x(xoff, phi)
        _xc_apply(xoff, exf, phi, scratch1)
        for i in range(n):
            bpm[i] = cb * scratch1[i]

        c_tail1 = (dw * dw - dt) / (4.0 * sq)
        c_tail2 = (dw * dt - dz) / (2.0 * dt)
        c_tail3 = dw * (dw * dw / 3.0 - dt) / (4.0 * dt)
        c_a1 = dw * dt / (4.0 * sq)
        c_dz = dz / (2.0 * sq)
        for i in range(n):
            rhs[i] = (
                psi[i]
                + b[i] * dw
                + a[i] * (dt / 2.0)
                + (a2p[i] + a2m[i]) * (dt / 4.0)
                - (a1p[i] - a1m[i]) * c_a1
                + (ap[i] - am[i]) * c_dz
                + (bp[i] - bm[i]) * c_tail1
                + (bp[i] - 2.0 * b[i] + bm[i]) * c_tail2
                + (bpp[i] - bpm[i] - bp[i] + bm[i]) * c_tail3
            )
        if third_order:
            # -(dt^3/12) (a1')^2 a with a1' = -iH, i.e. +dt^3/12 H(H a)
            _h_apply(h0, h1, h2, a, scratch1)
            _h_apply(h0, h1, h2, scratch1, scratch2)
            for i in range(n):
                rhs[i] += (dt**3 / 12.0) * scratch2[i]

        _band_solve(u0, u1, u2, l1, l2, rhs, psi)

        nrm2 = 0.0
        for i in range(n):
            nrm2 += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        inv = 1.0 / np.sqrt(nrm2)
        for i in range(n):
            psi[i] *= inv

        signals_out[step] = ex + dw * sig_coef
        signal_sum += signals_out[step]
    return signal_sum


@njit(cache=True)
def osc_observables(psi, xoff, poff, x2d, x2o, p2d, p2o, co):
    """(mean_x, mean_p, var_x, var_p, cov_c, phonon) from band operators.

    poff and co are the imaginary parts of the p and sym(xp) upper bands.
    """
    n = psi.shape[0]
    ex = 0.0
    ep = 0.0
    ex2 = 0.0
    ep2 = 0.0
    ec = 0.0
    phonon = 0.0
    for i in range(n):
        dens = psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
        ex2 += x2d[i] * dens
        ep2 += p2d[i] * dens
        phonon += i * dens
        if i + 1 < n:
            cr = (psi[i].conjugate() * psi[i + 1]).real
            ci = (psi[i].conjugate() * psi[i + 1]).imag
            ex += 2.0 * xoff[i] * cr
            # p_{n,n+1} = -i poff, so <p> picks up +2 poff Im(psi_n* psi_{n+1})
            ep += 2.0 * poff[i] * ci
        if i + 2 < n:
            cr2 = (psi[i].conjugate() * psi[i + 2]).real
            ci2 = (psi[i].conjugate() * psi[i + 2]).imag
            ex2 += 2.0 * x2o[i] * cr2
            ep2 += 2.0 * p2o[i] * cr2
            ec += -2.0 * co[i] * ci2
    return ex, ep, ex2 - ex * ex, ep2 - ep * ep, ec - ex * ep, phonon
