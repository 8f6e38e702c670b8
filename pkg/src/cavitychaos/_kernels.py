"""Compiled integration kernels.

A Dormand-Prince 8(5,3) stepper (coefficient tables taken from scipy) drives
every trajectory in the package.  Dense evaluation between accepted steps
uses a cubic Hermite interpolant, which is also what event location refines.
The specialized drivers below (sampled run, exit scan, Benettin pair,
Poincare section) all share the single stepper, so every front end sees the
same arithmetic.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dc

N_STAGES = int(_dc.N_STAGES)  # 12
RK_A = np.ascontiguousarray(_dc.A[:N_STAGES, :N_STAGES])
RK_B = np.ascontiguousarray(_dc.B)
RK_C = np.ascontiguousarray(_dc.C[:N_STAGES])
RK_E3 = np.ascontiguousarray(_dc.E3)
RK_E5 = np.ascontiguousarray(_dc.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0
EPS = np.finfo(np.float64).eps

STATUS_OK = 0
STATUS_UNDERFLOW = 1

MODE_HYBRID = 0
MODE_JC = 1


@njit(cache=True, nogil=True)
def _rhs(y, coef, delta, alpha, mode, fconst, out):
    n_t = coef.shape[0]
    if mode == MODE_HYBRID:
        x = y[0]
        cx = np.cos(x)
        sx = np.sin(x)
        out[0] = alpha * y[1]
        acc = 0.0
        for k in range(n_t):
            c = coef[k]
            u = y[2 + k]
            v = y[2 + n_t + k]
            z = y[2 + 2 * n_t + k]
            acc += c * u
            out[2 + k] = delta * v
            out[2 + n_t + k] = -delta * u + 2.0 * c * z * cx
            out[2 + 2 * n_t + k] = -2.0 * c * v * cx
        out[1] = -acc * sx
    else:
        out[0] = 0.0
        out[1] = 0.0
        for k in range(n_t):
            c = coef[k]
            u = y[2 + k]
            v = y[2 + n_t + k]
            z = y[2 + 2 * n_t + k]
            out[2 + k] = delta * v
            out[2 + n_t + k] = -delta * u - 2.0 * c * fconst * z
            out[2 + 2 * n_t + k] = 2.0 * c * fconst * v


@njit(cache=True, nogil=True)
def _advance(t, y, f, h_abs, t_bound, max_step, rtol, atol,
             coef, delta, alpha, mode, fconst,
             K, y_stage, y_new):
    """Take one accepted step toward t_bound; y and f are updated in place.

    Returns (t_new, h_abs_next, status).
    """
    dim = y.shape[0]
    min_step = 10.0 * EPS * max(abs(t), 1.0)
    rejected = False
    while True:
        if h_abs > max_step:
            h_abs = max_step
        if h_abs < min_step:
            return t, h_abs, STATUS_UNDERFLOW
        h = h_abs
        if t + h > t_bound:
            h = t_bound - t
        t_new = t + h

        for i in range(dim):
            K[0, i] = f[i]
        for s in range(1, N_STAGES):
            for i in range(dim):
                acc = 0.0
                for j in range(s):
                    a = RK_A[s, j]
                    if a != 0.0:
                        acc += a * K[j, i]
                y_stage[i] = y[i] + h * acc
            _rhs(y_stage, coef, delta, alpha, mode, fconst, K[s])
        for i in range(dim):
            acc = 0.0
            for j in range(N_STAGES):
                acc += RK_B[j] * K[j, i]
            y_new[i] = y[i] + h * acc
        _rhs(y_new, coef, delta, alpha, mode, fconst, K[N_STAGES])

        err5_2 = 0.0
        err3_2 = 0.0
        for i in range(dim):
            e5 = 0.0
            e3 = 0.0
            for j in range(N_STAGES + 1):
                e5 += RK_E5[j] * K[j, i]
                e3 += RK_E3[j] * K[j, i]
            sc = atol + rtol * max(abs(y[i]), abs(y_new[i]))
            e5 /= sc
            e3 /= sc
            err5_2 += e5 * e5
            err3_2 += e3 * e3
        if err5_2 == 0.0 and err3_2 == 0.0:
            err_norm = 0.0
        else:
            denom = err5_2 + 0.01 * err3_2
            err_norm = abs(h) * err5_2 / np.sqrt(denom * dim)

        if err_norm < 1.0:
            if err_norm == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err_norm ** ERROR_EXPONENT)
            if rejected:
                factor = min(1.0, factor)
            for i in range(dim):
                y[i] = y_new[i]
                f[i] = K[N_STAGES, i]
            return t_new, abs(h) * factor, STATUS_OK
        h_abs = abs(h) * max(MIN_FACTOR, SAFETY * err_norm ** ERROR_EXPONENT)
        rejected = True


@njit(cache=True, nogil=True, inline="always")
def _hermite(theta, h, y0, y1, f0, f1):
    t2 = theta * theta
    t3 = t2 * theta
    return ((2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + theta) * h * f0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * f1)


@njit(cache=True, nogil=True)
def _hermite_root(h, y0, y1, f0, f1, target):
    """Bisection on the cubic interpolant; assumes a sign change over [0, 1]."""
    lo = 0.0
    hi = 1.0
    glo = y0 - target
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        gm = _hermite(mid, h, y0, y1, f0, f1) - target
        if (glo <= 0.0) == (gm <= 0.0):
            lo = mid
            glo = gm
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


@njit(cache=True, nogil=True)
def _integrate_to(t, y, f, h_abs, t_target, max_step, rtol, atol,
                  coef, delta, alpha, mode, fconst, K, y_stage, y_new):
    """Advance y in place until t_target.  Returns (t, h_abs, status)."""
    while t_target - t > 4.0 * EPS * max(abs(t_target), 1.0):
        t, h_abs, status = _advance(t, y, f, h_abs, t_target, max_step,
                                    rtol, atol, coef, delta, alpha, mode,
                                    fconst, K, y_stage, y_new)
        if status != STATUS_OK:
            return t, h_abs, status
    return t, h_abs, STATUS_OK


@njit(cache=True, nogil=True)
def integrate_samples(y0, coef, delta, alpha, mode, fconst,
                      rtol, atol, max_step, t0, t_eval, out):
    """Integrate from t0 and fill out[k] with the state at t_eval[k]."""
    dim = y0.shape[0]
    y = y0.copy()
    f = np.empty(dim)
    y_old = np.empty(dim)
    f_old = np.empty(dim)
    K = np.empty((N_STAGES + 1, dim))
    y_stage = np.empty(dim)
    y_new = np.empty(dim)
    _rhs(y, coef, delta, alpha, mode, fconst, f)
    t = t0
    idx = 0
    n_eval = t_eval.shape[0]
    while idx < n_eval and t_eval[idx] <= t0:
        for i in range(dim):
            out[idx, i] = y[i]
        idx += 1
    h_abs = min(max_step, 0.01)
    t_bound = t_eval[n_eval - 1]
    while idx < n_eval:
        t_old = t
        for i in range(dim):
            y_old[i] = y[i]
            f_old[i] = f[i]
        t, h_abs, status = _advance(t, y, f, h_abs, t_bound, max_step,
                                    rtol, atol, coef, delta, alpha, mode,
                                    fconst, K, y_stage, y_new)
        if status != STATUS_OK:
            return status
        h = t - t_old
        margin = 4.0 * EPS * max(abs(t), 1.0)
        while idx < n_eval and t_eval[idx] <= t + margin:
            theta = (t_eval[idx] - t_old) / h
            if theta > 1.0:
                theta = 1.0
            for i in range(dim):
                out[idx, i] = _hermite(theta, h, y_old[i], y[i], f_old[i], f[i])
            idx += 1
    return STATUS_OK


@njit(cache=True, nogil=True)
def _invariants(y, coef, delta, alpha, r_out):
    """Energy W and per-triple norms R_n of a flattened hybrid state."""
    n_t = coef.shape[0]
    cx = np.cos(y[0])
    acc_u = 0.0
    acc_z = 0.0
    for k in range(n_t):
        u = y[2 + k]
        v = y[2 + n_t + k]
        z = y[2 + 2 * n_t + k]
        acc_u += coef[k] * u
        acc_z += z
        r_out[k] = np.sqrt(u * u + v * v + z * z)
    w = 0.5 * alpha * y[1] * y[1] - cx * acc_u - 0.5 * delta * acc_z
    return w


@njit(cache=True, nogil=True)
def exit_scan_point(y0, coef, delta, alpha, rtol, atol, max_step,
                    x_left, x_right, x_node, t_max):
    """Scattering run for one initial condition.

    Returns (T, side, m, w_drift, r_drift, status); side is 0 (left),
    1 (right) or -1 (still inside at t_max).
    """
    dim = y0.shape[0]
    n_t = coef.shape[0]
    y = y0.copy()
    f = np.empty(dim)
    y_old = np.empty(dim)
    f_old = np.empty(dim)
    K = np.empty((N_STAGES + 1, dim))
    y_stage = np.empty(dim)
    y_new = np.empty(dim)
    r0 = np.empty(n_t)
    r = np.empty(n_t)
    _rhs(y, coef, delta, alpha, MODE_HYBRID, 0.0, f)
    w0 = _invariants(y, coef, delta, alpha, r0)
    w_drift = 0.0
    r_drift = 0.0
    t = 0.0
    h_abs = min(max_step, 0.01)
    m = 0
    while t < t_max:
        t_old = t
        for i in range(dim):
            y_old[i] = y[i]
            f_old[i] = f[i]
        t, h_abs, status = _advance(t, y, f, h_abs, t_max, max_step,
                                    rtol, atol, coef, delta, alpha,
                                    MODE_HYBRID, 0.0, K, y_stage, y_new)
        if status != STATUS_OK:
            return t, -1, m, w_drift, r_drift, status
        h = t - t_old
        x0 = y_old[0]
        x1 = y[0]
        w = _invariants(y, coef, delta, alpha, r)
        if abs(w - w0) > w_drift:
            w_drift = abs(w - w0)
        for k in range(n_t):
            d = abs(r[k] - r0[k])
            if d > r_drift:
                r_drift = d
        side = -1
        x_hit = 0.0
        if x1 <= x_left:
            side = 0
            x_hit = x_left
        elif x1 >= x_right:
            side = 1
            x_hit = x_right
        if side >= 0:
            theta = _hermite_root(h, x0, x1, f_old[0], f[0], x_hit)
            t_hit = t_old + theta * h
            x_mid = _hermite(theta, h, x0, x1, f_old[0], f[0])
            # a node crossing strictly before the detector still counts
            if (x0 - x_node) * (x_mid - x_node) < 0.0:
                m += 1
            return t_hit, side, m, w_drift, r_drift, STATUS_OK
        if (x0 - x_node) * (x1 - x_node) < 0.0:
            m += 1
    return t_max, -1, m, w_drift, r_drift, STATUS_OK


@njit(cache=True, nogil=True)
def lyapunov_pair(y0, coef, delta, alpha, rtol, atol, max_step,
                  d0, renorm_interval, t_total, t_discard):
    """Benettin two-trajectory estimate of the maximal Lyapunov exponent.

    The companion trajectory starts displaced by d0 in momentum and is pulled
    back to separation d0 every renorm_interval.  Returns (lambda, status).
    """
    dim = y0.shape[0]
    ya = y0.copy()
    yb = y0.copy()
    yb[1] += d0
    fa = np.empty(dim)
    fb = np.empty(dim)
    K = np.empty((N_STAGES + 1, dim))
    y_stage = np.empty(dim)
    y_new = np.empty(dim)
    _rhs(ya, coef, delta, alpha, MODE_HYBRID, 0.0, fa)
    _rhs(yb, coef, delta, alpha, MODE_HYBRID, 0.0, fb)
    ha = min(max_step, 0.01)
    hb = ha
    ta = 0.0
    tb = 0.0
    n_int = int(np.ceil(t_total / renorm_interval))
    acc = 0.0
    t_kept = 0.0
    for k in range(1, n_int + 1):
        t_target = k * renorm_interval
        if t_target > t_total:
            t_target = t_total
        ta, ha, status = _integrate_to(ta, ya, fa, ha, t_target, max_step,
                                       rtol, atol, coef, delta, alpha,
                                       MODE_HYBRID, 0.0, K, y_stage, y_new)
        if status != STATUS_OK:
            return 0.0, status
        tb, hb, status = _integrate_to(tb, yb, fb, hb, t_target, max_step,
                                       rtol, atol, coef, delta, alpha,
                                       MODE_HYBRID, 0.0, K, y_stage, y_new)
        if status != STATUS_OK:
            return 0.0, status
        d2 = 0.0
        for i in range(dim):
            dd = yb[i] - ya[i]
            d2 += dd * dd
        d = np.sqrt(d2)
        if not np.isfinite(d) or d == 0.0:
            return 0.0, STATUS_UNDERFLOW
        if t_target > t_discard:
            acc += np.log(d / d0)
            t_kept += t_target - max(t_discard, (k - 1) * renorm_interval)
        scale = d0 / d
        for i in range(dim):
            yb[i] = ya[i] + (yb[i] - ya[i]) * scale
        _rhs(yb, coef, delta, alpha, MODE_HYBRID, 0.0, fb)
    if t_kept <= 0.0:
        return 0.0, STATUS_UNDERFLOW
    return acc / t_kept, STATUS_OK


@njit(cache=True, nogil=True)
def poincare_points(y0, coef, delta, alpha, rtol, atol, max_step,
                    t_max, out_xp, zero_tol):
    """Record (x wrapped to [-pi, pi), p) at rising zeros of sum_n v_n."""
    dim = y0.shape[0]
    n_t = coef.shape[0]
    y = y0.copy()
    f = np.empty(dim)
    y_old = np.empty(dim)
    f_old = np.empty(dim)
    K = np.empty((N_STAGES + 1, dim))
    y_stage = np.empty(dim)
    y_new = np.empty(dim)
    _rhs(y, coef, delta, alpha, MODE_HYBRID, 0.0, f)
    t = 0.0
    h_abs = min(max_step, 0.01)
    count = 0
    max_pts = out_xp.shape[0]
    while t < t_max and count < max_pts:
        t_old = t
        for i in range(dim):
            y_old[i] = y[i]
            f_old[i] = f[i]
        t, h_abs, status = _advance(t, y, f, h_abs, t_max, max_step,
                                    rtol, atol, coef, delta, alpha,
                                    MODE_HYBRID, 0.0, K, y_stage, y_new)
        if status != STATUS_OK:
            return count, status
        h = t - t_old
        s0 = 0.0
        s1 = 0.0
        ds0 = 0.0
        ds1 = 0.0
        for k in range(n_t):
            s0 += y_old[2 + n_t + k]
            s1 += y[2 + n_t + k]
            ds0 += f_old[2 + n_t + k]
            ds1 += f[2 + n_t + k]
        if abs(s0) < zero_tol and abs(s1) < zero_tol:
            continue
        if s0 < 0.0 and s1 >= 0.0:
            theta = _hermite_root(h, s0, s1, ds0, ds1, 0.0)
            x_sec = _hermite(theta, h, y_old[0], y[0], f_old[0], f[0])
            p_sec = _hermite(theta, h, y_old[1], y[1], f_old[1], f[1])
            x_wrapped = np.mod(x_sec + np.pi, 2.0 * np.pi) - np.pi
            out_xp[count, 0] = x_wrapped
            out_xp[count, 1] = p_sec
            count += 1
    return count, STATUS_OK
