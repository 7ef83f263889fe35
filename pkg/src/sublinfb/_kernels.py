"""Hot numeric kernels, compiled with numba when available.

Every kernel exists in two functionally identical flavours: a scalar-loop
version compiled with ``numba.njit`` and a vectorized (or plain Python, for
the inherently sequential integrators) numpy version.  The active flavour is
chosen at import time; set the environment variable

    SUBLINFB_DISABLE_NUMBA=1

to force the numpy/Python path.  ``benchmarks/bench_kernels.py`` times the
two paths against each other.
"""

import os

import numpy as np

_DISABLE = os.environ.get("SUBLINFB_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on",
)

try:
    if _DISABLE:
        raise ImportError("numba disabled by SUBLINFB_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via env flag
    NUMBA_ENABLED = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


# ---------------------------------------------------------------------------
# bilinear interpolation gather
# ---------------------------------------------------------------------------

def _bilinear_gather_np(values, h, xs, ys):
    n = values.shape[0]
    jc = (n - 1) // 2
    fj = np.clip(xs / h + jc, 0.0, n - 1.000000001)
    fi = np.clip(ys / h + jc, 0.0, n - 1.000000001)
    j0 = np.minimum(fj.astype(np.int64), n - 2)
    i0 = np.minimum(fi.astype(np.int64), n - 2)
    tx = fj - j0
    ty = fi - i0
    v00 = values[i0, j0]
    v01 = values[i0, j0 + 1]
    v10 = values[i0 + 1, j0]
    v11 = values[i0 + 1, j0 + 1]
    return (1.0 - ty) * ((1.0 - tx) * v00 + tx * v01) + ty * (
        (1.0 - tx) * v10 + tx * v11
    )


@njit(cache=True)
def _bilinear_gather_nb(values, h, xs, ys):  # pragma: no cover - jitted
    n = values.shape[0]
    jc = (n - 1) // 2
    out = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        fj = xs[k] / h + jc
        fi = ys[k] / h + jc
        if fj < 0.0:
            fj = 0.0
        if fj > n - 1.000000001:
            fj = n - 1.000000001
        if fi < 0.0:
            fi = 0.0
        if fi > n - 1.000000001:
            fi = n - 1.000000001
        j0 = int(fj)
        i0 = int(fi)
        if j0 > n - 2:
            j0 = n - 2
        if i0 > n - 2:
            i0 = n - 2
        tx = fj - j0
        ty = fi - i0
        out[k] = (1.0 - ty) * (
            (1.0 - tx) * values[i0, j0] + tx * values[i0, j0 + 1]
        ) + ty * ((1.0 - tx) * values[i0 + 1, j0] + tx * values[i0 + 1, j0 + 1])
    return out


bilinear_gather = _bilinear_gather_nb if NUMBA_ENABLED else _bilinear_gather_np


# ---------------------------------------------------------------------------
# 4-point Lagrange (cubic) interpolation gather: O(h^4) bias on smooth
# fields, which the cancellation-sensitive Weiss quadratures need; falls
# back to bilinear within one cell of the array edge
# ---------------------------------------------------------------------------

def _cubic_weights_np(t):
    w0 = -t * (t - 1.0) * (t - 2.0) / 6.0
    w1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0
    w2 = -t * (t + 1.0) * (t - 2.0) / 2.0
    w3 = t * (t + 1.0) * (t - 1.0) / 6.0
    return w0, w1, w2, w3


def _cubic_gather_np(values, h, xs, ys):
    n = values.shape[0]
    jc = (n - 1) // 2
    fj = np.clip(xs / h + jc, 0.0, n - 1.000000001)
    fi = np.clip(ys / h + jc, 0.0, n - 1.000000001)
    j0 = np.minimum(fj.astype(np.int64), n - 2)
    i0 = np.minimum(fi.astype(np.int64), n - 2)
    tx = fj - j0
    ty = fi - i0
    out = np.empty(xs.shape[0])
    inner = (j0 >= 1) & (j0 <= n - 3) & (i0 >= 1) & (i0 <= n - 3)
    if np.any(inner):
        jj = j0[inner]
        ii = i0[inner]
        wx = _cubic_weights_np(tx[inner])
        wy = _cubic_weights_np(ty[inner])
        acc = np.zeros(jj.shape[0])
        for a in range(4):
            row = np.zeros(jj.shape[0])
            for b in range(4):
                row += wx[b] * values[ii + a - 1, jj + b - 1]
            acc += wy[a] * row
        out[inner] = acc
    if np.any(~inner):
        out[~inner] = _bilinear_gather_np(values, h, xs[~inner], ys[~inner])
    return out


@njit(cache=True)
def _cubic_gather_nb(values, h, xs, ys):  # pragma: no cover - jitted
    n = values.shape[0]
    jc = (n - 1) // 2
    out = np.empty(xs.shape[0])
    for k in range(xs.shape[0]):
        fj = xs[k] / h + jc
        fi = ys[k] / h + jc
        if fj < 0.0:
            fj = 0.0
        if fj > n - 1.000000001:
            fj = n - 1.000000001
        if fi < 0.0:
            fi = 0.0
        if fi > n - 1.000000001:
            fi = n - 1.000000001
        j0 = int(fj)
        i0 = int(fi)
        if j0 > n - 2:
            j0 = n - 2
        if i0 > n - 2:
            i0 = n - 2
        tx = fj - j0
        ty = fi - i0
        if j0 < 1 or j0 > n - 3 or i0 < 1 or i0 > n - 3:
            out[k] = (1.0 - ty) * (
                (1.0 - tx) * values[i0, j0] + tx * values[i0, j0 + 1]
            ) + ty * (
                (1.0 - tx) * values[i0 + 1, j0] + tx * values[i0 + 1, j0 + 1]
            )
            continue
        wx0 = -tx * (tx - 1.0) * (tx - 2.0) / 6.0
        wx1 = (tx + 1.0) * (tx - 1.0) * (tx - 2.0) / 2.0
        wx2 = -tx * (tx + 1.0) * (tx - 2.0) / 2.0
        wx3 = tx * (tx + 1.0) * (tx - 1.0) / 6.0
        wy0 = -ty * (ty - 1.0) * (ty - 2.0) / 6.0
        wy1 = (ty + 1.0) * (ty - 1.0) * (ty - 2.0) / 2.0
        wy2 = -ty * (ty + 1.0) * (ty - 2.0) / 2.0
        wy3 = ty * (ty + 1.0) * (ty - 1.0) / 6.0
        acc = 0.0
        r0 = (
            wx0 * values[i0 - 1, j0 - 1] + wx1 * values[i0 - 1, j0]
            + wx2 * values[i0 - 1, j0 + 1] + wx3 * values[i0 - 1, j0 + 2]
        )
        r1 = (
            wx0 * values[i0, j0 - 1] + wx1 * values[i0, j0]
            + wx2 * values[i0, j0 + 1] + wx3 * values[i0, j0 + 2]
        )
        r2 = (
            wx0 * values[i0 + 1, j0 - 1] + wx1 * values[i0 + 1, j0]
            + wx2 * values[i0 + 1, j0 + 1] + wx3 * values[i0 + 1, j0 + 2]
        )
        r3 = (
            wx0 * values[i0 + 2, j0 - 1] + wx1 * values[i0 + 2, j0]
            + wx2 * values[i0 + 2, j0 + 1] + wx3 * values[i0 + 2, j0 + 2]
        )
        acc = wy0 * r0 + wy1 * r1 + wy2 * r2 + wy3 * r3
        out[k] = acc
    return out


cubic_gather = _cubic_gather_nb if NUMBA_ENABLED else _cubic_gather_np


# ---------------------------------------------------------------------------
# 5-point Laplacian application (the CG matvec)
# ---------------------------------------------------------------------------

def _neg_laplacian_np(values, interior):
    out = np.zeros_like(values)
    core = (
        4.0 * values[1:-1, 1:-1]
        - values[:-2, 1:-1]
        - values[2:, 1:-1]
        - values[1:-1, :-2]
        - values[1:-1, 2:]
    )
    out[1:-1, 1:-1] = core
    out[~interior] = 0.0
    return out


@njit(cache=True)
def _neg_laplacian_nb(values, interior):  # pragma: no cover - jitted
    n = values.shape[0]
    out = np.zeros((n, n))
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            if interior[i, j]:
                out[i, j] = (
                    4.0 * values[i, j]
                    - values[i - 1, j]
                    - values[i + 1, j]
                    - values[i, j - 1]
                    - values[i, j + 1]
                )
    return out


neg_laplacian = _neg_laplacian_nb if NUMBA_ENABLED else _neg_laplacian_np


# ---------------------------------------------------------------------------
# edge-based Dirichlet energy: 0.5 * sum over grid edges of (u_a - u_b)^2
# restricted to edges whose both endpoints are inside the domain
# ---------------------------------------------------------------------------

def _dirichlet_edge_energy_np(values, inside):
    dx = values[:, 1:] - values[:, :-1]
    mx = inside[:, 1:] & inside[:, :-1]
    dy = values[1:, :] - values[:-1, :]
    my = inside[1:, :] & inside[:-1, :]
    return 0.5 * (np.sum(dx[mx] ** 2) + np.sum(dy[my] ** 2))


@njit(cache=True)
def _dirichlet_edge_energy_nb(values, inside):  # pragma: no cover - jitted
    # Kahan-compensated accumulation: the energy feeds finite-difference
    # gradient checks, so summation noise must stay at rounding level
    n = values.shape[0]
    acc = 0.0
    comp = 0.0
    for i in range(n):
        for j in range(n - 1):
            if inside[i, j] and inside[i, j + 1]:
                d = values[i, j + 1] - values[i, j]
                y = d * d - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    for i in range(n - 1):
        for j in range(n):
            if inside[i, j] and inside[i + 1, j]:
                d = values[i + 1, j] - values[i, j]
                y = d * d - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    return 0.5 * acc


dirichlet_edge_energy = (
    _dirichlet_edge_energy_nb if NUMBA_ENABLED else _dirichlet_edge_energy_np
)


# ---------------------------------------------------------------------------
# pointwise potential F(u) = (lp/p) (u+)^p + (lm/q) (u-)^q and its derivative
# ---------------------------------------------------------------------------

def _potential_sum_np(values, sel, lp, lm, p, q):
    v = values[sel]
    pos = np.maximum(v, 0.0)
    neg = np.maximum(-v, 0.0)
    out = (lp / p) * np.sum(pos**p)
    if lm > 0.0:
        out += (lm / q) * np.sum(neg**q)
    return out


@njit(cache=True)
def _potential_sum_nb(values, sel, lp, lm, p, q):  # pragma: no cover - jitted
    n = values.shape[0]
    acc = 0.0
    comp = 0.0
    for i in range(n):
        for j in range(n):
            if sel[i, j]:
                v = values[i, j]
                if v > 0.0:
                    term = (lp / p) * v**p
                elif v < 0.0 and lm > 0.0:
                    term = (lm / q) * (-v) ** q
                else:
                    continue
                y = term - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    return acc


potential_sum = _potential_sum_nb if NUMBA_ENABLED else _potential_sum_np


def _reaction_term_np(values, lp, lm, p, q):
    pos = np.maximum(values, 0.0)
    neg = np.maximum(-values, 0.0)
    out = lp * pos ** (p - 1.0)
    if p == 1.0:
        out = lp * (values > 0.0).astype(np.float64)
    if lm > 0.0:
        out = out - lm * neg ** (q - 1.0)
    return out


@njit(cache=True)
def _reaction_term_nb(values, lp, lm, p, q):  # pragma: no cover - jitted
    n = values.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            v = values[i, j]
            if v > 0.0:
                if p == 1.0:
                    out[i, j] = lp
                else:
                    out[i, j] = lp * v ** (p - 1.0)
            elif v < 0.0 and lm > 0.0:
                out[i, j] = -lm * (-v) ** (q - 1.0)
    return out


reaction_term = _reaction_term_nb if NUMBA_ENABLED else _reaction_term_np


# ---------------------------------------------------------------------------
# dihedral group average with bilinear resampling (2k elements)
# ---------------------------------------------------------------------------

def _dihedral_average_np(values, h, k):
    n = values.shape[0]
    jc = (n - 1) // 2
    idx = np.arange(n, dtype=np.float64) - jc
    x = h * idx[None, :].repeat(n, axis=0).ravel()
    y = h * idx[:, None].repeat(n, axis=1).ravel()
    acc = np.zeros(n * n)
    for j in range(k):
        ang = 2.0 * np.pi * j / k
        c, s = np.cos(ang), np.sin(ang)
        acc += _bilinear_gather_np(values, h, c * x - s * y, s * x + c * y)
        refl = np.pi * j / k
        c2, s2 = np.cos(2.0 * refl), np.sin(2.0 * refl)
        acc += _bilinear_gather_np(values, h, c2 * x + s2 * y, s2 * x - c2 * y)
    return (acc / (2.0 * k)).reshape(n, n)


@njit(cache=True)
def _bilinear_point_nb(values, h, x, y):  # pragma: no cover - jitted
    n = values.shape[0]
    jc = (n - 1) // 2
    fj = x / h + jc
    fi = y / h + jc
    if fj < 0.0:
        fj = 0.0
    if fj > n - 1.000000001:
        fj = n - 1.000000001
    if fi < 0.0:
        fi = 0.0
    if fi > n - 1.000000001:
        fi = n - 1.000000001
    j0 = int(fj)
    i0 = int(fi)
    if j0 > n - 2:
        j0 = n - 2
    if i0 > n - 2:
        i0 = n - 2
    tx = fj - j0
    ty = fi - i0
    return (1.0 - ty) * (
        (1.0 - tx) * values[i0, j0] + tx * values[i0, j0 + 1]
    ) + ty * ((1.0 - tx) * values[i0 + 1, j0] + tx * values[i0 + 1, j0 + 1])


@njit(cache=True)
def _dihedral_average_nb(values, h, k):  # pragma: no cover - jitted
    n = values.shape[0]
    jc = (n - 1) // 2
    cs = np.empty(2 * k)
    sn = np.empty(2 * k)
    for m in range(k):
        ang = 2.0 * np.pi * m / k
        cs[m] = np.cos(ang)
        sn[m] = np.sin(ang)
        refl = 2.0 * np.pi * m / k
        cs[k + m] = np.cos(refl)
        sn[k + m] = np.sin(refl)
    out = np.zeros((n, n))
    for i in range(n):
        y = h * (i - jc)
        for j in range(n):
            x = h * (j - jc)
            acc = 0.0
            for m in range(k):
                # rotation by 2*pi*m/k
                acc += _bilinear_point_nb(
                    values, h, cs[m] * x - sn[m] * y, sn[m] * x + cs[m] * y
                )
                # reflection across the line at angle pi*m/k
                acc += _bilinear_point_nb(
                    values, h,
                    cs[k + m] * x + sn[k + m] * y,
                    sn[k + m] * x - cs[k + m] * y,
                )
            out[i, j] = acc / (2.0 * k)
    return out


dihedral_average = _dihedral_average_nb if NUMBA_ENABLED else _dihedral_average_np


# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (G7/K15) quadrature specialised to the arc-length
# integrand after the endpoint substitution t = 1 - s^2 (dt = -2 s ds):
#
#   T(M) = 2 * int_0^1 dt / sqrt(G(t))
#        = int_0^1  4 / sqrt(gamma^2 (2 - s^2) + c * g(s)/s^2)  ds,
#
# with g(s) = 1 - (1 - s^2)^p evaluated via expm1/log1p so g(s)/s^2 is
# accurate down to s = 0 (limit p).
# ---------------------------------------------------------------------------

_XGK = np.array(
    [
        0.991455371120813,
        0.949107912342759,
        0.864864423359769,
        0.741531185599394,
        0.586087235467691,
        0.405845151377397,
        0.207784955007898,
        0.0,
    ]
)
_WGK = np.array(
    [
        0.022935322010529,
        0.063092092629979,
        0.104790010322250,
        0.140653259715525,
        0.169004726639267,
        0.190350578064785,
        0.204432940075298,
        0.209482141084728,
    ]
)
_WG = np.array(
    [
        0.129484966168870,
        0.279705391489277,
        0.381830050505119,
        0.417959183673469,
    ]
)


def _period_integrand_impl(s, gamma2, c, p):
    if s <= 0.0:
        gg = p
    else:
        s2 = s * s
        if s2 >= 1.0:
            gg = 1.0
        else:
            gg = -np.expm1(p * np.log1p(-s2)) / s2
    return 4.0 / np.sqrt(gamma2 * (2.0 - s * s) + c * gg)


_period_integrand = (
    njit(cache=True)(_period_integrand_impl) if NUMBA_ENABLED
    else _period_integrand_impl
)


def _gk15_impl(a, b, gamma2, c, p):
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    fk = 0.0
    fg = 0.0
    for i in range(8):
        x = _XGK[i]
        f1 = _period_integrand(mid - half * x, gamma2, c, p)
        if i < 7:
            f2 = _period_integrand(mid + half * x, gamma2, c, p)
            fk += _WGK[i] * (f1 + f2)
            if i % 2 == 1:
                fg += _WG[i // 2] * (f1 + f2)
        else:
            fk += _WGK[i] * f1
            fg += _WG[3] * f1
    return half * fk, abs(half * (fk - fg))


_gk15 = njit(cache=True)(_gk15_impl) if NUMBA_ENABLED else _gk15_impl


def _period_quadrature_impl(gamma2, c, p, rtol):
    # adaptive bisection with an explicit interval stack
    stack_a = np.empty(128)
    stack_b = np.empty(128)
    stack_a[0] = 0.0
    stack_b[0] = 1.0
    top = 0
    total = 0.0
    err_total = 0.0
    coarse, _ = _gk15(0.0, 1.0, gamma2, c, p)
    floor = rtol * abs(coarse)
    work = 0
    while top >= 0:
        a = stack_a[top]
        b = stack_b[top]
        top -= 1
        val, err = _gk15(a, b, gamma2, c, p)
        work += 1
        if work > 100000:
            return total, 1e300, False
        if err <= floor * (b - a) or (b - a) < 1e-14:
            total += val
            err_total += err
        else:
            m = 0.5 * (a + b)
            if top >= 125:
                return total, 1e300, False
            top += 1
            stack_a[top] = a
            stack_b[top] = m
            top += 1
            stack_a[top] = m
            stack_b[top] = b
    return total, err_total, True


period_quadrature = (
    njit(cache=True)(_period_quadrature_impl) if NUMBA_ENABLED
    else _period_quadrature_impl
)


# ---------------------------------------------------------------------------
# Cash-Karp RK45 integration of the circle ODE positive arc
#
#    phi'' = -gamma^2 phi - lam * (phi+)^(p-1)
#
# on a prescribed monotone output grid.  Steps are accepted only when both
# the embedded 4th/5th-order error estimate and the pointwise drift of the
# conserved level
#
#    H(phi, phi') = 0.5 phi'^2 + 0.5 gamma^2 phi^2 + (lam/p) (phi+)^p
#
# stay within budget; conservation of H is the global accuracy gauge.
# ---------------------------------------------------------------------------

def _arc_rhs_impl(phi, dphi, gamma2, lam, p):
    if phi > 0.0:
        if p == 1.0:
            f = lam
        else:
            f = lam * phi ** (p - 1.0)
    else:
        f = 0.0
    return dphi, -gamma2 * phi - f


def _ham_impl(phi, dphi, gamma2, lam, p):
    h = 0.5 * dphi * dphi + 0.5 * gamma2 * phi * phi
    if phi > 0.0:
        h += (lam / p) * phi**p
    return h


_arc_rhs = njit(cache=True)(_arc_rhs_impl) if NUMBA_ENABLED else _arc_rhs_impl
_ham = njit(cache=True)(_ham_impl) if NUMBA_ENABLED else _ham_impl


def _integrate_arc_impl(tgrid, phi0, dphi0, gamma2, lam, p, hlevel, rtol,
                        drift_cap, scale_phi, scale_dphi):
    m = tgrid.shape[0]
    phi = np.empty(m)
    dphi = np.empty(m)
    phi[0] = phi0
    dphi[0] = dphi0
    max_drift = abs(_ham(phi0, dphi0, gamma2, lam, p) - hlevel)
    y0 = phi0
    y1 = dphi0
    dt = tgrid[1] - tgrid[0] if m > 1 else 0.0
    for seg in range(m - 1):
        t = tgrid[seg]
        t_end = tgrid[seg + 1]
        guard = 0
        while t < t_end:
            guard += 1
            if guard > 2000000:
                return phi, dphi, 1e300, False
            step = dt
            if t + step > t_end:
                step = t_end - t
            # Cash-Karp stages
            k1a, k1b = _arc_rhs(y0, y1, gamma2, lam, p)
            k2a, k2b = _arc_rhs(
                y0 + step * 0.2 * k1a, y1 + step * 0.2 * k1b, gamma2, lam, p
            )
            k3a, k3b = _arc_rhs(
                y0 + step * (0.075 * k1a + 0.225 * k2a),
                y1 + step * (0.075 * k1b + 0.225 * k2b),
                gamma2, lam, p,
            )
            k4a, k4b = _arc_rhs(
                y0 + step * (0.3 * k1a - 0.9 * k2a + 1.2 * k3a),
                y1 + step * (0.3 * k1b - 0.9 * k2b + 1.2 * k3b),
                gamma2, lam, p,
            )
            k5a, k5b = _arc_rhs(
                y0 + step * (
                    -11.0 / 54.0 * k1a + 2.5 * k2a - 70.0 / 27.0 * k3a
                    + 35.0 / 27.0 * k4a
                ),
                y1 + step * (
                    -11.0 / 54.0 * k1b + 2.5 * k2b - 70.0 / 27.0 * k3b
                    + 35.0 / 27.0 * k4b
                ),
                gamma2, lam, p,
            )
            k6a, k6b = _arc_rhs(
                y0 + step * (
                    1631.0 / 55296.0 * k1a + 175.0 / 512.0 * k2a
                    + 575.0 / 13824.0 * k3a + 44275.0 / 110592.0 * k4a
                    + 253.0 / 4096.0 * k5a
                ),
                y1 + step * (
                    1631.0 / 55296.0 * k1b + 175.0 / 512.0 * k2b
                    + 575.0 / 13824.0 * k3b + 44275.0 / 110592.0 * k4b
                    + 253.0 / 4096.0 * k5b
                ),
                gamma2, lam, p,
            )
            y5a = y0 + step * (
                37.0 / 378.0 * k1a + 250.0 / 621.0 * k3a + 125.0 / 594.0 * k4a
                + 512.0 / 1771.0 * k6a
            )
            y5b = y1 + step * (
                37.0 / 378.0 * k1b + 250.0 / 621.0 * k3b + 125.0 / 594.0 * k4b
                + 512.0 / 1771.0 * k6b
            )
            y4a = y0 + step * (
                2825.0 / 27648.0 * k1a + 18575.0 / 48384.0 * k3a
                + 13525.0 / 55296.0 * k4a + 277.0 / 14336.0 * k5a + 0.25 * k6a
            )
            y4b = y1 + step * (
                2825.0 / 27648.0 * k1b + 18575.0 / 48384.0 * k3b
                + 13525.0 / 55296.0 * k4b + 277.0 / 14336.0 * k5b + 0.25 * k6b
            )
            err = max(
                abs(y5a - y4a) / scale_phi, abs(y5b - y4b) / scale_dphi
            )
            drift = abs(_ham(y5a, y5b, gamma2, lam, p) - hlevel)
            if err <= rtol and drift <= drift_cap:
                t += step
                y0 = y5a
                y1 = y5b
                if drift > max_drift:
                    max_drift = drift
                if err > 1e-300:
                    fac = 0.9 * (rtol / err) ** 0.2
                    if fac > 5.0:
                        fac = 5.0
                    dt = step * fac
                else:
                    dt = step * 5.0
            else:
                dt = step * 0.5
                if dt < 1e-15 * (tgrid[m - 1] - tgrid[0] + 1e-300):
                    return phi, dphi, 1e300, False
        phi[seg + 1] = y0
        dphi[seg + 1] = y1
    return phi, dphi, max_drift, True


integrate_arc = (
    njit(cache=True)(_integrate_arc_impl) if NUMBA_ENABLED
    else _integrate_arc_impl
)


# ---------------------------------------------------------------------------
# fused Armijo gradient-descent loop (numba path only; the numpy fallback
# drives the same iteration from Python, see disk_solver.minimize_with_trace)
# ---------------------------------------------------------------------------

def _energy_full_impl(values, inside, h2, lp, lm, p, q):
    n = values.shape[0]
    acc = 0.0
    comp = 0.0
    for i in range(n):
        for j in range(n - 1):
            if inside[i, j] and inside[i, j + 1]:
                d = values[i, j + 1] - values[i, j]
                y = 0.5 * d * d - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    for i in range(n - 1):
        for j in range(n):
            if inside[i, j] and inside[i + 1, j]:
                d = values[i + 1, j] - values[i, j]
                y = 0.5 * d * d - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    for i in range(n):
        for j in range(n):
            if inside[i, j]:
                v = values[i, j]
                if v > 0.0:
                    term = -h2 * (lp / p) * v**p
                elif v < 0.0 and lm > 0.0:
                    term = -h2 * (lm / q) * (-v) ** q
                else:
                    continue
                y = term - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
    return acc


_energy_full = (
    njit(cache=True)(_energy_full_impl) if NUMBA_ENABLED else _energy_full_impl
)


def _descent_loop_impl(values, interior, inside, h2, lp, lm, p, q,
                       grad_tol, max_iters, step0, backtrack, c1):
    n = values.shape[0]
    g = np.zeros((n, n))
    trial = values.copy()
    energies = np.empty(max_iters + 1)
    E = _energy_full(values, inside, h2, lp, lm, p, q)
    energies[0] = E
    step = step0
    it = 0
    converged = False
    gsup = 1e300
    while it < max_iters:
        gsup = 0.0
        gnorm2 = 0.0
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                if interior[i, j]:
                    v = values[i, j]
                    if v > 0.0:
                        if p == 1.0:
                            f = lp
                        else:
                            f = lp * v ** (p - 1.0)
                    elif v < 0.0 and lm > 0.0:
                        f = -lm * (-v) ** (q - 1.0)
                    else:
                        f = 0.0
                    gg = (
                        4.0 * v
                        - values[i - 1, j] - values[i + 1, j]
                        - values[i, j - 1] - values[i, j + 1]
                        - h2 * f
                    )
                    g[i, j] = gg
                    a = abs(gg)
                    if a > gsup:
                        gsup = a
                    gnorm2 += gg * gg
        if gsup < grad_tol:
            converged = True
            break
        step = step / backtrack
        Et = E
        while True:
            for i in range(1, n - 1):
                for j in range(1, n - 1):
                    if interior[i, j]:
                        trial[i, j] = values[i, j] - step * g[i, j]
            Et = _energy_full(trial, inside, h2, lp, lm, p, q)
            if Et <= E - c1 * step * gnorm2:
                break
            step *= backtrack
            if step < 1e-20:
                break
        if step < 1e-20:
            break
        for i in range(1, n - 1):
            for j in range(1, n - 1):
                if interior[i, j]:
                    values[i, j] = trial[i, j]
        E = Et
        it += 1
        energies[it] = E
    return values, it, converged, gsup, energies[: it + 1]


descent_loop = (
    njit(cache=True)(_descent_loop_impl) if NUMBA_ENABLED else _descent_loop_impl
)
