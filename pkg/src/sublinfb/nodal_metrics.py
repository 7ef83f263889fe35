"""Radial diagnostics on grid fields: boundary mass, Dirichlet-plus-potential
term, Weiss functionals and their derivative identity, vanishing-order fits,
blow-up rescalings and singular-set detection.

Conventions (n is the ambient dimension, 2 on these grids):

    H(u, x0, r)   = int_{dB_r(x0)} u^2 dsigma
    D_t(u, x0, r) = int_{B_r(x0)} ( |grad u|^2 - t * F(u) ) dx,
                    F(u) = (l+/p)(u+)^p + (l-/q)(u-)^q
    W_{gamma,t}   = r^-(n-2+2 gamma) D_t  -  gamma r^-(n-1+2 gamma) H

Circle integrals use the angular trapezoid rule on interpolated samples
(spectrally accurate for smooth integrands, oversampled 4x against the grid
so that interpolation wiggles average out).  The Weiss value is a strong
cancellation between its two terms, which amplifies quadrature bias; the
samplers therefore use 4-point Lagrange (cubic) interpolation and
fourth-order centered gradients, and ball integrals use node-cell weights
with 16x16 subsampling of the cells crossed by the circle.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .grid import EXTERIOR, GridField, make_field
from .model import Parameters, exponents


class BallOutsideDomainError(ValueError):
    """Requested ball does not fit inside the field's domain."""


class WindowOutsideDomainError(ValueError):
    """Blow-up window maps outside the field's domain."""


class NormalizationUnderflowError(ArithmeticError):
    """Boundary mass underflowed; normalized rescaling undefined."""


class DegenerateFitError(ValueError):
    """Too few usable radii for a log-log slope fit."""


#: angular oversampling beyond one sample per crossed grid cell
ANGULAR_OVERSAMPLE = 4


@dataclass
class RadialTrace:
    center: tuple
    radii: np.ndarray
    H: np.ndarray
    D: np.ndarray
    W: np.ndarray
    gamma: float
    t: float
    corrected: np.ndarray | None = None
    correction_constant: float | None = None
    correction_exponent: float | None = None


@dataclass
class OrderEstimate:
    order: float
    fit_residual: float
    radii: np.ndarray
    log_mass: np.ndarray


@dataclass
class BlowupSequence:
    center: tuple
    radii: np.ndarray
    fields: list
    mode: str
    h_r: np.ndarray


@dataclass
class SingularSetReport:
    singular: np.ndarray   # (m, 2) coordinates with u and grad u below tol
    regular: np.ndarray    # (m, 2) nodal candidates with gradient above tol
    eps_u: float
    eps_grad: float
    rows: list             # (x, y, |u|, |grad u|, tag) for CSV export


def _check_ball(f: GridField, center, r):
    if r <= 0.0:
        raise BallOutsideDomainError(f"radius must be positive, got {r}")
    if r > f.boundary_distance(center) * (1.0 + 1e-12):
        raise BallOutsideDomainError(
            f"ball of radius {r} at {center} leaves the domain "
            f"(distance to boundary {f.boundary_distance(center)})"
        )


def _circle_samples(f: GridField, center, r, m=None):
    if m is None:
        m = max(64, int(math.ceil(ANGULAR_OVERSAMPLE * 2.0 * math.pi * r
                                  / f.spacing)))
    ang = np.linspace(0.0, 2.0 * math.pi, m, endpoint=False)
    xs = center[0] + r * np.cos(ang)
    ys = center[1] + r * np.sin(ang)
    return ang, xs, ys


def boundary_mass(u: GridField, center, r) -> float:
    """H(u, center, r): squared boundary trace mass on the circle."""
    _check_ball(u, center, r)
    _, xs, ys = _circle_samples(u, center, r)
    vals = _kernels.cubic_gather(u.values, u.spacing, xs, ys)
    return float(2.0 * math.pi * r * np.mean(vals * vals))


def _gradient_arrays(u: GridField):
    """Centered differences, fourth order away from the array edge."""
    h = u.spacing
    v = u.values
    gx = np.empty_like(v)
    gy = np.empty_like(v)
    gx[:, 2:-2] = (-v[:, 4:] + 8.0 * v[:, 3:-1]
                   - 8.0 * v[:, 1:-3] + v[:, :-4]) / (12.0 * h)
    gx[:, 1] = (v[:, 2] - v[:, 0]) / (2.0 * h)
    gx[:, -2] = (v[:, -1] - v[:, -3]) / (2.0 * h)
    gx[:, 0] = (v[:, 1] - v[:, 0]) / h
    gx[:, -1] = (v[:, -1] - v[:, -2]) / h
    gy[2:-2, :] = (-v[4:, :] + 8.0 * v[3:-1, :]
                   - 8.0 * v[1:-3, :] + v[:-4, :]) / (12.0 * h)
    gy[1, :] = (v[2, :] - v[0, :]) / (2.0 * h)
    gy[-2, :] = (v[-1, :] - v[-3, :]) / (2.0 * h)
    gy[0, :] = (v[1, :] - v[0, :]) / h
    gy[-1, :] = (v[-1, :] - v[-2, :]) / h
    return gx, gy


def _radial_rule(r, h):
    """Gauss-Legendre nodes/weights on [0, r]; enough nodes that the rule
    resolves the radial structure down to a few grid cells."""
    n = int(min(192, max(48, math.ceil(4.0 * r / h))))
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * r * (x + 1.0), 0.5 * r * w


def ball_integral(u: GridField, center, r, integrand) -> float:
    """Quadrature of a node-value ``integrand`` array over the ball: radial
    Gauss-Legendre composed with the oversampled angular trapezoid rule,
    cubic interpolation of the integrand at the sample points.

    A plain cell-weighted node sum carries the midpoint rule's O(h^2) bias,
    which the strong two-term cancellation inside the Weiss combination
    amplifies past its tolerance; composing the two one-dimensional rules
    with the same interpolator used for the boundary mass keeps the
    combination's net bias negligible."""
    _check_ball(u, center, r)
    integrand = np.ascontiguousarray(integrand, dtype=float)
    rho, wts = _radial_rule(r, u.spacing)
    total = 0.0
    for rr, ww in zip(rho, wts):
        _, xs, ys = _circle_samples(u, center, rr)
        vals = _kernels.cubic_gather(integrand, u.spacing, xs, ys)
        total += ww * 2.0 * math.pi * rr * float(np.mean(vals))
    return total


def _potential_density(values, params: Parameters):
    pos = np.maximum(values, 0.0)
    out = (params.lambda_plus / params.p) * pos**params.p
    if params.lambda_minus > 0.0:
        neg = np.maximum(-values, 0.0)
        out = out + (params.lambda_minus / params.q) * neg**params.q
    return out


def dirichlet_term(u: GridField, center, r, t, params: Parameters) -> float:
    """D_t(u, center, r) with centered-difference gradients."""
    gx, gy = _gradient_arrays(u)
    dens = gx * gx + gy * gy
    if t != 0.0:
        dens = dens - t * _potential_density(u.values, params)
    return ball_integral(u, center, r, dens)


def weiss(u: GridField, center, r, gamma, t, params: Parameters) -> float:
    """W_{gamma,t}(u, center, r): radius-rescaled Dirichlet term minus
    gamma times the rescaled boundary mass."""
    n = params.n
    D = dirichlet_term(u, center, r, t, params)
    H = boundary_mass(u, center, r)
    return D / r ** (n - 2 + 2 * gamma) - gamma * H / r ** (n - 1 + 2 * gamma)


def radial_trace(u: GridField, center, radii, gamma, t,
                 params: Parameters) -> RadialTrace:
    radii = np.asarray(radii, dtype=float)
    H = np.array([boundary_mass(u, center, r) for r in radii])
    D = np.array([dirichlet_term(u, center, r, t, params) for r in radii])
    n = params.n
    W = D / radii ** (n - 2 + 2 * gamma) - gamma * H / radii ** (n - 1 + 2 * gamma)
    return RadialTrace(
        center=tuple(center), radii=radii, H=H, D=D, W=W, gamma=gamma, t=t
    )


def weiss_derivative_identity(u: GridField, center, r, gamma, t,
                              params: Parameters):
    """(lhs, rhs): centered finite difference of W in r against the
    boundary-plus-bulk formula

        dW/dr = 2 r^-(n-2+2g) Int_{dB_r} (d_r u - g u / r)^2
              + (2-t) r^-(n-2+2g) Int_{dB_r} F(u)
              - (C - 2g(t-p)) / (p r^(n-1+2g)) Int_{B_r} l+ (u+)^p
              - (C - 2g(t-q)) / (q r^(n-1+2g)) Int_{B_r} l- (u-)^q,

    C = 2n - t(n-2).  The radial derivative is a directional centered
    difference with step equal to the grid spacing.
    """
    n = params.n
    h = u.spacing
    delta = 2.0 * h
    wp = weiss(u, center, r + delta, gamma, t, params)
    wm = weiss(u, center, r - delta, gamma, t, params)
    lhs = (wp - wm) / (2.0 * delta)

    ang, xs, ys = _circle_samples(u, center, r)
    ux = np.cos(ang)
    uy = np.sin(ang)
    up = _kernels.cubic_gather(u.values, h, xs + h * ux, ys + h * uy)
    um = _kernels.cubic_gather(u.values, h, xs - h * ux, ys - h * uy)
    du_r = (up - um) / (2.0 * h)
    vals = _kernels.cubic_gather(u.values, h, xs, ys)
    circ = 2.0 * math.pi * r
    term1 = (
        2.0 / r ** (n - 2 + 2 * gamma)
        * circ * np.mean((du_r - gamma * vals / r) ** 2)
    )
    term2 = (
        (2.0 - t) / r ** (n - 2 + 2 * gamma)
        * circ * np.mean(_potential_density(vals, params))
    )
    C = 2.0 * n - t * (n - 2.0)
    pos_int = ball_integral(
        u, center, r,
        params.lambda_plus * np.maximum(u.values, 0.0) ** params.p,
    )
    term3 = -(C - 2.0 * gamma * (t - params.p)) / (
        params.p * r ** (n - 1 + 2 * gamma)
    ) * pos_int
    term4 = 0.0
    if params.lambda_minus > 0.0:
        neg_int = ball_integral(
            u, center, r,
            params.lambda_minus * np.maximum(-u.values, 0.0) ** params.q,
        )
        term4 = -(C - 2.0 * gamma * (t - params.q)) / (
            params.q * r ** (n - 1 + 2 * gamma)
        ) * neg_int
    return lhs, term1 + term2 + term3 + term4


def corrected_weiss(u: GridField, center, radii, params: Parameters,
                    epsilon) -> RadialTrace:
    """W_{gamma_p,2}(r) plus the correction C r^(gamma_p (q-p) + eps q),
    with C the smallest nonnegative constant making the sampled sequence
    non-decreasing (reported, not assumed)."""
    ex = exponents(params)
    trace = radial_trace(u, center, radii, ex.gamma_p, 2.0, params)
    if params.lambda_minus > 0.0 and params.q is not None:
        expo = ex.gamma_p * (params.q - params.p) + epsilon * params.q
    else:
        expo = 0.0
    C = 0.0
    if expo > 0.0:
        r = trace.radii
        W = trace.W
        for i in range(len(r) - 1):
            drop = W[i] - W[i + 1]
            gap = r[i + 1] ** expo - r[i] ** expo
            if drop > 0.0 and gap > 0.0:
                C = max(C, drop / gap)
    trace.corrected = trace.W + C * trace.radii**expo
    trace.correction_constant = C
    trace.correction_exponent = expo
    return trace


def vanishing_order(u: GridField, center, r_min, r_max) -> OrderEstimate:
    """Least-squares slope of log(H(r)/r^(n-1)) against log r over dyadic
    radii in [r_min, r_max], divided by 2 (planar grids, n = 2)."""
    radii = []
    r = float(r_min)
    while r <= r_max * (1.0 + 1e-9):
        radii.append(r)
        r *= 2.0
    radii = np.asarray(radii)
    H = np.array([boundary_mass(u, center, rr) for rr in radii])
    ok = H > 1e-290
    if np.count_nonzero(ok) < 2:
        raise DegenerateFitError(
            "boundary mass underflowed at the sampled radii"
        )
    radii = radii[ok]
    y = np.log(H[ok] / radii)
    x = np.log(radii)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    fit = A @ coef
    resid = float(np.sqrt(np.mean((fit - y) ** 2)))
    return OrderEstimate(
        order=float(coef[0] / 2.0), fit_residual=resid, radii=radii,
        log_mass=y,
    )


# ---------------------------------------------------------------------------
# blow-up rescalings
# ---------------------------------------------------------------------------

#: half-width of the reference window the rescaled fields live on
WINDOW_HALF_WIDTH = 2.0


def blowup(u: GridField, center, r, mode, params: Parameters,
           N_out=None) -> GridField:
    """Rescaled field on the fixed reference window [-2, 2]^2.

    natural mode:    r^(-gamma_p) u(center + r x)
    normalized mode: u(center + r x) / h_r  with the normalization scalar
    h_r computed as the square root of the resampled window's own unit-circle
    boundary mass, so the defining property ||u~||_{L^2(dB_1)} = 1 holds
    exactly in the measuring quadrature (it equals sqrt(H(u,x0,r)/r^(n-1))
    up to the quadrature's discretization error).
    """
    if mode not in ("natural", "normalized"):
        raise ValueError(f"unknown blow-up mode {mode!r}")
    if 2.0 * r >= u.boundary_distance(center):
        raise WindowOutsideDomainError(
            f"window of radius {2*r} at {center} leaves the domain"
        )
    N_out = N_out or u.N
    out = make_field(N_out, WINDOW_HALF_WIDTH, "square")
    X, Y = out.meshgrid()
    xs = center[0] + r * X.ravel()
    ys = center[1] + r * Y.ravel()
    vals = _kernels.cubic_gather(u.values, u.spacing, xs, ys)
    out.values = vals.reshape(N_out, N_out)
    if mode == "natural":
        ex = exponents(params)
        out.values /= r**ex.gamma_p
    else:
        mass = boundary_mass(out, (0.0, 0.0), 1.0)
        if mass < 1e-280:
            raise NormalizationUnderflowError(
                f"boundary mass {mass} underflowed at r={r}"
            )
        out.values /= math.sqrt(mass)
    ri, rj = out.ring_indices()
    out.trace = out.values[ri, rj].copy()
    return out


def blowup_h_r(u: GridField, center, r, params: Parameters) -> float:
    """The normalization scalar sqrt(H(u, center, r) / r^(n-1))."""
    return math.sqrt(boundary_mass(u, center, r) / r ** (params.n - 1))


def blowup_sequence(u: GridField, center, radii, mode,
                    params: Parameters) -> BlowupSequence:
    radii = np.asarray(sorted(radii, reverse=True), dtype=float)
    fields = [blowup(u, center, r, mode, params) for r in radii]
    h_r = np.array([blowup_h_r(u, center, r, params) for r in radii])
    return BlowupSequence(
        center=tuple(center), radii=radii, fields=fields, mode=mode, h_r=h_r
    )


def scaled_negative_coefficient(params: Parameters, r) -> float:
    """Negative-phase coefficient of the equation satisfied by the natural
    blow-up at scale r: r^((q-p) gamma_p) * lambda_minus."""
    if params.lambda_minus == 0.0 or params.q is None:
        return 0.0
    ex = exponents(params)
    return r ** ((params.q - params.p) * ex.gamma_p) * params.lambda_minus


def blowup_params(params: Parameters, r) -> Parameters:
    """Parameters of the equation the natural blow-up at scale r solves."""
    return Parameters(
        p=params.p,
        lambda_plus=params.lambda_plus,
        lambda_minus=scaled_negative_coefficient(params, r),
        q=params.q,
        n=params.n,
    )


# ---------------------------------------------------------------------------
# nodal / singular set detection
# ---------------------------------------------------------------------------

def default_nodal_thresholds(u: GridField, params: Parameters):
    """(eps_u, eps_grad) tied to the vanishing scale of the solution class:
    10 h^min(gamma_p, 2) for values, 10 h for gradients."""
    ex = exponents(params)
    h = u.spacing
    return 10.0 * h ** min(ex.gamma_p, 2.0), 10.0 * h


def singular_set(u: GridField, eps_u, eps_grad) -> SingularSetReport:
    """Interior nodes with |u| < eps_u, split by |grad u| below/above
    eps_grad into singular points and regular-set candidates."""
    gx, gy = _gradient_arrays(u)
    gnorm = np.hypot(gx, gy)
    interior = u.mask == 0
    nodal = interior & (np.abs(u.values) < eps_u)
    sing = nodal & (gnorm < eps_grad)
    reg = nodal & (gnorm >= eps_grad)
    x = u.coords
    rows = []
    pts = {True: [], False: []}
    for flag, sel in ((True, sing), (False, reg)):
        ii, jj = np.where(sel)
        for i, j in zip(ii, jj):
            rows.append(
                (x[j], x[i], abs(u.values[i, j]), gnorm[i, j],
                 "singular" if flag else "regular")
            )
            pts[flag].append((x[j], x[i]))
    return SingularSetReport(
        singular=np.asarray(pts[True]).reshape(-1, 2),
        regular=np.asarray(pts[False]).reshape(-1, 2),
        eps_u=eps_u,
        eps_grad=eps_grad,
        rows=rows,
    )


# ---------------------------------------------------------------------------
# degeneracy probe at a nodal point
# ---------------------------------------------------------------------------

def sup_ratio_profile(u: GridField, center, radii, params: Parameters):
    """sup_{B_r} |u| / r^gamma_p over the given radii (ascending)."""
    ex = exponents(params)
    radii = np.asarray(sorted(radii), dtype=float)
    x = u.coords
    X, Y = np.meshgrid(x, x, indexing="xy")
    dist = np.hypot(X - center[0], Y - center[1])
    out = []
    for r in radii:
        sel = (dist <= r) & (u.mask != EXTERIOR)
        out.append(float(np.max(np.abs(u.values[sel]))) / r**ex.gamma_p)
    return radii, np.asarray(out)


def degeneracy_report(u: GridField, center, r_min, r_max, params: Parameters):
    """Finite proxy for degeneracy at a nodal point: the fitted vanishing
    order must exceed gamma_p + 0.2 AND sup_{B_r}|u| / r^gamma_p must
    decrease towards r -> 0 across the dyadic radii.  Both sub-criteria are
    reported separately; the asymptotic notion itself is not decidable on a
    grid."""
    ex = exponents(params)
    est = vanishing_order(u, center, r_min, r_max)
    radii, ratios = sup_ratio_profile(u, center, est.radii, params)
    ratio_decreasing = bool(np.all(np.diff(ratios) > 0.0))
    order_exceeds = bool(est.order > ex.gamma_p + 0.2)
    return {
        "order": est.order,
        "fit_residual": est.fit_residual,
        "order_exceeds_gamma_p": order_exceeds,
        "sup_ratio_radii": radii.tolist(),
        "sup_ratios": ratios.tolist(),
        "ratio_decreasing_to_zero": ratio_decreasing,
        "degenerate_proxy": order_exceeds and ratio_decreasing,
        "gamma_p": ex.gamma_p,
    }
