"""Classification of planar homogeneous solutions via the circle ODE.

A gamma_p-homogeneous solution u(r, theta) = r^gamma_p phi(theta) of the
single-phase equation reduces to the periodic ODE

    -phi'' - gamma_p^2 phi = lambda_plus (phi+)^(p-1)   on [0, 2*pi].

Every solution is built from one fundamental cell of length T_k = 2*pi/k:
a pure-sine negative arc of exact opening theta_p = pi/gamma_p followed by
a positive arc whose length T(M) is a strictly increasing function of its
maximum M.  Admissible wave numbers are the integers strictly between
gamma_p and 2*gamma_p, each carrying exactly one profile with 2k zeros.
"""

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import _kernels
from .grid import GridField, make_field
from .model import (
    InvalidParameters,
    Parameters,
    admissible_wave_numbers,
    exponents,
)


class OutOfRangeError(ValueError):
    """Argument outside the mathematically admissible window."""


class BracketFailureError(RuntimeError):
    """Geometric bracket growth failed to enclose the target."""


class QuadratureFailureError(RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class IntegrationFailureError(RuntimeError):
    """Arc integration exceeded its conserved-level drift budget."""


#: accepted relative drift of the conserved level along one integrated arc
DRIFT_CAP_REL = 3e-9


@dataclass
class AngularProfile:
    """One homogeneous profile sampled on [0, 2*pi].

    ``thetas`` is uniform with ``samples_per_cell`` nodes per fundamental
    cell and a closing node at 2*pi.  ``h`` is the conserved level of
    0.5 phi'^2 + 0.5 gamma_p^2 phi^2 + (lambda_plus/p) (phi+)^p,
    ``amplitude_A`` the negative-arc amplitude and ``max_M`` the
    positive-arc maximum.
    """

    thetas: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    k: int
    h: float
    amplitude_A: float
    max_M: float

    @property
    def samples_per_cell(self):
        return (len(self.thetas) - 1) // self.k

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theta", "phi", "dphi"])
            for t, v, d in zip(self.thetas, self.values, self.derivs):
                w.writerow(
                    [format(t, ".17g"), format(v, ".17g"), format(d, ".17g")]
                )


@dataclass
class ClassificationReport:
    params: Parameters
    profiles: list
    residual_max: float

    def to_dict(self):
        ex = exponents(self.params)
        d = {
            "p": self.params.p,
            "lambda_plus": self.params.lambda_plus,
            "gamma_p": ex.gamma_p,
            "ks": [pr.k for pr in self.profiles],
            "zeros": [count_zeros(pr) for pr in self.profiles],
            "h": [pr.h for pr in self.profiles],
            "residual_max": self.residual_max,
        }
        if self.params.q is not None:
            d["q"] = self.params.q
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# scalar building blocks
# ---------------------------------------------------------------------------

def hamiltonian_level(phi, dphi, params: Parameters):
    """Conserved level 0.5 phi'^2 + 0.5 gamma_p^2 phi^2 + (l+/p)(phi+)^p."""
    ex = exponents(params)
    pos = max(phi, 0.0)
    return (
        0.5 * dphi * dphi
        + 0.5 * ex.gamma_p**2 * phi * phi
        + (params.lambda_plus / params.p) * pos**params.p
    )


def level_from_max(M, params: Parameters):
    """Level of the arc whose maximum is M (where phi' = 0)."""
    ex = exponents(params)
    return (
        0.5 * ex.gamma_p**2 * M * M
        + (params.lambda_plus / params.p) * M**params.p
    )


def period_map(M, params: Parameters, rtol=1e-12):
    """Length T(M) of the positive arc with maximum M, for p > 1.

    The defining integral has an inverse-square-root endpoint singularity;
    the substitution t = 1 - s^2 removes it analytically and the smooth
    transformed integrand is handled by adaptive Gauss-Kronrod refinement.
    T is strictly increasing with range (0, theta_p).
    """
    if params.p <= 1.0:
        raise OutOfRangeError("period map requires p > 1")
    if M <= 0.0:
        raise OutOfRangeError(f"M must be positive, got {M}")
    if params.lambda_plus <= 0.0:
        raise InvalidParameters("period map requires lambda_plus > 0")
    ex = exponents(params)
    c = 2.0 * params.lambda_plus / (params.p * M ** (2.0 - params.p))
    val, err, ok = _kernels.period_quadrature(
        ex.gamma_p**2, c, params.p, rtol
    )
    if not ok:
        raise QuadratureFailureError(
            f"period quadrature did not converge at M={M}"
        )
    return val


def invert_period(T_target, params: Parameters, rtol=1e-12):
    """The unique M with period_map(M) = T_target, for T_target in (0, theta_p).

    Bisection on log M over a bracket grown geometrically from [1e-8, 1e8];
    monotonicity of T makes the root unique.
    """
    ex = exponents(params)
    if not (0.0 < T_target < ex.theta_p):
        raise OutOfRangeError(
            f"target arc length {T_target} outside (0, {ex.theta_p})"
        )
    lo, hi = 1e-8, 1e8
    for _ in range(80):
        if period_map(lo, params, rtol) < T_target:
            break
        lo *= 1e-4
        if lo < 1e-290:
            raise BracketFailureError("lower bracket underflow")
    else:
        raise BracketFailureError("could not bracket from below")
    for _ in range(80):
        if period_map(hi, params, rtol) > T_target:
            break
        hi *= 1e4
        if hi > 1e290:
            raise BracketFailureError("upper bracket overflow")
    else:
        raise BracketFailureError("could not bracket from above")
    llo, lhi = math.log(lo), math.log(hi)
    for _ in range(120):
        lmid = 0.5 * (llo + lhi)
        if period_map(math.exp(lmid), params, rtol) < T_target:
            llo = lmid
        else:
            lhi = lmid
        if lhi - llo < 5e-15 * max(1.0, abs(lhi) + abs(llo)):
            break
    return math.exp(0.5 * (llo + lhi))


@dataclass
class PositiveArc:
    thetas: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    M: float
    h: float
    T: float
    max_drift: float


def solve_positive_arc(M, params: Parameters, steps=4096, rtol=1e-13):
    """Integrate the positive arc phi(0) = 0, phi'(0) = sqrt(2h) over [0, T(M)].

    Embedded 4th/5th-order Runge-Kutta; a step is accepted only when the
    local error estimate and the drift of the conserved level both stay
    within budget, so conservation is the global accuracy gauge.
    """
    if M <= 0.0:
        raise OutOfRangeError(f"M must be positive, got {M}")
    T = period_map(M, params)
    h = level_from_max(M, params)
    ex = exponents(params)
    dphi0 = math.sqrt(2.0 * h)
    tgrid = np.linspace(0.0, T, steps + 1)
    phi, dphi, drift, ok = _kernels.integrate_arc(
        tgrid, 0.0, dphi0, ex.gamma_p**2, params.lambda_plus, params.p,
        h, rtol, DRIFT_CAP_REL * h, max(M, 1e-300), dphi0,
    )
    if not ok or drift > 1e-8 * h:
        raise IntegrationFailureError(
            f"conserved-level drift {drift:.3e} exceeds budget at M={M}"
        )
    return PositiveArc(tgrid, phi, dphi, M, h, T, drift)


# ---------------------------------------------------------------------------
# profile assembly
# ---------------------------------------------------------------------------

def _closed_form_arc_p1(lam, T_plus, svals):
    # for p = 1 the positive arc solves the linear problem
    # phi'' = -4 phi - lam (gamma_p = 2), with phi(0) = 0 = phi(T_plus)
    a = lam / 4.0
    b = (lam / 4.0) * math.tan(T_plus)
    phi = a * np.cos(2.0 * svals) + b * np.sin(2.0 * svals) - lam / 4.0
    dphi = -2.0 * a * np.sin(2.0 * svals) + 2.0 * b * np.cos(2.0 * svals)
    M = (lam / 4.0) * (1.0 - math.cos(T_plus)) / math.cos(T_plus)
    h = 0.5 * (2.0 * b) ** 2
    return phi, dphi, M, h


def build_profile(k, params: Parameters, samples=4096, rtol=1e-13):
    """The unique profile with wave number k: negative sine arc of opening
    theta_p, positive arc of length T_k - theta_p, matched C^1 and tiled
    k times over [0, 2*pi]."""
    if params.lambda_plus <= 0.0:
        raise InvalidParameters("profiles require lambda_plus > 0")
    ks = admissible_wave_numbers(params)
    if k not in ks:
        raise OutOfRangeError(
            f"k={k} outside the admissible window {ks} for p={params.p}"
        )
    ex = exponents(params)
    gamma = ex.gamma_p
    T_k = 2.0 * math.pi / k
    T_plus = T_k - ex.theta_p
    cell_t = np.linspace(0.0, T_k, samples + 1)
    neg = cell_t <= ex.theta_p
    pos_t = cell_t[~neg]

    if params.p == 1.0:
        phi_pos, dphi_pos, M, h = _closed_form_arc_p1(
            params.lambda_plus, T_plus, pos_t - ex.theta_p
        )
    else:
        M = invert_period(T_plus, params)
        h = level_from_max(M, params)
        tgrid = np.concatenate(([0.0], pos_t - ex.theta_p))
        phi, dphi, drift, ok = _kernels.integrate_arc(
            tgrid, 0.0, math.sqrt(2.0 * h), gamma**2, params.lambda_plus,
            params.p, h, rtol, DRIFT_CAP_REL * h, max(M, 1e-300),
            math.sqrt(2.0 * h),
        )
        if not ok or drift > 1e-8 * h:
            raise IntegrationFailureError(
                f"drift {drift:.3e} exceeds budget for k={k}, p={params.p}"
            )
        phi_pos, dphi_pos = phi[1:], dphi[1:]

    A = math.sqrt(2.0 * h) / gamma
    phi_cell = np.empty(samples + 1)
    dphi_cell = np.empty(samples + 1)
    phi_cell[neg] = -A * np.sin(gamma * cell_t[neg])
    dphi_cell[neg] = -A * gamma * np.cos(gamma * cell_t[neg])
    phi_cell[~neg] = phi_pos
    dphi_cell[~neg] = dphi_pos

    thetas = np.concatenate(
        [cell_t[:-1] + i * T_k for i in range(k)] + [[2.0 * math.pi]]
    )
    values = np.concatenate([phi_cell[:-1]] * k + [[phi_cell[-1]]])
    derivs = np.concatenate([dphi_cell[:-1]] * k + [[dphi_cell[-1]]])
    return AngularProfile(
        thetas=thetas, values=values, derivs=derivs, k=k, h=h,
        amplitude_A=A, max_M=M,
    )


def classify(params: Parameters, samples=4096) -> ClassificationReport:
    """All homogeneous profiles of one parameter set, one per admissible k."""
    if not (1.0 <= params.p < 2.0):
        raise InvalidParameters(f"classification requires p in [1, 2)")
    profiles = [
        build_profile(k, params, samples) for k in admissible_wave_numbers(params)
    ]
    residual_max = max(
        (ode_residual(pr, params) for pr in profiles), default=0.0
    )
    return ClassificationReport(
        params=params, profiles=profiles, residual_max=residual_max
    )


# ---------------------------------------------------------------------------
# diagnostics on profiles
# ---------------------------------------------------------------------------

def hamiltonian_drift(profile: AngularProfile, params: Parameters):
    """max |H(phi, phi') - h| / h over all samples."""
    ex = exponents(params)
    pos = np.maximum(profile.values, 0.0)
    H = (
        0.5 * profile.derivs**2
        + 0.5 * ex.gamma_p**2 * profile.values**2
        + (params.lambda_plus / params.p) * pos**params.p
    )
    return float(np.max(np.abs(H - profile.h)) / profile.h)


def matching_defect(profile: AngularProfile):
    """|phi'(0+) - phi'(T_k-)|: the two one-sided slopes at the shared cell
    endpoint must agree for the k-periodic extension to be C^1."""
    return abs(profile.derivs[0] - profile.derivs[-1])


def profile_zeros(profile: AngularProfile):
    """Zero locations in [0, 2*pi), refined on a cubic Hermite interpolant
    of the bracketing interval (both phi and phi' are stored at nodes)."""
    t = profile.thetas
    v = profile.values
    d = profile.derivs
    zeros = []
    for i in range(len(v) - 1):
        a, b = v[i], v[i + 1]
        if a == 0.0:
            zeros.append(t[i])
        elif a * b < 0.0:
            dt = t[i + 1] - t[i]

            def hermite(s):
                s2, s3 = s * s, s * s * s
                return (
                    (2 * s3 - 3 * s2 + 1) * a
                    + (s3 - 2 * s2 + s) * dt * d[i]
                    + (-2 * s3 + 3 * s2) * b
                    + (s3 - s2) * dt * d[i + 1]
                )

            slo, shi = 0.0, 1.0
            flo = a
            for _ in range(60):
                smid = 0.5 * (slo + shi)
                fm = hermite(smid)
                if fm == 0.0:
                    slo = shi = smid
                    break
                if (flo < 0) == (fm < 0):
                    slo, flo = smid, fm
                else:
                    shi = smid
            zeros.append(t[i] + dt * 0.5 * (slo + shi))
    return np.array(zeros)


def count_zeros(profile: AngularProfile):
    """Sign changes per period, cyclically (node-exact zeros count once)."""
    v = profile.values[:-1]
    signs = np.sign(v)
    signs = signs[signs != 0.0]
    if len(signs) == 0:
        return 0
    flips = np.count_nonzero(signs != np.roll(signs, 1))
    return int(flips)


def negative_arc_lengths(profile: AngularProfile):
    """Lengths of the maximal arcs where phi < 0 (cyclically)."""
    zs = profile_zeros(profile)
    if len(zs) < 2:
        return np.array([])
    lengths = []
    two_pi = 2.0 * math.pi
    for j in range(len(zs)):
        a = zs[j]
        b = zs[(j + 1) % len(zs)]
        span = (b - a) % two_pi
        if span == 0.0:
            continue
        mid = (a + 0.5 * span) % two_pi
        val = np.interp(mid, profile.thetas, profile.values)
        if val < 0.0:
            lengths.append(span)
    return np.array(lengths)


def ode_residual(profile: AngularProfile, params: Parameters,
                 exclusion_angle=None):
    """Max centered-second-difference residual of the circle ODE.

    Nodes close to sign changes are excluded: there the reaction term is
    only Hoelder continuous and pointwise second differences would
    spuriously dominate.  The default exclusion radius is a fixed fraction
    of the cell (>= 1.5 grid steps), which makes the reported residual
    converge at second order under refinement.
    """
    ex = exponents(params)
    t = profile.thetas
    v = profile.values
    dt = t[1] - t[0]
    if exclusion_angle is None:
        cell = 2.0 * math.pi / profile.k
        exclusion_angle = max(1.5 * dt, cell / 128.0)
    d2 = (v[:-2] - 2.0 * v[1:-1] + v[2:]) / (dt * dt)
    mid = v[1:-1]
    pos = np.maximum(mid, 0.0)
    if params.p == 1.0:
        reaction = params.lambda_plus * (mid > 0.0)
    else:
        reaction = params.lambda_plus * pos ** (params.p - 1.0)
    resid = np.abs(-d2 - ex.gamma_p**2 * mid - reaction)
    zs = profile_zeros(profile)
    if len(zs):
        tm = t[1:-1]
        keep = np.ones(len(tm), dtype=bool)
        two_pi = 2.0 * math.pi
        for z in zs:
            dist = np.abs((tm - z + math.pi) % two_pi - math.pi)
            keep &= dist > exclusion_angle
        resid = resid[keep]
    return float(np.max(resid)) if len(resid) else 0.0


# ---------------------------------------------------------------------------
# planar extension
# ---------------------------------------------------------------------------

def extend_to_plane(profile: AngularProfile, params: Parameters, N,
                    half_width=1.0) -> GridField:
    """Sample r^gamma_p phi(theta) on the grid (all nodes, analytic values).

    Angular values between profile samples come from a periodic cubic
    spline of the profile.
    """
    ex = exponents(params)
    vals = profile.values.copy()
    vals[-1] = vals[0]
    spline = CubicSpline(profile.thetas, vals, bc_type="periodic")
    f = make_field(N, half_width, "disk")
    X, Y = f.meshgrid()
    r = np.hypot(X, Y)
    th = np.mod(np.arctan2(Y, X), 2.0 * math.pi)
    f.values[:] = r**ex.gamma_p * spline(th)
    c = f.origin_index
    f.values[c, c] = 0.0
    ri, rj = f.ring_indices()
    f.trace = f.values[ri, rj].copy()
    return f
