"""Discrete solutions on the unit disk.

Two engines:

* ``minimize_with_trace`` - projected gradient descent with Armijo
  backtracking on the discrete energy

      E(u) = 0.5 * sum_edges (u_a - u_b)^2
             - h^2 * sum_nodes [ (l+/p) (u+)^p + (l-/q) (u-)^q ],

  whose exact gradient on interior nodes is the cell-area-scaled discrete
  Euler-Lagrange residual  h^2 (-Lap5 u - l+ (u+)^(p-1) + l- (u-)^(q-1)).
  The trace on the ring is held fixed.

* ``construct_degenerate`` - damped fixed-point iteration
  u <- (1-w) u + w * PoissonSolve(reaction(u - u(0)), g) with the datum
  g = r^k cos(k theta), k > 2 gamma_p, every iterate projected onto the
  exactly grid-representable reflections of the dihedral symmetry group.
  The limit, shifted by its origin value, is a solution vanishing at the
  origin with boundary values g - kappa.

Gradient descent is used deliberately: the reaction term is not
differentiable at 0 for p < 2, so Newton-type smoothness assumptions fail,
while descent only needs continuity.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import (
    EXTERIOR,
    INTERIOR,
    RING,
    GridField,
    fill_exterior_from_ring,
    harmonic_polynomial,
    make_field,
)
from .model import InvalidParameters, Parameters, exponents


class PoissonConvergenceError(RuntimeError):
    """Linear solve failed to reach the requested residual."""


class WaveNumberTooSmallError(ValueError):
    """Degenerate construction needs k strictly above 2*gamma_p."""


@dataclass(frozen=True)
class SolveOptions:
    grad_tol: float = 1e-8
    max_iters: int = 200_000
    step0: float = 0.25
    backtrack: float = 0.5
    fixed_point_tol: float = 1e-8
    relaxation: float = 0.7

    def __post_init__(self):
        for name in ("grad_tol", "max_iters", "step0", "backtrack",
                     "fixed_point_tol", "relaxation"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.5 <= self.relaxation <= 1.0):
            raise ValueError("relaxation must lie in [0.5, 1]")
        if self.backtrack >= 1.0:
            raise ValueError("backtrack factor must be < 1")


@dataclass(frozen=True)
class SymmetryGroup:
    """Dihedral group generated by k reflections across lines through the
    origin at angles i*pi/k."""

    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be a positive integer")

    @property
    def reflections(self):
        return [i * math.pi / self.k for i in range(self.k)]


@dataclass
class SolveResult:
    field: GridField
    converged: bool
    iterations: int
    energies: np.ndarray
    final_residual: float


@dataclass
class DegenerateResult:
    field: GridField
    kappa: float
    converged: bool
    iterations: int
    deltas: np.ndarray


# ---------------------------------------------------------------------------
# energy and its gradient
# ---------------------------------------------------------------------------

def _q_or_default(params):
    return params.q if params.q is not None else 1.5


def mask_area(f: GridField):
    """Area carried by the quadrature: inside-node count times cell area."""
    return float(np.count_nonzero(f.mask != EXTERIOR)) * f.spacing**2


def energy(u: GridField, params: Parameters) -> float:
    inside = u.mask != EXTERIOR
    e_dir = _kernels.dirichlet_edge_energy(u.values, inside)
    e_pot = _kernels.potential_sum(
        u.values, inside, params.lambda_plus, params.lambda_minus,
        params.p, _q_or_default(params),
    )
    return float(e_dir - u.spacing**2 * e_pot)


def energy_gradient(u: GridField, params: Parameters) -> GridField:
    """Cell-area-scaled discrete Euler-Lagrange residual on interior nodes;
    ring and exterior nodes carry zero (the trace is fixed)."""
    interior = u.mask == INTERIOR
    grad = _kernels.neg_laplacian(u.values, interior)
    reac = _kernels.reaction_term(
        u.values, params.lambda_plus, params.lambda_minus,
        params.p, _q_or_default(params),
    )
    grad -= u.spacing**2 * np.where(interior, reac, 0.0)
    grad[~interior] = 0.0
    out = u.copy()
    out.values = grad
    out.trace = None
    return out


def pde_residual(u: GridField, params: Parameters) -> float:
    """sup over interior nodes of |-Lap5 u - reaction(u)|."""
    g = energy_gradient(u, params)
    return float(np.max(np.abs(g.values))) / u.spacing**2


# ---------------------------------------------------------------------------
# boundary data handling
# ---------------------------------------------------------------------------

def _ring_values(g, f: GridField):
    ri, rj = f.ring_indices()
    if callable(g):
        x = f.coords
        return np.asarray(g(x[rj], x[ri]), dtype=float)
    g = np.asarray(g, dtype=float)
    if g.ndim == 2:
        return g[ri, rj].astype(float)
    if g.ndim == 0:
        return np.full(len(ri), float(g))
    if len(g) != len(ri):
        raise ValueError(
            f"boundary trace has {len(g)} values, ring has {len(ri)} nodes"
        )
    return g.copy()


def _interior_values(fsrc, f: GridField):
    if fsrc is None:
        return np.zeros_like(f.values)
    if isinstance(fsrc, GridField):
        return fsrc.values
    if callable(fsrc):
        X, Y = f.meshgrid()
        return np.asarray(fsrc(X, Y), dtype=float)
    arr = np.asarray(fsrc, dtype=float)
    if arr.ndim == 0:
        return np.full_like(f.values, float(arr))
    return arr


# ---------------------------------------------------------------------------
# 5-point Poisson solve (conjugate gradients on the interior unknowns)
# ---------------------------------------------------------------------------

def solve_poisson_dirichlet(f, g, N=None, params=None, tol=None, x0=None,
                            max_iters=None) -> GridField:
    """Solve  -Lap5 u = f  on interior nodes, u = g on the ring.

    ``f`` may be a GridField, full array, callable or scalar; ``g`` a ring
    array, full array, callable or scalar.  Conjugate gradients on the
    (symmetric positive definite) interior system, monitored in the
    sup-norm of the unscaled PDE residual until it drops below
    ``tol = 1e-10 * max(1, sup|f|)``.
    """
    if isinstance(f, GridField):
        out = make_field(f.N, f.half_width, f.domain)
    else:
        if N is None:
            raise ValueError("N is required when f is not a GridField")
        out = make_field(N)
    fvals = _interior_values(f, out)
    if not np.all(np.isfinite(fvals)):
        raise ValueError("right-hand side contains non-finite values")
    ring = _ring_values(g, out)
    interior = out.mask == INTERIOR
    h2 = out.spacing**2
    fsup = float(np.max(np.abs(fvals[interior]))) if interior.any() else 0.0
    if tol is None:
        tol = 1e-10 * max(1.0, fsup)
    if max_iters is None:
        max_iters = 40 * out.N

    u = np.zeros_like(out.values)
    ri, rj = out.ring_indices()
    u[ri, rj] = ring
    if x0 is not None:
        src = x0.values if isinstance(x0, GridField) else np.asarray(x0)
        u[interior] = src[interior]

    b = np.where(interior, h2 * fvals, 0.0)
    r = b - _kernels.neg_laplacian(u, interior)
    p = r.copy()
    rs = float(np.vdot(r, r))
    it = 0
    while float(np.max(np.abs(r))) / h2 > tol:
        if it >= max_iters:
            raise PoissonConvergenceError(
                f"CG stalled at residual {np.max(np.abs(r))/h2:.3e} "
                f"after {it} iterations"
            )
        Ap = _kernels.neg_laplacian(p, interior)
        alpha = rs / float(np.vdot(p, Ap))
        u += alpha * p
        r -= alpha * Ap
        rs_new = float(np.vdot(r, r))
        p = r + (rs_new / rs) * p
        rs = rs_new
        it += 1
    out.values = u
    out.trace = ring
    fill_exterior_from_ring(out)
    return out


def harmonic_extension(g, N) -> GridField:
    return solve_poisson_dirichlet(0.0, g, N=N)


# ---------------------------------------------------------------------------
# energy minimization with fixed trace
# ---------------------------------------------------------------------------

def minimize_with_trace(g, params: Parameters, opts: SolveOptions = None,
                        N=129, start=None) -> SolveResult:
    """Gradient descent with Armijo backtracking from the discrete harmonic
    extension of the trace.  The energy sequence is non-increasing by
    construction; iteration stops when the scaled gradient sup-norm falls
    below ``opts.grad_tol`` (PDE residual below grad_tol / cell area)."""
    opts = opts or SolveOptions()
    u = start.copy() if start is not None else harmonic_extension(g, N)
    interior = u.mask == INTERIOR
    h2 = u.spacing**2
    q = _q_or_default(params)
    inside = u.mask != EXTERIOR

    if _kernels.NUMBA_ENABLED:
        vals, it, converged, gsup, energies = _kernels.descent_loop(
            u.values, interior, inside, h2, params.lambda_plus,
            params.lambda_minus, params.p, q, opts.grad_tol, opts.max_iters,
            opts.step0, opts.backtrack, 1e-4,
        )
        u.values = vals
        fill_exterior_from_ring(u)
        return SolveResult(
            field=u, converged=bool(converged), iterations=int(it),
            energies=np.asarray(energies), final_residual=float(gsup) / h2,
        )

    def ener(vals):
        return float(
            _kernels.dirichlet_edge_energy(vals, inside)
            - h2 * _kernels.potential_sum(
                vals, inside, params.lambda_plus, params.lambda_minus,
                params.p, q,
            )
        )

    def grad(vals):
        gv = _kernels.neg_laplacian(vals, interior)
        reac = _kernels.reaction_term(
            vals, params.lambda_plus, params.lambda_minus, params.p, q
        )
        gv -= h2 * np.where(interior, reac, 0.0)
        gv[~interior] = 0.0
        return gv

    c1 = 1e-4
    step = opts.step0
    E = ener(u.values)
    energies = [E]
    converged = False
    it = 0
    gsup = math.inf
    while it < opts.max_iters:
        gv = grad(u.values)
        gsup = float(np.max(np.abs(gv)))
        if gsup < opts.grad_tol:
            converged = True
            break
        gnorm2 = float(np.vdot(gv, gv))
        step = step / opts.backtrack
        while True:
            trial = u.values - step * gv
            Et = ener(trial)
            if Et <= E - c1 * step * gnorm2:
                break
            step *= opts.backtrack
            if step < 1e-20:
                # descent direction exhausted at float resolution
                trial = u.values
                Et = E
                break
        if step < 1e-20:
            break
        u.values = trial
        E = Et
        energies.append(E)
        it += 1
    fill_exterior_from_ring(u)
    return SolveResult(
        field=u,
        converged=converged,
        iterations=it,
        energies=np.asarray(energies),
        final_residual=gsup / h2,
    )


# ---------------------------------------------------------------------------
# symmetrization
# ---------------------------------------------------------------------------

def symmetrize(u: GridField, S: SymmetryGroup) -> GridField:
    """Average of u over the 2k elements of the dihedral group (k rotations,
    k reflections), with bilinear interpolation at the transformed points."""
    out = u.copy()
    out.values = _kernels.dihedral_average(u.values, u.spacing, S.k)
    ri, rj = out.ring_indices()
    out.trace = out.values[ri, rj].copy()
    fill_exterior_from_ring(out)
    return out


def _exact_transforms(k):
    """Index remappings of the grid that belong to the dihedral group of
    order 2k: these are exactly representable (no interpolation).  The
    x-axis reflection always belongs; axis-swap and half-turn need k even;
    the diagonal reflections need 4 | k."""
    ts = [lambda v: v, lambda v: v[::-1, :]]
    if k % 2 == 0:
        ts += [lambda v: v[:, ::-1], lambda v: v[::-1, ::-1]]
    if k % 4 == 0:
        ts += [
            lambda v: v.T,
            lambda v: v[::-1, ::-1].T,
            lambda v: v[::-1, :].T,
            lambda v: v[:, ::-1].T,
        ]
    return ts


def grid_symmetry_project(values, k):
    """Average over the exactly grid-representable subgroup of the dihedral
    group; the result is invariant under those transforms to rounding."""
    ts = _exact_transforms(k)
    acc = np.zeros_like(values)
    for t in ts:
        acc += t(values)
    return acc / len(ts)


def symmetry_defect_exact(values, k, inside=None):
    """sup |u o T - u| over the exactly grid-representable transforms,
    restricted to ``inside`` nodes when given (exterior fill values are
    bookkeeping and need not be symmetric)."""
    worst = 0.0
    for t in _exact_transforms(k)[1:]:
        diff = np.abs(t(values) - values)
        if inside is not None:
            diff = diff[inside]
        worst = max(worst, float(np.max(diff)))
    return worst


def symmetry_defect_interp(u: GridField, S: SymmetryGroup):
    """sup |symmetrize(u) - u| over inside nodes: the full-group defect,
    bounded below by bilinear interpolation error."""
    avg = _kernels.dihedral_average(u.values, u.spacing, S.k)
    inside = u.mask != EXTERIOR
    return float(np.max(np.abs(avg[inside] - u.values[inside])))


# ---------------------------------------------------------------------------
# degenerate solutions via the damped fixed point
# ---------------------------------------------------------------------------

def construct_degenerate(k, params: Parameters, opts: SolveOptions = None,
                         N=257) -> DegenerateResult:
    """Fixed-point construction of a solution that vanishes at the origin
    and is degenerate there: datum g = r^k cos(k theta) with k > 2 gamma_p.

    Iterates u <- (1-w) u + w * PoissonSolve(reaction(u - u(0)), g), each
    iterate projected onto the exact grid symmetries of the dihedral group
    and with the ring trace re-imposed; stops when the sup-norm update
    drops below ``opts.fixed_point_tol``.  Returns the shifted solution
    u* - u*(0) (zero at the origin exactly) and kappa = u*(0)."""
    opts = opts or SolveOptions()
    if params.p <= 1.0:
        raise InvalidParameters("degenerate construction requires p > 1")
    ex = exponents(params)
    if not k > 2.0 * ex.gamma_p:
        raise WaveNumberTooSmallError(
            f"k = {k} must exceed 2*gamma_p = {2*ex.gamma_p}"
        )
    gfn = harmonic_polynomial(k)
    proto = make_field(N)
    ring = _ring_values(gfn, proto)
    q = _q_or_default(params)
    c = proto.origin_index

    u = harmonic_extension(ring, N)
    u.values = grid_symmetry_project(u.values, k)
    ri, rj = u.ring_indices()
    u.values[ri, rj] = ring
    interior = u.mask == INTERIOR

    deltas = []
    converged = False
    it = 0
    while it < opts.max_iters:
        shifted = u.values - u.values[c, c]
        reac = _kernels.reaction_term(
            shifted, params.lambda_plus, params.lambda_minus, params.p, q
        )
        reac[~interior] = 0.0
        w = solve_poisson_dirichlet(reac, ring, N=N, x0=u)
        new_vals = (1.0 - opts.relaxation) * u.values + opts.relaxation * w.values
        new_vals = grid_symmetry_project(new_vals, k)
        new_vals[ri, rj] = ring
        inside = u.mask != EXTERIOR
        delta = float(np.max(np.abs(new_vals[inside] - u.values[inside])))
        u.values = new_vals
        deltas.append(delta)
        it += 1
        if delta < opts.fixed_point_tol:
            converged = True
            break
    kappa = float(u.values[c, c])
    u.values = u.values - kappa
    u.trace = ring - kappa
    u.values[ri, rj] = u.trace
    fill_exterior_from_ring(u)
    return DegenerateResult(
        field=u, kappa=kappa, converged=converged, iterations=it,
        deltas=np.asarray(deltas),
    )


def degenerate_update_map(res: DegenerateResult, k, params: Parameters,
                          opts: SolveOptions = None) -> float:
    """Sup-norm displacement of the degenerate solution under one more
    application of the fixed-point update (consistency check)."""
    opts = opts or SolveOptions()
    u = res.field
    q = _q_or_default(params)
    c = u.origin_index
    interior = u.mask == INTERIOR
    ri, rj = u.ring_indices()
    ring = u.values[ri, rj]
    shifted = u.values - u.values[c, c]
    reac = _kernels.reaction_term(
        shifted, params.lambda_plus, params.lambda_minus, params.p, q
    )
    reac[~interior] = 0.0
    w = solve_poisson_dirichlet(reac, ring, N=u.N, x0=u)
    new_vals = (1.0 - opts.relaxation) * u.values + opts.relaxation * w.values
    new_vals = grid_symmetry_project(new_vals, k)
    new_vals[ri, rj] = ring
    inside = u.mask != EXTERIOR
    return float(np.max(np.abs(new_vals[inside] - u.values[inside])))
