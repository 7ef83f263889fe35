"""Cartesian grids over [-L, L]^2 with a disk (or square-window) mask.

The grid always has an odd number of nodes per axis so the origin is a
node, and coordinates are built as (index - center) * spacing so that
mirror images of nodes are exactly representable.  Node tags:

    INTERIOR  - node inside the domain whose full 5-point stencil stays
                inside,
    RING      - inside node with at least one neighbour outside; carries
                prescribed boundary values exactly,
    EXTERIOR  - the rest; such nodes hold the value of their nearest ring
                node by default (solver fields) so interpolation near the
                boundary stays sane, but are never read by energies.
                Fields sampled from closed-form expressions carry the true
                values there instead, which keeps quadrature on circles
                close to the boundary accurate.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

INTERIOR = 0
RING = 1
EXTERIOR = 2


def axis_coords(N, half_width=1.0):
    if N < 3 or N % 2 == 0:
        raise ValueError(f"N must be odd and >= 3, got {N}")
    h = 2.0 * half_width / (N - 1)
    jc = (N - 1) // 2
    return (np.arange(N) - jc) * h


def disk_mask(N, half_width=1.0, radius=1.0):
    x = axis_coords(N, half_width)
    X, Y = np.meshgrid(x, x, indexing="xy")
    inside = X * X + Y * Y <= radius * radius * (1.0 + 1e-14)
    interior = inside.copy()
    interior[0, :] = interior[-1, :] = False
    interior[:, 0] = interior[:, -1] = False
    core = (
        inside[1:-1, :-2] & inside[1:-1, 2:] & inside[:-2, 1:-1] & inside[2:, 1:-1]
    )
    interior[1:-1, 1:-1] &= core
    mask = np.full((N, N), EXTERIOR, dtype=np.int8)
    mask[inside] = RING
    mask[interior] = INTERIOR
    return mask


def square_mask(N):
    mask = np.full((N, N), INTERIOR, dtype=np.int8)
    mask[0, :] = mask[-1, :] = RING
    mask[:, 0] = mask[:, -1] = RING
    return mask


@dataclass
class GridField:
    """Scalar samples on the grid together with the domain mask.

    ``values[i, j]`` lives at (x_j, y_i).  ``trace`` holds the prescribed
    boundary values on the ring nodes, in ``np.where(mask == RING)`` order.
    """

    values: np.ndarray
    mask: np.ndarray
    spacing: float
    half_width: float = 1.0
    domain: str = "disk"
    trace: np.ndarray | None = None

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def coords(self):
        return axis_coords(self.N, self.half_width)

    @property
    def origin_index(self):
        return (self.N - 1) // 2

    def meshgrid(self):
        x = self.coords
        return np.meshgrid(x, x, indexing="xy")

    def ring_indices(self):
        return np.where(self.mask == RING)

    def interior_bool(self):
        return self.mask == INTERIOR

    def inside_bool(self):
        return self.mask != EXTERIOR

    def copy(self):
        return GridField(
            values=self.values.copy(),
            mask=self.mask,
            spacing=self.spacing,
            half_width=self.half_width,
            domain=self.domain,
            trace=None if self.trace is None else self.trace.copy(),
        )

    def boundary_distance(self, center):
        """Distance from ``center`` to the domain boundary."""
        cx, cy = center
        if self.domain == "disk":
            return 1.0 - float(np.hypot(cx, cy))
        return self.half_width - max(abs(cx), abs(cy))


_RING_FILL_CACHE = {}


def _nearest_ring_map(mask, spacing, half_width):
    key = (mask.shape[0], float(spacing), float(half_width), mask.tobytes())
    hit = _RING_FILL_CACHE.get(key)
    if hit is not None:
        return hit
    N = mask.shape[0]
    x = axis_coords(N, half_width)
    X, Y = np.meshgrid(x, x, indexing="xy")
    ri, rj = np.where(mask == RING)
    ei, ej = np.where(mask == EXTERIOR)
    if len(ei) == 0 or len(ri) == 0:
        result = (ei, ej, np.zeros(0, dtype=np.int64))
    else:
        tree = cKDTree(np.column_stack([X[ri, rj], Y[ri, rj]]))
        _, nearest = tree.query(np.column_stack([X[ei, ej], Y[ei, ej]]))
        result = (ei, ej, np.column_stack([ri[nearest], rj[nearest]]))
    _RING_FILL_CACHE[key] = result
    return result


def fill_exterior_from_ring(f: GridField):
    """Copy each exterior node's value from its nearest ring node, in place."""
    ei, ej, src = _nearest_ring_map(f.mask, f.spacing, f.half_width)
    if len(ei):
        f.values[ei, ej] = f.values[src[:, 0], src[:, 1]]
    return f


def make_field(N, half_width=1.0, domain="disk"):
    h = 2.0 * half_width / (N - 1)
    mask = disk_mask(N, half_width) if domain == "disk" else square_mask(N)
    return GridField(
        values=np.zeros((N, N)),
        mask=mask,
        spacing=h,
        half_width=half_width,
        domain=domain,
    )


def sample_function(fn, N, half_width=1.0, domain="disk"):
    """Field with ``fn(x, y)`` evaluated at every node (exterior included)."""
    f = make_field(N, half_width, domain)
    X, Y = f.meshgrid()
    f.values[:] = fn(X, Y)
    ri, rj = f.ring_indices()
    f.trace = f.values[ri, rj].copy()
    return f


def harmonic_polynomial(m):
    """fn(x, y) = Re((x + i y)^m) = r^m cos(m theta)."""

    def fn(x, y):
        return np.real((np.asarray(x, dtype=complex) + 1j * np.asarray(y)) ** m)

    return fn


def radial_bump(center, radius, amplitude):
    """C^1 compact bump a * max(0, 1 - (d/R)^2)^2 centered at ``center``."""

    cx, cy = center

    def fn(x, y):
        d2 = ((x - cx) ** 2 + (y - cy) ** 2) / radius**2
        return amplitude * np.maximum(0.0, 1.0 - d2) ** 2

    return fn


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def save_csv(f: GridField, path):
    x = f.coords
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "mask", "value"])
        for i in range(f.N):
            for j in range(f.N):
                w.writerow(
                    [
                        format(x[j], ".17g"),
                        format(x[i], ".17g"),
                        int(f.mask[i, j]),
                        format(f.values[i, j], ".17g"),
                    ]
                )


def load_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    n_sq = len(body)
    N = int(round(np.sqrt(n_sq)))
    if N * N != n_sq or N % 2 == 0:
        raise ValueError(f"CSV does not hold an odd square grid: {n_sq} rows")
    values = np.empty((N, N))
    mask = np.empty((N, N), dtype=np.int8)
    xs = np.empty(N)
    idx = 0
    for i in range(N):
        for j in range(N):
            x, y, m, v = body[idx]
            idx += 1
            if i == 0:
                xs[j] = float(x)
            values[i, j] = float(v)
            mask[i, j] = int(m)
    half_width = xs[-1]
    spacing = xs[1] - xs[0]
    domain = "disk" if np.any(mask == EXTERIOR) else "square"
    f = GridField(
        values=values,
        mask=mask,
        spacing=spacing,
        half_width=half_width,
        domain=domain,
    )
    ri, rj = f.ring_indices()
    f.trace = f.values[ri, rj].copy()
    return f


def save_binary(f: GridField, path):
    with open(path, "wb") as fh:
        fh.write(struct.pack("<qd", f.N, f.spacing))
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def load_binary(path):
    with open(path, "rb") as fh:
        N, spacing = struct.unpack("<qd", fh.read(16))
        values = np.frombuffer(fh.read(8 * N * N), dtype="<f8").reshape(N, N).copy()
    half_width = spacing * (N - 1) / 2.0
    domain = "disk" if abs(half_width - 1.0) < 1e-12 else "square"
    mask = disk_mask(N, half_width) if domain == "disk" else square_mask(N)
    f = GridField(
        values=values,
        mask=mask,
        spacing=spacing,
        half_width=half_width,
        domain=domain,
    )
    ri, rj = f.ring_indices()
    f.trace = f.values[ri, rj].copy()
    return f
