"""Sampled functions on R^n: layouts, norms, dilations, splits, q-norms.

Two layouts cover everything the experiments need:

* radial: geometric annulus cells over [inner, r_support]; node i is the
  log-midpoint of its cell, the weight is the exact annulus volume. The inner
  disk below the first cell is dropped; its measure is ~1e-12 of the region at
  the default 1e-6 inner scale.
* cartesian: uniform cells of a centered cube, node at the cell center.

Functions are piecewise constant on cells. Vector values share nodes; |f| is
the per-node Euclidean length.
"""

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .kernel import ball_volume, sphere_area

DEFAULT_RADIAL_NODES = 4096
DEFAULT_INNER_SCALE = 1e-6
CARTESIAN_CAP = {1: 16384, 2: 256, 3: 96}


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Immutable piecewise-constant function sample."""

    layout: str  # "radial" | "cartesian"
    n: int
    nodes: np.ndarray  # radial: (N,) radii; cartesian: (N, n) centers
    values: np.ndarray  # (N,) or (N, m)
    weights: np.ndarray  # (N,) positive cell measures; None for probe clouds
    support_radius: float
    bounds: np.ndarray = None  # radial cell edges, (N+1,)
    cell_size: float = None  # cartesian cell edge length

    def __post_init__(self):
        if self.layout not in ("radial", "cartesian"):
            raise ValueError("layout must be radial or cartesian")
        if self.weights is not None and np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if self.support_radius < 0.0:
            raise ValueError("support radius must be nonnegative")
        r = self.node_radii()
        mags = self.magnitude()
        outside = r > self.support_radius * (1.0 + 1e-12)
        if np.any(mags[outside] != 0.0):
            raise ValueError("values must vanish beyond the support radius")

    def node_radii(self):
        if self.layout == "radial":
            return np.asarray(self.nodes, dtype=float)
        return np.linalg.norm(np.atleast_2d(self.nodes), axis=1)

    @property
    def components(self):
        return 1 if self.values.ndim == 1 else self.values.shape[1]

    def magnitude(self):
        """Per-node |f|: absolute value, or Euclidean length for vector data."""
        if self.values.ndim == 1:
            return np.abs(self.values)
        return np.sqrt(np.sum(self.values * self.values, axis=1))

    def with_values(self, values):
        values = np.asarray(values, dtype=float)
        return SampledFunction(
            layout=self.layout, n=self.n, nodes=self.nodes, values=values,
            weights=self.weights, support_radius=self.support_radius,
            bounds=self.bounds, cell_size=self.cell_size,
        )

    def region_measure(self):
        return float(np.sum(self.weights))


@dataclass(frozen=True)
class LargeSmallSplit:
    """Pointwise split of f at level |f| = 1: f = large + small."""

    large: SampledFunction
    small: SampledFunction


# ---------------------------------------------------------------------------
# grid constructors
# ---------------------------------------------------------------------------


def radial_grid(n, r_support, num=DEFAULT_RADIAL_NODES, inner=None):
    """Geometric cell edges and log-midpoint nodes over [inner, r_support]."""
    if inner is None:
        inner = DEFAULT_INNER_SCALE * r_support
    if not (0.0 < inner < r_support):
        raise ValueError("need 0 < inner < r_support")
    bounds = np.geomspace(inner, r_support, num + 1)
    nodes = np.sqrt(bounds[:-1] * bounds[1:])
    weights = ball_volume(n) * (bounds[1:] ** n - bounds[:-1] ** n)
    return nodes, weights, bounds


def sample_radial(fn, n, r_support, num=DEFAULT_RADIAL_NODES, inner=None,
                  support_radius=None):
    """Sample a radial profile fn(r) (scalar, vectorized) on a geometric grid."""
    nodes, weights, bounds = radial_grid(n, r_support, num=num, inner=inner)
    values = np.asarray(fn(nodes), dtype=float)
    if support_radius is None:
        support_radius = r_support
    values = np.where(nodes > support_radius * (1.0 + 1e-12), 0.0, values)
    return SampledFunction(
        layout="radial", n=n, nodes=nodes, values=values, weights=weights,
        support_radius=support_radius, bounds=bounds,
    )


def cartesian_grid(n, half_extent, num):
    """Cell centers and sizes of a uniform grid on [-half_extent, half_extent]^n."""
    if num > CARTESIAN_CAP[n]:
        raise ValueError(
            "cartesian grids cap at %d per axis for n=%d" % (CARTESIAN_CAP[n], n)
        )
    h = 2.0 * half_extent / num
    axis = -half_extent + h * (np.arange(num) + 0.5)
    grids = np.meshgrid(*([axis] * n), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.full(nodes.shape[0], h ** n)
    return nodes, weights, h


def sample_cartesian(fn, n, half_extent, num, support_radius=None):
    """Sample fn((N, n) points) -> (N,) or (N, m) on a uniform cube grid."""
    nodes, weights, h = cartesian_grid(n, half_extent, num)
    values = np.asarray(fn(nodes), dtype=float)
    if support_radius is None:
        support_radius = half_extent * math.sqrt(n)
    r = np.linalg.norm(nodes, axis=1)
    mask = r > support_radius * (1.0 + 1e-12)
    if values.ndim == 1:
        values = np.where(mask, 0.0, values)
    else:
        values = np.where(mask[:, None], 0.0, values)
    return SampledFunction(
        layout="cartesian", n=n, nodes=nodes, values=values, weights=weights,
        support_radius=support_radius, cell_size=h,
    )


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def lp_norm(f, p):
    """(sum weights |f|^p)^{1/p}; p = inf returns the max sampled |f|."""
    mags = f.magnitude()
    if p == math.inf:
        return float(np.max(mags)) if mags.size else 0.0
    if p < 1.0:
        raise ValueError("norm exponent must be >= 1 or inf, got %r" % (p,))
    if f.weights is None:
        raise ValueError("probe clouds carry no quadrature weights")
    top = float(np.max(mags))
    if top == 0.0:
        return 0.0
    # factor out the max so large powers cannot overflow
    return top * float(np.sum(f.weights * (mags / top) ** p)) ** (1.0 / p)


def dilate(f, lam, mode="density", alpha=None):
    """Rescale lengths by lam.

    density mode returns x -> lam^alpha f(lam x), the mass/norm-preserving
    family (alpha = n preserves the integral, alpha = the kernel order
    preserves the critical norm); plain mode returns x -> f(lam x).
    """
    if lam <= 0.0:
        raise ValueError("dilation factor must be positive")
    if mode == "density":
        if alpha is None:
            raise ValueError("density mode needs the exponent alpha")
        factor = lam ** alpha
    elif mode == "plain":
        factor = 1.0
    else:
        raise ValueError("mode must be density or plain")
    nodes = f.nodes / lam
    bounds = None if f.bounds is None else f.bounds / lam
    cell = None if f.cell_size is None else f.cell_size / lam
    weights = None if f.weights is None else f.weights / lam ** f.n
    return SampledFunction(
        layout=f.layout, n=f.n, nodes=nodes, values=f.values * factor,
        weights=weights, support_radius=f.support_radius / lam,
        bounds=bounds, cell_size=cell,
    )


def split_large_small(f):
    """f = large + small with large = f on {|f| >= 1}, small elsewhere."""
    mags = f.magnitude()
    mask = mags >= 1.0
    if f.values.ndim == 1:
        large = np.where(mask, f.values, 0.0)
    else:
        large = np.where(mask[:, None], f.values, 0.0)
    small = f.values - large
    return LargeSmallSplit(large=f.with_values(large), small=f.with_values(small))


def truncated_exp(t, N):
    """e^t minus its Taylor polynomial through degree N, cancellation-safe.

    Small arguments (t < max(N, 1)) sum the tail series directly; otherwise
    the subtraction loses nothing. Accepts scalars or arrays, t >= 0.
    """
    if N < 0:
        raise ValueError("truncation index must be nonnegative")
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0.0):
        raise ValueError("truncated exponential is used with t >= 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)
    small = arr < max(N, 1)
    if N == 0:
        out[:] = np.expm1(arr)
    else:
        a = arr[small]
        term = a ** (N + 1) / math.factorial(N + 1)
        acc = term.copy()
        k = N + 2
        while k < N + 90:
            term = term * a / k
            acc += term
            if np.all(term <= 1e-18 * np.maximum(acc, 1e-300)):
                break
            k += 1
        out[small] = acc
        big = arr[~small]
        # Horner on the truncated polynomial: sum_{k<=N} t^k/k!
        poly = np.ones_like(big)
        for k in range(N, 0, -1):
            poly = 1.0 + poly * big / k
        out[~small] = np.exp(big) - poly
    return float(out[0]) if scalar else out


def q_norm(a, b, q, n, alpha):
    """Combined size ((a^{qp} + b^{qp})^{1/(qp)} with p = n/alpha); max at q = inf."""
    if a < 0.0 or b < 0.0:
        raise ValueError("norms must be nonnegative")
    if q <= 0.0:
        raise ValueError("q must be positive")
    if q == math.inf:
        return max(a, b)
    p = q * n / alpha
    top = max(a, b)
    if top == 0.0:
        return 0.0
    low = min(a, b)
    return top * (1.0 + (low / top) ** p) ** (1.0 / p)


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def to_csv(f, path_or_buf):
    """Write a function sample with a JSON metadata header line."""
    meta = {
        "layout": f.layout,
        "n": f.n,
        "support_radius": f.support_radius,
        "components": f.components,
        "cell_size": f.cell_size,
        "bound_lo": None if f.bounds is None else float(f.bounds[0]),
    }
    own = isinstance(path_or_buf, str)
    buf = open(path_or_buf, "w") if own else path_or_buf
    try:
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        if f.layout == "radial":
            buf.write("node,bound_hi,weight," +
                      ",".join("value%d" % i for i in range(f.components)) + "\n")
            vals = np.atleast_2d(f.values.T).T
            for i in range(f.nodes.shape[0]):
                row = [_fmt(f.nodes[i]), _fmt(f.bounds[i + 1]), _fmt(f.weights[i])]
                row += [_fmt(v) for v in vals[i]]
                buf.write(",".join(row) + "\n")
        else:
            cols = ["x%d" % i for i in range(f.n)] + ["weight"] + [
                "value%d" % i for i in range(f.components)]
            buf.write(",".join(cols) + "\n")
            vals = np.atleast_2d(f.values.T).T
            pts = np.atleast_2d(f.nodes)
            for i in range(pts.shape[0]):
                row = [_fmt(c) for c in pts[i]] + [_fmt(f.weights[i])]
                row += [_fmt(v) for v in vals[i]]
                buf.write(",".join(row) + "\n")
    finally:
        if own:
            buf.close()


def from_csv(path_or_buf):
    """Reload a function sample written by to_csv."""
    own = isinstance(path_or_buf, str)
    buf = open(path_or_buf, "r") if own else path_or_buf
    try:
        header = buf.readline()
        if not header.startswith("# "):
            raise ValueError("missing metadata header line")
        meta = json.loads(header[2:])
        buf.readline()  # column names
        rows = np.array(
            [[float(tok) for tok in line.strip().split(",")]
             for line in buf if line.strip()]
        )
    finally:
        if own:
            buf.close()
    m = meta["components"]
    if meta["layout"] == "radial":
        nodes = rows[:, 0]
        bounds = np.concatenate([[meta["bound_lo"]], rows[:, 1]])
        weights = rows[:, 2]
        values = rows[:, 3:3 + m]
        if m == 1:
            values = values[:, 0]
        return SampledFunction(
            layout="radial", n=meta["n"], nodes=nodes, values=values,
            weights=weights, support_radius=meta["support_radius"], bounds=bounds,
        )
    n = meta["n"]
    nodes = rows[:, :n]
    weights = rows[:, n]
    values = rows[:, n + 1:n + 1 + m]
    if m == 1:
        values = values[:, 0]
    return SampledFunction(
        layout="cartesian", n=n, nodes=nodes, values=values, weights=weights,
        support_radius=meta["support_radius"], cell_size=meta["cell_size"],
    )
