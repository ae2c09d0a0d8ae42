"""Nonincreasing rearrangements and the O'Neil convolution inequality.

For a weighted function sample, the decreasing rearrangement f* is computed
exactly: sorting cell magnitudes and accumulating their measures inverts the
distribution function in closed form for piecewise-constant data. The
averaged rearrangement f**(t) = (1/t) int_0^t f* is then piecewise linear in
the accumulated measure and also exact. The convolution inequality

    (T f)**(t) <= t K**(t) f**(t) + int_t^inf f*(s) K*(s) ds

is checked with the exact power-law form of K* for kernels bounded by a
constant multiple of |x|^{alpha-n}.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import SampledFunction, sample_radial
from .kernel import QuadratureError, ball_volume
from .potential import apply_potential

DEFAULT_T_NODES = 512
T_GRID_LO = 1e-4  # times the support measure
T_GRID_HI = 10.0


@dataclass(frozen=True)
class DecreasingProfile:
    """Exact step representation of f* with sampled f* and f** on a t-grid.

    levels holds the distinct-or-not cell magnitudes sorted descending and
    cum_measure their accumulated cell measures, so f* equals levels[k] on
    [cum_measure[k-1], cum_measure[k]). star and double_star sample f* and
    f** on t_grid; queries and integrals use the exact representation.
    """

    t_grid: np.ndarray
    star: np.ndarray
    double_star: np.ndarray
    levels: np.ndarray
    cum_measure: np.ndarray
    cum_integral: np.ndarray  # int_0^{cum_measure[k]} f*

    @property
    def support_measure(self):
        """Measure of {|f| > 0}."""
        return float(self.cum_measure[-1]) if self.levels.size else 0.0

    def star_at(self, t):
        """f*(t), exact step lookup."""
        t = np.asarray(t, dtype=float)
        if self.levels.size == 0:
            return np.zeros_like(t)
        idx = np.searchsorted(self.cum_measure, t, side="right")
        padded = np.concatenate([self.levels, [0.0]])
        return padded[idx]

    def double_star_at(self, t):
        """f**(t) = (1/t) int_0^t f*, exact piecewise evaluation."""
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0.0):
            raise ValueError("f** is defined for t > 0")
        if self.levels.size == 0:
            return np.zeros_like(t)
        idx = np.searchsorted(self.cum_measure, t, side="right")
        below = np.concatenate([[0.0], self.cum_integral])[idx]
        start = np.concatenate([[0.0], self.cum_measure])[idx]
        padded = np.concatenate([self.levels, [0.0]])
        return (below + padded[idx] * (t - start)) / t

    def star_lp(self, p):
        """(int (f*)^p dt)^{1/p}, exact on the step representation."""
        if self.levels.size == 0:
            return 0.0
        if p == math.inf:
            return float(self.levels[0])
        widths = np.diff(np.concatenate([[0.0], self.cum_measure]))
        top = float(self.levels[0])
        if top == 0.0:
            return 0.0
        return top * float(
            np.sum(widths * (self.levels / top) ** p)) ** (1.0 / p)

    def tail_integral(self, weight_fn, t):
        """int_t^inf f*(s) w(s) ds for a provided piecewise-exact weight.

        weight_fn(lo, hi) must return the exact integral of the weight over
        [lo, hi]; the sum runs over the constant pieces of f* above t.
        """
        t = float(t)
        if self.levels.size == 0:
            return 0.0
        edges = np.concatenate([[0.0], self.cum_measure])
        total = 0.0
        for k in range(self.levels.size):
            lo, hi = edges[k], edges[k + 1]
            if hi <= t:
                continue
            total += float(self.levels[k]) * weight_fn(max(lo, t), hi)
        return total


def default_t_grid(support_measure, num=DEFAULT_T_NODES):
    """Geometric grid spanning [1e-4, 10] times the support measure."""
    if support_measure <= 0.0:
        raise ValueError("support measure must be positive")
    return np.geomspace(T_GRID_LO * support_measure,
                        T_GRID_HI * support_measure, num)


def decreasing_rearrangement(f, t_grid=None):
    """Exact decreasing rearrangement of a weighted sample.

    Sorting the cell magnitudes descending and accumulating their measures
    inverts the distribution function mu(s) = |{|f| > s}| exactly for
    piecewise-constant data (searchsorted is the binary search over levels).
    """
    if f.weights is None:
        raise ValueError("rearrangement needs quadrature weights")
    mags = f.magnitude()
    keep = mags > 0.0
    mags = mags[keep]
    w = np.asarray(f.weights, dtype=float)[keep]
    order = np.argsort(mags)[::-1]
    levels = mags[order]
    cum = np.cumsum(w[order])
    cum_int = np.cumsum(levels * w[order])
    if t_grid is None:
        scale = float(cum[-1]) if levels.size else float(np.sum(f.weights))
        t_grid = default_t_grid(scale)
    t_grid = np.asarray(t_grid, dtype=float)
    profile = DecreasingProfile(
        t_grid=t_grid,
        star=np.zeros_like(t_grid),
        double_star=np.zeros_like(t_grid),
        levels=levels,
        cum_measure=cum,
        cum_integral=cum_int,
    )
    # fill the sampled columns through the exact queries
    object.__setattr__(profile, "star", profile.star_at(t_grid))
    object.__setattr__(profile, "double_star", profile.double_star_at(t_grid))
    return profile


# ---------------------------------------------------------------------------
# kernel rearrangement in closed form
# ---------------------------------------------------------------------------


def kernel_star(kernel, t):
    """K*(t) = C (t/|B_1|)^{(alpha-n)/n} with C the global kernel bound.

    Exact for the Riesz kernel (C = 1); an upper bound otherwise, which keeps
    the convolution inequality valid as a checked majorant.
    """
    if kernel.components != 1:
        raise ValueError("kernel rearrangement is defined for scalar kernels")
    t = np.asarray(t, dtype=float)
    vb = ball_volume(kernel.n)
    expo = (kernel.alpha - kernel.n) / kernel.n
    return kernel.global_bound * (t / vb) ** expo


def kernel_double_star(kernel, t):
    """K**(t) = (1/t) int_0^t K* = K*(t) n / alpha for the power form."""
    return kernel_star(kernel, t) * (kernel.n / kernel.alpha)


def _kernel_star_piece(kernel):
    # exact integral of K* over [lo, hi]: the power s^{(alpha-n)/n} integrates
    # to s^{alpha/n} n/alpha
    vb = ball_volume(kernel.n)
    expo = (kernel.alpha - kernel.n) / kernel.n
    scale = kernel.global_bound * vb ** -expo
    power = expo + 1.0

    def piece(lo, hi):
        return scale * (hi ** power - lo ** power) / power

    return piece


# ---------------------------------------------------------------------------
# the convolution inequality
# ---------------------------------------------------------------------------


def _covering_sample(f, r_cover):
    """Zero-pad a geometric radial sample out to r_cover at the same ratio.

    The padded sample is the same function (new cells carry value zero), so
    evaluating the potential on its own nodes keeps the fast on-grid path.
    Returns None when f does not live on a geometric radial grid.
    """
    if f.layout != "radial" or f.bounds is None or f.bounds.size < 3:
        return None
    ratios = f.bounds[1:] / f.bounds[:-1]
    if not np.allclose(ratios, ratios[0], rtol=1e-10):
        return None
    if f.bounds[-1] >= r_cover:
        return f
    q = math.log(f.bounds[-1] / f.bounds[0]) / (f.bounds.size - 1)
    extra = int(math.ceil(math.log(r_cover / f.bounds[-1]) / q))
    num = f.nodes.size
    bounds = np.geomspace(f.bounds[0],
                          f.bounds[-1] * math.exp(q * extra),
                          num + extra + 1)
    nodes = np.sqrt(bounds[:-1] * bounds[1:])
    weights = ball_volume(f.n) * np.diff(bounds ** f.n)
    values = np.zeros((num + extra,) + np.shape(f.values)[1:])
    values[:num] = f.values
    return SampledFunction(layout="radial", n=f.n, nodes=nodes,
                           values=values, weights=weights,
                           support_radius=f.support_radius, bounds=bounds)


@dataclass(frozen=True)
class OneilReport:
    """Pointwise margins RHS - LHS of the convolution inequality."""

    t_grid: np.ndarray
    lhs: np.ndarray  # (Tf)**(t)
    rhs: np.ndarray  # t K**(t) f**(t) + tail integral
    margin: np.ndarray
    passed: bool


def oneil_check(kernel, f, t_grid=None, cover_num=2048):
    """Check (Tf)** <= t K** f** + int_t^inf f* K* pointwise on t_grid.

    The left side rearranges the potential evaluated on a radial covering
    grid sized so its total measure exceeds the largest t requested; the
    right side is exact given the step form of f* and the power form of K*.
    """
    if kernel.components != 1:
        raise ValueError("the inequality applies to scalar kernels")
    if f.layout != "radial":
        raise ValueError("the check rearranges ring samples of the "
                         "potential, so f must be a radial sample")
    if not math.isfinite(f.support_radius):
        raise ValueError("f must be compactly supported")
    prof_f = decreasing_rearrangement(f)
    if t_grid is None:
        scale = prof_f.support_measure
        if scale <= 0.0:
            scale = float(np.sum(f.weights))
        t_grid = default_t_grid(scale)
    t_grid = np.asarray(t_grid, dtype=float)
    t_max = float(np.max(t_grid))
    t_min = float(np.min(t_grid))

    vb = ball_volume(kernel.n)
    r_cover = max(2.0 * f.support_radius,
                  (2.0 * t_max / vb) ** (1.0 / kernel.n))
    cover = _covering_sample(f, r_cover)
    if cover is None:
        cover = sample_radial(lambda r: np.zeros_like(r), kernel.n, r_cover,
                              num=cover_num)
        field = apply_potential(kernel, f, cover)
    else:
        field = apply_potential(kernel, cover, cover)
    # the innermost covering cell must resolve measures below the smallest t
    first_cell = float(cover.weights[0])
    if first_cell > t_min:
        raise QuadratureError(
            "covering grid too coarse: innermost cell measure %.3e exceeds "
            "the smallest requested t %.3e; refine the source grid" %
            (first_cell, t_min))
    prof_T = decreasing_rearrangement(field.base)

    lhs = prof_T.double_star_at(t_grid)
    piece = _kernel_star_piece(kernel)
    tail = np.array([prof_f.tail_integral(piece, t) for t in t_grid])
    rhs = (t_grid * kernel_double_star(kernel, t_grid)
           * prof_f.double_star_at(t_grid) + tail)
    margin = rhs - lhs
    passed = bool(np.all(margin >= -1e-6 * np.abs(rhs)))
    return OneilReport(t_grid=t_grid, lhs=lhs, rhs=rhs, margin=margin,
                       passed=passed)
