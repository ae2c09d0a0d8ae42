"""Decreasing rearrangements and the convolution-inequality check."""

import math

import numpy as np
import pytest

from adamsq.field import SampledFunction, lp_norm, sample_radial
from adamsq.kernel import QuadratureError, ball_volume, make_kernel
from adamsq.rearrange import (
    DEFAULT_T_NODES,
    decreasing_rearrangement,
    default_t_grid,
    kernel_double_star,
    kernel_star,
    oneil_check,
)


def two_level_sample():
    # magnitude 2 on a set of measure 1, magnitude 1 on a set of measure 2
    return SampledFunction(
        layout="radial", n=2,
        nodes=np.array([0.5, 1.5]),
        values=np.array([2.0, 1.0]),
        weights=np.array([1.0, 2.0]),
        support_radius=2.0,
    )


def random_radial_step(rng, n, num=512):
    edges = np.sort(rng.uniform(0.05, 1.5, size=4))
    levels = rng.uniform(0.0, 3.0, size=4)

    def fn(r):
        out = np.zeros_like(r)
        lo = 0.0
        for e, v in zip(edges, levels):
            out = np.where((r >= lo) & (r < e), v, out)
            lo = e
        return out

    return sample_radial(fn, n, float(edges[-1]), num=num)


# ---------------------------------------------------------------------------
# rearrangement
# ---------------------------------------------------------------------------


def test_two_level_star_and_average():
    prof = decreasing_rearrangement(two_level_sample())
    assert prof.star_at(0.5) == 2.0
    assert prof.star_at(2.0) == 1.0
    assert prof.star_at(4.0) == 0.0
    # (1/2) int_0^2 f* = (2 + 1) / 2
    assert prof.double_star_at(2.0) == pytest.approx(1.5, abs=1e-15)
    assert prof.support_measure == pytest.approx(3.0)


def test_two_level_exact_norms():
    prof = decreasing_rearrangement(two_level_sample())
    assert prof.star_lp(1) == pytest.approx(4.0, rel=1e-14)
    assert prof.star_lp(2) == pytest.approx(math.sqrt(6.0), rel=1e-14)
    assert prof.star_lp(math.inf) == 2.0


def test_radial_nonincreasing_is_fixed_point():
    f = sample_radial(lambda r: np.exp(-r * r), 2, 4.0, num=256)
    prof = decreasing_rearrangement(f)
    # a nonincreasing radial sample rearranges to itself: cell k occupies the
    # measure slot [pi(b_k^2 - b_0^2), pi(b_{k+1}^2 - b_0^2)) and the node is
    # the geometric mean of its bounds, so node^2 minus the inner hole lands
    # inside the slot
    t = math.pi * (f.nodes ** 2 - f.bounds[0] ** 2)
    np.testing.assert_allclose(prof.star_at(t), f.values, rtol=1e-12)


def test_riesz_kernel_rearranges_to_power_form():
    n, alpha = 2, 1.0
    k = make_kernel("riesz", n, alpha)
    grid = sample_radial(lambda r: r ** (alpha - n), n, 3.0, num=512)
    prof = decreasing_rearrangement(grid)
    t = math.pi * (grid.nodes ** 2 - grid.bounds[0] ** 2)
    # sampled K* equals the closed power form at cell-interior measures up
    # to the inner-hole offset of the truncated grid
    np.testing.assert_allclose(prof.star_at(t),
                               kernel_star(k, t + math.pi
                                           * grid.bounds[0] ** 2),
                               rtol=1e-10)
    # and stays below the majorant up to the within-slot sampling slack:
    # a cell's node value holds across its measure slot, whose right edge
    # lies one grid ratio beyond the node
    q = grid.bounds[1] / grid.bounds[0]
    fine = np.geomspace(t[0], t[-1], 2048)
    bound = kernel_star(k, fine) * math.sqrt(q) * (1 + 1e-12)
    assert np.all(prof.star_at(fine) <= bound)


def test_kernel_double_star_factor():
    k = make_kernel("riesz", 3, 1.2)
    t = np.array([0.3, 2.0, 9.0])
    np.testing.assert_allclose(kernel_double_star(k, t),
                               kernel_star(k, t) * 3 / 1.2, rtol=1e-14)


def test_default_grid_spans_support_measure():
    grid = default_t_grid(5.0)
    assert grid.size == DEFAULT_T_NODES
    assert grid[0] == pytest.approx(5e-4)
    assert grid[-1] == pytest.approx(50.0)
    ratios = grid[1:] / grid[:-1]
    np.testing.assert_allclose(ratios, ratios[0], rtol=1e-9)


def test_equimeasurability_exact():
    rng = np.random.default_rng(7)
    for n, alpha in [(1, 0.5), (2, 1.0), (3, 1.4)]:
        f = random_radial_step(rng, n)
        prof = decreasing_rearrangement(f)
        for p in (1.0, 2.0, n / alpha):
            assert prof.star_lp(p) == pytest.approx(lp_norm(f, p), rel=1e-12)


def test_order_preservation():
    rng = np.random.default_rng(11)
    f = random_radial_step(rng, 2)
    bump = rng.uniform(0.0, 1.0, size=f.values.shape)
    g = f.with_values(f.values + bump * (f.values > 0))
    t = np.geomspace(1e-4, 20.0, 200)
    pf = decreasing_rearrangement(f)
    pg = decreasing_rearrangement(g)
    assert np.all(pf.star_at(t) <= pg.star_at(t) + 1e-15)


def test_double_star_dominates_and_monotone():
    rng = np.random.default_rng(13)
    f = random_radial_step(rng, 2)
    prof = decreasing_rearrangement(f)
    assert np.all(prof.double_star >= prof.star - 1e-15)
    assert np.all(np.diff(prof.star) <= 1e-15)
    assert np.all(np.diff(prof.double_star) <= 1e-15)


def test_star_overflow_safe():
    f = two_level_sample().with_values(np.array([2e300, 1e300]))
    prof = decreasing_rearrangement(f)
    assert prof.star_lp(2) == pytest.approx(math.sqrt(6.0) * 1e300, rel=1e-12)


def test_rearrangement_needs_weights():
    f = two_level_sample()
    bare = SampledFunction(layout=f.layout, n=f.n, nodes=f.nodes,
                           values=f.values, weights=None,
                           support_radius=f.support_radius)
    with pytest.raises(ValueError):
        decreasing_rearrangement(bare)


# ---------------------------------------------------------------------------
# convolution inequality
# ---------------------------------------------------------------------------

# Unit-disk oracle, n = 2, alpha = 1, f = indicator of the unit ball.
# RHS closed form: 2*pi for t <= pi, 2*sqrt(pi*t)*(pi/t) beyond.
# LHS oracle: 512^2 FFT convolution with exact singular-cell mean, discrete
# rearrangement, then (1/t) int_0^t of the rearranged samples.
DISK_ORACLE = [
    # t, rhs closed form, (Tf)** from the brute grid oracle
    (0.1, 2.0 * math.pi, 6.2581107882),
    (1.0, 2.0 * math.pi, 6.0223701835),
    (10.0, 2.0 * math.sqrt(math.pi * 10.0) * math.pi / 10.0, 3.3815555975),
]


def test_disk_margins_match_oracle():
    k = make_kernel("riesz", 2, 1.0)
    f = sample_radial(lambda r: np.where(r <= 1.0, 1.0, 0.0), 2, 1.0,
                      num=2048)
    t = np.array([row[0] for row in DISK_ORACLE])
    rep = oneil_check(k, f, t_grid=t)
    for (tt, rhs, lhs), got_l, got_r, got_m in zip(DISK_ORACLE, rep.lhs,
                                                   rep.rhs, rep.margin):
        assert got_r == pytest.approx(rhs, rel=1e-9)
        assert got_l == pytest.approx(lhs, rel=2e-3)
        assert got_m >= 0.0
    assert rep.passed


def test_zero_function_margins_vanish():
    k = make_kernel("riesz", 2, 1.0)
    f = sample_radial(lambda r: np.zeros_like(r), 2, 1.0, num=128)
    rep = oneil_check(k, f, t_grid=np.array([0.1, 1.0, 10.0]))
    np.testing.assert_array_equal(rep.lhs, 0.0)
    np.testing.assert_array_equal(rep.rhs, 0.0)
    np.testing.assert_array_equal(rep.margin, 0.0)
    assert rep.passed


def test_randomized_radial_suite_all_pass():
    root = np.random.SeedSequence(20260817)
    for child in root.spawn(200):
        rng = np.random.default_rng(child)
        n = int(rng.integers(1, 4))
        alpha = float(rng.uniform(0.3, 0.9)) * n
        k = make_kernel("riesz", n, alpha)
        # 1024 cells: the inequality nears equality as t -> 0, so the source
        # grid must keep quadrature error below the spare margin there
        f = random_radial_step(rng, n, num=1024)
        rep = oneil_check(k, f)
        assert rep.passed, ("margin violation at n=%d alpha=%.4f" %
                            (n, alpha))


def test_vector_kernel_rejected():
    k = make_kernel("gradient", 3, 1.0)
    f = sample_radial(lambda r: np.where(r <= 1.0, 1.0, 0.0), 3, 1.0, num=64)
    with pytest.raises(ValueError):
        oneil_check(k, f)


def test_cartesian_sample_rejected():
    from adamsq.field import cartesian_grid, sample_cartesian
    k = make_kernel("riesz", 2, 1.0)
    f = sample_cartesian(lambda x: np.exp(-np.sum(x * x, axis=-1)), 2, 1.0,
                         num=16)
    with pytest.raises(ValueError):
        oneil_check(k, f)


def test_coarse_grid_raises_resolution_error():
    k = make_kernel("riesz", 2, 1.0)
    f = sample_radial(lambda r: np.where(r <= 1.0, 1.0, 0.0), 2, 1.0,
                      num=8, inner=0.5)
    with pytest.raises(QuadratureError):
        oneil_check(k, f, t_grid=np.array([1e-9, 1.0]))


def test_tail_integral_closed_form():
    k = make_kernel("riesz", 2, 1.0)
    prof = decreasing_rearrangement(two_level_sample())
    piece_scale = math.sqrt(math.pi)  # K*(s) = (s/pi)^{-1/2}

    def exact_tail(t):
        # f* = 2 on (0,1), 1 on (1,3); int K* = 2 sqrt(pi) sqrt(s) pieces
        def seg(lo, hi, level):
            lo, hi = max(lo, t), hi
            if hi <= lo:
                return 0.0
            return level * 2.0 * piece_scale * (math.sqrt(hi)
                                                - math.sqrt(lo))
        return seg(0.0, 1.0, 2.0) + seg(1.0, 3.0, 1.0)

    from adamsq.rearrange import _kernel_star_piece
    piece = _kernel_star_piece(k)
    for t in (0.2, 1.0, 2.5, 5.0):
        assert prof.tail_integral(piece, t) == pytest.approx(exact_tail(t),
                                                             rel=1e-12)
