"""Potential evaluation against closed forms and an independent oracle.

Closed-form references: the Newtonian potential of the unit ball, the n = 1
fractional integral of an indicator, the logarithmic kernel on the unit disk,
and exact decompositions for the perturbed and gradient kernels. Where no
closed form exists, expected values were computed once with mpmath at 30
digits (hypergeometric ring integral, singularity-split tanh-sinh) and frozen.
"""

import math

import numpy as np
import pytest

from adamsq._accel import HAS_NUMBA
from adamsq.field import (
    dilate,
    radial_grid,
    sample_cartesian,
    sample_radial,
)
from adamsq.kernel import (
    QuadratureError,
    constant_c_alpha,
    gradient,
    perturbed,
    riesz,
    saturated,
)
from adamsq.potential import (
    MomentConditionError,
    apply_potential,
    potential_full_lp,
    potential_tail_lp,
)


def ball_indicator(n):
    def fn(x):
        r2 = np.sum(np.atleast_2d(x) ** 2, axis=1)
        return np.where(r2 < 1.0, 1.0, 0.0)

    return fn


def smooth_bump_radial(r):
    return np.where(r < 1.0, (1.0 - r ** 2) ** 3, 0.0)


def smooth_bump(x):
    r2 = np.sum(np.atleast_2d(x) ** 2, axis=1)
    return np.where(r2 < 1.0, (1.0 - r2) ** 3, 0.0)


def balanced_source(num=1024):
    # +1 beyond radius 0.5, inner cells weighted for exact zero discrete mean
    nodes, weights, bounds = radial_grid(2, 1.0, num=num)
    raw = np.where(nodes > 0.5, 1.0, 0.0)
    w_out = float(np.sum(weights * raw))
    w_in = float(np.sum(weights * (1.0 - raw)))
    values = np.where(nodes > 0.5, 1.0, -w_out / w_in)
    f = sample_radial(lambda r: np.zeros_like(r), 2, 1.0, num=num)
    return f.with_values(values)


# ---------------------------------------------------------------------------
# closed forms, radial path
# ---------------------------------------------------------------------------


def test_newtonian_ball_radial():
    # unit ball, n = 3, alpha = 2: 2 pi (1 - t^2/3) inside, (4 pi / 3)/t outside
    f = sample_radial(lambda r: np.ones_like(r), 3, 1.0, num=4096)
    t = np.array([0.2, 0.5, 0.9, 1.5, 3.0])
    got = apply_potential(riesz(3, 2.0), f, t).values
    expect = np.where(t < 1.0, 2.0 * math.pi * (1.0 - t ** 2 / 3.0),
                      (4.0 * math.pi / 3.0) / t)
    assert np.all(np.abs(got / expect - 1.0) < 3e-4)
    # outside the support the cell sums telescope and only roundoff remains
    assert np.all(np.abs(got[3:] / expect[3:] - 1.0) < 1e-10)


def line_indicator_potential(t, a):
    # f = 1 on (-1, 1): ((1+t)^a + (1-t)^a)/a inside, minus sign outside
    inner = np.clip(1.0 - t, 0.0, None)
    outer = np.clip(t - 1.0, 0.0, None)
    return np.where(t < 1.0,
                    ((1.0 + t) ** a + inner ** a) / a,
                    ((t + 1.0) ** a - outer ** a) / a)


def test_line_indicator_radial():
    a = 0.5
    f = sample_radial(lambda r: np.ones_like(r), 1, 1.0, num=4096)
    t = np.array([0.2, 0.8, 1.4, 5.0])
    got = apply_potential(riesz(1, a), f, t).values
    expect = line_indicator_potential(t, a)
    assert np.all(np.abs(got / expect - 1.0) < 3e-4)


def test_disk_center_and_boundary():
    # n = 2, alpha = 1 over the unit disk: T f(0) = 2 pi, T f(e_1) = 4
    f = sample_radial(lambda r: np.ones_like(r), 2, 1.0, num=4096)
    got = apply_potential(riesz(2, 1.0), f, np.array([1e-6, 1.0])).values
    assert abs(got[0] / (2.0 * math.pi) - 1.0) < 1e-4
    assert abs(got[1] / 4.0 - 1.0) < 1e-3


def test_plateau_value_at_center():
    # f = |y|^{-1} on (eps, 1], n = 2, alpha = 1: T f(0) = 2 pi log(1/eps)
    eps = 1e-3
    f = sample_radial(lambda r: np.where(r > eps, 1.0 / r, 0.0), 2, 1.0,
                      num=8192, inner=1e-5)
    got = apply_potential(riesz(2, 1.0), f, np.array([1e-7])).values[0]
    assert abs(got / (2.0 * math.pi * math.log(1.0 / eps)) - 1.0) < 2e-3


# ---------------------------------------------------------------------------
# frozen independent oracle (mpmath, 30 digits)
# ---------------------------------------------------------------------------

# T f for f(y) = (1 - |y|^2)^3 on the unit disk, n = 2, alpha = 1/2, at
# radii 0.15, 0.45, 0.85; singularity-split tanh-sinh on the exact ring form
BUMP_ORACLE_A05 = [
    (0.15, 7.8062389390130410),
    (0.45, 4.9267832145332864),
    (0.85, 1.3391792529948519),
]


def test_bump_alpha_half_radial_oracle():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=8192)
    t = np.array([row[0] for row in BUMP_ORACLE_A05])
    expect = np.array([row[1] for row in BUMP_ORACLE_A05])
    got = apply_potential(riesz(2, 0.5), f, t).values
    assert np.all(np.abs(got / expect - 1.0) < 2e-4)


def test_bump_alpha_half_cartesian_oracle():
    f = sample_cartesian(smooth_bump, 2, half_extent=1.3, num=128)
    t = np.array([row[0] for row in BUMP_ORACLE_A05])
    expect = np.array([row[1] for row in BUMP_ORACLE_A05])
    pts = np.stack([t * math.cos(0.37), t * math.sin(0.37)], axis=1)
    got = apply_potential(riesz(2, 0.5), f, pts).values
    assert np.all(np.abs(got / expect - 1.0) < 3e-3)


def test_cartesian_matches_radial_alpha_one():
    # the cartesian cell sum against the independently validated radial path
    fr = sample_radial(smooth_bump_radial, 2, 1.0, num=8192)
    fc = sample_cartesian(smooth_bump, 2, half_extent=1.3, num=128)
    t = np.array([0.15, 0.45, 0.85, 1.3])
    pts = np.stack([t * math.cos(0.37), t * math.sin(0.37)], axis=1)
    vr = apply_potential(riesz(2, 1.0), fr, t).values
    vc = apply_potential(riesz(2, 1.0), fc, pts).values
    assert np.all(np.abs(vc / vr - 1.0) < 3e-4)


def test_cartesian_newtonian_ball():
    f = sample_cartesian(ball_indicator(3), 3, half_extent=1.2, num=64)
    pts = np.zeros((3, 3))
    pts[:, 0] = [0.3, 0.6, 1.1]
    got = apply_potential(riesz(3, 2.0), f, pts).values
    t = pts[:, 0]
    expect = np.where(t < 1.0, 2.0 * math.pi * (1.0 - t ** 2 / 3.0),
                      (4.0 * math.pi / 3.0) / t)
    # the indicator is discontinuous, so staircase error at the sphere dominates
    assert np.all(np.abs(got / expect - 1.0) < 5e-3)


def test_cartesian_line_indicator():
    f = sample_cartesian(ball_indicator(1), 1, half_extent=1.5, num=4096)
    a = 0.5
    t = np.array([0.2, 0.8, 1.4])
    got = apply_potential(riesz(1, a), f, t[:, None]).values
    expect = line_indicator_potential(t, a)
    assert np.all(np.abs(got / expect - 1.0) < 1e-3)


# ---------------------------------------------------------------------------
# internal consistency
# ---------------------------------------------------------------------------


def test_on_node_compression_matches_dense():
    from adamsq.potential import _apply_radial_generic, _apply_radial_toeplitz

    f = sample_radial(smooth_bump_radial, 2, 1.0, num=1024)
    for a in (0.5, 1.0, 1.5):
        k = riesz(2, a)
        vt, _ = _apply_radial_toeplitz(k, f, f.nodes)
        vg, _ = _apply_radial_generic(k, f, f.nodes)
        assert np.max(np.abs(vt / vg - 1.0)) < 1e-12


def test_radial_node_doubling():
    # doubling the radial node count moves probe values by < 1e-3 relative
    t = np.array([0.1, 0.5, 0.95, 2.0])
    vals = {}
    for num in (2048, 4096):
        f = sample_radial(smooth_bump_radial, 2, 1.0, num=num)
        vals[num] = apply_potential(riesz(2, 1.0), f, t).values
    assert np.max(np.abs(vals[4096] / vals[2048] - 1.0)) < 1e-3


def test_perturbed_decomposition_exact():
    # K = |x|^{alpha-n}(1 + c|x|) with alpha = 1, n = 2, delta = 1 splits as
    # T_pert f - T_riesz f = c * integral of f, exactly
    c = 0.7
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=2048)
    mass = float(np.sum(f.values * f.weights))
    t = np.array([0.3, 0.8, 1.7])
    vp = apply_potential(perturbed(2, 1.0, delta=1.0, c=c), f, t).values
    vr = apply_potential(riesz(2, 1.0), f, t).values
    assert np.max(np.abs((vp - vr) - c * mass)) < 1e-10 * mass


def test_saturated_zero_strength_matches_riesz():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=1024)
    t = np.array([0.3, 0.8, 1.7])
    vs = apply_potential(saturated(2, 1.0, delta=1.0, c=0.0), f, t).values
    vr = apply_potential(riesz(2, 1.0), f, t).values
    assert np.max(np.abs(vs / vr - 1.0)) < 1e-12


def test_gradient_kernel_identity():
    # c |u|^{alpha-n-1} u integrates to -c_{alpha+1} grad T_{alpha+1} f
    a = 0.5
    fc = sample_cartesian(smooth_bump, 2, half_extent=1.3, num=128)
    t = np.array([0.15, 0.45, 0.85])
    pts = np.stack([t * math.cos(0.37), t * math.sin(0.37)], axis=1)
    vg = apply_potential(gradient(2, a), fc, pts).values
    fr = sample_radial(smooth_bump_radial, 2, 1.0, num=8192)
    eps = 1e-5
    k_next = riesz(2, a + 1.0)
    vp = apply_potential(k_next, fr, t + eps).values
    vm = apply_potential(k_next, fr, t - eps).values
    radial_deriv = -constant_c_alpha(2, a + 1.0) * (vp - vm) / (2.0 * eps)
    along = np.sum(vg * pts, axis=1) / t  # radial component
    assert np.max(np.abs(along / radial_deriv - 1.0)) < 5e-3
    # the tangential component vanishes for a radial density
    tang = vg[:, 0] * pts[:, 1] - vg[:, 1] * pts[:, 0]
    assert np.max(np.abs(tang / t)) < 5e-3 * np.max(np.abs(along))


def test_vector_density_contraction():
    # vector kernel against a vector density contracts to sum of per-axis runs
    a = 0.5
    k = gradient(2, a)
    base = sample_cartesian(smooth_bump, 2, half_extent=1.0, num=48)
    vec_values = np.stack([base.values, -2.0 * base.values], axis=1)
    fvec = sample_cartesian(smooth_bump, 2, half_extent=1.0, num=48)
    fvec = fvec.with_values(vec_values)
    pts = np.array([[0.21, 0.13], [0.55, -0.4]])
    dot = apply_potential(k, fvec, pts).values
    per_axis = apply_potential(k, base, pts).values
    manual = per_axis[:, 0] * 1.0 + per_axis[:, 1] * (-2.0)
    assert np.max(np.abs(dot - manual)) < 1e-12 * np.max(np.abs(manual))


@pytest.mark.skipif(not HAS_NUMBA, reason="compiled path unavailable")
def test_accumulate_compiled_matches_numpy():
    from adamsq.potential import _cart_accumulate_nb, _cart_accumulate_np

    f = sample_cartesian(smooth_bump, 2, half_extent=1.0, num=48)
    nodes = np.atleast_2d(f.nodes)
    values = f.values[:, None]
    k = riesz(2, 0.75)
    x = np.array([0.23, 0.11])
    a_nb = _cart_accumulate_nb(x, nodes, values, f.cell_size ** 2, 0,
                               int(k.radial_kind), k.alpha - k.n, 1.0, 0.0,
                               -1, 1)
    a_np = _cart_accumulate_np(x, nodes, values, f.cell_size ** 2, k, -1)
    assert np.max(np.abs(a_nb / a_np - 1.0)) < 1e-13


# ---------------------------------------------------------------------------
# tails and norms
# ---------------------------------------------------------------------------


def test_tail_requires_vanishing_mean():
    f = sample_radial(lambda r: np.ones_like(r), 3, 1.0, num=1024)
    with pytest.raises(MomentConditionError) as exc:
        potential_tail_lp(riesz(3, 2.0), f, 1.0, 1.5)
    assert "decays" in str(exc.value)


def test_tail_requires_critical_exponent():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=512)
    with pytest.raises(ValueError):
        potential_tail_lp(riesz(2, 1.0), f, 1.0, 3.0)  # n/alpha = 2, not 3


def test_tail_of_balanced_source():
    # discrete zero mean: inner cells weighted to cancel the outer mass
    f = balanced_source()
    assert abs(float(np.sum(f.values * f.weights))) < 1e-12
    tail = potential_tail_lp(riesz(2, 1.0), f, 1.0, 2.0)
    assert 0.0 < tail < 1.0
    # far field decays like t^{-3} once the monopole cancels
    pf = apply_potential(riesz(2, 1.0), f, np.array([16.0, 32.0])).values
    scaled = pf * np.array([16.0, 32.0]) ** 3
    assert abs(scaled[1] / scaled[0] - 1.0) < 0.05


def test_full_lp_grid_stability():
    # a mass-carrying source has Tf ~ t^{alpha-n} and infinite critical norm,
    # so the full norm is only defined for balanced sources
    f = balanced_source()
    k = riesz(2, 1.0)
    v1 = potential_full_lp(k, f, 2.0, num=2048)
    v2 = potential_full_lp(k, f, 2.0, num=4096)
    assert abs(v2 / v1 - 1.0) < 1e-3
    mass_f = sample_radial(smooth_bump_radial, 2, 1.0, num=512)
    with pytest.raises(MomentConditionError):
        potential_full_lp(k, mass_f, 2.0, num=512)


# ---------------------------------------------------------------------------
# structure and transforms
# ---------------------------------------------------------------------------


def test_linearity():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=1024)
    g = f.with_values(3.0 * f.values)
    t = np.array([0.3, 0.9, 2.0])
    k = riesz(2, 1.0)
    vf = apply_potential(k, f, t).values
    vg = apply_potential(k, g, t).values
    assert np.max(np.abs(vg - 3.0 * vf)) < 1e-12 * np.max(np.abs(vg))


def test_dilation_covariance():
    # plain dilation g = f(lam .): T g(t) = lam^{-alpha} T f(lam t)
    lam = 2.0
    a = 1.0
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=2048)
    flam = dilate(f, lam, mode="plain")
    t = np.array([0.1, 0.35, 0.75])
    k = riesz(2, a)
    v1 = apply_potential(k, flam, t).values
    v0 = apply_potential(k, f, lam * t).values
    assert np.max(np.abs(v1 / (lam ** -a * v0) - 1.0)) < 1e-6


def test_probe_grid_carries_weights():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=512)
    probe_fn = sample_radial(lambda r: np.zeros_like(r), 2, 2.0, num=256)
    out = apply_potential(riesz(2, 1.0), f, probe_fn)
    assert out.base.weights is not None
    assert out.base.weights.shape == (256,)
    assert math.isinf(out.base.support_radius)


def test_quadrature_error_field():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=512)
    out = apply_potential(riesz(2, 1.0), f, np.array([0.4, 1.2]))
    assert out.quadrature_error.shape == (2,)
    assert np.all(out.quadrature_error >= 0.0)


def test_dimension_mismatch_raises():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=256)
    with pytest.raises(ValueError):
        apply_potential(riesz(3, 2.0), f, np.array([0.5]))


def test_nonpositive_radius_raises():
    f = sample_radial(smooth_bump_radial, 2, 1.0, num=256)
    with pytest.raises(ValueError):
        apply_potential(riesz(2, 1.0), f, np.array([0.0, 0.5]))
