"""Tests for exponential functionals, the sandwich, and perturbation factors."""

import math

import numpy as np
import pytest

from adamsq.extremal import ruf_normalize
from adamsq.field import lp_norm, sample_cartesian, sample_radial
from adamsq.functional import (
    FunctionalReport,
    auto_truncation,
    exp_functional,
    holder_perturbation,
    parse_region,
    regularization_sandwich,
    ruf_check,
)


def unit_disk_sample(value, num=256, inner=1e-9):
    return sample_radial(lambda r: np.full_like(r, value), n=2, r_support=1.0,
                         num=num, inner=inner)


# ---------------------------------------------------------------------------
# region parsing and report plumbing
# ---------------------------------------------------------------------------


def test_parse_region_forms():
    assert parse_region("all") == ("all",)
    assert parse_region("ball:2.5") == ("ball", 2.5)
    assert parse_region("annulus:0.5:1") == ("annulus", 0.5, 1.0)


@pytest.mark.parametrize("bad", ["ball", "ball:-1", "annulus:1:0.5",
                                 "annulus:1", "cube:1", "annulus:-1:2"])
def test_parse_region_rejects(bad):
    with pytest.raises(ValueError):
        parse_region(bad)


def test_report_rejects_negative_value():
    with pytest.raises(ValueError):
        FunctionalReport(value=-1.0, constant_used=1.0, region="all",
                         measure="lebesgue")


# ---------------------------------------------------------------------------
# frozen values
# ---------------------------------------------------------------------------


def test_zero_field_gives_region_measure():
    # exp(0) = 1, so the functional is the Lebesgue measure of the disk
    f = unit_disk_sample(0.0)
    rep = exp_functional(f, c=3.0, power=2.0, region="ball:1")
    assert rep.value == pytest.approx(math.pi, rel=1e-12)
    assert rep.measure == "lebesgue"
    assert rep.truncation is None
    assert rep.overflow_node is None


def test_zero_field_truncated_vanishes():
    f = unit_disk_sample(0.0)
    rep = exp_functional(f, c=3.0, power=2.0, region="all", truncation=0)
    assert rep.value == 0.0
    assert rep.truncation == 0


def test_constant_field_power_weight():
    # nu(B_1) = |B_1| / sigma = 2 pi for sigma = 1/2 in the plane
    f = unit_disk_sample(1.0)
    c = 0.7
    rep = exp_functional(f, c=c, power=2.0, region="ball:1",
                         weight_sigma=0.5)
    assert rep.value == pytest.approx(2.0 * math.pi * math.exp(c), rel=1e-8)
    assert rep.measure == "power_weight 0.5"


def test_overflow_reports_infinity_with_node():
    f = unit_disk_sample(30.0)
    rep = exp_functional(f, c=1.0, power=2.0)
    assert rep.value == math.inf
    assert rep.overflow_node is not None
    assert 0.0 < rep.overflow_node < 1.0
    trunc = exp_functional(f, c=1.0, power=2.0, truncation=3)
    assert trunc.value == math.inf


def test_ball_annulus_partition_is_exact():
    f = unit_disk_sample(0.4)
    whole = exp_functional(f, c=1.0, power=2.0, region="all").value
    ball = exp_functional(f, c=1.0, power=2.0, region="ball:0.5").value
    ring = exp_functional(f, c=1.0, power=2.0, region="annulus:0.5:1").value
    assert ball + ring == pytest.approx(whole, rel=1e-14)


def test_region_beyond_domain_rejected():
    f = unit_disk_sample(0.0)
    with pytest.raises(ValueError, match="beyond the sampled domain"):
        exp_functional(f, c=1.0, power=2.0, region="ball:2")
    with pytest.raises(ValueError, match="beyond the sampled domain"):
        exp_functional(f, c=1.0, power=2.0, region="annulus:0.5:1.5")


def test_cartesian_ball_region():
    f = sample_cartesian(lambda x: np.zeros(x.shape[0]), n=2,
                         half_extent=1.0, num=256)
    rep = exp_functional(f, c=1.0, power=2.0, region="ball:0.5")
    assert rep.value == pytest.approx(math.pi * 0.25, rel=2e-2)


def test_cartesian_power_weight():
    # int_{B_R} |x|^{-1} dx = 2 pi R; node-sampled weight, so loose tol
    f = sample_cartesian(lambda x: np.zeros(x.shape[0]), n=2,
                         half_extent=1.0, num=256)
    rep = exp_functional(f, c=1.0, power=2.0, region="ball:0.5",
                         weight_sigma=0.5)
    assert rep.value == pytest.approx(math.pi, rel=0.1)


# ---------------------------------------------------------------------------
# invariants
# ---------------------------------------------------------------------------


def test_monotone_in_constant_and_region():
    f = sample_radial(lambda r: 1.0 / (1.0 + r), n=2, r_support=1.0, num=512)
    vals = [exp_functional(f, c=c, power=2.0).value for c in (0.5, 1.0, 2.0)]
    assert vals[0] < vals[1] < vals[2]
    regions = ["ball:0.3", "ball:0.8", "all"]
    nested = [exp_functional(f, c=1.0, power=2.0, region=r).value
              for r in regions]
    assert nested[0] < nested[1] < nested[2]


def test_truncation_tail_bound():
    # plain - truncated = int sum_{k<=N} (c|u|^{p'})^k / k!; each term is at
    # most c^k |u|^p / k! once |u| >= 1 and N p' <= p, so the gap is below
    # e^c ||u||_p^p
    n, alpha = 2.0, 0.5
    p = n / alpha
    conj = n / (n - alpha)
    N = auto_truncation(n, alpha)
    assert N * conj <= p
    f = sample_radial(lambda r: 1.0 + r, n=2, r_support=1.0, num=512)
    c = 0.8
    plain = exp_functional(f, c=c, power=conj).value
    trunc = exp_functional(f, c=c, power=conj, truncation=N).value
    gap = plain - trunc
    assert gap >= 0.0
    assert gap <= math.exp(c) * lp_norm(f, p) ** p * (1.0 + 1e-12)


def test_auto_truncation_values():
    assert auto_truncation(2, 1.0) == 0
    assert auto_truncation(2, 0.5) == 2
    assert auto_truncation(3, 2.0) == 0
    assert auto_truncation(3, 1.0) == 1
    for n in (1, 2, 3):
        for alpha in (0.25, 0.5, 1.0, 1.5):
            if alpha >= n:
                continue
            p = n / alpha
            conj = n / (n - alpha)
            N = auto_truncation(n, alpha)
            # first surviving Taylor power reaches integrability
            assert (N + 1) * conj >= p - 1e-12
            if N > 0:
                assert N * conj < p + 1e-12


def test_argument_validation():
    f = unit_disk_sample(1.0)
    with pytest.raises(ValueError, match="nonnegative"):
        exp_functional(f, c=-1.0, power=2.0)
    with pytest.raises(ValueError, match="weight_sigma"):
        exp_functional(f, c=1.0, power=2.0, weight_sigma=1.5)
    with pytest.raises(ValueError, match="truncation"):
        exp_functional(f, c=1.0, power=2.0, truncation=-1)
    bare = f.with_values(f.values)
    object.__setattr__(bare, "weights", None)
    with pytest.raises(ValueError, match="weights"):
        exp_functional(bare, c=1.0, power=2.0)


# ---------------------------------------------------------------------------
# the regularization sandwich
# ---------------------------------------------------------------------------


def test_sandwich_matches_closed_form():
    # u = 2 on a set of measure one, p = 2, c = 1
    radius = math.sqrt(1.0 / math.pi + 1e-18)
    f = sample_radial(lambda r: np.full_like(r, 2.0), n=2, r_support=radius,
                      num=256, inner=1e-9)
    lower, middle, upper = regularization_sandwich(f, c=1.0, p=2.0)
    e4 = math.exp(4.0)
    assert lower == pytest.approx(e4 - 4.0 * math.e, rel=1e-12)
    assert middle == pytest.approx(e4 - 1.0 - 4.0, rel=1e-12)
    assert upper == pytest.approx(e4 + 4.0 * math.e, rel=1e-12)


def test_sandwich_zero_field():
    f = unit_disk_sample(0.0)
    lower, middle, upper = regularization_sandwich(f, c=1.0, p=2.0)
    assert lower == 0.0 and middle == 0.0 and upper == 0.0


def test_sandwich_ordering_random():
    rng = np.random.default_rng(20260817)
    for _ in range(100):
        num = int(rng.integers(32, 200))
        amp = float(rng.uniform(0.2, 2.0))
        decay = float(rng.uniform(0.5, 4.0))
        f = sample_radial(lambda r: amp * np.exp(-decay * r), n=2,
                          r_support=2.0, num=num)
        c = float(rng.uniform(0.1, 2.0))
        # keep c * amp^{p'} well under the overflow threshold
        p = float(rng.uniform(1.5, 4.0))
        lower, middle, upper = regularization_sandwich(f, c=c, p=p)
        assert math.isfinite(middle)
        span = max(abs(lower), abs(upper), 1.0)
        assert lower <= middle + 1e-12 * span
        assert middle <= upper + 1e-12 * span


def test_sandwich_needs_p_above_one():
    f = unit_disk_sample(1.0)
    with pytest.raises(ValueError, match="p > 1"):
        regularization_sandwich(f, c=1.0, p=1.0)


# ---------------------------------------------------------------------------
# Hoelder perturbation factors
# ---------------------------------------------------------------------------


def test_holder_mode_a_limits():
    assert holder_perturbation(0.0, 0.5, 2.0, 2.0, "A") == 1.0
    tau, a, beta = 1.3, 2.0, 3.0
    assert holder_perturbation(tau, 0.0, a, beta, "A") == pytest.approx(
        math.exp(tau ** beta / a), rel=1e-14)


def test_holder_mode_b():
    beta = 2.0
    # beta' = 2: shift tau sqrt(1 - p^2)
    assert holder_perturbation(1.0, 0.6, 1.0, beta, "B") == pytest.approx(
        math.sqrt(1.0 - 0.36), rel=1e-14)
    assert holder_perturbation(1.0, 1.0, 1.0, beta, "B") == 0.0


def test_holder_validation():
    with pytest.raises(ValueError):
        holder_perturbation(-1.0, 0.5, 1.0, 2.0, "A")
    with pytest.raises(ValueError):
        holder_perturbation(1.0, 1.0, 1.0, 2.0, "A")
    with pytest.raises(ValueError):
        holder_perturbation(1.0, 0.5, 1.0, 1.0, "A")
    with pytest.raises(ValueError):
        holder_perturbation(1.0, 1.5, 1.0, 2.0, "B")
    with pytest.raises(ValueError):
        holder_perturbation(1.0, 0.5, 1.0, 2.0, "C")
    with pytest.raises(ValueError):
        holder_perturbation(1.0, 0.5, 0.0, 2.0, "A")


def test_split_inequality_equality_case():
    # a theta^{1/beta'} + b (1-theta)^{1/beta'} at a = b = 1, theta = 1/2,
    # beta = 2 meets (a^beta + b^beta)^{1/beta} = sqrt(2) exactly
    beta = 2.0
    conj = beta / (beta - 1.0)
    lhs = 0.5 ** (1.0 / conj) + 0.5 ** (1.0 / conj)
    rhs = 2.0 ** (1.0 / beta)
    assert lhs == pytest.approx(rhs, rel=1e-15)


def test_split_inequality_random_draws():
    rng = np.random.default_rng(914)
    a = rng.uniform(0.0, 5.0, size=10000)
    b = rng.uniform(0.0, 5.0, size=10000)
    theta = rng.uniform(0.0, 1.0, size=10000)
    beta = rng.uniform(1.05, 8.0, size=10000)
    conj = beta / (beta - 1.0)
    lhs = a * theta ** (1.0 / conj) + b * (1.0 - theta) ** (1.0 / conj)
    rhs = (a ** beta + b ** beta) ** (1.0 / beta)
    assert np.all(lhs <= rhs + 1e-12 * np.maximum(rhs, 1.0))


# ---------------------------------------------------------------------------
# joint-norm constraint
# ---------------------------------------------------------------------------


def test_ruf_check_trivial_cases():
    passed, slack = ruf_check(0.0, 0.0, 2, 1.0)
    assert passed and slack == 1.0
    passed, slack = ruf_check(1.0, 0.0, 2, 1.0)
    assert passed and slack == 0.0
    passed, slack = ruf_check(1.0, 0.5, 2, 1.0)
    assert not passed and slack < 0.0
    with pytest.raises(ValueError):
        ruf_check(-1.0, 0.0, 2, 1.0)


def test_ruf_check_after_normalization():
    n, alpha = 2, 1.0
    f = sample_radial(lambda r: np.exp(-r), n=n, r_support=3.0, num=512)
    tf_norm = 0.7
    scaled, scale = ruf_normalize(f, tf_norm, q=1.0, alpha=alpha)
    passed, slack = ruf_check(lp_norm(scaled, n / alpha), tf_norm * scale,
                              n, alpha)
    assert passed or slack > -1e-10
    assert abs(slack) <= 1e-10
