"""Exponential functionals over sampled fields.

exp_functional integrates exp[c |u|^power] (optionally with leading Taylor
terms removed) over balls, annuli, or the whole sampled domain, under
Lebesgue measure or the power weight |x|^{(sigma-1)n}. The regularization
sandwich and the Hoelder perturbation factors are the elementary engines
behind the blow-up and uniformity experiments, and ruf_check tests the
joint-norm constraint.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import truncated_exp
from .kernel import ball_volume

OVERFLOW_EXPONENT = 700.0


@dataclass(frozen=True)
class FunctionalReport:
    """Result of one exponential-functional quadrature."""

    value: float
    constant_used: float
    region: str
    measure: str  # "lebesgue" or "power_weight <sigma>"
    truncation: int = None
    overflow_node: float = None  # radius of the first overflowing cell

    def __post_init__(self):
        if self.value < 0.0:
            raise ValueError("functional values are nonnegative")


def parse_region(region):
    """Parse "all", "ball:R", or "annulus:a:b" into a structured tuple."""
    if region == "all":
        return ("all",)
    parts = str(region).split(":")
    if parts[0] == "ball" and len(parts) == 2:
        radius = float(parts[1])
        if radius <= 0.0:
            raise ValueError("ball radius must be positive")
        return ("ball", radius)
    if parts[0] == "annulus" and len(parts) == 3:
        a, b = float(parts[1]), float(parts[2])
        if not 0.0 <= a < b:
            raise ValueError("annulus needs 0 <= a < b")
        return ("annulus", a, b)
    raise ValueError("region must be all, ball:R, or annulus:a:b")


def _covered_radius(f):
    # outermost radius the sample can integrate over
    if f.layout == "radial":
        if f.bounds is not None:
            return float(f.bounds[-1])
        return float(np.max(f.node_radii()))
    half = 0.5 * f.cell_size if f.cell_size is not None else 0.0
    return float(np.min(np.max(np.abs(f.nodes), axis=0) + half))


def _region_mask(f, parsed):
    radii = f.node_radii()
    if parsed[0] == "all":
        return np.ones(radii.size, dtype=bool)
    outer = parsed[-1]
    if outer > _covered_radius(f) * (1.0 + 1e-12):
        raise ValueError("region extends to %.6g, beyond the sampled "
                         "domain radius %.6g" % (outer, _covered_radius(f)))
    if parsed[0] == "ball":
        return radii <= parsed[1]
    return (radii > parsed[1]) & (radii <= parsed[2])


def _measure_weights(f, sigma):
    """Cell measures under |x|^{(sigma-1)n} dx; Lebesgue when sigma = 1."""
    if sigma == 1.0:
        return np.asarray(f.weights, dtype=float)
    n = f.n
    if f.layout == "radial" and f.bounds is not None:
        b = f.bounds
        # omega_{n-1} int s^{sigma n - 1} ds = |B_1| (b'^{sigma n} - b^{sigma n}) / sigma
        return ball_volume(n) * np.diff(b ** (sigma * n)) / sigma
    return np.asarray(f.weights, dtype=float) * f.node_radii() ** (
        (sigma - 1.0) * n)


def auto_truncation(n, alpha):
    """Smallest N making exp_N(c|u|^{n/(n-alpha)}) integrable on L^{n/alpha}.

    The k-th surviving Taylor term scales like |u|^{k n/(n-alpha)}, so every
    k > N must reach the integrability power n/alpha.
    """
    p = n / alpha
    return max(int(math.ceil(p - 1.0)) - 1, 0)


def exp_functional(u, c, power, region="all", weight_sigma=1.0,
                   truncation=None):
    """Integrate exp[c|u|^power] (or its truncation) over a region.

    u may be a potential field or a plain sample; weight_sigma < 1 switches
    to the measure |x|^{(sigma-1)n} dx, integrated in closed form per radial
    cell. Node exponents above 700 report value +inf with the offending
    radius instead of overflowing.
    """
    base = getattr(u, "base", u)
    if c < 0.0:
        raise ValueError("the exponential constant must be nonnegative")
    if not 0.0 < weight_sigma <= 1.0:
        raise ValueError("weight_sigma must lie in (0, 1]")
    if base.weights is None:
        raise ValueError("the functional needs quadrature weights")
    parsed = parse_region(region)
    mask = _region_mask(base, parsed)
    measure = ("lebesgue" if weight_sigma == 1.0
               else "power_weight %g" % weight_sigma)
    w = _measure_weights(base, weight_sigma)[mask]
    mags = base.magnitude()[mask]
    expo = c * mags ** power
    over = expo > OVERFLOW_EXPONENT
    if np.any(over):
        where = base.node_radii()[mask][over]
        return FunctionalReport(value=math.inf, constant_used=c,
                                region=str(region), measure=measure,
                                truncation=truncation,
                                overflow_node=float(where[0]))
    if truncation is None:
        terms = np.exp(expo)
    else:
        if truncation < 0:
            raise ValueError("truncation index must be nonnegative")
        terms = truncated_exp(expo, truncation)
    return FunctionalReport(value=float(np.sum(w * terms)), constant_used=c,
                            region=str(region), measure=measure,
                            truncation=truncation)


# ---------------------------------------------------------------------------
# the regularization sandwich
# ---------------------------------------------------------------------------


def regularization_sandwich(u, c, p):
    """Lower/middle/upper exponential integrals certifying the sandwich.

    With p' = p/(p-1) and N = ceil(p) - 1 Taylor terms removed:

        int_{|u|>=1} e^{c|u|^{p'}} - e^c ||u||_p^p
          <= int exp_N(c|u|^{p'})
          <= int_{|u|>=1} e^{c|u|^{p'}} + e^c ||u||_p^p.
    """
    base = getattr(u, "base", u)
    if base.weights is None:
        raise ValueError("the sandwich needs quadrature weights")
    if p <= 1.0:
        raise ValueError("need p > 1")
    conj = p / (p - 1.0)
    w = np.asarray(base.weights, dtype=float)
    mags = base.magnitude()
    norm_term = math.exp(c) * float(np.sum(w * mags ** p))
    big = mags >= 1.0
    head = float(np.sum(w[big] * np.exp(c * mags[big] ** conj)))
    n_trunc = int(math.ceil(p)) - 1
    middle = float(np.sum(w * truncated_exp(c * mags ** conj, n_trunc)))
    return head - norm_term, middle, head + norm_term


# ---------------------------------------------------------------------------
# Hoelder perturbation factors
# ---------------------------------------------------------------------------


def holder_perturbation(tau, p, a, beta, mode):
    """Multiplicative (mode A) or additive (mode B) perturbation bound.

    Mode A: exp[(1/a) (tau^{beta'}/(1 - p^{beta'}))^{beta/beta'}], the cost
    of absorbing a seminorm p < 1 of the split part. Mode B: the additive
    shift tau (1 - p^{beta'})^{1/beta'}.
    """
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if not 0.0 <= p <= 1.0:
        raise ValueError("the seminorm value must lie in [0, 1]")
    if beta <= 1.0:
        raise ValueError("need beta > 1")
    conj = beta / (beta - 1.0)
    if mode == "A":
        if p >= 1.0:
            raise ValueError("mode A needs seminorm < 1")
        if a <= 0.0:
            raise ValueError("mode A needs a > 0")
        if tau == 0.0:
            return 1.0
        inner = tau ** conj / (1.0 - p ** conj)
        return math.exp(inner ** (beta / conj) / a)
    if mode == "B":
        return tau * (1.0 - p ** conj) ** (1.0 / conj)
    raise ValueError("mode must be A or B")


# ---------------------------------------------------------------------------
# joint-norm constraint
# ---------------------------------------------------------------------------


def ruf_check(f_norm, tf_norm, n, alpha):
    """Whether f_norm^{n/alpha} + tf_norm^{n/alpha} <= 1, with the slack."""
    if f_norm < 0.0 or tf_norm < 0.0:
        raise ValueError("norms are nonnegative")
    p = n / alpha
    slack = 1.0 - (f_norm ** p + tf_norm ** p)
    return slack >= 0.0, slack
