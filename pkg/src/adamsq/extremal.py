"""Extremal families for the sharp exponential-integrability constants.

The pieces assembled here: annular kernel-power profiles whose potential
saturates the sharp constant, orthonormal polynomial bases on balls with
exact monomial integrals, removal of low-order polynomial moments, the
radius/epsilon schedule balancing the two norm contributions, the joint-norm
normalization, and logarithmic peak profiles with analytic gradients.
"""

import math
from dataclasses import dataclass

import numpy as np

from .field import SampledFunction, q_norm, radial_grid
from .kernel import (
    RK_GRADIENT,
    RK_RIESZ,
    ball_volume,
    angular_quadrature,
    constant_A_g,
    eval_kernel,
    sphere_area,
)

GRAM_CONDITION_CAP = 1e12


class PrecisionError(RuntimeError):
    """Raised when a closed-form assembly loses too much precision."""


# ---------------------------------------------------------------------------
# parameter bundle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtremalSpec:
    """Annulus parameters (epsilon, r) with the derived schedule constants.

    a_g is the angular constant of the kernel, b_r the outer-annulus kernel
    integral, and b_eps_r = a_g * log(1/(eps*r)^n) + b_r the combined
    normalization exponent. norm_const records an applied normalization.
    """

    epsilon: float
    r: float
    q: float = 1.0
    theta: float = None
    sigma: float = 1.0
    n: int = None
    a_g: float = None
    b_r: float = None
    b_eps_r: float = None
    norm_const: float = None

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.r < 1.0:
            raise ValueError("outer radius must satisfy r >= 1")
        if self.epsilon * self.r >= 1.0:
            raise ValueError("need epsilon * r < 1")
        if not 1.0 <= self.q:
            raise ValueError("q must lie in [1, inf]")
        if self.theta is not None and not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if not 0.0 < self.sigma <= 1.0:
            raise ValueError("sigma must lie in (0, 1]")


def extremal_spec(kernel, epsilon, r, q=1.0, theta=None, sigma=1.0):
    """ExtremalSpec with the kernel-derived constants filled in."""
    a_g = constant_A_g(kernel)
    br = b_r_constant(kernel, r)
    b_eps_r = a_g * kernel.n * math.log(1.0 / (epsilon * r)) + br
    return ExtremalSpec(epsilon=epsilon, r=r, q=q, theta=theta, sigma=sigma,
                        n=kernel.n, a_g=a_g, b_r=br, b_eps_r=b_eps_r)


# ---------------------------------------------------------------------------
# polynomial bases on balls
# ---------------------------------------------------------------------------


def monomial_ball_integral(n, exponents, r=1.0):
    """Exact integral of y^a over the ball of radius r.

    Odd exponents vanish by symmetry; even ones reduce to Gamma values:
    int_{B_1} y^a dy = prod Gamma((a_i+1)/2) / Gamma((n+|a|)/2 + 1).
    """
    a = tuple(int(e) for e in exponents)
    if len(a) != n or any(e < 0 for e in a):
        raise ValueError("need %d nonnegative exponents" % n)
    if any(e % 2 for e in a):
        return 0.0
    total = sum(a)
    val = 1.0
    for e in a:
        val *= math.gamma((e + 1) / 2.0)
    val /= math.gamma((n + total) / 2.0 + 1.0)
    return val * r ** (n + total)


def _monomials_up_to(n, m):
    # graded order, lexicographic within a degree
    out = []
    for total in range(m + 1):
        level = []
        _fill_indices(n, total, (), level)
        out.extend(sorted(level, reverse=True))
    return out


def _fill_indices(n, total, prefix, out):
    if n == 1:
        out.append(prefix + (total,))
        return
    for head in range(total + 1):
        _fill_indices(n - 1, total - head, prefix + (head,), out)


@dataclass(frozen=True)
class BallPolyBasis:
    """Orthonormal polynomial basis on B_r under the plain L2 pairing.

    coeffs[k] holds the expansion of the k-th basis polynomial over the
    monomials y^exponents[j]; the first element is the constant |B_r|^{-1/2}.
    """

    n: int
    m: int
    r: float
    exponents: tuple
    coeffs: np.ndarray

    @property
    def size(self):
        return self.coeffs.shape[0]

    def evaluate(self, points):
        """Basis values at an (P, n) point array, returned as (P, size)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mono = np.empty((pts.shape[0], len(self.exponents)))
        for j, expo in enumerate(self.exponents):
            mono[:, j] = np.prod(pts ** np.asarray(expo), axis=1)
        return mono @ self.coeffs.T

    def projection_kernel(self, y, z):
        """P_m(y, z) = sum_k v_k(y) v_k(z) for single points y, z."""
        vy = self.evaluate(np.asarray(y, dtype=float)[None, :])[0]
        vz = self.evaluate(np.asarray(z, dtype=float)[None, :])[0]
        return float(vy @ vz)


def ball_poly_basis(n, m, r=1.0):
    """Gram-Schmidt over the monomials of degree <= m on B_r.

    Inner products come from the exact closed-form ball integrals, so the
    resulting Gram matrix is the identity to rounding.
    """
    if n not in (1, 2, 3):
        raise ValueError("dimension must be 1, 2, or 3")
    if not 0 <= m <= n:
        raise ValueError("moment degree must satisfy 0 <= m <= n")
    monos = _monomials_up_to(n, m)
    k = len(monos)
    gram = np.empty((k, k))
    for i in range(k):
        for j in range(i + 1):
            a = tuple(x + y for x, y in zip(monos[i], monos[j]))
            gram[i, j] = gram[j, i] = monomial_ball_integral(n, a, r)
    if np.linalg.cond(gram) > GRAM_CONDITION_CAP:
        raise PrecisionError("monomial Gram matrix condition exceeds 1e12; "
                             "rescale the ball radius")
    # inverse Cholesky factors give the orthonormalizing coefficients
    chol = np.linalg.cholesky(gram)
    coeffs = np.linalg.solve(chol, np.eye(k))
    return BallPolyBasis(n=n, m=m, r=float(r), exponents=tuple(monos),
                         coeffs=coeffs)


# ---------------------------------------------------------------------------
# moment removal
# ---------------------------------------------------------------------------


def _radial_even_design(nodes, m, r):
    # columns 1, |y|^2, ..., up to degree m
    powers = np.arange(0, m + 1, 2)
    return (nodes[:, None] / r) ** powers[None, :]


def moment_normalize(f, basis):
    """Subtract the discrete projection onto polynomials of degree <= m.

    The projection solves the weighted normal equations on f's own grid, so
    every discrete moment of the result vanishes to rounding. Radial samples
    only ever excite the even radial span {1, |y|^2, ...} and are reduced to
    it.
    """
    if f.weights is None:
        raise ValueError("moment removal needs quadrature weights")
    if f.support_radius > basis.r * (1.0 + 1e-12):
        raise ValueError("support radius %.6g exceeds the basis ball %.6g"
                         % (f.support_radius, basis.r))
    vals = np.asarray(f.values, dtype=float)
    if vals.ndim != 1:
        raise ValueError("moment removal applies to scalar samples")
    if f.layout == "radial":
        design = _radial_even_design(f.nodes, basis.m, basis.r)
    else:
        design = basis.evaluate(f.nodes)
    w = np.asarray(f.weights, dtype=float)
    gram = design.T @ (design * w[:, None])
    rhs = design.T @ (w * vals)
    coef = np.linalg.solve(gram, rhs)
    return f.with_values(vals - design @ coef)


# ---------------------------------------------------------------------------
# annular kernel-power profiles
# ---------------------------------------------------------------------------


def adams_profile(kernel, spec, num=2048):
    """phi(y) = K(-y) |K(-y)|^{alpha/(n-alpha) - 1} on eps*r < |y| <= r.

    For the plain power kernel this is |y|^{-alpha} on the annulus. Vector
    kernels give radially-directed profiles; the returned values hold the
    signed radial component, so magnitude() is |K|^{alpha/(n-alpha)}.
    """
    if spec.epsilon * spec.r >= 1.0:
        raise ValueError("need epsilon * r < 1")
    n = kernel.n
    inner_edge = spec.epsilon * spec.r
    # two geometric segments with the annulus edge exactly on a cell bound:
    # a zero-valued pad down to edge/100 keeps the inner ball represented
    # for later moment removal
    pad = max(num // 8, 16)
    inner_bounds = np.geomspace(inner_edge * 1e-2, inner_edge, pad + 1)
    outer_bounds = np.geomspace(inner_edge, spec.r, num + 1)
    bounds = np.concatenate([inner_bounds, outer_bounds[1:]])
    nodes = np.sqrt(bounds[:-1] * bounds[1:])
    weights = ball_volume(n) * (bounds[1:] ** n - bounds[:-1] ** n)
    pts = np.zeros((nodes.size, n))
    pts[:, 0] = -nodes  # K(-y) along the first axis
    raw = eval_kernel(kernel, pts)
    if kernel.components == 1:
        comp = np.asarray(raw, dtype=float)
    else:
        # radial component of K(-y) along +y: the first coordinate of the
        # evaluation at -|y| e_1
        comp = np.asarray(raw, dtype=float)[:, 0]
    expo = kernel.alpha / (n - kernel.alpha)
    vals = comp * np.abs(comp) ** (expo - 1.0)
    vals[(nodes <= inner_edge) | (nodes > spec.r)] = 0.0
    return SampledFunction(layout="radial", n=n, nodes=nodes, values=vals,
                           weights=weights, support_radius=float(spec.r),
                           bounds=bounds)


# ---------------------------------------------------------------------------
# schedule and normalization
# ---------------------------------------------------------------------------


def schedule_parameters(epsilon, q, a_g, c_1, n, theta=None, b_r=0.0):
    """Pick r from epsilon and q: r^n = (a_g/(2 c_1)) * log(1/eps^n)^{1/q'}.

    theta overrides epsilon through eps^n = exp(-1/(1-theta)). The regime
    checks reject epsilons too large for the schedule: the combined exponent
    must dominate half the annulus term and c_1 r^n / b_eps_r must stay
    below log(1/eps^n)^{-1/q}. b_r defaults to 0, which only tightens both
    checks since b_r >= 0.
    """
    if c_1 <= 0.0:
        raise ValueError("c_1 must be positive")
    if not 1.0 <= q:
        raise ValueError("q must lie in [1, inf]")
    if theta is not None:
        if not 0.0 < theta < 1.0:
            raise ValueError("theta must lie in (0, 1) to set epsilon")
        epsilon = math.exp(-1.0 / (n * (1.0 - theta)))
    big_l = n * math.log(1.0 / epsilon)
    if big_l <= 0.0:
        raise ValueError("epsilon must lie in (0, 1)")
    conj = 0.0 if q == 1.0 else (1.0 if q == math.inf else 1.0 - 1.0 / q)
    rn = (a_g / (2.0 * c_1)) * big_l ** conj
    r = rn ** (1.0 / n)
    if r < 1.0:
        raise ValueError(
            "epsilon not small enough: schedule gives r^n = %.6g < 1; need "
            "log(1/eps^n) >= %.6g" % (rn, (2.0 * c_1 / a_g) ** (1.0 / conj)
                                      if conj > 0 else math.inf))
    if epsilon * r >= 1.0:
        raise ValueError(
            "epsilon not small enough: eps * r = %.6g >= 1" % (epsilon * r))
    b_eps_r = a_g * n * math.log(1.0 / (epsilon * r)) + b_r
    if b_eps_r < 0.5 * a_g * big_l:
        raise ValueError(
            "epsilon not small enough: combined exponent %.6g falls below "
            "half the annulus term %.6g" % (b_eps_r, 0.5 * a_g * big_l))
    decay = 1.0 if q == math.inf else big_l ** (-1.0 / q)
    if c_1 * rn / b_eps_r > decay:
        raise ValueError(
            "epsilon not small enough: c_1 r^n / b_eps_r = %.6g exceeds "
            "log(1/eps^n)^{-1/q} = %.6g" % (c_1 * rn / b_eps_r, decay))
    return ExtremalSpec(epsilon=epsilon, r=r, q=q, theta=theta, n=n,
                        a_g=a_g, b_r=b_r, b_eps_r=b_eps_r)


def ruf_normalize(f_tilde, tf_norm, q, alpha):
    """Divide by the joint q-norm of (||f||_{n/alpha}, tf_norm).

    Returns the scaled sample and the applied scale; afterwards the joint
    norm of the scaled pair equals 1.
    """
    from .field import lp_norm

    n = f_tilde.n
    fnorm = lp_norm(f_tilde, n / alpha)
    if not (math.isfinite(fnorm) and math.isfinite(tf_norm)):
        raise ValueError("norms must be finite")
    if fnorm == 0.0 and tf_norm == 0.0:
        raise ValueError("cannot normalize the zero pair")
    joint = q_norm(fnorm, tf_norm, q, n, alpha)
    scale = 1.0 / joint
    return f_tilde.with_values(np.asarray(f_tilde.values) * scale), scale


def b_r_constant(kernel, r, quadrature=False):
    """int over 1 <= |y| <= r of |K|^{n/(n-alpha)}.

    Power-form kernels reduce to omega_{n-1} log r times the profile factor;
    other kernels integrate a sphere average over a log-radius Gauss rule.
    quadrature=True forces the quadrature branch.
    """
    if r < 1.0:
        raise ValueError("outer radius must satisfy r >= 1")
    if r == 1.0:
        return 0.0
    n, alpha = kernel.n, kernel.alpha
    p = n / (n - alpha)
    if not quadrature and kernel.radial_kind == RK_RIESZ:
        return sphere_area(n) * math.log(r)
    if not quadrature and kernel.radial_kind == RK_GRADIENT:
        return kernel.radial_params[0] ** p * sphere_area(n) * math.log(r)
    u, w = np.polynomial.legendre.leggauss(96)
    logr = math.log(r)
    total = 0.0
    for ui, wi in zip(u, w):
        s = math.exp(0.5 * logr * (ui + 1.0))

        def shell(omega, s=s):
            vals = kernel.evaluate(s * omega)
            return np.linalg.norm(vals, axis=1) ** p

        total += wi * s ** n * angular_quadrature(n, shell)
    return total * 0.5 * logr


# ---------------------------------------------------------------------------
# logarithmic peak profiles
# ---------------------------------------------------------------------------


def _moser_pieces(epsilon, n, domain):
    if domain == "full_ball":
        plateau = n * math.log(1.0 / epsilon)
        slope = 4.0 * n * math.log(2.0)

        def value(rr):
            out = np.where(rr <= epsilon, plateau, 0.0)
            mids = (rr > epsilon) & (rr <= 0.5)
            out = np.where(mids, -n * np.log(np.maximum(rr, 1e-300)), out)
            lin = (rr > 0.5) & (rr <= 0.75)
            return np.where(lin, slope * (0.75 - rr), out)

        def grad(rr):
            out = np.where((rr > epsilon) & (rr <= 0.5), n / rr, 0.0)
            return np.where((rr > 0.5) & (rr <= 0.75), slope, out)

        return value, grad, 0.75
    if domain == "half_ball":
        plateau = math.log(1.0 / epsilon)

        def value(rr):
            out = np.where(rr <= epsilon, plateau, 0.0)
            mids = (rr > epsilon) & (rr <= 1.0)
            return np.where(mids, -np.log(np.maximum(rr, 1e-300)), out)

        def grad(rr):
            return np.where((rr > epsilon) & (rr <= 1.0), 1.0 / rr, 0.0)

        return value, grad, 1.0
    raise ValueError("domain must be full_ball or half_ball")


def _moser_sample(epsilon, n, domain, which, num):
    if not 0.0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    value, grad, outer = _moser_pieces(epsilon, n, domain)
    nodes, weights, bounds = radial_grid(n, outer, num=num,
                                         inner=epsilon * 1e-3)
    if domain == "half_ball":
        weights = 0.5 * weights  # integrals run over the half domain
    fn = value if which == "value" else grad
    return SampledFunction(layout="radial", n=n, nodes=nodes,
                           values=fn(nodes), weights=weights,
                           support_radius=outer, bounds=bounds)


def moser_profile(epsilon, n, domain="full_ball", num=4096):
    """Capped logarithmic peak: plateau, log decay, then cutoff to zero.

    full_ball: log(1/eps^n) inside |x| <= eps, log(1/|x|^n) out to 1/2,
    linear to zero on [1/2, 3/4]. half_ball: the unsmoothed log profile
    (plateau log(1/eps), log decay to |x| = 1) with weights covering the
    half domain.
    """
    return _moser_sample(epsilon, n, domain, "value", num)


def moser_gradient(epsilon, n, domain="full_ball", num=4096):
    """|grad| of the matching peak profile, analytic on each piece."""
    return _moser_sample(epsilon, n, domain, "gradient", num)
