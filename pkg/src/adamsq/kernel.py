"""Riesz-type kernels: evaluation, ring integrals, expansion terms, sharp constants.

A kernel here is a (possibly vector-valued) function K on R^n \\ {0} whose leading
behaviour at the origin and at infinity is |x|^{alpha-n} times an angular profile.
The module ships four built-in families selectable by name:

* ``riesz``               K(x) = |x|^{alpha-n}
* ``gradient``            K(x) = c |x|^{alpha-n-1} x  (vector; c chosen so the
                          potential inverts the gradient-type operator)
* ``perturbed:<d>:<c>``   K(x) = |x|^{alpha-n} (1 + c |x|^d), a correction-term
                          witness that is admissible near 0 but violates the
                          global bound at infinity (useful for negative tests)
* ``saturated:<d>:<c>``   K(x) = |x|^{alpha-n} (1 + c |x|^d / (1 + |x|^d)),
                          admissible on all of R^n but not homogeneous

plus custom kernels built from a user callable. All sharp constants route
through the module's own Gamma implementation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .gammafn import gamma, ln_gamma

# radial-factor kind tags shared with the accelerated loops
RK_CUSTOM = -1
RK_RIESZ = 0
RK_PERTURBED = 1
RK_SATURATED = 2
RK_GRADIENT = 3


class QuadratureError(RuntimeError):
    """Quadrature failed to meet tolerance; carries the achieved estimate."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


def sphere_area(n):
    """Surface measure of S^{n-1}: 2 pi^{n/2} / Gamma(n/2). For n=1 this is 2."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


def ball_volume(n, r=1.0):
    """Volume of the ball of radius r in R^n."""
    return sphere_area(n) / n * r ** n


@dataclass(frozen=True)
class AngularProfile:
    """Leading angular factor g on the unit sphere, one value per component."""

    evaluator: object  # (M, n) unit vectors -> (M, m)
    lipschitz_bound: float = None
    description: str = ""

    def __call__(self, omega):
        omega = np.atleast_2d(np.asarray(omega, dtype=float))
        out = np.asarray(self.evaluator(omega), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out


@dataclass(frozen=True)
class KernelSpec:
    """Immutable description of one kernel; all operations are pure."""

    name: str
    n: int
    alpha: float
    components: int
    angular: AngularProfile
    correction_exponent: float  # exponent of the admissible correction term
    correction_bound: float  # constant bounding the correction residual
    global_bound: float  # constant C with |K(x)| <= C |x|^{alpha-n}
    lipschitz_bound: float  # constant for the difference quotient bound
    regularity: int  # derivative orders controlled like |x|^{alpha-n-j}
    homogeneous: bool
    radial_kind: int = RK_CUSTOM
    radial_params: tuple = ()  # (delta, c) for the perturbed/saturated factors
    evaluator: object = None  # custom kernels: (M, n) -> (M, m)

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2, or 3, got %r" % (self.n,))
        if not (0.0 < self.alpha < self.n):
            raise ValueError(
                "order must lie in (0, n): alpha=%r, n=%r" % (self.alpha, self.n)
            )
        if self.components < 1:
            raise ValueError("kernel needs at least one component")
        if self.correction_exponent <= 0 or self.global_bound <= 0:
            raise ValueError("correction exponent and global bound must be positive")

    # -- evaluation ---------------------------------------------------------

    def radial_factor(self, r):
        """Factor rho(r) with K(x) = |x|^{alpha-n} rho(|x|) for scalar built-ins."""
        r = np.asarray(r, dtype=float)
        if self.radial_kind == RK_RIESZ:
            return np.ones_like(r)
        if self.radial_kind == RK_PERTURBED:
            delta, c = self.radial_params
            return 1.0 + c * r ** delta
        if self.radial_kind == RK_SATURATED:
            delta, c = self.radial_params
            rd = r ** delta
            return 1.0 + c * rd / (1.0 + rd)
        raise ValueError("kernel %r has no scalar radial factor" % (self.name,))

    def evaluate(self, pts):
        """K at an (M, n) array of nonzero points; returns (M, components)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r = np.sqrt(np.sum(pts * pts, axis=1))
        if np.any(r == 0.0):
            raise ValueError("kernel is singular at the origin")
        if self.radial_kind in (RK_RIESZ, RK_PERTURBED, RK_SATURATED):
            vals = r ** (self.alpha - self.n) * self.radial_factor(r)
            return vals[:, None]
        if self.radial_kind == RK_GRADIENT:
            (const,) = self.radial_params
            return const * (r ** (self.alpha - self.n - 1.0))[:, None] * pts
        out = np.asarray(self.evaluator(pts), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out


@dataclass(frozen=True)
class TaylorTerm:
    """Degree-j homogeneous term of the expansion of K(x - y) in y around y=0.

    coefficients maps multi-indices k (tuples of length n with |k| = degree)
    to reals; the term value is sum_k c_k y^k.
    """

    degree: int
    base_point: tuple
    coefficients: dict

    def __call__(self, y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        total = np.zeros(y.shape[0])
        for k, c in self.coefficients.items():
            mono = np.ones(y.shape[0])
            for axis, power in enumerate(k):
                if power:
                    mono = mono * y[:, axis] ** power
            total += c * mono
        return total if total.shape[0] > 1 else float(total[0])


@dataclass(frozen=True)
class SharpConstants:
    """The closed-form constants attached to one (n, alpha) pair."""

    n: int
    alpha: float
    c_alpha: float
    A_g: float
    ball_volume: float
    gamma_fractional_laplacian: float
    gamma_gradient_power: float = None  # only for odd integer alpha


@dataclass(frozen=True)
class ConditionReport:
    """Worst-case sampled ratios for the three kernel admissibility conditions."""

    correction_ratio: float  # residual / |x|^{alpha-n+delta}, vs correction_bound
    global_ratio: float  # |K(x)| |x|^{n-alpha}, vs global_bound
    lipschitz_ratio: float  # difference quotient, vs lipschitz_bound
    correction_ok: bool
    global_ok: bool
    lipschitz_ok: bool
    slack: float

    @property
    def ok(self):
        return self.correction_ok and self.global_ok and self.lipschitz_ok


# ---------------------------------------------------------------------------
# sharp constants
# ---------------------------------------------------------------------------


def constant_c_alpha(n, alpha):
    """Gamma((n-alpha)/2) / (2^alpha pi^{n/2} Gamma(alpha/2))."""
    if not (0.0 < alpha < n):
        raise ValueError("order must lie in (0, n): alpha=%r, n=%r" % (alpha, n))
    return math.exp(
        ln_gamma((n - alpha) / 2.0)
        - alpha * math.log(2.0)
        - (n / 2.0) * math.log(math.pi)
        - ln_gamma(alpha / 2.0)
    )


def _gradient_kernel_constant(n, alpha):
    """(n-alpha-1) c_{alpha+1} through the Gamma recurrence.

    Written as Gamma((n-alpha+1)/2) / (2^alpha pi^{n/2} Gamma((alpha+1)/2)),
    which stays finite as alpha -> n-1 (no 0 * infinity).
    """
    return math.exp(
        ln_gamma((n - alpha + 1.0) / 2.0)
        - alpha * math.log(2.0)
        - (n / 2.0) * math.log(math.pi)
        - ln_gamma((alpha + 1.0) / 2.0)
    )


def constant_gamma(operator, n, alpha):
    """Sharp exponential constant for the inverted operator.

    operator "fractional_laplacian": c_alpha^{-n/(n-alpha)} / |B_1|.
    operator "gradient_power" (odd integer alpha): the same expression with
    (n-alpha-1) c_{alpha+1} in place of c_alpha; at alpha = 1 this equals
    n * omega_{n-1}^{1/(n-1)}, the classical first-order constant.
    """
    if not (0.0 < alpha < n):
        raise ValueError("order must lie in (0, n): alpha=%r, n=%r" % (alpha, n))
    p = n / (n - alpha)
    if operator == "fractional_laplacian":
        return constant_c_alpha(n, alpha) ** (-p) / ball_volume(n)
    if operator == "gradient_power":
        if alpha != round(alpha) or int(round(alpha)) % 2 == 0:
            raise ValueError(
                "gradient_power requires odd integer order, got alpha=%r" % (alpha,)
            )
        return _gradient_kernel_constant(n, alpha) ** (-p) / ball_volume(n)
    raise ValueError("unknown operator %r" % (operator,))


def constant_A_g(kernel, quadrature=False):
    """(1/n) * integral over S^{n-1} of |g|^{n/(n-alpha)}.

    The closed form |B_1| * A^{n/(n-alpha)} applies when |g| is a constant A
    (all built-ins); quadrature=True forces the sphere-quadrature branch.
    """
    p = kernel.n / (kernel.n - kernel.alpha)
    const = _constant_profile_magnitude(kernel)
    if const is not None and not quadrature:
        return ball_volume(kernel.n) * const ** p
    func = lambda omega: np.linalg.norm(kernel.angular(omega), axis=1) ** p
    return angular_quadrature(kernel.n, func) / kernel.n


def _constant_profile_magnitude(kernel):
    """|g| when the profile magnitude is a known constant, else None."""
    if kernel.radial_kind in (RK_RIESZ, RK_PERTURBED, RK_SATURATED):
        return 1.0
    if kernel.radial_kind == RK_GRADIENT:
        return kernel.radial_params[0]
    return None


def sharp_constants(n, alpha):
    """Bundle of the closed-form constants for CLI and reports."""
    gamma_grad = None
    if alpha == round(alpha) and int(round(alpha)) % 2 == 1:
        gamma_grad = constant_gamma("gradient_power", n, alpha)
    return SharpConstants(
        n=n,
        alpha=alpha,
        c_alpha=constant_c_alpha(n, alpha),
        A_g=ball_volume(n),
        ball_volume=ball_volume(n),
        gamma_fractional_laplacian=constant_gamma("fractional_laplacian", n, alpha),
        gamma_gradient_power=gamma_grad,
    )


# ---------------------------------------------------------------------------
# sphere quadrature
# ---------------------------------------------------------------------------


def angular_quadrature(n, func, n_theta=512, n_polar=64):
    """Integral of func over S^{n-1}.

    func receives (M, n) unit vectors and returns (M,) values. n=1 sums the two
    points; n=2 uses the periodic trapezoid rule (spectrally accurate); n=3 uses
    Gauss-Legendre in the polar cosine times trapezoid in azimuth.
    """
    if n == 1:
        pts = np.array([[1.0], [-1.0]])
        return float(np.sum(func(pts)))
    if n == 2:
        theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return float(np.sum(func(pts)) * (2.0 * math.pi / n_theta))
    u, w = np.polynomial.legendre.leggauss(n_polar)
    theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    su = np.sqrt(1.0 - u ** 2)
    pts = np.stack(
        [
            np.repeat(su, n_theta) * np.tile(np.cos(theta), n_polar),
            np.repeat(su, n_theta) * np.tile(np.sin(theta), n_polar),
            np.repeat(u, n_theta),
        ],
        axis=1,
    )
    vals = func(pts).reshape(n_polar, n_theta)
    return float(np.sum(vals.sum(axis=1) * (2.0 * math.pi / n_theta) * w))


# ---------------------------------------------------------------------------
# built-in kernels
# ---------------------------------------------------------------------------


def _constant_profile(n, values):
    values = np.asarray(values, dtype=float)

    def evaluator(omega):
        return np.broadcast_to(values, (omega.shape[0], values.size)).copy()

    return AngularProfile(evaluator=evaluator, lipschitz_bound=0.0,
                          description="constant profile")


def riesz(n, alpha):
    """K(x) = |x|^{alpha-n}."""
    return KernelSpec(
        name="riesz",
        n=n,
        alpha=alpha,
        components=1,
        angular=_constant_profile(n, [1.0]),
        correction_exponent=1.0,
        correction_bound=1.0,  # residual is identically zero
        global_bound=1.0,
        # |r1^{a-n} - r2^{a-n}| <= (n-a)|r1-r2| min(r)^{a-n-1} makes n-a exact
        lipschitz_bound=n - alpha,
        regularity=3,
        homogeneous=True,
        radial_kind=RK_RIESZ,
    )


def gradient(n, alpha):
    """Vector kernel K(x) = c |x|^{alpha-n-1} x with c = (n-alpha-1) c_{alpha+1}.

    This is the kernel whose potential inverts the composition of the gradient
    with the fractional Laplacian of order (alpha-1)/2; it needs alpha < n-1
    for the constant to be positive.
    """
    if alpha >= n - 1:
        raise ValueError(
            "gradient kernel needs alpha < n-1, got alpha=%r, n=%r" % (alpha, n)
        )
    const = _gradient_kernel_constant(n, alpha)

    def evaluator(omega):
        return const * omega

    profile = AngularProfile(evaluator=evaluator, lipschitz_bound=const,
                             description="radial direction times constant")
    return KernelSpec(
        name="gradient",
        n=n,
        alpha=alpha,
        components=n,
        angular=profile,
        correction_exponent=1.0,
        correction_bound=1.0,  # residual is identically zero
        global_bound=const,
        lipschitz_bound=const * (n + 2.0 - alpha),
        regularity=3,
        homogeneous=True,
        radial_kind=RK_GRADIENT,
        radial_params=(const,),
    )


def perturbed(n, alpha, delta=1.0, c=1.0):
    """K(x) = |x|^{alpha-n} (1 + c|x|^delta).

    Satisfies the near-zero correction condition with exponent delta and
    constant c but violates the global bound at large |x|; intended for
    condition tests restricted near the origin and for negative tests.
    """
    if not (0.0 < delta <= 1.0) or c < 0.0:
        raise ValueError("need 0 < delta <= 1 and c >= 0")
    return KernelSpec(
        name="perturbed:%g:%g" % (delta, c),
        n=n,
        alpha=alpha,
        components=1,
        angular=_constant_profile(n, [1.0]),
        correction_exponent=delta,
        correction_bound=max(c, 1e-300),
        global_bound=1.0 + c,  # valid only for |x| <= 1
        lipschitz_bound=(n - alpha + (1.0 + delta) * c) * 2.0,
        regularity=3,
        homogeneous=False,
        radial_kind=RK_PERTURBED,
        radial_params=(delta, c),
    )


def saturated(n, alpha, delta=1.0, c=1.0):
    """K(x) = |x|^{alpha-n} (1 + c|x|^delta / (1 + |x|^delta)).

    Admissible on all of R^n (global bound 1+c, correction constant c) yet not
    homogeneous, and |K|^{n/(n-alpha)} is not integrable at infinity: the
    witness that the refined decay of the homogeneous theory can fail.
    """
    if not (0.0 < delta <= 1.0) or c < 0.0:
        raise ValueError("need 0 < delta <= 1 and c >= 0")
    return KernelSpec(
        name="saturated:%g:%g" % (delta, c),
        n=n,
        alpha=alpha,
        components=1,
        angular=_constant_profile(n, [1.0]),
        correction_exponent=delta,
        correction_bound=max(c, 1e-300),
        global_bound=1.0 + c,
        lipschitz_bound=(n - alpha + (1.0 + delta) * c) * 2.0,
        regularity=3,
        homogeneous=False,
        radial_kind=RK_SATURATED,
        radial_params=(delta, c),
    )


def custom_kernel(name, n, alpha, evaluator, components=1, angular=None,
                  correction_exponent=1.0, correction_bound=1.0,
                  global_bound=1.0, lipschitz_bound=1.0, regularity=0,
                  homogeneous=False):
    """Wrap a user callable (M, n) -> (M, components) as a kernel."""
    if angular is None:
        angular = _constant_profile(n, [1.0] * components)
    return KernelSpec(
        name=name, n=n, alpha=alpha, components=components, angular=angular,
        correction_exponent=correction_exponent, correction_bound=correction_bound,
        global_bound=global_bound, lipschitz_bound=lipschitz_bound,
        regularity=regularity, homogeneous=homogeneous,
        radial_kind=RK_CUSTOM, evaluator=evaluator,
    )


def make_kernel(name, n, alpha):
    """Kernel factory by CLI name: riesz | gradient | perturbed:<d>:<c> | saturated:<d>:<c>."""
    parts = name.split(":")
    head = parts[0]
    if head == "riesz":
        return riesz(n, alpha)
    if head == "gradient":
        return gradient(n, alpha)
    if head in ("perturbed", "saturated"):
        delta = float(parts[1]) if len(parts) > 1 else 1.0
        c = float(parts[2]) if len(parts) > 2 else 1.0
        return (perturbed if head == "perturbed" else saturated)(n, alpha, delta, c)
    raise ValueError("unknown kernel name %r" % (name,))


# ---------------------------------------------------------------------------
# evaluation and ring integrals
# ---------------------------------------------------------------------------


def eval_kernel(kernel, x):
    """K(x) for one point or an (M, n) batch; scalar kernels return scalars."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    vals = kernel.evaluate(x)
    if kernel.components == 1:
        vals = vals[:, 0]
        return float(vals[0]) if single else vals
    return vals[0] if single else vals


def _riesz_ring_n1(t, s, alpha):
    return np.abs(t - s) ** (alpha - 1.0) + (t + s) ** (alpha - 1.0)


def _riesz_ring_n2(t, s, alpha):
    """2 pi (t+s)^{alpha-2} F((2-alpha)/2, 1/2; 1; m) with m = 4ts/(t+s)^2.

    Derived by writing |t e_1 - s w|^2 = (t+s)^2 (1 - m cos^2(theta/2)); the
    alpha = 1 case is the complete elliptic integral 4 K(m)/(t+s).
    """
    from scipy.special import ellipk, hyp2f1

    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    m = 4.0 * t * s / (t + s) ** 2
    if alpha == 1.0:
        return 4.0 * ellipk(m) / (t + s)
    return 2.0 * math.pi * (t + s) ** (alpha - 2.0) * hyp2f1(
        (2.0 - alpha) / 2.0, 0.5, 1.0, m
    )


def _riesz_ring_n3(t, s, alpha):
    """2 pi [ (t+s)^{alpha-1} - |t-s|^{alpha-1} ] / (t s (alpha-1)); log at alpha=1.

    Evaluated as max(t,s)^{alpha-3} f(u) with u = min/max in (0, 1]; small u
    switches to the series of f to avoid the cancellation of the two powers.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    big = np.maximum(t, s)
    u = np.minimum(t, s) / big
    small = u < 1e-3
    if alpha == 1.0:
        with np.errstate(divide="ignore"):
            f = np.where(small, 2.0 + u * u * (2.0 / 3.0 + u * u * (2.0 / 5.0)),
                         (np.log1p(u) - np.log1p(-np.where(small, 0.0, u)))
                         / np.where(small, 1.0, u))
        return 2.0 * math.pi * big ** (alpha - 3.0) * f
    a = alpha
    c2 = (a - 2.0) * (a - 3.0) / 6.0
    c4 = (a - 2.0) * (a - 3.0) * (a - 4.0) * (a - 5.0) / 120.0
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (((1.0 + u) ** (a - 1.0) - (1.0 - u) ** (a - 1.0))
                  / (np.where(small, 1.0, u) * (a - 1.0)))
        f = np.where(small, 2.0 * (1.0 + u * u * (c2 + u * u * c4)), direct)
    return 2.0 * math.pi * big ** (a - 3.0) * f


def riesz_ring_matrix(n, alpha, t, s):
    """Vectorized ring integral of the Riesz kernel over probe radii t, source radii s.

    Entries with t == s are left at +inf for alpha <= 1 (the angular integral
    diverges there); callers integrate the diagonal cell separately.
    """
    t = np.asarray(t, dtype=float)[:, None]
    s = np.asarray(s, dtype=float)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        if n == 1:
            out = _riesz_ring_n1(t, s, alpha)
        elif n == 2:
            out = _riesz_ring_n2(t, s, alpha)
        else:
            out = _riesz_ring_n3(t, s, alpha)
    diag = t == s
    if np.any(diag):
        out = np.where(diag & ~np.isfinite(out), np.inf, out)
    return out


def _graded_panels(lo, hi, levels):
    """Geometric panel edges from hi down to lo, finest next to lo."""
    edges = [hi]
    x = hi
    for _ in range(levels):
        x = lo + (x - lo) * 0.5
        edges.append(x)
    edges.append(lo)
    return np.array(edges[::-1])


_GL16 = np.polynomial.legendre.leggauss(16)
_GL8 = np.polynomial.legendre.leggauss(8)


def _panel_integrate(fn, edges, nodes, weights):
    """Composite Gauss-Legendre over consecutive panel edges."""
    a = edges[:-1]
    b = edges[1:]
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return float(np.sum(fn(pts) * w))


def ring_average(kernel, t, s, rtol=1e-9):
    """Integral of K(t e_1 - s w) over unit directions w (surface measure).

    n = 1 is the two-point sum K(t-s) + K(t+s). For n >= 2 the Riesz kernel has
    closed forms; other kernels use angle quadrature, graded toward the
    near-singular angle when t and s are close. The coincidence t = s is finite
    only for alpha > 1 (the integrand behaves like angle^{alpha-n} against the
    angle^{n-2} surface factor); for alpha <= 1 it returns +inf.
    """
    if kernel.components != 1:
        raise ValueError("ring average is defined for scalar kernels only")
    if t <= 0.0 or s < 0.0:
        raise ValueError("need probe radius t > 0 and source radius s >= 0")
    n, alpha = kernel.n, kernel.alpha

    if s == 0.0:
        return sphere_area(n) * float(
            kernel.evaluate(np.array([[t] + [0.0] * (n - 1)]))[0, 0]
        )

    if t == s and (alpha <= 1.0 or n == 1):
        return math.inf

    if kernel.radial_kind == RK_RIESZ:
        if n == 1:
            return float(_riesz_ring_n1(t, s, alpha))
        if n == 2:
            return float(_riesz_ring_n2(t, s, alpha))
        return float(_riesz_ring_n3(t, s, alpha))

    if n == 1:
        a = float(kernel.evaluate(np.array([[t + s]]))[0, 0])
        b = float(kernel.evaluate(np.array([[t - s]]))[0, 0]) if t != s else math.inf
        return a + b

    # distance from t e_1 to s w as a function of the polar angle:
    # d^2 = (t-s)^2 + 4 t s sin^2(angle/2); grade panels toward angle 0
    closeness = abs(t - s) / math.sqrt(t * s)
    levels = int(min(60, max(8, 8 + math.ceil(-math.log2(max(closeness, 1e-16))))))

    if n == 2:
        # fold theta and -theta together so one graded sweep over (0, pi]
        # captures both sides of the near-singular angle
        if kernel.radial_kind in (RK_PERTURBED, RK_SATURATED):

            def fn(theta):
                d = np.sqrt((t - s) ** 2 + 4.0 * t * s * np.sin(theta / 2.0) ** 2)
                return 2.0 * d ** (alpha - 2.0) * kernel.radial_factor(d)

        else:

            def fn(theta):
                pts = np.concatenate(
                    [
                        np.stack([t - s * np.cos(theta), -s * np.sin(theta)], axis=1),
                        np.stack([t - s * np.cos(theta), s * np.sin(theta)], axis=1),
                    ]
                )
                vals = kernel.evaluate(pts)[:, 0]
                return vals[: theta.size] + vals[theta.size:]

        edges = _graded_panels(0.0, math.pi, levels)
        coarse = _panel_integrate(fn, edges, *_GL8)
        fine = _panel_integrate(fn, edges, *_GL16)
    else:
        if kernel.radial_kind in (RK_PERTURBED, RK_SATURATED):
            # integrand depends on the polar cosine only
            def fn(u):
                d = np.sqrt(t * t + s * s - 2.0 * t * s * u)
                return 2.0 * math.pi * d ** (alpha - 3.0) * kernel.radial_factor(d)

            edges = 1.0 - _graded_panels(0.0, 2.0, levels)[::-1]
            coarse = _panel_integrate(fn, edges, *_GL8)
            fine = _panel_integrate(fn, edges, *_GL16)
        else:
            n_theta = 128

            def fu(u, nodes_theta):
                su = np.sqrt(np.maximum(1.0 - u * u, 0.0))
                theta = nodes_theta
                pts = np.stack(
                    [
                        (t - s * u[:, None] * np.ones_like(theta)[None, :]).ravel(),
                        (-s * su[:, None] * np.cos(theta)[None, :]).ravel(),
                        (-s * su[:, None] * np.sin(theta)[None, :]).ravel(),
                    ],
                    axis=1,
                )
                vals = kernel.evaluate(pts)[:, 0].reshape(u.size, theta.size)
                return vals.mean(axis=1) * 2.0 * math.pi

            theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
            edges = 1.0 - _graded_panels(0.0, 2.0, levels)[::-1]
            coarse = _panel_integrate(lambda u: fu(u, theta), edges, *_GL8)
            fine = _panel_integrate(lambda u: fu(u, theta), edges, *_GL16)

    err = abs(fine - coarse) / max(abs(fine), 1e-300)
    if err > max(rtol, 1e-12) * 100.0 and err > 1e-6:
        raise QuadratureError(
            "ring quadrature did not converge: estimate %r, relative error %e"
            % (fine, err),
            estimate=fine,
        )
    return fine


# ---------------------------------------------------------------------------
# admissibility conditions
# ---------------------------------------------------------------------------


def sample_cloud(n, seed=0, radii=(1e-3, 1e3), n_radii=25, n_directions=48):
    """Deterministic point cloud covering the required radii and directions."""
    rng = np.random.default_rng(seed)
    r = np.geomspace(radii[0], radii[1], n_radii)
    dirs = rng.standard_normal((n_directions, n))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    axes = np.concatenate([np.eye(n), -np.eye(n)], axis=0)
    dirs = np.concatenate([dirs, axes], axis=0)
    return (r[:, None, None] * dirs[None, :, :]).reshape(-1, n)


def verify_kernel_conditions(kernel, sample=None, slack=1.05, seed=0):
    """Worst-case sampled ratios for the three admissibility conditions.

    Condition 1: |K(x) - g(x*) |x|^{alpha-n}| <= correction_bound |x|^{alpha-n+delta}.
    Condition 2: |K(x)| <= global_bound |x|^{alpha-n}.
    Condition 3: |K(x1)-K(x2)| <= lipschitz_bound |x1-x2| max_i |x_i|^{alpha-n-1}.
    Pass iff each worst ratio is at most the declared constant times slack.
    """
    if sample is None:
        sample = sample_cloud(kernel.n, seed=seed)
    sample = np.atleast_2d(np.asarray(sample, dtype=float))
    r = np.linalg.norm(sample, axis=1)
    if np.any(r == 0.0):
        raise ValueError("sample must not contain the origin")
    if r.min() > 1e-3 * (1.0 + 1e-9) or r.max() < 1e3 * (1.0 - 1e-9):
        raise ValueError("sample must span radii [1e-3, 1e3]")
    dirs = sample / r[:, None]
    if len(np.unique(np.round(dirs, 12), axis=0)) < 32 and kernel.n > 1:
        raise ValueError("sample must cover at least 32 directions")

    n, alpha = kernel.n, kernel.alpha
    vals = kernel.evaluate(sample)
    lead = kernel.angular(dirs) * r[:, None] ** (alpha - n)

    resid = np.linalg.norm(vals - lead, axis=1)
    ratio1 = float(np.max(resid / r ** (alpha - n + kernel.correction_exponent)))
    ratio2 = float(np.max(np.linalg.norm(vals, axis=1) * r ** (n - alpha)))

    rng = np.random.default_rng(seed + 1)
    idx1 = rng.integers(0, sample.shape[0], 20000)
    idx2 = rng.integers(0, sample.shape[0], 20000)
    keep = idx1 != idx2
    x1, x2 = sample[idx1[keep]], sample[idx2[keep]]
    # include near pairs, where the quotient approaches the gradient bound
    bump = sample * (1.0 + 1e-3) + 1e-4 * r[:, None] * dirs[::-1]
    x1 = np.concatenate([x1, sample])
    x2 = np.concatenate([x2, bump])
    d = np.linalg.norm(x1 - x2, axis=1)
    good = d > 0
    x1, x2, d = x1[good], x2[good], d[good]
    k1, k2 = kernel.evaluate(x1), kernel.evaluate(x2)
    num = np.max(np.abs(k1 - k2), axis=1)
    scale = np.maximum(
        np.linalg.norm(x1, axis=1) ** (alpha - n - 1.0),
        np.linalg.norm(x2, axis=1) ** (alpha - n - 1.0),
    )
    ratio3 = float(np.max(num / (d * scale)))

    return ConditionReport(
        correction_ratio=ratio1,
        global_ratio=ratio2,
        lipschitz_ratio=ratio3,
        correction_ok=bool(np.isfinite(ratio1) and ratio1 <= kernel.correction_bound * slack),
        global_ok=bool(np.isfinite(ratio2) and ratio2 <= kernel.global_bound * slack),
        lipschitz_ok=bool(np.isfinite(ratio3) and ratio3 <= kernel.lipschitz_bound * slack),
        slack=slack,
    )


# ---------------------------------------------------------------------------
# expansion terms
# ---------------------------------------------------------------------------


def _gegenbauer_coefficients(j, lam):
    """Coefficients a_m with C_j^lam(u) = sum_m a_m u^{j-2m}, m = 0..floor(j/2).

    Recurrence: j C_j = 2u (j+lam-1) C_{j-1} - (j+2lam-2) C_{j-2}.
    """
    polys = [np.array([1.0]), np.array([2.0 * lam, 0.0])]
    while len(polys) <= j:
        k = len(polys)
        up = np.concatenate([2.0 * (k + lam - 1.0) * polys[-1], [0.0]])
        down = np.concatenate([np.zeros(2), (k + 2.0 * lam - 2.0) * polys[-2]])
        polys.append((up - down) / k)
    coeffs = polys[j]  # descending powers u^j .. u^0
    return [coeffs[2 * m] for m in range(j // 2 + 1)]


def _multi_indices(n, total):
    if n == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _multi_indices(n - 1, total - head):
            yield (head,) + rest


def _multinomial(total, index):
    out = math.factorial(total)
    for k in index:
        out //= math.factorial(k)
    return out


def _riesz_taylor(n, alpha, x, j):
    """Closed-form expansion coefficients of |x - y|^{alpha-n} at degree j.

    The generating identity (1 - 2 t u + t^2)^{-lam} = sum_j C_j^lam(u) t^j with
    t = |y|/|x|, u = x*.y* and lam = (n-alpha)/2 gives
    p_j(x, y) = |x|^{alpha-n-j} sum_m a_m (x*.y)^{j-2m} |y|^{2m},
    a polynomial in y since only even powers of |y| appear.
    """
    lam = (n - alpha) / 2.0
    rx = float(np.linalg.norm(x))
    xs = np.asarray(x, dtype=float) / rx
    coeffs = {}
    if j == 0:
        coeffs[(0,) * n] = rx ** (alpha - n)
        return coeffs
    a = _gegenbauer_coefficients(j, lam)
    scale = rx ** (alpha - n - j)
    for m, am in enumerate(a):
        q = j - 2 * m
        # expand (x*.y)^q |y|^{2m} over multi-indices
        for k_dot in _multi_indices(n, q):
            dot_coeff = _multinomial(q, k_dot) * np.prod(xs ** np.array(k_dot))
            for k_sq in _multi_indices(n, m):
                sq_coeff = _multinomial(m, k_sq)
                key = tuple(kd + 2 * ks for kd, ks in zip(k_dot, k_sq))
                coeffs[key] = coeffs.get(key, 0.0) + (
                    scale * am * float(dot_coeff) * sq_coeff
                )
    return {k: v for k, v in coeffs.items() if v != 0.0}


_CENTRAL_STENCILS = {
    0: ((0, 1.0),),
    1: ((-1, -0.5), (1, 0.5)),
    2: ((-1, 1.0), (0, -2.0), (1, 1.0)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
}


def _fd_partial(kernel, x, index, h):
    """Central finite-difference estimate of the mixed partial d^index K(x)."""
    offsets = [(np.zeros(len(index)), 1.0)]
    for axis, order in enumerate(index):
        if order == 0:
            continue
        new = []
        for off, w in offsets:
            for step, sw in _CENTRAL_STENCILS[order]:
                o = off.copy()
                o[axis] += step
                new.append((o, w * sw))
        offsets = new
    pts = np.array([x + off * h for off, _ in offsets])
    vals = kernel.evaluate(pts)[:, 0]
    total = sum(w * v for (_, w), v in zip(offsets, vals))
    scale = h ** sum(o for o in index if o)
    return float(total) / scale


def taylor_term(kernel, x, j, fd_step=1e-4):
    """Degree-j term of the expansion of K(x - y) in powers of y.

    Riesz kernels use the closed-form binomial (Gegenbauer) coefficients; other
    scalar kernels fall back to central finite differences with step
    fd_step * |x| (default 1e-4), whose accuracy degrades to about 1e-3
    relative at j = 3 in double precision.
    """
    x = np.asarray(x, dtype=float)
    rx = float(np.linalg.norm(x))
    if rx == 0.0:
        raise ValueError("expansion base point must be nonzero")
    if kernel.components != 1:
        raise ValueError("expansion coefficients support scalar kernels only")
    if j < 0 or j > kernel.n:
        raise ValueError("degree must satisfy 0 <= j <= n, got %r" % (j,))
    if j > kernel.regularity:
        raise ValueError(
            "kernel %r declares regularity %d < requested degree %d"
            % (kernel.name, kernel.regularity, j)
        )
    if kernel.radial_kind == RK_RIESZ:
        coeffs = _riesz_taylor(kernel.n, kernel.alpha, x, j)
    else:
        h = fd_step * rx
        coeffs = {}
        for index in _multi_indices(kernel.n, j):
            d = _fd_partial(kernel, x, index, h)
            c = (-1.0) ** j * d / np.prod([math.factorial(k) for k in index])
            if c != 0.0:
                coeffs[index] = float(c)
    return TaylorTerm(degree=j, base_point=tuple(x.tolist()), coefficients=coeffs)
