r"""Closed-form and quadrature evaluation of average minimum transmit power.

For i.i.d. CN(0, 1) channel entries, the approximate per-position power
sigma^2 * gamma / (||h||^2 sin^2 theta) averages into products of two
reciprocal means: one over a squared-norm law (possibly an order
statistic over K users) and one over the squared sine of the angle to an
independent subspace.  This module provides those laws, their reciprocal
means, and the per-algorithm sums built from them.

Everything here is exact analysis or deterministic quadrature; Monte
Carlo estimation lives in ``experiment``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.special import betainc, betaln, gammainc, gammaincc, gammaln

from .errors import ConfigError, DivergenceError

# quadrature targets: relative tolerance of each integral, and the largest
# fraction of the running total the discarded upper tail may contribute
_QUAD_REL = 1e-10
_TAIL_FRACTION = 1e-12

_KINDS = (
    "norm_chisq",
    "norm_order_stat",
    "norm_not_largest",
    "sin_sq_angle",
    "sin_sq_angle_max",
)


@dataclass(frozen=True)
class DistributionSpec:
    """One of the scalar laws used by the average-power formulas.

    kind              meaning of x
    ----------------  ------------------------------------------------------
    norm_chisq        ||h||^2 of one user, h in C^M (Gamma(M, 1))
    norm_order_stat   r-th largest among K i.i.d. ||h||^2 values
    norm_not_largest  ||h||^2 of a user drawn uniformly among the K - 1
                      users that do not attain the maximum
    sin_sq_angle      sin^2 of the angle between h and an independent
                      i-dimensional subspace (Beta(M - i, i))
    sin_sq_angle_max  largest among K i.i.d. sin_sq_angle values with i = 1
    """

    kind: str
    M: int
    r: int = 0
    K: int = 0
    i: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown distribution kind {self.kind!r}")
        for name in ("M", "r", "K", "i"):
            value = getattr(self, name)
            if not isinstance(value, int):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.M < 1:
            raise ConfigError(f"M must be >= 1, got {self.M}")
        if self.kind == "norm_order_stat" and not 1 <= self.r <= self.K:
            raise ConfigError(f"need 1 <= r <= K, got r={self.r}, K={self.K}")
        if self.kind == "norm_not_largest" and self.K < 2:
            raise ConfigError(f"need K >= 2, got K={self.K}")
        if self.kind == "sin_sq_angle" and not 1 <= self.i <= self.M - 1:
            raise ConfigError(f"need 1 <= i <= M - 1, got i={self.i}, M={self.M}")
        if self.kind == "sin_sq_angle_max":
            if self.K < 1:
                raise ConfigError(f"need K >= 1, got K={self.K}")
            if self.M < 2:
                raise ConfigError(f"need M >= 2, got M={self.M}")

    # --- constructors ---

    @classmethod
    def norm_chisq(cls, M: int) -> "DistributionSpec":
        return cls("norm_chisq", M)

    @classmethod
    def norm_order_stat(cls, M: int, r: int, K: int) -> "DistributionSpec":
        return cls("norm_order_stat", M, r=r, K=K)

    @classmethod
    def norm_not_largest(cls, M: int, K: int) -> "DistributionSpec":
        return cls("norm_not_largest", M, K=K)

    @classmethod
    def sin_sq_angle(cls, M: int, i: int) -> "DistributionSpec":
        return cls("sin_sq_angle", M, i=i)

    @classmethod
    def sin_sq_angle_max(cls, M: int, K: int) -> "DistributionSpec":
        return cls("sin_sq_angle_max", M, K=K)


def _order_stat_cdf_from_parent(g: np.ndarray, r: int, K: int) -> np.ndarray:
    # r-th largest of K is <= x iff at least K + 1 - r parents are <= x
    out = np.zeros_like(g)
    one_minus = 1.0 - g
    for j in range(K + 1 - r, K + 1):
        out += math.comb(K, j) * g**j * one_minus ** (K - j)
    return np.minimum(out, 1.0)


def cdf(spec: DistributionSpec, x) -> "float | np.ndarray":
    """Cumulative distribution function, vectorized over x.

    Arguments below the support clamp to 0 and above it to 1.
    """
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs)
    if spec.kind in ("sin_sq_angle", "sin_sq_angle_max"):
        t = np.clip(xs, 0.0, 1.0)
        if spec.kind == "sin_sq_angle":
            out = betainc(spec.M - spec.i, spec.i, t)
        else:
            out = t ** (spec.K * (spec.M - 1))
    else:
        t = np.maximum(xs, 0.0)
        g = gammainc(spec.M, t)
        if spec.kind == "norm_chisq":
            out = g
        elif spec.kind == "norm_not_largest":
            out = (spec.K * g - g**spec.K) / (spec.K - 1)
        else:
            out = _order_stat_cdf_from_parent(g, spec.r, spec.K)
    return float(out[0]) if scalar else out


def pdf(spec: DistributionSpec, x) -> "float | np.ndarray":
    """Probability density, vectorized over x; zero outside the support."""
    xs = np.asarray(x, dtype=float)
    scalar = xs.ndim == 0
    xs = np.atleast_1d(xs).astype(float)
    out = np.zeros_like(xs)
    if spec.kind in ("sin_sq_angle", "sin_sq_angle_max"):
        inside = (xs >= 0.0) & (xs <= 1.0)
        t = xs[inside]
        if spec.kind == "sin_sq_angle":
            a, b = spec.M - spec.i, spec.i
            out[inside] = t ** (a - 1) * (1.0 - t) ** (b - 1) / math.exp(betaln(a, b))
        else:
            n = spec.K * (spec.M - 1)
            out[inside] = n * t ** (n - 1)
    else:
        inside = xs > 0.0
        t = xs[inside]
        parent = np.exp(-t + (spec.M - 1) * np.log(t) - gammaln(spec.M))
        if spec.kind == "norm_chisq":
            out[inside] = parent
        elif spec.kind == "norm_not_largest":
            g = gammainc(spec.M, t)
            out[inside] = spec.K / (spec.K - 1) * (1.0 - g ** (spec.K - 1)) * parent
        else:
            r, K = spec.r, spec.K
            g = gammainc(spec.M, t)
            coef = r * math.comb(K, r)
            out[inside] = coef * g ** (K - r) * (1.0 - g) ** (r - 1) * parent
        if spec.kind == "norm_chisq" and spec.M == 1:
            out[xs == 0.0] = 1.0
    return float(out[0]) if scalar else out


def _divergence_exponent(spec: DistributionSpec) -> int:
    # density behaves like c * x^s near the lower end of the support;
    # E[1/x] is finite iff s >= 1
    if spec.kind == "norm_chisq":
        return spec.M - 1
    if spec.kind == "norm_order_stat":
        return spec.M * (spec.K + 1 - spec.r) - 1
    if spec.kind == "norm_not_largest":
        return spec.M - 1
    if spec.kind == "sin_sq_angle":
        return spec.M - spec.i - 1
    return spec.K * (spec.M - 1) - 1


def _describe(spec: DistributionSpec) -> str:
    parts = [f"M={spec.M}"]
    if spec.kind == "norm_order_stat":
        parts += [f"r={spec.r}", f"K={spec.K}"]
    elif spec.kind in ("norm_not_largest", "sin_sq_angle_max"):
        parts.append(f"K={spec.K}")
    if spec.kind == "sin_sq_angle":
        parts.append(f"i={spec.i}")
    return f"{spec.kind} with {', '.join(parts)}"


def _check_integrable(spec: DistributionSpec) -> None:
    s = _divergence_exponent(spec)
    if s < 1:
        raise DivergenceError(
            f"E[1/x] diverges for {_describe(spec)}: "
            f"density ~ x^{s} near the lower end"
        )


def mean_inverse_quadrature(spec: DistributionSpec) -> float:
    """E[1/x] by adaptive quadrature on the density.

    The closed forms in :func:`mean_inverse` take this route only when no
    closed form exists, but the quadrature supports every kind so the two
    can be cross-checked.
    """
    _check_integrable(spec)
    if spec.kind in ("sin_sq_angle", "sin_sq_angle_max"):
        value, _ = quad(
            lambda t: pdf(spec, t) / t if t > 0.0 else 0.0,
            0.0,
            1.0,
            epsabs=0.0,
            epsrel=_QUAD_REL,
            limit=300,
        )
        return float(value)

    def integrand(t: float) -> float:
        return pdf(spec, t) / t if t > 0.0 else 0.0

    upper = 8.0 * spec.M + 8.0
    while True:
        value, _ = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=_QUAD_REL, limit=300)
        # 1/x <= 1/upper beyond the cut, so the discarded tail is bounded
        # by the remaining probability mass over upper
        tail = (1.0 - float(cdf(spec, upper))) / upper
        if tail <= _TAIL_FRACTION * value:
            return float(value)
        if upper > 1e6:
            raise ArithmeticError(f"tail criterion unreachable for {spec}")
        upper *= 2.0


@lru_cache(maxsize=None)
def mean_inverse(spec: DistributionSpec) -> float:
    """E[1/x] for the given law.

    Closed forms are returned where they exist; order statistics go
    through adaptive quadrature.  Laws whose reciprocal mean does not
    converge raise DivergenceError naming the offending parameters.
    """
    _check_integrable(spec)
    if spec.kind == "norm_chisq":
        return 1.0 / (spec.M - 1)
    if spec.kind == "sin_sq_angle":
        return (spec.M - 1) / (spec.M - spec.i - 1)
    if spec.kind == "sin_sq_angle_max":
        n = spec.K * (spec.M - 1)
        return n / (n - 1)
    if spec.kind == "norm_not_largest":
        return (spec.K / (spec.M - 1) - alpha(spec.M, spec.K)) / (spec.K - 1)
    return mean_inverse_quadrature(spec)


@lru_cache(maxsize=None)
def alpha(M: int, K: int) -> float:
    r"""E[1 / max_{k <= K} ||h_k||^2] for i.i.d. h_k in C^M.

    Evaluates the integral of K e^{-x} x^{M-2} G(M, x)^{K-1} / Gamma(M)
    over x > 0, where G is the regularized lower incomplete gamma
    function.  Only M >= 2 is supported: the single-antenna law already
    fails to have a reciprocal mean, and smaller M is refused outright.
    """
    if not isinstance(M, int) or not isinstance(K, int):
        raise ConfigError(f"M and K must be integers, got M={M!r}, K={K!r}")
    if K < 1:
        raise ConfigError(f"need K >= 1, got K={K}")
    if M < 2:
        raise DivergenceError(
            f"mean inverse of the largest squared norm needs M >= 2, got M={M}"
        )
    log_gamma_m = gammaln(M)

    def integrand(x: float) -> float:
        if x <= 0.0:
            return 0.0
        base = math.exp(-x + (M - 2) * math.log(x) - log_gamma_m)
        return K * base * float(gammainc(M, x)) ** (K - 1)

    upper = 8.0 * M + 8.0
    while True:
        value, _ = quad(integrand, 0.0, upper, epsabs=0.0, epsrel=_QUAD_REL, limit=300)
        # drop G^{K-1} <= 1: tail <= K * Gamma(M-1) * Q(M-1, upper) / Gamma(M)
        tail = K * float(gammaincc(M - 1, upper)) / (M - 1)
        if tail <= _TAIL_FRACTION * value:
            return float(value)
        if upper > 1e6:
            raise ArithmeticError(f"tail criterion unreachable for alpha({M}, {K})")
        upper *= 2.0


def _order_stat_power_coeffs(r: int, K: int) -> dict:
    # expand the order-statistic CDF as sum_n c_n G^n with integer c_n
    coeffs: dict = {}
    for j in range(K + 1 - r, K + 1):
        cj = math.comb(K, j)
        for m in range(0, K - j + 1):
            n = j + m
            coeffs[n] = coeffs.get(n, 0) + cj * math.comb(K - j, m) * (-1) ** m
    return {n: c for n, c in coeffs.items() if c != 0}


def order_stat_mean_inverse_alpha(M: int, r: int, K: int) -> float:
    """E[1/x] for the r-th largest squared norm as a combination of alphas.

    The order-statistic CDF is a polynomial in the parent CDF G, and each
    G^n term contributes its own largest-of-n reciprocal mean, so the
    value is an integer combination of alpha(M, n).  Needs M >= 2; the
    quadrature route in :func:`mean_inverse` has no such restriction and
    serves as the independent cross-check.
    """
    combo = _order_stat_power_coeffs(r, K)
    return float(sum(c * alpha(M, n) for n, c in sorted(combo.items())))


# ---------------------------------------------------------------------------
# per-algorithm average powers (gamma is the linear SINR target)


def _check_targets(gamma: float, sigma_sq: float) -> None:
    if not gamma > 0.0:
        raise ConfigError(f"gamma must be positive, got {gamma}")
    if not sigma_sq > 0.0:
        raise ConfigError(f"sigma_sq must be positive, got {sigma_sq}")


def _angle_mean_inverse(M: int, d: int) -> float:
    # reciprocal mean of sin^2 against an independent d-dimensional span
    if d == 0:
        return 1.0
    if d >= M:
        raise DivergenceError(
            f"a {d}-dimensional span fills C^{M}; the angle is zero almost surely"
        )
    return mean_inverse(DistributionSpec.sin_sq_angle(M, d))


def avg_power_nus(M: int, K: int, K_s: int, gamma: float, sigma_sq: float) -> float:
    """Average total power under norm-based selection of K_s out of K users.

    Position i of the encoding order carries the (K_s + 1 - i)-th largest
    norm and sees an independent (i - 1)-dimensional interference span,
    so each term is a product of two reciprocal means.  Terms whose
    reciprocal mean does not converge raise DivergenceError naming the
    term.  For K_s in {2, 4} the closed-form alpha combination is also
    evaluated and must agree to 1e-6 relative.
    """
    _check_targets(gamma, sigma_sq)
    if not 1 <= K_s <= K:
        raise ConfigError(f"need 1 <= Ks <= K, got Ks={K_s}, K={K}")
    total = 0.0
    for idx in range(1, K_s + 1):
        rank = K_s + 1 - idx
        try:
            norm_term = mean_inverse(DistributionSpec.norm_order_stat(M, rank, K))
            angle_term = _angle_mean_inverse(M, idx - 1)
        except DivergenceError as exc:
            raise DivergenceError(f"NUS term i={idx} diverges: {exc}") from None
        total += norm_term * angle_term
    value = gamma * sigma_sq * total
    if K_s in (2, 4):
        closed = _nus_alpha_form(M, K, K_s) * gamma * sigma_sq
        if abs(closed - value) > 1e-6 * abs(value):
            raise ArithmeticError(
                f"NUS closed form {closed!r} disagrees with the term sum {value!r} "
                f"at M={M}, K={K}, Ks={K_s}"
            )
    return value


def _nus_alpha_form(M: int, K: int, K_s: int) -> float:
    # same sum with every factor in closed form (order statistics via the
    # alpha combination); defined exactly when the term sum is finite
    total = 0.0
    for idx in range(1, K_s + 1):
        rank = K_s + 1 - idx
        total += order_stat_mean_inverse_alpha(M, rank, K) * _angle_mean_inverse(M, idx - 1)
    return total


def avg_power_sus(M: int, K: int, K_s: int, gamma: float, sigma_sq: float) -> float:
    """Upper bound on the average total power under greedy residual selection.

    The i-th selected residual is stochastically no worse than the i-th
    largest of K squared norms in an (M + 1 - i)-dimensional space, which
    turns the sum into pure order-statistic reciprocal means.  Unlike the
    other averages this one bounds the true mean from above, so Monte
    Carlo validation against it is one-sided.
    """
    _check_targets(gamma, sigma_sq)
    if not 1 <= K_s <= min(M, K):
        raise ConfigError(f"need 1 <= Ks <= min(M, K), got Ks={K_s}, M={M}, K={K}")
    total = 0.0
    for idx in range(1, K_s + 1):
        try:
            total += mean_inverse(
                DistributionSpec.norm_order_stat(M + 1 - idx, idx, K)
            )
        except DivergenceError as exc:
            raise DivergenceError(f"SUS term i={idx} diverges: {exc}") from None
    value = gamma * sigma_sq * total
    if K_s in (2, 4) and M + 1 - K_s >= 2:
        closed = gamma * sigma_sq * sum(
            order_stat_mean_inverse_alpha(M + 1 - idx, idx, K)
            for idx in range(1, K_s + 1)
        )
        if abs(closed - value) > 1e-6 * abs(value):
            raise ArithmeticError(
                f"SUS closed form {closed!r} disagrees with the term sum {value!r} "
                f"at M={M}, K={K}, Ks={K_s}"
            )
    return value


def avg_power_rus(M: int, K_s: int, gamma: float, sigma_sq: float) -> float:
    """Average total power when the K_s users are picked uniformly at random.

    Each position pairs an unordered squared norm with an independent
    angle, so the value depends on M and K_s only; the number of users K
    does not appear.  Finite only for K_s <= M - 1.
    """
    _check_targets(gamma, sigma_sq)
    if K_s < 1:
        raise ConfigError(f"need Ks >= 1, got Ks={K_s}")
    norm_term = mean_inverse(DistributionSpec.norm_chisq(M))  # needs M >= 2
    total = 0.0
    for idx in range(1, K_s + 1):
        try:
            total += norm_term * _angle_mean_inverse(M, idx - 1)
        except DivergenceError as exc:
            raise DivergenceError(f"RUS term i={idx} diverges: {exc}") from None
    return gamma * sigma_sq * total


def avg_power_aus_two(M: int, K: int, gamma: float, sigma_sq: float) -> float:
    """Average total power for angle-based selection of two users.

    The first pick is the largest norm; the second maximizes the angle to
    it, which makes its squared sine the largest of K - 1 independent
    draws while its norm is a uniformly chosen non-maximal one.  Encoding
    puts the weaker user first.
    """
    _check_targets(gamma, sigma_sq)
    if M < 3 or K < 2 or (M - 1) * (K - 1) <= 1:
        raise ConfigError(
            f"need M >= 3, K >= 2 and (M-1)(K-1) > 1, got M={M}, K={K}"
        )
    weak_norm = mean_inverse(DistributionSpec.norm_not_largest(M, K))
    best_angle = mean_inverse(DistributionSpec.sin_sq_angle_max(M, K - 1))
    return gamma * sigma_sq * (weak_norm + alpha(M, K) * best_angle)


def avg_power_lower_bound_two(M: int, K: int, gamma: float, sigma_sq: float) -> float:
    """Benchmark lower bound on any two-user selection's average total power.

    Combines the two quantities no rule can beat simultaneously: the
    second-largest norm at the interference-free position and the largest
    norm paired with the best possible angle among its K - 1 partners.
    """
    _check_targets(gamma, sigma_sq)
    if M < 3 or K < 2 or (M - 1) * (K - 1) <= 1:
        raise ConfigError(
            f"need M >= 3, K >= 2 and (M-1)(K-1) > 1, got M={M}, K={K}"
        )
    second = order_stat_mean_inverse_alpha(M, 2, K)
    best_angle = mean_inverse(DistributionSpec.sin_sq_angle_max(M, K - 1))
    return gamma * sigma_sq * (second + alpha(M, K) * best_angle)
