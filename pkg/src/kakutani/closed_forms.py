"""Exact constants, moment functions of N_t, reference laws and analytic checks.

Conventions: H_k are probabilists' Hermite polynomials, phi^{(k)} = (-1)^k H_k phi.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import mpmath
import numpy as np
from scipy import integrate

from .errors import DomainError, ResourceError

LN2 = math.log(2.0)
SIGMA2 = 16.0 * LN2 - 10.0
S0 = 8.0 * LN2 - 5.0
GAMMA = 17.0 / 6.0 - 4.0 * LN2
S_BOUND_INTEGRAL = 2.0 * LN2 - 17.0 / 12.0


@dataclass(frozen=True)
class ClosedFormTable:
    sigma2: float = SIGMA2
    s0: float = S0
    gamma: float = GAMMA
    # 30-digit references (mpmath)
    sigma2_ref: str = "1.09035488895912495067571394333"
    s0_ref: str = "0.545177444479562475337856971665"
    gamma_ref: str = "0.0607446110935520956644048475006"
    s_bound_integral_ref: str = "-0.0303723055467760478322024237503"
    v_075_ref: str = "0.624164328374552114907224952823"
    w_075_ref: str = "-0.102738930931531185543251009398"

    def mu(self, t: float) -> float:
        return mu(t)

    def v(self, t: float) -> float:
        return v(t)

    def w(self, t: float) -> float:
        return w(t)


TABLE = ClosedFormTable()


def high_precision_constants(dps: int = 30) -> dict[str, str]:
    """The table's reference values recomputed with mpmath at ``dps`` digits.

    The two integrals are evaluated by mpmath quadrature rather than from
    their closed forms, so they double as an independent check of them.
    """
    with mpmath.workdps(dps + 10):
        ln2 = mpmath.log(2)

        def w_mp(t):
            return 2 + (7 - 8 * ln2) / t - 8 * mpmath.log(t) / t - 4 / t**2

        t = mpmath.mpf(3) / 4
        vals = {
            "sigma2_ref": 16 * ln2 - 10,
            "s0_ref": 8 * ln2 - 5,
            "gamma_ref": -mpmath.quad(lambda x: w_mp(1 / x), [1, 2]),
            "s_bound_integral_ref": mpmath.quad(lambda u: w_mp(u) / u**2,
                                                [mpmath.mpf(1) / 2, 1]) / 2,
            "v_075_ref": 2 + (2 - 8 * mpmath.log(t)) / t - 4 / t**2,
            "w_075_ref": w_mp(t),
        }
        return {k: mpmath.nstr(x, dps) for k, x in vals.items()}


def mu(t: float) -> float:
    """E N_t = (2/t - 1) 1{t < 1}."""
    if not t > 0:
        raise DomainError(f"mu(t) needs t > 0, got {t}")
    return 2.0 / t - 1.0 if t < 1.0 else 0.0


def v(t: float) -> float:
    """Var N_t."""
    if not t > 0:
        raise DomainError(f"v(t) needs t > 0, got {t}")
    if t <= 0.5:
        return S0 / t
    if t < 1.0:
        return 2.0 + (2.0 - 8.0 * math.log(t)) / t - 4.0 / (t * t)
    return 0.0


def w(t: float) -> float:
    """v(t) - s0/t on (1/2, 1), zero elsewhere."""
    if not (0.5 < t < 1.0):
        return 0.0
    return 2.0 + (7.0 - 8.0 * LN2) / t - 8.0 * math.log(t) / t - 4.0 / (t * t)


def w_array(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = (t > 0.5) & (t < 1.0)
    x = t[m]
    out[m] = 2.0 + (7.0 - 8.0 * LN2) / x - 8.0 * np.log(x) / x - 4.0 / (x * x)
    return out


def quad(f: Callable[[float], float], a: float, b: float) -> float:
    """Adaptive Gauss-Kronrod quadrature at 1e-12 relative tolerance."""
    val, _ = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)


def gamma_by_quadrature() -> float:
    """-int_1^2 w(1/v) dv, which equals gamma."""
    return -quad(lambda x: w(1.0 / x), 1.0, 2.0)


def s_bound_integral() -> float:
    """(1/2) int_{1/2}^1 t^{-2} w(t) dt."""
    return 0.5 * quad(lambda t: w(t) / (t * t), 0.5, 1.0)


# ------------------------------------------------------- reference laws

def std_normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def std_normal_cdf_array(x: np.ndarray) -> np.ndarray:
    from scipy.special import ndtr
    return ndtr(np.asarray(x, dtype=float))


def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / math.sqrt(2.0 * math.pi)


def std_normal_cdf_by_quadrature(x: float) -> float:
    """Independent route to Phi: 1/2 +/- int_0^|x| phi."""
    half = quad(lambda z: math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi), 0.0, abs(x))
    return 0.5 + half if x >= 0 else 0.5 - half


def exp_survival(x):
    """e^{-x} for x >= 0, 1 for x < 0."""
    return np.exp(-np.maximum(x, 0.0)) if isinstance(x, np.ndarray) else math.exp(-max(x, 0.0))


def exp_cdf(x):
    return 1.0 - exp_survival(x)


def gumbel_cdf(x):
    return np.exp(-np.exp(-x)) if isinstance(x, np.ndarray) else math.exp(-math.exp(-x))


def dirichlet_min_survival(n: int, x):
    """Pr(m_n^D >= x) = (1 - (n+1) x)^n on [0, 1/(n+1)]."""
    base = np.clip(1.0 - (n + 1) * np.asarray(x, dtype=float), 0.0, 1.0)
    out = base ** n
    return float(out) if np.ndim(out) == 0 else out


# --------------------------------------------------- Hermite / Edgeworth

def hermite(k: int, x):
    """Probabilists' Hermite polynomial H_k(x) by the three-term recurrence."""
    if k < 0:
        raise DomainError(f"degree must be >= 0, got {k}")
    x = np.asarray(x, dtype=float)
    h0 = np.ones_like(x)
    if k == 0:
        return h0 if h0.ndim else float(h0)
    h1 = x.copy()
    for j in range(1, k):
        h0, h1 = h1, x * h1 - j * h0
    return h1 if h1.ndim else float(h1)


def hermite_all(kmax: int, x) -> np.ndarray:
    """Rows H_0..H_kmax evaluated at x."""
    x = np.asarray(x, dtype=float)
    out = np.empty((kmax + 1,) + x.shape)
    out[0] = 1.0
    if kmax >= 1:
        out[1] = x
    for j in range(1, kmax):
        out[j + 1] = x * out[j] - j * out[j - 1]
    return out


def gamma_fn(x: float) -> float:
    return math.gamma(x)


def gamma_half_integer(x: float) -> float:
    """Exact Gamma at positive integers and half-integers by recursion."""
    two_x = round(2 * x)
    if two_x < 1 or abs(2 * x - two_x) > 1e-12:
        raise DomainError(f"not a positive integer or half-integer: {x}")
    if two_x % 2 == 0:
        return float(math.factorial(two_x // 2 - 1))
    k = (two_x - 1) // 2   # Gamma(k + 1/2) = (2k)! sqrt(pi) / (4^k k!)
    return float(Fraction(math.factorial(2 * k), 4**k * math.factorial(k))) * math.sqrt(math.pi)


def cramer_bound(k: int) -> float:
    return 2.0 ** (k / 2.0) * math.gamma((k + 1) / 2.0)


@dataclass(frozen=True)
class BoundCheck:
    value: float
    bound: float
    exact_verdict: Optional[bool] = None   # set when the comparison was done exactly

    @property
    def satisfied(self) -> bool:
        if self.exact_verdict is not None:
            return self.exact_verdict
        return self.value <= self.bound


def cramer_bound_check(k: int, points: int = 200_001) -> BoundCheck:
    """Grid maximum of |phi H_k| over |x| <= k + 10 against 2^{k/2} Gamma((k+1)/2)."""
    if not (1 <= k <= 30):
        raise DomainError(f"k must be in [1, 30], got {k}")
    xs = np.linspace(-(k + 10.0), k + 10.0, points)
    sup = float(np.max(np.abs(std_normal_pdf(xs) * hermite(k, xs))))
    return BoundCheck(sup, cramer_bound(k))


def edgeworth_term(ell: int, vt: float, R, S):
    """E^ell = vt^{-(ell+1)/2} sum_k (-1)^{k+1} R^{ell-2k+1} S^k / (2^k k! (ell-2k+1)!)."""
    if not vt > 0:
        raise DomainError(f"vt must be > 0, got {vt}")
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    total = np.zeros(np.broadcast(R, S).shape)
    for k in range((ell + 1) // 2 + 1):
        p = ell - 2 * k + 1
        total = total + ((-1) ** (k + 1)) * R**p * S**k / (
            2**k * math.factorial(k) * math.factorial(p))
    out = vt ** (-(ell + 1) / 2.0) * total
    return float(out) if out.ndim == 0 else out


def edgeworth_term_za(ell: int, Z, alpha):
    """The same coefficient in terms of Z = -R/sqrt(vt), alpha = S/vt."""
    Z = np.asarray(Z, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    total = np.zeros(np.broadcast(Z, alpha).shape)
    for k in range((ell + 1) // 2 + 1):
        p = ell - 2 * k + 1
        total = total + ((-1) ** (ell - k)) * Z**p * alpha**k / (
            2**k * math.factorial(k) * math.factorial(p))
    return float(total) if total.ndim == 0 else total


def edgeworth_coefficients(m: int, z: float, alpha: float) -> np.ndarray:
    """c_ell for ell < 2m in Phi((x+z)/sqrt(1-alpha)) ~ Phi(x) + phi(x) sum c_ell H_ell(x)."""
    return np.array([edgeworth_term_za(ell, z, alpha) for ell in range(2 * m)])


def edgeworth_coefficients_taylor(m: int, z: float, alpha: float) -> np.ndarray:
    """Coefficients of the order-m Taylor truncation of exp(alpha s^2/2 - i z s).

    sum_{j=1}^m (-1)^{j+1}/j! sum_r C(j,r) z^{j-r} (alpha/2)^r H_{j+r-1}; a second,
    differently truncated expansion with the same low-order terms.
    """
    coef = np.zeros(2 * m)
    for j in range(1, m + 1):
        for r in range(j + 1):
            coef[j + r - 1] += ((-1) ** (j + 1) / math.factorial(j) * math.comb(j, r)
                                * z ** (j - r) * (alpha / 2.0) ** r)
    return coef


def edgeworth_bound(m: int, z: float, alpha: float) -> float:
    return 2.0 ** (2 * m) * (abs(alpha) ** (m + 1)
                             + math.gamma((m + 1) / 2.0) / math.factorial(m + 1)
                             * abs(z) ** (m + 1))


def edgeworth_expansion_check(m: int, z: float, alpha: float, x_grid=None,
                              form: str = "double_sum") -> BoundCheck:
    """sup_x |Phi((x+z)/sqrt(1-alpha)) - Phi(x) - phi(x) sum_ell c_ell H_ell(x)|."""
    if alpha > 0.5:
        raise DomainError(f"alpha must be <= 1/2, got {alpha}")
    if m < 1:
        raise DomainError(f"m must be >= 1, got {m}")
    xs = np.linspace(-12.0, 12.0, 4001) if x_grid is None else np.asarray(x_grid, float)
    coef = (edgeworth_coefficients(m, z, alpha) if form == "double_sum"
            else edgeworth_coefficients_taylor(m, z, alpha))
    H = hermite_all(2 * m - 1, xs)
    series = std_normal_pdf(xs) * (coef @ H)
    target = std_normal_cdf_array((xs + z) / math.sqrt(1.0 - alpha)) - std_normal_cdf_array(xs)
    return BoundCheck(float(np.max(np.abs(target - series))), edgeworth_bound(m, z, alpha))


# ------------------------------------------------- appendix oracles

BINOM_MAX_N = 40
BINOM_MAX_DEGREE = 12


def binom_product_moment(n: int, alpha: int, beta: int) -> Fraction:
    """E[X^alpha (n-X)^beta] for X ~ Bin(n, 1/2), exactly."""
    if n > BINOM_MAX_N or alpha + beta > BINOM_MAX_DEGREE:
        raise ResourceError(f"enumeration budget is n <= {BINOM_MAX_N}, "
                            f"alpha+beta <= {BINOM_MAX_DEGREE}")
    if n < 0 or alpha < 0 or beta < 0:
        raise DomainError("n, alpha, beta must be >= 0")
    total = sum(math.comb(n, k) * k**alpha * (n - k) ** beta for k in range(n + 1))
    return Fraction(total, 2**n)


def binom_product_check(n: int, alpha: int, beta: int) -> BoundCheck:
    """|E[X^a (n-X)^b] - (n/2)^{a+b}| against max(a,b) n^{a+b-1/2} (exact left side)."""
    if max(alpha, beta) < 1:
        raise DomainError("needs max(alpha, beta) >= 1")
    gap = abs(binom_product_moment(n, alpha, beta) - Fraction(n, 2) ** (alpha + beta))
    # compare gap^2 <= max^2 n^{2(a+b)-1} in exact integers
    lhs = gap * gap
    rhs = Fraction(max(alpha, beta) ** 2 * n ** (2 * (alpha + beta) - 1))
    return BoundCheck(float(gap), max(alpha, beta) * n ** (alpha + beta - 0.5),
                      exact_verdict=bool(lhs <= rhs))


def uniform_moment(r: int) -> Fraction:
    """E xi^r for xi ~ Unif(-1, 1)."""
    return Fraction(1, r + 1) if r % 2 == 0 else Fraction(0)


@functools.lru_cache(maxsize=None)
def w_transform_moment(r: int) -> float:
    """E xi^r for xi = -w(1/V), V ~ Unif(1, 2)."""
    if r == 0:
        return 1.0
    return quad(lambda x: (-w(1.0 / x)) ** r, 1.0, 2.0)


@functools.lru_cache(maxsize=None)
def w_transform_abs_moment(r: float) -> float:
    if r == 0:
        return 1.0
    return quad(lambda x: abs(w(1.0 / x)) ** r, 1.0, 2.0)


def _poly_mul(a: list, b: list, k: int) -> list:
    out = [0] * (k + 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j in range(k + 1 - i):
            out[i + j] += ai * b[j]
    return out


def sum_moments(single: list, n: int, k: int) -> list:
    """E(Xi_n^j), j = 0..k, for Xi_n a sum of n i.i.d. copies, given E xi^r, r <= k.

    Raises the exponential generating function to the n-th power, truncated at
    degree k. Exact for Fraction inputs.
    """
    fact = [math.factorial(r) for r in range(k + 1)]
    exact = isinstance(single[0], Fraction)
    egf = [(Fraction(single[r]) if exact else float(single[r])) / fact[r]
           for r in range(k + 1)]
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)
    result = [one] + [zero] * k
    base = egf
    e = n
    while e:
        if e & 1:
            result = _poly_mul(result, base, k)
        e >>= 1
        if e:
            base = _poly_mul(base, base, k)
    return [result[j] * fact[j] for j in range(k + 1)]


def partial_sum_moment(dist: str, n: int, k: int):
    """mu_k(n) = E(Xi_n^k) for uniform(-1,1) (exact Fraction) or w-transform summands."""
    if k > 8 or n > 10**4:
        raise ResourceError("budget is k <= 8, n <= 10^4")
    if dist == "uniform":
        single = [uniform_moment(r) for r in range(k + 1)]
    elif dist == "w_transform":
        single = [w_transform_moment(r) for r in range(k + 1)]
    else:
        raise DomainError(f"unknown summand law {dist!r}")
    return sum_moments(single, n, k)[k]


def partial_sum_check(dist: str, n: int, k: int) -> BoundCheck:
    """Leading-term bound for mu_k(n).

    Uniform (mean zero): |mu_{2k} - (E xi^2)^k c_k n^k| <= A'_k c_k n^{k-1}, c_k = (2k)!/(2^k k!).
    w-transform (mean gamma > 0): |mu_k - gamma^k n^k| <= A_k n^{k-1}.
    """
    if dist == "uniform":
        mu2k = partial_sum_moment("uniform", n, 2 * k)
        ck = Fraction(math.factorial(2 * k), 2**k * math.factorial(k))
        m2 = uniform_moment(2)
        a_prime = (m2**k + Fraction(1, 2 * k - 1)) * k * k  # E|xi|^{2k-2} = 1/(2k-1)
        gap = abs(mu2k - m2**k * ck * n**k)
        rhs = a_prime * ck * n ** (k - 1)
        return BoundCheck(float(gap), float(rhs), exact_verdict=bool(gap <= rhs))
    if dist == "w_transform":
        muk = partial_sum_moment("w_transform", n, k)
        g = w_transform_moment(1)
        a_k = (g**k + w_transform_abs_moment(k - 1)) * k * k
        return BoundCheck(abs(muk - g**k * n**k), a_k * n ** (k - 1))
    raise DomainError(f"unknown summand law {dist!r}")
