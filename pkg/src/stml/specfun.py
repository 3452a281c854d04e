"""Scalar special functions for fractional Poisson type processes.

Log-gamma, Pochhammer symbols, the two-parameter Mittag-Leffler function
:math:`E_{\\alpha,\\beta}`, the three-parameter (Prabhakar) function
:math:`E^{\\gamma}_{\\alpha,\\beta}`, the M-Wright function :math:`M_\\beta`
and the fractional Poisson weights built on it.

Real arguments only.  For :math:`z \\le 0` three regimes are available and
the first one whose a-posteriori error estimate meets the tolerance wins:

* the defining power series, with a roundoff estimate from the absolute sum;
* the algebraic asymptotic expansion, truncated at its smallest term;
* numerical Laplace inversion on a hyperbolic contour.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

from . import _contour

__all__ = [
    "EvalConfig",
    "ConvergenceError",
    "DEFAULT_CONFIG",
    "lgamma",
    "rgamma",
    "pochhammer",
    "mittag_leffler",
    "prabhakar",
    "mwright",
    "frac_poisson_weights",
    "frac_poisson_sf",
]

EPS = float(np.finfo(float).eps)

#: absolute accuracy floor reachable in double precision once cancellation
#: between series terms or contour nodes is involved
ACCURACY_FLOOR = 1e-12


@dataclass(frozen=True)
class EvalConfig:
    """Truncation control shared by all infinite series.

    Attributes
    ----------
    abs_tol : float
        Target absolute error of a returned value.
    max_terms : int
        Cap on the number of terms of any single series.
    """

    abs_tol: float = 1e-14
    max_terms: int = 10_000

    def __post_init__(self) -> None:
        if not (self.abs_tol > 0 and math.isfinite(self.abs_tol)):
            raise ValueError(f"abs_tol must be positive, got {self.abs_tol}")
        if int(self.max_terms) != self.max_terms or self.max_terms < 1:
            raise ValueError(f"max_terms must be a positive integer, got {self.max_terms}")

    def effective_tol(self, value: float = 0.0) -> float:
        """Tolerance after applying the double-precision floor."""
        return max(self.abs_tol, ACCURACY_FLOOR * max(1.0, abs(value)))


DEFAULT_CONFIG = EvalConfig()


class ConvergenceError(ArithmeticError):
    """No evaluation regime reached the requested tolerance."""

    def __init__(self, message: str, achieved: float | None = None) -> None:
        super().__init__(message)
        self.achieved = achieved


def lgamma(x):
    """Logarithm of :math:`|\\Gamma(x)|` (vectorized)."""
    return sc.gammaln(x)


def rgamma(x):
    """Reciprocal gamma function, zero at the poles (vectorized)."""
    return sc.rgamma(x)


def _is_nonpos_int(x: float) -> bool:
    return x <= 0 and x == math.floor(x)


def pochhammer(c: float, m: int) -> float:
    """Rising factorial :math:`(c)_m = \\Gamma(c+m)/\\Gamma(c)`.

    The product form is used for ``m <= 64`` and whenever ``c`` is a
    non-positive integer (where the gamma ratio is singular but the product
    is finite); otherwise a log-gamma difference.

    Raises
    ------
    ValueError
        If ``m`` is not a nonnegative integer.
    OverflowError
        If the result is not representable.
    """
    if int(m) != m or m < 0:
        raise ValueError(f"m must be a nonnegative integer, got {m}")
    m = int(m)
    if m == 0:
        return 1.0
    c = float(c)
    if m <= 64 or _is_nonpos_int(c) or _is_nonpos_int(c + m):
        prod = 1.0
        for j in range(m):
            prod *= c + j
            if prod == 0.0:
                return 0.0
        if not math.isfinite(prod):
            raise OverflowError(f"pochhammer({c}, {m}) overflows")
        return prod
    sign = sc.gammasgn(c + m) * sc.gammasgn(c)
    log_val = sc.gammaln(c + m) - sc.gammaln(c)
    if log_val > 709.0:
        raise OverflowError(f"pochhammer({c}, {m}) overflows")
    return float(sign * math.exp(log_val))


# ---------------------------------------------------------------------------
# Prabhakar / Mittag-Leffler


def _series(a: float, b: float, g: float, z: float, max_terms: int):
    """Defining series with a roundoff-aware error estimate."""
    x = abs(z)
    lx = math.log(x)
    lg0 = sc.gammaln(g)
    alt = z < 0
    chunk = 64
    terms: list[np.ndarray] = []
    abs_sum = 0.0
    round_err = 0.0
    start = 0
    last_ratio = 1.0
    while start < max_terms:
        s = np.arange(start, min(start + chunk, max_terms), dtype=float)
        parts = (sc.gammaln(g + s), sc.gammaln(s + 1.0), sc.gammaln(a * s + b), s * lx)
        logt = parts[0] - lg0 - parts[1] - parts[2] + parts[3]
        if np.any(logt > 700.0):
            return None
        t = np.exp(logt)
        size = np.abs(parts[0]) + abs(lg0) + parts[1] + np.abs(parts[2]) + np.abs(parts[3])
        if alt:
            t = np.where(s % 2 == 1, -t, t)
        terms.append(t)
        abs_sum += float(np.abs(t).sum())
        round_err += float((np.abs(t) * (4.0 + size)).sum()) * EPS
        start += len(s)
        if len(t) >= 2 and t[-2] != 0.0:
            last_ratio = abs(t[-1] / t[-2])
        # terms are unimodal in s; stop once past the peak and negligible
        if last_ratio < 1.0 and abs(t[-1]) <= 1e-3 * EPS * max(abs_sum, 1e-300):
            break
    else:
        return None
    tail = abs(t[-1]) * last_ratio / (1.0 - last_ratio)
    value = math.fsum(np.concatenate(terms))
    return value, round_err + tail


def _asymptotic(a: float, b: float, g: float, x: float, max_terms: int):
    """Algebraic expansion of ``E^g_{a,b}(-x)`` for ``a < 1`` and large ``x``.

    Truncation uses the pole-free envelope ``|1/Gamma(z)| <= Gamma(1-z)/pi``
    for ``z < 0``, so terms that happen to sit near a pole of ``1/Gamma`` do
    not stop the sum early.
    """
    lx = math.log(x)
    lg0 = sc.gammaln(g)
    total = []
    prev = math.inf
    for k in range(max_terms):
        arg = b - a * (g + k)
        base = sc.gammaln(g + k) - lg0 - sc.gammaln(k + 1.0) - (g + k) * lx
        log_env = base + (-sc.gammaln(arg) if arg > 0 else sc.gammaln(1.0 - arg) - math.log(math.pi))
        env = math.exp(log_env) if log_env < 700.0 else math.inf
        if env > prev:
            break
        prev = env
        if not _is_nonpos_int(arg):
            sign = sc.gammasgn(arg) * (-1.0 if k % 2 else 1.0)
            total.append(sign * math.exp(base - sc.gammaln(arg)))
        if total and env < 1e-3 * EPS * abs(total[0]):
            break
    if not total:
        return None
    # branch-cut remainder near r = x^(1/a); large when a is close to 1
    gap = 2.0 * math.sin(0.5 * math.pi * (1.0 - a))
    log_rem = (
        -(x ** (1.0 / a))
        + math.log(10.0 * (1.0 + x ** ((1.0 - b) / a)) / a)
        - max(g - 1.0, 0.0) * math.log(gap)
    )
    return math.fsum(total), 10.0 * prev + math.exp(min(log_rem, 700.0))


def _contour_eval(a: float, b: float, g: float, x: float):
    p = a * g - b

    def F(s):
        return np.exp(p * np.log(s) - g * np.log(s**a + x))

    return _contour.invert_with_error(F, 1.0)


def _prabhakar_scalar(a: float, b: float, g: float, z: float, cfg: EvalConfig) -> float:
    if g == 0.0 or z == 0.0:
        return float(sc.rgamma(b))
    if a == 1.0 and b == 1.0 and g == 1.0:
        return math.exp(z)
    best = math.inf
    x = -z
    # the absolute series sum grows like exp(|z|^(1/a)); beyond this it is hopeless
    growth = abs(z) ** (1.0 / a)
    if z > 0 or growth < 40.0:
        res = _series(a, b, g, z, cfg.max_terms)
        if res is not None:
            val, err = res
            if err <= cfg.effective_tol(val):
                return val
            best = min(best, err)
    if z > 0:
        raise ConvergenceError(
            f"series for E^{g}_{a},{b}({z}) did not converge (error {best:.2e})", best
        )
    if a < 1.0 and growth > 3.0:
        res = _asymptotic(a, b, g, x, cfg.max_terms)
        if res is not None:
            val, err = res
            if err <= cfg.effective_tol(val):
                return val
            best = min(best, err)
    val, err = _contour_eval(a, b, g, x)
    if err <= cfg.effective_tol(val):
        return val
    best = min(best, err)
    raise ConvergenceError(
        f"E^{g}_{a},{b}({z}): best error estimate {best:.2e} exceeds tolerance", best
    )


def _check_orders(alpha: float, beta: float) -> None:
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if not beta > 0.0:
        raise ValueError(f"beta must be positive, got {beta}")


def prabhakar(alpha: float, beta: float, gamma: float, z, cfg: EvalConfig | None = None):
    """Three-parameter Mittag-Leffler function.

    .. math:: E^{\\gamma}_{\\alpha,\\beta}(z) = \\sum_{s\\ge 0}
              \\frac{(\\gamma)_s\\, z^s}{s!\\,\\Gamma(\\alpha s+\\beta)}

    Parameters
    ----------
    alpha : float
        In ``(0, 1]``.
    beta : float
        Positive.
    gamma : float
        Nonnegative; ``gamma = 0`` gives ``1/Gamma(beta)``.
    z : float or array_like
        Real argument(s).
    cfg : EvalConfig, optional

    Raises
    ------
    ConvergenceError
        If no regime reaches the tolerance.
    """
    _check_orders(alpha, beta)
    if not gamma >= 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    cfg = cfg or DEFAULT_CONFIG
    a, b, g = float(alpha), float(beta), float(gamma)
    if np.ndim(z) == 0:
        return _prabhakar_scalar(a, b, g, float(z), cfg)
    zz = np.asarray(z, dtype=float)
    out = np.empty_like(zz)
    for idx, zi in np.ndenumerate(zz):
        out[idx] = _prabhakar_scalar(a, b, g, float(zi), cfg)
    return out


def mittag_leffler(alpha: float, beta: float, z, cfg: EvalConfig | None = None):
    """Two-parameter Mittag-Leffler function :math:`E_{\\alpha,\\beta}(z)`.

    See :func:`prabhakar` (this is the case ``gamma = 1``).
    """
    return prabhakar(alpha, beta, 1.0, z, cfg)


# ---------------------------------------------------------------------------
# M-Wright function and fractional Poisson weights


def _zolotarev_log_k(beta: float, phi: np.ndarray) -> np.ndarray:
    # log form: the powers under- and overflow separately for beta near 1
    p = 1.0 / (1.0 - beta)
    return beta * p * np.log(np.sin(beta * phi)) + np.log(np.sin((1.0 - beta) * phi)) - p * np.log(np.sin(phi))


def _mwright_series(beta: float, z: np.ndarray, n: int = 400):
    k = np.arange(n, dtype=float)
    arg = 1.0 - beta - beta * k
    pole = (arg <= 0) & (arg == np.floor(arg))
    safe = np.where(pole, 0.5, arg)
    with np.errstate(divide="ignore"):
        lz = np.log(z)[:, None]
    logt = k * lz - sc.gammaln(k + 1.0) - np.where(pole, 0.0, sc.gammaln(safe))
    coef = np.where(pole, 0.0, (-1.0) ** k * sc.gammasgn(safe))
    with np.errstate(over="ignore", invalid="ignore"):
        t = coef * np.exp(np.minimum(logt, 700.0))
    value = t.sum(axis=1)
    absum = np.abs(t).sum(axis=1)
    # several trailing terms, since single terms vanish at poles of 1/Gamma
    tail = np.abs(t[:, -8:]).max(axis=1)
    ok = (tail <= 1e-3 * EPS * absum) & (absum <= 100.0 * np.abs(value)) & np.all(logt < 700.0, axis=1)
    return value, ok


@lru_cache(maxsize=32)
def _log_k_table(beta: float) -> tuple[np.ndarray, np.ndarray]:
    # log K moves by about p per radian; keep it below one unit per cell
    n = int(min(max(16384, 8.0 / (1.0 - beta)), 2**22))
    phi = np.linspace(0.0, np.pi, n + 1)[1:-1]
    logk = np.concatenate([[math.log(1.0 - beta) + beta / (1.0 - beta) * math.log(beta)], _zolotarev_log_k(beta, phi)])
    # K increases monotonically; enforce it against roundoff before inverting.
    # log K - log K(0) ~ phi**2 at the origin, so phi**2 is the variable that
    # interpolates linearly there
    return np.concatenate([[0.0], phi**2]), np.maximum.accumulate(logk)


_GL8 = np.polynomial.legendre.leggauss(8)
_N_PANELS = 64


def _mwright_integral(beta: float, z: np.ndarray) -> np.ndarray:
    p = 1.0 / (1.0 - beta)
    log_b = math.log(1.0 - beta) + beta * p * math.log(beta)
    # the integrand K exp(-z^p K) matters only where z^p K lies between 1e-17
    # and z^p K(0) + 60.  log K grows at a rate ~p in phi, so for beta near 1
    # the peak is narrow; panels are spaced uniformly in log K, with their
    # phi edges from the tabulated inverse, and carry 8 Gauss nodes each
    plz = p * np.log(z)
    v_hi = np.logaddexp(log_b, math.log(60.0) - plz)
    v_lo = np.maximum(math.log(1e-17) - plz, log_b)
    v_lo = np.minimum(v_lo, v_hi)
    phi2_tab, logk_tab = _log_k_table(beta)
    frac = np.linspace(0.0, 1.0, _N_PANELS + 1)
    v_edges = v_lo[:, None] + (v_hi - v_lo)[:, None] * frac[None, :]
    edges = np.sqrt(np.interp(v_edges, logk_tab, phi2_tab, left=0.0, right=np.pi**2))
    edges[:, 0] = np.where(v_lo <= log_b, 0.0, edges[:, 0])
    x, w = _GL8
    half = np.diff(edges, axis=1)[:, :, None] / 2.0
    phi = edges[:, :-1, None] + (x[None, None, :] + 1.0) * half
    # empty panels at the ends would put nodes on the singular endpoints
    phi = np.clip(phi, 1e-300, np.pi * (1.0 - 1e-15))
    logk = _zolotarev_log_k(beta, phi)
    # z^(beta p) K exp(-z^p K) = u exp(-u) / z with u = z^p K, since beta p - p = -1
    log_u = plz[:, None, None] + logk
    with np.errstate(over="ignore", under="ignore"):
        integral = np.sum(np.exp(log_u - np.exp(log_u)) * w[None, None, :] * half, axis=(1, 2))
    return integral / (z * (1.0 - beta) * np.pi)


def mwright(beta: float, z):
    """M-Wright (Mainardi) function :math:`M_\\beta(z)` for ``z >= 0``.

    :math:`M_\\beta` is the density of the inverse stable subordinator at unit
    time; its Laplace transform is :math:`E_\\beta(-s)`.  Uses the absolutely
    convergent series where it has no cancellation and Zolotarev's positive
    integral representation elsewhere, so the result carries relative
    accuracy on the whole half line.

    Parameters
    ----------
    beta : float
        In ``(0, 1)``.
    z : float or array_like
        Nonnegative argument(s).
    """
    if not (0.0 < beta < 1.0):
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    zz = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(zz < 0):
        raise ValueError("mwright is defined here for z >= 0")
    out = np.empty_like(zz)
    zero = zz == 0.0
    out[zero] = sc.rgamma(1.0 - beta)
    pos = ~zero
    if np.any(pos):
        zp = zz[pos]
        ser, ok = _mwright_series(beta, zp)
        res = ser.copy()
        if np.any(~ok):
            res[~ok] = _mwright_integral(beta, zp[~ok])
        out[pos] = res
    return out[0] if np.ndim(z) == 0 else out.reshape(np.shape(z))


def _zeta_max(beta: float) -> float:
    # M_beta(z) ~ exp(-B z^(1/(1-beta))) with B = K(0)
    b0 = (1.0 - beta) * beta ** (beta / (1.0 - beta))
    far = (50.0 / b0) ** (1.0 - beta)
    # near beta = 1 the bulk is close to a narrow Gaussian about the mean,
    # which the far-tail asymptote places the cut inside of
    mean = float(sc.rgamma(1.0 + beta))
    var = max(2.0 * float(sc.rgamma(1.0 + 2.0 * beta)) - mean**2, 0.0)
    return max(far, mean + 12.0 * math.sqrt(var))


def _gl_panels(edges: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2.0
    nodes = (lo + half * (x + 1.0)).ravel()
    weights = (half * w).ravel()
    return nodes, weights


# orders above which the mixing density needs extra panels
_NARROW = 0.95


def _poisson_mixture_rule(beta: float, y: float, n: int = 10):
    zmax = _zeta_max(beta)
    lam_max = y * zmax
    # resolve the Poisson kernels (width ~ sqrt(lambda)) and the mixing density
    sig = np.arange(0.0, math.sqrt(lam_max) + 0.5, 0.5) ** 2
    unif = np.linspace(0.0, lam_max, 49)
    edges = [sig[sig < lam_max], unif]
    if beta > _NARROW:
        # the mixing density narrows about its mean as beta -> 1 ...
        mean = float(sc.rgamma(1.0 + beta))
        sd = math.sqrt(max(2.0 * float(sc.rgamma(1.0 + 2.0 * beta)) - mean**2, 0.0))
        edges.append(y * np.linspace(max(mean - 12.0 * sd, 0.0), min(mean + 12.0 * sd, zmax), 161))
        # ... and its right edge falls like exp(-B z^p); unit steps in B z^p resolve it
        p = 1.0 / (1.0 - beta)
        b0 = (1.0 - beta) * beta ** (beta * p)
        cliff = y * (np.arange(0.1, 61.0) / b0) ** (1.0 / p)
        edges.append(cliff[cliff < lam_max])
    edges = np.unique(np.concatenate(edges))
    lam, w = _gl_panels(edges, n)
    rho = mwright(beta, lam / y) / y
    return lam, w * rho


# below this distance from beta = 1 the mixing density is too narrow for the rule
_NEAR_ONE = 1e-4


def _near_one(beta: float, f):
    """Quadratic interpolation of ``f`` in beta from the nodes 1, 1-h, 1-2h.

    The weights are analytic in beta, so the error is of order ``h**3``.
    """
    t = (1.0 - beta) / _NEAR_ONE
    f0, f1, f2 = f(1.0), f(1.0 - _NEAR_ONE), f(1.0 - 2.0 * _NEAR_ONE)
    return 0.5 * (t - 1.0) * (t - 2.0) * f0 - t * (t - 2.0) * f1 + 0.5 * t * (t - 1.0) * f2


def frac_poisson_weights(beta: float, y: float, m_max: int, cfg: EvalConfig | None = None) -> np.ndarray:
    """Fractional Poisson probabilities :math:`\\Phi_m`, ``m = 0..m_max``.

    :math:`\\Phi_m = y^m E^{(m)}_\\beta(-y)/m!` with ``y = xi t**beta``; these
    are also the scaled Taylor coefficients of :math:`E_\\beta` about ``-y``.
    They are evaluated as the Poisson mixture

    .. math:: \\Phi_m = \\int_0^\\infty \\frac{e^{-\\lambda}\\lambda^m}{m!}
              \\, \\frac{1}{y} M_\\beta(\\lambda/y)\\,d\\lambda,

    whose integrand is positive, so every weight is nonnegative and carries
    relative accuracy regardless of ``m`` and ``y``.
    """
    if int(m_max) != m_max or m_max < 0:
        raise ValueError(f"m_max must be a nonnegative integer, got {m_max}")
    if not (0.0 < beta <= 1.0):
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if not y >= 0.0:
        raise ValueError(f"y must be nonnegative, got {y}")
    m = np.arange(int(m_max) + 1, dtype=float)
    if y == 0.0:
        out = np.zeros(len(m))
        out[0] = 1.0
        return out
    if beta == 1.0:
        return np.exp(m * math.log(y) - y - sc.gammaln(m + 1.0))
    if 1.0 - beta < 0.99 * _NEAR_ONE:
        return np.maximum(_near_one(beta, lambda b: frac_poisson_weights(b, y, m_max, cfg)), 0.0)
    lam, w = _poisson_mixture_rule(beta, y)
    logp = np.outer(m, np.log(lam)) - lam[None, :] - sc.gammaln(m + 1.0)[:, None]
    return np.exp(logp) @ w


def frac_poisson_sf(beta: float, y: float, m: int) -> float:
    """Tail mass :math:`\\sum_{k>m}\\Phi_k` of the fractional Poisson law."""
    if beta == 1.0:
        return float(sc.gammainc(m + 1.0, y))
    if y == 0.0:
        return 0.0
    if 1.0 - beta < 0.99 * _NEAR_ONE:
        return max(float(_near_one(beta, lambda b: frac_poisson_sf(b, y, m))), 0.0)
    lam, w = _poisson_mixture_rule(beta, y)
    return float(sc.gammainc(m + 1.0, lam) @ w)
