"""State probabilities of strictly increasing walks subordinated to counting processes.

Every process here has a generating function of the form
``E_beta(-xi t**beta * G(1-u))`` for some normalized good Laplacian ``G``:

=====================  ===========================================
process                ``G(v)``
=====================  ===========================================
poisson                ``v`` with ``beta = 1``
frac_poisson           ``v``
space_frac             ``v**alpha`` with ``beta = 1``
space_time_frac        ``v**alpha``
stml                   ``(lam+1) v**alpha / (lam + v**alpha)``
stml_generalized       the ``mu``-th power of the ``stml`` symbol
=====================  ===========================================

The production evaluator composes the Taylor data of ``E_beta`` with the
generator kernel (:func:`stml.series.compose_scalar`).  The explicit double
series of the literature are kept as cross-check oracles for moderate
``xi t**beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np
from scipy import special as sc

from . import series
from .laplacian import ProcessParams, generalized_ml_laplacian, ml_laplacian_genfun
from .series import CirculantKernel, MittagLefflerSeries
from .specfun import (
    DEFAULT_CONFIG,
    EPS,
    ConvergenceError,
    EvalConfig,
    frac_poisson_sf,
    frac_poisson_weights,
)

__all__ = [
    "PROCESS_TAGS",
    "StatePMF",
    "poisson_pmf",
    "frac_poisson_pmf",
    "laskin_series",
    "space_time_frac_pmf",
    "space_time_frac_series",
    "stml_pmf",
    "stml_generalized_pmf",
    "discrete_prabhakar",
    "stml_series",
    "stml_asymptotics",
    "montroll_weiss_closed_form",
    "montroll_weiss_check",
    "cox_series_pmf",
    "poisson_counting",
    "frac_poisson_counting",
    "window_counting",
    "caputo_l1",
    "kolmogorov_feller_residual",
    "caputo_residual",
]

PROCESS_TAGS = ("poisson", "frac_poisson", "space_frac", "space_time_frac", "stml", "stml_generalized")

# above this xi t**beta the double series lose too many digits to cancellation
LASKIN_MAX_Y = 20.0


@dataclass(frozen=True, eq=False)
class StatePMF:
    """Probabilities ``p_0..p_N`` at time ``time`` and the mass beyond ``N``."""

    time: float
    probs: np.ndarray
    tail_bound: float
    params: ProcessParams
    process_tag: str

    def __post_init__(self) -> None:
        if self.process_tag not in PROCESS_TAGS:
            raise ValueError(f"unknown process tag {self.process_tag!r}")
        if not self.time >= 0:
            raise ValueError("time must be nonnegative")
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or not np.all(np.isfinite(p)):
            raise ValueError("probs must be a finite 1-d array")
        if np.any(p < -1e-12) or np.any(p > 1 + 1e-12):
            raise ValueError("probabilities outside [0, 1]")
        p = np.clip(p, 0.0, 1.0)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        if not self.tail_bound >= 0:
            raise ValueError("tail_bound must be nonnegative")

    @property
    def N(self) -> int:
        return len(self.probs) - 1

    @property
    def mass(self) -> float:
        """``sum p_n + tail_bound``; 1 up to truncation and roundoff."""
        return math.fsum(self.probs) + self.tail_bound

    @property
    def normalization_error(self) -> float:
        return abs(self.mass - 1.0)

    def __getitem__(self, n):
        return self.probs[n]

    def __len__(self) -> int:
        return len(self.probs)


def _delta_pmf(N: int, params: ProcessParams, tag: str) -> StatePMF:
    p = np.zeros(N + 1)
    p[0] = 1.0
    return StatePMF(0.0, p, 0.0, params, tag)


def _rising_ratio(x: np.ndarray, N: int) -> np.ndarray:
    """``(x)_n / n!`` for ``n = 0..N`` by the product form (exact at poles)."""
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    k = np.arange(1, N + 1, dtype=float)
    out = np.ones((x.shape[0], N + 1))
    out[:, 1:] = np.cumprod((x + k - 1.0) / k, axis=1)
    return out


def _check_time(t: float, N: int) -> None:
    if not (t >= 0 and math.isfinite(t)):
        raise ValueError(f"time must be finite and nonnegative, got {t}")
    if int(N) != N or N < 0:
        raise ValueError(f"N must be a nonnegative integer, got {N}")


# ---------------------------------------------------------------------------
# Poisson and fractional Poisson


def poisson_pmf(xi: float, t: float, N: int = series.DEFAULT_ORDER) -> StatePMF:
    """Poisson probabilities by the recurrence ``p_{n+1} = p_n xi t / (n+1)``.

    When ``exp(-xi t)`` underflows the same values are formed in log space.
    """
    _check_time(t, N)
    params = ProcessParams(xi=xi)
    if t == 0:
        return _delta_pmf(N, params, "poisson")
    y = xi * t
    p = np.empty(N + 1)
    if y < 700.0:
        p[0] = math.exp(-y)
        for n in range(N):
            p[n + 1] = p[n] * y / (n + 1)
    else:
        n = np.arange(N + 1, dtype=float)
        p[:] = np.exp(n * math.log(y) - y - sc.gammaln(n + 1.0))
    return StatePMF(t, p, float(sc.gammainc(N + 1.0, y)), params, "poisson")


def laskin_series(beta: float, y: float, N: int, cfg: EvalConfig | None = None):
    """Laskin's double series for the fractional Poisson law.

    .. math:: p_n = \\frac{y^n}{n!}\\sum_{m\\ge0}\\frac{(m+n)!}{m!}
              \\frac{(-y)^m}{\\Gamma((m+n)\\beta+1)}

    Returns the values and a per-entry error estimate (roundoff from the
    magnitude of the alternating terms plus the first omitted term).
    """
    cfg = cfg or DEFAULT_CONFIG
    n = np.arange(N + 1, dtype=float)
    out = np.zeros(N + 1)
    err = np.zeros(N + 1)
    if y == 0:
        out[0] = 1.0
        return out, err
    ly = math.log(y)
    chunk = 64
    done = np.zeros(N + 1, dtype=bool)
    acc = [[] for _ in range(N + 1)]
    absacc = np.zeros(N + 1)
    m0 = 0
    last = np.full(N + 1, np.inf)
    while not np.all(done):
        if m0 >= cfg.max_terms:
            raise ConvergenceError(f"Laskin series did not converge in {cfg.max_terms} terms", float(err.max()))
        m = np.arange(m0, m0 + chunk, dtype=float)[:, None]
        logt = (
            n * ly - sc.gammaln(n + 1.0) + sc.gammaln(m + n + 1.0) - sc.gammaln(m + 1.0)
            + m * ly - sc.gammaln((m + n) * beta + 1.0)
        )
        t = np.where(m % 2 == 0, 1.0, -1.0) * np.exp(logt)
        for j in np.nonzero(~done)[0]:
            acc[j].extend(t[:, j].tolist())
        absacc += np.where(done, 0.0, np.abs(t).sum(axis=0))
        last = np.abs(t[-8:]).max(axis=0)
        # terms eventually decay faster than geometrically
        done |= (last <= 1e-3 * EPS * np.maximum(absacc, 1e-300)) & (m0 + chunk > 8)
        m0 += chunk
    for j in range(N + 1):
        out[j] = math.fsum(acc[j])
    err = 8 * EPS * absacc + last
    return out, err


def _compose_pmf(
    a: CirculantKernel, beta: float, t: float, params: ProcessParams, tag: str, cfg: EvalConfig
) -> StatePMF:
    k = series.compose_scalar(MittagLefflerSeries(beta, cfg), a, cfg)
    return StatePMF(t, np.maximum(k.coeffs, 0.0), max(k.tail, 0.0), params, tag)


def frac_poisson_pmf(
    p: ProcessParams, t: float, N: int = series.DEFAULT_ORDER, method: str = "auto",
    cfg: EvalConfig | None = None,
) -> StatePMF:
    """Fractional Poisson probabilities with parameter ``y = xi t**beta``.

    ``method``:
      * ``"kernel"`` composes ``E_beta`` with ``-y (1-u)`` (always usable);
      * ``"laskin"`` sums the double series;
      * ``"auto"`` uses the series for ``y <= 20`` when its error estimate
        meets the tolerance, the kernel path otherwise.
    """
    cfg = cfg or DEFAULT_CONFIG
    _check_time(t, N)
    if t == 0:
        return _delta_pmf(N, p, "frac_poisson")
    y = p.xi * t**p.beta
    if p.beta == 1.0:
        q = poisson_pmf(p.xi, t, N)
        return StatePMF(t, q.probs, q.tail_bound, p, "frac_poisson")
    if method not in ("auto", "laskin", "kernel"):
        raise ValueError(f"unknown method {method!r}")
    if method in ("auto", "laskin") and y <= LASKIN_MAX_Y:
        try:
            vals, err = laskin_series(p.beta, y, N, cfg)
        except ConvergenceError:
            if method == "laskin":
                raise
        else:
            if np.all(err <= cfg.effective_tol()):
                return StatePMF(t, vals, frac_poisson_sf(p.beta, y, N), p, "frac_poisson")
            if method == "laskin":
                raise ConvergenceError(f"Laskin series lost accuracy (error {err.max():.3g})", float(err.max()))
    elif method == "laskin":
        raise ConvergenceError(f"Laskin series is not used for xi t^beta = {y:.3g} > {LASKIN_MAX_Y}")
    a = series.scale(series.frac_power_one_minus_u(1.0, N), -y)
    out = _compose_pmf(a, p.beta, t, p, "frac_poisson", cfg)
    return StatePMF(t, out.probs, frac_poisson_sf(p.beta, y, N), p, "frac_poisson")


# ---------------------------------------------------------------------------
# space-time fractional Poisson


def space_time_frac_pmf(
    p: ProcessParams, t: float, N: int = series.DEFAULT_ORDER, cfg: EvalConfig | None = None
) -> StatePMF:
    """Generating function ``E_beta(-xi t**beta (1-u)**alpha)``.

    ``beta = 1`` gives the space-fractional Poisson process (tag
    ``space_frac``).
    """
    cfg = cfg or DEFAULT_CONFIG
    _check_time(t, N)
    tag = "space_frac" if p.beta == 1.0 else "space_time_frac"
    if t == 0:
        return _delta_pmf(N, p, tag)
    y = p.xi * t**p.beta
    a = series.scale(series.frac_power_one_minus_u(p.alpha, N), -y)
    return _compose_pmf(a, p.beta, t, p, tag, cfg)


def space_time_frac_series(alpha: float, beta: float, y: float, N: int, max_terms: int = 2000):
    """Orsingher-Polito double series for the space-time fractional Poisson law.

    .. math:: p_n = \\frac{(-1)^n}{n!}\\sum_{m\\ge0}
              \\frac{\\Gamma(\\alpha m+1)}{\\Gamma(\\alpha m+1-n)}
              \\frac{(-y)^m}{\\Gamma(\\beta m+1)}

    Returns values and a roundoff-based error estimate.
    """
    m = np.arange(max_terms, dtype=float)[:, None]
    # (-1)^n Gamma(am+1)/(Gamma(am+1-n) n!) = (-am)_n / n!
    b = _rising_ratio(-alpha * m, N)
    with np.errstate(over="ignore", under="ignore"):
        w = np.exp(m * math.log(y) - sc.gammaln(beta * m + 1.0)) * np.where(m % 2 == 0, 1.0, -1.0)
    terms = b * w
    absum = np.abs(terms).sum(axis=0)
    if np.abs(terms[-4:]).max() > EPS * absum.max():
        raise ConvergenceError("space-time fractional series did not converge")
    vals = np.array([math.fsum(terms[:, j]) for j in range(N + 1)])
    return vals, 8 * EPS * absum


# ---------------------------------------------------------------------------
# space-time Mittag-Leffler process


def _check_series(err: np.ndarray, limit: float = 1e-9) -> None:
    if err.max() > limit:
        n = int(np.argmax(err > limit))
        raise ConvergenceError(
            f"double series lost accuracy from n = {n} on (error {err.max():.3g}); use the kernel path",
            float(err.max()),
        )


def stml_pmf(
    p: ProcessParams, t: float, N: int = series.DEFAULT_ORDER, method: str = "kernel",
    cfg: EvalConfig | None = None, generator: CirculantKernel | None = None,
) -> StatePMF:
    """Space-time Mittag-Leffler state probabilities.

    The kernel path composes ``E_beta`` with ``-xi t**beta (lam+1) g`` where
    ``g`` is :func:`~stml.laplacian.ml_laplacian_genfun`; it is valid for every
    ``lam > 0``.  ``method="series"`` evaluates the explicit double series,
    which is undefined at ``lam = 1``.  A precomputed ``generator`` of order
    ``N`` may be passed to amortize its construction over many times.
    """
    cfg = cfg or DEFAULT_CONFIG
    _check_time(t, N)
    if t == 0:
        return _delta_pmf(N, p, "stml")
    y = p.xi * t**p.beta
    if method == "series":
        vals, err = stml_series(p, y, N, mu=1.0)
        _check_series(err)
        return StatePMF(t, np.clip(vals, 0.0, 1.0), max(1.0 - math.fsum(vals), 0.0), p, "stml")
    if method != "kernel":
        raise ValueError(f"unknown method {method!r}")
    g = generator if generator is not None else ml_laplacian_genfun(p, N)
    return _compose_pmf(series.scale(g, -y * (p.lam + 1.0)), p.beta, t, p, "stml", cfg)


def stml_generalized_pmf(
    p: ProcessParams, t: float, N: int = series.DEFAULT_ORDER, method: str = "kernel",
    cfg: EvalConfig | None = None, generator: CirculantKernel | None = None,
) -> StatePMF:
    """Generalized process with generator ``(lam+1)**mu g**mu``.

    For ``mu = 1`` this is :func:`stml_pmf`.
    """
    cfg = cfg or DEFAULT_CONFIG
    _check_time(t, N)
    if t == 0:
        return _delta_pmf(N, p, "stml_generalized")
    y = p.xi * t**p.beta
    if method == "series":
        vals, err = stml_series(p, y, N, mu=p.mu)
        _check_series(err)
        return StatePMF(t, np.clip(vals, 0.0, 1.0), max(1.0 - math.fsum(vals), 0.0), p, "stml_generalized")
    if method != "kernel":
        raise ValueError(f"unknown method {method!r}")
    g = generator if generator is not None else generalized_ml_laplacian(p, N)
    a = series.scale(g, -y * (p.lam + 1.0) ** p.mu)
    return _compose_pmf(a, p.beta, t, p, "stml_generalized", cfg)


def discrete_prabhakar(alpha: float, lam: float, c: float, N: int, tol: float = 1e-17, max_terms: int = 100_000):
    """Coefficients ``n = 0..N`` of ``[g(1-u)]**c``, the discrete Prabhakar kernel.

    Uses the expansion in powers of ``lam`` for ``lam < 1`` and of ``1/lam``
    for ``lam > 1``; neither converges at ``u = 0`` when ``lam = 1``.

    Returns values and a roundoff estimate.
    """
    if lam == 1.0:
        raise ValueError("the series representation is undefined at lam = 1; use the kernel path")
    if c == 0:
        out = np.zeros(N + 1)
        out[0] = 1.0
        return out, np.zeros(N + 1)
    q = lam if lam < 1 else 1.0 / lam
    # terms ~ q^s s^(c+n-1); stop one decade past tol at n = N
    s_max = 16
    while s_max < max_terms and s_max * math.log(q) + (c + N) * math.log(s_max) > math.log(tol) - 2:
        s_max *= 2
    if s_max >= max_terms:
        raise ConvergenceError("discrete Prabhakar series needs too many terms")
    s = np.arange(s_max + 1, dtype=float)[:, None]
    lead = np.exp(s * math.log(q) + sc.gammaln(c + s) - sc.gammaln(c) - sc.gammaln(s + 1.0))
    sign_s = np.where(s % 2 == 0, 1.0, -1.0)
    if lam < 1:
        # (alpha s)_n / n!, zero for s = 0 < n
        v = _rising_ratio(alpha * s, N)
        terms = sign_s * lead * v
        scale = 1.0
    else:
        # (-1)^n Gamma(x+1)/(Gamma(x-n+1) n!) = (-x)_n / n! with x = alpha (s + c)
        v = _rising_ratio(-alpha * (s + c), N)
        terms = sign_s * lead * v
        scale = lam ** (-c)
    vals = scale * np.array([math.fsum(terms[:, j]) for j in range(N + 1)])
    err = scale * 8 * EPS * np.abs(terms).sum(axis=0)
    return vals, err


def stml_series(p: ProcessParams, y: float, N: int, mu: float = 1.0, tol: float = 1e-16, max_terms: int = 400):
    """Double series ``sum_m [-(lam+1)**mu y]**m / Gamma(beta m+1) E^(m mu)(lam, n)``.

    A cross-check for moderate ``y``; returns values and an error estimate.
    """
    z = -((p.lam + 1.0) ** mu) * y
    out = np.zeros(N + 1)
    absum = np.zeros(N + 1)
    err = np.zeros(N + 1)
    for m in range(max_terms):
        coef = math.exp(m * math.log(abs(z)) - sc.gammaln(p.beta * m + 1.0)) * (-1.0) ** m if m else 1.0
        e, ee = discrete_prabhakar(p.alpha, p.lam, m * mu, N)
        term = coef * e
        out += term
        absum += np.abs(term)
        err += abs(coef) * ee
        # E^(c)(lam, n) is a probability-like quantity bounded by 1 in magnitude
        if m > 2 and abs(coef) < tol * 1e-2:
            break
    else:
        raise ConvergenceError("stml double series did not converge")
    return out, err + 8 * EPS * absum


def stml_asymptotics(p: ProcessParams, n: int, t: float, regime: str = "large_n") -> float:
    """Closed-form asymptotes of the stml state probabilities.

    * ``"large_n"``: ``alpha (lam+1) xi t**beta n**(-alpha-1) / (lam Gamma(1-alpha) Gamma(1+beta))``
    * ``"large_t"``: ``(delta_n0 + lam (alpha)_n/n!) t**-beta / ((lam+1) xi Gamma(1-beta))``
    """
    a, b, lam, xi = p.alpha, p.beta, p.lam, p.xi
    if regime == "large_n":
        if a == 1.0:
            raise ValueError("the large-n asymptote degenerates for alpha = 1 (geometric decay)")
        return a * (lam + 1) * xi * t**b * n ** (-a - 1) / (lam * math.gamma(1 - a) * math.gamma(1 + b))
    if regime == "large_t":
        if b == 1.0:
            raise ValueError("the large-t asymptote degenerates for beta = 1 (exponential decay)")
        poch = math.exp(sc.gammaln(a + n) - sc.gammaln(a) - sc.gammaln(n + 1.0))
        return ((1.0 if n == 0 else 0.0) + lam * poch) * t ** (-b) / ((lam + 1) * xi * math.gamma(1 - b))
    raise ValueError(f"unknown regime {regime!r}")


# ---------------------------------------------------------------------------
# Montroll-Weiss


def montroll_weiss_closed_form(p: ProcessParams, u: float, s: float) -> float:
    """``s**(beta-1) / (s**beta + xi (lam+1) v**alpha / (lam + v**alpha))`` with ``v = 1-u``."""
    va = (1.0 - u) ** p.alpha
    return s ** (p.beta - 1.0) / (s**p.beta + p.xi * (p.lam + 1.0) * va / (p.lam + va))


def _time_panels(t_max: float, n: int = 16) -> tuple[np.ndarray, np.ndarray]:
    # geometric grading towards t = 0 resolves the t**beta cusp
    edges = np.concatenate([[0.0], t_max * np.logspace(-8, 0, 33)])
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = (hi - lo) / 2.0
    return (lo + half * (x + 1.0)).ravel(), (half * w).ravel()


def montroll_weiss_check(
    p: ProcessParams, probe_points: Iterable[tuple[float, float]], N: int = 256,
    cfg: EvalConfig | None = None,
) -> float:
    """Max relative gap between the Montroll-Weiss formula and the pmf's transform.

    The time-Laplace transform of ``sum_n p_n(t) u**n`` is computed by
    composite Gauss quadrature on ``[0, 50 xi**(-1/beta)]``; beyond that the
    large-time asymptote ``(1 + lam v**-alpha) t**-beta / ((lam+1) xi Gamma(1-beta))``
    is integrated analytically.
    """
    cfg = cfg or DEFAULT_CONFIG
    probes = [(float(u), float(s)) for u, s in probe_points]
    for u, s in probes:
        if not (0.0 <= u < 1.0 and s > 0.0):
            raise ValueError(f"probe ({u}, {s}) outside u in [0,1), s > 0")
    us = np.array(sorted({u for u, _ in probes}))
    t_max = 50.0 * p.xi ** (-1.0 / p.beta)
    tn, tw = _time_panels(t_max)
    g = ml_laplacian_genfun(p, N)
    powers = us[:, None] ** np.arange(N + 1)[None, :]
    G = np.empty((len(tn), len(us)))
    for i, t in enumerate(tn):
        G[i] = powers @ stml_pmf(p, float(t), N, cfg=cfg, generator=g).probs
    worst = 0.0
    for u, s in probes:
        j = int(np.searchsorted(us, u))
        num = float(np.dot(tw, np.exp(-s * tn) * G[:, j]))
        if p.beta < 1.0:
            c = (1.0 + p.lam * (1.0 - u) ** (-p.alpha)) / ((p.lam + 1.0) * p.xi * math.gamma(1.0 - p.beta))
            # int_T^inf e^{-st} t^{-beta} dt = s^{beta-1} Gamma(1-beta, sT)
            num += c * s ** (p.beta - 1.0) * sc.gammaincc(1.0 - p.beta, s * t_max) * math.gamma(1.0 - p.beta)
        ref = montroll_weiss_closed_form(p, u, s)
        worst = max(worst, abs(num - ref) / abs(ref))
    return worst


# ---------------------------------------------------------------------------
# Cox series


def poisson_counting(xi: float) -> Callable[[np.ndarray, float], np.ndarray]:
    """Counting law of a Poisson process of rate ``xi``."""

    def phi(n: np.ndarray, t: float) -> np.ndarray:
        return poisson_pmf(xi, t, int(np.max(n))).probs[np.asarray(n)]

    return phi


def frac_poisson_counting(beta: float, xi: float, cfg: EvalConfig | None = None):
    """Counting law of the fractional Poisson process."""

    def phi(n: np.ndarray, t: float) -> np.ndarray:
        n = np.asarray(n)
        if t == 0:
            return (n == 0).astype(float)
        return frac_poisson_weights(beta, xi * t**beta, int(n.max()), cfg)[n]

    return phi


def window_counting() -> Callable[[np.ndarray, float], np.ndarray]:
    """Deterministic unit-rate clock: ``Phi_n(t) = 1`` for ``n <= t < n+1``."""

    def phi(n: np.ndarray, t: float) -> np.ndarray:
        n = np.asarray(n)
        return ((n <= t) & (t < n + 1)).astype(float)

    return phi


def cox_series_pmf(
    W: CirculantKernel, counting_pmf: Callable[[np.ndarray, float], np.ndarray], t: float,
    N: int | None = None, params: ProcessParams | None = None, process_tag: str = "stml",
    cfg: EvalConfig | None = None,
) -> StatePMF:
    """``p = sum_n Phi_n(t) W^{*n}``: the walk with jump law ``W`` observed after
    ``n`` renewals of the counting process.

    ``W_0 = 0`` makes ``W^{*n}`` vanish below index ``n``, so at most ``N+1``
    terms contribute; the sum also stops once the remaining counting mass is
    below the tolerance.  ``tail_bound`` is the mass not represented on
    ``0..N``.
    """
    cfg = cfg or DEFAULT_CONFIG
    if not W.stochastic:
        raise ValueError("W must be a stochastic kernel")
    if W.coeffs[0] != 0:
        raise ValueError("W must have W_0 = 0 (strictly increasing walk)")
    N = W.N if N is None else N
    if N != W.N:
        raise ValueError("N must equal the truncation order of W")
    params = params or ProcessParams()
    phi = np.asarray(counting_pmf(np.arange(N + 1), t), dtype=float)
    out = np.zeros(N + 1)
    power = series.delta(N)
    remaining = 1.0
    for n in range(N + 1):
        out += phi[n] * power.coeffs
        remaining -= phi[n]
        if remaining < cfg.abs_tol and n > 0:
            break
        power = series.convolve(power, W)
    tail = max(1.0 - math.fsum(out), 0.0)
    return StatePMF(t, np.minimum(out, 1.0), tail, params, process_tag)


# ---------------------------------------------------------------------------
# residual checks of the Cauchy problems


def caputo_l1(values: np.ndarray, dt: float, beta: float) -> np.ndarray:
    """L1 product-integration Caputo derivative on a uniform grid.

    ``values[k]`` samples ``f(k dt)`` (leading axis is time).  Returns the
    derivative at ``t_1 .. t_K`` (length ``K``)::

        D f(t_n) ~ dt**-beta / Gamma(2-beta) sum_{j<n} b_j (f_{n-j} - f_{n-j-1}),
        b_j = (j+1)**(1-beta) - j**(1-beta).

    ``beta = 1`` is the backward difference.
    """
    f = np.asarray(values, dtype=float)
    K = f.shape[0] - 1
    df = np.diff(f, axis=0)
    j = np.arange(K, dtype=float)
    b = (j + 1.0) ** (1.0 - beta) - j ** (1.0 - beta)
    b[0] = 1.0  # 0**0 would cancel the newest increment at beta = 1
    out = np.empty_like(df)
    for n in range(1, K + 1):
        # newest increments get the largest weights
        out[n - 1] = np.tensordot(b[:n], df[n - 1 :: -1][:n], axes=(0, 0))
    return out * dt ** (-beta) / math.gamma(2.0 - beta)


def _generator_action(p: ProcessParams, g: CirculantKernel, probs: np.ndarray) -> np.ndarray:
    # [(lam+1) p . g]_n for the upper-triangular circulant
    return (p.lam + 1.0) * np.convolve(probs, g.coeffs)[: len(probs)]


def kolmogorov_feller_residual(p: ProcessParams, t: float, N: int = 64, dt: float = 1e-4) -> float:
    """``max_n |dp_n/dt + xi (lam+1) (g*p)_n|`` for the Markovian case ``beta = 1``.

    The time derivative is a central difference with step ``dt``.
    """
    if p.beta != 1.0:
        raise ValueError("the Kolmogorov-Feller residual applies to beta = 1; use caputo_residual")
    g = ml_laplacian_genfun(p, N)
    plus = stml_pmf(p, t + dt, N, generator=g).probs
    minus = stml_pmf(p, t - dt, N, generator=g).probs
    mid = stml_pmf(p, t, N, generator=g).probs
    deriv = (plus - minus) / (2 * dt)
    return float(np.abs(deriv + p.xi * _generator_action(p, g, mid)).max())


def caputo_residual(p: ProcessParams, t: float, steps: int, N: int = 32, n_max: int = 5) -> float:
    """L1 Caputo residual of the stml Cauchy problem at time ``t``.

    ``p_n`` is sampled on ``steps + 1`` uniform nodes in ``[0, t]``; returns
    ``max_{n <= n_max} |D^beta p_n(t) + xi (lam+1) (g*p(t))_n|``.
    """
    g = ml_laplacian_genfun(p, N)
    grid = np.linspace(0.0, t, steps + 1)
    P = np.array([stml_pmf(p, float(s), N, generator=g).probs for s in grid])
    d = caputo_l1(P, t / steps, p.beta)[-1]
    rhs = -p.xi * _generator_action(p, g, P[-1])
    return float(np.abs(d - rhs)[: n_max + 1].max())
