"""Truncated power-series algebra of upper-triangular circulant operators.

An upper-triangular circulant matrix on the integer line is determined by its
first row ``M_{0,k}``, equivalently by the generating function
``sum_k M_{0,k} u**k``.  Matrix products become coefficient convolutions and
matrix functions become compositions of power series.  Kernels are stored
truncated at order ``N``; the mass that truncation removes is estimated from
the behaviour of the generating function at ``u = 1`` and carried along as
``tail``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy import signal
from scipy import special as sc

from ._expansion import SingularExpansion
from .specfun import DEFAULT_CONFIG, ConvergenceError, EvalConfig, frac_poisson_weights

__all__ = [
    "CirculantKernel",
    "TaylorSeries",
    "ExpSeries",
    "IdentitySeries",
    "MittagLefflerSeries",
    "delta",
    "shift",
    "convolve",
    "frac_power_one_minus_u",
    "reciprocal",
    "log_series",
    "exp_series",
    "power",
    "compose_scalar",
    "DEFAULT_ORDER",
]

DEFAULT_ORDER = 512

# direct convolution below this length, FFT above
_DIRECT_MAX = 256

# largest accepted error of an asymptotic tail estimate
TAIL_TOL = 1e-11
EPS = float(np.finfo(float).eps)


@dataclass(frozen=True, eq=False)
class CirculantKernel:
    """First row of an upper-triangular circulant operator.

    Attributes
    ----------
    coeffs : ndarray
        ``coeffs[k]`` is the coefficient of ``u**k`` (matrix entry
        ``M_{0,k}``), ``k = 0..N``.
    tail : float
        Estimate of ``sum_{k>N}`` of the untruncated coefficients.
    tail_error : float
        Uncertainty of ``tail``.
    stochastic : bool
        Coefficients are a (sub-)probability vector whose deficit is ``tail``.
    expansion : SingularExpansion or None
        Behaviour of the generating function near ``u = 1``, used to derive
        tails of kernels built from this one.
    """

    coeffs: np.ndarray
    tail: float = 0.0
    tail_error: float = 0.0
    stochastic: bool = False
    expansion: SingularExpansion | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or len(c) == 0:
            raise ValueError("coeffs must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        if self.stochastic:
            if np.any(c < 0):
                raise ValueError("stochastic kernel has negative coefficients")
            if c.sum() > 1.0 + 1e-12:
                raise ValueError(f"stochastic kernel has mass {c.sum()!r} > 1")

    @property
    def truncation_order(self) -> int:
        return len(self.coeffs) - 1

    N = truncation_order

    def __len__(self) -> int:
        return len(self.coeffs)

    def __getitem__(self, k):
        return self.coeffs[k]

    def total(self) -> float:
        """Tail-corrected sum of coefficients, the generating function at ``u = 1``."""
        return math.fsum(self.coeffs) + self.tail

    def evaluate(self, u: float) -> float:
        """Truncated generating function at ``|u| < 1``."""
        return float(np.polynomial.polynomial.polyval(u, self.coeffs))

    def with_tail_from_expansion(self) -> "CirculantKernel":
        return _attach_tail(self.coeffs, self.expansion, self.stochastic)


def _thin_tail(c: np.ndarray) -> tuple[float, float]:
    # geometric extrapolation from the last two coefficients
    if len(c) < 2 or c[-1] == 0.0:
        return 0.0, 0.0
    rho = c[-1] / c[-2] if c[-2] != 0.0 else math.inf
    if 0.0 <= rho < 1.0:
        t = c[-1] * rho / (1.0 - rho)
        return t, abs(t)
    return 0.0, math.inf


def _attach_tail(coeffs: np.ndarray, exp: SingularExpansion | None, stochastic: bool = False) -> CirculantKernel:
    N = len(coeffs) - 1
    if exp is None:
        tail, err = 0.0, 0.0
    else:
        if exp.singular:
            tail, err = exp.tail(N)
        else:
            tail, err = _thin_tail(np.asarray(coeffs))
        if not err <= TAIL_TOL:
            # the 1/N asymptotics have not set in at this order; fall back on
            # the exact value of the generating function at u = 1
            c = np.asarray(coeffs)
            tail = exp.value_at_one() - math.fsum(c)
            err = 4 * N * EPS * float(np.abs(c).sum())
    if stochastic:
        tail = max(tail, 0.0)
    return CirculantKernel(coeffs, tail, err, stochastic, exp)


def delta(N: int = DEFAULT_ORDER) -> CirculantKernel:
    """Identity kernel ``(1, 0, 0, ...)``."""
    c = np.zeros(N + 1)
    c[0] = 1.0
    return CirculantKernel(c, 0.0, 0.0, False, SingularExpansion.constant(1.0))


def shift(N: int = DEFAULT_ORDER, k: int = 1) -> CirculantKernel:
    """Kernel ``u**k``: a deterministic forward step of length ``k``."""
    c = np.zeros(N + 1)
    if k <= N:
        c[k] = 1.0
    # u^k = (1 - v)^k is a polynomial in v
    binom = [math.comb(k, j) * (-1.0) ** j for j in range(k + 1)]
    exp = SingularExpansion.make(np.arange(k + 1), binom)
    return CirculantKernel(c, 0.0 if k <= N else 1.0, 0.0, True, exp)


def _convolve(a: np.ndarray, b: np.ndarray, n: int, nonneg: bool) -> np.ndarray:
    if n <= _DIRECT_MAX:
        return np.convolve(a, b)[:n]
    out = signal.fftconvolve(a, b)[:n]
    if nonneg:
        # both inputs are nonnegative; drop FFT roundoff of the wrong sign
        np.maximum(out, 0.0, out=out)
    return out


def convolve(a: CirculantKernel, b: CirculantKernel) -> CirculantKernel:
    """Kernel of the matrix product, the truncated Cauchy product."""
    if len(a) != len(b):
        raise ValueError(f"truncation orders differ: {a.N} and {b.N}")
    nonneg = bool(np.all(a.coeffs >= 0) and np.all(b.coeffs >= 0))
    c = _convolve(a.coeffs, b.coeffs, len(a), nonneg)
    exp = a.expansion * b.expansion if a.expansion is not None and b.expansion is not None else None
    return _attach_tail(c, exp, a.stochastic and b.stochastic)


def frac_power_one_minus_u(alpha: float, N: int = DEFAULT_ORDER) -> CirculantKernel:
    """Kernel of :math:`(1-u)^\\alpha`, the fractional Laplacian of order alpha.

    Coefficients ``(-1)**k * binom(alpha, k)`` by the stable recurrence
    ``c_k = c_{k-1} (k - 1 - alpha) / k``.  The tail is exact:
    ``sum_{k>N} c_k = -(1-alpha)_N / N!``.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    k = np.arange(1, N + 1, dtype=float)
    c = np.empty(N + 1)
    c[0] = 1.0
    c[1:] = np.cumprod((k - 1.0 - alpha) / k)
    if alpha == 1.0:
        c[2:] = 0.0
    return _attach_tail(c, SingularExpansion.monomial(alpha, 1.0))


def scalar_add(a: CirculantKernel, lam: float) -> CirculantKernel:
    """Kernel of ``lam + a(u)``."""
    c = a.coeffs.copy()
    c[0] += lam
    exp = a.expansion.shift(lam) if a.expansion is not None else None
    return CirculantKernel(c, a.tail, a.tail_error, False, exp)


def scale(a: CirculantKernel, s: float) -> CirculantKernel:
    """Kernel of ``s * a(u)``."""
    exp = a.expansion.scale(s) if a.expansion is not None else None
    return CirculantKernel(s * a.coeffs, s * a.tail, abs(s) * a.tail_error, False, exp)


def reciprocal(a: CirculantKernel) -> CirculantKernel:
    """Kernel of ``1/a(u)`` by power-series division.

    Raises
    ------
    ZeroDivisionError
        If ``|a_0| < 1e-300``.
    """
    c = a.coeffs
    if abs(c[0]) < 1e-300:
        raise ZeroDivisionError("reciprocal of a kernel with vanishing constant term")
    n = len(c)
    b = np.zeros(n)
    b[0] = 1.0 / c[0]
    rev = c[1:][::-1]
    for k in range(1, n):
        # b_k = -(1/c_0) sum_{j=1..k} c_j b_{k-j}
        b[k] = -np.dot(rev[n - 1 - k :], b[:k]) * b[0]
    exp = None
    if a.expansion is not None and a.expansion.value_at_one() != 0.0:
        exp = a.expansion.reciprocal()
    return _attach_tail(b, exp)


def log_series(a: CirculantKernel) -> CirculantKernel:
    """Kernel of ``log a(u)`` for ``a_0 > 0`` (recurrence from ``b' = a'/a``)."""
    c = a.coeffs
    if not c[0] > 0:
        raise ValueError("log requires a positive constant term")
    n = len(c)
    b = np.zeros(n)
    b[0] = math.log(c[0])
    j = np.arange(n, dtype=float)
    jb = np.zeros(n)
    for k in range(1, n):
        s = np.dot(jb[1:k], c[k - 1 : 0 : -1]) if k > 1 else 0.0
        b[k] = (k * c[k] - s) / (k * c[0])
        jb[k] = j[k] * b[k]
    return CirculantKernel(b)


def exp_series(b: CirculantKernel) -> CirculantKernel:
    """Kernel of ``exp b(u)`` (recurrence from ``e' = b' e``)."""
    c = b.coeffs
    n = len(c)
    e = np.zeros(n)
    e[0] = math.exp(c[0])
    jb = np.arange(n, dtype=float) * c
    for k in range(1, n):
        e[k] = np.dot(jb[1 : k + 1], e[k - 1 :: -1][:k]) / k
    return CirculantKernel(e)


def power(a: CirculantKernel, mu: float) -> CirculantKernel:
    """Kernel of ``a(u)**mu`` for ``a_0 > 0``, computed as ``exp(mu log a)``."""
    c = exp_series(scale(log_series(a), mu)).coeffs
    exp = None
    if a.expansion is not None and len(a.expansion.exps) and a.expansion.coefs[0] > 0:
        exp = a.expansion.power(mu)
    return _attach_tail(c, exp)


# ---------------------------------------------------------------------------
# composition with scalar functions


class TaylorSeries(Protocol):
    """Taylor data of a scalar function ``f``.

    ``coefficients(z0, r, m)`` returns ``f^{(k)}(z0) r**k / k!`` for
    ``k = 0..m``; the scale ``r`` keeps the values representable.
    """

    def coefficients(self, z0: float, r: float, m: int) -> np.ndarray: ...


@dataclass(frozen=True)
class ExpSeries:
    """Taylor data of :math:`e^z`."""

    def coefficients(self, z0: float, r: float, m: int) -> np.ndarray:
        k = np.arange(m + 1, dtype=float)
        with np.errstate(divide="ignore"):
            logr = math.log(r) if r > 0 else -np.inf
        out = np.exp(z0 + k * logr - sc.gammaln(k + 1.0))
        out[0] = math.exp(z0)
        return out


@dataclass(frozen=True)
class IdentitySeries:
    """Taylor data of :math:`f(z) = z`."""

    def coefficients(self, z0: float, r: float, m: int) -> np.ndarray:
        out = np.zeros(m + 1)
        out[0] = z0
        if m >= 1:
            out[1] = r
        return out


@dataclass(frozen=True)
class MittagLefflerSeries:
    """Taylor data of :math:`E_\\beta(z)` about ``z0 <= 0``.

    With ``y = -z0`` the scaled coefficients are the fractional Poisson
    probabilities, ``f^{(k)}(-y) y**k / k! = Phi_k(y)``, which are nonnegative
    and evaluated without cancellation.
    """

    beta: float
    cfg: EvalConfig = DEFAULT_CONFIG

    def coefficients(self, z0: float, r: float, m: int) -> np.ndarray:
        if z0 > 0:
            raise ValueError("Mittag-Leffler Taylor data implemented for z0 <= 0")
        k = np.arange(m + 1, dtype=float)
        if z0 == 0.0:
            with np.errstate(divide="ignore"):
                logr = math.log(r) if r > 0 else -np.inf
            out = np.exp(k * logr - sc.gammaln(self.beta * k + 1.0))
            out[0] = 1.0
            return out
        y = -z0
        phi = frac_poisson_weights(self.beta, y, m, self.cfg)
        ratio = r / y
        with np.errstate(divide="ignore", under="ignore"):
            return phi * np.exp(k * math.log(ratio)) if ratio > 0 else np.where(k == 0, phi, 0.0)


def compose_scalar(
    f: TaylorSeries, a: CirculantKernel, cfg: EvalConfig | None = None
) -> CirculantKernel:
    """Kernel of ``f(a(u))`` by a Horner-type Taylor sum about ``a_0``.

    With ``w = a - a_0 delta`` (zero constant term, so ``w^{*m}`` vanishes
    below index ``m``) the result is ``sum_m f^{(m)}(a_0)/m! w^{*m}``.  The
    sum is cut once the remaining Taylor mass bound, ``sum |f_m| ||w||_1^m``,
    drops below the tolerance, or at ``m = N`` where it is exact.

    Raises
    ------
    ConvergenceError
        If more than ``cfg.max_terms`` terms would be required.
    """
    cfg = cfg or DEFAULT_CONFIG
    N = a.N
    a0 = float(a.coeffs[0])
    w = a.coeffs.copy()
    w[0] = 0.0
    r = float(np.abs(w).sum())
    if r == 0.0:
        c = np.zeros(N + 1)
        c[0] = f.coefficients(a0, 1.0, 0)[0]
        out_coeffs = c
    else:
        m_cap = min(N, cfg.max_terms)
        fm = f.coefficients(a0, r, m_cap)
        tail_mass = np.cumsum(np.abs(fm)[::-1])[::-1]
        below = np.nonzero(tail_mass < cfg.abs_tol)[0]
        M = int(below[0]) - 1 if len(below) else m_cap
        if M < 0:
            M = 0
        if not len(below) and m_cap < N:
            raise ConvergenceError(f"compose_scalar needs more than {cfg.max_terms} terms")
        w_hat = w / r
        nonneg = bool(np.all(w_hat >= 0) and np.all(fm[: M + 1] >= 0))
        p = np.zeros(N + 1)
        p[0] = fm[M]
        for m in range(M - 1, -1, -1):
            p = _convolve(w_hat, p, N + 1, nonneg)
            p[0] += fm[m]
        out_coeffs = p
    exp = None
    if a.expansion is not None:
        a1 = a.expansion.value_at_one()
        rest = a.expansion.shift(-a1)
        kmax = rest._nmax(rest) if len(rest.exps) else 0
        taylor = f.coefficients(a1, 1.0, max(kmax, 1))
        exp = a.expansion.compose(taylor)
    return _attach_tail(out_coeffs, exp)
