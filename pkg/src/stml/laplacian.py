"""Good Laplacian generators on the integer line and on finite digraphs.

A good Laplacian has zero row sums (i), a positive diagonal (ii) and
non-positive off-diagonal entries (iii).  On the integer line the generators
of strictly increasing walks are upper-triangular circulants represented by
:class:`~stml.series.CirculantKernel`; on a finite digraph they are Bernstein
functions ``g(L)`` of the normalized digraph Laplacian.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, linalg
from scipy import special as sc

from . import series
from .series import CirculantKernel
from .specfun import mittag_leffler

__all__ = [
    "ProcessParams",
    "LevyMeasure",
    "sibuya_measure",
    "ml_measure",
    "LaplacianReport",
    "ml_laplacian_genfun",
    "generalized_ml_laplacian",
    "check_good_laplacian",
    "laplacian_from_levy",
    "transition_from_laplacian",
    "QuadratureError",
    "InvalidGeneratorError",
    "DigraphLaplacian",
    "load_edge_list",
    "digraph_bernstein_function",
    "check_ergodic",
]

LEVY_TOL = 1e-10


class QuadratureError(ArithmeticError):
    """Quadrature failed to reach its tolerance; ``achieved`` holds the estimate."""

    def __init__(self, msg: str, achieved: float):
        super().__init__(msg)
        self.achieved = achieved


class InvalidGeneratorError(ValueError):
    """A kernel or matrix violates the good-Laplacian properties."""


@dataclass(frozen=True)
class ProcessParams:
    """Parameters of a process instance.

    Attributes
    ----------
    alpha : float
        Space order in (0, 1].
    beta : float
        Time order in (0, 1].
    mu : float
        Outer fractional power of the generalized generator, in (0, 1].
    lam : float
        Discrete Mittag-Leffler scale, > 0.
    xi : float
        Rate, units sec**-beta.
    lambda0 : float
        Continuum scale, units cm**-alpha.
    """

    alpha: float = 1.0
    beta: float = 1.0
    mu: float = 1.0
    lam: float = 1.0
    xi: float = 1.0
    lambda0: float = 1.0

    def __post_init__(self) -> None:
        for name in ("alpha", "beta", "mu"):
            v = getattr(self, name)
            if not (0.0 < v <= 1.0) or not math.isfinite(v):
                raise ValueError(f"{name} must lie in (0, 1], got {v!r}")
        for name in ("lam", "xi", "lambda0"):
            v = getattr(self, name)
            if not (v > 0.0) or not math.isfinite(v):
                raise ValueError(f"{name} must be positive and finite, got {v!r}")


# ---------------------------------------------------------------------------
# Levy measures


@dataclass(frozen=True)
class LevyMeasure:
    """Levy density ``nu(tau)`` on (0, inf).

    ``rho`` is the integrability exponent: ``nu(tau) ~ tau**(-1-rho)`` near 0,
    with ``rho < 1``.  ``density`` must accept numpy arrays.
    """

    density: Callable[[np.ndarray], np.ndarray]
    rho: float
    name: str = "levy"

    def __post_init__(self) -> None:
        if not self.rho < 1.0:
            raise ValueError(f"integrability exponent must be < 1, got {self.rho}")

    def __call__(self, tau):
        return self.density(np.asarray(tau, dtype=float))

    def regular(self, tau: np.ndarray) -> np.ndarray:
        """``tau**(1+rho) nu(tau)``, bounded near 0."""
        tau = np.asarray(tau, dtype=float)
        return tau ** (1.0 + self.rho) * self.density(tau)

    def check_integrability(self) -> tuple[float, float]:
        """Return ``(int_0^1 tau nu, int_1^inf nu)``; both must be finite."""
        # tau = s**k with k = 1/(1-rho) turns tau nu(tau) dtau into k regular(s**k) ds
        k = 1.0 / (1.0 - self.rho)
        lo = integrate.quad(lambda s: k * float(self.regular(s**k)), 0.0, 1.0, limit=200)[0]
        hi = integrate.quad(lambda t: float(self.density(np.asarray(t))), 1.0, np.inf, limit=200)[0]
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise QuadratureError("Levy measure is not integrable against min(1, tau)", math.inf)
        return float(lo), hi


def sibuya_measure(alpha: float) -> LevyMeasure:
    """``alpha / Gamma(1-alpha) tau**(-1-alpha)``, generating ``s**alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("Sibuya measure needs alpha in (0, 1)")
    c = alpha / math.gamma(1.0 - alpha)
    return LevyMeasure(lambda tau: c * tau ** (-1.0 - alpha), alpha, f"sibuya({alpha})")


def ml_measure(alpha: float, lam: float) -> LevyMeasure:
    """``lam tau**(alpha-1) E_{alpha,alpha}(-lam tau**alpha)``, generating ``s**alpha/(lam+s**alpha)``."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")

    def dens(tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        return lam * tau ** (alpha - 1.0) * mittag_leffler(alpha, alpha, -lam * tau**alpha)

    return LevyMeasure(dens, -alpha, f"ml({alpha},{lam})")


def _levy_integral(h: Callable[[float], np.ndarray], nu: LevyMeasure, size: int, tol: float = LEVY_TOL):
    """``int_0^inf h(tau) nu(tau) dtau`` for array-valued ``h``.

    The interval is split at 1.  On [0, 1] the substitution
    ``tau = sigma**k`` with ``k = 1/(1-rho)`` absorbs ``tau**(-1-rho)``
    (``h`` is assumed to vanish like ``tau`` at the origin); on [1, inf)
    ``tau = e**y`` turns power-law decay into exponential decay.
    """
    k = 1.0 / (1.0 - nu.rho)

    def lower(s):
        tau = s**k
        return np.asarray(h(tau)) * (k * s ** (-k)) * float(nu.regular(tau))

    def upper(y):
        tau = math.exp(y)
        return np.asarray(h(tau)) * float(nu(tau)) * tau

    kw = dict(epsabs=tol * 1e-3, epsrel=tol, norm="max", limit=2000)
    r1, e1 = integrate.quad_vec(lower, 0.0, 1.0, **kw)
    # the integrand decays at least like exp(-(1 + rho') y); 700 is beyond any double range
    r2, e2 = integrate.quad_vec(upper, 0.0, 700.0, points=(5.0, 20.0), **kw)
    r = np.asarray(r1 + r2, dtype=float).reshape(size)
    err = float(e1 + e2)
    scale = max(float(np.max(np.abs(r))), 1.0)
    if not np.all(np.isfinite(r)) or err > 100 * tol * scale:
        raise QuadratureError(f"Levy quadrature reached only {err:.3g}", err)
    return r, err


# ---------------------------------------------------------------------------
# line generators


def ml_laplacian_genfun(p: ProcessParams, N: int = series.DEFAULT_ORDER) -> CirculantKernel:
    """Coefficients of :math:`g(1-u) = (1-u)^\\alpha/(\\lambda + (1-u)^\\alpha)`.

    Built by power-series division, so ``lambda = 1`` needs no special case.
    """
    c = series.frac_power_one_minus_u(p.alpha, N)
    return series.convolve(c, series.reciprocal(series.scalar_add(c, p.lam)))


def generalized_ml_laplacian(p: ProcessParams, N: int = series.DEFAULT_ORDER) -> CirculantKernel:
    """Coefficients of :math:`(1-u)^{\\alpha\\mu}(\\lambda + (1-u)^\\alpha)^{-\\mu}`.

    The power of ``lambda + (1-u)**alpha`` is taken as ``exp(-mu log(.))``
    in the series algebra; it has a positive constant term for every
    ``lambda > 0``.
    """
    if p.mu == 1.0:
        return ml_laplacian_genfun(p, N)
    c = series.frac_power_one_minus_u(p.alpha, N)
    num = series.frac_power_one_minus_u(p.alpha * p.mu, N)
    return series.convolve(num, series.power(series.scalar_add(c, p.lam), -p.mu))


@dataclass(frozen=True)
class LaplacianReport:
    """Outcome of the good-Laplacian checks.

    ``row_sum_residual`` is the tail-corrected row sum (the generating
    function at ``u = 1``), ``min_diagonal`` the smallest diagonal entry and
    ``max_offdiagonal`` the largest off-diagonal entry.
    """

    row_sum_residual: float
    min_diagonal: float
    max_offdiagonal: float
    zero_row_sums: bool
    positive_diagonal: bool
    nonpositive_offdiagonal: bool

    @property
    def passed(self) -> bool:
        return self.zero_row_sums and self.positive_diagonal and self.nonpositive_offdiagonal

    def __bool__(self) -> bool:
        return self.passed


def check_good_laplacian(
    k: CirculantKernel | np.ndarray, row_tol: float = 1e-9, sign_tol: float = 1e-14
) -> LaplacianReport:
    """Check properties (i)-(iii) for a line kernel or a square matrix.

    Off-diagonal entries are accepted up to ``sign_tol`` times the diagonal,
    which absorbs roundoff of transform-based convolutions.
    """
    if isinstance(k, CirculantKernel):
        c = k.coeffs
        resid = abs(math.fsum(c) + k.tail)
        diag = float(c[0])
        off = float(c[1:].max()) if len(c) > 1 else -math.inf
    else:
        m = np.asarray(k, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("matrix must be square")
        resid = float(np.abs(m.sum(axis=1)).max())
        d = np.diag(m)
        diag = float(d.min())
        offm = m - np.diag(d)
        np.fill_diagonal(offm, -np.inf)
        off = float(offm.max()) if m.shape[0] > 1 else -math.inf
    return LaplacianReport(
        row_sum_residual=resid,
        min_diagonal=diag,
        max_offdiagonal=off,
        zero_row_sums=resid < row_tol,
        positive_diagonal=diag > 0,
        nonpositive_offdiagonal=off <= sign_tol * abs(diag),
    )


def laplacian_from_levy(nu: LevyMeasure, N: int = 64, tol: float = LEVY_TOL) -> CirculantKernel:
    """Line generator from a Levy measure.

    Entry ``n`` is ``int [delta_{n0} - e**-tau tau**n/n!] nu(dtau)``: the
    generalized degree ``g(1)`` for ``n = 0`` and minus the Poisson-mixed
    jump weights otherwise.
    """
    n = np.arange(1, N + 1, dtype=float)
    lg = sc.gammaln(n + 1.0)

    def h(tau: float) -> np.ndarray:
        out = np.empty(N + 1)
        out[0] = -math.expm1(-tau)
        with np.errstate(divide="ignore", under="ignore"):
            out[1:] = -np.exp(-tau + n * math.log(tau) - lg)
        return out

    vals, _ = _levy_integral(h, nu, N + 1, tol)
    return CirculantKernel(vals)


def transition_from_laplacian(g: CirculantKernel) -> CirculantKernel:
    """Jump distribution ``W_n = -g_n / g_0`` of a good Laplacian.

    The result is stochastic, with ``W_0 = 0`` and deficit ``tail``.

    Raises
    ------
    InvalidGeneratorError
        If ``g`` fails :func:`check_good_laplacian`.
    """
    rep = check_good_laplacian(g)
    if not rep.passed:
        raise InvalidGeneratorError(f"not a good Laplacian: {rep}")
    g0 = float(g.coeffs[0])
    w = np.maximum(-g.coeffs / g0, 0.0)
    w[0] = 0.0
    tail = max(-g.tail / g0, 0.0)
    # clip the tiny excess that roundoff can leave above unit mass
    total = w.sum()
    if total > 1.0:
        w /= total
    exp = g.expansion.scale(-1.0 / g0).shift(1.0) if g.expansion is not None else None
    return CirculantKernel(w, tail, g.tail_error / g0, True, exp)


# ---------------------------------------------------------------------------
# finite digraphs


@dataclass(frozen=True, eq=False)
class DigraphLaplacian:
    """Normalized Laplacian ``L = I - D**-1 Omega`` of a weighted digraph.

    ``weights[i, j]`` is the weight of the edge ``i -> j``.  Every node needs
    at least one outgoing edge.
    """

    weights: np.ndarray
    out_degrees: np.ndarray = field(init=False)
    entries: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] == 0:
            raise ValueError("weights must be a nonempty square matrix")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed")
        k = w.sum(axis=1)
        if np.any(k <= 0):
            raise ValueError(f"nodes without outgoing edges: {np.nonzero(k <= 0)[0].tolist()}")
        L = np.eye(len(w)) - w / k[:, None]
        for a in (w, k, L):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "out_degrees", k)
        object.__setattr__(self, "entries", L)

    @property
    def n_nodes(self) -> int:
        return self.weights.shape[0]

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic ``I - L``."""
        return np.eye(self.n_nodes) - self.entries

    def heat_kernel(self, tau: float = 1.0) -> np.ndarray:
        """``exp(-tau L)``.

        Large ``tau`` is reduced to ``tau / 2**k <= 32`` and the
        row-stochastic result squared ``k`` times.  Rows are renormalized
        after each squaring, otherwise roundoff in the unit eigenvalue grows
        like ``(1 + eps)**(2**k)``.
        """
        k = max(0, math.ceil(math.log2(tau / 32.0))) if tau > 32.0 else 0
        out = linalg.expm(-(tau / 2.0**k) * self.entries)
        for _ in range(k):
            out = np.maximum(out @ out, 0.0)
            out /= out.sum(axis=1, keepdims=True)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("non-finite matrix exponential")
        return out

    @classmethod
    def cycle(cls, n: int) -> "DigraphLaplacian":
        w = np.zeros((n, n))
        w[np.arange(n), (np.arange(n) + 1) % n] = 1.0
        return cls(w)


def load_edge_list(source, n_nodes: int | None = None) -> DigraphLaplacian:
    """Read ``i j weight`` lines (0-indexed) from a path, file or string.

    Blank lines and ``#`` comments are skipped.  Repeated edges add up.
    """
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    edges = []
    for lineno, line in enumerate(io.StringIO(text), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j weight', got {line!r}")
        i, j, wgt = int(parts[0]), int(parts[1]), float(parts[2])
        if i < 0 or j < 0:
            raise ValueError(f"line {lineno}: negative node index")
        if i == j:
            raise ValueError(f"line {lineno}: self-loop at node {i}")
        if not (wgt >= 0) or not math.isfinite(wgt):
            raise ValueError(f"line {lineno}: weight must be nonnegative, got {wgt}")
        edges.append((i, j, wgt))
    if not edges:
        raise ValueError("edge list is empty")
    n = max(max(i, j) for i, j, _ in edges) + 1
    if n_nodes is not None:
        if n_nodes < n:
            raise ValueError(f"edge list references node {n - 1} but n_nodes = {n_nodes}")
        n = n_nodes
    w = np.zeros((n, n))
    for i, j, wgt in edges:
        w[i, j] += wgt
    return DigraphLaplacian(w)


def digraph_bernstein_function(L: DigraphLaplacian, nu: LevyMeasure, tol: float = LEVY_TOL) -> np.ndarray:
    """``g(L) = int (I - exp(-tau L)) nu(dtau)`` by quadrature over heat kernels."""
    n = L.n_nodes
    eye = np.eye(n)
    A = L.entries
    norm = float(np.abs(A).sum(axis=1).max())

    def h(tau: float) -> np.ndarray:
        if tau * norm > 0.5:
            return (eye - L.heat_kernel(tau)).ravel()
        # Taylor series of I - exp(-tau L) avoids cancellation for small tau
        term = tau * A
        acc = term.copy()
        for j in range(2, 40):
            term = -(tau / j) * (term @ A)
            acc += term
            if np.abs(term).max() <= 1e-17 * np.abs(acc).max():
                break
        return acc.ravel()

    vals, _ = _levy_integral(h, nu, n * n, tol)
    return vals.reshape(n, n)


def check_ergodic(L: DigraphLaplacian, n_max: int | None = None) -> bool:
    """True iff some power ``n <= n_max`` of ``Lambda I - L`` is strictly positive.

    ``Lambda = 1 + max_i sum_j |L_ij|`` makes the matrix nonnegative; only its
    sparsity pattern matters, so powers are taken on the boolean pattern.
    Any primitive pattern becomes positive by ``(n-1)**2 + 1`` (Wielandt),
    which is the default ``n_max``.
    """
    A = L.entries
    n = L.n_nodes
    lam = 1.0 + np.abs(A).sum(axis=1).max()
    B = lam * np.eye(n) - A
    if np.any(B < 0):
        raise AssertionError("Lambda I - L must be nonnegative")
    if n_max is None:
        n_max = (n - 1) ** 2 + 1
    pat = (B > 0).astype(np.int64)
    P = pat.copy()
    for _ in range(n_max):
        if np.all(P > 0):
            return True
        P = ((P @ pat) > 0).astype(np.int64)
    return False
