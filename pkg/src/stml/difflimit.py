"""Continuous-space limits of the strictly increasing walks.

With lattice spacing ``h`` and the discrete scale ``lam = lambda0 * h**alpha``
the walks converge to processes on the half line ``x >= 0``.  Kernels there
split into a Dirac component at ``x = 0+`` and a regular part; the Dirac
weight is carried symbolically (``DensityGrid.delta_weight``) and never
discretized.

The state density of the Mittag-Leffler walk is evaluated through its
subordination form: a sum of ``n`` Mittag-Leffler jumps is a stable
subordinator run for a Gamma(n, lambda0) time, so

.. math:: P(x,t) = \\alpha x^{\\alpha-1}\\int_0^\\infty
          q(x^\\alpha\\rho, t)\\,\\rho\\, M_\\alpha(\\rho)\\,d\\rho,
          \\qquad q(r,t) = \\sum_{n\\ge 1}\\Phi_n(\\xi t^\\beta)\\,
          \\frac{\\lambda_0^n r^{n-1}e^{-\\lambda_0 r}}{(n-1)!},

with ``M_alpha`` the M-Wright function and ``Phi_n`` the fractional Poisson
weights.  Every factor is positive, so the result keeps relative accuracy
where the alternating double series cancels.  The double series is kept as
a cross-check (:func:`state_density_series`).
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import integrate
from scipy import special as sc

from . import series
from .laplacian import ProcessParams, ml_laplacian_genfun, transition_from_laplacian
from .processes import caputo_l1
from .specfun import (
    DEFAULT_CONFIG,
    EPS,
    ConvergenceError,
    EvalConfig,
    _zeta_max,
    frac_poisson_sf,
    frac_poisson_weights,
    mittag_leffler,
    mwright,
    prabhakar,
)

__all__ = [
    "DensityGrid",
    "ml_density",
    "ml_cdf",
    "ml_density_grid",
    "ContinuumReport",
    "discrete_to_continuum_check",
    "prabhakar_kernel",
    "laplacian_density",
    "transition_density_generalized",
    "transition_cdf_generalized",
    "state_density",
    "state_density_series",
    "state_density_grid",
    "ResidualReport",
    "RefinementReport",
    "forward_equation_residual",
    "residual_refinement",
    "poisson_limit_density",
    "riemann_liouville_frac_derivative",
    "discrete_delta",
    "discrete_delta_laplace",
    "sign_changes",
]


# ---------------------------------------------------------------------------
# grids


def _edge_trapezoid(values: np.ndarray, h: float, e: float) -> float:
    """``int_0^{Kh} f`` for ``f(x) = x**(e-1) g(x**e)`` with smooth ``g``.

    In ``u = x**e`` the integral is ``int g(u) du / e``.  Simpson's rule on
    the mapped (uneven) nodes covers ``[u_1, u_K]``; the first cell uses the
    cubic through the next four nodes.  ``e = 1`` applies the same rule
    to ``values`` directly.
    """
    K = len(values) - 1
    if K < 4:
        raise ValueError("need at least five grid nodes")
    x = h * np.arange(K + 1, dtype=float)
    u = x**e
    g = np.asarray(values, dtype=float).copy()
    g[1:] *= x[1:] ** (1.0 - e)
    if e == 1.0:
        return float(integrate.simpson(g, x=u))
    c = np.polyfit(u[1:5], g[1:5], 3)
    first = np.polyval(np.polyint(c), u[1]) - np.polyval(np.polyint(c), 0.0)
    return float(first + integrate.simpson(g[1:], x=u[1:])) / e


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Kernel sampled at ``x_k = k h``, ``k = 0..K``, plus a Dirac component.

    Attributes
    ----------
    h : float
        Grid spacing (cm).
    values : ndarray
        Regular part ``f(x_k)``.  A regular part that is singular at the
        origin stores ``0`` at ``k = 0`` and declares the singularity through
        ``edge_exponent``.
    delta_weight : float
        Mass of the Dirac component.
    delta_at : float
        Its position; ``0.0`` means ``x = 0+``.
    edge_exponent : float
        ``e`` with ``f(x) = x**(e-1) g(x**e)`` for a smooth ``g``; ``1`` for
        bounded ``f``.  Used by the mass quadrature.
    tail_mass : float
        Analytic mass of the regular part beyond ``x_K``.
    """

    h: float
    values: np.ndarray
    delta_weight: float = 0.0
    delta_at: float = 0.0
    edge_exponent: float = 1.0
    tail_mass: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ValueError(f"h must be positive, got {self.h}")
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or len(v) < 2:
            raise ValueError("values must be a 1-d array with at least two nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if not 0.0 < self.edge_exponent <= 1.0:
            raise ValueError(f"edge_exponent must lie in (0, 1], got {self.edge_exponent}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def K(self) -> int:
        return len(self.values) - 1

    @property
    def x(self) -> np.ndarray:
        return self.h * np.arange(self.K + 1, dtype=float)

    def regular_mass(self) -> float:
        """Quadrature of the regular part over ``[0, x_K]``."""
        return _edge_trapezoid(self.values, self.h, self.edge_exponent)

    def total_mass(self) -> float:
        return self.delta_weight + self.regular_mass() + self.tail_mass

    def mass_report(self) -> dict:
        return {
            "delta_weight": self.delta_weight,
            "regular_mass": self.regular_mass(),
            "tail_mass": self.tail_mass,
            "total_mass": self.total_mass(),
        }

    def to_csv(self, path) -> Path:
        """Write ``x,value`` rows after a ``#`` header carrying ``h`` and the Dirac data."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            fh.write(f"# h={self.h!r} delta_weight={self.delta_weight!r} delta_at={self.delta_at!r}\n")
            w = csv.writer(fh)
            w.writerow(["x", "value"])
            for xk, vk in zip(self.x, self.values):
                w.writerow([f"{xk:.17g}", f"{vk:.17g}"])
        return path

    @classmethod
    def from_csv(cls, path) -> "DensityGrid":
        path = Path(path)
        with path.open() as fh:
            header = fh.readline().lstrip("#").split()
            meta = {k: float(v) for k, v in (item.split("=") for item in header)}
            rows = list(csv.reader(fh))[1:]
        values = np.array([float(r[1]) for r in rows])
        return cls(meta["h"], values, meta.get("delta_weight", 0.0), meta.get("delta_at", 0.0))


# ---------------------------------------------------------------------------
# Mittag-Leffler and Prabhakar kernels


def _check_x(x) -> np.ndarray:
    xx = np.asarray(x, dtype=float)
    if np.any(xx <= 0) or not np.all(np.isfinite(xx)):
        raise ValueError("x must be positive and finite")
    return xx


def _shape(x, out: np.ndarray):
    return float(out) if np.ndim(x) == 0 else out


def ml_density(alpha: float, lambda0: float, x):
    """Mittag-Leffler jump density :math:`\\lambda_0 x^{\\alpha-1}E_{\\alpha,\\alpha}(-\\lambda_0 x^\\alpha)`.

    Weakly singular like ``x**(alpha-1)`` at the origin, hence integrable;
    ``alpha = 1`` is the exponential density.
    """
    xx = _check_x(x)
    if alpha == 1.0:
        return _shape(x, lambda0 * np.exp(-lambda0 * xx))
    out = lambda0 * xx ** (alpha - 1.0) * mittag_leffler(alpha, alpha, -lambda0 * xx**alpha)
    return _shape(x, np.asarray(out))


def ml_cdf(alpha: float, lambda0: float, x):
    """Distribution function :math:`1 - E_\\alpha(-\\lambda_0 x^\\alpha)` of :func:`ml_density`."""
    xx = np.asarray(x, dtype=float)
    if np.any(xx < 0):
        raise ValueError("x must be nonnegative")
    out = 1.0 - np.asarray(mittag_leffler(alpha, 1.0, -lambda0 * xx**alpha))
    return _shape(x, out)


def ml_density_grid(alpha: float, lambda0: float, h: float, K: int) -> DensityGrid:
    """:func:`ml_density` on ``x_k = k h`` with its analytic tail mass."""
    x = h * np.arange(1, K + 1, dtype=float)
    vals = np.concatenate([[0.0 if alpha < 1.0 else lambda0], ml_density(alpha, lambda0, x)])
    tail = 1.0 - ml_cdf(alpha, lambda0, K * h)
    return DensityGrid(h, vals, 0.0, 0.0, alpha, tail, {"kernel": "ml", "alpha": alpha, "lambda0": lambda0})


def prabhakar_kernel(alpha: float, gamma: float, lambda0: float, x, cfg: EvalConfig | None = None):
    """Regular part of the Prabhakar kernel :math:`e^{\\gamma}_{\\alpha,0}(-\\lambda_0, x)`.

    .. math:: \\sum_{s\\ge 1}\\frac{(\\gamma)_s(-\\lambda_0)^s x^{\\alpha s-1}}{s!\\,\\Gamma(\\alpha s)}
              = -\\alpha\\gamma\\lambda_0 x^{\\alpha-1}
                E^{\\gamma+1}_{\\alpha,\\alpha+1}(-\\lambda_0 x^\\alpha),

    the ``x > 0`` part of :math:`D_x[\\Theta(x)E^\\gamma_{\\alpha,1}(-\\lambda_0x^\\alpha)]`.
    The kernel also carries a Dirac component of unit weight at the origin.
    """
    xx = _check_x(x)
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if gamma == 0.0:
        return _shape(x, np.zeros_like(xx))
    if gamma == 1.0:
        return _shape(x, -np.asarray(ml_density(alpha, lambda0, xx)))
    z = -lambda0 * xx**alpha
    out = -alpha * gamma * lambda0 * xx ** (alpha - 1.0) * np.asarray(prabhakar(alpha, alpha + 1.0, gamma + 1.0, z, cfg))
    return _shape(x, out)


def laplacian_density(alpha: float, lambda0: float, x):
    """Regular part of the continuum Laplacian density ``delta(x) - W(x)``."""
    return prabhakar_kernel(alpha, 1.0, lambda0, x)


def transition_density_generalized(alpha: float, mu: float, lambda0: float, x):
    """Jump density of the generalized walk, ``-prabhakar_kernel(alpha, mu, ...)``.

    .. math:: W^{(\\mu)}(x) = \\lambda_0 x^{\\alpha-1}\\sum_{s\\ge 0}
              \\frac{(\\mu)_{s+1}}{(s+1)!}\\frac{(-\\lambda_0x^\\alpha)^s}{\\Gamma(\\alpha s+\\alpha)}

    ``mu = 1`` is :func:`ml_density`.
    """
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    if mu == 1.0:
        return ml_density(alpha, lambda0, x)
    return _shape(x, -np.asarray(prabhakar_kernel(alpha, mu, lambda0, x)))


def transition_cdf_generalized(alpha: float, mu: float, lambda0: float, x):
    """Distribution function :math:`1 - E^\\mu_{\\alpha,1}(-\\lambda_0 x^\\alpha)`."""
    if mu == 1.0:
        return ml_cdf(alpha, lambda0, x)
    xx = np.asarray(x, dtype=float)
    out = 1.0 - np.asarray(prabhakar(alpha, 1.0, mu, -lambda0 * xx**alpha))
    return _shape(x, out)


# ---------------------------------------------------------------------------
# discrete to continuum


@dataclass(frozen=True)
class ContinuumReport:
    """Errors of the scaled lattice kernel against the continuum density."""

    h: np.ndarray
    errors: np.ndarray
    x_points: np.ndarray
    slack: float = 1.1

    @property
    def decreasing(self) -> bool:
        e = self.errors
        return bool(np.all(e[1:] <= self.slack * e[:-1]))

    def __bool__(self) -> bool:
        return self.decreasing


def discrete_to_continuum_check(
    p: ProcessParams, x_points: Sequence[float], h_sequence: Sequence[float], slack: float = 1.1
) -> ContinuumReport:
    """Compare ``W_{x/h}(lam = lambda0 h**alpha) / h`` with :func:`ml_density`.

    The lattice kernel is built by the generator machinery
    (:func:`stml.laplacian.ml_laplacian_genfun` and
    :func:`stml.laplacian.transition_from_laplacian`).  Reports the maximum
    relative error over ``x_points`` for each ``h``.
    """
    xs = _check_x(np.atleast_1d(np.asarray(x_points, dtype=float)))
    hs = np.asarray(h_sequence, dtype=float)
    if np.any(np.diff(hs) >= 0):
        raise ValueError("h_sequence must be strictly decreasing")
    exact = np.asarray(ml_density(p.alpha, p.lambda0, xs))
    errs = []
    for h in hs:
        idx = xs / h
        n = np.rint(idx).astype(int)
        if np.any(np.abs(idx - n) > 1e-9 * np.maximum(1.0, idx)):
            raise ValueError(f"x_points are not on the grid h = {h}")
        q = ProcessParams(alpha=p.alpha, beta=p.beta, lam=p.lambda0 * h**p.alpha, xi=p.xi, lambda0=p.lambda0)
        W = transition_from_laplacian(ml_laplacian_genfun(q, int(n.max())))
        approx = W.coeffs[n] / h
        errs.append(float(np.max(np.abs(approx - exact) / np.abs(exact))))
    return ContinuumReport(hs, np.array(errs), xs, slack)


# ---------------------------------------------------------------------------
# state density


_RHO_PANELS = 48
_RHO_NODES = 16
_CHUNK = 1 << 18


@lru_cache(maxsize=32)
def _rho_rule(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    # Gauss-Legendre panels on [0, z_max] where M_alpha has decayed to e^-50
    zmax = _zeta_max(alpha)
    edges = np.linspace(0.0, zmax, _RHO_PANELS + 1)
    t, w = np.polynomial.legendre.leggauss(_RHO_NODES)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (b - a) * t + 0.5 * (a + b)).ravel()
    weights = (0.5 * (b - a) * w).ravel()
    return nodes, weights * nodes * mwright(alpha, nodes)


def _compound_exponential(y, lam0: float, r: np.ndarray) -> np.ndarray:
    """Density at ``r > 0`` of an Exp(lam0) sum with Poisson(y) many terms."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        z = 2.0 * np.sqrt(y * lam0 * r)
        core = np.sqrt(y * lam0 / r) * sc.ive(1, z) * np.exp(z - y - lam0 * r)
    return np.where(r > 0, core, y * lam0 * np.exp(-y))


def _n_max(p: ProcessParams, y: float, r_max: float) -> int:
    # cover the Gamma orders active for r <= r_max and the Poisson weights' tail
    lr = p.lambda0 * r_max
    n = int(lr + 12.0 * math.sqrt(lr + 1.0) + 40)
    while frac_poisson_sf(p.beta, y, n) > 1e-18 and n < 1_000_000:
        n *= 2
    return n


def _mixture_density(p: ProcessParams, y: float, r: np.ndarray) -> np.ndarray:
    """``q(r) = sum_n Phi_n(y) Gamma(r; n, lambda0)``.

    ``beta = 1`` is a compound Poisson density with a Bessel closed form.
    Otherwise the sum runs over the fractional Poisson weights with the
    Gamma densities generated by their ratio recurrence.
    """
    lam0 = p.lambda0
    if p.beta == 1.0:
        return _compound_exponential(y, lam0, r)
    n_max = _n_max(p, y, float(r.max()))
    phi = frac_poisson_weights(p.beta, y, n_max)
    out = np.zeros(len(r))
    small = lam0 * r < 600.0
    rs = r[small]
    g = lam0 * np.exp(-lam0 * rs)
    acc = np.zeros(len(rs))
    for n in range(1, n_max + 1):
        acc += phi[n] * g
        g *= lam0 * rs / n
    out[small] = acc
    if np.any(~small):
        # far out the first Gamma densities underflow; use logarithms
        rb = r[~small]
        n = np.arange(1, n_max + 1, dtype=float)
        for i, ri in enumerate(rb):
            logg = n * math.log(lam0) + (n - 1.0) * math.log(ri) - lam0 * ri - sc.gammaln(n)
            out[np.flatnonzero(~small)[i]] = float(phi[1:] @ np.exp(logg))
    return out


def state_density(p: ProcessParams, x, t: float):
    """Regular part of the state density of the continuum walk.

    The full density is ``E_beta(-xi t**beta) delta(x)`` plus this regular
    part.  Only ``mu = 1`` has the positive subordination form; other ``mu``
    go through :func:`state_density_series`.
    """
    xx = _check_x(x)
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t == 0.0:
        return _shape(x, np.zeros_like(xx))
    if p.mu != 1.0:
        return state_density_series(p, x, t)
    y = p.xi * t**p.beta
    flat = np.atleast_1d(xx).ravel()
    if p.alpha == 1.0:
        out = _mixture_density(p, y, flat)
    else:
        rho, w = _rho_rule(p.alpha)
        xa = flat**p.alpha
        r = np.outer(xa, rho)
        q = _mixture_density(p, y, r.ravel()).reshape(r.shape)
        out = p.alpha * flat ** (p.alpha - 1.0) * (q @ w)
    return _shape(x, out.reshape(np.shape(xx)))


def state_density_series(p: ProcessParams, x, t: float, rel_tol: float = 1e-8, max_terms: int = 400):
    """The defining double series of the state density, regular part.

    .. math:: \\sum_{m\\ge 1}\\frac{(-\\xi t^\\beta)^m}{\\Gamma(\\beta m+1)}
              e^{m\\mu}_{\\alpha,0}(-\\lambda_0, x)

    Raises
    ------
    ConvergenceError
        When cancellation costs more accuracy than ``rel_tol`` allows, which
        happens once ``xi t**beta`` is large.
    """
    xx = _check_x(x)
    flat = np.atleast_1d(xx).ravel()
    y = p.xi * t**p.beta
    out = np.empty(len(flat))
    for i, xi_ in enumerate(flat):
        acc, mag, peak = 0.0, 0.0, 0.0
        for m in range(1, max_terms + 1):
            c = math.exp(m * math.log(y) - sc.gammaln(p.beta * m + 1.0)) if y > 0 else 0.0
            # each kernel only needs the accuracy its coefficient makes visible
            front = c * p.alpha * m * p.mu * p.lambda0 * xi_ ** (p.alpha - 1.0)
            tol = max(DEFAULT_CONFIG.abs_tol, 1e-3 * EPS * peak / front) if peak > 0 and front > 0 else None
            cfg = EvalConfig(abs_tol=tol) if tol is not None and math.isfinite(tol) else None
            term = (-1.0) ** m * c * float(prabhakar_kernel(p.alpha, m * p.mu, p.lambda0, xi_, cfg))
            acc += term
            mag += abs(term)
            peak = max(peak, abs(term))
            # far below double precision; later kernels may not converge to full accuracy
            if m > y and abs(term) < 1e-4 * EPS * peak:
                break
        else:
            raise ConvergenceError(f"state density series did not settle within {max_terms} terms", math.inf)
        err = 64.0 * EPS * mag
        if err > rel_tol * abs(acc):
            raise ConvergenceError(
                f"state density series lost accuracy to cancellation at x={xi_}, xi t^beta={y}", err
            )
        out[i] = acc
    return _shape(x, out.reshape(np.shape(xx)))


def _gamma_mixture_sf(p: ProcessParams, y: float, r: np.ndarray) -> np.ndarray:
    """``sum_{n>=1} Phi_n(y) Q(n, lambda0 r)``, the mass of ``q`` beyond ``r``."""
    n_max = _n_max(p, y, float(r.max()))
    phi = frac_poisson_weights(p.beta, y, n_max)
    n = np.arange(1, n_max + 1, dtype=float)
    return phi[1:] @ sc.gammaincc(n[:, None], p.lambda0 * r[None, :])


def _tail_mass(p: ProcessParams, t: float, X: float) -> float:
    """Mass of the state density beyond ``X``.

    In the subordination form the tail is
    ``int M_alpha(rho) sum_n Phi_n Q(n, lambda0 X**alpha rho) d rho`` with
    ``Q`` the regularized upper incomplete gamma function; all terms are
    positive.  Other ``mu`` use :func:`_tail_mass_series`.
    """
    if p.mu != 1.0:
        return _tail_mass_series(p, t, X)
    y = p.xi * t**p.beta
    if p.alpha == 1.0:
        return float(_gamma_mixture_sf(p, y, np.array([X]))[0])
    rho, w = _rho_rule(p.alpha)
    return float(_gamma_mixture_sf(p, y, X**p.alpha * rho) @ (w / rho))


def _tail_mass_series(p: ProcessParams, t: float, X: float, max_terms: int = 400) -> float:
    """Mass beyond ``X`` from the double series.

    Each kernel ``e^gamma_{alpha,0}`` has total mass 0 with a unit Dirac part,
    so its regular part carries ``-E^gamma_{alpha,1}(-lambda0 X**alpha)``
    beyond ``X``.  The alternating sum over ``m`` cancels like the density
    series and raises :class:`ConvergenceError` under the same conditions.
    """
    y = p.xi * t**p.beta
    z = -p.lambda0 * X**p.alpha
    acc, mag, peak = 0.0, 0.0, 0.0
    for m in range(1, max_terms + 1):
        c = math.exp(m * math.log(y) - sc.gammaln(p.beta * m + 1.0))
        tol = max(DEFAULT_CONFIG.abs_tol, 1e-3 * EPS * peak / c) if peak > 0 else DEFAULT_CONFIG.abs_tol
        term = -((-1.0) ** m) * c * float(prabhakar(p.alpha, 1.0, m * p.mu, z, EvalConfig(abs_tol=tol)))
        acc += term
        mag += abs(term)
        peak = max(peak, abs(term))
        if m > y and abs(term) < 1e-4 * EPS * peak:
            break
    else:
        raise ConvergenceError(f"tail mass series did not settle within {max_terms} terms", math.inf)
    if 64.0 * EPS * mag > 1e-8:
        raise ConvergenceError(f"tail mass series lost accuracy to cancellation, xi t^beta={y}", 64.0 * EPS * mag)
    return acc


def state_density_grid(p: ProcessParams, t: float, h: float, K: int) -> DensityGrid:
    """State density on ``x_k = k h`` with its Dirac weight and tail mass.

    The tail mass beyond ``x_K`` is integrated in the subordination form;
    its leading large-``x`` behaviour is
    ``xi t**beta x**-alpha / (lambda0 Gamma(1-alpha) Gamma(1+beta))``.
    """
    x = h * np.arange(1, K + 1, dtype=float)
    vals = np.concatenate([[0.0], np.asarray(state_density(p, x, t))])
    y = p.xi * t**p.beta
    delta = float(mittag_leffler(p.beta, 1.0, -y))
    tail = _tail_mass(p, t, K * h) if t > 0 else 0.0
    if p.alpha == 1.0 and t > 0:
        vals[0] = float(_mixture_density(p, y, np.array([0.0]))[0])
    edge = p.alpha if t > 0 else 1.0
    meta = {"kernel": "state", "t": t, "alpha": p.alpha, "beta": p.beta, "lambda0": p.lambda0, "xi": p.xi}
    return DensityGrid(h, vals, delta, 0.0, edge, tail, meta)


# ---------------------------------------------------------------------------
# forward equation residual


@dataclass(frozen=True)
class ResidualReport:
    """Residual of the continuum forward equation on a grid."""

    h: float
    dt: float
    max_residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.max_residual / self.scale if self.scale > 0 else math.inf


@dataclass(frozen=True)
class RefinementReport:
    coarse: ResidualReport
    fine: ResidualReport
    min_ratio: float = 1.2

    @property
    def ratio(self) -> float:
        return self.coarse.relative / self.fine.relative

    @property
    def passed(self) -> bool:
        return self.ratio >= self.min_ratio

    def __bool__(self) -> bool:
        return self.passed


def forward_equation_residual(
    p: ProcessParams, grid, t_grid: Sequence[float], t_min: float = 0.0
) -> ResidualReport:
    """Residual of ``D_t**beta P = -xi P + xi (W * P)`` for the state density.

    Parameters
    ----------
    p : ProcessParams
    grid : DensityGrid or tuple ``(h, K)``
        Spatial resolution; the residual is evaluated at the cell midpoints
        ``(k + 1/2) h``, ``k < K``.
    t_grid : sequence of float
        Uniform times starting at ``0``.  The ``t = 0`` row is excluded.
    t_min : float
        Only times ``t >= t_min`` enter the maximum.  For ``beta < 1`` the
        regular part grows like ``t**beta`` and the L1 scheme has an O(1)
        relative error on the first steps, so an initial layer is skipped.

    Notes
    -----
    The regular part of ``P`` is taken constant on each cell and integrated
    exactly against the jump density through its distribution function, so
    the weak singularity of ``W`` at ``tau = x`` costs no accuracy.  The
    Dirac part of ``P`` convolves to ``E_beta(-xi t**beta) W(x)`` exactly.
    The Caputo derivative uses the L1 scheme.
    """
    if isinstance(grid, DensityGrid):
        h, K = grid.h, grid.K
    else:
        h, K = float(grid[0]), int(grid[1])
    t = np.asarray(t_grid, dtype=float)
    dt = float(t[1] - t[0]) if len(t) > 1 else math.nan
    if len(t) < 2 or t[0] != 0.0 or np.any(np.abs(np.diff(t) - dt) > 1e-9 * dt):
        raise ValueError("t_grid must be uniform, start at 0 and hold at least two times")
    a, mu = p.alpha, p.mu
    xm = h * (np.arange(K) + 0.5)
    P = np.zeros((len(t), K))
    for j in range(1, len(t)):
        P[j] = state_density(p, xm, float(t[j]))
    delta = np.asarray(mittag_leffler(p.beta, 1.0, -p.xi * t**p.beta))
    # cell k seen from x_j spans offsets [(d - 1/2) h, (d + 1/2) h], d = j - k;
    # the cell holding x_j itself contributes only [0, h/2]
    C = np.concatenate([[0.0], np.asarray(transition_cdf_generalized(a, mu, p.lambda0, xm))])
    cellw = np.diff(C)
    Wx = np.asarray(transition_density_generalized(a, mu, p.lambda0, xm))
    conv = np.empty_like(P)
    for n in range(len(t)):
        conv[n] = delta[n] * Wx + np.convolve(P[n], cellw)[:K]
    rhs = -p.xi * P + p.xi * conv
    dP = caputo_l1(P, dt, p.beta)
    keep = t[1:] >= t_min
    if not np.any(keep):
        raise ValueError("no time in t_grid reaches t_min")
    R = (dP - rhs[1:])[keep]
    scale = float(np.max(np.abs(p.xi * P[1:][keep])))
    return ResidualReport(h, dt, float(np.max(np.abs(R))), scale)


def residual_refinement(
    p: ProcessParams,
    h: float,
    dt: float,
    x_max: float,
    t_max: float,
    t_min: float = 0.0,
    min_ratio: float = 1.2,
) -> RefinementReport:
    """Forward-equation residual at ``(h, dt)`` and at ``(h/2, dt/2)``.

    Warns when the residual shrinks by less than ``min_ratio``, which means
    the grid does not resolve the solution.
    """
    reports = []
    for s in (1, 2):
        K = int(round(x_max / (h / s)))
        nt = int(round(t_max / (dt / s)))
        reports.append(forward_equation_residual(p, (h / s, K), np.linspace(0.0, t_max, nt + 1), t_min))
    rep = RefinementReport(reports[0], reports[1], min_ratio)
    if not rep.passed:
        warnings.warn(
            f"grid too coarse: residual decayed by {rep.ratio:.3g} < {min_ratio} under refinement", RuntimeWarning
        )
    return rep


# ---------------------------------------------------------------------------
# Poisson limit and fractional derivatives


def poisson_limit_density(xi0: float, t: float, h: float, K: int) -> DensityGrid:
    """Dirac mass moving with velocity ``xi0``, placed at the grid point nearest ``xi0 t``."""
    if not (xi0 > 0 and t >= 0):
        raise ValueError("xi0 must be positive and t nonnegative")
    k = int(round(xi0 * t / h))
    return DensityGrid(h, np.zeros(K + 1), 1.0, k * h, 1.0, 0.0, {"kernel": "poisson_limit", "t": t})


def riemann_liouville_frac_derivative(f: DensityGrid, alpha: float) -> DensityGrid:
    """Grunwald-Letnikov approximation of the Riemann-Liouville derivative.

    ``h**-alpha sum_k c_k f(x - k h)`` with ``c_k`` the coefficients of
    ``(1-u)**alpha``, i.e. the fractional lattice Laplacian scaled by
    ``h**-alpha``.  ``values[0]`` is used as ``f(0)``.  A Dirac component at
    the origin contributes ``x**(-1-alpha) / Gamma(-alpha)`` exactly.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    c = series.frac_power_one_minus_u(alpha, f.K).coeffs
    out = np.convolve(f.values, c)[: f.K + 1] * f.h ** (-alpha)
    if f.delta_weight != 0.0 and alpha < 1.0:
        if f.delta_at != 0.0:
            raise ValueError("a Dirac component away from the origin is not supported")
        out[1:] += f.delta_weight * f.x[1:] ** (-1.0 - alpha) / math.gamma(-alpha)
    return DensityGrid(f.h, out, 0.0, 0.0, 1.0, 0.0, {"kernel": "rl_derivative", "alpha": alpha})


def discrete_delta(h: float, x):
    """Lattice Dirac function ``(Theta(x) - Theta(x - h)) / h`` with ``Theta(0) = 1``."""
    xx = np.asarray(x, dtype=float)
    out = np.where((xx >= 0) & (xx < h), 1.0 / h, 0.0)
    return _shape(x, out)


def discrete_delta_laplace(h: float, s):
    """Laplace transform ``(1 - exp(-h s)) / (h s)`` of :func:`discrete_delta`."""
    hs = np.asarray(s, dtype=float) * h
    out = np.where(hs == 0, 1.0, -np.expm1(-hs) / np.where(hs == 0, 1.0, hs))
    return _shape(s, out)


def sign_changes(values: Sequence[float], rel_floor: float = 1e-9) -> int:
    """Number of sign changes of the forward differences of ``values``.

    Differences below ``rel_floor`` times the largest one are ignored.
    """
    d = np.diff(np.asarray(values, dtype=float))
    if len(d) == 0:
        return 0
    keep = np.abs(d) > rel_floor * np.max(np.abs(d))
    s = np.sign(d[keep])
    return int(np.sum(s[1:] != s[:-1]))
