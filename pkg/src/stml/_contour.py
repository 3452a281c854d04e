"""Numerical inversion of Laplace transforms on a hyperbolic contour.

The trapezoidal rule on the hyperbola

.. math:: s(u) = \\mu\\,(1 + \\sin(iu - a))

converges geometrically for transforms that are analytic off the negative
real axis (Weideman and Trefethen, Math. Comp. 76, 2007).  Every quantity
evaluated here is real on the real axis, so the result is the real part of
the symmetric sum.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

__all__ = ["invert", "invert_with_error"]

# optimal hyperbola parameters for a fixed time
_A = 1.1721
_H = 1.0818
_MU = 4.4921

# ladder of node counts for the a-posteriori error estimate
K_LADDER = (10, 12, 14, 16, 18)
K_VALUE = 14

def _nodes(t: float, k: int) -> tuple[np.ndarray, np.ndarray]:
    h = _H / k
    mu = _MU * k / t
    u = h * np.arange(-k, k + 1)
    s = mu * (1.0 + np.sin(1j * u - _A))
    ds = 1j * mu * np.cos(1j * u - _A) * h / (2j * np.pi)
    return s, ds


def invert(F: Callable[[np.ndarray], np.ndarray], t: float, k: int = K_VALUE):
    """Inverse Laplace transform of ``F`` at time ``t > 0``.

    ``F`` maps complex nodes of shape ``(n,)`` to values of shape ``(n,)``
    or ``(n, m)``; in the latter case a vector of ``m`` results is returned.

    Returns
    -------
    value, roundoff
        The inversion and an estimate of its accumulated roundoff.  The
        exponential ``exp(s t)`` alone loses ``|s t|`` ulps.
    """
    s, ds = _nodes(t, k)
    w = np.exp(s * t) * ds
    vals = F(s)
    amp = np.abs(w) * (4.0 + np.abs(s * t))
    if vals.ndim == 2:
        w = w[:, None]
        amp = amp[:, None]
    value = (w * vals).sum(axis=0).real
    roundoff = (amp * np.abs(vals)).sum(axis=0) * np.finfo(float).eps
    return value, roundoff


def invert_with_error(F: Callable[[np.ndarray], np.ndarray], t: float):
    """Inversion with an a-posteriori error estimate.

    The quadrature error falls by about two orders of magnitude per two
    extra nodes until roundoff takes over.  The pair of neighbouring node
    counts with the smallest change is selected, the finer value is
    returned, and the error is taken as a tenth of that change plus the
    roundoff estimate.
    """
    runs = [invert(F, t, k) for k in K_LADDER]
    vals = np.array([r[0] for r in runs])
    rounds = np.array([r[1] for r in runs])
    diffs = np.abs(np.diff(vals, axis=0))
    best = np.argmin(diffs, axis=0)
    idx = np.arange(vals.shape[1]) if vals.ndim == 2 else None
    if idx is None:
        j = int(best)
        return float(vals[j + 1]), float(0.1 * diffs[j] + rounds[j + 1])
    value = vals[best + 1, idx]
    err = 0.1 * diffs[best, idx] + rounds[best + 1, idx]
    return value, err
