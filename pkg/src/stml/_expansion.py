"""Singular expansions of generating functions about ``u = 1``.

A generating function ``F(u)`` with a branch point at ``u = 1`` is described
near it by a generalized power series in ``v = 1 - u``

.. math:: F(u) \\approx \\sum_j \\phi_j v^{e_j}.

Each non-integer power contributes a known coefficient tail
(Darboux's method):

.. math:: \\sum_{n>N} [u^n] v^{e} = -\\frac{(1-e)_N}{N!}
          = -\\frac{\\Gamma(N+1-e)}{\\Gamma(1-e)\\,\\Gamma(N+1)},

while integer powers are polynomials in ``u`` and contribute nothing beyond
their degree.  The expansion algebra below mirrors the kernel algebra so that
every kernel can carry its own tail estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

__all__ = ["SingularExpansion", "darboux_tail"]

_DIGITS = 10
_ORDER = 6.0


def _is_int(e: np.ndarray) -> np.ndarray:
    return np.abs(e - np.round(e)) < 1e-9


def darboux_tail(e, N: int):
    """Tail sum of the coefficients of ``(1-u)**e`` beyond index ``N``."""
    e = np.asarray(e, dtype=float)
    out = np.zeros_like(e)
    frac = ~_is_int(e)
    ef = e[frac]
    sign = -sc.gammasgn(1.0 - ef)
    logv = sc.gammaln(N + 1.0 - ef) - sc.gammaln(1.0 - ef) - sc.gammaln(N + 1.0)
    out[frac] = sign * np.exp(logv)
    return out


@dataclass(frozen=True)
class SingularExpansion:
    """Generalized power series ``sum_j coefs[j] * v**exps[j]``.

    Exponents are nonnegative, sorted, unique and truncated at ``order``;
    ``truncated`` records whether any nonzero term was dropped on the way.
    """

    exps: np.ndarray
    coefs: np.ndarray
    order: float = _ORDER
    truncated: bool = False

    @classmethod
    def make(cls, exps, coefs, order: float = _ORDER, truncated: bool = False) -> "SingularExpansion":
        e = np.round(np.asarray(exps, dtype=float), _DIGITS)
        c = np.asarray(coefs, dtype=float)
        inside = e <= order + 1e-12
        truncated = truncated or bool(np.any(~inside & (c != 0.0)))
        keep = inside & (c != 0.0)
        e, c = e[keep], c[keep]
        ue, inv = np.unique(e, return_inverse=True)
        uc = np.zeros(len(ue))
        np.add.at(uc, inv, c)
        return cls(ue, uc, order, truncated)

    @classmethod
    def constant(cls, c: float, order: float = _ORDER) -> "SingularExpansion":
        return cls.make([0.0], [c], order)

    @classmethod
    def monomial(cls, e: float, c: float = 1.0, order: float = _ORDER) -> "SingularExpansion":
        return cls.make([e], [c], order)

    # -- algebra -----------------------------------------------------------

    def value_at_one(self) -> float:
        """Value of ``F`` at ``u = 1`` (the ``v**0`` coefficient)."""
        hit = self.exps == 0.0
        return float(self.coefs[hit].sum()) if np.any(hit) else 0.0

    def __add__(self, other: "SingularExpansion") -> "SingularExpansion":
        order = min(self.order, other.order)
        return SingularExpansion.make(
            np.concatenate([self.exps, other.exps]), np.concatenate([self.coefs, other.coefs]), order,
            self.truncated or other.truncated,
        )

    def scale(self, c: float) -> "SingularExpansion":
        return SingularExpansion.make(self.exps, c * self.coefs, self.order, self.truncated)

    def shift(self, c: float) -> "SingularExpansion":
        return self + SingularExpansion.constant(c, self.order)

    def __mul__(self, other: "SingularExpansion") -> "SingularExpansion":
        order = min(self.order, other.order)
        e = np.add.outer(self.exps, other.exps).ravel()
        c = np.multiply.outer(self.coefs, other.coefs).ravel()
        return SingularExpansion.make(e, c, order, self.truncated or other.truncated)

    def _powers_of_rest(self, rest: "SingularExpansion", kmax: int) -> list["SingularExpansion"]:
        out = [SingularExpansion.constant(1.0, self.order)]
        for _ in range(kmax):
            out.append(out[-1] * rest)
        return out

    def _nmax(self, rest: "SingularExpansion") -> int:
        if len(rest.exps) == 0:
            return 0
        return int(math.floor(self.order / rest.exps[0])) + 1

    def compose(self, taylor: np.ndarray) -> "SingularExpansion":
        """``sum_k taylor[k] * (F - F(1))**k`` for Taylor data at ``F(1)``."""
        rest = self.shift(-self.value_at_one())
        kmax = min(self._nmax(rest), len(taylor) - 1)
        acc = SingularExpansion.make([], [], self.order)
        for k, pk in enumerate(self._powers_of_rest(rest, kmax)):
            acc = acc + pk.scale(float(taylor[k]))
        # exact only for affine f; otherwise powers beyond the order were dropped
        cut = len(rest.exps) > 0 and bool(np.any(np.asarray(taylor[2:]) != 0))
        return SingularExpansion.make(acc.exps, acc.coefs, acc.order, acc.truncated or cut or self.truncated)

    def power(self, mu: float) -> "SingularExpansion":
        """``F**mu`` for a positive leading coefficient."""
        if len(self.exps) == 0:
            raise ValueError("power of a zero expansion")
        e0, c0 = self.exps[0], self.coefs[0]
        if c0 <= 0:
            raise ValueError("power requires a positive leading coefficient")
        rel = SingularExpansion.make(self.exps[1:] - e0, self.coefs[1:] / c0, self.order)
        kmax = self._nmax(rel)
        binom = [1.0]
        for k in range(1, kmax + 1):
            binom.append(binom[-1] * (mu - k + 1) / k)
        acc = SingularExpansion.make([], [], self.order)
        for k, pk in enumerate(self._powers_of_rest(rel, kmax)):
            acc = acc + pk.scale(binom[k])
        lead = SingularExpansion.monomial(mu * e0, c0**mu, self.order)
        # the binomial series terminates only for a single-term expansion
        out = lead * acc
        return SingularExpansion.make(out.exps, out.coefs, out.order, out.truncated or len(rel.exps) > 0)

    def reciprocal(self) -> "SingularExpansion":
        """``1/F`` for ``F(1) != 0``."""
        if self.value_at_one() == 0.0:
            raise ValueError("reciprocal requires a nonzero value at u = 1")
        sign = 1.0 if self.coefs[0] > 0 else -1.0
        return self.scale(sign).power(-1.0).scale(sign)

    # -- tails ---------------------------------------------------------------

    @property
    def singular(self) -> bool:
        return bool(np.any(~_is_int(self.exps)))

    def tail(self, N: int) -> tuple[float, float]:
        """Darboux estimate of ``sum_{n>N} [u^n] F`` and its error.

        The contributions form an asymptotic series in ``N**-e``; it is
        summed in exponent bins of unit width and truncated at the smallest
        bin, whose size is reported as the error.  An expansion that was
        never truncated is exact and only carries roundoff.
        """
        contrib = self.coefs * darboux_tail(self.exps, N)
        if len(contrib) == 0:
            return 0.0, 0.0
        if not self.truncated:
            return math.fsum(contrib), 4 * np.finfo(float).eps * float(np.abs(contrib).sum())
        bins = np.floor(self.exps).astype(int)
        sums = np.zeros(bins.max() + 1)
        np.add.at(sums, bins, contrib)
        mags = np.zeros_like(sums)
        np.add.at(mags, bins, np.abs(contrib))
        total = 0.0
        err = math.inf
        for s, m in zip(sums, mags):
            if m > err:
                break
            total += s
            err = m if m > 0 else err
        if not math.isfinite(err):
            err = 0.0
        # the truncated remainder is at most of the size of the last bin kept
        return total, err
