"""Monte Carlo simulation of the walks as continuous-time random walks.

A path waits an IID time, jumps forward by an IID positive integer, and
repeats; its state at the horizon is recorded.  Random numbers come from
counter-based Philox streams keyed by ``(seed, block)``, where a block is a
fixed range of consecutive path indices.  Blocks are independent, so they can
be simulated in any order or on any number of workers and merged by adding
counts.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import series
from .laplacian import ProcessParams, generalized_ml_laplacian, ml_laplacian_genfun, transition_from_laplacian

__all__ = [
    "JUMP_KINDS",
    "WAIT_KINDS",
    "SimConfig",
    "EmpiricalPMF",
    "JumpTable",
    "InvalidTableError",
    "jump_table",
    "sample_waiting_time",
    "sample_waiting_times",
    "sample_jump",
    "sample_jumps",
    "block_rng",
    "simulate",
    "trace_path",
]

JUMP_KINDS = ("unit", "sibuya", "discrete_ml", "generalized_ml")
WAIT_KINDS = ("exponential", "mittag_leffler")

TABLE_SIZE = 10_000
N_MAX = 1000
BLOCK = 8192


class InvalidTableError(ValueError):
    """Jump table with a non-monotone CDF or inconsistent mass."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation controls.  Identical configurations give identical output."""

    seed: int
    n_paths: int
    t_horizon: float
    params: ProcessParams
    jump_kind: str = "unit"
    wait_kind: str = "exponential"
    n_max: int = N_MAX

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < 2**64 or int(self.seed) != self.seed:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not (self.t_horizon >= 0 and math.isfinite(self.t_horizon)):
            raise ValueError("t_horizon must be finite and nonnegative")
        if self.jump_kind not in JUMP_KINDS:
            raise ValueError(f"jump_kind must be one of {JUMP_KINDS}")
        if self.wait_kind not in WAIT_KINDS:
            raise ValueError(f"wait_kind must be one of {WAIT_KINDS}")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")


@dataclass(frozen=True, eq=False)
class EmpiricalPMF:
    """Histogram of final states ``0..n_max`` plus an overflow bin for larger states."""

    counts: np.ndarray
    overflow: int
    n_paths: int

    def __post_init__(self) -> None:
        c = np.asarray(self.counts, dtype=np.int64).copy()
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        if int(c.sum()) + self.overflow != self.n_paths:
            raise ValueError("counts and overflow must add up to n_paths")

    @property
    def n_max(self) -> int:
        return len(self.counts) - 1

    @property
    def freq(self) -> np.ndarray:
        return self.counts / self.n_paths

    @property
    def stderr(self) -> np.ndarray:
        f = self.freq
        return np.sqrt(f * (1.0 - f) / self.n_paths)

    def merge(self, other: "EmpiricalPMF") -> "EmpiricalPMF":
        if len(self.counts) != len(other.counts):
            raise ValueError("histograms have different n_max")
        return EmpiricalPMF(self.counts + other.counts, self.overflow + other.overflow, self.n_paths + other.n_paths)

    def tv_distance(self, probs, n_cut: int | None = None) -> float:
        """Total variation distance to ``probs``, with states above ``n_cut`` lumped.

        ``probs[n]`` is the analytic probability of state ``n``; mass not
        listed is attributed to the lumped remainder.
        """
        p = np.asarray(probs, dtype=float)
        n_cut = min(self.n_max, len(p) - 1) if n_cut is None else n_cut
        if n_cut > min(self.n_max, len(p) - 1):
            raise ValueError("n_cut exceeds the histogram or the analytic pmf")
        f = self.freq[: n_cut + 1]
        q = p[: n_cut + 1]
        rest_f = 1.0 - f.sum()
        rest_q = max(1.0 - q.sum(), 0.0)
        return 0.5 * (float(np.abs(f - q).sum()) + abs(rest_f - rest_q))

    def to_csv(self, path=None, analytic=None) -> str:
        """CSV with columns ``n,count,freq,stderr`` (and ``analytic`` if given).

        The overflow bin is the last row, with ``n`` written as ``>n_max``.
        """
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["n", "count", "freq", "stderr"] + (["analytic"] if analytic is not None else [])
        w.writerow(head)
        f, se = self.freq, self.stderr
        for n in range(len(self.counts)):
            row = [n, int(self.counts[n]), f"{f[n]:.17g}", f"{se[n]:.17g}"]
            if analytic is not None:
                row.append(f"{analytic[n]:.17g}" if n < len(analytic) else "")
            w.writerow(row)
        fo = self.overflow / self.n_paths
        row = [f">{self.n_max}", self.overflow, f"{fo:.17g}", f"{math.sqrt(fo * (1 - fo) / self.n_paths):.17g}"]
        if analytic is not None:
            row.append(f"{max(1.0 - float(np.sum(analytic[: self.n_max + 1])), 0.0):.17g}")
        w.writerow(row)
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------------------
# waiting times


def _open_uniform(rng: np.random.Generator, size) -> np.ndarray:
    # uniforms in (0, 1); exact zeros are redrawn
    u = rng.random(size)
    bad = u == 0.0
    while np.any(bad):
        u[bad] = rng.random(int(bad.sum()))
        bad = u == 0.0
    return u


def sample_waiting_times(wait_kind: str, p: ProcessParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """IID waiting times.

    ``exponential``: ``-ln(U)/xi``.  ``mittag_leffler`` uses the
    two-uniform representation

    .. math:: T = -\\xi^{-1/\\beta}\\ln U\\,
              \\Big[\\frac{\\sin\\beta\\pi}{\\tan\\beta\\pi V}-\\cos\\beta\\pi\\Big]^{1/\\beta},

    whose survival function is :math:`E_\\beta(-\\xi t^\\beta)`; ``beta = 1``
    takes the exponential branch with the same uniforms.
    """
    if wait_kind not in WAIT_KINDS:
        raise ValueError(f"wait_kind must be one of {WAIT_KINDS}")
    u = _open_uniform(rng, size)
    if wait_kind == "exponential" or p.beta == 1.0:
        if wait_kind == "mittag_leffler":
            # consume V as well so both branches use the same stream layout
            _open_uniform(rng, size)
        return -np.log(u) / p.xi
    v = _open_uniform(rng, size)
    b = p.beta
    bp = b * math.pi
    factor = math.sin(bp) / np.tan(bp * v) - math.cos(bp)
    return -(p.xi ** (-1.0 / b)) * np.log(u) * factor ** (1.0 / b)


def sample_waiting_time(wait_kind: str, p: ProcessParams, rng: np.random.Generator) -> float:
    """One waiting time; see :func:`sample_waiting_times`."""
    return float(sample_waiting_times(wait_kind, p, rng, 1)[0])


# ---------------------------------------------------------------------------
# jumps


@dataclass(frozen=True, eq=False)
class JumpTable:
    """Inverse-CDF table for jumps ``1..K`` and a power-law tail beyond ``K``.

    ``cdf[k-1] = P(Z <= k)`` for ``k <= K``; ``tail_mass = P(Z > K)`` is
    sampled from ``k**(-tail_exponent-1)``.
    """

    cdf: np.ndarray
    tail_mass: float
    tail_exponent: float
    kind: str = "table"
    pmf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.cdf, dtype=float)
        if np.any(np.diff(c) < 0) or c[0] < 0:
            raise InvalidTableError("CDF is not monotone")
        if abs(c[-1] + self.tail_mass - 1.0) > 1e-9:
            raise InvalidTableError(f"table mass {c[-1] + self.tail_mass!r} differs from 1")
        if self.tail_mass > 0 and not self.tail_exponent > 0:
            raise InvalidTableError("a positive tail mass needs a positive tail exponent")
        c.setflags(write=False)
        object.__setattr__(self, "cdf", c)

    @property
    def K(self) -> int:
        return len(self.cdf)

    @classmethod
    def from_kernel(cls, W: series.CirculantKernel, tail_exponent: float, kind: str = "table") -> "JumpTable":
        if not W.stochastic or W.coeffs[0] != 0:
            raise InvalidTableError("jump kernel must be stochastic with W_0 = 0")
        pmf = np.asarray(W.coeffs[1:], dtype=float)
        cdf = np.cumsum(pmf)
        tail = max(1.0 - cdf[-1], 0.0)
        if tail_exponent >= 1.0 or tail < 1e-15:
            # light tail: fold the negligible rest into the last entries
            cdf = cdf / cdf[-1]
            tail = 0.0
        return cls(cdf, tail, tail_exponent, kind, pmf)


@functools.lru_cache(maxsize=32)
def jump_table(jump_kind: str, p: ProcessParams, K: int = TABLE_SIZE) -> JumpTable:
    """Jump table for a kind; Sibuya comes from the closed-form pmf, the
    discrete Mittag-Leffler kinds from their generators."""
    if jump_kind == "unit":
        return JumpTable(np.ones(1), 0.0, 0.0, "unit", np.ones(1))
    if jump_kind == "sibuya":
        if p.alpha == 1.0:
            return JumpTable(np.ones(1), 0.0, 0.0, "sibuya", np.ones(1))
        g = series.frac_power_one_minus_u(p.alpha, K)
    elif jump_kind == "discrete_ml":
        g = ml_laplacian_genfun(p, K)
    elif jump_kind == "generalized_ml":
        g = generalized_ml_laplacian(p, K)
    else:
        raise ValueError(f"jump_kind must be one of {JUMP_KINDS}")
    exponent = p.alpha * (p.mu if jump_kind == "generalized_ml" else 1.0)
    return JumpTable.from_kernel(transition_from_laplacian(g), exponent, jump_kind)


def _pareto_tail(table: JumpTable, rng: np.random.Generator, size: int) -> np.ndarray:
    # continuous Pareto on [K+1/2, inf) rounded to the nearest integer, then a
    # rejection step turns cell masses into k**(-a-1); the convexity of
    # x**(-a-1) keeps the ratio below 1
    a = table.tail_exponent
    lo = table.K + 0.5
    out = np.empty(size, dtype=np.int64)
    todo = np.arange(size)
    while len(todo):
        u = _open_uniform(rng, len(todo))
        x = lo * u ** (-1.0 / a)
        k = np.floor(x + 0.5)
        cell = ((k - 0.5) ** (-a) - (k + 0.5) ** (-a)) / a
        ratio = np.where(np.isfinite(k), k ** (-a - 1.0) / cell, 0.0)
        ok = _open_uniform(rng, len(todo)) < ratio
        # states beyond int64 are clipped; they land in the overflow bin anyway
        out[todo[ok]] = np.minimum(k[ok], 2.0**62).astype(np.int64)
        todo = todo[~ok]
    return out


def sample_jumps(table: JumpTable, rng: np.random.Generator, size: int) -> np.ndarray:
    """IID jumps ``Z >= 1`` from a table."""
    if table.K == 1 and table.tail_mass == 0:
        return np.ones(size, dtype=np.int64)
    u = rng.random(size)
    head = u < table.cdf[-1]
    z = np.empty(size, dtype=np.int64)
    z[head] = np.searchsorted(table.cdf, u[head], side="right") + 1
    # guard against u landing exactly on the last CDF value
    np.minimum(z, table.K, out=z, where=head)
    n_tail = int((~head).sum())
    if n_tail:
        z[~head] = _pareto_tail(table, rng, n_tail)
    return z


def sample_jump(jump_kind: str, p: ProcessParams, table: JumpTable | None, rng: np.random.Generator) -> int:
    """One jump; the table defaults to :func:`jump_table` for the kind."""
    table = table if table is not None else jump_table(jump_kind, p)
    return int(sample_jumps(table, rng, 1)[0])


# ---------------------------------------------------------------------------
# simulation


def block_rng(seed: int, block: int) -> np.random.Generator:
    """Philox stream for one block of paths, derived from ``(seed, block)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(block),))))


def _simulate_block(cfg: SimConfig, table: JumpTable, block: int, size: int) -> np.ndarray:
    rng = block_rng(cfg.seed, block)
    state = np.zeros(size, dtype=np.int64)
    clock = np.zeros(size)
    active = np.arange(size)
    cap = cfg.n_max + 1
    while len(active):
        clock[active] += sample_waiting_times(cfg.wait_kind, cfg.params, rng, len(active))
        active = active[clock[active] <= cfg.t_horizon]
        if not len(active):
            break
        state[active] += sample_jumps(table, rng, len(active))
        # paths past the histogram cannot come back; stop tracking them
        active = active[state[active] < cap]
    return np.minimum(state, cap)


def simulate(cfg: SimConfig, blocks: range | None = None) -> EmpiricalPMF:
    """Final-state histogram of ``cfg.n_paths`` independent paths.

    ``blocks`` restricts the run to a subset of path blocks (of ``BLOCK``
    paths each); histograms of disjoint subsets merge into the full result.
    """
    table = jump_table(cfg.jump_kind, cfg.params)
    n_blocks = -(-cfg.n_paths // BLOCK)
    blocks = range(n_blocks) if blocks is None else blocks
    counts = np.zeros(cfg.n_max + 2, dtype=np.int64)
    n_done = 0
    for b in blocks:
        if not 0 <= b < n_blocks:
            raise ValueError(f"block {b} outside 0..{n_blocks - 1}")
        size = min(BLOCK, cfg.n_paths - b * BLOCK)
        final = _simulate_block(cfg, table, b, size)
        counts += np.bincount(final, minlength=cfg.n_max + 2)
        n_done += size
    return EmpiricalPMF(counts[:-1], int(counts[-1]), n_done)


def trace_path(cfg: SimConfig, path: int, max_arrivals: int = 10_000) -> tuple[np.ndarray, np.ndarray]:
    """Arrival times and states of one path (diagnostic, own stream).

    Returns ``(times, states)`` with ``states[j] = Y_j`` the position after
    the ``j``-th arrival before the horizon and ``states[0] = 0``.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(cfg.seed), spawn_key=(2**32 + path,))))
    table = jump_table(cfg.jump_kind, cfg.params)
    times, states = [0.0], [0]
    t = 0.0
    for _ in range(max_arrivals):
        t += sample_waiting_time(cfg.wait_kind, cfg.params, rng)
        if t > cfg.t_horizon:
            break
        times.append(t)
        states.append(states[-1] + int(sample_jumps(table, rng, 1)[0]))
    return np.array(times), np.array(states, dtype=np.int64)
