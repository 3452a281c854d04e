"""Invariant suites run by ``stml check``.

Each suite is a list of named checks returning ``(passed, detail)``.  The
``quick`` variants shrink orders, path counts and grids so that ``check all
--quick`` stays within a few minutes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ctrw, difflimit, laplacian, processes, series
from .laplacian import ProcessParams

__all__ = ["CheckResult", "SUITES", "run_suite", "random_strong_digraph", "format_table"]


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    detail: str
    seconds: float


CheckFn = Callable[[bool], tuple[bool, str]]


def random_strong_digraph(n: int, rng: np.random.Generator, density: float = 0.2) -> laplacian.DigraphLaplacian:
    """Random weighted digraph made strongly connected by a random Hamiltonian cycle."""
    w = np.where(rng.random((n, n)) < density, rng.uniform(0.1, 2.0, (n, n)), 0.0)
    perm = rng.permutation(n)
    w[perm, np.roll(perm, -1)] += rng.uniform(0.1, 2.0, n)
    np.fill_diagonal(w, 0.0)
    return laplacian.DigraphLaplacian(w)


# ---------------------------------------------------------------------------
# laplacian


def generator_kernels(N: int) -> dict[str, series.CirculantKernel]:
    """Every generator family on the parameter grid of the property suite."""
    out = {}
    for a in (0.3, 0.5, 0.9):
        out[f"sibuya a={a}"] = series.frac_power_one_minus_u(a, N)
    for lam in (0.5, 1.0, 2.0):
        for a in (0.5, 0.9):
            out[f"ml lam={lam} a={a}"] = laplacian.ml_laplacian_genfun(ProcessParams(alpha=a, lam=lam), N)
    for mu in (0.5, 1.0):
        out[f"generalized mu={mu}"] = laplacian.generalized_ml_laplacian(ProcessParams(alpha=0.5, mu=mu), N)
    return out


def _good_generators(quick: bool) -> tuple[bool, str]:
    N = 256 if quick else 1024
    worst, bad = 0.0, []
    for name, k in generator_kernels(N).items():
        rep = laplacian.check_good_laplacian(k)
        worst = max(worst, rep.row_sum_residual)
        if not rep:
            bad.append(name)
    return not bad, f"N={N} worst row-sum residual {worst:.2e}" + (f"; failing {bad}" if bad else "")


def _levy_sibuya(quick: bool) -> tuple[bool, str]:
    worst = 0.0
    for a in (0.5,) if quick else (0.3, 0.5, 0.9):
        k = laplacian.laplacian_from_levy(laplacian.sibuya_measure(a), 64)
        ref = series.frac_power_one_minus_u(a, 64).coeffs
        worst = max(worst, float(np.max(np.abs(k.coeffs - ref) / np.abs(ref))))
    return worst < 1e-6, f"max rel err {worst:.2e}"


def _levy_ml(quick: bool) -> tuple[bool, str]:
    worst = 0.0
    for a, lam in ((0.5, 1.0),) if quick else ((0.5, 1.0), (0.9, 2.0)):
        k = laplacian.laplacian_from_levy(laplacian.ml_measure(a, lam), 64)
        ref = laplacian.ml_laplacian_genfun(ProcessParams(alpha=a, lam=lam), 64).coeffs
        worst = max(worst, float(np.max(np.abs(k.coeffs - ref) / np.abs(ref))))
    return worst < 1e-6, f"max rel err {worst:.2e}"


# ---------------------------------------------------------------------------
# processes


def _survival(quick: bool) -> tuple[bool, str]:
    from .specfun import mittag_leffler

    worst = 0.0
    ts = (0.1, 1.0, 10.0) if quick else (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
    for lam in (0.5, 1.0, 2.0):
        for a in (0.5, 0.9):
            for b in (0.75, 1.0):
                p = ProcessParams(alpha=a, beta=b, lam=lam)
                g = laplacian.ml_laplacian_genfun(p, 64)
                for t in ts:
                    p0 = processes.stml_pmf(p, t, 64, generator=g).probs[0]
                    worst = max(worst, abs(p0 - float(mittag_leffler(b, 1.0, -(t**b)))))
    return worst < 1e-10, f"max |p0 - E_beta| {worst:.2e}"


def _reductions(quick: bool) -> tuple[bool, str]:
    N, t = 64, 1.3
    p = ProcessParams(alpha=1.0, beta=0.75)
    d1 = np.abs(processes.space_time_frac_pmf(p, t, N).probs - processes.frac_poisson_pmf(p, t, N).probs).max()
    q = ProcessParams(beta=1.0, xi=2.0)
    d2 = np.abs(processes.frac_poisson_pmf(q, t, N).probs - processes.poisson_pmf(2.0, t, N).probs).max()
    r = ProcessParams(alpha=0.5, beta=0.75, mu=1.0)
    d3 = np.abs(processes.stml_generalized_pmf(r, t, N).probs - processes.stml_pmf(r, t, N).probs).max()
    W = laplacian.transition_from_laplacian(laplacian.ml_laplacian_genfun(ProcessParams(alpha=1.0, lam=1.0), N))
    geo = np.concatenate([[0.0], 0.5 ** np.arange(1, N + 1)])
    d4 = np.abs(W.coeffs - geo).max()
    worst = max(d1, d2, d3, d4)
    return worst < 1e-10, f"max deviation {worst:.2e}"


def _normalization(quick: bool) -> tuple[bool, str]:
    worst = 0.0
    for a, b in ((0.5, 0.75), (0.9, 1.0)):
        p = ProcessParams(alpha=a, beta=b)
        for t in (0.5, 5.0):
            worst = max(worst, processes.stml_pmf(p, t, 256).normalization_error)
    return worst < 1e-9, f"max normalization error {worst:.2e}"


def _montroll_weiss(quick: bool) -> tuple[bool, str]:
    p = ProcessParams(alpha=0.5, beta=0.75)
    us = (0.0, 0.4, 0.8) if quick else (0.0, 0.2, 0.4, 0.6, 0.8)
    ss = (0.5, 2.0) if quick else (0.25, 0.5, 1.0, 2.0, 4.0)
    gap = processes.montroll_weiss_check(p, [(u, s) for u in us for s in ss], N=128 if quick else 256)
    return gap < 1e-3, f"max rel discrepancy {gap:.2e}"


def _cox(quick: bool) -> tuple[bool, str]:
    p = ProcessParams(alpha=0.5, beta=0.75)
    N = 50
    W = laplacian.transition_from_laplacian(laplacian.ml_laplacian_genfun(p, N))
    worst = 0.0
    for t in (0.5, 5.0) if quick else (0.1, 0.5, 1.0, 2.0, 5.0):
        cox = processes.cox_series_pmf(W, processes.frac_poisson_counting(p.beta, p.xi), t, params=p)
        worst = max(worst, float(np.abs(cox.probs - processes.stml_pmf(p, t, N).probs).max()))
    return worst < 1e-8, f"max abs diff {worst:.2e}"


# ---------------------------------------------------------------------------
# ctrw


def _mc_poisson(quick: bool) -> tuple[bool, str]:
    n = 100_000 if quick else 1_000_000
    cfg = ctrw.SimConfig(seed=7, n_paths=n, t_horizon=1.0, params=ProcessParams())
    emp = ctrw.simulate(cfg)
    tv = emp.tv_distance(processes.poisson_pmf(1.0, 1.0, cfg.n_max).probs)
    return tv < 0.01, f"TV {tv:.2e} at {n} paths"


def _mc_stml(quick: bool) -> tuple[bool, str]:
    n = 100_000 if quick else 1_000_000
    p = ProcessParams(alpha=0.5, beta=0.75)
    cfg = ctrw.SimConfig(11, n, 1.0, p, "discrete_ml", "mittag_leffler")
    emp = ctrw.simulate(cfg)
    tv = emp.tv_distance(processes.stml_pmf(p, 1.0, 50).probs, n_cut=50)
    return tv < 0.01, f"TV {tv:.2e} (n <= 50 lumped) at {n} paths"


def _mc_reproducible(quick: bool) -> tuple[bool, str]:
    cfg = ctrw.SimConfig(3, 20_000, 2.0, ProcessParams(alpha=0.5, beta=0.75), "sibuya", "mittag_leffler")
    a, b = ctrw.simulate(cfg), ctrw.simulate(cfg)
    same = bool(np.array_equal(a.counts, b.counts) and a.overflow == b.overflow)
    return same, "identical counts for identical seeds" if same else "runs differ"


# ---------------------------------------------------------------------------
# difflimit


def _ml_mass(quick: bool) -> tuple[bool, str]:
    g = difflimit.ml_density_grid(0.5, 1.0, 2e-3, 5000)
    err = abs(g.total_mass() - 1.0)
    return err < 1e-6, f"|mass - 1| {err:.2e}"


def _continuum(quick: bool) -> tuple[bool, str]:
    msgs, ok = [], True
    for a in (1.0, 0.5):
        rep = difflimit.discrete_to_continuum_check(ProcessParams(alpha=a), [0.5, 1.0, 2.0], [0.1, 0.05, 0.025])
        ok &= rep.decreasing
        msgs.append(f"a={a}: " + ", ".join(f"{e:.2e}" for e in rep.errors))
    return ok, "; ".join(msgs)


def _kernel_identity(quick: bool) -> tuple[bool, str]:
    x = np.linspace(0.1, 5.0, 25)
    from .specfun import prabhakar

    a = 0.5
    direct = -a * 1.0 * x ** (a - 1.0) * prabhakar(a, a + 1.0, 2.0, -(x**a))
    ref = -np.asarray(difflimit.ml_density(a, 1.0, x))
    err = float(np.max(np.abs(direct - ref) / np.abs(ref)))
    return err < 1e-9, f"max rel err {err:.2e}"


def _residual(quick: bool) -> tuple[bool, str]:
    p = ProcessParams(alpha=0.5, beta=1.0)
    h = 1 / 16 if quick else 1 / 32
    rep = difflimit.residual_refinement(p, h, h, 1.0 if quick else 2.0, 1.0)
    return rep.passed, f"residual {rep.coarse.relative:.2e} -> {rep.fine.relative:.2e}, ratio {rep.ratio:.2f}"


# ---------------------------------------------------------------------------
# digraph


def _digraph_case(L: laplacian.DigraphLaplacian, quick: bool) -> tuple[bool, str]:
    H = L.heat_kernel(1.0)
    pos = bool(np.all(H > 0))
    rows = float(np.abs(H.sum(axis=1) - 1.0).max())
    eig = float(np.linalg.eigvals(L.entries).real.min())
    G = laplacian.digraph_bernstein_function(L, laplacian.sibuya_measure(0.5))
    good = laplacian.check_good_laplacian(G, row_tol=1e-9)
    erg = laplacian.check_ergodic(L)
    ok = pos and rows < 1e-12 and eig >= -1e-10 and good.passed and erg
    return ok, (
        f"ergodic={str(erg).lower()} exp(-L)>0={str(pos).lower()} row-sum err {rows:.1e} "
        f"min Re eig {eig:.2e} g(L) good={str(good.passed).lower()}"
    )


def digraph_checks(edges: str | None) -> list[tuple[str, CheckFn]]:
    if edges is not None:
        return [(f"edge list {edges}", lambda q: _digraph_case(laplacian.load_edge_list(edges), q))]

    def random_cases(quick: bool) -> tuple[bool, str]:
        rng = np.random.default_rng(20)
        count = 2 if quick else 5
        results = [_digraph_case(random_strong_digraph(20, rng), quick) for _ in range(count)]
        return all(r[0] for r in results), f"{sum(r[0] for r in results)}/{count} random 20-node digraphs; " + results[0][1]

    return [("random strongly connected digraphs", random_cases)]


SUITES: dict[str, list[tuple[str, CheckFn]]] = {
    "laplacian": [
        ("good-Laplacian generators", _good_generators),
        ("Levy quadrature, Sibuya", _levy_sibuya),
        ("Levy quadrature, Mittag-Leffler", _levy_ml),
    ],
    "processes": [
        ("closed-form reductions", _reductions),
        ("survival identity", _survival),
        ("normalization", _normalization),
        ("Montroll-Weiss", _montroll_weiss),
        ("Cox series", _cox),
    ],
    "ctrw": [
        ("Monte Carlo, Poisson", _mc_poisson),
        ("Monte Carlo, space-time ML", _mc_stml),
        ("reproducibility", _mc_reproducible),
    ],
    "difflimit": [
        ("ML density mass", _ml_mass),
        ("lattice to continuum", _continuum),
        ("Prabhakar kernel identity", _kernel_identity),
        ("forward equation refinement", _residual),
    ],
}


def run_suite(name: str, quick: bool = False, edges: str | None = None) -> list[CheckResult]:
    """Run one suite (or ``"all"``) and collect the results; exceptions count as failures."""
    names = list(SUITES) + ["digraph"] if name == "all" else [name]
    out = []
    for suite in names:
        if suite == "digraph":
            checks = digraph_checks(edges)
        elif suite in SUITES:
            checks = SUITES[suite]
        else:
            raise ValueError(f"unknown suite {suite!r}")
        for label, fn in checks:
            t0 = time.perf_counter()
            try:
                ok, detail = fn(quick)
            except Exception as exc:  # a crash is a failed check, not a crashed run
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            out.append(CheckResult(suite, label, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_table(results: list[CheckResult]) -> str:
    w = max(len(f"{r.suite}/{r.name}") for r in results)
    lines = [f"{'check':<{w}}  result  time    detail"]
    for r in results:
        lines.append(f"{r.suite + '/' + r.name:<{w}}  {'PASS' if r.passed else 'FAIL'}    {r.seconds:6.1f}s  {r.detail}")
    n_ok = sum(r.passed for r in results)
    lines.append(f"{n_ok}/{len(results)} passed")
    return "\n".join(lines)
