"""Acceptance criteria, one test per criterion at the stated tolerances.

Each test prints ``criterion N: PASS|FAIL detail``; the lines are repeated
in the pytest terminal summary.
"""

from __future__ import annotations

import csv
import math
import time

import numpy as np
from click.testing import CliRunner

from stml import ctrw, difflimit, laplacian, processes, series
from stml.checks import generator_kernels, random_strong_digraph
from stml.cli import main
from stml.laplacian import ProcessParams
from stml.specfun import mittag_leffler


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def test_criterion_01_closed_form_reductions(criterion):
    N, worst = 64, {}
    for t in (0.1, 1.3, 5.0):
        p = ProcessParams(alpha=1.0, beta=0.75)
        worst["space_time(a=1)"] = max(worst.get("space_time(a=1)", 0.0), _max_abs(
            processes.space_time_frac_pmf(p, t, N).probs, processes.frac_poisson_pmf(p, t, N).probs))
        q = ProcessParams(beta=1.0, xi=2.0)
        worst["frac_poisson(b=1)"] = max(worst.get("frac_poisson(b=1)", 0.0), _max_abs(
            processes.frac_poisson_pmf(q, t, N).probs, processes.poisson_pmf(2.0, t, N).probs))
        r = ProcessParams(alpha=0.5, beta=0.75, mu=1.0)
        worst["generalized(mu=1)"] = max(worst.get("generalized(mu=1)", 0.0), _max_abs(
            processes.stml_generalized_pmf(r, t, N).probs, processes.stml_pmf(r, t, N).probs))
    W = laplacian.transition_from_laplacian(laplacian.ml_laplacian_genfun(ProcessParams(alpha=1.0, lam=1.0), N))
    worst["geometric"] = _max_abs(W.coeffs, np.concatenate([[0.0], 0.5 ** np.arange(1, N + 1)]))
    ok = max(worst.values()) < 1e-10
    criterion(1, ok, "max deviations " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))


def test_criterion_02_good_laplacians(criterion):
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for name, k in generator_kernels(1024).items():
        rep = laplacian.check_good_laplacian(k, row_tol=1e-9)
        worst = max(worst, rep.row_sum_residual)
        if not (rep.zero_row_sums and rep.positive_diagonal and rep.nonpositive_offdiagonal):
            bad.append(name)
    dt = time.perf_counter() - t0
    ok = not bad and worst < 1e-9 and dt < 60
    criterion(2, ok, f"{len(generator_kernels(8))} kernels at N=1024, worst row-sum residual {worst:.1e}, "
                     f"{dt:.1f}s" + (f", failing {bad}" if bad else ""))


def test_criterion_03_levy_equivalence(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for a in (0.3, 0.5, 0.9):
        k = laplacian.laplacian_from_levy(laplacian.sibuya_measure(a), 64)
        ref = series.frac_power_one_minus_u(a, 64).coeffs
        worst = max(worst, float(np.max(np.abs(k.coeffs - ref) / np.abs(ref))))
    for a, lam in ((0.5, 0.5), (0.5, 1.0), (0.9, 2.0)):
        k = laplacian.laplacian_from_levy(laplacian.ml_measure(a, lam), 64)
        ref = laplacian.ml_laplacian_genfun(ProcessParams(alpha=a, lam=lam), 64).coeffs
        worst = max(worst, float(np.max(np.abs(k.coeffs - ref) / np.abs(ref))))
    dt = time.perf_counter() - t0
    criterion(3, worst < 1e-6 and dt < 60, f"max rel err {worst:.1e} for n <= 64, {dt:.1f}s")


def test_criterion_04_survival_identity(criterion):
    ts = np.round(np.arange(0.1, 10.0001, 0.1), 10)
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        for a in (0.5, 0.9):
            for b in (0.75, 1.0):
                p = ProcessParams(alpha=a, beta=b, lam=lam)
                g = laplacian.ml_laplacian_genfun(p, 32)
                exact = np.asarray(mittag_leffler(b, 1.0, -(ts**b)))
                p0 = np.array([processes.stml_pmf(p, float(t), 32, generator=g).probs[0] for t in ts])
                worst = max(worst, _max_abs(p0, exact))
    criterion(4, worst < 1e-10, f"max |p0 - E_beta(-xi t^beta)| {worst:.1e} over t in [0.1, 10], 12 combos")


def test_criterion_05_montroll_weiss(criterion):
    t0 = time.perf_counter()
    p = ProcessParams(alpha=0.5, beta=0.75, lam=1.0, xi=1.0)
    probes = [(u, s) for u in (0.0, 0.2, 0.4, 0.6, 0.8) for s in (0.25, 0.5, 1.0, 2.0, 4.0)]
    gap = processes.montroll_weiss_check(p, probes, N=256)
    dt = time.perf_counter() - t0
    criterion(5, gap < 1e-3 and dt < 300, f"max rel discrepancy {gap:.1e} on 5x5 (u,s) grid, {dt:.1f}s")


def test_criterion_06_monte_carlo(criterion):
    t0 = time.perf_counter()
    n = 1_000_000
    cfg = ctrw.SimConfig(7, n, 1.0, ProcessParams())
    tv1 = ctrw.simulate(cfg).tv_distance(processes.poisson_pmf(1.0, 1.0, cfg.n_max).probs)
    p = ProcessParams(beta=0.75)
    cfg = ctrw.SimConfig(5, n, 1.0, p, "unit", "mittag_leffler")
    tv2 = ctrw.simulate(cfg).tv_distance(processes.frac_poisson_pmf(p, 1.0, 200).probs)
    p = ProcessParams(alpha=0.5, beta=0.75, lam=1.0)
    cfg = ctrw.SimConfig(11, n, 1.0, p, "discrete_ml", "mittag_leffler")
    tv3 = ctrw.simulate(cfg).tv_distance(processes.stml_pmf(p, 1.0, 50).probs, n_cut=50)
    dt = time.perf_counter() - t0
    ok = max(tv1, tv2, tv3) < 0.01 and dt < 600
    criterion(6, ok, f"TV poisson {tv1:.1e}, frac_poisson {tv2:.1e}, stml {tv3:.1e} at 1e6 paths, {dt:.1f}s")


def test_criterion_07_cox_series(criterion):
    p = ProcessParams(alpha=0.5, beta=0.75)
    N = 50
    W = laplacian.transition_from_laplacian(laplacian.ml_laplacian_genfun(p, N))
    counting = processes.frac_poisson_counting(p.beta, p.xi)
    worst = 0.0
    for t in (0.1, 0.5, 1.0, 2.0, 3.5, 5.0):
        cox = processes.cox_series_pmf(W, counting, t, params=p)
        worst = max(worst, _max_abs(cox.probs, processes.stml_pmf(p, t, N).probs))
    criterion(7, worst < 1e-8, f"max abs diff {worst:.1e} for n <= 50, t <= 5")


def test_criterion_08_asymptotics(criterion):
    n = 10_000
    ratios = {}
    for b in (1.0, 0.75):
        p = ProcessParams(alpha=0.5, beta=b, lam=1.0)
        val = processes.stml_pmf(p, 1.0, n).probs[n]
        ratios[f"large-n b={b}"] = processes.stml_asymptotics(p, n, 1.0, "large_n") / val
    for xi in (1.0, 2.0):
        p = ProcessParams(alpha=0.5, beta=0.75, xi=xi)
        t = 1e4 / xi ** (1 / p.beta)
        pmf = processes.stml_pmf(p, t, 8).probs
        for k in (0, 1, 2):
            ratios[f"large-t xi={xi} n={k}"] = processes.stml_asymptotics(p, k, t, "large_t") / pmf[k]
    worst = max(abs(r - 1.0) for r in ratios.values())
    criterion(8, worst < 0.05, f"worst |ratio - 1| {worst:.1e} ({len(ratios)} ratios)")


def test_criterion_09_diffusion_limit(criterion):
    t0 = time.perf_counter()
    msgs, ok = [], True
    for a, lam0 in ((1.0, 1.0), (0.5, 1.0)):
        rep = difflimit.discrete_to_continuum_check(
            ProcessParams(alpha=a, lambda0=lam0), [0.5, 1.0, 2.0], [0.1, 0.05, 0.025])
        ok &= rep.decreasing
        msgs.append(f"a={a}: " + "/".join(f"{e:.1e}" for e in rep.errors))
    for kw, h, xm, t_min in ((dict(alpha=0.5, beta=1.0), 1 / 32, 2.0, 0.0),
                             (dict(alpha=0.75, beta=0.75), 0.05, 4.0, 0.25)):
        rep = difflimit.residual_refinement(ProcessParams(**kw), h, h, xm, 1.0, t_min=t_min)
        ok &= rep.ratio >= 1.2
        msgs.append(f"residual a={kw['alpha']} b={kw['beta']} ratio {rep.ratio:.2f}")
    dt = time.perf_counter() - t0
    criterion(9, ok and dt < 600, "; ".join(msgs) + f", {dt:.1f}s")


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[float(v) for v in r] for r in rows[1:]]


def test_criterion_10_figures(criterion, tmp_path):
    t0 = time.perf_counter()
    runner = CliRunner()
    r1 = runner.invoke(main, ["states", "--preset", "fig1", "--format", "csv", "--out-dir", str(tmp_path)])
    r2 = runner.invoke(main, ["density", "--preset", "fig2", "--format", "csv", "--out-dir", str(tmp_path)])
    facts = {"cli": r1.exit_code == 0 and r2.exit_code == 0}
    slopes = []
    p0_ok = start_ok = True
    for f in sorted(tmp_path.glob("fig1_*.csv")):
        _, rows = _read(f)
        data = np.array(rows)
        curves = {n: data[data[:, 1] == n][:, [0, 2]] for n in (0, 1, 2)}
        c0 = curves[0]
        # strictly decreasing while positive; e^-t underflows to 0 for beta = 1 at large t
        d0, pos = np.diff(c0[:, 1]), c0[:-1, 1] > 0
        p0_ok &= c0[0, 0] == 0.0 and c0[0, 1] == 1.0 and bool(np.all(d0 <= 0) and np.all(d0[pos] < 0))
        start_ok &= curves[1][0, 1] == 0.0 and curves[2][0, 1] == 0.0
        if "beta0.75" in f.name:
            for n in (0, 1, 2):
                c = curves[n]
                last = c[c[:, 0] >= c[-1, 0] / 10]
                slopes.append(np.polyfit(np.log(last[:, 0]), np.log(last[:, 1]), 1)[0])
    facts["p0 monotone, p0(0)=1"] = p0_ok
    facts["p1,p2 start at 0"] = start_ok
    facts["t^-0.75 decay"] = len(slopes) == 6 and all(abs(s + 0.75) < 0.075 for s in slopes)
    _, rows = _read(tmp_path / "fig2_alpha0.75.csv")
    data = np.array(rows)
    changes = {x: difflimit.sign_changes(data[data[:, 0] == x][:, 2]) for x in sorted(set(data[:, 0])) if x >= 3}
    facts["fig2 oscillation"] = all(c >= 2 for c in changes.values())
    dt = time.perf_counter() - t0
    ok = all(facts.values()) and dt < 600
    detail = ", ".join(f"{k}={'ok' if v else 'no'}" for k, v in facts.items())
    detail += f"; slopes {min(slopes):.3f}..{max(slopes):.3f}" if slopes else ""
    detail += f"; dP/dt sign changes at x>=3: {sorted(set(changes.values()))}, {dt:.1f}s"
    criterion(10, ok, detail)


def test_criterion_11_digraphs(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_row, min_entry, min_eig, good = 0.0, math.inf, math.inf, True
    for _ in range(10):
        L = random_strong_digraph(20, rng)
        H = L.heat_kernel(1.0)
        min_entry = min(min_entry, float(H.min()))
        worst_row = max(worst_row, float(np.abs(H.sum(axis=1) - 1.0).max()))
        min_eig = min(min_eig, float(np.linalg.eigvals(L.entries).real.min()))
        G = laplacian.digraph_bernstein_function(L, laplacian.sibuya_measure(0.5))
        good &= laplacian.check_good_laplacian(G, row_tol=1e-9).passed
    dt = time.perf_counter() - t0
    ok = min_entry > 0 and worst_row < 1e-12 and min_eig >= -1e-10 and good and dt < 60
    criterion(11, ok, f"10 random 20-node digraphs: min e^-L entry {min_entry:.1e}, row-sum err {worst_row:.1e}, "
                      f"min Re eig {min_eig:.1e}, g(L) good={good}, {dt:.1f}s")
