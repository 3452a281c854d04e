"""Command-line interface: reproducible CSV/JSON artifacts and invariant checks.

Every command writes its files into the output directory (``--out-dir``,
default ``$STML_OUTPUT_DIR`` or the working directory) together with a
``<command>.manifest.json`` recording the parameters, seed, library version
and a SHA-256 checksum of every file.  ``stml replay MANIFEST`` re-runs the
recorded command.

Exit codes: 0 success, 1 failed check, 2 invalid input, 3 series
non-convergence.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, checks, ctrw, difflimit, laplacian, processes
from .laplacian import ProcessParams
from .specfun import ConvergenceError

EXIT_CHECK, EXIT_INPUT, EXIT_CONVERGENCE = 1, 2, 3
OUTPUT_ENV = "STML_OUTPUT_DIR"

FIG1_PANELS = [(1.0, 1.0), (1.0, 0.75), (0.5, 1.0), (0.5, 0.75)]
FIG1_TIMES = np.concatenate([[0.0], np.logspace(-2, 4, 121)])
FIG2_ALPHAS = (0.5, 0.75)
FIG2_X = tuple(0.5 * k for k in range(1, 11))
FIG2_TIMES = np.linspace(0.0, 10.0, 201)

WAIT_ALIASES = {"exp": "exponential", "exponential": "exponential", "ml": "mittag_leffler", "mittag_leffler": "mittag_leffler"}
JUMP_ALIASES = {
    "unit": "unit", "sibuya": "sibuya", "dml": "discrete_ml", "discrete_ml": "discrete_ml",
    "gml": "generalized_ml", "generalized_ml": "generalized_ml",
}


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


class NonConvergence(click.ClickException):
    exit_code = EXIT_CONVERGENCE


# ---------------------------------------------------------------------------
# helpers


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.17g}"


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) if not isinstance(v, str) else v for v in r])
    return buf.getvalue()


def _json_text(header: list[str], rows: list[list], meta: dict) -> str:
    cols = {h: [r[i] if isinstance(r[i], str) else float(r[i]) for r in rows] for i, h in enumerate(header)}
    return json.dumps({"meta": meta, "columns": cols}, indent=1, default=float) + "\n"


class Outputs:
    """Collects written files and their checksums for the manifest."""

    def __init__(self, out_dir: str | None, fmt: str):
        self.dir = Path(out_dir) if out_dir else Path.cwd()
        self.dir.mkdir(parents=True, exist_ok=True)
        self.fmt = fmt
        self.files: dict[str, str] = {}

    def _write(self, name: str, text: str) -> None:
        path = self.dir / name
        path.write_text(text)
        self.files[name] = hashlib.sha256(text.encode()).hexdigest()

    def table(self, stem: str, header: list[str], rows: list[list], meta: dict) -> None:
        if self.fmt in ("csv", "both"):
            self._write(stem + ".csv", _csv_text(header, rows))
        if self.fmt in ("json", "both"):
            self._write(stem + ".json", _json_text(header, rows, meta))

    def raw(self, name: str, text: str) -> None:
        self._write(name, text)

    def manifest(self, command: str, params: dict, seed: int | None = None, extra: dict | None = None) -> Path:
        record = {
            "command": command,
            "params": params,
            "seed": seed,
            "version": __version__,
            "files": dict(sorted(self.files.items())),
        }
        if extra:
            record.update(extra)
        path = self.dir / f"{command}.manifest.json"
        path.write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
        return path


def _params(**kw) -> ProcessParams:
    try:
        return ProcessParams(**kw)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _float_list(text: str | None) -> list[float]:
    if text is None:
        return []
    try:
        return [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError as exc:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment; keys mirror flag names."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"{path}:{lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.lstrip("-").replace("-", "_")] = v
    return out


def _common(params: dict) -> dict:
    return {k: (v if not isinstance(v, tuple) else list(v)) for k, v in params.items() if k not in ("out_dir", "format")}


out_dir_opt = click.option(
    "--out-dir", envvar=OUTPUT_ENV, type=click.Path(file_okay=False), default=None,
    help=f"Output directory (default: ${OUTPUT_ENV} or the working directory).",
)
format_opt = click.option("--format", "fmt", type=click.Choice(["csv", "json", "both"]), default="both", show_default=True)


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="stml")
@click.option("--config", type=click.Path(exists=True, dir_okay=False), default=None,
              help="key = value file supplying defaults for the command's flags.")
@click.pass_context
def main(ctx: click.Context, config: str | None) -> None:
    """Space-time Mittag-Leffler walks: state probabilities, simulation, diffusion limits."""
    if config:
        values = _read_config(config)
        ctx.default_map = {name: _flag_defaults(cmd, values) for name, cmd in main.commands.items()}


def _flag_defaults(cmd: click.Command, values: dict[str, str]) -> dict[str, str]:
    # config keys are flag names; click looks defaults up by parameter name
    out = {}
    for param in cmd.params:
        for opt in getattr(param, "opts", []):
            key = opt.lstrip("-").replace("-", "_")
            if key in values:
                out[param.name] = values[key]
    return out


# ---------------------------------------------------------------------------
# states


_PMF = {
    "poisson": lambda p, t, N, g: processes.poisson_pmf(p.xi, t, N),
    "frac_poisson": lambda p, t, N, g: processes.frac_poisson_pmf(p, t, N),
    "space_frac": lambda p, t, N, g: processes.space_time_frac_pmf(
        ProcessParams(p.alpha, 1.0, p.mu, p.lam, p.xi, p.lambda0), t, N),
    "space_time_frac": lambda p, t, N, g: processes.space_time_frac_pmf(p, t, N),
    "stml": lambda p, t, N, g: processes.stml_pmf(p, t, N, generator=g),
    "stml_generalized": lambda p, t, N, g: processes.stml_generalized_pmf(p, t, N, generator=g),
}


def _state_rows(process: str, p: ProcessParams, times: list[float], N: int, n_out: int) -> list[list]:
    g = None
    if process == "stml":
        g = laplacian.ml_laplacian_genfun(p, N)
    elif process == "stml_generalized":
        g = laplacian.generalized_ml_laplacian(p, N)
    rows = []
    for t in times:
        pmf = _PMF[process](p, float(t), N, g)
        for n in range(n_out + 1):
            rows.append([float(t), n, float(pmf.probs[n])])
    return rows


@main.command("states")
@click.option("--process", type=click.Choice(processes.PROCESS_TAGS), default="stml", show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--xi", type=float, default=1.0, show_default=True)
@click.option("--t", "t_list", type=str, default="1", show_default=True, help="Comma-separated times.")
@click.option("--N", "N", type=int, default=64, show_default=True, help="Truncation order.")
@click.option("--n-out", type=int, default=None, help="Highest state written (default N).")
@click.option("--preset", type=click.Choice(["fig1"]), default=None)
@out_dir_opt
@format_opt
def states_cmd(process, alpha, beta, mu, lam, xi, t_list, N, n_out, preset, out_dir, fmt):
    """State probabilities p_n(t); CSV columns t,n,p."""
    out = Outputs(out_dir, fmt)
    echo = _common(dict(process=process, alpha=alpha, beta=beta, mu=mu, lam=lam, xi=xi, t=t_list, N=N,
                        n_out=n_out, preset=preset))
    if N < 0:
        raise InputError("N must be nonnegative")
    try:
        if preset == "fig1":
            for a, b in FIG1_PANELS:
                p = _params(alpha=a, beta=b, lam=1.0, xi=1.0)
                rows = _state_rows("stml", p, list(FIG1_TIMES), max(N, 16), 2)
                meta = {"process": "stml", "alpha": a, "beta": b, "lam": 1.0, "xi": 1.0, "n": [0, 1, 2]}
                out.table(f"fig1_alpha{a:g}_beta{b:g}", ["t", "n", "p"], rows, meta)
        else:
            p = _params(alpha=alpha, beta=beta, mu=mu, lam=lam, xi=xi)
            n_out = N if n_out is None else n_out
            if not 0 <= n_out <= N:
                raise InputError("n-out must lie in [0, N]")
            rows = _state_rows(process, p, _float_list(t_list), N, n_out)
            out.table(f"states_{process}", ["t", "n", "p"], rows, {"process": process, **echo})
    except ConvergenceError as exc:
        raise NonConvergence(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out.manifest("states", echo)
    click.echo(f"wrote {len(out.files)} file(s) to {out.dir}")


# ---------------------------------------------------------------------------
# simulate


def _analytic_pmf(wait: str, jump: str, p: ProcessParams, t: float, N: int) -> np.ndarray:
    if jump == "unit":
        return processes.poisson_pmf(p.xi, t, N).probs if wait == "exponential" else processes.frac_poisson_pmf(p, t, N).probs
    if jump == "sibuya":
        return processes.space_time_frac_pmf(p, t, N).probs
    if jump == "discrete_ml":
        return processes.stml_pmf(p, t, N).probs
    return processes.stml_generalized_pmf(p, t, N).probs


@main.command("simulate")
@click.option("--wait", type=click.Choice(sorted(WAIT_ALIASES)), default="exp", show_default=True)
@click.option("--jump", type=click.Choice(sorted(JUMP_ALIASES)), default="unit", show_default=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--lambda", "lam", type=float, default=1.0, show_default=True)
@click.option("--xi", type=float, default=1.0, show_default=True)
@click.option("--t", "t", type=float, default=1.0, show_default=True, help="Observation time.")
@click.option("--paths", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--n-max", type=int, default=ctrw.N_MAX, show_default=True, help="Highest tracked state.")
@click.option("--n-cut", type=int, default=None, help="Lump states above this in the TV distance.")
@out_dir_opt
@format_opt
def simulate_cmd(wait, jump, alpha, beta, mu, lam, xi, t, paths, seed, n_max, n_cut, out_dir, fmt):
    """Monte Carlo histogram next to the analytic pmf, with a TV summary."""
    wait_kind, jump_kind = WAIT_ALIASES[wait], JUMP_ALIASES[jump]
    echo = dict(wait=wait_kind, jump=jump_kind, alpha=alpha, beta=beta, mu=mu, lam=lam, xi=xi, t=t,
                paths=paths, seed=seed, n_max=n_max, n_cut=n_cut)
    if wait_kind == "exponential" and beta != 1.0:
        raise InputError("beta must be 1 for exponential waiting times (use --wait ml)")
    p = _params(alpha=alpha, beta=beta, mu=mu, lam=lam, xi=xi)
    try:
        cfg = ctrw.SimConfig(seed, paths, t, p, jump_kind, wait_kind, n_max)
        emp = ctrw.simulate(cfg)
        probs = _analytic_pmf(wait_kind, jump_kind, p, t, n_max)
        tv = emp.tv_distance(probs, n_cut)
    except ConvergenceError as exc:
        raise NonConvergence(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = Outputs(out_dir, fmt)
    text = emp.to_csv(analytic=probs)
    if fmt in ("csv", "both"):
        out.raw("simulate.csv", text)
    if fmt in ("json", "both"):
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        cols = {h: [r[i] if r[i].startswith(">") else float(r[i]) for r in body] for i, h in enumerate(header)}
        out.raw("simulate.json", json.dumps({"meta": {**echo, "tv": tv}, "columns": cols}, indent=1) + "\n")
    out.manifest("simulate", echo, seed=seed, extra={"tv_distance": tv})
    click.echo(f"TV distance {tv:.6g} over {paths} paths (seed {seed})")


# ---------------------------------------------------------------------------
# density


def _density_rows(p: ProcessParams, xs: list[float], times: list[float]) -> list[list]:
    from .specfun import mittag_leffler

    x = np.asarray(xs, dtype=float)
    rows = []
    for t in times:
        delta = float(mittag_leffler(p.beta, 1.0, -p.xi * t**p.beta))
        try:
            vals = np.asarray(difflimit.state_density(p, x, float(t)), dtype=float)
        except ConvergenceError:
            for xi_ in x:
                try:
                    difflimit.state_density(p, float(xi_), float(t))
                except ConvergenceError as exc:
                    raise NonConvergence(f"state density did not converge at x={xi_:g}, t={t:g}: {exc}") from exc
            raise
        for xv, v in zip(x, np.atleast_1d(vals)):
            rows.append([float(xv), float(t), float(v), delta])
    return rows


@main.command("density")
@click.option("--alpha", type=float, default=0.5, show_default=True)
@click.option("--beta", type=float, default=1.0, show_default=True)
@click.option("--mu", type=float, default=1.0, show_default=True)
@click.option("--lambda0", type=float, default=1.0, show_default=True)
@click.option("--xi", type=float, default=1.0, show_default=True)
@click.option("--x", "x_list", type=str, default="1", show_default=True, help="Comma-separated positions > 0.")
@click.option("--t", "t_list", type=str, default="1", show_default=True, help="Comma-separated times.")
@click.option("--h", type=float, default=None, help="Also write a DensityGrid file per time with this spacing.")
@click.option("--K", "K", type=int, default=400, show_default=True, help="Grid intervals used with --h.")
@click.option("--preset", type=click.Choice(["fig2"]), default=None)
@out_dir_opt
@format_opt
def density_cmd(alpha, beta, mu, lambda0, xi, x_list, t_list, h, K, preset, out_dir, fmt):
    """Continuum state density; CSV columns x,t,P,delta_weight."""
    out = Outputs(out_dir, fmt)
    echo = _common(dict(alpha=alpha, beta=beta, mu=mu, lambda0=lambda0, xi=xi, x=x_list, t=t_list, h=h, K=K,
                        preset=preset))
    header = ["x", "t", "P", "delta_weight"]
    try:
        if preset == "fig2":
            for a in FIG2_ALPHAS:
                p = _params(alpha=a, beta=1.0, lambda0=1.0, xi=1.0)
                rows = _density_rows(p, list(FIG2_X), list(FIG2_TIMES))
                out.table(f"fig2_alpha{a:g}", header, rows, {"alpha": a, "beta": 1.0, "lambda0": 1.0, "xi": 1.0})
        else:
            p = _params(alpha=alpha, beta=beta, mu=mu, lambda0=lambda0, xi=xi)
            xs, ts = _float_list(x_list), _float_list(t_list)
            if any(v <= 0 for v in xs):
                raise InputError("x values must be positive (the Dirac part sits at x = 0+)")
            if any(v < 0 for v in ts):
                raise InputError("t values must be nonnegative")
            out.table("density", header, _density_rows(p, xs, ts), {k: v for k, v in echo.items()})
            if h is not None:
                if not (h > 0 and K >= 4):
                    raise InputError("--h must be positive and --K at least 4")
                for t in ts:
                    grid = difflimit.state_density_grid(p, t, h, K)
                    path = grid.to_csv(out.dir / f"density_grid_t{t:g}.csv")
                    out.files[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    except ConvergenceError as exc:
        raise NonConvergence(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out.manifest("density", echo)
    click.echo(f"wrote {len(out.files)} file(s) to {out.dir}")


# ---------------------------------------------------------------------------
# check and replay


@main.command("check")
@click.argument("suite", type=click.Choice(["laplacian", "processes", "ctrw", "difflimit", "digraph", "all"]))
@click.option("--quick", is_flag=True, help="Smaller orders, grids and path counts.")
@click.option("--edges", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Edge list ('i j weight' per line) for the digraph suite.")
def check_cmd(suite, quick, edges):
    """Run invariant suites; exit 0 iff every check passes."""
    if edges is not None:
        try:
            laplacian.load_edge_list(edges)
        except ValueError as exc:
            raise InputError(f"{edges}: {exc}") from exc
    results = checks.run_suite(suite, quick, edges)
    click.echo(checks.format_table(results))
    if not all(r.passed for r in results):
        sys.exit(EXIT_CHECK)


@main.command("replay")
@click.argument("manifest", type=click.Path(exists=True, dir_okay=False))
@click.option("--out-dir", type=click.Path(file_okay=False), default=None,
              help="Where to write the regenerated files (default: next to the manifest).")
@click.option("--verify/--no-verify", default=True, show_default=True, help="Compare checksums with the manifest.")
def replay_cmd(manifest, out_dir, verify):
    """Re-run the command recorded in a manifest."""
    rec = json.loads(Path(manifest).read_text())
    cmd = main.commands.get(rec.get("command", ""))
    if cmd is None or cmd.name in ("check", "replay"):
        raise InputError(f"manifest does not record a replayable command: {rec.get('command')!r}")
    params = dict(rec["params"])
    target = out_dir or str(Path(manifest).parent)
    kw = {**params, "out_dir": target, "fmt": _format_of(rec)}
    if cmd.name in ("states", "density"):
        kw["t_list"] = kw.pop("t")
    if cmd.name == "density":
        kw["x_list"] = kw.pop("x")
    ctx = click.get_current_context()
    ctx.invoke(cmd, **kw)
    if verify:
        new = json.loads((Path(target) / f"{cmd.name}.manifest.json").read_text())
        if new["files"] != rec["files"]:
            click.echo("checksums differ from the manifest", err=True)
            sys.exit(EXIT_CHECK)
        click.echo("checksums match the manifest")


def _format_of(rec: dict) -> str:
    names = rec.get("files", {})
    has_csv = any(n.endswith(".csv") for n in names)
    has_json = any(n.endswith(".json") for n in names)
    return "both" if has_csv and has_json else ("json" if has_json else "csv")


if __name__ == "__main__":  # pragma: no cover
    main()
