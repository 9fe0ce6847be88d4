from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import typer

from . import ding, flows, sampler, stability
from .config import CONFIG, ExperimentConfig
from .errors import (
    EXIT_CHECK_FAILED,
    EXIT_DIVERGENT,
    EXIT_INCONCLUSIVE,
    EXIT_OK,
    EXIT_UNSTABLE,
    EXIT_USAGE,
    GibbsLabError,
    MaxIterations,
)
from .geometry import SpherePoint, random_points, random_unimodular
from .pairs import CurveDivisor, LogPairCurve, as_fraction
from .reports import Report, write_csv, write_records
from .sections import SectionSpace
from .utils import console, seed_streams, setup_logging

EXIT_HELP = """Exit codes: 0 ok / probe passed, 1 failed check, 2 unstable witness,
3 inconclusive, 64 usage or config error, 65 divergent partition,
69 refused unstable target, 70 numerical failure."""

app = typer.Typer(help="Gibbs stability experiments on log pairs over P^1.\n\n" + EXIT_HELP)

VERDICT_EXIT = {
    stability.Verdict.STABLE_PROBE_PASSED: EXIT_OK,
    stability.Verdict.UNSTABLE_WITNESS: EXIT_UNSTABLE,
    stability.Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}

FLOW_TESTS = ("intertwine", "mu", "zeros", "hamiltonian", "nepsilon", "harmonic")
FLOW_CHECKS = 100
INTERTWINE_TOL = 1e-10
# keeps Sym^d(g) well conditioned for d up to 2k
INTERTWINE_SCALE = 0.5
MU_TOL = 1e-8
HAMILTONIAN_TOL = 1e-4
HARMONIC_TOL = 1e-5

ConfigOption = typer.Option(None, "--config", "-c", help="Experiment name (see 'gibbslab list-configs') or YAML file.")
SeedOption = typer.Option(None, "--seed", help="Override the config seeds with a single seed.")
BudgetOption = typer.Option(None, "--budget", help="Override the sample/step budget.")
ResolutionOption = typer.Option(None, "--resolution", help="Override the quadrature resolution.")
OutOption = typer.Option(None, "--out", help="Override the output directory.")


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log progress (INFO)."),
    debug: bool = typer.Option(False, "--debug", help="Log per-iteration detail (DEBUG)."),
):
    setup_logging(logging.DEBUG if debug else logging.INFO if verbose else logging.WARNING)


@contextmanager
def _guarded() -> Iterator[None]:
    """Print domain failures in red and exit with their code."""
    try:
        yield
    except GibbsLabError as exc:
        console.print(f"[red]✖ {type(exc).__name__}: {exc}[/]")
        raise typer.Exit(exc.exit_code) from exc
    except (ValueError, ZeroDivisionError) as exc:
        console.print(f"[red]✖ {exc}[/]")
        raise typer.Exit(EXIT_USAGE) from exc


def _load(config: str | None, seed=None, budget=None, resolution=None, out=None) -> ExperimentConfig:
    return CONFIG.resolve(config).with_overrides(seed=seed, budget=budget, resolution=resolution, out_dir=out)


@app.command("list-configs")
def list_configs():
    """List the named experiments."""
    with _guarded():
        console.print("[bold]Available experiments:[/]")
        default = CONFIG.default_name
        for name, cfg in CONFIG.experiments.items():
            marker = "[green](default)[/]" if name == default else ""
            console.print(f"  - [cyan]{name}[/] {marker}")
            console.print(f"      pair: {cfg.pair().describe()}")
            console.print(f"      k = {cfg.k}, gamma = {cfg.gamma}, seeds = {list(cfg.seeds)}")


@app.command("stability")
def stability_cmd(
    config: str = ConfigOption,
    seed: int = SeedOption,
    budget: int = BudgetOption,
    out: Path = OutOption,
):
    """One-cluster Gibbs-stability probe with an MC cross-check (exit 0 / 2 / 3)."""
    with _guarded():
        cfg = _load(config, seed, budget, out=out)
        report = Report("stability", cfg.to_dict(), cfg.seeds)
        result = stability.gibbs_stable_probe(cfg.pair(), cfg.k, cfg.gamma, cfg.budget, cfg.seeds)
        out_dir = Path(cfg.out_dir)
        path = report.write(out_dir / "stability.yaml", result.to_record())
        write_records(out_dir / "strata.records", [r.to_record() for r in result.strata])
    for r in result.strata:
        mark = "[green]✔[/]" if r.integrable else "[red]✖[/]"
        console.print(f"  {mark} {r.stratum.descriptor}: E = {r.exponent}")
    console.print(f"[bold]{result.verdict.value}[/] ({result.params.describe()}) -> {path}")
    raise typer.Exit(VERDICT_EXIT[result.verdict])


@app.command("partition")
def partition_cmd(
    config: str = ConfigOption,
    seed: int = SeedOption,
    budget: int = BudgetOption,
    out: Path = OutOption,
    method: str = typer.Option("mc", "--method", "-m", help="'mc' (importance sampling) or 'tensor' (N <= 3)."),
    order: int = typer.Option(None, "--order", help="Quadrature order of the tensor rule (default depends on N)."),
):
    """Estimate the partition function Z (exit 65 when DIVERGENT)."""
    with _guarded():
        cfg = _load(config, seed, budget, out=out)
        report = Report("partition", cfg.to_dict(), cfg.seeds)
        params = stability.DeformedDensityParams(cfg.pair(), cfg.k, cfg.gamma)
        estimate = stability.partition_estimate(params, method, cfg.budget, cfg.seeds, order=order)
        path = report.write(Path(cfg.out_dir) / "partition.yaml", estimate.to_record())
    if estimate.divergent:
        console.print(f"[yellow]Z is DIVERGENT for {params.describe()}[/] -> {path}")
        raise typer.Exit(EXIT_DIVERGENT)
    console.print(f"[green]✔[/] Z = {estimate.value:.10g} ± {estimate.stderr:.2g} -> {path}")


@app.command("sample")
def sample_cmd(
    config: str = ConfigOption,
    seed: int = SeedOption,
    budget: int = BudgetOption,
    out: Path = OutOption,
    chains: int = typer.Option(2, "--chains", help="Number of chains (streams of the first seed)."),
    force: bool = typer.Option(False, "--force", help="Sample even a witnessed non-normalizable target."),
    bands: int = typer.Option(4, "--bands", help="Bloch-z bands of the histogram."),
    sectors: int = typer.Option(6, "--sectors", help="Azimuth sectors of the histogram."),
):
    """MCMC samples of the Gibbs measure and their 1-point histogram (exit 69 when refused)."""
    with _guarded():
        cfg = _load(config, seed, budget, out=out)
        report = Report("sample", cfg.to_dict(), cfg.seeds[:1])
        batches = sampler.run_chains(cfg.pair(), cfg.k, cfg.gamma, cfg.budget, cfg.seeds[0], chains, force)
        histogram = sampler.pushforward_histogram(batches, bands, sectors)
        out_dir = Path(cfg.out_dir)
        rows = (row for chain, batch in enumerate(batches) for row in batch.csv_rows(chain))
        write_csv(out_dir / "samples.csv", sampler.CSV_HEADER, rows)
        path = report.write(
            out_dir / "sample.yaml",
            {"chains": [b.to_record() for b in batches], "histogram": histogram.to_record()},
        )
    for chain, batch in enumerate(batches):
        console.print(
            f"  chain {chain}: acceptance {batch.acceptance_rate:.3f}, kept {batch.n_kept}, min ESS {batch.min_ess:.1f}"
        )
    console.print(f"[green]✔[/] samples -> {out_dir / 'samples.csv'}, report -> {path}")


@app.command("ding")
def ding_cmd(
    config: str = ConfigOption,
    seed: int = SeedOption,
    resolution: int = ResolutionOption,
    out: Path = OutOption,
    restarts: bool = typer.Option(False, "--restarts", help="Also minimize from random metrics and report the spread."),
):
    """Minimize the quantized Ding functional (exit 70 when it does not converge)."""
    with _guarded():
        cfg = _load(config, seed, resolution=resolution, out=out)
        report = Report("ding", cfg.to_dict(), cfg.seeds)
        pair = cfg.pair()
        space = SectionSpace.for_pair(pair, cfg.k)
        grid = ding.pair_grid(pair, cfg.resolution)
        out_dir = Path(cfg.out_dir)
        try:
            result = ding.minimize_ding(float(cfg.gamma), space, grid, cfg.ding)
        except MaxIterations as exc:
            if exc.report is not None:
                report.write(out_dir / "ding.yaml", exc.report.to_record())
                _write_trace(out_dir, exc.report)
            raise
        record = result.to_record()
        if restarts:
            runs = ding.minimize_ding_restarts(float(cfg.gamma), space, grid, cfg.ding, cfg.seeds[0])
            values = [r.value for r in runs]
            record["restarts"] = {"values": values, "spread": max(values) - min(values)}
        path = report.write(out_dir / "ding.yaml", record)
        _write_trace(out_dir, result)
    flag = " [yellow](NonCoercive)[/]" if result.noncoercive else ""
    console.print(f"[green]✔[/] inf D = {result.value:.12g} after {result.iterations} iterations{flag} -> {path}")


def _write_trace(out_dir: Path, result: ding.DingReport) -> None:
    rows = ([r["iter"], r["D"], r["J"], r["grad_norm"]] for r in result.trace_rows())
    write_csv(out_dir / "ding_trace.csv", ("iter", "D", "J", "grad_norm"), rows)


@app.command("inequality")
def inequality_cmd(
    config: str = ConfigOption,
    seed: int = SeedOption,
    budget: int = BudgetOption,
    resolution: int = ResolutionOption,
    out: Path = OutOption,
):
    """Check -(1/(gamma N)) log Z <= inf D + log(N)/(kN) (exit 1 when violated)."""
    with _guarded():
        cfg = _load(config, seed, budget, resolution, out)
        report = Report("inequality", cfg.to_dict(), cfg.seeds)
        result = ding.inequality_check(
            cfg.k, cfg.gamma, cfg.pair(), cfg.budget, cfg.seeds, cfg.resolution, cfg.ding
        )
        path = report.write(Path(cfg.out_dir) / "inequality.yaml", result.to_record())
    mark = "[green]✔[/]" if result.holds else "[red]✖[/]"
    console.print(f"{mark} lhs = {result.lhs:.8g} ± {result.lhs_stderr:.2g}, rhs = {result.rhs:.8g} -> {path}")
    if not result.holds:
        raise typer.Exit(EXIT_CHECK_FAILED)


@app.command("flows")
def flows_cmd(
    test: str = typer.Option(..., "--test", "-t", help=f"One of: {', '.join(FLOW_TESTS)}."),
    config: str = ConfigOption,
    seed: int = SeedOption,
    resolution: int = ResolutionOption,
    out: Path = OutOption,
    level: int = typer.Option(1, "--level", "-k", help="Level k on bare P^1 (sections of -kK)."),
    epsilon: float = typer.Option(0.5, "--epsilon", help="Exponent of the N_epsilon test."),
):
    """Holomorphic-vector-field checks on bare P^1 (exit 1 when a residual fails)."""
    if test not in FLOW_TESTS:
        console.print(f"[red]✖ unknown test {test!r}; choose from {', '.join(FLOW_TESTS)}[/]")
        raise typer.Exit(EXIT_USAGE)
    with _guarded():
        cfg = _load(config, seed, resolution=resolution, out=out)
        report = Report(f"flows {test}", cfg.to_dict(), cfg.seeds[:1])
        rng = seed_streams(cfg.seeds[0], 1)[0]
        result = FLOW_RUNNERS[test](rng, level, cfg, epsilon)
        path = report.write(Path(cfg.out_dir) / f"flows_{test}.yaml", result)
    mark = "[green]✔[/]" if result["passed"] else "[red]✖[/]"
    console.print(f"{mark} flows --test {test}: {result['summary']} -> {path}")
    if not result["passed"]:
        raise typer.Exit(EXIT_CHECK_FAILED)


def _bare_space(level: int) -> SectionSpace:
    return SectionSpace.for_pair(LogPairCurve.bare(), level)


def _flow_intertwine(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    space = _bare_space(level)
    residuals = [
        flows.intertwining_residual(space, random_unimodular(rng, INTERTWINE_SCALE), random_points(rng, 8))
        for _ in range(FLOW_CHECKS)
    ]
    worst = max(residuals)
    return {"checks": FLOW_CHECKS, "max_residual": worst, "passed": worst < INTERTWINE_TOL,
            "summary": f"max residual {worst:.3g} over {FLOW_CHECKS} checks"}


def _flow_mu(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    n = _bare_space(level).dimension
    residuals = [
        flows.mu_invariance_test(level, random_unimodular(rng), random_points(rng, n)) for _ in range(FLOW_CHECKS)
    ]
    worst = max(residuals)
    return {"checks": FLOW_CHECKS, "max_residual": worst, "passed": worst < MU_TOL,
            "summary": f"max residual {worst:.3g} over {FLOW_CHECKS} checks"}


def _flow_zeros(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    failures = 0
    for _ in range(FLOW_CHECKS):
        points = [SpherePoint.from_array(p) for p in random_points(rng, 3)]
        if flows.fields_vanishing_at(points):
            failures += 1
        pair_fields = flows.fields_vanishing_at(points[:2])
        if len(pair_fields) != 1 or not all(pair_fields[0].vanishes_at(p, tol=1e-9) for p in points[:2]):
            failures += 1
    return {"checks": FLOW_CHECKS, "failures": failures, "passed": failures == 0,
            "summary": f"{failures} failures over {FLOW_CHECKS} triples"}


def _unit_coefficients(rng: np.random.Generator, size: int) -> np.ndarray:
    coeffs = rng.normal(size=size) + 1j * rng.normal(size=size)
    return coeffs / np.linalg.norm(coeffs)


def _flow_hamiltonian(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    fields = {
        "euler": flows.VectorFieldSL2.euler(),
        "random": flows.VectorFieldSL2.from_polynomial(*_unit_coefficients(rng, 3)),
    }
    results = {}
    for name, field in fields.items():
        for metric in sorted(flows.SMOOTH_METRICS):
            results[f"{name}/{metric}"] = flows.hamiltonian(field, metric, 2 * level).to_record()
    worst = max(r["residual"] for r in results.values())
    return {"cases": results, "max_residual": worst, "passed": worst < HAMILTONIAN_TOL,
            "summary": f"max residual {worst:.3g}"}


def _flow_nepsilon(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    coeffs = rng.normal(size=2 * level + 1) + 1j * rng.normal(size=2 * level + 1)
    smooth = flows.n_epsilon(coeffs, epsilon, level, flows.MetricSpec.fs())
    toric = flows.n_epsilon(coeffs, epsilon, level, flows.MetricSpec.toric())
    passed = not smooth.divergent and toric.divergent
    return {"fs": smooth.to_record(), "toric": toric.to_record(), "passed": passed,
            "summary": f"fs {'DIVERGENT' if smooth.divergent else f'{smooth.value:.6g}'}, "
                       f"toric {'DIVERGENT' if toric.divergent else f'{toric.value:.6g}'}"}


def _flow_harmonic(rng: np.random.Generator, level: int, cfg: ExperimentConfig, epsilon: float) -> dict:
    space = _bare_space(level)
    grid = ding.pair_grid(LogPairCurve.bare(), cfg.resolution)
    probe = ding.harmonicity_probe(flows.VectorFieldSL2.euler(), ding.HermitianMetricMatrix.identity(space.dimension),
                                   space, grid)
    record = probe.to_record()
    worst = max(probe.laplacian_residual, probe.formula_residual)
    return {**record, "passed": worst < HARMONIC_TOL,
            "summary": f"laplacian {probe.laplacian_residual:.3g}, formula {probe.formula_residual:.3g}"}


FLOW_RUNNERS = {
    "intertwine": _flow_intertwine,
    "mu": _flow_mu,
    "zeros": _flow_zeros,
    "hamiltonian": _flow_hamiltonian,
    "nepsilon": _flow_nepsilon,
    "harmonic": _flow_harmonic,
}


@app.command("lct")
def lct_cmd(
    terms: list[str] = typer.Argument(..., help="Divisor terms COEFF@POINT, e.g. 1/2@0 1@inf."),
    degree: int = typer.Option(0, "--global-degree", help="Also probe the global lct of a degree-e bundle on P^1."),
    samples: int = typer.Option(100, "--samples", help="Random sections for the global probe."),
    seed: int = typer.Option(0, "--seed"),
):
    """Exact log canonical threshold of a divisor on a curve."""
    with _guarded():
        parsed = []
        for term in terms:
            coeff, sep, point = term.partition("@")
            if not sep:
                raise ValueError(f"divisor term {term!r} is not of the form COEFF@POINT")
            parsed.append((point, as_fraction(coeff)))
        divisor = CurveDivisor.from_pairs(parsed)
        threshold = stability.lct_curve_divisor(divisor)
        klt = stability.is_klt_divisor(divisor)
        glob = None
        if degree:
            glob = stability.global_lct_probe(LogPairCurve.bare(), degree, samples, seed_streams(seed, 1)[0])
    shown = "inf" if threshold == math.inf else str(threshold)
    console.print(f"lct = [bold]{shown}[/], klt = {'[green]yes[/]' if klt else '[red]no[/]'}")
    if glob is not None:
        console.print(f"global lct (degree {degree}) = {glob.exact}, sampled minimum {glob.minimum}")
