"""
lqlab - L^q empirical process laboratory
Command-line entry point
"""

import math
from typing import Any, Callable, Optional

import click
import numpy as np
import structlog
import typer
from rich.console import Console

from lqlab.core.config import settings
from lqlab.core.exceptions import ConfigError, LabError
from lqlab.core.logging import configure_logging
from lqlab.models.applications import RipQuery, RipVerdict, SectionQuery
from lqlab.models.bounds import BoundInputs
from lqlab.models.index_set import IndexSetSpec, Metric
from lqlab.models.process import ProcessConfig
from lqlab.models.run_config import (
    Command,
    RunConfig,
    build_run_config,
    parse_float_list,
    read_config_file,
)
from lqlab.services.applications import (
    dm_upper_bound,
    rip_certify,
    rip_failure_exponent,
    section_diameter,
)
from lqlab.services.bounds import (
    calibrate_constant,
    calibrate_tail_constant,
    evaluate_bound,
    fit_scaling_exponent,
    fit_tail_shape,
    theorem_main_rhs,
)
from lqlab.services.chaining import (
    build_admissible_sequence,
    chain_diagnostics,
    critical_time,
    gamma2_upper_dudley,
    gamma2_upper_from_sequence,
)
from lqlab.services.ensembles import derive_seed, load_design_matrix, sample_batch
from lqlab.services.index_sets import epsilon_net, l2_radius, mean_width
from lqlab.services.process import (
    default_net_eps,
    run_trials,
    search_net,
    single_function_trials,
)
from lqlab.services.reports import DataRow, write_artifacts

logger = structlog.get_logger()
console = Console(stderr=True)

app = typer.Typer(
    name="lqlab",
    help="Numerical experiments on L^q empirical processes.",
    no_args_is_help=True,
    add_completion=False,
)

RunResult = tuple[dict[str, Any], list[DataRow], dict[str, bool]]

# Shared options; None means "not given on the command line"
ConfigOpt = typer.Option(None, "--config", help="Flat key=value config file")
OutOpt = typer.Option(None, "--out", help="Output directory")
SetOpt = typer.Option(None, "--set", help="sphere, ball, l1_ball, sparse_sphere, ellipsoid, origin")
FamilyOpt = typer.Option(None, "--family", help="gaussian, rademacher, bounded_uniform")
DOpt = typer.Option(None, "--d", help="Dimension")
SOpt = typer.Option(None, "--s", help="Sparsity of sparse_sphere")
RadiusOpt = typer.Option(None, "--radius", help="Radius of the index set")
QOpt = typer.Option(None, "--q", help="Exponent q >= 1")
NOpt = typer.Option(None, "--N", help="Sample count")
GridOpt = typer.Option(None, "--N-grid", help="start:stop:xK, start:stop:+K or a list")
TrialsOpt = typer.Option(None, "--trials", help="Independent trials")
SeedOpt = typer.Option(None, "--seed", help="Root seed")
NetEpsOpt = typer.Option(None, "--net-eps", help="Net resolution")
ThreadsOpt = typer.Option(None, "--threads", help="Worker threads")
AssertOpt = typer.Option(False, "--assert", help="Turn acceptance checks into exit codes")
COpt = typer.Option(None, "--C", help="Absolute constant")
UOpt = typer.Option(None, "--u", help="Deviation parameter u (or moment p)")


def _execute(command: Command, config_path: Optional[str], flags: dict[str, Any],
             runner: Callable[[RunConfig], RunResult]) -> None:
    """Build the config, run, write artifacts and map failures to exit codes."""
    configure_logging()
    try:
        file_values = read_config_file(config_path) if config_path else {}
        config = build_run_config(command, file_values, flags)
        logger.info("Starting run", command=command.value, seed=config.seed)
        outputs, rows, checks = runner(config)
        directory = write_artifacts(config, outputs, rows, checks)
    except LabError as exc:
        logger.error("Run failed", command=command.value, error=str(exc))
        console.print(f"[red]error:[/red] {exc}")
        raise typer.Exit(code=2) from exc

    console.print(f"{command.value}: artifacts in {directory}")
    failed = [name for name, ok in checks.items() if not ok]
    if config.assert_checks and failed:
        console.print(f"[red]failed checks:[/red] {', '.join(failed)}")
        raise typer.Exit(code=3)


def _process_config(config: RunConfig, N: int) -> ProcessConfig:
    return ProcessConfig(
        set=config.index_set(),
        ensemble=config.ensemble,
        q=config.q,
        N=N,
        trials=config.trials,
        net_eps=config.net_eps,
        seed=config.seed,
    )


def _theory_inputs(config: RunConfig, N: int, C: Optional[float] = None) -> BoundInputs:
    """Bound inputs in the psi2 metric, computed from the set unless given."""
    index_set = config.index_set()
    gamma2 = config.gamma2
    if gamma2 is None:
        gamma2 = gamma2_upper_dudley(index_set, Metric.PSI2_PROXY, ensemble=config.ensemble).value
    diam = config.diam
    if diam is None:
        diam = config.ensemble.psi2_constant * l2_radius(index_set)
    return BoundInputs(gamma2=gamma2, diam=diam, N=N, q=config.q, u=config.u, C=C or config.C)


def _trial_rows(config: RunConfig, N: int, values: np.ndarray, seeds: list[int],
                statistic: str) -> list[DataRow]:
    return [
        DataRow(trial=i, N=N, d=config.d, q=config.q, statistic=statistic,
                value=float(v), seed=seeds[i])
        for i, v in enumerate(values)
    ]


def _summary_row(config: RunConfig, N: int, statistic: str, value: float) -> DataRow:
    return DataRow(trial=-1, N=N, d=config.d, q=config.q, statistic=statistic,
                   value=float(value), seed=config.seed)


def run_simulate(config: RunConfig) -> RunResult:
    thresholds = parse_float_list(config.thresholds) if config.thresholds else None
    summary = run_trials(_process_config(config, config.N), thresholds, threads=config.threads)
    bound = theorem_main_rhs(_theory_inputs(config, config.N))
    quantiles = [summary.quantiles[k] for k in sorted(summary.quantiles, key=float)]
    outputs = {
        "quantiles": summary.quantiles,
        "tail": summary.tail,
        "values": summary.values,
        "net_size": summary.audits[0].net_size,
        "net_complete": summary.audits[0].net_complete,
        "mean_improvement": float(np.mean([a.improvement for a in summary.audits])),
        "bound": bound,
    }
    checks = {
        "quantiles_monotone": all(a <= b for a, b in zip(quantiles, quantiles[1:])),
        "median_below_bound": summary.quantile(0.5) <= bound.value,
    }
    rows = _trial_rows(config, config.N, summary.values, summary.seeds, "sup_deviation")
    return outputs, rows, checks


def run_bound(config: RunConfig) -> RunResult:
    if config.gamma2 is None or config.diam is None:
        raise ConfigError("bound needs --gamma2 and --diam")
    report = evaluate_bound(config.kind, _theory_inputs(config, config.N))
    rows = [
        _summary_row(config, config.N, "bound", report.value),
        _summary_row(config, config.N, "complexity_gamma", report.terms.complexity_gamma),
        _summary_row(config, config.N, "complexity_mixed", report.terms.complexity_mixed),
        _summary_row(config, config.N, "deviation", report.terms.deviation),
    ]
    return {"bound": report}, rows, {"finite": math.isfinite(report.value)}


def run_scaling(config: RunConfig) -> RunResult:
    pairs = []
    rows: list[DataRow] = []
    for N in config.n_grid():
        summary = run_trials(_process_config(config, N), threads=config.threads)
        pairs.append((N, summary.quantile(0.5)))
        rows += _trial_rows(config, N, summary.values, summary.seeds, "sup_deviation")
    fit = fit_scaling_exponent(pairs)
    rows += [_summary_row(config, N, "median", m) for N, m in pairs]
    checks = {"slope_in_band": -0.65 <= fit.slope <= -0.35}
    return {"fit": fit}, rows, checks


def run_calibrate(config: RunConfig) -> RunResult:
    observed = []
    rows: list[DataRow] = []
    for N in config.n_grid():
        summary = run_trials(_process_config(config, N), threads=config.threads)
        value = float(np.quantile(summary.values, config.level))
        observed.append((_theory_inputs(config, N, C=1.0), value))
        rows += _trial_rows(config, N, summary.values, summary.seeds, "sup_deviation")
        rows.append(_summary_row(config, N, f"quantile_{config.level:g}", value))
    result = calibrate_constant(observed, config.kind)
    checks = {
        "feasible": result.feasible,
        "constant_below_max": result.constant <= config.max_constant,
    }
    return {"calibration": result, "observed": [v for _, v in observed]}, rows, checks


def run_rip(config: RunConfig) -> RunResult:
    batch = load_design_matrix(config.matrix, config.ensemble) if config.matrix else None
    query = RipQuery(
        ensemble=config.ensemble,
        set=config.index_set(),
        q=config.q,
        N=batch.n if batch is not None else config.N,
        radius=config.radius_value(),
        theta=config.theta,
        audit_vectors=config.audit_vectors,
        mc_budget=config.mc_budget,
        seed=config.seed,
    )
    certificate = rip_certify(query, config.window, batch)
    outputs = {
        "certificate": certificate,
        "failure_exponent": rip_failure_exponent(query.N, config.q),
    }
    rows = [
        _summary_row(config, query.N, "worst_lower", certificate.worst_lower),
        _summary_row(config, query.N, "worst_upper", certificate.worst_upper),
    ]
    return outputs, rows, {"certified": certificate.verdict == RipVerdict.CERTIFIED}


def run_sections(config: RunConfig) -> RunResult:
    query = SectionQuery(
        ensemble=config.ensemble, set=config.index_set(), p=config.p, N=config.N,
        trials=config.trials, seed=config.seed,
    )
    K = query.set
    net = search_net(K, max_points=256, seed=query.seed)
    if config.matrix:
        batches = [load_design_matrix(config.matrix, query.ensemble)]
    else:
        batches = [
            sample_batch(query.ensemble, query.N, query.seed, trial)
            for trial in range(query.trials)
        ]
    estimates = [section_diameter(b, K, query.p, net=net, seed=query.seed) for b in batches]
    N = batches[0].n
    ellstar = mean_width(K, config.mc_budget, query.seed)
    bound = dm_upper_bound(ellstar.value, l2_radius(K), N, query.p, config.C)

    values = np.array([e.value for e in estimates])
    if config.matrix:
        seeds = [query.seed]
    else:
        seeds = [derive_seed(query.seed, b.trial) for b in batches]
    rows = _trial_rows(config, N, values, seeds, "section_diameter")
    rows += _trial_rows(config, N, np.array([e.dual_value for e in estimates]), seeds, "dual_value")
    outputs = {
        "q": query.q,
        "values": values,
        "dual_values": [e.dual_value for e in estimates],
        "mean_width": ellstar,
        "dm_bound": bound,
    }
    return outputs, rows, {"below_dm_bound": bool(np.all(values <= bound.value))}


def run_diag(config: RunConfig) -> RunResult:
    K = config.index_set()
    ensemble = config.ensemble
    net = epsilon_net(K, config.net_eps or default_net_eps(K), seed=config.seed,
                      max_points=config.audit_vectors)
    seq = build_admissible_sequence(
        net.points, metric=Metric.PSI2_PROXY, metric_scale=ensemble.psi2_constant
    )
    diagnostics = [chain_diagnostics(seq, i, config.N) for i in range(net.size)]
    rows: list[DataRow] = []
    for i, diag in enumerate(diagnostics):
        rows.append(DataRow(trial=i, N=config.N, d=config.d, q=config.q,
                            statistic="initial_sum", value=diag.initial_sum, seed=config.seed))
        rows.append(DataRow(trial=i, N=config.N, d=config.d, q=config.q,
                            statistic="terminal_sum", value=diag.terminal_sum, seed=config.seed))
    outputs = {
        "critical_time": critical_time(config.N),
        "net_size": net.size,
        "levels": seq.depth,
        "gamma2_sequence": gamma2_upper_from_sequence(seq),
        "gamma2_dudley": gamma2_upper_dudley(K, Metric.PSI2_PROXY, ensemble=ensemble),
        "mean_width": mean_width(K, config.mc_budget, config.seed),
        "max_initial_sum": max(d.initial_sum for d in diagnostics),
        "max_terminal_sum": max(d.terminal_sum for d in diagnostics),
    }
    checks = {
        "partition_identity": all(
            d.initial_sum + d.terminal_sum == d.total for d in diagnostics
        )
    }
    return outputs, rows, checks


def _default_thresholds() -> list[float]:
    return [round(0.02 * k, 2) for k in range(1, 26)]


def run_bernstein(config: RunConfig) -> RunResult:
    e1 = np.zeros(config.d)
    e1[0] = 1.0
    deviations = single_function_trials(
        config.ensemble, e1, config.q, config.N, config.trials, config.seed
    )
    thresholds = parse_float_list(config.thresholds) if config.thresholds else _default_thresholds()
    tail = [float(np.mean(np.abs(deviations) > x)) for x in thresholds]
    calibration = calibrate_tail_constant(thresholds, tail, config.N, config.q)
    try:
        shape = fit_tail_shape(thresholds, tail, config.q)
    except LabError:
        shape = None
    rows = [
        DataRow(trial=i, N=config.N, d=config.d, q=config.q, statistic="deviation",
                value=float(v), seed=config.seed)
        for i, v in enumerate(deviations)
    ]
    rows += [_summary_row(config, config.N, f"tail_{x:g}", p) for x, p in zip(thresholds, tail)]
    outputs = {"thresholds": thresholds, "tail": tail, "calibration": calibration,
               "tail_shape": shape}
    checks = {
        "constant_below_max": calibration.constant <= config.max_constant,
        "tail_shape_fit": shape is not None and shape.r_squared >= 0.9,
    }
    return outputs, rows, checks


def run_width(config: RunConfig) -> RunResult:
    dims = [int(d) for d in parse_float_list(config.dims)]
    ratios = {}
    rows: list[DataRow] = []
    for d in dims:
        sphere = IndexSetSpec.sphere(d, config.radius)
        dudley = gamma2_upper_dudley(sphere).value
        width = mean_width(sphere, config.mc_budget, config.seed).value
        ratios[str(d)] = dudley / width
        for statistic, value in (("dudley", dudley), ("mean_width", width),
                                 ("ratio", dudley / width)):
            rows.append(DataRow(trial=-1, N=config.N, d=d, q=config.q,
                                statistic=statistic, value=value, seed=config.seed))
    values = list(ratios.values())
    checks = {
        "ratios_in_band": all(0.3 <= r <= 30.0 for r in values),
        "ratio_spread_below_2": max(values) / min(values) < 2.0,
    }
    return {"ratios": ratios}, rows, checks


def _flags(**kwargs: Any) -> dict[str, Any]:
    return {key: value for key, value in kwargs.items() if value is not None}


@app.command()
def simulate(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    q: Optional[float] = QOpt, N: Optional[int] = NOpt, trials: Optional[int] = TrialsOpt,
    seed: Optional[int] = SeedOpt, net_eps: Optional[float] = NetEpsOpt,
    thresholds: Optional[str] = typer.Option(None, "--thresholds", help="Tail thresholds"),
    C: Optional[float] = COpt, u: Optional[float] = UOpt,
    threads: Optional[int] = ThreadsOpt, assert_: bool = AssertOpt,
) -> None:
    """Sup-deviation trials over one index set."""
    _execute(Command.SIMULATE, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, q=q, N=N, trials=trials,
        seed=seed, net_eps=net_eps, thresholds=thresholds, C=C, u=u, threads=threads,
        assert_checks=assert_ or None), run_simulate)


@app.command()
def bound(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    gamma2: Optional[float] = typer.Option(None, "--gamma2", help="gamma_2 of the class"),
    diam: Optional[float] = typer.Option(None, "--diam", help="psi2 diameter of the class"),
    N: Optional[int] = NOpt, q: Optional[float] = QOpt, u: Optional[float] = UOpt,
    C: Optional[float] = COpt,
    kind: Optional[str] = typer.Option(None, "--kind", help="main or moment"),
    assert_: bool = AssertOpt,
) -> None:
    """Evaluate a closed-form bound."""
    _execute(Command.BOUND, config, _flags(
        out=out, gamma2=gamma2, diam=diam, N=N, q=q, u=u, C=C, kind=kind,
        assert_checks=assert_ or None), run_bound)


@app.command()
def scaling(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    q: Optional[float] = QOpt, N_grid: Optional[str] = GridOpt,
    trials: Optional[int] = TrialsOpt, seed: Optional[int] = SeedOpt,
    net_eps: Optional[float] = NetEpsOpt, threads: Optional[int] = ThreadsOpt,
    assert_: bool = AssertOpt,
) -> None:
    """Fit the N-exponent of the median sup deviation."""
    _execute(Command.SCALING, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, q=q, N_grid=N_grid,
        trials=trials, seed=seed, net_eps=net_eps, threads=threads,
        assert_checks=assert_ or None), run_scaling)


@app.command()
def calibrate(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    q: Optional[float] = QOpt, N_grid: Optional[str] = GridOpt,
    trials: Optional[int] = TrialsOpt, seed: Optional[int] = SeedOpt,
    u: Optional[float] = UOpt,
    level: Optional[float] = typer.Option(None, "--level", help="Quantile level"),
    kind: Optional[str] = typer.Option(None, "--kind", help="main or moment"),
    max_constant: Optional[float] = typer.Option(None, "--max-constant",
                                                 help="Largest acceptable constant"),
    threads: Optional[int] = ThreadsOpt, assert_: bool = AssertOpt,
) -> None:
    """Smallest bound constant dominating observed quantiles."""
    _execute(Command.CALIBRATE, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, q=q, N_grid=N_grid,
        trials=trials, seed=seed, u=u, level=level, kind=kind, max_constant=max_constant,
        threads=threads, assert_checks=assert_ or None), run_calibrate)


@app.command()
def rip(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    q: Optional[float] = QOpt, N: Optional[int] = NOpt, seed: Optional[int] = SeedOpt,
    R: Optional[str] = typer.Option(None, "--R", help="L^q sphere radius or 'solve'"),
    theta: Optional[float] = typer.Option(None, "--theta", help="Fixed-point constant"),
    window: Optional[float] = typer.Option(None, "--window", help="Ratio window c"),
    audit_vectors: Optional[int] = typer.Option(None, "--audit-vectors"),
    mc_budget: Optional[int] = typer.Option(None, "--mc-budget"),
    matrix: Optional[str] = typer.Option(None, "--matrix", help="CSV design matrix"),
    assert_: bool = AssertOpt,
) -> None:
    """Certify the restricted isometry ratio window on a cone."""
    _execute(Command.RIP, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, q=q, N=N, seed=seed,
        R=R, theta=theta, window=window, audit_vectors=audit_vectors, mc_budget=mc_budget,
        matrix=matrix, assert_checks=assert_ or None), run_rip)


@app.command()
def sections(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    p: Optional[float] = typer.Option(None, "--p", help="p in (1, inf]"),
    N: Optional[int] = NOpt, trials: Optional[int] = TrialsOpt,
    seed: Optional[int] = SeedOpt, C: Optional[float] = COpt,
    mc_budget: Optional[int] = typer.Option(None, "--mc-budget"),
    matrix: Optional[str] = typer.Option(None, "--matrix", help="CSV design matrix"),
    assert_: bool = AssertOpt,
) -> None:
    """l_p diameter of random sections."""
    _execute(Command.SECTIONS, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, p=p, N=N, trials=trials,
        seed=seed, C=C, mc_budget=mc_budget, matrix=matrix, assert_checks=assert_ or None),
        run_sections)


@app.command()
def diag(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    set: Optional[str] = SetOpt, family: Optional[str] = FamilyOpt,
    d: Optional[int] = DOpt, s: Optional[int] = SOpt, radius: Optional[float] = RadiusOpt,
    q: Optional[float] = QOpt, N: Optional[int] = NOpt, seed: Optional[int] = SeedOpt,
    net_eps: Optional[float] = NetEpsOpt,
    audit_vectors: Optional[int] = typer.Option(None, "--audit-vectors",
                                                help="Point budget of the working net"),
    mc_budget: Optional[int] = typer.Option(None, "--mc-budget"),
    assert_: bool = AssertOpt,
) -> None:
    """Chaining estimates and chain splits at the critical time."""
    _execute(Command.DIAG, config, _flags(
        out=out, set=set, family=family, d=d, s=s, radius=radius, q=q, N=N, seed=seed,
        net_eps=net_eps, audit_vectors=audit_vectors, mc_budget=mc_budget,
        assert_checks=assert_ or None), run_diag)


@app.command()
def bernstein(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    family: Optional[str] = FamilyOpt, d: Optional[int] = DOpt,
    q: Optional[float] = QOpt, N: Optional[int] = NOpt, trials: Optional[int] = TrialsOpt,
    seed: Optional[int] = SeedOpt,
    thresholds: Optional[str] = typer.Option(None, "--thresholds", help="Tail thresholds"),
    max_constant: Optional[float] = typer.Option(None, "--max-constant"),
    assert_: bool = AssertOpt,
) -> None:
    """Single-function deviation tails against the Bernstein shape."""
    _execute(Command.BERNSTEIN, config, _flags(
        out=out, family=family, d=d, q=q, N=N, trials=trials, seed=seed,
        thresholds=thresholds, max_constant=max_constant, assert_checks=assert_ or None),
        run_bernstein)


@app.command()
def width(
    config: Optional[str] = ConfigOpt, out: Optional[str] = OutOpt,
    dims: Optional[str] = typer.Option(None, "--dims", help="Comma-separated dimensions"),
    radius: Optional[float] = RadiusOpt, seed: Optional[int] = SeedOpt,
    mc_budget: Optional[int] = typer.Option(None, "--mc-budget"),
    assert_: bool = AssertOpt,
) -> None:
    """Dudley gamma_2 estimate against Gaussian mean width on spheres."""
    _execute(Command.WIDTH, config, _flags(
        out=out, dims=dims, radius=radius, seed=seed, mc_budget=mc_budget,
        assert_checks=assert_ or None), run_width)


def run_command(argv: list[str]) -> int:
    """Run the CLI on ``argv`` and return its exit code."""
    try:
        result = app(args=argv, prog_name=settings.APP_NAME, standalone_mode=False)
    except typer.Exit as exc:
        return exc.exit_code
    except click.exceptions.UsageError as exc:
        exc.show()
        return 2
    except click.exceptions.Abort:
        return 1
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    app()
