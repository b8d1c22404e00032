"""Command-line interface for trade-tails.

This module provides the CLI for computing analytic tail reports, drawing
Monte Carlo samples of realized log-prices and validating one against
the other.
"""

import csv
import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

import click
import numpy as np

from trade_tails import __version__
from trade_tails.config import RunConfig, config_hash, load_config, with_overrides
from trade_tails.errors import ConfigError, NoSolutionError, TradeTailsError
from trade_tails.montecarlo import run_batch
from trade_tails.process import mgf_at_time
from trade_tails.tail_analysis import LOWER, tail_report, trade_mgf
from trade_tails.tailstat import survival_table, validate as validate_report
from trade_tails.timing import IIM, trade_time_density

logger = logging.getLogger(__name__)


class ConfigUsageError(click.ClickException):
    exit_code = 2


class AnalysisError(click.ClickException):
    exit_code = 3


class ValidationFailed(click.ClickException):
    exit_code = 4


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Turn library errors into click exceptions with the right exit code."""
    try:
        yield
    except ConfigError as exc:
        raise ConfigUsageError(f"Invalid config: {exc}")
    except NoSolutionError as exc:
        raise AnalysisError(f"No tail exponent: {exc}")
    except (TradeTailsError, ArithmeticError) as exc:
        raise AnalysisError(f"Analysis failed: {exc}")


def _load(
    config_path: Optional[str],
    seed: Optional[int] = None,
    samples: Optional[int] = None,
    tolerance_json: Optional[str] = None,
) -> RunConfig:
    with _reported_errors():
        config = load_config(config_path)
        return with_overrides(config, seed, samples, tolerance_json)


def _provenance(config: RunConfig) -> Dict[str, Any]:
    return {"version": __version__, "config_hash": config_hash(config)}


def _write_json(document: Dict[str, Any], out: Optional[str]) -> None:
    text = json.dumps(document, indent=2, sort_keys=True)
    if out is None:
        click.echo(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _run_analysis(config: RunConfig):
    with _reported_errors():
        return tail_report(
            config.model,
            config.timing,
            alpha_max=config.analysis.alpha_max,
            side=config.analysis.tail,
        )


config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, readable=True),
    default=None,
    help="Run configuration (JSON or YAML); defaults to $TRADE_TAILS_CONFIG",
)


@click.group()
@click.version_option(version=__version__)
@click.option("--verbose", "-v", is_flag=True, help="Log solver progress to stderr")
def cli(verbose):
    """trade-tails - Tail exponents of realized prices under random trade timing."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )


@click.command()
@config_option
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report JSON here")
@click.option(
    "--table", type=click.Path(dir_okay=False), help="Write the exponent curve CSV here"
)
def analyze(config_path, out, table):
    """Compute the analytic tail report."""
    config = _load(config_path)
    report = _run_analysis(config)
    if not report.uniqueness:
        click.echo(
            "Warning: pole not isolated on the scan grid, Paretian limit unavailable",
            err=True,
        )
    _write_json({**_provenance(config), "report": report.to_dict()}, out)
    if table is not None:
        curve = report.diagnostics["exponent_curve"]
        with open(table, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["alpha", "g"])
            for a, g in zip(curve["alpha"], curve["g"]):
                writer.writerow([f"{a:.17g}", f"{g:.17g}"])
    if out is not None:
        click.echo(
            f"{report.case} {report.side}: alpha={report.alpha:.10g} "
            f"beta={report.beta} scale={report.scale:.10g}"
        )


@click.command()
@config_option
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Sample CSV")
@click.option("--seed", type=int, default=None, help="Override simulation.seed")
@click.option("--samples", type=int, default=None, help="Override simulation.count")
def simulate(config_path, out, seed, samples):
    """Draw realized log-prices X_T with their trade times."""
    config = _load(config_path, seed=seed, samples=samples)
    settings = config.simulation
    with _reported_errors():
        batch = run_batch(
            config.model,
            config.timing,
            count=settings.count,
            seed=settings.seed,
            streams=settings.streams,
        )
    with open(out, "w", newline="") as handle:
        handle.write(
            f"# seed={batch.seed},streams={batch.streams},count={batch.count},"
            f"timing={batch.timing_kind},config_hash={config_hash(config)},"
            f"version={__version__}\n"
        )
        handle.write("x_t,t,stream\n")
        np.savetxt(
            handle,
            np.column_stack([batch.values, batch.times, batch.stream_index]),
            fmt=("%.17g", "%.17g", "%d"),
            delimiter=",",
            newline="\n",
        )
    click.echo(f"Wrote {batch.count} samples to {out}")


@click.command()
@config_option
@click.option("--out", type=click.Path(dir_okay=False), help="Write the summary JSON here")
@click.option(
    "--table", type=click.Path(dir_okay=False), help="Write the (y, y^alpha S(y)) CSV here"
)
@click.option("--seed", type=int, default=None, help="Override simulation.seed")
@click.option("--samples", type=int, default=None, help="Override simulation.count")
@click.option(
    "--tolerance-json",
    default=None,
    help='Override tolerances, e.g. \'{"alpha": 0.05}\'',
)
def validate(config_path, out, table, seed, samples, tolerance_json):
    """Check the analytic report against Monte Carlo tail estimates."""
    config = _load(config_path, seed=seed, samples=samples, tolerance_json=tolerance_json)
    report = _run_analysis(config)
    settings = config.simulation
    with _reported_errors():
        batch = run_batch(
            config.model,
            config.timing,
            count=settings.count,
            seed=settings.seed,
            streams=settings.streams,
        )
        summary = validate_report(report, batch, config.analysis.tolerances)

    for check in summary.checks:
        target = "-" if check.target is None else f"{check.target:.6g}"
        estimate = "-" if check.estimate is None else f"{check.estimate:.6g}"
        click.echo(
            f"{check.name:<16} target={target:<12} estimate={estimate:<12} "
            f"tol={check.tolerance:<6g} {check.verdict.upper()}  {check.reason}"
        )
    if out is not None:
        _write_json(
            {**_provenance(config), "report": report.to_dict(), "validation": summary.to_dict()},
            out,
        )
    if table is not None:
        logs = -batch.values if report.side == LOWER else batch.values
        with _reported_errors():
            log_y, scaled = survival_table(logs, report.alpha, log_scale=True)
        with open(table, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["y", "y_alpha_survival"])
            for ly, value in zip(log_y, scaled):
                writer.writerow([f"{np.exp(ly):.17g}", f"{value:.17g}"])
    if not summary.passed:
        raise ValidationFailed("Validation failed")


@click.command()
@config_option
@click.option("--t", "times", type=float, multiple=True, required=True, help="Trade time")
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
def density(config_path, times, json_output):
    """Evaluate the trade-time density (IIM: probability mass)."""
    config = _load(config_path)
    with _reported_errors():
        try:
            values = trade_time_density(config.timing, list(times))
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--t")
    label = "pmf" if isinstance(config.timing, IIM) else "density"
    if json_output:
        click.echo(
            json.dumps(
                [{"t": t, label: float(v)} for t, v in zip(times, values)], indent=2
            )
        )
    else:
        for t, v in zip(times, values):
            click.echo(f"t={t:<12g} {label}={v:.12g}")


@click.command()
@config_option
@click.option("--s", "points", type=float, multiple=True, required=True, help="Argument s")
@click.option(
    "--time", "horizon", type=float, default=None, help="Fixed horizon t instead of T"
)
@click.option("--json", "json_output", is_flag=True, help="Output in JSON format")
def mgf(config_path, points, horizon, json_output):
    """Evaluate M_T(s) = E[e^{s X_T}] (or M_t(s) with --time)."""
    config = _load(config_path)
    if horizon is not None and not horizon > 0:
        raise click.BadParameter("must be positive", param_hint="--time")
    results = []
    with _reported_errors():
        for s in points:
            if horizon is None:
                value = trade_mgf(config.model, config.timing, s)
            else:
                value = mgf_at_time(config.model, s, horizon)
            results.append({"s": s, "mgf": value})
    if json_output:
        click.echo(json.dumps(results, indent=2))
    else:
        for row in results:
            click.echo(f"s={row['s']:<12g} mgf={row['mgf']:.12g}")


# Register commands
cli.add_command(analyze)
cli.add_command(simulate)
cli.add_command(validate)
cli.add_command(density)
cli.add_command(mgf)


def main():
    cli()


if __name__ == "__main__":
    main()
