"""CLI entry point for the sphgse solvers."""

from __future__ import annotations

import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal

import click
from dotenv import load_dotenv

from sphgse.config import (
    BETA_LADDER,
    DEFAULT_GRID,
    DEFAULT_SEED,
    FINITE_BETA_GRID,
    MIN_SOLVER_GRID,
    STALL_TOL,
)
from sphgse.errors import ConvergenceError, ReductionInconclusive, ValidationError

# Load .env so SPHGSE_THREADS can be set per checkout.
load_dotenv()

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CONVERGENCE = 3
EXIT_INCONCLUSIVE = 4

Command = Literal[
    "solve", "classify", "sweep-2p", "finite-beta", "gamma-check", "duality-check", "profile"
]
OutputFormat = Literal["json", "csv"]
SolveMethod = Literal["auto", "grid", "ansatz"]

TABLE_COLUMNS = ("t", "phi", "eta", "xi", "eta_minus_xi", "d")


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs."""

    command: Command
    model_path: Path | None = None
    h: float = 0.0
    beta: float | None = None
    grid: int | None = None
    tol: float = STALL_TOL
    out: Path | None = None
    fmt: OutputFormat = "json"
    seed: int = DEFAULT_SEED
    method: SolveMethod = "auto"
    p: int = 4
    mu_grid: tuple[float, ...] = ()
    betas: tuple[float, ...] = BETA_LADDER
    ansatz_path: Path | None = None

    def __post_init__(self) -> None:
        if self.h < 0:
            raise ValidationError(f"h must be >= 0, got {self.h}", invariant="h >= 0")
        if self.grid is not None and self.grid < MIN_SOLVER_GRID:
            raise ValidationError(
                f"grid must be >= {MIN_SOLVER_GRID}, got {self.grid}", invariant="G >= 500"
            )
        if self.command == "finite-beta" and (self.beta is None or not self.beta > 0):
            raise ValidationError("finite-beta needs --beta > 0", invariant="beta > 0")
        if self.command in ("classify", "sweep-2p") and self.h != 0:
            raise ValidationError(f"{self.command} requires h = 0", invariant="h = 0")
        if self.command == "duality-check" and self.ansatz_path is None:
            raise ValidationError("duality-check needs --ansatz", invariant="ansatz")
        if self.command != "sweep-2p" and self.model_path is None:
            raise ValidationError(f"{self.command} needs --model", invariant="model")


# ---------------------------------------------------------------------------
# Command bodies
# ---------------------------------------------------------------------------


def _model(config: RunConfig) -> Any:
    from sphgse.model import read_model

    assert config.model_path is not None
    return read_model(config.model_path)


def _solve(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.generators import table_rows
    from sphgse.model import sign_intervals
    from sphgse.solver import ansatz_minimize, grid_minimize

    model = _model(config)
    G = config.grid or DEFAULT_GRID
    method = config.method
    if method == "auto":
        method = "ansatz" if config.h == 0 else "grid"

    if method == "ansatz":
        try:
            result = ansatz_minimize(model, sign_intervals(model), config.h, seed=config.seed, G=G)
        except ReductionInconclusive as e:
            if config.method == "ansatz":
                raise
            logger.warning("structured reduction inconclusive (%s); using the grid solver", e)
            result = grid_minimize(model, config.h, G, config.tol)
    else:
        result = grid_minimize(model, config.h, G, config.tol)

    data = result.to_dict()
    if not result.method.startswith("grid"):
        check = grid_minimize(model, config.h, max(G // 4, MIN_SOLVER_GRID), config.tol)
        data["cross_check"] = {
            "method": check.method,
            "G": check.phi.size,
            "GSE": check.gse,
            "difference": result.gse - check.gse,
        }
    return data, table_rows(result.table())


def _classify(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.onersb import classify_2p, z_sign_changes

    model = _model(config)
    result = classify_2p(model)
    data = result.to_dict()
    z = z_sign_changes(model, result.solution)
    data["z_sign_changes"] = z.sign_changes
    data["z_roots"] = list(z.roots)
    data["model"] = model.to_dict()
    return data, [data]


def _sweep(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.solver import sweep_2p

    mus = config.mu_grid or tuple(i / 100 for i in range(100))
    table = sweep_2p(config.p, mus)
    return table.to_dict(), [row.as_csv_row() for row in table.rows]


def _finite_beta(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.solver import finite_beta_minimize

    model = _model(config)
    assert config.beta is not None
    fb = finite_beta_minimize(model, config.beta, config.h, config.grid or FINITE_BETA_GRID)
    rows = [
        {"t": t, "cdf": f, "rescaled_density": r}
        for t, f, r in zip(fb.mu.grid, fb.mu.cdf, fb.rescaled_density, strict=True)
    ]
    return fb.to_dict(), rows


def _gamma(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.solver import gamma_check

    model = _model(config)
    reports = gamma_check(model, config.betas, config.h, config.grid or FINITE_BETA_GRID)
    rows = [r.to_dict() for r in reports]
    return {"model": model.to_dict(), "h": config.h, "rows": rows}, rows


def _duality(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    from sphgse.functionals import certificate_record, duality_gap
    from sphgse.generators import table_rows
    from sphgse.order_param import read_ansatz
    from sphgse.solver import SolveResult

    model = _model(config)
    assert config.ansatz_path is not None
    ansatz = read_ansatz(config.ansatz_path, model)
    G = config.grid or DEFAULT_GRID
    data = certificate_record(duality_gap(ansatz, model, config.h, G))
    result = SolveResult.build(ansatz, model, config.h, 0, "duality-check", G)
    return data, table_rows(result.table())


def _profile(config: RunConfig) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    import numpy as np

    from sphgse.generators import table_rows
    from sphgse.model import dfrak, eval_model, sign_intervals

    model = _model(config)
    profile = sign_intervals(model)
    t = np.linspace(0.0, 1.0, (config.grid or DEFAULT_GRID) + 1)
    ok = np.asarray(eval_model(model, t, 2)) > 0
    d = np.full_like(t, np.nan)
    if np.any(ok):
        d[ok] = dfrak(model, t[ok])
    rows = table_rows({"t": t, "d": d})
    return {"model": model.to_dict(), "profile": profile.to_dict()}, rows


_COMMANDS = {
    "solve": _solve,
    "classify": _classify,
    "sweep-2p": _sweep,
    "finite-beta": _finite_beta,
    "gamma-check": _gamma,
    "duality-check": _duality,
    "profile": _profile,
}

_CSV_COLUMNS = {
    "solve": TABLE_COLUMNS,
    "duality-check": TABLE_COLUMNS,
    "classify": (
        "class",
        "y",
        "m",
        "c",
        "replicon",
        "purelike_margin",
        "aba",
        "GSE",
        "gap",
        "obstacle_margin",
        "argmin",
        "certified",
    ),
    "finite-beta": ("t", "cdf", "rescaled_density"),
    "gamma-check": (
        "beta",
        "lhs",
        "rhs",
        "sup_distance",
        "atom_estimate",
        "atom_target",
        "reliable",
        "free_energy",
        "GSE",
    ),
    "profile": ("t", "d"),
}


def run(config: RunConfig) -> int:
    """Execute one command and write its artifact; returns the exit code."""
    from sphgse.generators import ArtifactWriter
    from sphgse.solver.sweep import SWEEP_COLUMNS

    writer = ArtifactWriter(config.out)
    try:
        data, rows = _COMMANDS[config.command](config)
    except ValidationError as e:
        tag = f" [{e.invariant}]" if e.invariant else ""
        click.echo(f"Validation error{tag}: {e}", err=True)
        return EXIT_VALIDATION
    except ConvergenceError as e:
        click.echo(f"Did not converge after {e.iterations} iterations: {e}", err=True)
        return EXIT_CONVERGENCE
    except ReductionInconclusive as e:
        click.echo(
            f"Reduction inconclusive: best gap {e.best_gap:.3g}, "
            f"best margin {e.best_margin:.3g}",
            err=True,
        )
        return EXIT_INCONCLUSIVE
    except ValueError as e:
        click.echo(f"Validation error: {e}", err=True)
        return EXIT_VALIDATION

    if config.fmt == "csv":
        columns = SWEEP_COLUMNS if config.command == "sweep-2p" else _CSV_COLUMNS[config.command]
        text = writer.csv(columns, rows)
        if config.command == "sweep-2p" and config.out is not None:
            writer.json(
                {"p": data["p"], "boundaries": data["boundaries"]},
                config.out.with_suffix(".boundaries.json"),
            )
    else:
        text = writer.json(data)

    if config.out is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"Wrote {config.out}")
    if config.command == "sweep-2p":
        for name, values in data["boundaries"].items():
            for mu in values:
                click.echo(f"  {name} boundary at mu = {mu:.6f}", err=config.out is None)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Click surface
# ---------------------------------------------------------------------------


_model_option = click.option(
    "--model",
    "model_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Model JSON file",
)

_out_option = click.option(
    "--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Output file"
)
_format_option = click.option(
    "--format", "fmt", type=click.Choice(["json", "csv"]), default="json", show_default=True
)
_h_option = click.option("--h", "h", type=float, default=0.0, show_default=True, help="Field")
_grid_option = click.option("--grid", type=int, default=None, help="Number of grid cells")


def _dispatch(**kwargs: Any) -> None:
    try:
        config = RunConfig(**kwargs)
    except ValidationError as e:
        click.echo(f"Validation error [{e.invariant}]: {e}", err=True)
        sys.exit(EXIT_VALIDATION)
    sys.exit(run(config))


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Log solver progress")
def cli(verbose: bool) -> None:
    """sphgse - ground-state energies of spherical mixed p-spin glasses."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@_model_option
@_h_option
@_grid_option
@click.option("--tol", type=float, default=STALL_TOL, show_default=True)
@click.option(
    "--method", type=click.Choice(["auto", "grid", "ansatz"]), default="auto", show_default=True
)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@_out_option
@_format_option
def solve(**kwargs: Any) -> None:
    """Minimize P and certify the result with the dual obstacle problem."""
    _dispatch(command="solve", **kwargs)


@cli.command()
@_model_option
@_h_option
@_out_option
@_format_option
def classify(**kwargs: Any) -> None:
    """Classify a 2+p model at zero field."""
    _dispatch(command="classify", **kwargs)


@cli.command("sweep-2p")
@click.option("--p", type=int, default=4, show_default=True, help="Degree of the second term")
@click.option("--mu", "mu_grid", type=float, multiple=True, help="Values of mu (repeatable)")
@_out_option
@click.option(
    "--format", "fmt", type=click.Choice(["json", "csv"]), default="csv", show_default=True
)
def sweep_2p(**kwargs: Any) -> None:
    """Classify mu t^2 + (1 - mu) t^p over a grid of mu and locate the flag boundaries."""
    _dispatch(command="sweep-2p", **kwargs)


@cli.command("finite-beta")
@_model_option
@click.option("--beta", type=float, required=True, help="Inverse temperature")
@_h_option
@_grid_option
@_out_option
@_format_option
def finite_beta(**kwargs: Any) -> None:
    """Minimize the finite-temperature functional at one beta."""
    _dispatch(command="finite-beta", **kwargs)


@cli.command("gamma-check")
@_model_option
@click.option("--beta", "betas", type=float, multiple=True, help="Inverse temperatures")
@_h_option
@_grid_option
@_out_option
@_format_option
def gamma_check(betas: tuple[float, ...], **kwargs: Any) -> None:
    """Compare finite-beta minimizers with the ground state along a beta ladder."""
    _dispatch(command="gamma-check", betas=betas or BETA_LADDER, **kwargs)


@cli.command("duality-check")
@_model_option
@click.option(
    "--ansatz",
    "ansatz_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="Ansatz JSON file",
)
@_h_option
@_grid_option
@_out_option
@_format_option
def duality_check(**kwargs: Any) -> None:
    """Build the certificate of a given order parameter."""
    _dispatch(command="duality-check", **kwargs)


@cli.command()
@_model_option
@_grid_option
@_out_option
@_format_option
def profile(**kwargs: Any) -> None:
    """Write the sign profile of the structure function and its table."""
    _dispatch(command="profile", **kwargs)
