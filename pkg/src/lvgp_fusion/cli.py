"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/schema error, 3 numerical failure.
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import click
import numpy as np

from . import benchmarks
from .dataset import MultiSourceDataset, load_csv, read_schema, write_schema
from .errors import DataError, NumericalError, SchemaError, UnknownLevelError
from .evaluation import (
    FoldError,
    cv_report_export,
    fit_model,
    parity_export,
    read_surface_spec,
    run_cv,
    surface_export,
)
from .gp import FitOptions, predict
from .kernel import DEFAULT_NUGGET
from .lvgp import LatentMap, LVGPModel, filter_sources, latent_map, predict_lvgp
from .modelfile import load_model, save_model

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, FoldError) and exc.__cause__ is not None:
        return _exit_code(exc.__cause__)
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    return EXIT_DATA


class _Group(click.Group):
    def main(self, args=None, prog_name=None, complete_var=None, standalone_mode=True, **extra):
        try:
            rv = super().main(args, prog_name, complete_var, standalone_mode=False, **extra)
        except click.exceptions.Exit as exc:
            sys.exit(exc.exit_code)
        except (click.UsageError, click.BadParameter) as exc:
            exc.show()
            sys.exit(EXIT_USAGE)
        except click.ClickException as exc:
            exc.show()
            sys.exit(EXIT_DATA)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_USAGE)
        except (DataError, NumericalError, FoldError, OSError, ValueError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(_exit_code(exc))
        sys.exit(rv if isinstance(rv, int) else 0)


def _seed_option(f):
    return click.option("--seed", type=int, default=0, show_default=True, help="Seed for all random draws.")(f)


def _fit_options(f):
    f = click.option("--nugget", type=float, default=DEFAULT_NUGGET, show_default=True)(f)
    f = click.option("--restarts", type=int, default=8, show_default=True)(f)
    return _seed_option(f)


def _load(data: str, schema: str) -> MultiSourceDataset:
    return load_csv(data, read_schema(schema))


def _pairs(values: tuple[str, ...], option: str) -> dict[str, int]:
    out = {}
    for item in values:
        key, sep, val = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected SOURCE=COUNT, got {item!r}", param_hint=option)
        try:
            out[key.strip()] = int(val)
        except ValueError:
            raise click.BadParameter(f"count must be an integer in {item!r}", param_hint=option) from None
    return out


@click.group(cls=_Group)
def cli():
    """Source-aware GP data fusion with latent embeddings of categorical inputs."""


@cli.command()
@click.argument("family", type=click.Choice(["parabola", "ackley"]))
@_seed_option
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--ground-train", type=int, default=None, help="Ground-source training count.")
@click.option("--train-count", multiple=True, metavar="SOURCE=N", help="Override a source's training count.")
@click.option("--test-count", multiple=True, metavar="SOURCE=N", help="Override a source's testing count.")
@click.option("--design", type=click.Choice(["grid", "uniform"]), default="grid", show_default=True,
              help="Parabola training design.")
def benchmark(family, seed, out_dir, ground_train, train_count, test_count, design):
    """Write train.csv, test.csv and schema.cfg for a synthetic family."""
    train_counts = _pairs(train_count, "--train-count")
    if ground_train is not None:
        train_counts["ground"] = ground_train
    test_counts = _pairs(test_count, "--test-count")
    if family == "parabola":
        train, test = benchmarks.generate_parabola(seed, train_counts, test_counts, design=design)
    else:
        train, test = benchmarks.generate_ackley(seed, train_counts, test_counts)
    paths = benchmarks.write_benchmark(train, test, out_dir)
    click.echo(f"train: {train.n} rows {train.source_counts()} -> {paths['train']}")
    click.echo(f"test: {test.n} rows {test.source_counts()} -> {paths['test']}")
    click.echo(f"schema -> {paths['schema']}")


@cli.command()
@click.argument("kind", type=click.Choice(["gp", "lvgp"]))
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", type=click.Path(exists=True, dir_okay=False), required=True)
@_fit_options
@click.option("--out", "model_out", type=click.Path(dir_okay=False), required=True)
def fit(kind, data, schema, seed, restarts, nugget, model_out):
    """Fit a model and write a self-contained model file."""
    ds = _load(data, schema)
    if kind == "gp" and ds.schema.categorical:
        click.echo(f"warning: gp ignores categorical column(s) {', '.join(ds.schema.categorical)}", err=True)
    model = fit_model(ds, kind, FitOptions(restarts=restarts, seed=seed, nugget=nugget))
    save_model(model, model_out)
    meta = model.meta
    if "best_objective" in meta:
        click.echo(f"best objective {meta['best_objective']!r} (restart {meta['best_restart']})")
        for i, (f0, f1, nit) in enumerate(zip(meta["restart_initial"], meta["restart_final"], meta["restart_iterations"])):
            click.echo(f"  restart {i}: {f0:.6g} -> {f1:.6g} in {nit} iterations")
    else:
        click.echo("constant response: model predicts the constant with zero variance")
    click.echo(f"model -> {model_out}")


def _read_points(path: str, model) -> tuple[np.ndarray, dict[str, list[str]]]:
    schema = model.schema
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        reader.fieldnames = header
        rows = list(reader)
    needed = list(schema.numeric_inputs)
    if isinstance(model, LVGPModel):
        needed += list(schema.categorical)
    missing = [c for c in needed if c not in header]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    X = np.empty((len(rows), len(schema.numeric_inputs)))
    for i, row in enumerate(rows):
        for j, name in enumerate(schema.numeric_inputs):
            try:
                X[i, j] = float(row[name])
            except ValueError:
                raise DataError(f"row {i}: cannot parse {row[name]!r} in column {name!r}") from None
    levels = {name: [row[name].strip() for row in rows] for name in schema.categorical if name in header}
    return X, levels


@cli.command("predict")
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "input_csv", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), required=True)
def predict_cmd(model_file, input_csv, out_csv):
    """Predict mean and std (original units) for every input row."""
    model = load_model(model_file)
    X, levels = _read_points(input_csv, model)
    if len(X) == 0:
        mean = var = np.zeros(0)
    elif isinstance(model, LVGPModel):
        mean, var = predict_lvgp(model, X, levels)
    else:
        mean, var = predict(model, X)
    with open(out_csv, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mean", "std"])
        for m, v in zip(mean, var):
            w.writerow([repr(float(m)), repr(float(np.sqrt(v)))])
    click.echo(f"{len(mean)} predictions -> {out_csv}")


@cli.command()
@click.argument("kind", type=click.Choice(["gp", "lvgp"]))
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--k", type=int, default=5, show_default=True)
@_fit_options
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def cv(kind, data, schema, k, seed, restarts, nugget, out_dir):
    """Stratified k-fold cross-validation; writes cv_report.csv and parity.csv."""
    ds = _load(data, schema)
    report = run_cv(ds, kind, k, seed, FitOptions(restarts=restarts, seed=seed, nugget=nugget))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cv_report_export(report, out / "cv_report.csv")
    parity_export(report, out / "parity.csv")
    for i, (a, b) in enumerate(zip(report.fold_train_nrmse, report.fold_cv_nrmse)):
        click.echo(f"fold {i}: train NRMSE {a:.6g}  CV NRMSE {b:.6g}")
    click.echo(f"mean training NRMSE (per-fold average) {report.mean_train_nrmse:.6g}")
    click.echo(f"mean CV NRMSE {report.mean_cv_nrmse:.6g}")
    click.echo(f"reports -> {out}")


def write_latent_csv(lm: LatentMap, path) -> None:
    D = lm.D if lm.reference is not None else {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["variable", "level", "z1", "z2", "D"])
        for lv, (z1, z2) in zip(lm.levels, lm.coords):
            w.writerow([lm.variable, lv, repr(float(z1)), repr(float(z2)), repr(D[lv]) if lv in D else ""])


def read_latent_csv(path, variable: str | None = None) -> LatentMap:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{path}: no latent rows")
    variables = list(dict.fromkeys(r["variable"] for r in rows))
    if variable is None:
        if len(variables) != 1:
            raise SchemaError(f"{path}: several variables {variables}; choose one")
        variable = variables[0]
    rows = [r for r in rows if r["variable"] == variable]
    if not rows:
        raise SchemaError(f"{path}: no rows for variable {variable!r}")
    return LatentMap(variable, [r["level"] for r in rows], [[float(r["z1"]), float(r["z2"])] for r in rows])


@cli.command()
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--variable", default=None, help="Categorical variable (default: the source column).")
@click.option("--reference", default=None, help="Level to place at the origin.")
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), required=True)
def latent(model_file, variable, reference, out_csv):
    """Export latent coordinates (and D when a reference is given)."""
    model = load_model(model_file)
    if not isinstance(model, LVGPModel):
        raise SchemaError("gp models have no latent variables")
    variable = variable or model.schema.source_column
    if variable is None:
        raise click.UsageError("--variable is required when the model has no source column")
    lm = latent_map(model, variable, reference)
    write_latent_csv(lm, out_csv)
    for lv, (z1, z2) in zip(lm.levels, lm.coords):
        d = f"  D={lm.D[lv]:.6g}" if reference is not None else ""
        click.echo(f"{lv}: ({z1:.6g}, {z2:.6g}){d}")


@cli.command("filter")
@click.option("--data", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--schema", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--latent", "latent_csv", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--reference", required=True)
@click.option("--threshold", type=float, required=True)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), required=True)
@click.option("--schema-out", type=click.Path(dir_okay=False), default=None,
              help="Also write a schema whose source levels are the retained ones.")
def filter_cmd(data, schema, latent_csv, reference, threshold, out_csv, schema_out):
    """Keep only sources within THRESHOLD dissimilarity of REFERENCE."""
    ds = _load(data, schema)
    lm = read_latent_csv(latent_csv, ds.schema.source_column)
    if reference not in lm.levels:
        raise UnknownLevelError(lm.variable, reference)
    kept = filter_sources(ds, lm.recentered(reference), threshold)
    kept.to_csv(out_csv)
    if schema_out:
        write_schema(kept.schema, schema_out)
    for src, count in kept.source_counts().items():
        click.echo(f"{src}: {count} rows")
    click.echo(f"{kept.n} of {ds.n} rows -> {out_csv}")


@cli.command()
@click.option("--model", "model_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--spec", "spec_file", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_csv", type=click.Path(dir_okay=False), required=True)
def surface(model_file, spec_file, out_csv):
    """Export a response-surface grid of predictive mean and std."""
    model = load_model(model_file)
    spec = read_surface_spec(spec_file)
    surface_export(model, spec, out_csv)
    n = int(np.prod([s.steps for s in spec.sweeps]))
    click.echo(f"{n} grid points -> {out_csv}")


def main():
    cli()


if __name__ == "__main__":
    main()
