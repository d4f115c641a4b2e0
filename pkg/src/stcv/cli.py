"""Command-line interface.

Verbs: simulate, evaluate, study, case-study, plot, cond-var.
Exit codes: 0 full success, 2 partial failures (some rows errored), 1 fatal.
"""

from __future__ import annotations

import csv
import os

import click

from . import config as cfgmod
from .data import read_dataset_csv, write_dataset_csv
from .errors import cv_estimate, report_csv_rows
from .models import ModelSpec
from .plots import emit_plots
from .simulate import simulate_replicate
from .study import (
    AGGREGATE_HEADER,
    FOLDS_HEADER,
    make_case_study_fixture,
    run_case_study,
    run_condvar,
    run_study,
)


def _print_schema(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(cfgmod.CONFIG_SCHEMA, nl=False)
    ctx.exit(0)


@click.group()
@click.option("--seed", type=int, default=None, help="Master seed override.")
@click.option("--out", type=click.Path(), default="stcv_out", help="Output directory.")
@click.option("--threads", type=int, default=1, help="Worker processes.")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="INI configuration file.")
@click.option("--print-config-schema", is_flag=True, callback=_print_schema,
              expose_value=False, is_eager=True,
              help="Print the documented configuration schema and exit.")
@click.pass_context
def main(ctx, seed, out, threads, config_path):
    """Space-time cross-validation study harness."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, out=out, threads=threads, config_path=config_path)


@main.command()
@click.option("--scenario", type=click.IntRange(1, 8), default=1, show_default=True)
@click.option("--replicate", type=int, default=0, show_default=True)
@click.pass_context
def simulate(ctx, scenario, replicate):
    """Simulate one scenario replicate; writes field.csv and field_meta.txt."""
    seed = ctx.obj["seed"] if ctx.obj["seed"] is not None else 20080620
    out = ctx.obj["out"]
    os.makedirs(out, exist_ok=True)
    fld = simulate_replicate(scenario, replicate, seed)
    write_dataset_csv(fld.full_dataset(), os.path.join(out, "field.csv"))
    with open(os.path.join(out, "field_meta.txt"), "w") as f:
        f.write(fld.metadata_text())
    click.echo(f"wrote {out}/field.csv ({len(fld.coords)} locations x {len(fld.times)} days)")


@main.command()
@click.option("--input", "input_csv", type=click.Path(exists=True), required=True,
              help="Dataset CSV in the core format.")
@click.pass_context
def evaluate(ctx, input_csv):
    """Run the configured CV estimators on a dataset CSV."""
    cfg = cfgmod.load_study_config(ctx.obj["config_path"], master_seed=ctx.obj["seed"])
    out = ctx.obj["out"]
    os.makedirs(out, exist_ok=True)
    dataset, _ = read_dataset_csv(input_csv)
    failures = 0
    with open(os.path.join(out, "aggregate.csv"), "w", newline="") as fa, \
         open(os.path.join(out, "folds.csv"), "w", newline="") as ff:
        wa = csv.writer(fa)
        wf = csv.writer(ff)
        wa.writerow(AGGREGATE_HEADER)
        wf.writerow(FOLDS_HEADER)
        for model in cfg.models:
            for j, est in enumerate(cfg.estimators, start=1):
                try:
                    part = est.partition(dataset, cfg.master_seed + j)
                    rep = cv_estimate(dataset, part, model, seed=cfg.master_seed + j,
                                      label=est.label)
                    n_test = sum(lv.n for _, lv in rep.per_fold_losses)
                    wa.writerow(["-", 0, model.kind, est.label,
                                 f"{rep.estimate:.17g}", part.n_folds, n_test, ""])
                    wf.writerows(report_csv_rows(rep, model.kind, "-", 0))
                except Exception as e:
                    failures += 1
                    wa.writerow(["-", 0, model.kind, est.label, "", "", "", str(e)])
    click.echo(f"wrote {out}/aggregate.csv, {out}/folds.csv")
    if failures:
        click.echo(f"{failures} row(s) failed", err=True)
        ctx.exit(2)


@main.command()
@click.option("--scenarios", type=str, default=None, help="Comma-separated scenario ids.")
@click.option("--replicates", type=int, default=None, help="Replicates per scenario.")
@click.pass_context
def study(ctx, scenarios, replicates):
    """Run the simulation battery and write aggregate.csv / folds.csv."""
    overrides = dict(master_seed=ctx.obj["seed"], replicates=replicates)
    if scenarios:
        overrides["scenarios"] = tuple(int(s) for s in scenarios.split(","))
    cfg = cfgmod.load_study_config(ctx.obj["config_path"], **overrides)
    failures = run_study(cfg, ctx.obj["out"], threads=ctx.obj["threads"])
    click.echo(f"wrote {ctx.obj['out']}/aggregate.csv and folds.csv")
    if failures:
        click.echo(f"{failures} row(s) failed", err=True)
        ctx.exit(2)


@main.command("cond-var")
@click.option("--scenario", type=click.IntRange(1, 8), default=3, show_default=True)
@click.option("--replicate", type=int, default=0, show_default=True)
@click.option("--model", "model_kind",
              type=click.Choice(["ols", "random_forest", "kriging"]),
              default="kriging", show_default=True)
@click.pass_context
def cond_var(ctx, scenario, replicate, model_kind):
    """Exact conditional variances plus squared errors; writes condvar.csv."""
    cfg = cfgmod.load_study_config(ctx.obj["config_path"], master_seed=ctx.obj["seed"])
    model = next((m for m in cfg.models if m.kind == model_kind), ModelSpec(model_kind))
    out = ctx.obj["out"]
    os.makedirs(out, exist_ok=True)
    rows = run_condvar(scenario, replicate, cfg.master_seed, model,
                       estimators=cfg.estimators,
                       out_path=os.path.join(out, "condvar.csv"),
                       include_true_grid=cfg.include_true_grid)
    click.echo(f"wrote {out}/condvar.csv ({len(rows)} cells)")


@main.command("case-study")
@click.option("--input", "input_csv", type=click.Path(exists=True), default=None,
              help="Case-study CSV (core format with named covariate columns).")
@click.option("--synthetic-fixture", is_flag=True,
              help="Generate and analyze the bundled synthetic fixture.")
@click.pass_context
def case_study(ctx, input_csv, synthetic_fixture):
    """Run the interval battery on monitor data; writes aggregate.csv / weekly.csv."""
    out = ctx.obj["out"]
    os.makedirs(out, exist_ok=True)
    if synthetic_fixture and input_csv is None:
        input_csv = os.path.join(out, "fixture.csv")
        make_case_study_fixture(input_csv)
        click.echo(f"wrote synthetic fixture {input_csv}")
    cfg = cfgmod.load_case_study_config(ctx.obj["config_path"], input_csv=input_csv,
                                        master_seed=ctx.obj["seed"])
    failures = run_case_study(cfg, out)
    click.echo(f"wrote {out}/aggregate.csv and weekly.csv")
    if failures:
        click.echo(f"{failures} row(s) failed", err=True)
        ctx.exit(2)


@main.command("plot")
@click.option("--results", "results_dir", type=click.Path(exists=True), required=True,
              help="Directory holding result CSVs.")
@click.pass_context
def plot(ctx, results_dir):
    """Render SVG figures from result CSVs."""
    written = emit_plots(results_dir, ctx.obj["out"])
    for w in written:
        click.echo(f"wrote {w}")


if __name__ == "__main__":
    main()
