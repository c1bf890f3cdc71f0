"""flipgraph-mm CLI - verify, search, morph and lift matrix multiplication schemes."""

import logging
import sys
from pathlib import Path
from typing import Any

import click
import numpy as np
import orjson

from . import __version__
from .config import DEFAULT_CONFIG_PATH, ToolkitConfig, create_default_config, load_config
from .core import (
    GF2,
    Format,
    Ring,
    Scheme,
    SchemeError,
    apply_scheme,
    scheme_stats,
    standard_scheme,
    to_ring,
    verify,
)
from .lift import lift as lift_scheme
from .morph import canonical_format, extend, extend_by_standard, restrict, rotate, transpose
from .pipeline import format_report, load_plan, run_pipeline
from .schemeio import (
    KNOWN_RANKS,
    format_matrix,
    import_published,
    load_scheme,
    read_matrix,
    save_scheme,
    serialize,
)
from .search import RunDirectory, orchestrate, resume_walk, run_logging

logger = logging.getLogger(__name__)


@click.group()
@click.version_option(version=__version__, prog_name="flipgraph-mm")
@click.option(
    "--config", "config_path", default=None, help="Config file path", envvar="FLIPGRAPH_CONFIG"
)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, verbose: bool) -> None:
    """flipgraph-mm - Search and verify matrix multiplication schemes."""
    ctx.ensure_object(dict)
    try:
        cfg = load_config(config_path)
    except FileNotFoundError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)

    level = "DEBUG" if verbose else cfg.logging.level
    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s %(message)s",
    )
    ctx.obj["config"] = cfg
    ctx.obj["config_path"] = config_path

    if verbose:
        click.echo(f"[verbose] Config: {config_path or 'default'}", err=True)
        click.echo(f"[verbose] Run dir: {cfg.run_dir}", err=True)


def _config(ctx: click.Context) -> ToolkitConfig:
    return ctx.obj["config"]  # type: ignore[no-any-return]


def _load(path: str) -> Scheme:
    """Load a canonical scheme file or exit 1 with the parse error."""
    try:
        return load_scheme(path)
    except SchemeError as e:
        click.echo(f"Error: {path}: {e}", err=True)
        sys.exit(1)


def _write(scheme: Scheme, out: str | None) -> None:
    if out:
        save_scheme(scheme, out)
        click.echo(f"Wrote {out}")
    else:
        click.echo(serialize(scheme).decode(), nl=False)


def _parse_format(text: str) -> Format:
    try:
        return Format(*(int(v) for v in text.split(",")))
    except (TypeError, ValueError) as e:
        raise click.BadParameter(f"expected n,m,p: {e}") from None


def _describe(scheme: Scheme) -> str:
    n, m, p = scheme.format
    return f"format {n} {m} {p} {scheme.ring} rank {scheme.rank}"


# ============================================================================
# Scheme Commands
# ============================================================================


@cli.command("verify")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "output_json", is_flag=True, help="Output as JSON")
def verify_cmd(path: str, output_json: bool) -> None:
    """Check the Brent equations of a scheme file (exit 0 iff correct)."""
    scheme = _load(path)
    ok = verify(scheme)
    if output_json:
        n, m, p = scheme.format
        click.echo(
            orjson.dumps(
                {"format": [n, m, p], "ring": str(scheme.ring), "rank": scheme.rank, "verified": ok},
                option=orjson.OPT_INDENT_2,
            ).decode()
        )
    else:
        click.echo(_describe(scheme))
        if not ok:
            click.echo("Brent equations violated", err=True)
    if not ok:
        sys.exit(1)


@cli.command("standard")
@click.argument("n", type=int)
@click.argument("m", type=int)
@click.argument("p", type=int)
@click.option("--ring", "ring_name", default="gf2", help="gf2, integer or mod2^k")
@click.option("--out", "-o", default=None, help="Output file (default: stdout)")
def standard_cmd(n: int, m: int, p: int, ring_name: str, out: str | None) -> None:
    """Write the schoolbook scheme for an n x m by m x p product."""
    try:
        scheme = standard_scheme(Format(n, m, p), Ring.parse(ring_name))
    except ValueError as e:
        raise click.BadParameter(str(e)) from None
    _write(scheme, out)


@cli.command("stats")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "output_json", is_flag=True, help="Output as JSON")
def stats_cmd(path: str, output_json: bool) -> None:
    """Show rank, addition count and coefficient histogram."""
    scheme = _load(path)
    stats = scheme_stats(scheme)
    ok = verify(scheme)
    known = KNOWN_RANKS.get(tuple(sorted(scheme.format)))  # type: ignore[arg-type]

    if output_json:
        output: dict[str, Any] = {**stats, "verified": ok}
        if known:
            output["known"] = known._asdict()
        click.echo(orjson.dumps(output, option=orjson.OPT_INDENT_2 | orjson.OPT_NON_STR_KEYS).decode())
        return

    click.echo(_describe(scheme) + ("" if ok else "  (does NOT verify)"))
    click.echo(f"Naive rank: {stats['naive_rank']}")
    a_nz, b_nz, c_nz = stats["nonzeros"]
    click.echo(f"Nonzero coefficients: A={a_nz} B={b_nz} C={c_nz}")
    click.echo(f"Additions (naive count): {stats['additions']}")
    click.echo("Coefficient histogram:")
    for value, count in stats["histogram"].items():
        click.echo(f"  {value:>4}: {count}")
    if known:
        click.echo(
            f"Known ranks: previous record {known.previous_record}, "
            f"flip graph {known.flip_graph} ({known.ring})"
        )


@cli.command("apply")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.argument("x_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("y_path", type=click.Path(exists=True, dir_okay=False))
def apply_cmd(path: str, x_path: str, y_path: str) -> None:
    """Multiply two matrix files with a scheme and print the product."""
    scheme = _load(path)
    try:
        x = read_matrix(x_path)
        y = read_matrix(y_path)
        z = apply_scheme(scheme, x, y)
    except SchemeError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)
    click.echo(format_matrix(z), nl=False)
    if not verify(scheme):
        click.echo("Warning: scheme does not verify; the product may be wrong", err=True)
        sys.exit(1)


@cli.command("import")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--hint", default=None, help="Variant label to try first")
@click.option("--out", "-o", default=None, help="Output file (default: stdout)")
def import_cmd(path: str, hint: str | None, out: str | None) -> None:
    """Convert a published scheme file into the canonical format."""
    try:
        scheme = import_published(Path(path).read_bytes(), hint=hint)
    except SchemeError as e:
        click.echo(f"Error: {path}: {e}", err=True)
        sys.exit(1)
    click.echo(f"Imported {_describe(scheme)} ({scheme.note})", err=True)
    _write(scheme, out)


# ============================================================================
# Morph Commands
# ============================================================================


@cli.command("morph")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--extend", "extend_path", default=None, help="Scheme file to glue on")
@click.option("--extend-standard", "extend_extra", type=int, default=None, help="Grow by N using the standard algorithm")
@click.option("--axis", type=click.Choice(["n", "m", "p"]), default="p", help="Axis for --extend")
@click.option("--restrict", "restrict_to", default=None, help="Target format n,m,p")
@click.option("--selector", default=None, help="Kept indices, e.g. '0,1;0,2;1,2'")
@click.option("--rotate", "do_rotate", is_flag=True, help="(n,m,p) -> (m,p,n)")
@click.option("--transpose", "do_transpose", is_flag=True, help="(n,m,p) -> (p,m,n)")
@click.option("--canonical", "do_canonical", is_flag=True, help="Rotate/transpose to n <= m <= p")
@click.option("--out", "-o", default=None, help="Output file (default: stdout)")
def morph_cmd(
    path: str,
    extend_path: str | None,
    extend_extra: int | None,
    axis: str,
    restrict_to: str | None,
    selector: str | None,
    do_rotate: bool,
    do_transpose: bool,
    do_canonical: bool,
    out: str | None,
) -> None:
    """Change the format of a scheme."""
    chosen = [
        extend_path is not None,
        extend_extra is not None,
        restrict_to is not None,
        do_rotate,
        do_transpose,
        do_canonical,
    ]
    if sum(chosen) != 1:
        raise click.UsageError(
            "Choose exactly one of --extend, --extend-standard, --restrict, --rotate, --transpose, --canonical"
        )
    scheme = _load(path)
    try:
        if extend_path is not None:
            result = extend(scheme, _load(extend_path), axis)  # type: ignore[arg-type]
        elif extend_extra is not None:
            result = extend_by_standard(scheme, axis, extend_extra)  # type: ignore[arg-type]
        elif restrict_to is not None:
            target = _parse_format(restrict_to)
            picked = None
            if selector:
                try:
                    parts = [[int(v) for v in chunk.split(",") if v.strip()] for chunk in selector.split(";")]
                except ValueError:
                    raise click.BadParameter("selector must be ';'-separated lists of ints") from None
                if len(parts) != 3:
                    raise click.BadParameter("selector needs three index lists")
                picked = (parts[0], parts[1], parts[2])
            result = restrict(scheme, target, picked)
        elif do_rotate:
            result = rotate(scheme)
        elif do_transpose:
            result = transpose(scheme)
        else:
            result = canonical_format(scheme)
    except SchemeError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)

    if not verify(result):
        click.echo(f"Error: result {_describe(result)} does not verify", err=True)
        sys.exit(1)
    click.echo(_describe(result), err=True)
    _write(result, out)


# ============================================================================
# Search Commands
# ============================================================================


@cli.command("search")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--steps", type=int, default=None, help="Step budget per worker")
@click.option("--workers", "-w", type=int, default=None, help="Walkers (0 = physical cores)")
@click.option("--seed", type=int, default=None, help="RNG seed")
@click.option("--target", type=int, default=None, help="Stop at this rank")
@click.option("--escape-after", type=int, default=None, help="Stall steps before a split")
@click.option("--restart-after", type=int, default=None, help="Stall steps before a restart")
@click.option("--max-splits", type=int, default=None, help="Max rank above best when splitting")
@click.option("--out", "-o", default=None, help="Run directory")
@click.option("--resume", is_flag=True, help="Continue the run stored in --out")
@click.pass_context
def search_cmd(
    ctx: click.Context,
    path: str,
    steps: int | None,
    workers: int | None,
    seed: int | None,
    target: int | None,
    escape_after: int | None,
    restart_after: int | None,
    max_splits: int | None,
    out: str | None,
    resume: bool,
) -> None:
    """Random flip-graph walk from a scheme, looking for a lower rank."""
    cfg = _config(ctx)
    search_cfg = cfg.search
    overrides = {
        "max_steps": steps,
        "workers": workers,
        "seed": seed,
        "target_rank": target,
        "escape_after": escape_after,
        "restart_after": restart_after,
        "max_splits_above_best": max_splits,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(search_cfg, name, value)
    try:
        search_cfg.validate()
    except ValueError as e:
        raise click.BadParameter(str(e)) from None

    if resume and not out:
        raise click.UsageError("--resume needs --out")

    scheme = _load(path)
    if scheme.ring != GF2:
        click.echo(f"Reducing {scheme.ring} scheme mod 2 for the search", err=True)
        scheme = to_ring(scheme, GF2)

    run_dir = RunDirectory(out) if out else None
    try:
        if run_dir is not None:
            with run_logging(run_dir.path, cfg.logging):
                if resume:
                    run = resume_walk(run_dir.path, search_cfg)
                else:
                    run = orchestrate(scheme, search_cfg, run_dir=run_dir)
        else:
            run = orchestrate(scheme, search_cfg)
    except SchemeError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)

    click.echo(
        f"{run.best.format}: rank {run.start_rank} -> {run.best_rank} "
        f"({run.steps} steps, {run.flips} flips, {run.reductions} reductions, "
        f"{run.splits} splits, {run.elapsed:.1f}s)"
    )
    if run_dir is not None:
        click.echo(f"Best scheme: {run_dir.best_path}")
    else:
        click.echo(serialize(run.best).decode(), nl=False)
    if search_cfg.target_rank is not None and run.best_rank > search_cfg.target_rank:
        click.echo(f"Target rank {search_cfg.target_rank} not reached", err=True)
        sys.exit(1)


@cli.command("pipeline")
@click.argument("plan_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "-o", default=None, help="Run root (default: plan run_dir or config run_dir)")
@click.pass_context
def pipeline_cmd(ctx: click.Context, plan_path: str, out: str | None) -> None:
    """Run a YAML plan of morph and search steps."""
    cfg = _config(ctx)
    try:
        plan, plan_run_dir = load_plan(plan_path)
        root = Path(out or plan_run_dir or cfg.run_dir)
        rows = run_pipeline(
            plan, root, base=Path(plan_path).parent, logging_config=cfg.logging
        )
    except SchemeError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)
    click.echo(format_report(rows), nl=False)
    click.echo(f"Report: {root / 'report.txt'}")


@cli.command("lift")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--attempts", type=int, default=None, help="Lift attempts")
@click.option("--kmax", type=int, default=None, help="Highest power of two to lift to")
@click.option("--seed", type=int, default=None, help="RNG seed")
@click.option("--out", "-o", default=None, help="Output file (default: stdout)")
@click.pass_context
def lift_cmd(
    ctx: click.Context,
    path: str,
    attempts: int | None,
    kmax: int | None,
    seed: int | None,
    out: str | None,
) -> None:
    """Hensel-lift a GF(2) scheme to integer coefficients."""
    lift_cfg = _config(ctx).lift
    scheme = _load(path)
    try:
        result = lift_scheme(
            scheme,
            attempts=attempts if attempts is not None else lift_cfg.attempts,
            k_max=kmax if kmax is not None else lift_cfg.k_max,
            rng=np.random.default_rng(seed if seed is not None else lift_cfg.seed),
        )
    except (SchemeError, ValueError) as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)
    if result.scheme is None:
        click.echo("Lifting failed:", err=True)
        click.echo(result.report(), err=True)
        sys.exit(1)
    click.echo(f"Lifted to {_describe(result.scheme)}", err=True)
    _write(result.scheme, out)


# ============================================================================
# Config Commands
# ============================================================================


@cli.group()
def config() -> None:
    """Manage configuration."""
    pass


@config.command("init")
@click.option("--path", default=None, help="Config file path")
def config_init(path: str | None) -> None:
    """Create default configuration file."""
    config_path = create_default_config(path)
    click.echo(f"Created config at: {config_path}")


@config.command("show")
@click.pass_context
def config_show(ctx: click.Context) -> None:
    """Show current configuration."""
    click.echo(_config(ctx).to_yaml())


@config.command("path")
def config_path() -> None:
    """Show default config file path."""
    click.echo(DEFAULT_CONFIG_PATH)


if __name__ == "__main__":
    cli()
