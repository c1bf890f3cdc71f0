"""Multi-step search plans: morph a scheme, search, feed the result onward.

A plan is a YAML file::

    run_dir: runs/demo
    steps:
      - name: s222
        source: {standard: [2, 2, 2]}
        search: {max_steps: 200000, seed: 1}
      - name: s223
        source: {step: s222}
        morph: {extend: standard, axis: p}
        search: {max_steps: 200000}

``source`` is ``{standard: [n, m, p]}``, ``{file: path}`` or ``{step: name}``.
``morph`` is one of ``none``, ``rotate``, ``transpose``, ``canonical``,
``{extend: standard | source, axis, extra}`` or
``{restrict: [n, m, p], selector: leading | random | [[...], [...], [...]]}``.
A step without ``search`` only morphs.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Literal, TypedDict

import numpy as np
import orjson
import yaml

from .config import LoggingConfig, SearchConfig
from .core import GF2, Format, Scheme, SchemeError, standard_scheme, to_ring, verify
from .morph import (
    canonical_format,
    extend,
    extend_by_standard,
    random_selector,
    restrict,
    rotate,
    transpose,
)
from .schemeio import atomic_write, load_scheme, save_scheme
from .search import RunDirectory, SearchError, orchestrate, run_logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SchemeSource:
    kind: Literal["standard", "file", "step"]
    value: Any


@dataclass(frozen=True)
class MorphSpec:
    kind: str = "none"
    operand: SchemeSource | None = None
    axis: str = "p"
    extra: int = 1
    target: Format | None = None
    selector: Any = "leading"


@dataclass(frozen=True)
class PipelineStep:
    name: str
    source: SchemeSource
    morph: MorphSpec = MorphSpec()
    search: SearchConfig | None = None


class ReportRow(TypedDict):
    step: str
    format: str
    start_rank: int
    end_rank: int
    steps: int
    wall_time: float


# ---------------------------------------------------------------------------
# Plan parsing
# ---------------------------------------------------------------------------


def _parse_source(data: Any, where: str) -> SchemeSource:
    if isinstance(data, dict) and len(data) == 1:
        kind, value = next(iter(data.items()))
        if kind == "standard":
            try:
                return SchemeSource("standard", Format(*(int(v) for v in value)))
            except (TypeError, ValueError) as e:
                raise SearchError(f"{where}: invalid standard format {value!r} ({e})") from None
        if kind in ("file", "step"):
            return SchemeSource(kind, str(value))
    raise SearchError(f"{where}: source must be {{standard: [n, m, p]}}, {{file: ...}} or {{step: ...}}")


def _parse_morph(data: Any, where: str) -> MorphSpec:
    if data is None:
        return MorphSpec()
    if isinstance(data, str):
        if data not in ("none", "rotate", "transpose", "canonical"):
            raise SearchError(f"{where}: unknown morph {data!r}")
        return MorphSpec(kind=data)
    if not isinstance(data, dict):
        raise SearchError(f"{where}: invalid morph {data!r}")
    if "extend" in data:
        operand = data["extend"]
        axis = str(data.get("axis", "p"))
        if axis not in ("n", "m", "p"):
            raise SearchError(f"{where}: invalid axis {axis!r}")
        extra = data.get("extra", 1)
        if not isinstance(extra, int) or extra < 1:
            raise SearchError(f"{where}: invalid extra {extra!r}")
        source = None if operand == "standard" else _parse_source(operand, where)
        return MorphSpec(kind="extend", operand=source, axis=axis, extra=extra)
    if "restrict" in data:
        try:
            target = Format(*(int(v) for v in data["restrict"]))
        except (TypeError, ValueError) as e:
            raise SearchError(f"{where}: invalid restrict target ({e})") from None
        return MorphSpec(kind="restrict", target=target, selector=data.get("selector", "leading"))
    raise SearchError(f"{where}: invalid morph {data!r}")


def parse_plan(data: Any) -> list[PipelineStep]:
    """Build pipeline steps from a loaded YAML document."""
    if data is None:
        return []
    raw_steps = data.get("steps", []) if isinstance(data, dict) else data
    if not isinstance(raw_steps, list):
        raise SearchError("plan steps must be a list")
    steps: list[PipelineStep] = []
    seen: set[str] = set()
    for index, raw in enumerate(raw_steps):
        if not isinstance(raw, dict):
            raise SearchError(f"step {index}: expected a mapping")
        name = str(raw.get("name", f"step{index}"))
        where = f"step {name!r}"
        if name in seen:
            raise SearchError(f"{where}: duplicate step name")
        source = _parse_source(raw.get("source"), where)
        if source.kind == "step" and source.value not in seen:
            raise SearchError(f"{where}: unknown source step {source.value!r}")
        search_data = raw.get("search")
        search = None
        if search_data is not None:
            if not isinstance(search_data, dict):
                raise SearchError(f"{where}: search must be a mapping")
            search = SearchConfig.from_dict(search_data)
        steps.append(PipelineStep(name, source, _parse_morph(raw.get("morph"), where), search))
        seen.add(name)
    return steps


def load_plan(path: Path | str) -> tuple[list[PipelineStep], str | None]:
    """Read a YAML plan; returns the steps and the plan's ``run_dir`` if any."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise SearchError(f"plan {path} is not valid YAML: {e}") from None
    run_dir = data.get("run_dir") if isinstance(data, dict) else None
    return parse_plan(data), str(run_dir) if run_dir else None


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _resolve(source: SchemeSource, results: dict[str, Scheme], base: Path | None) -> Scheme:
    if source.kind == "standard":
        return standard_scheme(source.value, GF2)
    if source.kind == "step":
        return results[source.value]
    path = Path(source.value)
    if base is not None and not path.is_absolute():
        path = base / path
    if not path.exists():
        raise SearchError(f"missing input scheme file: {path}")
    scheme = load_scheme(path)
    return scheme if scheme.ring == GF2 else to_ring(scheme, GF2)


def _apply_morph(s: Scheme, spec: MorphSpec, results: dict[str, Scheme], base: Path | None, seed: int) -> Scheme:
    if spec.kind == "none":
        return s
    if spec.kind == "rotate":
        return rotate(s)
    if spec.kind == "transpose":
        return transpose(s)
    if spec.kind == "canonical":
        return canonical_format(s)
    if spec.kind == "extend":
        if spec.operand is None:
            return extend_by_standard(s, spec.axis, spec.extra)  # type: ignore[arg-type]
        return extend(s, _resolve(spec.operand, results, base), spec.axis)  # type: ignore[arg-type]
    if spec.kind == "restrict":
        assert spec.target is not None
        selector = spec.selector
        if selector == "leading":
            selector = None
        elif selector == "random":
            selector = random_selector(s.format, spec.target, np.random.default_rng(seed))
        return restrict(s, spec.target, selector)
    raise SearchError(f"unknown morph {spec.kind!r}")


def format_report(rows: list[ReportRow]) -> str:
    header = f"{'step':<16} {'format':<10} {'start':>6} {'end':>6} {'steps':>10} {'time[s]':>9}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(
            f"{row['step']:<16} {row['format']:<10} {row['start_rank']:>6} {row['end_rank']:>6} "
            f"{row['steps']:>10} {row['wall_time']:>9.2f}"
        )
    return "\n".join(lines) + "\n"


def write_report(rows: list[ReportRow], directory: Path) -> None:
    atomic_write(directory / "report.json", orjson.dumps(rows, option=orjson.OPT_INDENT_2))
    atomic_write(directory / "report.txt", format_report(rows).encode())


def run_pipeline(
    plan: list[PipelineStep],
    run_root: Path | str | None = None,
    *,
    base: Path | str | None = None,
    logging_config: LoggingConfig | None = None,
) -> list[ReportRow]:
    """Execute plan steps in order; each step's best scheme feeds later steps.

    With a ``run_root`` every step gets its own run directory there and the
    report is written as ``report.json`` and ``report.txt``. Relative file
    sources are resolved against ``base``.
    """
    root = Path(run_root) if run_root is not None else None
    base_path = Path(base) if base is not None else None
    results: dict[str, Scheme] = {}
    rows: list[ReportRow] = []
    if root is not None:
        root.mkdir(parents=True, exist_ok=True)

    for step in plan:
        started = time.perf_counter()
        source = _resolve(step.source, results, base_path)
        seed = step.search.seed if step.search else 0
        try:
            scheme = _apply_morph(source, step.morph, results, base_path, seed)
        except SchemeError as e:
            raise SearchError(f"step {step.name!r}: {e}") from e
        if not verify(scheme):
            raise SearchError(f"step {step.name!r}: input scheme does not verify")
        start_rank = scheme.rank
        logger.info("step %s: %s rank %d", step.name, scheme.format, start_rank)

        steps_taken = 0
        directory = RunDirectory(root / step.name) if root is not None else None
        if step.search is not None:
            if directory is not None:
                with run_logging(directory.path, logging_config):
                    run = orchestrate(scheme, step.search, run_dir=directory)
            else:
                run = orchestrate(scheme, step.search)
            scheme = run.best
            steps_taken = run.steps
        elif directory is not None:
            save_scheme(scheme, directory.best_path)

        results[step.name] = scheme
        rows.append(
            ReportRow(
                step=step.name,
                format=str(scheme.format),
                start_rank=start_rank,
                end_rank=scheme.rank,
                steps=steps_taken,
                wall_time=round(time.perf_counter() - started, 3),
            )
        )

    if root is not None:
        write_report(rows, root)
    return rows
