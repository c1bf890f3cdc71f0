"""Flip-graph random walks, multi-worker orchestration and run directories."""

from __future__ import annotations

import logging
import logging.handlers
import multiprocessing
import threading
import time
from collections.abc import Callable, Iterator
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from multiprocessing.managers import SyncManager
from pathlib import Path
from typing import Any

import numpy as np
import orjson
import yaml

from .config import LoggingConfig, SearchConfig
from .core import GF2, Scheme, SchemeError, normalize, verify
from .moves import FlipGraphState
from .schemeio import atomic_write, load_scheme, save_scheme

logger = logging.getLogger(__name__)


class SearchError(SchemeError):
    """A search cannot start or a plan is invalid."""

    pass


# ---------------------------------------------------------------------------
# Random stream
# ---------------------------------------------------------------------------


class RandomStream:
    """Buffered stream of 64-bit words from numpy's PCG64.

    Words are drawn in blocks with ``random_raw``. ``state`` captures the bit
    generator state at the start of the current block plus the read position,
    so a restored stream continues with exactly the same words.
    """

    BLOCK = 1024

    def __init__(self, seed: int = 0) -> None:
        self._bitgen = np.random.PCG64(seed)
        self._block_state: dict[str, Any] = self._bitgen.state
        self._buffer: list[int] = []
        self._pos = 0

    def _refill(self) -> None:
        self._block_state = self._bitgen.state
        self._buffer = self._bitgen.random_raw(self.BLOCK).tolist()
        self._pos = 0

    def word(self) -> int:
        if self._pos >= len(self._buffer):
            self._refill()
        value = self._buffer[self._pos]
        self._pos += 1
        return value

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by multiply-shift."""
        if n <= 0:
            raise ValueError(f"below() needs a positive bound, got {n}")
        return (self.word() * n) >> 64

    def bits(self, width: int) -> int:
        """Uniform ``width``-bit integer."""
        value = 0
        shift = 0
        while shift < width:
            value |= self.word() << shift
            shift += 64
        return value & ((1 << width) - 1)

    @property
    def state(self) -> dict[str, Any]:
        """JSON-safe snapshot; 128-bit PCG64 words are stored as decimal strings."""
        inner = self._block_state["state"]
        return {
            "algorithm": "PCG64",
            "state": str(inner["state"]),
            "inc": str(inner["inc"]),
            "position": self._pos,
            "filled": bool(self._buffer),
        }

    @classmethod
    def from_state(cls, data: dict[str, Any]) -> RandomStream:
        if data.get("algorithm") != "PCG64":
            raise ValueError(f"Unsupported RNG algorithm: {data.get('algorithm')!r}")
        stream = cls(0)
        stream._bitgen.state = {
            "bit_generator": "PCG64",
            "state": {"state": int(data["state"]), "inc": int(data["inc"])},
            "has_uint32": 0,
            "uinteger": 0,
        }
        if data.get("filled"):
            stream._refill()
            stream._pos = int(data["position"])
        else:
            stream._block_state = stream._bitgen.state
        return stream


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------


@dataclass
class RunState:
    """Outcome of a walk: best scheme, move counters and improvement history."""

    best: Scheme
    start_rank: int
    steps: int = 0
    flips: int = 0
    reductions: int = 0
    splits: int = 0
    restarts: int = 0
    history: list[tuple[int, int]] = field(default_factory=list)
    rng_states: list[dict[str, Any]] = field(default_factory=list)
    elapsed: float = field(default=0.0, compare=False)

    @property
    def best_rank(self) -> int:
        return self.best.rank

    def absorb(self, state: FlipGraphState) -> None:
        """Add the move counters of a walker state that is being discarded."""
        self.flips += state.flips
        self.reductions += state.reductions
        self.splits += state.splits

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": list(self.best.format),
            "start_rank": self.start_rank,
            "best_rank": self.best_rank,
            "steps": self.steps,
            "flips": self.flips,
            "reductions": self.reductions,
            "splits": self.splits,
            "restarts": self.restarts,
            "history": [list(event) for event in self.history],
            "rng_states": self.rng_states,
            "elapsed": round(self.elapsed, 3),
        }


# ---------------------------------------------------------------------------
# Shared best register
# ---------------------------------------------------------------------------


class BestRegister:
    """Monotone best-scheme register shared by walkers.

    Holds the best rank, its scheme and a trace of accepted improvements.
    Offers are serialized by a lock; reading the rank needs no lock because a
    stale value only delays adoption.
    """

    def __init__(self, scheme: Scheme, lock: Any = None, slot: Any = None) -> None:
        self._lock = lock if lock is not None else threading.Lock()
        self._slot = slot if slot is not None else {}
        self._slot.update(rank=scheme.rank, scheme=scheme, trace=[])

    @classmethod
    def shared(cls, manager: SyncManager, scheme: Scheme) -> BestRegister:
        """A register whose lock and slot live in a manager process."""
        return cls(scheme, lock=manager.Lock(), slot=manager.dict())

    def rank(self) -> int:
        return int(self._slot["rank"])

    def scheme(self) -> Scheme:
        return self._slot["scheme"]  # type: ignore[no-any-return]

    def trace(self) -> list[tuple[int, int, int]]:
        """Accepted improvements as (worker, step, rank)."""
        return [tuple(event) for event in self._slot["trace"]]  # type: ignore[misc]

    def offer(self, scheme: Scheme, worker: int, step: int) -> bool:
        with self._lock:
            if scheme.rank >= self._slot["rank"]:
                return False
            # nested list mutation does not propagate through a manager proxy
            trace = list(self._slot["trace"])
            trace.append((worker, step, scheme.rank))
            self._slot.update(rank=scheme.rank, scheme=scheme, trace=trace)
            return True


# ---------------------------------------------------------------------------
# Walk
# ---------------------------------------------------------------------------

ImprovementCallback = Callable[[Scheme, RunState], None]


def _check_start(start: Scheme) -> None:
    if start.ring != GF2:
        raise SearchError(f"flip-graph search needs a GF(2) scheme, got {start.ring}")
    if not verify(start):
        raise SearchError("refusing to search from broken scheme")


def walk(
    start: Scheme,
    cfg: SearchConfig,
    rng: RandomStream | None = None,
    *,
    on_improvement: ImprovementCallback | None = None,
    register: BestRegister | None = None,
    worker: int = 0,
) -> RunState:
    """Random walk on the flip graph of *start*.

    Each step applies one uniformly random flip followed by greedy
    reductions. A stall of ``escape_after`` steps injects a split (at most
    ``max_splits_above_best`` above the best rank) and a stall of
    ``restart_after`` steps restarts from the best scheme. Splits count as two
    steps of the budget since each is paired with a flip.
    """
    cfg.validate()
    _check_start(start)
    rng = rng if rng is not None else RandomStream(cfg.seed)
    started = time.perf_counter()

    best = normalize(start)
    run = RunState(best=best, start_rank=best.rank, history=[(0, best.rank)])
    target = cfg.target_rank

    def finish(state: FlipGraphState | None, steps: int) -> RunState:
        if state is not None:
            run.absorb(state)
        run.steps = steps
        run.rng_states = [rng.state]
        run.elapsed = time.perf_counter() - started
        logger.info(
            "worker %d finished: rank %d -> %d in %d steps (%.1fs)",
            worker,
            run.start_rank,
            run.best_rank,
            steps,
            run.elapsed,
        )
        return run

    if target is not None and best.rank <= target:
        return finish(None, 0)

    state = FlipGraphState.from_scheme(best)
    steps = 0
    stall = 0
    next_sync = cfg.sync_every

    def improve() -> None:
        scheme = state.to_scheme()
        if not verify(scheme):
            raise SearchError(f"walk produced a scheme that does not verify at step {steps}")
        run.best = scheme
        run.history.append((steps, scheme.rank))
        run.steps = steps
        run.rng_states = [rng.state]
        logger.info("worker %d step %d: rank %d", worker, steps, scheme.rank)
        if on_improvement is not None:
            on_improvement(scheme, run)
        if register is not None:
            register.offer(scheme, worker, steps)

    state.reduce_all()
    if state.rank < run.best_rank:
        improve()

    while steps < cfg.max_steps:
        if target is not None and run.best_rank <= target:
            break

        if not state.random_flip(rng):
            if (
                state.rank + 1 - run.best_rank <= cfg.max_splits_above_best
                and steps + 2 <= cfg.max_steps
                and state.escape(rng)
            ):
                steps += 2
                logger.debug("worker %d: no flips at rank %d, split", worker, state.rank)
                continue
            logger.info("worker %d: no moves left at rank %d", worker, state.rank)
            break
        steps += 1

        if state.rank < run.best_rank:
            improve()
            stall = 0
            continue
        stall += 1

        if (
            stall % cfg.escape_after == 0
            and state.rank + 1 - run.best_rank <= cfg.max_splits_above_best
            and steps + 2 <= cfg.max_steps
            and state.escape(rng)
        ):
            steps += 2
            logger.debug("worker %d step %d: split to rank %d", worker, steps, state.rank)
            if state.rank < run.best_rank:
                improve()
                stall = 0
                continue

        if stall >= cfg.restart_after:
            run.absorb(state)
            state = FlipGraphState.from_scheme(run.best)
            run.restarts += 1
            stall = 0
            logger.debug("worker %d step %d: restart from rank %d", worker, steps, run.best_rank)

        if register is not None and steps >= next_sync:
            next_sync = steps + cfg.sync_every
            if register.rank() < run.best_rank:
                run.absorb(state)
                run.best = register.scheme()
                state = FlipGraphState.from_scheme(run.best)
                stall = 0
                logger.debug("worker %d adopted global rank %d", worker, run.best_rank)

    return finish(state, steps)


# ---------------------------------------------------------------------------
# Run directory
# ---------------------------------------------------------------------------


class RunDirectory:
    """On-disk record of a search: config snapshot, best schemes, state, log."""

    def __init__(self, path: Path | str) -> None:
        self.path = Path(path)
        self.path.mkdir(parents=True, exist_ok=True)

    @property
    def best_path(self) -> Path:
        return self.path / "best.scheme"

    def write_config(self, cfg: SearchConfig) -> Path:
        return atomic_write(
            self.path / "config.yaml", yaml.dump(cfg.to_dict(), sort_keys=False).encode()
        )

    def read_config(self) -> SearchConfig:
        path = self.path / "config.yaml"
        if not path.exists():
            raise SearchError(f"no config snapshot in {self.path}")
        data = yaml.safe_load(path.read_text()) or {}
        return SearchConfig.from_dict(data)

    def save_improvement(self, scheme: Scheme, worker: int = 0) -> Path:
        suffix = f"-w{worker}" if worker else ""
        return save_scheme(scheme, self.path / f"best-{scheme.rank}{suffix}.scheme")

    def save_best(self, scheme: Scheme) -> Path:
        return save_scheme(scheme, self.best_path)

    def load_best(self) -> Scheme | None:
        """Lowest-rank scheme on disk that verifies."""
        candidates = sorted(self.path.glob("best*.scheme"))
        best: Scheme | None = None
        for path in candidates:
            try:
                scheme = load_scheme(path)
            except SchemeError as e:
                logger.warning(f"Skipping unreadable scheme {path}: {e}")
                continue
            if verify(scheme) and (best is None or scheme.rank < best.rank):
                best = scheme
        return best

    def write_state(self, run: RunState) -> Path:
        return atomic_write(
            self.path / "state.json", orjson.dumps(run.to_dict(), option=orjson.OPT_INDENT_2)
        )

    def read_state(self) -> dict[str, Any] | None:
        path = self.path / "state.json"
        if not path.exists():
            return None
        return orjson.loads(path.read_bytes())  # type: ignore[no-any-return]

    def record(self, scheme: Scheme, run: RunState) -> None:
        """Improvement callback for single-walker runs."""
        self.save_improvement(scheme)
        self.save_best(scheme)
        self.write_state(run)


@contextmanager
def run_logging(directory: Path, cfg: LoggingConfig | None = None) -> Iterator[Path]:
    """Mirror log records into ``search.log`` inside *directory* while active."""
    cfg = cfg or LoggingConfig()
    log_file = directory / "search.log"
    handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=cfg.file_max_bytes, backupCount=cfg.file_backups
    )
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s %(message)s"))
    root = logging.getLogger()
    root.addHandler(handler)
    try:
        yield log_file
    finally:
        root.removeHandler(handler)
        handler.close()


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def _walker_process(
    start: Scheme,
    cfg: SearchConfig,
    worker: int,
    register: BestRegister,
    run_dir: str | None,
) -> RunState:
    directory = RunDirectory(run_dir) if run_dir else None

    def on_improvement(scheme: Scheme, run: RunState) -> None:
        if directory is not None:
            directory.save_improvement(scheme, worker)

    return walk(
        start,
        cfg,
        RandomStream(cfg.seed ^ worker),
        on_improvement=on_improvement,
        register=register,
        worker=worker,
    )


def orchestrate(
    start: Scheme, cfg: SearchConfig, *, run_dir: RunDirectory | None = None
) -> RunState:
    """Run ``cfg.workers`` independent walkers sharing a best register.

    Worker ``w`` is seeded with ``seed ^ w``; with one worker this is exactly
    :func:`walk`. The merged history is the register's trace of accepted
    improvements, so it is non-increasing in rank.
    """
    cfg.validate()
    _check_start(start)
    workers = cfg.resolved_workers()
    if run_dir is not None:
        run_dir.write_config(cfg)

    if workers == 1:
        run = walk(start, cfg, RandomStream(cfg.seed), on_improvement=run_dir.record if run_dir else None)
    else:
        started = time.perf_counter()
        initial = normalize(start)
        with multiprocessing.Manager() as manager:
            register = BestRegister.shared(manager, initial)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [
                    pool.submit(
                        _walker_process,
                        start,
                        cfg,
                        w,
                        register,
                        str(run_dir.path) if run_dir else None,
                    )
                    for w in range(workers)
                ]
                results = [future.result() for future in futures]
            best = register.scheme()
            trace = register.trace()
        run = RunState(
            best=best,
            start_rank=initial.rank,
            steps=sum(r.steps for r in results),
            flips=sum(r.flips for r in results),
            reductions=sum(r.reductions for r in results),
            splits=sum(r.splits for r in results),
            restarts=sum(r.restarts for r in results),
            history=[(0, initial.rank)] + [(step, rank) for _, step, rank in trace],
            rng_states=[r.rng_states[0] for r in results],
            elapsed=time.perf_counter() - started,
        )
        logger.info("%d workers finished: best rank %d", workers, run.best_rank)

    if run_dir is not None:
        run_dir.save_best(run.best)
        run_dir.write_state(run)
    return run


def _shifted(run: RunState, offset: int) -> RunState:
    return replace(
        run,
        steps=run.steps + offset,
        history=[(steps + offset, rank) for steps, rank in run.history],
    )


def resume_walk(path: Path | str, cfg: SearchConfig | None = None) -> RunState:
    """Continue a single-walker run from its directory.

    Starts from the lowest-rank verified scheme on disk with the stored RNG
    state and the remaining step budget. The returned state covers only the
    resumed part; ``state.json`` keeps counting steps from the original start.
    """
    directory = RunDirectory(path)
    cfg = cfg or directory.read_config()
    best = directory.load_best()
    if best is None:
        raise SearchError(f"nothing to resume in {directory.path}")
    stored = directory.read_state() or {}
    rng_states = stored.get("rng_states") or []
    rng = RandomStream.from_state(rng_states[0]) if rng_states else RandomStream(cfg.seed)
    offset = int(stored.get("steps", 0))
    remaining = max(0, cfg.max_steps - offset)

    def record(scheme: Scheme, run: RunState) -> None:
        directory.record(scheme, _shifted(run, offset))

    run = walk(best, replace(cfg, max_steps=remaining), rng, on_improvement=record)
    directory.save_best(run.best)
    directory.write_state(_shifted(run, offset))
    return run
