"""Tests for flipgraph_mm.search: random walks, orchestration and run directories."""

import logging
from pathlib import Path

import orjson
import pytest

from flipgraph_mm.core import GF2, INTEGER, Format, Scheme, rank, standard_scheme, verify
from flipgraph_mm.schemeio import load_scheme
from flipgraph_mm.search import (
    BestRegister,
    RandomStream,
    RunDirectory,
    RunState,
    SearchError,
    orchestrate,
    resume_walk,
    run_logging,
    walk,
)
from tests.conftest import _make_search_config

# ---------------------------------------------------------------------------
# RandomStream
# ---------------------------------------------------------------------------


def test_random_stream_is_seeded() -> None:
    """Equal seeds give equal words; different seeds differ."""
    a, b = RandomStream(42), RandomStream(42)
    assert [a.word() for _ in range(10)] == [b.word() for _ in range(10)]
    assert RandomStream(1).word() != RandomStream(2).word()


def test_random_stream_below_range() -> None:
    """below(n) covers 0..n-1 and rejects n <= 0."""
    stream = RandomStream(5)
    values = [stream.below(7) for _ in range(2000)]
    assert min(values) == 0 and max(values) == 6
    with pytest.raises(ValueError, match="positive bound"):
        stream.below(0)


def test_random_stream_bits_width() -> None:
    """bits(w) stays below 2^w, also past one 64-bit word."""
    stream = RandomStream(9)
    for width in (1, 4, 64, 100):
        for _ in range(50):
            assert 0 <= stream.bits(width) < (1 << width)


def test_random_stream_state_round_trip() -> None:
    """A restored stream continues with the same words, across block refills."""
    stream = RandomStream(3)
    for _ in range(RandomStream.BLOCK + 17):
        stream.word()
    snapshot = orjson.loads(orjson.dumps(stream.state))
    restored = RandomStream.from_state(snapshot)
    assert [restored.word() for _ in range(2000)] == [stream.word() for _ in range(2000)]


def test_random_stream_state_before_first_draw() -> None:
    """A stream restored before any draw starts at the same word."""
    stream = RandomStream(11)
    restored = RandomStream.from_state(stream.state)
    assert restored.word() == stream.word()


def test_random_stream_rejects_unknown_algorithm() -> None:
    """Only PCG64 states can be restored."""
    with pytest.raises(ValueError, match="Unsupported RNG algorithm"):
        RandomStream.from_state({"algorithm": "MT19937"})


# ---------------------------------------------------------------------------
# BestRegister
# ---------------------------------------------------------------------------


def test_best_register_is_monotone(strassen_gf2: Scheme) -> None:
    """The register only accepts strictly lower ranks and traces who found them."""
    standard = standard_scheme(Format(2, 2, 2))
    register = BestRegister(standard)
    assert register.rank() == 8
    assert register.offer(strassen_gf2, worker=1, step=10)
    assert not register.offer(standard, worker=0, step=20)
    assert not register.offer(strassen_gf2, worker=2, step=30)
    assert register.rank() == 7
    assert register.scheme() == strassen_gf2
    assert register.trace() == [(1, 10, 7)]


# ---------------------------------------------------------------------------
# walk
# ---------------------------------------------------------------------------


def test_walk_finds_rank_seven_for_two_by_two() -> None:
    """From the schoolbook (2,2,2) scheme most seeds reach Strassen's rank."""
    start = standard_scheme(Format(2, 2, 2))
    hits = 0
    for seed in range(8):
        run = walk(start, _make_search_config(seed=seed, target_rank=7))
        assert verify(run.best)
        if run.best_rank <= 7:
            hits += 1
    assert hits >= 7


def test_walk_history_is_decreasing() -> None:
    """Improvements are recorded with strictly falling ranks at rising steps."""
    run = walk(standard_scheme(Format(2, 2, 3)), _make_search_config(seed=4, max_steps=5_000))
    ranks = [r for _, r in run.history]
    assert ranks[0] == 12
    assert all(later < earlier for earlier, later in zip(ranks, ranks[1:]))
    steps = [s for s, _ in run.history]
    assert steps == sorted(steps)
    assert ranks[-1] == run.best_rank


def test_walk_is_deterministic() -> None:
    """The same seed and config reproduce the same run."""
    start = standard_scheme(Format(2, 3, 3))
    cfg = _make_search_config(seed=17, max_steps=3_000)
    first = walk(start, cfg)
    second = walk(start, cfg)
    assert first == second
    assert first.best == second.best


def test_walk_respects_step_budget() -> None:
    """A walk never takes more than max_steps steps."""
    run = walk(standard_scheme(Format(3, 3, 3)), _make_search_config(max_steps=500))
    assert run.steps <= 500
    assert verify(run.best)


def test_walk_returns_immediately_at_target(strassen_gf2: Scheme) -> None:
    """A start already at the target rank costs no steps."""
    run = walk(strassen_gf2, _make_search_config(target_rank=7))
    assert run.steps == 0
    assert run.best_rank == 7
    assert run.history == [(0, 7)]


def test_walk_refuses_broken_start(strassen_gf2: Scheme) -> None:
    """A start scheme that does not verify is rejected."""
    broken = strassen_gf2.with_terms(strassen_gf2.terms[1:])
    with pytest.raises(SearchError, match="refusing to search from broken scheme"):
        walk(broken, _make_search_config())


def test_walk_refuses_integer_start(strassen: Scheme) -> None:
    """Walks only run over GF(2)."""
    with pytest.raises(SearchError, match="needs a GF"):
        walk(strassen, _make_search_config())


def test_walk_rejects_invalid_config() -> None:
    """The config is validated before the walk starts."""
    with pytest.raises(ValueError, match="escape_after"):
        walk(standard_scheme(Format(2, 2, 2)), _make_search_config(escape_after=0))


def test_walk_improvement_callback() -> None:
    """The callback sees every improvement recorded in the history."""
    seen: list[int] = []

    def on_improvement(scheme: Scheme, run: RunState) -> None:
        assert verify(scheme)
        seen.append(scheme.rank)

    run = walk(
        standard_scheme(Format(2, 2, 2)),
        _make_search_config(seed=2, target_rank=7),
        on_improvement=on_improvement,
    )
    assert seen == [r for _, r in run.history[1:]]


def test_walk_adopts_better_register_scheme(strassen_gf2: Scheme) -> None:
    """A walker polls the shared register and jumps to a better scheme."""
    register = BestRegister(strassen_gf2)
    run = walk(
        standard_scheme(Format(2, 2, 2)),
        _make_search_config(max_steps=300, sync_every=10, max_splits_above_best=0),
        register=register,
    )
    assert run.best_rank <= 7


def test_run_state_to_dict_is_json_safe() -> None:
    """RunState.to_dict survives an orjson round trip."""
    run = walk(standard_scheme(Format(2, 2, 2)), _make_search_config(max_steps=200))
    data = orjson.loads(orjson.dumps(run.to_dict()))
    assert data["format"] == [2, 2, 2]
    assert data["start_rank"] == 8
    assert data["steps"] == run.steps


# ---------------------------------------------------------------------------
# orchestrate
# ---------------------------------------------------------------------------


def test_orchestrate_single_worker_matches_walk() -> None:
    """One worker without a run directory is a plain walk."""
    start = standard_scheme(Format(2, 2, 3))
    cfg = _make_search_config(seed=8, max_steps=2_000)
    assert orchestrate(start, cfg) == walk(start, cfg)


def test_orchestrate_writes_run_directory(tmp_path: Path) -> None:
    """A run directory gets the config, state, best scheme and improvements."""
    run_dir = RunDirectory(tmp_path / "run")
    run = orchestrate(
        standard_scheme(Format(2, 2, 2)),
        _make_search_config(seed=1, target_rank=7),
        run_dir=run_dir,
    )
    assert run_dir.best_path.exists()
    best = load_scheme(run_dir.best_path)
    assert verify(best)
    assert rank(best) == run.best_rank
    assert (run_dir.path / "config.yaml").exists()
    state = run_dir.read_state()
    assert state is not None and state["best_rank"] == run.best_rank
    if run.best_rank < 8:
        assert (run_dir.path / f"best-{run.best_rank}.scheme").exists()


def test_orchestrate_two_workers(tmp_path: Path) -> None:
    """Two walkers share one best scheme and keep one RNG state each."""
    run = orchestrate(
        standard_scheme(Format(2, 2, 2)),
        _make_search_config(seed=5, workers=2, target_rank=7),
        run_dir=RunDirectory(tmp_path),
    )
    assert verify(run.best)
    assert run.best.ring == GF2
    assert len(run.rng_states) == 2
    ranks = [r for _, r in run.history]
    assert ranks[0] == 8
    assert all(later < earlier for earlier, later in zip(ranks, ranks[1:]))


def test_orchestrate_refuses_integer_start() -> None:
    """Orchestration needs a GF(2) start scheme."""
    with pytest.raises(SearchError):
        orchestrate(standard_scheme(Format(2, 2, 2), INTEGER), _make_search_config())


# ---------------------------------------------------------------------------
# RunDirectory and resume
# ---------------------------------------------------------------------------


def test_run_directory_config_round_trip(tmp_path: Path) -> None:
    """The config snapshot reads back unchanged."""
    cfg = _make_search_config(seed=99, target_rank=23)
    directory = RunDirectory(tmp_path)
    directory.write_config(cfg)
    assert directory.read_config() == cfg


def test_run_directory_without_config(tmp_path: Path) -> None:
    """Reading a missing config snapshot is an error."""
    with pytest.raises(SearchError, match="no config snapshot"):
        RunDirectory(tmp_path).read_config()


def test_load_best_skips_broken_files(tmp_path: Path, strassen_gf2: Scheme) -> None:
    """Unreadable or non-verifying scheme files are ignored."""
    directory = RunDirectory(tmp_path)
    directory.save_improvement(standard_scheme(Format(2, 2, 2)))
    directory.save_improvement(strassen_gf2, worker=3)
    (tmp_path / "best-6.scheme").write_text("format 2 2 2 gf2 6\n")
    best = directory.load_best()
    assert best is not None
    assert best.rank == 7


def test_resume_walk_continues_run(tmp_path: Path) -> None:
    """A resumed run starts from the stored best with the remaining budget."""
    directory = RunDirectory(tmp_path)
    cfg = _make_search_config(seed=6, max_steps=1_000)
    first = orchestrate(standard_scheme(Format(2, 3, 3)), cfg, run_dir=directory)
    resumed = resume_walk(tmp_path, _make_search_config(seed=6, max_steps=3_000))
    assert resumed.start_rank == first.best_rank
    assert resumed.best_rank <= first.best_rank
    assert resumed.steps <= 3_000 - first.steps
    assert verify(load_scheme(directory.best_path))


class _Interrupt(Exception):
    pass


def test_resume_after_interrupted_improvement(tmp_path: Path) -> None:
    """A run killed inside its first improvement resumes at the recorded step and RNG position."""
    directory = RunDirectory(tmp_path)
    cfg = _make_search_config(seed=6, max_steps=3_000)
    directory.write_config(cfg)
    rng = RandomStream(cfg.seed)

    def record_then_die(scheme: Scheme, run: RunState) -> None:
        directory.record(scheme, run)
        raise _Interrupt

    with pytest.raises(_Interrupt):
        walk(standard_scheme(Format(2, 3, 3)), cfg, rng, on_improvement=record_then_die)

    state = directory.read_state()
    assert state is not None
    assert state["steps"] > 0
    assert state["steps"] == state["history"][-1][0]
    assert RandomStream.from_state(state["rng_states"][0]).word() == rng.word()

    resumed = resume_walk(tmp_path)
    assert resumed.steps <= cfg.max_steps - state["steps"]
    final = directory.read_state()
    assert final is not None
    assert final["steps"] == state["steps"] + resumed.steps
    assert verify(load_scheme(directory.best_path))


def test_resume_walk_empty_directory(tmp_path: Path) -> None:
    """A directory without schemes cannot be resumed."""
    with pytest.raises(SearchError):
        resume_walk(tmp_path, _make_search_config())


def test_run_logging_writes_file(tmp_path: Path, caplog: pytest.LogCaptureFixture) -> None:
    """Log records land in search.log while the context is active."""
    caplog.set_level(logging.INFO)
    with run_logging(tmp_path) as log_file:
        walk(standard_scheme(Format(2, 2, 2)), _make_search_config(max_steps=100))
    assert log_file.exists()
    assert "worker 0 finished" in log_file.read_text()


# ---------------------------------------------------------------------------
# Slow
# ---------------------------------------------------------------------------


@pytest.mark.slow
def test_walk_three_by_three_reaches_twenty_three() -> None:
    """Rank 23 for (3,3,3) is reachable from the schoolbook scheme."""
    run = walk(
        standard_scheme(Format(3, 3, 3)),
        _make_search_config(
            seed=1,
            max_steps=5_000_000,
            escape_after=20_000,
            restart_after=500_000,
            target_rank=23,
        ),
    )
    assert verify(run.best)
    assert run.best_rank <= 23
