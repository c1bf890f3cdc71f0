"""Tests for flipgraph_mm.lift: GF(2) solving, Jacobian, Hensel steps and lifting."""

import numpy as np
import pytest

from flipgraph_mm.core import (
    GF2,
    INTEGER,
    Format,
    GF2Matrix,
    IntMatrix,
    Scheme,
    SchemeError,
    Term,
    brent_residuals,
    mod2k,
    standard_scheme,
    to_ring,
    verify,
)
from flipgraph_mm.lift import (
    LiftFailure,
    hensel_step,
    jacobian_mod2,
    lift,
    reconstruct_integers,
    solve_gf2,
)
from flipgraph_mm.search import walk
from tests.conftest import _make_search_config


def _triple_unit_scheme() -> Scheme:
    """(1,1,1) with three copies of 1*1*1: correct mod 2, off by 2 over Z."""
    one = GF2Matrix.from_rows([[1]])
    return Scheme(Format(1, 1, 1), GF2, (Term(one, one, one),) * 3)


# ---------------------------------------------------------------------------
# solve_gf2
# ---------------------------------------------------------------------------


def test_solve_gf2_finds_solutions(rng: np.random.Generator) -> None:
    """Consistent random systems are solved, with and without a random free part."""
    for rows, cols in ((5, 5), (8, 20), (30, 12), (17, 64)):
        matrix = rng.integers(0, 2, size=(rows, cols), dtype=np.uint8)
        x0 = rng.integers(0, 2, size=cols, dtype=np.uint8)
        rhs = (matrix.astype(np.int64) @ x0) % 2
        for free_rng in (None, rng):
            x = solve_gf2(matrix, rhs, free_rng)
            assert x is not None
            assert ((matrix.astype(np.int64) @ x) % 2 == rhs).all()


def test_solve_gf2_inconsistent() -> None:
    """An inconsistent system has no solution."""
    matrix = np.array([[1, 1], [1, 1]], dtype=np.uint8)
    assert solve_gf2(matrix, np.array([0, 1], dtype=np.uint8)) is None


def test_solve_gf2_zero_free_part() -> None:
    """Without an rng the free variables are zero."""
    matrix = np.array([[1, 1, 0]], dtype=np.uint8)
    x = solve_gf2(matrix, np.array([1], dtype=np.uint8))
    assert x is not None
    assert x.tolist() == [1, 0, 0]


# ---------------------------------------------------------------------------
# Jacobian
# ---------------------------------------------------------------------------


def test_jacobian_matches_finite_differences(strassen_gf2: Scheme) -> None:
    """Bumping a coefficient by 2 changes the residuals by 2 * column (mod 4)."""
    base = to_ring(strassen_gf2, INTEGER)
    jac = jacobian_mod2(strassen_gf2)
    sizes = base.format.sizes
    assert jac.shape == (64, 7 * sum(sizes))
    before = np.array(brent_residuals(base), dtype=np.int64)
    column = 0
    for t, term in enumerate(base.terms):
        for slot, component in enumerate(term):
            for idx in range(sizes[slot]):
                entries = component.entries()
                entries[idx] += 2
                bumped = IntMatrix.from_entries(*component.shape, entries)
                terms = list(base.terms)
                terms[t] = term.with_component(slot, bumped)
                after = np.array(brent_residuals(base.with_terms(terms)), dtype=np.int64)
                assert (((after - before) // 2) % 2 == jac[:, column]).all(), column
                column += 1


# ---------------------------------------------------------------------------
# Hensel steps
# ---------------------------------------------------------------------------


def test_hensel_step_keeps_standard_unchanged() -> None:
    """An exact integer scheme needs no correction."""
    s = standard_scheme(Format(2, 2, 2))
    step = hensel_step(s)
    assert step.ring == mod2k(2)
    assert verify(step)
    assert [c.entries() for t in step.terms for c in t] == [c.entries() for t in s.terms for c in t]


def test_hensel_step_fixes_triple_unit() -> None:
    """One step turns 1 + 1 + 1 into a scheme that is exact over Z."""
    step = hensel_step(_triple_unit_scheme())
    assert step.ring == mod2k(2)
    assert verify(step)
    # one correction already gives an exact integer scheme
    assert verify(Scheme(step.format, INTEGER, step.terms))


def test_hensel_step_rejects_invalid_input() -> None:
    """Input must verify mod 2^k and live in GF(2) or Z/2^k."""
    broken = Scheme(Format(1, 1, 1), GF2, ())
    with pytest.raises(ValueError, match="does not satisfy the Brent equations"):
        hensel_step(broken)
    with pytest.raises(ValueError, match="GF\\(2\\) or mod 2\\^k"):
        hensel_step(standard_scheme(Format(1, 1, 1), INTEGER))


def test_hensel_step_modulus_limit() -> None:
    """Lifting stops at 2^62."""
    s = standard_scheme(Format(1, 1, 1), mod2k(62))
    with pytest.raises(LiftFailure, match="modulus limit reached"):
        hensel_step(s)


def test_reconstruct_integers() -> None:
    """Balanced residues that already verify over Z are taken as integers."""
    s = standard_scheme(Format(2, 1, 2), mod2k(4))
    out = reconstruct_integers(s)
    assert out.ring == INTEGER
    assert verify(out)
    with pytest.raises(LiftFailure, match="coefficients not stabilized"):
        reconstruct_integers(Scheme(Format(1, 1, 1), mod2k(4), _triple_int_terms()))


def test_reconstruct_succeeds_after_one_more_step() -> None:
    """Five unit terms are 1 mod 4 but 5 over Z; the step to 2^3 fixes one sign."""
    one = IntMatrix.from_rows([[1]])
    s = Scheme(Format(1, 1, 1), mod2k(2), (Term(one, one, one),) * 5)
    assert verify(s)
    with pytest.raises(LiftFailure, match="coefficients not stabilized"):
        reconstruct_integers(s)

    step = hensel_step(s)
    assert step.ring == mod2k(3)
    out = reconstruct_integers(step)
    assert verify(out)
    coefficients = sorted(v for t in out.terms for c in t for v in c.entries())
    assert coefficients == [-3] + [1] * 14


def _flat(s: Scheme) -> list[int]:
    return [v for t in s.terms for c in t for v in c.entries()]


def test_hensel_steps_stay_congruent_mod_two(strassen_gf2: Scheme) -> None:
    """Every lifted coefficient keeps the parity of the GF(2) input."""
    one = GF2Matrix.from_rows([[1]])
    inputs = [
        strassen_gf2,
        _triple_unit_scheme(),
        Scheme(Format(1, 1, 1), GF2, (Term(one, one, one),) * 7),
    ]
    rng = np.random.default_rng(3)
    for s in inputs:
        parity = _flat(s)
        current = s
        for k in range(2, 9):
            try:
                current = hensel_step(current, rng)
            except LiftFailure:
                break
            assert current.ring == mod2k(k)
            assert verify(current)
            assert [v % 2 for v in _flat(current)] == parity, k


def _triple_int_terms() -> tuple[Term, ...]:
    one = IntMatrix.from_rows([[1]])
    return (Term(one, one, one),) * 3


# ---------------------------------------------------------------------------
# lift
# ---------------------------------------------------------------------------


def test_lift_standard_is_trivial() -> None:
    """The schoolbook scheme lifts in the first attempt."""
    result = lift(standard_scheme(Format(2, 3, 2)), attempts=1)
    assert result.ok
    assert result.scheme is not None
    assert result.scheme.ring == INTEGER
    assert verify(result.scheme)
    assert result.attempts[-1].reason == "lifted"


def test_lift_triple_unit_introduces_a_sign() -> None:
    """1 + 1 + 1 = 1 mod 2 lifts to -1 + 1 + 1 = 1 over Z."""
    result = lift(_triple_unit_scheme(), attempts=1)
    assert result.ok and result.scheme is not None
    assert verify(result.scheme)
    coefficients = sorted(v for t in result.scheme.terms for c in t for v in c.entries())
    assert coefficients.count(-1) % 2 == 1


def test_lift_rank_seven_schemes_found_by_walk() -> None:
    """Rank-7 (2,2,2) schemes found over GF(2) lift to integer schemes."""
    start = standard_scheme(Format(2, 2, 2))
    lifted = 0
    for seed in range(8):
        run = walk(start, _make_search_config(seed=seed, target_rank=7))
        if run.best_rank != 7:
            continue
        result = lift(run.best, attempts=10, rng=np.random.default_rng(seed))
        assert result.ok and result.scheme is not None, result.report()
        assert result.scheme.rank == 7
        assert verify(result.scheme)
        assert [v % 2 for v in _flat(result.scheme)] == _flat(run.best)
        lifted += 1
    assert lifted > 0


def test_lift_strassen_mod_two(strassen_gf2: Scheme) -> None:
    """Strassen reduced mod 2 lifts back to an integer rank-7 scheme."""
    result = lift(strassen_gf2, attempts=10, rng=np.random.default_rng(0))
    assert result.ok and result.scheme is not None
    assert result.scheme.rank == 7
    assert verify(result.scheme)


def test_lift_reports_each_failed_attempt() -> None:
    """With k_max=2 the triple-unit scheme never gets a chance to stabilize."""
    result = lift(_triple_unit_scheme(), attempts=3, k_max=2)
    assert not result.ok
    assert len(result.attempts) == 3
    assert all(a.reason == "coefficients not stabilized" for a in result.attempts)
    assert "attempt 2: reached 2^2" in result.report()


def test_lift_refuses_broken_scheme(strassen_gf2: Scheme) -> None:
    """Only correct GF(2) schemes are lifted."""
    broken = strassen_gf2.with_terms(strassen_gf2.terms[:-1])
    with pytest.raises(SchemeError, match="refusing to lift"):
        lift(broken)


def test_lift_rejects_integer_scheme(strassen: Scheme) -> None:
    """Integer input is rejected."""
    with pytest.raises(ValueError, match="needs a GF"):
        lift(strassen)


def test_lift_rejects_bad_k_max() -> None:
    """k_max must lie in 2..62."""
    with pytest.raises(ValueError, match="k_max"):
        lift(standard_scheme(Format(1, 1, 1)), k_max=1)
