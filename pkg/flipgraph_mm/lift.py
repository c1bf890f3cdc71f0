"""Hensel lifting of GF(2) schemes to integer coefficients.

A scheme that satisfies the Brent equations mod 2^k is corrected to one that
satisfies them mod 2^(k+1) by solving a linear system over GF(2) whose matrix
is the Jacobian of the equations at the current coefficients. The Jacobian
mod 2 only depends on the coefficients mod 2, so it is the same at every step.
Once the balanced coefficients stop changing they are tried as an integer
scheme.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import (
    GF2,
    INTEGER,
    MAX_MOD_EXPONENT,
    Scheme,
    SchemeError,
    Term,
    balanced,
    brent_residuals,
    matrix_from_entries,
    mod2k,
    verify,
)

logger = logging.getLogger(__name__)


class LiftFailure(SchemeError):
    """Lifting stopped at modulus 2^k."""

    def __init__(self, reason: str, k: int):
        self.reason = reason
        self.k = k
        super().__init__(f"{reason} (k={k})")


@dataclass
class LiftAttempt:
    attempt: int
    k_reached: int
    reason: str


@dataclass
class LiftResult:
    """Integer scheme if some attempt succeeded, plus a record of every attempt."""

    scheme: Scheme | None
    attempts: list[LiftAttempt] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.scheme is not None

    def report(self) -> str:
        lines = [f"attempt {a.attempt}: reached 2^{a.k_reached}, {a.reason}" for a in self.attempts]
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# GF(2) linear algebra
# ---------------------------------------------------------------------------


def solve_gf2(
    matrix: np.ndarray, rhs: np.ndarray, rng: np.random.Generator | None = None
) -> np.ndarray | None:
    """Solve ``matrix @ x = rhs`` over GF(2).

    Rows are bit-packed and reduced to reduced row echelon form with
    vectorized XOR. Free variables are drawn from *rng*, or zero without one.
    Returns None when the system is inconsistent.
    """
    rows, cols = matrix.shape
    aug = np.packbits(
        np.concatenate([matrix.astype(np.uint8) & 1, (rhs.astype(np.uint8) & 1)[:, None]], axis=1),
        axis=1,
    )
    pivots: list[int] = []
    r = 0
    for col in range(cols):
        if r == rows:
            break
        byte, shift = divmod(col, 8)
        column = (aug[:, byte] >> (7 - shift)) & 1
        below = np.flatnonzero(column[r:])
        if below.size == 0:
            continue
        p = r + int(below[0])
        if p != r:
            aug[[r, p]] = aug[[p, r]]
            column[[r, p]] = column[[p, r]]
        hits = np.flatnonzero(column)
        hits = hits[hits != r]
        if hits.size:
            aug[hits] ^= aug[r]
        pivots.append(col)
        r += 1

    dense = np.unpackbits(aug, axis=1, count=cols + 1)
    if dense[r:, cols].any():
        return None
    pivot_set = set(pivots)
    free = np.array([c for c in range(cols) if c not in pivot_set], dtype=np.intp)
    x = np.zeros(cols, dtype=np.uint8)
    if rng is not None and free.size:
        x[free] = rng.integers(0, 2, size=free.size, dtype=np.uint8)
    free_values = x[free].astype(np.int64)
    for i, col in enumerate(pivots):
        x[col] = (int(dense[i, cols]) + int(dense[i, free].astype(np.int64) @ free_values)) & 1
    return x


def jacobian_mod2(s: Scheme) -> np.ndarray:
    """Jacobian of the Brent equations mod 2, one column per coefficient.

    Rows follow :func:`~flipgraph_mm.core.brent_residuals`; columns run over
    terms, and within a term over the A, B and C coefficients.
    """
    nm, mp, pn = s.format.sizes
    width = nm + mp + pn
    jac = np.zeros((nm, mp, pn, width * len(s.terms)), dtype=np.uint8)
    ix, iy, iz = np.arange(nm), np.arange(mp), np.arange(pn)
    for t, term in enumerate(s.terms):
        a, b, c = (np.array(comp.entries(), dtype=np.int64) & 1 for comp in term)
        off = t * width
        jac[ix, :, :, off + ix] = np.outer(b, c)
        jac[:, iy, :, off + nm + iy] = np.outer(a, c)
        jac[:, :, iz, off + nm + mp + iz] = np.outer(a, b)[:, :, None]
    return jac.reshape(nm * mp * pn, width * len(s.terms))


# ---------------------------------------------------------------------------
# Lifting
# ---------------------------------------------------------------------------


def _coefficients(s: Scheme) -> list[int]:
    return [v for term in s.terms for comp in term for v in comp.entries()]


def _from_coefficients(s: Scheme, values: list[int], ring_k: int) -> Scheme:
    ring = mod2k(ring_k)
    shapes = s.format.shapes
    sizes = s.format.sizes
    terms = []
    pos = 0
    for _ in s.terms:
        parts = []
        for slot in range(3):
            parts.append(matrix_from_entries(ring, *shapes[slot], values[pos : pos + sizes[slot]]))
            pos += sizes[slot]
        terms.append(Term(*parts))
    return Scheme(s.format, ring, tuple(terms), note=s.note)


def _exponent(s: Scheme) -> int:
    if s.ring == GF2:
        return 1
    if s.ring.kind == "mod2k":
        return s.ring.k
    raise ValueError(f"Hensel lifting works on GF(2) or mod 2^k schemes, got {s.ring}")


def hensel_step(s: Scheme, rng: np.random.Generator | None = None) -> Scheme:
    """Lift a scheme valid mod 2^k to one valid mod 2^(k+1).

    The correction is first searched among coefficients that are odd (keeping
    the support), then among all coefficients. *rng* picks the free part of
    the correction; without it the free part is zero.
    """
    k = _exponent(s)
    if k + 1 > MAX_MOD_EXPONENT:
        raise LiftFailure("modulus limit reached", k)
    modulus = 1 << k
    residuals = brent_residuals(s)
    if any(r % modulus for r in residuals):
        raise ValueError(f"scheme does not satisfy the Brent equations mod 2^{k}")
    error = np.array([(r >> k) & 1 for r in residuals], dtype=np.uint8)
    values = _coefficients(s)
    if not error.any():
        return _from_coefficients(s, values, k + 1)

    jac = jacobian_mod2(s)
    support = np.flatnonzero(np.array(values, dtype=object) % 2 != 0)
    delta = np.zeros(len(values), dtype=np.uint8)
    restricted = solve_gf2(jac[:, support], error, rng)
    if restricted is not None:
        delta[support] = restricted
    else:
        full = solve_gf2(jac, error, rng)
        if full is None:
            raise LiftFailure(f"obstructed at 2^{k + 1}", k)
        delta = full
        logger.debug("lift step %d needed coefficients outside the support", k)

    # F(x + 2^k d) = F(x) + 2^k J d (mod 2^(k+1)); the residual is 2^k e, so J d = e
    lifted = [balanced(v + (int(d) << k), 1 << (k + 1)) for v, d in zip(values, delta)]
    return _from_coefficients(s, lifted, k + 1)


def reconstruct_integers(s: Scheme) -> Scheme:
    """Read balanced mod 2^k coefficients as integers; fails unless that verifies over Z."""
    if s.ring.kind != "mod2k":
        raise ValueError(f"reconstruct_integers needs a mod 2^k scheme, got {s.ring}")
    candidate = Scheme(
        s.format,
        INTEGER,
        s.terms,
        note=s.note,
    )
    if not verify(candidate):
        raise LiftFailure("coefficients not stabilized", s.ring.k)
    return candidate


def lift(
    s: Scheme,
    attempts: int = 10,
    k_max: int = 32,
    rng: np.random.Generator | None = None,
) -> LiftResult:
    """Try to turn a GF(2) scheme into an integer scheme.

    Each attempt lifts step by step up to 2^k_max and tries integer
    reconstruction whenever the balanced coefficients did not change in the
    last step. The first attempt uses zero free parts; later attempts choose
    the free part of the first correction at random.
    """
    if s.ring != GF2:
        raise ValueError(f"lift needs a GF(2) scheme, got {s.ring}")
    if not verify(s):
        raise SchemeError("refusing to lift a scheme that does not verify over GF(2)")
    if not 2 <= k_max <= MAX_MOD_EXPONENT:
        raise ValueError(f"k_max must be in 2..{MAX_MOD_EXPONENT}, got {k_max}")
    rng = rng if rng is not None else np.random.default_rng()
    result = LiftResult(scheme=None)

    for attempt in range(attempts):
        current = s
        k = 1
        previous = _coefficients(s)
        tried: list[int] | None = None
        reason = "coefficients not stabilized"
        try:
            while k < k_max:
                current = hensel_step(current, rng if (attempt and k == 1) else None)
                k += 1
                values = _coefficients(current)
                if values == previous and values != tried:
                    tried = values
                    try:
                        scheme = reconstruct_integers(current)
                    except LiftFailure:
                        pass
                    else:
                        result.attempts.append(LiftAttempt(attempt, k, "lifted"))
                        result.scheme = scheme
                        logger.info("lifted %s rank %d at 2^%d", s.format, s.rank, k)
                        return result
                previous = values
        except LiftFailure as e:
            reason = e.reason
            k = e.k
        result.attempts.append(LiftAttempt(attempt, k, reason))
        logger.info("lift attempt %d failed at 2^%d: %s", attempt, k, reason)
    return result
