"""Flip-graph moves over GF(2): flips, reductions and splits.

Two layers live here. The scheme-level functions (``flip``, ``reduce``,
``split``, ``find_reductions``, ``enumerate_flips``) take and return immutable
:class:`~flipgraph_mm.core.Scheme` values and validate their arguments. The
:class:`FlipGraphState` class is the mutable working copy a random walk uses:
components are plain ints and per-slot hash indexes make "which terms share
this component" an O(1) lookup.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from enum import IntEnum
from itertools import combinations
from typing import Protocol

from .core import GF2, Format, GF2Matrix, IntMatrix, Scheme, SchemeError, Term, normalize

logger = logging.getLogger(__name__)


class MoveError(SchemeError):
    """A move does not apply to the given scheme."""

    pass


class Slot(IntEnum):
    A = 0
    B = 1
    C = 2


def other_slots(slot: int) -> tuple[int, int]:
    return ((1, 2), (0, 2), (0, 1))[slot]


@dataclass(frozen=True, slots=True)
class FlipMove:
    """Flip between terms ``i`` and ``j`` that share component ``shared``.

    Term ``i`` absorbs term ``j`` in slot ``direction``; term ``j`` compensates
    in the remaining slot::

        (x, y_i, z_i), (x, y_j, z_j)  ->  (x, y_i + y_j, z_i), (x, y_j, z_j - z_i)
    """

    i: int
    j: int
    shared: Slot
    direction: Slot


@dataclass(frozen=True, slots=True)
class ReductionMove:
    """Terms ``i < j`` agree in two slots; ``slot`` is the one that gets summed.

    A pair of identical terms is reported with ``slot`` C and cancels entirely.
    """

    i: int
    j: int
    slot: Slot


@dataclass(frozen=True, slots=True)
class SplitMove:
    """Replace component ``slot`` of term ``i`` by ``mask`` and add a term with the rest."""

    i: int
    slot: Slot
    mask: GF2Matrix


def _require_gf2(s: Scheme, what: str) -> None:
    if s.ring != GF2:
        raise MoveError(f"{what} is only defined over GF(2), got {s.ring}")


def _without_zero_terms(s: Scheme, terms: list[Term]) -> Scheme:
    return s.with_terms([t for t in terms if not t.has_zero_component()])


def flip(s: Scheme, mv: FlipMove) -> Scheme:
    """Apply a flip; the rank drops by one if a component becomes zero."""
    _require_gf2(s, "flip")
    r = len(s.terms)
    if mv.i == mv.j or not (0 <= mv.i < r and 0 <= mv.j < r):
        raise MoveError(f"not a flip: invalid term indices {mv.i}, {mv.j}")
    if mv.direction == mv.shared:
        raise MoveError("not a flip: direction equals the shared slot")
    ti, tj = s.terms[mv.i], s.terms[mv.j]
    if ti[mv.shared] != tj[mv.shared]:
        raise MoveError(f"not a flip: terms {mv.i} and {mv.j} differ in slot {Slot(mv.shared).name}")
    w = 3 - mv.shared - mv.direction
    terms = list(s.terms)
    terms[mv.i] = ti.with_component(mv.direction, ti[mv.direction] + tj[mv.direction])
    terms[mv.j] = tj.with_component(w, tj[w] - ti[w])
    return _without_zero_terms(s, terms)


def find_reductions(s: Scheme) -> list[ReductionMove]:
    """All term pairs that agree in at least two slots, in index order."""
    seen: set[tuple[int, int]] = set()
    moves = []
    # Buckets keyed on the two slots that must agree; the third is summed.
    for slot in (Slot.C, Slot.B, Slot.A):
        keep = other_slots(slot)
        buckets: dict[tuple[object, object], list[int]] = {}
        for idx, term in enumerate(s.terms):
            buckets.setdefault((term[keep[0]].key, term[keep[1]].key), []).append(idx)
        for members in buckets.values():
            for i, j in combinations(members, 2):
                if (i, j) not in seen:
                    seen.add((i, j))
                    moves.append(ReductionMove(i, j, slot))
    moves.sort(key=lambda mv: (mv.i, mv.j))
    return moves


def reduce(s: Scheme, mv: ReductionMove) -> Scheme:
    """Merge two terms that agree in two slots into one (or none)."""
    r = len(s.terms)
    if mv.i == mv.j or not (0 <= mv.i < r and 0 <= mv.j < r):
        raise MoveError(f"not a reduction: invalid term indices {mv.i}, {mv.j}")
    ti, tj = s.terms[mv.i], s.terms[mv.j]
    for keep in other_slots(mv.slot):
        if ti[keep] != tj[keep]:
            raise MoveError(f"not a reduction: terms {mv.i} and {mv.j} differ in slot {Slot(keep).name}")
    merged = ti[mv.slot] + tj[mv.slot]
    if isinstance(merged, IntMatrix):
        merged = merged.reduced(s.ring)
    terms = list(s.terms)
    terms[mv.i] = ti.with_component(mv.slot, merged)
    del terms[mv.j]
    return _without_zero_terms(s, terms)


def split(s: Scheme, mv: SplitMove) -> Scheme:
    """Split term ``i`` along one slot; the new term is inserted right after it."""
    _require_gf2(s, "split")
    if not 0 <= mv.i < len(s.terms):
        raise MoveError(f"invalid term index {mv.i}")
    term = s.terms[mv.i]
    component = term[mv.slot]
    if mv.mask.shape != component.shape:
        raise MoveError("split mask has the wrong shape")
    if mv.mask.is_zero() or mv.mask == component:
        raise MoveError("degenerate split")
    terms = list(s.terms)
    terms[mv.i] = term.with_component(mv.slot, mv.mask)
    terms.insert(mv.i + 1, term.with_component(mv.slot, component + mv.mask))
    return s.with_terms(terms)


def enumerate_flips(s: Scheme) -> Iterator[FlipMove]:
    """Every legal flip of *s* in a deterministic order.

    Per slot, terms are grouped by component value (groups in order of first
    appearance); each ordered pair in a group yields two moves, one per
    direction.
    """
    _require_gf2(s, "flip")
    for shared in Slot:
        groups: dict[object, list[int]] = {}
        for idx, term in enumerate(s.terms):
            groups.setdefault(term[shared].key, []).append(idx)
        directions = other_slots(shared)
        for members in groups.values():
            if len(members) < 2:
                continue
            for i in members:
                for j in members:
                    if i != j:
                        for direction in directions:
                            yield FlipMove(i, j, shared, Slot(direction))


# ---------------------------------------------------------------------------
# Mutable walker state
# ---------------------------------------------------------------------------


class MoveSampler(Protocol):
    """Source of the random choices a walker makes."""

    def below(self, n: int) -> int: ...

    def bits(self, width: int) -> int: ...


class FlipGraphState:
    """Mutable GF(2) scheme with per-slot indexes of shared components.

    ``comps[s][t]`` is the bit pattern of slot ``s`` of term ``t``. For each
    slot, ``groups`` maps a component value to the terms carrying it and
    ``shared`` lists the values carried by two or more terms, so a uniform
    flip is drawn without scanning the scheme. Terms are removed by moving
    the last term into the hole.
    """

    def __init__(self, fmt: Format, a: list[int], b: list[int], c: list[int]) -> None:
        self.format = fmt
        self.comps: list[list[int]] = [list(a), list(b), list(c)]
        self.widths = fmt.sizes
        self._groups: list[dict[int, list[int]]] = [{}, {}, {}]
        self._shared: list[list[int]] = [[], [], []]
        self._shared_pos: list[dict[int, int]] = [{}, {}, {}]
        self.flips = 0
        self.reductions = 0
        self.splits = 0
        for t in range(len(a)):
            for s in range(3):
                self._attach(s, t, self.comps[s][t])

    @classmethod
    def from_scheme(cls, s: Scheme) -> FlipGraphState:
        _require_gf2(s, "flip-graph search")
        terms = [t for t in s.terms if not t.has_zero_component()]
        return cls(
            s.format,
            [t.a.bits for t in terms],  # type: ignore[union-attr]
            [t.b.bits for t in terms],  # type: ignore[union-attr]
            [t.c.bits for t in terms],  # type: ignore[union-attr]
        )

    def to_scheme(self, note: str = "") -> Scheme:
        shapes = self.format.shapes
        terms = [
            Term(*(GF2Matrix(*shapes[s], self.comps[s][t]) for s in range(3)))
            for t in range(self.rank)
        ]
        return normalize(Scheme(self.format, GF2, tuple(terms), note=note))

    @property
    def rank(self) -> int:
        return len(self.comps[0])

    def shared_count(self) -> int:
        """Number of (slot, value) groups holding two or more terms."""
        return sum(len(values) for values in self._shared)

    # -- index maintenance ---------------------------------------------------

    def _attach(self, s: int, t: int, value: int) -> None:
        group = self._groups[s].setdefault(value, [])
        group.append(t)
        if len(group) == 2:
            self._shared_pos[s][value] = len(self._shared[s])
            self._shared[s].append(value)

    def _detach(self, s: int, t: int, value: int) -> None:
        group = self._groups[s][value]
        group.remove(t)
        if len(group) == 1:
            pos = self._shared_pos[s].pop(value)
            last = self._shared[s].pop()
            if last != value:
                self._shared[s][pos] = last
                self._shared_pos[s][last] = pos
        elif not group:
            del self._groups[s][value]

    def _set(self, s: int, t: int, value: int) -> None:
        self._detach(s, t, self.comps[s][t])
        self.comps[s][t] = value
        self._attach(s, t, value)

    def _append(self, a: int, b: int, c: int) -> int:
        t = self.rank
        for s, value in enumerate((a, b, c)):
            self.comps[s].append(value)
            self._attach(s, t, value)
        return t

    def _remove(self, t: int) -> int:
        """Remove term ``t``; returns the old index of the term moved into ``t``, or -1."""
        last = self.rank - 1
        for s in range(3):
            self._detach(s, t, self.comps[s][t])
        moved = -1
        if t != last:
            for s in range(3):
                value = self.comps[s][last]
                self._detach(s, last, value)
                self.comps[s][t] = value
                self._attach(s, t, value)
            moved = last
        for s in range(3):
            self.comps[s].pop()
        return moved

    def _drop(self, t: int, queue: list[int]) -> int:
        moved = self._remove(t)
        queue[:] = [x for x in queue if x != t]
        if moved >= 0:
            queue[:] = [t if x == moved else x for x in queue]
        return moved

    # -- reductions ----------------------------------------------------------

    def _find_partner(self, t: int) -> tuple[int, int] | None:
        comps = self.comps
        for s in range(3):
            group = self._groups[s][comps[s][t]]
            if len(group) < 2:
                continue
            o1, o2 = other_slots(s)
            for u in group:
                if u == t:
                    continue
                if comps[o1][u] == comps[o1][t]:
                    return u, o2
                if comps[o2][u] == comps[o2][t]:
                    return u, o1
        return None

    def _settle(self, pending: list[int]) -> None:
        """Drop zero terms among *pending* and apply reductions until none apply."""
        comps = self.comps
        queue = list(pending)
        while queue:
            t = queue.pop()
            if not (comps[0][t] and comps[1][t] and comps[2][t]):
                self._drop(t, queue)
                continue
            found = self._find_partner(t)
            if found is None:
                continue
            u, slot = found
            self.reductions += 1
            merged = comps[slot][t] ^ comps[slot][u]
            if merged == 0:
                hi, lo = max(t, u), min(t, u)
                self._drop(hi, queue)
                self._drop(lo, queue)
                continue
            self._set(slot, t, merged)
            moved = self._drop(u, queue)
            if moved == t:
                t = u
            queue.append(t)

    def reduce_all(self) -> None:
        """Apply reductions anywhere in the scheme until none apply."""
        self._settle(list(range(self.rank)))

    # -- moves ---------------------------------------------------------------

    def flip(self, shared: int, i: int, j: int, direction: int) -> None:
        """Flip terms ``i`` and ``j`` (sharing slot ``shared``), then settle."""
        w = 3 - shared - direction
        comps = self.comps
        self._set(direction, i, comps[direction][i] ^ comps[direction][j])
        self._set(w, j, comps[w][j] ^ comps[w][i])
        self.flips += 1
        self._settle([i, j])

    def _random_shared_pair(self, rng: MoveSampler) -> tuple[int, int, int] | None:
        sizes = [len(values) for values in self._shared]
        total = sum(sizes)
        if total == 0:
            return None
        r = rng.below(total)
        s = 0
        while r >= sizes[s]:
            r -= sizes[s]
            s += 1
        group = self._groups[s][self._shared[s][r]]
        k = len(group)
        x = rng.below(k)
        y = rng.below(k - 1)
        if y >= x:
            y += 1
        return s, group[x], group[y]

    def random_flip(self, rng: MoveSampler) -> bool:
        """Apply one uniformly drawn flip; False when the state has none."""
        picked = self._random_shared_pair(rng)
        if picked is None:
            return False
        s, i, j = picked
        o1, o2 = other_slots(s)
        self.flip(s, i, j, o1 if rng.below(2) == 0 else o2)
        return True

    def escape(self, rng: MoveSampler, tries: int = 32) -> bool:
        """Raise the rank by one to leave a plateau.

        A term ``t`` that shares slot ``s1`` with a partner ``k`` is split along
        another slot, then the new half is flipped against ``k`` so it no
        longer agrees with ``t`` in two slots (which would merge it straight
        back). Returns False if no splittable term was found.
        """
        comps = self.comps
        for _ in range(tries):
            picked = self._random_shared_pair(rng)
            if picked is None:
                return False
            s1, t, k = picked
            o1, o2 = other_slots(s1)
            slot, s2 = (o1, o2) if rng.below(2) == 0 else (o2, o1)
            width = self.widths[slot]
            value = comps[slot][t]
            if width < 2:
                continue
            mask = rng.bits(width)
            if mask == 0 or mask == value:
                continue
            parts = [comps[0][t], comps[1][t], comps[2][t]]
            parts[slot] = value ^ mask
            self.splits += 1
            nt = self._append(*parts)
            self._set(slot, t, mask)
            # decouple: k absorbs nt in `slot`, nt compensates in s2
            self._set(slot, k, comps[slot][k] ^ comps[slot][nt])
            self._set(s2, nt, comps[s2][nt] ^ comps[s2][k])
            self.flips += 1
            self._settle([t, k, nt])
            return True
        return False


def random_flip(s: Scheme, rng: MoveSampler) -> Scheme:
    """Scheme-level convenience: one random flip followed by greedy reductions."""
    state = FlipGraphState.from_scheme(s)
    if not state.random_flip(rng):
        raise MoveError("scheme has no flips")
    return state.to_scheme(note=s.note)


def greedy_reduce(s: Scheme) -> Scheme:
    """Apply reductions until none apply."""
    state = FlipGraphState.from_scheme(s)
    state.reduce_all()
    return state.to_scheme(note=s.note)
