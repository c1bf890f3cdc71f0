"""Format-changing transformations: extend, restrict, rotate, transpose.

All maps here send correct schemes to correct schemes. ``rotate`` and
``transpose`` generate the six symmetries of the Brent equations that permute
the factors; ``extend`` glues two schemes side by side and ``restrict``
projects onto a sub-format.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from typing import Literal

import numpy as np

from .core import Format, Scheme, SchemeError, Term, standard_scheme

logger = logging.getLogger(__name__)

Axis = Literal["n", "m", "p"]
Selector = tuple[Sequence[int], Sequence[int], Sequence[int]]


class MorphError(SchemeError):
    """Incompatible formats or rings for a morph."""

    pass


def rotate(s: Scheme) -> Scheme:
    """Cyclic symmetry ``(A, B, C) -> (B, C, A)``; format (n,m,p) becomes (m,p,n)."""
    n, m, p = s.format
    terms = [Term(t.b, t.c, t.a) for t in s.terms]
    return Scheme(Format(m, p, n), s.ring, tuple(terms), note=s.note)


def transpose(s: Scheme) -> Scheme:
    """Transpose symmetry ``(A, B, C) -> (B^T, A^T, C^T)``; (n,m,p) becomes (p,m,n).

    Follows from ``(XY)^T = Y^T X^T``.
    """
    n, m, p = s.format
    terms = [Term(t.b.transpose(), t.a.transpose(), t.c.transpose()) for t in s.terms]
    return Scheme(Format(p, m, n), s.ring, tuple(terms), note=s.note)


def symmetry_orbit(s: Scheme) -> list[Scheme]:
    """The six images of *s* under rotations and transposition, *s* first."""
    t = transpose(s)
    return [s, rotate(s), rotate(rotate(s)), t, rotate(t), rotate(rotate(t))]


def canonical_format(s: Scheme) -> Scheme:
    """The first image of *s* in its symmetry orbit whose format has n <= m <= p."""
    for image in symmetry_orbit(s):
        if image.format.is_canonical():
            return image
    raise AssertionError("symmetry orbit has no sorted format")


def _extend_p(s1: Scheme, s2: Scheme) -> Scheme:
    n, m, p = s1.format
    n2, m2, q = s2.format
    if (n, m) != (n2, m2):
        raise MorphError(f"incompatible formats {s1.format} and {s2.format}")
    width = p + q
    terms = [Term(t.a, t.b.pad(m, width, 0, 0), t.c.pad(width, n, 0, 0)) for t in s1.terms]
    terms += [Term(t.a, t.b.pad(m, width, 0, p), t.c.pad(width, n, p, 0)) for t in s2.terms]
    return Scheme(Format(n, m, width), s1.ring, tuple(terms))


def extend(s1: Scheme, s2: Scheme, axis: Axis = "p") -> Scheme:
    """Glue two schemes along one dimension.

    Along ``p`` the formats (n,m,p) and (n,m,q) give (n,m,p+q): B and C are
    zero-padded so each scheme computes its own block of columns. The other
    axes conjugate the ``p`` case with a rotation.
    """
    if s1.ring != s2.ring:
        raise MorphError(f"ring mismatch: {s1.ring} vs {s2.ring}")
    if axis == "p":
        out = _extend_p(s1, s2)
    elif axis == "n":
        out = rotate(rotate(_extend_p(rotate(s1), rotate(s2))))
    elif axis == "m":
        out = rotate(_extend_p(rotate(rotate(s1)), rotate(rotate(s2))))
    else:
        raise MorphError(f"unknown axis: {axis!r}")
    logger.debug("extended %s + %s along %s -> %s", s1.format, s2.format, axis, out.format)
    return Scheme(out.format, out.ring, out.terms, note=s1.note)


def extend_by_standard(s: Scheme, axis: Axis = "p", extra: int = 1) -> Scheme:
    """Grow one dimension by *extra* using the standard algorithm for the new block."""
    n, m, p = s.format
    block = {
        "n": Format(extra, m, p),
        "m": Format(n, extra, p),
        "p": Format(n, m, extra),
    }.get(axis)
    if block is None:
        raise MorphError(f"unknown axis: {axis!r}")
    return extend(s, standard_scheme(block, s.ring), axis)


def default_selector(source: Format, target: Format) -> Selector:
    """Keep the leading indices of every dimension."""
    return tuple(range(t) for t in target)  # type: ignore[return-value]


def random_selector(source: Format, target: Format, rng: np.random.Generator) -> Selector:
    """Uniformly chosen sorted index subsets of the requested sizes."""
    return tuple(  # type: ignore[return-value]
        sorted(int(v) for v in rng.choice(src, size=tgt, replace=False))
        for src, tgt in zip(source, target)
    )


def restrict(s: Scheme, target: Format, selector: Selector | None = None) -> Scheme:
    """Project *s* onto a sub-format by deleting rows and columns.

    ``selector`` gives, per dimension, the kept indices of (n, m, p). Terms
    whose cropped component vanishes are dropped.
    """
    if any(t > src for t, src in zip(target, s.format)):
        raise MorphError(f"target format {target} exceeds source format {s.format}")
    if selector is None:
        selector = default_selector(s.format, target)
    for dim, (picked, size, src) in enumerate(zip(selector, target, s.format)):
        if len(picked) != size or len(set(picked)) != size or any(not 0 <= i < src for i in picked):
            raise MorphError(f"invalid selector for dimension {'nmp'[dim]}: {list(picked)}")
    rows_n, rows_m, rows_p = (list(picked) for picked in selector)
    terms = []
    for t in s.terms:
        term = Term(t.a.crop(rows_n, rows_m), t.b.crop(rows_m, rows_p), t.c.crop(rows_p, rows_n))
        if not term.has_zero_component():
            terms.append(term)
    return Scheme(target, s.ring, tuple(terms), note=s.note)
