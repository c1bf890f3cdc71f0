"""Reading and writing schemes, matrices and published scheme files.

Canonical text format::

    format 2 2 2 integer 7
    note optional free text
    1 0 0 1 | 1 0 0 1 | 1 0 0 1
    ...

One term per line; the three blocks hold the A, B and C coefficients in
row-major order (C is p x n). Blank lines and lines starting with ``#`` are
ignored.
"""

from __future__ import annotations

import logging
import os
import re
import tempfile
from collections.abc import Iterable
from itertools import permutations, product
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np

from .core import (
    GF2,
    INTEGER,
    Format,
    IntMatrix,
    Ring,
    Scheme,
    SchemeError,
    Term,
    matrix_from_entries,
    normalize,
    to_ring,
    verify,
)

logger = logging.getLogger(__name__)


class KnownRank(NamedTuple):
    naive: int
    previous_record: int
    flip_graph: int
    ring: str = "integer"


# Ranks reached by flip-graph search against the best previously known ranks
# (characteristic zero) for formats that were improved or tested.
KNOWN_RANKS: dict[tuple[int, int, int], KnownRank] = {
    (4, 5, 5): KnownRank(100, 76, 76),
    (4, 5, 6): KnownRank(120, 93, 90),
    (4, 5, 7): KnownRank(140, 109, 104),
    (4, 6, 6): KnownRank(144, 105, 106),
    (5, 5, 6): KnownRank(150, 116, 110),
    (4, 6, 7): KnownRank(168, 125, 123),
    (5, 5, 7): KnownRank(175, 133, 127),
    (5, 6, 6): KnownRank(180, 137, 130),
    (4, 7, 7): KnownRank(196, 147, 144),
    (5, 6, 7): KnownRank(210, 159, 150),
    (5, 7, 7): KnownRank(245, 185, 176),
    (6, 6, 7): KnownRank(252, 185, 183),
    (6, 7, 7): KnownRank(294, 215, 221, ring="gf2"),
}


class SchemeParseError(SchemeError):
    """Malformed scheme or matrix file."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


# ---------------------------------------------------------------------------
# Canonical format
# ---------------------------------------------------------------------------


def serialize(s: Scheme) -> bytes:
    """Canonical text of *s*; terms are normalized first."""
    s = normalize(s)
    n, m, p = s.format
    lines = [f"format {n} {m} {p} {s.ring} {s.rank}"]
    if s.note:
        lines.append(f"note {' '.join(s.note.split())}")
    for term in s.terms:
        lines.append(" | ".join(" ".join(str(v) for v in c.entries()) for c in term))
    return ("\n".join(lines) + "\n").encode()


def _content_lines(text: str) -> Iterable[tuple[int, str]]:
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield number, line


def parse(data: bytes | str) -> Scheme:
    """Parse the canonical text format; raises :class:`SchemeParseError`."""
    if isinstance(data, bytes):
        try:
            text = data.decode()
        except UnicodeDecodeError as e:
            raise SchemeParseError(f"not UTF-8 text: {e}") from None
    else:
        text = data
    lines = list(_content_lines(text))
    if not lines:
        raise SchemeParseError("empty scheme file", 1)

    header_line, header = lines[0]
    tokens = header.split()
    if len(tokens) != 6 or tokens[0] != "format":
        raise SchemeParseError("malformed header, expected 'format n m p ring rank'", header_line)
    try:
        fmt = Format(int(tokens[1]), int(tokens[2]), int(tokens[3]))
        ring = Ring.parse(tokens[4])
        declared = int(tokens[5])
    except ValueError as e:
        raise SchemeParseError(f"malformed header: {e}", header_line) from None

    body = lines[1:]
    note = ""
    if body and body[0][1].startswith("note"):
        note = body[0][1][4:].strip()
        body = body[1:]

    sizes = fmt.sizes
    shapes = fmt.shapes
    terms = []
    for number, line in body:
        blocks = line.split("|")
        if len(blocks) != 3:
            raise SchemeParseError(f"expected 3 '|'-separated blocks, got {len(blocks)}", number)
        parts = []
        for slot, block in enumerate(blocks):
            try:
                values = [int(tok) for tok in block.split()]
            except ValueError:
                raise SchemeParseError(f"non-integer coefficient in block {'ABC'[slot]}", number) from None
            if len(values) != sizes[slot]:
                raise SchemeParseError(
                    f"dimension mismatch: block {'ABC'[slot]} has {len(values)} entries, "
                    f"expected {sizes[slot]}",
                    number,
                )
            bad = [v for v in values if not ring.contains(v)]
            if bad:
                raise SchemeParseError(f"non-ring coefficient {bad[0]} for {ring}", number)
            parts.append(matrix_from_entries(ring, *shapes[slot], values))
        terms.append(Term(*parts))

    if len(terms) != declared:
        raise SchemeParseError(
            f"header declares rank {declared} but body has {len(terms)} terms", header_line
        )
    return Scheme(fmt, ring, tuple(terms), note=note)


def atomic_write(path: Path | str, data: bytes) -> Path:
    """Write *data* to *path* through a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def load_scheme(path: Path | str) -> Scheme:
    return parse(Path(path).read_bytes())


def save_scheme(s: Scheme, path: Path | str) -> Path:
    return atomic_write(path, serialize(s))


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


def read_matrix(path: Path | str) -> np.ndarray:
    """Read a whitespace-separated integer matrix, one row per line."""
    rows = []
    for number, line in _content_lines(Path(path).read_text()):
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise SchemeParseError("non-integer matrix entry", number) from None
        if len(rows[-1]) != len(rows[0]):
            raise SchemeParseError("ragged matrix row", number)
    if not rows:
        raise SchemeParseError("empty matrix file", 1)
    return np.array(rows, dtype=object)


def format_matrix(z: Any) -> str:
    return "\n".join(" ".join(str(int(v)) for v in row) for row in np.asarray(z)) + "\n"


# ---------------------------------------------------------------------------
# Published schemes
# ---------------------------------------------------------------------------

# a12, b_3_4, c[1,2]; optional signed integer coefficient in front
_VARIABLE = re.compile(
    r"([+-])?\s*(\d+)?\s*\*?\s*([abc])(?:_?\{?(\d+)\}?_\{?(\d+)\}?|\[(\d+),\s*(\d+)\]|(\d)(\d))"
)

RawTerm = tuple[dict[tuple[int, int], int], dict[tuple[int, int], int], dict[tuple[int, int], int]]


def _parse_expression_line(line: str) -> RawTerm:
    factors: RawTerm = ({}, {}, {})
    for match in _VARIABLE.finditer(line):
        sign, coeff, letter = match.group(1), match.group(2), match.group(3)
        digits = [g for g in match.groups()[3:] if g is not None]
        i, j = int(digits[0]), int(digits[1])
        value = int(coeff) if coeff else 1
        if sign == "-":
            value = -value
        slot = "abc".index(letter)
        factors[slot][(i, j)] = factors[slot].get((i, j), 0) + value
    return factors


def _raw_expression_terms(text: str) -> list[RawTerm]:
    terms = []
    for number, line in _content_lines(text):
        raw = _parse_expression_line(line)
        if not any(raw):
            continue
        if not all(raw):
            raise SchemeParseError("product is missing an a, b or c factor", number)
        terms.append(raw)
    return terms


def _raw_to_matrices(terms: list[RawTerm]) -> list[tuple[IntMatrix, IntMatrix, IntMatrix]]:
    # Index base and extent per factor letter, shared across terms.
    lows = [min(min(k) for t in terms for k in t[slot]) for slot in range(3)]
    base = min(lows)
    dims = []
    for slot in range(3):
        rows = max(i for t in terms for i, _ in t[slot]) - base + 1
        cols = max(j for t in terms for _, j in t[slot]) - base + 1
        dims.append((rows, cols))
    out = []
    for t in terms:
        mats = []
        for slot in range(3):
            rows, cols = dims[slot]
            data = [0] * (rows * cols)
            for (i, j), v in t[slot].items():
                data[(i - base) * cols + (j - base)] += v
            mats.append(IntMatrix(rows, cols, tuple(data)))
        out.append((mats[0], mats[1], mats[2]))
    return out


def _raw_numeric_terms(text: str) -> list[tuple[IntMatrix, IntMatrix, IntMatrix]] | None:
    """``n m p r`` header, then r lines of A, B, C coefficients (C as p x n)."""
    lines = list(_content_lines(text))
    try:
        header = [int(tok) for tok in lines[0][1].split()]
    except ValueError:
        return None
    if len(header) != 4:
        return None
    n, m, p, r = header
    values = []
    for number, line in lines[1:]:
        try:
            values.extend(int(tok) for tok in line.replace("|", " ").split())
        except ValueError:
            raise SchemeParseError("non-integer coefficient", number) from None
    width = n * m + m * p + p * n
    if len(values) != r * width:
        raise SchemeParseError(f"expected {r * width} coefficients, got {len(values)}", lines[0][0])
    out = []
    for t in range(r):
        chunk = values[t * width : (t + 1) * width]
        out.append(
            (
                IntMatrix(n, m, tuple(chunk[: n * m])),
                IntMatrix(m, p, tuple(chunk[n * m : n * m + m * p])),
                IntMatrix(p, n, tuple(chunk[n * m + m * p :])),
            )
        )
    return out


def _variants(hint: str | None) -> list[tuple[str, tuple[int, int, int], tuple[bool, bool, bool]]]:
    variants = []
    for order in permutations(range(3)):
        for flags in product((False, True), repeat=3):
            label = "factors=" + "".join("abc"[i] for i in order)
            label += " transposed=" + "".join("abc"[i] if flags[q] else "-" for q, i in enumerate(order))
            variants.append((label, order, flags))
    if hint:
        variants.sort(key=lambda v: v[0] != hint)
    return variants


def _candidate(
    raw: list[tuple[IntMatrix, IntMatrix, IntMatrix]],
    order: tuple[int, int, int],
    flags: tuple[bool, bool, bool],
) -> tuple[Format, list[Term]] | None:
    picked = []
    for q in range(3):
        picked.append([t[order[q]].transpose() if flags[q] else t[order[q]] for t in raw])
    (n, m), (m2, p), (p2, n2) = (picked[q][0].shape for q in range(3))
    if m != m2 or p != p2 or n != n2:
        return None
    try:
        fmt = Format(n, m, p)
    except ValueError:
        return None
    return fmt, [Term(picked[0][t], picked[1][t], picked[2][t]) for t in range(len(raw))]


def import_published(data: bytes | str, hint: str | None = None) -> Scheme:
    """Import a scheme from a published corpus file.

    Accepts the canonical format, a numeric ``n m p r`` listing, or one
    product of linear forms per line such as ``(a11+a22)*(b11-b21)*(c12)``.
    Published files differ in which factor plays which role and whether the
    output factor is transposed, so every factor permutation and transpose
    pattern is tried, first over the integers and then over GF(2), until one
    verifies. The winning variant is recorded in the scheme note.
    """
    text = data.decode() if isinstance(data, bytes) else data
    lines = list(_content_lines(text))
    if not lines:
        raise SchemeParseError("empty scheme file", 1)
    if lines[0][1].startswith("format"):
        scheme = parse(text)
        if not verify(scheme):
            raise SchemeError("unrecognized convention or broken scheme")
        return scheme

    raw = _raw_numeric_terms(text)
    if raw is None:
        expression_terms = _raw_expression_terms(text)
        if not expression_terms:
            raise SchemeParseError("no products found", lines[0][0])
        raw = _raw_to_matrices(expression_terms)

    for ring in (INTEGER, GF2):
        for label, order, flags in _variants(hint):
            candidate = _candidate(raw, order, flags)
            if candidate is None:
                continue
            fmt, terms = candidate
            scheme = to_ring(Scheme(fmt, INTEGER, tuple(terms)), ring)
            if verify(scheme):
                logger.info("Imported %s scheme of rank %d (%s, %s)", fmt, scheme.rank, label, ring)
                return normalize(Scheme(fmt, ring, scheme.terms, note=f"{label} ring={ring}"))
    raise SchemeError("unrecognized convention or broken scheme")
