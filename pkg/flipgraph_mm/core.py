"""Core types for flipgraph-mm: formats, rings, matrices, terms and schemes.

A scheme for the format ``(n, m, p)`` is a list of rank-one terms ``(A, B, C)``
with ``A`` of shape n x m, ``B`` of shape m x p and ``C`` of shape p x n. It is
correct when the Brent equations hold::

    sum_l A_l[i1, i2] * B_l[j1, j2] * C_l[k1, k2]
        == [i2 == j1] * [j2 == k1] * [k2 == i1]

for every index tuple. ``C`` is stored transposed with respect to the product,
so the product entry is ``Z[i, k] = sum_l C_l[k, i] * m_l``. This cyclic form
makes rotating the three factors a symmetry of the equations.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Literal, TypedDict, Union

import numpy as np

logger = logging.getLogger(__name__)

MAX_DIM = 32
MAX_MOD_EXPONENT = 62


class SchemeError(Exception):
    """Base error for scheme construction and scheme operations."""

    pass


class FormatMismatchError(SchemeError):
    """Matrix or term dimensions do not match the scheme format."""

    pass


class RingMismatchError(SchemeError):
    """Coefficients or operands live in a different ring than expected."""

    pass


# ---------------------------------------------------------------------------
# Formats and rings
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Format:
    """Dimensions of an n x m by m x p matrix product."""

    n: int
    m: int
    p: int

    def __post_init__(self) -> None:
        for name in ("n", "m", "p"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ValueError(f"Format dimension {name} must be an int, got {value!r}")
            if not 1 <= value <= MAX_DIM:
                raise ValueError(f"Format dimension {name} must be in 1..{MAX_DIM}, got {value}")

    def __iter__(self) -> Iterator[int]:
        return iter((self.n, self.m, self.p))

    def __str__(self) -> str:
        return f"({self.n},{self.m},{self.p})"

    @property
    def naive_rank(self) -> int:
        return self.n * self.m * self.p

    @property
    def shapes(self) -> tuple[tuple[int, int], tuple[int, int], tuple[int, int]]:
        """Shapes of the A, B and C components."""
        return (self.n, self.m), (self.m, self.p), (self.p, self.n)

    @property
    def sizes(self) -> tuple[int, int, int]:
        """Number of coefficients in the A, B and C components."""
        return self.n * self.m, self.m * self.p, self.p * self.n

    def is_canonical(self) -> bool:
        return self.n <= self.m <= self.p


@dataclass(frozen=True, slots=True)
class Ring:
    """Coefficient ring tag: GF(2), Z mod 2^k, or the integers."""

    kind: Literal["gf2", "mod2k", "integer"]
    k: int = 0

    def __post_init__(self) -> None:
        if self.kind == "mod2k":
            if not 2 <= self.k <= MAX_MOD_EXPONENT:
                raise ValueError(f"mod 2^k ring requires 2 <= k <= {MAX_MOD_EXPONENT}, got {self.k}")
        elif self.kind in ("gf2", "integer"):
            if self.k != 0:
                raise ValueError(f"Ring {self.kind} takes no exponent, got k={self.k}")
        else:
            raise ValueError(f"Unknown ring kind: {self.kind!r}")

    def __str__(self) -> str:
        if self.kind == "mod2k":
            return f"mod2^{self.k}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> Ring:
        """Parse ``gf2``, ``integer`` or ``mod2^k``."""
        token = text.strip().lower()
        if token in ("gf2", "z2"):
            return GF2
        if token in ("integer", "int", "z"):
            return INTEGER
        if token.startswith("mod2^"):
            try:
                return cls("mod2k", int(token[5:]))
            except ValueError as e:
                raise ValueError(f"Invalid ring: {text!r} ({e})") from None
        raise ValueError(f"Invalid ring: {text!r}")

    @property
    def is_gf2(self) -> bool:
        return self.kind == "gf2"

    @property
    def modulus(self) -> int | None:
        """2 for GF(2), 2^k for Z mod 2^k, None for the integers."""
        if self.kind == "gf2":
            return 2
        if self.kind == "mod2k":
            return 1 << self.k
        return None

    def reduce(self, value: int) -> int:
        """Canonical representative of *value* in this ring."""
        modulus = self.modulus
        if modulus is None:
            return value
        return balanced(value, modulus)

    def contains(self, value: int) -> bool:
        """Whether *value* is already a canonical representative."""
        return self.reduce(value) == value


GF2 = Ring("gf2")
INTEGER = Ring("integer")


def mod2k(k: int) -> Ring:
    """The ring Z mod 2^k."""
    return Ring("mod2k", k)


def balanced(value: int, modulus: int) -> int:
    """Representative of *value* in (-modulus/2, modulus/2]; {0, 1} for modulus 2."""
    v = value % modulus
    if v > modulus // 2:
        v -= modulus
    return v


def _set_bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


# ---------------------------------------------------------------------------
# Matrices
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class GF2Matrix:
    """Dense bit-packed matrix over GF(2).

    Entry ``(i, j)`` is bit ``i * cols + j`` of ``bits``, so row ``i`` is the
    ``cols``-bit word starting at bit ``i * cols``. Bits above
    ``rows * cols`` are always zero, which makes equality and hashing bitwise.
    """

    rows: int
    cols: int
    bits: int

    def __post_init__(self) -> None:
        if self.bits < 0 or self.bits >> (self.rows * self.cols):
            raise ValueError(f"bits out of range for a {self.rows}x{self.cols} matrix")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> GF2Matrix:
        return cls(rows, cols, 0)

    @classmethod
    def unit(cls, rows: int, cols: int, i: int, j: int) -> GF2Matrix:
        return cls(rows, cols, 1 << (i * cols + j))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> GF2Matrix:
        n_rows = len(rows)
        n_cols = len(rows[0]) if n_rows else 0
        bits = 0
        for i, row in enumerate(rows):
            if len(row) != n_cols:
                raise FormatMismatchError("ragged matrix rows")
            for j, value in enumerate(row):
                if value & 1:
                    bits |= 1 << (i * n_cols + j)
        return cls(n_rows, n_cols, bits)

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Sequence[int]) -> GF2Matrix:
        """Build from row-major entries; entries are reduced mod 2."""
        if len(entries) != rows * cols:
            raise FormatMismatchError(f"expected {rows * cols} entries, got {len(entries)}")
        bits = 0
        for idx, value in enumerate(entries):
            if value & 1:
                bits |= 1 << idx
        return cls(rows, cols, bits)

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def words(self) -> tuple[int, ...]:
        """Row words, row 0 first."""
        mask = (1 << self.cols) - 1
        return tuple((self.bits >> (i * self.cols)) & mask for i in range(self.rows))

    @property
    def key(self) -> int:
        return self.bits

    def __getitem__(self, index: tuple[int, int]) -> int:
        i, j = index
        return (self.bits >> (i * self.cols + j)) & 1

    def __add__(self, other: GF2Matrix) -> GF2Matrix:
        if not isinstance(other, GF2Matrix) or other.shape != self.shape:
            raise FormatMismatchError("format mismatch")
        return GF2Matrix(self.rows, self.cols, self.bits ^ other.bits)

    __sub__ = __add__

    def __neg__(self) -> GF2Matrix:
        return self

    def is_zero(self) -> bool:
        return self.bits == 0

    def entries(self) -> list[int]:
        """Row-major coefficient list."""
        return [(self.bits >> idx) & 1 for idx in range(self.rows * self.cols)]

    def nonzeros(self) -> list[tuple[int, int]]:
        """(flat index, value) pairs of the nonzero entries."""
        return [(idx, 1) for idx in _set_bits(self.bits)]

    def transpose(self) -> GF2Matrix:
        bits = 0
        for idx in _set_bits(self.bits):
            i, j = divmod(idx, self.cols)
            bits |= 1 << (j * self.rows + i)
        return GF2Matrix(self.cols, self.rows, bits)

    def crop(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> GF2Matrix:
        """Submatrix on the given rows and columns, in the given order."""
        bits = 0
        width = len(col_idx)
        for a, i in enumerate(row_idx):
            word = self.bits >> (i * self.cols)
            for b, j in enumerate(col_idx):
                if (word >> j) & 1:
                    bits |= 1 << (a * width + b)
        return GF2Matrix(len(row_idx), width, bits)

    def pad(self, rows: int, cols: int, row_off: int = 0, col_off: int = 0) -> GF2Matrix:
        """Embed into a zero ``rows x cols`` matrix at the given offset."""
        if row_off + self.rows > rows or col_off + self.cols > cols:
            raise FormatMismatchError("padding target too small")
        bits = 0
        for i, word in enumerate(self.words):
            bits |= word << ((i + row_off) * cols + col_off)
        return GF2Matrix(rows, cols, bits)

    def to_array(self, dtype: Any = np.int64) -> np.ndarray:
        return np.array(self.entries(), dtype=dtype).reshape(self.rows, self.cols)

    def to_int(self) -> IntMatrix:
        return IntMatrix(self.rows, self.cols, tuple(self.entries()))


@dataclass(frozen=True, slots=True)
class IntMatrix:
    """Dense integer matrix; entries are interpreted in the owning scheme's ring."""

    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.data, tuple):
            object.__setattr__(self, "data", tuple(int(v) for v in self.data))
        if len(self.data) != self.rows * self.cols:
            raise FormatMismatchError(
                f"expected {self.rows * self.cols} entries, got {len(self.data)}"
            )

    @classmethod
    def zeros(cls, rows: int, cols: int) -> IntMatrix:
        return cls(rows, cols, (0,) * (rows * cols))

    @classmethod
    def unit(cls, rows: int, cols: int, i: int, j: int) -> IntMatrix:
        data = [0] * (rows * cols)
        data[i * cols + j] = 1
        return cls(rows, cols, tuple(data))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> IntMatrix:
        n_rows = len(rows)
        n_cols = len(rows[0]) if n_rows else 0
        if any(len(row) != n_cols for row in rows):
            raise FormatMismatchError("ragged matrix rows")
        return cls(n_rows, n_cols, tuple(int(v) for row in rows for v in row))

    @classmethod
    def from_entries(cls, rows: int, cols: int, entries: Sequence[int]) -> IntMatrix:
        return cls(rows, cols, tuple(int(v) for v in entries))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    @property
    def key(self) -> tuple[int, ...]:
        return self.data

    def __getitem__(self, index: tuple[int, int]) -> int:
        i, j = index
        return self.data[i * self.cols + j]

    def __add__(self, other: IntMatrix) -> IntMatrix:
        if not isinstance(other, IntMatrix) or other.shape != self.shape:
            raise FormatMismatchError("format mismatch")
        return IntMatrix(self.rows, self.cols, tuple(x + y for x, y in zip(self.data, other.data)))

    def __sub__(self, other: IntMatrix) -> IntMatrix:
        if not isinstance(other, IntMatrix) or other.shape != self.shape:
            raise FormatMismatchError("format mismatch")
        return IntMatrix(self.rows, self.cols, tuple(x - y for x, y in zip(self.data, other.data)))

    def __neg__(self) -> IntMatrix:
        return IntMatrix(self.rows, self.cols, tuple(-x for x in self.data))

    def is_zero(self) -> bool:
        return not any(self.data)

    def entries(self) -> list[int]:
        return list(self.data)

    def nonzeros(self) -> list[tuple[int, int]]:
        return [(idx, v) for idx, v in enumerate(self.data) if v]

    def transpose(self) -> IntMatrix:
        data = [self.data[i * self.cols + j] for j in range(self.cols) for i in range(self.rows)]
        return IntMatrix(self.cols, self.rows, tuple(data))

    def crop(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> IntMatrix:
        data = [self.data[i * self.cols + j] for i in row_idx for j in col_idx]
        return IntMatrix(len(row_idx), len(col_idx), tuple(data))

    def pad(self, rows: int, cols: int, row_off: int = 0, col_off: int = 0) -> IntMatrix:
        if row_off + self.rows > rows or col_off + self.cols > cols:
            raise FormatMismatchError("padding target too small")
        data = [0] * (rows * cols)
        for i in range(self.rows):
            start = (i + row_off) * cols + col_off
            data[start : start + self.cols] = self.data[i * self.cols : (i + 1) * self.cols]
        return IntMatrix(rows, cols, tuple(data))

    def to_array(self, dtype: Any = object) -> np.ndarray:
        return np.array(self.data, dtype=dtype).reshape(self.rows, self.cols)

    def reduced(self, ring: Ring) -> IntMatrix:
        return IntMatrix(self.rows, self.cols, tuple(ring.reduce(v) for v in self.data))

    def to_gf2(self) -> GF2Matrix:
        return GF2Matrix.from_entries(self.rows, self.cols, self.data)


Matrix = Union[GF2Matrix, IntMatrix]


def unit_matrix(ring: Ring, rows: int, cols: int, i: int, j: int) -> Matrix:
    if ring.is_gf2:
        return GF2Matrix.unit(rows, cols, i, j)
    return IntMatrix.unit(rows, cols, i, j)


def zero_matrix(ring: Ring, rows: int, cols: int) -> Matrix:
    if ring.is_gf2:
        return GF2Matrix.zeros(rows, cols)
    return IntMatrix.zeros(rows, cols)


def matrix_from_entries(ring: Ring, rows: int, cols: int, entries: Sequence[int]) -> Matrix:
    if ring.is_gf2:
        return GF2Matrix.from_entries(rows, cols, entries)
    return IntMatrix.from_entries(rows, cols, [ring.reduce(v) for v in entries])


# ---------------------------------------------------------------------------
# Terms and schemes
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Term:
    """One rank-one summand ``A (x) B (x) C``: a single ring multiplication."""

    a: Matrix
    b: Matrix
    c: Matrix

    def __iter__(self) -> Iterator[Matrix]:
        return iter((self.a, self.b, self.c))

    def __getitem__(self, slot: int) -> Matrix:
        return (self.a, self.b, self.c)[slot]

    def has_zero_component(self) -> bool:
        return self.a.is_zero() or self.b.is_zero() or self.c.is_zero()

    @property
    def sort_key(self) -> tuple[Any, Any, Any]:
        return self.a.key, self.b.key, self.c.key

    def with_component(self, slot: int, value: Matrix) -> Term:
        parts = [self.a, self.b, self.c]
        parts[slot] = value
        return Term(*parts)


@dataclass(frozen=True, slots=True)
class Scheme:
    """A bilinear matrix multiplication algorithm: format, ring and terms.

    ``note`` carries provenance (e.g. the import variant) and is ignored by
    equality.
    """

    format: Format
    ring: Ring
    terms: tuple[Term, ...]
    note: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if not isinstance(self.terms, tuple):
            object.__setattr__(self, "terms", tuple(self.terms))
        expected_type = GF2Matrix if self.ring.is_gf2 else IntMatrix
        shapes = self.format.shapes
        for index, term in enumerate(self.terms):
            for slot, component in enumerate(term):
                if not isinstance(component, expected_type):
                    raise RingMismatchError(
                        f"term {index}: {type(component).__name__} component in a {self.ring} scheme"
                    )
                if component.shape != shapes[slot]:
                    raise FormatMismatchError(
                        f"term {index}: component {'ABC'[slot]} has shape {component.shape}, "
                        f"expected {shapes[slot]} for format {self.format}"
                    )
                if self.ring.kind == "mod2k":
                    bad = [v for v in component.entries() if not self.ring.contains(v)]
                    if bad:
                        raise RingMismatchError(
                            f"term {index}: coefficient {bad[0]} in component {'ABC'[slot]} "
                            f"is not a canonical residue of {self.ring}"
                        )

    def __len__(self) -> int:
        return len(self.terms)

    @property
    def rank(self) -> int:
        """Number of terms without a zero component."""
        return sum(1 for term in self.terms if not term.has_zero_component())

    def with_terms(self, terms: Sequence[Term]) -> Scheme:
        return replace(self, terms=tuple(terms))


def rank(s: Scheme) -> int:
    """Number of multiplications of *s* after normalization."""
    return s.rank


def normalize(s: Scheme) -> Scheme:
    """Canonical form of *s*: duplicates merged, zero terms dropped, terms sorted.

    Over GF(2) an even number of copies of a term cancels and an odd number
    leaves one copy. In other rings ``k`` copies become one term with ``A``
    scaled by ``k``.
    """
    counts = Counter(term.sort_key for term in s.terms)
    first: dict[tuple[Any, Any, Any], Term] = {}
    for term in s.terms:
        first.setdefault(term.sort_key, term)
    terms: list[Term] = []
    for key, term in first.items():
        copies = counts[key]
        if s.ring.is_gf2:
            if copies % 2 == 0:
                continue
        elif copies > 1:
            a = term.a
            scaled = IntMatrix.from_entries(a.rows, a.cols, [copies * v for v in a.entries()])
            term = term.with_component(0, scaled.reduced(s.ring))
        if not term.has_zero_component():
            terms.append(term)
    terms.sort(key=lambda term: term.sort_key)
    merged = s.with_terms(terms)
    if len({term.sort_key for term in terms}) < len(terms):
        # a scaled term can collide with an existing one
        return normalize(merged)
    return merged


def standard_scheme(f: Format, ring: Ring = GF2) -> Scheme:
    """The n*m*p-term schoolbook algorithm."""
    n, m, p = f
    terms = [
        Term(
            unit_matrix(ring, n, m, i, j),
            unit_matrix(ring, m, p, j, k),
            unit_matrix(ring, p, n, k, i),
        )
        for i in range(n)
        for j in range(m)
        for k in range(p)
    ]
    return Scheme(f, ring, tuple(terms))


def to_ring(s: Scheme, ring: Ring) -> Scheme:
    """Reinterpret the coefficients of *s* in *ring*.

    Coefficients are reduced to canonical representatives; terms are kept even
    if a component becomes zero, so the term count is unchanged.
    """
    terms = []
    for term in s.terms:
        parts: list[Matrix] = []
        for component in term:
            if ring.is_gf2:
                parts.append(component if isinstance(component, GF2Matrix) else component.to_gf2())
            else:
                ints = component.to_int() if isinstance(component, GF2Matrix) else component
                parts.append(ints.reduced(ring))
        terms.append(Term(*parts))
    return Scheme(s.format, ring, tuple(terms), note=s.note)


# ---------------------------------------------------------------------------
# Brent equations
# ---------------------------------------------------------------------------


def brent_equation_count(f: Format) -> int:
    nm, mp, pn = f.sizes
    return nm * mp * pn


@lru_cache(maxsize=64)
def _expected_gf2(f: Format) -> dict[int, int]:
    """Right-hand side of the Brent equations, keyed by (A index, B index)."""
    n, m, p = f
    mp = m * p
    expected = {}
    for i in range(n):
        for j in range(m):
            for k in range(p):
                expected[(i * m + j) * mp + j * p + k] = 1 << (k * n + i)
    return expected


def _verify_gf2(s: Scheme) -> bool:
    mp = s.format.m * s.format.p
    acc: dict[int, int] = {}
    for term in s.terms:
        c_bits = term.c.bits  # type: ignore[union-attr]
        if not c_bits:
            continue
        b_idx = _set_bits(term.b.bits)  # type: ignore[union-attr]
        for x in _set_bits(term.a.bits):  # type: ignore[union-attr]
            base = x * mp
            for y in b_idx:
                key = base + y
                acc[key] = acc.get(key, 0) ^ c_bits
    expected = _expected_gf2(s.format)
    for key in acc.keys() | expected.keys():
        if acc.get(key, 0) != expected.get(key, 0):
            return False
    return True


def brent_residuals(s: Scheme) -> list[int]:
    """Exact integer residuals ``F(x) - T`` of all Brent equations.

    Coefficients are read as plain integers (GF(2) entries as 0/1). The list is
    indexed by ``(x * mp + y) * pn + z`` where x, y, z are the flat indices of
    the A, B and C coefficients. Python integers keep the sums exact.
    """
    n, m, p = s.format
    nm, mp, pn = s.format.sizes
    acc = [0] * (nm * mp * pn)
    for term in s.terms:
        a_nz = term.a.nonzeros()
        b_nz = term.b.nonzeros()
        c_nz = term.c.nonzeros()
        if not (a_nz and b_nz and c_nz):
            continue
        for x, ax in a_nz:
            for y, by in b_nz:
                ab = ax * by
                base = (x * mp + y) * pn
                for z, cz in c_nz:
                    acc[base + z] += ab * cz
    for i in range(n):
        for j in range(m):
            for k in range(p):
                acc[((i * m + j) * mp + j * p + k) * pn + k * n + i] -= 1
    return acc


def verify(s: Scheme) -> bool:
    """Whether all (nm)(mp)(pn) Brent equations hold in the scheme's ring."""
    if s.ring.is_gf2:
        return _verify_gf2(s)
    modulus = s.ring.modulus
    residuals = brent_residuals(s)
    if modulus is None:
        return not any(residuals)
    return all(r % modulus == 0 for r in residuals)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def apply_scheme(s: Scheme, x: Any, y: Any) -> np.ndarray:
    """Run the bilinear algorithm *s* on concrete matrices.

    Computes ``m_l = <A_l, X> * <B_l, Y>`` and ``Z[i, k] = sum_l C_l[k, i] * m_l``.
    The result equals ``X @ Y`` whenever ``verify(s)`` holds. Integer rings use
    object arrays so the arithmetic is exact.
    """
    n, m, p = s.format
    dtype: Any = np.int64 if s.ring.is_gf2 else object
    xa = np.asarray(x).astype(dtype)
    ya = np.asarray(y).astype(dtype)
    if xa.shape != (n, m) or ya.shape != (m, p):
        raise FormatMismatchError("format mismatch")
    if s.ring.is_gf2:
        xa = xa & 1
        ya = ya & 1
    if not s.terms:
        z = np.zeros((n, p), dtype=dtype)
    else:
        a_stack = np.stack([t.a.to_array(dtype) for t in s.terms])
        b_stack = np.stack([t.b.to_array(dtype) for t in s.terms])
        c_stack = np.stack([t.c.to_array(dtype) for t in s.terms])
        products = np.tensordot(a_stack, xa, axes=([1, 2], [0, 1])) * np.tensordot(
            b_stack, ya, axes=([1, 2], [0, 1])
        )
        z = np.tensordot(products, c_stack, axes=(0, 0)).T
    modulus = s.ring.modulus
    if modulus is None:
        return z
    if s.ring.is_gf2:
        return (z % 2).astype(np.uint8)
    return np.vectorize(lambda v: balanced(int(v), modulus), otypes=[object])(z)


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------


class SchemeStats(TypedDict):
    """Summary returned by :func:`scheme_stats`."""

    format: tuple[int, int, int]
    ring: str
    rank: int
    naive_rank: int
    nonzeros: tuple[int, int, int]
    additions: int
    histogram: dict[int, int]


def scheme_stats(s: Scheme) -> SchemeStats:
    """Rank, coefficient counts and a naive addition count for *s*.

    Additions are counted for the straight-line program that evaluates every
    linear form on its own: ``nnz - 1`` per nonzero A/B linear form plus
    ``terms - 1`` per output entry that receives at least one product.
    """
    n, m, p = s.format
    nonzeros = [0, 0, 0]
    histogram: Counter[int] = Counter()
    additions = 0
    output_uses = [0] * (p * n)
    for term in s.terms:
        for slot, component in enumerate(term):
            nz = component.nonzeros()
            nonzeros[slot] += len(nz)
            histogram.update(v for _, v in nz)
            if slot < 2 and nz:
                additions += len(nz) - 1
            if slot == 2:
                for idx, _ in nz:
                    output_uses[idx] += 1
    additions += sum(uses - 1 for uses in output_uses if uses)
    return SchemeStats(
        format=(n, m, p),
        ring=str(s.ring),
        rank=s.rank,
        naive_rank=s.format.naive_rank,
        nonzeros=(nonzeros[0], nonzeros[1], nonzeros[2]),
        additions=additions,
        histogram=dict(sorted(histogram.items())),
    )
