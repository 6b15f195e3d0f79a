"""Bit-packed linear algebra over GF(2).

Each row is a Python ``int``; bit ``j`` holds column ``j`` (0-based).  File
formats and messages use 1-based columns, the conversion happens at the edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence


@dataclass(frozen=True)
class BitMatrix:
    rows: tuple[int, ...]
    width: int

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")
        limit = 1 << self.width
        rows = tuple(int(r) for r in self.rows)
        for r in rows:
            if r < 0 or r >= limit:
                raise ValueError(f"row {r:#x} does not fit in width {self.width}")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def empty(cls, width: int) -> "BitMatrix":
        return cls((), width)

    @classmethod
    def identity_block(cls, width: int, start: int, count: int) -> "BitMatrix":
        """Unit rows for columns ``start .. start+count-1``."""
        return cls(tuple(1 << (start + i) for i in range(count)), width)

    @classmethod
    def from_lists(cls, rows: Iterable[Sequence[int]], width: int) -> "BitMatrix":
        """Build from 0/1 lists (column 0 first)."""
        packed = []
        for row in rows:
            if len(row) != width:
                raise ValueError("row length does not match width")
            packed.append(sum(1 << j for j, bit in enumerate(row) if bit))
        return cls(tuple(packed), width)

    def __len__(self) -> int:
        return len(self.rows)

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.width)] for r in self.rows]

    def rank(self) -> int:
        return rank(self)

    def rowspace_key(self) -> tuple[int, ...]:
        """Reduced row echelon basis; equal keys <=> equal row spaces."""
        return rref_basis(self.rows)


def _eliminate(rows: Iterable[int]) -> dict[int, int]:
    """Insert rows into a pivot table keyed by lowest set bit."""
    pivots: dict[int, int] = {}
    for r in rows:
        while r:
            low = r & -r
            p = pivots.get(low)
            if p is None:
                pivots[low] = r
                break
            r ^= p
    return pivots


def rank_rows(rows: Iterable[int]) -> int:
    return len(_eliminate(rows))


def rank(m: BitMatrix) -> int:
    """GF(2) row rank; pivots are taken lowest column first."""
    return rank_rows(m.rows)


def rref_basis(rows: Iterable[int]) -> tuple[int, ...]:
    pivots = _eliminate(rows)
    # back-substitute so each pivot column is clear in every other basis row
    lows = sorted(pivots)
    basis = {low: pivots[low] for low in lows}
    for low in reversed(lows):
        r = basis[low]
        for other in lows:
            if other != low and basis[other] & low:
                basis[other] ^= r
    return tuple(sorted(basis.values()))


def stack(ms: Sequence[BitMatrix]) -> BitMatrix:
    """Concatenate rows of equal-width matrices, order preserved."""
    if not ms:
        raise ValueError("stack needs at least one matrix")
    width = ms[0].width
    for m in ms:
        if m.width != width:
            raise ValueError(f"width mismatch: {m.width} != {width}")
    return BitMatrix(tuple(r for m in ms for r in m.rows), width)


def in_rowspace(v: int, m: BitMatrix) -> bool:
    if v < 0 or v >= (1 << m.width):
        raise ValueError(f"vector does not fit in width {m.width}")
    pivots = _eliminate(m.rows)
    while v:
        p = pivots.get(v & -v)
        if p is None:
            return False
        v ^= p
    return True


def permute_row(row: int, perm: Sequence[int]) -> int:
    out = 0
    j = 0
    while row:
        if row & 1:
            out |= 1 << perm[j]
        row >>= 1
        j += 1
    return out


def permute_columns(m: BitMatrix, perm: Sequence[int]) -> BitMatrix:
    """Move column ``j`` of ``m`` to column ``perm[j]`` (0-based).

    Equivalently, column ``i`` of the result is column ``perm^-1(i)`` of ``m``.
    """
    if len(perm) != m.width or sorted(perm) != list(range(m.width)):
        raise ValueError("perm is not a bijection on the column indices")
    return BitMatrix(tuple(permute_row(r, perm) for r in m.rows), m.width)


def row_weight(row: int) -> int:
    return bin(row).count("1")
