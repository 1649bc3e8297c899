"""Square-QAM grids, Gray labelling and the box candidate window.

Grid indices run from 0 (most negative coordinate) to ``side - 1`` per real
dimension, so index ``i`` sits at ``-v + i * delta_q``. A point is
identified by its :class:`GridIndex` or by the flat index
``i_re * side + i_im``; both orderings are lexicographic in ``(i_re, i_im)``.

Bit labels use a binary-reflected Gray code per dimension, most significant
bit first, real-dimension bits before imaginary-dimension bits. For 16-QAM
the per-dimension table is::

    index   0    1    2    3
    level  -3   -1   +1   +3
    bits   00   01   11   10
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from .errors import BoxLargerThanConstellation, NotAConstellationPoint, UnsupportedOrder

SUPPORTED_ORDERS = (4, 16, 64, 256)


class GridIndex(NamedTuple):
    i_re: int
    i_im: int


@dataclass(frozen=True)
class Qam:
    """Square QAM constellation normalized to unit average symbol energy."""

    order: int
    side: int
    scale: float
    delta_q: float
    v: float
    bits_per_symbol: int

    def level(self, i: int) -> float:
        """Coordinate of per-dimension index ``i``."""
        return (2 * i - (self.side - 1)) * self.scale

    def point(self, g: GridIndex) -> complex:
        return complex(self.level(g.i_re), self.level(g.i_im))

    def flat(self, g: GridIndex) -> int:
        return g.i_re * self.side + g.i_im

    def unflat(self, f: int) -> GridIndex:
        return GridIndex(f // self.side, f % self.side)

    @cached_property
    def levels(self) -> np.ndarray:
        return (2.0 * np.arange(self.side) - (self.side - 1)) * self.scale

    @cached_property
    def points(self) -> np.ndarray:
        """All points indexed by flat index."""
        lv = self.levels
        return (lv[:, None] + 1j * lv[None, :]).ravel()

    @cached_property
    def flat_of(self) -> dict[complex, int]:
        """Exact point value -> flat index."""
        return {complex(p): f for f, p in enumerate(self.points)}

    @cached_property
    def bit_table(self) -> np.ndarray:
        """``(order, bits_per_symbol)`` uint8 labels indexed by flat index."""
        half = self.bits_per_symbol // 2
        gray = np.arange(self.side) ^ (np.arange(self.side) >> 1)
        per_dim = (gray[:, None] >> np.arange(half - 1, -1, -1)[None, :]) & 1
        re = np.repeat(per_dim, self.side, axis=0)
        im = np.tile(per_dim, (self.side, 1))
        return np.hstack([re, im]).astype(np.uint8)

    @cached_property
    def _index_of_gray(self) -> np.ndarray:
        gray = np.arange(self.side) ^ (np.arange(self.side) >> 1)
        inv = np.empty(self.side, dtype=np.int64)
        inv[gray] = np.arange(self.side)
        return inv

    def bits_to_flat(self, bits: np.ndarray) -> np.ndarray:
        """Vectorized label -> flat index over the last axis of ``bits``."""
        bits = np.asarray(bits, dtype=np.int64)
        half = self.bits_per_symbol // 2
        weights = 1 << np.arange(half - 1, -1, -1)
        g_re = bits[..., :half] @ weights
        g_im = bits[..., half:] @ weights
        inv = self._index_of_gray
        return inv[g_re] * self.side + inv[g_im]

    def nearest_flat(self, z: np.ndarray) -> np.ndarray:
        """Flat index of the nearest point to each entry of ``z`` (per-dimension slicing)."""
        z = np.asarray(z, dtype=np.complex128)
        top = self.side - 1
        i_re = np.clip(np.floor((z.real + self.v) / self.delta_q + 0.5), 0, top).astype(np.int64)
        i_im = np.clip(np.floor((z.imag + self.v) / self.delta_q + 0.5), 0, top).astype(np.int64)
        return i_re * self.side + i_im


@lru_cache(maxsize=None)
def make_qam(order: int) -> Qam:
    if order not in SUPPORTED_ORDERS:
        raise UnsupportedOrder(f"QAM order must be one of {SUPPORTED_ORDERS}, got {order}")
    side = math.isqrt(order)
    scale = 1.0 / math.sqrt(2.0 * (order - 1) / 3.0)
    return Qam(
        order=order,
        side=side,
        scale=scale,
        delta_q=2.0 * scale,
        v=(side - 1) * scale,
        bits_per_symbol=int(math.log2(order)),
    )


def bits_to_symbol(bits: Sequence[int], qam: Qam) -> complex:
    if len(bits) != qam.bits_per_symbol:
        raise ValueError(f"expected {qam.bits_per_symbol} bits, got {len(bits)}")
    if any(b not in (0, 1) for b in bits):
        raise ValueError("bits must be 0 or 1")
    f = int(qam.bits_to_flat(np.asarray(bits)))
    return qam.point(qam.unflat(f))


def grid_index_of(s: complex, qam: Qam) -> GridIndex:
    """Exact inverse of :meth:`Qam.point`; raises if ``s`` is off-grid."""
    out = []
    for c in (s.real, s.imag):
        u = (c + qam.v) / qam.delta_q
        i = round(u)
        if not (0 <= i < qam.side) or abs(u - i) > 1e-9:
            raise NotAConstellationPoint(f"{s!r} is not a {qam.order}-QAM point")
        out.append(int(i))
    return GridIndex(*out)


def symbol_to_bits(s: complex, qam: Qam) -> tuple[int, ...]:
    g = grid_index_of(complex(s), qam)
    return tuple(int(b) for b in qam.bit_table[qam.flat(g)])


def quantize_base(a: complex, qam: Qam) -> GridIndex:
    """Lower-left corner of the grid cell containing ``a``, clamped so a 2x2 box fits."""
    top = qam.side - 2
    out = []
    for c in (a.real, a.imag):
        i = math.floor((c + qam.v) / qam.delta_q)
        out.append(min(max(i, 0), top))
    return GridIndex(*out)


def box_window(a: complex, qam: Qam, box_size: int) -> tuple[GridIndex, GridIndex]:
    """Return ``(base, start)``: the quantized base and the window's lower-left index.

    The window spans ``sqrt(box_size)`` indices per dimension starting at
    ``start``; it is shifted as a whole to stay inside the grid.
    """
    w = math.isqrt(box_size)
    if w * w != box_size or w < 2 or (w & (w - 1)):
        raise ValueError(f"box size must be a power of 4, got {box_size}")
    if box_size > qam.order:
        raise BoxLargerThanConstellation(f"box {box_size} exceeds {qam.order}-QAM")
    base = quantize_base(a, qam)
    hi = qam.side - w
    start = GridIndex(
        min(max(base.i_re - w // 2 + 1, 0), hi),
        min(max(base.i_im - w // 2 + 1, 0), hi),
    )
    return base, start


def box_candidates(a: complex, qam: Qam, box_size: int) -> list[GridIndex]:
    """The ``box_size`` window points around ``a`` in lexicographic order."""
    _, start = box_window(a, qam, box_size)
    w = math.isqrt(box_size)
    return [GridIndex(start.i_re + dr, start.i_im + di) for dr in range(w) for di in range(w)]
