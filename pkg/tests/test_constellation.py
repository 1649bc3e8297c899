import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from boxmimo.constellation import (
    SUPPORTED_ORDERS,
    GridIndex,
    bits_to_symbol,
    box_candidates,
    grid_index_of,
    make_qam,
    quantize_base,
    symbol_to_bits,
)
from boxmimo.errors import BoxLargerThanConstellation, NotAConstellationPoint, UnsupportedOrder


def unscaled(qam, c):
    """Map an unscaled odd-integer coordinate (or point) onto the normalized grid."""
    return c * qam.scale


def idx(qam, re, im):
    """Grid index of the unscaled point ``re + j im``."""
    return GridIndex((re + qam.side - 1) // 2, (im + qam.side - 1) // 2)


@pytest.mark.parametrize("order,side,span", [(4, 2, 1), (16, 4, 3), (64, 8, 7), (256, 16, 15)])
def test_geometry(order, side, span):
    qam = make_qam(order)
    assert qam.side == side
    assert qam.v / qam.scale == pytest.approx(span)
    assert qam.delta_q / qam.scale == pytest.approx(2.0)
    assert qam.bits_per_symbol == int(math.log2(order))


def test_64qam_scale_from_average_energy():
    # oracle: average |p|^2 over the raw odd-integer grid
    lv = np.arange(-7, 8, 2)
    raw = (lv[:, None] + 1j * lv[None, :]).ravel()
    es = np.mean(np.abs(raw) ** 2)
    assert es == 42.0
    assert make_qam(64).scale == pytest.approx(1 / math.sqrt(es), rel=1e-15)


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_unit_average_energy(order):
    assert abs(np.mean(np.abs(make_qam(order).points) ** 2) - 1.0) < 1e-12


@pytest.mark.parametrize("order", [0, 2, 8, 32, 1024])
def test_unsupported_order(order):
    with pytest.raises(UnsupportedOrder):
        make_qam(order)


def test_qpsk_zero_bits():
    qam = make_qam(4)
    assert bits_to_symbol((0, 0), qam) == qam.scale * (-1 - 1j)
    assert symbol_to_bits(qam.scale * (-1 - 1j), qam) == (0, 0)


def test_16qam_gray_table():
    qam = make_qam(16)
    want = {-3: (0, 0), -1: (0, 1), 1: (1, 1), 3: (1, 0)}
    for re, im in itertools.product(want, want):
        assert symbol_to_bits(qam.scale * complex(re, im), qam) == want[re] + want[im]


def test_64qam_round_trip_all_patterns():
    qam = make_qam(64)
    for bits in itertools.product((0, 1), repeat=6):
        assert symbol_to_bits(bits_to_symbol(bits, qam), qam) == bits


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_bit_maps_are_inverse_bijections(order):
    qam = make_qam(order)
    labels = {tuple(row) for row in qam.bit_table}
    assert len(labels) == order
    for f, p in enumerate(qam.points):
        bits = symbol_to_bits(p, qam)
        assert qam.flat(grid_index_of(bits_to_symbol(bits, qam), qam)) == f
    assert np.array_equal(qam.bits_to_flat(qam.bit_table), np.arange(order))


def test_16qam_gray_neighbours_example():
    qam = make_qam(16)
    a = symbol_to_bits(qam.scale * (-3 - 3j), qam)
    b = symbol_to_bits(qam.scale * (-1 - 3j), qam)
    assert sum(x != y for x, y in zip(a, b)) == 1


@pytest.mark.parametrize("order", SUPPORTED_ORDERS)
def test_gray_adjacency_everywhere(order):
    qam = make_qam(order)
    t = qam.bit_table.astype(int)
    for i in range(qam.side):
        for j in range(qam.side):
            f = qam.flat(GridIndex(i, j))
            if i + 1 < qam.side:
                assert np.sum(t[f] != t[qam.flat(GridIndex(i + 1, j))]) == 1
            if j + 1 < qam.side:
                assert np.sum(t[f] != t[qam.flat(GridIndex(i, j + 1))]) == 1


def test_symbol_to_bits_rejects_off_grid():
    qam = make_qam(16)
    for s in (0.0, qam.scale * (2 + 1j), qam.scale * (5 + 1j)):
        with pytest.raises(NotAConstellationPoint):
            symbol_to_bits(s, qam)


def test_bits_to_symbol_rejects_bad_bits():
    qam = make_qam(16)
    with pytest.raises(ValueError):
        bits_to_symbol((0, 1, 1), qam)
    with pytest.raises(ValueError):
        bits_to_symbol((0, 1, 2, 0), qam)


def test_quantize_base_examples():
    q16, q64 = make_qam(16), make_qam(64)
    assert quantize_base(unscaled(q16, 0.3 + 0.2j), q16) == idx(q16, -1, -1)
    assert quantize_base(unscaled(q16, 9 + 9j), q16) == idx(q16, 1, 1)
    assert quantize_base(unscaled(q64, -6.9 - 0.1j), q64) == idx(q64, -7, -1)


def test_box_candidates_examples():
    q16 = make_qam(16)
    got = box_candidates(unscaled(q16, 0.3 + 0.2j), q16, 4)
    assert got == [idx(q16, -1, -1), idx(q16, -1, 1), idx(q16, 1, -1), idx(q16, 1, 1)]
    got = box_candidates(unscaled(q16, 9 + 9j), q16, 4)
    assert got == [idx(q16, 1, 1), idx(q16, 1, 3), idx(q16, 3, 1), idx(q16, 3, 3)]


@given(re=st.floats(-5, 5), im=st.floats(-5, 5))
def test_qpsk_box_is_whole_constellation(re, im):
    qam = make_qam(4)
    assert sorted(box_candidates(complex(re, im), qam, 4)) == [GridIndex(i, j) for i in (0, 1) for j in (0, 1)]


def test_box_size_validation():
    qam = make_qam(16)
    with pytest.raises(BoxLargerThanConstellation):
        box_candidates(0j, make_qam(4), 16)
    for b in (2, 8, 9, 36):
        with pytest.raises(ValueError):
            box_candidates(0j, qam, b)


@pytest.mark.parametrize("order,box", [(16, 4), (16, 16), (64, 4), (64, 16), (256, 16)])
def test_box_contains_nearest_point(order, box):
    qam = make_qam(order)
    rng = np.random.default_rng(order + box)
    count = 200_000
    # half inside the grid, half far outside
    span = np.where(rng.random(count) < 0.5, 1.2, 6.0) * qam.v
    a = rng.uniform(-1, 1, count) * span + 1j * rng.uniform(-1, 1, count) * span
    nearest = np.argmin(np.abs(a[:, None] - qam.points[None, :]), axis=1)
    for t in range(count):
        cands = box_candidates(complex(a[t]), qam, box)
        flats = {qam.flat(g) for g in cands}
        assert len(flats) == box
        assert all(0 <= g.i_re < qam.side and 0 <= g.i_im < qam.side for g in cands)
        assert nearest[t] in flats, (a[t], cands)
