import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pytest

from boxmimo import channel
from boxmimo.channel import SeedSpec, draw_batch, draw_instance, noise_variance
from boxmimo.constellation import make_qam


def _same(a, b):
    return all(np.array_equal(getattr(a, f), getattr(b, f)) for f in ("h", "s", "tx_bits", "y", "s_flat"))


def test_noiseless_is_exact():
    inst = draw_instance(4, make_qam(16), math.inf, SeedSpec(0, 0))
    assert inst.noise_var == 0.0
    assert np.array_equal(inst.y, np.einsum("ij,j->i", inst.h, inst.s))
    assert np.max(np.abs(inst.y - inst.h @ inst.s)) < 1e-14


def test_same_seed_same_instance():
    qam = make_qam(16)
    assert _same(draw_instance(4, qam, 10.0, SeedSpec(0, 0)), draw_instance(4, qam, 10.0, SeedSpec(0, 0)))


def test_different_trials_differ():
    qam = make_qam(16)
    a = draw_instance(4, qam, 10.0, SeedSpec(0, 0))
    b = draw_instance(4, qam, 10.0, SeedSpec(0, 1))
    c = draw_instance(4, qam, 10.0, SeedSpec(1, 0))
    assert not np.array_equal(a.h, b.h) and not np.array_equal(a.h, c.h)


def test_snr_changes_only_noise_scale():
    qam = make_qam(16)
    a = draw_instance(2, qam, 10.0, SeedSpec(3, 7))
    b = draw_instance(2, qam, 20.0, SeedSpec(3, 7))
    assert np.array_equal(a.h, b.h) and np.array_equal(a.s, b.s)
    wa, wb = a.y - a.h @ a.s, b.y - b.h @ b.s
    assert np.allclose(wa * math.sqrt(b.noise_var / a.noise_var), wb, atol=1e-12)


def test_noise_variance_convention():
    assert noise_variance(4, 0.0) == 4.0
    assert noise_variance(8, 10.0) == pytest.approx(0.8)
    assert noise_variance(4, math.inf) == 0.0


def test_channel_entry_variance():
    b = draw_batch(4, make_qam(4), 10.0, 2, 0, 6250)  # 10^5 entries
    assert b.h.size == 100_000
    assert np.mean(np.abs(b.h) ** 2) == pytest.approx(1.0, rel=0.02)
    assert abs(np.mean(b.h)) < 0.02


def test_noise_power_matches_variance():
    snr = 7.0
    b = draw_batch(4, make_qam(16), snr, 4, 0, 25_000)
    w = b.y - np.einsum("tij,tj->ti", b.h, make_qam(16).points[b.s_flat])
    assert w.size == 100_000
    assert np.mean(np.abs(w) ** 2) == pytest.approx(noise_variance(4, snr), rel=0.02)


def test_symbols_are_uniform_and_match_bits():
    qam = make_qam(16)
    b = draw_batch(2, qam, 10.0, 0, 0, 8000)
    counts = np.bincount(b.s_flat.ravel(), minlength=16)
    assert counts.min() > 0.8 * counts.mean()
    bits = b.tx_bits.reshape(8000, 2, 4)
    assert np.array_equal(qam.bits_to_flat(bits), b.s_flat)


def test_x_is_rotated_observation():
    b = draw_batch(3, make_qam(4), 5.0, 0, 0, 20)
    for t in range(20):
        assert np.allclose(b.q[t] @ b.r[t], b.h[t], atol=1e-12)
        assert np.allclose(b.x[t], b.q[t].conj().T @ b.y[t], atol=1e-12)


def test_batch_equals_single_instances():
    qam = make_qam(16)
    b = draw_batch(4, qam, 12.0, 9, 100, 30)
    for t in range(30):
        inst = draw_instance(4, qam, 12.0, SeedSpec(9, 100 + t))
        assert np.array_equal(inst.h, b.h[t]) and np.array_equal(inst.y, b.y[t])
        assert np.array_equal(inst.x, b.x[t])


def _draw(t):
    inst = draw_instance(4, make_qam(16), 12.0, SeedSpec(5, t))
    return inst.h, inst.y, inst.s_flat


def test_parallel_draws_match_serial():
    serial = [_draw(t) for t in range(40)]
    with ProcessPoolExecutor(max_workers=2) as ex:
        parallel = list(ex.map(_draw, reversed(range(40))))[::-1]
    for a, b in zip(serial, parallel):
        assert all(np.array_equal(u, v) for u, v in zip(a, b))


def test_singular_draw_is_redrawn(monkeypatch):
    real = channel._raw_draw
    calls = []

    def flaky(rng, n, bps):
        h, bits, w = real(rng, n, bps)
        calls.append(1)
        if len(calls) == 1:
            h = np.zeros_like(h)
        return h, bits, w

    monkeypatch.setattr(channel, "_raw_draw", flaky)
    qam = make_qam(4)
    b = draw_batch(2, qam, 10.0, 0, 0, 1)
    assert len(calls) == 2
    assert np.min(np.abs(np.diagonal(b.r[0]))) > 1e-12
    # the replacement comes from the trial's own stream, so it is reproducible
    monkeypatch.setattr(channel, "_raw_draw", real)
    rng = channel.trial_rng(0, 0)
    real(rng, 2, 2)
    h2, _, _ = real(rng, 2, 2)
    assert np.array_equal(b.h[0], h2)


def test_sorted_ordering_changes_only_the_factorization():
    qam = make_qam(16)
    plain = draw_batch(4, qam, 12.0, 3, 0, 200)
    srt = draw_batch(4, qam, 12.0, 3, 0, 200, ordering="sorted")
    for f in ("h", "s_flat", "tx_bits", "y"):
        assert np.array_equal(getattr(plain, f), getattr(srt, f))
    assert np.array_equal(plain.perm, np.tile(np.arange(4), (200, 1)))
    for t in range(200):
        p = srt.perm[t]
        assert np.allclose(srt.q[t] @ srt.r[t], srt.h[t][:, p])
        assert np.allclose(srt.x[t], srt.q[t].conj().T @ srt.y[t])


def test_sorted_noiseless_layers_hold_permuted_symbols():
    qam = make_qam(16)
    b = draw_batch(4, qam, math.inf, 0, 0, 50, ordering="sorted")
    layers = np.take_along_axis(b.s_flat, b.perm, axis=1)
    for t in range(50):
        assert np.allclose(b.r[t] @ qam.points[layers[t]], b.x[t])
    assert np.array_equal(b.unpermute(layers), b.s_flat)


def test_unknown_ordering_rejected():
    with pytest.raises(ValueError):
        draw_batch(4, make_qam(4), 10.0, 0, 0, 1, ordering="vblast")
