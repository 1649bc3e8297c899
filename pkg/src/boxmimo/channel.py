"""Random problem instances: Rayleigh channel, uniform symbols, AWGN.

Every trial owns a Philox stream keyed by ``(master_seed, trial_index)``, so
an instance depends on nothing but its :class:`SeedSpec`. Within a stream the
draw order is fixed: channel, bits, unit-variance noise. If the channel turns
out singular the three draws are repeated from the same stream.

The SNR is ``N * Es / noise_var`` with ``Es = 1``; the noise variance per
complex receive entry is therefore ``N / 10**(snr_db / 10)``. ``snr_db=inf``
gives a noiseless instance. Because the unit noise is drawn independently of
the SNR, one trial index yields the same channel, symbols and noise
direction at every SNR point.

With ``ordering="sorted"`` the triangular factor comes from a column-sorted
QR; ``perm`` then maps the rotated system's layers back to transmit antennas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constellation import Qam
from .numerics import QrFactors, qr_decompose_many, sorted_qr_many

_RSQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    trial_index: int


@dataclass(frozen=True)
class ChannelInstance:
    h: np.ndarray
    s: np.ndarray
    tx_bits: np.ndarray
    y: np.ndarray
    snr_db: float
    noise_var: float
    s_flat: np.ndarray
    qr: QrFactors
    x: np.ndarray  # rotated observation q^H y


def noise_variance(n: int, snr_db: float) -> float:
    if snr_db == math.inf:
        return 0.0
    return n / 10.0 ** (snr_db / 10.0)


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    key = np.array([master_seed & 0xFFFFFFFFFFFFFFFF, trial_index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _raw_draw(rng: np.random.Generator, n: int, bits_per_symbol: int):
    h = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * _RSQRT2
    bits = rng.integers(0, 2, size=(n, bits_per_symbol), dtype=np.uint8)
    w = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) * _RSQRT2
    return h, bits, w


@dataclass
class TrialBatch:
    """Stacked instances for ``count`` consecutive trials at one SNR."""

    h: np.ndarray       # (T, n, n)
    q: np.ndarray       # (T, n, n)
    r: np.ndarray       # (T, n, n)
    s_flat: np.ndarray  # (T, n)
    tx_bits: np.ndarray  # (T, n * bits_per_symbol)
    y: np.ndarray       # (T, n)
    x: np.ndarray       # (T, n)
    noise_var: float
    perm: np.ndarray    # (T, n); layer j of x and r belongs to antenna perm[t, j]

    def unpermute(self, flat: np.ndarray) -> np.ndarray:
        """Map per-layer decisions ``(T, n)`` back to antenna order."""
        out = np.empty_like(flat)
        out[np.arange(flat.shape[0])[:, None], self.perm] = flat
        return out


ORDERINGS = ("plain", "sorted")


def _factor(h: np.ndarray, ordering: str):
    if ordering == "sorted":
        return sorted_qr_many(h)
    q, r, ok = qr_decompose_many(h)
    return q, r, np.tile(np.arange(h.shape[-1]), (h.shape[0], 1)), ok


def draw_batch(n: int, qam: Qam, snr_db: float, master_seed: int, first_trial: int, count: int,
               ordering: str = "plain") -> TrialBatch:
    """Instances for trials ``first_trial .. first_trial + count - 1``."""
    if n < 1:
        raise ValueError("MIMO size must be at least 1")
    if ordering not in ORDERINGS:
        raise ValueError(f"unknown ordering {ordering!r}")
    bps = qam.bits_per_symbol
    rngs = [trial_rng(master_seed, first_trial + t) for t in range(count)]
    h = np.empty((count, n, n), dtype=np.complex128)
    bits = np.empty((count, n, bps), dtype=np.uint8)
    w = np.empty((count, n), dtype=np.complex128)
    for t, rng in enumerate(rngs):
        h[t], bits[t], w[t] = _raw_draw(rng, n, bps)
    q, r, perm, ok = _factor(h, ordering)
    for t in np.flatnonzero(~ok):
        while True:
            h[t], bits[t], w[t] = _raw_draw(rngs[t], n, bps)
            qt, rt, pt, okt = _factor(h[t][None], ordering)
            if okt[0]:
                q[t], r[t], perm[t] = qt[0], rt[0], pt[0]
                break
    s_flat = qam.bits_to_flat(bits)
    s = qam.points[s_flat]
    noise_var = noise_variance(n, snr_db)
    y = np.einsum("tij,tj->ti", h, s)
    if noise_var > 0:
        y = y + math.sqrt(noise_var) * w
    x = np.einsum("tji,tj->ti", q.conj(), y)
    return TrialBatch(
        h=h, q=q, r=r, s_flat=s_flat, tx_bits=bits.reshape(count, n * bps),
        y=y, x=x, noise_var=noise_var, perm=perm,
    )


def draw_instance(n: int, qam: Qam, snr_db: float, seed: SeedSpec) -> ChannelInstance:
    b = draw_batch(n, qam, snr_db, seed.master_seed, seed.trial_index, 1)
    return ChannelInstance(
        h=b.h[0], s=qam.points[b.s_flat[0]], tx_bits=b.tx_bits[0], y=b.y[0],
        snr_db=snr_db, noise_var=b.noise_var, s_flat=b.s_flat[0],
        qr=QrFactors(q=b.q[0], r=b.r[0]), x=b.x[0],
    )
