"""Baseline MIMO detectors and the shared partial-Euclidean-distance recursion.

Tree detectors work on the rotated system ``x = R s + w`` with layers
processed from the last row of ``R`` to the first. Paths are compared by
their accumulated PED; where two complete paths tie exactly, the one whose
flat grid indices (listed from the last layer to the first) are
lexicographically smaller wins.

Each tree detector has a compiled kernel in :mod:`boxmimo._core` and a
pure-Python twin in this module; both follow the same visiting order and
update the same counters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .constellation import Qam
from .errors import SearchSpaceTooLarge, SingularChannel
from .numerics import SINGULAR_TOL, back_substitute, herm_mul_vec, qr_decompose

ML_MAX_LEAVES = 10**7


@dataclass
class DetectorStats:
    visited_nodes: int = 0
    ped_evals: int = 0
    comparisons: int = 0


@dataclass(frozen=True)
class PathNode:
    """Partial decision ``decided = (s_N, ..., s_depth)`` with accumulated PED.

    The root is ``PathNode(depth=N + 1, decided=(), ped=0.0)``.
    """

    depth: int
    decided: tuple[complex, ...]
    ped: float

    @classmethod
    def root(cls, n: int) -> "PathNode":
        return cls(depth=n + 1, decided=(), ped=0.0)


@dataclass(frozen=True)
class DetectionResult:
    symbols: np.ndarray
    bits: np.ndarray
    final_metric: float
    stats: DetectorStats = field(default_factory=DetectorStats)
    flat: np.ndarray | None = None


def interference_cancel(node: PathNode, x, r) -> complex:
    """``x_i - sum_{j>i} r[i, j] s_j`` for the layer below ``node`` (0-based row ``node.depth - 2``)."""
    n = len(x)
    k = node.depth - 2
    xc = complex(x[k])
    for j in range(k + 1, n):
        xc = xc - complex(r[k][j]) * node.decided[n - 1 - j]
    return xc


def ped_extend(node: PathNode, x, r, candidate: complex) -> PathNode:
    """Extend ``node`` by one layer with ``candidate`` and accumulate its PED increment."""
    if node.depth < 2:
        raise ValueError("cannot extend a complete path")
    k = node.depth - 2
    e = interference_cancel(node, x, r) - complex(r[k][k]) * candidate
    return PathNode(
        depth=node.depth - 1,
        decided=node.decided + (complex(candidate),),
        ped=node.ped + (e.real * e.real + e.imag * e.imag),
    )


def _result(flat, metric: float, visited: int, ped_evals: int, comparisons: int, qam: Qam) -> DetectionResult:
    flat = np.asarray(flat, dtype=np.int64)
    return DetectionResult(
        symbols=qam.points[flat],
        bits=qam.bit_table[flat].reshape(-1),
        final_metric=float(metric),
        stats=DetectorStats(int(visited), int(ped_evals), int(comparisons)),
        flat=flat,
    )


def _check_triangular(x, r) -> tuple[np.ndarray, np.ndarray]:
    x = np.ascontiguousarray(x, dtype=np.complex128)
    r = np.ascontiguousarray(r, dtype=np.complex128)
    n = x.shape[0]
    if x.ndim != 1 or r.shape != (n, n):
        raise ValueError(f"dimension mismatch: x {x.shape}, r {r.shape}")
    if np.min(np.abs(np.diagonal(r))) < SINGULAR_TOL:
        raise SingularChannel("triangular factor has a vanishing diagonal entry")
    return x, r


# ---------------------------------------------------------------------------
# linear receivers

def zf_detect(y, h, qam: Qam) -> DetectionResult:
    """Zero forcing on the triangularized system, then per-symbol slicing."""
    f = qr_decompose(h)
    x = herm_mul_vec(f.q, y)
    return _linear_result(back_substitute(f.r, x), f.r, x, qam)


def lmmse_detect(y, h, qam: Qam, noise_var: float) -> DetectionResult:
    h = np.asarray(h, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    n = h.shape[1]
    gram = h.conj().T @ h + noise_var * np.eye(n)
    z = np.linalg.solve(gram, h.conj().T @ y)
    f = qr_decompose(h)
    return _linear_result(z, f.r, herm_mul_vec(f.q, y), qam)


def _linear_result(z, r, x, qam: Qam) -> DetectionResult:
    flat = qam.nearest_flat(z)
    s = qam.points[flat]
    e = x - r @ s
    return _result(flat, float(np.vdot(e, e).real), 0, 0, 0, qam)


# ---------------------------------------------------------------------------
# pure-Python tree kernels

def _lists(x, r):
    return [complex(v) for v in x], [[complex(v) for v in row] for row in r]


def _ml_py(x, r, qam: Qam):
    n = len(x)
    a = qam.order
    # explicit real arithmetic keeps the rounding identical to the compiled kernel
    pre, pim = qam.levels[np.arange(a) // qam.side], qam.levels[np.arange(a) % qam.side]
    best_ped, best_path = math.inf, None
    top = n - 1
    # one subtree per symbol of the last layer keeps memory bounded
    for f_top in range(a):
        ar, ai = r[top, top].real, r[top, top].imag
        er = x[top].real - (ar * pre[f_top] - ai * pim[f_top])
        ei = x[top].imag - (ar * pim[f_top] + ai * pre[f_top])
        ped = np.array([er * er + ei * ei])
        paths = np.full((1, 1), f_top, dtype=np.int64)
        for k in range(n - 2, -1, -1):
            m = paths.shape[0]
            paths = np.hstack([np.repeat(paths, a, axis=0), np.tile(np.arange(a), m)[:, None]])
            ped = np.repeat(ped, a)
            zr = np.full(paths.shape[0], x[k].real)
            zi = np.full(paths.shape[0], x[k].imag)
            for j in range(k + 1, n):
                f = paths[:, n - 1 - j]
                ar, ai = r[k, j].real, r[k, j].imag
                zr = zr - (ar * pre[f] - ai * pim[f])
                zi = zi - (ar * pim[f] + ai * pre[f])
            f = paths[:, -1]
            ar, ai = r[k, k].real, r[k, k].imag
            er = zr - (ar * pre[f] - ai * pim[f])
            ei = zi - (ar * pim[f] + ai * pre[f])
            ped = ped + (er * er + ei * ei)
        i = int(np.argmin(ped))
        if ped[i] < best_ped:
            best_ped, best_path = float(ped[i]), paths[i]
    leaves = a**n
    evals = sum(a**l for l in range(1, n + 1))
    return best_path[::-1].copy(), best_ped, leaves, evals, leaves


def _sphere_py(x, r, qam: Qam):
    xs, rs = _lists(x, r)
    n = len(xs)
    pts = [complex(p) for p in qam.points]
    a = len(pts)
    path = [0] * n
    st = {"best": math.inf, "key": None, "path": None, "visited": 0, "evals": 0, "cmp": 0}

    def descend(k: int, ped: float) -> None:
        xc = xs[k]
        row = rs[k]
        for j in range(k + 1, n):
            xc = xc - row[j] * pts[path[j]]
        rkk = row[k]
        incs = []
        for p in pts:
            e = xc - rkk * p
            incs.append(e.real * e.real + e.imag * e.imag)
        st["evals"] += a
        for f in sorted(range(a), key=incs.__getitem__):
            d = ped + incs[f]
            st["visited"] += 1
            st["cmp"] += 1
            if d > st["best"]:
                break
            path[k] = f
            if k == 0:
                st["cmp"] += 1
                key = path[::-1]
                if d < st["best"] or key < st["key"]:
                    st["best"], st["key"], st["path"] = d, key, list(path)
            else:
                descend(k - 1, d)

    descend(n - 1, 0.0)
    return np.array(st["path"], dtype=np.int64), st["best"], st["visited"], st["evals"], st["cmp"]


def _topk_insert(top: list, d: float, parent: int, f: int, k: int) -> int:
    """Insert into the ascending list ``top`` of at most ``k`` entries; returns comparisons used."""
    m = len(top)
    c = 0
    if m == k:
        c += 1
        if not d < top[-1][0]:
            return c
        top.pop()
        m -= 1
    pos = m
    while pos > 0:
        c += 1
        if d < top[pos - 1][0]:
            pos -= 1
        else:
            break
    top.insert(pos, (d, parent, f))
    return c


def _kbest_py(x, r, qam: Qam, k: int):
    xs, rs = _lists(x, r)
    n = len(xs)
    pts = [complex(p) for p in qam.points]
    survivors = [(0.0, ())]
    visited = comparisons = 0
    for row in range(n - 1, -1, -1):
        rr = rs[row]
        rkk = rr[row]
        top: list = []
        for pi, (ped, path) in enumerate(survivors):
            xc = xs[row]
            for j in range(row + 1, n):
                xc = xc - rr[j] * pts[path[n - 1 - j]]
            for f, p in enumerate(pts):
                e = xc - rkk * p
                visited += 1
                comparisons += _topk_insert(top, ped + (e.real * e.real + e.imag * e.imag), pi, f, k)
        survivors = [(d, survivors[pi][1] + (f,)) for d, pi, f in top]
    ped, path = survivors[0]
    return np.array(path[::-1], dtype=np.int64), ped, visited, visited, comparisons


# ---------------------------------------------------------------------------
# public tree detectors

def ml_brute_force(x, r, qam: Qam) -> DetectionResult:
    """Exhaustive minimizer of ``||x - R s||^2`` over all ``A^N`` symbol vectors."""
    x, r = _check_triangular(x, r)
    n = x.shape[0]
    if qam.order**n > ML_MAX_LEAVES:
        raise SearchSpaceTooLarge(f"{qam.order}^{n} candidates exceed {ML_MAX_LEAVES}")
    core = _backend.core()
    out = core.ml_search(x, r, qam.side, qam.scale) if core else _ml_py(x, r, qam)
    return _result(*out, qam)


def sphere_detect(x, r, qam: Qam) -> DetectionResult:
    """Depth-first sphere decoder with nearest-first child order; exact ML."""
    x, r = _check_triangular(x, r)
    core = _backend.core()
    out = core.sphere_search(x, r, qam.side, qam.scale) if core else _sphere_py(x, r, qam)
    return _result(*out, qam)


def kbest_detect(x, r, qam: Qam, k: int) -> DetectionResult:
    """Breadth-first K-Best: every survivor expands all ``A`` children and the best ``k`` are kept."""
    if k < 1:
        raise ValueError("k must be positive")
    x, r = _check_triangular(x, r)
    core = _backend.core()
    out = core.kbest_search(x, r, qam.side, qam.scale, k) if core else _kbest_py(x, r, qam, k)
    return _result(*out, qam)
