"""Box decoding with sort-free candidate pruning.

A parent path at layer ``i + 1`` spawns a *box cluster* at layer ``i``: the
``B`` constellation points of a ``sqrt(B) x sqrt(B)`` window around the
reference ``a_i = x'_i / r_ii``. Within a cluster all candidates share the
parent PED and ``r_ii``, so their PED order depends only on where ``a_i``
sits relative to the grid. For the 2x2 cell with lower-left corner ``s1``
and offset ``delta1 = a_i - s1``::

    s2 = s1 + j*dq    s4 = s1 + dq + j*dq
    s1                s3 = s1 + dq

    d2 - d1 = d4 - d3 = r_ii^2 * dq * (dq - 2 Im delta1)
    d3 - d1 = d4 - d2 = r_ii^2 * dq * (dq - 2 Re delta1)
    d3 - d2 = -2 r_ii^2 * dq * (Re delta1 - Im delta1)
    d4 - d1 = -2 r_ii^2 * dq * (Re delta1 + Im delta1 - dq)

These identities hold for any ``delta1``, so the sign tests stay exact even
when the window was pushed inward at the edge of the constellation.

Pruning strategies after the first (root) layer, which keeps all ``B``
candidates:

* ``NONE``: keep every child; exact search over the box tree.
* ``SCP``: one child per cluster, chosen by the two axis sign tests.
* ``ICP``: clusters are pre-ordered by sign tests and merged; the ``K``
  globally best children survive. The last layer only needs each cluster's
  best child.
* ``SICP``: ICP on the first ``m`` layers after the root, SCP afterwards.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .constellation import GridIndex, Qam, box_window
from .detectors import DetectionResult, DetectorStats, PathNode, _check_triangular, _result, interference_cancel


class Strategy(enum.Enum):
    NONE = 0
    SCP = 1
    ICP = 2
    SICP = 3


@dataclass(frozen=True)
class PruneConfig:
    strategy: Strategy = Strategy.NONE
    box_size: int = 4
    survivors: int = 4
    icp_layers: int = 0

    def validate(self, n: int) -> None:
        w = math.isqrt(self.box_size)
        if w * w != self.box_size or w < 2 or (w & (w - 1)):
            raise ValueError(f"box size must be a power of 4, got {self.box_size}")
        if self.strategy in (Strategy.ICP, Strategy.SICP):
            if self.survivors != self.box_size:
                raise ValueError("ICP/SICP require survivors == box size")
            if n < 2:
                raise ValueError("ICP/SICP need at least two layers")
        if self.strategy is Strategy.SICP and not 1 <= self.icp_layers <= n - 2:
            raise ValueError(f"SICP needs 1 <= m <= N-2, got m={self.icp_layers} for N={n}")

    def icp_layer_count(self, n: int) -> int:
        if self.strategy is Strategy.ICP:
            return max(n - 2, 0)
        if self.strategy is Strategy.SICP:
            return self.icp_layers
        return 0


@dataclass
class BoxCluster:
    """The window candidates one parent spawns at the next layer.

    ``base`` is the lower-left corner of the 2x2 grid cell nearest to ``a``
    and ``delta1 = a - point(base)``; ``candidates`` lists the whole window
    in lexicographic order. PEDs are computed on demand through :meth:`ped`.
    """

    parent: PathNode
    parent_index: int
    x_cancel: complex
    r_ii: complex
    a: complex
    base: GridIndex
    delta1: complex
    candidates: list[GridIndex]
    qam: Qam
    _peds: dict = field(default_factory=dict, repr=False)

    @property
    def d_parent(self) -> float:
        return self.parent.ped

    @property
    def width(self) -> int:
        return math.isqrt(len(self.candidates))

    def core_position(self, metric_index: int) -> int:
        """Window position of cell corner ``metric_index`` (1..4)."""
        w = self.width
        start = self.candidates[0]
        dr = self.base.i_re - start.i_re + (metric_index - 1) // 2
        di = self.base.i_im - start.i_im + (metric_index - 1) % 2
        return dr * w + di

    def ped(self, pos: int) -> float:
        if pos not in self._peds:
            e = self.x_cancel - self.r_ii * self.qam.point(self.candidates[pos])
            self._peds[pos] = self.parent.ped + (e.real * e.real + e.imag * e.imag)
        return self._peds[pos]

    def child(self, pos: int) -> PathNode:
        return PathNode(
            depth=self.parent.depth - 1,
            decided=self.parent.decided + (self.qam.point(self.candidates[pos]),),
            ped=self.ped(pos),
        )


def make_cluster(parent: PathNode, x, r, qam: Qam, box_size: int, parent_index: int = 0) -> BoxCluster:
    k = parent.depth - 2
    xc = interference_cancel(parent, x, r)
    rkk = complex(r[k][k])
    a = xc / rkk if rkk.imag else complex(xc.real / rkk.real, xc.imag / rkk.real)
    base, start = box_window(a, qam, box_size)
    w = math.isqrt(box_size)
    cands = [GridIndex(start.i_re + dr, start.i_im + di) for dr in range(w) for di in range(w)]
    return BoxCluster(
        parent=parent, parent_index=parent_index, x_cancel=xc, r_ii=rkk, a=a, base=base,
        delta1=a - qam.point(base), candidates=cands, qam=qam,
    )


def metric1_select(delta1: complex, delta_q: float) -> int:
    """Index (1..4) of the cell corner closest to ``s1 + delta1``, from two sign tests."""
    upper = delta_q - 2.0 * delta1.imag < 0.0
    right = delta_q - 2.0 * delta1.real < 0.0
    return 1 + upper + 2 * right


def metric2_order(delta1: complex, delta_q: float) -> tuple[int, int, int, int]:
    """All four cell corners in ascending distance from ``s1 + delta1``; ties keep the lower index."""
    col = delta_q - 2.0 * delta1.imag         # sign(d2 - d1) = sign(d4 - d3)
    row = delta_q - 2.0 * delta1.real         # sign(d3 - d1) = sign(d4 - d2)
    anti = delta1.imag - delta1.real          # sign(d3 - d2)
    diag = delta_q - delta1.real - delta1.imag  # sign(d4 - d1)
    # sign of d_hi - d_lo for lo < hi
    sign = {(1, 2): col, (1, 3): row, (1, 4): diag, (2, 3): anti, (2, 4): row, (3, 4): col}
    order = [1]
    for c in (2, 3, 4):
        pos = len(order)
        while pos > 0 and sign[(order[pos - 1], c)] < 0.0:
            pos -= 1
        order.insert(pos, c)
    return tuple(order)


def _insertion_order(values: list[float]) -> tuple[list[int], int]:
    order: list[int] = []
    comparisons = 0
    for i, v in enumerate(values):
        pos = len(order)
        while pos > 0:
            comparisons += 1
            if v < values[order[pos - 1]]:
                pos -= 1
            else:
                break
        order.insert(pos, i)
    return order, comparisons


def cluster_order(cluster: BoxCluster, stats: DetectorStats | None = None) -> list[int]:
    """Window positions in ascending PED order.

    A 2x2 window is ordered by :func:`metric2_order` alone. Larger windows
    are ordered by explicit PED with a stable insertion sort.
    """
    if len(cluster.candidates) == 4:
        if stats is not None:
            stats.comparisons += 5
        return [cluster.core_position(i) for i in metric2_order(cluster.delta1, cluster.qam.delta_q)]
    values = [cluster.ped(p) for p in range(len(cluster.candidates))]
    order, c = _insertion_order(values)
    if stats is not None:
        stats.ped_evals += len(values)
        stats.comparisons += c
    return order


def scp_prune(clusters: list[BoxCluster], stats: DetectorStats | None = None) -> list[PathNode]:
    """Keep the sign-test winner of every cluster; one PED evaluation each."""
    out = []
    for cl in clusters:
        pos = cl.core_position(metric1_select(cl.delta1, cl.qam.delta_q))
        out.append(cl.child(pos))
    if stats is not None:
        stats.visited_nodes += len(clusters)
        stats.ped_evals += len(clusters)
        stats.comparisons += 2 * len(clusters)
    return out


def icp_select(clusters: list[BoxCluster], k: int, stats: DetectorStats | None = None) -> list[PathNode]:
    """Multiway merge of the pre-ordered clusters; returns the ``k`` smallest children in PED order.

    Only list heads get a PED: one per cluster up front, then one for each
    replacement, ``2k - 1`` in total when no cluster runs dry.
    """
    if stats is None:
        stats = DetectorStats()
    orders = [cluster_order(cl, stats) for cl in clusters]
    ptr = [0] * len(clusters)
    heads = [cl.ped(o[0]) for cl, o in zip(clusters, orders)]
    stats.visited_nodes += len(clusters)
    stats.ped_evals += len(clusters)
    active = [True] * len(clusters)
    out: list[PathNode] = []
    while len(out) < k and any(active):
        best = -1
        for c in range(len(clusters)):
            if not active[c]:
                continue
            if best < 0:
                best = c
                continue
            stats.comparisons += 1
            if heads[c] < heads[best]:
                best = c
        cl = clusters[best]
        out.append(cl.child(orders[best][ptr[best]]))
        ptr[best] += 1
        if ptr[best] == len(orders[best]):
            active[best] = False
        elif len(out) < k:
            heads[best] = cl.ped(orders[best][ptr[best]])
            stats.visited_nodes += 1
            stats.ped_evals += 1
    return out


def _path_key(node: PathNode, qam: Qam) -> tuple[int, ...]:
    return tuple(qam.flat_of[s] for s in node.decided)


def _best_leaf(leaves: list[PathNode], qam: Qam, stats: DetectorStats) -> PathNode:
    best = leaves[0]
    for leaf in leaves[1:]:
        stats.comparisons += 1
        if leaf.ped < best.ped or (leaf.ped == best.ped and _path_key(leaf, qam) < _path_key(best, qam)):
            best = leaf
    return best


def _box_search_py(x, r, qam: Qam, cfg: PruneConfig):
    n = len(x)
    xs = [complex(v) for v in x]
    rs = [[complex(v) for v in row] for row in r]
    b = cfg.box_size
    stats = DetectorStats()
    root = make_cluster(PathNode.root(n), xs, rs, qam, b)

    if cfg.strategy is Strategy.NONE:
        best: list = [None]

        def descend(node: PathNode) -> None:
            if node.depth == 1:
                stats.visited_nodes += 1
                stats.comparisons += 1
                if best[0] is None or node.ped < best[0].ped:
                    best[0] = node
                return
            cl = make_cluster(node, xs, rs, qam, b)
            for pos in range(b):
                stats.ped_evals += 1
                descend(cl.child(pos))

        stats.ped_evals += b
        for pos in range(b):
            descend(root.child(pos))
        leaf = best[0]
    else:
        survivors = [root.child(pos) for pos in range(b)]
        stats.visited_nodes += b
        stats.ped_evals += b
        n_icp = cfg.icp_layer_count(n)
        for layer, row in enumerate(range(n - 2, -1, -1)):
            clusters = [make_cluster(p, xs, rs, qam, b, i) for i, p in enumerate(survivors)]
            if row > 0 and layer < n_icp:
                survivors = icp_select(clusters, cfg.survivors, stats)
            else:
                survivors = scp_prune(clusters, stats)
        leaf = _best_leaf(survivors, qam, stats)

    flat = [qam.flat_of[s] for s in reversed(leaf.decided)]
    return np.array(flat, dtype=np.int64), leaf.ped, stats.visited_nodes, stats.ped_evals, stats.comparisons


def box_detect(x, r, qam: Qam, cfg: PruneConfig) -> DetectionResult:
    x, r = _check_triangular(x, r)
    n = x.shape[0]
    cfg.validate(n)
    box_window(0j, qam, cfg.box_size)  # size checks
    core = _backend.core()
    if core is not None:
        out = core.box_search(
            x, r, qam.side, qam.scale, math.isqrt(cfg.box_size),
            cfg.strategy.value, cfg.icp_layer_count(n), cfg.survivors,
        )
    else:
        out = _box_search_py(x, r, qam, cfg)
    return _result(*out, qam)


def metric1_select_many(delta_re: np.ndarray, delta_im: np.ndarray, delta_q: np.ndarray) -> np.ndarray:
    """:func:`metric1_select` over arrays, through the active backend."""
    core = _backend.core()
    if core is not None:
        return core.metric1_many(*_f64(delta_re, delta_im, delta_q))
    return np.array([metric1_select(complex(r, i), q) for r, i, q in zip(delta_re, delta_im, delta_q)], dtype=np.int64)


def metric2_order_many(delta_re: np.ndarray, delta_im: np.ndarray, delta_q: np.ndarray) -> np.ndarray:
    """:func:`metric2_order` over arrays, returning an ``(M, 4)`` array."""
    core = _backend.core()
    if core is not None:
        return core.metric2_many(*_f64(delta_re, delta_im, delta_q))
    return np.array([metric2_order(complex(r, i), q) for r, i, q in zip(delta_re, delta_im, delta_q)], dtype=np.int64)


def _f64(*arrays):
    return tuple(np.ascontiguousarray(a, dtype=np.float64) for a in arrays)
