"""Monte Carlo BER harness, closed-form visited-node counts and CSV output.

Trials are processed in fixed chunks of :data:`CHUNK_TRIALS`. For every SNR
point and detector, the chunks are consumed in order until the detector has
collected ``min_bit_errors`` errors or ``max_trials`` trials. All detectors
see the same trial indices, hence the same channels, symbols and noise.
Chunk results are pure functions of their inputs, so the records do not
depend on how many worker processes computed them.
"""

from __future__ import annotations

import csv
import enum
import io
import math
import os
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .boxdec import PruneConfig, Strategy, box_detect
from .channel import ORDERINGS, TrialBatch, draw_batch
from .constellation import make_qam
from .detectors import ML_MAX_LEAVES, kbest_detect, ml_brute_force, sphere_detect
from .errors import NotBracketed, SearchSpaceTooLarge, UnsupportedDetector

CHUNK_TRIALS = 250

CSV_HEADER = ("snr_db", "detector", "trials", "bit_errors", "ber", "avg_visited_nodes", "avg_ped_evals", "elapsed_seconds")


class Detector(enum.Enum):
    ZF = "zf"
    LMMSE = "lmmse"
    ML = "ml"
    SD = "sd"
    KBEST = "kbest"
    BOX = "box"
    BOX_SCP = "box-scp"
    BOX_ICP = "box-icp"
    BOX_SICP = "box-sicp"

    @property
    def rank(self) -> int:
        return list(Detector).index(self)


TREE_FORMULA_DETECTORS = (Detector.KBEST, Detector.BOX, Detector.BOX_SCP, Detector.BOX_ICP, Detector.BOX_SICP)


@dataclass(frozen=True)
class DetectorSpec:
    """A detector plus its ICP layer count (SICP only)."""

    detector: Detector
    m: int = 0

    @property
    def label(self) -> str:
        return f"{self.detector.value}{self.m}" if self.detector is Detector.BOX_SICP else self.detector.value

    def __lt__(self, other: "DetectorSpec") -> bool:  # enum order, then m
        return (self.detector.rank, self.m) < (other.detector.rank, other.m)


@dataclass(frozen=True)
class SimConfig:
    n: int
    qam_order: int
    detectors: tuple[Detector, ...]
    snr_points: tuple[float, ...]
    k: int = 4
    box_size: int = 4
    icp_layers: tuple[int, ...] = ()
    master_seed: int = 0
    min_bit_errors: int = 200
    max_trials: int = 10**7
    workers: int = 1
    ordering: str = "plain"

    def validate(self) -> None:
        make_qam(self.qam_order)
        if self.n < 1:
            raise ValueError("MIMO size must be at least 1")
        if not self.detectors:
            raise ValueError("at least one detector is required")
        if not self.snr_points:
            raise ValueError("at least one SNR point is required")
        if any(b <= a for a, b in zip(self.snr_points, self.snr_points[1:])):
            raise ValueError("SNR points must be strictly increasing")
        if self.min_bit_errors < 1 or self.max_trials < 1 or self.workers < 1:
            raise ValueError("min_bit_errors, max_trials and workers must be positive")
        if self.ordering not in ORDERINGS:
            raise ValueError(f"ordering must be one of {', '.join(ORDERINGS)}")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if Detector.BOX_SICP in self.detectors and not self.icp_layers:
            raise ValueError("box-sicp requires ICP layer counts (m)")
        if Detector.ML in self.detectors and self.qam_order**self.n > ML_MAX_LEAVES:
            raise SearchSpaceTooLarge(f"ML over {self.qam_order}^{self.n} candidates is too large")
        if Detector.KBEST in self.detectors and self.k < 1:
            raise ValueError("k must be positive")
        for spec in self.specs():
            cfg = _prune_config(spec, self)
            if cfg is not None:
                cfg.validate(self.n)
                if cfg.box_size > self.qam_order:
                    raise ValueError(f"box size {cfg.box_size} exceeds {self.qam_order}-QAM")

    def specs(self) -> list[DetectorSpec]:
        out = set()
        for d in self.detectors:
            if d is Detector.BOX_SICP:
                out.update(DetectorSpec(d, m) for m in self.icp_layers)
            else:
                out.add(DetectorSpec(d))
        return sorted(out)


@dataclass(frozen=True)
class BerRecord:
    snr_db: float
    detector: str
    trials: int
    bit_errors: int
    ber: float
    avg_visited_nodes: float
    avg_ped_evals: float
    elapsed_seconds: float


def visited_formula(detector: Detector | str, n: int, a: int, k: int, b: int, m: int = 0) -> int:
    """Closed-form visited-node count per detection call.

    ``detector`` may also be ``"dkb"``, which is reported for reference only.
    """
    name = detector.value if isinstance(detector, Detector) else str(detector).lower()
    if name == "kbest":
        return a + a * k * (n - 1)
    if name == "dkb":
        return (3 * k - 2) * n
    if name == "box":
        return b**n
    if name == "box-scp":
        return n * b
    if name == "box-icp":
        return 2 * b + (2 * k - 1) * (n - 2)
    if name == "box-sicp":
        return 2 * b + m * (k - 1) + (n - 2) * k
    raise UnsupportedDetector(f"no visited-node formula for {name!r}")


def _prune_config(spec: DetectorSpec, cfg: SimConfig) -> PruneConfig | None:
    strategy = {
        Detector.BOX: Strategy.NONE,
        Detector.BOX_SCP: Strategy.SCP,
        Detector.BOX_ICP: Strategy.ICP,
        Detector.BOX_SICP: Strategy.SICP,
    }.get(spec.detector)
    if strategy is None:
        return None
    return PruneConfig(strategy=strategy, box_size=cfg.box_size, survivors=cfg.k, icp_layers=spec.m)


# ---------------------------------------------------------------------------
# per-chunk work

def linear_decisions(detector: Detector, batch: TrialBatch, qam) -> np.ndarray:
    """Batched ZF/LMMSE slicing in antenna order; same decisions as the per-call detectors."""
    if detector is Detector.ZF:
        z = np.linalg.solve(batch.r, batch.x[..., None])[..., 0]
        return batch.unpermute(qam.nearest_flat(z))
    hh = np.conj(np.swapaxes(batch.h, -1, -2))
    n = batch.h.shape[-1]
    gram = hh @ batch.h + batch.noise_var * np.eye(n)
    z = np.linalg.solve(gram, (hh @ batch.y[..., None]))[..., 0]
    return qam.nearest_flat(z)


def _hamming_table(qam) -> np.ndarray:
    t = qam.bit_table.astype(np.int64)
    return (t[:, None, :] != t[None, :, :]).sum(axis=-1)


@dataclass
class _ChunkTask:
    n: int
    qam_order: int
    k: int
    box_size: int
    snr_db: float
    master_seed: int
    first_trial: int
    count: int
    specs: tuple[tuple[str, int], ...]
    ordering: str = "plain"


def _run_chunk(task: _ChunkTask) -> list[tuple[int, int, int, float]]:
    """One ``(bit_errors, visited_sum, ped_eval_sum, elapsed_seconds)`` tuple per detector."""
    qam = make_qam(task.qam_order)
    batch = draw_batch(task.n, qam, task.snr_db, task.master_seed, task.first_trial, task.count, task.ordering)
    ham = _hamming_table(qam)
    cfg = SimConfig(n=task.n, qam_order=task.qam_order, detectors=(Detector.ZF,), snr_points=(0.0,),
                    k=task.k, box_size=task.box_size)
    out = []
    for name, m in task.specs:
        spec = DetectorSpec(Detector(name), m)
        t0 = time.perf_counter()
        visited = evals = 0
        if spec.detector in (Detector.ZF, Detector.LMMSE):
            det = linear_decisions(spec.detector, batch, qam)
        else:
            det = np.empty_like(batch.s_flat)
            prune = _prune_config(spec, cfg)
            for t in range(task.count):
                x, r = batch.x[t], batch.r[t]
                if prune is not None:
                    res = box_detect(x, r, qam, prune)
                elif spec.detector is Detector.KBEST:
                    res = kbest_detect(x, r, qam, task.k)
                elif spec.detector is Detector.SD:
                    res = sphere_detect(x, r, qam)
                else:
                    res = ml_brute_force(x, r, qam)
                det[t] = res.flat
                visited += res.stats.visited_nodes
                evals += res.stats.ped_evals
            det = batch.unpermute(det)
        errors = int(ham[batch.s_flat, det].sum())
        out.append((errors, visited, evals, time.perf_counter() - t0))
    return out


@dataclass
class _Acc:
    trials: int = 0
    errors: int = 0
    visited: int = 0
    evals: int = 0
    elapsed: float = 0.0
    done: bool = False


def run_ber(cfg: SimConfig, progress: Callable[[str], None] | None = None) -> list[BerRecord]:
    """Simulate every (SNR, detector) pair; records are ordered by SNR, then detector."""
    cfg.validate()
    specs = cfg.specs()
    qam = make_qam(cfg.qam_order)
    bits_per_trial = cfg.n * qam.bits_per_symbol
    executor = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    records: list[BerRecord] = []
    try:
        for snr in cfg.snr_points:
            acc = {s: _Acc() for s in specs}
            chunk = 0
            while not all(a.done for a in acc.values()):
                live = tuple((s.detector.value, s.m) for s in specs if not acc[s].done)
                tasks = []
                for c in range(chunk, chunk + cfg.workers):
                    first = c * CHUNK_TRIALS
                    if first >= cfg.max_trials:
                        break
                    count = min(CHUNK_TRIALS, cfg.max_trials - first)
                    tasks.append(_ChunkTask(cfg.n, cfg.qam_order, cfg.k, cfg.box_size, float(snr),
                                            cfg.master_seed, first, count, live, cfg.ordering))
                results = executor.map(_run_chunk, tasks) if executor else map(_run_chunk, tasks)
                for task, res in zip(tasks, results):
                    for (name, m), (err, vis, ev, el) in zip(task.specs, res):
                        a = acc[DetectorSpec(Detector(name), m)]
                        if a.done:
                            continue
                        a.trials += task.count
                        a.errors += err
                        a.visited += vis
                        a.evals += ev
                        a.elapsed += el
                        if a.errors >= cfg.min_bit_errors or a.trials >= cfg.max_trials:
                            a.done = True
                chunk += len(tasks)
            for s in specs:
                a = acc[s]
                records.append(BerRecord(
                    snr_db=float(snr), detector=s.label, trials=a.trials, bit_errors=a.errors,
                    ber=a.errors / (a.trials * bits_per_trial),
                    avg_visited_nodes=a.visited / a.trials, avg_ped_evals=a.evals / a.trials,
                    elapsed_seconds=a.elapsed,
                ))
                if progress:
                    progress(f"{snr:g} dB {s.label}: ber={records[-1].ber:.3e} trials={a.trials}")
    finally:
        if executor:
            executor.shutdown()
    return records


# ---------------------------------------------------------------------------
# post-processing and CSV

def interpolate_snr_at_ber(records: Iterable[BerRecord], target_ber: float, detector: str | None = None) -> float:
    """SNR at which the BER curve first falls through ``target_ber`` (linear in dB vs log10 BER)."""
    pts = sorted((r.snr_db, r.ber) for r in records if detector is None or r.detector == detector)
    for s, b in pts:
        if b == target_ber:
            return s
    lt = math.log10(target_ber)
    for (s0, b0), (s1, b1) in zip(pts, pts[1:]):
        if b0 > target_ber > b1 and b1 > 0:
            l0, l1 = math.log10(b0), math.log10(b1)
            return s0 + (lt - l0) * (s1 - s0) / (l1 - l0)
    raise NotBracketed(f"BER {target_ber:g} is not bracketed for {detector or 'records'}")


def _fmt(v: float) -> str:
    return format(v, ".12g")


def records_to_csv(records: Sequence[BerRecord], timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in records:
        w.writerow([
            _fmt(r.snr_db), r.detector, r.trials, r.bit_errors, _fmt(r.ber),
            _fmt(r.avg_visited_nodes), _fmt(r.avg_ped_evals), _fmt(r.elapsed_seconds if timing else 0.0),
        ])
    return buf.getvalue()


def write_csv(records: Sequence[BerRecord], path: str | os.PathLike, timing: bool = True) -> None:
    """Write atomically: a temporary file in the target directory is renamed into place."""
    path = Path(path)
    text = records_to_csv(records, timing=timing)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_csv(path: str | os.PathLike) -> list[BerRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        BerRecord(float(r["snr_db"]), r["detector"], int(r["trials"]), int(r["bit_errors"]), float(r["ber"]),
                  float(r["avg_visited_nodes"]), float(r["avg_ped_evals"]), float(r["elapsed_seconds"]))
        for r in rows
    ]
