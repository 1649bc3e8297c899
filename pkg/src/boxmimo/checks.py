"""Oracle self-checks behind ``boxmimo check``.

Each suite compares a fast path with an independent brute-force oracle and
stops at the first disagreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import boxdec
from .channel import draw_batch
from .constellation import make_qam
from .detectors import kbest_detect, ml_brute_force, sphere_detect
from .simkit import visited_formula

SUITES = ("metric-signs", "box-ml", "sd-ml", "counters")

DEFAULT_TRIALS = {"metric-signs": 10**6, "box-ml": 10**4, "sd-ml": 10**3, "counters": 100}


@dataclass
class SuiteResult:
    name: str
    cases: list[tuple[str, int, int]] = field(default_factory=list)  # (label, agreed, total)
    counterexample: str | None = None

    @property
    def agreed(self) -> int:
        return sum(c[1] for c in self.cases)

    @property
    def total(self) -> int:
        return sum(c[2] for c in self.cases)

    @property
    def passed(self) -> bool:
        return self.counterexample is None and self.agreed == self.total

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{a}/{t} agreement ({lab})" if lab else f"{a}/{t} agreement"
                          for lab, a, t in self.cases)
        return f"[{status}] {self.name}: {parts}"


def _cell_distances(d_re, d_im, dq):
    # columns follow the cell numbering s1 (0,0), s2 (0,1), s3 (1,0), s4 (1,1)
    offs = [(0, 0), (0, 1), (1, 0), (1, 1)]
    return np.stack([(d_re - p * dq) ** 2 + (d_im - q * dq) ** 2 for p, q in offs], axis=1)


def check_metric_signs(trials: int, seed: int = 0) -> SuiteResult:
    rng = np.random.default_rng(seed)
    dq = rng.uniform(0.01, 10.0, trials)
    d_re = rng.uniform(-1.0, 2.0, trials) * dq
    d_im = rng.uniform(-1.0, 2.0, trials) * dq
    dist = _cell_distances(d_re, d_im, dq)
    want_order = np.argsort(dist, axis=1, kind="stable") + 1
    want_best = want_order[:, 0]
    got_best = boxdec.metric1_select_many(d_re, d_im, dq)
    got_order = boxdec.metric2_order_many(d_re, d_im, dq)
    bad = np.flatnonzero((got_best != want_best) | np.any(got_order != want_order, axis=1))
    res = SuiteResult("metric-signs")
    if bad.size:
        i = int(bad[0])
        res.cases.append(("", i, trials))
        res.counterexample = (
            f"delta1={complex(d_re[i], d_im[i])!r} dq={dq[i]!r}: distances={dist[i].tolist()} "
            f"metric1={int(got_best[i])} (oracle {int(want_best[i])}), "
            f"metric2={got_order[i].tolist()} (oracle {want_order[i].tolist()})"
        )
    else:
        res.cases.append(("", trials, trials))
    return res


def _instances(n: int, order: int, trials: int, seed: int, snr_lo: float, snr_hi: float):
    qam = make_qam(order)
    snrs = np.random.default_rng([seed, n, order]).uniform(snr_lo, snr_hi, trials)
    for t in range(trials):
        b = draw_batch(n, qam, float(snrs[t]), seed, t, 1)
        yield t, qam, b.x[0], b.r[0]


def _compare(res: SuiteResult, label: str, n: int, order: int, trials: int, seed: int,
             snr_hi: float, fast, oracle) -> bool:
    agreed = 0
    for t, qam, x, r in _instances(n, order, trials, seed, 0.0, snr_hi):
        a, b = fast(x, r, qam), oracle(x, r, qam)
        if a != b:
            res.cases.append((label, agreed, trials))
            res.counterexample = f"{label} trial {t} x={x.tolist()}: fast={a} oracle={b}"
            return False
        agreed += 1
    res.cases.append((label, agreed, trials))
    return True


def _flat(det):
    return lambda x, r, qam: det(x, r, qam).flat.tolist()


def check_box_ml(trials: int, seed: int = 0) -> SuiteResult:
    """Unpruned box search with the box covering the constellation equals exhaustive ML."""
    res = SuiteResult("box-ml")
    for n, order, count in ((4, 4, trials), (2, 16, max(1, trials // 10))):
        cfg = boxdec.PruneConfig(boxdec.Strategy.NONE, box_size=order, survivors=order)
        box = _flat(lambda x, r, qam: boxdec.box_detect(x, r, qam, cfg))
        if not _compare(res, f"{n}x{n} {order}-QAM B={order}", n, order, count, seed, 20.0, box, _flat(ml_brute_force)):
            break
    return res


def check_sd_ml(trials: int, seed: int = 0) -> SuiteResult:
    res = SuiteResult("sd-ml")
    for n in (2, 4):
        for order in (4, 16):
            if not _compare(res, f"{n}x{n} {order}-QAM", n, order, trials, seed, 25.0,
                            _flat(sphere_detect), _flat(ml_brute_force)):
                return res
    return res


COUNTER_CASES = [
    # (detector, n, qam order, m)
    ("box-scp", 4, 16, 0), ("box-scp", 8, 16, 0),
    ("box-icp", 4, 16, 0), ("box-icp", 8, 16, 0),
    ("box-sicp", 4, 16, 1), ("box-sicp", 8, 16, 1), ("box-sicp", 8, 16, 2), ("box-sicp", 8, 16, 3),
    ("box", 4, 16, 0),
    ("kbest", 4, 4, 0), ("kbest", 4, 16, 0), ("kbest", 4, 64, 0),
    ("kbest", 8, 4, 0), ("kbest", 8, 16, 0), ("kbest", 8, 64, 0),
]

_STRATEGY = {"box": boxdec.Strategy.NONE, "box-scp": boxdec.Strategy.SCP,
             "box-icp": boxdec.Strategy.ICP, "box-sicp": boxdec.Strategy.SICP}


def measured_visits(detector: str, x, r, qam, k: int = 4, box: int = 4, m: int = 0) -> int:
    if detector == "kbest":
        return kbest_detect(x, r, qam, k).stats.visited_nodes
    cfg = boxdec.PruneConfig(_STRATEGY[detector], box_size=box, survivors=k, icp_layers=m)
    return boxdec.box_detect(x, r, qam, cfg).stats.visited_nodes


def check_counters(trials: int, seed: int = 0) -> SuiteResult:
    """Measured visited nodes equal the closed forms on every call."""
    res = SuiteResult("counters")
    agreed = total = 0
    for det, n, order, m in COUNTER_CASES:
        want = visited_formula(det, n, order, 4, 4, m)
        for t, qam, x, r in _instances(n, order, trials, seed, 0.0, 30.0):
            total += 1
            got = measured_visits(det, x, r, qam, m=m)
            if got != want:
                res.cases.append(("", agreed, total))
                res.counterexample = f"{det} {n}x{n} {order}-QAM m={m} trial {t}: measured {got}, formula {want}"
                return res
            agreed += 1
    res.cases.append(("", agreed, total))
    return res


_RUNNERS = {
    "metric-signs": check_metric_signs,
    "box-ml": check_box_ml,
    "sd-ml": check_sd_ml,
    "counters": check_counters,
}


def run_suite(name: str, trials: int | None = None, seed: int = 0) -> SuiteResult:
    return _RUNNERS[name](trials if trials is not None else DEFAULT_TRIALS[name], seed)
