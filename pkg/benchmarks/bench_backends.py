"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_backends.py --trials 200

Each row runs the same detector on the same channel draws under both
backends and reports microseconds per call and the speedup.
"""

import argparse
import time

import numpy as np

from boxmimo import _backend
from boxmimo.boxdec import PruneConfig, Strategy, box_detect, metric2_order_many
from boxmimo.channel import draw_batch
from boxmimo.constellation import make_qam
from boxmimo.detectors import kbest_detect, sphere_detect

CASES = [
    ("box-scp", 4, 16, lambda x, r, q: box_detect(x, r, q, PruneConfig(Strategy.SCP))),
    ("box-icp", 4, 16, lambda x, r, q: box_detect(x, r, q, PruneConfig(Strategy.ICP))),
    ("box-sicp1", 8, 16, lambda x, r, q: box_detect(x, r, q, PruneConfig(Strategy.SICP, icp_layers=1))),
    ("box", 4, 4, lambda x, r, q: box_detect(x, r, q, PruneConfig())),
    ("kbest", 4, 16, lambda x, r, q: kbest_detect(x, r, q, 4)),
    ("kbest", 8, 16, lambda x, r, q: kbest_detect(x, r, q, 4)),
    ("sd", 4, 16, lambda x, r, q: sphere_detect(x, r, q)),
]


def per_call(fn, batch, qam, trials):
    t0 = time.perf_counter()
    for t in range(trials):
        fn(batch.x[t], batch.r[t], qam)
    return (time.perf_counter() - t0) / trials * 1e6


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200, help="detector calls per row")
    ap.add_argument("--snr", type=float, default=15.0, help="SNR in dB of the channel draws")
    args = ap.parse_args()

    if not _backend.compiled_available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")

    print(f"{'detector':<10} {'size':<10} {'compiled us':>12} {'python us':>12} {'speedup':>8}")
    for name, n, order, fn in CASES:
        qam = make_qam(order)
        batch = draw_batch(n, qam, args.snr, 0, 0, args.trials)
        times = {}
        for backend in ("compiled", "python"):
            prev = _backend.set_backend(backend)
            try:
                times[backend] = per_call(fn, batch, qam, args.trials)
            finally:
                _backend.set_backend(prev)
        c, p = times["compiled"], times["python"]
        print(f"{name:<10} {f'{n}x{n} {order}-QAM':<10} {c:12.1f} {p:12.1f} {p / c:7.1f}x")

    # the vectorized metric tables used by the self-check
    rng = np.random.default_rng(0)
    m = 1_000_000
    dq = rng.uniform(0.1, 2.0, m)
    re, im = rng.uniform(-1, 2, m) * dq, rng.uniform(-1, 2, m) * dq
    times = {}
    for backend in ("compiled", "python"):
        prev = _backend.set_backend(backend)
        try:
            t0 = time.perf_counter()
            metric2_order_many(re, im, dq)
            times[backend] = (time.perf_counter() - t0) * 1e3
        finally:
            _backend.set_backend(prev)
    c, p = times["compiled"], times["python"]
    print(f"\nmetric2 over {m} offsets: compiled {c:.1f} ms, python {p:.1f} ms ({p / c:.1f}x)")


if __name__ == "__main__":
    main()
