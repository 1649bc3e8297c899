"""``boxmimo`` command line: BER sweeps, visited-node tables and self-checks.

Flag errors exit with status 2 and usage text; runtime failures exit with 1.
"""

from __future__ import annotations

import math
import sys

import click

from . import checks
from .constellation import SUPPORTED_ORDERS
from .errors import MimoError, NotBracketed
from .simkit import Detector, SimConfig, interpolate_snr_at_ber, run_ber, visited_formula, write_csv

TARGET_BER = 1e-3
DETECTOR_NAMES = [d.value for d in Detector]


def _int_list(ctx, param, value):
    if value is None:
        return ()
    try:
        out = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")
    if not out:
        raise click.BadParameter("empty list")
    return out


def _detectors(ctx, param, value):
    names = [v.strip() for v in value.split(",") if v.strip()]
    bad = [n for n in names if n not in DETECTOR_NAMES]
    if bad or not names:
        raise click.BadParameter(f"unknown detector(s) {bad}; choose from {', '.join(DETECTOR_NAMES)}")
    return tuple(dict.fromkeys(Detector(n) for n in names))


def parse_snr_range(text: str) -> tuple[float, ...]:
    """``start:step:stop`` with both ends inclusive."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError("SNR range must look like start:step:stop")
    start, step, stop = (float(p) for p in parts)
    if not all(math.isfinite(v) for v in (start, step, stop)) or step <= 0 or stop < start:
        raise ValueError("SNR range needs finite values, step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 9) for i in range(count))


def _snr(ctx, param, value):
    try:
        return parse_snr_range(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc))


def _qam(ctx, param, value):
    if value not in SUPPORTED_ORDERS:
        raise click.BadParameter(f"QAM order must be one of {SUPPORTED_ORDERS}")
    return value


@click.group()
def main():
    """MIMO box-decoding detectors and BER experiments."""


@main.command()
@click.option("--mimo", type=click.IntRange(min=1), required=True, help="Antennas per side (N x N channel).")
@click.option("--qam", type=int, required=True, callback=_qam, help="QAM order: 4, 16, 64 or 256.")
@click.option("--detectors", required=True, callback=_detectors,
              help=f"Comma-separated detectors from: {', '.join(DETECTOR_NAMES)}.")
@click.option("--k", type=click.IntRange(min=1), default=4, show_default=True,
              help="Survivors per layer for kbest and the box pruning strategies.")
@click.option("--box", type=click.IntRange(min=4), default=4, show_default=True,
              help="Box size B (a power of 4, at most the QAM order).")
@click.option("--m", "m_list", callback=_int_list,
              help="Comma-separated ICP layer counts for box-sicp (one curve each); required with box-sicp.")
@click.option("--snr", required=True, callback=_snr, help="Inclusive SNR grid in dB as start:step:stop.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True,
              help="Master seed; trial t uses the stream keyed by (seed, t).")
@click.option("--min-errors", type=click.IntRange(min=1), default=200, show_default=True,
              help="Stop a detector at an SNR point once it has this many bit errors.")
@click.option("--max-trials", type=click.IntRange(min=1), default=10**7, show_default=True,
              help="Hard cap on trials per SNR point and detector.")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes; results do not depend on this.")
@click.option("--out", type=click.Path(dir_okay=False, writable=True), required=True,
              help="CSV output path, written atomically.")
@click.option("--no-timing", is_flag=True,
              help="Write 0 in the elapsed_seconds column so repeated runs give identical files.")
@click.option("--ordering", type=click.Choice(["plain", "sorted"]), default="plain", show_default=True,
              help="Layer order of the QR: plain column order, or sorted so the strongest antenna is decided first.")
@click.option("--quiet", is_flag=True, help="Do not print per-point progress to stderr.")
def ber(mimo, qam, detectors, k, box, m_list, snr, seed, min_errors, max_trials, workers, out, no_timing,
        ordering, quiet):
    """Run a Monte Carlo BER sweep and write one CSV row per (SNR, detector)."""
    if Detector.BOX_SICP in detectors and not m_list:
        raise click.UsageError("box-sicp requires --m")
    cfg = SimConfig(n=mimo, qam_order=qam, detectors=detectors, snr_points=snr, k=k, box_size=box,
                    icp_layers=m_list, master_seed=seed, min_bit_errors=min_errors,
                    max_trials=max_trials, workers=workers, ordering=ordering)
    try:
        cfg.validate()
    except (MimoError, ValueError) as exc:
        raise click.UsageError(str(exc))
    progress = None if quiet else (lambda msg: click.echo(msg, err=True))
    try:
        records = run_ber(cfg, progress=progress)
        write_csv(records, out, timing=not no_timing)
    except (OSError, MimoError) as exc:
        raise click.ClickException(str(exc))
    click.echo(format_summary(records))


def format_summary(records) -> str:
    labels = list(dict.fromkeys(r.detector for r in records))
    at = {}
    for lab in labels:
        try:
            at[lab] = interpolate_snr_at_ber(records, TARGET_BER, lab)
        except NotBracketed:
            at[lab] = None
    ref = at.get("kbest")
    lines = [f"{'detector':<12} {'SNR@1e-3 [dB]':>14} {'gap vs kbest':>13}"]
    for lab in labels:
        s = at[lab]
        snr_txt = f"{s:.2f}" if s is not None else "not bracketed"
        gap = f"{s - ref:+.2f}" if s is not None and ref is not None else "-"
        lines.append(f"{lab:<12} {snr_txt:>14} {gap:>13}")
    return "\n".join(lines)


@main.command()
@click.option("--mimo", "mimo_list", required=True, callback=_int_list, help="Comma-separated MIMO sizes N.")
@click.option("--qam", "qam_list", required=True, callback=_int_list, help="Comma-separated QAM orders for the K-Best rows.")
@click.option("--k", type=click.IntRange(min=1), default=4, show_default=True, help="Survivors K.")
@click.option("--box", type=click.IntRange(min=4), default=4, show_default=True, help="Box size B.")
@click.option("--m", "m_list", callback=_int_list, default="1,2,3", show_default=True,
              help="Comma-separated ICP layer counts for the box-sicp rows.")
def complexity(mimo_list, qam_list, k, box, m_list):
    """Print closed-form visited-node counts per detector and MIMO size."""
    w = math.isqrt(box)
    if w * w != box or w & (w - 1):
        raise click.BadParameter("box size must be a power of 4", param_hint="--box")
    for a in qam_list:
        if a not in SUPPORTED_ORDERS:
            raise click.BadParameter(f"QAM order must be one of {SUPPORTED_ORDERS}", param_hint="--qam")
    if any(n < 1 for n in mimo_list):
        raise click.BadParameter("MIMO sizes must be positive", param_hint="--mimo")
    if any(m < 1 for m in m_list):
        raise click.BadParameter("m must be at least 1", param_hint="--m")

    rows: list[tuple[str, list[str]]] = []
    for a in qam_list:
        rows.append((f"K-Best {a}-QAM", [str(visited_formula("kbest", n, a, k, box)) for n in mimo_list]))
    rows.append(("DKB", [str(visited_formula("dkb", n, 0, k, box)) for n in mimo_list]))
    rows.append(("Box", [str(visited_formula("box", n, 0, k, box)) for n in mimo_list]))
    rows.append(("Box-SCP", [str(visited_formula("box-scp", n, 0, k, box)) for n in mimo_list]))
    icp_ok = k == box
    rows.append(("Box-ICP", [str(visited_formula("box-icp", n, 0, k, box)) if icp_ok and n >= 2 else "-"
                             for n in mimo_list]))
    for m in m_list:
        rows.append((f"Box-SICP m={m}",
                     [str(visited_formula("box-sicp", n, 0, k, box, m)) if icp_ok and 1 <= m <= n - 2 else "-"
                      for n in mimo_list]))

    width = max(len(name) for name, _ in rows) + 2
    click.echo(f"{'detector':<{width}}" + "".join(f"{f'{n}x{n}':>10}" for n in mimo_list))
    for name, cells in rows:
        click.echo(f"{name:<{width}}" + "".join(f"{c:>10}" for c in cells))
    if 8 in mimo_list and 4 in qam_list and k == 4:
        click.echo("note: the 8x8 4-QAM K-Best cell follows A + A*K*(N-1) = 116; "
                   "a value of 100 sometimes quoted for it does not match the formula.")


@main.command()
@click.option("--suite", type=click.Choice(["all", *checks.SUITES]), default="all", show_default=True,
              help="Which oracle suite to run.")
@click.option("--trials", type=click.IntRange(min=1), default=None,
              help="Instances per suite (per configuration for sd-ml and counters); defaults vary by suite.")
@click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=0, show_default=True, help="Seed for the random inputs.")
def check(suite, trials, seed):
    """Compare fast paths against brute-force oracles; exit 1 on the first disagreement."""
    names = checks.SUITES if suite == "all" else (suite,)
    failed = False
    for name in names:
        res = checks.run_suite(name, trials, seed)
        click.echo(res.line())
        if not res.passed:
            failed = True
            click.echo(f"  counterexample: {res.counterexample}")
    if failed:
        sys.exit(1)
