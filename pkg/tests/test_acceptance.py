"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` or ``python tests/test_acceptance.py``.
Every test also checks its runtime budget.
"""
from __future__ import annotations

import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from oracles import gate_fraction_bruteforce, photon_number_yields, poisson_gain_qber  # noqa: E402
from qli.channel import expected_gains, sift, simulate_pulses  # noqa: E402
from qli.fiber import FiberSpec, walk_off_delay  # noqa: E402
from qli.keyrate import KeyRateInput, e1_upper, skr, vacuum_yield_bounds, y1_lower  # noqa: E402
from qli.scenario import Scenario, calibrate, plan, run_scenario, sweep_launch_power  # noqa: E402
from qli.timing import FramePlan, carve_pattern, in_window_fraction, spread_profile  # noqa: E402
from qli.units import channel_wavelength  # noqa: E402

PUBLISHED_RATE_PAIRS = [
    (1.58e-3, 39500), (2.54e-4, 6350), (5.1e-6, 128),
    (7.19e-4, 18000), (2.56e-5, 640), (2.45e-6, 61.4),
]
BEST_ROWS = [(20.0, 0.0112, 39500.0), (50.0, 0.0204, 6350.0), (100.0, 0.0381, 128.0)]

# collected here and printed in the terminal summary (see conftest.py)
REPORT_LINES: list[str] = []


def _report(n: int, title: str, ok: bool, detail: str, elapsed: float, budget: float):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} | {detail} | {elapsed:.2f}s/{budget:g}s"
    REPORT_LINES.append(line)
    print(line)
    return line


def _finish(n, title, checks, t0, budget):
    elapsed = time.perf_counter() - t0
    ok = all(c for c, _ in checks) and elapsed < budget
    _report(n, title, ok, "; ".join(d for _, d in checks), elapsed, budget)
    failed = [d for c, d in checks if not c]
    assert not failed, f"criterion {n} failed: {failed}"
    assert elapsed < budget, f"criterion {n} took {elapsed:.1f}s (budget {budget}s)"


@pytest.fixture(scope="module")
def cal():
    return calibrate(Scenario())


def test_c1_rate_unit_consistency():
    t0 = time.perf_counter()
    checks = []
    for bpp, bps in PUBLISHED_RATE_PAIRS:
        rel = abs(bpp * 25e6 - bps) / bps
        checks.append((rel <= 0.01, f"{bpp:g}x25MHz={bpp * 25e6:.4g} vs {bps:g} ({rel:.2%})"))
    out = skr(KeyRateInput((0.02, 0.001, 1e-5), (0.01, 0.02, 0.5)))
    checks.append((out.r_bps == out.r_per_pulse * 25e6, "skr r_bps == r_per_pulse*rep exactly"))
    _finish(1, "published rate pairs", checks, t0, 1.0)


def test_c2_calibrated_best_rows(cal):
    t0 = time.perf_counter()
    checks = []
    for (length, e_pub, r_pub), name in zip(BEST_ROWS, ("20km", "50km", "100km")):
        s = cal.apply(replace(Scenario.load(name), mode="analytic"))
        assert s.fiber.length_km == length
        r = run_scenario(s)
        dq = abs(r.qber - e_pub) * 100
        ratio = r.r_bps / r_pub if r.r_bps > 0 else math.inf
        ok = dq <= 1.0 and 1 / 3 <= ratio <= 3
        checks.append(
            (ok, f"{length:g}km QBER {r.qber:.2%} vs {e_pub:.2%} (d={dq:.2f}pp), "
                 f"SKR {r.r_bps:.4g} vs {r_pub:g} b/s (x{ratio:.2f})")
        )
    _finish(2, "calibrated best-case rows", checks, t0, 10.0)


def test_c3_walk_off_geometry():
    t0 = time.perf_counter()
    lq = channel_wavelength(39)
    w28 = walk_off_delay(FiberSpec(100.0), channel_wavelength(28), lq) * 1e-3
    w36 = walk_off_delay(FiberSpec(20.0), channel_wavelength(36), lq) * 1e-3
    checks = [
        (14.5 <= w28 <= 15.5, f"Ch28/100km {w28:.3f} ns in [14.5, 15.5]"),
        (0.75 <= w36 <= 0.90, f"Ch36/20km {w36:.4f} ns in [0.75, 0.90]"),
    ]
    _finish(3, "walk-off geometry", checks, t0, 1.0)


def test_c4_trapezoid_matches_bruteforce():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240)
    cases = [(15.0, 4.0, 0.0, 0.0), (15.0, 4.0, 0.0, 30.0), (15.0, 4.0, 0.0, 15.0)]
    while len(cases) < 120:
        gap = rng.uniform(2.0, 38.0)
        gate = rng.uniform(0.2, gap)
        slack = (gap - gate) / 2
        offset = rng.uniform(-slack, slack)
        w = rng.choice([rng.uniform(0, gap), rng.uniform(gap, 80.0)])
        cases.append((gap, gate, offset, w))
    worst = 0.0
    for gap, gate, offset, w in cases:
        p = FramePlan(gap_width_ns=gap, gate_width_ns=gate, gate_center_offset_ns=offset,
                      qkd_pulse_width_ps=min(200.0, gate * 1e3))
        a, b = p.gate_window
        exact = in_window_fraction(spread_profile(carve_pattern(p), w), p)
        length, d = 100.0, 17.0
        oracle = gate_fraction_bruteforce(40.0, gap, a, b, length, d, w / (d * length * 1e-3))
        worst = max(worst, abs(exact - oracle))
    n_zero = sum(1 for c in cases if c[3] == 0)
    n_wide = sum(1 for c in cases if c[3] > c[0])
    checks = [
        (worst <= 1e-4, f"{len(cases)} cases ({n_zero} zero walk-off, {n_wide} wider than gap), "
                        f"max |diff| {worst:.2e} <= 1e-4"),
        (n_zero >= 1 and n_wide >= 1, "edge cases present"),
    ]
    _finish(4, "trapezoid vs 1e5-segment oracle", checks, t0, 30.0)


def test_c5_decoy_bounds_safe():
    t0 = time.perf_counter()
    rng = np.random.default_rng(777)
    mu1, mu2, mu3 = 0.85, 0.04, 0.001
    n, y1_bad, e1_bad, undefined = 1000, 0, 0, 0
    for _ in range(n):
        eta = 10 ** rng.uniform(-4, math.log10(0.5))
        y_b = rng.uniform(0, 1e-3)
        e_mis = rng.uniform(0, 0.05)
        (q1, _), (q2, e2), (q3, _) = (poisson_gain_qber(m, eta, y_b, e_mis) for m in (mu1, mu2, mu3))
        _, y, err = photon_number_yields(eta, y_b, e_mis)
        y0u, y0l = vacuum_yield_bounds(q2, q3, mu2, mu3)
        y1l = y1_lower(q1, q2, mu1, mu2, y0u)
        y1_bad += y1l > y[1]
        if y1l > 0:
            e1_bad += e1_upper(e2, q2, mu2, y0l, y1l) < min(err[1] / y[1], 0.5)
        else:
            undefined += 1
    checks = [
        (y1_bad == 0, f"y1_lower violations {y1_bad}/{n}"),
        (e1_bad == 0, f"e1_upper violations {e1_bad}/{n - undefined} ({undefined} bound-undefined)"),
    ]
    _finish(5, "decoy bound safety", checks, t0, 10.0)


def test_c6_monte_carlo_agrees(cal):
    t0 = time.perf_counter()
    s = cal.apply(Scenario.load("20km"))
    res = run_scenario(s)
    args = (1_000_000, 2024, s.decoy, s.system, s.detector, s.budget.eta_channel, res.p_raman_gate)
    tally = simulate_pulses(*args, workers=1)
    same = simulate_pulses(*args, workers=4) == tally and simulate_pulses(*args, workers=2) == tally
    q, e, _ = expected_gains(s.decoy, s.system, s.detector, s.budget.eta_channel, res.p_raman_gate)
    match = s.system.basis_match_prob
    checks = [(same, "tally identical for 1/2/4 workers")]
    for k, (est, label) in enumerate(zip(sift(tally, s.system), ("signal", "decoy", "vacuum"))):
        sent = int(tally.pulses_sent[k])
        p = q[k] * match
        z_q = (est.gain - q[k]) / (math.sqrt(p * (1 - p) / sent) / match)
        det = int(tally.sifted_detections[k])
        if det:
            z_e = (est.qber - e[k]) / math.sqrt(e[k] * (1 - e[k]) / det)
        else:
            z_e = 0.0
        checks.append(
            (abs(z_q) <= 3 and abs(z_e) <= 3,
             f"{label} Q {est.gain:.4g}/{q[k]:.4g} ({z_q:+.2f}sd) E {est.qber:.4g}/{e[k]:.4g} ({z_e:+.2f}sd)")
        )
    _finish(6, "Monte Carlo vs analytic at 20 km", checks, t0, 60.0)


def test_c7_interleaving_curve(cal):
    t0 = time.perf_counter()
    s = cal.apply(Scenario.load("20km"))
    off = replace(s, interleave=False)
    at0 = run_scenario(off.with_classical([36], 0.0)).qber
    rows = sweep_launch_power(off, [float(p) for p in range(-20, 11)], [36])
    zero_at = next((r.power_dbm for r in rows if r.skr_bpp == 0.0), None)
    base = run_scenario(replace(s, channels=replace(s.channels, classical=()))).qber
    on10 = run_scenario(s.with_classical([36], 10.0)).qber
    checks = [
        (at0 >= 0.10 - 1e-9, f"OFF QBER at 0 dBm {at0:.4%} >= 10% (1e-9 float tolerance)"),
        (zero_at is not None and zero_at <= 10, f"OFF SKR first 0 at {zero_at} dBm"),
        ((on10 - base) * 100 < 0.2, f"ON QBER at 10 dBm exceeds baseline by {(on10 - base) * 100:.4f}pp"),
    ]
    _finish(7, "interleaving on/off curves", checks, t0, 5.0)


def test_c8_eight_channel_plan(cal):
    t0 = time.perf_counter()
    s8 = cal.apply(Scenario.load("100km_8ch"))
    s6 = cal.apply(Scenario.load("100km_6ch"))
    rep = plan(s8.channels, s8.fiber, s8.frame)
    q8 = run_scenario(s8).qber
    q6 = run_scenario(s6).qber
    checks = [
        (rep.feasible, f"all {len(rep.channels)} channels feasible"),
        (abs(rep.total_launch_dbm - 18.0) <= 0.1, f"total launch {rep.total_launch_dbm:.3f} dBm"),
        (q8 < 0.10, f"8-ch QBER {q8:.2%} < 10%"),
        (q6 < 0.07, f"6-ch QBER {q6:.2%} < 7%"),
    ]
    _finish(8, "eight-channel plan at 100 km", checks, t0, 10.0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
