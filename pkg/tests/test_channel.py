import json
import math
from dataclasses import replace

import numpy as np
import pytest

from qli.channel import (
    DecoyConfig,
    DetectorSpec,
    SystemSpec,
    TallyCounts,
    dead_time_live_fraction,
    effective_background,
    expected_gains,
    gain_qber_analytic,
    sift,
    simulate_pulses,
)
from qli.errors import DomainError, ModelBreakdownError, ModelWarning

DET = DetectorSpec()
NO_DEAD = replace(DET, dead_time_us=0.0)
SYS = SystemSpec()


def test_effective_background():
    assert effective_background(DET, 0.0) == 6e-6
    assert effective_background(DET, 6e-6) == pytest.approx(1.2e-5)
    with pytest.raises(ModelBreakdownError):
        effective_background(DET, 0.999999)
    with pytest.raises(DomainError):
        effective_background(DET, -0.1)


def test_gain_qber_limits():
    assert gain_qber_analytic(0.0, 0.1, 1e-5, 0.01) == pytest.approx((1e-5, 0.5))
    q, e = gain_qber_analytic(0.5, 0.1, 0.0, 0.0)
    assert e == 0.0 and q == pytest.approx(1 - math.exp(-0.05))


def test_gain_qber_20km_example():
    q, e = gain_qber_analytic(0.85, 0.0796, 6e-6, 0.01)
    assert q == pytest.approx(0.0655, abs=1e-4)
    assert e == pytest.approx(0.0100, abs=5e-5)


def test_gain_qber_vectorised():
    q, e = gain_qber_analytic(np.array([0.85, 0.04, 0.001]), 0.05, 1e-4, 0.01)
    assert q.shape == (3,) and np.all(np.diff(e) > 0)


def test_qber_non_increasing_in_mu():
    mus = np.linspace(0.001, 1.0, 50)
    _, e = gain_qber_analytic(mus, 0.02, 1e-4, 0.01)
    assert np.all(np.diff(e) <= 0)


def test_decoy_validation():
    with pytest.raises(DomainError):
        DecoyConfig(mu1=0.04, mu2=0.85)
    with pytest.raises(DomainError):
        DecoyConfig(p1=0.9, p2=0.1, p3=0.1)
    with pytest.raises(DomainError):
        DetectorSpec(detector_count=2)


def test_dead_slots():
    assert DET.dead_slots(25.0) == 250
    assert NO_DEAD.dead_slots(25.0) == 0


def test_live_fraction_bounds():
    assert dead_time_live_fraction(DecoyConfig(), SYS, NO_DEAD, 0.1, 1e-5) == 1.0
    live = dead_time_live_fraction(DecoyConfig(), SYS, DET, 0.1, 1e-5)
    assert 0 < live < 1


def test_zero_channel_no_detections():
    t = simulate_pulses(20_000, 1, DecoyConfig(), SYS, replace(DET, y0_dark=0.0), 0.0)
    assert t.sifted_detections.sum() == 0 and t.raw_clicks == 0


def test_noiseless_small_mu_no_errors():
    t = simulate_pulses(
        200_000, 2, DecoyConfig(0.02, 0.01, 0.0), replace(SYS, e_mis=0.0),
        replace(NO_DEAD, y0_dark=0.0), 0.5,
    )
    assert t.sifted_detections.sum() > 0
    assert t.double_clicks == 0 and t.sifted_errors.sum() == 0


def test_determinism_across_workers():
    args = (250_000, 7, DecoyConfig(), SYS, DET, 0.2, 1e-3)
    a = simulate_pulses(*args, workers=1)
    b = simulate_pulses(*args, workers=3)
    c = simulate_pulses(*args, block_size=100_000, workers=2)
    assert a == b == c
    assert simulate_pulses(*args[:1], 8, *args[2:]) != a


def test_dead_time_only_removes_clicks():
    args = (300_000, 3, DecoyConfig(), SYS)
    dead = simulate_pulses(*args, DET, 0.3, 1e-3)
    live = simulate_pulses(*args, NO_DEAD, 0.3, 1e-3)
    assert dead.raw_clicks <= live.raw_clicks
    assert np.all(dead.sifted_detections <= live.sifted_detections)
    assert dead.dead_time_losses > 0 and live.dead_time_losses == 0


def _within_3sigma(tally, decoy, system, detector, eta_ch, p_noise):
    q, e, _ = expected_gains(decoy, system, detector, eta_ch, p_noise)
    m = system.basis_match_prob
    for k in range(3):
        n = int(tally.pulses_sent[k])
        p_det = q[k] * m
        sd = math.sqrt(n * p_det * (1 - p_det))
        assert abs(tally.sifted_detections[k] - n * p_det) <= 3 * sd + 1
        p_err = q[k] * e[k] * m
        sd = math.sqrt(n * p_err * (1 - p_err))
        assert abs(tally.sifted_errors[k] - n * p_err) <= 3 * sd + 1


@pytest.mark.parametrize(
    "eta_ch, p_noise, e_mis",
    [(0.3, 0.0, 0.01), (0.05, 1e-3, 0.005), (0.6, 5e-4, 0.03), (0.01, 1e-4, 0.0)],
)
def test_mc_matches_analytic_without_dead_time(eta_ch, p_noise, e_mis):
    decoy = DecoyConfig(0.85, 0.3, 0.05, 0.4, 0.3, 0.3)
    system = replace(SYS, e_mis=e_mis)
    t = simulate_pulses(600_000, 11, decoy, system, NO_DEAD, eta_ch, p_noise)
    _within_3sigma(t, decoy, system, NO_DEAD, eta_ch, p_noise)


def test_mc_matches_analytic_with_dead_time():
    decoy = DecoyConfig()
    t = simulate_pulses(600_000, 12, decoy, SYS, DET, 0.19, 2e-3)
    _within_3sigma(t, decoy, SYS, DET, 0.19, 2e-3)


def test_biased_basis_match_probability():
    s = SystemSpec(basis_prob_x=0.94)
    assert s.basis_match_prob == pytest.approx(0.94**2 + 0.06**2)
    assert s.q == s.basis_match_prob
    assert SystemSpec(sifting_factor_q=0.5, basis_prob_x=0.94).q == 0.5
    t = simulate_pulses(300_000, 5, DecoyConfig(), s, NO_DEAD, 0.3)
    _within_3sigma(t, DecoyConfig(), s, NO_DEAD, 0.3, 0.0)


def test_sift_arithmetic():
    t = TallyCounts([10_000, 0, 5], [1000, 0, 5], [20, 0, 2])
    est = sift(t)
    assert est[0].qber == pytest.approx(0.02)
    assert est[0].gain == pytest.approx(0.2)
    assert est[0].qber_halfwidth > 0
    assert est[1].undefined_qber and math.isnan(est[1].qber)
    with pytest.warns(ModelWarning):
        est = sift(TallyCounts([100, 100, 100], [10, 10, 10], [10, 1, 1]))
    assert est[0].qber == 0.5


def test_tally_json_round_trip():
    t = simulate_pulses(100_000, 4, DecoyConfig(), SYS, DET, 0.2, 1e-3)
    d = json.loads(json.dumps(t.to_dict()))
    assert TallyCounts.from_dict(d) == t
    assert set(d) == {"pulses_sent", "sifted_detections", "sifted_errors", "raw_clicks",
                      "double_clicks", "dead_time_losses"}


def test_tally_invariants():
    with pytest.raises(DomainError):
        TallyCounts([10, 10, 10], [11, 0, 0], [0, 0, 0])
    with pytest.raises(DomainError):
        TallyCounts([10, 10, 10], [5, 0, 0], [6, 0, 0])
