import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import H, C, wavelength_nm
from qli.errors import DomainError, ModelBreakdownError, ModelWarning
from qli.fiber import (
    FiberSpec,
    PathBudget,
    RamanTable,
    noise_prob_per_gate,
    raman_lookup,
    raman_noise_power,
    transmittance,
    walk_off_delay,
)
from qli.units import channel_wavelength


@pytest.mark.parametrize("args, expect", [((0.2, 0, 0), 1.0), ((0.2, 20, 0), 0.398), ((0.2, 100, 0), 0.01)])
def test_transmittance(args, expect):
    assert transmittance(*args) == pytest.approx(expect, rel=2e-3)


@pytest.mark.parametrize("args", [(-0.1, 1, 0), (0.2, -1, 0), (0.2, 1, -1)])
def test_transmittance_rejects_negative(args):
    with pytest.raises(DomainError):
        transmittance(*args)


def test_path_budget_includes_insertion_loss():
    b = PathBudget(FiberSpec(20.0), 3.0)
    assert b.eta_channel == pytest.approx(10 ** -0.7)


def test_walk_off_examples():
    lq = channel_wavelength(39)
    assert walk_off_delay(FiberSpec(100.0), lq, lq) == 0.0
    assert walk_off_delay(FiberSpec(100.0), channel_wavelength(28), lq) == pytest.approx(15000, rel=2e-3)
    assert walk_off_delay(FiberSpec(20.0), channel_wavelength(36), lq) == pytest.approx(816, rel=2e-3)


@given(st.floats(0.1, 200), st.floats(0.0, 20), st.floats(1.0, 5.0))
def test_walk_off_linear(length, dl, k):
    f1, f2 = FiberSpec(length), FiberSpec(length * k)
    base = walk_off_delay(f1, 1550 + dl, 1550)
    assert walk_off_delay(f2, 1550 + dl, 1550) == pytest.approx(k * base, rel=1e-9, abs=1e-9)
    assert walk_off_delay(f1, 1550 - dl, 1550) == pytest.approx(base, rel=1e-9, abs=1e-9)


def test_lookup_nodes_and_midpoints():
    t = RamanTable([-100, 0, 100, 200], [1.0, 2.0, 4.0, 0.0])
    assert raman_lookup(t, 100) == 4.0
    assert raman_lookup(t, 50) == pytest.approx(3.0)
    assert raman_lookup(t, 150) == pytest.approx(2.0)
    with pytest.raises(DomainError):
        raman_lookup(t, 201)
    with pytest.raises(DomainError):
        raman_lookup(t, -100.5)


@pytest.mark.parametrize("offsets, betas", [([0, 0], [1, 1]), ([1, 0], [1, 1]), ([0, 1], [1, -1]), ([0], [1])])
def test_table_validation(offsets, betas):
    with pytest.raises(DomainError):
        RamanTable(offsets, betas)


def test_table_file_with_comments(tmp_path):
    p = tmp_path / "t.txt"
    p.write_text("# offset beta\n-10 1e-9\n0 2e-9  # centre\n10 3e-9\n")
    t = RamanTable.from_file(p)
    assert len(t) == 3 and t.lookup(5) == pytest.approx(2.5e-9)


def test_default_table_shape():
    t = RamanTable.default()
    assert len(t) == 41
    assert t.lookup(-300) < t.lookup(1000)
    assert t.integrated("anti-stokes") < t.integrated("stokes")
    # local minima a few hundred GHz either side of the pump
    for side in (-1, 1):
        offs = side * np.array([100, 200, 300, 400, 600, 1000])
        vals = [t.lookup(o) for o in offs]
        k = int(np.argmin(vals))
        assert 200 <= abs(offs[k]) <= 300
        assert vals[0] > vals[k] < vals[-1]
    # Stokes side stronger at every mirrored offset beyond the dip
    for x in (500, 1000, 2000, 4000):
        assert t.lookup(-x) > t.lookup(x)


def test_raman_noise_example():
    p = raman_noise_power(10.0, FiberSpec(100.0), 3e-9, 20.0)
    assert p == pytest.approx(10.0 * 0.01 * 3e-9 * 100 * 20, rel=1e-9)
    assert p == pytest.approx(6.0e-7, rel=1e-9)
    assert raman_noise_power(0.0, FiberSpec(100.0), 3e-9, 20.0) == 0.0
    assert raman_noise_power(10.0, FiberSpec(100.0), 3e-9, 40.0) == pytest.approx(2 * p)


@given(st.floats(0, 100), st.floats(1, 100))
def test_raman_noise_linear_in_power(p, k):
    f = FiberSpec(50.0)
    assert raman_noise_power(p * k, f, 1e-9, 20) == pytest.approx(k * raman_noise_power(p, f, 1e-9, 20))


def test_raman_noise_grows_with_length_below_peak():
    # P L exp(-alpha L) peaks at 1/alpha, about 21.7 km for 0.2 dB/km
    ps = [raman_noise_power(1.0, FiberSpec(L), 1e-9, 20) for L in (1, 5, 10, 20)]
    assert ps == sorted(ps)


def test_noise_probability_zero_cases():
    assert noise_prob_per_gate(0.0, 1546.12, 4, 0.2) == 0.0
    assert noise_prob_per_gate(1e-9, 1546.12, 4, 0.2, window_fraction=0.0) == 0.0


def test_noise_probability_arithmetic_and_warning():
    lam = wavelength_nm(193.9)
    expect = 6.0e-11 / (H * C / (lam * 1e-9)) * 4e-9 * 0.2
    with pytest.warns(ModelWarning):
        p = noise_prob_per_gate(6.0e-8, lam, 4.0, 0.2, 1.0)
    assert p == pytest.approx(expect, rel=1e-12)
    assert p == pytest.approx(0.37, abs=0.01)


def test_noise_probability_breakdown():
    with pytest.raises(ModelBreakdownError):
        noise_prob_per_gate(1e-6, 1546.12, 4.0, 0.2)
    with pytest.raises(DomainError):
        noise_prob_per_gate(1e-12, 1546.12, 4.0, 0.2, window_fraction=1.5)


def test_noise_probability_adds_over_channels():
    parts = [noise_prob_per_gate(p, 1546.12, 4, 0.2) for p in (1e-10, 2e-10, 3e-10)]
    total = noise_prob_per_gate(6e-10, 1546.12, 4, 0.2)
    assert math.fsum(parts) == pytest.approx(total, rel=1e-12)
