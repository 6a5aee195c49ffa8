"""
Channel grid and dispersion walk-off
====================================

Where the classical channels sit relative to the quantum channel (Ch39), and
how far their Raman noise smears in time after 20, 50 and 100 km.
"""
from qli.fiber import FiberSpec, walk_off_delay
from qli.timing import FramePlan, min_gap_width
from qli.units import channel_wavelength, itu_channel_frequency

QUANTUM = 39
plan = FramePlan()
lam_q = channel_wavelength(QUANTUM)
print(f"quantum Ch{QUANTUM}: {itu_channel_frequency(QUANTUM):.1f} THz, {lam_q:.2f} nm")

# the gate stays clean while walk-off < (gap - gate) / 2
margin = (plan.gap_width_ns - plan.gate_width_ns) / 2
print(f"gap {plan.gap_width_ns} ns, gate {plan.gate_width_ns} ns -> walk-off margin {margin} ns\n")

print(" ch   nm        20 km    50 km   100 km  (walk-off, ns; * = gate leaks)")
for ch in (21, 28, 33, 35, 36, 38, 40, 42, 44, 50, 62):
    lam = channel_wavelength(ch)
    cells = []
    for length in (20, 50, 100):
        w = walk_off_delay(FiberSpec(length), lam, lam_q) * 1e-3
        cells.append(f"{w:7.2f}{'*' if w > margin else ' '}")
    print(f"{ch:3d}  {lam:8.2f}  " + " ".join(cells))

# gap needed to keep Ch21 clean over 100 km, with a 0.5 ns guard each side
w21 = walk_off_delay(FiberSpec(100), channel_wavelength(21), lam_q) * 1e-3
print(f"\nCh21 @ 100 km needs a {min_gap_width(w21, 4.0, 0.5):.1f} ns gap (period is 40 ns)")
