"""
Trapezoidal noise inside the frame
==================================

The classical frame is a 0/1 pattern with a 15 ns hole. Raman photons born
along the fiber arrive spread over [0, walk-off], so each edge turns into a
ramp. We look at how much of that ramp reaches the 4 ns gate.
"""
import sys
from pathlib import Path

from qli.timing import FramePlan, carve_pattern, gate_exposure, in_window_fraction, spread_profile

plan = FramePlan()
pattern = carve_pattern(plan)
print(f"duty {pattern.mean():.3f}, gate window {plan.gate_window} ns")

for label, w in [("Ch36 @ 20 km", 0.816), ("Ch36 @ 100 km", 4.07), ("Ch33 @ 100 km", 8.2),
                 ("Ch28 @ 100 km", 15.0), ("Ch21 @ 100 km", 24.6)]:
    prof = spread_profile(pattern, w)
    print(f"{label:14s} walk-off {w:5.2f} ns  "
          f"in-window share {in_window_fraction(prof, plan):.4f}  "
          f"gate exposure {gate_exposure(prof, plan):.4f}")

# 100 ps sampled profiles, ready for any plotting tool
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("profiles")
out.mkdir(exist_ok=True)
for name, w in [("ch36_20km", 0.816), ("ch28_100km", 15.0)]:
    with open(out / f"{name}.csv", "w") as fh:
        spread_profile(pattern, w).to_csv(0.1, fh)
print(f"wrote {out}/ch36_20km.csv and {out}/ch28_100km.csv")
