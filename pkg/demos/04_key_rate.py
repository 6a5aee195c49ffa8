"""
Decoy-state key rate
====================

Gains and QBERs from the closed-form channel model feed the vacuum + weak
decoy bounds. We trace the key rate against distance for the fixed intensity
set and for intensities re-optimised at each distance.
"""
from dataclasses import replace

from qli.channel import expected_gains
from qli.keyrate import KeyRateInput, optimize_intensities, skr
from qli.scenario import Scenario

s = Scenario.load("20km")
print(" km    Q_signal     E_signal   y1_L      e1_U     R (b/pulse)   R opt     mu1*   p1*")
for length in (0, 20, 40, 60, 80, 100, 120, 140):
    t = replace(s.with_fiber(length_km=max(length, 1e-9)), channels=replace(s.channels, classical=()))
    eta = t.budget.eta_channel
    q, e, _ = expected_gains(t.decoy, t.system, t.detector, eta)
    out = skr(KeyRateInput(tuple(q), tuple(e), t.decoy))
    best = optimize_intensities(eta, system=t.system, detector=t.detector, points=11)
    print(f"{length:3d}  {q[0]:.4e}  {e[0]:8.4%}  {out.y1_lower:.4f}  {out.e1_upper:.4f}  "
          f"{out.r_per_pulse:.3e}   {best.r_per_pulse:.3e}  {best.decoy.mu1:.3f}  {best.decoy.p1:.2f}")
