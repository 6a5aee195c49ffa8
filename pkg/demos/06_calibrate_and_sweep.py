"""
Calibration and the launch-power sweep
======================================

Two scalars are not pinned by physics here: the lumped insertion loss of
the quantum path and the absolute Raman strength. The first is fitted to a
no-traffic key rate, the second to a QBER observed with interleaving off.
Everything else then follows.
"""
from dataclasses import replace

from qli.scenario import DEFAULT_QBER_ANCHOR, DEFAULT_SKR_ANCHOR, Scenario, calibrate, run_scenario
from qli.scenario import sweep_csv, sweep_launch_power

cal = calibrate(Scenario())
print(f"anchors: {DEFAULT_SKR_ANCHOR}, {DEFAULT_QBER_ANCHOR}")
print(f"insertion loss {cal.insertion_loss_db:.3f} dB, Raman scale {cal.beta_scale:.4f}, "
      f"residuals {cal.residuals}\n")

for name in ("20km", "50km", "100km", "100km_6ch", "100km_8ch"):
    s = cal.apply(Scenario.load(name))
    on, off = run_scenario(s), run_scenario(replace(s, interleave=False))
    print(f"{name:10s} ON: QBER {on.qber:6.2%} SKR {on.r_bps:9.1f} b/s   "
          f"OFF: QBER {off.qber:6.2%} SKR {off.r_bps:9.1f} b/s")

s = cal.apply(Scenario.load("20km"))
rows = sweep_launch_power(replace(s, interleave=False), range(-20, 11, 2), [36])
print("\ninterleaving off, Ch36, 20 km")
print(sweep_csv(rows), end="")
