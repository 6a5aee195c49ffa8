"""Frame, gap and gate geometry for time-interleaving.

Time inside one frame period runs from 0 (start of the carved gap) to
``period``. Profiles are periodic and piecewise linear; a jump is stored as two
breakpoints at the same time.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, InvalidPlanError, ModelWarning
from .fiber import FiberSpec, walk_off_delay
from .units import ChannelPlan, mw_to_dbm

_FLOOR_TOL = 1e-12


@dataclass(frozen=True)
class FramePlan:
    period_ns: float = 40.0
    gap_width_ns: float = 15.0
    qkd_pulse_width_ps: float = 200.0
    gate_width_ns: float = 4.0
    gate_center_offset_ns: float = 0.0

    def __post_init__(self):
        if not self.period_ns > 0:
            raise InvalidPlanError("period must be positive")
        if not 0 <= self.gap_width_ns <= self.period_ns:
            raise InvalidPlanError("gap width must lie in [0, period]")

    def check(self) -> "FramePlan":
        """Raise :class:`InvalidPlanError` unless the plan can host a gated QKD pulse."""
        if not 0 < self.gap_width_ns < self.period_ns:
            raise InvalidPlanError(
                f"need 0 < gap ({self.gap_width_ns} ns) < period ({self.period_ns} ns)"
            )
        if not 0 < self.gate_width_ns <= self.gap_width_ns:
            raise InvalidPlanError("gate must be positive and no wider than the gap")
        if not 0 < self.qkd_pulse_width_ps * 1e-3 <= self.gate_width_ns:
            raise InvalidPlanError("QKD pulse must be positive and fit inside the gate")
        return self

    @property
    def rep_rate_mhz(self) -> float:
        return 1e3 / self.period_ns

    @property
    def duty(self) -> float:
        return 1.0 - self.gap_width_ns / self.period_ns

    @property
    def gate_center_ns(self) -> float:
        return 0.5 * self.gap_width_ns + self.gate_center_offset_ns

    @property
    def gate_window(self) -> tuple[float, float]:
        c = self.gate_center_ns
        return c - 0.5 * self.gate_width_ns, c + 0.5 * self.gate_width_ns


@dataclass(frozen=True, eq=False)
class NoiseProfile:
    """Periodic piecewise-linear intensity on [0, period]."""

    period_ns: float
    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.size < 2:
            raise DomainError("profile needs matching times/values with >= 2 points")
        if t[0] != 0 or not math.isclose(t[-1], self.period_ns) or np.any(np.diff(t) < 0):
            raise DomainError("profile times must be non-decreasing from 0 to the period")
        if np.any(v < -1e-12):
            raise DomainError("profile intensity must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", np.maximum(v, 0.0))
        seg = 0.5 * (v[1:] + v[:-1]) * np.diff(t)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(seg)]))

    @property
    def mass(self) -> float:
        """Integral over one period."""
        return float(self._cum[-1])

    def mean(self) -> float:
        return self.mass / self.period_ns

    def _cumulative_in_period(self, t: float) -> float:
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        if k >= self.times.size - 1:
            return self.mass
        x0, x1 = self.times[k], self.times[k + 1]
        y0, y1 = self.values[k], self.values[k + 1]
        yt = y0 + (y1 - y0) * (t - x0) / (x1 - x0)
        return float(self._cum[k] + 0.5 * (y0 + yt) * (t - x0))

    def cumulative(self, t: float) -> float:
        """Integral of the periodic extension from 0 to ``t`` (any real t)."""
        n, r = divmod(t, self.period_ns)
        return n * self.mass + self._cumulative_in_period(r)

    def integrate(self, a: float, b: float) -> float:
        return self.cumulative(b) - self.cumulative(a)

    def value_at(self, t: float) -> float:
        """Right-continuous value of the periodic profile."""
        r = t % self.period_ns
        k = int(np.searchsorted(self.times, r, side="right")) - 1
        k = min(k, self.times.size - 2)
        x0, x1 = self.times[k], self.times[k + 1]
        y0, y1 = self.values[k], self.values[k + 1]
        if x1 == x0:
            return float(y1)
        return float(y0 + (y1 - y0) * (r - x0) / (x1 - x0))

    def is_piecewise_constant(self) -> bool:
        dt = np.diff(self.times)
        dv = np.diff(self.values)
        return bool(np.all((dt == 0) | (np.abs(dv) <= 1e-15)))

    def reversed(self) -> "NoiseProfile":
        """Time reversal t -> period - t."""
        return NoiseProfile(self.period_ns, self.period_ns - self.times[::-1], self.values[::-1])

    def sample(self, resolution_ns: float) -> tuple[np.ndarray, np.ndarray]:
        if not resolution_ns > 0:
            raise DomainError("resolution must be positive")
        n = int(round(self.period_ns / resolution_ns))
        t = np.arange(n) * resolution_ns
        return t, np.array([self.value_at(x) for x in t])

    def to_csv(self, resolution_ns: float = 0.1, out=None) -> str:
        """Two-column (time_ns, intensity) CSV; written to ``out`` if given."""
        t, v = self.sample(resolution_ns)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["time_ns", "intensity"])
        for a, b in zip(t, v):
            w.writerow([f"{a:.6g}", f"{b:.9g}"])
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


def carve_pattern(plan: FramePlan) -> NoiseProfile:
    """Rectangular classical pattern: 0 inside the gap, 1 elsewhere."""
    P, g = plan.period_ns, plan.gap_width_ns
    if g >= P:
        raise InvalidPlanError("gap must be narrower than the period")
    if g == 0:
        return NoiseProfile(P, np.array([0.0, P]), np.array([1.0, 1.0]))
    return NoiseProfile(P, np.array([0.0, g, g, P]), np.array([0.0, 0.0, 1.0, 1.0]))


def spread_profile(pattern: NoiseProfile, walk_off_ns: float, reflect: bool = False) -> NoiseProfile:
    """Average a step pattern over delays uniform on [0, walk_off].

    Every step edge turns into a linear ramp lasting ``walk_off``. With
    ``reflect`` the kernel covers [-walk_off, 0] instead.
    """
    if walk_off_ns < 0:
        raise DomainError("walk-off must be non-negative")
    if not pattern.is_piecewise_constant():
        raise DomainError("spreading is defined for step (rectangular) patterns only")
    P, w = pattern.period_ns, walk_off_ns
    if w <= _FLOOR_TOL * P:
        return pattern
    lo, hi = (-w, 0.0) if reflect else (0.0, w)
    base = np.unique(pattern.times)
    knots = np.unique(np.concatenate([base, (base + lo) % P, (base + hi) % P, [0.0, P]]))
    # drop float near-duplicates; the spread profile is continuous
    knots = knots[np.concatenate([[True], np.diff(knots) > 1e-12 * P])]
    knots[-1] = P
    vals = np.array([(pattern.cumulative(t - lo) - pattern.cumulative(t - hi)) / w for t in knots])
    return NoiseProfile(P, knots, vals)


def in_window_fraction(profile: NoiseProfile, plan: FramePlan) -> float:
    """Share of one period's noise mass that lands inside the detector gate."""
    if not math.isclose(profile.period_ns, plan.period_ns):
        raise DomainError("profile and plan periods differ")
    if profile.mass <= 0:
        return 0.0
    a, b = plan.gate_window
    return float(min(1.0, max(0.0, profile.integrate(a, b) / profile.mass)))


def gate_exposure(profile: NoiseProfile, plan: FramePlan) -> float:
    """Mean profile intensity during the gate (1 for continuous traffic)."""
    a, b = plan.gate_window
    return float(min(1.0, max(0.0, profile.integrate(a, b) / (b - a))))


def min_gap_width(
    walk_off_ns: float, gate_ns: float, guard_ns: float = 0.0, period_ns: float | None = None
) -> float:
    """Smallest gap keeping a centred gate (plus guard) on the noise-free floor."""
    if walk_off_ns < 0 or gate_ns < 0 or guard_ns < 0:
        raise DomainError("walk-off, gate and guard must be non-negative")
    need = gate_ns + 2.0 * guard_ns + 2.0 * walk_off_ns
    if period_ns is not None and need >= period_ns:
        warnings.warn(
            f"required gap {need:.3f} ns does not fit in a {period_ns} ns period",
            ModelWarning,
            stacklevel=2,
        )
    return need


@dataclass(frozen=True)
class ChannelReport:
    channel: int
    walk_off_ns: float
    required_gap_ns: float
    feasible: bool
    in_window_fraction: float
    gate_exposure: float


@dataclass(frozen=True)
class PlanReport:
    channels: tuple[ChannelReport, ...]
    total_launch_dbm: float

    @property
    def feasible(self) -> bool:
        return all(c.feasible for c in self.channels)

    def by_channel(self) -> dict[int, ChannelReport]:
        return {c.channel: c for c in self.channels}

    def to_dict(self) -> dict:
        return {
            "feasible": self.feasible,
            "total_launch_dbm": self.total_launch_dbm,
            "channels": [vars(c).copy() for c in self.channels],
        }


def validate_plan(
    plan: FramePlan, channel_plan: ChannelPlan, fiber: FiberSpec, guard_ns: float = 0.0
) -> PlanReport:
    """Per-channel walk-off, required gap and feasibility.

    A channel is feasible when its spread noise leaves the gate, widened by
    ``guard_ns`` on both sides, exactly on the zero floor.
    """
    plan.check()
    pattern = carve_pattern(plan)
    lam_q = channel_plan.quantum_wavelength_nm
    a, b = plan.gate_window
    reports = []
    for ch in channel_plan.classical:
        w = walk_off_delay(fiber, ch.wavelength_nm, lam_q) * 1e-3
        prof = spread_profile(pattern, w)
        leak = prof.integrate(a - guard_ns, b + guard_ns)
        reports.append(
            ChannelReport(
                channel=ch.index,
                walk_off_ns=w,
                required_gap_ns=min_gap_width(w, plan.gate_width_ns, guard_ns),
                feasible=bool(leak <= _FLOOR_TOL * plan.period_ns),
                in_window_fraction=in_window_fraction(prof, plan),
                gate_exposure=gate_exposure(prof, plan),
            )
        )
    total = channel_plan.total_power_mw()
    total_dbm = mw_to_dbm(total) if total > 0 else -math.inf
    return PlanReport(tuple(reports), total_dbm)
