"""End-to-end scenarios: configuration files, runs, sweeps and calibration.

A scenario file is flat TOML with dotted keys, e.g.::

    fiber.length_km = 20
    channels.classical = [36]
    channels.power_dbm = 10.0

See the README for the full key list.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .channel import (
    DecoyConfig,
    DetectorSpec,
    SystemSpec,
    TallyCounts,
    default_workers,
    effective_background,
    expected_gains,
    sift,
    simulate_pulses,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DomainError,
    InvalidChannelError,
    InvalidPlanError,
    ModelBreakdownError,
)
from .fiber import NOISE_PROB_WARN, FiberSpec, PathBudget, RamanTable, gate_noise_counts, raman_noise_power
from .keyrate import F_EC, KeyRateInput, KeyRateOutput, OptimizationResult, optimize_intensities, skr
from .timing import FramePlan, PlanReport, validate_plan
from .units import ChannelPlan, ClassicalChannel, db_to_linear

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SWEEP_COLUMNS = ("channel", "power_dbm", "qber", "skr_bpp", "skr_bps", "window_fraction")
SWEEP_SCHEMA_VERSION = 1
RESULT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    channels: ChannelPlan = ChannelPlan()
    frame: FramePlan = FramePlan()
    budget: PathBudget = PathBudget(FiberSpec(20.0))
    decoy: DecoyConfig = DecoyConfig()
    detector: DetectorSpec = DetectorSpec()
    system: SystemSpec = SystemSpec()
    raman_table: str = "default"
    beta_scale: float = 1.0
    filter_bw_ghz: float = 20.0
    interleave: bool = True
    guard_ns: float = 0.0
    f_ec: float = F_EC
    mode: str = "analytic"
    n_pulses: int = 1_000_000
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("analytic", "mc"):
            raise ConfigError(f"mode must be 'analytic' or 'mc', got {self.mode!r}")
        if not math.isclose(self.system.rep_rate_mhz, self.frame.rep_rate_mhz, rel_tol=1e-9):
            raise ConfigError("system.rep_rate_mhz must equal 1000 / frame.period_ns")
        if not math.isclose(self.detector.gate_width_ns, self.frame.gate_width_ns):
            raise ConfigError("detector gate and frame gate widths differ")
        if self.beta_scale < 0 or self.filter_bw_ghz < 0 or self.guard_ns < 0:
            raise ConfigError("beta_scale, filter bandwidth and guard must be non-negative")
        if self.n_pulses < 1:
            raise ConfigError("n_pulses must be positive")
        self.frame.check()

    @property
    def fiber(self) -> FiberSpec:
        return self.budget.fiber

    def load_raman(self) -> RamanTable:
        table = RamanTable.default() if self.raman_table == "default" else RamanTable.from_file(
            self.raman_table
        )
        return table.scaled(self.beta_scale)

    def with_fiber(self, **kw) -> "Scenario":
        return replace(self, budget=replace(self.budget, fiber=replace(self.fiber, **kw)))

    def with_classical(self, channels, power_dbm) -> "Scenario":
        plan = ChannelPlan.uniform(channels, power_dbm, self.channels.quantum_channel)
        return replace(self, channels=plan)

    # -- config I/O ----------------------------------------------------------

    def to_flat(self) -> dict:
        """Flat dotted-key mapping in file order; inverse of :meth:`from_flat`."""
        d = {"name": self.name, "mode": self.mode, "seed": self.seed, "n_pulses": self.n_pulses}
        d.update(_group("fiber", self.fiber))
        d["path.quantum_insertion_loss_db"] = self.budget.quantum_insertion_loss_db
        d["channels.quantum"] = self.channels.quantum_channel
        d["channels.classical"] = [c.index for c in self.channels.classical]
        d["channels.power_dbm"] = [c.power_dbm for c in self.channels.classical]
        d.update(_group("frame", self.frame))
        d["frame.interleave"] = self.interleave
        d["frame.guard_ns"] = self.guard_ns
        d["raman.table"] = self.raman_table
        d["raman.beta_scale"] = self.beta_scale
        d["raman.filter_bw_ghz"] = self.filter_bw_ghz
        d.update(_group("decoy", self.decoy))
        d.update(_group("detector", self.detector))
        d.update(_group("system", self.system))
        d["keyrate.f_ec"] = self.f_ec
        return d

    def to_toml(self) -> str:
        lines = [f"{k} = {_toml_value(v)}" for k, v in self.to_flat().items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_flat(cls, flat: dict) -> "Scenario":
        flat = dict(flat)
        unknown = set(flat) - _KNOWN_KEYS
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        try:
            groups = {p: {} for p in ("fiber", "frame", "decoy", "detector", "system")}
            for key in list(flat):
                prefix, _, attr = key.partition(".")
                if prefix in groups and attr in _FIELDS[prefix]:
                    groups[prefix][attr] = flat.pop(key)
            frame = FramePlan(**groups["frame"])
            groups["system"].setdefault("rep_rate_mhz", frame.rep_rate_mhz)
            groups["detector"].setdefault("gate_width_ns", frame.gate_width_ns)
            if "length_km" not in groups["fiber"]:
                raise ConfigError("fiber.length_km is required")
            classical = flat.pop("channels.classical", [])
            powers = flat.pop("channels.power_dbm", [])
            if not isinstance(classical, list):
                classical = [classical]
            if not isinstance(powers, list):
                powers = [powers] * len(classical)
            if len(powers) != len(classical):
                raise ConfigError("channels.power_dbm must match channels.classical in length")
            plan = ChannelPlan(
                flat.pop("channels.quantum", 39),
                tuple(ClassicalChannel(int(c), float(p)) for c, p in zip(classical, powers)),
            )
            budget = PathBudget(
                FiberSpec(**groups["fiber"]), flat.pop("path.quantum_insertion_loss_db", 0.0)
            )
            return cls(
                name=str(flat.pop("name", "scenario")),
                channels=plan,
                frame=frame,
                budget=budget,
                decoy=DecoyConfig(**groups["decoy"]),
                detector=DetectorSpec(**groups["detector"]),
                system=SystemSpec(**groups["system"]),
                raman_table=str(flat.pop("raman.table", "default")),
                beta_scale=float(flat.pop("raman.beta_scale", 1.0)),
                filter_bw_ghz=float(flat.pop("raman.filter_bw_ghz", 20.0)),
                interleave=bool(flat.pop("frame.interleave", True)),
                guard_ns=float(flat.pop("frame.guard_ns", 0.0)),
                f_ec=float(flat.pop("keyrate.f_ec", F_EC)),
                mode=str(flat.pop("mode", "analytic")),
                n_pulses=int(flat.pop("n_pulses", 1_000_000)),
                seed=int(flat.pop("seed", 0)),
            )
        except ConfigError:
            raise
        except (TypeError, DomainError, InvalidPlanError, InvalidChannelError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_toml(cls, text: str) -> "Scenario":
        try:
            nested = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse scenario file: {exc}") from exc
        return cls.from_flat(_flatten(nested))

    @classmethod
    def load(cls, path) -> "Scenario":
        """Load a scenario file, or a packaged scenario by name (e.g. ``"20km"``)."""
        p = Path(path)
        if p.is_file():
            return cls.from_toml(p.read_text(encoding="utf-8"))
        if str(path) in packaged_scenarios():
            return cls.from_toml(_packaged_text(str(path)))
        raise ConfigError(f"no scenario file or packaged scenario named {str(path)!r}")


_FIELDS = {
    "fiber": {f.name for f in fields(FiberSpec)},
    "frame": {f.name for f in fields(FramePlan)},
    "decoy": {f.name for f in fields(DecoyConfig)},
    "detector": {f.name for f in fields(DetectorSpec)} - {"gate_width_ns"},
    "system": {f.name for f in fields(SystemSpec)},
}
_KNOWN_KEYS = {f"{p}.{n}" for p, names in _FIELDS.items() for n in names} | {
    "name",
    "mode",
    "seed",
    "n_pulses",
    "channels.quantum",
    "channels.classical",
    "channels.power_dbm",
    "path.quantum_insertion_loss_db",
    "raman.table",
    "raman.beta_scale",
    "raman.filter_bw_ghz",
    "frame.interleave",
    "frame.guard_ns",
    "keyrate.f_ec",
}


def _group(prefix, obj) -> dict:
    out = {}
    for f in fields(obj):
        val = getattr(obj, f.name)
        if f.name in _FIELDS[prefix] and val is not None:
            out[f"{prefix}.{f.name}"] = val
    return out


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialise {v!r}")


def packaged_scenarios() -> list[str]:
    root = resources.files("qli") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def _packaged_text(name: str) -> str:
    return (resources.files("qli") / "scenarios" / f"{name}.toml").read_text(encoding="utf-8")


# -- running ------------------------------------------------------------------


@dataclass
class ScenarioResult:
    name: str
    mode: str
    seed: int
    n_pulses: int
    length_km: float
    interleave: bool
    eta_channel: float
    channels: list[dict]
    p_raman_gate: float
    y_b: float
    live_fraction: float
    gains: list[float]
    qbers: list[float]
    keyrate: KeyRateOutput | None
    feasible: bool
    flags: list[str] = field(default_factory=list)
    tally: TallyCounts | None = None

    @property
    def qber(self) -> float:
        return self.qbers[0]

    @property
    def r_per_pulse(self) -> float:
        return self.keyrate.r_per_pulse if self.keyrate else 0.0

    @property
    def r_bps(self) -> float:
        return self.keyrate.r_bps if self.keyrate else 0.0

    def to_dict(self) -> dict:
        return {
            "schema": RESULT_SCHEMA_VERSION,
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "n_pulses": self.n_pulses,
            "length_km": self.length_km,
            "interleave": self.interleave,
            "eta_channel": self.eta_channel,
            "channels": self.channels,
            "p_raman_gate": self.p_raman_gate,
            "y_b": self.y_b,
            "live_fraction": self.live_fraction,
            "gains": self.gains,
            "qbers": self.qbers,
            "keyrate": self.keyrate.to_dict() if self.keyrate else None,
            "feasible": self.feasible,
            "flags": self.flags,
            "tally": self.tally.to_dict() if self.tally else None,
            "versions": {"qli": __version__, "numpy": np.__version__},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=True) + "\n"


def _noise_per_channel(s: Scenario, report: PlanReport, table: RamanTable):
    lam_q = s.channels.quantum_wavelength_nm
    nu_q = s.channels.quantum_frequency_thz
    to_detector = db_to_linear(s.budget.quantum_insertion_loss_db)
    by_ch = report.by_channel()
    rows = []
    for ch in s.channels.classical:
        rep = by_ch[ch.index]
        offset = (nu_q - ch.frequency_thz) * 1e3
        beta = table.lookup(offset)
        exposure = rep.gate_exposure if s.interleave else 1.0
        p_out = raman_noise_power(ch.power_mw, s.fiber, beta, s.filter_bw_ghz)
        prob = gate_noise_counts(
            p_out * to_detector, lam_q, s.frame.gate_width_ns, s.detector.eta_d, exposure
        )
        rows.append(
            {
                "channel": ch.index,
                "power_dbm": ch.power_dbm,
                "offset_ghz": offset,
                "beta": beta,
                "walk_off_ns": rep.walk_off_ns,
                "required_gap_ns": rep.required_gap_ns,
                "in_window_fraction": rep.in_window_fraction,
                "gate_exposure": exposure,
                "feasible": rep.feasible,
                "noise_prob": prob,
            }
        )
    return rows


def run_scenario(s: Scenario, workers: int | None = None) -> ScenarioResult:
    """Fiber noise -> gate geometry -> channel model -> key rate.

    Infeasible channel plans still run; the result carries the flags.
    """
    flags: list[str] = []
    report = validate_plan(s.frame, s.channels, s.fiber, s.guard_ns)
    if s.interleave and not report.feasible:
        flags.append("plan_infeasible")
    eta_ch = s.budget.eta_channel
    base = dict(
        name=s.name,
        mode=s.mode,
        seed=s.seed,
        n_pulses=s.n_pulses,
        length_km=s.fiber.length_km,
        interleave=s.interleave,
        eta_channel=eta_ch,
        feasible=report.feasible or not s.channels.classical,
    )
    try:
        rows = _noise_per_channel(s, report, s.load_raman())
        p_noise = math.fsum(r["noise_prob"] for r in rows)
        y_b = effective_background(s.detector, p_noise)
    except (ModelBreakdownError, DomainError) as exc:
        flags.append(f"model_breakdown: {exc}")
        return ScenarioResult(
            channels=[], p_raman_gate=math.nan, y_b=math.nan, live_fraction=math.nan,
            gains=[math.nan] * 3, qbers=[0.5] * 3, keyrate=None, flags=flags, **base,
        )
    if p_noise > NOISE_PROB_WARN:
        flags.append(f"nonlinear_noise: {p_noise:.3g} noise counts per gate")

    tally = None
    if s.mode == "analytic":
        gains, qbers, live = expected_gains(s.decoy, s.system, s.detector, eta_ch, p_noise)
        gains, qbers = [float(g) for g in gains], [float(e) for e in qbers]
    else:
        tally = simulate_pulses(
            s.n_pulses, s.seed, s.decoy, s.system, s.detector, eta_ch, p_noise, workers=workers
        )
        est = sift(tally, s.system, warn=False)
        gains = [e.gain for e in est]
        qbers = [0.5 if e.undefined_qber else e.qber for e in est]
        live = math.nan

    keyrate = None
    if all(g > 0 for g in gains):
        keyrate = skr(
            KeyRateInput(
                tuple(gains), tuple(min(e, 0.5) for e in qbers), s.decoy, s.f_ec,
                s.system.q, s.system.rep_rate_mhz, s.system.e0,
            )
        )
        flags.extend(keyrate.flags)
    else:
        flags.append("insufficient_statistics")
    return ScenarioResult(
        channels=rows, p_raman_gate=p_noise, y_b=y_b, live_fraction=float(live),
        gains=gains, qbers=qbers, keyrate=keyrate, flags=flags, tally=tally, **base,
    )


def plan(channel_plan: ChannelPlan, fiber: FiberSpec, frame_plan: FramePlan, guard_ns: float = 0.0):
    return validate_plan(frame_plan, channel_plan, fiber, guard_ns)


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    channel: int
    power_dbm: float
    qber: float
    skr_bpp: float
    skr_bps: float
    window_fraction: float


def default_powers() -> list[float]:
    return [float(p) for p in range(-20, 11)]


def sweep_launch_power(
    s: Scenario, powers, channels=None, workers: int | None = None
) -> list[SweepRow]:
    """QBER and key rate against launch power, one classical channel at a time.

    Rows come back in (channel, power) input order whatever the thread count.
    """
    channels = list(channels) if channels is not None else [c.index for c in s.channels.classical]
    points = [(c, float(p)) for c in channels for p in powers]

    def one(point):
        ch, p = point
        res = run_scenario(s.with_classical([ch], p), workers=1)
        frac = res.channels[0]["gate_exposure"] if res.channels else math.nan
        return SweepRow(ch, p, res.qber, res.r_per_pulse, res.r_bps, frac)

    workers = workers or default_workers()
    if workers == 1 or len(points) < 2:
        return [one(pt) for pt in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, points))


def sweep_csv(rows, out=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(
            [r.channel, repr(r.power_dbm), repr(r.qber), repr(r.skr_bpp), repr(r.skr_bps),
             repr(r.window_fraction)]
        )
    text = buf.getvalue()
    if out is not None:
        out.write(text)
    return text


# -- calibration --------------------------------------------------------------


@dataclass(frozen=True)
class SkrAnchor:
    """Key rate (bits/pulse) observed with no classical traffic."""

    length_km: float
    r_per_pulse: float


@dataclass(frozen=True)
class QberAnchor:
    """Signal QBER observed with one classical channel at a given power."""

    length_km: float
    channel: int
    power_dbm: float
    qber: float
    interleave: bool = False


DEFAULT_SKR_ANCHOR = SkrAnchor(20.0, 1.58e-3)
DEFAULT_QBER_ANCHOR = QberAnchor(20.0, 36, 0.0, 0.10, interleave=False)


@dataclass(frozen=True)
class CalibrationResult:
    insertion_loss_db: float
    beta_scale: float
    residuals: dict

    def apply(self, s: Scenario) -> Scenario:
        return replace(
            s,
            budget=replace(s.budget, quantum_insertion_loss_db=self.insertion_loss_db),
            beta_scale=self.beta_scale,
        )


def _analytic(s: Scenario) -> ScenarioResult:
    return run_scenario(replace(s, mode="analytic"))


def _fit_insertion_loss(base: Scenario, anchor: SkrAnchor, max_db: float = 60.0) -> float:
    s0 = replace(base.with_fiber(length_km=anchor.length_km), channels=ChannelPlan(
        base.channels.quantum_channel))

    def resid(il):
        r = _analytic(replace(s0, budget=replace(s0.budget, quantum_insertion_loss_db=il)))
        return math.log(max(r.r_per_pulse, 1e-300) / anchor.r_per_pulse)

    lo, hi = resid(0.0), resid(max_db)
    if not (lo >= 0 >= hi):
        raise CalibrationError(
            f"key-rate anchor {anchor.r_per_pulse:g} not reachable for insertion loss in "
            f"[0, {max_db}] dB"
        )
    return brentq(resid, 0.0, max_db, xtol=1e-9, rtol=1e-12)


def _fit_beta_scale(base: Scenario, anchor: QberAnchor) -> float:
    s0 = replace(
        base.with_fiber(length_km=anchor.length_km).with_classical([anchor.channel], anchor.power_dbm),
        interleave=anchor.interleave,
    )

    def qber(log_scale):
        r = _analytic(replace(s0, beta_scale=10.0**log_scale))
        return r.qber if math.isfinite(r.y_b) else 0.5

    floor = _analytic(replace(s0, beta_scale=0.0)).qber
    if not floor < anchor.qber < 0.5:
        raise CalibrationError(
            f"QBER anchor {anchor.qber:g} outside the reachable range ({floor:.4g}, 0.5)"
        )
    lo, hi = -12.0, 12.0
    if qber(lo) >= anchor.qber or qber(hi) <= anchor.qber:
        raise CalibrationError("QBER anchor is not bracketed by the beta-scale search range")
    return 10.0 ** brentq(lambda x: qber(x) - anchor.qber, lo, hi, xtol=1e-12, rtol=1e-12)


def calibrate(
    base: Scenario,
    skr_anchor: SkrAnchor | None = DEFAULT_SKR_ANCHOR,
    qber_anchor: QberAnchor | None = DEFAULT_QBER_ANCHOR,
) -> CalibrationResult:
    """Fit the quantum-path insertion loss and the Raman scale factor.

    The insertion loss is fixed first from a no-traffic key rate; the Raman
    scale then follows from a QBER observation at that loss. Missing anchors
    leave the corresponding parameter at its value in ``base``.
    """
    if skr_anchor is None and qber_anchor is None:
        raise CalibrationError("need at least one anchor")
    il = base.budget.quantum_insertion_loss_db
    if skr_anchor is not None:
        il = _fit_insertion_loss(base, skr_anchor)
    s = replace(base, budget=replace(base.budget, quantum_insertion_loss_db=il))
    scale = base.beta_scale
    if qber_anchor is not None:
        scale = _fit_beta_scale(s, qber_anchor)
    fitted = replace(s, beta_scale=scale)
    residuals = {}
    if skr_anchor is not None:
        r = _analytic(replace(fitted.with_fiber(length_km=skr_anchor.length_km),
                              channels=ChannelPlan(base.channels.quantum_channel)))
        residuals["skr_relative"] = r.r_per_pulse / skr_anchor.r_per_pulse - 1.0
    if qber_anchor is not None:
        r = _analytic(replace(
            fitted.with_fiber(length_km=qber_anchor.length_km).with_classical(
                [qber_anchor.channel], qber_anchor.power_dbm),
            interleave=qber_anchor.interleave,
        ))
        residuals["qber_absolute"] = r.qber - qber_anchor.qber
    return CalibrationResult(il, scale, residuals)


def optimize(s: Scenario, **kw) -> OptimizationResult:
    """Best decoy intensities for the scenario's channel and noise."""
    res = run_scenario(replace(s, mode="analytic"))
    if not math.isfinite(res.p_raman_gate):
        raise ModelBreakdownError("noise model broke down; cannot optimise")
    return optimize_intensities(
        res.eta_channel, res.p_raman_gate, s.system, s.detector, mu3=s.decoy.mu3, f_ec=s.f_ec, **kw
    )
