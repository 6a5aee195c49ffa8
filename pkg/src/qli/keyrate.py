"""Asymptotic decoy-state key rate (vacuum + weak decoy) and intensity search."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from types import SimpleNamespace

import numpy as np

from .channel import DecoyConfig, DetectorSpec, SystemSpec, effective_background
from .channel import dead_time_live_fraction, gain_qber_analytic
from .errors import DomainError, UndefinedBoundError

F_EC = 1.2


def h2(x):
    """Binary Shannon entropy in bits; 0 at both endpoints."""
    arr = np.asarray(x, dtype=float)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise DomainError("binary entropy is defined on [0, 1]")
    inner = (arr > 0) & (arr < 1)
    safe = np.where(inner, arr, 0.5)
    val = np.where(inner, -safe * np.log2(safe) - (1 - safe) * np.log2(1 - safe), 0.0)
    return float(val) if val.ndim == 0 else val


def _y1_raw(q1, q2, mu1, mu2, y0):
    return (mu1 / (mu1 * mu2 - mu2 * mu2)) * (
        q2 * np.exp(mu2)
        - q1 * np.exp(mu1) * (mu2 / mu1) ** 2
        - ((mu1 * mu1 - mu2 * mu2) / (mu1 * mu1)) * y0
    )


def y1_lower(q_mu1, q_mu2, mu1, mu2, y0) -> float:
    """Lower bound on the single-photon yield, clipped to [0, 1].

    ``y0`` should be an upper estimate of the vacuum yield for the bound to
    stay safe.
    """
    if not mu1 > mu2 > 0:
        raise DomainError("need mu1 > mu2 > 0")
    return float(np.clip(_y1_raw(q_mu1, q_mu2, mu1, mu2, y0), 0.0, 1.0))


def q1_lower(y1_low, mu1) -> float:
    return float(y1_low * mu1 * math.exp(-mu1))


def _e1_raw(e2, q2, mu2, y0, y1, e0):
    return (e2 * q2 * np.exp(mu2) - e0 * y0) / (y1 * mu2)


def e1_upper(e_mu2, q_mu2, mu2, y0, y1_low, e0=0.5) -> float:
    """Upper bound on the single-photon error rate, clipped to [0, 0.5].

    ``y0`` should be a lower estimate of the vacuum yield.
    """
    if not y1_low > 0:
        raise UndefinedBoundError("single-photon yield bound is zero; e1 is unbounded")
    return float(np.clip(_e1_raw(e_mu2, q_mu2, mu2, y0, y1_low, e0), 0.0, 0.5))


def vacuum_yield_bounds(q_mu2, q_mu3, mu2, mu3):
    """(upper, lower) estimates of Y0 from the near-vacuum and weak classes.

    Q_mu3 e^mu3 >= Y0 always; the weak/near-vacuum pair gives the lower
    bound. Both collapse to Q_mu3 when mu3 = 0.
    """
    upper = q_mu3 * np.exp(mu3)
    lower = (mu2 * q_mu3 * np.exp(mu3) - mu3 * q_mu2 * np.exp(mu2)) / (mu2 - mu3)
    return upper, np.maximum(lower, 0.0)


@dataclass(frozen=True)
class KeyRateInput:
    gains: tuple[float, float, float]
    qbers: tuple[float, float, float]
    decoy: DecoyConfig = DecoyConfig()
    f_ec: float = F_EC
    q: float = 0.5
    rep_rate_mhz: float = 25.0
    e0: float = 0.5

    def __post_init__(self):
        if any(not 0 < g <= 1 for g in self.gains):
            raise DomainError("gains must lie in (0, 1]")
        if any(not 0 <= e <= 0.5 for e in self.qbers):
            raise DomainError("QBERs must lie in [0, 0.5]")
        if self.f_ec < 1:
            raise DomainError("error-correction efficiency must be >= 1")


@dataclass(frozen=True)
class KeyRateOutput:
    y1_lower: float
    q1_lower: float
    e1_upper: float
    r_per_pulse: float
    r_bps: float
    y0_upper: float
    y0_lower: float
    flags: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        return d


def _rate_arrays(q_sig, q_dec, q_vac, e_sig, e_dec, mu1, mu2, mu3, q, f_ec, e0):
    """Vectorised bounds and rate. Points with an empty yield bound or
    e1 >= 0.5 get rate 0."""
    y0u, y0l = vacuum_yield_bounds(q_dec, q_vac, mu2, mu3)
    y1_raw = _y1_raw(q_sig, q_dec, mu1, mu2, y0u)
    y1 = np.clip(y1_raw, 0.0, 1.0)
    ok = y1_raw > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        e1_raw = np.where(ok, _e1_raw(e_dec, q_dec, mu2, y0l, np.where(ok, y1, 1.0), e0), 0.5)
    e1u = np.clip(e1_raw, 0.0, 0.5)
    q1l = y1 * mu1 * np.exp(-mu1)
    r = q * (q1l * (1.0 - h2(e1u)) - q_sig * f_ec * h2(np.clip(e_sig, 0.0, 0.5)))
    r = np.where(ok & (e1_raw < 0.5), np.maximum(r, 0.0), 0.0)
    return {
        "y0_upper": y0u,
        "y0_lower": y0l,
        "y1_raw": y1_raw,
        "y1_lower": y1,
        "e1_raw": e1_raw,
        "e1_upper": e1u,
        "q1_lower": q1l,
        "r_per_pulse": r,
    }


def skr(inp: KeyRateInput) -> KeyRateOutput:
    """Secure key rate R >= q [Q1L (1 - H2(e1U)) - Q_mu1 f_EC H2(E_mu1)], clamped at 0."""
    d = inp.decoy
    (qa, qb, qc), (ea, eb, _) = inp.gains, inp.qbers
    out = _rate_arrays(qa, qb, qc, ea, eb, d.mu1, d.mu2, d.mu3, inp.q, inp.f_ec, inp.e0)
    flags = []
    if out["y1_raw"] <= 0:
        flags.append("y1_nonpositive")
    elif out["e1_raw"] >= 0.5:
        flags.append("e1_exceeds_half")
    elif out["e1_raw"] < 0:
        flags.append("e1_clipped_low")
    r = float(out["r_per_pulse"])
    return KeyRateOutput(
        y1_lower=float(out["y1_lower"]),
        q1_lower=float(out["q1_lower"]),
        e1_upper=float(out["e1_upper"]),
        r_per_pulse=r,
        r_bps=r * inp.rep_rate_mhz * 1e6,
        y0_upper=float(out["y0_upper"]),
        y0_lower=float(out["y0_lower"]),
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class OptimizationResult:
    decoy: DecoyConfig
    r_per_pulse: float
    objective: float
    resolution: tuple[float, float, float, float]
    evaluations: int


def _grid_rates(mu1, mu2, p1, p2, mu3, eta_ch, y_b, system, detector, f_ec):
    p3 = 1.0 - p1 - p2
    cfg = SimpleNamespace(mu1=mu1, mu2=mu2, mu3=mu3, p1=p1, p2=p2, p3=p3)
    eta = eta_ch * detector.eta_d
    live = dead_time_live_fraction(cfg, system, detector, eta_ch, y_b)
    q1, e1 = gain_qber_analytic(mu1, eta, y_b, system.e_mis, system.e0)
    q2, e2 = gain_qber_analytic(mu2, eta, y_b, system.e_mis, system.e0)
    q3, _ = gain_qber_analytic(mu3, eta, y_b, system.e_mis, system.e0)
    out = _rate_arrays(
        q1 * live, q2 * live, q3 * live, e1, e2, mu1, mu2, mu3, system.q, f_ec, system.e0
    )
    return out["r_per_pulse"]


def optimize_intensities(
    eta_ch: float,
    p_raman_gate: float = 0.0,
    system: SystemSpec = SystemSpec(),
    detector: DetectorSpec = DetectorSpec(),
    mu3: float = 0.001,
    mu1_range: tuple[float, float] = (0.1, 1.0),
    mu2_min: float = 0.01,
    p_min: float = 0.01,
    points: int = 21,
    refinements: int = 2,
    f_ec: float = F_EC,
) -> OptimizationResult:
    """Coarse-to-fine grid search over (mu1, mu2, p1, p2).

    The objective is key per emitted pulse, ``p1 * R``, since only signal
    pulses are distilled. Each refinement re-grids a box two coarse steps wide
    around the incumbent. Ties go to the lexicographically smallest
    configuration.
    """
    if points < 2:
        raise DomainError("need at least two grid points per axis")
    y_b = effective_background(detector, p_raman_gate)
    bounds = np.array(
        [
            [mu1_range[0], mu1_range[1]],
            [mu2_min, mu1_range[1] / 2],
            [p_min, 1.0 - 2 * p_min],
            [p_min, 1.0 - 2 * p_min],
        ]
    )
    if np.any(bounds[:, 0] > bounds[:, 1]):
        raise DomainError("empty intensity search box")
    lo, hi = bounds[:, 0].copy(), bounds[:, 1].copy()
    best = None
    evaluations = 0
    for _ in range(refinements + 1):
        axes = [np.linspace(a, b, points) for a, b in zip(lo, hi)]
        m1, m2, p1, p2 = np.meshgrid(*axes, indexing="ij")
        feasible = (m2 <= m1 / 2 + 1e-12) & (m2 > mu3) & (1.0 - p1 - p2 >= p_min - 1e-12)
        if not feasible.any():
            if best is None:
                raise DomainError("no feasible intensity configuration in the search box")
            break
        rate = _grid_rates(m1, m2, p1, p2, mu3, eta_ch, y_b, system, detector, f_ec)
        obj = np.where(feasible, p1 * rate, -np.inf)
        evaluations += int(feasible.sum())
        k = int(np.argmax(obj))
        cand = (float(obj.flat[k]), m1.flat[k], m2.flat[k], p1.flat[k], p2.flat[k], float(rate.flat[k]))
        if best is None or cand[0] > best[0]:
            best = cand
        step = (hi - lo) / (points - 1)
        centre = np.array(best[1:5])
        lo = np.maximum(bounds[:, 0], centre - step)
        hi = np.minimum(bounds[:, 1], centre + step)
    obj, m1, m2, p1, p2, rate = best
    p1, p2 = float(p1), float(p2)
    decoy = DecoyConfig(float(m1), float(m2), mu3, p1, p2, 1.0 - p1 - p2)
    return OptimizationResult(decoy, rate, max(obj, 0.0), tuple(float(s) for s in step), evaluations)
