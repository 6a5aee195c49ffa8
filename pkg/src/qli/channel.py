"""Decoy-state BB84 physical layer: closed-form gains and a per-pulse Monte Carlo.

Detector layout is fixed: index 0/1 are the rectilinear pair (bit 0/1),
2/3 the diagonal pair. Bob's basis choice is a passive 50/50 (or biased)
splitter acting on each photon independently.
"""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError, ModelBreakdownError, ModelWarning

N_CLASSES = 3
DEFAULT_BLOCK = 100_000


@dataclass(frozen=True)
class DecoyConfig:
    mu1: float = 0.85
    mu2: float = 0.04
    mu3: float = 0.001
    p1: float = 0.9
    p2: float = 0.05
    p3: float = 0.05

    def __post_init__(self):
        if not self.mu1 > self.mu2 > self.mu3 >= 0:
            raise DomainError("need mu1 > mu2 > mu3 >= 0")
        if min(self.probs) < 0 or abs(sum(self.probs) - 1.0) > 1e-12:
            raise DomainError("emission probabilities must be non-negative and sum to 1")

    @property
    def mus(self) -> np.ndarray:
        return np.array([self.mu1, self.mu2, self.mu3])

    @property
    def probs(self) -> tuple[float, float, float]:
        return (self.p1, self.p2, self.p3)


@dataclass(frozen=True)
class DetectorSpec:
    """Gated InGaAs SPD group.

    ``y0_dark`` is the dark-count probability per gate for the whole group of
    four detectors; each detector sees a quarter of it.
    """

    eta_d: float = 0.2
    y0_dark: float = 6e-6
    gate_width_ns: float = 4.0
    dead_time_us: float = 10.0
    detector_count: int = 4

    def __post_init__(self):
        if not 0 < self.eta_d <= 1:
            raise DomainError("detector efficiency must be in (0, 1]")
        if not 0 <= self.y0_dark < 1:
            raise DomainError("dark-count probability must be in [0, 1)")
        if self.dead_time_us < 0:
            raise DomainError("dead time must be non-negative")
        if self.detector_count != 4:
            raise DomainError("only the four-detector passive-basis receiver is modelled")

    def dead_slots(self, rep_rate_mhz: float) -> int:
        """Pulse slots blocked after a click, rounded up."""
        return math.ceil(self.dead_time_us * rep_rate_mhz - 1e-9)


@dataclass(frozen=True)
class SystemSpec:
    rep_rate_mhz: float = 25.0
    e_mis: float = 0.01
    e0: float = 0.5
    basis_prob_x: float = 0.5
    sifting_factor_q: float | None = None

    def __post_init__(self):
        if not self.rep_rate_mhz > 0:
            raise DomainError("repetition rate must be positive")
        for name in ("e_mis", "e0", "basis_prob_x"):
            if not 0 <= getattr(self, name) <= 1:
                raise DomainError(f"{name} must be a probability")

    @property
    def basis_match_prob(self) -> float:
        px = self.basis_prob_x
        return px * px + (1 - px) * (1 - px)

    @property
    def q(self) -> float:
        """Sifting factor in the key-rate formula; follows the basis bias unless set."""
        return self.basis_match_prob if self.sifting_factor_q is None else self.sifting_factor_q


@dataclass
class TallyCounts:
    """Per-intensity-class counters from a Monte Carlo run.

    JSON schema (``to_dict``): ``pulses_sent``, ``sifted_detections`` and
    ``sifted_errors`` are lists of three ints ordered signal, decoy, vacuum;
    ``raw_clicks``, ``double_clicks`` and ``dead_time_losses`` are ints.
    """

    pulses_sent: np.ndarray = field(default_factory=lambda: np.zeros(N_CLASSES, np.int64))
    sifted_detections: np.ndarray = field(default_factory=lambda: np.zeros(N_CLASSES, np.int64))
    sifted_errors: np.ndarray = field(default_factory=lambda: np.zeros(N_CLASSES, np.int64))
    raw_clicks: int = 0
    double_clicks: int = 0
    dead_time_losses: int = 0

    def __post_init__(self):
        for name in ("pulses_sent", "sifted_detections", "sifted_errors"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64).reshape(N_CLASSES))
        if np.any(self.sifted_errors > self.sifted_detections) or np.any(
            self.sifted_detections > self.pulses_sent
        ):
            raise DomainError("need errors <= sifted detections <= pulses sent")

    def __add__(self, other: "TallyCounts") -> "TallyCounts":
        return TallyCounts(
            self.pulses_sent + other.pulses_sent,
            self.sifted_detections + other.sifted_detections,
            self.sifted_errors + other.sifted_errors,
            self.raw_clicks + other.raw_clicks,
            self.double_clicks + other.double_clicks,
            self.dead_time_losses + other.dead_time_losses,
        )

    def __eq__(self, other):
        if not isinstance(other, TallyCounts):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            d[k] = v.tolist() if isinstance(v, np.ndarray) else int(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TallyCounts":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def effective_background(detector: DetectorSpec, p_raman_gate: float) -> float:
    """Dark counts plus in-gate Raman counts, per gated pulse, whole group."""
    if not 0 <= p_raman_gate < 1:
        raise DomainError("Raman noise probability must be in [0, 1)")
    y_b = detector.y0_dark + p_raman_gate
    if y_b >= 1:
        raise ModelBreakdownError(f"background yield {y_b:.3g} >= 1")
    return y_b


def gain_qber_analytic(mu, eta, y_b, e_mis, e0=0.5):
    """Gain and QBER for mean photon number ``mu``.

    Q = Y_b + 1 - exp(-eta mu) and E Q = e0 Y_b + e_mis (1 - exp(-eta mu)),
    dropping the small overlap between background and signal clicks.
    Accepts numpy arrays.
    """
    signal = -np.expm1(-np.multiply(eta, mu))
    q = y_b + signal
    e = (e0 * y_b + e_mis * signal) / q
    if np.ndim(q) == 0:
        return float(q), float(e)
    return q, e


def detector_click_probs(decoy, system, detector, eta_ch, y_b):
    """Per-slot firing probability of an idle detector in the rectilinear and
    diagonal pairs, averaged over intensity classes and Alice's states.

    ``decoy`` fields may be numpy arrays (broadcast together).
    """
    px = system.basis_prob_x
    pz = 1.0 - px
    e = system.e_mis
    bg = 1.0 - y_b / 4.0

    def fire(lam, share):
        return 1.0 - bg * np.exp(-detector.eta_d * lam * share)

    out = []
    for own, other in ((px, pz), (pz, px)):
        total = 0.0
        for mu, p in zip((decoy.mu1, decoy.mu2, decoy.mu3), (decoy.p1, decoy.p2, decoy.p3)):
            lam = eta_ch * mu
            same = 0.5 * (fire(lam, own * (1 - e)) + fire(lam, own * e))
            total = total + p * (own * same + other * fire(lam, own * 0.5))
        out.append(total)
    return out[0], out[1]


def dead_time_live_fraction(decoy, system, detector, eta_ch, y_b):
    """Fraction of sifted events surviving detector dead time.

    An idle detector fires with per-slot probability p and then sleeps for N
    slots, so it is live a fraction 1 / (1 + p N) of the time.
    """
    n_dead = detector.dead_slots(system.rep_rate_mhz)
    p_x, p_z = detector_click_probs(decoy, system, detector, eta_ch, y_b)
    live_x = 1.0 / (1.0 + p_x * n_dead)
    live_z = 1.0 / (1.0 + p_z * n_dead)
    px = system.basis_prob_x
    wx, wz = px * px, (1 - px) * (1 - px)
    return (wx * live_x + wz * live_z) / (wx + wz)


def expected_gains(decoy, system, detector, eta_ch, p_raman_gate=0.0):
    """Closed-form (Q, E) per intensity class including dead-time saturation.

    Returns arrays of shape (3,) plus the live fraction applied to the gains.
    """
    y_b = effective_background(detector, p_raman_gate)
    eta = eta_ch * detector.eta_d
    q, e = gain_qber_analytic(decoy.mus, eta, y_b, system.e_mis, system.e0)
    live = float(dead_time_live_fraction(decoy, system, detector, eta_ch, y_b))
    return q * live, e, live


# -- Monte Carlo -------------------------------------------------------------


def _apply_dead_time(fires: np.ndarray, n_dead: int) -> np.ndarray:
    """Keep only clicks that arrive while the detector is idle."""
    if n_dead == 0:
        return fires
    kept = np.zeros_like(fires)
    for d in range(fires.shape[1]):
        idx = np.flatnonzero(fires[:, d])
        i = 0
        while i < idx.size:
            kept[idx[i], d] = True
            i = int(np.searchsorted(idx, idx[i] + n_dead, side="right"))
    return kept


def _simulate_block(n, seed, block, decoy, system, detector, eta_ch, y_b) -> TallyCounts:
    rng = np.random.default_rng(np.random.SeedSequence([seed, block]))
    px = system.basis_prob_x
    cls = rng.choice(N_CLASSES, size=n, p=np.array(decoy.probs))
    bit = rng.integers(0, 2, size=n)
    basis = (rng.random(n) >= px).astype(np.int64)  # 0 rectilinear, 1 diagonal
    photons = rng.poisson(decoy.mus[cls])
    surv = rng.binomial(photons, eta_ch)
    to_x = rng.binomial(surv, px)
    to_z = surv - to_x
    matched = np.where(basis == 0, to_x, to_z)
    other = surv - matched
    right = rng.binomial(matched, 1.0 - system.e_mis)
    wrong = matched - right
    other0 = rng.binomial(other, 0.5)

    counts = np.zeros((n, 4), dtype=np.int64)
    rows = np.arange(n)
    own = 2 * basis
    counts[rows, own + bit] = right
    counts[rows, own + 1 - bit] = wrong
    counts[rows, 2 - own] = other0
    counts[rows, 3 - own] = other - other0

    p_fire = 1.0 - (1.0 - detector.eta_d) ** counts * (1.0 - y_b / 4.0)
    raw = rng.random((n, 4)) < p_fire
    tie_basis = (rng.random(n) < 0.5).astype(np.int64)
    tie_bit = (rng.random(n) < 0.5).astype(np.int64)

    clicks = _apply_dead_time(raw, detector.dead_slots(system.rep_rate_mhz))
    cx = clicks[:, 0] | clicks[:, 1]
    cz = clicks[:, 2] | clicks[:, 3]
    detected = cx | cz
    bob_basis = np.where(cx & cz, tie_basis, np.where(cx, 0, 1))
    d0 = clicks[rows, 2 * bob_basis]
    d1 = clicks[rows, 2 * bob_basis + 1]
    double = d0 & d1
    bob_bit = np.where(double, tie_bit, d1.astype(np.int64))

    sifted = detected & (bob_basis == basis)
    errors = sifted & (bob_bit != bit)
    return TallyCounts(
        pulses_sent=np.bincount(cls, minlength=N_CLASSES),
        sifted_detections=np.bincount(cls[sifted], minlength=N_CLASSES),
        sifted_errors=np.bincount(cls[errors], minlength=N_CLASSES),
        raw_clicks=int(detected.sum()),
        double_clicks=int((double & detected).sum()),
        dead_time_losses=int(raw.sum() - clicks.sum()),
    )


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("QLI_THREADS", "")))
    except ValueError:
        return os.cpu_count() or 1


def simulate_pulses(
    n_pulses: int,
    seed: int,
    decoy: DecoyConfig,
    system: SystemSpec,
    detector: DetectorSpec,
    eta_ch: float,
    p_raman_gate: float = 0.0,
    block_size: int = DEFAULT_BLOCK,
    workers: int | None = None,
) -> TallyCounts:
    """Per-pulse Monte Carlo of the prepare-measure-sift chain.

    Pulses are simulated in blocks of ``block_size``; block ``k`` draws from
    its own stream seeded by ``(seed, k)``, so the tally does not depend on
    ``workers``. Detector dead time restarts at each block boundary, which
    overstates the live time by at most one dead window per block.
    """
    if n_pulses < 1:
        raise DomainError("need at least one pulse")
    if not 0 <= eta_ch <= 1:
        raise DomainError("channel transmittance must be in [0, 1]")
    y_b = effective_background(detector, p_raman_gate)
    sizes = [block_size] * (n_pulses // block_size)
    if n_pulses % block_size:
        sizes.append(n_pulses % block_size)
    args = [(n, seed, k, decoy, system, detector, eta_ch, y_b) for k, n in enumerate(sizes)]
    workers = workers or default_workers()
    if workers == 1 or len(args) == 1:
        parts = [_simulate_block(*a) for a in args]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda a: _simulate_block(*a), args))
    total = TallyCounts()
    for part in parts:
        total = total + part
    return total


@dataclass(frozen=True)
class SiftEstimate:
    gain: float
    qber: float
    gain_halfwidth: float
    qber_halfwidth: float
    undefined_qber: bool = False


def _wilson(k, n, z):
    if n == 0:
        return math.nan, math.nan
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre, half


def sift(
    tally: TallyCounts, system: SystemSpec | None = None, z: float = 1.96, warn: bool = True
) -> list[SiftEstimate]:
    """Point estimates of gain and QBER per class with Wilson half-widths.

    Gains are normalised by the basis-match probability so they compare with
    :func:`gain_qber_analytic`. QBERs above 0.5 are clipped (with a warning
    unless ``warn`` is false).
    """
    match = (system or SystemSpec()).basis_match_prob
    out = []
    for sent, det, err in zip(tally.pulses_sent, tally.sifted_detections, tally.sifted_errors):
        sent, det, err = int(sent), int(det), int(err)
        gain = det / sent / match if sent else math.nan
        _, g_half = _wilson(det, sent, z)
        if det == 0:
            out.append(SiftEstimate(gain, math.nan, g_half / match, math.nan, True))
            continue
        qber = err / det
        _, e_half = _wilson(err, det, z)
        if qber > 0.5:
            if warn:
                warnings.warn(f"QBER {qber:.3f} clipped to 0.5", ModelWarning, stacklevel=2)
            qber = 0.5
        out.append(SiftEstimate(gain, qber, g_half / match, e_half))
    return out
