"""Fiber propagation: attenuation, dispersion walk-off and forward Raman noise."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DomainError, ModelBreakdownError, ModelWarning
from .units import photon_energy

NOISE_PROB_WARN = 0.1


@dataclass(frozen=True)
class FiberSpec:
    """Single-mode fiber span.

    Attributes:
        length_km: Span length.
        attenuation_db_km: Loss, assumed equal at the classical and quantum
            wavelengths.
        dispersion_ps_nm_km: Chromatic dispersion D.
    """

    length_km: float
    attenuation_db_km: float = 0.2
    dispersion_ps_nm_km: float = 17.0

    def __post_init__(self):
        if not self.length_km > 0:
            raise DomainError(f"fiber length must be positive, got {self.length_km}")
        if self.attenuation_db_km < 0:
            raise DomainError("attenuation must be non-negative")

    @property
    def loss_db(self) -> float:
        return self.attenuation_db_km * self.length_km

    @property
    def alpha_per_km(self) -> float:
        """Power attenuation coefficient in 1/km (natural-log units)."""
        return self.attenuation_db_km * math.log(10.0) / 10.0


@dataclass(frozen=True)
class PathBudget:
    """Fiber plus the lumped insertion loss seen by the quantum channel
    (mux/demux, WSS filter and receiver optics)."""

    fiber: FiberSpec
    quantum_insertion_loss_db: float = 0.0

    def __post_init__(self):
        if self.quantum_insertion_loss_db < 0:
            raise DomainError("insertion loss must be non-negative")

    @property
    def eta_channel(self) -> float:
        return transmittance(
            self.fiber.attenuation_db_km, self.fiber.length_km, self.quantum_insertion_loss_db
        )


def transmittance(alpha_db_km: float, length_km: float, extra_db: float = 0.0) -> float:
    """Linear power transmission 10^(-(alpha*L + extra)/10)."""
    if alpha_db_km < 0 or length_km < 0 or extra_db < 0:
        raise DomainError("attenuation, length and extra loss must be non-negative")
    return 10.0 ** (-(alpha_db_km * length_km + extra_db) / 10.0)


def walk_off_delay(fiber: FiberSpec, lambda_c_nm: float, lambda_q_nm: float) -> float:
    """Largest arrival-time spread (ps) of Raman photons relative to the classical frame.

    A photon scattered at distance d rides the classical wavelength for d and the
    quantum wavelength for the rest, so delays fill [0, D * L * |dlambda|].
    """
    if lambda_c_nm <= 0 or lambda_q_nm <= 0:
        raise DomainError("wavelengths must be positive")
    return abs(fiber.dispersion_ps_nm_km) * fiber.length_km * abs(lambda_c_nm - lambda_q_nm)


class RamanTable:
    """Piecewise-linear Raman coefficient beta(offset).

    ``offset_ghz`` is nu_quantum - nu_pump, so negative offsets are on the
    Stokes side. Values outside the tabulated range are refused rather than
    extrapolated.
    """

    def __init__(self, offsets_ghz, betas):
        offsets = np.asarray(offsets_ghz, dtype=float)
        betas = np.asarray(betas, dtype=float)
        if offsets.ndim != 1 or offsets.shape != betas.shape or offsets.size < 2:
            raise DomainError("Raman table needs two equal-length columns with >= 2 rows")
        if np.any(np.diff(offsets) <= 0):
            raise DomainError("Raman table offsets must be strictly increasing")
        if np.any(betas < 0):
            raise DomainError("Raman coefficients must be non-negative")
        self.offsets_ghz = offsets
        self.betas = betas

    def __len__(self):
        return self.offsets_ghz.size

    def __repr__(self):
        return (
            f"RamanTable({len(self)} points, "
            f"{self.offsets_ghz[0]:g}..{self.offsets_ghz[-1]:g} GHz)"
        )

    @classmethod
    def from_file(cls, path) -> "RamanTable":
        """Load a two-column (offset_GHz, beta) text file; ``#`` starts a comment."""
        data = np.loadtxt(path, comments="#", ndmin=2)
        if data.shape[1] != 2:
            raise DomainError(f"{path}: expected two columns, found {data.shape[1]}")
        return cls(data[:, 0], data[:, 1])

    @classmethod
    def default(cls) -> "RamanTable":
        ref = resources.files("qli") / "data" / "raman_default.txt"
        with resources.as_file(ref) as path:
            return cls.from_file(Path(path))

    def scaled(self, factor: float) -> "RamanTable":
        if factor < 0:
            raise DomainError("scale factor must be non-negative")
        return RamanTable(self.offsets_ghz, self.betas * factor)

    def lookup(self, delta_nu_ghz: float) -> float:
        return raman_lookup(self, delta_nu_ghz)

    def integrated(self, side: str) -> float:
        """Trapezoidal area of beta over one side ('stokes' or 'anti-stokes')."""
        mask = self.offsets_ghz <= 0 if side == "stokes" else self.offsets_ghz >= 0
        x, y = self.offsets_ghz[mask], self.betas[mask]
        return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def raman_lookup(table: RamanTable, delta_nu_ghz: float) -> float:
    lo, hi = table.offsets_ghz[0], table.offsets_ghz[-1]
    if not lo <= delta_nu_ghz <= hi:
        raise DomainError(f"offset {delta_nu_ghz} GHz outside table range [{lo}, {hi}]")
    return float(np.interp(delta_nu_ghz, table.offsets_ghz, table.betas))


def raman_noise_power(
    p_launch_mw: float, fiber: FiberSpec, beta: float, filter_bw_ghz: float
) -> float:
    """Forward SpRS power (mW) at the fiber output inside the receiver filter.

    P = P_launch * exp(-alpha L) * beta * L * B, valid when the pump and the
    quantum wavelength see the same attenuation.
    """
    if p_launch_mw < 0 or beta < 0 or filter_bw_ghz < 0:
        raise DomainError("launch power, beta and filter bandwidth must be non-negative")
    L = fiber.length_km
    return p_launch_mw * math.exp(-fiber.alpha_per_km * L) * beta * L * filter_bw_ghz


def gate_noise_counts(
    p_noise_mw: float,
    lambda_q_nm: float,
    gate_ns: float,
    eta_d: float,
    window_fraction: float = 1.0,
) -> float:
    """As :func:`noise_prob_per_gate` but without the large-value warning."""
    if p_noise_mw < 0 or gate_ns < 0 or not 0 <= eta_d <= 1:
        raise DomainError("invalid noise power, gate width or efficiency")
    if not 0 <= window_fraction <= 1:
        raise DomainError(f"window fraction {window_fraction} outside [0, 1]")
    photons_per_s = p_noise_mw * 1e-3 / photon_energy(lambda_q_nm)
    p = photons_per_s * gate_ns * 1e-9 * eta_d * window_fraction
    if p > 1:
        raise ModelBreakdownError(f"{p:.3g} noise counts per gate; the per-gate model needs p << 1")
    return p


def noise_prob_per_gate(
    p_noise_mw: float,
    lambda_q_nm: float,
    gate_ns: float,
    eta_d: float,
    window_fraction: float = 1.0,
) -> float:
    """Expected Raman counts per detector gate, summed over the detector group.

    ``window_fraction`` is the mean classical intensity seen by the gate
    relative to continuous traffic: 1 without interleaving, 0 when the gate
    sits on the noise-free floor. Warns above ``NOISE_PROB_WARN``.
    """
    p = gate_noise_counts(p_noise_mw, lambda_q_nm, gate_ns, eta_d, window_fraction)
    if p > NOISE_PROB_WARN:
        warnings.warn(
            f"{p:.3g} noise counts per gate; results are outside the linear regime",
            ModelWarning,
            stacklevel=2,
        )
    return p
