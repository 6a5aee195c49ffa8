"""Unit conversions and 100-GHz ITU grid arithmetic.

Powers are carried in milliwatts internally; dBm only appears at the edges.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable

from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import h as PLANCK

from .errors import DomainError, InvalidChannelError, ModelWarning

GRID_ORIGIN_THZ = 190.0
GRID_SPACING_THZ = 0.1
MIN_CHANNEL = 1
MAX_CHANNEL = 72


def itu_channel_frequency(channel: int) -> float:
    """Centre frequency in THz of a 100-GHz ITU channel (f = 190.0 + 0.1 n)."""
    if isinstance(channel, bool) or int(channel) != channel:
        raise InvalidChannelError(f"channel index must be an integer, got {channel!r}")
    channel = int(channel)
    if not MIN_CHANNEL <= channel <= MAX_CHANNEL:
        raise InvalidChannelError(
            f"channel {channel} outside [{MIN_CHANNEL}, {MAX_CHANNEL}]"
        )
    # integer arithmetic in GHz keeps the grid exact
    return (int(GRID_ORIGIN_THZ * 1000) + 100 * channel) / 1000.0


def frequency_to_wavelength(freq_thz: float) -> float:
    """Vacuum wavelength in nm for a frequency in THz."""
    if not freq_thz > 0:
        raise DomainError(f"frequency must be positive, got {freq_thz}")
    return SPEED_OF_LIGHT / (freq_thz * 1e12) * 1e9


def wavelength_to_frequency(wavelength_nm: float) -> float:
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm}")
    return SPEED_OF_LIGHT / (wavelength_nm * 1e-9) / 1e12


def channel_wavelength(channel: int) -> float:
    return frequency_to_wavelength(itu_channel_frequency(channel))


def photon_energy(wavelength_nm: float) -> float:
    """Photon energy h*c/lambda in joules."""
    if not wavelength_nm > 0:
        raise DomainError(f"wavelength must be positive, got {wavelength_nm}")
    return PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9)


def dbm_to_mw(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw: float) -> float:
    """Convert mW to dBm.

    Zero power maps to ``-inf`` and emits a :class:`ModelWarning`; negative
    power is a domain error.
    """
    if p_mw < 0:
        raise DomainError(f"power must be non-negative, got {p_mw} mW")
    if p_mw == 0:
        warnings.warn("0 mW has no finite dBm value; returning -inf", ModelWarning, stacklevel=2)
        return -math.inf
    return 10.0 * math.log10(p_mw)


def sum_powers(powers_mw: Iterable[float]) -> float:
    """Total power in mW. Summation is compensated (math.fsum) so order does not matter."""
    powers = list(powers_mw)
    if any(p < 0 for p in powers):
        raise DomainError("powers must be non-negative")
    return math.fsum(powers)


def db_to_linear(loss_db: float) -> float:
    """Transmission factor for a loss given in dB."""
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class ClassicalChannel:
    index: int
    power_dbm: float

    def __post_init__(self):
        itu_channel_frequency(self.index)

    @property
    def power_mw(self) -> float:
        return dbm_to_mw(self.power_dbm)

    @property
    def frequency_thz(self) -> float:
        return itu_channel_frequency(self.index)

    @property
    def wavelength_nm(self) -> float:
        return channel_wavelength(self.index)


@dataclass(frozen=True)
class ChannelPlan:
    """Quantum channel slot plus the classical channels sharing the fiber."""

    quantum_channel: int = 39
    classical: tuple[ClassicalChannel, ...] = ()

    def __post_init__(self):
        itu_channel_frequency(self.quantum_channel)
        object.__setattr__(self, "classical", tuple(self.classical))
        indices = [ch.index for ch in self.classical]
        if self.quantum_channel in indices:
            raise InvalidChannelError(
                f"quantum channel Ch{self.quantum_channel} also used by a classical channel"
            )
        if len(set(indices)) != len(indices):
            raise InvalidChannelError("duplicate classical channel")

    @classmethod
    def uniform(cls, channels: Iterable[int], power_dbm: float, quantum_channel: int = 39):
        return cls(quantum_channel, tuple(ClassicalChannel(c, power_dbm) for c in channels))

    @property
    def quantum_wavelength_nm(self) -> float:
        return channel_wavelength(self.quantum_channel)

    @property
    def quantum_frequency_thz(self) -> float:
        return itu_channel_frequency(self.quantum_channel)

    def total_power_mw(self) -> float:
        return sum_powers(ch.power_mw for ch in self.classical)

    def total_power_dbm(self) -> float:
        return mw_to_dbm(self.total_power_mw())
