"""Effective channels and rate / secrecy / efficiency metrics.

The effective channel of receiver k is the 2-vector whose l-th component is
the inner product of waveguide l's in-waveguide gains with its free-space
column, i.e. the literal product h_k^T G on the block-diagonal pinching
matrix.  Rates use the conjugate pairing |f^H w|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scenario import Placement, Scenario, feed_point, pin_position


@dataclass(frozen=True)
class ChannelModel:
    """In-waveguide propagation model: pure phase shifts, optionally with
    exponential amplitude attenuation (zeta in nepers per meter)."""

    attenuation: bool = False
    zeta: float = 0.0

    def __post_init__(self):
        if self.zeta < 0:
            raise ValueError("attenuation coefficient must be >= 0")
        if not self.attenuation and self.zeta != 0.0:
            raise ValueError("phase-only model cannot carry a nonzero zeta")

    @staticmethod
    def phase_only() -> "ChannelModel":
        return ChannelModel(attenuation=False, zeta=0.0)

    @staticmethod
    def with_attenuation(zeta: float) -> "ChannelModel":
        return ChannelModel(attenuation=True, zeta=zeta)


@dataclass(frozen=True)
class EffectiveChannels:
    """Effective channels f_k in C^2 for k = 0 (Eve) .. K (LUs)."""

    f: np.ndarray  # (K+1, 2) complex

    def __post_init__(self):
        arr = np.asarray(self.f, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "f", arr)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("f must have shape (K+1, 2)")

    @property
    def num_lus(self) -> int:
        return self.f.shape[0] - 1


@dataclass(frozen=True)
class BeamSet:
    """w_0 is the artificial-noise vector, w_1..w_K the user beamformers."""

    w: np.ndarray  # (K+1, 2) complex

    def __post_init__(self):
        arr = np.asarray(self.w, dtype=complex)
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("w must have shape (K+1, 2)")

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.w) ** 2))


def inwaveguide_gain(feed: np.ndarray, pin: np.ndarray, guided_wavelength: float,
                     model: ChannelModel) -> complex:
    """Gain of guided propagation from the feed point to one antenna."""
    d = float(np.linalg.norm(np.asarray(feed, float) - np.asarray(pin, float)))
    g = np.exp(-1j * 2.0 * np.pi / guided_wavelength * d)
    if model.attenuation:
        g = np.exp(-model.zeta * d) * g
    return complex(g)


def freespace_gain(pin: np.ndarray, receiver: np.ndarray, wavelength: float,
                   eta: float) -> complex:
    """Line-of-sight gain from one antenna to one receiver."""
    d = float(np.linalg.norm(np.asarray(pin, float) - np.asarray(receiver, float)))
    return complex(np.sqrt(eta) * np.exp(-1j * 2.0 * np.pi / wavelength * d) / d)


def effective_channel(scenario: Scenario, placement: Placement,
                      model: ChannelModel, k: int) -> np.ndarray:
    """Effective channel f_k in C^2 for receiver k (k = 0 is Eve)."""
    p = scenario.params
    rx = scenario.receiver(k)
    out = np.zeros(2, dtype=complex)
    for l in (1, 2):
        feed = feed_point(scenario.layout, l, p)
        acc = 0.0 + 0.0j
        for t in placement.coords[l - 1]:
            pin = pin_position(scenario.layout, l, float(t), p)
            acc += (inwaveguide_gain(feed, pin, p.guided_wavelength, model)
                    * freespace_gain(pin, rx, p.wavelength, p.eta))
        out[l - 1] = acc
    return out


def effective_channels(scenario: Scenario, placement: Placement,
                       model: ChannelModel) -> EffectiveChannels:
    """All K+1 effective channels, Eve first."""
    K = scenario.params.num_lus
    f = np.stack([effective_channel(scenario, placement, model, k)
                  for k in range(K + 1)])
    return EffectiveChannels(f=f)


def _beam_gains(f_k: np.ndarray, beams: BeamSet) -> np.ndarray:
    """|f_k^H w_j|^2 for all beams j (AN included, index 0)."""
    return np.abs(beams.w @ np.conj(f_k)) ** 2


def rate_lu(F: EffectiveChannels, beams: BeamSet, k: int, noise_lu: float) -> float:
    """Information rate of LU k (k in 1..K), AN counted as interference."""
    if not 1 <= k <= F.num_lus:
        raise ValueError("k must index a legitimate user")
    gains = _beam_gains(F.f[k], beams)
    interference = float(np.sum(gains) - gains[k]) + noise_lu
    return float(np.log2(1.0 + gains[k] / interference))


def rate_eve(F: EffectiveChannels, beams: BeamSet, k: int, noise_eve: float) -> float:
    """Leakage rate of LU k's signal at the eavesdropper."""
    if not 1 <= k <= F.num_lus:
        raise ValueError("k must index a legitimate user")
    gains = _beam_gains(F.f[0], beams)
    interference = float(np.sum(gains) - gains[k]) + noise_eve
    return float(np.log2(1.0 + gains[k] / interference))


def secrecy_rate(F: EffectiveChannels, beams: BeamSet, k: int,
                 noise_lu: float, noise_eve: float) -> float:
    """Per-user secure rate, clamped at zero."""
    return max(rate_lu(F, beams, k, noise_lu) - rate_eve(F, beams, k, noise_eve), 0.0)


def ssr(F: EffectiveChannels, beams: BeamSet, noise_lu: float,
        noise_eve: float) -> float:
    """Secure sum rate: per-user clamped secrecy rates, summed."""
    return sum(secrecy_rate(F, beams, k, noise_lu, noise_eve)
               for k in range(1, F.num_lus + 1))


def see(F: EffectiveChannels, beams: BeamSet, noise_lu: float, noise_eve: float,
        circuit_power: float) -> float:
    """Secure energy efficiency: SSR over total transmit plus circuit power."""
    if circuit_power <= 0:
        raise ValueError("circuit power must be positive")
    return ssr(F, beams, noise_lu, noise_eve) / (beams.total_power + circuit_power)
