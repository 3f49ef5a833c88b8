"""Physical parameters, waveguide geometry, and scenario sampling.

Conventions (fixed for the whole package):

* The serving area is the square [-D, D] x [-D, D] at z = 0; waveguides sit
  at height z = h.
* Parallel placement: waveguide 1 runs along y = +D/6, waveguide 2 along
  y = -D/6, both parallel to the x-axis.  The free coordinate of an antenna
  is its x-coordinate.
* Orthogonal placement: waveguide 1 runs along the y-axis (x = 0, free
  coordinate y), waveguide 2 along the x-axis (y = 0, free coordinate x).
* Feed points sit at the negative end of each waveguide, so the in-waveguide
  propagation distance of an antenna at free coordinate t is t + D.
* All internal quantities are SI (meters, watts, hertz); dBm only appears at
  the configuration boundary in :func:`derive_params`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

C_LIGHT = 299792458.0  # m/s

PARALLEL = "parallel"
ORTHOGONAL = "orthogonal"


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watts_to_dbm(watts: float) -> float:
    return 10.0 * np.log10(watts) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """All physical constants and budgets of one system configuration."""

    num_lus: int
    pas_per_waveguide: int
    half_size: float            # D, meters
    height: float               # h, meters
    carrier_freq: float         # Hz
    refractive_index: float     # n_neff
    guard_distance: float       # Delta, meters
    noise_lu: float             # watts
    noise_eve: float            # watts
    power_budget: float         # watts
    circuit_power: float        # watts
    wavelength: float = field(default=0.0)          # lambda = c / f_c
    guided_wavelength: float = field(default=0.0)   # lambda / n_neff
    eta: float = field(default=0.0)                 # lambda^2 / (4 pi)^2

    def __post_init__(self):
        for name in ("num_lus", "pas_per_waveguide", "half_size", "height",
                     "carrier_freq", "refractive_index", "guard_distance",
                     "noise_lu", "noise_eve", "circuit_power"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.power_budget < 0:
            raise ValueError("power_budget must be nonnegative")
        lam = C_LIGHT / self.carrier_freq
        if self.wavelength == 0.0:
            object.__setattr__(self, "wavelength", lam)
        if self.guided_wavelength == 0.0:
            object.__setattr__(self, "guided_wavelength", lam / self.refractive_index)
        if self.eta == 0.0:
            object.__setattr__(self, "eta", lam ** 2 / (4.0 * np.pi) ** 2)
        if not np.isclose(self.wavelength, lam, rtol=1e-12, atol=0.0):
            raise ValueError("wavelength inconsistent with c / carrier_freq")
        if not np.isclose(self.guided_wavelength, lam / self.refractive_index,
                          rtol=1e-12, atol=0.0):
            raise ValueError("guided_wavelength inconsistent with lambda / n_neff")
        if not np.isclose(self.eta, lam ** 2 / (4.0 * np.pi) ** 2,
                          rtol=1e-12, atol=0.0):
            raise ValueError("eta inconsistent with lambda^2 / (4 pi)^2")
        if self.guided_wavelength >= self.wavelength:
            raise ValueError("guided wavelength must be shorter than free-space wavelength")
        if 2.0 * self.half_size < (self.pas_per_waveguide - 1) * self.guard_distance:
            raise ValueError(
                "infeasible placement space: 2D < (N-1) * guard_distance")


@dataclass(frozen=True)
class WaveguideLayout:
    """One of the two waveguide placement variants."""

    variant: str

    def __post_init__(self):
        if self.variant not in (PARALLEL, ORTHOGONAL):
            raise ValueError(f"unknown layout variant {self.variant!r}")


@dataclass(frozen=True)
class Scenario:
    """A layout plus receiver positions; the unit of Monte-Carlo realization."""

    params: SystemParams
    layout: WaveguideLayout
    lu_positions: np.ndarray   # (K, 3)
    eve_position: np.ndarray   # (3,)
    seed: int

    def __post_init__(self):
        lus = np.asarray(self.lu_positions, dtype=float)
        eve = np.asarray(self.eve_position, dtype=float)
        lus.setflags(write=False)
        eve.setflags(write=False)
        object.__setattr__(self, "lu_positions", lus)
        object.__setattr__(self, "eve_position", eve)
        if lus.shape != (self.params.num_lus, 3):
            raise ValueError("lu_positions must have shape (K, 3)")
        if eve.shape != (3,):
            raise ValueError("eve_position must have shape (3,)")
        D = self.params.half_size
        pts = np.vstack([lus, eve[None, :]])
        if np.any(np.abs(pts[:, :2]) > D + 1e-12) or np.any(pts[:, 2] != 0.0):
            raise ValueError("receivers must lie in the square at z = 0")

    def receiver(self, k: int) -> np.ndarray:
        """Position of receiver k; k = 0 is the eavesdropper."""
        return self.eve_position if k == 0 else self.lu_positions[k - 1]


@dataclass(frozen=True)
class Placement:
    """Per-waveguide free coordinates of the antennas, shape (2, N)."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if c.ndim != 2 or c.shape[0] != 2:
            raise ValueError("coords must have shape (2, N)")


def placement_is_feasible(coords: np.ndarray, half_size: float,
                          guard_distance: float, tol: float = 1e-9) -> bool:
    """Check ascending order, guard gaps, and bounds for a (2, N) coordinate set."""
    c = np.asarray(coords, dtype=float)
    if np.any(np.abs(c) > half_size + tol):
        return False
    if c.shape[1] > 1 and np.any(np.diff(c, axis=1) < guard_distance - tol):
        return False
    return True


def derive_params(K: int, N: int, D: float, h: float, f_c: float,
                  n_neff: float = 1.4, delta_policy: str = "half_wavelength",
                  noise_dbm: float = -70.0, noise_eve_dbm: float | None = None,
                  p_max_dbm: float = 30.0, p_c_dbm: float = 20.0) -> SystemParams:
    """Build a :class:`SystemParams` from raw configuration values.

    ``delta_policy`` is either ``"half_wavelength"`` (guard distance
    lambda/2) or a numeric string giving the guard distance in meters.
    """
    lam = C_LIGHT / f_c
    if delta_policy == "half_wavelength":
        delta = lam / 2.0
    else:
        delta = float(delta_policy)
    if noise_eve_dbm is None:
        noise_eve_dbm = noise_dbm
    for v in (noise_dbm, noise_eve_dbm, p_max_dbm, p_c_dbm):
        if not np.isfinite(v):
            raise ValueError("dBm quantities must be finite")
    return SystemParams(
        num_lus=K,
        pas_per_waveguide=N,
        half_size=D,
        height=h,
        carrier_freq=f_c,
        refractive_index=n_neff,
        guard_distance=delta,
        noise_lu=dbm_to_watts(noise_dbm),
        noise_eve=dbm_to_watts(noise_eve_dbm),
        power_budget=dbm_to_watts(p_max_dbm),
        circuit_power=dbm_to_watts(p_c_dbm),
    )


def waveguide_offset(layout: WaveguideLayout, l: int, params: SystemParams) -> float:
    """Fixed off-axis coordinate of waveguide l (parallel layout only)."""
    if layout.variant != PARALLEL:
        raise ValueError("offsets are defined only for the parallel layout")
    D = params.half_size
    return D / 6.0 if l == 1 else -D / 6.0


def feed_point(layout: WaveguideLayout, l: int, params: SystemParams) -> np.ndarray:
    """Feed-point position of waveguide l (l in {1, 2})."""
    if l not in (1, 2):
        raise ValueError("waveguide index must be 1 or 2")
    D, h = params.half_size, params.height
    if layout.variant == PARALLEL:
        return np.array([-D, waveguide_offset(layout, l, params), h])
    if l == 1:
        return np.array([0.0, -D, h])
    return np.array([-D, 0.0, h])


def pin_position(layout: WaveguideLayout, l: int, t: float,
                 params: SystemParams) -> np.ndarray:
    """3D position of an antenna at free coordinate t on waveguide l."""
    if l not in (1, 2):
        raise ValueError("waveguide index must be 1 or 2")
    D, h = params.half_size, params.height
    if not -D - 1e-12 <= t <= D + 1e-12:
        raise ValueError(f"free coordinate {t} outside [-D, D]")
    if layout.variant == PARALLEL:
        return np.array([t, waveguide_offset(layout, l, params), h])
    if l == 1:
        return np.array([0.0, t, h])
    return np.array([t, 0.0, h])


def sample_scenario(params: SystemParams, layout: WaveguideLayout, seed: int,
                    eve_mode: str = "uniform") -> Scenario:
    """Draw one receiver realization; pure function of its arguments.

    ``uniform``: every receiver coordinate i.i.d. uniform on [-D, D].
    ``in_front``: LUs uniform on the x >= 0 half of the square and the
    eavesdropper placed between the transmitter side and the LUs (x uniform
    on (0, min_k x_k), y near the LU mean), clamped to the square.
    """
    rng = np.random.default_rng(seed)
    D = params.half_size
    K = params.num_lus
    if eve_mode == "uniform":
        lu_xy = rng.uniform(-D, D, size=(K, 2))
        eve_xy = rng.uniform(-D, D, size=2)
    elif eve_mode == "in_front":
        lu_x = rng.uniform(0.0, D, size=K)
        lu_y = rng.uniform(-D, D, size=K)
        lu_xy = np.column_stack([lu_x, lu_y])
        eve_x = rng.uniform(0.0, np.min(lu_x))
        eve_y = np.clip(np.mean(lu_y) + rng.uniform(-1.0, 1.0), -D, D)
        eve_xy = np.array([eve_x, eve_y])
    else:
        raise ValueError(f"unknown eve_mode {eve_mode!r}")
    lus = np.column_stack([lu_xy, np.zeros(K)])
    eve = np.array([eve_xy[0], eve_xy[1], 0.0])
    return Scenario(params=params, layout=layout, lu_positions=lus,
                    eve_position=eve, seed=seed)


def uniform_shift_expectation(D1: float, D2: float, A: float, B: float) -> float:
    """E{(X + A)^2 + B} for X ~ U(D1, D2), in closed form.

    Equals ((D1+A)^2 + (D1+A)(D2+A) + (D2+A)^2) / 3 + B.
    """
    if D2 <= D1:
        raise ValueError("require D2 > D1")
    lo, hi = D1 + A, D2 + A
    return (lo * lo + lo * hi + hi * hi) / 3.0 + B


def expected_sq_vertical_distance(layout: WaveguideLayout, D: float, h: float) -> float:
    """Expected squared receiver-to-waveguide vertical distance, uniform receivers."""
    if D <= 0 or h <= 0:
        raise ValueError("D and h must be positive")
    if layout.variant == PARALLEL:
        # offset +-D/6; both waveguides give the same expectation by symmetry
        return uniform_shift_expectation(-D, D, -D / 6.0, h * h)
    return uniform_shift_expectation(-D, D, 0.0, h * h)
