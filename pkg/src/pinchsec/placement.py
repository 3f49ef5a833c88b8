"""Stage-1 antenna placement: feasibility-projected PSO, exhaustive search,
and the fixed-antenna baseline.

The fitness of a candidate placement is the secure sum rate achieved by the
regularized matched-filter beamformers of :func:`heuristic_beams` (no
artificial noise at this stage).  All swarm/grid evaluations run through
vectorized kernels that agree with the scalar channel module to 1e-12.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import BeamSet, ChannelModel, EffectiveChannels
from .scenario import (ORTHOGONAL, PARALLEL, Placement, Scenario,
                       waveguide_offset)


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 1000
    inertia: float = 0.8
    accel_personal: float = 1.5
    accel_global: float = 1.5
    max_iters: int = 100
    stall_iters: int = 20
    stall_tol: float = 1e-3
    init_center_mode: str = "lu_mean"   # or "zero"
    init_spread: float = 1.0
    velocity_init_range: float = 1.5
    seed: int = 0

    def __post_init__(self):
        if self.swarm_size < 1:
            raise ValueError("swarm_size must be >= 1")
        if not 0.0 < self.inertia <= 1.0:
            raise ValueError("inertia must be in (0, 1]")
        if self.accel_personal < 0 or self.accel_global < 0:
            raise ValueError("acceleration coefficients must be >= 0")
        if self.init_center_mode not in ("lu_mean", "zero"):
            raise ValueError("unknown init_center_mode")


@dataclass(frozen=True)
class PlacementResult:
    placement: Placement
    stage1_beams: BeamSet
    stage1_ssr: float
    fitness_trace: np.ndarray
    evaluations: int


# ---------------------------------------------------------------------------
# feasibility projection


def project_feasible(raw: np.ndarray, half_size: float, guard_distance: float) -> np.ndarray:
    """Project raw per-waveguide coordinates onto the feasible ordered set.

    Clamp to [-D, D], sort ascending, extract slack gaps, rescale the total
    slack to at most B_max = 2D - (N-1)*guard, and reconstruct.  Idempotent
    on feasible sorted inputs.  Works on the last axis of any batch shape.
    """
    orig = np.asarray(raw, dtype=float)
    n = orig.shape[-1]
    D, delta = float(half_size), float(guard_distance)
    b_max = 2.0 * D - (n - 1) * delta
    if b_max < 0:
        raise ValueError("infeasible: 2D < (N-1) * guard_distance")
    x = np.sort(np.clip(orig, -D, D), axis=-1)
    gaps = np.empty_like(x)
    gaps[..., 0] = x[..., 0] + D
    if n > 1:
        gaps[..., 1:] = np.maximum(np.diff(x, axis=-1) - delta, 0.0)
    total = np.sum(gaps, axis=-1, keepdims=True)
    scale = b_max / np.maximum(b_max, total) if b_max > 0 else np.zeros_like(total)
    gaps = gaps * scale
    out = -D + np.cumsum(gaps, axis=-1) + delta * np.arange(n)
    # already-feasible inputs pass through bit-exactly (reconstruction is
    # their identity up to rounding, which we do not want to introduce)
    tol = 1e-9
    ok = np.all(np.abs(orig) <= D + tol, axis=-1)
    if n > 1:
        ok &= np.all(np.diff(orig, axis=-1) >= delta - tol, axis=-1)
    return np.where(ok[..., None], orig, out)


# ---------------------------------------------------------------------------
# vectorized channel / beam / rate kernels


def _pin_xyz(scenario: Scenario, coords: np.ndarray) -> np.ndarray:
    """3D antenna positions for a batch of placements, coords (..., 2, N)."""
    p = scenario.params
    out = np.empty(coords.shape + (3,), dtype=float)
    out[..., 2] = p.height
    if scenario.layout.variant == PARALLEL:
        out[..., 0] = coords
        out[..., 0, :, 1] = waveguide_offset(scenario.layout, 1, p)
        out[..., 1, :, 1] = waveguide_offset(scenario.layout, 2, p)
    else:
        out[..., 0, :, 0] = 0.0
        out[..., 0, :, 1] = coords[..., 0, :]
        out[..., 1, :, 0] = coords[..., 1, :]
        out[..., 1, :, 1] = 0.0
    return out


def _batch_channels(scenario: Scenario, model: ChannelModel,
                    coords: np.ndarray) -> np.ndarray:
    """Effective channels (B, K+1, 2) for a batch of placements (B, 2, N)."""
    p = scenario.params
    d_in = coords + p.half_size                         # feed at the -D end
    g_in = np.exp(-1j * (2.0 * np.pi / p.guided_wavelength) * d_in)
    if model.attenuation:
        g_in = np.exp(-model.zeta * d_in) * g_in
    pins = _pin_xyz(scenario, coords)                   # (B, 2, N, 3)
    rx = np.vstack([scenario.eve_position[None, :], scenario.lu_positions])
    diff = pins[:, None, :, :, :] - rx[None, :, None, None, :]
    d_fs = np.linalg.norm(diff, axis=-1)                # (B, K+1, 2, N)
    g_fs = np.sqrt(p.eta) * np.exp(-1j * (2.0 * np.pi / p.wavelength) * d_fs) / d_fs
    return np.sum(g_in[:, None, :, :] * g_fs, axis=-1)  # (B, K+1, 2)


def _batch_heuristic_beams(f: np.ndarray, p_max: float, noise: float) -> np.ndarray:
    """Regularized matched-filter beams for channel batch f (B, K+1, 2)."""
    B, K = f.shape[0], f.shape[1] - 1
    fu = f[:, 1:, :]                                    # (B, K, 2)
    c = (p_max / K) / noise
    # M = I + c * sum_k f_k f_k^H   (2x2 Hermitian)
    m11 = 1.0 + c * np.sum(np.abs(fu[..., 0]) ** 2, axis=1)
    m22 = 1.0 + c * np.sum(np.abs(fu[..., 1]) ** 2, axis=1)
    m12 = c * np.sum(fu[..., 0] * np.conj(fu[..., 1]), axis=1)
    det = m11 * m22 - np.abs(m12) ** 2
    u0 = (m22[:, None] * fu[..., 0] - m12[:, None] * fu[..., 1]) / det[:, None]
    u1 = (-np.conj(m12)[:, None] * fu[..., 0] + m11[:, None] * fu[..., 1]) / det[:, None]
    u = np.stack([u0, u1], axis=-1)                     # (B, K, 2)
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    w = np.zeros((B, K + 1, 2), dtype=complex)
    w[:, 1:, :] = np.sqrt(p_max / K) * u / norms
    return w


def _batch_ssr(f: np.ndarray, w: np.ndarray, noise_lu: float,
               noise_eve: float) -> np.ndarray:
    """Secure sum rate for channel batch f and beam batch w, both (B, K+1, 2)."""
    K = f.shape[1] - 1
    z = np.einsum("brl,bjl->brj", np.conj(f), w)
    gains = np.abs(z) ** 2                              # (B, K+1 rx, K+1 beams)
    total_lu = np.sum(gains[:, 1:, :], axis=2)          # (B, K)
    total_eve = np.sum(gains[:, 0, :], axis=1)          # (B,)
    out = np.zeros(f.shape[0])
    for k in range(1, K + 1):
        sig = gains[:, k, k]
        r_lu = np.log2(1.0 + sig / (total_lu[:, k - 1] - sig + noise_lu))
        leak = gains[:, 0, k]
        r_ev = np.log2(1.0 + leak / (total_eve - leak + noise_eve))
        out += np.maximum(r_lu - r_ev, 0.0)
    return out


def _batch_fitness(scenario: Scenario, model: ChannelModel,
                   coords: np.ndarray) -> np.ndarray:
    """SSR fitness of feasible placements (B, 2, N); no artificial noise."""
    p = scenario.params
    f = _batch_channels(scenario, model, coords)
    w = _batch_heuristic_beams(f, p.power_budget, p.noise_lu)
    return _batch_ssr(f, w, p.noise_lu, p.noise_eve)


# ---------------------------------------------------------------------------
# public operations


def heuristic_beams(F: EffectiveChannels, p_max: float, noise: float) -> BeamSet:
    """Equal-power regularized matched-filter beams; AN off, full budget used."""
    if F.num_lus < 1:
        raise ValueError("need at least one user")
    w = _batch_heuristic_beams(F.f[None, :, :], p_max, noise)[0]
    return BeamSet(w=w)


def fitness(candidate: np.ndarray, scenario: Scenario, model: ChannelModel) -> float:
    """Stage-1 fitness: SSR with heuristic beams at the projected candidate."""
    p = scenario.params
    coords = np.asarray(candidate, dtype=float).reshape(2, p.pas_per_waveguide)
    coords = project_feasible(coords, p.half_size, p.guard_distance)
    return float(_batch_fitness(scenario, model, coords[None])[0])


def fixed_baseline_placement(params) -> Placement:
    """N antennas per waveguide centered at the origin with guard spacing."""
    n = params.pas_per_waveguide
    t = (np.arange(1, n + 1) - (n + 1) / 2.0) * params.guard_distance
    return Placement(coords=np.vstack([t, t]))


def _init_centers(scenario: Scenario, mode: str) -> np.ndarray:
    """Per-waveguide initialization centers for the swarm."""
    if mode == "zero":
        return np.zeros(2)
    lus = scenario.lu_positions
    if scenario.layout.variant == PARALLEL:
        cx = float(np.mean(lus[:, 0]))
        return np.array([cx, cx])
    # waveguide 1 moves along y, waveguide 2 along x
    return np.array([float(np.mean(lus[:, 1])), float(np.mean(lus[:, 0]))])


def _result_from_best(scenario: Scenario, model: ChannelModel,
                      coords: np.ndarray, best_fit: float,
                      trace: np.ndarray, evaluations: int) -> PlacementResult:
    p = scenario.params
    f = _batch_channels(scenario, model, coords[None])[0]
    beams = heuristic_beams(EffectiveChannels(f=f), p.power_budget, p.noise_lu)
    return PlacementResult(placement=Placement(coords=coords), stage1_beams=beams,
                           stage1_ssr=float(best_fit), fitness_trace=trace,
                           evaluations=evaluations)


def feapso(scenario: Scenario, model: ChannelModel, cfg: PsoConfig) -> PlacementResult:
    """Particle swarm placement search with feasibility projection.

    One initial particle is always the fixed baseline placement, so the
    result dominates the baseline by construction.  Deterministic given
    (scenario, cfg.seed).
    """
    p = scenario.params
    n = p.pas_per_waveguide
    I = cfg.swarm_size
    rng = np.random.default_rng(cfg.seed)

    centers = _init_centers(scenario, cfg.init_center_mode)
    x = rng.uniform(centers[None, :, None] - cfg.init_spread,
                    centers[None, :, None] + cfg.init_spread,
                    size=(I, 2, n))
    x[0] = fixed_baseline_placement(p).coords
    u = rng.uniform(-cfg.velocity_init_range, cfg.velocity_init_range,
                    size=(I, 2, n))
    x = project_feasible(x, p.half_size, p.guard_distance)
    fit = _batch_fitness(scenario, model, x)
    evaluations = I

    pbest, pbest_fit = x.copy(), fit.copy()
    g = int(np.argmax(fit))
    gbest, gbest_fit = x[g].copy(), float(fit[g])
    trace = [gbest_fit]

    stall = 0
    for _ in range(cfg.max_iters):
        eta1 = rng.uniform(size=(I, 2, n))
        eta2 = rng.uniform(size=(I, 2, n))
        u = (cfg.inertia * u
             + cfg.accel_personal * eta1 * (pbest - x)
             + cfg.accel_global * eta2 * (gbest[None] - x))
        x = project_feasible(x + u, p.half_size, p.guard_distance)
        fit = _batch_fitness(scenario, model, x)
        evaluations += I

        improved = fit > pbest_fit
        pbest[improved] = x[improved]
        pbest_fit[improved] = fit[improved]
        g = int(np.argmax(pbest_fit))
        gain = float(pbest_fit[g]) - gbest_fit
        if pbest_fit[g] > gbest_fit:
            gbest, gbest_fit = pbest[g].copy(), float(pbest_fit[g])
        trace.append(gbest_fit)
        stall = stall + 1 if gain < cfg.stall_tol else 0
        if stall >= cfg.stall_iters:
            break

    return _result_from_best(scenario, model, gbest, gbest_fit,
                             np.asarray(trace), evaluations)


def _grid_tuples(num_points: int, n: int, min_index_gap: int) -> np.ndarray:
    """All ascending index n-tuples with consecutive index gaps >= min_index_gap."""
    if min_index_gap <= 1:
        combos = list(itertools.combinations(range(num_points), n))
    else:
        # shift trick: strictly increasing tuples with gap g map to plain
        # combinations of a shrunk range
        span = num_points - (n - 1) * (min_index_gap - 1)
        if span < n:
            return np.empty((0, n), dtype=int)
        offsets = np.arange(n) * (min_index_gap - 1)
        combos = [tuple(np.asarray(c) + offsets)
                  for c in itertools.combinations(range(span), n)]
    return np.asarray(combos, dtype=int).reshape(-1, n)


def exhaustive_search(scenario: Scenario, model: ChannelModel,
                      spacing: float) -> PlacementResult:
    """Grid search over per-waveguide ascending placements.

    Per-waveguide channel components are precomputed per tuple, so each of
    the T1*T2 combinations only assembles K+1 two-component channels.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    p = scenario.params
    n = p.pas_per_waveguide
    D, delta = p.half_size, p.guard_distance
    grid = -D + spacing * np.arange(int(np.floor(2 * D / spacing + 1e-9)) + 1)
    gap = max(1, math.ceil((delta - 1e-12) / spacing))
    combos = _grid_tuples(len(grid), n, gap)
    if combos.shape[0] == 0:
        raise ValueError("grid admits no feasible placement tuple")

    # per grid point, per waveguide, per receiver channel term
    coords = np.empty((len(grid), 2, 1), dtype=float)
    coords[:, 0, 0] = grid
    coords[:, 1, 0] = grid
    terms = _batch_channels(scenario, model, coords)    # (G, K+1, 2)
    comp = [terms[:, :, l][combos].sum(axis=1) for l in (0, 1)]  # each (T, K+1)

    T = combos.shape[0]
    K1 = terms.shape[1]
    best_fit, best_ij = -np.inf, (0, 0)
    chunk = max(1, 400_000 // T)
    for i0 in range(0, T, chunk):
        i1 = min(i0 + chunk, T)
        m = i1 - i0
        f = np.empty((m * T, K1, 2), dtype=complex)
        f[:, :, 0] = np.repeat(comp[0][i0:i1], T, axis=0)
        f[:, :, 1] = np.tile(comp[1], (m, 1))
        w = _batch_heuristic_beams(f, p.power_budget, p.noise_lu)
        vals = _batch_ssr(f, w, p.noise_lu, p.noise_eve)
        j = int(np.argmax(vals))
        if vals[j] > best_fit:
            best_fit = float(vals[j])
            best_ij = (i0 + j // T, j % T)

    best = np.vstack([grid[combos[best_ij[0]]], grid[combos[best_ij[1]]]])
    return _result_from_best(scenario, model, best, best_fit,
                             np.asarray([best_fit]), T * T)
