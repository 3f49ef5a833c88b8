"""End-to-end acceptance checks.

Each test prints exactly one PASS/FAIL line summarizing the measured
quantities before asserting, so a full run gives a compact scoreboard.
The batch fixtures are session-scoped because they are expensive; the
whole module is a long-running validation suite, not a unit-test file.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from pinchsec.channel import (BeamSet, ChannelModel, effective_channels,
                              ssr as ssr_metric)
from pinchsec.conic import solve
from pinchsec.harness import (ExperimentConfig, mean_field, run_experiment,
                              write_csv)
from pinchsec.placement import (PsoConfig, feapso, fixed_baseline_placement,
                                project_feasible)
from pinchsec.sca import (ScaConfig, _build_subproblem, _extract_beams,
                          _repair_beams, _tight_tildes, init_state,
                          linearization_tightness,
                          original_constraint_violations, sca_optimize,
                          state_vector)
from pinchsec.scenario import (ORTHOGONAL, PARALLEL, WaveguideLayout,
                               derive_params, expected_sq_vertical_distance,
                               sample_scenario)

PHASE = ChannelModel.phase_only()
BATCH = 300
SWEEP_BATCH = 100


def report(name: str, ok: bool, detail: str) -> None:
    print(f"[acceptance] {name}: {'PASS' if ok else 'FAIL'} ({detail})",
          flush=True)
    assert ok, f"{name}: {detail}"


def within(value: float, target: float, rel: float) -> bool:
    return abs(value - target) <= rel * target


# ---------------------------------------------------------------------------
# batch fixtures


@pytest.fixture(scope="session")
def tables_records():
    cfg = ExperimentConfig(experiment="tables", realizations=BATCH,
                           layouts=("parallel", "orthogonal"),
                           optimizers=("feapso", "fixed"),
                           objectives=("ssr", "see"))
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def es_records():
    cfg = ExperimentConfig(experiment="tables", realizations=BATCH,
                           layouts=("parallel",), optimizers=("es",),
                           es_spacing=0.4, objectives=("ssr",))
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def pmax_records():
    cfg = ExperimentConfig(experiment="sweep_pmax",
                           realizations=SWEEP_BATCH, layouts=("parallel",),
                           optimizers=("feapso", "fixed"),
                           objectives=("ssr", "see"))
    return run_experiment(cfg), cfg.sweep_grid or (20.0, 25.0, 30.0,
                                                   35.0, 40.0)


@pytest.fixture(scope="session")
def n_records():
    cfg = ExperimentConfig(experiment="sweep_n", realizations=SWEEP_BATCH,
                           layouts=("parallel",),
                           optimizers=("feapso", "fixed"))
    return run_experiment(cfg), (1, 2, 3, 4)


@pytest.fixture(scope="session")
def zeta_records():
    cfg = ExperimentConfig(experiment="sweep_zeta", realizations=SWEEP_BATCH,
                           layouts=("parallel",), optimizers=("feapso",))
    return run_experiment(cfg), (0.0, 0.01, 0.02, 0.05, 0.1)


def pa_mean(records, field="ssr", **extra):
    return mean_field(records, field, optimizer="feapso", stage="stage2",
                      objective="ssr", **extra)


# ---------------------------------------------------------------------------
# 1-3: average-performance levels and orderings


def test_parallel_average_levels(tables_records):
    s1 = mean_field(tables_records, "ssr", layout="parallel",
                    optimizer="feapso", stage="stage1", objective="ssr")
    s2 = pa_mean(tables_records, layout="parallel")
    leak = mean_field(tables_records, "sum_leakage", layout="parallel",
                      optimizer="feapso", stage="stage2", objective="ssr")
    ok = (within(s1, 20.99, 0.10) and within(s2, 21.84, 0.10)
          and within(leak, 2.03, 0.25))
    report("parallel-average-levels", ok,
           f"stage1 {s1:.3f} vs 20.99+-10%, stage2 {s2:.3f} vs 21.84+-10%, "
           f"leakage {leak:.3f} vs 2.03+-25%")


def test_orthogonal_and_energy_levels(tables_records):
    s2 = pa_mean(tables_records, layout="orthogonal")
    see_o = mean_field(tables_records, "see", layout="orthogonal",
                       optimizer="feapso", stage="stage2", objective="see")
    see_p = mean_field(tables_records, "see", layout="parallel",
                       optimizer="feapso", stage="stage2", objective="see")
    ok = (within(s2, 22.08, 0.10) and within(see_o, 25.85, 0.15)
          and within(see_p, 25.47, 0.15))
    report("orthogonal-and-energy-levels", ok,
           f"stage2 {s2:.3f} vs 22.08+-10%, see orth {see_o:.3f} vs "
           f"25.85+-15%, see par {see_p:.3f} vs 25.47+-15%")


def test_orderings(tables_records, es_records):
    by_key = {}
    for r in tables_records:
        if (r.optimizer == "feapso" and r.objective == "ssr"
                and not r.status.startswith("error")):
            by_key.setdefault((r.scenario_id, r.layout), {})[r.stage] = r.ssr
    worst_gain = min(v["stage2"] - v["stage1"] for v in by_key.values()
                     if len(v) == 2)

    pso_p = pa_mean(tables_records, layout="parallel")
    pso_o = pa_mean(tables_records, layout="orthogonal")
    es_p = mean_field(es_records, "ssr", stage="stage2", objective="ssr")
    fixed = mean_field(tables_records, "ssr", optimizer="fixed",
                       stage="stage2", objective="ssr")
    pso_all = mean_field(tables_records, "ssr", optimizer="feapso",
                         stage="stage2", objective="ssr")
    ok = (worst_gain >= -1e-6 and pso_p >= es_p - 0.2
          and pso_o >= pso_p - 0.1 and pso_all - fixed >= 2.0)
    report("orderings", ok,
           f"worst stage gain {worst_gain:.2e}, swarm {pso_p:.3f} vs "
           f"grid-search {es_p:.3f}, orth {pso_o:.3f} vs par {pso_p:.3f}, "
           f"movable {pso_all:.3f} vs fixed {fixed:.3f}")


# ---------------------------------------------------------------------------
# 4-6: parameter sweeps


def test_power_sweep(pmax_records):
    records, grid = pmax_records
    pa = [pa_mean(records, pmax_dbm=p) for p in grid]
    fixed = [mean_field(records, "ssr", optimizer="fixed", stage="stage2",
                        objective="ssr", pmax_dbm=p) for p in grid]
    sees = [mean_field(records, "see", optimizer="feapso", stage="stage2",
                       objective="see", pmax_dbm=p) for p in grid]
    peak = max(sees)
    tail_ok = all(v >= 0.9 * peak for v in sees[int(np.argmax(sees)):])
    ok = (all(b > a for a, b in zip(pa, pa[1:]))
          and all(p > f for p, f in zip(pa, fixed)) and tail_ok)
    report("power-sweep", ok,
           f"movable {[round(v, 2) for v in pa]}, "
           f"fixed {[round(v, 2) for v in fixed]}, "
           f"see {[round(v, 2) for v in sees]} (peak {peak:.2f})")


def test_antenna_count_sweep(n_records):
    records, grid = n_records
    pa = [pa_mean(records, n=n) for n in grid]
    fixed = [mean_field(records, "ssr", optimizer="fixed", stage="stage2",
                        objective="ssr", n=n) for n in grid]
    spread = (max(fixed) - min(fixed)) / min(fixed)
    ok = all(b >= a for a, b in zip(pa, pa[1:])) and spread < 0.05
    report("antenna-count-sweep", ok,
           f"movable {[round(v, 2) for v in pa]}, fixed spread "
           f"{100 * spread:.2f}% of {[round(v, 2) for v in fixed]}")


def test_attenuation_sweep(zeta_records):
    records, grid = zeta_records
    ref = pa_mean(records, model="phase")
    gaps = [ref - pa_mean(records, model="atten", zeta=z) for z in grid]
    ok = (abs(gaps[0]) <= 1e-9
          and all(b >= a for a, b in zip(gaps, gaps[1:])))
    report("attenuation-sweep", ok,
           f"loss vs lossless {[f'{g:.4f}' for g in gaps]} over zeta {grid}")


# ---------------------------------------------------------------------------
# 7-9: optimizer property suites


def test_projection_suite():
    rng = np.random.default_rng(7)
    D, delta = 10.0, 0.025
    total, feasible = 0, 0
    for n in (1, 2, 3, 4, 5):
        raw = rng.uniform(-30.0, 30.0, size=(20_000, n))
        out = project_feasible(raw, D, delta)
        row_ok = np.all(np.abs(out) <= D + 1e-9, axis=1)
        if n > 1:
            row_ok &= np.all(np.diff(out, axis=1) >= delta - 1e-9, axis=1)
        feasible += int(np.sum(row_ok))
        total += len(raw)
        again = project_feasible(out, D, delta)
        idempotent = np.array_equal(again, out)
        if not idempotent:
            break
    # hand-executed traces of the clamp/sort/slack/reconstruct arithmetic
    t1 = project_feasible(np.array([12.0, -15.0]), D, delta)
    e1 = -D + np.cumsum([0.0, 2 * D - delta]) + delta * np.arange(2)
    t2 = project_feasible(np.array([0.0, 0.0]), D, delta)
    e2 = -D + np.cumsum([D, 0.0]) + delta * np.arange(2)
    traces = np.array_equal(t1, e1) and np.array_equal(t2, e2)
    ok = feasible == total and idempotent and traces
    report("projection-suite", ok,
           f"{feasible}/{total} feasible, idempotent {idempotent}, "
           f"hand traces exact {traces}")


def test_convex_iteration_suite():
    params = derive_params(K=2, N=2, D=10.0, h=3.0, f_c=6e9)
    cfg = ScaConfig()
    t0 = time.perf_counter()
    worst = dict(tight=0.0, orig=0.0, power=0.0, dip=0.0)
    for seed in range(50):
        for variant in (PARALLEL, ORTHOGONAL):
            sc = sample_scenario(params, WaveguideLayout(variant), seed)
            pl = feapso(sc, PHASE, PsoConfig()).placement
            F = effective_channels(sc, pl, PHASE)
            for kind in ("ssr", "see"):
                st = init_state(sc, pl, PHASE, cfg, kind)
                worst["tight"] = max(worst["tight"],
                                     linearization_tightness(st))
                prev = None
                for it in range(cfg.max_iters):
                    sol = solve(_build_subproblem(st), tol=cfg.solver_tol,
                                max_iter=cfg.solver_max_iter)
                    if sol.status != "Optimal":
                        assert it > 0, f"first solve failed: {sol.status}"
                        break
                    w = _extract_beams(sol.x, 2)
                    power = float(np.sum(np.abs(w) ** 2))
                    worst["power"] = max(worst["power"], power - st.p_max)
                    if power > st.p_max:
                        w = w * np.sqrt(st.p_max / power)
                    w = _repair_beams(st.fs, w)
                    st = replace(st, w=w, **_tight_tildes(
                        st.fs, w, kind, st.p_max, st.p_c, cfg.beta_floor))
                    worst["tight"] = max(worst["tight"],
                                         linearization_tightness(st))
                    # the accepted iterate (repaired beams plus their
                    # re-tightened auxiliaries) must stay feasible for
                    # the original nonconvex constraints
                    worst["orig"] = max(
                        worst["orig"],
                        original_constraint_violations(st, state_vector(st)))
                    val = ssr_metric(F, BeamSet(w=w), params.noise_lu,
                                     params.noise_eve)
                    if kind == "see":
                        val /= power + params.circuit_power
                    if prev is not None:
                        worst["dip"] = max(worst["dip"], prev - val)
                        if abs(val - prev) < cfg.rel_tol * max(abs(prev),
                                                               1e-9):
                            break
                    prev = val
    elapsed = time.perf_counter() - t0
    ok = (worst["tight"] <= 1e-9 and worst["orig"] <= 1e-6
          and worst["power"] <= 1e-7 and worst["dip"] <= 1e-6
          and elapsed <= 300.0)
    report("convex-iteration-suite", ok,
           f"tightness {worst['tight']:.2e}, constraint violation "
           f"{worst['orig']:.2e}, power excess {worst['power']:.2e}, "
           f"largest objective dip {worst['dip']:.2e}, {elapsed:.0f}s")


def grid_best_ssr(f, p_max, noise, n_pow=20, n_amp=16, n_phase=24,
                  n_fine=1500):
    """Brute-force secrecy rate over two dense beam grids for one user and
    one antenna per waveguide.

    Grid one sweeps power split, amplitude angle, and relative phase of
    both beams jointly (global phases do not affect any magnitude).  Grid
    two is a full-power, jamming-free slice with the beam written in an
    orthonormal basis aligned with the two channel vectors; there the
    leakage null crosses zero linearly in the grid angles, so a fine mesh
    can actually resolve it against the very low noise floor."""
    c_lu, c_ev = np.conj(f[1]), np.conj(f[0])
    amp = np.linspace(0.0, np.pi / 2, n_amp)[:, None]
    ph = np.exp(1j * np.linspace(0.0, 2 * np.pi, n_phase,
                                 endpoint=False))[None, :]
    def gains(c):
        u = c[0] * np.cos(amp) + c[1] * np.sin(amp) * ph
        return (np.abs(u) ** 2).ravel()
    g_lu, g_ev = gains(c_lu), gains(c_ev)
    levels = np.linspace(0.0, p_max, n_pow)
    best, points = 0.0, 0
    for p_sig in levels:
        for p_an in levels:
            if p_sig + p_an > p_max + 1e-12:
                continue
            sig = p_sig * g_lu[:, None]
            leak = p_sig * g_ev[:, None]
            i_lu = p_an * g_lu[None, :]
            i_ev = p_an * g_ev[None, :]
            val = (np.log2(1.0 + sig / (noise + i_lu))
                   - np.log2(1.0 + leak / (noise + i_ev)))
            best = max(best, float(val.max()))
            points += val.size

    u = f[1] / np.linalg.norm(f[1])
    q = f[0] - np.vdot(u, f[0]) * u
    nq = np.linalg.norm(q)
    q = q / nq if nq > 1e-15 * np.linalg.norm(f[0]) else np.array([-np.conj(u[1]), np.conj(u[0])])
    t = np.linspace(0.0, np.pi / 2, n_fine)[:, None]
    e = np.exp(1j * np.linspace(0.0, 2 * np.pi, n_fine,
                                endpoint=False))[None, :]
    proj = np.vdot(f[1], u) * np.cos(t) + np.vdot(f[1], q) * np.sin(t) * e
    g_fine_lu = np.abs(proj) ** 2
    proj = np.vdot(f[0], u) * np.cos(t) + np.vdot(f[0], q) * np.sin(t) * e
    g_fine_ev = np.abs(proj) ** 2
    val = (np.log2(1.0 + p_max * g_fine_lu / noise)
           - np.log2(1.0 + p_max * g_fine_ev / noise))
    best = max(best, float(val.max()))
    points += val.size
    return max(best, 0.0), points


def test_tiny_instance_optimality():
    params = derive_params(K=1, N=1, D=10.0, h=3.0, f_c=6e9)
    pl = fixed_baseline_placement(params)
    worst_rel, total_points = 0.0, 0
    for seed in range(10):
        sc = sample_scenario(params, WaveguideLayout(PARALLEL), seed)
        F = effective_channels(sc, pl, PHASE)
        res = sca_optimize("ssr", sc, pl, PHASE, ScaConfig())
        oracle, points = grid_best_ssr(F.f, params.power_budget,
                                       params.noise_lu)
        total_points = points
        worst_rel = max(worst_rel, abs(max(res.trace) - oracle) / oracle)
    ok = worst_rel <= 0.02 and total_points >= 1_000_000
    report("tiny-instance-optimality", ok,
           f"worst relative gap {100 * worst_rel:.3f}% over 10 seeds, "
           f"{total_points} grid points each")


# ---------------------------------------------------------------------------
# 10-11: analytics and determinism


def test_distance_analytics():
    rng = np.random.default_rng(11)
    worst = 0.0
    for D in (5.0, 10.0, 20.0):
        for h in (1.0, 3.0, 5.0):
            y = rng.uniform(-D, D, size=10_000_000)
            for variant, offset in ((PARALLEL, -D / 6.0), (ORTHOGONAL, 0.0)):
                mc = float(np.mean((y - offset) ** 2) + h * h)
                exact = expected_sq_vertical_distance(
                    WaveguideLayout(variant), D, h)
                worst = max(worst, abs(mc - exact) / exact)
    ok = worst <= 0.005
    report("distance-analytics", ok,
           f"worst Monte-Carlo deviation {100 * worst:.4f}% over 9 (D, h) "
           f"pairs and both layouts, 1e7 samples each")


def test_csv_determinism(tmp_path):
    base = ExperimentConfig(experiment="tables", realizations=3,
                            layouts=("parallel", "orthogonal"),
                            optimizers=("feapso", "fixed"))
    sweep = ExperimentConfig(experiment="sweep_zeta", realizations=2,
                             layouts=("parallel",), optimizers=("feapso",),
                             sweep_grid=(0.0, 0.05))
    ok = True
    for tag, cfg in (("tables", base), ("sweep", sweep)):
        paths = []
        for run, workers in (("a", 1), ("b", 1), ("c", 3)):
            path = tmp_path / f"{tag}-{run}.csv"
            write_csv(run_experiment(replace(cfg, workers=workers)), path)
            paths.append(path.read_bytes())
        ok = ok and paths[0] == paths[1] == paths[2]
    report("csv-determinism", ok,
           "repeat runs and worker counts 1 vs 3 compared byte for byte")
