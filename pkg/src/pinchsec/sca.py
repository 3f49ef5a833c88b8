"""Stage-2 beamforming and artificial-noise design.

Iteratively solves convex conic restrictions of the secure-sum-rate (SSR)
or secure-energy-efficiency (SEE) problem, linearized at the previous
iterate.  All subproblems are built in noise-normalized units: channels are
divided by their receiver's noise standard deviation so every noise power
becomes 1, which keeps the conic data well scaled.  Beamformers are
unaffected by this normalization.

Variable layout of a subproblem with K users (real variables):

* ``4*(K+1)`` beam variables: Re/Im of both components of w_0 .. w_K;
* per user, 7 auxiliaries ``alpha, beta, a, b, c, d, f`` (rate, leakage and
  their log-domain images);
* for SEE, 3 more per user: ``lam, g, h`` (per-user efficiency and the
  log-domain images of its numerator bound and total power).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (BeamSet, ChannelModel, EffectiveChannels,
                      effective_channels, see as see_metric, ssr as ssr_metric)
from .conic import EXP, NONNEG, SOC, ConeBlock, ConicProblem, solve
from .placement import heuristic_beams
from .scenario import Placement, Scenario

LN2 = float(np.log(2.0))

SSR = "ssr"
SEE = "see"

_LEAK_FLOOR = 1e-15
_LAM_FLOOR = 1e-12


class ScaNumericalError(RuntimeError):
    """Raised when the conic solver fails on a subproblem."""


@dataclass(frozen=True)
class ScaConfig:
    max_iters: int = 30
    rel_tol: float = 1e-4
    beta_floor: float = 1e-6
    an_init_fraction: float = 0.05
    solver_tol: float = 1e-8
    solver_max_iter: int = 200

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not 0.0 <= self.an_init_fraction < 1.0:
            raise ValueError("an_init_fraction must be in [0, 1)")


@dataclass(frozen=True)
class ScaState:
    """Expansion point of one SCA iteration, in noise-normalized units."""

    fs: np.ndarray        # (K+1, 2) noise-normalized channels, Eve first
    w: np.ndarray         # (K+1, 2) current beams
    alpha_t: np.ndarray   # (K,) user rates at the expansion point
    beta_t: np.ndarray    # (K,) leakage rates (floored away from zero)
    a_t: np.ndarray       # log(2^alpha - 1)
    b_t: np.ndarray       # log(LU interference + 1)
    c_t: np.ndarray       # log(2^beta - 1)
    d_t: np.ndarray       # log(Eve interference + 1)
    f_t: np.ndarray       # log(own-signal leakage power, floored)
    p_max: float
    p_c: float
    kind: str             # "ssr" or "see"
    lam_t: np.ndarray | None = None
    g_t: np.ndarray | None = None
    h_t: np.ndarray | None = None
    iteration: int = 0

    @property
    def num_lus(self) -> int:
        return self.fs.shape[0] - 1


@dataclass(frozen=True)
class ScaResult:
    beams: BeamSet
    trace: np.ndarray     # true objective per iteration, entry 0 = start
    status: str           # "Optimal" or "IterLimit"
    iterations: int


# ---------------------------------------------------------------------------
# expansion-point bookkeeping


def _scaled_channels(F: EffectiveChannels, noise_lu: float,
                     noise_eve: float) -> np.ndarray:
    fs = F.f.copy()
    fs[0] /= np.sqrt(noise_eve)
    fs[1:] /= np.sqrt(noise_lu)
    return fs


def _link_stats(fs: np.ndarray, w: np.ndarray):
    """Signal/interference powers in normalized units (noise = 1)."""
    z = np.einsum("rl,jl->rj", np.conj(fs), w)
    gains = np.abs(z) ** 2
    K = fs.shape[0] - 1
    ks = np.arange(1, K + 1)
    sig = gains[ks, ks]
    intf = np.sum(gains[1:], axis=1) - sig + 1.0
    leak = gains[0, ks]
    intf0 = np.sum(gains[0]) - leak + 1.0
    return sig, intf, leak, intf0


def _tight_tildes(fs: np.ndarray, w: np.ndarray, kind: str, p_max: float,
                  p_c: float, beta_floor: float) -> dict:
    """Auxiliary values that make every linearized constraint tight at (fs, w)."""
    sig, intf, leak, intf0 = _link_stats(fs, w)
    r_lu = np.log2(1.0 + sig / intf)
    r_ev = np.log2(1.0 + leak / intf0)
    beta_t = np.maximum(np.maximum(r_ev, np.minimum(beta_floor, r_lu / 2.0)), 1e-12)
    alpha_t = np.maximum(r_lu, beta_t)
    out = {
        "alpha_t": alpha_t,
        "beta_t": beta_t,
        "a_t": np.log(np.expm1(alpha_t * LN2)),
        "b_t": np.log(intf),
        "c_t": np.log(np.expm1(beta_t * LN2)),
        "d_t": np.log(intf0),
        "f_t": np.log(np.maximum(leak, _LEAK_FLOOR)),
    }
    if kind == SEE:
        denom = float(np.sum(np.abs(w) ** 2)) + p_c
        lam = np.maximum((alpha_t - beta_t) / denom, _LAM_FLOOR)
        out["lam_t"] = lam
        out["g_t"] = np.log(lam)
        out["h_t"] = np.full_like(lam, np.log(denom))
    else:
        out["lam_t"] = out["g_t"] = out["h_t"] = None
    return out


def _eve_null_direction(f0: np.ndarray) -> np.ndarray:
    """Unit vector u with f0^H u = 0 (2-dim channel)."""
    u = np.array([np.conj(f0[1]), -np.conj(f0[0])])
    return u / np.linalg.norm(u)


def _repair_beams(fs: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Ensure every user has positive secrecy at the expansion point.

    Users whose leakage rate reaches their own rate get their beam projected
    into the eavesdropper's null space (power preserved); the log-domain
    reformulation needs a strictly positive per-user secrecy margin.
    """
    w = w.copy()
    K = fs.shape[0] - 1
    f0 = fs[0]
    nf0 = float(np.linalg.norm(f0) ** 2)
    for _ in range(2):
        sig, intf, leak, intf0 = _link_stats(fs, w)
        bad = np.log2(1 + sig / intf) <= np.log2(1 + leak / intf0)
        if not np.any(bad):
            break
        for k in np.flatnonzero(bad) + 1:
            power = np.linalg.norm(w[k])
            if power == 0.0:
                continue
            proj = w[k] - f0 * (np.vdot(f0, w[k]) / nf0)
            norm = np.linalg.norm(proj)
            if norm < 1e-12 * power:
                proj = _eve_null_direction(f0)
                norm = 1.0
            w[k] = proj / norm * power
    return w


def init_state(scenario: Scenario, placement: Placement, model: ChannelModel,
               cfg: ScaConfig, objective_kind: str) -> ScaState:
    """Starting expansion point: scaled stage-1 beams plus a small
    Eve-aligned artificial-noise component, auxiliaries set tight."""
    if objective_kind not in (SSR, SEE):
        raise ValueError("objective_kind must be 'ssr' or 'see'")
    p = scenario.params
    F = effective_channels(scenario, placement, model)
    fs = _scaled_channels(F, p.noise_lu, p.noise_eve)
    w = heuristic_beams(F, p.power_budget, p.noise_lu).w.copy()
    rho = cfg.an_init_fraction
    w[1:] *= np.sqrt(1.0 - rho)
    if rho > 0.0:
        w[0] = np.sqrt(rho * p.power_budget) * fs[0] / np.linalg.norm(fs[0])
    w = _repair_beams(fs, w)
    tld = _tight_tildes(fs, w, objective_kind, p.power_budget, p.circuit_power,
                        cfg.beta_floor)
    return ScaState(fs=fs, w=w, p_max=p.power_budget, p_c=p.circuit_power,
                    kind=objective_kind, **tld)


def state_vector(state: ScaState) -> np.ndarray:
    """Expansion point assembled as a subproblem variable vector."""
    K = state.num_lus
    x = np.zeros(_num_vars(K, state.kind))
    x[:4 * (K + 1)] = np.column_stack(
        [state.w.real[:, 0], state.w.imag[:, 0],
         state.w.real[:, 1], state.w.imag[:, 1]]).ravel()
    aux = np.column_stack([state.alpha_t, state.beta_t, state.a_t, state.b_t,
                           state.c_t, state.d_t, state.f_t]).ravel()
    x[4 * (K + 1):4 * (K + 1) + 7 * K] = aux
    if state.kind == SEE:
        x[4 * (K + 1) + 7 * K:] = np.column_stack(
            [state.lam_t, state.g_t, state.h_t]).ravel()
    return x


# ---------------------------------------------------------------------------
# subproblem construction


def _num_vars(K: int, kind: str) -> int:
    return 4 * (K + 1) + 7 * K + (3 * K if kind == SEE else 0)


def _aux(K: int, k: int, name: str) -> int:
    names = ("alpha", "beta", "a", "b", "c", "d", "f")
    return 4 * (K + 1) + 7 * (k - 1) + names.index(name)


def _aux_see(K: int, k: int, name: str) -> int:
    names = ("lam", "g", "h")
    return 4 * (K + 1) + 7 * K + 3 * (k - 1) + names.index(name)


def _fhw_rows(n: int, f: np.ndarray, j: int) -> np.ndarray:
    """Rows computing (Re, Im) of f^H w_j over the real variable vector."""
    rows = np.zeros((2, n))
    for l in range(2):
        ir, ii = 4 * j + 2 * l, 4 * j + 2 * l + 1
        rows[0, ir], rows[0, ii] = f[l].real, f[l].imag
        rows[1, ir], rows[1, ii] = -f[l].imag, f[l].real
    return rows


def _exp_block(n, u_row, u_const, w_row, w_const) -> ConeBlock:
    """e^(u) <= w with u, w affine: (u, 1, w) in the exponential cone.

    The block is rescaled so its constant term is O(1): e^u <= w is
    equivalent to e^(u - ln s) <= w / s, which keeps the conic data well
    conditioned when w's linearization constants are huge.
    """
    s = max(abs(w_const), 1.0)
    A = np.zeros((3, n))
    b = np.zeros(3)
    A[0], b[0] = u_row, u_const - np.log(s)
    b[1] = 1.0
    A[2], b[2] = w_row / s, w_const / s
    return ConeBlock(EXP, A, b)


def _soc_quad_block(n, y_rows, t_row, t_const) -> ConeBlock:
    """||y||^2 <= t with y, t affine (y homogeneous): SOC of dim len(y)+2.

    Rescaled by the constant's magnitude (||y||^2 <= t iff
    ||y/sqrt(s)||^2 <= t/s) for conditioning.
    """
    s = max(abs(t_const), 1.0)
    m = y_rows.shape[0]
    A = np.zeros((m + 2, n))
    b = np.zeros(m + 2)
    A[0], b[0] = t_row / s, t_const / s + 1.0
    A[1:m + 1] = 2.0 * y_rows / np.sqrt(s)
    A[m + 1], b[m + 1] = t_row / s, t_const / s - 1.0
    return ConeBlock(SOC, A, b)


def _var_names(K: int, kind: str):
    names = []
    for k in range(K + 1):
        for l in (1, 2):
            names += [f"w{k}_{l}_re", f"w{k}_{l}_im"]
    for k in range(1, K + 1):
        names += [f"{s}_{k}" for s in ("alpha", "beta", "a", "b", "c", "d", "f")]
    if kind == SEE:
        for k in range(1, K + 1):
            names += [f"{s}_{k}" for s in ("lam", "g", "h")]
    return tuple(names)


def _build_subproblem(state: ScaState) -> ConicProblem:
    K = state.num_lus
    kind = state.kind
    n = _num_vars(K, kind)
    fs = state.fs
    ztil = np.einsum("rl,jl->rj", np.conj(fs), state.w)  # f_r^H w_j at w~
    blocks = []

    def row(idx, coef=1.0):
        r = np.zeros(n)
        r[idx] = coef
        return r

    for k in range(1, K + 1):
        ia, ib = _aux(K, k, "alpha"), _aux(K, k, "beta")
        iA, iB = _aux(K, k, "a"), _aux(K, k, "b")
        ic, id_, if_ = _aux(K, k, "c"), _aux(K, k, "d"), _aux(K, k, "f")
        at, bt = state.a_t[k - 1], state.b_t[k - 1]
        bett, ft = state.beta_t[k - 1], state.f_t[k - 1]
        ea, eb, ef = np.exp(at), np.exp(bt), np.exp(ft)
        others = [j for j in range(K + 1) if j != k]

        # 2^alpha - 1 <= e^at (1 + a - at)
        blocks.append(_exp_block(
            n, row(ia, LN2), 0.0, row(iA, ea), ea * (1.0 - at) + 1.0))
        # sum_{j != k} |f_k^H w_j|^2 + 1 <= e^bt (1 + b - bt)
        y = np.vstack([_fhw_rows(n, fs[k], j) for j in others])
        blocks.append(_soc_quad_block(n, y, row(iB, eb), eb * (1.0 - bt) - 1.0))
        # e^c + 1 <= 2^bett + 2^bett ln2 (beta - bett)
        tb = 2.0 ** bett
        blocks.append(_exp_block(
            n, row(ic), 0.0, row(ib, tb * LN2), tb * (1.0 - LN2 * bett) - 1.0))
        # e^d <= linearized Eve interference + 1
        w_row = np.zeros(n)
        w_const = 1.0
        for j in others:
            rj = _fhw_rows(n, fs[0], j)
            zt = ztil[0, j]
            w_row += 2.0 * (zt.real * rj[0] + zt.imag * rj[1])
            w_const -= np.abs(zt) ** 2
        blocks.append(_exp_block(n, row(id_), 0.0, w_row, w_const))
        # e^(a+b) <= linearized |f_k^H w_k|^2
        rk = _fhw_rows(n, fs[k], k)
        zt = ztil[k, k]
        blocks.append(_exp_block(
            n, row(iA) + row(iB), 0.0,
            2.0 * (zt.real * rk[0] + zt.imag * rk[1]), -np.abs(zt) ** 2))
        # |f_0^H w_k|^2 <= e^ft (1 + f - ft)
        blocks.append(_soc_quad_block(
            n, _fhw_rows(n, fs[0], k), row(if_, ef), ef * (1.0 - ft)))

    for k in range(1, K + 1):
        # c + d >= f  and  alpha >= beta
        r = row(_aux(K, k, "c")) + row(_aux(K, k, "d")) - row(_aux(K, k, "f"))
        blocks.append(ConeBlock(NONNEG, r[None, :], np.zeros(1)))
        r = row(_aux(K, k, "alpha")) - row(_aux(K, k, "beta"))
        blocks.append(ConeBlock(NONNEG, r[None, :], np.zeros(1)))

    # total power budget: one SOC of dimension 4(K+1)+1
    nw = 4 * (K + 1)
    A = np.zeros((nw + 1, n))
    A[1:, :nw] = np.eye(nw)
    b = np.zeros(nw + 1)
    b[0] = np.sqrt(state.p_max)
    blocks.append(ConeBlock(SOC, A, b))

    if kind == SEE:
        for k in range(1, K + 1):
            il, ig, ih = (_aux_see(K, k, s) for s in ("lam", "g", "h"))
            gt, ht = state.g_t[k - 1], state.h_t[k - 1]
            eg, eh = np.exp(gt), np.exp(ht)
            # lam <= e^gt (1 + g - gt)
            r = row(ig, eg) - row(il)
            blocks.append(ConeBlock(NONNEG, r[None, :],
                                    np.array([eg * (1.0 - gt)])))
            # sum ||w||^2 <= e^ht (1 + h - ht) - P_C
            y = np.zeros((nw, n))
            y[:, :nw] = np.eye(nw)
            blocks.append(_soc_quad_block(
                n, y, row(ih, eh), eh * (1.0 - ht) - state.p_c))
            # e^(g+h) <= alpha - beta
            blocks.append(_exp_block(
                n, row(ig) + row(ih), 0.0,
                row(_aux(K, k, "alpha")) - row(_aux(K, k, "beta")), 0.0))

    c = np.zeros(n)
    if kind == SSR:
        for k in range(1, K + 1):
            c[_aux(K, k, "alpha")] = 1.0
            c[_aux(K, k, "beta")] = -1.0
    else:
        for k in range(1, K + 1):
            c[_aux_see(K, k, "lam")] = 1.0
    return ConicProblem(num_vars=n, objective=c, blocks=blocks,
                        var_names=_var_names(K, kind))


def build_ssr_subproblem(state: ScaState) -> ConicProblem:
    if state.kind != SSR:
        raise ValueError("state was initialized for a different objective")
    return _build_subproblem(state)


def build_see_subproblem(state: ScaState) -> ConicProblem:
    if state.kind != SEE:
        raise ValueError("state was initialized for a different objective")
    return _build_subproblem(state)


def _extract_beams(x: np.ndarray, K: int) -> np.ndarray:
    wv = x[:4 * (K + 1)].reshape(K + 1, 2, 2)
    return wv[:, :, 0] + 1j * wv[:, :, 1]


# ---------------------------------------------------------------------------
# diagnostics used by the test-suite


def linearization_tightness(state: ScaState) -> float:
    """Largest gap between a linearized term and its exact counterpart at
    the expansion point (zero in exact arithmetic, floors aside)."""
    sig, intf, leak, intf0 = _link_stats(state.fs, state.w)
    gaps = [
        np.abs(np.exp(state.a_t) - np.expm1(state.alpha_t * LN2)),
        np.abs(np.exp(state.b_t) - intf),
        np.abs(2.0 ** state.beta_t - (np.exp(state.c_t) + 1.0)),
        np.abs(np.exp(state.d_t) - intf0),
        np.abs(np.exp(state.f_t) - np.maximum(leak, _LEAK_FLOOR)),
    ]
    if state.kind == SEE:
        denom = float(np.sum(np.abs(state.w) ** 2)) + state.p_c
        gaps.append(np.abs(np.exp(state.g_t) - state.lam_t))
        gaps.append(np.abs(np.exp(state.h_t) - denom))
    return float(max(np.max(g) for g in gaps))


def original_constraint_violations(state: ScaState, x: np.ndarray) -> float:
    """Worst violation of the exact (pre-linearization) constraint system at
    a subproblem variable vector, in normalized units."""
    K = state.num_lus
    w = _extract_beams(x, K)
    sig, intf, leak, intf0 = _link_stats(state.fs, w)
    viol = [float(np.sum(np.abs(w) ** 2)) - state.p_max]
    for k in range(1, K + 1):
        al = x[_aux(K, k, "alpha")]
        be = x[_aux(K, k, "beta")]
        a, b = x[_aux(K, k, "a")], x[_aux(K, k, "b")]
        c, d = x[_aux(K, k, "c")], x[_aux(K, k, "d")]
        f = x[_aux(K, k, "f")]
        i = k - 1
        viol += [
            np.expm1(al * LN2) - np.exp(a),      # e^a >= 2^alpha - 1
            intf[i] - np.exp(b),                 # e^b >= interference
            np.exp(c) - np.expm1(be * LN2),      # e^c <= 2^beta - 1
            np.exp(d) - intf0[i],                # e^d <= Eve interference
            f - c - d,                           # c + d >= f
            np.exp(a + b) - sig[i],              # |f_k^H w_k|^2 >= e^(a+b)
            leak[i] - np.exp(f),                 # |f_0^H w_k|^2 <= e^f
            be - al,                             # alpha >= beta
        ]
        if state.kind == SEE:
            lam = x[_aux_see(K, k, "lam")]
            g, h = x[_aux_see(K, k, "g")], x[_aux_see(K, k, "h")]
            denom = float(np.sum(np.abs(w) ** 2)) + state.p_c
            viol += [lam - np.exp(g), denom - np.exp(h),
                     np.exp(g + h) - (al - be)]
    return float(max(max(viol), 0.0))


# ---------------------------------------------------------------------------
# driver


def sca_optimize(objective_kind: str, scenario: Scenario, placement: Placement,
                 model: ChannelModel, cfg: ScaConfig | None = None) -> ScaResult:
    """Run the convex-approximation loop; returns the best iterate's beams.

    The trace records the true objective (recomputed from the channel
    module, never the surrogate).  Solver iteration limits return the best
    previous iterate with status IterLimit; numerical failures raise
    :class:`ScaNumericalError`.
    """
    cfg = cfg or ScaConfig()
    p = scenario.params
    if p.power_budget == 0.0:
        zero = BeamSet(w=np.zeros((p.num_lus + 1, 2), dtype=complex))
        return ScaResult(beams=zero, trace=np.zeros(1), status="Optimal",
                         iterations=0)
    F = effective_channels(scenario, placement, model)

    def true_obj(w: np.ndarray) -> float:
        beams = BeamSet(w=w)
        if objective_kind == SSR:
            return ssr_metric(F, beams, p.noise_lu, p.noise_eve)
        return see_metric(F, beams, p.noise_lu, p.noise_eve, p.circuit_power)

    state = init_state(scenario, placement, model, cfg, objective_kind)
    best_w, best_val = state.w, true_obj(state.w)
    if objective_kind == SSR:
        # the full-power stage-1 beams are always an admissible fallback
        hw = heuristic_beams(F, p.power_budget, p.noise_lu).w
        hv = true_obj(hw)
        if hv > best_val:
            best_w, best_val = hw, hv

    trace = [true_obj(state.w)]
    status = "Optimal"
    prev = trace[0]
    for it in range(cfg.max_iters):
        prob = _build_subproblem(state)
        sol = solve(prob, tol=cfg.solver_tol, max_iter=cfg.solver_max_iter)
        if sol.status in ("NumericalFailure", "Infeasible", "Unbounded"):
            if it == 0:
                raise ScaNumericalError(
                    f"subproblem solve failed with status {sol.status}")
            # a late-iteration breakdown falls back on the best iterate so
            # far; only a failure with no successful iterate is fatal
            status = "IterLimit"
            break
        if sol.status == "IterLimit":
            status = "IterLimit"
            break
        w_new = _extract_beams(sol.x, state.num_lus)
        power = float(np.sum(np.abs(w_new) ** 2))
        if power > state.p_max:
            w_new = w_new * np.sqrt(state.p_max / power)
        w_new = _repair_beams(state.fs, w_new)
        tld = _tight_tildes(state.fs, w_new, state.kind, state.p_max,
                            state.p_c, cfg.beta_floor)
        state = replace(state, w=w_new, iteration=state.iteration + 1, **tld)
        val = true_obj(w_new)
        trace.append(val)
        if val > best_val:
            best_w, best_val = w_new, val
        if abs(val - prev) < cfg.rel_tol * max(abs(prev), 1e-9):
            break
        prev = val

    return ScaResult(beams=BeamSet(w=best_w), trace=np.asarray(trace),
                     status=status, iterations=len(trace) - 1)
