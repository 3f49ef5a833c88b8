"""Batch experiment execution, statistics, and CSV persistence.

An experiment is a list of independent per-scenario tasks (one task per
realization x layout x model x optimizer x grid point).  Tasks run in a
process pool; results are collected in submission order and then sorted by
a total key, so the output CSV is byte-identical regardless of worker
count.  Wall-clock timing is not recorded by default for the same reason
(the ``wall_ms`` column is kept at 0 unless timing is explicitly enabled).
"""

from __future__ import annotations

import csv
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import (BeamSet, ChannelModel, effective_channels, rate_eve,
                      rate_lu, see as see_metric, ssr as ssr_metric)
from .placement import (PsoConfig, exhaustive_search, feapso,
                        fixed_baseline_placement, heuristic_beams)
from .scenario import (ORTHOGONAL, PARALLEL, Placement, Scenario,
                       WaveguideLayout, derive_params, sample_scenario)
from .sca import ScaConfig, ScaNumericalError, sca_optimize

EXPERIMENTS = ("tables", "cdf", "sweep_pmax", "sweep_n", "sweep_zeta",
               "special_in_front", "single")

CSV_HEADER = ("scenario_id,layout,model,zeta,K,N,pmax_dbm,optimizer,stage,"
              "objective,sum_rate,sum_leakage,ssr,see,beam_power_w,sca_iters,"
              "wall_ms,status")

DEFAULT_PMAX_GRID = (20.0, 25.0, 30.0, 35.0, 40.0)
DEFAULT_N_GRID = (1, 2, 3, 4)
DEFAULT_ZETA_GRID = (0.0, 0.01, 0.02, 0.05, 0.1)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str = "tables"
    realizations: int = 300
    layouts: tuple = (PARALLEL, ORTHOGONAL)
    model: str = "phase"            # "phase" or "atten"
    zetas: tuple = (0.0,)
    optimizers: tuple = ("feapso", "fixed")
    es_spacing: float = 0.4
    objectives: tuple = ("ssr",)
    pso: PsoConfig = field(default_factory=PsoConfig)
    sca: ScaConfig = field(default_factory=ScaConfig)
    sweep_grid: tuple = ()
    seed_base: int = 0
    out_path: str = "results.csv"
    workers: int = 1
    num_lus: int = 2
    pas_per_waveguide: int = 2
    half_size: float = 10.0
    height: float = 3.0
    carrier_freq: float = 6e9
    noise_dbm: float = -70.0
    pmax_dbm: float = 30.0
    pc_dbm: float = 20.0
    eve_mode: str = "uniform"
    record_timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.realizations < 1:
            raise ValueError("realizations must be >= 1")
        if not self.layouts or any(v not in (PARALLEL, ORTHOGONAL)
                                   for v in self.layouts):
            raise ValueError("layouts must be a non-empty subset of "
                             "{parallel, orthogonal}")
        if self.model not in ("phase", "atten"):
            raise ValueError("model must be 'phase' or 'atten'")
        for opt in self.optimizers:
            if opt not in ("feapso", "es", "fixed"):
                raise ValueError(f"unknown optimizer {opt!r}")
        for obj in self.objectives:
            if obj not in ("ssr", "see"):
                raise ValueError(f"unknown objective {obj!r}")
        if self.sweep_grid and list(self.sweep_grid) != sorted(self.sweep_grid):
            raise ValueError("sweep grid must be sorted")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class RunRecord:
    scenario_id: int
    layout: str
    model: str
    zeta: float
    k: int
    n: int
    pmax_dbm: float
    optimizer: str
    stage: str            # "stage1" or "stage2"
    objective: str        # "ssr" or "see"
    sum_rate: float
    sum_leakage: float
    ssr: float
    see: float
    beam_power_w: float
    sca_iters: int
    wall_ms: float
    status: str


@dataclass(frozen=True)
class TaskSpec:
    """One unit of work: a full stage-1 + stage-2 pipeline run."""

    scenario_id: int
    seed: int
    layout: str
    model: str
    zeta: float
    optimizer: str
    es_spacing: float
    objectives: tuple
    pso: PsoConfig
    sca: ScaConfig
    num_lus: int
    pas_per_waveguide: int
    half_size: float
    height: float
    carrier_freq: float
    noise_dbm: float
    pmax_dbm: float
    pc_dbm: float
    eve_mode: str
    record_timing: bool


def _channel_model(model: str, zeta: float) -> ChannelModel:
    if model == "phase":
        return ChannelModel.phase_only()
    return ChannelModel.with_attenuation(zeta)


def _metrics(scenario: Scenario, placement: Placement, model: ChannelModel,
             beams: BeamSet) -> dict:
    p = scenario.params
    F = effective_channels(scenario, placement, model)
    sum_rate = sum(rate_lu(F, beams, k, p.noise_lu)
                   for k in range(1, p.num_lus + 1))
    sum_leak = sum(rate_eve(F, beams, k, p.noise_eve)
                   for k in range(1, p.num_lus + 1))
    return {
        "sum_rate": sum_rate,
        "sum_leakage": sum_leak,
        "ssr": ssr_metric(F, beams, p.noise_lu, p.noise_eve),
        "see": see_metric(F, beams, p.noise_lu, p.noise_eve, p.circuit_power),
        "beam_power_w": beams.total_power,
    }


def run_task(task: TaskSpec) -> list:
    """Run stage 1 (placement + heuristic beams) and stage 2 (SCA) for one
    scenario; failures are turned into error records, never exceptions."""
    params = derive_params(
        K=task.num_lus, N=task.pas_per_waveguide, D=task.half_size,
        h=task.height, f_c=task.carrier_freq, noise_dbm=task.noise_dbm,
        p_max_dbm=task.pmax_dbm, p_c_dbm=task.pc_dbm)
    layout = WaveguideLayout(task.layout)
    scenario = sample_scenario(params, layout, task.seed, task.eve_mode)
    model = _channel_model(task.model, task.zeta)

    base = dict(scenario_id=task.scenario_id, layout=task.layout,
                model=task.model, zeta=task.zeta, k=params.num_lus,
                n=params.pas_per_waveguide, pmax_dbm=task.pmax_dbm,
                optimizer=_optimizer_tag(task))

    def error_records(exc: Exception) -> list:
        nan = float("nan")
        return [RunRecord(stage=stage, objective=obj, sum_rate=nan,
                          sum_leakage=nan, ssr=nan, see=nan, beam_power_w=nan,
                          sca_iters=0, wall_ms=0.0,
                          status=f"error:{type(exc).__name__}", **base)
                for obj in task.objectives for stage in ("stage1", "stage2")]

    t0 = time.perf_counter()
    try:
        if task.optimizer == "feapso":
            placement = feapso(scenario, model, task.pso).placement
        elif task.optimizer == "es":
            placement = exhaustive_search(scenario, model,
                                          task.es_spacing).placement
        else:
            placement = fixed_baseline_placement(params)
        F = effective_channels(scenario, placement, model)
        beams1 = heuristic_beams(F, params.power_budget, params.noise_lu)
        m1 = _metrics(scenario, placement, model, beams1)
    except Exception as exc:  # pragma: no cover - defensive
        return error_records(exc)
    stage1_ms = (time.perf_counter() - t0) * 1e3 if task.record_timing else 0.0

    records = []
    for obj in task.objectives:
        records.append(RunRecord(stage="stage1", objective=obj, sca_iters=0,
                                 wall_ms=stage1_ms, status="ok", **base, **m1))
        t1 = time.perf_counter()
        try:
            result = sca_optimize(obj, scenario, placement, model, task.sca)
            m2 = _metrics(scenario, placement, model, result.beams)
            ms = (time.perf_counter() - t1) * 1e3 if task.record_timing else 0.0
            records.append(RunRecord(stage="stage2", objective=obj,
                                     sca_iters=result.iterations, wall_ms=ms,
                                     status=result.status, **base, **m2))
        except ScaNumericalError as exc:
            nan = float("nan")
            records.append(RunRecord(stage="stage2", objective=obj,
                                     sum_rate=nan, sum_leakage=nan, ssr=nan,
                                     see=nan, beam_power_w=nan, sca_iters=0,
                                     wall_ms=0.0,
                                     status=f"error:{type(exc).__name__}",
                                     **base))
    return records


def _optimizer_tag(task: TaskSpec) -> str:
    if task.optimizer == "es":
        return f"es-{task.es_spacing:g}"
    return task.optimizer


def build_tasks(cfg: ExperimentConfig) -> list:
    """Expand a configuration into its full ordered task list."""
    common = dict(es_spacing=cfg.es_spacing, objectives=tuple(cfg.objectives),
                  pso=cfg.pso, sca=cfg.sca, num_lus=cfg.num_lus,
                  half_size=cfg.half_size, height=cfg.height,
                  carrier_freq=cfg.carrier_freq, noise_dbm=cfg.noise_dbm,
                  pc_dbm=cfg.pc_dbm, record_timing=cfg.record_timing)
    eve_mode = "in_front" if cfg.experiment == "special_in_front" else cfg.eve_mode

    def make(i, layout, opt, *, model=None, zeta=None, n=None, pmax=None):
        if model is None:
            model = cfg.model
            zeta = cfg.zetas[0] if cfg.model == "atten" else 0.0
        return TaskSpec(scenario_id=i, seed=cfg.seed_base + i, layout=layout,
                        model=model, zeta=zeta, optimizer=opt,
                        pas_per_waveguide=n or cfg.pas_per_waveguide,
                        pmax_dbm=pmax if pmax is not None else cfg.pmax_dbm,
                        eve_mode=eve_mode, **common)

    tasks = []
    if cfg.experiment in ("tables", "cdf", "special_in_front", "single"):
        for i in range(cfg.realizations):
            for layout in cfg.layouts:
                for opt in cfg.optimizers:
                    tasks.append(make(i, layout, opt))
    elif cfg.experiment == "sweep_pmax":
        grid = cfg.sweep_grid or DEFAULT_PMAX_GRID
        for pmax in grid:
            for i in range(cfg.realizations):
                for layout in cfg.layouts:
                    for opt in cfg.optimizers:
                        tasks.append(make(i, layout, opt, pmax=float(pmax)))
    elif cfg.experiment == "sweep_n":
        grid = cfg.sweep_grid or DEFAULT_N_GRID
        for n in grid:
            for i in range(cfg.realizations):
                for layout in cfg.layouts:
                    for opt in cfg.optimizers:
                        tasks.append(make(i, layout, opt, n=int(n)))
    else:  # sweep_zeta
        grid = cfg.sweep_grid or DEFAULT_ZETA_GRID
        for i in range(cfg.realizations):
            for layout in cfg.layouts:
                for opt in cfg.optimizers:
                    tasks.append(make(i, layout, opt, model="phase", zeta=0.0))
                    for z in grid:
                        tasks.append(make(i, layout, opt, model="atten",
                                          zeta=float(z)))
    return tasks


def _sort_key(r: RunRecord):
    return (r.scenario_id, r.layout, r.model, r.zeta, r.k, r.n, r.pmax_dbm,
            r.optimizer, r.stage, r.objective)


def run_experiment(cfg: ExperimentConfig) -> list:
    """Execute all tasks and return records in a worker-count-independent
    total order."""
    tasks = build_tasks(cfg)
    if cfg.workers == 1:
        batches = [run_task(t) for t in tasks]
    else:
        chunk = max(1, len(tasks) // (cfg.workers * 4))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            batches = list(pool.map(run_task, tasks, chunksize=chunk))
    records = [r for batch in batches for r in batch]
    records.sort(key=_sort_key)
    return records


# ---------------------------------------------------------------------------
# statistics


def empirical_cdf(values) -> list:
    """Step CDF: probability i/n at the i-th order statistic."""
    vals = sorted(float(v) for v in values)
    if not vals:
        raise ValueError("empirical_cdf needs at least one value")
    n = len(vals)
    return [(v, (i + 1) / n) for i, v in enumerate(vals)]


def filter_records(records, **criteria) -> list:
    """Records matching all the given field equalities, failures excluded."""
    out = []
    for r in records:
        if r.status.startswith("error"):
            continue
        if all(getattr(r, k) == v for k, v in criteria.items()):
            out.append(r)
    return out


def mean_field(records, field_name: str, **criteria) -> float:
    sel = filter_records(records, **criteria)
    if not sel:
        raise ValueError(f"no records match {criteria}")
    return float(np.mean([getattr(r, field_name) for r in sel]))


# ---------------------------------------------------------------------------
# CSV persistence


_INT_FIELDS = {"scenario_id", "k", "n", "sca_iters"}
_FLOAT_FIELDS = {"zeta", "pmax_dbm", "sum_rate", "sum_leakage", "ssr", "see",
                 "beam_power_w", "wall_ms"}


def _fmt(name: str, value) -> str:
    if name in _INT_FIELDS:
        return str(int(value))
    if name in _FLOAT_FIELDS:
        return f"{float(value):.6g}"
    return str(value)


def write_csv(records, path) -> None:
    names = [f.name for f in fields(RunRecord)]
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for r in sorted(records, key=_sort_key):
                fh.write(",".join(_fmt(n, getattr(r, n)) for n in names) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def read_csv(path) -> list:
    names = [f.name for f in fields(RunRecord)]
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if ",".join(header) != CSV_HEADER:
                raise ValueError(f"unexpected CSV header in {path}")
            out = []
            for row in reader:
                kw = {}
                for name, cell in zip(names, row):
                    if name in _INT_FIELDS:
                        kw[name] = int(cell)
                    elif name in _FLOAT_FIELDS:
                        kw[name] = float(cell)
                    else:
                        kw[name] = cell
                out.append(RunRecord(**kw))
            return out
    except OSError as exc:
        raise OSError(f"cannot read CSV from {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# flat key = value configuration files


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment.  Keys are
    ExperimentConfig field names; ``pso.*`` and ``sca.*`` reach the nested
    optimizer configurations.  Tuple fields take comma-separated values."""
    out = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(
                        f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                out[key] = value
    except OSError as exc:
        raise OSError(f"cannot read config from {path}: {exc}") from exc
    return out


_TUPLE_FIELDS = {"layouts": str, "zetas": float, "optimizers": str,
                 "objectives": str, "sweep_grid": float}


def _coerce(target_type, raw: str):
    if target_type is bool:
        return raw.lower() in ("1", "true", "yes", "on")
    return target_type(raw)


def config_from_mapping(mapping: dict, base: ExperimentConfig | None = None
                        ) -> ExperimentConfig:
    """Apply string key/value overrides on top of a base configuration."""
    cfg = base or ExperimentConfig()
    plain = {}
    pso_kw, sca_kw = {}, {}
    cfg_types = {f.name: f.type for f in fields(ExperimentConfig)}
    pso_fields = {f.name: f.type for f in fields(PsoConfig)}
    sca_fields = {f.name: f.type for f in fields(ScaConfig)}
    for key, raw in mapping.items():
        if key.startswith("pso."):
            name = key[4:]
            if name not in pso_fields:
                raise ValueError(f"unknown config key {key!r}")
            pso_kw[name] = _coerce(_scalar_type(pso_fields[name]), raw)
        elif key.startswith("sca."):
            name = key[4:]
            if name not in sca_fields:
                raise ValueError(f"unknown config key {key!r}")
            sca_kw[name] = _coerce(_scalar_type(sca_fields[name]), raw)
        elif key in _TUPLE_FIELDS:
            elem = _TUPLE_FIELDS[key]
            plain[key] = tuple(elem(s.strip()) for s in raw.split(",")
                               if s.strip())
        elif key in cfg_types:
            plain[key] = _coerce(_scalar_type(cfg_types[key]), raw)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if pso_kw:
        plain["pso"] = replace(cfg.pso, **pso_kw)
    if sca_kw:
        plain["sca"] = replace(cfg.sca, **sca_kw)
    return replace(cfg, **plain)


def _scalar_type(annotation):
    return {"int": int, "float": float, "str": str, "bool": bool}.get(
        str(annotation), str)
