"""Run orchestration: single runs, the epsilon sweep, slope fits against
the low-Mach rate targets, and persistence of reports and checkpoints.

Layout of a sweep output directory:

    rates_report.txt      structured-text report (format-versioned,
                          embeds the resolved config; no timestamps, so
                          repeated sweeps are byte-identical)
    rates.csv             one row per epsilon
    reference/energy.csv  limit-solver history (t, kinetic_energy, enstrophy)
    eps_<val>/energy.csv  per-run diagnostics (schema in README)
    eps_<val>/relative_energy.csv

Per-epsilon jobs may run in separate processes; they share nothing
mutable and the merge is a deterministic sort by epsilon.  Every run's
snapshot times live on one shared grid (dt divides the snapshot
interval), and the reference solver is stepped once with the smallest
two-fluid dt of the sweep, so comparisons never interpolate in time.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, ins, twofluid
from .closure import Gammas
from .config import RunConfig
from .errors import (
    ConfigError,
    CorruptCheckpoint,
    FormatVersionMismatch,
    InsufficientPoints,
    LowmachError,
    NonPositiveValue,
)
from .field import (
    SpectralGrid,
    VectorField,
    format_value,
    read_checkpoint,
    write_checkpoint,
)
from .twofluid import FieldState, PhysParams, state_from_arrays

REPORT_MAGIC = "lowmach-rate-report"
REPORT_VERSION = 1
SLOPE_THRESHOLD = 0.8
RESIDUAL_THRESHOLD = 0.1
ENV_OUT_ROOT = "LOWMACH_OUT"

ENERGY_COLUMNS = ("t", "E_s", "F_s", "rel_energy", "div_u_Hs1",
                  "rate_den_sq", "rate_u_L2_sq", "rate_u_H1_int")

# the four fitted quantities and their one-sided theoretical targets
SLOPE_QUANTITIES = (
    ("sup_rate_R", 1.0),       # sup_t |R - 1|_{H^s}        <= C eps
    ("u_combined", 1.0),       # sup |u - u_ref|_L2^2 + int H^1  <= C eps
    ("sup_rate_div", 1.0),     # sup_t |div u|_{H^(s-1)}    <= C eps
    ("sup_rel_energy", 1.0),   # sup_t relative energy      <= C eps
)


# ---------------------------------------------------------------------------
# building blocks


def build_grid(cfg: RunConfig) -> SpectralGrid:
    return SpectralGrid(cfg.dim, cfg.n, cfg.length)


def gammas_of(cfg: RunConfig) -> Gammas:
    return Gammas(cfg.gamma_plus, cfg.gamma_minus)


def params_of(cfg: RunConfig, epsilon=None) -> PhysParams:
    return PhysParams(gammas_of(cfg), cfg.mu, cfg.lam,
                      cfg.epsilon if epsilon is None else epsilon)


def velocity_preset(name: str, grid: SpectralGrid, seed: int) -> VectorField:
    """Divergence-free starting velocities shared by both solvers."""
    if name == "zero":
        return VectorField(grid, np.zeros((grid.dim,) + grid.shape))
    if name not in ("taylor_green", "tg_perturbed"):
        raise ConfigError(f"unknown u0 preset {name!r}")
    if grid.dim != 2:
        raise ConfigError(f"u0 preset {name!r} needs a 2-D grid")
    x, y = grid.coordinates()
    tg = np.stack([np.sin(x) * np.cos(y), -np.cos(x) * np.sin(y)])
    if name == "taylor_green":
        return VectorField(grid, tg)
    if name == "tg_perturbed":
        # fixed small solenoidal perturbation: curl of a band-limited
        # stream function drawn deterministically from the seed
        rng = np.random.default_rng(seed + 101)
        kmax = max(1, min(3, grid.n // 3 - 1))
        psi = twofluid.band_limited_profile(grid, rng, kmax)
        psi /= max(1e-300, np.sqrt(grid.hs_norm_sq(psi, 2)))
        amp = 0.05
        pert = np.stack([grid.deriv(psi, 1), -grid.deriv(psi, 0)]) * amp
        return VectorField(grid, tg + pert)
    raise ConfigError(f"unknown u0 preset {name!r}")


def snapshot_grid(cfg: RunConfig):
    """(n_snap, snap_dt): snapshot times j * snap_dt for j = 0 .. n_snap."""
    interval = cfg.snap_interval()
    n_snap = max(1, round(cfg.T / interval))
    return n_snap, cfg.T / n_snap


def substeps_for(cfg: RunConfig, state0: FieldState, params: PhysParams) -> int:
    """Number of RK4 sub-steps per snapshot interval (dt divides it)."""
    _, snap_dt = snapshot_grid(cfg)
    dt0 = cfg.dt if cfg.dt > 0 else twofluid.stable_dt(state0, params, cfg.cfl)
    return max(1, math.ceil(snap_dt / dt0 - 1e-12))


def initial_state(cfg: RunConfig, epsilon: float, u0: VectorField) -> FieldState:
    return twofluid.well_prepared_init(u0, cfg.delta0, epsilon,
                                       seed=cfg.seed, s=cfg.s)


def reference_snapshots(cfg: RunConfig, u0: VectorField, m_ref: int):
    """Integrate the limit solver once, storing u at every snapshot time.

    Returns (snaps, rows) with snaps of shape (n_snap+1, dim, *shape) and
    rows the (t, kinetic_energy, enstrophy) history.
    """
    grid = u0.grid
    n_snap, snap_dt = snapshot_grid(cfg)
    dt = snap_dt / m_ref
    state = ins.make_state(grid, 0.0, u0.data.copy(), with_pressure=False)
    snaps = np.empty((n_snap + 1,) + u0.data.shape)
    snaps[0] = state.u.data
    rows = [(0.0, ins.kinetic_energy(state), ins.enstrophy(state))]
    for j in range(1, n_snap + 1):
        for _ in range(m_ref):
            state = ins.step_rk4(state, cfg.mu, dt)
        snaps[j] = state.u.data
        rows.append((state.t, ins.kinetic_energy(state), ins.enstrophy(state)))
    return snaps, rows


# ---------------------------------------------------------------------------
# one two-fluid run with full diagnostics


@dataclass
class TwoFluidRunResult:
    epsilon: float
    dt: float
    n_steps: int
    status: str                     # "ok" or the failure message
    energy_rows: list = field(default_factory=list)
    init_potential_raw: float = float("nan")
    final_state: FieldState = None
    summary: dict = field(default_factory=dict)

    @property
    def ok(self):
        return self.status == "ok"


def _summarize(rows) -> dict:
    sup = lambda key: max(getattr(r, key) for r in rows)
    last = rows[-1]
    out = {
        "sup_rate_R": sup("rate_R"),
        "sup_rate_Q": sup("rate_Q"),
        "sup_rate_u_L2_sq": max(r.rate_u_L2 ** 2 for r in rows),
        "int_u_H1_sq": last.rate_u_H1_int,
        "sup_rate_div": sup("rate_div"),
        "sup_rel_energy": sup("rel_energy"),
        "sup_E_s": sup("E_s"),
        "final_rate_R": last.rate_R,
        "final_rate_div": last.rate_div,
        "final_rel_energy": last.rel_energy,
    }
    out["u_combined"] = out["sup_rate_u_L2_sq"] + out["int_u_H1_sq"]
    return out


def run_twofluid_case(cfg: RunConfig, epsilon: float, u0: VectorField,
                      ref_snaps: np.ndarray, m: int,
                      checkpoint_sink=None) -> TwoFluidRunResult:
    """Integrate one epsilon case against precomputed reference snapshots.

    checkpoint_sink, when given, is called as (snap_index, state, diag)
    after each snapshot for persistence hooks.
    """
    grid = u0.grid
    params = params_of(cfg, epsilon)
    n_snap, snap_dt = snapshot_grid(cfg)
    dt = snap_dt / m
    diag = diagnostics.SnapshotDiagnostics(params, cfg.s)
    result = TwoFluidRunResult(epsilon=epsilon, dt=dt, n_steps=n_snap * m,
                               status="ok")
    try:
        state = initial_state(cfg, epsilon, u0)
        result.init_potential_raw = diagnostics.internal_energy_integral(
            state, params.gammas, params.closure_tol)
        rows = [diag.measure(state, VectorField(grid, ref_snaps[0]))]
        if checkpoint_sink:
            checkpoint_sink(0, state, diag)
        for j in range(1, n_snap + 1):
            for _ in range(m):
                state = twofluid.step_rk4(state, params, dt)
            rows.append(diag.measure(state, VectorField(grid, ref_snaps[j])))
            if checkpoint_sink:
                checkpoint_sink(j, state, diag)
        result.energy_rows = rows
        result.final_state = state
        result.summary = _summarize(rows)
    except (LowmachError, ValueError, FloatingPointError) as exc:
        # per-epsilon failures are recorded and the sweep continues;
        # the failing time, when known, rides in the message
        result.status = f"{type(exc).__name__}: {exc}"
    return result


# ---------------------------------------------------------------------------
# slope fitting


def fit_slope(points):
    """Ordinary least squares of log(value) on log(eps).

    Returns (slope, intercept, residual) with residual the RMS of the
    log-space misfit.  Requires >= 3 points with positive values.
    """
    pts = list(points)
    if len(pts) < 3:
        raise InsufficientPoints(f"need >= 3 points, got {len(pts)}")
    if any(v <= 0 for _, v in pts):
        raise NonPositiveValue("log-log fit needs positive values")
    x = np.log([e for e, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


@dataclass(frozen=True)
class SlopeFit:
    quantity: str
    slope: float
    intercept: float
    residual: float
    target: float

    @property
    def passed(self) -> bool:
        return (self.slope >= SLOPE_THRESHOLD
                and self.residual <= RESIDUAL_THRESHOLD)


@dataclass
class RateReport:
    """Everything the sweep measured, plus the verdict."""

    config_items: list
    runs: list                       # list of per-epsilon dicts
    slopes: list = field(default_factory=list)   # list of SlopeFit
    format_version: int = REPORT_VERSION

    @property
    def complete_runs(self):
        return [r for r in self.runs if r["status"] == "ok"]

    @property
    def partial(self) -> bool:
        return len(self.complete_runs) != len(self.runs)

    @property
    def passed(self) -> bool:
        return (not self.partial and bool(self.slopes)
                and all(s.passed for s in self.slopes))


_RUN_NUMERIC_KEYS = (
    "epsilon", "dt", "steps", "sup_rate_R", "sup_rate_Q", "sup_rate_u_L2_sq",
    "int_u_H1_sq", "u_combined", "sup_rate_div", "sup_rel_energy", "sup_E_s",
    "final_rate_R", "final_rate_div", "final_rel_energy", "init_potential_raw",
)


def _run_dict(res: TwoFluidRunResult) -> dict:
    d = {"epsilon": res.epsilon, "dt": res.dt, "steps": res.n_steps,
         "status": res.status, "init_potential_raw": res.init_potential_raw}
    for key in _RUN_NUMERIC_KEYS:
        if key in ("epsilon", "dt", "steps", "init_potential_raw"):
            continue
        d[key] = res.summary.get(key, float("nan"))
    return d


def assemble_report(cfg: RunConfig, results) -> RateReport:
    results = sorted(results, key=lambda r: -r.epsilon)
    runs = [_run_dict(r) for r in results]
    report = RateReport(config_items=list(cfg.resolved_items()), runs=runs)
    complete = [r for r in runs if r["status"] == "ok"]
    if len(complete) >= 3:
        for quantity, target in SLOPE_QUANTITIES:
            pts = [(r["epsilon"], r[quantity]) for r in complete]
            slope, intercept, residual = fit_slope(pts)
            report.slopes.append(SlopeFit(quantity, slope, intercept,
                                          residual, target))
    return report


# ---------------------------------------------------------------------------
# the sweep


def _sweep_job(args):
    cfg, epsilon, u0_data, ref_snaps, m = args
    grid = build_grid(cfg)
    u0 = VectorField(grid, u0_data)
    return run_twofluid_case(cfg, epsilon, u0, ref_snaps, m)


def run_sweep(cfg: RunConfig, out_dir=None, workers: int = 1) -> RateReport:
    """Low-Mach convergence-rate harness over the configured epsilon list."""
    grid = build_grid(cfg)
    u0 = velocity_preset(cfg.u0, grid, cfg.seed)

    substeps = {}
    for eps in cfg.epsilons:
        params = params_of(cfg, eps)
        try:
            substeps[eps] = substeps_for(cfg, initial_state(cfg, eps, u0),
                                         params)
        except (LowmachError, ValueError, FloatingPointError):
            # inadmissible initial data; the per-case job records the
            # actual failure and the sweep continues
            substeps[eps] = 1
    m_ref = max(substeps.values())
    ref_snaps, ref_rows = reference_snapshots(cfg, u0, m_ref)

    jobs = [(cfg, eps, u0.data, ref_snaps, substeps[eps])
            for eps in cfg.epsilons]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]

    report = assemble_report(cfg, results)
    if out_dir is not None:
        out_dir = ensure_dir(out_dir)
        write_reference_csv(os.path.join(ensure_dir(
            os.path.join(out_dir, "reference")), "energy.csv"), ref_rows)
        for res in results:
            rd = ensure_dir(os.path.join(out_dir, f"eps_{res.epsilon:g}"))
            if res.ok:
                write_energy_csv(os.path.join(rd, "energy.csv"),
                                 res.energy_rows)
                write_relative_energy_csv(
                    os.path.join(rd, "relative_energy.csv"), res.energy_rows)
        save_report(report, os.path.join(out_dir, "rates_report.txt"))
        write_rates_csv(report, os.path.join(out_dir, "rates.csv"))
    return report


# ---------------------------------------------------------------------------
# CSV / report writers (decimal, 17 significant digits everywhere)


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _fmt(v):
    return format_value(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_energy_csv(path, energy_rows):
    rows = [(r.t, r.E_s, r.F_s, r.rel_energy, r.rate_div,
             r.rate_R**2 + r.rate_Q**2, r.rate_u_L2**2, r.rate_u_H1_int)
            for r in energy_rows]
    write_csv(path, ENERGY_COLUMNS, rows)


def write_relative_energy_csv(path, energy_rows):
    rows = [(r.t, r.rel_energy, r.visc_dissipation) for r in energy_rows]
    write_csv(path, ("t", "rel_energy", "visc_dissipation"), rows)


def write_reference_csv(path, ref_rows):
    write_csv(path, ("t", "kinetic_energy", "enstrophy"), ref_rows)


def write_rates_csv(report: RateReport, path):
    header = _RUN_NUMERIC_KEYS + ("status",)
    rows = [[r[k] for k in _RUN_NUMERIC_KEYS] + [r["status"]]
            for r in report.runs]
    write_csv(path, header, rows)


def save_report(report: RateReport, path):
    lines = [f"{REPORT_MAGIC} {report.format_version}", "[config]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in report.config_items]
    for run in report.runs:
        lines.append("[run]")
        for key in _RUN_NUMERIC_KEYS:
            lines.append(f"{key} = {_fmt(run[key])}")
        lines.append(f"status = {run['status']}")
    for s in report.slopes:
        lines.append("[slope]")
        lines.append(f"quantity = {s.quantity}")
        lines.append(f"slope = {_fmt(s.slope)}")
        lines.append(f"intercept = {_fmt(s.intercept)}")
        lines.append(f"residual = {_fmt(s.residual)}")
        lines.append(f"target = {_fmt(s.target)}")
        lines.append(f"slope_threshold = {_fmt(SLOPE_THRESHOLD)}")
        lines.append(f"residual_threshold = {_fmt(RESIDUAL_THRESHOLD)}")
        lines.append(f"pass = {'true' if s.passed else 'false'}")
    lines.append("[verdict]")
    lines.append(f"partial = {'true' if report.partial else 'false'}")
    lines.append(f"pass = {'true' if report.passed else 'false'}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_report(path) -> RateReport:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise CorruptCheckpoint(f"{path}: empty report")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != REPORT_MAGIC:
        raise CorruptCheckpoint(f"{path}: not a rate report")
    if int(magic[1]) != REPORT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: report version {magic[1]} (supported {REPORT_VERSION})")
    config_items, runs, slopes = [], [], []
    section = None
    current = None
    for line in lines[1:]:
        if line.startswith("["):
            if section == "run" and current:
                runs.append(current)
            if section == "slope" and current:
                slopes.append(_slope_from(current))
            section = line.strip("[]")
            current = {}
            continue
        if not line.strip():
            continue
        key, _, value = line.partition(" = ")
        if section == "config":
            config_items.append((key, value))
        elif section in ("run", "slope"):
            current[key] = value
        elif section == "verdict":
            pass
    if section == "run" and current:
        runs.append(current)
    if section == "slope" and current:
        slopes.append(_slope_from(current))
    parsed_runs = []
    for r in runs:
        d = {k: float(r[k]) for k in _RUN_NUMERIC_KEYS}
        d["steps"] = int(d["steps"])
        d["status"] = r["status"]
        parsed_runs.append(d)
    return RateReport(config_items=config_items, runs=parsed_runs,
                      slopes=slopes)


def _slope_from(d) -> SlopeFit:
    return SlopeFit(d["quantity"], float(d["slope"]), float(d["intercept"]),
                    float(d["residual"]), float(d["target"]))


# ---------------------------------------------------------------------------
# simulate / reference / picard entry points


def _state_checkpoint_header(cfg: RunConfig, epsilon, dt, m, snap_index,
                             state, diag):
    return {
        "kind": "twofluid",
        "dim": cfg.dim, "n": cfg.n, "length": cfg.length,
        "time": state.t, "epsilon": epsilon,
        "gamma_plus": cfg.gamma_plus, "gamma_minus": cfg.gamma_minus,
        "mu": cfg.mu, "lambda": cfg.lam, "s": cfg.s,
        "delta0": cfg.delta0, "seed": cfg.seed, "u0": cfg.u0,
        "T": cfg.T, "cfl": cfg.cfl,
        "dt": dt, "substeps": m, "snap_index": snap_index,
        "h1_int": diag.h1_integral, "visc_diss": diag.dissipation,
    }


def write_state_checkpoint(path, cfg, epsilon, dt, m, snap_index, state,
                           diag, ref_u):
    fields = [("R", state.R.data.ravel()), ("Q", state.Q.data.ravel())]
    fields += [(f"u{c+1}", state.u.data[c].ravel())
               for c in range(state.grid.dim)]
    write_checkpoint(path, _state_checkpoint_header(
        cfg, epsilon, dt, m, snap_index, state, diag), fields)
    ref_fields = [(f"u{c+1}", ref_u[c].ravel()) for c in range(state.grid.dim)]
    write_checkpoint(str(path) + ".ref",
                     {"kind": "ins_ref", "time": state.t}, ref_fields)


def load_state_checkpoint(path, cfg: RunConfig):
    header, arrays = read_checkpoint(path)
    if header.get("kind") != "twofluid":
        raise CorruptCheckpoint(f"{path}: not a two-fluid checkpoint")
    for key, want in (("dim", cfg.dim), ("n", cfg.n)):
        if int(header[key]) != want:
            raise CorruptCheckpoint(
                f"{path}: checkpoint {key} = {header[key]} does not match "
                f"config {want}")
    grid = build_grid(cfg)
    shape = grid.shape
    names = list(arrays)
    if names[:2] != ["R", "Q"] or len(names) != 2 + grid.dim:
        raise CorruptCheckpoint(f"{path}: unexpected field order {names}")
    u = np.stack([arrays[f"u{c+1}"].reshape(shape) for c in range(grid.dim)])
    state = state_from_arrays(float(header["time"]), grid,
                              arrays["R"].reshape(shape),
                              arrays["Q"].reshape(shape), u)
    ref_header, ref_arrays = read_checkpoint(str(path) + ".ref")
    ref_u = np.stack([ref_arrays[f"u{c+1}"].reshape(shape)
                      for c in range(grid.dim)])
    meta = {k: float(v) for k, v in header.items()
            if k in ("epsilon", "dt", "snap_index", "substeps",
                     "h1_int", "visc_diss")}
    return state, ref_u, meta


def checkpoint_snap_indices(cfg: RunConfig):
    n_snap, snap_dt = snapshot_grid(cfg)
    idx = set()
    for t in cfg.checkpoint_times:
        idx.add(min(n_snap, max(0, round(t / snap_dt))))
    return idx


def run_simulate(cfg: RunConfig, out_dir, resume=None):
    """The `simulate` pipeline: two-fluid run at the configured epsilon with
    a co-integrated limit reference, diagnostics at every snapshot, CSV
    output and checkpoints.  With resume, continue from a checkpoint and
    reproduce the uninterrupted continuation bit-exactly."""
    out_dir = ensure_dir(out_dir)
    grid = build_grid(cfg)
    u0 = velocity_preset(cfg.u0, grid, cfg.seed)
    params = params_of(cfg)
    n_snap, snap_dt = snapshot_grid(cfg)
    eps = cfg.epsilon

    if resume is None:
        m = substeps_for(cfg, initial_state(cfg, eps, u0), params)
        state = initial_state(cfg, eps, u0)
        ref_state = ins.make_state(grid, 0.0, u0.data.copy(),
                                   with_pressure=False)
        start_snap = 0
        diag = diagnostics.SnapshotDiagnostics(params, cfg.s)
    else:
        state, ref_u, meta = load_state_checkpoint(resume, cfg)
        eps = meta["epsilon"]
        params = params_of(cfg, eps)
        m = int(meta["substeps"])
        start_snap = int(meta["snap_index"])
        ref_state = ins.make_state(grid, state.t, ref_u, with_pressure=False)
        diag = diagnostics.SnapshotDiagnostics(params, cfg.s)
        diag.restore(state, ref_state.u, meta["h1_int"], meta["visc_diss"])
    dt = snap_dt / m

    init_potential = diagnostics.internal_energy_integral(
        state, params.gammas, params.closure_tol)
    want_ckpt = checkpoint_snap_indices(cfg) if "checkpoint" in cfg.formats \
        else set()
    rows = [diag.measure(state, ref_state.u)]
    masses0 = twofluid.masses(state)

    def maybe_checkpoint(j):
        if j in want_ckpt or (j == n_snap and "checkpoint" in cfg.formats):
            name = "final.ckpt" if j == n_snap else f"checkpoint_{j:04d}.ckpt"
            write_state_checkpoint(os.path.join(out_dir, name), cfg, eps, dt,
                                   m, j, state, diag, ref_state.u.data)

    maybe_checkpoint(start_snap)
    for j in range(start_snap + 1, n_snap + 1):
        for _ in range(m):
            state = twofluid.step_rk4(state, params, dt)
            ref_state = ins.step_rk4(ref_state, cfg.mu, dt)
        rows.append(diag.measure(state, ref_state.u))
        maybe_checkpoint(j)

    if "csv" in cfg.formats:
        write_energy_csv(os.path.join(out_dir, "energy.csv"), rows)
        write_relative_energy_csv(
            os.path.join(out_dir, "relative_energy.csv"), rows)
    massesT = twofluid.masses(state)
    summary = [
        f"lowmach-run-summary {REPORT_VERSION}",
        "[config]",
    ] + [f"{k} = {_fmt(v)}" for k, v in cfg.resolved_items()] + [
        "[run]",
        f"epsilon = {_fmt(eps)}",
        f"dt = {_fmt(dt)}",
        f"substeps = {m}",
        f"snapshots = {n_snap}",
        f"init_potential_raw = {_fmt(init_potential)}",
        f"mass_R_initial = {_fmt(masses0[0])}",
        f"mass_Q_initial = {_fmt(masses0[1])}",
        f"mass_R_final = {_fmt(massesT[0])}",
        f"mass_Q_final = {_fmt(massesT[1])}",
    ]
    with open(os.path.join(out_dir, "run.txt"), "w") as fh:
        fh.write("\n".join(summary) + "\n")
    return state, rows


def run_reference(cfg: RunConfig, out_dir):
    """The `reference` pipeline: limit solver alone, energy history and a
    final checkpoint."""
    out_dir = ensure_dir(out_dir)
    grid = build_grid(cfg)
    u0 = velocity_preset(cfg.u0, grid, cfg.seed)
    n_snap, snap_dt = snapshot_grid(cfg)
    state0 = ins.make_state(grid, 0.0, u0.data.copy(), with_pressure=False)
    dt0 = cfg.dt if cfg.dt > 0 else ins.stable_dt(state0, cfg.mu, cfg.cfl)
    m = max(1, math.ceil(snap_dt / dt0 - 1e-12))
    dt = snap_dt / m
    state = state0
    rows = [(0.0, ins.kinetic_energy(state), ins.enstrophy(state))]
    for j in range(1, n_snap + 1):
        for _ in range(m):
            state = ins.step_rk4(state, cfg.mu, dt)
        rows.append((state.t, ins.kinetic_energy(state), ins.enstrophy(state)))
    if "csv" in cfg.formats:
        write_reference_csv(os.path.join(out_dir, "energy.csv"), rows)
    if "checkpoint" in cfg.formats:
        fields = [(f"u{c+1}", state.u.data[c].ravel())
                  for c in range(grid.dim)]
        write_checkpoint(os.path.join(out_dir, "final.ckpt"),
                         {"kind": "ins_ref", "dim": cfg.dim, "n": cfg.n,
                          "length": cfg.length, "time": state.t,
                          "mu": cfg.mu, "dt": dt}, fields)
    return state, rows


def run_picard(cfg: RunConfig, iters: int, out_dir):
    """The `picard` pipeline: K sweeps of the frozen-coefficient iteration
    plus contraction records."""
    from . import picard

    if iters < 2:
        raise ConfigError("picard needs --iters >= 2")
    out_dir = ensure_dir(out_dir)
    grid = build_grid(cfg)
    u0 = velocity_preset(cfg.u0, grid, cfg.seed)
    params = params_of(cfg)
    init = initial_state(cfg, cfg.epsilon, u0)
    n_snap, snap_dt = snapshot_grid(cfg)
    m = substeps_for(cfg, init, params)
    n_steps = n_snap * m
    times = np.linspace(0.0, cfg.T, n_steps + 1)
    snap_idx = range(0, n_steps + 1, m)
    trajs, records = picard.iterate(init, params, times, iters,
                                    snap_idx=snap_idx, s=cfg.s,
                                    keep_trajectories=False)
    rows = [(r.k, r.d_sup, r.ratio, r.E_s_sup, r.Es1_dt_sup) for r in records]
    write_csv(os.path.join(out_dir, "contraction.csv"),
              ("k", "d_k", "ratio", "E_s_sup", "Es1_dt_sup"), rows)
    lines = [f"lowmach-picard-summary {REPORT_VERSION}", "[config]"]
    lines += [f"{k} = {_fmt(v)}" for k, v in cfg.resolved_items()]
    lines += ["[records]"]
    for r in records:
        lines.append(f"k{r.k}.du_h1_int = {_fmt(r.du_h1_int)}")
    with open(os.path.join(out_dir, "run.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return trajs[-1], records
