"""Single points, grid sweeps, figure recipes and the oracle cross-check."""

from __future__ import annotations

import concurrent.futures
import csv
import itertools
import logging
import math
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import hierarchy, oracle
from .model import Mode, SystemParams, dress

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "mode",
    "two_omega",
    "detuning_ratio",
    "kappa",
    "nbar",
    "g",
    "omega_ph",
    "gamma_c",
    "n_mean",
    "g2",
    "n_max_used",
    "residual",
    "status",
    "wall_time_ms",
)

# sweep axis name -> PointConfig field
AXIS_FIELDS = {
    "delta_over_2omega": "detuning_ratio",
    "two_omega_over_gamma": "two_omega",
    "kappa_over_gamma": "kappa",
    "nbar": "nbar",
    "g_over_gamma": "g",
    "omega_ph_over_gamma": "omega_ph",
    "gamma_c_over_gamma": "gamma_c",
}

FIG1_CAPTION = (
    "Other parameters are: gamma_c/gamma = 0.1, g/gamma = 15, omega_ph/gamma = 35."
)


@dataclass(frozen=True)
class PointConfig:
    """One parameter point in units of gamma (all rates as ratios)."""

    two_omega: float = 25.0
    detuning_ratio: float = -0.7
    kappa: float = 5e-3
    nbar: float = 0.04
    g: float = 15.0
    omega_ph: float = 35.0
    gamma_c: float = 0.1
    tol: float = hierarchy.DEFAULT_TOL
    n_start: int = hierarchy.DEFAULT_N_START
    n_cap: int = hierarchy.DEFAULT_N_CAP
    closure: str = "fock"
    solver: str = "direct"

    def params(self) -> SystemParams:
        return SystemParams.from_ratios(
            two_omega=self.two_omega,
            detuning_ratio=self.detuning_ratio,
            kappa=self.kappa,
            nbar=self.nbar,
            g=self.g,
            omega_ph=self.omega_ph,
            gamma_c=self.gamma_c,
        )


@dataclass(frozen=True)
class SweepRecord:
    mode: Mode
    config: PointConfig
    n_mean: float
    g2: float
    n_max_used: int
    residual: float
    status: str
    wall_time: float

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def row(self) -> list[str]:
        c = self.config
        values = [
            self.mode.value,
            _fmt(c.two_omega),
            _fmt(c.detuning_ratio),
            _fmt(c.kappa),
            _fmt(c.nbar),
            _fmt(c.g),
            _fmt(c.omega_ph),
            _fmt(c.gamma_c),
            _fmt(self.n_mean),
            _fmt(self.g2),
            str(self.n_max_used),
            _fmt(self.residual),
            self.status,
            f"{1e3 * self.wall_time:.3f}",
        ]
        return values


def _fmt(x: float) -> str:
    return "nan" if math.isnan(x) else format(x, ".17g")


@dataclass(frozen=True)
class Axis:
    name: str
    scale: str = "linear"
    start: float = 0.0
    stop: float = 1.0
    count: int = 2
    values: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.name not in AXIS_FIELDS:
            raise ValueError(f"unknown axis {self.name!r}; choose from {sorted(AXIS_FIELDS)}")
        if self.scale not in ("linear", "log10", "list"):
            raise ValueError(f"axis scale must be linear, log10 or list, got {self.scale!r}")
        if self.scale == "list":
            if not self.values:
                raise ValueError("list axis needs values")
            return
        if self.count < 2:
            raise ValueError(f"axis count must be >= 2, got {self.count}")
        if self.scale == "log10" and (self.start <= 0 or self.stop <= 0):
            raise ValueError("log10 axis needs positive endpoints")

    @classmethod
    def parse(cls, text: str) -> "Axis":
        """NAME:SCALE:START:STOP:COUNT, or NAME:list:V1,V2,..."""
        parts = text.split(":")
        if len(parts) == 3 and parts[1] == "list":
            return cls(parts[0], "list", values=tuple(float(v) for v in parts[2].split(",")))
        if len(parts) != 5:
            raise ValueError(f"axis must look like NAME:SCALE:START:STOP:COUNT, got {text!r}")
        name, scale, start, stop, count = parts
        return cls(name, scale, float(start), float(stop), int(count))

    def grid(self) -> np.ndarray:
        if self.scale == "list":
            return np.asarray(self.values, dtype=float)
        if self.scale == "log10":
            return np.logspace(math.log10(self.start), math.log10(self.stop), self.count)
        return np.linspace(self.start, self.stop, self.count)

    @property
    def field(self) -> str:
        return AXIS_FIELDS[self.name]


@dataclass(frozen=True)
class SweepSpec:
    axis1: Axis
    axis2: Axis | None = None
    fixed: PointConfig = field(default_factory=PointConfig)
    modes: tuple[Mode, ...] = (Mode.BEYOND, Mode.SECULAR)
    caption: str = ""

    def points(self) -> list[tuple[Mode, PointConfig]]:
        """Row-major grid: axis1 outermost, then axis2, then mode."""
        axes = [self.axis1] + ([self.axis2] if self.axis2 else [])
        grids = [a.grid() for a in axes]
        out = []
        for combo in itertools.product(*grids):
            cfg = replace(self.fixed, **{a.field: float(v) for a, v in zip(axes, combo)})
            for mode in self.modes:
                out.append((mode, cfg))
        return out


def solve_record(mode: Mode, config: PointConfig) -> SweepRecord:
    """Solve one (mode, point); solver failures become a status string."""
    t0 = time.perf_counter()
    try:
        params = config.params()
        _, obs = hierarchy.auto_truncate(
            dress(params, mode),
            params,
            tol=config.tol,
            n_start=config.n_start,
            n_cap=config.n_cap,
            closure=config.closure,
            solver=config.solver,
        )
    except (hierarchy.HierarchyError, ValueError) as exc:
        log.warning("%s at %s: %s", type(exc).__name__, config, exc)
        return SweepRecord(
            mode, config, math.nan, math.nan, 0, math.nan, f"error:{type(exc).__name__}", time.perf_counter() - t0
        )
    return SweepRecord(mode, config, obs.n_mean, obs.g2, obs.n_max_used, obs.residual, "ok", time.perf_counter() - t0)


def run_point(config: PointConfig, modes: Sequence[Mode]) -> list[SweepRecord]:
    """Solve every requested mode at one point; solver errors propagate."""
    records = []
    for mode in modes:
        t0 = time.perf_counter()
        params = config.params()
        _, obs = hierarchy.auto_truncate(
            dress(params, mode),
            params,
            tol=config.tol,
            n_start=config.n_start,
            n_cap=config.n_cap,
            closure=config.closure,
            solver=config.solver,
        )
        records.append(
            SweepRecord(mode, config, obs.n_mean, obs.g2, obs.n_max_used, obs.residual, "ok", time.perf_counter() - t0)
        )
    return records


def _solve_star(item: tuple[Mode, PointConfig]) -> SweepRecord:
    return solve_record(*item)


def default_jobs() -> int:
    env = os.environ.get("PHONON_STATS_JOBS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, jobs: int | None = None) -> list[SweepRecord]:
    """Evaluate the grid, in parallel when jobs > 1; output order is the grid order."""
    jobs = default_jobs() if jobs is None else max(1, jobs)
    points = spec.points()
    if jobs == 1 or len(points) < 2:
        return [_solve_star(p) for p in points]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_star, points, chunksize=max(1, len(points) // (8 * jobs))))


def write_csv(records: Iterable[SweepRecord], path: str | Path | None, caption: str = "") -> None:
    """Header plus one line per record; ``path=None`` or "-" writes stdout."""
    import sys

    if path is None or str(path) == "-":
        _write_rows(sys.stdout, records)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, records)


def _write_rows(fh, records: Iterable[SweepRecord]) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow(rec.row())


def read_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# figure recipes

FIG1_FIXED = PointConfig(two_omega=25.0, detuning_ratio=-0.7, kappa=5e-3, nbar=0.04, g=15.0, omega_ph=35.0, gamma_c=0.1)


def _recipes() -> dict[str, SweepSpec]:
    return {
        "fig1a": SweepSpec(
            axis1=Axis("delta_over_2omega", "linear", -1.5, 1.5, 301),
            fixed=FIG1_FIXED,
            modes=(Mode.BEYOND, Mode.SECULAR),
            caption=(
                "Fig. 1(a): g2(0) and <n> versus Delta/(2 Omega), beyond (solid) and within (dashed) "
                "the secular approximation. nbar = 0.04, 2Omega/gamma = 25, kappa/gamma = 5e-3. " + FIG1_CAPTION
            ),
        ),
        "fig1b": SweepSpec(
            axis1=Axis("nbar", "list", values=(0.64, 0.16, 0.08, 0.04, 0.01)),
            axis2=Axis("kappa_over_gamma", "log10", 1e-3, 1e2, 60),
            fixed=FIG1_FIXED,
            modes=(Mode.BEYOND,),
            caption=(
                "Fig. 1(b): g2(0) versus kappa/gamma for 2Omega/gamma = 25, Delta/(2Omega) = -0.7; "
                "from top to down nbar = 0.64, 0.16, 0.08, 0.04, 0.01. " + FIG1_CAPTION
            ),
        ),
        "fig1c": SweepSpec(
            axis1=Axis("kappa_over_gamma", "log10", 1e-3, 1e2, 31),
            axis2=Axis("two_omega_over_gamma", "linear", 5.0, 50.0, 19),
            fixed=FIG1_FIXED,
            modes=(Mode.BEYOND,),
            caption=(
                "Fig. 1(c): g2(0) and <n> versus kappa/gamma and 2Omega/gamma; nbar = 0.04, "
                "Delta/(2Omega) = -0.7. " + FIG1_CAPTION
            ),
        ),
        "fig2": SweepSpec(
            axis1=Axis("kappa_over_gamma", "log10", 1e-3, 1e2, 61),
            fixed=FIG1_FIXED,
            modes=(Mode.BEYOND, Mode.SECULAR),
            caption=(
                "Fig. 2: g2(0) and <n> versus kappa/gamma, beyond (solid) and within (dashed) the secular "
                "approximation. 2Omega/gamma = 25, Delta/(2Omega) = -0.7, nbar = 0.04, gamma_c/gamma = 0.1, "
                "g/gamma = 15, omega_ph/gamma = 35. Inset: 1e-3 <= kappa/gamma <= 1e-2."
            ),
        ),
    }


RECIPES = _recipes()


# ---------------------------------------------------------------------------
# oracle cross-check


@dataclass(frozen=True)
class ModeCheck:
    mode: Mode
    max_deviation: float
    n_mean_hierarchy: float
    n_mean_oracle: float
    g2_hierarchy: float
    g2_oracle: float
    kernel_residual: float

    @property
    def n_mean_rel(self) -> float:
        return abs(self.n_mean_hierarchy - self.n_mean_oracle) / abs(self.n_mean_oracle)

    @property
    def g2_rel(self) -> float:
        return abs(self.g2_hierarchy - self.g2_oracle) / abs(self.g2_oracle)


@dataclass(frozen=True)
class OracleReport:
    n_max: int
    tol: float
    checks: tuple[ModeCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.max_deviation < self.tol and c.n_mean_rel < self.tol and c.g2_rel < self.tol for c in self.checks)

    def lines(self) -> list[str]:
        out = [f"oracle check n_max={self.n_max} tol={self.tol:g}"]
        for c in self.checks:
            out.append(
                f"{c.mode.value:8s} max|dP|={c.max_deviation:.3e} |G P_oracle|={c.kernel_residual:.3e} "
                f"n_mean {c.n_mean_hierarchy:.12g} vs {c.n_mean_oracle:.12g} (rel {c.n_mean_rel:.2e}) "
                f"g2 {c.g2_hierarchy:.12g} vs {c.g2_oracle:.12g} (rel {c.g2_rel:.2e})"
            )
        out.append("PASS" if self.passed else "FAIL")
        return out


def run_oracle_check(
    config: PointConfig,
    n_max: int,
    modes: Sequence[Mode] = (Mode.BEYOND, Mode.SECULAR),
    tol: float = 1e-8,
    corrupt: bool = False,
) -> OracleReport:
    """Compare the hierarchy steady state with the projected Lindblad steady state.

    ``corrupt`` flips the sign of one generator entry; the check must then fail.
    """
    params = config.params()
    checks = []
    for mode in modes:
        frame = dress(params, mode)
        gen = hierarchy.assemble_generator(frame, params, n_max, config.closure)
        if corrupt:
            m = gen.matrix.copy()
            # flip the entry carrying the largest term G_ij P_j of the true solution,
            # skipping row 0, which the solve replaces by the trace row
            clean, _ = hierarchy.solve_steady_state(gen, config.solver)
            coo = m.tocoo()
            weight = np.abs(coo.data * clean.flat()[coo.col])
            k = int(np.argmax(np.where(coo.row > 0, weight, -1.0)))
            m[coo.row[k], coo.col[k]] = -coo.data[k]
            gen = hierarchy.SparseGenerator(gen.n_max, m, gen.closure)
        rho = oracle.steady_state_density(oracle.build_liouvillian(frame, params, n_max))
        projected = oracle.project_to_hierarchy(rho)
        obs_o = hierarchy.observables(projected)
        try:
            state, residual = hierarchy.solve_steady_state(gen, config.solver)
            obs_h = hierarchy.observables(state, residual)
            deviation = float(np.abs(state.p - projected.p).max())
        except hierarchy.HierarchyError as exc:
            log.error("hierarchy side failed: %s: %s", type(exc).__name__, exc)
            obs_h = hierarchy.Observables(math.nan, math.nan, n_max, math.nan)
            deviation = math.inf
        checks.append(
            ModeCheck(
                mode=mode,
                max_deviation=deviation,
                n_mean_hierarchy=obs_h.n_mean,
                n_mean_oracle=obs_o.n_mean,
                g2_hierarchy=obs_h.g2,
                g2_oracle=obs_o.g2,
                kernel_residual=float(np.abs(gen.apply(projected)).max()),
            )
        )
    return OracleReport(n_max, tol, tuple(checks))
