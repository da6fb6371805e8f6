"""Steady-state transmission sweeps over (cavity, probe) detuning grids.

Each grid point is an independent task: build the rotating-frame
Hamiltonian, assemble the Liouvillian, solve the steady state, and record
transmission plus ground-state populations.  Rows are always emitted in
row-major (cavity, probe) order regardless of how many workers computed
them, so output files are byte-identical across worker counts.  Long sweeps
append finished rows to a checkpoint sidecar and can resume after an
interruption; failed points record T = nan with the error message instead
of aborting the sweep.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.signal

from . import __version__
from .lindblad import collapse_mode_for, collapse_operators, solve_steady_state
from .model import (
    Basis,
    ModelKind,
    ModelScope,
    SystemParams,
    build_basis,
    driven_hamiltonian,
)
from .spectra import EigenSweepConfig

__all__ = [
    "Grid",
    "SweepConfig",
    "SweepRow",
    "SweepResult",
    "CSV_COLUMNS",
    "preset",
    "preset_names",
    "run_spectrum_sweep",
    "run_slice",
    "feature_scan",
    "write_sweep_csv",
    "config_to_dict",
    "config_from_dict",
]

SCHEMA_VERSION = 1
ZEEMAN_F4_MS = tuple(range(-4, 5))
CSV_COLUMNS = (
    ["cavity_detuning_MHz", "probe_detuning_MHz", "transmission", "pop_F3", "pop_F4"]
    + [f"pop_m{m}" for m in ZEEMAN_F4_MS]
    + ["residual", "error"]
)


@dataclass(frozen=True)
class Grid:
    """Inclusive 1-D grid start..stop with the given step (MHz)."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("grid step must be > 0")
        if self.stop < self.start:
            raise ValueError("grid stop must be >= start")

    @property
    def count(self) -> int:
        return int(round((self.stop - self.start) / self.step)) + 1

    def values(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @classmethod
    def single(cls, value: float) -> "Grid":
        return cls(value, value, 1.0)


@dataclass(frozen=True)
class SweepConfig:
    model: ModelKind
    params: SystemParams
    cavity_grid: Grid
    probe_grid: Grid
    scope: ModelScope = ModelScope.FULL
    n_max: int = 1
    workers: int = 1
    output: str | None = None
    symmetry_reduction: bool = False


@dataclass(frozen=True)
class SweepRow:
    cavity_detuning: float
    probe_detuning: float
    transmission: float
    pop_f3: float
    pop_f4: float
    zeeman_f4: tuple[float, ...]  # m = -4..4
    residual: float
    error: str = ""

    def as_csv(self) -> list:
        return (
            [repr(self.cavity_detuning), repr(self.probe_detuning), repr(self.transmission),
             repr(self.pop_f3), repr(self.pop_f4)]
            + [repr(z) for z in self.zeeman_f4]
            + [repr(self.residual), self.error]
        )


@dataclass(frozen=True)
class SweepResult:
    config: SweepConfig
    rows: tuple[SweepRow, ...]


def config_to_dict(config: SweepConfig) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "model": config.model.value,
        "scope": config.scope.value,
        "n_max": config.n_max,
        "workers": config.workers,
        "symmetry_reduction": config.symmetry_reduction,
        "cavity_grid": asdict(config.cavity_grid),
        "probe_grid": asdict(config.probe_grid),
        "params": {
            **{k: v for k, v in asdict(config.params).items() if k != "excited_offsets"},
            "excited_offsets": {str(k): v for k, v in config.params.excited_offsets.items()},
        },
    }


def config_from_dict(doc: dict) -> SweepConfig:
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported config schema_version {doc.get('schema_version')!r}")
    p = dict(doc["params"])
    p["excited_offsets"] = {int(k): float(v) for k, v in p["excited_offsets"].items()}
    return SweepConfig(
        model=ModelKind(doc["model"]),
        params=SystemParams(**p),
        cavity_grid=Grid(**doc["cavity_grid"]),
        probe_grid=Grid(**doc["probe_grid"]),
        scope=ModelScope(doc["scope"]),
        n_max=int(doc["n_max"]),
        workers=int(doc.get("workers", 1)),
        symmetry_reduction=bool(doc.get("symmetry_reduction", False)),
    )


def _config_digest(config: SweepConfig) -> str:
    doc = config_to_dict(config)
    doc.pop("workers", None)  # worker count must not invalidate a checkpoint
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


# --- presets -------------------------------------------------------------------

_TOROID_PARAMS = SystemParams(
    g=450.0, kappa=1.75, gamma=2.6,
    epsilon_mod=1.75 * 2.6 / 450.0,  # kappa*gamma/g
    omega_r_rabi=2.6,                # Omega_r = gamma
    repump_detuning=-251.0,          # repump resonant with 3 -> 4'
)
_PBG_PARAMS = SystemParams(
    g=17000.0, kappa=4400.0, gamma=2.6,
    epsilon_mod=100.0 * 4400.0 * 2.6 / 17000.0,  # 100*kappa*gamma/g
)


def _presets() -> dict[str, Callable[[], SweepConfig | EigenSweepConfig]]:
    return {
        "fig1": lambda: EigenSweepConfig(
            model=ModelKind.TOROID,
            params=_TOROID_PARAMS,
            scope=ModelScope.TOROID_COUPLED,
            cavity_detunings=tuple(Grid(-1000.0, 1000.0, 100.0).values()),
        ),
        "fig2": lambda: SweepConfig(
            model=ModelKind.TOROID,
            params=_TOROID_PARAMS,
            cavity_grid=Grid(-800.0, 800.0, 50.0),
            probe_grid=Grid(-800.0, 800.0, 0.5),
        ),
        "fig3": lambda: SweepConfig(
            model=ModelKind.TOROID,
            params=replace(_TOROID_PARAMS, cavity_detuning=-100.0),
            cavity_grid=Grid.single(-100.0),
            probe_grid=Grid(-800.0, 800.0, 0.5),
        ),
        "fig_toroid_4_5": lambda: SweepConfig(
            model=ModelKind.TOROID,
            params=replace(_TOROID_PARAMS, cavity_detuning=0.0),
            cavity_grid=Grid.single(0.0),
            probe_grid=Grid(-800.0, 800.0, 0.5),
            scope=ModelScope.TOROID_45_ONLY,
        ),
        "fig4": lambda: EigenSweepConfig(
            model=ModelKind.PBG,
            params=_PBG_PARAMS,
            scope=ModelScope.FULL,
            cavity_detunings=tuple(Grid(-40000.0, 40000.0, 1000.0).values()),
            band_gap=_PBG_PARAMS.g / 40.0,
        ),
        "fig5": lambda: SweepConfig(
            model=ModelKind.PBG,
            params=_PBG_PARAMS,
            cavity_grid=Grid(-40000.0, 40000.0, 1000.0),
            probe_grid=Grid(-40000.0, 40000.0, 50.0),
        ),
        "fig6": lambda: _pbg_slice(-13000.0),
        "fig7": lambda: _pbg_slice(20000.0),
        "fig8": lambda: _pbg_slice(4000.0),
    }


def _pbg_slice(cavity_detuning: float) -> SweepConfig:
    return SweepConfig(
        model=ModelKind.PBG,
        params=replace(_PBG_PARAMS, cavity_detuning=cavity_detuning),
        cavity_grid=Grid.single(cavity_detuning),
        probe_grid=Grid(-40000.0, 40000.0, 50.0),
    )


def preset_names() -> list[str]:
    return sorted(_presets())


def preset(name: str) -> SweepConfig | EigenSweepConfig:
    """Figure-matched configuration by name (fig1..fig8, fig_toroid_4_5)."""
    try:
        return _presets()[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {', '.join(preset_names())}") from None


# --- the engine ----------------------------------------------------------------

def _compute_point(task: tuple[dict, float, float]) -> SweepRow:
    """One steady-state solve; never raises (errors land in the row)."""
    config_doc, wc, wp = task
    config = config_from_dict(config_doc)
    nan = float("nan")
    try:
        basis = build_basis(config.scope, config.n_max)
        params = replace(config.params, cavity_detuning=wc, probe_detuning=wp)
        H = driven_hamiltonian(config.model, params, basis)
        collapses = collapse_operators(basis, collapse_mode_for(config.model))
        result = solve_steady_state(
            H, collapses, params, basis, reduce_symmetry=config.symmetry_reduction
        )
        zeeman = tuple(
            result.zeeman_populations.get((4, m), nan) for m in ZEEMAN_F4_MS
        )
        return SweepRow(
            cavity_detuning=wc,
            probe_detuning=wp,
            transmission=result.transmission,
            pop_f3=result.manifold_populations.get(3, 0.0),
            pop_f4=result.manifold_populations.get(4, nan),
            zeeman_f4=zeeman,
            residual=result.residual,
        )
    except Exception as exc:  # failed points must not abort a long sweep
        return SweepRow(
            cavity_detuning=wc, probe_detuning=wp, transmission=nan,
            pop_f3=nan, pop_f4=nan, zeeman_f4=(nan,) * 9, residual=nan,
            error=f"{type(exc).__name__}: {exc}",
        )


def _row_to_doc(i: int, row: SweepRow) -> dict:
    return {
        "i": i,
        "cavity_detuning": row.cavity_detuning,
        "probe_detuning": row.probe_detuning,
        "transmission": row.transmission,
        "pop_f3": row.pop_f3,
        "pop_f4": row.pop_f4,
        "zeeman_f4": list(row.zeeman_f4),
        "residual": row.residual,
        "error": row.error,
    }


def _row_from_doc(doc: dict) -> tuple[int, SweepRow]:
    return doc["i"], SweepRow(
        cavity_detuning=doc["cavity_detuning"],
        probe_detuning=doc["probe_detuning"],
        transmission=doc["transmission"],
        pop_f3=doc["pop_f3"],
        pop_f4=doc["pop_f4"],
        zeeman_f4=tuple(doc["zeeman_f4"]),
        residual=doc["residual"],
        error=doc.get("error", ""),
    )


def _load_checkpoint(path: Path, digest: str) -> dict[int, SweepRow]:
    done: dict[int, SweepRow] = {}
    if not path.exists():
        return done
    with open(path) as fh:
        header = fh.readline()
        try:
            head = json.loads(header) if header else {}
        except json.JSONDecodeError:
            return {}
        if head.get("config_digest") != digest:
            return {}
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                i, row = _row_from_doc(json.loads(line))
            except (json.JSONDecodeError, KeyError):
                continue  # a truncated trailing record is recomputed
            done[i] = row
    return done


def run_spectrum_sweep(config: SweepConfig) -> SweepResult:
    """Steady-state sweep over the full (cavity x probe) grid.

    Output rows are row-major over (cavity, probe).  When config.output is
    set, a checkpoint sidecar <output>.ckpt collects finished rows; re-running
    the same config resumes from it, and it is removed once the CSV and the
    metadata sidecar are written.
    """
    points = [
        (float(wc), float(wp))
        for wc in config.cavity_grid.values()
        for wp in config.probe_grid.values()
    ]
    digest = _config_digest(config)
    ckpt_path = Path(f"{config.output}.ckpt") if config.output else None
    done = _load_checkpoint(ckpt_path, digest) if ckpt_path else {}

    pending = [i for i in range(len(points)) if i not in done]
    config_doc = config_to_dict(config)
    tasks = [(config_doc, *points[i]) for i in pending]

    ckpt_fh = None
    if ckpt_path is not None:
        fresh = not done
        ckpt_fh = open(ckpt_path, "a" if not fresh else "w")
        if fresh:
            ckpt_fh.write(json.dumps({"schema_version": SCHEMA_VERSION, "config_digest": digest}) + "\n")
            ckpt_fh.flush()
    try:
        if config.workers <= 1:
            computed = map(_compute_point, tasks)
            for i, row in zip(pending, computed):
                done[i] = row
                if ckpt_fh:
                    ckpt_fh.write(json.dumps(_row_to_doc(i, row)) + "\n")
                    ckpt_fh.flush()
        else:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                for i, row in zip(pending, pool.map(_compute_point, tasks, chunksize=1)):
                    done[i] = row
                    if ckpt_fh:
                        ckpt_fh.write(json.dumps(_row_to_doc(i, row)) + "\n")
                        ckpt_fh.flush()
    finally:
        if ckpt_fh:
            ckpt_fh.close()

    rows = tuple(done[i] for i in range(len(points)))
    result = SweepResult(config=config, rows=rows)
    if config.output:
        write_sweep_csv(config.output, result)
        _write_metadata(config)
        if ckpt_path and ckpt_path.exists():
            ckpt_path.unlink()
    return result


def run_slice(config: SweepConfig) -> SweepResult:
    """A probe scan at one fixed cavity detuning."""
    if config.cavity_grid.count != 1:
        raise ValueError("run_slice requires a single-point cavity grid")
    return run_spectrum_sweep(config)


def write_sweep_csv(path: str | Path, result: SweepResult) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow(row.as_csv())


def _write_metadata(config: SweepConfig) -> None:
    meta = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
        "config": config_to_dict(config),
    }
    Path(f"{config.output}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def feature_scan(
    probe_detunings: Sequence[float], transmission: Sequence[float], window: float
) -> list[dict]:
    """Local maxima of a transmission slice with prominence and FWHM.

    `window` is the narrowest feature width of interest; the grid must be at
    least that fine.  Returns dicts with probe_detuning, prominence and
    width (MHz), sorted by descending prominence.
    """
    probe = np.asarray(probe_detunings, dtype=float)
    T = np.asarray(transmission, dtype=float)
    if len(probe) != len(T):
        raise ValueError("probe and transmission lengths differ")
    if len(probe) >= 2:
        step = float(np.min(np.diff(probe)))
        if step <= 0:
            raise ValueError("probe grid must be strictly increasing")
        if step > window:
            raise ValueError(f"grid step {step} MHz is coarser than the requested window {window} MHz")
    finite = np.isfinite(T)
    Tc = np.where(finite, T, np.nanmin(T[finite]) if finite.any() else 0.0)
    peaks, props = scipy.signal.find_peaks(Tc, prominence=0.0, width=0.0, rel_height=0.5)
    out = []
    for k, p in enumerate(peaks):
        out.append(
            {
                "probe_detuning": float(probe[p]),
                "prominence": float(props["prominences"][k]),
                "width": float(props["widths"][k]) * (step if len(probe) >= 2 else 0.0),
            }
        )
    out.sort(key=lambda d: -d["prominence"])
    return out
