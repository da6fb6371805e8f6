"""Command-line surface: eigen fans, level diagrams, crossings, and sweeps.

Subcommands

  eigen      eigenvalue fan vs cavity detuning (figure presets fig1, fig4)
  levels     transition-difference diagram of the big-coupling model
  crossings  dual-resonance finder
  spectrum   2-D transmission map (fig2, fig5)
  slice      probe scan at fixed cavity detuning (fig3, fig6-8, fig_toroid_4_5)
  preset     list the available presets

Frequencies are MHz; values suffixed GHz (or MHz) are converted at parse
time.  Flag overrides are applied after the preset or config file is
loaded.  Exit codes: 0 success, 1 configuration error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .lindblad import DegenerateSteadyStateError, SolverError
from .model import ModelKind, ModelScope, SystemParams, load_constants
from .spectra import EigenSweepConfig, find_dual_resonances, run_eigen_sweep, transition_diagram
from .sweep import (
    Grid,
    SweepConfig,
    config_from_dict,
    preset,
    preset_names,
    run_slice,
    run_spectrum_sweep,
)

__all__ = ["main", "ConfigError"]

WORKERS_ENV = "HFCAVITY_WORKERS"


class ConfigError(ValueError):
    """Bad flags, presets, or config files; exits with status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit(2); the contract wants 1
        raise ConfigError(message)


def parse_frequency(text: str) -> float:
    """A frequency in MHz; accepts a bare number or a MHz/GHz suffix."""
    t = text.strip()
    scale = 1.0
    lower = t.lower()
    if lower.endswith("ghz"):
        t, scale = t[:-3], 1000.0
    elif lower.endswith("mhz"):
        t = t[:-3]
    try:
        return float(t) * scale
    except ValueError:
        raise ConfigError(f"invalid frequency {text!r} (use e.g. 450, 1.75MHz, 17GHz)") from None


def _fixed_width_formatter(prog):
    return argparse.HelpFormatter(prog, width=96)


def _add_common_flags(p: argparse.ArgumentParser, grids: bool) -> None:
    p.add_argument("--preset", help="figure preset name (see `preset list`)")
    p.add_argument("--config", help="JSON sweep config file")
    p.add_argument("--out", help="output CSV path")
    p.add_argument("--constants", help="JSON constants file overriding the Cs defaults")
    p.add_argument("--g", type=parse_frequency, help="atom-cavity coupling g")
    p.add_argument("--kappa", type=parse_frequency, help="cavity field decay rate")
    p.add_argument("--gamma", type=parse_frequency, help="atomic dipole decay rate")
    p.add_argument("--epsilon", type=parse_frequency, help="cavity drive amplitude |epsilon|")
    p.add_argument("--omega-r", type=parse_frequency, help="repump Rabi amplitude Omega_r")
    p.add_argument("--repump-detuning", type=parse_frequency,
                   help="omega_r - omega_GSS relative to the 4->5' line")
    p.add_argument("--cavity-detuning", type=parse_frequency,
                   help="fixed cavity detuning from the 4->5' line")
    p.add_argument("--ground-splitting", type=parse_frequency, help="ground hyperfine splitting")
    p.add_argument("--scope", choices=[s.value for s in ModelScope], help="basis scope")
    p.add_argument("--n-max", type=int, help="photon-number cutoff")
    p.add_argument("--workers", type=int, help=f"worker processes (default ${WORKERS_ENV} or 1)")
    if grids:
        for axis in ("cavity", "probe"):
            for part in ("start", "stop", "step"):
                p.add_argument(
                    f"--{axis}-{part}", type=parse_frequency, help=f"{axis} grid {part}"
                )


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="hfcavity",
        description="Cs D2 hyperfine cavity QED: eigenstructure and steady-state transmission.",
        formatter_class=_fixed_width_formatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="progress chatter on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eigen = sub.add_parser(
        "eigen", help="eigenvalue fan vs cavity detuning",
        formatter_class=_fixed_width_formatter,
    )
    _add_common_flags(p_eigen, grids=True)
    p_eigen.add_argument("--model", choices=[m.value for m in ModelKind], help="hamiltonian family")
    p_eigen.add_argument("--cluster-tol", type=parse_frequency, help="degeneracy cluster tolerance")
    p_eigen.add_argument("--band-gap", type=parse_frequency, help="band-splitting gap threshold")

    p_levels = sub.add_parser(
        "levels", help="transition-difference diagram (big-coupling model)",
        formatter_class=_fixed_width_formatter,
    )
    _add_common_flags(p_levels, grids=True)

    p_cross = sub.add_parser(
        "crossings", help="dual-resonance finder (big-coupling model)",
        formatter_class=_fixed_width_formatter,
    )
    _add_common_flags(p_cross, grids=True)

    p_spec = sub.add_parser(
        "spectrum", help="2-D transmission map over (cavity, probe) detunings",
        formatter_class=_fixed_width_formatter,
    )
    _add_common_flags(p_spec, grids=True)

    p_slice = sub.add_parser(
        "slice", help="transmission and populations vs probe at fixed cavity detuning",
        formatter_class=_fixed_width_formatter,
    )
    _add_common_flags(p_slice, grids=True)

    p_preset = sub.add_parser(
        "preset", help="preset utilities", formatter_class=_fixed_width_formatter
    )
    p_preset.add_argument("action", choices=["list"], help="`list` prints all preset names")
    return parser


def _default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"${WORKERS_ENV} must be an integer, got {raw!r}")


def _load_base_config(args) -> SweepConfig | EigenSweepConfig | None:
    if args.preset and args.config:
        raise ConfigError("--preset and --config are mutually exclusive")
    if args.preset:
        try:
            return preset(args.preset)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON in {args.config}: {exc}") from None
        try:
            return config_from_dict(doc)
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config field: {exc}") from None
    return None


_PARAM_FLAGS = {
    "g": "g",
    "kappa": "kappa",
    "gamma": "gamma",
    "epsilon": "epsilon_mod",
    "omega_r": "omega_r_rabi",
    "repump_detuning": "repump_detuning",
    "cavity_detuning": "cavity_detuning",
    "ground_splitting": "ground_splitting",
}


def _apply_param_overrides(params: SystemParams, args) -> SystemParams:
    updates = {}
    for flag, fname in _PARAM_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            updates[fname] = value
    if getattr(args, "constants", None):
        try:
            constants = load_constants(args.constants)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad constants file: {exc}") from None
        updates["excited_offsets"] = dict(constants.excited_offsets)
        updates.setdefault("ground_splitting", constants.ground_splitting)
    try:
        return replace(params, **updates) if updates else params
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _grid_override(base: Grid | None, args, axis: str) -> Grid:
    start = getattr(args, f"{axis}_start", None)
    stop = getattr(args, f"{axis}_stop", None)
    step = getattr(args, f"{axis}_step", None)
    if base is None and None in (start, stop, step):
        raise ConfigError(f"no preset/config given: --{axis}-start/stop/step are all required")
    try:
        return Grid(
            start if start is not None else base.start,
            stop if stop is not None else base.stop,
            step if step is not None else base.step,
        )
    except ValueError as exc:
        raise ConfigError(f"invalid {axis} grid: {exc}") from None


def _resolve_sweep_config(args, single_cavity: bool) -> SweepConfig:
    base = _load_base_config(args)
    if isinstance(base, EigenSweepConfig):
        raise ConfigError(f"preset {args.preset!r} is an eigen-sweep preset; use `eigen`")
    if base is None:
        required = ("g", "kappa", "gamma", "epsilon")
        missing = [f"--{f}" for f in required if getattr(args, f) is None]
        if missing:
            raise ConfigError(f"without --preset/--config these are required: {', '.join(missing)}")
        params = SystemParams(g=args.g, kappa=args.kappa, gamma=args.gamma, epsilon_mod=args.epsilon)
        params = _apply_param_overrides(params, args)
        model = ModelKind.PBG if args.g >= 5000.0 else ModelKind.TOROID
        base = SweepConfig(
            model=model,
            params=params,
            cavity_grid=_grid_override(None, args, "cavity")
            if not single_cavity or args.cavity_start is not None
            else Grid.single(params.cavity_detuning),
            probe_grid=_grid_override(None, args, "probe"),
        )
    else:
        params = _apply_param_overrides(base.params, args)
        cavity_grid = base.cavity_grid
        if single_cavity and getattr(args, "cavity_detuning", None) is not None:
            cavity_grid = Grid.single(args.cavity_detuning)
        elif any(getattr(args, f"cavity_{p}") is not None for p in ("start", "stop", "step")):
            cavity_grid = _grid_override(base.cavity_grid, args, "cavity")
        probe_grid = base.probe_grid
        if any(getattr(args, f"probe_{p}") is not None for p in ("start", "stop", "step")):
            probe_grid = _grid_override(base.probe_grid, args, "probe")
        base = replace(base, params=params, cavity_grid=cavity_grid, probe_grid=probe_grid)

    updates = {}
    if args.scope:
        updates["scope"] = ModelScope(args.scope)
    if args.n_max is not None:
        if args.n_max < 1:
            raise ConfigError("--n-max must be >= 1")
        updates["n_max"] = args.n_max
    updates["workers"] = args.workers if args.workers is not None else _default_workers()
    if args.out:
        updates["output"] = args.out
    config = replace(base, **updates)
    if single_cavity and config.cavity_grid.count != 1:
        raise ConfigError("slice requires a single cavity detuning (--cavity-detuning)")
    return config


def _resolve_eigen_config(args) -> EigenSweepConfig:
    base = _load_base_config(args)
    if isinstance(base, SweepConfig):
        raise ConfigError(f"preset {args.preset!r} is a sweep preset; use `spectrum` or `slice`")
    if base is None:
        if args.g is None or args.kappa is None or args.gamma is None:
            raise ConfigError("without --preset these are required: --g, --kappa, --gamma")
        model = ModelKind(args.model) if args.model else (
            ModelKind.PBG if args.g >= 5000.0 else ModelKind.TOROID
        )
        params = _apply_param_overrides(
            SystemParams(g=args.g, kappa=args.kappa, gamma=args.gamma), args
        )
        scope = ModelScope(args.scope) if args.scope else (
            ModelScope.FULL if model is ModelKind.PBG else ModelScope.TOROID_COUPLED
        )
        base = EigenSweepConfig(
            model=model,
            params=params,
            scope=scope,
            cavity_detunings=tuple(_grid_override(None, args, "cavity").values()),
            band_gap=(params.g / 40.0) if model is ModelKind.PBG else None,
        )
    else:
        params = _apply_param_overrides(base.params, args)
        detunings = base.cavity_detunings
        if any(getattr(args, f"cavity_{p}") is not None for p in ("start", "stop", "step")):
            lo, hi = min(detunings), max(detunings)
            step = (hi - lo) / max(1, len(detunings) - 1) if len(detunings) > 1 else 1.0
            detunings = tuple(_grid_override(Grid(lo, hi, step), args, "cavity").values())
        base = replace(base, params=params, cavity_detunings=detunings)
        if args.model:
            base = replace(base, model=ModelKind(args.model))
        if args.scope:
            base = replace(base, scope=ModelScope(args.scope))
    if args.n_max is not None:
        if args.n_max < 1:
            raise ConfigError("--n-max must be >= 1")
        base = replace(base, n_max=args.n_max)
    if args.cluster_tol is not None:
        base = replace(base, tol_cluster=args.cluster_tol)
    if args.band_gap is not None:
        base = replace(base, band_gap=args.band_gap)
    if args.out:
        base = replace(base, output=args.out)
    return base


def _cmd_eigen(args) -> int:
    config = _resolve_eigen_config(args)
    reports = run_eigen_sweep(config)
    if args.verbose:
        for r in reports:
            print(
                f"cavity {r.cavity_detuning:+.1f} MHz: {r.n_states} states, "
                f"{r.n_unique} unique, {r.n_bands} bands",
                file=sys.stderr,
            )
    if not config.output:
        for r in reports:
            print(f"{r.cavity_detuning!r},{r.n_states},{r.n_unique},{r.n_bands}")
    return 0


def _pbg_params_from(args) -> tuple[SystemParams, tuple[float, ...]]:
    base = _load_base_config(args)
    if isinstance(base, SweepConfig):
        params = base.params
        detunings = tuple(base.cavity_grid.values())
    elif isinstance(base, EigenSweepConfig):
        params = base.params
        detunings = base.cavity_detunings
    else:
        if args.g is None or args.kappa is None or args.gamma is None:
            raise ConfigError("without --preset these are required: --g, --kappa, --gamma")
        params = SystemParams(g=args.g, kappa=args.kappa, gamma=args.gamma)
        detunings = ()
    params = _apply_param_overrides(params, args)
    if any(getattr(args, f"cavity_{p}") is not None for p in ("start", "stop", "step")):
        detunings = tuple(_grid_override(None, args, "cavity").values())
    if not detunings:
        raise ConfigError("a cavity grid is required (--cavity-start/stop/step or a preset)")
    return params, detunings


def _cmd_levels(args) -> int:
    params, detunings = _pbg_params_from(args)
    diagram = transition_diagram(params, detunings, n_max=args.n_max or 1)
    out = args.out
    rows = [
        (wc, line.ground_f, line.difference_frequency, line.excitable)
        for wc, lines in zip(diagram.cavity_detunings, diagram.lines)
        for line in lines
    ]
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cavity_detuning_MHz", "ground_F", "difference_MHz", "excitable"])
            for wc, f, diff, exc in rows:
                writer.writerow([repr(float(wc)), f, repr(float(diff)), int(exc)])
    else:
        for wc, f, diff, exc in rows:
            print(f"{wc!r},{f},{diff!r},{int(exc)}")
    return 0


def _cmd_crossings(args) -> int:
    params, detunings = _pbg_params_from(args)
    crossings = find_dual_resonances(params, detunings, n_max=args.n_max or 1)
    lines = [
        f"{c.cavity_detuning!r},{c.probe_frequency!r},{c.branch_f3},{c.branch_f4}"
        for c in crossings
    ]
    if args.out:
        Path(args.out).write_text(
            "cavity_detuning_MHz,probe_frequency_MHz,branch_f3,branch_f4\n"
            + "".join(line + "\n" for line in lines)
        )
    else:
        print("cavity_detuning_MHz,probe_frequency_MHz,branch_f3,branch_f4")
        for line in lines:
            print(line)
    return 0


def _finish_sweep(config, result, verbose: bool) -> int:
    failed = sum(1 for r in result.rows if r.error)
    if verbose:
        print(f"{len(result.rows)} points computed, {failed} failed", file=sys.stderr)
    if not config.output:
        print(f"{len(result.rows)} points computed (no --out given, CSV not written)")
    if result.rows and failed == len(result.rows):
        print(f"numeric failure: every grid point failed; first error: "
              f"{result.rows[0].error}", file=sys.stderr)
        return 2
    return 0


def _cmd_spectrum(args) -> int:
    config = _resolve_sweep_config(args, single_cavity=False)
    result = run_spectrum_sweep(config)
    return _finish_sweep(config, result, args.verbose)


def _cmd_slice(args) -> int:
    config = _resolve_sweep_config(args, single_cavity=True)
    result = run_slice(config)
    return _finish_sweep(config, result, args.verbose)


def _cmd_preset(args) -> int:
    for name in preset_names():
        print(name)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    handlers = {
        "eigen": _cmd_eigen,
        "levels": _cmd_levels,
        "crossings": _cmd_crossings,
        "spectrum": _cmd_spectrum,
        "slice": _cmd_slice,
        "preset": _cmd_preset,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (DegenerateSteadyStateError, SolverError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
