"""Batch front-end: ``homtomo {hom-scan,tomography,entangle-scan,sigma-check} --config run.toml``.

Every command is a pure function of the config file and the seed. Output
files start with a '#' preamble (schema version, command, config hash,
seed) and contain no timestamps, so identical inputs give byte-identical
files.
"""

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import tables
from .counts import TrialPlan, exact_record, sample_rate
from .grid import DensityMatrix, TemporalState, TimeGrid
from .reference import ReferenceSpec, filter_from_pulse, make_pulse, sigma_overlap
from .tomography import (
    DEFAULT_PHASES,
    TemporalTomography,
    TomographySchedule,
    fidelity,
    forward_probability,
    simulate_records,
)
from .twophoton import (
    BipartiteState,
    entanglement_timescale,
    entanglement_witness,
    pdc_model,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


class ConfigError(ValueError):
    pass


EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _section(cfg, name, required=True):
    sec = cfg.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _get(sec, key, name, cast=float, default=...):
    if key not in sec:
        if default is ...:
            raise ConfigError(f"missing key {name}.{key}")
        return default
    try:
        return cast(sec[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {name}.{key}: {sec[key]!r}") from exc


def _float_list(sec, key, name, default=...):
    raw = _get(sec, key, name, cast=list, default=default)
    try:
        return [float(x) for x in raw]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}.{key} must be a list of numbers") from exc


def _linspace_or_list(sec, key, name):
    if key in sec:
        return _float_list(sec, key, name)
    lo = _get(sec, f"{key}_min", name)
    hi = _get(sec, f"{key}_max", name)
    count = _get(sec, f"{key}_count", name, cast=int)
    if count < 2:
        raise ConfigError(f"{name}.{key}_count must be >= 2")
    return list(np.linspace(lo, hi, count))


def build_grid(cfg):
    sec = _section(cfg, "grid")
    n = _get(sec, "n_points", "grid", cast=int)
    dt = _get(sec, "dt", "grid")
    omega0 = _get(sec, "omega0", "grid")
    t_start = _get(sec, "t_start", "grid", default=None)
    try:
        if t_start is None:
            return TimeGrid.centered(n, dt, omega0)
        return TimeGrid(n, dt, t_start, omega0)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def build_filter(cfg, grid, name="reference"):
    sec = _section(cfg, name)
    shape = _get(sec, "shape", name, cast=str)
    if shape == "gaussian":
        if "bandwidth" in sec:
            spec = ReferenceSpec.gaussian_bandwidth(_get(sec, "bandwidth", name))
        else:
            spec = ReferenceSpec.gaussian(_get(sec, "tau", name))
    elif shape == "rect_spectrum":
        spec = ReferenceSpec.rect_spectrum(_get(sec, "delta_omega", name))
    else:
        raise ConfigError(f"unknown {name}.shape {shape!r}")
    return filter_from_pulse(make_pulse(grid, spec))


def _gaussian_env(grid, tau, center, chirp=0.0):
    t = grid.times - center
    return np.exp(-(t**2) / (4.0 * tau**2) + 0.5j * chirp * t**2) * np.exp(1j * grid.omega0 * center)


def build_signal(cfg, grid, F, base_dir):
    """Signal density matrix from the [signal] section."""
    sec = _section(cfg, "signal")
    kind = _get(sec, "kind", "signal", cast=str)
    if kind in ("gaussian", "chirped_gaussian"):
        tau = _get(sec, "tau", "signal")
        center = _get(sec, "center", "signal", default=0.0)
        chirp = _get(sec, "chirp", "signal", default=0.0) if kind == "chirped_gaussian" else 0.0
        state = TemporalState(grid, _gaussian_env(grid, tau, center, chirp), unnormalized=True)
        return DensityMatrix.from_pure(state.normalize())
    if kind == "double_gaussian":
        tau = _get(sec, "tau", "signal")
        c1, c2 = _float_list(sec, "centers", "signal")
        phase = _get(sec, "phase", "signal", default=0.0)
        amp = _gaussian_env(grid, tau, c1) + np.exp(1j * phase) * _gaussian_env(grid, tau, c2)
        return DensityMatrix.from_pure(TemporalState(grid, amp, unnormalized=True).normalize())
    if kind == "two_time":
        t1 = _get(sec, "t1", "signal")
        t2 = _get(sec, "t2", "signal")
        phase = _get(sec, "phase", "signal", default=0.0)
        mixed = _get(sec, "mixed", "signal", cast=bool, default=False)
        a, b = F.pulse_at(t1), F.pulse_at(t2)
        if mixed:
            return DensityMatrix.mixture([0.5, 0.5], [a, b])
        return DensityMatrix.from_pure((a + np.exp(1j * phase) * b).normalize())
    if kind == "table":
        path = base_dir / _get(sec, "path", "signal", cast=str)
        if not path.exists():
            raise ConfigError(f"signal table {path} does not exist")
        rows = tables.read_table(path.read_text())
        amp = np.array([float(r["re"]) + 1j * float(r["im"]) for r in rows])
        if amp.shape != (grid.n_points,):
            raise ConfigError(f"signal table has {len(amp)} rows, grid has {grid.n_points} samples")
        return DensityMatrix.from_pure(TemporalState(grid, amp, unnormalized=True).normalize())
    raise ConfigError(f"unknown signal.kind {kind!r}")


def build_pair(cfg, grid):
    sec = _section(cfg, "signal")
    kind = _get(sec, "kind", "signal", cast=str)
    if kind != "pdc":
        raise ConfigError("entangle-scan needs signal.kind = 'pdc'")
    return pdc_model(grid, _get(sec, "pump_duration", "signal"), _get(sec, "correlation_time", "signal"))


def trial_plan(cfg, args):
    if args.exact:
        return None
    sec = _section(cfg, "trials", required=False)
    if not sec:
        return None
    trials = _get(sec, "trials_per_setting", "trials", cast=int)
    seed = args.seed if args.seed is not None else _get(sec, "seed", "trials", cast=int, default=0)
    try:
        return TrialPlan(trials, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _meta(command, config_hash, plan, extra=None):
    meta = {
        "command": command,
        "config_sha256": config_hash,
        "seed": "none" if plan is None else str(plan.seed),
        "trials_per_setting": "exact" if plan is None else str(plan.trials_per_setting),
    }
    meta.update(extra or {})
    return meta


def cmd_hom_scan(cfg, plan, config_hash, base_dir):
    grid = build_grid(cfg)
    F = build_filter(cfg, grid)
    rho = build_signal(cfg, grid, F, base_dir)
    delays = sorted(_linspace_or_list(_section(cfg, "schedule"), "delays", "schedule"))
    rows = []
    for index, t in enumerate(delays):
        p = forward_probability(rho, F, t)
        rec = exact_record(p, t) if plan is None else sample_rate(p, plan, index, t)
        rows.append((t, rec.rate, rec.stderr))
    text = tables.render_table(("delay_s", "probability", "stderr"), rows, _meta("hom-scan", config_hash, plan))
    return {"hom_scan.csv": text}


def cmd_sigma_check(cfg, plan, config_hash, base_dir):
    grid = build_grid(cfg)
    F = build_filter(cfg, grid)
    sec = _section(cfg, "schedule", required=False)
    if "phis" in sec:
        phis = _float_list(sec, "phis", "schedule")
    else:
        count = _get(sec, "phi_count", "schedule", cast=int, default=33)
        phis = list(np.linspace(-np.pi, np.pi, count))
    phis = sorted(set(phis) | {0.0})
    rows = [(phi, sigma_overlap(F, 0.0, phi)) for phi in phis]
    meta = _meta("sigma-check", config_hash, None, {"bandwidth_rad_s": tables.fmt(F.bandwidth)})
    return {"sigma.csv": tables.render_table(("phi_rad", "sigma"), rows, meta)}


def cmd_tomography(cfg, plan, config_hash, base_dir):
    grid = build_grid(cfg)
    F = build_filter(cfg, grid)
    sec = _section(cfg, "schedule")
    times = sorted(_float_list(sec, "times", "schedule"))
    phases = _float_list(sec, "phases", "schedule", default=list(DEFAULT_PHASES))
    deconvolve = _get(sec, "deconvolve", "schedule", cast=bool, default=True)
    clip = _get(sec, "clip_threshold", "schedule", default=1e-3)
    for t in times:
        if not grid.contains(t):
            raise ConfigError(f"support time {t} lies outside the grid window")
    schedule = TomographySchedule(tuple(times), F, tuple(phases))

    truth = None
    if "rates_file" in sec:
        path = base_dir / str(sec["rates_file"])
        if not path.exists():
            raise ConfigError(f"rates file {path} does not exist")
        records = tables.parse_records(path.read_text())
    else:
        truth = build_signal(cfg, grid, F, base_dir)
        records = simulate_records(truth, schedule, plan)

    est = TemporalTomography(filter_op=F, deconvolve=deconvolve, clip_threshold=clip).fit(records)
    result = est.result_
    summary = {
        "negativity_mass": result.negativity_mass,
        "unresolved_mass": result.unresolved_mass,
        "max_abs_redundancy": max((abs(v) for v in result.redundancy.values()), default=0.0),
    }
    if result.density is not None:
        summary["density_negativity_mass"] = result.density_negativity_mass
        summary["density_trace"] = result.density_trace
    if truth is not None:
        exact = simulate_records(truth, schedule, None)
        reference_fit = TemporalTomography(filter_op=F, deconvolve=False).fit(exact)
        summary["fidelity_filtered_vs_truth"] = fidelity(result.filtered, reference_fit.result_.filtered)
        if result.density is not None:
            summary["fidelity_density_vs_truth"] = fidelity(result.density, truth)
    meta = _meta("tomography", config_hash, plan, {k: tables.fmt(v) for k, v in summary.items()})
    out = {
        "records.csv": tables.render_table(tables.RECORD_COLUMNS, tables.record_rows(records), meta),
        "rho_filtered.txt": tables.render_matrix(
            result.filtered, dict(meta, support_times_s=" ".join(tables.fmt(t) for t in times))
        ),
        "tomography_summary.csv": tables.render_table(("quantity", "value"), list(summary.items()), meta),
    }
    if result.density is not None:
        out["rho.txt"] = tables.render_matrix(result.density.kernel, dict(meta, kernel="rho(t_j,t_k) envelope frame"))
    return out


def cmd_entangle_scan(cfg, plan, config_hash, base_dir):
    grid = build_grid(cfg)
    F = build_filter(cfg, grid)
    state = build_pair(cfg, grid)
    sec = _section(cfg, "schedule")
    t_base = _get(sec, "t_base", "schedule", default=0.0)
    dts = sorted(set(_linspace_or_list(sec, "delta_t", "schedule")) | {0.0})
    K = _get(sec, "phase_grid", "schedule", cast=int, default=4)
    if not isinstance(state, BipartiteState):
        raise ConfigError("pair signal required")
    scan = entanglement_timescale(state, F, t_base, dts, phase_grid_size=K)
    rows = []
    for d, c in zip(scan.delta_t, scan.coherence):
        verdict, margin = entanglement_witness(c)
        rows.append((d, c.real, c.imag, abs(c), verdict, margin))
    meta = _meta(
        "entangle-scan",
        config_hash,
        None,
        {
            "coherence": "normalized to the four time-pair populations",
            "delta_t_zero_row": "degenerate limit (all four time pairs coincide), value 1/4 by definition",
        },
    )
    lo, hi = scan.extrema
    footer = {
        "crossing_3_8_s": "none" if scan.crossing is None else tables.fmt(scan.crossing),
        "crossing_direction": scan.direction or "none",
        "coherence_abs_min": tables.fmt(lo),
        "coherence_abs_max": tables.fmt(hi),
    }
    header = ("delta_t_s", "coherence_re", "coherence_im", "coherence_abs", "witness", "margin")
    return {"entangle_scan.csv": tables.render_table(header, rows, meta, footer)}


COMMANDS = {
    "hom-scan": cmd_hom_scan,
    "tomography": cmd_tomography,
    "entangle-scan": cmd_entangle_scan,
    "sigma-check": cmd_sigma_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="homtomo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out", type=Path, default=None)
        p.add_argument("--exact", action="store_true", help="ignore the trial plan, write exact probabilities")
        p.add_argument("--seed", type=int, default=None, help="override trials.seed")
    return parser


def _fail(category, message, code):
    print(json.dumps({"error": category, "message": message}), file=sys.stderr)
    return code


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = args.config.read_bytes()
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    try:
        cfg = tomllib.loads(raw.decode("utf-8"))
        plan = trial_plan(cfg, args)
        out_dir = args.out or Path(_section(cfg, "output", required=False).get("dir", "."))
        if not out_dir.is_absolute() and args.out is None:
            out_dir = args.config.parent / out_dir
        files = COMMANDS[args.command](cfg, plan, hashlib.sha256(raw).hexdigest(), args.config.parent)
    except (ConfigError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        return _fail("config", str(exc), EXIT_CONFIG)
    except ValueError as exc:
        return _fail("validation", str(exc), EXIT_VALIDATION)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (out_dir / name).write_text(text)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO)
    for name in files:
        print(out_dir / name)
    return 0


def main(argv=None):
    sys.exit(run(argv))
