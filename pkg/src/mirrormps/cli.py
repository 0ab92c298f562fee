"""Configuration parsing, run/sweep orchestration and machine-readable output.

Config files are flat ``key = value`` text with ``#`` comments; unknown keys
are rejected with line diagnostics.  All times are quoted in units of
1/gamma (set gamma = 1, the default, to work directly in the decay-rate
units used throughout).  Sweeps run one record per grid point with the
no-feedback baseline computed once per distinct (pulse_area, pulse_width,
gamma, numerics) and reused.

Exit codes: 0 success, 2 configuration error, 3 numerical-guard failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, replace

import numpy as np

from .evolve import CutoffOverflowError, run_simulation
from .model import NumericalParams, PhysicalParams, build_step_operators, dump_operators
from .mps_core import TruncationPolicy
from .observables import (NestedSumGuardError, PhotonStats, RESIDUAL_EXCITATION_LIMIT,
                          closure_error, factorial_moments, normalize_against_baseline,
                          photon_probabilities, residual_excitation, vacuum_probability)
from .oracles import dde_integrate, markov_counting_distribution, rabi_final_population


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


#: fixed CSV column order; every record is self-describing
COLUMNS = (
    "gamma", "tau", "phi", "pulse_area", "pulse_width", "feedback",
    "start_excited", "dt", "bin_photon_cutoff", "expansion_order",
    "svd_threshold", "bond_max", "t_start", "t_end",
    "c1", "c2", "c3", "p0", "p1", "p2", "p3", "ratio_r",
    "vacuum_prob", "closure_error", "residual_excitation",
    "pbar0", "pbar1", "pbar2", "pbar3", "r_over_r_baseline",
    "discarded_weight", "max_bond_reached", "flags", "status", "wall_time_s",
)

_OUTPUT_KINDS = ("population_series", "correlations", "probabilities", "normalized")
_SWEEP_PARAMS = ("tau", "phi", "pulse_area")

_FLOAT_KEYS = {"gamma", "tau", "phi", "pulse_area", "pulse_width", "dt",
               "t_start", "t_end", "svd_threshold"}
_INT_KEYS = {"bin_photon_cutoff", "expansion_order", "bond_max", "n_cut"}
_BOOL_KEYS = {"feedback", "start_excited", "allow_short_window"}
_STR_KEYS = {"baseline_mode", "baseline_csv", "outputs"}
_AXIS_SUFFIXES = ("", "_min", "_max", "_count", "_scale", "_values")
_KNOWN_KEYS = (_FLOAT_KEYS | _INT_KEYS | _BOOL_KEYS | _STR_KEYS
               | {f"sweep_axis{i}{s}" for i in (1, 2) for s in _AXIS_SUFFIXES})


@dataclass(frozen=True)
class RunConfig:
    physical: PhysicalParams
    numerical: NumericalParams
    policy: TruncationPolicy
    outputs: tuple[str, ...] = ("correlations", "probabilities")
    baseline_mode: str = "none"            # auto | provided | none
    baseline_csv: str | None = None
    start_excited: bool = False
    allow_short_window: bool = False
    # False when the feedback switch was auto-derived from tau; sweep points
    # that assign tau then re-derive it
    feedback_explicit: bool = True


@dataclass(frozen=True)
class SweepAxis:
    param: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class SweepSpec:
    axes: tuple[SweepAxis, ...]
    base: RunConfig


def _convert(key: str, raw: str, line_no: int, typ):
    if typ is str:
        return raw
    try:
        if typ is bool:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"expected a boolean, got {raw!r}")
        return typ(raw)
    except ValueError as exc:
        raise ConfigError(f"line {line_no}: key {key!r}: {exc}") from None


def _read_pairs(text: str) -> dict[str, tuple[str, int]]:
    pairs: dict[str, tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {stripped!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in pairs:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        pairs[key] = (raw, line_no)
    return pairs


def _build_axis(index: int, pairs, get) -> SweepAxis | None:
    prefix = f"sweep_axis{index}"
    if prefix not in pairs:
        for suffix in _AXIS_SUFFIXES[1:]:
            if prefix + suffix in pairs:
                raise ConfigError(f"{prefix + suffix} given without {prefix}")
        return None
    param, line_no = pairs[prefix]
    if param not in _SWEEP_PARAMS:
        raise ConfigError(f"line {line_no}: {prefix} must be one of {_SWEEP_PARAMS}")
    values_raw = pairs.get(prefix + "_values")
    if values_raw is not None:
        try:
            values = tuple(float(v) for v in values_raw[0].split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"line {values_raw[1]}: {prefix}_values must be "
                              "a comma-separated float list") from None
        if not values:
            raise ConfigError(f"line {values_raw[1]}: {prefix}_values is empty")
        return SweepAxis(param=param, values=values)
    lo = get(prefix + "_min", float, None)
    hi = get(prefix + "_max", float, None)
    if lo is None or hi is None:
        raise ConfigError(f"{prefix} needs either {prefix}_values or "
                          f"{prefix}_min and {prefix}_max")
    scale = get(prefix + "_scale", str, "geometric" if param == "tau" else "linear")
    if scale not in ("geometric", "linear"):
        raise ConfigError(f"{prefix}_scale must be 'geometric' or 'linear'")
    count = get(prefix + "_count", int, None)
    if count is None:
        if scale == "geometric" and lo > 0 and hi > lo:
            count = max(2, round(24.0 * math.log10(hi / lo)) + 1)  # 24 pts/decade
        else:
            raise ConfigError(f"{prefix}_count is required for a linear axis")
    if count < 1:
        raise ConfigError(f"{prefix}_count must be >= 1")
    if count == 1:
        values = (lo,)
    elif scale == "geometric":
        if lo <= 0:
            raise ConfigError(f"{prefix}_min must be > 0 for a geometric axis")
        values = tuple(np.geomspace(lo, hi, count))
    else:
        values = tuple(np.linspace(lo, hi, count))
    return SweepAxis(param=param, values=values)


def parse_config_text(text: str) -> RunConfig | SweepSpec:
    """Parse and validate a config; returns a SweepSpec when sweep keys appear."""
    pairs = _read_pairs(text)

    def get(key, typ, default):
        if key not in pairs:
            return default
        raw, line_no = pairs[key]
        return _convert(key, raw, line_no, typ)

    gamma = get("gamma", float, 1.0)
    tau = get("tau", float, 0.0)
    phi = get("phi", float, 0.0)
    pulse_area = get("pulse_area", float, 0.0)
    pulse_width = get("pulse_width", float, 0.1)
    feedback = get("feedback", bool, None)
    feedback_explicit = feedback is not None
    if feedback is None:
        feedback = tau > 0.0
    start_excited = get("start_excited", bool, False)
    allow_short = get("allow_short_window", bool, False)

    dt = get("dt", float, None)
    if dt is None:
        dt = 0.01 / gamma
        if pulse_area != 0.0:
            dt = min(dt, pulse_width / 20.0)

    outputs_raw = get("outputs", str, "correlations,probabilities")
    outputs = tuple(tok.strip() for tok in outputs_raw.split(",") if tok.strip())
    for tok in outputs:
        if tok not in _OUTPUT_KINDS:
            raise ConfigError(f"unknown output kind {tok!r}; choose from {_OUTPUT_KINDS}")

    baseline_mode = get("baseline_mode", str, None)
    if baseline_mode is None:
        baseline_mode = "auto" if "normalized" in outputs else "none"
    if baseline_mode not in ("auto", "provided", "none"):
        raise ConfigError("baseline_mode must be auto, provided or none")
    baseline_csv = get("baseline_csv", str, None)
    if "normalized" in outputs and baseline_mode == "none":
        raise ConfigError("normalized output requires baseline_mode auto or provided")
    if baseline_mode == "provided" and not baseline_csv:
        raise ConfigError("baseline_mode=provided requires baseline_csv")

    try:
        physical = PhysicalParams(gamma=gamma, tau=tau, phi=phi, pulse_area=pulse_area,
                                  pulse_width=pulse_width, feedback_enabled=feedback)
        numerical = NumericalParams(dt=dt,
                                    bin_photon_cutoff=get("bin_photon_cutoff", int, 3),
                                    t_start=get("t_start", float, None),
                                    t_end=get("t_end", float, None),
                                    expansion_order=get("expansion_order", int, 2))
        policy = TruncationPolicy(threshold=get("svd_threshold", float, 1e-7),
                                  max_bond=get("bond_max", int, 64))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    base = RunConfig(physical=physical, numerical=numerical, policy=policy,
                     outputs=outputs, baseline_mode=baseline_mode,
                     baseline_csv=baseline_csv, start_excited=start_excited,
                     allow_short_window=allow_short,
                     feedback_explicit=feedback_explicit)

    axis1 = _build_axis(1, pairs, get)
    axis2 = _build_axis(2, pairs, get)
    if axis1 is None and axis2 is None:
        return base
    if axis1 is None:
        raise ConfigError("sweep_axis2 given without sweep_axis1")
    axes = (axis1,) if axis2 is None else (axis1, axis2)
    if len(axes) == 2 and axes[0].param == axes[1].param:
        raise ConfigError("sweep axes must target distinct parameters")
    return SweepSpec(axes=axes, base=base)


def parse_config(path: str) -> RunConfig | SweepSpec:
    if path == "-":
        return parse_config_text(sys.stdin.read())
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# record construction

def _stats_fields(stats: PhotonStats | None) -> dict:
    if stats is None:
        return {"p0": None, "p1": None, "p2": None, "p3": None, "ratio_r": None}
    return {"p0": stats.p0, "p1": stats.p1, "p2": stats.p2, "p3": stats.p3,
            "ratio_r": stats.ratio_r}


def run_point(cfg: RunConfig, baseline: PhotonStats | None = None) -> dict:
    """Run one simulation and reduce it to a flat output record.

    Failures of the numerical guards are recorded in-band via the ``status``
    column so that sweeps keep going.
    """
    t0 = time.perf_counter()
    record = {name: None for name in COLUMNS}
    phys, num = cfg.physical, cfg.numerical
    record.update(gamma=phys.gamma, tau=phys.tau, phi=phys.phi,
                  pulse_area=phys.pulse_area, pulse_width=phys.pulse_width,
                  feedback=phys.feedback_enabled, start_excited=cfg.start_excited,
                  dt=num.dt, bin_photon_cutoff=num.bin_photon_cutoff,
                  expansion_order=num.expansion_order,
                  svd_threshold=cfg.policy.threshold, bond_max=cfg.policy.max_bond,
                  flags="", status="ok")
    flags: list[str] = []
    try:
        traj = run_simulation(phys, num, policy=cfg.policy,
                              start_excited=cfg.start_excited,
                              strict=not cfg.allow_short_window)
        record.update(dt=traj.grid.dt, t_start=traj.grid.t_start,
                      t_end=traj.grid.t_end,
                      discarded_weight=traj.final_state.discarded_weight,
                      max_bond_reached=traj.max_bond)
        residual = residual_excitation(traj.final_state)
        record["residual_excitation"] = residual
        if residual > RESIDUAL_EXCITATION_LIMIT:
            flags.append("residual_excitation")
        corr = factorial_moments(traj.final_state, on_residual="ignore")
        record.update(c1=corr.c1, c2=corr.c2, c3=corr.c3)
        stats = photon_probabilities(corr)
        flags.extend(stats.flags)
        record.update(_stats_fields(stats))
        vac = vacuum_probability(traj.final_state)
        record["vacuum_prob"] = vac
        record["closure_error"] = closure_error(stats, vac)
        if baseline is not None:
            norm = normalize_against_baseline(stats, baseline)
            flags.extend(norm.flags)
            record.update(pbar0=norm.pbar0, pbar1=norm.pbar1, pbar2=norm.pbar2,
                          pbar3=norm.pbar3,
                          r_over_r_baseline=norm.r_over_r_baseline)
        record["_trajectory"] = traj
    except (CutoffOverflowError, NestedSumGuardError) as exc:
        record["status"] = f"error: {exc}"
    record["flags"] = ";".join(dict.fromkeys(flags))
    record["wall_time_s"] = time.perf_counter() - t0
    return record


def _baseline_config(cfg: RunConfig) -> RunConfig:
    """The no-feedback twin of a run: same drive, same numerics."""
    phys = replace(cfg.physical, feedback_enabled=False, tau=0.0, phi=0.0)
    return replace(cfg, physical=phys, baseline_mode="none",
                   outputs=("correlations", "probabilities"))


def _baseline_key(cfg: RunConfig) -> tuple:
    p, n = cfg.physical, cfg.numerical
    return (p.gamma, p.pulse_area, p.pulse_width, n.dt, n.bin_photon_cutoff,
            n.expansion_order, cfg.policy.threshold, cfg.policy.max_bond)


def _stats_from_record(rec: dict) -> PhotonStats:
    return PhotonStats(p0=rec["p0"], p1=rec["p1"], p2=rec["p2"], p3=rec["p3"],
                       ratio_r=rec.get("ratio_r"),
                       flags=tuple(str(rec.get("flags") or "").split(";"))
                       if rec.get("flags") else ())


def load_baseline(path: str) -> PhotonStats:
    records = read_records(path)
    if not records:
        raise ConfigError(f"baseline file {path} holds no records")
    return _stats_from_record(records[0])


def _point_config(base: RunConfig, assignment: dict[str, float]) -> RunConfig:
    fields = dict(assignment)
    if "tau" in fields and not base.feedback_explicit:
        fields["feedback_enabled"] = fields["tau"] > 0.0
    phys = replace(base.physical, **fields)
    return replace(base, physical=phys)


def _sweep_worker(args):
    idx, cfg, baseline = args
    rec = run_point(cfg, baseline)
    rec.pop("_trajectory", None)  # not picklable across the pool, not needed
    return idx, rec


def run_sweep(spec: SweepSpec, workers: int = 1, progress=None) -> list[dict]:
    """One record per grid point, ordered by grid index (axis1 outer).

    Baselines are computed once per distinct (pulse_area, pulse_width,
    gamma, numerics) and shared; per-point numerical failures are recorded
    in the record's status field and do not stop the sweep.
    """
    base = spec.base
    assignments = []
    if len(spec.axes) == 1:
        for v1 in spec.axes[0].values:
            assignments.append({spec.axes[0].param: v1})
    else:
        for v1 in spec.axes[0].values:
            for v2 in spec.axes[1].values:
                assignments.append({spec.axes[0].param: v1, spec.axes[1].param: v2})

    configs = [_point_config(base, a) for a in assignments]

    baselines: dict[tuple, PhotonStats | None] = {}
    if base.baseline_mode == "provided":
        shared = load_baseline(base.baseline_csv)
        for cfg in configs:
            baselines[_baseline_key(cfg)] = shared
    elif base.baseline_mode == "auto":
        for cfg in configs:
            key = _baseline_key(cfg)
            if key not in baselines:
                if progress:
                    progress(f"baseline for pulse_area={cfg.physical.pulse_area:g}")
                rec = run_point(_baseline_config(cfg))
                if rec["status"] != "ok":
                    raise RuntimeError(f"baseline run failed: {rec['status']}")
                baselines[key] = _stats_from_record(rec)
    else:
        for cfg in configs:
            baselines[_baseline_key(cfg)] = None

    jobs = [(i, cfg, baselines[_baseline_key(cfg)]) for i, cfg in enumerate(configs)]
    results: list[dict | None] = [None] * len(jobs)
    if workers > 1 and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for idx, rec in pool.map(_sweep_worker, jobs):
                results[idx] = rec
                if progress:
                    progress(f"point {idx + 1}/{len(jobs)} done")
    else:
        for job in jobs:
            idx, rec = _sweep_worker(job)
            results[idx] = rec
            if progress:
                progress(f"point {idx + 1}/{len(jobs)} done")
    return [r for r in results if r is not None]


# ---------------------------------------------------------------------------
# output

def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def emit(records: list[dict], fmt: str, path: str) -> None:
    """Write records as CSV (12 significant digits) or JSON lines."""
    rows = [{k: rec.get(k) for k in COLUMNS} for rec in records]
    try:
        if fmt == "csv":
            with open(path, "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(COLUMNS)
                for row in rows:
                    writer.writerow([_fmt_cell(row[k]) for k in COLUMNS])
        elif fmt == "jsonl":
            with open(path, "w", encoding="utf-8") as fh:
                for row in rows:
                    clean = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else
                                 int(v) if isinstance(v, np.integer) else
                                 float(v) if isinstance(v, (float, np.floating)) else v)
                             for k, v in row.items()}
                    fh.write(json.dumps(clean) + "\n")
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_records(path: str) -> list[dict]:
    """Parse an emitted CSV back into typed records (inverse of emit)."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            rec = {}
            for key, raw in row.items():
                if raw is None or raw == "":
                    rec[key] = None
                elif raw in ("true", "false"):
                    rec[key] = raw == "true"
                elif key in ("flags", "status"):
                    rec[key] = raw
                else:
                    try:
                        rec[key] = int(raw) if raw.lstrip("+-").isdigit() else float(raw)
                    except ValueError:
                        rec[key] = raw
            records.append(rec)
        return records


def _write_population_series(traj, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", "population", "norm", "discarded_weight"))
        for t, p, n, d in zip(traj.times, traj.population, traj.norm,
                              traj.discarded_weight):
            writer.writerow([_fmt_cell(float(v)) for v in (t, p, n, d)])


# ---------------------------------------------------------------------------
# entry point

def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    num, policy = cfg.numerical, cfg.policy
    if args.dt is not None:
        num = replace(num, dt=args.dt)
    if args.bond_max is not None or args.svd_threshold is not None:
        policy = TruncationPolicy(
            threshold=args.svd_threshold if args.svd_threshold is not None
            else policy.threshold,
            max_bond=args.bond_max if args.bond_max is not None else policy.max_bond)
    return replace(cfg, numerical=num, policy=policy)


def _cmd_run(args) -> int:
    parsed = parse_config(args.config)
    if isinstance(parsed, SweepSpec):
        raise ConfigError("config defines a sweep; use the sweep subcommand")
    cfg = _apply_overrides(parsed, args)
    if args.dump_operators:
        ops = build_step_operators(cfg.physical, cfg.numerical)
        for p in dump_operators(ops, args.dump_operators):
            print(f"wrote {p}", file=sys.stderr)
    baseline = None
    if cfg.baseline_mode == "provided":
        baseline = load_baseline(cfg.baseline_csv)
    elif cfg.baseline_mode == "auto":
        rec = run_point(_baseline_config(cfg))
        if rec["status"] != "ok":
            raise RuntimeError(f"baseline run failed: {rec['status']}")
        baseline = _stats_from_record(rec)
    record = run_point(cfg, baseline)
    traj = record.pop("_trajectory", None)
    if record["status"] != "ok":
        print(record["status"], file=sys.stderr)
        emit([record], args.format, args.out)
        return 3
    if "population_series" in cfg.outputs and traj is not None:
        series_path = _series_path(args.out)
        _write_population_series(traj, series_path)
        print(f"wrote {series_path}", file=sys.stderr)
    emit([record], args.format, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _series_path(out: str, index: int | None = None) -> str:
    stem, dot, ext = out.rpartition(".")
    if not dot:
        stem, ext = out, "csv"
    suffix = "_population" if index is None else f"_population_p{index:04d}"
    return f"{stem}{suffix}.csv"


def _cmd_sweep(args) -> int:
    parsed = parse_config(args.config)
    if isinstance(parsed, RunConfig):
        parsed = SweepSpec(axes=(), base=parsed)
    if not parsed.axes:
        raise ConfigError("config defines no sweep axes; use the run subcommand")
    base = _apply_overrides(parsed.base, args)
    spec = SweepSpec(axes=parsed.axes, base=base)

    def progress(msg):
        print(msg, file=sys.stderr, flush=True)

    records = run_sweep(spec, workers=args.workers, progress=progress)
    emit(records, args.format, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_baseline(args) -> int:
    parsed = parse_config(args.config)
    base = parsed.base if isinstance(parsed, SweepSpec) else parsed
    cfg = _apply_overrides(base, args)
    record = run_point(_baseline_config(cfg))
    record.pop("_trajectory", None)
    emit([record], args.format, args.out)
    if record["status"] != "ok":
        print(record["status"], file=sys.stderr)
        return 3
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _cmd_oracle(args) -> int:
    parsed = parse_config(args.config)
    base = parsed.base if isinstance(parsed, SweepSpec) else parsed
    cfg = _apply_overrides(base, args)
    phys, num = cfg.physical, cfg.numerical
    if args.kind == "dde":
        t_max = num.t_end if num.t_end is not None else 10.0 / phys.gamma
        sol = dde_integrate(phys.gamma, phys.tau, phys.phi, t_max, num.dt)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("t", "population", "re_c", "im_c"))
            for t, c in zip(sol.t, sol.c):
                writer.writerow([_fmt_cell(v) for v in
                                 (float(t), float(abs(c) ** 2), c.real, c.imag)])
    elif args.kind == "counting":
        p = markov_counting_distribution(phys.pulse_area, phys.pulse_width,
                                         phys.gamma, n_cut=args.n_cut)
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("n", "p"))
            for n, value in enumerate(p):
                writer.writerow([str(n), _fmt_cell(float(value))])
    elif args.kind == "rabi":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("pulse_area", "final_population"))
            writer.writerow([_fmt_cell(phys.pulse_area),
                             _fmt_cell(rabi_final_population(phys.pulse_area))])
    else:
        raise ConfigError(f"unknown oracle kind {args.kind!r}")
    print(f"wrote {args.out}", file=sys.stderr)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mirrormps",
        description="Photon statistics of a pulsed emitter with mirror feedback")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", required=True, help="config file path or - for stdin")
        p.add_argument("--out", required=True, help="output file path")
        p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
        p.add_argument("--dt", type=float, default=None, help="override time step")
        p.add_argument("--bond-max", type=int, default=None, help="override max bond")
        p.add_argument("--svd-threshold", type=float, default=None,
                       help="override relative SVD threshold")

    p_run = sub.add_parser("run", help="single simulation")
    add_common(p_run)
    p_run.add_argument("--dump-operators", metavar="PREFIX", default=None,
                       help="write u0/u1/u2 as coordinate-list text files")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="parameter sweep")
    add_common(p_sweep)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_base = sub.add_parser("baseline", help="no-feedback reference run")
    add_common(p_base)
    p_base.set_defaults(func=_cmd_baseline)

    p_oracle = sub.add_parser("oracle", help="independent reference solutions")
    add_common(p_oracle)
    p_oracle.add_argument("--kind", choices=("dde", "counting", "rabi"), required=True)
    p_oracle.add_argument("--n-cut", type=int, default=4, dest="n_cut")
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CutoffOverflowError, NestedSumGuardError) as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
