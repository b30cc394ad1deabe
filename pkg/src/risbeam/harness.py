"""Experiment orchestration: config files, seeded Monte-Carlo runs over
channel realizations, and CSV trace/summary emission.

Seeding contract: the per-run generator seed is a pure function of
(master_seed, sweep index, realization index, stream id), implemented with
numpy's SeedSequence.  Stream 0 draws user positions and steering angles,
stream 1 the channel matrices, stream 2 the shared initial phase vector,
and stream 3 the Lipschitz probe points.  Every variant of one realization
therefore sees the identical channel set and initial phases, and reruns
with the same master seed reproduce all non-timing outputs byte for byte.

Config files are JSON with dBm power units at this boundary; see
``configs/`` for annotated presets.  CLI flags override file values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ao import AlgorithmVariant, SolveResult, solve
from .channel import (GeometryConfig, angles_from_geometry, generate_channels,
                      sample_user_positions, save_channels, stack_channels)
from .metrics import OpCounter
from .model import (PhaseVector, SystemConfig, UnsupportedConfigError,
                    dbm_to_watts, validate_config)
from .precoder_sca import matched_filter_init, solve_precoder
from .ris_spgm import estimate_lipschitz

FULL_SCALE_WEIGHTS = (0.2449, 0.2509, 0.2570, 0.2472)

TRACE_COLUMNS = ("outer_iter", "wsr_nats", "wsr_bits", "alpha", "ls_steps",
                 "sca_iters", "cum_cmul", "elapsed_sec")
SUMMARY_COLUMNS = ("sweep_param", "sweep_value", "variant", "mean_wsr", "std_wsr",
                   "mean_cmul", "mean_outer_iters", "mean_time_sec", "n_ok", "n_failed")
TIMING_COLUMNS = ("elapsed_sec", "mean_time_sec")

SWEEPABLE = ("n_ris", "n_tx", "power_bs")

STREAM_GEOMETRY = 0
STREAM_CHANNEL = 1
STREAM_THETA0 = 2
STREAM_LIPSCHITZ = 3


def full_scale_system_config(**overrides) -> SystemConfig:
    """Full-scale defaults of the reference experiments (slow; manual runs)."""
    base = dict(
        n_tx=64, n_ris=400, n_users=4, n_rx=2, n_streams=2,
        power_bs=dbm_to_watts(30.0), noise_power=dbm_to_watts(-90.0),
        weights=FULL_SCALE_WEIGHTS,
    )
    base.update(overrides)
    return SystemConfig(**base)


def desk_system_config(**overrides) -> SystemConfig:
    """Scaled-down preset used by CI and the acceptance suite."""
    base = dict(
        n_tx=16, n_ris=64, n_users=2, n_rx=2, n_streams=2,
        power_bs=dbm_to_watts(30.0), noise_power=dbm_to_watts(-90.0),
        weights=(0.5, 0.5),
    )
    base.update(overrides)
    return SystemConfig(**base)


def default_geometry(**overrides) -> GeometryConfig:
    base = dict(bs_pos=(0.0, 0.0), ris_pos=(200.0, 0.0),
                user_center=(200.0, 30.0), user_radius=10.0, rician_k=10.0)
    base.update(overrides)
    return GeometryConfig(**base)


@dataclass(frozen=True)
class ExperimentSpec:
    """One experiment: a config, a geometry, variants, and a seed plan."""

    base_config: SystemConfig
    geometry: GeometryConfig
    variants: tuple[AlgorithmVariant, ...]
    n_realizations: int
    master_seed: int
    output_dir: str
    sweep_parameter: str | None = None
    sweep_values: tuple[float, ...] = ()
    save_channel_files: bool = True


def validate_spec(spec: ExperimentSpec) -> list[str]:
    errors = validate_config(spec.base_config)
    if spec.n_realizations < 1:
        errors.append("n_realizations must be at least 1")
    if not spec.variants:
        errors.append("at least one variant is required")
    if spec.sweep_parameter is not None:
        if spec.sweep_parameter not in SWEEPABLE:
            errors.append(f"sweep parameter must be one of {SWEEPABLE}")
        if not spec.sweep_values:
            errors.append("sweep values must be nonempty")
        elif any(b <= a for a, b in zip(spec.sweep_values, spec.sweep_values[1:])):
            errors.append("sweep values must be strictly increasing")
    return errors


def derive_run_seed(master_seed: int, sweep_index: int, realization: int,
                    stream: int) -> int:
    """Documented pure map from run coordinates to a 64-bit generator seed."""
    seq = np.random.SeedSequence([master_seed, sweep_index, realization, stream])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def apply_sweep(cfg: SystemConfig, parameter: str | None, value: float) -> SystemConfig:
    if parameter is None:
        return cfg
    if parameter == "n_ris":
        return replace(cfg, n_ris=int(value))
    if parameter == "n_tx":
        return replace(cfg, n_tx=int(value))
    if parameter == "power_bs":
        # Sweep values are dBm at the experiment boundary.
        return replace(cfg, power_bs=dbm_to_watts(float(value)))
    raise ValueError(f"unknown sweep parameter {parameter!r}")


def draw_initial_phases(n_ris: int, seed: int) -> PhaseVector:
    rng = np.random.default_rng(seed)
    return PhaseVector.from_angles(rng.uniform(0.0, 2.0 * np.pi, size=n_ris))


def realize_channels(spec: ExperimentSpec, cfg: SystemConfig, sweep_index: int,
                     realization: int):
    """Channel set and shared initial phases for one realization."""
    rng_geo = np.random.default_rng(
        derive_run_seed(spec.master_seed, sweep_index, realization, STREAM_GEOMETRY))
    positions = sample_user_positions(spec.geometry, cfg.n_users, rng_geo)
    angles = angles_from_geometry(spec.geometry, cfg.n_users, rng_geo)
    ch = generate_channels(
        cfg, spec.geometry, angles, positions,
        derive_run_seed(spec.master_seed, sweep_index, realization, STREAM_CHANNEL))
    theta0 = draw_initial_phases(
        cfg.n_ris,
        derive_run_seed(spec.master_seed, sweep_index, realization, STREAM_THETA0))
    return ch, theta0


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: tuple[str, ...], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_trace(path: Path, result: SolveResult) -> None:
    trace = result.trace
    rows = []
    for i in range(trace.n_outer_iters):
        nats = trace.wsr_per_outer_iter[i]
        rows.append((i + 1, nats, nats / math.log(2.0), trace.step_sizes[i],
                     trace.line_search_steps[i], trace.sca_iters[i],
                     trace.cmul_per_outer_iter[i], trace.elapsed_per_outer_iter[i]))
    _write_csv(path, TRACE_COLUMNS, rows)


def strip_timing_columns(csv_text: str) -> str:
    """Drop wall-clock columns; what remains must be reproducible exactly."""
    reader = csv.reader(io.StringIO(csv_text))
    rows = list(reader)
    if not rows:
        return ""
    keep = [i for i, name in enumerate(rows[0]) if name not in TIMING_COLUMNS]
    out = io.StringIO()
    writer = csv.writer(out)
    for row in rows:
        writer.writerow([row[i] for i in keep])
    return out.getvalue()


def _run_one_realization(spec: ExperimentSpec, cfg: SystemConfig,
                         sweep_index: int, sweep_value, realization: int,
                         out_dir: Path) -> list[dict]:
    ch, theta0 = realize_channels(spec, cfg, sweep_index, realization)
    if spec.save_channel_files:
        channel_path = out_dir / "channels" / f"sweep{sweep_index}_r{realization}.npz"
        channel_path.parent.mkdir(parents=True, exist_ok=True)
        save_channels(channel_path, ch)
    records = []
    for variant in spec.variants:
        counter = OpCounter()
        record = dict(sweep_index=sweep_index, sweep_value=sweep_value,
                      variant=variant.value, realization=realization)
        try:
            result = solve(ch, cfg, variant, theta0,
                           seed=derive_run_seed(spec.master_seed, sweep_index,
                                                realization, STREAM_CHANNEL),
                           counter=counter)
        except Exception as exc:   # recorded, never aborts the experiment
            record.update(ok=False, error=f"{type(exc).__name__}: {exc}")
            records.append(record)
            continue
        trace_name = (f"{spec.sweep_parameter or 'none'}-{sweep_value}"
                      f"_r{realization}_{variant.value}.csv")
        write_trace(out_dir / "traces" / trace_name, result)
        record.update(ok=True, wsr=result.wsr_final,
                      cmul=result.trace.complex_mult_count,
                      outer_iters=result.trace.n_outer_iters,
                      time_sec=result.trace.wall_time_sec)
        records.append(record)
    return records


def run_experiment(spec: ExperimentSpec, max_workers: int = 1) -> dict:
    """Run every (sweep value x realization x variant) job and write outputs.

    Returns a summary dict with the aggregated rows and failure count.  All
    numeric outputs are deterministic functions of the spec; only wall-time
    columns vary between reruns.
    """
    errors = validate_spec(spec)
    if errors:
        raise ValueError("invalid experiment spec: " + "; ".join(errors))
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    sweep = list(enumerate(spec.sweep_values)) if spec.sweep_parameter else [(0, 0)]
    jobs = []
    for sweep_index, value in sweep:
        cfg = apply_sweep(spec.base_config, spec.sweep_parameter, value)
        for realization in range(spec.n_realizations):
            jobs.append((cfg, sweep_index, value, realization))

    records: list[dict] = []
    if max_workers <= 1:
        for cfg, sweep_index, value, realization in jobs:
            records.extend(_run_one_realization(spec, cfg, sweep_index, value,
                                                realization, out_dir))
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            futures = [pool.submit(_run_one_realization, spec, cfg, sweep_index,
                                   value, realization, out_dir)
                       for cfg, sweep_index, value, realization in jobs]
            for future in futures:
                records.extend(future.result())

    summary_rows = []
    for sweep_index, value in sweep:
        for variant in spec.variants:
            group = [r for r in records
                     if r["sweep_index"] == sweep_index and r["variant"] == variant.value]
            ok = [r for r in group if r["ok"]]
            failed = len(group) - len(ok)
            if ok:
                wsrs = np.array([r["wsr"] for r in ok])
                row = (spec.sweep_parameter or "none", value, variant.value,
                       float(np.mean(wsrs)), float(np.std(wsrs)),
                       float(np.mean([r["cmul"] for r in ok])),
                       float(np.mean([r["outer_iters"] for r in ok])),
                       float(np.mean([r["time_sec"] for r in ok])),
                       len(ok), failed)
            else:
                row = (spec.sweep_parameter or "none", value, variant.value,
                       float("nan"), float("nan"), float("nan"), float("nan"),
                       float("nan"), 0, failed)
            summary_rows.append(row)
    summary_rows.sort(key=lambda r: (str(r[0]), float(r[1]), str(r[2])))
    _write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, summary_rows)

    n_failed = sum(1 for r in records if not r["ok"])
    failures = [r for r in records if not r["ok"]]
    return dict(rows=summary_rows, records=records, n_failed=n_failed,
                failures=failures, summary_path=str(out_dir / "summary.csv"))


LIPSCHITZ_COLUMNS = ("realization", "lipschitz_original", "lipschitz_equivalent", "ratio")


def experiment_lipschitz(spec: ExperimentSpec, n_sample_pairs: int = 10_000) -> dict:
    """Estimate gradient Lipschitz constants of both phase objectives.

    Single-antenna users only.  Per realization, the precoder is fixed by
    one inner-loop solve at random phases; both estimators then see the same
    probe points.  Emits one row per realization plus a median-ratio summary.
    """
    cfg = spec.base_config
    if cfg.n_rx != 1 or cfg.n_streams != 1:
        raise UnsupportedConfigError(
            "the Lipschitz experiment requires single-antenna users (n_rx = n_streams = 1)")
    errors = validate_spec(spec)
    if errors:
        raise ValueError("invalid experiment spec: " + "; ".join(errors))
    out_dir = Path(spec.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = []
    ratios = []
    for realization in range(spec.n_realizations):
        ch, theta0 = realize_channels(spec, cfg, 0, realization)
        h_stack = stack_channels(ch, theta0)
        solved = solve_precoder(matched_filter_init(cfg), h_stack, cfg)
        probe_seed = derive_run_seed(spec.master_seed, 0, realization, STREAM_LIPSCHITZ)
        l_orig = estimate_lipschitz(ch, solved.precoders, cfg, n_sample_pairs,
                                    "original", probe_seed)
        l_equiv = estimate_lipschitz(ch, solved.aux, cfg, n_sample_pairs,
                                     "equivalent", probe_seed)
        ratio = l_equiv / l_orig if l_orig > 0 else float("inf")
        ratios.append(ratio)
        rows.append((realization, l_orig, l_equiv, ratio))

    median_ratio = float(np.median(ratios))
    _write_csv(out_dir / "lipschitz.csv", LIPSCHITZ_COLUMNS,
               rows + [("median", float("nan"), float("nan"), median_ratio)])
    return dict(rows=rows, median_ratio=median_ratio,
                output_path=str(out_dir / "lipschitz.csv"))


# ---------------------------------------------------------------------------
# Config file handling (JSON, dBm power units at this boundary).
# ---------------------------------------------------------------------------

def system_config_from_dict(raw: dict) -> SystemConfig:
    data = dict(raw)
    if "power_bs_dbm" in data:
        data["power_bs"] = dbm_to_watts(float(data.pop("power_bs_dbm")))
    if "noise_dbm" in data:
        data["noise_power"] = dbm_to_watts(float(data.pop("noise_dbm")))
    data["weights"] = tuple(float(w) for w in data["weights"])
    return SystemConfig(**data)


def geometry_from_dict(raw: dict) -> GeometryConfig:
    data = dict(raw)
    for key in ("bs_pos", "ris_pos", "user_center"):
        data[key] = tuple(float(v) for v in data[key])
    return GeometryConfig(**data)


def spec_from_dict(raw: dict, overrides: dict | None = None) -> ExperimentSpec:
    """Build an ExperimentSpec from parsed JSON; ``overrides`` patches the
    experiment section (CLI flags win over file values)."""
    experiment = dict(raw.get("experiment", {}))
    if overrides:
        experiment.update({k: v for k, v in overrides.items() if v is not None})
    sweep = experiment.get("sweep")
    return ExperimentSpec(
        base_config=system_config_from_dict(raw["system"]),
        geometry=geometry_from_dict(raw["geometry"]),
        variants=tuple(AlgorithmVariant(v) for v in experiment["variants"]),
        n_realizations=int(experiment["n_realizations"]),
        master_seed=int(experiment["master_seed"]),
        output_dir=str(experiment["output_dir"]),
        sweep_parameter=None if not sweep else sweep["parameter"],
        sweep_values=() if not sweep else tuple(float(v) for v in sweep["values"]),
        save_channel_files=bool(experiment.get("save_channel_files", True)),
    )


def load_spec(path, overrides: dict | None = None) -> ExperimentSpec:
    with open(path) as handle:
        return spec_from_dict(json.load(handle), overrides)
