# backend/scenarios.py

import os
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import pandas as pd
import scipy

from backend.config import OUTPUT_DIR, PTM_REPORT_TOL, STRICT_OUTPUTS
from backend.errors import ConfigurationError, FitError, NumericalError, ValidationError
from backend.schemas import validate_config
from benchmarking.bootstrap import bootstrap_fit
from benchmarking.clifford import CZ, native_gate_counts
from benchmarking.fitting import clifford_fidelity, composed_clifford_fidelity, fit_rb, interleaved_cz_fidelity
from benchmarking.rb import Depolarizing, cz_error_channel, rb_drift_series, rb_run, simultaneous_rb, summarize_records
from conveyor.potential import potential_sweep, track_minima
from conveyor.tables import load_voltage_table, stack_from_records
from data.io import config_sha256, file_sha256, load_config, read_csv, read_yaml, save_csv, save_json, to_plain
from decision.cz_calibration import cz_calibration_search
from dynamics.evolution import calibrate_cz, evolve, cz_with_phase_error, local_phase_corrected_cz
from dynamics.fidelity import REFERENCE_VALUES, average_gate_fidelity, coherent_budget, dephasing_budget
from dynamics.schedule import cz_schedule
from dynamics.sequences import dcphase_map, edsr_vs_cycle, extract_exchange_from_trace
from exchange.coherence import get_default_table, t2_at_cycle
from exchange.fitting import fit_exponential, fit_saturating
from exchange.models import ExchangeModel, get_default_model, j_at_cycle, j_versus_cycle
from teleport.protocol import (
    TeleportNoise,
    analytic_average_fidelity,
    fidelity_series,
    ordering_comparison,
    phase_map,
    rabi_sweep,
    resource_bell_fidelity,
    teleport_qpt,
)

OUTPUT_SCHEMAS = "data/schemas.yaml"

_output_schemas = None


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    run: Callable


def get_output_schemas():
    global _output_schemas
    if _output_schemas is None:
        _output_schemas = read_yaml(OUTPUT_SCHEMAS)
    return _output_schemas


def _references():
    return read_yaml(REFERENCE_VALUES)


def _drive(cfg):
    if cfg.voltage_table:
        records = [row.model_dump() for row in cfg.voltage_table]
        return stack_from_records(records, cfg.cycle_origin, cfg.v_b3_mV, ac_only=cfg.ac_only)
    return load_voltage_table(cfg.table, cfg.v_b3_mV, cfg.ac_only)


def _table_name(cfg):
    return "included" if cfg.voltage_table else cfg.table


def run_potential_sweep(cfg, seed):
    stack, waveforms = _drive(cfg)
    f = cfg.frequency_MHz * 1e6
    x_grid = stack.default_grid(cfg.x_step_nm) if cfg.x_step_nm else None
    profiles, extrema = potential_sweep(stack, waveforms, f, cfg.cycles, x_grid)
    tracks = track_minima(stack, waveforms, f, cfg.cycles, x_grid)
    return {
        "profiles.csv": profiles,
        "extrema.csv": extrema,
        "tracks.csv": tracks,
        "summary.json": {
            "table": _table_name(cfg),
            "frequency_MHz": cfg.frequency_MHz,
            "n_cycles": len(cfg.cycles),
            "min_minima": int(extrema["n_minima"].min()),
            "max_minima": int(extrema["n_minima"].max()),
            "merged_cycles": extrema.loc[extrema["n_minima"] == 1, "c"].tolist(),
        },
    }


def run_edsr_vs_cycle(cfg, seed):
    stack, waveforms = _drive(cfg)
    lines = edsr_vs_cycle(stack, waveforms, cfg.frequency_MHz * 1e6, cfg.cycles)
    pairs = lines.pivot_table(index=["c", "qubit"], columns="other_spin", values="f_Hz")
    splitting = (pairs[1] - pairs[0]).reset_index(name="splitting_Hz")
    return {
        "edsr.csv": lines,
        "summary.json": {
            "table": _table_name(cfg),
            "frequency_MHz": cfg.frequency_MHz,
            "max_splitting_Hz": float(splitting["splitting_Hz"].max()),
            "max_splitting_c": float(splitting.loc[splitting["splitting_Hz"].idxmax(), "c"]),
        },
    }


def run_j_vs_cycle(cfg, seed):
    table = j_versus_cycle(get_default_model(), cfg.cycles)
    b3 = read_csv(cfg.b3_fixture, required_cols=["v_b3_mV", "J_Hz"])
    saturation = read_csv(cfg.saturation_fixture, required_cols=["c", "J_Hz"])
    exponential = fit_exponential(b3["v_b3_mV"], b3["J_Hz"])
    saturating = fit_saturating(saturation["c"], saturation["J_Hz"])
    model = ExchangeModel.saturating(saturating["J_max"], saturating["c_0"], saturating["w"])
    table["J_saturating_Hz"] = j_at_cycle(model, table["c"].to_numpy())
    k = int(table["J_Hz"].idxmax())
    return {
        "j_vs_cycle.csv": table,
        "fits.json": {
            "exponential": exponential,
            "saturating": saturating,
            "peak_J_Hz": float(table.loc[k, "J_Hz"]),
            "peak_c": float(table.loc[k, "c"]),
        },
    }


def run_dcphase_map(cfg, seed):
    waits = np.arange(0.0, cfg.wait_max_ns + cfg.wait_step_ns / 2, cfg.wait_step_ns)
    delta_ez = cfg.delta_ez_MHz * 1e6
    frame = dcphase_map(cfg.cycles, waits, other_state=cfg.other_state, delta_ez_Hz=delta_ez)
    model, coherence = get_default_model(), get_default_table()

    rows, failed = [], 0
    for c, trace in frame.groupby("c", sort=False):
        extracted = np.nan
        if cfg.extract_exchange:
            try:
                extracted = extract_exchange_from_trace(trace["t_ns"], trace["P_parallel"])
            except FitError as e:
                failed += 1
                logging.warning(f"DCPhase map: exchange extraction failed at c={c:.3f}: {e}")
        rows.append({"c": float(c), "J_model_Hz": float(j_at_cycle(model, c)), "J_extracted_Hz": extracted,
                     "t2_us": float(t2_at_cycle(coherence, c, "Q2|Q5=0"))})
    return {
        "dcphase_map.csv": frame,
        "exchange.csv": pd.DataFrame(rows),
        "summary.json": {
            "other_state": cfg.other_state,
            "delta_ez_MHz": cfg.delta_ez_MHz,
            "n_waits": int(waits.size),
            "failed_extractions": failed,
        },
    }


def run_cz_budget(cfg, seed):
    stages = [s.model_dump(exclude_none=True) for s in cfg.stages] if cfg.stages else None
    schedule = cz_schedule({"stages": stages, "delta_ez_Hz": cfg.delta_ez_MHz * 1e6})
    coherent = coherent_budget(schedule)
    dephasing = dephasing_budget(schedule, None, cfg.t_m_from_s, cfg.t_m_to_s)
    refs = _references()
    return {
        "budget.json": {
            "coherent": coherent,
            "dephasing": dephasing,
            "total_infidelity": coherent["infidelity"] + dephasing["infidelity"],
            "reference": {
                "coherent_infidelity": refs["coherent_cz_infidelity"],
                "dephasing_infidelity": refs["dephasing_cz_infidelity"],
            },
        },
        "pulse.csv": pd.DataFrame(calibrate_cz(schedule).trace(101)),
    }


def _fit_report(records, resamples, seed):
    fit = fit_rb(summarize_records(records))
    sigma = bootstrap_fit(records, resamples, seed) if resamples else 0.0
    return fit, sigma


def run_rb(cfg, seed):
    decays, records = [], []
    for run in range(cfg.runs):
        decay, rec = rb_run(Depolarizing(cfg.depolarizing_p), cfg.lengths, cfg.sequences_per_length, cfg.shots,
                            keep_fraction=cfg.keep_fraction, seed=seed + run, return_records=True, label="rb")
        decays.append(decay)
        records.append(rec)
    fit, sigma = _fit_report(pd.concat(records, ignore_index=True), cfg.bootstrap_resamples, seed)
    drift = rb_drift_series(decays)

    simultaneous = None
    if cfg.simultaneous:
        out = simultaneous_rb({q: Depolarizing(p) for q, p in cfg.single_qubit_p.items()}, cfg.lengths,
                              cfg.sequences_per_length, cfg.shots, cfg.keep_fraction, seed)
        simultaneous = {
            "qubits": {q: {"p": r["fit"]["p"], "fidelity": r["fidelity"]} for q, r in out["qubits"].items()},
            "joint_fidelity": out["joint_fidelity"],
        }

    refs = _references()
    return {
        "decay.csv": pd.concat([d.assign(run=k) for k, d in enumerate(decays)], ignore_index=True)[
            ["run", "L", "mean", "stderr", "n_sequences", "n_shots"]],
        "drift.csv": drift,
        "fit.json": {
            "p": fit["p"],
            "p_stderr": fit["stderr"]["p"],
            "p_bootstrap_std": sigma,
            "A": fit["A"],
            "B": fit["B"],
            "degenerate": fit["degenerate"],
            "F_C": clifford_fidelity(fit["p"]),
            "p_injected": cfg.depolarizing_p,
            "F_C_injected": clifford_fidelity(cfg.depolarizing_p),
            "keep_fraction": cfg.keep_fraction,
            "simultaneous": simultaneous,
            "reference": {"F_C": refs["clifford_reference_fidelity"], "simultaneous": refs["simultaneous_rb"]},
        },
    }


def run_irb(cfg, seed):
    U = evolve(cz_with_phase_error(cz_schedule(), cfg.cz_phase_error_rad))
    injected = average_gate_fidelity(U, local_phase_corrected_cz(U))
    channel = Depolarizing(cfg.depolarizing_p)
    kwargs = dict(lengths=cfg.lengths, sequences_per_length=cfg.sequences_per_length, shots=cfg.shots,
                  keep_fraction=cfg.keep_fraction, seed=seed, return_records=True)
    ref_decay, ref_records = rb_run(channel, label="ref", **kwargs)
    irb_decay, irb_records = rb_run(channel, interleave=CZ, interleave_channel=cz_error_channel(U),
                                    label="irb", **kwargs)
    ref, ref_sigma = _fit_report(ref_records, cfg.bootstrap_resamples, seed)
    irb, irb_sigma = _fit_report(irb_records, cfg.bootstrap_resamples, seed + 1)
    cz = interleaved_cz_fidelity(irb["p"], ref["p"])

    refs = _references()
    r_sq = 1.0 - float(np.mean(list(refs["single_qubit_rb"].values())))
    decay = pd.concat([ref_decay.assign(curve="reference"), irb_decay.assign(curve="interleaved")],
                      ignore_index=True)
    return {
        "decay.csv": decay[["curve", "L", "mean", "stderr", "n_sequences", "n_shots"]],
        "fit.json": {
            "p_ref": ref["p"],
            "p_ref_stderr": ref["stderr"]["p"],
            "p_ref_bootstrap_std": ref_sigma,
            "p_cz": irb["p"],
            "p_cz_stderr": irb["stderr"]["p"],
            "p_cz_bootstrap_std": irb_sigma,
            "F_C_ref": clifford_fidelity(ref["p"]),
            **cz,
            "cz_phase_error_rad": cfg.cz_phase_error_rad,
            "cz_fidelity_injected": injected,
            "composed_clifford_fidelity": composed_clifford_fidelity(1.0 - cz["f_cz_unclamped"], r_sq),
            "native_gate_counts": native_gate_counts(),
            "reference": {"cz_fidelity": refs["cz_fidelity"],
                          "composed_clifford_fidelity": refs["composed_clifford_fidelity_quoted"]},
        },
    }


def run_cz_calibration(cfg, seed):
    out = cz_calibration_search(cfg.b3_offsets_mV, cfg.gate_time_ns, cfg.heating_shift_rad,
                                reference_mV=cfg.reference_mV, scale_mV=cfg.scale_mV)
    grid, fringes = out.pop("grid"), out.pop("fringes")
    out.update(gate_time_ns=cfg.gate_time_ns, heating_shift_rad=cfg.heating_shift_rad)
    return {"grid.csv": grid, "fringes.csv": fringes, "calibration.json": out}


def teleport_noise(cfg):
    n = cfg.noise
    return TeleportNoise(
        bell_prep_depolarizing=n.bell_prep_depolarizing,
        local_cz_depolarizing=n.local_cz_depolarizing,
        parity_error=n.parity_error,
        confusion=tuple(tuple(row) for row in n.confusion),
        idle_dephasing=n.idle_dephasing,
        local_cz_phase_error=n.local_cz_phase_error_rad,
        dephase_odd=n.dephase_odd,
        shuttled_cz=n.shuttled_bell_cz,
    )


def _contrast(values):
    values = np.asarray(values, dtype=float)
    return float(np.nanmax(values) - np.nanmin(values))


def run_teleport_rabi(cfg, seed):
    frame = rabi_sweep(cfg.angles_rad, teleport_noise(cfg), cfg.shots, seed)
    branches = {}
    for label, rows in frame.groupby("bell_label", sort=True):
        branches[label] = {
            "contrast": _contrast(rows["P_parallel"]),
            "contrast_exact": _contrast(rows["P_parallel_exact"]),
            "kept_fraction": float(rows["shots_kept"].mean() / cfg.shots),
        }
    return {"rabi.csv": frame, "summary.json": {"shots": cfg.shots, "branches": branches}}


def run_teleport_phase_map(cfg, seed):
    frame = phase_map(cfg.theta1_rad, cfg.theta2_rad, teleport_noise(cfg), cfg.shots, seed, cfg.branch)
    return {
        "phase_map.csv": frame,
        "summary.json": {
            "branch": cfg.branch,
            "shots": cfg.shots,
            "contrast": _contrast(frame["P_parallel"]),
            "contrast_exact": _contrast(frame["P_parallel_exact"]),
        },
    }


def run_teleport_qpt(cfg, seed):
    noise = teleport_noise(cfg)
    qpt = teleport_qpt(noise, cfg.shots, seed, cfg.branch, cfg.spam_correct, cfg.bootstrap_resamples)
    counts = qpt.pop("counts")
    series = fidelity_series([noise] * cfg.runs, cfg.shots, seed, cfg.bootstrap_resamples, cfg.branch)
    bell = resource_bell_fidelity(noise, cfg.bell_shots, seed, "Q2Q5", cfg.bootstrap_resamples)
    local_bell = resource_bell_fidelity(noise, cfg.bell_shots, seed, "Q5Q6", cfg.bootstrap_resamples)

    ordering = None
    if cfg.ordering_check:
        cmp = ordering_comparison(noise, cfg.ordering_shots, seed, cfg.branch)
        ordering = {"max_abs_z": cmp["max_abs_z"], "agree": cmp["agree"], "table": cmp["table"]}

    refs = _references()
    qpt.update(
        F_avg_analytic=analytic_average_fidelity(noise),
        bell={"Q2Q5": bell, "Q5Q6": local_bell},
        ordering=ordering,
        reference={"teleported_x_gate_fidelity": refs["teleported_x_gate_fidelity"],
                   "bell_fidelity": refs["bell_fidelity"],
                   "local_bell_fidelity": refs["local_bell_fidelity"]},
    )
    return {"qpt.json": qpt, "counts.csv": counts, "series.csv": series}


SCENARIOS = {s.name: s for s in (
    Scenario("potential-sweep", "Conveyor potential profiles and minima over cycles", run_potential_sweep),
    Scenario("j-vs-cycle", "Exchange versus conveyor cycle with exponential and saturating fits", run_j_vs_cycle),
    Scenario("dcphase-map", "Decoupled controlled-phase traces and extracted exchange", run_dcphase_map),
    Scenario("cz-fidelity-budget", "Coherent and dephasing infidelity of the shuttled CZ", run_cz_budget),
    Scenario("rb", "Two-qubit Clifford randomized benchmarking", run_rb),
    Scenario("irb", "Interleaved randomized benchmarking of the CZ", run_irb),
    Scenario("cz-calibration", "B3 offset search by fringe-variance minimum", run_cz_calibration),
    Scenario("teleport-rabi", "Teleported Rabi oscillation per Bell branch", run_teleport_rabi),
    Scenario("teleport-phase-map", "Teleported phase over the preparation and analysis angles", run_teleport_phase_map),
    Scenario("teleport-qpt", "Process tomography of the teleportation channel and Bell fidelities", run_teleport_qpt),
    Scenario("edsr-vs-cycle", "Resonance frequencies of both qubits along the conveyor", run_edsr_vs_cycle),
)}


def list_scenarios():
    return [{"name": s.name, "description": s.description} for s in SCENARIOS.values()]


def check_outputs(name, outputs, strict=STRICT_OUTPUTS):
    """
    Check every output against the shipped schema: CSV files must carry the
    listed columns in order, JSON reports must carry the listed keys.

    Returns:
        list of problems (empty when all outputs conform)
    """
    schema = get_output_schemas().get(name, {})
    problems = []
    for filename in sorted(set(schema) - set(outputs)):
        problems.append(f"{filename}: missing output")
    for filename, payload in outputs.items():
        expected = schema.get(filename)
        if expected is None:
            problems.append(f"{filename}: no schema")
        elif filename.endswith(".csv"):
            if list(payload.columns) != expected["columns"]:
                problems.append(f"{filename}: columns {list(payload.columns)} != {expected['columns']}")
        else:
            missing = [k for k in expected["keys"] if k not in payload]
            if missing:
                problems.append(f"{filename}: missing keys {missing}")
    if problems:
        if strict:
            raise ValidationError(f"Outputs of {name} do not match the schema", problems)
        logging.warning(f"Schema problems in {name}: {problems}")
    return problems


def check_process_reports(name, outputs, tol=PTM_REPORT_TOL):
    """
    Every JSON report carrying a `ptm` must describe a physical channel: the
    Choi matrix is positive and the first PTM row is [1, 0, 0, 0].

    Raises:
        NumericalError on the first breach
    """
    for filename, payload in sorted(outputs.items()):
        if not filename.endswith(".json") or "ptm" not in payload:
            continue
        R = np.asarray(payload["ptm"], dtype=float)
        lam = payload.get("choi_min_eigenvalue")
        if lam is not None and lam < -tol:
            raise NumericalError(f"{name}/{filename}: Choi matrix not positive (min eigenvalue {lam:.3e})")
        tp_row = np.zeros(R.shape[1])
        tp_row[0] = 1.0
        if not np.allclose(R[0], tp_row, atol=tol):
            raise NumericalError(f"{name}/{filename}: PTM is not trace preserving (first row {np.round(R[0], 6).tolist()})")


def build_config(name, config_path=None, config=None):
    """Load (when a path is given) and validate a scenario config."""
    doc = load_config(config_path) if config_path else dict(config or {})
    return validate_config(name, doc)


def run_scenario(name, config_path=None, seed=0, out_dir=None, config=None):
    """
    Run one scenario end to end and write its outputs.

    Outputs go to `<out_dir>/<name>/` together with manifest.json (scenario,
    seed, config hash, library versions and output hashes). No timestamps
    are written, so a fixed seed gives byte-identical files.

    Returns:
        dict with scenario, seed, status, out_dir, files and the JSON reports
    """
    if name not in SCENARIOS:
        raise ConfigurationError(f"Unknown scenario: {name}")
    cfg = build_config(name, config_path, config)
    logging.info(f"Scenario start: name={name} | seed={seed} | config={config_path or 'defaults'}")

    outputs = SCENARIOS[name].run(cfg, int(seed))
    check_outputs(name, outputs)
    check_process_reports(name, outputs)

    target = os.path.join(os.path.abspath(out_dir or OUTPUT_DIR), name)
    hashes = {}
    for filename, payload in sorted(outputs.items()):
        path = os.path.join(target, filename)
        if filename.endswith(".csv"):
            save_csv(payload, path)
        else:
            save_json(payload, path)
        hashes[filename] = file_sha256(path)

    manifest = {
        "scenario": name,
        "seed": int(seed),
        "config": cfg.model_dump(mode="json"),
        "config_sha256": config_sha256(cfg.model_dump(mode="json")),
        "versions": {"numpy": np.__version__, "scipy": scipy.__version__, "pandas": pd.__version__},
        "outputs": hashes,
    }
    save_json(manifest, os.path.join(target, "manifest.json"))
    logging.info(f"Scenario finished: name={name} | seed={seed} | files={len(hashes)} | out={target}")

    reports = {k: v for k, v in outputs.items() if k.endswith(".json")}
    return {
        "scenario": name,
        "seed": int(seed),
        "status": "ok",
        "out_dir": target,
        "files": sorted(hashes) + ["manifest.json"],
        "reports": to_plain(reports),
    }
