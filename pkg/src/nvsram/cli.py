"""Command line: run | calibrate | backup-compare | montecarlo."""

from __future__ import annotations

import argparse
import dataclasses
import io
import os
import sys
import tempfile

import numpy as np
import yaml

from . import cell as cellmod
from . import config as cfgmod
from . import montecarlo as mc
from . import mtj as mtjmod
from . import power
from .errors import (CalibrationError, ConfigError, DecodeError, NumericError, NvsramError, ParameterError,
                     SolverError)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_DECODE = 0, 1, 2, 3

CSV_COLUMNS = ["time_s", *cellmod.PROBES, "mtj1_mz", "mtj2_mz", "mtj1_i_a", "mtj2_i_a"]
ABSOLUTE_ENERGY_NOTE = ("Absolute energies come from a square-law transistor stand-in and are not "
                        "comparable to published pJ/bit figures obtained with a FinFET design kit; "
                        "only the relative savings are meaningful.")


def _fmt(x) -> str:
    return "%.15g" % x


def _csv(rows: list[np.ndarray]) -> str:
    buf = io.StringIO()
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for block in rows:
        for row in block:
            buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _trace_block(trace, t0: float, skip_first: bool) -> np.ndarray:
    cols = [trace.time + t0] + [trace.v(p) for p in cellmod.PROBES]
    cols += [trace.mz("MTJ1"), trace.mz("MTJ2"), trace.i("MTJ1"), trace.i("MTJ2")]
    block = np.column_stack(cols)
    return block[1:] if skip_first else block


def _plain(obj):
    """Convert numpy scalars/tuples for YAML output."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and np.isnan(obj):
        return None
    return obj


def _report(cfg: dict, body: dict) -> str:
    return yaml.safe_dump(_plain({"config": cfg, **body}), sort_keys=False)


# ----------------------------------------------------------------------------
# subcommands return {filename: text}


def cmd_run(cfg: dict) -> dict[str, str]:
    ops = cfgmod.normalize_operations(cfg["scenario"]["operations"])
    ccfg = cfgmod.cell_config(cfg)
    engine = cfgmod.engine_config(cfg)
    c = cfg["cell"]
    cell = cellmod.build_cell(ccfg, mtj_states=tuple(c["initial_mtj"]), sram_bit=c["initial_bit"],
                              terminate=c["terminate"])
    temperature = cfg["scenario"]["temperature"]
    rng = np.random.default_rng(cfg["seed"])
    blocks, entries = [], []
    t0 = 0.0
    for op in ops:
        script = cellmod.make_script(op["op"], ccfg, op["bit"])
        if cfg["engine"]["t_end"] is not None and t0 + script.duration > cfg["engine"]["t_end"] * (1 + 1e-12):
            raise ConfigError(f"operation sequence exceeds engine.t_end at {op['op']}")
        res = cellmod.run_operation(cell, script, engine, temperature=temperature, rng=rng)
        tr = res.trace
        blocks.append(_trace_block(tr, t0, skip_first=bool(blocks)))
        entry = {
            "op": op["op"], "start_s": t0, "end_s": t0 + tr.time[-1],
            "sram_bit": res.bit, "mtj_bit": res.mtj_bit,
            "energy_j": {"supply": power.source_energy(tr), "scope": power.energy_of(tr, power.scope_elements(tr)),
                         "mtj": power.energy_of(tr, cellmod.MTJ_ELEMENTS)},
        }
        if op["bit"] is not None:
            entry["written_bit"] = op["bit"]
        if op["op"] == "backup":
            entry["termination_time_s"] = None if res.termination_time is None else t0 + res.termination_time
            entry["detect_time_s"] = None if res.detect_time is None else t0 + res.detect_time
        entries.append(entry)
        t0 += tr.time[-1]
    out = cfg["output"]
    files = {out["csv"]: _csv(blocks)}
    files[out["report"]] = _report(cfg, {"command": "run", "operations": entries})
    return files


def cmd_calibrate(cfg: dict) -> dict[str, str]:
    params = cfgmod.mtj_params(cfg)
    eta = mtjmod.calibrate_spin_efficiency(params, dt=cfg["engine"]["dt"])
    measured = mtjmod.critical_current(params.with_eta(eta), dt=cfg["engine"]["dt"])
    body = {"command": "calibrate", "eta": eta, "measured_ic0_a": measured, "target_ic0_a": params.ic0_target,
            "relative_error": abs(measured - params.ic0_target) / params.ic0_target,
            "anisotropy_field_a_per_m": mtjmod.derive_anisotropy_field(params)}
    return {cfg["output"]["report"]: _report(cfg, body)}


def cmd_backup_compare(cfg: dict) -> dict[str, str]:
    ccfg = cfgmod.cell_config(cfg)
    engine = cfgmod.engine_config(cfg)
    rep = power.backup_comparison(ccfg, engine)
    redundant = power.redundant_backup_energy(ccfg, engine)
    runs = {f"{'terminated' if r.terminated else 'baseline'}_bit{r.bit}": dataclasses.asdict(r) for r in rep.runs}
    body = {
        "command": "backup-compare",
        "e_backup_0_j": next(r.scope for r in rep.runs if r.terminated and r.bit == 0),
        "e_backup_1_j": next(r.scope for r in rep.runs if r.terminated and r.bit == 1),
        "mean_j": rep.mean(True),
        "baseline_e_backup_0_j": next(r.scope for r in rep.runs if not r.terminated and r.bit == 0),
        "baseline_e_backup_1_j": next(r.scope for r in rep.runs if not r.terminated and r.bit == 1),
        "baseline_mean_j": rep.mean(False),
        "savings_percent": rep.savings_percent(),
        "mtj_only_savings_percent": rep.savings_percent("mtj"),
        "supply_savings_percent": rep.savings_percent("supply"),
        "outcomes_match": rep.outcomes_match,
        "redundant_write": {"mtj_energy_j": redundant.mtj, "scope_energy_j": redundant.scope,
                            "termination_time_s": redundant.termination_time},
        "runs": runs,
        "reference_savings_percent": power.REFERENCE_SAVINGS_PERCENT,
        "note": ABSOLUTE_ENERGY_NOTE,
    }
    return {cfg["output"]["report"]: _report(cfg, body)}


def cmd_montecarlo(cfg: dict) -> dict[str, str]:
    mcs = cfg["scenario"]["montecarlo"]
    files = {}
    if mcs["kind"] == "savings":
        stats = mc.termination_savings_ensemble(cfgmod.cell_config(cfg), cfgmod.mc_config(cfg),
                                                cfgmod.engine_config(cfg))
        body = {"command": "montecarlo", "kind": "savings", **stats.summary(),
                "corrupt_terminated_outcomes": sum(b == cellmod.CORRUPT for r in stats.runs
                                                   for b in r.terminated_mtj_bits)}
        rows = [[r.index, r.terminated, r.baseline, r.savings_percent] for r in stats.runs]
        header = "run,terminated_j,baseline_j,savings_percent"
    else:
        params = cfgmod.mtj_params(cfg)
        sweeps, rows = [], []
        for od in mcs["overdrives"]:
            conf = cfgmod.mc_config(cfg, od)
            samples = mc.switching_samples(params, conf)
            st = mc.McStats.from_samples(samples)
            rates = []
            for pw in mcs["pulse_widths"]:
                r, ci = mc.error_rate_from_samples(samples, pw)
                rates.append({"pulse_width_s": pw, "error_rate": r, "ci95": list(ci)})
            sweeps.append({"overdrive": od, "stats": st.summary(), "write_error_rates": rates})
            rows += [[od, i, "" if t is None else t] for i, t in enumerate(samples)]
        body = {"command": "montecarlo", "kind": "switching", "sweeps": sweeps}
        header = "overdrive,run,switching_time_s"
    files[cfg["output"]["report"]] = _report(cfg, body)
    if cfg["output"]["samples_csv"]:
        lines = [header] + [",".join(v if isinstance(v, str) else _fmt(v) for v in row) for row in rows]
        files[cfg["output"]["samples_csv"]] = "\n".join(lines) + "\n"
    return files


COMMANDS = {"run": cmd_run, "calibrate": cmd_calibrate, "backup-compare": cmd_backup_compare,
            "montecarlo": cmd_montecarlo}


def _write_atomic(out_dir: str, files: dict[str, str]):
    os.makedirs(out_dir, exist_ok=True)
    temps = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out_dir, prefix=".tmp-")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            temps.append((tmp, os.path.join(out_dir, name)))
        for tmp, final in temps:
            os.replace(tmp, final)
    finally:
        for tmp, _ in temps:
            if os.path.exists(tmp):
                os.remove(tmp)


def exit_code(exc: Exception) -> int:
    if isinstance(exc, (ConfigError, ParameterError)):
        return EXIT_CONFIG
    if isinstance(exc, DecodeError):
        return EXIT_DECODE
    if isinstance(exc, (SolverError, NumericError, CalibrationError)):
        return EXIT_SOLVER
    return EXIT_SOLVER


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="nvsram", description=__doc__)
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="YAML scenario config (defaults used if omitted)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, help="master seed, overrides the config")
    parser.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load(args.config) if args.config else cfgmod.resolve(None)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg["seed"] = args.seed
        files = COMMANDS[args.command](cfg)
    except NvsramError as exc:
        print(f"nvsram {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exit_code(exc)
    _write_atomic(args.out, files)
    if not args.quiet:
        for name in files:
            print(os.path.join(args.out, name))
        if args.command == "backup-compare":
            rep = yaml.safe_load(files[cfg["output"]["report"]])
            print(f"savings: {rep['savings_percent']:.2f}% "
                  f"(published reference figure {power.REFERENCE_SAVINGS_PERCENT}%, context only)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
