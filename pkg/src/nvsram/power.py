"""Energy accounting on simulated traces and the terminated vs. baseline backup comparison."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import cell as cellmod
from .engine import Trace, TransientConfig
from .errors import ParameterError
from .netlist import Capacitor, Mosfet, MtjElement, Resistor, VoltageSource

# Savings figure reported for the reference design; printed only as context.
REFERENCE_SAVINGS_PERCENT = 17.88


def _window_indices(trace: Trace, window: tuple[float, float] | None) -> tuple[int, int]:
    if window is None:
        return 0, len(trace) - 1
    t0, t1 = window
    if t1 < t0:
        raise ParameterError(f"energy window end {t1} precedes start {t0}")
    slack = 0.5 * trace.dt
    if t0 < trace.time[0] - slack or t1 > trace.time[-1] + slack:
        raise ParameterError(f"energy window [{t0}, {t1}] lies outside the trace")
    return trace.index_at(t0), trace.index_at(t1)


def _integrate(trace: Trace, p: np.ndarray, window) -> float:
    a, b = _window_indices(trace, window)
    if b <= a:
        return 0.0
    return float(np.trapezoid(p[a:b + 1], trace.time[a:b + 1]))


def element_energy(trace: Trace, name: str, window: tuple[float, float] | None = None) -> float:
    """Energy absorbed by one element over the window (trapezoid over samples).

    Window ends snap to the nearest sample, so adjacent windows add up
    exactly.
    """
    return _integrate(trace, trace.power(name), window)


def energy_of(trace: Trace, names, window=None) -> float:
    return float(sum(element_energy(trace, n, window) for n in names))


def source_energy(trace: Trace, window=None, sources=None) -> float:
    """Energy delivered by the voltage sources (all of them by default)."""
    names = sources or trace.names_of(VoltageSource)
    return -energy_of(trace, names, window)


def scope_elements(trace: Trace) -> list[str]:
    """MTJs, the X1 bridge and the termination-detection devices."""
    names = [e.name for e in trace.elements]
    return [n for n in names
            if n in cellmod.MTJ_ELEMENTS or n in cellmod.X1_ELEMENTS
            or n.startswith(cellmod.DETECTOR_PREFIX)]


@dataclasses.dataclass(frozen=True)
class EnergyBalance:
    delivered: float
    dissipated: float
    stored: float
    shunt: float

    @property
    def mismatch(self) -> float:
        return self.delivered - self.dissipated - self.stored - self.shunt

    @property
    def relative_error(self) -> float:
        # during power-down the supply absorbs energy, so normalize by the largest term
        scale = max(abs(self.delivered), abs(self.dissipated), abs(self.stored))
        return abs(self.mismatch) / max(scale, 1e-300)


def energy_balance(trace: Trace, window=None) -> EnergyBalance:
    """Compare delivered energy with dissipation plus stored capacitor energy."""
    a, b = _window_indices(trace, window)
    delivered = source_energy(trace, window)
    dissipative = [e.name for e in trace.elements if isinstance(e, (Resistor, Mosfet, MtjElement))]
    dissipated = energy_of(trace, dissipative, window)
    stored = 0.0
    for e in trace.elements:
        if isinstance(e, Capacitor):
            v = trace.branch_voltage(e.name)
            stored += 0.5 * e.c * (v[b] ** 2 - v[a] ** 2)
    # gmin shunts from every node to ground
    vv = trace.voltages[a:b + 1]
    shunt = float(np.trapezoid(trace.gmin * np.sum(vv ** 2, axis=1), trace.time[a:b + 1])) if b > a else 0.0
    return EnergyBalance(delivered, dissipated, stored, shunt)


@dataclasses.dataclass
class BackupEnergy:
    bit: int
    terminated: bool
    scope: float
    mtj: float
    supply: float
    final_mtj_bit: int | str
    termination_time: float | None


@dataclasses.dataclass
class ComparisonReport:
    runs: list[BackupEnergy]

    def _mean(self, terminated: bool, attr: str) -> float:
        vals = [getattr(r, attr) for r in self.runs if r.terminated == terminated]
        return float(np.mean(vals))

    def mean(self, terminated: bool, attr: str = "scope") -> float:
        return self._mean(terminated, attr)

    def savings_percent(self, attr: str = "scope") -> float:
        return savings_percent(self.mean(True, attr), self.mean(False, attr))

    @property
    def outcomes_match(self) -> bool:
        by_bit = {}
        for r in self.runs:
            by_bit.setdefault(r.bit, set()).add(r.final_mtj_bit)
        return all(len(s) == 1 for s in by_bit.values())

    def summary(self) -> dict:
        out = {
            "runs": [dataclasses.asdict(r) for r in self.runs],
            "terminated_mean_j": self.mean(True),
            "baseline_mean_j": self.mean(False),
            "savings_percent": self.savings_percent(),
            "mtj_only_savings_percent": self.savings_percent("mtj"),
            "supply_savings_percent": self.savings_percent("supply"),
            "outcomes_match": self.outcomes_match,
            "reference_savings_percent": REFERENCE_SAVINGS_PERCENT,
        }
        return out


def savings_percent(terminated: float, baseline: float) -> float:
    if not baseline > 0:
        raise ParameterError("baseline energy must be > 0")
    return 100.0 * (baseline - terminated) / baseline


def backup_energy(cell: cellmod.CellInstance, engine: TransientConfig | None = None, *,
                  temperature: float = 0.0, rng=None, noise=None, bit: int | None = None) -> BackupEnergy:
    """Run one backup on ``cell`` and integrate energy over the WRE window."""
    script = cellmod.script_backup(cell.config)
    res = cellmod.run_operation(cell, script, engine, temperature=temperature, rng=rng, noise=noise)
    tr = res.trace
    window = (script.markers["window_start"], script.markers["window_end"])
    return BackupEnergy(
        bit=bit if bit is not None else -1,
        terminated=cell.terminate,
        scope=energy_of(tr, scope_elements(tr), window),
        mtj=energy_of(tr, cellmod.MTJ_ELEMENTS, window),
        supply=source_energy(tr, window),
        final_mtj_bit=res.mtj_bit,
        termination_time=res.termination_time,
    )


def backup_comparison(config: cellmod.CellConfig | None = None, engine: TransientConfig | None = None,
                      *, temperature: float = 0.0, seed: int | None = None) -> ComparisonReport:
    """Backup of each bit from the opposite stored state, with and without termination.

    Each (bit, mode) pair starts from the same MTJ states and, at finite
    temperature, the same thermal noise.
    """
    config = config or cellmod.CellConfig()
    runs = []
    for bit in (0, 1):
        for terminated in (True, False):
            cell = cellmod.build_cell(config, mtj_states=cellmod.mtj_states_for_bit(1 - bit),
                                      sram_bit=bit, terminate=terminated)
            rng = np.random.default_rng([seed, bit]) if seed is not None else None
            runs.append(backup_energy(cell, engine, temperature=temperature, rng=rng, bit=bit))
    return ComparisonReport(runs)


def redundant_backup_energy(config: cellmod.CellConfig | None = None, engine=None, bit: int = 1) -> BackupEnergy:
    """Terminated backup when the MTJs already hold ``bit``."""
    config = config or cellmod.CellConfig()
    cell = cellmod.build_cell(config, mtj_states=cellmod.mtj_states_for_bit(bit), sram_bit=bit)
    return backup_energy(cell, engine, bit=bit)
