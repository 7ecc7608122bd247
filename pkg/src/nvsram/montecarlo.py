"""Seeded stochastic ensembles: switching times, write-error rates, termination savings."""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.stats import binomtest

from . import cell as cellmod
from . import mtj as mtjmod
from . import power
from .engine import TransientConfig
from .errors import ParameterError
from .mtj import MtjParams


@dataclasses.dataclass(frozen=True)
class McConfig:
    n_runs: int = 100
    seed: int = 0
    temperature: float = 300.0
    overdrive: float = 1.5  # current as a multiple of the calibrated Ic0
    horizon: float = mtjmod.DEFAULT_HORIZON
    dt: float = mtjmod.DEFAULT_DT
    pulse_widths: tuple[float, ...] = ()
    workers: int = 1

    def __post_init__(self):
        if self.n_runs < 1:
            raise ParameterError("n_runs must be >= 1")
        if self.temperature < 0:
            raise ParameterError("temperature must be >= 0")
        if not self.horizon > 0 or not self.dt > 0:
            raise ParameterError("horizon and dt must be > 0")
        if self.workers < 1:
            raise ParameterError("workers must be >= 1")
        if any(p < 0 for p in self.pulse_widths):
            raise ParameterError("pulse widths must be >= 0")


def run_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for one run; depends only on (master seed, run index)."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed), int(index)]))


def _map(fn, n, workers):
    if workers == 1:
        return [fn(i) for i in range(n)]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, range(n)))


@dataclasses.dataclass
class McStats:
    n: int
    n_failures: int
    mean: float
    std: float
    min: float
    max: float
    q50: float
    q95: float
    q99: float
    error_rate: float
    error_ci: tuple[float, float]
    samples: np.ndarray  # successful samples only

    @classmethod
    def from_samples(cls, values) -> "McStats":
        """Statistics of a sample list in which None marks a failure."""
        ok = np.array([v for v in values if v is not None], dtype=float)
        n = len(values)
        n_fail = n - len(ok)
        if len(ok):
            q50, q95, q99 = np.quantile(ok, [0.5, 0.95, 0.99])
            mean, lo, hi = float(ok.mean()), float(ok.min()), float(ok.max())
            std = float(ok.std(ddof=1)) if len(ok) > 1 else 0.0
        else:
            q50 = q95 = q99 = mean = lo = hi = std = float("nan")
        ci = binomtest(n_fail, n).proportion_ci(0.95, method="wilson")
        return cls(n, n_fail, mean, std, lo, hi, float(q50), float(q95), float(q99),
                   n_fail / n, (float(ci.low), float(ci.high)), ok)

    def summary(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("samples")
        d["error_ci"] = list(self.error_ci)
        return d


def switching_samples(params: MtjParams, config: McConfig) -> list[float | None]:
    """Per-run AP->P switching times (None when no switch within the horizon)."""
    params = params.calibrated()
    current = config.overdrive * params.ic0_target

    def one(i):
        rng = run_rng(config.seed, i)
        return mtjmod.switching_time(params, current, config.temperature, rng,
                                     horizon=config.horizon, dt=config.dt)

    return _map(one, config.n_runs, config.workers)


def switching_ensemble(params: MtjParams, config: McConfig) -> McStats:
    return McStats.from_samples(switching_samples(params, config))


def error_rate_from_samples(samples, pulse_width: float) -> tuple[float, tuple[float, float]]:
    """Fraction of runs not switched within ``pulse_width``, with a 95% Wilson interval."""
    if pulse_width < 0:
        raise ParameterError("pulse width must be >= 0")
    n = len(samples)
    fails = sum(1 for t in samples if t is None or t > pulse_width)
    ci = binomtest(fails, n).proportion_ci(0.95, method="wilson")
    return fails / n, (float(ci.low), float(ci.high))


def write_error_rate(params: MtjParams, config: McConfig, pulse_width: float):
    return error_rate_from_samples(switching_samples(params, config), pulse_width)


# ----------------------------------------------------------------------------
# paired terminated / baseline backups


@dataclasses.dataclass
class PairedRun:
    index: int
    terminated: float  # mean over bits of the scoped backup energy
    baseline: float
    terminated_mtj_bits: tuple
    baseline_mtj_bits: tuple
    termination_times: tuple

    @property
    def savings_percent(self) -> float:
        return power.savings_percent(self.terminated, self.baseline)


@dataclasses.dataclass
class SavingsStats:
    runs: list[PairedRun]
    terminated: McStats
    baseline: McStats
    savings: McStats

    def summary(self) -> dict:
        return {
            "terminated_energy_j": self.terminated.summary(),
            "baseline_energy_j": self.baseline.summary(),
            "savings_percent": self.savings.summary(),
            "all_paired_terminated_le_baseline": all(r.terminated <= r.baseline for r in self.runs),
        }


def _initial_states(params: MtjParams, bit: int, temperature: float, rng):
    labels = cellmod.mtj_states_for_bit(1 - bit)
    if temperature <= 0:
        return labels
    return tuple(mtjmod.sample_equilibrium_state(params, 1 if s == "P" else -1, rng) for s in labels)


def paired_backup(cell_config: cellmod.CellConfig, config: McConfig, index: int,
                  engine: TransientConfig | None = None) -> PairedRun:
    """One ensemble member: both bits, each backed up with and without termination
    from the same initial magnetizations and the same thermal field sequence."""
    engine = engine or TransientConfig(dt=config.dt)
    params = cell_config.mtj.calibrated()
    script = cellmod.script_backup(cell_config)
    n_steps = dataclasses.replace(engine, t_end=script.duration).n_steps
    rng = run_rng(config.seed, index)
    energies = {True: [], False: []}
    bits = {True: [], False: []}
    t_term = []
    for bit in (0, 1):
        states = _initial_states(params, bit, config.temperature, rng)
        if config.temperature > 0:
            sigma = mtjmod.thermal_sigma(params, engine.dt, config.temperature)
            noise = sigma * rng.standard_normal((n_steps, 2, 3))
        else:
            noise = np.zeros((n_steps, 2, 3))
        for terminated in (True, False):
            cell = cellmod.build_cell(cell_config, mtj_states=states, sram_bit=bit, terminate=terminated,
                                      check_window=False)
            e = power.backup_energy(cell, engine, noise=noise, bit=bit)
            energies[terminated].append(e.scope)
            bits[terminated].append(e.final_mtj_bit)
            if terminated:
                t_term.append(e.termination_time)
    return PairedRun(index, float(np.mean(energies[True])), float(np.mean(energies[False])),
                     tuple(bits[True]), tuple(bits[False]), tuple(t_term))


def termination_savings_ensemble(cell_config: cellmod.CellConfig, config: McConfig,
                                 engine: TransientConfig | None = None) -> SavingsStats:
    cell_config.check_backup_window(config.dt)
    runs = _map(lambda i: paired_backup(cell_config, config, i, engine), config.n_runs, config.workers)
    return SavingsStats(
        runs,
        McStats.from_samples([r.terminated for r in runs]),
        McStats.from_samples([r.baseline for r in runs]),
        McStats.from_samples([r.savings_percent for r in runs]),
    )
