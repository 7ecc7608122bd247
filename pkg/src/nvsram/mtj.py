"""Macrospin STT-MTJ model.

The free layer is a single unit vector ``m`` with a uniaxial easy axis along
+z (perpendicular anisotropy). ``m_z = +1`` is the parallel (low resistance)
state, ``m_z = -1`` the anti-parallel state. Dynamics follow the
Landau-Lifshitz-Gilbert equation with a Slonczewski damping-like torque and a
Brown thermal field, integrated with the Heun scheme (Stratonovich).

Sign convention: positive current flows from the free terminal to the pinned
terminal and pushes the free layer toward P.
"""

from __future__ import annotations

import dataclasses
import functools
import math

import numpy as np
from numba import njit
from scipy.constants import e as Q_E
from scipy.constants import hbar as HBAR
from scipy.constants import k as K_B
from scipy.constants import mu_0 as MU_0

from .errors import CalibrationError, NumericError, ParameterError

GAMMA = 1.76e11  # rad/(s*T)
DT_MAX = 10e-12
DEFAULT_DT = 1e-12
DEFAULT_HORIZON = 50e-9
DEFAULT_TILT_DEG = 1.0
SETTLED_MZ = 0.9

# accepted resistance bands for the P and AP states
RP_RANGE = (5.3e3, 5.7e3)
RAP_RANGE = (10.2e3, 15.03e3)
TMR_MIN = 1.0


@dataclasses.dataclass(frozen=True)
class MtjParams:
    free_layer_width: float = 20e-9
    free_layer_length: float = 20e-9
    free_layer_thickness: float = 1.4e-9
    oxide_thickness: float = 1.15e-9
    ms: float = 7.0e5  # A/m (700 emu/cm^3)
    alpha: float = 0.028
    delta: float = 56.0
    r_parallel: float = 5.5e3
    r_antiparallel: float = 12.0e3
    ic0_target: float = 27e-6
    temperature: float = 300.0
    eta: float | None = None
    gamma: float = GAMMA
    # eta absorbs every prefactor convention, so values above 1 are allowed
    # only when flagged as an effective (calibrated) efficiency.
    effective_eta: bool = True

    def __post_init__(self):
        positive = {
            "free_layer_width": self.free_layer_width,
            "free_layer_length": self.free_layer_length,
            "free_layer_thickness": self.free_layer_thickness,
            "oxide_thickness": self.oxide_thickness,
            "ms": self.ms,
            "alpha": self.alpha,
            "delta": self.delta,
            "r_parallel": self.r_parallel,
            "r_antiparallel": self.r_antiparallel,
            "ic0_target": self.ic0_target,
            "temperature": self.temperature,
            "gamma": self.gamma,
        }
        for name, value in positive.items():
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be finite and > 0, got {value!r}")
        if self.r_antiparallel < self.r_parallel * (1.0 + TMR_MIN):
            raise ParameterError(
                f"TMR ratio {self.tmr:.3f} below the >100% requirement "
                f"(Rp={self.r_parallel}, Rap={self.r_antiparallel})"
            )
        if self.eta is not None:
            if not (math.isfinite(self.eta) and self.eta > 0):
                raise ParameterError(f"eta must be > 0, got {self.eta!r}")
            if self.eta > 1 and not self.effective_eta:
                raise ParameterError(f"eta={self.eta} > 1 requires effective_eta=True")

    @property
    def volume(self) -> float:
        return self.free_layer_width * self.free_layer_length * self.free_layer_thickness

    @property
    def tmr(self) -> float:
        return (self.r_antiparallel - self.r_parallel) / self.r_parallel

    @property
    def barrier_energy(self) -> float:
        return self.delta * K_B * self.temperature

    def with_eta(self, eta: float) -> "MtjParams":
        return dataclasses.replace(self, eta=eta)

    def calibrated(self) -> "MtjParams":
        """Return a copy with eta set, calibrating if it is missing."""
        if self.eta is not None:
            return self
        return self.with_eta(calibrate_spin_efficiency(self))


@dataclasses.dataclass
class MagnetizationState:
    m: np.ndarray

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=float).reshape(3)
        norm = np.linalg.norm(self.m)
        if not np.isfinite(norm) or abs(norm - 1.0) > 1e-9:
            raise ParameterError(f"magnetization must be a unit vector, |m|={norm}")

    @property
    def mz(self) -> float:
        return float(self.m[2])

    @classmethod
    def pole(cls, sign: int, tilt_deg: float = 0.0) -> "MagnetizationState":
        """State near +z (sign=+1, P) or -z (sign=-1, AP), tilted toward +x."""
        th = math.radians(tilt_deg)
        return cls(np.array([math.sin(th), 0.0, sign * math.cos(th)]))

    @classmethod
    def parallel(cls, tilt_deg: float = DEFAULT_TILT_DEG) -> "MagnetizationState":
        return cls.pole(+1, tilt_deg)

    @classmethod
    def antiparallel(cls, tilt_deg: float = DEFAULT_TILT_DEG) -> "MagnetizationState":
        return cls.pole(-1, tilt_deg)

    def copy(self) -> "MagnetizationState":
        return MagnetizationState(self.m.copy())


@dataclasses.dataclass
class MtjDevice:
    """An MTJ instance. Terminals are node names in the owning netlist."""

    params: MtjParams
    state: MagnetizationState
    free_terminal: str = "free"
    pinned_terminal: str = "pinned"
    name: str = "mtj"

    def __post_init__(self):
        if self.free_terminal == self.pinned_terminal:
            raise ParameterError("MTJ free and pinned terminals must differ")

    @property
    def resistance(self) -> float:
        return 1.0 / conductance(self.state, self.params)

    def is_parallel(self) -> bool | None:
        """True for settled P, False for settled AP, None if in between."""
        mz = self.state.mz
        if mz > SETTLED_MZ:
            return True
        if mz < -SETTLED_MZ:
            return False
        return None


def derive_anisotropy_field(params: MtjParams) -> float:
    """Anisotropy field Hk (A/m) that makes the barrier 1/2 mu0 Ms Hk V equal Delta kB T."""
    v = params.volume
    if not (v > 0 and params.ms > 0):
        raise ParameterError("volume and Ms must be positive")
    return 2.0 * params.barrier_energy / (MU_0 * params.ms * v)


def barrier_from_field(params: MtjParams, hk: float) -> float:
    return 0.5 * MU_0 * params.ms * hk * params.volume


def conductance_mz(mz, params: MtjParams):
    gp = 1.0 / params.r_parallel
    gap = 1.0 / params.r_antiparallel
    return 0.5 * ((gp + gap) + (gp - gap) * mz)


def conductance(state: MagnetizationState, params: MtjParams) -> float:
    return float(conductance_mz(state.mz, params))


def effective_field(state: MagnetizationState, params: MtjParams, thermal=None) -> np.ndarray:
    h = np.array([0.0, 0.0, derive_anisotropy_field(params) * state.mz])
    if thermal is not None:
        h = h + np.asarray(thermal, dtype=float)
    return h


def thermal_sigma(params: MtjParams, dt: float, temperature: float | None = None) -> float:
    """Per-component standard deviation (A/m) of the discretized thermal field."""
    if not dt > 0:
        raise ParameterError(f"dt must be > 0, got {dt!r}")
    t = params.temperature if temperature is None else temperature
    if t < 0:
        raise ParameterError(f"temperature must be >= 0, got {t!r}")
    var = 2.0 * params.alpha * K_B * t / (params.gamma * MU_0**2 * params.ms * params.volume * dt)
    return math.sqrt(var)


def sample_thermal_field(params: MtjParams, dt: float, rng: np.random.Generator,
                         temperature: float | None = None, size=None) -> np.ndarray:
    sigma = thermal_sigma(params, dt, temperature)
    shape = (3,) if size is None else (size, 3)
    if sigma == 0.0:
        return np.zeros(shape)
    return sigma * rng.standard_normal(shape)


def stt_field(params: MtjParams, current: float) -> float:
    """Damping-like spin-torque amplitude expressed as a field (A/m)."""
    if params.eta is None:
        raise ParameterError("eta is not set; call MtjParams.calibrated() first")
    return HBAR * params.eta * current / (2.0 * Q_E * MU_0 * params.ms * params.volume)


def _reduced_gamma(params: MtjParams) -> float:
    return params.gamma * MU_0 / (1.0 + params.alpha**2)


@njit(cache=True, nogil=True)
def _rhs(mx, my, mz, hx, hy, hz, a_stt, gmu, alpha):
    # m x H
    cx = my * hz - mz * hy
    cy = mz * hx - mx * hz
    cz = mx * hy - my * hx
    # m x (m x H)
    dx = my * cz - mz * cy
    dy = mz * cx - mx * cz
    dz = mx * cy - my * cx
    # m x z and m x (m x z)
    px = my
    py = -mx
    qx = -mz * py
    qy = mz * px
    qz = mx * py - my * px
    fx = -gmu * (cx + alpha * dx + a_stt * qx - alpha * a_stt * px)
    fy = -gmu * (cy + alpha * dy + a_stt * qy - alpha * a_stt * py)
    fz = -gmu * (cz + alpha * dz + a_stt * qz)
    return fx, fy, fz


@njit(cache=True, nogil=True)
def heun_step(mx, my, mz, hk, tx, ty, tz, a_stt, gmu, alpha, dt):
    f1x, f1y, f1z = _rhs(mx, my, mz, tx, ty, hk * mz + tz, a_stt, gmu, alpha)
    px = mx + dt * f1x
    py = my + dt * f1y
    pz = mz + dt * f1z
    f2x, f2y, f2z = _rhs(px, py, pz, tx, ty, hk * pz + tz, a_stt, gmu, alpha)
    nx = mx + 0.5 * dt * (f1x + f2x)
    ny = my + 0.5 * dt * (f1y + f2y)
    nz = mz + 0.5 * dt * (f1z + f2z)
    norm = math.sqrt(nx * nx + ny * ny + nz * nz)
    return nx / norm, ny / norm, nz / norm


@njit(cache=True, nogil=True)
def _integrate(m0, hk, noise, a_stt, gmu, alpha, dt, n_steps):
    out = np.empty((n_steps + 1, 3))
    mx, my, mz = m0[0], m0[1], m0[2]
    out[0, 0] = mx
    out[0, 1] = my
    out[0, 2] = mz
    use_noise = noise.shape[0] > 0
    tx = ty = tz = 0.0
    for i in range(n_steps):
        if use_noise:
            tx, ty, tz = noise[i, 0], noise[i, 1], noise[i, 2]
        mx, my, mz = heun_step(mx, my, mz, hk, tx, ty, tz, a_stt, gmu, alpha, dt)
        out[i + 1, 0] = mx
        out[i + 1, 1] = my
        out[i + 1, 2] = mz
    return out


@njit(cache=True, nogil=True)
def _crossing_time(m0, hk, noise, a_stt, gmu, alpha, dt, n_steps, target):
    mx, my, mz = m0[0], m0[1], m0[2]
    use_noise = noise.shape[0] > 0
    tx = ty = tz = 0.0
    for i in range(n_steps):
        if use_noise:
            tx, ty, tz = noise[i, 0], noise[i, 1], noise[i, 2]
        nx, ny, nz = heun_step(mx, my, mz, hk, tx, ty, tz, a_stt, gmu, alpha, dt)
        if not (nz == nz):
            return -2.0
        if target * nz >= 0.0 and target * mz < 0.0:
            frac = mz / (mz - nz)
            return (i + frac) * dt
        mx, my, mz = nx, ny, nz
    return -1.0


def llg_step(state: MagnetizationState, current: float, dt: float, params: MtjParams,
             rng: np.random.Generator | None = None, temperature: float | None = None,
             thermal=None) -> MagnetizationState:
    """Advance ``state`` by one Heun step.

    The thermal field is taken from ``thermal`` if given, else drawn from
    ``rng`` at ``temperature``; with neither, the step is deterministic.
    """
    if not 0 < dt <= DT_MAX:
        raise ParameterError(f"dt must be in (0, {DT_MAX}], got {dt!r}")
    if thermal is None:
        if rng is not None:
            thermal = sample_thermal_field(params, dt, rng, temperature)
        else:
            thermal = (0.0, 0.0, 0.0)
    hk = derive_anisotropy_field(params)
    a_stt = stt_field(params, current) if current else 0.0
    m = state.m
    new = heun_step(m[0], m[1], m[2], hk, thermal[0], thermal[1], thermal[2],
                    a_stt, _reduced_gamma(params), params.alpha, dt)
    if not all(math.isfinite(c) for c in new):
        raise NumericError(f"non-finite magnetization after step: m={m}, I={current}, dt={dt}")
    return MagnetizationState(np.array(new))


def integrate(state: MagnetizationState, current: float, duration: float, params: MtjParams,
              dt: float = DEFAULT_DT, noise: np.ndarray | None = None) -> np.ndarray:
    """Trajectory ``(n_steps + 1, 3)`` under constant current; ``noise`` is a pre-scaled thermal field."""
    n_steps = int(round(duration / dt))
    if not 0 < dt <= DT_MAX:
        raise ParameterError(f"dt must be in (0, {DT_MAX}], got {dt!r}")
    if noise is None:
        noise = np.zeros((0, 3))
    a_stt = stt_field(params, current) if current else 0.0
    traj = _integrate(state.m, derive_anisotropy_field(params), noise, a_stt,
                      _reduced_gamma(params), params.alpha, dt, n_steps)
    if not np.all(np.isfinite(traj)):
        raise NumericError("non-finite magnetization during integration")
    return traj


def sample_equilibrium_state(params: MtjParams, pole: int, rng: np.random.Generator) -> MagnetizationState:
    """Draw ``m`` from the Boltzmann distribution of the well around ``pole``.

    With s = sin^2(theta) the density is exp(-Delta*s)/sqrt(1-s); s is drawn by
    inverse transform of the truncated exponential on [0, 1/2] and accepted
    with probability sqrt(1/2)/sqrt(1-s). The mass beyond s=1/2 is
    exp(-Delta/2), negligible for thermally stable junctions.
    """
    d = params.delta
    smax = 0.5
    norm = -math.expm1(-d * smax)
    while True:
        u = rng.random()
        s = -math.log1p(-u * norm) / d
        if rng.random() * math.sqrt(1.0 - s) <= math.sqrt(0.5):
            break
    phi = 2.0 * math.pi * rng.random()
    st = math.sqrt(s)
    ct = math.sqrt(1.0 - s)
    return MagnetizationState(np.array([st * math.cos(phi), st * math.sin(phi), pole * ct]))


def switching_time(params: MtjParams, current: float, temperature: float = 0.0,
                   rng: np.random.Generator | None = None, horizon: float = DEFAULT_HORIZON,
                   dt: float = DEFAULT_DT, tilt_deg: float = DEFAULT_TILT_DEG) -> float | None:
    """Time for m_z to cross zero toward the state favoured by ``current``.

    At T = 0 the junction starts from the opposite pole with a fixed tilt; at
    T > 0 the start is drawn from the thermal equilibrium of that well and a
    thermal field acts throughout. Returns None if no crossing occurs within
    ``horizon``.
    """
    if current == 0:
        raise ParameterError("switching_time needs a non-zero current")
    if not 0 < dt <= DT_MAX:
        raise ParameterError(f"dt must be in (0, {DT_MAX}], got {dt!r}")
    target = 1 if current > 0 else -1
    n_steps = int(math.ceil(horizon / dt))
    if temperature > 0:
        if rng is None:
            raise ParameterError("a random generator is required for T > 0")
        m0 = sample_equilibrium_state(params, -target, rng).m
        noise = thermal_sigma(params, dt, temperature) * rng.standard_normal((n_steps, 3))
    else:
        m0 = MagnetizationState.pole(-target, tilt_deg).m
        noise = np.zeros((0, 3))
    t = _crossing_time(m0, derive_anisotropy_field(params), noise, stt_field(params, current),
                       _reduced_gamma(params), params.alpha, dt, n_steps, float(target))
    if t == -2.0:
        raise NumericError(f"non-finite magnetization while switching at I={current}")
    return None if t < 0 else t


def theoretical_critical_current(params: MtjParams) -> float:
    """Zero-temperature instability threshold of the uniaxial macrospin."""
    eta = 1.0 if params.eta is None else params.eta
    return 4.0 * Q_E * params.alpha * params.barrier_energy / (HBAR * eta)


def critical_current(params: MtjParams, horizon: float = DEFAULT_HORIZON, dt: float = DEFAULT_DT,
                     tilt_deg: float = DEFAULT_TILT_DEG, rtol: float = 1e-6) -> float:
    """Smallest DC current that switches AP->P within ``horizon`` at T = 0 (bisection)."""
    if params.eta is None:
        raise ParameterError("eta is not set")
    guess = theoretical_critical_current(params)
    lo, hi = 0.5 * guess, 4.0 * guess

    def switches(i):
        return switching_time(params, i, 0.0, horizon=horizon, dt=dt, tilt_deg=tilt_deg) is not None

    if switches(lo) or not switches(hi):
        raise CalibrationError(f"critical current not bracketed by [{lo:.4g}, {hi:.4g}] A")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if switches(mid):
            hi = mid
        else:
            lo = mid
    return hi


@functools.lru_cache(maxsize=64)
def _calibrate_cached(params: MtjParams, horizon: float, dt: float, tilt_deg: float) -> float:
    unit = dataclasses.replace(params, eta=1.0)
    return critical_current(unit, horizon, dt, tilt_deg) / params.ic0_target


def calibrate_spin_efficiency(params: MtjParams, horizon: float = DEFAULT_HORIZON,
                              dt: float = DEFAULT_DT, tilt_deg: float = DEFAULT_TILT_DEG) -> float:
    """Spin efficiency that places the measured critical current at ``ic0_target``.

    The dynamics depend on current only through eta*I, so the threshold
    measured at eta = 1 scales exactly as 1/eta.
    """
    key = dataclasses.replace(params, eta=None)
    return _calibrate_cached(key, horizon, dt, tilt_deg)
