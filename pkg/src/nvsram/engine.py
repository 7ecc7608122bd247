"""Transient MNA solver with Newton iteration and backward Euler.

Unknowns are the non-ground node voltages followed by one branch current per
voltage source. Capacitors use the backward-Euler companion model. MTJs are
resistors whose conductance follows the free-layer magnetization; after each
accepted circuit step every MTJ takes one Heun step driven by the branch
current just solved (operator splitting).
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from numba import njit

from . import mtj as mtjmod
from .errors import NumericError, ParameterError, SolverError
from .netlist import (
    GROUND,
    Capacitor,
    Mosfet,
    MtjElement,
    Netlist,
    Resistor,
    VoltageSource,
    Waveform,
)

V_LIMIT = 0.3  # max node-voltage change per Newton iteration


@dataclasses.dataclass(frozen=True)
class TransientConfig:
    dt: float = 1e-12
    t_end: float = 1e-9
    newton_tol: float = 1e-6
    newton_max_iters: int = 50
    gmin: float = 1e-12
    sample_stride: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be > 0")
        if not self.t_end >= self.dt:
            raise ParameterError("t_end must be >= dt")
        if not self.newton_tol > 0:
            raise ParameterError("newton_tol must be > 0")
        if self.newton_max_iters < 1 or self.sample_stride < 1:
            raise ParameterError("newton_max_iters and sample_stride must be >= 1")
        if self.gmin < 0:
            raise ParameterError("gmin must be >= 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


# ----------------------------------------------------------------------------
# device kernels


@njit(cache=True, nogil=True)
def _mos_eval(pol, beta, vth, lam, vd, vg, vs):
    """Drain->source current and its partials w.r.t. (vg, vd, vs)."""
    vd_ = pol * vd
    vg_ = pol * vg
    vs_ = pol * vs
    swap = vd_ < vs_
    if swap:
        vd_, vs_ = vs_, vd_
    vov = vg_ - vs_ - vth
    vds = vd_ - vs_
    if vov <= 0.0:
        i = 0.0
        gm = 0.0
        gds = 0.0
    elif vds < vov:
        base = vov * vds - 0.5 * vds * vds
        clm = 1.0 + lam * vds
        i = beta * base * clm
        gm = beta * vds * clm
        gds = beta * ((vov - vds) * clm + base * lam)
    else:
        clm = 1.0 + lam * vds
        i = 0.5 * beta * vov * vov * clm
        gm = beta * vov * clm
        gds = 0.5 * beta * vov * vov * lam
    if swap:
        return -pol * i, -gm, gm + gds, -gds
    return pol * i, gm, gds, -gm - gds


def mosfet_current(polarity: str, vgs: float, vds: float, beta: float, vth: float = 0.25,
                   lam: float = 0.0) -> float:
    """Square-law drain current (drain -> source) for an N or P device.

    For a P device pass the usual negative vgs/vds; the result is then
    negative (current flows source -> drain).
    """
    pol = {"n": 1.0, "p": -1.0}[polarity]
    return _mos_eval(pol, beta, vth, lam, vds, vgs, 0.0)[0]


@njit(cache=True, nogil=True)
def _vn(x, i):
    return 0.0 if i < 0 else x[i]


@njit(cache=True, nogil=True)
def _stamp_g(J, F, a, b, g, i):
    if a >= 0:
        F[a] += i
        J[a, a] += g
        if b >= 0:
            J[a, b] -= g
    if b >= 0:
        F[b] -= i
        J[b, b] += g
        if a >= 0:
            J[b, a] -= g


@njit(cache=True, nogil=True)
def _assemble(x, vprev, vsv, inv_dt, gmin, N, res, res_g, cap, cap_c, vs, mos, mos_p,
              mtj, mtj_g, J, F):
    J[:, :] = 0.0
    F[:] = 0.0
    for n in range(N):
        J[n, n] += gmin
        F[n] += gmin * x[n]
    for k in range(res.shape[0]):
        a = res[k, 0]
        b = res[k, 1]
        g = res_g[k]
        _stamp_g(J, F, a, b, g, g * (_vn(x, a) - _vn(x, b)))
    if inv_dt > 0.0:
        for k in range(cap.shape[0]):
            a = cap[k, 0]
            b = cap[k, 1]
            g = cap_c[k] * inv_dt
            dv = (_vn(x, a) - _vn(x, b)) - (_vn(vprev, a) - _vn(vprev, b))
            _stamp_g(J, F, a, b, g, g * dv)
    for k in range(mtj.shape[0]):
        a = mtj[k, 0]
        b = mtj[k, 1]
        g = mtj_g[k]
        _stamp_g(J, F, a, b, g, g * (_vn(x, a) - _vn(x, b)))
    for k in range(vs.shape[0]):
        p = vs[k, 0]
        q = vs[k, 1]
        row = N + k
        cur = x[row]
        if p >= 0:
            F[p] += cur
            J[p, row] += 1.0
            J[row, p] += 1.0
        if q >= 0:
            F[q] -= cur
            J[q, row] -= 1.0
            J[row, q] -= 1.0
        F[row] = _vn(x, p) - _vn(x, q) - vsv[k]
    for k in range(mos.shape[0]):
        d = mos[k, 0]
        g_ = mos[k, 1]
        s = mos[k, 2]
        i, dg, dd, ds = _mos_eval(mos_p[k, 0], mos_p[k, 1], mos_p[k, 2], mos_p[k, 3],
                                  _vn(x, d), _vn(x, g_), _vn(x, s))
        if d >= 0:
            F[d] += i
            if g_ >= 0:
                J[d, g_] += dg
            J[d, d] += dd
            if s >= 0:
                J[d, s] += ds
        if s >= 0:
            F[s] -= i
            if g_ >= 0:
                J[s, g_] -= dg
            if d >= 0:
                J[s, d] -= dd
            J[s, s] -= ds


@njit(cache=True, nogil=True)
def _newton(x, vprev, vsv, inv_dt, gmin, tol, max_iter, N, res, res_g, cap, cap_c, vs, mos,
            mos_p, mtj, mtj_g, J, F, log):
    """Solve in place. Returns (status, iterations); status 0 ok, -1 no convergence, -2 non-finite."""
    for it in range(max_iter):
        _assemble(x, vprev, vsv, inv_dt, gmin, N, res, res_g, cap, cap_c, vs, mos, mos_p,
                  mtj, mtj_g, J, F)
        dx = np.linalg.solve(J, -F)
        maxdv = 0.0
        for n in range(N):
            d = dx[n]
            if d > V_LIMIT:
                d = V_LIMIT
            elif d < -V_LIMIT:
                d = -V_LIMIT
            dx[n] = d
            if abs(d) > maxdv:
                maxdv = abs(d)
        for n in range(x.shape[0]):
            x[n] += dx[n]
            if not (x[n] == x[n]) or abs(x[n]) > 1e30:
                return -2, it + 1
        if it < log.shape[0]:
            log[it] = maxdv
        if maxdv < tol:
            return 0, it + 1
    return -1, max_iter


@njit(cache=True, nogil=True)
def _branch_currents(x, vprev, inv_dt, res, res_g, res_e, cap, cap_c, cap_e, vs, vs_e, N,
                     mos, mos_p, mos_e, mtj, mtj_g, mtj_e, out):
    for k in range(res.shape[0]):
        out[res_e[k]] = res_g[k] * (_vn(x, res[k, 0]) - _vn(x, res[k, 1]))
    for k in range(cap.shape[0]):
        a = cap[k, 0]
        b = cap[k, 1]
        dv = (_vn(x, a) - _vn(x, b)) - (_vn(vprev, a) - _vn(vprev, b))
        out[cap_e[k]] = cap_c[k] * inv_dt * dv
    for k in range(vs.shape[0]):
        out[vs_e[k]] = x[N + k]
    for k in range(mos.shape[0]):
        out[mos_e[k]] = _mos_eval(mos_p[k, 0], mos_p[k, 1], mos_p[k, 2], mos_p[k, 3],
                                  _vn(x, mos[k, 0]), _vn(x, mos[k, 1]), _vn(x, mos[k, 2]))[0]
    for k in range(mtj.shape[0]):
        out[mtj_e[k]] = mtj_g[k] * (_vn(x, mtj[k, 0]) - _vn(x, mtj[k, 1]))


@njit(cache=True, nogil=True)
def _mtj_conductance(m, mtj_gpar, mtj_g):
    for k in range(m.shape[0]):
        gp = mtj_gpar[k, 0]
        gap = mtj_gpar[k, 1]
        mtj_g[k] = 0.5 * ((gp + gap) + (gp - gap) * m[k, 2])


@njit(cache=True, nogil=True)
def _run(x0, i0, m0, vs_vals, noise, dt, n_steps, stride, gmin, tol, max_iter, N,
         res, res_g, res_e, cap, cap_c, cap_e, vs, vs_e, mos, mos_p, mos_e,
         mtj, mtj_gpar, mtj_llg, mtj_e, n_elem):
    n_samples = n_steps // stride + 1
    K = m0.shape[0]
    X = np.empty((n_samples, x0.shape[0]))
    I = np.empty((n_samples, n_elem))
    MH = np.empty((n_samples, K, 3))
    X[0] = x0
    I[0] = i0
    MH[0] = m0
    x = x0.copy()
    m = m0.copy()
    cur = i0.copy()
    mtj_g = np.empty(K)
    J = np.empty((x0.shape[0], x0.shape[0]))
    F = np.empty(x0.shape[0])
    log = np.zeros(max_iter)
    vprev = np.empty(N)
    inv_dt = 1.0 / dt
    use_noise = noise.shape[0] > 0
    total_iters = 0
    for n in range(1, n_steps + 1):
        for j in range(N):
            vprev[j] = x[j]
        _mtj_conductance(m, mtj_gpar, mtj_g)
        status, iters = _newton(x, vprev, vs_vals[n], inv_dt, gmin, tol, max_iter, N, res, res_g,
                                cap, cap_c, vs, mos, mos_p, mtj, mtj_g, J, F, log)
        total_iters += iters
        if status != 0:
            return status, n, X, I, MH, x, cur, m, log, total_iters
        _branch_currents(x, vprev, inv_dt, res, res_g, res_e, cap, cap_c, cap_e, vs, vs_e, N,
                         mos, mos_p, mos_e, mtj, mtj_g, mtj_e, cur)
        for k in range(K):
            ik = cur[mtj_e[k]]
            tx = ty = tz = 0.0
            if use_noise:
                tx = noise[n - 1, k, 0]
                ty = noise[n - 1, k, 1]
                tz = noise[n - 1, k, 2]
            mx, my, mz = mtjmod.heun_step(m[k, 0], m[k, 1], m[k, 2], mtj_llg[k, 0], tx, ty, tz,
                                          mtj_llg[k, 1] * ik, mtj_llg[k, 2], mtj_llg[k, 3], dt)
            if not (mz == mz):
                return -2, n, X, I, MH, x, cur, m, log, total_iters
            m[k, 0] = mx
            m[k, 1] = my
            m[k, 2] = mz
        if n % stride == 0:
            s = n // stride
            X[s] = x
            I[s] = cur
            MH[s] = m
    return 0, -1, X, I, MH, x, cur, m, log, total_iters


# ----------------------------------------------------------------------------
# compilation of a Netlist into kernel arrays


class _Compiled:
    def __init__(self, netlist: Netlist):
        netlist.validate()
        self.netlist = netlist
        self.N = len(netlist.nodes) - 1
        self.elements = list(netlist.elements)
        idx = lambda name: netlist.index(name) - 1  # noqa: E731  ground -> -1

        def pairs(els, attrs):
            if not els:
                return np.zeros((0, len(attrs)), dtype=np.int64)
            return np.array([[idx(getattr(e, a)) for a in attrs] for e in els], dtype=np.int64)

        def gidx(els):
            return np.array([self.elements.index(e) for e in els], dtype=np.int64)

        r = netlist.of_type(Resistor)
        self.res = pairs(r, ("a", "b"))
        self.res_g = np.array([1.0 / e.r for e in r], dtype=float)
        self.res_e = gidx(r)
        c = netlist.of_type(Capacitor)
        self.cap = pairs(c, ("a", "b"))
        self.cap_c = np.array([e.c for e in c], dtype=float)
        self.cap_e = gidx(c)
        v = netlist.of_type(VoltageSource)
        self.sources = v
        self.vs = pairs(v, ("pos", "neg"))
        self.vs_e = gidx(v)
        mo = netlist.of_type(Mosfet)
        self.mos = pairs(mo, ("d", "g", "s"))
        self.mos_p = np.array([[1.0 if e.polarity == "n" else -1.0, e.beta, e.vth, e.lam] for e in mo],
                              dtype=float).reshape(len(mo), 4)
        self.mos_e = gidx(mo)
        mt = netlist.of_type(MtjElement)
        self.mtjs = mt
        self.mtj = np.array([[idx(e.device.free_terminal), idx(e.device.pinned_terminal)] for e in mt],
                            dtype=np.int64).reshape(len(mt), 2)
        self.mtj_gpar = np.array([[1.0 / e.device.params.r_parallel, 1.0 / e.device.params.r_antiparallel]
                                  for e in mt], dtype=float).reshape(len(mt), 2)
        llg = []
        for e in mt:
            p = e.device.params
            if p.eta is None:
                raise ParameterError(f"{e.name}: MTJ params need a calibrated eta")
            llg.append([mtjmod.derive_anisotropy_field(p), mtjmod.stt_field(p, 1.0),
                        p.gamma * mtjmod.MU_0 / (1.0 + p.alpha**2), p.alpha])
        self.mtj_llg = np.array(llg, dtype=float).reshape(len(mt), 4)
        self.mtj_e = gidx(mt)
        self.size = self.N + len(v)

    def source_values(self, waveforms: dict[str, Waveform], times: np.ndarray) -> np.ndarray:
        out = np.empty((len(times), len(self.sources)))
        for k, s in enumerate(self.sources):
            if s.signal not in waveforms:
                raise ParameterError(f"no waveform for signal {s.signal!r} (source {s.name})")
            out[:, k] = waveforms[s.signal](times)
        return out

    def m0(self) -> np.ndarray:
        return np.array([e.device.state.m for e in self.mtjs], dtype=float).reshape(len(self.mtjs), 3)

    def mtj_g(self, m: np.ndarray) -> np.ndarray:
        g = np.empty(len(self.mtjs))
        _mtj_conductance(m, self.mtj_gpar, g)
        return g

    def currents(self, x, vprev, inv_dt, m) -> np.ndarray:
        out = np.zeros(len(self.elements))
        _branch_currents(x, vprev, inv_dt, self.res, self.res_g, self.res_e, self.cap, self.cap_c,
                         self.cap_e, self.vs, self.vs_e, self.N, self.mos, self.mos_p, self.mos_e,
                         self.mtj, self.mtj_g(m), self.mtj_e, out)
        return out


# ----------------------------------------------------------------------------
# public results


@dataclasses.dataclass
class CircuitState:
    """Complete solver state at one instant: unknowns, element currents, magnetizations."""

    nodes: list[str]
    x: np.ndarray
    currents: np.ndarray
    m: np.ndarray

    @property
    def voltages(self) -> dict[str, float]:
        out = {GROUND: 0.0}
        out.update({n: float(v) for n, v in zip(self.nodes, self.x)})
        return out

    def __getitem__(self, node: str) -> float:
        return self.voltages[node]


@dataclasses.dataclass
class Trace:
    time: np.ndarray
    nodes: list[str]
    voltages: np.ndarray  # (samples, nodes), ground excluded
    elements: list
    currents: np.ndarray  # (samples, elements), measured along each element's terminals
    m: np.ndarray  # (samples, mtjs, 3)
    mtj_names: list[str]
    probes: dict[str, str]
    gmin: float
    final: CircuitState
    stride: int = 1

    def __post_init__(self):
        self._node_col = {n: i for i, n in enumerate(self.nodes)}
        self._el_col = {e.name: i for i, e in enumerate(self.elements)}

    def __len__(self):
        return len(self.time)

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0]) if len(self.time) > 1 else 0.0

    def v(self, name: str) -> np.ndarray:
        """Voltage of a node, or of a probe label."""
        node = self.probes.get(name, name)
        if node == GROUND:
            return np.zeros(len(self.time))
        return self.voltages[:, self._node_col[node]]

    def element(self, name: str):
        return self.elements[self._el_col[name]]

    def i(self, name: str) -> np.ndarray:
        return self.currents[:, self._el_col[name]]

    def branch_voltage(self, name: str) -> np.ndarray:
        a, b = self.element(name).terminals
        return self.v(a) - self.v(b)

    def power(self, name: str) -> np.ndarray:
        """Power absorbed by an element (negative for a source that delivers)."""
        return self.branch_voltage(name) * self.i(name)

    def injected_power(self, source: str) -> np.ndarray:
        return -self.power(source)

    def mz(self, mtj: str) -> np.ndarray:
        return self.m[:, self.mtj_names.index(mtj), 2]

    def index_at(self, t: float) -> int:
        return int(np.clip(round((t - self.time[0]) / self.dt), 0, len(self.time) - 1)) if self.dt else 0

    def names_of(self, kind) -> list[str]:
        return [e.name for e in self.elements if isinstance(e, kind)]

    def check(self):
        """Raise NumericError if the trace violates its structural invariants."""
        if len(self.time) > 2 and not np.allclose(np.diff(self.time), self.dt, rtol=1e-9, atol=0):
            raise NumericError("non-uniform timestamps")
        for arr in (self.voltages, self.currents, self.m):
            if not np.all(np.isfinite(arr)):
                raise NumericError("non-finite samples in trace")
            if arr.shape[0] != len(self.time):
                raise NumericError("trace series have unequal lengths")


# ----------------------------------------------------------------------------
# analyses


def _initial_x(comp: _Compiled, guess: dict[str, float] | None, vsv: np.ndarray) -> np.ndarray:
    x = np.zeros(comp.size)
    if guess:
        for node, v in guess.items():
            i = comp.netlist.index(node) - 1
            if i >= 0:
                x[i] = v
    for k, s in enumerate(comp.sources):
        p = comp.netlist.index(s.pos) - 1
        q = comp.netlist.index(s.neg) - 1
        if p >= 0 and q < 0:
            x[p] = vsv[k]
    return x


def _solve_dc(comp: _Compiled, x: np.ndarray, vsv: np.ndarray, m: np.ndarray, config: TransientConfig):
    J = np.empty((comp.size, comp.size))
    F = np.empty(comp.size)
    log = np.zeros(config.newton_max_iters)
    g = comp.mtj_g(m)
    vprev = np.zeros(comp.N)
    status, iters = _newton(x, vprev, vsv, 0.0, config.gmin, config.newton_tol, config.newton_max_iters,
                            comp.N, comp.res, comp.res_g, comp.cap, comp.cap_c, comp.vs, comp.mos,
                            comp.mos_p, comp.mtj, g, J, F, log)
    return status, log[:iters].copy()


def dc_operating_point(netlist: Netlist, controls: dict[str, float] | dict[str, Waveform],
                       config: TransientConfig | None = None, t: float = 0.0,
                       initial_guess: dict[str, float] | None = None) -> CircuitState:
    """Newton DC solution with MTJ conductances frozen at their current magnetization.

    ``controls`` maps signal names to constant values or waveforms (evaluated
    at ``t``). On failure a single gmin-stepping continuation is attempted.
    """
    config = config or TransientConfig()
    comp = _Compiled(netlist)
    return _dc(comp, controls, config, t, initial_guess)


def _as_waveforms(controls) -> dict[str, Waveform]:
    return {k: (v if isinstance(v, Waveform) else Waveform.constant(v)) for k, v in controls.items()}


def _dc(comp, controls, config, t, initial_guess) -> CircuitState:
    wf = _as_waveforms(controls)
    vsv = comp.source_values(wf, np.array([t]))[0]
    m = comp.m0()
    x = _initial_x(comp, initial_guess, vsv)
    x_start = x.copy()
    status, log = _solve_dc(comp, x, vsv, m, config)
    history = [("plain", log.tolist())]
    if status != 0:
        x = x_start.copy()
        for g in np.logspace(-3, math.log10(max(config.gmin, 1e-15)), 13):
            step_cfg = dataclasses.replace(config, gmin=float(g))
            status, log = _solve_dc(comp, x, vsv, m, step_cfg)
            history.append((f"gmin={g:.1e}", log.tolist()))
            if status != 0:
                break
        if status != 0:
            raise SolverError(f"DC operating point did not converge at t={t:.4g} s", history)
    currents = comp.currents(x, np.zeros(comp.N), 0.0, m)
    return CircuitState(list(comp.netlist.nodes[1:]), x, currents, m)


def _state_from_voltages(comp: _Compiled, volts: dict[str, float], vsv, m) -> CircuitState:
    """Caller-supplied initial node voltages: source currents from KCL with idle capacitors."""
    x = _initial_x(comp, volts, vsv)
    cur = comp.currents(x, np.zeros(comp.N), 0.0, m)
    # net current leaving each node through non-source elements, solved for source currents
    net = _net_node_current(comp, x, cur)
    M = len(comp.sources)
    if M:
        A = np.zeros((comp.N, M))
        for k in range(M):
            p, q = comp.vs[k]
            if p >= 0:
                A[p, k] += 1.0
            if q >= 0:
                A[q, k] -= 1.0
        sol, *_ = np.linalg.lstsq(A, -net, rcond=None)
        x[comp.N:] = sol
        cur[comp.vs_e] = sol
    return CircuitState(list(comp.netlist.nodes[1:]), x, cur, m)


def _net_node_current(comp: _Compiled, x, cur, gmin: float = 0.0, skip_sources: bool = True) -> np.ndarray:
    net = gmin * x[: comp.N].copy()
    for e_idx, el in enumerate(comp.elements):
        if skip_sources and isinstance(el, VoltageSource):
            continue
        a, b = el.terminals
        ia = comp.netlist.index(a) - 1
        ib = comp.netlist.index(b) - 1
        if ia >= 0:
            net[ia] += cur[e_idx]
        if ib >= 0:
            net[ib] -= cur[e_idx]
    return net


def _thermal_noise(comp: _Compiled, n_steps: int, dt: float, temperature: float,
                   rng: np.random.Generator | None) -> np.ndarray:
    K = len(comp.mtjs)
    if temperature <= 0 or K == 0:
        return np.zeros((0, K, 3))
    if rng is None:
        raise ParameterError("a random generator is required for T > 0")
    sig = np.array([mtjmod.thermal_sigma(e.device.params, dt, temperature) for e in comp.mtjs])
    return rng.standard_normal((n_steps, K, 3)) * sig[None, :, None]


def transient(netlist: Netlist, config: TransientConfig, waveforms: dict[str, Waveform],
              initial: CircuitState | dict[str, float] | None = None, *,
              initial_guess: dict[str, float] | None = None, temperature: float = 0.0,
              rng: np.random.Generator | None = None, noise: np.ndarray | None = None) -> Trace:
    """Fixed-step backward-Euler transient from t = 0 to ``config.t_end``.

    ``initial`` may be a CircuitState (continuation), a dict of node voltages,
    or None for a DC operating point at t = 0 (seeded by ``initial_guess``).
    MTJ magnetizations start from each device's current state; the devices
    themselves are not modified. Thermal fields are drawn from ``rng`` at
    ``temperature`` unless a pre-scaled ``noise`` array of shape
    (n_steps, n_mtj, 3) is supplied.
    """
    comp = _Compiled(netlist)
    n_steps = config.n_steps
    dt = config.dt
    if comp.mtjs and dt > mtjmod.DT_MAX:
        raise ParameterError(f"dt={dt} exceeds the LLG step cap {mtjmod.DT_MAX}")
    times = np.arange(n_steps + 1) * dt
    vs_vals = comp.source_values(waveforms, times)
    m0 = comp.m0()
    if initial is None:
        state = _dc(comp, waveforms, config, 0.0, initial_guess)
    elif isinstance(initial, CircuitState):
        if initial.x.shape != (comp.size,):
            raise ParameterError("initial state does not match this netlist")
        state = initial
    else:
        state = _state_from_voltages(comp, initial, vs_vals[0], m0)
    if noise is None:
        noise = _thermal_noise(comp, n_steps, dt, temperature, rng)
    elif noise.shape != (n_steps, len(comp.mtjs), 3):
        raise ParameterError(f"noise must have shape {(n_steps, len(comp.mtjs), 3)}")

    status, step, X, I, MH, xf, cf, mf, log, _ = _run(
        state.x.astype(float).copy(), state.currents.astype(float).copy(), m0, vs_vals,
        np.ascontiguousarray(noise, dtype=float), dt, n_steps, config.sample_stride, config.gmin,
        config.newton_tol, config.newton_max_iters, comp.N, comp.res, comp.res_g, comp.res_e,
        comp.cap, comp.cap_c, comp.cap_e, comp.vs, comp.vs_e, comp.mos, comp.mos_p, comp.mos_e,
        comp.mtj, comp.mtj_gpar, comp.mtj_llg, comp.mtj_e, len(comp.elements))
    if status == -1:
        raise SolverError(f"Newton failed to converge at t={step * dt:.6g} s", [log.tolist()])
    if status == -2:
        raise NumericError(f"non-finite circuit state at t={step * dt:.6g} s")
    n_samples = n_steps // config.sample_stride + 1
    trace = Trace(
        time=np.arange(n_samples) * dt * config.sample_stride,
        nodes=list(netlist.nodes[1:]),
        voltages=X[:, : comp.N],
        elements=comp.elements,
        currents=I,
        m=MH,
        mtj_names=[e.name for e in comp.mtjs],
        probes=dict(netlist.probes),
        gmin=config.gmin,
        final=CircuitState(list(netlist.nodes[1:]), xf, cf, mf),
        stride=config.sample_stride,
    )
    trace.check()
    return trace


def _residual_at(comp: _Compiled, trace: Trace, k: int) -> float:
    x = np.concatenate([trace.voltages[k], trace.currents[k, comp.vs_e]])
    if k >= 1 and trace.stride == 1:
        cur = comp.currents(x, trace.voltages[k - 1], 1.0 / trace.dt, trace.m[k - 1])
    else:
        cur = trace.currents[k]
    net = _net_node_current(comp, x, cur, trace.gmin, skip_sources=False)
    return float(np.max(np.abs(net))) if len(net) else 0.0


def kcl_residual(netlist: Netlist, trace: Trace, t_index: int) -> float:
    """Largest absolute net current leaving any non-ground node at one sample.

    Element currents are re-evaluated from the sampled voltages (capacitors
    from the preceding sample, MTJs at the magnetization used for the step),
    so a perturbed voltage shows up in the residual.
    """
    return _residual_at(_Compiled(netlist), trace, t_index)


def max_kcl_residual(netlist: Netlist, trace: Trace) -> float:
    """Worst residual over the solved samples (sample 0 is the initial condition)."""
    comp = _Compiled(netlist)
    return max(_residual_at(comp, trace, k) for k in range(min(1, len(trace) - 1), len(trace)))
