"""Non-volatile SRAM cell with MTJ write termination.

Topology: a 6T SRAM core (q, qc) with MTJ1 between q and node 1a and MTJ2
between qc and node 2a (free layers on the storage nodes, pinned layers on
1a/2a). Equalization transistor X1 bridges 1a-2a and is driven by
OR(WT, restore); X2 bridges q-qc and is driven by RE. Two-inverter buffers
turn 1a/2a into 1b/2b, WD = AND(WRE, 1b, 2b), and WT is a dynamic node
charged while EN is low and discharged through a WD/EN stack.

Stored '1' is MTJ1 = P, MTJ2 = AP; stored '0' is the complement.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.optimize import brentq

from . import mtj as mtjmod
from .engine import CircuitState, Trace, TransientConfig, mosfet_current, transient
from .errors import DecodeError, NvsramError, ParameterError
from .mtj import MagnetizationState, MtjDevice, MtjParams
from .netlist import Capacitor, Mosfet, MtjElement, Netlist, PwlBuilder, Resistor, VoltageSource, Waveform

CORRUPT = "corrupt"

PROBES = ("q", "qc", "1a", "2a", "1b", "2b", "WT", "WD", "BL", "BL_bar",
          "WL", "WRE", "EN", "RE", "restore")
SIGNALS = ("VDD", "WL", "WRE", "EN", "RE", "restore", "BLD", "BLBD", "BLE")

# element groups used for energy accounting
MTJ_ELEMENTS = ("MTJ1", "MTJ2")
X1_ELEMENTS = ("X1",)
DETECTOR_PREFIX = "det_"


@dataclasses.dataclass(frozen=True)
class CellConfig:
    vdd: float = 0.8
    vth: float = 0.25
    lam: float = 0.1
    # square-law betas, A/V^2
    beta_pull_up: float = 1.5e-3
    beta_pull_down: float = 6e-3
    beta_access: float = 3e-3
    # a strong bridge keeps the matching-state divider level high enough for
    # a buffer threshold above vdd/2
    beta_x1: float = 8e-2
    beta_x2: float = 4e-3
    beta_logic: float = 5e-4
    beta_bl_driver: float = 4e-3
    # None means vdd/2. At vdd/2 a backup from two antiparallel junctions trips
    # the detector while the switching junction is still near m_z = -0.6.
    v_buf: float | None = 0.46
    c_node: float = 0.1e-15
    c_storage: float = 2e-15
    c_bitline: float = 5e-15
    c_x1_overlap: float = 0.05e-15
    node_caps: tuple[tuple[str, float], ...] = ()
    r_bleed: float = 2e6
    mtj: MtjParams = dataclasses.field(default_factory=MtjParams)
    # timing, seconds
    edge: float = 20e-12
    setup: float = 50e-12
    settle: float = 200e-12
    write_pulse: float = 300e-12
    read_precharge: float = 100e-12
    read_pulse: float = 300e-12
    en_pulse: float = 100e-12
    wre_window: float = 30e-9
    re_pulse: float = 300e-12
    restore_window: float = 1e-9
    power_edge: float = 100e-12
    power_down_hold: float = 20e-9
    power_up_settle: float = 500e-12

    def __post_init__(self):
        if not self.vdd > 0:
            raise ParameterError("vdd must be > 0")
        vb = self.buffer_threshold
        if not 0 < vb < self.vdd:
            raise ParameterError(f"v_buf={vb} must lie strictly between 0 and vdd={self.vdd}")
        if not self.vth < vb < self.vdd - self.vth:
            raise ParameterError(f"v_buf={vb} is not realizable with vth={self.vth} and vdd={self.vdd}")
        positive = ("beta_pull_up", "beta_pull_down", "beta_access", "beta_x1", "beta_x2",
                    "beta_logic", "beta_bl_driver", "c_node", "c_storage", "c_bitline", "r_bleed",
                    "edge", "en_pulse", "wre_window", "re_pulse", "restore_window", "write_pulse",
                    "read_pulse", "power_edge")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ParameterError(f"{name} must be > 0")
        if self.c_x1_overlap < 0:
            raise ParameterError("c_x1_overlap must be >= 0")
        if self.en_pulse >= self.wre_window:
            raise ParameterError("EN pulse must be shorter than the WRE window")

    @property
    def buffer_threshold(self) -> float:
        return self.vdd / 2 if self.v_buf is None else self.v_buf

    def operating_write_current(self) -> float:
        """Rough backup current through the MTJ pair when the states differ."""
        vov = self.vdd - self.vth
        r_on = 1 / (self.beta_pull_up * vov) + 1 / (self.beta_pull_down * vov) + 1 / (self.beta_x1 * vov)
        return self.vdd / (self.mtj.r_parallel + self.mtj.r_antiparallel + r_on)

    def check_backup_window(self, dt: float = mtjmod.DEFAULT_DT):
        """Require the WRE window to be >= 10x the T = 0 switching time."""
        params = self.mtj.calibrated()
        i_op = self.operating_write_current()
        t_sw = mtjmod.switching_time(params, i_op, 0.0, horizon=self.wre_window, dt=dt)
        if t_sw is None or self.wre_window < 10 * t_sw:
            raise ParameterError(
                f"WRE window {self.wre_window:.3g} s is not >= 10x the switching time "
                f"({t_sw!r} s at {i_op:.3g} A)"
            )
        return t_sw


def _buffer_betas(config: CellConfig) -> tuple[float, float]:
    """(beta_n, beta_p) of an inverter whose square-law trip point is v_buf."""
    vm = config.buffer_threshold
    ratio = ((config.vdd - vm - config.vth) / (vm - config.vth)) ** 2
    return config.beta_logic * ratio, config.beta_logic


@dataclasses.dataclass
class CellInstance:
    config: CellConfig
    netlist: Netlist
    mtj1: MtjDevice
    mtj2: MtjDevice
    terminate: bool = True
    state: CircuitState | None = None
    initial_guess: dict | None = None

    @property
    def probes(self) -> dict[str, str]:
        return self.netlist.probes

    def set_mtj_bit(self, bit: int, tilt_deg: float = mtjmod.DEFAULT_TILT_DEG):
        s1, s2 = mtj_states_for_bit(bit)
        self.mtj1.state = _state(s1, tilt_deg)
        self.mtj2.state = _state(s2, tilt_deg)


def mtj_states_for_bit(bit: int) -> tuple[str, str]:
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit!r}")
    return ("P", "AP") if bit == 1 else ("AP", "P")


def _state(label, tilt_deg=mtjmod.DEFAULT_TILT_DEG) -> MagnetizationState:
    if isinstance(label, MagnetizationState):
        return label.copy()
    if label == "P":
        return MagnetizationState.parallel(tilt_deg)
    if label == "AP":
        return MagnetizationState.antiparallel(tilt_deg)
    raise ParameterError(f"MTJ state must be 'P' or 'AP', got {label!r}")


def build_cell(config: CellConfig | None = None, *, mtj_states=("P", "AP"), sram_bit: int | None = None,
               terminate: bool = True, check_window: bool = True) -> CellInstance:
    """Build the cell netlist.

    ``mtj_states`` gives MTJ1/MTJ2 as 'P'/'AP' (or MagnetizationState);
    ``sram_bit`` seeds the first DC solve so the latch starts holding that
    bit. With ``terminate=False`` the WT pull-down listens to NOT(WRE)
    instead of WD, so X1 stays on for the whole WRE window (baseline).
    """
    config = config or CellConfig()
    params = config.mtj.calibrated()
    if check_window:
        config.check_backup_window()
    cfg = dataclasses.replace(config, mtj=params)
    vdd, vth, lam = cfg.vdd, cfg.vth, cfg.lam
    nl = Netlist()

    def nmos(name, d, g, s, beta, **kw):
        nl.add(Mosfet(name, "n", d, g, s, beta, kw.get("vth", vth), lam))

    def pmos(name, d, g, s, beta, **kw):
        nl.add(Mosfet(name, "p", d, g, s, beta, kw.get("vth", vth), lam))

    def inverter(prefix, a, y, bn=None, bp=None):
        nmos(prefix + "_n", y, a, "0", bn or cfg.beta_logic)
        pmos(prefix + "_p", y, a, "VDD", bp or cfg.beta_logic)

    for sig in SIGNALS:
        nl.add(VoltageSource("V_" + sig, sig, "0", sig))

    # SRAM core
    pmos("core_P1", "q", "qc", "VDD", cfg.beta_pull_up)
    nmos("core_N1", "q", "qc", "0", cfg.beta_pull_down)
    pmos("core_P2", "qc", "q", "VDD", cfg.beta_pull_up)
    nmos("core_N2", "qc", "q", "0", cfg.beta_pull_down)
    nmos("core_A1", "BL", "WL", "q", cfg.beta_access)
    nmos("core_A2", "BL_bar", "WL", "qc", cfg.beta_access)
    nl.add(Resistor("bleed_q", "q", "0", cfg.r_bleed))
    nl.add(Resistor("bleed_qc", "qc", "0", cfg.r_bleed))

    # bitline drivers: transmission gates from ideal drivers, enabled by BLE
    inverter("bld_inv", "BLE", "BLEb")
    nmos("bld_BL_n", "BLD", "BLE", "BL", cfg.beta_bl_driver)
    pmos("bld_BL_p", "BLD", "BLEb", "BL", cfg.beta_bl_driver)
    nmos("bld_BLB_n", "BLBD", "BLE", "BL_bar", cfg.beta_bl_driver)
    pmos("bld_BLB_p", "BLBD", "BLEb", "BL_bar", cfg.beta_bl_driver)

    # MTJs: free layer on the storage node, pinned layer on the detection node
    mtj1 = MtjDevice(params, _state(mtj_states[0]), "q", "1a", "MTJ1")
    mtj2 = MtjDevice(params, _state(mtj_states[1]), "qc", "2a", "MTJ2")
    nl.add(MtjElement("MTJ1", mtj1))
    nl.add(MtjElement("MTJ2", mtj2))

    # X1 with gate-overlap capacitance to both channel terminals
    nmos("X1", "1a", "x1g", "2a", cfg.beta_x1)
    if cfg.c_x1_overlap > 0:
        nl.add(Capacitor("X1_cgd", "x1g", "1a", cfg.c_x1_overlap))
        nl.add(Capacitor("X1_cgs", "x1g", "2a", cfg.c_x1_overlap))

    # X2: transmission gate across q/qc
    inverter("x2_inv", "RE", "REb")
    nmos("X2_n", "q", "RE", "qc", cfg.beta_x2)
    pmos("X2_p", "q", "REb", "qc", cfg.beta_x2)

    # detection buffers 1a->1b, 2a->2b
    bn, bp = _buffer_betas(cfg)
    for side in ("1", "2"):
        inverter(f"det_buf{side}_s1", side + "a", side + "m", bn, bp)
        inverter(f"det_buf{side}_s2", side + "m", side + "b")

    # WD = AND(WRE, 1b, 2b)
    b3 = 3 * cfg.beta_logic
    for g in ("WRE", "1b", "2b"):
        pmos(f"det_nand_p_{g}", "WDn", g, "VDD", cfg.beta_logic)
    nmos("det_nand_n_WRE", "WDn", "WRE", "nand_s1", b3)
    nmos("det_nand_n_1b", "nand_s1", "1b", "nand_s2", b3)
    nmos("det_nand_n_2b", "nand_s2", "2b", "0", b3)
    inverter("det_wd_inv", "WDn", "WD")

    # WT: dynamic node
    inverter("det_wre_inv", "WRE", "WREb")
    pmos("det_wt_pu", "WT", "EN", "VDD", 2 * cfg.beta_logic)
    nmos("det_wt_pd1", "WT", "WD" if terminate else "WREb", "wt_s", 2 * cfg.beta_logic)
    nmos("det_wt_pd2", "wt_s", "EN", "0", 2 * cfg.beta_logic)

    # X1 gate = OR(WT, restore)
    b2 = 2 * cfg.beta_logic
    pmos("det_nor_p_WT", "nor_s", "WT", "VDD", b2)
    pmos("det_nor_p_restore", "x1gb", "restore", "nor_s", b2)
    nmos("det_nor_n_WT", "x1gb", "WT", "0", cfg.beta_logic)
    nmos("det_nor_n_restore", "x1gb", "restore", "0", cfg.beta_logic)
    inverter("det_or_inv", "x1gb", "x1g", 2 * cfg.beta_logic, 2 * cfg.beta_logic)

    # lumped node capacitance
    caps = {"q": cfg.c_storage, "qc": cfg.c_storage, "BL": cfg.c_bitline, "BL_bar": cfg.c_bitline}
    caps.update(dict(cfg.node_caps))
    for node in list(nl.nodes[1:]):
        if node in SIGNALS:
            continue
        nl.add(Capacitor("C_" + node, node, "0", caps.get(node, cfg.c_node)))

    for label in PROBES:
        nl.probe(label, label)
    nl.validate()

    guess = None
    if sram_bit is not None:
        hi, lo = (vdd, 0.0) if sram_bit == 1 else (0.0, vdd)
        guess = {"q": hi, "qc": lo, "1a": hi, "2a": lo, "BL": vdd, "BL_bar": vdd}
    cell = CellInstance(cfg, nl, mtj1, mtj2, terminate, None, guess)
    _check_topology(cell)
    return cell


def _check_topology(cell: CellInstance):
    nl = cell.netlist

    def fail(rule):
        raise ParameterError(f"cell topology rule violated: {rule}")

    m1, m2 = cell.mtj1, cell.mtj2
    if (m1.free_terminal, m1.pinned_terminal) != ("q", "1a"):
        fail("MTJ1 free terminal at q, pinned at 1a")
    if (m2.free_terminal, m2.pinned_terminal) != ("qc", "2a"):
        fail("MTJ2 free terminal at qc, pinned at 2a")
    x1 = nl.element("X1")
    if {x1.d, x1.s} != {"1a", "2a"}:
        fail("X1 bridges 1a-2a")
    if {nl.element("X2_n").d, nl.element("X2_n").s} != {"q", "qc"} or nl.element("X2_n").g != "RE":
        fail("X2 bridges q-qc with gate RE")
    if nl.element("core_A1").g != "WL" or nl.element("core_A2").g != "WL":
        fail("access transistors gated by WL")
    for label in PROBES:
        if label not in nl.probes:
            fail(f"probe {label} bound")


# ----------------------------------------------------------------------------
# operation scripts


@dataclasses.dataclass
class OperationScript:
    kind: str
    waveforms: dict[str, Waveform]
    duration: float
    decode_window: tuple[float, float]
    markers: dict[str, float] = dataclasses.field(default_factory=dict)
    bit: int | None = None


INACTIVE = {"WL": 0.0, "WRE": 0.0, "RE": 0.0, "restore": 0.0}


def _builders(config: CellConfig) -> dict[str, PwlBuilder]:
    vdd = config.vdd
    levels = {"VDD": vdd, "WL": 0.0, "WRE": 0.0, "EN": vdd, "RE": 0.0, "restore": 0.0,
              "BLD": vdd, "BLBD": vdd, "BLE": vdd}
    return {s: PwlBuilder(levels[s], config.edge) for s in SIGNALS}


def _finish(kind, b, duration, window, markers=None, bit=None) -> OperationScript:
    return OperationScript(kind, {s: w.build(duration) for s, w in b.items()}, duration, window,
                           markers or {}, bit)


def script_write(bit: int, config: CellConfig) -> OperationScript:
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit!r}")
    b = _builders(config)
    vdd, e = config.vdd, config.edge
    t0 = config.setup
    b["BLD"].set(t0, vdd if bit else 0.0)
    b["BLBD"].set(t0, 0.0 if bit else vdd)
    t_wl = t0 + e
    t_off = t_wl + config.write_pulse
    b["WL"].set(t_wl, vdd).set(t_off, 0.0)
    b["BLD"].set(t_off + e, vdd)
    b["BLBD"].set(t_off + e, vdd)
    end = t_off + 2 * e + config.settle
    return _finish("write", b, end, (t_off + e, end), {"wl_rise": t_wl, "wl_fall": t_off}, bit)


def script_read(config: CellConfig) -> OperationScript:
    b = _builders(config)
    vdd, e = config.vdd, config.edge
    t_rel = config.setup + config.read_precharge
    b["BLE"].set(t_rel, 0.0)
    t_wl = t_rel + e
    t_off = t_wl + e + config.read_pulse
    b["WL"].set(t_wl, vdd).set(t_off, 0.0)
    b["BLE"].set(t_off + e, vdd)
    end = t_off + 2 * e + config.settle
    return _finish("read", b, end, (t_wl, t_off), {"wl_rise": t_wl, "wl_fall": t_off})


def script_backup(config: CellConfig) -> OperationScript:
    b = _builders(config)
    vdd, e = config.vdd, config.edge
    t0 = config.setup
    t_en = t0 + config.en_pulse
    t_wre = t0 + config.wre_window
    b["WRE"].set(t0, vdd).set(t_wre, 0.0)
    b["EN"].set(t0, 0.0).set(t_en, vdd)
    end = t_wre + e + config.settle
    markers = {"wre_rise": t0, "en_fall": t0, "en_rise": t_en + e / 2, "wre_fall": t_wre + e / 2,
               "window_start": t0, "window_end": t_wre + e}
    return _finish("backup", b, end, (t0, t_wre + e), markers)


def script_restore(config: CellConfig) -> OperationScript:
    b = _builders(config)
    vdd, e = config.vdd, config.edge
    t0 = config.setup
    t_re_off = t0 + e + config.re_pulse
    b["RE"].set(t0, vdd).set(t_re_off, 0.0)
    t_r = t_re_off + e
    t_r_off = t_r + config.restore_window
    b["restore"].set(t_r, vdd).set(t_r_off, 0.0)
    end = t_r_off + e + config.settle
    markers = {"re_rise": t0, "re_fall": t_re_off, "restore_rise": t_r, "restore_fall": t_r_off}
    return _finish("restore", b, end, (t_r_off + e, end), markers)


def script_power_down(config: CellConfig) -> OperationScript:
    b = _builders(config)
    t0 = config.setup
    b["VDD"].set(t0, 0.0, edge=config.power_edge)
    end = t0 + config.power_edge + config.power_down_hold
    return _finish("power_down", b, end, (end, end), {"vdd_fall": t0})


def script_power_up(config: CellConfig) -> OperationScript:
    b = _builders(config)
    b["VDD"] = PwlBuilder(0.0, config.edge)
    t0 = config.setup
    b["VDD"].set(t0, config.vdd, edge=config.power_edge)
    end = t0 + config.power_edge + config.power_up_settle
    return _finish("power_up", b, end, (end, end), {"vdd_rise": t0})


def script_hold(config: CellConfig, duration: float) -> OperationScript:
    """All controls inactive for ``duration``."""
    return _finish("hold", _builders(config), duration, (duration, duration))


SCRIPTS = {
    "write": script_write,
    "read": script_read,
    "backup": script_backup,
    "restore": script_restore,
    "power_down": script_power_down,
    "power_up": script_power_up,
}


def make_script(kind: str, config: CellConfig, bit: int | None = None) -> OperationScript:
    if kind == "write":
        return script_write(bit, config)
    if kind not in SCRIPTS:
        raise ParameterError(f"unknown operation {kind!r}")
    return SCRIPTS[kind](config)


# ----------------------------------------------------------------------------
# running and decoding


@dataclasses.dataclass
class OperationResult:
    kind: str
    trace: Trace
    script: OperationScript
    bit: int | None = None
    mtj_bit: int | str | None = None
    termination_time: float | None = None
    detect_time: float | None = None


def run_operation(cell: CellInstance, script: OperationScript, engine: TransientConfig | None = None, *,
                  temperature: float = 0.0, rng: np.random.Generator | None = None,
                  noise: np.ndarray | None = None) -> OperationResult:
    """Simulate one operation from the cell's current state and decode it.

    The cell's circuit state and MTJ magnetizations are advanced to the end
    of the operation.
    """
    engine = engine or TransientConfig()
    cfg = dataclasses.replace(engine, t_end=script.duration)
    try:
        trace = transient(cell.netlist, cfg, script.waveforms, cell.state,
                          initial_guess=cell.initial_guess, temperature=temperature, rng=rng, noise=noise)
    except NvsramError as exc:
        raise type(exc)(f"{script.kind}: {exc}") from exc
    cell.state = trace.final
    cell.mtj1.state = MagnetizationState(trace.final.m[0])
    cell.mtj2.state = MagnetizationState(trace.final.m[1])
    result = OperationResult(script.kind, trace, script, mtj_bit=decode_mtj(cell))
    vdd = cell.config.vdd
    if script.kind in ("write", "restore"):
        result.bit = decode_sram(trace, script.decode_window, vdd)
    elif script.kind == "read":
        result.bit = decode_read(trace, script.decode_window, vdd)
    elif script.kind == "backup":
        result.termination_time = detect_termination_time(trace, vdd)
        result.detect_time = _first_crossing(trace.time, trace.v("WD"), vdd / 2, rising=True,
                                             after=script.markers["en_fall"])
    return result


def decode_sram(trace: Trace, window: tuple[float, float], vdd: float) -> int:
    k = trace.index_at(window[1])
    q, qc = float(trace.v("q")[k]), float(trace.v("qc")[k])
    return decode_levels(q, qc, vdd)


def decode_levels(q: float, qc: float, vdd: float) -> int:
    if abs(q - qc) < 0.1 * vdd:
        raise DecodeError(f"indeterminate SRAM state: q={q:.4f} V, qc={qc:.4f} V")
    if q > vdd / 2 and qc < vdd / 2:
        return 1
    if q < vdd / 2 and qc > vdd / 2:
        return 0
    raise DecodeError(f"indeterminate SRAM state: q={q:.4f} V, qc={qc:.4f} V")


def decode_read(trace: Trace, window: tuple[float, float], vdd: float) -> int:
    """The bitline on the '0' side discharges: BL_bar low reads 1, BL low reads 0."""
    k = trace.index_at(window[1])
    bl, blb = float(trace.v("BL")[k]), float(trace.v("BL_bar")[k])
    if abs(bl - blb) < 0.1 * vdd:
        raise DecodeError(f"bitlines not separated: BL={bl:.4f} V, BL_bar={blb:.4f} V")
    return 1 if blb < bl else 0


def decode_mtj_mz(mz1: float, mz2: float) -> int | str:
    s = mtjmod.SETTLED_MZ
    p1 = True if mz1 > s else False if mz1 < -s else None
    p2 = True if mz2 > s else False if mz2 < -s else None
    if p1 is True and p2 is False:
        return 1
    if p1 is False and p2 is True:
        return 0
    return CORRUPT


def decode_mtj(cell: CellInstance) -> int | str:
    return decode_mtj_mz(cell.mtj1.state.mz, cell.mtj2.state.mz)


def _first_crossing(t, v, level, rising, after=-math.inf):
    mask = t > after
    idx = np.nonzero(mask)[0]
    if len(idx) < 2:
        return None
    vv = v[idx]
    if rising:
        hits = np.nonzero((vv[:-1] < level) & (vv[1:] >= level))[0]
    else:
        hits = np.nonzero((vv[:-1] > level) & (vv[1:] <= level))[0]
    if len(hits) == 0:
        return None
    j = idx[hits[0]]
    frac = (level - v[j]) / (v[j + 1] - v[j])
    return float(t[j] + frac * (t[j + 1] - t[j]))


def en_rise_time(trace: Trace, vdd: float) -> float | None:
    t_fall = _first_crossing(trace.time, trace.v("EN"), vdd / 2, rising=False)
    if t_fall is None:
        return None
    return _first_crossing(trace.time, trace.v("EN"), vdd / 2, rising=True, after=t_fall)


def detect_termination_time(trace: Trace, vdd: float) -> float | None:
    """First falling crossing of WT through vdd/2 after the EN rising edge."""
    t_en = en_rise_time(trace, vdd)
    if t_en is None:
        return None
    return _first_crossing(trace.time, trace.v("WT"), vdd / 2, rising=False, after=t_en)


# ----------------------------------------------------------------------------
# divider oracle


def _mtj_conductance(state, params: MtjParams) -> float:
    if isinstance(state, (int, float)):
        return float(mtjmod.conductance_mz(float(state), params))
    return mtjmod.conductance(_state(state, 0.0), params)


def divider_levels(config: CellConfig, bit: int, mtj_states, *, r_on: float | None = None,
                   v_q: float | None = None, v_qc: float | None = None,
                   x1_gate: float | None = None) -> tuple[float, float]:
    """Predicted (V(1a), V(2a)) for the series path q-MTJ1-1a-X1-2a-MTJ2-qc.

    ``mtj_states`` holds 'P'/'AP' labels or m_z values. With ``r_on`` the
    bridge is a fixed resistor; otherwise X1's square-law channel is solved
    for the series current. Storage nodes default to the ideal rails of
    ``bit``.
    """
    if bit not in (0, 1):
        raise ParameterError(f"bit must be 0 or 1, got {bit!r}")
    params = config.mtj
    vq = (config.vdd if bit else 0.0) if v_q is None else v_q
    vqc = (0.0 if bit else config.vdd) if v_qc is None else v_qc
    gate = config.vdd if x1_gate is None else x1_gate
    if gate - min(vq, vqc) <= config.vth:
        raise ParameterError("X1 is off; the divider prediction needs a conducting bridge")
    r1 = 1.0 / _mtj_conductance(mtj_states[0], params)
    r2 = 1.0 / _mtj_conductance(mtj_states[1], params)
    if r_on is not None:
        i = (vq - vqc) / (r1 + r_on + r2)
    else:
        def mismatch(i):
            v1a = vq - i * r1
            v2a = vqc + i * r2
            return mosfet_current("n", gate - v2a, v1a - v2a, config.beta_x1, config.vth, config.lam) - i \
                if v1a >= v2a else \
                -mosfet_current("n", gate - v1a, v2a - v1a, config.beta_x1, config.vth, config.lam) - i

        i_max = (vq - vqc) / (r1 + r2)
        i = 0.0 if i_max == 0 else brentq(mismatch, min(0.0, i_max), max(0.0, i_max), xtol=1e-15)
    return vq - i * r1, vqc + i * r2
