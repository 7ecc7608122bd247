import dataclasses

import numpy as np
import pytest

from nvsram import cell as cellmod
from nvsram.cell import CORRUPT, CellConfig, build_cell, divider_levels, run_operation
from nvsram.engine import max_kcl_residual
from nvsram.errors import DecodeError, ParameterError
from nvsram.mtj import MtjParams

def pipeline(cfg, bit, initial):
    """write(bit) -> backup -> power-down -> power-up -> restore -> read."""
    c = build_cell(cfg, mtj_states=initial, sram_bit=1 - bit)
    out = {}
    out["write"] = run_operation(c, cellmod.script_write(bit, cfg))
    out["backup"] = run_operation(c, cellmod.script_backup(cfg))
    out["power_down"] = run_operation(c, cellmod.script_power_down(cfg))
    out["power_up"] = run_operation(c, cellmod.script_power_up(cfg))
    out["restore"] = run_operation(c, cellmod.script_restore(cfg))
    out["read"] = run_operation(c, cellmod.script_read(cfg))
    return c, out


def backup_from(cfg, bit, mtj_bit, terminate=True):
    c = build_cell(cfg, mtj_states=cellmod.mtj_states_for_bit(mtj_bit), sram_bit=bit, terminate=terminate)
    return c, run_operation(c, cellmod.script_backup(cfg))


@pytest.fixture(scope="module")
def differing(cell_config):
    return backup_from(cell_config, 1, 0)


@pytest.fixture(scope="module")
def matching(cell_config):
    return backup_from(cell_config, 1, 1)


@pytest.fixture(scope="module")
def restored(cell_config):
    """Restore traces from identical powered-up cores for both stored bits."""
    out = {}
    for bit in (0, 1):
        c = build_cell(cell_config, mtj_states=cellmod.mtj_states_for_bit(bit), sram_bit=bit)
        run_operation(c, cellmod.script_power_down(cell_config))
        run_operation(c, cellmod.script_power_up(cell_config))
        out[bit] = run_operation(c, cellmod.script_restore(cell_config))
    return out


class TestConstruction:
    def test_default_cell_valid(self, cell_config):
        c = build_cell(cell_config)
        c.netlist.validate()
        for label in cellmod.PROBES:
            assert label in c.probes
        assert (c.mtj1.free_terminal, c.mtj1.pinned_terminal) == ("q", "1a")
        assert (c.mtj2.free_terminal, c.mtj2.pinned_terminal) == ("qc", "2a")
        assert c.mtj1.params.eta is not None

    def test_initial_states(self, cell_config):
        c = build_cell(cell_config, mtj_states=("AP", "P"))
        assert c.mtj1.state.mz < -0.99 and c.mtj2.state.mz > 0.99
        assert cellmod.decode_mtj(c) == 0

    @pytest.mark.parametrize("v_buf", [0.8, 0.9, 0.0, -0.1])
    def test_rejects_v_buf_outside_supply(self, v_buf):
        with pytest.raises(ParameterError):
            CellConfig(v_buf=v_buf)

    def test_rejects_unrealizable_v_buf(self):
        with pytest.raises(ParameterError):
            CellConfig(v_buf=0.2)

    def test_rejects_short_backup_window(self):
        with pytest.raises(ParameterError, match="10x"):
            CellConfig(wre_window=5e-9).check_backup_window()

    def test_window_is_long_enough(self, cell_config):
        t_sw = cell_config.check_backup_window()
        assert cell_config.wre_window >= 10 * t_sw

    def test_degenerate_resistances_rejected(self):
        with pytest.raises(ParameterError):
            CellConfig(mtj=MtjParams(r_parallel=5.5e3, r_antiparallel=5.5e3))

    def test_buffer_trip_point(self, cell_config):
        # first buffer stage, both devices saturated at the trip point
        bn, bp = cellmod._buffer_betas(cell_config)
        vm, vth, vdd = cell_config.buffer_threshold, cell_config.vth, cell_config.vdd
        assert bn * (vm - vth) ** 2 == pytest.approx(bp * (vdd - vm - vth) ** 2, rel=1e-12)


class TestScripts:
    def test_inactive_levels(self, cell_config):
        s = cellmod.script_write(1, cell_config)
        for sig in ("WRE", "RE", "restore"):
            assert max(s.waveforms[sig].values) == 0.0
        assert min(s.waveforms["EN"].values) == cell_config.vdd
        b = cellmod.script_backup(cell_config)
        assert max(b.waveforms["WL"].values) == 0.0
        assert max(b.waveforms["RE"].values) == 0.0

    def test_backup_timing(self, cell_config):
        b = cellmod.script_backup(cell_config)
        wre, en = b.waveforms["WRE"], b.waveforms["EN"]
        t0 = b.markers["wre_rise"]
        assert wre(t0 + cell_config.edge + 1e-12) == cell_config.vdd
        assert wre(t0 + cell_config.wre_window - 1e-12) == cell_config.vdd
        assert en(t0 + cell_config.edge + 1e-12) == 0.0
        assert en(t0 + cell_config.en_pulse + cell_config.edge + 1e-12) == cell_config.vdd
        assert b.decode_window == (b.markers["window_start"], b.markers["window_end"])

    def test_write_bitlines(self, cell_config):
        for bit, (bl, blb) in ((1, (0.8, 0.0)), (0, (0.0, 0.8))):
            s = cellmod.script_write(bit, cell_config)
            t = s.markers["wl_rise"] + cell_config.edge + 1e-12
            assert s.waveforms["BLD"](t) == bl and s.waveforms["BLBD"](t) == blb
            assert s.waveforms["WL"](t) == cell_config.vdd

    def test_restore_sequence(self, cell_config):
        s = cellmod.script_restore(cell_config)
        # restore rises once RE has fully fallen
        assert s.markers["restore_rise"] >= s.markers["re_fall"] + cell_config.edge
        assert s.waveforms["restore"](s.duration) == 0.0

    def test_unknown_operation(self, cell_config):
        with pytest.raises(ParameterError):
            cellmod.make_script("erase", cell_config)
        with pytest.raises(ParameterError):
            cellmod.script_write(2, cell_config)


class TestSram:
    def test_hold(self, cell_config):
        c = build_cell(cell_config, sram_bit=1)
        r = run_operation(c, cellmod.script_hold(cell_config, 10e-9))
        q, qc = r.trace.v("q"), r.trace.v("qc")
        assert q.min() > 0.75 and qc.max() < 0.05
        assert cellmod.decode_sram(r.trace, r.script.decode_window, cell_config.vdd) == 1

    def test_write_and_read(self, cell_config):
        c = build_cell(cell_config, sram_bit=0)
        assert run_operation(c, cellmod.script_write(1, cell_config)).bit == 1
        r1 = run_operation(c, cellmod.script_read(cell_config))
        r2 = run_operation(c, cellmod.script_read(cell_config))
        assert r1.bit == r2.bit == 1
        k = r1.trace.index_at(r1.script.decode_window[1])
        assert r1.trace.v("BL")[k] > 0.75
        assert r1.trace.v("BL_bar")[k] < 0.6
        assert run_operation(c, cellmod.script_write(0, cell_config)).bit == 0
        assert run_operation(c, cellmod.script_read(cell_config)).bit == 0

    def test_write_does_not_touch_mtjs(self, cell_config):
        c = build_cell(cell_config, mtj_states=("AP", "P"), sram_bit=0)
        r = run_operation(c, cellmod.script_write(1, cell_config))
        # only the 1a/2a node capacitance charges through the MTJs
        charge = np.trapezoid(np.abs(r.trace.i("MTJ1")), r.trace.time)
        assert charge < 1e-15
        assert np.abs(np.diff(r.trace.mz("MTJ1"))).sum() < 1e-2
        assert cellmod.decode_mtj(c) == 0

    def test_kcl_on_cell(self, cell_config):
        c = build_cell(cell_config, sram_bit=0)
        r = run_operation(c, cellmod.script_write(1, cell_config))
        assert max_kcl_residual(c.netlist, r.trace) < 1e-9


class TestDecode:
    def test_levels(self):
        assert cellmod.decode_levels(0.8, 0.0, 0.8) == 1
        assert cellmod.decode_levels(0.0, 0.8, 0.8) == 0
        with pytest.raises(DecodeError):
            cellmod.decode_levels(0.42, 0.40, 0.8)
        with pytest.raises(DecodeError):
            cellmod.decode_levels(0.7, 0.5, 0.8)

    def test_mtj_pairs(self):
        assert cellmod.decode_mtj_mz(0.99, -0.99) == 1
        assert cellmod.decode_mtj_mz(-0.99, 0.99) == 0
        assert cellmod.decode_mtj_mz(0.99, 0.99) == CORRUPT
        assert cellmod.decode_mtj_mz(-0.99, -0.99) == CORRUPT
        assert cellmod.decode_mtj_mz(0.5, -0.99) == CORRUPT

    def test_bit_encoding(self):
        assert cellmod.mtj_states_for_bit(1) == ("P", "AP")
        assert cellmod.mtj_states_for_bit(0) == ("AP", "P")


class TestBackup:
    def test_differing_switches(self, differing):
        c, r = differing
        assert r.mtj_bit == 1
        tr = r.trace
        assert tr.mz("MTJ1")[0] < -0.99 and tr.mz("MTJ1")[-1] > 0.99
        assert tr.mz("MTJ2")[0] > 0.99 and tr.mz("MTJ2")[-1] < -0.99

    def test_en_pulse_charges_wt(self, differing, cell_config):
        c, r = differing
        tr = r.trace
        k = tr.index_at(r.script.markers["en_rise"])
        assert tr.v("WT")[k] > 0.95 * cell_config.vdd
        assert tr.v("x1g")[k] > 0.95 * cell_config.vdd
        assert tr.i("X1")[k] > 10e-6

    def test_differing_sequence(self, differing, cell_config):
        c, r = differing
        tr, vb, vdd = r.trace, cell_config.buffer_threshold, cell_config.vdd
        k = tr.index_at(r.script.markers["en_rise"])
        assert tr.v("1a")[k] < vb and tr.v("2a")[k] < vb
        t_term = r.termination_time
        assert r.detect_time is not None and r.detect_time <= t_term
        # WD pulses and returns low; WT stays discharged
        after = tr.time > t_term + 100e-12
        assert tr.v("WD")[after][-1] < 0.1 * vdd
        assert np.all(tr.v("WT")[after] < 0.1 * vdd)
        # current stops after termination
        assert np.abs(tr.i("MTJ1")[after]).max() < 1e-7

    def test_termination_ordering(self, differing, cell_config):
        c, r = differing
        t_en = cellmod.en_rise_time(r.trace, cell_config.vdd)
        t_wre_fall = r.script.markers["wre_fall"]
        assert t_en < r.termination_time < t_wre_fall

    def test_matching_terminates_at_en_edge(self, matching, cell_config):
        c, r = matching
        assert r.mtj_bit == 1
        t_en = cellmod.en_rise_time(r.trace, cell_config.vdd)
        assert t_en < r.termination_time < t_en + 100e-12
        # MTJ current flows for roughly the EN pulse only
        i = np.abs(r.trace.i("MTJ1"))
        on = r.trace.time[i > 0.5 * i.max()]
        assert on[-1] - on[0] == pytest.approx(cell_config.en_pulse, rel=0.3)

    def test_matching_before_differing(self, matching, differing):
        assert matching[1].termination_time < differing[1].termination_time

    @pytest.mark.parametrize("fixture", ["matching", "differing"])
    def test_causality(self, fixture, request, cell_config):
        c, r = request.getfixturevalue(fixture)
        t_en = cellmod.en_rise_time(r.trace, cell_config.vdd)
        assert r.termination_time > t_en
        assert r.termination_time >= r.detect_time

    def test_baseline_holds_wt(self, cell_config, differing):
        c, r = backup_from(cell_config, 1, 0, terminate=False)
        tr = r.trace
        inside = (tr.time > r.script.markers["en_rise"] + 50e-12) & (tr.time < r.script.markers["wre_fall"] - 50e-12)
        assert np.all(tr.v("WT")[inside] > 0.95 * cell_config.vdd)
        # same outcome as the terminated run
        assert r.mtj_bit == differing[1].mtj_bit

    def test_no_termination_equivalence_all_cases(self, cell_config):
        for bit in (0, 1):
            for mtj_bit in (0, 1):
                a = backup_from(cell_config, bit, mtj_bit, terminate=True)[1]
                b = backup_from(cell_config, bit, mtj_bit, terminate=False)[1]
                assert a.mtj_bit == b.mtj_bit == bit


class TestRestore:
    def test_polarity(self, restored):
        assert restored[1].bit == 1
        assert restored[0].bit == 0

    def test_bridge_current_stops(self, restored):
        for r in restored.values():
            tr = r.trace
            after = tr.time > r.script.markers["restore_fall"] + 100e-12
            assert np.abs(tr.i("MTJ1")[after]).max() < 1e-7
            assert np.abs(tr.i("X1")[after]).max() < 1e-7

    def test_equalized_start(self, restored):
        r = restored[1]
        k = r.trace.index_at(r.script.markers["re_fall"])
        assert abs(r.trace.v("q")[k] - r.trace.v("qc")[k]) < 1e-6

    def test_symmetry(self, restored):
        a, b = restored[1].trace, restored[0].trace
        for x, y in (("q", "qc"), ("1a", "2a"), ("1b", "2b")):
            np.testing.assert_allclose(a.v(x), b.v(y), atol=1e-5)
        np.testing.assert_allclose(a.mz("MTJ1"), b.mz("MTJ2"), atol=1e-9)
        np.testing.assert_allclose(a.v("WT"), b.v("WT"), atol=1e-5)

    def test_mtjs_undisturbed(self, restored):
        assert restored[1].mtj_bit == 1
        assert restored[0].mtj_bit == 0


class TestPipeline:
    @pytest.mark.parametrize("bit", [0, 1])
    def test_round_trip(self, cell_config, bit):
        c, out = pipeline(cell_config, bit, cellmod.mtj_states_for_bit(1 - bit))
        assert out["write"].bit == bit
        assert out["backup"].mtj_bit == bit
        tr = out["power_down"].trace
        assert abs(tr.v("q")[-1]) < 0.01 and abs(tr.v("qc")[-1]) < 0.01
        assert out["restore"].bit == bit
        assert out["read"].bit == bit


class TestDivider:
    def test_differing_example(self, cell_config):
        v1a, v2a = divider_levels(cell_config, 1, ("AP", "P"), r_on=1e3)
        assert v2a == pytest.approx(0.8 * 5.5 / 18.5, rel=1e-12)
        assert v1a == pytest.approx(0.8 * 6.5 / 18.5, rel=1e-12)
        assert max(v1a, v2a) < cell_config.buffer_threshold

    def test_matching_example(self, cell_config):
        v1a, v2a = divider_levels(cell_config, 1, ("P", "AP"), r_on=1e3)
        assert v2a == pytest.approx(0.8 * 12 / 18.5, rel=1e-12)
        assert v1a == pytest.approx(0.8 * 13 / 18.5, rel=1e-12)
        assert min(v1a, v2a) > cell_config.buffer_threshold

    def test_mirror(self, cell_config):
        a = divider_levels(cell_config, 1, ("AP", "P"))
        b = divider_levels(cell_config, 0, ("P", "AP"))
        assert a[0] == pytest.approx(b[1]) and a[1] == pytest.approx(b[0])

    def test_square_law_bridge_consistent(self, cell_config):
        v1a, v2a = divider_levels(cell_config, 1, ("AP", "P"))
        i_mtj = (0.8 - v1a) / 12e3
        i_x1 = cellmod.mosfet_current("n", 0.8 - v2a, v1a - v2a, cell_config.beta_x1, 0.25, 0.1)
        assert i_x1 == pytest.approx(i_mtj, rel=1e-9)
        assert v2a == pytest.approx(i_mtj * 5.5e3, rel=1e-9)

    def test_x1_off_rejected(self, cell_config):
        with pytest.raises(ParameterError):
            divider_levels(cell_config, 1, ("AP", "P"), x1_gate=0.0)

    def test_buffer_margin(self, cell_config):
        vb = cell_config.buffer_threshold
        for bit in (0, 1):
            diff = divider_levels(cell_config, bit, cellmod.mtj_states_for_bit(1 - bit))
            match = divider_levels(cell_config, bit, cellmod.mtj_states_for_bit(bit))
            assert all(vb - v >= 0.05 for v in diff)
            assert all(v - vb >= 0.05 for v in match)

    @pytest.mark.parametrize("case", ["differing", "matching"])
    def test_transient_agrees(self, case, request, cell_config):
        c, r = request.getfixturevalue(case)
        tr = r.trace
        k = tr.index_at(r.script.markers["en_rise"] - 20e-12)
        states = (tr.mz("MTJ1")[k], tr.mz("MTJ2")[k])
        pred = divider_levels(cell_config, 1, states, v_q=tr.v("q")[k], v_qc=tr.v("qc")[k],
                              x1_gate=tr.v("x1g")[k])
        assert tr.v("1a")[k] == pytest.approx(pred[0], rel=0.05)
        assert tr.v("2a")[k] == pytest.approx(pred[1], rel=0.05)
