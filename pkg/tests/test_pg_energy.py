import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ulpsim import pg_energy as pg
from ulpsim.devices import Environment, ModelError
from ulpsim.pg_energy import DutySpec, LogicBlockSpec, PgSwitchSpec, SwitchKind

P14 = pg.PRESETS["14nm"]


def hand_gain(block, fin, nems, r, f_pg):
    p = block.v_dd * (block.alpha * block.c_l * block.stack_factor * block.v_dd * block.f_logic
                      + block.i_static_on)
    num = fin.c_gate * fin.drive_voltage ** 2 * f_pg * (1 + r) + p * r + block.v_dd * fin.i_leak_off
    den = nems.c_gate * nems.drive_voltage ** 2 * f_pg * (1 + r) + p * r
    return num / den


def test_active_power_zero():
    b = replace(P14.block, alpha=0.0, i_static_on=0.0)
    assert pg.active_power(b) == 0.0


def test_active_power_14nm():
    full = P14.block.v_dd * 535e-3
    assert pg.active_power(P14.with_block(alpha=1.0).block) == pytest.approx(full, rel=1e-12)
    assert full == pytest.approx(374.5e-3)
    assert pg.active_power(P14.block) == pytest.approx(0.7 * (53.33e-3 + 1.71e-3), rel=1e-3)


def test_preset_values():
    assert P14.finfet.c_gate == 10.2e-12
    assert P14.nems.c_gate == 215e-15
    assert P14.finfet.i_leak_off == 502e-6
    assert P14.nems.drive_voltage == pg.V_PG_DEFAULT == 2.5


def test_identical_switch_energies_give_unity():
    fin = replace(P14.finfet, i_leak_off=0.0, c_gate=1e-12, drive_voltage=1.0)
    nems = replace(P14.nems, c_gate=1e-12, drive_voltage=1.0)
    assert pg.energy_gain(P14.block, fin, nems, DutySpec(0.3)) == pytest.approx(1.0, rel=1e-15)


@given(st.floats(1e-4, 1e3), st.floats(1.0, 1e6))
def test_gain_matches_hand_formula(r, f):
    got = pg.energy_gain(P14.block, P14.finfet, P14.nems, DutySpec(r, f))
    assert got == pytest.approx(hand_gain(P14.block, P14.finfet, P14.nems, r, f), rel=1e-12)


def test_table_3_5_saving_14nm():
    assert P14.saving(0.05) == pytest.approx(15.54, abs=1.0)


def test_gain_tends_to_one():
    assert 1.0 <= P14.energy_gain(100.0) < 1.01
    assert pg.energy_gain(P14.block, P14.finfet, P14.nems, DutySpec(math.inf)) == 1.0


def test_pg_frequency_insensitivity():
    gains = [P14.energy_gain(0.05, f) for f in (1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6)]
    assert max(gains) / min(gains) - 1 < 0.01


@pytest.mark.parametrize("e_g,pct", [(1.0, 0.0), (1.184, 15.54), (math.inf, 100.0)])
def test_saving_percent(e_g, pct):
    assert pg.energy_saving_percent(e_g) == pytest.approx(pct, abs=0.01)


# --- monotonicity -----------------------------------------------------

@given(st.sampled_from(list(pg.PRESETS)), st.floats(1e-3, 10.0), st.floats(0.01, 1.0))
def test_gain_decreases_with_duty(name, r, alpha):
    pre = pg.PRESETS[name].with_block(alpha=alpha)
    assert pre.energy_gain(r * 1.01) < pre.energy_gain(r)


@given(st.sampled_from(list(pg.PRESETS)), st.floats(1e-3, 10.0), st.floats(1e-6, 1e-2))
def test_gain_increases_with_leakage(name, r, leak):
    pre = pg.PRESETS[name]
    lo = replace(pre, finfet=replace(pre.finfet, i_leak_off=leak))
    hi = replace(pre, finfet=replace(pre.finfet, i_leak_off=leak * 1.01))
    assert hi.energy_gain(r) > lo.energy_gain(r)


def test_gain_rises_with_temperature():
    gains = [P14.at(Environment(t)).energy_gain(0.05) for t in (250, 300, 350, 400)]
    assert all(b > a for a, b in zip(gains, gains[1:]))


def test_nems_never_loses_when_cheaper_to_drive():
    for pre in pg.PRESETS.values():
        assert pre.nems.c_gate * pre.nems.drive_voltage ** 2 <= pre.finfet.c_gate * pre.block.v_dd ** 2
        for r in (1e-3, 0.1, 10.0, 1e4):
            assert pre.energy_gain(r) >= 1.0


def test_temperature_factor_is_subthreshold_law():
    env = Environment(313.15)
    k = pg.leakage_temperature_factor(1.5, 0.36, env)
    vt0, vt1 = Environment(300).thermal_voltage, env.thermal_voltage
    assert k == pytest.approx(math.exp(0.36 / (1.5 * vt0) - 0.36 / (1.5 * vt1)), rel=1e-12)
    assert pg.leakage_temperature_factor(1.5, 0.36, Environment(300)) == 1.0


# --- sizing --------------------------------------------------------------

def _unit(kind, r=100.0, c=1e-15, leak=1e-9):
    return PgSwitchSpec(kind, c, 2.5, r, leak if kind is SwitchKind.FINFET else 0.0,
                        unit_r_on=r, unit_c_gate=c, unit_area=1e-12)


def test_size_nems_switch_count():
    n, agg = pg.size_pg_switch(_unit(SwitchKind.NEMS), 23.3e-3)
    assert n == math.ceil(100 / 23.3e-3) == 4292
    assert n == pytest.approx(4310, rel=0.01)
    assert agg.r_on == pytest.approx(100 / n)
    assert agg.c_gate == pytest.approx(n * 1e-15)
    assert agg.i_leak_off == 0.0


def test_size_identity_and_leak_linearity():
    u = _unit(SwitchKind.FINFET)
    assert pg.size_pg_switch(u, u.unit_r_on)[0] == 1
    n1, a1 = pg.size_pg_switch(u, 1.0)
    n2, a2 = pg.size_pg_switch(u, 0.5)
    assert n2 == 2 * n1
    assert a2.i_leak_off == pytest.approx(2 * a1.i_leak_off, rel=1e-15)


def test_size_rejects_bad_target():
    with pytest.raises(ModelError):
        pg.size_pg_switch(_unit(SwitchKind.NEMS), 0.0)


# --- break-even ----------------------------------------------------------

def bisect_breakeven(pre, target):
    lo, hi = 1e-9, 1e6
    for _ in range(300):
        mid = math.sqrt(lo * hi)
        if pre.saving(mid) > target:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


@pytest.mark.parametrize("name,expected,tol", [("20nm", 1.7, 0.5), ("17nm", 5.2, 1.0),
                                             ("14nm", 8.4, 1.0)])
def test_breakeven_duty(name, expected, tol):
    pre = pg.PRESETS[name]
    r = pg.breakeven_duty(pre.block, pre.finfet, pre.nems, 10.0)
    assert r == pytest.approx(bisect_breakeven(pre, 10.0), rel=1e-6)
    assert 100 * r == pytest.approx(expected, abs=tol)


def test_breakeven_edge_cases():
    assert pg.breakeven_duty(P14.block, P14.finfet, P14.nems, 0.0) == math.inf
    # a NEMS gate costlier than FinFET leakage caps the reachable saving
    costly = replace(P14.nems, c_gate=1e-6)
    with pytest.raises(ModelError, match="not reachable"):
        pg.breakeven_duty(P14.block, P14.finfet, costly, 10.0)


# --- SoC table ---------------------------------------------------------

def test_soc_table_at_40c():
    rows = pg.soc_report(pg.MOBILE_SOC_UNITS, P14, Environment(313.15))
    assert [r[0] for r in rows] == [u.name for u in pg.MOBILE_SOC_UNITS]
    by = {r[0]: r[4] for r in rows}
    assert by["dsp_gpu"] == pytest.approx(29.5, abs=3.0)
    assert min(by, key=by.get) == "clock_distribution"


def test_soc_zero_leak_gives_no_saving():
    fin = replace(P14.finfet, i_leak_off=0.0)
    nems = replace(P14.nems, c_gate=P14.finfet.c_gate, drive_voltage=P14.block.v_dd)
    pre = replace(P14, finfet=fin, nems=nems)
    for row in pg.soc_report(pg.MOBILE_SOC_UNITS, pre):
        assert row[4] == pytest.approx(0.0, abs=1e-12)


@given(st.floats(0.01, 100.0))
@settings(max_examples=25)
def test_soc_is_scale_free(k):
    a = pg.soc_report(pg.MOBILE_SOC_UNITS, P14, Environment(313.15))
    b = pg.soc_report(pg.MOBILE_SOC_UNITS, P14.scaled(k), Environment(313.15))
    for ra, rb in zip(a, b):
        assert rb[4] == pytest.approx(ra[4], rel=1e-9)


def test_stacking_lowers_gain():
    stacked = P14.with_block(stack_factor=1.5)
    assert stacked.energy_gain(0.05) < P14.energy_gain(0.05)


def test_invalid_specs():
    with pytest.raises(ModelError):
        LogicBlockSpec(0.7, 1e9, 1e-9, 0.0, alpha=1.5)
    with pytest.raises(ModelError):
        DutySpec(0.0)
    with pytest.raises(ModelError):
        PgSwitchSpec(SwitchKind.NEMS, 1e-15, 2.5, 1.0, 1e-9, 1.0, 1e-15, 1e-12)


def test_duty_sweep_rows():
    rows = pg.duty_sweep(P14, [0.01, 0.1], Environment(300))
    assert rows[0][:3] == (0.01, 0.1, 300.0)
    assert rows[1][4] == pytest.approx(pg.energy_saving_percent(P14.energy_gain(0.1)))
