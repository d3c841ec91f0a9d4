import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from ulpsim import piezo
from ulpsim.devices import ModelError, PiezoTransducer
from ulpsim.piezo import Arch, FsmState, RectifierConfig

X = PiezoTransducer()
UNIT = X.c_pz * X.v_oc ** 2 * X.f_pz


def lossless(x=X, **kw):
    return RectifierConfig(xdcr=replace(x, r_pz=math.inf), **kw)


# --- closed forms -----------------------------------------------------

def test_fbr_power():
    assert piezo.analytic_pout(Arch.FBR, X) == pytest.approx(19e-9 * 146, rel=1e-12)
    assert piezo.analytic_pout(Arch.FBR, X) == pytest.approx(2.77e-6, rel=0.005)


@pytest.mark.parametrize("arch,kw,expected", [
    (Arch.FBR, {}, 1.0),
    (Arch.INV, {"v_inv": 0.0}, 8.0),
    (Arch.INV, {"v_inv": 1.0}, 10.0),
    (Arch.PC, {"v_pc": 1.0}, 8.0),
    (Arch.DPR, {"v_init": 2.0}, 12.0),
    (Arch.BF, {"v_out": 1.0}, 4.0),
    (Arch.BF, {"v_out": 2.5}, 10.0),
    (Arch.SECE, {}, 4.0),
    (Arch.PROPOSED, {"v_pc": 1.5, "v_max": 3.3}, 9.6),
    (Arch.PROPOSED, {"v_pc": 0.0, "v_max": 12.0}, 24.0),
])
def test_fom_closed_forms(arch, kw, expected):
    assert piezo.fom(piezo.analytic_pout(arch, X, **kw), X) == pytest.approx(expected, rel=1e-12)


@given(st.floats(1e-9, 1e-7), st.floats(10.0, 1e3), st.floats(0.1, 5.0))
def test_fom_is_scale_free(c, f, v):
    x = PiezoTransducer(c_pz=c, f_pz=f, v_oc=v)
    assert piezo.fom(piezo.analytic_pout(Arch.SECE, x), x) == pytest.approx(4.0, rel=1e-12)


def test_precharge_voltage():
    v = piezo.precharge_voltage(1.0, 1.417e-6, 47e-6, 19e-9)
    assert v == pytest.approx(1.417e-6 / math.sqrt(47e-6 * 19e-9), rel=1e-12)
    assert v == pytest.approx(1.5, abs=0.01)
    cfg = RectifierConfig(v_pc_target=1.5)
    assert cfg.eng_time == pytest.approx(1.417e-6, rel=1e-3)


def test_precharge_energy_identity():
    cfg = lossless(v_pc_target=1.5)
    tr = piezo.simulate(cfg, 1)
    eng, pc = tr.segments[0], tr.segments[1]
    assert eng.state is FsmState.ENG_P and pc.state is FsmState.PC_P
    assert pc.v1 == pytest.approx(1.5, rel=1e-12)
    assert eng.energy["e_inv"] == pytest.approx(0.5 * X.c_pz * 1.5 ** 2, rel=1e-12)


def test_accumulation_time_closed_form():
    assert piezo.accumulation_time(3.3, 0.0, 1.0, 1.0) == pytest.approx(0.825)
    lossy = piezo.accumulation_time(3.3, 0.0, 1.0, 1.0, flip_loss_v=0.8)
    assert lossy == pytest.approx(1.225)
    assert 100 * (lossy / 0.825 - 1) == pytest.approx(48.5, abs=0.5)
    assert piezo.accumulation_time(1.0, 1.5, 1.0, 1.0) == 0.0


@given(st.floats(0.0, 1.9))
def test_accumulation_time_grows_with_flip_loss(loss):
    a = piezo.accumulation_time(3.3, 0.0, 1.0, 1.0, flip_loss_v=loss)
    b = piezo.accumulation_time(3.3, 0.0, 1.0, 1.0, flip_loss_v=loss + 0.05)
    assert b >= a


def test_accumulation_time_diverges():
    with pytest.raises(piezo.SimulationError, match="unreachable"):
        piezo.accumulation_time(3.3, 0.0, 1.0, 1.0, flip_loss_v=2.0)


# --- configuration ------------------------------------------------------

@pytest.mark.parametrize("kw", [{"l": 1.0}, {"r_tot": 200.0}, {"v_pc_target": 3.3},
                                {"v_out": 0.0}, {"flip_loss_v": -0.1}, {"l": 0.0}])
def test_config_validation(kw):
    with pytest.raises(ModelError):
        RectifierConfig(**kw)


# --- analytic segment pieces vs ODE oracles ---------------------------

def rlc_ivp(c, l, r, v0, i0, stop):
    """Series RLC: the capacitor drives current i through l and r."""
    def rhs(t, y):
        v, i = y
        return [-i / c, (v - r * i) / l]
    stop.terminal = True
    sol = solve_ivp(rhs, (0, 1e-3), [v0, i0], events=stop, rtol=1e-12, atol=1e-18,
                    method="DOP853")
    return sol.t_events[0][0], sol.y_events[0][0]


@pytest.mark.parametrize("r", [0.0, 1.0, 20.0])
def test_rlc_pieces_match_ode(r):
    cfg = RectifierConfig(r_tot=r)
    rlc = piezo._Rlc(cfg)
    c, l = X.c_pz, cfg.l

    cur = lambda t, y: y[1]
    cur.direction = -1
    t_ref, (v_ref, _) = rlc_ivp(c, l, r, 3.3, 0.0, cur)
    t, v = rlc.flip(3.3)
    assert t == pytest.approx(t_ref, rel=1e-7)
    assert v == pytest.approx(v_ref, rel=1e-7)

    volt = lambda t, y: y[0]
    volt.direction = -1
    t_ref, (_, i_ref) = rlc_ivp(c, l, r, 3.3, 0.0, volt)
    t, i = rlc.drain(3.3)
    assert t == pytest.approx(t_ref, rel=1e-7)
    assert i == pytest.approx(i_ref, rel=1e-7)

    # inductor dumping into an empty capacitor: current flows into it
    cur_in = lambda t, y: y[1]
    cur_in.direction = 1
    t_ref, (v_ref, _) = rlc_ivp(c, l, r, 0.0, -1e-3, cur_in)
    t, v = rlc.charge(1e-3)
    assert t == pytest.approx(t_ref, rel=1e-7)
    assert v == pytest.approx(v_ref, rel=1e-7)


@pytest.mark.parametrize("r", [0.0, 5e-324, 1e-6, 3e-3, 1.0, 50.0])
def test_ramps_match_ode(r):
    l, v = 47e-6, 1.0
    i1, q = piezo._ramp_up(l, r, v, 2e-6)
    sol = solve_ivp(lambda t, y: [(v - r * y[0]) / l, y[0]], (0, 2e-6), [0.0, 0.0],
                    rtol=1e-12, atol=1e-20, method="DOP853")
    assert i1 == pytest.approx(sol.y[0, -1], rel=1e-8)
    assert q == pytest.approx(sol.y[1, -1], rel=1e-8)

    def empty(t, y):
        return y[0]
    empty.terminal, empty.direction = True, -1
    sol = solve_ivp(lambda t, y: [(-v - r * y[0]) / l, y[0]], (0, 1e-3), [0.05, 0.0],
                    events=empty, rtol=1e-12, atol=1e-20, method="DOP853")
    t, q = piezo._ramp_down_integral(l, r, 0.05, v)
    assert t == pytest.approx(sol.t_events[0][0], rel=1e-8)
    assert q == pytest.approx(sol.y_events[0][0][1], rel=1e-8)


@pytest.mark.parametrize("r_pz", [2e6, 1e5, math.inf])
def test_source_integration_matches_ode(r_pz):
    x = replace(X, r_pz=r_pz)
    src = piezo._Source(x)
    leak = 0.0 if math.isinf(r_pz) else 1.0 / r_pz

    def rhs(t, y):
        v = y[0]
        i = x.i_peak * math.sin(2 * math.pi * x.f_pz * t)
        return [(i - v * leak) / x.c_pz, v * i, v * v * leak]

    t0, t1, v0 = 0.3e-3, 3.2e-3, -0.4
    sol = solve_ivp(rhs, (t0, t1), [v0, 0.0, 0.0], rtol=1e-11, atol=1e-15, method="DOP853")
    assert src.voltage(t0, v0, t1) == pytest.approx(sol.y[0, -1], rel=1e-7, abs=1e-12)
    work, loss = src.energies(t0, v0, t1)
    assert work == pytest.approx(sol.y[1, -1], rel=1e-6, abs=1e-18)
    assert loss == pytest.approx(sol.y[2, -1], rel=1e-6, abs=1e-18)


# --- full simulation ------------------------------------------------------

def test_lossless_power_matches_closed_form():
    for v_pc in (0.0, 1.5):
        p = piezo.simulate(lossless(v_pc_target=v_pc), 100).net_power()
        ref = piezo.analytic_pout(Arch.PROPOSED, X, v_pc=v_pc, v_max=3.3)
        assert p == pytest.approx(ref, rel=0.01)


def test_precharge_gain_ratio():
    p0 = piezo.simulate(lossless(), 100).net_power()
    p1 = piezo.simulate(lossless(v_pc_target=1.5), 100).net_power()
    assert p0 / p1 == pytest.approx(3.3 / 4.8, rel=0.01)


def test_fom_does_not_depend_on_output_voltage():
    foms = [piezo.fom(piezo.simulate(lossless(v_out=v), 100).net_power(), X)
            for v in (0.5, 1.0, 2.0, 3.0)]
    assert max(foms) / min(foms) - 1 < 0.01


@pytest.mark.parametrize("mult,k", [(2, 4.0), (4, 8.0)])
def test_lossless_two_and_four_v_oc(mult, k):
    p = piezo.simulate(lossless(v_max=mult * X.v_oc), 100).net_power()
    assert p == pytest.approx(k * UNIT, rel=0.01)


def test_trace_structure():
    tr = piezo.simulate(RectifierConfig(v_pc_target=1.0, **piezo.calibrated_losses()), 20)
    ev = tr.events
    assert ev[-1][1] is FsmState.END
    times = [e[0] for e in ev]
    assert all(b >= a for a, b in zip(times, times[1:]))
    for t, state, v, i0 in ev:
        if state.name.startswith("INT"):
            assert i0 == 0.0
    for _, vp, vn in tr.node_voltages():
        assert vp >= -1e-3 and vn >= -1e-3
    kinds = {s.state.name.split("_")[0] for s in tr.segments}
    assert kinds == {"INT", "BF", "TRANS", "HAR", "ENG", "PC"}


@given(st.floats(5e-9, 50e-9), st.floats(50.0, 300.0), st.floats(0.3, 1.5),
       st.floats(3.0, 10.0), st.floats(0.0, 0.8), st.floats(0.0, 5.0), st.floats(0.0, 0.5))
@settings(max_examples=25, deadline=None)
def test_energy_audit_closes(c, f, v_oc, k_max, k_pc, r_tot, flip):
    x = PiezoTransducer(c_pz=c, f_pz=f, v_oc=v_oc)
    v_max = k_max * v_oc
    cfg = RectifierConfig(xdcr=x, v_max=v_max, v_pc_target=k_pc * v_max, r_tot=r_tot,
                          flip_loss_v=flip * v_oc)
    tr = piezo.simulate(cfg, 30)
    led = tr.ledger()
    assert abs(led.audit_residual) <= 1e-6 * led.e_src
    assert min(min(vp, vn) for _, vp, vn in tr.node_voltages()) >= -1e-3
    if r_tot == 0.0 and flip == 0.0:
        assert led.e_loss_rtot == 0.0 and led.e_loss_flip == 0.0


def test_losses_reduce_power():
    base = RectifierConfig(v_pc_target=1.0)
    p = lambda **kw: piezo.simulate(replace(base, **kw), 60).net_power()
    assert p(r_tot=0.0) > p(r_tot=1.0) > p(r_tot=5.0)
    assert p(flip_loss_v=0.0) > p(flip_loss_v=0.4) > p(flip_loss_v=0.8)
    strong = replace(base, xdcr=replace(X, r_pz=1e8))
    weak = replace(base, xdcr=replace(X, r_pz=5e5))
    assert piezo.simulate(strong, 60).net_power() > p() > piezo.simulate(weak, 60).net_power()
    assert p(p_ctrl=1e-6) == pytest.approx(p() - 1e-6, rel=1e-9)


def test_detector_delay_extends_integration():
    d = 2e-6
    cfg = lossless(detector_delay=d)
    tr = piezo.simulate(cfg, 10)
    src = piezo._Source(cfg.xdcr)
    i = next(k for k, s in enumerate(tr.segments) if s.state.name.startswith("TRANS"))
    seg = tr.segments[i - 1]
    assert seg.state.name.startswith("INT")
    sign = 1 if seg.state is FsmState.INT_P else -1
    assert sign * src.voltage(seg.t0, seg.v0, seg.t1 - d) == pytest.approx(3.3, rel=1e-9)
    assert abs(seg.v1) > 3.3


def closed_form_errors(cfg, n_cycles=100):
    tr = piezo.simulate(cfg, n_cycles)
    x = cfg.xdcr
    v_pc = piezo.precharge_voltage(cfg.v_out, cfg.eng_time, cfg.l, x.c_pz)
    p_ref = 2 * x.c_pz * x.v_oc * (cfg.v_max + v_pc) * x.f_pz
    t_ref = (cfg.v_max - v_pc) / (4 * x.v_oc * x.f_pz)
    return tr.net_power() / p_ref - 1, tr.mean_accumulation_time() / t_ref - 1


@pytest.mark.parametrize("v_pc", [0.0, 1.5, 3.0])
def test_transfer_duty_hand_value(v_pc):
    cfg = lossless(v_pc_target=v_pc, r_tot=0.0)
    s = math.sqrt(cfg.l * X.c_pz)
    # quarter ring to drain, linear ramp out, then energise plus quarter ring back
    busy = s * math.pi / 2 + s * cfg.v_max / cfg.v_out
    if v_pc:
        busy += s * v_pc / cfg.v_out + s * math.pi / 2
    interval = (cfg.v_max - v_pc) / (4 * X.v_oc * X.f_pz)
    assert piezo.transfer_duty(cfg) == pytest.approx(busy / interval, rel=1e-9)


def test_closed_form_holds_when_transfers_are_short():
    rng = np.random.default_rng(11)
    seen = 0
    while seen < 12:
        x = PiezoTransducer(c_pz=rng.uniform(5e-9, 50e-9), f_pz=rng.uniform(50, 300),
                            v_oc=rng.uniform(0.5, 1.0), r_pz=math.inf)
        v_max = rng.uniform(3.3, 12.0)
        cfg = RectifierConfig(xdcr=x, v_max=v_max, v_pc_target=rng.uniform(0, v_max), r_tot=0.0)
        if piezo.transfer_duty(cfg) > 1e-3:
            continue
        seen += 1
        e_p, e_t = closed_form_errors(cfg)
        assert abs(e_p) <= 0.01 and abs(e_t) <= 0.005


def test_closed_form_error_tracks_transfer_duty():
    errs = []
    for v_pc in (1.0, 2.0, 2.8, 3.1, 3.25):
        cfg = lossless(v_pc_target=v_pc, r_tot=0.0)
        e_p, _ = closed_form_errors(cfg)
        errs.append(e_p)
        assert e_p < 0
        assert -e_p / piezo.transfer_duty(cfg) == pytest.approx(1.1, abs=0.2)
    assert errs == sorted(errs, reverse=True)
    assert errs[-1] < -0.1


def test_accumulation_time_from_simulation():
    tr = piezo.simulate(lossless(), 100)
    ref = piezo.accumulation_time(3.3, 0.0, X.v_oc, X.period)
    assert tr.mean_accumulation_time() == pytest.approx(ref, rel=0.005)


def test_heavy_damping_never_harvests():
    tr = piezo.simulate(RectifierConfig(r_tot=50.0), 20)
    with pytest.raises(piezo.SimulationError, match="fewer than two harvest"):
        tr.steady_ledger()


# --- steady state with a load ------------------------------------------

def test_lossless_steady_state_output():
    cfg = lossless()
    v, p = piezo.steady_state_vout(cfg, 60, tol=1e-5)
    p_ref = piezo.analytic_pout(Arch.PROPOSED, X, v_max=3.3)
    assert v == pytest.approx(math.sqrt(p_ref * cfg.r_l), rel=0.01)
    assert v == pytest.approx(1.35, abs=0.02)
    assert v * v / cfg.r_l == pytest.approx(p, rel=1e-3)


def test_unloaded_output_diverges():
    with pytest.raises(piezo.SimulationError, match="diverges"):
        piezo.steady_state_vout(replace(lossless(), r_l=math.inf))


# --- architecture comparison -------------------------------------------

def test_compare_architectures_grid():
    rows = piezo.compare_architectures(X, 12.0, 1.0, np.linspace(0, 12, 25))
    first = rows[0]
    assert first["BF"] == pytest.approx(4.0)
    assert first["SECE"] == pytest.approx(4.0)
    assert first["PROPOSED"] == pytest.approx(24.0)
    # the inverter run needs v_inv + 4 v_oc of headroom
    assert math.isnan(next(r for r in rows if r["v_x"] == 9.0)["INV"])
    for r in rows:
        others = [v for k, v in r.items() if k not in ("v_x", "PROPOSED") and not math.isnan(v)]
        if not math.isnan(r["PROPOSED"]):
            assert r["PROPOSED"] >= max(others)
