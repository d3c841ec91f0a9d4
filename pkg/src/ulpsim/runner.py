"""Turn a validated scenario into CSV rows."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import dt_amp, piezo, pg_energy, swcap
from .devices import Environment, ModelError, calibrate_gidl
from .scenario import Scenario, with_parameter

WORKERS_ENV = "ULPSIM_WORKERS"


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".12g")
    return str(value)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def resolve_workers(flag: int | None) -> int:
    """Explicit flag wins, then the environment variable, then 1."""
    if flag is not None:
        n = flag
    else:
        raw = os.environ.get(WORKERS_ENV)
        try:
            n = int(raw) if raw else 1
        except ValueError:
            n = 1
    return max(1, n)


# --------------------------------------------------------------------------
# per-module runners

def run_swcap(p):
    env = Environment(p.temperature)
    cfg, dev = p.config, p.device
    if p.calibrate_gidl:
        dev = calibrate_gidl(dev, p.v_opt, p.reduction_ratio, env)
    if p.trace:
        trace = swcap.simulate_gate_bias(cfg, [(t, swcap.PgState(s)) for t, s in p.schedule],
                                         p.duration, env)
        return ["t_s", "v_g_V", "state"], list(trace.rows())
    rows = []
    for v_b in np.linspace(p.v_b_start, p.v_b_stop, p.v_b_steps):
        c = swcap.with_bias(cfg, v_b_off=float(v_b), v_b_on=float(v_b))
        v_off = swcap.avg_gate_voltage_super_off(c, env)
        leak = swcap.swcap_leakage(dev, v_off, c.v_dd, env)
        try:
            r_on = swcap.swcap_r_on(dev, swcap.avg_gate_voltage_super_on(c, env), c.v_dd)
        except ModelError:
            r_on = math.nan  # over-stressed or not conducting
        rows.append((float(v_b), leak, r_on, v_off))
    return ["v_b_V", "leakage_A", "r_on_ohm", "v_g_avg_V"], rows


def _pg_preset(p):
    try:
        base = pg_energy.PRESETS[p.preset]
    except KeyError:
        raise ModelError(f"unknown preset {p.preset!r}; choose from {', '.join(pg_energy.PRESETS)}")
    preset = replace(base, nems=replace(base.nems, drive_voltage=p.v_pg))
    return preset.with_block(alpha=p.alpha, stack_factor=p.stack_factor)


def run_nems_pg(p):
    env = Environment(p.temperature)
    if p.table == "table-3.5":
        rows = []
        for name, pre in pg_energy.PRESETS.items():
            pre = replace(pre, nems=replace(pre.nems, drive_voltage=p.v_pg))
            pre = pre.at(env).with_block(alpha=p.alpha)
            r10 = pg_energy.breakeven_duty(pre.block, pre.finfet, pre.nems, 10.0, p.f_pg)
            rows.append((name, pre.saving(0.05, p.f_pg), r10))
        return ["technology", "saving_at_r5pct_pct", "r_for_10pct_saving"], rows
    preset = _pg_preset(p)
    if p.table == "table-3.6":
        rows = pg_energy.soc_report(pg_energy.MOBILE_SOC_UNITS, preset, env, p.f_pg)
        return ["unit", "alpha", "r", "f_logic_Hz", "saving_pct"], rows
    if p.log_spacing:
        ratios = np.geomspace(p.r_start, p.r_stop, p.r_steps)
    else:
        ratios = np.linspace(p.r_start, p.r_stop, p.r_steps)
    rows = pg_energy.duty_sweep(preset, [float(r) for r in ratios], env, p.f_pg)
    return ["r", "alpha", "T_K", "e_g", "saving_pct"], rows


def run_dt_amp(p):
    cfg = p.config
    if p.waveform == "gain_sweep":
        single = replace(cfg, differential=False)
        diff = replace(cfg, differential=True)
        g1s, g1d = dt_amp.dc_gain(single, 1e-3), dt_amp.dc_gain(diff, 1e-3)
        rows = []
        for a in np.linspace(p.a_start, p.a_stop, p.a_steps):
            gs, gd = dt_amp.dc_gain(single, float(a)), dt_amp.dc_gain(diff, float(a))
            rows.append((float(a), gs, gd, 100 * (1 - gs / g1s), 100 * (1 - gd / g1d)))
        return ["amplitude_V", "gain_single", "gain_differential",
                "droop_single_pct", "droop_differential_pct"], rows
    k = np.arange(p.n_samples)
    t = k / cfg.f_clk
    if p.waveform == "dc":
        v_in = np.full(p.n_samples, p.amplitude)
    else:
        v_in = p.amplitude * np.sin(2 * np.pi * p.f_in * t)
    run = dt_amp.simulate(cfg, [float(v) for v in v_in], Environment(p.temperature))
    rows = [(int(i), float(ti), float(vi), vo, dt_amp.fault_names(f))
            for i, ti, vi, vo, f in zip(k, t, v_in, run.outputs, run.faults)]
    return ["sample_index", "t_s", "v_in_V", "v_out_V", "fault_flags"], rows


def run_piezo(p):
    cfg = p.rectifier
    if p.mode == "steady_state":
        v, pw = piezo.steady_state_vout(cfg, p.n_cycles)
        return ["v_out_V", "p_out_W", "fom"], [(v, pw, piezo.fom(pw, cfg.xdcr))]
    trace = piezo.simulate(cfg, p.n_cycles)
    if p.mode == "trace":
        rows = [(t, st.value, v, max(v, 0.0), max(-v, 0.0), i) for t, st, v, i in trace.events]
        return ["t_s", "state", "v_pz_V", "v_pzp_V", "v_pzn_V", "i_l_A"], rows
    led = trace.steady_ledger()
    row = (led.net_power, piezo.fom(led.net_power, cfg.xdcr), led.e_out, led.e_inv,
           led.e_loss_rtot, led.e_loss_rpz, led.e_loss_flip, led.e_ctrl, led.t_span,
           trace.mean_accumulation_time())
    return ["p_out_W", "fom", "e_out_J", "e_inv_J", "e_loss_rtot_J", "e_loss_rpz_J",
            "e_loss_flip_J", "e_ctrl_J", "t_span_s", "t_acc_s"], [row]


RUNNERS = {"swcap": run_swcap, "nems-pg": run_nems_pg, "dt-amp": run_dt_amp, "piezo": run_piezo}


def _run_point(args):
    scn, value = args
    if value is not None:
        scn = with_parameter(scn, scn.sweep.parameter, value)
    return RUNNERS[scn.module](scn.parameters)


def run_scenario(scn: Scenario, workers: int = 1):
    """(header, rows); sweep points keep input order whatever the pool does."""
    if scn.sweep is None:
        return _run_point((scn, None))
    values = scn.sweep.values()
    jobs = [(scn, v) for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, jobs))
    else:
        results = [_run_point(j) for j in jobs]
    header = ["sweep_value"] + list(results[0][0])
    rows = [(v,) + tuple(r) for v, (_, rs) in zip(values, results) for r in rs]
    return header, rows


def compare_rows(x, v_max, v_out, steps=25):
    grid = np.linspace(0.0, v_max, steps)
    rows = piezo.compare_architectures(x, v_max, v_out, [float(g) for g in grid])
    header = ["v_x_V"] + [f"fom_{a.value}" for a in piezo.Arch]
    return header, [tuple(r.values()) for r in rows]
