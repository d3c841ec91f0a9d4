"""Switched-capacitor assisted power gating.

A PMOS header switch gets an extra gate bias stored on two flying
capacitors that are refreshed alternately.  Between refreshes the stored
voltage droops under the lumped discharge current, and in the CMOS variant
the diode-connected refresh switches also eat a fixed drop.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Sequence

from .devices import (ROOM, Environment, ModelError, MosDevice, calibrate_gidl,
                      mos_on_resistance, mos_optimal_super_cutoff_bias,
                      mos_total_off_leakage)


class Variant(str, enum.Enum):
    CMOS = "CMOS"
    MEMS = "MEMS"


class PgState(str, enum.Enum):
    ON = "ON"
    OFF = "OFF"
    SUPER_ON = "SUPER_ON"
    SUPER_OFF = "SUPER_OFF"


@dataclass(frozen=True)
class SwCapConfig:
    variant: Variant = Variant.CMOS
    c_x: float = 5e-12
    f_clk: float = 24.0
    v_dd: float = 1.8
    v_b_off: float = 0.8
    v_b_on: float = 1.5
    i_dis: float = 10e-12
    diode_beta: float = 60e-6
    diode_v_th: float = 0.5
    diode_n: float = 1.5

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.c_x > 0:
            raise ModelError("c_x must be > 0")
        if not self.f_clk > 0:
            raise ModelError("f_clk must be > 0")
        if self.v_b_off < 0 or self.v_b_on < 0:
            raise ModelError("bias voltages must be >= 0")
        if self.i_dis < 0:
            raise ModelError("i_dis must be >= 0")

    @property
    def period(self) -> float:
        return 1.0 / self.f_clk


def diode_alpha(cfg: SwCapConfig, env: Environment = ROOM) -> float:
    """Fraction of V_TH dropped by a diode-connected device carrying i_dis."""
    vt = env.thermal_voltage
    i0 = cfg.diode_beta * (cfg.diode_n - 1.0) * vt * vt
    if cfg.i_dis <= 0:
        raise ModelError("diode not in subthreshold; model invalid (i_dis must be > 0)")
    alpha = 1.0 - (cfg.diode_n * vt / cfg.diode_v_th) * math.log(i0 / cfg.i_dis)
    if not 0.0 < alpha < 1.0:
        raise ModelError(f"diode not in subthreshold; model invalid (alpha={alpha:.4g})")
    return alpha


def refresh_error(cfg: SwCapConfig) -> float:
    """Average droop of the held bias between refreshes."""
    return cfg.i_dis * cfg.period / (4.0 * cfg.c_x)


def diode_error(cfg: SwCapConfig, env: Environment = ROOM) -> float:
    if cfg.variant is Variant.MEMS:
        return 0.0
    return 2.0 * diode_alpha(cfg, env) * cfg.diode_v_th


def voltage_error(cfg: SwCapConfig, env: Environment = ROOM) -> float:
    """Average loss of applied gate bias: diode drop plus refresh droop."""
    return diode_error(cfg, env) + refresh_error(cfg)


def avg_gate_voltage_super_off(cfg: SwCapConfig, env: Environment = ROOM) -> float:
    return cfg.v_dd + cfg.v_b_off - voltage_error(cfg, env)


def avg_gate_voltage_super_on(cfg: SwCapConfig, env: Environment = ROOM) -> float:
    return -cfg.v_b_on + voltage_error(cfg, env)


def required_refresh_frequency(cfg: SwCapConfig, max_error_fraction: float = 0.05,
                               i_leak: float | None = None) -> float:
    """Lowest refresh clock keeping the droop term below a fraction of v_dd + v_b_off.

    i_leak defaults to the config's lumped discharge current; pass a
    device's gate leakage to size for gate leakage alone.
    """
    if not 0 < max_error_fraction <= 1:
        raise ModelError("max_error_fraction must be in (0, 1]")
    i = cfg.i_dis if i_leak is None else i_leak
    return i / (4.0 * max_error_fraction * (cfg.v_dd + cfg.v_b_off) * cfg.c_x)


def swcap_leakage(dev: MosDevice, v_g_avg_off: float, v_dd: float,
                  env: Environment = ROOM) -> float:
    """Off leakage of the header with its gate held at v_g_avg_off."""
    return mos_total_off_leakage(dev, v_g_avg_off - v_dd, env)


def swcap_r_on(dev: MosDevice, v_g_avg_on: float, v_dd: float) -> float:
    v_sg = v_dd - v_g_avg_on
    if v_sg > dev.v_sg_max + 1e-12:
        raise ModelError(f"voltage stress: v_sg={v_sg:.4g} V exceeds v_sg_max={dev.v_sg_max} V")
    return mos_on_resistance(dev, v_sg)


def conventional_leakage(dev: MosDevice, env: Environment = ROOM) -> float:
    return mos_total_off_leakage(dev, 0.0, env)


def optimal_v_b_off(cfg: SwCapConfig, dev: MosDevice, env: Environment = ROOM) -> float:
    return mos_optimal_super_cutoff_bias(dev, env) + voltage_error(cfg, env)


# --------------------------------------------------------------------------
# time-domain gate bias

@dataclass(frozen=True)
class GateBiasTrace:
    """Piecewise-affine gate voltage.

    samples holds (t, v_g) at the start of every affine piece, slopes the
    slope of that piece; the last piece ends at t_end.  Values jump at
    refresh events.
    """
    samples: tuple[tuple[float, float], ...]
    slopes: tuple[float, ...]
    states: tuple[PgState, ...]
    refresh_events: tuple[float, ...]
    t_end: float

    def _piece(self, i):
        t0, v0 = self.samples[i]
        t1 = self.samples[i + 1][0] if i + 1 < len(self.samples) else self.t_end
        return t0, t1, v0, self.slopes[i]

    def value(self, t: float) -> float:
        for i in range(len(self.samples) - 1, -1, -1):
            t0, _, v0, k = self._piece(i)
            if t >= t0:
                return v0 + k * (t - t0)
        raise ValueError("t before trace start")

    def average(self, t_a: float, t_b: float) -> float:
        """Exact time average over [t_a, t_b]."""
        if not t_b > t_a:
            raise ValueError("need t_b > t_a")
        total = 0.0
        for i in range(len(self.samples)):
            t0, t1, v0, k = self._piece(i)
            lo, hi = max(t0, t_a), min(t1, t_b)
            if hi <= lo:
                continue
            total += (v0 + k * ((lo + hi) / 2 - t0)) * (hi - lo)
        return total / (t_b - t_a)

    def rows(self):
        """(t, v_g, state) at both ends of every piece, for plotting."""
        for i in range(len(self.samples)):
            t0, t1, v0, k = self._piece(i)
            yield t0, v0, self.states[i].value
            yield t1, v0 + k * (t1 - t0), self.states[i].value


def simulate_gate_bias(cfg: SwCapConfig, pg_schedule: Sequence[tuple[float, PgState]],
                       duration: float, env: Environment = ROOM) -> GateBiasTrace:
    """Gate voltage under a PG state schedule.

    In the super states the active capacitor is swapped every half clock
    period, so the gate restarts from the freshly refreshed level and then
    droops at i_dis/c_x.  Conventional states tie the gate to v_dd (OFF) or
    ground (ON).
    """
    if not pg_schedule:
        raise ModelError("empty PG schedule")
    times = [t for t, _ in pg_schedule]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ModelError("schedule timestamps must be strictly increasing")
    t_stop = times[0] + duration
    half = cfg.period / 2.0
    slope = cfg.i_dis / cfg.c_x
    err = diode_error(cfg, env)

    samples, slopes, states, refresh = [], [], [], []
    bounds = times[1:] + [t_stop]
    for (t0, st), t1 in zip(pg_schedule, bounds):
        st = PgState(st)
        t1 = min(t1, t_stop)
        if t1 <= t0:
            break
        if st in (PgState.ON, PgState.OFF):
            samples.append((t0, 0.0 if st is PgState.ON else cfg.v_dd))
            slopes.append(0.0)
            states.append(st)
            continue
        if st is PgState.SUPER_OFF:
            v_ref, k = cfg.v_dd + cfg.v_b_off - err, -slope
        else:
            v_ref, k = -cfg.v_b_on + err, slope
        n_half = max(1, math.ceil((t1 - t0) / half - 1e-9))
        for j in range(n_half):
            ts = t0 + j * half
            if ts >= t1:
                break
            samples.append((ts, v_ref))
            slopes.append(k)
            states.append(st)
            refresh.append(ts)
    return GateBiasTrace(tuple(samples), tuple(slopes), tuple(states), tuple(refresh), t_stop)


# --------------------------------------------------------------------------
# technology presets (180 nm measured chip, 28 nm projection)

@dataclass(frozen=True)
class SwCapPreset:
    name: str
    cfg: SwCapConfig
    dev: MosDevice
    v_opt: float
    reduction_ratio: float

    def calibrated_device(self, env: Environment = ROOM) -> MosDevice:
        return calibrate_gidl(self.dev, self.v_opt, self.reduction_ratio, env)


SWCAP_PRESETS = {
    "180nm": SwCapPreset(
        "180nm",
        SwCapConfig(v_dd=1.8, v_b_off=0.8, v_b_on=1.5),
        MosDevice(beta=60e-6, n=1.5, v_th=0.5, v_sg_max=3.3,
                  gate_leak_density=10e-15 / 1e-6, width=15e-3),
        0.30, 186.0),
    "28nm": SwCapPreset(
        "28nm",
        SwCapConfig(v_dd=0.9, v_b_off=0.75, v_b_on=1.3),
        MosDevice(beta=60e-6, n=1.5, v_th=0.5, v_sg_max=1.8,
                  gate_leak_density=10e-15 / 1e-6, width=20e-3),
        0.30, 518.0),
}


def with_bias(cfg: SwCapConfig, v_b_off: float | None = None,
              v_b_on: float | None = None) -> SwCapConfig:
    return replace(cfg, v_b_off=cfg.v_b_off if v_b_off is None else v_b_off,
                   v_b_on=cfg.v_b_on if v_b_on is None else v_b_on)
