"""Energy gain of NEMS relays over FinFET headers for power gating.

A gated block spends one on-period doing work and one off-period idle.  The
FinFET header leaks while off and both headers burn gate-drive energy on
every PG cycle.  The energy gain is the ratio of total energy per PG period
with the FinFET header to the one with the NEMS header.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from scipy.optimize import brentq

from .devices import ROOM, Environment, ModelError


class SwitchKind(str, enum.Enum):
    FINFET = "FINFET"
    NEMS = "NEMS"


@dataclass(frozen=True)
class LogicBlockSpec:
    v_dd: float
    f_logic: float
    c_l: float
    i_static_on: float
    alpha: float
    stack_factor: float = 1.0  # extra on-state load from stacked gates

    def __post_init__(self):
        if not (self.v_dd > 0 and self.f_logic > 0 and self.c_l > 0):
            raise ModelError("v_dd, f_logic and c_l must be > 0")
        if self.i_static_on < 0:
            raise ModelError("i_static_on must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ModelError("alpha must be in [0, 1]")
        if self.stack_factor < 1.0:
            raise ModelError("stack_factor must be >= 1")


@dataclass(frozen=True)
class PgSwitchSpec:
    """A header switch.  For a single unit, c_gate == unit_c_gate etc."""
    kind: SwitchKind
    c_gate: float
    drive_voltage: float
    r_on: float
    i_leak_off: float
    unit_r_on: float
    unit_c_gate: float
    unit_area: float

    def __post_init__(self):
        object.__setattr__(self, "kind", SwitchKind(self.kind))
        if self.kind is SwitchKind.NEMS and self.i_leak_off != 0:
            raise ModelError("a NEMS switch has no off-state leakage")
        if not self.r_on > 0:
            raise ModelError("r_on must be > 0")
        if self.c_gate < 0 or self.i_leak_off < 0:
            raise ModelError("c_gate and i_leak_off must be >= 0")


@dataclass(frozen=True)
class DutySpec:
    t_on_over_t_off: float
    f_pg: float = 1e3

    def __post_init__(self):
        if not (self.t_on_over_t_off > 0 and self.f_pg > 0):
            raise ModelError("duty ratio and f_pg must be > 0")


def active_power(block: LogicBlockSpec) -> float:
    c = block.c_l * block.stack_factor
    return block.v_dd * (block.alpha * c * block.v_dd * block.f_logic + block.i_static_on)


def energy_gain(block: LogicBlockSpec, finfet: PgSwitchSpec, nems: PgSwitchSpec,
                duty: DutySpec) -> float:
    r = duty.t_on_over_t_off
    p_act = active_power(block)
    if math.isinf(r):
        return 1.0
    num = (finfet.c_gate * finfet.drive_voltage ** 2 * duty.f_pg * (1 + r)
           + p_act * r + block.v_dd * finfet.i_leak_off)
    den = nems.c_gate * nems.drive_voltage ** 2 * duty.f_pg * (1 + r) + p_act * r
    return num / den


def energy_saving_percent(e_g: float) -> float:
    if math.isinf(e_g):
        return 100.0
    return 100.0 * (1.0 - 1.0 / e_g)


def size_pg_switch(unit: PgSwitchSpec, target_r_on: float) -> tuple[int, PgSwitchSpec]:
    if not target_r_on > 0:
        raise ModelError("target_r_on must be > 0")
    # small guard so that an exact ratio is not bumped up by rounding noise
    count = max(1, math.ceil(unit.unit_r_on / target_r_on * (1 - 1e-12)))
    leak = count * unit.i_leak_off if unit.kind is SwitchKind.FINFET else 0.0
    agg = replace(unit, r_on=unit.unit_r_on / count, c_gate=count * unit.unit_c_gate,
                  i_leak_off=leak)
    return count, agg


def leakage_temperature_factor(n: float, v_th: float, env: Environment,
                               t_ref: float = 300.0) -> float:
    """Subthreshold leakage at env relative to t_ref (mobility held constant)."""
    vt_ref = Environment(t_ref).thermal_voltage
    return math.exp(v_th / (n * vt_ref) - v_th / (n * env.thermal_voltage))


# --------------------------------------------------------------------------
# technology presets

@dataclass(frozen=True)
class TechPreset:
    name: str
    block: LogicBlockSpec
    finfet: PgSwitchSpec
    nems: PgSwitchSpec
    leak_n: float = 1.5
    leak_v_th: float = 0.36
    t_ref: float = 300.0

    def at(self, env: Environment) -> "TechPreset":
        """Preset with both leakage currents moved to the env temperature."""
        k = leakage_temperature_factor(self.leak_n, self.leak_v_th, env, self.t_ref)
        return replace(self,
                       block=replace(self.block, i_static_on=self.block.i_static_on * k),
                       finfet=replace(self.finfet, i_leak_off=self.finfet.i_leak_off * k),
                       t_ref=env.temperature)

    def with_block(self, **changes) -> "TechPreset":
        return replace(self, block=replace(self.block, **changes))

    def scaled(self, factor: float) -> "TechPreset":
        """Same technology, block and switches `factor` times larger."""
        b, f, n = self.block, self.finfet, self.nems
        return replace(self,
                       block=replace(b, c_l=b.c_l * factor, i_static_on=b.i_static_on * factor),
                       finfet=replace(f, c_gate=f.c_gate * factor, r_on=f.r_on / factor,
                                      i_leak_off=f.i_leak_off * factor),
                       nems=replace(n, c_gate=n.c_gate * factor, r_on=n.r_on / factor))

    def energy_gain(self, r: float, f_pg: float = 1e3) -> float:
        return energy_gain(self.block, self.finfet, self.nems, DutySpec(r, f_pg))

    def saving(self, r: float, f_pg: float = 1e3) -> float:
        return energy_saving_percent(self.energy_gain(r, f_pg))


V_PG_DEFAULT = 2.5


def _preset(name, f_logic, i_static, i_leak_fin, c_gf, r_on_f, width_um, area_f,
            n_nems, c_gn, r_on_n, area_n, v_dd=0.7, i_avg=535e-3):
    c_l = (i_avg - i_static) / (v_dd * f_logic)
    block = LogicBlockSpec(v_dd=v_dd, f_logic=f_logic, c_l=c_l, i_static_on=i_static, alpha=0.1)
    # FinFET unit: 1 um of header width
    fin = PgSwitchSpec(SwitchKind.FINFET, c_gf, v_dd, r_on_f, i_leak_fin,
                       unit_r_on=r_on_f * width_um, unit_c_gate=c_gf / width_um,
                       unit_area=area_f / width_um)
    nems = PgSwitchSpec(SwitchKind.NEMS, c_gn, V_PG_DEFAULT, r_on_n, 0.0,
                        unit_r_on=r_on_n * n_nems, unit_c_gate=c_gn / n_nems,
                        unit_area=area_n / n_nems)
    return TechPreset(name, block, fin, nems)


PRESETS = {
    "20nm": _preset("20nm", 2.00e9, 340e-6, 99e-6, 13.9e-12, 22e-3, 10050, 351e-12,
                    4505, 225e-15, 22.2e-3, 1802e-12),
    "17nm": _preset("17nm", 2.75e9, 1170e-6, 315e-6, 12.3e-12, 20.6e-3, 11430, 355e-12,
                    4840, 242e-15, 20.7e-3, 1936e-12),
    "14nm": _preset("14nm", 3.50e9, 1710e-6, 502e-6, 10.2e-12, 23.3e-3, 10240, 278e-12,
                    4310, 215e-15, 23.2e-3, 1724e-12),
}


def unit_switch(preset: TechPreset, kind: SwitchKind) -> PgSwitchSpec:
    sw = preset.finfet if SwitchKind(kind) is SwitchKind.FINFET else preset.nems
    count = round(sw.unit_r_on / sw.r_on)
    return replace(sw, c_gate=sw.unit_c_gate, r_on=sw.unit_r_on,
                   i_leak_off=sw.i_leak_off / count)


def breakeven_duty(block: LogicBlockSpec, finfet: PgSwitchSpec, nems: PgSwitchSpec,
                   target_saving: float, f_pg: float = 1e3) -> float:
    """Largest on/off ratio that still saves target_saving percent."""
    if target_saving <= 0:
        return math.inf

    def excess(log_r):
        e_g = energy_gain(block, finfet, nems, DutySpec(math.exp(log_r), f_pg))
        return energy_saving_percent(e_g) - target_saving

    lo, hi = math.log(1e-12), math.log(1e9)
    if excess(lo) < 0:
        raise ModelError(f"target saving {target_saving}% not reachable even at r -> 0")
    # a tolerance of 1e-9 in log r is far below 1e-6 relative in r
    return math.exp(brentq(excess, lo, hi, xtol=1e-10, rtol=1e-12))


@dataclass(frozen=True)
class SocUnit:
    name: str
    alpha: float
    r: float
    f_logic: float


# activity, duty and clock of typical units of a mobile SoC (14 nm, 40 C)
MOBILE_SOC_UNITS = (
    SocUnit("application_processor", 0.1, 0.10, 3.5e9),
    SocUnit("cache_memory", 0.05, 0.10, 3.5e9),
    SocUnit("clock_distribution", 1.0, 0.10, 3.5e9),
    SocUnit("dsp_gpu", 0.1, 0.10, 1.0e9),
    SocUnit("baseband_processor", 0.5, 0.05, 1.0e9),
)


def soc_report(units: Iterable[SocUnit], preset: TechPreset, env: Environment = ROOM,
               f_pg: float = 1e3) -> list[tuple[str, float, float, float, float]]:
    """Rows of (name, alpha, r, f_logic, saving_pct) in input order."""
    hot = preset.at(env)
    rows = []
    for u in units:
        p = hot.with_block(alpha=u.alpha, f_logic=u.f_logic)
        rows.append((u.name, u.alpha, u.r, u.f_logic, p.saving(u.r, f_pg)))
    return rows


def duty_sweep(preset: TechPreset, ratios: Sequence[float], env: Environment = ROOM,
               f_pg: float = 1e3) -> list[tuple[float, float, float, float, float]]:
    """(r, alpha, T, e_g, saving_pct) rows."""
    hot = preset.at(env)
    out = []
    for r in ratios:
        e_g = hot.energy_gain(r, f_pg)
        out.append((r, hot.block.alpha, env.temperature, e_g, energy_saving_percent(e_g)))
    return out
