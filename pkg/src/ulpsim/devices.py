"""Behavioral device models shared by the simulators.

PMOS subthreshold leakage and triode on-resistance with a GIDL term,
electrostatic NEMS switches (capacitive and ohmic) and the piezoelectric
source.  Everything here is an immutable value object or a pure function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from scipy import constants as _sc
from scipy.optimize import brentq, minimize_scalar

EPS0 = _sc.epsilon_0  # 8.8541878128e-12 F/m
K_B = _sc.k
Q_E = _sc.e


class ModelError(ValueError):
    """Raised when a model is evaluated outside its domain."""


class CalibrationError(ModelError):
    pass


@dataclass(frozen=True)
class Environment:
    temperature: float = 300.0  # K

    def __post_init__(self):
        if not self.temperature > 0:
            raise ModelError(f"temperature must be > 0 K, got {self.temperature}")

    @property
    def thermal_voltage(self) -> float:
        return K_B * self.temperature / Q_E


ROOM = Environment(300.0)


# --------------------------------------------------------------------------
# PMOS power-gating switch

@dataclass(frozen=True)
class MosDevice:
    """PMOS switch parameters.

    beta lumps mobility, oxide capacitance and W/L (A/V^2).  gidl_i0 and
    gidl_slope describe gate-induced drain leakage as a single exponential
    in the super cut-off bias.  gate_leak_density is in A per metre of width.
    """
    beta: float = 60e-6
    n: float = 1.5
    v_th: float = 0.5
    v_sg_max: float = 3.3
    gidl_i0: float = 0.0
    gidl_slope: float = 0.1
    gate_leak_density: float = 0.0
    width: float = 0.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ModelError("beta must be > 0")
        if not self.n > 1:
            raise ModelError("n must be > 1")
        if not self.v_th > 0:
            raise ModelError("v_th must be > 0")
        if not self.v_sg_max > self.v_th:
            raise ModelError("v_sg_max must exceed v_th")
        if self.gidl_i0 < 0 or not self.gidl_slope > 0:
            raise ModelError("need gidl_i0 >= 0 and gidl_slope > 0")
        if self.gate_leak_density < 0 or self.width < 0:
            raise ModelError("gate leakage density and width must be >= 0")

    @property
    def gate_leakage(self) -> float:
        return self.gate_leak_density * self.width


def mos_subthreshold_current(dev: MosDevice, v_sg: float, env: Environment = ROOM) -> float:
    vt = env.thermal_voltage
    return dev.beta * (dev.n - 1.0) * vt * vt * math.exp((v_sg - dev.v_th) / (dev.n * vt))


def mos_on_resistance(dev: MosDevice, v_sg: float) -> float:
    overdrive = v_sg - dev.v_th
    if overdrive <= 0:
        raise ModelError(f"device not in triode conduction (v_sg={v_sg} V <= v_th={dev.v_th} V)")
    return 1.0 / (dev.beta * overdrive)


def mos_total_off_leakage(dev: MosDevice, v_gsp: float, env: Environment = ROOM) -> float:
    """Off-state leakage at a super cut-off depth v_gsp (gate above source)."""
    sub = mos_subthreshold_current(dev, -v_gsp, env)
    if dev.gidl_i0 == 0.0:
        return sub
    log_gidl = math.log(dev.gidl_i0) + v_gsp / dev.gidl_slope
    # a steep calibrated slope can push the GIDL term past double range
    return sub + (math.exp(log_gidl) if log_gidl < 700.0 else math.inf)


def mos_optimal_super_cutoff_bias(dev: MosDevice, env: Environment = ROOM) -> float:
    """Bias in [0, v_sg_max] minimising total off leakage."""
    if dev.gidl_i0 <= 0:
        raise ModelError("no interior minimum: GIDL disabled")
    # log keeps the objective well scaled across many decades
    res = minimize_scalar(lambda v: math.log(mos_total_off_leakage(dev, v, env)),
                          bounds=(0.0, dev.v_sg_max), method="bounded",
                          options={"xatol": 1e-7})
    return float(res.x)


def _reduction_ratio(a: float, v: float, b: float) -> float:
    # ratio leak(0)/leak(v) when the GIDL prefactor puts the minimum at v
    g_rel = (b / a) * math.exp(-v / a - v / b)
    return (1.0 + g_rel) / (math.exp(-v / a) * (1.0 + b / a))


def calibrate_gidl(dev: MosDevice, target_v_opt: float, target_reduction_ratio: float,
                   env: Environment = ROOM) -> MosDevice:
    """Fit (gidl_i0, gidl_slope) so the leakage minimum sits at target_v_opt
    with leak(0)/leak(v_opt) equal to target_reduction_ratio.

    Stationarity at v_opt fixes gidl_i0 for a given slope, which leaves a
    one-dimensional root in the slope.
    """
    if not 0 < target_v_opt < dev.v_sg_max:
        raise CalibrationError("target_v_opt must lie in (0, v_sg_max)")
    if not target_reduction_ratio > 1:
        raise CalibrationError("target_reduction_ratio must be > 1")
    a = dev.n * env.thermal_voltage
    v = target_v_opt
    bound = math.exp(v / a)
    if target_reduction_ratio >= bound:
        raise CalibrationError(
            f"ratio {target_reduction_ratio:.6g} infeasible: subthreshold-only bound "
            f"exp(v_opt/(n*Vt)) = {bound:.6g}")

    def f(log_b):
        return math.log(_reduction_ratio(a, v, math.exp(log_b))) - math.log(target_reduction_ratio)

    lo, hi = math.log(1e-6 * a), math.log(1e6 * a)
    log_b = brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)
    b = math.exp(log_b)
    s0 = mos_subthreshold_current(dev, 0.0, env)
    i0 = s0 * (b / a) * math.exp(-v / a - v / b)
    return replace(dev, gidl_i0=i0, gidl_slope=b)


# --------------------------------------------------------------------------
# NEMS switches

@dataclass(frozen=True)
class NemsCapacitiveSwitch:
    """Parallel-plate capacitive switch with a dielectric-coated electrode.

    Geometry (g0, t_d, eps_d, area, k_eff) feeds the design equations and the
    static C-V curve.  c_on/c_off/v_pi/v_po are the extracted device values
    used by the circuit simulators.
    """
    g0: float
    t_d: float
    eps_d: float
    area: float
    k_eff: float
    gamma: float
    c_on: float
    c_off: float
    v_pi: float
    v_po: float
    t_mech: float

    def __post_init__(self):
        for name in ("g0", "t_d", "eps_d", "area", "k_eff"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be > 0")
        if not 0 < self.gamma <= 1:
            raise ModelError("gamma must be in (0, 1]")
        if not 0 < self.c_off < self.c_on:
            raise ModelError("need 0 < c_off < c_on")
        if not 0 < self.v_po < self.v_pi:
            raise ModelError("need 0 < v_po < v_pi")
        if self.t_mech < 0:
            raise ModelError("t_mech must be >= 0")

    @property
    def d_eff(self) -> float:
        """Dielectric thickness referred to an equivalent air gap."""
        return self.t_d / self.eps_d


@dataclass(frozen=True)
class NemsOhmicSwitch:
    v_pi: float = 1.5
    v_po: float = 1.5
    r_on: float = 10.0
    t_mech: float = 600e-9
    c_gs_on: float = 1e-15
    c_gd_on: float = 1e-15
    c_gb_on: float = 15e-15
    c_gs_off: float = 0.13e-15
    c_gd_off: float = 0.13e-15

    def __post_init__(self):
        if not 0 < self.v_po <= self.v_pi:
            raise ModelError("need 0 < v_po <= v_pi")
        if not self.r_on > 0:
            raise ModelError("r_on must be > 0")
        if self.t_mech < 0:
            raise ModelError("t_mech must be >= 0")
        for name in ("c_gs_on", "c_gd_on", "c_gb_on", "c_gs_off", "c_gd_off"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be >= 0")


def reference_cap_switch(eps_d: float = 7.5, t_d: float = 100e-9,
                         theoretical_gain: float = 10.36,
                         c_on: float = 6.63e-15, c_off: float = 1.30e-15,
                         v_pi: float = 3.2, v_po: float = 1.8,
                         t_mech: float = 250e-9) -> NemsCapacitiveSwitch:
    """Capacitive switch matching the extracted device values.

    The gap follows from the theoretical gain, the plate area from c_off and
    the spring constant from v_pi, so the static C-V model collapses exactly
    at v_pi.  gamma takes up the difference between the practical and the
    theoretical gain.
    """
    g0 = (theoretical_gain - 1.0) * t_d / eps_d
    d = t_d / eps_d
    area = c_off * (g0 + d) / EPS0
    k_eff = 27.0 * EPS0 * area * v_pi ** 2 / (8.0 * (g0 + d) ** 3)
    gamma = (c_on / c_off) / theoretical_gain
    return NemsCapacitiveSwitch(g0=g0, t_d=t_d, eps_d=eps_d, area=area, k_eff=k_eff,
                                gamma=gamma, c_on=c_on, c_off=c_off, v_pi=v_pi,
                                v_po=v_po, t_mech=t_mech)


def nems_cap_pull_voltages(sw: NemsCapacitiveSwitch) -> tuple[float, float]:
    """Pull-in and pull-out voltages from the parallel-plate design equations."""
    d = sw.d_eff
    v_pi = math.sqrt(8.0 * sw.k_eff * (sw.g0 + d) ** 3 / (27.0 * EPS0 * sw.area))
    v_po = math.sqrt(2.0 * sw.k_eff * sw.g0 * sw.t_d ** 2 / (sw.eps_d ** 2 * EPS0 * sw.area))
    return v_pi, v_po


def nems_cap_pull_voltages_factored(sw: NemsCapacitiveSwitch) -> tuple[float, float]:
    """Same voltages written as alpha * sqrt(k/A) * (gain-dependent term) * t_d/eps_d."""
    a_v = 1.0 + sw.g0 * sw.eps_d / sw.t_d
    a1 = math.sqrt(8.0 / (27.0 * EPS0))
    a2 = math.sqrt(2.0 / EPS0)
    scale = math.sqrt(sw.k_eff / sw.area) * (sw.t_d / sw.eps_d) ** 1.5
    return a1 * scale * a_v ** 1.5, a2 * scale * math.sqrt(a_v - 1.0)


def pull_voltage_ratio(gain: float) -> float:
    """v_po/v_pi for a switch whose theoretical gain is `gain`."""
    return math.sqrt(27.0 / 4.0) * math.sqrt((gain - 1.0) / gain ** 3)


def static_gap(sw: NemsCapacitiveSwitch, v: float) -> float | None:
    """Equilibrium air gap at bias v, or None past the static instability."""
    d = sw.d_eff
    if v == 0.0:
        return sw.g0
    force = EPS0 * sw.area * v * v / 2.0

    def balance(g):
        return sw.k_eff * (sw.g0 - g) - force / (g + d) ** 2

    g_lo = max(2.0 * (sw.g0 + d) / 3.0 - d, 0.0)
    if balance(g_lo) < 0:
        return None
    return brentq(balance, g_lo, sw.g0, xtol=1e-22, rtol=1e-15)


def nems_cap_capacitance(sw: NemsCapacitiveSwitch, v: float, closed: bool = False) -> tuple[float, bool]:
    """Hysteretic C(V).  Returns (capacitance, contact flag)."""
    av = abs(v)
    if closed and av >= sw.v_po:
        return sw.c_on, True
    if not closed and av >= sw.v_pi:
        return sw.c_on, True
    g = static_gap(sw, av)
    if g is None:
        return sw.c_on, True
    return EPS0 * sw.area / (g + sw.d_eff), False


def nems_scale(sw, eta: float):
    """Uniform geometric scaling: voltages, capacitances and delay scale by eta."""
    if not eta > 0:
        raise ModelError("eta must be > 0")
    if isinstance(sw, NemsCapacitiveSwitch):
        return replace(sw, g0=sw.g0 * eta, t_d=sw.t_d * eta, area=sw.area * eta ** 2,
                       k_eff=sw.k_eff * eta, c_on=sw.c_on * eta, c_off=sw.c_off * eta,
                       v_pi=sw.v_pi * eta, v_po=sw.v_po * eta, t_mech=sw.t_mech * eta)
    if isinstance(sw, NemsOhmicSwitch):
        caps = {f.name: getattr(sw, f.name) * eta for f in fields(sw) if f.name.startswith("c_")}
        return replace(sw, v_pi=sw.v_pi * eta, v_po=sw.v_po * eta,
                       t_mech=sw.t_mech * eta, **caps)
    raise TypeError(f"cannot scale {type(sw).__name__}")


# --------------------------------------------------------------------------
# Piezoelectric source

@dataclass(frozen=True)
class PiezoTransducer:
    """Norton model: sinusoidal current source in parallel with c_pz and r_pz."""
    c_pz: float = 19e-9
    f_pz: float = 146.0
    r_pz: float = 2e6
    v_oc: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ModelError(f"{f.name} must be > 0")

    @property
    def i_peak(self) -> float:
        return 2.0 * math.pi * self.f_pz * self.c_pz * self.v_oc

    @property
    def period(self) -> float:
        return 1.0 / self.f_pz


def piezo_current(x: PiezoTransducer, t: float) -> float:
    return x.i_peak * math.sin(2.0 * math.pi * x.f_pz * t)
