"""Discrete-time parametric amplifier built from NEMS capacitive switches.

Two banks of capacitive switches sample the input plus and minus a bias
(the bias pulls the beams in, so the banks hold C_ON).  In the hold phase the
banks are shorted: the bias charge cancels, the beams release and the same
charge now sits on C_OFF, which raises the voltage by roughly C_ON/C_OFF.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

from .devices import (K_B, ROOM, Environment, ModelError, NemsCapacitiveSwitch,
                      NemsOhmicSwitch, nems_cap_capacitance, reference_cap_switch)


class SimulationError(RuntimeError):
    pass


class Phase(str, enum.Enum):
    SAMPLE = "SAMPLE"
    HOLD = "HOLD"


@dataclass(frozen=True)
class AmpConfig:
    cap_switch: NemsCapacitiveSwitch = field(default_factory=reference_cap_switch)
    n_parallel: int = 10
    ohmic: NemsOhmicSwitch = field(default_factory=NemsOhmicSwitch)
    v_bias: float = 4.0
    f_clk: float = 100e3
    c_large: float = 30e-12
    differential: bool = False
    nonlinear: bool = True  # False: C_OFF held constant (linear C model)
    v_gb: float = 2.0  # ohmic switch gate/body drive amplitude
    p_clk: float = 0.04e-6  # clock generation overhead, configured constant

    def __post_init__(self):
        if int(self.n_parallel) != self.n_parallel or self.n_parallel < 1:
            raise ModelError("n_parallel must be an integer >= 1")
        if self.f_clk < 0 or self.v_bias < 0 or self.c_large <= 0:
            raise ModelError("need f_clk >= 0, v_bias >= 0, c_large > 0")

    @property
    def parasitic(self) -> float:
        """Ohmic-switch parasitics loading one bank (on plus off device)."""
        return self.ohmic.c_gs_on + self.ohmic.c_gs_off

    def timing_ok(self) -> bool:
        if self.f_clk <= 0:
            return False
        return 1.0 / (2.0 * self.f_clk) > max(self.cap_switch.t_mech, self.ohmic.t_mech)


@dataclass(frozen=True)
class PhaseState:
    phase: Phase
    q_top_a: float
    q_top_b: float
    contact_a: bool
    contact_b: bool
    v_a: float
    v_b: float


# fault bits
FAULT_PULL_IN = 1
FAULT_PULL_OUT = 2
FAULT_TIMING = 4


def ideal_gain(sw: NemsCapacitiveSwitch) -> float:
    return sw.c_on / sw.c_off


def theoretical_gain(sw: NemsCapacitiveSwitch) -> float:
    return 1.0 + sw.g0 * sw.eps_d / sw.t_d


def practical_gain(sw: NemsCapacitiveSwitch) -> float:
    return theoretical_gain(sw) * sw.gamma


def loaded_gain(cfg: AmpConfig) -> float:
    n, cp = cfg.n_parallel, cfg.parasitic
    return (n * cfg.cap_switch.c_on + cp) / (n * cfg.cap_switch.c_off + cp)


@dataclass(frozen=True)
class VoltageRangeReport:
    bias_ok: bool
    bias_margin: float  # v_bias - (v_pi + v_in_max)
    output_ok: bool
    output_margin: float  # v_po - v_out_max
    v_out_max: float

    @property
    def ok(self) -> bool:
        return self.bias_ok and self.output_ok


def validate_voltage_range(cfg: AmpConfig, v_in_max: float) -> VoltageRangeReport:
    sw = cfg.cap_switch
    bias_margin = cfg.v_bias - (sw.v_pi + abs(v_in_max))
    v_out = loaded_gain(cfg) * abs(v_in_max)
    out_margin = sw.v_po - v_out
    return VoltageRangeReport(bias_margin >= 0, bias_margin, out_margin > 0, out_margin, v_out)


def max_input(cfg: AmpConfig) -> float:
    """Largest single-ended input that keeps the output below pull-out."""
    return cfg.cap_switch.v_po / loaded_gain(cfg)


def output_noise(cfg: AmpConfig, env: Environment = ROOM) -> tuple[float, float]:
    """Integrated output noise power (V^2) and its rms value."""
    c_total = cfg.n_parallel * cfg.cap_switch.c_on
    p = 2.0 * K_B * env.temperature / c_total * (1.0 + loaded_gain(cfg))
    if cfg.differential:
        p *= 2.0
    return p, math.sqrt(p)


def dynamic_power(cfg: AmpConfig) -> tuple[float, float]:
    """(amplifier bias-switching power, ohmic switch drive power) in W."""
    o = cfg.ohmic
    c_amp = 2 * cfg.n_parallel * cfg.cap_switch.c_on + 4 * o.c_gs_on + 4 * o.c_gs_off
    p_amp = 2.0 * c_amp * cfg.v_bias ** 2 * cfg.f_clk
    c_par_on = o.c_gs_on + o.c_gd_on + o.c_gb_on
    p_sw = 2.0 * (6 * c_par_on + 3 * o.c_gb_on) * cfg.v_gb ** 2 * cfg.f_clk
    return p_amp, p_sw


def total_power(cfg: AmpConfig) -> float:
    p_amp, p_sw = dynamic_power(cfg)
    return p_amp + p_sw + cfg.p_clk


# --------------------------------------------------------------------------
# sample / hold simulation

RELAX = 0.5
MAX_ITER = 100


def _bank_cap(cfg: AmpConfig, v: float, closed: bool) -> tuple[float, bool]:
    if cfg.nonlinear:
        c, closed = nems_cap_capacitance(cfg.cap_switch, v, closed)
    else:
        sw = cfg.cap_switch
        if closed:
            closed = abs(v) >= sw.v_po
        else:
            closed = abs(v) >= sw.v_pi
        c = sw.c_on if closed else sw.c_off
    return cfg.n_parallel * c + cfg.parasitic, closed


def _hold_voltage(cfg: AmpConfig, q: float, tol: float) -> tuple[float, bool]:
    """Voltage of the shorted, released banks carrying total charge q.

    Returns (v, released).  released is False when the solution would sit
    above pull-in of an open beam, i.e. the beams cannot stay open.
    """
    if q == 0.0:
        return 0.0, True
    c0, closed = _bank_cap(cfg, 0.0, False)
    v = q / (2 * c0)
    for _ in range(MAX_ITER):
        c, closed = _bank_cap(cfg, v, False)
        if closed:
            return v, False
        v_new = (1 - RELAX) * v + RELAX * q / (2 * c)
        dv = abs(v_new - v)
        v = v_new
        if dv < tol:
            c, closed = _bank_cap(cfg, v, False)
            if abs(2 * c * v - q) <= 1e-13 * abs(q):
                return v, not closed
    if not cfg.nonlinear:
        return v, True
    raise SimulationError(f"hold-phase fixed point did not converge (q={q:.6g} C)")


@dataclass
class AmpRun:
    outputs: list[float]
    faults: list[int]
    states: list[PhaseState]
    charge_drift: list[float]


def _one_cycle(cfg: AmpConfig, v_in: float, tol: float):
    sw = cfg.cap_switch
    fault = 0 if cfg.timing_ok() else FAULT_TIMING
    v_a, v_b = v_in + cfg.v_bias, v_in - cfg.v_bias
    c_a, k_a = _bank_cap(cfg, v_a, False)
    c_b, k_b = _bank_cap(cfg, v_b, False)
    if not (k_a and k_b):
        fault |= FAULT_PULL_IN
    q_a, q_b = c_a * v_a, c_b * v_b
    sample = PhaseState(Phase.SAMPLE, q_a, q_b, k_a, k_b, v_a, v_b)

    q = q_a + q_b
    # banks shorted while still in contact
    v_closed = q / (c_a + c_b)
    if (k_a or k_b) and abs(v_closed) >= sw.v_po:
        # cannot release at all
        fault |= FAULT_PULL_OUT
        v_out, ca, kb = v_closed, c_a, True
    else:
        v_out, released = _hold_voltage(cfg, q, tol)
        if not released or abs(v_out) >= sw.v_po:
            fault |= FAULT_PULL_OUT
            v_out = v_closed
            ca, kb = c_a, True
        else:
            ca, kb = _bank_cap(cfg, v_out, False)[0], False
    hold = PhaseState(Phase.HOLD, ca * v_out, ca * v_out, kb, kb, v_out, v_out)
    drift = abs(hold.q_top_a + hold.q_top_b - q) / abs(q) if q else 0.0
    return v_out, fault, (sample, hold), drift


def simulate(cfg: AmpConfig, input_samples: Sequence[float], env: Environment = ROOM,
             tol: float = 1e-6) -> AmpRun:
    """One sample/hold cycle per input sample.

    In differential mode each sample is the differential input; two
    single-ended instances see +v/2 and -v/2 and the output is their
    difference.  env is accepted for symmetry with the noise model; the
    charge dynamics are temperature independent.
    """
    run = AmpRun([], [], [], [])
    for v in input_samples:
        if cfg.differential:
            vp, fp, sp, dp = _one_cycle(cfg, v / 2.0, tol)
            vn, fn, sn, dn = _one_cycle(cfg, -v / 2.0, tol)
            run.outputs.append(vp - vn)
            run.faults.append(fp | fn)
            run.states.extend(sp + sn)
            run.charge_drift.append(max(dp, dn))
        else:
            vo, f, st, d = _one_cycle(cfg, v, tol)
            run.outputs.append(vo)
            run.faults.append(f)
            run.states.extend(st)
            run.charge_drift.append(d)
    return run


def dc_gain(cfg: AmpConfig, amplitude: float) -> float:
    out = simulate(cfg, [amplitude]).outputs[0]
    return out / amplitude


def gain_droop(cfg: AmpConfig, amplitude: float, small: float = 1e-3) -> float:
    """Fractional gain loss at `amplitude` relative to a small input."""
    return 1.0 - dc_gain(cfg, amplitude) / dc_gain(cfg, small)


def fault_names(bits: int) -> str:
    names = [n for b, n in ((FAULT_PULL_IN, "pull_in"), (FAULT_PULL_OUT, "pull_out"),
                            (FAULT_TIMING, "timing")) if bits & b]
    return "|".join(names) if names else "ok"
