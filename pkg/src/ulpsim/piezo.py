"""Piezoelectric energy harvesting with an inductive pre-charge/accumulate rectifier.

The transducer charge is never drained mid-way: its voltage is flipped
through the inductor at every current zero crossing so it keeps growing,
and once it reaches the technology limit v_max the whole capacitor energy
is moved to the output.  The capacitor is then pre-charged from the output
so the next accumulation starts at v_pc instead of zero.

The simulator is event driven.  Every segment is solved in closed form:
integration of the source current (with the parallel leak), and series RLC
pieces for the flips and the energy transfers.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .devices import ModelError, PiezoTransducer


class SimulationError(RuntimeError):
    pass


class FsmState(str, enum.Enum):
    INT_P = "INT_P"
    INT_N = "INT_N"
    BF_P = "BF_P"
    BF_N = "BF_N"
    TRANS_P = "TRANS_P"
    TRANS_N = "TRANS_N"
    HAR_P = "HAR_P"
    HAR_N = "HAR_N"
    ENG_P = "ENG_P"
    ENG_N = "ENG_N"
    PC_P = "PC_P"
    PC_N = "PC_N"
    END = "END"


def _st(kind: str, sign: int) -> FsmState:
    return FsmState(f"{kind}_{'P' if sign > 0 else 'N'}")


@dataclass(frozen=True)
class RectifierConfig:
    xdcr: PiezoTransducer = field(default_factory=PiezoTransducer)
    l: float = 47e-6
    v_max: float = 3.3
    v_pc_target: float = 0.0
    t_eng: float | None = None  # overrides v_pc_target when set
    v_out: float = 1.0
    r_l: float = 100e3
    c_out: float = 10e-6
    r_tot: float = 0.0
    flip_loss_v: float = 0.0
    p_ctrl: float = 0.0
    detector_delay: float = 0.0

    def __post_init__(self):
        if not self.l > 0:
            raise ModelError("l must be > 0")
        f_lc = 1.0 / (2 * math.pi * math.sqrt(self.l * self.xdcr.c_pz))
        if f_lc < 100.0 * self.xdcr.f_pz:
            raise ModelError(f"LC resonance {f_lc:.4g} Hz is not >= 100 x f_pz")
        if not 0 <= self.v_pc_target < self.v_max:
            raise ModelError("need 0 <= v_pc_target < v_max")
        if self.t_eng is not None and self.t_eng < 0:
            raise ModelError("t_eng must be >= 0")
        if not self.v_out > 0:
            raise ModelError("v_out must be > 0")
        if not self.r_l > 0:
            raise ModelError("r_l must be > 0")
        if self.r_tot < 0 or self.flip_loss_v < 0 or self.p_ctrl < 0 or self.detector_delay < 0:
            raise ModelError("loss parameters must be >= 0")
        if self.r_tot >= 2.0 * math.sqrt(self.l / self.xdcr.c_pz):
            raise ModelError("r_tot makes the flip RLC overdamped")

    @property
    def eng_time(self) -> float:
        if self.t_eng is not None:
            return self.t_eng
        return self.v_pc_target * math.sqrt(self.l * self.xdcr.c_pz) / self.v_out


# Loss bundle fitted to the measured chip: 0.8 V lost per flip, 1 ohm of
# switch plus inductor resistance and 0.75 uW of control.  The transducer
# default already carries the 2 Mohm parallel leak.
CAL_R_TOT = 1.0


def calibrated_losses() -> dict:
    return dict(flip_loss_v=0.8, r_tot=CAL_R_TOT, p_ctrl=0.75e-6)


# --------------------------------------------------------------------------
# closed forms

class Arch(str, enum.Enum):
    FBR = "FBR"
    INV = "INV"
    PC = "PC"
    DPR = "DPR"
    BF = "BF"
    SECE = "SECE"
    PROPOSED = "PROPOSED"


def analytic_pout(arch: Arch, x: PiezoTransducer, v_inv: float = 0.0, v_pc: float = 0.0,
                  v_init: float = 0.0, v_out: float = 1.0, v_max: float = 3.3) -> float:
    """Ideal average output power of each rectifier architecture (W)."""
    c, v, f = x.c_pz, x.v_oc, x.f_pz
    arch = Arch(arch)
    if arch is Arch.FBR:
        return c * v * v * f
    if arch is Arch.INV:
        return 2 * c * v * (v_inv + 4 * v) * f
    if arch is Arch.PC:
        return 4 * c * v * (v_pc + v) * f
    if arch is Arch.DPR:
        return 4 * c * v * (v_init + v) * f
    if arch is Arch.BF:
        return 4 * c * v * v_out * f
    if arch is Arch.SECE:
        return 4 * c * v * v * f
    return 2 * c * v * (v_max + v_pc) * f


def fom(p_out: float, x: PiezoTransducer) -> float:
    return p_out / (x.c_pz * x.v_oc ** 2 * x.f_pz)


def precharge_voltage(v_out: float, t_eng: float, l: float, c_pz: float) -> float:
    return v_out * t_eng / math.sqrt(l * c_pz)


def accumulation_time(v_max: float, v_pc: float, v_oc: float, t_pz: float,
                      flip_loss_v: float = 0.0) -> float:
    """Time to climb from v_pc to v_max, one bias flip per half cycle.

    Each half cycle adds 2*v_oc; every flip that is not the last one loses
    flip_loss_v.  The final half cycle counts only the fraction needed.
    """
    if v_max <= v_pc:
        return 0.0
    if flip_loss_v == 0.0:
        return (v_max - v_pc) / (4.0 * v_oc) * t_pz
    v, halves = v_pc, 0
    step = 2.0 * v_oc
    while True:
        if v + step >= v_max:
            return (halves + (v_max - v) / step) * t_pz / 2.0
        v_next = max(v + step - flip_loss_v, 0.0)
        if v_next <= v:
            raise SimulationError(
                f"v_max unreachable: 2*v_oc={step:.4g} V does not beat flip loss {flip_loss_v:.4g} V")
        v, halves = v_next, halves + 1


# --------------------------------------------------------------------------
# event-driven simulation

@dataclass
class EnergyLedger:
    e_src: float = 0.0  # work done by the transducer current source
    e_out: float = 0.0
    e_inv: float = 0.0
    e_loss_rtot: float = 0.0
    e_loss_rpz: float = 0.0
    e_loss_flip: float = 0.0
    e_ctrl: float = 0.0
    t_span: float = 0.0
    e_stored_start: float = 0.0
    e_stored_end: float = 0.0

    @property
    def net_energy(self) -> float:
        return self.e_out - self.e_inv - self.e_ctrl

    @property
    def net_power(self) -> float:
        return self.net_energy / self.t_span if self.t_span > 0 else 0.0

    @property
    def audit_residual(self) -> float:
        """Source work plus investment minus everything it went into."""
        losses = self.e_loss_rtot + self.e_loss_rpz + self.e_loss_flip
        return (self.e_src + self.e_inv - self.e_out - losses
                - (self.e_stored_end - self.e_stored_start))


@dataclass(frozen=True)
class Segment:
    state: FsmState
    t0: float
    t1: float
    v0: float
    v1: float
    i0: float
    i1: float
    energy: dict


@dataclass
class SimTrace:
    cfg: RectifierConfig
    segments: list[Segment]

    @property
    def events(self) -> list[tuple[float, FsmState, float, float]]:
        ev = [(s.t0, s.state, s.v0, s.i0) for s in self.segments]
        if self.segments:
            last = self.segments[-1]
            ev.append((last.t1, FsmState.END, last.v1, last.i1))
        return ev

    def harvest_times(self) -> list[float]:
        return [s.t0 for s in self.segments if s.state.name.startswith("TRANS")]

    def ledger(self, t_a: float | None = None, t_b: float | None = None) -> EnergyLedger:
        """Energy ledger over the segments starting in [t_a, t_b)."""
        segs = [s for s in self.segments
                if (t_a is None or s.t0 >= t_a) and (t_b is None or s.t0 < t_b)]
        led = EnergyLedger()
        if not segs:
            return led
        c = self.cfg.xdcr.c_pz
        for s in segs:
            for k, v in s.energy.items():
                setattr(led, k, getattr(led, k) + v)
        t0 = segs[0].t0 if t_a is None else t_a
        t1 = segs[-1].t1 if t_b is None else t_b
        led.t_span = t1 - t0
        led.e_ctrl = self.cfg.p_ctrl * led.t_span
        led.e_stored_start = 0.5 * c * segs[0].v0 ** 2 + 0.5 * self.cfg.l * segs[0].i0 ** 2
        led.e_stored_end = 0.5 * c * segs[-1].v1 ** 2 + 0.5 * self.cfg.l * segs[-1].i1 ** 2
        return led

    def steady_ledger(self) -> EnergyLedger:
        """Ledger over whole harvest cycles (first to last energy transfer)."""
        h = self.harvest_times()
        if len(h) < 2:
            raise SimulationError("fewer than two harvest events; run more cycles")
        return self.ledger(h[0], h[-1])

    def net_power(self) -> float:
        return self.steady_ledger().net_power

    def mean_accumulation_time(self) -> float:
        """Mean time spent integrating per harvest.

        Counting starts when the transducer is released at its starting
        voltage (end of the drain, or end of the pre-charge when there is
        one) and stops at the next v_max detection.  Flips are excluded.
        """
        h = self.harvest_times()
        if len(h) < 2:
            raise SimulationError("fewer than two harvest events; run more cycles")
        busy, counting = 0.0, False
        for s in self.segments:
            if not h[0] <= s.t0 < h[-1]:
                continue
            name = s.state.name
            if name.startswith("TRANS"):
                counting = self.cfg.eng_time <= 0.0
            elif name.startswith("PC"):
                counting = True
            elif counting and name.startswith(("INT", "HAR", "ENG")):
                busy += s.t1 - s.t0
        return busy / (len(h) - 1)

    def node_voltages(self):
        """(t, v_pz+, v_pz-) at every event; the grounded terminal reads 0."""
        for t, _, v, _ in self.events:
            yield t, max(v, 0.0), max(-v, 0.0)


class _Rlc:
    """Series RLC made of c_pz, l and r_tot."""

    def __init__(self, cfg: RectifierConfig):
        c, l, r = cfg.xdcr.c_pz, cfg.l, cfg.r_tot
        self.c, self.l, self.r = c, l, r
        self.w0 = 1.0 / math.sqrt(l * c)
        self.a = r / (2.0 * l)
        self.wd = math.sqrt(self.w0 ** 2 - self.a ** 2)

    def flip(self, v0):
        """Half resonance from (v0, 0) to the next current zero."""
        t = math.pi / self.wd
        return t, -v0 * math.exp(-self.a * t)

    def drain(self, v0):
        """Capacitor (v0, 0) discharged into the inductor until v = 0."""
        t = (math.pi - math.atan2(self.wd, self.a)) / self.wd
        i = v0 / (self.wd * self.l) * math.exp(-self.a * t) * math.sin(self.wd * t)
        return t, i

    def charge(self, i0, v0=0.0):
        """Inductor current i0 dumped into the capacitor (at v0) until i = 0."""
        b = (-self.a * i0 - v0 / self.l) / self.wd
        phi = math.atan2(i0, b)
        theta = math.pi - phi  # zero when there is no current to hand over
        t = theta / self.wd
        # at i = 0 the capacitor carries the whole loop voltage: v = -L di/dt
        s, co = math.sin(theta), math.cos(theta)
        didt = math.exp(-self.a * t) * ((-self.a * i0 + self.wd * b) * co
                                        + (-self.a * b - self.wd * i0) * s)
        return t, -self.l * didt


def _ramp_down_integral(l, r, i0, v):
    """Duration and charge of an inductor current i0 decaying into a rail v."""
    x = r * i0 / v
    t_lin = l * i0 / v
    if x < 1e-4:
        # series in x keeps tiny (even denormal) resistances finite
        t = t_lin * (1 - x / 2 + x * x / 3 - x ** 3 / 4)
        return t, i0 * t_lin * (0.5 - x / 3 + x * x / 4 - x ** 3 / 5)
    t = (l / r) * math.log1p(x)
    return t, l * i0 / r * (1.0 - math.log1p(x) / x)


def _ramp_up(l, r, v, t):
    """Final current and charge when an inductor is energised from v for t."""
    y = r * t / l
    if y < 1e-4:
        i1 = v * t / l * (1 - y / 2 + y * y / 6 - y ** 3 / 24)
        return i1, v * t * t / l * (0.5 - y / 6 + y * y / 24 - y ** 3 / 120)
    return -(v / r) * math.expm1(-y), (v / r) * t * (1.0 + math.expm1(-y) / y)


class _Source:
    """Transducer current integrating onto c_pz with the parallel leak."""

    def __init__(self, x: PiezoTransducer):
        self.x = x
        self.w = 2 * math.pi * x.f_pz
        self.ip = x.i_peak
        self.tau = x.r_pz * x.c_pz if math.isfinite(x.r_pz) else math.inf
        self.e_floor = 1e-10 * x.c_pz * x.v_oc ** 2

    def current(self, t):
        return self.ip * np.sin(self.w * t)

    def _vss(self, t):
        wt = self.w * self.tau
        k = self.ip * self.x.r_pz / (1.0 + wt * wt)
        return k * (np.sin(self.w * t) - wt * np.cos(self.w * t))

    def voltage(self, t0, v0, t):
        if math.isinf(self.tau):
            return v0 + self.x.v_oc * (math.cos(self.w * t0) - np.cos(self.w * t))
        return self._vss(t) + (v0 - self._vss(t0)) * np.exp(-(t - t0) / self.tau)

    def energies(self, t0, v0, t1):
        """(source work, leak loss) over [t0, t1]."""
        if t1 <= t0:
            return 0.0, 0.0
        if t1 - t0 < 1e-9 / self.x.f_pz:
            # too short for quad to resolve; the midpoint rule is exact to dt^3
            tm = 0.5 * (t0 + t1)
            vm = float(self.voltage(t0, v0, tm))
            leak = 0.0 if math.isinf(self.tau) else vm * vm / self.x.r_pz * (t1 - t0)
            return vm * float(self.current(tm)) * (t1 - t0), leak
        work = quad(lambda t: self.voltage(t0, v0, t) * self.current(t), t0, t1,
                    epsabs=self.e_floor, epsrel=1e-11, limit=200)[0]
        if math.isinf(self.tau):
            return work, 0.0
        leak = quad(lambda t: self.voltage(t0, v0, t) ** 2 / self.x.r_pz, t0, t1,
                    epsabs=self.e_floor, epsrel=1e-11, limit=200)[0]
        return work, leak


MAX_SEGMENTS_PER_HALF = 200


def simulate(cfg: RectifierConfig, n_cycles: int = 100) -> SimTrace:
    """Run the rectifier FSM for n_cycles vibration periods."""
    x = cfg.xdcr
    half = x.period / 2.0
    t_stop = n_cycles * x.period
    src, rlc = _Source(x), _Rlc(cfg)
    c, l, d = x.c_pz, cfg.l, cfg.detector_delay
    t_eng = cfg.eng_time
    segs: list[Segment] = []
    t, v = 0.0, 0.0

    def push(kind, sign, t1, v1, i0, i1, **energy):
        if cfg.r_tot == 0.0 and "e_loss_rtot" in energy:
            energy["e_loss_rtot"] = 0.0  # lossless: only rounding noise would remain
        segs.append(Segment(_st(kind, sign), t, t1, v, v1, i0, i1, energy))
        _check_polarity(segs[-1])

    def floating(kind, sign, t1, i0, i1, **energy):
        # the transducer is off the inductor and keeps integrating its current
        nonlocal t, v
        v1 = float(src.voltage(t, v, t1))
        work, leak = src.energies(t, v, t1)
        push(kind, sign, t1, v1, i0, i1, e_src=work, e_loss_rpz=leak, **energy)
        t, v = t1, v1

    def precharge(sign):
        nonlocal t, v
        if t_eng <= 0.0:
            return
        i1, q = _ramp_up(l, cfg.r_tot, cfg.v_out, t_eng)
        e_inv = cfg.v_out * q
        floating("ENG", sign, t + t_eng, 0.0, i1, e_inv=e_inv,
                 e_loss_rtot=e_inv - 0.5 * l * i1 * i1)
        dt, v_pc = rlc.charge(i1, sign * v)
        v_pc *= sign
        push("PC", sign, t + dt, v_pc, i1, 0.0,
             e_loss_rtot=0.5 * l * i1 * i1 + 0.5 * c * (v * v - v_pc * v_pc))
        t, v = t + dt, v_pc

    def flip(sign_before):
        nonlocal t, v
        dt, v1 = rlc.flip(v)
        mag = max(abs(v1) - cfg.flip_loss_v, 0.0)
        v2 = math.copysign(mag, v1)
        push("BF", sign_before, t + dt, v2, 0.0, 0.0,
             e_loss_rtot=0.5 * c * (v * v - v1 * v1),
             e_loss_flip=0.5 * c * (v1 * v1 - v2 * v2))
        t, v = t + dt, v2

    def harvest(sign):
        nonlocal t, v
        dt, i_pk = rlc.drain(abs(v))
        push("TRANS", sign, t + dt, 0.0, 0.0, i_pk,
             e_loss_rtot=0.5 * c * v * v - 0.5 * l * i_pk * i_pk)
        t, v = t + dt, 0.0
        dt, q = _ramp_down_integral(l, cfg.r_tot, i_pk, cfg.v_out)
        e_out = cfg.v_out * q
        floating("HAR", sign, t + dt, i_pk, 0.0, e_out=e_out,
                 e_loss_rtot=0.5 * l * i_pk * i_pk - e_out)
        precharge(sign)

    # the capacitor starts empty and gets its first pre-charge straight away
    precharge(+1)
    guard = 0
    last_half = -1
    while t < t_stop:
        k = int(t // half)
        sign = 1 if k % 2 == 0 else -1
        guard = guard + 1 if k == last_half else 0
        last_half = k
        if guard > MAX_SEGMENTS_PER_HALF:
            raise SimulationError(
                f"FSM deadlock at t={t:.9g} s: state INT_{'P' if sign > 0 else 'N'}, "
                f"v_pz={v:.6g} V, half-cycle {k}")
        if v * sign < 0.0:
            # a zero crossing went by while the inductor was busy
            flip(-sign)
            continue
        t_h = (k + 1) * half
        hit = _first_crossing(src, t, v, min(t_h, t_stop), sign, cfg.v_max)
        if hit is not None:
            t_end = hit + d
        elif t_h <= t_stop:
            t_end = t_h + d
        else:
            t_end = t_stop
        v1 = float(src.voltage(t, v, t_end))
        work, leak = src.energies(t, v, t_end)
        push("INT", sign, t_end, v1, 0.0, 0.0, e_src=work, e_loss_rpz=leak)
        t, v = t_end, v1
        if hit is not None:
            harvest(sign)
        elif t_h > t_stop:
            break
        elif v != 0.0:
            flip(sign)
    return SimTrace(cfg, segs)


def _first_crossing(src: _Source, t0, v0, t1, sign, v_max, n=64):
    """Earliest t in (t0, t1] where sign*v reaches v_max, else None."""
    if t1 <= t0:
        return None
    ts = np.linspace(t0, t1, n + 1)
    g = sign * src.voltage(t0, v0, ts) - v_max
    if g[0] >= 0.0:
        return t0
    idx = np.nonzero(g >= 0.0)[0]
    if idx.size == 0:
        # exact tie at the half-cycle end (e.g. v_max = 2 v_oc from zero)
        if g[-1] >= -1e-9 * v_max:
            return t1
        return None
    j = idx[0]
    f = lambda t: sign * float(src.voltage(t0, v0, t)) - v_max
    return brentq(f, ts[j - 1], ts[j], xtol=1e-15, rtol=1e-14)


def _check_polarity(seg: Segment):
    # during a flip the terminals swap at the zero crossing, and a floating
    # transducer may cross zero too; elsewhere the polarity suffix holds
    if seg.state.name.startswith(("BF", "HAR", "ENG")):
        return
    sign = 1 if seg.state.name.endswith("_P") else -1
    ends = (seg.v1,) if seg.state.name.startswith("PC") else (seg.v0, seg.v1)
    for v in ends:
        if sign * v < -1e-3:
            raise SimulationError(
                f"negative terminal voltage in {seg.state.value}: v_pz={v:.6g} V at t={seg.t0:.9g} s")


def transfer_duty(cfg: RectifierConfig) -> float:
    """Share of a harvest interval spent in drain, harvest, energise and pre-charge.

    The closed-form output power treats these transfers as instantaneous, so
    its optimism grows with this ratio (roughly 1.5x it in lossless runs).
    Flips are not counted.  Returns inf when v_max is reached without any
    accumulation.
    """
    x, rlc = cfg.xdcr, _Rlc(cfg)
    t_drain, i_pk = rlc.drain(cfg.v_max)
    t_har, _ = _ramp_down_integral(cfg.l, cfg.r_tot, i_pk, cfg.v_out)
    busy = t_drain + t_har
    v_pc = 0.0
    if cfg.eng_time > 0.0:
        i1, _ = _ramp_up(cfg.l, cfg.r_tot, cfg.v_out, cfg.eng_time)
        t_pc, v_pc = rlc.charge(i1)
        busy += cfg.eng_time + t_pc
    interval = accumulation_time(cfg.v_max, v_pc, x.v_oc, x.period, cfg.flip_loss_v)
    return busy / interval if interval > 0.0 else math.inf


# --------------------------------------------------------------------------
# steady state with a resistive load

def steady_state_vout(cfg: RectifierConfig, n_cycles: int = 100, tol: float = 1e-3,
                      relax: float = 0.5, max_iter: int = 60) -> tuple[float, float]:
    """Output voltage where harvested net power equals v^2/r_l.

    Returns (v_out, net power).  With v_pc_target set, the energise time is
    recomputed at every iterate so the pre-charge stays on target.
    """
    if math.isinf(cfg.r_l):
        raise SimulationError("no load: output voltage diverges")
    v = cfg.v_out
    p = 0.0
    for _ in range(max_iter):
        p = simulate(replace(cfg, v_out=v), n_cycles).net_power()
        if p <= 0:
            raise SimulationError(f"net power {p:.4g} W <= 0 at v_out={v:.4g} V")
        v_new = (1 - relax) * v + relax * math.sqrt(p * cfg.r_l)
        if v_new > 100.0 * cfg.v_max:
            raise SimulationError("output voltage diverges")
        if abs(v_new - v) < tol:
            return v_new, p
        v = v_new
    raise SimulationError("steady-state output did not converge")


# --------------------------------------------------------------------------
# architecture comparison

def compare_architectures(x: PiezoTransducer, v_max: float, v_out: float,
                          grid: Iterable[float]) -> list[dict]:
    """FoM of every architecture at each investment/pre-charge voltage.

    An architecture whose peak transducer voltage would exceed v_max at a
    grid point reports NaN there.
    """
    fbr = analytic_pout(Arch.FBR, x)
    v_oc = x.v_oc
    rows = []
    for g in grid:
        row = {"v_x": g}
        limits = {Arch.INV: g + 4 * v_oc, Arch.PC: g + 2 * v_oc, Arch.DPR: g + 2 * v_oc,
                  Arch.PROPOSED: g}
        for arch in Arch:
            p = analytic_pout(arch, x, v_inv=g, v_pc=g, v_init=g, v_out=v_out, v_max=v_max)
            ok = limits.get(arch, 0.0) <= v_max + 1e-12
            row[arch.value] = p / fbr if ok else math.nan
        rows.append(row)
    return rows
