"""Behavioural models of ultra-low-power circuit blocks.

Modules: devices (transistor, NEMS and piezo primitives), swcap
(switched-capacitor power gating), pg_energy (NEMS power gating energy
gain), dt_amp (parametric amplifier), piezo (bias-flip rectifier), and the
scenario/runner/cli plumbing.
"""

__version__ = "0.1.0"
