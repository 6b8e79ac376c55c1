# src/utils/units.py
# Physical constants and unit conversions

import math

import numpy as np
from scipy import constants

# CODATA values, exact in the 2019 SI
HBAR = constants.hbar              # 1.054571817e-34 J s
E_CHARGE = constants.e             # 1.602176634e-19 C
PHI0_REDUCED = HBAR / (2 * E_CHARGE)
R_Q = HBAR / (2 * E_CHARGE) ** 2   # ~1027 ohm

TWO_PI = 2 * math.pi


def _scalar_or_array(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


def ghz_to_rad(f_ghz):
    return _scalar_or_array(TWO_PI * 1e9 * np.asarray(f_ghz, dtype=float))


def mhz_to_rad(f_mhz):
    return _scalar_or_array(TWO_PI * 1e6 * np.asarray(f_mhz, dtype=float))


def rad_to_mhz(omega):
    return _scalar_or_array(np.asarray(omega, dtype=float) / (TWO_PI * 1e6))


def rad_to_ghz(omega):
    return _scalar_or_array(np.asarray(omega, dtype=float) / (TWO_PI * 1e9))


def watts_to_dbm(p_watts):
    """Power in dBm referenced to 1 mW; non-positive powers map to -inf"""
    p = np.asarray(p_watts, dtype=float)
    safe = np.where(p > 0, p, 1e-3)
    return _scalar_or_array(np.where(p > 0, 10.0 * np.log10(safe / 1e-3), -np.inf))


def dbm_to_watts(p_dbm):
    return _scalar_or_array(1e-3 * np.power(10.0, np.asarray(p_dbm, dtype=float) / 10.0))


def db_to_linear(g_db: float) -> float:
    return 10.0 ** (g_db / 10.0)


def linear_to_db(g: float) -> float:
    return 10.0 * math.log10(g)
