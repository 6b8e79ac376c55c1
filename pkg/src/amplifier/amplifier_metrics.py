# src/amplifier/amplifier_metrics.py
# Measurable amplifier figures: saturation and shark fins, P1dB, IIP3,
# drive-induced Stark shift and pump power efficiency

import dataclasses
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from dynamics.pump_dynamics import small_signal_gain
from errors import MissingPumpCoupling, NoSolution, Unbounded
from models import CircuitSpec, EffectiveModel, ImdResult, ModeParams, SaturationCurve
from oracle.langevin_oracle import drive_stark_shift
from utils.units import HBAR, TWO_PI

logger = logging.getLogger("AmplifierMetrics")

ONE_DB = 10.0 ** 0.1
IMD_DELTA1 = TWO_PI * 500e3
IMD_DELTA2 = TWO_PI * 100e3
ZERO_KERR_RATIO = 1e-12
GAIN_SCAN_POINTS = 6000
STARK_LINEWIDTH_GUARD = 3.0


def drive_photon_number(p_in: float, omega_d: float, mode: ModeParams,
                        kappa: Optional[float] = None) -> float:
    """Steady intracavity photon number for a drive through the coupled port"""
    kappa = mode.kappa if kappa is None else kappa
    return p_in * kappa / (HBAR * omega_d * ((omega_d - mode.omega_a) ** 2 + (kappa / 2) ** 2))


def stark_shift_curve(flux: float, omega_d: float, nbar_grid: Sequence[float], mode: ModeParams,
                      oracle_circuit: Optional[CircuitSpec] = None,
                      truncation: int = 6) -> List[Tuple[float, ...]]:
    """Drive-induced shift 24 g4* nbar, optionally with a time-domain column.

    The time-domain column drives the lab-frame oscillator at omega_d and reads
    the resonance shift of a weak probe.

    Rows are (nbar, shift) or (nbar, shift, oracle_shift) in rad/s.
    """
    if abs(omega_d - mode.omega_a) < STARK_LINEWIDTH_GUARD * mode.kappa:
        logger.warning(f"drive at {omega_d / TWO_PI / 1e9:.4f} GHz lies within "
                       f"{STARK_LINEWIDTH_GUARD:g} kappa of the mode at flux {flux:.4f}")
    rows = []
    for nbar in nbar_grid:
        shift = 24.0 * mode.g4_star * nbar
        if oracle_circuit is None:
            rows.append((float(nbar), shift))
            continue
        rows.append((float(nbar), shift,
                     drive_stark_shift(mode, oracle_circuit, float(nbar), omega_d, truncation)))
    return rows


def _check_kerr(model: EffectiveModel):
    if abs(model.K) <= ZERO_KERR_RATIO * model.kappa:
        raise Unbounded(f"K={model.K:.3e} rad/s: compression power diverges")


def _power_scale(model: EffectiveModel) -> float:
    return HBAR * model.omega_a * model.kappa / (3.0 * model.K)


def effective_detuning_squared(G, G0: float, model: EffectiveModel, exact: bool = False):
    """Squared signal-shifted detuning at which the gain equals G.

    The default is the large-gain closed form written in Delta_b / kappa and G0;
    ``exact=True`` inverts the self-consistent gain relation without dropping
    the 1/sqrt(G) corrections.
    """
    G = np.asarray(G, dtype=float)
    if not exact:
        ratio = model.delta_b / model.kappa
        term = (np.sqrt(G0) - np.sqrt(G)) / np.sqrt(G0 * G) * math.sqrt(ratio ** 2 + 0.25)
        return model.kappa ** 2 * (ratio ** 2 + term)
    return model.delta_b ** 2 + 2.0 * model.kappa * model.g * (
        1.0 / np.sqrt(G - 1.0) - 1.0 / math.sqrt(G0 - 1.0))


def _branch_powers(G, G0: float, model: EffectiveModel, sign: float, exact: bool = False):
    d2 = effective_detuning_squared(G, G0, model, exact)
    with np.errstate(invalid="ignore"):
        delta_eff = sign * np.sqrt(d2)
        power = _power_scale(model) * (model.delta_b - delta_eff) / np.asarray(G, dtype=float)
    return np.where((d2 >= 0) & (power > 0), power, np.nan)


def _input_powers(G: float, model: EffectiveModel, exact: bool) -> List[float]:
    G0 = small_signal_gain(model)
    if not (G > 1 and G0 > 1):
        raise NoSolution(f"gain {G:.4g} with G0={G0:.4g}: compression undefined")
    _check_kerr(model)
    powers = []
    for sign in (1.0, -1.0):
        p = float(_branch_powers(G, G0, model, sign, exact))
        if math.isnan(p):
            continue
        if not math.isfinite(p):
            raise Unbounded(f"input power overflow at G={G:.4g}")
        if not any(abs(p - q) <= 1e-12 * q for q in powers):
            powers.append(p)
    if not powers:
        raise NoSolution(f"G={G:.4g} not reached at any input power (G0={G0:.4g})")
    return sorted(powers)


def input_power_for_gain(G: float, model: EffectiveModel) -> List[float]:
    """All positive input powers (W) at which the gain equals G, large-gain closed form"""
    return _input_powers(G, model, exact=False)


def input_power_for_gain_exact(G: float, model: EffectiveModel) -> List[float]:
    """Same as input_power_for_gain with the exact inversion of the gain relation"""
    return _input_powers(G, model, exact=True)


def input_power_for_gain_undressed(G: float, G0: float, model: EffectiveModel) -> List[float]:
    """Simplified closed form with the bare detuning and 36 g4* = 3K.

    Limited validity: reproduces the undressed theory lines only.
    """
    bare = dataclasses.replace(model, delta_b=model.delta)
    if not (G > 1 and G0 > 1):
        raise NoSolution(f"gain {G:.4g} with G0={G0:.4g}: compression undefined")
    _check_kerr(bare)
    powers = []
    for sign in (1.0, -1.0):
        p = float(_branch_powers(G, G0, bare, sign))
        if not math.isnan(p):
            powers.append(p)
    if not powers:
        raise NoSolution(f"G={G:.4g} not reached at any input power (undressed)")
    return sorted(set(powers))


def p1db(model: EffectiveModel, exact: bool = False) -> float:
    """Input power (W) where the gain has dropped 1 dB below G0"""
    G0 = small_signal_gain(model)
    target = G0 / ONE_DB
    if target <= 1:
        raise NoSolution(f"G0={G0:.4g} too small for a 1 dB compression point")
    return max(_input_powers(target, model, exact))


def _gain_grid(G0: float, ceiling: float) -> np.ndarray:
    ceiling = max(ceiling, 10.0 * G0)
    excess = np.geomspace(1e-6, ceiling - 1.0, GAIN_SCAN_POINTS)
    grid = np.union1d(1.0 + excess, [G0])
    return grid[grid <= ceiling]


def gain_residual(G, p_in: float, model: EffectiveModel):
    """sqrt(G-1) (Delta_eff^2 + kappa^2/4 - 4g^2) - 2 kappa g at input power p_in.

    Zero exactly where G solves the self-consistent gain relation with the
    signal-shifted detuning below threshold; negative at G = 1.
    """
    G = np.asarray(G, dtype=float)
    delta_eff = model.delta_b - G * p_in / _power_scale(model)
    below = delta_eff ** 2 + model.kappa ** 2 / 4 - 4.0 * model.g ** 2
    return np.sqrt(G - 1.0) * below - 2.0 * model.kappa * model.g


def gain_branches(p_in: float, model: EffectiveModel, ceiling: float = 1e5,
                  _cache: Optional[dict] = None) -> List[float]:
    """All self-consistent gains at input power p_in below the gain ceiling.

    Roots of gain_residual are bracketed on a log-spaced gain grid and
    refined with brentq.
    """
    G0 = small_signal_gain(model)
    if abs(model.K) <= ZERO_KERR_RATIO * model.kappa:
        return [G0]
    grid = _cache["grid"] if _cache is not None else _gain_grid(G0, ceiling)
    if p_in == 0:
        return [G0]
    values = gain_residual(grid, p_in, model)
    changes = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    found: List[float] = []
    for i in changes:
        lo, hi = float(grid[i]), float(grid[i + 1])
        if values[i] == 0:
            G = lo
        else:
            root = brentq(lambda x: float(gain_residual(1.0 + math.exp(x), p_in, model)),
                          math.log(lo - 1.0), math.log(hi - 1.0), xtol=1e-13, rtol=1e-13)
            G = 1.0 + math.exp(root)
        if not any(abs(G - h) <= 1e-9 * h for h in found):
            found.append(G)
    return sorted(found)


def _branch_tables(model: EffectiveModel, G0: float, ceiling: float) -> dict:
    grid = _gain_grid(G0, ceiling)
    branches = []
    for sign in (1.0, -1.0):
        powers = _branch_powers(grid, G0, model, sign, exact=True)
        # the branch through G0 starts at zero input power
        if sign * model.delta_b >= 0:
            powers[np.searchsorted(grid, G0)] = 0.0
        branches.append((sign, powers))
    return {"grid": grid, "branches": branches}


def _fold_power(table: dict, model: EffectiveModel, G0: float) -> Optional[float]:
    """Maximum input power of the branch leaving G0 toward higher gain"""
    grid = table["grid"]
    start = int(np.searchsorted(grid, G0))
    for sign, powers in table["branches"]:
        if sign * model.delta_b < 0:
            continue
        tail = powers[start:]
        finite = np.isfinite(tail)
        if finite.sum() < 3:
            return None
        peak = int(np.argmax(np.where(finite, tail, -np.inf)))
        if 0 < peak < len(tail) - 1 and finite[peak + 1]:
            return float(tail[peak])
    return None


def saturation_curve(model: EffectiveModel, p_in_grid: Sequence[float],
                     gain_ceiling: float = 1e5, target_G0: Optional[float] = None) -> SaturationCurve:
    """Multivalued gain versus input power with shark-fin markers"""
    G0 = small_signal_gain(model)
    p_grid = [float(p) for p in p_in_grid]
    if abs(model.K) <= ZERO_KERR_RATIO * model.kappa:
        return SaturationCurve(flux=model.flux, delta=model.delta, target_G0=target_G0 or G0,
                               n_p=model.n_p, p_in=p_grid, branches=[[G0] for _ in p_grid])
    table = _branch_tables(model, G0, gain_ceiling)
    branches = [gain_branches(p, model, gain_ceiling, _cache=table) for p in p_grid]
    curve = SaturationCurve(
        flux=model.flux,
        delta=model.delta,
        target_G0=target_G0 or G0,
        n_p=model.n_p,
        p_in=p_grid,
        branches=branches,
        shark_fin=any(len(b) == 3 for b in branches),
        low_branch_end=_fold_power(table, model, G0),
    )
    try:
        curve.p1db = curve_p1db(curve, model, gain_ceiling, table)
    except NoSolution as e:
        logger.info(f"no numeric P1dB on the grid at flux {model.flux:.4f}: {e}")
    return curve


def curve_p1db(curve: SaturationCurve, model: EffectiveModel, gain_ceiling: float = 1e5,
               table: Optional[dict] = None) -> float:
    """Numeric P1dB from the saturation curve, refined between grid points"""
    G0 = small_signal_gain(model)
    target = G0 / ONE_DB
    if table is None:
        table = _branch_tables(model, G0, gain_ceiling)

    def top_gain(p):
        gains = gain_branches(p, model, gain_ceiling, _cache=table)
        return max(gains) if gains else math.nan

    tops = [max(b) if b else math.nan for b in curve.branches]
    for i in range(1, len(curve.p_in)):
        if tops[i - 1] >= target > tops[i]:
            lo, hi = math.log(curve.p_in[i - 1]), math.log(curve.p_in[i])
            root = brentq(lambda x: top_gain(math.exp(x)) - target, lo, hi, xtol=1e-12)
            return math.exp(root)
    raise NoSolution("gain does not cross G0 - 1 dB inside the input power grid")


def iip3(G: float, model: EffectiveModel) -> float:
    """Input-referred third-order intercept (W)"""
    _check_kerr(model)
    return (model.kappa / abs(model.K)) / (math.sqrt(G) + 1.0) ** 3 * HBAR * model.omega_a * model.kappa


def kerr_from_iip3(iip3_watts: float, G: float, omega_a: float, kappa: float) -> float:
    """|K| implied by a measured IIP3 at gain G"""
    return kappa ** 2 * HBAR * omega_a / (iip3_watts * (math.sqrt(G) + 1.0) ** 3)


def imd_result(G: float, model: EffectiveModel, delta1: float = IMD_DELTA1,
               delta2: float = IMD_DELTA2) -> ImdResult:
    return ImdResult(G=G, iip3=iip3(G, model), delta1=delta1, delta2=delta2)


def modeled_pump_power(omega_p: float, n_p: float, omega_a: float, kappa: float,
                       kappa_pump: float) -> float:
    return HBAR * omega_p * n_p * ((omega_p - omega_a) ** 2 + (kappa / 2) ** 2) / kappa_pump


def power_efficiency(G: float, p1db_watts: float, p_p: Optional[float] = None,
                     model: Optional[EffectiveModel] = None,
                     kappa_pump: Optional[float] = None) -> float:
    """Pump power efficiency G * P1dB / P_p"""
    if p_p is None:
        if kappa_pump is None or model is None:
            raise MissingPumpCoupling("pump power needs either P_p or kappa_pump with a model")
        omega_p = 2.0 * (model.omega_a + model.delta)
        p_p = modeled_pump_power(omega_p, model.n_p, model.omega_a, model.kappa, kappa_pump)
    if not (G > 0 and p1db_watts > 0 and p_p > 0):
        raise ValueError("gain, P1dB and pump power must be positive")
    return G * p1db_watts / p_p
