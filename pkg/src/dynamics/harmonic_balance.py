# src/dynamics/harmonic_balance.py
# Reduced harmonic-balance equations for the signal, idler and
# half-pump amplitudes, solved as a 6-dimensional real Newton system

import cmath
import dataclasses
import logging
import math
from typing import List, Tuple

import numpy as np
from scipy.optimize import brentq

from dynamics.pump_dynamics import gain, period_doubling_amplitudes
from errors import DegenerateKerr, NoConvergence
from models import EffectiveModel, HbState

logger = logging.getLogger("HarmonicBalance")

RESIDUAL_TOL = 1e-10
MAX_ITER = 200
MAX_HALVINGS = 40


def _pump_coupling(state: HbState, model: EffectiveModel) -> complex:
    alpha_p = state.alpha_p if state.alpha_p is not None else math.sqrt(model.n_p)
    return 4.0 * model.g3 * alpha_p


def _residuals(z: np.ndarray, state: HbState, model: EffectiveModel, coupling: complex) -> np.ndarray:
    a_s, a_i, a_h = z
    K = model.K
    half_kappa = 0.5j * model.kappa
    n_s, n_i, n_h = abs(a_s) ** 2, abs(a_i) ** 2, abs(a_h) ** 2
    mix = coupling + K * a_h ** 2
    f_s = ((state.omega + model.delta_b + half_kappa) * a_s - state.u_s
           - mix * a_i.conjugate() - K * (n_s + 2 * n_i + 2 * n_h) * a_s)
    f_i = ((-state.omega + model.delta_b + half_kappa) * a_i - state.u_i
           - mix * a_s.conjugate() - K * (n_i + 2 * n_s + 2 * n_h) * a_i)
    f_h = ((model.delta_b + half_kappa) * a_h - state.u_h
           - coupling * a_h.conjugate() - K * (n_h + 2 * n_s + 2 * n_i) * a_h)
    return np.array([f_s, f_i, f_h], dtype=complex)


def _wirtinger(z: np.ndarray, state: HbState, model: EffectiveModel,
               coupling: complex) -> Tuple[np.ndarray, np.ndarray]:
    """dF/dz and dF/dz* (3x3 complex each)"""
    a_s, a_i, a_h = z
    K = model.K
    half_kappa = 0.5j * model.kappa
    n_s, n_i, n_h = abs(a_s) ** 2, abs(a_i) ** 2, abs(a_h) ** 2
    mix = coupling + K * a_h ** 2
    A = np.zeros((3, 3), dtype=complex)
    B = np.zeros((3, 3), dtype=complex)

    A[0, 0] = state.omega + model.delta_b + half_kappa - 2 * K * (n_s + n_i + n_h)
    B[0, 0] = -K * a_s ** 2
    A[0, 1] = -2 * K * a_i.conjugate() * a_s
    B[0, 1] = -mix - 2 * K * a_i * a_s
    A[0, 2] = -2 * K * a_h * a_i.conjugate() - 2 * K * a_h.conjugate() * a_s
    B[0, 2] = -2 * K * a_h * a_s

    A[1, 1] = -state.omega + model.delta_b + half_kappa - 2 * K * (n_s + n_i + n_h)
    B[1, 1] = -K * a_i ** 2
    A[1, 0] = -2 * K * a_s.conjugate() * a_i
    B[1, 0] = -mix - 2 * K * a_s * a_i
    A[1, 2] = -2 * K * a_h * a_s.conjugate() - 2 * K * a_h.conjugate() * a_i
    B[1, 2] = -2 * K * a_h * a_i

    A[2, 2] = model.delta_b + half_kappa - 2 * K * (n_h + n_s + n_i)
    B[2, 2] = -coupling - K * a_h ** 2
    A[2, 0] = -2 * K * a_s.conjugate() * a_h
    B[2, 0] = -2 * K * a_s * a_h
    A[2, 1] = -2 * K * a_i.conjugate() * a_h
    B[2, 1] = -2 * K * a_i * a_h
    return A, B


def _real_jacobian(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    d_dx = A + B
    d_dy = 1j * (A - B)
    J = np.empty((6, 6))
    J[0::2, 0::2] = d_dx.real
    J[1::2, 0::2] = d_dx.imag
    J[0::2, 1::2] = d_dy.real
    J[1::2, 1::2] = d_dy.imag
    return J


def _to_real(values: np.ndarray) -> np.ndarray:
    out = np.empty(6)
    out[0::2] = values.real
    out[1::2] = values.imag
    return out


def solve_harmonic_balance(state0: HbState, model: EffectiveModel,
                           tol: float = RESIDUAL_TOL, max_iter: int = MAX_ITER) -> HbState:
    """Newton solve of the three complex balance equations from state0"""
    coupling = _pump_coupling(state0, model)
    z = np.array([state0.alpha_s, state0.alpha_i, state0.alpha_h], dtype=complex)
    target = tol * model.kappa
    f = _residuals(z, state0, model, coupling)
    norm = float(np.max(np.abs(f)))
    for _ in range(max_iter):
        if norm < target:
            break
        J = _real_jacobian(*_wirtinger(z, state0, model, coupling))
        try:
            step = np.linalg.solve(J, -_to_real(f))
        except np.linalg.LinAlgError:
            raise NoConvergence("singular harmonic-balance Jacobian", last_iterate=z)
        dz = step[0::2] + 1j * step[1::2]
        scale = 1.0
        for _ in range(MAX_HALVINGS):
            trial = z + scale * dz
            f_trial = _residuals(trial, state0, model, coupling)
            norm_trial = float(np.max(np.abs(f_trial)))
            if norm_trial < norm or norm_trial < target:
                break
            scale *= 0.5
        else:
            raise NoConvergence(f"line search stalled at residual {norm / model.kappa:.3e} kappa",
                                last_iterate=z)
        z, f, norm = trial, f_trial, norm_trial
    if norm >= target:
        raise NoConvergence(f"residual {norm / model.kappa:.3e} kappa after {max_iter} iterations",
                            last_iterate=z)
    return dataclasses.replace(
        state0,
        alpha_s=complex(z[0]),
        alpha_i=complex(z[1]),
        alpha_h=complex(z[2]),
        alpha_p=state0.alpha_p if state0.alpha_p is not None else complex(math.sqrt(model.n_p)),
        residual=norm / model.kappa,
        converged=True,
    )


def half_pump_phase(n_h: float, model: EffectiveModel, coupling: complex) -> float:
    """Phase of alpha_h on the self-oscillating branch with |alpha_h|^2 = n_h"""
    ratio = coupling / (model.delta_b - model.K * n_h + 0.5j * model.kappa)
    return 0.5 * cmath.phase(ratio)


def harmonic_balance_solutions(state0: HbState, model: EffectiveModel,
                               tol: float = RESIDUAL_TOL) -> List[HbState]:
    """Distinct solutions from the supplied, zero and high-amplitude starts"""
    coupling = _pump_coupling(state0, model)
    starts = [("given", state0),
              ("zero", dataclasses.replace(state0, alpha_s=0j, alpha_i=0j, alpha_h=0j))]
    try:
        amplitudes = period_doubling_amplitudes(model)
    except DegenerateKerr as e:
        logger.info(f"skipping high-amplitude starts: {e}")
        amplitudes = []
    for n_h, tag in amplitudes:
        theta = half_pump_phase(n_h, model, coupling)
        for sign in (1.0, -1.0):
            alpha_h = sign * math.sqrt(n_h) * cmath.exp(1j * theta)
            starts.append((f"{tag}{'+' if sign > 0 else '-'}",
                           dataclasses.replace(state0, alpha_h=alpha_h)))

    solutions: List[HbState] = []
    for name, start in starts:
        try:
            solution = solve_harmonic_balance(start, model, tol=tol)
        except NoConvergence as e:
            logger.info(f"start {name} did not converge: {e}")
            continue
        if not any(_same(solution, known) for known in solutions):
            solutions.append(solution)
    if not solutions:
        raise NoConvergence("no harmonic-balance start converged")
    return solutions


def _same(a: HbState, b: HbState, rtol: float = 1e-6) -> bool:
    pairs = ((a.alpha_s, b.alpha_s), (a.alpha_i, b.alpha_i), (a.alpha_h, b.alpha_h))
    return all(abs(x - y) <= rtol * (1.0 + abs(x)) for x, y in pairs)


def linear_response_gain(model: EffectiveModel, omega: float = 0.0, drive_fraction: float = 1e-3) -> HbState:
    """Small-signal harmonic-balance solution with a signal drive only.

    drive_fraction sets u_s as a fraction of kappa * sqrt(kappa / |K|) so
    Stark shifts stay far below the linewidth.
    """
    scale = math.sqrt(model.kappa / abs(model.K)) if model.K != 0 else 1.0
    u_s = drive_fraction * model.kappa * scale / max(math.sqrt(_gain_scale(model)), 1.0)
    start = HbState(omega=omega, u_s=complex(u_s))
    return solve_harmonic_balance(start, model)


def _gain_scale(model: EffectiveModel) -> float:
    den = model.delta_b ** 2 + model.kappa ** 2 / 4.0 - 4.0 * model.g ** 2
    if den <= 0:
        return 1.0
    return 1.0 + 4.0 * model.kappa ** 2 * model.g ** 2 / den ** 2


def solver_implied_kerr(model: EffectiveModel, drive_fraction: float = 0.05) -> Tuple[float, float]:
    """(closed-form K, K reproducing the solver gain through the gain formula).

    A moderate signal drive is solved at omega = 0 and the Kerr constant
    that makes the semiclassical gain formula match the solver's gain at
    the solver's photon numbers is returned next to 12 g4*.
    """
    state = linear_response_gain(model, 0.0, drive_fraction)
    g_solver = state.signal_gain(model.kappa)
    if model.K == 0:
        return 0.0, 0.0

    def mismatch(K):
        return gain(dataclasses.replace(model, K=K), state.n_s, state.n_i) - g_solver

    lo, hi = 0.5 * model.K, 1.5 * model.K
    if np.sign(mismatch(lo)) == np.sign(mismatch(hi)):
        return model.K, model.K
    return model.K, float(brentq(mismatch, min(lo, hi), max(lo, hi), xtol=1e-12 * abs(model.K)))
