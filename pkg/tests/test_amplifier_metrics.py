# tests/test_amplifier_metrics.py
# Unit tests for saturation, compression, intermodulation and efficiency figures

import dataclasses
import math
import unittest
import sys
import os

import numpy as np
from scipy.optimize import brentq

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from amplifier.amplifier_metrics import (ONE_DB, drive_photon_number, gain_branches, gain_residual, iip3,
                                         imd_result, input_power_for_gain, input_power_for_gain_exact,
                                         input_power_for_gain_undressed,
                                         kerr_from_iip3, modeled_pump_power, p1db, power_efficiency,
                                         saturation_curve, stark_shift_curve)
from circuit.mode_solver import solve_mode
from config import Config
from dynamics.pump_dynamics import effective_params, np_for_gain, small_signal_gain
from errors import GainUnreachable, InvalidSpec, MissingPumpCoupling, NoSolution, Unbounded
from models import ImdResult
from utils.units import HBAR, dbm_to_watts, linear_to_db, mhz_to_rad, watts_to_dbm


class TestAmplifierMetrics(unittest.TestCase):

    def setUp(self):
        """Operating points at 0.30 flux quanta and G0 = 20 dB"""
        self.circuit = Config().circuit_spec()
        self.flux = 0.30
        self.mode = solve_mode(self.flux, self.circuit)
        self.fin = self._model(-150.0)
        self.plain = self._model(30.0)

    def _model(self, delta_MHz, flux=None, mode=None, target=100.0):
        flux = self.flux if flux is None else flux
        mode = self.mode if mode is None else mode
        delta = mhz_to_rad(delta_MHz)
        return effective_params(flux, delta, np_for_gain(target, flux, delta, mode), mode)

    def test_iip3_identities(self):
        """IIP3 |K| = hbar omega_a kappa^2 / 8 at unit gain, and the (2/11)^3 ratio"""
        model = self.plain
        expected = HBAR * model.omega_a * model.kappa ** 2 / 8
        self.assertAlmostEqual(iip3(1.0, model) * abs(model.K) / expected, 1.0, delta=1e-12)
        self.assertAlmostEqual(iip3(100.0, model) / iip3(1.0, model), (2.0 / 11.0) ** 3, delta=1e-12)

    def test_kerr_from_iip3_inverts(self):
        """The inverse relation recovers |K|"""
        model = self.plain
        value = iip3(100.0, model)
        self.assertAlmostEqual(kerr_from_iip3(value, 100.0, model.omega_a, model.kappa) / abs(model.K),
                               1.0, places=12)

    def test_imd_result(self):
        """ImdResult carries the dBm value and validates positivity"""
        result = imd_result(100.0, self.plain)
        self.assertAlmostEqual(result.iip3_dbm, watts_to_dbm(result.iip3), places=12)
        self.assertIn("iip3_dbm", result.to_dict())
        with self.assertRaises(InvalidSpec):
            ImdResult(G=1.0, iip3=0.0, delta1=1.0, delta2=1.0)

    def test_input_power_solutions_are_self_consistent(self):
        """Every input power of the exact inversion reproduces G on the saturation curve"""
        for model in (self.fin, self.plain):
            G0 = small_signal_gain(model)
            for G in (0.5 * G0, 2.0 * G0):
                try:
                    powers = input_power_for_gain_exact(G, model)
                except NoSolution:
                    continue
                for p in powers:
                    gains = gain_branches(p, model)
                    self.assertTrue(any(abs(g - G) <= 1e-6 * G for g in gains))

    def test_no_solution_and_unbounded(self):
        """Compression needs G > 1 and a nonzero Kerr constant"""
        with self.assertRaises(NoSolution):
            input_power_for_gain(1.0, self.plain)
        with self.assertRaises(Unbounded):
            p1db(dataclasses.replace(self.plain, K=0.0))

    def test_shark_fin(self):
        """Negative detuning folds: three branches and a >10 dB jump for <1 dB more input"""
        p_grid = dbm_to_watts(np.arange(-150.0, -60.0, 0.5))
        curve = saturation_curve(self.fin, p_grid)
        self.assertTrue(curve.shark_fin)
        self.assertIn(3, curve.branch_count())
        self.assertIsNotNone(curve.low_branch_end)
        fold = curve.low_branch_end
        self.assertAlmostEqual(watts_to_dbm(fold), -118.2, delta=1.5)
        before = gain_branches(fold * 10 ** -0.01, self.fin)
        after = gain_branches(fold * 10 ** 0.05, self.fin)
        self.assertEqual(len(after), 1)
        self.assertGreater(linear_to_db(after[0]) - linear_to_db(min(before)), 10.0)

    def test_positive_detuning_is_single_valued(self):
        """At positive detuning the gain falls monotonically with one branch"""
        p_grid = dbm_to_watts(np.arange(-150.0, -80.0, 0.5))
        for delta_MHz in (30.0, 80.0):
            curve = saturation_curve(self._model(delta_MHz), p_grid)
            self.assertFalse(curve.shark_fin)
            self.assertTrue(all(n == 1 for n in curve.branch_count()))
            gains = [b[0] for b in curve.branches]
            self.assertTrue(all(b <= a * (1 + 1e-9) for a, b in zip(gains, gains[1:])))

    def test_p1db_closed_forms_against_curve(self):
        """Numeric curve crossing vs the exact inversion (0.01 dB) and the large-gain form (0.75 dB)

        The large-gain form drops 1/sqrt(G) corrections and runs up to about
        half a dB above the curve; the residual depends on delta_b / kappa only.
        """
        p_grid = dbm_to_watts(np.arange(-150.0, -50.0, 1.0))
        residuals = []
        for flux in (0.20, 0.24, 0.28, 0.30, 0.32):
            mode = solve_mode(flux, self.circuit)
            for delta_MHz in (0.0, 20.0, 40.0, 60.0, 80.0):
                try:
                    model = self._model(delta_MHz, flux, mode)
                except GainUnreachable:
                    continue
                curve = saturation_curve(model, p_grid)
                self.assertIsNotNone(curve.p1db)
                numeric = watts_to_dbm(curve.p1db)
                self.assertAlmostEqual(watts_to_dbm(p1db(model, exact=True)), numeric, delta=0.01)
                residuals.append(watts_to_dbm(p1db(model)) - numeric)
        self.assertGreaterEqual(len(residuals), 20)
        self.assertLess(max(abs(r) for r in residuals), 0.75)
        # the large-gain form overestimates compression power
        self.assertGreater(min(residuals), 0.0)

    def test_gain_residual_vanishes_on_branches(self):
        """Gains from the root scan zero the gain residual and bracket G0 at tiny input"""
        for G in gain_branches(1e-12, self.fin):
            value = gain_residual(G, 1e-12, self.fin)
            self.assertLess(abs(value) / (self.fin.kappa * self.fin.g), 1e-8)
        self.assertLess(gain_residual(1.0 + 1e-9, 1e-12, self.fin), 0.0)
        tiny = gain_branches(1e-24, self.plain)
        self.assertAlmostEqual(tiny[0] / small_signal_gain(self.plain), 1.0, delta=1e-6)

    def test_large_gain_form_branch_counts(self):
        """With K < 0: one power per G < G0 at positive detuning, two per G > G0 at negative"""
        G0 = small_signal_gain(self.plain)
        self.assertEqual(len(input_power_for_gain(0.5 * G0, self.plain)), 1)
        with self.assertRaises(NoSolution):
            input_power_for_gain(2.0 * G0, self.plain)
        G0 = small_signal_gain(self.fin)
        self.assertEqual(len(input_power_for_gain(2.0 * G0, self.fin)), 2)

    def test_p1db_rises_toward_negative_detuning(self):
        """P1dB at 0.30 grows monotonically as delta goes from +100 MHz down to the cutoff"""
        values = []
        for delta_MHz in np.arange(100.0, -301.0, -20.0):
            try:
                model = self._model(float(delta_MHz))
            except GainUnreachable:
                break
            values.append((float(delta_MHz), p1db(model)))
        deltas = [d for d, _ in values]
        self.assertGreaterEqual(len(values), 8)
        self.assertGreater(max(deltas), 0.0)
        self.assertLess(min(deltas), 0.0)
        powers = [p for _, p in values]
        self.assertTrue(all(b > a for a, b in zip(powers, powers[1:])))

    def test_iip3_scales_with_kappa_squared(self):
        """kappa x s gives IIP3 x s^2 at fixed G, K and omega_a"""
        for s in (0.5, 2.0, 3.0):
            scaled = dataclasses.replace(self.plain, kappa=s * self.plain.kappa)
            self.assertAlmostEqual(iip3(100.0, scaled) / iip3(100.0, self.plain), s ** 2, places=10)

    def test_efficiency_proportional_to_pump_coupling(self):
        """Doubling kappa_pump halves the modelled pump power and doubles eta_p"""
        kappa_pump = mhz_to_rad(1.0)
        eta = power_efficiency(100.0, 1e-13, model=self.plain, kappa_pump=kappa_pump)
        doubled = power_efficiency(100.0, 1e-13, model=self.plain, kappa_pump=2.0 * kappa_pump)
        self.assertAlmostEqual(doubled / eta, 2.0, places=12)

    def test_drive_photon_number_half_linewidth(self):
        """At omega_a +- kappa/2 the photon number is half the resonant value"""
        p = 1e-15
        omega_a, kappa = self.mode.omega_a, self.mode.kappa
        resonant = drive_photon_number(p, omega_a, self.mode)
        for omega_d in (omega_a - 0.5 * kappa, omega_a + 0.5 * kappa):
            nbar = drive_photon_number(p, omega_d, self.mode)
            # photon energy hbar omega_d differs from hbar omega_a by kappa / 2
            self.assertAlmostEqual(nbar * omega_d / (resonant * omega_a), 0.5, places=12)
            self.assertAlmostEqual(nbar / resonant, 0.5, delta=0.01)

    def test_undressed_form(self):
        """The simplified undressed closed form returns positive powers"""
        G0 = small_signal_gain(self.plain)
        self.assertGreater(p1db(self.plain), 0.0)
        powers = input_power_for_gain_undressed(G0 / ONE_DB, G0, self.plain)
        self.assertTrue(powers)
        self.assertTrue(all(p > 0 for p in powers))

    def test_zero_kerr_saturation(self):
        """Without Kerr the curve stays at G0"""
        model = dataclasses.replace(self.plain, K=0.0)
        curve = saturation_curve(model, [1e-18, 1e-12])
        G0 = small_signal_gain(model)
        self.assertEqual(curve.branches, [[G0], [G0]])
        self.assertFalse(curve.shark_fin)

    def test_drive_photon_number(self):
        """On resonance nbar = 4 P / (hbar omega kappa)"""
        p = 1e-15
        nbar = drive_photon_number(p, self.mode.omega_a, self.mode)
        self.assertAlmostEqual(nbar / (4 * p / (HBAR * self.mode.omega_a * self.mode.kappa)), 1.0,
                               places=12)

    def test_stark_shift_line(self):
        """Closed-form drive Stark shift is 24 g4* nbar; a near-resonant drive warns"""
        omega_d = self.mode.omega_a + mhz_to_rad(1000.0)
        rows = stark_shift_curve(self.flux, omega_d, [0.0, 100.0], self.mode)
        self.assertEqual(rows[0], (0.0, 0.0))
        self.assertAlmostEqual(rows[1][1], 24 * self.mode.g4_star * 100.0, places=6)
        with self.assertLogs("AmplifierMetrics", level="WARNING"):
            stark_shift_curve(self.flux, self.mode.omega_a, [1.0], self.mode)

    def test_stark_oracle_departs_from_flat_line_at_kerr_free_flux(self):
        """Where g4* = 0 the closed form is flat while the sextic time-domain column is not"""
        flux = brentq(lambda f: solve_mode(f, self.circuit).g4_star, 0.35, 0.45, xtol=1e-10)
        mode = solve_mode(flux, self.circuit, higher=True)
        omega_d = mode.omega_a + mhz_to_rad(1000.0)
        rows = stark_shift_curve(flux, omega_d, [0.0, 400.0, 800.0], mode, oracle_circuit=self.circuit)
        per_photon = 24 * abs(self.mode.g4_star)
        for nbar, shift, _ in rows:
            self.assertLess(abs(shift), 1e-6 * per_photon * max(nbar, 1.0))
        self.assertEqual(rows[0][2], 0.0)
        self.assertGreater(abs(rows[2][2]), 2 * math.pi * 100e3)
        self.assertGreater(abs(rows[2][2]), abs(rows[1][2]))

    def test_power_efficiency(self):
        """eta_p = G P1dB / P_p, with the pump power modelled from kappa_pump"""
        self.assertAlmostEqual(power_efficiency(100.0, 1e-13, p_p=1e-9), 1e-2, places=15)
        with self.assertRaises(MissingPumpCoupling):
            power_efficiency(100.0, 1e-13)
        model = self.plain
        kappa_pump = mhz_to_rad(1.0)
        omega_p = 2 * (model.omega_a + model.delta)
        p_p = modeled_pump_power(omega_p, model.n_p, model.omega_a, model.kappa, kappa_pump)
        eta = power_efficiency(100.0, 1e-13, model=model, kappa_pump=kappa_pump)
        self.assertAlmostEqual(eta, 100.0 * 1e-13 / p_p, delta=1e-12 * eta)
        with self.assertRaises(ValueError):
            power_efficiency(100.0, -1.0, p_p=1e-9)


if __name__ == '__main__':
    unittest.main()
