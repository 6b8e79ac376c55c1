# tests/test_mode_solver.py
# Unit tests for the dispersion solver and Hamiltonian coefficients

import dataclasses
import math
import unittest
from unittest.mock import patch
import sys
import os

import numpy as np

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from circuit.mode_solver import (_root_on_branch, _loading, dispersion_residual,
                                 fundamental_root, fit_omega0_alpha, higher_mode_roots, mode_lc,
                                 snail_phase_scale, solve_mode, sweep_modes)
from config import Config
from utils.units import HBAR, rad_to_ghz, rad_to_mhz


class TestModeSolver(unittest.TestCase):
    """Pinned values are what the dispersion and coupling formulas give with the
    default fitted parameters. They deviate from the measured device: the tuning
    runs 7.86 to 6.68 GHz instead of 7.2 to 6.2 GHz, and g3 at 0.30 is about
    2pi x 0.9 MHz rather than tens of MHz. DESIGN.md records the comparison.
    """

    def setUp(self):
        """Default fitted device"""
        self.circuit = Config().circuit_spec()
        self.flux_grid = np.linspace(0.0, 0.5, 51)

    def test_frequency_tuning(self):
        """Mode frequency decreases monotonically from about 7.9 GHz to 6.7 GHz"""
        modes = sweep_modes(self.flux_grid, self.circuit)
        freqs = [rad_to_ghz(m.omega_a) for m in modes]
        self.assertTrue(all(b < a for a, b in zip(freqs, freqs[1:])))
        self.assertAlmostEqual(freqs[0], 7.86, delta=0.05)
        self.assertAlmostEqual(freqs[-1], 6.68, delta=0.05)

    def test_dispersion_root(self):
        """The fundamental solves the dispersion relation below omega0"""
        mode = solve_mode(0.3, self.circuit)
        load = 2 * self.circuit.Z_c / (self.circuit.snail.M * mode.L_s)
        residual = dispersion_residual(mode.omega_a, self.circuit, mode.coeffs.c2)
        self.assertLess(abs(residual) / load, 1e-9)
        self.assertLess(mode.omega_a, self.circuit.omega0)

    def test_polish_never_leaves_fundamental_branch(self):
        """A Newton step that jumps off the branch is discarded for the bracketed root"""
        mode = solve_mode(0.3, self.circuit)
        c2 = mode.coeffs.c2
        omega0 = self.circuit.omega0
        delta = 1e-6 * omega0
        bracketed = _root_on_branch(delta, omega0 - delta, omega0, _loading(self.circuit, c2))
        with patch("circuit.mode_solver.dispersion_residual", return_value=-1e30):
            root = fundamental_root(self.circuit, c2)
        self.assertEqual(root, bracketed)
        self.assertLess(root, omega0)

    def test_higher_roots_on_their_branches(self):
        """Higher dispersion roots lie between 2n and 2n+1 times omega0"""
        roots = higher_mode_roots(0.3, self.circuit, count=3)
        omega0 = self.circuit.omega0
        for n, root in enumerate(roots, start=1):
            self.assertGreater(root, 2 * n * omega0)
            self.assertLess(root, (2 * n + 1) * omega0)

    def test_lumped_circuit(self):
        """L1 C1 reproduces the mode frequency and Z1 = sqrt(L1/C1)"""
        mode = solve_mode(0.25, self.circuit)
        C1, L1, Z1, phi_zpf = mode_lc(mode.omega_a, self.circuit)
        self.assertAlmostEqual(1.0 / math.sqrt(L1 * C1) / mode.omega_a, 1.0, places=12)
        self.assertAlmostEqual(Z1, math.sqrt(L1 / C1), places=9)
        self.assertAlmostEqual(phi_zpf, math.sqrt(HBAR * Z1 / 2), places=30)

    def test_g3_vanishes_at_zero_flux(self):
        """Symmetric potential has no three-wave mixing"""
        mode = solve_mode(0.0, self.circuit)
        self.assertAlmostEqual(mode.g3, 0.0, places=9)

    def test_g3_scale_at_operating_flux(self):
        """g3 at 0.30 flux quanta is about -2pi x 0.9 MHz"""
        mode = solve_mode(0.30, self.circuit)
        self.assertLess(mode.g3, 0.0)
        self.assertAlmostEqual(rad_to_mhz(mode.g3), -0.90, delta=0.15)

    def test_g3_matches_black_box_projection(self):
        """Projecting c3 with the SNAIL phase scale reproduces the closed-form g3"""
        mode = solve_mode(0.3, self.circuit)
        snail = self.circuit.snail
        projected = (snail.M * snail.E_J * mode.coeffs.c3 / (6 * HBAR)
                     * snail_phase_scale(mode, self.circuit) ** 3)
        self.assertAlmostEqual(projected / mode.g3, 1.0, places=9)

    def test_single_kerr_zero(self):
        """g4* changes sign exactly once in [0.30, 0.48], inside [0.35, 0.45]"""
        grid = np.linspace(0.30, 0.48, 91)
        values = np.array([m.g4_star for m in sweep_modes(grid, self.circuit)])
        changes = np.flatnonzero(np.sign(values[1:]) != np.sign(values[:-1]))
        self.assertEqual(len(changes), 1)
        i = int(changes[0])
        crossing = grid[i] + (grid[i + 1] - grid[i]) * values[i] / (values[i] - values[i + 1])
        self.assertGreaterEqual(crossing, 0.35)
        self.assertLessEqual(crossing, 0.45)

    def test_bare_g4_relation(self):
        """g4 = g4* + 5 g3^2 / omega_a"""
        mode = solve_mode(0.2, self.circuit)
        self.assertAlmostEqual(mode.g4, mode.g4_star + 5 * mode.g3 ** 2 / mode.omega_a,
                               delta=1e-9 * abs(mode.g4))

    def test_impedance_warning(self):
        """A high-impedance line warns that the expansion is marginal"""
        circuit = dataclasses.replace(self.circuit, Z_c=500.0)
        with self.assertLogs("ModeSolver", level="WARNING"):
            solve_mode(0.2, circuit)

    def test_kappa_table_interpolation(self):
        """kappa follows the configured table"""
        table = ((0.0, 1e9), (0.5, 2e9))
        circuit = dataclasses.replace(self.circuit, kappa=table)
        self.assertAlmostEqual(solve_mode(0.25, circuit).kappa, 1.5e9, delta=1.0)

    def test_fit_recovers_device(self):
        """least-squares fit recovers omega0 and alpha from synthetic tuning data"""
        snail = dataclasses.replace(self.circuit.snail, alpha=0.07)
        truth = dataclasses.replace(self.circuit, omega0=1.02 * self.circuit.omega0, snail=snail)
        fluxes = np.linspace(0.0, 0.45, 10)
        freqs = [m.omega_a for m in sweep_modes(fluxes, truth)]
        omega0, alpha, rms = fit_omega0_alpha(fluxes, freqs, self.circuit)
        self.assertAlmostEqual(omega0 / truth.omega0, 1.0, delta=1e-4)
        self.assertAlmostEqual(alpha, 0.07, delta=1e-4)
        self.assertLess(rms, 2 * math.pi * 1e5)


if __name__ == '__main__':
    unittest.main()
