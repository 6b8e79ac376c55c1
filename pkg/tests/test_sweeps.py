# tests/test_sweeps.py
# End-to-end tests for sweeps, emitted files and the CLI

import dataclasses
import json
import os
import sys
import tempfile
import unittest
from unittest import mock

# Add src to path
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from config import Config
from dynamics.pump_dynamics import effective_params
from errors import SearchFailed
from main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, EXIT_PARTIAL, exit_code, main
from models import StabilityRegion, SweepResult
from sweep.emitter import SweepEmitter, format_value
from sweep.sweeps import (find_kerr_free_point, run_flux_sweep, run_saturation_map,
                          run_stability_map, run_stark_oracle)


class TestSweeps(unittest.TestCase):

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.config = Config()
        self.config.worker_count = 2

    def tearDown(self):
        self.tmpdir.cleanup()

    def test_flux_sweep(self):
        """Every flux row is complete, omega_a falls and g4* crosses zero near 0.4"""
        result = run_flux_sweep(self.config)
        self.assertEqual(len(result.rows), len(self.config.flux_grid))
        self.assertEqual(result.flagged_rows, 0)
        freqs = [row["omega_a_GHz"] for row in result.rows]
        self.assertTrue(all(b < a for a, b in zip(freqs, freqs[1:])))
        crossing = result.extra["g4_star_zero_flux"]
        self.assertGreaterEqual(crossing, 0.35)
        self.assertLessEqual(crossing, 0.45)

    def test_seed_free_sweep_agrees(self):
        """Fresh minimum searches reproduce the warm-started sweep"""
        self.config.flux_grid = [0.1, 0.2, 0.3]
        warm = run_flux_sweep(self.config)
        cold = run_flux_sweep(self.config, warm_start=False)
        for a, b in zip(warm.rows, cold.rows):
            self.assertAlmostEqual(a["omega_a_GHz"], b["omega_a_GHz"], places=9)

    def test_stability_map(self):
        """All three regions appear and the 20 dB locus ends inside the grid"""
        self.config.delta_grid_MHz = [float(d) for d in range(-500, 501, 50)]
        self.config.np_grid = [float(n) for n in range(0, 5001, 250)]
        result = run_stability_map(self.config, 0.30)
        self.assertEqual(set(result.extra["regions_present"]), {r.value for r in StabilityRegion})
        self.assertLess(result.extra["gain_locus_delta_max_MHz"], 500.0)
        self.assertIn("G0=20dB", result.polylines)
        self.assertTrue(result.polylines["II/III"])

    def _saturation_config(self, out):
        self.config.delta_grid_MHz = [-150.0, 0.0, 50.0]
        self.config.pin_grid_dBm = [float(p) for p in range(-140, -79)]
        self.config.output_dir = out
        return self.config

    def test_saturation_map(self):
        """Only the negative detuning shows a shark fin"""
        result = run_saturation_map(self._saturation_config(self.tmpdir.name), 0.30)
        self.assertEqual(result.flagged_rows, 0)
        by_delta = {}
        for row in result.rows:
            by_delta.setdefault(row["delta_MHz"], set()).add(row["shark_fin"])
        self.assertEqual(by_delta[-150.0], {True})
        self.assertEqual(by_delta[0.0], {False})
        self.assertEqual(by_delta[50.0], {False})
        self.assertTrue(any(row["branch_count"] == 3 for row in result.rows))

    def test_saturation_csv_is_reproducible(self):
        """Two runs write byte-identical CSV files"""
        contents = []
        for name in ("a", "b"):
            out = os.path.join(self.tmpdir.name, name)
            config = self._saturation_config(out)
            emitter = SweepEmitter(out, config)
            path = emitter.emit(run_saturation_map(config, 0.30))
            with open(path, "rb") as f:
                contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_kerr_free_point(self):
        """The P1dB optimum sits near the effective Kerr zero"""
        self.config.flux_grid = [round(0.30 + 0.01 * i, 4) for i in range(16)]
        self.config.delta_grid_MHz = [float(d) for d in range(-200, 201, 50)]
        trace = []
        flux, delta, best, n_p = find_kerr_free_point(self.config, trace)
        self.assertGreaterEqual(flux, 0.35)
        self.assertLessEqual(flux, 0.45)
        self.assertGreaterEqual(delta, -200.0)
        self.assertLessEqual(delta, 200.0)
        self.assertTrue(any(stage.startswith("refine") for stage, *_ in trace))

    def test_kerr_free_search_fails_without_kerr(self):
        """With K forced to zero no finite P1dB exists"""
        self.config.flux_grid = [0.30, 0.31]
        self.config.delta_grid_MHz = [0.0, 50.0]

        def no_kerr(*args, **kwargs):
            return dataclasses.replace(effective_params(*args, **kwargs), K=0.0)

        with mock.patch("sweep.sweeps.effective_params", side_effect=no_kerr):
            with self.assertRaises(SearchFailed):
                find_kerr_free_point(self.config)

    def test_stark_oracle_column(self):
        """Time-domain drive Stark shift agrees with 24 g4* nbar within 10%"""
        self.config.nbar_grid = [0.0, 100.0]
        result = run_stark_oracle(self.config, 0.30)
        row = [r for r in result.rows if r["nbar"] == 100.0][0]
        self.assertAlmostEqual(row["stark_oracle_MHz"] / row["stark_MHz"], 1.0, delta=0.1)

    def test_stark_oracle_disabled(self):
        """With the oracle switched off no time-domain run happens and the column is empty"""
        self.config.oracle_enabled = False
        self.config.nbar_grid = [0.0, 100.0]
        with mock.patch("amplifier.amplifier_metrics.drive_stark_shift") as driven:
            result = run_stark_oracle(self.config, 0.30)
        driven.assert_not_called()
        self.assertTrue(all(r["stark_oracle_MHz"] is None for r in result.rows))
        self.assertEqual([r["nbar"] for r in result.rows], [0.0, 100.0])

    def test_format_value(self):
        """CSV cells use fixed formatting"""
        self.assertEqual(format_value(None), "")
        self.assertEqual(format_value(True), "true")
        self.assertEqual(format_value(float("nan")), "nan")
        self.assertEqual(format_value(-float("inf")), "-inf")
        self.assertEqual(format_value(0.1), "0.1")

    def test_exit_codes(self):
        """Flagged rows map to partial or failed exit codes"""
        def result(errors):
            rows = [{"error": e} for e in errors]
            return SweepResult(name="t", columns=["error"], rows=rows, config_hash="x")

        self.assertEqual(exit_code([result(["", ""])]), EXIT_OK)
        self.assertEqual(exit_code([result(["", "NoConvergence: x"])]), EXIT_PARTIAL)
        self.assertEqual(exit_code([result(["NoConvergence: x"])]), EXIT_FAILED)
        self.assertEqual(exit_code([result([])]), EXIT_FAILED)

    def test_cli(self):
        """coeffs succeeds and writes a manifest; bad configuration exits with 2"""
        out = os.path.join(self.tmpdir.name, "cli")
        with mock.patch("builtins.print"):
            self.assertEqual(main(["coeffs", "--out", out, "--flux", "0.3"]), EXIT_OK)
            with open(os.path.join(out, "manifest.json")) as f:
                manifest = json.load(f)
            self.assertIn("coeffs.csv", manifest["files"])
            self.assertEqual(main(["coeffs", "--out", out, "--flux", "0.7"]), EXIT_CONFIG)
            missing = os.path.join(self.tmpdir.name, "missing.json")
            self.assertEqual(main(["flux-sweep", "--config", missing]), EXIT_CONFIG)


if __name__ == '__main__':
    unittest.main()
