import argparse
import logging
import os
import sys
from logging.handlers import RotatingFileHandler
from typing import List, Optional

from config import Config
from errors import ConfigError, InvalidSpec, SearchFailed, SpaError
from models import SweepResult
from sweep.emitter import SweepEmitter
from sweep.sweeps import SweepRunner
from utils.metrics import MetricsCollector

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3
EXIT_FAILED = 4

COMMANDS = ("coeffs", "flux-sweep", "stability-map", "saturation-map", "kerr-free", "oracle")


class SpaSimulation:
    """One CLI invocation: config, logging, metrics and output for a command"""

    def __init__(self, command: str, config: Config, warm_start: bool = True):
        self.command = command
        self.config = config
        self._setup_logging()
        self.logger = logging.getLogger(f"SpaSimulation-{command}")
        self.metrics = MetricsCollector(command)
        self.runner = SweepRunner(config, command, self.metrics, warm_start=warm_start)
        self.emitter = SweepEmitter(config.output_dir, config, self.metrics)

    def _setup_logging(self):
        """Configure logging to a rotating file under the output directory"""
        try:
            logs_dir = os.path.join(os.path.abspath(self.config.output_dir), 'logs')
            os.makedirs(logs_dir, exist_ok=True)

            root_logger = logging.getLogger()
            for h in list(root_logger.handlers):
                root_logger.removeHandler(h)

            handler = RotatingFileHandler(os.path.join(logs_dir, "spa.log"),
                                          maxBytes=1_000_000, backupCount=3)
            handler.setFormatter(logging.Formatter('%(asctime)s [%(levelname)s] %(name)s: %(message)s'))
            root_logger.addHandler(handler)
            root_logger.setLevel(logging.INFO)
        except Exception:
            logging.basicConfig(level=logging.INFO)

    def _per_flux(self, build) -> List[SweepResult]:
        fluxes = list(self.config.flux_grid)
        results = []
        for flux in fluxes:
            result = build(flux)
            self.emitter.emit(result, suffix=f"_flux{flux:.4f}" if len(fluxes) > 1 else "")
            results.append(result)
        return results

    def run(self) -> int:
        results: List[SweepResult] = []
        if self.command in ("coeffs", "flux-sweep"):
            result = self.runner.flux_sweep()
            if self.command == "coeffs":
                result.name = "coeffs"
                for row in result.rows:
                    print(", ".join(f"{k}={row[k]}" for k in result.columns if k in row))
            self.emitter.emit(result)
            results.append(result)
        elif self.command == "stability-map":
            results = self._per_flux(self.runner.stability_map)
        elif self.command == "saturation-map":
            results = self._per_flux(self.runner.saturation_map)
        elif self.command == "oracle":
            results = self._per_flux(self.runner.stark_oracle)
        elif self.command == "kerr-free":
            trace: list = []
            try:
                flux, delta, best, n_p = self.runner.kerr_free_point(trace)
            finally:
                self.emitter.emit(self.runner.kerr_free_trace(trace))
            self.emitter.record("kerr_free_point", {"flux": flux, "delta_MHz": delta,
                                                    "p1db_dBm": best, "n_p": n_p})
            print(f"Kerr-free point: flux={flux:.5f} delta={delta:.3f} MHz "
                  f"P1dB={best:.2f} dBm n_p={n_p:.1f}")
        else:
            raise ConfigError(f"unknown command {self.command!r}")

        self.emitter.write_manifest()
        self.logger.info(self.metrics.get_summary())
        return exit_code(results)


def exit_code(results: List[SweepResult]) -> int:
    """0 when every row is clean, 3 when some are flagged, 4 when all are"""
    rows = sum(len(r.rows) for r in results)
    flagged = sum(r.flagged_rows for r in results)
    if results and rows == 0:
        return EXIT_FAILED
    if rows and flagged == rows:
        return EXIT_FAILED
    if flagged:
        return EXIT_PARTIAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spa", description="SNAIL parametric amplifier simulator")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON config file (units in key names)")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--flux", type=float, help="single flux point in flux quanta")
    parser.add_argument("--delta-MHz", dest="delta_MHz", type=float, help="single pump detuning")
    parser.add_argument("--gain-dB", dest="gain_dB", type=float, help="target small-signal gain")
    parser.add_argument("--seed-free", dest="seed_free", action="store_true",
                        help="solve every flux point from a fresh minimum search")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = Config(args.config)
        config.apply_overrides(flux=args.flux, delta_MHz=args.delta_MHz,
                               gain_dB=args.gain_dB, out=args.out)
        config.validate()
        simulation = SpaSimulation(args.command, config, warm_start=not args.seed_free)
    except (ConfigError, InvalidSpec) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        code = simulation.run()
    except (ConfigError, InvalidSpec) as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except SearchFailed as e:
        print(f"Search failed: {e}", file=sys.stderr)
        return EXIT_FAILED
    except SpaError as e:
        simulation.logger.error(f"{args.command} failed: {e}")
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAILED
    print(f"{args.command}: output in {config.output_dir} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())
