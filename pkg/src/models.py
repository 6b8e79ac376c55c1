from dataclasses import dataclass, asdict, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple, Union
import math

import numpy as np

from errors import InvalidSpec
from utils.units import PHI0_REDUCED, watts_to_dbm

KappaTable = Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class SnailSpec:
    """Nonlinear element: M SNAILs in series, each with three large junctions"""
    L_J: float
    alpha: float
    M: int
    allow_alpha_override: bool = False

    def __post_init__(self):
        if not self.L_J > 0:
            raise InvalidSpec(f"L_J must be positive, got {self.L_J}")
        if int(self.M) != self.M or self.M < 1:
            raise InvalidSpec(f"M must be a positive integer, got {self.M}")
        if not 0 < self.alpha < 1.0 / 3.0 and not self.allow_alpha_override:
            raise InvalidSpec(
                f"alpha={self.alpha} outside the single-minimum window (0, 1/3)")

    @property
    def E_J(self) -> float:
        return PHI0_REDUCED ** 2 / self.L_J

    @classmethod
    def create(cls, L_J_pH: float, alpha: float, M: int, allow_alpha_override: bool = False):
        return cls(L_J=L_J_pH * 1e-12, alpha=alpha, M=int(M),
                   allow_alpha_override=allow_alpha_override)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CircuitSpec:
    """Transmission-line resonator loaded by the SNAIL array.

    kappa is either a constant (rad/s) or a table of (flux, rad/s) pairs
    interpolated piecewise-linearly and clamped at the ends.
    """
    Z_c: float
    omega0: float
    kappa: Union[float, KappaTable]
    snail: SnailSpec

    def __post_init__(self):
        if not self.Z_c > 0:
            raise InvalidSpec(f"Z_c must be positive, got {self.Z_c}")
        if not self.omega0 > 0:
            raise InvalidSpec(f"omega0 must be positive, got {self.omega0}")
        if isinstance(self.kappa, (int, float)):
            if not self.kappa > 0:
                raise InvalidSpec(f"kappa must be positive, got {self.kappa}")
        else:
            table = tuple((float(f), float(k)) for f, k in self.kappa)
            if not table:
                raise InvalidSpec("kappa table is empty")
            fluxes = [f for f, _ in table]
            if any(b <= a for a, b in zip(fluxes, fluxes[1:])):
                raise InvalidSpec("kappa table flux column must be strictly increasing")
            if any(k <= 0 for _, k in table):
                raise InvalidSpec("kappa table must be positive everywhere")
            object.__setattr__(self, "kappa", table)

    def kappa_at(self, flux: float) -> float:
        if isinstance(self.kappa, (int, float)):
            return float(self.kappa)
        fluxes, values = zip(*self.kappa)
        return float(np.interp(flux, fluxes, values))

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class TaylorCoeffs:
    phi_ext: float
    phi_min: float
    c2: float
    c3: float
    c4: float
    c5: Optional[float] = None
    c6: Optional[float] = None

    def coefficient(self, order: int) -> float:
        value = getattr(self, f"c{order}")
        if value is None:
            raise KeyError(f"c{order} was not requested")
        return value

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class ModeParams:
    """Fundamental-mode linear and nonlinear coefficients at one flux"""
    flux: float
    omega_a: float
    L_s: float
    C1: float
    L1: float
    Z1: float
    phi_zpf: float
    g3: float
    g4: float
    g4_star: float
    kappa: float
    coeffs: TaylorCoeffs

    def to_dict(self):
        data = asdict(self)
        data.pop("coeffs")
        data.update({k: v for k, v in self.coeffs.to_dict().items()})
        return data


@dataclass(frozen=True)
class EffectiveModel:
    """Pumped-frame parameters at one operating point.

    omega_a and g3 are carried along so downstream consumers (harmonic
    balance, power conversions) need no second lookup.
    """
    flux: float
    delta: float
    n_p: float
    delta_b: float
    g: float
    K: float
    kappa: float
    omega_a: float = 0.0
    g3: float = 0.0

    def __post_init__(self):
        if self.n_p < 0:
            raise InvalidSpec(f"n_p must be non-negative, got {self.n_p}")
        if self.g < 0:
            raise InvalidSpec("g is non-negative by phase convention")

    @property
    def pump_coupling(self) -> complex:
        """Three-wave coupling 4*g3*alpha_p with the pump phase chosen real"""
        return 4.0 * self.g3 * math.sqrt(self.n_p)

    def to_dict(self):
        return asdict(self)


@dataclass
class HbState:
    alpha_s: complex = 0j
    alpha_i: complex = 0j
    alpha_h: complex = 0j
    alpha_p: Optional[complex] = None
    omega: float = 0.0
    u_s: complex = 0j
    u_i: complex = 0j
    u_h: complex = 0j
    residual: float = math.inf
    converged: bool = False

    @property
    def n_s(self) -> float:
        return abs(self.alpha_s) ** 2

    @property
    def n_i(self) -> float:
        return abs(self.alpha_i) ** 2

    @property
    def n_h(self) -> float:
        return abs(self.alpha_h) ** 2

    def signal_gain(self, kappa: float) -> float:
        """|a_out/a_in|^2 with u_s = i*sqrt(kappa)*a_in and a_out = a_in - sqrt(kappa)*alpha_s"""
        if self.u_s == 0:
            raise ValueError("signal gain needs a nonzero signal drive")
        return abs(1.0 - 1j * kappa * self.alpha_s / self.u_s) ** 2


class StabilityRegion(Enum):
    REGION_I = "RegionI_monostable"
    REGION_II = "RegionII_bistable"
    REGION_III = "RegionIII_tristable"


@dataclass
class StabilityClass:
    region: StabilityRegion
    delta: float
    n_p: float
    delta_b: float
    drive_excess: float
    boundaries: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)

    @property
    def label(self) -> str:
        return self.region.value


@dataclass
class SaturationCurve:
    flux: float
    delta: float
    target_G0: float
    n_p: float
    p_in: List[float]
    branches: List[List[float]]
    p1db: Optional[float] = None
    shark_fin: bool = False
    low_branch_end: Optional[float] = None

    @property
    def p_in_dbm(self) -> List[float]:
        return [watts_to_dbm(p) for p in self.p_in]

    def branch_count(self) -> List[int]:
        return [len(b) for b in self.branches]


@dataclass(frozen=True)
class ImdResult:
    G: float
    iip3: float
    delta1: float
    delta2: float

    def __post_init__(self):
        if not self.iip3 > 0:
            raise InvalidSpec(f"IIP3 must be positive, got {self.iip3}")

    @property
    def iip3_dbm(self) -> float:
        return watts_to_dbm(self.iip3)

    def to_dict(self):
        data = asdict(self)
        data["iip3_dbm"] = self.iip3_dbm
        return data


@dataclass(frozen=True)
class Drive:
    """One drive tone; frequency is measured in the integration frame"""
    frequency: float
    amplitude: complex
    phase: float = 0.0


@dataclass(frozen=True)
class OracleConfig:
    truncation: int
    step: float
    total_time: float
    drives: Tuple[Drive, ...] = ()
    initial: complex = 0j
    window: float = 0.0
    frame: str = "lab"
    escape_radius: Optional[float] = None

    def __post_init__(self):
        if self.truncation not in (4, 5, 6):
            raise InvalidSpec(f"truncation order must be 4, 5 or 6, got {self.truncation}")
        if self.frame not in ("lab", "pump"):
            raise InvalidSpec(f"unknown frame {self.frame!r}")
        if not self.step > 0 or not self.total_time > self.step:
            raise InvalidSpec("step must be positive and smaller than total_time")
        if self.window < 0 or self.window > self.total_time:
            raise InvalidSpec("extraction window must fit inside total_time")
        object.__setattr__(self, "drives", tuple(self.drives))

    @property
    def n_steps(self) -> int:
        return int(round(self.total_time / self.step))

    def slowest_beat(self) -> Optional[float]:
        freqs = sorted({d.frequency for d in self.drives})
        if self.frame == "pump":
            freqs = sorted(set(freqs) | {0.0})
        beats = [b - a for a, b in zip(freqs, freqs[1:]) if b - a > 0]
        return min(beats) if beats else None


@dataclass
class SweepResult:
    """Tabular sweep output keyed by the leading key columns"""
    name: str
    columns: List[str]
    rows: List[Dict[str, object]]
    config_hash: str
    key_columns: Sequence[str] = ("flux", "delta_MHz", "p_in_dBm")
    polylines: Dict[str, List[Tuple[float, float]]] = field(default_factory=dict)
    extra: Dict[str, object] = field(default_factory=dict)

    @property
    def flagged_rows(self) -> int:
        return sum(1 for row in self.rows if row.get("error"))

    def sort_rows(self):
        keys = [k for k in self.key_columns if k in self.columns]
        self.rows.sort(key=lambda row: tuple(_sort_value(row.get(k)) for k in keys))


def _sort_value(value):
    if value is None or value == "":
        return -math.inf
    return value
