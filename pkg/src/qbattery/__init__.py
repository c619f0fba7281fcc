"""Thermal charging of a spin-chain quantum battery in a driven, lossy cavity."""

__version__ = "0.1.0"

from .bath import BathSpec, dissipator_apply, spectral_density, thermal_rate  # noqa: E402
from .dynamics import Trajectory, evolve, rhs, validate_state  # noqa: E402
from .energetics import battery_energy, ergotropy, net_charging_energy, passive_state  # noqa: E402
from .linalg import HilbertFactorization, eigh, expm_propagate, kron, partial_trace  # noqa: E402
from .model import SystemSpec, build_operators, initial_state  # noqa: E402
from .sweep import SweepPlan, preset, run_sweep  # noqa: E402
