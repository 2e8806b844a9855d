"""Independent walkers with current reservoirs and their macroscopic barriers."""
__version__ = "0.1.0"

from ._jit import USE_NUMBA
from .lattice import LatticeParams, ParticleConfig, build_initial_config
from .profiles import ProfileSpec

__all__ = ["USE_NUMBA", "LatticeParams", "ParticleConfig", "ProfileSpec", "build_initial_config", "__version__"]
