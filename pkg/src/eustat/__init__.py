"""eustat: ensemble simulation and verification for 2D incompressible flow.

Pseudo-spectral vorticity solver on a periodic box around a fixed radial
steady field, Dirac-mixture ensembles pushed forward through it, and
numerical certification of the statistical energy/vorticity laws, the
cylindrical-test-functional balance and the vanishing-viscosity limit.
"""

__version__ = "0.1.0"

from eustat.kernels import backend as kernel_backend  # noqa: F401
