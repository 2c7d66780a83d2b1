"""nfscat: desk-scale numerical laboratory for near-field inverse scattering.

Forward near-field data, exterior radiating extensions, exponentially
growing probe solutions in 2D/3D, boundary-data identities, approximate
band-limited inversion, and stability-envelope sweeps.
"""

__version__ = "0.1.0"

from ._accel import backend_name  # noqa: F401
