"""Cylindrical sample geometry and the m = 0 dipolar form factor.

The sample is a cylinder of radius R and height L whose bottom face sits a
distance d above the probe, with the symmetry axis through the probe. All
lengths share one unit; times are quoted in units of the diffusion time
T_D = d²/D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import QuadratureSpec, integrate_nd

# Angular normalization of the m = 0 dipolar field, 4√π/√5. The reduced
# kernel below omits it; squared observables carry the factor (16π/5).
Y20_NORM = 4.0 * math.sqrt(math.pi) / math.sqrt(5.0)


class InvalidGeometryError(ValueError):
    """Raised for non-positive radius/height/depth."""


@dataclass(frozen=True)
class CylinderGeometry:
    radius: float
    height: float
    depth: float

    @property
    def volume(self) -> float:
        return math.pi * self.radius ** 2 * self.height

    @property
    def surface(self) -> float:
        return 2.0 * math.pi * self.radius * (self.radius + self.height)

    # Aperture angles of the near and far faces as seen from the probe.
    @property
    def cos_alpha(self) -> float:
        return self.radius / math.hypot(self.depth, self.radius)

    @property
    def sin_alpha(self) -> float:
        return self.depth / math.hypot(self.depth, self.radius)

    @property
    def cos_beta(self) -> float:
        far = self.depth + self.height
        return far / math.hypot(far, self.radius)

    @property
    def sin_beta(self) -> float:
        far = self.depth + self.height
        return self.radius / math.hypot(far, self.radius)

    @property
    def diffusion_time(self) -> float:
        """T_D in units where the diffusion coefficient is 1."""
        return self.depth ** 2


def make_geometry(radius: float, height: float, depth: float = 1.0) -> CylinderGeometry:
    if not (radius > 0 and height > 0 and depth > 0):
        raise InvalidGeometryError(
            f"radius, height and depth must be positive, got "
            f"({radius}, {height}, {depth})")
    if not all(map(math.isfinite, (radius, height, depth))):
        raise InvalidGeometryError("geometry parameters must be finite")
    return CylinderGeometry(float(radius), float(height), float(depth))


def dipole_kernel(rho, z):
    """Reduced m = 0 dipolar weight (3z² - r²)/r⁵ in cylindrical coordinates.

    This is the angular-average form factor with the spherical-harmonic
    normalization Y20_NORM stripped; correlation amplitudes built from it
    reacquire the constant through their (4π²·...) prefactors.
    """
    rho = np.asarray(rho, dtype=float)
    z = np.asarray(z, dtype=float)
    r2 = rho * rho + z * z
    if np.any(r2 == 0.0):
        raise ValueError("form factor diverges at the probe position")
    r = np.sqrt(r2)
    return (3.0 * z * z - r2) / (r2 * r2 * r)


def form_factor(rho, z):
    """Full m = 0 dipolar form factor including the angular normalization."""
    return Y20_NORM * dipole_kernel(rho, z)


def b_rms_squared(geom: CylinderGeometry, quad: QuadratureSpec | None = None) -> float:
    """Mean-squared field amplitude (16π/5)∫∫ ρ² F²(ρ, z) dρ dz over the sample."""
    quad = quad or QuadratureSpec(nodes=32, panels=4, rel_tol=1e-9)
    val, _ = integrate_nd(
        lambda rho, z: rho ** 2 * dipole_kernel(rho, z) ** 2,
        [(0.0, geom.radius), (geom.depth, geom.depth + geom.height)],
        quad,
    )
    return (16.0 * math.pi / 5.0) * val


def kernel_volume_integral(geom: CylinderGeometry) -> float:
    """∫∫ ρ F dρ dz over the sample cross-section, in closed form.

    Equals cos β − sin α; this is the bulk factor shared by every plateau
    amplitude below.
    """
    return geom.cos_beta - geom.sin_alpha


def kernel_surface_integral(geom: CylinderGeometry) -> float:
    """(1/2π)∫_S F dS over the cylinder walls, in closed form.

    Bottom and top faces contribute cos³α/R and sin³β/R; the side wall
    contributes sin α cos²α/R − cos β sin²β/R after weighting by the
    circumference.
    """
    ca, sa = geom.cos_alpha, geom.sin_alpha
    cb, sb = geom.cos_beta, geom.sin_beta
    return (ca ** 3 + sb ** 3 + sa * ca ** 2 - cb * sb ** 2) / geom.radius
