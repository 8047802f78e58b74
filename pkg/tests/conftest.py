import cmath
import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def to_complex(s) -> complex:
    """Numerical image of an exact scalar under zeta_M -> exp(2 pi i / M)."""
    m = s.field.conductor
    z = cmath.exp(2j * cmath.pi / m)
    return sum(float(c) * z ** k for k, c in enumerate(s.coeffs))
