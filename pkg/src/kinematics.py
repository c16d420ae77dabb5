"""
Static relations of the belt transmission and the crank-slider baseline.

The belt drive maps rotation to travel with a constant rate (x = r*theta); the
crank-slider is kept as the comparison linkage whose rate depends on theta.
Everything here is pure math on immutable values. Travel limits are enforced
by the plant, not here.
"""
import math
from dataclasses import dataclass

from .errors import ConfigError

DEFAULT_PULLEY_RADIUS_M = 0.04825


@dataclass(frozen=True)
class TransmissionGeometry:
    pulley_radius: float = DEFAULT_PULLEY_RADIUS_M
    crank_radius: float = DEFAULT_PULLEY_RADIUS_M
    rod_length: float = 3 * DEFAULT_PULLEY_RADIUS_M

    def __post_init__(self):
        if not self.pulley_radius > 0:
            raise ConfigError(f"pulley_radius must be positive, got {self.pulley_radius}")
        if not self.crank_radius > 0:
            raise ConfigError(f"crank_radius must be positive, got {self.crank_radius}")
        if not self.rod_length > self.crank_radius:
            raise ConfigError(
                f"rod_length ({self.rod_length}) must exceed crank_radius ({self.crank_radius})")

    @classmethod
    def from_params(cls, params):
        section = params['transmission']
        r = section['pulley_radius_m']
        return cls(pulley_radius=r, crank_radius=r, rod_length=section['crank_rod_ratio'] * r)


def belt_displacement(geom, theta):
    return geom.pulley_radius * theta


def belt_rate(geom, theta=None):
    """d(x_belt)/d(theta). Independent of theta; the argument is accepted for symmetry."""
    return geom.pulley_radius


def _crank_root(geom, theta):
    r, l = geom.crank_radius, geom.rod_length
    radicand = l * l - (r * math.sin(theta)) ** 2
    if radicand < 0:
        raise ValueError(
            f"crank-slider singular: l^2 - r^2 sin^2(theta) = {radicand:.3e} < 0")
    return math.sqrt(radicand)


def crank_displacement(geom, theta):
    r = geom.crank_radius
    return r * (1.0 - math.cos(theta)) + _crank_root(geom, theta)


def crank_rate(geom, theta):
    """Exact derivative of crank_displacement; 0 at theta = 0 and r at theta = pi/2."""
    r = geom.crank_radius
    s, c = math.sin(theta), math.cos(theta)
    return r * s - (r * r * s * c) / _crank_root(geom, theta)


def force_from_torque(torque, geom):
    """Linear force at the probe for a motor torque (F = tau / r)."""
    return torque / geom.pulley_radius


def torque_from_force(force, geom):
    return force * geom.pulley_radius


def rate_spread(rate_fn, geom, thetas):
    """Peak-to-peak rate over the sampled angles; exactly 0 for a linear transmission."""
    rates = [rate_fn(geom, t) for t in thetas]
    return max(rates) - min(rates)
