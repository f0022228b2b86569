"""Coefficient quadruples of the cross-diffusion system and derived constants."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Params:
    """Diffusion coefficients (a, b, c, d), all positive with a*d > b*c.

    The strict inequality a*d > b*c is what makes the whole entropy
    construction work; it is validated eagerly so downstream code can rely
    on it.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not (v > 0.0):
                raise ValueError(f"parameter {name} must be positive, got {v}")
        if not (self.a * self.d > self.b * self.c):
            raise ValueError(
                f"parameters must satisfy ad > bc, got ad={self.a * self.d} "
                f"<= bc={self.b * self.c}"
            )

    @property
    def det(self) -> float:
        """a*d - b*c > 0."""
        return self.a * self.d - self.b * self.c

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)


def muskat_params(R: float, mu: float) -> Params:
    """Two-layer thin-film preset: (a, b, c, d) = (1+R, R, mu*R, mu*R).

    The determinant is mu*R*(1+R) - mu*R**2 = mu*R > 0, so the preset is
    always admissible for R, mu > 0.
    """
    if not (R > 0.0 and mu > 0.0):
        raise ValueError(f"muskat preset requires R > 0 and mu > 0, got R={R}, mu={mu}")
    return Params(1.0 + R, R, mu * R, mu * R)


@dataclass(frozen=True)
class ThetaConstants:
    """Constants pairing with the logarithmic entropy dissipation.

    theta1 = b(ad+bc)/(2ad) and theta2 = (ad-bc)(3ad+bc)/(4 a^2 d^2); both
    are positive exactly when ad > bc.
    """

    theta1: float
    theta2: float


def theta_constants(params: Params) -> ThetaConstants:
    a, b, c, d = params.as_tuple()
    ad = a * d
    bc = b * c
    theta1 = b * (ad + bc) / (2.0 * ad)
    theta2 = (ad - bc) * (3.0 * ad + bc) / (4.0 * ad * ad)
    return ThetaConstants(theta1, theta2)
