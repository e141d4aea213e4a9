"""Pairs theta, theta' on the complex quadric {w in C^3 : w.w = 1}.

Given a real vector xi and a requested magnitude, builds theta' - theta =
xi with theta.theta = theta'.theta' = 1 (bilinear dot product) from the
one-parameter family zeta_1 = i s, zeta_2 = sqrt(1 - t^2/4 + s^2) in the
frame where xi is the polar axis, then rotates back.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleMagnitudeError

log = logging.getLogger(__name__)


def rotation_to_e3(xi):
    """Orthogonal map R with R e3 = xi/|xi| (identity for xi ~ 0).

    A single Householder reflection swapping e3 and the xi direction;
    orthogonality is all the construction needs.
    """
    xi = np.asarray(xi, dtype=float)
    t = np.linalg.norm(xi)
    if t == 0.0:
        return np.eye(3)
    n = xi / t
    e3 = np.array([0.0, 0.0, 1.0])
    v = e3 - n
    nv = np.linalg.norm(v)
    if nv < 1e-15:
        return np.eye(3)
    v /= nv
    return np.eye(3) - 2.0 * np.outer(v, v)


@dataclass
class ThetaPair:
    """theta, theta' in C^3 with theta' - theta = xi, both on the quadric.

    magnitude is the Hermitian size (sum |theta_j|^2)^(1/2); kappa = |Im
    theta| drives the e^{kappa b} growth factor of the inversion.
    """

    theta: np.ndarray
    theta_prime: np.ndarray
    xi: np.ndarray
    s: float
    rotation: np.ndarray
    magnitude: float = field(init=False)
    kappa: float = field(init=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=complex)
        self.theta_prime = np.asarray(self.theta_prime, dtype=complex)
        self.xi = np.asarray(self.xi, dtype=float)
        self.magnitude = float(np.sqrt(np.sum(np.abs(self.theta) ** 2)))
        self.kappa = float(np.linalg.norm(self.theta.imag))
        tol = 1e-12 * max(1.0, self.magnitude**2 / 16.0)
        for name, v in (("theta", self.theta), ("theta_prime", self.theta_prime)):
            defect = abs(np.sum(v * v) - 1.0)
            if defect > tol:
                raise ValueError(f"{name} off the quadric: |v.v - 1| = {defect:.3e}")
        if np.max(np.abs(self.theta_prime - self.theta - self.xi)) > 1e-12 * max(1.0, self.magnitude):
            raise ValueError("theta' - theta != xi")

    def growth_factor(self, b):
        """e^{kappa b}, the shell amplification factor."""
        return math.exp(self.kappa * b)

    def quadric_defects(self):
        return (
            abs(np.sum(self.theta * self.theta) - 1.0),
            abs(np.sum(self.theta_prime * self.theta_prime) - 1.0),
        )


def min_magnitude(xi):
    """Smallest representable |theta| of the one-parameter family for this xi."""
    t = float(np.linalg.norm(np.asarray(xi, dtype=float)))
    return math.sqrt(max(1.0, t * t / 2.0 - 1.0))


def make_theta_pair(xi, target_magnitude, s_override=None):
    """Construct the pair with |theta| = target_magnitude (relative 1e-10).

    s_override bypasses the magnitude equation and fixes the family
    parameter directly (experimentation hook).
    """
    xi = np.asarray(xi, dtype=float)
    t = float(np.linalg.norm(xi))
    if abs(t - 2.0) < 1e-9:
        # the quadric's angle chart degenerates at |xi| = 2; nudge off it
        log.warning("perturbing |xi| = 2 degeneracy by 1e-9")
        xi = xi * ((t + 1e-9) / t)
        t = float(np.linalg.norm(xi))
    if s_override is not None:
        s = float(s_override)
        if s < 0 or s * s < t * t / 4.0 - 1.0:
            raise InfeasibleMagnitudeError(
                f"s_override={s} below the geometric minimum for |xi|={t}"
            )
    else:
        target = float(target_magnitude)
        if target < min_magnitude(xi) * (1.0 - 1e-12):
            raise InfeasibleMagnitudeError(
                f"target magnitude {target} below the geometric minimum "
                f"{min_magnitude(xi):.6g} for |xi| = {t:.6g}"
            )
        s = math.sqrt(max(0.0, (target * target - 1.0) / 2.0))
        if s * s < t * t / 4.0 - 1.0:
            raise InfeasibleMagnitudeError(
                f"target magnitude {target} infeasible for |xi| = {t:.6g}"
            )
    zeta2 = math.sqrt(1.0 - t * t / 4.0 + s * s)
    R = rotation_to_e3(xi)
    theta_f = np.array([1j * s, zeta2, -t / 2.0])
    theta_p_f = np.array([1j * s, zeta2, +t / 2.0])
    return ThetaPair(
        theta=R @ theta_f,
        theta_prime=R @ theta_p_f,
        xi=xi,
        s=s,
        rotation=R,
    )
