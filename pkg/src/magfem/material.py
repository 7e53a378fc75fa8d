"""Reluctivity models and their Newton linearization tensors.

Gradients r are stored with shape (..., 2); tensor results have shape
(..., 2, 2) so callers can evaluate whole quadrature batches at once.
"""

from dataclasses import dataclass

import numpy as np

MU0 = 4e-7 * np.pi


@dataclass(frozen=True)
class LinearReluctivity:
    """Constant reluctivity nu0 (units 1/(H/m))."""

    nu0: float
    is_linear = True

    def __post_init__(self):
        if not self.nu0 > 0:
            raise ValueError("nu0 must be positive")

    @staticmethod
    def from_relative_mu(mu_r):
        return LinearReluctivity(1.0 / (MU0 * mu_r))

    def nu(self, s):
        return np.full_like(np.asarray(s, dtype=np.float64), self.nu0)

    def dnu(self, s):
        return np.zeros_like(np.asarray(s, dtype=np.float64))


@dataclass(frozen=True)
class BrauerReluctivity:
    """Analytic saturation curve nu(s) = k1 * exp(k2 * s^2) + k3.

    Smooth and strictly increasing for positive coefficients, so the
    Newton tensor stays symmetric positive definite.
    """

    k1: float
    k2: float
    k3: float
    is_linear = False

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or not self.k3 > 0:
            raise ValueError("brauer coefficients must satisfy k1, k2 >= 0, k3 > 0")

    def nu(self, s):
        s = np.asarray(s, dtype=np.float64)
        return self.k1 * np.exp(self.k2 * s * s) + self.k3

    def dnu(self, s):
        s = np.asarray(s, dtype=np.float64)
        return 2.0 * self.k1 * self.k2 * s * np.exp(self.k2 * s * s)


def _norm_and_safe(r):
    s = np.linalg.norm(r, axis=-1)
    safe = np.where(s < 1e-14, 1.0, s)
    return s, safe


def nu_l_tensor(model, r):
    """Newton linearization nu(|r|) I + (nu'(|r|)/|r|) r (x) r.

    Falls back to nu(|r|) I where |r| < 1e-14; for smooth monotone models
    nu'(0) = 0, so the branch is continuous.
    """
    r = np.asarray(r, dtype=np.float64)
    s, safe = _norm_and_safe(r)
    coef = np.where(s < 1e-14, 0.0, model.dnu(s) / safe)
    eye = np.eye(2)
    outer = r[..., :, None] * r[..., None, :]
    return model.nu(s)[..., None, None] * eye + coef[..., None, None] * outer


def differential_tensor(model, r):
    """Jacobian of the flux map r -> nu(|r|) r.

    The closed form coincides with nu_l_tensor; the two differ only in
    which vector they are evaluated at (the linearization tensor of the
    potential gradient equals this Jacobian at the rotated argument).
    """
    return nu_l_tensor(model, r)


def newton_source(model, r, j):
    """Weak-form Newton right-hand-side data.

    Returns (j, w): the unchanged volume density and the flux correction
    w = nu'(|r|) |r| r = nu_l(r) r - nu(|r|) r, to be paired with grad(v)
    during assembly. For linear models w vanishes identically.
    """
    r = np.asarray(r, dtype=np.float64)
    s = np.linalg.norm(r, axis=-1)
    w = (model.dnu(s) * s)[..., None] * r
    return j, w
