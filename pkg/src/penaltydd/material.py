"""Plane-elasticity constitutive matrices.

Strain is ordered ``(e11, e22, 2*e12)`` and stress ``(s11, s22, s12)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PLANE_STRAIN = "plane_strain"
PLANE_STRESS = "plane_stress"


class MaterialError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    """Isotropic or transversely isotropic linear elastic solid.

    For the transversely isotropic kind the plane of isotropy is parallel to
    ``x2 = 0`` (it contains ``x1`` and the out-of-plane axis ``x3``).  ``E``,
    ``nu`` act in that plane; ``E_t`` is the modulus along ``x2``, ``G_t`` the
    shear modulus in the ``x1-x2`` plane, and ``nu_t`` gives the in-plane
    contraction under a stress along ``x2``: ``e11 = -nu_t * s22 / E_t``.
    """

    kind: str
    E: float
    nu: float
    E_t: float | None = None
    nu_t: float | None = None
    G_t: float | None = None
    hypothesis: str = PLANE_STRAIN

    @classmethod
    def isotropic(cls, E, nu, hypothesis=PLANE_STRAIN):
        return cls("isotropic", float(E), float(nu), hypothesis=hypothesis)

    @classmethod
    def transversely_isotropic(cls, E, E_t, nu, nu_t, G_t, hypothesis=PLANE_STRAIN):
        return cls("transversely_isotropic", float(E), float(nu), float(E_t),
                   float(nu_t), float(G_t), hypothesis=hypothesis)

    @property
    def transverse_modulus(self):
        """Modulus along ``x2`` (equals ``E`` for isotropic solids)."""
        return self.E if self.kind == "isotropic" else self.E_t


def _compliance_3d(m):
    # Voigt order 11, 22, 33, 12 restricted to what the plane models need
    if m.kind == "isotropic":
        E, nu = m.E, m.nu
        S = np.array([[1.0, -nu, -nu], [-nu, 1.0, -nu], [-nu, -nu, 1.0]]) / E
        return S, 2.0 * (1.0 + nu) / E
    E, Et, nu, nut = m.E, m.E_t, m.nu, m.nu_t
    S = np.array([
        [1.0 / E, -nut / Et, -nu / E],
        [-nut / Et, 1.0 / Et, -nut / Et],
        [-nu / E, -nut / Et, 1.0 / E],
    ])
    return S, 1.0 / m.G_t


def constitutive_matrix(material):
    """3x3 symmetric positive definite matrix ``D`` with ``sigma = D @ strain``."""
    m = material
    if m.E <= 0:
        raise MaterialError("modulus must be positive")
    if m.kind == "transversely_isotropic" and (m.E_t is None or m.E_t <= 0 or m.G_t is None or m.G_t <= 0):
        raise MaterialError("transverse moduli must be positive")
    if m.kind not in ("isotropic", "transversely_isotropic"):
        raise MaterialError(f"unknown material kind {m.kind!r}")

    if m.kind == "isotropic":
        E, nu = m.E, m.nu
        if not -1.0 < nu < 0.5:
            raise MaterialError(f"Poisson ratio {nu} outside (-1, 0.5)")
        if m.hypothesis == PLANE_STRESS:
            c = E / (1.0 - nu * nu)
            D = c * np.array([[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]])
        elif m.hypothesis == PLANE_STRAIN:
            c = E / ((1.0 + nu) * (1.0 - 2.0 * nu))
            D = c * np.array([[1.0 - nu, nu, 0.0], [nu, 1.0 - nu, 0.0], [0.0, 0.0, 0.5 - nu]])
        else:
            raise MaterialError(f"unknown hypothesis {m.hypothesis!r}")
    else:
        S3, s_shear = _compliance_3d(m)
        if m.hypothesis == PLANE_STRESS:
            S2 = S3[:2, :2]
        elif m.hypothesis == PLANE_STRAIN:
            # eliminate s33 through e33 = 0
            S2 = S3[:2, :2] - np.outer(S3[:2, 2], S3[:2, 2]) / S3[2, 2]
        else:
            raise MaterialError(f"unknown hypothesis {m.hypothesis!r}")
        S = np.zeros((3, 3))
        S[:2, :2] = S2
        S[2, 2] = s_shear
        try:
            D = np.linalg.inv(S)
        except np.linalg.LinAlgError as exc:
            raise MaterialError("singular compliance") from exc
        D = 0.5 * (D + D.T)

    if not np.all(np.isfinite(D)) or np.linalg.eigvalsh(D).min() <= 0.0:
        raise MaterialError(f"constitutive matrix is not positive definite for {m}")
    return D


def spectral_bounds(material, tensor=False):
    """Smallest and largest eigenvalue ``(b, d)`` of the constitutive matrix.

    With the default engineering-strain vector these bound ``e @ D @ e`` by
    ``b*|e|^2`` and ``d*|e|^2``.  ``tensor=True`` measures strain by the
    tensor norm ``sum_ij e_ij^2`` instead.
    """
    D = constitutive_matrix(material)
    if tensor:
        T = np.diag([1.0, 1.0, np.sqrt(2.0)])
        D = T @ D @ T
    w = np.linalg.eigvalsh(D)
    return float(w[0]), float(w[-1])
