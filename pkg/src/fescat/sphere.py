"""Quadrature on the unit sphere and vectorized harmonic evaluation.

The directional rule is a Gauss-Legendre (in cos theta) x uniform
(in phi) product grid; with n_u polar nodes and n_phi azimuthal nodes it
integrates spherical polynomials of degree min(2 n_u - 1, n_phi - 1)
exactly, which is what the band-limited integrands here need.  The
azimuthal count is kept even so the grid is invariant under x -> -x.
"""

import math

import numpy as np
from scipy.special import roots_legendre

_SQRT4PI = math.sqrt(4.0 * math.pi)


def sphere_product_grid(exactness):
    """Directional quadrature exact to the given polynomial degree.

    Returns (dirs, weights): unit vectors of shape (n, 3) and positive
    weights summing to 4 pi.
    """
    t = max(int(exactness), 1)
    n_u = (t + 2) // 2
    n_phi = t + 1
    if n_phi % 2:
        n_phi += 1
    u, wu = roots_legendre(n_u)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    su = np.sqrt(1.0 - u**2)
    cp, sp = np.cos(phi), np.sin(phi)
    dirs = np.empty((n_u * n_phi, 3))
    dirs[:, 0] = np.outer(su, cp).ravel()
    dirs[:, 1] = np.outer(su, sp).ravel()
    dirs[:, 2] = np.repeat(u, n_phi)
    w = np.repeat(wu, n_phi) * (2.0 * math.pi / n_phi)
    return dirs, w


def harmonic_index(ell, m):
    """Column index of Y_lm in the flattened (l, m) ordering."""
    return ell * ell + ell + m


def index_tables(lmax):
    """Arrays of l and m per flattened column, plus the column count."""
    n = (lmax + 1) ** 2
    ls = np.empty(n, dtype=int)
    ms = np.empty(n, dtype=int)
    for ell in range(lmax + 1):
        for m in range(-ell, ell + 1):
            ls[harmonic_index(ell, m)] = ell
            ms[harmonic_index(ell, m)] = m
    return ls, ms


def sph_basis_matrix(lmax, dirs):
    """Matrix of Y_lm over real unit directions.

    dirs: (n, 3) array of unit vectors.  Returns complex (n, (lmax+1)^2)
    with columns in flattened (l, m) order, Condon-Shortley phase,
    orthonormal on the sphere.
    """
    dirs = np.asarray(dirs, dtype=float)
    n = dirs.shape[0]
    z = dirs[:, 2]
    wp = dirs[:, 0] + 1j * dirs[:, 1]
    wm = dirs[:, 0] - 1j * dirs[:, 1]
    out = np.empty((n, (lmax + 1) ** 2), dtype=complex)
    wp_pow = np.ones(n, dtype=complex)
    wm_pow = np.ones(n, dtype=complex)
    smm = np.full(n, 1.0 / _SQRT4PI)
    for m in range(lmax + 1):
        if m > 0:
            smm = smm * (-math.sqrt((2 * m + 1) / (2.0 * m)))
            wp_pow = wp_pow * wp
            wm_pow = wm_pow * wm
        s = smm
        s_prev = np.zeros(n)
        for ell in range(m, lmax + 1):
            if ell == m:
                pass
            elif ell == m + 1:
                a = math.sqrt((2 * ell - 1) * (2 * ell + 1) / ((ell - m) * (ell + m)))
                s, s_prev = a * z * s, s
            else:
                a = math.sqrt((2 * ell - 1) * (2 * ell + 1) / ((ell - m) * (ell + m)))
                b = math.sqrt(
                    (2 * ell + 1)
                    * (ell + m - 1)
                    * (ell - m - 1)
                    / ((ell - m) * (ell + m) * (2 * ell - 3))
                )
                s, s_prev = a * z * s - b * s_prev, s
            out[:, harmonic_index(ell, m)] = s * wp_pow
            if m > 0:
                out[:, harmonic_index(ell, -m)] = ((-1.0) ** m) * s * wm_pow
    return out


def project_on_harmonics(values, basis, weights):
    """Fourier coefficients int f conj(Y_lm) dOmega from grid samples."""
    return basis.conj().T @ (np.asarray(weights) * np.asarray(values))


def random_directions(n, rng):
    """Uniformly distributed real unit vectors."""
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
