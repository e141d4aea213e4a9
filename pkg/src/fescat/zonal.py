"""Fast minimization path for radial amplitudes.

In the frame whose polar axis is Im(theta), |e^{-i theta.x}|^2 depends
only on the polar angle, so the Gram matrix of the residual-field basis
is block diagonal over the azimuthal index.  Blocks are assembled from
one-dimensional integrals (exact in angle, Gauss in radius and in the
polar variable), which makes bandwidths of a few hundred affordable --
the plane-wave target on the shell genuinely needs l of order
e * |Im theta| * b before its tail drops below the 1/|theta| scale.

Columns are rescaled to unit peak magnitude; the regularization path is
applied to the scaled coefficients and includes a truncated-eigenvalue
solve, mirroring the dense path's semantics.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from . import sphere
from .special import sph_h_all, sph_jn_all, sph_jn_log_all, spherical_harmonic_dir_scaled
from .variety import rotation_to_e3

LN2 = math.log(2.0)


def reduced_legendre_table(lmax, m, u):
    """P~_{l m}(u) = N_lm P_l^m(u) for l = m..lmax at real nodes u.

    Normalized so that 2 pi int P~^2 du = 1; Condon-Shortley included.
    """
    u = np.asarray(u, dtype=float)
    n = len(u)
    out = np.empty((lmax - m + 1, n))
    s = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    if m > 0:
        s = s * (1.0 - u * u) ** (m / 2.0)
        for k in range(1, m + 1):
            s = -math.sqrt((2 * k + 1) / (2.0 * k)) * s
    out[0] = s
    s_prev = np.zeros(n)
    for ell in range(m + 1, lmax + 1):
        a = math.sqrt((2 * ell - 1) * (2 * ell + 1) / ((ell - m) * (ell + m)))
        if ell == m + 1:
            s, s_prev = a * u * s, s
        else:
            b = math.sqrt(
                (2 * ell + 1) * (ell + m - 1) * (ell - m - 1)
                / ((ell - m) * (ell + m) * (2 * ell - 3))
            )
            s, s_prev = a * u * s - b * s_prev, s
        out[ell - m] = s
    return out


@dataclass
class ZonalNu:
    """Minimizer in the rotated frame, kept in column-scaled form.

    c_scaled are coefficients of the unit-peak columns; unscaled
    coefficients are c_scaled * exp(-log_col_scale) and may overflow for
    the far modes, so conversions stay local and log-based.
    """

    c_scaled: np.ndarray
    log_col_scale: np.ndarray
    L_big: int
    frame: np.ndarray

    @property
    def norm_a_log(self):
        """log ||nu||_{L2(S2)} of the unscaled coefficient vector."""
        mags = np.abs(self.c_scaled)
        live = mags > 0
        if not np.any(live):
            return -math.inf
        logs = np.log(mags[live]) - self.log_col_scale[live]
        peak = logs.max()
        return peak + 0.5 * math.log(np.sum(np.exp(2.0 * (logs - peak))))

    @property
    def norm_a(self):
        ln = self.norm_a_log
        return math.exp(ln) if ln < 700 else math.inf

    def pairing_coefficients(self, L):
        """Unscaled coefficients for l <= L (the amplitude-pairing range)."""
        ls, _ = sphere.index_tables(self.L_big)
        keep = ls <= L
        with np.errstate(over="raise"):
            return self.c_scaled[keep] * np.exp(-self.log_col_scale[keep]), ls[keep]


class ZonalBasis:
    """Block-diagonal reduced form of the rho minimization (radial data)."""

    def __init__(self, theta_pair, data, a1, b, L_big, n_radial=16, n_u=None):
        if not data.is_radial:
            raise ValueError("zonal path requires radial amplitude data")
        self.theta_pair = theta_pair
        self.data = data
        self.a1, self.b = a1, b
        self.L_big = L_big
        kappa = theta_pair.kappa
        H = rotation_to_e3(theta_pair.theta.imag) if kappa > 0 else np.eye(3)
        self.frame = H
        self.theta_t = H @ theta_pair.theta
        self.theta_p_t = H @ theta_pair.theta_prime

        x, w = roots_legendre(n_radial)
        self.r_nodes = 0.5 * (a1 + b) + 0.5 * (b - a1) * x
        self.r_weights = 0.5 * (b - a1) * w
        self.volume = 4.0 * math.pi * (b**3 - a1**3) / 3.0

        if n_u is None:
            n_u = int(math.ceil(2.0 * kappa * b)) + L_big + 24
        u, wu = roots_legendre(n_u)
        self.u_nodes, self.u_weights = u, wu

        n_r = len(self.r_nodes)
        # log-magnitude and phase of g_l(r) = 4 pi (i^l j_l + a_l h_l)
        log_g = np.full((L_big + 1, n_r), -np.inf)
        phase_g = np.zeros((L_big + 1, n_r), dtype=complex)
        log_j = np.full((L_big + 1, n_r), -np.inf)
        sign_j = np.zeros((L_big + 1, n_r))
        L_amp = min(data.L_amp, L_big)
        for i, r in enumerate(self.r_nodes):
            sj, lj = sph_jn_log_all(L_big, r)
            log_j[:, i] = lj
            sign_j[:, i] = sj
            h = sph_h_all(L_amp, r)
            for ell in range(L_big + 1):
                if ell <= L_amp:
                    g = (1j**ell) * (math.exp(lj[ell]) * sj[ell] if lj[ell] > -700 else 0.0)
                    g = 4.0 * math.pi * (g + data.partial_wave[ell] * h[ell])
                    if g != 0:
                        log_g[ell, i] = math.log(abs(g))
                        phase_g[ell, i] = g / abs(g)
                else:
                    if np.isfinite(lj[ell]):
                        log_g[ell, i] = math.log(4.0 * math.pi) + lj[ell]
                        phase_g[ell, i] = (1j**ell) * sj[ell]
        self.log_col_scale = np.max(log_g, axis=1)  # per-l peak of |g|
        dead = ~np.isfinite(self.log_col_scale)
        self.log_col_scale[dead] = 0.0
        with np.errstate(under="ignore"):
            self.g_hat = phase_g * np.exp(log_g - self.log_col_scale[:, None])
        self.g_hat[dead, :] = 0.0
        self.log_j = log_j
        self.sign_j = sign_j

        self._assemble_blocks(kappa)
        self._assemble_rhs()

    # -- assembly ------------------------------------------------------------

    def _assemble_blocks(self, kappa):
        L = self.L_big
        u, wu = self.u_nodes, self.u_weights
        self.block_eigs = []
        self.block_vecs = []
        self.block_lmin = []
        lam_max = 0.0
        for m in range(L + 1):
            P = reduced_legendre_table(L, m, u)  # (L-m+1, n_u)
            nb = L - m + 1
            G = np.zeros((nb, nb), dtype=complex)
            for i, r in enumerate(self.r_nodes):
                z = 2.0 * kappa * r
                wfac = wu * np.exp(z * u)
                A = 2.0 * math.pi * (P * wfac) @ P.T
                gh = self.g_hat[m:, i]
                G += (self.r_weights[i] * r * r) * (np.conj(gh)[:, None] * gh[None, :]) * A
            lam, Q = np.linalg.eigh(G)
            self.block_eigs.append(lam)
            self.block_vecs.append(Q)
            self.block_lmin.append(m)
            if lam.size:
                lam_max = max(lam_max, float(lam[-1]))
        self.lam_max = lam_max

    def _assemble_rhs(self):
        """b_hat[lm] = int conj(psi_hat_lm) dx via the plane-wave expansion
        at the conjugated quadric point."""
        L = self.L_big
        n = (L + 1) ** 2
        ls, ms = sphere.index_tables(L)
        conj_theta = np.conj(self.theta_t)
        # radial pairing integral in log form: sum_r w r^2 conj(g_hat) j_l(r)
        b = np.zeros(n, dtype=complex)
        for k in range(n):
            ell, m = int(ls[k]), int(ms[k])
            mant, ex2 = spherical_harmonic_dir_scaled(ell, -m, conj_theta)
            if mant == 0:
                continue
            acc = 0.0 + 0.0j
            # accumulate sum_r w r^2 conj(g_hat) j in a per-l log frame
            ref = np.max(self.log_j[ell])
            if not np.isfinite(ref):
                continue
            for i, r in enumerate(self.r_nodes):
                lj = self.log_j[ell, i]
                if lj - ref < -700:
                    continue
                acc += (
                    self.r_weights[i]
                    * r
                    * r
                    * np.conj(self.g_hat[ell, i])
                    * (self.sign_j[ell, i] * math.exp(lj - ref))
                )
            if acc == 0:
                continue
            log_total = ex2 * LN2 + ref + math.log(abs(acc))
            if log_total > 700.0:
                raise OverflowError("zonal rhs overflow; reduce |theta| or b")
            phase = ((-1.0) ** m) * (1j**ell) * mant * (acc / abs(acc))
            b[k] = 4.0 * math.pi * phase * math.exp(log_total)
        self.b_hat = b

    def _block_indices(self, m_signed):
        L = self.L_big
        ells = np.arange(abs(m_signed), L + 1)
        return ells * ells + ells + m_signed

    def solve(self, eta, rel_cutoff=1e-14):
        """Tikhonov (eta relative to the top eigenvalue) or truncated solve.

        eta = 0 applies the eigenvalue cutoff alone.  Returns (ZonalNu,
        residual) with the residual evaluated through the normal-equation
        algebra.
        """
        L = self.L_big
        n = (L + 1) ** 2
        c = np.zeros(n, dtype=complex)
        resid_sq = self.volume
        lam_shift = eta * self.lam_max
        for m_abs, lam, Q in zip(self.block_lmin, self.block_eigs, self.block_vecs):
            keep = lam > rel_cutoff * self.lam_max
            for m_signed in ([0] if m_abs == 0 else [m_abs, -m_abs]):
                idx = self._block_indices(m_signed)
                beta = Q.conj().T @ self.b_hat[idx]
                filt = np.where(keep, 1.0 / np.where(keep, lam + lam_shift, 1.0), 0.0)
                cm = Q @ (filt * beta)
                c[idx] = cm
                # ||rho||^2 = V - 2 Re c.b + c.G.c accumulated spectrally
                resid_sq += float(
                    np.sum((lam * filt - 2.0) * filt * np.abs(beta) ** 2)
                )
        resid_sq = max(resid_sq, 0.0)
        nu = ZonalNu(
            c_scaled=c,
            log_col_scale=np.repeat(self.log_col_scale, 2 * np.arange(self.L_big + 1) + 1),
            L_big=self.L_big,
            frame=self.frame,
        )
        return nu, math.sqrt(resid_sq)

    # -- reconstruction --------------------------------------------------

    def reconstruct(self, nu):
        """-4 pi int A(theta', alpha) nu(alpha) dalpha in the rotated frame."""
        data = self.data
        L_pair = min(data.L_amp, self.L_big)
        coeffs, ls = nu.pairing_coefficients(L_pair)
        ls_full, ms_full = sphere.index_tables(self.L_big)
        ms = ms_full[ls_full <= L_pair]
        total = 0.0 + 0.0j
        for c, ell, m in zip(coeffs, ls, ms):
            if c == 0:
                continue
            mant, ex2 = spherical_harmonic_dir_scaled(int(ell), int(m), self.theta_p_t)
            if mant == 0:
                continue
            val = 4.0 * math.pi * data.partial_wave[int(ell)] * c * mant * 2.0**ex2
            total += val
        return complex(-4.0 * math.pi * total)


def bandwidth_policy(kappa, b, factor=1.1, pad=24, cap=260):
    """Bandwidth needed for the plane-wave tail to clear the 1/|theta| scale."""
    return int(min(cap, math.ceil(factor * math.e * kappa * b) + pad))


def zonal_invert(theta_pair, data, a1, b, L_big=None, n_radial=16,
                 etas=(1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12, 1e-14, 0.0),
                 accept_factor=2.0):
    """Assemble, sweep the regularization path, reconstruct.

    Returns (q_hat, diagnostics dict).
    """
    if L_big is None:
        L_big = bandwidth_policy(theta_pair.kappa, b)
    basis = ZonalBasis(theta_pair, data, a1, b, L_big, n_radial)
    path = []
    for eta in etas:
        nu, resid = basis.solve(eta)
        path.append((eta, resid, nu))
    d_proxy = min(p[1] for p in path)
    for eta, resid, nu in path:
        if resid <= accept_factor * d_proxy:
            break
    q_hat = basis.reconstruct(nu)
    return q_hat, {
        "d_theta": d_proxy,
        "rho_norm": resid,
        "eta": eta,
        "residual_ratio": resid / d_proxy if d_proxy > 0 else 1.0,
        "L_big": L_big,
        "nu_norm_log10": nu.norm_a_log / math.log(10.0),
        "basis": basis,
        "nu": nu,
    }
