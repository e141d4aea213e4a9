"""Fourier-transform recovery from exact fixed-energy data.

Builds the residual field rho(x; nu) = e^{-i theta.x} int u(x,alpha)
nu(alpha) dalpha - 1 on a spherical shell outside the support, minimizes
its weighted L2 norm over band-limited test functions nu, and evaluates
the recovered q~(xi) estimate by pairing the amplitude with the minimizer
on the complex quadric.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import sphere
from .errors import RangeLimitError, RejectedRunError
from .forward import amplitude_bound_envelope, fourier_transform_radial
from .special import sph_h_all, sph_jn_all, spherical_harmonic_dir
from .variety import make_theta_pair

DEFAULT_LAMBDAS = tuple(10.0 ** (-k) for k in range(2, 13))


@dataclass
class ShellGrid:
    """Quadrature over the shell a1 <= |x| <= b.

    Tensor product of radial Gauss-Legendre nodes and the directional
    product rule; weights include the r^2 Jacobian.
    """

    a1: float
    b: float
    r_nodes: np.ndarray
    r_weights: np.ndarray
    dirs: np.ndarray
    dir_weights: np.ndarray
    angular_exactness: int

    @property
    def n_nodes(self):
        return len(self.r_nodes) * len(self.dirs)

    def node_block(self, i):
        """Points and weights of the i-th radial layer."""
        r = self.r_nodes[i]
        w = self.r_weights[i] * r * r * self.dir_weights
        return r * self.dirs, w

    def all_nodes(self):
        pts = np.concatenate([self.node_block(i)[0] for i in range(len(self.r_nodes))])
        w = np.concatenate([self.node_block(i)[1] for i in range(len(self.r_nodes))])
        return pts, w

    def volume(self):
        return 4.0 * math.pi * (self.b**3 - self.a1**3) / 3.0


def _gauss_nodes(a, b, n):
    from scipy.special import roots_legendre

    x, w = roots_legendre(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w


def make_shell_grid(a1, b, n_radial=16, angular_exactness=40):
    """Shell quadrature with the given directional polynomial exactness."""
    if not (0 < a1 < b):
        raise ValueError("need 0 < a1 < b")
    r, wr = _gauss_nodes(a1, b, n_radial)
    dirs, wd = sphere.sphere_product_grid(angular_exactness)
    return ShellGrid(a1=a1, b=b, r_nodes=r, r_weights=wr, dirs=dirs,
                     dir_weights=wd, angular_exactness=angular_exactness)


def angular_exactness_policy(L_nu, kappa, b, slack=8):
    """Directional resolution needed once the e^{2 Im theta . x} weight peaks."""
    return int(2 * L_nu + math.ceil(2.0 * kappa * b) + slack)


@dataclass
class NuCoefficients:
    """Test-function coefficients over the flattened (l, m) basis."""

    c: np.ndarray
    L_nu: int

    @property
    def norm_a(self):
        """a(nu) = ||nu||_{L2(S2)} = ||c||_2 (Parseval)."""
        return float(np.linalg.norm(self.c))

    def synthesize(self, dirs):
        return sphere.sph_basis_matrix(self.L_nu, np.atleast_2d(dirs)) @ self.c


@dataclass
class RhoBasis:
    """Reduced least-squares form of the rho(.; nu) minimization.

    Holds the SVD of the weighted design matrix (via a blocked QR sweep)
    so that the whole regularization path costs nothing extra.  psi_dense
    is kept for small grids to allow direct inspection.
    """

    L_nu: int
    theta_pair: object
    grid: ShellGrid
    svals: np.ndarray
    vmat: np.ndarray
    utb: np.ndarray
    b_perp_sq: float
    b_norm_sq: float
    psi_dense: np.ndarray = None
    weights: np.ndarray = None

    @property
    def n_modes(self):
        return (self.L_nu + 1) ** 2

    def cond_estimate(self):
        s = self.svals
        return float(s[0] / s[-1]) if s[-1] > 0 else math.inf

    def solve(self, lam):
        """Tikhonov minimizer of ||psi c - 1||_grid^2 + lam ||c||^2.

        Returns (c, residual) with the exact unregularized grid residual
        of the returned coefficients.
        """
        s = self.svals
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        if lam == 0.0:
            # truncated SVD fallback at the double-precision rank
            cutoff = s[0] * 1e-14
            filt = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)
            resid_sq = self.b_perp_sq + float(
                np.sum(np.abs(self.utb) ** 2 * (s <= cutoff))
            )
        else:
            filt = s / (s * s + lam)
            resid_sq = self.b_perp_sq + float(
                np.sum(np.abs(self.utb) ** 2 * (lam / (s * s + lam)) ** 2)
            )
        c = self.vmat @ (filt * self.utb)
        return c, math.sqrt(max(resid_sq, 0.0))


def _basis_block(theta_pair, data, grid, L_nu, L_rows, layer, Y_nu, Y_amp, ls_nu, ls_rows):
    """Weighted rows of the psi matrix on one radial layer, plus the rhs.

    L_rows limits the outgoing-mode index l' of the amplitude part (the
    noisy scheme cuts it at N(delta)); the plane-wave part always spans
    the full nu band.
    """
    r = grid.r_nodes[layer]
    pts, w = grid.node_block(layer)
    sw = np.sqrt(w)
    phase = np.exp(-1j * (pts @ theta_pair.theta))
    if not np.all(np.isfinite(phase)):
        raise RangeLimitError("assemble_rho_basis", L_nu, theta_pair.kappa,
                              "exp(-i theta.x) overflow; reduce |theta| or b")
    j = sph_jn_all(L_nu, r)
    g_plane = 4.0 * math.pi * (1j ** np.arange(L_nu + 1)) * j
    h = sph_h_all(L_rows, r)
    if data.is_radial:
        L_eff = min(L_nu, L_rows)
        g_amp = np.zeros(L_nu + 1, dtype=complex)
        g_amp[: L_eff + 1] = 4.0 * math.pi * data.partial_wave[: L_eff + 1] * h[: L_eff + 1]
        rows = Y_nu * (g_plane + g_amp)[ls_nu]
    else:
        C = data.coeff_block(L_rows, L_nu)
        rows = Y_nu * g_plane[ls_nu] + (Y_amp * h[ls_rows]) @ C
    rows = rows * (phase * sw)[:, None]
    return rows, sw.astype(complex)


def assemble_rho_basis(theta_pair, data, grid, L_nu, keep_dense=None, L_amp_limit=None):
    """Assemble and reduce the least-squares form of rho over the grid.

    The plane-wave part of psi_lm is 4 pi i^l j_l(|x|) Y_lm(x0) e^{-i
    theta.x}; the amplitude part enters through the coefficient tensor
    (diagonal 4 pi a_l h_l for radial data), with its outgoing index
    optionally cut at L_amp_limit.
    """
    n = (L_nu + 1) ** 2
    L_rows = data.L_amp if L_amp_limit is None else min(L_amp_limit, data.L_amp)
    ls_nu, _ = sphere.index_tables(L_nu)
    ls_rows, _ = sphere.index_tables(L_rows)
    Y_nu = sphere.sph_basis_matrix(L_nu, grid.dirs)
    Y_amp = None if data.is_radial else sphere.sph_basis_matrix(L_rows, grid.dirs)
    if keep_dense is None:
        keep_dense = grid.n_nodes * n <= 4_000_000
    dense_rows = [] if keep_dense else None
    dense_w = [] if keep_dense else None

    stacked = None
    b_norm_sq = 0.0
    for layer in range(len(grid.r_nodes)):
        rows, b_blk = _basis_block(theta_pair, data, grid, L_nu, L_rows, layer,
                                   Y_nu, Y_amp, ls_nu, ls_rows)
        b_norm_sq += float(np.sum(np.abs(b_blk) ** 2))
        aug = np.concatenate([rows, b_blk[:, None]], axis=1)
        if dense_rows is not None:
            dense_rows.append(rows / b_blk[:, None].real)  # unweighted psi values
            dense_w.append(b_blk.real**2)
        stacked = aug if stacked is None else np.concatenate([stacked, aug], axis=0)
        if stacked.shape[0] > 3 * (n + 1) or layer == len(grid.r_nodes) - 1:
            stacked = scipy.linalg.qr(stacked, mode="r", check_finite=False)[0][: n + 1]
    Raug = stacked
    R = Raug[:n, :n]
    qtb = Raug[:n, n]
    b_perp_sq = float(abs(Raug[n, n]) ** 2) if Raug.shape[0] > n else 0.0
    U, s, Vh = scipy.linalg.svd(R, full_matrices=False, check_finite=False)
    return RhoBasis(
        L_nu=L_nu,
        theta_pair=theta_pair,
        grid=grid,
        svals=s,
        vmat=Vh.conj().T,
        utb=U.conj().T @ qtb,
        b_perp_sq=b_perp_sq,
        b_norm_sq=b_norm_sq,
        psi_dense=None if dense_rows is None else np.concatenate(dense_rows),
        weights=None if dense_w is None else np.concatenate(dense_w),
    )


def rho_values(basis, nu):
    """rho(x; nu) on the stored dense grid (small grids only)."""
    if basis.psi_dense is None:
        raise ValueError("dense psi not kept for this grid size")
    return basis.psi_dense @ nu.c - 1.0


def minimize_rho(basis, grid, lam):
    """Solve the regularized minimization at a single lambda.

    Returns the coefficients and the achieved (unregularized) grid norm
    of rho; singular systems at lam = 0 fall back to a truncated-SVD
    solve automatically.
    """
    c, resid = basis.solve(lam)
    return NuCoefficients(c=c, L_nu=basis.L_nu), resid


def lambda_path(basis, lambdas=DEFAULT_LAMBDAS):
    """Residuals over the continuation path, best first used as d(theta) proxy."""
    out = []
    for lam in lambdas:
        c, resid = basis.solve(lam)
        out.append((lam, resid, c))
    return out


def select_nu(basis, lambdas=DEFAULT_LAMBDAS, accept_factor=2.0):
    """d(theta) proxy and the accepted minimizer along the path.

    d(theta) is the best achieved residual; the returned nu is the most
    regularized one within accept_factor of it.
    """
    path = lambda_path(basis, lambdas)
    d_proxy = min(p[1] for p in path)
    for lam, resid, c in path:  # lambdas ordered large -> small
        if resid <= accept_factor * d_proxy:
            return NuCoefficients(c=c, L_nu=basis.L_nu), resid, d_proxy, lam
    lam, resid, c = path[-1]
    return NuCoefficients(c=c, L_nu=basis.L_nu), resid, d_proxy, lam


def continuation_series(theta_pair, data, L_nu, L_trunc=None):
    """Per-mode pairing weights T_lm = sum_{l'm'} A_{l'm',lm} Y_{l'm'}(theta').

    L_trunc restricts the l' sum (noisy-data truncation); for radial data
    the tensor is diagonal and the sum collapses.
    """
    L_amp = data.L_amp if L_trunc is None else min(L_trunc, data.L_amp)
    n_nu = (L_nu + 1) ** 2
    ls_nu, ms_nu = sphere.index_tables(L_nu)
    T = np.zeros(n_nu, dtype=complex)
    if data.is_radial:
        for k in range(n_nu):
            ell, m = ls_nu[k], ms_nu[k]
            if ell > L_amp:
                continue
            T[k] = 4.0 * math.pi * data.partial_wave[ell] * spherical_harmonic_dir(
                ell, m, theta_pair.theta_prime
            )
        return T
    n_amp = (L_amp + 1) ** 2
    ls_amp, ms_amp = sphere.index_tables(L_amp)
    Yp = np.array(
        [spherical_harmonic_dir(ls_amp[j], ms_amp[j], theta_pair.theta_prime) for j in range(n_amp)]
    )
    C = data.coeff_block(L_amp, L_nu)
    return C.T @ Yp


def reconstruct_q_hat(nu, theta_pair, data, rho_norm=None, d_theta=None,
                      max_ratio=2.0, L_trunc=None):
    """q-hat = -4 pi int A(theta', alpha) nu(alpha) d alpha.

    When rho_norm and d_theta are supplied the acceptance gate
    rho_norm <= max_ratio * d_theta is enforced and violations raise.
    """
    if rho_norm is not None and d_theta is not None:
        if rho_norm > max_ratio * d_theta * (1.0 + 1e-12):
            raise RejectedRunError(rho_norm, d_theta, max_ratio)
    T = continuation_series(theta_pair, data, nu.L_nu, L_trunc)
    return complex(-4.0 * math.pi * np.sum(nu.c * T))


def continuation_tail_bound(theta_pair, data, L_used, nu_norm=1.0, n_terms=10):
    """Diagnostic bound on modes beyond L_used via the product of the
    amplitude envelope and the quadric harmonic growth estimate."""
    a = data.support_radius
    kappa = theta_pair.kappa
    sup = data.mode_sup_norm()
    lo = max(3, data.L_amp - 6)
    env = amplitude_bound_envelope(np.arange(lo, data.L_amp + 1), a)
    c_fit = float(np.max(sup[lo:] / env))
    total = 0.0
    r_probe = np.linspace(0.3, 3.0, 12)
    for ell in range(L_used + 1, L_used + 1 + n_terms):
        best = math.inf
        for r in r_probe:
            j = abs(sph_jn_all(ell, r)[ell])
            if j > 0:
                best = min(best, math.exp(min(kappa * r, 700.0)) / (math.sqrt(4 * math.pi) * j))
        total += c_fit * float(amplitude_bound_envelope(ell, a)) * best * math.sqrt(2 * ell + 1)
    return total * nu_norm


@dataclass
class InversionResult:
    """One (xi, |theta|) inversion outcome with its diagnostics."""

    xi: np.ndarray
    xi_mag: float
    theta_mag: float
    q_hat: complex
    q_tilde: float = None
    abs_error: float = None
    d_theta: float = None
    rho_norm: float = None
    residual_ratio: float = None
    lam: float = None
    cond_estimate: float = None
    tail_bound: float = None
    kappa: float = None
    accepted: bool = True


@dataclass
class ExactInversionConfig:
    """Knobs of the exact-data sweep (geometry, truncations, path)."""

    a1: float = 1.2
    b: float = 2.0
    L_nu: int = 12
    n_radial: int = 16
    angular_slack: int = 8
    lambdas: tuple = DEFAULT_LAMBDAS
    accept_factor: float = 2.0
    s_override: float = None


def invert_exact(data, xi_list, magnitudes, config=None, oracle_potential=None):
    """End-to-end sweep: pair construction, minimization, reconstruction.

    Returns one InversionResult per (xi, |theta|), with the error column
    filled when the oracle potential is supplied.
    """
    cfg = config or ExactInversionConfig()
    results = []
    for xi in xi_list:
        xi = np.asarray(xi, dtype=float)
        q_tilde = (
            fourier_transform_radial(oracle_potential, float(np.linalg.norm(xi)))
            if oracle_potential is not None
            else None
        )
        for mag in magnitudes:
            pair = make_theta_pair(xi, mag, s_override=cfg.s_override)
            t_ang = angular_exactness_policy(cfg.L_nu, pair.kappa, cfg.b, cfg.angular_slack)
            grid = make_shell_grid(cfg.a1, cfg.b, cfg.n_radial, t_ang)
            basis = assemble_rho_basis(pair, data, grid, cfg.L_nu, keep_dense=False)
            nu, rho_norm, d_proxy, lam = select_nu(basis, cfg.lambdas, cfg.accept_factor)
            q_hat = reconstruct_q_hat(nu, pair, data, rho_norm=rho_norm, d_theta=d_proxy,
                                      max_ratio=cfg.accept_factor)
            results.append(
                InversionResult(
                    xi=xi,
                    xi_mag=float(np.linalg.norm(xi)),
                    theta_mag=pair.magnitude,
                    q_hat=q_hat,
                    q_tilde=q_tilde,
                    abs_error=None if q_tilde is None else abs(q_hat - q_tilde),
                    d_theta=d_proxy,
                    rho_norm=rho_norm,
                    residual_ratio=rho_norm / d_proxy if d_proxy > 0 else 1.0,
                    lam=lam,
                    cond_estimate=basis.cond_estimate(),
                    tail_bound=continuation_tail_bound(pair, data, min(cfg.L_nu, data.L_amp), nu.norm_a),
                    kappa=pair.kappa,
                )
            )
    return results


def write_exact_csv(path, results, config_hash=None):
    """CSV per spec: |xi|, |theta|, Re/Im q-hat, oracle, error, d, lambda, ratio."""
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("xi_mag,theta_mag,re_qhat,im_qhat,q_tilde,abs_error,d_theta,lambda,residual_ratio")
    for r in results:
        qt = "" if r.q_tilde is None else f"{r.q_tilde:.17g}"
        err = "" if r.abs_error is None else f"{r.abs_error:.17g}"
        lines.append(
            f"{r.xi_mag:.17g},{r.theta_mag:.17g},{r.q_hat.real:.17g},{r.q_hat.imag:.17g},"
            f"{qt},{err},{r.d_theta:.17g},{r.lam:.17g},{r.residual_ratio:.17g}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
