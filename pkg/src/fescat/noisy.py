"""Inversion from noisy fixed-energy data.

The scheme truncates the amplitude expansion at N(delta) =
[|ln delta| / ln|ln delta|], forms the residual field from the truncated
noisy data, and replaces the plain minimization by a constrained search:
maximize |theta| subject to

    |theta| [ ||rho_delta(nu)|| + a(nu) e^{kappa b} mu(delta) ] <= c,

with mu(delta) = e^{-gamma N(delta)}, gamma = ln(a1/a).  The achieved
magnitude grows slowly as the noise shrinks, which is exactly the
stability price of the fixed-energy problem.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import sphere
from .errors import InfeasibleMagnitudeError
from .exact import (
    DEFAULT_LAMBDAS,
    NuCoefficients,
    angular_exactness_policy,
    assemble_rho_basis,
    fourier_transform_radial,
    make_shell_grid,
    reconstruct_q_hat,
)
from .forward import AmplitudeData
from .variety import make_theta_pair


def truncation_N(delta):
    """N(delta) = nearest integer to |ln delta| / ln|ln delta|, >= 1.

    Defined only for delta < e^{-e}, where the denominator exceeds 1.
    """
    d = float(delta)
    if not 0.0 < d < math.exp(-math.e):
        raise ValueError(f"truncation_N needs delta in (0, e^-e); got {delta}")
    x = abs(math.log(d)) / math.log(abs(math.log(d)))
    return max(1, int(math.floor(x + 0.5)))


@dataclass
class NoisyAmplitude:
    """Corrupted amplitude coefficients with their noise level.

    data holds the full coefficient tensor of A_delta (not the amplitude
    of any potential); clean points back at the uncorrupted data.
    """

    data: AmplitudeData
    delta: float
    seed: int
    clean: AmplitudeData = None

    @property
    def L_amp(self):
        return self.data.L_amp

    @property
    def support_radius(self):
        return self.data.support_radius


def corrupt_amplitude(data, delta, seed, L_noise=6, n_probe=100):
    """Bounded, seed-deterministic perturbation with sup norm <= delta.

    A dense random coefficient block over modes l <= L_noise is scaled so
    the measured sup over an n_probe x n_probe direction grid equals
    delta/2; the result is generally not the amplitude of any potential.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = np.random.default_rng(seed)
    L_n = min(L_noise, data.L_amp)
    n_small = (L_n + 1) ** 2
    n_full = (data.L_amp + 1) ** 2
    block = rng.standard_normal((n_small, n_small)) + 1j * rng.standard_normal((n_small, n_small))
    dirs = sphere.random_directions(n_probe, rng)
    B = sphere.sph_basis_matrix(L_n, dirs)
    # sup |sum block Y(a') conj(Y(a))| over the probe grid
    vals = B @ block @ B.conj().T
    sup = float(np.max(np.abs(vals)))
    block *= (delta / 2.0) / sup
    tensor = np.array(data.coeffs, dtype=complex)
    tensor[:n_small, :n_small] += block
    noisy = AmplitudeData(L_amp=data.L_amp, coeff_tensor=tensor,
                          support_radius=data.support_radius)
    return NoisyAmplitude(data=noisy, delta=float(delta), seed=int(seed), clean=data)


@dataclass
class NoisyRunParams:
    """Derived quantities of one noisy run."""

    delta: float
    N_delta: int
    gamma: float
    mu_delta: float
    c_constraint: float = None
    theta_mag: float = None

    @classmethod
    def for_run(cls, delta, support_radius, a1, c_constraint=None):
        gamma = math.log(a1 / support_radius)
        if gamma <= 0:
            raise ValueError("need a1 > support radius")
        N = truncation_N(delta)
        return cls(delta=float(delta), N_delta=N, gamma=gamma,
                   mu_delta=math.exp(-gamma * N), c_constraint=c_constraint)


def assemble_noisy(theta_pair, noisy, grid, params, L_nu=12):
    """Basis of rho_delta: full plane-wave part, amplitude part cut at N(delta)."""
    return assemble_rho_basis(theta_pair, noisy.data, grid, L_nu,
                              L_amp_limit=params.N_delta)


@dataclass
class NoisyInversionConfig:
    a1: float = 1.2
    b: float = 2.0
    L_nu: int = 12
    n_radial: int = 12
    angular_slack: int = 8
    lambdas: tuple = DEFAULT_LAMBDAS
    theta_min: float = 2.0
    theta_max: float = 64.0
    bisect_iters: int = 9
    c_constraint: float = None
    c_factor: float = 10.0
    fit_fraction: float = 0.5


def _bracket_minimum(theta_pair, noisy, params, cfg):
    """Inner minimization of ||rho_delta|| + a(nu) e^{kappa b} mu over nu.

    Sweeps the regularization path plus the Tikhonov point matched to the
    penalty weight.  nu = 0 satisfies the growth constraint at any
    magnitude with the trivial residual ||1||, which would let the outer
    search run away and reconstruct zero; a candidate therefore qualifies
    only if its residual falls below fit_fraction * ||1||.  Returns
    (bracket value, nu, rho norm, qualified flag).
    """
    t_ang = angular_exactness_policy(cfg.L_nu, theta_pair.kappa, cfg.b, cfg.angular_slack)
    grid = make_shell_grid(cfg.a1, cfg.b, cfg.n_radial, t_ang)
    basis = assemble_noisy(theta_pair, noisy, grid, params, cfg.L_nu)
    weight = theta_pair.growth_factor(cfg.b) * params.mu_delta
    lambdas = tuple(cfg.lambdas) + (weight * weight,)
    floor = cfg.fit_fraction * math.sqrt(basis.b_norm_sq)
    best = None
    best_any = None
    for lam in lambdas:
        c, resid = basis.solve(lam)
        bracket = resid + float(np.linalg.norm(c)) * weight
        cand = (bracket, NuCoefficients(c=c, L_nu=cfg.L_nu), resid)
        if best_any is None or bracket < best_any[0]:
            best_any = cand
        if resid <= floor and (best is None or bracket < best[0]):
            best = cand
    if best is None:
        return best_any + (False,)
    return best + (True,)


def calibrate_constraint(xi, data, delta, config=None):
    """Default constraint constant: c_factor times the bracket value
    achieved at |theta| = theta_min on the given (ideally clean) data."""
    cfg = config or NoisyInversionConfig()
    params = NoisyRunParams.for_run(delta, data.support_radius, cfg.a1)
    pair = make_theta_pair(np.asarray(xi, dtype=float), cfg.theta_min)
    pseudo = NoisyAmplitude(data=data, delta=delta, seed=0, clean=data)
    bracket, _, _, qualified = _bracket_minimum(pair, pseudo, params, cfg)
    if not qualified:
        raise InfeasibleMagnitudeError(
            "no data-fitting nu at the calibration magnitude; "
            "raise L_nu or fit_fraction"
        )
    return cfg.c_factor * cfg.theta_min * bracket


def solve_constrained(xi, noisy, config=None, c_constraint=None):
    """Outer search: maximize |theta| under the growth constraint.

    Doubling then bisection over the one-parameter quadric family; returns
    (theta_pair, nu, diagnostics).  Infeasibility at the smallest
    magnitude raises with a suggestion to enlarge the constant.
    """
    cfg = config or NoisyInversionConfig()
    xi = np.asarray(xi, dtype=float)
    params = NoisyRunParams.for_run(noisy.delta, noisy.support_radius, cfg.a1,
                                    c_constraint=c_constraint)
    if params.c_constraint is None:
        params.c_constraint = (
            cfg.c_constraint
            if cfg.c_constraint is not None
            else calibrate_constraint(xi, noisy.clean or noisy.data, noisy.delta, cfg)
        )
    c_bound = params.c_constraint

    def probe(mag):
        pair = make_theta_pair(xi, mag)
        bracket, nu, resid = _bracket_minimum(pair, noisy, params, cfg)
        return pair, nu, resid, mag * bracket

    lo = cfg.theta_min
    pair, nu, resid, val = probe(lo)
    if val > c_bound:
        raise InfeasibleMagnitudeError(
            f"constraint infeasible at |theta| = {lo}: {val:.3e} > c = {c_bound:.3e}; "
            "increase the constraint constant"
        )
    best = (pair, nu, resid, val, lo)
    hi = None
    mag = lo
    while mag < cfg.theta_max:
        mag = min(2.0 * mag, cfg.theta_max)
        pair_i, nu_i, resid_i, val_i = probe(mag)
        if val_i <= c_bound:
            best = (pair_i, nu_i, resid_i, val_i, mag)
            if mag >= cfg.theta_max:
                break
        else:
            hi = mag
            break
    if hi is not None:
        lo_m = best[4]
        for _ in range(cfg.bisect_iters):
            mid = 0.5 * (lo_m + hi)
            pair_i, nu_i, resid_i, val_i = probe(mid)
            if val_i <= c_bound:
                best = (pair_i, nu_i, resid_i, val_i, mid)
                lo_m = mid
            else:
                hi = mid
    pair, nu, resid, val, mag = best
    params.theta_mag = mag
    diagnostics = {
        "theta_mag": mag,
        "rho_norm": resid,
        "bracket_times_theta": val,
        "constraint_slack": c_bound - val,
        "c_constraint": c_bound,
        "N_delta": params.N_delta,
        "mu_delta": params.mu_delta,
        "kappa": pair.kappa,
        "a_nu": nu.norm_a,
    }
    return pair, nu, params, diagnostics


def reconstruct_noisy(nu, theta_pair, noisy, params):
    """q_delta estimate from the N(delta)-truncated continuation series."""
    return reconstruct_q_hat(nu, theta_pair, noisy.data, L_trunc=params.N_delta)


@dataclass
class NoisyResult:
    xi: np.ndarray
    xi_mag: float
    delta: float
    seed: int
    N_delta: int
    theta_mag: float
    q_hat: complex
    q_tilde: float = None
    abs_error: float = None
    constraint_slack: float = None
    rho_norm: float = None


def invert_noisy(data, xi_list, deltas, seeds, config=None, oracle_potential=None):
    """Sweep over (xi, delta, seed); constraint constants calibrated on the
    clean data at theta_min, per (xi, delta)."""
    cfg = config or NoisyInversionConfig()
    out = []
    for xi in xi_list:
        xi = np.asarray(xi, dtype=float)
        q_tilde = (
            fourier_transform_radial(oracle_potential, float(np.linalg.norm(xi)))
            if oracle_potential is not None
            else None
        )
        for delta in deltas:
            c_bound = cfg.c_constraint
            if c_bound is None:
                c_bound = calibrate_constraint(xi, data, delta, cfg)
            for seed in seeds:
                noisy = corrupt_amplitude(data, delta, seed)
                pair, nu, params, diag = solve_constrained(xi, noisy, cfg, c_constraint=c_bound)
                q_hat = reconstruct_noisy(nu, pair, noisy, params)
                out.append(
                    NoisyResult(
                        xi=xi,
                        xi_mag=float(np.linalg.norm(xi)),
                        delta=float(delta),
                        seed=int(seed),
                        N_delta=params.N_delta,
                        theta_mag=diag["theta_mag"],
                        q_hat=q_hat,
                        q_tilde=q_tilde,
                        abs_error=None if q_tilde is None else abs(q_hat - q_tilde),
                        constraint_slack=diag["constraint_slack"],
                        rho_norm=diag["rho_norm"],
                    )
                )
    return out


def write_noisy_csv(path, results, config_hash=None):
    """CSV per spec: |xi|, delta, seed, N, |theta|, Re q, error, slack."""
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("xi_mag,delta,seed,N_delta,theta_mag,re_qhat,abs_error,constraint_slack")
    for r in results:
        err = "" if r.abs_error is None else f"{r.abs_error:.17g}"
        lines.append(
            f"{r.xi_mag:.17g},{r.delta:.17g},{r.seed},{r.N_delta},{r.theta_mag:.17g},"
            f"{r.q_hat.real:.17g},{err},{r.constraint_slack:.17g}"
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
