"""Forward fixed-energy (k = 1) scattering data from radial potentials.

Generates phase shifts by outward integration of the radial equation and
log-derivative matching at the support radius, partial-wave amplitudes
a_l = e^{i delta_l} sin(delta_l), pointwise/coefficient amplitude
evaluation, the analytic exterior scattering solution, and a Fourier
transform oracle for the potential.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.special import roots_legendre

from . import sphere
from .errors import ConfigError, IntegrationError, RangeLimitError
from .special import (
    legendre_p_all,
    log_double_factorial,
    riccati_u_and_deriv,
    riccati_v_and_deriv,
    sph_h_all,
)

L_MAX_FORWARD = 60


@dataclass
class RadialPotential:
    """Grid-sampled real potential with compact support.

    grid: strictly increasing radii in (0, a]; values: q at the nodes.
    Between nodes the potential is evaluated by monotone cubic (PCHIP)
    interpolation; beyond the support radius it is identically zero.
    """

    grid: np.ndarray
    values: np.ndarray
    support_radius: float
    _interp: PchipInterpolator = field(init=False, repr=False, default=None)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.size < 2:
            raise ValueError("potential grid needs at least two nodes")
        if not np.all(np.diff(self.grid) > 0):
            raise ValueError("potential grid must be strictly increasing")
        if self.grid[0] <= 0 or self.grid[-1] > self.support_radius + 1e-12:
            raise ValueError("potential grid must lie in (0, a]")
        if np.iscomplexobj(self.values):
            raise ValueError("potential must be real-valued")
        self._interp = PchipInterpolator(self.grid, self.values, extrapolate=True)

    def evaluate(self, r):
        """q(r); zero beyond the support radius."""
        r = np.asarray(r, dtype=float)
        inside = r <= self.support_radius
        out = np.where(inside, self._interp(np.minimum(r, self.support_radius)), 0.0)
        return out if out.ndim else float(out)

    def refined_samples(self, n=1 << 16):
        rr = np.linspace(self.grid[0], self.support_radius, n + 1)
        return rr, self._interp(rr)

    def l11_norm(self):
        """int_0^a r |q| dr (the weighted scattering-class norm)."""
        rr, qq = self.refined_samples()
        sliver = abs(self.values[0]) * self.grid[0] ** 2 / 2.0
        return float(np.trapezoid(rr * np.abs(qq), rr)) + sliver

    def l2_norm(self):
        rr, qq = self.refined_samples()
        sliver = 4 * math.pi * self.values[0] ** 2 * self.grid[0] ** 3 / 3.0
        return math.sqrt(float(np.trapezoid(4 * math.pi * rr**2 * qq**2, rr)) + sliver)

    def scaled(self, factor):
        return RadialPotential(self.grid, factor * self.values, self.support_radius)


def l_functional(q):
    """L(q) = int_0^a r q(r) dr, trapezoidal on a refined grid."""
    rr, qq = q.refined_samples()
    sliver = q.values[0] * q.grid[0] ** 2 / 2.0
    return float(np.trapezoid(rr * qq, rr)) + sliver


def fourier_transform_radial(q, xi_magnitude):
    """q~(xi) = int q(x) e^{-i xi.x} dx for radial q, as a real number.

    Reduces to 4 pi int_0^a q(r) r sin(|xi| r)/|xi| dr, with the |xi| -> 0
    limit 4 pi int q r^2 dr.
    """
    t = float(xi_magnitude)
    if t < 0:
        raise ValueError("|xi| must be nonnegative")
    x, w = roots_legendre(512)
    a0 = q.grid[0]
    rr = 0.5 * (q.support_radius + a0) + 0.5 * (q.support_radius - a0) * x
    ww = 0.5 * (q.support_radius - a0) * w
    qq = q._interp(rr)
    if t == 0.0:
        val = np.sum(ww * qq * rr**2)
        sliver = q.values[0] * a0**3 / 3.0
    else:
        val = np.sum(ww * qq * rr * np.sin(t * rr)) / t
        # (0, grid[0]) sliver with q frozen at its first sample
        if t * a0 < 1e-6:
            sliver = q.values[0] * a0**3 / 3.0
        else:
            sliver = q.values[0] * (math.sin(t * a0) - t * a0 * math.cos(t * a0)) / t**3
    return float(4.0 * math.pi * (val + sliver))


# -- potential builders ------------------------------------------------------


def _default_grid(a, n_grid):
    return np.linspace(a / n_grid, a, n_grid)


def square_well(depth=-1.0, support_radius=1.0, n_grid=2001):
    g = _default_grid(support_radius, n_grid)
    return RadialPotential(g, np.full_like(g, float(depth)), support_radius)


def gaussian_truncated(amplitude=-1.5, width=0.45, support_radius=1.0, n_grid=2001):
    g = _default_grid(support_radius, n_grid)
    return RadialPotential(g, amplitude * np.exp(-((g / width) ** 2)), support_radius)


def piecewise_linear(radii, values, support_radius, n_grid=2001):
    g = _default_grid(support_radius, n_grid)
    return RadialPotential(g, np.interp(g, radii, values), support_radius)


def from_table(radii, values, support_radius):
    return RadialPotential(np.asarray(radii, float), np.asarray(values, float), support_radius)


def potential_from_spec(spec):
    """Build a potential from its structured-text (dict) description."""
    if "kind" not in spec:
        raise ConfigError("kind", "missing potential kind")
    kind = spec["kind"]
    a = float(spec.get("support_radius", 1.0))
    n = int(spec.get("n_grid", 2001))
    if kind == "square_well":
        return square_well(float(spec.get("depth", -1.0)), a, n)
    if kind == "gaussian_truncated":
        return gaussian_truncated(
            float(spec.get("amplitude", -1.5)), float(spec.get("width", 0.45)), a, n
        )
    if kind == "piecewise_linear":
        return piecewise_linear(spec["radii"], spec["values"], a, n)
    if kind == "table":
        return from_table(spec["radii"], spec["values"], a)
    raise ConfigError("kind", f"unknown potential kind {kind!r}")


def load_potential_spec(path):
    with open(path, "r", encoding="utf-8") as fh:
        return potential_from_spec(json.load(fh))


# -- regular solution --------------------------------------------------------


@dataclass
class RegularSolution:
    """Samples of the regular radial solution, held in a scaled frame.

    True values are phi_scaled * exp(log_scale); for large l the true
    values underflow near the origin, the scaled frame does not.
    """

    ell: int
    r: np.ndarray
    phi_scaled: np.ndarray
    dphi_scaled: np.ndarray
    log_scale: float

    @property
    def phi(self):
        with np.errstate(under="ignore"):
            return self.phi_scaled * math.exp(self.log_scale) if self.log_scale > -700 else self.phi_scaled * 0.0

    @property
    def dphi(self):
        with np.errstate(under="ignore"):
            return self.dphi_scaled * math.exp(self.log_scale) if self.log_scale > -700 else self.dphi_scaled * 0.0


def compute_regular_solution(q, ell, r_out, r_eval=None, rtol=1e-10):
    """Integrate phi'' + phi - l(l+1)/r^2 phi - q phi = 0 outward.

    Launched at r0 = 1e-4 a from the series phi ~ r^{l+1}/(2l+1)!! with its
    first correction term; the returned object carries samples at r_eval
    (default: the potential grid extended to r_out).
    """
    ell = int(ell)
    if r_out < q.support_radius:
        raise ValueError("r_out must be at least the support radius")
    a = q.support_radius
    r0 = 1e-4 * a
    if r_eval is None:
        r_eval = np.concatenate([q.grid[q.grid > r0], np.linspace(a, r_out, 65)[1:]]) if r_out > a else q.grid[q.grid > r0]
    r_eval = np.asarray(r_eval, dtype=float)
    qfun = q.evaluate

    def rhs(r, y):
        return (y[1], (ell * (ell + 1) / (r * r) + qfun(r) - 1.0) * y[0])

    # series IC in the r0^{l+1}-scaled frame, with the first correction
    beta = (float(qfun(r0)) - 1.0) / (4.0 * ell + 6.0)
    y = np.array([1.0 + beta * r0**2, (ell + 1.0) / r0 + beta * (ell + 3.0) * r0])
    log_scale = (ell + 1.0) * math.log(r0) - log_double_factorial(2 * ell + 1)

    n_seg = max(2, int(math.ceil((ell + 1.0) * math.log(r_out / r0) / 40.0)))
    bounds = r0 * (r_out / r0) ** (np.arange(n_seg + 1) / n_seg)
    bounds[-1] = r_out
    rs, ps, ds, scales = [], [], [], []
    for k in range(n_seg):
        lo, hi = bounds[k], bounds[k + 1]
        te = r_eval[(r_eval > lo) & (r_eval <= hi)]
        sol = solve_ivp(
            rhs, (lo, hi), y, method="RK45", rtol=rtol, atol=1e-14,
            t_eval=np.unique(np.concatenate([te, [hi]])), dense_output=False,
        )
        if not sol.success:
            raise IntegrationError(sol.t[-1] if sol.t.size else lo, f"(l={ell})")
        if not np.all(np.isfinite(sol.y)):
            raise IntegrationError(hi, f"non-finite state (l={ell})")
        keep = np.isin(sol.t, te)
        rs.append(sol.t[keep])
        ps.append(sol.y[0][keep])
        ds.append(sol.y[1][keep])
        scales.append(np.full(keep.sum(), log_scale))
        y = sol.y[:, -1].copy()
        # renormalize between segments; the equation is linear
        s = max(abs(y[0]), abs(y[1]) * min(1.0, hi))
        if s > 0:
            y /= s
            log_scale += math.log(s)
    r_all = np.concatenate(rs)
    adj = np.exp(np.concatenate(scales) - log_scale)
    return RegularSolution(
        ell=ell,
        r=r_all,
        phi_scaled=np.concatenate(ps) * adj,
        dphi_scaled=np.concatenate(ds) * adj,
        log_scale=log_scale,
    )


# -- phase shifts and amplitudes --------------------------------------------


@dataclass
class PhaseShiftSet:
    """Fixed-energy phase shifts and the matched asymptotic magnitudes."""

    delta: np.ndarray
    jost_magnitudes: np.ndarray
    support_radius: float

    @property
    def L_max(self):
        return len(self.delta) - 1


def _reduce_half_pi(x):
    y = math.fmod(x, math.pi)
    if y > math.pi / 2:
        y -= math.pi
    elif y <= -math.pi / 2:
        y += math.pi
    return y


def compute_phase_shifts(q, L_max, rtol=1e-10):
    """Match the regular solution at r = a to the free basis {u_l, v_l}.

    delta_l is reduced to (-pi/2, pi/2]; |F_l| is extracted from the same
    matching (see module docs for the convention at the matching radius).
    """
    if L_max > L_MAX_FORWARD:
        raise RangeLimitError("compute_phase_shifts", L_max, q.support_radius,
                              f"L_max above supported maximum {L_MAX_FORWARD}")
    a = q.support_radius
    u, du = riccati_u_and_deriv(L_max, a)
    v, dv = riccati_v_and_deriv(L_max, a)
    delta = np.empty(L_max + 1)
    fmag = np.empty(L_max + 1)
    for ell in range(L_max + 1):
        sol = compute_regular_solution(q, ell, a, r_eval=np.array([a]), rtol=rtol)
        M = np.array([[u[ell], v[ell]], [du[ell], dv[ell]]])
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) < 1e-8:
            raise IntegrationError(a, f"degenerate free-basis match (l={ell})")
        A, B = np.linalg.solve(M, [sol.phi_scaled[-1], sol.dphi_scaled[-1]])
        delta[ell] = _reduce_half_pi(math.atan2(B, A))
        fmag[ell] = math.exp(0.5 * math.log(A * A + B * B) + sol.log_scale)
    return PhaseShiftSet(delta=delta, jost_magnitudes=fmag, support_radius=a)


def born_phase_shifts(q, L_max):
    """First Born approximation delta_l ~ -int_0^a q u_l^2 dr (oracle)."""
    x, w = roots_legendre(400)
    a0, a1 = q.grid[0], q.support_radius
    rr = 0.5 * (a1 + a0) + 0.5 * (a1 - a0) * x
    ww = 0.5 * (a1 - a0) * w
    qq = q._interp(rr)
    out = np.empty(L_max + 1)
    from .special import sph_jn_all

    for ell in range(L_max + 1):
        u2 = np.array([(sph_jn_all(ell, r)[ell] * r) ** 2 for r in rr])
        out[ell] = -float(np.sum(ww * qq * u2))
    return out


@dataclass
class AmplitudeData:
    """Fixed-energy scattering amplitude in coefficient form.

    For radial potentials the double Fourier tensor is diagonal with
    entries 4 pi a_l; the dense tensor is materialized only on demand.
    Conventions: A(a', a) = sum_lm' A_{l'm',lm} Y_{l'm'}(a') conj(Y_lm(a)).
    """

    L_amp: int
    partial_wave: np.ndarray = None
    coeff_tensor: np.ndarray = None
    support_radius: float = 1.0
    delta: np.ndarray = None

    def __post_init__(self):
        if self.partial_wave is None and self.coeff_tensor is None:
            raise ValueError("need partial waves or a coefficient tensor")
        if self.partial_wave is not None:
            self.partial_wave = np.asarray(self.partial_wave, dtype=complex)
            if len(self.partial_wave) != self.L_amp + 1:
                raise ValueError("partial wave array length mismatch")

    @property
    def is_radial(self):
        return self.partial_wave is not None and self.coeff_tensor is None

    @property
    def n_modes(self):
        return (self.L_amp + 1) ** 2

    def diagonal_values(self):
        """Per-mode diagonal 4 pi a_l, flattened over (l, m)."""
        ls, _ = sphere.index_tables(self.L_amp)
        return 4.0 * math.pi * self.partial_wave[ls]

    @property
    def coeffs(self):
        """Dense tensor A_{l'm',lm}; built lazily for radial data."""
        if self.coeff_tensor is not None:
            return self.coeff_tensor
        if self.n_modes > 2000:
            raise RangeLimitError("AmplitudeData.coeffs", self.L_amp, None,
                                  "dense tensor too large; use the radial fast path")
        return np.diag(self.diagonal_values())

    def truncated(self, L_new):
        """Data restricted to modes with l <= L_new (noisy-scheme cutoff)."""
        L_new = min(L_new, self.L_amp)
        n = (L_new + 1) ** 2
        if self.is_radial:
            return AmplitudeData(L_amp=L_new, partial_wave=self.partial_wave[: L_new + 1],
                                 support_radius=self.support_radius,
                                 delta=None if self.delta is None else self.delta[: L_new + 1])
        return AmplitudeData(L_amp=L_new, coeff_tensor=self.coeffs[:n, :n],
                             support_radius=self.support_radius)

    def coeff_block(self, L_rows, L_cols):
        """Tensor block A_{l'm', lm} for l' <= L_rows, l <= L_cols.

        Zero-padded where the request exceeds the stored band limit.
        """
        nr, nc = (L_rows + 1) ** 2, (L_cols + 1) ** 2
        n = self.n_modes
        out = np.zeros((nr, nc), dtype=complex)
        if self.is_radial:
            diag = self.diagonal_values()
            k = min(nr, nc, n)
            out[np.arange(k), np.arange(k)] = diag[:k]
            return out
        C = self.coeffs
        out[: min(nr, n), : min(nc, n)] = C[: min(nr, n), : min(nc, n)]
        return out

    def evaluate(self, alpha_prime, alpha):
        """Pointwise A(alpha', alpha) for real unit vectors."""
        ap = np.atleast_2d(np.asarray(alpha_prime, dtype=float))
        al = np.atleast_2d(np.asarray(alpha, dtype=float))
        if self.is_radial:
            cosg = np.sum(ap * al, axis=1)
            P = legendre_p_all(self.L_amp, cosg)
            ells = np.arange(self.L_amp + 1)
            val = ((2 * ells[:, None] + 1) * self.partial_wave[:, None] * P).sum(axis=0)
        else:
            Bp = sphere.sph_basis_matrix(self.L_amp, ap)
            Ba = sphere.sph_basis_matrix(self.L_amp, al)
            val = np.einsum("ij,jk,ik->i", Bp, self.coeffs, Ba.conj())
        return val if val.size > 1 else complex(val[0])

    def mode_coefficients(self, alpha):
        """A_{l'm'}(alpha) = sum_lm A_{l'm',lm} conj(Y_lm(alpha))."""
        al = np.atleast_2d(np.asarray(alpha, dtype=float))
        Ba = sphere.sph_basis_matrix(self.L_amp, al)
        if self.is_radial:
            return self.diagonal_values()[None, :] * Ba.conj()
        return Ba.conj() @ self.coeffs.T

    def mode_sup_norm(self):
        """l2-over-m magnitude of the coefficient vector A_l(alpha), per l.

        For radial data this is alpha-independent: |a_l| sqrt(4 pi (2l+1)).
        """
        if self.is_radial:
            ells = np.arange(self.L_amp + 1)
            return np.abs(self.partial_wave) * np.sqrt(4 * math.pi * (2 * ells + 1))
        rng = np.random.default_rng(7)
        dirs = sphere.random_directions(64, rng)
        rows = self.mode_coefficients(dirs)
        ls, _ = sphere.index_tables(self.L_amp)
        out = np.zeros(self.L_amp + 1)
        for ell in range(self.L_amp + 1):
            out[ell] = np.sqrt((np.abs(rows[:, ls == ell]) ** 2).sum(axis=1)).max()
        return out


def amplitude_from_phase_shifts(shifts, L_amp):
    """a_l = e^{i delta_l} sin delta_l packaged as AmplitudeData."""
    if L_amp > shifts.L_max:
        raise ValueError("L_amp must not exceed the computed L_max")
    d = shifts.delta[: L_amp + 1]
    a_l = np.exp(1j * d) * np.sin(d)
    return AmplitudeData(L_amp=L_amp, partial_wave=a_l,
                         support_radius=shifts.support_radius, delta=d.copy())


def amplitude_bound_envelope(ell, a):
    """Superexponential per-mode envelope (a/l)^(1/2) (a e / 2l)^(l+1)."""
    ell = np.asarray(ell, dtype=float)
    return np.sqrt(a / ell) * (a * math.e / (2 * ell)) ** (ell + 1)


def scattering_solution_exterior(data, x, alpha):
    """u(x, alpha) for |x| > a from the analytic exterior expansion."""
    x = np.asarray(x, dtype=float)
    r = float(np.linalg.norm(x))
    if r <= data.support_radius:
        raise ValueError(f"exterior solution needs |x| > a = {data.support_radius}")
    alpha = np.asarray(alpha, dtype=float)
    inc = np.exp(1j * float(alpha @ x))
    h = sph_h_all(data.L_amp, r)
    x0 = x / r
    if data.is_radial:
        cosg = float(x0 @ alpha)
        P = legendre_p_all(data.L_amp, cosg)
        ells = np.arange(data.L_amp + 1)
        return inc + complex(((2 * ells + 1) * data.partial_wave * h * P).sum())
    rows = data.mode_coefficients(alpha)[0]
    B = sphere.sph_basis_matrix(data.L_amp, x0[None, :])[0]
    ls, _ = sphere.index_tables(data.L_amp)
    return inc + complex((rows * B * h[ls]).sum())


def exterior_tail_bound(data, r):
    """Reported bound on the l > L_amp truncation tail of the expansion.

    Uses the superexponential amplitude envelope fitted on the data's own
    top modes together with the growth of h_l.
    """
    a = data.support_radius
    sup = data.mode_sup_norm()
    lo = max(3, data.L_amp - 6)
    env = amplitude_bound_envelope(np.arange(lo, data.L_amp + 1), a)
    c_fit = float(np.max(sup[lo:] / env)) if np.all(env > 0) else 0.0
    tail = 0.0
    for ell in range(data.L_amp + 1, data.L_amp + 16):
        try:
            h = abs(sph_h_all(ell, r)[ell])
        except (OverflowError, RangeLimitError):
            return math.inf
        tail += c_fit * float(amplitude_bound_envelope(ell, a)) * h * math.sqrt((2 * ell + 1) / (4 * math.pi))
    return tail


def write_amplitude_csv(path, shifts, data, config_hash=None):
    """Amplitude export: rows of (l, Re a_l, Im a_l, delta_l)."""
    lines = []
    if config_hash:
        lines.append(f"# config_hash={config_hash}")
    lines.append("ell,re_a,im_a,delta")
    for ell in range(data.L_amp + 1):
        a_l = data.partial_wave[ell]
        lines.append(f"{ell},{a_l.real:.17g},{a_l.imag:.17g},{shifts.delta[ell]:.17g}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
