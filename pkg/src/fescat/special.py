"""Special functions at fixed wave number k = 1.

Riccati-Bessel and spherical Bessel/Hankel functions for real order and
argument, Legendre polynomials, and spherical harmonics that accept complex
angles.  The regular family j_l is generated by a downward (Miller)
recurrence normalized against the l = 0 closed form, the irregular family
by the (stable) upward recurrence.  Harmonics are evaluated through a
fully-normalized associated-Legendre recurrence with the sin^|m| factor
divided out, which makes the complex-angle continuation branch-free.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeLimitError

ELL_MAX = 200
ARG_MAX = 1.0e3

_LOG_HUGE = 708.0  # ~ log(1.8e308)


def _check_order_arg(func, ell, x, ell_max=ELL_MAX):
    if not float(ell).is_integer() or ell < 0:
        raise RangeLimitError(func, ell, x, "order must be a nonnegative integer")
    if ell > ell_max:
        raise RangeLimitError(func, ell, x, f"order above supported maximum {ell_max}")
    if not (0.0 < x <= ARG_MAX):
        raise RangeLimitError(func, ell, x, f"argument outside (0, {ARG_MAX:g}]")


def sph_jn_all(lmax, x):
    """j_0(x)..j_lmax(x) by Miller's downward recurrence.

    Values whose magnitude is below the double-precision floor come back
    as 0.0; callers that must distinguish underflow use the scalar
    wrappers, which raise.
    """
    x = float(x)
    if x <= 0.0:
        raise RangeLimitError("sph_jn_all", lmax, x, "argument must be positive")
    # start high enough that the downward sweep has converged at lmax
    start = max(lmax, int(x)) + 24 + int(2.0 * math.sqrt(max(lmax, x, 1.0)))
    p_hi = 0.0
    p_lo = 1e-200
    # log2 rescaling offsets accumulated per index, applied at the end
    shifts = np.zeros(start + 1, dtype=np.int64)
    raw = np.zeros(start + 1)
    raw[start] = p_lo
    shift = 0
    for n in range(start, 0, -1):
        p_next = (2 * n + 1) / x * p_lo - p_hi
        p_hi, p_lo = p_lo, p_next
        if abs(p_lo) > 1e250:
            p_lo = math.ldexp(p_lo, -1000)
            p_hi = math.ldexp(p_hi, -1000)
            shift += 1000
        if n - 1 <= start:
            raw[n - 1] = p_lo
            shifts[n - 1] = shift
    # normalize against whichever closed form is away from a zero crossing
    j0 = math.sin(x) / x
    j1 = math.sin(x) / x**2 - math.cos(x) / x
    if abs(j0) >= abs(j1):
        ref_val, ref_raw, ref_shift = j0, raw[0], shifts[0]
    else:
        ref_val, ref_raw, ref_shift = j1, raw[1], shifts[1]
    out = np.zeros(lmax + 1)
    if ref_raw == 0.0 or ref_val == 0.0:
        return out
    # stored raw[n] = true[n] * 2^{-shifts[n]}
    log_ratio = math.log(abs(ref_val)) - math.log(abs(ref_raw)) - ref_shift * math.log(2.0)
    sign_ref = math.copysign(1.0, ref_val) * math.copysign(1.0, ref_raw)
    for n in range(min(lmax, start) + 1):
        if raw[n] == 0.0:
            continue
        ln = math.log(abs(raw[n])) + shifts[n] * math.log(2.0) + log_ratio
        if ln < -745.0:
            continue
        if ln > _LOG_HUGE:
            raise RangeLimitError("sph_jn_all", n, x, "normalized value overflow")
        out[n] = math.copysign(math.exp(ln), raw[n]) * sign_ref
    return out


def sph_jn_log_all(lmax, x):
    """(sign, log|j_l(x)|) for l = 0..lmax; log is -inf where j vanishes.

    Same Miller sweep as sph_jn_all but reported in log form, so orders far
    into the superexponential tail stay usable.
    """
    x = float(x)
    if x <= 0.0:
        raise RangeLimitError("sph_jn_log_all", lmax, x, "argument must be positive")
    start = max(lmax, int(x)) + 24 + int(2.0 * math.sqrt(max(lmax, x, 1.0)))
    p_hi = 0.0
    p_lo = 1e-200
    shifts = np.zeros(start + 1, dtype=np.int64)
    raw = np.zeros(start + 1)
    raw[start] = p_lo
    shift = 0
    for n in range(start, 0, -1):
        p_next = (2 * n + 1) / x * p_lo - p_hi
        p_hi, p_lo = p_lo, p_next
        if abs(p_lo) > 1e250:
            p_lo = math.ldexp(p_lo, -1000)
            p_hi = math.ldexp(p_hi, -1000)
            shift += 1000
        raw[n - 1] = p_lo
        shifts[n - 1] = shift
    j0 = math.sin(x) / x
    j1 = math.sin(x) / x**2 - math.cos(x) / x
    if abs(j0) >= abs(j1):
        ref_val, ref_raw, ref_shift = j0, raw[0], shifts[0]
    else:
        ref_val, ref_raw, ref_shift = j1, raw[1], shifts[1]
    sign = np.zeros(lmax + 1)
    logmag = np.full(lmax + 1, -np.inf)
    if ref_raw == 0.0 or ref_val == 0.0:
        return sign, logmag
    log_ratio = math.log(abs(ref_val)) - math.log(abs(ref_raw)) - ref_shift * math.log(2.0)
    sign_ref = math.copysign(1.0, ref_val) * math.copysign(1.0, ref_raw)
    for n in range(lmax + 1):
        if raw[n] == 0.0:
            continue
        logmag[n] = math.log(abs(raw[n])) + shifts[n] * math.log(2.0) + log_ratio
        sign[n] = math.copysign(1.0, raw[n]) * sign_ref
    return sign, logmag


def sph_yn_all(lmax, x, allow_overflow=False):
    """y_0(x)..y_lmax(x) by the upward recurrence (stable direction).

    Overflowing entries become +/-inf when allow_overflow is set, else the
    call raises.
    """
    x = float(x)
    if x <= 0.0:
        raise RangeLimitError("sph_yn_all", lmax, x, "argument must be positive")
    out = np.empty(lmax + 1)
    out[0] = -math.cos(x) / x
    if lmax >= 1:
        out[1] = -math.cos(x) / x**2 - math.sin(x) / x
    for n in range(1, lmax):
        nxt = (2 * n + 1) / x * out[n] - out[n - 1]
        if not math.isfinite(nxt):
            if not allow_overflow:
                raise RangeLimitError("sph_yn_all", n + 1, x)
            out[n + 1 :] = np.sign(out[n]) * np.inf if out[n] != 0 else np.inf
            return out
        out[n + 1] = nxt
    return out


def spherical_bessel_j(ell, r):
    """Regular spherical Bessel function j_l(r), scalar interface."""
    _check_order_arg("spherical_bessel_j", ell, r)
    val = sph_jn_all(int(ell), r)[int(ell)]
    if val == 0.0 and ell > 0:
        raise RangeLimitError("spherical_bessel_j", ell, r, "underflow")
    return val


def riccati_bessel_u(ell, x):
    """Riccati-Bessel function u_l(x) = sqrt(pi x / 2) J_{l+1/2}(x) = x j_l(x)."""
    _check_order_arg("riccati_bessel_u", ell, x)
    ell = int(ell)
    if ell == 0:
        return math.sin(x)
    val = sph_jn_all(ell, x)[ell] * x
    if val == 0.0:
        raise RangeLimitError("riccati_bessel_u", ell, x, "underflow")
    return val


def spherical_hankel_h(ell, r):
    """Outgoing radial function h_l(r) = i^(l+1) (j_l(r) + i y_l(r)).

    Normalized so that h_l(r) = (e^{ir}/r)[1 + o(1)] as r -> infinity;
    for l = 0 the relation is exact.
    """
    _check_order_arg("spherical_hankel_h", ell, r)
    ell = int(ell)
    j = sph_jn_all(ell, r)[ell]
    y = sph_yn_all(ell, r)[ell]
    return (1j) ** (ell + 1) * (j + 1j * y)


def sph_h_all(lmax, r):
    """h_0(r)..h_lmax(r) with the e^{ir}/r normalization."""
    j = sph_jn_all(lmax, r)
    y = sph_yn_all(lmax, r)
    phase = np.array([(1j) ** (n + 1) for n in range(lmax + 1)])
    return phase * (j + 1j * y)


def spherical_hankel_h_deriv(ell, r):
    """d/dr of the normalized outgoing function h_l at r."""
    _check_order_arg("spherical_hankel_h_deriv", ell, r)
    ell = int(ell)
    lm = max(ell, 1)
    j = sph_jn_all(lm, r)
    y = sph_yn_all(lm, r)
    h1 = j + 1j * y  # classical spherical Hankel h^(1)
    if ell == 0:
        d = -h1[1]
    else:
        d = h1[ell - 1] - (ell + 1) / r * h1[ell]
    return (1j) ** (ell + 1) * d


def riccati_u_and_deriv(lmax, r):
    """u_l(r) = r j_l(r) and u_l'(r) for l = 0..lmax."""
    j = sph_jn_all(lmax + 1, r)
    u = r * j[: lmax + 1]
    du = np.empty(lmax + 1)
    du[0] = math.cos(r)
    for n in range(1, lmax + 1):
        du[n] = r * j[n - 1] - n * j[n]
    return u, du


def riccati_v_and_deriv(lmax, r):
    """Irregular counterpart v_l(r) = -r y_l(r) ~ cos(r - l pi/2), and v_l'."""
    y = sph_yn_all(lmax + 1, r)
    v = -r * y[: lmax + 1]
    dv = np.empty(lmax + 1)
    dv[0] = -math.sin(r)
    for n in range(1, lmax + 1):
        dv[n] = -(r * y[n - 1] - n * y[n])
    return v, dv


def legendre_p(ell, x):
    """Legendre polynomial P_l(x) on [-1, 1] by the three-term recurrence."""
    if not float(ell).is_integer() or ell < 0 or ell > ELL_MAX:
        raise RangeLimitError("legendre_p", ell, x, "order outside 0..200")
    return legendre_p_all(int(ell), x)[int(ell)]


def legendre_p_all(lmax, x):
    """P_0(x)..P_lmax(x); x may be a scalar or an array (complex allowed)."""
    x = np.asarray(x)
    shape = (lmax + 1,) + x.shape
    out = np.empty(shape, dtype=np.result_type(x.dtype, float))
    out[0] = 1.0
    if lmax >= 1:
        out[1] = x
    for n in range(1, lmax):
        out[n + 1] = ((2 * n + 1) * x * out[n] - n * out[n - 1]) / (n + 1)
    return out


# ---------------------------------------------------------------------------
# spherical harmonics with complex angles


@dataclass(frozen=True)
class ComplexAngle:
    """Polar/azimuthal angle pair; both components may be complex.

    Parameterizes directions (sin t cos p, sin t sin p, cos t) on the
    complexified unit sphere.  The bilinear square of the induced vector
    is 1 identically; `unit_defect` measures the numerical deviation in
    extended precision (double precision cancels catastrophically once
    |Im| is a few units).
    """

    theta: complex
    phi: complex

    def __post_init__(self):
        for name, val in (("theta", self.theta), ("phi", self.phi)):
            v = complex(val)
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"ComplexAngle.{name} must be finite, got {val!r}")

    def direction(self):
        """Induced direction vector as a complex (3,) array."""
        st, ct = np.sin(complex(self.theta)), np.cos(complex(self.theta))
        cp, sp = np.cos(complex(self.phi)), np.sin(complex(self.phi))
        return np.array([st * cp, st * sp, ct], dtype=complex)

    def unit_defect(self, dps=40):
        """|v.v - 1| for the induced vector, evaluated with mpmath."""
        import mpmath as mp

        with mp.workdps(dps):
            t = mp.mpc(complex(self.theta))
            p = mp.mpc(complex(self.phi))
            st, ct = mp.sin(t), mp.cos(t)
            cp, sp = mp.cos(p), mp.sin(p)
            vv = (st * cp) ** 2 + (st * sp) ** 2 + ct**2
            return float(abs(vv - 1))


def _alp_coeff_a(ell, m):
    return math.sqrt((2 * ell - 1) * (2 * ell + 1) / ((ell - m) * (ell + m)))


def _alp_coeff_b(ell, m):
    return math.sqrt(
        (2 * ell + 1) * (ell + m - 1) * (ell - m - 1) / ((ell - m) * (ell + m) * (2 * ell - 3))
    )


def spherical_harmonic(ell, m, angle):
    """Orthonormal Y_lm continued to complex angles (Condon-Shortley phase).

    For real angles this is the standard normalized spherical harmonic on
    the unit sphere.  The continuation is evaluated through the reduced
    Legendre recurrence (the (1-z^2)^{|m|/2} factor is folded into
    (sin t e^{+-i p})^{|m|}), which removes every branch choice.
    """
    if not float(ell).is_integer() or ell < 0:
        raise RangeLimitError("spherical_harmonic", ell, angle, "bad order")
    ell, m = int(ell), int(m)
    if abs(m) > ell:
        return 0.0 + 0.0j
    t = complex(angle.theta)
    p = complex(angle.phi)
    z = np.cos(t)
    st = np.sin(t)
    w = st * np.exp(1j * p) if m >= 0 else st * np.exp(-1j * p)
    val = _harmonic_from_zw(ell, abs(m), z, w)
    return val if m >= 0 else (-1.0) ** (abs(m)) * val


def spherical_harmonic_dir(ell, m, vec):
    """Y_lm at a complex direction vector with vec.vec = 1 (bilinear)."""
    ell, m = int(ell), int(m)
    if abs(m) > ell:
        return 0.0 + 0.0j
    vec = np.asarray(vec, dtype=complex)
    z = vec[2]
    w = vec[0] + 1j * vec[1] if m >= 0 else vec[0] - 1j * vec[1]
    val = _harmonic_from_zw(ell, abs(m), z, w)
    return val if m >= 0 else (-1.0) ** (abs(m)) * val


def spherical_harmonic_dir_scaled(ell, m, vec):
    """(mantissa, log2 exponent) form of Y_lm at a complex direction.

    Never overflows; the caller combines the exponent with other scaled
    factors before exponentiating.
    """
    ell, m = int(ell), int(m)
    if abs(m) > ell:
        return 0.0 + 0.0j, 0.0
    vec = np.asarray(vec, dtype=complex)
    z = vec[2]
    w = vec[0] + 1j * vec[1] if m >= 0 else vec[0] - 1j * vec[1]
    mant, ex = _harmonic_from_zw_scaled(ell, abs(m), z, w)
    if m < 0:
        mant = ((-1.0) ** abs(m)) * mant
    return mant, ex


def _harmonic_from_zw(ell, m, z, w):
    """N_lm * (reduced P_l^m)(z) * w^m as a plain complex, m >= 0.

    Raises once the final value leaves the double range.
    """
    mant, ex = _harmonic_from_zw_scaled(ell, m, z, w)
    if mant == 0:
        return 0.0 + 0.0j
    if ex > 1023.0:
        raise RangeLimitError("spherical_harmonic", ell, (z, w), "result overflow")
    if ex < -1060.0:
        return 0.0 + 0.0j
    return mant * 2.0**ex


def _harmonic_from_zw_scaled(ell, m, z, w):
    """Core evaluation returning (unit-scale mantissa, log2 exponent).

    Carries an explicit power-of-two exponent alongside the recurrence so
    that intermediate growth far beyond the double range stays usable.
    """
    # S_mm with Condon-Shortley sign, normalized; exponent tracked separately
    s = 1.0 / math.sqrt(4.0 * math.pi) + 0.0j
    expo = 0
    for k in range(1, m + 1):
        s = -math.sqrt((2 * k + 1) / (2.0 * k)) * s
    if ell > m:
        s_prev = 0.0 + 0.0j
        e_prev = 0
        for n in range(m + 1, ell + 1):
            a = _alp_coeff_a(n, m)
            b = _alp_coeff_b(n, m) if n >= m + 2 else 0.0
            # align exponents before combining
            if e_prev != expo:
                s_prev = s_prev * 2.0 ** float(e_prev - expo)
                e_prev = expo
            s_new = a * z * s - b * s_prev
            s_prev, e_prev = s, expo
            s = s_new
            mag = abs(s)
            if mag > 1e280:
                s *= 2.0**-1000
                s_prev *= 2.0**-1000
                expo += 1000
                e_prev = expo
            if not (math.isfinite(s.real) and math.isfinite(s.imag)):
                raise RangeLimitError("spherical_harmonic", n, (z, w), "recurrence overflow")
    if s == 0:
        return 0.0 + 0.0j, 0.0
    # assemble s * w^m * 2^expo in (mantissa, exponent) form
    log2_mag = math.log2(abs(s)) + expo
    phase = s / abs(s)
    if m > 0:
        aw = abs(w)
        if aw == 0.0:
            return 0.0 + 0.0j, 0.0
        log2_mag += m * math.log2(aw)
        phase *= (w / aw) ** m
    return phase, log2_mag


def double_factorial(n):
    """n!! for odd n >= -1, exact integer arithmetic."""
    out = 1
    while n >= 2:
        out *= n
        n -= 2
    return out


def log_double_factorial(n):
    """log(n!!) for large odd n via lgamma."""
    if n <= 1:
        return 0.0
    if n % 2 == 1:
        ell = (n - 1) // 2
        return math.lgamma(n + 1) - ell * math.log(2.0) - math.lgamma(ell + 1)
    k = n // 2
    return k * math.log(2.0) + math.lgamma(k + 1)
