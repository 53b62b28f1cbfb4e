"""Quasiperiodic lattice sums along a one-dimensional chain.

Covers the closed-form harmonic sum, the Lerch transcendent, the static
dimer sum f(alpha, d) by three independent routes, its d-derivative at the
zone edge, static solid-harmonic image sums and Helmholtz image sums built
from spherical Hankel functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .specfun import radial_all

TWO_PI = 2.0 * math.pi


class LatticeSumError(ArithmeticError):
    """Base class for lattice-sum failures."""


class AnomalyError(LatticeSumError):
    """Raised when alpha*L +- k*L comes too close to 2*pi*Z."""


class TailNotConvergedError(LatticeSumError):
    """Raised when the tail estimate exceeds the configured tolerance."""


@dataclass(frozen=True)
class QuasiMomentum:
    """Quasimomentum alpha in (-pi/L, pi/L] for a chain of period L."""

    alpha: float
    L: float

    def __post_init__(self) -> None:
        if not self.L > 0:
            raise ValueError(f"cell length must be positive, got {self.L}")
        phase = self.alpha * self.L
        if -math.pi < phase <= math.pi:
            return
        wrapped = math.pi - math.fmod(math.pi - phase, TWO_PI)
        if wrapped <= -math.pi:
            wrapped += TWO_PI
        elif wrapped > math.pi:
            wrapped -= TWO_PI
        object.__setattr__(self, "alpha", wrapped / self.L)

    @classmethod
    def from_phase(cls, phase: float, L: float) -> "QuasiMomentum":
        """Build from the dimensionless phase alpha*L."""
        return cls(phase / L, L)

    @property
    def phase(self) -> float:
        return self.alpha * self.L

    def is_zero(self) -> bool:
        return self.alpha == 0.0

    def negated(self) -> "QuasiMomentum":
        return QuasiMomentum(-self.alpha, self.L)


@dataclass(frozen=True)
class LatticeSumConfig:
    """Truncation and tolerance settings for direct image sums."""

    truncation_M: int = 10_000
    tail_tol: float = 1e-8
    anomaly_margin: float = 1e-3

    def __post_init__(self) -> None:
        if self.truncation_M < 1:
            raise ValueError("truncation_M must be >= 1")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if not self.anomaly_margin >= 0:
            raise ValueError("anomaly_margin must be non-negative")


@dataclass(frozen=True)
class LatticeSum:
    """Value of a lattice sum together with its truncation record."""

    value: complex
    truncation_M: int
    tail: complex
    tail_bound: float


# ---------------------------------------------------------------------------
# Closed forms and the Lerch transcendent
# ---------------------------------------------------------------------------


def harmonic_quasi_sum(q: QuasiMomentum) -> float:
    """Sum over m != 0 of exp(i m alpha L)/|m|, equal to -log(2 - 2 cos(alpha L))."""
    if q.is_zero():
        raise ValueError("harmonic quasi sum diverges at alpha = 0")
    # 2 - 2 cos t = 4 sin^2(t/2), which keeps full precision for small t
    return -2.0 * math.log(2.0 * abs(math.sin(0.5 * q.phase)))


def _lerch_series(z: complex, s: float, a: float) -> complex:
    az = abs(z)
    if az == 0.0:
        return complex(a ** (-s))
    n_terms = int(math.ceil(math.log(1e-18) / math.log(az))) + 1
    m = np.arange(n_terms)
    return complex(np.sum(z ** m / (a + m) ** s))


def _lerch_direct(z: complex, s: float, a: float) -> complex:
    # for s >= 5 the terms fall below 1e-17 of the first after a * 1e17^(1/s) steps
    n_terms = int(math.ceil(a * 10.0 ** (17.0 / s))) + 2
    m = np.arange(n_terms, dtype=float)
    terms = np.exp(1j * math.atan2(z.imag, z.real) * m) * abs(z) ** m / (a + m) ** s
    return complex(np.sum(terms[::-1]))


def _one_minus_exp(x: float, theta: float) -> complex:
    """1 - exp(x + i theta), accurate when x + i theta is near zero."""
    em1 = math.expm1(x)
    real = em1 * math.cos(theta) - 2.0 * math.sin(0.5 * theta) ** 2
    return complex(-real, -(em1 + 1.0) * math.sin(theta))


def _lerch_integral(z: complex, s: float, a: float) -> complex:
    # Phi = 1/Gamma(s) * int_0^inf t^(s-1) exp(-a t) / (1 - z exp(-t)) dt
    log_modulus = math.log(abs(z))
    theta = math.atan2(z.imag, z.real)

    def integrand(t: float) -> complex:
        return t ** (s - 1.0) * math.exp(-a * t) / _one_minus_exp(log_modulus - t, theta)

    # upper limit where the integrand has dropped below 1e-17 of its scale
    upper = (40.0 + max(s - 1.0, 0.0) * math.log(40.0 / a + 1.0)) / a
    width = max(abs(theta), 1e-300)
    cuts = {0.0, min(1.0, upper), upper}
    edge = width
    while edge < min(1.0, upper):
        cuts.add(edge)
        edge *= 10.0
    cuts = sorted(cuts)
    total = 0j
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(
            integrand, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400, complex_func=True
        )
        total += val
    return total / math.gamma(s)


def lerch_phi(z: complex, s: float, a: float) -> complex:
    """Lerch transcendent Phi(z, s, a) = sum_{m>=0} z^m / (a + m)^s for |z| <= 1.

    Uses the power series when |z| <= 0.99, direct summation for s >= 5, and
    the Laplace-type integral representation otherwise.
    Points on the branch cut [1, inf) are rejected.
    """
    z = complex(z)
    if not a > 0:
        raise ValueError("Lerch parameter a must be positive")
    if not s > 0:
        raise ValueError("Lerch parameter s must be positive")
    if abs(z) > 1.0 + 1e-12:
        raise ValueError("lerch_phi is implemented for |z| <= 1 only")
    if z.imag == 0.0 and z.real >= 1.0:
        raise ValueError("z lies on the branch cut [1, inf)")
    if abs(z) <= 0.99:
        return _lerch_series(z, s, a)
    if s >= 5.0:
        return _lerch_direct(z, s, a)
    return _lerch_integral(z, s, a)


# ---------------------------------------------------------------------------
# Tails of oscillatory sums
# ---------------------------------------------------------------------------


def oscillatory_tail(w: complex, amplitudes: np.ndarray) -> tuple[complex, float]:
    """Sum_{n>=N} w^n G(n), given G(N), G(N+1), ... for a slowly varying G.

    Repeated summation by parts gives
        w^N/(1-w) * sum_p (w/(1-w))^p Delta^p G(N),
    which converges quickly when N |1-w| is large. Returns the value (with
    the w^N factor removed, i.e. relative to the first index) and an error
    estimate taken from the last retained term.
    """
    ratio = w / (1.0 - w)
    diffs = np.asarray(amplitudes, dtype=complex)
    total = 0j
    factor = 1.0 / (1.0 - w)
    prev = math.inf
    bound = math.inf
    for _ in range(len(amplitudes) - 1):
        term = factor * diffs[0]
        size = abs(term)
        if size > prev:
            break
        total += term
        bound = size
        if size <= 1e-17 * max(abs(total), 1e-300):
            break
        prev = size
        factor *= ratio
        diffs = np.diff(diffs)
    # rounding in the finite differences grows like 2^p; keep it in the bound
    bound += 1e-16 * abs(total) * 2.0 ** 10
    return total, bound


def _distance_to_lattice(phase: float) -> float:
    r = math.fmod(phase, TWO_PI)
    if r < 0:
        r += TWO_PI
    return min(r, TWO_PI - r)


def check_anomaly(k: float, q: QuasiMomentum, margin: float) -> None:
    """Reject (k, alpha) near a Rayleigh anomaly alpha*L +- k*L in 2*pi*Z."""
    for sign in (1.0, -1.0):
        dist = _distance_to_lattice(q.phase + sign * k * q.L)
        if dist < margin:
            raise AnomalyError(
                f"alpha*L={q.phase:.6g}, k*L={k * q.L:.6g} lie within {dist:.3g} "
                f"of a Rayleigh anomaly (margin {margin:g})"
            )


# ---------------------------------------------------------------------------
# Static dimer sum f(alpha, d)
# ---------------------------------------------------------------------------


def _check_d(d: float, L: float) -> None:
    if not 0.0 < d < L:
        raise ValueError(f"separation d={d} must lie strictly inside (0, L={L})")


def _f_lerch(q: QuasiMomentum, d: float) -> complex:
    a = d / q.L
    z = complex(math.cos(q.phase), math.sin(q.phase))
    return lerch_phi(z, 1.0, a) + z.conjugate() * lerch_phi(z.conjugate(), 1.0, 1.0 - a)


def _scaled_sinh(b: float, t: float) -> float:
    """2 exp(-t) sinh(b t) for 0 < b < 1, accurate at small t and finite at large t."""
    if b * t < 20.0:
        return 2.0 * math.exp(-t) * math.sinh(b * t)
    return math.exp((b - 1.0) * t) - math.exp(-(b + 1.0) * t)


def _f_integrand_parts(t: float, a: float, one_minus_c: float) -> tuple[float, float]:
    # sinh(b t)/(cosh t - c) rewritten with exp(-t) scaling to avoid overflow;
    # the denominator is kept as a sum of squares so it never cancels to zero
    e1 = math.exp(-t)
    den = math.expm1(-t) ** 2 + 2.0 * one_minus_c * e1
    s_a = _scaled_sinh(a, t)
    s_b = _scaled_sinh(1.0 - a, t)
    return s_a / den, s_b / den


def _f_integral(q: QuasiMomentum, d: float) -> complex:
    a = d / q.L
    theta = q.phase
    one_minus_c = 2.0 * math.sin(0.5 * theta) ** 2
    decay = 1.0 - max(a, 1.0 - a)
    upper = 42.0 / decay
    width = max(abs(theta), 1e-6)
    cuts = sorted({0.0, min(width, upper), min(1.0, upper), upper})

    def part(t: float, which: int) -> float:
        return _f_integrand_parts(t, a, one_minus_c)[which]

    int_a = 0.0
    int_b = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi <= lo:
            continue
        int_a += integrate.quad(part, lo, hi, args=(0,), epsabs=0.0, epsrel=1e-13, limit=400)[0]
        int_b += integrate.quad(part, lo, hi, args=(1,), epsabs=0.0, epsrel=1e-13, limit=400)[0]
    return complex(math.cos(theta), -math.sin(theta)) * int_a + int_b


def _f_series(q: QuasiMomentum, d: float, M: int) -> complex:
    a = d / q.L
    theta = q.phase
    m = np.arange(-M, M + 1)
    direct = np.sum(np.exp(1j * m * theta) / np.abs(a + m))
    tail_terms = 40
    idx = np.arange(M + 1, M + 1 + tail_terms)
    w_right = complex(math.cos(theta), math.sin(theta))
    right, _ = oscillatory_tail(w_right, 1.0 / (idx + a))
    left, _ = oscillatory_tail(w_right.conjugate(), 1.0 / (idx - a))
    return complex(direct + w_right ** (M + 1) * right + w_right.conjugate() ** (M + 1) * left)


def dimer_sum_f(q: QuasiMomentum, d: float, method: str = "lerch", M: int = 100_000) -> complex:
    """Static dimer sum f(alpha, d) = sum_m exp(i m alpha L)/|d/L + m|.

    method: "lerch" (default), "integral" (Laplace-type integral) or
    "series" (direct sum over |m| <= M with a summation-by-parts tail).
    """
    _check_d(d, q.L)
    if q.is_zero():
        raise ValueError("f(alpha, d) diverges at alpha = 0; use imag_dimer_sum_f")
    if method == "lerch":
        return _f_lerch(q, d)
    if method == "integral":
        return _f_integral(q, d)
    if method == "series":
        return _f_series(q, d, M)
    raise ValueError(f"unknown method {method!r}")


def imag_dimer_sum_f(q: QuasiMomentum, d: float) -> float:
    """Imaginary part of f(alpha, d); finite for every alpha including 0."""
    _check_d(d, q.L)
    theta = q.phase
    s = math.sin(theta)
    if s == 0.0:
        return 0.0
    a = d / q.L
    one_minus_c = 2.0 * math.sin(0.5 * theta) ** 2
    upper = 42.0 / (1.0 - a)
    # the integrand peaks at t ~ |theta|; decade cuts from there up to 1
    width = abs(theta)
    decades = [width * 10.0**p for p in range(int(math.ceil(-math.log10(width))) + 1)] if width < 1.0 else []
    cuts = sorted({0.0, upper, *(min(c, upper) for c in decades + [1.0])})
    val = 0.0
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        if hi > lo:
            val += integrate.quad(
                lambda t: _f_integrand_parts(t, a, one_minus_c)[0], lo, hi, epsabs=0.0, epsrel=1e-13, limit=400
            )[0]
    return -s * val


def dimer_sum_f_dderiv(q: QuasiMomentum, d: float) -> float:
    """d-derivative of f at the zone edge alpha*L = pi.

    Equals -L/d^2 + sum_{m>=1} (-1)^m/L [1/(m - d/L)^2 - 1/(m + d/L)^2]; the
    alternating sums are evaluated as Lerch transcendents at z = -1.
    """
    _check_d(d, q.L)
    if abs(abs(q.phase) - math.pi) > 1e-12:
        raise ValueError("the derivative formula holds at alpha*L = pi only")
    a = d / q.L
    L = q.L
    minus = -lerch_phi(-1.0, 2.0, 1.0 - a).real
    plus = -lerch_phi(-1.0, 2.0, 1.0 + a).real
    return -L / (d * d) + (minus - plus) / L


# ---------------------------------------------------------------------------
# Static solid-harmonic image sums
# ---------------------------------------------------------------------------


def static_image_sum(lam: int, offset: float, q: QuasiMomentum) -> complex:
    """Sum over images n of exp(i n alpha L) sign(b_n)^lam / |b_n|^(lam+1).

    Here b_n = offset - n L with |offset| < L; the n with b_n = 0 is left out.
    For lam = 0 and offset = 0 this is harmonic_quasi_sum / L, and for
    offset = -d it is f(alpha, d) / L.
    """
    L = q.L
    if abs(offset) >= L:
        raise ValueError("offset must satisfy |offset| < L")
    if lam == 0 and q.is_zero():
        raise ValueError("the lam = 0 image sum diverges at alpha = 0")
    a = offset / L
    theta = q.phase
    z = complex(math.cos(theta), math.sin(theta))
    s = lam + 1.0
    sign_neg = -1.0 if lam % 2 else 1.0
    # images with b_n < 0: n > a
    n_plus = math.floor(a) + 1
    right = sign_neg * z ** n_plus * lerch_phi(z, s, n_plus - a)
    # images with b_n > 0: n < a
    n_minus = math.ceil(a) - 1
    left = z ** n_minus * lerch_phi(z.conjugate(), s, a - n_minus)
    return (right + left) / L**s


# ---------------------------------------------------------------------------
# Helmholtz image sums
# ---------------------------------------------------------------------------


def _hankel_envelope(lam_max: int, x: np.ndarray) -> np.ndarray:
    """g_lam(x) = exp(-i x) h_lam^(1)(x), from the terminating asymptotic series."""
    out = np.empty((lam_max + 1,) + x.shape, dtype=complex)
    inv = 1j / (2.0 * x)
    for lam in range(lam_max + 1):
        acc = np.zeros_like(x, dtype=complex)
        power = np.ones_like(x, dtype=complex)
        for j in range(lam + 1):
            coef = math.factorial(lam + j) / (math.factorial(j) * math.factorial(lam - j))
            acc = acc + coef * power
            power = power * inv
        out[lam] = (-1j) ** (lam + 1) * acc / x
    return out


_KIND_WEIGHTS = {
    # (weight of h1, weight of h2) with h2 = conj(h1) on the real axis
    "h": (1.0, 0.0),
    "j": (0.5, 0.5),
    "iy": (0.5, -0.5),
}


def helmholtz_image_sums(
    kind: str,
    lam_max: int,
    k: float,
    q: QuasiMomentum,
    offset: float = 0.0,
    cfg: LatticeSumConfig | None = None,
) -> tuple[np.ndarray, float]:
    """S_lam = sum_n F_lam(k |b_n|) sign(b_n)^lam exp(i n alpha L), lam = 0..lam_max.

    b_n = offset - n L; F is h^(1) ("h"), j ("j") or i*y ("iy"). The image
    with b_n = 0 is excluded. Images with |n| <= M are summed directly and
    the remainder is added through a summation-by-parts tail. Returns the
    sums and the tail error estimate.
    """
    cfg = cfg or LatticeSumConfig()
    if kind not in _KIND_WEIGHTS:
        raise ValueError(f"unknown kind {kind!r}")
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    L = q.L
    if abs(offset) >= L:
        raise ValueError("offset must satisfy |offset| < L")
    check_anomaly(k, q, cfg.anomaly_margin)
    M = cfg.truncation_M
    theta = q.phase

    n = np.arange(-M, M + 1)
    b = offset - n * L
    keep = b != 0.0
    n, b = n[keep], b[keep]
    r = np.abs(b)
    radial = radial_all(kind, lam_max, k * r)
    sign = np.where(b > 0, 1.0, -1.0)
    lam_idx = np.arange(lam_max + 1)[:, None]
    phase = np.exp(1j * n * theta)
    direct = np.sum(radial * sign[None, :] ** lam_idx * phase[None, :], axis=1)

    w1, w2 = _KIND_WEIGHTS[kind]
    tail = np.zeros(lam_max + 1, dtype=complex)
    bound = 0.0
    n_terms = 30
    p = np.arange(M + 1, M + 1 + n_terms)
    # right side: n = p > M, b = offset - pL < 0, r = pL - offset
    # left side:  n = -p,   b = offset + pL > 0, r = pL + offset
    for side_sign, r_side, dir_sign, alpha_sign in (
        (+1, p * L - offset, -1.0, +1.0),
        (-1, p * L + offset, +1.0, -1.0),
    ):
        env = _hankel_envelope(lam_max, k * r_side)
        shift = -side_sign * offset  # r = pL + shift
        for weight, conj in ((w1, False), (w2, True)):
            if weight == 0.0:
                continue
            wave = -1.0 if conj else 1.0
            w = complex(math.cos(wave * k * L + alpha_sign * theta), math.sin(wave * k * L + alpha_sign * theta))
            lead = w ** (M + 1) * complex(math.cos(wave * k * shift), math.sin(wave * k * shift))
            for lam in range(lam_max + 1):
                amp = np.conj(env[lam]) if conj else env[lam]
                val, err = oscillatory_tail(w, amp)
                tail[lam] += weight * dir_sign**lam * lead * val
                bound = max(bound, abs(weight) * err)
    return direct + tail, bound


def helmholtz_lattice_sum_Q(
    lam: int,
    mu: int,
    k: float,
    q: QuasiMomentum,
    cfg: LatticeSumConfig | None = None,
) -> LatticeSum:
    """Q_lam^mu = sum_{n != 0} h_lam(k|n|L) Y_lam^mu(theta_n) exp(i n alpha L).

    theta_n is the polar angle of the shift from image n to the origin, i.e.
    pi for n > 0 and 0 for n < 0. The value vanishes for mu != 0 because the
    harmonics are evaluated on the polar axis.
    """
    cfg = cfg or LatticeSumConfig()
    if lam < 0 or abs(mu) > lam:
        raise ValueError("invalid angular index")
    if mu != 0:
        return LatticeSum(0j, cfg.truncation_M, 0j, 0.0)
    sums, bound = helmholtz_image_sums("h", lam, k, q, 0.0, cfg)
    if bound > cfg.tail_tol:
        raise TailNotConvergedError(
            f"tail estimate {bound:.3g} exceeds tolerance {cfg.tail_tol:.3g} at M={cfg.truncation_M}"
        )
    norm = math.sqrt((2 * lam + 1) / (4.0 * math.pi))
    value = complex(norm * sums[lam])
    # report the tail separately for diagnostics
    no_tail_cfg_sum = _direct_only_Q(lam, k, q, cfg.truncation_M)
    return LatticeSum(value, cfg.truncation_M, value - norm * no_tail_cfg_sum, bound)


def _direct_only_Q(lam: int, k: float, q: QuasiMomentum, M: int) -> complex:
    n = np.concatenate([np.arange(-M, 0), np.arange(1, M + 1)])
    r = np.abs(n) * q.L
    h = radial_all("h", lam, k * r)[lam]
    sign = np.where(n > 0, -1.0, 1.0) ** lam
    return complex(np.sum(h * sign * np.exp(1j * n * q.phase)))
