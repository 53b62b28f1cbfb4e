"""Special-function kernels for spherical multipole expansions.

Spherical Bessel and Hankel functions of real argument, orthonormal
spherical harmonics (Condon-Shortley phase), Wigner 3j symbols and the
translation coefficients of the scalar addition theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_SERIES_CUTOFF = 0.5


@dataclass(frozen=True)
class AngularIndex:
    """Degree/order pair (l, m) with |m| <= l."""

    l: int
    m: int

    def __post_init__(self) -> None:
        if self.l < 0:
            raise ValueError(f"degree must be non-negative, got l={self.l}")
        if abs(self.m) > self.l:
            raise ValueError(f"order out of range: |m|={abs(self.m)} > l={self.l}")


# ---------------------------------------------------------------------------
# Spherical Bessel functions
# ---------------------------------------------------------------------------


def _j_series(lmax: int, x: np.ndarray) -> np.ndarray:
    """Power series of j_0..j_lmax, accurate for x < 0.5."""
    out = np.empty((lmax + 1,) + x.shape)
    half_x2 = -0.5 * x * x
    for l in range(lmax + 1):
        lead = np.ones_like(x)
        dfact = 1.0
        for i in range(1, l + 1):
            lead = lead * x
            dfact *= 2 * i + 1
        lead = lead / dfact
        term = np.ones_like(x)
        total = np.ones_like(x)
        for k in range(1, 30):
            term = term * half_x2 / (k * (2 * l + 2 * k + 1))
            total = total + term
            if np.all(np.abs(term) < 1e-18 * np.abs(total)):
                break
        out[l] = lead * total
    return out


def _j_miller(lmax: int, x: np.ndarray) -> np.ndarray:
    """Downward recurrence normalised by sum (2n+1) j_n^2 = 1."""
    xmax = float(np.max(x))
    start = lmax + int(xmax + 12.0 * xmax ** (1.0 / 3.0)) + 40
    vals = np.zeros((start + 2,) + x.shape)
    vals[start] = 1e-30
    for n in range(start, 0, -1):
        vals[n - 1] = (2 * n + 1) / x * vals[n] - vals[n + 1]
        big = np.abs(vals[n - 1]) > 1e200
        if np.any(big):
            vals[:, big] *= 1e-200
    scale = np.max(np.abs(vals), axis=0)
    scaled = vals / scale
    orders = np.arange(start + 2).reshape((-1,) + (1,) * x.ndim)
    norm = np.sqrt(np.sum((2 * orders + 1) * scaled * scaled, axis=0))
    return scaled[: lmax + 1] / norm


def _j_upward(lmax: int, x: np.ndarray) -> np.ndarray:
    out = np.empty((lmax + 1,) + x.shape)
    s, c = np.sin(x), np.cos(x)
    out[0] = s / x
    if lmax >= 1:
        out[1] = s / (x * x) - c / x
    for n in range(1, lmax):
        out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def spherical_jn_all(lmax: int, x) -> np.ndarray:
    """Return j_0(x) .. j_lmax(x) stacked along a new leading axis.

    Upward recurrence is used where n <= x, Miller's downward recurrence
    where n > x, and a power series for x < 0.5.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("spherical_jn_all requires x >= 0")
    out = np.zeros((lmax + 1,) + x.shape)
    flat_x = x.reshape(-1)
    flat_out = out.reshape(lmax + 1, -1)
    small = flat_x < _SERIES_CUTOFF
    if np.any(small):
        flat_out[:, small] = _j_series(lmax, flat_x[small])
    large = ~small
    if np.any(large):
        xl = flat_x[large]
        up = _j_upward(lmax, xl)
        # downward recurrence only where some order exceeds the argument
        needs_down = xl < lmax
        if np.any(needs_down):
            down = _j_miller(lmax, xl[needs_down])
            orders = np.arange(lmax + 1)[:, None]
            up[:, needs_down] = np.where(orders <= xl[needs_down][None, :], up[:, needs_down], down)
        flat_out[:, large] = up
    return out


def spherical_yn_all(lmax: int, x) -> np.ndarray:
    """Return y_0(x) .. y_lmax(x) by upward recurrence (x > 0)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("spherical_yn_all requires x > 0")
    out = np.empty((lmax + 1,) + x.shape)
    s, c = np.sin(x), np.cos(x)
    out[0] = -c / x
    if lmax >= 1:
        out[1] = -c / (x * x) - s / x
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, lmax):
            out[n + 1] = (2 * n + 1) / x * out[n] - out[n - 1]
    return out


def _derivative_from_orders(vals: np.ndarray, x: np.ndarray, kind: str) -> np.ndarray:
    """f_l'(x) = f_{l-1}(x) - (l+1)/x f_l(x), with f_0' = -f_1."""
    lmax = vals.shape[0] - 2
    out = np.empty((lmax + 1,) + x.shape, dtype=vals.dtype)
    out[0] = -vals[1]
    for l in range(1, lmax + 1):
        if kind == "j":
            # avoid 0/0 at the origin: j_l'(0) = 1/3 for l = 1, else 0
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(x > 0, vals[l] / np.where(x > 0, x, 1.0), 0.0)
            out[l] = vals[l - 1] - (l + 1) * ratio
            if l == 1:
                out[l] = np.where(x > 0, out[l], 1.0 / 3.0)
        else:
            out[l] = vals[l - 1] - (l + 1) / x * vals[l]
    return out


def spherical_jn_deriv_all(lmax: int, x) -> np.ndarray:
    """Derivatives j_l'(x) for l = 0..lmax."""
    x = np.asarray(x, dtype=float)
    return _derivative_from_orders(spherical_jn_all(lmax + 1, x), x, "j")


def spherical_yn_deriv_all(lmax: int, x) -> np.ndarray:
    """Derivatives y_l'(x) for l = 0..lmax."""
    x = np.asarray(x, dtype=float)
    return _derivative_from_orders(spherical_yn_all(lmax + 1, x), x, "y")


def spherical_bessel_j(l: int, x):
    """Spherical Bessel function j_l(x) for x >= 0."""
    if l < 0:
        raise ValueError("l must be non-negative")
    return spherical_jn_all(l, x)[l]


def spherical_bessel_y(l: int, x):
    """Spherical Bessel function of the second kind y_l(x), x > 0."""
    if l < 0:
        raise ValueError("l must be non-negative")
    return spherical_yn_all(l, x)[l]


def spherical_hankel_h1(l: int, x):
    """Spherical Hankel function h_l^(1)(x) = j_l(x) + i y_l(x), x > 0."""
    if l < 0:
        raise ValueError("l must be non-negative")
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("spherical Hankel function is singular at x <= 0")
    return spherical_jn_all(l, x)[l] + 1j * spherical_yn_all(l, x)[l]


def radial_all(kind: str, lmax: int, x) -> np.ndarray:
    """Radial functions of a given kind for orders 0..lmax.

    kind is one of "j" (regular), "y" (second kind), "h" (outgoing Hankel)
    or "iy" (i times y, the standing-wave part of the Hankel function).
    """
    if kind == "j":
        return spherical_jn_all(lmax, x)
    if kind == "y":
        return spherical_yn_all(lmax, x)
    if kind == "h":
        return spherical_jn_all(lmax, x) + 1j * spherical_yn_all(lmax, x)
    if kind == "iy":
        return 1j * spherical_yn_all(lmax, x)
    raise ValueError(f"unknown radial kind {kind!r}")


def radial_deriv_all(kind: str, lmax: int, x) -> np.ndarray:
    """Derivatives of radial_all(kind, lmax, x) with respect to x."""
    if kind == "j":
        return spherical_jn_deriv_all(lmax, x)
    if kind == "y":
        return spherical_yn_deriv_all(lmax, x)
    if kind == "h":
        return spherical_jn_deriv_all(lmax, x) + 1j * spherical_yn_deriv_all(lmax, x)
    if kind == "iy":
        return 1j * spherical_yn_deriv_all(lmax, x)
    raise ValueError(f"unknown radial kind {kind!r}")


# ---------------------------------------------------------------------------
# Spherical harmonics
# ---------------------------------------------------------------------------


def _normalized_legendre(lmax: int, m: int, cos_t, sin_t) -> np.ndarray:
    """Normalised associated Legendre values for degrees m..lmax at order m >= 0.

    Includes the Condon-Shortley phase and the 1/sqrt(4 pi) factor so that
    Y_l^m = P[l] * exp(i m phi).
    """
    p_mm = np.full_like(cos_t, 1.0 / math.sqrt(4.0 * math.pi))
    for i in range(1, m + 1):
        p_mm = -math.sqrt((2 * i + 1) / (2.0 * i)) * sin_t * p_mm
    out = np.zeros((lmax + 1,) + np.shape(cos_t))
    if lmax < m:
        return out
    out[m] = p_mm
    if lmax == m:
        return out
    out[m + 1] = math.sqrt(2 * m + 3) * cos_t * p_mm
    for l in range(m + 2, lmax + 1):
        a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
        b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
        out[l] = a * (cos_t * out[l - 1] - b * out[l - 2])
    return out


def spherical_harmonic(l, m=None, theta=0.0, phi=0.0):
    """Orthonormal spherical harmonic Y_l^m(theta, phi), Condon-Shortley phase.

    Accepts either ``spherical_harmonic(AngularIndex(l, m), theta, phi)`` or
    ``spherical_harmonic(l, m, theta, phi)``.
    """
    if isinstance(l, AngularIndex):
        idx = l
        if m is not None:
            theta, phi = m, theta
    else:
        idx = AngularIndex(int(l), int(m))
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    am = abs(idx.m)
    p = _normalized_legendre(idx.l, am, np.cos(theta), np.sin(theta))[idx.l]
    value = p * np.exp(1j * am * phi)
    if idx.m < 0:
        value = (-1) ** am * np.conj(value)
    return value[()] if np.ndim(value) == 0 else value


def axial_harmonic(lam: int, direction: int) -> float:
    """Y_lam^0 on the polar axis: direction +1 is theta = 0, -1 is theta = pi."""
    return math.sqrt((2 * lam + 1) / (4.0 * math.pi)) * (1 if direction > 0 else (-1) ** lam)


# ---------------------------------------------------------------------------
# Wigner 3j symbols and translation coefficients
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


@lru_cache(maxsize=65536)
def wigner3j(j1: int, j2: int, j3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol for integer arguments via the Racah single sum."""
    if m1 + m2 + m3 != 0:
        return 0.0
    if j3 < abs(j1 - j2) or j3 > j1 + j2:
        return 0.0
    if abs(m1) > j1 or abs(m2) > j2 or abs(m3) > j3:
        return 0.0
    if m1 == 0 and m2 == 0 and m3 == 0 and (j1 + j2 + j3) % 2 == 1:
        return 0.0
    lf = _log_factorial
    log_tri = lf(j1 + j2 - j3) + lf(j1 - j2 + j3) + lf(-j1 + j2 + j3) - lf(j1 + j2 + j3 + 1)
    log_pref = 0.5 * (
        log_tri
        + lf(j1 + m1) + lf(j1 - m1)
        + lf(j2 + m2) + lf(j2 - m2)
        + lf(j3 + m3) + lf(j3 - m3)
    )
    k_min = max(0, j2 - j3 - m1, j1 - j3 + m2)
    k_max = min(j1 + j2 - j3, j1 - m1, j2 + m2)
    total = 0.0
    for k in range(k_min, k_max + 1):
        log_den = (
            lf(k) + lf(j3 - j2 + k + m1) + lf(j3 - j1 + k - m2)
            + lf(j1 + j2 - j3 - k) + lf(j1 - k - m1) + lf(j2 - k + m2)
        )
        term = math.exp(log_pref - log_den)
        total += -term if k % 2 else term
    sign = -1.0 if (j1 - j2 - m3) % 2 else 1.0
    return sign * total


@lru_cache(maxsize=65536)
def translation_coeff_C(l: int, m: int, lp: int, mp: int, lam: int, mu: int) -> complex:
    """Gaunt-type coupling coefficient C(l, m, l', m', lambda, mu)."""
    w2 = wigner3j(l, lp, lam, -m, mp, mu)
    if w2 == 0.0:
        return 0j
    w1 = wigner3j(l, lp, lam, 0, 0, 0)
    if w1 == 0.0:
        return 0j
    phase = 1j ** ((lp - l + lam) % 4)
    sign = -1.0 if m % 2 else 1.0
    pref = math.sqrt(4.0 * math.pi * (2 * l + 1) * (2 * lp + 1) * (2 * lam + 1))
    return phase * sign * pref * w1 * w2


def translation_coeff_A(
    l: int,
    m: int,
    lp: int,
    mp: int,
    k: float,
    r_b: float,
    theta_b: float = 0.0,
    phi_b: float = 0.0,
    kind: str = "h",
) -> complex:
    """Addition-theorem coefficient A_{l'm'}^{lm} for a shift b.

    With x = x' + b and r' < |b|,
        f_l(k r) Y_l^m(x/r) = sum_{l'm'} A_{l'm'}^{lm} j_{l'}(k r') Y_{l'}^{m'}(x'/r'),
    where f is the outgoing Hankel function for kind="h" (singular to
    regular translation) and j for kind="j" (regular to regular).
    The lambda sum is finite: |l - l'| <= lambda <= l + l'.
    """
    if r_b <= 0:
        raise ValueError("translation distance must be positive")
    mu = m - mp
    lam_max = l + lp
    radial = radial_all(kind, lam_max, k * r_b)
    total = 0j
    for lam in range(abs(l - lp), lam_max + 1):
        if abs(mu) > lam:
            continue
        c = translation_coeff_C(l, m, lp, mp, lam, mu)
        if c == 0:
            continue
        total += c * radial[lam] * spherical_harmonic(lam, mu, theta_b, phi_b)
    return complex(total)
