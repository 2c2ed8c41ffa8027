"""Kinetics, nonlinear diffusion laws, clamped coefficients and the equilibrium solver.

The reversible surface reaction follows mass-action kinetics with rate density

    f(u, v) = k * (u**alpha - kappa * v**beta),

which, for positive concentrations, can equivalently be written through the
logarithmic mean of the two "pressures" a = u**alpha and b = kappa * v**beta:

    f(u, v) = k * LogMean(a, b) * (alpha*log(u/u_star) - beta*log(v/v_star)),

the form that exposes the entropy-producing structure of the reaction.  The
unique positive equilibrium (u_star, v_star) of a given conserved mass m
solves the pair

    m = beta*|Omega|*u_star + alpha*|Gamma|*v_star,
    u_star**alpha = kappa * v_star**beta.

Diffusion coefficients are always evaluated at concentrations clamped to a
window around the equilibrium, which keeps them uniformly bounded and elliptic
no matter what a nonlinear solver iterate looks like; in a healthy run the
clamp never activates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_LOG_MEAN_RIDGE = 1e-8  # switch to the series expansion when |a-b| <= ridge*max(a,b)

_BULK_KINDS = ("power", "exponential", "constant")
_SURFACE_KINDS = _BULK_KINDS + ("surface_cross",)


@dataclass(frozen=True)
class Kinetics:
    """Mass-action reaction parameters.

    k : forward rate constant (> 0)
    kappa : backward-to-forward rate ratio (> 0)
    alpha : bulk stoichiometric exponent (>= 1)
    beta : surface stoichiometric exponent (>= 1)
    """

    k: float
    kappa: float
    alpha: float
    beta: float

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.kappa <= 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.alpha < 1 or self.beta < 1:
            raise ValueError(
                f"stoichiometric exponents must be >= 1, got alpha={self.alpha}, beta={self.beta}"
            )


@dataclass(frozen=True)
class Equilibrium:
    """Positive equilibrium pair and the conserved weighted mass it realizes."""

    u_star: float
    v_star: float
    mass: float


@dataclass(frozen=True)
class DiffusionLaw:
    """One diffusion coefficient: a named nonlinearity plus its parameter.

    kind : "power" (c -> c**param), "exponential" (c -> exp(param*c)),
           "constant" (-> param), or "surface_cross"
           ((u, v) -> v / (alpha*u + beta*v)).
    role : "bulk" (argument is the bulk concentration) or "surface".
           Single-argument surface laws act on the surface concentration;
           "surface_cross" uses the bulk trace and the surface value and is
           only meaningful in the surface role.
    """

    kind: str
    param: float = 0.0
    role: str = "bulk"
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.role not in ("bulk", "surface"):
            raise ValueError(f"role must be 'bulk' or 'surface', got {self.role!r}")
        allowed = _SURFACE_KINDS if self.role == "surface" else _BULK_KINDS
        if self.kind not in allowed:
            raise ValueError(f"{self.kind!r} is not a valid {self.role} diffusion law")
        if self.kind == "constant" and self.param <= 0:
            raise ValueError(f"constant diffusion coefficient must be positive, got {self.param}")
        if self.kind == "surface_cross" and (self.alpha <= 0 or self.beta <= 0):
            raise ValueError("surface_cross requires positive alpha and beta")


def power_law(gamma: float, role: str = "bulk") -> DiffusionLaw:
    return DiffusionLaw(kind="power", param=gamma, role=role)


def exponential_law(delta: float, role: str = "bulk") -> DiffusionLaw:
    return DiffusionLaw(kind="exponential", param=delta, role=role)


def constant_law(value: float, role: str = "bulk") -> DiffusionLaw:
    return DiffusionLaw(kind="constant", param=value, role=role)


def surface_cross_law(kin: Kinetics) -> DiffusionLaw:
    """Cross-diffusion coefficient v / (alpha*u + beta*v) on the surface."""
    return DiffusionLaw(kind="surface_cross", role="surface", alpha=kin.alpha, beta=kin.beta)


@dataclass(frozen=True)
class ClampWindow:
    """Envelope window (lower, upper) in the (u/u_star)**alpha scale.

    Concentrations fed to diffusion laws are clamped so that the normalized
    pressure stays in (lower/2, 2*upper).  The surface clamp condition uses
    exponent alpha on (v/v_star) by default (``v_exponent="alpha"``); set
    ``v_exponent="beta"`` to clamp v on its own (v/v_star)**beta scale
    instead.  The envelope *verification* quantities always use the beta
    scale for v, independent of this switch.
    """

    lower: float
    upper: float
    u_star: float
    v_star: float
    alpha: float
    beta: float
    v_exponent: str = "alpha"

    def __post_init__(self):
        if not (0 < self.lower <= self.upper):
            raise ValueError(f"need 0 < lower <= upper, got ({self.lower}, {self.upper})")
        if not (math.isfinite(self.upper)):
            raise ValueError("upper envelope must be finite")
        if self.u_star <= 0 or self.v_star <= 0:
            raise ValueError("equilibrium references must be positive")
        if self.v_exponent not in ("alpha", "beta"):
            raise ValueError(f"v_exponent must be 'alpha' or 'beta', got {self.v_exponent!r}")

    @property
    def _v_exp(self) -> float:
        return self.alpha if self.v_exponent == "alpha" else self.beta


def window_from_initial_data(
    u0: np.ndarray,
    v0: np.ndarray,
    eq: Equilibrium,
    kin: Kinetics,
    v_exponent: str = "alpha",
) -> ClampWindow:
    """Envelope window implied by strictly positive initial data.

    With c_u = min(u0)/u_star, C_u = max(u0)/u_star and c_v, C_v likewise,

        lower = min(c_u**alpha, kappa * c_v**beta),
        upper = max(C_u**alpha, C_v**beta).
    """
    u0 = np.asarray(u0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if u0.size == 0 or v0.size == 0:
        raise ValueError("initial data must be nonempty")
    if np.min(u0) <= 0 or np.min(v0) <= 0:
        raise ValueError("initial data must be strictly positive")
    c_u = float(np.min(u0)) / eq.u_star
    C_u = float(np.max(u0)) / eq.u_star
    c_v = float(np.min(v0)) / eq.v_star
    C_v = float(np.max(v0)) / eq.v_star
    lower = min(c_u**kin.alpha, kin.kappa * c_v**kin.beta)
    upper = max(C_u**kin.alpha, C_v**kin.beta)
    return ClampWindow(
        lower=lower,
        upper=upper,
        u_star=eq.u_star,
        v_star=eq.v_star,
        alpha=kin.alpha,
        beta=kin.beta,
        v_exponent=v_exponent,
    )


def log_mean(a, b):
    """Logarithmic mean: (a-b)/(log a - log b), 0 if either argument is 0, a if a=b.

    Evaluated branchwise for uniform accuracy (a few ulps everywhere):

    * ridge, |a-b| <= 1e-8*max(a,b): the quotient cancels catastrophically,
      so use the expansion around the midpoint mbar = (a+b)/2 with
      r = (a-b)/(a+b):  LogMean = mbar * (1 - r**2/3 - 4*r**4/45 + O(r**6));
    * ratio at most 2: hi - lo is exact there, so (hi-lo)/log1p((hi-lo)/lo)
      carries no cancellation;
    * far apart: the plain quotient (hi-lo)/(log hi - log lo) is benign.

    Accepts scalars or arrays; negative input is rejected.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr < 0) or np.any(b_arr < 0):
        raise ValueError("log_mean requires nonnegative arguments")
    hi = np.maximum(a_arr, b_arr)
    lo = np.minimum(a_arr, b_arr)
    zero = lo == 0
    diff = hi - lo
    near = diff <= _LOG_MEAN_RIDGE * hi

    s = a_arr + b_arr
    r = np.where(s > 0, diff / np.where(s > 0, s, 1.0), 0.0)
    r2 = r * r
    series = 0.5 * s * (1.0 - r2 / 3.0 - 4.0 * r2 * r2 / 45.0)

    lo_safe = np.where(zero | near, 1.0, lo)
    hi_safe = np.where(zero | near, 2.0, hi)
    diff_safe = hi_safe - lo_safe
    close = hi_safe <= 2.0 * lo_safe
    ratio = diff_safe / np.where(close, lo_safe, 1.0)  # guarded against overflow
    denom = np.where(
        close,
        np.log1p(ratio),
        np.log(hi_safe) - np.log(lo_safe),
    )
    quot = diff_safe / denom

    out = np.where(zero, 0.0, np.where(near, series, quot))
    if np.isscalar(a) and np.isscalar(b):
        return float(out)
    return out


def rate(u, v, kin: Kinetics):
    """Mass-action rate density k*(u**alpha - kappa*v**beta) for nonnegative u, v.

    Negative arguments with fractional exponents are undefined here; use
    safe_rate for a total function.
    """
    return kin.k * (u**kin.alpha - kin.kappa * v**kin.beta)


def safe_rate(u, v, kin: Kinetics):
    """Rate guarded on the closed positive quadrant: 0 whenever u <= 0 or v <= 0."""
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    pos = (u_arr > 0) & (v_arr > 0)
    u_safe = np.where(pos, u_arr, 1.0)
    v_safe = np.where(pos, v_arr, 1.0)
    out = np.where(pos, rate(u_safe, v_safe, kin), 0.0)
    if np.isscalar(u) and np.isscalar(v):
        return float(out)
    return out


def potential_rate(u, v, kin: Kinetics, eq: Equilibrium):
    """Rate in chemical-potential form, valid for strictly positive u, v:

        k * LogMean(u**alpha, kappa*v**beta)
          * (alpha*log(u/u_star) - beta*log(v/v_star)).

    Agrees with rate(u, v) to high relative accuracy; the two evaluations are
    kept independent so the identity can be tested.
    """
    u_arr = np.asarray(u, dtype=float)
    v_arr = np.asarray(v, dtype=float)
    if np.any(u_arr <= 0) or np.any(v_arr <= 0):
        raise ValueError("potential_rate requires strictly positive concentrations")
    lam = log_mean(u_arr**kin.alpha, kin.kappa * v_arr**kin.beta)
    pot = kin.alpha * np.log(u_arr / eq.u_star) - kin.beta * np.log(v_arr / eq.v_star)
    out = kin.k * lam * pot
    if np.isscalar(u) and np.isscalar(v):
        return float(out)
    return out


def _clamp_one(c, star: float, exponent: float, window: ClampWindow):
    """Clamp concentrations so (c/star)**exponent lies in [lower/2, 2*upper].

    Nonpositive input falls on the lower cap; the comparison is done on c
    against precomputed cap concentrations, so fractional powers are never
    evaluated at negative arguments.
    """
    lo = star * (0.5 * window.lower) ** (1.0 / exponent)
    hi = star * (2.0 * window.upper) ** (1.0 / exponent)
    return np.minimum(np.maximum(c, lo), hi)


def clamp_state(u, v, window: ClampWindow):
    """Clamped pair (u_hat, v_hat) used as diffusion-law arguments.

    v may be None when only the bulk concentration is needed.
    """
    u_hat = _clamp_one(np.asarray(u, dtype=float), window.u_star, window.alpha, window)
    if np.isscalar(u):
        u_hat = float(u_hat)
    if v is None:
        return u_hat, None
    v_hat = _clamp_one(np.asarray(v, dtype=float), window.v_star, window._v_exp, window)
    if np.isscalar(v):
        v_hat = float(v_hat)
    return u_hat, v_hat


def _law_value(law: DiffusionLaw, c, other=None):
    """Raw law evaluation at already-clamped arguments.

    For surface_cross, c is the bulk trace and other the surface value.
    """
    if law.kind == "power":
        return c**law.param
    if law.kind == "exponential":
        return np.exp(law.param * c)
    if law.kind == "constant":
        return np.full_like(np.asarray(c, dtype=float), law.param) if not np.isscalar(c) else law.param
    # surface_cross
    return other / (law.alpha * c + law.beta * other)


def _law_derivatives(law: DiffusionLaw, c, other=None):
    """(d/dc, d/dother) of the raw law at clamped arguments; None where absent."""
    if law.kind == "power":
        return law.param * c ** (law.param - 1.0), None
    if law.kind == "exponential":
        return law.param * np.exp(law.param * c), None
    if law.kind == "constant":
        z = np.zeros_like(np.asarray(c, dtype=float))
        return z, None
    den = law.alpha * c + law.beta * other
    return -law.alpha * other / den**2, law.alpha * c / den**2


def diffusion_coefficient(law: DiffusionLaw, u, v, window: ClampWindow):
    """Coefficient evaluated at clamped arguments, total in (u, v).

    Bulk-role laws see the clamped bulk value; single-argument surface laws
    see the clamped surface value; surface_cross sees both.
    """
    scalar = np.isscalar(u) and (v is None or np.isscalar(v))
    if law.role == "bulk":
        u_hat = _clamp_one(np.asarray(u, dtype=float), window.u_star, window.alpha, window)
        out = _law_value(law, u_hat)
    elif law.kind == "surface_cross":
        u_hat = _clamp_one(np.asarray(u, dtype=float), window.u_star, window.alpha, window)
        v_hat = _clamp_one(np.asarray(v, dtype=float), window.v_star, window._v_exp, window)
        out = _law_value(law, u_hat, v_hat)
    else:
        if v is None:
            raise ValueError("surface-role law requires the surface concentration")
        v_hat = _clamp_one(np.asarray(v, dtype=float), window.v_star, window._v_exp, window)
        out = _law_value(law, v_hat)
    if scalar:
        return float(out)
    return out


def coefficient_bounds(law: DiffusionLaw, window: ClampWindow) -> tuple[float, float]:
    """Extrema of the clamped coefficient over the whole window.

    Every supported law is monotone in each argument on the positive axis, so
    the extrema sit at window corners.
    """
    u_lo = window.u_star * (0.5 * window.lower) ** (1.0 / window.alpha)
    u_hi = window.u_star * (2.0 * window.upper) ** (1.0 / window.alpha)
    v_lo = window.v_star * (0.5 * window.lower) ** (1.0 / window._v_exp)
    v_hi = window.v_star * (2.0 * window.upper) ** (1.0 / window._v_exp)
    if law.kind == "surface_cross":
        corners = [
            _law_value(law, cu, cv) for cu in (u_lo, u_hi) for cv in (v_lo, v_hi)
        ]
    else:
        lo, hi = (v_lo, v_hi) if law.role == "surface" else (u_lo, u_hi)
        corners = [_law_value(law, lo), _law_value(law, hi)]
    return float(min(corners)), float(max(corners))


def solve_equilibrium(
    kin: Kinetics,
    mass: float,
    omega_measure: float,
    gamma_measure: float,
    tol: float = 1e-15,
) -> Equilibrium:
    """Unique positive equilibrium for a given conserved weighted mass.

    Solves g(v) = beta*|Omega|*kappa**(1/alpha)*v**(beta/alpha)
                  + alpha*|Gamma|*v - m = 0,
    which is strictly increasing from -m at v=0, by bisection on
    (0, m/(alpha*|Gamma|)] followed by a Newton polish, then recovers
    u_star = kappa**(1/alpha) * v_star**(beta/alpha).
    """
    if mass <= 0:
        raise ValueError(f"equilibrium requires positive mass, got {mass}")
    if omega_measure <= 0 or gamma_measure <= 0:
        raise ValueError("domain measures must be positive")

    kroot = kin.kappa ** (1.0 / kin.alpha)
    expo = kin.beta / kin.alpha
    cb = kin.beta * omega_measure * kroot
    cg = kin.alpha * gamma_measure

    def g(v: float) -> float:
        return cb * v**expo + cg * v - mass

    def gprime(v: float) -> float:
        return cb * expo * v ** (expo - 1.0) + cg

    v_hi = mass / cg
    v_lo = 0.0  # g -> -mass as v -> 0+
    for _ in range(200):
        v_mid = 0.5 * (v_lo + v_hi)
        if g(v_mid) > 0:
            v_hi = v_mid
        else:
            v_lo = v_mid
        if v_hi - v_lo <= tol * v_hi:
            break
    v_star = 0.5 * (v_lo + v_hi)
    for _ in range(8):
        dv = g(v_star) / gprime(v_star)
        v_new = v_star - dv
        if v_new <= 0:
            break
        v_star = v_new
        if abs(dv) <= 1e-16 * v_star:
            break

    u_star = kroot * v_star**expo
    return Equilibrium(u_star=float(u_star), v_star=float(v_star), mass=float(mass))


def combine_face(mu_a, mu_b, face_average: str = "arithmetic"):
    """Combine the two cell-side coefficients of a face into one face value."""
    if face_average == "arithmetic":
        return 0.5 * (mu_a + mu_b)
    if face_average == "harmonic":
        return 2.0 * mu_a * mu_b / (mu_a + mu_b)
    raise ValueError(f"unknown face average {face_average!r}")


def face_coefficient(
    law: DiffusionLaw,
    u_a,
    u_b,
    v_a,
    v_b,
    window: ClampWindow,
    face_average: str = "arithmetic",
):
    """Coefficient on a face from the two adjacent cell values.

    Evaluates the clamped law at each side and combines with the arithmetic
    mean (default) or the harmonic mean.  For bulk laws pass v_a = v_b = None.
    """
    mu_a = diffusion_coefficient(law, u_a, v_a, window)
    mu_b = diffusion_coefficient(law, u_b, v_b, window)
    return combine_face(mu_a, mu_b, face_average)


def coefficient_and_derivatives(law: DiffusionLaw, u, v, window: ClampWindow):
    """Clamped coefficient plus its derivatives w.r.t. the raw cell values.

    Returns (mu, dmu_du, dmu_dv); the derivatives carry the clamp chain rule,
    i.e. they vanish wherever the clamp caps the argument.  dmu_dv is None
    for bulk-role laws; dmu_du is None for single-argument surface laws.
    """
    if law.role == "bulk":
        lo = window.u_star * (0.5 * window.lower) ** (1.0 / window.alpha)
        hi = window.u_star * (2.0 * window.upper) ** (1.0 / window.alpha)
        u_arr = np.asarray(u, dtype=float)
        u_hat = np.minimum(np.maximum(u_arr, lo), hi)
        mu = _law_value(law, u_hat)
        d_u, _ = _law_derivatives(law, u_hat)
        inside = (u_arr > lo) & (u_arr < hi)
        return mu, np.where(inside, d_u, 0.0), None

    v_lo = window.v_star * (0.5 * window.lower) ** (1.0 / window._v_exp)
    v_hi = window.v_star * (2.0 * window.upper) ** (1.0 / window._v_exp)
    v_arr = np.asarray(v, dtype=float)
    v_hat = np.minimum(np.maximum(v_arr, v_lo), v_hi)
    v_inside = (v_arr > v_lo) & (v_arr < v_hi)
    if law.kind == "surface_cross":
        u_lo = window.u_star * (0.5 * window.lower) ** (1.0 / window.alpha)
        u_hi = window.u_star * (2.0 * window.upper) ** (1.0 / window.alpha)
        u_arr = np.asarray(u, dtype=float)
        u_hat = np.minimum(np.maximum(u_arr, u_lo), u_hi)
        u_inside = (u_arr > u_lo) & (u_arr < u_hi)
        mu = _law_value(law, u_hat, v_hat)
        d_u, d_v = _law_derivatives(law, u_hat, v_hat)
        return mu, np.where(u_inside, d_u, 0.0), np.where(v_inside, d_v, 0.0)
    mu = _law_value(law, v_hat)
    d_v, _ = _law_derivatives(law, v_hat)
    return mu, None, np.where(v_inside, d_v, 0.0)
