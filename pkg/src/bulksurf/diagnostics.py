"""Entropy, envelope and dissipation diagnostics on discrete states.

The simulator's structural guarantees are monitored through a handful of
scalar functionals:

* the conserved weighted mass `beta*int(u) + alpha*int(v)`;
* the relative entropy `int u_star*e(u/u_star) + int v_star*e(v/v_star)`
  with entropy density e(z) = z*log(z) - z + 1, a Lyapunov functional;
* an envelope entropy, the relative entropy of upper-truncated fields with
  weights upper**(1/alpha), upper**(1/beta), which is zero exactly when the
  pointwise upper envelope (u/u_star)**alpha <= upper,
  (v/v_star)**beta <= upper holds;
* the excess log-potentials of the truncated fields, whose pairing with the
  reaction rate splits into three sign-definite surface integrals;
* undershoot fields below the stationary floor pair (sigma_u, sigma_v), whose
  squared L2 norms vanish exactly when the lower envelope holds.

All operations are read-only on the state and safe to evaluate concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CoupledMesh
from .model import (
    ClampWindow,
    DiffusionLaw,
    Equilibrium,
    Kinetics,
    clamp_state,
    combine_face,
    diffusion_coefficient,
    log_mean,
)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Per-step scalar diagnostics.

    The three dissipation fields are the signed contributions to the envelope
    entropy's time derivative, so each is <= 0 up to round-off on healthy
    states.  partition_counts holds the surface-cell counts of the three
    envelope-violation classes (only u above, only v above, both above).
    """

    t: float
    mass: float
    entropy: float
    envelope_entropy: float
    u_env_max: float
    v_env_max: float
    u_env_min: float
    v_env_min: float
    reaction_dissipation: float
    diffusion_dissipation_bulk: float
    diffusion_dissipation_surface: float
    clamp_activations: int
    partition_counts: tuple[int, int, int]


@dataclass(frozen=True)
class ReactionDissipation:
    """Surface reaction-dissipation integral split by envelope-violation class.

    Each of u_only, v_only and both is a sum of pointwise-nonnegative terms;
    cells with a nonpositive trace pair are excluded.  total is their sum.
    """

    u_only: float
    v_only: float
    both: float
    total: float
    n_u_only: int
    n_v_only: int
    n_both: int


@dataclass(frozen=True)
class UndershootFields:
    """Truncations below the stationary floor and their squared L2 norms.

    sigma_u = lower**(1/alpha) and sigma_v = (lower/kappa)**(1/beta) form the
    constant stationary pair implied by the window (sigma_u**alpha equals
    kappa*sigma_v**beta equals lower).  sigma_v_printed = kappa*lower**(1/beta)
    is logged alongside for reference; it is not balanced against sigma_u and
    is not used in the truncations.
    """

    u_minus: np.ndarray
    v_minus: np.ndarray
    u_norm_sq: float
    v_norm_sq: float
    sigma_u: float
    sigma_v: float
    sigma_v_printed: float
    n_u_below_only: int
    n_v_below_only: int
    n_both_below_backward: int
    n_both_below_forward: int


def entropy_density(z):
    """e(z) = z*log(z) - z + 1 for z > 0, continuously extended by e(0) = 1.

    Nonnegative with a unique zero at z = 1; negative input is rejected.
    """
    z_arr = np.asarray(z, dtype=float)
    if np.any(z_arr < 0):
        raise ValueError("entropy density requires nonnegative argument")
    z_safe = np.where(z_arr > 0, z_arr, 1.0)
    out = np.where(z_arr > 0, z_arr * np.log(z_safe) - z_arr + 1.0, 1.0)
    if np.isscalar(z):
        return float(out)
    return out


def weighted_mass(state, mesh: CoupledMesh, kin: Kinetics) -> float:
    """Conserved functional beta*sum(u)*|cell| + alpha*sum(v*|G_j|)."""
    return float(
        kin.beta * np.sum(state.u) * mesh.cell_volume
        + kin.alpha * np.sum(state.v * mesh.surf_length)
    )


def relative_entropy(state, eq: Equilibrium, mesh: CoupledMesh) -> float:
    """Discrete relative entropy against the equilibrium pair; zero iff at it."""
    bulk = eq.u_star * np.sum(entropy_density(state.u / eq.u_star)) * mesh.cell_volume
    surf = eq.v_star * np.sum(entropy_density(state.v / eq.v_star) * mesh.surf_length)
    return float(bulk + surf)


def _upper_thresholds(window: ClampWindow) -> tuple[float, float]:
    """Concentration thresholds of the upper envelope for u and v."""
    return (
        window.u_star * window.upper ** (1.0 / window.alpha),
        window.v_star * window.upper ** (1.0 / window.beta),
    )


def envelope_entropy(state, mesh: CoupledMesh, window: ClampWindow) -> float:
    """Weighted relative entropy of the upper-truncated fields.

    The truncation maps everything at or below the envelope to the
    equilibrium value, so the result is zero exactly when both upper
    envelopes hold, and positive otherwise.
    """
    u_thr, v_thr = _upper_thresholds(window)
    u_trunc = np.where(state.u <= u_thr, window.u_star, state.u / window.upper ** (1.0 / window.alpha))
    v_trunc = np.where(state.v <= v_thr, window.v_star, state.v / window.upper ** (1.0 / window.beta))
    bulk = window.u_star * np.sum(entropy_density(u_trunc / window.u_star)) * mesh.cell_volume
    surf = window.v_star * np.sum(entropy_density(v_trunc / window.v_star) * mesh.surf_length)
    return float(
        window.upper ** (1.0 / window.alpha) * bulk + window.upper ** (1.0 / window.beta) * surf
    )


def envelope_potentials(state, window: ClampWindow) -> tuple[np.ndarray, np.ndarray]:
    """Excess log-potentials of the truncated fields, entrywise.

    bulk_pot_i = log(u_i/u_star) - log(upper)/alpha where the bulk envelope
    is exceeded and 0 otherwise (the threshold itself belongs to the zero
    branch); surf_pot_j likewise with exponent beta.  Both are >= 0 and
    vanish exactly where the envelope holds.  Requires strictly positive
    entries.
    """
    if np.any(state.u <= 0) or np.any(state.v <= 0):
        raise ValueError("envelope potentials require strictly positive fields")
    u_thr, v_thr = _upper_thresholds(window)
    log_upper = np.log(window.upper)
    u_safe = np.where(state.u > u_thr, state.u, window.u_star)
    v_safe = np.where(state.v > v_thr, state.v, window.v_star)
    bulk_pot = np.where(
        state.u > u_thr, np.log(u_safe / window.u_star) - log_upper / window.alpha, 0.0
    )
    surf_pot = np.where(
        state.v > v_thr, np.log(v_safe / window.v_star) - log_upper / window.beta, 0.0
    )
    return bulk_pot, surf_pot


def reaction_dissipation_split(
    state,
    mesh: CoupledMesh,
    kin: Kinetics,
    window: ClampWindow,
) -> ReactionDissipation:
    """Reaction contribution to the envelope-entropy production, per class.

    For each surface cell with positive trace pair (u_i, v_j) the integrand

        k * LogMean(u**alpha, kappa*v**beta)
          * (alpha*log(u/u_star) - beta*log(v/v_star))
          * (alpha*bulk_pot - beta*surf_pot) * |G_j|

    is nonnegative: with only the bulk potential active the two log factors
    share the sign of the excess, likewise for the surface-only class, and
    with both active the product is a perfect square thanks to the envelope
    weights.  Cells below the envelope contribute exactly zero.
    """
    u_t = state.u[mesh.surf_to_bulk]
    v = state.v
    admissible = (u_t > 0) & (v > 0)
    u_safe = np.where(admissible, u_t, window.u_star)
    v_safe = np.where(admissible, v, window.v_star)

    u_thr, v_thr = _upper_thresholds(window)
    log_upper = np.log(window.upper)
    bulk_pot = np.where(
        u_safe > u_thr, np.log(u_safe / window.u_star) - log_upper / window.alpha, 0.0
    )
    surf_pot = np.where(
        v_safe > v_thr, np.log(v_safe / window.v_star) - log_upper / window.beta, 0.0
    )

    lam = log_mean(u_safe**kin.alpha, kin.kappa * v_safe**kin.beta)
    log_diff = kin.alpha * np.log(u_safe / window.u_star) - kin.beta * np.log(
        v_safe / window.v_star
    )
    integrand = kin.k * lam * log_diff * (kin.alpha * bulk_pot - kin.beta * surf_pot)
    contrib = np.where(admissible, integrand * mesh.surf_length, 0.0)

    xi_pos = admissible & (bulk_pot > 0)
    chi_pos = admissible & (surf_pot > 0)
    m_u = xi_pos & ~chi_pos
    m_v = chi_pos & ~xi_pos
    m_b = xi_pos & chi_pos
    return ReactionDissipation(
        u_only=float(np.sum(contrib[m_u])),
        v_only=float(np.sum(contrib[m_v])),
        both=float(np.sum(contrib[m_b])),
        total=float(np.sum(contrib[m_u | m_v | m_b])),
        n_u_only=int(np.count_nonzero(m_u)),
        n_v_only=int(np.count_nonzero(m_v)),
        n_both=int(np.count_nonzero(m_b)),
    )


def undershoot_fields(
    state,
    mesh: CoupledMesh,
    kin: Kinetics,
    window: ClampWindow,
) -> UndershootFields:
    """Parts of the fields below the stationary floor, and where they sit.

    u_minus = min(u - sigma_u, 0) per bulk cell and v_minus likewise per
    surface cell; the squared L2 norms are zero exactly when the lower
    envelope holds.  Surface cells are classified by which trace component
    undershoots and, when both do, by the sign of u**alpha - kappa*v**beta
    (nonpositive values enter that comparison as zero pressure).
    """
    sigma_u = window.lower ** (1.0 / window.alpha)
    sigma_v = (window.lower / kin.kappa) ** (1.0 / window.beta)
    u_minus = np.minimum(state.u - sigma_u, 0.0)
    v_minus = np.minimum(state.v - sigma_v, 0.0)

    u_t = state.u[mesh.surf_to_bulk]
    u_below = u_t < sigma_u
    v_below = state.v < sigma_v
    u_safe = np.where(u_t > 0, u_t, 1.0)
    v_safe = np.where(state.v > 0, state.v, 1.0)
    pu = np.where(u_t > 0, u_safe**kin.alpha, 0.0)
    pv = np.where(state.v > 0, kin.kappa * v_safe**kin.beta, 0.0)
    both = u_below & v_below
    return UndershootFields(
        u_minus=u_minus,
        v_minus=v_minus,
        u_norm_sq=float(np.sum(u_minus**2) * mesh.cell_volume),
        v_norm_sq=float(np.sum(v_minus**2 * mesh.surf_length)),
        sigma_u=float(sigma_u),
        sigma_v=float(sigma_v),
        sigma_v_printed=float(kin.kappa * window.lower ** (1.0 / window.beta)),
        n_u_below_only=int(np.count_nonzero(u_below & ~v_below)),
        n_v_below_only=int(np.count_nonzero(v_below & ~u_below)),
        n_both_below_backward=int(np.count_nonzero(both & (pu < pv))),
        n_both_below_forward=int(np.count_nonzero(both & (pu > pv))),
    )


def _diffusion_dissipation(state, mesh, window, bulk_law, surf_law, face_average):
    """Face-sum analogues of the two gradient terms of the entropy production.

    bulk = -sum_faces mu_f * (du)(d bulk_pot) * |face|/dist and likewise on
    the surface chain; both are <= 0 because the excess potential is a
    nondecreasing function of its own concentration, making each face term
    a product of like-signed differences.
    """
    bulk_pot, surf_pot = envelope_potentials(state, window)
    a, b = mesh.bulk_face_a, mesh.bulk_face_b
    mu = diffusion_coefficient(bulk_law, state.u, None, window)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), state.u.shape)
    mu_f = combine_face(mu[a], mu[b], face_average)
    bulk_sum = -np.sum(
        mu_f
        * (state.u[b] - state.u[a])
        * (bulk_pot[b] - bulk_pot[a])
        * mesh.bulk_face_length
        / mesh.bulk_face_dist
    )

    p, q = mesh.surf_face_a, mesh.surf_face_b
    mu_s = diffusion_coefficient(surf_law, state.u[mesh.surf_to_bulk], state.v, window)
    mu_s = np.broadcast_to(np.asarray(mu_s, dtype=float), state.v.shape)
    mu_sf = combine_face(mu_s[p], mu_s[q], face_average)
    surf_sum = -np.sum(
        mu_sf * (state.v[q] - state.v[p]) * (surf_pot[q] - surf_pot[p]) / mesh.surf_face_dist
    )
    return float(bulk_sum), float(surf_sum)


def record(
    state,
    mesh: CoupledMesh,
    kin: Kinetics,
    eq: Equilibrium,
    window: ClampWindow,
    bulk_law: DiffusionLaw,
    surf_law: DiffusionLaw,
    face_average: str = "arithmetic",
) -> DiagnosticsRecord:
    """Assemble the full diagnostics record for one (positive) state.

    Envelope extrema treat nonpositive entries as zero pressure, so a
    violated positivity shows up as u_env_min = 0 rather than an error.
    The reaction dissipation is reported with the sign it carries in the
    envelope-entropy balance (<= 0), the negated total of the split.
    """
    u_pos = np.maximum(state.u, 0.0)
    v_pos = np.maximum(state.v, 0.0)
    u_env = (u_pos / eq.u_star) ** kin.alpha
    v_env = (v_pos / eq.v_star) ** kin.beta
    split = reaction_dissipation_split(state, mesh, kin, window)
    diss_bulk, diss_surf = _diffusion_dissipation(
        state, mesh, window, bulk_law, surf_law, face_average
    )
    u_hat, v_hat = clamp_state(state.u, state.v, window)
    clamp_count = int(np.count_nonzero(u_hat != state.u)) + int(
        np.count_nonzero(v_hat != state.v)
    )
    return DiagnosticsRecord(
        t=float(state.t),
        mass=weighted_mass(state, mesh, kin),
        entropy=relative_entropy(state, eq, mesh),
        envelope_entropy=envelope_entropy(state, mesh, window),
        u_env_max=float(np.max(u_env)),
        v_env_max=float(np.max(v_env)),
        u_env_min=float(np.min(u_pos**kin.alpha)),
        v_env_min=float(np.min(kin.kappa * v_pos**kin.beta)),
        reaction_dissipation=-split.total + 0.0,
        diffusion_dissipation_bulk=diss_bulk + 0.0,
        diffusion_dissipation_surface=diss_surf + 0.0,
        clamp_activations=clamp_count,
        partition_counts=(split.n_u_only, split.n_v_only, split.n_both),
    )
