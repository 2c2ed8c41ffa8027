"""Implicit mass-conservative time stepping for the coupled bulk-surface system.

Semi-discrete form, with U the bulk cell averages and V the surface cell
averages:

    dU_i/dt = (1/|cell|) * sum_faces mu_f * (U_nb - U_i) * |face|/dist
              - alpha * sum_{j traced to i} f(U_i, V_j) * |G_j| / |cell|,
    dV_j/dt = (1/|G_j|) * sum_chain_faces muG_f * (V_nb - V_j) / dist
              + beta * f(U_i(j), V_j),

with f the guarded mass-action rate and all diffusion coefficients evaluated
at clamped arguments.  Faces are two-point fluxes with arithmetic (default)
or harmonic coefficient averaging; every boundary face outside the active
surface is no-flux by omission.  The weighted mass

    beta * sum_i U_i |cell| + alpha * sum_j V_j |G_j|

is conserved exactly by this flux/source structure, up to the nonlinear-solve
residual.

Time discretization is theta-implicit (backward Euler at theta = 1), solved
by damped Newton.  The Jacobian is assembled analytically as a sparse matrix
and its LU factorization is reused while the contraction rate stays good; a
dense finite-difference Jacobian is available as an option and serves as a
cross-check in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import linalg as dla
from scipy import sparse
from scipy.sparse import linalg as spla

from .mesh import CoupledMesh
from .model import (
    ClampWindow,
    DiffusionLaw,
    Equilibrium,
    Kinetics,
    coefficient_and_derivatives,
    combine_face,
    diffusion_coefficient,
    safe_rate,
)


class NonConvergence(RuntimeError):
    """Newton failed to reach the residual tolerance within the iteration cap."""

    def __init__(self, iterations: int, residual: float):
        super().__init__(
            f"Newton did not converge: residual {residual:.3e} after {iterations} iterations"
        )
        self.iterations = iterations
        self.residual = residual
        self.last_state: State | None = None
        self.records: list | None = None


@dataclass
class State:
    """Cell-averaged fields at one time instant."""

    t: float
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if not (np.all(np.isfinite(self.u)) and np.all(np.isfinite(self.v))):
            raise ValueError("state fields must be finite")

    def copy(self) -> "State":
        return State(t=self.t, u=self.u.copy(), v=self.v.copy())


@dataclass(frozen=True)
class StepConfig:
    """Time-step controls.

    theta = 1 is backward Euler; theta = 0.5 the trapezoidal rule.  The
    Jacobian choice is "analytic" (sparse, default) or "fd" (dense
    finite-difference columns with increment 1e-7 * (1 + |w_i|)).
    """

    dt: float
    newton_tol: float = 1e-12
    newton_max_iter: int = 25
    theta: float = 1.0
    face_average: str = "arithmetic"
    jacobian: str = "analytic"
    max_dt_halvings: int = 5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iter < 1:
            raise ValueError("newton_max_iter must be >= 1")
        if not (0.5 <= self.theta <= 1.0):
            raise ValueError(f"theta must lie in [0.5, 1], got {self.theta}")
        if self.face_average not in ("arithmetic", "harmonic"):
            raise ValueError(f"unknown face average {self.face_average!r}")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError(f"jacobian must be 'analytic' or 'fd', got {self.jacobian!r}")


def _check_sizes(state: State, mesh: CoupledMesh) -> None:
    if state.u.size != mesh.n_bulk or state.v.size != mesh.n_surface:
        raise ValueError(
            f"state sizes ({state.u.size}, {state.v.size}) do not match mesh "
            f"({mesh.n_bulk}, {mesh.n_surface})"
        )


def _bulk_diffusion(u, mesh, law, window, face_average):
    mu = diffusion_coefficient(law, u, None, window)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), u.shape)
    a, b = mesh.bulk_face_a, mesh.bulk_face_b
    mu_f = combine_face(mu[a], mu[b], face_average)
    flux = mu_f * (u[b] - u[a]) * (mesh.bulk_face_length / mesh.bulk_face_dist)
    div = np.bincount(a, weights=flux, minlength=mesh.n_bulk)
    div -= np.bincount(b, weights=flux, minlength=mesh.n_bulk)
    return div / mesh.cell_volume


def _surface_diffusion(u, v, mesh, law, window, face_average):
    u_trace = u[mesh.surf_to_bulk]
    mu = diffusion_coefficient(law, u_trace, v, window)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), v.shape)
    p, q = mesh.surf_face_a, mesh.surf_face_b
    mu_f = combine_face(mu[p], mu[q], face_average)
    flux = mu_f * (v[q] - v[p]) / mesh.surf_face_dist
    div = np.bincount(p, weights=flux, minlength=mesh.n_surface)
    div -= np.bincount(q, weights=flux, minlength=mesh.n_surface)
    return div / mesh.surf_length


def _coupling(u, v, mesh, kin):
    r = np.asarray(safe_rate(u[mesh.surf_to_bulk], v, kin), dtype=float)
    du = -kin.alpha / mesh.cell_volume * np.bincount(
        mesh.surf_to_bulk, weights=r * mesh.surf_length, minlength=mesh.n_bulk
    )
    dv = kin.beta * r
    return du, dv


def bulk_diffusion_rate(
    state: State,
    mesh: CoupledMesh,
    law: DiffusionLaw,
    window: ClampWindow,
    face_average: str = "arithmetic",
) -> np.ndarray:
    """Per-bulk-cell rate of change from interior two-point diffusion fluxes.

    Boundary faces carry no flux here; the active-surface exchange is a
    separate operator.  The volume-weighted sum over cells is zero.
    """
    _check_sizes(state, mesh)
    return _bulk_diffusion(state.u, mesh, law, window, face_average)


def surface_diffusion_rate(
    state: State,
    mesh: CoupledMesh,
    law: DiffusionLaw,
    window: ClampWindow,
    face_average: str = "arithmetic",
) -> np.ndarray:
    """Per-surface-cell rate of change from the 1D chain diffusion fluxes.

    The coefficient may depend on the bulk trace value (cross diffusion);
    chain endpoints are zero flux.  The length-weighted sum is zero.
    """
    _check_sizes(state, mesh)
    return _surface_diffusion(state.u, state.v, mesh, law, window, face_average)


def coupling_rate(
    state: State,
    mesh: CoupledMesh,
    kin: Kinetics,
) -> tuple[np.ndarray, np.ndarray]:
    """Reaction exchange between each surface cell and its trace bulk cell.

    With r_j = safe_rate(u_trace, v_j), the bulk cell loses alpha*r_j*|G_j|
    per unit volume and the surface cell gains beta*r_j, so the
    (beta, alpha)-weighted sum of the two returned arrays is zero.
    """
    _check_sizes(state, mesh)
    return _coupling(state.u, state.v, mesh, kin)


def total_rate(
    state: State,
    mesh: CoupledMesh,
    kin: Kinetics,
    bulk_law: DiffusionLaw,
    surf_law: DiffusionLaw,
    window: ClampWindow,
    face_average: str = "arithmetic",
) -> tuple[np.ndarray, np.ndarray]:
    """Sum of the three spatial operators: (du/dt, dv/dt)."""
    _check_sizes(state, mesh)
    du, dv = _coupling(state.u, state.v, mesh, kin)
    du = du + _bulk_diffusion(state.u, mesh, bulk_law, window, face_average)
    dv = dv + _surface_diffusion(state.u, state.v, mesh, surf_law, window, face_average)
    return du, dv


def _rate_vector(w, mesh, kin, bulk_law, surf_law, window, face_average):
    nb = mesh.n_bulk
    u, v = w[:nb], w[nb:]
    du, dv = _coupling(u, v, mesh, kin)
    du = du + _bulk_diffusion(u, mesh, bulk_law, window, face_average)
    dv = dv + _surface_diffusion(u, v, mesh, surf_law, window, face_average)
    return np.concatenate([du, dv])


def _analytic_jacobian(w, mesh, kin, bulk_law, surf_law, window, face_average):
    """Sparse Jacobian of the total rate with respect to the stacked state."""
    nb, ns = mesh.n_bulk, mesh.n_surface
    n = nb + ns
    u = w[:nb]
    v = w[nb:]
    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []

    # bulk diffusion
    a, b = mesh.bulk_face_a, mesh.bulk_face_b
    if a.size:
        mu, dmu, _ = coefficient_and_derivatives(bulk_law, u, None, window)
        mu = np.broadcast_to(np.asarray(mu, dtype=float), u.shape)
        dmu = np.broadcast_to(np.asarray(dmu, dtype=float), u.shape)
        mu_a, mu_b = mu[a], mu[b]
        mu_f = combine_face(mu_a, mu_b, face_average)
        if face_average == "arithmetic":
            w_a = np.full(a.size, 0.5)
            w_b = w_a
        else:
            den = (mu_a + mu_b) ** 2
            w_a = 2.0 * mu_b**2 / den
            w_b = 2.0 * mu_a**2 / den
        g = mesh.bulk_face_length / mesh.bulk_face_dist
        dlt = u[b] - u[a]
        dphi_da = g * (w_a * dmu[a] * dlt - mu_f)
        dphi_db = g * (w_b * dmu[b] * dlt + mu_f)
        inv_vol = 1.0 / mesh.cell_volume
        rows += [a, a, b, b]
        cols += [a, b, a, b]
        vals += [dphi_da * inv_vol, dphi_db * inv_vol, -dphi_da * inv_vol, -dphi_db * inv_vol]

    # surface diffusion
    p, q = mesh.surf_face_a, mesh.surf_face_b
    tr = mesh.surf_to_bulk
    if p.size:
        mu, dmu_du, dmu_dv = coefficient_and_derivatives(surf_law, u[tr], v, window)
        mu = np.broadcast_to(np.asarray(mu, dtype=float), v.shape)
        zeros = np.zeros(ns)
        dmu_du = zeros if dmu_du is None else np.broadcast_to(np.asarray(dmu_du, dtype=float), v.shape)
        dmu_dv = zeros if dmu_dv is None else np.broadcast_to(np.asarray(dmu_dv, dtype=float), v.shape)
        mu_p, mu_q = mu[p], mu[q]
        mu_f = combine_face(mu_p, mu_q, face_average)
        if face_average == "arithmetic":
            w_p = np.full(p.size, 0.5)
            w_q = w_p
        else:
            den = (mu_p + mu_q) ** 2
            w_p = 2.0 * mu_q**2 / den
            w_q = 2.0 * mu_p**2 / den
        g = 1.0 / mesh.surf_face_dist
        dlt = v[q] - v[p]
        dphi_vp = g * (w_p * dmu_dv[p] * dlt - mu_f)
        dphi_vq = g * (w_q * dmu_dv[q] * dlt + mu_f)
        dphi_up = g * w_p * dmu_du[p] * dlt
        dphi_uq = g * w_q * dmu_du[q] * dlt
        inv_p = 1.0 / mesh.surf_length[p]
        inv_q = 1.0 / mesh.surf_length[q]
        row_p = nb + p
        row_q = nb + q
        rows += [row_p, row_p, row_p, row_p, row_q, row_q, row_q, row_q]
        cols += [nb + p, nb + q, tr[p], tr[q], nb + p, nb + q, tr[p], tr[q]]
        vals += [
            dphi_vp * inv_p,
            dphi_vq * inv_p,
            dphi_up * inv_p,
            dphi_uq * inv_p,
            -dphi_vp * inv_q,
            -dphi_vq * inv_q,
            -dphi_up * inv_q,
            -dphi_uq * inv_q,
        ]

    # coupling
    u_t = u[tr]
    pos = (u_t > 0) & (v > 0)
    u_safe = np.where(pos, u_t, 1.0)
    v_safe = np.where(pos, v, 1.0)
    dr_du = np.where(pos, kin.k * kin.alpha * u_safe ** (kin.alpha - 1.0), 0.0)
    dr_dv = np.where(pos, -kin.k * kin.kappa * kin.beta * v_safe ** (kin.beta - 1.0), 0.0)
    cpl = -kin.alpha * mesh.surf_length / mesh.cell_volume
    j_idx = nb + np.arange(ns)
    rows += [tr, tr, j_idx, j_idx]
    cols += [tr, j_idx, tr, j_idx]
    vals += [cpl * dr_du, cpl * dr_dv, kin.beta * dr_du, kin.beta * dr_dv]

    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsc()


def _fd_jacobian(w, mesh, kin, bulk_law, surf_law, window, face_average):
    """Dense finite-difference Jacobian of the total rate (column perturbations)."""
    n = w.size
    f0 = _rate_vector(w, mesh, kin, bulk_law, surf_law, window, face_average)
    jac = np.empty((n, n))
    for i in range(n):
        h = 1e-7 * (1.0 + abs(w[i]))
        wp = w.copy()
        wp[i] += h
        fp = _rate_vector(wp, mesh, kin, bulk_law, surf_law, window, face_average)
        jac[:, i] = (fp - f0) / h
    return jac


def step(
    state: State,
    mesh: CoupledMesh,
    kin: Kinetics,
    bulk_law: DiffusionLaw,
    surf_law: DiffusionLaw,
    window: ClampWindow,
    cfg: StepConfig,
) -> State:
    """Advance one theta-implicit step with damped Newton.

    Solves R(w) = w - w_old - dt*(theta*F(w) + (1-theta)*F(w_old)) = 0 to
    max-norm tolerance cfg.newton_tol.  If the old state already satisfies
    the residual (e.g. at equilibrium) it is returned unchanged apart from
    the time.  Negative intermediate iterates are harmless: the guarded rate
    and the coefficient clamp keep every evaluation defined.  Raises
    NonConvergence when the iteration cap is reached; the caller may halve
    dt and retry.
    """
    _check_sizes(state, mesh)
    nb = mesh.n_bulk
    dt = cfg.dt
    theta = cfg.theta
    w_old = np.concatenate([state.u, state.v])

    def fvec(w: np.ndarray) -> np.ndarray:
        return _rate_vector(w, mesh, kin, bulk_law, surf_law, window, cfg.face_average)

    expl = np.zeros_like(w_old) if theta == 1.0 else dt * (1.0 - theta) * fvec(w_old)

    def residual(w: np.ndarray) -> np.ndarray:
        return w - w_old - dt * theta * fvec(w) - expl

    w = w_old.copy()
    r = residual(w)
    rn = float(np.max(np.abs(r)))
    if rn <= cfg.newton_tol:
        return State(t=state.t + dt, u=state.u.copy(), v=state.v.copy())

    lu_solve = None
    jac_age = 0
    identity = sparse.identity(w.size, format="csc")
    iters = 0
    while iters < cfg.newton_max_iter:
        if lu_solve is None:
            if cfg.jacobian == "analytic":
                jmat = _analytic_jacobian(
                    w, mesh, kin, bulk_law, surf_law, window, cfg.face_average
                )
                lu_solve = spla.splu((identity - dt * theta * jmat).tocsc()).solve
            else:
                jmat = _fd_jacobian(w, mesh, kin, bulk_law, surf_law, window, cfg.face_average)
                factors = dla.lu_factor(np.eye(w.size) - dt * theta * jmat)
                lu_solve = lambda rhs: dla.lu_solve(factors, rhs)  # noqa: E731
            jac_age = 0
        delta = lu_solve(-r)
        iters += 1

        lam = 1.0
        accepted = False
        rn_trial = rn
        for _ in range(12):
            w_trial = w + lam * delta
            r_trial = residual(w_trial)
            rn_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(rn_trial) and rn_trial < rn:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if jac_age > 0:
                lu_solve = None  # retry this iteration with a fresh Jacobian
                continue
            raise NonConvergence(iters, rn)

        contraction = rn_trial / rn
        w, r, rn = w_trial, r_trial, rn_trial
        jac_age += 1
        if rn <= cfg.newton_tol:
            return State(t=state.t + dt, u=w[:nb].copy(), v=w[nb:].copy())
        if contraction > 0.2:
            lu_solve = None

    raise NonConvergence(iters, rn)


def run(
    initial: State,
    t_final: float,
    mesh: CoupledMesh,
    kin: Kinetics,
    eq: Equilibrium,
    bulk_law: DiffusionLaw,
    surf_law: DiffusionLaw,
    window: ClampWindow,
    cfg: StepConfig,
) -> tuple[State, list]:
    """March from initial.t to t_final, collecting one DiagnosticsRecord per state.

    The first record is the initial state; one more follows each accepted
    step (the final step is clipped to land on t_final exactly).  On Newton
    failure the step is retried with dt halved, up to cfg.max_dt_halvings
    times; subsequent steps return to the configured dt.  A fatal failure
    propagates NonConvergence with the last good state and the records so
    far attached to the exception.
    """
    from .diagnostics import record as make_record

    if t_final < initial.t:
        raise ValueError(f"t_final={t_final} lies before the initial time {initial.t}")
    _check_sizes(initial, mesh)

    def recorded(st: State):
        return make_record(
            st, mesh, kin, eq, window, bulk_law, surf_law, face_average=cfg.face_average
        )

    state = initial
    records = [recorded(state)]
    t_eps = 1e-12 * max(1.0, abs(t_final))
    while state.t < t_final - t_eps:
        dt_step = min(cfg.dt, t_final - state.t)
        local = replace(cfg, dt=dt_step)
        for halving in range(cfg.max_dt_halvings + 1):
            try:
                state = step(state, mesh, kin, bulk_law, surf_law, window, local)
                break
            except NonConvergence as exc:
                if halving == cfg.max_dt_halvings:
                    exc.last_state = state
                    exc.records = records
                    raise
                local = replace(local, dt=0.5 * local.dt)
        records.append(recorded(state))
    return state, records
