"""Gradient flow toward a level set of the objective on the feasible set.

The field V projects the objective gradient onto the tangent space of the
feasible set; the modulated field W scales V by (u - value), so it vanishes
on the target level set, pushes the objective down from above and up from
below, and slows as the level is approached.  Integrating W with
re-projection after every step keeps trajectories on the feasible set and
drives the objective value monotonically toward u.  The retraction follows
the flow until the value first enters a narrow sub-band around u.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ConstraintQualificationError, FlowError
from .manifold import ConstraintProblem, jacobian_y_many, project_many, residual_many

LEVEL_ABS_TOL = 1e-6
SPEED_TOL = 1e-8
CONVERGENCE_TOL = 1e-3

_RANK_RTOL = 1e-12
_MAX_HALVINGS = 8


@dataclass(frozen=True)
class FlowConfig:
    """Target level, invariant band, and integrator settings."""

    u: float
    band: tuple[float, float]
    dt: float = 1e-2
    t_max: float = 50.0
    band_tol: float = 1e-6

    def __post_init__(self):
        u1, u2 = self.band
        if not u1 < self.u < u2:
            raise ValueError(f"band must satisfy {u1} < u={self.u} < {u2}")
        if self.dt <= 0 or self.t_max <= 0 or self.band_tol <= 0:
            raise ValueError("dt, t_max and band_tol must be positive")

    @property
    def subband_width(self) -> float:
        return self.band_tol * (self.band[1] - self.band[0])


@dataclass(frozen=True)
class Trajectory:
    """Samples of one integrated trajectory; one row per accepted step."""

    times: np.ndarray
    points: np.ndarray
    values: np.ndarray
    speeds: np.ndarray
    residuals: np.ndarray
    converged: bool
    error: str | None = None


@dataclass(frozen=True)
class RetractionResult:
    p: np.ndarray
    t: float


def _tangential_many(prob, points):
    """Batched V, objective values, and a rank-deficiency mask."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    jac = jacobian_y_many(prob, pts, check=False)
    val, grad, _ = prob.objective.forward(pts, order=1, check=False)
    _, s, vt = np.linalg.svd(jac, full_matrices=False)
    bad = ~((s[:, 0] > 0.0) & (s[:, -1] > _RANK_RTOL * s[:, 0]))
    bad |= ~np.isfinite(val)
    coeff = vt @ grad[:, :, None]
    v = grad - (vt.transpose(0, 2, 1) @ coeff)[..., 0]
    return v, val, bad


def projected_gradient(prob: ConstraintProblem, p) -> np.ndarray:
    """Projection of the objective gradient onto the tangent space at p.

    Vanishes exactly at the critical points of the restricted objective.
    Raises when the constraint Jacobian is rank deficient at p.
    """
    v, _, bad = _tangential_many(prob, np.asarray(p, dtype=float)[None, :])
    if bad[0]:
        raise ConstraintQualificationError(
            "the constraint Jacobian is rank deficient at the given point"
        )
    return v[0]


def level_field(prob: ConstraintProblem, p, u: float) -> np.ndarray:
    """The modulated field (u - value) * V(p) driving the flow toward level u."""
    p = np.asarray(p, dtype=float)
    v = projected_gradient(prob, p)
    return (u - prob.objective.evaluate(p)) * v


def _rk4_step(prob, pts, u, dt):
    """One RK4 step of the modulated field for a batch of points."""

    def w_at(q):
        v, val, bad = _tangential_many(prob, q)
        return (u - val)[:, None] * v, bad

    k1, b1 = w_at(pts)
    k2, b2 = w_at(pts + 0.5 * dt * k1)
    k3, b3 = w_at(pts + 0.5 * dt * k2)
    k4, b4 = w_at(pts + dt * k3)
    new = pts + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return new, b1 | b2 | b3 | b4


def _substep_row(prob, p, u, dt, tol_feas, depth=0):
    """Advance one point by dt using halved steps when projection fails."""
    if depth > _MAX_HALVINGS:
        return None
    new, bad = _rk4_step(prob, p[None, :], u, dt)
    if not bad[0]:
        proj, ok, _, _, _ = project_many(prob, new, tol=tol_feas)
        if ok[0]:
            return proj[0]
    half = dt / 2.0
    mid = _substep_row(prob, p, u, half, tol_feas, depth + 1)
    if mid is None:
        return None
    return _substep_row(prob, mid, u, half, tol_feas, depth + 1)


def _integrate_batch(prob, cfg, starts, stop, tol_feas=1e-9):
    """Integrate a batch in lockstep; ``stop`` maps (values, speeds) to a mask."""
    pts = np.atleast_2d(np.asarray(starts, dtype=float)).copy()
    k = pts.shape[0]

    res0 = np.linalg.norm(residual_many(prob, pts, check=False), axis=1)
    if np.any(res0 > 1e-6):
        raise ValueError(
            "flow starts must lie on the feasible set (project them first); "
            f"worst residual norm {res0.max():.3e}"
        )
    proj, ok, _, _, _ = project_many(prob, pts, tol=tol_feas)
    if not np.all(ok):
        raise ValueError("a flow start could not be tightened onto the feasible set")
    pts = proj

    u1, u2 = cfg.band
    val0 = prob.objective.forward(pts, order=0, check=False)[0]
    if np.any((val0 < u1 - 1e-9) | (val0 > u2 + 1e-9)):
        raise ValueError(
            f"flow starts must have objective values inside the band [{u1}, {u2}]"
        )

    samples: list[list[tuple]] = [[] for _ in range(k)]
    errors: list[str | None] = [None] * k
    stop_time = np.full(k, np.nan)
    active = np.ones(k, dtype=bool)

    t = 0.0
    step = 0
    n_steps = int(np.ceil(cfg.t_max / cfg.dt - 1e-12))
    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        v, val, bad = _tangential_many(prob, pts[idx])
        w = (cfg.u - val)[:, None] * v
        speeds = np.linalg.norm(w, axis=1)
        res = np.linalg.norm(residual_many(prob, pts[idx], check=False), axis=1)
        for j, row in enumerate(idx):
            samples[row].append((t, pts[row].copy(), float(val[j]), float(speeds[j]), float(res[j])))

        for j, row in enumerate(idx):
            if bad[j]:
                errors[row] = "rank-deficient constraint Jacobian along the trajectory"
                active[row] = False
        stopped = stop(val, speeds) & ~bad
        for j, row in enumerate(idx):
            if stopped[j] and active[row]:
                stop_time[row] = t
                active[row] = False

        if step >= n_steps:
            break
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break

        new, bad_step = _rk4_step(prob, pts[idx], cfg.u, cfg.dt)
        proj, ok, _, _, _ = project_many(prob, new, tol=tol_feas)
        for j, row in enumerate(idx):
            if bad_step[j] or not ok[j]:
                fallback = _substep_row(prob, pts[row], cfg.u, cfg.dt, tol_feas)
                if fallback is None:
                    errors[row] = "projection failed along the trajectory; truncated"
                    active[row] = False
                else:
                    pts[row] = fallback
            else:
                pts[row] = proj[j]
        step += 1
        t = step * cfg.dt

    trajectories = []
    for row in range(k):
        rows = samples[row]
        times = np.array([s[0] for s in rows])
        points = np.array([s[1] for s in rows])
        values = np.array([s[2] for s in rows])
        speeds_a = np.array([s[3] for s in rows])
        residuals = np.array([s[4] for s in rows])
        converged = bool(abs(values[-1] - cfg.u) <= CONVERGENCE_TOL) and errors[row] is None
        trajectories.append(
            Trajectory(times, points, values, speeds_a, residuals, converged, errors[row])
        )
    return trajectories, stop_time


def integrate_flow_many(prob: ConstraintProblem, cfg: FlowConfig, starts) -> list[Trajectory]:
    """Integrate the modulated field from several feasible starts at once.

    Classical RK4 with re-projection after every step; each trajectory stops
    when the objective value reaches the target level and the field speed dies
    out, or at the time horizon.
    """

    def stop(values, speeds):
        return (np.abs(values - cfg.u) <= LEVEL_ABS_TOL) & (speeds <= SPEED_TOL)

    trajectories, _ = _integrate_batch(prob, cfg, starts, stop)
    return trajectories


def integrate_flow(prob: ConstraintProblem, cfg: FlowConfig, p0) -> Trajectory:
    """Integrate a single trajectory of the modulated field."""
    return integrate_flow_many(prob, cfg, np.asarray(p0, dtype=float)[None, :])[0]


def retract_to_level(prob: ConstraintProblem, cfg: FlowConfig, p) -> RetractionResult:
    """Follow the flow until the objective value first enters the sub-band.

    The sub-band is (u - delta, u + delta) with delta = band_tol * band width.
    Fails when the horizon is reached outside the sub-band, which happens when
    the start is pinned at a critical point away from the target level.
    """
    delta = cfg.subband_width

    def stop(values, speeds):
        return np.abs(values - cfg.u) < delta

    trajectories, stop_time = _integrate_batch(
        prob, cfg, np.asarray(p, dtype=float)[None, :], stop
    )
    traj = trajectories[0]
    if traj.error is not None:
        raise FlowError(traj.error, final_value=float(traj.values[-1]))
    if np.isnan(stop_time[0]):
        raise FlowError(
            f"the horizon t_max={cfg.t_max:g} was reached outside the sub-band "
            f"(final objective value {traj.values[-1]:.6g})",
            final_value=float(traj.values[-1]),
        )
    return RetractionResult(traj.points[-1].copy(), float(stop_time[0]))


def trajectory_to_csv(traj: Trajectory, n: int) -> str:
    """Render a trajectory as CSV with 17 significant digits per field."""
    buf = io.StringIO()
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + ["gm", "speed", "residual"]
    buf.write(",".join(header) + "\n")
    for i in range(len(traj.times)):
        fields = (
            [traj.times[i]]
            + list(traj.points[i])
            + [traj.values[i], traj.speeds[i], traj.residuals[i]]
        )
        buf.write(",".join(f"{v:.17g}" for v in fields) + "\n")
    return buf.getvalue()
