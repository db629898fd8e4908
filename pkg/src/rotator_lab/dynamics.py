"""Euler-Lagrange residuals, acceleration solves and RK4 integration.

Residuals and single-state accelerations use the hyper-dual engine. Long
integrations run the same equations through JAX forward-mode derivatives,
compiled once per profile, because the pure-Python engine is far too slow
for 10^5 RK4 steps.
"""
from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .chart import (
    ChartState,
    angular_momentum,
    chart_Q,
    chart_to_covariant,
    covariant_lagrangian,
    covariant_momenta,
    lagrangian_q,
)
from .errors import DegenerateHessian, InvariantViolation, ProjectorSingular
from .hessian import DEGENERACY_THRESHOLD, format_float
from .minkowski import METRIC, lower, minkowski_dot, pauli_lubanski
from .profiles import RotatorProfile

RESIDUAL_STEP = 1e-3

TRAJECTORY_COLUMNS = (
    "t", "theta", "phi_sph", "V1", "V2", "V3", "theta_dot", "phi_sph_dot",
    "Q", "p0", "p1", "p2", "p3", "PP", "WW",
)


def _richardson(func, t, h):
    """Central derivative with one Richardson extrapolation, O(h^4)."""
    d1 = (func(t + h) - func(t - h)) / (2.0 * h)
    d2 = (func(t + 0.5 * h) - func(t - 0.5 * h)) / h
    return (4.0 * d2 - d1) / 3.0


def chart_derivatives(profile: RotatorProfile, state: ChartState):
    """(Lc, dLc/dq, dLc/dqdot) at the state, exact to rounding."""
    z = np.concatenate([state.q, state.qdot])

    def lag(v):
        return lagrangian_q(profile, v[:5], v[5:])

    g = ad.gradient(lag, z)
    value = float(lagrangian_q(profile, state.q, state.qdot))
    return value, g[:5], g[5:]


def chart_scale(profile: RotatorProfile, state: ChartState) -> float:
    value, _, momentum = chart_derivatives(profile, state)
    return max(abs(value), float(np.linalg.norm(momentum)))


def residual_step(state: ChartState) -> float:
    """RESIDUAL_STEP shrunk by the fastest angular rate of the chart.

    Near the poles phi_sph_dot grows like 1/sin(theta) and a fixed step
    under-resolves the motion.
    """
    return RESIDUAL_STEP / max(1.0, abs(state.theta_dot), abs(state.phi_sph_dot))


def el_residual_chart(profile: RotatorProfile, curve, t, h=None) -> np.ndarray:
    """d/dt(dLc/dqdot) - dLc/dq along ``curve: t -> ChartState``.

    Components follow q = (theta, phi_sph, X1, X2, X3). The default step
    adapts to the state at t (see ``residual_step``).
    """
    if h is None:
        h = residual_step(curve(t))

    def momentum(s):
        return chart_derivatives(profile, curve(s))[2]

    dmomentum = _richardson(momentum, t, h)
    _, force, _ = chart_derivatives(profile, curve(t))
    return dmomentum - force


def relative_chart_residual(profile, curve, t, h=None) -> float:
    res = el_residual_chart(profile, curve, t, h)
    return float(np.max(np.abs(res))) / chart_scale(profile, curve(t))


def _covariant_gradient(profile, xdot, k, kdot, m, ell):
    z = np.concatenate([xdot, k, kdot])

    def lag(v):
        return covariant_lagrangian(profile, v[0:4], v[4:8], v[8:12], m, ell)

    g = ad.gradient(lag, z)
    value = float(covariant_lagrangian(profile, xdot, k, kdot, m, ell))
    # p_mu = -dL/dxdot^mu and pi_mu = -dL/dkdot^mu carry lower indices
    return value, -g[0:4], g[4:8], -g[8:12]


@dataclass(frozen=True)
class CovariantResidual:
    xres: np.ndarray
    kres: np.ndarray
    x_scale: float
    k_scale: float

    @property
    def relative(self) -> float:
        return max(float(np.max(np.abs(self.xres))) / self.x_scale, float(np.max(np.abs(self.kres))) / self.k_scale)


def el_residual_covariant(profile: RotatorProfile, curve, t, m=1.0, ell=1.0, h=RESIDUAL_STEP) -> CovariantResidual:
    """Projected covariant equations along ``curve: t -> (x, xdot, k, kdot)``.

    xres = dp_mu/dt and kres_mu = (dpi_nu/dt + dL/dk^nu)(delta^nu_mu - p^nu k_mu / pk),
    all with lower indices.
    """
    def grads(s):
        _, xdot, k, kdot = curve(s)
        return _covariant_gradient(profile, np.asarray(xdot), np.asarray(k), np.asarray(kdot), m, ell)

    xres = _richardson(lambda s: grads(s)[1], t, h)
    pidot = _richardson(lambda s: grads(s)[3], t, h)
    value, p_low, dL_dk, pi_low = grads(t)
    _, _, k, _ = curve(t)
    p_up = METRIC @ p_low
    pk = float(p_up @ lower(k))
    scale = max(abs(value), float(np.max(np.abs(p_low))), float(np.max(np.abs(pi_low))) / ell)
    if abs(pk) < 1e-10 * scale * float(np.max(np.abs(k))):
        raise ProjectorSingular(f"p.k = {pk!r} is too small for the projector")
    E = pidot + dL_dk
    kres = E - float(E @ p_up) / pk * lower(k)
    return CovariantResidual(
        xres=xres,
        kres=kres,
        x_scale=float(np.max(np.abs(p_low))) / ell,
        k_scale=max(abs(value), float(np.max(np.abs(pi_low))) / ell),
    )


def accelerations(profile: RotatorProfile, state: ChartState, threshold=DEGENERACY_THRESHOLD) -> np.ndarray:
    """Solve H qddot = Z for qddot = (theta, phi_sph, X) second derivatives."""
    z = np.concatenate([state.q, state.qdot])

    def lag(v):
        return lagrangian_q(profile, v[:5], v[5:])

    _, g, full = ad.hessian(lag, z)
    H = full[5:, 5:]
    mixed = full[5:, :5]
    Z = g[:5] - mixed @ state.qdot
    s = np.linalg.svd(H, compute_uv=False)
    ratio = float(s[-1] / s[0])
    if ratio < threshold:
        raise DegenerateHessian(
            f"velocity Hessian is degenerate (sigma_min/sigma_max = {ratio:.3e}) for {profile.spec}; "
            "accelerations are not determined by the state",
            ratio=ratio,
        )
    return np.linalg.solve(H, Z)


# ---------------------------------------------------------------- integration

def _jax():
    import jax

    jax.config.update("jax_enable_x64", True)
    import jax.numpy as jnp

    return jax, jnp


def _jax_profile(profile: RotatorProfile, jnp):
    if profile.kind == "affine":
        a = profile.params[0]
        return lambda Q: 1.0 + a * Q
    if profile.kind == "deformed":
        eps = profile.params[0]
        return lambda Q: jnp.sqrt(1.0 + jnp.sqrt(Q)) + eps * Q
    c1, c2 = profile._c1c2()
    return lambda Q: c1 * jnp.sqrt(1.0 + c2 * jnp.sqrt(Q))


@functools.lru_cache(maxsize=32)
def _compiled_stepper(profile: RotatorProfile, dt: float, stride: int):
    jax, jnp = _jax()
    f = _jax_profile(profile, jnp)

    def lag(q, qd):
        st, ct = jnp.sin(q[0]), jnp.cos(q[0])
        N = jnp.array([st * jnp.cos(q[1]), st * jnp.sin(q[1]), ct])
        V = qd[2:5]
        ww = qd[0] ** 2 + (qd[1] * st) ** 2
        d = 1.0 - N @ V
        return jnp.sqrt(1.0 - V @ V) * f(ww / d**2)

    grad_q = jax.grad(lag, argnums=0)
    hess_v = jax.hessian(lag, argnums=1)
    mixed = jax.jacfwd(jax.grad(lag, argnums=1), argnums=0)

    def rhs(y):
        q, qd = y[:5], y[5:]
        H = hess_v(q, qd)
        Z = grad_q(q, qd) - mixed(q, qd) @ qd
        return jnp.concatenate([qd, jnp.linalg.solve(H, Z)])

    def ratio(y):
        s = jnp.linalg.svd(hess_v(y[:5], y[5:]), compute_uv=False)
        return s[-1] / s[0]

    def step(y, _):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), None

    def record(y, _):
        y, _ = jax.lax.scan(step, y, None, length=stride)
        return y, (y, ratio(y))

    @functools.partial(jax.jit, static_argnums=1)
    def run(y0, n_records):
        _, (ys, ratios) = jax.lax.scan(record, y0, None, length=n_records)
        return ys, ratios

    return run


@dataclass(frozen=True, eq=False)
class Trajectory:
    profile: str
    t: np.ndarray
    y: np.ndarray  # rows (theta, phi_sph, X1, X2, X3, theta_dot, phi_sph_dot, V1, V2, V3)
    Q: np.ndarray
    p: np.ndarray
    M: np.ndarray
    PP: np.ndarray
    WW: np.ndarray
    sigma_ratio: np.ndarray
    dt: float
    stride: int
    m: float = 1.0
    ell: float = 1.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise ValueError("time grid must be strictly increasing")

    def state(self, i) -> ChartState:
        return ChartState.from_q(self.y[i, :5], self.y[i, 5:])

    def drift(self) -> dict:
        """Largest deviation of each conserved quantity from its initial value, relative to scale."""
        p_scale = float(np.max(np.abs(self.p[0])))
        M_scale = float(np.max(np.abs(self.M[0])))
        return {
            "p": float(np.max(np.abs(self.p - self.p[0]))) / p_scale,
            "M": float(np.max(np.abs(self.M - self.M[0]))) / M_scale,
            "Q": float(np.max(np.abs(self.Q - self.Q[0]))) / abs(self.Q[0]),
            "PP": float(np.max(np.abs(self.PP - self.PP[0]))) / p_scale**2,
            "WW": float(np.max(np.abs(self.WW - self.WW[0]))) / max(abs(self.WW[0]), 1e-300),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(self.t)):
            th, ph, _, _, _, thd, phd, v1, v2, v3 = self.y[i]
            row = [self.t[i], th, ph, v1, v2, v3, thd, phd, self.Q[i], *self.p[i], self.PP[i], self.WW[i]]
            writer.writerow([format_float(v) for v in row])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {"profile": self.profile, "dt": self.dt, "stride": self.stride, "m": self.m, "ell": self.ell,
                "n_samples": int(len(self.t)), **self.meta}


def conserved_quantities(profile: RotatorProfile, state: ChartState, t=0.0, m=1.0, ell=1.0):
    """(Q, p, M, PP, WW) at a chart state; p and M are the Noether charges."""
    kin = chart_to_covariant(state, ell, t)
    p, pi = covariant_momenta(profile, kin.xdot, kin.k, kin.kdot, m, ell)
    M = angular_momentum(kin.x, p, kin.k, pi)
    W = pauli_lubanski(M, p)
    return chart_Q(state), p, M.matrix, minkowski_dot(p, p), minkowski_dot(W, W)


def integrate(profile: RotatorProfile, initial: ChartState, T, dt, m=1.0, ell=1.0, stride=1,
              chunk=2000, threshold=DEGENERACY_THRESHOLD) -> Trajectory:
    """Classic fixed-step RK4 over y = (q, qdot), recording every ``stride`` steps.

    Raises DegenerateHessian if the velocity Hessian becomes singular and
    InvariantViolation if the state leaves the chart.
    """
    if not (T > 0 and dt > 0 and dt < T):
        raise ValueError("need T > 0 and 0 < dt < T")
    stride = int(stride)
    accelerations(profile, initial, threshold)  # fail fast on a degenerate start
    n_steps = int(round(T / dt))
    n_records = n_steps // stride
    run = _compiled_stepper(profile, float(dt), stride)

    y = np.concatenate([initial.q, initial.qdot])
    ys = [y[None, :]]
    ratios = [np.array([accelerations_ratio(profile, initial)])]
    done = 0
    while done < n_records:
        n = min(chunk, n_records - done)
        # pad to a fixed chunk length so one compiled program serves every chunk
        block, rblock = run(y, chunk)
        block = np.asarray(block)[:n]
        rblock = np.asarray(rblock)[:n]
        _audit(block, rblock, (done + 1 + np.arange(n)) * stride * dt, threshold, profile)
        ys.append(block)
        ratios.append(rblock)
        y = block[-1]
        done += n
    Y = np.concatenate(ys)
    t = np.arange(len(Y)) * stride * dt
    return _trajectory_from_samples(profile, t, Y, np.concatenate(ratios), dt, stride, m, ell)


def accelerations_ratio(profile, state) -> float:
    z = np.concatenate([state.q, state.qdot])
    H = ad.hessian(lambda v: lagrangian_q(profile, v[:5], v[5:]), z)[2][5:, 5:]
    s = np.linalg.svd(H, compute_uv=False)
    return float(s[-1] / s[0])


def _audit(block, ratios, times, threshold, profile):
    bad = ~np.isfinite(block).all(axis=1)
    vv = np.sum(block[:, 7:10] ** 2, axis=1)
    sin_theta = np.abs(np.sin(block[:, 0]))
    for i in range(len(block)):
        if bad[i] or vv[i] >= 1.0 or sin_theta[i] < 1e-6:
            raise InvariantViolation(f"state left the chart near t = {times[i]:.6g} (|V|^2 = {vv[i]:.6g})")
        if ratios[i] < threshold:
            raise DegenerateHessian(
                f"velocity Hessian became degenerate near t = {times[i]:.6g} for {profile.spec}",
                ratio=float(ratios[i]), t=float(times[i]),
            )


def _trajectory_from_samples(profile, t, Y, ratios, dt, stride, m, ell):
    n = len(Y)
    Q = np.empty(n)
    p = np.empty((n, 4))
    M = np.empty((n, 4, 4))
    PP = np.empty(n)
    WW = np.empty(n)
    for i in range(n):
        state = ChartState.from_q(Y[i, :5], Y[i, 5:])
        Q[i], p[i], M[i], PP[i], WW[i] = conserved_quantities(profile, state, t[i], m, ell)
    return Trajectory(profile=profile.spec, t=t, y=Y, Q=Q, p=p, M=M, PP=PP, WW=WW,
                      sigma_ratio=ratios, dt=float(dt), stride=int(stride), m=float(m), ell=float(ell))


def trajectory_residual(profile: RotatorProfile, traj: Trajectory, index: int) -> float:
    """Relative chart residual at an interior sample, differencing neighbouring samples."""
    if not 2 <= index <= len(traj.t) - 3:
        raise IndexError("need two samples on each side")
    h = traj.t[1] - traj.t[0]

    def momentum(j):
        return chart_derivatives(profile, traj.state(j))[2]

    d1 = (momentum(index + 2) - momentum(index - 2)) / (4.0 * h)
    d2 = (momentum(index + 1) - momentum(index - 1)) / (2.0 * h)
    dmomentum = (4.0 * d2 - d1) / 3.0
    state = traj.state(index)
    _, force, _ = chart_derivatives(profile, state)
    return float(np.max(np.abs(dmomentum - force))) / chart_scale(profile, state)


DEFAULT_INITIAL_STATE = {
    "theta": math.pi / 2,
    "phi_sph": 0.0,
    "V": [0.1, 0.0, 0.0],
    "theta_dot": 0.2,
    "phi_sph_dot": 0.3,
}


def default_initial_state() -> ChartState:
    return ChartState.from_dict(DEFAULT_INITIAL_STATE)


def write_trajectory(traj: Trajectory, csv_path, json_path, extra=None):
    with open(csv_path, "w", newline="") as fh:
        fh.write(traj.to_csv())
    meta = traj.metadata()
    if extra:
        meta.update(extra)
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)


def circular_states(profile: RotatorProfile, omega, n_bracket=400):
    """Equatorial states with V parallel to N whose spatial momentum vanishes.

    Such a state rotates rigidly about the z axis at angular speed ``omega``
    if a uniform circular solution exists. Returns every root found in
    V = v N with v in (-1, 1); the list is empty when there is none.
    """
    from scipy.optimize import brentq

    from .errors import DomainError

    def spatial_momentum(v):
        Q = omega**2 / (1.0 - v) ** 2
        f, d1, _ = profile.eval(Q)
        return f * v / math.sqrt(1.0 - v * v) - 2.0 * Q * d1 * math.sqrt(1.0 - v * v) / (1.0 - v)

    vs = np.linspace(-0.99, 0.99, n_bracket)
    values = []
    for v in vs:
        try:
            values.append(spatial_momentum(v))
        except DomainError:
            values.append(np.nan)
    states = []
    for i in range(len(vs) - 1):
        if values[i] * values[i + 1] < 0:
            v = brentq(spatial_momentum, vs[i], vs[i + 1], xtol=1e-15)
            states.append(ChartState(theta=math.pi / 2, phi_sph=0.0, V=[v, 0.0, 0.0], theta_dot=0.0, phi_sph_dot=omega))
    return states
