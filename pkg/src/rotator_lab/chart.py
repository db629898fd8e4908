"""The Cartesian + spherical chart with gauge x^0 = ell t and k^0 = 1.

Coordinates are q = (theta, phi_sph, X1, X2, X3) with x = ell X, and
velocities qdot = (theta_dot, phi_sph_dot, V1, V2, V3) per unit chart time.
In this chart the physical Lagrangian is -m ell times

    Lc(V, w) = sqrt(1 - V.V) f(Q),    Q = w.w / (1 - N.V)**2,

with N the unit direction of k and w = (theta_dot, phi_sph_dot sin(theta)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .errors import DegenerateRotation, DomainError, InvariantViolation
from .minkowski import AngularMomentum, lower, minkowski_dot
from .profiles import RotatorProfile

POLE_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class ChartState:
    theta: float
    phi_sph: float
    V: np.ndarray
    theta_dot: float
    phi_sph_dot: float
    X: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        V = np.array(self.V, dtype=float).reshape(3)
        X = np.array(self.X, dtype=float).reshape(3)
        V.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "X", X)
        for name in ("theta", "phi_sph", "theta_dot", "phi_sph_dot"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not float(V @ V) < 1.0:
            raise InvariantViolation(f"superluminal chart velocity |V|^2 = {float(V @ V)!r}")
        if abs(math.sin(self.theta)) < POLE_TOLERANCE:
            raise InvariantViolation(f"theta = {self.theta!r} is at a pole of the chart")
        if not 1.0 - float(self.N @ V) > 0.0:
            raise InvariantViolation("1 - N.V must be positive")

    @property
    def N(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi_sph), st * math.sin(self.phi_sph), math.cos(self.theta)])

    @property
    def w(self) -> np.ndarray:
        return np.array([self.theta_dot, self.phi_sph_dot * math.sin(self.theta)])

    @property
    def q(self) -> np.ndarray:
        return np.array([self.theta, self.phi_sph, *self.X])

    @property
    def qdot(self) -> np.ndarray:
        return np.array([self.theta_dot, self.phi_sph_dot, *self.V])

    @classmethod
    def from_q(cls, q, qdot):
        return cls(theta=q[0], phi_sph=q[1], X=q[2:5], theta_dot=qdot[0], phi_sph_dot=qdot[1], V=qdot[2:5])

    def to_dict(self) -> dict:
        return {
            "theta": self.theta,
            "phi_sph": self.phi_sph,
            "V": [float(v) for v in self.V],
            "theta_dot": self.theta_dot,
            "phi_sph_dot": self.phi_sph_dot,
            "X": [float(x) for x in self.X],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ChartState":
        return cls(
            theta=data["theta"],
            phi_sph=data["phi_sph"],
            V=data["V"],
            theta_dot=data["theta_dot"],
            phi_sph_dot=data["phi_sph_dot"],
            X=data.get("X", (0.0, 0.0, 0.0)),
        )


@dataclass(frozen=True, eq=False)
class CovariantKinematics:
    """Position, velocity and null direction per unit chart time."""

    x: np.ndarray
    xdot: np.ndarray
    k: np.ndarray
    kdot: np.ndarray


def chart_Q(state: ChartState) -> float:
    w = state.w
    return float(w @ w) / (1.0 - float(state.N @ state.V)) ** 2


def lagrangian_wv(profile: RotatorProfile, w, V, N):
    """Lc as a function of (w, V) at fixed N; differentiable with hyper-duals."""
    ww = w[0] * w[0] + w[1] * w[1]
    vv = V[0] * V[0] + V[1] * V[1] + V[2] * V[2]
    nv = N[0] * V[0] + N[1] * V[1] + N[2] * V[2]
    d = 1.0 - nv
    Q = ww / (d * d)
    return ad.sqrt(1.0 - vv) * profile.value(Q)


def lagrangian_q(profile: RotatorProfile, q, qdot):
    """Lc(q, qdot) in raw chart variables; differentiable with hyper-duals."""
    theta, phi = q[0], q[1]
    st, ct = ad.sin(theta), ad.cos(theta)
    N = (st * ad.cos(phi), st * ad.sin(phi), ct)
    w = (qdot[0], qdot[1] * st)
    return lagrangian_wv(profile, w, qdot[2:5], N)


def chart_lagrangian(profile: RotatorProfile, state: ChartState) -> float:
    return float(lagrangian_wv(profile, state.w, state.V, state.N))


def chart_to_covariant(state: ChartState, ell=1.0, t=0.0) -> CovariantKinematics:
    th, ph = state.theta, state.phi_sph
    e_theta = np.array([math.cos(th) * math.cos(ph), math.cos(th) * math.sin(ph), -math.sin(th)])
    e_phi = np.array([-math.sin(ph), math.cos(ph), 0.0])
    Ndot = state.theta_dot * e_theta + state.phi_sph_dot * math.sin(th) * e_phi
    return CovariantKinematics(
        x=ell * np.array([t, *state.X]),
        xdot=ell * np.array([1.0, *state.V]),
        k=np.array([1.0, *state.N]),
        kdot=np.array([0.0, *Ndot]),
    )


def state_from_covariant(x, xdot, k, kdot, ell=1.0):
    """Chart state and chart time from covariant data in any parametrization."""
    x, xdot, k, kdot = (np.asarray(a, dtype=float) for a in (x, xdot, k, kdot))
    N = k[1:] / k[0]
    # d/dtau -> d/dt_chart
    to_chart = ell / xdot[0]
    V = xdot[1:] / xdot[0]
    Ndot = (kdot[1:] * k[0] - k[1:] * kdot[0]) / k[0] ** 2 * to_chart
    theta = math.acos(max(-1.0, min(1.0, N[2])))
    phi = math.atan2(N[1], N[0])
    rho2 = N[0] ** 2 + N[1] ** 2
    theta_dot = -Ndot[2] / math.sqrt(rho2)
    phi_dot = (N[0] * Ndot[1] - N[1] * Ndot[0]) / rho2
    state = ChartState(theta=theta, phi_sph=phi, V=V, theta_dot=theta_dot, phi_sph_dot=phi_dot, X=x[1:] / ell)
    return state, x[0] / ell


def covariant_Q(xdot, k, kdot, ell=1.0):
    kx = minkowski_dot(k, xdot)
    return -ell * ell * minkowski_dot(kdot, kdot) / (kx * kx)


def _mdot(a, b):
    return a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3]


def covariant_lagrangian(profile: RotatorProfile, xdot, k, kdot, m=1.0, ell=1.0):
    """L = -m sqrt(xdot xdot) f(Q); differentiable with hyper-duals."""
    kx = _mdot(k, xdot)
    Q = -ell * ell * _mdot(kdot, kdot) / (kx * kx)
    return -m * ad.sqrt(_mdot(xdot, xdot)) * profile.value(Q)


def covariant_momenta(profile: RotatorProfile, xdot, k, kdot, m=1.0, ell=1.0):
    """Closed-form (p, pi) with upper indices: p = -dL/dxdot, pi = -dL/dkdot."""
    xdot, k, kdot = (np.asarray(a, dtype=float) for a in (xdot, k, kdot))
    Q = covariant_Q(xdot, k, kdot, ell)
    if Q == 0.0:
        raise DegenerateRotation("Q = 0: the null direction does not rotate")
    f, d1, _ = profile.eval(Q)
    sx = math.sqrt(minkowski_dot(xdot, xdot))
    kx = minkowski_dot(k, xdot)
    p = m * f * xdot / sx - 2.0 * m * Q * d1 * sx / kx * k
    pi = 2.0 * m * Q * d1 * sx / minkowski_dot(kdot, kdot) * kdot
    return p, pi


def canonical_momenta(profile: RotatorProfile, state: ChartState, m=1.0, ell=1.0):
    kin = chart_to_covariant(state, ell)
    return covariant_momenta(profile, kin.xdot, kin.k, kin.kdot, m, ell)


def hyperbolic_angle(Q) -> float:
    """Psi with exp(2 Psi) = 1 + sqrt(Q)."""
    return 0.5 * math.log1p(math.sqrt(Q))


def angular_momentum(x, p, k, pi) -> AngularMomentum:
    """M_{mu nu} = x_mu p_nu - x_nu p_mu + k_mu pi_nu - k_nu pi_mu."""
    xl, pl, kl, pil = lower(x), lower(p), lower(k), lower(pi)
    m = np.outer(xl, pl) - np.outer(pl, xl) + np.outer(kl, pil) - np.outer(pil, kl)
    return AngularMomentum(m)


def random_state(rng: np.random.Generator, v_max=0.9, w_max=2.0, theta_margin=0.2) -> ChartState:
    """Random valid chart state away from the poles."""
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    V = direction * v_max * rng.uniform() ** (1.0 / 3.0)
    theta = rng.uniform(theta_margin, math.pi - theta_margin)
    phi = rng.uniform(-math.pi, math.pi)
    st = math.sin(theta)
    w1, w2 = rng.uniform(-w_max, w_max, size=2)
    return ChartState(theta=theta, phi_sph=phi, V=V, theta_dot=w1, phi_sph_dot=w2 / st)


def random_state_in_domain(profile: RotatorProfile, rng: np.random.Generator, **kwargs) -> ChartState:
    """Rejection-sample :func:`random_state` until Q lies inside the profile domain."""
    for _ in range(10000):
        state = random_state(rng, **kwargs)
        Q = chart_Q(state)
        try:
            profile.check_domain(Q)
        except DomainError:
            continue
        lo, hi = profile.domain()
        # keep clear of the partner's Q -> 1 edge where f -> 0
        if hi < math.inf and Q > 0.95 * hi:
            continue
        return state
    raise DomainError(f"could not sample a state inside the domain of {profile.spec}")
