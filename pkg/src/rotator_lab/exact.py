"""Exact free motion of the fundamental rotator with an arbitrary phase.

    x(t) = (P/m) t + (ell/2) r(t) + x(0),    k(t) = P/m + rdot / sqrt(-rdot.rdot),
    r(t) = N sin(phi(t)) + Nperp cos(phi(t)),

where t is the proper time of the centre-of-momentum frame and phi(t) is
any function with 0 < phidot < 2/ell.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .chart import angular_momentum, covariant_momenta, covariant_Q, covariant_lagrangian, state_from_covariant
from .dynamics import RESIDUAL_STEP, chart_scale, el_residual_chart, el_residual_covariant
from .errors import DomainError, JetMismatch, PhaseStall
from .hessian import format_float
from .minkowski import SolutionFrame, cm_boost, epsilon_contract, pauli_lubanski, scale_of
from .profiles import FUNDAMENTAL, RotatorProfile

# max centre-of-momentum separation must exceed this (in units of ell)
# for the canonical pair; the observed value is ell*sin(0.2) ~ 0.199 ell
DIVERGENCE_THRESHOLD = 0.1

PAIR_COLUMNS = ("t", "phi1", "phi2", "residual1", "residual2", "delta")


@dataclass(frozen=True)
class PhaseProfile:
    """phi(t) = omega t  or  phi(t) = omega t + eps (1 - cos(nu t))."""

    omega: float
    eps: float = 0.0
    nu: float = 0.0

    @classmethod
    def linear(cls, omega):
        return cls(omega)

    @classmethod
    def modulated(cls, omega, eps, nu):
        return cls(omega, eps, nu)

    @property
    def kind(self) -> str:
        return "linear" if self.eps == 0.0 or self.nu == 0.0 else "modulated"

    def phi(self, t):
        return self.omega * t + self.eps * (1.0 - np.cos(self.nu * t))

    def phidot(self, t):
        return self.omega + self.eps * self.nu * np.sin(self.nu * t)

    def phiddot(self, t):
        return self.eps * self.nu**2 * np.cos(self.nu * t)

    def bounds(self):
        """Infimum and supremum of phidot over all t."""
        amp = abs(self.eps * self.nu)
        return self.omega - amp, self.omega + amp

    def check(self, ell=1.0):
        lo, hi = self.bounds()
        if not lo > 0.0:
            raise PhaseStall(f"phase speed reaches {lo!r} <= 0")
        if not hi < 2.0 / ell:
            raise DomainError(f"phase speed reaches {hi!r} >= 2/ell")

    def is_admissible(self, ell=1.0) -> bool:
        lo, hi = self.bounds()
        return lo > 0.0 and hi < 2.0 / ell


def random_phase(rng: np.random.Generator, ell=1.0, lo=0.1, hi=1.6) -> PhaseProfile:
    """Admissible modulated phase with phidot inside (lo, hi) / ell.

    The default upper limit keeps tanh(Psi) <= 0.8; closer to 2/ell the
    residuals lose digits to cancellation as Q grows without bound.
    """
    omega = rng.uniform(lo + 0.1 * (hi - lo), hi - 0.1 * (hi - lo)) / ell
    room = min(omega - lo / ell, hi / ell - omega)
    amp = rng.uniform(0.0, room)
    nu = rng.uniform(0.2, 3.0) / ell
    sign = rng.choice([-1.0, 1.0])
    return PhaseProfile(omega, sign * amp / nu, nu)


@dataclass(frozen=True, eq=False)
class ExactSolution:
    frame: SolutionFrame
    phase: PhaseProfile
    x0: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        self.phase.check(self.frame.ell)

    @property
    def N_perp(self) -> np.ndarray:
        f = self.frame
        return epsilon_contract(f.N, f.S, f.P) / (0.5 * f.m**3 * f.ell)

    def r(self, t):
        phi = self.phase.phi(t)
        return self.frame.N * math.sin(phi) + self.N_perp * math.cos(phi)

    def n(self, t):
        phi = self.phase.phi(t)
        return self.frame.N * math.cos(phi) - self.N_perp * math.sin(phi)

    def transformed(self, L) -> "ExactSolution":
        return ExactSolution(self.frame.transformed(L), self.phase, L @ self.x0)


def exact_eval(sol: ExactSolution, t):
    """(x, xdot, k, kdot) at CM proper time t; derivatives are d/dt."""
    P, m, ell = sol.frame.P, sol.frame.m, sol.frame.ell
    phidot = sol.phase.phidot(t)
    if not phidot > 0.0:
        raise PhaseStall(f"phidot({t!r}) = {phidot!r} is not positive")
    r, n = sol.r(t), sol.n(t)
    x = P / m * t + 0.5 * ell * r + sol.x0
    xdot = P / m + 0.5 * ell * phidot * n
    k = P / m + n
    kdot = -phidot * r
    return x, xdot, k, kdot


def great_circle_defect(sol: ExactSolution, phi) -> float:
    """|n''(phi) + n(phi)| for n(phi) = dr/dphi, using the analytic derivatives."""
    N, Np = sol.frame.N, sol.N_perp
    n = N * math.cos(phi) - Np * math.sin(phi)
    n2 = -N * math.cos(phi) + Np * math.sin(phi)
    return float(np.max(np.abs(n2 + n)))


def chart_time(sol: ExactSolution, t) -> float:
    return float(exact_eval(sol, t)[0][0]) / sol.frame.ell


def cm_time(sol: ExactSolution, tc) -> float:
    """Invert x^0(t) = ell tc by Newton iteration (x^0 is strictly increasing)."""
    P, m, ell = sol.frame.P, sol.frame.m, sol.frame.ell
    target = ell * tc
    t = (target - sol.x0[0]) * m / P[0]
    for _ in range(60):
        x, xdot, _, _ = exact_eval(sol, t)
        step = (x[0] - target) / xdot[0]
        t -= step
        if abs(step) <= 4e-16 * max(1.0, abs(t)):
            break
    return t


def chart_curve(sol: ExactSolution):
    """tc -> ChartState along the solution, with chart time tc = x^0 / ell."""
    ell = sol.frame.ell

    def curve(tc):
        t = cm_time(sol, tc)
        state, _ = state_from_covariant(*exact_eval(sol, t), ell=ell)
        return state

    return curve


def covariant_curve(sol: ExactSolution):
    return lambda t: exact_eval(sol, t)


def chart_residual_at(profile, sol, t, h=None) -> float:
    curve = chart_curve(sol)
    tc = chart_time(sol, t)
    res = el_residual_chart(profile, curve, tc, h)
    return float(np.max(np.abs(res))) / chart_scale(profile, curve(tc))


def covariant_residual_at(profile, sol, t, h=RESIDUAL_STEP) -> float:
    f = sol.frame
    return el_residual_covariant(profile, covariant_curve(sol), t, f.m, f.ell, h).relative


def verify_exact(profile: RotatorProfile, sol: ExactSolution, t_grid, h=None) -> dict:
    """Chart and covariant Euler-Lagrange residuals (relative to scale) along the grid.

    ``h=None`` uses the adaptive chart step and RESIDUAL_STEP for the
    covariant residual; a number fixes both.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    chart = np.array([chart_residual_at(profile, sol, t, h) for t in t_grid])
    cov = np.array([covariant_residual_at(profile, sol, t, RESIDUAL_STEP if h is None else h) for t in t_grid])
    return {
        "profile": profile.spec,
        "t": t_grid,
        "chart": chart,
        "covariant": cov,
        "max_chart": float(chart.max()),
        "max_covariant": float(cov.max()),
        "max_residual": float(max(chart.max(), cov.max())),
    }


def angular_speed(sol: ExactSolution, t) -> float:
    phidot = float(sol.phase.phidot(t))
    if not phidot > 0.0:
        raise PhaseStall(f"phidot({t!r}) = {phidot!r} is not positive")
    return phidot


def kinematic_angular_speed(sol: ExactSolution, t) -> float:
    """(2/ell) tanh(Psi) with exp(2 Psi) = 1 + sqrt(Q) from the kinematics at t."""
    x, xdot, k, kdot = exact_eval(sol, t)
    ell = sol.frame.ell
    s = math.sqrt(covariant_Q(xdot, k, kdot, ell))
    return 2.0 / ell * s / (2.0 + s)


def action_along(sol: ExactSolution, T, m=None, ell=None) -> float:
    """S(T) - S(0) = -mT - (m ell / 2)(phi(T) - phi(0)), valid for phidot > 0."""
    m = sol.frame.m if m is None else m
    ell = sol.frame.ell if ell is None else ell
    return -m * T - 0.5 * m * ell * (sol.phase.phi(T) - sol.phase.phi(0.0))


def action_quadrature(sol: ExactSolution, T, profile: RotatorProfile = FUNDAMENTAL, panels=10_000) -> float:
    """Composite Simpson integral of L along the solution from 0 to T."""
    f = sol.frame
    ts = np.linspace(0.0, T, panels + 1)
    L = np.empty_like(ts)
    for i, t in enumerate(ts):
        _, xdot, k, kdot = exact_eval(sol, t)
        L[i] = covariant_lagrangian(profile, xdot, k, kdot, f.m, f.ell)
    return float(simpson(L, x=ts))


def noether_charges(profile, sol: ExactSolution, t):
    """(p, M, W) from the kinematics of the solution at t."""
    f = sol.frame
    x, xdot, k, kdot = exact_eval(sol, t)
    p, pi = covariant_momenta(profile, xdot, k, kdot, f.m, f.ell)
    M = angular_momentum(x, p, k, pi)
    return p, M, pauli_lubanski(M, p)


def separation(sol1: ExactSolution, sol2: ExactSolution, t) -> float:
    """Spatial distance between the two solutions in the CM frame of sol1."""
    dx = exact_eval(sol1, t)[0] - exact_eval(sol2, t)[0]
    return float(np.linalg.norm((cm_boost(sol1.frame.P) @ dx)[1:]))


def indeterminism_pair(frame: SolutionFrame, phase1: PhaseProfile, phase2: PhaseProfile, T, t_grid,
                       profile: RotatorProfile = FUNDAMENTAL, x0=None, jet_tol=1e-12) -> dict:
    """Two exact solutions with identical data at t = 0 and different futures."""
    x0 = np.zeros(4) if x0 is None else np.asarray(x0, dtype=float)
    sol1 = ExactSolution(frame, phase1, x0)
    sol2 = ExactSolution(frame, phase2, x0)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.min() < 0 or t_grid.max() > T:
        raise ValueError("grid must lie inside [0, T]")
    jets = [np.concatenate(exact_eval(s, 0.0)) for s in (sol1, sol2)]
    scale = scale_of(*jets)
    jet_match = float(np.max(np.abs(jets[0] - jets[1]))) / scale
    if jet_match > jet_tol:
        raise JetMismatch(f"initial data differ by {jet_match:.3e} (relative)")
    res = [verify_exact(profile, s, t_grid) for s in (sol1, sol2)]
    residual1 = np.maximum(res[0]["chart"], res[0]["covariant"])
    residual2 = np.maximum(res[1]["chart"], res[1]["covariant"])
    delta = np.array([separation(sol1, sol2, t) for t in t_grid]) / frame.ell
    return {
        "profile": profile.spec,
        "jet_match": jet_match,
        "t": t_grid,
        "phi1": np.array([phase1.phi(t) for t in t_grid]),
        "phi2": np.array([phase2.phi(t) for t in t_grid]),
        "residual1": residual1,
        "residual2": residual2,
        "max_residual1": float(residual1.max()),
        "max_residual2": float(residual2.max()),
        "delta": delta,
        "max_delta": float(delta.max()),
    }


def pair_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(PAIR_COLUMNS)
    for i in range(len(report["t"])):
        writer.writerow([format_float(report[c][i]) for c in PAIR_COLUMNS])
    return buf.getvalue()
