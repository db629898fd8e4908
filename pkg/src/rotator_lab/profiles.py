"""The family of rotator profiles f(Q) and the closed forms built from them."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DomainError, SingularDerivative, StepFailure

KINDS = ("fundamental", "partner", "affine", "deformed", "custom")


@dataclass(frozen=True)
class RotatorProfile:
    """A member of the family L = -m sqrt(xdot xdot) f(Q).

    ``params`` depends on ``kind``: ``affine`` takes ``(a,)`` for f = 1 + aQ,
    ``deformed`` takes ``(eps,)`` for f = sqrt(1 + sqrt Q) + eps Q, ``custom``
    takes ``(c1, c2)`` for f = c1 sqrt(1 + c2 sqrt Q). The fundamental and
    partner profiles are the custom members with c1 = 1, c2 = +1 / -1.
    """

    kind: str
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown profile kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        expected = {"fundamental": 0, "partner": 0, "affine": 1, "deformed": 1, "custom": 2}[self.kind]
        if len(self.params) != expected:
            raise ValueError(f"{self.kind} profile takes {expected} parameter(s)")

    @property
    def spec(self) -> str:
        if not self.params:
            return self.kind
        return ":".join([self.kind] + [repr(p) for p in self.params])

    @property
    def degenerate_family(self) -> bool:
        """True for members of c1 sqrt(1 + c2 sqrt Q), whose Hessian is singular."""
        if self.kind in ("fundamental", "partner"):
            return True
        if self.kind == "custom":
            return self.params[0] != 0.0 and self.params[1] != 0.0
        if self.kind == "deformed":
            return self.params[0] == 0.0
        return False

    def _c1c2(self):
        if self.kind == "fundamental":
            return 1.0, 1.0
        if self.kind == "partner":
            return 1.0, -1.0
        return self.params

    def check_domain(self, Q):
        q = ad.real(Q)
        if not math.isfinite(q) or q < 0.0:
            raise DomainError(f"Q={q!r} outside domain of {self.spec}")
        if self.kind != "affine" and q == 0.0:
            raise DomainError(f"Q=0 excluded for {self.spec}: f' diverges")
        if self.kind in ("fundamental", "partner", "custom"):
            _, c2 = self._c1c2()
            if 1.0 + c2 * math.sqrt(q) <= 0.0:
                raise DomainError(f"Q={q!r} outside domain of {self.spec}")
        f = self._value(q)
        if not f > 0.0:
            raise DomainError(f"f(Q)={f!r} is not positive at Q={q!r} for {self.spec}")

    def _value(self, Q):
        if self.kind == "affine":
            return 1.0 + self.params[0] * Q
        if self.kind == "deformed":
            return ad.sqrt(1.0 + ad.sqrt(Q)) + self.params[0] * Q
        c1, c2 = self._c1c2()
        return c1 * ad.sqrt(1.0 + c2 * ad.sqrt(Q))

    def value(self, Q):
        """f(Q); accepts floats or hyper-dual numbers."""
        self.check_domain(Q)
        return self._value(Q)

    __call__ = value

    def eval(self, Q):
        """Return (f, f', f'') at Q from the analytic derivatives."""
        self.check_domain(Q)
        Q = float(Q)
        if self.kind == "affine":
            a = self.params[0]
            return 1.0 + a * Q, a, 0.0
        if self.kind == "deformed":
            f, d1, d2 = _sqrt_family(1.0, 1.0, Q)
            eps = self.params[0]
            return f + eps * Q, d1 + eps, d2
        c1, c2 = self._c1c2()
        return _sqrt_family(c1, c2, Q)

    def domain(self):
        """Open interval (lo, hi) of admissible Q; lo is inclusive for affine."""
        if self.kind in ("partner", "custom") and self._c1c2()[1] < 0:
            return 0.0, 1.0 / self._c1c2()[1] ** 2
        if self.kind == "affine" and self.params[0] < 0:
            return 0.0, -1.0 / self.params[0]
        return 0.0, math.inf


def _sqrt_family(c1, c2, Q):
    s = math.sqrt(Q)
    g = math.sqrt(1.0 + c2 * s)
    d1 = c2 / (4.0 * s * g)
    d2 = -c2 / (8.0 * Q * s * g) - c2 * c2 / (16.0 * Q * g**3)
    return c1 * g, c1 * d1, c1 * d2


def parse_profile(text: str) -> RotatorProfile:
    """Parse ``fundamental``, ``partner``, ``affine:a``, ``deformed:eps`` or ``custom:c1:c2``."""
    parts = text.strip().split(":")
    kind = parts[0]
    try:
        params = tuple(float(p) for p in parts[1:])
    except ValueError as exc:
        raise ValueError(f"bad profile spec {text!r}") from exc
    try:
        return RotatorProfile(kind, params)
    except ValueError as exc:
        raise ValueError(f"bad profile spec {text!r}: {exc}") from exc


FUNDAMENTAL = RotatorProfile("fundamental")
PARTNER = RotatorProfile("partner")


def degeneracy_factor(profile: RotatorProfile, Q) -> float:
    """1 + 2Q(f'/f + f''/f'); vanishes identically on the degenerate family."""
    f, d1, d2 = profile.eval(Q)
    if d1 == 0.0:
        raise SingularDerivative(f"f'(Q) = 0 at Q={Q!r} for {profile.spec}")
    return 1.0 + 2.0 * Q * (d1 / f + d2 / d1)


def casimir_mass_sq(profile: RotatorProfile, Q, m=1.0) -> float:
    f, d1, _ = profile.eval(Q)
    return m * m * (f * f - 4.0 * Q * f * d1)


def casimir_spin_sq(profile: RotatorProfile, Q, m=1.0, ell=1.0) -> float:
    f, d1, _ = profile.eval(Q)
    return -4.0 * m**4 * ell**2 * Q * f * f * d1 * d1


def fit_sqrt_family(Q0, f0, f0p):
    """(c1, c2) such that c1 sqrt(1 + c2 sqrt Q) has value f0 and slope f0p at Q0."""
    if f0p == 0.0:
        raise SingularDerivative("f0' = 0: no member of the degenerate family matches")
    s = math.sqrt(Q0)
    r = 4.0 * s * f0p / f0
    denom = 1.0 - r * s
    if denom == 0.0:
        raise SingularDerivative("initial data lie on the boundary of the family")
    c2 = r / denom
    c1 = f0 / math.sqrt(1.0 + c2 * s)
    return c1, c2


def sqrt_family(c1, c2, Q):
    return c1 * np.sqrt(1.0 + c2 * np.sqrt(Q))


def solve_degeneracy_ode(Q0, f0, f0p, Q_end, steps):
    """Integrate f'' = -f'(1/(2Q) + f'/f) with classic RK4 on a uniform Q grid.

    Returns ``(Q, f, fp)`` arrays of length ``steps + 1``.
    """
    if not (Q0 > 0 and f0 > 0 and Q_end > Q0 and steps >= 1):
        raise DomainError("need Q0 > 0, f0 > 0, Q_end > Q0, steps >= 1")
    if f0p == 0.0:
        raise SingularDerivative("f0' = 0 gives the trivial constant solution")

    def rhs(Q, y):
        f, fp = y
        return np.array([fp, -fp * (0.5 / Q + fp / f)])

    h = (Q_end - Q0) / steps
    Qs = Q0 + h * np.arange(steps + 1)
    ys = np.empty((steps + 1, 2))
    y = np.array([f0, f0p], dtype=float)
    ys[0] = y
    for i in range(steps):
        Q = Qs[i]
        k1 = rhs(Q, y)
        k2 = rhs(Q + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(Q + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(Q + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not y[0] > 0.0:
            raise StepFailure(f"f crossed zero near Q={Qs[i + 1]!r}")
        ys[i + 1] = y
    Qs[-1] = Q_end
    return Qs, ys[:, 0], ys[:, 1]
