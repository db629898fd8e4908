"""Minkowski four-vector algebra with signature (+,-,-,-) and eps^{0123} = +1.

Four-vectors are plain numpy arrays of shape (4,), contravariant, time
component first.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation

METRIC = np.diag([1.0, -1.0, -1.0, -1.0])


def _levi_civita():
    eps = np.zeros((4, 4, 4, 4))
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i, j in itertools.combinations(range(4), 2) if perm[i] > perm[j])
        eps[perm] = -1.0 if inversions % 2 else 1.0
    return eps


# upper indices: LEVI_CIVITA[0, 1, 2, 3] == 1
LEVI_CIVITA = _levi_civita()


def four_vector(components) -> np.ndarray:
    v = np.asarray(components, dtype=float)
    if v.shape != (4,):
        raise ValueError(f"expected 4 components, got shape {v.shape}")
    return v


def lower(v):
    """Lower the index of a four-vector (or the leading index of an array)."""
    return METRIC @ np.asarray(v, dtype=float)


def minkowski_dot(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3])


def is_timelike(v, tol=1e-12):
    return minkowski_dot(v, v) > tol * scale_of(v) ** 2


def is_spacelike(v, tol=1e-12):
    return minkowski_dot(v, v) < -tol * scale_of(v) ** 2


def is_null(v, tol=1e-12):
    return abs(minkowski_dot(v, v)) <= tol * scale_of(v) ** 2


def scale_of(*vectors) -> float:
    """Largest absolute component among the arguments (the tolerance scale)."""
    return max(float(np.max(np.abs(np.asarray(v, dtype=float)))) for v in vectors)


def epsilon_contract(a, b, c) -> np.ndarray:
    """v^mu = eps^{mu nu alpha beta} a_nu b_alpha c_beta."""
    return np.einsum("mnab,n,a,b->m", LEVI_CIVITA, lower(a), lower(b), lower(c))


@dataclass(frozen=True, eq=False)
class AngularMomentum:
    """Antisymmetric tensor M_{mu nu} with lower indices."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (4, 4):
            raise ValueError("angular momentum must be 4x4")
        # keep exactly antisymmetric
        m = 0.5 * (m - m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_components(cls, components: dict):
        """Build from ``{(mu, nu): value}`` with mu < nu."""
        m = np.zeros((4, 4))
        for (i, j), value in components.items():
            m[i, j] = value
            m[j, i] = -value
        return cls(m)


def pauli_lubanski(M: AngularMomentum, P) -> np.ndarray:
    """W^mu = -1/2 eps^{mu alpha beta gamma} M_{alpha beta} P_gamma."""
    mat = M.matrix if isinstance(M, AngularMomentum) else np.asarray(M, dtype=float)
    return -0.5 * np.einsum("mabg,ab,g->m", LEVI_CIVITA, mat, lower(P))


def boost_matrix(rapidity) -> np.ndarray:
    """Pure boost along the direction of ``rapidity`` by its magnitude."""
    chi = np.asarray(rapidity, dtype=float)
    eta = float(np.linalg.norm(chi))
    L = np.eye(4)
    if eta == 0.0:
        return L
    n = chi / eta
    ch, sh = np.cosh(eta), np.sinh(eta)
    L[0, 0] = ch
    L[0, 1:] = sh * n
    L[1:, 0] = sh * n
    L[1:, 1:] += (ch - 1.0) * np.outer(n, n)
    return L


def rotation_matrix(rotation: Rotation) -> np.ndarray:
    L = np.eye(4)
    L[1:, 1:] = rotation.as_matrix()
    return L


def lorentz_boost(v, rapidity) -> np.ndarray:
    return boost_matrix(rapidity) @ np.asarray(v, dtype=float)


def cm_boost(P) -> np.ndarray:
    """Boost taking the timelike vector P to its rest frame."""
    P = np.asarray(P, dtype=float)
    mass = np.sqrt(minkowski_dot(P, P))
    p3 = P[1:]
    pn = float(np.linalg.norm(p3))
    if pn == 0.0:
        return np.eye(4)
    eta = np.arcsinh(pn / mass)
    return boost_matrix(-eta * p3 / pn)


@dataclass(frozen=True, eq=False)
class SolutionFrame:
    """Constant vectors (P, S, N) fixing an exact rotator solution."""

    P: np.ndarray
    S: np.ndarray
    N: np.ndarray
    m: float = 1.0
    ell: float = 1.0

    def transformed(self, L) -> "SolutionFrame":
        return SolutionFrame(L @ self.P, L @ self.S, L @ self.N, self.m, self.ell)

    def invariant_errors(self) -> dict:
        """Relative violation of each frame condition."""
        m, ell = self.m, self.ell
        sc = scale_of(self.P / m, self.S / (0.5 * m * m * ell), self.N)
        P, S, N = self.P / m, self.S / (0.5 * m * m * ell), self.N
        return {
            "PP": abs(minkowski_dot(P, P) - 1.0) / sc**2,
            "SS": abs(minkowski_dot(S, S) + 1.0) / sc**2,
            "SP": abs(minkowski_dot(S, P)) / sc**2,
            "NN": abs(minkowski_dot(N, N) + 1.0) / sc**2,
            "NS": abs(minkowski_dot(N, S)) / sc**2,
            "NP": abs(minkowski_dot(N, P)) / sc**2,
        }


def random_lorentz(rng: np.random.Generator, max_rapidity=2.0) -> np.ndarray:
    """Uniform spatial rotation followed by a boost of rapidity in [0, max]."""
    rot = rotation_matrix(Rotation.random(random_state=rng))
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    eta = rng.uniform(0.0, max_rapidity)
    return boost_matrix(eta * direction) @ rot


def build_solution_frame(m=1.0, ell=1.0, seed=None) -> SolutionFrame:
    """Rest-frame triple, randomly rotated and boosted unless ``seed`` is None."""
    if m <= 0 or ell <= 0:
        raise ValueError("m and ell must be positive")
    frame = SolutionFrame(
        P=np.array([m, 0.0, 0.0, 0.0]),
        S=np.array([0.0, 0.0, 0.0, 0.5 * m * m * ell]),
        N=np.array([0.0, 1.0, 0.0, 0.0]),
        m=float(m),
        ell=float(ell),
    )
    if seed is None:
        return frame
    rng = np.random.default_rng(seed)
    return frame.transformed(random_lorentz(rng))
