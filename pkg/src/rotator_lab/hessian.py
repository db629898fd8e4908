"""The 5x5 velocity Hessian of the chart Lagrangian.

Variables are ordered (w1, w2, V1, V2, V3) with w = (theta_dot,
phi_sph_dot sin(theta)). The closed-form blocks A (w,w), B (w,V) and
C (V,V) are checked against an exact hyper-dual Hessian of Lc.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import autodiff as ad
from .chart import ChartState, chart_Q, lagrangian_q, lagrangian_wv, random_state_in_domain
from .errors import SingularBlock, SingularDerivative
from .profiles import RotatorProfile, degeneracy_factor

DEGENERACY_THRESHOLD = 1e-8

SCAN_COLUMNS = ("seed", "state_id", "Q", "det_closed", "det_numeric", "rel_det", "sigma_min_over_max")


@dataclass(frozen=True, eq=False)
class HessianBlocks:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.A, self.B], [self.B.T, self.C]])


def _kinematics(profile, state):
    Q = chart_Q(state)
    f, d1, d2 = profile.eval(Q)
    if d1 == 0.0:
        raise SingularDerivative(f"f'(Q) = 0 at Q={Q!r}")
    return Q, f, d1, d2


def hessian_blocks(profile: RotatorProfile, state: ChartState) -> HessianBlocks:
    Q, f, d1, d2 = _kinematics(profile, state)
    w, V, N = state.w, state.V, state.N
    ww = float(w @ w)
    vv = float(V @ V)
    d = 1.0 - float(N @ V)
    root = math.sqrt(1.0 - vv)
    r = Q * d2 / d1
    pref = 2.0 * Q * d1 * root / ww

    A = pref * (np.eye(2) + 2.0 * r * np.outer(w, w) / ww)
    B = pref * (2.0 * (1.0 + r) * np.outer(w, N) / d - np.outer(w, V) / (1.0 - vv))
    NV = np.outer(N, V)
    C = -(f / root) * (
        np.eye(3)
        + np.outer(V, V) / (1.0 - vv)
        + 2.0 * Q * d1 / f * ((NV + NV.T) / d - (3.0 + 2.0 * r) * (1.0 - vv) / d**2 * np.outer(N, N))
    )
    # symmetric by construction up to rounding in the outer products
    A = 0.5 * (A + A.T)
    C = 0.5 * (C + C.T)
    return HessianBlocks(A, B, C)


def numeric_hessian(profile: RotatorProfile, state: ChartState, method="dual", lagrangian=None) -> np.ndarray:
    """Second derivatives of Lc with respect to (w, V) at the state.

    ``method`` is ``"dual"`` (exact hyper-dual propagation) or ``"fd"``
    (central differences). ``lagrangian`` replaces Lc(w, V) for testing.
    """
    N = state.N
    if lagrangian is None:
        def lagrangian(z):
            return lagrangian_wv(profile, z[0:2], z[2:5], N)
    z0 = np.concatenate([state.w, state.V])
    if method == "dual":
        return ad.hessian(lagrangian, z0)[2]
    if method == "fd":
        return ad.fd_hessian(lambda z: ad.real(lagrangian(z)), z0)
    raise ValueError(f"unknown method {method!r}")


def raw_velocity_hessian(profile: RotatorProfile, state: ChartState) -> np.ndarray:
    """Hessian of Lc with respect to (theta_dot, phi_sph_dot, V)."""
    q = state.q

    def lag(qdot):
        return lagrangian_q(profile, q, qdot)

    return ad.hessian(lag, state.qdot)[2]


def inverse_A(profile: RotatorProfile, state: ChartState) -> np.ndarray:
    """A^{-1} from the rank-one structure of A."""
    Q, f, d1, d2 = _kinematics(profile, state)
    w = state.w
    ww = float(w @ w)
    det_factor = 1.0 + 2.0 * Q * d2 / d1
    if abs(det_factor) < 1e-12:
        raise SingularBlock(f"1 + 2Qf''/f' = {det_factor!r}: A is not invertible")
    root = math.sqrt(1.0 - float(state.V @ state.V))
    return ww / (2.0 * Q * d1 * root) * (np.eye(2) - 2.0 * Q * d2 / (d1 + 2.0 * Q * d2) * np.outer(w, w) / ww)


def det_prefactor(profile: RotatorProfile, state: ChartState) -> float:
    """-4 f^3 f'^2 / ((1 - N.V)^4 (1 - V.V)^{3/2})."""
    Q, f, d1, _ = _kinematics(profile, state)
    d = 1.0 - float(state.N @ state.V)
    vv = float(state.V @ state.V)
    return -4.0 * f**3 * d1**2 / (d**4 * (1.0 - vv) ** 1.5)


def closed_det_H(profile: RotatorProfile, state: ChartState) -> float:
    return det_prefactor(profile, state) * degeneracy_factor(profile, chart_Q(state))


def schur_det(blocks: HessianBlocks, A_inv=None) -> float:
    """det(A) det(C - B^T A^{-1} B)."""
    if A_inv is None:
        A_inv = np.linalg.inv(blocks.A)
    schur = blocks.C - blocks.B.T @ A_inv @ blocks.B
    return float(np.linalg.det(blocks.A) * lu_det(schur))


def lu_det(M) -> float:
    """Determinant from an LU factorization with partial pivoting."""
    with warnings.catch_warnings():
        # an exactly singular factor is a legitimate answer here
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(np.asarray(M, dtype=float), check_finite=True)
    sign = (-1.0) ** int(np.sum(piv != np.arange(len(piv))))
    return float(sign * np.prod(np.diag(lu)))


def sigma_ratio(H) -> float:
    s = np.linalg.svd(H, compute_uv=False)
    return float(s[-1] / s[0])


def relative_det(H) -> float:
    """|det H| / ||H||_2^5, a scale-free degeneracy measure."""
    return abs(lu_det(H)) / np.linalg.norm(H, 2) ** H.shape[0]


def is_degenerate(H, threshold=DEGENERACY_THRESHOLD) -> bool:
    return sigma_ratio(H) < threshold


def degeneracy_scan(profile: RotatorProfile, n_states: int, seed: int = 0) -> dict:
    """Sample random states and measure how singular the velocity Hessian is."""
    if n_states < 1:
        raise ValueError("n_states must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_states)
    rows = []
    for i, child in enumerate(children):
        state = random_state_in_domain(profile, np.random.default_rng(child))
        H = numeric_hessian(profile, state)
        rows.append(
            {
                "seed": seed,
                "state_id": i,
                "Q": chart_Q(state),
                "det_closed": closed_det_H(profile, state),
                "det_numeric": lu_det(H),
                "rel_det": relative_det(H),
                "sigma_min_over_max": sigma_ratio(H),
            }
        )
    rel = [r["rel_det"] for r in rows]
    sig = [r["sigma_min_over_max"] for r in rows]
    return {
        "profile": profile.spec,
        "seed": seed,
        "n_states": n_states,
        "max_rel_det": max(rel),
        "min_rel_det": min(rel),
        "max_sigma_ratio": max(sig),
        "min_sigma_ratio": min(sig),
        "rows": rows,
    }


def scan_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCAN_COLUMNS)
    for row in report["rows"]:
        writer.writerow([row["seed"], row["state_id"]] + [format_float(row[c]) for c in SCAN_COLUMNS[2:]])
    return buf.getvalue()


def format_float(x) -> str:
    return format(float(x), ".17g")
