"""Interval criteria: turn defect norms into certified spectral intervals.

Three routes produce a CriterionReport:
  * the sup-L1/L2 criterion (epsilon = min(1, (lambda+1) sigma^{1/3})),
  * the L2 residual criterion (epsilon = sigma),
  * the boundary variant for piecewise-linear test functions, which adds the
    gradient mass on the boundary spheres and then reuses the sup-L1 formula.
A fourth route works at the matrix level: quadratic-form checks of the
generalized Weyl criterion through shifted resolvents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, InapplicableError, InputError, ParameterError
from .manifold import ModelManifold
from .testfunctions import DefectNorms, RadialTestFunction, defect_norms

__all__ = [
    "CriterionReport",
    "MatrixWeylReport",
    "PowerSpec",
    "certify_sup_l1",
    "residual_l2",
    "boundary_criterion",
    "weyl_matrix_check",
]


def _epsilon_cube_root(lam: float, sigma: float) -> float:
    return min(1.0, (lam + 1.0) * sigma ** (1.0 / 3.0))


@dataclass(frozen=True)
class CriterionReport:
    lam: float
    sigma: float
    epsilon: float
    method: str  # sup_l1 | residual_l2 | boundary
    essential: bool
    construction: dict
    sigma_error: float = 0.0       # propagated quadrature error on sigma
    proof_side_bound: float = 0.0  # diagnostic only; not used for the interval

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lam - self.epsilon, self.lam + self.epsilon)

    def to_json(self) -> dict:
        lo, hi = self.interval
        return {
            "lambda": self.lam,
            "sigma": self.sigma,
            "epsilon": self.epsilon,
            "interval": [max(lo, 0.0), hi],
            "method": self.method,
            "essential": self.essential,
            "construction": self.construction,
            "sigma_error": self.sigma_error,
        }


def _sigma_with_error(norms: DefectNorms, extra_l1: float = 0.0) -> tuple[float, float]:
    s = norms.sup_norm * (norms.l1_defect + extra_l1) / norms.l2_sq
    # first-order propagation of the two quadrature error estimates
    err = norms.sup_norm * (
        norms.l1_error / norms.l2_sq
        + (norms.l1_defect + extra_l1) * norms.l2_sq_error / norms.l2_sq**2
    )
    return s, err


def certify_sup_l1(
    norms: DefectNorms,
    lam: float,
    essential_flag: bool,
    construction: dict | None = None,
) -> CriterionReport:
    """sigma = sup|u| * ||(Delta+lambda)u||_L1 / ||u||_L2^2, interval half-width
    epsilon = min(1, (lambda+1) sigma^{1/3})."""
    if lam < 0:
        raise ParameterError("lambda must be nonnegative")
    sigma, err = _sigma_with_error(norms)
    if sigma == 0.0:
        raise InputError(
            "sigma = 0: a compactly supported function cannot be an exact "
            "eigenfunction; upstream norms are wrong"
        )
    eps = _epsilon_cube_root(lam, sigma)
    proof = (lam * (lam + 1.0) * (lam + eps) / eps**2 + 1.0) * sigma
    return CriterionReport(
        lam=lam,
        sigma=sigma,
        epsilon=eps,
        method="sup_l1",
        essential=essential_flag,
        construction=construction or {},
        sigma_error=err,
        proof_side_bound=proof,
    )


def residual_l2(
    norms: DefectNorms, lam: float, construction: dict | None = None,
    essential_flag: bool = False,
) -> CriterionReport:
    """L2 residual criterion: sigma = ||(Delta+lambda)u||_L2 / ||u||_L2,
    interval (lambda - sigma, lambda + sigma)."""
    if not math.isfinite(norms.l2_defect):
        raise InapplicableError(
            "distributional Laplacian is not square-integrable (kinked test "
            "function); the L2 criterion does not apply"
        )
    sigma = norms.l2_defect / math.sqrt(norms.l2_sq)
    return CriterionReport(
        lam=lam,
        sigma=sigma,
        epsilon=sigma,
        method="residual_l2",
        essential=essential_flag,
        construction=construction or {},
    )


def boundary_criterion(
    M: ModelManifold, tf: RadialTestFunction, lam: float,
    essential_flag: bool = False,
) -> CriterionReport:
    """Variant for tent functions on an annular domain: the gradient mass on
    the two boundary spheres joins the L1 defect, then the sup-L1 interval
    formula applies."""
    if tf.kind != "tent":
        raise InputError("boundary criterion expects a tent test function")
    if tf.support[0] <= M.pole_cutoff:
        raise DomainError("tent support must start strictly inside the domain")
    norms = defect_norms(M, tf)
    sigma, err = _sigma_with_error(norms, extra_l1=norms.boundary_grad)
    eps = _epsilon_cube_root(lam, sigma)
    return CriterionReport(
        lam=lam,
        sigma=sigma,
        epsilon=eps,
        method="boundary",
        essential=essential_flag,
        construction=tf.to_json(),
        sigma_error=err,
    )


# -- matrix-level quadratic-form checks --------------------------------------


@dataclass(frozen=True)
class PowerSpec:
    """f(x) = (x + alpha)^{-N}; the companion exponent N+1 is also reported."""

    alpha: float
    N: int

    def __post_init__(self):
        if self.alpha <= 1.0:
            raise ParameterError("power spec needs alpha > 1")
        if self.N < 1:
            raise ParameterError("power spec needs N >= 1")


FSpec = Union[str, PowerSpec]


@dataclass(frozen=True)
class MatrixWeylReport:
    q_lin: float
    q_f: float
    f_spec: str
    psi_norm: float
    q_f_next: float | None = None   # companion exponent for power specs
    residual: float = 0.0           # worst linear-solve residual norm


def _as_operator(H):
    """Return (matvec, solve_shifted, size) for dense arrays or tridiagonal
    objects exposing .d / .e arrays."""
    if hasattr(H, "d") and hasattr(H, "e"):
        d = np.asarray(H.d, float)
        e = np.asarray(H.e, float)
        m = d.size

        def matvec(v):
            out = d * v
            out[:-1] += e * v[1:]
            out[1:] += e * v[:-1]
            return out

        def solve(shift, rhs):
            from scipy.linalg import solveh_banded

            ab = np.zeros((2, m))
            ab[0, 1:] = e
            ab[1] = d + shift
            return solveh_banded(ab, rhs)

        return matvec, solve, m
    A = np.asarray(H, float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError("operator must be square")
    if not np.allclose(A, A.T, atol=1e-12 * max(1.0, float(np.abs(A).max()))):
        raise InputError("operator must be symmetric")
    m = A.shape[0]

    def matvec(v):
        return A @ v

    def solve(shift, rhs):
        from scipy.linalg import cho_factor, cho_solve

        cf = cho_factor(A + shift * np.eye(m))
        return cho_solve(cf, rhs)

    return matvec, solve, m


def _refined_solve(matvec, solve, shift, rhs):
    """One step of iterative refinement; returns (solution, residual norm)."""
    z = solve(shift, rhs)
    r = rhs - (matvec(z) + shift * z)
    nr = float(np.linalg.norm(r))
    if nr > 1e-12 * max(float(np.linalg.norm(rhs)), 1e-300):
        z = z + solve(shift, r)
        r = rhs - (matvec(z) + shift * z)
        nr = float(np.linalg.norm(r))
    return z, nr


def weyl_matrix_check(H, psi, lam: float, f_spec: FSpec = "resolvent_shift1") -> MatrixWeylReport:
    """Quadratic forms of the generalized Weyl criterion:
    q_lin = (psi, (H - lambda) psi) and q_f = (f(H)(H - lambda) psi, (H - lambda) psi),
    with f a resolvent power, evaluated by shifted solves (never an inverse)."""
    matvec, solve, m = _as_operator(H)
    psi = np.asarray(psi, float)
    if psi.shape != (m,):
        raise InputError(f"psi must have shape ({m},)")
    nrm = float(np.linalg.norm(psi))
    if nrm == 0.0:
        raise InputError("psi must be nonzero")
    psi = psi / nrm

    w = matvec(psi) - lam * psi
    q_lin = float(psi @ w)

    if f_spec == "resolvent_shift1":
        z, res = _refined_solve(matvec, solve, 1.0, w)
        q_f = float(z @ w)
        return MatrixWeylReport(
            q_lin=q_lin, q_f=max(q_f, 0.0), f_spec="resolvent_shift1",
            psi_norm=1.0, residual=res,
        )
    if isinstance(f_spec, PowerSpec):
        z = w
        res = 0.0
        for _ in range(f_spec.N):
            z, r = _refined_solve(matvec, solve, f_spec.alpha, z)
            res = max(res, r)
        q_f = float(z @ w)
        z, r = _refined_solve(matvec, solve, f_spec.alpha, z)
        res = max(res, r)
        q_next = float(z @ w)
        return MatrixWeylReport(
            q_lin=q_lin, q_f=max(q_f, 0.0),
            f_spec=f"power(alpha={f_spec.alpha}, N={f_spec.N})",
            psi_norm=1.0, q_f_next=max(q_next, 0.0), residual=res,
        )
    raise InputError(f"unknown f_spec {f_spec!r}")
