"""Angular second moments and the angularly-isotropic position.

The position is computed with a Tyler-type fixed point

    S <- n * sum_i w_i x_i x_i^T / (x_i^T S^{-1} x_i),   trace(S) = n,

whose fixed point S makes A = S^{-1/2} send X to an angularly-isotropic
vector: the weighted average of (Ax/|Ax|)(Ax/|Ax|)^T equals I/n.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import _parallel
from .distributions import Dataset
from .errors import InvalidInput
from .geometry import as_unit

log = logging.getLogger(__name__)

DEFAULT_TOL = 0.05
DEFAULT_MAX_ITER = 500
STALL_ITERATIONS = 50


@dataclass(frozen=True)
class AngularCovariance:
    matrix: np.ndarray
    trace_error: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


@dataclass(frozen=True)
class IsotropyTransform:
    matrix: np.ndarray
    iterations: int
    residual: float
    converged: bool
    diagnostic: np.ndarray | None = None  # eigenvector of the over-weighted direction when not converged

    def __post_init__(self):
        A = np.asarray(self.matrix, dtype=float)
        if not np.allclose(A, A.T, rtol=0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise InvalidInput("transform matrix must be symmetric")
        np.linalg.cholesky(A)  # raises LinAlgError unless positive definite
        object.__setattr__(self, "matrix", A)

    def apply(self, data: Dataset) -> Dataset:
        return data.transformed(self.matrix)

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "iterations": self.iterations,
            "residual": self.residual,
            "converged": self.converged,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "IsotropyTransform":
        return cls(np.array(obj["matrix"], dtype=float), int(obj["iterations"]),
                   float(obj["residual"]), bool(obj["converged"]))


def angular_second_moment(data: Dataset, theta) -> float:
    theta = as_unit(theta)
    if theta.shape[0] != data.n:
        raise InvalidInput("direction and data dimensions differ")
    return float(data.weights @ (data.directions @ theta) ** 2)


def _weighted_outer(x: np.ndarray, coef: np.ndarray, threads: int | None) -> np.ndarray:
    """sum_i coef_i x_i x_i^T with a fixed chunked reduction."""
    def part(_, lo, hi):
        xs = x[lo:hi]
        return (xs * coef[lo:hi, None]).T @ xs
    return _parallel.tree_sum(_parallel.map_chunks(part, x.shape[0], threads))


def angular_covariance(data: Dataset, threads: int | None = None) -> AngularCovariance:
    m = _weighted_outer(data.directions, data.weights, threads)
    m = 0.5 * (m + m.T)
    return AngularCovariance(m, float(abs(np.trace(m) - 1.0)))


def _residual(cov: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(cov)
    return float(cov.shape[0] * (eig[-1] - eig[0]))


def _inv_sqrt(S: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(S)
    A = (vecs / np.sqrt(vals)) @ vecs.T
    return 0.5 * (A + A.T)


def _image_covariance(x: np.ndarray, w: np.ndarray, A: np.ndarray, threads) -> np.ndarray:
    y = x @ A
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    m = _weighted_outer(y, w, threads)
    return 0.5 * (m + m.T)


def tyler_step(x: np.ndarray, w: np.ndarray, S: np.ndarray, threads: int | None = None) -> np.ndarray:
    """One fixed-point update, renormalized to trace n."""
    c = linalg.cholesky(S, lower=True)
    z = linalg.solve_triangular(c, x.T, lower=True)
    q = np.einsum("ij,ij->j", z, z)  # x^T S^{-1} x
    S_new = _weighted_outer(x, w / q, threads)
    S_new = 0.5 * (S_new + S_new.T)
    return S_new * (x.shape[1] / np.trace(S_new))


def isotropize(data: Dataset, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
               threads: int | None = None) -> IsotropyTransform:
    """Find A with the angular covariance of {A x_i} within ``tol`` of I/n.

    Convergence is judged by n * (lambda_max - lambda_min) <= tol for the
    angular covariance of the image. When the law puts too much mass on a
    subspace no such A exists; the best iterate is returned with
    ``converged=False`` and ``diagnostic`` set to the leading eigenvector of
    the image covariance (pulled back to input coordinates).
    """
    if tol <= 0:
        raise InvalidInput("tol must be positive")
    x, w = data.samples, data.weights
    n = data.n
    S = np.eye(n)
    best = None
    since_best = 0
    iterations = 0
    for iterations in range(max_iter + 1):
        A = _inv_sqrt(S)
        cov = _image_covariance(x, w, A, threads)
        res = _residual(cov)
        if best is None or res < best[1]:
            best = (A, res, cov)
            since_best = 0
        else:
            since_best += 1
        if res <= tol or iterations == max_iter or since_best >= STALL_ITERATIONS:
            break
        try:
            S = tyler_step(x, w, S, threads)
        except (np.linalg.LinAlgError, ValueError):
            break  # S lost definiteness: the mass sits on a proper subspace
        if not np.all(np.isfinite(S)) or np.linalg.eigvalsh(S)[0] <= 1e-250:
            break
    A, res, cov = best
    converged = res <= tol
    diagnostic = None
    if not converged:
        v = np.linalg.eigh(cov)[1][:, -1]
        # y = A x, so <y, v> = <x, A v>
        diagnostic = A @ v
        diagnostic /= np.linalg.norm(diagnostic)
        log.warning("isotropization did not converge (residual %.4g after %d iterations); "
                    "mass concentrates near direction %s", res, iterations, np.round(diagnostic, 6))
    return IsotropyTransform(A, iterations, res, converged, diagnostic)


def verify_subisotropic(data: Dataset, d: float, slack: float = 0.0, threads: int | None = None) -> bool:
    """Check E<X/|X|, theta>^2 <= (1 + slack)/d for every unit theta."""
    if d <= 0:
        raise InvalidInput("d must be positive")
    lam = angular_covariance(data, threads).lambda_max
    return bool(data.n * lam <= (data.n / d) * (1 + slack))
