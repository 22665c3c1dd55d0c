"""Sphere and subspace primitives.

Unit vectors are plain 1-D float arrays; :func:`as_unit` checks the norm.
Subspaces carry an orthonormal basis stored as rows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateCombination, InvalidDimension, InvalidInput, ValidationError

UNIT_TOL = 1e-12
ORTHO_TOL = 1e-10


@dataclass(frozen=True)
class SelectionConstants:
    cap_radius: float = 1 / 5
    ortho_slack: float = 1 / 10
    cosine_bound: float = 49 / 50
    quantile_level: float = 1 / 3

    def __post_init__(self):
        for name in ("cap_radius", "ortho_slack", "cosine_bound", "quantile_level"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValidationError(name, f"must lie in (0, 1), got {value}")

    @property
    def cap_cosine(self) -> float:
        """Inner-product threshold equivalent to the cap radius on the sphere."""
        return 1.0 - 0.5 * self.cap_radius ** 2


@dataclass(frozen=True)
class Subspace:
    basis: np.ndarray  # shape (k, n), orthonormal rows
    n: int = field(default=-1)

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        n = self.n if self.n >= 0 else basis.shape[1]
        if basis.size == 0:
            basis = np.zeros((0, n))
        if basis.shape[1] != n:
            raise InvalidDimension(f"basis vectors have length {basis.shape[1]}, expected {n}")
        k = basis.shape[0]
        if k > n:
            raise InvalidDimension(f"subspace dimension {k} exceeds ambient dimension {n}")
        if k and np.max(np.abs(basis @ basis.T - np.eye(k))) > ORTHO_TOL:
            raise InvalidInput("basis is not orthonormal")
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "n", n)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def zero(cls, n: int) -> "Subspace":
        return cls(np.zeros((0, n)), n)

    @classmethod
    def full(cls, n: int) -> "Subspace":
        return cls(np.eye(n), n)

    @classmethod
    def span(cls, vectors, tol: float = 1e-9) -> "Subspace":
        """Orthonormal basis for the span of the given rows (SVD rank cut at ``tol``)."""
        vectors = np.atleast_2d(np.asarray(vectors, dtype=float))
        n = vectors.shape[1]
        if vectors.shape[0] == 0:
            return cls.zero(n)
        _, s, vt = np.linalg.svd(vectors, full_matrices=False)
        rank = int(np.sum(s > tol * max(1.0, s[0])))
        return cls(vt[:rank], n)

    def projector(self) -> np.ndarray:
        return self.basis.T @ self.basis


def as_unit(v, tol: float = UNIT_TOL) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise InvalidInput("a unit vector must be one-dimensional")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise InvalidInput(f"vector norm {np.linalg.norm(v)!r} is not 1")
    return v


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise InvalidInput("cannot normalize the zero vector")
    return v / norm


def sample_sphere(rng: np.random.Generator, n: int, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on S^{n-1} as normalized standard Gaussian vectors."""
    if n < 1:
        raise InvalidDimension(f"sphere dimension must be >= 1, got n={n}")
    shape = (n,) if size is None else (size, n)
    while True:
        g = rng.standard_normal(shape)
        norms = np.linalg.norm(g, axis=-1, keepdims=True)
        if np.all(norms > 0):
            return g / norms


def _orthonormalize(g: np.ndarray) -> tuple[np.ndarray, int]:
    """Modified Gram-Schmidt on the columns of ``g``, run twice for stability.

    Returns the (n, k) orthonormal factor and the numerical rank.
    """
    q = np.array(g, dtype=float, copy=True)
    n, k = q.shape
    rank = k
    for j in range(k):
        original = np.linalg.norm(q[:, j])
        for _ in range(2):
            for i in range(j):
                q[:, j] -= (q[:, i] @ q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm <= 1e-10 * max(original, 1e-300):
            rank = min(rank, j)
            return q, rank
        q[:, j] /= norm
    return q, rank


def sample_grassmannian(rng: np.random.Generator, n: int, k: int) -> Subspace:
    """Uniformly distributed k-dimensional subspace of R^n."""
    if not 1 <= k <= n:
        raise InvalidDimension(f"need 1 <= k <= n, got k={k}, n={n}")
    while True:
        q, rank = _orthonormalize(rng.standard_normal((n, k)))
        if rank == k:
            return Subspace(q.T, n)


def project(E: Subspace, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != E.n:
        raise InvalidDimension(f"vector length {v.shape[-1]} does not match ambient dimension {E.n}")
    return (v @ E.basis.T) @ E.basis


def is_almost_orthogonal_system(vectors) -> bool:
    """Sufficient test for membership in O_k.

    Requires |Proj_{E_{i-1}} v_i| < |v_i| / k^2 for every i, where E_{i-1}
    is the span of the preceding vectors. Order matters.
    """
    vs = np.atleast_2d(np.asarray(vectors, dtype=float))
    k, n = vs.shape
    if k > n:
        raise InvalidDimension(f"k={k} vectors cannot be almost orthogonal in dimension {n}")
    norms = np.linalg.norm(vs, axis=1)
    if np.any(norms == 0):
        raise InvalidInput("zero vector in system")
    for i in range(1, k):
        E = Subspace.span(vs[:i])
        if np.linalg.norm(project(E, vs[i])) >= norms[i] / k ** 2:
            return False
    return True


def combine_direction(theta1, theta2, theta3) -> np.ndarray:
    s = np.asarray(theta1, dtype=float) - np.asarray(theta2, dtype=float) + np.asarray(theta3, dtype=float)
    norm = np.linalg.norm(s)
    if norm == 0:
        raise DegenerateCombination("theta1 - theta2 + theta3 = 0")
    return s / norm


def cap_contains(eta, x, rho: float) -> bool:
    x = np.asarray(x, dtype=float)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise InvalidInput("zero vector has no direction")
    return bool(np.linalg.norm(x / norm - np.asarray(eta, dtype=float)) <= rho)
