"""Effective rank of finitely supported laws, by exhaustive subspace search.

A law is of class effrank_{>=d} when every subspace E satisfies
P(X in E) <= dim(E)/d, with equality only if some complement F of E
carries all remaining mass. Only the spans of atom directions change
P(X in E), so the search ranges over spans of at most n distinct directions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distributions import Dataset
from .errors import CombinatorialBudgetExceeded, InvalidInput
from .geometry import Subspace, sample_grassmannian

MEMBERSHIP_TOL = 1e-9
DIRECTION_TOL = 1e-9
RATIO_TOL = 1e-12
MAX_DIRECTIONS = 20
MAX_DIM = 6


@dataclass(frozen=True)
class EffectiveRankReport:
    d_star: float
    witness: Subspace
    boundary_equality: bool
    checked_subspace_count: int

    def to_json(self) -> dict:
        return {
            "d_star": self.d_star,
            "witness_basis": self.witness.basis.tolist(),
            "boundary_equality": self.boundary_equality,
            "checked_subspace_count": self.checked_subspace_count,
        }


def subspace_mass(data: Dataset, E: Subspace, tol: float = MEMBERSHIP_TOL) -> float:
    """Total weight of samples x with |x - Proj_E x| <= tol |x|."""
    if E.n != data.n:
        raise InvalidInput(f"subspace lives in R^{E.n}, data in R^{data.n}")
    x = data.samples
    residual = x - (x @ E.basis.T) @ E.basis
    inside = np.linalg.norm(residual, axis=1) <= tol * np.linalg.norm(x, axis=1)
    return float(data.weights[inside].sum())


def _distinct_directions(data: Dataset):
    """Merge atoms with equal direction; returns (unit directions, merged weights)."""
    dirs: list[np.ndarray] = []
    mass: list[float] = []
    for u, w in zip(data.directions, data.weights):
        for j, v in enumerate(dirs):
            if np.linalg.norm(u - v) < DIRECTION_TOL:
                mass[j] += w
                break
        else:
            dirs.append(u)
            mass.append(float(w))
    return np.array(dirs), np.array(mass)


def _check_envelope(data: Dataset, m: int):
    if m > MAX_DIRECTIONS or data.n > MAX_DIM:
        raise CombinatorialBudgetExceeded(
            f"exact search supports <= {MAX_DIRECTIONS} distinct directions and n <= {MAX_DIM} "
            f"(got {m} directions, n={data.n}); project the data with random_projection_reduce "
            "or subsample the atoms first")


def _candidate_subspaces(dirs: np.ndarray, n: int):
    """Yield (subspace, member mask) for each distinct nonzero span, in
    lexicographic order of the generating subsets."""
    seen: set[bytes] = set()
    m = len(dirs)
    for size in range(1, min(m, n) + 1):
        for subset in itertools.combinations(range(m), size):
            E = Subspace.span(dirs[list(subset)])
            if E.dim != size:
                continue  # this span is produced by a smaller subset
            residual = dirs - (dirs @ E.basis.T) @ E.basis
            members = np.linalg.norm(residual, axis=1) <= MEMBERSHIP_TOL
            key = np.packbits(members).tobytes()
            if key in seen:
                continue
            seen.add(key)
            yield E, members


def _has_complement(dirs: np.ndarray, members: np.ndarray, E: Subspace) -> bool:
    """Whether some F with E + F = R^n (direct) contains every atom outside E."""
    rest = dirs[~members]
    if rest.shape[0] == 0:
        return True
    W = Subspace.span(rest)
    joint = Subspace.span(np.vstack([E.basis, W.basis]))
    return joint.dim == E.dim + W.dim


def _scan(data: Dataset):
    dirs, mass = _distinct_directions(data)
    _check_envelope(data, len(dirs))
    return dirs, [(E, members, float(mass[members].sum())) for E, members in _candidate_subspaces(dirs, data.n)]


def effective_rank_exact(atoms: Dataset) -> EffectiveRankReport:
    dirs, candidates = _scan(atoms)
    best = None
    for E, members, p in candidates:
        ratio = E.dim / p
        if best is None or ratio < best[0] - RATIO_TOL:
            best = (ratio, E)
    d_star, witness = best
    # every subspace tying with the witness has to admit a complement
    ties = [(E, members) for E, members, p in candidates if abs(E.dim / p - d_star) <= RATIO_TOL * d_star]
    boundary = all(_has_complement(dirs, members, E) for E, members in ties)
    return EffectiveRankReport(float(d_star), witness, boundary, len(candidates))


def effrank_at_least(atoms: Dataset, d: float) -> bool:
    if d <= 0:
        raise InvalidInput("d must be positive")
    dirs, candidates = _scan(atoms)
    for E, members, p in candidates:
        bound = E.dim / d
        if p > bound + RATIO_TOL:
            return False
        if abs(p - bound) <= RATIO_TOL and not _has_complement(dirs, members, E):
            return False
    # a span of atoms never equals R^n when the atoms span less; E = R^n still counts
    return atoms.n / d >= 1 - RATIO_TOL


def random_projection_reduce(data: Dataset, d: float, rng: np.random.Generator) -> tuple[Dataset, Subspace]:
    """Project onto a uniform random ceil(d)-dimensional subspace L.

    Returns the coordinates of Proj_L x in the basis of L together with L.
    """
    if d <= 0:
        raise InvalidInput("d must be positive")
    k = math.ceil(d)
    if k > data.n:
        raise InvalidInput(f"d={d} exceeds the ambient dimension {data.n}")
    L = sample_grassmannian(rng, data.n, k)
    return Dataset(data.samples @ L.basis.T, data.weights, data.source), L
