import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supergauss.distributions import Dataset
from supergauss.effective_rank import (effective_rank_exact, effrank_at_least, random_projection_reduce,
                                       subspace_mass)
from supergauss.errors import CombinatorialBudgetExceeded, InvalidInput
from supergauss.geometry import Subspace


def two_atoms(n=2):
    return Dataset(np.eye(n)[:2], np.array([2 / 3, 1 / 3]))


def brute_ratio(dirs, w):
    """Independent oracle: min over all atom subsets of rank(subset span)/mass(span), via
    matrix_rank, without merging directions or deduplicating spans."""
    best = math.inf
    m = len(dirs)
    for r in range(1, m + 1):
        for subset in itertools.combinations(range(m), r):
            B = dirs[list(subset)]
            k = np.linalg.matrix_rank(B, tol=1e-9)
            inside = [i for i in range(m) if np.linalg.matrix_rank(np.vstack([B, dirs[i]]), tol=1e-9) == k]
            best = min(best, k / w[inside].sum())
    return best


def test_subspace_mass_examples():
    data = two_atoms()
    assert subspace_mass(data, Subspace.full(2)) == 1.0
    assert subspace_mass(data, Subspace(np.array([[1.0, 0.0]]))) == pytest.approx(2 / 3, abs=1e-15)
    assert subspace_mass(data, Subspace.zero(2)) == 0.0
    with pytest.raises(InvalidInput):
        subspace_mass(data, Subspace.full(3))


def test_two_atom_law():
    report = effective_rank_exact(two_atoms())
    assert report.d_star == pytest.approx(1.5, abs=1e-12)
    assert report.d_star == pytest.approx(brute_ratio(np.eye(2), np.array([2 / 3, 1 / 3])), abs=1e-12)
    assert report.witness.dim == 1
    assert abs(abs(report.witness.basis[0, 0]) - 1) < 1e-12
    assert report.boundary_equality
    assert report.checked_subspace_count == 3


def test_uniform_coordinate_atoms():
    report = effective_rank_exact(Dataset(np.eye(3)))
    assert report.d_star == pytest.approx(3.0, abs=1e-12)
    assert report.boundary_equality


def test_planar_atoms_in_r3():
    atoms = np.array([[1.0, 0, 0], [0, 1.0, 0], [1.0, 1.0, 0]])
    report = effective_rank_exact(Dataset(atoms))
    assert report.d_star == pytest.approx(2.0, abs=1e-12)
    assert report.witness.dim == 2
    assert np.allclose(np.abs(report.witness.basis[:, 2]), 0)


def test_effrank_at_least_flips_at_d_star():
    data = two_atoms()
    assert effrank_at_least(data, 1.5)
    assert effrank_at_least(data, 1.4)
    assert not effrank_at_least(data, 1.6)
    assert not effrank_at_least(data, 2.5)


def test_d_minus_case():
    # the e1 line is the witness, but e2 and e1+e2 together span the plane,
    # so no complement of the witness carries the rest: effective rank 5/3 minus
    atoms = np.array([[1.0, 0], [0, 1.0], [1.0, 1.0]])
    data = Dataset(atoms, np.array([0.6, 0.2, 0.2]))
    report = effective_rank_exact(data)
    assert report.d_star == pytest.approx(1 / 0.6, abs=1e-12)
    assert not report.boundary_equality
    assert not effrank_at_least(data, 1 / 0.6)
    assert effrank_at_least(data, 1 / 0.6 - 1e-6)


def test_duplicate_directions_merge():
    atoms = np.array([[1.0, 0], [2.0, 0], [0, 3.0]])
    assert effective_rank_exact(Dataset(atoms)).d_star == pytest.approx(1.5, abs=1e-12)


def test_envelope():
    with pytest.raises(CombinatorialBudgetExceeded):
        effective_rank_exact(Dataset(np.random.default_rng(0).standard_normal((21, 3))))
    with pytest.raises(CombinatorialBudgetExceeded):
        effective_rank_exact(Dataset(np.eye(7)))


def test_report_json():
    obj = json.loads(json.dumps(effective_rank_exact(two_atoms()).to_json()))
    assert set(obj) == {"d_star", "witness_basis", "boundary_equality", "checked_subspace_count"}
    assert obj["d_star"] == 1.5


def test_general_position_has_full_rank():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(1, 5))
        N = int(rng.integers(n, 9))
        data = Dataset(rng.standard_normal((N, n)))
        assert effective_rank_exact(data).d_star == pytest.approx(n, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    # integer atoms make repeated directions and low-dimensional spans common
    atoms = rng.integers(-1, 2, size=(int(rng.integers(2, 7)), n)).astype(float)
    atoms = atoms[np.linalg.norm(atoms, axis=1) > 0]
    if atoms.shape[0] == 0:
        return
    w = rng.random(atoms.shape[0]) + 0.1
    w /= w.sum()
    data = Dataset(atoms, w)
    dirs = atoms / np.linalg.norm(atoms, axis=1)[:, None]
    assert effective_rank_exact(data).d_star == pytest.approx(brute_ratio(dirs, w), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_adding_atom_in_witness_does_not_increase_rank(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    atoms = rng.integers(-2, 3, size=(int(rng.integers(2, 6)), n)).astype(float)
    atoms = atoms[np.linalg.norm(atoms, axis=1) > 0]
    if atoms.shape[0] == 0:
        return
    data = Dataset(atoms)
    report = effective_rank_exact(data)
    extra = rng.standard_normal(report.witness.dim) @ report.witness.basis
    if np.linalg.norm(extra) < 1e-6:
        return
    bigger = Dataset(np.vstack([atoms, extra]))
    assert effective_rank_exact(bigger).d_star <= report.d_star + 1e-12


def test_projection_full_dimension_is_isometry():
    rng = np.random.default_rng(1)
    data = Dataset(rng.standard_normal((30, 5)))
    image, L = random_projection_reduce(data, 5, rng)
    assert image.n == 5 and L.dim == 5
    assert np.allclose(image.samples @ image.samples.T, data.samples @ data.samples.T, atol=1e-10)


def test_projection_of_two_atom_law():
    data = two_atoms(3)
    image, _ = random_projection_reduce(data, 2, np.random.default_rng(2))
    assert image.n == 2
    assert np.all(np.linalg.norm(image.samples, axis=1) > 0)
    assert np.linalg.norm(image.samples[0] / np.linalg.norm(image.samples[0])
                          - image.samples[1] / np.linalg.norm(image.samples[1])) > 1e-6
    assert effective_rank_exact(image).d_star == pytest.approx(1.5, abs=1e-12)


def test_projection_seeded_and_validated():
    data = Dataset(np.eye(4))
    a, _ = random_projection_reduce(data, 2.5, np.random.default_rng(9))
    b, _ = random_projection_reduce(data, 2.5, np.random.default_rng(9))
    assert a.n == 3
    assert np.array_equal(a.samples, b.samples)
    with pytest.raises(InvalidInput):
        random_projection_reduce(data, 0, np.random.default_rng(0))


def test_projection_keeps_rank():
    rng = np.random.default_rng(6)
    data = Dataset(rng.standard_normal((6, 4)))
    assert effective_rank_exact(data).d_star == pytest.approx(4, abs=1e-12)
    for _ in range(100):
        image, _ = random_projection_reduce(data, 2.5, rng)
        assert effective_rank_exact(image).d_star >= 3 * (1 - 1e-12)
