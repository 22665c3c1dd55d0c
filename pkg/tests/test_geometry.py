import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from supergauss.errors import DegenerateCombination, InvalidDimension, InvalidInput
from supergauss.geometry import (SelectionConstants, Subspace, cap_contains, combine_direction,
                                 is_almost_orthogonal_system, project, sample_grassmannian,
                                 sample_sphere)

from conftest import unit


def test_sphere_n1_takes_both_signs(rng):
    draws = np.array([sample_sphere(rng, 1)[0] for _ in range(2000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert abs(np.mean(draws == 1.0) - 0.5) < 4 * 0.5 / np.sqrt(2000)


def test_sphere_is_seeded():
    a = sample_sphere(np.random.default_rng(7), 3)
    b = sample_sphere(np.random.default_rng(7), 3)
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1) < 1e-12


def test_sphere_rejects_n0(rng):
    with pytest.raises(InvalidDimension):
        sample_sphere(rng, 0)


def test_sphere_moments(rng):
    n, N = 50, 100_000
    u = sample_sphere(rng, n, N)
    assert np.all(np.abs(np.linalg.norm(u, axis=1) - 1) < 1e-12)
    # each coordinate has variance 1/n, so the mean's sd is 1/sqrt(N n)
    assert np.all(np.abs(u.mean(axis=0)) <= 4 / np.sqrt(N * n) * np.sqrt(n))
    # E<U, e1>^2 = 1/n; Var(U1^2) = E U1^4 - 1/n^2 = 3/(n(n+2)) - 1/n^2
    sigma = np.sqrt((3 / (n * (n + 2)) - 1 / n ** 2) / N)
    assert abs(np.mean(u[:, 0] ** 2) - 1 / n) <= 3 * sigma


def test_grassmannian_full_space_projection_is_identity(rng):
    E = sample_grassmannian(rng, 3, 3)
    v = rng.standard_normal(3)
    assert np.allclose(project(E, v), v, atol=1e-12)


def test_grassmannian_line_angle_uniform(rng):
    angles = []
    for _ in range(10_000):
        u = sample_grassmannian(rng, 2, 1).basis[0]
        angles.append(np.arctan2(u[1], u[0]) % np.pi)
    assert stats.kstest(angles, stats.uniform(0, np.pi).cdf).pvalue > 1e-3


def test_grassmannian_seeded_and_orthonormal():
    a = sample_grassmannian(np.random.default_rng(3), 10, 4)
    b = sample_grassmannian(np.random.default_rng(3), 10, 4)
    assert np.array_equal(a.basis, b.basis)
    assert np.max(np.abs(a.basis @ a.basis.T - np.eye(4))) < 1e-10


def test_grassmannian_rejects_k_above_n(rng):
    with pytest.raises(InvalidDimension):
        sample_grassmannian(rng, 2, 3)


def test_project_examples(rng):
    E = Subspace(np.array([[1.0, 0.0]]))
    assert np.array_equal(project(E, [3.0, 4.0]), [3.0, 0.0])
    assert np.array_equal(project(Subspace.zero(4), [1.0, 2.0, 3.0, 4.0]), np.zeros(4))
    F = sample_grassmannian(rng, 12, 5)
    v = rng.standard_normal(12)
    p = project(F, v)
    assert np.linalg.norm(project(F, p) - p) <= 1e-10
    assert np.linalg.norm(p) <= np.linalg.norm(v) + 1e-12
    with pytest.raises(InvalidDimension):
        project(F, np.ones(3))


def test_almost_orthogonal_examples():
    assert is_almost_orthogonal_system(np.eye(5)[:3])
    assert not is_almost_orthogonal_system([unit(0, 3), unit(0, 3)])
    with pytest.raises(InvalidInput):
        is_almost_orthogonal_system([unit(0, 3), np.zeros(3)])


def _eq_oracle(vs):
    """Direct transcription: residual of v_i against the QR basis of v_1..v_{i-1}."""
    k = len(vs)
    for i in range(1, k):
        q, _ = np.linalg.qr(np.array(vs[:i]).T)
        if np.linalg.norm(q.T @ vs[i]) >= np.linalg.norm(vs[i]) / k ** 2:
            return False
    return True


def test_almost_orthogonal_follows_ordering(rng):
    """Outcomes match the oracle for every ordering, and ordering does change them."""
    import itertools
    flips = 0
    for _ in range(300):
        vs = np.eye(3) + 0.07 * rng.standard_normal((3, 3))
        results = []
        for perm in itertools.permutations(range(3)):
            ordered = [vs[i] for i in perm]
            got = is_almost_orthogonal_system(ordered)
            assert got == _eq_oracle(ordered)
            results.append(got)
        flips += len(set(results)) > 1
    assert flips > 0


@given(st.permutations(range(4)))
def test_orthonormal_systems_pass_in_any_order(perm):
    assert is_almost_orthogonal_system(np.eye(6)[list(perm)])


def test_almost_orthogonal_random_high_dim(rng):
    hits = sum(is_almost_orthogonal_system(sample_sphere(rng, 2048, 3)) for _ in range(1000))
    assert hits >= 990


def test_combine_direction_examples():
    e1, e2, e3 = np.eye(3)
    assert np.allclose(combine_direction(e1, e2, e3), np.array([1, -1, 1]) / np.sqrt(3), atol=1e-15)
    assert np.array_equal(combine_direction(e2, e2, e1), e1)
    assert np.array_equal(combine_direction(e1, -e1, -e1), e1)
    with pytest.raises(DegenerateCombination):
        combine_direction(e1, e1 + e2, e2)


@settings(max_examples=200)
@given(st.integers(2, 30), st.integers(0, 2 ** 32 - 1))
def test_combined_direction_norm_bounds(n, seed):
    t = sample_sphere(np.random.default_rng(seed), n, 3)
    s = t[0] - t[1] + t[2]
    assert 0 < np.linalg.norm(s) <= 3 + 1e-12
    assert abs(np.linalg.norm(combine_direction(*t)) - 1) < 1e-12


def test_cap_contains_examples():
    eta = unit(0, 4)
    assert cap_contains(eta, 5 * eta, 0.2)
    assert not cap_contains(eta, -eta, 0.2)
    x = np.array([0.99, 0.141, 0.0, 0.0])
    # oracle: |x/|x| - e1|^2 = 2 - 2 x1/|x|
    dist = np.sqrt(2 - 2 * 0.99 / np.hypot(0.99, 0.141))
    assert cap_contains(eta, x, 0.2) == (dist <= 0.2)
    assert cap_contains(eta, x, dist + 1e-12) and not cap_contains(eta, x, dist - 1e-9)
    with pytest.raises(InvalidInput):
        cap_contains(eta, np.zeros(4), 0.2)


@given(st.integers(2, 40), st.integers(0, 2 ** 32 - 1))
def test_polarization_identity(n, seed):
    u, w = sample_sphere(np.random.default_rng(seed), n, 2)
    assert abs(u @ w - (1 - np.linalg.norm(u - w) ** 2 / 2)) <= 1e-12


def test_selection_constants_defaults_and_validation():
    c = SelectionConstants()
    assert (c.cap_radius, c.ortho_slack, c.cosine_bound, c.quantile_level) == (1 / 5, 1 / 10, 49 / 50, 1 / 3)
    assert c.cap_cosine == pytest.approx(49 / 50, abs=1e-15)
    with pytest.raises(ValueError):
        SelectionConstants(cap_radius=1.5)
