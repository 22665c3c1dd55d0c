import json

import numpy as np
import pytest

from supergauss import SCHEMA_VERSION
from supergauss.distributions import Dataset, SourceSpec, sample
from supergauss.errors import StageError, ValidationError
from supergauss.pipeline import PipelineConfig, PipelineReport, run_pipeline


@pytest.fixture(scope="module")
def ball_report():
    return run_pipeline(SourceSpec("uniform_ball", {"n": 20}), cfg=PipelineConfig(), seed=3, samples=40_000)


def test_ball_end_to_end(ball_report):
    r = ball_report
    assert r.transform.converged and r.hypothesis_ok
    assert r.certificate.passed and r.passed
    assert r.rank_report is None and r.projection is None
    assert set(r.timings) >= {"input", "isotropize", "hypothesis", "select_direction", "certify"}


def test_functional_pulls_back(ball_report):
    data = sample(SourceSpec("uniform_ball", {"n": 20}), 3, 40_000)
    image = ball_report.transform.apply(data)
    assert np.allclose(data.samples @ ball_report.functional, image.samples @ ball_report.selection.theta,
                       rtol=0, atol=1e-10)


def test_functional_pulls_back_through_projection():
    data = Dataset(np.random.default_rng(1).standard_normal((3000, 12)))
    r = run_pipeline(data, d=6.0, seed=2)
    assert r.projection.dim == 6 and r.functional.shape == (12,)
    y = r.transform.apply(Dataset(data.samples @ r.projection.basis.T))
    assert np.allclose(data.samples @ r.functional, y.samples @ r.selection.theta, rtol=0, atol=1e-10)


def test_two_atoms_in_the_plane():
    spec = SourceSpec("finite_atoms", {"atoms": [[1.0, 0.0], [0.0, 1.0]], "probs": [2 / 3, 1 / 3]})
    r = run_pipeline(spec, seed=0, samples=3000)
    assert not r.transform.converged and not r.hypothesis_ok
    assert r.rank_report.d_star == pytest.approx(1.5)
    assert not r.passed
    assert any("theta3" in note for note in r.notes)


def test_override_flag_is_recorded():
    spec = SourceSpec("finite_atoms", {"atoms": [[1.0, 0.0], [0.0, 1.0]], "probs": [2 / 3, 1 / 3]})
    r = run_pipeline(spec, cfg=PipelineConfig(allow_unverified_hypothesis=True), seed=0, samples=3000)
    assert r.hypothesis_override and r.passed == r.certificate.passed


def test_json_round_trip(ball_report):
    obj = json.loads(json.dumps(ball_report.to_json(), allow_nan=False))
    assert obj["schema"] == SCHEMA_VERSION
    again = PipelineReport.from_json(obj)
    assert again.to_json() == obj


def test_atoms_json_round_trip():
    spec = SourceSpec("finite_atoms", {"atoms": [[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0]]})
    r = run_pipeline(spec, seed=1, samples=900)
    obj = json.loads(json.dumps(r.to_json()))
    assert PipelineReport.from_json(obj).to_json() == obj


def test_thread_count_does_not_change_results():
    spec = SourceSpec("gaussian", {"n": 8})
    a = run_pipeline(spec, cfg=PipelineConfig(threads=1), seed=5, samples=40_000).to_json()
    b = run_pipeline(spec, cfg=PipelineConfig(threads=4), seed=5, samples=40_000).to_json()
    a.pop("timings"), b.pop("timings")
    assert a == b


def test_stage_errors_are_tagged():
    with pytest.raises(StageError) as info:
        run_pipeline(Dataset(np.eye(3)), d=10, seed=0)
    assert info.value.stage == "projection"
    with pytest.raises(ValidationError):
        PipelineConfig(alpha=0)
