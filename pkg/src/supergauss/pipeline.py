"""End-to-end construction: project, isotropize, check the angular moment
hypothesis, select a direction and certify its tails."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import SCHEMA_VERSION
from .direction import DirectionSelection, SelectionConfig, select_direction
from .distributions import Dataset, SourceSpec, sample
from .effective_rank import (MAX_DIM, MAX_DIRECTIONS, EffectiveRankReport, _distinct_directions,
                             effective_rank_exact, random_projection_reduce)
from .errors import StageError, SuperGaussError, ValidationError
from .geometry import Subspace
from .isotropy import DEFAULT_MAX_ITER, DEFAULT_TOL, IsotropyTransform, isotropize, verify_subisotropic
from .verifier import (DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_GRID_STEP, SuperGaussianCertificate,
                       certify, default_grid, default_length, median_abs, tail_curve)

log = logging.getLogger(__name__)

HYPOTHESIS_CONSTANT = 5.0
PROJECTION_STREAM = 1
SELECTION_STREAM = 2


def stream(seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


@dataclass(frozen=True)
class PipelineConfig:
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA
    length: float | None = None  # None: 0.3 * sqrt(n) in the working dimension
    grid_step: float = DEFAULT_GRID_STEP
    iso_tol: float = DEFAULT_TOL
    iso_max_iter: int = DEFAULT_MAX_ITER
    allow_unverified_hypothesis: bool = False
    threads: int | None = None

    def __post_init__(self):
        for name in ("alpha", "beta", "grid_step", "iso_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(name, "must be positive")
        if self.length is not None and not self.length > 0:
            raise ValidationError("length", "must be positive")


@dataclass(frozen=True)
class PipelineReport:
    input_summary: dict
    rank_report: EffectiveRankReport | None
    projection: Subspace | None
    transform: IsotropyTransform
    hypothesis_ok: bool
    hypothesis_override: bool
    selection: DirectionSelection
    functional: np.ndarray
    certificate: SuperGaussianCertificate
    seed: int
    notes: tuple[str, ...] = ()
    timings: dict = field(default_factory=dict, compare=False)

    @property
    def passed(self) -> bool:
        """Certificate passed and either the hypothesis held or was explicitly waived."""
        return self.certificate.passed and (self.hypothesis_ok or self.hypothesis_override)

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "seed": self.seed,
            "input_summary": self.input_summary,
            "rank_report": None if self.rank_report is None else self.rank_report.to_json(),
            "projection_basis": None if self.projection is None else self.projection.basis.tolist(),
            "transform": self.transform.to_json(),
            "hypothesis_ok": self.hypothesis_ok,
            "hypothesis_override": self.hypothesis_override,
            "selection": self.selection.to_json(),
            "functional": self.functional.tolist(),
            "certificate": self.certificate.to_json(),
            "passed": self.passed,
            "notes": list(self.notes),
            "timings": self.timings,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineReport":
        rr = obj["rank_report"]
        rank_report = None if rr is None else EffectiveRankReport(
            float(rr["d_star"]), Subspace(np.array(rr["witness_basis"], dtype=float).reshape(-1, obj["input_summary"]["n"])
                                          if rr["witness_basis"] else np.zeros((0, obj["input_summary"]["n"]))),
            bool(rr["boundary_equality"]), int(rr["checked_subspace_count"]))
        proj = obj["projection_basis"]
        return cls(
            input_summary=obj["input_summary"],
            rank_report=rank_report,
            projection=None if proj is None else Subspace(np.array(proj, dtype=float)),
            transform=IsotropyTransform.from_json(obj["transform"]),
            hypothesis_ok=bool(obj["hypothesis_ok"]),
            hypothesis_override=bool(obj["hypothesis_override"]),
            selection=DirectionSelection.from_json(obj["selection"]),
            functional=np.array(obj["functional"], dtype=float),
            certificate=SuperGaussianCertificate.from_json(obj["certificate"]),
            seed=int(obj["seed"]),
            notes=tuple(obj["notes"]),
            timings=dict(obj["timings"]),
        )


def _within_envelope(data: Dataset) -> bool:
    if data.n > MAX_DIM or data.size > 10 * MAX_DIRECTIONS:
        return False
    return len(_distinct_directions(data)[0]) <= MAX_DIRECTIONS


class _Stage:
    def __init__(self, name, timings):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        self.timings[self.name] = round(1000 * (time.perf_counter() - self.start), 3)
        if exc_type is not None and issubclass(exc_type, SuperGaussError) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def run_pipeline(source: Dataset | SourceSpec, d: float | None = None, cfg: PipelineConfig | None = None,
                 seed: int = 0, samples: int | None = None) -> PipelineReport:
    """Run every stage in order and return the report.

    ``source`` is either a dataset or a source spec; a spec is sampled with
    ``samples`` draws. The returned functional ``ell`` satisfies
    <x, ell> = <A Proj_L x, theta> for every input sample x.
    """
    cfg = cfg or PipelineConfig()
    timings: dict[str, float] = {}
    notes: list[str] = []
    atoms_law = None

    with _Stage("input", timings):
        if isinstance(source, SourceSpec):
            if samples is None:
                raise ValidationError("samples", "required when sampling from a source spec")
            data = sample(source, seed, samples, cfg.threads)
            if source.family == "finite_atoms":
                atoms_law = Dataset(np.atleast_2d(np.asarray(source.params["atoms"], dtype=float)),
                                    source.params.get("probs"), "finite_atoms")
            source_name = source.family
        else:
            data = source
            source_name = data.source
            if _within_envelope(data):
                atoms_law = data
        summary = {"n": data.n, "N": data.size, "source": source_name}

    rank_report = None
    with _Stage("effective_rank", timings):
        if atoms_law is not None and _within_envelope(atoms_law):
            rank_report = effective_rank_exact(atoms_law)
        else:
            notes.append("effective rank not computed (continuous or large input)")

    projection = None
    work = data
    with _Stage("projection", timings):
        if d is not None:
            work, projection = random_projection_reduce(data, d, stream(seed, PROJECTION_STREAM))
            notes.append("effective rank of the projected law not checked")

    with _Stage("isotropize", timings):
        transform = isotropize(work, cfg.iso_tol, cfg.iso_max_iter, cfg.threads)
        image = transform.apply(work)
        if not transform.converged:
            notes.append("isotropization did not converge; continuing with the best iterate")

    with _Stage("hypothesis", timings):
        # a non-convergent position downgrades the hypothesis even where 5/n is vacuous
        hypothesis_ok = transform.converged and verify_subisotropic(
            image, image.n / HYPOTHESIS_CONSTANT, threads=cfg.threads)

    sel_cfg = cfg.selection
    if image.n < 3 and sel_cfg.theta3_filter:
        sel_cfg = replace(sel_cfg, theta3_filter=False)
        notes.append("n < 3: theta3 drawn without the near-orthogonality filter")
    with _Stage("select_direction", timings):
        selection = select_direction(image, sel_cfg, stream(seed, SELECTION_STREAM), seed=seed)

    with _Stage("certify", timings):
        L = cfg.length if cfg.length is not None else default_length(image.n)
        M_med = median_abs(image, selection.theta)
        curve = tail_curve(image, selection.theta, M_med, default_grid(L, cfg.grid_step))
        certificate = certify(curve, cfg.alpha, cfg.beta, L, M_med)

    functional = transform.matrix @ selection.theta
    if projection is not None:
        functional = projection.basis.T @ functional

    return PipelineReport(
        input_summary=summary, rank_report=rank_report, projection=projection, transform=transform,
        hypothesis_ok=bool(hypothesis_ok), hypothesis_override=cfg.allow_unverified_hypothesis,
        selection=selection, functional=functional, certificate=certificate, seed=seed,
        notes=tuple(notes), timings=timings,
    )
