"""Direction selection: quantile, two cap maximizers and the combined direction.

The cap maximizations run over a finite candidate set: every direction
x/|x| of a sample with |x| >= M, then ``extra_random_candidates`` uniform
directions. Ties go to the lowest candidate index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import Dataset
from .errors import (DegenerateCombination, DimensionTooSmall, InvalidInput, ResamplingFailed,
                     SelectionImpossible, ValidationError)
from .geometry import SelectionConstants, as_unit, combine_direction, sample_sphere

THETA3_ATTEMPTS = 1000
MASS_TIE_TOL = 1e-12
_BLOCK = 2048


@dataclass(frozen=True)
class SelectionConfig:
    constants: SelectionConstants = field(default_factory=SelectionConstants)
    extra_random_candidates: int = 256
    theta3_filter: bool = True

    def __post_init__(self):
        if self.extra_random_candidates < 0:
            raise ValidationError("extra_random_candidates", "must be >= 0")


@dataclass(frozen=True)
class DirectionSelection:
    M: float
    theta1: np.ndarray
    theta2: np.ndarray
    theta3: np.ndarray
    theta: np.ndarray
    t0: float
    cap_prob_1: float
    cap_prob_2: float
    candidate_count: int
    seed: int | None = None
    ortho_slack: float = 1 / 10

    def __post_init__(self):
        if not self.M > 0:
            raise InvalidInput(f"M must be positive, got {self.M}")
        for name in ("theta1", "theta2", "theta3", "theta"):
            object.__setattr__(self, name, as_unit(getattr(self, name), tol=1e-10))
        if abs(self.theta1 @ self.theta2) > self.ortho_slack + 1e-12:
            raise InvalidInput("theta1 and theta2 violate the orthogonality slack")
        if not np.array_equal(self.theta, combine_direction(self.theta1, self.theta2, self.theta3)):
            raise InvalidInput("theta is not the combination of theta1, theta2, theta3")
        if not 0 <= self.cap_prob_2 <= self.cap_prob_1 + MASS_TIE_TOL:
            raise InvalidInput("cap probabilities must satisfy cap_prob_1 >= cap_prob_2 >= 0")
        if self.t0 != compute_t0(self.cap_prob_2):
            raise InvalidInput("t0 does not match cap_prob_2")

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "theta1": self.theta1.tolist(),
            "theta2": self.theta2.tolist(),
            "theta3": self.theta3.tolist(),
            "theta": self.theta.tolist(),
            "t0": None if math.isinf(self.t0) else self.t0,
            "cap_prob_1": self.cap_prob_1,
            "cap_prob_2": self.cap_prob_2,
            "candidate_count": self.candidate_count,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict, ortho_slack: float = 1 / 10) -> "DirectionSelection":
        return cls(
            M=float(obj["M"]),
            theta1=np.array(obj["theta1"], dtype=float),
            theta2=np.array(obj["theta2"], dtype=float),
            theta3=np.array(obj["theta3"], dtype=float),
            theta=np.array(obj["theta"], dtype=float),
            t0=math.inf if obj["t0"] is None else float(obj["t0"]),
            cap_prob_1=float(obj["cap_prob_1"]),
            cap_prob_2=float(obj["cap_prob_2"]),
            candidate_count=int(obj["candidate_count"]),
            seed=obj.get("seed"),
            ortho_slack=ortho_slack,
        )


def third_quantile(data: Dataset, level: float = 1 / 3) -> float:
    """Smallest norm value r with P(|X| <= r) >= 1 - level.

    With uniform weights this is the ceil(2N/3)-th order statistic.
    """
    norms = data.norms
    order = np.argsort(norms, kind="stable")
    cum = np.cumsum(data.weights[order])
    idx = int(np.searchsorted(cum, (1 - level) - 1e-12, side="left"))
    return float(norms[order][min(idx, len(order) - 1)])


def cap_probability(data: Dataset, eta, M: float, rho: float) -> float:
    if not 0 < rho < math.sqrt(2):
        raise InvalidInput(f"cap radius must lie in (0, sqrt 2), got {rho}")
    eta = as_unit(eta)
    norms = data.norms
    heavy = norms >= M
    dist = np.linalg.norm(data.samples[heavy] / norms[heavy, None] - eta, axis=1)
    return float(data.weights[heavy][dist <= rho].sum())


def _cap_pairs(g: np.ndarray, left: np.ndarray, right: np.ndarray, cosine: float, rho: float, margin: float):
    """Index pairs (i, j) with right[j] inside the cap of radius rho around left[i].

    ``g`` is a float32 Gram block used only to discard pairs far from the
    threshold; survivors are settled by the exact float64 distance.
    """
    near = g > cosine - margin
    if not near.any():
        return None
    rows, cols = np.nonzero(near)
    keep = np.linalg.norm(left[rows] - right[cols], axis=1) <= rho
    return rows[keep], cols[keep]


def _candidate_masses(U: np.ndarray, w: np.ndarray, probes: np.ndarray, rho: float) -> np.ndarray:
    """Cap mass around every row of U (then every probe) among the rows of U.

    Cap membership is symmetric, so only the upper block triangle of the
    U-vs-U comparison is formed.
    """
    h, n = U.shape
    cosine = 1.0 - 0.5 * rho ** 2
    margin = max(1e-4, 8 * n * float(np.finfo(np.float32).eps))
    U32 = U.astype(np.float32)
    masses = np.zeros(h)
    starts = list(range(0, h, _BLOCK))
    for bi in starts:
        bi_end = min(bi + _BLOCK, h)
        for bj in starts[bi // _BLOCK:]:
            bj_end = min(bj + _BLOCK, h)
            hits = _cap_pairs(U32[bi:bi_end] @ U32[bj:bj_end].T, U[bi:bi_end], U[bj:bj_end], cosine, rho, margin)
            if hits is None:
                continue
            rows, cols = hits
            masses[bi:bi_end] += np.bincount(rows, weights=w[bj + cols], minlength=bi_end - bi)
            if bj != bi:
                masses[bj:bj_end] += np.bincount(cols, weights=w[bi + rows], minlength=bj_end - bj)
    probe_mass = np.zeros(probes.shape[0])
    if probes.shape[0]:
        P32 = probes.astype(np.float32)
        for bi in starts:
            bi_end = min(bi + _BLOCK, h)
            hits = _cap_pairs(U32[bi:bi_end] @ P32.T, U[bi:bi_end], probes, cosine, rho, margin)
            if hits is not None:
                rows, cols = hits
                probe_mass += np.bincount(cols, weights=w[bi + rows], minlength=probes.shape[0])
    return np.concatenate([masses, probe_mass])


def _candidates(data: Dataset, M: float, cfg: SelectionConfig, rng: np.random.Generator):
    norms = data.norms
    heavy = norms >= M
    if not heavy.any():
        raise SelectionImpossible(f"no sample has norm >= M={M}")
    U = data.samples[heavy] / norms[heavy, None]
    w = data.weights[heavy]
    probes = (sample_sphere(rng, data.n, cfg.extra_random_candidates)
              if cfg.extra_random_candidates else np.zeros((0, data.n)))
    masses = _candidate_masses(U, w, probes, cfg.constants.cap_radius)
    return np.vstack([U, probes]), masses


def _argmax(masses: np.ndarray, allowed: np.ndarray | None = None) -> int:
    if allowed is not None:
        masses = np.where(allowed, masses, -np.inf)
    top = masses.max()
    return int(np.flatnonzero(masses >= top - MASS_TIE_TOL)[0])


def _pick_theta1(cands, masses):
    i = _argmax(masses)
    return cands[i].copy(), float(masses[i])


def _pick_theta2(cands, masses, theta1, cfg, rng, n):
    if n < 2:
        raise DimensionTooSmall("no direction is nearly orthogonal to theta1 when n = 1")
    slack = cfg.constants.ortho_slack
    allowed = np.abs(cands @ theta1) <= slack
    if allowed.any():
        i = _argmax(masses, allowed)
        return cands[i].copy(), float(masses[i])
    # no admissible candidate at all: any admissible direction has empirical mass
    # at most that of the candidates, so report a random admissible one with its mass
    for _ in range(THETA3_ATTEMPTS):
        eta = sample_sphere(rng, n)
        if abs(eta @ theta1) <= slack:
            return eta, None
    raise ResamplingFailed("could not draw a direction nearly orthogonal to theta1")


def select_theta1(data: Dataset, M: float, cfg: SelectionConfig, rng: np.random.Generator):
    cands, masses = _candidates(data, M, cfg, rng)
    return _pick_theta1(cands, masses)


def select_theta2(data: Dataset, M: float, theta1, cfg: SelectionConfig, rng: np.random.Generator):
    theta1 = as_unit(theta1)
    if data.n < 2:
        raise DimensionTooSmall("no direction is nearly orthogonal to theta1 when n = 1")
    cands, masses = _candidates(data, M, cfg, rng)
    theta2, mass = _pick_theta2(cands, masses, theta1, cfg, rng, data.n)
    if mass is None:
        mass = cap_probability(data, theta2, M, cfg.constants.cap_radius)
    return theta2, mass


def compute_t0(cap_prob_2: float) -> float:
    """Solve exp(-t0^2) = cap_prob_2; +inf when the cap is empty."""
    if not 0 <= cap_prob_2 <= 1:
        raise InvalidInput(f"cap probability {cap_prob_2} outside [0, 1]")
    if cap_prob_2 == 0:
        return math.inf
    return math.sqrt(max(0.0, -math.log(cap_prob_2)))


def draw_theta3(rng: np.random.Generator, theta1, theta2, cfg: SelectionConfig) -> np.ndarray:
    n = len(theta1)
    slack = cfg.constants.ortho_slack
    for _ in range(THETA3_ATTEMPTS):
        theta3 = sample_sphere(rng, n)
        if not cfg.theta3_filter or (abs(theta3 @ theta1) <= slack and abs(theta3 @ theta2) <= slack):
            return theta3
    raise ResamplingFailed(f"no admissible theta3 after {THETA3_ATTEMPTS} draws (n={n})")


def select_direction(data: Dataset, cfg: SelectionConfig | None = None,
                     rng: np.random.Generator | None = None, seed: int | None = None) -> DirectionSelection:
    """Run the full selection; ``rng`` defaults to a generator seeded by ``seed``."""
    cfg = cfg or SelectionConfig()
    if rng is None:
        rng = np.random.default_rng(seed)
    if data.n < 2 or (data.n < 3 and cfg.theta3_filter):
        raise DimensionTooSmall(f"direction selection needs n >= 3 (got n={data.n})")
    M = third_quantile(data, cfg.constants.quantile_level)
    cands, masses = _candidates(data, M, cfg, rng)
    theta1, p1 = _pick_theta1(cands, masses)
    theta2, p2 = _pick_theta2(cands, masses, theta1, cfg, rng, data.n)
    if p2 is None:
        p2 = cap_probability(data, theta2, M, cfg.constants.cap_radius)
    for _ in range(THETA3_ATTEMPTS):
        theta3 = draw_theta3(rng, theta1, theta2, cfg)
        try:
            theta = combine_direction(theta1, theta2, theta3)
        except DegenerateCombination:
            continue
        break
    else:
        raise ResamplingFailed("theta1 - theta2 + theta3 kept vanishing")
    return DirectionSelection(
        M=M, theta1=theta1, theta2=theta2, theta3=theta3, theta=theta,
        t0=compute_t0(p2), cap_prob_1=p1, cap_prob_2=p2,
        candidate_count=int(cands.shape[0]), seed=seed,
        ortho_slack=cfg.constants.ortho_slack,
    )
