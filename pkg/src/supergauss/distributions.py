"""Random-vector sources, dataset files and the exact ball-marginal law."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import optimize, special

from . import _parallel
from .errors import InvalidInput, ParseError, ValidationError
from .geometry import sample_sphere

FAMILIES = ("uniform_ball", "gaussian", "finite_atoms", "subspace_mixture", "product_heavy_tail")
ZERO_NORM = 1e-300


@dataclass(frozen=True)
class Dataset:
    """Weighted empirical law: rows of ``samples`` are the atoms."""

    samples: np.ndarray
    weights: np.ndarray | None = None
    source: str = "array"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise InvalidInput("a dataset needs at least one sample row")
        if not np.all(np.isfinite(x)):
            raise InvalidInput("samples must be finite")
        norms = np.linalg.norm(x, axis=1)
        bad = np.flatnonzero(norms < ZERO_NORM)
        if bad.size:
            raise InvalidInput(f"sample {int(bad[0])} is the zero vector")
        if self.weights is None:
            w = np.full(x.shape[0], 1.0 / x.shape[0])
        else:
            w = np.asarray(self.weights, dtype=float).reshape(-1)
            if w.shape[0] != x.shape[0]:
                raise InvalidInput(f"{w.shape[0]} weights for {x.shape[0]} samples")
            if np.any(w < 0):
                raise InvalidInput("weights must be nonnegative")
            if abs(w.sum() - 1.0) > 1e-12:
                raise InvalidInput(f"weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.samples.shape[1]

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.samples, axis=1)

    @property
    def directions(self) -> np.ndarray:
        return self.samples / self.norms[:, None]

    @property
    def effective_size(self) -> float:
        """Kish effective sample size; equals N for uniform weights."""
        return float(1.0 / np.sum(self.weights ** 2))

    def transformed(self, matrix) -> "Dataset":
        return Dataset(self.samples @ np.asarray(matrix, dtype=float).T, self.weights, self.source)

    def scaled(self, c: float) -> "Dataset":
        return Dataset(self.samples * c, self.weights, self.source)


@dataclass(frozen=True)
class SourceSpec:
    family: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError("family", f"unknown family {self.family!r}; expected one of {FAMILIES}")
        getattr(self, f"_check_{self.family}")(self.params)

    @staticmethod
    def _positive_int(params, key):
        value = params.get(key)
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
            raise ValidationError(key, f"must be a positive integer, got {value!r}")
        return int(value)

    def _check_uniform_ball(self, p):
        self._positive_int(p, "n")
        if float(p.get("radius", 1.0)) <= 0:
            raise ValidationError("radius", "must be positive")

    def _check_gaussian(self, p):
        n = self._positive_int(p, "n")
        cov = p.get("cov")
        if cov is None:
            return
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            if cov.shape != (n,) or np.any(cov <= 0):
                raise ValidationError("cov", f"diagonal covariance must be {n} positive numbers")
        elif cov.shape != (n, n) or not np.allclose(cov, cov.T):
            raise ValidationError("cov", f"covariance must be a symmetric {n}x{n} matrix")
        else:
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise ValidationError("cov", "covariance is not positive definite") from None

    def _check_finite_atoms(self, p):
        atoms = np.atleast_2d(np.asarray(p.get("atoms", []), dtype=float))
        if atoms.size == 0:
            raise ValidationError("atoms", "at least one atom is required")
        if np.any(np.linalg.norm(atoms, axis=1) < ZERO_NORM):
            raise ValidationError("atoms", "an atom sits at the origin")
        probs = p.get("probs")
        if probs is not None:
            probs = np.asarray(probs, dtype=float)
            if probs.shape != (atoms.shape[0],):
                raise ValidationError("probs", "need one probability per atom")
            if np.any(probs <= 0) or abs(probs.sum() - 1) > 1e-12:
                raise ValidationError("probs", "probabilities must be positive and sum to 1")

    def _check_subspace_mixture(self, p):
        n = self._positive_int(p, "n")
        dims = p.get("dims")
        if not dims or any(int(d) < 1 or int(d) > n for d in dims):
            raise ValidationError("dims", f"component dimensions must lie in [1, {n}]")
        mix = p.get("mix")
        if mix is not None:
            mix = np.asarray(mix, dtype=float)
            if mix.shape != (len(dims),) or np.any(mix <= 0) or abs(mix.sum() - 1) > 1e-12:
                raise ValidationError("mix", "mixture weights must be positive, one per component, summing to 1")

    def _check_product_heavy_tail(self, p):
        self._positive_int(p, "n")
        if float(p.get("df", 1.0)) <= 0:
            raise ValidationError("df", "tail index must be positive")

    @property
    def n(self) -> int:
        if self.family == "finite_atoms":
            return np.atleast_2d(np.asarray(self.params["atoms"], dtype=float)).shape[1]
        return int(self.params["n"])

    def describe(self) -> str:
        return self.family


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(chunk,)))


def _draw_chunk(spec: SourceSpec, rng: np.random.Generator, m: int) -> np.ndarray:
    p = spec.params
    if spec.family == "uniform_ball":
        n = int(p["n"])
        u = 1.0 - rng.random(m)  # (0, 1], keeps the radius away from 0
        return sample_sphere(rng, n, m) * (float(p.get("radius", 1.0)) * u ** (1.0 / n))[:, None]
    if spec.family == "gaussian":
        n = int(p["n"])
        g = rng.standard_normal((m, n))
        cov = p.get("cov")
        if cov is None:
            return g
        cov = np.asarray(cov, dtype=float)
        if cov.ndim == 1:
            return g * np.sqrt(cov)
        return g @ np.linalg.cholesky(cov).T
    if spec.family == "finite_atoms":
        atoms = np.atleast_2d(np.asarray(p["atoms"], dtype=float))
        idx = rng.choice(atoms.shape[0], size=m, p=p.get("probs"))
        return atoms[idx]
    if spec.family == "subspace_mixture":
        n = int(p["n"])
        dims = [int(d) for d in p["dims"]]
        comp = rng.choice(len(dims), size=m, p=p.get("mix"))
        out = np.zeros((m, n))
        start = 0
        for j, d in enumerate(dims):
            rows = np.flatnonzero(comp == j)
            coords = (start + np.arange(d)) % n
            out[np.ix_(rows, coords)] = rng.standard_normal((rows.size, d))
            start += d
        return out
    n = int(p["n"])
    return rng.standard_t(float(p.get("df", 1.0)), size=(m, n))


def sample(spec: SourceSpec, seed: int, count: int, threads: int | None = None) -> Dataset:
    """Draw ``count`` i.i.d. samples.

    Chunk ``c`` of the index range always uses the substream ``(seed, c)``,
    so the result does not depend on ``threads``.
    """
    if count < 1:
        raise ValidationError("count", f"must be >= 1, got {count}")
    parts = _parallel.map_chunks(lambda c, lo, hi: _draw_chunk(spec, chunk_rng(seed, c), hi - lo),
                                 count, threads)
    return Dataset(np.vstack(parts), source=spec.describe())


def save_dataset(data: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in data.samples:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def load_dataset(path) -> Dataset:
    rows = []
    width = None
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(lineno, f"expected {width} fields, found {len(fields)}")
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(lineno, f"non-numeric field ({exc})") from None
            if not any(row):
                raise ParseError(lineno, "zero sample row")
            rows.append(row)
    if not rows:
        raise ParseError(0, "file contains no samples")
    return Dataset(np.array(rows), source=Path(path).name)


@dataclass(frozen=True)
class BallMarginal:
    """Law of <X, theta> for X uniform in a centered ball.

    Density proportional to (1 - t^2 / (A^2 n))_+^{(n-1)/2}; ``A`` has units of
    length. For a ball of radius R and a direction of length |theta| one has
    A = R |theta| / sqrt(n).
    """

    n: int
    A: float

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n", "must be >= 1")
        if self.A <= 0:
            raise ValidationError("A", "must be positive")

    @classmethod
    def for_ball(cls, n: int, radius: float = 1.0, theta_norm: float = 1.0) -> "BallMarginal":
        return cls(n, radius * theta_norm / math.sqrt(n))

    @property
    def half_width(self) -> float:
        return self.A * math.sqrt(self.n)

    @property
    def log_normalizer(self) -> float:
        # Z = A sqrt(n) B(1/2, (n+1)/2)
        return math.log(self.half_width) + special.betaln(0.5, (self.n + 1) / 2)


def ball_marginal_pdf(m: BallMarginal, t):
    t = np.asarray(t, dtype=float)
    u = 1.0 - (t / m.half_width) ** 2
    with np.errstate(divide="ignore"):
        out = np.where(u > 0, np.exp((m.n - 1) / 2 * np.log(np.where(u > 0, u, 1.0)) - m.log_normalizer), 0.0)
    return out[()] if out.ndim == 0 else out


def ball_marginal_tail(m: BallMarginal, t):
    """P(Y >= t) for t >= 0.

    (Y / (A sqrt n))^2 follows Beta(1/2, (n+1)/2), hence
    P(Y >= t) = I_{1-s^2}((n+1)/2, 1/2) / 2 with s = t / (A sqrt n).
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise InvalidInput("tail is defined for t >= 0")
    s2 = np.clip((t / m.half_width) ** 2, 0.0, 1.0)
    out = 0.5 * special.betainc((m.n + 1) / 2, 0.5, 1.0 - s2)
    return out[()] if out.ndim == 0 else out


def ball_marginal_median_abs(m: BallMarginal) -> float:
    """Median of |Y|: the root of P(Y >= t) = 1/4."""
    return float(optimize.brentq(lambda t: ball_marginal_tail(m, t) - 0.25, 0.0, m.half_width,
                                 xtol=1e-15, rtol=4 * np.finfo(float).eps))
