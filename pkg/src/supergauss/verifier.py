"""Monte Carlo certification of Super-Gaussian tails, plus exact probes.

A variable Y is Super-Gaussian of length L with parameters (alpha, beta) when
min(P(Y >= t M), P(Y <= -t M)) >= alpha exp(-t^2 / beta) for 0 <= t <= L,
where M is a median of |Y|. Certificates compare 95% Wilson lower bounds of
the empirical tails against that envelope on a grid of t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import stats

from .distributions import Dataset
from .errors import DegenerateDirection, InsufficientTail, InvalidInput
from .geometry import as_unit

DEFAULT_ALPHA = 0.05
DEFAULT_BETA = 3.0
DEFAULT_LENGTH_FACTOR = 0.3
DEFAULT_GRID_STEP = 0.25
BETA_CAP = 1e6
CONFIDENCE = 0.95
MEDIAN_BOUND_C = 6.0
GRID_TOL = 1e-12


def default_length(n: int) -> float:
    return DEFAULT_LENGTH_FACTOR * math.sqrt(n)


def default_grid(L: float, step: float = DEFAULT_GRID_STEP) -> np.ndarray:
    return np.arange(0.0, L + GRID_TOL, step)


def wilson_lower(p_hat, n_eff: float, confidence: float = CONFIDENCE):
    """Lower end of the two-sided Wilson score interval."""
    z = stats.norm.ppf(0.5 + confidence / 2)
    p_hat = np.asarray(p_hat, dtype=float)
    denom = 1 + z ** 2 / n_eff
    center = (p_hat + z ** 2 / (2 * n_eff)) / denom
    spread = z * np.sqrt(np.maximum(p_hat * (1 - p_hat), 0.0) / n_eff + z ** 2 / (4 * n_eff ** 2)) / denom
    return np.maximum(center - spread, 0.0)


@dataclass(frozen=True)
class TailCurve:
    t_grid: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    ci_lower_bounds: np.ndarray
    sample_count: int

    def __post_init__(self):
        for name in ("t_grid", "lower", "upper", "ci_lower_bounds"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        t = self.t_grid
        if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
            raise InvalidInput("t_grid must be a nonempty increasing grid of nonnegative reals")

    @property
    def min_tail(self) -> np.ndarray:
        return np.minimum(self.lower, self.upper)

    def to_json(self) -> list[dict]:
        return [{"t": float(t), "upper": float(u), "lower": float(lo), "ci_lb": float(c)}
                for t, u, lo, c in zip(self.t_grid, self.upper, self.lower, self.ci_lower_bounds)]

    @classmethod
    def from_json(cls, grid: list[dict], sample_count: int) -> "TailCurve":
        return cls(np.array([g["t"] for g in grid]), np.array([g["lower"] for g in grid]),
                   np.array([g["upper"] for g in grid]), np.array([g["ci_lb"] for g in grid]),
                   int(sample_count))


@dataclass(frozen=True)
class SuperGaussianCertificate:
    alpha: float
    beta: float
    L: float
    M_med: float
    passed: bool
    failing_t: float | None
    curve: TailCurve | None = None

    def to_json(self) -> dict:
        out = {"alpha": self.alpha, "beta": self.beta, "L": self.L, "M_med": self.M_med,
               "pass": self.passed, "failing_t": self.failing_t}
        if self.curve is not None:
            out["grid"] = self.curve.to_json()
            out["sample_count"] = self.curve.sample_count
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "SuperGaussianCertificate":
        curve = TailCurve.from_json(obj["grid"], obj["sample_count"]) if "grid" in obj else None
        return cls(float(obj["alpha"]), float(obj["beta"]), float(obj["L"]), float(obj["M_med"]),
                   bool(obj["pass"]), obj["failing_t"], curve)


def _projections(data: Dataset, theta) -> np.ndarray:
    theta = as_unit(theta, tol=1e-10)
    if theta.shape[0] != data.n:
        raise InvalidInput("direction and data dimensions differ")
    return data.samples @ theta


def weighted_lower_median(values: np.ndarray, weights: np.ndarray) -> float:
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    idx = int(np.searchsorted(cum, 0.5 - 1e-12, side="left"))
    return float(values[order][min(idx, len(order) - 1)])


def median_abs(data: Dataset, theta) -> float:
    """Lower median of |<X, theta>| by cumulative weight."""
    y = np.abs(_projections(data, theta))
    if not np.any(y):
        raise DegenerateDirection("every sample is orthogonal to theta")
    return weighted_lower_median(y, data.weights)


def _uniform(w: np.ndarray) -> bool:
    return bool(np.all(w == w[0]))


def tail_curve(data: Dataset, theta, M_med: float, t_grid) -> TailCurve:
    """Empirical two-sided tails at thresholds t * M_med (strict inequalities)."""
    if not M_med > 0:
        raise InvalidInput(f"median must be positive, got {M_med}")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or t_grid[0] != 0:
        raise InvalidInput("grid must start at 0")
    y = _projections(data, theta)
    w = data.weights
    order = np.argsort(y, kind="stable")
    ys = y[order]
    s = t_grid * M_med
    above = len(ys) - np.searchsorted(ys, s, side="right")  # count of y > s
    below = np.searchsorted(ys, -s, side="left")  # count of y < -s
    if _uniform(w):
        upper = above / len(ys)
        lower = below / len(ys)
    else:
        cum = np.concatenate([[0.0], np.cumsum(w[order])])
        upper = np.clip(cum[-1] - cum[len(ys) - above], 0.0, 1.0)
        lower = np.clip(cum[below], 0.0, 1.0)
    n_eff = data.effective_size
    ci = np.minimum(wilson_lower(upper, n_eff), wilson_lower(lower, n_eff))
    return TailCurve(t_grid, lower, upper, ci, data.size)


def _in_range(curve: TailCurve, L: float) -> np.ndarray:
    return curve.t_grid <= L + GRID_TOL


def certify(curve: TailCurve, alpha: float, beta: float, L: float, M_med: float = float("nan")
            ) -> SuperGaussianCertificate:
    if min(alpha, beta, L) <= 0:
        raise InvalidInput("alpha, beta and L must be positive")
    mask = _in_range(curve, L)
    t = curve.t_grid[mask]
    ok = curve.ci_lower_bounds[mask] >= alpha * np.exp(-t ** 2 / beta)
    failing = None if ok.all() else float(t[np.argmin(ok)])
    return SuperGaussianCertificate(alpha, beta, L, M_med, failing is None, failing, curve)


def fit_parameters(curve: TailCurve, L: float) -> tuple[float, float]:
    """Fit (alpha, beta) so that :func:`certify` passes on ``curve``.

    beta comes from the least-squares slope of log(ci lower bound) against
    -t^2; alpha is then the largest value admissible at every grid point.
    """
    mask = _in_range(curve, L)
    t = curve.t_grid[mask]
    m = curve.ci_lower_bounds[mask]
    pos = m > 0
    if pos.sum() < 3:
        raise InsufficientTail(f"only {int(pos.sum())} grid points <= L have a positive tail bound")
    if not pos.all():
        raise InsufficientTail(f"tail bound vanishes at t={float(t[~pos][0])}")
    slope = np.polyfit(t ** 2, np.log(m), 1)[0]
    beta = BETA_CAP if slope >= -1 / BETA_CAP else -1.0 / slope
    alpha = float(np.min(m * np.exp(t ** 2 / beta)))
    # guard against the last ulp when certify recomputes alpha * exp(-t^2/beta)
    while not np.all(m >= alpha * np.exp(-t ** 2 / beta)):
        alpha = math.nextafter(alpha, 0.0)
    return alpha, float(beta)


def median_bound_check(data: Dataset, theta, M: float, C: float = MEDIAN_BOUND_C) -> bool:
    """Whether median |<X, theta>| <= C M / sqrt(n)."""
    return median_abs(data, theta) <= C * M / math.sqrt(data.n)


def lemma_elem_exact_check(N: int, k: int, p: float) -> bool:
    """Exact check of P(sum Z >= N/(3k)) >= 1 - 2 eps for i.i.d. Bernoulli(p).

    For independent coordinates every k-subset sees a one with probability
    exactly 1 - (1-p)^k, so eps = (1-p)^k is the sharp constant.
    """
    if not 1 <= k <= N:
        raise InvalidInput("need 1 <= k <= N")
    if not 0 <= p <= 1:
        raise InvalidInput("p must lie in [0, 1]")
    q = Fraction(repr(float(p)))
    eps = (1 - q) ** k
    j0 = math.ceil(Fraction(N, 3 * k))
    tail = sum(math.comb(N, j) * q ** j * (1 - q) ** (N - j) for j in range(j0, N + 1))
    return tail >= 1 - 2 * eps


def pairwise_cosine_check(data: Dataset, bound: float, rng: np.random.Generator | None = None,
                          exact_limit: int = 10_000, random_pairs: int = 1_000_000) -> float:
    """Fraction of pairs i < j with <x_i/|x_i|, x_j/|x_j|> <= bound."""
    N = data.size
    if N < 2:
        raise InvalidInput("need at least two samples")
    U = data.directions
    if N <= exact_limit:
        good = 0
        block = 1024
        for lo in range(0, N, block):
            hi = min(lo + block, N)
            g = U[lo:hi] @ U.T
            rows = np.arange(lo, hi)[:, None]
            upper = np.arange(N)[None, :] > rows
            good += int(np.count_nonzero((g <= bound) & upper))
        return good / (N * (N - 1) // 2)
    rng = rng or np.random.default_rng(0)
    i = rng.integers(0, N, random_pairs)
    j = rng.integers(0, N - 1, random_pairs)
    j = np.where(j >= i, j + 1, j)
    return float(np.mean(np.einsum("ij,ij->i", U[i], U[j]) <= bound))
