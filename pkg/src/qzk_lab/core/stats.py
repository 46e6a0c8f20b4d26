"""Numeric helpers for Monte-Carlo acceptance checks."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import gammaincc

from qzk_lab.core.errors import StatError

DEFAULT_ALPHA = 1e-3
DEFAULT_SIGMAS = 3.0


def _as_table(counts: ArrayLike | Mapping[object, int], keys: list[object] | None = None) -> NDArray[np.float64]:
    if isinstance(counts, Mapping):
        if keys is None:
            keys = sorted(counts, key=repr)
        return np.array([counts.get(k, 0) for k in keys], dtype=np.float64)
    return np.asarray(counts, dtype=np.float64)


def align(a: Mapping[object, int], b: Mapping[object, int]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Two histograms over the union of their keys."""
    keys = sorted(set(a) | set(b), key=repr)
    return _as_table(a, keys), _as_table(b, keys)


def tv_distance(p: ArrayLike, q: ArrayLike) -> float:
    """Total variation distance between two count (or probability) tables."""
    a = np.asarray(p, dtype=np.float64)
    b = np.asarray(q, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise StatError("empty histogram")
    if a.shape != b.shape:
        raise StatError(f"histogram shapes differ: {a.shape} vs {b.shape}")
    sa, sb = a.sum(), b.sum()
    if sa <= 0 or sb <= 0:
        raise StatError("histogram with no mass")
    return 0.5 * float(np.abs(a / sa - b / sb).sum())


@dataclass(frozen=True)
class Chi2Result:
    statistic: float
    dof: int
    p_value: float

    def passes(self, alpha: float = DEFAULT_ALPHA) -> bool:
        return self.p_value > alpha


def chi2_sf(x: float, dof: int) -> float:
    """Survival function of chi-square via the regularized upper incomplete gamma."""
    if dof <= 0:
        return 1.0
    return float(gammaincc(dof / 2.0, x / 2.0))


def chi2_gof(observed: ArrayLike, expected_probs: ArrayLike) -> Chi2Result:
    """Goodness of fit of observed counts against expected cell probabilities."""
    obs = np.asarray(observed, dtype=np.float64)
    probs = np.asarray(expected_probs, dtype=np.float64)
    if obs.size == 0:
        raise StatError("empty histogram")
    if obs.shape != probs.shape:
        raise StatError("observed and expected tables differ in shape")
    n = obs.sum()
    if n <= 0:
        raise StatError("no observations")
    exp = probs / probs.sum() * n
    keep = exp > 0
    if np.any(obs[~keep] > 0):
        return Chi2Result(math.inf, int(keep.sum()) - 1, 0.0)
    stat = float((((obs - exp) ** 2)[keep] / exp[keep]).sum())
    dof = int(keep.sum()) - 1
    return Chi2Result(stat, dof, chi2_sf(stat, dof))


def chi2_test(a: ArrayLike, b: ArrayLike) -> Chi2Result:
    """Two-sample homogeneity test on aligned count tables."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise StatError("empty histogram")
    if x.shape != y.shape:
        raise StatError(f"histogram shapes differ: {x.shape} vs {y.shape}")
    table = np.vstack([x, y])
    table = table[:, table.sum(axis=0) > 0]
    if table.shape[1] < 2:
        return Chi2Result(0.0, 0, 1.0)
    row = table.sum(axis=1, keepdims=True)
    if np.any(row <= 0):
        raise StatError("one sample has no observations")
    col = table.sum(axis=0, keepdims=True)
    exp = row * col / table.sum()
    stat = float(((table - exp) ** 2 / exp).sum())
    dof = table.shape[1] - 1
    return Chi2Result(stat, dof, chi2_sf(stat, dof))


def binomial_sigma(p: float, n: int) -> float:
    if n <= 0:
        raise StatError("binomial with no trials")
    return math.sqrt(max(p * (1 - p), 0.0) / n)


def binomial_ci(successes: int, n: int, sigmas: float = DEFAULT_SIGMAS) -> tuple[float, float]:
    """Wilson interval at `sigmas` standard deviations."""
    if n <= 0:
        raise StatError("binomial with no trials")
    if not 0 <= successes <= n:
        raise StatError(f"{successes} successes out of {n}")
    phat = successes / n
    z2 = sigmas * sigmas
    denom = 1 + z2 / n
    centre = (phat + z2 / (2 * n)) / denom
    half = sigmas * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def binomial_tolerance(p: float, n: int, sigmas: float = DEFAULT_SIGMAS) -> float:
    """sigmas * sigma(p, n), floored at 1/n for degenerate p."""
    return max(sigmas * binomial_sigma(min(max(p, 0.0), 1.0), n), 1.0 / n)


def within(observed: float, expected: float, n: int, sigmas: float = DEFAULT_SIGMAS) -> bool:
    return abs(observed - expected) <= binomial_tolerance(expected, n, sigmas)


def at_most(observed: float, bound: float, n: int, sigmas: float = DEFAULT_SIGMAS) -> bool:
    return observed <= bound + binomial_tolerance(bound, n, sigmas)


def mean_sigma(samples: ArrayLike) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise StatError("no samples")
    if x.size == 1:
        return float(x[0]), 0.0
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def histogram(values: list[object]) -> dict[str, int]:
    """Counts keyed by repr, ready for JSON reports."""
    out: dict[str, int] = {}
    for v in values:
        key = v if isinstance(v, str) else repr(v)
        out[key] = out.get(key, 0) + 1
    return out
