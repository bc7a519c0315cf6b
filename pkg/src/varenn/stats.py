"""Evaluation statistics: confusion matrices, weighted kappa, rank tests,
variable similarity distances, and the accuracy-vs-similarity regression.

Rank statistics use the standard large-sample approximations (chi-square for
the k-group test, tie-corrected normal with continuity correction for the
two-group test). The test suite validates both against exhaustive permutation
enumeration on small inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2 as _chi2
from scipy.stats import norm as _norm
from scipy.stats import t as _t

from .cube import ClimateCube, VariableId
from .errors import (DegenerateRegressorError, DomainError, StatisticsError,
                     UndefinedKappaError, ValidationError)

N_CATEGORIES = 5


@dataclass
class ConfusionMatrix:
    """Counts[true][predicted] over the ordinal categories (0-based indices)."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got shape {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValidationError("confusion matrix has negative counts")

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @classmethod
    def from_predictions(cls, true: np.ndarray, predicted: np.ndarray,
                         k: int = N_CATEGORIES) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.int64)
        predicted = np.asarray(predicted, dtype=np.int64)
        if true.shape != predicted.shape:
            raise ValidationError("true and predicted label arrays differ in length")
        if true.size and (true.min() < 0 or true.max() >= k or predicted.min() < 0 or predicted.max() >= k):
            raise DomainError(f"labels outside 0..{k - 1}")
        counts = np.zeros((k, k), dtype=np.int64)
        np.add.at(counts, (true, predicted), 1)
        return cls(counts)


@dataclass(frozen=True)
class StatTestResult:
    statistic: float
    p_value: float
    method: str       # kruskal_wallis | mann_whitney_u | ols_slope_t
    adjustment: str = "none"  # none | bonferroni


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.n == 0:
        raise StatisticsError("accuracy of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts)) / cm.n


def weighted_kappa(cm: ConfusionMatrix, weights: str = "quadratic") -> float:
    """Chance-corrected ordinal agreement, 1 - sum(w*o) / sum(w*e).

    Disagreement weights grow with category distance: ((i-j)/(k-1))^2 for
    quadratic (the default), |i-j|/(k-1) for linear. Expected proportions are
    the outer product of the observed marginals.
    """
    if cm.n == 0:
        raise StatisticsError("kappa of an empty confusion matrix is undefined")
    k = cm.k
    idx = np.arange(k, dtype=np.float64)
    dist = np.abs(idx[:, None] - idx[None, :]) / (k - 1)
    if weights == "quadratic":
        w = dist ** 2
    elif weights == "linear":
        w = dist
    else:
        raise ValidationError(f"unknown kappa weights {weights!r}; expected 'quadratic' or 'linear'")
    observed = cm.counts / cm.n
    row = observed.sum(axis=1)
    col = observed.sum(axis=0)
    expected = np.outer(row, col)
    denom = float(np.sum(w * expected))
    if denom == 0.0:
        raise UndefinedKappaError("all mass in a single cell; expected weighted disagreement is zero")
    return 1.0 - float(np.sum(w * observed)) / denom


def rank_with_ties(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(pooled: np.ndarray) -> float:
    """sum(t^3 - t) over groups of tied values."""
    _, counts = np.unique(pooled, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def kruskal_wallis(groups: list) -> StatTestResult:
    """Tie-corrected H statistic with a chi-square p-value (df = groups - 1)."""
    if len(groups) < 2:
        raise DomainError(f"need at least 2 groups, got {len(groups)}")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(a.size == 0 for a in arrays):
        raise DomainError("every group must be non-empty")
    pooled = np.concatenate(arrays)
    n_total = pooled.size
    ranks = rank_with_ties(pooled)
    h = 0.0
    offset = 0
    for a in arrays:
        r_sum = float(ranks[offset:offset + a.size].sum())
        h += r_sum * r_sum / a.size
        offset += a.size
    h = 12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)
    correction = 1.0 - _tie_term(pooled) / (n_total ** 3 - n_total)
    if correction == 0.0:
        # every pooled value identical: no evidence of any difference
        return StatTestResult(0.0, 1.0, "kruskal_wallis")
    h /= correction
    p = float(_chi2.sf(h, df=len(groups) - 1))
    return StatTestResult(float(h), min(1.0, max(0.0, p)), "kruskal_wallis")


def mann_whitney_u(a, b, alpha_adjust: int = 1) -> StatTestResult:
    """Two-sided U test via the tie-corrected normal approximation.

    The statistic is U for the first sample (0 when every value of ``a``
    precedes every value of ``b``). The p-value uses a 0.5 continuity
    correction and is then multiplied by ``alpha_adjust`` (Bonferroni) and
    clamped to 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise DomainError("both samples must be non-empty")
    if alpha_adjust < 1:
        raise DomainError(f"alpha_adjust must be >= 1, got {alpha_adjust}")
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = rank_with_ties(pooled)
    u1 = float(ranks[:n1].sum()) - n1 * (n1 + 1) / 2.0
    n_total = n1 + n2
    mean_u = n1 * n2 / 2.0
    tie = _tie_term(pooled)
    var_u = n1 * n2 / 12.0 * ((n_total + 1) - tie / (n_total * (n_total - 1)))
    if var_u <= 0.0:
        p = 1.0
    else:
        z = max(0.0, abs(u1 - mean_u) - 0.5) / np.sqrt(var_u)
        p = 2.0 * float(_norm.sf(z))
    p = min(1.0, p)
    adjusted = min(1.0, p * alpha_adjust)
    return StatTestResult(u1, adjusted, "mann_whitney_u",
                          "bonferroni" if alpha_adjust > 1 else "none")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise standardized distances between the cube's variables."""

    codes: tuple[str, ...]
    distances: np.ndarray

    def __post_init__(self) -> None:
        d = np.asarray(self.distances, dtype=np.float64)
        if d.shape != (len(self.codes), len(self.codes)):
            raise ValidationError(f"distance matrix shape {d.shape} does not match {len(self.codes)} codes")
        if not np.allclose(d, d.T) or np.any(np.diag(d) != 0) or np.any(d < 0):
            raise ValidationError("distances must be symmetric, non-negative, zero on the diagonal")

    def distance(self, code_a: str, code_b: str) -> float:
        return float(self.distances[self.codes.index(code_a), self.codes.index(code_b)])


def _standardized(cube: ClimateCube, code: str) -> np.ndarray:
    flat = cube.values[cube.var_index(code)].astype(np.float64).ravel()
    finite = np.isfinite(flat)
    if not finite.any():
        raise StatisticsError(f"variable {code!r} has no observed values")
    mean = flat[finite].mean()
    sd = flat[finite].std()
    z = np.full_like(flat, np.nan)
    # a constant field standardizes to zero rather than dividing by zero
    z[finite] = 0.0 if sd == 0.0 else (flat[finite] - mean) / sd
    return z


def variable_distance(cube: ClimateCube, v1: VariableId | str, v2: VariableId | str) -> float:
    """Root mean square distance between two z-standardized variables.

    Each variable is standardized over its own non-missing entries, then the
    mean squared difference is taken over entries observed in both. The result
    is unit-free and independent of sample count.
    """
    c1 = v1.code if isinstance(v1, VariableId) else v1
    c2 = v2.code if isinstance(v2, VariableId) else v2
    z1 = _standardized(cube, c1)
    z2 = _standardized(cube, c2)
    common = np.isfinite(z1) & np.isfinite(z2)
    if not common.any():
        raise DomainError(f"variables {c1!r} and {c2!r} share no observed entries")
    diff = z1[common] - z2[common]
    return float(np.sqrt(np.mean(diff * diff)))


def similarity_matrix(cube: ClimateCube) -> SimilarityMatrix:
    codes = tuple(v.code for v in cube.variables)
    k = len(codes)
    d = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(i + 1, k):
            d[i, j] = d[j, i] = variable_distance(cube, codes[i], codes[j])
    return SimilarityMatrix(codes, d)


def experiment_similarity(target: VariableId | str, inputs, sim: SimilarityMatrix) -> float:
    """Mean distance from the target variable to each input variable."""
    target_code = target.code if isinstance(target, VariableId) else target
    codes = [v.code if isinstance(v, VariableId) else v for v in inputs]
    if not codes:
        raise DomainError("experiment has no input variables")
    return float(np.mean([sim.distance(target_code, c) for c in codes]))


@dataclass(frozen=True)
class OlsFit:
    slope: float
    intercept: float
    p_value: float


def ols_regression(x, y) -> OlsFit:
    """Simple least squares with a two-sided t-test on the slope (n-2 df)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be 1-d arrays of equal length")
    n = x.size
    if n < 3:
        raise DomainError(f"need at least 3 points, got {n}")
    x_mean = x.mean()
    s_xx = float(np.sum((x - x_mean) ** 2))
    if s_xx == 0.0:
        raise DegenerateRegressorError("regressor is constant")
    y_mean = y.mean()
    slope = float(np.sum((x - x_mean) * (y - y_mean)) / s_xx)
    intercept = y_mean - slope * x_mean
    residuals = y - (intercept + slope * x)
    rss = float(np.sum(residuals ** 2))
    if rss == 0.0:
        return OlsFit(slope, float(intercept), 0.0 if slope != 0.0 else 1.0)
    se = np.sqrt(rss / (n - 2) / s_xx)
    t_stat = slope / se
    p = 2.0 * float(_t.sf(abs(t_stat), df=n - 2))
    return OlsFit(slope, float(intercept), min(1.0, p))
