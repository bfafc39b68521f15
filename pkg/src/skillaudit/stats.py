"""Agreement statistics: ICC(2,1), weighted kappa, Wilcoxon, Bland-Altman."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats as _st

from .errors import DegenerateMatrix, LengthMismatch

N_RANKS = 4
EXACT_MAX_N = 12
LOA_Z = 1.96


# ---------------------------------------------------------------- ICC


@dataclass(frozen=True)
class RatingsMatrix:
    """Subjects x raters; ``None`` or NaN marks a missing cell."""

    rows: tuple[tuple[float | None, ...], ...]

    def __post_init__(self):
        widths = {len(r) for r in self.rows}
        if len(widths) > 1:
            raise ValueError("ratings matrix must be rectangular")

    @classmethod
    def from_columns(cls, *columns: Sequence[float | None]) -> "RatingsMatrix":
        if len({len(c) for c in columns}) > 1:
            raise LengthMismatch("rater columns differ in length")
        return cls(tuple(zip(*columns)))

    def complete_cases(self) -> np.ndarray:
        """Listwise deletion: rows with any missing cell are dropped."""
        keep = [
            r for r in self.rows if all(v is not None and not (isinstance(v, float) and math.isnan(v)) for v in r)
        ]
        return np.array(keep, dtype=float).reshape(len(keep), len(self.rows[0]) if self.rows else 0)


@dataclass(frozen=True)
class AnovaDecomposition:
    msr: float
    msc: float
    mse: float
    n: int
    k: int


def anova_two_way(x: np.ndarray) -> AnovaDecomposition:
    n, k = x.shape
    grand = x.mean()
    ss_rows = k * float(((x.mean(axis=1) - grand) ** 2).sum())
    ss_cols = n * float(((x.mean(axis=0) - grand) ** 2).sum())
    ss_total = float(((x - grand) ** 2).sum())
    ss_err = max(ss_total - ss_rows - ss_cols, 0.0)
    return AnovaDecomposition(
        msr=ss_rows / (n - 1), msc=ss_cols / (k - 1), mse=ss_err / ((n - 1) * (k - 1)), n=n, k=k
    )


@dataclass(frozen=True)
class AgreementResult:
    icc: float
    ci_low: float
    ci_high: float
    n: int


def icc_2_1(matrix: RatingsMatrix | np.ndarray | Sequence[Sequence[float]], alpha: float = 0.05) -> AgreementResult:
    """Two-way random effects, single measures, absolute agreement.

    The interval is the F-based construction of Shrout and Fleiss with
    Satterthwaite degrees of freedom (the one pingouin and SPSS report).
    """
    if isinstance(matrix, RatingsMatrix):
        x = matrix.complete_cases()
    else:
        x = RatingsMatrix(tuple(tuple(r) for r in np.asarray(matrix, dtype=object).tolist())).complete_cases()
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 2:
        raise DegenerateMatrix(f"need at least 2 complete subjects and 2 raters, got shape {x.shape}")
    a = anova_two_way(x)
    n, k = a.n, a.k
    if a.msr == 0 and a.msc == 0 and a.mse == 0:
        raise DegenerateMatrix("ratings have zero variance; ICC is undefined")
    denom = a.msr + (k - 1) * a.mse + (k / n) * (a.msc - a.mse)
    icc = (a.msr - a.mse) / denom
    if a.mse == 0 and a.msc == 0:
        return AgreementResult(icc, icc, icc, n)
    aa = k * icc / (n * (1 - icc))
    bb = 1 + k * icc * (n - 1) / (n * (1 - icc))
    v_den = (aa * a.msc) ** 2 / (k - 1) + (bb * a.mse) ** 2 / ((n - 1) * (k - 1))
    if v_den == 0:
        # no subject variance and no residual: the interval has no degrees of freedom
        return AgreementResult(icc, math.nan, math.nan, n)
    v = (aa * a.msc + bb * a.mse) ** 2 / v_den
    fs = float(_st.f.ppf(1 - alpha / 2, n - 1, v))
    fi = float(_st.f.ppf(1 - alpha / 2, v, n - 1))
    c = k * a.msc + (k * n - k - n) * a.mse
    # A tiny v sends the F quantiles to infinity; use the bounds' limits.
    lb = -n * a.mse / c if math.isinf(fs) else n * (a.msr - fs * a.mse) / (fs * c + n * a.msr)
    ub = 1.0 if math.isinf(fi) else n * (fi * a.msr - a.mse) / (c + n * fi * a.msr)
    return AgreementResult(icc, float(lb), float(ub), n)


# ---------------------------------------------------------------- kappa


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    degenerate: bool = False
    n: int = 0


def _check_lengths(a: Sequence, b: Sequence, minimum: int = 1) -> None:
    if len(a) != len(b):
        raise LengthMismatch(f"vectors differ in length ({len(a)} vs {len(b)})")
    if len(a) < minimum:
        raise LengthMismatch(f"need at least {minimum} paired values")


def weighted_kappa_linear(a: Sequence[int], b: Sequence[int], categories: int = N_RANKS) -> KappaResult:
    """Cohen's kappa with linear weights |i - j| / (categories - 1)."""
    _check_lengths(a, b)
    for v in (*a, *b):
        if int(v) != v or not 0 <= v < categories:
            raise ValueError(f"rank {v} outside 0..{categories - 1}")
    n = len(a)
    obs = np.zeros((categories, categories))
    for i, j in zip(a, b):
        obs[int(i), int(j)] += 1
    obs /= n
    exp = np.outer(obs.sum(axis=1), obs.sum(axis=0))
    idx = np.arange(categories)
    w = np.abs(idx[:, None] - idx[None, :]) / (categories - 1)
    do = float((w * obs).sum())
    de = float((w * exp).sum())
    if de == 0.0:
        # both raters used one and the same category
        return KappaResult(1.0, True, n)
    return KappaResult(1.0 - do / de, False, n)


# ---------------------------------------------------------------- Wilcoxon


@dataclass(frozen=True)
class WilcoxonResult:
    w: float  # min(W+, W-)
    p: float
    w_plus: float
    w_minus: float
    n_used: int
    zeros_dropped: int
    method: str  # "exact" | "normal" | "none"
    all_zero: bool = False


def signed_ranks(diffs: Sequence[float]) -> tuple[list[float], list[float]]:
    """(ranks of |d| with ties averaged, signs) after dropping zeros."""
    nz = [float(d) for d in diffs if d != 0]
    ranks = _st.rankdata([abs(d) for d in nz]).tolist() if nz else []
    return ranks, [1.0 if d > 0 else -1.0 for d in nz]


def _exact_two_sided(ranks: list[float], w_plus: float) -> float:
    # Work in half-ranks so tied (x.5) ranks stay integral.
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total, r - 1, -1):
            counts[s] += counts[s - r]
    obs = int(round(2 * w_plus))
    denom = 2 ** len(ranks)
    lower = sum(counts[: obs + 1]) / denom
    upper = sum(counts[obs:]) / denom
    return min(1.0, 2 * min(lower, upper))


def wilcoxon_signed_rank(diffs: Sequence[float], exact_max_n: int = EXACT_MAX_N) -> WilcoxonResult:
    """Two-sided signed-rank test on paired differences; zeros are dropped."""
    if len(diffs) < 1:
        raise LengthMismatch("need at least one difference")
    ranks, signs = signed_ranks(diffs)
    zeros = len(diffs) - len(ranks)
    if not ranks:
        return WilcoxonResult(0.0, 1.0, 0.0, 0.0, 0, zeros, "none", all_zero=True)
    w_plus = math.fsum(r for r, s in zip(ranks, signs) if s > 0)
    w_minus = math.fsum(r for r, s in zip(ranks, signs) if s < 0)
    n = len(ranks)
    if n <= exact_max_n:
        p = _exact_two_sided(ranks, w_plus)
        method = "exact"
    else:
        mean = n * (n + 1) / 4
        _, tie_counts = np.unique(ranks, return_counts=True)
        var = n * (n + 1) * (2 * n + 1) / 24 - float(((tie_counts**3 - tie_counts)).sum()) / 48
        d = w_plus - mean
        if d != 0:
            d -= 0.5 * math.copysign(1.0, d)
        z = d / math.sqrt(var) if var > 0 else 0.0
        p = min(1.0, float(2 * _st.norm.sf(abs(z))))
        method = "normal"
    return WilcoxonResult(min(w_plus, w_minus), p, w_plus, w_minus, n, zeros, method)


# ---------------------------------------------------------------- Bland-Altman


@dataclass(frozen=True)
class BlandAltmanResult:
    bias: float
    sd_delta: float
    loa_low: float
    loa_high: float
    n: int
    points: tuple[tuple[float, float], ...]  # (mean of pair, difference)


def bland_altman(sys_scores: Sequence[float], con_scores: Sequence[float]) -> BlandAltmanResult:
    _check_lengths(sys_scores, con_scores, minimum=2)
    deltas = [float(s) - float(c) for s, c in zip(sys_scores, con_scores)]
    bias = math.fsum(deltas) / len(deltas)
    sd = statistics.stdev(deltas)
    pts = tuple(((float(s) + float(c)) / 2, d) for s, c, d in zip(sys_scores, con_scores, deltas))
    return BlandAltmanResult(bias, sd, bias - LOA_Z * sd, bias + LOA_Z * sd, len(deltas), pts)


# ---------------------------------------------------------------- ranks


@dataclass(frozen=True)
class RankConfusion:
    grid: tuple[tuple[int, ...], ...]  # grid[a][b]
    exact: float
    within_one: float
    n: int


def rank_confusion(a: Sequence[int], b: Sequence[int], categories: int = N_RANKS) -> RankConfusion:
    _check_lengths(a, b)
    grid = [[0] * categories for _ in range(categories)]
    for i, j in zip(a, b):
        grid[int(i)][int(j)] += 1
    n = len(a)
    exact = sum(1 for i, j in zip(a, b) if i == j) / n
    within = sum(1 for i, j in zip(a, b) if abs(int(i) - int(j)) <= 1) / n
    return RankConfusion(tuple(tuple(r) for r in grid), exact, within, n)


@dataclass(frozen=True)
class AbsDiffSummary:
    mean: float
    median: float
    sd: float  # sample SD of |a - b|; NaN for a single pair
    max: float
    n: int


def abs_diff_summary(a: Sequence[float], b: Sequence[float]) -> AbsDiffSummary:
    _check_lengths(a, b)
    d = [abs(float(x) - float(y)) for x, y in zip(a, b)]
    sd = statistics.stdev(d) if len(d) > 1 else float("nan")
    return AbsDiffSummary(math.fsum(d) / len(d), statistics.median(d), sd, max(d), len(d))


def signed_diff_sd(a: Sequence[float], b: Sequence[float]) -> float:
    """Sample SD of the signed differences a - b."""
    _check_lengths(a, b, minimum=2)
    return statistics.stdev([float(x) - float(y) for x, y in zip(a, b)])
