"""Slow, obviously-correct reference implementations used only by tests."""

from __future__ import annotations

import itertools
import math


def icc21_point(rows):
    """ICC(2,1) from sums of squares written out with plain loops."""
    n, k = len(rows), len(rows[0])
    grand = sum(sum(r) for r in rows) / (n * k)
    row_means = [sum(r) / k for r in rows]
    col_means = [sum(rows[i][j] for i in range(n)) / n for j in range(k)]
    ssr = sum(k * (m - grand) ** 2 for m in row_means)
    ssc = sum(n * (m - grand) ** 2 for m in col_means)
    sse = sum(
        (rows[i][j] - row_means[i] - col_means[j] + grand) ** 2 for i in range(n) for j in range(k)
    )
    msr, msc, mse = ssr / (n - 1), ssc / (k - 1), sse / ((n - 1) * (k - 1))
    return (msr - mse) / (msr + (k - 1) * mse + k * (msc - mse) / n)


def kappa_linear_pairs(a, b, categories=4):
    """Weighted kappa as 1 - observed / chance disagreement over all pairs."""
    n = len(a)
    w = lambda i, j: abs(i - j) / (categories - 1)  # noqa: E731
    observed = sum(w(x, y) for x, y in zip(a, b)) / n
    chance = sum(w(x, y) for x in a for y in b) / (n * n)
    return 1 - observed / chance


def signed_rank_enumeration(diffs):
    """(W+, two-sided p) by enumerating all 2^n sign assignments."""
    nz = [d for d in diffs if d != 0]
    absd = [abs(d) for d in nz]
    # average ranks for ties, by counting
    ranks = []
    for v in absd:
        below = sum(1 for u in absd if u < v)
        equal = sum(1 for u in absd if u == v)
        ranks.append(below + (equal + 1) / 2)
    w_obs = sum(r for r, d in zip(ranks, nz) if d > 0)
    total = 0
    le = ge = 0
    for signs in itertools.product((0, 1), repeat=len(ranks)):
        w = sum(r for r, s in zip(ranks, signs) if s)
        total += 1
        le += w <= w_obs + 1e-9
        ge += w >= w_obs - 1e-9
    return w_obs, min(1.0, 2 * min(le, ge) / total)


def bland_altman_loops(x, y):
    d = [a - b for a, b in zip(x, y)]
    n = len(d)
    mean = sum(d) / n
    sd = math.sqrt(sum((v - mean) ** 2 for v in d) / (n - 1))
    return mean, sd, mean - 1.96 * sd, mean + 1.96 * sd


def abs_diff_loops(x, y):
    d = sorted(abs(a - b) for a, b in zip(x, y))
    n = len(d)
    mean = sum(d) / n
    med = d[n // 2] if n % 2 else (d[n // 2 - 1] + d[n // 2]) / 2
    sd = math.sqrt(sum((v - mean) ** 2 for v in d) / (n - 1)) if n > 1 else math.nan
    return mean, med, sd, d[-1]
