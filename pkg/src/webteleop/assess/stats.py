"""One-sided Wilcoxon signed-rank test with exact and approximate p values.

Classic conventions: zero differences dropped, mid-ranks for tied
magnitudes. The exact p comes from full enumeration of sign assignments
(dynamic programming over achievable rank sums) and is available for
tie-free samples up to n = 15; otherwise a normal approximation with tie
and continuity corrections applies. Both values are reported because
published p values depend on the convention used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_EXACT_N = 15


class DegenerateSample(ValueError):
    """All paired differences are zero."""


@dataclass
class WilcoxonResult:
    w: float                  # sum of positive-difference ranks
    n: int                    # pairs after zero removal
    tail: str
    p_exact: float | None
    p_approx: float
    ties: bool

    @property
    def p(self) -> float:
        return self.p_exact if self.p_exact is not None else self.p_approx

    def summary(self) -> str:
        lines = [f"W = {self.w:g}, n = {self.n}, one-sided ({self.tail})"]
        if self.p_exact is not None:
            lines.append(f"  exact p      = {self.p_exact:.4g}")
        else:
            lines.append("  exact p      = n/a "
                         + ("(ties present)" if self.ties else f"(n > {MAX_EXACT_N})"))
        lines.append(f"  approximate p = {self.p_approx:.4g} "
                     "(normal, tie + continuity corrected)")
        lines.append("  note: reported p values differ across software conventions "
                     "(zero handling, ties, continuity); both are shown.")
        return "\n".join(lines)


def _ranks_with_ties(values: np.ndarray):
    """Mid-ranks of |values|; returns (ranks, had_ties)."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    had_ties = False
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        mid = (i + j) / 2.0 + 1.0
        if j > i:
            had_ties = True
        for k in range(i, j + 1):
            ranks[order[k]] = mid
        i = j + 1
    return ranks, had_ties


def _exact_sf_counts(n: int):
    """counts[s] = number of sign assignments of ranks 1..n with W+ = s."""
    max_sum = n * (n + 1) // 2
    counts = np.zeros(max_sum + 1, dtype=np.uint64)
    counts[0] = 1
    for r in range(1, n + 1):
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:-r] if r else counts
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(x, y=None, mu: float = 0.0, tail: str = "greater") -> WilcoxonResult:
    """One-sided signed-rank test of paired samples (or one sample vs mu).

    W is the sum of the ranks of positive differences. ``tail="greater"``
    tests for x > y (or x > mu); ``"less"`` the reverse.
    """
    if tail not in ("greater", "less"):
        raise ValueError("tail must be greater or less")
    x = np.asarray(x, dtype=float)
    if y is None:
        d = x - mu
    else:
        y = np.asarray(y, dtype=float)
        if np.ndim(y) == 0:
            d = x - float(y)
        else:
            if len(x) != len(y):
                raise ValueError("paired samples need equal lengths")
            d = x - y
    d = d[d != 0.0]
    n = len(d)
    if n == 0:
        raise DegenerateSample("all differences are zero")
    ranks, ties = _ranks_with_ties(np.abs(d))
    w = float(ranks[d > 0].sum())

    p_exact = None
    if not ties and n <= MAX_EXACT_N:
        counts = _exact_sf_counts(n)
        total = float(2 ** n)
        wi = int(round(w))
        if tail == "greater":
            p_exact = float(counts[wi:].sum()) / total
        else:
            p_exact = float(counts[:wi + 1].sum()) / total

    mean = n * (n + 1) / 4.0
    _, counts_unique = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(
        ((counts_unique ** 3 - counts_unique).sum())) / 48.0
    sd = math.sqrt(max(var, 1e-12))
    if tail == "greater":
        z = (w - mean - 0.5) / sd
        p_approx = 0.5 * math.erfc(z / math.sqrt(2.0))
    else:
        z = (w - mean + 0.5) / sd
        p_approx = 0.5 * math.erfc(-z / math.sqrt(2.0))
    return WilcoxonResult(w=w, n=n, tail=tail, p_exact=p_exact,
                          p_approx=min(1.0, p_approx), ties=ties)
