"""Rank transform of raw multivariate samples to pseudo-observations."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import stats

from tailentropy._rng import make_rng
from tailentropy.errors import ValidationError

TieRule = Literal["average", "min", "max", "random"]
TIE_RULES = ("average", "min", "max", "random")


def _default_names(J: int) -> tuple[str, ...]:
    return tuple(f"X{j + 1}" for j in range(J))


@dataclass(frozen=True)
class RawSample:
    """An ``n x J`` matrix of finite observations with column labels."""

    values: np.ndarray
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValidationError(f"raw sample must be 2-D, got shape {v.shape}")
        n, J = v.shape
        if n < 2:
            raise ValidationError(f"need at least 2 rows, got {n}")
        if J < 2:
            raise ValidationError(f"need at least 2 columns, got {J}")
        bad = np.argwhere(~np.isfinite(v))
        if bad.size:
            t, j = bad[0]
            raise ValidationError(f"non-finite value at row {t}, column {j}")
        names = tuple(self.column_names) or _default_names(J)
        if len(names) != J:
            raise ValidationError(f"{len(names)} column names for {J} columns")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PseudoSample:
    """Copula-scale sample: every entry strictly inside (0, 1)."""

    values: np.ndarray
    column_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValidationError(f"pseudo sample must be a non-empty 2-D array, got {v.shape}")
        if not np.all((v > 0.0) & (v < 1.0)):
            raise ValidationError("pseudo-observations must lie strictly in (0, 1)")
        names = tuple(self.column_names) or _default_names(v.shape[1])
        if len(names) != v.shape[1]:
            raise ValidationError(f"{len(names)} column names for {v.shape[1]} columns")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def J(self) -> int:
        return self.values.shape[1]


def _rank_column(x: np.ndarray, tie_rule: str, rng) -> np.ndarray:
    if tie_rule == "random":
        # random tie-break: order by value, then by a uniform key
        order = np.lexsort((rng.random(x.size), x))
        ranks = np.empty(x.size)
        ranks[order] = np.arange(1, x.size + 1)
        return ranks
    return stats.rankdata(x, method=tie_rule)


def to_pseudo_observations(
    raw: RawSample | np.ndarray,
    tie_rule: TieRule = "average",
    seed: int | None = None,
) -> PseudoSample:
    """Empirical-CDF transform with divisor ``n + 1``.

    Entry ``(t, j)`` becomes ``rank(x[t, j]) / (n + 1)`` where the rank is
    taken within column ``j``. Ties are resolved by ``tie_rule``; the
    ``"random"`` rule requires ``seed``.

    Raises
    ------
    ValidationError
        On non-finite input, fewer than 2 rows/columns, or a constant column.
    """
    if not isinstance(raw, RawSample):
        raw = RawSample(raw)
    if tie_rule not in TIE_RULES:
        raise ValidationError(f"unknown tie_rule {tie_rule!r}; expected one of {TIE_RULES}")
    if tie_rule == "random" and seed is None:
        raise ValidationError("tie_rule='random' requires a seed")
    x = raw.values
    n = raw.n
    rng = make_rng(seed) if tie_rule == "random" else None
    u = np.empty_like(x)
    for j in range(raw.J):
        col = x[:, j]
        if np.all(col == col[0]):
            raise ValidationError(f"column {j} ({raw.column_names[j]}) is constant")
        u[:, j] = _rank_column(col, tie_rule, rng) / (n + 1)
    return PseudoSample(u, raw.column_names)


def select_components(sample: PseudoSample, indices: Sequence[int]) -> PseudoSample:
    """Column subset of ``sample``; ``indices`` are 1-based and strictly increasing."""
    idx = [int(i) for i in indices]
    if len(idx) < 2:
        raise ValidationError("select at least 2 components")
    if any(i < 1 or i > sample.J for i in idx):
        raise ValidationError(f"component indices must lie in 1..{sample.J}, got {idx}")
    if any(b <= a for a, b in zip(idx, idx[1:])):
        raise ValidationError(f"component indices must be distinct and increasing, got {idx}")
    cols = [i - 1 for i in idx]
    return PseudoSample(
        sample.values[:, cols], tuple(sample.column_names[c] for c in cols)
    )
