"""Exceedance-indicator cell distributions and the entropy indices.

For a threshold ``b`` each component contributes the indicator ``U_k > b``.
The ``2**K`` joint patterns are stored densely, indexed by the integer code
``sum_k bit_k << k`` (component ``k`` is bit ``k``); ``probs[0]`` is the
all-below cell and ``probs[-1]`` the all-above cell.

Logarithms are natural throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence, Union

import numpy as np

from tailentropy.copula_sim import CDF_FAMILIES, CopulaSpec, log_cdf
from tailentropy.errors import ValidationError
from tailentropy.pseudo_obs import PseudoSample, select_components

MAX_COMPONENTS = 20


def _check_b(b: float) -> float:
    b = float(b)
    if not (0.0 < b < 1.0):
        raise ValidationError(f"threshold must lie in (0, 1), got {b}")
    return b


def check_grid(grid: Sequence[float]) -> np.ndarray:
    """Validate a threshold grid: non-empty, strictly increasing, inside (0, 1)."""
    g = np.asarray(grid, dtype=float).ravel()
    if g.size == 0:
        raise ValidationError("threshold grid is empty")
    if np.any((g <= 0) | (g >= 1)) or np.any(np.isnan(g)):
        raise ValidationError("thresholds must lie in (0, 1)")
    if np.any(np.diff(g) <= 0):
        raise ValidationError("thresholds must be strictly increasing")
    return g


def threshold_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive arithmetic grid, e.g. ``threshold_grid(.85, .995, .005)`` (30 points)."""
    if step <= 0:
        raise ValidationError("grid step must be positive")
    m = int(np.floor((stop - start) / step + 1e-9)) + 1
    # rounding keeps .850, .855, ... exact to the printed digits
    return check_grid(np.round(start + step * np.arange(m), 12))


@dataclass(frozen=True, eq=False)
class CellDistribution:
    """Joint law of the ``K`` exceedance indicators at one threshold."""

    K: int
    probs: np.ndarray
    source: Literal["empirical", "exact"]
    n: int | None = None

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        if p.shape != (2**self.K,):
            raise ValidationError(f"expected {2**self.K} cells, got shape {p.shape}")
        if np.any(p < 0) or np.any(p > 1):
            raise ValidationError("cell probabilities must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"cell probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)


def _as_unit_array(sample) -> np.ndarray:
    if isinstance(sample, PseudoSample):
        return sample.values
    return PseudoSample(sample).values


def _pattern_codes(u: np.ndarray, b: float) -> np.ndarray:
    weights = np.left_shift(1, np.arange(u.shape[1]))
    return (u > b).astype(np.int64) @ weights


def cell_distribution_empirical(sample, b: float) -> CellDistribution:
    """Relative frequencies of the exceedance patterns ``u[t, k] > b``."""
    b = _check_b(b)
    u = _as_unit_array(sample)
    n, K = u.shape
    if K < 2:
        raise ValidationError("need at least 2 components")
    if K > MAX_COMPONENTS:
        raise ValidationError(f"at most {MAX_COMPONENTS} components supported, got {K}")
    counts = np.bincount(_pattern_codes(u, b), minlength=2**K)
    return CellDistribution(K, counts / n, "empirical", n)


def _superset_moebius(f: np.ndarray, K: int) -> np.ndarray:
    # g[A] = sum_{B superset of A} (-1)^{|B \ A|} f[B], masks over K bits
    g = f.copy()
    for i in range(K):
        v = g.reshape(-1, 2, 2**i)
        v[:, 0, :] -= v[:, 1, :]
    return g


def cell_distribution_exact(copula: CopulaSpec, b: float, K: int | None = None) -> CellDistribution:
    """Cell probabilities of the first ``K`` components by inclusion-exclusion.

    The cell whose below-threshold set is ``A`` has probability
    ``sum_{B >= A} (-1)**|B - A| C(b on B, 1 elsewhere)``. Terms are
    carried as ``C - 1`` (via ``expm1`` of the log-CDF) so cells of size
    ``O(1 - b)`` keep full relative precision as ``b -> 1``.
    """
    b = _check_b(b)
    if not isinstance(copula, CDF_FAMILIES):
        raise ValidationError(
            f"exact cells need a closed-form CDF; family {copula.family!r} is only "
            "supported in empirical mode (simulate, then use cell_distribution_empirical)"
        )
    J = copula.dim
    K = J if K is None else int(K)
    if not (2 <= K <= J):
        raise ValidationError(f"K must lie in 2..{J}, got {K}")
    if K > MAX_COMPONENTS:
        raise ValidationError(f"at most {MAX_COMPONENTS} components supported, got {K}")
    masks = np.arange(2**K)
    bits = (masks[:, None] >> np.arange(K)) & 1
    args = np.ones((2**K, J))
    args[:, :K] = np.where(bits == 1, b, 1.0)
    logc = log_cdf(copula, args)
    below = _superset_moebius(np.expm1(logc), K)
    below[-1] = np.exp(logc[-1])
    # pattern code marks exceedances, i.e. the complement of the below-set
    probs = below[(2**K - 1) ^ masks]
    probs[np.abs(probs) < 1e-15] = 0.0
    return CellDistribution(K, np.clip(probs, 0.0, 1.0), "exact")


def shannon_entropy(cells: CellDistribution) -> float:
    """``-sum p log p`` over the cells, with ``0 log 0 = 0``."""
    # sorted summation: result independent of the component order
    p = np.sort(cells.probs[cells.probs > 0])
    return float(-(p * np.log(p)).sum())


def _one_minus_power_sum(cells: CellDistribution, alpha: float) -> float:
    # 1 - sum p^a written as -sum p (p^(a-1) - 1): no cancellation near a = 1
    p = np.sort(cells.probs[cells.probs > 0])
    return float(-(p * np.expm1((alpha - 1.0) * np.log(p))).sum())


def tsallis_entropy(cells: CellDistribution, alpha: float) -> float:
    """Tsallis entropy ``(1 - sum p**alpha) / (alpha - 1)``; ``alpha > 0``, ``alpha != 1``."""
    alpha = float(alpha)
    if not (alpha > 0) or alpha == 1.0:
        raise ValidationError(f"Tsallis alpha must be positive and != 1, got {alpha}")
    return _one_minus_power_sum(cells, alpha) / (alpha - 1.0)


def binary_entropy(b: float) -> float:
    """``-(b log b + (1 - b) log(1 - b))``, the comonotone congregation entropy."""
    b = _check_b(b)
    return float(-(b * np.log(b) + (1.0 - b) * np.log1p(-b)))


def tsallis_normalizer(b: float, alpha: float) -> float:
    """``(1 - b**alpha) - (1 - b)**alpha``."""
    return float(-np.expm1(alpha * np.log(b)) - np.exp(alpha * np.log1p(-b)))


def index_shannon(cells: CellDistribution, b: float) -> float:
    """Entropy index: 1 under total dependence, ``K`` under independence."""
    return shannon_entropy(cells) / binary_entropy(b)


def index_tsallis(cells: CellDistribution, b: float, alpha: float) -> float:
    """Tsallis index ``(1 - sum p**alpha) / ((1 - b**alpha) - (1 - b)**alpha)``.

    Requires ``alpha > 1``; the Shannon index is its ``alpha -> 1`` limit.
    """
    b = _check_b(b)
    alpha = float(alpha)
    if not alpha > 1.0:
        raise ValidationError(f"Tsallis index needs alpha > 1, got {alpha}; use index_shannon")
    return _one_minus_power_sum(cells, alpha) / tsallis_normalizer(b, alpha)


@dataclass(frozen=True, eq=False)
class IndexCurve:
    grid: np.ndarray
    values: np.ndarray
    kind: Literal["shannon", "tsallis"]
    components: tuple[int, ...]
    alpha: float | None = None
    source: str = "empirical"

    @property
    def K(self) -> int:
        return len(self.components)

    @property
    def label(self) -> str:
        return "S_b" if self.kind == "shannon" else f"T_b_alpha={self.alpha:g}"


Source = Union[PseudoSample, np.ndarray, CopulaSpec]


def index_curve(
    source: Source,
    grid: Sequence[float],
    components: Sequence[int] | None = None,
    kind: Literal["shannon", "tsallis"] = "shannon",
    alpha: float | None = None,
) -> IndexCurve:
    """Index value at each threshold of ``grid``.

    ``source`` is either a pseudo-sample (empirical cells) or a copula spec
    with a closed-form CDF (exact cells). ``components`` are 1-based; for
    copula sources only their count matters, since those families are
    exchangeable.
    """
    g = check_grid(grid)
    if kind not in ("shannon", "tsallis"):
        raise ValidationError(f"unknown index kind {kind!r}")
    if kind == "tsallis" and (alpha is None or not alpha > 1):
        raise ValidationError("Tsallis curves need alpha > 1")

    if isinstance(source, CDF_FAMILIES) or hasattr(source, "family"):
        J = source.dim
        comps = tuple(range(1, J + 1)) if components is None else tuple(components)
        cells = [cell_distribution_exact(source, b, len(comps)) for b in g]
        src = "exact"
    else:
        ps = source if isinstance(source, PseudoSample) else PseudoSample(source)
        comps = tuple(range(1, ps.J + 1)) if components is None else tuple(components)
        if components is not None:
            ps = select_components(ps, comps)
        cells = [cell_distribution_empirical(ps, b) for b in g]
        src = "empirical"

    if kind == "shannon":
        vals = [index_shannon(c, b) for c, b in zip(cells, g)]
    else:
        vals = [index_tsallis(c, b, alpha) for c, b in zip(cells, g)]
    return IndexCurve(g, np.array(vals), kind, comps, alpha if kind == "tsallis" else None, src)


def shannon_curve_fast(u: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Shannon index over a grid for a raw ``(n, K)`` unit array, no validation.

    Inner loop of Monte Carlo envelopes; equals ``index_curve(u, grid).values``.
    """
    n, K = u.shape
    weights = np.left_shift(1, np.arange(K))
    out = np.empty(len(grid))
    for i, b in enumerate(grid):
        counts = np.bincount((u > b).astype(np.int64) @ weights, minlength=2**K)
        p = np.sort(counts[counts > 0]) / n
        out[i] = -(p * np.log(p)).sum() / -(b * np.log(b) + (1.0 - b) * np.log1p(-b))
    return out
