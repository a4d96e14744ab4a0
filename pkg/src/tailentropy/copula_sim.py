"""Copula families, seeded samplers and closed-form copula CDFs.

Families
--------
Independence(J), Comonotone(J), Gaussian(corr), Student(df, corr),
Gumbel(xi, J) and GaussianMixture(weights, means, covs). The first five
sample on the copula (uniform) scale; the mixture is a distribution for the
raw shocks and samples on the raw scale.

Gumbel draws use the frailty construction: with ``V`` positive stable of
index ``a = 1/xi`` (Laplace transform ``exp(-s**a)``, generated by Kanter's
representation) and iid standard exponentials ``E_j``,
``U_j = exp(-(E_j / V)**a)`` has copula
``exp(-(sum_j (-log u_j)**xi)**(1/xi))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Union

import numpy as np
from scipy import special

from tailentropy._rng import make_rng
from tailentropy.errors import ValidationError

_U_LO = np.finfo(float).tiny
_U_HI = np.nextafter(1.0, 0.0)


class NotPositiveDefiniteError(ValidationError):
    """Cholesky factorisation of a correlation/covariance matrix failed."""


def _cholesky(m: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(f"{what} is not positive definite") from None


def _check_corr(corr) -> np.ndarray:
    c = np.array(corr, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 2:
        raise ValidationError(f"correlation matrix must be square with J >= 2, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValidationError("correlation matrix has non-finite entries")
    if not np.allclose(c, c.T, atol=1e-12, rtol=0):
        raise ValidationError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(c), 1.0, atol=1e-12, rtol=0):
        raise ValidationError("correlation matrix must have unit diagonal")
    _cholesky(c, "correlation matrix")
    c.setflags(write=False)
    return c


def _check_dim(J) -> int:
    if int(J) != J or J < 1:
        raise ValidationError(f"dimension must be a positive integer, got {J}")
    return int(J)


@dataclass(frozen=True)
class Independence:
    J: int
    family = "independence"

    def __post_init__(self):
        object.__setattr__(self, "J", _check_dim(self.J))

    @property
    def dim(self) -> int:
        return self.J


@dataclass(frozen=True)
class Comonotone:
    J: int
    family = "comonotone"

    def __post_init__(self):
        object.__setattr__(self, "J", _check_dim(self.J))

    @property
    def dim(self) -> int:
        return self.J


@dataclass(frozen=True, eq=False)
class Gaussian:
    corr: np.ndarray
    family = "gaussian"

    def __post_init__(self):
        object.__setattr__(self, "corr", _check_corr(self.corr))

    @property
    def dim(self) -> int:
        return self.corr.shape[0]


@dataclass(frozen=True, eq=False)
class Student:
    df: float
    corr: np.ndarray
    family = "student"

    def __post_init__(self):
        if not (np.isfinite(self.df) and self.df > 2):
            raise ValidationError(f"Student degrees of freedom must exceed 2, got {self.df}")
        object.__setattr__(self, "df", float(self.df))
        object.__setattr__(self, "corr", _check_corr(self.corr))

    @property
    def dim(self) -> int:
        return self.corr.shape[0]


@dataclass(frozen=True)
class Gumbel:
    xi: float
    J: int
    family = "gumbel"

    def __post_init__(self):
        if not (np.isfinite(self.xi) and self.xi >= 1):
            raise ValidationError(f"Gumbel parameter xi must be >= 1, got {self.xi}")
        object.__setattr__(self, "xi", float(self.xi))
        object.__setattr__(self, "J", _check_dim(self.J))

    @property
    def dim(self) -> int:
        return self.J


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray
    family = "gaussian_mixture"

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        mu = np.array(self.means, dtype=float)
        S = np.array(self.covs, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValidationError("mixture weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be nonnegative and sum to 1")
        k = w.size
        if mu.ndim != 2 or mu.shape[0] != k:
            raise ValidationError(f"means must have shape ({k}, J), got {mu.shape}")
        J = mu.shape[1]
        if S.shape != (k, J, J):
            raise ValidationError(f"covs must have shape ({k}, {J}, {J}), got {S.shape}")
        for i in range(k):
            if not np.allclose(S[i], S[i].T, atol=1e-10 * max(1.0, np.abs(S[i]).max())):
                raise ValidationError(f"covariance {i} is not symmetric")
            _cholesky(S[i], f"covariance {i}")
        for a in (w, mu, S):
            a.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covs", S)

    @property
    def dim(self) -> int:
        return self.means.shape[1]


CopulaSpec = Union[Independence, Comonotone, Gaussian, Student, Gumbel, GaussianMixture]
CDF_FAMILIES = (Independence, Comonotone, Gumbel)


def spec_to_dict(spec: CopulaSpec) -> dict:
    """JSON-ready description of a family and its parameters."""
    d = {"family": spec.family}
    if isinstance(spec, (Independence, Comonotone)):
        d["J"] = spec.J
    elif isinstance(spec, Gumbel):
        d.update(xi=spec.xi, J=spec.J)
    elif isinstance(spec, Gaussian):
        d["corr"] = spec.corr.tolist()
    elif isinstance(spec, Student):
        d.update(df=spec.df, corr=spec.corr.tolist())
    elif isinstance(spec, GaussianMixture):
        d.update(
            weights=spec.weights.tolist(),
            means=spec.means.tolist(),
            covs=spec.covs.tolist(),
        )
    else:
        raise ValidationError(f"unknown copula spec {spec!r}")
    return d


def spec_from_dict(d: dict) -> CopulaSpec:
    fam = d.get("family")
    if fam == "independence":
        return Independence(d["J"])
    if fam == "comonotone":
        return Comonotone(d["J"])
    if fam == "gumbel":
        return Gumbel(d["xi"], d["J"])
    if fam == "gaussian":
        return Gaussian(np.asarray(d["corr"]))
    if fam == "student":
        return Student(d["df"], np.asarray(d["corr"]))
    if fam == "gaussian_mixture":
        return GaussianMixture(d["weights"], d["means"], d["covs"])
    raise ValidationError(f"unknown family {fam!r}")


@dataclass(frozen=True, eq=False)
class SimBatch:
    values: np.ndarray
    seed: int
    spec: CopulaSpec
    space: Literal["uniform", "raw"]


def _positive_stable(a: float, size: int, rng: np.random.Generator) -> np.ndarray:
    # Kanter: Laplace transform exp(-s**a), 0 < a <= 1
    w = rng.uniform(0.0, np.pi, size)
    e = rng.standard_exponential(size)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = (np.sin(a * w) / np.sin(w) ** (1.0 / a)) * (
            np.sin((1.0 - a) * w) / e
        ) ** ((1.0 - a) / a)
    return v


def _to_unit(u: np.ndarray) -> np.ndarray:
    return np.clip(u, _U_LO, _U_HI)


def sample(spec: CopulaSpec, n: int, seed: int) -> SimBatch:
    """Draw ``n`` iid rows from ``spec``; deterministic in ``(spec, n, seed)``."""
    if int(n) != n or n < 1:
        raise ValidationError(f"sample size must be a positive integer, got {n}")
    n = int(n)
    rng = make_rng(seed)
    space = "uniform"
    if isinstance(spec, Independence):
        u = rng.random((n, spec.J))
    elif isinstance(spec, Comonotone):
        u = np.repeat(rng.random((n, 1)), spec.J, axis=1)
    elif isinstance(spec, Gaussian):
        L = _cholesky(spec.corr, "correlation matrix")
        z = rng.standard_normal((n, spec.dim)) @ L.T
        u = special.ndtr(z)
    elif isinstance(spec, Student):
        L = _cholesky(spec.corr, "correlation matrix")
        z = rng.standard_normal((n, spec.dim)) @ L.T
        w = np.sqrt(rng.chisquare(spec.df, n) / spec.df)
        u = special.stdtr(spec.df, z / w[:, None])
    elif isinstance(spec, Gumbel):
        a = 1.0 / spec.xi
        v = _positive_stable(a, n, rng)
        e = rng.standard_exponential((n, spec.J))
        u = np.exp(-((e / v[:, None]) ** a))
    elif isinstance(spec, GaussianMixture):
        k = rng.choice(spec.weights.size, size=n, p=spec.weights)
        z = rng.standard_normal((n, spec.dim))
        x = np.empty_like(z)
        for c in range(spec.weights.size):
            rows = k == c
            L = _cholesky(spec.covs[c], f"covariance {c}")
            x[rows] = z[rows] @ L.T + spec.means[c]
        return SimBatch(x, int(seed), spec, "raw")
    else:
        raise ValidationError(f"unknown copula spec {spec!r}")
    return SimBatch(_to_unit(u), int(seed), spec, space)


def log_cdf(spec: CopulaSpec, u) -> np.ndarray:
    """Natural log of the copula CDF for the closed-form families."""
    if not isinstance(spec, CDF_FAMILIES):
        raise ValidationError(
            f"no closed-form CDF for family {spec.family!r}; use an empirical estimate"
        )
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != spec.dim:
        raise ValidationError(f"point dimension {u.shape[-1]} != copula dimension {spec.dim}")
    if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
        raise ValidationError("copula arguments must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        lu = np.log(u)
    if isinstance(spec, Independence):
        return lu.sum(axis=-1)
    if isinstance(spec, Comonotone):
        return lu.min(axis=-1)
    with np.errstate(over="ignore"):
        s = ((-lu) ** spec.xi).sum(axis=-1)
        return -(s ** (1.0 / spec.xi))


def cdf(spec: CopulaSpec, u) -> np.ndarray | float:
    """Exact copula CDF (Independence, Comonotone and Gumbel only)."""
    out = np.exp(log_cdf(spec, u))
    return float(out) if np.ndim(out) == 0 else out
