"""Marginal GARCH(1,1) filtering and the joint models fitted to its shocks.

* GARCH(1,1) by Gaussian quasi maximum likelihood (Nelder-Mead on a
  transformed parameter vector that enforces stationarity).
* Gaussian and Student copulas with correlations from Kendall's tau
  inversion ``rho = sin(pi tau / 2)``; Student degrees of freedom by
  golden-section search of the pseudo log-likelihood on ``log nu``.
* Multivariate normal mixtures by EM with several k-means++ starts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy import linalg, optimize, signal, special, stats

from tailentropy._rng import derive_seed, make_rng
from tailentropy.copula_sim import CopulaSpec, Gaussian, GaussianMixture, Student
from tailentropy.errors import NumericalError, ValidationError
from tailentropy.pseudo_obs import PseudoSample, RawSample

logger = logging.getLogger(__name__)

_LOG2PI = np.log(2 * np.pi)


def log_returns(prices) -> np.ndarray:
    """Percent log-returns ``100 * (log p_t - log p_{t-1})`` along axis 0."""
    p = np.asarray(prices, dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p <= 0):
        raise ValidationError("prices must be finite and strictly positive")
    if p.shape[0] < 2:
        raise ValidationError("need at least two prices")
    return 100.0 * np.diff(np.log(p), axis=0)


# --------------------------------------------------------------------------
# GARCH(1,1)
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GarchFit:
    mu: float
    alpha0: float
    alpha1: float
    beta1: float
    sigma2: np.ndarray
    shocks: np.ndarray
    converged: bool
    loglik: float
    mean_included: bool = True
    n_iter: int = 0

    def to_dict(self) -> dict:
        return {
            "estimator": "garch11-gaussian-qmle",
            "optimizer": "nelder-mead",
            "mu": self.mu,
            "alpha0": self.alpha0,
            "alpha1": self.alpha1,
            "beta1": self.beta1,
            "converged": self.converged,
            "loglik": self.loglik,
            "mean_included": self.mean_included,
            "n_iter": self.n_iter,
        }


def garch11_variance(a: np.ndarray, alpha0: float, alpha1: float, beta1: float) -> np.ndarray:
    """Conditional variances with ``sigma2[0]`` set to the sample variance of ``a``."""
    s0 = float(np.mean((a - a.mean()) ** 2))
    x = alpha0 + alpha1 * a[:-1] ** 2
    tail, _ = signal.lfilter([1.0], [1.0, -beta1], x, zi=[beta1 * s0])
    return np.concatenate(([s0], tail))


def _unpack(x: np.ndarray, mean_included: bool):
    mu = x[0] if mean_included else 0.0
    lw, lp, ls = x[-3:]
    persistence = special.expit(lp)
    share = special.expit(ls)
    return mu, np.exp(lw), persistence * share, persistence * (1.0 - share)


def _garch_nll(x, r, mean_included):
    mu, a0, a1, b1 = _unpack(x, mean_included)
    a = r - mu
    s2 = garch11_variance(a, a0, a1, b1)
    if not np.all(s2 > 0) or not np.all(np.isfinite(s2)):
        return np.inf
    return 0.5 * float(np.sum(_LOG2PI + np.log(s2) + a * a / s2))


def fit_garch11(returns, mean_included: bool = True, max_iter: int = 20_000) -> GarchFit:
    """Gaussian QMLE of ``r_t = mu + a_t``, ``a_t = sigma_t eps_t``,
    ``sigma_t^2 = alpha0 + alpha1 a_{t-1}^2 + beta1 sigma_{t-1}^2``.

    Non-convergence is reported through ``converged`` rather than raised.
    """
    r = np.asarray(returns, dtype=float).ravel()
    if r.size < 50:
        raise ValidationError(f"GARCH fit needs at least 50 observations, got {r.size}")
    if not np.all(np.isfinite(r)):
        raise ValidationError("returns contain non-finite values")
    var = float(np.var(r))
    if var <= 0:
        raise ValidationError("returns have zero variance")

    best = None
    for persistence, share in ((0.9, 0.1), (0.95, 0.05), (0.5, 0.5)):
        x0 = [np.log(var * (1 - persistence)), special.logit(persistence), special.logit(share)]
        if mean_included:
            x0 = [float(np.mean(r))] + x0
        res = optimize.minimize(
            _garch_nll,
            np.array(x0),
            args=(r, mean_included),
            method="Nelder-Mead",
            options={"maxiter": max_iter, "maxfev": 2 * max_iter, "xatol": 1e-8, "fatol": 1e-10},
        )
        if best is None or res.fun < best.fun:
            best = res
    if not np.isfinite(best.fun):
        raise NumericalError("GARCH quasi-likelihood is not finite at any start")
    mu, a0, a1, b1 = _unpack(best.x, mean_included)
    a = r - mu
    s2 = garch11_variance(a, a0, a1, b1)
    if not best.success:
        logger.warning("GARCH(1,1) fit did not converge: %s", best.message)
    return GarchFit(
        float(mu), float(a0), float(a1), float(b1), s2, a / np.sqrt(s2),
        bool(best.success), float(-best.fun), mean_included, int(best.nit),
    )


def simulate_garch11(
    n: int,
    mu: float,
    alpha0: float,
    alpha1: float,
    beta1: float,
    seed: int | None = None,
    shocks: np.ndarray | None = None,
    burn: int = 500,
) -> np.ndarray:
    """Simulate ``n`` returns; ``shocks`` (zero mean, unit variance) may be supplied.

    Supplied shocks are used as the last ``n`` innovations; the burn-in uses
    Gaussian draws from ``seed``.
    """
    if alpha1 + beta1 >= 1:
        raise ValidationError("alpha1 + beta1 must be < 1")
    rng = make_rng(0 if seed is None else seed)
    eps = rng.standard_normal(n + burn)
    if shocks is not None:
        shocks = np.asarray(shocks, dtype=float)
        if shocks.shape != (n,):
            raise ValidationError(f"shocks must have shape ({n},)")
        eps[burn:] = shocks
    s2 = alpha0 / (1 - alpha1 - beta1)
    a = np.empty(n + burn)
    for t in range(n + burn):
        a[t] = np.sqrt(s2) * eps[t]
        s2 = alpha0 + alpha1 * a[t] ** 2 + beta1 * s2
    return mu + a[burn:]


# --------------------------------------------------------------------------
# Copulas
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FittedCopula:
    spec: CopulaSpec
    method: Literal["tau-inversion", "pseudo-likelihood", "EM", "given"]
    diagnostics: dict = field(default_factory=dict)


def kendall_tau_matrix(u: np.ndarray) -> np.ndarray:
    """Pairwise Kendall tau (tau-b, equal to tau-a without ties)."""
    K = u.shape[1]
    tau = np.eye(K)
    for i in range(K):
        for j in range(i + 1, K):
            tau[i, j] = tau[j, i] = stats.kendalltau(u[:, i], u[:, j]).statistic
    return tau


def nearest_correlation(m: np.ndarray, eig_floor: float = 1e-8) -> np.ndarray:
    """Clip eigenvalues at ``eig_floor`` and rescale to unit diagonal."""
    m = 0.5 * (m + m.T)
    lam, V = np.linalg.eigh(m)
    c = (V * np.maximum(lam, eig_floor)) @ V.T
    d = np.sqrt(np.diag(c))
    c = c / np.outer(d, d)
    c = 0.5 * (c + c.T)
    np.fill_diagonal(c, 1.0)
    return c


def _is_pd(m: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(m)
    except np.linalg.LinAlgError:
        return False
    return bool(np.linalg.eigvalsh(m).min() > 0)


def tau_inversion(sample: PseudoSample | np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Correlation ``sin(pi tau / 2)``, projected when not positive definite.

    Returns ``(rho, tau, projected)``.
    """
    u = sample.values if isinstance(sample, PseudoSample) else np.asarray(sample, dtype=float)
    if u.ndim != 2 or u.shape[1] < 2:
        raise ValidationError("need a 2-D sample with at least 2 columns")
    tau = kendall_tau_matrix(u)
    rho = np.sin(np.pi * tau / 2)
    np.fill_diagonal(rho, 1.0)
    if _is_pd(rho):
        return rho, tau, False
    return nearest_correlation(rho), tau, True


def fit_gaussian_copula(sample: PseudoSample | np.ndarray) -> FittedCopula:
    rho, tau, projected = tau_inversion(sample)
    return FittedCopula(
        Gaussian(rho),
        "tau-inversion",
        {"estimator": "kendall-tau-inversion", "tau": tau.tolist(), "projected": projected},
    )


def student_pseudo_loglik(u: np.ndarray, nu: float, corr: np.ndarray) -> float:
    """Student copula log-density summed over rows of ``u``."""
    K = u.shape[1]
    x = special.stdtrit(nu, u)
    L = np.linalg.cholesky(corr)
    z = np.linalg.solve(L, x.T)
    q = np.einsum("ij,ij->j", z, z)
    logdet = 2.0 * np.log(np.diag(L)).sum()
    joint = (
        special.gammaln((nu + K) / 2) - special.gammaln(nu / 2) - 0.5 * K * np.log(nu * np.pi)
        - 0.5 * logdet - 0.5 * (nu + K) * np.log1p(q / nu)
    )
    marg = (
        special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * np.log(nu * np.pi)
        - 0.5 * (nu + 1) * np.log1p(x * x / nu)
    ).sum(axis=1)
    return float(np.sum(joint - marg))


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, int]:
    invphi = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    # endpoints are candidates too: the search never evaluates them
    cands = [(f(lo), lo), (fc, c), (fd, d), (f(hi), hi)]
    return max(cands)[1], it


def fit_student_copula(
    sample: PseudoSample | np.ndarray,
    nu_bounds: tuple[float, float] = (2.01, 100.0),
    tol: float = 1e-4,
) -> FittedCopula:
    """Student copula: tau-inversion correlation, pseudo-ML degrees of freedom.

    A degrees-of-freedom estimate at either bound is flagged in
    ``diagnostics["at_bound"]``.
    """
    lo, hi = nu_bounds
    if not (2 < lo < hi):
        raise ValidationError(f"invalid degrees-of-freedom bounds {nu_bounds}")
    u = sample.values if isinstance(sample, PseudoSample) else np.asarray(sample, dtype=float)
    rho, tau, projected = tau_inversion(u)
    objective = lambda lognu: student_pseudo_loglik(u, float(np.exp(lognu)), rho)
    lognu, it = _golden_max(objective, np.log(lo), np.log(hi), tol)
    nu = float(np.exp(lognu))
    at_bound = min(abs(lognu - np.log(lo)), abs(lognu - np.log(hi))) <= 2 * tol
    if at_bound:
        logger.warning("Student degrees of freedom %.4g at search bound", nu)
    return FittedCopula(
        Student(nu, rho),
        "pseudo-likelihood",
        {
            "estimator": "kendall-tau-inversion + golden-section pseudo-ML on log(nu)",
            "nu_bounds": [lo, hi],
            "tol_log_nu": tol,
            "iterations": it,
            "objective": objective(lognu),
            "at_bound": bool(at_bound),
            "projected": projected,
        },
    )


# --------------------------------------------------------------------------
# Gaussian mixture
# --------------------------------------------------------------------------


def _kmeanspp_labels(X: np.ndarray, k: int, rng: np.random.Generator, n_lloyd: int = 10) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = ((X - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        p = d2 / d2.sum() if d2.sum() > 0 else np.full(n, 1.0 / n)
        centers.append(X[rng.choice(n, p=p)])
        d2 = np.minimum(d2, ((X - centers[-1]) ** 2).sum(1))
    C = np.array(centers)
    for _ in range(n_lloyd):
        labels = ((X[:, None, :] - C[None]) ** 2).sum(-1).argmin(1)
        for c in range(k):
            if np.any(labels == c):
                C[c] = X[labels == c].mean(0)
    return ((X[:, None, :] - C[None]) ** 2).sum(-1).argmin(1)


def _floor_cov(S: np.ndarray, floor: float) -> np.ndarray:
    lam, V = np.linalg.eigh(0.5 * (S + S.T))
    if lam.min() >= floor:
        return S
    return (V * np.maximum(lam, floor)) @ V.T


def _m_step(X, resp, floor):
    Nk = resp.sum(0)
    w = Nk / X.shape[0]
    mu = (resp.T @ X) / Nk[:, None]
    covs = np.empty((resp.shape[1], X.shape[1], X.shape[1]))
    for c in range(resp.shape[1]):
        D = X - mu[c]
        covs[c] = _floor_cov((resp[:, c, None] * D).T @ D / Nk[c], floor)
    return w, mu, covs


def _log_joint(X, w, mu, covs):
    n, J = X.shape
    out = np.empty((n, w.size))
    for c in range(w.size):
        L = np.linalg.cholesky(covs[c])
        z = linalg.solve_triangular(L, (X - mu[c]).T, lower=True)
        out[:, c] = (
            np.log(w[c]) - 0.5 * J * _LOG2PI - np.log(np.diag(L)).sum() - 0.5 * (z * z).sum(0)
        )
    return out


def _em_single(X, k, rng, floor, max_iter, tol):
    labels = _kmeanspp_labels(X, k, rng)
    resp = np.zeros((X.shape[0], k))
    resp[np.arange(X.shape[0]), labels] = 1.0
    if np.any(resp.sum(0) == 0):
        return None
    w, mu, covs = _m_step(X, resp, floor)
    trace = []
    converged = False
    for _ in range(max_iter):
        lj = _log_joint(X, w, mu, covs)
        ll = special.logsumexp(lj, axis=1)
        total = float(ll.sum())
        if not np.isfinite(total):
            return None
        trace.append(total)
        if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-1]):
            converged = True
            break
        resp = np.exp(lj - ll[:, None])
        if np.any(resp.sum(0) < X.shape[1] + 1):
            # component holds fewer points than needed for a covariance
            return None
        w, mu, covs = _m_step(X, resp, floor)
    return w, mu, covs, trace, converged


def fit_gaussian_mixture(
    raw: RawSample | np.ndarray,
    n_components: int = 5,
    n_starts: int = 5,
    seed: int = 0,
    max_iter: int = 1000,
    tol: float = 1e-6,
    floor_scale: float = 1e-6,
) -> FittedCopula:
    """EM fit of a ``n_components`` multivariate normal mixture on the raw scale.

    Covariance eigenvalues are floored at ``floor_scale`` times the mean
    column variance. The start with the highest final log-likelihood wins;
    components are returned in order of decreasing weight.
    """
    X = raw.values if isinstance(raw, RawSample) else np.asarray(raw, dtype=float)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise ValidationError("mixture data must be a finite 2-D array")
    n, J = X.shape
    k = int(n_components)
    if k < 1:
        raise ValidationError("need at least one mixture component")
    if n <= 10 * k * J:
        raise ValidationError(f"need more than {10 * k * J} rows for {k} components in {J} dimensions")
    floor = floor_scale * float(np.var(X, axis=0).mean())
    if k == 1:
        mu = X.mean(0, keepdims=True)
        D = X - mu[0]
        covs = _floor_cov(D.T @ D / n, floor)[None]
        ll = float(special.logsumexp(_log_joint(X, np.ones(1), mu, covs), axis=1).sum())
        spec = GaussianMixture(np.ones(1), mu, covs)
        return FittedCopula(spec, "EM", {"estimator": "closed-form", "iterations": 0, "loglik": ll,
                                         "loglik_traces": [[ll]], "floor": floor})

    results = []
    for s in range(n_starts):
        rng = make_rng(derive_seed(seed, s))
        out = _em_single(X, k, rng, floor, max_iter, tol)
        if out is not None:
            results.append(out)
    if not results:
        raise NumericalError(
            "every EM start collapsed; increase floor_scale or reduce n_components"
        )
    w, mu, covs, trace, converged = max(results, key=lambda r: r[3][-1])
    order = np.argsort(-w, kind="stable")
    w = w[order] / w[order].sum()
    spec = GaussianMixture(w, mu[order], covs[order])
    return FittedCopula(
        spec,
        "EM",
        {
            "estimator": "EM, k-means++ starts",
            "n_starts": n_starts,
            "successful_starts": len(results),
            "iterations": len(trace),
            "loglik": trace[-1],
            "converged": converged,
            "loglik_traces": [r[3] for r in results],
            "floor": floor,
            "seed": seed,
        },
    )


def synthetic_price_panel(
    copula: CopulaSpec,
    n: int,
    seed: int,
    garch: tuple[float, float, float] = (0.05, 0.1, 0.85),
    mu: float = 0.03,
    p0: float = 100.0,
) -> np.ndarray:
    """``(n + 1) x J`` prices whose returns are GARCH(1,1) with copula-linked shocks.

    Shocks are standard normal margins glued by ``copula``; column ``j`` uses
    burn-in seed ``derive_seed(seed, 1000 + j)``.
    """
    from tailentropy.copula_sim import sample

    batch = sample(copula, n, seed)
    if batch.space != "uniform":
        raise ValidationError("synthetic panels need a copula on the uniform scale")
    z = special.ndtri(batch.values)
    a0, a1, b1 = garch
    rets = np.column_stack([
        simulate_garch11(n, mu, a0, a1, b1, seed=derive_seed(seed, 1000 + j), shocks=z[:, j])
        for j in range(z.shape[1])
    ])
    logp = np.vstack([np.zeros(z.shape[1]), np.cumsum(rets / 100.0, axis=0)])
    return p0 * np.exp(logp)
