"""GARCH(1,1) Gaussian quasi-maximum-likelihood fitting and the ARCH-LM
heteroskedasticity test.

The variance recursion h_t = omega + alpha*eps_{t-1}^2 + beta*h_{t-1} is
seeded with h_1 equal to the sample variance (n denominator) of the input,
held fixed during optimization. The likelihood and its analytic gradient
are evaluated with linear filters, so a full evaluation is vectorized.
Constraints (omega > 0, alpha, beta >= 0, alpha + beta < 1) are enforced by
an unconstrained reparameterization, never by clipping.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.signal import lfilter
from scipy.stats import chi2

from ..errors import (
    DegenerateVarianceError,
    InsufficientDataError,
    ValidationError,
)
from ..series import ReturnSeries

_LOG_2PI = math.log(2.0 * math.pi)
_PERSISTENCE_CAP = 1.0 - 1e-6  # alpha + beta stays strictly below 1
_INTEGRATED_WARN = 0.999


@dataclass(frozen=True)
class GarchFit:
    """Fitted GARCH(1,1) with Gaussian innovations.

    Attributes:
        mu: conditional mean, percent per month.
        omega, alpha, beta: variance recursion parameters; alpha + beta < 1.
        conditional_variance_path: h_1..h_n in squared-percent units.
        one_step_variance: h_{n+1}, the forecast variance after sample end.
        integrated_warning: alpha + beta exceeded 0.999 (near-integrated).
        converged: optimizer reported success for the winning start.
    """

    mu: float
    omega: float
    alpha: float
    beta: float
    conditional_variance_path: np.ndarray
    one_step_variance: float
    log_likelihood: float
    n: int
    h1: float
    converged: bool
    integrated_warning: bool

    def __post_init__(self) -> None:
        if self.omega <= 0:
            raise ValidationError(f"omega must be positive, got {self.omega}")
        if self.alpha < 0 or self.beta < 0:
            raise ValidationError("alpha and beta must be nonnegative")
        if self.alpha + self.beta >= 1:
            raise ValidationError(
                f"alpha + beta = {self.alpha + self.beta} violates stationarity"
            )
        path = self.conditional_variance_path
        if len(path) != self.n or np.any(path <= 0):
            raise ValidationError("conditional variance path must be positive")

    @property
    def unconditional_variance(self) -> float:
        return self.omega / (1.0 - self.alpha - self.beta)


def _recursions(params, x, h1):
    """Variance path and its parameter derivatives via first-order filters."""
    mu, omega, alpha, beta = params
    eps = x - mu
    n = len(x)
    h = np.empty(n)
    h[0] = h1
    d_omega = np.zeros(n)
    d_alpha = np.zeros(n)
    d_beta = np.zeros(n)
    d_mu = np.zeros(n)
    if n > 1:
        drive = omega + alpha * eps[:-1] ** 2
        a_poly = np.array([1.0, -beta])
        h[1:] = lfilter([1.0], a_poly, drive, zi=np.array([beta * h1]))[0]
        zi0 = np.array([0.0])
        d_omega[1:] = lfilter([1.0], a_poly, np.ones(n - 1), zi=zi0)[0]
        d_alpha[1:] = lfilter([1.0], a_poly, eps[:-1] ** 2, zi=zi0)[0]
        d_beta[1:] = lfilter([1.0], a_poly, h[:-1], zi=zi0)[0]
        d_mu[1:] = lfilter([1.0], a_poly, -2.0 * alpha * eps[:-1], zi=zi0)[0]
    return eps, h, (d_mu, d_omega, d_alpha, d_beta)


def garch11_variance_path(params, values, h1: float | None = None) -> np.ndarray:
    """Conditional variance path h_1..h_n for (mu, omega, alpha, beta)."""
    x = np.asarray(values, dtype=np.float64)
    if h1 is None:
        h1 = float(np.var(x))
    _, h, _ = _recursions(params, x, h1)
    return h


def garch11_loglike(params, values, h1: float | None = None):
    """Gaussian log-likelihood and analytic gradient at natural parameters
    (mu, omega, alpha, beta). h1 defaults to the sample variance
    (n denominator) of `values` and is treated as a constant.

    Returns (ll, gradient array of length 4). Infeasible parameters
    (omega <= 0, negative alpha/beta, or a nonpositive variance on the
    path) give (-inf, zeros).
    """
    x = np.asarray(values, dtype=np.float64)
    if h1 is None:
        h1 = float(np.var(x))
    mu, omega, alpha, beta = (float(v) for v in params)
    if omega <= 0 or alpha < 0 or beta < 0:
        return -np.inf, np.zeros(4)
    eps, h, (d_mu, d_omega, d_alpha, d_beta) = _recursions(
        (mu, omega, alpha, beta), x, h1
    )
    if np.any(h <= 0) or not np.all(np.isfinite(h)):
        return -np.inf, np.zeros(4)
    inv_h = 1.0 / h
    ratio = eps**2 * inv_h
    ll = -0.5 * float(np.sum(_LOG_2PI + np.log(h) + ratio))
    # d ll / dh_t common factor
    common = -0.5 * inv_h * (1.0 - ratio)
    g_mu = float(np.sum(eps * inv_h) + np.sum(common * d_mu))
    g_omega = float(np.sum(common * d_omega))
    g_alpha = float(np.sum(common * d_alpha))
    g_beta = float(np.sum(common * d_beta))
    return ll, np.array([g_mu, g_omega, g_alpha, g_beta])


def _to_natural(raw):
    """Map unconstrained (mu, w, a, b) to (mu, omega, alpha, beta)."""
    mu, w, a, b = raw
    omega = math.exp(w)
    ea, eb = math.exp(a), math.exp(b)
    denom = 1.0 + ea + eb
    alpha = _PERSISTENCE_CAP * ea / denom
    beta = _PERSISTENCE_CAP * eb / denom
    return np.array([mu, omega, alpha, beta])


def _from_natural(mu, omega, alpha, beta):
    p_a = alpha / _PERSISTENCE_CAP
    p_b = beta / _PERSISTENCE_CAP
    p_0 = 1.0 - p_a - p_b
    return np.array([mu, math.log(omega), math.log(p_a / p_0), math.log(p_b / p_0)])


def _raw_gradient(raw, natural_grad):
    """Chain rule from natural-parameter gradient to raw coordinates."""
    _, w, a, b = raw
    _, omega, alpha, beta = _to_natural(raw)
    g_mu, g_omega, g_alpha, g_beta = natural_grad
    ea, eb = math.exp(a), math.exp(b)
    denom = 1.0 + ea + eb
    s = _PERSISTENCE_CAP
    d_alpha_da = s * ea * (1.0 + eb) / denom**2
    d_beta_da = -s * ea * eb / denom**2
    d_beta_db = s * eb * (1.0 + ea) / denom**2
    d_alpha_db = d_beta_da
    return np.array([
        g_mu,
        g_omega * omega,
        g_alpha * d_alpha_da + g_beta * d_beta_da,
        g_alpha * d_alpha_db + g_beta * d_beta_db,
    ])


_STARTS = ((0.05, 0.90), (0.10, 0.80), (0.02, 0.40), (1e-3, 1e-3))


def fit_garch11(s: ReturnSeries) -> GarchFit:
    """Quasi-MLE GARCH(1,1) fit from several deterministic starts.

    Raises:
        InsufficientDataError: n < 100.
        DegenerateVarianceError: constant input.
    """
    n = len(s)
    if n < 100:
        raise InsufficientDataError(f"GARCH fit needs n >= 100, got {n}")
    x = s.values
    h1 = float(np.var(x))
    if h1 <= 0:
        raise DegenerateVarianceError(f"series {s.label!r} is constant")
    sd = math.sqrt(h1)
    mu0 = float(x.mean())

    def objective(raw):
        natural = _to_natural(raw)
        ll, grad = garch11_loglike(natural, x, h1)
        if not math.isfinite(ll):
            return 1e12, np.zeros(4)
        return -ll, -_raw_gradient(raw, grad)

    bounds = [
        (mu0 - 10 * sd, mu0 + 10 * sd),
        (math.log(h1) - 35.0, math.log(h1) + 35.0),
        (-40.0, 40.0),
        (-40.0, 40.0),
    ]
    best_res = None
    for alpha0, beta0 in _STARTS:
        omega0 = h1 * (1.0 - alpha0 - beta0)
        raw0 = _from_natural(mu0, omega0, alpha0, beta0)
        res = minimize(
            objective,
            raw0,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={"maxiter": 400, "ftol": 1e-13, "gtol": 1e-9},
        )
        if best_res is None or res.fun < best_res.fun:
            best_res = res
    mu, omega, alpha, beta = (float(v) for v in _to_natural(best_res.x))
    ll, grad = garch11_loglike((mu, omega, alpha, beta), x, h1)
    _, h, _ = _recursions((mu, omega, alpha, beta), x, h1)
    integrated = alpha + beta > _INTEGRATED_WARN
    if integrated:
        warnings.warn(
            f"alpha + beta = {alpha + beta:.5f} is near 1: variance is "
            f"close to integrated",
            RuntimeWarning,
            stacklevel=2,
        )
    if not best_res.success:
        warnings.warn(
            f"GARCH optimizer stopped without a clean success flag "
            f"({best_res.message}); returning its best iterate",
            RuntimeWarning,
            stacklevel=2,
        )
    eps_last = x[-1] - mu
    return GarchFit(
        mu=mu,
        omega=omega,
        alpha=alpha,
        beta=beta,
        conditional_variance_path=h,
        one_step_variance=float(omega + alpha * eps_last**2 + beta * h[-1]),
        log_likelihood=float(ll),
        n=n,
        h1=h1,
        converged=bool(best_res.success),
        integrated_warning=integrated,
    )


@dataclass(frozen=True)
class ArchLmResult:
    """Engle's LM test for autoregressive conditional heteroskedasticity.

    statistic is m * R^2 from regressing squared demeaned returns on their
    own first `lags` lags (m auxiliary observations); p_value comes from
    chi-square(lags).
    """

    lags: int
    statistic: float
    p_value: float
    n_obs: int

    def __post_init__(self) -> None:
        if self.statistic < 0:
            raise ValidationError(f"statistic must be >= 0, got {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValidationError(f"p-value {self.p_value} outside [0,1]")


def arch_lm_test(s: ReturnSeries, lags: int = 12) -> ArchLmResult:
    """LM test of no ARCH effects up to the given lag order.

    Raises:
        ValidationError: lags < 1.
        InsufficientDataError: n <= lags + 10.
        DegenerateVarianceError: squared deviations carry no variance.
    """
    if lags < 1:
        raise ValidationError(f"lags must be >= 1, got {lags}")
    n = len(s)
    if n <= lags + 10:
        raise InsufficientDataError(
            f"ARCH-LM with {lags} lags needs n > {lags + 10}, got {n}"
        )
    e = (s.values - s.values.mean()) ** 2
    y = e[lags:]
    m = len(y)
    design = np.column_stack(
        [np.ones(m)] + [e[lags - j : n - j] for j in range(1, lags + 1)]
    )
    sst = float(np.sum((y - y.mean()) ** 2))
    if sst == 0.0:
        raise DegenerateVarianceError("squared deviations are constant")
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    ssr = float(np.sum((y - design @ coef) ** 2))
    r2 = max(0.0, 1.0 - ssr / sst)
    statistic = m * r2
    return ArchLmResult(
        lags=lags,
        statistic=statistic,
        p_value=float(chi2.sf(statistic, lags)),
        n_obs=m,
    )
