"""Vector autoregression: OLS estimation, information-criterion lag
selection, Granger causality, iterated forecasts with standard errors,
orthogonalized impulse responses, and forecast-error variance
decomposition.

Shock orthogonalization uses the Cholesky factor of the residual
covariance under a caller-chosen variable ordering. Impulse-response
bands come from a seeded residual bootstrap with symmetric percentile
intervals (point plus/minus a quantile of the absolute bootstrap
deviations), so the bands contain the point response by construction.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import qr
from scipy.stats import f as f_dist

from ..errors import (
    AlignmentError,
    DecompositionError,
    InsufficientDataError,
    SingularDesignError,
    ValidationError,
)
from ..series import Panel

_CRITERIA = ("AIC", "BIC")


@dataclass(frozen=True)
class VarFit:
    """A fitted VAR(p) with intercept.

    coeff[l-1][i, j] is the effect of series j at lag l on series i.
    residual_cov uses the n_eff - k*p - 1 denominator. `stable` reports
    whether all companion-matrix eigenvalues lie inside the unit circle.
    """

    labels: tuple[str, ...]
    p: int
    intercept: np.ndarray
    coeff: np.ndarray
    intercept_t: np.ndarray
    t_stats: np.ndarray
    residual_cov: np.ndarray
    residuals: np.ndarray
    r_square: np.ndarray
    adj_r_square: np.ndarray
    stable: bool
    n_eff: int
    panel: Panel

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.intercept.shape != (k,) or self.coeff.shape != (self.p, k, k):
            raise ValidationError("coefficient shapes do not match the label count")
        cov = self.residual_cov
        if cov.shape != (k, k) or not np.allclose(cov, cov.T, atol=1e-10):
            raise ValidationError("residual covariance must be symmetric k x k")
        eigs = np.linalg.eigvalsh(cov)
        if eigs.min() < -1e-8 * max(1.0, eigs.max()):
            raise ValidationError("residual covariance must be positive semidefinite")
        if not (np.all(np.isfinite(self.intercept_t)) and np.all(np.isfinite(self.t_stats))):
            raise ValidationError("t-statistics must be finite")
        if np.any(self.r_square > 1 + 1e-12):
            raise ValidationError("R-square cannot exceed 1")
        if self.residuals.shape != (self.n_eff, k):
            raise ValidationError("residual matrix shape is inconsistent")

    @property
    def width(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class GrangerResult:
    """Pairwise Granger F-tests. Entry [i, j] tests whether series j's
    lags jointly enter series i's equation; diagonals are NaN."""

    labels: tuple[str, ...]
    lag_order: int
    dof_denominator: int
    f_stats: np.ndarray
    p_values: np.ndarray

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.f_stats.shape != (k, k) or self.p_values.shape != (k, k):
            raise ValidationError("statistic matrices must be k x k")
        off = ~np.eye(k, dtype=bool)
        if np.any(self.p_values[off] < 0) or np.any(self.p_values[off] > 1):
            raise ValidationError("p-values must lie in [0,1]")


@dataclass(frozen=True)
class ForecastPath:
    """Iterated point forecasts with forecast-error standard deviations.

    std_err[0] equals the square roots of residual_cov's diagonal; later
    steps accumulate moving-average terms, so they never decrease.
    """

    labels: tuple[str, ...]
    horizon: int
    point: np.ndarray
    std_err: np.ndarray
    stable: bool

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.point.shape != (self.horizon, k) or self.std_err.shape != (
            self.horizon,
            k,
        ):
            raise ValidationError("forecast arrays must be horizon x k")
        if np.any(self.std_err < 0):
            raise ValidationError("standard errors must be nonnegative")
        if np.any(np.diff(self.std_err, axis=0) < -1e-9 * self.std_err[:-1]):
            raise ValidationError("standard errors must be nondecreasing in horizon")


@dataclass(frozen=True)
class IrfResult:
    """Orthogonalized impulse responses under a Cholesky ordering.

    responses[s][i, j] is variable i's reaction, s months after a one-sd
    orthogonal shock to variable j; labels and entries follow the
    requested ordering. Bands are symmetric bootstrap percentile
    intervals and contain the point response by construction.
    """

    labels: tuple[str, ...]
    ordering: tuple[int, ...]
    horizon: int
    responses: np.ndarray
    lower: np.ndarray | None
    upper: np.ndarray | None
    n_boot: int
    seed: int

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.responses.shape != (self.horizon + 1, k, k):
            raise ValidationError("responses must be (horizon+1) x k x k")
        if (self.lower is None) != (self.upper is None):
            raise ValidationError("bands must be provided together")
        if self.lower is not None:
            inside = (self.lower <= self.responses + 1e-12) & (
                self.responses - 1e-12 <= self.upper
            )
            if not np.all(inside):
                raise ValidationError("bands must contain the point responses")


@dataclass(frozen=True)
class FevdResult:
    """Forecast-error variance shares. shares[s-1][i, j] is the fraction
    of variable i's s-step forecast-error variance owed to shock j."""

    labels: tuple[str, ...]
    ordering: tuple[int, ...]
    horizon: int
    shares: np.ndarray

    def __post_init__(self) -> None:
        k = len(self.labels)
        if self.shares.shape != (self.horizon, k, k):
            raise ValidationError("shares must be horizon x k x k")
        if np.any(self.shares < -1e-12) or np.any(self.shares > 1 + 1e-12):
            raise ValidationError("shares must lie in [0,1]")
        sums = self.shares.sum(axis=2)
        if np.any(np.abs(sums - 1.0) > 1e-10):
            raise ValidationError("each share vector must sum to 1")


def _design(values: np.ndarray, p: int):
    """Stacked regression for VAR(p): Y rows t = p..n-1, X columns
    [1, y_{t-1} (all series), ..., y_{t-p} (all series)]."""
    n, k = values.shape
    rows = n - p
    cols = [np.ones(rows)]
    for lag in range(1, p + 1):
        cols.append(values[p - lag : n - lag])
    return values[p:], np.column_stack(cols)


def _column_name(index: int, labels, p: int) -> str:
    if index == 0:
        return "intercept"
    lag = (index - 1) // len(labels) + 1
    return f"{labels[(index - 1) % len(labels)]} lag {lag}"


def _check_full_rank(design: np.ndarray, labels, p: int) -> None:
    _, r, pivots = qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(design.shape) * np.finfo(np.float64).eps
    rank = int(np.sum(diag > tol))
    if rank < design.shape[1]:
        offending = sorted(int(i) for i in pivots[rank:])
        names = ", ".join(_column_name(i, labels, p) for i in offending)
        raise SingularDesignError(f"collinear regressors: {names}")


def _companion_spectral_radius(coeff: np.ndarray) -> float:
    p, k, _ = coeff.shape
    if p == 0:
        return 0.0
    companion = np.zeros((k * p, k * p))
    companion[:k] = np.hstack([coeff[l] for l in range(p)])
    if p > 1:
        companion[k:, :-k] = np.eye(k * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(companion))))


def select_lag(panel: Panel, p_max: int, criterion: str = "BIC") -> int:
    """Pick the VAR order in 1..p_max by information criterion.

    All candidate orders are scored on the common sample that excludes
    the first p_max observations, so their criteria are comparable; ties
    go to the smallest order.

    Raises:
        ValidationError: bad p_max or criterion.
        InsufficientDataError: panel shorter than k*p_max + 2.
    """
    crit_name = criterion.upper()
    if crit_name not in _CRITERIA:
        raise ValidationError(f"criterion must be one of {_CRITERIA}, got {criterion!r}")
    if p_max < 1:
        raise ValidationError(f"p_max must be >= 1, got {p_max}")
    values = panel.values
    n, k = values.shape
    # the common sample must identify the widest candidate design
    if n - p_max <= k * p_max + 1:
        raise InsufficientDataError(
            f"lag selection up to {p_max} needs n > {k * p_max + 1 + p_max}, got {n}"
        )
    t_common = n - p_max
    scores = []
    for p in range(1, p_max + 1):
        # lag columns are built relative to the common target rows
        cols = [np.ones(t_common)]
        for lag in range(1, p + 1):
            cols.append(values[p_max - lag : n - lag])
        design = np.column_stack(cols)
        target = values[p_max:]
        beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
        resid = target - design @ beta
        sigma_mle = resid.T @ resid / t_common
        sign, logdet = np.linalg.slogdet(sigma_mle)
        if sign <= 0:
            scores.append(math.inf)
            continue
        m_params = k * (k * p + 1)
        penalty = 2.0 if crit_name == "AIC" else math.log(t_common)
        scores.append(logdet + penalty * m_params / t_common)
    return int(np.argmin(scores)) + 1


def fit_var(panel: Panel, p: int) -> VarFit:
    """Equation-by-equation OLS VAR(p) with intercept.

    p=0 fits the mean-only model (intercept = sample means exactly).

    Raises:
        ValidationError: negative p.
        InsufficientDataError: n <= k*p + 1.
        SingularDesignError: collinear regressors, named by series and lag.
    """
    if p < 0:
        raise ValidationError(f"lag order must be >= 0, got {p}")
    values = panel.values
    n, k = values.shape
    m = k * p + 1
    # the covariance denominator (n - p) - m needs at least one degree
    # of freedom, which is slightly stronger than invertibility alone
    if n - p <= m:
        raise InsufficientDataError(
            f"VAR({p}) on {k} series needs n > {m + p}, got {n}"
        )
    target, design = _design(values, p)
    _check_full_rank(design, panel.labels, p)
    xtx_inv = np.linalg.inv(design.T @ design)
    beta = xtx_inv @ (design.T @ target)
    resid = target - design @ beta
    rows = target.shape[0]
    dof = rows - m
    residual_cov = resid.T @ resid / dof
    se_scale = np.sqrt(np.diag(xtx_inv))
    sigma_eq = np.sqrt(np.diag(residual_cov))
    se = np.outer(se_scale, sigma_eq)
    t_all = beta / se
    sst = np.sum((target - target.mean(axis=0)) ** 2, axis=0)
    ssr = np.sum(resid**2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        r_square = np.where(sst > 0, 1.0 - ssr / sst, 0.0)
    adj = 1.0 - (1.0 - r_square) * (rows - 1) / dof
    coeff = beta[1:].reshape(p, k, k).transpose(0, 2, 1) if p > 0 else np.zeros((0, k, k))
    t_coeff = t_all[1:].reshape(p, k, k).transpose(0, 2, 1) if p > 0 else np.zeros((0, k, k))
    stable = _companion_spectral_radius(coeff) < 1.0
    for arr in (beta, resid, residual_cov, coeff, t_coeff):
        arr.flags.writeable = False
    return VarFit(
        labels=tuple(panel.labels),
        p=p,
        intercept=beta[0],
        coeff=coeff,
        intercept_t=t_all[0],
        t_stats=t_coeff,
        residual_cov=residual_cov,
        residuals=resid,
        r_square=r_square,
        adj_r_square=adj,
        stable=stable,
        n_eff=rows,
        panel=panel,
    )


def granger_causality(fit: VarFit) -> GrangerResult:
    """F-tests of lag exclusion for every ordered series pair.

    For the pair (j -> i), all p lags of series j are dropped from
    series i's equation and the restricted/unrestricted SSRs form an
    F(p, n_eff - k*p - 1) statistic.

    Raises:
        ValidationError: fit has no lags (p = 0).
    """
    if fit.p == 0:
        raise ValidationError("Granger tests need at least one lag")
    values = fit.panel.values
    k = fit.width
    p = fit.p
    target, design = _design(values, p)
    rows = target.shape[0]
    dof = rows - (k * p + 1)
    beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
    ssr_full = np.sum((target - design @ beta) ** 2, axis=0)
    f_stats = np.full((k, k), np.nan)
    p_values = np.full((k, k), np.nan)
    for j in range(k):
        drop = [1 + lag * k + j for lag in range(p)]
        keep = [c for c in range(design.shape[1]) if c not in drop]
        sub = design[:, keep]
        beta_r, _, _, _ = np.linalg.lstsq(sub, target, rcond=None)
        ssr_restricted = np.sum((target - sub @ beta_r) ** 2, axis=0)
        for i in range(k):
            if i == j:
                continue
            f_val = ((ssr_restricted[i] - ssr_full[i]) / p) / (ssr_full[i] / dof)
            f_stats[i, j] = max(f_val, 0.0)
            p_values[i, j] = float(f_dist.sf(f_stats[i, j], p, dof))
    for arr in (f_stats, p_values):
        arr.flags.writeable = False
    return GrangerResult(
        labels=fit.labels,
        lag_order=p,
        dof_denominator=dof,
        f_stats=f_stats,
        p_values=p_values,
    )


def _ma_coefficients(coeff: np.ndarray, count: int) -> np.ndarray:
    """Psi_0..Psi_{count-1} from the VAR recursion (Psi_0 = I)."""
    p, k, _ = coeff.shape
    psis = np.zeros((count, k, k))
    psis[0] = np.eye(k)
    for s in range(1, count):
        acc = np.zeros((k, k))
        for lag in range(1, min(s, p) + 1):
            acc += coeff[lag - 1] @ psis[s - lag]
        psis[s] = acc
    return psis


def forecast(fit: VarFit, h: int, history: Panel | None = None) -> ForecastPath:
    """Iterate the fitted VAR h steps past the end of `history` (the
    fitting panel when omitted).

    Raises:
        ValidationError: h < 1.
        AlignmentError: history labels differ from the fit's.
        InsufficientDataError: history shorter than p observations.
    """
    if h < 1:
        raise ValidationError(f"horizon must be >= 1, got {h}")
    source = fit.panel if history is None else history
    if tuple(source.labels) != tuple(fit.labels):
        raise AlignmentError(
            f"history labels {source.labels} do not match fit labels {fit.labels}"
        )
    values = source.values
    if values.shape[0] < fit.p:
        raise InsufficientDataError(
            f"history must supply at least {fit.p} observations"
        )
    if not fit.stable:
        warnings.warn(
            "forecasting from an unstable VAR: point forecasts may diverge",
            RuntimeWarning,
            stacklevel=2,
        )
    k = fit.width
    buffer = [values[i] for i in range(-fit.p, 0)] if fit.p else []
    point = np.empty((h, k))
    for step in range(h):
        nxt = fit.intercept.copy()
        for lag in range(1, fit.p + 1):
            nxt += fit.coeff[lag - 1] @ buffer[-lag]
        point[step] = nxt
        buffer.append(nxt)
    psis = _ma_coefficients(fit.coeff, h)
    mse = np.zeros((k, k))
    std_err = np.empty((h, k))
    for s in range(h):
        mse = mse + psis[s] @ fit.residual_cov @ psis[s].T
        std_err[s] = np.sqrt(np.diag(mse))
    for arr in (point, std_err):
        arr.flags.writeable = False
    return ForecastPath(
        labels=fit.labels, horizon=h, point=point, std_err=std_err, stable=fit.stable
    )


def _validate_ordering(ordering, k: int) -> tuple[int, ...]:
    if ordering is None:
        return tuple(range(k))
    perm = tuple(int(i) for i in ordering)
    if sorted(perm) != list(range(k)):
        raise ValidationError(
            f"ordering must be a permutation of 0..{k - 1}, got {ordering}"
        )
    return perm


def _orthogonal_responses(coeff, sigma, perm, h):
    """Theta_0..Theta_h in the permuted coordinate system."""
    idx = np.array(perm)
    sigma_p = sigma[np.ix_(idx, idx)]
    try:
        chol = np.linalg.cholesky(sigma_p)
    except np.linalg.LinAlgError:
        raise DecompositionError(
            "residual covariance is not positive definite under this ordering"
        ) from None
    psis = _ma_coefficients(coeff, h + 1)
    psis_p = psis[:, idx][:, :, idx]
    return psis_p @ chol


def irf(
    fit: VarFit,
    h: int,
    ordering=None,
    n_boot: int = 1000,
    seed: int = 0,
    coverage: float = 0.95,
) -> IrfResult:
    """Orthogonalized impulse responses out to horizon h, with seeded
    residual-bootstrap bands (n_boot=0 skips the bands).

    Raises:
        ValidationError: h < 0, bad ordering, or coverage outside (0,1).
        DecompositionError: residual covariance not positive definite.
    """
    if h < 0:
        raise ValidationError(f"horizon must be >= 0, got {h}")
    if not 0.0 < coverage < 1.0:
        raise ValidationError(f"coverage must lie in (0,1), got {coverage}")
    if n_boot < 0:
        raise ValidationError(f"n_boot must be >= 0, got {n_boot}")
    k = fit.width
    perm = _validate_ordering(ordering, k)
    point = _orthogonal_responses(fit.coeff, fit.residual_cov, perm, h)
    lower = upper = None
    if n_boot > 0:
        values = np.array(fit.panel.values)
        p = fit.p
        n = values.shape[0]
        rows = fit.n_eff
        m = k * p + 1
        deviations = np.empty((n_boot, h + 1, k, k))
        children = np.random.SeedSequence(seed).spawn(n_boot)
        for r, child in enumerate(children):
            rng = np.random.default_rng(child)
            draws = fit.residuals[rng.integers(0, rows, size=rows)]
            y_star = np.empty_like(values)
            y_star[:p] = values[:p]
            for t in range(p, n):
                acc = fit.intercept + draws[t - p]
                for lag in range(1, p + 1):
                    acc = acc + fit.coeff[lag - 1] @ y_star[t - lag]
                y_star[t] = acc
            target, design = _design(y_star, p)
            beta, _, _, _ = np.linalg.lstsq(design, target, rcond=None)
            resid = target - design @ beta
            sigma = resid.T @ resid / (rows - m)
            coeff = (
                beta[1:].reshape(p, k, k).transpose(0, 2, 1)
                if p > 0
                else np.zeros((0, k, k))
            )
            deviations[r] = np.abs(
                _orthogonal_responses(coeff, sigma, perm, h) - point
            )
        band = np.quantile(deviations, coverage, axis=0)
        lower = point - band
        upper = point + band
        for arr in (lower, upper):
            arr.flags.writeable = False
    point.flags.writeable = False
    return IrfResult(
        labels=tuple(fit.labels[i] for i in perm),
        ordering=perm,
        horizon=h,
        responses=point,
        lower=lower,
        upper=upper,
        n_boot=n_boot,
        seed=seed,
    )


def fevd(fit: VarFit, h: int, ordering=None) -> FevdResult:
    """Forecast-error variance decomposition for horizons 1..h.

    Raises:
        ValidationError: h < 1 or bad ordering.
        DecompositionError: residual covariance not positive definite.
    """
    if h < 1:
        raise ValidationError(f"horizon must be >= 1, got {h}")
    k = fit.width
    perm = _validate_ordering(ordering, k)
    thetas = _orthogonal_responses(fit.coeff, fit.residual_cov, perm, h - 1)
    squared = np.cumsum(thetas**2, axis=0)
    shares = np.empty((h, k, k))
    for s in range(h):
        totals = squared[s].sum(axis=1, keepdims=True)
        shares[s] = squared[s] / totals
    shares.flags.writeable = False
    return FevdResult(
        labels=tuple(fit.labels[i] for i in perm),
        ordering=perm,
        horizon=h,
        shares=shares,
    )
