"""Loss fractiles (Value-at-Risk) and conditional average losses (expected
shortfall) under the three fitted loss models: normal mixture, generalized
Pareto tail, and GARCH(1,1).

All quantities are on the loss scale: losses are negated returns, so a
reported fractile is a positive magnitude in percent per month when the
tail is on the downside. Models passed to `loss_fractile` and
`average_loss` must have been fitted on a loss series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .distfit import (
    GarchFit,
    GpdFit,
    MixtureFit,
    fit_garch11,
    fit_gpd_pot,
    fit_mixture_em,
    mixture_cdf,
)
from .errors import (
    InfiniteMeanError,
    OutOfTailError,
    RetlabError,
    ValidationError,
)
from .factors import residual_panel
from .series import Panel, ReturnSeries

MODELS = ("EM", "GPD", "GARCH")

_BISECT_TOL = 1e-10
_GARCH_CONDITIONINGS = ("one-step", "unconditional")


@dataclass(frozen=True)
class LossQuery:
    """One risk question: which fractile, on which return basis."""

    fractile: float
    basis: str = "raw-returns"

    def __post_init__(self) -> None:
        if not 0.5 < self.fractile < 1.0:
            raise ValidationError(
                f"fractile must lie in (0.5, 1), got {self.fractile}"
            )
        if self.basis not in ("raw-returns", "residuals"):
            raise ValidationError(f"unknown basis {self.basis!r}")


@dataclass(frozen=True)
class RiskConfig:
    """Settings for `risk_report`.

    garch_conditioning picks the variance behind GARCH quantiles:
    "one-step" uses the forecast variance at sample end, "unconditional"
    the stationary variance. A panel is required for the residual basis;
    the first n_factors principal components are swept out of it.
    """

    fractiles: tuple[float, ...] = (0.95, 0.99, 0.999)
    garch_conditioning: str = "one-step"
    mixture_k_max: int = 3
    gpd_threshold_quantile: float = 0.90
    n_factors: int = 3
    panel: Panel | None = None

    def __post_init__(self) -> None:
        if len(self.fractiles) == 0:
            raise ValidationError("at least one fractile is required")
        if self.garch_conditioning not in _GARCH_CONDITIONINGS:
            raise ValidationError(
                f"garch_conditioning must be one of {_GARCH_CONDITIONINGS}, "
                f"got {self.garch_conditioning!r}"
            )


@dataclass(frozen=True)
class RiskCell:
    """One (model, fractile) entry of a risk report. `error` carries the
    failure message when either quantity could not be computed."""

    model: str
    fractile: float
    loss: float | None
    average_loss: float | None
    error: str | None = None

    def __post_init__(self) -> None:
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r}")
        if self.loss is not None and self.average_loss is not None:
            if self.average_loss < self.loss - 1e-9:
                raise ValidationError(
                    f"average loss {self.average_loss} below fractile "
                    f"{self.loss} for {self.model} at {self.fractile}"
                )


@dataclass(frozen=True)
class RiskReport:
    """Loss fractiles and average losses per model per fractile.

    Cells cover the full model-by-fractile grid; fitter failures are
    recorded in fit_errors and in every affected cell rather than
    aborting the report.
    """

    label: str
    basis: str
    fractiles: tuple[float, ...]
    cells: tuple[RiskCell, ...]
    mixture: MixtureFit | None
    gpd: GpdFit | None
    garch: GarchFit | None
    fit_errors: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.cells) != len(MODELS) * len(self.fractiles):
            raise ValidationError("cells must cover every model and fractile")
        for model in MODELS:
            losses = [c.loss for c in self.cells
                      if c.model == model and c.loss is not None]
            if any(b < a - 1e-9 for a, b in zip(losses, losses[1:])):
                raise ValidationError(
                    f"{model} losses must be nondecreasing in the fractile"
                )

    def cell(self, model: str, fractile: float) -> RiskCell:
        for c in self.cells:
            if c.model == model and c.fractile == fractile:
                return c
        raise KeyError(f"no cell for {model!r} at {fractile}")


def _mixture_fractile(fit: MixtureFit, p: float) -> float:
    lo = float(np.min(fit.means - 40.0 * fit.sds))
    hi = float(np.max(fit.means + 40.0 * fit.sds))
    # bisection: mixture CDF is continuous and strictly increasing
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if float(mixture_cdf(fit, mid)[0]) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _mixture_average_loss(fit: MixtureFit, p: float) -> float:
    v = _mixture_fractile(fit, p)
    z = (v - fit.means) / fit.sds
    upper = norm.sf(z)
    # E[X 1{X>v}] per component, then normalize by the actual tail mass
    partial = float(np.sum(fit.weights * (fit.means * upper + fit.sds * norm.pdf(z))))
    tail = float(np.sum(fit.weights * upper))
    return partial / tail


def _gpd_fractile(fit: GpdFit, p: float) -> float:
    rate = fit.exceedance_rate
    if p <= 1.0 - rate:
        raise OutOfTailError(
            f"fractile {p} lies at or below the threshold's coverage "
            f"{1.0 - rate:.4f}; raise the fractile or lower the threshold"
        )
    t = math.log((1.0 - p) / rate)
    xi, beta = fit.shape_xi, fit.scale_beta
    if abs(xi) < 1e-12:
        return fit.threshold_u - beta * t
    return fit.threshold_u + beta / xi * math.expm1(-xi * t)


def _gpd_average_loss(fit: GpdFit, p: float) -> float:
    if fit.shape_xi >= 1.0:
        raise InfiniteMeanError(
            f"tail index {fit.shape_xi:.3f} >= 1: the average loss diverges"
        )
    v = _gpd_fractile(fit, p)
    xi, beta, u = fit.shape_xi, fit.scale_beta, fit.threshold_u
    return v / (1.0 - xi) + (beta - xi * u) / (1.0 - xi)


def _garch_sigma(fit: GarchFit, conditioning: str) -> float:
    if conditioning == "one-step":
        return math.sqrt(fit.one_step_variance)
    return math.sqrt(fit.unconditional_variance)


def loss_fractile(
    model: MixtureFit | GpdFit | GarchFit,
    p: float,
    *,
    garch_conditioning: str = "one-step",
) -> float:
    """Loss magnitude met or exceeded with probability 1-p, in %/month.

    Raises:
        ValidationError: p outside (0.5, 1) or unsupported model type.
        OutOfTailError: GPD query at or below the threshold's coverage.
    """
    if not 0.5 < p < 1.0:
        raise ValidationError(f"fractile must lie in (0.5, 1), got {p}")
    if isinstance(model, MixtureFit):
        return _mixture_fractile(model, p)
    if isinstance(model, GpdFit):
        return _gpd_fractile(model, p)
    if isinstance(model, GarchFit):
        if garch_conditioning not in _GARCH_CONDITIONINGS:
            raise ValidationError(
                f"garch_conditioning must be one of {_GARCH_CONDITIONINGS}"
            )
        return model.mu + _garch_sigma(model, garch_conditioning) * norm.ppf(p)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def average_loss(
    model: MixtureFit | GpdFit | GarchFit,
    p: float,
    *,
    garch_conditioning: str = "one-step",
) -> float:
    """Expected loss given that the p-fractile loss is breached, %/month.

    Raises:
        ValidationError: p outside (0.5, 1) or unsupported model type.
        OutOfTailError: GPD query at or below the threshold's coverage.
        InfiniteMeanError: GPD tail index >= 1.
    """
    if not 0.5 < p < 1.0:
        raise ValidationError(f"fractile must lie in (0.5, 1), got {p}")
    if isinstance(model, MixtureFit):
        return _mixture_average_loss(model, p)
    if isinstance(model, GpdFit):
        return _gpd_average_loss(model, p)
    if isinstance(model, GarchFit):
        if garch_conditioning not in _GARCH_CONDITIONINGS:
            raise ValidationError(
                f"garch_conditioning must be one of {_GARCH_CONDITIONINGS}"
            )
        sigma = _garch_sigma(model, garch_conditioning)
        z = norm.ppf(p)
        return model.mu + sigma * norm.pdf(z) / (1.0 - p)
    raise ValidationError(f"unsupported model type {type(model).__name__}")


def _fit_all(losses: ReturnSeries, config: RiskConfig):
    fits: dict = {"EM": None, "GPD": None, "GARCH": None}
    errors: dict = {}
    try:
        fits["EM"] = fit_mixture_em(losses, k_max=config.mixture_k_max)
    except RetlabError as exc:
        errors["EM"] = str(exc)
    try:
        fits["GPD"] = fit_gpd_pot(
            losses, threshold_quantile=config.gpd_threshold_quantile
        )
    except RetlabError as exc:
        errors["GPD"] = str(exc)
    try:
        fits["GARCH"] = fit_garch11(losses)
    except RetlabError as exc:
        errors["GARCH"] = str(exc)
    return fits, errors


def risk_report(
    s: ReturnSeries,
    basis: str = "raw-returns",
    config: RiskConfig | None = None,
) -> RiskReport:
    """Fit all three loss models to a series and tabulate loss fractiles
    and average losses at every configured fractile.

    The series is negated internally (losses). With basis "residuals" the
    series' principal-component residual from config.panel is used instead
    of the series itself.

    Raises:
        ValidationError: residual basis without a panel, or the label is
            missing from the panel.
    """
    if config is None:
        config = RiskConfig()
    queries = tuple(LossQuery(f, basis) for f in config.fractiles)
    work = s
    if basis == "residuals":
        if config.panel is None:
            raise ValidationError("residual basis requires a panel in the config")
        resid = residual_panel(config.panel, config.n_factors)
        try:
            work = resid.select(s.label)
        except KeyError:
            raise ValidationError(
                f"series {s.label!r} is not in the configured panel"
            ) from None
    losses = ReturnSeries(work.label, work.grid, -work.values)
    fits, fit_errors = _fit_all(losses, config)
    cells = []
    for model in MODELS:
        fit = fits[model]
        for query in queries:
            p = query.fractile
            if fit is None:
                cells.append(RiskCell(model, p, None, None, fit_errors[model]))
                continue
            loss_val = None
            avg_val = None
            err = None
            try:
                loss_val = loss_fractile(
                    fit, p, garch_conditioning=config.garch_conditioning
                )
                avg_val = average_loss(
                    fit, p, garch_conditioning=config.garch_conditioning
                )
            except RetlabError as exc:
                err = str(exc)
            cells.append(RiskCell(model, p, loss_val, avg_val, err))
    return RiskReport(
        label=s.label,
        basis=basis,
        fractiles=tuple(config.fractiles),
        cells=tuple(cells),
        mixture=fits["EM"],
        gpd=fits["GPD"],
        garch=fits["GARCH"],
        fit_errors=fit_errors,
    )
