"""Stage orchestration: run analysis stages and emit artifacts.

Every command writes into the configured output directory:

* aligned text tables plus a full-precision CSV twin per table,
* tidy CSV plot data (``fig_*.csv``, one row per point),
* ``summary.json``: the run manifest (per-stage status, warnings,
  artifact list) and every fitted parameter and seed.

Exit status is 0 iff no stage recorded an error; warnings never change
the status but appear in the manifest.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..descstats import correlogram, cross_sectional_summary, describe
from ..distfit import mixture_pdf
from ..errors import RetlabError, ValidationError
from ..factors import factor_regression, pca, scree
from ..risk import RiskConfig, risk_report
from ..series import (
    ConstituentRecord,
    Month,
    Panel,
    ReturnSeries,
    TimeGrid,
    align,
    build_value_weighted_index,
    cumulate_log_price,
)
from ..synth import generate
from ..varmodel import (
    fevd,
    fit_var,
    forecast,
    granger_causality,
    irf,
    select_lag,
    unit_root_tests,
)
from .config import RunConfig
from .io import ingest, write_csv, write_panel
from .tables import write_table

COMMANDS = ("describe", "pca", "risk", "predict", "unitroot", "synth", "report")
_ANALYSIS_STAGES = ("describe", "pca", "unitroot", "risk", "predict")


@dataclass
class StageOutcome:
    """Manifest entry for one stage."""

    name: str
    status: str = "ok"
    error: str | None = None
    warnings: list[str] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)


@dataclass
class Workspace:
    """Resolved inputs shared by the analysis stages.

    `registry` holds every available series on its full span; `panel` is
    the configured grouping aligned to its common months. The market
    series, when configured, is kept out of `panel` unless listed there
    explicitly.
    """

    registry: dict[str, ReturnSeries]
    panel: Panel
    market: ReturnSeries | None
    records: list[ConstituentRecord] | None


def _load_workspace(config: RunConfig) -> Workspace:
    if config.returns_path is None:
        raise ValidationError("config has no [inputs] returns file")
    ingested = ingest(config.returns_path, config.layout)
    registry: dict[str, ReturnSeries] = {s.label: s for s in ingested.series}

    records = None
    if config.constituents_path is not None:
        records = ingest(config.constituents_path, "constituents")
        label = config.constituents_label
        if label in registry:
            raise ValidationError(
                f"constituents label {label!r} collides with an input series"
            )
        registry[label] = build_value_weighted_index(records, label)

    market = None
    if config.market is not None:
        if config.market not in registry:
            raise ValidationError(f"market series {config.market!r} not found")
        market = registry[config.market]

    members = config.panel_members
    if members is None:
        members = tuple(l for l in registry if l != config.market)
    missing = [l for l in members if l not in registry]
    if missing:
        raise ValidationError(f"panel members not found: {missing}")
    if not members:
        raise ValidationError("panel grouping is empty")
    panel = align([registry[l] for l in members])
    if config.n_factors > panel.width:
        raise ValidationError(
            f"factor count {config.n_factors} exceeds panel width {panel.width}"
        )
    return Workspace(registry=registry, panel=panel, market=market, records=records)


def _targets(ws: Workspace) -> list[ReturnSeries]:
    """Panel members (full span) followed by the market when distinct."""
    out = [ws.registry[label] for label in ws.panel.labels]
    if ws.market is not None and ws.market.label not in ws.panel.labels:
        out.append(ws.market)
    return out


def _asset_series(records: list[ConstituentRecord]) -> list[ReturnSeries]:
    """Per-asset return series, split into contiguous runs."""
    by_asset: dict[str, list[ConstituentRecord]] = {}
    for rec in records:
        by_asset.setdefault(rec.asset_id, []).append(rec)
    out = []
    for asset_id, recs in by_asset.items():
        recs.sort(key=lambda r: r.month.ordinal)
        run_start = 0
        for i in range(1, len(recs) + 1):
            if i == len(recs) or recs[i].month - recs[i - 1].month != 1:
                chunk = recs[run_start:i]
                grid = TimeGrid(chunk[0].month, len(chunk))
                out.append(
                    ReturnSeries(asset_id, grid, [r.return_pct for r in chunk])
                )
                run_start = i
    return out


# ---------------------------------------------------------------- stages


def _stage_describe(ws: Workspace, config: RunConfig, out_dir: Path):
    artifacts: list[str] = []
    params: dict = {"moments": {}}
    errors: list[str] = []

    header = [
        "series", "mean", "sd", "skewness", "excess_kurtosis",
        "jarque_bera", "autocorr1", "n",
    ]
    rows = []
    for s in _targets(ws):
        try:
            st = describe(s)
        except RetlabError as exc:
            errors.append(f"{s.label}: {exc}")
            continue
        rows.append([s.label, st.mean, st.sd, st.skewness, st.excess_kurtosis,
                     st.jarque_bera, st.autocorr1, st.n])
        params["moments"][s.label] = {
            "mean": st.mean, "sd": st.sd, "skewness": st.skewness,
            "excess_kurtosis": st.excess_kurtosis, "jarque_bera": st.jarque_bera,
            "autocorr1": st.autocorr1, "n": st.n,
        }
    artifacts += write_table(
        out_dir, "describe", "Summary statistics (percent per month)", header, rows
    )

    if ws.records is not None:
        if ws.market is None:
            warnings.warn(
                "cross-section table skipped: no market series configured",
                RuntimeWarning,
            )
        else:
            cs_rows = [
                [r.year, r.n_assets, r.mean_of_means, r.mean_of_sds,
                 r.mean_beta, r.sd_beta]
                for r in cross_sectional_summary(_asset_series(ws.records), ws.market)
            ]
            artifacts += write_table(
                out_dir, "cross_section",
                "Annual cross-section of constituents",
                ["year", "n_assets", "mean_of_means", "mean_of_sds",
                 "mean_beta", "sd_beta"],
                cs_rows,
            )

    fig_returns = []
    fig_prices = []
    fig_correlogram = []
    for s in _targets(ws):
        for month, value in zip(s.grid, s.values):
            fig_returns.append([str(month), s.label, value])
        prices = cumulate_log_price(s)
        for month, value in zip(prices.grid, prices.values):
            fig_prices.append([str(month), s.label, value])
        for entry in correlogram(s, s, config.correlogram_lags):
            fig_correlogram.append(
                ["auto", s.label, entry.lag, entry.value, entry.band]
            )
        if ws.market is not None and s.label != ws.market.label:
            common = s.grid.intersect(ws.market.grid)
            if common is not None and common.length > config.correlogram_lags + 3:
                pair = (s.restrict(common), ws.market.restrict(common))
                for entry in correlogram(*pair, config.correlogram_lags):
                    fig_correlogram.append(
                        ["cross-vs-market", s.label, entry.lag, entry.value, entry.band]
                    )
    write_csv(out_dir / "fig_returns.csv", ["month", "series", "value"], fig_returns)
    write_csv(out_dir / "fig_log_prices.csv", ["month", "series", "log_price"], fig_prices)
    write_csv(
        out_dir / "fig_correlogram.csv",
        ["kind", "series", "lag", "value", "band"],
        fig_correlogram,
    )
    artifacts += ["fig_returns.csv", "fig_log_prices.csv", "fig_correlogram.csv"]
    return artifacts, params, errors


def _stage_pca(ws: Workspace, config: RunConfig, out_dir: Path):
    artifacts: list[str] = []
    result = pca(ws.panel)
    k = ws.panel.width

    header = ["series"] + [f"PC{j + 1}" for j in range(k)]
    rows = [
        [label] + list(result.loadings[i]) for i, label in enumerate(result.labels)
    ]
    artifacts += write_table(
        out_dir, "pca_loadings", "Principal-component loadings (unit norm)",
        header, rows,
    )

    scree_rows = [
        [r.component, r.eigenvalue, r.share_pct, r.cumulative_pct]
        for r in scree(result)
    ]
    scree_header = ["component", "eigenvalue", "share_pct", "cumulative_pct"]
    artifacts += write_table(
        out_dir, "scree", "Variance explained by component", scree_header, scree_rows
    )
    write_csv(out_dir / "fig_scree.csv", scree_header, scree_rows)
    artifacts.append("fig_scree.csv")

    reg_rows = []
    reg_params = {}
    for label in ws.panel.labels:
        reg = factor_regression(ws.panel.select(label), result.scores, config.n_factors)
        reg_rows.append([
            label, reg.k, reg.coefficients[0], reg.loadings_on_pc1,
            reg.loadings_on_pc2, reg.r_square, reg.adj_r_square,
        ])
        reg_params[label] = {
            "coefficients": reg.coefficients, "r_square": reg.r_square,
            "adj_r_square": reg.adj_r_square,
        }
    artifacts += write_table(
        out_dir, "factor_regressions",
        f"Regressions on the first {config.n_factors} component(s)",
        ["series", "k", "alpha", "beta_pc1", "beta_pc2", "r_square", "adj_r_square"],
        reg_rows,
    )
    params = {
        "eigenvalues": result.eigenvalues,
        "cumulative_share": result.cumulative_share,
        "loadings": result.loadings,
        "labels": list(result.labels),
        "rank_deficient": result.rank_deficient,
        "regressions": reg_params,
    }
    return artifacts, params, []


def _stage_unitroot(ws: Workspace, config: RunConfig, out_dir: Path):
    artifacts: list[str] = []
    params: dict = {}
    errors: list[str] = []
    rows = []
    for s in _targets(ws):
        for basis, subject in (("log-price", cumulate_log_price(s)), ("return", s)):
            try:
                rep = unit_root_tests(subject)
            except RetlabError as exc:
                errors.append(f"{s.label} ({basis}): {exc}")
                continue
            rows.append([
                s.label, basis, rep.adf_stat, rep.adf_p_value, rep.adf_lags,
                rep.pp_stat, rep.pp_p_value, rep.kpss_stat,
                rep.kpss_reject_5pct, rep.kpss_reject_1pct, rep.bandwidth,
            ])
            params[f"{s.label}/{basis}"] = {
                "adf_stat": rep.adf_stat, "adf_p_value": rep.adf_p_value,
                "adf_lags": rep.adf_lags, "pp_stat": rep.pp_stat,
                "pp_p_value": rep.pp_p_value, "kpss_stat": rep.kpss_stat,
                "bandwidth": rep.bandwidth,
            }
    artifacts += write_table(
        out_dir, "unitroot",
        "Unit-root and stationarity tests (constant, no trend)",
        ["series", "basis", "adf_stat", "adf_p", "adf_lags", "pp_stat", "pp_p",
         "kpss_stat", "kpss_reject_5pct", "kpss_reject_1pct", "bandwidth"],
        rows,
    )
    return artifacts, params, errors


def _risk_params(report) -> dict:
    out: dict = {"fit_errors": dict(report.fit_errors)}
    if report.mixture is not None:
        m = report.mixture
        out["mixture"] = {
            "k": m.k, "weights": m.weights, "means": m.means, "sds": m.sds,
            "log_likelihood": m.log_likelihood, "bic": m.bic,
            "converged": m.converged,
        }
    if report.gpd is not None:
        g = report.gpd
        out["gpd"] = {
            "threshold_u": g.threshold_u, "shape_xi": g.shape_xi,
            "scale_beta": g.scale_beta, "n_exceedances": g.n_exceedances,
            "exceedance_rate": g.exceedance_rate,
            "infinite_mean": g.infinite_mean,
        }
    if report.garch is not None:
        h = report.garch
        out["garch"] = {
            "mu": h.mu, "omega": h.omega, "alpha": h.alpha, "beta": h.beta,
            "log_likelihood": h.log_likelihood,
            "one_step_variance": h.one_step_variance,
            "integrated_warning": h.integrated_warning,
        }
    return out


def _stage_risk(ws: Workspace, config: RunConfig, out_dir: Path):
    artifacts: list[str] = []
    params: dict = {}
    errors: list[str] = []
    risk_config = RiskConfig(
        fractiles=config.fractiles,
        garch_conditioning=config.garch_conditioning,
        mixture_k_max=config.mixture_k_max,
        gpd_threshold_quantile=config.gpd_threshold_quantile,
        n_factors=config.n_factors,
        panel=ws.panel,
    )
    jobs = [(s, "raw-returns") for s in _targets(ws)]
    if ws.panel.width > config.n_factors:
        jobs += [
            (ws.panel.select(label), "residuals") for label in ws.panel.labels
        ]

    rows = []
    vol_rows = []
    density_rows = []
    for s, basis in jobs:
        try:
            report = risk_report(s, basis=basis, config=risk_config)
        except RetlabError as exc:
            errors.append(f"{s.label} ({basis}): {exc}")
            continue
        params[f"{s.label}/{basis}"] = _risk_params(report)
        for cell in report.cells:
            rows.append([
                s.label, basis, cell.model, cell.fractile, cell.loss,
                cell.average_loss, cell.error or "",
            ])
        if basis != "raw-returns":
            continue
        if report.garch is not None:
            sds = np.sqrt(report.garch.conditional_variance_path)
            for month, sd in zip(s.grid, sds):
                vol_rows.append([str(month), s.label, sd])
        if report.mixture is not None:
            grid = np.linspace(s.values.min(), s.values.max(), 201)
            mix = mixture_pdf(report.mixture, -grid)  # fitted on losses
            mu, sd = s.values.mean(), s.values.std(ddof=1)
            normal = np.exp(-0.5 * ((grid - mu) / sd) ** 2) / (
                sd * np.sqrt(2 * np.pi)
            )
            for x, m_val, n_val in zip(grid, mix, normal):
                density_rows.append([s.label, x, m_val, n_val])

    artifacts += write_table(
        out_dir, "risk", "Loss fractiles and average losses by model",
        ["series", "basis", "model", "fractile", "loss", "average_loss", "note"],
        rows,
    )
    write_csv(
        out_dir / "fig_conditional_volatility.csv",
        ["month", "series", "sd"], vol_rows,
    )
    write_csv(
        out_dir / "fig_fitted_density.csv",
        ["series", "x", "mixture_pdf", "normal_pdf"], density_rows,
    )
    artifacts += ["fig_conditional_volatility.csv", "fig_fitted_density.csv"]
    return artifacts, params, errors


def _stage_predict(ws: Workspace, config: RunConfig, out_dir: Path):
    artifacts: list[str] = []
    panel = ws.panel
    if config.var_lag is not None:
        lag = config.var_lag
        policy = f"fixed({lag})"
    else:
        lag = select_lag(panel, config.var_max_lag, config.var_criterion)
        policy = f"{config.var_criterion}(max={config.var_max_lag})"
    fit = fit_var(panel, lag)

    coeff_rows = []
    for i, equation in enumerate(fit.labels):
        coeff_rows.append([equation, "intercept", fit.intercept[i], fit.intercept_t[i]])
        for l in range(lag):
            for j, regressor in enumerate(fit.labels):
                coeff_rows.append([
                    equation, f"{regressor} lag {l + 1}",
                    fit.coeff[l, i, j], fit.t_stats[l, i, j],
                ])
    artifacts += write_table(
        out_dir, "var_coefficients", f"VAR({lag}) coefficient estimates",
        ["equation", "regressor", "coefficient", "t_stat"], coeff_rows,
    )
    artifacts += write_table(
        out_dir, "var_summary", f"VAR({lag}) equation fit",
        ["equation", "r_square", "adj_r_square", "n_eff", "stable"],
        [[label, fit.r_square[i], fit.adj_r_square[i], fit.n_eff, fit.stable]
         for i, label in enumerate(fit.labels)],
    )
    artifacts += write_table(
        out_dir, "var_residual_cov", "VAR residual covariance",
        ["series"] + list(fit.labels),
        [[label] + list(fit.residual_cov[i]) for i, label in enumerate(fit.labels)],
    )

    params: dict = {
        "lag": lag, "policy": policy, "intercept": fit.intercept,
        "coefficients": fit.coeff, "residual_cov": fit.residual_cov,
        "stable": fit.stable, "n_eff": fit.n_eff,
    }

    if lag >= 1:
        granger = granger_causality(fit)
        g_rows = []
        k = len(fit.labels)
        for i in range(k):
            for j in range(k):
                if i == j:
                    continue
                g_rows.append([
                    fit.labels[j], fit.labels[i], lag,
                    granger.f_stats[i, j], granger.p_values[i, j],
                ])
        artifacts += write_table(
            out_dir, "granger", "Granger causality (cause -> effect)",
            ["cause", "effect", "lags", "f_stat", "p_value"], g_rows,
        )
        params["granger_dof_denominator"] = granger.dof_denominator

    path = forecast(fit, config.forecast_horizon)
    f_rows = []
    for step in range(path.horizon):
        month = panel.grid.end + (step + 1)
        for j, label in enumerate(path.labels):
            f_rows.append([str(month), label, path.point[step, j], path.std_err[step, j]])
    artifacts += write_table(
        out_dir, "forecast", f"{config.forecast_horizon}-month forecasts",
        ["month", "series", "point", "std_err"], f_rows,
    )

    impulse = irf(fit, config.irf_horizon, n_boot=config.n_boot, seed=config.seed)
    irf_rows = []
    for h in range(config.irf_horizon + 1):
        for i, response in enumerate(impulse.labels):
            for j, shock in enumerate(impulse.labels):
                row = [h, response, shock, impulse.responses[h, i, j]]
                if impulse.lower is not None:
                    row += [impulse.lower[h, i, j], impulse.upper[h, i, j]]
                else:
                    row += [None, None]
                irf_rows.append(row)
    write_csv(
        out_dir / "fig_irf.csv",
        ["horizon", "response", "shock", "value", "lower", "upper"], irf_rows,
    )
    artifacts.append("fig_irf.csv")
    params["irf"] = {"seed": config.seed, "n_boot": config.n_boot,
                     "ordering": list(impulse.ordering)}

    shares = fevd(fit, config.irf_horizon)
    fevd_rows = [
        [h, shares.labels[i], shares.labels[j], shares.shares[h, i, j]]
        for h in range(config.irf_horizon)
        for i in range(len(shares.labels))
        for j in range(len(shares.labels))
    ]
    write_csv(
        out_dir / "fig_fevd.csv",
        ["horizon", "series", "shock", "share"], fevd_rows,
    )
    artifacts.append("fig_fevd.csv")
    return artifacts, params, []


def _stage_synth(config: RunConfig, out_dir: Path):
    if not config.synth_specs:
        raise ValidationError("config has no [synth.<name>] sections")
    artifacts: list[str] = []
    params: dict = {}
    for name, spec in config.synth_specs:
        out = generate(spec)
        if isinstance(out, ReturnSeries):
            out = Panel((out,))
        file_name = f"synth_{name}.csv"
        write_panel(out_dir / file_name, out)
        artifacts.append(file_name)
        params[name] = {
            "kind": spec.kind, "n": spec.n, "seed": spec.seed,
            "parameters": dict(spec.parameters),
        }
    return artifacts, params, []


# ----------------------------------------------------------- orchestration


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return _jsonable(value.item())
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, Month):
        return str(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def _run_stage(outcome: StageOutcome, func, *args) -> dict:
    """Run one stage, capturing module errors and warnings."""
    params: dict = {}
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            artifacts, params, errors = func(*args)
            outcome.artifacts = artifacts
            if errors:
                outcome.status = "error"
                outcome.error = "; ".join(errors)
        except RetlabError as exc:
            outcome.status = "error"
            outcome.error = str(exc)
    outcome.warnings = [
        f"{w.category.__name__}: {w.message}" for w in caught
    ]
    return params


def run(command: str, config: RunConfig) -> int:
    """Execute one CLI command; returns the process exit status."""
    if command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}")
    out_dir = config.output_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    stage_names = _ANALYSIS_STAGES if command == "report" else (command,)
    outcomes: list[StageOutcome] = []
    parameters: dict = {}

    ws = None
    if command != "synth":
        ingest_outcome = StageOutcome(name="ingest")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                ws = _load_workspace(config)
            except RetlabError as exc:
                ingest_outcome.status = "error"
                ingest_outcome.error = str(exc)
        ingest_outcome.warnings = [
            f"{w.category.__name__}: {w.message}" for w in caught
        ]
        outcomes.append(ingest_outcome)

    stage_funcs = {
        "describe": _stage_describe,
        "pca": _stage_pca,
        "unitroot": _stage_unitroot,
        "risk": _stage_risk,
        "predict": _stage_predict,
    }
    for name in stage_names:
        outcome = StageOutcome(name=name)
        if name == "synth":
            parameters[name] = _run_stage(outcome, _stage_synth, config, out_dir)
        elif ws is None:
            outcome.status = "error"
            outcome.error = "skipped: input loading failed"
        else:
            parameters[name] = _run_stage(
                outcome, stage_funcs[name], ws, config, out_dir
            )
        outcomes.append(outcome)

    summary = {
        "command": command,
        "seed": config.seed,
        "seed_source": config.seed_source,
        "fractiles": list(config.fractiles),
        "panel": list(ws.panel.labels) if ws is not None else None,
        "market": config.market,
        "stages": [
            {
                "name": o.name, "status": o.status, "error": o.error,
                "warnings": o.warnings, "artifacts": o.artifacts,
            }
            for o in outcomes
        ],
        "parameters": _jsonable(parameters),
    }
    with open(out_dir / "summary.json", "w", encoding="utf-8", newline="\n") as handle:
        json.dump(summary, handle, indent=2, allow_nan=False)
        handle.write("\n")

    for outcome in outcomes:
        line = f"{outcome.name}: {outcome.status}"
        if outcome.error:
            line += f" ({outcome.error})"
        print(line)
    print(f"artifacts in {out_dir}")
    return 0 if all(o.status == "ok" for o in outcomes) else 1
