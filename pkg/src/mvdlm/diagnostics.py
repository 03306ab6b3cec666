"""Goodness-of-fit statistics, likelihood evaluation and model comparison.

The standardized one-step forecast errors drive the mean-of-squares
statistic (close to 1 per component under a well-specified model), the
sequential log Bayes factor compares two fitted models through the
predictive densities of their standardized errors, and the path
log-likelihood scores candidate discount configurations for grid search.
"""

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.stats
from scipy.special import multigammaln

from .distributions import MultiTParams, mvt_logpdf
from .errors import (
    DegreesTooSmall,
    EmptyData,
    EmptyGrid,
    FeatureUnavailable,
    InvalidWeights,
    LengthMismatch,
    LikelihoodUndefined,
    MvdlmError,
    NoPositiveEigenvalues,
)
from .filter import _whiten, run
from .linalg import cholesky_upper, inv_spd, logdet_spd, symmetrize
from .model import validate

EIGENVALUE_THRESHOLD = 1e-10
WEIGHT_TOL = 1e-10


@dataclass(frozen=True)
class DiagnosticsReport:
    """Summary statistics of a filtered trajectory.

    ``msse`` averages the squared standardized errors component-wise (only
    over steps where standardization is defined), ``mae`` and ``me`` average
    the absolute and raw forecast errors, and ``loglik`` holds the
    branch-appropriate path log-likelihood when requested.
    """

    msse: np.ndarray
    mae: np.ndarray
    me: np.ndarray
    loglik: float | None
    n_obs: int
    sqrt_convention: str = "spectral"


@dataclass(frozen=True)
class VaRConfig:
    """Portfolio weights, confidence percentage and quantile family.

    ``alpha`` is the confidence percentage (95 and 99 are the conventional
    choices); ``quantile_family`` is "t" for the model-implied standardized
    Student t (requires ``dof`` > 2) or "normal". Weights must be
    nonnegative and sum to 1.
    """

    weights: np.ndarray
    alpha: float
    quantile_family: str = "t"
    dof: float | None = None

    def __post_init__(self):
        object.__setattr__(
            self, "weights", np.atleast_1d(np.asarray(self.weights, dtype=float))
        )
        w = self.weights
        if np.any(w < -WEIGHT_TOL) or abs(float(np.sum(w)) - 1.0) > WEIGHT_TOL:
            raise InvalidWeights(
                "weights must be nonnegative and sum to 1 within 1e-10"
            )
        if not 0.0 < self.alpha < 100.0:
            raise InvalidWeights("alpha must be a percentage in (0, 100)")
        if self.quantile_family not in ("t", "normal"):
            raise InvalidWeights(
                f"unknown quantile family {self.quantile_family!r}"
            )


@dataclass(frozen=True)
class LbfSeries:
    """Per-step log Bayes factors of model 1 against model 2."""

    values: np.ndarray
    model_labels: tuple

    def __len__(self):
        return len(self.values)

    @property
    def cumulative(self):
        return float(np.sum(self.values))


def standardize(e, q, s_prev, vol_discounts=None, n=None, dof=None, method="spectral"):
    """Standardize a one-step forecast error.

    With volatility discounts supplied (all below 1) the predictive
    degrees of freedom are k = tr(beta)/p * n, defaulting n to the working
    value 1/(1 - tr(beta)/p), and the scale is beta^{1/2} S_prev beta^{1/2}.
    Without discounts (or with all discounts equal to 1) the caller passes
    the degrees of freedom explicitly and S_prev is used unscaled. Requires
    more than 2 degrees of freedom.
    """
    e = np.atleast_1d(np.asarray(e, dtype=float))
    s_prev = symmetrize(np.atleast_2d(s_prev))
    if vol_discounts is not None:
        beta = np.atleast_1d(np.asarray(vol_discounts, dtype=float))
        b = float(np.mean(beta))
        if b < 1.0:
            if n is None:
                n = 1.0 / (1.0 - b)
            k = b * n
            root = np.sqrt(beta)
            scale = symmetrize(s_prev * np.outer(root, root))
            return _whiten(e, float(q), scale, k, method)
    if dof is None:
        raise DegreesTooSmall(
            "explicit degrees of freedom are required when no discounting "
            "below 1 is in effect"
        )
    return _whiten(e, float(q), s_prev, float(dof), method)


def msse_mae_me(trajectory):
    """Component-wise MSSE, MAE and ME of a trajectory (log-likelihood unset).

    The MSSE averages over the steps where the standardized error exists;
    MAE and ME average the raw forecast errors over every step.
    """
    if len(trajectory) == 0:
        raise EmptyData("diagnostics need at least one filtered step")
    e = trajectory.errors
    u = trajectory.standardized
    defined = ~np.isnan(u[:, 0])
    if not np.any(defined):
        raise FeatureUnavailable(
            "no standardized errors: the forecast law never had more than 2 "
            "degrees of freedom"
        )
    msse = np.mean(u[defined] ** 2, axis=0)
    mae = np.mean(np.abs(e), axis=0)
    me = np.mean(e, axis=0)
    return DiagnosticsReport(
        msse=msse,
        mae=mae,
        me=me,
        loglik=None,
        n_obs=len(trajectory),
        sqrt_convention=trajectory.sqrt_convention,
    )


def _resolve_sigma_path(trajectory, sigma_path):
    n_steps = len(trajectory)
    if sigma_path is None or sigma_path == "posterior":
        return trajectory.posterior_mean_path(include_initial=True)
    if sigma_path == "forecast":
        p = trajectory.p
        dof0 = trajectory.initial_dof + 2 * p
        first = trajectory.priors.S0 / (dof0 - 2 * p - 2)
        path = [first]
        for step in trajectory.steps:
            path.append(step.sigma_prior.mean)
        return path
    path = [symmetrize(np.atleast_2d(s)) for s in sigma_path]
    if len(path) != n_steps + 1:
        raise LengthMismatch(
            f"sigma path must list {n_steps + 1} matrices (initial plus one "
            f"per step), got {len(path)}"
        )
    return path


def loglik_arrays(errors, q_values, sigma_path, vol_discounts):
    """Array-level core of the evolving-volatility path log-likelihood.

    ``sigma_path`` lists N+1 SPD matrices (the plug-in value at step 0
    followed by one per observation). For each step the positive
    eigenvalues of
    I - (C_{t-1}')^{-1} beta^{1/2} Sigma_t^{-1} beta^{1/2} C_{t-1}^{-1}
    enter through their log-determinant, where C_{t-1} is the upper
    Cholesky factor of Sigma_{t-1}^{-1}; eigenvalues below 1e-10 of the
    largest magnitude are treated as zero.
    """
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    q_values = np.atleast_1d(np.asarray(q_values, dtype=float))
    beta = np.atleast_1d(np.asarray(vol_discounts, dtype=float))
    n_steps, p = errors.shape
    if n_steps == 0:
        raise EmptyData("likelihood evaluation needs at least one step")
    b = float(np.mean(beta))
    if b >= 1.0:
        raise MvdlmError(
            "the evolving-volatility likelihood is undefined when every "
            "discount is 1; use loglik_constant"
        )
    m_param = b / (1.0 - b) + p - 1
    if m_param <= p - 1:
        raise LikelihoodUndefined(
            "the normalizing constant requires tr(beta)/p in (0, 1)"
        )
    path = [symmetrize(np.atleast_2d(s)) for s in sigma_path]
    if len(path) != n_steps + 1:
        raise LengthMismatch(
            f"sigma path must list {n_steps + 1} matrices, got {len(path)}"
        )
    beta_root = np.sqrt(beta)
    constant = n_steps * (
        0.5 * (m_param - p) * float(np.sum(np.log(beta)))
        + multigammaln((m_param + 1) / 2.0, p)
        - 0.5 * p * np.log(2.0)
        - p * np.log(np.pi)
        - multigammaln(m_param / 2.0, p)
    )
    total = 0.0
    for i in range(n_steps):
        sigma_prev = path[i]
        sigma_cur = path[i + 1]
        phi_cur = inv_spd(sigma_cur)
        c_prev = cholesky_upper(inv_spd(sigma_prev))
        c_prev_inv = np.linalg.inv(c_prev)
        scaled = beta_root[:, None] * phi_cur * beta_root[None, :]
        inner = symmetrize(c_prev_inv.T @ scaled @ c_prev_inv)
        eigvals = np.linalg.eigvalsh(np.eye(p) - inner)
        cutoff = EIGENVALUE_THRESHOLD * max(float(np.max(np.abs(eigvals))), 1e-300)
        positive = eigvals[eigvals > cutoff]
        if positive.size == 0:
            raise NoPositiveEigenvalues(
                f"step {i + 1}: the volatility transition factor is degenerate"
            )
        quad = float(errors[i] @ phi_cur @ errors[i]) / q_values[i]
        total += (
            p * np.log(q_values[i])
            + (p - m_param) * logdet_spd(sigma_prev)
            + quad
            + p * float(np.sum(np.log(positive)))
            + (m_param - p - 2) * logdet_spd(sigma_cur)
        )
    return constant - 0.5 * total


def loglik_time_varying(trajectory, sigma_path=None):
    """Path log-likelihood of a volatility sequence under the evolving model.

    ``sigma_path`` may be "posterior" (default: per-step posterior means,
    including the prior mean at step 0), "forecast" (one-step forecast
    means) or an explicit sequence of N+1 SPD matrices.
    """
    if trajectory.constant_volatility:
        raise MvdlmError(
            "the evolving-volatility likelihood is undefined at beta = I; "
            "use loglik_constant"
        )
    path = _resolve_sigma_path(trajectory, sigma_path)
    return loglik_arrays(
        trajectory.errors,
        trajectory.q_values,
        path,
        trajectory.spec.vol_discounts,
    )


def loglik_constant_arrays(errors, q_values, sigma):
    """Array-level core of the constant-volatility log-likelihood."""
    errors = np.atleast_2d(np.asarray(errors, dtype=float))
    q_values = np.atleast_1d(np.asarray(q_values, dtype=float))
    n_steps, p = errors.shape
    if n_steps == 0:
        raise EmptyData("likelihood evaluation needs at least one step")
    sigma = symmetrize(np.atleast_2d(sigma))
    phi = inv_spd(sigma)
    quad = float(np.sum((errors @ phi) * errors / q_values[:, None]))
    return (
        -0.5 * p * n_steps * np.log(2.0 * np.pi)
        - 0.5 * p * float(np.sum(np.log(q_values)))
        - 0.5 * n_steps * logdet_spd(sigma)
        - 0.5 * quad
    )


def loglik_constant(trajectory, sigma=None):
    """Log-likelihood of a single constant volatility matrix.

    Defaults to the final posterior mean of the constant-volatility run.
    """
    if len(trajectory) == 0:
        raise EmptyData("likelihood evaluation needs at least one step")
    if sigma is None:
        sigma = trajectory.steps[-1].sigma_post.mean
    return loglik_constant_arrays(trajectory.errors, trajectory.q_values, sigma)


def var_portfolio(mu, sigma, config):
    """Value-at-Risk of a weighted portfolio at confidence ``config.alpha``.

    Evaluates mu_port + F^{-1}(alpha/100) * sigma_port where F is the
    standardized quantile family: the model t scaled to unit variance, or
    the normal. ``alpha`` is a confidence percentage, so the value is
    nondecreasing in alpha and equals the portfolio mean at alpha = 50.
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    sigma = symmetrize(np.atleast_2d(sigma))
    w = config.weights
    if w.shape != mu.shape or sigma.shape != (w.size, w.size):
        raise InvalidWeights(
            f"weights of length {w.size} do not match a mean of shape "
            f"{mu.shape} and a covariance of shape {sigma.shape}"
        )
    port_mean = float(w @ mu)
    port_var = float(w @ sigma @ w)
    if port_var < 0:
        raise InvalidWeights("portfolio variance is negative")
    level = config.alpha / 100.0
    if config.quantile_family == "normal":
        quantile = scipy.stats.norm.ppf(level)
    else:
        k = config.dof
        if k is None or k <= 2:
            raise DegreesTooSmall(
                "the t quantile family needs dof > 2 in the VaR configuration"
            )
        quantile = scipy.stats.t.ppf(level, df=k) * math.sqrt((k - 2.0) / k)
    return port_mean + quantile * math.sqrt(port_var)


def standardized_error_dofs(trajectory):
    """Forecast degrees of freedom per step (constant across steps unless
    the volatility is time-invariant)."""
    if trajectory.constant_volatility:
        n0 = float(trajectory.priors.n0)
        return n0 + np.arange(len(trajectory), dtype=float)
    b = trajectory.spec.mean_beta
    k = b / (1.0 - b)
    return np.full(len(trajectory), k)


def lbf(u_model1, u_model2, dof_model1, dof_model2, labels=("M1", "M2")):
    """Sequential log Bayes factors from two standardized-error series.

    Each step contributes log p(u_t | M1) - log p(u_t | M2), where the
    predictive law of a standardized error with k degrees of freedom is the
    multivariate t with identity covariance (column scale (k - 2) I).
    Positive values favour model 1.
    """
    u1 = np.atleast_2d(np.asarray(u_model1, dtype=float))
    u2 = np.atleast_2d(np.asarray(u_model2, dtype=float))
    if u1.shape != u2.shape:
        raise LengthMismatch(
            f"standardized error series differ in shape: {u1.shape} vs {u2.shape}"
        )
    n_steps, p = u1.shape
    k1 = np.broadcast_to(np.asarray(dof_model1, dtype=float), (n_steps,))
    k2 = np.broadcast_to(np.asarray(dof_model2, dtype=float), (n_steps,))
    eye = np.eye(p)
    values = np.empty(n_steps)
    for t in range(n_steps):
        if k1[t] <= 2 or k2[t] <= 2:
            raise DegreesTooSmall(
                f"step {t + 1}: standardized-error densities need dof > 2"
            )
        params1 = MultiTParams(
            dof=k1[t], location=np.zeros(p), scale_row=1.0, scale_col=(k1[t] - 2) * eye
        )
        params2 = MultiTParams(
            dof=k2[t], location=np.zeros(p), scale_row=1.0, scale_col=(k2[t] - 2) * eye
        )
        values[t] = mvt_logpdf(u1[t], params1) - mvt_logpdf(u2[t], params2)
    return LbfSeries(values=values, model_labels=tuple(labels))


def lbf_from_trajectories(traj1, traj2, labels=("M1", "M2")):
    """Log Bayes factors of two fitted models over the same observations."""
    if len(traj1) != len(traj2):
        raise LengthMismatch("trajectories cover different horizons")
    u1 = traj1.standardized
    u2 = traj2.standardized
    if np.any(np.isnan(u1)) or np.any(np.isnan(u2)):
        raise FeatureUnavailable(
            "both models must produce standardized errors at every step"
        )
    return lbf(
        u1,
        u2,
        standardized_error_dofs(traj1),
        standardized_error_dofs(traj2),
        labels=labels,
    )


def compute_diagnostics(trajectory, with_loglik=True):
    """Full diagnostics report with the branch-appropriate log-likelihood."""
    report = msse_mae_me(trajectory)
    if not with_loglik:
        return report
    if trajectory.constant_volatility:
        loglik = loglik_constant(trajectory)
    else:
        loglik = loglik_time_varying(trajectory)
    return replace(report, loglik=loglik)


@dataclass(frozen=True)
class GridRow:
    """One evaluated (delta, beta) candidate."""

    delta: float
    beta: tuple
    msse: np.ndarray
    me: np.ndarray
    loglik: float
    var95: float | None
    var99: float | None


@dataclass(frozen=True)
class GridSearchResult:
    """Feasible candidates ranked by log-likelihood plus exclusions."""

    rows: tuple
    excluded: tuple  # (delta, beta, reason) triples

    def to_csv(self, path):
        """Column order: delta, beta_1..beta_p, msse_1..msse_p,
        me_1..me_p, loglik, var95, var99."""
        if not self.rows:
            raise EmptyGrid("no feasible candidates to export")
        p = len(self.rows[0].beta)
        header = (
            ["delta"]
            + [f"beta_{i + 1}" for i in range(p)]
            + [f"msse_{i + 1}" for i in range(p)]
            + [f"me_{i + 1}" for i in range(p)]
            + ["loglik", "var95", "var99"]
        )
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            for row in self.rows:
                record = [row.delta]
                record.extend(row.beta)
                record.extend(row.msse.tolist())
                record.extend(row.me.tolist())
                record.append(row.loglik)
                record.append(float("nan") if row.var95 is None else row.var95)
                record.append(float("nan") if row.var99 is None else row.var99)
                writer.writerow(record)


def var_at_horizon(trajectory, weights, family="t", alphas=(95.0, 99.0)):
    """Portfolio VaR from the end-of-sample posterior.

    Uses the filtered level m_N'F as the portfolio mean components, the
    posterior-mean volatility matrix, and (for the t family) the
    end-of-sample forecast degrees of freedom. Returns one value per
    requested confidence percentage.
    """
    if len(trajectory) == 0:
        raise EmptyData("VaR needs at least one filtered step")
    final = trajectory.final
    spec = trajectory.spec
    f_vec = spec.design_at(final.t)
    mu = final.m.T @ f_vec
    sigma = trajectory.steps[-1].sigma_post.mean
    if trajectory.constant_volatility:
        dof = float(trajectory.priors.n0) + len(trajectory)
    else:
        dof = spec.mean_beta * trajectory.initial_dof
    values = []
    for alpha in alphas:
        config = VaRConfig(
            weights=weights, alpha=float(alpha), quantile_family=family, dof=dof
        )
        values.append(var_portfolio(mu, sigma, config))
    return values


def _evaluate_candidate(spec, priors, observations, weights, var_family, sqrt_method):
    trajectory = run(spec, priors, observations, sqrt_method=sqrt_method)
    report = compute_diagnostics(trajectory)
    var95 = var99 = None
    if weights is not None:
        var95, var99 = var_at_horizon(trajectory, weights, var_family)
    return report, var95, var99


def grid_search(
    spec_template,
    priors,
    observations,
    delta_grid,
    beta_grid,
    weights=None,
    var_family="t",
    sqrt_method="spectral",
    max_workers=None,
):
    """Score every (delta, beta) candidate and rank by log-likelihood.

    ``delta_grid`` holds scalar state discounts (applied to every state
    component); ``beta_grid`` holds explicit length-p vectors. Candidates
    whose mean volatility discount is 2/3 or less cannot produce
    standardized errors with finite variance and are reported in
    ``excluded`` instead of being scored; all-ones candidates run the
    constant-volatility branch and are scored with its likelihood.
    Ranking is by log-likelihood, descending, with lexicographic
    (delta, beta) tie-breaks. Candidates evaluate in a thread pool and are
    merged deterministically.
    """
    delta_grid = list(delta_grid)
    beta_grid = [np.atleast_1d(np.asarray(b, dtype=float)) for b in beta_grid]
    if not delta_grid or not beta_grid:
        raise EmptyGrid("both the delta grid and the beta grid must be non-empty")
    candidates = []
    excluded = []
    for delta in delta_grid:
        for beta in beta_grid:
            spec = replace(
                spec_template,
                state_discounts=np.full(spec_template.d, float(delta)),
                vol_discounts=beta,
            )
            report = validate(spec, priors)
            if not report.constant_volatility and not report.features[
                "forecast_moments"
            ]:
                excluded.append(
                    (
                        float(delta),
                        tuple(beta.tolist()),
                        f"mean volatility discount {report.mean_beta:.6g} <= 2/3",
                    )
                )
                continue
            candidates.append((float(delta), beta, spec))
    if not candidates and not excluded:
        raise EmptyGrid("the candidate grid is empty")

    def evaluate(item):
        delta, beta, spec = item
        report, var95, var99 = _evaluate_candidate(
            spec, priors, observations, weights, var_family, sqrt_method
        )
        return GridRow(
            delta=delta,
            beta=tuple(beta.tolist()),
            msse=report.msse,
            me=report.me,
            loglik=report.loglik,
            var95=var95,
            var99=var99,
        )

    if max_workers is None:
        max_workers = min(8, max(1, len(candidates)))
    if max_workers == 1 or len(candidates) <= 1:
        rows = [evaluate(item) for item in candidates]
    else:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(evaluate, candidates))
    rows.sort(key=lambda row: (-row.loglik, row.delta, row.beta))
    return GridSearchResult(rows=tuple(rows), excluded=tuple(excluded))


def export_report_json(report, path=None):
    """Serialize a diagnostics report to JSON (returns the dict)."""
    payload = {
        "msse": report.msse.tolist(),
        "mae": report.mae.tolist(),
        "me": report.me.tolist(),
        "loglik": report.loglik,
        "n_obs": report.n_obs,
        "sqrt_convention": report.sqrt_convention,
    }
    if path is not None:
        with open(path, "w") as handle:
            json.dump(payload, handle, indent=2, sort_keys=True)
            handle.write("\n")
    return payload


def export_report_csv(report, path):
    """One-row CSV export of a diagnostics report."""
    p = report.msse.size
    header = (
        [f"msse_{i + 1}" for i in range(p)]
        + [f"mae_{i + 1}" for i in range(p)]
        + [f"me_{i + 1}" for i in range(p)]
        + ["loglik", "n_obs", "sqrt_convention"]
    )
    row = (
        report.msse.tolist()
        + report.mae.tolist()
        + report.me.tolist()
        + [
            float("nan") if report.loglik is None else report.loglik,
            report.n_obs,
            report.sqrt_convention,
        ]
    )
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerow(row)
