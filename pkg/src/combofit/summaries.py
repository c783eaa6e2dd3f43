"""Posterior and curve-level summaries: DSS, rVUS, bi-dimensional EC50 set,
pseudo-marginal predictive score (LPML) and surface MSE."""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import SurfaceGrid
from .errors import ValidationError
from .model import link_g, log_logistic_2ll
from .splines import basis_matrix, tensor_eval


def _logsumexp(a, axis=None):
    a = np.asarray(a, dtype=float)
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    out = np.log(np.sum(np.exp(a - amax), axis=axis)) + np.squeeze(amax, axis=axis)
    return out


# ---------------------------------------------------------------------------
# Curve- and surface-level scores


def dss(m: float, lam: float, conc_range, threshold: float = 0.10,
        n_points: int = 1001) -> float:
    """Drug sensitivity score of a fitted 2LL curve over a log10 dose window.

    Activity a(x) = 1 - f(x) is integrated (trapezoid) over the part of the
    window where it exceeds the threshold t; the score is
    100 * max(0, AUC - t * R) / ((1 - t) * R) with R the window width, so a
    fully inactive drug scores 0 and a fully active one 100.
    """
    lo, hi = float(conc_range[0]), float(conc_range[1])
    if not hi > lo:
        raise ValidationError("conc_range must have positive width")
    if not 0.0 < threshold < 1.0:
        raise ValidationError("threshold must lie in (0, 1)")
    if not (math.isfinite(lam) and lam > 0.0):
        raise ValidationError("lam must be finite and positive")
    width = hi - lo
    # Activity is increasing in x, so the above-threshold region is an
    # interval [x_t, hi]; its start is available in closed form.
    x_t = m + math.log10(threshold / (1.0 - threshold)) / lam
    x_t = min(max(x_t, lo), hi)
    if x_t >= hi:
        return 0.0
    x = np.linspace(x_t, hi, n_points)
    activity = 1.0 - log_logistic_2ll(x, m, lam)
    auc = float(np.trapezoid(activity, x))
    return 100.0 * max(0.0, auc - threshold * width) / ((1.0 - threshold) * width)


def rvus(surface: SurfaceGrid, lower: float, upper: float) -> float:
    """Volume under the surface, normalised by its bounding box.

    Double trapezoid over the surface's axes divided by
    (axis1 span) * (axis2 span) * (upper - lower); a constant surface c with
    bounds (0, 1) scores exactly c.
    """
    if not upper > lower:
        raise ValidationError("upper bound must exceed lower bound")
    values = surface.values
    if np.any(values < lower - 1e-12) or np.any(values > upper + 1e-12):
        raise ValidationError("surface values fall outside the stated bounds")
    span1 = surface.axis1[-1] - surface.axis1[0]
    span2 = surface.axis2[-1] - surface.axis2[0]
    if not (span1 > 0.0 and span2 > 0.0):
        raise ValidationError("rvus needs at least two points per axis")
    volume = float(np.trapezoid(np.trapezoid(values, x=surface.axis2, axis=1),
                                x=surface.axis1))
    area = span1 * span2
    return (volume - lower * area) / ((upper - lower) * area)


def bi_ec50(p_surface: SurfaceGrid, tolerance: float = 0.01) -> np.ndarray:
    """Grid points whose mean viability sits within tolerance of 0.5.

    Returns an (n, 2) array of (log10 conc1, log10 conc2) pairs; possibly
    empty. Widening the tolerance can only grow the set.
    """
    if not tolerance >= 0.0:
        raise ValidationError("tolerance must be nonnegative")
    mask = np.abs(p_surface.values - 0.5) <= tolerance
    ii, jj = np.nonzero(mask)
    return np.column_stack((p_surface.axis1[ii], p_surface.axis2[jj]))


def lpml(obs_log_densities: np.ndarray) -> float:
    """Log pseudo-marginal likelihood: sum of log conditional predictive
    ordinates, each the harmonic mean of per-sample observation densities.

    Rows are posterior samples, columns observations. With a single sample
    this reduces to that sample's total log likelihood.
    """
    ld = np.asarray(obs_log_densities, dtype=float)
    if ld.ndim != 2 or ld.shape[0] < 1:
        raise ValidationError("need a (samples, observations) log-density matrix")
    if not np.all(np.isfinite(ld)):
        raise ValidationError("log densities must be finite")
    n_samples = ld.shape[0]
    log_cpo = math.log(n_samples) - _logsumexp(-ld, axis=0)
    return float(np.sum(log_cpo))


def combination_columns(grid, n_obs: int) -> np.ndarray:
    """Boolean mask over raveled (i, j, replicate) observation columns that
    selects the combination observations, i.e. cells where both drugs were
    dispensed. Monotherapy border observations (either dose zero) are excluded.
    """
    cells = grid.shape[0] * grid.shape[1]
    if n_obs % cells != 0:
        raise ValidationError(
            f"observation count {n_obs} is not a multiple of the {cells}-cell grid")
    n_rep = n_obs // cells
    interior = grid.border_mask() > 0.0
    return np.repeat(interior.ravel(), n_rep)


def mse_surface(estimate, truth) -> float:
    """Mean squared cellwise difference between two surfaces."""
    a = estimate.values if isinstance(estimate, SurfaceGrid) else np.asarray(estimate, dtype=float)
    b = truth.values if isinstance(truth, SurfaceGrid) else np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise ValidationError(f"surface shapes differ: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


# ---------------------------------------------------------------------------
# Posterior aggregation


def _pool(chains):
    if not isinstance(chains, (list, tuple)):
        chains = [chains]
    if len(chains) == 0:
        raise ValidationError("need at least one chain")
    return list(chains)


def fine_mean_surface(chains, n_points: int = 100) -> SurfaceGrid:
    """Posterior-mean viability on a refined grid over the nonzero dose ranges.

    The mean surface is re-evaluated per retained sample on the fine grid
    (interaction included, no border mask: every fine point has both drugs
    present) and then averaged.
    """
    chains = _pool(chains)
    grid = chains[0].grid
    spline = chains[0].spline
    linear_scale = chains[0].linear_scale
    ax1 = np.linspace(grid.logc1[1], grid.logc1[-1], n_points)
    ax2 = np.linspace(grid.logc2[1], grid.logc2[-1], n_points)
    basis1 = basis_matrix(ax1, spline.knots1, spline.degree)
    basis2 = basis_matrix(ax2, spline.knots2, spline.degree)
    if linear_scale == "log10":
        u1, u2 = ax1, ax2
    else:
        u1, u2 = 10.0 ** ax1, 10.0 ** ax2
    total = np.zeros((n_points, n_points))
    count = 0
    for chain in chains:
        for state in chain.states:
            f1 = log_logistic_2ll(ax1, state.m1, state.lambda1)
            f2 = log_logistic_2ll(ax2, state.m2, state.lambda2)
            p0 = np.outer(f1, f2)
            b_pred = (state.gamma0 + state.gamma1 * u1[:, None]
                      + state.gamma2 * u2[None, :]
                      + tensor_eval(basis1, state.C, basis2))
            total += p0 + link_g(b_pred, p0, state.b1, state.b2)
            count += 1
    return SurfaceGrid(values=total / count, axis1=ax1, axis2=ax2, label="p_fine")


def _quantile_stats(samples: np.ndarray) -> dict:
    return {
        "median": float(np.median(samples)),
        "lower95": float(np.percentile(samples, 2.5)),
        "upper95": float(np.percentile(samples, 97.5)),
        "mean": float(np.mean(samples)),
    }


@dataclass
class SummaryReport:
    """Posterior summary block emitted by a fit."""

    n_samples: int
    lpml: float
    dss: dict
    rvus: dict
    interaction_labels: dict
    bi_ec50_points: np.ndarray
    bi_ec50_tolerance: float
    dss_threshold: float
    posterior_mean: dict = field(default_factory=dict)
    acceptance: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "lpml": self.lpml,
            "dss_threshold": self.dss_threshold,
            "dss": self.dss,
            "rvus": self.rvus,
            "interaction_labels": self.interaction_labels,
            "bi_ec50_tolerance": self.bi_ec50_tolerance,
            "bi_ec50_points": [[float(a), float(b)] for a, b in self.bi_ec50_points],
            "acceptance": self.acceptance,
        }


def summarize_chains(chains, dss_threshold: float = 0.10,
                     bi_ec50_tolerance: float = 0.01, fine_points: int = 100,
                     swap_interaction_labels: bool = False) -> SummaryReport:
    """Full posterior summary over one or several pooled chains.

    Every score is computed per retained sample and reported as median with a
    central 95% interval. rVUS of the interaction components shares the |Delta|
    bounding box of its own sample. The delta_plus/delta_minus naming follows
    the link sign convention (delta_plus collects viability deficits,
    Delta < 0); swap_interaction_labels flips which one is labelled
    synergistic.

    LPML is reported over the combination observations only (both doses
    nonzero): the monotherapy borders inform the fit but the predictive score
    targets the cells where an interaction is possible.
    """
    chains = _pool(chains)
    grid = chains[0].grid
    dss_range1 = (float(grid.logc1[1]), float(grid.logc1[-1]))
    dss_range2 = (float(grid.logc2[1]), float(grid.logc2[-1]))

    dss1, dss2 = [], []
    scores = {key: [] for key in ("p0", "abs_delta", "delta_plus", "delta_minus",
                                  "one_minus_p")}
    for chain in chains:
        for s, state in enumerate(chain.states):
            dss1.append(dss(state.m1, state.lambda1, dss_range1, dss_threshold))
            dss2.append(dss(state.m2, state.lambda2, dss_range2, dss_threshold))
            p0 = chain.p0[s]
            delta = chain.delta[s]
            bound = float(np.max(np.maximum(p0, 1.0 - p0)))
            ax = dict(axis1=grid.logc1, axis2=grid.logc2)
            scores["p0"].append(rvus(SurfaceGrid(values=p0, **ax), 0.0, 1.0))
            scores["abs_delta"].append(
                rvus(SurfaceGrid(values=np.abs(delta), **ax), 0.0, bound))
            scores["delta_plus"].append(
                rvus(SurfaceGrid(values=np.abs(np.minimum(delta, 0.0)), **ax), 0.0, bound))
            scores["delta_minus"].append(
                rvus(SurfaceGrid(values=np.maximum(delta, 0.0), **ax), 0.0, bound))
            scores["one_minus_p"].append(
                rvus(SurfaceGrid(values=1.0 - (p0 + delta), **ax), 0.0, 1.0))

    labels = {"delta_plus": "synergistic", "delta_minus": "antagonistic"}
    if swap_interaction_labels:
        labels = {"delta_plus": "antagonistic", "delta_minus": "synergistic"}

    fine = fine_mean_surface(chains, n_points=fine_points)
    pooled_ld = np.vstack([chain.obs_log_densities for chain in chains])
    n_samples = sum(len(chain.states) for chain in chains)

    mean_p0 = np.mean(np.concatenate([chain.p0 for chain in chains]), axis=0)
    mean_delta = np.mean(np.concatenate([chain.delta for chain in chains]), axis=0)

    combo = combination_columns(grid, pooled_ld.shape[1])
    return SummaryReport(
        n_samples=n_samples,
        lpml=lpml(pooled_ld[:, combo]),
        dss={"drug1": _quantile_stats(np.array(dss1)),
             "drug2": _quantile_stats(np.array(dss2))},
        rvus={key: _quantile_stats(np.array(vals)) for key, vals in scores.items()},
        interaction_labels=labels,
        bi_ec50_points=bi_ec50(fine, bi_ec50_tolerance),
        bi_ec50_tolerance=bi_ec50_tolerance,
        dss_threshold=dss_threshold,
        posterior_mean={
            "p0": mean_p0,
            "delta": mean_delta,
            "p": mean_p0 + mean_delta,
        },
        acceptance={str(i): dict(chain.accept_rates) for i, chain in enumerate(chains)},
    )
