"""Adaptive Metropolis-within-Gibbs sampler for the dose-response model.

Each parameter block is updated in a fixed order with a Gaussian random walk
on a transformed scale (log for positive parameters, identity otherwise).
After an initial adapt_start iterations every block's proposal covariance
tracks the running sample covariance of its own history, scaled by a factor
tuned toward a target acceptance rate with Robbins-Monro steps on the log
scale. Under an Inverse-Gamma variance prior the variance blocks switch to
exact conjugate draws.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .data import LogConcGrid, PlateDataset, SurfaceGrid
from .errors import InitializationError, ValidationError
from .model import (EXP_CLAMP, LN10, PHI_NAMES, POW10_CLAMP, HalfCauchyPrior,
                    InverseGammaPrior, ParameterState, PriorSpec, initial_state,
                    linear_axes, log_likelihood, log_prior)
from .splines import SplineSpec, basis_matrix, penalty_precision

BLOCK_NAMES = (
    "m1", "m2", "lambda1", "lambda2", "b",
    "gamma0", "gamma1", "gamma2", "C",
    "sigma2_m1", "sigma2_m2", "sigma2_gamma0", "sigma2_gamma1", "sigma2_gamma2",
    "sigma2_eps",
)

_VARIANCE_BLOCKS = {
    "sigma2_m1": "m1", "sigma2_m2": "m2", "sigma2_gamma0": "gamma0",
    "sigma2_gamma1": "gamma1", "sigma2_gamma2": "gamma2",
}

DEFAULT_PROPOSAL_SCALES = {
    "m1": 0.1, "m2": 0.1, "lambda1": 0.1, "lambda2": 0.1, "b": 0.15,
    "gamma0": 0.2, "gamma1": 0.2, "gamma2": 0.2, "C": 0.05,
    "sigma2_m1": 0.3, "sigma2_m2": 0.3, "sigma2_gamma0": 0.3,
    "sigma2_gamma1": 0.3, "sigma2_gamma2": 0.3, "sigma2_eps": 0.3,
}


@dataclass(frozen=True)
class ChainConfig:
    """Schedule and tuning knobs of one MCMC chain."""

    n_iter: int = 100_000
    burn_in: int = None
    thin: int = 10
    adapt_start: int = 1000
    seed: int = 0
    adapt_jitter: float = 1e-6
    rm_decay: float = 0.7
    target_accept_scalar: float = 0.44
    target_accept_multi: float = 0.234
    proposal_scales: dict = None

    def __post_init__(self):
        if self.n_iter < 1:
            raise ValidationError("n_iter must be at least 1")
        burn_in = self.n_iter // 2 if self.burn_in is None else self.burn_in
        if not 0 <= burn_in < self.n_iter:
            raise ValidationError("burn_in must satisfy 0 <= burn_in < n_iter")
        if self.thin < 1:
            raise ValidationError("thin must be at least 1")
        if (self.n_iter - burn_in) // self.thin < 1:
            raise ValidationError("schedule retains no samples")
        if self.adapt_start < 1:
            raise ValidationError("adapt_start must be at least 1")
        if self.seed < 0:
            raise ValidationError("seed must be nonnegative")
        if not self.adapt_jitter > 0.0:
            raise ValidationError("adapt_jitter must be positive")
        if not 0.5 < self.rm_decay <= 1.0:
            raise ValidationError("rm_decay must lie in (0.5, 1]")
        for target in (self.target_accept_scalar, self.target_accept_multi):
            if not 0.0 < target < 1.0:
                raise ValidationError("acceptance targets must lie in (0, 1)")
        scales = dict(DEFAULT_PROPOSAL_SCALES)
        if self.proposal_scales is not None:
            unknown = set(self.proposal_scales) - set(BLOCK_NAMES)
            if unknown:
                raise ValidationError(f"unknown proposal scale keys: {sorted(unknown)}")
            scales.update({k: float(v) for k, v in self.proposal_scales.items()})
        if any(not v > 0.0 for v in scales.values()):
            raise ValidationError("proposal scales must be positive")
        object.__setattr__(self, "burn_in", int(burn_in))
        object.__setattr__(self, "proposal_scales", scales)

    @property
    def n_retained(self) -> int:
        return (self.n_iter - self.burn_in) // self.thin


def _safe_exp(x: float) -> float:
    # math.exp raises OverflowError past ~709.78; return inf so callers can
    # reject the proposal instead of crashing (matters for diffuse targets).
    return math.exp(x) if x < EXP_CLAMP else math.inf


class AdaptiveState:
    """Running proposal adaptation of one block.

    Keeps the sums needed for the sample covariance of the block's transformed
    history and a Robbins-Monro-tuned scalar multiplier s. Before adapt_start
    iterations the proposal is an isotropic Gaussian with the configured
    initial scale.
    """

    def __init__(self, dim, initial_scale, target, adapt_start, jitter, rm_decay):
        self.dim = dim
        self.initial_scale = float(initial_scale)
        self.target = float(target)
        self.adapt_start = int(adapt_start)
        self.jitter = float(jitter)
        self.rm_decay = float(rm_decay)
        self.log_s = math.log(2.38 ** 2 / dim)
        self.count = 0
        if dim == 1:
            self.sum_t = 0.0
            self.sum_tt = 0.0
            self.step_sd = None
        else:
            self.sum_t = np.zeros(dim)
            self.sum_tt = np.zeros((dim, dim))
            self.chol = None

    def propose_step(self, rng):
        if self.dim == 1:
            sd = self.initial_scale if self.step_sd is None else self.step_sd
            return sd * rng.standard_normal()
        z = rng.standard_normal(self.dim)
        if self.chol is None:
            return self.initial_scale * z
        return self.chol @ z

    def observe(self, t, accept_prob, iteration):
        """Record the post-update value t and adapt after adapt_start."""
        self.count += 1
        if self.dim == 1:
            self.sum_t += t
            self.sum_tt += t * t
        else:
            self.sum_t += t
            self.sum_tt += np.outer(t, t)
        if iteration <= self.adapt_start or self.count < 2:
            return
        self.log_s += iteration ** (-self.rm_decay) * (accept_prob - self.target)
        self.log_s = min(max(self.log_s, -23.0), 14.0)
        s = math.exp(self.log_s)
        n = self.count
        if self.dim == 1:
            var = (self.sum_tt - self.sum_t * self.sum_t / n) / (n - 1)
            self.step_sd = math.sqrt(s * (max(var, 0.0) + self.jitter))
        else:
            cov = (self.sum_tt - np.outer(self.sum_t, self.sum_t) / n) / (n - 1)
            xi = s * (cov + self.jitter * np.eye(self.dim))
            try:
                self.chol = np.linalg.cholesky(xi)
            except np.linalg.LinAlgError:
                # Keep the previous factor; the running covariance can lose
                # definiteness to rounding when the chain has barely moved.
                pass

    def covariance(self):
        """Current covariance estimate of the block history (for diagnostics)."""
        n = self.count
        if n < 2:
            return None
        if self.dim == 1:
            return (self.sum_tt - self.sum_t * self.sum_t / n) / (n - 1)
        return (self.sum_tt - np.outer(self.sum_t, self.sum_t) / n) / (n - 1)


def variance_posterior_params(prior: InverseGammaPrior, sum_sq: float, n_terms: float):
    """Conjugate Inverse-Gamma posterior parameters for a Gaussian variance."""
    return prior.shape + 0.5 * n_terms, prior.rate + 0.5 * sum_sq


def draw_inverse_gamma(rng, shape: float, rate: float) -> float:
    return 1.0 / rng.gamma(shape, 1.0 / rate)


@dataclass
class PosteriorChain:
    """Retained samples of one chain plus the per-sample surfaces."""

    states: list
    p0: np.ndarray
    delta: np.ndarray
    obs_log_densities: np.ndarray
    accept_rates: dict
    config: ChainConfig
    chain_index: int
    grid: LogConcGrid
    spline: SplineSpec
    priors: PriorSpec
    linear_scale: str

    def __len__(self):
        return len(self.states)

    @property
    def p(self) -> np.ndarray:
        return self.p0 + self.delta

    def scalar_series(self, name: str) -> np.ndarray:
        if name in PHI_NAMES or name in ("lambda1", "lambda2", "b1", "b2", "sigma2_eps"):
            return np.array([getattr(s, name) for s in self.states])
        if name.startswith("sigma2_"):
            phi = name[len("sigma2_"):]
            return np.array([s.sigma2_phi[phi] for s in self.states])
        raise ValidationError(f"unknown scalar series {name!r}")

    def coefficient_series(self) -> np.ndarray:
        return np.stack([s.C for s in self.states])

    def posterior_mean_delta(self) -> SurfaceGrid:
        return SurfaceGrid(values=self.delta.mean(axis=0), axis1=self.grid.logc1,
                           axis2=self.grid.logc2, label="delta_mean")

    def posterior_mean_p(self) -> SurfaceGrid:
        return SurfaceGrid(values=self.p.mean(axis=0), axis1=self.grid.logc1,
                           axis2=self.grid.logc2, label="p_mean")


class _Sampler:
    """One chain's working state and block updates."""

    def __init__(self, data, priors, spline, config, linear_scale, update_blocks,
                 prior_only, initial, chain_index):
        grid = LogConcGrid.from_dataset(data)
        self.grid = grid
        self.spline = spline
        self.priors = priors
        self.config = config
        self.linear_scale = linear_scale
        self.chain_index = chain_index
        self.prior_only = prior_only

        self.basis1 = basis_matrix(grid.logc1, spline.knots1, spline.degree)
        self.basis2 = basis_matrix(grid.logc2, spline.knots2, spline.degree)
        self.mask = grid.border_mask()
        u1, u2 = linear_axes(grid, linear_scale)
        self.u1_col = u1[:, None]
        self.u2_row = u2[None, :]
        self.prec1 = penalty_precision(spline.k1, spline.penalty_ridge)
        self.prec2 = penalty_precision(spline.k2, spline.penalty_ridge)

        if prior_only:
            self.y = None
            self.n_rep = 0
            self.n_obs = 0
            self.s1 = np.zeros(grid.shape)
            self.s2_total = 0.0
        else:
            self.y = data.viability
            self.n_rep = data.n_rep
            self.n_obs = data.n_obs
            self.s1 = self.y.sum(axis=2)
            self.s2_total = float(np.vdot(self.y, self.y))

        if update_blocks is None:
            self.active = set(BLOCK_NAMES)
        else:
            unknown = set(update_blocks) - set(BLOCK_NAMES)
            if unknown:
                raise ValidationError(f"unknown update blocks: {sorted(unknown)}")
            if not update_blocks:
                raise ValidationError("update_blocks must not be empty")
            self.active = set(update_blocks)

        self.rng = np.random.default_rng(np.random.SeedSequence([config.seed, chain_index]))

        start = initial_state(grid, spline) if initial is None else initial
        if start.C.shape != (spline.k1, spline.k2):
            raise ValidationError("initial C shape does not match the spline layout")
        self.m1, self.m2 = start.m1, start.m2
        self.lam1, self.lam2 = start.lambda1, start.lambda2
        self.b1, self.b2 = start.b1, start.b2
        self.g0, self.g1, self.g2 = start.gamma0, start.gamma1, start.gamma2
        self.C = start.C.copy()
        self.s2phi = dict(start.sigma2_phi)
        self.s2eps = start.sigma2_eps

        self.f1 = self._curve(grid.logc1, self.m1, self.lam1)
        self.f2 = self._curve(grid.logc2, self.m2, self.lam2)
        self.p0 = np.outer(self.f1, self.f2)
        self.spl = self.basis1 @ self.C @ self.basis2.T
        self.lin = self.g0 + self.g1 * self.u1_col + self.g2 * self.u2_row
        self.bpred = self.lin + self.spl
        self.quad = float(np.sum(self.prec2 * (self.C.T @ self.prec1 @ self.C)))
        self.delta, self.p, self.ss = self._delta_p_ss(self.p0, self.bpred,
                                                       self.b1, self.b2)

        start_ll = self._loglik(self.ss, self.s2eps)
        start_lp = log_prior(start, priors, spline)
        if not (math.isfinite(start_ll) and math.isfinite(start_lp)):
            raise InitializationError(
                f"non-finite posterior at initialization "
                f"(loglik={start_ll}, logprior={start_lp})")

        hc = priors.variance_prior if isinstance(priors.variance_prior, HalfCauchyPrior) else None
        self.hc = hc
        self.ig = priors.variance_prior if hc is None else None

        cfg = config
        self.adapters = {}
        for name in BLOCK_NAMES:
            if name not in self.active:
                continue
            if name.startswith("sigma2_") and self.ig is not None:
                continue  # conjugate draws need no tuning
            dim = {"b": 2, "C": spline.k1 * spline.k2}.get(name, 1)
            target = cfg.target_accept_scalar if dim == 1 else cfg.target_accept_multi
            self.adapters[name] = AdaptiveState(
                dim=dim, initial_scale=cfg.proposal_scales[name], target=target,
                adapt_start=cfg.adapt_start, jitter=cfg.adapt_jitter,
                rm_decay=cfg.rm_decay)
        self.accepted = {name: 0 for name in self.adapters}
        self.proposed = {name: 0 for name in self.adapters}

    # -- numerics ----------------------------------------------------------

    @staticmethod
    def _curve(logc, m, lam):
        t = np.clip(lam * (logc - m), -POW10_CLAMP, POW10_CLAMP)
        return 1.0 / (1.0 + np.exp(LN10 * t))

    def _delta_p_ss(self, p0, bpred, b1, b2):
        z1 = np.clip(b1 * bpred, -EXP_CLAMP, EXP_CLAMP)
        z2 = np.clip(-b2 * bpred, -EXP_CLAMP, EXP_CLAMP)
        g = -p0 / (1.0 + np.exp(z1)) + (1.0 - p0) / (1.0 + np.exp(z2))
        delta = g * self.mask
        p = p0 + delta
        ss = self.n_rep * float(np.vdot(p, p)) - 2.0 * float(np.vdot(p, self.s1)) + self.s2_total
        return delta, p, ss

    def _loglik(self, ss, s2eps):
        if self.n_obs == 0:
            return 0.0
        return -0.5 * self.n_obs * math.log(2.0 * math.pi * s2eps) - ss / (2.0 * s2eps)

    def _decide(self, log_a):
        """Acceptance probability and accept/reject decision for one proposal."""
        if not math.isfinite(log_a):
            return 0.0, False
        if log_a >= 0.0:
            return 1.0, True
        a = math.exp(log_a)
        return a, self.rng.random() < a

    # -- block updates -----------------------------------------------------

    def _update_m(self, name, iteration):
        ad = self.adapters[name]
        cur = self.m1 if name == "m1" else self.m2
        cand = cur + ad.propose_step(self.rng)
        if name == "m1":
            f1c = self._curve(self.grid.logc1, cand, self.lam1)
            p0c = np.outer(f1c, self.f2)
        else:
            f2c = self._curve(self.grid.logc2, cand, self.lam2)
            p0c = np.outer(self.f1, f2c)
        deltac, pc, ssc = self._delta_p_ss(p0c, self.bpred, self.b1, self.b2)
        log_a = (-(ssc - self.ss) / (2.0 * self.s2eps)
                 - (cand * cand - cur * cur) / (2.0 * self.s2phi[name]))
        a, ok = self._decide(log_a)
        self.proposed[name] += 1
        if ok:
            self.accepted[name] += 1
            if name == "m1":
                self.m1, self.f1 = cand, f1c
            else:
                self.m2, self.f2 = cand, f2c
            self.p0, self.delta, self.p, self.ss = p0c, deltac, pc, ssc
        ad.observe(self.m1 if name == "m1" else self.m2, a, iteration)

    def _update_lambda(self, name, iteration):
        ad = self.adapters[name]
        prior = self.priors.lambda1 if name == "lambda1" else self.priors.lambda2
        cur = self.lam1 if name == "lambda1" else self.lam2
        t = math.log(cur)
        tc = t + ad.propose_step(self.rng)
        cand = _safe_exp(tc)
        self.proposed[name] += 1
        if not (math.isfinite(cand) and cand > 0.0):
            ad.observe(t, 0.0, iteration)
            return
        if name == "lambda1":
            f1c = self._curve(self.grid.logc1, self.m1, cand)
            p0c = np.outer(f1c, self.f2)
        else:
            f2c = self._curve(self.grid.logc2, self.m2, cand)
            p0c = np.outer(self.f1, f2c)
        deltac, pc, ssc = self._delta_p_ss(p0c, self.bpred, self.b1, self.b2)
        # Gamma prior and the log-transform Jacobian combine into
        # (cand/cur)^shape * exp(-rate * (cand - cur)).
        log_a = (-(ssc - self.ss) / (2.0 * self.s2eps)
                 + prior.shape * (tc - t) - prior.rate * (cand - cur))
        a, ok = self._decide(log_a)
        if ok:
            self.accepted[name] += 1
            if name == "lambda1":
                self.lam1, self.f1 = cand, f1c
            else:
                self.lam2, self.f2 = cand, f2c
            self.p0, self.delta, self.p, self.ss = p0c, deltac, pc, ssc
        ad.observe(math.log(cur if not ok else cand), a, iteration)

    def _update_b(self, iteration):
        ad = self.adapters["b"]
        t = np.array([math.log(self.b1), math.log(self.b2)])
        tc = t + ad.propose_step(self.rng)
        b1c, b2c = _safe_exp(tc[0]), _safe_exp(tc[1])
        self.proposed["b"] += 1
        if not (b1c > 0.0 and b2c > 0.0 and math.isfinite(b1c) and math.isfinite(b2c)):
            ad.observe(t, 0.0, iteration)
            return
        deltac, pc, ssc = self._delta_p_ss(self.p0, self.bpred, b1c, b2c)
        log_a = (-(ssc - self.ss) / (2.0 * self.s2eps)
                 + self.priors.b1.shape * (tc[0] - t[0])
                 - self.priors.b1.rate * (b1c - self.b1)
                 + self.priors.b2.shape * (tc[1] - t[1])
                 - self.priors.b2.rate * (b2c - self.b2))
        a, ok = self._decide(log_a)
        if ok:
            self.accepted["b"] += 1
            self.b1, self.b2 = b1c, b2c
            self.delta, self.p, self.ss = deltac, pc, ssc
            ad.observe(tc, a, iteration)
        else:
            ad.observe(t, a, iteration)

    def _update_gamma(self, name, iteration):
        ad = self.adapters[name]
        idx = {"gamma0": 0, "gamma1": 1, "gamma2": 2}[name]
        cur = (self.g0, self.g1, self.g2)[idx]
        step = ad.propose_step(self.rng)
        cand = cur + step
        if idx == 0:
            bpredc = self.bpred + step
        elif idx == 1:
            bpredc = self.bpred + step * self.u1_col
        else:
            bpredc = self.bpred + step * self.u2_row
        deltac, pc, ssc = self._delta_p_ss(self.p0, bpredc, self.b1, self.b2)
        log_a = (-(ssc - self.ss) / (2.0 * self.s2eps)
                 - (cand * cand - cur * cur) / (2.0 * self.s2phi[name]))
        a, ok = self._decide(log_a)
        self.proposed[name] += 1
        if ok:
            self.accepted[name] += 1
            if idx == 0:
                self.g0 = cand
            elif idx == 1:
                self.g1 = cand
            else:
                self.g2 = cand
            self.bpred = bpredc
            self.delta, self.p, self.ss = deltac, pc, ssc
        ad.observe((self.g0, self.g1, self.g2)[idx], a, iteration)

    def _update_C(self, iteration):
        ad = self.adapters["C"]
        step = ad.propose_step(self.rng)
        dC = step.reshape(self.C.shape)
        Cc = self.C + dC
        dspl = self.basis1 @ dC @ self.basis2.T
        bpredc = self.bpred + dspl
        deltac, pc, ssc = self._delta_p_ss(self.p0, bpredc, self.b1, self.b2)
        quadc = float(np.sum(self.prec2 * (Cc.T @ self.prec1 @ Cc)))
        log_a = (-(ssc - self.ss) / (2.0 * self.s2eps)
                 - 0.5 * (quadc - self.quad))
        a, ok = self._decide(log_a)
        self.proposed["C"] += 1
        if ok:
            self.accepted["C"] += 1
            self.C = Cc
            self.spl = self.spl + dspl
            self.bpred = bpredc
            self.quad = quadc
            self.delta, self.p, self.ss = deltac, pc, ssc
        ad.observe(self.C.ravel().copy(), a, iteration)

    def _update_sigma_phi(self, block, iteration):
        phi_name = _VARIANCE_BLOCKS[block]
        phi = {"m1": self.m1, "m2": self.m2, "gamma0": self.g0,
               "gamma1": self.g1, "gamma2": self.g2}[phi_name]
        if self.ig is not None:
            shape, rate = variance_posterior_params(self.ig, phi * phi, 1.0)
            self.s2phi[phi_name] = draw_inverse_gamma(self.rng, shape, rate)
            return
        ad = self.adapters[block]
        s2 = self.s2phi[phi_name]
        t = 0.5 * math.log(s2)
        tc = t + ad.propose_step(self.rng)
        s2c = _safe_exp(2.0 * tc)
        self.proposed[block] += 1
        if not (math.isfinite(s2c) and s2c > 0.0):
            ad.observe(t, 0.0, iteration)
            return
        h2 = self.hc.scale * self.hc.scale
        log_a = (-0.5 * phi * phi * (1.0 / s2c - 1.0 / s2)
                 + math.log(s2 + h2) - math.log(s2c + h2))
        a, ok = self._decide(log_a)
        if ok:
            self.accepted[block] += 1
            self.s2phi[phi_name] = s2c
            ad.observe(tc, a, iteration)
        else:
            ad.observe(t, a, iteration)

    def _update_sigma_eps(self, iteration):
        if self.ig is not None:
            shape, rate = variance_posterior_params(self.ig, self.ss, float(self.n_obs))
            self.s2eps = draw_inverse_gamma(self.rng, shape, rate)
            return
        ad = self.adapters["sigma2_eps"]
        t = 0.5 * math.log(self.s2eps)
        tc = t + ad.propose_step(self.rng)
        s2c = _safe_exp(2.0 * tc)
        self.proposed["sigma2_eps"] += 1
        if not (math.isfinite(s2c) and s2c > 0.0):
            ad.observe(t, 0.0, iteration)
            return
        h2 = self.hc.scale * self.hc.scale
        log_a = ((1.0 - self.n_obs) * (tc - t)
                 - 0.5 * self.ss * (1.0 / s2c - 1.0 / self.s2eps)
                 + math.log(self.s2eps + h2) - math.log(s2c + h2))
        a, ok = self._decide(log_a)
        if ok:
            self.accepted["sigma2_eps"] += 1
            self.s2eps = s2c
            ad.observe(tc, a, iteration)
        else:
            ad.observe(t, a, iteration)

    # -- main loop ---------------------------------------------------------

    def _snapshot_state(self) -> ParameterState:
        return ParameterState(
            m1=self.m1, m2=self.m2, lambda1=self.lam1, lambda2=self.lam2,
            b1=self.b1, b2=self.b2, gamma0=self.g0, gamma1=self.g1, gamma2=self.g2,
            C=self.C.copy(), sigma2_phi=dict(self.s2phi), sigma2_eps=self.s2eps)

    def run(self) -> PosteriorChain:
        cfg = self.config
        n_keep = cfg.n_retained
        states = []
        kept_p0 = np.empty((n_keep, *self.grid.shape))
        kept_delta = np.empty((n_keep, *self.grid.shape))
        kept_ld = np.empty((n_keep, self.n_obs))
        kept = 0
        active = self.active
        for g in range(1, cfg.n_iter + 1):
            if "m1" in active:
                self._update_m("m1", g)
            if "m2" in active:
                self._update_m("m2", g)
            if "lambda1" in active:
                self._update_lambda("lambda1", g)
            if "lambda2" in active:
                self._update_lambda("lambda2", g)
            if "b" in active:
                self._update_b(g)
            if "gamma0" in active:
                self._update_gamma("gamma0", g)
            if "gamma1" in active:
                self._update_gamma("gamma1", g)
            if "gamma2" in active:
                self._update_gamma("gamma2", g)
            if "C" in active:
                self._update_C(g)
            for block in ("sigma2_m1", "sigma2_m2", "sigma2_gamma0",
                          "sigma2_gamma1", "sigma2_gamma2"):
                if block in active:
                    self._update_sigma_phi(block, g)
            if "sigma2_eps" in active:
                self._update_sigma_eps(g)
            if g > cfg.burn_in and (g - cfg.burn_in) % cfg.thin == 0 and kept < n_keep:
                states.append(self._snapshot_state())
                kept_p0[kept] = self.p0
                kept_delta[kept] = self.delta
                if self.n_obs:
                    resid = self.y - self.p[:, :, None]
                    kept_ld[kept] = (-0.5 * math.log(2.0 * math.pi * self.s2eps)
                                     - resid.ravel() ** 2 / (2.0 * self.s2eps))
                kept += 1
        rates = {name: (self.accepted[name] / self.proposed[name] if self.proposed[name] else 0.0)
                 for name in self.adapters}
        return PosteriorChain(
            states=states, p0=kept_p0, delta=kept_delta, obs_log_densities=kept_ld,
            accept_rates=rates, config=cfg, chain_index=self.chain_index,
            grid=self.grid, spline=self.spline, priors=self.priors,
            linear_scale=self.linear_scale)


def run_chain(data: PlateDataset, priors: PriorSpec = None, spline: SplineSpec = None,
              config: ChainConfig = None, linear_scale: str = "log10",
              update_blocks=None, prior_only: bool = False,
              initial: ParameterState = None, chain_index: int = 0) -> PosteriorChain:
    """Run one adaptive Metropolis-within-Gibbs chain on a plate.

    update_blocks restricts sampling to a subset of BLOCK_NAMES (the rest stay
    at their starting values); prior_only drops the likelihood so the chain
    targets the prior. Results are a deterministic function of
    (config.seed, chain_index).
    """
    priors = PriorSpec() if priors is None else priors
    config = ChainConfig() if config is None else config
    if spline is None:
        spline = SplineSpec.for_grid(LogConcGrid.from_dataset(data),
                                     penalty_ridge=priors.spline_penalty_ridge)
    sampler = _Sampler(data, priors, spline, config, linear_scale, update_blocks,
                       prior_only, initial, chain_index)
    return sampler.run()


def chain_from_states(data: PlateDataset, states, spline: SplineSpec = None,
                      priors: PriorSpec = None, linear_scale: str = "log10",
                      config: ChainConfig = None, chain_index: int = 0) -> PosteriorChain:
    """Rebuild a PosteriorChain from stored parameter states.

    The per-sample surfaces and observation log densities are recomputed from
    the model, so summaries derived from a samples file match the original
    run to floating-point roundoff.
    """
    from .model import (interaction_surface, mean_surface, observation_log_densities,
                        zero_interaction_surface)

    if not states:
        raise ValidationError("need at least one state")
    grid = LogConcGrid.from_dataset(data)
    priors = PriorSpec() if priors is None else priors
    if spline is None:
        spline = SplineSpec.for_grid(grid, penalty_ridge=priors.spline_penalty_ridge)
    n = len(states)
    p0 = np.empty((n, *grid.shape))
    delta = np.empty((n, *grid.shape))
    obs_ld = np.empty((n, data.n_obs))
    for idx, state in enumerate(states):
        p0[idx] = zero_interaction_surface(grid, state).values
        delta[idx] = interaction_surface(grid, state, spline, linear_scale).values
        obs_ld[idx] = observation_log_densities(
            data, p0[idx] + delta[idx], state.sigma2_eps).ravel()
    if config is None:
        config = ChainConfig(n_iter=n, burn_in=0, thin=1)
    return PosteriorChain(states=list(states), p0=p0, delta=delta,
                          obs_log_densities=obs_ld, accept_rates={}, config=config,
                          chain_index=chain_index, grid=grid, spline=spline,
                          priors=priors, linear_scale=linear_scale)


def run_chains(data: PlateDataset, n_chains: int, priors: PriorSpec = None,
               spline: SplineSpec = None, config: ChainConfig = None,
               linear_scale: str = "log10") -> list:
    """Run independent chains with per-chain RNG streams derived from the seed.

    Chain index seeds the stream, so results do not depend on execution order
    or on how many workers the host offers.
    """
    if n_chains < 1:
        raise ValidationError("n_chains must be at least 1")
    return [run_chain(data, priors=priors, spline=spline, config=config,
                      linear_scale=linear_scale, chain_index=i)
            for i in range(n_chains)]
