"""Log-posterior targets for the gradient-based sampler.

Two targets are provided. HierarchicalLogitModel is the production model:
per-respondent coefficient vectors drawn from population normals, written in
the non-centered form beta_i = mu + sigma * z_i (z standard normal) so the
sampler never sees the funnel that sparse per-respondent data would induce.
Population SDs are sampled on the log scale with the Jacobian folded into
the density. FlatLogitModel is a pooled logit with normal priors, used for
oracle comparisons and prior-recovery checks.

Both expose log_posterior(theta) -> (value, gradient) with exact analytic
gradients; the sampler treats a non-finite value as an off-support point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import expit

from ..errors import ContractError
from .design import Design

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self) -> None:
        if not (self.sd > 0):
            raise ContractError(f"prior sd must be positive, got {self.sd}")


@dataclass(frozen=True)
class ModelConfig:
    """Priors (standardized scale) and sampler settings."""

    prior_mu_price: NormalPrior = NormalPrior(-1.0, 1.0)
    prior_mu_feature: NormalPrior = NormalPrior(0.0, 2.0)
    prior_sigma_sd: float = 1.0
    chains: int = 4
    draws_per_chain: int = 2000
    warmup_per_chain: int = 1000
    target_accept: float = 0.8
    max_treedepth: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if self.chains < 1:
            raise ContractError(f"chains must be >= 1, got {self.chains}")
        if self.draws_per_chain < 1:
            raise ContractError(f"draws_per_chain must be >= 1, got {self.draws_per_chain}")
        if self.warmup_per_chain < 0:
            raise ContractError(f"warmup_per_chain must be >= 0, got {self.warmup_per_chain}")
        if not (0.0 < self.target_accept < 1.0):
            raise ContractError(f"target_accept must be in (0, 1), got {self.target_accept}")
        if not (self.prior_sigma_sd > 0):
            raise ContractError(f"prior_sigma_sd must be positive, got {self.prior_sigma_sd}")
        if self.max_treedepth < 1:
            raise ContractError(f"max_treedepth must be >= 1, got {self.max_treedepth}")
        if self.seed < 0:
            raise ContractError(f"seed must be non-negative, got {self.seed}")

    def override(self, **kwargs) -> "ModelConfig":
        return replace(self, **kwargs)


def _bernoulli_loglik_and_score(eta: np.ndarray, y: np.ndarray, sgn: np.ndarray):
    loglik = -np.logaddexp(0.0, -sgn * eta).sum()
    score = y - expit(eta)
    return loglik, score


class HierarchicalLogitModel:
    """Non-centered hierarchical logit over standardized choice differences.

    Unconstrained parameter vector: [mu (F), log_sigma (F), z (R*F row-major)].
    """

    def __init__(self, design: Design, config: ModelConfig):
        self.design = design
        self.config = config
        self.n_features = design.n_features
        self.n_respondents = design.n_respondents
        self.x = design.x
        self.y = design.choices.astype(np.float64)
        self.sgn = 2.0 * self.y - 1.0
        self.resp_index = design.respondent_index
        self.row_starts = design.row_starts
        price = design.price_index
        self.prior_mean = np.array(
            [
                config.prior_mu_price.mean if j == price else config.prior_mu_feature.mean
                for j in range(self.n_features)
            ]
        )
        self.prior_sd = np.array(
            [
                config.prior_mu_price.sd if j == price else config.prior_mu_feature.sd
                for j in range(self.n_features)
            ]
        )
        self.sigma_tau = config.prior_sigma_sd
        f, r = self.n_features, self.n_respondents
        self._mu_const = -0.5 * f * _LOG_2PI - np.log(self.prior_sd).sum()
        self._z_const = -0.5 * r * f * _LOG_2PI
        self._sigma_const = f * (0.5 * math.log(2.0 / math.pi) - math.log(self.sigma_tau))

    @property
    def dim(self) -> int:
        return self.n_features * (2 + self.n_respondents)

    def unpack(self, theta: np.ndarray):
        f, r = self.n_features, self.n_respondents
        mu = theta[:f]
        log_sigma = theta[f : 2 * f]
        z = theta[2 * f :].reshape(r, f)
        return mu, log_sigma, z

    def pack(self, mu: np.ndarray, log_sigma: np.ndarray, z: np.ndarray) -> np.ndarray:
        return np.concatenate([mu, log_sigma, z.reshape(-1)])

    def parameter_names(self) -> list[str]:
        cols = self.design.columns
        names = [f"mu[{c}]" for c in cols] + [f"sigma[{c}]" for c in cols]
        for rid in self.design.respondent_ids:
            names.extend(f"z[{rid},{c}]" for c in cols)
        return names

    def log_posterior(self, theta: np.ndarray):
        f = self.n_features
        mu, log_sigma, z = self.unpack(theta)
        with np.errstate(over="ignore"):
            sigma = np.exp(log_sigma)
        if not np.all(np.isfinite(sigma)):
            return -np.inf, np.zeros_like(theta)

        beta = mu + sigma * z
        if self.x.shape[0] > 0:
            eta = np.einsum("nf,nf->n", self.x, beta[self.resp_index])
            loglik, score = _bernoulli_loglik_and_score(eta, self.y, self.sgn)
            grad_beta = np.add.reduceat(self.x * score[:, None], self.row_starts, axis=0)
        else:
            loglik = 0.0
            grad_beta = np.zeros_like(z)

        mu_resid = (mu - self.prior_mean) / self.prior_sd
        tau2 = self.sigma_tau**2
        logp = (
            loglik
            + self._mu_const
            - 0.5 * (mu_resid**2).sum()
            + self._sigma_const
            - 0.5 * (sigma**2).sum() / tau2
            + log_sigma.sum()
            + self._z_const
            - 0.5 * (z**2).sum()
        )
        if not np.isfinite(logp):
            return -np.inf, np.zeros_like(theta)

        grad_mu = grad_beta.sum(axis=0) - mu_resid / self.prior_sd
        grad_log_sigma = (grad_beta * z).sum(axis=0) * sigma - sigma**2 / tau2 + 1.0
        grad_z = grad_beta * sigma - z
        grad = np.concatenate([grad_mu, grad_log_sigma, grad_z.reshape(-1)])
        if not np.all(np.isfinite(grad)):
            return -np.inf, np.zeros_like(theta)
        return float(logp), grad

    def log_likelihood_beta(self, beta: np.ndarray) -> float:
        """Likelihood at explicit per-respondent coefficients (centered form)."""
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.n_respondents, self.n_features):
            raise ContractError(
                f"beta has shape {beta.shape}, expected {(self.n_respondents, self.n_features)}"
            )
        if self.x.shape[0] == 0:
            return 0.0
        eta = np.einsum("nf,nf->n", self.x, beta[self.resp_index])
        loglik, _ = _bernoulli_loglik_and_score(eta, self.y, self.sgn)
        return float(loglik)

    def initial_position(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, self.dim)


class FlatLogitModel:
    """Pooled logit: one shared coefficient vector with normal priors."""

    def __init__(
        self,
        x: np.ndarray,
        choices: np.ndarray,
        prior_mean: np.ndarray,
        prior_sd: np.ndarray,
    ):
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(choices, dtype=float)
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ContractError(
                f"design {self.x.shape} and choices {self.y.shape} do not line up"
            )
        self.sgn = 2.0 * self.y - 1.0
        self.prior_mean = np.asarray(prior_mean, dtype=float)
        self.prior_sd = np.asarray(prior_sd, dtype=float)
        if self.prior_mean.shape != (self.x.shape[1],) or self.prior_sd.shape != (self.x.shape[1],):
            raise ContractError("prior vectors must have one entry per design column")
        if not np.all(self.prior_sd > 0):
            raise ContractError("prior sds must be positive")
        self._const = -0.5 * self.x.shape[1] * _LOG_2PI - np.log(self.prior_sd).sum()

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def log_posterior(self, theta: np.ndarray):
        resid = (theta - self.prior_mean) / self.prior_sd
        logp = self._const - 0.5 * (resid**2).sum()
        grad = -resid / self.prior_sd
        if self.x.shape[0] > 0:
            eta = self.x @ theta
            loglik, score = _bernoulli_loglik_and_score(eta, self.y, self.sgn)
            logp += loglik
            grad = grad + self.x.T @ score
        if not np.isfinite(logp):
            return -np.inf, np.zeros_like(theta)
        return float(logp), grad

    def initial_position(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, self.dim)
