"""Fitting the hierarchical model: sampler orchestration and draw containers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, FitError
from .design import Design, Standardization
from .diagnostics import Diagnostics, diagnose
from .model import HierarchicalLogitModel, ModelConfig
from .nuts import SampleResult, run_nuts

# Hard gate: a sampler run with more than this fraction of divergent
# transitions is not trustworthy and fails loudly.
MAX_DIVERGENCE_RATE = 0.05


@dataclass
class PosteriorDraws:
    """Posterior samples for all model parameters plus unscaling metadata.

    mu and sigma are (total draws, features) on the standardized scale; z is
    (total draws, respondents, features). Individual coefficients reconstruct
    as mu + sigma * z. The standardization is carried so downstream code can
    return to dollar units.
    """

    columns: tuple[str, ...]
    price_column: str
    respondent_ids: tuple[int, ...]
    mu: np.ndarray
    sigma: np.ndarray
    z: np.ndarray
    standardization: Standardization
    chain_index: np.ndarray
    divergent: np.ndarray
    config: ModelConfig
    seed: int

    @property
    def n_draws(self) -> int:
        return self.mu.shape[0]

    @property
    def n_features(self) -> int:
        return self.mu.shape[1]

    @property
    def price_index(self) -> int:
        return self.columns.index(self.price_column)

    def feature_index(self, feature: str) -> int:
        try:
            return self.columns.index(feature)
        except ValueError:
            raise ContractError(f"unknown feature column {feature!r}") from None

    def respondent_position(self, respondent_id: int) -> int:
        try:
            return self.respondent_ids.index(respondent_id)
        except ValueError:
            raise ContractError(f"respondent {respondent_id} was not in the fitted dataset") from None

    def individual_beta(self, respondent_id: int) -> np.ndarray:
        """Standardized per-draw coefficients for one respondent."""
        pos = self.respondent_position(respondent_id)
        return self.mu + self.sigma * self.z[:, pos, :]


def split_draws(model: HierarchicalLogitModel, result: SampleResult):
    """Unpack raw sampler output into mu / sigma / z arrays."""
    f = model.n_features
    r = model.n_respondents
    flat = result.flat()
    mu = flat[:, :f]
    sigma = np.exp(flat[:, f : 2 * f])
    z = flat[:, 2 * f :].reshape(flat.shape[0], r, f)
    return mu, sigma, z


def sample(
    design: Design, config: ModelConfig, *, workers: int | None = None
) -> tuple[PosteriorDraws, Diagnostics]:
    """Fit the hierarchical logit to a built design via NUTS.

    Runs config.chains independent chains (optionally in parallel; results
    are identical either way), gates on the divergence rate, and attaches
    convergence diagnostics. R-hat above 1.05 on a population parameter is
    reported as a warning, not an error.
    """
    model = HierarchicalLogitModel(design, config)
    result = run_nuts(
        model,
        chains=config.chains,
        warmup=config.warmup_per_chain,
        draws=config.draws_per_chain,
        target_accept=config.target_accept,
        max_treedepth=config.max_treedepth,
        seed=config.seed,
        workers=workers,
    )
    divergent = np.concatenate([s.divergent for s in result.stats])
    rate = float(divergent.mean())
    if rate > MAX_DIVERGENCE_RATE:
        raise FitError(
            f"{rate:.1%} of post-warmup transitions diverged (limit {MAX_DIVERGENCE_RATE:.0%}); "
            "consider raising target_accept or reparameterizing"
        )
    diagnostics = diagnose(
        result.draws,
        model.parameter_names(),
        divergent,
        tuple(s.mean_accept for s in result.stats),
    )
    mu, sigma, z = split_draws(model, result)
    chain_index = np.repeat(np.arange(config.chains), config.draws_per_chain)
    draws = PosteriorDraws(
        columns=design.columns,
        price_column=design.price_column,
        respondent_ids=design.respondent_ids,
        mu=mu,
        sigma=sigma,
        z=z,
        standardization=design.standardization,
        chain_index=chain_index,
        divergent=divergent,
        config=config,
        seed=config.seed,
    )
    return draws, diagnostics
