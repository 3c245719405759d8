"""No-U-Turn sampler: dynamic multinomial trajectories over a diagonal metric.

One transition samples a momentum, then repeatedly doubles a leapfrog
trajectory in a random direction until the generalized U-turn criterion
fires, a divergence is hit, or the tree-depth cap is reached. States are
selected multinomially by density within each new subtree and merged into
the running proposal with the biased-progressive rule, which prefers states
far from the start.

Warmup follows the windowed schedule: an initial step-size-only buffer,
expanding windows that re-estimate the diagonal metric from the warmup
draws (step size re-initialized and dual averaging restarted at every
window close), and a final step-size-only buffer. Post-warmup, the step
size is frozen at the dual-averaged value.

Chains are independent given (seed, chain index), so serial and parallel
execution produce bit-identical results.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, FitError
from ..rng import CHAIN_STREAM, substream

# Energy error that flags a transition as divergent (leapfrog blow-up).
DIVERGENCE_THRESHOLD = 1000.0

_MAX_INIT_TRIES = 100

# Warmup layout: step-size-only buffers around expanding metric windows.
_INIT_BUFFER = 75
_TERM_BUFFER = 50
_BASE_WINDOW = 25


@dataclass
class ChainStats:
    """Per-draw sampler statistics for one chain (post-warmup only)."""

    accept_stat: np.ndarray
    divergent: np.ndarray
    energy: np.ndarray
    energy_error: np.ndarray
    tree_depth: np.ndarray
    n_leapfrog: np.ndarray
    step_size: float
    inv_mass: np.ndarray

    @property
    def mean_accept(self) -> float:
        return float(self.accept_stat.mean()) if self.accept_stat.size else math.nan


@dataclass
class SampleResult:
    """Draws stacked as (chains, draws, dim) plus per-chain statistics."""

    draws: np.ndarray
    stats: list[ChainStats]

    @property
    def n_chains(self) -> int:
        return self.draws.shape[0]

    def flat(self) -> np.ndarray:
        return self.draws.reshape(-1, self.draws.shape[2])


class _Hamiltonian:
    def __init__(self, log_posterior, inv_mass: np.ndarray):
        self.log_posterior = log_posterior
        self.inv_mass = inv_mass
        self.momentum_sd = 1.0 / np.sqrt(inv_mass)

    def sample_momentum(self, rng: np.random.Generator) -> np.ndarray:
        return rng.standard_normal(self.inv_mass.shape[0]) * self.momentum_sd

    def energy(self, logp: float, p: np.ndarray) -> float:
        return -logp + 0.5 * float(p * p @ self.inv_mass)

    def velocity(self, p: np.ndarray) -> np.ndarray:
        return self.inv_mass * p

    def leapfrog(self, q, p, grad, step):
        p_half = p + 0.5 * step * grad
        q_new = q + step * self.velocity(p_half)
        logp_new, grad_new = self.log_posterior(q_new)
        p_new = p_half + 0.5 * step * grad_new
        return q_new, p_new, grad_new, logp_new


class _Tree:
    __slots__ = (
        "left",
        "right",
        "prop_q",
        "prop_grad",
        "prop_logp",
        "prop_energy",
        "log_sum_weight",
        "rho",
        "sum_accept",
        "n_states",
        "n_leapfrog",
        "divergent",
        "turning",
    )

    def __init__(self, **kw):
        for name, value in kw.items():
            setattr(self, name, value)


def _is_turning(ham: _Hamiltonian, rho: np.ndarray, p_left: np.ndarray, p_right: np.ndarray) -> bool:
    return float(ham.velocity(p_left) @ rho) <= 0.0 or float(ham.velocity(p_right) @ rho) <= 0.0


def _build_tree(ham, depth, state, direction, step, h0, rng) -> _Tree:
    q, p, grad, _logp = state
    if depth == 0:
        q1, p1, grad1, logp1 = ham.leapfrog(q, p, grad, direction * step)
        h = ham.energy(logp1, p1)
        delta = h - h0
        if not math.isfinite(h):
            divergent = True
            delta = math.inf
        else:
            divergent = delta > DIVERGENCE_THRESHOLD
        leaf = (q1, p1, grad1, logp1)
        return _Tree(
            left=leaf,
            right=leaf,
            prop_q=q1,
            prop_grad=grad1,
            prop_logp=logp1,
            prop_energy=h,
            log_sum_weight=-delta if not divergent else -math.inf,
            rho=p1.copy(),
            sum_accept=math.exp(min(0.0, -delta)) if math.isfinite(delta) else 0.0,
            n_states=1,
            n_leapfrog=1,
            divergent=divergent,
            turning=False,
        )

    inner = _build_tree(ham, depth - 1, state, direction, step, h0, rng)
    if inner.divergent or inner.turning:
        return inner
    start = inner.right if direction > 0 else inner.left
    outer = _build_tree(ham, depth - 1, start, direction, step, h0, rng)

    tree = _Tree(
        left=inner.left if direction > 0 else outer.left,
        right=outer.right if direction > 0 else inner.right,
        prop_q=inner.prop_q,
        prop_grad=inner.prop_grad,
        prop_logp=inner.prop_logp,
        prop_energy=inner.prop_energy,
        log_sum_weight=np.logaddexp(inner.log_sum_weight, outer.log_sum_weight),
        rho=inner.rho + outer.rho,
        sum_accept=inner.sum_accept + outer.sum_accept,
        n_states=inner.n_states + outer.n_states,
        n_leapfrog=inner.n_leapfrog + outer.n_leapfrog,
        divergent=outer.divergent,
        turning=outer.turning,
    )
    if tree.divergent or tree.turning:
        return tree
    # uniform multinomial selection between the two halves
    if math.log(rng.random()) < outer.log_sum_weight - tree.log_sum_weight:
        tree.prop_q = outer.prop_q
        tree.prop_grad = outer.prop_grad
        tree.prop_logp = outer.prop_logp
        tree.prop_energy = outer.prop_energy
    tree.turning = _is_turning(ham, tree.rho, tree.left[1], tree.right[1])
    return tree


def _transition(ham, q, grad, logp, step, max_depth, rng):
    p0 = ham.sample_momentum(rng)
    h0 = ham.energy(logp, p0)
    state = (q, p0, grad, logp)
    left = right = state
    prop_q, prop_grad, prop_logp, prop_energy = q, grad, logp, h0
    rho = p0.copy()
    log_sum_weight = 0.0
    sum_accept = 0.0
    n_states = 0
    n_leapfrog = 0
    divergent = False
    depth = 0
    while depth < max_depth:
        direction = 1 if rng.random() < 0.5 else -1
        edge = right if direction > 0 else left
        tree = _build_tree(ham, depth, edge, direction, step, h0, rng)
        sum_accept += tree.sum_accept
        n_states += tree.n_states
        n_leapfrog += tree.n_leapfrog
        if tree.divergent:
            divergent = True
            break
        if tree.turning:
            break
        # biased progressive: prefer the new half of the trajectory
        if math.log(rng.random()) < tree.log_sum_weight - log_sum_weight:
            prop_q, prop_grad, prop_logp, prop_energy = (
                tree.prop_q,
                tree.prop_grad,
                tree.prop_logp,
                tree.prop_energy,
            )
        log_sum_weight = np.logaddexp(log_sum_weight, tree.log_sum_weight)
        if direction > 0:
            right = tree.right
        else:
            left = tree.left
        rho = rho + tree.rho
        depth += 1
        if _is_turning(ham, rho, left[1], right[1]):
            break
    accept_stat = sum_accept / n_states if n_states else 0.0
    return (
        prop_q,
        prop_grad,
        prop_logp,
        accept_stat,
        divergent,
        depth,
        n_leapfrog,
        prop_energy,
        prop_energy - h0,
    )


def _find_reasonable_step_size(ham, q, grad, logp, rng) -> float:
    """Double/halve until one leapfrog step has acceptance near 0.5."""
    step = 1.0
    p = ham.sample_momentum(rng)
    h0 = ham.energy(logp, p)

    def accept_logprob(eps: float) -> float:
        _, p1, _, logp1 = ham.leapfrog(q, p, grad, eps)
        h1 = ham.energy(logp1, p1)
        return h0 - h1 if math.isfinite(h1) else -math.inf

    a0 = accept_logprob(step)
    direction = 1.0 if a0 > math.log(0.5) else -1.0
    for _ in range(100):
        a = accept_logprob(step)
        if direction > 0 and not (a > math.log(0.5)):
            break
        if direction < 0 and not (a < math.log(0.5)):
            break
        step *= 2.0**direction
        if step > 1e7 or step < 1e-10:
            break
    return step


class _DualAveraging:
    """Nesterov dual averaging on log step size, targeting an accept rate."""

    def __init__(self, step0: float, target: float, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * step0)
        self.target = target
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.count = 0
        self.h_bar = 0.0
        self.log_step = math.log(step0)
        self.log_step_bar = math.log(step0)

    def update(self, accept_stat: float) -> float:
        self.count += 1
        w = 1.0 / (self.count + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - min(accept_stat, 1.0))
        self.log_step = self.mu - math.sqrt(self.count) / self.gamma * self.h_bar
        eta = self.count**-self.kappa
        self.log_step_bar = eta * self.log_step + (1.0 - eta) * self.log_step_bar
        return math.exp(self.log_step)

    def adapted(self) -> float:
        return math.exp(self.log_step_bar)


class _RunningVariance:
    """Welford accumulator with Stan-style shrinkage toward a small diagonal."""

    def __init__(self, dim: int):
        self.n = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def add(self, x: np.ndarray) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    def regularized_variance(self) -> np.ndarray:
        if self.n < 2:
            return np.ones_like(self.mean)
        var = self.m2 / (self.n - 1)
        w = self.n / (self.n + 5.0)
        return w * var + 1e-3 * (1.0 - w)


def _adaptation_windows(
    warmup: int, init_buffer=_INIT_BUFFER, term_buffer=_TERM_BUFFER, base_window=_BASE_WINDOW
) -> list[int]:
    """Iteration indices (1-based) at which the metric is re-estimated."""
    if warmup < init_buffer + term_buffer + base_window:
        return []
    ends = []
    start, width = init_buffer, base_window
    boundary = warmup - term_buffer
    while start + width <= boundary:
        end = start + width
        if end + 2 * width > boundary:
            end = boundary
        ends.append(end)
        start = end
        width *= 2
    return ends


def _run_chain(args):
    model, warmup, draws, target_accept, max_depth, seed, chain_idx = args
    rng = substream(seed, CHAIN_STREAM, chain_idx)
    dim = model.dim

    q = model.initial_position(rng)
    logp, grad = model.log_posterior(q)
    tries = 0
    while not math.isfinite(logp):
        tries += 1
        if tries > _MAX_INIT_TRIES:
            raise FitError("could not find a finite starting point for the sampler")
        q = model.initial_position(rng)
        logp, grad = model.log_posterior(q)

    ham = _Hamiltonian(model.log_posterior, np.ones(dim))
    step = _find_reasonable_step_size(ham, q, grad, logp, rng)
    averager = _DualAveraging(step, target_accept)
    windows = _adaptation_windows(warmup)
    window_set = set(windows)
    slow_start = _INIT_BUFFER if windows else warmup
    slow_end = windows[-1] if windows else 0
    welford = _RunningVariance(dim)

    for m in range(1, warmup + 1):
        q, grad, logp, accept, *_ = _transition(ham, q, grad, logp, step, max_depth, rng)
        step = averager.update(accept)
        if slow_start < m <= slow_end:
            welford.add(q)
        if m in window_set:
            ham = _Hamiltonian(model.log_posterior, welford.regularized_variance())
            welford = _RunningVariance(dim)
            step = _find_reasonable_step_size(ham, q, grad, logp, rng)
            averager = _DualAveraging(step, target_accept)
    if warmup > 0:
        step = averager.adapted()

    out = np.empty((draws, dim))
    accept_stat = np.empty(draws)
    divergent = np.zeros(draws, dtype=bool)
    energy = np.empty(draws)
    energy_error = np.empty(draws)
    tree_depth = np.empty(draws, dtype=np.int64)
    n_leapfrog = np.empty(draws, dtype=np.int64)
    for s in range(draws):
        q, grad, logp, accept, div, depth, leap, h, h_err = _transition(
            ham, q, grad, logp, step, max_depth, rng
        )
        out[s] = q
        accept_stat[s] = accept
        divergent[s] = div
        energy[s] = h
        energy_error[s] = h_err
        tree_depth[s] = depth
        n_leapfrog[s] = leap
    stats = ChainStats(
        accept_stat=accept_stat,
        divergent=divergent,
        energy=energy,
        energy_error=energy_error,
        tree_depth=tree_depth,
        n_leapfrog=n_leapfrog,
        step_size=step,
        inv_mass=ham.inv_mass,
    )
    return out, stats


def resolve_workers(chains: int, workers: int | None = None) -> int:
    """Worker count: explicit argument, else CONJOINT_WTP_THREADS, else CPUs."""
    if workers is None:
        env = os.environ.get("CONJOINT_WTP_THREADS", "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"CONJOINT_WTP_THREADS must be an integer, got {env!r}") from None
        else:
            workers = os.cpu_count() or 1
    return max(1, min(chains, workers))


def run_nuts(
    model,
    *,
    chains: int,
    warmup: int,
    draws: int,
    target_accept: float,
    max_treedepth: int,
    seed: int,
    workers: int | None = None,
) -> SampleResult:
    """Run independent NUTS chains over `model.log_posterior`.

    The model must expose dim, log_posterior(theta) -> (logp, grad), and
    initial_position(rng). Results are identical whether chains run serially
    or in a process pool.
    """
    jobs = [
        (model, warmup, draws, target_accept, max_treedepth, seed, chain_idx)
        for chain_idx in range(chains)
    ]
    n_workers = resolve_workers(chains, workers)
    if n_workers > 1:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]
    draws_out = np.stack([r[0] for r in results])
    return SampleResult(draws=draws_out, stats=[r[1] for r in results])
