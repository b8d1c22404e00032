"""Exact Monte Carlo sampling of X at a random trade time.

Regime paths are simulated through the embedded jump chain with
exponential sojourns; within a sojourn of length h in regime j the
increment is Gaussian(mu_j h, sigma_j^2 h) plus a Poisson(kappa_j h) sum of
jumps. No time discretization is involved.

Batches are split into substreams whose Philox generators are keyed by
(seed, stream index), so the output depends only on (seed, streams, count).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from trade_tails.process import ModulatedModel
from trade_tails.timing import IIM, ITM, TimingModel

logger = logging.getLogger(__name__)

# Paths simulated per vectorized pass within one stream
CHUNK_SIZE = 1 << 20


@dataclass(frozen=True, eq=False)
class SampleBatch:
    """Draws of X_T with their trade times and stream provenance."""

    values: np.ndarray
    times: np.ndarray
    stream_index: np.ndarray
    seed: int
    streams: int
    timing_kind: str

    @property
    def count(self) -> int:
        return int(self.values.size)

    @property
    def prices(self) -> np.ndarray:
        return np.exp(self.values)


def stream_generator(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator for substream ``index`` of ``seed``."""
    sequence = np.random.SeedSequence(seed, spawn_key=(index,))
    return np.random.Generator(np.random.Philox(sequence))


def sample_trade_times(
    timing: TimingModel, rng: np.random.Generator, size: int
) -> np.ndarray:
    """Vectorized trade-time draws.

    IIM: type j with probability q_j, then delta times the index of the
    n-th success of Bernoulli(p_j) trials. ITM: Exp(lambda_j) plus one
    Exp(nu_h) draw per completion stage.
    """
    types = rng.choice(timing.type_count, size=size, p=timing.weights)
    if isinstance(timing, IIM):
        p = np.asarray(timing.probabilities)[types]
        failures = rng.negative_binomial(timing.successes, p)
        return timing.grid_spacing * (timing.successes + failures).astype(float)
    if isinstance(timing, ITM):
        rates = np.asarray(timing.arrival_rates)[types]
        times = rng.exponential(1.0, size=size) / rates
        for nu in timing.completion_rates:
            times += rng.exponential(1.0 / nu, size=size)
        return times
    raise TypeError(f"Unknown timing model {type(timing).__name__}")


def sample_trade_time(timing: TimingModel, rng: np.random.Generator) -> float:
    return float(sample_trade_times(timing, rng, 1)[0])


def _sojourn_increments(
    model: ModulatedModel, regimes: np.ndarray, lengths: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    increments = np.zeros(lengths.size)
    for j, regime in enumerate(model.regimes):
        mask = regimes == j
        if not mask.any():
            continue
        h = lengths[mask]
        step = regime.drift * h
        if regime.variance > 0:
            step = step + np.sqrt(regime.variance * h) * rng.standard_normal(h.size)
        if regime.jump_intensity > 0:
            counts = rng.poisson(regime.jump_intensity * h)
            step = step + regime.jump.sample_sum(rng, counts)
        increments[mask] = step
    return increments


def sample_paths(
    model: ModulatedModel, times: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Draw X_t for every horizon in ``times``, one independent path each."""
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise ValueError("Horizons must be nonnegative")
    n = model.size
    size = times.size
    state = rng.choice(n, size=size, p=model.initial)
    values = np.zeros(size)
    remaining = times.copy()

    exit_rates = -np.diag(model.generator)
    embedded = np.where(
        exit_rates[:, None] > 0,
        model.generator / np.where(exit_rates > 0, exit_rates, 1.0)[:, None],
        0.0,
    )
    np.fill_diagonal(embedded, 0.0)
    cumulative = np.cumsum(embedded, axis=1)

    active = np.flatnonzero(remaining > 0)
    while active.size:
        current = state[active]
        rate = exit_rates[current]
        with np.errstate(divide="ignore"):
            hold = np.where(rate > 0, rng.exponential(1.0, active.size) / rate, np.inf)
        left = remaining[active]
        length = np.minimum(hold, left)
        values[active] += _sojourn_increments(model, current, length, rng)
        remaining[active] = left - length

        switched = hold < left
        movers = active[switched]
        if movers.size:
            origin = state[movers]
            u = rng.random(movers.size) * cumulative[origin, -1]
            target = (u[:, None] >= cumulative[origin]).sum(axis=1)
            target = np.minimum(target, n - 1)
            if model.transition_jumps is not None:
                values[movers] += _transition_increments(model, origin, target, rng)
            state[movers] = target
        active = movers
    return values


def _transition_increments(
    model: ModulatedModel, origin: np.ndarray, target: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    increments = np.zeros(origin.size)
    for j, row in enumerate(model.transition_jumps):
        for k, transition in enumerate(row):
            if transition.probability == 0.0:
                continue
            mask = (origin == j) & (target == k)
            hits = np.flatnonzero(mask)[rng.random(int(mask.sum())) < transition.probability]
            if hits.size:
                increments[hits] += transition.jump.sample_sum(
                    rng, np.ones(hits.size, dtype=np.int64)
                )
    return increments


def sample_X_at(model: ModulatedModel, t: float, rng: np.random.Generator) -> float:
    """Single exact draw of X_t."""
    if not t > 0:
        raise ValueError(f"Time must be positive, got {t}")
    return float(sample_paths(model, np.array([t]), rng)[0])


def sample_realized_price(
    model: ModulatedModel, timing: TimingModel, rng: np.random.Generator
) -> Tuple[float, float]:
    """One draw of (X_T, T); T is independent of X given the trader type."""
    t = sample_trade_time(timing, rng)
    return float(sample_paths(model, np.array([t]), rng)[0]), t


def _run_stream(
    model: ModulatedModel, timing: TimingModel, size: int, seed: int, index: int
) -> Tuple[np.ndarray, np.ndarray]:
    rng = stream_generator(seed, index)
    values, times = [], []
    for start in range(0, size, CHUNK_SIZE):
        chunk = min(CHUNK_SIZE, size - start)
        t = sample_trade_times(timing, rng, chunk)
        values.append(sample_paths(model, t, rng))
        times.append(t)
    if not values:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(values), np.concatenate(times)


def run_batch(
    model: ModulatedModel,
    timing: TimingModel,
    count: int,
    seed: int = 0,
    streams: int = 1,
    workers: Optional[int] = None,
) -> SampleBatch:
    """Draw ``count`` realized log-prices split over ``streams`` substreams.

    Stream i receives count // streams draws plus one when i < count % streams.
    Results are concatenated in stream order whatever the thread schedule.

    Raises:
        ValueError: If count or streams is below 1 or seed is negative.
    """
    if int(count) != count or count < 1:
        raise ValueError(f"Sample count must be a positive integer, got {count}")
    if int(streams) != streams or streams < 1:
        raise ValueError(f"Stream count must be a positive integer, got {streams}")
    if int(seed) != seed or seed < 0:
        raise ValueError(f"Seed must be a nonnegative integer, got {seed}")
    count, streams, seed = int(count), int(streams), int(seed)
    sizes = [count // streams + (1 if i < count % streams else 0) for i in range(streams)]
    logger.debug("run_batch: count=%d seed=%d streams=%d", count, seed, streams)

    with ThreadPoolExecutor(max_workers=workers or min(streams, 8)) as pool:
        results = list(
            pool.map(
                lambda i: _run_stream(model, timing, sizes[i], seed, i), range(streams)
            )
        )

    values = np.concatenate([v for v, _ in results])
    times = np.concatenate([t for _, t in results])
    stream_index = np.repeat(np.arange(streams), sizes)
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("Non-finite sample values")
    for array in (values, times, stream_index):
        array.flags.writeable = False
    return SampleBatch(
        values=values,
        times=times,
        stream_index=stream_index,
        seed=seed,
        streams=streams,
        timing_kind=timing.kind,
    )


def empirical_mgf(values: np.ndarray, s: float) -> Tuple[float, float]:
    """Sample mean of e^{s X} and its standard error."""
    weights = np.exp(s * np.asarray(values, dtype=float))
    return float(weights.mean()), float(weights.std(ddof=1) / np.sqrt(weights.size))
