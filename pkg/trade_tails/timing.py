"""Trade-timing models.

IIM: trades happen on a grid of spacing delta; a type-j trader waits a
geometric (n = 1) or negative-binomial (n >= 2) number of grid steps with
success probability p_j.

ITM: the waiting time of a type-j trader is Exp(lambda_j) plus independent
Exp(nu_h) completion stages shared by all types.
"""

from dataclasses import dataclass, field
from math import comb
from typing import ClassVar, Optional, Sequence, Tuple, Union

import numpy as np

from trade_tails.erlang import ErlangSpec, density
from trade_tails.errors import TimingError

WEIGHT_TOL = 1e-12


def _normalized_weights(weights: Optional[Sequence[float]], count: int) -> np.ndarray:
    if weights is None:
        values = np.full(count, 1.0 / count)
    else:
        values = np.array(weights, dtype=float)
    if values.shape != (count,):
        raise TimingError(f"Expected {count} weights, got {len(values)}")
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise TimingError(f"Weights must be positive, got {values.tolist()}")
    if abs(values.sum() - 1.0) > WEIGHT_TOL:
        raise TimingError(f"Weights must sum to 1, got {values.sum():.15g}")
    values.flags.writeable = False
    return values


def _strictly_increasing(values: Sequence[float]) -> bool:
    return all(a < b for a, b in zip(values, values[1:]))


@dataclass(frozen=True, eq=False)
class IIM:
    """Intertrade-incidence timing.

    Attributes:
        probabilities: Trade probabilities p_1 < ... < p_tau in (0, 1).
        weights: Type weights q_j (default uniform).
        successes: Trade index n; T is the n-th success.
        grid_spacing: Latent time per grid step.
    """

    probabilities: Tuple[float, ...]
    weights: Optional[np.ndarray] = None
    successes: int = 1
    grid_spacing: float = 1.0
    kind: ClassVar[str] = "iim"

    def __post_init__(self):
        probabilities = tuple(float(p) for p in self.probabilities)
        if not probabilities:
            raise TimingError("At least one trade probability is required")
        if not all(0.0 < p < 1.0 for p in probabilities):
            raise TimingError(
                f"Trade probabilities must lie in (0, 1), got {list(probabilities)}"
            )
        if not _strictly_increasing(probabilities):
            raise TimingError(
                f"Trade probabilities must be strictly increasing, got {list(probabilities)}"
            )
        if isinstance(self.successes, bool) or int(self.successes) != self.successes:
            raise TimingError(f"Success count must be an integer, got {self.successes}")
        if self.successes < 1:
            raise TimingError(f"Success count must be >= 1, got {self.successes}")
        if not (np.isfinite(self.grid_spacing) and self.grid_spacing > 0):
            raise TimingError(f"Grid spacing must be positive, got {self.grid_spacing}")
        object.__setattr__(self, "probabilities", probabilities)
        object.__setattr__(
            self, "weights", _normalized_weights(self.weights, len(probabilities))
        )
        object.__setattr__(self, "successes", int(self.successes))
        object.__setattr__(self, "grid_spacing", float(self.grid_spacing))

    @property
    def type_count(self) -> int:
        return len(self.probabilities)

    @property
    def target_level(self) -> float:
        """-log(1 - p_1), the eigenvalue level fixing the tail exponent."""
        return -float(np.log1p(-self.probabilities[0]))

    @property
    def case_label(self) -> str:
        return "IIM-geometric" if self.successes == 1 else "IIM-negbin"

    @property
    def mean(self) -> float:
        return self.grid_spacing * self.successes * float(
            np.sum(self.weights / np.asarray(self.probabilities))
        )


@dataclass(frozen=True, eq=False)
class ITM:
    """Intertrade-time timing.

    Attributes:
        arrival_rates: Arrival intensities lambda_1 < ... < lambda_tau.
        weights: Type weights q_j (default uniform).
        completion_rates: Rates nu_h of the completion stages (may be empty).
    """

    arrival_rates: Tuple[float, ...]
    weights: Optional[np.ndarray] = None
    completion_rates: Tuple[float, ...] = ()
    type_specs: Tuple[ErlangSpec, ...] = field(init=False, repr=False)
    kind: ClassVar[str] = "itm"

    def __post_init__(self):
        arrivals = tuple(float(r) for r in self.arrival_rates)
        completions = tuple(float(r) for r in self.completion_rates)
        if not arrivals:
            raise TimingError("At least one arrival rate is required")
        if not all(np.isfinite(r) and r > 0 for r in arrivals):
            raise TimingError(f"Arrival rates must be positive, got {list(arrivals)}")
        if not _strictly_increasing(arrivals):
            raise TimingError(
                f"Arrival rates must be strictly increasing, got {list(arrivals)}"
            )
        if not all(np.isfinite(r) and r > 0 for r in completions):
            raise TimingError(
                f"Completion rates must be positive, got {list(completions)}"
            )
        object.__setattr__(self, "arrival_rates", arrivals)
        object.__setattr__(self, "completion_rates", completions)
        object.__setattr__(
            self, "weights", _normalized_weights(self.weights, len(arrivals))
        )
        object.__setattr__(
            self,
            "type_specs",
            tuple(ErlangSpec.from_rates((rate,) + completions) for rate in arrivals),
        )

    @property
    def type_count(self) -> int:
        return len(self.arrival_rates)

    @property
    def grid_spacing(self) -> float:
        return 1.0

    @property
    def mean(self) -> float:
        stages = sum(1.0 / nu for nu in self.completion_rates)
        return float(np.sum(self.weights / np.asarray(self.arrival_rates))) + stages


TimingModel = Union[IIM, ITM]


def trade_time_density(
    timing: TimingModel, t: Union[float, Sequence[float]]
) -> Union[float, np.ndarray]:
    """Law of the trade time T evaluated at t.

    For IIM this is the probability mass P(T = t), zero off the grid
    {n delta, (n+1) delta, ...}; for ITM it is the mixture density.
    """
    scalar = np.ndim(t) == 0
    times = np.atleast_1d(np.asarray(t, dtype=float))
    value = np.zeros_like(times)
    if isinstance(timing, ITM):
        if np.any(times <= 0):
            raise ValueError("Density is evaluated at positive times only")
        for q, spec in zip(timing.weights, timing.type_specs):
            value += q * density(spec, times)
    else:
        n = timing.successes
        for i, step in enumerate(times / timing.grid_spacing):
            k = int(np.rint(step))
            if k < n or abs(step - k) > 1e-9 * max(1.0, k):
                continue
            value[i] = sum(
                q * comb(k - 1, n - 1) * p**n * (1.0 - p) ** (k - n)
                for q, p in zip(timing.weights, timing.probabilities)
            )
    return float(value[0]) if scalar else value
