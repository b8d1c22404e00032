"""Generalized Erlang distributions.

A sum of independent Erlang blocks with distinct rates a_1 < ... < a_D and
shapes b_1, ..., b_D has density

    f(t) = sum_k sum_l c_{k,l} t^{l-1} e^{-a_k t} / (l-1)!

with explicit partial-fraction coefficients c_{k,l}.
"""

import logging
from dataclasses import dataclass
from math import comb
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.special import gammaln

from trade_tails.errors import (
    DomainViolationError,
    EmptyInputError,
    NotIrreducibleError,
    ShapeCapExceededError,
)
from trade_tails.spectral import dominant_eigen, spectral_abscissa

logger = logging.getLogger(__name__)

# Relative tolerance under which two rates count as equal
MERGE_RTOL = 1e-9
# Largest supported total shape
SHAPE_CAP = 30
# Relative rate gap below which the coefficients lose accuracy
CONDITIONING_GAP = 1e-3


def rates_equal(a: float, b: float) -> bool:
    return abs(a - b) <= MERGE_RTOL * max(abs(a), abs(b))


def merge_rates(rates: Sequence[float]) -> List[Tuple[float, int]]:
    """Collapse a rate list into sorted (rate, multiplicity) pairs.

    Rates equal to within a relative 1e-9 are merged onto the smallest one.

    Raises:
        EmptyInputError: If no rates are given.
        ValueError: If a rate is not a positive finite number.
    """
    if len(rates) == 0:
        raise EmptyInputError("At least one rate is required")
    values = sorted(float(r) for r in rates)
    if not (values[0] > 0 and np.isfinite(values[-1])):
        raise ValueError(f"Rates must be positive and finite, got {list(rates)}")
    merged: List[Tuple[float, int]] = []
    for value in values:
        if merged and rates_equal(merged[-1][0], value):
            merged[-1] = (merged[-1][0], merged[-1][1] + 1)
        else:
            merged.append((value, 1))
    return merged


def _compositions(total: int, parts: int) -> Iterator[Tuple[int, ...]]:
    """Weak compositions of ``total`` into ``parts`` nonnegative integers.

    Odometer over the first parts-1 digits, the last digit takes the slack.
    """
    if parts == 0:
        if total == 0:
            yield ()
        return
    digits = [0] * parts
    running = 0
    while True:
        digits[-1] = total - running
        yield tuple(digits)
        i = parts - 2
        while i >= 0:
            digits[i] += 1
            running += 1
            if running <= total:
                break
            running -= digits[i]
            digits[i] = 0
            i -= 1
        if i < 0:
            return


def erlang_coefficients(
    rates: Sequence[float], shapes: Sequence[int]
) -> Tuple[np.ndarray, ...]:
    """Coefficient table c_{k,l} of a generalized Erlang density.

    Args:
        rates: Distinct positive rates.
        shapes: Positive integer shape per rate.

    Returns:
        Tuple whose k-th entry holds c_{k,1}, ..., c_{k,b_k}.

    Raises:
        ShapeCapExceededError: If the total shape exceeds 30.
        EmptyInputError: If no rates are given.
        ValueError: On mismatched lengths, repeated rates or invalid shapes.
    """
    rates = [float(a) for a in rates]
    shapes = [int(b) for b in shapes]
    if not rates:
        raise EmptyInputError("At least one rate is required")
    if len(rates) != len(shapes):
        raise ValueError(f"Got {len(rates)} rates but {len(shapes)} shapes")
    if any(b < 1 for b in shapes):
        raise ValueError(f"Shapes must be positive integers, got {shapes}")
    if sum(shapes) > SHAPE_CAP:
        raise ShapeCapExceededError(
            f"Total shape {sum(shapes)} exceeds the cap of {SHAPE_CAP}"
        )
    if any(a <= 0 for a in rates):
        raise ValueError(f"Rates must be positive, got {rates}")
    n_rates = len(rates)
    for i in range(n_rates):
        for j in range(i + 1, n_rates):
            if rates_equal(rates[i], rates[j]):
                raise ValueError(f"Rates must be distinct, got {rates}")

    if n_rates > 1:
        ordered = sorted(rates)
        gap = min(b - a for a, b in zip(ordered, ordered[1:]))
        if gap < CONDITIONING_GAP * ordered[-1]:
            logger.warning(
                "Erlang coefficients ill-conditioned: rate gap %.3g against max rate %.3g",
                gap,
                ordered[-1],
            )

    prefactor = float(np.prod([a**b for a, b in zip(rates, shapes)]))
    table = []
    for k, (a_k, b_k) in enumerate(zip(rates, shapes)):
        others = [(a, b) for m, (a, b) in enumerate(zip(rates, shapes)) if m != k]
        row = np.zeros(b_k)
        for order in range(1, b_k + 1):
            total = b_k - order
            acc = 0.0
            for d in _compositions(total, len(others)):
                term = 1.0
                for (a_m, b_m), d_m in zip(others, d):
                    term *= comb(b_m + d_m - 1, d_m) / (a_m - a_k) ** (b_m + d_m)
                acc += term
            row[order - 1] = prefactor * (-1) ** total * acc
        row.flags.writeable = False
        table.append(row)
    return tuple(table)


@dataclass(frozen=True, eq=False)
class ErlangSpec:
    """Distinct rates, their shapes and the density coefficient table."""

    rates: Tuple[float, ...]
    shapes: Tuple[int, ...]
    coefficients: Tuple[np.ndarray, ...]

    @classmethod
    def from_blocks(cls, rates: Sequence[float], shapes: Sequence[int]) -> "ErlangSpec":
        order = np.argsort(rates)
        rates = tuple(float(rates[i]) for i in order)
        shapes = tuple(int(shapes[i]) for i in order)
        return cls(rates, shapes, erlang_coefficients(rates, shapes))

    @classmethod
    def from_rates(cls, rates: Sequence[float]) -> "ErlangSpec":
        """Spec for the sum of independent exponentials with the given rates."""
        merged = merge_rates(rates)
        return cls.from_blocks([a for a, _ in merged], [b for _, b in merged])

    @property
    def total_shape(self) -> int:
        return sum(self.shapes)

    @property
    def mean(self) -> float:
        return sum(b / a for a, b in zip(self.rates, self.shapes))

    def coefficient(self, rate: float, order: int) -> float:
        """c_{k,order} for the block whose rate matches ``rate``, else 0."""
        for a, row in zip(self.rates, self.coefficients):
            if rates_equal(a, rate):
                return float(row[order - 1]) if 1 <= order <= len(row) else 0.0
        return 0.0

    def laplace(self, psi: complex) -> complex:
        """E[e^{psi T}] as the product of block transforms."""
        return np.prod([(a / (a - psi)) ** b for a, b in zip(self.rates, self.shapes)])


def density(spec: ErlangSpec, t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Density of the generalized Erlang law at t > 0, clipped at zero."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("Density is evaluated at positive times only")
    log_t = np.log(t_arr)
    value = np.zeros_like(t_arr)
    for a, row in zip(spec.rates, spec.coefficients):
        for order, c in enumerate(row, start=1):
            if c == 0.0:
                continue
            value = value + c * np.exp((order - 1) * log_t - a * t_arr - gammaln(order))
    value = np.maximum(value, 0.0)
    return float(value) if value.ndim == 0 else value


def _abscissa(A: np.ndarray) -> float:
    if np.isrealobj(A):
        n = A.shape[0]
        if np.all(A[~np.eye(n, dtype=bool)] >= 0):
            try:
                return dominant_eigen(A).eigenvalue
            except NotIrreducibleError:
                pass
    return spectral_abscissa(A)


def matrix_erlang_expectation(
    A_val: Union[float, complex, np.ndarray], spec: ErlangSpec
) -> Union[float, complex, np.ndarray]:
    """E[e^{A T}] = sum_k sum_l c_{k,l} (a_k I - A)^{-l}.

    Args:
        A_val: N x N matrix (or scalar) with spectral abscissa below the
            smallest rate.
        spec: Generalized Erlang law of T.

    Returns:
        N x N array, or a scalar when A_val is a scalar.

    Raises:
        DomainViolationError: If the spectral abscissa reaches the smallest rate.
    """
    scalar = np.ndim(A_val) == 0
    A = np.atleast_2d(np.asarray(A_val))
    n = A.shape[0]
    tau = _abscissa(A)
    if not tau < spec.rates[0]:
        raise DomainViolationError(
            f"Spectral abscissa {tau:.6g} is not below the smallest rate {spec.rates[0]:.6g}"
        )
    identity = np.eye(n)
    result = np.zeros((n, n), dtype=np.result_type(A, float))
    for a, row in zip(spec.rates, spec.coefficients):
        factored = lu_factor(a * identity - A)
        power = identity.astype(result.dtype)
        for c in row:
            power = lu_solve(factored, power)
            result = result + c * power
    if scalar:
        return result[0, 0].item()
    return result
