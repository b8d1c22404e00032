"""Tail exponent, correction order and scale of realized prices.

For a realized price P_T = e^{X_T} the upper tail behaves like

    P(P_T > y) ~ (M / alpha) (log y)^beta y^{-alpha} / beta!

where alpha is fixed by the slowest trading component alone, beta by the
multiplicity of the dominant pole, and M by the Perron vectors at the
pole. The lower tail is handled by running the same machinery on -X.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from trade_tails.erlang import matrix_erlang_expectation, merge_rates, rates_equal
from trade_tails.errors import (
    DomainViolationError,
    NonPositiveScaleError,
    NoSolutionError,
    TradeTailsError,
)
from trade_tails.process import (
    ModulatedModel,
    SquareMatrixFn,
    matexp_and_derivative,
    matrix_exp,
)
from trade_tails.spectral import (
    DEFAULT_ALPHA_MAX,
    PerronData,
    dominant_eigen,
    exponent_curve,
    exponent_curve_grid,
    min_second_difference,
    resolvent_residue,
    solve_alpha,
    uniqueness_scan,
)
from trade_tails.timing import IIM, ITM, TimingModel

logger = logging.getLogger(__name__)

UPPER = "upper"
LOWER = "lower"
SIDES = (UPPER, LOWER)

# Steps 10^-k used for the numerical residue limit
RESIDUE_STEPS = (3, 4, 5, 6)
# Relative gap under which two distinct rates are reported as a near tie
NEAR_TIE_RTOL = 1e-6
CURVE_POINTS = 41
DOMAIN_MARGIN = 0.1


@dataclass(frozen=True, eq=False)
class TailReport:
    """Analytic tail description of one side of log P_T.

    Attributes:
        alpha: Tail exponent.
        beta: Logarithmic-correction order.
        scale: Scale constant M, the leading Laurent coefficient of the
            transform at its dominant pole.
        case: IIM-geometric, IIM-negbin, ITM-a, ITM-b or ITM-c.
        side: upper or lower.
        target_level: Eigenvalue level c with r_D = c at the pole.
        xi: Residue factor 1 / (-y'F'(-alpha)x).
        perron: Perron data at the pole.
        uniqueness: Whether the pole is isolated on its vertical line over
            the scanned grid.
        diagnostics: Residue-limit table, exponent curve and other checks.
    """

    alpha: float
    beta: int
    scale: float
    case: str
    side: str
    target_level: float
    xi: float
    perron: PerronData
    uniqueness: bool
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def limit(self) -> Optional[float]:
        """M / alpha, the limit of y^alpha P(P_T > y); None unless Paretian."""
        return self.scale / self.alpha if self.paretian else None

    @property
    def paretian(self) -> bool:
        return self.beta == 0 and self.uniqueness

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "scale": self.scale,
            "limit": self.limit,
            "paretian": self.paretian,
            "case": self.case,
            "side": self.side,
            "target_level": self.target_level,
            "xi": self.xi,
            "perron": {
                "eigenvalue": self.perron.eigenvalue,
                "right": self.perron.right.tolist(),
                "left": self.perron.left.tolist(),
            },
            "uniqueness": self.uniqueness,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class ITMClass:
    """Classification of an ITM timing law by its slowest rate."""

    case: str
    lambda_min: float
    beta: int
    completion: Tuple[Tuple[float, int], ...]
    near_ties: Tuple[str, ...] = ()


def _oriented_model(model: ModulatedModel, side: str) -> ModulatedModel:
    if side not in SIDES:
        raise ValueError(f"Tail side must be one of {SIDES}, got {side!r}")
    return model if side == UPPER else model.negated()


def oriented_exponent(model: ModulatedModel, grid_spacing: float = 1.0) -> SquareMatrixFn:
    """Transform-side exponent F(z) = delta * A(-z) for the upper tail."""
    return model.exponent_fn().scaled(grid_spacing).reflected()


def brownian_alpha(drift: float, variance: float, c: float) -> float:
    """Closed-form upper-tail exponent for Brownian motion with drift.

    Solves drift * alpha + variance * alpha^2 / 2 = c for alpha > 0.

    Raises:
        NoSolutionError: If variance is zero and the drift is not positive.
    """
    if variance < 0:
        raise ValueError(f"Variance must be >= 0, got {variance}")
    if not c > 0:
        raise ValueError(f"Target level must be positive, got {c}")
    if variance == 0:
        if drift <= 0:
            raise NoSolutionError(
                f"Pure drift {drift:g} gives no positive exponent", g_max=None
            )
        return c / drift
    return (-drift + np.sqrt(drift * drift + 2.0 * variance * c)) / variance


# Transforms


def _iim_domain_check(A: np.ndarray, timing: IIM) -> None:
    tau = dominant_eigen(A).eigenvalue
    if not tau < timing.target_level:
        raise DomainViolationError(
            f"r_D(A(s)) = {tau:.6g} is not below -log(1-p_1) = {timing.target_level:.6g}"
        )


def iim_mgf(model: ModulatedModel, timing: IIM, s: float) -> float:
    """M_T(s) = E[e^{s X_T}] under IIM timing.

    Each type contributes q_j (p_j/(1-p_j))^n w0' ((I - B_j)^{-1} - I)^n 1
    with B_j = (1 - p_j) e^{delta A(s)}.

    Raises:
        DomainViolationError: If r_D(delta A(s)) >= -log(1 - p_1).
    """
    A = timing.grid_spacing * np.asarray(model.laplace_exponent(s), dtype=float)
    _iim_domain_check(A, timing)
    n_reg = model.size
    identity = np.eye(n_reg)
    propagator = matrix_exp(A)
    ones = np.ones(n_reg)
    total = 0.0
    for q, p in zip(timing.weights, timing.probabilities):
        damped = (1.0 - p) * propagator
        # (I - B)^{-1} - I = (I - B)^{-1} B
        tail_sum = scipy.linalg.solve(identity - damped, damped)
        vector = ones
        for _ in range(timing.successes):
            vector = tail_sum @ vector
        total += q * (p / (1.0 - p)) ** timing.successes * float(model.initial @ vector)
    return total


def itm_mgf(model: ModulatedModel, timing: ITM, s: float) -> float:
    """M_T(s) = sum_j q_j w0' E[e^{A(s) T_j}] 1 under ITM timing.

    Raises:
        DomainViolationError: If r_D(A(s)) >= lambda_min.
    """
    A = np.asarray(model.laplace_exponent(s), dtype=float)
    lambda_min = itm_classify(timing).lambda_min
    tau = dominant_eigen(A).eigenvalue
    if not tau < lambda_min:
        raise DomainViolationError(
            f"r_D(A(s)) = {tau:.6g} is not below lambda_min = {lambda_min:.6g}"
        )
    ones = np.ones(model.size)
    total = 0.0
    for q, spec in zip(timing.weights, timing.type_specs):
        total += q * float(model.initial @ matrix_erlang_expectation(A, spec) @ ones)
    return total


def trade_mgf(model: ModulatedModel, timing: TimingModel, s: float) -> float:
    if isinstance(timing, IIM):
        return iim_mgf(model, timing, s)
    return itm_mgf(model, timing, s)


# ITM classification


def _near_ties(rates: Sequence[float]) -> List[str]:
    ordered = sorted(set(rates))
    flags = []
    for a, b in zip(ordered, ordered[1:]):
        if not rates_equal(a, b) and b - a <= NEAR_TIE_RTOL * b:
            flags.append(f"rates {a:.12g} and {b:.12g} are distinct but within {NEAR_TIE_RTOL:g}")
    return flags


def itm_classify(timing: ITM) -> ITMClass:
    """Case label, lambda_min and correction order of an ITM timing law.

    With lambda_1 the slowest arrival rate and mu_1 (multiplicity r_1) the
    slowest merged completion rate: lambda_1 < mu_1 gives case a with
    beta = 0, mu_1 < lambda_1 gives case b with beta = r_1 - 1, and a tie
    gives case c with beta = r_1. No completion stages means case a.
    """
    lambda_1 = timing.arrival_rates[0]
    ties = tuple(_near_ties(list(timing.arrival_rates) + list(timing.completion_rates)))
    for flag in ties:
        logger.warning("Near-tie rates classified as distinct: %s", flag)
    if not timing.completion_rates:
        return ITMClass("ITM-a", lambda_1, 0, (), ties)
    completion = tuple(merge_rates(timing.completion_rates))
    mu_1, r_1 = completion[0]
    if rates_equal(lambda_1, mu_1):
        return ITMClass("ITM-c", min(lambda_1, mu_1), r_1, completion, ties)
    if lambda_1 < mu_1:
        return ITMClass("ITM-a", lambda_1, 0, completion, ties)
    return ITMClass("ITM-b", mu_1, r_1 - 1, completion, ties)


# Reports


def _residue_limit_table(
    transform, alpha: float, beta: int, scale: float
) -> Dict[str, Any]:
    steps = [10.0 ** (-k) for k in RESIDUE_STEPS]
    values = []
    for h in steps:
        try:
            values.append(h ** (beta + 1) * transform(-alpha + h))
        except TradeTailsError as exc:
            logger.debug("residue limit at h=%g failed: %s", h, exc)
            values.append(float("nan"))
    richardson = (10.0 * values[-1] - values[-2]) / 9.0
    errors = [abs(v - scale) / scale for v in values]
    return {
        "steps": steps,
        "values": values,
        "relative_errors": errors,
        "richardson": richardson,
        "richardson_relative_error": abs(richardson - scale) / scale,
    }


def default_beta_grid(model: ModulatedModel) -> np.ndarray:
    """Scan frequencies: a uniform grid plus the lattice periods of jump atoms.

    For a lattice model the periods 2 pi k / h of the common span h are
    included, so atoms such as {0.7, 1.1} are scanned at 20 pi.
    """
    grid = [np.linspace(0.1, 10.0, 100)]
    for atom in model.lattice_atoms():
        grid.append(2.0 * np.pi * np.arange(1, 4) / atom)
    span = model.lattice_span()
    if span is not None:
        grid.append(2.0 * np.pi * np.arange(1, 4) / span)
    return np.unique(np.concatenate(grid))


def _common_diagnostics(
    F: SquareMatrixFn,
    alpha: float,
    alpha_max: float,
    model: ModulatedModel,
    beta_grid: Optional[Sequence[float]],
) -> Tuple[bool, Dict[str, Any]]:
    alphas = np.linspace(0.0, min(2.0 * alpha, alpha_max), CURVE_POINTS)
    curve = exponent_curve_grid(F, alphas)
    finite_curve = curve[np.isfinite(curve)]
    domain = np.linspace(-alpha - DOMAIN_MARGIN, DOMAIN_MARGIN, 21)
    domain_ok = all(np.isfinite(exponent_curve(F, -s)) for s in domain)
    grid = default_beta_grid(model) if beta_grid is None else np.asarray(beta_grid, dtype=float)
    unique = uniqueness_scan(F, alpha, grid)
    if not unique:
        logger.warning(
            "Uniqueness scan failed at alpha=%.6g; Paretian limit unavailable", alpha
        )
    return unique, {
        "exponent_curve": {"alpha": alphas.tolist(), "g": curve.tolist()},
        "convexity_min_second_difference": min_second_difference(finite_curve),
        "domain_finite": bool(domain_ok),
        "uniqueness_grid": grid.tolist(),
        "nonlattice": model.nonlattice,
        "lattice_span": model.lattice_span(),
    }


def iim_report(
    model: ModulatedModel,
    timing: IIM,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    side: str = UPPER,
    beta_grid: Optional[Sequence[float]] = None,
) -> TailReport:
    """Tail report under IIM timing.

    Only the slowest type (smallest p_1) fixes alpha through
    r_D(delta A(alpha)) = -log(1 - p_1). The scale is

        q_1 (p_1/(1-p_1))^n xi^n (y'x)^{n-1} (w0'x)(y'1),

    with xi read off the derivative of B(s) = e^{log(1-p_1) I + F(s)}.

    Raises:
        NoSolutionError: If the exponent equation has no root up to alpha_max.
        NonPositiveScaleError: If the scale does not come out positive.
    """
    base = _oriented_model(model, side)
    F = oriented_exponent(base, timing.grid_spacing)
    c = timing.target_level
    alpha = solve_alpha(F, c, alpha_max)
    residue = resolvent_residue(F, alpha, c)
    x, y = residue.perron.right, residue.perron.left

    p_1, q_1 = timing.probabilities[0], float(timing.weights[0])
    n = timing.successes
    shifted = np.log1p(-p_1) * np.eye(model.size) + F(-alpha)
    _, b_prime = matexp_and_derivative(shifted, F.derivative(-alpha))
    xi = 1.0 / float(-(y @ b_prime @ x))
    scale = (
        q_1
        * (p_1 / (1.0 - p_1)) ** n
        * xi**n
        * float(y @ x) ** (n - 1)
        * float(base.initial @ x)
        * float(y.sum())
    )
    if not (np.isfinite(scale) and scale > 0):
        raise NonPositiveScaleError(f"IIM scale came out as {scale:.6g}")

    def transform(s: float) -> float:
        return iim_mgf(base, timing, -s)

    unique, diagnostics = _common_diagnostics(F, alpha, alpha_max, base, beta_grid)
    diagnostics["residue_limit"] = _residue_limit_table(transform, alpha, n - 1, scale)
    diagnostics["xi_resolvent"] = residue.xi
    logger.debug("IIM report: alpha=%.10g beta=%d scale=%.10g", alpha, n - 1, scale)
    return TailReport(
        alpha=alpha,
        beta=n - 1,
        scale=scale,
        case=timing.case_label,
        side=side,
        target_level=c,
        xi=xi,
        perron=residue.perron,
        uniqueness=unique,
        diagnostics=diagnostics,
    )


def itm_report(
    model: ModulatedModel,
    timing: ITM,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    side: str = UPPER,
    beta_grid: Optional[Sequence[float]] = None,
) -> TailReport:
    """Tail report under ITM timing.

    alpha solves r_D(A(alpha)) = lambda_min. Every type's merged Erlang
    table is searched for the coefficient c_j at (lambda_min, beta + 1);
    the scale is

        xi^{beta+1} (y'x)^beta (w0'x)(y'1) sum_j q_j c_j,

    which covers all three cases with one formula.

    Raises:
        NoSolutionError: If the exponent equation has no root up to alpha_max.
        NonPositiveScaleError: If the scale does not come out positive.
    """
    base = _oriented_model(model, side)
    F = oriented_exponent(base)
    classification = itm_classify(timing)
    eta, beta = classification.lambda_min, classification.beta
    alpha = solve_alpha(F, eta, alpha_max)
    residue = resolvent_residue(F, alpha, eta)
    x, y = residue.perron.right, residue.perron.left

    coefficients = [spec.coefficient(eta, beta + 1) for spec in timing.type_specs]
    weighted = float(np.dot(timing.weights, coefficients))
    scale = (
        residue.xi ** (beta + 1)
        * float(y @ x) ** beta
        * float(base.initial @ x)
        * float(y.sum())
        * weighted
    )
    if not (np.isfinite(scale) and scale > 0):
        raise NonPositiveScaleError(f"ITM scale came out as {scale:.6g}")

    def transform(s: float) -> float:
        return itm_mgf(base, timing, -s)

    unique, diagnostics = _common_diagnostics(F, alpha, alpha_max, base, beta_grid)
    diagnostics["residue_limit"] = _residue_limit_table(transform, alpha, beta, scale)
    diagnostics["type_coefficients"] = coefficients
    diagnostics["near_ties"] = list(classification.near_ties)
    logger.debug(
        "ITM report: case=%s alpha=%.10g beta=%d scale=%.10g",
        classification.case,
        alpha,
        beta,
        scale,
    )
    return TailReport(
        alpha=alpha,
        beta=beta,
        scale=scale,
        case=classification.case,
        side=side,
        target_level=eta,
        xi=residue.xi,
        perron=residue.perron,
        uniqueness=unique,
        diagnostics=diagnostics,
    )


def tail_report(
    model: ModulatedModel,
    timing: TimingModel,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    side: str = UPPER,
    beta_grid: Optional[Sequence[float]] = None,
) -> TailReport:
    if isinstance(timing, IIM):
        return iim_report(model, timing, alpha_max, side, beta_grid)
    if isinstance(timing, ITM):
        return itm_report(model, timing, alpha_max, side, beta_grid)
    raise TypeError(f"Unknown timing model {type(timing).__name__}")


def lower_tail_report(
    model: ModulatedModel,
    timing: TimingModel,
    alpha_max: float = DEFAULT_ALPHA_MAX,
    beta_grid: Optional[Sequence[float]] = None,
) -> TailReport:
    """Tail report for P(P_T < 1/y), obtained from the dual process -X."""
    return tail_report(model, timing, alpha_max, LOWER, beta_grid)
