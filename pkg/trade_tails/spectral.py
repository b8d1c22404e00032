"""Dominant-eigenvalue machinery for Metzler matrix functions.

The functions here work on an abstract SquareMatrixFn F and follow the
transform-side convention: the tail exponent is the positive root of
r_D(F(-alpha)) = c, and the pole of (eta I - F(s))^{-1} sits at s = -alpha.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from trade_tails.errors import (
    DegenerateTargetError,
    NonPositiveXiError,
    NonRealDominantError,
    NoSolutionError,
    NotIrreducibleError,
    NotMetzlerError,
    SpectralError,
)
from trade_tails.process import SquareMatrixFn, is_irreducible

logger = logging.getLogger(__name__)

METZLER_TOL = 1e-12
IMAG_TOL = 1e-8
ROOT_TOL = 1e-10
EIGEN_MATCH_TOL = 1e-8
BRACKET_START = 1e-3
DEFAULT_ALPHA_MAX = 50.0
UNIQUENESS_MARGIN = 1e-10


@dataclass(frozen=True, eq=False)
class PerronData:
    """Dominant real eigenvalue with its positive eigenvector pair.

    ``right`` sums to one and ``left`` is scaled so that left' right = 1.
    """

    eigenvalue: float
    right: np.ndarray
    left: np.ndarray

    @property
    def normalized(self) -> bool:
        return abs(float(self.left @ self.right) - 1.0) <= 1e-12


@dataclass(frozen=True, eq=False)
class ResidueData:
    """Residue of (s + alpha)(eta I - F(s))^{-1} at s = -alpha."""

    pole: float
    residue: np.ndarray
    xi: float
    perron: PerronData


def spectral_abscissa(M: np.ndarray) -> float:
    """Largest real part over the eigenvalues of M (real or complex)."""
    return float(np.max(np.linalg.eigvals(np.atleast_2d(M)).real))


def dominant_eigen(M: np.ndarray) -> PerronData:
    """Perron data of an irreducible Metzler matrix.

    Args:
        M: N x N real matrix with nonnegative off-diagonal entries.

    Returns:
        PerronData with strictly positive eigenvectors.

    Raises:
        NotMetzlerError: If an off-diagonal entry is below -1e-12.
        NotIrreducibleError: If the off-diagonal pattern is not strongly connected.
        NonRealDominantError: If the eigenvalue of largest real part is not real.
        ValueError: If M is not a finite square matrix.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[0]
    if M.shape != (n, n):
        raise ValueError(f"Expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("Matrix entries must be finite")
    off_diagonal = ~np.eye(n, dtype=bool)
    if np.any(M[off_diagonal] < -METZLER_TOL):
        raise NotMetzlerError(
            f"Matrix is not Metzler: smallest off-diagonal entry {M[off_diagonal].min():.3g}"
        )
    if not is_irreducible(np.where(off_diagonal & (M > 0), M, 0.0)):
        raise NotIrreducibleError("Off-diagonal pattern is not strongly connected")

    # Shift to a nonnegative matrix with positive diagonal so the dominant
    # eigenvalue is simple and separated in modulus.
    shift = 1.0 + max(0.0, -float(np.min(np.diag(M))))
    shifted = M + shift * np.eye(n)
    values, left, right = scipy.linalg.eig(shifted, left=True, right=True)
    index = int(np.argmax(values.real))
    top = values[index]
    if abs(top.imag) > IMAG_TOL:
        raise NonRealDominantError(f"Dominant eigenvalue is not real: {top}")

    x = right[:, index].real
    x = x / x.sum()
    y = left[:, index].real
    y = y / (y @ x)
    if np.any(x <= 0) or np.any(y <= 0):
        raise SpectralError(
            f"Perron vectors are not strictly positive: x={x.tolist()}, y={y.tolist()}"
        )
    x.flags.writeable = False
    y.flags.writeable = False
    return PerronData(eigenvalue=float(top.real) - shift, right=x, left=y)


def exponent_curve(F: SquareMatrixFn, alpha: float) -> float:
    """g(alpha) = r_D(F(-alpha)); +inf where F(-alpha) is not finite."""
    value = np.asarray(F(-alpha), dtype=float)
    if not np.all(np.isfinite(value)):
        return np.inf
    return dominant_eigen(value).eigenvalue


def exponent_curve_grid(F: SquareMatrixFn, alphas: Iterable[float]) -> np.ndarray:
    return np.array([exponent_curve(F, a) for a in alphas])


def min_second_difference(values: Sequence[float]) -> float:
    """Smallest second difference of a sampled curve (convexity check)."""
    values = np.asarray(values, dtype=float)
    if values.size < 3:
        return 0.0
    return float(np.min(np.diff(values, n=2)))


def solve_alpha(
    F: SquareMatrixFn, c: float, alpha_max: float = DEFAULT_ALPHA_MAX
) -> float:
    """Solve r_D(F(-alpha)) = c for the unique positive alpha.

    The curve g(alpha) = r_D(F(-alpha)) is convex with g(0) = 0, so it
    crosses the level c > 0 exactly once. The bracket starts at 1e-3 and
    doubles until g exceeds c, then bisection finishes the job.

    Args:
        F: Matrix function with r_D(F(0)) = 0.
        c: Target level.
        alpha_max: Upper end of the search range.

    Returns:
        The root alpha in (0, alpha_max].

    Raises:
        DegenerateTargetError: If c <= 0.
        NoSolutionError: If g(alpha_max) < c.
        SpectralError: If r_D(F(0)) is not zero.
    """
    if not c > 0:
        raise DegenerateTargetError(f"Target level must be positive, got {c}")
    if not alpha_max > 0:
        raise ValueError(f"alpha_max must be positive, got {alpha_max}")
    g0 = exponent_curve(F, 0.0)
    if abs(g0) > 1e-9:
        raise SpectralError(f"r_D(F(0)) must vanish, got {g0:.3g}")

    def excess(alpha: float) -> float:
        return exponent_curve(F, alpha) - c

    low, high = 0.0, min(BRACKET_START, alpha_max)
    g_high = excess(high)
    while g_high < 0:
        if high >= alpha_max:
            raise NoSolutionError(
                f"No root of r_D = {c:.6g} in (0, {alpha_max:g}]: "
                f"g(alpha_max) = {g_high + c:.6g}",
                g_max=g_high + c,
            )
        low, high = high, min(2.0 * high, alpha_max)
        g_high = excess(high)
        logger.debug("bracket [%g, %g], g - c = %g", low, high, g_high)
    if g_high == 0:
        return high

    alpha = scipy.optimize.bisect(excess, low, high, xtol=1e-15, maxiter=500)
    residual = excess(alpha)
    if abs(residual) > ROOT_TOL * max(1.0, c):
        logger.warning(
            "Root residual %.3g exceeds tolerance at alpha=%.12g", residual, alpha
        )
    logger.debug("solve_alpha: c=%g alpha=%.12g residual=%.3g", c, alpha, residual)
    return float(alpha)


def resolvent_residue(F: SquareMatrixFn, alpha: float, eta: float) -> ResidueData:
    """Residue of (s + alpha)(eta I - F(s))^{-1} at s = -alpha.

    With x, y the Perron vectors of F(-alpha) and y'x = 1 the residue is
    xi x y' where xi = 1 / (-y' F'(-alpha) x).

    Raises:
        SpectralError: If r_D(F(-alpha)) differs from eta.
        NonPositiveXiError: If -y' F'(-alpha) x is not positive.
    """
    perron = dominant_eigen(F(-alpha))
    if abs(perron.eigenvalue - eta) > EIGEN_MATCH_TOL * max(1.0, abs(eta)):
        raise SpectralError(
            f"r_D(F(-alpha)) = {perron.eigenvalue:.12g} does not match eta = {eta:.12g}"
        )
    x, y = perron.right, perron.left
    slope = -float(y @ np.real(F.derivative(-alpha)) @ x)
    if not slope > 0:
        raise NonPositiveXiError(
            f"-y'F'(-alpha)x = {slope:.6g} is not positive at alpha = {alpha:.6g}"
        )
    xi = 1.0 / slope
    return ResidueData(pole=-alpha, residue=xi * np.outer(x, y), xi=xi, perron=perron)


def uniqueness_scan(
    F: SquareMatrixFn, alpha: float, beta_grid: Iterable[float]
) -> bool:
    """Check that -alpha is the only pole on its vertical line over a grid.

    True iff tau(F(-alpha + i beta)) < tau(F(-alpha)) - 1e-10 for every
    nonzero beta scanned. A diagnostic, not a proof.
    """
    reference = spectral_abscissa(np.asarray(F(-alpha), dtype=float))
    for beta in beta_grid:
        if beta == 0:
            continue
        tau = spectral_abscissa(F(complex(-alpha, beta)))
        if not tau < reference - UNIQUENESS_MARGIN:
            logger.debug(
                "uniqueness fails at beta=%g: tau=%.12g reference=%.12g",
                beta,
                tau,
                reference,
            )
            return False
    return True
