"""Markov-modulated Levy processes and their matrix Laplace exponent.

The latent log-price X evolves, while the background chain J sits in regime
j, as a Levy process with exponent

    psi_j(z) = mu_j z + sigma_j^2 z^2 / 2 + kappa_j (phi_j(z) - 1),

where phi_j is the moment generating function of the compound-Poisson jump
law. When J switches from j to k, X additionally jumps with probability
rho_jk. The matrix exponent A(z) = G (.) Upsilon(z) + Psi(z) gives

    E[e^{z X_t} 1(J_t = k) | J_0 = j] = (e^{A(z) t})_{jk}.
"""

from dataclasses import dataclass, field
from typing import Callable, ClassVar, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import connected_components

from trade_tails.errors import MatrixOverflowError, ModelError

# Largest regime count handled with dense arithmetic
MAX_REGIMES = 64
# Spectral abscissa above which e^M is refused
DEFAULT_EXPONENT_CAP = 700.0
# Tolerance on generator row sums and initial-distribution mass
STOCHASTIC_TOL = 1e-12
# Relative tolerance when reducing jump atoms to a common span
SPAN_TOL = 1e-9
# Spans below this fraction of the largest atom count as incommensurate
MIN_SPAN_RATIO = 1e-6

Scalar = Union[float, complex]


def _expm1(w):
    if np.iscomplexobj(w):
        return np.exp(w) - 1.0
    return np.expm1(w)


@dataclass(frozen=True)
class DegenerateJump:
    """Jump of fixed size."""

    size: float = 0.0
    kind: ClassVar[str] = "degenerate"

    def __post_init__(self):
        if not np.isfinite(self.size):
            raise ModelError(f"Jump size must be finite, got {self.size}")

    def mgf_minus_one(self, z: Scalar) -> Scalar:
        return _expm1(z * self.size)

    def mgf_derivative(self, z: Scalar) -> Scalar:
        return self.size * np.exp(z * self.size)

    def negated(self) -> "DegenerateJump":
        return DegenerateJump(-self.size)

    def atoms(self) -> Tuple[float, ...]:
        return (self.size,)

    def sample_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        return self.size * np.asarray(counts, dtype=float)


@dataclass(frozen=True)
class GaussianJump:
    """Normally distributed jump."""

    mean: float = 0.0
    variance: float = 1.0
    kind: ClassVar[str] = "gaussian"

    def __post_init__(self):
        if not (np.isfinite(self.mean) and np.isfinite(self.variance)):
            raise ModelError("Gaussian jump parameters must be finite")
        if self.variance < 0:
            raise ModelError(f"Jump variance must be >= 0, got {self.variance}")

    def mgf_minus_one(self, z: Scalar) -> Scalar:
        return _expm1(self.mean * z + 0.5 * self.variance * z * z)

    def mgf_derivative(self, z: Scalar) -> Scalar:
        return (self.mean + self.variance * z) * np.exp(
            self.mean * z + 0.5 * self.variance * z * z
        )

    def negated(self) -> "GaussianJump":
        return GaussianJump(-self.mean, self.variance)

    def atoms(self) -> Tuple[float, ...]:
        return (self.mean,) if self.variance == 0 else ()

    def sample_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=float)
        return rng.normal(self.mean * counts, np.sqrt(self.variance * counts))


@dataclass(frozen=True)
class TwoPointJump:
    """Jump of size ``first`` with ``probability``, otherwise ``second``."""

    first: float = 0.0
    second: float = 0.0
    probability: float = 0.5
    kind: ClassVar[str] = "two_point"

    def __post_init__(self):
        if not (np.isfinite(self.first) and np.isfinite(self.second)):
            raise ModelError("Two-point jump sizes must be finite")
        if not (0.0 <= self.probability <= 1.0):
            raise ModelError(
                f"Two-point probability must be in [0, 1], got {self.probability}"
            )

    def mgf_minus_one(self, z: Scalar) -> Scalar:
        return self.probability * _expm1(z * self.first) + (
            1.0 - self.probability
        ) * _expm1(z * self.second)

    def mgf_derivative(self, z: Scalar) -> Scalar:
        return self.probability * self.first * np.exp(z * self.first) + (
            1.0 - self.probability
        ) * self.second * np.exp(z * self.second)

    def negated(self) -> "TwoPointJump":
        return TwoPointJump(-self.first, -self.second, self.probability)

    def atoms(self) -> Tuple[float, ...]:
        return (self.first, self.second)

    def sample_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        counts = np.asarray(counts, dtype=np.int64)
        hits = rng.binomial(counts, self.probability)
        return self.first * hits + self.second * (counts - hits)


JumpLaw = Union[DegenerateJump, GaussianJump, TwoPointJump]


@dataclass(frozen=True)
class RegimeExponent:
    """Levy exponent of a single regime (Brownian part plus compound Poisson).

    Attributes:
        drift: Drift per unit time.
        variance: Diffusion variance per unit time.
        jump_intensity: Compound-Poisson intensity per unit time.
        jump: Jump-size law.
    """

    drift: float = 0.0
    variance: float = 0.0
    jump_intensity: float = 0.0
    jump: JumpLaw = field(default_factory=DegenerateJump)

    def __post_init__(self):
        for name in ("drift", "variance", "jump_intensity"):
            if not np.isfinite(getattr(self, name)):
                raise ModelError(f"Regime {name} must be finite")
        if self.variance < 0:
            raise ModelError(f"Regime variance must be >= 0, got {self.variance}")
        if self.jump_intensity < 0:
            raise ModelError(
                f"Jump intensity must be >= 0, got {self.jump_intensity}"
            )

    def exponent(self, z: Scalar) -> Scalar:
        return (
            self.drift * z
            + 0.5 * self.variance * z * z
            + self.jump_intensity * self.jump.mgf_minus_one(z)
        )

    def derivative(self, z: Scalar) -> Scalar:
        return (
            self.drift
            + self.variance * z
            + self.jump_intensity * self.jump.mgf_derivative(z)
        )

    def negated(self) -> "RegimeExponent":
        return RegimeExponent(
            -self.drift, self.variance, self.jump_intensity, self.jump.negated()
        )


@dataclass(frozen=True)
class TransitionJump:
    """Extra jump of X when the chain switches regimes."""

    probability: float = 0.0
    jump: JumpLaw = field(default_factory=DegenerateJump)

    def __post_init__(self):
        if not (0.0 <= self.probability <= 1.0):
            raise ModelError(
                f"Transition-jump probability must be in [0, 1], got {self.probability}"
            )

    @property
    def is_null(self) -> bool:
        return self.probability == 0.0 or (
            isinstance(self.jump, DegenerateJump) and self.jump.size == 0.0
        )

    def upsilon(self, z: Scalar) -> Scalar:
        """E[e^{zV}] where V is the jump with probability rho, else 0."""
        return 1.0 + self.probability * self.jump.mgf_minus_one(z)

    def upsilon_derivative(self, z: Scalar) -> Scalar:
        return self.probability * self.jump.mgf_derivative(z)

    def negated(self) -> "TransitionJump":
        return TransitionJump(self.probability, self.jump.negated())


def is_irreducible(matrix: np.ndarray) -> bool:
    """Check strong connectivity of the positive off-diagonal pattern."""
    n = matrix.shape[0]
    if n == 1:
        return True
    pattern = np.abs(np.asarray(matrix)) > 0
    np.fill_diagonal(pattern, False)
    n_components, _ = connected_components(
        pattern.astype(np.int8), directed=True, connection="strong"
    )
    return n_components == 1


@dataclass(frozen=True)
class SquareMatrixFn:
    """An evaluable matrix function z -> F(z) together with its derivative."""

    value: Callable[[Scalar], np.ndarray]
    derivative: Callable[[Scalar], np.ndarray]

    def __call__(self, z: Scalar) -> np.ndarray:
        return self.value(z)

    def reflected(self) -> "SquareMatrixFn":
        """The map z -> F(-z)."""
        value, derivative = self.value, self.derivative
        return SquareMatrixFn(lambda z: value(-z), lambda z: -derivative(-z))

    def scaled(self, factor: float) -> "SquareMatrixFn":
        """The map z -> factor * F(z)."""
        if factor == 1.0:
            return self
        value, derivative = self.value, self.derivative
        return SquareMatrixFn(
            lambda z: factor * value(z), lambda z: factor * derivative(z)
        )


@dataclass(frozen=True, eq=False)
class ModulatedModel:
    """Markov-modulated Levy process.

    Attributes:
        regimes: One RegimeExponent per regime.
        generator: N x N generator matrix G of the background chain.
        transition_jumps: N x N table of TransitionJump (None means no jumps).
        initial: Initial distribution w0 of the chain (default uniform).
    """

    regimes: Tuple[RegimeExponent, ...]
    generator: np.ndarray
    transition_jumps: Optional[Tuple[Tuple[TransitionJump, ...], ...]] = None
    initial: Optional[np.ndarray] = None

    def __post_init__(self):
        regimes = tuple(self.regimes)
        n = len(regimes)
        if n == 0:
            raise ModelError("At least one regime is required")
        if n > MAX_REGIMES:
            raise ModelError(f"At most {MAX_REGIMES} regimes supported, got {n}")

        generator = np.array(self.generator, dtype=float)
        if generator.shape != (n, n):
            raise ModelError(
                f"Generator must be {n}x{n}, got shape {generator.shape}"
            )
        if not np.all(np.isfinite(generator)):
            raise ModelError("Generator entries must be finite")
        off_diagonal = generator[~np.eye(n, dtype=bool)]
        if np.any(off_diagonal < 0):
            raise ModelError("Generator off-diagonal entries must be >= 0")
        row_sums = generator.sum(axis=1)
        if np.any(np.abs(row_sums) > STOCHASTIC_TOL):
            raise ModelError(f"Generator rows must sum to 0, got {row_sums.tolist()}")
        if not is_irreducible(generator):
            raise ModelError("Generator must be irreducible")
        generator.flags.writeable = False

        jumps = self.transition_jumps
        if jumps is not None:
            jumps = tuple(tuple(row) for row in jumps)
            if len(jumps) != n or any(len(row) != n for row in jumps):
                raise ModelError(f"Transition jumps must be a {n}x{n} table")
            for j in range(n):
                if not jumps[j][j].is_null:
                    raise ModelError(
                        f"Diagonal transition jump ({j},{j}) must be null"
                    )
            if all(tj.is_null for row in jumps for tj in row):
                jumps = None

        if self.initial is None:
            initial = np.full(n, 1.0 / n)
        else:
            initial = np.array(self.initial, dtype=float)
        if initial.shape != (n,):
            raise ModelError(f"Initial distribution must have length {n}")
        if np.any(initial < 0) or abs(initial.sum() - 1.0) > STOCHASTIC_TOL:
            raise ModelError(
                f"Initial distribution must be nonnegative and sum to 1, got {initial.tolist()}"
            )
        initial.flags.writeable = False

        object.__setattr__(self, "regimes", regimes)
        object.__setattr__(self, "generator", generator)
        object.__setattr__(self, "transition_jumps", jumps)
        object.__setattr__(self, "initial", initial)

    @property
    def size(self) -> int:
        return len(self.regimes)

    def laplace_exponent(self, z: Scalar) -> np.ndarray:
        return matrix_laplace_exponent(self, z)

    def exponent_derivative(self, z: Scalar) -> np.ndarray:
        """Entrywise derivative A'(z)."""
        n = self.size
        diagonal = np.diag([regime.derivative(z) for regime in self.regimes])
        if self.transition_jumps is None:
            return diagonal
        upsilon_prime = np.array(
            [[tj.upsilon_derivative(z) for tj in row] for row in self.transition_jumps]
        ).reshape(n, n)
        return self.generator * upsilon_prime + diagonal

    def exponent_fn(self) -> SquareMatrixFn:
        return SquareMatrixFn(self.laplace_exponent, self.exponent_derivative)

    def negated(self) -> "ModulatedModel":
        """The dual process -X: drifts, jump means and atoms change sign."""
        jumps = None
        if self.transition_jumps is not None:
            jumps = tuple(
                tuple(tj.negated() for tj in row) for row in self.transition_jumps
            )
        return ModulatedModel(
            regimes=tuple(regime.negated() for regime in self.regimes),
            generator=self.generator,
            transition_jumps=jumps,
            initial=self.initial,
        )

    @property
    def nonlattice(self) -> bool:
        """True when some regime has a diffusion or a continuous jump component."""
        for regime in self.regimes:
            if regime.variance > 0:
                return True
            if (
                regime.jump_intensity > 0
                and isinstance(regime.jump, GaussianJump)
                and regime.jump.variance > 0
            ):
                return True
        for row in self.transition_jumps or ():
            for tj in row:
                if (
                    tj.probability > 0
                    and isinstance(tj.jump, GaussianJump)
                    and tj.jump.variance > 0
                ):
                    return True
        return False

    def lattice_atoms(self) -> Tuple[float, ...]:
        """Nonzero magnitudes of jump atoms actually in use, sorted."""
        atoms = set()
        for regime in self.regimes:
            if regime.jump_intensity > 0:
                atoms.update(abs(a) for a in regime.jump.atoms())
        for row in self.transition_jumps or ():
            for tj in row:
                if tj.probability > 0:
                    atoms.update(abs(a) for a in tj.jump.atoms())
        atoms.discard(0.0)
        return tuple(sorted(atoms))

    def lattice_span(self) -> Optional[float]:
        """Common span h of all jump atoms, or None for a nonlattice model."""
        if self.nonlattice:
            return None
        return common_span(self.lattice_atoms())


def common_span(values: Sequence[float], tol: float = SPAN_TOL) -> Optional[float]:
    """Largest h with every value an integer multiple of h, within tol.

    Euclid's algorithm on magnitudes. Returns None when there are no nonzero
    values or when the values are incommensurate.
    """
    magnitudes = sorted({abs(float(v)) for v in values if v != 0}, reverse=True)
    if not magnitudes:
        return None
    largest = magnitudes[0]
    threshold = tol * largest
    span = largest
    for value in magnitudes[1:]:
        a, b = span, value
        while b > threshold:
            r = a % b
            if r <= threshold or b - r <= threshold:
                break
            a, b = b, r
        span = b
        if span < MIN_SPAN_RATIO * largest:
            return None
    return span


def levy_exponent(regime: RegimeExponent, z: Scalar) -> Scalar:
    """Evaluate psi_j(z) for one regime; psi_j(0) = 0 exactly."""
    return regime.exponent(z)


def matrix_laplace_exponent(model: ModulatedModel, z: Scalar) -> np.ndarray:
    """Evaluate A(z) = G (.) Upsilon(z) + Psi(z).

    Args:
        model: The modulated process.
        z: Real or complex argument.

    Returns:
        N x N array, complex when z is complex; A(0) equals G exactly.
    """
    n = model.size
    psi = np.diag([regime.exponent(z) for regime in model.regimes])
    if model.transition_jumps is None:
        return model.generator + psi
    upsilon = np.array(
        [[tj.upsilon(z) for tj in row] for row in model.transition_jumps]
    ).reshape(n, n)
    return model.generator * upsilon + psi


def _check_cap(matrix: np.ndarray, cap: float) -> None:
    abscissa = float(np.max(np.linalg.eigvals(matrix).real))
    if abscissa > cap:
        raise MatrixOverflowError(
            f"Spectral abscissa {abscissa:.6g} exceeds exponent cap {cap:g}"
        )


def matrix_exp(M: np.ndarray, cap: float = DEFAULT_EXPONENT_CAP) -> np.ndarray:
    """e^M, refusing matrices whose spectral abscissa exceeds cap."""
    M = np.atleast_2d(np.asarray(M))
    _check_cap(M, cap)
    return scipy.linalg.expm(M)


def matexp_and_derivative(
    M: np.ndarray, D: np.ndarray, cap: float = DEFAULT_EXPONENT_CAP
) -> Tuple[np.ndarray, np.ndarray]:
    """Matrix exponential and its directional derivative.

    The derivative of exp at M along D is the top-right block of
    exp([[M, D], [0, M]]), so one scaling-and-squaring Pade evaluation
    yields both.

    Args:
        M: N x N matrix.
        D: N x N direction.
        cap: Largest allowed spectral abscissa of M.

    Returns:
        Tuple of (e^M, L(M, D)).

    Raises:
        MatrixOverflowError: If the spectral abscissa of M exceeds cap.
        ValueError: If inputs are not finite square matrices of equal shape.
    """
    M = np.atleast_2d(np.asarray(M))
    D = np.atleast_2d(np.asarray(D))
    n = M.shape[0]
    if M.shape != (n, n) or D.shape != (n, n):
        raise ValueError(f"Expected two {n}x{n} matrices, got {M.shape} and {D.shape}")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(D))):
        raise ValueError("Matrix entries must be finite")
    _check_cap(M, cap)
    block = np.block([[M, D], [np.zeros_like(M), M]])
    expanded = scipy.linalg.expm(block)
    return expanded[:n, :n], expanded[:n, n:]


def mgf_at_time(
    model: ModulatedModel, s: float, t: float, cap: float = DEFAULT_EXPONENT_CAP
) -> float:
    """Fixed-time MGF M_t(s) = w0' e^{A(s) t} 1_N.

    Raises:
        ValueError: If t is not positive.
        MatrixOverflowError: If A(s) t exceeds the exponent cap.
    """
    if not t > 0:
        raise ValueError(f"Time must be positive, got {t}")
    propagator = matrix_exp(model.laplace_exponent(s) * t, cap)
    return float(model.initial @ propagator @ np.ones(model.size))


def brownian_model(drift: float = 0.0, variance: float = 1.0) -> ModulatedModel:
    """Single-regime Brownian motion with drift."""
    return ModulatedModel(
        regimes=(RegimeExponent(drift=drift, variance=variance),),
        generator=np.zeros((1, 1)),
    )


def regime_switching_model(
    regimes: Sequence[RegimeExponent],
    generator: Sequence[Sequence[float]],
    initial: Optional[Sequence[float]] = None,
) -> ModulatedModel:
    """Model without transition jumps."""
    return ModulatedModel(
        regimes=tuple(regimes), generator=np.asarray(generator), initial=initial
    )
