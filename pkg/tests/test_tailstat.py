"""Tests for empirical tail estimates and report validation."""

import dataclasses
import logging

import numpy as np
import pytest
from scipy.special import lambertw

from trade_tails.errors import DegenerateSpreadError, InsufficientDataError
from trade_tails.montecarlo import run_batch, stream_generator
from trade_tails.process import ModulatedModel, RegimeExponent, TwoPointJump, brownian_model
from trade_tails.tail_analysis import lower_tail_report, tail_report
from trade_tails.tailstat import (
    FAIL,
    INFORMATIONAL,
    PASS,
    UNAVAILABLE,
    Tolerances,
    fit_tail,
    hill,
    hill_sweep,
    log_correction_fit,
    scale_plateau,
    survival_table,
    validate,
)
from trade_tails.timing import IIM


def pareto(alpha, size, seed):
    """Exact Pareto draws with P(Y > y) = y^{-alpha} for y >= 1."""
    return stream_generator(seed, 0).random(size) ** (-1.0 / alpha)


def log_corrected(size, seed):
    """Draws with P(Y > y) = e log(y) / y for y >= e."""
    u = stream_generator(seed, 0).random(size)
    # Solve e log y / y = u on the branch y >= e
    return np.real(np.exp(-lambertw(-u / np.e, k=-1)))


class TestHill:
    """Tests for the Hill estimator."""

    def test_hand_computed(self):
        """Test k = 2 on {e, e^2, e^3}."""
        alpha_hat, se = hill(np.exp([1.0, 2.0, 3.0]), k=2)
        assert alpha_hat == pytest.approx(2.0 / 3.0)
        assert se == pytest.approx(alpha_hat / np.sqrt(2.0))

    def test_log_scale(self):
        """Test log-domain input gives the same estimate."""
        assert hill([1.0, 2.0, 3.0], k=2, log_scale=True)[0] == pytest.approx(2.0 / 3.0)

    def test_pareto(self):
        """Test an exact Pareto sample with alpha = 2."""
        alpha_hat, se = hill(pareto(2.0, 100_000, seed=1), k=1000)
        assert abs(alpha_hat - 2.0) <= 4.0 * se

    def test_scale_invariant(self):
        """Test multiplying the data by a constant leaves alpha_hat unchanged."""
        data = pareto(1.5, 10_000, seed=2)
        assert hill(7.0 * data, k=100)[0] == pytest.approx(hill(data, k=100)[0], rel=1e-10)

    def test_order_invariant(self):
        """Test shuffling the data leaves alpha_hat unchanged."""
        data = pareto(1.5, 10_000, seed=3)
        shuffled = stream_generator(4, 0).permutation(data)
        assert hill(shuffled, k=100)[0] == hill(data, k=100)[0]

    def test_does_not_modify_input(self):
        """Test the caller's array is left untouched."""
        data = np.array([3.0, 1.0, 2.0, 5.0])
        hill(data, k=2)
        np.testing.assert_array_equal(data, [3.0, 1.0, 2.0, 5.0])

    def test_default_k(self):
        """Test k defaults to ceil(sqrt(n))."""
        data = pareto(2.0, 10_000, seed=5)
        assert hill(data)[0] == hill(data, k=100)[0]

    @pytest.mark.parametrize("k", [0, 4, 10])
    def test_k_out_of_range(self, k):
        """Test k must lie in [1, n)."""
        with pytest.raises(InsufficientDataError):
            hill([1.0, 2.0, 3.0, 4.0], k=k)

    def test_constant_sample(self):
        """Test vanishing log-excesses are reported."""
        with pytest.raises(InsufficientDataError):
            hill(np.full(100, 2.0), k=10)

    def test_nonpositive_top(self):
        """Test nonpositive order statistics are refused."""
        with pytest.raises(InsufficientDataError):
            hill([-3.0, -2.0, -1.0, 0.0], k=2)

    def test_empty(self):
        """Test an empty sample is refused."""
        with pytest.raises(InsufficientDataError):
            hill([])

    def test_sweep(self):
        """Test the sweep returns rising k with estimates near alpha."""
        rows = hill_sweep(pareto(2.0, 100_000, seed=6))
        ks = [k for k, _, _ in rows]
        assert ks == sorted(ks)
        for _, alpha_hat, se in rows:
            assert abs(alpha_hat - 2.0) <= 5.0 * se


class TestPlateau:
    """Tests for the y^alpha S(y) plateau."""

    def test_pareto_plateau(self):
        """Test the plateau is one for an exact Pareto law."""
        estimate = scale_plateau(pareto(2.0, 1_000_000, seed=7), 2.0)
        assert estimate == pytest.approx(1.0, rel=0.1)

    def test_table_thresholds_increase(self):
        """Test thresholds come out strictly increasing."""
        log_y, scaled = survival_table(pareto(2.0, 100_000, seed=8), 2.0)
        assert np.all(np.diff(log_y) > 0)
        assert log_y.size == scaled.size

    def test_empty_band(self):
        """Test a reversed band is refused."""
        with pytest.raises(InsufficientDataError):
            scale_plateau(pareto(2.0, 100_000, seed=9), 2.0, band=(0.01, 0.001))

    def test_too_few_samples(self):
        """Test a band beyond the sample size is refused."""
        with pytest.raises(InsufficientDataError):
            scale_plateau(pareto(2.0, 1000, seed=10), 2.0)


class TestLogCorrection:
    """Tests for the log-correction slope."""

    def test_corrected_law(self):
        """Test S(y) = e log(y) / y gives slope near one."""
        beta_hat, _ = log_correction_fit(log_corrected(1_000_000, seed=11), 1.0)
        assert 0.6 <= beta_hat <= 1.4

    def test_pure_pareto(self):
        """Test an exact Pareto law gives slope near zero."""
        beta_hat, _ = log_correction_fit(pareto(1.0, 1_000_000, seed=12), 1.0)
        assert abs(beta_hat) <= 0.3

    def test_two_thresholds(self):
        """Test fewer than three thresholds are refused."""
        with pytest.raises(InsufficientDataError):
            log_correction_fit(pareto(1.0, 1_000_000, seed=13), 1.0, points=2)

    def test_degenerate_spread(self):
        """Test a narrow band is refused."""
        with pytest.raises(DegenerateSpreadError):
            log_correction_fit(
                pareto(1.0, 1_000_000, seed=14), 1.0, band=(0.009, 0.01), points=5
            )

    def test_fit_tail_dispatch(self):
        """Test fit_tail returns the plateau when beta = 0 and the slope otherwise."""
        data = pareto(1.0, 1_000_000, seed=15)
        plain = fit_tail(data, 1.0)
        corrected = fit_tail(data, 1.0, beta=1)
        assert plain.scale is not None and plain.beta_hat is None
        assert corrected.beta_hat is not None and corrected.scale is None


class TestValidate:
    """Tests for validating a report against Monte Carlo draws."""

    def test_scalar_benchmark_passes(self, brownian, scalar_iim):
        """Test Hill and plateau agree with the analytic report."""
        report = tail_report(brownian, scalar_iim)
        batch = run_batch(brownian, scalar_iim, 1_000_000, seed=21, streams=4)
        summary = validate(report, batch)
        verdicts = {check.name: check.verdict for check in summary.checks}
        assert verdicts == {"hill_alpha": PASS, "scale_plateau": PASS}
        assert summary.passed
        assert summary.hill_sweep

    def test_corrupted_alpha_fails(self, brownian, scalar_iim):
        """Test a report with a wrong exponent fails."""
        report = tail_report(brownian, scalar_iim)
        wrong = dataclasses.replace(report, alpha=1.5 * report.alpha)
        batch = run_batch(brownian, scalar_iim, 200_000, seed=22)
        summary = validate(wrong, batch)
        assert not summary.passed
        assert summary.checks[0].verdict == FAIL

    def test_two_regime_passes(self, two_regime_model):
        """Test a two-type mixture on a switching model."""
        timing = IIM(probabilities=(0.2, 0.6))
        report = tail_report(two_regime_model, timing)
        batch = run_batch(two_regime_model, timing, 1_000_000, seed=23, streams=4)
        assert validate(report, batch).passed

    def test_lower_tail(self, scalar_iim):
        """Test the lower report is checked against -X_T."""
        model = brownian_model(drift=0.3, variance=1.0)
        report = lower_tail_report(model, scalar_iim)
        batch = run_batch(model, scalar_iim, 1_000_000, seed=24, streams=4)
        summary = validate(report, batch)
        assert summary.checks[0].verdict == PASS
        assert summary.details["side"] == "lower"

    def test_log_correction_checked(self, brownian):
        """Test beta = 1 is validated through the correction slope."""
        timing = IIM(probabilities=(1.0 - np.exp(-0.5),), successes=2)
        report = tail_report(brownian, timing)
        batch = run_batch(brownian, timing, 1_000_000, seed=25, streams=4)
        summary = validate(report, batch)
        names = [check.name for check in summary.checks]
        assert names == ["hill_alpha", "log_correction"]
        assert summary.checks[0].verdict == INFORMATIONAL
        assert summary.checks[1].verdict == PASS
        assert summary.passed

    def test_lattice_plateau_unavailable(self, brownian, scalar_iim, caplog):
        """Test a non-isolated pole reports the plateau as unavailable."""
        report = dataclasses.replace(tail_report(brownian, scalar_iim), uniqueness=False)
        batch = run_batch(brownian, scalar_iim, 200_000, seed=26)
        with caplog.at_level(logging.WARNING):
            summary = validate(report, batch)
        plateau = summary.checks[1]
        assert plateau.verdict == UNAVAILABLE
        assert plateau.target is None
        assert "Paretian limit unavailable" in caplog.text

    def test_biased_hill_does_not_fail_log_corrected(self, brownian):
        """Test a wrong Hill estimate is informational when beta >= 1."""
        timing = IIM(probabilities=(1.0 - np.exp(-0.5),), successes=2)
        report = tail_report(brownian, timing)
        batch = run_batch(brownian, timing, 500_000, seed=30, streams=4)
        summary = validate(report, batch, Tolerances(alpha=1e-6, log_order=10.0))
        hill_check = summary.checks[0]
        assert hill_check.verdict == INFORMATIONAL
        assert "not judged" in hill_check.reason
        assert summary.passed

    def test_two_atom_lattice_plateau_unavailable(self):
        """Test commensurate atoms withhold the plateau target."""
        model = ModulatedModel(
            regimes=(RegimeExponent(jump_intensity=1.0, jump=TwoPointJump(0.7, 1.1, 0.5)),),
            generator=[[0.0]],
        )
        timing = IIM(probabilities=(0.3,))
        report = tail_report(model, timing)
        batch = run_batch(model, timing, 200_000, seed=31)
        plateau = validate(report, batch).checks[1]
        assert plateau.name == "scale_plateau"
        assert plateau.verdict == UNAVAILABLE
        assert plateau.target is None

    def test_tight_tolerance_fails(self, brownian, scalar_iim):
        """Test a tiny tolerance turns the checks into failures."""
        report = tail_report(brownian, scalar_iim)
        batch = run_batch(brownian, scalar_iim, 100_000, seed=27)
        summary = validate(report, batch, Tolerances(alpha=1e-6, scale=1e-6))
        assert not summary.passed

    def test_too_small_batch_fails_with_reason(self, brownian, scalar_iim):
        """Test estimator failures become failed checks with a reason."""
        report = tail_report(brownian, scalar_iim)
        batch = run_batch(brownian, scalar_iim, 500, seed=28)
        summary = validate(report, batch)
        plateau = summary.checks[1]
        assert plateau.verdict == FAIL
        assert "exceedances" in plateau.reason

    def test_summary_dict(self, brownian, scalar_iim):
        """Test the summary dictionary lists every check."""
        report = tail_report(brownian, scalar_iim)
        batch = run_batch(brownian, scalar_iim, 100_000, seed=29)
        document = validate(report, batch).to_dict()
        assert [c["name"] for c in document["checks"]] == ["hill_alpha", "scale_plateau"]
        assert document["details"]["count"] == 100_000
