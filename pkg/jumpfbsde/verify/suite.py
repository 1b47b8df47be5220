"""
Verification checks composed into pass/fail records.

A check that does not apply to the configured market, utility or liability
is recorded as skipped with its reason instead of failing.
"""

import logging
import time
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from ..bsde.exponential import check_driver_bounds
from ..bsde.liability import Liability
from ..bsde.pure_investment import construct_pure_investment, martingale_jump_identity
from ..core.data_structures import AdjointProcess, CheckResult
from ..core.exceptions import ConfigurationError
from ..market.coefficients import MarketCoefficients, TimeGrid
from ..market.simulation import PathBundle, integrate_wealth
from ..market.strategies import ConstantStrategy, PerturbedStrategy, StepStrategy, Strategy
from ..utility.functions import ExponentialUtility, UtilityFunction
from .audit import hypothesis_audit
from .estimators import (MIN_ESS_FRACTION, gateaux_derivative, q_measure_drift_check,
                         utility_epsilon_scan, utility_gap)
from .martingale import checkpoint_indices, doleans_exponential, martingale_diagnostic

logger = logging.getLogger(__name__)

CHECKS = ("gateaux", "utility_gap", "epsilon_scan", "martingale", "q_measure", "audit",
          "driver_bounds")
GAP_EPSILONS = (-0.2, -0.1, 0.1, 0.2)
SCAN_EPSILONS = tuple(np.round(np.arange(-0.2, 0.2001, 0.05), 10).tolist())
NEGATIVE_SHIFT = 0.2
IDENTITY_TOL = 1e-12
DRIVER_TOL = 1e-10


class VerificationSuite:
    """
    Runs the verification checks against a candidate optimal strategy on one path bundle.

    Args:
        coeffs: Market coefficients
        U: Utility
        liability: Terminal liability
        grid: Time grid
        pi_star: Candidate optimal strategy
        paths: Path bundle shared by every check
        x0: Initial capital
        band: Acceptance band in standard errors
        adjoint: Adjoint process when pi_star came from the coupled solver
    """

    def __init__(
        self,
        coeffs: MarketCoefficients,
        U: UtilityFunction,
        liability: Liability,
        grid: TimeGrid,
        pi_star: Strategy,
        paths: PathBundle,
        x0: float = 0.0,
        band: float = 3.0,
        adjoint: Optional[AdjointProcess] = None,
    ):
        if not band > 0:
            raise ConfigurationError("band multiplier must be positive", key="verify.band")
        self.coeffs = coeffs
        self.U = U
        self.liability = liability
        self.grid = grid
        self.pi_star = pi_star
        self.paths = paths
        self.x0 = x0
        self.band = band
        self.adjoint = adjoint
        self.timings: Dict[str, float] = {}
        self.unit = ConstantStrategy(1.0, label="h=1")
        self.step = StepStrategy(1.0, grid.T / 2, label="h=1{t<=T/2}")

    @property
    def seed(self) -> int:
        return self.paths.seed

    def _record(self, name: str, **kwargs: Any) -> CheckResult:
        return CheckResult(name=name, seed=self.seed, n_paths=self.paths.n_paths, **kwargs)

    def _skip(self, name: str, reason: str) -> CheckResult:
        logger.info(f"Skipping {name}: {reason}")
        return CheckResult(name=name, estimate=None, se=None, band=None, passed=None,
                           seed=self.seed, n_paths=self.paths.n_paths, status="skipped",
                           details={"reason": reason})

    @property
    def _exponential_pure_jump(self) -> bool:
        return isinstance(self.U, ExponentialUtility) and self.coeffs.is_pure_jump

    def _common(self) -> Dict[str, Any]:
        return {"U": self.U, "liability": self.liability, "coeffs": self.coeffs,
                "grid": self.grid, "n_paths": self.paths.n_paths, "seed": self.seed,
                "x0": self.x0, "paths": self.paths}

    def check_gateaux(self) -> CheckResult:
        """|E[U'(X*) X^{0,h}]| within the band for h = 1 and a step; pi* + 0.2 must fail."""
        estimates = [gateaux_derivative(self.pi_star, h, **self._common())
                     for h in (self.unit, self.step)]
        shifted = PerturbedStrategy(self.pi_star, self.unit, NEGATIVE_SHIFT)
        control = gateaux_derivative(shifted, self.unit, **self._common())
        inside = all(abs(e.mean) <= self.band * e.std_error for e in estimates)
        control_fails = abs(control.mean) > self.band * control.std_error
        worst = max(estimates, key=lambda e: abs(e.mean) / max(e.std_error, 1e-300))
        return self._record(
            "gateaux", estimate=worst.mean, se=worst.std_error, band=self.band,
            passed=inside and control_fails,
            details={"directions": [e.to_dict() for e in estimates],
                     "negative_control": control.to_dict(),
                     "negative_control_rejected": control_fails})

    def check_utility_gap(self) -> CheckResult:
        """E[U(pi* + eps)] - E[U(pi*)] below zero beyond the band for every eps."""
        rows = []
        passed = True
        for eps in GAP_EPSILONS:
            gap = utility_gap(PerturbedStrategy(self.pi_star, self.unit, eps), self.pi_star,
                              **self._common())
            ok = gap.mean < 0 and abs(gap.mean) > self.band * gap.std_error
            passed = passed and ok
            rows.append({"epsilon": eps, **gap.to_dict(), "passed": ok})
        worst = max(rows, key=lambda r: r["mean"])
        return self._record("utility_gap", estimate=worst["mean"], se=worst["std_error"],
                            band=self.band, passed=passed, details={"gaps": rows})

    def check_epsilon_scan(self) -> CheckResult:
        """The scan of expected utility peaks at eps = 0 within one grid step."""
        scan = utility_epsilon_scan(self.pi_star, self.unit, SCAN_EPSILONS, **self._common())
        spacing = SCAN_EPSILONS[1] - SCAN_EPSILONS[0]
        passed = abs(scan.argmax) <= spacing + 1e-12
        return self._record("epsilon_scan", estimate=scan.argmax, se=None, band=spacing,
                            passed=passed, details=scan.to_dict())

    def check_martingale(self) -> CheckResult:
        """Doleans exponential and U'(X) e^A of the pure investment solution, or alpha."""
        checkpoints = checkpoint_indices(self.grid.M)
        reports = []
        details: Dict[str, Any] = {}
        passed = True
        if self.coeffs.is_pure_jump:
            m = self.coeffs.jump_ratio(self.grid.times[:-1])
            doleans = doleans_exponential(self.paths, -m)
            reports.append(martingale_diagnostic(doleans[:, checkpoints], checkpoints,
                                                 label="doleans(-m n)"))
            if self._exponential_pure_jump and self.liability.constant_value == 0.0:
                solution = construct_pure_investment(self.coeffs, self.U, self.paths, self.x0)
                marginal = solution.marginal_process()
                reports.append(martingale_diagnostic(marginal[:, checkpoints], checkpoints,
                                                     label="U'(X) e^A"))
                if self.coeffs.is_time_homogeneous:
                    error = float(np.max(martingale_jump_identity(solution, self.paths,
                                                                  self.coeffs)))
                    details["jump_identity_max_error"] = error
                    passed = passed and error <= IDENTITY_TOL
        elif self.adjoint is None:
            return self._skip("martingale", "needs a pure-jump market or a coupled-solver adjoint")
        if self.adjoint is not None and self.adjoint.alpha.shape[0] == self.paths.n_paths:
            reports.append(martingale_diagnostic(self.adjoint.alpha[:, checkpoints], checkpoints,
                                                 label="alpha"))
        passed = passed and all(r.max_deviation <= self.band for r in reports)
        worst = max(reports, key=lambda r: r.max_deviation)
        details["reports"] = [r.to_dict() for r in reports]
        return self._record("martingale", estimate=worst.max_deviation, se=None,
                            band=self.band, passed=passed, details=details)

    def check_q_measure(self) -> CheckResult:
        """Weighted drift of pi - pi* vanishes; the unweighted control must not."""
        tests = [PerturbedStrategy(self.pi_star, self.unit, 1.0),
                 PerturbedStrategy(self.pi_star, self.step, 1.0)]
        weighted = q_measure_drift_check(self.pi_star, test_strategies=tests, weighted=True,
                                         **self._common())
        control = q_measure_drift_check(self.pi_star, test_strategies=tests[:1], weighted=False,
                                        **self._common())[0]
        inside = all(abs(d.mean) <= self.band * d.std_error for d in weighted)
        ess_ok = all(d.effective_sample_size >= MIN_ESS_FRACTION * d.n_paths for d in weighted)
        mu, _, _ = self.coeffs.at(self.grid.times[:-1])
        control_expected = bool(np.any(mu != 0))
        control_fails = abs(control.mean) > self.band * control.std_error
        passed = inside and ess_ok and (control_fails or not control_expected)
        worst = max(weighted, key=lambda d: abs(d.mean) / max(d.std_error, 1e-300))
        return self._record(
            "q_measure", estimate=worst.mean, se=worst.std_error, band=self.band, passed=passed,
            details={"weighted": [d.to_dict() for d in weighted],
                     "unweighted_control": control.to_dict(),
                     "control_rejected": control_fails, "ess_ok": ess_ok})

    def check_audit(self) -> CheckResult:
        """Warn-only audit of the integrability hypotheses."""
        wealth = integrate_wealth(self.paths, self.coeffs, self.pi_star, self.x0)
        H = self.liability.terminal(self.paths.N[:, -1], self.paths.W[:, -1])
        report = hypothesis_audit(self.U, wealth.terminal, H)
        return self._record("audit", estimate=None, se=None, band=report.tolerance, passed=None,
                            status=report.status, details=report.to_dict())

    def check_driver_bounds(self) -> CheckResult:
        """Growth and monotonicity bounds of the exponential driver at each market state."""
        if not self._exponential_pure_jump:
            return self._skip("driver_bounds", "needs exponential utility in the pure-jump model")
        mu, _, eta = self.coeffs.at(self.grid.times)
        states = np.unique(np.column_stack([mu, eta]), axis=0)
        z_grid = np.linspace(-2.0, 2.0, 50)
        psi_grid = np.linspace(-2.0, 2.0, 50)
        reports = [check_driver_bounds(float(m_), float(e_), self.coeffs.nu, self.U.delta,
                                       z_grid, psi_grid) for m_, e_ in states]
        growth = max(r.growth_violation for r in reports)
        monotonicity = max(r.monotonicity_violation for r in reports)
        return self._record("driver_bounds", estimate=growth, se=None, band=DRIVER_TOL,
                            passed=growth <= DRIVER_TOL and monotonicity == 0.0,
                            details={"reports": [r.to_dict() for r in reports[:10]],
                                     "monotonicity_violation": monotonicity})

    def run(self, checks: Sequence[str] = CHECKS) -> List[CheckResult]:
        """
        Run the named checks in order.

        Raises:
            ConfigurationError: If a check name is unknown
        """
        table: Dict[str, Callable[[], CheckResult]] = {
            "gateaux": self.check_gateaux,
            "utility_gap": self.check_utility_gap,
            "epsilon_scan": self.check_epsilon_scan,
            "martingale": self.check_martingale,
            "q_measure": self.check_q_measure,
            "audit": self.check_audit,
            "driver_bounds": self.check_driver_bounds,
        }
        results = []
        for name in checks:
            if name not in table:
                raise ConfigurationError(f"unknown check {name!r}", key="verify.checks")
            start = time.time()
            result = table[name]()
            self.timings[name] = time.time() - start
            verdict = {True: "passed", False: "FAILED", None: result.status}[result.passed]
            logger.info(f"Check {name}: {verdict} ({self.timings[name]:.2f}s)")
            results.append(result)
        return results
