"""
Experiment runner.

This module ties the market, solver and verification modules into the
five run modes of the command line: simulate, solve-bsde,
optimal-strategy, verify and report. Every mode writes its outputs, the
effective configuration and an atomically written manifest to the output
directory.
"""

import logging
import time
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..bsde.exponential import deterministic_solution, lattice_backward_induction
from ..bsde.picard import PicardResult, picard_solve_coupled
from ..config.settings import ExperimentConfig
from ..market.simulation import PathBundle, integrate_wealth, simulate_paths
from ..market.strategies import DeterministicStrategy, LatticeStrategy, Strategy
from ..optimality.equations import StateTuple, certify, pure_jump_first_order_residual
from ..utility.functions import ExponentialUtility
from ..utils.io import config_hash, path_rows, write_csv, write_json
from ..verify.suite import VerificationSuite
from .data_structures import AdjointProcess, BsdeSolution, CheckResult, RunManifest, RunMetrics
from .exceptions import ConfigurationError, VerificationError

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("simulate", "solve-bsde", "optimal-strategy", "verify", "report")
CONFIG_FILE = "config.json"
PATH_FIELDS = ("path", "step", "t", "dW", "dN", "X")
SOLUTION_FIELDS = ("t", "state", "Y", "Z", "Psi", "pi")
STRATEGY_FIELDS = ("step", "t", "state", "label", "pi", "residual")


def manifest_name(subcommand: str) -> str:
    return f"manifest_{subcommand.replace('-', '_')}.json"


class ExperimentRunner:
    """
    Runs one experiment configuration.

    The path bundle, the backward-equation solution and the optimal strategy
    are computed at most once per runner and shared by the run modes.

    Args:
        config: Validated experiment configuration
        overrides: Command-line overrides already applied to ``config``
    """

    def __init__(self, config: ExperimentConfig, overrides: Sequence[str] = ()):
        self.config = config
        self.overrides = list(overrides)
        self.grid = config.grid.build()
        self.coeffs = config.market.build()
        self.utility = config.utility.build()
        self.liability = config.liability.build()

        self.metrics = RunMetrics()
        self.output_log: List[str] = []

        self._paths: Optional[PathBundle] = None
        self._solution: Optional[BsdeSolution] = None
        self._picard: Optional[PicardResult] = None
        self._strategy: Optional[Tuple[Strategy, Optional[AdjointProcess]]] = None

    @classmethod
    def from_config(cls, config: ExperimentConfig,
                    overrides: Sequence[str] = ()) -> "ExperimentRunner":
        """
        Create runner from configuration object.

        Args:
            config: ExperimentConfig instance
            overrides: ``key=value`` items recorded in the manifests

        Returns:
            Configured runner instance
        """
        config.validate()
        config.setup_logging()
        return cls(config, overrides)

    @property
    def tier(self) -> str:
        return self.config.solver.tier

    @property
    def seed(self) -> int:
        return int(self.config.mc.seed)

    def _log(self, message: str) -> None:
        """
        Log message to both logger and internal log.

        Args:
            message: Message to log
        """
        logger.info(message)
        self.output_log.append(message)

    def _timed(self, stage: str, start: float) -> float:
        elapsed = time.time() - start
        self.metrics.add_stage_time(stage, elapsed)
        return elapsed

    # ------------------------------------------------------------------
    # Computations

    @property
    def paths(self) -> PathBundle:
        """The experiment's path bundle (mc.n_paths paths, mc.seed)."""
        if self._paths is None:
            mc = self.config.mc
            start = time.time()
            self._paths = simulate_paths(self.coeffs, self.grid, mc.n_paths, mc.seed, mc.threads)
            self._log(f"Simulated {mc.n_paths} paths in {self._timed('simulate', start):.2f}s")
        return self._paths

    def picard_paths(self) -> PathBundle:
        """Bundle of the coupled solver: the first solver.picard_paths paths of the experiment."""
        n = min(self.config.solver.picard_paths, self.config.mc.n_paths)
        return self.paths if n == self.paths.n_paths else self.paths.subset(n)

    def picard(self) -> PicardResult:
        if self._picard is None:
            solver = self.config.solver
            bundle = self.picard_paths()
            start = time.time()
            self._picard = picard_solve_coupled(
                self.coeffs, self.utility, self.liability, self.grid,
                n_paths=bundle.n_paths, n_iter=solver.n_iter,
                regression_degree=solver.regression_degree, seed=self.seed,
                x0=self.config.mc.x0, damping=solver.damping, estimator=solver.estimator,
                threads=self.config.mc.threads, paths=bundle, solver_tol=solver.tol)
            diagnostics = self._picard.diagnostics
            self._log(f"Picard solver: {diagnostics.iterations} iterations, residual "
                      f"{diagnostics.residual[-1]:.4e} in {self._timed('picard', start):.2f}s")
        return self._picard

    def solve_bsde(self) -> BsdeSolution:
        """
        Solve the backward equation with the configured tier.

        Returns:
            BsdeSolution

        Raises:
            ConfigurationError: If the tier does not apply to the configuration
        """
        if self._solution is not None:
            return self._solution
        if self.tier == "picard":
            self._solution = self.picard().solution
            self._log(f"Backward equation (picard): mean Y_0 = {self._solution.y0:.10g}")
            return self._solution
        start = time.time()
        delta = self._exponential().delta
        if self.tier == "ode":
            H = self.liability.constant_value
            if H is None:
                raise ConfigurationError("tier ode needs a constant liability",
                                         key="liability.kind")
            self._solution = deterministic_solution(self.coeffs, delta, H, self.grid)
        else:
            self._solution = lattice_backward_induction(
                self.coeffs, delta, self.liability, self.grid, self.config.solver.tail_eps)
        self._log(f"Backward equation ({self.tier}): Y_0 = {self._solution.y0:.10g} "
                  f"in {self._timed('solve_bsde', start):.2f}s")
        return self._solution

    def _exponential(self) -> ExponentialUtility:
        if not isinstance(self.utility, ExponentialUtility):
            raise ConfigurationError(f"tier {self.tier} needs exponential utility",
                                     key="utility.family")
        return self.utility

    def optimal_strategy(self) -> Tuple[Strategy, Optional[AdjointProcess]]:
        """
        Candidate optimal strategy of the configured tier.

        ``ode``: the deterministic exponential strategy; ``lattice``: the
        explicit strategy per (step, jump count) of the lattice solution;
        ``picard``: the coupled solver's table on its own bundle, with the
        adjoint process.
        """
        if self._strategy is None:
            solution = self.solve_bsde()
            if self.tier == "picard":
                result = self.picard()
                self._strategy = (result.strategy, result.adjoint)
            elif self.tier == "lattice":
                self._strategy = (LatticeStrategy(solution.pi, label="pi*_lattice"), None)
            else:
                assert solution.pi is not None
                self._strategy = (DeterministicStrategy(solution.pi[:, 0], label="pi*_ode"), None)
        return self._strategy

    def strategy_rows(self) -> Iterator[Dict[str, Any]]:
        """
        Strategy table with the first-order residual certificate of every row.

        Deterministic and lattice rows are exact per state; Picard rows give
        the path mean of the strategy and the largest residual over paths.
        """
        solution = self.solve_bsde()
        strategy, _ = self.optimal_strategy()
        times = self.grid.times
        mu, sigma, eta = self.coeffs.at(times[:-1])
        nu = self.coeffs.nu
        assert solution.pi is not None

        if self.tier != "picard":
            for i in range(self.grid.M):
                psi = solution.Psi[i]
                pi = solution.pi[i]
                residual = np.abs(pure_jump_first_order_residual(
                    0.0, solution.Y[i], psi, pi, mu[i], eta[i], nu, self.utility))
                residual = np.broadcast_to(residual, pi.shape)
                for state in range(pi.size):
                    yield {"step": i, "t": float(times[i]), "state": state,
                           "label": strategy.label, "pi": float(pi[state]),
                           "residual": float(residual[state])}
            return

        wealth = self.picard().wealth
        for i in range(self.grid.M):
            x, y = wealth.X[:, i], solution.Y[i]
            pi = solution.pi[i]
            if self.coeffs.is_pure_jump:
                value = pure_jump_first_order_residual(x, y, solution.Psi[i], pi, mu[i], eta[i],
                                                       nu, self.utility)
                residual = float(np.max(np.abs(value)))
            else:
                w = StateTuple(x=x, y=y, z=solution.Z[i], psi=solution.Psi[i],
                               eta=eta[i], mu=mu[i], sigma=sigma[i])
                residual = certify(w, pi, self.utility, nu)
            yield {"step": i, "t": float(times[i]), "state": "mean", "label": strategy.label,
                   "pi": float(np.mean(pi)), "residual": residual}

    def verification_paths(self) -> PathBundle:
        """Picard table strategies are only defined on the solver's own bundle."""
        return self.picard_paths() if self.tier == "picard" else self.paths

    def verify(self, checks: Optional[Sequence[str]] = None) -> List[CheckResult]:
        """Run the configured checks against the tier's optimal strategy."""
        strategy, adjoint = self.optimal_strategy()
        start = time.time()
        suite = VerificationSuite(self.coeffs, self.utility, self.liability, self.grid, strategy,
                                  self.verification_paths(), x0=self.config.mc.x0,
                                  band=self.config.verify.band, adjoint=adjoint)
        results = suite.run(checks if checks is not None else self.config.verify.checks)
        for name, seconds in suite.timings.items():
            self.metrics.stage_times[f"check_{name}"] = seconds
        self._timed("verify", start)
        return results

    # ------------------------------------------------------------------
    # Run modes

    def _finish(self, subcommand: str, out_dir: Path, outputs: Dict[str, str],
                diagnostics: Dict[str, Any], passed: bool = True) -> RunManifest:
        """Write the config copy and the manifest; every named output must exist."""
        from .. import __version__

        data = self.config.to_dict()
        write_json(data, out_dir / CONFIG_FILE)
        outputs = {"config": CONFIG_FILE, **outputs}
        manifest = RunManifest(
            subcommand=subcommand, config_hash=config_hash(data), version=__version__,
            seed=self.seed, outputs=outputs, diagnostics=diagnostics,
            timings=self.metrics.to_dict(), passed=passed, overrides=self.overrides)
        missing = manifest.missing_outputs(out_dir)
        if missing:
            raise VerificationError(f"{subcommand}: outputs not written: {missing}")
        manifest.save_to_file(out_dir / manifest_name(subcommand))
        self._log(f"{subcommand} finished in {self.metrics.total_time:.2f}s; "
                  f"manifest {manifest_name(subcommand)}")
        return manifest

    def run_simulate(self, out_dir: Union[str, Path]) -> RunManifest:
        """
        Simulate the bundle and dump the first mc.dump_paths paths.

        X is the wealth of the optimal strategy for the ``ode`` and
        ``lattice`` tiers and left blank for ``picard``.
        """
        out_dir = Path(out_dir)
        self._log("[1/2] Simulating paths...")
        paths = self.paths
        X = None
        if self.tier != "picard":
            strategy, _ = self.optimal_strategy()
            X = integrate_wealth(paths, self.coeffs, strategy, self.config.mc.x0).X
        limit = self.config.mc.dump_paths
        self._log(f"[2/2] Writing {min(limit, paths.n_paths)} paths...")
        rows = path_rows(self.grid.times, paths.dW, paths.dN, X, limit)
        write_csv(rows, out_dir / "paths.csv", PATH_FIELDS)
        return self._finish("simulate", out_dir, {"paths": "paths.csv"}, paths.summary())

    def run_solve_bsde(self, out_dir: Union[str, Path]) -> RunManifest:
        out_dir = Path(out_dir)
        self._log(f"[1/2] Solving the backward equation (tier {self.tier})...")
        solution = self.solve_bsde()
        self._log("[2/2] Writing solution...")
        write_csv(solution.rows(), out_dir / "bsde_solution.csv", SOLUTION_FIELDS)
        summary = solution.to_dict()
        if self._picard is not None:
            summary["picard"] = self._picard.diagnostics.to_dict()
        write_json(summary, out_dir / "bsde_solution.json")
        return self._finish("solve-bsde", out_dir,
                            {"solution": "bsde_solution.csv", "summary": "bsde_solution.json"},
                            {"Y_0": solution.y0, "tier": self.tier})

    def run_optimal_strategy(self, out_dir: Union[str, Path]) -> RunManifest:
        out_dir = Path(out_dir)
        self._log(f"[1/2] Resolving the optimal strategy (tier {self.tier})...")
        strategy, _ = self.optimal_strategy()
        self._log("[2/2] Writing strategy table with residual certificates...")
        rows = list(self.strategy_rows())
        write_csv(rows, out_dir / "strategy.csv", STRATEGY_FIELDS)
        max_residual = max((r["residual"] for r in rows), default=0.0)
        self._log(f"Strategy {strategy.label}: {len(rows)} rows, max residual {max_residual:.3e}")
        return self._finish("optimal-strategy", out_dir, {"strategy": "strategy.csv"},
                            {"label": strategy.label, "rows": len(rows),
                             "max_residual": max_residual, "tier": self.tier})

    def run_verify(self, out_dir: Union[str, Path],
                   checks: Optional[Sequence[str]] = None) -> RunManifest:
        """
        Run the verification suite and write verification.json.

        The manifest's ``passed`` is False when any check failed; skipped
        and warn-only checks do not fail the run.
        """
        out_dir = Path(out_dir)
        self._log(f"[1/2] Verifying the optimal strategy (tier {self.tier})...")
        results = self.verify(checks)
        passed = all(r.passed is not False for r in results)
        strategy, _ = self.optimal_strategy()
        self._log(f"[2/2] Writing report: {'all checks passed' if passed else 'FAILED'}")
        report = {
            "passed": passed,
            "tier": self.tier,
            "strategy": strategy.label,
            "paths": self.verification_paths().summary(),
            "checks": [r.to_dict() for r in results],
        }
        write_json(report, out_dir / "verification.json")
        summary = {r.name: ("skipped" if r.status == "skipped" else r.passed) for r in results}
        return self._finish("verify", out_dir, {"report": "verification.json"},
                            {"checks": summary}, passed=passed)


def verify_manifest(out_dir: Union[str, Path], subcommand: str) -> List[str]:
    """
    Check a manifest against the directory it describes.

    Returns:
        Problems found: missing outputs, a config hash that does not match
        the stored config copy; empty when the manifest is consistent
    """
    from ..config.settings import load_config_data

    out_dir = Path(out_dir)
    manifest = RunManifest.load_from_file(out_dir / manifest_name(subcommand))
    problems = [f"missing output {name}" for name in manifest.missing_outputs(out_dir)]
    config_file = out_dir / manifest.outputs.get("config", CONFIG_FILE)
    if config_file.exists():
        stored = load_config_data(config_file)
        if config_hash(stored) != manifest.config_hash:
            problems.append(f"config hash mismatch for {config_file.name}")
        else:
            ExperimentConfig.from_dict(stored).validate()
    return problems


def build_report(out_dir: Union[str, Path]) -> Tuple[str, bool]:
    """
    Human-readable summary of every manifest in a directory.

    Returns:
        (report text, True when every manifest passed and is consistent)

    Raises:
        ConfigurationError: If the directory holds no manifests
    """
    out_dir = Path(out_dir)
    lines = [f"jumpfbsde report for {out_dir}", ""]
    ok = True
    found = 0
    for subcommand in SUBCOMMANDS[:-1]:
        path = out_dir / manifest_name(subcommand)
        if not path.exists():
            continue
        found += 1
        manifest = RunManifest.load_from_file(path)
        problems = verify_manifest(out_dir, subcommand)
        ok = ok and manifest.passed and not problems
        total = manifest.timings.get("total_time", 0.0)
        lines.append(f"[{subcommand}] {'PASSED' if manifest.passed else 'FAILED'} "
                     f"(version {manifest.version}, seed {manifest.seed}, {total:.2f}s)")
        lines.append(f"  config hash: {manifest.config_hash}")
        if manifest.overrides:
            lines.append(f"  overrides:   {', '.join(manifest.overrides)}")
        for name, value in manifest.diagnostics.items():
            if isinstance(value, dict):
                value = ", ".join(f"{k}={v}" for k, v in value.items())
            lines.append(f"  {name}: {value}")
        for problem in problems:
            lines.append(f"  PROBLEM: {problem}")
        lines.append("")
    if not found:
        raise ConfigurationError(f"no manifests found in {out_dir}", key="--out")
    text = "\n".join(lines)
    (out_dir / "report.txt").write_text(text + "\n", encoding="utf-8")
    logger.info(f"Report over {found} manifests written to {out_dir / 'report.txt'}")
    return text, ok
