"""
Core data structures for jumpfbsde.

Result containers shared by the solvers, the verification checks and the
experiment runner. Arrays are numpy; ``to_dict`` gives JSON-ready summaries.
"""

import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

from ..utils.io import to_jsonable


@dataclass
class AdjointProcess:
    """
    Martingale alpha_t = E[U'(X_T + H) | F_t] and its integrands.

    Attributes:
        alpha: Values per path and grid point, shape (n_paths, M + 1), positive
        beta: Brownian integrand per path and step, shape (n_paths, M)
        gamma: Jump integrand per path and step, shape (n_paths, M)
    """
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    def increment_residual(self, dW: np.ndarray, dn: np.ndarray) -> np.ndarray:
        """alpha_{i+1} - alpha_i - beta_i dW_i - gamma_i dn_i per path and step."""
        return np.diff(self.alpha, axis=1) - self.beta * dW - self.gamma * dn

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha_0": float(np.mean(self.alpha[:, 0])),
            "alpha_min": float(np.min(self.alpha)),
            "beta_mean_abs": float(np.mean(np.abs(self.beta))),
            "gamma_mean_abs": float(np.mean(np.abs(self.gamma))),
        }


@dataclass
class BsdeSolution:
    """
    Solution (Y, Z, Psi) of a backward equation on the time grid.

    The second axis is the state: a single column for deterministic
    solutions, the jump count n for lattice solutions, the path index for
    Monte Carlo solutions.

    Attributes:
        times: Grid points, length M + 1
        Y: Values, shape (M + 1, n_states)
        Z: Brownian integrand, shape (M, n_states)
        Psi: Jump integrand, shape (M, n_states)
        H: Terminal condition in the same state representation, length n_states
        representation: ``deterministic``, ``lattice`` or ``paths``
        scheme: Name of the producing scheme
        pi: Optional strategy per step and state, shape (M, n_states)
        adjoint: Adjoint triple when produced by the coupled solver
        metadata: Scheme parameters and diagnostics
    """
    times: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Psi: np.ndarray
    H: np.ndarray
    representation: str
    scheme: str
    pi: Optional[np.ndarray] = None
    adjoint: Optional[AdjointProcess] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def y0(self) -> float:
        """Initial value (path average for Monte Carlo solutions)."""
        if self.representation == "paths":
            return float(np.mean(self.Y[0]))
        return float(self.Y[0, 0])

    @property
    def n_states(self) -> int:
        return int(self.Y.shape[1])

    def terminal_matches(self) -> bool:
        """Y at the horizon equals H exactly."""
        return bool(np.array_equal(self.Y[-1], self.H))

    def rows(self, max_states: Optional[int] = None) -> Iterator[Dict[str, Any]]:
        """CSV rows (t, state, Y, Z, Psi, pi); Z, Psi and pi are blank at the horizon."""
        n_states = self.n_states if max_states is None else min(self.n_states, max_states)
        last = len(self.times) - 1
        for i, t in enumerate(self.times):
            for s in range(n_states):
                step = i < last
                yield {
                    "t": float(t),
                    "state": s,
                    "Y": float(self.Y[i, s]),
                    "Z": float(self.Z[i, s]) if step else None,
                    "Psi": float(self.Psi[i, s]) if step else None,
                    "pi": float(self.pi[i, s]) if step and self.pi is not None else None,
                }

    def to_dict(self) -> Dict[str, Any]:
        """JSON metadata block."""
        result = {
            "scheme": self.scheme,
            "representation": self.representation,
            "Y_0": self.y0,
            "n_states": self.n_states,
            "M": len(self.times) - 1,
            "T": float(self.times[-1]),
            "terminal_condition_exact": self.terminal_matches(),
            "metadata": self.metadata,
        }
        if self.adjoint is not None:
            result["adjoint"] = self.adjoint.to_dict()
        return result


@dataclass
class PureInvestmentSolution:
    """
    Explicit forward-backward solution of the pure investment problem (H = 0).

    Attributes:
        times: Grid points
        a: Auxiliary rate a(t_i), length M + 1
        A: A(t_i) = -integral of a from t_i to T, length M + 1
        X: Wealth, shape (n_paths, M + 1)
        Y: Backward component, shape (n_paths, M + 1)
        Psi: Jump integrand, shape (n_paths, M)
        pi: Strategy, shape (n_paths, M)
        log_marginal: log U'(X_t) + A_t, shape (n_paths, M + 1)
    """
    times: np.ndarray
    a: np.ndarray
    A: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Psi: np.ndarray
    pi: np.ndarray
    log_marginal: np.ndarray

    def marginal_process(self) -> np.ndarray:
        """U'(X_t) e^{A_t} divided by its (deterministic) initial value."""
        return np.exp(self.log_marginal - self.log_marginal[:, :1])

    def to_bsde_solution(self) -> BsdeSolution:
        """Path representation (Z = 0) for export."""
        n = self.X.shape[0]
        return BsdeSolution(
            times=self.times, Y=self.Y.T.copy(), Z=np.zeros((len(self.times) - 1, n)),
            Psi=self.Psi.T.copy(), H=np.zeros(n), representation="paths",
            scheme="pure_investment", pi=self.pi.T.copy(),
            metadata={"A_0": float(self.A[0])})

    def to_dict(self) -> Dict[str, Any]:
        return {
            "A_0": float(self.A[0]),
            "A_T": float(self.A[-1]),
            "Y_0": float(np.mean(self.Y[:, 0])),
            "pi_mean": float(np.mean(self.pi)),
            "psi_max_abs": float(np.max(np.abs(self.Psi))) if self.Psi.size else 0.0,
        }


@dataclass
class PicardDiagnostics:
    """
    Per-iteration record of the coupled solver.

    Attributes:
        residual: Sup over steps of the path RMS of the optimality residual divided by alpha,
            evaluated at iterate k before its update
        strategy_change: Sup-norm of pi^{k+1} - pi^k
        mean_strategy: Path-mean strategy per step of the returned iterate
        alpha_clips: Number of alpha values raised to the positivity floor, per iteration
        jump_clips: Number of alpha + gamma values raised to the floor, per iteration
        reduced_steps: Steps whose regression degree had to be lowered, per iteration
        non_convergence: Residual increased on three consecutive iterations
        estimator: Integrand estimator used
    """
    residual: List[float] = field(default_factory=list)
    strategy_change: List[float] = field(default_factory=list)
    mean_strategy: List[float] = field(default_factory=list)
    alpha_clips: List[int] = field(default_factory=list)
    jump_clips: List[int] = field(default_factory=list)
    reduced_steps: List[int] = field(default_factory=list)
    non_convergence: bool = False
    estimator: str = "increment"

    @property
    def iterations(self) -> int:
        return len(self.strategy_change)

    def residual_drop(self) -> float:
        """First residual divided by the last one."""
        if len(self.residual) < 2 or self.residual[-1] == 0:
            return float("inf")
        return self.residual[0] / self.residual[-1]

    def to_dict(self) -> Dict[str, Any]:
        result = asdict(self)
        result["iterations"] = self.iterations
        return result


@dataclass
class DriverBoundReport:
    """
    Growth and monotonicity check of the exponential driver.

    Attributes:
        lam: Envelope constant lambda
        psi_star: Maximizer of f - dz^2/2 - [psi]_delta
        zeta: Monotonicity coefficient -mu/(eta nu)
        D1, D2: Bounds with D1 <= zeta <= D2
        envelope_at_psi_star: -lambda, the value reported at psi_star
        peak: Attained maximum of f - dz^2/2 - [psi]_delta
        growth_violation: Largest violation of the two-sided growth bound
        monotonicity_violation: Largest violation of the monotonicity bound
    """
    lam: float
    psi_star: float
    zeta: float
    D1: float
    D2: float
    envelope_at_psi_star: float
    peak: float
    growth_violation: float
    monotonicity_violation: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass
class GateauxEstimate:
    """Monte Carlo estimate of E[U'(X_T^pi + H) X_T^{0,h}]."""
    mean: float
    std_error: float
    n_paths: int
    direction: str
    strategy: str
    excluded: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class GapEstimate:
    """Common-random-number utility difference E[U(a)] - E[U(b)]; unpacks as (mean, se)."""
    mean: float
    std_error: float
    n_paths: int
    excluded: int = 0

    def __iter__(self) -> Iterator[float]:
        return iter((self.mean, self.std_error))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class EpsilonScan:
    """Expected utility of pi* + epsilon h over a grid of epsilon on common random numbers."""
    epsilons: List[float]
    utilities: List[float]
    gaps: List[float]
    gap_std_errors: List[float]
    n_paths: int
    excluded: int = 0

    @property
    def argmax(self) -> float:
        """Epsilon with the largest estimated expected utility."""
        return self.epsilons[int(np.argmax(self.utilities))]

    def to_dict(self) -> Dict[str, Any]:
        result = asdict(self)
        result["argmax"] = self.argmax
        return result


@dataclass
class AuditReport:
    """
    Empirical audit of the standing hypotheses.

    Attributes:
        k: Declared lower bound of the absolute risk aversion
        h1_passed: k > 0
        sample_sizes: Nested sample sizes of the running estimates
        moments: Moment name -> running estimates at ``sample_sizes``
        stable: Moment name -> relative changes stayed within tolerance
        status: ``pass`` or ``warn``
    """
    k: float
    h1_passed: bool
    sample_sizes: List[int]
    moments: Dict[str, List[float]]
    stable: Dict[str, bool]
    status: str
    tolerance: float = 0.05

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MartingaleReport:
    """
    Constancy of a process's mean across checkpoints.

    Attributes:
        checkpoints: Grid indices inspected
        means: Sample mean per checkpoint
        std_errors: Standard error per checkpoint
        reference: Mean at the first checkpoint
        max_deviation: Largest |mean_t - reference| / SE_t
        n_paths: Number of unflagged paths used
    """
    checkpoints: List[int]
    means: List[float]
    std_errors: List[float]
    reference: float
    max_deviation: float
    n_paths: int
    label: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class DriftEstimate:
    """Weighted (or plain) mean of the gains of pi - pi* over the horizon."""
    strategy: str
    mean: float
    std_error: float
    weighted: bool
    effective_sample_size: float
    n_paths: int

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class CheckResult:
    """
    One verification record, as written to verification.json.

    ``passed`` is None for skipped or warn-only checks.
    """
    name: str
    estimate: Optional[float]
    se: Optional[float]
    band: Optional[float]
    passed: Optional[bool]
    seed: Optional[int]
    n_paths: Optional[int]
    status: str = "ok"
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RunMetrics:
    """Wall-clock timing of the stages of one run."""
    stage_times: Dict[str, float] = field(default_factory=dict)
    total_time: float = 0.0

    def add_stage_time(self, stage: str, seconds: float) -> None:
        self.stage_times[stage] = self.stage_times.get(stage, 0.0) + seconds
        self.total_time += seconds

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def write_json_atomic(data: Dict[str, Any], filepath: Union[str, Path]) -> None:
    """Write JSON through a temporary file and ``os.replace``."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{filepath.name}.", dir=str(filepath.parent))
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            json.dump(to_jsonable(data), f, indent=2, ensure_ascii=False, sort_keys=False)
            f.write("\n")
        os.replace(tmp, filepath)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunManifest:
    """
    Record of one CLI run.

    Attributes:
        subcommand: Subcommand that produced the run
        config_hash: SHA-256 of the canonical config JSON
        version: Package version
        seed: Effective seed
        outputs: Output name -> file name relative to the output directory
        diagnostics: Free-form diagnostics
        timings: Stage wall-clock times
        passed: Pass/fail summary
        overrides: Command-line overrides applied on top of the config file
        created: Unix time at completion
    """
    subcommand: str
    config_hash: str
    version: str
    seed: int
    outputs: Dict[str, str] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    timings: Dict[str, Any] = field(default_factory=dict)
    passed: bool = True
    overrides: List[str] = field(default_factory=list)
    created: float = field(default_factory=time.time)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def save_to_file(self, filepath: Union[str, Path]) -> None:
        """Write atomically."""
        write_json_atomic(self.to_dict(), filepath)

    @classmethod
    def load_from_file(cls, filepath: Union[str, Path]) -> "RunManifest":
        with open(filepath, "r", encoding="utf-8") as f:
            data = json.load(f)
        return cls(**data)

    def missing_outputs(self, out_dir: Union[str, Path]) -> List[str]:
        """Output files named by the manifest that do not exist."""
        out_dir = Path(out_dir)
        return [name for name in self.outputs.values() if not (out_dir / name).exists()]
