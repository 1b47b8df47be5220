"""
Polynomial least-squares regression on simulated states.

Variables are standardized, collinear variables are dropped, and the
polynomial degree is reduced until the design matrix has full column rank.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)

COLLINEARITY_R2 = 1.0 - 1e-10
DISCRETE_POWER_CAP = 2


def _standardize(values: np.ndarray) -> Tuple[float, float]:
    mean = float(np.mean(values))
    std = float(np.std(values))
    return mean, std


def select_variables(
    candidates: Sequence[Tuple[str, np.ndarray]]
) -> List[Tuple[str, float, float]]:
    """
    Keep the candidates, in order, that are not constant and not explained by the ones before.

    Returns:
        List of (name, mean, std)
    """
    chosen: List[Tuple[str, float, float]] = []
    columns: List[np.ndarray] = []
    for name, raw in candidates:
        values = np.asarray(raw, dtype=float)
        if values.size == 0:
            continue
        mean, std = _standardize(values)
        if not std > 0:
            continue
        z = (values - mean) / std
        if columns:
            basis = np.column_stack([np.ones_like(z)] + columns)
            coef, *_ = np.linalg.lstsq(basis, z, rcond=None)
            r2 = 1.0 - float(np.var(z - basis @ coef))
            if r2 > COLLINEARITY_R2:
                logger.debug(f"Dropping regressor {name}: collinear (R^2={r2:.12f})")
                continue
        chosen.append((name, mean, std))
        columns.append(z)
    return chosen


def exponent_set(degree: int, caps: Sequence[int]) -> List[Tuple[int, ...]]:
    """Multi-indices of total degree <= ``degree`` with per-variable caps, constant first."""
    ranges = [range(min(degree, cap) + 1) for cap in caps]
    exps = [e for e in itertools.product(*ranges) if sum(e) <= degree]
    return sorted(exps, key=lambda e: (sum(e), tuple(-x for x in e)))


@dataclass
class PolynomialModel:
    """
    Fitted polynomial in standardized state variables.

    Attributes:
        names: Variable names in order
        means, stds: Standardization per variable
        exponents: Multi-index per column
        coef: Least-squares coefficients, one per column (absent until fitted)
        degree: Total degree used
    """
    names: List[str]
    means: List[float]
    stds: List[float]
    exponents: List[Tuple[int, ...]]
    degree: int
    coef: Optional[np.ndarray] = None
    reduced: bool = False
    info: Dict[str, float] = field(default_factory=dict)

    @property
    def n_columns(self) -> int:
        return len(self.exponents)

    def design(self, state: Mapping[str, np.ndarray]) -> np.ndarray:
        """Design matrix for a state dictionary, shape (n, n_columns)."""
        size = int(np.size(next(iter(state.values())))) if state else 1
        if not self.names:
            return np.ones((size, 1))
        zs = [(np.asarray(state[name], dtype=float) - mu) / sd
              for name, mu, sd in zip(self.names, self.means, self.stds)]
        cols = []
        for exps in self.exponents:
            col = np.ones(size)
            for z, e in zip(zs, exps):
                if e:
                    col = col * z**e
            cols.append(col)
        return np.column_stack(cols)

    def predict(self, state: Mapping[str, np.ndarray]) -> np.ndarray:
        if self.coef is None:
            raise ValueError("model has not been fitted")
        return self.design(state) @ self.coef


def build_model(
    state: Mapping[str, np.ndarray], degree: int, discrete: Sequence[str] = ()
) -> PolynomialModel:
    """
    Choose variables and exponents for a regression at one time step.

    Powers of the variables in ``discrete`` are capped at 2; every power is
    capped by the number of distinct values minus one.
    """
    chosen = select_variables(list(state.items()))
    names = [c[0] for c in chosen]
    caps = []
    for name in names:
        unique = int(np.unique(state[name]).size)
        cap = unique - 1
        if name in discrete:
            cap = min(cap, DISCRETE_POWER_CAP)
        caps.append(max(cap, 0))
    return PolynomialModel(
        names=names, means=[c[1] for c in chosen], stds=[c[2] for c in chosen],
        exponents=exponent_set(degree, caps), degree=degree)


def fit_model(
    state: Mapping[str, np.ndarray], target: np.ndarray, degree: int,
    discrete: Sequence[str] = (), context: str = ""
) -> PolynomialModel:
    """
    Least-squares fit of ``target`` on a polynomial of the state.

    Degree is lowered while the design matrix is rank deficient.

    Returns:
        Fitted model (``reduced`` is True if the degree was lowered)
    """
    model = build_model(state, degree, discrete)
    while True:
        B = model.design(state)
        coef, _, rank, _ = np.linalg.lstsq(B, target, rcond=None)
        if rank == B.shape[1] or model.degree == 0:
            model.coef = coef
            return model
        logger.warning(f"Rank-deficient regression{context} (rank {rank} < {B.shape[1]}), "
                       f"reducing degree {model.degree} -> {model.degree - 1}")
        caps = [max(e) for e in zip(*model.exponents)] if model.names else []
        model = PolynomialModel(
            names=model.names, means=model.means, stds=model.stds,
            exponents=exponent_set(model.degree - 1, caps), degree=model.degree - 1,
            reduced=True)


def fit_columns(design: np.ndarray, target: np.ndarray) -> Tuple[np.ndarray, int]:
    """Plain least squares returning (coefficients, rank)."""
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    return coef, int(rank)
