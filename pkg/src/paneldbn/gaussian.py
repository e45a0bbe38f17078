"""Linear-Gaussian node models, likelihood, and the penalized local score.

Each slice-1 node is a linear regression on its slice-0 parents with Gaussian
residuals. The network score is penalized log-likelihood and decomposes into
one local term per node, which is what makes greedy structure search cheap:

    score(node) = logL(node | parents) - w * kappa(n) * p_node

with p_node = |parents| + 2 (intercept and residual variance are parameters
too) and kappa(n) = log(n)/2 under the ``bic_half`` convention, so w = 1
reproduces the Schwarz BIC. ``paper_literal`` uses kappa(n) = log(n) instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .errors import (
    DegenerateModelError,
    InsufficientDataError,
    SingularDesignError,
    ValidationError,
)
from .graphs import NodeRef
from .panel import TransitionTable

MIN_RESIDUAL_VARIANCE = 1e-12
CONVENTIONS = ("bic_half", "paper_literal")


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty coefficient w and the per-parameter scaling convention.

    w = 0 disables the penalty entirely (useful in tests); the usual range
    is w >= 1, larger values buying sparser graphs.
    """

    w: float = 1.0
    convention: str = "bic_half"

    def __post_init__(self) -> None:
        if self.w < 0:
            raise ValidationError("penalty coefficient w must be >= 0")
        if self.convention not in CONVENTIONS:
            raise ValidationError(f"convention must be one of {CONVENTIONS}")

    def per_parameter(self, n: int) -> float:
        """Penalty charged per model parameter at sample size n."""
        if n < 1:
            raise ValidationError("sample size must be positive")
        scale = math.log(n)
        return scale / 2.0 if self.convention == "bic_half" else scale


@dataclass(frozen=True)
class GaussianNodeModel:
    """Fitted linear-Gaussian model of one slice-1 node.

    ``coefficients[i]`` belongs to ``parents[i]``; ``residual_variance`` is
    the maximum-likelihood estimate RSS / n.
    """

    target: NodeRef
    parents: tuple[NodeRef, ...]
    intercept: float
    coefficients: np.ndarray
    residual_variance: float

    def __post_init__(self) -> None:
        if len(self.coefficients) != len(self.parents):
            raise ValidationError("one coefficient per parent required")
        if self.residual_variance < 0:
            raise ValidationError("residual variance must be >= 0")

    @property
    def n_parameters(self) -> int:
        return len(self.parents) + 2

    def predict(self, parent_values: np.ndarray) -> np.ndarray:
        """Conditional mean given a (n, len(parents)) matrix of parent values."""
        if len(self.parents) == 0:
            n = parent_values.shape[0] if parent_values.ndim else 1
            return np.full(n, self.intercept)
        return self.intercept + parent_values @ self.coefficients

    def to_dict(self) -> dict:
        return {
            "target": self.target.condition,
            "parents": [p.condition for p in self.parents],
            "intercept": self.intercept,
            "coefficients": [float(b) for b in self.coefficients],
            "residual_variance": self.residual_variance,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GaussianNodeModel":
        return cls(
            target=NodeRef(data["target"], 1),
            parents=tuple(NodeRef(p, 0) for p in data["parents"]),
            intercept=float(data["intercept"]),
            coefficients=np.asarray(data["coefficients"], dtype=float),
            residual_variance=float(data["residual_variance"]),
        )


def _condition_name(ref: NodeRef | str) -> str:
    return ref.condition if isinstance(ref, NodeRef) else str(ref)


def _design(
    data: TransitionTable, target: NodeRef | str, parents: Sequence[NodeRef | str]
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    target_name = _condition_name(target)
    parent_names = [_condition_name(p) for p in parents]
    t = data.condition_index(target_name)
    cols = [data.condition_index(p) for p in parent_names]
    y = data.x1[:, t]
    n = y.shape[0]
    z = np.empty((n, len(cols) + 1))
    z[:, 0] = 1.0
    if cols:
        z[:, 1:] = data.x0[:, cols]
    return z, y, parent_names


def fit_node(
    target: NodeRef | str,
    parents: Sequence[NodeRef | str],
    data: TransitionTable,
) -> GaussianNodeModel:
    """Maximum-likelihood fit of one node on its slice-0 parents.

    Least squares is solved through a rank-revealing decomposition; a rank
    deficient design raises ``SingularDesignError`` naming the collinear
    parents instead of silently pseudo-inverting.
    """
    z, y, parent_names = _design(data, target, parents)
    n, p = z.shape
    if n < p + 1:
        raise InsufficientDataError(
            f"need at least {p + 1} rows to fit {len(parent_names)} parents, got {n}"
        )
    coef, _, rank, _ = sla.lstsq(z, y)
    if rank < p:
        _, _, piv = sla.qr(z, mode="economic", pivoting=True)
        labels = ["intercept"] + parent_names
        redundant = sorted(labels[i] for i in piv[rank:])
        raise SingularDesignError(
            f"design is rank deficient; collinear columns: {', '.join(redundant)}"
        )
    resid = y - z @ coef
    rss = float(resid @ resid)
    return GaussianNodeModel(
        target=NodeRef(_condition_name(target), 1),
        parents=tuple(NodeRef(p, 0) for p in parent_names),
        intercept=float(coef[0]),
        coefficients=coef[1:].copy(),
        residual_variance=rss / n,
    )


def node_loglik(model: GaussianNodeModel, data: TransitionTable) -> float:
    """Gaussian log-likelihood of the model on the given transitions."""
    sigma2 = model.residual_variance
    if sigma2 < MIN_RESIDUAL_VARIANCE:
        raise DegenerateModelError(
            f"residual variance {sigma2:.3e} is numerically zero for "
            f"{model.target.condition}"
        )
    z, y, _ = _design(data, model.target, model.parents)
    mean = z @ np.concatenate(([model.intercept], model.coefficients))
    resid = y - mean
    rss = float(resid @ resid)
    n = y.shape[0]
    return -0.5 * n * math.log(2.0 * math.pi * sigma2) - rss / (2.0 * sigma2)


def score_node(
    target: NodeRef | str,
    parents: Sequence[NodeRef | str],
    data: TransitionTable,
    penalty: PenaltyConfig,
) -> float:
    """Penalized local score: logL of the MLE fit minus w * kappa(n) * p."""
    model = fit_node(target, parents, data)
    ll = node_loglik(model, data)
    return ll - penalty.w * penalty.per_parameter(data.n_rows) * model.n_parameters


class SuffStats:
    """Cross-products shared by every (target, parent set) regression.

    Computing Z'Z, Z'Y and diag(Y'Y) once per dataset makes each subsequent
    least-squares fit an O(p^3) solve independent of the number of rows,
    which is what keeps hill climbing and the bootstrap fast.
    """

    def __init__(self, exog: np.ndarray, endog: np.ndarray):
        n = exog.shape[0]
        z = np.empty((n, exog.shape[1] + 1))
        z[:, 0] = 1.0
        z[:, 1:] = exog
        self.n = n
        self.n_targets = endog.shape[1]
        self.gram = z.T @ z
        self.cross = z.T @ endog
        self.yty = np.einsum("ij,ij->j", endog, endog)

    @classmethod
    def from_table(cls, table: TransitionTable) -> "SuffStats":
        return cls(table.x0, table.x1)

    def fit(
        self, parent_idx: Sequence[int], target_idx: int
    ) -> tuple[np.ndarray, float]:
        """Solve the normal equations; returns (theta, rss) with theta[0] the
        intercept. Raises SingularDesignError when the Gram block is not
        positive definite."""
        idx = np.concatenate(([0], np.asarray(parent_idx, dtype=np.intp) + 1))
        g = self.gram[np.ix_(idx, idx)]
        c = self.cross[idx, target_idx]
        try:
            chol = sla.cho_factor(g, lower=True, check_finite=False)
        except sla.LinAlgError:
            raise SingularDesignError(
                f"singular design for target index {target_idx} with parents "
                f"{tuple(parent_idx)}"
            )
        theta = sla.cho_solve(chol, c, check_finite=False)
        rss = max(float(self.yty[target_idx] - theta @ c), 0.0)
        return theta, rss


class LocalScorer:
    """Memoized penalized local scores on one set of sufficient statistics."""

    def __init__(self, stats: SuffStats, penalty: PenaltyConfig):
        self.stats = stats
        self.penalty = penalty
        self._per_param = penalty.w * penalty.per_parameter(stats.n)
        self._cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def local_score(self, target_idx: int, parents: tuple[int, ...]) -> float:
        """Penalized score of one node; ``parents`` must be a sorted tuple."""
        key = (target_idx, parents)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        n = self.stats.n
        if n < len(parents) + 2:
            raise InsufficientDataError(
                f"{n} rows cannot support {len(parents)} parents"
            )
        _, rss = self.stats.fit(parents, target_idx)
        sigma2 = rss / n
        if sigma2 < MIN_RESIDUAL_VARIANCE:
            raise DegenerateModelError(
                f"perfect fit for target index {target_idx}; score undefined"
            )
        ll = -0.5 * n * (math.log(2.0 * math.pi * sigma2) + 1.0)
        score = ll - self._per_param * (len(parents) + 2)
        self._cache[key] = score
        return score
