#!/usr/bin/env python3
"""
Discrete hidden-variable toy models.

Conditional probability tables, the total-probability composition
P(lam|a,b) = sum_s P(lam|a,b,s) P(s|a,b), outcome prediction, the measurement
independence check and exact CHSH evaluation for finite models.
"""

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Hashable, List, Optional, Sequence, Tuple

import numpy as np

from bellstats import ChshResult, CorrelationEstimate, chsh
from logger_config import get_logger
from sim_errors import CompositionError, NormalizationError, SettingLookupError
from validate_config import validate_probability_table

logger = get_logger("hvt_toy")

NORMALIZATION_TOL = 1e-12
OUTCOME_PAIRS = ((1, 1), (1, -1), (-1, 1), (-1, -1))
STANDARD_ANGLES = {"a": 0.0, "a_prime": math.pi / 2, "b": math.pi / 4, "b_prime": -math.pi / 4}


def _as_label(value):
    if isinstance(value, list):
        return tuple(_as_label(v) for v in value)
    return value


def _as_json(value):
    if isinstance(value, tuple):
        return [_as_json(v) for v in value]
    return value


@dataclass(frozen=True, eq=False)
class ProbabilityTable:
    """
    Conditional distribution P(outcome | condition).

    Conditions are tuples of setting labels; row i of probs is the
    distribution for conditions[i] over outcomes.
    """

    conditions: Tuple[Tuple[Hashable, ...], ...]
    outcomes: Tuple[Hashable, ...]
    probs: np.ndarray

    def __post_init__(self):
        conditions = tuple(tuple(c) if isinstance(c, (tuple, list)) else (c,) for c in self.conditions)
        object.__setattr__(self, "conditions", conditions)
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)

        if len(set(conditions)) != len(conditions):
            raise ValueError("Duplicate condition labels in probability table")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise ValueError("Duplicate outcome labels in probability table")
        if probs.shape != (len(conditions), len(self.outcomes)):
            raise NormalizationError(
                f"probs has shape {probs.shape}, expected ({len(conditions)}, {len(self.outcomes)})"
            )
        if not np.all(np.isfinite(probs)) or probs.min(initial=0.0) < 0.0 or probs.max(initial=0.0) > 1.0:
            raise NormalizationError("Probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        bad = np.nonzero(np.abs(sums - 1.0) > NORMALIZATION_TOL)[0]
        if bad.size:
            i = int(bad[0])
            raise NormalizationError(f"Slice {conditions[i]!r} sums to {sums[i]!r}, not 1")
        object.__setattr__(self, "_index", {c: i for i, c in enumerate(conditions)})

    def row_index(self, condition) -> int:
        key = tuple(condition) if isinstance(condition, (tuple, list)) else (condition,)
        if key in self._index:
            return self._index[key]
        for i, c in enumerate(self.conditions):
            if len(c) == len(key) and all(_label_close(x, y) for x, y in zip(c, key)):
                return i
        raise SettingLookupError(f"Condition {key!r} not in table")

    def row(self, condition) -> Dict[Hashable, float]:
        return dict(zip(self.outcomes, self.probs[self.row_index(condition)]))

    def prob(self, condition, outcome) -> float:
        return float(self.probs[self.row_index(condition), self.outcomes.index(outcome)])

    def to_json(self) -> Dict:
        return {
            "conditions": [_as_json(c) for c in self.conditions],
            "outcomes": [_as_json(o) for o in self.outcomes],
            "probs": self.probs.tolist(),
        }

    @classmethod
    def from_json(cls, data: Dict) -> "ProbabilityTable":
        """Build a table from a schema-validated JSON document."""
        validate_probability_table(data, strict=True)
        return cls(
            conditions=tuple(_as_label(c) for c in data["conditions"]),
            outcomes=tuple(_as_label(o) for o in data["outcomes"]),
            probs=np.asarray(data["probs"], dtype=float),
        )


def _label_close(x, y) -> bool:
    if x == y:
        return True
    if isinstance(x, (int, float)) and isinstance(y, (int, float)):
        return math.isclose(x, y, rel_tol=0.0, abs_tol=1e-12)
    return False


def load_table(path: Path) -> ProbabilityTable:
    with open(path, "r", encoding="utf-8") as f:
        return ProbabilityTable.from_json(json.load(f))


def save_table(path: Path, table: ProbabilityTable) -> Path:
    from artifacts import write_json_atomic

    return write_json_atomic(path, table.to_json())


def compose_lambda(p_lambda_given_abstar: ProbabilityTable, p_star_given_ab: ProbabilityTable) -> ProbabilityTable:
    """
    Law of total probability over the intermediate variable.

    The kernel's conditions are the mixing table's conditions extended by one
    intermediate label: (a, b, s) for every (a, b) and every s.

    Raises:
        CompositionError: If the kernel lacks a row the mixing table requires
    """
    kernel, mixing = p_lambda_given_abstar, p_star_given_ab
    probs = np.zeros((len(mixing.conditions), len(kernel.outcomes)))
    for i, condition in enumerate(mixing.conditions):
        for j, star in enumerate(mixing.outcomes):
            weight = mixing.probs[i, j]
            extended = condition + (star,)
            if extended not in kernel._index:
                raise CompositionError(f"Kernel has no row for condition {extended!r}")
            probs[i] += weight * kernel.probs[kernel._index[extended]]
    return ProbabilityTable(mixing.conditions, kernel.outcomes, probs)


@dataclass(frozen=True)
class ToyModel:
    """
    Finite hidden-variable model.

    lambda_table: P(lam | a, b)
    response: P(x, y | a, b, lam) with outcomes in {-1, +1}^2
    """

    lambda_table: ProbabilityTable
    response: ProbabilityTable

    def __post_init__(self):
        for outcome in self.response.outcomes:
            if outcome not in OUTCOME_PAIRS:
                raise CompositionError(f"Response outcome {outcome!r} is not a pair in {{-1, +1}}^2")
        for condition in self.lambda_table.conditions:
            for lam in self.lambda_table.outcomes:
                if condition + (lam,) not in self.response._index:
                    raise CompositionError(f"Response has no row for {condition + (lam,)!r}")

    @property
    def settings(self) -> Tuple[Tuple, ...]:
        return self.lambda_table.conditions

    def to_json(self) -> Dict:
        return {"lambda_table": self.lambda_table.to_json(), "response": self.response.to_json()}

    @classmethod
    def from_json(cls, data: Dict) -> "ToyModel":
        try:
            return cls(ProbabilityTable.from_json(data["lambda_table"]), ProbabilityTable.from_json(data["response"]))
        except KeyError as e:
            raise CompositionError(f"Model document is missing {e}") from None


def load_model(path: Path) -> ToyModel:
    with open(path, "r", encoding="utf-8") as f:
        return ToyModel.from_json(json.load(f))


def predict_outcomes(model: ToyModel) -> ProbabilityTable:
    """P(x,y|a,b) = sum over lam of P(x,y|a,b,lam) P(lam|a,b)."""
    return compose_lambda(model.response, model.lambda_table)


def marginal_lambda(table: ProbabilityTable, weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """Settings-free reference P(lam): weighted average over conditions, uniform by default."""
    n = len(table.conditions)
    if weights is None:
        w = np.full(n, 1.0 / n)
    else:
        w = np.asarray(weights, dtype=float)
        if w.shape != (n,) or np.any(w < 0) or w.sum() <= 0:
            raise NormalizationError(f"Need {n} non-negative settings weights with positive sum")
        w = w / w.sum()
    return w @ table.probs


def independence_violation(p_lambda_given_ab: ProbabilityTable, weights: Optional[Sequence[float]] = None) -> float:
    """
    Largest total variation distance between P(lam|a,b) and the reference P(lam).

    Returns 0.0 when measurement independence holds to 1e-12.
    """
    marginal = marginal_lambda(p_lambda_given_ab, weights)
    tv = 0.5 * np.abs(p_lambda_given_ab.probs - marginal).sum(axis=1)
    worst = float(min(1.0, tv.max()))
    return 0.0 if worst < NORMALIZATION_TOL else worst


def model_correlation(predicted: ProbabilityTable, setting) -> float:
    """Exact M = sum of x*y*P(x,y) for one setting pair."""
    row = predicted.probs[predicted.row_index(setting)]
    return float(sum(x * y * p for (x, y), p in zip(predicted.outcomes, row)))


def chsh_of_model(model: ToyModel, a, a_prime, b, b_prime) -> ChshResult:
    """
    Exact CHSH value of a finite model.

    Raises:
        SettingLookupError: If a setting pair is not in the model's alphabet
    """
    predicted = predict_outcomes(model)
    terms = []
    for pair in ((a, b), (a_prime, b), (a, b_prime), (a_prime, b_prime)):
        m = model_correlation(predicted, pair)
        terms.append(CorrelationEstimate(m_hat=m, std_error=0.0, n_samples=0, estimator="exact"))
    return chsh(*terms)


def _setting_grid(a_angles: Sequence[float], b_angles: Sequence[float]) -> Tuple[Tuple[float, float], ...]:
    return tuple((float(a), float(b)) for a in a_angles for b in b_angles)


def singlet_model(a_angles: Sequence[float], b_angles: Sequence[float]) -> ToyModel:
    """
    Contextual model reproducing singlet statistics.

    lam ranges over outcome pairs with P(lam=(x,y)|a,b) = (1 - x y cos(a - b))/4;
    the response reads (x, y) off lam deterministically.
    """
    settings = _setting_grid(a_angles, b_angles)
    lambda_probs = np.array(
        [[(1.0 - x * y * math.cos(a - b)) / 4.0 for x, y in OUTCOME_PAIRS] for a, b in settings]
    )
    response_conditions = tuple(s + (lam,) for s in settings for lam in OUTCOME_PAIRS)
    response_probs = np.array([[1.0 if out == c[2] else 0.0 for out in OUTCOME_PAIRS] for c in response_conditions])
    return ToyModel(
        lambda_table=ProbabilityTable(settings, OUTCOME_PAIRS, lambda_probs),
        response=ProbabilityTable(response_conditions, OUTCOME_PAIRS, response_probs),
    )


def common_cause_model(a_angles: Sequence[float], b_angles: Sequence[float]) -> Tuple[ProbabilityTable, ProbabilityTable]:
    """
    Two-stage form of the singlet model.

    Returns (P(lam|a,b,s), P(s|a,b)) with s = x*y: P(s|a,b) = (1 - s cos(a - b))/2
    and lam uniform over the two pairs whose product is s. Composing them gives
    the lambda table of singlet_model.
    """
    settings = _setting_grid(a_angles, b_angles)
    signs = (1, -1)
    mixing = np.array([[(1.0 - s * math.cos(a - b)) / 2.0 for s in signs] for a, b in settings])
    kernel_conditions = tuple(c + (s,) for c in settings for s in signs)
    kernel = np.array(
        [[0.5 if x * y == c[2] else 0.0 for x, y in OUTCOME_PAIRS] for c in kernel_conditions]
    )
    return (
        ProbabilityTable(kernel_conditions, OUTCOME_PAIRS, kernel),
        ProbabilityTable(settings, signs, mixing),
    )


def deterministic_strategies(
    a_angles: Sequence[float], b_angles: Sequence[float]
) -> List[Tuple[Dict[float, int], Dict[float, int]]]:
    """Every pair of local response functions a -> x and b -> y."""
    a_values = [float(a) for a in a_angles]
    b_values = [float(b) for b in b_angles]
    strategies = []
    for xs in itertools.product((1, -1), repeat=len(a_values)):
        for ys in itertools.product((1, -1), repeat=len(b_values)):
            strategies.append((dict(zip(a_values, xs)), dict(zip(b_values, ys))))
    return strategies


def local_deterministic_model(
    a_angles: Sequence[float],
    b_angles: Sequence[float],
    weights: Optional[Sequence[float]] = None,
) -> ToyModel:
    """
    Local model: lam indexes a deterministic strategy, drawn independently of the settings.

    weights gives P(lam) over deterministic_strategies (uniform by default).
    """
    settings = _setting_grid(a_angles, b_angles)
    strategies = deterministic_strategies(a_angles, b_angles)
    n = len(strategies)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,):
        raise NormalizationError(f"Need {n} strategy weights, got {w.shape}")
    labels = tuple(range(n))
    lambda_table = ProbabilityTable(settings, labels, np.tile(w, (len(settings), 1)))

    response_conditions = tuple(s + (lam,) for s in settings for lam in labels)
    response_probs = np.zeros((len(response_conditions), len(OUTCOME_PAIRS)))
    for i, (a, b, lam) in enumerate(response_conditions):
        respond_a, respond_b = strategies[lam]
        response_probs[i, OUTCOME_PAIRS.index((respond_a[a], respond_b[b]))] = 1.0
    return ToyModel(lambda_table, ProbabilityTable(response_conditions, OUTCOME_PAIRS, response_probs))


def standard_singlet_chsh() -> ChshResult:
    angles = STANDARD_ANGLES
    model = singlet_model((angles["a"], angles["a_prime"]), (angles["b"], angles["b_prime"]))
    return chsh_of_model(model, angles["a"], angles["a_prime"], angles["b"], angles["b_prime"])
