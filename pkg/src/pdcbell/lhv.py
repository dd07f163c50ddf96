"""Local-hidden-variable feasibility for the full six-outcome pattern.

A local model assigns each hidden variable value a deterministic outcome
per station per setting; the achievable correlation patterns form the
convex hull of the 6^2 * 6^2 = 1296 deterministic strategies.  Membership
of four observed tables in that polytope is a linear program.  When the
tables lie outside, the LP dual supplies a separating Bell functional whose
local bound we re-establish by brute-force maximization over all 1296
strategies, so the infeasibility verdict never rests on solver internals.

The LP itself is a phase-one problem: minimize the L1 mismatch between the
weighted strategy mixture and the target tables.  Zero mismatch means an
explicit model exists; positive mismatch means separation.

Strategy enumeration and certificate checks are embarrassingly parallel;
the LP solve is single threaded.  All inputs and outputs are immutable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import linprog

from .bell import CHSH_SIGNS, ChshSettings, DEFAULT_ASSIGNMENT, ValueAssignment
from .errors import (
    BoundMismatchError,
    CertificateExtractionError,
    InputError,
    MalformedTablesError,
)
from .measurement import JointDistribution

N_OUTCOMES = 6
N_STRATEGIES = (N_OUTCOMES**2) ** 2  # 1296

#: A returned model must reproduce its targets at least this well, per cell.
RECONSTRUCTION_TOL = 1e-7

#: Tolerance for the stored-vs-recomputed local bound comparison.
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class DeterministicStrategy:
    """Fixed outcomes per setting: s1 = (at xi, at xi'), s2 = (at eta, at eta')."""

    s1: tuple[int, int]
    s2: tuple[int, int]

    def table(self, pair_index: int) -> np.ndarray:
        """The 0/1 point-mass table this strategy induces for one setting pair."""
        i = self.s1[pair_index // 2]
        j = self.s2[pair_index % 2]
        out = np.zeros((N_OUTCOMES, N_OUTCOMES))
        out[i - 1, j - 1] = 1.0
        return out


def enumerate_strategies() -> list[DeterministicStrategy]:
    """All 1296 strategies in canonical order (lexicographic in s1 then s2)."""
    return [
        DeterministicStrategy((a0, a1), (b0, b1))
        for a0, a1, b0, b1 in itertools.product(range(1, N_OUTCOMES + 1), repeat=4)
    ]


@lru_cache(maxsize=1)
def _strategy_outcomes() -> tuple[np.ndarray, np.ndarray]:
    """(s1 outcomes, s2 outcomes) as (1296, 2) int arrays in canonical order."""
    codes = np.array(list(itertools.product(range(1, N_OUTCOMES + 1), repeat=4)), dtype=np.int64)
    return codes[:, :2], codes[:, 2:]


@lru_cache(maxsize=1)
def _constraint_matrix() -> np.ndarray:
    """(144, 1296) matrix: cell (pair, i, j) indicator per strategy."""
    s1, s2 = _strategy_outcomes()
    rows = np.zeros((4 * N_OUTCOMES * N_OUTCOMES, N_STRATEGIES))
    for pair in range(4):
        i = s1[:, pair // 2] - 1
        j = s2[:, pair % 2] - 1
        cell = pair * 36 + i * N_OUTCOMES + j
        rows[cell, np.arange(N_STRATEGIES)] = 1.0
    return rows


@dataclass(frozen=True)
class LhvModel:
    """Probability weights over the 1296 deterministic strategies."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.weights, dtype=float)
        if arr.shape != (N_STRATEGIES,):
            raise InputError(f"weights must have length {N_STRATEGIES}, got {arr.shape}")
        if arr.min() < -BOUND_TOL:
            raise InputError(f"negative strategy weight {arr.min()}")
        if abs(arr.sum() - 1.0) > BOUND_TOL:
            raise InputError(f"weights sum to {arr.sum()}, not 1")
        arr = np.clip(arr, 0.0, None)
        arr.flags.writeable = False
        object.__setattr__(self, "weights", arr)


@dataclass(frozen=True)
class BellCertificate:
    """A linear functional separating some tables from the local polytope.

    ``coefficients`` has shape (4, 6, 6): one weight per (setting pair,
    outcome i, outcome j) cell.  ``local_bound`` is the maximum of the
    functional over all deterministic strategies and ``quantum_value`` its
    value on the separated tables.
    """

    coefficients: np.ndarray
    local_bound: float
    quantum_value: float

    def __post_init__(self) -> None:
        arr = np.array(self.coefficients, dtype=float)
        if arr.shape != (4, N_OUTCOMES, N_OUTCOMES):
            raise InputError(f"coefficients must have shape (4, 6, 6), got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "coefficients", arr)

    @property
    def gap(self) -> float:
        return self.quantum_value - self.local_bound

    def to_json_dict(self) -> dict:
        return {
            "coefficients": [float(c) for c in self.coefficients.reshape(-1)],
            "local_bound": self.local_bound,
            "quantum_value": self.quantum_value,
            "gap": self.gap,
        }


@dataclass(frozen=True)
class Feasible:
    """The tables admit a local model."""

    model: LhvModel
    reconstruction_error: float

    @property
    def feasible(self) -> bool:
        return True


@dataclass(frozen=True)
class Infeasible:
    """No local model exists; the certificate proves it."""

    certificate: BellCertificate

    @property
    def feasible(self) -> bool:
        return False


def _strategy_values(coefficients: np.ndarray) -> np.ndarray:
    """Functional value of every deterministic strategy, vectorized."""
    s1, s2 = _strategy_outcomes()
    values = np.zeros(N_STRATEGIES)
    for pair in range(4):
        values += coefficients[pair, s1[:, pair // 2] - 1, s2[:, pair % 2] - 1]
    return values


def local_bound_by_enumeration(coefficients: np.ndarray) -> float:
    """Exact maximum of a Bell functional over all 1296 strategies."""
    return float(_strategy_values(np.asarray(coefficients, dtype=float)).max())


def contract_tables(coefficients: np.ndarray, tables: Sequence[JointDistribution]) -> float:
    """Value of a Bell functional on four observed tables."""
    stacked = np.stack([t.probs for t in tables])
    return float(np.sum(np.asarray(coefficients, dtype=float) * stacked))


def chsh_certificate(
    tables: Sequence[JointDistribution], assignment: ValueAssignment = DEFAULT_ASSIGNMENT
) -> BellCertificate:
    """The CHSH functional itself, packaged as a certificate against ``tables``."""
    signs = assignment.sign_table()
    coefficients = np.stack([s * signs for s in CHSH_SIGNS])
    return BellCertificate(
        coefficients,
        local_bound=local_bound_by_enumeration(coefficients),
        quantum_value=contract_tables(coefficients, tables),
    )


def _validate_tables(tables: Sequence[JointDistribution]) -> np.ndarray:
    if len(tables) != 4:
        raise MalformedTablesError(f"need exactly 4 tables, got {len(tables)}")
    stacked = np.stack([np.asarray(t.probs, dtype=float) for t in tables])
    if stacked.min() < -1e-9:
        raise MalformedTablesError(f"negative table entry {stacked.min()}")
    sums = stacked.reshape(4, -1).sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-6:
        raise MalformedTablesError(f"tables are not normalized: sums {sums}")
    return stacked


def lhv_feasible(tables: Sequence[JointDistribution]) -> Feasible | Infeasible:
    """Decide whether four tables admit any local-hidden-variable model.

    Feasible returns an explicit strategy mixture reproducing the tables to
    RECONSTRUCTION_TOL per cell.  Infeasible returns a Bell functional with
    a strictly positive, enumeration-verified gap, scaled to max-abs
    coefficient 1 (or to local bound 2 when it coincides with CHSH).
    """
    b_cells = _validate_tables(tables).reshape(-1)
    a_cells = _constraint_matrix()
    n_cells = a_cells.shape[0]

    # Variables: [weights (1296), slack+ (144), slack- (144)].
    a_eq = np.zeros((n_cells + 1, N_STRATEGIES + 2 * n_cells))
    a_eq[:n_cells, :N_STRATEGIES] = a_cells
    a_eq[:n_cells, N_STRATEGIES : N_STRATEGIES + n_cells] = np.eye(n_cells)
    a_eq[:n_cells, N_STRATEGIES + n_cells :] = -np.eye(n_cells)
    a_eq[n_cells, :N_STRATEGIES] = 1.0
    b_eq = np.concatenate([b_cells, [1.0]])
    cost = np.concatenate([np.zeros(N_STRATEGIES), np.ones(2 * n_cells)])

    result = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not result.success:  # pragma: no cover - phase-one LP is always feasible
        raise CertificateExtractionError(f"LP solver failed: {result.message}")

    weights = np.clip(result.x[:N_STRATEGIES], 0.0, None)
    weights /= weights.sum()
    error = float(np.abs(a_cells @ weights - b_cells).max())
    if error <= RECONSTRUCTION_TOL:
        return Feasible(LhvModel(weights), error)

    dual = np.asarray(result.eqlin.marginals[:n_cells], dtype=float)
    for candidate in (dual, -dual):
        coefficients = candidate.reshape(4, N_OUTCOMES, N_OUTCOMES)
        bound = local_bound_by_enumeration(coefficients)
        value = contract_tables(coefficients, tables)
        if value - bound > 0.0:
            scale = np.abs(coefficients).max()
            if scale == 0.0:
                continue
            # Max-abs scaling to 1 also lands CHSH-shaped functionals on
            # their conventional local bound of 2.
            coefficients = coefficients / scale
            certificate = BellCertificate(
                coefficients,
                local_bound=local_bound_by_enumeration(coefficients),
                quantum_value=contract_tables(coefficients, tables),
            )
            if certificate.gap > 0.0:
                return Infeasible(certificate)
    raise CertificateExtractionError(
        "LP reported mismatch but no verifiable separating functional was found"
    )


def synthesize_tables(model: LhvModel, settings: ChshSettings) -> list[JointDistribution]:
    """The four joint tables a strategy mixture produces."""
    s1, s2 = _strategy_outcomes()
    pairs = settings.setting_pairs()
    tables = []
    for pair in range(4):
        probs = np.zeros((N_OUTCOMES, N_OUTCOMES))
        np.add.at(probs, (s1[:, pair // 2] - 1, s2[:, pair % 2] - 1), model.weights)
        xi, eta = pairs[pair]
        tables.append(JointDistribution(xi, eta, probs))
    return tables


@dataclass(frozen=True)
class CertificateReport:
    """Independent re-verification of a certificate by strategy enumeration."""

    recomputed_local_bound: float
    quantum_value: float
    gap: float

    @property
    def separating(self) -> bool:
        return self.gap > 0.0


def verify_certificate(
    cert: BellCertificate, tables: Sequence[JointDistribution]
) -> CertificateReport:
    """Recompute a certificate's bound and value from scratch.

    The local bound comes from exhaustive maximization over the 1296
    strategies, not from any LP output; a stored bound that disagrees by
    more than BOUND_TOL raises BoundMismatchError.
    """
    bound = local_bound_by_enumeration(cert.coefficients)
    if abs(bound - cert.local_bound) > BOUND_TOL:
        raise BoundMismatchError(
            f"stored local bound {cert.local_bound} vs recomputed {bound}"
        )
    value = contract_tables(cert.coefficients, tables)
    return CertificateReport(bound, value, value - bound)


# -- JSON interchange ---------------------------------------------------------


def verdict_to_json_dict(verdict: Feasible | Infeasible) -> dict:
    if isinstance(verdict, Feasible):
        return {
            "feasible": True,
            "model": [float(w) for w in verdict.model.weights],
            "reconstruction_error": verdict.reconstruction_error,
        }
    return {"feasible": False, "certificate": verdict.certificate.to_json_dict()}


def tables_from_json_dict(data: Mapping) -> list[JointDistribution]:
    """Parse the CLI interchange format: four tables plus optional settings.

    Expected shape: {"tables": [table, table, table, table]} with each table
    in the measurement JSON format, ordered (xi,eta), (xi,eta'), (xi',eta),
    (xi',eta'); an optional "settings_rad" entry is cross-checked.
    """
    try:
        raw = data["tables"]
    except (KeyError, TypeError) as exc:
        raise InputError("tables JSON must contain a 'tables' array") from exc
    if not isinstance(raw, Sequence) or len(raw) != 4:
        raise InputError("'tables' must be an array of exactly 4 tables")
    tables = [JointDistribution.from_json_dict(t) for t in raw]
    if "settings_rad" in data:
        declared = [float(a) for a in data["settings_rad"]]
        if len(declared) != 4:
            raise InputError("'settings_rad' must list 4 angles")
        settings = ChshSettings.from_radians(*declared)
        for table, (xi, eta) in zip(tables, settings.setting_pairs()):
            if abs(table.xi.angle - xi.angle) > 1e-9 or abs(table.eta.angle - eta.angle) > 1e-9:
                raise InputError("'settings_rad' disagrees with the per-table angles")
    return tables


def tables_to_json_dict(tables: Sequence[JointDistribution]) -> dict:
    settings = ChshSettings(tables[0].xi, tables[2].xi, tables[0].eta, tables[1].eta)
    return {
        "settings_rad": list(settings.as_radians()),
        "tables": [t.to_json_dict() for t in tables],
    }
