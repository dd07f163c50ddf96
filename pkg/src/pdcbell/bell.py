"""The modified CHSH functional over the six-outcome statistics.

Every outcome gets a value of +1 except the single-perpendicular-photon
outcome, which gets -1.  With that assignment the correlator of a setting
pair is the usual expectation of the product, vacuum bins contribute +1,
and the CHSH combination E(xi,eta) + E(xi,eta') + E(xi',eta) - E(xi',eta')
is bounded by 2 for every local hidden variable model while the full
experiment state reaches 1 + sqrt(2).

Two independent computation paths are provided on purpose: from joint
probability tables (chsh_from_tables) and from operator expectations taken
directly in Fock space (chsh_operator_expectation).  They must agree to
1e-12, which the test suite checks.

Pure functions throughout; grid points in the angle optimizer could be
evaluated concurrently since the argmax reduction is order independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InconsistentSettingsError, InputError
from .fock import PHYSICS_TOL, StateVector, inner_product
from .measurement import (
    FAVORABLE_MASK,
    JointDistribution,
    PolarizerAngle,
    classify_occupation,
    joint_distribution,
    rotate_station_basis,
)
from .optics import split_by_locality

#: Signs of the four setting pairs (xi,eta), (xi,eta'), (xi',eta), (xi',eta').
CHSH_SIGNS = (1.0, 1.0, 1.0, -1.0)

#: Weight below which a favorable/unfavorable part is reported as 0 rather
#: than divided out.
_EMPTY_BLOCK_TOL = 1e-12


@dataclass(frozen=True)
class ValueAssignment:
    """Outcome-to-value maps for the two stations, indexed by code - 1."""

    a: tuple[float, ...] = (-1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
    b: tuple[float, ...] = (-1.0, 1.0, 1.0, 1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        for side in (self.a, self.b):
            if len(side) != 6 or any(v not in (-1.0, 1.0) for v in side):
                raise InputError("value assignment must map the 6 outcomes to +/-1")
            if sum(1 for v in side if v == -1.0) != 1:
                raise InputError("exactly one outcome per station must map to -1")

    def sign_table(self) -> np.ndarray:
        return np.outer(self.a, self.b)


DEFAULT_ASSIGNMENT = ValueAssignment()


@dataclass(frozen=True)
class ChshSettings:
    """The four analyzer angles (xi, xi', eta, eta')."""

    xi: PolarizerAngle
    xi_prime: PolarizerAngle
    eta: PolarizerAngle
    eta_prime: PolarizerAngle

    @classmethod
    def from_radians(cls, xi: float, xi_prime: float, eta: float, eta_prime: float) -> "ChshSettings":
        return cls(
            PolarizerAngle(xi), PolarizerAngle(xi_prime), PolarizerAngle(eta), PolarizerAngle(eta_prime)
        )

    def setting_pairs(self) -> tuple[tuple[PolarizerAngle, PolarizerAngle], ...]:
        """The four (station-1, station-2) angle pairs in CHSH order."""
        return (
            (self.xi, self.eta),
            (self.xi, self.eta_prime),
            (self.xi_prime, self.eta),
            (self.xi_prime, self.eta_prime),
        )

    def as_radians(self) -> tuple[float, float, float, float]:
        return (self.xi.angle, self.xi_prime.angle, self.eta.angle, self.eta_prime.angle)


#: Angles at which the experiment state attains its maximal CHSH value.
#: Any rigid rotation of these works equally well; the value is what matters.
OPTIMAL_SETTINGS = ChshSettings.from_radians(0.0, math.pi / 4, 5 * math.pi / 8, 3 * math.pi / 8)


@dataclass(frozen=True)
class ChshResult:
    """A CHSH evaluation split into favorable and unfavorable contributions.

    The parts are the CHSH combinations restricted to each block and
    renormalized by the block weight, so for the undiluted experiment state
    total = (unfavorable_part + favorable_part) / 2.
    """

    total: float
    favorable_part: float
    unfavorable_part: float
    correlators: tuple[float, float, float, float]
    settings: ChshSettings
    favorable_weight: float

    def to_json_dict(self) -> dict:
        return {
            "total": self.total,
            "favorable_part": self.favorable_part,
            "unfavorable_part": self.unfavorable_part,
            "correlators": list(self.correlators),
            "settings_rad": list(self.settings.as_radians()),
        }


def correlator(dist: JointDistribution, assignment: ValueAssignment = DEFAULT_ASSIGNMENT) -> float:
    """Expectation of the value product over one joint distribution."""
    return float(np.sum(assignment.sign_table() * dist.probs))


def _settings_from_tables(tables: Sequence[JointDistribution]) -> ChshSettings:
    if len(tables) != 4:
        raise InconsistentSettingsError(f"need exactly 4 tables, got {len(tables)}")
    t = tables
    checks = (
        abs(t[0].xi.angle - t[1].xi.angle),
        abs(t[2].xi.angle - t[3].xi.angle),
        abs(t[0].eta.angle - t[2].eta.angle),
        abs(t[1].eta.angle - t[3].eta.angle),
    )
    if max(checks) > 1e-12:
        raise InconsistentSettingsError(
            "tables do not share the (xi,eta), (xi,eta'), (xi',eta), (xi',eta') pattern"
        )
    return ChshSettings(t[0].xi, t[2].xi, t[0].eta, t[1].eta)


def chsh_from_tables(
    tables: Sequence[JointDistribution], assignment: ValueAssignment = DEFAULT_ASSIGNMENT
) -> ChshResult:
    """CHSH value and block decomposition from four joint distributions."""
    settings = _settings_from_tables(tables)
    signs = assignment.sign_table()
    correlators = tuple(float(np.sum(signs * t.probs)) for t in tables)
    total = float(sum(s * e for s, e in zip(CHSH_SIGNS, correlators)))

    fav_mass = float(np.mean([t.probs[FAVORABLE_MASK].sum() for t in tables]))
    fav_combo = sum(
        s * float(np.sum((signs * t.probs)[FAVORABLE_MASK])) for s, t in zip(CHSH_SIGNS, tables)
    )
    rest_combo = sum(
        s * float(np.sum((signs * t.probs)[~FAVORABLE_MASK])) for s, t in zip(CHSH_SIGNS, tables)
    )
    favorable_part = fav_combo / fav_mass if fav_mass > _EMPTY_BLOCK_TOL else 0.0
    unfavorable_part = rest_combo / (1.0 - fav_mass) if 1.0 - fav_mass > _EMPTY_BLOCK_TOL else 0.0
    return ChshResult(total, favorable_part, unfavorable_part, correlators, settings, fav_mass)


def _value_sign(occ: tuple[int, int, int, int], assignment: ValueAssignment) -> float:
    a = assignment.a[classify_occupation(occ[0], occ[1]) - 1]
    b = assignment.b[classify_occupation(occ[2], occ[3]) - 1]
    return a * b


def pair_operator_expectation(
    state: StateVector,
    xi: PolarizerAngle,
    eta: PolarizerAngle,
    assignment: ValueAssignment = DEFAULT_ASSIGNMENT,
) -> float:
    """<state| A(xi) B(eta) |state> evaluated directly in Fock space.

    A acts as -1 on the one-photon-perpendicular state of station 1 and as
    +1 on everything else; B likewise for station 2.  Implemented by
    rotating into the analyzer frames, flipping the amplitudes in the -1
    eigenspace and contracting with the unflipped state.
    """
    rotated = rotate_station_basis(state, state.spatial[0], xi)
    rotated = rotate_station_basis(rotated, state.spatial[1], eta)
    flipped = StateVector(
        {occ: amp * _value_sign(occ, assignment) for occ, amp in rotated.terms.items()},
        rotated.spatial,
    )
    value = inner_product(rotated, flipped)
    if abs(value.imag) > PHYSICS_TOL:
        raise InputError(f"operator expectation has non-real value {value}")
    return value.real


def chsh_operator_expectation(
    state: StateVector,
    settings: ChshSettings,
    assignment: ValueAssignment = DEFAULT_ASSIGNMENT,
) -> float:
    """CHSH combination of the four operator expectations (the Fock-space path)."""
    values = [
        pair_operator_expectation(state, x, e, assignment) for x, e in settings.setting_pairs()
    ]
    return float(sum(s * v for s, v in zip(CHSH_SIGNS, values)))


def chsh_decomposition(
    state: StateVector,
    settings: ChshSettings,
    assignment: ValueAssignment = DEFAULT_ASSIGNMENT,
) -> ChshResult:
    """Split the CHSH expectation into favorable and unfavorable subspace parts.

    The two normalized projections never mix under the analyzers, so the
    total is the weight-averaged sum of the parts; for the undiluted
    experiment state both weights are 1/2.
    """
    favorable, unfavorable = split_by_locality(state)
    w_fav = favorable.norm_squared()
    w_unfav = unfavorable.norm_squared()
    favorable_part = (
        chsh_operator_expectation(favorable.normalize(), settings, assignment)
        if w_fav > _EMPTY_BLOCK_TOL
        else 0.0
    )
    unfavorable_part = (
        chsh_operator_expectation(unfavorable.normalize(), settings, assignment)
        if w_unfav > _EMPTY_BLOCK_TOL
        else 0.0
    )
    correlators = tuple(
        pair_operator_expectation(state, x, e, assignment) for x, e in settings.setting_pairs()
    )
    total = float(sum(s * v for s, v in zip(CHSH_SIGNS, correlators)))
    return ChshResult(total, favorable_part, unfavorable_part, correlators, settings, w_fav)


def diluted_chsh(p_vacuum: float, undiluted: float) -> float:
    """CHSH value after mixing in vacuum bins at probability p_vacuum.

    Vacuum bins contribute +1 to every correlator, so the combination moves
    linearly toward 2; it stays above 2 exactly when the undiluted value is.
    """
    if not 0.0 <= p_vacuum <= 1.0:
        raise InputError(f"vacuum probability must lie in [0, 1], got {p_vacuum}")
    return 2.0 * p_vacuum + (1.0 - p_vacuum) * undiluted


def _chsh_value(
    state: StateVector, angles: Sequence[float], assignment: ValueAssignment
) -> float:
    tables = [
        joint_distribution(state, x, e)
        for x, e in ChshSettings.from_radians(*angles).setting_pairs()
    ]
    return chsh_from_tables(tables, assignment).total


def _golden_section_max(g: Callable[[float], float], lo: float, hi: float, tol: float):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    gc, gd = g(c), g(d)
    while b - a > tol:
        if gc > gd:
            b, d, gd = d, c, gc
            c = b - invphi * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + invphi * (b - a)
            gd = g(d)
    x = 0.5 * (a + b)
    return x, g(x)


def optimize_angles(
    state: StateVector,
    assignment: ValueAssignment = DEFAULT_ASSIGNMENT,
    grid_points: int = 72,
    refine_tol: float = 1e-6,
) -> tuple[ChshSettings, float]:
    """Settings maximizing the CHSH value for ``state``.

    Coarse stage: all angle combinations on a pi/grid_points grid, using the
    fact that the CHSH value is a four-term combination of a pairwise
    correlator grid.  Ties break toward the lexicographically smallest
    (xi, xi', eta, eta') tuple.  Fine stage: coordinate descent with
    golden-section line search down to refine_tol angular resolution.
    """
    step = math.pi / grid_points
    grid = np.arange(grid_points) * step

    e_grid = np.empty((grid_points, grid_points))
    for i, x in enumerate(grid):
        rot1 = rotate_station_basis(state, state.spatial[0], PolarizerAngle(x))
        for j, e in enumerate(grid):
            rot = rotate_station_basis(rot1, state.spatial[1], PolarizerAngle(e))
            value = 0.0
            for occ, amp in rot.terms.items():
                value += _value_sign(occ, assignment) * abs(amp) ** 2
            e_grid[i, j] = value

    best_value = -math.inf
    best_idx = (0, 0, 0, 0)
    for i_xi in range(grid_points):
        # combo[xi', eta, eta'] for this xi
        combo = (
            e_grid[i_xi][None, :, None]
            + e_grid[i_xi][None, None, :]
            + e_grid[:, :, None]
            - e_grid[:, None, :]
        )
        flat = int(np.argmax(combo))
        value = float(combo.reshape(-1)[flat])
        if value > best_value + 1e-15:
            best_value = value
            i_xip, i_eta, i_etap = np.unravel_index(flat, combo.shape)
            best_idx = (i_xi, int(i_xip), int(i_eta), int(i_etap))

    angles = [grid[k] for k in best_idx]
    best = _chsh_value(state, angles, assignment)
    for _ in range(50):
        improved = best
        for k in range(4):
            def g(t: float, k: int = k) -> float:
                trial = list(angles)
                trial[k] = t
                return _chsh_value(state, trial, assignment)

            x, v = _golden_section_max(g, angles[k] - step, angles[k] + step, refine_tol)
            if v > best:
                best = v
                angles[k] = x
        if best - improved < 1e-12:
            break

    settings = ChshSettings.from_radians(*angles)
    return settings, best
