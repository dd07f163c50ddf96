"""Optical elements that prepare the experiment's quantum state.

A type-I source emits one photon pair, both photons polarized along the
first lab axis, one per arm.  The arm-a photon passes a 90 degree
polarization rotator, both arms then meet on a symmetric 50-50
beamsplitter, and the outputs are the two detection stations.

Phase conventions (fixed so the canonical four-term state comes out with
the exact textbook signs, not merely up to per-term phases):

* waveplate rotation by theta maps x -> cos(theta) x + sin(theta) y,
* the beamsplitter has real transmission 1/sqrt(2) and reflection
  i/sqrt(2), identical for both polarizations and both inputs,
* arm a reflects into station 1 and transmits into station 2 (the mirror
  geometry of the layout); arm b does the opposite,
* mirrors impart no phase (all optical paths are equal, so any common
  phase is global).

The residual freedom is one global phase, which with these choices is +1.
All functions are pure; values are immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InputError, WrongFrameError
from .fock import (
    ALGEBRA_TOL,
    ARM_LABELS,
    STATION_LABELS,
    ModeId,
    StateVector,
    apply_mode_unitary,
    basis_state,
    station_totals,
    vacuum,
)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class BeamsplitterSpec:
    """Symmetric 50-50 beamsplitter amplitudes, polarization independent."""

    transmission: complex = _INV_SQRT2
    reflection: complex = 1j * _INV_SQRT2

    def __post_init__(self) -> None:
        t, r = self.transmission, self.reflection
        if abs(abs(t) ** 2 + abs(r) ** 2 - 1.0) > ALGEBRA_TOL:
            raise InputError("beamsplitter amplitudes must satisfy |t|^2 + |r|^2 = 1")
        if abs(t * r.conjugate() + r * t.conjugate()) > ALGEBRA_TOL:
            raise InputError("beamsplitter amplitudes must satisfy t r* + r t* = 0")


@dataclass(frozen=True)
class WaveplateSpec:
    """Polarization rotator; the experiment uses the 90 degree setting."""

    angle: float = math.pi / 2


@dataclass(frozen=True)
class PairAmplitude:
    """Vacuum amplitude alpha and pair amplitude beta of the emitted state."""

    alpha: complex
    beta: complex

    def __post_init__(self) -> None:
        if abs(abs(self.alpha) ** 2 + abs(self.beta) ** 2 - 1.0) > ALGEBRA_TOL:
            raise InputError("pair amplitude must satisfy |alpha|^2 + |beta|^2 = 1")

    @classmethod
    def from_pair_probability(cls, p_pair: float) -> "PairAmplitude":
        """Real positive beta = sqrt(p_pair); the relative phase is unobservable."""
        if not 0.0 <= p_pair <= 1.0:
            raise InputError(f"pair probability must lie in [0, 1], got {p_pair}")
        return cls(alpha=math.sqrt(1.0 - p_pair), beta=math.sqrt(p_pair))


def source_state() -> StateVector:
    """One photon in each arm, both polarized along the first lab axis."""
    return basis_state((1, 0, 1, 0), ARM_LABELS)


def apply_waveplate(state: StateVector, arm: str, wp: WaveplateSpec = WaveplateSpec()) -> StateVector:
    """Rotate the polarization frame of one arm by the waveplate angle."""
    if arm not in state.spatial:
        raise WrongFrameError(f"unknown arm {arm!r}; state labels are {state.spatial}")
    c, s = math.cos(wp.angle), math.sin(wp.angle)
    u = ((c, -s), (s, c))
    return apply_mode_unitary(state, (ModeId(arm, 0), ModeId(arm, 1)), u)


def apply_beamsplitter(state: StateVector, bs: BeamsplitterSpec = BeamsplitterSpec()) -> StateVector:
    """Mix the two arms on the beamsplitter and relabel outputs to stations.

    Arm a goes to station 1 with the reflection amplitude and to station 2
    with the transmission amplitude; arm b the other way around.
    """
    if state.spatial != ARM_LABELS:
        raise WrongFrameError(
            f"beamsplitter expects arm labels {ARM_LABELS}, state has {state.spatial}"
        )
    t, r = bs.transmission, bs.reflection
    u = ((r, t), (t, r))
    out = state
    for pol in (0, 1):
        out = apply_mode_unitary(out, (ModeId("a", pol), ModeId("b", pol)), u)
    return out.relabel(STATION_LABELS)


def build_experiment_state() -> StateVector:
    """The two-photon state arriving at the stations.

    Equals (|1x>_1 |1y>_2 - |1y>_1 |1x>_2 + i |1x 1y>_1 |0>_2
    + i |0>_1 |1x 1y>_2) / 2: a polarization singlet when the pair splits,
    plus the two both-photons-one-side terms.
    """
    state = source_state()
    state = apply_waveplate(state, "a", WaveplateSpec(math.pi / 2))
    return apply_beamsplitter(state)


def attach_vacuum(state: StateVector, pair: PairAmplitude) -> StateVector:
    """alpha |vacuum> + beta |state>, making the no-emission component explicit."""
    return vacuum(state.spatial).scale(pair.alpha).add(state.scale(pair.beta))


def split_by_locality(state: StateVector) -> tuple[StateVector, StateVector]:
    """Unnormalized (favorable, unfavorable) components of a station state.

    Favorable terms place exactly one photon at each station; everything
    else (double occupancy one side, or vacuum) is unfavorable.
    """
    fav = {occ: amp for occ, amp in state.terms.items() if station_totals(occ) == (1, 1)}
    unfav = {occ: amp for occ, amp in state.terms.items() if station_totals(occ) != (1, 1)}
    return StateVector(fav, state.spatial), StateVector(unfav, state.spatial)
