"""Hybrid automata for planar pronking and bounding.

A gait is a cyclic sequence of contact domains joined by touchdown or liftoff
events.  Touchdowns trigger a plastic impact over the full destination contact
set (feet already in stance stay pinned through the impulse); liftoffs leave
the velocity untouched.

Four periodic gaits are provided:

``pronk``
    Both leg pairs move together: double stance, simultaneous liftoff, one
    flight phase, simultaneous touchdown.
``bound_extended``
    Single-flight bound whose flight starts from the rear pair pushing off,
    body extended: front stance -> double stance -> rear stance -> flight.
``bound_gathered``
    Single-flight bound whose flight starts from the front pair pushing off,
    body gathered: front stance -> flight -> rear stance -> double stance.
``bound_double_flight``
    Bound with two flight phases and no double stance: front stance ->
    flight -> rear stance -> flight.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import ContactSet, Leg, constrained_accel, foot_point


class EventType(enum.Enum):
    TOUCHDOWN = "touchdown"
    LIFTOFF = "liftoff"


@dataclass(frozen=True)
class Domain:
    """One contact mode of a gait cycle."""

    name: str
    contacts: tuple

    @property
    def in_flight(self):
        return len(self.contacts) == 0


@dataclass(frozen=True)
class Transition:
    """Exit event of a domain.

    ``legs`` are the feet whose guard fires (minimum over them for pair
    events); ``impact_legs`` is the full contact set of the impact solve, or
    empty for a liftoff (identity velocity reset).
    """

    event: EventType
    legs: tuple
    impact_legs: tuple


@dataclass(frozen=True)
class HybridGait:
    """Cyclic domain sequence; ``transitions[i]`` joins domain i to i+1."""

    name: str
    domains: tuple
    transitions: tuple

    @property
    def n_domains(self):
        return len(self.domains)

    def next_index(self, i):
        return (i + 1) % self.n_domains

    def touchdown_legs(self, i):
        """Feet newly landing when entering domain ``i`` (by cycle index)."""
        t = self.transitions[(i - 1) % self.n_domains]
        return t.legs if t.event is EventType.TOUCHDOWN else ()

    def validate(self):
        n = self.n_domains
        if len(self.transitions) != n:
            raise ValueError("one transition per domain required")
        for i, (dom, tr) in enumerate(zip(self.domains, self.transitions)):
            nxt = self.domains[self.next_index(i)]
            src, dst = set(dom.contacts), set(nxt.contacts)
            legs = set(tr.legs)
            if tr.event is EventType.TOUCHDOWN:
                if dst != src | legs or legs & src:
                    raise ValueError(f"{self.name}: bad touchdown at domain {dom.name}")
                if set(tr.impact_legs) != dst:
                    raise ValueError(f"{self.name}: impact set must cover stance after touchdown")
            else:
                if dst != src - legs or not legs <= src:
                    raise ValueError(f"{self.name}: bad liftoff at domain {dom.name}")
                if tr.impact_legs:
                    raise ValueError(f"{self.name}: liftoff carries no impact")
        return self


_BOTH = (Leg.FRONT, Leg.REAR)


def _gait(name, steps):
    domains, transitions = [], []
    for dom_name, contacts, event, legs in steps:
        domains.append(Domain(dom_name, tuple(contacts)))
        transitions.append((event, tuple(legs)))
    full = []
    for i, (event, legs) in enumerate(transitions):
        nxt = domains[(i + 1) % len(domains)]
        impact = nxt.contacts if event is EventType.TOUCHDOWN else ()
        full.append(Transition(event, legs, impact))
    return HybridGait(name, tuple(domains), tuple(full)).validate()


TD, LO = EventType.TOUCHDOWN, EventType.LIFTOFF

PRONK = _gait("pronk", [
    ("double_stance", _BOTH, LO, _BOTH),
    ("flight", (), TD, _BOTH),
])

BOUND_EXTENDED = _gait("bound_extended", [
    ("front_stance", (Leg.FRONT,), TD, (Leg.REAR,)),
    ("double_stance", _BOTH, LO, (Leg.FRONT,)),
    ("rear_stance", (Leg.REAR,), LO, (Leg.REAR,)),
    ("flight", (), TD, (Leg.FRONT,)),
])

BOUND_GATHERED = _gait("bound_gathered", [
    ("front_stance", (Leg.FRONT,), LO, (Leg.FRONT,)),
    ("flight", (), TD, (Leg.REAR,)),
    ("rear_stance", (Leg.REAR,), TD, (Leg.FRONT,)),
    ("double_stance", _BOTH, LO, (Leg.REAR,)),
])

BOUND_DOUBLE_FLIGHT = _gait("bound_double_flight", [
    ("front_stance", (Leg.FRONT,), LO, (Leg.FRONT,)),
    ("flight_gathered", (), TD, (Leg.REAR,)),
    ("rear_stance", (Leg.REAR,), LO, (Leg.REAR,)),
    ("flight_extended", (), TD, (Leg.FRONT,)),
])

GAITS = {g.name: g for g in (PRONK, BOUND_EXTENDED, BOUND_GATHERED, BOUND_DOUBLE_FLIGHT)}

_ALIASES = {
    "pronk": "pronk", "pf": "pronk",
    "bound_extended": "bound_extended", "be": "bound_extended",
    "bound_gathered": "bound_gathered", "bg": "bound_gathered",
    "bound_double_flight": "bound_double_flight", "b2": "bound_double_flight",
}


def gait_by_name(name: str) -> HybridGait:
    key = _ALIASES.get(name.strip().lower().replace("-", "_"))
    if key is None:
        raise KeyError(f"unknown gait {name!r}; choices: {sorted(GAITS)}")
    return GAITS[key]


def guard_value(model, gait: HybridGait, domain_index: int, q, qd, tau):
    """Signed distance to the exit event of the given domain.

    Touchdown: minimum swing-foot height over the trigger legs.  Liftoff:
    minimum vertical contact force over the trigger legs with the current
    torques applied.  The event fires when the value crosses zero from above.
    """
    tr = gait.transitions[domain_index]
    dom = gait.domains[domain_index]
    if tr.event is EventType.TOUCHDOWN:
        return min(float(foot_point(model, leg).position(np.asarray(q))[1]) for leg in tr.legs)
    contacts = ContactSet(dom.contacts)
    _, forces = constrained_accel(model, q, qd, tau, contacts)
    return min(float(forces[leg][1]) for leg in tr.legs)
