"""Handover message generation: content planning, sentence planning and
template realization under an information-density budget.

The density budget caps the estimated delivery duration at a fraction of
the available notice; content planning greedily keeps the most salient
facts that still fit when rendered at the tersest wording. The driver's
load level caps how rich the wording may get (load 1 -> DETAILED,
2 -> STANDARD, 3 -> TERSE); when a richer rendering would blow the
budget, the wording degrades before any fact is dropped, so the fact
count depends on the budget alone and never grows with load.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, replace
from importlib import resources
from typing import Iterable, Mapping, Sequence

from .driver import Modality
from .tql import CriticalityReport

WORDS_PER_SECOND = {Modality.AUDIO: 2.5, Modality.VISUAL: 4.0}
TACTILE_PATTERN_SECONDS = 1.0   # tactile carries an alert pattern, not words
DEFAULT_DENSITY_FRACTION = 0.3
DEFAULT_ACK_WINDOW = 5.0

HAZARD_NAMES = {
    "FOG": "fog",
    "TUNNEL": "tunnel",
    "CONSTRUCTION": "construction",
    "ICE": "ice",
    "SENSOR_DEAD_ZONE": "sensor dead zone",
}


class Predicate(enum.Enum):
    HANDOVER_REQUEST = "HANDOVER_REQUEST"
    TIME_BUDGET = "TIME_BUDGET"
    HAZARD = "HAZARD"
    OBSTACLE = "OBSTACLE"
    SENSOR_LOSS = "SENSOR_LOSS"
    ACTION_ADVICE = "ACTION_ADVICE"


MANDATORY = (Predicate.HANDOVER_REQUEST, Predicate.TIME_BUDGET)


class Verbosity(enum.Enum):
    TERSE = "TERSE"
    STANDARD = "STANDARD"
    DETAILED = "DETAILED"


# Most detailed first; degradation walks right.
_VERBOSITY_LADDER = (Verbosity.DETAILED, Verbosity.STANDARD, Verbosity.TERSE)


def verbosity_for_load(load: int) -> Verbosity:
    return {1: Verbosity.DETAILED, 2: Verbosity.STANDARD, 3: Verbosity.TERSE}[load]


class MissingTemplate(Exception):
    def __init__(self, predicate: Predicate, verbosity: Verbosity):
        super().__init__(f"no template for {predicate.value}.{verbosity.value}")
        self.predicate = predicate
        self.verbosity = verbosity


@dataclass(frozen=True)
class Fact:
    predicate: Predicate
    salience: float = 0.0
    distance: float | None = None   # meters to the referent
    time: float | None = None       # seconds to the event / budget window
    lane: int | None = None
    tag: str | None = None          # hazard tag key, e.g. "FOG"
    action: str | None = None
    order: int = 0                  # catalog order, tie-break for equal salience

    @property
    def mandatory(self) -> bool:
        return self.predicate in MANDATORY


def hazard_fact(tag: str, severity: float, time_to_event: float,
                distance: float, dt: float, order: int = 0) -> Fact:
    """Hazard with the standard salience: severity / max(time_to_event, dt)."""
    salience = severity * (1.0 / max(time_to_event, dt))
    return Fact(Predicate.HAZARD, salience=salience, distance=distance,
                time=time_to_event, tag=tag, order=order)


@dataclass(frozen=True)
class Message:
    text: str
    facts_included: tuple[Fact, ...]
    word_count: int
    est_duration: float | None
    verbosity: Verbosity


TemplateTable = Mapping[str, str]


def parse_templates(text: str) -> TemplateTable:
    table = json.loads(text)
    for predicate in Predicate:
        for verbosity in Verbosity:
            if f"{predicate.value}.{verbosity.value}" not in table:
                raise MissingTemplate(predicate, verbosity)
    return table


def default_templates() -> TemplateTable:
    text = resources.files("handover.data").joinpath("templates.json").read_text("utf-8")
    return parse_templates(text)


def round_distance(meters: float) -> int:
    """Nearest 50 m, halves up."""
    return int(math.floor(meters / 50.0 + 0.5)) * 50


def round_time(seconds: float) -> int:
    return int(math.floor(seconds + 0.5))


def _slots(fact: Fact) -> dict[str, object]:
    slots: dict[str, object] = {}
    if fact.distance is not None:
        slots["distance"] = round_distance(fact.distance)
    if fact.time is not None:
        slots["time"] = round_time(fact.time)
    if fact.lane is not None:
        slots["lane"] = fact.lane
    if fact.action is not None:
        slots["action"] = fact.action.capitalize()
    if fact.tag is not None:
        slots["hazard"] = HAZARD_NAMES.get(fact.tag, fact.tag.lower()).capitalize()
    return slots


def _sentence_plan(facts: Sequence[Fact]) -> list[list[Fact]]:
    """Mandatory core first, then facts by time-to-event; hazards with the
    same rounded distance aggregate into one coordinated sentence."""
    request = [f for f in facts if f.predicate is Predicate.HANDOVER_REQUEST]
    budget = [f for f in facts if f.predicate is Predicate.TIME_BUDGET]
    rest = [f for f in facts if not f.mandatory]
    rest.sort(key=lambda f: (f.time if f.time is not None else math.inf, f.order))
    groups: list[list[Fact]] = [[f] for f in request] + [[f] for f in budget]
    hazard_group: dict[int, int] = {}
    for f in rest:
        if f.predicate is Predicate.HAZARD and f.distance is not None:
            key = round_distance(f.distance)
            if key in hazard_group:
                groups[hazard_group[key]].append(f)
                continue
            hazard_group[key] = len(groups)
        groups.append([f])
    return groups


def realize(facts: Sequence[Fact], verbosity: Verbosity,
            templates: TemplateTable | None = None) -> Message:
    """Render facts to text; distances snap to 50 m, times to whole seconds."""
    if not facts:
        raise ValueError("cannot realize an empty fact list")
    if templates is None:
        templates = default_templates()
    sentences = []
    for group in _sentence_plan(facts):
        lead = group[0]
        key = f"{lead.predicate.value}.{verbosity.value}"
        template = templates.get(key)
        if template is None:
            raise MissingTemplate(lead.predicate, verbosity)
        slots = _slots(lead)
        if len(group) > 1:   # coordinated hazard phrase
            names = [HAZARD_NAMES.get(f.tag, "hazard") for f in group if f.tag]
            joined = " and ".join(names)
            slots["hazard"] = joined[:1].upper() + joined[1:]
        try:
            sentences.append(template.format_map(slots))
        except KeyError as exc:
            raise MissingTemplate(lead.predicate, verbosity) from exc
    text = " ".join(sentences)
    return Message(text=text, facts_included=tuple(facts),
                   word_count=len(text.split()), est_duration=None,
                   verbosity=verbosity)


def estimate_density(message: Message, channel: Modality, notice: float,
                     fraction: float = DEFAULT_DENSITY_FRACTION) -> tuple[float, bool]:
    """Estimated delivery duration and whether it fits the density budget
    (duration <= fraction * notice)."""
    if notice <= 0:
        raise ValueError("notice must be > 0")
    if channel is Modality.TACTILE:
        est = TACTILE_PATTERN_SECONDS
    else:
        est = message.word_count / WORDS_PER_SECOND[channel]
    return est, est <= fraction * notice


@dataclass(frozen=True)
class Budget:
    channel: Modality
    notice: float
    fraction: float = DEFAULT_DENSITY_FRACTION
    templates: TemplateTable | None = None


def _ordered_candidates(facts: Iterable[Fact]) -> tuple[list[Fact], list[Fact]]:
    core = [f for f in facts if f.mandatory]
    optional = [f for f in facts if not f.mandatory]
    optional.sort(key=lambda f: (-f.salience, f.order))
    return core, optional


def plan_content(report: CriticalityReport, facts: Sequence[Fact],
                 budget: Budget) -> list[Fact]:
    """Mandatory core plus the most salient optional facts that are
    predicted to fit the budget when rendered at the tersest wording."""
    del report  # facts are already grounded; the report shaped them upstream
    core, optional = _ordered_candidates(facts)
    templates = budget.templates or default_templates()
    for k in range(len(optional), -1, -1):
        selected = core + optional[:k]
        probe = realize(selected, Verbosity.TERSE, templates)
        _, fits = estimate_density(probe, budget.channel, budget.notice,
                                   budget.fraction)
        if fits:
            return selected
    return core


def compose(report: CriticalityReport, facts: Sequence[Fact], channel: Modality,
            notice: float, driver_load: int,
            templates: TemplateTable | None = None,
            fraction: float = DEFAULT_DENSITY_FRACTION,
            ack_window: float = DEFAULT_ACK_WINDOW) -> Message:
    """Full pipeline: select content, render at the richest wording the load
    level and budget allow, and attach the density estimate.

    The mandatory core is synthesized when absent. The result always fits
    the budget for any notice the orchestrator issues alerts at (the terse
    core is three words).
    """
    if templates is None:
        templates = default_templates()
    facts = list(facts)
    if not any(f.predicate is Predicate.HANDOVER_REQUEST for f in facts):
        facts.insert(0, Fact(Predicate.HANDOVER_REQUEST, salience=math.inf,
                             time=notice))
    if not any(f.predicate is Predicate.TIME_BUDGET for f in facts):
        facts.insert(1, Fact(Predicate.TIME_BUDGET, salience=math.inf,
                             time=ack_window))
    budget = Budget(channel=channel, notice=notice, fraction=fraction,
                    templates=templates)
    core, optional = _ordered_candidates(facts)
    ladder_top = _VERBOSITY_LADDER.index(verbosity_for_load(driver_load))
    for k in range(len(optional), -1, -1):
        selected = core + optional[:k]
        for verbosity in _VERBOSITY_LADDER[ladder_top:]:
            candidate = realize(selected, verbosity, templates)
            est, fits = estimate_density(candidate, channel, notice, fraction)
            if fits:
                return replace(candidate, est_duration=est)
    # Nothing fit, not even the terse core; return it anyway (notice below
    # the design floor of ~4 s on the audio channel).
    fallback = realize(core, Verbosity.TERSE, templates)
    est, _ = estimate_density(fallback, channel, notice, fraction)
    return replace(fallback, est_duration=est)
