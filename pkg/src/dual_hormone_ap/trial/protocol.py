"""Trial protocols: timed meals and exercise bouts."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Any

from dual_hormone_ap.core.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_PROTOCOL = "default_protocol.json"


class EventType(Enum):
    """Kinds of protocol event."""

    MEAL = "meal"
    EXERCISE = "exercise"


@dataclass(frozen=True)
class ProtocolEvent:
    """One scheduled event.

    Attributes:
        kind: Meal or exercise.
        t_min: Start time [min].
        magnitude: Grams of CHO for a meal, heart-rate rise [BPM] for exercise.
        duration_min: Exercise duration [min]; zero for meals.
        announced: Whether the controller is told about a meal.
    """

    kind: EventType
    t_min: float
    magnitude: float
    duration_min: float = 0.0
    announced: bool = True

    @property
    def end(self) -> float:
        """End time [min]."""
        return self.t_min + self.duration_min

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation."""
        data: dict[str, Any] = {"type": self.kind.value, "t_min": self.t_min, "magnitude": self.magnitude}
        if self.kind is EventType.MEAL:
            data["announced"] = self.announced
        else:
            data["duration_min"] = self.duration_min
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: str = "<protocol>") -> ProtocolEvent:
        """Parse one event object.

        Raises:
            ConfigError: On an unknown type or a missing or invalid field.
        """
        try:
            kind = EventType(data["type"])
            event = cls(
                kind=kind,
                t_min=float(data["t_min"]),
                magnitude=float(data["magnitude"]),
                duration_min=float(data.get("duration_min", 0.0)),
                announced=bool(data.get("announced", True)),
            )
        except KeyError as e:
            raise ConfigError(f"{source}:{e.args[0]}", "missing event field") from e
        except (TypeError, ValueError) as e:
            raise ConfigError(source, f"invalid event {data!r} ({e})") from e
        if event.magnitude < 0 or event.duration_min < 0 or event.t_min < 0:
            raise ConfigError(source, f"event at t={event.t_min} has negative values")
        if kind is EventType.EXERCISE and event.duration_min <= 0:
            raise ConfigError(source, f"exercise at t={event.t_min} needs a positive duration")
        return event


def _in_interval(t: float, start: float, width: float) -> bool:
    return start <= t < start + width


@dataclass(frozen=True)
class Protocol:
    """Time-sorted events over a fixed trial span."""

    events: tuple[ProtocolEvent, ...]
    span: float
    description: str = ""

    def __post_init__(self) -> None:
        """Check ordering and span."""
        if self.span <= 0:
            raise ConfigError("span_min", "must be positive")
        times = [e.t_min for e in self.events]
        if times != sorted(times):
            raise ConfigError("events", "must be sorted by t_min")
        late = [e for e in self.events if e.t_min >= self.span]
        if late:
            raise ConfigError("events", f"event at t={late[0].t_min} lies beyond the span")

    @property
    def meals(self) -> list[ProtocolEvent]:
        """Meal events."""
        return [e for e in self.events if e.kind is EventType.MEAL]

    @property
    def exercises(self) -> list[ProtocolEvent]:
        """Exercise events."""
        return [e for e in self.events if e.kind is EventType.EXERCISE]

    def meal_grams(self, t: float, width: float, announced_only: bool = False) -> float:
        """Grams of CHO starting in ``[t, t + width)``."""
        return sum(
            e.magnitude
            for e in self.meals
            if _in_interval(e.t_min, t, width) and (e.announced or not announced_only)
        )

    def exercise_starts(self, t: float, width: float) -> bool:
        """Whether an exercise bout begins in ``[t, t + width)``."""
        return any(_in_interval(e.t_min, t, width) for e in self.exercises)

    def exercise_ends(self, t: float, width: float) -> bool:
        """Whether an exercise bout ends in ``[t, t + width)``."""
        return any(_in_interval(e.end, t, width) for e in self.exercises)

    def heart_rate(self, t: float, resting: float) -> float:
        """Heart rate [BPM] at ``t``: resting plus any active exercise rise."""
        return resting + sum(e.magnitude for e in self.exercises if e.t_min <= t < e.end)

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation."""
        return {
            "description": self.description,
            "span_min": self.span,
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: str = "<protocol>") -> Protocol:
        """Parse a protocol document.

        Raises:
            ConfigError: If the document is malformed.
        """
        if not isinstance(data, dict) or "span_min" not in data:
            raise ConfigError(source, "expected an object with 'span_min' and 'events'")
        raw = data.get("events", [])
        if not isinstance(raw, list):
            raise ConfigError(source, "'events' must be a list")
        events = tuple(ProtocolEvent.from_dict(e, source) for e in raw)
        return cls(events=events, span=float(data["span_min"]), description=str(data.get("description", "")))


def load_protocol(path: Path | None = None) -> Protocol:
    """Read a protocol file, or the bundled default when ``path`` is None.

    Raises:
        FileNotFoundError: If ``path`` does not exist.
        ConfigError: If the file is not a valid protocol.
    """
    if path is None:
        text = resources.files("dual_hormone_ap.data").joinpath(DEFAULT_PROTOCOL).read_text(encoding="utf-8")
        source = DEFAULT_PROTOCOL
    else:
        if not path.is_file():
            raise FileNotFoundError(path)
        text = path.read_text(encoding="utf-8")
        source = str(path)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(source, f"not valid JSON ({e.msg})") from e
    protocol = Protocol.from_dict(data, source)
    logger.debug("Loaded protocol %s: %d events over %.0f min", source, len(protocol.events), protocol.span)
    return protocol
