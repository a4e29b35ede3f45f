"""Schedules: arrival, departure and route per (train, itinerary position)."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class TrainTimes:
    arrivals: tuple[int, ...]
    departures: tuple[int, ...]
    routes: tuple[int, ...]  # index into the node's route list


class Schedule:
    """Mapping ``train id -> TrainTimes`` for the trains that are scheduled.

    Trains are all-or-nothing: a scheduled train has an entry for every
    position of its itinerary.
    """

    def __init__(self, entries: dict[int, TrainTimes] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_trains(cls, rows: Iterable[tuple]) -> "Schedule":
        return cls({c: TrainTimes(tuple(a), tuple(d), tuple(r)) for c, a, d, r in rows})

    def __contains__(self, c):
        return c in self.entries

    def __getitem__(self, c) -> TrainTimes:
        return self.entries[c]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(sorted(self.entries))

    def __eq__(self, other):
        return isinstance(other, Schedule) and self.entries == other.entries

    def __repr__(self):
        return f"Schedule({len(self.entries)} trains)"

    def total_arrival(self) -> int:
        return sum(sum(tt.arrivals) for tt in self.entries.values())

    def to_dict(self) -> dict:
        return {"trains": [
            {"id": c, "arrivals": list(tt.arrivals), "departures": list(tt.departures),
             "routes": list(tt.routes)}
            for c, tt in sorted(self.entries.items())]}

    @classmethod
    def from_dict(cls, doc: dict) -> "Schedule":
        return cls.from_trains((t["id"], t["arrivals"], t["departures"], t["routes"])
                               for t in doc["trains"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def loads(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


def total_delay(inst, sched: Schedule) -> int:
    """Accumulated arrival delay against the base timetable."""
    out = 0
    for c, tt in sched.entries.items():
        base = inst.trains[c].base_arrivals
        out += sum(a - a0 for a, a0 in zip(tt.arrivals, base))
    return out
