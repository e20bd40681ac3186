# core/models/dataset.py
import datetime as dt
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from core.errors import MobForgeError
from core.models.diary import TravelDiary, day_type_of
from core.models.profile import IndividualProfile

PersonDay = Tuple[str, dt.date]


@dataclass(frozen=True)
class Dataset:
    """
    Profiles keyed by person id plus their diaries. `empty_days` lists
    person-days with no trips; they count as zero-location days in evaluation.
    """
    profiles: Mapping[str, IndividualProfile]
    diaries: Tuple[TravelDiary, ...]
    empty_days: Tuple[PersonDay, ...] = field(default_factory=tuple)

    @classmethod
    def build(cls, profiles: Iterable[IndividualProfile], diaries: Iterable[TravelDiary],
              empty_days: Iterable[PersonDay] = ()) -> "Dataset":
        by_id: Dict[str, IndividualProfile] = {}
        for profile in profiles:
            if profile.person_id in by_id:
                raise MobForgeError(f"Duplicate person id '{profile.person_id}'", person_id=profile.person_id)
            by_id[profile.person_id] = profile

        seen = set()
        diary_list = list(diaries)
        for diary in diary_list:
            if diary.person_id not in by_id:
                raise MobForgeError(f"Diary references unknown person '{diary.person_id}'", person_id=diary.person_id)
            if diary.key in seen:
                raise MobForgeError(f"Duplicate diary for {diary.person_id} on {diary.date}",
                                    person_id=diary.person_id, date=diary.date.isoformat())
            seen.add(diary.key)

        empty = tuple(empty_days)
        for person_id, date in empty:
            if person_id not in by_id:
                raise MobForgeError(f"No-trip day references unknown person '{person_id}'", person_id=person_id)
            if (person_id, date) in seen:
                raise MobForgeError(f"Person-day {person_id} {date} is both empty and populated",
                                    person_id=person_id, date=date.isoformat())
        return cls(MappingProxyType(by_id), tuple(diary_list), empty)

    @property
    def person_ids(self) -> Tuple[str, ...]:
        return tuple(self.profiles.keys())

    def diaries_of(self, person_ids: Iterable[str]) -> List[TravelDiary]:
        wanted = set(person_ids)
        return [d for d in self.diaries if d.person_id in wanted]

    def subset(self, person_ids: Iterable[str]) -> "Dataset":
        wanted = [pid for pid in person_ids if pid in self.profiles]
        keep = set(wanted)
        return Dataset(
            MappingProxyType({pid: self.profiles[pid] for pid in wanted}),
            tuple(d for d in self.diaries if d.person_id in keep),
            tuple(day for day in self.empty_days if day[0] in keep),
        )

    def filter_days(self, day_filter: str) -> "Dataset":
        """Restricts diaries and empty days to weekday/weekend; 'all' is a no-op."""
        if day_filter == "all":
            return self
        return Dataset(
            self.profiles,
            tuple(d for d in self.diaries if d.day_type == day_filter),
            tuple(day for day in self.empty_days if day_type_of(day[1]) == day_filter),
        )

    @property
    def trip_count(self) -> int:
        return sum(len(d.points) for d in self.diaries)

    def profile(self, person_id: str) -> Optional[IndividualProfile]:
        return self.profiles.get(person_id)
