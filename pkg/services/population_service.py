# services/population_service.py
import datetime as dt
import logging
import math
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from core.errors import EmptyCohort, UnknownDimension
from core.managers.config_manager import GenerationConfig, HomeArea
from core.models.cohort import CohortTree, key_label
from core.models.dataset import Dataset, PersonDay
from core.models.geo import GeoPoint, haversine_m
from core.models.profile import IndividualProfile
from core.rng import choice_index, derive_rng
from core.vocabulary import PROFILE_DIMENSIONS
from event_bus import EventBus

logger = logging.getLogger(__name__)

GENERATED_ID_PREFIX = "G"


def matches_filters(profile: IndividualProfile, filters: Mapping[str, Sequence[Any]]) -> bool:
    return all(getattr(profile, dim) in allowed for dim, allowed in filters.items())


def within(point: GeoPoint, area: Optional[HomeArea]) -> bool:
    return area is None or haversine_m(point, GeoPoint(area.lat, area.lon)) <= area.radius_m


class PopulationService:
    """Chooses who gets a generated diary, and on which dates."""

    def __init__(self, event_bus: EventBus, run_seed: int):
        self.event_bus = event_bus
        self.run_seed = run_seed
        logger.info("PopulationService initialized.")

    def sample_profiles(self, source: Dataset, count: int, filters: Optional[Mapping[str, Sequence[Any]]] = None,
                        home_area: Optional[HomeArea] = None, persons_per_profile: int = 1,
                        tree: Optional[CohortTree] = None) -> List[IndividualProfile]:
        """
        `count` new people. A cohort is drawn by size, its attribute values
        from the cohort's marginals, and home/work from the cohort's own
        coordinates. Each drawn attribute set is shared by
        `persons_per_profile` people with separate home draws.
        """
        filters = {dim: list(values) for dim, values in (filters or {}).items()}
        for dim in filters:
            if dim not in PROFILE_DIMENSIONS:
                raise UnknownDimension(dim)

        eligible = [p for p in source.profiles.values() if matches_filters(p, filters) and within(p.home, home_area)]
        if not eligible:
            raise EmptyCohort(f"filters {filters}" + (" within the home area" if home_area else ""))

        groups = self._groups(eligible, tree)
        sizes = [len(members) for _, members in groups]
        rng = derive_rng(self.run_seed, "population")
        profiles: List[IndividualProfile] = []
        templates = math.ceil(count / persons_per_profile)
        for _ in range(templates):
            _, members = groups[choice_index(rng, sizes)]
            attributes = {dim: self._marginal_draw(rng, members, dim) for dim in PROFILE_DIMENSIONS}
            workers = [m.work for m in members if m.work is not None]
            for _ in range(persons_per_profile):
                if len(profiles) == count:
                    break
                home = members[int(rng.integers(len(members)))].home
                work = workers[int(rng.integers(len(workers)))] if workers else None
                person_id = f"{GENERATED_ID_PREFIX}{len(profiles) + 1:06d}"
                profiles.append(IndividualProfile(person_id=person_id, home=home, work=work, **attributes))
        self.log("info", f"Sampled {len(profiles)} profiles from {len(eligible)} eligible survey profiles "
                         f"across {len(groups)} cohorts.")
        return profiles

    @staticmethod
    def _groups(eligible: List[IndividualProfile],
                tree: Optional[CohortTree]) -> List[Tuple[str, List[IndividualProfile]]]:
        if tree is None:
            return [("ALL", eligible)]
        by_leaf: Dict[int, List[IndividualProfile]] = {}
        for profile in eligible:
            by_leaf.setdefault(tree.lookup(profile).node_id, []).append(profile)
        return [(key_label(tree.node(node_id).key), members) for node_id, members in sorted(by_leaf.items())]

    @staticmethod
    def _marginal_draw(rng: np.random.Generator, members: Sequence[IndividualProfile], dim: str) -> Any:
        values = PROFILE_DIMENSIONS[dim]
        counts = [sum(1 for m in members if getattr(m, dim) == v) for v in values]
        return values[choice_index(rng, counts)]

    @staticmethod
    def date_range(start_date: str, days: int) -> List[dt.date]:
        start = dt.date.fromisoformat(start_date)
        return [start + dt.timedelta(days=offset) for offset in range(days)]

    def target(self, source: Dataset, config: GenerationConfig,
               tree: Optional[CohortTree] = None) -> Tuple[List[IndividualProfile], List[PersonDay]]:
        """Profiles and person-days to generate for a run."""
        if config.mode == "mirror":
            days = sorted([d.key for d in source.diaries] + list(source.empty_days))
            return list(source.profiles.values()), days
        profiles = self.sample_profiles(source, config.count, config.filters, config.home_area,
                                        config.persons_per_profile, tree)
        dates = self.date_range(config.start_date, config.days)
        return profiles, [(p.person_id, date) for p in profiles for date in dates]

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[PopulationService] {message}")
        self.event_bus.emit("log_message_received", "PopulationService", level, message)
