# core/models/profile.py
from dataclasses import dataclass
from typing import Any, Dict, Optional

from core.errors import UnknownDimension
from core.models.geo import GeoPoint
from core.vocabulary import PROFILE_DIMENSIONS


@dataclass(frozen=True)
class IndividualProfile:
    """The ten survey attributes of one person, home and work included."""
    person_id: str
    age_band: str
    gender: str
    occupation: str
    income: str
    education: str
    owns_car: bool
    housing: str
    primary_mode: str
    home: GeoPoint
    work: Optional[GeoPoint] = None

    def attribute(self, dimension: str) -> Any:
        if dimension not in PROFILE_DIMENSIONS:
            raise UnknownDimension(dimension)
        return getattr(self, dimension)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "person_id": self.person_id,
            "age_band": self.age_band,
            "gender": self.gender,
            "occupation": self.occupation,
            "income": self.income,
            "education": self.education,
            "owns_car": self.owns_car,
            "housing": self.housing,
            "primary_mode": self.primary_mode,
            "home": self.home.to_list(),
            "work": self.work.to_list() if self.work else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "IndividualProfile":
        work = data.get("work")
        return cls(
            person_id=data["person_id"],
            age_band=data["age_band"],
            gender=data["gender"],
            occupation=data["occupation"],
            income=data["income"],
            education=data["education"],
            owns_car=bool(data["owns_car"]),
            housing=data["housing"],
            primary_mode=data["primary_mode"],
            home=GeoPoint.from_list(data["home"]),
            work=GeoPoint.from_list(work) if work else None,
        )

    def describe(self) -> str:
        """Plain-text rendering used as the profile slot of generation prompts."""
        car = "owns a car" if self.owns_car else "does not own a car"
        lines = [
            f"Person: {self.person_id}",
            f"Age: {self.age_band}",
            f"Gender: {self.gender}",
            f"Occupation: {self.occupation}",
            f"Income: {self.income}",
            f"Education: {self.education}",
            f"Car: {car}",
            f"Living situation: {self.housing}",
            f"Primary mode of transportation: {self.primary_mode}",
            f"Home location: ({self.home.lat:.5f}, {self.home.lon:.5f})",
        ]
        if self.work:
            lines.append(f"Work location: ({self.work.lat:.5f}, {self.work.lon:.5f})")
        return "\n".join(lines)
