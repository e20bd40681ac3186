"""
Closed vocabularies for survey profiles and trip records, plus the lookup
tables that tie them together (speed caps, cruise speeds, purpose categories).
"""
from enum import Enum
from typing import Dict, Tuple


class AgeBand(str, Enum):
    UNDER_18 = "<18"
    AGE_18_25 = "18-25"
    AGE_26_30 = "26-30"
    AGE_31_35 = "31-35"
    AGE_36_40 = "36-40"
    AGE_41_45 = "41-45"
    AGE_46_50 = "46-50"
    OVER_51 = ">51"


class Gender(str, Enum):
    MALE = "Male"
    FEMALE = "Female"


class Occupation(str, Enum):
    GOVERNMENT_MANAGEMENT = "Management of Government Agencies"
    ENTERPRISES_AND_INSTITUTIONS = "Enterprises, and Public Institutions"
    PROFESSIONAL_TECHNICAL = "Professional and Technical Personnel"
    CIVIL_SERVICE_OPERATIONS = (
        "Civil Servants and Operational Staff in Firefighting, Postal, and Telecommunications Services"
    )
    STUDENTS = "Students"
    COMMERCIAL_SERVICE = "Commercial and Service Industry Personnel"
    SKILLED_WORKERS = "Skilled Workers"
    SELF_EMPLOYED = "Self-employed Individuals"
    RETIRED_UNEMPLOYED = "Retired/Unemployed"
    OTHERS = "Others"


class Income(str, Enum):
    LOW = "Low"
    RELATIVELY_LOW = "Relatively Low"
    MEDIUM = "Medium"
    RELATIVELY_HIGH = "Relatively High"
    HIGH = "High"


class Education(str, Enum):
    BACHELOR = "Bachelor's Degree"
    ASSOCIATE = "Associate Degree"
    HIGH_SCHOOL = "High School Diploma"
    TECHNICAL_SCHOOL = "Technical School Diploma"
    MASTER = "Master's Degree"
    JUNIOR_HIGH = "Junior High School Diploma"
    PRIMARY_SCHOOL = "Primary School Diploma"


class Housing(str, Enum):
    RENTED = "Rented House"
    OWNED = "Owned House"
    DORMITORY = "Dormitory"
    OTHERS = "Others"


class TravelMode(str, Enum):
    BUS_SUBWAY = "Bus and Subway"
    DRIVING = "Driving"
    TAXI = "Taxi/Ride-Hailing"
    BIKE = "Electric Bike/Bicycle"
    WALKING = "Walking"
    OTHER = "Other"


class TripPurpose(str, Enum):
    COMMUTING = "Commuting to Work"
    SCHOOL = "Going to School"
    ENTERTAINMENT = "Entertainment/Dining"
    MEDICAL = "Medical Appointment"
    PICK_UP_DROP_OFF = "Picking Up/Dropping Off Someone"
    RETURNING_HOME = "Returning Home"
    SHOPPING = "Shopping"
    BUSINESS = "Business Trip"
    VISITING_FRIENDS = "Visiting Friends"
    OTHER = "Other"


class LocationCategory(str, Enum):
    WORKPLACE = "workplace"
    SCHOOL = "school"
    ENTERTAINMENT = "entertainment"
    HOSPITAL = "hospital"
    RESIDENCE = "residence"
    SHOP = "shop"
    ANY = "any"


def values_of(enum_cls) -> Tuple[str, ...]:
    return tuple(member.value for member in enum_cls)


AGE_BANDS = values_of(AgeBand)
GENDERS = values_of(Gender)
OCCUPATIONS = values_of(Occupation)
INCOMES = values_of(Income)
EDUCATIONS = values_of(Education)
HOUSINGS = values_of(Housing)
MODES = values_of(TravelMode)
PURPOSES = values_of(TripPurpose)
# POIs carry a concrete category; ANY is only valid in decisions.
POI_CATEGORIES = tuple(c.value for c in LocationCategory if c is not LocationCategory.ANY)
DECISION_CATEGORIES = values_of(LocationCategory)

# Profile dimensions usable for cohort splits and evaluation slices, in the
# default split order.
PROFILE_DIMENSIONS: Dict[str, Tuple] = {
    "occupation": OCCUPATIONS,
    "age_band": AGE_BANDS,
    "income": INCOMES,
    "gender": GENDERS,
    "owns_car": (True, False),
    "education": EDUCATIONS,
    "housing": HOUSINGS,
    "primary_mode": MODES,
}

DIMENSION_ABBREVIATIONS: Dict[str, str] = {
    "age_band": "A",
    "income": "I",
    "occupation": "O",
    "gender": "G",
    "education": "E",
    "owns_car": "C",
    "housing": "H",
    "primary_mode": "M",
}

DEFAULT_SPEED_CAPS_KMH: Dict[str, float] = {
    TravelMode.WALKING.value: 7.0,
    TravelMode.BIKE.value: 25.0,
    TravelMode.BUS_SUBWAY.value: 60.0,
    TravelMode.DRIVING.value: 90.0,
    TravelMode.TAXI.value: 90.0,
    TravelMode.OTHER.value: 90.0,
}

DEFAULT_CRUISE_SPEEDS_KMH: Dict[str, float] = {
    TravelMode.WALKING.value: 5.0,
    TravelMode.BIKE.value: 15.0,
    TravelMode.BUS_SUBWAY.value: 25.0,
    TravelMode.DRIVING.value: 40.0,
    TravelMode.TAXI.value: 40.0,
    TravelMode.OTHER.value: 30.0,
}

PURPOSE_CATEGORIES: Dict[str, Tuple[str, ...]] = {
    TripPurpose.COMMUTING.value: (LocationCategory.WORKPLACE.value,),
    TripPurpose.SCHOOL.value: (LocationCategory.SCHOOL.value,),
    TripPurpose.ENTERTAINMENT.value: (LocationCategory.ENTERTAINMENT.value,),
    TripPurpose.MEDICAL.value: (LocationCategory.HOSPITAL.value,),
    TripPurpose.PICK_UP_DROP_OFF.value: (LocationCategory.SCHOOL.value, LocationCategory.RESIDENCE.value),
    TripPurpose.RETURNING_HOME.value: (LocationCategory.RESIDENCE.value,),
    TripPurpose.SHOPPING.value: (LocationCategory.SHOP.value,),
    TripPurpose.BUSINESS.value: (LocationCategory.WORKPLACE.value,),
    TripPurpose.VISITING_FRIENDS.value: (LocationCategory.RESIDENCE.value,),
    TripPurpose.OTHER.value: (LocationCategory.ANY.value,),
}

# Survey marginals (percent) used when a synthetic archetype leaves a
# dimension unspecified. Normalised at sampling time.
SURVEY_MARGINALS: Dict[str, Dict] = {
    "age_band": {"<18": 2.7, "18-25": 27.2, "26-30": 31.4, "31-35": 21.7, "36-40": 9.3,
                 "41-45": 4.6, "46-50": 1.8, ">51": 1.3},
    "gender": {"Male": 52.0, "Female": 48.0},
    "occupation": {
        Occupation.GOVERNMENT_MANAGEMENT.value: 8.84,
        Occupation.ENTERPRISES_AND_INSTITUTIONS.value: 8.96,
        Occupation.PROFESSIONAL_TECHNICAL.value: 17.33,
        Occupation.CIVIL_SERVICE_OPERATIONS.value: 4.55,
        Occupation.STUDENTS.value: 9.68,
        Occupation.COMMERCIAL_SERVICE.value: 21.1,
        Occupation.SKILLED_WORKERS.value: 14.25,
        Occupation.SELF_EMPLOYED.value: 7.48,
        Occupation.RETIRED_UNEMPLOYED.value: 1.8,
        Occupation.OTHERS.value: 14.85,
    },
    "income": {"Low": 39.96, "Relatively Low": 30.79, "Medium": 16.87, "Relatively High": 8.8, "High": 3.58},
    "education": {
        Education.BACHELOR.value: 32.21,
        Education.ASSOCIATE.value: 28.72,
        Education.HIGH_SCHOOL.value: 14.23,
        Education.TECHNICAL_SCHOOL.value: 10.55,
        Education.MASTER.value: 7.53,
        Education.JUNIOR_HIGH.value: 6.01,
        Education.PRIMARY_SCHOOL.value: 0.75,
    },
    "owns_car": {True: 22.32, False: 77.68},
    "housing": {"Rented House": 47.62, "Owned House": 34.69, "Dormitory": 13.5, "Others": 4.19},
    "primary_mode": {
        TravelMode.BUS_SUBWAY.value: 58.17,
        TravelMode.DRIVING.value: 9.95,
        TravelMode.TAXI.value: 4.8,
        TravelMode.BIKE.value: 10.45,
        TravelMode.WALKING.value: 15.77,
        TravelMode.OTHER.value: 0.86,
    },
}


def is_member(dimension: str, value) -> bool:
    """Checks a value against a profile dimension's vocabulary, bools compared strictly."""
    allowed = PROFILE_DIMENSIONS.get(dimension)
    if allowed is None:
        return False
    if dimension == "owns_car":
        return isinstance(value, bool)
    return isinstance(value, str) and value in allowed
