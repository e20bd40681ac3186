# core/errors.py
"""
Exception hierarchy for the pipeline. Every error carries a stable code and a
context dict so the CLI can emit a machine-readable record.
"""
from typing import Any, Dict, Optional


class MobForgeError(Exception):
    code = "mobforge_error"

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context: Dict[str, Any] = context

    def to_record(self) -> Dict[str, Any]:
        return {"error": self.code, "message": self.message, "context": self.context}


class ConfigError(MobForgeError):
    code = "config_error"


# --- survey ingest ---

class MalformedRow(MobForgeError):
    code = "malformed_row"

    def __init__(self, line: int, reason: str, source: Optional[str] = None):
        super().__init__(f"Malformed row at line {line}: {reason}", line=line, reason=reason, source=source)
        self.line = line
        self.reason = reason


class UnknownPersonId(MobForgeError):
    code = "unknown_person_id"

    def __init__(self, line: int, person_id: str):
        super().__init__(f"Trip at line {line} references unknown person '{person_id}'", line=line, person_id=person_id)
        self.line = line


class DuplicateProfile(MobForgeError):
    code = "duplicate_profile"

    def __init__(self, person_id: str, line: Optional[int] = None):
        super().__init__(f"Duplicate profile for person '{person_id}'", person_id=person_id, line=line)


class EmptySource(MobForgeError):
    code = "empty_source"

    def __init__(self, source: str):
        super().__init__(f"Source '{source}' contains no data rows", source=source)


class OverlappingTrips(MobForgeError):
    code = "overlapping_trips"

    def __init__(self, person_id: str, date: str):
        super().__init__(f"Trips overlap for person '{person_id}' on {date}", person_id=person_id, date=date)


class InvalidSpec(MobForgeError):
    code = "invalid_spec"

    def __init__(self, reason: str):
        super().__init__(f"Invalid synth spec: {reason}", reason=reason)


# --- cohorts ---

class UnknownDimension(MobForgeError):
    code = "unknown_dimension"

    def __init__(self, dimension: str):
        super().__init__(f"Unknown profile dimension '{dimension}'", dimension=dimension)


class EmptyCohort(MobForgeError):
    code = "empty_cohort"

    def __init__(self, label: str = ""):
        super().__init__(f"Cohort '{label}' has no members", label=label)


class UnparseableScore(MobForgeError):
    code = "unparseable_score"

    def __init__(self, response: str):
        super().__init__("No rating between 1 and 10 found in response", response=response[:200])


# --- llm gateway ---

class BackendError(MobForgeError):
    code = "backend_error"


class BackendUnreachable(BackendError):
    code = "backend_unreachable"


class FixtureMiss(BackendError):
    code = "fixture_miss"

    def __init__(self, template_id: str, slots_hash: str):
        super().__init__(f"No fixture for template '{template_id}' with slots hash {slots_hash[:12]}",
                         template_id=template_id, slots_hash=slots_hash)


class MissingContext(BackendError):
    code = "missing_context"

    def __init__(self, template_id: str, missing: str):
        super().__init__(f"Replay request for '{template_id}' lacks '{missing}' in its context",
                         template_id=template_id, missing=missing)


class SlotArityMismatch(MobForgeError):
    code = "slot_arity_mismatch"

    def __init__(self, template_id: str, expected: int, got: int):
        super().__init__(f"Template '{template_id}' takes {expected} slots, got {got}",
                         template_id=template_id, expected=expected, got=got)


# --- pattern engine ---

class UnmatchableResponse(MobForgeError):
    code = "unmatchable_response"


class UnparseableField(MobForgeError):
    code = "unparseable_field"


class HoldoutLeak(MobForgeError):
    code = "holdout_leak"


# --- diary reasoner ---

class PlanUnparseable(MobForgeError):
    code = "plan_unparseable"


class DecisionUnparseable(MobForgeError):
    code = "decision_unparseable"


class AnchorFailure(MobForgeError):
    code = "anchor_failure"


# --- spatial anchor ---

class NoPoiOfCategory(AnchorFailure):
    code = "no_poi_of_category"

    def __init__(self, category: str):
        super().__init__(f"No POI of category '{category}'", category=category)


class NoReachablePoi(AnchorFailure):
    code = "no_reachable_poi"

    def __init__(self, category: str, origin_node: int):
        super().__init__(f"No POI of category '{category}' reachable from node {origin_node}",
                         category=category, origin_node=origin_node)


class Unsnappable(AnchorFailure):
    code = "unsnappable"

    def __init__(self, lat: float, lon: float, nearest_m: float, radius_m: float):
        super().__init__(f"Coordinate ({lat}, {lon}) is {nearest_m:.1f} m from the nearest node (radius {radius_m} m)",
                         lat=lat, lon=lon, nearest_m=nearest_m, radius_m=radius_m)


class DanglingEdge(MobForgeError):
    code = "dangling_edge"

    def __init__(self, u: int, v: int):
        super().__init__(f"Edge ({u}, {v}) references a missing node", u=u, v=v)


class NonPositiveLength(MobForgeError):
    code = "non_positive_length"

    def __init__(self, u: int, v: int, length: float):
        super().__init__(f"Edge ({u}, {v}) has non-positive length {length}", u=u, v=v, length=length)


class PoiUnsnappable(MobForgeError):
    code = "poi_unsnappable"

    def __init__(self, poi_id: int, nearest_m: float):
        super().__init__(f"POI {poi_id} is {nearest_m:.1f} m from the nearest node", poi_id=poi_id, nearest_m=nearest_m)


class UnknownNode(MobForgeError):
    code = "unknown_node"

    def __init__(self, node_id):
        super().__init__(f"Unknown node {node_id}", node_id=node_id)


# --- evaluation ---

class BinningMismatch(MobForgeError):
    code = "binning_mismatch"


class EmptyDistribution(MobForgeError):
    code = "empty_distribution"
