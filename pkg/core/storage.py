# core/storage.py
"""
Artifact persistence. JSON lines use a fixed key order and compact separators
so identical runs produce byte-identical files. JSONL artifacts open with a
meta header line; CSV artifacts are covered by a manifest.json sidecar.
"""
import datetime as dt
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

import pandas as pd

from core.errors import ConfigError, MobForgeError
from core.models.dataset import Dataset
from core.models.diary import TravelDiary
from core.models.survey import PROFILE_COLUMNS, ProfileRow, describe_validation_error, profile_to_row

logger = logging.getLogger(__name__)

PROFILES_FILE = "profiles.csv"
DIARIES_FILE = "diaries.jsonl"
EMPTY_DAYS_FILE = "no_trip_days.jsonl"
MANIFEST_FILE = "manifest.json"


def dump_line(record: Dict[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def run_meta(config_hash: str, run_seed: int, **extra: Any) -> Dict[str, Any]:
    meta = {"config_hash": config_hash, "run_seed": run_seed}
    meta.update(extra)
    return meta


def write_jsonl(path: Path, records: Iterable[Dict[str, Any]], meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        if meta is not None:
            f.write(dump_line({"meta": meta}) + "\n")
        for record in records:
            f.write(dump_line(record) + "\n")
    logger.debug(f"Wrote {path}")
    return path


def read_jsonl(path: Path) -> Tuple[Optional[Dict[str, Any]], List[Dict[str, Any]]]:
    """Returns (meta header or None, records)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Required artifact not found at {path}", path=str(path))
    meta: Optional[Dict[str, Any]] = None
    records: List[Dict[str, Any]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise MobForgeError(f"{path} line {line_no} is not valid JSON: {e}", path=str(path), line=line_no)
            if line_no == 1 and isinstance(record, dict) and set(record) == {"meta"}:
                meta = record["meta"]
                continue
            records.append(record)
    return meta, records


def write_json(path: Path, document: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, ensure_ascii=False, indent=2)
        f.write("\n")
    return path


def write_csv(path: Path, frame: pd.DataFrame, meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    if meta is not None:
        record_in_manifest(path, meta)
    return path


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def record_in_manifest(path: Path, meta: Dict[str, Any]):
    """Adds or refreshes a file's entry in the manifest.json next to it."""
    manifest_path = path.parent / MANIFEST_FILE
    manifest: Dict[str, Any] = {}
    if manifest_path.exists():
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            logger.warning(f"Replacing unreadable manifest at {manifest_path}")
    entry = dict(meta)
    entry["sha256"] = file_sha256(path)
    manifest[path.name] = entry
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def save_dataset(dataset: Dataset, directory: Path, meta: Dict[str, Any]) -> List[Path]:
    directory = Path(directory)
    rows = [profile_to_row(dataset.profiles[pid]) for pid in dataset.person_ids]
    frame = pd.DataFrame(rows, columns=list(PROFILE_COLUMNS))
    written = [
        write_csv(directory / PROFILES_FILE, frame, meta),
        write_jsonl(directory / DIARIES_FILE, (d.to_dict() for d in dataset.diaries), meta),
        write_jsonl(directory / EMPTY_DAYS_FILE,
                    ({"person_id": pid, "date": date.isoformat()} for pid, date in dataset.empty_days), meta),
    ]
    logger.info(f"Saved dataset to {directory}: {len(dataset.profiles)} profiles, "
                f"{len(dataset.diaries)} diaries, {len(dataset.empty_days)} no-trip days.")
    return written


def load_dataset(directory: Path) -> Dataset:
    directory = Path(directory)
    profiles_path = directory / PROFILES_FILE
    if not profiles_path.exists():
        raise ConfigError(f"No {PROFILES_FILE} in dataset directory {directory}", path=str(directory))
    frame = pd.read_csv(profiles_path, dtype=str, keep_default_na=False)
    profiles = []
    for index, row in enumerate(frame.to_dict(orient="records")):
        try:
            profiles.append(ProfileRow.model_validate(row).to_profile())
        except ValueError as e:
            reason = describe_validation_error(e) if hasattr(e, "errors") else str(e)
            raise MobForgeError(f"{profiles_path} line {index + 2}: {reason}", path=str(profiles_path))

    _, diary_records = read_jsonl(directory / DIARIES_FILE)
    diaries = [TravelDiary.from_dict(r) for r in diary_records]
    empty_days = []
    if (directory / EMPTY_DAYS_FILE).exists():
        _, day_records = read_jsonl(directory / EMPTY_DAYS_FILE)
        empty_days = [(r["person_id"], dt.date.fromisoformat(r["date"])) for r in day_records]
    return Dataset.build(profiles, diaries, empty_days)
