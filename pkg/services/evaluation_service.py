# services/evaluation_service.py
"""
Real-versus-generated comparison: the four mobility distributions, their
Jensen-Shannon divergences, attribute-slice reports, window destination
counts and the CSV data behind distribution plots.
"""
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from core.binning import Binning
from core.divergence import jsd_counts
from core.errors import BinningMismatch, EmptyDistribution, UnknownDimension
from core.managers.config_manager import EvaluationConfig
from core.models.cohort import HOURS, CohortTree, key_label
from core.models.dataset import Dataset
from core.models.geo import GeoPoint, GridProjection, format_cell, haversine_m
from core.models.pattern import MobilityPattern
from core.storage import write_csv, write_json
from core.vocabulary import DIMENSION_ABBREVIATIONS, PROFILE_DIMENSIONS
from event_bus import EventBus
from services.cohort_service import partition

logger = logging.getLogger(__name__)

METRICS = ("SD", "SI", "STLOC", "DAILYLOC")
REPORT_FIELDS = {"SD": "jsd_sd", "SI": "jsd_si", "STLOC": "jsd_stloc", "DAILYLOC": "jsd_dailyloc"}
KINDS = {"SD": "log-distance", "SI": "interval", "STLOC": "categorical-OD", "DAILYLOC": "integer-count"}
REPORT_FILE = "evaluation_report.json"
WINDOWS_FILE = "window_destinations.csv"
PLOTS_DIR = "plots"

StlocKey = Tuple[Tuple[int, int], Tuple[int, int], int]


@dataclass
class Histogram:
    metric: str
    descriptor: Dict[str, Any]
    counts: Union[np.ndarray, Counter]

    @property
    def kind(self) -> str:
        return KINDS[self.metric]

    @property
    def total(self) -> int:
        if isinstance(self.counts, Counter):
            return int(sum(self.counts.values()))
        return int(self.counts.sum())


@dataclass
class EvalReport:
    scores: Dict[str, Optional[float]]
    sample_sizes: Dict[str, Dict[str, int]]
    binning: Dict[str, Any]
    day_filter: str = "all"
    errors: Dict[str, str] = field(default_factory=dict)
    slices: Dict[str, Dict[str, Any]] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        data = {REPORT_FIELDS[m]: self.scores.get(m) for m in METRICS}
        data.update({
            "day_filter": self.day_filter,
            "sample_sizes": self.sample_sizes,
            "binning": self.binning,
            "errors": self.errors,
        })
        if self.slices:
            data["slices"] = self.slices
        return data


def dataset_centroid(dataset: Dataset) -> Optional[GeoPoint]:
    lats = [p.location.lat for d in dataset.diaries for p in d.points]
    lons = [p.location.lon for d in dataset.diaries for p in d.points]
    if not lats:
        return None
    return GeoPoint(float(np.mean(lats)), float(np.mean(lons)))


def subset_label(dims: Sequence[str]) -> str:
    """'A+I+O' style label, dimensions in abbreviation-table order."""
    for dim in dims:
        if dim not in PROFILE_DIMENSIONS:
            raise UnknownDimension(dim)
    order = list(DIMENSION_ABBREVIATIONS)
    return "+".join(DIMENSION_ABBREVIATIONS[d] for d in sorted(dims, key=order.index))


def safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9=._-]+", "_", label)


def metric_histogram(dataset: Dataset, metric: str, binning: Binning, day_filter: str = "all") -> Histogram:
    if metric not in METRICS:
        raise ValueError(f"unknown metric '{metric}', expected one of {METRICS}")
    data = dataset.filter_days(day_filter)
    if metric in ("STLOC", "DAILYLOC") and binning.grid_origin is None:
        centroid = dataset_centroid(data)
        binning = binning.with_origin(centroid) if centroid else binning
    descriptor = {"kind": KINDS[metric], **binning.descriptor()}

    if metric == "SD":
        counts = np.zeros(binning.distance_bin_count, dtype=np.int64)
        for diary in data.diaries:
            for a, b in zip(diary.points, diary.points[1:]):
                counts[binning.distance_bin(haversine_m(a.location, b.location))] += 1
        return Histogram(metric, descriptor, counts)

    if metric == "SI":
        counts = np.zeros(binning.si_bin_count, dtype=np.int64)
        for diary in data.diaries:
            for a, b in zip(diary.points, diary.points[1:]):
                counts[binning.si_bin(b.arrive_time - a.arrive_time)] += 1
        return Histogram(metric, descriptor, counts)

    if binning.grid_origin is None:
        # No located points at all.
        if metric == "STLOC":
            return Histogram(metric, descriptor, Counter())
        counts = np.zeros(binning.dailyloc_bin_count, dtype=np.int64)
        counts[0] += len(data.diaries) + len(data.empty_days)
        return Histogram(metric, descriptor, counts)

    grid = GridProjection(GeoPoint(*binning.grid_origin), binning.grid_cell_m)
    if metric == "STLOC":
        keys: Counter = Counter()
        for diary in data.diaries:
            for origin, point in zip(diary.leg_origins(), diary.points):
                if origin is None:
                    continue
                hour = min(HOURS - 1, max(0, point.depart_time) // 60)
                keys[(grid.cell(origin), grid.cell(point.location), hour)] += 1
        return Histogram(metric, descriptor, keys)

    counts = np.zeros(binning.dailyloc_bin_count, dtype=np.int64)
    for diary in data.diaries:
        counts[binning.dailyloc_bin(len({grid.cell(p.location) for p in diary.points}))] += 1
    counts[0] += len(data.empty_days)
    return Histogram(metric, descriptor, counts)


def jsd(p: Histogram, q: Histogram) -> float:
    if p.descriptor != q.descriptor:
        raise BinningMismatch("Histograms were built with different binnings",
                              left=p.descriptor, right=q.descriptor)
    if isinstance(p.counts, Counter) or isinstance(q.counts, Counter):
        support = sorted(set(p.counts) | set(q.counts))
        return jsd_counts([p.counts.get(k, 0) for k in support], [q.counts.get(k, 0) for k in support])
    return jsd_counts(p.counts, q.counts)


def shared_binning(real: Dataset, binning: Binning, generated: Optional[Dataset] = None) -> Binning:
    """Grid cells are laid out around the real data's centroid for both sides."""
    if binning.grid_origin is not None:
        return binning
    centroid = dataset_centroid(real)
    if centroid is None and generated is not None:
        centroid = dataset_centroid(generated)
    return binning.with_origin(centroid) if centroid else binning


def sample_sizes(dataset: Dataset) -> Dict[str, int]:
    return {
        "persons": len(dataset.profiles),
        "diaries": len(dataset.diaries),
        "no_trip_days": len(dataset.empty_days),
        "trips": dataset.trip_count,
    }


def evaluate(real: Dataset, generated: Dataset, binning: Binning, day_filter: str = "all") -> EvalReport:
    binning = shared_binning(real, binning, generated)
    scores: Dict[str, Optional[float]] = {}
    errors: Dict[str, str] = {}
    for metric in METRICS:
        try:
            scores[metric] = jsd(metric_histogram(real, metric, binning, day_filter),
                                 metric_histogram(generated, metric, binning, day_filter))
        except EmptyDistribution as e:
            scores[metric] = None
            errors[metric] = e.message
    return EvalReport(
        scores=scores,
        sample_sizes={"real": sample_sizes(real.filter_days(day_filter)),
                      "generated": sample_sizes(generated.filter_days(day_filter))},
        binning=binning.descriptor(),
        day_filter=day_filter,
        errors=errors,
    )


def multiscale_evaluate(real: Dataset, generated: Dataset, attribute_subsets: Sequence[Sequence[str]],
                        binning: Binning, day_filter: str = "all") -> EvalReport:
    """Overall report plus one sub-report per attribute subset, keyed by its A/I/O label."""
    binning = shared_binning(real, binning, generated)
    report = evaluate(real, generated, binning, day_filter)
    for dims in attribute_subsets:
        label = subset_label(dims)
        ordered = sorted(dims, key=list(DIMENSION_ABBREVIATIONS).index)
        real_slices = {key_label(key): ids for key, ids in partition(real, ordered)}
        generated_slices = {key_label(key): ids for key, ids in partition(generated, ordered)}

        uncovered = [{"slice": s, "missing_from": "generated"} for s in real_slices if s not in generated_slices]
        uncovered += [{"slice": s, "missing_from": "real"} for s in generated_slices if s not in real_slices]

        per_slice: Dict[str, Dict[str, Optional[float]]] = {}
        sums = {m: 0.0 for m in METRICS}
        weights = {m: 0 for m in METRICS}
        for name, real_ids in real_slices.items():
            generated_ids = generated_slices.get(name)
            if generated_ids is None:
                continue
            sub = evaluate(real.subset(real_ids), generated.subset(generated_ids), binning, day_filter)
            per_slice[name] = {REPORT_FIELDS[m]: sub.scores[m] for m in METRICS}
            per_slice[name]["members"] = len(real_ids)
            for metric in METRICS:
                if sub.scores[metric] is not None:
                    sums[metric] += sub.scores[metric] * len(real_ids)
                    weights[metric] += len(real_ids)

        report.slices[label] = {
            "dimensions": ordered,
            "weighted": {REPORT_FIELDS[m]: (sums[m] / weights[m] if weights[m] else None) for m in METRICS},
            "slices": per_slice,
            "uncovered_slices": uncovered,
        }
    return report


def window_destinations(dataset: Dataset, window_start: int, window_end: int, day_filter: str,
                        binning: Binning) -> pd.DataFrame:
    """Destination counts for legs arriving in [window_start, window_end], by purpose, category and grid cell."""
    data = dataset.filter_days(day_filter)
    grid = GridProjection(GeoPoint(*binning.grid_origin), binning.grid_cell_m) if binning.grid_origin else None
    counts: Counter = Counter()
    for diary in data.diaries:
        for point in diary.points:
            if not window_start <= point.arrive_time <= window_end:
                continue
            counts[("purpose", point.purpose)] += 1
            if point.category:
                counts[("category", point.category)] += 1
            if grid is not None:
                counts[("cell", format_cell(grid.cell(point.location)))] += 1
    rows = [{"by": by, "value": value, "count": n} for (by, value), n in sorted(counts.items())]
    return pd.DataFrame(rows, columns=["by", "value", "count"])


def plot_frame(real: Histogram, generated: Histogram, binning: Binning) -> pd.DataFrame:
    """Side-by-side counts for redrawing one metric's distributions."""
    if real.metric == "STLOC":
        support = sorted(set(real.counts) | set(generated.counts))
        rows = [{"origin_cell": format_cell(o), "destination_cell": format_cell(d), "hour": h,
                 "count_real": real.counts.get((o, d, h), 0), "count_generated": generated.counts.get((o, d, h), 0)}
                for o, d, h in support]
        return pd.DataFrame(rows, columns=["origin_cell", "destination_cell", "hour", "count_real", "count_generated"])

    rows = []
    for index in range(len(real.counts)):
        if real.metric == "SD":
            low, high = binning.distance_bounds(index)
            if index == binning.sd_bins + 1:
                high = float("inf")
        elif real.metric == "SI":
            low, high = index * binning.si_bin_min, (index + 1) * binning.si_bin_min
        else:
            low, high = index, (index + 1 if index <= binning.dailyloc_max else float("inf"))
        rows.append({"bin_low": low, "bin_high": high, "count_real": int(real.counts[index]),
                     "count_generated": int(generated.counts[index])})
    return pd.DataFrame(rows, columns=["bin_low", "bin_high", "count_real", "count_generated"])


class EvaluationService:
    """Runs the configured comparisons and writes the report and plot data."""

    def __init__(self, event_bus: EventBus, config: EvaluationConfig):
        self.event_bus = event_bus
        self.config = config
        self.binning = config.binning()
        logger.info("EvaluationService initialized.")

    def write_plot_data(self, real: Dataset, generated: Dataset, binning: Binning, directory: Path,
                        day_filter: str, meta: dict) -> List[Path]:
        written = []
        for metric in METRICS:
            frame = plot_frame(metric_histogram(real, metric, binning, day_filter),
                               metric_histogram(generated, metric, binning, day_filter), binning)
            written.append(write_csv(Path(directory) / f"{metric.lower()}.csv", frame, meta))
        return written

    def run(self, real: Dataset, generated: Dataset, out_dir: Path, meta: dict) -> List[Path]:
        out_dir = Path(out_dir)
        binning = shared_binning(real, self.binning, generated)
        artifacts: List[Path] = []
        reports: Dict[str, Any] = {}
        for day_filter in self.config.day_filters:
            report = multiscale_evaluate(real, generated, self.config.subsets, binning, day_filter)
            reports[day_filter] = report.to_dict()
            summary = ", ".join(f"{m} {report.scores[m]:.4f}" if report.scores[m] is not None else f"{m} n/a"
                                for m in METRICS)
            self.log("warning" if report.errors else "info", f"[{day_filter}] {summary}")

            plots = out_dir / PLOTS_DIR / day_filter
            if self.config.write_plots:
                artifacts += self.write_plot_data(real, generated, binning, plots / "overall", day_filter, meta)
            if self.config.write_slice_plots:
                for dims in self.config.subsets:
                    ordered = sorted(dims, key=list(DIMENSION_ABBREVIATIONS).index)
                    generated_slices = {key_label(k): ids for k, ids in partition(generated, ordered)}
                    for key, real_ids in partition(real, ordered):
                        name = key_label(key)
                        if name not in generated_slices:
                            continue
                        directory = plots / subset_label(dims) / safe_name(name)
                        artifacts += self.write_plot_data(real.subset(real_ids),
                                                          generated.subset(generated_slices[name]),
                                                          binning, directory, day_filter, meta)

        if self.config.windows:
            frames = []
            for start, end in self.config.windows:
                for day_filter in self.config.day_filters:
                    for side, dataset in (("real", real), ("generated", generated)):
                        frame = window_destinations(dataset, start, end, day_filter, binning)
                        frame.insert(0, "dataset", side)
                        frame.insert(0, "day_filter", day_filter)
                        frame.insert(0, "window", f"{start}-{end}")
                        frames.append(frame)
            artifacts.append(write_csv(out_dir / WINDOWS_FILE, pd.concat(frames, ignore_index=True), meta))

        document = {"meta": meta, "reports": reports}
        artifacts.append(write_json(out_dir / REPORT_FILE, document))
        return artifacts

    def render_report(self, source: Dataset, generated: Optional[Dataset], tree: Optional[CohortTree],
                      patterns: Optional[Sequence[MobilityPattern]], evaluation: Optional[Dict[str, Any]],
                      meta: dict) -> str:
        """Plain-text summary of whatever artifacts a run has produced so far."""
        lines = [f"mobforge run {str(meta.get('config_hash', ''))[:12]} seed {meta.get('run_seed')}", ""]
        for name, dataset in (("source", source), ("generated", generated)):
            if dataset is None:
                lines.append(f"{name}: not produced")
                continue
            lines.append(f"{name}: {len(dataset.profiles)} persons, {len(dataset.diaries)} diaries, "
                         f"{len(dataset.empty_days)} empty days, {dataset.trip_count} trips")
        if tree is not None:
            leaves = tree.leaves()
            lines += ["", f"cohort tree: {len(tree.nodes)} nodes, {len(leaves)} leaves"]
            lines += [f"  {leaf.label or 'ALL'} ({len(leaf.members)} members)" for leaf in leaves]
        if patterns:
            lines += ["", f"patterns: {len(patterns)}"]
            for pattern in patterns:
                scores = ", ".join(f"{k} {v:.2f}" for k, v in (pattern.eval_scores or {}).items())
                lines.append(f"  {pattern.label or 'ALL'}: revision {pattern.revision}"
                             + (f"; {scores}" if scores else ""))
        for day_filter, report in ((evaluation or {}).get("reports") or {}).items():
            lines += ["", f"evaluation [{day_filter}]"]
            for metric in METRICS:
                value = report.get(REPORT_FIELDS[metric])
                lines.append(f"  {REPORT_FIELDS[metric]}: " + (f"{value:.4f}" if value is not None else "n/a"))
            for label, block in (report.get("slices") or {}).items():
                means = ", ".join(f"{k} {v:.4f}" for k, v in block["weighted"].items() if v is not None)
                lines.append(f"  slices {label}: {means or 'n/a'} ({len(block['uncovered_slices'])} uncovered)")
        return "\n".join(lines) + "\n"

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[EvaluationService] {message}")
        self.event_bus.emit("log_message_received", "EvaluationService", level, message)


__all__ = ["EvaluationService", "EvalReport", "Histogram", "METRICS", "evaluate", "jsd", "metric_histogram",
           "multiscale_evaluate", "window_destinations"]
