# core/binning.py
"""Shared bin layouts for cohort statistics and evaluation histograms."""
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from core.models.geo import GeoPoint


@dataclass(frozen=True)
class Binning:
    sd_bins: int = 32
    sd_min_m: float = 100.0
    sd_max_m: float = 100000.0
    si_bin_min: int = 30
    dailyloc_max: int = 15
    grid_cell_m: float = 1000.0
    grid_origin: Optional[Tuple[float, float]] = None

    def distance_edges(self) -> np.ndarray:
        """Interior edges of the log-spaced distance bins (sd_bins + 1 values)."""
        return np.logspace(np.log10(self.sd_min_m), np.log10(self.sd_max_m), self.sd_bins + 1)

    @property
    def distance_bin_count(self) -> int:
        # underflow + log bins + overflow
        return self.sd_bins + 2

    @property
    def si_bin_count(self) -> int:
        return 1440 // self.si_bin_min

    @property
    def dailyloc_bin_count(self) -> int:
        return self.dailyloc_max + 2

    def distance_bin(self, distance_m: float) -> int:
        edges = self.distance_edges()
        if distance_m < edges[0]:
            return 0
        if distance_m >= edges[-1]:
            return self.sd_bins + 1
        return int(np.searchsorted(edges, distance_m, side="right"))

    def distance_bounds(self, index: int) -> Tuple[float, float]:
        edges = self.distance_edges()
        if index == 0:
            return 0.0, float(edges[0])
        if index == self.sd_bins + 1:
            return float(edges[-1]), float(edges[-1])
        return float(edges[index - 1]), float(edges[index])

    def si_bin(self, minutes: int) -> int:
        return min(int(minutes) // self.si_bin_min, self.si_bin_count - 1)

    def dailyloc_bin(self, count: int) -> int:
        return min(int(count), self.dailyloc_max + 1)

    def with_origin(self, origin: GeoPoint) -> "Binning":
        return Binning(self.sd_bins, self.sd_min_m, self.sd_max_m, self.si_bin_min,
                       self.dailyloc_max, self.grid_cell_m, (origin.lat, origin.lon))

    def descriptor(self) -> Dict[str, Any]:
        data = asdict(self)
        data["grid_origin"] = list(self.grid_origin) if self.grid_origin else None
        return data


DEFAULT_BINNING = Binning()
