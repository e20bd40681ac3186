# services/spatial_anchor_service.py
"""
Road network, POI index and the distance-matching anchor: given an origin, a
location category and a target distance, pick the POI whose shortest-path
distance from the origin is closest to the target.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd

from core.errors import (DanglingEdge, MalformedRow, NonPositiveLength, NoPoiOfCategory, NoReachablePoi,
                         PoiUnsnappable, Unsnappable, UnknownNode)
from core.models.geo import GeoPoint, GridProjection, haversine_m, haversine_many_m
from core.rng import derive_rng
from core.vocabulary import POI_CATEGORIES, LocationCategory
from event_bus import EventBus

logger = logging.getLogger(__name__)

SNAP_TIE_M = 1e-9
NODES_FILE = "nodes.csv"
EDGES_FILE = "edges.csv"
POIS_FILE = "pois.csv"


@dataclass(frozen=True)
class Poi:
    poi_id: int
    location: GeoPoint
    category: str
    node: int


@dataclass(frozen=True)
class AnchorResult:
    poi_id: Optional[int]
    location: GeoPoint
    network_distance_m: float
    origin_node: int
    node: int


class RoadNetwork:
    """Directed graph of road nodes; undirected edges are stored in both directions."""

    def __init__(self, graph: nx.DiGraph, coordinates: Dict[int, GeoPoint]):
        self.graph = graph
        self.coordinates = coordinates
        self.node_ids = np.array(sorted(coordinates), dtype=np.int64)
        self.lats = np.array([coordinates[n].lat for n in self.node_ids], dtype=float)
        self.lons = np.array([coordinates[n].lon for n in self.node_ids], dtype=float)

    @classmethod
    def build(cls, nodes: Dict[int, GeoPoint], edges: List[Tuple[int, int, float, bool]]) -> "RoadNetwork":
        graph = nx.DiGraph()
        graph.add_nodes_from(sorted(nodes))
        for u, v, length, oneway in edges:
            if u not in nodes or v not in nodes:
                raise DanglingEdge(u, v)
            if not length > 0:
                raise NonPositiveLength(u, v, length)
            directions = [(u, v)] if oneway else [(u, v), (v, u)]
            for a, b in directions:
                if graph.has_edge(a, b):
                    graph[a][b]["length"] = min(graph[a][b]["length"], float(length))
                else:
                    graph.add_edge(a, b, length=float(length))
        return cls(graph, dict(nodes))

    def __contains__(self, node_id) -> bool:
        return node_id in self.coordinates

    @property
    def node_count(self) -> int:
        return len(self.coordinates)

    def nearest(self, point: GeoPoint) -> Tuple[int, float]:
        """Nearest node by great-circle distance; near-ties go to the smallest id."""
        if not len(self.node_ids):
            raise Unsnappable(point.lat, point.lon, math.inf, 0.0)
        distances = haversine_many_m(point, self.lats, self.lons)
        best = float(distances.min())
        tied = self.node_ids[distances <= best + SNAP_TIE_M]
        return int(tied.min()), best


@dataclass
class PoiIndex:
    pois: Dict[int, Poi] = field(default_factory=dict)
    by_category: Dict[str, List[int]] = field(default_factory=dict)
    rejected: List[Dict] = field(default_factory=list)

    def add(self, poi: Poi):
        self.pois[poi.poi_id] = poi
        ids = self.by_category.setdefault(poi.category, [])
        ids.append(poi.poi_id)
        ids.sort()

    def candidates(self, category: str) -> List[int]:
        if category == LocationCategory.ANY.value:
            return sorted(self.pois)
        return self.by_category.get(category, [])


class SpatialAnchor:
    """Read-only network + POI handle with a per-origin shortest-path cache."""

    def __init__(self, network: RoadNetwork, pois: PoiIndex, snap_radius_m: float = 500.0):
        self.network = network
        self.pois = pois
        self.snap_radius_m = snap_radius_m
        self._distance_cache: Dict[int, Dict[int, float]] = {}

    def snap_with_distance(self, point: GeoPoint) -> Tuple[int, float]:
        node, distance = self.network.nearest(point)
        if distance > self.snap_radius_m:
            raise Unsnappable(point.lat, point.lon, distance, self.snap_radius_m)
        return node, distance

    def snap(self, point: GeoPoint) -> int:
        return self.snap_with_distance(point)[0]

    def shortest_dist(self, origin: int) -> Dict[int, float]:
        """Exact single-source distances; unreachable nodes are absent."""
        if origin not in self.network:
            raise UnknownNode(origin)
        cached = self._distance_cache.get(origin)
        if cached is None:
            cached = dict(nx.single_source_dijkstra_path_length(self.network.graph, origin, weight="length"))
            self._distance_cache[origin] = cached
        return cached

    def anchor(self, origin: GeoPoint, category: str, target_d: float) -> AnchorResult:
        if target_d < 0:
            raise ValueError(f"target distance must be nonnegative, got {target_d}")
        candidates = self.pois.candidates(category)
        if not candidates:
            raise NoPoiOfCategory(category)
        origin_node = self.snap(origin)
        distances = self.shortest_dist(origin_node)
        best: Optional[Tuple[float, int]] = None
        for poi_id in candidates:
            d = distances.get(self.pois.pois[poi_id].node)
            if d is None:
                continue
            rank = (abs(d - target_d), poi_id)
            if best is None or rank < best:
                best = rank
        if best is None:
            raise NoReachablePoi(category, origin_node)
        poi = self.pois.pois[best[1]]
        return AnchorResult(poi.poi_id, poi.location, distances[poi.node], origin_node, poi.node)

    def route_to(self, origin: GeoPoint, destination: GeoPoint) -> AnchorResult:
        """Network distance between the snapped nodes of two coordinates (no POI involved)."""
        origin_node = self.snap(origin)
        target_node = self.snap(destination)
        distance = self.shortest_dist(origin_node).get(target_node)
        if distance is None:
            raise NoReachablePoi(LocationCategory.RESIDENCE.value, origin_node)
        return AnchorResult(None, destination, distance, origin_node, target_node)


def build_anchor(nodes: pd.DataFrame, edges: pd.DataFrame, pois: pd.DataFrame,
                 snap_radius_m: float = 500.0, strict_pois: bool = False) -> SpatialAnchor:
    """Builds the anchor handle from node, edge and POI frames (CSV column layout)."""
    coordinates = {int(r.node_id): GeoPoint(float(r.lat), float(r.lon)) for r in nodes.itertuples(index=False)}
    oneway = edges["oneway"] if "oneway" in edges.columns else pd.Series([0] * len(edges))
    edge_list = [
        (int(r.from_node), int(r.to_node), float(r.length_m), bool(int(flag)))
        for r, flag in zip(edges.itertuples(index=False), oneway)
    ]
    network = RoadNetwork.build(coordinates, edge_list)

    index = PoiIndex()
    for line, r in enumerate(pois.itertuples(index=False), start=2):
        category = str(r.category).strip()
        if category not in POI_CATEGORIES:
            raise MalformedRow(line, f"unknown POI category '{category}', expected one of {list(POI_CATEGORIES)}",
                               source=POIS_FILE)
        location = GeoPoint(float(r.lat), float(r.lon))
        node, distance = network.nearest(location)
        if distance > snap_radius_m:
            error = PoiUnsnappable(int(r.poi_id), distance)
            if strict_pois:
                raise error
            index.rejected.append(error.to_record())
            continue
        index.add(Poi(int(r.poi_id), location, category, node))
    return SpatialAnchor(network, index, snap_radius_m)


def generate_grid_frames(rows: int, cols: int, spacing_m: float, origin: GeoPoint,
                         pois_per_category: int, seed: int) -> Tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """
    A rows x cols street grid centred on `origin`, with POIs of every category
    placed near randomly chosen nodes.
    """
    projection = GridProjection(origin, spacing_m)
    x0 = -(cols - 1) * spacing_m / 2.0
    y0 = -(rows - 1) * spacing_m / 2.0
    node_rows = []
    coordinates: Dict[int, GeoPoint] = {}
    for r in range(rows):
        for c in range(cols):
            node_id = r * cols + c
            point = projection.from_offset(x0 + c * spacing_m, y0 + r * spacing_m)
            coordinates[node_id] = point
            node_rows.append({"node_id": node_id, "lat": point.lat, "lon": point.lon})

    edge_rows = []
    for r in range(rows):
        for c in range(cols):
            u = r * cols + c
            for v in ([u + 1] if c + 1 < cols else []) + ([u + cols] if r + 1 < rows else []):
                length = round(haversine_m(coordinates[u], coordinates[v]), 3)
                edge_rows.append({"from_node": u, "to_node": v, "length_m": length, "oneway": 0})

    rng = derive_rng(seed, "grid-pois")
    poi_rows = []
    poi_id = 1
    jitter = spacing_m / 4.0
    for category in POI_CATEGORIES:
        for _ in range(pois_per_category):
            node = int(rng.integers(rows * cols))
            x, y = projection.offset_m(coordinates[node])
            point = projection.from_offset(x + rng.uniform(-jitter, jitter), y + rng.uniform(-jitter, jitter))
            poi_rows.append({"poi_id": poi_id, "lat": point.lat, "lon": point.lon, "category": category})
            poi_id += 1

    return pd.DataFrame(node_rows), pd.DataFrame(edge_rows), pd.DataFrame(poi_rows)


class SpatialAnchorService:
    """Loads or generates road networks and hands out SpatialAnchor handles."""

    def __init__(self, event_bus: EventBus, snap_radius_m: float = 500.0, strict_pois: bool = False):
        self.event_bus = event_bus
        self.snap_radius_m = snap_radius_m
        self.strict_pois = strict_pois
        logger.info("SpatialAnchorService initialized.")

    def load_network(self, nodes_source: Path, edges_source: Path, pois_source: Path) -> SpatialAnchor:
        nodes = pd.read_csv(nodes_source)
        edges = pd.read_csv(edges_source)
        pois = pd.read_csv(pois_source)
        anchor = build_anchor(nodes, edges, pois, self.snap_radius_m, self.strict_pois)
        self._report(anchor, str(nodes_source))
        return anchor

    def generate_grid_network(self, rows: int, cols: int, spacing_m: float, origin: GeoPoint,
                              pois_per_category: int, seed: int,
                              write_to: Optional[Path] = None) -> SpatialAnchor:
        nodes, edges, pois = generate_grid_frames(rows, cols, spacing_m, origin, pois_per_category, seed)
        if write_to is not None:
            write_to = Path(write_to)
            write_to.mkdir(parents=True, exist_ok=True)
            for frame, name in ((nodes, NODES_FILE), (edges, EDGES_FILE), (pois, POIS_FILE)):
                frame.to_csv(write_to / name, index=False, lineterminator="\n")
        anchor = build_anchor(nodes, edges, pois, self.snap_radius_m, self.strict_pois)
        self._report(anchor, f"{rows}x{cols} grid")
        return anchor

    def _report(self, anchor: SpatialAnchor, source: str):
        rejected = len(anchor.pois.rejected)
        self.log("warning" if rejected else "info",
                 f"Network from {source}: {anchor.network.node_count} nodes, "
                 f"{anchor.network.graph.number_of_edges()} directed edges, {len(anchor.pois.pois)} POIs"
                 + (f", {rejected} POIs rejected as unsnappable." if rejected else "."))

    def log(self, level: str, message: str):
        getattr(logger, level, logger.info)(f"[SpatialAnchorService] {message}")
        self.event_bus.emit("log_message_received", "SpatialAnchorService", level, message)
