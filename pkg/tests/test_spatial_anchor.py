# tests/test_spatial_anchor.py
import math

import numpy as np
import pandas as pd
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra, floyd_warshall

from conftest import CENTRE
from core.errors import (DanglingEdge, MalformedRow, NonPositiveLength, NoPoiOfCategory, NoReachablePoi,
                         PoiUnsnappable, Unsnappable, UnknownNode)
from core.models.geo import GeoPoint, destination_point, haversine_m
from core.vocabulary import POI_CATEGORIES
from services.spatial_anchor_service import (EDGES_FILE, NODES_FILE, POIS_FILE, Poi, PoiIndex, RoadNetwork,
                                             SpatialAnchor, SpatialAnchorService, build_anchor)


def dense_lengths(node_count: int, edges) -> np.ndarray:
    matrix = np.full((node_count, node_count), np.inf)
    for u, v, length, oneway in edges:
        matrix[u, v] = min(matrix[u, v], length)
        if not oneway:
            matrix[v, u] = min(matrix[v, u], length)
    return matrix


def test_shortest_distances_match_floyd_warshall_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        n = int(rng.integers(2, 12))
        nodes = {i: GeoPoint(22.5 + rng.uniform(0, 0.05), 114.0 + rng.uniform(0, 0.05)) for i in range(n)}
        edges = []
        for _ in range(int(rng.integers(0, 3 * n))):
            u, v = (int(x) for x in rng.integers(0, n, size=2))
            if u == v:
                continue
            edges.append((u, v, float(rng.uniform(1.0, 500.0)), bool(rng.random() < 0.4)))
        anchor = SpatialAnchor(RoadNetwork.build(nodes, edges), PoiIndex())
        oracle = floyd_warshall(dense_lengths(n, edges), directed=True)

        for origin in range(n):
            found = anchor.shortest_dist(origin)
            for target in range(n):
                expected = oracle[origin, target]
                if math.isinf(expected):
                    assert target not in found
                else:
                    assert found[target] == pytest.approx(expected, rel=1e-9, abs=1e-9)


@pytest.mark.slow
def test_integer_lengths_match_floyd_warshall_exactly():
    rng = np.random.default_rng(40)
    for _ in range(200):
        n = int(rng.integers(2, 41))
        density = rng.uniform(0.1, 0.5)
        nodes = {i: GeoPoint(22.5 + rng.uniform(0, 0.05), 114.0 + rng.uniform(0, 0.05)) for i in range(n)}
        edges = [(u, v, float(rng.integers(1, 1001)), True)
                 for u in range(n) for v in range(n) if u != v and rng.random() < density]
        anchor = SpatialAnchor(RoadNetwork.build(nodes, edges), PoiIndex())
        oracle = floyd_warshall(dense_lengths(n, edges), directed=True)

        for origin in range(n):
            found = anchor.shortest_dist(origin)
            reachable = {t: oracle[origin, t] for t in range(n) if not math.isinf(oracle[origin, t])}
            assert found == reachable


def grid_matrix(anchor: SpatialAnchor) -> csr_matrix:
    n = anchor.network.node_count
    rows, cols, data = [], [], []
    for u, v, attrs in anchor.network.graph.edges(data=True):
        rows.append(u)
        cols.append(v)
        data.append(attrs["length"])
    return csr_matrix((data, (rows, cols)), shape=(n, n))


def check_anchor_queries(anchor: SpatialAnchor, rng: np.random.Generator, queries: int, reach_m: float = 1200.0):
    """Compares anchor() against exhaustive search over every POI of the category."""
    distances = dijkstra(grid_matrix(anchor), directed=True)
    coordinates = anchor.network.coordinates
    for _ in range(queries):
        origin = destination_point(CENTRE, rng.uniform(0, 2 * math.pi), rng.uniform(0, reach_m))
        category = POI_CATEGORIES[int(rng.integers(len(POI_CATEGORIES)))]
        target = float(rng.uniform(0, 3000))

        result = anchor.anchor(origin, category, target)

        origin_node = min(coordinates, key=lambda n: (haversine_m(origin, coordinates[n]), n))
        assert result.origin_node == origin_node

        deviations = sorted(
            (abs(distances[origin_node, poi.node] - target), poi.poi_id)
            for poi in anchor.pois.pois.values() if poi.category == category
        )
        chosen = abs(distances[origin_node, result.node] - target)
        assert chosen <= deviations[0][0] + 1e-6
        if len(deviations) == 1 or deviations[1][0] > deviations[0][0] + 1e-6:
            assert result.poi_id == deviations[0][1]
        assert result.network_distance_m == pytest.approx(distances[origin_node, result.node])


def test_anchor_matches_exhaustive_search(grid_anchor):
    check_anchor_queries(grid_anchor, np.random.default_rng(5), 60)


@pytest.mark.slow
def test_anchor_matches_exhaustive_search_on_fifty_grids(event_bus):
    service = SpatialAnchorService(event_bus, snap_radius_m=500.0)
    rng = np.random.default_rng(50)
    for seed in range(50):
        rows, cols = (int(x) for x in rng.integers(4, 13, size=2))
        anchor = service.generate_grid_network(rows, cols, 250.0, CENTRE, int(rng.integers(1, 9)), seed)
        check_anchor_queries(anchor, rng, 40, reach_m=250.0 * min(rows, cols) / 2)


def test_anchor_ties_go_to_the_smallest_poi_id():
    nodes = {0: CENTRE, 1: destination_point(CENTRE, 0.0, 100.0), 2: destination_point(CENTRE, math.pi, 100.0)}
    network = RoadNetwork.build(nodes, [(0, 1, 100.0, False), (0, 2, 100.0, False)])
    pois = PoiIndex()
    pois.add(Poi(9, nodes[1], "shop", 1))
    pois.add(Poi(4, nodes[2], "shop", 2))
    anchor = SpatialAnchor(network, pois)
    assert anchor.anchor(CENTRE, "shop", 100.0).poi_id == 4
    assert anchor.anchor(CENTRE, "any", 100.0).poi_id == 4


def test_snap_picks_the_nearest_node(grid_anchor):
    coordinates = grid_anchor.network.coordinates
    for bearing, distance in ((0.3, 40.0), (2.0, 110.0), (4.5, 260.0)):
        point = destination_point(CENTRE, bearing, distance)
        expected = min(coordinates, key=lambda n: (haversine_m(point, coordinates[n]), n))
        assert grid_anchor.snap(point) == expected
    corner = coordinates[0]
    assert grid_anchor.snap(corner) == 0


def test_anchor_errors(grid_anchor):
    with pytest.raises(NoPoiOfCategory):
        SpatialAnchor(grid_anchor.network, PoiIndex()).anchor(CENTRE, "shop", 500.0)
    with pytest.raises(Unsnappable):
        grid_anchor.anchor(GeoPoint(23.5, 115.0), "shop", 500.0)
    with pytest.raises(ValueError):
        grid_anchor.anchor(CENTRE, "shop", -1.0)
    with pytest.raises(UnknownNode):
        grid_anchor.shortest_dist(10_000)


def test_unreachable_pois():
    nodes = {0: CENTRE, 1: destination_point(CENTRE, 0.0, 200.0)}
    network = RoadNetwork.build(nodes, [(1, 0, 200.0, True)])
    pois = PoiIndex()
    pois.add(Poi(1, nodes[1], "hospital", 1))
    with pytest.raises(NoReachablePoi):
        SpatialAnchor(network, pois).anchor(CENTRE, "hospital", 200.0)


def test_network_construction_errors():
    nodes = {0: CENTRE, 1: destination_point(CENTRE, 0.0, 100.0)}
    with pytest.raises(DanglingEdge):
        RoadNetwork.build(nodes, [(0, 7, 10.0, False)])
    with pytest.raises(NonPositiveLength):
        RoadNetwork.build(nodes, [(0, 1, 0.0, False)])


def test_poi_snapping_policy():
    nodes = pd.DataFrame([{"node_id": 0, "lat": CENTRE.lat, "lon": CENTRE.lon}])
    edges = pd.DataFrame(columns=["from_node", "to_node", "length_m", "oneway"])
    far = destination_point(CENTRE, 0.0, 2000.0)
    pois = pd.DataFrame([{"poi_id": 1, "lat": CENTRE.lat, "lon": CENTRE.lon, "category": "shop"},
                         {"poi_id": 2, "lat": far.lat, "lon": far.lon, "category": "shop"}])

    lenient = build_anchor(nodes, edges, pois, snap_radius_m=500.0)
    assert sorted(lenient.pois.pois) == [1]
    assert lenient.pois.rejected[0]["error"] == "poi_unsnappable"
    with pytest.raises(PoiUnsnappable):
        build_anchor(nodes, edges, pois, snap_radius_m=500.0, strict_pois=True)

    pois.loc[0, "category"] = "stadium"
    with pytest.raises(MalformedRow):
        build_anchor(nodes, edges, pois)


def test_generated_grid_round_trips_through_csv(tmp_path, event_bus):
    service = SpatialAnchorService(event_bus)
    generated = service.generate_grid_network(6, 5, 200.0, CENTRE, pois_per_category=2, seed=1,
                                              write_to=tmp_path)
    loaded = service.load_network(tmp_path / NODES_FILE, tmp_path / EDGES_FILE, tmp_path / POIS_FILE)

    assert loaded.network.node_count == 30
    # 6 rows of 4 horizontal edges, 5 columns of 5 vertical ones, stored both ways
    assert loaded.network.graph.number_of_edges() == 2 * (6 * 4 + 5 * 5)
    assert sorted(loaded.pois.pois) == sorted(generated.pois.pois)
    origin = destination_point(CENTRE, 1.0, 150.0)
    assert loaded.anchor(origin, "school", 400.0).poi_id == generated.anchor(origin, "school", 400.0).poi_id
