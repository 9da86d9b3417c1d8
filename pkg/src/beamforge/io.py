"""CSV / JSON / GeoJSON ingestion and result serialization."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .geometry import inverse_project
from .scenario import BeamPlan, Scenario, Terminal, project_geodetic

GEODETIC_HEADER = ["id", "lat", "lon", "demand_mbps"]
PLANAR_HEADER = ["id", "x_km", "y_km", "demand_mbps"]
CIRCLE_VERTICES = 64


class IngestError(ValueError):
    pass


def read_terminals(path, demand_range=None, seed: int = 0):
    """Read a terminal CSV; frame auto-detected by header.

    Accepted headers: `id,lat,lon[,demand_mbps]` or `id,x_km,y_km[,demand_mbps]`.
    When the demand column is absent, demands are sampled from `demand_range`.
    Returns (terminals, origin) where origin is (lat0, lon0) for geodetic
    input and None for planar input.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        header = [h.strip().lower() for h in header]
        if header in (GEODETIC_HEADER, GEODETIC_HEADER[:3]):
            geodetic = True
        elif header in (PLANAR_HEADER, PLANAR_HEADER[:3]):
            geodetic = False
        else:
            raise IngestError(f"{path}: unrecognized header {header}")
        has_demand = len(header) == 4

        rows = []
        seen = set()
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise IngestError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            tid = row[0].strip()
            if tid in seen:
                raise IngestError(f"{path}:{lineno}: duplicate terminal id {tid!r}")
            seen.add(tid)
            try:
                a, b = float(row[1]), float(row[2])
                demand = float(row[3]) if has_demand else None
            except ValueError as exc:
                raise IngestError(f"{path}:{lineno}: malformed number ({exc})") from None
            rows.append((tid, a, b, demand))

    if not rows:
        raise IngestError(f"{path}: no data rows")

    if any(r[3] is None for r in rows):
        if demand_range is None:
            demand_range = (5.0, 10.0)
        rng = np.random.default_rng(seed)
        sampled = rng.uniform(demand_range[0], demand_range[1], size=len(rows))
        rows = [(tid, a, b, d if d is not None else float(s))
                for (tid, a, b, d), s in zip(rows, sampled)]

    if geodetic:
        terminals, origin = project_geodetic(
            [(a, b, d) for _, a, b, d in rows], ids=[tid for tid, *_ in rows])
        return terminals, origin
    terminals = [Terminal(id=tid, position=(a, b), demand=d) for tid, a, b, d in rows]
    return terminals, None


def ingest(path, r_max: float, c_max: float = math.inf, b_max: int = 32,
           demand_range=None, seed: int = 0, demand_weighted: bool = False) -> Scenario:
    terminals, origin = read_terminals(path, demand_range=demand_range, seed=seed)
    return Scenario(terminals=terminals, r_max=r_max, c_max=c_max, b_max=b_max,
                    origin=origin, demand_weighted=demand_weighted)


def write_terminals(scenario: Scenario, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PLANAR_HEADER)
        for t in scenario.terminals:
            writer.writerow([t.id, repr(t.position[0]), repr(t.position[1]), repr(t.demand)])


def write_plan(plan: BeamPlan, scenario: Scenario, out_dir, geojson: bool = False,
               summary_extra: dict | None = None) -> dict:
    """Emit beams.csv, assignment.csv, summary.json, and optionally plan.geojson.

    GeoJSON is only written when the scenario originated in lat/lon.
    Returns the paths written.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    beams_path = out / "beams.csv"
    with beams_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["beam_id", "x_km", "y_km", "r_km", "load_mbps", "user_count"])
        for b, center in enumerate(plan.centers):
            writer.writerow([b, repr(float(center[0])), repr(float(center[1])),
                             repr(float(scenario.r_max)),
                             repr(float(plan.per_beam_load[b])), int(plan.per_beam_count[b])])
    paths["beams"] = beams_path

    assign_path = out / "assignment.csv"
    with assign_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["terminal_id", "beam_id"])
        for t in scenario.terminals:
            writer.writerow([t.id, plan.assignment[t.id]])
    paths["assignment"] = assign_path

    if geojson and scenario.origin is not None:
        geo_path = out / "plan.geojson"
        geo_path.write_text(json.dumps(plan_geojson(plan, scenario)), encoding="utf-8")
        paths["geojson"] = geo_path

    summary = {
        "num_beams": plan.num_beams,
        "r_max_km": scenario.r_max,
        "c_max_mbps": None if math.isinf(scenario.c_max) else scenario.c_max,
        "b_max": scenario.b_max,
        "num_terminals": scenario.size,
        "total_demand_mbps": float(scenario.demands.sum()),
    }
    if summary_extra:
        summary.update(summary_extra)
    summary_path = out / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    paths["summary"] = summary_path
    return paths


def plan_geojson(plan: BeamPlan, scenario: Scenario) -> dict:
    """FeatureCollection of beam-circle polygons (64 vertices) and terminal points."""
    lat0, lon0 = scenario.origin
    features = []
    angles = np.linspace(0.0, 2.0 * math.pi, CIRCLE_VERTICES, endpoint=False)
    ring_xy = np.stack([np.cos(angles), np.sin(angles)], axis=1) * scenario.r_max
    for b, center in enumerate(plan.centers):
        ring = inverse_project(center[None, :] + ring_xy, lat0, lon0)
        coords = [[float(lon), float(lat)] for lat, lon in ring]
        coords.append(coords[0])
        features.append({
            "type": "Feature",
            "geometry": {"type": "Polygon", "coordinates": [coords]},
            "properties": {"beam_id": b, "load_mbps": float(plan.per_beam_load[b])},
        })
    for t in scenario.terminals:
        lat, lon = inverse_project(np.array(t.position), lat0, lon0)
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [float(lon), float(lat)]},
            "properties": {"terminal_id": t.id, "demand_mbps": t.demand,
                           "beam_id": plan.assignment[t.id]},
        })
    return {"type": "FeatureCollection", "features": features}


def read_assignment(path) -> dict[str, int]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip().lower() for h in header] != ["terminal_id", "beam_id"]:
            raise IngestError(f"{path}: unrecognized assignment header {header}")
        return {row[0]: int(row[1]) for row in reader if row}


def read_plan(out_dir) -> tuple[np.ndarray, dict[str, int]]:
    """Reload an emitted plan directory into (centers, assignment)."""
    out = Path(out_dir)
    centers = []
    with (out / "beams.csv").open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            centers.append([float(row[1]), float(row[2])])
    assignment = read_assignment(out / "assignment.csv")
    return np.array(centers), assignment
