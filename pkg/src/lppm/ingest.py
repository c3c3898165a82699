"""Check-in dataset parsing, region filtering, prior estimation, and the
synthetic tagged grid scenario.

Input files follow the SNAP check-in layout:
``user <TAB> timestamp <TAB> lat <TAB> lon <TAB> location_id``.
"""

from __future__ import annotations

import gzip
import logging
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .geo import GeoPoint, haversine_project
from .model import PoiSet, Prior

log = logging.getLogger(__name__)

#: Tag layout used for the synthetic 5x5 grid when none is supplied,
#: row-major from the north-west corner.
DEFAULT_GRID_TAGS = (
    "Home", "Shop", "Park", "Shop", "Home",
    "Shop", "Café", "Park", "Café", "Shop",
    "Park", "Park", "Home", "Park", "Park",
    "Shop", "Café", "Park", "Café", "Shop",
    "Home", "Shop", "Park", "Shop", "Home",
)


@dataclass(frozen=True)
class CheckinRecord:
    user_id: str
    lat: float
    lon: float
    location_id: str


@dataclass(frozen=True)
class Region:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def __post_init__(self):
        if self.lat_min >= self.lat_max or self.lon_min >= self.lon_max:
            raise ValueError("region bounds must satisfy min < max")

    def contains(self, lat: float, lon: float) -> bool:
        # boundary coordinates are included
        return (self.lat_min <= lat <= self.lat_max
                and self.lon_min <= lon <= self.lon_max)

    @property
    def center(self) -> GeoPoint:
        return GeoPoint(0.5 * (self.lat_min + self.lat_max),
                        0.5 * (self.lon_min + self.lon_max))


#: San Francisco study region used by the check-in experiments.
SF_REGION = Region(37.5395, 37.7910, -122.5153, -122.3789)


def parse_checkins(lines) -> tuple[list[CheckinRecord], int]:
    """Parse tab-separated check-in lines; returns (records, malformed count)."""
    records = []
    malformed = 0
    for line in lines:
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 5:
            if line.strip():
                malformed += 1
            continue
        user, _ts, lat_s, lon_s, loc = parts
        try:
            lat, lon = float(lat_s), float(lon_s)
            GeoPoint(lat, lon)
        except ValueError:
            malformed += 1
            continue
        records.append(CheckinRecord(user, lat, lon, loc))
    return records, malformed


def open_checkin_file(path):
    """Open a check-in file, transparently handling gzip compression."""
    if str(path).endswith(".gz"):
        return gzip.open(path, "rt", encoding="utf-8", errors="replace")
    return open(path, encoding="utf-8", errors="replace")


def build_poi_and_prior(
    records,
    region: Region,
    reference: GeoPoint | None = None,
    count_mode: str = "events",
) -> tuple[PoiSet, Prior]:
    """Aggregate in-region check-ins into a POI set and an empirical prior.

    ``count_mode='events'`` counts every check-in; ``'users'`` counts each
    (user, location) pair once. Distinct location ids at identical projected
    coordinates are merged with summed counts.
    """
    if count_mode not in ("events", "users"):
        raise ValueError("count_mode must be 'events' or 'users'")
    if reference is None:
        reference = region.center

    counts: Counter = Counter()
    latlon: dict[str, tuple[float, float]] = {}
    seen_users: defaultdict[str, set] = defaultdict(set)
    for rec in records:
        if not region.contains(rec.lat, rec.lon):
            continue
        if rec.location_id not in latlon:
            latlon[rec.location_id] = (rec.lat, rec.lon)
        if count_mode == "users":
            if rec.user_id in seen_users[rec.location_id]:
                continue
            seen_users[rec.location_id].add(rec.user_id)
        counts[rec.location_id] += 1
    if not counts:
        raise ValueError("no check-ins inside the region")

    by_coord: dict[tuple[float, float], int] = {}
    coords = []
    merged_counts = []
    for loc in sorted(counts):
        lat, lon = latlon[loc]
        p = haversine_project(GeoPoint(lat, lon), reference)
        key = (p[0], p[1])
        if key in by_coord:
            log.warning("location %s duplicates coordinates of an earlier POI; "
                        "merging counts", loc)
            merged_counts[by_coord[key]] += counts[loc]
        else:
            by_coord[key] = len(coords)
            coords.append(p)
            merged_counts.append(counts[loc])

    total = sum(merged_counts)
    # exact rational masses before float conversion
    pmf = np.array([float(Fraction(c, total)) for c in merged_counts])
    pmf = pmf / pmf.sum()
    poi = PoiSet(np.array(coords))
    return poi, Prior(poi, pmf)


def build_grid_scenario(
    side: int = 5, cell_km: float = 1.0, tag_map=None
) -> tuple[PoiSet, Prior]:
    """Uniform-prior tagged POIs at the centers of a side x side km grid."""
    if side < 1 or cell_km <= 0:
        raise ValueError("invalid grid geometry")
    if tag_map is None:
        if side == 5:
            tag_map = DEFAULT_GRID_TAGS
        else:
            tag_map = ("Home",) * side * side
    tag_map = tuple(tag_map)
    if len(tag_map) != side * side:
        raise ValueError(f"tag map must cover all {side * side} cells")
    xs = (np.arange(side) - (side - 1) / 2.0) * cell_km
    coords = np.array([(x, -y) for y in xs for x in xs])
    poi = PoiSet(coords, tags=tag_map)
    return poi, Prior(poi, np.full(side * side, 1.0 / (side * side)))


def write_poi_csv(poi: PoiSet, prior: Prior, path) -> None:
    """Emit ``id,x_km,y_km,tag,prior_mass`` rows."""
    with open(path, "w") as fh:
        fh.write("id,x_km,y_km,tag,prior_mass\n")
        for i in range(poi.n):
            tag = poi.tags[i] if poi.tags else ""
            fh.write(f"{i},{float(poi.coords[i, 0])!r},{float(poi.coords[i, 1])!r},"
                     f"{tag},{float(prior.pmf[i])!r}\n")


def read_poi_csv(path) -> tuple[PoiSet, Prior]:
    """Inverse of :func:`write_poi_csv`."""
    coords, tags, mass = [], [], []
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("id,"):
            raise ValueError(f"unrecognized POI file header: {header!r}")
        for line in fh:
            _i, x, y, tag, p = line.rstrip("\n").split(",")
            coords.append((float(x), float(y)))
            tags.append(tag)
            mass.append(float(p))
    has_tags = any(tags)
    poi = PoiSet(np.array(coords), tags=tuple(tags) if has_tags else None)
    pmf = np.array(mass)
    return poi, Prior(poi, pmf / pmf.sum())
