"""Topology description: sites, sectors, bands, and the cell factory.

The on-disk format is a single JSON document:

    {
      "radio": {"tx_power_dbm": 30.0, "pl0_db": 60.0, "pathloss_exponent": 3.5,
                "reference_distance_m": 1.0, "measurement_radius_m": 1500.0},
      "bands": [
        {"band": 0, "role": "coverage", "prb_capacity": 100,
         "pathloss_offset_db": 0.0,
         "power": {"p_active_w": 100.0, "p_per_prb_w": 0.5, "p_sleep_w": 10.0}},
        ...
      ],
      "sites": [
        {"site": 0, "x": 0.0, "y": 0.0,
         "sectors": [
            {"sector": 0, "azimuth_deg": 0.0,
             "bands": [{"band": 0}, {"band": 1, "prb_capacity": 200}]},
            ...
         ]},
        ...
      ]
    }

Sector band entries reference the band table and may override prb_capacity.
Exactly one band has the coverage role and every sector must carry it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .ran import Cell, CellId, CellRole, PowerModel, RadioConfig


class TopologyError(Exception):
    pass


@dataclass(frozen=True)
class BandConfig:
    band: int
    role: CellRole
    prb_capacity: int
    pathloss_offset_db: float
    power: PowerModel


@dataclass(frozen=True)
class SectorBand:
    band: int
    prb_capacity: Optional[int] = None


@dataclass(frozen=True)
class SectorConfig:
    sector: int
    azimuth_deg: float
    bands: tuple[SectorBand, ...]


@dataclass(frozen=True)
class SiteConfig:
    site: int
    x: float
    y: float
    sectors: tuple[SectorConfig, ...]


@dataclass(frozen=True)
class Topology:
    radio: RadioConfig
    bands: tuple[BandConfig, ...]
    sites: tuple[SiteConfig, ...]

    def __post_init__(self) -> None:
        self._validate()

    def _validate(self) -> None:
        band_ids = [b.band for b in self.bands]
        if len(set(band_ids)) != len(band_ids):
            raise TopologyError("duplicate band index in band table")
        coverage = [b.band for b in self.bands if b.role is CellRole.COVERAGE]
        if len(coverage) != 1:
            raise TopologyError("exactly one band must have the coverage role")
        cov_band = coverage[0]
        table = {b.band: b for b in self.bands}
        seen: set[CellId] = set()
        for site in self.sites:
            for sec in site.sectors:
                bands_here = [sb.band for sb in sec.bands]
                if cov_band not in bands_here:
                    raise TopologyError(
                        f"site {site.site} sector {sec.sector} lacks the coverage band"
                    )
                for sb in sec.bands:
                    if sb.band not in table:
                        raise TopologyError(f"unknown band {sb.band}")
                    cid = CellId(site.site, sec.sector, sb.band)
                    if cid in seen:
                        raise TopologyError(f"duplicate cell {cid.key()}")
                    seen.add(cid)
                    cap = sb.prb_capacity or table[sb.band].prb_capacity
                    if cap <= 0:
                        raise TopologyError(f"non-positive capacity on {cid.key()}")

    @property
    def coverage_band(self) -> int:
        return next(b.band for b in self.bands if b.role is CellRole.COVERAGE)

    def band_config(self, band: int) -> BandConfig:
        for b in self.bands:
            if b.band == band:
                return b
        raise TopologyError(f"unknown band {band}")

    def cell_ids(self) -> list[CellId]:
        cached = self.__dict__.get("_cell_ids")
        if cached is None:
            cached = sorted(
                CellId(site.site, sec.sector, sb.band)
                for site in self.sites
                for sec in site.sectors
                for sb in sec.bands
            )
            self.__dict__["_cell_ids"] = cached
        return cached

    def sectors(self) -> list[tuple[int, int]]:
        return sorted(
            (site.site, sec.sector) for site in self.sites for sec in site.sectors
        )

    def sector_cells(self, site: int, sector: int) -> list[CellId]:
        cached = self.__dict__.get("_sector_cells")
        if cached is None:
            cached = {}
            for c in self.cell_ids():
                cached.setdefault(c.sector_id(), []).append(c)
            self.__dict__["_sector_cells"] = cached
        return cached[(site, sector)]

    def coverage_cell(self, site: int, sector: int) -> CellId:
        return CellId(site, sector, self.coverage_band)

    def capacity_cells(self, site: int, sector: int) -> list[CellId]:
        """Capacity carriers of a sector, highest band first (the sleep order)."""
        cov = self.coverage_band
        cells = [c for c in self.sector_cells(site, sector) if c.band != cov]
        cells.sort(key=lambda c: -c.band)
        return cells

    def build_cells(self) -> dict[CellId, Cell]:
        table = {b.band: b for b in self.bands}
        cells: dict[CellId, Cell] = {}
        for site in self.sites:
            for sec in site.sectors:
                for sb in sec.bands:
                    band = table[sb.band]
                    cid = CellId(site.site, sec.sector, sb.band)
                    cells[cid] = Cell(
                        id=cid,
                        cgi=f"cgi-{cid.key()}",
                        pci=(site.site * 3 + sec.sector + sb.band * 64) % 1008,
                        role=band.role,
                        x=site.x,
                        y=site.y,
                        azimuth_deg=sec.azimuth_deg,
                        prb_capacity=sb.prb_capacity or band.prb_capacity,
                        pathloss_offset_db=band.pathloss_offset_db,
                        power=band.power,
                        ces_switch=band.role is CellRole.CAPACITY,
                    )
        return {cid: cells[cid] for cid in sorted(cells)}

    def to_dict(self) -> dict:
        return {
            "radio": {
                "tx_power_dbm": self.radio.tx_power_dbm,
                "pl0_db": self.radio.pl0_db,
                "pathloss_exponent": self.radio.pathloss_exponent,
                "reference_distance_m": self.radio.reference_distance_m,
                "measurement_radius_m": self.radio.measurement_radius_m,
            },
            "bands": [
                {
                    "band": b.band,
                    "role": b.role.value,
                    "prb_capacity": b.prb_capacity,
                    "pathloss_offset_db": b.pathloss_offset_db,
                    "power": {
                        "p_active_w": b.power.p_active_w,
                        "p_per_prb_w": b.power.p_per_prb_w,
                        "p_sleep_w": b.power.p_sleep_w,
                    },
                }
                for b in self.bands
            ],
            "sites": [
                {
                    "site": s.site,
                    "x": s.x,
                    "y": s.y,
                    "sectors": [
                        {
                            "sector": sec.sector,
                            "azimuth_deg": sec.azimuth_deg,
                            "bands": [
                                {"band": sb.band}
                                if sb.prb_capacity is None
                                else {"band": sb.band, "prb_capacity": sb.prb_capacity}
                                for sb in sec.bands
                            ],
                        }
                        for sec in s.sectors
                    ],
                }
                for s in self.sites
            ],
        }


def topology_from_dict(doc: dict) -> Topology:
    try:
        radio = RadioConfig(**doc.get("radio", {}))
        bands = tuple(
            BandConfig(
                band=int(b["band"]),
                role=CellRole(b["role"]),
                prb_capacity=int(b["prb_capacity"]),
                pathloss_offset_db=float(b.get("pathloss_offset_db", 0.0)),
                power=PowerModel(**b["power"]),
            )
            for b in doc["bands"]
        )
        sites = tuple(
            SiteConfig(
                site=int(s["site"]),
                x=float(s["x"]),
                y=float(s["y"]),
                sectors=tuple(
                    SectorConfig(
                        sector=int(sec["sector"]),
                        azimuth_deg=float(sec.get("azimuth_deg", 0.0)),
                        bands=tuple(
                            SectorBand(
                                band=int(sb["band"]),
                                prb_capacity=(
                                    int(sb["prb_capacity"])
                                    if "prb_capacity" in sb
                                    else None
                                ),
                            )
                            for sb in sec["bands"]
                        ),
                    )
                    for sec in s["sectors"]
                ),
            )
            for s in doc["sites"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise TopologyError(f"malformed topology document: {exc}") from exc
    return Topology(radio=radio, bands=bands, sites=sites)


def load_topology(path: str | Path) -> Topology:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise TopologyError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise TopologyError(f"{path} is not valid JSON: {exc}") from exc
    return topology_from_dict(doc)


def save_topology(topology: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology.to_dict(), indent=2) + "\n")


DEFAULT_POWER = PowerModel(p_active_w=100.0, p_per_prb_w=0.5, p_sleep_w=10.0)


def generate_topology(
    sites: int,
    sectors: int,
    bands: int,
    *,
    prb_capacity: int = 100,
    site_spacing_m: float = 3000.0,
    power: PowerModel = DEFAULT_POWER,
) -> Topology:
    """Build a synthetic multi-carrier deployment.

    Sectors spread over sites as evenly as possible (the remainder sites get
    one extra). Band 0 is the coverage layer; higher bands are capacity
    carriers with progressively weaker propagation. Sites sit on a square
    grid spaced so that default measurement radii do not overlap sites.
    """
    if sites < 1 or bands < 1 or sectors < sites:
        raise TopologyError("need at least one band and one sector per site")
    base, rem = divmod(sectors, sites)
    per_site = [base + 1 if i < rem else base for i in range(sites)]
    cols = math.ceil(math.sqrt(sites))

    band_cfgs = tuple(
        BandConfig(
            band=b,
            role=CellRole.COVERAGE if b == 0 else CellRole.CAPACITY,
            prb_capacity=prb_capacity,
            pathloss_offset_db=0.0 if b == 0 else 3.0 + 3.0 * b,
            power=power,
        )
        for b in range(bands)
    )
    site_cfgs = []
    for i in range(sites):
        n = per_site[i]
        site_cfgs.append(
            SiteConfig(
                site=i,
                x=(i % cols) * site_spacing_m,
                y=(i // cols) * site_spacing_m,
                sectors=tuple(
                    SectorConfig(
                        sector=s,
                        azimuth_deg=360.0 * s / n,
                        bands=tuple(SectorBand(band=b) for b in range(bands)),
                    )
                    for s in range(n)
                ),
            )
        )
    return Topology(radio=RadioConfig(), bands=band_cfgs, sites=tuple(site_cfgs))
