import json

import pytest

from ricloop.ran import CellId, CellRole, PowerModel, RadioConfig
from ricloop.topology import (
    BandConfig,
    SectorBand,
    SectorConfig,
    SiteConfig,
    Topology,
    TopologyError,
    generate_topology,
    load_topology,
    save_topology,
    topology_from_dict,
)


def test_generated_shape():
    topo = generate_topology(13, 41, 5)
    assert len(topo.sectors()) == 41
    cells = topo.cell_ids()
    assert len(cells) == 205
    coverage = [c for c in cells if c.band == 0]
    assert len(coverage) == 41
    per_site = {}
    for site, sector in topo.sectors():
        per_site[site] = per_site.get(site, 0) + 1
    assert sorted(per_site.values(), reverse=True) == [4, 4] + [3] * 11


def test_pci_formula_and_cgi():
    topo = generate_topology(2, 2, 2)
    cells = topo.build_cells()
    cell = cells[CellId(1, 0, 1)]
    assert cell.pci == (1 * 3 + 0 + 1 * 64) % 1008
    assert cell.cgi == "cgi-1-0-1"


def test_coverage_role_never_sleeps():
    topo = generate_topology(2, 2, 3)
    for cell in topo.build_cells().values():
        if cell.role is CellRole.COVERAGE:
            assert not cell.ces_switch
        else:
            assert cell.ces_switch


def test_capacity_cells_sleep_order_highest_band_first():
    topo = generate_topology(1, 1, 4)
    order = topo.capacity_cells(0, 0)
    assert [c.band for c in order] == [3, 2, 1]


def test_round_trip(tmp_path):
    topo = generate_topology(3, 7, 2)
    path = tmp_path / "topo.json"
    save_topology(topo, path)
    loaded = load_topology(path)
    assert loaded == topo


def test_golden_fixture_loads(fixtures_dir):
    topo = load_topology(fixtures_dir / "s1_topology.json")
    cells = topo.build_cells()
    assert len(cells) == 5
    assert cells[CellId(0, 0, 0)].prb_capacity == 4
    assert cells[CellId(1, 0, 1)].prb_capacity == 200
    assert cells[CellId(0, 0, 1)].prb_capacity == 100


def _band(band, role=CellRole.CAPACITY, **kw):
    return BandConfig(
        band=band,
        role=role,
        prb_capacity=kw.get("prb_capacity", 100),
        pathloss_offset_db=kw.get("offset", 0.0),
        power=PowerModel(100.0, 0.5, 10.0),
    )


def test_requires_exactly_one_coverage_band():
    with pytest.raises(TopologyError):
        Topology(
            radio=RadioConfig(),
            bands=(_band(0), _band(1)),
            sites=(
                SiteConfig(0, 0.0, 0.0, (SectorConfig(0, 0.0, (SectorBand(0),)),)),
            ),
        )


def test_sector_must_carry_coverage_band():
    with pytest.raises(TopologyError):
        Topology(
            radio=RadioConfig(),
            bands=(_band(0, role=CellRole.COVERAGE), _band(1)),
            sites=(
                SiteConfig(0, 0.0, 0.0, (SectorConfig(0, 0.0, (SectorBand(1),)),)),
            ),
        )


def test_duplicate_cell_rejected():
    with pytest.raises(TopologyError):
        Topology(
            radio=RadioConfig(),
            bands=(_band(0, role=CellRole.COVERAGE),),
            sites=(
                SiteConfig(
                    0,
                    0.0,
                    0.0,
                    (SectorConfig(0, 0.0, (SectorBand(0), SectorBand(0))),),
                ),
            ),
        )


def test_malformed_document():
    with pytest.raises(TopologyError):
        topology_from_dict({"bands": [], "sites": []})


def test_generator_rejects_impossible_split():
    with pytest.raises(TopologyError):
        generate_topology(5, 3, 2)
