import hashlib
from pathlib import Path

import pytest

from mref.instructions import AssetCatalog, AssetEntry, parse_catalog

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "mref" / "fixtures"


def make_catalog(sizes: dict[str, int]) -> AssetCatalog:
    catalog = AssetCatalog()
    for asset_id, size in sizes.items():
        catalog.add(asset_id, AssetEntry(asset_id.title(), size, hashlib.sha256(asset_id.encode()).digest()))
    return catalog


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def demo_catalog() -> AssetCatalog:
    return parse_catalog((FIXTURES / "catalog.txt").read_text(encoding="utf-8"))


@pytest.fixture
def demo_csv() -> str:
    return (FIXTURES / "tire_change.csv").read_text(encoding="utf-8")
