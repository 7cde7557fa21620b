import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from skycat.bench import load_dataset_into_store
from skycat.engine import QueryEngine
from skycat.generator import GeneratorSpec, generate_dataset, generate_synthetic
from skycat.loader import Loader
from skycat.store import CatalogStore


@pytest.fixture(scope="session")
def catalog10k():
    """10k-object full-sky catalog with spectra, inserted directly."""
    ds = generate_dataset(GeneratorSpec(n_objects=10000, n_plates=2, seed=101))
    store = load_dataset_into_store(ds)
    return store, ds["manifest"]


@pytest.fixture(scope="session")
def engine10k(catalog10k):
    store, _ = catalog10k
    return QueryEngine(store)


@pytest.fixture(scope="session")
def csv_catalog(tmp_path_factory):
    """A small catalog that went through CSV files and the loader."""
    out = tmp_path_factory.mktemp("gen2k")
    manifest = generate_synthetic(
        GeneratorSpec(n_objects=2000, n_plates=1, seed=7), str(out)
    )
    store = CatalogStore()
    loader = Loader(store)
    for table in manifest["loadOrder"]:
        event = loader.load_csv(table, str(out / manifest["files"][table]))
        assert event.status == "success", event.trace_text
    return store, loader, manifest, str(out)


def photo_points(store):
    data = store.snapshot()["PhotoObj"]
    pts = np.stack([data["cx"], data["cy"], data["cz"]], axis=1)
    return pts, data["objID"], data["isPrimary"]
