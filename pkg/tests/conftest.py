import json
import pathlib
import warnings

import pytest

from trapfpt import spectral

FIXTURES = pathlib.Path(__file__).parent / "fixtures"

warnings.filterwarnings("ignore", message="Using `httpx` with `starlette")


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    """One eigen-system cache for the whole session; cold on first use."""
    return tmp_path_factory.mktemp("eigencache")


@pytest.fixture(scope="session")
def eigensystem(cache_dir):
    def build(kappa, count, **kw):
        return spectral.build_eigensystem(kappa, count, cache_dir=cache_dir, **kw)

    return build


@pytest.fixture(scope="session")
def golden():
    """Oracle-certified constants keyed by (quantity, kappa, z_or_n)."""
    entries = json.loads((FIXTURES / "golden_spectral.json").read_text())
    return {(e["quantity"], e["kappa"], e["z_or_n"]): float(e["value"]) for e in entries}
