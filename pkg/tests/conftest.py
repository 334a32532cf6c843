"""Shared fixtures: small grids and tiny models."""

import pytest

from src.common.models import GridSpec, HyperParams


@pytest.fixture
def grid() -> GridSpec:
    """4 x 3 cells of 500 m, V = 12."""
    return GridSpec(origin_lat=45.0, origin_lon=7.6, cell_size_m=500.0, n_rows=4, n_cols=3)


@pytest.fixture
def big_grid() -> GridSpec:
    return GridSpec(origin_lat=45.0, origin_lon=7.6, cell_size_m=500.0, n_rows=8, n_cols=8)


@pytest.fixture
def tiny_hp() -> HyperParams:
    return HyperParams(
        d_tok=4,
        d_agent=3,
        d_ctx=3,
        d_hid=5,
        d_z=2,
        mc_samples=4,
        lr=1e-2,
        epochs=2,
        batch_size=4,
        w_max=8,
        seed=7,
    )
