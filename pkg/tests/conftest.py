import numpy as np
import pytest

from radsurro.dtrm import FurnaceCase
from radsurro.mesh import FurnaceMesh
from radsurro.spectral import BandGrid, default_absorption_table

TABLE1_MESH = FurnaceMesh(120, 20, 12.0, 2.0)
TABLE1_GRID = BandGrid(150.0, 9300.0, 25.0)

DESK_MESH = FurnaceMesh(30, 10, 12.0, 2.0)
DESK_GRID = BandGrid(150.0, 9150.0, 225.0)  # 40 bands


@pytest.fixture(scope="session")
def desk_mesh():
    return DESK_MESH


@pytest.fixture(scope="session")
def desk_grid():
    return DESK_GRID


@pytest.fixture(scope="session")
def desk_table():
    return default_absorption_table(DESK_GRID)


def make_desk_case(eps=0.7, T0=1200.0, T=1200.0, x_co2=0.1, x_h2o=0.2, x_co=0.0,
                   mesh=DESK_MESH, grid=DESK_GRID, table=None):
    """Uniform-field desk-scale case; scalars broadcast to full fields."""
    if table is None:
        table = default_absorption_table(grid)
    nb, nc = mesh.n_boundary, mesh.n_cells
    return FurnaceCase(
        mesh=mesh,
        eps=np.broadcast_to(np.asarray(eps, dtype=float), (nb,)).copy(),
        T0=np.broadcast_to(np.asarray(T0, dtype=float), (nb,)).copy(),
        T=np.broadcast_to(np.asarray(T, dtype=float), (nc,)).copy(),
        p=1.0, x_co2=x_co2, x_h2o=x_h2o, x_co=x_co,
        grid=grid, table=table,
    )
