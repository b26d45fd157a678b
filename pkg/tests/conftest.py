import numpy as np
import pytest
from types import SimpleNamespace

import fsischur as f


@pytest.fixture(scope="session")
def setup():
    """Factory for cached mesh/block bundles keyed by (n, coarsening)."""
    cache = {}

    def build(n, k=1):
        key = (n, k)
        if key not in cache:
            mesh_f, mesh_s = f.fluid_mesh(n), f.solid_mesh(n)
            grid = f.build_interface_grid(mesh_f, mesh_s, k)
            blocks = f.build_blocks(mesh_f, mesh_s, grid)
            cache[key] = SimpleNamespace(
                n=n, mesh_f=mesh_f, mesh_s=mesh_s, grid=grid,
                blocks=blocks, dofs=blocks.dofs)
        return cache[key]

    return build


@pytest.fixture(scope="session")
def exact():
    return f.ExactSolution()


@pytest.fixture(scope="session")
def manufactured_data(exact):
    return f.make_problem_data(exact, f.BoundaryLayout())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
