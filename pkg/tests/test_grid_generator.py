"""Grid mapping and square-root generator structure."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chi_exit import (
    PotentialSurface,
    RegularGrid,
    benchmark_potential,
    build_sqrt_generator,
    flat_potential,
)


def test_centers_round_trip(grid50):
    cells = grid50.cells_of(grid50.centers)
    np.testing.assert_array_equal(cells, np.arange(grid50.n))


def test_cell_layout_row_major(grid50):
    # k = i * ny + j with i the x1 index
    assert grid50.cell_of(np.array([0.011, 0.031])) == 1
    assert grid50.cell_of(np.array([0.031, 0.011])) == 50


def test_upper_boundary_maps_to_last_cell(grid50):
    assert grid50.cell_of(np.array([1.0, 1.0])) == grid50.n - 1
    assert grid50.cell_of(np.array([1.0, 0.0])) == grid50.n - 50


def test_outside_maps_to_minus_one(grid50):
    pts = np.array([[1.2, 0.5], [-0.1, 0.5], [0.5, 1.0001], [0.5, -0.2]])
    np.testing.assert_array_equal(grid50.cells_of(pts), [-1, -1, -1, -1])


def test_row_sums_vanish(gen50):
    ones = np.ones(gen50.n)
    assert np.max(np.abs(gen50.rates @ ones)) < 1e-10


def test_detailed_balance(gen50):
    flux = gen50.rates.multiply(gen50.weights[:, None])
    residual = (flux - flux.T).tocoo()
    if residual.nnz:
        assert np.max(np.abs(residual.data)) < 1e-12


def test_symmetrized_is_symmetric(gen_small):
    sym = gen_small.symmetrized()
    assert np.max(np.abs(sym - sym.T)) < 1e-12


def test_offdiagonal_sign_and_sparsity(gen50):
    mat = gen50.rates.tocoo()
    off = mat.data[mat.row != mat.col]
    assert np.all(off < 0)
    # 4-neighbor stencil on a 50x50 grid
    assert mat.nnz == gen50.n + 2 * (49 * 50 + 50 * 49)


def test_weights_are_boltzmann(gen50, bench):
    w = gen50.weights
    assert np.all(w > 0)
    np.testing.assert_allclose(w.sum(), 1.0, rtol=1e-12)
    v = bench(gen50.grid.centers)
    ratio = np.log(w) + v
    assert np.max(ratio) - np.min(ratio) < 1e-10


def test_spectrum_nonnegative(gen_small):
    vals = np.linalg.eigvalsh(gen_small.symmetrized())
    assert vals[0] > -1e-10


def test_kernel_is_constant(gen_small):
    sym = gen_small.symmetrized()
    vals, vecs = np.linalg.eigh(sym)
    kernel = vecs[:, 0] / np.sqrt(gen_small.weights)
    kernel /= kernel[0]
    np.testing.assert_allclose(kernel, np.ones(gen_small.n), rtol=0,
                               atol=1e-8)
    assert abs(vals[0]) < 1e-12


def test_two_cell_chain_eigenvalues():
    pot = flat_potential()
    grid = RegularGrid(2, 1, pot.domain)
    gen = build_sqrt_generator(pot, grid, 1.0)
    vals = np.linalg.eigvalsh(gen.symmetrized())
    np.testing.assert_allclose(vals, [0.0, 2.0], rtol=0, atol=1e-12)


def test_single_cell_rejected():
    pot = flat_potential()
    grid = RegularGrid(1, 1, pot.domain)
    with pytest.raises(ValueError):
        build_sqrt_generator(pot, grid, 1.0)


def test_huge_potential_range_rejected(bench):
    steep = PotentialSurface(
        evaluator=lambda x: 400.0 * bench.evaluator(x),
        gradient=lambda x: 400.0 * bench.gradient(x),
        domain=bench.domain,
        name="steep",
    )
    grid = RegularGrid(20, 20, steep.domain)
    with pytest.raises(ValueError):
        build_sqrt_generator(steep, grid, 1.0)


def _quadratic(a1, a2, c1, c2):
    def _energy(x):
        x = np.asarray(x, dtype=float)
        return a1 * (x[..., 0] - c1) ** 2 + a2 * (x[..., 1] - c2) ** 2

    def _gradient(x):
        x = np.asarray(x, dtype=float)
        g = np.empty_like(x)
        g[..., 0] = 2 * a1 * (x[..., 0] - c1)
        g[..., 1] = 2 * a2 * (x[..., 1] - c2)
        return g

    return PotentialSurface(evaluator=_energy, gradient=_gradient,
                            domain=((0.0, 0.0), (1.0, 1.0)), name="quad")


@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=2, max_value=6),
    st.integers(min_value=1, max_value=6),
    st.floats(min_value=0.1, max_value=8.0),
    st.floats(min_value=0.1, max_value=8.0),
    st.floats(min_value=0.2, max_value=0.8),
    st.floats(min_value=0.2, max_value=0.8),
    st.floats(min_value=0.25, max_value=4.0),
)
def test_generator_properties_random(nx, ny, a1, a2, c1, c2, kbt):
    if nx * ny < 2:
        ny = 2
    pot = _quadratic(a1, a2, c1, c2)
    grid = RegularGrid(nx, ny, pot.domain)
    gen = build_sqrt_generator(pot, grid, kbt)
    ones = np.ones(gen.n)
    assert np.max(np.abs(gen.rates @ ones)) < 1e-10
    flux = gen.rates.multiply(gen.weights[:, None])
    residual = (flux - flux.T).tocoo()
    if residual.nnz:
        assert np.max(np.abs(residual.data)) < 1e-12
    vals = np.linalg.eigvalsh(gen.symmetrized())
    assert vals[0] > -1e-10
