import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmefront.errors import GridMismatchError
from pmefront.grids import (
    Field,
    Grid,
    Mask,
    VectorField,
    divergence,
    gradient,
    inner,
    l1_distance,
    l1_norm,
    laplacian,
    linf_norm,
    mass,
    read_mask_rle,
    read_snapshot,
    vector_inner,
    write_mask_rle,
    write_snapshot,
)


def grid1d(n=64, lo=-2.0, hi=2.0):
    return Grid.from_domain(1, n, lo, hi)


def grid2d(n=32, lo=-1.0, hi=1.0):
    return Grid.from_domain(2, n, lo, hi)


def compact_random(grid, seed, margin=6):
    rng = np.random.default_rng(seed)
    v = np.zeros(grid.shape)
    inner_slice = tuple(slice(margin, -margin) for _ in range(grid.dimension))
    v[inner_slice] = rng.normal(size=v[inner_slice].shape)
    return Field(grid, v)


class TestGrid:
    def test_from_domain(self):
        g = grid1d(64)
        assert g.dx == pytest.approx(4.0 / 64)
        assert g.cell_count == 64
        assert g.axis_centers(0)[0] == pytest.approx(-2.0 + 0.5 * g.dx)

    def test_rejects_small_and_flat(self):
        with pytest.raises(ValueError):
            Grid.from_domain(1, 8, 0.0, 1.0)
        with pytest.raises(ValueError):
            Grid.from_domain(1, 64, 1.0, 1.0)

    def test_index_of_roundtrip(self):
        g = grid2d(32)
        pts = g.points()
        idx = g.index_of(pts)
        flat = idx[:, 0] * 32 + idx[:, 1]
        assert np.array_equal(flat, np.arange(g.cell_count))


class TestLaplacian:
    def test_constant_is_harmonic(self):
        g = grid2d(32)
        u = Field(g, np.full(g.shape, 3.7))
        lap = laplacian(u).values
        assert np.max(np.abs(lap[4:-4, 4:-4])) == 0.0

    def test_exact_on_quadratics(self):
        g = grid1d(64)
        u = Field.from_function(g, lambda x: x**2)
        lap = laplacian(u).values
        assert np.max(np.abs(lap[4:-4] - 2.0)) < 1e-10

    def test_convergence_order_on_sine(self):
        # oracle: refine dx, fit the slope of the max interior error
        errs, dxs = [], []
        for n in (64, 128, 256):
            g = Grid.from_domain(1, n, 0.0, 1.0)
            x = g.axis_centers(0)
            u = Field(g, np.sin(np.pi * x))
            lap = laplacian(u).values
            sl = slice(n // 8, -n // 8)
            errs.append(np.max(np.abs(lap[sl] + np.pi**2 * np.sin(np.pi * x[sl]))))
            dxs.append(g.dx)
        slope = np.polyfit(np.log(dxs), np.log(errs), 1)[0]
        assert slope >= 1.9

    def test_composition_identity(self):
        g = grid2d(32)
        u = compact_random(g, 11)
        composed = divergence(gradient(u)).values
        assert np.max(np.abs(composed - laplacian(u).values)) <= 1e-13


class TestGradientDivergence:
    def test_constant_gradient_zero(self):
        g = grid2d(32)
        u = Field(g, np.full(g.shape, 2.5))
        grad = gradient(u)
        for c in grad.components:
            assert np.max(np.abs(c[2:-2, 2:-2])) == 0.0

    def test_linear_divergence(self):
        g = grid2d(32)
        X, Y = g.meshgrid()
        F = VectorField(g, (X, Y))
        div = divergence(F).values
        assert np.max(np.abs(div[2:-2, 2:-2] - 2.0)) < 1e-10

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_adjointness(self, seed):
        # oracle: direct summation of both pairings
        g = grid2d(32)
        u = compact_random(g, seed)
        F = VectorField(g, (compact_random(g, seed + 10).values,
                            compact_random(g, seed + 20).values))
        lhs = vector_inner(gradient(u), F)
        rhs = inner(u, divergence(F))
        assert abs(lhs + rhs) < 1e-10

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    @settings(max_examples=25, deadline=None)
    def test_linearity(self, a, b):
        g = grid1d(32)
        u = compact_random(g, 5)
        v = compact_random(g, 6)
        lin = laplacian(Field(g, a * u.values + b * v.values)).values
        sep = a * laplacian(u).values + b * laplacian(v).values
        scale = 1.0 + np.max(np.abs(sep))
        assert np.max(np.abs(lin - sep)) < 1e-11 * scale


class TestNorms:
    def test_zero_field(self):
        g = grid1d(64)
        z = Field.zeros(g)
        assert l1_norm(z) == 0.0 and linf_norm(z) == 0.0 and mass(z) == 0.0

    def test_indicator_mass_counts_cells(self):
        g = grid2d(32)
        v = np.zeros(g.shape)
        v[5:10, 7:12] = 1.0
        assert mass(Field(g, v)) == pytest.approx(25 * g.cell_volume)

    def test_l1_distance_is_norm_of_difference(self):
        g = grid1d(64)
        u = compact_random(g, 1)
        v = compact_random(g, 2)
        assert l1_distance(u, v) == pytest.approx(l1_norm(Field(g, u.values - v.values)))

    def test_grid_mismatch_rejected(self):
        u = Field.zeros(grid1d(64))
        v = Field.zeros(grid1d(128))
        with pytest.raises(GridMismatchError):
            l1_distance(u, v)

    def test_mass_deterministic(self):
        u = compact_random(grid2d(32), 3)
        assert mass(u) == mass(u)


class TestSerialization:
    def test_snapshot_roundtrip(self, tmp_path):
        g = grid2d(32)
        u = compact_random(g, 9).with_values(compact_random(g, 9).values, time_stamp=0.75)
        path = tmp_path / "field.snap"
        write_snapshot(path, u, "density")
        back, name = read_snapshot(path)
        assert name == "density"
        assert back.grid == g
        assert back.time_stamp == 0.75
        assert np.array_equal(back.values, u.values)

    def test_snapshot_header_is_json_line(self, tmp_path):
        import json

        g = grid1d(32)
        path = tmp_path / "f.snap"
        write_snapshot(path, Field.zeros(g), "p")
        header = json.loads(open(path, "rb").readline())
        assert header["cells_per_axis"] == 32 and header["name"] == "p"

    def test_mask_rle_roundtrip(self, tmp_path):
        g = grid2d(32)
        rng = np.random.default_rng(4)
        bits = rng.random(g.shape) > 0.6
        m = Mask(g, bits, 0.25)
        path = tmp_path / "mask.json"
        write_mask_rle(path, m)
        back = read_mask_rle(path)
        assert np.array_equal(back.bits, bits)
        assert back.time_stamp == 0.25
