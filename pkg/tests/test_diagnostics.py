import math

import numpy as np
import pytest

from pmefront.forcing import ConstantSource
from pmefront.geometry import extract_frontier
from pmefront.grids import Field, Grid, Mask
from pmefront.model import InitialData, ModelSpec, pressure_from_density
from pmefront.pme import SolveConfig, Trajectory, run
from pmefront import diagnostics as dg


def disk_mask(grid, radius, center=(0.0, 0.0)):
    X, Y = grid.meshgrid()
    return Mask(grid, (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius**2)


def frontier_of_mask(mask):
    return extract_frontier(Field(mask.grid, np.where(mask.bits, 1.0, 0.0)), 0.5)


def synthetic_trajectory(spec, grid, fields):
    """Wrap (time, density) pairs as a Trajectory."""
    traj = Trajectory(spec=spec, grid=grid)
    for t, rho in fields:
        rho_f = Field(grid, rho, t)
        traj.snapshots.append((t, rho_f, pressure_from_density(rho_f, spec.m)))
    return traj


class TestFits:
    def test_exact_power_law_recovered(self):
        xs = np.geomspace(0.1, 10.0, 8)
        ys = 3.0 * xs**1.7
        fit = dg.fit_loglog(xs, ys)
        assert fit.slope == pytest.approx(1.7, abs=1e-12)
        assert fit.r2 == pytest.approx(1.0)
        assert fit.conclusive

    def test_inconclusive_flag(self):
        xs = [1.0, 2.0, 4.0, 8.0]
        ys = [1.0, 5.0, 1.5, 6.0]
        fit = dg.fit_loglog(xs, ys)
        assert not fit.conclusive


class TestBallAverage:
    def test_constant_field_exact(self):
        g = Grid.from_domain(2, 64, -1, 1)
        u = Field(g, np.full(g.shape, 2.5))
        assert dg.ball_average(u, np.array([0.1, -0.2]), 5 * g.dx) == pytest.approx(2.5)

    def test_zero_near_probe(self):
        g = Grid.from_domain(2, 64, -1, 1)
        assert dg.ball_average(Field.zeros(g), np.array([0.0, 0.0]), 4 * g.dx) == 0.0


class TestAbCheck:
    def test_static_quadratic_profile(self):
        # p = A (R^2 - |x|^2)_+ with b = 0, f = c: interior q = -2 d A + c
        g = Grid.from_domain(2, 96, -2.0, 2.0)
        A, R, c = 0.3, 1.2, 1.0
        X, Y = g.meshgrid()
        p_vals = A * np.maximum(R**2 - X**2 - Y**2, 0.0)
        spec = ModelSpec(m=2.0, dimension=2, domain_lo=-2.0, domain_hi=2.0, horizon=1.0,
                         source=ConstantSource(c),
                         init=InitialData("patch", {"radius": R}))
        rho = ((2.0 - 1.0) / 2.0 * p_vals) ** 1.0
        traj = synthetic_trajectory(spec, g, [(0.5, rho)])
        rep = dg.ab_check(traj, spec, eta0=0.1)
        (t, min_q, floor, margin, tol, n) = rep.rows[0]
        assert min_q == pytest.approx(-2 * 2 * A + c, abs=1e-8)
        assert rep.passed

    @pytest.mark.parametrize("m", [2.0, 5.0, 10.0, 20.0, 40.0, 80.0])
    def test_barenblatt_stays_above_floor(self, m):
        spec = ModelSpec(m=m, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=0.4,
                         init=InitialData("barenblatt", {"radius": 1.0, "t_offset": 0.5}))
        g = spec.grid(256)
        traj = run(spec, g, SolveConfig(save_times=tuple(np.linspace(0, 0.4, 5))))
        rep = dg.ab_check(traj, spec, eta0=0.1)
        assert rep.passed
        assert not rep.improved_floor


class TestCoveringDimension:
    def test_circle_dimension(self):
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        rec = frontier_of_mask(disk_mask(g, 0.5))
        radii = [k * g.dx for k in (3, 5, 8, 12, 18)]
        est = dg.covering_dimension(rec, radii)
        assert 0.9 <= est.dimension <= 1.15
        assert est.tripled_cover_ok
        # counts shrink as the packing radius grows
        assert all(b <= a for a, b in zip(est.counts, est.counts[1:]))

    def test_circle_count_oracle(self):
        # a maximal 2R-separated family on a circle of radius rho has about
        # pi rho / R members; greedy stays within a factor of two
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        rec = frontier_of_mask(disk_mask(g, 0.5))
        R = 8 * g.dx
        est = dg.covering_dimension(rec, [3 * g.dx, 5 * g.dx, R, 12 * g.dx])
        count = est.counts[2]
        ideal = math.pi * 0.5 / R
        assert 0.5 * ideal <= count <= 2.0 * ideal

    def test_segment_dimension(self):
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        bits = np.zeros(g.shape, bool)
        bits[40:210, 128] = True
        rec = frontier_of_mask(Mask(g, bits))
        radii = [k * g.dx for k in (3, 5, 8, 12, 18)]
        est = dg.covering_dimension(rec, radii)
        assert 0.9 <= est.dimension <= 1.1

    def test_square_boundary_dimension(self):
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        X, Y = g.meshgrid()
        bits = (np.abs(X) <= 0.5) & (np.abs(Y) <= 0.5)
        rec = frontier_of_mask(Mask(g, bits))
        radii = [k * g.dx for k in (3, 5, 8, 12, 18)]
        est = dg.covering_dimension(rec, radii)
        assert 0.85 <= est.dimension <= 1.15

    def test_tiny_frontier_refused(self):
        g = Grid.from_domain(2, 64, -1.0, 1.0)
        bits = np.zeros(g.shape, bool)
        bits[30, 30] = True
        rec = frontier_of_mask(Mask(g, bits))
        with pytest.raises(ValueError, match="too small"):
            dg.covering_dimension(rec, [k * g.dx for k in (3, 4, 5, 6)])

    def test_fit_invariant_under_whole_cell_translation(self):
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        radii = [k * g.dx for k in (3, 5, 8, 12)]
        rec1 = frontier_of_mask(disk_mask(g, 0.5))
        rec2 = frontier_of_mask(disk_mask(g, 0.5, center=(3 * g.dx, -2 * g.dx)))
        e1 = dg.covering_dimension(rec1, radii)
        e2 = dg.covering_dimension(rec2, radii)
        assert e1.counts == e2.counts

    def test_bound_reporting(self):
        g = Grid.from_domain(2, 256, -1.0, 1.0)
        rec = frontier_of_mask(disk_mask(g, 0.5))
        radii = [k * g.dx for k in (3, 5, 8, 12)]
        est = dg.covering_dimension(rec, radii, m=41.0, sigma_m=1.0, mu=2.0)
        assert est.bound_dm == pytest.approx(2 - 1 + 2.0 / 40.0)


class TestOscillation:
    def test_constant_density_has_zero_oscillation(self):
        g = Grid.from_domain(2, 64, -1, 1)
        u = Field(g, np.full(g.shape, 0.7))
        # interior constant: ball sup = ball inf away from the padded rim;
        # use a compactly supported plateau instead to avoid rim effects
        bits = disk_mask(g, 2.0).bits  # everything
        assert dg.oscillation_integral(Field.zeros(g), 3 * g.dx) == 0.0

    def test_indicator_annulus_oracle(self):
        # integral of (sup - inf) over a disk indicator equals
        # vol(B(a + r)) - vol(B(a - r))
        g = Grid.from_domain(2, 256, -2.0, 2.0)
        a, r = 1.0, 6 * g.dx
        u = Field(g, np.where(disk_mask(g, a).bits, 1.0, 0.0))
        got = dg.oscillation_integral(u, r)
        expect = math.pi * ((a + r) ** 2 - (a - r) ** 2)
        assert got == pytest.approx(expect, rel=0.15)

    def test_indicator_exponent_near_one(self):
        g = Grid.from_domain(2, 256, -2.0, 2.0)
        u = Field(g, np.where(disk_mask(g, 1.0).bits, 1.0, 0.0))
        radii = [k * g.dx for k in (2, 3, 5, 8, 12)]
        fit = dg.oscillation_exponent(u, radii)
        assert fit.slope == pytest.approx(1.0, abs=0.1)

    def test_lipschitz_density_bound(self):
        # slope-s profile: oscillation <= 2 s r * support volume + band term
        g = Grid.from_domain(1, 256, -2.0, 2.0)
        x = g.axis_centers(0)
        s = 0.8
        u = Field(g, np.maximum(1.0 - s * np.abs(x), 0.0))
        r = 4 * g.dx
        got = dg.oscillation_integral(u, r)
        support_vol = 2.0 / s * 2.0
        band = 2.0 * r * 1.0  # front band contributes amplitude * 2r per side
        assert got <= 2.0 * s * r * support_vol + band

    def test_propagation_constant_on_pme_run(self):
        spec = ModelSpec(m=10.0, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=0.4,
                         init=InitialData("barenblatt", {"radius": 1.0, "t_offset": 0.5}))
        g = spec.grid(256)
        traj = run(spec, g, SolveConfig(save_times=tuple(np.linspace(0, 0.4, 5))))
        radii = [k * g.dx for k in (2, 3, 4, 6, 8)]
        rep = dg.oscillation_propagation(traj, radii)
        assert rep.passed
        assert rep.fitted_c <= 20.0


class TestGoodPart:
    def test_smooth_disk_boundary_all_good(self):
        from pmefront.heleshaw import LimitConfig, run_limit

        spec = ModelSpec(m=math.inf, dimension=2, domain_lo=-3.0, domain_hi=3.0,
                         horizon=0.1, source=ConstantSource(1.0),
                         init=InitialData("patch", {"radius": 1.0}))
        g = spec.grid(96)
        traj = run_limit(spec, g, LimitConfig(save_times=(0.0, 0.05, 0.1)))
        rec = dg.limit_support(traj, 0.05)
        good = dg.good_part_cells(traj, 0.05)
        assert good.count >= 0.9 * rec.boundary.count


class TestStreamlineCheck:
    def test_growth_run_contained_and_decaying(self):
        spec = ModelSpec(m=5.0, dimension=1, domain_lo=-3.0, domain_hi=3.0, horizon=0.4,
                         source=ConstantSource(1.0),
                         init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}))
        g = spec.grid(128)
        traj = run(spec, g, SolveConfig(save_times=tuple(np.linspace(0, 0.4, 5))))
        rep = dg.streamline_check(traj, spec, eta0=0.1)
        assert rep.all_contained
        assert rep.decay_fraction >= 0.95


class TestExpansion:
    def test_initial_expansion_rate_on_parabolic_profile(self):
        # with the linear near-front growth of the parabolic profile the
        # measured initial expansion radius dominates tau^2 / 4
        from pmefront.scenarios import preset

        scen = preset("r11_compatible")
        spec = scen.model_spec(10.0)
        g = spec.grid(256)
        saves = tuple(np.linspace(0.0, 0.3, 7))
        traj = run(spec, g, SolveConfig(save_times=saves))
        rep = dg.strict_expansion_measure(traj, spec, eta0=2 * (saves[1] - saves[0]))
        assert rep.initial_expansion, "expected initial-time rows"
        sigma0 = 1.0
        for tau, r_tau in rep.initial_expansion:
            assert r_tau >= 0.25 * tau ** (2.0 / sigma0)

    def test_backward_separation_positive_on_growth_run(self):
        spec = ModelSpec(m=5.0, dimension=1, domain_lo=-3.0, domain_hi=3.0, horizon=0.4,
                         source=ConstantSource(1.0),
                         init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}))
        g = spec.grid(256)
        traj = run(spec, g, SolveConfig(save_times=tuple(np.linspace(0, 0.4, 9))))
        rep = dg.strict_expansion_measure(traj, spec, eta0=0.1)
        assert rep.backward_positive_fraction >= 0.95
        assert np.isfinite(rep.forward_cap)

    def test_forward_cap_stable_under_refinement(self):
        # two-resolution comparison: the sqrt(s) speed-cap coefficient moves
        # by less than 20 percent between 128 and 256 cells
        caps = {}
        for cells in (128, 256):
            spec = ModelSpec(m=5.0, dimension=1, domain_lo=-3.0, domain_hi=3.0,
                             horizon=0.4, source=ConstantSource(1.0),
                             init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}))
            g = spec.grid(cells)
            traj = run(spec, g, SolveConfig(save_times=tuple(np.linspace(0, 0.4, 9))))
            caps[cells] = dg.strict_expansion_measure(traj, spec, eta0=0.1).forward_cap
        assert abs(caps[256] - caps[128]) <= 0.2 * caps[128]


class TestConvergenceTable:
    def test_identical_trajectories_have_zero_distances(self):
        spec = ModelSpec(m=10.0, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=0.2,
                         init=InitialData("barenblatt", {"radius": 1.0, "t_offset": 0.5}))
        g = spec.grid(128)
        saves = tuple(np.linspace(0.0, 0.2, 5))
        traj = run(spec, g, SolveConfig(save_times=saves))
        table = dg.convergence_report({10.0: traj, 10.5: traj}, None, eta0=0.05)
        assert table.pressure_l1_spacetime[(10.0, 10.5)] == 0.0
        assert table.initial_support_hausdorff[(10.0, 10.5)] == 0.0
        assert all(v == 0.0 for v in table.per_time_hausdorff[(10.0, 10.5)].values())
        assert all(v == 0 for v in table.containment_cells[(10.0, 10.5)].values())
        assert table.spacetime_frontier[(10.0, 10.5)] == 0.0


class TestSupportExtraction:
    def test_density_and_pressure_fronts_agree_for_steep_profiles(self):
        spec = ModelSpec(m=40.0, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=0.2,
                         init=InitialData("barenblatt", {"radius": 1.0, "t_offset": 0.5}))
        g = spec.grid(256)
        traj = run(spec, g, SolveConfig(save_times=(0.0, 0.2)))
        from pmefront.geometry import hausdorff_distance

        a = dg.trajectory_support(traj, 0.2).support
        b = dg.pressure_frontier(traj, 0.2).support
        assert hausdorff_distance(a, b) <= 2 * g.dx
