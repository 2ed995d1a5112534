import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pmefront import barenblatt as bb
from pmefront.errors import MarginViolationError
from pmefront.forcing import ConstantDrift, ConstantSource, ZeroDrift, ZeroSource
from pmefront.grids import Field, Grid, l1_distance, l1_norm, mass
from pmefront.model import InitialData, ModelSpec
from pmefront.pme import SolveConfig, run, stable_dt, step


def bb_spec(m=2.0, horizon=0.5, radius=1.0):
    return ModelSpec(
        m=m, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=horizon,
        drift=ZeroDrift(), source=ZeroSource(),
        init=InitialData("barenblatt", {"radius": radius, "t_offset": 0.5}),
    )


class TestStableDt:
    def test_all_rates_vanish(self):
        g = Grid.from_domain(1, 64, -2, 2)
        spec = bb_spec()
        dt = stable_dt(Field.zeros(g), spec, 0.0, SolveConfig(max_dt=0.125))
        assert dt == 0.125

    def test_hand_evaluated_minimum(self):
        # m = 2, max p = 2, dx = 1/128, d = 2, cfl = 0.4, b = f = 0:
        # dt = 0.4 * dx^2 / (2 * 2 * 2) = 0.05 dx^2
        g = Grid.from_domain(2, 128, 0.0, 1.0)
        rho = Field(g, np.full(g.shape, 1.0))  # p = 2 rho = 2 at m = 2
        spec = ModelSpec(m=2.0, dimension=2, domain_lo=0.0, domain_hi=1.0, horizon=1.0,
                         init=InitialData("patch", {"radius": 0.2, "center": (0.5, 0.5)}))
        dt = stable_dt(rho, spec, 0.0)
        assert dt == pytest.approx(0.05 * g.dx**2, rel=1e-10)

    def test_doubling_m_minus_one_halves_dt(self):
        g = Grid.from_domain(1, 64, -2, 2)
        x = g.axis_centers(0)
        dts = {}
        for m in (2.0, 3.0):
            # pick rho so max pressure is exactly 1 for both exponents
            rho = Field(g, np.where(np.abs(x) < 1, ((m - 1.0) / m) ** (1.0 / (m - 1.0)), 0.0))
            dts[m] = stable_dt(rho, bb_spec(m=m), 0.0)
        assert dts[3.0] == pytest.approx(0.5 * dts[2.0], rel=1e-9)


class TestStep:
    def test_zero_is_fixed_point(self):
        g = Grid.from_domain(1, 64, -2, 2)
        spec = bb_spec()
        out = step(Field.zeros(g), spec, 0.0, 1e-3)
        assert np.all(out.values == 0.0)

    def test_single_step_mass_conservation(self):
        spec = bb_spec()
        g = spec.grid(128)
        rho = spec.initial_density(g)
        dt = stable_dt(rho, spec, 0.0)
        out = step(rho, spec, 0.0, dt)
        assert mass(out) == pytest.approx(mass(rho), rel=1e-12)


class TestRun:
    def test_single_snapshot_at_zero(self):
        spec = bb_spec()
        g = spec.grid(128)
        traj = run(spec, g, SolveConfig(save_times=(0.0,)))
        assert len(traj.snapshots) == 1
        assert np.array_equal(traj.snapshots[0][1].values, spec.initial_density(g).values)

    def test_mass_conservation_over_run(self):
        spec = bb_spec()
        g = spec.grid(128)
        traj = run(spec, g, SolveConfig(save_times=(0.0, 0.25)))
        masses = [mm for _, mm in traj.mass_series]
        drift = (max(masses) - min(masses)) / masses[0]
        assert drift <= 1e-10
        assert traj.clamped_mass == 0.0
        assert traj.min_before_clamp >= -1e-13

    def test_snapshot_pressure_consistency(self):
        spec = bb_spec(m=3.0)
        g = spec.grid(128)
        traj = run(spec, g, SolveConfig(save_times=(0.0, 0.1)))
        t, rho, p = traj.snapshots[-1]
        assert np.allclose(p.values, 3.0 / 2.0 * rho.values**2, rtol=1e-12, atol=0)

    def test_barenblatt_profile_accuracy(self):
        # oracle: the closed-form self-similar solution on the same grid
        spec = bb_spec(m=2.0, horizon=0.25)
        g = spec.grid(128)
        traj = run(spec, g, SolveConfig(save_times=(0.0, 0.25)))
        _, beta, kappa = bb.exponents(2.0, 1)
        C = kappa * 0.5 ** (-2.0 * beta)
        exact = bb.density_field(g, 0.75, 2.0, C)
        err = l1_distance(traj.snapshots[-1][1], exact) / l1_norm(exact)
        assert err < 0.01

    def test_galilean_translation(self):
        # oracle: constant drift solution equals the driftless solution
        # translated by -b t (bulk supports within two cells)
        horizon = 0.25
        base = bb_spec(horizon=horizon)
        drifted = ModelSpec(
            m=2.0, dimension=1, domain_lo=-2.5, domain_hi=2.5, horizon=horizon,
            drift=ConstantDrift((1.0,)), source=ZeroSource(),
            init=InitialData("barenblatt", {"radius": 1.0, "t_offset": 0.5}),
        )
        g = base.grid(256)
        cfg = SolveConfig(save_times=(0.0, horizon))
        t0 = run(base, g, cfg)
        tb = run(drifted, g, cfg)
        shift_cells = round(-horizon / g.dx)
        rolled = np.roll(t0.snapshots[-1][1].values, shift_cells)
        moved = tb.snapshots[-1][1].values

        from pmefront.diagnostics import DENSITY_SUPPORT_REL
        from pmefront.geometry import hausdorff_distance
        from pmefront.grids import Mask

        a = Mask(g, rolled > DENSITY_SUPPORT_REL * rolled.max())
        b = Mask(g, moved > DENSITY_SUPPORT_REL * moved.max())
        assert hausdorff_distance(a, b) <= 2.0 * g.dx + 1e-12

    def test_comparison_principle(self):
        # nested data stay ordered: run the same spec from nested profiles
        spec = bb_spec(m=2.0, horizon=0.3)
        g = spec.grid(256)
        lo = spec.initial_density(g)
        hi = Field(g, bb.density_values(g.axis_centers(0) ** 2, 0.5, 2.0, 1,
                                        1.3 * bb.exponents(2.0, 1)[2] * 0.5 ** (-2 / 3)))
        assert np.all(hi.values >= lo.values)
        cfg = SolveConfig(save_times=tuple(np.linspace(0, 0.3, 4)))
        tl = run(spec, g, cfg, rho0=lo)
        th = run(spec, g, cfg, rho0=hi)
        worst = max(float(np.max(a[1].values - b[1].values))
                    for a, b in zip(tl.snapshots, th.snapshots))
        assert worst <= 1e-9

    def test_margin_abort(self):
        # initial support too close to the boundary for the envelope
        spec = ModelSpec(
            m=2.0, dimension=1, domain_lo=-1.2, domain_hi=1.2, horizon=0.5,
            init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}),
        )
        with pytest.raises(MarginViolationError):
            run(spec, spec.grid(64), SolveConfig(save_times=(0.0, 0.5)))

    def test_mass_lipschitz_stable_under_dt_refinement(self):
        spec = ModelSpec(
            m=2.0, dimension=1, domain_lo=-3.0, domain_hi=3.0, horizon=0.3,
            source=ConstantSource(1.0),
            init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}),
        )
        g = spec.grid(128)
        rates = []
        for cfl in (0.4, 0.2):
            traj = run(spec, g, SolveConfig(cfl_fraction=cfl, save_times=(0.0, 0.3)))
            t, mm = zip(*traj.mass_series)
            t, mm = np.asarray(t), np.asarray(mm)
            lip = np.max(np.abs(np.diff(mm) / np.diff(t)))
            assert np.isfinite(lip)
            rates.append(lip)
        assert abs(rates[0] - rates[1]) <= 0.1 * rates[1]

    @given(amp=st.floats(0.01, 0.2), width=st.floats(0.2, 0.6), pos=st.floats(-0.5, 0.5))
    @settings(max_examples=5, deadline=None)
    def test_l1_stability_under_initial_perturbations(self, amp, width, pos):
        # |mass1(t) - mass2(t)| <= 1.1 e^{|f| t} * |rho1 - rho2|_L1(0)
        spec = ModelSpec(
            m=2.0, dimension=1, domain_lo=-3.0, domain_hi=3.0, horizon=0.1,
            source=ConstantSource(1.0),
            init=InitialData("smooth_bump", {"radius": 1.0, "amplitude": 0.5}),
        )
        g = spec.grid(64)
        x = g.axis_centers(0)
        rho1 = spec.initial_density(g)
        bump = amp * np.maximum(1.0 - ((x - pos) / width) ** 2, 0.0)
        rho2 = Field(g, rho1.values + bump)
        cfg = SolveConfig(save_times=(0.0, 0.1))
        t1 = run(spec, g, cfg, rho0=rho1)
        t2 = run(spec, g, cfg, rho0=rho2)
        gap0 = l1_distance(rho1, rho2)
        gap_t = abs(mass(t1.snapshots[-1][1]) - mass(t2.snapshots[-1][1]))
        assert gap_t <= 1.1 * math.exp(1.0 * 0.1) * gap0 + 1e-12
