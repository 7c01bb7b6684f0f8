import math

import numpy as np
import pytest

from hypmin import (CoefficientSpec, Grid, SpeedPair, canonical_solution,
                    diag_removal, feedback_gains, growth_rate, l2_norm,
                    simulate, solve_kernels, trace_g, volterra_apply)
from hypmin.errors import CFLError, DivergenceError, DomainError, UndefinedRateError
from hypmin.simulator import SimResult, export_sim_csv

from conftest import const, exact_transport, make_system, smooth_bump


class TestSimulate:
    def test_zero_everything_stays_zero(self, unit_speeds):
        grid = Grid.uniform(50)
        system = make_system(unit_speeds, a=0.3, b=1.0, c=0.5, d=-0.2)
        sim = simulate(system, None, (np.zeros(51), np.zeros(51)), 0.5, grid)
        for y1, y2 in sim.snapshots:
            assert np.all(y1 == 0.0) and np.all(y2 == 0.0)

    def test_transport_matches_characteristics(self, varying_speeds):
        grid = Grid.uniform(400)
        system = make_system(varying_speeds)
        y10 = smooth_bump(grid.nodes, 0.6, 0.2)
        y20 = smooth_bump(grid.nodes, 0.35, 0.15)
        t = 0.25
        sim = simulate(system, None, (y10, y20), t, grid, cfl=0.9)
        assert len(sim.snapshots) == len(sim.times)
        assert sim.scheme_meta["dt"] * sim.scheme_meta["max_speed"] / grid.h <= 1 + 1e-12
        ex1, ex2 = exact_transport(varying_speeds, y10, y20, grid.nodes, t)
        got1, got2 = sim.snapshots[-1]
        err = np.trapezoid(np.abs(got1 - ex1) + np.abs(got2 - ex2), dx=grid.h)
        assert err <= 0.02

    def test_transport_first_order(self, varying_speeds):
        system = make_system(varying_speeds)
        t = 0.25
        errs = []
        for n in (200, 400, 800):
            grid = Grid.uniform(n)
            y10 = smooth_bump(grid.nodes, 0.6, 0.2)
            y20 = smooth_bump(grid.nodes, 0.35, 0.15)
            sim = simulate(system, None, (y10, y20), t, grid, cfl=0.9)
            ex1, ex2 = exact_transport(varying_speeds, y10, y20, grid.nodes, t)
            got1, got2 = sim.snapshots[-1]
            errs.append(np.trapezoid(np.abs(got1 - ex1) + np.abs(got2 - ex2),
                                     dx=grid.h))
        orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
        for order in orders:
            assert 0.8 <= order <= 1.2

    def test_cfl_validation(self, unit_speeds):
        grid = Grid.uniform(20)
        system = make_system(unit_speeds)
        with pytest.raises(CFLError):
            simulate(system, None, (np.zeros(21), np.zeros(21)), 0.5, grid, cfl=1.5)
        with pytest.raises(CFLError):
            simulate(system, None, (np.zeros(21), np.zeros(21)), 0.5, grid, cfl=0.0)

    def test_bad_horizon_and_data(self, unit_speeds):
        grid = Grid.uniform(20)
        system = make_system(unit_speeds)
        with pytest.raises(DomainError):
            simulate(system, None, (np.zeros(21), np.zeros(21)), -1.0, grid)
        with pytest.raises(DomainError):
            simulate(system, None, (np.zeros(10), np.zeros(21)), 0.5, grid)

    def test_divergence_detection(self, unit_speeds):
        grid = Grid.uniform(20)
        system = make_system(unit_speeds)
        bad = np.zeros(21)
        bad[10] = np.inf
        with pytest.raises(DivergenceError) as err:
            simulate(system, None, (bad, np.zeros(21)), 0.5, grid)
        assert err.value.step >= 1

    def test_finite_speed_propagation(self, unit_speeds):
        # no coupling, unit CFL: support moves exactly one cell per step
        grid = Grid.uniform(200)
        system = make_system(unit_speeds)
        y10 = smooth_bump(grid.nodes, 0.5, 0.2)
        y20 = smooth_bump(grid.nodes, 0.5, 0.2)
        t = 0.25
        sim = simulate(system, None, (y10, y20), t, grid, cfl=1.0)
        y1, y2 = sim.snapshots[-1]
        xs = grid.nodes
        assert np.all(np.abs(y1[(xs < 0.3 - t - grid.h) | (xs > 0.7 - t + grid.h)]) <= 1e-14)
        assert np.all(np.abs(y2[(xs < 0.3 + t - grid.h) | (xs > 0.7 + t + grid.h)]) <= 1e-14)

    def test_closed_loop_zero_is_invariant(self, unit_speeds):
        grid = Grid.uniform(60)
        system = make_system(unit_speeds, a=0.5, b=1.0,
                             c=CoefficientSpec.step(0.25, 0.0, 1.0), d=-0.3)
        gauge = diag_removal(system.a, system.b, system.c, system.d,
                             unit_speeds, grid)
        K = solve_kernels(gauge, unit_speeds, None, grid)
        law = feedback_gains(K, gauge)
        sim = simulate(system, law, (np.zeros(61), np.zeros(61)), 1.0, grid)
        assert sim.l2_trace[-1] == 0.0
        assert np.all(sim.control_trace == 0.0)

    def test_reflection_boundary(self, unit_speeds):
        from hypmin import BoundaryReflection
        grid = Grid.uniform(100)
        system = make_system(unit_speeds)
        y20 = smooth_bump(grid.nodes, 0.8, 0.15)
        sim = simulate(system, BoundaryReflection(2.0), (np.zeros(101), y20),
                       0.3, grid, cfl=1.0)
        y1, y2 = sim.snapshots[-1]
        # the y2 bump reached x=1 and re-enters through y1 with gain 2
        assert y1[-1] == pytest.approx(2.0 * y2[-1], abs=1e-12)
        assert np.max(np.abs(y1)) > 0.5

    def test_signal_control_enters(self, unit_speeds):
        grid = Grid.uniform(100)
        system = make_system(unit_speeds)
        sim = simulate(system, lambda t: math.sin(3 * t), (np.zeros(101), np.zeros(101)),
                       0.5, grid, cfl=1.0)
        y1, _ = sim.snapshots[-1]
        # u(t) injected at x=1 travels left a distance t
        inj = y1[grid.nodes > 0.5 + grid.h]
        assert np.max(np.abs(inj)) > 0.1
        assert sim.control_trace[-1] == pytest.approx(math.sin(1.5), abs=1e-12)


class TestCanonicalSolution:
    def test_source_free_transport(self, unit_speeds):
        npts = 101
        nodes = np.linspace(0.0, 1.0, npts)
        g = np.zeros(npts)
        y0 = (np.sin(nodes), np.cos(nodes))
        got1, got2 = canonical_solution(unit_speeds, g, 0.0, y0, None, 0.3, nodes)
        s_in2 = 0.3 - nodes
        want2 = np.where(s_in2 <= 0.0, np.interp(np.clip(nodes - 0.3, 0, 1),
                                                 nodes, y0[1]), 0.0)
        assert np.allclose(got2, want2, atol=1e-12)

    def test_control_region(self, unit_speeds):
        npts = 101
        nodes = np.linspace(0.0, 1.0, npts)
        g = np.zeros(npts)
        y0 = (np.full(npts, 0.7), np.zeros(npts))
        uhat = lambda s: np.sin(s)
        # s_in1(t,x) = t + x - 1
        v1, _ = canonical_solution(unit_speeds, g, 0.0, y0, uhat, 1.5, 0.2)
        assert v1 == pytest.approx(math.sin(0.7), abs=1e-12)
        v1, _ = canonical_solution(unit_speeds, g, 0.0, y0, uhat, 0.3, 0.3)
        assert v1 == pytest.approx(0.7, abs=1e-12)

    def test_constant_source_worked_example(self, unit_speeds):
        npts = 201
        nodes = np.linspace(0.0, 1.0, npts)
        g = np.ones(npts)
        y0 = (np.ones(npts), 0.7 + nodes)
        _, v2 = canonical_solution(unit_speeds, g, 0.0, y0, None, 0.5, 0.5)
        assert v2 == pytest.approx(0.7 + 0.5, abs=1e-10)

    def test_reflection_inflow(self, unit_speeds):
        npts = 101
        nodes = np.linspace(0.0, 1.0, npts)
        g = np.zeros(npts)
        y0 = (np.full(npts, 0.5), np.zeros(npts))
        # q-reflection: for s_in2 > 0 the lower state carries q*y1(s_in2, 0)
        _, v2 = canonical_solution(unit_speeds, g, 2.0, y0, None, 0.4, 0.1)
        assert v2 == pytest.approx(2.0 * 0.5, abs=1e-12)

    def test_domain_errors(self, unit_speeds):
        g = np.zeros(11)
        y0 = (np.zeros(11), np.zeros(11))
        with pytest.raises(DomainError):
            canonical_solution(unit_speeds, g, 0.0, y0, None, -0.1, 0.5)
        with pytest.raises(DomainError):
            canonical_solution(unit_speeds, g, 0.0, y0, None, 0.5, 1.5)


class TestReflectionCrossCheck:
    def test_simulated_reflection_matches_canonical(self, unit_speeds):
        # independent paths: upwind scheme vs exact characteristic formulas;
        # unit CFL with unit speeds makes both exact, so they must agree to
        # rounding through the x=0 reflection
        grid = Grid.uniform(400)
        xs = grid.nodes
        y10 = smooth_bump(xs, 0.35, 0.2)
        y20 = np.zeros_like(xs)
        q = 0.8
        system = make_system(unit_speeds, q=q)
        t = 0.7
        sim = simulate(system, None, (y10, y20), t, grid, cfl=1.0)
        got1, got2 = sim.snapshots[-1]
        want1, want2 = canonical_solution(unit_speeds, np.zeros_like(xs), q,
                                          (y10, y20), None, t, xs)
        assert np.max(np.abs(got1 - want1)) <= 1e-12
        assert np.max(np.abs(got2 - want2)) <= 1e-12
        assert np.max(np.abs(got2)) > 0.3  # the reflection actually fired


class TestGrowthRate:
    def _synthetic(self, sigma, steps=40):
        times = np.linspace(0.0, 2.0, steps + 1)
        norms = 0.7 * np.exp(sigma * times)
        grid = Grid.uniform(4)
        return SimResult(grid=grid, times=times, snapshots=[],
                         control_trace=np.zeros(steps + 1), l2_trace=norms,
                         linf_trace=norms)

    def test_exact_exponential(self):
        res = self._synthetic(1.37)
        assert growth_rate(res, (0.0, 2.0)) == pytest.approx(1.37, abs=1e-6)

    def test_negative_rate(self):
        res = self._synthetic(-0.8)
        assert growth_rate(res, (0.5, 2.0)) == pytest.approx(-0.8, abs=1e-6)

    def test_too_few_snapshots(self):
        res = self._synthetic(1.0, steps=10)
        with pytest.raises(UndefinedRateError):
            growth_rate(res, (0.0, 0.1))

    def test_zero_norm(self):
        res = self._synthetic(1.0)
        res.l2_trace[5] = 0.0
        with pytest.raises(UndefinedRateError):
            growth_rate(res, (0.0, 2.0))


class TestConsistencyChain:
    def test_physical_vs_canonical(self):
        speeds = SpeedPair.build(CoefficientSpec.polynomial([-1.0, -0.25]),
                                 CoefficientSpec.polynomial([1.2, 0.5]))
        a, b = const(0.4), const(0.8)
        c, d = CoefficientSpec.polynomial([0.5, 1.0]), const(-0.3)
        system = make_system(speeds, a=a, b=b, c=c, d=d)
        T = 0.8
        errs = []
        for n in (150, 300):
            grid = Grid.uniform(n)
            gauge = diag_removal(a, b, c, d, speeds, grid)
            K = solve_kernels(gauge, speeds, None, grid)
            g = trace_g(K, speeds)
            y10 = smooth_bump(grid.nodes, 0.5, 0.2)
            y20 = smooth_bump(grid.nodes, 0.4, 0.15)
            sim = simulate(system, None, (y10, y20), T, grid, cfl=0.9)

            def to_hat(y1, y2):
                return volterra_apply(K, gauge.e1 * y1, gauge.e2 * y2)

            yh0 = to_hat(y10, y20)
            uhat_vals = np.array([to_hat(s1, s2)[0][n] for s1, s2 in sim.snapshots])
            uhat = lambda s: np.interp(s, sim.times, uhat_vals)
            yh_sim = to_hat(*sim.snapshots[-1])
            yh_exact = canonical_solution(speeds, g, 0.0, yh0, uhat, T, grid.nodes)
            errs.append(math.sqrt(np.trapezoid(
                (yh_sim[0] - yh_exact[0]) ** 2 + (yh_sim[1] - yh_exact[1]) ** 2,
                dx=grid.h)))
        assert errs[0] <= 0.01
        assert errs[1] <= 0.75 * errs[0]


class TestExport:
    def test_csv_output(self, unit_speeds, tmp_path):
        grid = Grid.uniform(20)
        system = make_system(unit_speeds)
        y0 = (np.sin(grid.nodes), np.cos(grid.nodes))
        sim = simulate(system, None, y0, 0.2, grid)
        files = export_sim_csv(sim, tmp_path, max_snapshots=4)
        assert (tmp_path / "timeseries.csv").exists()
        assert (tmp_path / "snapshots.csv").exists()
        assert sum(1 for f in files if "snapshot_" in str(f)) == 4
        header = (tmp_path / "timeseries.csv").read_text().splitlines()[0]
        assert header == "t,u,l2_norm,linf_norm"
