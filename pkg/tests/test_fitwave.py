import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from paraexp import fitwave
from paraexp.fitwave import EPS0, MU0, FitGrid, WaveSourceConfig
from paraexp.steppers import integrate

SMALL = FitGrid(5, 5, 2)
ODD = FitGrid(4, 3, 3, dx=0.5, dy=2.0, dz=1.5)


def loop_curl(grid):
    """Circulations around each facet, written out edge by edge."""
    rows, cols, vals = [], [], []
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    row = 0

    def add(sign, axis, ix, iy, iz):
        rows.append(row)
        cols.append(grid.edge_index(axis, ix, iy, iz))
        vals.append(sign)

    for iz in range(nz - 1):  # x-normal facets, loop in the (y, z) plane
        for iy in range(ny - 1):
            for ix in range(nx):
                add(+1, 1, ix, iy, iz)
                add(+1, 2, ix, iy + 1, iz)
                add(-1, 1, ix, iy, iz + 1)
                add(-1, 2, ix, iy, iz)
                row += 1
    for iz in range(nz - 1):  # y-normal facets, loop in the (z, x) plane
        for iy in range(ny):
            for ix in range(nx - 1):
                add(+1, 2, ix, iy, iz)
                add(+1, 0, ix, iy, iz + 1)
                add(-1, 2, ix + 1, iy, iz)
                add(-1, 0, ix, iy, iz)
                row += 1
    for iz in range(nz):  # z-normal facets, loop in the (x, y) plane
        for iy in range(ny - 1):
            for ix in range(nx - 1):
                add(+1, 0, ix, iy, iz)
                add(+1, 1, ix + 1, iy, iz)
                add(-1, 0, ix, iy + 1, iz)
                add(-1, 1, ix, iy, iz)
                row += 1
    return sp.coo_matrix((vals, (rows, cols)), shape=(row, grid.n_edges)).toarray()


def clipped_width(k, n, h):
    lo, hi = max(0.0, (k - 0.5) * h), min((n - 1) * h, (k + 0.5) * h)
    return hi - lo


class TestCurl:
    @pytest.mark.parametrize("grid", [SMALL, ODD, FitGrid(2, 2, 2)])
    def test_matches_loop_construction(self, grid):
        np.testing.assert_array_equal(fitwave.build_curl(grid).to_dense(), loop_curl(grid))

    def test_four_unit_entries_per_facet(self):
        c = fitwave.build_curl(FitGrid()).to_scipy()
        assert np.all(np.diff(c.indptr) == 4)
        assert set(np.unique(c.data)) == {-1.0, 1.0}
        assert np.all(np.asarray(c.sum(axis=1)).ravel() == 0)

    @pytest.mark.parametrize("grid", [SMALL, ODD, FitGrid()])
    def test_curl_of_gradient_vanishes(self, grid):
        cg = fitwave.build_curl(grid).to_scipy() @ fitwave.build_gradient(grid).to_scipy()
        assert abs(cg).max() == 0

    def test_uniform_field_has_no_circulation(self):
        grid = ODD
        e = np.zeros(grid.n_edges)
        for axis, h in enumerate((grid.dx, grid.dy, grid.dz)):
            e[grid.edge_slice(axis)] = 3.0 * h  # uniform field (3, 3, 3) V/m
        np.testing.assert_array_equal(fitwave.build_curl(grid).to_scipy() @ e, 0.0)

    def test_sizes(self):
        grid = FitGrid()
        assert grid.n_edges == 2121
        assert grid.n_facets == 1640
        assert fitwave.build_curl(grid).shape == (1640, 2121)

    def test_edge_index_roundtrip(self):
        grid = ODD
        for axis in range(3):
            pos = grid.edge_positions(axis)
            idx = [grid.edge_index(axis, *p) for p in pos]
            assert idx == list(range(grid.edge_slice(axis).start, grid.edge_slice(axis).stop))
        with pytest.raises(IndexError):
            grid.edge_index(0, 3, 0, 0)


class TestMaterials:
    def test_unit_grid_examples(self):
        m_eps, m_mu = fitwave.build_materials(FitGrid(3, 3, 2), eps=1.0, mu=1.0)
        grid = FitGrid(3, 3, 2)
        # interior x-edge at (0, 1, 0): dual facet 1 x 0.5, length 1
        assert m_eps[grid.edge_index(0, 0, 1, 0)] == 0.5
        # corner x-edge: dual facet 0.5 x 0.5
        assert m_eps[grid.edge_index(0, 0, 0, 0)] == 0.25
        # centre z-edge: dual facet 1 x 1
        assert m_eps[grid.edge_index(2, 1, 1, 0)] == 1.0
        # z-facets (area 1) with a half dual edge in z
        assert np.all(m_mu[-4:] == 2.0)

    @pytest.mark.parametrize("grid", [ODD, SMALL])
    def test_against_geometry(self, grid):
        eps, mu = 2.0, 3.0
        m_eps, m_mu = fitwave.build_materials(grid, eps, mu)
        n = (grid.nx, grid.ny, grid.nz)
        h = (grid.dx, grid.dy, grid.dz)
        k = 0
        for axis in range(3):
            for pos in grid.edge_positions(axis):
                others = [a for a in range(3) if a != axis]
                area = np.prod([clipped_width(pos[a], n[a], h[a]) for a in others])
                assert m_eps[k] == pytest.approx(eps * area / h[axis], rel=1e-14)
                k += 1
        k = 0
        for axis, shape in enumerate(grid.facet_shapes()):
            sx, sy, sz = shape
            for iz in range(sz):
                for iy in range(sy):
                    for ix in range(sx):
                        pos = (ix, iy, iz)
                        others = [a for a in range(3) if a != axis]
                        area = np.prod([h[a] for a in others])
                        dual = clipped_width(pos[axis], n[axis], h[axis])
                        assert m_mu[k] == pytest.approx(mu * area / dual, rel=1e-14)
                        k += 1

    def test_positive(self):
        with pytest.raises(ValueError):
            fitwave.build_materials(SMALL, eps=0.0)


class TestPec:
    def test_lateral_z_edges_masked(self):
        grid = FitGrid()
        mask = fitwave.boundary_edge_mask(grid)[grid.edge_slice(2)]
        pos = grid.edge_positions(2)
        lateral = (pos[:, 0] % 20 == 0) | (pos[:, 1] % 20 == 0)
        np.testing.assert_array_equal(mask, lateral)
        assert (~mask).sum() == 361

    def test_tiny_grid_fully_masked(self):
        assert fitwave.boundary_edge_mask(FitGrid(2, 2, 2)).all()

    def test_masked_columns_removed(self):
        ops = fitwave.apply_pec(fitwave.build_operators(SMALL))
        c = ops.c.to_dense()
        assert not c[:, ops.pec_mask].any()
        np.testing.assert_array_equal(ops.c_dual.to_dense(), c.T)

    def test_full_system_size(self):
        sys = fitwave.build_wave_system()
        assert sys.n == 3761
        assert sys.a.nnz == 2888

    def test_masked_edges_stay_zero_under_rk4(self):
        sys = fitwave.build_wave_system()
        sol = integrate(sys, (0, 2e-7), 2e-9)
        assert len(sol) == 101
        _, e = sys.structure.split(sol.states)
        assert not e[:, sys.structure.pec_mask].any()
        assert np.abs(e).max() > 0

    def test_source_on_boundary_rejected(self):
        with pytest.raises(ValueError, match="PEC"):
            fitwave.build_wave_system(SMALL, WaveSourceConfig(location=(SMALL.edge_index(2, 0, 0, 0),)))


class TestSource:
    def test_line_current_values(self):
        cfg = WaveSourceConfig()
        assert fitwave.line_current(2e-8) == 1.0
        assert fitwave.line_current(0.0) == pytest.approx(math.exp(-4), rel=1e-14)
        assert fitwave.line_current(0.0) == pytest.approx(0.018315638888734, rel=1e-12)
        assert fitwave.line_current(4e-8, cfg) == pytest.approx(math.exp(-4), rel=1e-14)
        np.testing.assert_allclose(fitwave.line_current(np.array([1e-8, 3e-8])), math.exp(-1))

    def test_scaled_amplitude(self):
        assert fitwave.line_current(2e-8, WaveSourceConfig(i_max=2.5)) == 2.5

    def test_support_is_centre_edge(self):
        sys = fitwave.build_wave_system()
        g = sys.g(2e-8)
        (idx,) = np.nonzero(g)
        ops = sys.structure
        assert list(idx - ops.n_h) == [FitGrid().edge_index(2, 10, 10, 0)]
        assert g[idx[0]] == pytest.approx(-1.0 / ops.m_eps[idx[0] - ops.n_h], rel=1e-15)


class TestStructure:
    def test_mass_weighted_operator_is_skew(self):
        sys = fitwave.build_wave_system(SMALL)
        ma = sp.diags(sys.structure.mass()) @ sys.a.to_scipy()
        assert abs(ma + ma.T).max() <= 1e-12 * abs(ma).max()

    def test_stiffness_relation(self):
        sys = fitwave.build_wave_system(SMALL)
        ops = sys.structure
        np.testing.assert_allclose(sys.a.to_dense(),
                                   -ops.stiffness().to_dense() / ops.mass()[:, None], rtol=1e-15)

    def test_spectrum_is_imaginary(self):
        sys = fitwave.build_wave_system(SMALL)
        lam = np.linalg.eigvals(sys.a.to_dense())
        scale = np.abs(lam).max()
        assert np.abs(lam.real).max() <= 1e-9 * scale
        # highest resonance of a unit-cell cavity is below 2 sqrt(3) c per metre
        assert scale < 2 * math.sqrt(3) / math.sqrt(EPS0 * MU0)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**31))
    def test_energy_rate_equals_source_power(self, seed):
        sys = fitwave.build_wave_system(SMALL)
        ops = sys.structure
        u = np.random.default_rng(seed).standard_normal(sys.n)
        t = 1.3e-8
        rate = np.sum(ops.mass() * u * sys.rhs(t, u))
        _, e = ops.split(u)
        j = -ops.m_eps * ops.split(sys.g(t))[1]
        assert rate == pytest.approx(-np.dot(e, j), rel=1e-9, abs=1e-9 * np.abs(e * j).sum())


class TestDiagnostics:
    def test_energy_examples(self):
        ops = fitwave.apply_pec(fitwave.build_operators(SMALL, eps=1.0, mu=1.0))
        assert fitwave.energy(np.zeros(ops.n_e), np.zeros(ops.n_h), ops) == 0.0
        e = np.zeros(ops.n_e)
        e[SMALL.edge_index(2, 2, 2, 0)] = 2.0
        assert fitwave.energy(e, np.zeros(ops.n_h), ops) == 2.0
        h = np.ones(ops.n_h)
        assert fitwave.energy(np.zeros(ops.n_e), h, ops) == 0.5 * ops.m_mu.sum()

    def test_state_energy_matches(self):
        ops = fitwave.apply_pec(fitwave.build_operators(SMALL))
        states = np.random.default_rng(0).standard_normal((3, ops.n))
        expected = [fitwave.energy(s[ops.n_h:], s[:ops.n_h], ops) for s in states]
        np.testing.assert_allclose(fitwave.state_energy(states, ops), expected, rtol=1e-14)

    def test_energy_shape_check(self):
        ops = fitwave.build_operators(SMALL)
        with pytest.raises(ValueError):
            fitwave.energy(np.zeros(3), np.zeros(ops.n_h), ops)

    def test_snapshot_layout(self):
        grid = FitGrid(3, 3, 2, dz=0.5)
        ops = fitwave.build_operators(grid)
        e = np.arange(ops.n_e, dtype=float)
        snap = fitwave.ez_snapshot(e, ops)
        assert snap.shape == (9, 4)
        k = grid.edge_index(2, 2, 1, 0)
        row = snap[2 + 3 * 1]
        np.testing.assert_array_equal(row, [2, 1, 0, e[k] / 0.5])


class TestPhysics:
    def test_energy_conserved_after_pulse(self):
        grid = FitGrid(7, 7, 2)
        sys = fitwave.build_wave_system(grid)
        sol = integrate(sys, (0, 1.6e-7), 2.5e-10)
        en = fitwave.state_energy(sol.states, sys.structure)
        tail = en[sol.times >= 4 * 2e-8]
        assert tail[0] > 0
        assert np.ptp(tail) <= 1e-6 * tail[0]

    def test_fourfold_symmetry(self):
        grid = FitGrid(11, 11, 2)
        sys = fitwave.build_wave_system(grid)
        sol = integrate(sys, (0, 6e-8), 2e-9)
        ez = sys.structure.split(sol.final)[1][grid.edge_slice(2)].reshape(11, 11)
        scale = np.abs(ez).max()
        assert scale > 0
        for image in (ez[::-1, :], ez[:, ::-1], ez.T):
            np.testing.assert_allclose(image, ez, atol=1e-12 * scale)

    @pytest.mark.parametrize("nsteps", [1, 3, 5])
    def test_discrete_domain_of_dependence(self, nsteps):
        # each RK4 step applies A at most four times and A^2 couples only
        # neighbouring z-edges, so the field spreads at most two cells per step
        grid = FitGrid()
        sys = fitwave.build_wave_system(grid)
        dt = 2e-9
        sol = integrate(sys, (0, nsteps * dt), dt)
        ez = sys.structure.split(sol.final)[1][grid.edge_slice(2)]
        pos = grid.edge_positions(2)
        dist = np.abs(pos[:, 0] - 10) + np.abs(pos[:, 1] - 10)
        assert not ez[dist >= 2 * nsteps].any()
        assert ez[dist == 2 * nsteps - 1].any()
