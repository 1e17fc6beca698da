import numpy as np
import pytest
import scipy.linalg

import backheat as bh
from backheat.errors import ConfigurationError, NumericalError

from conftest import disk_setup, interval_setup, random_field


class TestAssemble1D:
    def test_smallest_stencil(self):
        g = bh.build_grid_1d(1.0, 2)
        gen = bh.assemble_1d(g, d=1.0)
        dx = 0.5
        expected = np.array([
            [-1 / dx, 1 / dx, 0.0],
            [1 / dx**2, -2 / dx**2, 1 / dx**2],
            [0.0, 1 / dx, -1 / dx],
        ])
        np.testing.assert_allclose(gen.matrix, expected)

    def test_constant_in_kernel(self, rng):
        g = bh.build_grid_1d(1.0, 12)
        gen = bh.assemble_1d(g)
        c = rng.standard_normal()
        np.testing.assert_allclose(gen.matrix @ np.full(g.n_dofs, c), 0.0, atol=1e-12)

    def test_eigenvalue_growth(self):
        # independent oracle: general (non-symmetric) dense eigensolver on -A
        g = bh.build_grid_1d(1.0, 25)
        gen = bh.assemble_1d(g)
        lam = np.sort(scipy.linalg.eigvals(-gen.matrix).real)
        assert abs(lam[0]) <= 1e-10
        ratios = [lam[k] / k**2 for k in range(1, 13)]
        assert min(ratios) > 1.0 and max(ratios) < 10.0

    def test_potentials_enter_diagonal(self):
        g = bh.build_grid_1d(1.0, 4)
        a = np.array([2.0, 3.0, 4.0])
        b = np.array([5.0, 6.0])
        gen = bh.assemble_1d(g, d=1.0, a=a, b=b)
        base = bh.assemble_1d(g, d=1.0)
        np.testing.assert_allclose(np.diag(base.matrix - gen.matrix),
                                   [5.0, 2.0, 3.0, 4.0, 6.0])
        assert gen.potential_bound == 6.0

    def test_wrong_potential_size(self):
        g = bh.build_grid_1d(1.0, 4)
        with pytest.raises(ConfigurationError):
            bh.assemble_1d(g, a=np.zeros(7))

    def test_self_adjoint_in_weighted_product(self, rng):
        grid, gen, _ = interval_setup(nx=25, a=0.3, b=0.7)
        scale = np.abs(gen.matrix).max()
        for _ in range(5):
            u, v = random_field(grid, rng), random_field(grid, rng)
            defect = abs(
                bh.inner_product(bh.StateField(grid, gen.matrix @ u.values), v)
                - bh.inner_product(u, bh.StateField(grid, gen.matrix @ v.values))
            )
            assert defect <= 1e-10 * scale * bh.norm(u) * bh.norm(v)


class TestAssemble2D:
    def test_constant_in_kernel(self):
        g = bh.build_polar_grid(6, 9)
        gen = bh.assemble_2d(g)
        np.testing.assert_allclose(gen.matrix @ np.ones(g.n_dofs), 0.0, atol=1e-11)

    def test_axisymmetric_circle_row(self):
        # for a theta-independent field the circle row must reduce to the
        # pure normal flux, the surface diffusion terms cancel
        g = bh.build_polar_grid(5, 8)
        gen = bh.assemble_2d(g, d=2.0, gamma=3.0)
        radial = np.cos(g.radii)
        Ay = gen.matrix @ radial
        expected = -2.0 * (np.cos(1.0) - np.cos(1.0 - g.dr)) / g.dr
        np.testing.assert_allclose(Ay[g.boundary_indices], expected, rtol=1e-12)

    def test_symmetry_defect_reported(self, rng):
        grid, gen, _ = disk_setup(nr=8, ntheta=8)
        defect = bh.weighted_symmetry_defect(gen)
        assert 0.0 < defect < np.abs(gen.matrix).max()
        u, v = random_field(grid, rng), random_field(grid, rng)
        pairing_defect = abs(
            bh.inner_product(bh.StateField(grid, gen.matrix @ u.values), v)
            - bh.inner_product(u, bh.StateField(grid, gen.matrix @ v.values))
        ) / (bh.norm(u) * bh.norm(v))
        assert np.isfinite(pairing_defect)
        print(f"disk 8x8 pairing defect on random fields: {pairing_defect:.3e}")

    def test_1d_defect_is_zero(self):
        _, gen, _ = interval_setup(nx=25)
        assert bh.weighted_symmetry_defect(gen) <= 1e-12

    def test_origin_stencil(self):
        g = bh.build_polar_grid(4, 8)
        gen = bh.assemble_2d(g, d=1.5)
        y = np.zeros(g.n_dofs)
        y[0] = 2.0
        ring = [g.index(1, n) for n in range(8)]
        y[ring] = 5.0
        # origin row: 4*d*(ring mean - origin)/dr^2
        assert gen.matrix[0] @ y == pytest.approx(4 * 1.5 * (5.0 - 2.0) / g.dr**2, rel=1e-12)


class TestSolveForward:
    def test_zero_initial(self, interval_small):
        grid, gen, stepper = interval_small
        out = bh.solve_forward(gen, bh.StateField.zeros(grid), stepper)
        np.testing.assert_array_equal(out.values, 0.0)

    @pytest.mark.parametrize("setup", [interval_setup, disk_setup])
    def test_constant_invariance(self, setup):
        grid, gen, stepper = setup()
        c = 2.75
        out = bh.solve_forward(gen, bh.StateField(grid, np.full(grid.n_dofs, c)), stepper)
        np.testing.assert_allclose(out.values, c, rtol=1e-12)

    def test_eigenmode_matches_scalar_recurrence(self):
        grid, gen, stepper = interval_setup(nx=10, T=0.05, nt=80)
        eig = bh.eigensystem(gen)
        k = 3
        lam = eig.eigenvalues[k]
        phi = eig.mode(k)
        out = bh.solve_forward(gen, phi, stepper)
        # oracle: the scalar Crank-Nicolson recurrence, stepped independently
        z = 1.0
        for _ in range(stepper.nt):
            z = z * (1.0 - 0.5 * stepper.dt * lam) / (1.0 + 0.5 * stepper.dt * lam)
        np.testing.assert_allclose(out.values, z * phi.values, atol=1e-10)

    def test_second_order_in_time(self):
        grid, gen, _ = interval_setup(nx=10, T=0.05)
        eig = bh.eigensystem(gen)
        lam = eig.eigenvalues[4]
        phi = eig.mode(4)
        errs = []
        for nt in (20, 40):
            stepper = bh.TimeStepper(T=0.05, nt=nt)
            out = bh.solve_forward(gen, phi, stepper)
            errs.append(bh.norm(out - np.exp(-lam * 0.05) * phi))
        assert errs[0] / errs[1] >= 3.5

    def test_trajectory_bookkeeping(self, interval_small):
        grid, gen, stepper = interval_small
        f = bh.field_from_function(grid, lambda x: x * (1 - x))
        traj = bh.solve_forward(gen, f, stepper, keep_trajectory=True)
        assert len(traj) == stepper.nt + 1
        np.testing.assert_array_equal(traj.values[0], f.values)
        final = bh.solve_forward(gen, f, stepper)
        np.testing.assert_array_equal(traj.final.values, final.values)
        np.testing.assert_allclose(traj.times, np.linspace(0, stepper.T, stepper.nt + 1))

    def test_energy_dissipates_with_nonnegative_potentials(self, rng):
        for setup, kw in ((interval_setup, dict(a=0.5, b=1.0)),
                          (disk_setup, dict(a=0.2, b=0.4))):
            grid, gen, stepper = setup(**kw)
            traj = bh.solve_forward(gen, random_field(grid, rng), stepper,
                                    keep_trajectory=True)
            norms = np.sqrt((traj.values**2) @ grid.weights.total)
            assert np.all(norms[1:] <= norms[:-1] + 1e-12)

    def test_rejects_mismatched_field(self, interval_small):
        _, gen, stepper = interval_small
        other = bh.build_grid_1d(1.0, 5)
        with pytest.raises(ConfigurationError):
            bh.solve_forward(gen, bh.StateField.zeros(other), stepper)

    def test_nan_initial_aborts(self, interval_small):
        grid, gen, stepper = interval_small
        bad = np.zeros(grid.n_dofs)
        bad[1] = np.nan
        with pytest.raises(NumericalError, match="step 0"):
            bh.solve_forward(gen, bh.StateField(grid, bad), stepper)

    def test_singular_step_matrix_reported(self):
        grid, gen, stepper = interval_setup(nx=4, T=1.0, nt=1)
        # force I - dt/2 A = 0 exactly
        singular = bh.Generator(
            matrix=(2.0 / stepper.dt) * np.eye(grid.n_dofs),
            grid=grid, d=1.0, gamma=0.0, a=np.zeros(3), b=np.zeros(2),
        )
        with pytest.raises(NumericalError, match="singular"):
            bh.solve_forward(singular, bh.StateField.zeros(grid), stepper)


class TestSolveAdjoint:
    def test_zero_terminal(self, disk_small):
        grid, gen, stepper = disk_small
        out = bh.solve_adjoint(gen, bh.StateField.zeros(grid), stepper)
        np.testing.assert_array_equal(out.values, 0.0)

    def test_constant_invariance(self, interval_small):
        grid, gen, stepper = interval_small
        out = bh.solve_adjoint(gen, bh.StateField(grid, np.full(grid.n_dofs, -1.5)), stepper)
        np.testing.assert_allclose(out.values, -1.5, rtol=1e-12)

    @pytest.mark.parametrize("setup,kw", [
        (interval_setup, dict(nx=4)),
        (interval_setup, dict(nx=25)),
        (interval_setup, dict(nx=9, a=0.4, b=0.9)),
        (disk_setup, dict(nr=8, ntheta=8)),
        (disk_setup, dict(nr=5, ntheta=6, a=0.3, b=0.2)),
    ])
    def test_duality_identity(self, setup, kw, rng):
        # the algebraic Green identity of the discretization, exact at
        # machine precision for every grid, potential, and step count
        grid, gen, stepper = setup(**kw)
        for _ in range(4):
            g, v = random_field(grid, rng), random_field(grid, rng)
            lhs = bh.inner_product(bh.solve_forward(gen, g, stepper), v)
            rhs = bh.inner_product(g, bh.solve_adjoint(gen, v, stepper))
            assert abs(lhs - rhs) <= 1e-10 * bh.norm(g) * bh.norm(v)

    def test_adjoint_equals_forward_on_interval(self, interval_small, rng):
        # in 1-D the generator is exactly self-adjoint, so both solves agree
        grid, gen, stepper = interval_small
        f = random_field(grid, rng)
        fwd = bh.solve_forward(gen, f, stepper)
        adj = bh.solve_adjoint(gen, f, stepper)
        np.testing.assert_allclose(adj.values, fwd.values, rtol=1e-11, atol=1e-13)


class TestConcurrency:
    def test_concurrent_solves_on_shared_generator(self, rng):
        # regression: stepping must stay matvec-only so threads sharing one
        # generator cannot corrupt state (per-step LAPACK solves did)
        from concurrent.futures import ThreadPoolExecutor

        grid, gen, stepper = disk_setup(nr=8, ntheta=8, nt=60)
        fields = [random_field(grid, rng) for _ in range(6)]
        expected = [bh.solve_forward(gen, f, stepper).values for f in fields]

        def job(f):
            out = bh.solve_forward(gen, f, stepper)
            back = bh.solve_adjoint(gen, out, stepper)
            return out.values, back.values

        for _ in range(3):
            with ThreadPoolExecutor(max_workers=4) as pool:
                results = list(pool.map(job, fields))
            for (got, _), want in zip(results, expected):
                np.testing.assert_array_equal(got, want)


class TestTimeStepper:
    def test_validation(self):
        with pytest.raises(ConfigurationError):
            bh.TimeStepper(T=0.0, nt=10)
        with pytest.raises(ConfigurationError):
            bh.TimeStepper(T=1.0, nt=0)

    def test_dt(self):
        assert bh.TimeStepper(T=0.03, nt=100).dt == pytest.approx(3e-4)

    def test_apply_io_alias(self, interval_small, rng):
        grid, gen, stepper = interval_small
        f = random_field(grid, rng)
        np.testing.assert_array_equal(
            bh.apply_io(gen, stepper, f).values,
            bh.solve_forward(gen, f, stepper).values,
        )
