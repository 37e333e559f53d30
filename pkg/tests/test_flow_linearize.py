import warnings

import numpy as np
import pytest

from sovkit import kernel, linearize
from sovkit import rational as R


@pytest.fixture(scope="module")
def instance_r2_n2():
    rng = np.random.default_rng(5)
    phi = R.random_instance(2, 2, rng)
    spec = R.BracketSpec(a=(1.0,), b=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hams, cass = R.casimir_detect(phi, spec)
    return phi, spec, hams, cass


@pytest.fixture(scope="module")
def instance_r2_n3():
    rng = np.random.default_rng(21)
    phi = R.random_instance(2, 3, rng)
    spec = R.BracketSpec(a=(1.0,), b=0.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        hams, _ = R.casimir_detect(phi, spec)
    return phi, spec, hams


class TestFlow:
    def test_casimir_flow_is_constant(self, instance_r2_n2):
        phi, spec, _, cass = instance_r2_n2
        traj = R.flow(phi, cass[0], spec, np.linspace(0.0, 1.0, 4))
        drift = max(np.abs(p.flatten() - phi.flatten()).max() for p in traj)
        assert drift < 1e-9

    def test_isospectrality(self, instance_r2_n2):
        phi, spec, hams, _ = instance_r2_n2
        base = R.spectral_curve(phi).grid
        scale = max(1.0, np.abs(base).max())
        for pos in hams:
            traj = R.flow(phi, pos, spec, np.linspace(0.0, 1.0, 5))
            drift = max(np.abs(R.spectral_curve(p).grid - base).max() for p in traj)
            assert drift / scale < 1e-8

    def test_flows_commute(self, instance_r2_n2):
        phi, spec, hams, _ = instance_r2_n2
        ta, tb = 0.2, 0.3
        ab = R.flow(R.flow(phi, hams[0], spec, [0, ta])[-1], hams[1], spec, [0, tb])[-1]
        ba = R.flow(R.flow(phi, hams[1], spec, [0, tb])[-1], hams[0], spec, [0, ta])[-1]
        assert np.abs(ab.flatten() - ba.flatten()).max() < 1e-6

    def test_invalid_position_raises(self, instance_r2_n2):
        phi, spec, _, _ = instance_r2_n2
        with pytest.raises(ValueError, match="spectral coefficient"):
            R.flow(phi, (5, 0), spec, [0.0, 1.0])


class TestPaths:
    def test_straight_path_when_clear(self):
        pts = linearize.build_path(0.0, 1.0, np.array([2.0 + 2.0j]))
        assert pts == [0.0, 1.0]

    def test_detour_inserted(self):
        bp = np.array([0.5 + 0.0j])
        pts = linearize.build_path(0.0, 1.0, bp)
        assert len(pts) == 3
        dist = min(abs(w - bp[0]) for w in pts)
        assert dist > 1e-2

    def test_base_point_clear_of_branch_points(self):
        bps = np.array([1.0, -1.0, 1j, -1j])
        z0 = linearize.pick_base_point(bps)
        assert np.min(np.abs(z0 - bps)) > 0.5


class TestLinearize:
    def test_path_independence(self, instance_r2_n3):
        phi, spec, hams = instance_r2_n3
        curve = R.spectral_curve(phi)
        disc = kernel.resultant(curve.grid, curve.dxi(), "xi")
        bps, _ = kernel.poly_roots(disc)
        d = R.divisor_coords(phi)
        z0 = linearize.pick_base_point(bps)
        integrand = linearize._conjugate_integrand(curve, spec, hams)
        ze, xe = d.z[0], d.xi[0]
        direct = linearize._integral_to_point(
            curve, integrand, z0, ze, xe, bps, linearize.DEFAULT)
        mid = 0.5 * (z0 + ze) + 0.35j * (ze - z0)
        assert np.min(np.abs(mid - bps)) > 0.15
        path = (linearize.build_path(z0, mid, bps)
                + linearize.build_path(mid, ze, bps)[1:])
        total, xi_fin = linearize.sheet_integrals(curve, integrand, path)
        sheet = int(np.argmin(np.abs(xi_fin - xe)))
        assert np.abs(direct - total[:, sheet]).max() < 1e-8

    def test_affine_in_time_with_identity_slopes(self, instance_r2_n3):
        phi, spec, hams = instance_r2_n3
        times = np.linspace(0.0, 0.3, 9)
        traj = R.flow(phi, hams[0], spec, times)
        res = linearize.linearize(traj, times, spec, hams)
        assert res.fit_residuals.max() < 1e-5
        expected = np.zeros(len(hams))
        expected[0] = 1.0
        assert np.abs(res.slopes - expected).max() < 1e-6

    def test_generating_function_gradient(self, instance_r2_n3):
        phi, spec, hams = instance_r2_n3
        curve = R.spectral_curve(phi)
        disc = kernel.resultant(curve.grid, curve.dxi(), "xi")
        bps, _ = kernel.poly_roots(disc)
        d = R.divisor_coords(phi)
        z0 = linearize.pick_base_point(bps)
        qs = linearize.abel_sums(curve, spec, d, hams, z0, bps)

        def f_of(grid):
            c2 = R.SpectralCurve(grid=grid, r=2, n=3)
            return linearize.generating_value(c2, spec, d, z0, bps)

        delta = 1e-6
        for idx, (k, l) in enumerate(hams):
            gp = curve.grid.copy()
            gm = curve.grid.copy()
            gp[k, l] += delta
            gm[k, l] -= delta
            fd = (f_of(gp) - f_of(gm)) / (2 * delta)
            assert abs(fd - qs[idx]) < 1e-6

    def test_generating_function_quadratic_bracket(self):
        # b != 0 route: the log-tracked primitive must agree with the
        # quadrature formula as well
        rng = np.random.default_rng(33)
        phi = R.random_instance(2, 2, rng)
        spec = R.BracketSpec(a=(0.0,), b=1.0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            hams, _ = R.casimir_detect(phi, spec)
        curve = R.spectral_curve(phi)
        disc = kernel.resultant(curve.grid, curve.dxi(), "xi")
        bps, _ = kernel.poly_roots(disc)
        d = R.divisor_coords(phi)
        z0 = linearize.pick_base_point(bps)
        qs = linearize.abel_sums(curve, spec, d, hams, z0, bps)

        def f_of(grid):
            c2 = R.SpectralCurve(grid=grid, r=2, n=2)
            return linearize.generating_value(c2, spec, d, z0, bps)

        delta = 1e-6
        for idx, (k, l) in enumerate(hams):
            gp = curve.grid.copy()
            gm = curve.grid.copy()
            gp[k, l] += delta
            gm[k, l] -= delta
            fd = (f_of(gp) - f_of(gm)) / (2 * delta)
            assert abs(fd - qs[idx]) < 1e-6

    def test_shrinking_time_window_shrinks_residual(self, instance_r2_n3):
        phi, spec, hams = instance_r2_n3
        resids = []
        for t_max in (0.08, 0.04):
            times = np.linspace(0.0, t_max, 9)
            traj = R.flow(phi, hams[1], spec, times)
            res = linearize.linearize(traj, times, spec, hams)
            resids.append(res.fit_residuals.max())
        assert resids[1] <= resids[0] * 1.5 + 1e-12
