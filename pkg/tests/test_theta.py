import mpmath as mp
import numpy as np
import pytest

from sovkit import theta as T
from sovkit.errors import NumericDomainError
from sovkit.numeric import PathSpec

TAUS = (1j, 0.2 + 1.1j)


class TestRiemannTheta:
    @pytest.mark.parametrize("tau", TAUS)
    def test_against_mpmath(self, tau):
        # theta(z | tau) = jtheta(3, pi z, exp(pi i tau))
        params = T.ThetaParams(tau=tau, r=2)
        rng = np.random.default_rng(0)
        q = mp.exp(1j * mp.pi * mp.mpc(tau))
        for _ in range(10):
            z = complex(rng.standard_normal() * 2, rng.standard_normal() * 2)
            ours = T.riemann_theta(z, params)
            ref = complex(mp.jtheta(3, mp.pi * mp.mpc(z), q))
            assert abs(ours - ref) < 1e-12 * max(1.0, abs(ref))

    @pytest.mark.parametrize("tau", TAUS)
    def test_zero_at_half_periods(self, tau):
        params = T.ThetaParams(tau=tau, r=3)
        assert abs(T.riemann_theta((1 + tau) / 2, params)) < 1e-12

    def test_periodicity_and_tau_shift(self):
        tau = 0.2 + 1.1j
        params = T.ThetaParams(tau=tau, r=2)
        rng = np.random.default_rng(1)
        for _ in range(10):
            z = complex(rng.standard_normal(), rng.standard_normal())
            v = T.riemann_theta(z, params)
            assert abs(T.riemann_theta(z + 1, params) - v) < 1e-12 * max(1, abs(v))
            fac = np.exp(-1j * np.pi * tau - 2j * np.pi * z)
            v2 = T.riemann_theta(z + tau, params)
            assert abs(v2 - fac * v) < 1e-12 * max(1.0, abs(v2))

    def test_even_function(self):
        params = T.ThetaParams(tau=1j, r=2)
        rng = np.random.default_rng(2)
        for _ in range(8):
            z = complex(rng.standard_normal(), rng.standard_normal())
            v1 = T.riemann_theta(z, params)
            v2 = T.riemann_theta(-z, params)
            assert abs(v1 - v2) < 1e-12 * max(1.0, abs(v1))

    def test_truncation_converged(self):
        for tau in TAUS:
            p1 = T.ThetaParams(tau=tau, r=2)
            p2 = T.ThetaParams(tau=tau, r=2, trunc=2 * p1.trunc)
            z = 0.3 + 0.21j
            v1, v2 = T.riemann_theta(z, p1), T.riemann_theta(z, p2)
            assert abs(v1 - v2) < 1e-15 * max(1.0, abs(v2))

    def test_derivative_matches_fd(self):
        params = T.ThetaParams(tau=0.2 + 1.1j, r=2)
        z = 0.17 - 0.23j
        h = 1e-6
        fd = (T.riemann_theta(z + h, params) - T.riemann_theta(z - h, params)) / (2 * h)
        assert abs(T.theta_deriv(z, params) - fd) < 1e-7

    def test_tau_guard(self):
        with pytest.raises(NumericDomainError, match="tau too degenerate"):
            T.ThetaParams(tau=0.5 + 0.01j, r=2)


class TestShiftedFamilies:
    @pytest.mark.parametrize("r", [2, 3, 4, 5])
    @pytest.mark.parametrize("tau", TAUS)
    def test_translation_relations(self, r, tau):
        params = T.ThetaParams(tau=tau, r=r)
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(4):
            z = complex(rng.uniform(-0.4, 0.4), rng.uniform(-0.3, 0.3))
            for k in range(r):
                for j in range(r):
                    for fam, shift in (
                            (T.theta_kj, (k + j * tau) / r),
                            (T.xi_kj, (2 * k - 1 + (2 * j - 1) * tau) / (2 * r))):
                        v0 = fam(z, k, j, params)
                        sc = max(1.0, abs(v0))
                        worst = max(worst, abs(fam(z + 3.0, k, j, params) - v0) / sc)
                        fac = np.exp(-1j * np.pi * tau - 2j * np.pi * (z + shift))
                        v1 = fam(z + tau, k, j, params)
                        worst = max(worst, abs(v1 - fac * v0) / max(1.0, abs(v1)))
                        if k < r - 1:
                            worst = max(worst, abs(fam(z + 1 / r, k, j, params)
                                                   - fam(z, k + 1, j, params)) / sc)
                        if j < r - 1:
                            worst = max(worst, abs(fam(z + tau / r, k, j, params)
                                                   - fam(z, k, j + 1, params)) / sc)
            for k in range(r):
                # wrap-around relations for both families
                v0 = T.theta_kj(z, k, 0, params)
                fac = np.exp(-1j * np.pi * tau - 2j * np.pi * (z + k / r))
                v1 = T.theta_kj(z + tau / r, k, r - 1, params)
                worst = max(worst, abs(v1 - fac * v0) / max(1.0, abs(v1)))
                w0 = T.xi_kj(z, k, 0, params)
                facx = np.exp(-1j * np.pi * tau
                              - 2j * np.pi * (z + (2 * k - 1 - tau) / (2 * r)))
                w1 = T.xi_kj(z + tau / r, k, r - 1, params)
                worst = max(worst, abs(w1 - facx * w0) / max(1.0, abs(w1)))
        assert worst < 1e-12

    def test_index_range(self):
        params = T.ThetaParams(tau=1j, r=3)
        with pytest.raises(IndexError, match="index out of range"):
            T.theta_kj(0.1, 3, 0, params)
        with pytest.raises(IndexError, match="index out of range"):
            T.xi_kj(0.1, 0, -1, params)

    def test_rho_values_r3(self):
        assert [T.rho_shift(j, 3) for j in range(3)] == [1.0, 0.0, -1.0]


class TestProducts:
    @pytest.mark.parametrize("r", [2, 3, 4])
    @pytest.mark.parametrize("tau", TAUS)
    def test_period_relations(self, r, tau):
        params = T.ThetaParams(tau=tau, r=r)
        _, I2 = T.i_matrices(r)
        rng = np.random.default_rng(4)
        worst = 0.0
        used = 0
        while used < 6:
            z = (rng.uniform(0.02, 0.44) + rng.uniform(0.08, 0.44) * tau) / r
            pts = (z, z + 1.0 / r, z + tau / r)
            if any(T.puncture_distance(w, params) < 3e-2 for w in pts):
                continue
            F0 = T.f_vector(z, params)
            scale = np.abs(F0).max()
            worst = max(worst, np.abs(T.f_vector(z + 1.0 / r, params) - F0).max() / scale)
            worst = max(worst, np.abs(T.f_vector(z + tau / r, params) - I2 @ F0).max() / scale)
            used += 1
        assert worst < 1e-10

    def test_parity_argument_checked(self):
        params = T.ThetaParams(tau=1j, r=3)
        assert complex(T.f_component(0.1377 + 0.2j, 0, params, parity="odd"))
        with pytest.raises(ValueError, match="parity"):
            T.f_component(0.1, 0, params, parity="even")

    def test_puncture_guard(self):
        params = T.ThetaParams(tau=1j, r=3)
        with pytest.raises(NumericDomainError, match="pole"):
            T.f_component(params.puncture, 0, params)

    @pytest.mark.parametrize("r", [2, 3])
    def test_pole_structure_at_puncture(self, r):
        # f_j = zeta^{-1} (holomorphic)^r near the puncture: zeta * f_j tends
        # to a finite limit along 4 radial directions, and when that limit is
        # zero (the hol part vanishes there) the order is exactly r - 1
        tau = 0.2 + 1.1j
        params = T.ThetaParams(tau=tau, r=r)
        p = params.puncture
        for j in range(r):
            limits = []
            for direction in np.exp(1j * np.array([0.4, 1.9, 3.5, 5.2])):
                vals = []
                for eps in (1e-4, 1e-5):
                    zeta = eps * direction
                    vals.append(zeta * T.f_component(p + zeta, j, params, guard=False))
                scale = max(abs(vals[1]), 1e-10)
                assert abs(vals[0] - vals[1]) < 1e-2 * scale + 1e-8
                limits.append(vals[1])
            mags = np.abs(limits)
            if mags.max() < 1e-8:
                zero_vals = [abs(T.f_component(p + eps, j, params, guard=False))
                             / eps ** (r - 1) for eps in (1e-4, 1e-5)]
                assert zero_vals[1] > 1e-10
                assert abs(zero_vals[0] - zero_vals[1]) < 1e-2 * zero_vals[1]
            else:
                assert mags.min() > 1e-10


class TestBasicSection:
    @pytest.mark.parametrize("r", [2, 3, 4, 5])
    @pytest.mark.parametrize("tau", TAUS)
    def test_roots_relations(self, r, tau):
        params = T.ThetaParams(tau=tau, r=r)
        q = params.q_root
        I1, I2 = T.i_matrices(r)
        trk = T.SectionTracker(params)
        z0 = trk.anchor
        s0 = trk.value_at(z0)
        # invariant: values^r = f
        f0 = T.f_vector(z0, params)
        assert np.abs(s0 ** r - f0).max() < 1e-10 * np.abs(f0).max()
        # horizontal: s_i(z + 1/r) = q^i s_i(z)
        s1 = trk.value_at(z0 + 1.0 / r)
        assert np.abs(s1 / s0 - q ** np.arange(r)).max() < 1e-8
        # vertical: s(z + tau/r) = I2 s(z)
        trk2 = T.SectionTracker(params)
        s0b = trk2.value_at(z0)
        s2 = trk2.value_at(z0 + tau / r)
        assert np.abs(s2 - I2 @ s0b).max() < 1e-8 * np.abs(s0b).max()

    def test_monodromy_around_puncture(self):
        params = T.ThetaParams(tau=1j, r=3)
        r = params.r
        trk = T.SectionTracker(params)
        z0 = trk.anchor
        s0 = trk.value_at(z0)
        p = params.puncture
        # square loop enclosing exactly one puncture
        rad = 0.45 / r
        loop = [p + rad, p + rad * 1j, p - rad, p - rad * 1j, p + rad]
        start = loop[0]
        trk.value_at(start)
        for w in loop[1:]:
            trk.value_at(w)
        s_back = trk.value_at(start)
        trk_ref = T.SectionTracker(params)
        s_ref = trk_ref.value_at(start)
        ratio = s_back / s_ref
        q = params.q_root
        powers = np.round(np.angle(ratio) / (2 * np.pi / r)).astype(int) % r
        assert np.abs(ratio - q ** powers.astype(float)).max() < 1e-8
        assert len(set(powers.tolist())) == 1  # one global root of unity
        # repeating the same loop gives the same root (homotopy invariance)
        for w in loop[1:]:
            trk.value_at(w)
        s_back2 = trk.value_at(start)
        ratio2 = s_back2 / s_back
        assert np.abs(ratio2 - ratio).max() < 1e-8

    def test_contractible_loop_is_trivial(self):
        params = T.ThetaParams(tau=1j, r=3)
        trk = T.SectionTracker(params)
        z0 = trk.anchor
        s0 = trk.value_at(z0)
        for w in (z0 + 0.02, z0 + 0.02 + 0.02j, z0 + 0.02j, z0):
            trk.value_at(w)
        s1 = trk.value_at(z0)
        assert np.abs(s1 - s0).max() < 1e-10 * np.abs(s0).max()

    def test_basic_section_path_validation(self):
        params = T.ThetaParams(tau=1j, r=2)
        trk = T.SectionTracker(params)
        target = trk.anchor + 0.1
        sample = T.basic_section(target, params)
        assert sample.values.shape == (2,)
        with pytest.raises(ValueError, match="start at the section anchor"):
            T.basic_section(target, params, path=PathSpec((0.9 + 0.9j, target)))


class TestIMatrices:
    def test_r2_explicit(self):
        I1, I2 = T.i_matrices(2)
        assert np.allclose(I1, np.diag([1.0, -1.0]))
        assert np.allclose(I2, [[0.0, 1.0], [1.0, 0.0]])

    @pytest.mark.parametrize("r", [2, 3, 4, 5, 6])
    def test_braiding_and_orders(self, r):
        I1, I2 = T.i_matrices(r)
        q = np.exp(2j * np.pi / r)
        # direct multiplication oracle: I2 I1 = q I1 I2
        assert np.abs(I2 @ I1 - q * I1 @ I2).max() < 1e-12
        assert np.abs(np.linalg.matrix_power(I1, r) - np.eye(r)).max() < 1e-12
        assert np.abs(np.linalg.matrix_power(I2, r) - np.eye(r)).max() < 1e-12

    def test_r1_trivial(self):
        I1, I2 = T.i_matrices(1)
        assert np.allclose(I1, [[1.0]])
        assert np.allclose(I2, [[1.0]])
