import numpy as np
import pytest

from sovkit import kernel
from sovkit.errors import NonGenericError


def random_poly(rng, deg):
    # coefficients uniform in the unit disk, nonzero leading coefficient
    c = np.sqrt(rng.uniform(0.05, 1.0, deg + 1)) * np.exp(2j * np.pi * rng.uniform(size=deg + 1))
    return c


class TestPolyRoots:
    def test_quadratic_symmetry(self):
        roots, mults = kernel.poly_roots(np.array([1.0, 0.0, 1.0]))
        assert np.allclose(sorted(roots, key=lambda r: r.imag), [-1j, 1j], atol=1e-12)
        assert list(mults) == [1, 1]

    def test_triple_root(self):
        # (xi - 2)^3 = -8 + 12 xi - 6 xi^2 + xi^3
        roots, mults = kernel.poly_roots(np.array([-8.0, 12.0, -6.0, 1.0]))
        assert roots.size == 1
        assert mults[0] == 3
        assert abs(roots[0] - 2.0) < 1e-8

    @pytest.mark.parametrize("seed", range(6))
    def test_random_degree_10_residuals(self, seed):
        rng = np.random.default_rng(seed)
        c = random_poly(rng, 10)
        roots, mults = kernel.poly_roots(c)
        assert mults.sum() == 10
        resid = np.abs(kernel.poly_eval(c, roots))
        assert np.all(resid < 1e-10 * np.abs(c).max() * np.maximum(1.0, np.abs(roots)) ** 10)

    def test_matches_numpy_roots(self):
        rng = np.random.default_rng(42)
        c = random_poly(rng, 7)
        ours, _ = kernel.poly_roots(c)
        ref = np.sort_complex(np.roots(c[::-1]))
        assert np.allclose(np.sort_complex(ours), ref, atol=1e-8)

    def test_zero_polynomial(self):
        with pytest.raises(ValueError, match="undefined roots"):
            kernel.poly_roots(np.zeros(4))

    def test_multiplicity_sum_property(self):
        rng = np.random.default_rng(3)
        for deg in (2, 3, 5, 8):
            c = random_poly(rng, deg)
            roots, mults = kernel.poly_roots(c)
            assert mults.sum() == deg
            # self-consistency: the char poly vanishes on its own roots
            assert np.all(np.abs(kernel.poly_eval(c, roots)) < 1e-9)


class TestCharAdj:
    def test_identity_3x3(self):
        c = kernel.char_bipoly(np.eye(3))
        # (1 - xi)^3
        assert np.allclose(c, [1.0, -3.0, 3.0, -1.0])

    def test_diagonal(self):
        c = kernel.char_bipoly(np.diag([1.0, 2.0]))
        assert np.allclose(c, [2.0, -3.0, 1.0])

    def test_random_4x4_against_det(self):
        rng = np.random.default_rng(0)
        M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        c = kernel.char_bipoly(M)
        for xi in rng.standard_normal(5) + 1j * rng.standard_normal(5):
            direct = np.linalg.det(M - xi * np.eye(4))
            ours = kernel.poly_eval(c, xi)
            assert abs(ours - direct) < 1e-10 * max(1.0, abs(direct))

    def test_char_roots_are_eigenvalues(self):
        rng = np.random.default_rng(7)
        M = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        roots, _ = kernel.poly_roots(kernel.char_bipoly(M))
        eigs = np.sort_complex(np.linalg.eigvals(M))
        assert np.allclose(np.sort_complex(roots), eigs, atol=1e-8)

    def test_adjugate_identity_cases(self):
        assert np.allclose(kernel.adjugate(np.eye(3)), np.eye(3))
        a, b, c, d = 1.3, -0.2 + 1j, 2.0j, 0.7
        M = np.array([[a, b], [c, d]])
        assert np.allclose(kernel.adjugate(M), [[d, -b], [-c, a]])

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_adjugate_times_matrix(self, n):
        rng = np.random.default_rng(n)
        for _ in range(25):
            M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            adj = kernel.adjugate(M)
            det = np.linalg.det(M)
            resid = np.linalg.norm(adj @ M - det * np.eye(n))
            assert resid < 1e-10 * np.linalg.norm(M) ** 3

    def test_adjugate_rank_one_on_singular(self):
        rng = np.random.default_rng(5)
        B = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        C = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        M = B @ C  # rank 3 = n - 1
        s = np.linalg.svd(kernel.adjugate(M), compute_uv=False)
        assert s[0] > 1e-6
        assert np.all(s[1:] < 1e-8 * s[0])


class TestMatpolyCharAdj:
    def test_matches_pointwise_eval(self):
        rng = np.random.default_rng(1)
        r, n = 3, 2
        cm = rng.standard_normal((n + 1, r, r)) + 1j * rng.standard_normal((n + 1, r, r))
        C, A = kernel.matpoly_char_adj(cm)
        for _ in range(5):
            z = rng.standard_normal() + 1j * rng.standard_normal()
            xi = rng.standard_normal() + 1j * rng.standard_normal()
            M = sum(cm[k] * z ** k for k in range(n + 1)) - xi * np.eye(r)
            det_direct = np.linalg.det(M)
            det_ours = sum(kernel.poly_eval(C[k], z) * xi ** k for k in range(r + 1))
            assert abs(det_ours - det_direct) < 1e-9 * max(1.0, abs(det_direct))
            adj_direct = kernel.adjugate(M)
            adj_ours = np.zeros((r, r), dtype=complex)
            for k in range(r):
                for i in range(r):
                    for j in range(r):
                        adj_ours[i, j] += kernel.poly_eval(A[k][i][j], z) * xi ** k
            assert np.allclose(adj_ours, adj_direct, atol=1e-8)


class TestResultant:
    def test_linear_case(self):
        # res_xi(xi - a(z), xi - b(z)) = +-(a(z) - b(z))
        a = np.array([1.0, 2.0, 0.5])
        b = np.array([-0.5, 1.0])
        p = np.zeros((2, 3), dtype=complex)
        p[0, :] = -a
        p[1, 0] = 1.0
        q = np.zeros((2, 3), dtype=complex)
        q[0, :2] = -b
        q[1, 0] = 1.0
        res = kernel.resultant(p, q, "xi")
        diff = kernel.poly_trim(a - np.pad(b, (0, 1)))
        match_plus = np.allclose(res, diff, atol=1e-12)
        match_minus = np.allclose(res, -diff, atol=1e-12)
        assert match_plus or match_minus

    def test_constructed_common_root(self):
        rng = np.random.default_rng(2)
        z0, xi0 = 0.3 - 0.2j, 1.1 + 0.4j
        # p = (xi - xi0)(xi - (z + 1)),  q = (xi - xi0)(xi + z**2) at z = z0 share xi0
        p = np.zeros((3, 2), dtype=complex)
        p[2, 0] = 1.0
        p[1, 0] = -xi0 - 1.0
        p[1, 1] = -1.0
        p[0, 0] = xi0
        p[0, 1] = xi0
        q = np.zeros((3, 3), dtype=complex)
        q[2, 0] = 1.0
        q[1, 0] = -xi0
        q[1, 2] = 1.0
        q[0, 2] = -xi0
        res = kernel.resultant(p, q, "xi")
        # the common root is engineered for every z, so the resultant vanishes at z0
        assert abs(kernel.poly_eval(res, z0)) < 1e-9

    def test_roots_against_common_root_search(self):
        rng = np.random.default_rng(11)
        p = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        q = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
        res = kernel.resultant(p, q, "xi")
        roots, _ = kernel.poly_roots(res)
        # oracle: at each resultant root the two xi-slices share a root (via numpy)
        for z in roots:
            pc = kernel.poly_eval(p.T, z)  # xi-coefficients at this z (ascending)
            qc = kernel.poly_eval(q.T, z)
            pr = np.roots(pc[::-1])
            qr = np.roots(qc[::-1])
            gap = np.min(np.abs(pr[:, None] - qr[None, :]))
            assert gap < 1e-6
        # oracle completeness: a brute common root must show up in the resultant roots
        zs = rng.standard_normal(200) + 1j * rng.standard_normal(200)
        for z in zs:
            pc = kernel.poly_eval(p.T, z)
            qc = kernel.poly_eval(q.T, z)
            gap = np.min(np.abs(np.roots(pc[::-1])[:, None] - np.roots(qc[::-1])[None, :]))
            if gap < 1e-8:
                assert np.min(np.abs(roots - z)) < 1e-6

    def test_degenerate_raises(self):
        p = np.zeros((1, 3), dtype=complex)
        p[0] = [1.0, 2.0, 3.0]
        with pytest.raises(NonGenericError, match="resultant degenerate"):
            kernel.resultant(p, p, "xi")


class TestBiPoly:
    def test_eval_and_partials(self):
        rng = np.random.default_rng(4)
        c = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        z, xi = 0.3 + 0.1j, -0.7 + 0.9j
        direct = sum(c[k, l] * xi ** k * z ** l for k in range(3) for l in range(4))
        assert abs(kernel.bipoly_eval(c, z, xi) - direct) < 1e-12
        h = 1e-6
        dxi_fd = (kernel.bipoly_eval(c, z, xi + h) - kernel.bipoly_eval(c, z, xi - h)) / (2 * h)
        dz_fd = (kernel.bipoly_eval(c, z + h, xi) - kernel.bipoly_eval(c, z - h, xi)) / (2 * h)
        assert abs(kernel.bipoly_eval(kernel.bipoly_dxi(c), z, xi) - dxi_fd) < 1e-7
        assert abs(kernel.bipoly_eval(kernel.bipoly_dz(c), z, xi) - dz_fd) < 1e-7
