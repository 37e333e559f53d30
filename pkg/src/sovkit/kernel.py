"""Complex polynomial and small-matrix kernel.

Conventions used across the package:

* a univariate polynomial is a 1-D ``complex128`` array of coefficients in
  ascending degree order (``c[k]`` multiplies ``x**k``);
* a bivariate polynomial is a 2-D grid ``c[k, l]`` multiplying ``xi**k z**l``;
* matrices are small (r <= 8) dense ``complex128`` arrays.

Everything here is a pure function of its inputs.
"""

import numpy as np
import numpy.polynomial.polynomial as npoly

from .errors import ConvergenceError, NonGenericError
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "poly_trim", "poly_eval", "poly_scale", "poly_mul", "poly_add", "poly_sub",
    "poly_der", "poly_roots", "char_bipoly", "adjugate", "matpoly_char_adj",
    "bipoly_trim", "bipoly_eval", "bipoly_dxi", "bipoly_dz", "resultant",
]


# ---------------------------------------------------------------------------
# univariate polynomials
# ---------------------------------------------------------------------------

def poly_trim(c, tol: Tolerances = DEFAULT):
    """Drop trailing coefficients below ``zero_trim * max|c|``.

    The zero polynomial is canonically the empty array.
    """
    c = np.atleast_1d(np.asarray(c, dtype=complex))
    if c.size == 0:
        return c
    top = np.abs(c).max()
    if top == 0.0:
        return c[:0]
    thresh = tol.zero_trim * top
    k = c.size - 1
    while k >= 0 and abs(c[k]) <= thresh:
        k -= 1
    return c[: k + 1].copy()


def poly_eval(c, x):
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return np.zeros(np.shape(x), dtype=complex) if np.ndim(x) else 0.0 + 0.0j
    return npoly.polyval(x, c)


def poly_scale(c, s):
    return np.asarray(c, dtype=complex) * s


def poly_mul(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0 or b.size == 0:
        return np.zeros(0, dtype=complex)
    return npoly.polymul(a, b)


def poly_add(a, b):
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.size == 0:
        return b.copy()
    if b.size == 0:
        return a.copy()
    return npoly.polyadd(a, b)


def poly_sub(a, b):
    return poly_add(a, poly_scale(b, -1.0) if np.asarray(b).size else b)


def poly_der(c):
    c = np.asarray(c, dtype=complex)
    if c.size <= 1:
        return np.zeros(0, dtype=complex)
    return npoly.polyder(c)


def _eval_scale(c, x):
    """Backward-error scale sum |c_k| |x|^k, floored at the max coefficient."""
    mags = npoly.polyval(np.abs(x), np.abs(np.asarray(c, dtype=complex)))
    return np.maximum(mags, np.abs(c).max())


# ---------------------------------------------------------------------------
# roots: Aberth--Ehrlich simultaneous iteration with multiplicity detection
# ---------------------------------------------------------------------------

def _aberth(monic, tol: Tolerances, rng, max_iter=400):
    deg = monic.size - 1
    dmonic = poly_der(monic)
    radius = 1.0 + np.abs(monic[:-1]).max()
    best = None
    best_res = np.inf
    for attempt in range(4):
        ang = 2.0 * np.pi * (np.arange(deg) + 0.37) / deg
        jitter = 1.0 + 0.05 * attempt * rng.standard_normal(deg)
        z = radius * jitter * np.exp(1j * (ang + 0.1 * attempt * rng.standard_normal(deg)))
        for _ in range(max_iter):
            pv = poly_eval(monic, z)
            res = np.abs(pv) / _eval_scale(monic, z)
            if np.all(res <= tol.root_residual):
                return z
            dv = poly_eval(dmonic, z)
            dv = np.where(dv == 0, 1e-300, dv)
            newton = pv / dv
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            srec = np.sum(1.0 / diff, axis=1) - 1.0  # subtract the diagonal 1/1
            denom = 1.0 - newton * srec
            denom = np.where(np.abs(denom) < 1e-300, 1e-300, denom)
            step = newton / denom
            bad = ~np.isfinite(step)
            if bad.any():
                step = np.where(bad, 0.0, step)
                z = z + 1e-3 * radius * rng.standard_normal(deg) * bad
            z = z - step
        worst = np.max(np.abs(poly_eval(monic, z)) / _eval_scale(monic, z))
        if worst < best_res:
            best_res, best = worst, z.copy()
    raise ConvergenceError("root iteration did not converge", best=best)


def _polish_on_derivative(monic, c0, order):
    """Newton-polish ``c0`` on the ``order``-th derivative (simple root there)."""
    p = monic
    for _ in range(order):
        p = poly_der(p)
    dp = poly_der(p)
    c = c0
    for _ in range(60):
        pv = poly_eval(p, c)
        dv = poly_eval(dp, c)
        if dv == 0:
            break
        step = pv / dv
        c = c - step
        if abs(step) <= 1e-15 * max(1.0, abs(c)):
            break
    return c


def _validate_cluster(monic, center, m, tol: Tolerances):
    """Accept ``center`` as an m-fold root if p and its first m-1 derivatives vanish."""
    c = _polish_on_derivative(monic, center, m - 1)
    p = monic
    for j in range(m):
        resid = abs(poly_eval(p, c)) / _eval_scale(p, c)
        limit = 10.0 * tol.root_residual if j == 0 else 1e-7
        if resid > limit:
            return None
        p = poly_der(p)
    return c


def poly_roots(p, tol: Tolerances = DEFAULT, seed: int = 0):
    """All roots of ``p`` with multiplicity tags.

    Returns ``(roots, mults)`` with ``sum(mults) == deg(p)``. Raises
    ``ValueError("undefined roots")`` for the zero polynomial and
    ``ConvergenceError`` (carrying the best iterate) if the simultaneous
    iteration stalls.
    """
    c = poly_trim(p, tol)
    if c.size == 0:
        raise ValueError("undefined roots")
    deg = c.size - 1
    if deg == 0:
        return np.zeros(0, dtype=complex), np.zeros(0, dtype=int)
    monic = c / c[-1]
    if deg == 1:
        return np.array([-monic[0]]), np.array([1])

    rng = np.random.default_rng(seed)
    z = _aberth(monic, tol, rng)
    scale = max(1.0, np.abs(z).max())

    # agglomerative clustering with adaptive acceptance radius: a candidate
    # m-cluster of double-precision iterates spreads like root_residual**(1/m),
    # and a pair inside a higher cluster spreads at the higher rate, hence the
    # m+1 exponent; false merges are rejected by the derivative validation
    clusters = [[zi] for zi in z]
    centers = [zi for zi in z]
    merged = True
    while merged and len(clusters) > 1:
        merged = False
        nc = len(clusters)
        for i in range(nc):
            for j in range(i + 1, nc):
                m = len(clusters[i]) + len(clusters[j])
                m_eff = min(m + 1, deg)
                radius = scale * (10.0 * tol.root_residual ** (1.0 / m_eff) + tol.root_cluster)
                if abs(centers[i] - centers[j]) <= radius:
                    cand = clusters[i] + clusters[j]
                    ok = _validate_cluster(monic, np.mean(cand), m, tol)
                    if ok is not None:
                        clusters[i] = cand
                        centers[i] = ok
                        del clusters[j], centers[j]
                        merged = True
                        break
            if merged:
                break

    roots = np.array(centers)
    mults = np.array([len(cl) for cl in clusters], dtype=int)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order], mults[order]


# ---------------------------------------------------------------------------
# characteristic polynomial and adjugate (Faddeev--LeVerrier, division-free)
# ---------------------------------------------------------------------------

def char_bipoly(M):
    """Coefficients of det(M - xi*I) in ascending powers of xi.

    Division-free Faddeev--LeVerrier scheme; the leading coefficient is
    exactly (-1)**r.
    """
    M = np.asarray(M, dtype=complex)
    r = M.shape[0]
    if M.shape != (r, r):
        raise ValueError("matrix must be square")
    b = np.zeros(r + 1, dtype=complex)
    b[r] = 1.0
    N = np.eye(r, dtype=complex)
    for k in range(1, r + 1):
        Mk = M @ N
        bk = -np.trace(Mk) / k
        b[r - k] = bk
        N = Mk + bk * np.eye(r)
    return (-1.0) ** r * b


def adjugate(M):
    """Adjugate (matrix of cofactors transposed): adj(M) @ M = det(M) * I."""
    M = np.asarray(M, dtype=complex)
    r = M.shape[0]
    if M.shape != (r, r):
        raise ValueError("matrix must be square")
    if r == 1:
        return np.eye(1, dtype=complex)
    N = np.eye(r, dtype=complex)
    for k in range(1, r):
        Mk = M @ N
        bk = -np.trace(Mk) / k
        N = Mk + bk * np.eye(r)
    return (-1.0) ** (r - 1) * N


# --- the same recursions over the ring C[z] -------------------------------

def _pm_zero(r):
    return [[np.zeros(0, dtype=complex) for _ in range(r)] for _ in range(r)]


def _pm_eye(r, value=1.0):
    out = _pm_zero(r)
    for i in range(r):
        out[i][i] = np.array([value], dtype=complex)
    return out


def _pm_mul(A, B):
    r = len(A)
    out = _pm_zero(r)
    for i in range(r):
        for j in range(r):
            acc = np.zeros(0, dtype=complex)
            for k in range(r):
                acc = poly_add(acc, poly_mul(A[i][k], B[k][j]))
            out[i][j] = acc
    return out


def _pm_add_diag(A, c):
    r = len(A)
    out = [[A[i][j].copy() for j in range(r)] for i in range(r)]
    for i in range(r):
        out[i][i] = poly_add(out[i][i], c)
    return out


def matpoly_char_adj(coeff_mats, tol: Tolerances = DEFAULT):
    """Characteristic data of a matrix polynomial phi(z).

    Parameters
    ----------
    coeff_mats : array (n+1, r, r)
        Coefficient matrices of phi(z) = sum_k coeff_mats[k] z**k.

    Returns
    -------
    C : list of 1-D arrays
        ``C[k]`` is the z-polynomial coefficient of xi**k in det(phi(z) - xi I).
    A : list of polynomial matrices
        ``adj(phi(z) - xi I) = sum_k A[k](z) xi**k`` with A[k] an (r, r) nested
        list of z-polynomials.
    """
    cm = np.asarray(coeff_mats, dtype=complex)
    _, r, _ = cm.shape
    phi = [[poly_trim(cm[:, i, j], tol) for j in range(r)] for i in range(r)]

    # Faddeev--LeVerrier for det(xi I - phi(z)) = xi^r + b_1 xi^{r-1} + ... + b_r
    b = [None] * (r + 1)
    N = _pm_eye(r)
    for k in range(1, r + 1):
        Mk = _pm_mul(phi, N)
        tr = np.zeros(0, dtype=complex)
        for i in range(r):
            tr = poly_add(tr, Mk[i][i])
        b[k] = poly_scale(tr, -1.0 / k)
        N = _pm_add_diag(Mk, b[k])

    sign = (-1.0) ** r
    C = [None] * (r + 1)
    C[r] = np.array([sign], dtype=complex)
    for k in range(1, r + 1):
        C[r - k] = poly_scale(b[k], sign)

    # adj(phi - xi I) = sum A_k xi^k:  A_{r-1} = (-1)^{r+1} I,
    # A_{k-1} = A_k . phi - C_k I  (k = r-1 .. 1)
    A = [None] * r
    A[r - 1] = _pm_eye(r, (-1.0) ** (r + 1))
    for k in range(r - 1, 0, -1):
        A[k - 1] = _pm_add_diag(_pm_mul(A[k], phi), poly_scale(C[k], -1.0))
    return C, A


# ---------------------------------------------------------------------------
# bivariate polynomials: grids c[k, l] ~ xi^k z^l
# ---------------------------------------------------------------------------

def bipoly_trim(c, tol: Tolerances = DEFAULT):
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    top = np.abs(c).max() if c.size else 0.0
    if top == 0.0:
        return np.zeros((1, 1), dtype=complex)
    thresh = tol.zero_trim * top
    rows = np.where((np.abs(c) > thresh).any(axis=1))[0]
    cols = np.where((np.abs(c) > thresh).any(axis=0))[0]
    return c[: rows.max() + 1, : cols.max() + 1].copy()


def bipoly_eval(c, z, xi):
    """Evaluate sum c[k, l] xi^k z^l (vectorized over broadcastable z, xi)."""
    c = np.asarray(c, dtype=complex)
    z = np.asarray(z, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    inner = npoly.polyval(z, c.T)        # inner[k, ...] = sum_l c[k,l] z^l
    out = np.zeros(np.broadcast(z, xi).shape, dtype=complex)
    for k in range(c.shape[0] - 1, -1, -1):
        out = out * xi + inner[k]
    return out


def bipoly_dxi(c):
    c = np.asarray(c, dtype=complex)
    if c.shape[0] <= 1:
        return np.zeros((1, c.shape[1]), dtype=complex)
    return c[1:, :] * np.arange(1, c.shape[0])[:, None]


def bipoly_dz(c):
    c = np.asarray(c, dtype=complex)
    if c.shape[1] <= 1:
        return np.zeros((c.shape[0], 1), dtype=complex)
    return c[:, 1:] * np.arange(1, c.shape[1])[None, :]


def _xi_degree(c, tol: Tolerances):
    c = np.asarray(c, dtype=complex)
    top = np.abs(c).max()
    if top == 0.0:
        return -1
    rows = np.where((np.abs(c) > tol.zero_trim * top).any(axis=1))[0]
    return int(rows.max()) if rows.size else -1


def resultant(p, q, eliminate="xi", tol: Tolerances = DEFAULT):
    """Sylvester resultant of two bivariate polynomials.

    Eliminates ``xi`` (grid axis 0) or ``z`` (axis 1) and returns a 1-D
    polynomial in the surviving variable.  Uses evaluation at scaled roots of
    unity plus FFT interpolation, which keeps the Vandermonde system unitary.
    """
    p = np.atleast_2d(np.asarray(p, dtype=complex))
    q = np.atleast_2d(np.asarray(q, dtype=complex))
    if eliminate == "z":
        p, q = p.T, q.T
    elif eliminate != "xi":
        raise ValueError("eliminate must be 'xi' or 'z'")
    dp, dq = _xi_degree(p, tol), _xi_degree(q, tol)
    if dp < 1 or dq < 1:
        raise NonGenericError("resultant degenerate")
    p = p[: dp + 1]
    q = q[: dq + 1]
    degz = (p.shape[1] - 1, q.shape[1] - 1)
    bound = dp * degz[1] + dq * degz[0]
    K = bound + 1
    zs = np.exp(2j * np.pi * np.arange(K) / K)
    vals = np.empty(K, dtype=complex)
    n = dp + dq
    for s, zval in enumerate(zs):
        pc = npoly.polyval(zval, p.T)    # coefficients in xi at z = zval
        qc = npoly.polyval(zval, q.T)
        S = np.zeros((n, n), dtype=complex)
        for row in range(dq):
            S[row, row: row + dp + 1] = pc[::-1]
        for row in range(dp):
            S[dq + row, row: row + dq + 1] = qc[::-1]
        vals[s] = np.linalg.det(S)
    coeffs = np.fft.fft(vals) / K
    return poly_trim(coeffs, tol)
