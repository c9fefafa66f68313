"""Anisotropic surface tensions and mobilities.

A surface tension sigma is positively 1-homogeneous, positive definite,
C^2 away from the origin, and uniformly convex (sigma^2 strongly convex).
Two families are supported:

* ``euclidean``   -- sigma(p) = |p|,
* ``bgn``         -- sigma(p) = (sum_l (p . G_l p)^(q/2))^(1/q) with
                     symmetric positive-definite matrices G_l and q >= 1.

All evaluations are vectorized over a trailing axis of length d, so the
same code serves single vectors and whole grids of gradient samples.
Mobilities share the representation; any admissible surface tension may
act as a mobility.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import InputError, InvariantViolation

# Number of unit directions used to cache min/max of sigma on the sphere.
_SPHERE_CACHE_SAMPLES = 10_000
# Uniform-convexity admission gate: min eigenvalue of D^2(sigma^2) on the
# sphere, sampled at construction.
_CONVEXITY_SAMPLES = 1_000
_CONVEXITY_FLOOR = 1e-8


def _unit_directions(d: int, m: int, rng=None) -> np.ndarray:
    """m unit vectors in R^d: equispaced angles for d=2, else seeded Gaussian."""
    if d == 2 and rng is None:
        ang = np.linspace(0.0, 2.0 * np.pi, m, endpoint=False)
        return np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    if rng is None:
        rng = np.random.default_rng(7041)
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


class Anisotropy:
    """An admissible surface tension with analytic value/gradient/Hessian.

    Parameters
    ----------
    kind : "euclidean" or "bgn"
    exponent : q >= 1, only for kind="bgn"
    matrices : array (L, d, d) of symmetric positive-definite matrices,
        only for kind="bgn"
    dim : space dimension, required for kind="euclidean"
    """

    def __init__(self, kind: str, exponent: float | None = None,
                 matrices=None, dim: int | None = None):
        if kind not in ("euclidean", "bgn"):
            raise InputError(f"unknown anisotropy kind {kind!r}")
        self.kind = kind
        if kind == "euclidean":
            if dim is None:
                raise InputError("euclidean anisotropy needs dim")
            self.d = int(dim)
            self.exponent = 2.0
            self.matrices = np.eye(self.d)[None]
        else:
            if exponent is None or matrices is None:
                raise InputError("bgn anisotropy needs exponent and matrices")
            if not np.isfinite(exponent) or exponent < 1.0:
                raise InputError(f"bgn exponent must be >= 1, got {exponent}")
            mats = np.asarray(matrices, dtype=float)
            if mats.ndim == 2:
                mats = mats[None]
            if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
                raise InputError("matrices must have shape (L, d, d)")
            for i, G in enumerate(mats):
                if not np.allclose(G, G.T, atol=1e-12):
                    raise InputError(f"matrix {i} is not symmetric")
                if np.linalg.eigvalsh(G)[0] <= 0.0:
                    raise InputError(f"matrix {i} is not positive definite")
            self.d = mats.shape[1]
            self.exponent = float(exponent)
            self.matrices = mats

        # sigma reduces to a single quadratic form sqrt(p.Gp) whenever q = 2
        # (matrices add) or L = 1 (the exponent cancels).
        self.is_quadratic = (kind == "euclidean" or self.exponent == 2.0
                             or self.matrices.shape[0] == 1)
        if self.is_quadratic:
            if self.exponent == 2.0:
                self.quad_matrix = self.matrices.sum(axis=0)
            else:
                self.quad_matrix = self.matrices[0]
            self.quad_matrix_inv = np.linalg.inv(self.quad_matrix)
            diag = np.diag(np.diag(self.quad_matrix))
            self.is_diagonal = np.allclose(self.quad_matrix, diag, atol=0.0)
        else:
            self.quad_matrix = None
            self.quad_matrix_inv = None
            self.is_diagonal = False

        self._check_uniform_convexity()

        dirs = _unit_directions(self.d, _SPHERE_CACHE_SAMPLES)
        vals = self.sigma(dirs)
        grads = self.dsigma(dirs)
        self.sigma_min = float(vals.min())
        self.sigma_max = float(vals.max())
        self.dsigma_max = float(np.linalg.norm(grads, axis=-1).max())
        if self.sigma_min <= 0.0:
            raise InvariantViolation("sigma is not positive on the sphere")

    # -- construction gates -------------------------------------------------

    def _check_uniform_convexity(self):
        """Sampled admission gate: D^2(sigma^2) >= floor on unit directions."""
        dirs = _unit_directions(self.d, _CONVEXITY_SAMPLES,
                                rng=np.random.default_rng(40961))
        s = self.sigma(dirs)[..., None, None]
        g = self.dsigma(dirs)
        H = self.d2sigma(dirs)
        # D^2(sigma^2) = 2 sigma D^2 sigma + 2 Dsigma (x) Dsigma
        hess_f = 2.0 * s * H + 2.0 * g[..., :, None] * g[..., None, :]
        mineig = np.linalg.eigvalsh(hess_f)[..., 0].min()
        if mineig <= _CONVEXITY_FLOOR:
            raise InvariantViolation(
                f"sigma^2 fails the uniform-convexity gate "
                f"(sampled min eigenvalue {mineig:.3e})")

    # -- pointwise evaluations ----------------------------------------------

    def _forms(self, p):
        """sigma_l(p) = sqrt(p . G_l p), shape (L,) + p.shape[:-1]."""
        return np.sqrt(np.maximum(
            np.einsum("lij,...i,...j->l...", self.matrices, p, p), 0.0))

    def sigma(self, p) -> np.ndarray:
        """sigma(p) >= 0, vectorized over the trailing axis; sigma(0) = 0."""
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise InputError("non-finite input to sigma")
        if self.is_quadratic:
            q = np.einsum("ij,...i,...j->...", self.quad_matrix, p, p)
            return np.sqrt(np.maximum(q, 0.0))
        sl = self._forms(p)
        return np.einsum("l...->...", sl ** self.exponent) ** (1.0 / self.exponent)

    def dsigma(self, p) -> np.ndarray:
        """Gradient of sigma; positively 0-homogeneous. Undefined at p = 0."""
        p = np.asarray(p, dtype=float)
        if not np.all(np.isfinite(p)):
            raise InputError("non-finite input to dsigma")
        nz = np.linalg.norm(p, axis=-1)
        if np.any(nz == 0.0):
            raise InputError("dsigma is singular at the origin")
        if self.is_quadratic:
            Gp = np.einsum("ij,...j->...i", self.quad_matrix, p)
            return Gp / self.sigma(p)[..., None]
        q = self.exponent
        sl = self._forms(p)                      # (L, ...)
        Gp = np.einsum("lij,...j->l...i", self.matrices, p)
        A = np.einsum("l...,l...i->...i", sl ** (q - 2.0), Gp)
        return self.sigma(p)[..., None] ** (1.0 - q) * A

    def d2sigma(self, p) -> np.ndarray:
        """Hessian of sigma; positively (-1)-homogeneous. Undefined at p = 0."""
        p = np.asarray(p, dtype=float)
        nz = np.linalg.norm(p, axis=-1)
        if np.any(nz == 0.0):
            raise InputError("d2sigma is singular at the origin")
        if self.is_quadratic:
            s = self.sigma(p)
            Gp = np.einsum("ij,...j->...i", self.quad_matrix, p)
            outer = Gp[..., :, None] * Gp[..., None, :]
            return (self.quad_matrix / s[..., None, None]
                    - outer / s[..., None, None] ** 3)
        q = self.exponent
        s = self.sigma(p)
        sl = self._forms(p)
        Gp = np.einsum("lij,...j->l...i", self.matrices, p)
        A = np.einsum("l...,l...i->...i", sl ** (q - 2.0), Gp)
        AA = A[..., :, None] * A[..., None, :]
        GpGp = Gp[..., :, None] * Gp[..., None, :]
        DA = (np.einsum("l...,l...ij->...ij", (q - 2.0) * sl ** (q - 4.0), GpGp)
              + np.einsum("l...,lij->...ij", sl ** (q - 2.0), self.matrices))
        return ((1.0 - q) * s[..., None, None] ** (1.0 - 2.0 * q) * AA
                + s[..., None, None] ** (1.0 - q) * DA)

    def df(self, p) -> np.ndarray:
        """Gradient of f = sigma^2, total on R^d with Df(0) = 0."""
        p = np.asarray(p, dtype=float)
        if self.is_quadratic:
            return 2.0 * np.einsum("ij,...j->...i", self.quad_matrix, p)
        out = np.zeros_like(p)
        r = np.linalg.norm(p, axis=-1)
        mask = r > 1e-14
        if np.any(mask):
            pm = p[mask]
            out[mask] = 2.0 * self.sigma(pm)[..., None] * self.dsigma(pm)
        return out

    def polar(self, x) -> np.ndarray:
        """Polar norm sigma°(x) = sup { p.x : sigma(p) <= 1 }.

        Closed form sqrt(x . G^-1 x) whenever sigma is a single quadratic
        form (euclidean, L = 1, or q = 2); otherwise projected gradient
        ascent on the sigma-unit sphere from 16 seeded starts.
        """
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite input to polar")
        if self.is_quadratic:
            q = np.einsum("ij,...i,...j->...", self.quad_matrix_inv, x, x)
            return np.sqrt(np.maximum(q, 0.0))
        return self._polar_ascent(x)

    def _polar_ascent(self, x, n_starts=16, tol=1e-10, max_iter=500):
        """Maximize p.x / sigma(p) over the unit sphere, batched over x."""
        squeeze = x.ndim == 1
        X = np.atleast_2d(x.reshape(-1, self.d))
        norms = np.linalg.norm(X, axis=-1)
        live = norms > 0.0
        out = np.zeros(X.shape[0])
        if np.any(live):
            out[live] = self._polar_ascent_live(X[live], n_starts, tol, max_iter)
        out = out.reshape(x.shape[:-1])
        return out[()] if squeeze else out

    def _polar_ascent_live(self, X, n_starts, tol, max_iter):
        rng = np.random.default_rng(271828)
        N = X.shape[0]
        starts = rng.standard_normal((n_starts - 1, 1, self.d))
        starts = starts / np.linalg.norm(starts, axis=-1, keepdims=True)
        P = np.broadcast_to(starts, (n_starts - 1, N, self.d)).copy()
        P = np.concatenate([(X / np.linalg.norm(X, axis=-1, keepdims=True))[None],
                            P], axis=0)
        step = np.full(P.shape[:2], 0.5)
        val = self._ratio(P, X)
        for _ in range(max_iter):
            g = (X[None] - val[..., None] * self.dsigma(P)) / self.sigma(P)[..., None]
            t = g - np.einsum("sn i,sn i->sn", g, P)[..., None] * P
            tnorm = np.linalg.norm(t, axis=-1)
            if tnorm.max() <= tol * max(1.0, float(np.abs(val).max())):
                break
            cand = P + step[..., None] * t
            cand /= np.linalg.norm(cand, axis=-1, keepdims=True)
            cval = self._ratio(cand, X)
            better = cval > val
            P = np.where(better[..., None], cand, P)
            val = np.where(better, cval, val)
            step = np.where(better, np.minimum(step * 1.2, 1.0), step * 0.5)
        else:
            raise InvariantViolation(
                f"polar ascent did not converge (residual {tnorm.max():.3e})")
        return val.max(axis=0)

    def _ratio(self, P, X):
        return np.einsum("...i,...i->...", P, np.broadcast_to(X, P.shape)) / self.sigma(P)

    # -- Wulff-shape geometry -------------------------------------------------

    def wulff_contains(self, x, r: float) -> np.ndarray:
        """True where sigma°(x) <= r (the Wulff shape of radius r)."""
        if r <= 0.0:
            raise InputError("Wulff radius must be positive")
        return self.polar(x) <= r

    def wulff_boundary_points(self, r: float, n: int) -> np.ndarray:
        """n points r * Dsigma(nu_k) on the Wulff boundary {sigma° = r}, d = 2."""
        if self.d != 2:
            raise InputError("wulff_boundary_points is implemented for d = 2")
        if r <= 0.0:
            raise InputError("Wulff radius must be positive")
        nu = _unit_directions(2, n)
        return r * self.dsigma(nu)


# A mobility shares the representation of a surface tension: any admissible
# Anisotropy may serve as one (positively 1-homogeneous, positive, Lipschitz
# on the sphere).
Mobility = Anisotropy


def euclidean(dim: int) -> Anisotropy:
    return Anisotropy("euclidean", dim=dim)


def bgn(exponent: float, matrices) -> Anisotropy:
    return Anisotropy("bgn", exponent=exponent, matrices=matrices)


class Cutoff:
    """Smooth cutoff psi: [0, inf) -> [0, 1], 0 on [0, 1/4], 1 on [1/2, inf).

    Realized as the unique quintic on [1/4, 1/2] with C^2 matching to the
    constants, i.e. the smoothstep 10 t^3 - 15 t^4 + 6 t^5 in the rescaled
    variable t = 4r - 1.  psi' >= 0 everywhere.
    """

    lo = 0.25
    hi = 0.5

    def psi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.clip((r - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return t ** 3 * (10.0 + t * (-15.0 + 6.0 * t))

    def dpsi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        t = np.clip((r - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return 30.0 * t ** 2 * (1.0 - t) ** 2 / (self.hi - self.lo)

    def __call__(self, r):
        return self.psi(r)


def cahn_hoffman_trunc(a: Anisotropy, c: Cutoff, xi) -> np.ndarray:
    """Truncated Cahn-Hoffman map F(xi) = |xi| psi(|xi|) Dsigma(xi), F(0) = 0.

    Total on R^d and globally Lipschitz; vanishes for |xi| <= 1/4 because
    psi does.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.linalg.norm(xi, axis=-1)
    out = np.zeros_like(xi)
    mask = r > c.lo
    if np.any(mask):
        xm = xi[mask]
        rm = r[mask]
        out[mask] = (rm * c.psi(rm))[..., None] * a.dsigma(xm)
    return out


def dziuk_gap(a: Anisotropy, c: Cutoff, p, pp) -> np.ndarray:
    """sigma(p) - F(pp) . p for |p| = 1, |pp| <= 1; nonnegative.

    The lower/upper bounds c_sigma |p-pp|^2 <= gap <= C_sigma (|p-pp|^2 +
    (1-|pp|)) hold with the constants from fit_dziuk_constants.
    """
    p = np.asarray(p, dtype=float)
    pp = np.asarray(pp, dtype=float)
    if np.any(np.abs(np.linalg.norm(p, axis=-1) - 1.0) > 1e-9):
        raise InputError("dziuk_gap requires |p| = 1")
    if np.any(np.linalg.norm(pp, axis=-1) > 1.0 + 1e-9):
        raise InputError("dziuk_gap requires |pp| <= 1")
    F = cahn_hoffman_trunc(a, c, pp)
    return a.sigma(p) - np.einsum("...i,...i->...", F, p)


@dataclasses.dataclass(frozen=True)
class DziukConstants:
    """Fitted sandwich constants for the truncated Cahn-Hoffman gap."""
    c_sigma: float
    C_sigma: float
    n_samples: int

    def __post_init__(self):
        if not (0.0 < self.c_sigma <= self.C_sigma):
            raise InvariantViolation(
                f"Dziuk constants out of order: c={self.c_sigma}, C={self.C_sigma}")


def _dziuk_sample_pairs(d: int, n_samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Sample pairs (p, pp), |p| = 1 and |pp| <= 1, biased toward pp near p
    and toward the unit sphere where the sandwich is tight."""
    p = rng.standard_normal((n_samples, d))
    p /= np.linalg.norm(p, axis=-1, keepdims=True)
    kind = rng.integers(0, 3, n_samples)
    dirs = rng.standard_normal((n_samples, d))
    dirs /= np.linalg.norm(dirs, axis=-1, keepdims=True)
    radii = rng.random(n_samples) ** (1.0 / d)
    pp = dirs * radii[:, None]
    # near-sphere samples
    near = kind == 1
    pp[near] = dirs[near] * (1.0 - 1e-3 * rng.random(near.sum()))[:, None]
    # perturbations of p itself (tight regime of the lower bound)
    close = kind == 2
    scale = rng.random(close.sum())
    pert = p[close] + 0.5 * rng.standard_normal((close.sum(), d))
    pert /= np.linalg.norm(pert, axis=-1, keepdims=True)
    pp[close] = pert * scale[:, None]
    return p, pp


def fit_dziuk_constants(a: Anisotropy, c: Cutoff, n_samples: int,
                        seed: int = 1618) -> DziukConstants:
    """Fit c_sigma, C_sigma over sampled pairs.

    c_sigma = min gap / |p-pp|^2   over samples with |p-pp| > 1e-3,
    C_sigma = max gap / (|p-pp|^2 + (1-|pp|)).
    """
    if n_samples < 1000:
        raise InputError("fit_dziuk_constants needs n_samples >= 1000")
    rng = np.random.default_rng(seed)
    p, pp = _dziuk_sample_pairs(a.d, n_samples, rng)
    gap = dziuk_gap(a, c, p, pp)
    dist2 = np.sum((p - pp) ** 2, axis=-1)
    lower_mask = dist2 > 1e-6
    c_sigma = float((gap[lower_mask] / dist2[lower_mask]).min())
    denom = dist2 + (1.0 - np.linalg.norm(pp, axis=-1))
    upper_mask = denom > 1e-12
    C_sigma = float((gap[upper_mask] / denom[upper_mask]).max())
    if not (np.isfinite(c_sigma) and c_sigma > 0.0):
        raise InvariantViolation(
            f"nonpositive fitted c_sigma = {c_sigma}: anisotropy not admissible")
    if not np.isfinite(C_sigma):
        raise InvariantViolation("fitted C_sigma is not finite")
    return DziukConstants(c_sigma=c_sigma, C_sigma=max(C_sigma, c_sigma),
                          n_samples=n_samples)


def polar_by_sampling(a: Anisotropy, x, n_dirs: int = 4096) -> np.ndarray:
    """Numerical sup of p.x over the sigma-unit sphere by direction sampling.

    Independent of Anisotropy.polar; used as its oracle.  Exact up to the
    O((2 pi / n)^2) gap of the direction grid in d = 2.
    """
    x = np.asarray(x, dtype=float)
    nu = _unit_directions(a.d, n_dirs)
    boundary = nu / a.sigma(nu)[..., None]
    return np.einsum("ki,...i->...k", boundary, x).max(axis=-1)


def double_polar_by_sampling(a: Anisotropy, x, n_dirs: int = 4096) -> np.ndarray:
    """sigma°°(x) = sup { x.w : sigma°(w) <= 1 } by sampling the boundary of
    the polar unit ball, which is exactly { Dsigma(nu) : |nu| = 1 }."""
    x = np.asarray(x, dtype=float)
    nu = _unit_directions(a.d, n_dirs)
    w = a.dsigma(nu)
    return np.einsum("ki,...i->...k", w, x).max(axis=-1)


def identity_report(a: Anisotropy, c: Cutoff | None = None,
                    n_samples: int = 100, seed: int = 99) -> list[tuple[str, float, int]]:
    """Run the surface-tension identity checks; rows (check, max_abs_error, n).

    Covers homogeneity, the Euler identity, 0-homogeneity of the gradient,
    the radial null space of the Hessian, finite-difference consistency of
    gradient and Hessian, polar duality, the double polar, the duality sup,
    and nonnegativity of the Dziuk gap.
    """
    if c is None:
        c = Cutoff()
    rng = np.random.default_rng(seed)
    d = a.d
    rows = []

    p = rng.standard_normal((n_samples, d))
    p = p[np.linalg.norm(p, axis=-1) > 1e-6]
    lam = rng.random(len(p)) * 10.0 + 1e-3
    err = np.abs(a.sigma(lam[:, None] * p) - lam * a.sigma(p))
    rows.append(("homogeneity", float((err / (lam * a.sigma(p))).max()), len(p)))

    err = np.abs(np.einsum("ki,ki->k", p, a.dsigma(p)) - a.sigma(p))
    rows.append(("euler_identity", float(err.max()), len(p)))

    err = np.linalg.norm(a.dsigma(7.0 * p) - a.dsigma(p), axis=-1)
    rows.append(("gradient_0_homogeneous", float(err.max()), len(p)))

    u = p / np.linalg.norm(p, axis=-1, keepdims=True)
    H = a.d2sigma(u)
    rad = np.linalg.norm(np.einsum("kij,kj->ki", H, u), axis=-1)
    scale = np.linalg.norm(H, axis=(-2, -1))
    rows.append(("hessian_radial_null", float((rad / np.maximum(scale, 1e-30)).max()),
                 len(u)))

    m = min(50, len(u))
    fd_step = 1e-6
    eye = np.eye(d)
    g_fd = np.stack([(a.sigma(u[:m] + fd_step * eye[i]) -
                      a.sigma(u[:m] - fd_step * eye[i])) / (2 * fd_step)
                     for i in range(d)], axis=-1)
    rows.append(("gradient_fd", float(np.abs(a.dsigma(u[:m]) - g_fd).max()), m))

    h_step = 1e-5
    H_fd = np.stack([np.stack([
        (a.sigma(u[:m] + h_step * (eye[i] + eye[j]))
         - a.sigma(u[:m] + h_step * (eye[i] - eye[j]))
         - a.sigma(u[:m] - h_step * (eye[i] - eye[j]))
         + a.sigma(u[:m] - h_step * (eye[i] + eye[j]))) / (4 * h_step ** 2)
        for j in range(d)], axis=-1) for i in range(d)], axis=-2)
    rows.append(("hessian_fd", float(np.abs(a.d2sigma(u[:m]) - H_fd).max()), m))

    err = np.abs(a.polar(a.dsigma(u)) - 1.0)
    rows.append(("polar_of_gradient", float(err.max()), len(u)))

    if d == 2:
        m2 = min(50, len(p))
        dp = np.abs(double_polar_by_sampling(a, p[:m2]) - a.sigma(p[:m2]))
        rows.append(("double_polar", float((dp / a.sigma(p[:m2])).max()), m2))

    # duality sup (achieved by eta* = Dsigma(B), bounded by sigma otherwise)
    B = rng.standard_normal((20, d))
    eta_star = a.dsigma(B)
    err = a.sigma(B) - np.einsum("ki,ki->k", B, eta_star)
    rows.append(("duality_sup_attained", float((np.abs(err) / a.sigma(B)).max()), 20))
    eta = rng.standard_normal((n_samples, d))
    eta = eta / np.maximum(a.polar(eta), 1e-30)[..., None]
    viol = np.einsum("ki,li->kl", B, eta) - a.sigma(B)[:, None]
    rows.append(("duality_sup_bound", float(max(viol.max(), 0.0)), n_samples))

    pp = rng.standard_normal((n_samples, d))
    pp *= (rng.random(n_samples) / np.linalg.norm(pp, axis=-1))[:, None]
    m3 = min(len(u), len(pp))
    gap = dziuk_gap(a, c, u[:m3], pp[:m3])
    rows.append(("dziuk_gap_nonnegative", float(max(-gap.min(), 0.0)), m3))
    return rows
