"""The discretised mode operator as a matrix pencil and its pole detectors."""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sl
import scipy.sparse.linalg as spla

from .grid import CollocationGrid
from .modes import MU_CENTER, ModeSystem, reduced_operator

METHODS = ("ultraspherical", "collocation")


class PencilError(RuntimeError):
    """Eigen-solver failure; carries condition estimates."""


class SingularSystemError(RuntimeError):
    """The pencil is numerically singular at the requested lambda."""


@dataclass
class PencilMatrix:
    """``T0 + lambda T1 + lambda^2 T2`` acting on ``system.size`` stacked radial unknowns.

    In collocation mode the unknowns are node values; in ultraspherical mode
    they are Chebyshev-T coefficients and the rows are C^(2) coefficients.
    Rows are scaled by ``(mu - MU_CENTER)^p`` as recorded in ``row_power``;
    the unknowns are ``v_c = u_c / t^weight[c]`` with ``t = 1 - mu/MU_CENTER``.
    """

    T: tuple
    system: ModeSystem
    grid: CollocationGrid
    method: str
    row_power: tuple
    weight: tuple

    def unweight(self, mu) -> np.ndarray:
        """Factors ``t^weight[c]`` turning ``v`` into polar-frame components, shape ``(size, len(mu))``."""
        t = 1 - np.asarray(mu, dtype=float) / MU_CENTER
        return np.array([t ** w for w in self.weight])

    @property
    def degree(self) -> int:
        return 2 if np.any(self.T[2]) else (1 if np.any(self.T[1]) else 0)

    @property
    def size(self) -> int:
        return self.T[0].shape[0]

    @property
    def block(self) -> int:
        return self.grid.N + 1

    def __call__(self, lam) -> np.ndarray:
        return self.T[0] + lam * self.T[1] + lam * lam * self.T[2]

    def derivative(self, lam) -> np.ndarray:
        return self.T[1] + 2 * lam * self.T[2]

    # -- conversion between node values and unknowns ------------------------
    def unknowns_from_values(self, vals: np.ndarray) -> np.ndarray:
        vals = np.asarray(vals).reshape(self.system.size, self.block)
        if self.method == "collocation":
            return vals.reshape(-1)
        return np.concatenate([self.grid.values_to_coeffs(v) for v in vals])

    def values_from_unknowns(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x).reshape(self.system.size, self.block)
        if self.method == "collocation":
            return x
        return np.array([self.grid.coeffs_to_values(c) for c in x])

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """Chebyshev-T coefficients of every component, shape ``(size, N+1)``."""
        x = np.asarray(x).reshape(self.system.size, self.block)
        if self.method == "collocation":
            return np.array([self.grid.values_to_coeffs(v) for v in x])
        return x

    def rhs(self, vals: np.ndarray) -> np.ndarray:
        """Right-hand side from node values of the unscaled equation."""
        vals = np.asarray(vals, dtype=complex).reshape(self.system.size, self.block)
        mu = self.grid.nodes
        out = []
        for r, v in enumerate(vals):
            # (mu - 4)^p / t^a with t = (4 - mu)/4
            a = self.weight[r]
            sv = v * (mu - MU_CENTER) ** (self.row_power[r] - a) * (-MU_CENTER) ** a
            if self.method == "collocation":
                out.append(sv)
            else:
                out.append(self.grid.to_c2(self.grid.values_to_coeffs(sv)))
        return np.concatenate(out)

    def solve(self, lam, rhs_vals: np.ndarray, cond_max: float = 1e14) -> np.ndarray:
        A = self(lam)
        lu = sl.lu_factor(A)
        x = sl.lu_solve(lu, self.rhs(rhs_vals))
        rc = _rcond(A, lu)
        if not np.isfinite(rc) or rc < 1.0 / cond_max:
            raise SingularSystemError(f"pencil singular at lambda={lam} (rcond {rc:.2e})")
        return x


def _rcond(A, lu) -> float:
    anorm = np.linalg.norm(A, 1)
    gecon = sl.get_lapack_funcs("gecon", (lu[0],))
    rc, info = gecon(lu[0], anorm, norm="1")
    return float(rc) if info == 0 else float("nan")


def assemble_P_mode(sys: ModeSystem, grid: CollocationGrid, method: str = "ultraspherical") -> PencilMatrix:
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    op = reduced_operator(sys)
    N1 = grid.N + 1
    S = sys.size
    T = [np.zeros((S * N1, S * N1), dtype=complex) for _ in range(3)]
    if method == "collocation":
        mu = grid.nodes
        for (r, c, p, q), coeffs in op.poly.items():
            vals = np.polyval(np.asarray(coeffs), mu)
            T[q][r * N1:(r + 1) * N1, c * N1:(c + 1) * N1] += vals[:, None] * grid.D(p)
    else:
        M = grid._us_pad
        ops = {p: grid.us_operator(p) for p in range(3)}
        mult = {}
        for (r, c, p, q), coeffs in op.poly.items():
            key = tuple(coeffs)
            if key not in mult:
                mult[key] = grid.us_multiply(coeffs, M)
            blk = (mult[key] @ ops[p])[:N1, :N1]
            T[q][r * N1:(r + 1) * N1, c * N1:(c + 1) * N1] += blk
    if not any(T[q].any() for q in (1, 2)):
        raise PencilError("pencil does not depend on lambda")
    return PencilMatrix(tuple(T), sys, grid, method, tuple(op.row_power), tuple(op.weight))


def _equilibrate(pencil: PencilMatrix) -> tuple:
    scale = np.max(np.abs(np.hstack(pencil.T)), axis=1)
    scale[scale == 0] = 1.0
    return tuple(t / scale[:, None] for t in pencil.T)


def _linearize(pencil: PencilMatrix) -> tuple:
    """``(A, B)`` with ``A x = lambda B x`` equivalent to the pencil (companion form for degree 2)."""
    T0, T1, T2 = _equilibrate(pencil)
    if pencil.degree <= 1:
        return T0, -T1
    n = T0.shape[0]
    Z, I = np.zeros((n, n)), np.eye(n)
    return np.block([[Z, I], [-T0, -T1]]), np.block([[I, Z], [Z, T2]])


def solve_pencil(pencil: PencilMatrix, finite_cap: float = 1e8) -> np.ndarray:
    """Finite eigenvalues of the pencil, sorted by decreasing real part."""
    A, B = _linearize(pencil)
    try:
        w = sl.eigvals(A, B)
    except (np.linalg.LinAlgError, ValueError) as exc:
        conds = [np.linalg.cond(t) for t in pencil.T[:2]]
        raise PencilError(f"eigensolver failed ({exc}); cond(T0)={conds[0]:.2e}, cond(T1)={conds[1]:.2e}")
    w = w[np.isfinite(w) & (np.abs(w) < finite_cap)]
    return w[np.lexsort((w.imag, -w.real))]


def eigs_near(pencil: PencilMatrix, sigma: complex, k: int = 6) -> np.ndarray:
    """The ``k`` pencil eigenvalues closest to ``sigma``, by shift-invert Arnoldi.

    The shift is nudged off ``sigma`` so an exact eigenvalue does not make the
    factorisation singular; if Arnoldi still breaks down the dense solver is used.
    """
    A, B = _linearize(pencil)
    shift = complex(sigma) + 1e-7 * (1 + 1j) * max(1.0, abs(sigma))
    n = A.shape[0]
    with warnings.catch_warnings(), np.errstate(all="ignore"):
        warnings.simplefilter("ignore", sl.LinAlgWarning)
        lu = sl.lu_factor(A - shift * B, check_finite=False)
        ok = np.all(np.isfinite(lu[0])) and np.min(np.abs(np.diag(lu[0]))) > 0
        if ok:
            op = spla.LinearOperator((n, n), matvec=lambda x: sl.lu_solve(lu, B @ x, check_finite=False),
                                     dtype=complex)
            try:
                theta = spla.eigs(op, k=min(k, n - 2), which="LM", return_eigenvectors=False,
                                  v0=np.ones(n, dtype=complex))
                theta = theta[np.isfinite(theta) & (theta != 0)]
                ok = theta.size > 0
            except spla.ArpackError:
                ok = False
    lam = shift + 1.0 / theta if ok else solve_pencil(pencil)
    return lam[np.argsort(np.abs(lam - sigma))][:k]


# ---------------------------------------------------------------------------
# minimal singular value scan


def sigma_min(A: np.ndarray, iters: int = 6, seed: int = 0) -> tuple:
    """(sigma_min, left, right) by inverse iteration on ``(A^H A)^{-1}`` with one LU.

    The singular triple satisfies ``A right = sigma_min * left``.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sl.LinAlgWarning)
        lu = sl.lu_factor(A)
    if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
        return _sigma_min_svd(A)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[0]) + 0j
    v /= np.linalg.norm(v)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            x = sl.lu_solve(lu, sl.lu_solve(lu, v), trans=2, check_finite=False)
            nx = np.linalg.norm(x)
            if nx == 0 or not np.isfinite(nx):
                return _sigma_min_svd(A)
            v = x / nx
        y = sl.lu_solve(lu, v, check_finite=False)
    ny = np.linalg.norm(y)
    if ny == 0 or not np.isfinite(ny):
        return _sigma_min_svd(A)
    return 1.0 / ny, v, y / ny


def _sigma_min_svd(A):
    U, S, Vh = np.linalg.svd(A)
    return float(S[-1]), U[:, -1], Vh[-1].conj()


@dataclass
class Candidate:
    lam: complex
    sigma_min: float


def _window_grid(window, shape):
    re_lo, re_hi, im_lo, im_hi = window
    re = np.linspace(re_lo, re_hi, shape[0])
    im = np.linspace(im_lo, im_hi, shape[1]) if im_hi > im_lo else np.array([im_lo])
    return re, im


def _refine(T, lam, window, tol=1e-13, steps=40):
    """Newton on ``log det A(lam)``: step ``1 / tr(A^{-1} A')``."""
    re_lo, re_hi, im_lo, im_hi = window
    pad = 0.5 * max(re_hi - re_lo, im_hi - im_lo, 1e-3)
    for _ in range(steps):
        A = T[0] + lam * T[1] + lam * lam * T[2]
        dA = T[1] + 2 * lam * T[2]
        with warnings.catch_warnings(), np.errstate(all="ignore"):
            warnings.simplefilter("ignore", sl.LinAlgWarning)
            lu = sl.lu_factor(A, check_finite=False)
            if np.min(np.abs(np.diag(lu[0]))) == 0:
                break
            tr = np.trace(sl.lu_solve(lu, dA, check_finite=False))
        if tr == 0 or not np.isfinite(tr):
            break
        step = 1.0 / tr
        lam = lam - step
        if not (re_lo - pad <= lam.real <= re_hi + pad and im_lo - pad <= lam.imag <= im_hi + pad):
            return None
        if abs(step) < tol * max(1.0, abs(lam)):
            break
    return complex(lam)


def scan_sigma_min(pencil: PencilMatrix, window, shape=(21, 21), threshold: float = 1e-10,
                   threads: int = 1) -> list:
    """Local minima of the relative minimal singular value, refined by Newton steps.

    Seeds are the points of the centre row together with local minima along
    each row after a quadratic drift in ``Re lambda`` is removed.
    ``window = (re_lo, re_hi, im_lo, im_hi)``.  A candidate is reported when the
    refined ``sigma_min / ||A||_F`` is below ``threshold`` and the refined point
    lies inside the window.
    """
    T = _equilibrate(pencil)
    re, im = _window_grid(window, shape)
    pts = [complex(a, b) for a in re for b in im]

    def smin(lam):
        A = T[0] + lam * T[1] + lam * lam * T[2]
        return sigma_min(A)[0] / np.linalg.norm(A)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            vals = list(ex.map(smin, pts))
    else:
        vals = [smin(p) for p in pts]
    V = np.log(np.maximum(np.array(vals).reshape(len(re), len(im)), 1e-300))
    # local minima along each row after removing the smooth drift in Re(lambda)
    seeds = []
    for j in range(len(im)):
        row = V[:, j]
        if len(re) > 3:
            row = row - np.polyval(np.polyfit(re, row, 2), re)
        for i in range(len(re)):
            if row[i] <= row[max(i - 1, 0):i + 2].min():
                seeds.append(complex(re[i], im[j]))
    # the centre row seeds every point: the log-det Newton basins are wide
    jc = len(im) // 2
    seeds += [complex(r, im[jc]) for r in re]
    out: list[Candidate] = []
    re_lo, re_hi, im_lo, im_hi = window
    for s0 in seeds:
        lam = _refine(T, s0, window)
        if lam is None:
            continue
        if not (re_lo <= lam.real <= re_hi and im_lo - 1e-9 <= lam.imag <= im_hi + 1e-9):
            continue
        val = smin(lam)
        if val < threshold and all(abs(lam - c.lam) > 1e-6 for c in out):
            out.append(Candidate(lam, float(val)))
    out.sort(key=lambda c: (-c.lam.real, c.lam.imag))
    return out


# ---------------------------------------------------------------------------
# visibility of a pole to the resolvent restricted to the physical region


def physical_bump(mu: np.ndarray, a: float = 0.6, b: float = 3.0) -> np.ndarray:
    out = np.zeros_like(mu, dtype=float)
    inside = (mu > a) & (mu < b)
    t = (mu[inside] - a) / (b - a)
    out[inside] = np.exp(-1.0 / (t * (1 - t)))
    return out


def restricted_residue(pencil: PencilMatrix, lam0: complex, radius: float = 0.05, points: int = 32,
                       seed: int = 0) -> float:
    """Relative residue of ``<chi, r_X P^{-1} chi'>`` at ``lam0``.

    Both test functions are bumps supported in ``{mu > 0}``.  A simple pole of
    the restricted resolvent gives a value near one; a kernel of the extended
    operator that the restriction does not see gives a value near zero.
    """
    grid = pencil.grid
    mu = grid.nodes
    rng = np.random.default_rng(seed)
    S = pencil.system.size
    f = np.concatenate([rng.standard_normal() * physical_bump(mu, 0.6, 3.0) for _ in range(S)])
    g = [rng.standard_normal() * physical_bump(mu, 1.0, 3.5) for _ in range(S)]
    theta = 2 * np.pi * np.arange(points) / points
    vals = []
    b = pencil.rhs(f)
    for t in theta:
        lam = lam0 + radius * np.exp(1j * t)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sl.LinAlgWarning)
            x = sl.solve(pencil(lam), b)
        u = pencil.values_from_unknowns(x)
        vals.append(sum(np.sum(grid.weights * gk * uk) for gk, uk in zip(g, u)))
    vals = np.array(vals)
    res = np.mean(vals * radius * np.exp(1j * theta))
    scale = np.max(np.abs(vals)) * radius
    return float(abs(res) / scale) if scale > 0 else 0.0


def threshold_regularity(lam: complex) -> float:
    """Sobolev order above which the extended problem is Fredholm near ``lam``."""
    return -lam.real + 0.5


def resolution_ok(grid: CollocationGrid, lam: complex) -> bool:
    per_unit = grid.N / (grid.hi - grid.lo)
    return per_unit >= 2 * abs(lam.real)


__all__ = ["METHODS", "PencilError", "SingularSystemError", "PencilMatrix", "assemble_P_mode", "solve_pencil", "eigs_near",
           "sigma_min", "Candidate", "scan_sigma_min", "physical_bump", "restricted_residue",
           "threshold_regularity", "resolution_ok"]
