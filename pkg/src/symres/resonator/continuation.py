"""Continued resolvent, pole reports and the decoupling pipeline on the model balls."""
from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import sympy as sp

from ..blocks import build_scale_change, constants
from .calculus import MU, ELL, mult_fact, sorted_indices
from .grid import CollocationGrid
from .modes import MU_CENTER, ModeSystem, mode_reduce, rank_slices, surface_operator
from .pencil import (assemble_P_mode, eigs_near, physical_bump, resolution_ok, restricted_residue,
                     scan_sigma_min, solve_pencil, threshold_regularity)

# ---------------------------------------------------------------------------
# the scale change J on reduced data


def _scale_change_numeric(sys: ModeSystem, comps: np.ndarray, mu: np.ndarray, inverse: bool) -> np.ndarray:
    """Apply J (or its inverse) to stacked sorted components at points ``mu > 0``."""
    if sys.m == 0:
        return comps.copy()
    S = build_scale_change(sys.m)
    S = S.inverse() if inverse else S
    sl = rank_slices(sys)
    w = (1.0 / (2 * mu), np.zeros_like(mu))  # d rho / rho in the (dmu, dphi) coframe
    out = np.zeros_like(comps, dtype=complex)
    for k in range(sys.m + 1):
        Ks_out = sorted_indices(2, k)
        pos = {K: r for r, K in enumerate(Ks_out)}
        for kin in range(k + 1):
            c = complex(S.coefficient(k, kin))
            if c == 0:
                continue
            j = k - kin
            for r, K in enumerate(sorted_indices(2, kin)):
                src = comps[sl[kin][0] + r]
                for extra in itertools.product(range(2), repeat=j):
                    fac = np.prod([w[e] for e in extra], axis=0) if extra else 1.0
                    out[sl[k][0] + pos[tuple(sorted(K + extra))]] += c * fac * src
    return out


def pointwise_norm(sys: ModeSystem, comps: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Fibre norm of every rank summed in quadrature, with respect to g."""
    ginv = (4 * mu ** 2, mu / (1 - mu / MU_CENTER) ** 2) if sys.n == 1 else None
    sl = rank_slices(sys)
    total = np.zeros(len(mu))
    for k in range(sys.m + 1):
        for r, K in enumerate(sorted_indices(2, k)):
            c = comps[sl[k][0] + r]
            # full components equal c * mult!(K); each of k!/mult!(K) orderings contributes
            weight = mult_fact(K) / math.factorial(k)
            metric = np.prod([ginv[i] for i in K], axis=0) if K else 1.0
            total += weight * mult_fact(K) * np.abs(c) ** 2 * metric
    return np.sqrt(total)


# ---------------------------------------------------------------------------
# resolvent application


@dataclass
class ResolventSolution:
    lam: complex
    system: ModeSystem
    grid: CollocationGrid
    method: str
    coeffs: np.ndarray  # Chebyshev-T coefficients of the weighted unknowns v, per component
    solver_residual: float
    weight: tuple = ()

    @property
    def alpha(self) -> complex:
        return self.lam + self.system.n / 2 - self.system.m

    def extended(self, mu) -> np.ndarray:
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        t = 1 - mu / MU_CENTER
        w = self.weight or (0,) * len(self.coeffs)
        return np.array([self.grid.evaluate(c, mu) * t ** a for c, a in zip(self.coeffs, w)])

    def physical(self, mu) -> np.ndarray:
        """``J^{-1} rho^alpha u_ext`` at points with ``mu > 0``."""
        mu = np.atleast_1d(np.asarray(mu, dtype=float))
        if np.any(mu <= 0):
            raise ValueError("physical values live on mu > 0")
        ext = self.extended(mu) * mu ** (self.alpha / 2)
        return _scale_change_numeric(self.system, ext, mu, inverse=True)

    def decay_slope(self, rho_range=(1e-3, 3e-2), samples: int = 16) -> float:
        """Slope of ``log |J u|`` against ``log rho`` in the smooth coframe (dt/t, dmu, dphi)."""
        rho = np.geomspace(*rho_range, samples)
        mu = rho ** 2
        mag = np.linalg.norm(self.extended(mu), axis=0) * rho ** self.alpha.real
        return float(np.polyfit(np.log(rho), np.log(mag), 1)[0])


def _data_values(sys: ModeSystem, grid: CollocationGrid, f) -> np.ndarray:
    mu = grid.nodes
    vals = f(mu) if callable(f) else np.asarray(f)
    vals = np.asarray(vals, dtype=complex).reshape(sys.size, grid.N + 1)
    if np.any(np.abs(vals[:, mu <= 0]) > 0):
        raise ValueError("data must be supported in mu > 0")
    return vals


def continue_resolvent_apply(sys: ModeSystem, grid: CollocationGrid, lam: complex, f,
                             method: str = "ultraspherical", pencil=None) -> ResolventSolution:
    """Apply the continued resolvent to compactly supported reduced data.

    ``f`` holds node values (or a callable of ``mu``) of the sorted components
    of the physical data, ranks ``m`` down to 0.  The extended problem
    ``P u_ext = rho^{-lambda-n/2+m-2} J f`` is solved on the whole grid and
    the physical solution is ``J^{-1} rho^{lambda+n/2-m} u_ext`` on ``mu > 0``.
    """
    P = pencil if pencil is not None else assemble_P_mode(sys, grid, method)
    vals = _data_values(sys, grid, f)
    mu = grid.nodes
    alpha = lam + sys.n / 2 - sys.m
    F = np.zeros_like(vals)
    pos = mu > 0
    F[:, pos] = _scale_change_numeric(sys, vals[:, pos], mu[pos], inverse=False) * mu[pos] ** (-alpha / 2 - 1)
    x = P.solve(lam, F)
    b = P.rhs(F)
    res = np.linalg.norm(P(lam) @ x - b) / max(np.linalg.norm(b), 1e-300)
    return ResolventSolution(complex(lam), sys, grid, P.method, P.coefficients(x), float(res), P.weight)


# ---------------------------------------------------------------------------
# pole reports


@dataclass
class Pole:
    lam: complex
    sigma_min: float
    pencil_match: float
    refinement_delta: float
    visibility: float
    multiplicity: int = 1

    def row(self, mode: int) -> dict:
        return {"mode": mode, "re_lambda": self.lam.real, "im_lambda": self.lam.imag,
                "sigma_min": self.sigma_min, "pencil_match": self.pencil_match,
                "refinement_delta": self.refinement_delta}


@dataclass
class ResonanceReport:
    mode: int
    window: tuple
    poles: list = field(default_factory=list)
    hidden: list = field(default_factory=list)  # kernels of the extended operator invisible on X
    rejected: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        def enc(p: Pole):
            d = asdict(p)
            d["lam"] = [p.lam.real, p.lam.imag]
            return d
        return {"mode": self.mode, "window": list(self.window), "poles": [enc(p) for p in self.poles],
                "hidden": [enc(p) for p in self.hidden], "rejected": self.rejected, "metadata": self.metadata}

    def csv_rows(self) -> list:
        return [p.row(self.mode) for p in self.poles]


CSV_COLUMNS = ["mode", "re_lambda", "im_lambda", "sigma_min", "pencil_match", "refinement_delta"]


def reports_to_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for rep in reports:
        for row in rep.csv_rows():
            w.writerow({k: (f"{v:.12g}" if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def reports_to_svg(reports, width: int = 480, height: int = 320) -> str:
    """Static scatter of pole locations in the lambda plane."""
    pts = [(p.lam.real, p.lam.imag) for r in reports for p in r.poles]
    wins = [r.window for r in reports]
    xs = [w[0] for w in wins] + [w[1] for w in wins] + [p[0] for p in pts] or [0, 1]
    ys = [w[2] for w in wins] + [w[3] for w in wins] + [p[1] for p in pts] or [0, 1]
    x0, x1 = min(xs) - 0.25, max(xs) + 0.25
    y0, y1 = min(ys) - 0.25, max(ys) + 0.25
    sx = lambda x: 40 + (x - x0) / (x1 - x0) * (width - 60)
    sy = lambda y: height - 30 - (y - y0) / (y1 - y0) * (height - 50)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="40" y1="{sy(0):.1f}" x2="{width - 20}" y2="{sy(0):.1f}" stroke="#888"/>']
    for w in wins:
        out.append(f'<rect x="{sx(w[0]):.1f}" y="{sy(w[3]):.1f}" width="{sx(w[1]) - sx(w[0]):.1f}" '
                   f'height="{max(sy(w[2]) - sy(w[3]), 1):.1f}" fill="none" stroke="#bbb"/>')
    for x, y in pts:
        out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="black"/>')
    out.append(f'<text x="40" y="{height - 8}" font-size="11">Re λ in [{x0:.2f}, {x1:.2f}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def resonance_scan(sys: ModeSystem, window, N: int = 200, method: str = "ultraspherical",
                   shape=(11, 11), sigma_threshold: float = 1e-10, match_tol: float = 1e-3,
                   refine_tol: float = 1e-4, visibility_tol: float = 0.1, threads: int = 1) -> ResonanceReport:
    """Poles of the continued resolvent of one mode inside ``window``.

    A pole is reported when the sigma_min scan and the pencil eigenvalues agree
    within ``match_tol``, the location moves by less than ``refine_tol`` from
    N to 2N, and the residue of the resolvent restricted to {mu > 0} is
    visible.  Kernels of the extended operator that fail only the last test
    are listed as ``hidden``.
    """
    window = tuple(float(x) for x in window)
    re_lo, re_hi, im_lo, im_hi = window
    grid = CollocationGrid(N)
    P = assemble_P_mode(sys, grid, method)
    inside = lambda z: re_lo <= z.real <= re_hi and im_lo - 1e-9 <= z.imag <= im_hi + 1e-9
    eigs = np.array([complex(z) for z in solve_pencil(P) if inside(z)])
    cands = scan_sigma_min(P, window, shape, sigma_threshold, threads)
    fine = None
    rep = ResonanceReport(sys.ell, window)
    seen = []
    for c in cands:
        if any(abs(c.lam - z) < match_tol for z in seen):
            continue  # another member of an already classified cluster
        seen.append(c.lam)
        dist = np.abs(eigs - c.lam) if len(eigs) else np.array([math.inf])
        match = float(dist.min())
        if match > match_tol:
            rep.rejected.append({"lam": [c.lam.real, c.lam.imag], "reason": f"pencil mismatch {match:.2e}"})
            continue
        cluster = eigs[dist < match_tol]
        centre = complex(cluster.mean())
        if fine is None:
            fine = assemble_P_mode(sys, grid.refine(), method)
        near2 = eigs_near(fine, centre, k=len(cluster) + 6)
        fine_cluster = near2[np.abs(near2 - centre) < match_tol]
        # cluster means are stable even when a defective eigenvalue splits
        delta = abs(complex(fine_cluster.mean()) - centre) if len(fine_cluster) else math.inf
        vis = restricted_residue(P, c.lam)
        pole = Pole(centre, c.sigma_min, match, float(delta), vis, len(cluster))
        if delta >= refine_tol:
            rep.rejected.append({"lam": [centre.real, centre.imag], "reason": f"refinement delta {delta:.2e}"})
        elif vis < visibility_tol:
            rep.hidden.append(pole)
        else:
            rep.poles.append(pole)
    for e in eigs:
        if not any(abs(e - z) < match_tol for z in seen):
            seen.append(e)
            rep.rejected.append({"lam": [e.real, e.imag], "reason": "pencil eigenvalue without sigma_min minimum"})
    worst = complex(re_lo, 0)
    rep.metadata = {"N": N, "N_refine": 2 * N, "method": method, "system": sys.describe(),
                    "thresholds": {"sigma_min": sigma_threshold, "match": match_tol, "refinement": refine_tol,
                                   "visibility": visibility_tol},
                    "scan_shape": list(shape),
                    "sobolev_threshold": threshold_regularity(worst),
                    "resolution_ok": resolution_ok(grid, worst)}
    return rep


# ---------------------------------------------------------------------------
# the decoupling pipeline for rank-2 data on H2


def _apply_rows(rows, k_cols, vals_by_deriv, ell, mu) -> np.ndarray:
    """Evaluate symbolic operator rows on sampled derivatives ``vals_by_deriv[p][col]``."""
    out = []
    for row in rows:
        acc = np.zeros(len(mu), dtype=complex)
        for (c, p), expr in row.items():
            fn = sp.lambdify(MU, sp.sympify(expr).subs(ELL, ell), "numpy")
            acc += np.broadcast_to(fn(mu), mu.shape) * vals_by_deriv[p][c]
        out.append(acc)
    return np.array(out)


def tracefree_bump(ell: int, mu: np.ndarray, a: float = 0.6, b: float = 3.0) -> np.ndarray:
    """Trace-free rank-2 data in mode ``ell`` supported in ``a < mu < b`` (sorted mu-mu, mu-phi, phi-phi)."""
    bump = physical_bump(mu, a, b)
    # g^{mu mu} u_{mu mu} + g^{phi phi} u_{phi phi} = 0
    c_mm = bump
    c_pp = -4 * mu * (1 - mu / MU_CENTER) ** 2 * bump
    c_mp = 0.5 * bump * mu
    return np.array([c_mm, c_mp, c_pp], dtype=complex)


@dataclass
class PipelineResult:
    lam: complex
    ell: int
    lower_ratio: float
    equation_residual: float
    coupled_residual: float
    decay_slope: float
    expected_slope: float
    trace_norm: float
    div_norm: float
    div_data_ratio: float
    tracefree_relation: float
    solver_residual: float
    tol_lower: float = 1e-6
    tol_slope: float = 0.05
    tol_equation: float = 1e-6

    def checks(self) -> dict:
        return {"lower_components": self.lower_ratio <= self.tol_lower,
                "equation": self.equation_residual <= self.tol_equation,
                "decay_slope": abs(self.decay_slope - self.expected_slope) <= self.tol_slope}

    @property
    def passed(self) -> bool:
        return all(self.checks().values())

    def to_json(self) -> dict:
        d = asdict(self)
        d["lam"] = [self.lam.real, self.lam.imag]
        d["checks"] = self.checks()
        d["passed"] = self.passed
        return d


def _l2(sys: ModeSystem, comps_fn, a: float = 1e-4, b: float = MU_CENTER, n: int = 400) -> float:
    x, w = np.polynomial.legendre.leggauss(n)
    mu = a + (b - a) * (x + 1) / 2
    w = w * (b - a) / 2
    vol = np.sqrt((1 - mu / MU_CENTER) ** 2 / mu) / (2 * mu)
    nrm = pointwise_norm(sys, comps_fn(mu), mu)
    return float(np.sqrt(np.sum(w * vol * nrm ** 2)))


def decoupling_pipeline(lam: complex = 8.0, ell: int = 2, N: int = 320, method: str = "ultraspherical",
                        data=None, check_nodes: int = 400) -> PipelineResult:
    """Rank-2 data in the top slot on H2; measure the lower components of the solution.

    ``data`` is a callable of ``mu`` returning the three sorted components of
    the rank-2 datum (default: ``tracefree_bump``).
    """
    sys = mode_reduce("H2", 2, ell)
    grid = CollocationGrid(N)
    sl = rank_slices(sys)
    top = data if data is not None else (lambda mu: tracefree_bump(ell, mu))

    def full_data(mu):
        out = np.zeros((sys.size, len(mu)), dtype=complex)
        out[sl[2][0]:sl[2][1]] = top(mu)
        return out

    sol = continue_resolvent_apply(sys, grid, lam, full_data, method)
    phys = lambda mu: sol.physical(mu)
    lower_sys = sys
    f_norm = _l2(sys, full_data)

    def lower_only(mu):
        u = phys(mu)
        u[sl[2][0]:sl[2][1]] = 0
        return u

    lower = _l2(lower_sys, lower_only)

    # equation residual on an interior interval, by spectral differentiation
    a, b = 0.05, 0.975 * MU_CENTER
    sub = CollocationGrid(check_nodes)
    mu = a + (b - a) * (sub.x + 1) / 2
    D1 = sub.D1 * sub.half / ((b - a) / 2)
    D2 = D1 @ D1
    u = phys(mu)
    u2 = u[sl[2][0]:sl[2][1]]
    c2 = float(constants(2, 1).c[2])
    rows = surface_operator((("Lich", 1), ("Id", sp.Symbol("lambda") ** 2 - c2)), 2)
    rows = tuple({key: sp.sympify(v).subs(sp.Symbol("lambda"), lam) for key, v in r.items()} for r in rows)
    derivs = {0: u2, 1: u2 @ D1.T, 2: u2 @ D2.T}
    lhs = _apply_rows(rows, 3, derivs, ell, mu)
    f_int = top(mu)
    scale = max(np.max(np.abs(f_int)), 1e-300)
    eq_res = float(np.max(np.abs(lhs - f_int)) / scale)
    # the same row including the couplings to the lower ranks
    u1 = u[sl[1][0]:sl[1][1]]
    u0 = u[sl[0][0]:sl[0][1]]
    b0 = float(constants(2, 1).b(0))
    b1 = float(constants(2, 1).b(1))
    d_rows = surface_operator((("d", 1),), 1)
    L_rows = surface_operator((("LefL", 1),), 0)
    ll = _apply_rows(surface_operator((("LL", 1),), 2), 3, derivs, ell, mu)
    cpl = (-ll + 2 * b1 * _apply_rows(d_rows, 2, {0: u1, 1: u1 @ D1.T}, ell, mu)
           - b0 * b1 * _apply_rows(L_rows, 1, {0: u0}, ell, mu))
    coupled = float(np.max(np.abs(lhs + cpl - f_int)) / scale)
    tr = _apply_rows(surface_operator((("Trace", 1),), 2), 3, {0: u2}, ell, mu)
    dv = _apply_rows(surface_operator((("div", 1),), 2), 3, {0: u2, 1: u2 @ D1.T}, ell, mu)
    fdv = _apply_rows(surface_operator((("div", 1),), 2), 3,
                      {0: f_int, 1: f_int @ D1.T}, ell, mu)
    unorm = max(np.max(np.abs(u2)), 1e-300)
    return PipelineResult(
        complex(lam), ell, lower / f_norm, eq_res, coupled, sol.decay_slope(),
        float((sol.alpha).real), float(np.max(np.abs(tr)) / unorm), float(np.max(np.abs(dv)) / unorm),
        float(np.max(np.abs(fdv)) / scale), float(np.max(np.abs(tr[0] - b0 * b1 * u0[0])) / unorm),
        sol.solver_residual)


def scalar_decay(lam: float = 6.0, ell: int = 0, N: int = 160, method: str = "ultraspherical") -> tuple:
    """(fitted slope, expected slope) for scalar bump data on H2."""
    sys = mode_reduce("H2", 0, ell)
    grid = CollocationGrid(N)
    sol = continue_resolvent_apply(sys, grid, lam, lambda mu: physical_bump(mu)[None, :], method)
    return sol.decay_slope(), lam + 0.5


__all__ = ["ResolventSolution", "continue_resolvent_apply", "Pole", "ResonanceReport", "resonance_scan",
           "reports_to_csv", "reports_to_svg", "CSV_COLUMNS", "PipelineResult", "decoupling_pipeline",
           "tracefree_bump", "scalar_decay", "pointwise_norm"]
