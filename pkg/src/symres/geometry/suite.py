"""Convergence-tested operator identities on a model metric."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .discrete import Chart, Discretization
from .metrics import ModelMetric


class PreconditionError(ValueError):
    """Identity requested on a metric that does not satisfy its hypothesis."""


@dataclass
class IdentityResult:
    identity: str
    rank: int
    N: list
    residuals: list
    slope: float
    passed: bool
    expect_zero: bool = True

    def row(self) -> str:
        res = " ".join(f"{r:.3e}" for r in self.residuals)
        tag = "" if self.expect_zero else "  (control: expects no convergence)"
        return (f"{self.identity:<22} k={self.rank}  {res}  slope={self.slope:5.2f}  "
                f"{'PASS' if self.passed else 'FAIL'}{tag}")


@dataclass
class SuiteReport:
    metric: dict
    chart: dict
    order: int
    tol: float
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def to_json(self) -> dict:
        return {"metric": self.metric, "chart": self.chart, "order": self.order, "tol": self.tol,
                "passed": self.passed, "results": [asdict(r) for r in self.results]}

    def table(self) -> str:
        return "\n".join(r.row() for r in self.results)


# Each identity returns (residual vector, list of term vectors) for a field u of rank k.
Identity = Callable[[Discretization, np.ndarray, int], tuple]


def _lambda_div(D, u, k):
    a, b = D.trace(k - 1) @ (D.div(k) @ u), D.div(k - 2) @ (D.trace(k) @ u)
    return a - b, [a, b], k - 3


def _L_d(D, u, k):
    a, b = D.L(k + 1) @ (D.d(k) @ u), D.d(k + 2) @ (D.L(k) @ u)
    return a - b, [a, b], k + 3


def _lambda_d(D, u, k):
    a, b, c = D.trace(k + 1) @ (D.d(k) @ u), D.d(k - 2) @ (D.trace(k) @ u), D.div(k) @ u
    return a - b + 2 * c, [a, b, c], k - 1


def _L_div(D, u, k):
    a, b, c = D.L(k - 1) @ (D.div(k) @ u), D.div(k + 2) @ (D.L(k) @ u), D.d(k) @ u
    return a - b - 2 * c, [a, b, c], k + 1


def _lambda_lich(D, u, k):
    a, b = D.trace(k) @ (D.laplacian(k) @ u), D.laplacian(k - 2) @ (D.trace(k) @ u)
    return a - b, [a, b], k - 2


def _div_lich(D, u, k):
    a, b = D.div(k) @ (D.laplacian(k) @ u), D.laplacian(k - 1) @ (D.div(k) @ u)
    return a - b, [a, b], k - 1


def _lich_formula(D, u, k):
    a = D.laplacian(k) @ u
    b = D.div(k + 1) @ (D.d(k) @ u)
    c = D.d(k - 1) @ (D.div(k) @ u)
    q = D.curvature(k) @ u
    return a - b + c - 2 * q, [a, b, c, 2 * q], k


IDENTITIES: dict[str, tuple[Identity, int]] = {
    "[Λ,div]=0": (_lambda_div, 3),
    "[L,d]=0": (_L_d, 1),
    "[Λ,d]=-2div": (_lambda_d, 2),
    "[L,div]=2d": (_L_div, 2),
    "[Λ,Δ]=0": (_lambda_lich, 2),
    "[div,Δ]=0": (_div_lich, 2),
    "Δ=div d-d div+2q(R)": (_lich_formula, 2),
}


def relative_residual(D: Discretization, identity: str, rank: int | None = None, seed: int = 0,
                      width: float = 0.25) -> float:
    fn, k0 = IDENTITIES[identity]
    k = k0 if rank is None else rank
    rng = np.random.default_rng(seed)
    u = D.random_field(k, rng, width=width)
    res, terms, k_out = fn(D, u, k)
    scale = max(D.norm(t, k_out) for t in terms)
    return D.norm(res, k_out) / scale if scale > 0 else D.norm(res, k_out)


def fit_slope(N, residuals) -> float:
    """Least-squares slope of -log(residual) against log(N)."""
    x = np.log(np.asarray(N, dtype=float))
    y = np.log(np.maximum(np.asarray(residuals, dtype=float), 1e-300))
    return float(-np.polyfit(x, y, 1)[0])


def identity_suite(metric: ModelMetric, chart: Chart, levels: int = 3, identities=None,
                   tol: float = 1e-4, seed: int = 0, threads: int = 1,
                   allow_non_einstein: bool = False, width: float = 0.25) -> SuiteReport:
    """Residuals of each identity over ``levels`` successive refinements of ``chart``.

    An identity passes when the fitted slope is within 0.3 of the stencil order
    (or above it) and the finest residual is below ``tol``.  When ``[div,Δ]`` is
    run on a non-Einstein metric it is a control: it passes when the last
    refinement step shows a slope below ``order - 1``, i.e. the residual stalls.
    """
    names = list(identities or IDENTITIES)
    if "[div,Δ]=0" in names and not metric.is_einstein() and not allow_non_einstein:
        raise PreconditionError("[div,Δ] at rank 2 needs an Einstein metric")
    charts = [chart]
    for _ in range(levels - 1):
        charts.append(charts[-1].refine())
    discs = [Discretization(metric, c) for c in charts]
    Ns = [max(c.N) for c in charts]

    def run(name):
        res = [relative_residual(D, name, seed=seed, width=width) for D in discs]
        slope = fit_slope(Ns, res) if levels > 1 else float("nan")
        expect_zero = metric.is_einstein() or name != "[div,Δ]=0"
        if expect_zero:
            ok = slope >= chart.order - 0.3 and res[-1] <= tol
        else:
            ok = levels > 1 and fit_slope(Ns[-2:], res[-2:]) < chart.order - 1
        return IdentityResult(name, IDENTITIES[name][1], Ns, res, slope, bool(ok), expect_zero)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, names))
    else:
        results = [run(n) for n in names]
    return SuiteReport(metric.describe(), chart.describe(), chart.order, tol, results)


def dump_report(report: SuiteReport) -> str:
    return json.dumps(report.to_json(), indent=2, sort_keys=True)
