"""Least-squares models for the gap-scaling series.

Two model classes: y = a n^2 + b n + c (exact linear least squares via QR)
and y = A exp(b n) + c (geometric-sequence initialisation refined by damped
Gauss-Newton).  Model comparison declares a winner only when its RMSE is at
most half the other's, otherwise the verdict is inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

_TINY = 1e-300


@dataclass(frozen=True)
class ScalingSeries:
    """Points (n, y) with y = 1/lambda_min_nonzero, strictly increasing n."""

    points: tuple[tuple[int, float], ...]
    family: str = ""
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = tuple((int(n), float(y)) for n, y in self.points)
        object.__setattr__(self, "points", pts)
        ns = [n for n, _ in pts]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n values must be strictly increasing")
        if any(y <= 0 for _, y in pts):
            raise ValueError("y values must be positive")

    @property
    def n(self) -> np.ndarray:
        return np.array([p[0] for p in self.points], dtype=float)

    @property
    def y(self) -> np.ndarray:
        return np.array([p[1] for p in self.points], dtype=float)

    @classmethod
    def from_csv(cls, text: str, family: str = "") -> "ScalingSeries":
        """Parse 'n,y' rows; a header line is skipped if non-numeric."""
        pts = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            try:
                pts.append((int(cells[0]), float(cells[1])))
            except ValueError:
                if pts:
                    raise
                continue  # header
        return cls(tuple(pts), family=family)


@dataclass(frozen=True)
class FitResult:
    """Fitted parameters with goodness-of-fit statistics."""

    model: str
    params: tuple[float, ...]
    r_squared: float
    rmse: float
    converged: bool = True

    def predict(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.model == "quadratic":
            a, b, c = self.params
            return a * n**2 + b * n + c
        a, b, c = self.params
        return a * np.exp(b * n) + c

    def to_json_dict(self) -> dict:
        return {
            "model": self.model,
            "params": list(self.params),
            "r_squared": self.r_squared,
            "rmse": self.rmse,
            "converged": self.converged,
        }


def _stats(y: np.ndarray, resid: np.ndarray) -> tuple[float, float]:
    ss_res = float(resid @ resid)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot <= _TINY:
        r2 = 1.0 if ss_res <= _TINY else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    return r2, float(np.sqrt(ss_res / y.size))


def fit_quadratic(series: ScalingSeries) -> FitResult:
    """Exact least-squares quadratic via QR on the Vandermonde design."""
    n, y = series.n, series.y
    if n.size < 4:
        raise ValueError("need at least 4 points")
    design = np.stack([n**2, n, np.ones_like(n)], axis=1)
    q, r = np.linalg.qr(design)
    if np.min(np.abs(np.diag(r))) < 1e-12 * np.max(np.abs(np.diag(r))):
        raise ValueError("rank-deficient design (collinear n values)")
    params = np.linalg.solve(r, q.T @ y)
    resid = design @ params - y
    r2, rmse = _stats(y, resid)
    return FitResult("quadratic", tuple(float(p) for p in params), r2, rmse)


def _init_exponential(n: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    # offset from three (ideally equally spaced) points of a geometric sequence
    i0, i2 = 0, n.size - 1
    i1 = (i0 + i2) // 2
    for j in range(1, n.size - 1):
        if n[j] - n[i0] == n[i2] - n[j]:
            i1 = j
            break
    den = y[i0] + y[i2] - 2.0 * y[i1]
    c = (y[i0] * y[i2] - y[i1] ** 2) / den if abs(den) > _TINY else 0.0
    spread = y.max() - y.min()
    if np.any(y - c <= 0.0):
        c = y.min() - 1e-6 * spread
    coef = np.polyfit(n, np.log(y - c), 1)
    return float(np.exp(coef[1])), float(coef[0]), float(c)


def fit_exponential(series: ScalingSeries, max_iter: int = 200) -> FitResult:
    """Fit y = A exp(b n) + c by damped Gauss-Newton.

    Initialisation takes c from a three-point geometric-sequence estimate and
    (A, b) from log-linear regression on y - c; refinement halves the step
    until the residual decreases and stops on relative parameter change below
    1e-10.  A fit that exhausts the budget is returned with converged=False.
    """
    n, y = series.n, series.y
    if n.size < 4:
        raise ValueError("need at least 4 points")
    if y.max() - y.min() <= _TINY:
        raise ValueError("y values are all equal; exponential fit is degenerate")
    params = np.array(_init_exponential(n, y))

    def residual(p):
        return p[0] * np.exp(p[1] * n) + p[2] - y

    converged = False
    for _ in range(max_iter):
        r = residual(params)
        expo = np.exp(params[1] * n)
        jac = np.stack([expo, params[0] * n * expo, np.ones_like(n)], axis=1)
        delta, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        base = float(r @ r)
        step = 1.0
        for _ in range(30):
            trial = params + step * delta
            rt = residual(trial)
            if float(rt @ rt) < base:
                break
            step /= 2.0
        else:
            break
        moved = step * delta
        params = params + moved
        if np.max(np.abs(moved) / np.maximum(np.abs(params), 1e-30)) < 1e-10:
            converged = True
            break
    r = residual(params)
    r2, rmse = _stats(y, r)
    return FitResult("exponential", tuple(float(p) for p in params), r2, rmse, converged)


@dataclass(frozen=True)
class ModelChoice:
    """Outcome of fitting both models to one series."""

    best: str
    verdict: str
    rmse_ratio: float
    exponential: FitResult
    quadratic: FitResult

    def to_json_dict(self) -> dict:
        return {
            "best": self.best,
            "verdict": self.verdict,
            "rmse_ratio": self.rmse_ratio,
            "exponential": self.exponential.to_json_dict(),
            "quadratic": self.quadratic.to_json_dict(),
        }


def compare_models(series: ScalingSeries) -> ModelChoice:
    """Fit both models; the decisive winner needs RMSE at most half the other's."""
    if len(series.points) < 5:
        raise ValueError("need at least 5 points")
    quad = fit_quadratic(series)
    try:
        expo = fit_exponential(series)
    except ValueError:
        expo = FitResult("exponential", (0.0, 0.0, float(series.y.mean())), 0.0,
                         _stats(series.y, series.y - series.y.mean())[1], converged=False)
    scale = max(float(np.max(np.abs(series.y))), 1.0)
    if max(expo.rmse, quad.rmse) <= 1e-12 * scale:
        return ModelChoice("inconclusive", "inconclusive", 0.0, expo, quad)
    if expo.rmse <= quad.rmse:
        best, ratio = "exponential", expo.rmse / max(quad.rmse, _TINY)
    else:
        best, ratio = "quadratic", quad.rmse / max(expo.rmse, _TINY)
    verdict = best if ratio <= 0.5 else "inconclusive"
    return ModelChoice(best, verdict, float(ratio), expo, quad)
