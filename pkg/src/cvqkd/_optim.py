"""Small scalar maximizers shared by the rate modules."""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar


def maximize_scalar(f: Callable[[float], float], lo: float, hi: float,
                    grid: int = 17, xtol: float = 1e-4) -> tuple[float, float]:
    """Maximize ``f`` on [lo, hi].

    A coarse grid locates the basin, then a bounded Brent/golden-section
    search refines inside the neighbouring grid cells.  Returns (x, f(x)).
    """
    if hi <= lo:
        return lo, float(f(lo))
    xs = np.linspace(lo, hi, grid)
    vals = np.array([f(x) for x in xs])
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, grid - 1)]
    best_x, best_v = float(xs[i]), float(vals[i])
    if b > a:
        def neg(x):
            v = f(x)
            # Brent cannot handle infinities; a huge finite penalty is equivalent here
            return -v if np.isfinite(v) else 1e300
        res = minimize_scalar(neg, bounds=(a, b), method="bounded",
                              options={"xatol": xtol})
        if res.success and np.isfinite(res.fun) and -res.fun >= best_v:
            best_x, best_v = float(res.x), float(-res.fun)
    return best_x, best_v


def maximize_log(f: Callable[[float], float], lo: float, hi: float,
                 grid: int = 17, xtol: float = 1e-4) -> tuple[float, float]:
    """``maximize_scalar`` over log(x) for positive scale parameters."""
    lx, v = maximize_scalar(lambda u: f(float(np.exp(u))), np.log(lo), np.log(hi),
                            grid=grid, xtol=xtol)
    return float(np.exp(lx)), v
