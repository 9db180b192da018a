"""Evaluable scalar fields: analytic catalog entries and interpolated grids.

Each field evaluates vectorized on (N, n) point arrays. Parabolic entries
live on R^{n-1} x R with the last coordinate playing time and are tagged so
Lipschitz estimation can use the parabolic metric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigError, OutOfDomain
from .geometry import Box, parabolic_distance
from .rng import stream


@dataclass
class FunctionField:
    """Scalar field with a pure, deterministic evaluation contract."""

    kind: str
    dim: int
    fn: callable
    params: dict = field(default_factory=dict)
    region: Box | None = None
    lipschitz: float | None = None  # declared bound, Euclidean or parabolic
    parabolic: bool = False

    def eval(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.dim:
            raise ValueError(f"field of dimension {self.dim} got points of dimension {pts.shape[1]}")
        vals = self.fn(pts)
        return float(vals[0]) if single else vals

    def __call__(self, points):
        return self.eval(points)


class GridField(FunctionField):
    """Axis-aligned sample lattice evaluated by multilinear interpolation."""

    def __init__(self, origin, steps, counts, values):
        origin = np.asarray(origin, dtype=float)
        steps = np.asarray(steps, dtype=float)
        counts = np.asarray(counts, dtype=int)
        values = np.asarray(values, dtype=float).reshape(tuple(counts))
        axes = [origin[i] + steps[i] * np.arange(counts[i]) for i in range(len(counts))]
        interp = RegularGridInterpolator(axes, values, method="linear", bounds_error=True)
        region = Box(tuple(origin), tuple(steps * (counts - 1)))

        def fn(pts):
            try:
                return interp(pts)
            except ValueError as exc:
                raise OutOfDomain(f"point outside grid hull {region.lo}..{tuple(region.hi)}") from exc

        super().__init__(kind="grid", dim=len(counts), fn=fn, region=region)
        self.values = values
        self.origin = origin
        self.steps = steps

    @classmethod
    def from_csv(cls, path) -> "GridField":
        """Load a grid field; see docs/formats.md for the layout."""
        with open(path, newline="") as handle:
            rows = [r for r in csv.reader(handle) if r]
        if len(rows) < 4:
            raise ConfigError(f"grid file {path}: need counts, origin, steps, values rows")
        counts = [int(v) for v in rows[0]]
        origin = [float(v) for v in rows[1]]
        steps = [float(v) for v in rows[2]]
        flat = [float(v) for row in rows[3:] for v in row]
        if len(flat) != int(np.prod(counts)):
            raise ConfigError(f"grid file {path}: expected {int(np.prod(counts))} values, got {len(flat)}")
        return cls(origin, steps, counts, flat)


def _pwlinear_eval(xs, ys):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    slope_lo = (ys[1] - ys[0]) / (xs[1] - xs[0])
    slope_hi = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])

    def fn(pts):
        x = pts[:, 0]
        out = np.interp(x, xs, ys)
        lo = x < xs[0]
        hi = x > xs[-1]
        out[lo] = ys[0] + slope_lo * (x[lo] - xs[0])
        out[hi] = ys[-1] + slope_hi * (x[hi] - xs[-1])
        return out

    return fn


def _time_part(name):
    if name == "zero":
        return lambda t: np.zeros_like(t), 0.0
    if name == "sin":
        return np.sin, 1.0
    if name == "linear":
        return lambda t: t, 1.0
    raise ConfigError(f"unknown time part {name!r}")


def make_field(kind: str, dim: int, **params) -> FunctionField:
    """Catalog factory. Euclidean kinds: affine, pwlinear, cone, distset,
    bump, square. Parabolic kinds: p_additive, p_product."""
    if kind == "affine":
        a = np.asarray(params.get("a", np.zeros(dim)), dtype=float)
        b = float(params.get("b", 0.0))
        return FunctionField(kind, dim, lambda pts: pts @ a + b, params,
                             lipschitz=float(np.linalg.norm(a)))

    if kind == "pwlinear":
        xs = params.get("xs", [0.0, 0.25, 0.5, 0.75, 1.0])
        ys = params.get("ys", [0.0, 0.3, -0.1, 0.2, 0.0])
        L = float(np.max(np.abs(np.diff(ys) / np.diff(xs))))
        return FunctionField(kind, dim, _pwlinear_eval(xs, ys), params, lipschitz=L)

    if kind == "cone":
        x0 = np.asarray(params.get("x0", np.zeros(dim)), dtype=float)
        return FunctionField(kind, dim, lambda pts: np.linalg.norm(pts - x0, axis=1), params, lipschitz=1.0)

    if kind == "distset":
        pts0 = np.atleast_2d(np.asarray(params.get("points", [np.zeros(dim)]), dtype=float))
        return FunctionField(
            kind, dim,
            lambda pts: np.min(np.linalg.norm(pts[:, None, :] - pts0[None, :, :], axis=2), axis=1),
            params, lipschitz=1.0)

    if kind == "bump":
        x0 = np.asarray(params.get("x0", np.zeros(dim)), dtype=float)
        scale = float(params.get("scale", 0.3))
        amp = float(params.get("amp", 1.0))
        # max slope of amp*exp(-r^2/s^2) is amp*sqrt(2/e)/s
        L = amp * np.sqrt(2.0 / np.e) / scale
        return FunctionField(
            kind, dim,
            lambda pts: amp * np.exp(-np.sum((pts - x0) ** 2, axis=1) / scale ** 2),
            params, lipschitz=float(L))

    if kind == "square":
        region = Box((-1.0,) * dim, (2.0,) * dim)
        return FunctionField(kind, dim, lambda pts: np.sum(pts ** 2, axis=1), params,
                             region=region, lipschitz=2.0 * np.sqrt(dim))

    if kind == "p_additive":
        # psi(x, t) = g(x) + h(t), horizontally Lipschitz via g
        space = make_field(params.get("space", "cone"), dim - 1, **params.get("space_params", {}))
        h, h_lip = _time_part(params.get("time", "sin"))

        def fn(pts):
            return space.eval(pts[:, :-1]) + h(pts[:, -1])

        L = (space.lipschitz or 1.0) + h_lip
        return FunctionField(kind, dim, fn, params, lipschitz=L, parabolic=True)

    if kind == "p_product":
        # psi(x, t) = a(t) . x + b(t) with smooth a, b
        a0 = np.asarray(params.get("a0", np.ones(dim - 1)), dtype=float)
        a1 = np.asarray(params.get("a1", 0.5 * np.ones(dim - 1)), dtype=float)
        b1 = float(params.get("b1", 1.0))

        def fn(pts):
            x, t = pts[:, :-1], pts[:, -1]
            a_t = a0[None, :] + a1[None, :] * np.sin(t)[:, None]
            return np.sum(a_t * x, axis=1) + b1 * np.cos(t)

        return FunctionField(kind, dim, fn, params, parabolic=True)

    raise ConfigError(f"unknown catalog kind {kind!r}")


EUCLIDEAN_CATALOG = ("affine", "pwlinear", "cone", "distset", "bump", "square")
PARABOLIC_CATALOG = ("p_additive", "p_product")


def default_catalog(dim: int):
    """Representative Euclidean entries spanning smooth and singular cases."""
    rng = stream(17, "catalog", dim)
    entries = [
        make_field("affine", dim, a=rng.uniform(-1, 1, dim), b=rng.uniform(-1, 1)),
        make_field("cone", dim, x0=rng.uniform(0.2, 0.8, dim)),
        make_field("distset", dim, points=rng.uniform(0, 1, (3, dim))),
        make_field("bump", dim, x0=rng.uniform(0.3, 0.7, dim), scale=0.4),
        make_field("square", dim),
    ]
    if dim == 1:
        entries.append(make_field("pwlinear", dim))
    return entries


def default_parabolic_catalog(dim: int):
    entries = []
    for time in ("zero", "sin", "linear"):
        entries.append(make_field("p_additive", dim, space="cone",
                                  space_params={"x0": 0.4 * np.ones(dim - 1)}, time=time))
    entries.append(make_field("p_additive", dim, space="bump",
                              space_params={"x0": 0.5 * np.ones(dim - 1), "scale": 0.4}, time="sin"))
    entries.append(make_field("p_product", dim))
    return entries


def lipschitz_estimate(fld: FunctionField, region, samples: int, seed: int,
                       parabolic: bool = False) -> float:
    """Max sampled difference quotient: random pairs plus lattice neighbours.

    Random pairs alone miss kinks, so a coarse lattice sweep is included
    and the larger of the two estimates is returned.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    if hasattr(region, "as_box"):
        region = region.as_box()
    rng = stream(seed, "lipschitz")
    n = region.dim
    lo, hi = region.lo_arr, region.hi

    p = lo + (hi - lo) * rng.random((samples, n))
    q = lo + (hi - lo) * rng.random((samples, n))
    if parabolic:
        dist = parabolic_distance(p, q)
    else:
        dist = np.linalg.norm(p - q, axis=1)
    keep = dist > 1e-12
    quot = np.abs(fld.eval(p[keep]) - fld.eval(q[keep])) / dist[keep]
    best = float(quot.max()) if quot.size else 0.0

    per_axis = max(3, int(round(samples ** (1.0 / n))))
    per_axis = min(per_axis, 65)
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = fld.eval(mesh.reshape(-1, n)).reshape(mesh.shape[:-1])
    for axis in range(n):
        dv = np.abs(np.diff(vals, axis=axis))
        step = axes[axis][1] - axes[axis][0]
        dd = np.sqrt(step) if (parabolic and axis == n - 1) else step
        best = max(best, float(dv.max() / dd))
    return best
