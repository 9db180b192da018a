"""Multiscale affine-approximation coefficients on cubes, slices and trees.

Cube coefficients discretize the defining integral on a midpoint tensor
grid and normalize by diam(Q)^n (not |Q|). Restricted coefficients
parametrize the slice (line interval or hyperplane patch), fit in slice
coordinates, and report the fitted map in ambient coordinates.
Integral-geometric coefficients are Monte Carlo averages of restricted
coefficients against the weighted Grassmannian samplers. Carleson sums
walk the dyadic tree and profile per-scale contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fitting
from .errors import DegenerateBox, EmptyIntersection, RankDeficient
from .funcmodel import FunctionField, lipschitz_estimate
from .geometry import (AffineMap, Box, DyadicCube, Hyperplane, LineSeg,
                       clip_line_to_box, sample_hyperplanes, sample_lines,
                       support_interval)
from .rng import stream


@dataclass
class QuadratureSpec:
    """Node counts are odd so tensor grids are midpoint-symmetric."""

    nodes: int = 9
    restricted_nodes: int = 17
    mc_samples: int = 4096
    seed: int = 0

    def __post_init__(self):
        if self.nodes < 3 or self.nodes % 2 == 0:
            raise ValueError("nodes must be odd and >= 3")
        if self.restricted_nodes < 3 or self.restricted_nodes % 2 == 0:
            raise ValueError("restricted_nodes must be odd and >= 3")


@dataclass
class BetaRecord:
    box: Box
    kind: str
    p: float
    value: float
    q: float | None = None
    m: int | None = None
    fitted: AffineMap | None = None
    stderr: float | None = None
    meta: dict = field(default_factory=dict)


def box_tag(box: Box) -> tuple:
    return tuple(round(v, 12) for v in box.lo) + tuple(round(v, 12) for v in box.sides)


def midpoint_grid(box: Box, nodes: int):
    """Tensor midpoint rule: points (N, n), weights summing to |box|."""
    axes = []
    for lo, s in zip(box.lo, box.sides):
        h = s / nodes
        axes.append(lo + h * (np.arange(nodes) + 0.5))
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, box.dim)
    w = np.full(mesh.shape[0], box.volume / mesh.shape[0])
    return mesh, w


def _fit_for_p(samples: fitting.SampleSet, p: float, L: float | None):
    if math.isinf(p):
        try:
            return fitting.fit_affine_minimax(samples, L=L)
        except RankDeficient:
            fit = fitting.fit_affine_l2(samples, allow_degenerate=True)
            r = np.abs(fit.residuals(samples))
            return fitting.AffineFit(fit.map, float(r.max()), "linf", constraint=L)
    if p == 2:
        try:
            if L is None:
                return fitting.fit_affine_l2(samples)
            return fitting.fit_affine_l2_constrained(samples, L)
        except RankDeficient:
            return fitting.fit_affine_l2(samples, allow_degenerate=True)
    try:
        return fitting.fit_affine_lp(samples, p)
    except RankDeficient:
        return fitting.fit_affine_l2(samples, allow_degenerate=True)


def _norm_value(r: np.ndarray, w: np.ndarray, p: float, diam: float, m: int) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(r))) / diam if r.size else 0.0
    integral = float(w @ np.abs(r) ** p)
    return (integral / diam ** m) ** (1.0 / p) / diam


def beta_p_cube(fld: FunctionField, box: Box, p: float, quad: QuadratureSpec,
                L: float | None = None) -> BetaRecord:
    """beta_p of the cube/box itself (the m = n case)."""
    if box.volume <= 0:
        raise DegenerateBox("empty box")
    X, w = midpoint_grid(box, quad.nodes)
    y = fld.eval(X)
    try:
        fit = _fit_for_p(fitting.SampleSet(X, y, w), p, L)
    except RankDeficient as exc:
        raise DegenerateBox(str(exc)) from exc
    r = y - fit.map(X)
    value = _norm_value(r, w, p, box.diameter, box.dim)
    return BetaRecord(box, "cube", p, value, m=box.dim, fitted=fit.map,
                      meta={"nodes": quad.nodes, "L": L})


def _line_record(fld, box, seg: LineSeg, p, quad, L):
    clip = clip_line_to_box(np.asarray(seg.base), np.asarray(seg.direction), box)
    if clip is None:
        raise EmptyIntersection("line does not meet the box")
    s0, s1 = clip
    nodes = quad.restricted_nodes
    h = (s1 - s0) / nodes
    s = s0 + h * (np.arange(nodes) + 0.5)
    pts = seg.points(s)
    y = fld.eval(pts)
    w = np.full(nodes, h)
    fit = _fit_for_p(fitting.SampleSet(s[:, None], y, w), p, L)
    r = y - fit.map(s[:, None])
    value = _norm_value(r, w, p, box.diameter, 1)
    a = fit.map.a[0]
    direction = np.asarray(seg.direction)
    amb = AffineMap(tuple(a * direction), fit.map.intercept - a * float(direction @ np.asarray(seg.base)))
    return BetaRecord(box, "restricted", p, value, m=1, fitted=amb,
                      meta={"nodes": nodes, "L": L})


def _plane_record(fld, box, plane: Hyperplane, p, quad, L):
    t0, t1 = support_interval(box, plane.e)
    if not (t0 <= plane.offset <= t1):
        raise EmptyIntersection("plane does not meet the box")
    B = plane.frame()
    x0 = plane.point()
    u_corners = (box.corners() - x0) @ B
    lo = u_corners.min(axis=0)
    hi = u_corners.max(axis=0)
    nodes = quad.restricted_nodes
    mdim = box.dim - 1
    axes = [lo[i] + (hi[i] - lo[i]) / nodes * (np.arange(nodes) + 0.5) for i in range(mdim)]
    U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, mdim)
    X = x0 + U @ B.T
    cell = float(np.prod((hi - lo) / nodes))
    inside = box.contains(X, tol=1e-12)
    if not np.any(inside):
        raise EmptyIntersection("plane patch grid misses the box")
    U, X = U[inside], X[inside]
    y = fld.eval(X)
    w = np.full(U.shape[0], cell)
    fit = _fit_for_p(fitting.SampleSet(U, y, w), p, L)
    r = y - fit.map(U)
    value = _norm_value(r, w, p, box.diameter, mdim)
    grad = B @ fit.map.a
    amb = AffineMap(tuple(grad), fit.map.intercept - float(grad @ x0))
    return BetaRecord(box, "restricted", p, value, m=mdim, fitted=amb,
                      meta={"nodes": nodes, "L": L})


def beta_p_restricted(fld: FunctionField, box: Box, slice_obj, p: float,
                      quad: QuadratureSpec, L: float | None = None) -> BetaRecord:
    """beta_p of f restricted to (box intersect plane-or-line)."""
    if isinstance(slice_obj, LineSeg):
        return _line_record(fld, box, slice_obj, p, quad, L)
    if isinstance(slice_obj, Hyperplane):
        return _plane_record(fld, box, slice_obj, p, quad, L)
    raise TypeError(f"cannot restrict to {type(slice_obj).__name__}")


def beta_integralgeometric(fld: FunctionField, box: Box, m: int, p: float, q: float,
                           quad: QuadratureSpec, L: float | None = None,
                           seed_tags: tuple = ()) -> BetaRecord:
    """L^q average of restricted beta_p over m-planes meeting the box."""
    n = box.dim
    if m == n:
        rec = beta_p_cube(fld, box, p, quad, L)
        return BetaRecord(box, "ig", p, rec.value, q=q, m=m, fitted=rec.fitted, stderr=0.0)
    if m not in (1, n - 1):
        raise ValueError("only m in {1, n-1, n} is supported")
    rng_seed = int(stream(quad.seed, "ig", m, box_tag(box), *seed_tags).integers(0, 2 ** 62))
    if m == 1:
        # for n = 2 the line and hyperplane measures coincide, so the line
        # sampler covers both m = 1 and m = n - 1
        samples = sample_lines(box, quad.mc_samples, rng_seed)
    else:
        samples = sample_hyperplanes(box, quad.mc_samples, rng_seed)
    vals, weights = [], []
    for obj, w in samples:
        try:
            rec = beta_p_restricted(fld, box, obj, p, quad, L)
        except EmptyIntersection:
            continue
        vals.append(rec.value)
        weights.append(w)
    if not vals:
        raise EmptyIntersection("no sampled plane met the box")
    vals = np.asarray(vals)
    weights = np.asarray(weights)
    mean_q = float(weights @ vals ** q / weights.sum())
    value = mean_q ** (1.0 / q)
    # delta-method standard error through the q-th root
    contrib = weights * vals ** q / weights.mean()
    se_mean = float(contrib.std(ddof=1) / math.sqrt(len(vals)))
    stderr = se_mean * value ** (1.0 - q) / q if value > 0 else se_mean
    return BetaRecord(box, "ig", p, value, q=q, m=m, stderr=stderr,
                      meta={"mc": len(vals), "L": L})


def combined_beta(fld: FunctionField, box: Box, quad: QuadratureSpec,
                  seed_tags: tuple = ()) -> float:
    """Root-sum-of-squares of the hyperplane L2 and line sup coefficients."""
    if box.dim < 2:
        raise ValueError("combined coefficient needs n >= 2")
    b_planes = beta_integralgeometric(fld, box, box.dim - 1, 2, 2, quad, seed_tags=seed_tags)
    b_lines = beta_integralgeometric(fld, box, 1, math.inf, 2, quad, seed_tags=seed_tags)
    return math.hypot(b_planes.value, b_lines.value)


SELECTORS = ("beta2", "ig_line_inf2", "ig_plane_22", "combined")


def _selector_value(fld, box, selector, quad):
    if selector == "beta2":
        return beta_p_cube(fld, box, 2, quad).value
    if selector == "ig_line_inf2":
        return beta_integralgeometric(fld, box, 1 if box.dim > 1 else box.dim,
                                      math.inf, 2, quad).value
    if selector == "ig_plane_22":
        return beta_integralgeometric(fld, box, box.dim - 1 if box.dim > 1 else box.dim,
                                      2, 2, quad).value
    if selector == "combined":
        return combined_beta(fld, box, quad)
    raise ValueError(f"unknown selector {selector!r}")


@dataclass
class CarlesonReport:
    selector: str
    dilation: float
    levels: list
    counts: list
    per_scale: list
    cumulative: list
    lipschitz: float
    ratios: list
    cube_values: list  # (level, index tuple, value) for every visited cube

    @property
    def total(self) -> float:
        return self.cumulative[-1] if self.cumulative else 0.0


def carleson_sum(fld: FunctionField, root: DyadicCube, dilation: float, depth: int,
                 selector: str, quad: QuadratureSpec) -> CarlesonReport:
    """Sum selector(CQ)^2 |Q| over dyadic Q inside root, down `depth` levels."""
    if depth < 0:
        raise ValueError("depth must be >= 0")
    root_box = root.as_box()
    Lhat = fld.lipschitz
    if Lhat is None:
        Lhat = lipschitz_estimate(fld, root_box.dilate(dilation), 4096, quad.seed)
    levels, counts, per_scale, cumulative, ratios = [], [], [], [], []
    cube_values = []
    running = 0.0
    frontier = [root]
    for j in range(depth + 1):
        level_sum = 0.0
        for cube in frontier:
            val = _selector_value(fld, cube.as_box().dilate(dilation), selector, quad)
            level_sum += val * val * cube.volume
            cube_values.append((cube.level, cube.index, val))
        running += level_sum
        levels.append(root.level + j)
        counts.append(len(frontier))
        per_scale.append(level_sum)
        cumulative.append(running)
        ratios.append(running / (max(Lhat, 1e-300) * root.volume))
        if j < depth:
            frontier = [kid for cube in frontier for kid in cube.children()]
    return CarlesonReport(selector, dilation, levels, counts, per_scale,
                          cumulative, Lhat, ratios, cube_values)
