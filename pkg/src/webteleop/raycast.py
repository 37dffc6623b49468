"""Primitive shape geometry: vectorized ray casting and closest-surface
queries for boxes, cylinders (z-aligned), spheres, and composites.

Dims conventions: box [dx, dy, dz] full extents, cylinder [diameter,
height], sphere [diameter]. Everything works in the primitive's local frame;
poses map to world.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose

_EPS = 1e-9
_INF = float("inf")


def _ray_box(origins, dirs, half):
    """Slab test; returns (t, normals) with inf where missed."""
    n = origins.shape[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    t1 = (-half - origins) * inv
    t2 = (half - origins) * inv
    tmin = np.nanmin(np.stack([t1, t2]), axis=0)
    tmax = np.nanmax(np.stack([t1, t2]), axis=0)
    # parallel rays outside a slab never hit it
    parallel_miss = (np.abs(dirs) < _EPS) & (np.abs(origins) > half)
    tmin[np.abs(dirs) < _EPS] = -_INF
    tmax[np.abs(dirs) < _EPS] = _INF
    t_enter = tmin.max(axis=1)
    t_exit = tmax.min(axis=1)
    enter_axis = tmin.argmax(axis=1)
    hit = (t_enter <= t_exit) & (t_exit > _EPS) & ~parallel_miss.any(axis=1)
    t = np.where(hit, np.where(t_enter > _EPS, t_enter, t_exit), _INF)
    inside_exit = hit & (t_enter <= _EPS)
    normals = np.zeros((n, 3))
    rows = np.arange(n)
    with np.errstate(invalid="ignore"):
        pts = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
    axis_for_normal = np.where(inside_exit, np.abs(pts / half).argmax(axis=1), enter_axis)
    normals[rows, axis_for_normal] = np.sign(pts[rows, axis_for_normal])
    t = np.where(hit, t, _INF)
    return t, normals


def _ray_sphere(origins, dirs, radius):
    b = np.einsum("ij,ij->i", origins, dirs)
    c = np.einsum("ij,ij->i", origins, origins) - radius * radius
    disc = b * b - c
    ok = disc >= 0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t0 = -b - sq
    t1 = -b + sq
    t = np.where(t0 > _EPS, t0, np.where(t1 > _EPS, t1, _INF))
    t = np.where(ok, t, _INF)
    with np.errstate(invalid="ignore"):
        pts = origins + np.where(np.isfinite(t), t, 0.0)[:, None] * dirs
        normals = pts / np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), _EPS)
    return t, normals


def _ray_cylinder(origins, dirs, radius, half_h):
    n = origins.shape[0]
    t_best = np.full(n, _INF)
    normals = np.zeros((n, 3))
    ox, oy, oz = origins[:, 0], origins[:, 1], origins[:, 2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    # lateral surface
    a = dx * dx + dy * dy
    b = ox * dx + oy * dy
    c = ox * ox + oy * oy - radius * radius
    with np.errstate(divide="ignore", invalid="ignore"):
        disc = b * b - a * c
        ok = (disc >= 0) & (a > _EPS)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        for t_side in ((-b - sq) / np.where(a > _EPS, a, 1.0),
                       (-b + sq) / np.where(a > _EPS, a, 1.0)):
            z = oz + t_side * dz
            good = ok & (t_side > _EPS) & (np.abs(z) <= half_h) & (t_side < t_best)
            t_best = np.where(good, t_side, t_best)
            px = ox + t_side * dx
            py = oy + t_side * dy
            norm = np.sqrt(px * px + py * py)
            norm = np.maximum(norm, _EPS)
            normals[good] = np.stack([px / norm, py / norm, np.zeros_like(px)], axis=1)[good]
    # caps
    for zcap, nz in ((half_h, 1.0), (-half_h, -1.0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            t_cap = (zcap - oz) / np.where(np.abs(dz) > _EPS, dz, np.nan)
        x = ox + t_cap * dx
        y = oy + t_cap * dy
        good = np.isfinite(t_cap) & (t_cap > _EPS) & (x * x + y * y <= radius * radius) & (t_cap < t_best)
        t_best = np.where(good, t_cap, t_best)
        normals[good] = [0.0, 0.0, nz]
    return t_best, normals


def ray_shape(shape: str, dims, origins, dirs):
    """Local-frame intersection dispatch; returns (t, normals)."""
    if shape == "box":
        return _ray_box(origins, dirs, np.asarray(dims, dtype=float) / 2.0)
    if shape == "sphere":
        return _ray_sphere(origins, dirs, dims[0] / 2.0)
    if shape == "cylinder":
        return _ray_cylinder(origins, dirs, dims[0] / 2.0, dims[1] / 2.0)
    raise ValueError(f"unknown shape {shape!r}")


def closest_surface_point(shape: str, dims, p):
    """Closest point on the local-frame surface to p (works from inside too)."""
    p = np.asarray(p, dtype=float)
    if shape == "sphere":
        r = dims[0] / 2.0
        n = np.linalg.norm(p)
        if n < _EPS:
            return np.array([r, 0.0, 0.0])
        return p * (r / n)
    if shape == "box":
        half = np.asarray(dims, dtype=float) / 2.0
        clamped = np.clip(p, -half, half)
        if (np.abs(p) > half).any():
            return clamped
        # inside: push to the nearest face
        margins = half - np.abs(p)
        i = int(np.argmin(margins))
        out = p.copy()
        out[i] = math.copysign(half[i], p[i] if p[i] != 0 else 1.0)
        return out
    if shape == "cylinder":
        r, hh = dims[0] / 2.0, dims[1] / 2.0
        rad = math.hypot(p[0], p[1])
        if rad >= r or abs(p[2]) >= hh:
            # outside (or on): clamp radially and axially
            if rad < _EPS:
                xy = np.array([r, 0.0]) if rad > r else np.array([0.0, 0.0])
            else:
                xy = np.array([p[0], p[1]]) * (min(rad, r) / rad)
            z = min(max(p[2], -hh), hh)
            if rad <= r and abs(p[2]) >= hh:
                return np.array([p[0], p[1], math.copysign(hh, p[2])])
            return np.array([xy[0], xy[1], z])
        # inside: nearest of lateral surface vs caps
        d_side = r - rad
        d_cap = hh - abs(p[2])
        if d_side <= d_cap and rad > _EPS:
            s = r / rad
            return np.array([p[0] * s, p[1] * s, p[2]])
        return np.array([p[0], p[1], math.copysign(hh, p[2] if p[2] != 0 else 1.0)])
    raise ValueError(f"unknown shape {shape!r}")


def closest_surface_points_batch(shape: str, dims, pts: np.ndarray):
    """Vectorized closest-surface query: (closest points Nx3, signed dists N);
    negative distance means the query point is inside the shape."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    if shape == "sphere":
        r = dims[0] / 2.0
        norms = np.linalg.norm(pts, axis=1)
        safe = np.maximum(norms, _EPS)
        closest = pts * (r / safe)[:, None]
        closest[norms < _EPS] = [r, 0.0, 0.0]
        return closest, norms - r
    if shape == "box":
        half = np.asarray(dims, dtype=float) / 2.0
        clamped = np.clip(pts, -half, half)
        outside = (np.abs(pts) > half).any(axis=1)
        closest = clamped.copy()
        inside_idx = np.nonzero(~outside)[0]
        if inside_idx.size:
            margins = half - np.abs(pts[inside_idx])
            axes = margins.argmin(axis=1)
            rows = np.arange(inside_idx.size)
            vals = np.copysign(half[axes], np.where(pts[inside_idx, axes] != 0,
                                                    pts[inside_idx, axes], 1.0))
            closest[inside_idx, :] = pts[inside_idx, :]
            closest[inside_idx, axes] = vals
        dist = np.linalg.norm(closest - pts, axis=1)
        return closest, np.where(outside, dist, -dist)
    if shape == "cylinder":
        closest = np.empty_like(pts)
        signed = np.empty(n)
        for i in range(n):
            c = closest_surface_point(shape, dims, pts[i])
            closest[i] = c
            d = float(np.linalg.norm(c - pts[i]))
            rad = math.hypot(pts[i, 0], pts[i, 1])
            inside = rad <= dims[0] / 2.0 + 1e-12 and abs(pts[i, 2]) <= dims[1] / 2.0 + 1e-12
            signed[i] = -d if inside else d
        return closest, signed
    raise ValueError(f"unknown shape {shape!r}")


def shape_bound_radius(shape: str, dims) -> float:
    if shape == "box":
        return float(np.linalg.norm(dims)) / 2.0
    if shape == "cylinder":
        return math.hypot(dims[0] / 2.0, dims[1] / 2.0)
    if shape == "sphere":
        return dims[0] / 2.0
    raise ValueError(f"unknown shape {shape!r}")


@dataclass
class ScenePrim:
    obj_id: str
    pose: Pose
    shape: str
    dims: list
    color: tuple


class RayScene:
    """A flat list of world-frame primitives castable in one call."""

    def __init__(self, prims, floor_color=(0.82, 0.82, 0.84)):
        self.prims = list(prims)
        self.floor_color = floor_color

    def cast(self, origins, dirs, include_floor=True):
        """Nearest hits: returns (t, hit_index, points, normals, colors);
        hit_index -1 means floor, -2 means nothing."""
        origins = np.atleast_2d(np.asarray(origins, dtype=float))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        n = origins.shape[0]
        best_t = np.full(n, _INF)
        best_idx = np.full(n, -2, dtype=int)
        best_n = np.zeros((n, 3))
        for i, prim in enumerate(self.prims):
            r = prim.pose.rotation_matrix()
            local_o = (origins - prim.pose.position) @ r
            local_d = dirs @ r
            t, normals = ray_shape(prim.shape, prim.dims, local_o, local_d)
            closer = t < best_t
            best_t = np.where(closer, t, best_t)
            best_idx = np.where(closer, i, best_idx)
            best_n[closer] = normals[closer] @ r.T
        if include_floor:
            with np.errstate(divide="ignore", invalid="ignore"):
                t_floor = -origins[:, 2] / dirs[:, 2]
            good = np.isfinite(t_floor) & (t_floor > _EPS) & (t_floor < best_t)
            best_t = np.where(good, t_floor, best_t)
            best_idx = np.where(good, -1, best_idx)
            best_n[good] = [0.0, 0.0, 1.0]
        with np.errstate(invalid="ignore"):
            pts = origins + best_t[:, None] * dirs
        colors = np.zeros((n, 3))
        for i, prim in enumerate(self.prims):
            colors[best_idx == i] = prim.color
        colors[best_idx == -1] = self.floor_color
        return best_t, best_idx, pts, best_n, colors
