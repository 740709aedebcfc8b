"""Generate the bundled coarse cylinder-channel mesh (Triangle text format).

Channel (0, 2.2) x (0, 0.41) with a circular hole of radius 0.05 centered at
(0.2, 0.2), approximated by a polygon whose vertices lie exactly on the
circle.  Point cloud = graded rings around the hole + background grid;
Delaunay triangulation with Laplacian smoothing of the free points.  The
output files are committed under src/flowrom/data/, so this script only
needs to run when regenerating them.

Boundary markers: 1 inflow (x=0), 2 outflow (x=2.2), 3 walls, 4 cylinder.

Usage: python3 tools/make_cylinder_mesh.py [outdir]
"""

import sys
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay

LX, LY = 2.2, 0.41
CX, CY, R = 0.2, 0.2, 0.05


def point_cloud():
    pts = []
    fixed = []  # True for points that smoothing must not move

    # hole rings: innermost exactly on the circle, gaps matched to arc spacing
    n_circ = 30
    rings = [(R, 1.0), (0.0615, 1.0), (0.0755, 1.05), (0.0935, 1.15), (0.117, 1.25), (0.149, 1.4)]
    for i, (rad, frac) in enumerate(rings):
        n = int(round(n_circ * frac))
        th = 2 * np.pi * (np.arange(n) + 0.5 * (i % 2)) / n
        ring = np.column_stack([CX + rad * np.cos(th), CY + rad * np.sin(th)])
        pts.append(ring)
        fixed.extend([i == 0] * n)

    hbg = 0.0275
    # rectangle boundary
    nx = int(round(LX / hbg))
    ny = int(round(LY / hbg))
    xs = np.linspace(0, LX, nx + 1)
    ys = np.linspace(0, LY, ny + 1)
    for y in (0.0, LY):
        pts.append(np.column_stack([xs, np.full_like(xs, y)]))
        fixed.extend([True] * len(xs))
    for x in (0.0, LX):
        pts.append(np.column_stack([np.full_like(ys[1:-1], x), ys[1:-1]]))
        fixed.extend([True] * (len(ys) - 2))

    # interior background grid (skip the ring neighborhood), slight jitter to
    # avoid co-circular Delaunay degeneracies
    rng = np.random.default_rng(20240611)
    gx, gy = np.meshgrid(xs[1:-1], ys[1:-1])
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    grid = grid + rng.uniform(-0.08 * hbg, 0.08 * hbg, grid.shape)
    keep = np.linalg.norm(grid - [CX, CY], axis=1) > 0.149 + 0.5 * hbg
    keep &= (grid[:, 0] > 0.35 * hbg) & (grid[:, 0] < LX - 0.35 * hbg)
    keep &= (grid[:, 1] > 0.35 * hbg) & (grid[:, 1] < LY - 0.35 * hbg)
    pts.append(grid[keep])
    fixed.extend([False] * int(keep.sum()))

    return np.vstack(pts), np.array(fixed, dtype=bool)


def triangulate(points):
    tri = Delaunay(points)
    t = tri.simplices
    centroids = points[t].mean(axis=1)
    outside_hole = np.linalg.norm(centroids - [CX, CY], axis=1) > R
    return t[outside_hole]


def smooth(points, fixed, iterations=40):
    pts = points.copy()
    for _ in range(iterations):
        t = triangulate(pts)
        neighbor_sum = np.zeros_like(pts)
        neighbor_cnt = np.zeros(len(pts))
        for a, b in ((0, 1), (1, 2), (2, 0)):
            np.add.at(neighbor_sum, t[:, a], pts[t[:, b]])
            np.add.at(neighbor_cnt, t[:, a], 1)
            np.add.at(neighbor_sum, t[:, b], pts[t[:, a]])
            np.add.at(neighbor_cnt, t[:, b], 1)
        target = neighbor_sum / np.maximum(neighbor_cnt, 1)[:, None]
        free = ~fixed
        pts[free] += 0.7 * (target[free] - pts[free])
    return pts, triangulate(pts)


def min_angle_deg(points, tris):
    angles = []
    for i in range(3):
        a = points[tris[:, i]]
        b = points[tris[:, (i + 1) % 3]]
        c = points[tris[:, (i + 2) % 3]]
        v1, v2 = b - a, c - a
        cosang = np.sum(v1 * v2, axis=1) / (np.linalg.norm(v1, axis=1) * np.linalg.norm(v2, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cosang, -1, 1))))
    return np.min(angles)


def boundary_edges(tris):
    edges = {}
    for tri in tris:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (min(a, b), max(a, b))
            edges[key] = edges.get(key, 0) + 1
    return [e for e, cnt in edges.items() if cnt == 1]


def marker_of(points, a, b):
    pa, pb = points[a], points[b]
    tol = 1e-9
    if abs(pa[0]) < tol and abs(pb[0]) < tol:
        return 1
    if abs(pa[0] - LX) < tol and abs(pb[0] - LX) < tol:
        return 2
    if (abs(pa[1]) < tol and abs(pb[1]) < tol) or (abs(pa[1] - LY) < tol and abs(pb[1] - LY) < tol):
        return 3
    ra = np.hypot(pa[0] - CX, pa[1] - CY)
    rb = np.hypot(pb[0] - CX, pb[1] - CY)
    if abs(ra - R) < 1e-6 and abs(rb - R) < 1e-6:
        return 4
    raise RuntimeError(f"boundary edge {a}-{b} at {pa}, {pb} matches no marker")


def write_triangle_files(outdir, points, tris, bedges, markers):
    outdir = Path(outdir)
    with open(outdir / "cylinder_coarse.node", "w") as f:
        f.write(f"{len(points)} 2 0 0\n")
        for i, (x, y) in enumerate(points, start=1):
            f.write(f"{i} {x:.17g} {y:.17g}\n")
    with open(outdir / "cylinder_coarse.ele", "w") as f:
        f.write(f"{len(tris)} 3 0\n")
        for i, (a, b, c) in enumerate(tris, start=1):
            f.write(f"{i} {a + 1} {b + 1} {c + 1}\n")
    with open(outdir / "cylinder_coarse.edge", "w") as f:
        f.write(f"{len(bedges)} 1\n")
        for i, ((a, b), m) in enumerate(zip(bedges, markers), start=1):
            f.write(f"{i} {a + 1} {b + 1} {m}\n")


def main():
    outdir = sys.argv[1] if len(sys.argv) > 1 else "src/flowrom/data"
    points, fixed = point_cloud()
    points, tris = smooth(points, fixed)

    # ensure CCW orientation
    d1 = points[tris[:, 1]] - points[tris[:, 0]]
    d2 = points[tris[:, 2]] - points[tris[:, 0]]
    areas = 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    flip = areas < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]

    used = np.unique(tris)
    assert used.size == len(points), "smoothing left orphan points"

    bed = boundary_edges(tris)
    markers = [marker_of(points, a, b) for a, b in bed]

    area = np.abs(areas).sum()
    exact = LX * LY - np.pi * R**2
    print(f"triangles: {len(tris)}, vertices: {len(points)}")
    print(f"min angle: {min_angle_deg(points, tris):.2f} deg")
    print(f"area defect: {abs(area - exact) / exact:.2e}")
    print(f"boundary edges: {len(bed)} (markers: { {m: markers.count(m) for m in set(markers)} })")

    write_triangle_files(outdir, points, tris, bed, markers)
    print(f"wrote {outdir}/cylinder_coarse.{{node,ele,edge}}")


if __name__ == "__main__":
    main()
