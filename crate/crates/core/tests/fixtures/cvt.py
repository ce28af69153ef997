"""Centroidal Voronoi meshes of the unit square in the patchls mesh format.

    python3 cvt.py 250 1000 4000

Seeds are mirrored across the four sides so the clipped cells come straight
out of one Voronoi diagram; Lloyd iterations move each seed to its cell
centroid.  Fixed seed per size, so the files are reproducible.
"""

import sys

import numpy as np
from scipy.spatial import Voronoi

ITERATIONS = 60
MERGE_TOL = 1e-9


def mirrored(p):
    x, y = p[:, 0], p[:, 1]
    return np.vstack([
        p,
        np.column_stack([-x, y]),
        np.column_stack([2.0 - x, y]),
        np.column_stack([x, -y]),
        np.column_stack([x, 2.0 - y]),
    ])


def cells(p):
    vor = Voronoi(mirrored(p))
    return vor.vertices, [vor.regions[vor.point_region[i]] for i in range(len(p))]


def centroid(poly):
    x, y = poly[:, 0], poly[:, 1]
    xs, ys = np.roll(x, -1), np.roll(y, -1)
    cr = x * ys - xs * y
    a = cr.sum() / 2.0
    return np.array([((x + xs) * cr).sum(), ((y + ys) * cr).sum()]) / (6.0 * a)


def ccw(poly_ids, verts):
    poly = verts[poly_ids]
    c = poly.mean(axis=0)
    ang = np.arctan2(poly[:, 1] - c[1], poly[:, 0] - c[0])
    return [poly_ids[i] for i in np.argsort(ang)]


def lloyd(n, seed):
    rng = np.random.default_rng(seed)
    p = rng.random((n, 2))
    for _ in range(ITERATIONS):
        verts, regs = cells(p)
        p = np.array([centroid(verts[ccw(r, verts)]) for r in regs])
    return p


def mesh(p):
    verts, regs = cells(p)
    regs = [ccw(r, verts) for r in regs]
    verts = verts.copy()
    verts[np.abs(verts) < MERGE_TOL] = 0.0
    verts[np.abs(verts - 1.0) < MERGE_TOL] = 1.0

    # Near-coincident Voronoi vertices (almost cocircular seeds) are merged.
    used = sorted({v for r in regs for v in r})
    rep = {}
    kept = []
    for v in used:
        for k in kept:
            if np.linalg.norm(verts[v] - verts[k]) < MERGE_TOL:
                rep[v] = k
                break
        else:
            rep[v] = v
            kept.append(v)
    new_id = {v: i for i, v in enumerate(kept)}
    out = []
    for r in regs:
        ids = []
        for v in r:
            i = new_id[rep[v]]
            if not ids or ids[-1] != i:
                ids.append(i)
        if ids[0] == ids[-1]:
            ids.pop()
        out.append(ids)
    return verts[kept], out


def write(path, verts, polys):
    with open(path, "w") as f:
        f.write(f"# centroidal Voronoi mesh of the unit square, {len(polys)} cells\n")
        f.write(f"2 {len(verts)} {len(polys)}\n")
        for x, y in verts:
            f.write(f"{x:.17e} {y:.17e}\n")
        for ids in polys:
            f.write(f"{len(ids)} " + " ".join(map(str, ids)) + "\n")


def main():
    for arg in sys.argv[1:]:
        n = int(arg)
        verts, polys = mesh(lloyd(n, seed=n))
        edges = [np.linalg.norm(verts[a] - verts[b]) for ids in polys for a, b in zip(ids, ids[1:] + ids[:1])]
        write(f"voronoi_{n}.mesh", verts, polys)
        print(f"{n} cells, {len(verts)} vertices, shortest edge {min(edges):.3e}, h ~ {n ** -0.5:.3e}")


if __name__ == "__main__":
    main()
