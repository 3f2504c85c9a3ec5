#!/usr/bin/env python3
"""Builds the watertight test meshes in data/ from the raw Stanford bunny scan.

The raw scan (binary PLY, ~100k faces, open at the base) ships in the pymeshfix
source distribution under src/pymeshfix/examples/StanfordBunny.ply. That copy is
z-up in arbitrary units; the outputs are y-up and in meters (longest side 0.156 m,
the size of the physical statuette).

    pip install pymeshfix fast-simplification
    python3 tools/prepare_meshes.py StanfordBunny.ply data/

Writes:
    bunny.obj       decimated, repaired, <= 10k triangles
    bunny_full.ply  repaired full-resolution scan (>= 10x the triangles of bunny.obj)
"""
import sys
from pathlib import Path

import fast_simplification
import numpy as np
import pymeshfix


LONGEST_SIDE_M = 0.156


def read_ply(path):
    data = Path(path).read_bytes()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").splitlines()
    nv = nf = 0
    for line in header:
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            nv = int(tok[2])
        elif tok[:2] == ["element", "face"]:
            nf = int(tok[2])
    verts = np.frombuffer(data, dtype="<f4", count=3 * nv, offset=end).reshape(nv, 3)
    rec = np.dtype([("n", "u1"), ("i", "<i4", (3,))])
    faces = np.frombuffer(data, dtype=rec, count=nf, offset=end + 12 * nv)
    assert np.all(faces["n"] == 3)
    return verts.astype(np.float64), faces["i"].astype(np.int64)


def repair(v, f):
    fixer = pymeshfix.MeshFix(v, f)
    fixer.repair(joincomp=True, remove_smallest_components=True)
    return np.asarray(fixer.points), np.asarray(fixer.faces)


def check(v, f):
    edges = {}
    for tri in f:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edges[(a, b)] = edges.get((a, b), 0) + 1
    for (a, b), n in edges.items():
        assert n == 1 and edges.get((b, a), 0) == 1, "not watertight"
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    vol = np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0
    assert vol > 0, "inward orientation"
    return vol


def write_obj(path, v, f):
    with open(path, "w") as out:
        out.write(f"# {len(v)} vertices, {len(f)} triangles\n")
        for p in v:
            out.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for t in f:
            out.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def write_ply(path, v, f):
    head = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(v)}\nproperty float x\nproperty float y\nproperty float z\n"
        f"element face {len(f)}\nproperty list uchar int vertex_indices\nend_header\n"
    )
    rec = np.zeros(len(f), dtype=[("n", "u1"), ("i", "<i4", (3,))])
    rec["n"] = 3
    rec["i"] = f
    with open(path, "wb") as out:
        out.write(head.encode("ascii"))
        out.write(v.astype("<f4").tobytes())
        out.write(rec.tobytes())


def main():
    src, dst = sys.argv[1], Path(sys.argv[2])
    dst.mkdir(parents=True, exist_ok=True)
    v, f = read_ply(src)
    v = np.stack([v[:, 0], v[:, 2], -v[:, 1]], axis=1)  # z-up -> y-up, a proper rotation
    v *= LONGEST_SIDE_M / (v.max(0) - v.min(0)).max()
    v, f = repair(v, f)
    check(v, f)
    write_ply(dst / "bunny_full.ply", v, f)
    print("bunny_full:", len(f), "triangles")

    target = 9000
    dv, df = fast_simplification.simplify(v.astype(np.float32), f.astype(np.int32),
                                          target_reduction=1.0 - target / len(f))
    dv, df = repair(dv.astype(np.float64), df.astype(np.int64))
    check(dv, df)
    assert len(df) <= 10000 and len(f) >= 10 * len(df)
    write_obj(dst / "bunny.obj", dv, df)
    print("bunny:", len(df), "triangles")


if __name__ == "__main__":
    main()
