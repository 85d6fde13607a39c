import numpy as np
from hypothesis import strategies as st

from transversality.sets import (
    Ball,
    HalfSpace,
    Intersection,
    Parabola,
    Polyhedron,
    Sphere,
    Union,
    line,
)

coord = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


def vectors(dim):
    return st.lists(coord, min_size=dim, max_size=dim).map(np.array)


@st.composite
def unit_vectors(draw, dim=2):
    v = draw(st.lists(st.floats(-1, 1), min_size=dim, max_size=dim).map(np.array))
    n = np.linalg.norm(v)
    if n < 1e-3:
        v, n = np.eye(dim)[0], 1.0
    return v / n


@st.composite
def convex_sets(draw, dim=2):
    kind = draw(st.sampled_from(["affine", "halfspace", "ball", "polyhedron", "intersection"]))
    if kind == "affine":
        return line(draw(unit_vectors(dim)), draw(vectors(dim)))
    if kind == "halfspace":
        return HalfSpace(draw(unit_vectors(dim)), draw(st.floats(-1, 1)))
    if kind == "ball":
        return Ball(draw(vectors(dim)), draw(st.floats(0.2, 2.0)))
    if kind == "polyhedron":
        # a cone-like region around the origin, always nonempty
        hs = [HalfSpace(draw(unit_vectors(dim)), draw(st.floats(0.0, 1.0))) for _ in range(3)]
        return Polyhedron.from_halfspaces(hs)
    return Intersection((Ball(np.zeros(dim), 1.5), HalfSpace(draw(unit_vectors(dim)), 0.3)))


@st.composite
def any_sets(draw, dim=2):
    kind = draw(st.sampled_from(["convex", "sphere", "parabola", "union"]))
    if kind == "convex":
        return draw(convex_sets(dim))
    if kind == "sphere":
        return Sphere(draw(vectors(dim)), draw(st.floats(0.3, 2.0)))
    if kind == "parabola":
        name = draw(st.sampled_from(["parabola", "parabola_epigraph", "parabola_hypograph"]))
        return Parabola(name, draw(st.floats(0.2, 3.0)), np.zeros(dim), (0, 1))
    return Union((line(draw(unit_vectors(dim))), line(draw(unit_vectors(dim)), draw(vectors(dim)))))


def brute_force_nearest(points: np.ndarray, x: np.ndarray):
    """Nearest entries of a dense point cloud of the set (oracle for curved sets)."""
    d = np.linalg.norm(points - x, axis=1)
    return points[np.argmin(d)], float(d.min())


def dense_affine_union(dirs, span=4.0, count=200001):
    t = np.linspace(-span, span, count)
    return np.vstack([np.outer(t, d) for d in dirs])

