"""Rotation frames, rotation cascades and the sphere atlas.

Each split of a collision tree contributes a pair of special-orthogonal
frames, functions of the split's angles (phi, theta):

    left(phi, theta)  = [[-cos t cos p,  sin t,  cos t sin p],
                         [-sin t cos p, -cos t,  sin t sin p],
                         [ sin p,             0,       cos p]]

    right(phi, theta) = [[ sin t,  cos t sin p, -cos t cos p],
                         [-cos t,  sin t sin p, -sin t cos p],
                         [      0,       cos p,        sin p]]

Their third columns are the post-collisional directions of the two
branches when the incoming direction is e3.  Composing them along
root-to-leaf paths yields one rotation per leaf; applied to e3 and mapped
through a frame B(u) with B(u) e3 = u they give the leaf directions on the
sphere.  No continuous global B exists, so B is realized through four
smooth elliptic charts, each carrying an explicit orthonormal frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ArityMismatch, OutOfChart
from .tree import McKeanTree

E3 = np.array([0.0, 0.0, 1.0])
ROTATION_TOL = 1e-12
CHART_TOL = 1e-9

_ELLIPSE_A = 5.0 * math.pi      # u half-axis scale
_ELLIPSE_B = 11.0 * math.pi     # v half-axis scale
_ELLIPSE_R2 = (1.0 / 12.0) ** 2
_V_CENTER = {1: math.pi, 2: 0.0, 3: math.pi, 4: 0.0}


def left_frame(phi, theta) -> np.ndarray:
    """Left collision frame; vectorized, returns shape (..., 3, 3)."""
    p, t = np.broadcast_arrays(np.asarray(phi, float), np.asarray(theta, float))
    cp, sp, ct, st = np.cos(p), np.sin(p), np.cos(t), np.sin(t)
    out = np.empty(p.shape + (3, 3))
    out[..., 0, 0] = -ct * cp
    out[..., 0, 1] = st
    out[..., 0, 2] = ct * sp
    out[..., 1, 0] = -st * cp
    out[..., 1, 1] = -ct
    out[..., 1, 2] = st * sp
    out[..., 2, 0] = sp
    out[..., 2, 1] = 0.0
    out[..., 2, 2] = cp
    return out


def right_frame(phi, theta) -> np.ndarray:
    """Right collision frame; vectorized, returns shape (..., 3, 3)."""
    p, t = np.broadcast_arrays(np.asarray(phi, float), np.asarray(theta, float))
    cp, sp, ct, st = np.cos(p), np.sin(p), np.cos(t), np.sin(t)
    out = np.empty(p.shape + (3, 3))
    out[..., 0, 0] = st
    out[..., 0, 1] = ct * sp
    out[..., 0, 2] = -ct * cp
    out[..., 1, 0] = -ct
    out[..., 1, 1] = st * sp
    out[..., 1, 2] = -st * cp
    out[..., 2, 0] = 0.0
    out[..., 2, 1] = cp
    out[..., 2, 2] = sp
    return out


def collision_frames(phi: float, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """The (left, right) frame pair of one split."""
    return left_frame(phi, theta), right_frame(phi, theta)


def rotation_z(alpha: float) -> np.ndarray:
    c, s = math.cos(alpha), math.sin(alpha)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def is_rotation(q: np.ndarray, tol: float = ROTATION_TOL) -> bool:
    q = np.asarray(q)
    if q.shape != (3, 3):
        return False
    ortho = float(np.max(np.abs(q.T @ q - np.eye(3))))
    return ortho < tol and abs(float(np.linalg.det(q)) - 1.0) < tol


@dataclass(frozen=True)
class RotationArray:
    """One rotation per leaf, in left-to-right leaf order."""

    rotations: np.ndarray                 # (n, 3, 3)
    provenance: tuple | None = None

    def __len__(self):
        return len(self.rotations)

    def third_columns(self) -> np.ndarray:
        return self.rotations[:, :, 2]


def _check_arity(tree, phis, thetas):
    want = tree.leaf_count - 1
    if len(phis) != want or len(thetas) != want:
        raise ArityMismatch(
            f"need {want} angle pairs for {tree.leaf_count} leaves, "
            f"got {len(phis)}, {len(thetas)}"
        )


def rotation_array(tree: McKeanTree, phis, thetas) -> RotationArray:
    """Compose the per-leaf rotations recursively from the root split down.

    Angle ordering matches leaf_weights: the last pair belongs to the root
    split, the first n_l - 1 pairs to the left subtree.
    """
    phis = np.asarray(phis, float)
    thetas = np.asarray(thetas, float)
    _check_arity(tree, phis, thetas)
    return RotationArray(rotations=np.array(_build_rotations(tree, phis, thetas)))


def _build_rotations(tree, phis, thetas):
    if tree.is_leaf:
        return [np.eye(3)]
    ml, mr = collision_frames(phis[-1], thetas[-1])
    n_l = tree.left.leaf_count
    left = _build_rotations(tree.left, phis[: n_l - 1], thetas[: n_l - 1])
    right = _build_rotations(tree.right, phis[n_l - 1 : -1], thetas[n_l - 1 : -1])
    return [ml @ q for q in left] + [mr @ q for q in right]


def path_product_rotation(tree: McKeanTree, phis, thetas, leaf_index: int) -> np.ndarray:
    """Independent construction of one leaf's rotation as an explicit
    ordered product of frames along the root-to-leaf path."""
    phis = np.asarray(phis, float)
    thetas = np.asarray(thetas, float)
    _check_arity(tree, phis, thetas)
    if not 0 <= leaf_index < tree.leaf_count:
        raise ArityMismatch(f"leaf index {leaf_index} outside 0..{tree.leaf_count - 1}")

    # collect (side, global angle slot) pairs walking down, then multiply
    # in path order: the factor at the root stands leftmost
    path: list[tuple[str, int]] = []
    node, j, lo, hi = tree, leaf_index, 0, tree.leaf_count - 1
    while not node.is_leaf:
        n_l = node.left.leaf_count
        if j < n_l:
            path.append(("l", hi - 1))
            node, hi = node.left, lo + n_l - 1
        else:
            path.append(("r", hi - 1))
            node, j, lo, hi = node.right, j - n_l, lo + n_l - 1, hi - 1
    out = np.eye(3)
    for side, slot in path:
        frame = left_frame if side == "l" else right_frame
        out = out @ frame(phis[slot], thetas[slot])
    return out


def leaf_third_columns_batch(tree: McKeanTree, phis, thetas: np.ndarray) -> np.ndarray:
    """Third columns of every leaf rotation across a batch of theta draws.

    phis has length n-1 (fixed); thetas has shape (batch, n-1).  Returns
    (n, batch, 3).  Only the e3 images are propagated, so each split costs
    one matrix-vector product per leaf.
    """
    phis = np.asarray(phis, float)
    thetas = np.asarray(thetas, float)
    if thetas.ndim != 2 or thetas.shape[1] != tree.leaf_count - 1 or (
        len(phis) != tree.leaf_count - 1
    ):
        raise ArityMismatch("phis/thetas do not match the tree size")

    def build(node, p, t):
        if node.is_leaf:
            return [np.tile(E3, (thetas.shape[0], 1))]
        n_l = node.left.leaf_count
        ml = left_frame(p[-1], t[:, -1])
        mr = right_frame(p[-1], t[:, -1])
        left = build(node.left, p[: n_l - 1], t[:, : n_l - 1])
        right = build(node.right, p[n_l - 1 : -1], t[:, n_l - 1 : -1])
        return [np.einsum("bij,bj->bi", ml, c) for c in left] + [
            np.einsum("bij,bj->bi", mr, c) for c in right
        ]

    return np.array(build(tree, phis, thetas))


def leaf_directions(basis: np.ndarray, rotations: RotationArray) -> np.ndarray:
    """Unit directions basis @ O_j @ e3 for every leaf, shape (n, 3)."""
    return rotations.third_columns() @ np.asarray(basis).T


# --- sphere atlas -------------------------------------------------------------

def chart_point(k: int, u: float, v: float) -> np.ndarray:
    """Parametrization of chart k at local coordinates (u, v)."""
    su, cu, sv, cv = math.sin(u), math.cos(u), math.sin(v), math.cos(v)
    if k in (1, 2):
        return np.array([cv * su, sv * su, cu])
    if k in (3, 4):
        return np.array([cu, cv * su, sv * su])
    raise OutOfChart(f"chart index {k} outside 1..4")


def _ellipse_excess(k: int, u: float, v: float) -> float:
    du = (u - math.pi / 2.0) / _ELLIPSE_A
    dv = (v - _V_CENTER[k]) / _ELLIPSE_B
    return du * du + dv * dv - _ELLIPSE_R2


def chart_parameters(k: int, w) -> tuple[float, float]:
    """Invert the chart map at a unit vector; OutOfChart beyond the domain."""
    w = np.asarray(w, float)
    if k in (1, 2):
        u = math.acos(min(1.0, max(-1.0, float(w[2]))))
        v = math.atan2(float(w[1]), float(w[0]))
    elif k in (3, 4):
        u = math.acos(min(1.0, max(-1.0, float(w[0]))))
        v = math.atan2(float(w[2]), float(w[1]))
    else:
        raise OutOfChart(f"chart index {k} outside 1..4")
    if k in (1, 3) and v < 0.0:
        v += 2.0 * math.pi
    if _ellipse_excess(k, u, v) > CHART_TOL:
        raise OutOfChart(f"direction outside chart {k}")
    return u, v


def chart_contains(k: int, w) -> bool:
    try:
        chart_parameters(k, w)
    except OutOfChart:
        return False
    return True


def chart_for_direction(w) -> int:
    """First chart (in the fixed order 1..4) containing the direction."""
    for k in (1, 2, 3, 4):
        if chart_contains(k, w):
            return k
    raise OutOfChart("direction not covered by any chart")  # pragma: no cover


def _basis_from_parameters(k: int, u: float, v: float) -> np.ndarray:
    su, cu, sv, cv = math.sin(u), math.cos(u), math.sin(v), math.cos(v)
    rows = [[sv, cv * cu, cv * su], [-cv, sv * cu, sv * su], [0.0, -su, cu]]
    if k in (1, 2):
        return np.array(rows)
    return np.array([rows[2], rows[0], rows[1]])


def chart_basis(k: int, w) -> np.ndarray:
    """Orthonormal frame of chart k whose third column is the direction."""
    u, v = chart_parameters(k, w)
    return _basis_from_parameters(k, u, v)


@dataclass(frozen=True)
class ChartAtlas:
    """The four-chart atlas; chart selection is first-containing in 1..4."""

    charts: tuple[int, ...] = (1, 2, 3, 4)

    def contains(self, k, w):
        return chart_contains(k, w)

    def parameters(self, k, w):
        return chart_parameters(k, w)

    def point(self, k, u, v):
        return chart_point(k, u, v)

    def basis(self, k, w):
        return chart_basis(k, w)

    def chart_for(self, w):
        return chart_for_direction(w)

    def frame_for(self, w) -> np.ndarray:
        return chart_basis(chart_for_direction(w), w)


ATLAS = ChartAtlas()
