"""Offshore substation siting by fuzzy c-means clustering of turbine positions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ecsplan.farm import InvalidArgument, Node, NodeKind, WindFarmInstance

DISPLACEMENT_KM = 1e-3


@dataclass(frozen=True)
class FcmResult:
    centers: np.ndarray  # (c, 2)
    membership: np.ndarray  # (n, c)
    iterations: int
    objective: float
    objective_trace: tuple[float, ...]


def _seed_centers(points: np.ndarray, c: int, rng: np.random.Generator) -> np.ndarray:
    # k-means++ seeding
    n = len(points)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((points - points[chosen[0]]) ** 2, axis=1)
    for _ in range(1, c):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((points - points[idx]) ** 2, axis=1))
    return points[chosen].astype(float)


def _memberships(points: np.ndarray, centers: np.ndarray, m: float) -> np.ndarray:
    dist = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
    u = np.empty_like(dist)
    coincident = dist <= 1e-12
    hit = coincident.any(axis=1)
    if hit.any():
        # a point sitting on a center belongs to it entirely
        rows = coincident[hit]
        first = rows.argmax(axis=1)
        u_hit = np.zeros_like(rows, dtype=float)
        u_hit[np.arange(len(first)), first] = 1.0
        u[hit] = u_hit
    free = ~hit
    if free.any():
        d = dist[free]
        ratio = (d[:, :, None] / d[:, None, :]) ** (2.0 / (m - 1.0))
        u[free] = 1.0 / ratio.sum(axis=2)
    return u


def _objective(points: np.ndarray, centers: np.ndarray, u: np.ndarray, m: float, w: np.ndarray) -> float:
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return float(np.sum((u**m) * d2 * w[:, None]))


def fcm_cluster(
    points,
    c: int,
    m: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 300,
    seed: int = 7,
    weights=None,
) -> FcmResult:
    """Fuzzy c-means fixed-point iteration.

    Alternates membership and center updates until the largest center move
    drops below ``tol`` (km) or ``max_iter`` is reached. ``weights`` scales
    each point's contribution to the centers (capacity-weighted siting).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise InvalidArgument("points must be an (n, 2) array")
    if c < 1:
        raise InvalidArgument(f"cluster count must be >= 1, got {c}")
    if m <= 1:
        raise InvalidArgument(f"fuzzifier must be > 1, got {m}")
    if c > len(pts):
        raise InvalidArgument(f"cannot form {c} clusters from {len(pts)} points")
    w = np.ones(len(pts)) if weights is None else np.asarray(weights, dtype=float)

    rng = np.random.default_rng(seed)
    centers = _seed_centers(pts, c, rng)
    u = _memberships(pts, centers, m)
    trace = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        um = (u**m) * w[:, None]
        new_centers = (um.T @ pts) / um.sum(axis=0)[:, None]
        u = _memberships(pts, new_centers, m)
        trace.append(_objective(pts, new_centers, u, m, w))
        shift = float(np.max(np.linalg.norm(new_centers - centers, axis=1)))
        centers = new_centers
        if shift < tol:
            break
    return FcmResult(
        centers=centers,
        membership=u,
        iterations=iterations,
        objective=trace[-1],
        objective_trace=tuple(trace),
    )


def place_substations(
    instance: WindFarmInstance,
    c: int = 1,
    m: float = 2.0,
    tol: float = 1e-6,
    max_iter: int = 300,
    seed: int = 7,
    capacity_weighted: bool = False,
) -> WindFarmInstance:
    """Append ``c`` substations at the FCM centers of the turbine positions.

    A center landing on a turbine is nudged 1 m east so coordinates stay
    distinct.
    """
    if instance.substations:
        raise InvalidArgument("instance already has substations")
    turbines = instance.turbines
    pts = np.array([t.coord for t in turbines])
    weights = np.array([t.gen for t in turbines]) if capacity_weighted else None
    result = fcm_cluster(pts, c, m=m, tol=tol, max_iter=max_iter, seed=seed, weights=weights)

    taken = {n.coord for n in instance.nodes}
    new_nodes = []
    next_id = len(instance.nodes)
    for cx, cy in result.centers:
        x, y = float(cx), float(cy)
        while any(abs(x - tx) < 1e-9 and abs(y - ty) < 1e-9 for tx, ty in taken):
            x += DISPLACEMENT_KM
        taken.add((x, y))
        new_nodes.append(Node(next_id, NodeKind.SUBSTATION, x, y, 0.0))
        next_id += 1
    return instance.with_nodes(new_nodes)
