"""Generalized-ICP scan matching and keyframe submap maintenance.

Scan-to-scan alignment minimizes the Mahalanobis residual
E(X) = sum_i d_i^T (C_i^t + R C_i^s R^T)^{-1} d_i, d_i = p_i^t - X p_i^s,
over nearest-neighbor correspondences, by Gauss-Newton on SE(3) with
left-multiplicative increments and step halving. Scan-to-map refines the
world pose against a submap assembled from the nearest keyframes.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.spatial import cKDTree

from .se3 import PoseSE3


class TooFewPointsError(ValueError):
    pass


class NoCorrespondencesError(RuntimeError):
    pass


class EmptySubmapError(ValueError):
    pass


@dataclass
class GicpConfig:
    knn: int = 10
    cov_epsilon: float = 1e-3
    max_iterations: int = 64
    translation_tol: float = 1e-6
    rotation_tol: float = 1e-6
    cost_tol: float = 1e-6  # relative per-step improvement floor
    max_correspondence_dist: float = 1.0
    keyframe_dist: float = 1.0
    keyframe_angle: float = 30.0  # degrees
    submap_k_nearest: int = 10

    def __post_init__(self):
        values = (self.knn, self.cov_epsilon, self.max_iterations,
                  self.translation_tol, self.rotation_tol, self.cost_tol,
                  self.max_correspondence_dist, self.keyframe_dist,
                  self.keyframe_angle, self.submap_k_nearest)
        if any(v <= 0 for v in values):
            raise ValueError("all GICP parameters must be positive")


class CovPoint(NamedTuple):
    position: np.ndarray
    covariance: np.ndarray


class CovPoints:
    """A set of points with per-point 3x3 covariances."""

    def __init__(self, positions, covariances):
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 3)
        self.covariances = np.asarray(covariances, dtype=float).reshape(-1, 3, 3)
        if len(self.positions) != len(self.covariances):
            raise ValueError("positions and covariances lengths differ")
        self._tree = None

    def kdtree(self):
        """Nearest-neighbor index, built once (treat the set as immutable)."""
        if self._tree is None:
            self._tree = cKDTree(self.positions)
        return self._tree

    def __len__(self):
        return self.positions.shape[0]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return CovPoint(self.positions[i], self.covariances[i])
        return CovPoints(self.positions[i], self.covariances[i])

    def transformed(self, pose):
        R = pose.rotation
        pos = self.positions @ R.T + pose.translation
        cov = np.einsum("ab,nbc,dc->nad", R, self.covariances, R)
        return CovPoints(pos, cov)


def estimate_covariances(cloud, cfg=None, regularize=True):
    """Per-point covariance of the knn nearest neighbors, regularized
    plane-to-plane: eigenvalues replaced by (cov_epsilon, 1, 1)."""
    cfg = cfg or GicpConfig()
    n = len(cloud)
    if n <= cfg.knn:
        raise TooFewPointsError(f"need more than knn={cfg.knn} points, got {n}")
    tree = cKDTree(cloud.xyz)
    _, idx = tree.query(cloud.xyz, k=cfg.knn + 1, workers=-1)  # first neighbor is the point itself
    nbr = cloud.xyz[idx[:, 1:]]
    mu = nbr.mean(axis=1)
    diff = nbr - mu[:, None, :]
    cov = (diff.transpose(0, 2, 1) @ diff) / cfg.knn
    if regularize:
        # eigenvalues (eps, 1, 1) in the eigenbasis collapse to a rank-1
        # update with the smallest eigenvector v0: I - (1 - eps) v0 v0^T
        _, vecs = np.linalg.eigh(cov)  # ascending eigenvalues
        v0 = vecs[:, :, 0]
        cov = np.eye(3) - (1.0 - cfg.cov_epsilon) * (v0[:, :, None] * v0[:, None, :])
    return CovPoints(cloud.xyz, cov)


@dataclass
class AlignResult:
    pose: PoseSE3
    residual: float
    iterations: int
    converged: bool
    diverged: bool = False
    step_costs: Optional[list] = None  # (before, after) per accepted GN step


def _skew_batch(v):
    n = v.shape[0]
    S = np.zeros((n, 3, 3))
    S[:, 0, 1] = -v[:, 2]
    S[:, 0, 2] = v[:, 1]
    S[:, 1, 0] = v[:, 2]
    S[:, 1, 2] = -v[:, 0]
    S[:, 2, 0] = -v[:, 1]
    S[:, 2, 1] = v[:, 0]
    return S


def _inv3(A):
    """Batched closed-form inverse of (N, 3, 3) matrices via the adjugate."""
    a, b, c = A[:, 0, 0], A[:, 0, 1], A[:, 0, 2]
    d, e, f = A[:, 1, 0], A[:, 1, 1], A[:, 1, 2]
    g, h, i = A[:, 2, 0], A[:, 2, 1], A[:, 2, 2]
    co = np.empty_like(A)
    co[:, 0, 0] = e * i - f * h
    co[:, 0, 1] = c * h - b * i
    co[:, 0, 2] = b * f - c * e
    co[:, 1, 0] = f * g - d * i
    co[:, 1, 1] = a * i - c * g
    co[:, 1, 2] = c * d - a * f
    co[:, 2, 0] = d * h - e * g
    co[:, 2, 1] = b * g - a * h
    co[:, 2, 2] = a * e - b * d
    det = a * co[:, 0, 0] + b * co[:, 1, 0] + c * co[:, 2, 0]
    return co / det[:, None, None]


def _pair_cost(pose, ps, Cs, pt, Ct):
    """GICP cost and its pieces for fixed correspondences."""
    R = pose.rotation
    q = ps @ R.T + pose.translation
    d = pt - q
    M = _inv3(Ct + (R @ Cs) @ R.T)
    Md = np.squeeze(M @ d[:, :, None], axis=2)
    cost = float(np.sum(d * Md))
    return cost, q, d, M, Md


def _gauss_newton(source, target, init, cfg, watch_divergence=False,
                  record_steps=False):
    if len(source) == 0 or len(target) == 0:
        raise ValueError("source and target must be nonempty")
    tree = target.kdtree()
    X = init
    n_target = len(target)
    converged = False
    diverged = False
    grow_streak = 0
    plateau_streak = 0
    prev_assoc = None
    iterations = 0
    step_costs = [] if record_steps else None

    for iterations in range(1, cfg.max_iterations + 1):
        src_w = source.positions @ X.rotation.T + X.translation
        dist, nn = tree.query(src_w, distance_upper_bound=cfg.max_correspondence_dist,
                              workers=-1)
        mask = nn < n_target
        count = int(mask.sum())
        if count == 0:
            if iterations == 1:
                raise NoCorrespondencesError(
                    "no correspondences within "
                    f"{cfg.max_correspondence_dist} m at the initial pose")
            break
        ps = source.positions[mask]
        Cs = source.covariances[mask]
        pt = target.positions[nn[mask]]
        Ct = target.covariances[nn[mask]]

        cost0, q, d, M, Md = _pair_cost(X, ps, Cs, pt, Ct)
        assoc = cost0 / count
        if watch_divergence:
            # re-association makes the cost fluctuate at the sub-percent
            # level near convergence; only sustained real growth counts
            if prev_assoc is not None and assoc > prev_assoc * 1.05:
                grow_streak += 1
                if grow_streak >= 3:
                    diverged = True
                    break
            else:
                grow_streak = 0
            prev_assoc = assoc

        J = np.empty((count, 3, 6))
        J[:, :, :3] = _skew_batch(q)
        J[:, :, 3:] = -np.eye(3)
        # flatten the batch so H and g are single BLAS products
        MJ = (M @ J).reshape(3 * count, 6)
        J_flat = J.reshape(3 * count, 6)
        H = J_flat.T @ MJ
        g = MJ.T @ d.reshape(3 * count)
        try:
            xi = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            xi = np.linalg.lstsq(H, -g, rcond=None)[0]

        # step halving: accept only a non-increasing true cost
        scale = 1.0
        accepted = None
        for _ in range(9):
            delta = PoseSE3.from_rotvec(xi[:3] * scale, xi[3:] * scale)
            X_try = delta @ X
            cost_try = _pair_cost(X_try, ps, Cs, pt, Ct)[0]
            if cost_try <= cost0 * (1.0 + 1e-12):
                accepted = (X_try, cost_try)
                break
            scale *= 0.5
        if accepted is None:
            break
        X, cost_after = accepted
        if record_steps:
            step_costs.append((cost0, cost_after))
        if (np.linalg.norm(xi[3:] * scale) < cfg.translation_tol
                and np.linalg.norm(xi[:3] * scale) < cfg.rotation_tol):
            converged = True
            break
        # correspondence flips keep the pose jittering long after the cost
        # stops improving; treat a stalled cost as converged too
        if cost0 - cost_after <= cfg.cost_tol * max(cost0, 1e-30):
            plateau_streak += 1
            if plateau_streak >= 2:
                converged = True
                break
        else:
            plateau_streak = 0

    # residual: final cost over final correspondences
    src_w = source.positions @ X.rotation.T + X.translation
    dist, nn = tree.query(src_w, distance_upper_bound=cfg.max_correspondence_dist,
                              workers=-1)
    mask = nn < n_target
    count = int(mask.sum())
    if count:
        cost = _pair_cost(X, source.positions[mask], source.covariances[mask],
                          target.positions[nn[mask]], target.covariances[nn[mask]])[0]
        residual = cost / count
    else:
        residual = float("inf")
    return AlignResult(X, residual, iterations, converged, diverged, step_costs)


def gicp_align(source, target, init=None, cfg=None, record_steps=False):
    """Align source onto target; returns the pose X with X(source) ~ target."""
    cfg = cfg or GicpConfig()
    init = init or PoseSE3.identity()
    return _gauss_newton(source, target, init, cfg, record_steps=record_steps)


def scan_to_map_align(scan, submap, prior, cfg=None):
    """Refine the world pose of a scan against the submap.

    Falls back to `prior` (result flagged diverged) when the per-pair
    association cost grows for 3 consecutive iterations.
    """
    cfg = cfg or GicpConfig()
    if len(submap.points) == 0:
        raise EmptySubmapError("submap is empty")
    result = _gauss_newton(scan, submap.points, prior, cfg, watch_divergence=True)
    if result.diverged:
        return AlignResult(prior, result.residual, result.iterations,
                           False, True, result.step_costs)
    return result


@dataclass
class Keyframe:
    id: int
    pose: PoseSE3
    cloud: object  # PointCloud, sensor frame
    cov_points: CovPoints  # sensor frame
    world_points: CovPoints = None  # cached world-frame copy

    def __post_init__(self):
        if self.world_points is None:
            self.world_points = self.cov_points.transformed(self.pose)


@dataclass
class Submap:
    points: CovPoints
    source_keyframe_ids: tuple


class KeyframeStore:
    def __init__(self):
        self.keyframes = []
        self._next_id = 0
        self._last_submap = None  # reused while the chosen keyframe set holds

    def __len__(self):
        return len(self.keyframes)

    def add(self, pose, cloud, cov_points):
        kf = Keyframe(self._next_id, pose, cloud, cov_points)
        self._next_id += 1
        self.keyframes.append(kf)
        return kf


def update_keyframes(store, pose, cloud, cfg=None, cov_points=None):
    """Admit a keyframe when motion exceeds the distance/angle thresholds,
    then assemble the submap from the k nearest keyframes (by translation).

    Returns (store, submap). cov_points may be passed to reuse covariances
    already computed for the scan; they are cached world-transformed per
    keyframe so submap assembly is pure concatenation.
    """
    cfg = cfg or GicpConfig()
    if not pose.is_finite():
        raise ValueError("pose must be finite")
    if cov_points is None:
        cov_points = estimate_covariances(cloud, cfg)
    if store.keyframes:
        dists = np.array([kf.pose.distance_to(pose) for kf in store.keyframes])
        nearest = int(np.argmin(dists))
        angle = np.degrees(store.keyframes[nearest].pose.angle_to(pose))
        add = dists[nearest] >= cfg.keyframe_dist or angle >= cfg.keyframe_angle
    else:
        add = True
    if add:
        store.add(pose, cloud, cov_points)
    dists = np.array([kf.pose.distance_to(pose) for kf in store.keyframes])
    order = np.argsort(dists, kind="stable")[:cfg.submap_k_nearest]
    chosen = [store.keyframes[i] for i in order]
    ids = tuple(kf.id for kf in chosen)
    last = store._last_submap
    if last is not None and set(last.source_keyframe_ids) == set(ids):
        return store, last  # same member set: keep the cached KD index
    positions = np.concatenate([kf.world_points.positions for kf in chosen])
    covariances = np.concatenate([kf.world_points.covariances for kf in chosen])
    submap = Submap(CovPoints(positions, covariances), ids)
    store._last_submap = submap
    return store, submap
