import numpy as np
import pytest

from lidargrid import PointCloud, PoseSE3
from lidargrid.registration import (CovPoints, EmptySubmapError, GicpConfig,
                                    KeyframeStore, NoCorrespondencesError,
                                    Submap, TooFewPointsError,
                                    estimate_covariances, gicp_align,
                                    scan_to_map_align, update_keyframes)
from lidargrid.synthetic import room_cloud


def random_rigid(rng, max_t=0.5, max_deg=10.0):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = np.radians(rng.uniform(0, max_deg))
    t = rng.normal(size=3)
    t = t / np.linalg.norm(t) * rng.uniform(0, max_t)
    return PoseSE3.from_rotvec(axis * angle, t)


def pose_errors(estimate, truth):
    delta = truth.inverse() @ estimate
    return np.linalg.norm(delta.translation), np.degrees(delta.rotation_angle())


def test_covariances_plane_regularization(rng):
    xy = rng.uniform(-2, 2, size=(50, 2))
    cloud = PointCloud(np.column_stack([xy, np.zeros(50)]), np.full(50, 0.5))
    cfg = GicpConfig()
    cov = estimate_covariances(cloud, cfg)
    vals, vecs = np.linalg.eigh(cov.covariances)
    np.testing.assert_allclose(vals[:, 0], cfg.cov_epsilon, atol=1e-9)
    np.testing.assert_allclose(vals[:, 1:], 1.0, atol=1e-9)
    normals = vecs[:, :, 0]
    np.testing.assert_allclose(np.abs(normals[:, 2]), 1.0, atol=1e-9)


def test_covariances_too_few_points(rng):
    cloud = PointCloud(rng.normal(size=(5, 3)), np.full(5, 0.5))
    with pytest.raises(TooFewPointsError):
        estimate_covariances(cloud, GicpConfig(knn=10))


def test_covariances_isotropic_cluster_against_oracle(rng):
    # whole-cluster neighborhoods: raw covariance must match the direct
    # sample-covariance eigendecomposition
    pts = rng.normal(0.0, 0.1, size=(500, 3))
    cloud = PointCloud(pts, np.full(500, 0.5))
    cfg = GicpConfig(knn=499)
    cov = estimate_covariances(cloud, cfg, regularize=False)
    vals = np.linalg.eigvalsh(cov.covariances)
    assert np.all(vals[:, 2] / vals[:, 0] < 1.2)  # within 20% of each other
    oracle_vals = np.linalg.eigvalsh(np.cov(pts.T, bias=True))
    # neighborhoods exclude the query point; eigenvalues still track closely
    np.testing.assert_allclose(np.median(vals, axis=0), oracle_vals, rtol=0.05)


def _cov_cloud(seed, n=1500, **kwargs):
    cloud = room_cloud(seed, n_points=n)
    return estimate_covariances(cloud, GicpConfig(**kwargs))


def test_self_alignment_is_identity():
    cov = _cov_cloud(3)
    result = gicp_align(cov, cov)
    assert result.pose.rotation_angle() < 1e-9
    assert np.linalg.norm(result.pose.translation) < 1e-9
    assert result.residual == pytest.approx(0.0, abs=1e-9)
    assert result.converged


def test_translation_recovery():
    cov = _cov_cloud(4, n=500)
    truth = PoseSE3(None, [0.1, 0.0, 0.0])
    target = cov.transformed(truth)
    result = gicp_align(cov, target)
    t_err, r_err = pose_errors(result.pose, truth)
    assert t_err < 1e-3
    assert r_err < 0.05


def test_rotation_recovery():
    cov = _cov_cloud(5, n=500)
    truth = PoseSE3.from_rotvec([0, 0, np.radians(5.0)])
    target = cov.transformed(truth)
    result = gicp_align(cov, target)
    delta = truth.inverse() @ result.pose
    assert np.degrees(abs(delta.yaw())) < 0.05
    assert np.linalg.norm(delta.translation) < 1e-3


def test_random_rigid_recovery_property(rng):
    # acceptance-grade property: 20 seeded perturbations on structured clouds
    failures = []
    for seed in range(20):
        trial_rng = np.random.default_rng(1000 + seed)
        cov = _cov_cloud(100 + seed, n=700)
        truth = random_rigid(trial_rng)
        target = cov.transformed(truth)
        result = gicp_align(cov, target)
        t_err, r_err = pose_errors(result.pose, truth)
        if t_err >= 1e-3 or r_err >= 0.1:
            failures.append((seed, t_err, r_err))
    assert not failures, f"recovery failures: {failures}"


def test_no_correspondences_error():
    cov = _cov_cloud(6, n=400)
    far = cov.transformed(PoseSE3(None, [100.0, 0.0, 0.0]))
    with pytest.raises(NoCorrespondencesError):
        gicp_align(cov, far, cfg=GicpConfig(max_correspondence_dist=1.0))


def test_residual_non_increasing_over_accepted_steps(rng):
    cov = _cov_cloud(7, n=600)
    truth = random_rigid(rng, max_t=0.4, max_deg=8)
    target = cov.transformed(truth)
    result = gicp_align(cov, target, record_steps=True)
    assert result.step_costs, "expected at least one accepted step"
    for before, after in result.step_costs:
        assert after <= before * (1 + 1e-12)


def test_alignment_equivariance(rng):
    cov = _cov_cloud(8, n=500)
    truth = random_rigid(rng, max_t=0.3, max_deg=6)
    target = cov.transformed(truth)
    cfg = GicpConfig(translation_tol=1e-10, rotation_tol=1e-10)
    base = gicp_align(cov, target, cfg=cfg)
    g = random_rigid(rng, max_t=2.0, max_deg=40)
    conj = gicp_align(cov.transformed(g), target.transformed(g),
                      init=g @ PoseSE3.identity() @ g.inverse(), cfg=cfg)
    expected = g @ base.pose @ g.inverse()
    t_err, r_err = pose_errors(conj.pose, expected)
    assert t_err < 1e-6
    assert np.radians(r_err) < 1e-6


def test_scan_to_map_stationary():
    cov = _cov_cloud(9, n=500)
    submap = Submap(cov, (0,))
    result = scan_to_map_align(cov, submap, PoseSE3.identity())
    assert np.linalg.norm(result.pose.translation) < 1e-6
    assert result.pose.rotation_angle() < 1e-6
    assert not result.diverged


def test_scan_to_map_gross_prior_raises():
    cov = _cov_cloud(10, n=400)
    submap = Submap(cov, (0,))
    # 10 m off in z: nothing can pair up (walls extend along x/y, so large
    # in-plane offsets may still slide along them)
    prior = PoseSE3(None, [0.0, 0.0, 10.0])
    with pytest.raises(NoCorrespondencesError):
        scan_to_map_align(cov, submap, prior,
                          GicpConfig(max_correspondence_dist=1.0))


def test_scan_to_map_empty_submap():
    cov = _cov_cloud(11, n=400)
    empty = Submap(CovPoints(np.zeros((0, 3)), np.zeros((0, 3, 3))), ())
    with pytest.raises(EmptySubmapError):
        scan_to_map_align(cov, empty, PoseSE3.identity())


def test_corridor_sequence_pose_tracking():
    # straight-line 10-scan corridor with 0.2 m steps; oracle = the
    # simulator trajectory itself
    from lidargrid.synthetic import Lidar3D, floorplan_corridor_rooms, simulate_scan_3d

    fp = floorplan_corridor_rooms()
    lidar = Lidar3D(n_azimuth=360, ring_elevations_deg=(-2, -1, 0, 1, 2),
                    max_range=25.0)
    cfg = GicpConfig()
    poses_true = [(3.0 + 0.2 * k, 5.0, 0.0) for k in range(10)]
    world = PoseSE3.identity()
    store = KeyframeStore()
    submap = None
    prev_cov = None
    first_pose = PoseSE3.from_rotvec([0, 0, poses_true[0][2]],
                                     [poses_true[0][0], poses_true[0][1], 0])
    for k, p in enumerate(poses_true):
        cloud = simulate_scan_3d(fp, p, lidar, scan_index=k)
        cov = estimate_covariances(cloud, cfg)
        if prev_cov is None:
            world = PoseSE3.identity()
        else:
            s2s = gicp_align(cov, prev_cov, cfg=cfg)
            prior = world @ s2s.pose
            result = scan_to_map_align(cov, submap, prior, cfg)
            world = result.pose
        store, submap = update_keyframes(store, world, cloud, cfg, cov_points=cov)
        prev_cov = cov
    # world poses are relative to the first scan frame
    final_truth = first_pose.inverse() @ PoseSE3.from_rotvec(
        [0, 0, 0.0], [poses_true[-1][0], poses_true[-1][1], 0])
    err = np.linalg.norm(world.translation - final_truth.translation)
    assert err < 0.02


def test_update_keyframes_rules():
    cfg = GicpConfig(keyframe_dist=1.0, keyframe_angle=30.0)
    cloud = room_cloud(12, n_points=400)
    cov = estimate_covariances(cloud, cfg)
    store = KeyframeStore()
    store, submap = update_keyframes(store, PoseSE3.identity(), cloud, cfg, cov)
    assert len(store) == 1  # first scan always admitted
    assert len(submap.points) == len(cov)
    # 0.5 m / 10 degrees away: below both thresholds, no new keyframe
    near = PoseSE3.from_rotvec([0, 0, np.radians(10)], [0.5, 0, 0])
    store, _ = update_keyframes(store, near, cloud, cfg, cov)
    assert len(store) == 1
    # crossing the distance threshold admits
    store, _ = update_keyframes(store, PoseSE3(None, [1.5, 0, 0]), cloud, cfg, cov)
    assert len(store) == 2
    # crossing the angle threshold admits
    spun = PoseSE3.from_rotvec([0, 0, np.radians(35)], [1.4, 0, 0])
    store, _ = update_keyframes(store, spun, cloud, cfg, cov)
    assert len(store) == 3


def test_submap_draws_from_all_keyframes_when_few():
    cfg = GicpConfig(submap_k_nearest=10)
    cloud = room_cloud(13, n_points=400)
    cov = estimate_covariances(cloud, cfg)
    store = KeyframeStore()
    for i in range(4):
        pose = PoseSE3(None, [2.0 * i, 0, 0])
        store, submap = update_keyframes(store, pose, cloud, cfg, cov)
    assert len(store) == 4
    assert set(submap.source_keyframe_ids) == {0, 1, 2, 3}
    assert len(submap.points) == 4 * len(cov)


def test_submap_is_deterministic():
    cfg = GicpConfig()
    cloud = room_cloud(14, n_points=400)
    cov = estimate_covariances(cloud, cfg)
    maps = []
    for _ in range(2):
        store = KeyframeStore()
        for i in range(5):
            pose = PoseSE3(None, [1.2 * i, 0.3 * (i % 2), 0])
            store, submap = update_keyframes(store, pose, cloud, cfg, cov)
        maps.append(submap)
    assert maps[0].source_keyframe_ids == maps[1].source_keyframe_ids
    assert np.array_equal(maps[0].points.positions, maps[1].points.positions)


def test_world_frame_covariances_rotated():
    cloud = room_cloud(15, n_points=400)
    cfg = GicpConfig()
    cov = estimate_covariances(cloud, cfg)
    pose = PoseSE3.from_rotvec([0, 0, 1.0], [2.0, 1.0, 0.0])
    store = KeyframeStore()
    store, submap = update_keyframes(store, pose, cloud, cfg, cov)
    R = pose.rotation
    expected = R @ cov.covariances[0] @ R.T
    np.testing.assert_allclose(submap.points.covariances[0], expected, atol=1e-12)
    np.testing.assert_allclose(submap.points.positions[0],
                               pose.apply(cov.positions[0]), atol=1e-12)
