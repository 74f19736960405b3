import hashlib

import numpy as np
import pytest

from stridedpose.metrics import mpjpe
from stridedpose.synthdata import (
    ACTIONS,
    CameraSpec,
    DatasetFormatError,
    Sequence,
    SkeletonSpec,
    add_noise,
    build_samples,
    flip_poses,
    generate_motion,
    h36m_skeleton,
    horizontal_flip,
    make_sequences,
    project,
    read_dataset,
    window,
    write_dataset,
)
from stridedpose.synthdata import dataset as ds
from stridedpose.synthdata.motion import MAX_STEP_MM

SKEL = h36m_skeleton()


def test_skeleton_is_a_tree_with_pairs():
    assert len(SKEL.names) == 17
    assert SKEL.parents[0] == 0
    for j in range(1, 17):
        assert 0 in SKEL.ancestors(j)
    perm = SKEL.flip_permutation()
    assert sorted(perm) == list(range(17))
    assert np.all(perm[perm] == np.arange(17))


def test_skeleton_rejects_cycles():
    with pytest.raises(ValueError):
        SkeletonSpec(("a", "b", "c"), (0, 2, 1), np.zeros((3, 3)), ())


@pytest.mark.parametrize("action", ACTIONS)
def test_motion_is_smooth_and_rigid(action):
    pos = generate_motion(SKEL, 3, 300, action=action)
    assert pos.shape == (300, 17, 3)
    step = np.linalg.norm(np.diff(pos, axis=0), axis=-1).max()
    assert step <= MAX_STEP_MM
    bones = np.linalg.norm(pos[:, 1:] - pos[:, list(SKEL.parents[1:])], axis=-1)
    np.testing.assert_allclose(bones, np.broadcast_to(SKEL.bone_lengths[1:], bones.shape), atol=1e-9)


def test_motion_determinism_and_zero_amplitude():
    a = generate_motion(SKEL, 5, 50)
    assert a.tobytes() == generate_motion(SKEL, 5, 50).tobytes()
    assert a.tobytes() != generate_motion(SKEL, 6, 50).tobytes()
    still = generate_motion(SKEL, 5, 20, amplitude=0.0)
    assert np.all(still == still[0])


def test_projection_cases():
    cam = CameraSpec()
    # the point the camera looks at lands on the image center
    assert np.allclose(project(np.zeros(3), cam), 0.0)
    p1 = project(np.array([100.0, 0.0, 0.0]), cam)
    # moving back by the camera distance doubles depth and halves the offset
    p2 = project(np.array([100.0, 0.0, -4500.0]), cam)
    assert p2[0] == pytest.approx(p1[0] / 2)
    # hand calculation: u = 1145 * 100 / 4500 + 500 = 525.444..., normalized 2u/1000 - 1
    assert p1[0] == pytest.approx(2 * (1145 * 100 / 4500 + 500) / 1000 - 1)
    with pytest.raises(ValueError):
        project(np.array([0.0, 0.0, 5000.0]), cam)


def test_noise_statistics():
    x = np.zeros((1000, 1000))
    assert np.array_equal(add_noise(x, 0.0, 1), x)
    n = add_noise(x, 0.01, 1)
    assert abs(n.std() - 0.01) < 1e-4
    assert not np.array_equal(n, add_noise(x, 0.01, 2))
    assert np.array_equal(n, add_noise(x, 0.01, 1))


def test_window_edges_and_centers():
    seq = make_sequences(0, 1, 100)[0]
    samples = window(seq, 27)
    assert len(samples) == 100
    first = samples[0].input2d
    assert all(np.array_equal(first[i], first[0]) for i in range(14))
    for t in (0, 50, 99):
        np.testing.assert_array_equal(samples[t].target3d_center, seq.target3d[t])
    with pytest.raises(ValueError):
        window(seq, 26)


def test_inputs_and_targets_conventions():
    seqs = make_sequences(1, 5, 120, sigma_px=30)
    for s in seqs:
        assert np.all(s.target3d[:, 0] == 0)
        assert np.abs(s.input2d).max() <= 1.5
        assert s.input2d.dtype == np.float32


def test_sequences_shard_independently():
    whole = make_sequences(2, 6, 30)
    part = make_sequences(2, 3, 30, first_id=3)
    for a, b in zip(whole[3:], part):
        assert a.seq_id == b.seq_id and a.input2d.tobytes() == b.input2d.tobytes()


def test_flip():
    seq = make_sequences(0, 1, 30)[0]
    s = window(seq, 9)[4]
    back = horizontal_flip(horizontal_flip(s, SKEL), SKEL)
    np.testing.assert_array_equal(back.input2d, s.input2d)
    np.testing.assert_array_equal(back.target3d_seq, s.target3d_seq)
    rng = np.random.default_rng(0)
    pred, gt = rng.normal(size=(2, 10, 17, 3))
    assert mpjpe(flip_poses(pred, SKEL), flip_poses(gt, SKEL)) == pytest.approx(mpjpe(pred, gt), abs=1e-12)


def test_flip_of_mirror_symmetric_pose():
    pose = np.zeros((17, 3))
    perm = SKEL.flip_permutation()
    rng = np.random.default_rng(1)
    for j in range(17):
        if perm[j] == j:
            pose[j] = (0.0, *rng.normal(size=2))
        elif perm[j] > j:
            pose[j] = rng.normal(size=3)
            pose[perm[j]] = pose[j] * (-1, 1, 1)
    np.testing.assert_allclose(flip_poses(pose, SKEL), pose)


def test_dataset_round_trip(tmp_path):
    samples = build_samples(make_sequences(3, 2, 20, sigma_px=5), 9)
    path = tmp_path / "d.sps"
    write_dataset(samples, path)
    back = read_dataset(path)
    assert len(back) == len(samples)
    for a, b in zip(samples, back):
        assert a.input2d.tobytes() == b.input2d.tobytes()
        assert a.target3d_seq.tobytes() == b.target3d_seq.tobytes()
        assert (a.seq_id, a.frame, a.action) == (b.seq_id, b.frame, b.action)


def test_dataset_bytes_are_a_function_of_seed(tmp_path):
    digests = []
    for name in ("a", "b"):
        path = tmp_path / name
        write_dataset(build_samples(make_sequences(7, 3, 40, sigma_px=2), 9), path)
        digests.append(hashlib.sha256(path.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_dataset_corruption_detected():
    blob = ds.dumps(build_samples(make_sequences(3, 1, 10), 9))
    with pytest.raises(DatasetFormatError):
        ds.loads(blob[:-20])
    with pytest.raises(DatasetFormatError):
        ds.loads(b"XXXX" + blob[4:])
    flipped = bytearray(blob)
    flipped[100] ^= 1
    with pytest.raises(DatasetFormatError):
        ds.loads(bytes(flipped))


def test_sequence_dataclass_fields():
    s = Sequence(1, "walk", np.zeros((3, 17, 2), np.float32), np.zeros((3, 17, 3), np.float32))
    assert len(window(s, 3)) == 3
