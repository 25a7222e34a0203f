import dataclasses
import json

import numpy as np
import pytest

from grapecount import sim
from grapecount.config import ExperimentConfig
from grapecount.geometry import DepthImage, RigidTransform
from grapecount.pipeline import (
    CountReport,
    Pipeline,
    PipelineConfig,
    RunSummary,
    dumps,
    process_frame,
    process_stream,
    run_experiment,
)
from grapecount.stream import (
    Detection,
    FrameObservation,
    StreamError,
    StreamHeader,
    StreamOrderError,
    read_stream,
    write_stream,
)

RIG = sim.CameraRig()
HEADER = StreamHeader(RIG.k_color, RIG.k_depth, RIG.color_from_depth)
SMALL = sim.SceneConfig(seed=3, n_bunches=8, rows=(sim.Row((0.0, 0.0), (10.0, 0.0)),))
SMALL_EXP = ExperimentConfig(scene=SMALL)


def _frames(exp, seed=0):
    scene = sim.generate_scene(exp.scene)
    poses = sim.trajectory_poses(scene, exp.trajectory, seed)
    return list(sim.synthesize_run(scene, poses, exp.rig, exp.noise, seed))


def _one_bunch_frame(frame_id, pose, at=(0.0, 2.0, 1.3)):
    scene = sim.SceneTruth(np.array([at]), 0.2, 0.3, ())
    return sim.synthesize_frame(scene, pose, RIG, sim.NoiseConfig.zero(), seed=0, frame_id=frame_id)


def test_zero_detection_frame_only_ages_tracks():
    pipe = Pipeline(HEADER)
    pipe.process_frame(_one_bunch_frame(0, sim.camera_pose([0, 0, 1.3], [0, 1, 0])))
    empty = FrameObservation(1, 1.0, RigidTransform(), [], DepthImage.zeros(640, 480))
    before = pipe.counting.records
    stats = process_frame(pipe, empty)
    assert pipe.counting.count() == 1 and stats.detections == 0
    assert [r.position.tolist() for r in pipe.counting.records] == [r.position.tolist() for r in before]
    assert pipe.tracker.tracks[1].disappeared == 1


def test_single_new_bunch_counts_once():
    pipe = Pipeline(HEADER)
    stats = pipe.process_frame(_one_bunch_frame(0, sim.camera_pose([0, 0, 1.3], [0, 1, 0])))
    assert pipe.counting.count() == 1 and stats.new == 1 and stats.located == 1
    np.testing.assert_allclose(pipe.counting.records[0].position, [0.0, 2.0, 1.3], atol=1e-9)


def test_reobserved_after_small_move_is_relocation():
    pipe = Pipeline(HEADER)
    pipe.process_frame(_one_bunch_frame(0, sim.camera_pose([0, 0, 1.3], [0, 1, 0])))
    stats = pipe.process_frame(_one_bunch_frame(1, sim.camera_pose([0.05, 0, 1.3], [0, 1, 0])))
    assert stats.relocated == 1 and stats.new == 0
    assert pipe.counting.count() == 1


def test_out_of_order_frame():
    pipe = Pipeline(HEADER)
    pipe.process_frame(FrameObservation(5, 0.0, RigidTransform(), [], DepthImage.zeros(640, 480)))
    with pytest.raises(StreamOrderError):
        pipe.process_frame(FrameObservation(5, 0.0, RigidTransform(), [], DepthImage.zeros(640, 480)))


def test_missing_depth_skips_frame():
    pipe = Pipeline(HEADER)
    obs = FrameObservation(0, 0.0, RigidTransform(), [Detection((10, 10, 50, 50))], None, "gone.pgm")
    stats = pipe.process_frame(obs)
    assert stats.skipped and stats.detections == 0 and pipe.counting.count() == 0


def test_empty_stream():
    assert process_stream([], header=HEADER).count == 0


def test_min_confidence_and_clamping():
    pose = sim.camera_pose([0, 0, 1.3], [0, 1, 0])
    obs = _one_bunch_frame(0, pose)
    obs.detections = [
        dataclasses.replace(obs.detections[0], confidence=0.3),
        Detection((-50.0, -50.0, -10.0, 20.0), 0.9),
    ]
    pipe = Pipeline(HEADER, PipelineConfig(min_confidence=0.5))
    stats = pipe.process_frame(obs)
    assert stats.filtered == 2 and stats.detections == 0


def test_frame_stats_conservation_and_no_side_channel():
    exp = dataclasses.replace(SMALL_EXP, noise=dataclasses.replace(sim.NoiseConfig(), false_positive_rate=0.2))
    pipe = Pipeline(HEADER, exp.pipeline)
    for obs in _frames(exp, seed=4):
        st = pipe.process_frame(obs)
        assert st.detections == st.located + st.rejected_range + st.rejected_no_depth
        assert st.located == st.new + st.relocated
    rep = pipe.report()
    assert rep.count == pipe.counting.count() == len(rep.records)
    assert rep.count == sum(s.new for s in rep.frame_stats)


def test_zero_noise_small_scene_matches_oracle():
    exp = SMALL_EXP.zero_noise()
    scene = sim.generate_scene(exp.scene)
    poses = sim.trajectory_poses(scene, exp.trajectory)
    rep = process_stream(_frames(exp), exp.pipeline, HEADER)
    assert rep.count == sim.oracle_count(scene, poses, RIG.k_color) == 8


def test_stream_file_roundtrip(tmp_path):
    exp = SMALL_EXP.zero_noise()
    frames = _frames(exp)
    write_stream(tmp_path / "s.jsonl", HEADER, frames, depth_dir="d")
    assert (tmp_path / "d" / "000000.pgm").exists()
    header, it = read_stream(tmp_path / "s.jsonl")
    back = list(it)
    assert len(back) == len(frames)
    assert [d.bbox for d in back[30].detections] == [d.bbox for d in frames[30].detections]
    np.testing.assert_allclose(back[30].depth.values, frames[30].depth.values, atol=5e-4)
    assert process_stream(tmp_path / "s.jsonl", exp.pipeline).count == 8


def test_replay_is_bit_identical(tmp_path):
    write_stream(tmp_path / "s.jsonl", HEADER, _frames(SMALL_EXP, seed=2))
    a = dumps(process_stream(tmp_path / "s.jsonl").to_dict())
    b = dumps(process_stream(tmp_path / "s.jsonl").to_dict())
    assert a == b


def test_inline_depth(tmp_path):
    frames = _frames(SMALL_EXP.zero_noise())[20:23]
    write_stream(tmp_path / "s.jsonl", HEADER, frames, depth_dir=None)
    _, it = read_stream(tmp_path / "s.jsonl")
    back = list(it)
    np.testing.assert_allclose(back[0].depth.values, frames[0].depth.values, atol=5e-4)


def test_unreadable_depth_file_is_skipped(tmp_path):
    frames = _frames(SMALL_EXP.zero_noise())[20:23]
    write_stream(tmp_path / "s.jsonl", HEADER, frames)
    (tmp_path / "depth" / "000021.pgm").write_bytes(b"garbage")
    rep = process_stream(tmp_path / "s.jsonl")
    assert [s.skipped for s in rep.frame_stats] == [False, True, False]


def _write_lines(path, lines):
    path.write_text("".join(json.dumps(x) + "\n" for x in lines))


def test_malformed_record_names_line(tmp_path):
    hdr = HEADER.to_dict()
    good = {"type": "frame", "frame_id": 0, "timestamp": 0, "world_from_camera": RigidTransform().to_dict(),
            "detections": [], "depth": {"width": 2, "height": 1, "values_mm": [0, 1000]}}
    bad = dict(good, frame_id=1, detections=[{"bbox": [1, 2, 3]}])
    _write_lines(tmp_path / "s.jsonl", [hdr, good, bad])
    _, it = read_stream(tmp_path / "s.jsonl")
    with pytest.raises(StreamError, match=r"s\.jsonl:3"):
        list(it)


def test_header_checks(tmp_path):
    hdr = dict(HEADER.to_dict(), convention="world_from_camera;opengl")
    _write_lines(tmp_path / "s.jsonl", [hdr])
    with pytest.raises(StreamError, match="convention"):
        read_stream(tmp_path / "s.jsonl")
    (tmp_path / "e.jsonl").write_text("")
    with pytest.raises(StreamError, match="empty"):
        read_stream(tmp_path / "e.jsonl")
    (tmp_path / "j.jsonl").write_text("{not json\n")
    with pytest.raises(StreamError, match=":1"):
        read_stream(tmp_path / "j.jsonl")


def test_out_of_order_stream_file(tmp_path):
    frames = _frames(SMALL_EXP.zero_noise())[:3]
    frames[2].frame_id = 1
    write_stream(tmp_path / "s.jsonl", HEADER, frames, depth_dir=None)
    with pytest.raises(StreamOrderError):
        process_stream(tmp_path / "s.jsonl")


def test_report_roundtrip():
    rep = process_stream(_frames(SMALL_EXP.zero_noise()), header=HEADER)
    back = CountReport.from_dict(json.loads(dumps(rep.to_dict())))
    assert dumps(back.to_dict()) == dumps(rep.to_dict())


def test_run_summary_mean_is_exact():
    s = RunSummary([84, 90, 86, 89, 77, 78, 79, 89, 88, 87], base_seed=0)
    assert s.mean == sum(s.counts) / 10 == 84.7


def test_run_experiment_small():
    summary = run_experiment(SMALL_EXP, 3, base_seed=11)
    assert len(summary.counts) == 3
    assert [r.seed for r in summary.reports] == [11, 12, 13]
    again = run_experiment(SMALL_EXP, 3, base_seed=11)
    assert dumps(summary.to_dict()) == dumps(again.to_dict())


def test_run_experiment_parallel_matches_serial():
    serial = run_experiment(SMALL_EXP, 2, base_seed=5)
    parallel = run_experiment(SMALL_EXP, 2, base_seed=5, workers=2)
    assert dumps(serial.to_dict()) == dumps(parallel.to_dict())


def test_run_experiment_needs_a_run():
    with pytest.raises(ValueError):
        run_experiment(SMALL_EXP, 0, 0)
