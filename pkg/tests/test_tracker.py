import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grapecount.geometry import Pixel
from grapecount.tracker import CentroidTracker, Track, TrackerConfig, TrackerError, centroid_of, greedy_pairs


def brute_force_greedy(tracks, centroids, gate):
    """Independent re-derivation: rescan every free pair for the minimum each round."""
    free_t = set(range(len(tracks)))
    free_c = set(range(len(centroids)))
    out = []
    while True:
        best = None
        for i in free_t:
            for j in free_c:
                d = math.dist(tracks[i].centroid, centroids[j])
                if d > gate:
                    continue
                key = (d, tracks[i].id, centroids[j][0], centroids[j][1], j)
                if best is None or key < best[0]:
                    best = (key, i, j)
        if best is None:
            return sorted(out)
        _, i, j = best
        free_t.discard(i)
        free_c.discard(j)
        out.append((i, j))


@pytest.mark.parametrize(
    "bbox, expected",
    [((0, 0, 10, 10), (5, 5)), ((100, 200, 140, 260), (120, 230)), ((3, 3, 4, 4), (3.5, 3.5))],
)
def test_centroid_of(bbox, expected):
    assert centroid_of(bbox) == expected


@pytest.mark.parametrize("bbox", [(0, 0, 0, 10), (5, 5, 4, 6), (0, 3, 1, 3)])
def test_centroid_of_degenerate(bbox):
    with pytest.raises(TrackerError):
        centroid_of(bbox)


def test_config_invariants():
    with pytest.raises(TrackerError):
        TrackerConfig(max_disappeared=-1)
    with pytest.raises(TrackerError):
        TrackerConfig(max_match_distance=0)


def test_two_tracks_three_centroids():
    tr = CentroidTracker(TrackerConfig(max_match_distance=75))
    rep = tr.update([(100, 100), (300, 100)])
    assert rep.created == [1, 2]
    rep = tr.update([(110, 104), (290, 95), (500, 400)])
    assert rep.matched == {1: (110, 104), 2: (290, 95)}
    assert rep.created == [3]
    assert rep.deregistered == []


def test_cold_start():
    tr = CentroidTracker()
    rep = tr.update([(1, 1), (50, 50), (300, 300), (600, 10)])
    assert rep.created == [1, 2, 3, 4] and rep.matched == {}


def test_empty_update_is_legal():
    tr = CentroidTracker()
    rep = tr.update([])
    assert not rep.created and not rep.matched and not rep.deregistered


@pytest.mark.parametrize("n", [0, 1, 5])
def test_deregistered_on_update_n_plus_1(n):
    tr = CentroidTracker(TrackerConfig(max_disappeared=n))
    tr.update([(10, 10)])
    for k in range(1, n + 1):
        rep = tr.update([])
        assert rep.deregistered == []
        assert tr.tracks[1].disappeared == k
    rep = tr.update([])
    assert rep.deregistered == [1]
    assert len(tr) == 0


def test_ids_never_reused():
    tr = CentroidTracker(TrackerConfig(max_disappeared=0))
    seen = set()
    for k in range(20):
        rep = tr.update([(k * 200 % 640, 10)])
        assert not (set(rep.created) & seen)
        seen |= set(rep.created)
    assert sorted(seen) == list(range(1, len(seen) + 1))


def test_gate_blocks_far_match():
    tr = CentroidTracker(TrackerConfig(max_match_distance=20))
    tr.update([(0, 0)])
    rep = tr.update([(0, 21)])
    assert rep.matched == {} and rep.created == [2]


def test_global_greedy_not_per_track():
    # track 1 is closer to B than track 2 is, but track 2-B is the global minimum
    tracks = [Track(1, Pixel(0, 0)), Track(2, Pixel(10, 0))]
    cents = [Pixel(-5, 0), Pixel(9, 0)]
    assert sorted(greedy_pairs(tracks, cents, 100)) == [(0, 0), (1, 1)]


def test_tie_broken_by_lower_track_id():
    tracks = [Track(7, Pixel(0, 0)), Track(3, Pixel(20, 0))]
    cents = [Pixel(10, 0)]
    assert greedy_pairs(tracks, cents, 100) == [(1, 0)]


def test_tie_broken_by_centroid_coordinates():
    tracks = [Track(1, Pixel(0, 0))]
    cents = [Pixel(0, 5), Pixel(-5, 0)]
    assert greedy_pairs(tracks, cents, 100) == [(0, 1)]


pix = st.tuples(st.integers(0, 200), st.integers(0, 200)).map(lambda p: Pixel(float(p[0]), float(p[1])))


@settings(max_examples=300)
@given(st.lists(pix, max_size=6), st.lists(pix, max_size=6), st.floats(1, 300))
def test_matches_brute_force(tpos, cents, gate):
    tracks = [Track(i + 1, p) for i, p in enumerate(tpos)]
    assert sorted(greedy_pairs(tracks, cents, gate)) == brute_force_greedy(tracks, cents, gate)


@settings(max_examples=200)
@given(st.lists(pix, min_size=1, max_size=6, unique=True), st.lists(pix, max_size=6, unique=True), st.randoms())
def test_permutation_invariance(prev, cents, rnd):
    dists = [math.dist(a, b) for a in prev for b in cents]
    if len(set(dists)) != len(dists):
        return
    a = CentroidTracker()
    a.update(prev)
    b = CentroidTracker()
    b.update(prev)
    shuffled = list(cents)
    rnd.shuffle(shuffled)
    assert a.update(cents).matched == b.update(shuffled).matched


@given(st.lists(st.lists(pix, max_size=6), max_size=8))
def test_live_matches_within_gate_and_state_invariants(frames):
    cfg = TrackerConfig(max_disappeared=2, max_match_distance=40)
    tr = CentroidTracker(cfg)
    for cents in frames:
        before = {t.id: t.centroid for t in tr.tracks.values()}
        rep = tr.update(cents)
        for tid, c in rep.matched.items():
            assert math.dist(before[tid], c) <= cfg.max_match_distance
        assert all(0 <= t.disappeared <= cfg.max_disappeared for t in tr.tracks.values())
        assert len(set(tr.tracks)) == len(tr.tracks)


@given(st.lists(pix, max_size=6, unique=True))
def test_identical_frames_create_no_ids(cents):
    tr = CentroidTracker()
    tr.update(cents)
    assert tr.update(cents).created == []


def test_random_stream_matches_brute_force():
    rnd = random.Random(3)
    tr = CentroidTracker(TrackerConfig(max_disappeared=3, max_match_distance=50))
    for _ in range(200):
        cents = [Pixel(rnd.uniform(0, 300), rnd.uniform(0, 300)) for _ in range(rnd.randint(0, 6))]
        live = sorted(tr.tracks.values(), key=lambda t: t.id)
        expect = {live[i].id: cents[j] for i, j in brute_force_greedy(live, cents, 50)}
        assert tr.update(cents).matched == expect
