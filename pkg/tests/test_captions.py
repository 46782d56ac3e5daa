import numpy as np
import pytest
from hypothesis import given, strategies as st

from motionpairs.captions import (
    ALL_POSITIONS, DIRECTION_WORDS, CaptionParseError, CaptionSlots, Segment, SegmentSlots,
    ThresholdConfig, assemble_caption, caption_slots, caption_space_product, count_caption_space,
    direction_word, grid_position, parse_caption, render, segments_from_keyframes, translation_slots,
)
from motionpairs.kinematics import GenConfig, interpolate, sample_motion

segment_slots = st.builds(
    SegmentSlots,
    speed=st.sampled_from(["", "quickly", "slowly"]),
    diagonal=st.booleans(),
    direction=st.sampled_from(["", *DIRECTION_WORDS]),
    distance=st.sampled_from(["", "a lot", "a little"]),
    rot_direction=st.sampled_from(["", "left", "right"]),
    rot_amount=st.sampled_from(["", "slightly", "significantly"]),
).map(lambda s: s if s.direction else SegmentSlots(rot_direction=s.rot_direction,
                                                   rot_amount=s.rot_amount if s.rot_direction else ""))
segment_slots = segment_slots.map(lambda s: s if s.rot_direction else SegmentSlots(
    s.speed, s.diagonal, s.direction, s.distance))

caption_slot_records = st.builds(
    CaptionSlots,
    size=st.sampled_from(["", "big", "small"]),
    object=st.sampled_from(["car", "hot air balloon", "dog", "traffic light"]),
    position=st.sampled_from(ALL_POSITIONS),
    segments=st.lists(segment_slots, min_size=1, max_size=5).map(tuple),
)


@given(caption_slot_records)
def test_parse_inverts_render(slots):
    text = render(slots)
    assert parse_caption(text, num_segments=len(slots.segments)) == slots
    assert "  " not in text and text == text.strip()


@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 5))
def test_generated_captions_round_trip_and_structure(sprites, seed, k):
    cfg = GenConfig(num_keyframes=k)
    spec = sample_motion(cfg, sprites, np.random.default_rng(seed))
    cap = assemble_caption(spec)
    assert parse_caption(cap.rendered, num_segments=k - 1) == cap.slots
    if k > 2 and not all(s.empty for s in cap.slots.segments):
        assert cap.rendered.count(" first ") == 1
        assert cap.rendered.count("before it") == k - 2


@given(seed=st.integers(0, 2**32 - 1))
def test_track_and_keyframe_slots_agree(sprites, seed):
    # the caption describes the interpolated pixel trajectory, which is linear between keyframes
    spec = sample_motion(GenConfig(), sprites, np.random.default_rng(seed))
    from_track = assemble_caption(spec, interpolate(spec)).slots
    from_keys = caption_slots(spec, segments_from_keyframes(spec), ThresholdConfig())
    assert from_track == from_keys


@given(total=st.floats(0.5, 200), extra=st.floats(0, 100), steps=st.integers(1, 15))
def test_distance_word_monotone(total, extra, steps):
    order = {"a little": 0, "": 1, "a lot": 2}

    def word(d):
        centers = np.zeros((steps + 1, 2))
        centers[:, 0] = np.linspace(0, d, steps + 1)
        return translation_slots(Segment(centers, np.zeros(steps + 1), 224), ThresholdConfig())["distance"]

    assert order[word(total)] <= order[word(total + extra)]


@pytest.mark.parametrize("dx,dy,word", [(5, 0, "right"), (-5, 0, "left"), (0, -5, "upwards"), (0, 5, "downwards")])
def test_axis_direction_words_use_screen_coordinates(dx, dy, word):
    centers = np.array([[100.0, 100.0], [100.0 + dx, 100.0 + dy]])
    assert translation_slots(Segment(centers, np.zeros(2), 224), ThresholdConfig())["direction"] == word


def test_direction_word_ties_go_vertical():
    assert [direction_word(a) for a in (45, 135, -45, -135)] == ["upwards", "upwards", "downwards", "downwards"]
    assert direction_word(180) == "left" and direction_word(0) == "right"


def test_grid_position_corners():
    assert grid_position(0, 0, 224, 224) == "top-left"
    assert grid_position(224, 224, 224, 224) == "bottom-right"
    assert grid_position(112, 112, 224, 224) == "center"


@pytest.mark.parametrize("text", [
    "", "a small car in the left", "A small car in the middle moves right",
    "A car in the top moves sideways", "A car in the top first moves right",
    "A car in the top moves right while rotating up",
])
def test_parse_rejects_non_grammar(text):
    with pytest.raises(CaptionParseError):
        parse_caption(text)


def test_threshold_config_validation_and_round_trip():
    with pytest.raises(ValueError):
        ThresholdConfig(speed_slow_max=8.0)
    cfg = ThresholdConfig(rot_slight_max=5.0)
    assert ThresholdConfig.from_dict(cfg.to_dict()) == cfg


def test_caption_space_single_segment_translation_only():
    assert count_caption_space(2, appearance=False, rotation=False) == 72


def test_caption_space_appearance_only():
    assert count_caption_space(2, translation=False, rotation=False) == 27


def test_caption_space_rotation_only():
    assert count_caption_space(2, appearance=False, translation=False) == 6


@pytest.mark.parametrize("kwargs", [
    dict(num_keyframes=2), dict(num_keyframes=2, include_static=True),
    dict(num_keyframes=3, appearance=False), dict(num_keyframes=3, appearance=False, include_static=True),
])
def test_caption_space_enumeration_matches_product(kwargs):
    assert count_caption_space(**kwargs) == caption_space_product(**kwargs)


def test_caption_space_limit():
    with pytest.raises(ValueError):
        count_caption_space(4, limit=1000)
