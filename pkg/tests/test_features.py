"""Featurization: normalization, one-hot blocks, overrides."""

import numpy as np
import pytest

from rallycast.court import CourtFrame
from rallycast.features import (
    ANGLE_BINS,
    SPEED_BINS,
    DirectoryFullError,
    PlayerDirectory,
    bin_onehot,
    build_shot_context,
    normalized_geometry,
    override_context,
    score_onehot,
    sparse_width,
)
from rallycast.synth import default_policies, generate_tournament


def some_records(n=10):
    policies, tracked = default_policies()
    return generate_tournament(seed=11, policies=policies, n_shots=n, tracked=tracked)


class TestBlocks:
    def test_bin_onehot_edges(self):
        vec = bin_onehot(5.0, SPEED_BINS, 5.0, 55.0)
        assert vec[0] == 1.0 and vec.sum() == 1.0
        vec = bin_onehot(999.0, SPEED_BINS, 5.0, 55.0)
        assert vec[-1] == 1.0
        vec = bin_onehot(-999.0, SPEED_BINS, 5.0, 55.0)
        assert vec[0] == 1.0

    def test_score_onehot(self):
        vec = score_onehot("30-15")
        assert vec[2] == 1.0 and vec[5 + 1] == 1.0 and vec.sum() == 2.0
        vec = score_onehot("AD-40")
        assert vec[4] == 1.0 and vec[5 + 3] == 1.0

    def test_bad_score(self):
        with pytest.raises(ValueError, match="30-15"):
            score_onehot("thirty-love")

    def test_directory_assignment_and_overflow(self):
        d = PlayerDirectory(max_players=2)
        assert d.index_of("A") == 0
        assert d.index_of("B") == 1
        assert d.index_of("A") == 0
        with pytest.raises(DirectoryFullError):
            d.index_of("C")
        with pytest.raises(KeyError):
            d.onehot("D", create=False)


class TestNormalization:
    def test_receiver_always_on_high_x_side(self):
        for record in some_records(20):
            geo = normalized_geometry(record)
            recv_x = np.mean([p[0] for p in geo["receiver_feet"]])
            assert recv_x > 23.77 / 2

    def test_flip_preserves_distances(self):
        for record in some_records(8):
            geo = normalized_geometry(record)
            orig = np.array([p[:2] for p in record.ball_xyz_t])
            flipped = np.array([p[:2] for p in geo["ball"]])
            d_orig = np.linalg.norm(np.diff(orig, axis=0), axis=1)
            d_flip = np.linalg.norm(np.diff(flipped, axis=0), axis=1)
            np.testing.assert_allclose(d_orig, d_flip, atol=1e-9)


class TestContext:
    def test_build_context_blocks(self):
        frame = CourtFrame(image_size=32)
        directory = PlayerDirectory(max_players=8)
        record = some_records(4)[0]
        ctx = build_shot_context(record, frame, directory)
        sparse = ctx.sparse()
        assert sparse.shape == (sparse_width(8),)
        assert ctx.perception.pixels.shape == (32, 32, 3)
        assert ctx.target_map is not None
        assert ctx.target_landing is not None
        assert ctx.shot_type_label in ("winner", "error", "return")

    def test_override_opponent_and_score(self):
        frame = CourtFrame(image_size=32)
        directory = PlayerDirectory(max_players=8)
        records = some_records(8)
        ctx = build_shot_context(records[0], frame, directory)
        directory.index_of("O2")
        probe = override_context(ctx, directory, opponent="O2", score="30-00")
        assert probe.opponent_id == "O2"
        assert probe.points_onehot[2] == 1.0
        # base context untouched
        assert ctx.opponent_id != "O2" or ctx.opponent_onehot is not probe.opponent_onehot
        np.testing.assert_array_equal(ctx.perception.pixels, probe.perception.pixels)

    def test_override_unknown_opponent_raises(self):
        frame = CourtFrame(image_size=32)
        directory = PlayerDirectory(max_players=8)
        ctx = build_shot_context(some_records(2)[0], frame, directory)
        with pytest.raises(KeyError):
            override_context(ctx, directory, opponent="NOBODY")

    def test_override_bin_bounds(self):
        frame = CourtFrame(image_size=32)
        directory = PlayerDirectory(max_players=8)
        ctx = build_shot_context(some_records(2)[0], frame, directory)
        with pytest.raises(ValueError, match="speed bin"):
            override_context(ctx, directory, speed_bin=SPEED_BINS)
        with pytest.raises(ValueError, match="angle bin"):
            override_context(ctx, directory, angle_bin=ANGLE_BINS)
