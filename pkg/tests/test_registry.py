"""Registry contracts: player lifecycle, prediction modes, checkpoints."""

import numpy as np
import pytest

from rallycast.config import RunConfig, apply_variant
from rallycast.registry import (
    CheckpointError,
    ModelRegistry,
    OrderViolation,
    SHOT_CLASS_ORDER,
)
from rallycast.synth import default_policies, generate_tournament

SMALL = dict(image_size=32, em_capacity=8, sm_slots=4)


def make_registry(variant="full", seed=0):
    return ModelRegistry(apply_variant(RunConfig(variant=variant, seed=seed, **SMALL)))


def some_records(n=10, seed=5):
    policies, tracked = default_policies()
    return generate_tournament(seed=seed, policies=policies, n_shots=n,
                               tracked=tracked)


class TestPlayers:
    def test_same_id_same_model(self):
        reg = make_registry()
        a = reg.get_or_create_player("P1")
        b = reg.get_or_create_player("P1")
        assert a is b

    def test_isolation_between_players(self):
        reg = make_registry()
        recs = some_records(8)
        p1_recs = [r for r in recs if r.receiver == "P1"]
        for r in p1_recs[:2]:
            reg.predict_next_shot("P1", reg.context_from_record(r), mode="replay")
        before = reg.players["P1"].em.state_hash()
        reg.get_or_create_player("P9")
        assert reg.players["P1"].em.state_hash() == before
        assert len(reg.players["P9"].em) == 0

    def test_empty_id_rejected(self):
        with pytest.raises(ValueError):
            make_registry().get_or_create_player("")


class TestPredict:
    def test_query_mode_pure_and_deterministic(self):
        reg = make_registry()
        recs = some_records(6)
        for r in recs[:3]:
            reg.predict_next_shot(r.receiver, reg.context_from_record(r), mode="replay")
        state = reg.memory_state_hash()
        ctx = reg.context_from_record(recs[3])
        a = reg.predict_next_shot(recs[3].receiver, ctx, mode="query", noise_seed=9)
        b = reg.predict_next_shot(recs[3].receiver, ctx, mode="query", noise_seed=9)
        assert reg.memory_state_hash() == state
        np.testing.assert_array_equal(a.response_map.pixels, b.response_map.pixels)
        assert a.to_json() == b.to_json()

    def test_replay_appends_once(self):
        reg = make_registry()
        recs = [r for r in some_records(10) if r.receiver == "P1"]
        reg.predict_next_shot("P1", reg.context_from_record(recs[0]), mode="replay")
        assert len(reg.players["P1"].em) == 1

    def test_replay_order_violation(self):
        reg = make_registry()
        recs = [r for r in some_records(10) if r.receiver == "P1"][:2]
        reg.predict_next_shot("P1", reg.context_from_record(recs[1]), mode="replay")
        with pytest.raises(OrderViolation):
            reg.predict_next_shot("P1", reg.context_from_record(recs[0]), mode="replay")

    def test_sm_shared_across_players(self):
        reg = make_registry()
        recs = some_records(10)
        p2_shot = next(r for r in recs if r.receiver == "P2")
        before = reg.sm.state_hash()
        reg.predict_next_shot("P2", reg.context_from_record(p2_shot), mode="replay")
        assert reg.sm.state_hash() != before

    def test_prediction_result_shape(self):
        reg = make_registry()
        r = some_records(4)[0]
        result = reg.predict_next_shot(r.receiver, reg.context_from_record(r),
                                       mode="query")
        assert abs(result.shot_type_probs.sum() - 1.0) < 1e-6
        x, y = result.landing_m
        assert reg.frame.x_range[0] <= x <= reg.frame.x_range[1]
        assert reg.frame.y_range[0] <= y <= reg.frame.y_range[1]
        assert set(result.to_json()["shot_type_probs"]) == set(SHOT_CLASS_ORDER)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, tmp_path):
        reg = make_registry()
        recs = some_records(8)
        for r in recs[:5]:
            reg.predict_next_shot(r.receiver, reg.context_from_record(r), mode="replay")
        path = tmp_path / "ck.bin"
        reg.save_checkpoint(path)
        reg2 = ModelRegistry.load_checkpoint(path)
        assert reg2.full_state_hash() == reg.full_state_hash()
        ctx = reg.context_from_record(recs[5])
        ctx2 = reg2.context_from_record(recs[5])
        a = reg.predict_next_shot(recs[5].receiver, ctx, mode="query", noise_seed=1)
        b = reg2.predict_next_shot(recs[5].receiver, ctx2, mode="query", noise_seed=1)
        np.testing.assert_array_equal(a.response_map.pixels, b.response_map.pixels)

    def test_em_tree_round_trips_node_by_node(self, tmp_path):
        reg = make_registry()
        recs = some_records(12)
        for r in recs[:8]:
            reg.predict_next_shot(r.receiver, reg.context_from_record(r), mode="replay")
        path = tmp_path / "ck.bin"
        reg.save_checkpoint(path)
        reg2 = ModelRegistry.load_checkpoint(path)
        for key, model in reg.players.items():
            other = reg2.players[key]
            assert len(model.em) == len(other.em)
            a_nodes = model.em.node_values()
            b_nodes = other.em.node_values()
            assert len(a_nodes) == len(b_nodes)
            for lvl_a, lvl_b in zip(a_nodes, b_nodes):
                for (ha, ua), (hb, ub) in zip(lvl_a, lvl_b):
                    np.testing.assert_array_equal(ha, hb)
                    np.testing.assert_array_equal(ua, ub)

    def test_truncated_file_rejected_cleanly(self, tmp_path):
        reg = make_registry()
        path = tmp_path / "ck.bin"
        reg.save_checkpoint(path)
        data = path.read_bytes()
        path.write_bytes(data[:len(data) // 3])
        with pytest.raises(CheckpointError, match="truncated"):
            ModelRegistry.load_checkpoint(path)

    def test_version_mismatch_names_both(self, tmp_path):
        import struct

        reg = make_registry()
        path = tmp_path / "ck.bin"
        reg.save_checkpoint(path)
        data = bytearray(path.read_bytes())
        data[4:8] = struct.pack("<I", 99)
        path.write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match=r"99.*1"):
            ModelRegistry.load_checkpoint(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "ck.bin"
        path.write_bytes(b"JUNKJUNKJUNK")
        with pytest.raises(CheckpointError, match="magic"):
            ModelRegistry.load_checkpoint(path)

    def test_clone_is_independent(self):
        reg = make_registry()
        recs = some_records(6)
        for r in recs[:3]:
            reg.predict_next_shot(r.receiver, reg.context_from_record(r), mode="replay")
        clone = reg.clone()
        assert clone.full_state_hash() == reg.full_state_hash()
        nxt = recs[3]
        clone.predict_next_shot(nxt.receiver, clone.context_from_record(nxt),
                                mode="replay")
        assert clone.memory_state_hash() != reg.memory_state_hash()


class TestParameterReport:
    def test_generator_and_discriminator_counts_positive(self):
        reg = make_registry()
        reg.get_or_create_player("P1")
        report = reg.parameter_report()
        assert report["generator"] > 0
        assert report["discriminator"] > 0
        assert report["total"] == report["generator"] + report["discriminator"]
