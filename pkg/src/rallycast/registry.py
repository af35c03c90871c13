"""Player-level model composition, the prediction pipeline and checkpoints.

Each tracked player owns a perception encoder, a response generator and an
episodic memory; the semantic memory and the discriminator are global.  In
global-model variants one shared player model serves every id.

``predict_next_shot`` runs the full pipeline.  In replay mode the shot is
consumed: the episodic queue and the semantic matrix advance (strictly in
timestamp order).  In query mode the memories are read-only, so what-if
probes can never contaminate a player's history.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig, apply_variant
from .court import CourtFrame, NoLandingError, ResponseMap, decode_landing
from .episodic import EpisodicMemory
from .features import PlayerDirectory, ShotContext, build_shot_context
from .networks import (
    Discriminator,
    NetworkConfig,
    PerceptionNetwork,
    ResponseGenerator,
    count_parameters,
    discriminator_probs,
)
from .nn import tensor as T
from .nn.recurrent import LSTMWeights, TreeCellWeights
from .nn.tensor import Tensor
from .semantic import SemanticMemory
from .synth import ShotRecord

CHECKPOINT_MAGIC = b"RCKP"
CHECKPOINT_VERSION = 1
SHOT_CLASS_ORDER = ("winner", "error", "return")

SHARED_PLAYER = "__shared__"


class OrderViolation(ValueError):
    """Replay-mode shot arrived at or before the player's last seen timestamp."""


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


@dataclass
class PredictionResult:
    response_map: ResponseMap
    landing_m: tuple[float, float]
    landing_confidence: float
    shot_type_probs: np.ndarray          # (winner, error, return)
    noise_seed: int
    no_landing: bool = False

    def to_json(self) -> dict:
        return {
            "landing_m": [round(self.landing_m[0], 4), round(self.landing_m[1], 4)],
            "landing_confidence": round(self.landing_confidence, 6),
            "shot_type_probs": {cls: round(float(p), 6)
                                for cls, p in zip(SHOT_CLASS_ORDER, self.shot_type_probs)},
            "noise_seed": self.noise_seed,
            "no_landing": self.no_landing,
        }


class PlayerModel:
    def __init__(self, player_id: str, net_config: NetworkConfig,
                 run_config: RunConfig, rng: np.random.Generator):
        self.player_id = player_id
        self.pn = PerceptionNetwork(net_config, rng)
        self.rgn = ResponseGenerator(net_config, rng)
        self.em: EpisodicMemory | None = None
        if run_config.use_em:
            cell = TreeCellWeights.create(net_config.embed_dim, rng)
            head = LSTMWeights.create(net_config.embed_dim, net_config.embed_dim, rng)
            self.em = EpisodicMemory(net_config.embed_dim, run_config.em_capacity,
                                     run_config.em_depth, cell, head)
        # chronological order is enforced per receiver: a shared (global)
        # model consumes several players' interleaved streams
        self.last_seen: dict[str, int] = {}
        self.shot_count = 0

    def last_ts_for(self, receiver_id: str) -> int:
        return self.last_seen.get(receiver_id, -1)

    def note_ts(self, receiver_id: str, ts: int) -> None:
        self.last_seen[receiver_id] = ts

    def params(self) -> dict[str, Tensor]:
        key = self.player_id
        out = self.pn.params(f"player.{key}.pn")
        out.update(self.rgn.params(f"player.{key}.rgn"))
        if self.em is not None:
            out.update(self.em.cell.params(f"player.{key}.em.cell"))
            out.update(self.em.read_head.params(f"player.{key}.em.head"))
        return out


class ModelRegistry:
    def __init__(self, config: RunConfig, seed: int | None = None):
        self.config = apply_variant(config)
        self.net_config = self.config.network_config()
        self.frame = CourtFrame(image_size=self.config.image_size)
        self.directory = PlayerDirectory(max_players=self.config.max_players)
        self.rng = np.random.default_rng(self.config.seed if seed is None else seed)
        self.players: dict[str, PlayerModel] = {}
        self.sm: SemanticMemory | None = None
        if self.config.use_sm:
            k = self.config.embed_dim
            self.sm = SemanticMemory(
                k, self.config.sm_slots,
                read_head=LSTMWeights.create(k, k, self.rng),
                write_head=LSTMWeights.create(k, k, self.rng),
                rng=self.rng)
        self.disc: Discriminator | None = None
        if self.config.use_disc:
            self.disc = Discriminator(self.net_config, self.rng)

    # -- player management ---------------------------------------------------------

    def _model_key(self, player_id: str) -> str:
        return player_id if self.config.per_player else SHARED_PLAYER

    def get_or_create_player(self, player_id: str) -> PlayerModel:
        if not player_id:
            raise ValueError("player id must be nonempty")
        key = self._model_key(player_id)
        if key not in self.players:
            self.players[key] = PlayerModel(key, self.net_config, self.config, self.rng)
        if self.config.per_player:
            self.directory.index_of(player_id, create=True)
        return self.players[key]

    def player_ids(self) -> list[str]:
        return [p for p in self.players if p != SHARED_PLAYER]

    def has_player(self, player_id: str) -> bool:
        """True when predictions can be served for this id without creating state."""
        if not self.config.per_player:
            return SHARED_PLAYER in self.players
        return player_id in self.players

    # -- parameters ------------------------------------------------------------------

    def generator_params(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for model in self.players.values():
            out.update(model.params())
        if self.sm is not None:
            out.update(self.sm.read_head.params("sm.read"))
            out.update(self.sm.write_head.params("sm.write"))
        return out

    def discriminator_params(self) -> dict[str, Tensor]:
        return self.disc.params("disc") if self.disc is not None else {}

    def parameter_report(self) -> dict[str, int]:
        gen = count_parameters(self.generator_params())
        disc = count_parameters(self.discriminator_params())
        return {"generator": gen, "discriminator": disc, "total": gen + disc}

    # -- prediction -------------------------------------------------------------------

    def context_from_record(self, record: ShotRecord, with_target: bool = True,
                            create_players: bool = True) -> ShotContext:
        return build_shot_context(record, self.frame, self.directory,
                                  with_target=with_target, create_players=create_players)

    def _noise_seed_for(self, player_id: str, timestamp: int) -> int:
        digest = hashlib.sha256(f"{self.config.seed}:{player_id}:{timestamp}".encode())
        return int.from_bytes(digest.digest()[:4], "little")

    def predict_next_shot(self, player_id: str, shot: ShotContext,
                          mode: str = "query", noise_seed: int | None = None
                          ) -> PredictionResult:
        if mode not in ("query", "replay"):
            raise ValueError(f"mode must be 'query' or 'replay', got {mode!r}")
        model = self.get_or_create_player(player_id)
        if mode == "replay" and shot.timestamp <= model.last_ts_for(player_id):
            raise OrderViolation(
                f"replay shot ts {shot.timestamp} is not newer than player "
                f"{player_id!r} last ts {model.last_ts_for(player_id)}")
        seed = self._noise_seed_for(player_id, shot.timestamp) \
            if noise_seed is None else int(noise_seed)

        image = shot.perception.pixels[None]
        sparse = shot.sparse()[None]
        c_batch = model.pn.forward(image, sparse, train=False)
        c = c_batch[0]
        parts = [c]
        m_em = None
        if model.em is not None:
            m_em = model.em.read(c).m
            parts.append(m_em)
        if self.sm is not None:
            m_sm, _, _ = self.sm.read(c)
            parts.append(m_sm)
        parts.append(Tensor(sparse[0]))
        z = np.random.default_rng(seed).standard_normal(self.config.noise_dim)
        parts.append(Tensor(z))
        cond = T.reshape(T.concat(parts, axis=0), (1, self.net_config.cond_dim))
        y = model.rgn.forward(cond, train=False)
        response = ResponseMap(pixels=y.data[0, :, :, 0].copy())

        # the generator emits per-pixel probabilities, whose peak level is a
        # calibration artifact; decode on the peak-normalized map so the
        # threshold selects the brightest structure, not an absolute level
        no_landing = False
        peak = float(response.pixels.max())
        try:
            if peak <= 0.0:
                raise NoLandingError("all-zero generated map")
            landing, confidence = decode_landing(
                ResponseMap(pixels=response.pixels / peak), self.frame)
        except NoLandingError:
            landing, confidence, no_landing = self.frame.court_center(), 0.0, True
        landing = (float(np.clip(landing[0], *self.frame.x_range)),
                   float(np.clip(landing[1], *self.frame.y_range)))

        if self.disc is not None:
            _, cls_logits = self.disc.forward(image, y.detach(), sparse, train=False)
            _, probs = discriminator_probs(Tensor(np.zeros(1)), cls_logits)
            shot_type_probs = probs[0]
        else:
            shot_type_probs = np.full(3, 1.0 / 3.0)

        if mode == "replay":
            if model.em is not None:
                model.em.append(Tensor(c.data.copy()), shot.timestamp, meta=shot.meta)
            if self.sm is not None:
                write_input = m_em if m_em is not None else c
                self.sm.write(Tensor(write_input.data.copy()))
                self.sm.detach_state()
            if model.em is not None:
                model.em.detach_state()
            model.note_ts(player_id, shot.timestamp)
            model.shot_count += 1

        return PredictionResult(response_map=response, landing_m=landing,
                                landing_confidence=float(confidence),
                                shot_type_probs=shot_type_probs, noise_seed=seed,
                                no_landing=no_landing)

    # -- state hashing -------------------------------------------------------------------

    def memory_state_hash(self) -> str:
        digest = hashlib.sha256()
        for key in sorted(self.players):
            model = self.players[key]
            digest.update(key.encode())
            for receiver, ts in sorted(model.last_seen.items()):
                digest.update(receiver.encode())
                digest.update(np.int64(ts).tobytes())
            if model.em is not None:
                digest.update(model.em.state_hash().encode())
        if self.sm is not None:
            digest.update(self.sm.state_hash().encode())
        return digest.hexdigest()

    def full_state_hash(self) -> str:
        digest = hashlib.sha256(self.memory_state_hash().encode())
        for name, p in sorted(self.generator_params().items()):
            digest.update(name.encode())
            digest.update(p.data.tobytes())
        for name, p in sorted(self.discriminator_params().items()):
            digest.update(name.encode())
            digest.update(p.data.tobytes())
        return digest.hexdigest()

    # -- checkpointing ----------------------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load_checkpoint(cls, path) -> "ModelRegistry":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    def clone(self) -> "ModelRegistry":
        """Deep copy through the checkpoint codec (bit-exact by construction)."""
        return type(self).from_bytes(self.to_bytes())

    def to_bytes(self) -> bytes:
        sections: list[tuple[str, bytes]] = []
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "directory": list(self.directory.ids),
            "players": sorted(self.players),
            "class_order": list(SHOT_CLASS_ORDER),
            "rng_state": _rng_state_to_json(self.rng),
            "player_meta": {key: {"last_seen": m.last_seen, "shot_count": m.shot_count,
                                  "em_metas": [e.meta for e in m.em.queue]
                                  if m.em is not None else None}
                            for key, m in self.players.items()},
        }
        sections.append(("meta", json.dumps(meta, sort_keys=True).encode()))
        if self.disc is not None:
            sections.append(("disc", _pack_arrays(_param_arrays(self.discriminator_params()))))
            sections.append(("disc.bn", _pack_arrays(_bn_arrays(self.disc.bn_states()))))
        if self.sm is not None:
            arrays = {f"head.{k}": v for k, v in
                      _param_arrays({**self.sm.read_head.params("read"),
                                     **self.sm.write_head.params("write")}).items()}
            arrays.update({f"state.{k}": v for k, v in self.sm.state().items()})
            sections.append(("sm", _pack_arrays(arrays)))
        for key in sorted(self.players):
            model = self.players[key]
            arrays = _param_arrays(model.params())
            arrays.update({f"bn.pn.{k}": v
                           for k, v in _bn_arrays(model.pn.bn_states()).items()})
            arrays.update({f"bn.rgn.{k}": v
                           for k, v in _bn_arrays(model.rgn.bn_states()).items()})
            if model.em is not None:
                for name, value in model.em.state().items():
                    if name == "metas":
                        continue
                    arrays[f"em.{name}"] = np.asarray(value)
            sections.append((f"player:{key}", _pack_arrays(arrays)))
        blob = io.BytesIO()
        blob.write(CHECKPOINT_MAGIC)
        blob.write(struct.pack("<II", CHECKPOINT_VERSION, len(sections)))
        for name, payload in sections:
            encoded = name.encode()
            blob.write(struct.pack("<H", len(encoded)))
            blob.write(encoded)
            blob.write(struct.pack("<Q", len(payload)))
            blob.write(payload)
        return blob.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "ModelRegistry":
        sections = _read_sections(data)
        if "meta" not in sections:
            raise CheckpointError("checkpoint has no meta section")
        meta = json.loads(sections["meta"].decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise CheckpointError(
                f"checkpoint version {meta['version']} does not match supported "
                f"version {CHECKPOINT_VERSION}")
        config = RunConfig.from_dict(meta["config"])
        registry = cls(config)
        registry.rng = _rng_state_from_json(meta["rng_state"])
        registry.directory = PlayerDirectory(max_players=config.max_players,
                                             ids=list(meta["directory"]))
        if registry.disc is not None:
            _unpack_params(registry.discriminator_params(), sections["disc"])
            registry.disc.load_bn_states(_bn_from_arrays(_unpack_arrays(sections["disc.bn"])))
        if registry.sm is not None:
            arrays = _unpack_arrays(sections["sm"])
            heads = {**registry.sm.read_head.params("read"),
                     **registry.sm.write_head.params("write")}
            for name, tensor in heads.items():
                tensor.data[:] = arrays[f"head.{name}"]
            registry.sm.load_state({k.split(".", 1)[1]: v for k, v in arrays.items()
                                    if k.startswith("state.")})
        for key in meta["players"]:
            model = PlayerModel(key, registry.net_config, registry.config, registry.rng)
            registry.players[key] = model
            arrays = _unpack_arrays(sections[f"player:{key}"])
            for name, tensor in model.params().items():
                tensor.data[:] = arrays[name]
            model.pn.load_bn_states(_bn_from_arrays(
                {k[len("bn.pn."):]: v for k, v in arrays.items() if k.startswith("bn.pn.")}))
            model.rgn.load_bn_states(_bn_from_arrays(
                {k[len("bn.rgn."):]: v for k, v in arrays.items() if k.startswith("bn.rgn.")}))
            pmeta = meta["player_meta"][key]
            model.last_seen = {k: int(v) for k, v in pmeta["last_seen"].items()}
            model.shot_count = int(pmeta["shot_count"])
            if model.em is not None:
                em_state = {k[len("em."):]: v for k, v in arrays.items()
                            if k.startswith("em.")}
                em_state["metas"] = pmeta["em_metas"]
                model.em.load_state(em_state)
        return registry


# -- checkpoint plumbing ----------------------------------------------------------------


def _param_arrays(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {name: p.data for name, p in params.items()}


def _bn_arrays(states: list[dict]) -> dict[str, np.ndarray]:
    out = {}
    for i, state in enumerate(states):
        out[f"{i}.running_mean"] = state["running_mean"]
        out[f"{i}.running_var"] = state["running_var"]
    return out


def _bn_from_arrays(arrays: dict[str, np.ndarray]) -> list[dict]:
    count = max((int(k.split(".")[0]) for k in arrays), default=-1) + 1
    return [{"running_mean": arrays[f"{i}.running_mean"],
             "running_var": arrays[f"{i}.running_var"]} for i in range(count)]


def _pack_arrays(arrays: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        encoded = name.encode()
        buf.write(struct.pack("<H", len(encoded)))
        buf.write(encoded)
        header = json.dumps({"dtype": str(arr.dtype), "shape": list(arr.shape)}).encode()
        buf.write(struct.pack("<H", len(header)))
        buf.write(header)
        raw = arr.tobytes()
        buf.write(struct.pack("<Q", len(raw)))
        buf.write(raw)
    return buf.getvalue()


def _unpack_arrays(payload: bytes) -> dict[str, np.ndarray]:
    view = io.BytesIO(payload)

    def need(n: int, what: str) -> bytes:
        chunk = view.read(n)
        if len(chunk) != n:
            raise CheckpointError(
                f"truncated checkpoint section while reading {what} at offset "
                f"{view.tell() - len(chunk)}")
        return chunk

    (count,) = struct.unpack("<I", need(4, "array count"))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", need(2, "name length"))
        name = need(name_len, "name").decode()
        (header_len,) = struct.unpack("<H", need(2, "header length"))
        header = json.loads(need(header_len, "header").decode())
        (nbytes,) = struct.unpack("<Q", need(8, "payload length"))
        raw = need(nbytes, f"array {name!r}")
        arr = np.frombuffer(raw, dtype=np.dtype(header["dtype"])).reshape(header["shape"])
        out[name] = arr.copy()
    return out


def _unpack_params(params: dict[str, Tensor], payload: bytes) -> None:
    arrays = _unpack_arrays(payload)
    for name, tensor in params.items():
        if name not in arrays:
            raise CheckpointError(f"checkpoint missing parameter {name!r}")
        tensor.data[:] = arrays[name]


def _read_sections(data: bytes) -> dict[str, bytes]:
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(
            f"bad magic {data[:4]!r} at offset 0; not a checkpoint file")
    offset = 4
    try:
        version, n_sections = struct.unpack_from("<II", data, offset)
    except struct.error as exc:
        raise CheckpointError(f"truncated header at offset {offset}") from exc
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"checkpoint version {version} does not match supported version "
            f"{CHECKPOINT_VERSION}")
    offset += 8
    sections: dict[str, bytes] = {}
    for _ in range(n_sections):
        try:
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode()
            offset += name_len
            (payload_len,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            payload = data[offset:offset + payload_len]
            if len(payload) != payload_len:
                raise CheckpointError(
                    f"truncated section {name!r} at offset {offset}: expected "
                    f"{payload_len} bytes, found {len(payload)}")
            offset += payload_len
            sections[name] = payload
        except struct.error as exc:
            raise CheckpointError(f"truncated section table at offset {offset}") from exc
    return sections


def _rng_state_to_json(rng: np.random.Generator) -> dict:
    state = rng.bit_generator.state
    return json.loads(json.dumps(state, default=int))


def _rng_state_from_json(state: dict) -> np.random.Generator:
    rng = np.random.default_rng(0)
    restored = dict(state)
    inner = dict(restored["state"])
    inner["state"] = int(inner["state"])
    inner["inc"] = int(inner["inc"])
    restored["state"] = inner
    rng.bit_generator.state = restored
    return rng
