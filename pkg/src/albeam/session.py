"""Human-in-the-loop acquisition rounds: render blinded candidate images,
accept a selection, take one training step toward the chosen image, and keep
an append-only log from which the whole run can be replayed bit-exactly.
"""

from __future__ import annotations

import dataclasses
import json
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .beamformers import (GcfConfig, Method, MvdrConfig, das, fdmas, gcf,
                          mvdr)
from .exceptions import (BadRoundError, ConfigurationError, IntegrityError,
                         SequencingError, UnknownCandidateError)
from .geometry import DelayedTensor, ImageGrid, delay_compensate
from .neural import (Adam, TrainConfig, UNet, UNetConfig, beamform_head,
                     desk_unet_config, model_weights, save_checkpoint,
                     train_step)
from .neural.checkpoint import checkpoint_checksum
from .postprocess import (DEFAULT_DYNAMIC_RANGE, BModeImage, envelope,
                          log_compress, render_png)
from .sim import PhantomSpec, ProbeConfig, RFFrame, desk_probe, synthesize_frame

LOG_KIND = "albeam-session"
LOG_VERSION = 1

# Shown beside the candidates so different operators judge images the same way.
SELECTION_CRITERIA = (
    "Determine regions of high intensity and compare for axial/lateral resolution.",
    "Determine regions of homogeneous speckle and compare for speckle resolution.",
    "Determine regions of contrast difference (e.g. cyst) and compare for contrast resolution.",
)


def selection_criteria_text() -> tuple[str, ...]:
    """Fixed, ordered checklist for judging candidate images."""
    return SELECTION_CRITERIA


def round_permutation(session_seed: int, round_id: int, k: int) -> np.ndarray:
    """Display order for round `round_id`: uniform permutation of 0..k-1."""
    rng = np.random.default_rng([session_seed, round_id])
    return rng.permutation(k)


def round_tokens(session_seed: int, round_id: int, k: int) -> list[str]:
    """Opaque per-round candidate ids (128-bit hex), one per display slot."""
    rng = np.random.default_rng([session_seed, round_id, 1])
    return [rng.bytes(16).hex() for _ in range(k)]


@dataclass(frozen=True)
class SessionConfig:
    probe: ProbeConfig
    grid: ImageGrid
    unet: UNetConfig
    train: TrainConfig = TrainConfig()
    mvdr: MvdrConfig = MvdrConfig()
    gcf: GcfConfig = GcfConfig()
    dynamic_range: float = DEFAULT_DYNAMIC_RANGE
    warmup_rounds: int = 5
    epochs_per_selection: int = 1
    session_seed: int = 0
    retain_frames: bool = False

    def __post_init__(self):
        if self.warmup_rounds < 0:
            raise ConfigurationError("warmup_rounds must be >= 0")
        if self.epochs_per_selection < 1:
            raise ConfigurationError("epochs_per_selection must be >= 1")
        if self.unet.in_channels != self.probe.num_channels:
            raise ConfigurationError(
                "model in_channels must equal the probe channel count")

    def to_dict(self) -> dict:
        return {"probe": self.probe.to_dict(), "grid": self.grid.to_dict(),
                "unet": self.unet.to_dict(), "train": self.train.to_dict(),
                "mvdr": self.mvdr.to_dict(), "gcf": self.gcf.to_dict(),
                "dynamic_range": self.dynamic_range,
                "warmup_rounds": self.warmup_rounds,
                "epochs_per_selection": self.epochs_per_selection,
                "session_seed": self.session_seed,
                "retain_frames": self.retain_frames}

    @classmethod
    def from_dict(cls, d: dict) -> "SessionConfig":
        return cls(probe=ProbeConfig.from_dict(d["probe"]),
                   grid=ImageGrid.from_dict(d["grid"]),
                   unet=UNetConfig.from_dict(d["unet"]),
                   train=TrainConfig.from_dict(d["train"]),
                   mvdr=MvdrConfig.from_dict(d["mvdr"]),
                   gcf=GcfConfig.from_dict(d["gcf"]),
                   dynamic_range=float(d["dynamic_range"]),
                   warmup_rounds=int(d["warmup_rounds"]),
                   epochs_per_selection=int(d["epochs_per_selection"]),
                   session_seed=int(d["session_seed"]),
                   retain_frames=bool(d["retain_frames"]))


def desk_session_config(**overrides) -> SessionConfig:
    probe = overrides.pop("probe", desk_probe())
    grid = overrides.pop("grid", ImageGrid.for_probe(probe))
    unet = overrides.pop("unet", desk_unet_config(probe.num_channels))
    return SessionConfig(probe=probe, grid=grid, unet=unet, **overrides)


@dataclass(frozen=True)
class FrameSource:
    """Deterministic per-round frame generator for simulated acquisitions.

    Round r reseeds the phantom with seed0 + (r - 1), so every frame can be
    regenerated later from the log alone.
    """

    phantom: PhantomSpec
    max_depth: float = 0.04
    seed0: int = 0

    def phantom_for_round(self, round_id: int) -> PhantomSpec:
        return replace(self.phantom, rng_seed=self.seed0 + round_id - 1)

    def frame_for_round(self, round_id: int, probe: ProbeConfig) -> RFFrame:
        return synthesize_frame(self.phantom_for_round(round_id), probe,
                                max_depth=self.max_depth)

    def to_dict(self) -> dict:
        return {"phantom": self.phantom.to_dict(),
                "max_depth": self.max_depth, "seed0": self.seed0}

    @classmethod
    def from_dict(cls, d: dict) -> "FrameSource":
        return cls(phantom=PhantomSpec.from_dict(d["phantom"]),
                   max_depth=float(d["max_depth"]), seed0=int(d["seed0"]))


@dataclass(frozen=True)
class Candidate:
    token: str
    method_tag: Method  # server-side only; never serialized for the client
    image_png: bytes


@dataclass(frozen=True)
class CandidateSet:
    round_id: int
    candidates: tuple[Candidate, ...]

    def public_view(self) -> list[dict]:
        """What a client may see: opaque ids only, in display order."""
        return [{"id": c.token} for c in self.candidates]

    def token_for(self, method: Method) -> str:
        for c in self.candidates:
            if c.method_tag is method:
                return c.token
        raise UnknownCandidateError(f"no candidate tagged {method.value}")


@dataclass(frozen=True)
class SessionStats:
    counts: dict[str, int] = field(default_factory=dict)
    total: int = 0

    def percentages(self) -> dict[str, float]:
        if self.total == 0:
            return {m: 0.0 for m in self.counts}
        return {m: 100.0 * c / self.total for m, c in self.counts.items()}

    def to_payload(self) -> dict:
        return {"rounds": str(self.total),
                "counts": {m: str(c) for m, c in sorted(self.counts.items())},
                "percentages": {m: repr(p) for m, p
                                in sorted(self.percentages().items())}}


def _blank_counts() -> dict[str, int]:
    return {m.value: 0 for m in
            (Method.DAS, Method.FDMAS, Method.MVDR, Method.GCF, Method.MODEL)}


class ActiveSession:
    """Single-operator acquisition/selection/update loop.

    One round is open at a time; submissions funnel through an internal lock
    so state transitions are atomic even under a threaded server.
    """

    def __init__(self, config: SessionConfig, log_path, checkpoint_dir,
                 frame_source: FrameSource | None = None):
        self.config = config
        self.log_path = Path(log_path)
        if self.log_path.exists() and self.log_path.stat().st_size > 0:
            raise ConfigurationError(
                f"session log {self.log_path} already exists; logs are "
                "append-only records — pick a fresh path or move the old one")
        self.checkpoint_dir = Path(checkpoint_dir)
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        self.frame_source = frame_source
        self.model = UNet(config.unet)
        self.opt = Adam(config.train)
        self._lock = threading.RLock()
        self._open: dict | None = None
        self._submitted = 0
        self._counts = _blank_counts()
        self._loss_history: list[dict] = []
        self._retained: list[RFFrame] = []
        header = {"kind": LOG_KIND, "version": LOG_VERSION,
                  "config": config.to_dict(),
                  "frame_source": (frame_source.to_dict()
                                   if frame_source else None)}
        self._append_log(header)

    # -- logging ----------------------------------------------------------

    def _append_log(self, record: dict) -> None:
        with open(self.log_path, "a") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    # -- round lifecycle ---------------------------------------------------

    @property
    def rounds_submitted(self) -> int:
        return self._submitted

    @property
    def next_round_id(self) -> int:
        return self._submitted + 1

    def awaiting_selection(self) -> bool:
        return self._open is not None

    def current_candidates(self) -> CandidateSet | None:
        with self._lock:
            if self._open is None:
                return None
            return self._open["candidate_set"]

    def _render(self, img: BModeImage) -> bytes:
        return render_png(img)

    def run_round(self, frame: RFFrame,
                  phantom_rng_seed: int | None = None) -> CandidateSet:
        """Beamform one frame every way, blind the results, open the round."""
        with self._lock:
            if self._open is not None:
                raise SequencingError(
                    f"round {self._open['round_id']} is awaiting a selection")
            cfg = self.config
            round_id = self.next_round_id
            started = time.perf_counter()
            tensor = delay_compensate(frame, cfg.grid)

            entries: list[tuple[Method, BModeImage]] = []
            for method, data in (
                    (Method.DAS, das(tensor)),
                    (Method.FDMAS, fdmas(tensor)),
                    (Method.MVDR, mvdr(tensor, cfg.mvdr)),
                    (Method.GCF, gcf(tensor, cfg.gcf))):
                entries.append((method, log_compress(envelope(data),
                                                     cfg.dynamic_range,
                                                     method_tag=method)))
            if round_id > cfg.warmup_rounds:
                w = model_weights(tensor, self.model, train=False)
                entries.append((Method.MODEL,
                                beamform_head(tensor, w, cfg.dynamic_range)))

            k = len(entries)
            perm = round_permutation(cfg.session_seed, round_id, k)
            tokens = round_tokens(cfg.session_seed, round_id, k)
            candidates = tuple(
                Candidate(token=tokens[slot],
                          method_tag=entries[int(src)][0],
                          image_png=self._render(entries[int(src)][1]))
                for slot, src in enumerate(perm))
            cset = CandidateSet(round_id=round_id, candidates=candidates)
            self._open = {
                "round_id": round_id,
                "tensor": tensor,
                "frame": frame,
                "frame_digest": frame.digest(),
                "phantom_rng_seed": phantom_rng_seed,
                "targets": {m: img for m, img in entries},
                "candidate_set": cset,
                "started": started,
            }
            return cset

    def next_round(self) -> CandidateSet:
        """Pull the next simulated frame from the frame source and open it."""
        with self._lock:
            if self.frame_source is None:
                raise ConfigurationError("session has no frame source")
            rid = self.next_round_id
            frame = self.frame_source.frame_for_round(rid, self.config.probe)
            seed = self.frame_source.phantom_for_round(rid).rng_seed
            return self.run_round(frame, phantom_rng_seed=seed)

    def submit_selection(self, round_id: int, token: str):
        """Close the open round with the user's choice; returns (loss, stats)."""
        with self._lock:
            if self._open is None:
                raise SequencingError("no round is awaiting a selection")
            if round_id != self._open["round_id"]:
                raise BadRoundError(
                    f"round {round_id} is not the open round "
                    f"{self._open['round_id']}")
            cset: CandidateSet = self._open["candidate_set"]
            chosen = next((c for c in cset.candidates if c.token == token), None)
            if chosen is None:
                raise UnknownCandidateError(f"unknown candidate id {token!r}")

            cfg = self.config
            method = chosen.method_tag
            skipped = method is Method.MODEL
            loss = 0.0
            if not skipped:
                target = self._open["targets"][method]
                for _ in range(cfg.epochs_per_selection):
                    result = train_step(self._open["tensor"], target,
                                        self.model, self.opt, cfg.train,
                                        cfg.dynamic_range)
                    loss = result.loss

            ckpt_path = self.checkpoint_dir / "model.ckpt"
            checksum = save_checkpoint(ckpt_path, self.model, self.opt)
            duration = time.perf_counter() - self._open["started"]

            record = {
                "kind": "round",
                "round_id": round_id,
                "frame_digest": self._open["frame_digest"],
                "phantom_rng_seed": self._open["phantom_rng_seed"],
                "candidates": [[c.token, c.method_tag.value]
                               for c in cset.candidates],
                "selected": token,
                "selected_method": method.value,
                "step_skipped": skipped,
                "loss": loss,
                "checkpoint": checksum,
                "duration_s": duration,
                "timestamp": time.time(),
            }
            self._append_log(record)
            self._counts[method.value] += 1
            self._submitted += 1
            self._loss_history.append({"round_id": round_id, "loss": loss,
                                       "step_skipped": skipped})
            if cfg.retain_frames:
                self._retained.append(self._open["frame"])
            self._open = None
            return loss, self.stats()

    # -- reporting ---------------------------------------------------------

    def stats(self) -> SessionStats:
        with self._lock:
            return SessionStats(counts=dict(self._counts),
                                total=self._submitted)

    def loss_history(self) -> list[dict]:
        with self._lock:
            return list(self._loss_history)

    def reveal(self, round_id: int) -> dict[str, str]:
        """Token -> method map for a CLOSED round (operator debrief)."""
        with self._lock:
            if self._open is not None and self._open["round_id"] == round_id:
                raise SequencingError("round is still open; tags are withheld")
            for rec in self._read_log_rounds():
                if rec["round_id"] == round_id:
                    return {tok: m for tok, m in rec["candidates"]}
            raise BadRoundError(f"round {round_id} has not been recorded")

    def _read_log_rounds(self) -> list[dict]:
        rounds = []
        with open(self.log_path) as fh:
            for line in fh:
                rec = json.loads(line)
                if rec.get("kind") == "round":
                    rounds.append(rec)
        return rounds


def stats_from_log(log_path) -> SessionStats:
    """Selection statistics recomputed from a session log file."""
    counts = _blank_counts()
    total = 0
    with open(log_path) as fh:
        for line in fh:
            rec = json.loads(line)
            if rec.get("kind") != "round":
                continue
            m = rec["selected_method"]
            if m not in counts:
                raise IntegrityError(f"log names unknown method {m!r}")
            counts[m] += 1
            total += 1
    return SessionStats(counts=counts, total=total)


def load_log(log_path) -> tuple[dict, list[dict]]:
    """Split a session log into its header and round records."""
    with open(log_path) as fh:
        lines = [json.loads(ln) for ln in fh if ln.strip()]
    if not lines or lines[0].get("kind") != LOG_KIND:
        raise IntegrityError("not a session log (missing header line)")
    header = lines[0]
    if header.get("version") != LOG_VERSION:
        raise IntegrityError(f"unsupported log version {header.get('version')}")
    rounds = [ln for ln in lines[1:] if ln.get("kind") == "round"]
    for i, rec in enumerate(rounds, start=1):
        if rec["round_id"] != i:
            raise IntegrityError(
                f"log rounds out of order: expected {i}, got {rec['round_id']}")
    return header, rounds


def replay_log(log_path, work_dir) -> dict:
    """Re-run a recorded session from scratch and verify determinism.

    Frames are regenerated from the logged frame source, each regenerated
    frame must match its recorded digest, the recorded selections are
    re-submitted, and the final checkpoint checksum must equal the recorded
    one. Returns a small report dict.
    """
    header, rounds = load_log(log_path)
    if header.get("frame_source") is None:
        raise IntegrityError("log has no frame source; frames cannot be "
                             "regenerated for replay")
    config = SessionConfig.from_dict(header["config"])
    source = FrameSource.from_dict(header["frame_source"])
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    replay_path = work / "replay.ndjson"
    # The replay transcript is derived data; a leftover from an earlier
    # replay of the same workspace is safe to discard.
    replay_path.unlink(missing_ok=True)
    session = ActiveSession(config, replay_path, work / "ckpt",
                            frame_source=source)
    for rec in rounds:
        phantom = replace(source.phantom,
                          rng_seed=int(rec["phantom_rng_seed"]))
        frame = synthesize_frame(phantom, config.probe,
                                 max_depth=source.max_depth)
        if frame.digest() != rec["frame_digest"]:
            raise IntegrityError(
                f"round {rec['round_id']}: regenerated frame digest "
                f"{frame.digest()[:12]}… != recorded "
                f"{rec['frame_digest'][:12]}…")
        cset = session.run_round(frame,
                                 phantom_rng_seed=int(rec["phantom_rng_seed"]))
        token = cset.token_for(Method(rec["selected_method"]))
        if token != rec["selected"]:
            raise IntegrityError(
                f"round {rec['round_id']}: candidate ids diverged from the log")
        session.submit_selection(cset.round_id, token)

    final = checkpoint_checksum(session.checkpoint_dir / "model.ckpt")
    recorded = rounds[-1]["checkpoint"] if rounds else None
    return {"rounds": len(rounds), "final_checksum": final,
            "recorded_checksum": recorded,
            "match": bool(rounds) and final == recorded}
