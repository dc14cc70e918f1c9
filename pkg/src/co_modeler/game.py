"""Restaurant Frenzy: timed evaluation sessions scored by model confidence.

A session freezes the current model and the live label pool at start, draws
one random target per 5-second round for 90 seconds (18 rounds by default),
and scores each round by the end-of-round classification: 10 x the target's
confidence when the top label matches the target, 0 on a misclassification.

Targets come from SplitMix64 — a named 64-bit PRNG with a documented state
transition — reduced modulo the label count, so (seed, frame script) fully
determines a session transcript in any implementation.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .clock import Clock, ManualClock, WallClock
from .core.models import ClassificationResult, Label, ModelVersion, new_id
from .core.store import ProjectStore
from .errors import (
    NoModelError,
    NotFoundError,
    SessionFinishedError,
    SessionInProgressError,
    SessionRunningError,
    StaleRoundError,
    ValidationFailure,
)
from .trainer import predict

DEFAULT_DURATION_S = 90.0
DEFAULT_ROUND_S = 5.0

GAME_RNG_NAME = "splitmix64"

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64: state += 0x9E3779B97F4A7C15; output mixes with the
    0xBF58476D1CE4E5B9 / 0x94D049BB133111EB multiply-xorshift constants."""

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def next_below(self, n: int) -> int:
        return self.next_u64() % n


def score_round(result: Optional[ClassificationResult], target_label_id: str) -> float:
    """10 x confidence in the target when classified correctly, else 0.

    The multiply is a decimal digit shift, not a binary float multiply, so a
    confidence of 0.78 scores exactly 7.8 points.
    """
    if result is None or result.top_label_id != target_label_id:
        return 0.0
    confidence = result.distribution.get(target_label_id, 0.0)
    return float(Decimal(repr(confidence)).scaleb(1))


@dataclass
class GameRound:
    index: int  # 1-based
    target_label_id: str
    end_result: Optional[ClassificationResult] = None
    score: float = 0.0
    correct: bool = False


@dataclass
class GameSession:
    id: str
    project_id: str
    model: ModelVersion
    labels: list[Label]  # live labels frozen at session start
    rng_seed: int
    duration_s: float
    round_s: float
    clock: Clock
    started_at: float
    rounds: list[GameRound]
    state: str = "running"  # running | finished
    total_score: float = 0.0
    lock: threading.Lock = field(default_factory=threading.Lock)

    @property
    def model_version(self) -> int:
        return self.model.version

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    def elapsed(self) -> float:
        return self.clock.now() - self.started_at

    def current_round_index(self) -> int:
        return min(int(self.elapsed() // self.round_s) + 1, self.round_count)

    def time_left(self) -> float:
        return max(self.duration_s - self.elapsed(), 0.0)


@dataclass
class LabelSummary:
    label_id: str
    name: str
    rounds_played: int
    average_confidence_pct: float


@dataclass
class RoundDetail:
    index: int
    target_label_id: str
    target_name: str
    top_label_id: Optional[str]
    top_name: Optional[str]
    score: float
    correct: bool


@dataclass
class GameSummary:
    session_id: str
    project_id: str
    model_version: int
    total_score: float
    round_count: int
    labels: list[LabelSummary]  # labels never targeted are omitted
    rounds: list[RoundDetail]
    high_score: float


class GameManager:
    """Owns live sessions; one active session per project at a time."""

    def __init__(self, store: ProjectStore) -> None:
        self.store = store
        self._lock = threading.Lock()
        self._sessions: dict[str, GameSession] = {}
        self._active: dict[str, str] = {}  # project_id -> session_id

    def start_game(
        self,
        project_id: str,
        rng_seed: int,
        duration_s: float = DEFAULT_DURATION_S,
        round_s: float = DEFAULT_ROUND_S,
        clock: Optional[Clock] = None,
    ) -> GameSession:
        if duration_s <= 0 or round_s <= 0 or round_s > duration_s:
            raise ValidationFailure("need 0 < round_s <= duration_s")
        live = self.store.get_live(project_id)
        with live.lock:
            model = live.state.current_model
            labels = list(live.state.live_labels())
        if model is None:
            raise NoModelError(f"project {project_id} has no trained model")
        if len(labels) < 2:
            raise ValidationFailure("the game needs at least 2 live labels")

        clock = clock or WallClock()
        rng = SplitMix64(rng_seed)
        n_rounds = int(duration_s // round_s)
        rounds = [
            GameRound(index=i + 1, target_label_id=labels[rng.next_below(len(labels))].id)
            for i in range(n_rounds)
        ]
        session = GameSession(
            id=new_id(),
            project_id=project_id,
            model=model,
            labels=labels,
            rng_seed=rng_seed,
            duration_s=float(duration_s),
            round_s=float(round_s),
            clock=clock,
            started_at=clock.now(),
            rounds=rounds,
        )
        with self._lock:
            active_id = self._active.get(project_id)
            if active_id is not None:
                active = self._sessions[active_id]
                self._refresh(active)
                if active.state == "running":
                    raise SessionInProgressError(
                        f"session {active_id} is still running for {project_id}"
                    )
            self._sessions[session.id] = session
            self._active[project_id] = session.id
        return session

    def get(self, session_id: str) -> GameSession:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise NotFoundError(f"no game session {session_id}")
        self._refresh(session)
        return session

    def _refresh(self, session: GameSession) -> None:
        """Finalize the session once its clock has run out."""
        with session.lock:
            if session.state != "running" or session.elapsed() < session.duration_s:
                return
            total = 0.0
            for rnd in session.rounds:
                rnd.score = score_round(rnd.end_result, rnd.target_label_id)
                rnd.correct = (
                    rnd.end_result is not None
                    and rnd.end_result.top_label_id == rnd.target_label_id
                )
                total += rnd.score
            session.total_score = total
            session.state = "finished"
        self.store.record_score(session.project_id, session.total_score, session.id)

    def submit_frame(
        self, session_id: str, round_index: int, image_bytes: bytes
    ) -> ClassificationResult:
        """Classify a frame against the frozen model; last frame in a round wins.

        Frames are never persisted as test data.
        """
        session = self.get(session_id)
        with session.lock:
            if session.state == "finished":
                raise SessionFinishedError(f"session {session_id} is over")
            current = session.current_round_index()
            if round_index != current:
                raise StaleRoundError(
                    f"round {round_index} is not the current round ({current})"
                )
        feats = self.store.features_for_bytes(image_bytes)
        result = predict(session.model, feats)
        with session.lock:
            if session.state == "finished":
                raise SessionFinishedError(f"session {session_id} is over")
            session.rounds[round_index - 1].end_result = result
        return result

    def advance_clock(self, session_id: str, seconds: float) -> GameSession:
        """Advance a simulated session's clock; rejects wall-clock sessions."""
        session = self.get(session_id)
        if not isinstance(session.clock, ManualClock):
            raise ValidationFailure("session runs on the wall clock")
        session.clock.advance(seconds)
        self._refresh(session)
        return session

    def game_summary(self, session_id: str) -> GameSummary:
        session = self.get(session_id)
        if session.state != "finished":
            raise SessionRunningError(f"session {session_id} is still running")
        names = {label.id: label.name for label in session.labels}

        per_label: dict[str, list[float]] = {}
        for rnd in session.rounds:
            per_label.setdefault(rnd.target_label_id, []).append(rnd.score)
        label_rows = []
        for label in session.labels:  # stable creation order
            scores = per_label.get(label.id)
            if not scores:
                continue  # never targeted -> omitted
            pct = sum(s / 10.0 for s in scores) / len(scores) * 100.0
            label_rows.append(
                LabelSummary(
                    label_id=label.id,
                    name=names[label.id],
                    rounds_played=len(scores),
                    average_confidence_pct=pct,
                )
            )

        def top_of(rnd: GameRound) -> tuple[Optional[str], Optional[str]]:
            if rnd.end_result is None:
                return None, None
            top = rnd.end_result.top_label_id
            return top, names.get(top, top)

        round_rows = []
        for rnd in session.rounds:
            top_id, top_name = top_of(rnd)
            round_rows.append(
                RoundDetail(
                    index=rnd.index,
                    target_label_id=rnd.target_label_id,
                    target_name=names[rnd.target_label_id],
                    top_label_id=top_id,
                    top_name=top_name,
                    score=rnd.score,
                    correct=rnd.correct,
                )
            )
        high = self.store.high_score(session.project_id)
        return GameSummary(
            session_id=session.id,
            project_id=session.project_id,
            model_version=session.model_version,
            total_score=session.total_score,
            round_count=session.round_count,
            labels=label_rows,
            rounds=round_rows,
            high_score=high if high is not None else session.total_score,
        )
