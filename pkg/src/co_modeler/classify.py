"""Photo-mode and live-mode classification, plus the test-dashboard view.

Photo-mode images are persisted as test data; live-mode frames are
ephemeral. Every classification reads an immutable snapshot of the current
model — a retrain swaps the model between predictions, never mid-prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Optional

from .clock import Clock, WallClock
from .core.models import ClassificationResult, ProjectState, TestSample
from .core.store import ProjectStore
from .errors import NoModelError
from .trainer import predict

LIVE_MAX_RATE_HZ = 5.0

BADGE_CROSS = "cross"
BADGE_CHECK = "check"
BADGE_NONE = "none"


def photo_classify(
    store: ProjectStore,
    project_id: str,
    image_bytes: bytes,
    author: str,
) -> tuple[TestSample, ClassificationResult]:
    """Classify a photo and persist it as a test sample.

    The stored result always matches the model version recorded with it; if
    a retrain lands between prediction and persistence, the photo is
    re-predicted with the new model under the append lock.
    """
    live = store.get_live(project_id)
    with live.lock:
        model = live.state.current_model
    if model is None:
        raise NoModelError(f"project {project_id} has no trained model")

    feats = store.features_for_bytes(image_bytes)
    result = predict(model, feats)
    sample = None
    with live.lock:
        current = live.state.current_model
        assert current is not None  # models are never un-trained
        if current.version != model.version:
            model = current
            result = predict(model, feats)
        sample = store.add_test_sample(
            project_id,
            image_bytes,
            author,
            result_payload=result.to_payload(),
            model_version=model.version,
        )
    return sample, result


def live_classify(
    store: ProjectStore,
    project_id: str,
    frames: Iterable[bytes],
    clock: Optional[Clock] = None,
    max_rate_hz: float = LIVE_MAX_RATE_HZ,
) -> Iterator[ClassificationResult]:
    """Classify a frame stream in real time; frames are never persisted.

    Emits at most ``max_rate_hz`` results per second on the given clock;
    frames arriving inside the throttle window are dropped. Ends cleanly
    when the input stream ends.
    """
    live = store.get_live(project_id)
    with live.lock:
        if live.state.current_model is None:
            raise NoModelError(f"project {project_id} has no trained model")
    clock = clock or WallClock()
    min_interval = 1.0 / max_rate_hz
    last_emit: Optional[float] = None
    for frame in frames:
        now = clock.now()
        if last_emit is not None and (now - last_emit) < min_interval:
            continue
        last_emit = now
        with live.lock:
            model = live.state.current_model
        assert model is not None
        yield predict(model, store.features_for_bytes(frame))


@dataclass
class TestSampleView:
    sample: TestSample
    badge: str  # cross | check | none — rendering is the UI's job
    correct: Optional[bool]


_GROUP_RANK = {False: 0, True: 1, None: 2}


def test_dashboard(state: ProjectState) -> list[TestSampleView]:
    """Misclassified first, then correct, then unverdicted; newest first within groups.

    A pure function of the state: re-querying after any event re-orders
    immediately.
    """
    views = []
    for sample in state.live_test_samples():
        correct = state.sample_correct(sample)
        badge = BADGE_NONE if correct is None else (BADGE_CHECK if correct else BADGE_CROSS)
        views.append(TestSampleView(sample=sample, badge=badge, correct=correct))
    views.sort(key=lambda v: (_GROUP_RANK[v.correct], -v.sample.added_seq))
    return views
