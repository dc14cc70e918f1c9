from . import archive, events, models, store
from .models import (
    ClassificationResult,
    DatasetReport,
    EventRecord,
    Label,
    ModelVersion,
    ProjectState,
    TestSample,
    TrainingSample,
    dataset_report,
    state_fingerprint,
)
from .store import BlobStore, ProjectStore

__all__ = [
    "archive",
    "events",
    "models",
    "store",
    "BlobStore",
    "ProjectStore",
    "ClassificationResult",
    "DatasetReport",
    "EventRecord",
    "Label",
    "ModelVersion",
    "ProjectState",
    "TestSample",
    "TrainingSample",
    "dataset_report",
    "state_fingerprint",
]
