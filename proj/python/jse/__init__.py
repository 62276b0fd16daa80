"""Joint echo cancellation, dereverberation and noise reduction."""

from ._core import (
    InvalidInput,
    IoError,
    NumericalFailure,
    RoomConfig,
    Scene,
    SceneConfig,
    SingularSystem,
    evaluate,
    istft,
    kl_divergence,
    lstm_forward,
    measured_ser_db,
    measured_snr_db,
    read_archive,
    read_scene,
    run_pipeline,
    stft,
    synth_scene,
    write_archive,
    write_scene,
)

__all__ = [
    "InvalidInput",
    "IoError",
    "NumericalFailure",
    "RoomConfig",
    "Scene",
    "SceneConfig",
    "SingularSystem",
    "evaluate",
    "istft",
    "kl_divergence",
    "lstm_forward",
    "measured_ser_db",
    "measured_snr_db",
    "read_archive",
    "read_scene",
    "run_pipeline",
    "stft",
    "synth_scene",
    "write_archive",
    "write_scene",
]
