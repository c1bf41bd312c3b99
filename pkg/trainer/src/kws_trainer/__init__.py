"""Desk-scale trainer exporting kwspot-loadable wakeword models."""

from .model import KwsModel
from .synth import synthesize_dataset, synthesize_stream_clip
from .train import TrainRun, train_and_export
from .wkwd import read_container, write_container

__all__ = [
    "KwsModel",
    "TrainRun",
    "read_container",
    "synthesize_dataset",
    "synthesize_stream_clip",
    "train_and_export",
    "write_container",
]
