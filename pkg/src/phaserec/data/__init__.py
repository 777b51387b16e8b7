from .manifest import PhaseSet, ManifestEntry, DatasetManifest, make_splits
from .frames import Frame, load_frames, extract_frames, read_annotations, write_annotations
from .clips import ClipSequence, build_clips
from .augment import AugmentPolicy, augment_sequence
from .synth import PhaseDuration, synthesize_dataset

__all__ = [
    "PhaseSet",
    "ManifestEntry",
    "DatasetManifest",
    "make_splits",
    "Frame",
    "load_frames",
    "extract_frames",
    "read_annotations",
    "write_annotations",
    "ClipSequence",
    "build_clips",
    "AugmentPolicy",
    "augment_sequence",
    "PhaseDuration",
    "synthesize_dataset",
]
