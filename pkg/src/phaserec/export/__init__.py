from .bundle import ExportBundle, export_portable, load_bundle, METADATA_PREFIX
from .executor import GraphExecutor
from .parity import parity_check, compare_latency_eager_vs_exported, ParityReport

__all__ = [
    "ExportBundle",
    "export_portable",
    "load_bundle",
    "METADATA_PREFIX",
    "GraphExecutor",
    "parity_check",
    "compare_latency_eager_vs_exported",
    "ParityReport",
]
