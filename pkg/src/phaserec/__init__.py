"""Online surgical-phase recognition: efficient CNN-GRU video classifier with
profiling, portable-graph export, and a causal streaming simulator."""

__version__ = "0.1.0"
