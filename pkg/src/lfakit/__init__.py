"""lfakit: lateral-flow assay digitization toolkit."""

__version__ = "0.1.0"
