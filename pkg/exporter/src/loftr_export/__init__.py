"""Dense-correspondence exporter for the association pipeline."""

__version__ = "0.1.0"

from .export import export_matches, load_grayscale, match_file_name, write_interchange
from .manifest import ExportJob, JobError, PairJob, load_manifest
from .matchers import CorrelationMatcher, LoFTRMatcher, build_matcher

__all__ = [
    "CorrelationMatcher",
    "ExportJob",
    "JobError",
    "LoFTRMatcher",
    "PairJob",
    "build_matcher",
    "export_matches",
    "load_grayscale",
    "load_manifest",
    "match_file_name",
    "write_interchange",
]
