"""Point microdata, nested spatial windows, rank tables and square detection."""

from .analysis import AccuracyPoint, AcfPoint, acf_csv, acf_profile, baseline_accuracy_vs_level
from .levels import (
    DEFAULT_TAU,
    CellIndex,
    LevelWindow,
    RankTable,
    SquareDetection,
    build_levels,
    detect_nested,
    detect_square,
    rank_table,
    rank_tables_csv,
    tracked_factors,
)
from .microdata import IngestError, RejectReport, UnitTable, ingest_microdata
from .synthetic import (
    ConfigError,
    NestedConfig,
    SyntheticConfig,
    SyntheticData,
    generate_growth_pair,
    generate_nested,
    generate_synthetic,
)

__all__ = [
    "AccuracyPoint",
    "AcfPoint",
    "CellIndex",
    "ConfigError",
    "DEFAULT_TAU",
    "IngestError",
    "LevelWindow",
    "NestedConfig",
    "RankTable",
    "RejectReport",
    "SquareDetection",
    "SyntheticConfig",
    "SyntheticData",
    "UnitTable",
    "acf_csv",
    "acf_profile",
    "baseline_accuracy_vs_level",
    "build_levels",
    "detect_nested",
    "detect_square",
    "generate_growth_pair",
    "generate_nested",
    "generate_synthetic",
    "ingest_microdata",
    "rank_table",
    "rank_tables_csv",
    "tracked_factors",
]
