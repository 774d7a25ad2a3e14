"""slrmig: coupled sea-level-rise and human-migration simulation engine."""

__version__ = "0.1.0"

from .calibration import (CVPlan, CVResult, cross_validate, detect_anomalous_origins,
                          fit_alpha, fit_beta)
from .effects import (DEFAULT_THRESHOLDS, EffectsReport, compute_effects, depth_sweep,
                      incoming_by_county, indirect_classification, origin_decomposition)
from .joint import (JointRunConfig, JointRunResult, ablation_single_model, run_baseline,
                    run_joint)
from .matrix import MigrationMatrix
from .metrics import MetricsReport, compute_metrics, cpc, cpc_distance, mae, r_squared
from .migration import (ModelSpec, ProductionFunction, ext_radiation_weight, gravity_weight,
                        normalize_row, produce_flows, radiation_weight, train_neural)
from .slr import (BlockGroup, DirectExposure, FloodScenario, SplitZones, direct_exposure,
                  project_population, split_zones)
from .zones import FeatureTable, Zone, ZoneGraph, haversine_km

__all__ = [
    "__version__",
    "BlockGroup", "CVPlan", "CVResult", "DEFAULT_THRESHOLDS", "DirectExposure",
    "EffectsReport", "FeatureTable", "FloodScenario", "JointRunConfig", "JointRunResult",
    "MetricsReport", "MigrationMatrix", "ModelSpec", "ProductionFunction", "SplitZones",
    "Zone", "ZoneGraph", "ablation_single_model", "compute_effects", "compute_metrics",
    "cpc", "cpc_distance", "cross_validate", "depth_sweep", "detect_anomalous_origins",
    "direct_exposure", "ext_radiation_weight", "fit_alpha", "fit_beta", "gravity_weight",
    "haversine_km", "incoming_by_county", "indirect_classification", "mae",
    "normalize_row", "origin_decomposition", "produce_flows", "project_population",
    "r_squared", "radiation_weight", "run_baseline", "run_joint", "split_zones",
    "train_neural",
]
