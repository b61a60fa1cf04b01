"""Desk-scale millimeter-wave beam selection aided by camera-plane environment semantics.

Pipeline: sample street scenes -> trace specular paths -> sweep beam codebooks for
ground-truth pairs -> project strong paths into per-camera heatmaps -> train a small
differentiable predictor -> report top-K accuracy and throughput ratio.
"""

__version__ = "0.1.0"

from .channel import (ArrayGeometry, NoPathsError, PathComponent,
                      channel_from_paths, relative_powers, steering_vector)
from .codebook import (CandidateSet, Codebook, beam_pair_gains,
                       build_candidate_set, build_codebook, optimal_pair,
                       top_k_pairs)
from .dataset import (DatasetRecord, GenerationConfig, TrainingSample,
                      build_codebooks, build_samples, generate_dataset,
                      generate_records, load_manifest, load_records,
                      load_splits, recompute_optimal, split_by_sequence,
                      write_splits)
from .features import assemble_location_vector
from .formats import (load_model, read_metrics_csv, read_pgm, save_model,
                      write_metrics_csv, write_pgm)
from .losses import loss_all, loss_beam, loss_heatmap
from .metrics import MetricsReport, SweepRow, evaluate, sweep_threshold, uniform_accuracy
from .nets import BeamSelectorNet, JointNet, LocationNet, SemanticsNet, build_net
from .raytrace import RayTraceConfig, line_of_sight_clear, trace_paths
from .scene import (Area, Cuboid, Scene, SceneGenerationError,
                    SceneSamplerConfig, sample_sequence)
from .semantics import (CameraConfig, EffectiveScatterer, ScattererPoint,
                        SemanticHeatmap, corrupt_heatmaps, decode_heatmaps,
                        extract_effective_scatterers,
                        mean_effective_scatterers, precision_recall,
                        project_scatterers, project_to_camera,
                        rasterize_heatmaps, rasterize_pseudo_image)
from .train import (TrainConfig, predict_beam, train_beam_selector,
                    train_joint, train_semantics)

__all__ = [
    "ArrayGeometry", "NoPathsError", "PathComponent", "channel_from_paths",
    "relative_powers", "steering_vector",
    "CandidateSet", "Codebook", "beam_pair_gains", "build_candidate_set",
    "build_codebook", "optimal_pair", "top_k_pairs",
    "DatasetRecord", "GenerationConfig", "TrainingSample", "build_codebooks",
    "build_samples", "generate_dataset", "generate_records", "load_manifest",
    "load_records", "load_splits", "recompute_optimal", "split_by_sequence",
    "write_splits",
    "assemble_location_vector",
    "load_model", "read_metrics_csv", "read_pgm", "save_model",
    "write_metrics_csv", "write_pgm",
    "loss_all", "loss_beam", "loss_heatmap",
    "MetricsReport", "SweepRow", "evaluate", "sweep_threshold",
    "uniform_accuracy",
    "BeamSelectorNet", "JointNet", "LocationNet", "SemanticsNet", "build_net",
    "RayTraceConfig", "line_of_sight_clear", "trace_paths",
    "Area", "Cuboid", "Scene", "SceneGenerationError", "SceneSamplerConfig",
    "sample_sequence",
    "CameraConfig", "EffectiveScatterer", "ScattererPoint", "SemanticHeatmap",
    "corrupt_heatmaps", "decode_heatmaps", "extract_effective_scatterers",
    "mean_effective_scatterers", "precision_recall", "project_scatterers",
    "project_to_camera", "rasterize_heatmaps", "rasterize_pseudo_image",
    "TrainConfig", "predict_beam", "train_beam_selector", "train_joint",
    "train_semantics",
]
