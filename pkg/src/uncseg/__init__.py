"""Uncertainty-aware object instance segmentation with embodied
disambiguation, on a synthetic tabletop.

The package covers the full loop: simulate a cluttered scene, segment it
with stochastic promptable-segmenter oracles into confident masks plus
weighted multi-hypothesis regions, lift the result into a factored 3D
belief, choose pushes that make competing hypotheses disagree, update the
belief from tracked motion and rigid registration, and score everything
with object-size-normalized metrics.
"""

from .belief import (Belief, BeliefHypothesis, BeliefParams, BeliefRegion,
                     ObjectHypothesis, hypothesis_score, init_belief,
                     most_likely, project_to_masks, select_hypothesis)
from .geometry import (DegenerateGeometryError, Plane, PointSet,
                       RigidTransform, UnderdeterminedError, fit_plane_ransac,
                       kabsch, register_rigid_ransac)
from .harness import (ConfigError, ExperimentConfig, StepRecord, parse_config,
                      read_config, run_experiment, run_scene)
from .hypotheses import (ProposalParams, Region, RegionHypothesis, RegionKind,
                         SegmentationHypotheses, duplicate_test,
                         generate_region_hypotheses, partition_regions,
                         propose_hypotheses)
from .masks import (EmptyMaskError, Mask, MaskSource, mask_iom, mask_iou,
                    rle_decode, rle_encode)
from .metrics import (SegEval, evaluate, masks_from_labels, match_segments,
                      osn_scores, pixel_scores)
from .planner import (ActionCandidate, PlannerParams, World, WorldObject,
                      action_objectives, construct_worlds, region_uncertainty,
                      sample_actions, sample_random_action, select_action,
                      select_target_region)
from .render import Observation, correspondence_map, render, render_with_parts
from .scene import (GenConfig, Part, PushAction, PushOutcome, RigidBody,
                    Scene, SceneGenerationError, apply_push, generate_scene)
from .segmenter import (OracleConfig, OracleEventLog, OracleSegmenter,
                        SeededSegmenter, Segmenter, StaleFrameError)
from .update import (RegistrationParams, SimTracker, TrackResult, Tracker,
                     update_belief)

__all__ = [name for name in dir() if not name.startswith("_")]
