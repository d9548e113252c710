"""Full-body anonymization toolkit.

Five per-body options (physical, adversarial, mask-based and identity
removal, plus no-action) orchestrated over pluggable model backends, with an
embedding-manifold guide search, deterministic mocks, evaluation metrics and
an HTTP gateway.
"""

from .attack import (AdversarialResult, AttackConfig, Detection,
                     DetectorInterface, vanish_attack)
from .manifold import (BodyManifold, ManifoldEntry, build_manifold,
                       cosine_distance, read_manifold, select_face_guide,
                       select_guide, write_manifold)
from .metrics import (EvalReport, GaussianMoments, ReidInstance,
                      detection_delta, fid, frechet_distance, psnr, reid_eval)
from .pipeline import (AnonymizationChoice, AnonymizationRequest, BodyInstance,
                       PipelineConfig, anonymize, detect_bodies,
                       run_adversarial, run_identity, run_mask_based,
                       run_physical)
from .raster import BoundingBox

__version__ = "0.1.0"

__all__ = [
    "AdversarialResult", "AttackConfig", "Detection", "DetectorInterface",
    "vanish_attack",
    "BodyManifold", "ManifoldEntry", "build_manifold", "cosine_distance",
    "read_manifold", "select_face_guide", "select_guide", "write_manifold",
    "EvalReport", "GaussianMoments", "ReidInstance", "detection_delta", "fid",
    "frechet_distance", "psnr", "reid_eval",
    "AnonymizationChoice", "AnonymizationRequest", "BodyInstance",
    "PipelineConfig", "anonymize", "detect_bodies", "run_adversarial",
    "run_identity", "run_mask_based", "run_physical",
    "BoundingBox",
    "__version__",
]
