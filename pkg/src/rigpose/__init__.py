"""Relative pose of calibrated multi-camera rigs from two affine correspondences."""

from ._kernels import available_backends
from .constraints import (
    AffineCorrespondence,
    DepthEssentialTriple,
    ac_residuals,
    build_constraint_matrix,
    build_equation_system,
    essential_in_depths,
    load_correspondences,
)
from .geometry import (
    Camera,
    CameraRig,
    PluckerLine,
    Pose,
    cayley_to_rotation,
    load_rig,
    plucker_line,
    relative_camera_pose,
    rig_relative_pose,
    rotation_to_cayley,
    translation_from_depth,
)
from .poly import PolyMatrix, TrivariatePoly, det_poly
from .polysolver import RootOptions, find_real_roots
from .robust import RansacConfig, RansacResult, ransac_estimate, ransac_iterations, score_model
from .solvers import (
    DegeneracyReport,
    PoseCandidate,
    check_degenerate_motion,
    recover_depths_translation,
    solve_relpose,
)
from .synthbench import (
    SceneConfig,
    SyntheticScene,
    ac_to_three_pcs,
    affine_from_homography,
    generate_scene,
    noisy_ac,
    pose_errors,
)

__version__ = "0.1.0"
