"""6D object-pose toolkit: pose math, transformation losses, 6D augmentation,
ADD(-S) evaluation, scaled prediction heads, and synthetic ground truth."""

from .augment import (
    AnnotatedFrame,
    AugmentParams,
    augment_frame,
    augment_pose,
    color_augment,
    rotation_delta,
    warp_image,
    warp_point,
)
from .backend import BACKEND
from .fit import AdamState, FitConfig, FitResult, adam_step, fit_pose
from .geometry import (
    CameraIntrinsics,
    IntrinsicsVector,
    ObjectModel,
    Pose,
    axis_angle_to_matrix,
    load_object_model,
    matrix_to_axis_angle,
    project,
    recover_translation,
    rodrigues_rotate,
    save_object_model,
    transform_points,
)
from .head import (
    AnchorGrid,
    Detection,
    FeatureMap,
    ScalingConfig,
    conv_block,
    decode_center,
    encode_center_offset,
    nms,
    refine_rotation,
    scaling_config,
)
from .loss import (
    LossGrad,
    LossWeights,
    combined_loss,
    loss_asym,
    loss_sym,
    loss_trans,
    loss_trans_grad,
    sample_model_points,
)
from .metrics import (
    EvalReport,
    PoseEstimate,
    add_auto,
    add_metric,
    add_s_metric,
    evaluate,
    is_correct,
)
from .synth import (
    SceneSpec,
    ShapeSpec,
    make_model,
    render_cuboid_overlay,
    sample_scene,
    write_dataset,
)

__version__ = "0.1.0"
