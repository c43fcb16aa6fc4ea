//! RQR3D: restricted-quadrilateral targets for oriented 3D boxes in bird's-eye
//! view, with the overlap, suppression, assignment, loss and evaluation
//! kernels around them.

// `!(x >= 0.0)` style checks are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assign;
pub mod codec;
pub mod continuity;
pub mod error;
pub mod geom;
pub mod losses;
pub mod metrics;
pub mod nms;
pub mod overlap;
pub mod raster;
pub mod scene;

pub use assign::{assign_targets, centerness, BevGridSpec, CellTarget, Ltrb, TargetMap};
pub use codec::{
    binarize_amin, canonicalize_wl, decode, decode_batch, encode, encode_batch, reassign_offsets, reconstruct_corners,
    DirectionCase, Rqr3dTargets,
};
pub use continuity::{continuity_scan, ContinuityReport};
pub use error::{Error, Result};
pub use geom::{corners_3d, corners_bev, wrap_angle, Aabb2D, ConvexPolygon2D, CornerSet3D, OrientedBox3D, Vec2};
pub use losses::{compute_losses, LossConfig, LossReport};
pub use metrics::{evaluate, EvalConfig, EvalReport};
pub use nms::{nms, NmsMode, ScoredBox};
pub use overlap::{iou_3d, iou_aabb, iou_rotated_bev, OverlapResult};
pub use raster::{map_points_to_bev, BevGrid};
pub use scene::{
    generate_scene, generate_scenes, perturb, FramePredictions, LabeledBox, PerturbParams, RadarPoint, Scene,
    SceneParams,
};
