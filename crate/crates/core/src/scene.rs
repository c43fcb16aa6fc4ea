//! Synthetic scenes and their JSON persistence.
//!
//! # File schemas
//!
//! All files are UTF-8 JSON objects with a `schema` name, an integer
//! `version` and a `classes` name table that integer class ids index into.
//! Paths ending in `.gz` are gzip-compressed.
//!
//! ```text
//! rqr3d/scenes v1       frames[].{frame_id, boxes[], radar_points[]}
//! rqr3d/predictions v1  frames[].{frame_id, detections[]}
//! rqr3d/targets v1      frames[].{frame_id, targets[]}
//!
//! box        {"class": 0, "center": [x, y, z], "size": [w, l, h], "yaw": θ}
//! detection  box + {"score": s}
//! target     {"class": 0, "aabb": [x_min, y_min, x_max, y_max],
//!             "keypoints": [u, v, amin_u, amin_v, d_x, d_y, z_ctr, h], "score"?: s}
//! radar      {"x": .., "y": .., "feature": [..]}
//! ```
//!
//! # Generator
//!
//! Frame `k` draws from ChaCha8 seeded with `seed` on stream `k`. Per box, in
//! order: class (weighted), w, l, h, yaw in [−π, π) (then wrapped), center x
//! and y inside the extent shrunk by the footprint half-diagonal (redrawn
//! until the minimum center separation holds), z. Radar points follow the
//! boxes: x, y uniform over the extent, then the feature components in
//! [0, 1).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codec::{Rqr3dTargets, KEYPOINT_CHANNELS};
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Aabb2D, OrientedBox3D, Vec2};
use crate::nms::ScoredBox;

pub const SCENES_SCHEMA: &str = "rqr3d/scenes";
pub const PREDICTIONS_SCHEMA: &str = "rqr3d/predictions";
pub const TARGETS_SCHEMA: &str = "rqr3d/targets";
pub const SCHEMA_VERSION: u64 = 1;

pub const NUSCENES_CLASSES: [&str; 10] = [
    "car",
    "truck",
    "construction_vehicle",
    "bus",
    "trailer",
    "barrier",
    "motorcycle",
    "bicycle",
    "pedestrian",
    "traffic_cone",
];

/// Classes trained with doubled footprints (pedestrian, traffic cone).
pub const DEFAULT_SIZE_DOUBLING: [u16; 2] = [8, 9];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledBox {
    pub bbox: OrientedBox3D,
    pub class_id: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarPoint {
    pub x: f64,
    pub y: f64,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub frame_id: String,
    pub boxes: Vec<LabeledBox>,
    pub radar_points: Vec<RadarPoint>,
}

/// Box layout shared by scene, prediction and target files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRecord {
    #[serde(rename = "class")]
    pub class_id: u16,
    pub center: [f64; 3],
    pub size: [f64; 3],
    pub yaw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl BoxRecord {
    pub fn from_box(b: &OrientedBox3D, class_id: u16, score: Option<f64>) -> Self {
        Self { class_id, center: [b.x_ctr, b.y_ctr, b.z_ctr], size: [b.w, b.l, b.h], yaw: b.theta, score }
    }

    pub fn to_box(&self) -> Result<OrientedBox3D> {
        let b = OrientedBox3D {
            x_ctr: self.center[0],
            y_ctr: self.center[1],
            z_ctr: self.center[2],
            w: self.size[0],
            l: self.size[1],
            h: self.size[2],
            theta: self.yaw,
        };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetRecord {
    #[serde(rename = "class")]
    pub class_id: u16,
    pub aabb: [f64; 4],
    pub keypoints: [f64; KEYPOINT_CHANNELS],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl TargetRecord {
    pub fn from_targets(t: &Rqr3dTargets, class_id: u16, score: Option<f64>) -> Self {
        Self { class_id, aabb: t.aabb.as_array(), keypoints: t.keypoints(), score }
    }

    pub fn to_targets(&self) -> Rqr3dTargets {
        Rqr3dTargets::from_parts(Aabb2D::from_array(self.aabb), self.keypoints)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneFrame {
    pub frame_id: String,
    pub boxes: Vec<BoxRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub radar_points: Vec<RadarPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFrame {
    pub frame_id: String,
    pub detections: Vec<BoxRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetFrame {
    pub frame_id: String,
    pub targets: Vec<TargetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document<F> {
    pub schema: String,
    pub version: u64,
    pub classes: Vec<String>,
    pub frames: Vec<F>,
}

pub type SceneFile = Document<SceneFrame>;
pub type PredictionFile = Document<PredictionFrame>;
pub type TargetFile = Document<TargetFrame>;

pub trait Schema {
    const NAME: &'static str;
}

impl Schema for SceneFrame {
    const NAME: &'static str = SCENES_SCHEMA;
}

impl Schema for PredictionFrame {
    const NAME: &'static str = PREDICTIONS_SCHEMA;
}

impl Schema for TargetFrame {
    const NAME: &'static str = TARGETS_SCHEMA;
}

fn default_classes() -> Vec<String> {
    NUSCENES_CLASSES.iter().map(|s| s.to_string()).collect()
}

impl<F: Schema> Document<F> {
    pub fn new(classes: Vec<String>, frames: Vec<F>) -> Self {
        Self { schema: F::NAME.to_string(), version: SCHEMA_VERSION, classes, frames }
    }

    pub fn with_default_classes(frames: Vec<F>) -> Self {
        Self::new(default_classes(), frames)
    }

    fn check_class(&self, class_id: u16) -> Result<()> {
        if (class_id as usize) < self.classes.len() {
            Ok(())
        } else {
            Err(Error::InvalidParams(format!(
                "class id {class_id} outside class table of {} entries",
                self.classes.len()
            )))
        }
    }
}

impl SceneFile {
    pub fn from_scenes(classes: Vec<String>, scenes: &[Scene]) -> Self {
        let frames = scenes
            .iter()
            .map(|s| SceneFrame {
                frame_id: s.frame_id.clone(),
                boxes: s.boxes.iter().map(|b| BoxRecord::from_box(&b.bbox, b.class_id, None)).collect(),
                radar_points: s.radar_points.clone(),
            })
            .collect();
        Self::new(classes, frames)
    }

    pub fn to_scenes(&self) -> Result<Vec<Scene>> {
        self.frames
            .iter()
            .map(|f| {
                let boxes = f
                    .boxes
                    .iter()
                    .map(|r| {
                        self.check_class(r.class_id)?;
                        Ok(LabeledBox { bbox: r.to_box()?, class_id: r.class_id })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Scene { frame_id: f.frame_id.clone(), boxes, radar_points: f.radar_points.clone() })
            })
            .collect()
    }
}

/// Detections of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePredictions {
    pub frame_id: String,
    pub detections: Vec<ScoredBox>,
}

impl PredictionFile {
    pub fn from_predictions(classes: Vec<String>, preds: &[FramePredictions]) -> Self {
        let frames = preds
            .iter()
            .map(|p| PredictionFrame {
                frame_id: p.frame_id.clone(),
                detections: p
                    .detections
                    .iter()
                    .map(|d| BoxRecord::from_box(&d.bbox, d.class_id, Some(d.score)))
                    .collect(),
            })
            .collect();
        Self::new(classes, frames)
    }

    pub fn to_predictions(&self) -> Result<Vec<FramePredictions>> {
        self.frames
            .iter()
            .map(|f| {
                let detections = f
                    .detections
                    .iter()
                    .map(|r| {
                        self.check_class(r.class_id)?;
                        let score = r.score.ok_or_else(|| Error::InvalidParams("detection without score".into()))?;
                        if !(0.0..=1.0).contains(&score) {
                            return Err(Error::InvalidParams(format!("score {score} outside [0, 1]")));
                        }
                        Ok(ScoredBox { bbox: r.to_box()?, score, class_id: r.class_id })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FramePredictions { frame_id: f.frame_id.clone(), detections })
            })
            .collect()
    }
}

fn open_reader(path: &Path) -> Result<Box<dyn Read>> {
    let f = BufReader::new(File::open(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzDecoder::new(f)))
    } else {
        Ok(Box::new(f))
    }
}

/// Parses a document, checking schema name and version before the body.
pub fn from_json_str<F: Schema + DeserializeOwned>(text: &str) -> Result<Document<F>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let schema = value.get("schema").and_then(|s| s.as_str()).unwrap_or_default().to_string();
    let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0);
    if schema != F::NAME || version != SCHEMA_VERSION {
        return Err(Error::UnsupportedSchema { schema, version });
    }
    Ok(serde_json::from_value(value)?)
}

pub fn to_json_string<F: Serialize>(doc: &Document<F>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

pub fn load<F: Schema + DeserializeOwned>(path: &Path) -> Result<Document<F>> {
    let mut text = String::new();
    open_reader(path)?.read_to_string(&mut text)?;
    from_json_str(&text)
}

pub fn save<F: Serialize>(doc: &Document<F>, path: &Path) -> Result<()> {
    let text = to_json_string(doc)?;
    let f = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        // mtime stays zero so identical documents give identical bytes
        let mut enc = GzEncoder::new(f, Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?.flush()?;
    } else {
        let mut f = f;
        f.write_all(text.as_bytes())?;
        f.flush()?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub frames: usize,
    pub boxes_per_frame: usize,
    /// Boxes and radar points stay inside `[-extent, extent]^2`.
    pub extent: f64,
    pub w_range: (f64, f64),
    pub l_range: (f64, f64),
    pub h_range: (f64, f64),
    pub z_range: (f64, f64),
    pub class_weights: Vec<f64>,
    pub min_separation: Option<f64>,
    pub radar_points: usize,
    pub feature_dim: usize,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            frames: 1,
            boxes_per_frame: 20,
            extent: 50.0,
            w_range: (0.5, 3.0),
            l_range: (0.5, 12.0),
            h_range: (0.8, 4.0),
            z_range: (-1.0, 2.0),
            class_weights: vec![1.0; NUSCENES_CLASSES.len()],
            min_separation: None,
            radar_points: 0,
            feature_dim: 4,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [("w", self.w_range), ("l", self.l_range), ("h", self.h_range)];
        for (name, (lo, hi)) in ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(Error::InvalidParams(format!(
                    "{name} range must satisfy 0 < min <= max, got ({lo}, {hi})"
                )));
            }
        }
        if !(self.z_range.0 <= self.z_range.1) {
            return Err(Error::InvalidParams("z range must satisfy min <= max".into()));
        }
        let reach = 0.5 * self.w_range.1.hypot(self.l_range.1);
        if !(self.extent > reach) {
            return Err(Error::InvalidParams(format!(
                "extent {} too small for the largest footprint (half-diagonal {reach})",
                self.extent
            )));
        }
        if self.class_weights.is_empty()
            || self.class_weights.iter().any(|w| !(*w >= 0.0))
            || self.class_weights.iter().sum::<f64>() <= 0.0
        {
            return Err(Error::InvalidParams("class weights must be non-negative with a positive sum".into()));
        }
        if self.min_separation.is_some_and(|d| !(d >= 0.0)) {
            return Err(Error::InvalidParams("minimum separation must be non-negative".into()));
        }
        Ok(())
    }
}

fn range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

/// One frame of a synthetic scene.
pub fn generate_scene(seed: u64, frame: usize, params: &SceneParams) -> Result<Scene> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(frame as u64);
    let classes = WeightedIndex::new(&params.class_weights).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut boxes: Vec<LabeledBox> = Vec::with_capacity(params.boxes_per_frame);
    for _ in 0..params.boxes_per_frame {
        let class_id = classes.sample(&mut rng) as u16;
        let w = range(&mut rng, params.w_range);
        let l = range(&mut rng, params.l_range);
        let h = range(&mut rng, params.h_range);
        let yaw = wrap_angle(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let reach = params.extent - 0.5 * w.hypot(l);
        let mut center = None;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            let c = Vec2::new(rng.gen_range(-reach..reach), rng.gen_range(-reach..reach));
            let ok = params.min_separation.is_none_or(|d| boxes.iter().all(|b| b.bbox.center_bev().distance(c) >= d));
            if ok {
                center = Some(c);
                break;
            }
        }
        let c = center.ok_or_else(|| {
            Error::InvalidParams(format!(
                "could not place box {} with minimum separation {:?}",
                boxes.len(),
                params.min_separation
            ))
        })?;
        let z = range(&mut rng, params.z_range);
        boxes.push(LabeledBox { bbox: OrientedBox3D::new([c.x, c.y, z], [w, l, h], yaw)?, class_id });
    }
    let radar_points = (0..params.radar_points)
        .map(|_| {
            let x = rng.gen_range(-params.extent..params.extent);
            let y = rng.gen_range(-params.extent..params.extent);
            let feature = (0..params.feature_dim).map(|_| rng.gen::<f64>()).collect();
            RadarPoint { x, y, feature }
        })
        .collect();
    Ok(Scene { frame_id: format!("{seed:08x}-{frame:06}"), boxes, radar_points })
}

pub fn generate_scenes(seed: u64, params: &SceneParams) -> Result<Vec<Scene>> {
    (0..params.frames).into_par_iter().map(|k| generate_scene(seed, k, params)).collect()
}

/// Controlled corruption of ground truth into predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbParams {
    /// Center offsets have uniform direction and magnitude uniform in
    /// `[0, 2 * translation_mean]`.
    pub translation_mean: f64,
    pub yaw_offset: f64,
    /// Multiplicative size factor applied to w, l and h.
    pub size_scale: f64,
    pub drop_prob: f64,
    pub false_positives: usize,
    pub score_range: (f64, f64),
}

impl Default for PerturbParams {
    fn default() -> Self {
        Self {
            translation_mean: 0.0,
            yaw_offset: 0.0,
            size_scale: 1.0,
            drop_prob: 0.0,
            false_positives: 0,
            score_range: (0.5, 1.0),
        }
    }
}

impl PerturbParams {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.score_range;
        if !(self.translation_mean >= 0.0 && self.translation_mean.is_finite()) {
            return Err(Error::InvalidParams("translation mean must be non-negative".into()));
        }
        if !self.yaw_offset.is_finite() || !(self.size_scale > 0.0 && self.size_scale.is_finite()) {
            return Err(Error::InvalidParams("yaw offset must be finite and size scale positive".into()));
        }
        if !(0.0..=1.0).contains(&self.drop_prob) {
            return Err(Error::InvalidParams("drop probability must lie in [0, 1]".into()));
        }
        if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidParams("score range must satisfy 0 <= min <= max <= 1".into()));
        }
        Ok(())
    }
}

/// Predictions derived from each frame's boxes; frame `k` uses stream `k` of
/// a ChaCha8 generator seeded with `seed`. False positives are placed 1 km
/// away from the origin so they never match.
pub fn perturb(scenes: &[Scene], seed: u64, params: &PerturbParams) -> Result<Vec<FramePredictions>> {
    params.validate()?;
    scenes
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let score = |rng: &mut ChaCha8Rng| range(rng, params.score_range);
            let mut detections = Vec::with_capacity(s.boxes.len() + params.false_positives);
            for b in &s.boxes {
                let keep = !rng.gen_bool(params.drop_prob);
                let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
                let r = range(&mut rng, (0.0, 2.0 * params.translation_mean));
                let sc = score(&mut rng);
                if !keep {
                    continue;
                }
                let g = b.bbox;
                let bbox = OrientedBox3D::new(
                    [g.x_ctr + r * phi.cos(), g.y_ctr + r * phi.sin(), g.z_ctr],
                    [g.w * params.size_scale, g.l * params.size_scale, g.h * params.size_scale],
                    g.theta + params.yaw_offset,
                )?;
                detections.push(ScoredBox { bbox, score: sc, class_id: b.class_id });
            }
            for i in 0..params.false_positives {
                let class_id = s.boxes.get(i % s.boxes.len().max(1)).map_or(0, |b| b.class_id);
                let bbox = OrientedBox3D::new([1000.0 + 10.0 * i as f64, 1000.0, 0.0], [1.0, 1.0, 1.0], 0.0)?;
                detections.push(ScoredBox { bbox, score: score(&mut rng), class_id });
            }
            Ok(FramePredictions { frame_id: s.frame_id.clone(), detections })
        })
        .collect()
}
