mod output;
mod render;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rqr3d::assign::{assign_targets, BevGridSpec};
use rqr3d::codec::{binarize_amin, decode, encode, near_cardinal};
use rqr3d::continuity::continuity_scan;
use rqr3d::metrics::{evaluate, EvalConfig, EvalReport};
use rqr3d::nms::{nms, NmsMode};
use rqr3d::scene::{
    self, generate_scenes, perturb, FramePredictions, LabeledBox, PerturbParams, PredictionFile, Scene, SceneFile,
    SceneParams, TargetFile, TargetFrame, TargetRecord, DEFAULT_SIZE_DOUBLING, NUSCENES_CLASSES,
};
use rqr3d::{wrap_angle, Error, OrientedBox3D, Result};
use serde::Serialize;

use output::{csv_bytes, num, report_json, write_bytes, write_document};
use render::{render_svg, Layer};

#[derive(Parser)]
#[command(name = "rqr3d", version, about = "RQR3D box targets, overlap, NMS and evaluation tools")]
struct Cli {
    /// Worker threads for batch work; defaults to all cores.
    #[arg(long, env = "RQR3D_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes.
    Gen(GenArgs),
    /// Derive predictions from ground truth with controlled noise.
    Perturb(PerturbArgs),
    /// Encode boxes to RQR3D targets, decode targets, or both with residuals.
    Convert(ConvertArgs),
    /// Sweep the heading of a template box and report per-channel jumps.
    Continuity(ContinuityArgs),
    /// Suppress overlapping predictions and compare standard and rotated NMS.
    Nms(NmsArgs),
    /// Evaluate predictions against ground truth.
    Eval(EvalArgs),
    /// Assign BEV grid targets and check that every foreground cell decodes to its box.
    Assign(AssignArgs),
    /// Draw one frame as SVG.
    Render(RenderArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Encode,
    Decode,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Standard,
    Rotated,
}

impl From<Mode> for NmsMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Standard => NmsMode::Standard,
            Mode::Rotated => NmsMode::Rotated,
        }
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let v = parse_list(s)?;
    match v[..] {
        [a, b] => Ok((a, b)),
        [a] => Ok((a, a)),
        _ => Err(format!("expected `min,max`, got `{s}`")),
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}"))).collect()
}

#[derive(Args)]
struct GridArgs {
    /// Half the number of cells per side; the grid is 2N x 2N.
    #[arg(long, default_value_t = 64)]
    grid_n: usize,
    /// Cell size in meters.
    #[arg(long, default_value_t = 0.8)]
    cell_m: f64,
}

impl GridArgs {
    fn spec(&self) -> Result<BevGridSpec> {
        BevGridSpec::centered(self.grid_n, self.cell_m)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    frames: usize,
    #[arg(long, default_value_t = 20)]
    boxes: usize,
    /// Half-width of the square scene in meters.
    #[arg(long, default_value_t = 50.0)]
    extent: f64,
    #[arg(long, value_parser = parse_pair, default_value = "0.5,3")]
    w_range: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0.5,12")]
    l_range: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "0.8,4")]
    h_range: (f64, f64),
    #[arg(long, value_parser = parse_pair, default_value = "-1,2")]
    z_range: (f64, f64),
    /// Relative class frequencies, one per class of the default table.
    #[arg(long, value_delimiter = ',')]
    class_weights: Option<Vec<f64>>,
    /// Minimum distance between box centers in meters.
    #[arg(long)]
    min_sep: Option<f64>,
    #[arg(long, default_value_t = 0)]
    radar_points: usize,
    #[arg(long, default_value_t = 4)]
    feature_dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean center offset in meters.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0.0)]
    yaw_offset: f64,
    #[arg(long, default_value_t = 1.0)]
    size_scale: f64,
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    /// False positives per frame.
    #[arg(long, default_value_t = 0)]
    fp: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ConvertArgs {
    /// Scene file for `encode` and `both`, target file for `decode`.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "encode")]
    direction: Direction,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Headings within this distance of a multiple of π/2 are flagged.
    #[arg(long, default_value_t = 1e-6)]
    cardinal_tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ContinuityArgs {
    #[arg(long, default_value_t = 2.0)]
    w: f64,
    #[arg(long, default_value_t = 4.0)]
    l: f64,
    #[arg(long, default_value_t = 1.5)]
    h: f64,
    /// Starting heading of the sweep.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta0: f64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NmsArgs {
    /// Prediction file.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rotated")]
    mode: Mode,
    #[arg(long, default_value_t = 0.5)]
    iou_thresh: f64,
    /// Let detections of different classes suppress each other.
    #[arg(long)]
    class_agnostic: bool,
    /// Where to write the standard-vs-rotated comparison.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth scene file.
    #[arg(long)]
    gt: PathBuf,
    /// Prediction file.
    #[arg(long = "in")]
    input: PathBuf,
    /// Matching thresholds in meters.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2,4")]
    dist_thresh: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    tp_thresh: f64,
    /// Keep the low-recall and low-precision part of the PR curve.
    #[arg(long)]
    no_clip: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AssignArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Class ids whose footprints are doubled before assignment.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZE_DOUBLING)]
    double_classes: Vec<u16>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    preds: Option<PathBuf>,
    /// Frame id; defaults to the first frame.
    #[arg(long)]
    frame: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 8.0)]
    px_per_m: f64,
    #[arg(long, value_enum, default_value = "svg")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

fn require_format(f: Format, allowed: &[Format], cmd: &str) -> Result<()> {
    if allowed.iter().any(|a| std::mem::discriminant(a) == std::mem::discriminant(&f)) {
        Ok(())
    } else {
        let name = f.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
        Err(invalid(format!("`{cmd}` does not support --format {name}")))
    }
}

fn load_scenes(path: &Path) -> Result<(Vec<String>, Vec<Scene>)> {
    let doc: SceneFile = scene::load(path)?;
    let scenes = doc.to_scenes()?;
    Ok((doc.classes, scenes))
}

fn load_predictions(path: &Path) -> Result<(Vec<String>, Vec<FramePredictions>)> {
    let doc: PredictionFile = scene::load(path)?;
    let preds = doc.to_predictions()?;
    Ok((doc.classes, preds))
}

fn default_classes() -> Vec<String> {
    NUSCENES_CLASSES.iter().map(|s| s.to_string()).collect()
}

fn cmd_gen(a: &GenArgs) -> Result<()> {
    let classes = default_classes();
    let params = SceneParams {
        frames: a.frames,
        boxes_per_frame: a.boxes,
        extent: a.extent,
        w_range: a.w_range,
        l_range: a.l_range,
        h_range: a.h_range,
        z_range: a.z_range,
        class_weights: a.class_weights.clone().unwrap_or_else(|| vec![1.0; classes.len()]),
        min_separation: a.min_sep,
        radar_points: a.radar_points,
        feature_dim: a.feature_dim,
    };
    if params.class_weights.len() != classes.len() {
        return Err(invalid(format!("expected {} class weights, got {}", classes.len(), params.class_weights.len())));
    }
    let t = Instant::now();
    let scenes = generate_scenes(a.seed, &params)?;
    let elapsed = t.elapsed();
    write_document(a.out.as_deref(), &SceneFile::from_scenes(classes, &scenes))?;
    let n: usize = scenes.iter().map(|s| s.boxes.len()).sum();
    eprintln!("generated {} frames, {n} boxes in {:.3} s", scenes.len(), elapsed.as_secs_f64());
    Ok(())
}

fn cmd_perturb(a: &PerturbArgs) -> Result<()> {
    let (classes, scenes) = load_scenes(&a.input)?;
    let params = PerturbParams {
        translation_mean: a.jitter,
        yaw_offset: a.yaw_offset,
        size_scale: a.size_scale,
        drop_prob: a.drop,
        false_positives: a.fp,
        ..Default::default()
    };
    let preds = perturb(&scenes, a.seed, &params)?;
    write_document(a.out.as_deref(), &PredictionFile::from_predictions(classes, &preds))?;
    let n: usize = preds.iter().map(|p| p.detections.len()).sum();
    eprintln!("wrote {n} predictions over {} frames", preds.len());
    Ok(())
}

const TARGET_HEADER: [&str; 15] = [
    "frame_id", "box", "class", "x_min", "y_min", "x_max", "y_max", "u", "v", "amin_u", "amin_v", "d_x", "d_y",
    "z_ctr", "h",
];

const BOX_HEADER: [&str; 10] = ["frame_id", "box", "class", "x", "y", "z", "w", "l", "h", "yaw"];

#[derive(Serialize)]
struct CardinalBox {
    frame_id: String,
    index: usize,
    yaw: f64,
}

#[derive(Serialize)]
struct RoundTripReport {
    frames: usize,
    boxes: usize,
    max_center_residual: f64,
    max_size_residual: f64,
    max_yaw_residual: f64,
    max_corner_residual: f64,
    cardinal_tolerance: f64,
    cardinal_boxes: Vec<CardinalBox>,
}

fn encode_scenes(scenes: &[Scene]) -> Result<Vec<TargetFrame>> {
    use rayon::prelude::*;
    scenes
        .par_iter()
        .map(|s| {
            let targets = s
                .boxes
                .iter()
                .map(|b| Ok(TargetRecord::from_targets(&encode(&b.bbox)?, b.class_id, None)))
                .collect::<Result<Vec<_>>>()?;
            Ok(TargetFrame { frame_id: s.frame_id.clone(), targets })
        })
        .collect()
}

fn cmd_convert(a: &ConvertArgs) -> Result<()> {
    require_format(a.format, &[Format::Json, Format::Csv], "convert")?;
    let t = Instant::now();
    match a.direction {
        Direction::Encode => {
            let (classes, scenes) = load_scenes(&a.input)?;
            let frames = encode_scenes(&scenes)?;
            let n: usize = frames.iter().map(|f| f.targets.len()).sum();
            match a.format {
                Format::Csv => {
                    let rows = frames.iter().flat_map(|f| {
                        f.targets.iter().enumerate().map(move |(i, r)| {
                            let mut row = vec![f.frame_id.clone(), i.to_string(), r.class_id.to_string()];
                            row.extend(r.aabb.iter().chain(&r.keypoints).map(|&x| num(x)));
                            row
                        })
                    });
                    write_bytes(a.out.as_deref(), &csv_bytes(&TARGET_HEADER, rows)?)?;
                }
                _ => write_document(a.out.as_deref(), &TargetFile::new(classes, frames))?,
            }
            eprintln!("encoded {n} boxes in {:.3} s", t.elapsed().as_secs_f64());
        }
        Direction::Decode => {
            let doc: TargetFile = scene::load(&a.input)?;
            let mut scenes = Vec::with_capacity(doc.frames.len());
            for f in &doc.frames {
                let boxes = f
                    .targets
                    .iter()
                    .map(|r| {
                        if r.class_id as usize >= doc.classes.len() {
                            return Err(invalid(format!("class id {} outside class table", r.class_id)));
                        }
                        let mut t = r.to_targets();
                        t.amin_u = f64::from(binarize_amin(t.amin_u));
                        t.amin_v = f64::from(binarize_amin(t.amin_v));
                        Ok(LabeledBox { bbox: decode(&t)?, class_id: r.class_id })
                    })
                    .collect::<Result<Vec<_>>>()?;
                scenes.push(Scene { frame_id: f.frame_id.clone(), boxes, radar_points: Vec::new() });
            }
            let n: usize = scenes.iter().map(|s| s.boxes.len()).sum();
            match a.format {
                Format::Csv => {
                    let rows = scenes.iter().flat_map(|s| {
                        s.boxes.iter().enumerate().map(move |(i, b)| {
                            let x = b.bbox;
                            let mut row = vec![s.frame_id.clone(), i.to_string(), b.class_id.to_string()];
                            row.extend([x.x_ctr, x.y_ctr, x.z_ctr, x.w, x.l, x.h, x.theta].map(num));
                            row
                        })
                    });
                    write_bytes(a.out.as_deref(), &csv_bytes(&BOX_HEADER, rows)?)?;
                }
                _ => write_document(a.out.as_deref(), &SceneFile::from_scenes(doc.classes.clone(), &scenes))?,
            }
            eprintln!("decoded {n} boxes in {:.3} s", t.elapsed().as_secs_f64());
        }
        Direction::Both => {
            require_format(a.format, &[Format::Json], "convert --direction both")?;
            let (_, scenes) = load_scenes(&a.input)?;
            let mut r = RoundTripReport {
                frames: scenes.len(),
                boxes: 0,
                max_center_residual: 0.0,
                max_size_residual: 0.0,
                max_yaw_residual: 0.0,
                max_corner_residual: 0.0,
                cardinal_tolerance: a.cardinal_tol,
                cardinal_boxes: Vec::new(),
            };
            for s in &scenes {
                for (i, b) in s.boxes.iter().enumerate() {
                    let g = b.bbox;
                    let t = encode(&g)?;
                    let d = decode(&t)?;
                    let corners = rqr3d::codec::reconstruct_corners(&t)?;
                    r.boxes += 1;
                    r.max_center_residual = r
                        .max_center_residual
                        .max(g.center_bev().distance(d.center_bev()))
                        .max((g.z_ctr - d.z_ctr).abs());
                    r.max_size_residual =
                        r.max_size_residual.max((g.w - d.w).abs()).max((g.l - d.l).abs()).max((g.h - d.h).abs());
                    r.max_yaw_residual = r.max_yaw_residual.max(wrap_angle(g.theta - d.theta).abs());
                    r.max_corner_residual = r
                        .max_corner_residual
                        .max(rqr3d::geom::point_set_distance(&rqr3d::corners_bev(&g), &corners.bottom));
                    if near_cardinal(g.theta, a.cardinal_tol) {
                        r.cardinal_boxes.push(CardinalBox { frame_id: s.frame_id.clone(), index: i, yaw: g.theta });
                    }
                }
            }
            write_bytes(a.out.as_deref(), report_json(&r)?.as_bytes())?;
            eprintln!(
                "round trip over {} boxes: center {:.3e} m, size {:.3e} m, yaw {:.3e} rad, {} near-cardinal ({:.3} s)",
                r.boxes,
                r.max_center_residual,
                r.max_size_residual,
                r.max_yaw_residual,
                r.cardinal_boxes.len(),
                t.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}

fn cmd_continuity(a: &ContinuityArgs) -> Result<()> {
    require_format(a.format, &[Format::Json, Format::Csv], "continuity")?;
    let template = OrientedBox3D::new([0.0, 0.0, 0.0], [a.w, a.l, a.h], a.theta0)?;
    let r = continuity_scan(&template, a.step)?;
    match a.format {
        Format::Csv => {
            let mut rows = Vec::new();
            for (family, chans) in [("rqr3d", &r.rqr3d), ("angle_raw", &r.raw_angle), ("angle_trig", &r.trig_angle)] {
                for c in chans.iter() {
                    rows.push(vec![
                        family.to_string(),
                        c.channel.clone(),
                        num(output::round_sig(c.max_jump)),
                        c.theta_at_max.map(|t| num(output::round_sig(t))).unwrap_or_default(),
                        String::new(),
                    ]);
                }
            }
            for (name, n) in [("amin_u", r.amin_u_changes), ("amin_v", r.amin_v_changes)] {
                let jump = if n > 0 { "1" } else { "0" };
                rows.push(vec!["rqr3d".into(), name.into(), jump.into(), String::new(), n.to_string()]);
            }
            let header = ["family", "channel", "max_jump", "theta_at_max", "changes"];
            write_bytes(a.out.as_deref(), &csv_bytes(&header, rows)?)?;
        }
        _ => write_bytes(a.out.as_deref(), report_json(&r)?.as_bytes())?,
    }
    let worst = r.rqr3d.iter().map(|c| c.max_jump).fold(0.0, f64::max);
    let raw = r.raw_angle.iter().find(|c| c.channel == "theta").map_or(0.0, |c| c.max_jump);
    eprintln!(
        "{} samples: max rqr3d jump {worst:.6e} (bound {:.6e}, {}), raw theta jump {raw:.6}, amin changes {}/{}",
        r.samples,
        r.bound,
        if r.rqr3d_within_bound() { "within" } else { "EXCEEDED" },
        r.amin_u_changes,
        r.amin_v_changes
    );
    Ok(())
}

#[derive(Serialize)]
struct NmsFrameDiff {
    frame_id: String,
    detections: usize,
    kept_standard: usize,
    kept_rotated: usize,
    only_standard: Vec<usize>,
    only_rotated: Vec<usize>,
}

#[derive(Serialize)]
struct NmsReport {
    iou_threshold: f64,
    class_aware: bool,
    mode: &'static str,
    frames: Vec<NmsFrameDiff>,
}

fn cmd_nms(a: &NmsArgs) -> Result<()> {
    use rayon::prelude::*;
    if !(0.0..=1.0).contains(&a.iou_thresh) {
        return Err(invalid(format!("--iou-thresh must lie in [0, 1], got {}", a.iou_thresh)));
    }
    let (classes, preds) = load_predictions(&a.input)?;
    let class_aware = !a.class_agnostic;
    let t = Instant::now();
    let results: Vec<(Vec<usize>, Vec<usize>)> = preds
        .par_iter()
        .map(|f| {
            (
                nms(&f.detections, NmsMode::Standard, a.iou_thresh, class_aware),
                nms(&f.detections, NmsMode::Rotated, a.iou_thresh, class_aware),
            )
        })
        .collect();
    let secs = t.elapsed().as_secs_f64();
    let pairs: f64 = preds.iter().map(|f| (f.detections.len() * f.detections.len().saturating_sub(1)) as f64).sum();

    let mode: NmsMode = a.mode.into();
    let kept: Vec<FramePredictions> = preds
        .iter()
        .zip(&results)
        .map(|(f, (std_keep, rot_keep))| {
            let keep = if mode == NmsMode::Standard { std_keep } else { rot_keep };
            FramePredictions {
                frame_id: f.frame_id.clone(),
                detections: keep.iter().map(|&i| f.detections[i]).collect(),
            }
        })
        .collect();
    write_document(a.out.as_deref(), &PredictionFile::from_predictions(classes, &kept))?;

    let diffs: Vec<NmsFrameDiff> = preds
        .iter()
        .zip(&results)
        .map(|(f, (s, r))| {
            let mut only_standard: Vec<usize> = s.iter().copied().filter(|i| !r.contains(i)).collect();
            let mut only_rotated: Vec<usize> = r.iter().copied().filter(|i| !s.contains(i)).collect();
            only_standard.sort_unstable();
            only_rotated.sort_unstable();
            NmsFrameDiff {
                frame_id: f.frame_id.clone(),
                detections: f.detections.len(),
                kept_standard: s.len(),
                kept_rotated: r.len(),
                only_standard,
                only_rotated,
            }
        })
        .collect();
    let (ks, kr): (usize, usize) = diffs.iter().fold((0, 0), |(x, y), d| (x + d.kept_standard, y + d.kept_rotated));
    if let Some(path) = &a.report {
        let report = NmsReport {
            iou_threshold: a.iou_thresh,
            class_aware,
            mode: if mode == NmsMode::Standard { "standard" } else { "rotated" },
            frames: diffs,
        };
        write_bytes(Some(path), report_json(&report)?.as_bytes())?;
    }
    eprintln!(
        "kept {ks} (standard) / {kr} (rotated) of {} detections; {:.3e} box pairs/s",
        preds.iter().map(|f| f.detections.len()).sum::<usize>(),
        if secs > 0.0 { pairs / secs } else { f64::INFINITY }
    );
    Ok(())
}

fn eval_table(r: &EvalReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = write!(s, "{:<22}{:>7}{:>7}", "class", "gt", "pred");
    for t in &r.dist_thresholds {
        let _ = write!(s, "{:>9}", format!("AP@{t}"));
    }
    let _ = writeln!(s, "{:>9}{:>9}{:>9}", "ATE", "ASE", "AOE");
    for c in r.classes.iter().filter(|c| c.num_gt > 0 || c.num_pred > 0) {
        let _ = write!(s, "{:<22}{:>7}{:>7}", c.name, c.num_gt, c.num_pred);
        for ap in &c.ap {
            let _ = write!(s, "{ap:>9.4}");
        }
        let e = c.tp_errors;
        let _ = writeln!(s, "{:>9.4}{:>9.4}{:>9.4}", e.ate, e.ase, e.aoe);
    }
    let _ = writeln!(
        s,
        "mAP {:.4}  mATE {:.4}  mASE {:.4}  mAOE {:.4}  NDS-3 {:.4}",
        r.map, r.mate, r.mase, r.maoe, r.nds3
    );
    s
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    require_format(a.format, &[Format::Json, Format::Csv], "eval")?;
    let (gt_classes, scenes) = load_scenes(&a.gt)?;
    let (pred_classes, preds) = load_predictions(&a.input)?;
    if gt_classes != pred_classes {
        return Err(invalid("ground truth and predictions use different class tables"));
    }
    let cfg = EvalConfig {
        dist_thresholds: a.dist_thresh.clone(),
        tp_threshold: a.tp_thresh,
        clip: !a.no_clip,
        ..Default::default()
    };
    let report = evaluate(&scenes, &preds, &gt_classes, &cfg)?;
    match a.format {
        Format::Csv => {
            let mut header = vec!["class".to_string(), "num_gt".into(), "num_pred".into()];
            header.extend(report.dist_thresholds.iter().map(|t| format!("ap@{t}")));
            header.extend(["mean_ap", "ate", "ase", "aoe", "tp_matches"].map(String::from));
            let rows = report.classes.iter().map(|c| {
                let mut row = vec![c.name.clone(), c.num_gt.to_string(), c.num_pred.to_string()];
                row.extend(c.ap.iter().map(|&x| num(output::round_sig(x))));
                row.extend(
                    [c.mean_ap, c.tp_errors.ate, c.tp_errors.ase, c.tp_errors.aoe].map(|x| num(output::round_sig(x))),
                );
                row.push(c.tp_matches.to_string());
                row
            });
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            write_bytes(a.out.as_deref(), &csv_bytes(&header, rows)?)?;
        }
        _ => write_bytes(a.out.as_deref(), report_json(&report)?.as_bytes())?,
    }
    eprint!("{}", eval_table(&report));
    Ok(())
}

#[derive(Serialize)]
struct AssignFrame {
    frame_id: String,
    boxes: usize,
    assigned_boxes: usize,
    skipped_boxes: usize,
    foreground_cells: usize,
    max_center_residual: f64,
    max_size_residual: f64,
    max_yaw_residual: f64,
}

#[derive(Serialize)]
struct AssignReport {
    grid: BevGridSpec,
    doubled_classes: Vec<u16>,
    frames: Vec<AssignFrame>,
}

fn cmd_assign(a: &AssignArgs) -> Result<()> {
    use rayon::prelude::*;
    let grid = a.grid.spec()?;
    let (_, scenes) = load_scenes(&a.input)?;
    let frames = scenes
        .par_iter()
        .map(|s| {
            let map = assign_targets(s, &grid, &a.double_classes)?;
            let mut f = AssignFrame {
                frame_id: s.frame_id.clone(),
                boxes: s.boxes.len(),
                assigned_boxes: s.boxes.len() - map.skipped_boxes,
                skipped_boxes: map.skipped_boxes,
                foreground_cells: map.foreground_count(),
                max_center_residual: 0.0,
                max_size_residual: 0.0,
                max_yaw_residual: 0.0,
            };
            for (i, cell) in map.cells.iter().enumerate() {
                let Some(cell) = cell else { continue };
                let owner = map.assigned_boxes[cell.box_index];
                let d = decode(&cell.targets_at(map.cell_center(i)))?;
                f.max_center_residual = f.max_center_residual.max(owner.center_bev().distance(d.center_bev()));
                f.max_size_residual = f.max_size_residual.max((owner.w - d.w).abs()).max((owner.l - d.l).abs());
                f.max_yaw_residual = f.max_yaw_residual.max(wrap_angle(owner.theta - d.theta).abs());
            }
            Ok(f)
        })
        .collect::<Result<Vec<_>>>()?;
    let fg: usize = frames.iter().map(|f| f.foreground_cells).sum();
    let report = AssignReport { grid, doubled_classes: a.double_classes.clone(), frames };
    write_bytes(a.out.as_deref(), report_json(&report)?.as_bytes())?;
    eprintln!("{fg} foreground cells over {} frames", report.frames.len());
    Ok(())
}

fn cmd_render(a: &RenderArgs) -> Result<()> {
    require_format(a.format, &[Format::Svg], "render")?;
    if !(a.px_per_m > 0.0 && a.px_per_m.is_finite()) {
        return Err(invalid("--px-per-m must be positive"));
    }
    let grid = a.grid.spec()?;
    let (classes, scenes) = load_scenes(&a.input)?;
    let frame = match &a.frame {
        Some(id) => Some(
            scenes
                .iter()
                .find(|s| &s.frame_id == id)
                .ok_or_else(|| invalid(format!("no frame `{id}` in scene file")))?,
        ),
        None => scenes.first(),
    };
    let name = |c: u16| classes.get(c as usize).map_or("unknown", String::as_str);
    let mut layers = vec![Layer {
        role: "gt",
        stroke: "#1a7f37",
        dash: None,
        boxes: frame.map_or_else(Vec::new, |f| f.boxes.iter().map(|b| (b.bbox, name(b.class_id))).collect()),
    }];
    if let Some(p) = &a.preds {
        let (_, preds) = load_predictions(p)?;
        let dets = frame
            .and_then(|f| preds.iter().find(|p| p.frame_id == f.frame_id))
            .map_or_else(Vec::new, |p| p.detections.iter().map(|d| (d.bbox, name(d.class_id))).collect());
        layers.push(Layer { role: "pred", stroke: "#cf222e", dash: Some("4 2"), boxes: dets });
    }
    let svg = render_svg(&grid, a.px_per_m, &layers)?;
    write_bytes(a.out.as_deref(), svg.as_bytes())?;
    Ok(())
}

fn exit_code(category: &str) -> u8 {
    match category {
        "validation" => 3,
        "domain" => 4,
        "schema" => 5,
        "io" => 6,
        _ => 1,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(invalid("RQR3D_THREADS / --threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| invalid(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Convert(a) => cmd_convert(a),
        Command::Continuity(a) => cmd_continuity(a),
        Command::Nms(a) => cmd_nms(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Assign(a) => cmd_assign(a),
        Command::Render(a) => cmd_render(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(exit_code(e.category()))
        }
    }
}
