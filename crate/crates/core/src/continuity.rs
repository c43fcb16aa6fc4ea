//! Heading sweeps comparing RQR3D targets with angle-based regression targets.
//!
//! The sweep visits `θ_k = wrap(θ_0 + kΔθ)` for `k = 0..=ceil(2π/Δθ)` where
//! `θ_0` is the template heading, so every sweep crosses the ±π branch cut
//! exactly once and closes the full turn.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::codec::encode;
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, OrientedBox3D};

pub const RQR3D_CHANNELS: [&str; 8] = ["x_min", "y_min", "x_max", "y_max", "u", "v", "d_x", "d_y"];
pub const RAW_ANGLE_CHANNELS: [&str; 5] = ["x_ctr", "y_ctr", "w", "l", "theta"];
pub const TRIG_ANGLE_CHANNELS: [&str; 6] = ["x_ctr", "y_ctr", "w", "l", "sin_theta", "cos_theta"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelJump {
    pub channel: String,
    pub max_jump: f64,
    /// Heading of the later sample of the worst step; `None` for a constant channel.
    pub theta_at_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuityReport {
    pub delta_theta: f64,
    pub samples: usize,
    /// `2(w + l)Δθ`, the Lipschitz bound for the continuous RQR3D channels.
    pub bound: f64,
    pub rqr3d: Vec<ChannelJump>,
    pub amin_u_changes: usize,
    pub amin_v_changes: usize,
    pub raw_angle: Vec<ChannelJump>,
    pub trig_angle: Vec<ChannelJump>,
}

impl ContinuityReport {
    pub fn rqr3d_within_bound(&self) -> bool {
        self.rqr3d.iter().all(|c| c.max_jump <= self.bound)
    }
}

struct Tracker {
    names: &'static [&'static str],
    prev: Option<Vec<f64>>,
    jumps: Vec<(f64, Option<f64>)>,
}

impl Tracker {
    fn new(names: &'static [&'static str]) -> Self {
        Self { names, prev: None, jumps: vec![(0.0, None); names.len()] }
    }

    fn push(&mut self, theta: f64, values: Vec<f64>) {
        if let Some(prev) = &self.prev {
            for (k, (a, b)) in prev.iter().zip(&values).enumerate() {
                let j = (b - a).abs();
                if j > self.jumps[k].0 {
                    self.jumps[k] = (j, Some(theta));
                }
            }
        }
        self.prev = Some(values);
    }

    fn finish(self) -> Vec<ChannelJump> {
        self.names
            .iter()
            .zip(self.jumps)
            .map(|(n, (max_jump, theta_at_max))| ChannelJump { channel: n.to_string(), max_jump, theta_at_max })
            .collect()
    }
}

pub fn sweep_headings(theta0: f64, delta_theta: f64) -> impl Iterator<Item = f64> {
    let steps = (TAU / delta_theta).ceil() as usize;
    (0..=steps).map(move |k| wrap_angle(theta0 + k as f64 * delta_theta))
}

pub fn continuity_scan(template: &OrientedBox3D, delta_theta: f64) -> Result<ContinuityReport> {
    if !(delta_theta > 0.0 && delta_theta.is_finite()) {
        return Err(Error::InvalidParams(format!("delta_theta must be positive, got {delta_theta}")));
    }
    template.validate()?;
    let mut rq = Tracker::new(&RQR3D_CHANNELS);
    let mut raw = Tracker::new(&RAW_ANGLE_CHANNELS);
    let mut trig = Tracker::new(&TRIG_ANGLE_CHANNELS);
    let (mut amin_prev, mut changes, mut samples): (Option<[f64; 2]>, [usize; 2], usize) = (None, [0; 2], 0);
    for theta in sweep_headings(template.theta, delta_theta) {
        let b = template.with_theta(theta);
        let t = encode(&b)?;
        let a = t.aabb;
        rq.push(theta, vec![a.x_min, a.y_min, a.x_max, a.y_max, t.u, t.v, t.d_x, t.d_y]);
        raw.push(theta, vec![b.x_ctr, b.y_ctr, b.w, b.l, b.theta]);
        trig.push(theta, vec![b.x_ctr, b.y_ctr, b.w, b.l, b.theta.sin(), b.theta.cos()]);
        let amin = [t.amin_u, t.amin_v];
        if let Some(p) = amin_prev {
            for k in 0..2 {
                changes[k] += usize::from(amin[k] != p[k]);
            }
        }
        amin_prev = Some(amin);
        samples += 1;
    }
    Ok(ContinuityReport {
        delta_theta,
        samples,
        bound: 2.0 * (template.w + template.l) * delta_theta,
        rqr3d: rq.finish(),
        amin_u_changes: changes[0],
        amin_v_changes: changes[1],
        raw_angle: raw.finish(),
        trig_angle: trig.finish(),
    })
}
