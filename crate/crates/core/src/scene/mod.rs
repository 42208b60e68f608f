//! Deterministic corridor-patrol scenes with exact optical flow.
//!
//! The vehicle drives a corridor of alternating straight and left-curving
//! segments at constant speed. Scenario 2 drives the same corridor, with an
//! episode inside one straight segment in which a static pedestrian comes
//! into sight and the vehicle swerves around it.

mod path;
mod render;

pub use render::{Pedestrian, Pose, World, WorldState};

use path::{Bend, Path};
use render::{WallTexture, CAMERA_HEIGHT};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};
use crate::gan::CoupleSet;
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

/// Forward travel per frame, world units.
pub const SPEED: f64 = 0.10;
/// Yaw rate on curves, radians per frame.
pub const YAW_RATE: f64 = 0.045;
/// Flow normalisation constant: network inputs are flow / MAX_SPEED.
pub const MAX_SPEED: f64 = 4.0;
/// Lateral swerve amplitude during the avoidance manoeuvre.
pub const SWERVE: f64 = 0.5;
/// Fraction of the swerve slope turned into heading change.
const SWERVE_YAW_GAIN: f64 = 0.15;
/// Pedestrian stands this far right of the centerline.
const PEDESTRIAN_OFFSET: f64 = 0.4;
const PEDESTRIAN_HEIGHT: f64 = 1.7;
const PEDESTRIAN_HALF_WIDTH: f64 = 0.22;
/// First sight happens at this fraction of the episode's travel distance.
const SIGHT_FRACTION: f64 = 0.75;
const TEXTURE_STREAM: u64 = 0x7465_7874;
const NOISE_STREAM: u64 = 0x6e6f_6973;

/// Per-frame activity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActivityLabel {
    Straight,
    Curve,
    AbnormalPedestrian,
}

impl ActivityLabel {
    pub const ALL: [ActivityLabel; 3] = [Self::Straight, Self::Curve, Self::AbnormalPedestrian];

    pub fn is_anomalous(self) -> bool {
        self == Self::AbnormalPedestrian
    }

    pub fn code(self) -> u8 {
        match self {
            Self::Straight => 0,
            Self::Curve => 1,
            Self::AbnormalPedestrian => 2,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Straight => "straight",
            Self::Curve => "curve",
            Self::AbnormalPedestrian => "pedestrian",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|l| l.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// 1 = normal patrol, 2 = patrol with a pedestrian episode.
    pub scenario: u8,
    pub frames_per_segment: usize,
    pub laps: usize,
    pub height: usize,
    pub width: usize,
    /// Index among straight segments that hosts the pedestrian (scenario 2).
    pub pedestrian_segment: usize,
    pub episode_frames: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: 1,
            frames_per_segment: 32,
            laps: 1,
            height: 64,
            width: 64,
            pedestrian_segment: 1,
            episode_frames: 24,
            noise_sigma: 0.02,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !matches!(self.scenario, 1 | 2) {
            return bad(format!("scenario must be 1 or 2, got {}", self.scenario));
        }
        if self.height == 0 || self.width == 0 || !self.height.is_multiple_of(8) || !self.width.is_multiple_of(8) {
            return bad(format!("image size {}×{} must be positive multiples of 8", self.height, self.width));
        }
        if self.frames_per_segment < 8 {
            return bad(format!("frames_per_segment must be ≥ 8, got {}", self.frames_per_segment));
        }
        if self.laps == 0 {
            return bad("laps must be ≥ 1".into());
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad(format!("noise_sigma must be finite and ≥ 0, got {}", self.noise_sigma));
        }
        if self.scenario == 2 {
            let straights = 4 * self.laps;
            if self.pedestrian_segment >= straights {
                return Err(Error::Range {
                    op: "synthesize_scenario",
                    detail: format!(
                        "pedestrian_segment {} out of range: {} straight segments",
                        self.pedestrian_segment, straights
                    ),
                });
            }
            if self.episode_frames < 2 || self.episode_frames + 2 > self.frames_per_segment {
                return bad(format!(
                    "episode_frames must be in [2, frames_per_segment − 2], got {} with {} frames per segment",
                    self.episode_frames, self.frames_per_segment
                ));
            }
        }
        Ok(())
    }
}

/// One time step: frame (H×W in [−1,1]) and flow (planar 2×H×W in pixels).
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMotionCouple {
    pub index: usize,
    pub height: usize,
    pub width: usize,
    pub frame: Vec<f32>,
    pub flow: Vec<f32>,
}

impl FrameMotionCouple {
    pub fn flow_x(&self) -> &[f32] {
        &self.flow[..self.height * self.width]
    }

    pub fn flow_y(&self) -> &[f32] {
        &self.flow[self.height * self.width..]
    }
}

/// Synthesised sequence with its labels and world.
#[derive(Clone, Debug)]
pub struct Sequence {
    pub config: ScenarioConfig,
    pub couples: Vec<FrameMotionCouple>,
    pub labels: Vec<ActivityLabel>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.couples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.couples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FrameMotionCouple, ActivityLabel)> {
        self.couples.iter().zip(self.labels.iter().copied())
    }

    pub fn anomalous(&self) -> Vec<bool> {
        self.labels.iter().map(|l| l.is_anomalous()).collect()
    }

    /// Stacked network inputs; flows scaled by 1 / MAX_SPEED.
    pub fn to_couple_set(&self) -> Result<CoupleSet> {
        couple_set(&self.couples)
    }
}

pub fn couple_set(couples: &[FrameMotionCouple]) -> Result<CoupleSet> {
    let first = couples.first().ok_or_else(|| Error::Empty("no couples to stack".into()))?;
    let (h, w) = (first.height, first.width);
    let mut frames = Vec::with_capacity(couples.len() * h * w);
    let mut flows = Vec::with_capacity(couples.len() * 2 * h * w);
    let scale = (1.0 / MAX_SPEED) as f32;
    for c in couples {
        frames.extend_from_slice(&c.frame);
        flows.extend(c.flow.iter().map(|v| v * scale));
    }
    CoupleSet::new(
        Tensor::new(vec![couples.len(), 1, h, w], frames)?,
        Tensor::new(vec![couples.len(), 2, h, w], flows)?,
    )
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    bend: Bend,
    frames: usize,
    /// (first local frame, length) of a pedestrian episode.
    episode: Option<(usize, usize)>,
}

/// Frame schedule plus the world it plays out in.
#[derive(Clone, Debug)]
pub struct Trajectory {
    world: World,
    segments: Vec<Segment>,
    pedestrian: Option<Pedestrian>,
    frames: usize,
}

impl Trajectory {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let k = cfg.frames_per_segment;
        let mut segments = Vec::new();
        for lap in 0..cfg.laps {
            for q in 0..4 {
                let straight_idx = 4 * lap + q;
                let e = cfg.episode_frames;
                let episode = (cfg.scenario == 2 && straight_idx == cfg.pedestrian_segment).then(|| ((k - e) / 2, e));
                segments.push(Segment { bend: Bend::Straight, frames: k, episode });
                segments.push(Segment { bend: Bend::Left, frames: k, episode: None });
            }
        }
        let frames = segments.iter().map(|s| s.frames).sum();
        let mut layout: Vec<(Bend, f64)> = segments.iter().map(|s| (s.bend, SPEED * s.frames as f64)).collect();
        // lookahead beyond the final frame
        for bend in [Bend::Straight, Bend::Left, Bend::Straight, Bend::Left] {
            layout.push((bend, SPEED * k as f64));
        }
        let path = Path::build(&layout, YAW_RATE / SPEED, 5.0);
        let texture = WallTexture::new(&mut SplitMix64::derive(cfg.seed, TEXTURE_STREAM));
        let world = World::new(path, cfg.height, cfg.width, texture);
        let mut t = Self { world, segments, pedestrian: None, frames };
        if let Some(start) = t.episode_range().map(|r| r.start) {
            let e = cfg.episode_frames as f64;
            let s = SPEED * (start as f64 + SIGHT_FRACTION * e);
            let p = t.world.path.point(s);
            let left = t.world.path.left(s);
            t.pedestrian = Some(Pedestrian {
                center: [p[0] - left[0] * PEDESTRIAN_OFFSET, p[1] - left[1] * PEDESTRIAN_OFFSET],
                across: left,
                half_width: PEDESTRIAN_HALF_WIDTH,
                height: PEDESTRIAN_HEIGHT,
            });
        }
        Ok(t)
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn len(&self) -> usize {
        self.frames
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    /// Frames of the pedestrian episode, if any.
    pub fn episode_range(&self) -> Option<std::ops::Range<usize>> {
        let mut t0 = 0;
        for s in &self.segments {
            if let Some((start, len)) = s.episode {
                return Some(t0 + start..t0 + start + len);
            }
            t0 += s.frames;
        }
        None
    }

    pub fn label(&self, t: usize) -> ActivityLabel {
        if self.episode_range().is_some_and(|r| r.contains(&t)) {
            return ActivityLabel::AbnormalPedestrian;
        }
        let mut t0 = 0;
        for s in &self.segments {
            if t < t0 + s.frames {
                return match s.bend {
                    Bend::Straight => ActivityLabel::Straight,
                    Bend::Left => ActivityLabel::Curve,
                };
            }
            t0 += s.frames;
        }
        ActivityLabel::Straight
    }

    /// Lateral swerve and heading offset at frame t.
    fn swerve(&self, t: usize) -> (f64, f64) {
        let Some(r) = self.episode_range() else { return (0.0, 0.0) };
        if !r.contains(&t) {
            return (0.0, 0.0);
        }
        let e = r.len() as f64;
        let x = std::f64::consts::PI * (t - r.start) as f64 / e;
        let offset = SWERVE * x.sin().powi(2);
        // d(offset)/ds along the centerline
        let slope = SWERVE * (2.0 * x).sin() * std::f64::consts::PI / (e * SPEED);
        (offset, SWERVE_YAW_GAIN * slope.atan())
    }

    /// World state at frame t; t may run one past the final frame.
    pub fn state(&self, t: usize) -> WorldState {
        let s = SPEED * t as f64;
        let path = &self.world.path;
        let (offset, yaw) = self.swerve(t);
        let p = path.point(s);
        let left = path.left(s);
        let visible = self.episode_range().is_some_and(|r| r.contains(&t));
        WorldState {
            pose: Pose {
                position: [p[0] + left[0] * offset, p[1] + left[1] * offset],
                heading: path.heading(s) + yaw,
                s,
            },
            pedestrian: if visible { self.pedestrian } else { None },
        }
    }
}

/// Noise-free rendering of one world state.
pub fn render_frame(world: &World, state: &WorldState) -> Vec<f32> {
    world.render(state)
}

/// Exact flow from `state` to `next`.
pub fn analytic_flow(world: &World, state: &WorldState, next: &WorldState) -> Vec<f32> {
    world.flow(state, next)
}

/// Renders every frame of a scenario.
pub fn synthesize_scenario(cfg: &ScenarioConfig) -> Result<Sequence> {
    let traj = Trajectory::new(cfg)?;
    let world = traj.world();
    let mut noise = SplitMix64::derive(cfg.seed ^ ((cfg.scenario as u64) << 56), NOISE_STREAM);
    let mut couples = Vec::with_capacity(traj.len());
    let mut labels = Vec::with_capacity(traj.len());
    let mut state = traj.state(0);
    for t in 0..traj.len() {
        let next = traj.state(t + 1);
        let mut frame = world.render(&state);
        if cfg.noise_sigma > 0.0 {
            for v in &mut frame {
                *v = (*v as f64 + cfg.noise_sigma * noise.normal()).clamp(-1.0, 1.0) as f32;
            }
        }
        couples.push(FrameMotionCouple {
            index: t,
            height: cfg.height,
            width: cfg.width,
            frame,
            flow: world.flow(&state, &next),
        });
        labels.push(traj.label(t));
        state = next;
    }
    Ok(Sequence { config: cfg.clone(), couples, labels })
}

/// Indices of the couples whose label is in `filter`, in temporal order.
pub fn split_subset(labels: &[ActivityLabel], filter: &[ActivityLabel]) -> Result<Vec<usize>> {
    if labels.is_empty() {
        return Err(Error::Empty("cannot take a subset of an empty sequence".into()));
    }
    let idx: Vec<usize> = (0..labels.len()).filter(|&i| filter.contains(&labels[i])).collect();
    if idx.is_empty() {
        let names: Vec<&str> = filter.iter().map(|l| l.name()).collect();
        return Err(Error::Empty(format!("no frames labelled {} in the sequence", names.join("|"))));
    }
    Ok(idx)
}

/// Camera height above the floor, for tests that reason about geometry.
pub fn camera_height() -> f64 {
    CAMERA_HEIGHT
}
