//! Cylindrical first-person camera over the corridor world.
//!
//! Column u maps to azimuth α = (u − cx)/f and row v to the slope
//! (v − cy)/f = −z/ρ, where ρ is horizontal range and z height relative to
//! the camera. A yaw change therefore shifts every pixel horizontally by
//! exactly f·Δψ, and apparent heights scale with 1/ρ.

use std::f64::consts::PI;

use super::path::{cross, dot, unit, Path, Piece, P2};
use crate::rng::SplitMix64;

pub(crate) const CAMERA_HEIGHT: f64 = 1.0;
pub(crate) const HALF_WIDTH: f64 = 1.5;
const WALL_HEIGHT: f64 = 2.2;
const FOG_RANGE: f64 = 7.0;
const FOG: f64 = 0.0;
const HOOD: f64 = -0.8;
const FLOOR: f64 = -0.45;
const LANE_OFFSET: f64 = HALF_WIDTH - 0.25;
const LANE_SIGMA: f64 = 0.04;
const DASH_SIGMA: f64 = 0.03;
const DASH_PERIOD: f64 = 0.8;
const PEDESTRIAN: f64 = 0.95;
/// Sub-samples per pixel along each axis.
const SUPERSAMPLE: usize = 2;
const PIECES_BEHIND: usize = 2;
const PIECES_AHEAD: usize = 6;

/// Vehicle pose on the ground plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub position: [f64; 2],
    pub heading: f64,
    /// Centerline arclength the pose is attached to.
    pub s: f64,
}

/// Static upright billboard standing on the floor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pedestrian {
    pub center: [f64; 2],
    /// Unit vector along the billboard's width.
    pub across: [f64; 2],
    pub half_width: f64,
    pub height: f64,
}

impl Pedestrian {
    /// Range along a horizontal ray, if the ray crosses the billboard.
    fn hit(&self, o: P2, dir: P2) -> Option<f64> {
        let denom = cross(dir, self.across);
        if denom.abs() < 1e-12 {
            return None;
        }
        let a = [self.center[0] - o[0], self.center[1] - o[1]];
        let lambda = cross(a, self.across) / denom;
        let t = cross(a, dir) / denom;
        (lambda > 1e-9 && t.abs() <= self.half_width).then_some(lambda)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldState {
    pub pose: Pose,
    pub pedestrian: Option<Pedestrian>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Camera {
    pub width: usize,
    pub height: usize,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    /// First row covered by the vehicle hood.
    pub hood_row: usize,
}

impl Camera {
    pub fn new(height: usize, width: usize) -> Self {
        Self {
            width,
            height,
            f: width as f64 / (PI / 2.0),
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            hood_row: height - height / 8,
        }
    }

    /// Image position of a world point (horizontal position, height above
    /// the floor) seen from `pose`; None when behind the camera plane.
    pub fn project(&self, pose: &Pose, p: P2, z_floor: f64) -> Option<(f64, f64)> {
        let d = [p[0] - pose.position[0], p[1] - pose.position[1]];
        let fwd = unit(pose.heading);
        let forward = dot(fwd, d);
        let left = cross(fwd, d);
        let rho = forward.hypot(left);
        if rho < 1e-9 {
            return None;
        }
        let alpha = (-left).atan2(forward);
        Some((self.cx + self.f * alpha, self.cy - self.f * (z_floor - CAMERA_HEIGHT) / rho))
    }
}

/// Seeded stripe texture: a few sinusoids along arclength plus horizontal bands.
#[derive(Clone, Debug)]
pub(crate) struct WallTexture {
    /// (amplitude, wavelength, phase) per side, left then right.
    stripes: [Vec<(f64, f64, f64)>; 2],
    bands: [(f64, f64, f64); 2],
}

impl WallTexture {
    pub fn new(rng: &mut SplitMix64) -> Self {
        let mut side = || {
            let stripes = [0.05, 0.03, 0.02]
                .iter()
                .map(|&a| (a, rng.uniform(0.4, 1.6), rng.uniform(0.0, 2.0 * PI)))
                .collect::<Vec<_>>();
            let bands = (0.015, rng.uniform(0.5, 0.9), rng.uniform(0.0, 2.0 * PI));
            (stripes, bands)
        };
        let (l, lb) = side();
        let (r, rb) = side();
        Self { stripes: [l, r], bands: [lb, rb] }
    }

    /// Brightness with each sinusoid Gaussian-prefiltered to the pixel footprint.
    fn shade(&self, side: f64, s: f64, z: f64, footprint_s: f64, footprint_z: f64) -> f64 {
        let k = if side > 0.0 { 0 } else { 1 };
        let mut c = 0.15;
        for &(a, lambda, phase) in &self.stripes[k] {
            c += a * prefilter(footprint_s, lambda) * (2.0 * PI * s / lambda + phase).sin();
        }
        let (a, lambda, phase) = self.bands[k];
        c + a * prefilter(footprint_z, lambda) * (2.0 * PI * z / lambda + phase).sin()
    }
}

/// Gain of a sinusoid of wavelength `lambda` after Gaussian smoothing over a
/// pixel footprint.
fn prefilter(footprint: f64, lambda: f64) -> f64 {
    let sigma = 0.4 * footprint;
    (-2.0 * PI * PI * sigma * sigma / (lambda * lambda)).exp()
}

fn fogged(c: f64, range: f64) -> f64 {
    let k = (-range / FOG_RANGE).exp();
    c * k + FOG * (1.0 - k)
}

enum Surface {
    Hood,
    Sky,
    Floor { point: P2, range: f64 },
    Wall { point: P2, range: f64, z: f64, s: f64, side: f64, incidence: f64 },
    Pedestrian { point: P2, range: f64, z: f64 },
}

/// Everything static about the world: corridor, textures, camera.
#[derive(Clone, Debug)]
pub struct World {
    pub(crate) path: Path,
    pub(crate) camera: Camera,
    pub(crate) texture: WallTexture,
}

impl World {
    pub(crate) fn new(path: Path, height: usize, width: usize, texture: WallTexture) -> Self {
        Self { path, camera: Camera::new(height, width), texture }
    }

    /// A straight corridor of the given length starting at the origin,
    /// heading along +x.
    pub fn straight_corridor(height: usize, width: usize, length: f64, seed: u64) -> Self {
        let path = Path::build(&[(super::path::Bend::Straight, length)], 1.0, 5.0);
        let texture = WallTexture::new(&mut SplitMix64::derive(seed, super::TEXTURE_STREAM));
        Self::new(path, height, width, texture)
    }

    pub fn height(&self) -> usize {
        self.camera.height
    }

    pub fn width(&self) -> usize {
        self.camera.width
    }

    /// First image row covered by the vehicle hood (rigid with the camera).
    pub fn hood_row(&self) -> usize {
        self.camera.hood_row
    }

    /// Focal constant in pixels per radian.
    pub fn focal(&self) -> f64 {
        self.camera.f
    }

    fn window(&self, pose: &Pose) -> &[Piece] {
        self.path.window(pose.s, PIECES_BEHIND, PIECES_AHEAD)
    }

    /// First surface along the ray through image point (u, v).
    fn trace(&self, state: &WorldState, pieces: &[Piece], u: f64, v: f64) -> Surface {
        let cam = &self.camera;
        if v >= cam.hood_row as f64 {
            return Surface::Hood;
        }
        let pose = &state.pose;
        let dir = unit(pose.heading - (u - cam.cx) / cam.f);
        let slope = (v - cam.cy) / cam.f;
        let o = pose.position;
        let at = |range: f64| [o[0] + dir[0] * range, o[1] + dir[1] * range];
        let wall = Path::wall_hit(pieces, o, dir, HALF_WIDTH);
        let wall_range = wall.map_or(f64::INFINITY, |w| w.range);
        if let Some(p) = state.pedestrian {
            if let Some(range) = p.hit(o, dir).filter(|&r| r < wall_range) {
                let z = CAMERA_HEIGHT - slope * range;
                if (0.0..=p.height).contains(&z) {
                    return Surface::Pedestrian { point: at(range), range, z };
                }
            }
        }
        if slope > 0.0 {
            let range = CAMERA_HEIGHT / slope;
            if range < wall_range {
                return Surface::Floor { point: at(range), range };
            }
        }
        match wall {
            Some(w) => {
                let z = CAMERA_HEIGHT - slope * w.range;
                if z <= WALL_HEIGHT {
                    Surface::Wall { point: at(w.range), range: w.range, z, s: w.s, side: w.side, incidence: w.incidence }
                } else {
                    Surface::Sky
                }
            }
            None => Surface::Sky,
        }
    }

    fn shade(&self, pieces: &[Piece], surface: &Surface, v: f64) -> f64 {
        let f = self.camera.f;
        match *surface {
            Surface::Hood => HOOD,
            Surface::Sky => {
                let elevation = (self.camera.cy - v) / f;
                0.3 + 0.4 * elevation.max(0.0)
            }
            Surface::Pedestrian { range, .. } => fogged(PEDESTRIAN, range),
            Surface::Wall { range, z, s, side, incidence, .. } => {
                let fs = range / (f * incidence.max(0.05));
                let c = self.texture.shade(side, s, z, fs, range / f);
                fogged(c, range)
            }
            Surface::Floor { point, range } => {
                let proj = Path::project(pieces, point);
                let fp_lat = range / f;
                let fp_s = range * range / (f * CAMERA_HEIGHT);
                let line = |offset: f64, sigma: f64| {
                    let wide = sigma.hypot(0.4 * fp_lat);
                    (sigma / wide) * (-0.5 * ((proj.lateral - offset) / wide).powi(2)).exp()
                };
                let lanes = line(LANE_OFFSET, LANE_SIGMA) + line(-LANE_OFFSET, LANE_SIGMA);
                let dash = 0.5 + 0.5 * prefilter(fp_s, DASH_PERIOD) * (2.0 * PI * proj.s / DASH_PERIOD).cos();
                let c = FLOOR + 0.8 * lanes + 0.6 * dash * line(0.0, DASH_SIGMA);
                fogged(c, range)
            }
        }
    }

    /// Noise-free grayscale frame in [−1, 1], row-major H×W.
    pub fn render(&self, state: &WorldState) -> Vec<f32> {
        let (h, w) = (self.camera.height, self.camera.width);
        let pieces = self.window(&state.pose);
        let n = SUPERSAMPLE as f64;
        let mut out = Vec::with_capacity(h * w);
        for row in 0..h {
            for col in 0..w {
                let mut acc = 0.0;
                for sy in 0..SUPERSAMPLE {
                    for sx in 0..SUPERSAMPLE {
                        let u = col as f64 + (sx as f64 + 0.5) / n;
                        let v = row as f64 + (sy as f64 + 0.5) / n;
                        let surface = self.trace(state, pieces, u, v);
                        acc += self.shade(pieces, &surface, v);
                    }
                }
                out.push((acc / (n * n)).clamp(-1.0, 1.0) as f32);
            }
        }
        out
    }

    /// Exact motion of the surface seen at each pixel centre from `state`
    /// to `next`: planar 2×H×W, dx then dy, in pixels.
    pub fn flow(&self, state: &WorldState, next: &WorldState) -> Vec<f32> {
        let (h, w) = (self.camera.height, self.camera.width);
        let pieces = self.window(&state.pose);
        let mut out = vec![0.0f32; 2 * h * w];
        let dyaw = next.pose.heading - state.pose.heading;
        for row in 0..h {
            for col in 0..w {
                let (u, v) = (col as f64 + 0.5, row as f64 + 0.5);
                let moved = match self.trace(state, pieces, u, v) {
                    Surface::Hood => Some((u, v)),
                    Surface::Sky => Some((u + self.camera.f * dyaw, v)),
                    Surface::Floor { point, .. } => self.camera.project(&next.pose, point, 0.0),
                    Surface::Wall { point, z, .. } | Surface::Pedestrian { point, z, .. } => {
                        self.camera.project(&next.pose, point, z)
                    }
                };
                let (du, dv) = moved.map_or((0.0, 0.0), |(u2, v2)| (u2 - u, v2 - v));
                out[row * w + col] = du as f32;
                out[h * w + row * w + col] = dv as f32;
            }
        }
        out
    }
}
