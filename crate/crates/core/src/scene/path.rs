//! Corridor centerline: a chain of straight and circular pieces joined with
//! tangent continuity. Lateral offsets are positive to the left.

use std::f64::consts::PI;

pub(crate) type P2 = [f64; 2];

fn add(a: P2, b: P2) -> P2 {
    [a[0] + b[0], a[1] + b[1]]
}

fn sub(a: P2, b: P2) -> P2 {
    [a[0] - b[0], a[1] - b[1]]
}

fn mul(a: P2, k: f64) -> P2 {
    [a[0] * k, a[1] * k]
}

pub(crate) fn dot(a: P2, b: P2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn cross(a: P2, b: P2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn unit(angle: f64) -> P2 {
    [angle.cos(), angle.sin()]
}

fn left_of(heading: f64) -> P2 {
    unit(heading + PI / 2.0)
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Piece {
    pub start: P2,
    pub heading: f64,
    /// Arclength at the piece start.
    pub s0: f64,
    pub length: f64,
    /// Signed curvature (left turns positive); zero for straights.
    pub curvature: f64,
}

/// Closest centerline point of a query.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Projection {
    pub s: f64,
    pub lateral: f64,
    pub dist: f64,
}

/// Wall intersection along a horizontal ray.
#[derive(Clone, Copy, Debug)]
pub(crate) struct WallHit {
    pub range: f64,
    pub s: f64,
    /// +1 left wall, −1 right wall.
    pub side: f64,
    /// |sin| of the angle between the ray and the wall.
    pub incidence: f64,
}

impl Piece {
    fn end(&self) -> (P2, f64) {
        (self.point(self.s0 + self.length), self.heading + self.curvature * self.length)
    }

    fn center(&self) -> P2 {
        add(self.start, mul(left_of(self.heading), 1.0 / self.curvature))
    }

    /// Centerline point at arclength `s` (extrapolates past the ends).
    pub fn point(&self, s: f64) -> P2 {
        let t = s - self.s0;
        if self.curvature == 0.0 {
            return add(self.start, mul(unit(self.heading), t));
        }
        let r = 1.0 / self.curvature;
        let c = self.center();
        let phi = self.heading - PI / 2.0 + self.curvature * t;
        add(c, mul(unit(phi), r))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.heading + self.curvature * (s - self.s0)
    }

    fn project(&self, q: P2) -> Projection {
        if self.curvature == 0.0 {
            let d = unit(self.heading);
            let rel = sub(q, self.start);
            let t = dot(rel, d).clamp(0.0, self.length);
            let foot = add(self.start, mul(d, t));
            let off = sub(q, foot);
            return Projection { s: self.s0 + t, lateral: cross(d, off), dist: off[0].hypot(off[1]) };
        }
        let r = 1.0 / self.curvature;
        let c = self.center();
        let rel = sub(q, c);
        let phi0 = self.heading - PI / 2.0;
        let ang = wrap(rel[1].atan2(rel[0]) - phi0);
        let t = (ang * r).clamp(0.0, self.length);
        let foot = self.point(self.s0 + t);
        let radial = rel[0].hypot(rel[1]);
        let lateral = r - radial;
        let off = sub(q, foot);
        Projection { s: self.s0 + t, lateral, dist: off[0].hypot(off[1]) }
    }

    /// Nearest intersection of the ray o + λ·dir (λ > 0) with either wall of
    /// this piece, walls sitting at ±half_width.
    fn wall_hit(&self, o: P2, dir: P2, half_width: f64) -> Option<WallHit> {
        let mut best: Option<WallHit> = None;
        let mut consider = |h: WallHit| {
            if h.range > 1e-9 && best.is_none_or(|b| h.range < b.range) {
                best = Some(h);
            }
        };
        for side in [1.0, -1.0] {
            if self.curvature == 0.0 {
                let d = unit(self.heading);
                let a = add(self.start, mul(left_of(self.heading), side * half_width));
                let denom = cross(dir, d);
                if denom.abs() < 1e-12 {
                    continue;
                }
                let rel = sub(a, o);
                let lambda = cross(rel, d) / denom;
                let t = cross(rel, dir) / denom;
                if (0.0..=self.length).contains(&t) {
                    consider(WallHit { range: lambda, s: self.s0 + t, side, incidence: denom.abs() });
                }
            } else {
                let r = 1.0 / self.curvature;
                let radius = r - side * half_width;
                let c = self.center();
                let m = sub(o, c);
                let b = dot(m, dir);
                let disc = b * b - (dot(m, m) - radius * radius);
                if disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                for lambda in [-b - sq, -b + sq] {
                    let p = add(o, mul(dir, lambda));
                    let rel = sub(p, c);
                    let phi0 = self.heading - PI / 2.0;
                    let ang = wrap(rel[1].atan2(rel[0]) - phi0);
                    let t = ang * r;
                    if (0.0..=self.length).contains(&t) {
                        let tangent = [-rel[1] / radius, rel[0] / radius];
                        consider(WallHit {
                            range: lambda,
                            s: self.s0 + t,
                            side,
                            incidence: cross(dir, tangent).abs(),
                        });
                    }
                }
            }
        }
        best
    }
}

/// Piece kinds in schedule order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Bend {
    Straight,
    Left,
}

#[derive(Clone, Debug)]
pub(crate) struct Path {
    pub pieces: Vec<Piece>,
}

impl Path {
    /// Chains pieces of the given lengths, starting at the origin heading +x.
    /// A lead-in straight is prepended so that s < 0 is well defined.
    pub fn build(layout: &[(Bend, f64)], curvature: f64, lead_in: f64) -> Self {
        let mut pieces = vec![Piece {
            start: [-lead_in, 0.0],
            heading: 0.0,
            s0: -lead_in,
            length: lead_in,
            curvature: 0.0,
        }];
        for &(bend, length) in layout {
            let prev = *pieces.last().expect("lead-in present");
            let (start, heading) = prev.end();
            pieces.push(Piece {
                start,
                heading,
                s0: prev.s0 + prev.length,
                length,
                curvature: if bend == Bend::Left { curvature } else { 0.0 },
            });
        }
        Self { pieces }
    }

    /// Index of the piece containing arclength `s` (end pieces extrapolate).
    pub fn locate(&self, s: f64) -> usize {
        self.pieces
            .iter()
            .rposition(|p| p.s0 <= s)
            .unwrap_or(0)
    }

    pub fn point(&self, s: f64) -> P2 {
        self.pieces[self.locate(s)].point(s)
    }

    pub fn heading(&self, s: f64) -> f64 {
        self.pieces[self.locate(s)].heading_at(s)
    }

    pub fn left(&self, s: f64) -> P2 {
        left_of(self.heading(s))
    }

    /// Pieces near arclength `s` that can be seen from there.
    pub fn window(&self, s: f64, behind: usize, ahead: usize) -> &[Piece] {
        let i = self.locate(s);
        let lo = i.saturating_sub(behind);
        let hi = (i + ahead + 1).min(self.pieces.len());
        &self.pieces[lo..hi]
    }

    pub fn project(pieces: &[Piece], q: P2) -> Projection {
        pieces
            .iter()
            .map(|p| p.project(q))
            .min_by(|a, b| a.dist.total_cmp(&b.dist))
            .expect("window is never empty")
    }

    pub fn wall_hit(pieces: &[Piece], o: P2, dir: P2, half_width: f64) -> Option<WallHit> {
        pieces
            .iter()
            .filter_map(|p| p.wall_hit(o, dir, half_width))
            .min_by(|a, b| a.range.total_cmp(&b.range))
    }
}
