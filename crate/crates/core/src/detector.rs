//! Test-time routing through the hierarchy and the per-frame abnormality
//! signal.

use crate::error::{Error, Result};
use crate::gan::{CoupleSet, DistanceMap};
use crate::hierarchy::{features, Hierarchy};

/// How a distance map is reduced to Ỹ.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Pooling {
    #[default]
    Mean,
    Max,
}

impl Pooling {
    pub fn apply(self, map: &DistanceMap) -> f64 {
        match self {
            Pooling::Mean => map.mean_score,
            Pooling::Max => map.max_score(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DetectOptions {
    pub pooling: Pooling,
    /// Overrides the hierarchy's final threshold.
    pub tau: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict {
    pub is_abnormal: bool,
    /// Level whose normal cluster claimed the sample, or the last level
    /// when only the final threshold did. None exactly when abnormal.
    pub accepted_level: Option<usize>,
    /// Ỹ at the deepest level reached.
    pub y_tilde: f64,
    /// Ỹ of every level visited, in order.
    pub per_level_scores: Vec<f64>,
}

/// Verdicts for every couple of `x`. Each level only scores the couples
/// that no earlier level accepted.
pub fn route_all(h: &Hierarchy, x: &CoupleSet, opts: DetectOptions) -> Result<Vec<Verdict>> {
    if x.is_empty() {
        return Err(Error::Empty("route: no couples".into()));
    }
    let tau = opts.tau.unwrap_or(h.tau);
    let mut out: Vec<Verdict> = (0..x.len())
        .map(|_| Verdict { is_abnormal: false, accepted_level: None, y_tilde: 0.0, per_level_scores: Vec::new() })
        .collect();
    let mut pending: Vec<usize> = (0..x.len()).collect();
    for level in &h.levels {
        if pending.is_empty() {
            break;
        }
        let (maps, _) = level.scores(&x.select(&pending)?)?;
        let bmus = level.som.assign(&features(&maps))?;
        let mut still = Vec::new();
        for ((&i, map), &b) in pending.iter().zip(&maps).zip(&bmus) {
            let v = &mut out[i];
            v.y_tilde = opts.pooling.apply(map);
            v.per_level_scores.push(v.y_tilde);
            if level.is_normal_cluster(b) {
                v.accepted_level = Some(level.index);
            } else {
                still.push(i);
            }
        }
        pending = still;
    }
    // rejected by every SOM: the last level's threshold decides
    let last = h.levels.len() - 1;
    for &i in &pending {
        if out[i].y_tilde > tau {
            out[i].is_abnormal = true;
        } else {
            out[i].accepted_level = Some(last);
        }
    }
    Ok(out)
}

/// Verdict for a single couple.
pub fn route(h: &Hierarchy, x: &CoupleSet, opts: DetectOptions) -> Result<Verdict> {
    if x.len() != 1 {
        return Err(Error::shape("route", format!("expected one couple, got {}", x.len())));
    }
    Ok(route_all(h, x, opts)?.remove(0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AbnormalitySignal {
    pub frames: Vec<usize>,
    pub raw: Vec<f64>,
    pub normalized: Vec<f64>,
    pub verdicts: Vec<Verdict>,
}

/// Min-max normalisation; a constant input maps to all zeros.
pub fn normalize(raw: &[f64]) -> Vec<f64> {
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; raw.len()];
    }
    raw.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn abnormality_signal(h: &Hierarchy, x: &CoupleSet, opts: DetectOptions) -> Result<AbnormalitySignal> {
    let verdicts = route_all(h, x, opts)?;
    let raw: Vec<f64> = verdicts.iter().map(|v| v.y_tilde).collect();
    Ok(AbnormalitySignal { frames: (0..x.len()).collect(), normalized: normalize(&raw), raw, verdicts })
}

impl AbnormalitySignal {
    pub const CSV_HEADER: &'static str = "frame_index,raw_y,normalized_y,accepted_level,verdict";

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// One row per frame; raw values keep full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for (k, v) in self.verdicts.iter().enumerate() {
            let level = v.accepted_level.map_or(-1, |l| l as i64);
            let verdict = if v.is_abnormal { "abnormal" } else { "normal" };
            s += &format!("{},{:?},{:?},{},{}\n", self.frames[k], self.raw[k], self.normalized[k], level, verdict);
        }
        s
    }

    /// Reads back what `to_csv` wrote. Per-level scores are not stored.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::CSV_HEADER) {
            return Err(Error::Config(format!("signal CSV must start with `{}`", Self::CSV_HEADER)));
        }
        let mut out = Self { frames: Vec::new(), raw: Vec::new(), normalized: Vec::new(), verdicts: Vec::new() };
        for (k, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |what: &str| Error::Config(format!("signal CSV line {}: bad {what}: {line:?}", k + 2));
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 5 {
                return Err(bad("field count"));
            }
            let frame: usize = f[0].parse().map_err(|_| bad("frame_index"))?;
            let raw: f64 = f[1].parse().map_err(|_| bad("raw_y"))?;
            let norm: f64 = f[2].parse().map_err(|_| bad("normalized_y"))?;
            let level: i64 = f[3].parse().map_err(|_| bad("accepted_level"))?;
            let is_abnormal = match f[4] {
                "abnormal" => true,
                "normal" => false,
                _ => return Err(bad("verdict")),
            };
            if is_abnormal != (level < 0) {
                return Err(bad("verdict/accepted_level pair"));
            }
            out.frames.push(frame);
            out.raw.push(raw);
            out.normalized.push(norm);
            out.verdicts.push(Verdict {
                is_abnormal,
                accepted_level: (level >= 0).then_some(level as usize),
                y_tilde: raw,
                per_level_scores: Vec::new(),
            });
        }
        if out.is_empty() {
            return Err(Error::Empty("signal CSV has no rows".into()));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_signal_normalizes_to_zero() {
        assert_eq!(normalize(&[0.3, 0.3, 0.3]), vec![0.0; 3]);
        assert_eq!(normalize(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
    }

    #[test]
    fn csv_reads_back() {
        let v = |a: bool, l: Option<usize>, y: f64| Verdict { is_abnormal: a, accepted_level: l, y_tilde: y, per_level_scores: vec![] };
        let raw = vec![0.1 + 0.2, 7.0, 1e-17];
        let sig = AbnormalitySignal {
            frames: vec![0, 1, 2],
            normalized: normalize(&raw),
            verdicts: vec![v(false, Some(0), raw[0]), v(true, None, raw[1]), v(false, Some(1), raw[2])],
            raw,
        };
        let back = AbnormalitySignal::from_csv(&sig.to_csv()).unwrap();
        assert_eq!(back, sig);
        assert!(AbnormalitySignal::from_csv("frame_index\n").is_err());
        let broken = sig.to_csv().replace(",-1,abnormal", ",0,abnormal");
        assert!(AbnormalitySignal::from_csv(&broken).is_err());
    }
}
