//! `key = value` settings files. Blank lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::Fail;

pub const KEYS: &[&str] = &[
    "seed",
    "scenario",
    "laps",
    "frames_per_segment",
    "height",
    "width",
    "pedestrian_segment",
    "episode_frames",
    "noise_sigma",
    "epochs",
    "batch_size",
    "lr",
    "beta1",
    "beta2",
    "lambda_l1",
    "som_rows",
    "som_cols",
    "som_epochs",
    "som_alpha0",
    "som_sigma0",
    "theta",
    "max_levels",
    "min_cluster_frac",
    "pooling",
    "tau",
];

#[derive(Clone, Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &str) -> Result<Self, Fail> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Fail::Usage(format!("{origin}:{}: expected `key = value`, got {line:?}", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Fail::Usage(format!("{origin}:{}: unknown key `{k}` (known: {})", n + 1, KEYS.join(", "))));
            }
            values.insert(k.to_string(), v.to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, Fail> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Fail::Usage(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text, &p.display().to_string())
            }
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// `flag` if given, else the file's value, else `default`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>, default: T) -> Result<T, Fail> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.raw(key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| Fail::Usage(format!("config key `{key}`: cannot parse {s:?}"))),
        }
    }

    pub fn opt<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>, Fail> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.raw(key)
            .map(|s| s.parse().map_err(|_| Fail::Usage(format!("config key `{key}`: cannot parse {s:?}"))))
            .transpose()
    }
}
