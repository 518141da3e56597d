//! Benchmark selectors: uniform random subsets, farthest-point "even"
//! coverage and fixed manual configurations.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rotation_angle, Pose3};
use crate::objective::SelectionVector;
use crate::rng::{stream_rng, STREAM_RANDOM_BASELINE};
use crate::scenario::{camera_rotation_for_yaw, CandidateMount, FrameSpec};

fn check_budget(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::invalid(format!("budget {k} outside 1..={n}")));
    }
    Ok(())
}

/// Uniform `k`-subset of `0..n` without replacement.
pub fn random_select(n: usize, k: usize, seed: u64) -> Result<SelectionVector> {
    check_budget(n, k)?;
    let mut rng = stream_rng(seed, STREAM_RANDOM_BASELINE);
    let ids = rand::seq::index::sample(&mut rng, n, k).into_vec();
    SelectionVector::from_ids(n, &ids)
}

/// Weights of the mount-to-mount distance used by [`even_select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvenMetric {
    pub translation_weight: f64,
    pub rotation_weight: f64,
}

impl Default for EvenMetric {
    fn default() -> Self {
        Self {
            translation_weight: 1.0,
            rotation_weight: 1.0,
        }
    }
}

impl EvenMetric {
    /// `w_t ||t_a - t_b|| / L + w_r angle(R_a, R_b) / pi`.
    pub fn distance(&self, a: &Pose3, b: &Pose3, frame_length: f64) -> f64 {
        self.translation_weight * (a.translation - b.translation).norm() / frame_length
            + self.rotation_weight * rotation_angle(&a.rotation, &b.rotation) / std::f64::consts::PI
    }
}

pub fn even_select(candidates: &[CandidateMount], frame: &FrameSpec, k: usize) -> Result<SelectionVector> {
    even_select_with(candidates, frame, k, &EvenMetric::default())
}

/// Farthest-point selection seeded by the mount closest to a forward-facing
/// camera at the frame's front center, then polished by single swaps that
/// raise the smallest pairwise distance. Ties go to the lowest id.
pub fn even_select_with(
    candidates: &[CandidateMount],
    frame: &FrameSpec,
    k: usize,
    metric: &EvenMetric,
) -> Result<SelectionVector> {
    let n = candidates.len();
    check_budget(n, k)?;
    let len = frame.frame_length();
    if !(len > 0.0) {
        return Err(Error::invalid("frame length must be positive"));
    }
    let front = Pose3 {
        rotation: camera_rotation_for_yaw(0.0),
        translation: frame.front_center(),
    };
    let argbest = |score: &dyn Fn(usize) -> f64, better: fn(f64, f64) -> bool, skip: &[bool]| {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..n {
            if skip[i] {
                continue;
            }
            let s = score(i);
            if best.is_none_or(|(_, b)| better(s, b)) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i).expect("nonempty candidate set")
    };

    let mut chosen = vec![false; n];
    let first = argbest(
        &|i| metric.distance(&candidates[i].extrinsic, &front, len),
        |a, b| a < b,
        &chosen,
    );
    chosen[first] = true;
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| metric.distance(&candidates[i].extrinsic, &candidates[first].extrinsic, len))
        .collect();
    for _ in 1..k {
        let pick = argbest(&|i| nearest[i], |a, b| a > b, &chosen);
        chosen[pick] = true;
        for i in 0..n {
            let d = metric.distance(&candidates[i].extrinsic, &candidates[pick].extrinsic, len);
            nearest[i] = nearest[i].min(d);
        }
    }

    let dist = |a: usize, b: usize| metric.distance(&candidates[a].extrinsic, &candidates[b].extrinsic, len);
    // (smallest pairwise distance, minus the number of pairs attaining it)
    let spread = |ids: &[usize]| {
        let mut m = f64::INFINITY;
        let mut count = 0i64;
        for (a, &i) in ids.iter().enumerate() {
            for &j in &ids[a + 1..] {
                let d = dist(i, j);
                if d < m - 1e-12 {
                    m = d;
                    count = 1;
                } else if d <= m + 1e-12 {
                    count += 1;
                }
            }
        }
        (m, -count)
    };
    let beats = |a: (f64, i64), b: (f64, i64)| a.0 > b.0 + 1e-12 || (a.0 >= b.0 - 1e-12 && a.1 > b.1);
    let mut ids: Vec<usize> = (0..n).filter(|&i| chosen[i]).collect();
    if k >= 2 {
        let mut cur = spread(&ids);
        'outer: loop {
            for slot in 0..k {
                for x in 0..n {
                    if ids.contains(&x) {
                        continue;
                    }
                    let mut trial = ids.clone();
                    trial[slot] = x;
                    let s = spread(&trial);
                    if beats(s, cur) {
                        ids = trial;
                        cur = s;
                        continue 'outer;
                    }
                }
            }
            break;
        }
    }
    SelectionVector::from_ids(n, &ids)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualPreset {
    pub layout: String,
    pub k: usize,
    pub ids: Vec<usize>,
    #[serde(default)]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManualPresets {
    #[serde(rename = "preset")]
    pub presets: Vec<ManualPreset>,
}

const BUILTIN_PRESETS: &str = include_str!("../presets/manual.toml");

impl ManualPresets {
    /// The presets shipped in `presets/manual.toml`.
    pub fn builtin() -> Self {
        Self::from_toml_str(BUILTIN_PRESETS).expect("shipped manual presets are valid")
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::format(path, e))
    }

    fn validate(&self) -> Result<()> {
        for (i, p) in self.presets.iter().enumerate() {
            let mut ids = p.ids.clone();
            ids.sort_unstable();
            ids.dedup();
            if ids.len() != p.ids.len() || p.ids.len() != p.k || p.k == 0 {
                return Err(Error::Config(format!(
                    "preset ({}, k={}) must list {} distinct ids",
                    p.layout, p.k, p.k
                )));
            }
            if self.presets[..i].iter().any(|q| q.layout == p.layout && q.k == p.k) {
                return Err(Error::Config(format!("duplicate preset ({}, k={})", p.layout, p.k)));
            }
        }
        Ok(())
    }

    pub fn get(&self, layout: &str, k: usize) -> Option<&ManualPreset> {
        self.presets.iter().find(|p| p.layout == layout && p.k == k)
    }

    /// Checks that every preset for `layout` lists ids below `n`.
    pub fn validate_layout(&self, layout: &str, n: usize) -> Result<()> {
        for p in self.presets.iter().filter(|p| p.layout == layout) {
            if let Some(&bad) = p.ids.iter().find(|&&id| id >= n) {
                return Err(Error::Config(format!(
                    "preset ({layout}, k={}) names id {bad}, layout has {n} mounts",
                    p.k
                )));
            }
        }
        Ok(())
    }

    pub fn select(&self, layout: &str, n: usize, k: usize) -> Result<SelectionVector> {
        self.validate_layout(layout, n)?;
        let p = self.get(layout, k).ok_or_else(|| Error::NoPreset {
            layout: layout.to_string(),
            k,
        })?;
        SelectionVector::from_ids(n, &p.ids)
    }
}

/// Shipped manual configuration for `(layout, k)`.
pub fn manual_select(layout: &str, n: usize, k: usize) -> Result<SelectionVector> {
    ManualPresets::builtin().select(layout, n, k)
}
