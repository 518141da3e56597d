//! The design score `f(w) = lambda_min(Schur(I(w)))` and its supergradient.

use nalgebra::{DVector, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{assemble, schur_complement, AssembledInfo, InfoAssembly, SchurOptions, SchurResult};

/// Binary design vector with exactly `budget` ones.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SelectionVector {
    s: Vec<bool>,
}

impl SelectionVector {
    pub fn from_indicator(s: Vec<bool>) -> Self {
        Self { s }
    }

    pub fn from_ids(n: usize, ids: &[usize]) -> Result<Self> {
        let mut s = vec![false; n];
        for &i in ids {
            if i >= n {
                return Err(Error::invalid(format!("candidate id {i} out of range (N = {n})")));
            }
            if s[i] {
                return Err(Error::invalid(format!("candidate id {i} selected twice")));
            }
            s[i] = true;
        }
        Ok(Self { s })
    }

    pub fn all_ones(n: usize) -> Self {
        Self { s: vec![true; n] }
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.s.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.s[id]
    }

    pub fn ids(&self) -> Vec<usize> {
        (0..self.s.len()).filter(|&i| self.s[i]).collect()
    }

    pub fn indicator(&self) -> &[bool] {
        &self.s
    }

    pub fn to_weights(&self) -> Vec<f64> {
        self.s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Relaxed design `w in [0,1]^N` with `sum w = K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxedWeights {
    w: Vec<f64>,
    budget: usize,
}

impl RelaxedWeights {
    pub fn new(w: Vec<f64>, budget: usize) -> Result<Self> {
        if budget == 0 || budget > w.len() {
            return Err(Error::invalid(format!("budget {budget} outside 1..={}", w.len())));
        }
        if let Some(bad) = w.iter().find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
            return Err(Error::invalid(format!("weight {bad} outside [0, 1]")));
        }
        let sum: f64 = w.iter().sum();
        if (sum - budget as f64).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {sum}, budget is {budget}")));
        }
        Ok(Self { w, budget })
    }

    pub fn uniform(n: usize, budget: usize) -> Result<Self> {
        Self::new(vec![budget as f64 / n as f64; n], budget)
    }

    pub fn from_selection(s: &SelectionVector) -> Self {
        Self {
            w: s.to_weights(),
            budget: s.budget(),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }
}

/// One evaluation of the objective, kept for reuse by the supergradient.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub info: AssembledInfo,
    pub schur: SchurResult,
}

impl Evaluation {
    /// Two smallest eigenvalues within `1e-8` relative of each other.
    pub fn has_repeated_min(&self) -> bool {
        let (a, b) = (self.schur.lambda1, self.schur.lambda2);
        (b - a).abs() <= 1e-8 * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
    }
}

/// The objective bound to a fixed information assembly.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    assembly: &'a InfoAssembly,
    opts: SchurOptions,
}

impl<'a> Objective<'a> {
    pub fn new(assembly: &'a InfoAssembly) -> Self {
        Self {
            assembly,
            opts: SchurOptions::default(),
        }
    }

    pub fn with_options(assembly: &'a InfoAssembly, opts: SchurOptions) -> Self {
        Self { assembly, opts }
    }

    pub fn assembly(&self) -> &'a InfoAssembly {
        self.assembly
    }

    pub fn num_candidates(&self) -> usize {
        self.assembly.num_candidates()
    }

    pub fn evaluate(&self, w: &[f64]) -> Result<Evaluation> {
        self.evaluate_assembled(assemble(self.assembly, w)?)
    }

    /// Scores an already assembled information matrix.
    pub fn evaluate_assembled(&self, info: AssembledInfo) -> Result<Evaluation> {
        let schur = schur_complement(&info, &self.opts)?;
        if !schur.lambda1.is_finite() {
            return Err(Error::NonFinite(schur.lambda1));
        }
        // S is PSD; negative values are roundoff
        let value = schur.lambda1.max(0.0);
        Ok(Evaluation { value, info, schur })
    }

    pub fn value(&self, w: &[f64]) -> Result<f64> {
        Ok(self.evaluate(w)?.value)
    }

    pub fn value_of(&self, s: &SelectionVector) -> Result<f64> {
        self.value(&s.to_weights())
    }

    /// `g_k = u^T I_k u` with `u = [v; -I_ll^+ I_lp v]`, where `v` is the unit
    /// eigenvector of the smallest eigenvalue of the Schur complement.
    pub fn supergradient(&self, eval: &Evaluation) -> Vec<f64> {
        let v = &eval.schur.eigvec;
        let u_lm = landmark_response(&eval.info, &eval.schur);
        self.assembly
            .candidate_infos
            .par_iter()
            .map(|c| {
                let mut g = 0.0;
                for (p, b) in &c.pose_blocks {
                    let vp = pose_segment(v, *p);
                    g += vp.dot(&(b * vp));
                }
                for (l, b) in &c.landmark_blocks {
                    if let Some(ul) = &u_lm[*l] {
                        g += ul.dot(&(b * ul));
                    }
                }
                for x in &c.cross_blocks {
                    if let Some(ul) = &u_lm[x.landmark] {
                        g += 2.0 * pose_segment(v, x.pose).dot(&(x.block * ul));
                    }
                }
                g
            })
            .collect()
    }

    pub fn value_and_supergradient(&self, w: &[f64]) -> Result<(Evaluation, Vec<f64>)> {
        let eval = self.evaluate(w)?;
        let g = self.supergradient(&eval);
        Ok((eval, g))
    }

    /// `f(theta w + (1-theta) nu) - theta f(w) - (1-theta) f(nu)`; nonnegative
    /// for a concave `f`.
    pub fn concavity_probe(&self, w: &[f64], nu: &[f64], theta: f64) -> Result<f64> {
        if w.len() != nu.len() {
            return Err(Error::DimensionMismatch {
                expected: w.len(),
                got: nu.len(),
            });
        }
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::invalid("theta must lie in [0, 1]"));
        }
        let mix: Vec<f64> = w
            .iter()
            .zip(nu)
            .map(|(a, b)| theta * a + (1.0 - theta) * b)
            .collect();
        Ok(self.value(&mix)? - theta * self.value(w)? - (1.0 - theta) * self.value(nu)?)
    }
}

fn pose_segment(v: &DVector<f64>, pose: usize) -> Vector6<f64> {
    Vector6::from_iterator(v.rows(6 * pose, 6).iter().copied())
}

/// Landmark part of the extended eigenvector: `-M_j^+ sum_a C_a^T v_{p(a)}`,
/// `None` for dropped landmarks.
pub fn landmark_response(info: &AssembledInfo, schur: &SchurResult) -> Vec<Option<Vector3<f64>>> {
    let v = &schur.eigvec;
    schur
        .landmark_pinv
        .iter()
        .enumerate()
        .map(|(l, pinv)| {
            pinv.as_ref().map(|minv| {
                let mut acc = Vector3::zeros();
                for slot in info.layout.landmark_ranges[l].clone() {
                    let p = info.layout.slots[slot].0;
                    acc += info.cross[slot].transpose() * pose_segment(v, p);
                }
                -(minv * acc)
            })
        })
        .collect()
}

/// `lambda_min(Schur(sum_k w_k I_k))`.
pub fn eval_f(assembly: &InfoAssembly, w: &[f64]) -> Result<f64> {
    Objective::new(assembly).value(w)
}

pub fn supergradient(assembly: &InfoAssembly, w: &[f64]) -> Result<Vec<f64>> {
    let obj = Objective::new(assembly);
    Ok(obj.value_and_supergradient(w)?.1)
}

pub fn concavity_probe(assembly: &InfoAssembly, w: &[f64], nu: &[f64], theta: f64) -> Result<f64> {
    Objective::new(assembly).concavity_probe(w, nu, theta)
}
