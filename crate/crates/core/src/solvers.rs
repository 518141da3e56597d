//! Greedy selection, Frank-Wolfe on the Boolean relaxation, K-max rounding,
//! brute-force enumeration and the resulting suboptimality certificate.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::AssembledInfo;
use crate::objective::{Evaluation, Objective, RelaxedWeights, SelectionVector};

// ---------------------------------------------------------------------------
// greedy

#[derive(Debug, Clone)]
pub struct GreedyTrace {
    pub selection: SelectionVector,
    /// Objective after each round.
    pub values: Vec<f64>,
    /// Wall time of each round.
    pub round_times: Vec<Duration>,
}

impl GreedyTrace {
    pub fn value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Below this fraction of the largest Schur diagonal entry, `lambda_1` is
/// treated as exactly zero when ranking greedy candidates.
pub const GREEDY_ZERO_TOL: f64 = 1e-9;

/// Ranking key of one greedy candidate: `lambda_1` with roundoff flushed to
/// zero, then `lambda_2` to order designs that are all still rank deficient.
fn greedy_key(e: &Evaluation) -> (f64, f64, f64) {
    let scale = e.schur.s.diagonal().amax();
    let l1 = if e.value <= GREEDY_ZERO_TOL * scale { 0.0 } else { e.value };
    let l2 = if e.schur.lambda2.is_finite() { e.schur.lambda2.max(0.0) } else { 0.0 };
    (l1, l2, e.value)
}

/// Greedy maximization: `k` rounds, each adding the candidate with the largest
/// objective after insertion.
///
/// A single monocular camera leaves scale unobservable, so first-round scores
/// are all zero up to roundoff. Such ties are broken by the second smallest
/// eigenvalue, and remaining ties by the lowest id.
pub fn greedy_select(obj: &Objective, k: usize) -> Result<SelectionVector> {
    Ok(greedy_select_traced(obj, k, true)?.selection)
}

pub fn greedy_select_traced(obj: &Objective, k: usize, parallel: bool) -> Result<GreedyTrace> {
    let n = obj.num_candidates();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("budget {k} outside 1..={n}")));
    }
    let infos = &obj.assembly().candidate_infos;
    let mut chosen = vec![false; n];
    let mut base = AssembledInfo::zeros(obj.assembly());
    let mut values = Vec::with_capacity(k);
    let mut round_times = Vec::with_capacity(k);

    for _ in 0..k {
        let start = Instant::now();
        let score = |x: usize| -> Result<(f64, f64, f64)> {
            let mut info = base.clone();
            info.add_scaled(&infos[x], 1.0);
            Ok(greedy_key(&obj.evaluate_assembled(info)?))
        };
        let open: Vec<usize> = (0..n).filter(|&x| !chosen[x]).collect();
        let scores: Vec<(f64, f64, f64)> = if parallel {
            open.par_iter().map(|&x| score(x)).collect::<Result<_>>()?
        } else {
            open.iter().map(|&x| score(x)).collect::<Result<_>>()?
        };
        let mut best = 0;
        for i in 1..open.len() {
            let (a, b) = (scores[i], scores[best]);
            if a.0 > b.0 || (a.0 == b.0 && a.1 > b.1) {
                best = i;
            }
        }
        let pick = open[best];
        chosen[pick] = true;
        base.add_scaled(&infos[pick], 1.0);
        values.push(scores[best].2);
        round_times.push(start.elapsed());
    }
    Ok(GreedyTrace {
        selection: SelectionVector::from_indicator(chosen),
        values,
        round_times,
    })
}

// ---------------------------------------------------------------------------
// Frank-Wolfe

/// Indices of the `k` largest entries, ties to the lowest index.
fn top_k(values: &[f64], k: usize) -> SelectionVector {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut s = vec![false; values.len()];
    for &i in idx.iter().take(k) {
        s[i] = true;
    }
    SelectionVector::from_indicator(s)
}

/// Linear maximization oracle over `{w in [0,1]^N : sum w = K}`: the indicator
/// of the `K` largest entries of `g`.
pub fn fw_lmo(g: &[f64], k: usize) -> SelectionVector {
    top_k(g, k)
}

/// K-max rounding of a relaxed design.
pub fn kmax_round(w: &[f64], k: usize) -> SelectionVector {
    top_k(w, k)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FwSettings {
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    /// Step shrink factor of the backtracking search.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for FwSettings {
    fn default() -> Self {
        Self {
            gap_tol: 1e-4,
            max_iter: 500,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FwResult {
    pub weights: Vec<f64>,
    /// `f` at the final iterate.
    pub value: f64,
    /// Smallest certified bound `f(w_t) + g_t^T (v_t - w_t)` over all iterates.
    pub upper_bound: f64,
    /// Frank-Wolfe gap at the final iterate.
    pub gap: f64,
    /// Number of gap evaluations.
    pub iterations: usize,
    pub converged: bool,
    /// Steps that fell back to `2 / (t + 2)`.
    pub fallback_steps: usize,
    /// Certified bound after each iteration (running minimum).
    pub bound_history: Vec<f64>,
}

/// Frank-Wolfe ascent on the relaxation starting at `w0` (uniform `K/N` when
/// `None`).
///
/// Every iterate certifies `mu* <= f(w) + max_v g^T (v - w)` by concavity, so
/// the returned bound is valid whether or not the gap tolerance was reached.
pub fn frank_wolfe(
    obj: &Objective,
    k: usize,
    w0: Option<RelaxedWeights>,
    settings: &FwSettings,
) -> Result<FwResult> {
    let n = obj.num_candidates();
    let w0 = match w0 {
        Some(w) => {
            if w.budget() != k || w.as_slice().len() != n {
                return Err(Error::invalid("initial weights do not match N and K"));
            }
            w
        }
        None => RelaxedWeights::uniform(n, k)?,
    };
    if !(settings.gap_tol > 0.0) {
        return Err(Error::invalid("gap_tol must be positive"));
    }
    let mut w = w0.into_vec();
    let mut cur = checked(obj.evaluate(&w)?)?;
    let mut best_bound = f64::INFINITY;
    let mut bound_history = Vec::new();
    let mut fallback_steps = 0;
    let mut iterations = 0;
    let mut converged = false;
    let mut gap;
    let mut last_step = 1.0f64;

    loop {
        let g = obj.supergradient(&cur);
        let v = fw_lmo(&g, k).to_weights();
        let d: Vec<f64> = v.iter().zip(&w).map(|(a, b)| a - b).collect();
        gap = g.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        iterations += 1;
        best_bound = best_bound.min(cur.value + gap);
        bound_history.push(best_bound);
        if gap <= settings.gap_tol * cur.value.max(1.0) {
            converged = true;
            break;
        }
        if iterations > settings.max_iter {
            break;
        }

        let step_to = |gamma: f64| -> Vec<f64> {
            w.iter()
                .zip(&d)
                .map(|(a, b)| (a + gamma * b).clamp(0.0, 1.0))
                .collect()
        };
        let mut gamma = (2.0 * last_step).min(1.0);
        let mut accepted = None;
        for _ in 0..settings.max_backtracks {
            let cand = step_to(gamma);
            let e = checked(obj.evaluate(&cand)?)?;
            if e.value >= cur.value + settings.armijo * gamma * gap {
                last_step = gamma;
                accepted = Some((cand, e));
                break;
            }
            gamma *= settings.backtrack;
        }
        let (next_w, next) = match accepted {
            Some(x) => x,
            None => {
                fallback_steps += 1;
                let gamma = 2.0 / (iterations as f64 + 2.0);
                last_step = gamma;
                let cand = step_to(gamma);
                let e = checked(obj.evaluate(&cand)?)?;
                (cand, e)
            }
        };
        w = next_w;
        cur = next;
    }

    Ok(FwResult {
        weights: w,
        value: cur.value,
        upper_bound: best_bound,
        gap,
        iterations,
        converged,
        fallback_steps,
        bound_history,
    })
}

fn checked(e: Evaluation) -> Result<Evaluation> {
    if e.value.is_finite() {
        Ok(e)
    } else {
        Err(Error::NonFinite(e.value))
    }
}

// ---------------------------------------------------------------------------
// exhaustive

pub const EXHAUSTIVE_GUARD: u128 = 1_000_000;

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Brute-force argmax over all `k`-subsets, ranked like greedy candidates;
/// ties go to the lexicographically first subset.
pub fn exhaustive(obj: &Objective, k: usize) -> Result<(SelectionVector, f64)> {
    let n = obj.num_candidates();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("budget {k} outside 1..={n}")));
    }
    let count = binomial(n, k);
    if count > EXHAUSTIVE_GUARD {
        return Err(Error::EnumerationGuard {
            n,
            k,
            count,
            limit: EXHAUSTIVE_GUARD,
        });
    }
    let combos = combinations(n, k);
    let keys: Vec<(f64, f64, f64)> = combos
        .par_iter()
        .map(|c| {
            let s = SelectionVector::from_ids(n, c)?;
            Ok(greedy_key(&obj.evaluate(&s.to_weights())?))
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for i in 1..keys.len() {
        let (a, b) = (keys[i], keys[best]);
        if a.0 > b.0 || (a.0 == b.0 && a.1 > b.1) {
            best = i;
        }
    }
    Ok((SelectionVector::from_ids(n, &combos[best])?, keys[best].2))
}

// ---------------------------------------------------------------------------
// certificate

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub greedy_value: f64,
    pub upper_bound: f64,
    /// `(upper_bound - greedy_value) / greedy_value`; `+inf` when the greedy
    /// value is not positive.
    pub relative_gap: f64,
    pub gap_defined: bool,
    pub fw_iterations: usize,
    pub fw_gap: f64,
    pub fw_converged: bool,
    pub rounded_value: f64,
}

pub fn certify(greedy_value: f64, fw: &FwResult, rounded_value: f64) -> Certificate {
    let gap_defined = greedy_value > 0.0;
    let relative_gap = if gap_defined {
        (fw.upper_bound - greedy_value) / greedy_value
    } else {
        f64::INFINITY
    };
    Certificate {
        greedy_value,
        upper_bound: fw.upper_bound,
        relative_gap,
        gap_defined,
        fw_iterations: fw.iterations,
        fw_gap: fw.gap,
        fw_converged: fw.converged,
        rounded_value,
    }
}

/// Greedy selection, relaxation bound and rounded relaxation for one budget.
#[derive(Debug, Clone)]
pub struct CertifiedSelection {
    pub greedy: GreedyTrace,
    pub fw: FwResult,
    pub rounded: SelectionVector,
    pub certificate: Certificate,
}

pub fn select_and_certify(obj: &Objective, k: usize, settings: &FwSettings) -> Result<CertifiedSelection> {
    let greedy = greedy_select_traced(obj, k, true)?;
    let fw = frank_wolfe(obj, k, None, settings)?;
    let rounded = kmax_round(&fw.weights, k);
    let rounded_value = obj.value_of(&rounded)?;
    let certificate = certify(greedy.value(), &fw, rounded_value);
    Ok(CertifiedSelection {
        greedy,
        fw,
        rounded,
        certificate,
    })
}
