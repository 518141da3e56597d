//! Maximum-likelihood SLAM restricted to a sensor selection, solved by
//! Levenberg-Marquardt with the landmarks eliminated at every step.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector2, Vector3, Vector6};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::Matrix6x3;
use crate::geometry::{projection_jacobians_unchecked, CameraIntrinsics, Pose3};
use crate::objective::SelectionVector;
use crate::rng::{stream_rng, STREAM_INIT};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PixelSource {
    Noisy,
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub pose_idx: usize,
    pub landmark_idx: usize,
    pub candidate_id: usize,
    pub observed: Vector2<f64>,
}

/// Reprojection least squares over the measurements of the selected mounts.
#[derive(Debug, Clone)]
pub struct NlsProblem {
    pub residuals: Vec<Residual>,
    pub selection: SelectionVector,
    /// Landmark ids with at least one residual, ascending.
    pub landmarks: Vec<usize>,
    pub num_poses: usize,
    extrinsics: Vec<Pose3>,
    intrinsics: Vec<CameraIntrinsics>,
    gt_poses: Vec<Pose3>,
    gt_landmarks: Vec<Vector3<f64>>,
}

impl NlsProblem {
    pub fn num_residuals(&self) -> usize {
        self.residuals.len()
    }

    /// Free scalar variables: six per non-anchored pose, three per landmark.
    pub fn dof(&self) -> usize {
        6 * (self.num_poses - 1) + 3 * self.landmarks.len()
    }
}

pub fn build_problem(scenario: &Scenario, s: &SelectionVector) -> Result<NlsProblem> {
    build_problem_from(scenario, s, PixelSource::Noisy)
}

pub fn build_problem_from(
    scenario: &Scenario,
    s: &SelectionVector,
    source: PixelSource,
) -> Result<NlsProblem> {
    if s.len() != scenario.num_candidates() {
        return Err(Error::DimensionMismatch {
            expected: scenario.num_candidates(),
            got: s.len(),
        });
    }
    if scenario.num_poses() < 2 {
        return Err(Error::invalid("need at least two poses"));
    }
    let residuals: Vec<Residual> = scenario
        .layout
        .iter()
        .filter(|m| s.contains(m.candidate_id))
        .map(|m| Residual {
            pose_idx: m.pose_idx,
            landmark_idx: m.landmark_idx,
            candidate_id: m.candidate_id,
            observed: match source {
                PixelSource::Noisy => m.noisy_pixel,
                PixelSource::Exact => m.pixel,
            },
        })
        .collect();
    if residuals.is_empty() {
        return Err(Error::EmptyProblem);
    }
    let mut landmarks: Vec<usize> = residuals.iter().map(|r| r.landmark_idx).collect();
    landmarks.sort_unstable();
    landmarks.dedup();
    Ok(NlsProblem {
        residuals,
        selection: s.clone(),
        landmarks,
        num_poses: scenario.num_poses(),
        extrinsics: scenario.candidates.iter().map(|c| c.extrinsic).collect(),
        intrinsics: scenario.candidates.iter().map(|c| c.intrinsics).collect(),
        gt_poses: scenario.trajectory.poses.clone(),
        gt_landmarks: scenario.landmarks.iter().map(|l| l.position).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MleSettings {
    /// Initial pose translation and landmark perturbation (m).
    pub translation_sigma: f64,
    /// Initial pose rotation perturbation (rad, per tangent axis).
    pub rotation_sigma: f64,
    pub gradient_tol: f64,
    pub max_iter: usize,
}

impl Default for MleSettings {
    fn default() -> Self {
        Self {
            translation_sigma: 0.05,
            rotation_sigma: 0.02,
            gradient_tol: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleSolution {
    /// All poses, the anchored pose 0 included.
    pub poses: Vec<Pose3>,
    /// Indexed by landmark id; `None` for landmarks outside the problem.
    pub landmarks: Vec<Option<Vector3<f64>>>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct State {
    poses: Vec<Pose3>,
    landmarks: Vec<Vector3<f64>>,
}

/// Per-landmark normal-equation pieces.
struct LandmarkBlock {
    hll: Matrix3<f64>,
    gl: Vector3<f64>,
    /// `(pose variable index, H_pl block)`, one entry per observing pose.
    hpl: Vec<(usize, Matrix6x3)>,
}

struct Linearization {
    cost: f64,
    hpp: DMatrix<f64>,
    gp: DVector<f64>,
    blocks: Vec<LandmarkBlock>,
}

impl NlsProblem {
    fn cost(&self, st: &State, lm_slot: &[usize]) -> Option<f64> {
        let mut c = 0.0;
        for r in &self.residuals {
            let cam = self.extrinsics[r.candidate_id];
            let intr = &self.intrinsics[r.candidate_id];
            let l = &st.landmarks[lm_slot[r.landmark_idx]];
            let pc = cam.inverse_transform_point(&st.poses[r.pose_idx].inverse_transform_point(l));
            if !(pc.z > 1e-6) {
                return None;
            }
            let e = (intr.project_camera_point(&pc) - r.observed) / intr.pixel_sigma;
            c += 0.5 * e.norm_squared();
        }
        Some(c)
    }

    fn linearize(&self, st: &State, lm_slot: &[usize]) -> Linearization {
        let np = 6 * (self.num_poses - 1);
        let mut hpp = DMatrix::zeros(np, np);
        let mut gp = DVector::zeros(np);
        let mut blocks: Vec<LandmarkBlock> = (0..self.landmarks.len())
            .map(|_| LandmarkBlock {
                hll: Matrix3::zeros(),
                gl: Vector3::zeros(),
                hpl: Vec::new(),
            })
            .collect();
        let mut cost = 0.0;
        for r in &self.residuals {
            let slot = lm_slot[r.landmark_idx];
            let intr = &self.intrinsics[r.candidate_id];
            let j = projection_jacobians_unchecked(
                &st.poses[r.pose_idx],
                &self.extrinsics[r.candidate_id],
                intr,
                &st.landmarks[slot],
            );
            let w = 1.0 / intr.pixel_sigma;
            let e = (j.pixel - r.observed) * w;
            cost += 0.5 * e.norm_squared();
            let jl = j.j_lm * w;
            let b = &mut blocks[slot];
            b.hll += jl.transpose() * jl;
            b.gl += jl.transpose() * e;
            if r.pose_idx == 0 {
                continue;
            }
            let p = r.pose_idx - 1;
            let jp = j.j_pose * w;
            let mut view = hpp.fixed_view_mut::<6, 6>(6 * p, 6 * p);
            view += jp.transpose() * jp;
            let mut gv = gp.fixed_rows_mut::<6>(6 * p);
            gv += jp.transpose() * e;
            let cross = jp.transpose() * jl;
            match b.hpl.iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += cross,
                None => b.hpl.push((p, cross)),
            }
        }
        Linearization {
            cost,
            hpp,
            gp,
            blocks,
        }
    }
}

fn gradient_norm(lin: &Linearization) -> f64 {
    let mut g2 = lin.gp.norm_squared();
    for b in &lin.blocks {
        g2 += b.gl.norm_squared();
    }
    g2.sqrt()
}

fn damp(d: f64, lambda: f64, floor: f64) -> f64 {
    lambda * d.max(floor)
}

fn sym_pinv3(m: &Matrix3<f64>) -> Matrix3<f64> {
    let eig = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let cutoff = eig.eigenvalues.max().max(0.0) * 1e-12;
    let mut out = Matrix3::zeros();
    for i in 0..3 {
        let lam = eig.eigenvalues[i];
        if lam > cutoff && lam > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += v * v.transpose() / lam;
        }
    }
    out
}

/// Damped Gauss-Newton step `(dp, dl)` by Schur reduction onto the poses.
fn solve_step(lin: &Linearization, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
    let np = lin.hpp.nrows();
    let mut diag_max: f64 = 0.0;
    for i in 0..np {
        diag_max = diag_max.max(lin.hpp[(i, i)]);
    }
    for b in &lin.blocks {
        for i in 0..3 {
            diag_max = diag_max.max(b.hll[(i, i)]);
        }
    }
    let floor = 1e-9 * diag_max.max(f64::MIN_POSITIVE);

    let mut a = lin.hpp.clone();
    for i in 0..np {
        a[(i, i)] += damp(lin.hpp[(i, i)], lambda, floor);
    }
    let mut rhs = -lin.gp.clone();
    let mut winv = Vec::with_capacity(lin.blocks.len());
    for b in &lin.blocks {
        let mut h = b.hll;
        for i in 0..3 {
            h[(i, i)] += damp(b.hll[(i, i)], lambda, floor);
        }
        let w = sym_pinv3(&h);
        for (pa, ca) in &b.hpl {
            let t = ca * w;
            let mut rv = rhs.fixed_rows_mut::<6>(6 * pa);
            rv += t * b.gl;
            for (pb, cb) in &b.hpl {
                let mut view = a.fixed_view_mut::<6, 6>(6 * pa, 6 * pb);
                view -= t * cb.transpose();
            }
        }
        winv.push(w);
    }
    let dp = if np == 0 {
        DVector::zeros(0)
    } else {
        let a = (&a + a.transpose()) * 0.5;
        a.cholesky()?.solve(&rhs)
    };
    let dl = lin
        .blocks
        .iter()
        .zip(&winv)
        .map(|(b, w)| {
            let mut r = -b.gl;
            for (p, c) in &b.hpl {
                r -= c.transpose() * dp.fixed_rows::<6>(6 * p);
            }
            w * r
        })
        .collect();
    if dp.iter().all(|v| v.is_finite()) {
        Some((dp, dl))
    } else {
        None
    }
}

fn apply(st: &State, dp: &DVector<f64>, dl: &[Vector3<f64>]) -> State {
    let mut poses = st.poses.clone();
    for (i, pose) in poses.iter_mut().enumerate().skip(1) {
        let d: Vector6<f64> = dp.fixed_rows::<6>(6 * (i - 1)).into_owned();
        *pose = pose.retract(&d);
    }
    let landmarks = st.landmarks.iter().zip(dl).map(|(l, d)| l + d).collect();
    State { poses, landmarks }
}

/// Initial estimate: ground truth with Gaussian tangent perturbations on
/// poses `1..P` and on every landmark in the problem.
fn initial_state(p: &NlsProblem, settings: &MleSettings, seed: u64) -> Result<State> {
    let mut rng = stream_rng(seed, STREAM_INIT);
    let nt = Normal::new(0.0, settings.translation_sigma)
        .map_err(|_| Error::invalid("translation_sigma must be finite and >= 0"))?;
    let nr = Normal::new(0.0, settings.rotation_sigma)
        .map_err(|_| Error::invalid("rotation_sigma must be finite and >= 0"))?;
    let mut poses = p.gt_poses.clone();
    for pose in poses.iter_mut().skip(1) {
        let d = Vector6::new(
            nr.sample(&mut rng),
            nr.sample(&mut rng),
            nr.sample(&mut rng),
            nt.sample(&mut rng),
            nt.sample(&mut rng),
            nt.sample(&mut rng),
        );
        *pose = pose.retract(&d);
    }
    let landmarks = p
        .landmarks
        .iter()
        .map(|&l| {
            p.gt_landmarks[l]
                + Vector3::new(nt.sample(&mut rng), nt.sample(&mut rng), nt.sample(&mut rng))
        })
        .collect();
    Ok(State { poses, landmarks })
}

pub fn solve_mle(problem: &NlsProblem, settings: &MleSettings, seed: u64) -> Result<MleSolution> {
    let mut lm_slot = vec![usize::MAX; problem.gt_landmarks.len()];
    for (slot, &l) in problem.landmarks.iter().enumerate() {
        lm_slot[l] = slot;
    }
    let mut st = initial_state(problem, settings, seed)?;
    // an initial point behind a camera is pulled back toward ground truth
    let mut shrink = 0;
    while problem.cost(&st, &lm_slot).is_none() {
        shrink += 1;
        if shrink > 20 {
            return Err(Error::invalid("no initial point with positive depths"));
        }
        let half = MleSettings {
            translation_sigma: settings.translation_sigma * 0.5f64.powi(shrink),
            rotation_sigma: settings.rotation_sigma * 0.5f64.powi(shrink),
            ..*settings
        };
        st = initial_state(problem, &half, seed)?;
    }

    let mut lin = problem.linearize(&st, &lm_slot);
    let initial_cost = lin.cost;
    let mut lambda = 1e-4;
    let mut iterations = 0;
    let mut converged = false;
    let mut gnorm = gradient_norm(&lin);
    while iterations < settings.max_iter {
        if !lin.cost.is_finite() {
            return Err(Error::Diverged(lin.cost));
        }
        if gnorm <= settings.gradient_tol || lin.cost == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for _ in 0..40 {
            if let Some((dp, dl)) = solve_step(&lin, lambda) {
                let cand = apply(&st, &dp, &dl);
                if let Some(c) = problem.cost(&cand, &lm_slot) {
                    // at the roundoff floor of the cost, a step that leaves it
                    // unchanged but shrinks the gradient is still progress
                    let flat = c <= lin.cost * (1.0 + 1e-12);
                    if c < lin.cost || flat {
                        let next = problem.linearize(&cand, &lm_slot);
                        let g = gradient_norm(&next);
                        if c < lin.cost || g < gnorm {
                            st = cand;
                            lambda = (lambda / 3.0).max(1e-12);
                            accepted = Some((next, g));
                            break;
                        }
                    }
                }
            }
            lambda *= 4.0;
        }
        match accepted {
            Some((next, g)) => {
                lin = next;
                gnorm = g;
            }
            // no descent left at any damping: a numerical stationary point
            None => break,
        }
    }
    if !converged && gnorm <= settings.gradient_tol {
        converged = true;
    }
    if !lin.cost.is_finite() {
        return Err(Error::Diverged(lin.cost));
    }
    let mut landmarks = vec![None; problem.gt_landmarks.len()];
    for (slot, &l) in problem.landmarks.iter().enumerate() {
        landmarks[l] = Some(st.landmarks[slot]);
    }
    Ok(MleSolution {
        poses: st.poses,
        landmarks,
        initial_cost,
        final_cost: lin.cost,
        gradient_norm: gnorm,
        iterations,
        converged,
    })
}

/// `sqrt(mean ||t_hat - t||^2)` over the non-anchored poses.
pub fn rmse_translation(solution: &MleSolution, scenario: &Scenario) -> f64 {
    let gt = &scenario.trajectory.poses;
    let n = gt.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = solution
        .poses
        .iter()
        .zip(gt)
        .skip(1)
        .map(|(a, b)| (a.translation - b.translation).norm_squared())
        .sum();
    (sum / n as f64).sqrt()
}

/// Builds, solves and scores one design.
pub fn evaluate_design(
    scenario: &Scenario,
    s: &SelectionVector,
    settings: &MleSettings,
    seed: u64,
) -> Result<(MleSolution, f64)> {
    let problem = build_problem(scenario, s)?;
    let sol = solve_mle(&problem, settings, seed)?;
    let rmse = rmse_translation(&sol, scenario);
    Ok((sol, rmse))
}
