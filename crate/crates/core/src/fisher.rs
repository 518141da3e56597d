//! Per-candidate Fisher information and its Schur complement onto the poses.
//!
//! Every pixel measurement touches exactly one pose and one landmark, so a
//! candidate's information is stored as three block lists: 6x6 pose-diagonal
//! blocks, 3x3 landmark-diagonal blocks and 6x3 pose-landmark blocks. Pose 0
//! is the gauge anchor and its rows and columns are removed; remaining pose
//! `i` maps to reduced index `i - 1`.
//!
//! Dense coordinates: pose `r` occupies rows `6r..6r+6`, landmark `j`
//! occupies `6(P-1) + 3j..+3`.

use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Matrix6, SMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::eigen::{smallest_eigenpair, SmallestEigen, DENSE_EIGEN_LIMIT};
use crate::error::{Error, Result};
use crate::geometry::projection_jacobians_unchecked;
use crate::scenario::Scenario;

pub type Matrix6x3 = SMatrix<f64, 6, 3>;

/// Landmark blocks whose largest eigenvalue is below this are treated as
/// unobserved.
pub const DEFAULT_TOL_OBS: f64 = 1e-9;

/// Relative cutoff below which landmark-block eigenvalues are treated as zero
/// in the block pseudoinverse.
const PINV_REL_CUTOFF: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct CrossBlock {
    pub slot: usize,
    pub pose: usize,
    pub landmark: usize,
    pub block: Matrix6x3,
}

/// Information contributed by every measurement of one candidate mount.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateInfo {
    pub candidate_id: usize,
    pub measurement_count: usize,
    /// (reduced pose index, block), sorted by pose
    pub pose_blocks: Vec<(usize, Matrix6<f64>)>,
    /// (landmark index, block), sorted by landmark
    pub landmark_blocks: Vec<(usize, Matrix3<f64>)>,
    /// sorted by slot
    pub cross_blocks: Vec<CrossBlock>,
}

impl CandidateInfo {
    fn empty(candidate_id: usize) -> Self {
        Self {
            candidate_id,
            measurement_count: 0,
            pose_blocks: Vec::new(),
            landmark_blocks: Vec::new(),
            cross_blocks: Vec::new(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.measurement_count == 0
    }
}

/// Every (pose, landmark) pair that any candidate couples, sorted by
/// (landmark, pose), with per-landmark ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotLayout {
    pub slots: Vec<(usize, usize)>,
    pub landmark_ranges: Vec<Range<usize>>,
}

impl SlotLayout {
    fn new(mut pairs: Vec<(usize, usize)>, num_landmarks: usize) -> Self {
        pairs.sort_unstable_by_key(|&(p, l)| (l, p));
        pairs.dedup();
        let mut landmark_ranges = vec![0..0; num_landmarks];
        let mut start = 0;
        while start < pairs.len() {
            let lm = pairs[start].1;
            let mut end = start;
            while end < pairs.len() && pairs[end].1 == lm {
                end += 1;
            }
            landmark_ranges[lm] = start..end;
            start = end;
        }
        Self {
            slots: pairs,
            landmark_ranges,
        }
    }

    fn slot_of(&self, pose: usize, landmark: usize) -> usize {
        let r = &self.landmark_ranges[landmark];
        r.start
            + self.slots[r.clone()]
                .binary_search_by_key(&pose, |&(p, _)| p)
                .expect("slot registered")
    }
}

/// The affine family `I(w) = sum_k w_k I_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoAssembly {
    /// Non-anchored poses `P - 1`.
    pub num_poses: usize,
    pub num_landmarks: usize,
    pub candidate_infos: Vec<CandidateInfo>,
    pub layout: Arc<SlotLayout>,
    pub anchored_pose: usize,
}

impl InfoAssembly {
    pub fn num_candidates(&self) -> usize {
        self.candidate_infos.len()
    }

    pub fn pose_dim(&self) -> usize {
        6 * self.num_poses
    }

    pub fn dimension(&self) -> usize {
        6 * self.num_poses + 3 * self.num_landmarks
    }

    pub fn pose_offset(&self, pose: usize) -> usize {
        6 * pose
    }

    pub fn landmark_offset(&self, landmark: usize) -> usize {
        6 * self.num_poses + 3 * landmark
    }

    /// The assembly restricted to a subset of candidates (ids renumbered in
    /// the given order).
    pub fn restricted(&self, ids: &[usize]) -> InfoAssembly {
        InfoAssembly {
            candidate_infos: ids
                .iter()
                .enumerate()
                .map(|(new_id, &k)| CandidateInfo {
                    candidate_id: new_id,
                    ..self.candidate_infos[k].clone()
                })
                .collect(),
            ..self.clone_shell()
        }
    }

    fn clone_shell(&self) -> InfoAssembly {
        InfoAssembly {
            num_poses: self.num_poses,
            num_landmarks: self.num_landmarks,
            candidate_infos: Vec::new(),
            layout: Arc::clone(&self.layout),
            anchored_pose: self.anchored_pose,
        }
    }
}

/// Builds `I_1..I_N` at the ground-truth linearization point, with Gaussian
/// pixel noise so each measurement contributes `J^T J / sigma^2`.
pub fn build_candidate_infos(scenario: &Scenario) -> Result<InfoAssembly> {
    if scenario.layout.is_empty() {
        return Err(Error::invalid("scenario has no measurements"));
    }
    let num_poses = scenario.num_poses() - 1;
    let num_landmarks = scenario.num_landmarks();
    let n = scenario.num_candidates();

    let mut per_candidate: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (m_idx, m) in scenario.layout.iter().enumerate() {
        per_candidate[m.candidate_id].push(m_idx);
    }
    let pairs = scenario
        .layout
        .iter()
        .filter(|m| m.pose_idx > 0)
        .map(|m| (m.pose_idx - 1, m.landmark_idx))
        .collect();
    let layout = Arc::new(SlotLayout::new(pairs, num_landmarks));

    let candidate_infos = per_candidate
        .par_iter()
        .enumerate()
        .map(|(k, idxs)| {
            let cand = &scenario.candidates[k];
            let w = 1.0 / (cand.intrinsics.pixel_sigma * cand.intrinsics.pixel_sigma);
            let mut pose = std::collections::BTreeMap::<usize, Matrix6<f64>>::new();
            let mut lmk = std::collections::BTreeMap::<usize, Matrix3<f64>>::new();
            let mut cross = std::collections::BTreeMap::<usize, Matrix6x3>::new();
            for &mi in idxs {
                let m = &scenario.layout[mi];
                let jac = projection_jacobians_unchecked(
                    &scenario.trajectory.poses[m.pose_idx],
                    &cand.extrinsic,
                    &cand.intrinsics,
                    &scenario.landmarks[m.landmark_idx].position,
                );
                let jl = jac.j_lm;
                *lmk.entry(m.landmark_idx).or_insert_with(Matrix3::zeros) += jl.transpose() * jl * w;
                if m.pose_idx > 0 {
                    let r = m.pose_idx - 1;
                    let jp = jac.j_pose;
                    *pose.entry(r).or_insert_with(Matrix6::zeros) += jp.transpose() * jp * w;
                    *cross
                        .entry(layout.slot_of(r, m.landmark_idx))
                        .or_insert_with(Matrix6x3::zeros) += jp.transpose() * jl * w;
                }
            }
            CandidateInfo {
                candidate_id: k,
                measurement_count: idxs.len(),
                pose_blocks: pose.into_iter().collect(),
                landmark_blocks: lmk.into_iter().collect(),
                cross_blocks: cross
                    .into_iter()
                    .map(|(slot, block)| {
                        let (p, l) = layout.slots[slot];
                        CrossBlock {
                            slot,
                            pose: p,
                            landmark: l,
                            block,
                        }
                    })
                    .collect(),
            }
        })
        .collect::<Vec<_>>();

    Ok(InfoAssembly {
        num_poses,
        num_landmarks,
        candidate_infos,
        layout,
        anchored_pose: 0,
    })
}

/// A block-sparse symmetric information matrix in the assembly's layout.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledInfo {
    pub num_poses: usize,
    pub num_landmarks: usize,
    pub pose_blocks: Vec<Matrix6<f64>>,
    pub landmark_blocks: Vec<Matrix3<f64>>,
    /// one block per slot of `layout`
    pub cross: Vec<Matrix6x3>,
    pub layout: Arc<SlotLayout>,
}

impl AssembledInfo {
    pub fn zeros(assembly: &InfoAssembly) -> Self {
        Self {
            num_poses: assembly.num_poses,
            num_landmarks: assembly.num_landmarks,
            pose_blocks: vec![Matrix6::zeros(); assembly.num_poses],
            landmark_blocks: vec![Matrix3::zeros(); assembly.num_landmarks],
            cross: vec![Matrix6x3::zeros(); assembly.layout.slots.len()],
            layout: Arc::clone(&assembly.layout),
        }
    }

    pub fn add_scaled(&mut self, info: &CandidateInfo, w: f64) {
        for (p, b) in &info.pose_blocks {
            self.pose_blocks[*p] += b * w;
        }
        for (l, b) in &info.landmark_blocks {
            self.landmark_blocks[*l] += b * w;
        }
        for c in &info.cross_blocks {
            self.cross[c.slot] += c.block * w;
        }
    }

    pub fn dimension(&self) -> usize {
        6 * self.num_poses + 3 * self.num_landmarks
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let np = 6 * self.num_poses;
        let d = self.dimension();
        let mut m = DMatrix::zeros(d, d);
        for (p, b) in self.pose_blocks.iter().enumerate() {
            m.fixed_view_mut::<6, 6>(6 * p, 6 * p).copy_from(b);
        }
        for (l, b) in self.landmark_blocks.iter().enumerate() {
            m.fixed_view_mut::<3, 3>(np + 3 * l, np + 3 * l).copy_from(b);
        }
        for (slot, b) in self.cross.iter().enumerate() {
            let (p, l) = self.layout.slots[slot];
            m.fixed_view_mut::<6, 3>(6 * p, np + 3 * l).copy_from(b);
            m.fixed_view_mut::<3, 6>(np + 3 * l, 6 * p)
                .copy_from(&b.transpose());
        }
        m
    }
}

/// `sum_k w_k I_k`.
pub fn assemble(assembly: &InfoAssembly, weights: &[f64]) -> Result<AssembledInfo> {
    if weights.len() != assembly.num_candidates() {
        return Err(Error::DimensionMismatch {
            expected: assembly.num_candidates(),
            got: weights.len(),
        });
    }
    let mut out = AssembledInfo::zeros(assembly);
    for (info, &w) in assembly.candidate_infos.iter().zip(weights) {
        if w != 0.0 {
            out.add_scaled(info, w);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurOptions {
    pub tol_obs: f64,
    pub dense_eigen_limit: usize,
}

impl Default for SchurOptions {
    fn default() -> Self {
        Self {
            tol_obs: DEFAULT_TOL_OBS,
            dense_eigen_limit: DENSE_EIGEN_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchurResult {
    /// Pose-space information after marginalizing the landmarks.
    pub s: DMatrix<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub eigvec: nalgebra::DVector<f64>,
    pub retained_landmarks: Vec<usize>,
    /// Pseudoinverse of each retained landmark block, `None` when dropped.
    pub landmark_pinv: Vec<Option<Matrix3<f64>>>,
}

fn block_pinv(m: &Matrix3<f64>, tol_obs: f64, landmark: usize) -> Result<Option<Matrix3<f64>>> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Factorization { landmark });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let lmax = eig.eigenvalues.max();
    if !lmax.is_finite() {
        return Err(Error::Factorization { landmark });
    }
    if lmax < tol_obs {
        return Ok(None);
    }
    let cutoff = lmax * PINV_REL_CUTOFF;
    let mut pinv = Matrix3::zeros();
    for i in 0..3 {
        let lam = eig.eigenvalues[i];
        if lam > cutoff {
            let v = eig.eigenvectors.column(i);
            pinv += v * v.transpose() / lam;
        }
    }
    Ok(Some(pinv))
}

/// Generalized Schur complement `I_pp - I_pl I_ll^+ I_lp` and its smallest
/// eigenpair.
///
/// `I_ll` is block diagonal, so its pseudoinverse is taken block by block.
/// Landmarks whose block is below `tol_obs` contribute nothing and are dropped.
pub fn schur_complement(info: &AssembledInfo, opts: &SchurOptions) -> Result<SchurResult> {
    let np = 6 * info.num_poses;
    let mut s = DMatrix::zeros(np, np);
    for (p, b) in info.pose_blocks.iter().enumerate() {
        s.fixed_view_mut::<6, 6>(6 * p, 6 * p).copy_from(b);
    }

    let mut landmark_pinv = Vec::with_capacity(info.num_landmarks);
    let mut retained = Vec::new();
    for (l, block) in info.landmark_blocks.iter().enumerate() {
        let pinv = block_pinv(block, opts.tol_obs, l)?;
        if let Some(minv) = &pinv {
            retained.push(l);
            let range = info.layout.landmark_ranges[l].clone();
            for a in range.clone() {
                let ca = &info.cross[a];
                if ca.iter().all(|v| *v == 0.0) {
                    continue;
                }
                let ta = ca * minv;
                let pa = info.layout.slots[a].0;
                for b in range.clone() {
                    let cb = &info.cross[b];
                    let pb = info.layout.slots[b].0;
                    let prod = ta * cb.transpose();
                    let mut view = s.fixed_view_mut::<6, 6>(6 * pa, 6 * pb);
                    view -= prod;
                }
            }
        }
        landmark_pinv.push(pinv);
    }
    let s = (&s + s.transpose()) * 0.5;
    let SmallestEigen {
        value,
        second,
        vector,
    } = smallest_eigenpair(&s, opts.dense_eigen_limit);
    Ok(SchurResult {
        s,
        lambda1: value,
        lambda2: second,
        eigvec: vector,
        retained_landmarks: retained,
        landmark_pinv,
    })
}

// ---------------------------------------------------------------------------
// binary dump

const MAGIC: &[u8; 8] = b"RDFIM001";

fn put_u64(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u64).to_le_bytes());
}

fn put_f64s<'a>(buf: &mut Vec<u8>, vals: impl IntoIterator<Item = &'a f64>) {
    for v in vals {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Writes `{I_k}` keyed by a scenario hash.
///
/// Layout (all little endian): magic `RDFIM001`, hash length `u64` and bytes,
/// `num_poses`, `num_landmarks`, `anchored_pose`, `num_slots` as `u64`, slot
/// pairs `(pose, landmark)`, `num_candidates`, then per candidate: id, count,
/// pose blocks `(idx, 36 f64)`, landmark blocks `(idx, 9 f64)`, cross blocks
/// `(slot, 18 f64)`, each list prefixed by its `u64` length. Matrices are
/// column major.
pub fn write_binary(assembly: &InfoAssembly, scenario_hash: &str, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u64(&mut buf, scenario_hash.len());
    buf.extend_from_slice(scenario_hash.as_bytes());
    put_u64(&mut buf, assembly.num_poses);
    put_u64(&mut buf, assembly.num_landmarks);
    put_u64(&mut buf, assembly.anchored_pose);
    put_u64(&mut buf, assembly.layout.slots.len());
    for &(p, l) in &assembly.layout.slots {
        put_u64(&mut buf, p);
        put_u64(&mut buf, l);
    }
    put_u64(&mut buf, assembly.candidate_infos.len());
    for c in &assembly.candidate_infos {
        put_u64(&mut buf, c.candidate_id);
        put_u64(&mut buf, c.measurement_count);
        put_u64(&mut buf, c.pose_blocks.len());
        for (i, b) in &c.pose_blocks {
            put_u64(&mut buf, *i);
            put_f64s(&mut buf, b.iter());
        }
        put_u64(&mut buf, c.landmark_blocks.len());
        for (i, b) in &c.landmark_blocks {
            put_u64(&mut buf, *i);
            put_f64s(&mut buf, b.iter());
        }
        put_u64(&mut buf, c.cross_blocks.len());
        for x in &c.cross_blocks {
            put_u64(&mut buf, x.slot);
            put_f64s(&mut buf, x.block.iter());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::format(self.path, "truncated information dump"));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<usize> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
    }

    fn f64s<const N: usize>(&mut self) -> Result<[f64; N]> {
        let mut out = [0.0; N];
        for v in &mut out {
            *v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        }
        Ok(out)
    }
}

/// Reads a dump written by [`write_binary`], returning the assembly and the
/// stored scenario hash.
pub fn read_binary(path: &Path) -> Result<(InfoAssembly, String)> {
    let mut data = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut data))
        .map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        data: &data,
        pos: 0,
        path,
    };
    if r.take(8)? != MAGIC {
        return Err(Error::format(path, "not an information dump"));
    }
    let hlen = r.u64()?;
    let hash = String::from_utf8(r.take(hlen)?.to_vec()).map_err(|e| Error::format(path, e))?;
    let num_poses = r.u64()?;
    let num_landmarks = r.u64()?;
    let anchored_pose = r.u64()?;
    let nslots = r.u64()?;
    let mut pairs = Vec::with_capacity(nslots);
    for _ in 0..nslots {
        pairs.push((r.u64()?, r.u64()?));
    }
    let layout = Arc::new(SlotLayout::new(pairs, num_landmarks));
    if layout.slots.len() != nslots {
        return Err(Error::format(path, "slot list is not canonical"));
    }
    let ncand = r.u64()?;
    let mut candidate_infos = Vec::with_capacity(ncand);
    for _ in 0..ncand {
        let candidate_id = r.u64()?;
        let measurement_count = r.u64()?;
        let mut c = CandidateInfo {
            candidate_id,
            measurement_count,
            ..CandidateInfo::empty(candidate_id)
        };
        for _ in 0..r.u64()? {
            let i = r.u64()?;
            c.pose_blocks
                .push((i, Matrix6::from_column_slice(&r.f64s::<36>()?)));
        }
        for _ in 0..r.u64()? {
            let i = r.u64()?;
            c.landmark_blocks
                .push((i, Matrix3::from_column_slice(&r.f64s::<9>()?)));
        }
        for _ in 0..r.u64()? {
            let slot = r.u64()?;
            let block = Matrix6x3::from_column_slice(&r.f64s::<18>()?);
            let (pose, landmark) = *layout
                .slots
                .get(slot)
                .ok_or_else(|| Error::format(path, "slot out of range"))?;
            c.cross_blocks.push(CrossBlock {
                slot,
                pose,
                landmark,
                block,
            });
        }
        candidate_infos.push(c);
    }
    Ok((
        InfoAssembly {
            num_poses,
            num_landmarks,
            candidate_infos,
            layout,
            anchored_pose,
        },
        hash,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{projection_jacobians, CameraIntrinsics, Pose3};
    use crate::scenario::{
        camera_rotation_for_yaw, CandidateMount, Landmark, Trajectory, TrajectoryKind,
    };
    use nalgebra::{DVector, Vector3};

    /// Three poses, five landmarks, three mounts; the third mount looks away.
    pub(crate) fn small_scene() -> Scenario {
        let poses = vec![
            Pose3::from_yaw(0.0, Vector3::new(0.0, 0.0, 0.0)),
            Pose3::from_yaw(0.1, Vector3::new(0.3, 0.1, 0.0)),
            Pose3::from_yaw(-0.1, Vector3::new(0.6, -0.1, 0.05)),
        ];
        let lms = [
            (4.0, 0.5, 0.3),
            (4.5, -1.0, -0.2),
            (5.0, 1.2, 0.5),
            (3.5, 0.0, -0.4),
            (4.2, -0.3, 0.8),
        ]
        .iter()
        .enumerate()
        .map(|(id, &(x, y, z))| Landmark {
            id,
            position: Vector3::new(x, y, z),
        })
        .collect();
        let intr = CameraIntrinsics::default();
        let mount = |id, yaw: f64, y| CandidateMount {
            id,
            extrinsic: Pose3 {
                rotation: camera_rotation_for_yaw(yaw),
                translation: Vector3::new(0.1, y, 0.0),
            },
            intrinsics: intr,
        };
        let cands = vec![mount(0, 0.0, 0.2), mount(1, 0.2, -0.2), mount(2, 3.1, 0.0)];
        let traj = Trajectory {
            kind: TrajectoryKind::Forward,
            poses,
            max_step: 1.0,
        };
        Scenario::from_parts(lms, traj, cands, 3).unwrap()
    }

    fn dense_pinv(m: &DMatrix<f64>) -> DMatrix<f64> {
        let eig = SymmetricEigen::new(m.clone());
        let lmax = eig.eigenvalues.amax();
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            let lam = eig.eigenvalues[i];
            if lam > 1e-10 * lmax {
                let v = eig.eigenvectors.column(i);
                out += v * v.transpose() / lam;
            }
        }
        out
    }

    pub(crate) fn dense_schur(full: &DMatrix<f64>, np: usize) -> DMatrix<f64> {
        let d = full.nrows();
        let ipp = full.view((0, 0), (np, np));
        let ipl = full.view((0, np), (np, d - np));
        let ill = full.view((np, np), (d - np, d - np)).into_owned();
        ipp - ipl * dense_pinv(&ill) * ipl.transpose()
    }

    #[test]
    fn empty_candidate_is_all_zero() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        assert_eq!(a.candidate_infos[2].measurement_count, 0);
        assert!(a.candidate_infos[2].pose_blocks.is_empty());
        let z = assemble(&a, &[0.0, 0.0, 1.0]).unwrap();
        assert!(z.to_dense().amax() == 0.0);
    }

    #[test]
    fn single_measurement_rank_and_trace() {
        let sc = small_scene();
        let m = sc.layout.iter().find(|m| m.pose_idx == 1).unwrap();
        let one = Scenario {
            layout: vec![*m],
            ..sc.clone()
        };
        let a = build_candidate_infos(&one).unwrap();
        let k = m.candidate_id;
        let mut w = vec![0.0; 3];
        w[k] = 1.0;
        let dense = assemble(&a, &w).unwrap().to_dense();
        let c = &sc.candidates[k];
        let j = projection_jacobians(
            &sc.trajectory.poses[1],
            &c.extrinsic,
            &c.intrinsics,
            &sc.landmarks[m.landmark_idx].position,
        )
        .unwrap();
        let fro2 = j.j_pose.norm_squared() + j.j_lm.norm_squared();
        assert!((dense.trace() - fro2).abs() <= 1e-9 * fro2);
        let sv = dense.clone().svd(false, false).singular_values;
        let big = sv.iter().filter(|&&s| s > 1e-9 * sv.max()).count();
        assert!(big <= 2);
    }

    #[test]
    fn assembly_is_linear() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        let zero = assemble(&a, &[0.0; 3]).unwrap();
        assert_eq!(zero.to_dense().amax(), 0.0);
        let w = [0.3, 0.2, 0.1];
        let v = [0.5, 0.6, 0.2];
        let sum: Vec<f64> = w.iter().zip(&v).map(|(a, b)| a + b).collect();
        let lhs = assemble(&a, &w).unwrap().to_dense() + assemble(&a, &v).unwrap().to_dense();
        let rhs = assemble(&a, &sum).unwrap().to_dense();
        assert!((lhs - &rhs).amax() <= 1e-12 * rhs.amax());
        assert!(matches!(
            assemble(&a, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn unit_weight_selects_one_candidate() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        let e0 = assemble(&a, &[1.0, 0.0, 0.0]).unwrap();
        let mut direct = AssembledInfo::zeros(&a);
        direct.add_scaled(&a.candidate_infos[0], 1.0);
        assert_eq!(e0, direct);
    }

    #[test]
    fn candidate_blocks_are_symmetric_psd() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        for k in 0..3 {
            let mut w = vec![0.0; 3];
            w[k] = 1.0;
            let d = assemble(&a, &w).unwrap().to_dense();
            assert!((&d - d.transpose()).amax() <= 1e-12 * d.amax().max(1.0));
            let eig = SymmetricEigen::new(d.clone());
            assert!(eig.eigenvalues.min() >= -1e-9 * eig.eigenvalues.max().max(1.0));
        }
    }

    #[test]
    fn schur_of_zero_and_empty() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        let z = schur_complement(&assemble(&a, &[0.0; 3]).unwrap(), &SchurOptions::default())
            .unwrap();
        assert_eq!(z.lambda1, 0.0);
        assert!(z.retained_landmarks.is_empty());

        // landmarks stripped: S is the pose block alone
        let mut info = assemble(&a, &[1.0, 1.0, 0.0]).unwrap();
        info.landmark_blocks.iter_mut().for_each(|b| *b = Matrix3::zeros());
        let r = schur_complement(&info, &SchurOptions::default()).unwrap();
        let dense = info.to_dense();
        let ipp = dense.view((0, 0), (12, 12)).into_owned();
        assert!((&r.s - &ipp).amax() <= 1e-12 * ipp.amax());
        let lmin = SymmetricEigen::new(ipp).eigenvalues.min();
        assert!((r.lambda1 - lmin).abs() <= 1e-9 * r.s.amax());
    }

    #[test]
    fn schur_matches_dense_pseudoinverse() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        for w in [[1.0, 1.0, 1.0], [1.0, 0.0, 0.0], [0.3, 0.7, 0.0], [0.0, 1.0, 0.5]] {
            let info = assemble(&a, &w).unwrap();
            let r = schur_complement(&info, &SchurOptions::default()).unwrap();
            let oracle = dense_schur(&info.to_dense(), a.pose_dim());
            let scale = oracle.amax().max(1.0);
            assert!((&r.s - &oracle).amax() <= 1e-8 * scale, "w = {w:?}");
            let v = &r.eigvec;
            assert!((v.norm() - 1.0).abs() < 1e-12);
            assert!((&r.s * v - v * r.lambda1).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn fim_matches_numeric_hessian_of_expected_log_likelihood() {
        // For Gaussian pixels, E[-d^2 log p] equals the Gauss-Newton Hessian of
        // 0.5 * sum |pi(theta) - pi(theta_0)|^2 / sigma^2 at theta_0.
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        let np = sc.num_poses() - 1;
        let d = 6 * np + 3 * sc.num_landmarks();
        for k in 0..2 {
            let mut w = vec![0.0; 3];
            w[k] = 1.0;
            let fim = assemble(&a, &w).unwrap().to_dense();
            let cand = &sc.candidates[k];
            let ms: Vec<_> = sc.layout.iter().filter(|m| m.candidate_id == k).collect();
            let cost = |theta: &DVector<f64>| -> f64 {
                let mut c = 0.0;
                for m in &ms {
                    let pose = if m.pose_idx == 0 {
                        sc.trajectory.poses[0]
                    } else {
                        let off = 6 * (m.pose_idx - 1);
                        let delta = nalgebra::Vector6::from_iterator(
                            theta.rows(off, 6).iter().copied(),
                        );
                        sc.trajectory.poses[m.pose_idx].retract(&delta)
                    };
                    let off = 6 * np + 3 * m.landmark_idx;
                    let lm = sc.landmarks[m.landmark_idx].position
                        + Vector3::from_iterator(theta.rows(off, 3).iter().copied());
                    let pc = pose.compose(&cand.extrinsic).inverse_transform_point(&lm);
                    let r = cand.intrinsics.project_camera_point(&pc) - m.pixel;
                    c += 0.5 * r.norm_squared() / cand.intrinsics.pixel_sigma.powi(2);
                }
                c
            };
            let h = 1e-4;
            let mut hess = DMatrix::zeros(d, d);
            for i in 0..d {
                for j in i..d {
                    let e = |si: f64, sj: f64| {
                        let mut t = DVector::zeros(d);
                        t[i] += si * h;
                        t[j] += sj * h;
                        cost(&t)
                    };
                    let v = (e(1.0, 1.0) - e(1.0, -1.0) - e(-1.0, 1.0) + e(-1.0, -1.0))
                        / (4.0 * h * h);
                    hess[(i, j)] = v;
                    hess[(j, i)] = v;
                }
            }
            let rel = (&hess - &fim).amax() / fim.amax();
            assert!(rel <= 1e-6, "candidate {k}: rel err {rel:e}");
        }
    }

    #[test]
    fn binary_dump_round_trips() {
        let sc = small_scene();
        let a = build_candidate_infos(&sc).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fim.bin");
        write_binary(&a, &sc.hash(), &path).unwrap();
        let (back, hash) = read_binary(&path).unwrap();
        assert_eq!(hash, sc.hash());
        assert_eq!(back, a);
        std::fs::write(&path, b"garbage").unwrap();
        assert!(read_binary(&path).is_err());
    }
}
