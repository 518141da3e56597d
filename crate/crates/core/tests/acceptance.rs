//! End-to-end acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` still print FAIL when they fail, but
//! do not fail the test target; any other failure does.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Rotation3, Vector2, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rigdesign::baselines::random_select;
use rigdesign::experiment::{run_experiment, EvalRow, ExperimentConfig, Method};
use rigdesign::fisher::{assemble, build_candidate_infos, AssembledInfo, SchurOptions};
use rigdesign::geometry::{CameraIntrinsics, Pose3};
use rigdesign::objective::Objective;
use rigdesign::scenario::{
    generate_candidate_grid, FrameSpec, Landmark, Scenario, ScenarioConfig, Trajectory, TrajectoryKind,
};
use rigdesign::slam_eval::{build_problem_from, evaluate_design, rmse_translation, solve_mle, MleSettings, PixelSource};
use rigdesign::solvers::{exhaustive, frank_wolfe, greedy_select, greedy_select_traced, FwSettings};

const KNOWN_FAILURES: &[usize] = &[2];

struct Outcome {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn report(o: &Outcome) {
    println!(
        "criterion {:>2} [{}]: {}  {}",
        o.id,
        o.name,
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
}

fn scene(preset: &str, seed: u64) -> Scenario {
    let mut c = ScenarioConfig::preset(preset).unwrap();
    c.seed = seed;
    Scenario::generate(&c).unwrap()
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

// ---------------------------------------------------------------------------
// 5: FIM against a numeric Hessian, Schur against a dense pseudoinverse

fn small_scene() -> Scenario {
    let pts = [
        [3.0, -0.8, 0.3],
        [3.5, 0.6, -0.4],
        [4.0, 0.0, 0.5],
        [3.2, 0.9, 0.1],
        [3.8, -0.4, -0.6],
    ];
    let landmarks = pts
        .iter()
        .enumerate()
        .map(|(id, p)| Landmark {
            id,
            position: Vector3::new(p[0], p[1], p[2]),
        })
        .collect();
    let poses = vec![
        Pose3::identity(),
        Pose3::from_yaw(0.05, Vector3::new(0.2, 0.1, 0.02)),
        Pose3::from_yaw(-0.04, Vector3::new(0.4, -0.1, -0.03)),
    ];
    let trajectory = Trajectory {
        kind: TrajectoryKind::Forward,
        poses,
        max_step: 0.3,
    };
    let intr = CameraIntrinsics::default();
    let frame = FrameSpec::LinearArray {
        count: 3,
        length: 0.4,
        yaw_start_deg: 10.0,
        yaw_end_deg: -10.0,
    };
    let candidates = generate_candidate_grid(&frame, &intr).unwrap();
    Scenario::from_parts(landmarks, trajectory, candidates, 7).unwrap()
}

fn project(body: &Pose3, extr: &Pose3, intr: &CameraIntrinsics, l: &Vector3<f64>) -> Vector2<f64> {
    let r_wc = body.rotation * extr.rotation;
    let t_wc = body.translation + body.rotation * extr.translation;
    let pc = r_wc.transpose() * (l - t_wc);
    Vector2::new(
        intr.focal_px * pc.x / pc.z + intr.principal_point[0],
        intr.focal_px * pc.y / pc.z + intr.principal_point[1],
    )
}

/// Negative log-likelihood (up to a constant) of candidate `k`'s exact
/// measurements at the state `gt + x`.
fn nll(sc: &Scenario, k: usize, x: &[f64]) -> f64 {
    let p = sc.num_poses();
    let poses: Vec<Pose3> = (0..p)
        .map(|i| {
            let gt = sc.trajectory.poses[i];
            if i == 0 {
                return gt;
            }
            let d = Vector6::from_column_slice(&x[6 * (i - 1)..6 * i]);
            let phi = Vector3::new(d[0], d[1], d[2]);
            let rho = Vector3::new(d[3], d[4], d[5]);
            Pose3 {
                rotation: gt.rotation * Rotation3::from_scaled_axis(phi).into_inner(),
                translation: gt.translation + gt.rotation * rho,
            }
        })
        .collect();
    let off = 6 * (p - 1);
    let cand = &sc.candidates[k];
    let mut cost = 0.0;
    for m in sc.layout.iter().filter(|m| m.candidate_id == k) {
        let j = m.landmark_idx;
        let l = sc.landmarks[j].position + Vector3::new(x[off + 3 * j], x[off + 3 * j + 1], x[off + 3 * j + 2]);
        let r = (project(&poses[m.pose_idx], &cand.extrinsic, &cand.intrinsics, &l) - m.pixel)
            / cand.intrinsics.pixel_sigma;
        cost += 0.5 * r.norm_squared();
    }
    cost
}

fn criterion_5() -> Outcome {
    let sc = small_scene();
    let infos = build_candidate_infos(&sc).unwrap();
    let dim = 6 * (sc.num_poses() - 1) + 3 * sc.num_landmarks();
    let h = 1e-4;
    let mut worst_fim = 0.0f64;
    for k in 0..sc.num_candidates() {
        let mut one = AssembledInfo::zeros(&infos);
        one.add_scaled(&infos.candidate_infos[k], 1.0);
        let fim = one.to_dense();
        assert_eq!(fim.nrows(), dim);
        let mut num = DMatrix::zeros(dim, dim);
        let mut x = vec![0.0; dim];
        for i in 0..dim {
            for j in i..dim {
                let mut f = |si: f64, sj: f64| {
                    x[i] += si * h;
                    x[j] += sj * h;
                    let v = nll(&sc, k, &x);
                    x[i] -= si * h;
                    x[j] -= sj * h;
                    v
                };
                let d = (f(1.0, 1.0) - f(1.0, -1.0) - f(-1.0, 1.0) + f(-1.0, -1.0)) / (4.0 * h * h);
                num[(i, j)] = d;
                num[(j, i)] = d;
            }
        }
        let scale = fim.amax();
        worst_fim = worst_fim.max((&num - &fim).amax() / scale);
    }

    let all = assemble(&infos, &vec![1.0; sc.num_candidates()]).unwrap();
    let full = all.to_dense();
    let np = 6 * (sc.num_poses() - 1);
    let nl = dim - np;
    let ipp = full.view((0, 0), (np, np)).into_owned();
    let ipl = full.view((0, np), (np, nl)).into_owned();
    let ill = full.view((np, np), (nl, nl)).into_owned();
    let svd = ill.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let pinv = svd.pseudo_inverse(1e-10 * smax).unwrap();
    let oracle = &ipp - &ipl * pinv * ipl.transpose();
    let schur = rigdesign::fisher::schur_complement(&all, &SchurOptions::default()).unwrap();
    let schur_err = (&schur.s - &oracle).amax() / oracle.amax();
    let lam_oracle = oracle.clone().symmetric_eigen().eigenvalues.min();
    let lam_err = (schur.lambda1 - lam_oracle).abs() / oracle.amax();

    Outcome {
        id: 5,
        name: "FIM correctness",
        pass: worst_fim <= 1e-6 && schur_err <= 1e-8 && lam_err <= 1e-8,
        detail: format!(
            "max rel |I_k - numeric Hessian| = {worst_fim:.2e} (tol 1e-6); Schur vs dense pinv {schur_err:.2e}, lambda_1 {lam_err:.2e} (tol 1e-8)"
        ),
    }
}

// ---------------------------------------------------------------------------
// 3: supergradient against central differences

fn criterion_3() -> Outcome {
    let sc = scene("default", 0);
    let infos = build_candidate_infos(&sc).unwrap();
    let obj = Objective::new(&infos);
    let n = sc.num_candidates();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let mut worst = 0.0f64;
    let mut points = 0;
    let mut draws = 0;
    while points < 20 && draws < 200 {
        draws += 1;
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.95)).collect();
        let (eval, g) = obj.value_and_supergradient(&w).unwrap();
        let (l1, l2) = (eval.schur.lambda1, eval.schur.lambda2);
        if !(l1 > 0.0 && (l2 - l1) > 1e-2 * l1) {
            continue;
        }
        points += 1;
        let mut fd = vec![0.0; n];
        let mut x = w.clone();
        for k in 0..n {
            x[k] = w[k] + h;
            let up = obj.value(&x).unwrap();
            x[k] = w[k] - h;
            let dn = obj.value(&x).unwrap();
            x[k] = w[k];
            fd[k] = (up - dn) / (2.0 * h);
        }
        let scale = fd.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let err = g.iter().zip(&fd).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst = worst.max(err / scale);
    }
    Outcome {
        id: 3,
        name: "gradient correctness",
        pass: points == 20 && worst <= 1e-4,
        detail: format!("{points} points with simple lambda_1, max rel error {worst:.2e} (tol 1e-4)"),
    }
}

// ---------------------------------------------------------------------------
// 4: concavity and monotonicity

fn criterion_4() -> Outcome {
    let sc = scene("default", 1);
    let infos = build_candidate_infos(&sc).unwrap();
    let obj = Objective::new(&infos);
    let n = sc.num_candidates();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut min_probe = f64::INFINITY;
    for _ in 0..100 {
        let a: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let theta = rng.random::<f64>();
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| theta * x + (1.0 - theta) * y).collect();
        let probe = obj.value(&mix).unwrap() - theta * obj.value(&a).unwrap() - (1.0 - theta) * obj.value(&b).unwrap();
        min_probe = min_probe.min(probe);
    }
    let mut worst_mono = f64::NEG_INFINITY;
    for _ in 0..100 {
        let lo: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 0.8).collect();
        let hi: Vec<f64> = lo.iter().map(|v| v + rng.random::<f64>() * (1.0 - v)).collect();
        let d = obj.value(&lo).unwrap() - obj.value(&hi).unwrap();
        worst_mono = worst_mono.max(d);
    }
    Outcome {
        id: 4,
        name: "concavity & monotonicity",
        pass: min_probe >= -1e-8 && worst_mono <= 1e-10,
        detail: format!(
            "min concavity probe {min_probe:.3e} (>= -1e-8); max f(w) - f(w') over w <= w' = {worst_mono:.3e} (<= 1e-10)"
        ),
    }
}

// ---------------------------------------------------------------------------
// 1: exhaustive oracle on the tiny scene

fn criterion_1() -> Outcome {
    let mut ordered = true;
    let mut min_ratio = f64::INFINITY;
    let mut total = Duration::ZERO;
    for seed in 0..10 {
        let t = Instant::now();
        let sc = scene("tiny-room", seed);
        let infos = build_candidate_infos(&sc).unwrap();
        let obj = Objective::new(&infos);
        let g = obj.value_of(&greedy_select(&obj, 3).unwrap()).unwrap();
        let (_, f_star) = exhaustive(&obj, 3).unwrap();
        let mu = frank_wolfe(&obj, 3, None, &FwSettings::default()).unwrap().upper_bound;
        total += t.elapsed();
        let tol = 1e-9 * f_star;
        ordered &= g <= f_star + tol && f_star <= mu + tol;
        min_ratio = min_ratio.min(g / f_star);
    }
    let secs = total.as_secs_f64();
    Outcome {
        id: 1,
        name: "oracle optimality",
        pass: ordered && min_ratio >= 0.95 && secs < 10.0,
        detail: format!(
            "f(s_g) <= f* <= mu on all seeds: {ordered}; min f(s_g)/f* = {min_ratio:.4} (>= 0.95); {secs:.2} s total (< 10 s)"
        ),
    }
}

// ---------------------------------------------------------------------------
// 10: noiseless MLE recovers ground truth

fn criterion_10() -> Outcome {
    let mut worst = 0.0f64;
    let mut designs = 0;
    let mut skipped = 0;
    for (preset, ks, count) in [("tiny-room", 2..=5, 12u64), ("default", 2..=6, 6u64)] {
        let sc = scene(preset, 2);
        let infos = build_candidate_infos(&sc).unwrap();
        let obj = Objective::new(&infos);
        let ks: Vec<usize> = ks.collect();
        for i in 0..count {
            let k = ks[i as usize % ks.len()];
            let s = random_select(sc.num_candidates(), k, 1000 + i).unwrap();
            if obj.value_of(&s).unwrap() <= 1e-6 {
                skipped += 1;
                continue;
            }
            let problem = build_problem_from(&sc, &s, PixelSource::Exact).unwrap();
            let sol = solve_mle(&problem, &MleSettings::default(), i).unwrap();
            worst = worst.max(rmse_translation(&sol, &sc));
            designs += 1;
        }
    }
    Outcome {
        id: 10,
        name: "zero-noise SLAM consistency",
        pass: designs > 0 && worst <= 1e-6,
        detail: format!("{designs} designs with nonzero score ({skipped} zero-score skipped), max RMSE {worst:.2e} m (tol 1e-6)"),
    }
}

// ---------------------------------------------------------------------------
// 9: greedy round time against pool size

fn criterion_9() -> Outcome {
    let sizes = [20usize, 40, 80, 160];
    let mut times = Vec::new();
    for &n in &sizes {
        let mut cfg = ScenarioConfig::default();
        cfg.candidates.name = format!("sweep-{n}");
        cfg.candidates.frame = FrameSpec::LinearArray {
            count: n,
            length: 1.0,
            yaw_start_deg: 90.0,
            yaw_end_deg: -90.0,
        };
        let sc = Scenario::generate(&cfg).unwrap();
        let infos = build_candidate_infos(&sc).unwrap();
        let obj = Objective::new(&infos);
        let mut reps: Vec<f64> = (0..3)
            .map(|_| {
                let tr = greedy_select_traced(&obj, 3, false).unwrap();
                tr.round_times.iter().map(|d| d.as_secs_f64()).sum::<f64>() / tr.round_times.len() as f64
            })
            .collect();
        reps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.push(reps[1]);
    }
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = times.iter().sum::<f64>() / 4.0;
    let sxy: f64 = xs.iter().zip(&times).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&times).map(|(x, y)| (y - icept - slope * x).powi(2)).sum();
    let ss_tot: f64 = times.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    let ms: Vec<String> = times.iter().map(|t| format!("{:.1}", t * 1e3)).collect();
    Outcome {
        id: 9,
        name: "greedy runtime linearity",
        pass: r2 >= 0.9,
        detail: format!("per-round ms at N = 20/40/80/160: {}; R^2 = {r2:.4} (>= 0.9)", ms.join("/")),
    }
}

// ---------------------------------------------------------------------------
// 7: score against RMSE over random designs

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &t in &idx[i..=j] {
            r[t] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_7() -> Outcome {
    let sc = scene("default", 0);
    let infos = build_candidate_infos(&sc).unwrap();
    let obj = Objective::new(&infos);
    let n = sc.num_candidates();
    let (mut scores, mut errors) = (Vec::new(), Vec::new());
    for i in 0..40u64 {
        let k = 2 + (i as usize % 5);
        let s = random_select(n, k, 7000 + i).unwrap();
        let (_, rmse) = evaluate_design(&sc, &s, &MleSettings::default(), i).unwrap();
        scores.push(obj.value_of(&s).unwrap());
        errors.push(rmse);
    }
    let rho = pearson(&ranks(&scores), &ranks(&errors));
    Outcome {
        id: 7,
        name: "score-RMSE link",
        pass: rho < -0.3,
        detail: format!("Spearman rho over {} random designs (K = 2..6) = {rho:.3} (< -0.3)", scores.len()),
    }
}

// ---------------------------------------------------------------------------
// 2, 6, 8: the seeded benchmark on the default scene

fn benchmark_rows() -> (Vec<EvalRow>, f64) {
    let cfg = ExperimentConfig {
        scenario: "default".into(),
        k_values: vec![2, 3, 4, 5, 6],
        methods: vec![Method::Greedy, Method::Random, Method::Even, Method::Manual],
        num_seeds: 20,
        ..ExperimentConfig::default()
    };
    let t = Instant::now();
    let rep = run_experiment(&cfg).unwrap();
    (rep.rows, t.elapsed().as_secs_f64())
}

fn criterion_2(rows: &[EvalRow]) -> Outcome {
    let certs: Vec<&EvalRow> = rows
        .iter()
        .filter(|r| r.method == Method::Greedy && (3..=6).contains(&r.k))
        .collect();
    let ok = certs.iter().all(|r| r.is_ok() && r.relative_gap.is_some());
    let gammas: Vec<f64> = certs.iter().filter_map(|r| r.relative_gap).collect();
    let runtime: f64 = certs
        .iter()
        .map(|r| r.select_time_s + r.fw_time_s.unwrap_or(0.0))
        .sum();
    let med = median(&gammas);
    let within = gammas.iter().filter(|&&g| g <= 0.02).count() as f64 / gammas.len() as f64;
    let per_k: Vec<String> = (3..=6)
        .map(|k| {
            let g: Vec<f64> = certs.iter().filter(|r| r.k == k).filter_map(|r| r.relative_gap).collect();
            format!("K{k} {:.3}", median(&g))
        })
        .collect();
    Outcome {
        id: 2,
        name: "certificate tightness",
        pass: ok && gammas.len() == 80 && med <= 0.05 && within >= 0.5 && runtime < 1800.0,
        detail: format!(
            "{} runs, median gamma* = {med:.3} (<= 0.05), share <= 0.02 = {:.0}% (>= 50%), per-K medians [{}], {runtime:.0} s (< 1800 s)",
            gammas.len(),
            100.0 * within,
            per_k.join(", ")
        ),
    }
}

fn criterion_6(rows: &[EvalRow]) -> Outcome {
    let find = |seed: usize, k: usize, m: Method| {
        rows.iter()
            .find(|r| r.seed_index == seed && r.k == k && r.method == m)
            .filter(|r| r.is_ok())
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for m in [Method::Random, Method::Even, Method::Manual] {
        let (mut wins, mut cells) = (0, 0);
        for seed in 0..20 {
            for k in 2..=6 {
                cells += 1;
                if let (Some(g), Some(b)) = (find(seed, k, Method::Greedy), find(seed, k, m)) {
                    if g.score.unwrap() >= b.score.unwrap() {
                        wins += 1;
                    }
                }
            }
        }
        let share = wins as f64 / cells as f64;
        pass &= share >= 0.8;
        parts.push(format!("vs {m} {:.0}%", 100.0 * share));
    }
    let mut rmse_parts = Vec::new();
    for k in 2..=6 {
        let col = |m: Method| -> Vec<f64> {
            rows.iter()
                .filter(|r| r.k == k && r.method == m && r.is_ok())
                .filter_map(|r| r.rmse)
                .collect()
        };
        let (g, r) = (col(Method::Greedy), col(Method::Random));
        let ok = !g.is_empty() && !r.is_empty() && median(&g) <= median(&r);
        pass &= ok;
        rmse_parts.push(format!("K{k} {:.4}/{:.4}", median(&g), median(&r)));
    }
    Outcome {
        id: 6,
        name: "benchmark dominance",
        pass,
        detail: format!(
            "greedy score >= baseline in {} of cells (>= 80%); median RMSE greedy/random [{}] m",
            parts.join(", "),
            rmse_parts.join(", ")
        ),
    }
}

fn criterion_8(rows: &[EvalRow]) -> Outcome {
    let greedy: Vec<&EvalRow> = rows.iter().filter(|r| r.method == Method::Greedy && r.is_ok()).collect();
    let bounded = greedy.iter().all(|r| {
        let (rv, mu) = (r.rounded_score.unwrap(), r.upper_bound.unwrap());
        rv <= mu * (1.0 + 1e-9)
    });
    let ratios: Vec<f64> = greedy
        .iter()
        .map(|r| r.rounded_score.unwrap() / r.score.unwrap())
        .collect();
    let below = ratios.iter().filter(|&&x| x < 1.0).count();
    Outcome {
        id: 8,
        name: "rounded relaxation",
        pass: !greedy.is_empty() && bounded,
        detail: format!(
            "f(kmax) <= mu on all {} runs: {bounded}; median f(kmax)/f(s_g) = {:.3}, rounded below greedy in {below} runs",
            greedy.len(),
            median(&ratios)
        ),
    }
}

fn blocked(id: usize, name: &'static str) -> Outcome {
    Outcome {
        id,
        name,
        pass: false,
        detail: "blocked: supergradient check (criterion 3) failed".into(),
    }
}

fn main() {
    let start = Instant::now();
    let mut outcomes = Vec::new();
    let mut run = |o: Outcome| {
        report(&o);
        outcomes.push(o);
    };
    run(criterion_5());
    let grad = criterion_3();
    let grad_ok = grad.pass;
    run(grad);
    run(criterion_4());
    run(criterion_10());
    run(criterion_7());
    if grad_ok {
        run(criterion_1());
        run(criterion_9());
        let (rows, secs) = benchmark_rows();
        println!("benchmark batch: {} rows in {secs:.0} s", rows.len());
        run(criterion_2(&rows));
        run(criterion_6(&rows));
        run(criterion_8(&rows));
    } else {
        run(blocked(1, "oracle optimality"));
        run(blocked(9, "greedy runtime linearity"));
        run(blocked(2, "certificate tightness"));
        run(blocked(6, "benchmark dominance"));
        run(blocked(8, "rounded relaxation"));
    }

    outcomes.sort_by_key(|o| o.id);
    println!();
    println!("acceptance summary ({:.0} s):", start.elapsed().as_secs_f64());
    for o in &outcomes {
        println!("  {:>2} {:<28} {}", o.id, o.name, if o.pass { "PASS" } else { "FAIL" });
    }
    let unexpected: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.pass && !KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    let known: Vec<usize> = outcomes
        .iter()
        .filter(|o| !o.pass && KNOWN_FAILURES.contains(&o.id))
        .map(|o| o.id)
        .collect();
    println!(
        "{} of {} criteria pass; known failures {:?}; unexpected failures {:?}",
        outcomes.iter().filter(|o| o.pass).count(),
        outcomes.len(),
        known,
        unexpected
    );
    if !unexpected.is_empty() {
        std::process::exit(1);
    }
}
