use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use rigdesign::baselines::{even_select, random_select, ManualPresets};
use rigdesign::experiment::{aggregate, emit, run_experiment, ExperimentConfig, Method};
use rigdesign::fisher::{build_candidate_infos, write_binary};
use rigdesign::objective::{Objective, SelectionVector};
use rigdesign::scenario::{Scenario, ScenarioConfig};
use rigdesign::slam_eval::{evaluate_design, MleSettings};
use rigdesign::solvers::{exhaustive, greedy_select, select_and_certify, FwSettings};
use rigdesign::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

/// Multi-camera rig design for landmark SLAM.
#[derive(Parser)]
#[command(name = "rigdesign", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and dump it as JSON (plus the candidate FIMs).
    Simulate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Output directory.
        #[arg(long, default_value = "scenario")]
        out: PathBuf,
    },
    /// Run every method for one budget on one scenario and print the certificate.
    Optimize {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(short, long)]
        k: usize,
        #[arg(long)]
        gap_tol: Option<f64>,
        /// Threads for the greedy rounds (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Skip the MLE evaluation of each design.
        #[arg(long)]
        no_rmse: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full seeded batch across seeds, budgets and methods.
    Benchmark {
        /// Experiment TOML (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Root seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        gap_tol: Option<f64>,
        #[arg(long)]
        num_seeds: Option<usize>,
    },
    /// Exhaustive search over all K-subsets (small pools only).
    Oracle {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(short, long)]
        k: usize,
        #[arg(long)]
        gap_tol: Option<f64>,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
}

#[derive(Args)]
struct SceneArgs {
    /// Scenario TOML file; overrides --preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    preset: String,
    /// Scenario seed override.
    #[arg(long)]
    seed: Option<u64>,
}

impl SceneArgs {
    fn scenario(&self) -> Result<Scenario, Error> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::preset(&self.preset)?,
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Scenario::generate(&cfg)
    }
}

fn fw_settings(gap_tol: Option<f64>) -> Result<FwSettings, Error> {
    let mut fw = FwSettings::default();
    if let Some(g) = gap_tol {
        if !(g > 0.0) {
            return Err(Error::Config("--gap-tol must be positive".into()));
        }
        fw.gap_tol = g;
    }
    Ok(fw)
}

fn check_k(k: usize, n: usize) -> Result<(), Error> {
    if k == 0 || k > n {
        return Err(Error::Config(format!("K = {k} outside 1..={n}")));
    }
    Ok(())
}

fn install<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T, Error> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn print_json(v: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(v).expect("json serializes");
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| Error::io(p, e)),
        None => {
            let mut stdout = std::io::stdout().lock();
            let _ = writeln!(stdout, "{text}");
            Ok(())
        }
    }
}

fn simulate(scene: &SceneArgs, out: &Path) -> Result<u8, Error> {
    let sc = scene.scenario()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let infos = build_candidate_infos(&sc)?;
    let hash = sc.hash();
    sc.dump(&out.join("scenario.json"))?;
    write_binary(&infos, &hash, &out.join("fim.bin"))?;
    println!(
        "scenario {hash}: {} poses, {} landmarks, {} candidates, {} measurements -> {}",
        sc.num_poses(),
        sc.num_landmarks(),
        sc.num_candidates(),
        sc.layout.len(),
        out.display()
    );
    Ok(0)
}

fn design_entry(
    sc: &Scenario,
    obj: &Objective,
    s: &SelectionVector,
    rmse: bool,
    seed: u64,
) -> Value {
    let score = obj.value_of(s).ok();
    let mut v = json!({ "selected": s.ids(), "score": score });
    if rmse {
        match evaluate_design(sc, s, &MleSettings::default(), seed) {
            Ok((sol, r)) => {
                v["rmse"] = json!(r);
                v["mle_converged"] = json!(sol.converged);
            }
            Err(e) => v["error"] = json!(format!("mle: {e}")),
        }
    }
    v
}

fn optimize(
    scene: &SceneArgs,
    k: usize,
    gap_tol: Option<f64>,
    workers: usize,
    rmse: bool,
    out: Option<&Path>,
) -> Result<u8, Error> {
    let fw = fw_settings(gap_tol)?;
    let sc = scene.scenario()?;
    let n = sc.num_candidates();
    check_k(k, n)?;
    let infos = build_candidate_infos(&sc)?;
    let obj = Objective::new(&infos);

    let t = Instant::now();
    let cert = install(workers, || select_and_certify(&obj, k, &fw))??;
    let elapsed = t.elapsed().as_secs_f64();

    let mut failed = false;
    let mut methods = serde_json::Map::new();
    methods.insert(
        Method::Greedy.to_string(),
        design_entry(&sc, &obj, &cert.greedy.selection, rmse, sc.seed),
    );
    methods.insert(
        Method::Rounded.to_string(),
        design_entry(&sc, &obj, &cert.rounded, rmse, sc.seed),
    );
    let presets = ManualPresets::builtin();
    let baselines: [(Method, Result<SelectionVector, Error>); 3] = [
        (Method::Random, random_select(n, k, sc.seed)),
        (
            Method::Even,
            match &sc.frame {
                Some(f) => even_select(&sc.candidates, f, k),
                None => Err(Error::invalid("no frame description")),
            },
        ),
        (Method::Manual, presets.select(&sc.layout_name, n, k)),
    ];
    for (m, sel) in baselines {
        let entry = match sel {
            Ok(s) => design_entry(&sc, &obj, &s, rmse, sc.seed),
            Err(e) => {
                failed = true;
                json!({ "error": e.to_string() })
            }
        };
        failed |= entry.get("error").is_some();
        methods.insert(m.to_string(), entry);
    }
    let c = &cert.certificate;
    let report = json!({
        "scenario_hash": sc.hash(),
        "layout": sc.layout_name,
        "n": n,
        "k": k,
        "certificate": {
            "greedy_score": c.greedy_value,
            "upper_bound": c.upper_bound,
            "relative_gap": if c.gap_defined { json!(c.relative_gap) } else { Value::Null },
            "rounded_score": c.rounded_value,
            "fw_iterations": c.fw_iterations,
            "fw_gap": c.fw_gap,
            "fw_converged": c.fw_converged,
            "seconds": elapsed,
        },
        "greedy_round_values": cert.greedy.values,
        "methods": methods,
    });
    print_json(&report, out)?;
    Ok(if failed { EXIT_PARTIAL } else { 0 })
}

fn benchmark(
    config: Option<&Path>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    gap_tol: Option<f64>,
    num_seeds: Option<usize>,
) -> Result<u8, Error> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = seed {
        cfg.root_seed = s;
    }
    if let Some(w) = workers {
        cfg.workers = w;
    }
    if let Some(o) = out {
        cfg.output_dir = o;
    }
    if let Some(g) = gap_tol {
        cfg.fw.gap_tol = g;
    }
    if let Some(n) = num_seeds {
        cfg.num_seeds = n;
    }
    let t = Instant::now();
    let report = run_experiment(&cfg)?;
    let summary = aggregate(&report);
    let files = emit(&report, &summary, &cfg.output_dir)?;
    println!(
        "{} rows ({} failed) in {:.1} s -> {}",
        report.rows.len(),
        report.failures(),
        t.elapsed().as_secs_f64(),
        cfg.output_dir.display()
    );
    for s in &summary {
        let med = |st: Option<rigdesign::experiment::Stats>| {
            st.map(|x| format!("{:.4e}", x.median)).unwrap_or_else(|| "-".into())
        };
        println!(
            "{:<9} K={} {:<8} score {}  rmse {}  gamma {}",
            s.trajectory.to_string(),
            s.k,
            s.method.to_string(),
            med(s.score),
            med(s.rmse),
            med(s.gamma)
        );
    }
    println!("files: {}, {}, {}, {}", files.rows.display(), files.summary.display(), files.plot.display(), files.scatter.display());
    Ok(if report.failures() > 0 { EXIT_PARTIAL } else { 0 })
}

fn oracle(scene: &SceneArgs, k: usize, gap_tol: Option<f64>, workers: usize) -> Result<u8, Error> {
    let fw = fw_settings(gap_tol)?;
    let sc = scene.scenario()?;
    check_k(k, sc.num_candidates())?;
    let infos = build_candidate_infos(&sc)?;
    let obj = Objective::new(&infos);
    let t = Instant::now();
    let (best, f_star) = install(workers, || exhaustive(&obj, k))??;
    let enum_time = t.elapsed().as_secs_f64();
    let greedy = install(workers, || greedy_select(&obj, k))??;
    let cert = install(workers, || select_and_certify(&obj, k, &fw))??;
    let g = obj.value_of(&greedy)?;
    print_json(
        &json!({
            "scenario_hash": sc.hash(),
            "n": sc.num_candidates(),
            "k": k,
            "optimum": { "selected": best.ids(), "score": f_star, "seconds": enum_time },
            "greedy": { "selected": greedy.ids(), "score": g, "ratio": if f_star > 0.0 { json!(g / f_star) } else { Value::Null } },
            "upper_bound": cert.certificate.upper_bound,
            "rounded_score": cert.certificate.rounded_value,
            "ordered": g <= f_star * (1.0 + 1e-9) && f_star <= cert.certificate.upper_bound * (1.0 + 1e-9),
        }),
        None,
    )?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scene, out } => simulate(scene, out),
        Command::Optimize {
            scene,
            k,
            gap_tol,
            workers,
            no_rmse,
            out,
        } => optimize(scene, *k, *gap_tol, *workers, !no_rmse, out.as_deref()),
        Command::Benchmark {
            config,
            seed,
            workers,
            out,
            gap_tol,
            num_seeds,
        } => benchmark(config.as_deref(), *seed, *workers, out.clone(), *gap_tol, *num_seeds),
        Command::Oracle {
            scene,
            k,
            gap_tol,
            workers,
        } => oracle(scene, *k, *gap_tol, *workers),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
