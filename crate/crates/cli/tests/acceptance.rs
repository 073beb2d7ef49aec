//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use cagrad::combiners::{combine_cagrad, combine_cagrad_fast, combine_mgda, combine_pcgrad};
use cagrad::harness::{relative_drop, run_experiment_with, ExperimentConfig, RunReport, StepperSpec};
use cagrad::solvers::SolverSettings;
use cagrad::verify::{
    decaying_step_run, exact_reductions, feasibility, fixed_step_run, mgda_limit, mlp_gradient_check, strong_duality,
    toy_gradient_check,
};
use cagrad::{CombinerSpec, Execution, Method, TaskGradients};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn committed_toy() -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::from_file(&repo_root().join("configs/toy.json")).map_err(|e| e.to_string())?;
    cfg.output_path = None;
    Ok(cfg)
}

fn anchors() -> Vec<Vec<f64>> {
    vec![vec![1.0, 0.0], vec![-1.0, 0.0]]
}

fn toy_report(method: CombinerSpec) -> Result<RunReport, String> {
    let mut cfg = committed_toy()?;
    cfg.method = method;
    let trs = run_experiment_with(&cfg, Execution::Parallel).map_err(|e| e.to_string())?;
    Ok(RunReport::new(&cfg, &trs))
}

fn toy_study() -> Outcome {
    let started = Instant::now();
    let gd = toy_report(CombinerSpec::new(Method::Mean))?;
    let mut ok = gd.stalled == 2 && gd.converged == 3;
    let mut detail = format!("gd stalled {}/5", gd.stalled);
    for spec in [
        CombinerSpec::new(Method::Mgda),
        CombinerSpec::new(Method::Pcgrad),
        CombinerSpec::cagrad(0.5),
    ] {
        let r = toy_report(spec)?;
        ok &= r.converged == 5;
        detail.push_str(&format!(", {} converged {}/5", r.method.name(), r.converged));
    }
    let elapsed = started.elapsed();
    ok &= elapsed <= Duration::from_secs(60);
    Ok((ok, format!("{detail}, {:.1}s", elapsed.as_secs_f64())))
}

fn gd_recovery() -> Outcome {
    let mut ok = true;
    let mut compared = 0;
    for stepper in [StepperSpec::Adam { lr: 2e-3 }, StepperSpec::Fixed { lr: 2e-3 }] {
        let mut gd = committed_toy()?;
        gd.method = CombinerSpec::new(Method::Mean);
        gd.stepper = stepper;
        gd.log_every = 1;
        let mut cg = gd.clone();
        cg.method = CombinerSpec::cagrad(0.0);
        let a = run_experiment_with(&gd, Execution::Parallel).map_err(|e| e.to_string())?;
        let b = run_experiment_with(&cg, Execution::Parallel).map_err(|e| e.to_string())?;
        for (x, y) in a.iter().zip(&b) {
            ok &= x.rows == y.rows;
            compared += x.rows.len();
        }
    }
    Ok((ok, format!("{compared} logged steps compared bitwise")))
}

fn mgda_limit_check() -> Outcome {
    let o = mgda_limit(0, 100, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    Ok((o.passed && o.cases == 100, o.to_string()))
}

fn strong_duality_check() -> Outcome {
    let started = Instant::now();
    let dual = strong_duality(0, 200, 2049, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    let ball = feasibility(0, 200, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    let ok = dual.passed && ball.passed && elapsed <= Duration::from_secs(30);
    Ok((
        ok,
        format!(
            "duality worst_ratio={:.3e}, ball worst_ratio={:.3e}, {:.1}s",
            dual.worst_ratio,
            ball.worst_ratio,
            elapsed.as_secs_f64()
        ),
    ))
}

fn fixed_step_bound() -> Outcome {
    let r = fixed_step_run(anchors(), vec![3.0, 4.0], 0.5, 1.0, 80).map_err(|e| e.to_string())?;
    let dist = r.final_theta.iter().map(|x| x * x).sum::<f64>().sqrt();
    let ok = r.gradient_sum <= 33.34 && r.worst_step_excess <= 1e-10 && dist <= 1e-6;
    Ok((
        ok,
        format!(
            "sum={:.6} bound={:.6} worst_excess={:.3e} |theta_T|={:.3e}",
            r.gradient_sum, r.bound, r.worst_step_excess, dist
        ),
    ))
}

fn decaying_step() -> Outcome {
    let r = decaying_step_run(anchors(), vec![3.0, 4.0], 2.0, 30).map_err(|e| e.to_string())?;
    let ok = r.weighted_sum <= r.bound + 1e-8;
    Ok((
        ok,
        format!(
            "weighted_sum={:.6e} bound={:.6e} losses {:?} -> {:?}",
            r.weighted_sum, r.bound, r.initial_losses, r.final_losses
        ),
    ))
}

fn rows(r: &[&[f64]]) -> TaskGradients {
    TaskGradients::new(r.iter().map(|x| x.to_vec()).collect()).expect("finite rows")
}

fn unit_goldens() -> Outcome {
    let s = SolverSettings::default();
    let m = combine_mgda(&rows(&[&[2.0, 0.0], &[0.0, 1.0]]), &s).map_err(|e| e.to_string())?;
    let w = m.weights.ok_or("mgda returned no weights")?;
    let mgda_err = (w.as_slice()[0] - 0.2).abs().max((w.as_slice()[1] - 0.8).abs());

    let p = combine_pcgrad(&rows(&[&[1.0, 0.0], &[-1.0, 1.0]]), &mut ChaCha8Rng::seed_from_u64(0));
    let pc_err = (p.d[0] - 0.25).abs().max((p.d[1] - 0.75).abs());

    let c = 0.5;
    let r = combine_cagrad(&rows(&[&[1.0, 0.0], &[0.0, 1.0]]), c, &s).map_err(|e| e.to_string())?;
    let ca_err = r.d.iter().map(|x| (x - (1.0 + c) * 0.5).abs()).fold(0.0, f64::max);

    let ok = mgda_err <= 1e-9 && pc_err <= 1e-12 && ca_err <= 1e-9;
    Ok((
        ok,
        format!("mgda {mgda_err:.1e}, pcgrad {pc_err:.1e}, cagrad {ca_err:.1e}"),
    ))
}

fn fast_consistency() -> Outcome {
    let exact = exact_reductions(0, 200, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    let s = SolverSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut checked = 0;
    let mut violations = 0;
    for _ in 0..200 {
        let k = rng.random_range(2..=6);
        let m = rng.random_range(1..=5);
        let g = TaskGradients::new(
            (0..k)
                .map(|_| (0..m).map(|_| rng.random_range(-3.0..3.0)).collect())
                .collect(),
        )
        .map_err(|e| e.to_string())?;
        let c = rng.random_range(0.0..3.0);
        let g0 = g.average().to_vec();
        let radius = c * g0.iter().map(|x| x * x).sum::<f64>().sqrt();
        for size in 1..k {
            let d = combine_cagrad_fast(&g, c, size, &mut rng, &s)
                .map_err(|e| e.to_string())?
                .d;
            let dev = d.iter().zip(&g0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            checked += 1;
            if dev > radius * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    Ok((
        exact.passed && violations == 0,
        format!(
            "bitwise reductions {}/{} ok, {checked} subsampled directions, {violations} outside the ball",
            exact.cases - exact.failures,
            exact.cases
        ),
    ))
}

fn gradient_checks() -> Outcome {
    let toy = toy_gradient_check(0, 100, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    let mlp = mlp_gradient_check(0, 5, 1.0, Execution::Parallel).map_err(|e| e.to_string())?;
    Ok((
        toy.passed && mlp.passed,
        format!(
            "toy worst_ratio={:.3e}, mlp worst_ratio={:.3e}",
            toy.worst_ratio, mlp.worst_ratio
        ),
    ))
}

fn delta_m() -> Outcome {
    let hb = [true, true, false, false, false, false, true, true, true];
    let independent = [38.30, 63.76, 0.6754, 0.2780, 25.01, 19.21, 30.14, 57.20, 69.15];
    let cagrad = [39.79, 65.49, 0.5486, 0.2250, 26.31, 21.58, 25.61, 52.36, 65.58];
    let mgda = [30.47, 59.90, 0.6070, 0.2555, 24.88, 19.45, 29.18, 56.88, 69.36];
    let a = relative_drop(&cagrad, &independent, &hb).map_err(|e| e.to_string())?;
    let b = relative_drop(&mgda, &independent, &hb).map_err(|e| e.to_string())?;
    let ok = (a - 0.20).abs() <= 0.02 && (b - 1.38).abs() <= 0.02;
    Ok((ok, format!("cagrad {a:.4}, mgda {b:.4}")))
}

fn cli(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_cagrad"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "cagrad {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        files.push((name, std::fs::read(&path).map_err(|e| e.to_string())?));
    }
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let thread_args: [&[&str]; 3] = [&["--threads", "1"], &["--threads", "4"], &[]];
    let mut verify_out = Vec::new();
    let mut toy_out = Vec::new();
    for (i, threads) in thread_args.iter().enumerate() {
        let mut args: Vec<&str> = threads.to_vec();
        args.extend(["verify", "--seed", "0"]);
        verify_out.push(cli(&args)?);

        let dir = tmp.path().join(format!("toy{i}"));
        let dir_s = dir.to_string_lossy().into_owned();
        let mut args: Vec<&str> = threads.to_vec();
        args.extend([
            "toy", "--method", "cagrad", "--c", "0.5", "--seed", "0", "--out", &dir_s,
        ]);
        let stdout = cli(&args)?;
        toy_out.push((stdout, read_dir_sorted(&dir)?));
    }
    let verify_same = verify_out.windows(2).all(|w| w[0] == w[1]);
    let toy_same = toy_out.windows(2).all(|w| w[0] == w[1]);
    let files = toy_out[0].1.len();
    Ok((
        verify_same && toy_same && files == 6,
        format!("verify identical: {verify_same}, toy identical: {toy_same} ({files} files, 3 thread settings)"),
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("toy study", toy_study),
        ("gd recovery at c = 0", gd_recovery),
        ("mgda limit", mgda_limit_check),
        ("strong duality", strong_duality_check),
        ("fixed-step convergence bound", fixed_step_bound),
        ("decaying-step bound", decaying_step),
        ("unit goldens", unit_goldens),
        ("subsampled consistency", fast_consistency),
        ("differentiation soundness", gradient_checks),
        ("relative drop arithmetic", delta_m),
        ("determinism", determinism),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        let (ok, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        println!("{} criterion {n:>2} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(n);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", criteria.len());
    } else {
        println!(
            "acceptance: {} of {} criteria failed: {failed:?}",
            failed.len(),
            criteria.len()
        );
        std::process::exit(1);
    }
}
