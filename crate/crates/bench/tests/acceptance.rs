//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use mbd_bench::problems::{self, Problem, MNIST_FILES};
use mbd_bench::runner::plan_demo;
use mbd_core::baselines::{run_cem, run_cem_objective, CemConfig, EliteMode};
use mbd_core::demos::RrtConfig;
use mbd_core::diffusion::{
    estimate_score, initial_iterate, mcsa_step, sample_candidates, weighted_mean, Candidate, Evaluation,
};
use mbd_core::dynamics::{car2d_umaze, double_integrator_2d, pendulum_swingup, TaskSpec};
use mbd_core::objectives::{ackley, multimodal_1d_value, rastrigin, synthetic_multimodal_1d, grid_mass_below};
use mbd_core::streams::StreamKey;
use mbd_core::trajopt::TrajectoryTarget;
use mbd_core::{
    diffuse, run_mbd, run_mbd_trajopt, run_mbd_trajopt_with_demo, BackwardKind, BlackBoxRun, ConstraintMode,
    DiffusionTrace, IndexConvention, MbdConfig, NoiseSchedule, Target, TrajOptRun,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const SEEDS: std::ops::Range<u64> = 0..8;

type Fingerprint = Vec<u64>;

struct Verdict {
    /// `None` marks a criterion whose inputs are absent.
    pass: Option<bool>,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass: Some(pass), detail: detail.into() }
    }
}

/// Reruns the seed-0 slice of a criterion with a given worker count.
type Probe = Box<dyn Fn(usize) -> Fingerprint>;

struct Acceptance {
    failures: usize,
    probes: Vec<(&'static str, Fingerprint, Probe)>,
}

impl Acceptance {
    fn check(&mut self, id: &str, title: &str, budget: Option<Duration>, f: impl FnOnce(&mut Self) -> Verdict) {
        let start = Instant::now();
        let v = f(self);
        let elapsed = start.elapsed();
        let over = budget.is_some_and(|b| elapsed > b);
        let status = match v.pass {
            None => "SKIP",
            Some(true) if !over => "PASS",
            Some(_) => "FAIL",
        };
        if status == "FAIL" {
            self.failures += 1;
        }
        let timing = match budget {
            Some(b) => format!("{:.2}s, limit {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        let over_note = if over { " OVER TIME LIMIT" } else { "" };
        println!("{status} {id} {title} [{timing}]{over_note}: {}", v.detail);
    }

    fn probe(&mut self, name: &'static str, f: impl Fn(usize) -> Fingerprint + 'static) {
        let reference = f(0);
        self.probes.push((name, reference, Box::new(f)));
    }
}

fn bits(xs: &[f64]) -> Fingerprint {
    xs.iter().map(|x| x.to_bits()).collect()
}

fn trace_bits(t: &DiffusionTrace) -> Fingerprint {
    let mut out = Vec::new();
    for r in &t.records {
        out.extend(bits(&r.mean));
        out.extend(bits(&[r.j_min, r.j_mean_batch, r.ess]));
    }
    out
}

fn black_box_bits(r: &BlackBoxRun) -> Fingerprint {
    let mut out = bits(&r.solution);
    out.extend(bits(&r.best));
    out.extend(bits(&[r.solution_cost, r.best_cost]));
    out.extend(trace_bits(&r.trace));
    out
}

fn traj_bits(r: &TrajOptRun) -> Fingerprint {
    let mut out = bits(&r.best_trajectory.controls);
    out.extend(bits(&r.final_trajectory.controls));
    out.extend(trace_bits(&r.trace));
    out
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ")
}

// ---------------------------------------------------------------- C1

fn schedule_identities() -> Verdict {
    let s = NoiseSchedule::linear(1e-4, 1e-2, 100).unwrap();
    let n = s.n_steps();
    let mut worst: f64 = 0.0;
    let mut ok = n == 100 && s.alpha_bar(0) == 1.0;
    let mut log_sum = 0.0;
    for i in 1..=n {
        let beta = 1e-4 + (i - 1) as f64 * (1e-2 - 1e-4) / 99.0;
        worst = worst.max((s.beta(i) - beta).abs());
        worst = worst.max((s.alpha(i) - (1.0 - beta)).abs());
        worst = worst.max((s.alpha_bar(i) - s.alpha_bar(i - 1) * s.alpha(i)).abs());
        // independent route: sum of logs
        log_sum += (1.0 - beta).ln();
        worst = worst.max((s.alpha_bar(i) - log_sum.exp()).abs());
        ok &= s.alpha_bar(i) < s.alpha_bar(i - 1) && s.alpha_bar(i) > 0.0;
        if i > 1 {
            ok &= s.beta(i) > s.beta(i - 1);
        }
        let cur = s.sampling_params(i, IndexConvention::Current).unwrap();
        worst = worst.max((cur.variance - (1.0 / s.alpha_bar(i) - 1.0)).abs());
    }
    ok &= s.sampling_params(1, IndexConvention::Previous).unwrap().variance == 0.0;
    Verdict::new(ok && worst <= 1e-12, format!("max abs deviation {worst:.2e}, ᾱ_N = {:.6}", s.alpha_bar(n)))
}

// ---------------------------------------------------------------- C2

fn collapse_identity() -> Verdict {
    let s = NoiseSchedule::default_linear();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = Normal::new(0.0, 2.0).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=8);
        let i = rng.random_range(1..=s.n_steps());
        let y: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let y_bar: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
        let stepped = mcsa_step(&y, &estimate_score(&y, &y_bar, &s, i), &s, i);
        let expected: Vec<f64> = y_bar.iter().map(|m| s.alpha_bar(i - 1).sqrt() * m).collect();
        let err = stepped.iter().zip(&expected).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale = expected.iter().map(|b| b * b).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Verdict::new(worst <= 1e-10, format!("max relative error {worst:.2e} over 100 triples"))
}

// ---------------------------------------------------------------- C3

/// `exp(-J)` is an isotropic Gaussian with mean `mu` and std `s`.
struct Gaussian {
    mu: Vec<f64>,
    s: f64,
}

impl Target for Gaussian {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn evaluate(&self, y: &[f64], temperature: f64) -> Evaluation {
        let cost = y.iter().zip(&self.mu).map(|(a, m)| (a - m).powi(2)).sum::<f64>() / (2.0 * self.s * self.s);
        Evaluation { cost, violation: 0.0, log_weight: -cost / temperature }
    }
}

fn gaussian_score_oracle() -> Verdict {
    const N: usize = 100_000;
    let s = NoiseSchedule::default_linear();
    let i = 50;
    let ab = s.alpha_bar(i);
    let mut worst_z: f64 = 0.0;
    let mut detail = Vec::new();
    for d in [1usize, 5] {
        let target = Gaussian { mu: (0..d).map(|k| 0.5 - 0.3 * k as f64).collect(), s: 0.5 };
        let y: Vec<f64> = (0..d).map(|k| if k % 2 == 0 { 0.7 } else { -0.4 }).collect();
        let draws = sample_candidates(&y, &s, i, N, IndexConvention::Current, StreamKey::new(d as u64)).unwrap();
        let cands: Vec<Candidate> = draws
            .into_iter()
            .map(|x| {
                let lw = target.evaluate(&x, 1.0).log_weight;
                Candidate { y: x, log_weight: lw }
            })
            .collect();
        let wm = weighted_mean(&cands).unwrap();
        let est = estimate_score(&y, &wm.mean, &s, i);

        // self-normalized importance sampling standard error of the weighted mean
        let probs = mbd_core::diffusion::softmax(&cands.iter().map(|c| c.log_weight).collect::<Vec<_>>()).unwrap();
        let gain = ab.sqrt() / (1.0 - ab);
        let marginal_var = ab * target.s * target.s + 1.0 - ab;
        for c in 0..d {
            let var: f64 = cands.iter().zip(&probs).map(|(k, p)| p * p * (k.y[c] - wm.mean[c]).powi(2)).sum();
            let se = gain * var.sqrt();
            let exact = -(y[c] - ab.sqrt() * target.mu[c]) / marginal_var;
            worst_z = worst_z.max((est[c] - exact).abs() / se);
        }
        detail.push(format!("d={d} ess {:.0}", wm.ess));
    }
    Verdict::new(worst_z <= 3.0, format!("worst |error|/SE {worst_z:.2} ({})", detail.join(", ")))
}

// ---------------------------------------------------------------- C4

fn one_step_cem<T: Target>(target: &T, cfg: &MbdConfig) -> Vec<f64> {
    let params = cfg.schedule.sampling_params(1, cfg.index_convention).unwrap();
    let start = initial_iterate(target.dim(), cfg.seed);
    let cem = CemConfig {
        n_iters: 1,
        n_samples: cfg.n_samples,
        elite_mode: EliteMode::Softmax { temperature: cfg.temperature },
        init_std: params.std_dev(),
        init_mean: Some(start.iter().map(|y| y * params.scale).collect()),
        ..CemConfig::default()
    };
    run_cem(target, &cem, cfg.seed).unwrap().solution
}

fn cem_reduction() -> Verdict {
    let mut worst: f64 = 0.0;
    let p = rastrigin(10).unwrap();
    let task = double_integrator_2d();
    let traj = TrajectoryTarget::new(&task, ConstraintMode::Hard);
    for seed in SEEDS {
        for schedule in [NoiseSchedule::from_betas(vec![0.5]).unwrap(), NoiseSchedule::linear(1e-2, 1e-2, 1).unwrap()] {
            let cfg = MbdConfig { schedule, n_samples: 100, temperature: 0.5, seed, ..MbdConfig::default() };
            let targets: [&dyn Fn() -> (Vec<f64>, Vec<f64>); 2] = [
                &|| (diffuse(&p.target(), &cfg).unwrap().solution, one_step_cem(&p.target(), &cfg)),
                &|| (diffuse(&traj, &cfg).unwrap().solution, one_step_cem(&traj, &cfg)),
            ];
            for t in targets {
                let (a, b) = t();
                for (x, y) in a.iter().zip(&b) {
                    worst = worst.max((x - y).abs());
                }
            }
        }
    }
    Verdict::new(worst <= 1e-12, format!("max abs difference {worst:.2e} over 8 seeds, two targets, two schedules"))
}

// ---------------------------------------------------------------- C5

const LAMBDAS: [f64; 4] = [1.0, 0.3, 0.1, 0.03];

fn concentration() -> Verdict {
    let masses: Vec<f64> =
        LAMBDAS.iter().map(|&l| grid_mass_below(multimodal_1d_value, -3.0, 3.0, l, 0.1, 200_000)).collect();
    let ok = masses.windows(2).all(|w| w[1] >= w[0]);
    Verdict::new(ok, format!("P(J ≤ 0.1) at λ = 1, 0.3, 0.1, 0.03: {}", fmt_list(&masses)))
}

// ---------------------------------------------------------------- C6

const BB_SAMPLES: usize = 1000;

fn mbd_black_box(name: &str, seed: u64, workers: usize) -> BlackBoxRun {
    let (p, temperature) = match name {
        "ackley" => (ackley(10).unwrap(), 1.0),
        _ => (rastrigin(10).unwrap(), 10.0),
    };
    run_mbd(&p, &MbdConfig { seed, n_samples: BB_SAMPLES, temperature, workers, ..MbdConfig::default() }).unwrap()
}

/// Top-k CEM with MBD's evaluation budget, started from MBD's first distribution.
fn cem_black_box(name: &str, seed: u64, workers: usize) -> BlackBoxRun {
    let p = if name == "ackley" { ackley(10).unwrap() } else { rastrigin(10).unwrap() };
    let s = NoiseSchedule::default_linear();
    let ab = s.alpha_bar(s.n_steps());
    let init: Vec<f64> = initial_iterate(10, seed).iter().map(|v| v / ab.sqrt()).collect();
    let cfg = CemConfig {
        init_mean: Some(init),
        workers,
        ..CemConfig::top_tenth(s.n_steps(), BB_SAMPLES, (1.0 / ab - 1.0).sqrt())
    };
    run_cem_objective(&p, &cfg, seed).unwrap()
}

fn black_box(acc: &mut Acceptance) -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for name in ["ackley", "rastrigin"] {
        let mbd: Vec<f64> = SEEDS.map(|s| mbd_black_box(name, s, 0).best_cost).collect();
        let cem: Vec<f64> = SEEDS.map(|s| cem_black_box(name, s, 0).best_cost).collect();
        let (m, c) = (median(mbd), median(cem));
        ok &= m <= c;
        if name == "ackley" {
            ok &= m < 1.0;
        }
        detail.push(format!("{name}-10d median MBD {m:.3} vs top-k CEM {c:.3}"));
    }
    for name in ["ackley", "rastrigin"] {
        acc.probe("black-box MBD", move |w| black_box_bits(&mbd_black_box(name, 0, w)));
        acc.probe("black-box CEM", move |w| black_box_bits(&cem_black_box(name, 0, w)));
    }
    Verdict::new(ok, detail.join("; "))
}

// ---------------------------------------------------------------- C7

fn double_integrator_run(seed: u64, workers: usize) -> (TaskSpec, TrajOptRun) {
    let task = double_integrator_2d();
    let cfg = MbdConfig { seed, n_samples: 1000, temperature: 0.1, workers, ..MbdConfig::default() };
    let run = run_mbd_trajopt(&task, &cfg, ConstraintMode::Hard).unwrap();
    (task, run)
}

fn pendulum_run(seed: u64, workers: usize) -> (TaskSpec, TrajOptRun) {
    let task = pendulum_swingup();
    let cfg = MbdConfig { seed, workers, ..MbdConfig::default() };
    let run = run_mbd_trajopt(&task, &cfg, ConstraintMode::Hard).unwrap();
    (task, run)
}

fn multimodal_run(seed: u64, kind: BackwardKind, workers: usize) -> BlackBoxRun {
    let cfg = MbdConfig { seed, backward_kind: kind, workers, ..MbdConfig::default() };
    run_mbd(&synthetic_multimodal_1d(), &cfg).unwrap()
}

fn final_errors(runs: impl Iterator<Item = (TaskSpec, TrajOptRun)>) -> (usize, Vec<f64>) {
    let mut successes = 0;
    let mut errs = Vec::new();
    for (task, run) in runs {
        successes += usize::from(run.succeeded(&task));
        errs.push((task.final_error)(run.best_trajectory.final_state()));
    }
    (successes, errs)
}

fn trajectory_tasks(acc: &mut Acceptance) -> Verdict {
    let (di_ok, di_err) = final_errors(SEEDS.map(|s| double_integrator_run(s, 0)));
    let (pd_ok, pd_err) = final_errors(SEEDS.map(|s| pendulum_run(s, 0)));
    let mcsa = median(SEEDS.map(|s| multimodal_run(s, BackwardKind::Mcsa, 0).solution_cost).collect());
    let sde = median(SEEDS.map(|s| multimodal_run(s, BackwardKind::ReverseSde, 0).solution_cost).collect());

    acc.probe("double integrator", |w| traj_bits(&double_integrator_run(0, w).1));
    acc.probe("pendulum", |w| traj_bits(&pendulum_run(0, w).1));
    acc.probe("multimodal reverse SDE", |w| black_box_bits(&multimodal_run(0, BackwardKind::ReverseSde, w)));

    let ok = di_ok == 8 && pd_ok >= 6 && mcsa < sde;
    Verdict::new(
        ok,
        format!(
            "double integrator {di_ok}/8 (distances {}); pendulum {pd_ok}/8 (|θ_T| {}); multimodal median final cost MCSA {mcsa:.4} vs reverse SDE {sde:.4}",
            fmt_list(&di_err),
            fmt_list(&pd_err)
        ),
    )
}

// ---------------------------------------------------------------- C8

const CAR_SAMPLES: usize = 200;
const CAR_SIGMA: f64 = 0.3;
const CAR_CLEARANCE: f64 = 0.2;

fn car_run(seed: u64, with_demo: bool, workers: usize) -> (TaskSpec, TrajOptRun) {
    let task = car2d_umaze();
    let cfg = MbdConfig { seed, n_samples: CAR_SAMPLES, temperature: 0.1, workers, ..MbdConfig::default() };
    let run = if with_demo {
        let rrt = RrtConfig { seed, clearance: CAR_CLEARANCE, ..RrtConfig::default() };
        let demo = plan_demo(&task, &rrt, CAR_SIGMA).unwrap();
        run_mbd_trajopt_with_demo(&task, &cfg, ConstraintMode::Hard, &demo).unwrap()
    } else {
        run_mbd_trajopt(&task, &cfg, ConstraintMode::Hard).unwrap()
    };
    (task, run)
}

fn demonstrations(acc: &mut Acceptance) -> Verdict {
    let (demo_ok, demo_err) = final_errors(SEEDS.map(|s| car_run(s, true, 0)));
    let (free_ok, free_err) = final_errors(SEEDS.map(|s| car_run(s, false, 0)));
    acc.probe("car with demonstration", |w| traj_bits(&car_run(0, true, w).1));
    acc.probe("car without demonstration", |w| traj_bits(&car_run(0, false, w).1));
    let ok = demo_ok >= 6 && free_ok < demo_ok;
    Verdict::new(
        ok,
        format!(
            "feasible within 0.3 of goal: with demo {demo_ok}/8 (distances {}), data-free {free_ok}/8 (distances {})",
            fmt_list(&demo_err),
            fmt_list(&free_err)
        ),
    )
}

// ---------------------------------------------------------------- C9

fn spiral_run(seed: u64, workers: usize) -> (f64, BlackBoxRun, usize) {
    let Problem::BlackBox { problem, classification: Some(c) } = problems::build("mlp_spiral", None, None, 0).unwrap()
    else {
        unreachable!("mlp_spiral is a classification problem")
    };
    let run = run_mbd(&problem, &MbdConfig { seed, workers, ..MbdConfig::default() }).unwrap();
    (c.accuracy(&run.best).unwrap(), run, problem.dim())
}

fn spiral(acc: &mut Acceptance) -> Verdict {
    let results: Vec<(f64, usize)> = (0..4).map(|s| spiral_run(s, 0)).map(|(a, _, d)| (a, d)).collect();
    acc.probe("spiral MLP", |w| black_box_bits(&spiral_run(0, w).1));
    let accs: Vec<f64> = results.iter().map(|r| r.0).collect();
    let dim = results[0].1;
    let ok = dim >= 1000 && accs.iter().all(|&a| a >= 0.85);
    Verdict::new(ok, format!("{dim} parameters, training accuracy over seeds 0..4: {}", fmt_list(&accs)))
}

fn mnist() -> Verdict {
    let Some(dir) = std::env::var_os("MBD_MNIST_DIR").map(std::path::PathBuf::from) else {
        return Verdict { pass: None, detail: "MBD_MNIST_DIR not set".into() };
    };
    if !MNIST_FILES.iter().all(|f| dir.join(f).exists()) {
        return Verdict { pass: None, detail: format!("IDX files not found in {}", dir.display()) };
    }
    let problem = problems::build("mlp_mnist", None, Some(&dir), 256);
    let Ok(Problem::BlackBox { problem, classification: Some(c) }) = problem else {
        return Verdict::new(false, "could not load the IDX files");
    };
    let run = run_mbd(&problem, &MbdConfig { n_samples: 256, ..MbdConfig::default() }).unwrap();
    let a = c.accuracy(&run.best).unwrap();
    Verdict::new(a >= 0.75, format!("{} parameters, test accuracy {a:.3}", problem.dim()))
}

// ---------------------------------------------------------------- C10

fn determinism(acc: &mut Acceptance) -> Verdict {
    let mut pure_ok = true;
    for f in [schedule_identities, collapse_identity, gaussian_score_oracle, cem_reduction, concentration] {
        pure_ok &= f().detail == f().detail;
    }
    let mut mismatched = Vec::new();
    for (name, reference, probe) in &acc.probes {
        for workers in [1, 3] {
            if probe(workers) != *reference {
                mismatched.push(format!("{name} with {workers} workers"));
            }
        }
    }
    let detail = if mismatched.is_empty() {
        format!("{} seeded runs bit-identical on rerun with 1 and 3 workers; closed-form checks repeat exactly", acc.probes.len())
    } else {
        format!("differs: {}", mismatched.join(", "))
    };
    Verdict::new(pure_ok && mismatched.is_empty(), detail)
}

fn main() {
    // `cargo test -- <filter>` passes arguments; a filter that names nothing here skips the run
    if let Some(filter) = std::env::args().skip(1).find(|a| !a.starts_with('-')) {
        if !"acceptance".contains(&filter) {
            return;
        }
    }
    let mut acc = Acceptance { failures: 0, probes: Vec::new() };
    let secs = Duration::from_secs;
    acc.check("C1", "schedule identities", Some(secs(1)), |_| schedule_identities());
    acc.check("C2", "collapse identity", Some(secs(1)), |_| collapse_identity());
    acc.check("C3", "Gaussian score oracle", Some(secs(10)), |_| gaussian_score_oracle());
    acc.check("C4", "single-step reduction to softmax CEM", Some(secs(1)), |_| cem_reduction());
    acc.check("C5", "concentration as temperature falls", Some(secs(5)), |_| concentration());
    acc.check("C6", "black-box optimization", Some(secs(120)), black_box);
    acc.check("C7", "trajectory tasks", Some(secs(180)), trajectory_tasks);
    acc.check("C8", "demonstration augmentation", None, demonstrations);
    acc.check("C9a", "gradient-free spiral MLP", None, spiral);
    acc.check("C9b", "gradient-free MNIST MLP", Some(secs(300)), |_| mnist());
    acc.check("C10", "determinism", None, determinism);
    if acc.failures > 0 {
        println!("{} criteria failed", acc.failures);
        std::process::exit(1);
    }
}
