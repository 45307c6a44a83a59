//! Acceptance suite: one line per criterion, nonzero exit if any fails.

mod common;

use std::collections::{BTreeMap, VecDeque};
use std::time::Instant;

use lds_bandit::harness::{build_scenario, run_diagnostics, ExperimentConfig};
use lds_bandit::kalman::{riccati_residual, solve_dare, steady_predictor_step};
use lds_bandit::sysid::{bias_term, TrajectoryWindow};
use lds_bandit::trading::{construct_trading, van_loan_noise};
use lds_bandit::{
    build_regressor, run_experiment, true_g, Action, ContinuousMarketSpec, DiscreteLinearSystem, PolicyKind, RngSeed,
    SystemParams,
};
use nalgebra::{DMatrix, DVector};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn trading() -> DiscreteLinearSystem {
    lds_bandit::build_trading_system(&ContinuousMarketSpec::default()).unwrap()
}

fn c1_construction() -> Outcome {
    let start = Instant::now();
    let c = construct_trading(&ContinuousMarketSpec::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut eig: Vec<f64> = lds_bandit::linalg::eigenvalues(c.system.gamma())
        .unwrap()
        .iter()
        .map(|l| l.re)
        .collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let want = [0.9512, 0.6065, 0.0, 0.0];
    let err = eig.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    check(
        c.system.state_dim() == 4 && err <= 1e-3 && elapsed < 1.0,
        format!("d = {}, eigenvalues {eig:.4?}, max error {err:.2e} (tol 1e-3), {elapsed:.3}s (limit 1s)", c.system.state_dim()),
    )
}

fn c2_similarity() -> Outcome {
    let start = Instant::now();
    let c = construct_trading(&ContinuousMarketSpec::default()).map_err(|e| e.to_string())?;
    let full = common::difference_model(&c.augmented);
    let full_sigma = common::lyapunov_doubling(&full.gamma, &full.q);
    let lhs = common::context_autocovariance(&full.gamma, &full.c, &full_sigma, 5);
    let rhs = common::reduced_autocovariance(&c.system, 5);
    let err = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).amax()).fold(0.0, f64::max);
    let elapsed = start.elapsed().as_secs_f64();
    check(err <= 1e-8 && elapsed < 1.0, format!("lags 0..5 max |Δ| = {err:.2e} (tol 1e-8), {elapsed:.3}s"))
}

fn c3_van_loan() -> Outcome {
    let spec = ContinuousMarketSpec::default();
    let c = construct_trading(&spec).map_err(|e| e.to_string())?;
    let oracle = common::noise_integral(&spec, 1e-13);
    let err = (&c.discretization.xi - &oracle).norm();
    let scalar = lds_bandit::trading::ContinuousSystem {
        f: DMatrix::from_element(1, 1, -1.0),
        b_mu: DVector::zeros(1),
        sigma_c: DMatrix::from_element(1, 1, 1.0),
    };
    let xi = van_loan_noise(&scalar, 0.5).map_err(|e| e.to_string())?[(0, 0)];
    let scalar_err = (xi - (1.0 - (-1.0_f64).exp()) / 2.0).abs();
    check(
        err <= 1e-9 && scalar_err <= 1e-12,
        format!("trading ‖Ξ − quadrature‖_F = {err:.2e} (tol 1e-9); scalar error {scalar_err:.2e} (tol 1e-12)"),
    )
}

fn scalar_system(gamma: f64, q: f64, c: f64, r: f64) -> DiscreteLinearSystem {
    DiscreteLinearSystem::new(SystemParams {
        gamma: DMatrix::from_element(1, 1, gamma),
        c_theta: DMatrix::from_element(1, 1, c),
        mu_xi: DVector::zeros(1),
        q: DMatrix::from_element(1, 1, q),
        mu_phi: DVector::zeros(1),
        r_phi: DMatrix::from_element(1, 1, r),
        sigma_eta: 0.0,
        actions: vec![Action::new(DVector::from_element(1, 1.0), 0.0)],
        mu_0: DVector::zeros(1),
        sigma_0: DMatrix::from_element(1, 1, 1.0),
    })
    .unwrap()
}

fn c4_dare() -> Outcome {
    let sys = trading();
    let f = solve_dare(&sys).map_err(|e| e.to_string())?;
    let residual = riccati_residual(&sys, &f.p).unwrap();
    // scalar fixed point P ← Γ²P + Q − Γ²C²P²/(C²P + R), iterated to exhaustion
    let (g, q, c, r) = (0.5_f64, 1.0, 1.0, 1.0);
    let mut p = q;
    for _ in 0..10_000 {
        p = g * g * p + q - (g * c * p).powi(2) / (c * c * p + r);
    }
    let root = (0.25 + (0.0625_f64 + 4.0).sqrt()) / 2.0;
    let got = solve_dare(&scalar_system(g, q, c, r)).unwrap().p[(0, 0)];
    let err = (got - p).abs();
    check(
        residual <= 1e-8 && err <= 1e-9 && (p - root).abs() <= 1e-12,
        format!("trading residual {residual:.2e} (tol 1e-8); scalar P = {got:.12} vs oracle {p:.12} (|Δ| {err:.1e}, tol 1e-9)"),
    )
}

fn c5_identification() -> Outcome {
    let sys = trading();
    let f = solve_dare(&sys).unwrap();
    let (s, lambda) = (10, 0.1);
    let mut worst_batch = 0.0_f64;
    let mut details = Vec::new();
    let mut ok = true;
    for arm in 0..2 {
        let g = true_g(&sys, &f, s, arm).unwrap();
        let (mut small, mut large) = (Vec::new(), Vec::new());
        for run in 0..20 {
            let (est, regs, rewards) = common::fixed_arm_identification(&sys, s, lambda, arm, RngSeed(500), run, 5000);
            let (early, _, _) = common::fixed_arm_identification(&sys, s, lambda, arm, RngSeed(500), run, 500);
            for (e, n) in [(&early, 500), (&est, 5000)] {
                let batch = common::batch_ridge(&regs[..n], &rewards[..n], lambda);
                worst_batch = worst_batch.max((e.g_hat() - batch).amax());
            }
            small.push((early.g_hat() - &g).norm());
            large.push((est.g_hat() - &g).norm());
        }
        let (m500, m5000) = (common::median(&mut small), common::median(&mut large));
        ok &= m5000 < m500;
        details.push(format!("arm {arm}: median error {m500:.3} @500 → {m5000:.3} @5000"));
    }
    ok &= worst_batch <= 1e-9;
    check(ok, format!("{}; recursive vs batch max |Δ| {worst_batch:.2e} (tol 1e-9)", details.join(", ")))
}

/// Residual `X_t − G_aΘ_t − ⟨c_a, L^s ẑ_{t−s}⟩` over `rounds` rounds after a
/// burn-in, with the steady-state predictor driving `ẑ`.
fn residuals(sys: &DiscreteLinearSystem, arm: usize, s: usize, burn_in: usize, rounds: usize, seed: u64) -> Vec<f64> {
    let f = solve_dare(sys).unwrap();
    let g = true_g(sys, &f, s, arm).unwrap();
    let mut rng = RngSeed(seed).stream(0);
    let mut state = sys.init_state(&mut rng);
    let mut z_hat = sys.mu_0().clone();
    let mut contexts: VecDeque<DVector<f64>> = VecDeque::new();
    let mut z_hats: VecDeque<DVector<f64>> = VecDeque::new();
    let mut out = Vec::with_capacity(rounds);
    for t in 0..burn_in + rounds + s {
        z_hats.push_back(z_hat.clone());
        let sample = sys.step(&mut state, arm, &mut rng).unwrap();
        if contexts.len() == s {
            if t >= burn_in + s {
                let theta = build_regressor(&contexts, s, sys.context_dim()).unwrap();
                let window = TrajectoryWindow {
                    contexts: contexts.iter().cloned().collect(),
                    z_hat_start: z_hats[0].clone(),
                    reward: sample.reward,
                };
                let bias = bias_term(sys, &f, s, &window.z_hat_start, arm).unwrap();
                out.push(window.reward - g.dot(theta.as_vector()) - bias);
            }
            contexts.pop_front();
            z_hats.pop_front();
        }
        z_hat = steady_predictor_step(sys, &f, &z_hat, &sample.context);
        contexts.push_back(sample.context);
    }
    out
}

fn noisy_system() -> DiscreteLinearSystem {
    DiscreteLinearSystem::new(SystemParams {
        gamma: DMatrix::from_row_slice(2, 2, &[0.8, 0.3, -0.2, 0.6]),
        c_theta: DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
        mu_xi: DVector::from_vec(vec![0.1, -0.2]),
        q: DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]),
        mu_phi: DVector::from_element(1, 0.2),
        r_phi: DMatrix::from_element(1, 1, 0.4),
        sigma_eta: 0.25,
        actions: vec![Action::new(DVector::from_vec(vec![0.3, -1.0]), 0.5)],
        mu_0: DVector::zeros(2),
        sigma_0: DMatrix::identity(2, 2),
    })
    .unwrap()
}

fn c6_residual_moments() -> Outcome {
    let mut ok = true;
    let mut details = Vec::new();
    let cases: [(&str, DiscreteLinearSystem, usize); 3] = [("trading arm 0", trading(), 0), ("trading arm 1", trading(), 1), ("noisy", noisy_system(), 0)];
    for (name, sys, arm) in cases {
        let f = solve_dare(&sys).unwrap();
        let c = &sys.actions()[arm].c;
        let want = (c.transpose() * &f.p * c)[0] + sys.sigma_eta();
        let eps = residuals(&sys, arm, 10, 1000, 100_000, 11);
        let (mean, mean_se) = common::batch_means(&eps, 100);
        let sq: Vec<f64> = eps.iter().map(|e| e * e).collect();
        let (var, var_se) = common::batch_means(&sq, 100);
        let pass = mean.abs() <= 3.0 * mean_se && (var - want).abs() <= 3.0 * var_se;
        ok &= pass;
        details.push(format!(
            "{name}: mean {mean:.4} (3SE {:.4}), var {var:.4} vs {want:.4} (3SE {:.4})",
            3.0 * mean_se,
            3.0 * var_se
        ));
    }
    check(ok, details.join("; "))
}

fn c7_c8_experiment() -> (Outcome, Outcome) {
    let start = Instant::now();
    let cfg = ExperimentConfig { horizon: Some(10_000), runs: 100, seed: RngSeed(2024), ..Default::default() };
    let res = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let elapsed = start.elapsed().as_secs_f64();
    let fin = |k| res.final_cumulative_of(k).unwrap();
    let mean = |k| res.curve(k).unwrap().cum_mean[9_999];
    let (g1, se1) = common::paired_gap(fin(PolicyKind::Sbetc), fin(PolicyKind::Oracle));
    let (g2, se2) = common::paired_gap(fin(PolicyKind::Ucb), fin(PolicyKind::Sbetc));
    let c7 = check(
        g1 >= 3.0 * se1 && g2 >= 3.0 * se2 && elapsed < 300.0,
        format!(
            "R_n oracle {:.1} < SB-ETC {:.1} < UCB {:.1}; gaps {g1:.1} (3SE {:.1}), {g2:.1} (3SE {:.1}); {elapsed:.1}s",
            mean(PolicyKind::Oracle),
            mean(PolicyKind::Sbetc),
            mean(PolicyKind::Ucb),
            3.0 * se1,
            3.0 * se2
        ),
    );
    let sb = res.curve(PolicyKind::Sbetc).unwrap().window_mean(9_000, 10_000);
    let or = res.curve(PolicyKind::Oracle).unwrap().window_mean(9_000, 10_000);
    let rel = (sb - or).abs() / or;
    let c8 = check(rel <= 0.25, format!("rounds 9000–10000: SB-ETC {sb:.4} vs oracle {or:.4}, relative gap {:.1}% (tol 25%)", rel * 100.0));
    (c7, c8)
}

fn c9_bound_direction() -> Outcome {
    let cfg = ExperimentConfig { horizon: Some(10_000), runs: 50, seed: RngSeed(99), ..Default::default() };
    let scenario = build_scenario(&cfg.scenario).map_err(|e| e.to_string())?;
    let runs = run_diagnostics(&cfg, &scenario).map_err(|e| e.to_string())?;
    let mut per_arm: BTreeMap<usize, (usize, usize, f64)> = BTreeMap::new();
    for r in &runs {
        for (a, holds) in r.bound_holds().into_iter().enumerate() {
            if r.diagnostic.suboptimal_samples[a] + r.diagnostic.skipped[a] == 0 {
                continue;
            }
            let e = per_arm.entry(a).or_default();
            e.1 += 1;
            e.0 += holds as usize;
            e.2 += r.diagnostic.bound_factor[a];
        }
    }
    let ok = !per_arm.is_empty() && per_arm.values().all(|(h, n, _)| *h as f64 >= 0.9 * *n as f64);
    let detail = per_arm.iter().map(|(a, (h, n, b))| format!("arm {a}: {h}/{n} (mean factor {:.3})", b / *n as f64)).collect::<Vec<_>>().join(", ");
    check(ok, format!("bound ≥ selection frequency in {detail} seeds (need ≥ 90%)"))
}

fn c10_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = serde_json::json!({"horizon": 2000, "runs": 8, "seed": 31, "output_dir": out, "decision_logs": true});
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg.to_string()).unwrap();
    let snapshot = || -> Result<BTreeMap<String, Vec<u8>>, String> {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_lds-bandit"))
            .arg("run")
            .arg("--config")
            .arg(&cfg_path)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(String::from_utf8_lossy(&status.stderr).into_owned());
        }
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(&out).unwrap() {
            let path = entry.unwrap().path();
            files.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap());
        }
        std::fs::remove_dir_all(&out).unwrap();
        Ok(files)
    };
    let first = snapshot()?;
    let second = snapshot()?;
    let csvs = first.keys().filter(|k| k.ends_with(".csv")).count();
    check(
        csvs >= 3 && first == second,
        format!("{} files ({csvs} CSV) byte-identical across two CLI invocations: {}", first.len(), first == second),
    )
}

fn main() {
    let (c7, c8) = c7_c8_experiment();
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "trading-system construction", c1_construction()),
        (2, "similarity invariance", c2_similarity()),
        (3, "Van Loan correctness", c3_van_loan()),
        (4, "DARE", c4_dare()),
        (5, "identification consistency", c5_identification()),
        (6, "residual moments", c6_residual_moments()),
        (7, "regret ordering", c7),
        (8, "convergence to oracle", c8),
        (9, "bound diagnostic direction", c9_bound_direction()),
        (10, "determinism", c10_determinism()),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
