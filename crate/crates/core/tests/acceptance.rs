//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL ...` line before asserting.

mod oracle;
mod support;

use std::process::Command;

use nonlocal_fv::analysis::{convergence_study_1d, convergence_study_2d, ConvergenceTable};
use nonlocal_fv::cli::cmd_entropy_check;
use nonlocal_fv::config::RunConfig;
use nonlocal_fv::flux::{max_stable_lambda, FluxFamily, NumericalFlux, SchemeConfig};
use nonlocal_fv::grid::Grid1d;
use nonlocal_fv::kernel::{convolve, KernelWeights, QuadratureRule};
use nonlocal_fv::model::{builtin_kk1d, kk1d_kernel, LocalFlux};
use nonlocal_fv::monitor::{check_convolution_bounds, check_stability, DiagnosticBounds};
use nonlocal_fv::solver1d::Solver1d;
use nonlocal_fv::solver2d::Solver2d;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FAMILIES: [FluxFamily; 2] = [FluxFamily::LaxFriedrichs, FluxFamily::Godunov];

fn report(n: usize, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn with_flux(config: &RunConfig, flux: FluxFamily) -> RunConfig {
    let mut c = config.clone();
    c.scheme.flux = flux;
    c
}

fn rates_line(table: &ConvergenceTable) -> String {
    let e: Vec<String> = table.errors().iter().map(|v| format!("{v:.3e}")).collect();
    let a: Vec<String> = table.rates().iter().map(|v| format!("{v:.2}")).collect();
    format!("errors [{}] rates [{}]", e.join(", "), a.join(", "))
}

fn within(values: &[f64], targets: &[f64], tol: f64) -> bool {
    values.len() == targets.len() && values.iter().zip(targets).all(|(v, t)| (v - t).abs() <= tol)
}

fn study(config: &RunConfig, levels: usize) -> ConvergenceTable {
    let model = config.build_model().unwrap();
    let data = config.initial_data().unwrap();
    let c = config.converge.as_ref().unwrap();
    let t = config.run.t_final;
    if model.dimension() == 1 {
        let g = &config.grid;
        convergence_study_1d(&model, (g.lo, g.hi), &data, &config.scheme, c.base_dx, levels, t).unwrap()
    } else {
        let domain = config.square_domain().unwrap();
        convergence_study_2d(&model, domain, &data, &config.scheme, c.base_dx, levels, t).unwrap()
    }
}

#[test]
fn criterion_1_one_dimensional_rates() {
    let config = RunConfig::preset("paper-1d").unwrap();
    let table = study(&config, 4);
    let rates = table.rates();
    let errors = table.errors();
    let reference_errors = [5.85e-4, 2.34e-4, 9.48e-5, 4.16e-5];
    let rates_ok = rates.iter().all(|a| *a >= 1.0) && within(&rates, &[1.32, 1.31, 1.18], 0.25);
    let errors_ok = errors.len() == 4
        && errors
            .iter()
            .zip(reference_errors)
            .all(|(e, r)| *e <= 3.0 * r && *e >= r / 3.0);
    let pass = rates_ok && errors_ok;
    report(1, pass, &rates_line(&table));
    assert!(pass, "one-dimensional study outside the rate and error windows");
}

#[test]
fn criterion_2_two_dimensional_rates() {
    let config = RunConfig::preset("paper-2d").unwrap();
    let reduced = study(&config, 3);
    let full = study(&config, 4);
    let window = |t: &ConvergenceTable, targets: &[f64]| {
        let r = t.rates();
        within(&r, targets, 0.15) && r.iter().all(|a| *a > 0.5)
    };
    let pass_full = window(&full, &[0.57, 0.60, 0.62]);
    let pass_reduced = window(&reduced, &[0.57, 0.60]);
    let pass = pass_full && pass_reduced;
    report(
        2,
        pass,
        &format!("full {} | reduced {}", rates_line(&full), rates_line(&reduced)),
    );
    assert!(pass, "two-dimensional study outside the rate window");
}

#[test]
fn criterion_3_stability_monitors() {
    let mut lines = Vec::new();
    let mut pass = true;
    let one_d = RunConfig::preset("paper-1d").unwrap();
    let two_d = RunConfig::preset("paper-2d").unwrap();
    for flux in FAMILIES {
        let c = with_flux(&one_d, flux);
        assert_eq!(c.grid.dx, Some(0.0125));
        let model = c.build_model().unwrap();
        let solver = Solver1d::new(model.clone(), c.grid_1d().unwrap(), c.scheme).unwrap();
        let mut opts = c.run_options().unwrap();
        opts.monitor = true;
        let out = solver
            .run(solver.project(&c.initial_data().unwrap()).unwrap(), &opts)
            .unwrap();
        assert_eq!(out.state.t, 0.3);
        let bounds = DiagnosticBounds::one_d(&model, solver.bank().derivative_norms, &out.diagnostics);
        match check_stability(&out.diagnostics, &bounds, true) {
            Ok(r) => lines.push(format!(
                "kk1d {}: min {:.1e} drift {:.1e} linf {:.3} tv {:.3}",
                flux.name(),
                r.min_value,
                r.l1_drift,
                r.linf_ratio,
                r.tv_ratio.unwrap()
            )),
            Err(e) => {
                pass = false;
                lines.push(format!("kk1d {}: {e}", flux.name()));
            }
        }

        let c = with_flux(&two_d, flux);
        assert_eq!(c.grid.dx, Some(0.05));
        let solver = Solver2d::new(c.build_model().unwrap(), c.grid_2d().unwrap(), c.scheme).unwrap();
        let mut opts = c.run_options().unwrap();
        opts.monitor = true;
        let out = solver
            .run(solver.project(&c.initial_data().unwrap()).unwrap(), &opts)
            .unwrap();
        assert_eq!(out.state.t, 0.1);
        let bounds = solver.diagnostic_bounds(&out.diagnostics);
        match check_stability(&out.diagnostics, &bounds, false) {
            Ok(r) => lines.push(format!(
                "kk2d {}: min {:.1e} drift {:.1e} linf {:.3}",
                flux.name(),
                r.min_value,
                r.l1_drift,
                r.linf_ratio
            )),
            Err(e) => {
                pass = false;
                lines.push(format!("kk2d {}: {e}", flux.name()));
            }
        }
    }
    report(3, pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_4_entropy_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let mut lines = Vec::new();
    let mut pass = true;
    for flux in FAMILIES {
        let mut c = with_flux(&RunConfig::preset("paper-1d").unwrap(), flux);
        c.grid.dx = Some(0.025);
        assert_eq!(c.run.t_final, 0.3);
        match cmd_entropy_check(&c, 21, dir.path()) {
            Ok(worst) => lines.push(format!("{}: max residual {worst:.2e}", flux.name())),
            Err(e) => {
                pass = false;
                lines.push(format!("{}: {e}", flux.name()));
            }
        }
    }
    report(4, pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_5_oracle_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let rules = [QuadratureRule::Left, QuadratureRule::Right, QuadratureRule::Mean];
    let mut step_gap: f64 = 0.0;
    for trial in 0..20 {
        let scheme = SchemeConfig {
            flux: FAMILIES[trial % 2],
            quadrature: rules[trial % 3],
            ..SchemeConfig::default()
        };
        let grid = Grid1d::new(2.4, 3.0, 12).unwrap();
        let model = builtin_kk1d();
        let solver = Solver1d::new(model.clone(), grid, scheme).unwrap();
        let mut u: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..12).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let mut state = solver.state_from_cells(u.clone()).unwrap();
        for _ in 0..3 {
            state = solver.step(&state).unwrap();
            u = oracle::naive_step(&u, &model, &scheme, &grid, solver.lambda(), solver.lambda());
            for (fast, slow) in state.u.iter().flatten().zip(u.iter().flatten()) {
                step_gap = step_gap.max((fast - slow).abs());
            }
        }
    }
    let mu = kk1d_kernel();
    let mut conv_gap: f64 = 0.0;
    for trial in 0..50 {
        let dx = [0.0125, 0.025, 0.05][trial % 3];
        let n = rng.gen_range(5..60);
        let field: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let w = KernelWeights::build(&mu, dx).unwrap();
        let fast = convolve(&field, &w, rules[trial % 3]);
        let slow = oracle::naive_convolve(&field, &mu, dx, rules[trial % 3]);
        assert_eq!(fast.len(), slow.len());
        for (a, b) in fast.iter().zip(&slow) {
            conv_gap = conv_gap.max((a - b).abs());
        }
    }
    let pass = step_gap <= 1e-14 && conv_gap <= 1e-14;
    report(
        5,
        pass,
        &format!("step max gap {step_gap:.1e}, convolution max gap {conv_gap:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_convolution_difference_bounds() {
    let mut c = RunConfig::preset("paper-1d").unwrap();
    c.run.convolution_bounds = true;
    c.run.monitor = true;
    assert_eq!(c.grid.dx, Some(0.0125));
    let solver = Solver1d::new(c.build_model().unwrap(), c.grid_1d().unwrap(), c.scheme).unwrap();
    let out = solver
        .run(
            solver.project(&c.initial_data().unwrap()).unwrap(),
            &c.run_options().unwrap(),
        )
        .unwrap();
    // the first row is the initial state; every later row is one step
    let steps = &out.diagnostics[1..];
    let checked = steps.iter().filter(|d| d.convolution_bounds.is_some()).count();
    let result = check_convolution_bounds(&out.diagnostics);
    let pass = result.is_ok() && checked == steps.len() && checked > 1;
    let detail = match &result {
        Ok((first, second)) => format!("{checked} steps, worst excess {first:.2e} / {second:.2e}"),
        Err(e) => e.to_string(),
    };
    report(6, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_7_update_map_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let model = builtin_kk1d();
    let sigma_lo = model.components.iter().map(|c| c.sigma.sigma_min()).fold(1.0, f64::min);
    let mut worst = f64::INFINITY;
    for trial in 0..200 {
        let scheme = SchemeConfig {
            flux: FAMILIES[trial % 2],
            ..SchemeConfig::default()
        };
        let lambda = max_stable_lambda(&model, &scheme).unwrap();
        let flux = NumericalFlux::new(&scheme, lambda);
        let sigma = [(); 3].map(|_| rng.gen_range(sigma_lo..=1.0));
        let nu = [(); 2].map(|_| rng.gen_range(-1.0..=1.0));
        let u = [(); 3].map(|_| rng.gen_range(0.0..1.0));
        for d in support::update_map_partials(&flux, &LocalFlux::Identity, lambda, sigma, nu, u) {
            worst = worst.min(d);
        }
    }
    let pass = worst >= -1e-8;
    report(7, pass, &format!("200 stencils, smallest partial {worst:.3e}"));
    assert!(pass);
}

#[test]
fn criterion_8_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut files = 0;
    for preset in ["paper-1d", "paper-2d"] {
        let dirs = ["a", "b"].map(|s| dir.path().join(format!("{preset}-{s}")));
        for d in &dirs {
            let status = Command::new(env!("CARGO_BIN_EXE_nonlocal-fv"))
                .args(["run", "--preset", preset, "--out", d.to_str().unwrap()])
                .status()
                .unwrap();
            assert!(status.success(), "{preset} run failed");
        }
        let mut names: Vec<_> = std::fs::read_dir(&dirs[0])
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        for name in names {
            files += 1;
            let a = std::fs::read(dirs[0].join(&name)).unwrap();
            let b = std::fs::read(dirs[1].join(&name)).ok();
            if b.as_ref() != Some(&a) {
                mismatches.push(format!("{preset}/{}", name.to_string_lossy()));
            }
        }
    }
    let pass = mismatches.is_empty() && files > 0;
    report(
        8,
        pass,
        &format!("{files} files compared, mismatches [{}]", mismatches.join(", ")),
    );
    assert!(pass);
}
