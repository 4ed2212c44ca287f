//! Exit criteria. Every test prints one `PASS`/`FAIL` line and then asserts.
//!
//! Oracles here are written against plain matrices and closed-form
//! expressions, not against the library's own helpers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::TAU;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sensoradapt::cable::{solve_shape_from, Boundary, CableSpec, Contour, Shape};
use sensoradapt::controller::{motor_action, ControllerParams};
use sensoradapt::estimator::{
    cost_q, find_gamma, gradient, stability_matrix_c, stack_phi, update_step, update_step_scalar,
    GainSearchConfig, WeightBlockDiag,
};
use sensoradapt::features::{feature_dim, fourier_coeffs, reconstruct, rms_distance};
use sensoradapt::harness::{
    compare_methods, perturbed_plant, run_circular_test, run_regulation, run_relearn_test,
    target_features, trained_field, LinearPlant, Method, Plant, RegulationParams, RunStatus,
    ScenarioConfig,
};
use sensoradapt::units::{Observation, Unit};

const SEED: u64 = 7;
const SIGMA: f64 = 1.3;

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("{tag} criterion {id:>2} {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

// ---------------------------------------------------------------------------
// synthetic units

struct Synthetic {
    unit: Unit,
    truth: DVector<f64>,
    /// Rows of the stacked regression matrix and their weights, built by hand.
    phi: DMatrix<f64>,
    h: Vec<f64>,
}

fn gaussian(w: &DVector<f64>, x: &DVector<f64>) -> f64 {
    let d2: f64 = w.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * SIGMA * SIGMA)).exp()
}

fn synthetic(rng: &mut ChaCha8Rng, m: usize, n: usize, tau: usize, exact: bool) -> Synthetic {
    let truth_m = DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0));
    let w = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let mut unit = Unit::new(w.clone(), m, tau).unwrap();
    let mut rows = Vec::new();
    let mut h = Vec::new();
    let mut obs = Vec::new();
    for _ in 0..tau {
        let x = &w + DVector::from_fn(n, |_, _| rng.gen_range(-0.8..0.8));
        let u = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut delta = &truth_m * &u;
        if !exact {
            delta += DVector::from_fn(m, |_, _| rng.gen_range(-0.05..0.05));
        }
        obs.push((x, u, delta));
    }
    // pushed oldest first, so the store holds them newest first
    for (x, u, delta) in &obs {
        unit.store
            .push(Observation::new(x.clone(), u.clone(), delta.clone()).unwrap())
            .unwrap();
    }
    for (x, u, _) in obs.iter().rev() {
        let hk = gaussian(&w, x);
        for i in 0..m {
            let mut row = vec![0.0; m * n];
            for j in 0..n {
                row[i * n + j] = u[j];
            }
            rows.push(row);
            h.push(hk);
        }
    }
    let phi = DMatrix::from_fn(rows.len(), m * n, |r, c| rows[r][c]);
    unit.a_hat = DVector::from_fn(m * n, |_, _| rng.gen_range(-1.0..1.0));
    let truth = DVector::from_iterator(m * n, truth_m.transpose().iter().cloned());
    Synthetic {
        unit,
        truth,
        phi,
        h,
    }
}

/// `C = 2H - gamma H Phi Phi^T H`.
fn oracle_c(phi: &DMatrix<f64>, h: &[f64], gamma: f64) -> DMatrix<f64> {
    let hm = DMatrix::from_diagonal(&DVector::from_row_slice(h));
    let c = &hm * 2.0 - &hm * phi * phi.transpose() * &hm * gamma;
    (&c + c.transpose()) * 0.5
}

fn min_eig(a: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(a.clone())
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

fn library_gamma(s: &Synthetic) -> f64 {
    let phi = stack_phi(&s.unit.store).unwrap();
    let hb = WeightBlockDiag::from_weights(
        &s.h.iter().step_by(s.unit.m()).cloned().collect::<Vec<_>>(),
        s.unit.m(),
    )
    .unwrap();
    find_gamma(&phi, &hb, &GainSearchConfig::default()).unwrap()
}

#[test]
fn criterion_01_lyapunov_decrease() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut strict = true;
    let mut worst_identity: f64 = 0.0;
    let mut checked = 0usize;
    let mut total = 0usize;
    let mut unconverged = 0;
    for _ in 0..50 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=4);
        let mut s = synthetic(&mut rng, m, n, m * n + 4, true);
        let gamma = library_gamma(&s);
        let omega = {
            let o = s.phi.transpose() * oracle_c(&s.phi, &s.h, gamma) * &s.phi * gamma;
            (&o + o.transpose()) * 0.5
        };
        let mut err = &s.unit.a_hat - &s.truth;
        let mut iters = 0;
        while err.norm() >= 1e-8 {
            if iters > 5_000_000 {
                unconverged += 1;
                break;
            }
            let next = update_step(&s.unit, gamma, SIGMA).unwrap();
            let err_next = &next - &s.truth;
            let v0 = err.norm_squared();
            let v1 = err_next.norm_squared();
            if !(v1 < v0) {
                strict = false;
            }
            // difference of squares keeps the subtraction exact
            let dv = (&err_next - &err).dot(&(&err_next + &err));
            let predicted = -err.dot(&(&omega * &err));
            // the iterate itself is stored to about eps |a_hat|; only steps
            // where that rounding is far below the tolerance are compared
            let rounding =
                4.0 * f64::EPSILON * (next.norm() + s.truth.norm()) * err.norm() * (m * n) as f64;
            total += 1;
            if rounding < 1e-10 * predicted.abs() {
                checked += 1;
                worst_identity = worst_identity.max((dv - predicted).abs() / predicted.abs());
            }
            s.unit.a_hat = next;
            err = err_next;
            iters += 1;
        }
    }
    let elapsed = start.elapsed();
    let pass = strict && unconverged == 0 && worst_identity <= 1e-9 && within(elapsed, 10.0);
    verdict(
        1,
        "Lyapunov decrease",
        pass,
        &format!(
            "strict={strict} unconverged={unconverged} identity_rel_err={worst_identity:.2e} on {checked}/{total} steps, {:.2}s",
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_matrix_scalar_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=5);
        let tau = m * n + rng.gen_range(1..=8);
        let s = synthetic(&mut rng, m, n, tau, false);
        let gamma = rng.gen_range(0.01..0.5);
        let a = update_step(&s.unit, gamma, SIGMA).unwrap();
        let b = update_step_scalar(&s.unit, gamma, SIGMA).unwrap();
        worst = worst.max((&a - &b).norm() / a.norm().max(f64::MIN_POSITIVE));
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "matrix/scalar update equivalence",
        worst <= 1e-12 && within(elapsed, 1.0),
        &format!("max rel diff {worst:.2e}, {:.3}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_03_gain_search_soundness() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let mut all_positive = true;
    let mut smallest: f64 = f64::INFINITY;
    for _ in 0..100 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=4);
        let s = synthetic(&mut rng, m, n, m * n + 4, false);
        let gamma = library_gamma(&s);
        let e = min_eig(&oracle_c(&s.phi, &s.h, gamma));
        smallest = smallest.min(e);
        all_positive &= e > 0.0;
    }
    // 1 x 1 negative control: C = 2h - gamma h^2 u^2 is negative beyond 2 / (h u^2)
    let mut control_ok = true;
    for _ in 0..20 {
        let s = synthetic(&mut rng, 1, 1, 1, true);
        let (h, u) = (s.h[0], s.phi[(0, 0)]);
        let bound = 2.0 / (h * u * u);
        let found = library_gamma(&s).min(1.0);
        let above = bound * 1.01;
        let lib_c = stability_matrix_c(
            &s.phi,
            &WeightBlockDiag::from_weights(&s.h, 1).unwrap(),
            above,
        )
        .unwrap();
        let oracle_min = min_eig(&oracle_c(&s.phi, &s.h, above));
        control_ok &=
            oracle_min < 0.0 && lib_c.min_eigenvalue < 0.0 && !lib_c.is_positive_definite();
        control_ok &= found < bound;
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "gain search soundness",
        all_positive && control_ok && within(elapsed, 5.0),
        &format!(
            "min eig(C) over stores {smallest:.3e}, negative control {}, {:.3}s",
            if control_ok {
                "indefinite"
            } else {
                "NOT indefinite"
            },
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_04_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=4);
        let s = synthetic(&mut rng, m, n, m * n + 4, false);
        let g = gradient(&s.unit, SIGMA).unwrap();
        let step = 1e-6;
        let fd = DVector::from_fn(m * n, |k, _| {
            let mut plus = s.unit.clone();
            plus.a_hat[k] += step;
            let mut minus = s.unit.clone();
            minus.a_hat[k] -= step;
            (cost_q(&plus, SIGMA).unwrap() - cost_q(&minus, SIGMA).unwrap()) / (2.0 * step)
        });
        worst = worst.max((&g - &fd).norm() / g.norm().max(1e-12));
    }
    verdict(
        4,
        "analytic gradient vs finite differences",
        worst <= 1e-6,
        &format!("max rel err {worst:.2e}"),
    );
}

#[test]
fn criterion_05_exact_model_contraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let (m, n) = (6, 3);
    let a = DMatrix::from_fn(
        m,
        n,
        |i, j| if i == j { 1.0 } else { 0.0 } + rng.gen_range(-0.3..0.3),
    );
    let plant = LinearPlant::new(
        a.clone(),
        DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0)),
    )
    .unwrap();
    let x_star = DVector::from_fn(n, |_, _| rng.gen_range(-0.5..0.5));
    let y_star = plant.sense(&x_star).unwrap();
    let params = ControllerParams {
        lambda: 0.1,
        reg: 0.0,
        ..ControllerParams::default()
    };
    let mut x = DVector::zeros(n);
    let mut worst: f64 = 0.0;
    let mut saturated = false;
    for _ in 0..50 {
        let y = plant.sense(&x).unwrap();
        let e0 = (&y - &y_star).norm();
        saturated |= (&y - &y_star).amax() > params.sat_bound;
        let u = motor_action(&a, &y, &y_star, &params).unwrap();
        x = plant.step(&x, &u).unwrap();
        let e1 = (plant.sense(&x).unwrap() - &y_star).norm();
        worst = worst.max(((e1 / e0) - 0.9).abs() / 0.9);
    }
    verdict(
        5,
        "exact-model contraction",
        worst <= 1e-10 && !saturated,
        &format!("max rel deviation of per-step ratio from 0.9: {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// cable

fn chain_energy(shape: &Shape) -> f64 {
    let b = &shape.boundary;
    let mut t: Vec<f64> = Vec::new();
    t.extend(b.base_angle);
    t.extend(shape.angles.iter());
    t.extend(b.tip_angle);
    t.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / shape.segment_length
}

fn chain_tip(base: [f64; 2], angles: &DVector<f64>, l: f64) -> Vector2<f64> {
    angles.iter().fold(Vector2::new(base[0], base[1]), |p, &t| {
        p + Vector2::new(t.cos(), t.sin()) * l
    })
}

/// Random perturbation of the angles projected back onto the tip constraint
/// with Gauss-Newton.
fn feasible_perturbation(rng: &mut ChaCha8Rng, shape: &Shape, amp: f64) -> Option<DVector<f64>> {
    let l = shape.segment_length;
    let target = Vector2::new(shape.boundary.tip[0], shape.boundary.tip[1]);
    let mut th =
        &shape.angles + DVector::from_fn(shape.angles.len(), |_, _| rng.gen_range(-amp..amp));
    for _ in 0..50 {
        let g = chain_tip(shape.boundary.base, &th, l) - target;
        if g.norm() < 1e-14 {
            return Some(th);
        }
        let j = DMatrix::from_fn(2, th.len(), |r, c| {
            if r == 0 {
                -l * th[c].sin()
            } else {
                l * th[c].cos()
            }
        });
        let jjt = &j * j.transpose();
        let lam = jjt.try_inverse()? * DVector::from_row_slice(&[g.x, g.y]);
        th -= j.transpose() * lam;
    }
    None
}

fn random_boundary(rng: &mut ChaCha8Rng, spec: &CableSpec) -> Boundary {
    let base = [0.1, 0.4];
    let sep = spec.length * rng.gen_range(0.3..0.95);
    let dir = rng.gen_range(-0.6..0.6_f64);
    let clamped_tip = rng.gen_bool(0.5);
    Boundary {
        base,
        base_angle: Some(rng.gen_range(-0.8..0.8)),
        tip: [base[0] + sep * dir.cos(), base[1] + sep * dir.sin()],
        tip_angle: clamped_tip.then(|| rng.gen_range(-0.8..0.8)),
    }
}

/// Solves from a gentle arch along the chord.
fn solve_random(rng: &mut ChaCha8Rng, spec: &CableSpec) -> (Boundary, sensoradapt::Result<Shape>) {
    let b = random_boundary(rng, spec);
    let heading = (b.tip[1] - b.base[1]).atan2(b.tip[0] - b.base[0]);
    let n = spec.segments;
    let guess = DVector::from_fn(n, |i, _| {
        heading + 0.6 * (0.5 - (i as f64 + 0.5) / n as f64)
    });
    (b, solve_shape_from(spec, &b, &guess))
}

#[test]
fn criterion_06_cable_solver() {
    let spec = CableSpec::default();
    let l = spec.length;
    // straight: both ends clamped along the chord at full extension
    let mut straight_err: f64 = 0.0;
    for angle in [0.0, 0.5, -1.2] {
        let base = [0.1, 0.4];
        let tip = [base[0] + l * f64::cos(angle), base[1] + l * f64::sin(angle)];
        let b = Boundary {
            base,
            base_angle: Some(angle),
            tip,
            tip_angle: Some(angle),
        };
        let guess = DVector::from_fn(spec.segments, |i, _| {
            angle + 0.3 * (i as f64 / spec.segments as f64 - 0.5)
        });
        let s = solve_shape_from(&spec, &b, &guess).unwrap();
        straight_err = straight_err.max(chain_energy(&s));
        for (k, p) in s.vertices().iter().enumerate() {
            let t = k as f64 * spec.segment_length();
            straight_err = straight_err.max((p[0] - base[0] - t * angle.cos()).abs());
            straight_err = straight_err.max((p[1] - base[1] - t * angle.sin()).abs());
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let mut worst_length: f64 = 0.0;
    let mut worst_violation: f64 = f64::NEG_INFINITY;
    let mut perturbations = 0;
    let mut failures = 0;
    for k in 0..100 {
        let (b, shape) = solve_random(&mut rng, &spec);
        let Ok(shape) = shape else {
            failures += 1;
            continue;
        };
        let verts = shape.vertices();
        let arc: f64 = verts
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt())
            .sum();
        let end = verts.last().unwrap();
        let tip_gap = ((end[0] - b.tip[0]).powi(2) + (end[1] - b.tip[1]).powi(2)).sqrt();
        worst_length = worst_length.max((arc - l).abs() / l).max(tip_gap / l);
        if k < 20 {
            let e0 = chain_energy(&shape);
            for _ in 0..100 {
                let th = feasible_perturbation(&mut rng, &shape, 2e-3).expect("projection failed");
                let perturbed = Shape {
                    angles: th,
                    ..shape.clone()
                };
                worst_violation = worst_violation.max(e0 - chain_energy(&perturbed));
                perturbations += 1;
            }
        }
    }
    let pass =
        straight_err <= 1e-8 && failures == 0 && worst_length <= 1e-6 && worst_violation <= 0.0;
    verdict(
        6,
        "cable solver",
        pass,
        &format!(
            "straight err {straight_err:.1e}, {failures} solver failures, length/tip rel err {worst_length:.1e}, max energy drop over {perturbations} perturbations {worst_violation:.2e}"
        ),
    );
}

#[test]
fn criterion_07_fourier_round_trip() {
    let h = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let deg = rng.gen_range(0..=h);
        let cx: Vec<f64> = (0..2 * deg + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cy: Vec<f64> = (0..2 * deg + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let alpha = 100;
        let eval = |c: &[f64], t: f64| {
            let mut v = c[0];
            for k in 1..=deg {
                v += c[2 * k - 1] * (TAU * k as f64 * t).cos()
                    + c[2 * k] * (TAU * k as f64 * t).sin();
            }
            v
        };
        let pts = (0..alpha)
            .map(|i| {
                let t = i as f64 / alpha as f64;
                [eval(&cx, t), eval(&cy, t)]
            })
            .collect();
        let contour = Contour::new(pts);
        let f = fourier_coeffs(&contour, h).unwrap();
        let cols = 2 * h + 1;
        for c in 0..cols {
            let ex = cx.get(c).copied().unwrap_or(0.0);
            let ey = cy.get(c).copied().unwrap_or(0.0);
            worst = worst
                .max((f.coeffs[c] - ex).abs())
                .max((f.coeffs[cols + c] - ey).abs());
        }
        worst = worst.max(rms_distance(&reconstruct(&f, alpha).unwrap(), &contour).unwrap());
    }
    let m = feature_dim(h);
    let law =
        m == 18 && m * 2 == 36 && 36 < 40 && (1..=6).all(|k| feature_dim(k) == 2 * (2 * k + 1));
    let cfg = ScenarioConfig::single_robot(SEED);
    let preset = cfg.m() == 18 && cfg.m() * cfg.n() < cfg.tau;
    verdict(
        7,
        "Fourier round trip",
        worst <= 1e-8 && law && preset,
        &format!(
            "max coefficient/contour err {worst:.1e}, m(4)={m}, mn={} < tau={}",
            cfg.m() * cfg.n(),
            cfg.tau
        ),
    );
}

// ---------------------------------------------------------------------------
// scenarios

#[test]
fn criterion_08_g_switching() {
    let start = Instant::now();
    let cfg = ScenarioConfig::single_robot(SEED);
    let plant = cfg.plant().unwrap();
    let (col, _) = trained_field(&cfg, &plant).unwrap();
    let out = run_circular_test(&cfg, &plant, &col.field).unwrap();
    let elapsed = start.elapsed();
    let drops = out
        .switches
        .iter()
        .filter(|s| s.g_after < s.g_before)
        .count();
    let listing: Vec<String> = out
        .switches
        .iter()
        .map(|s| format!("{}->{} {:.2e}->{:.2e}", s.from, s.to, s.g_before, s.g_after))
        .collect();
    let pass = !out.switches.is_empty() && drops == out.switches.len() && within(elapsed, 120.0);
    verdict(
        8,
        "G drops at every unit switch",
        pass,
        &format!(
            "{drops}/{} switches [{}], {:.1}s",
            out.switches.len(),
            listing.join(", "),
            elapsed.as_secs_f64()
        ),
    );
}

fn monotone_after(energies: &[f64], skip: usize) -> bool {
    energies
        .iter()
        .skip(skip)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| *w[1] <= 1.05 * *w[0])
}

#[test]
fn criterion_09_regulation() {
    let mut failures = Vec::new();
    let mut runs = 0;
    for cfg in [
        ScenarioConfig::single_robot(SEED),
        ScenarioConfig::dual_robot(SEED),
    ] {
        assert_eq!(cfg.controller.lambda, 0.1);
        assert_eq!(cfg.controller.sat_bound, 2.0);
        assert_eq!(cfg.step_budget, 2000);
        assert_eq!(cfg.targets.len(), 4);
        let plant = cfg.plant().unwrap();
        let (col, _) = trained_field(&cfg, &plant).unwrap();
        let params = RegulationParams::from_config(&cfg).unwrap();
        let targets = target_features(&plant, &cfg.target_vecs()).unwrap();
        for (k, y_star) in targets.iter().enumerate() {
            let out = run_regulation(
                &plant,
                &col.field,
                Method::AdaptiveUnits,
                &cfg.start_vec(),
                y_star,
                &params,
            )
            .unwrap();
            runs += 1;
            let reached = out.final_e < 1e-3 * out.e0 && out.steps <= 2000;
            let mono = monotone_after(&out.trace.energies(), 10);
            if !(reached && mono) {
                failures.push(format!(
                    "{} target {k}: reached={reached} monotone={mono}",
                    cfg.scenario
                ));
            }
        }
    }
    verdict(
        9,
        "shape regulation n=2 and n=6",
        failures.is_empty(),
        &format!("{}/{runs} runs ok {failures:?}", runs - failures.len()),
    );
}

#[test]
fn criterion_10_method_comparison() {
    let mut problems = Vec::new();
    let mut rows = 0;
    for cfg in [
        ScenarioConfig::single_robot(SEED),
        ScenarioConfig::dual_robot(SEED),
    ] {
        let plant = cfg.plant().unwrap();
        let (col, _) = trained_field(&cfg, &plant).unwrap();
        let (table, _) = compare_methods(&cfg, &plant, &col.field).unwrap();
        for row in &table.rows {
            rows += 1;
            if row.status != Some(RunStatus::Converged) {
                problems.push(format!(
                    "{} {} target {} did not converge",
                    cfg.scenario, row.method, row.target
                ));
            }
        }
        for ours in table.rows_for(Method::AdaptiveUnits) {
            for other in table
                .rows
                .iter()
                .filter(|r| r.target == ours.target && r.method != Method::AdaptiveUnits)
            {
                let orders = (ours.final_e / other.final_e).log10().abs();
                if !(orders <= 1.0) {
                    problems.push(format!(
                        "{} target {}: adaptive {:.2e} vs {} {:.2e}",
                        cfg.scenario, ours.target, ours.final_e, other.method, other.final_e
                    ));
                }
            }
        }
    }
    verdict(
        10,
        "adaptive units vs Broyden and RLS",
        problems.is_empty(),
        &format!("{rows} runs, problems {problems:?}"),
    );
}

#[test]
fn criterion_11_relearning() {
    let cfg = ScenarioConfig::single_robot(SEED);
    let plant = cfg.plant().unwrap();
    let perturbed = perturbed_plant(&cfg, &plant).unwrap();
    let (mut col, _) = trained_field(&cfg, &plant).unwrap();
    let out = run_relearn_test(&cfg, &plant, &perturbed, &mut col.field).unwrap();
    let early = out.first_exceed.is_some_and(|k| k <= 5);
    let improved = out.retrains > 0 && out.probe_g_after < out.probe_g_before;
    verdict(
        11,
        "relearning after anchor shift",
        early && improved,
        &format!(
            "first exceedance at step {:?}, {} retrains, probe G {:.3e} -> {:.3e}",
            out.first_exceed, out.retrains, out.probe_g_before, out.probe_g_after
        ),
    );
}
