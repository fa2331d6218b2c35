//! End-to-end acceptance criteria. Each test prints one `PASS`/`FAIL` line
//! directly to stderr, so the summary is visible without `--nocapture`.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::Arc;

use nls_cli::{parse_config, CliError};
use nls_core::formal::{
    aligned_ode_step, build_exponent_set, formal_residual, solve_coefficients, Exponent, FormalSeries, Mu, Side,
};
use nls_core::grid::{GridFn, GridPair, MeshSpec};
use nls_core::interp::{
    check_norm_relations, check_weighted_relations, combined_interp, sinc_interp, DEFAULT_OVERSAMPLING,
};
use nls_core::profile::{
    build_profile, compute_defect, schwartz_check, AsymptoticProfile, PlaneWave, RadiiRule, Soliton,
    SpaceTimeField, ZeroMode,
};
use nls_core::scheme::{extend_time, march, BackgroundFields, MarchConfig};
use nls_core::verify::{
    convergence_study, profile_independence_check, uniqueness_experiment, ConvergencePreset, ConvergenceTable,
    StudyConfig,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(n: u32, name: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    let line = format!("acceptance {n:>2} {status} {name}: {detail}\n");
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(passed, "criterion {n} ({name}) failed: {detail}");
}

fn q(n: i64) -> Exponent {
    Exponent::from_integer(n)
}

/// Both sides of the series generated by `c = 1` on the single generator `a0`.
fn series(a0: i64, floor: i64, mu: Mu, horizon: f64, k: f64) -> (FormalSeries, FormalSeries) {
    let set = build_exponent_set(&[q(a0)], q(floor)).unwrap();
    let dt = aligned_ode_step(horizon, k);
    let one = Complex64::new(1.0, 0.0);
    let side = |s| solve_coefficients(&[(q(a0), one)], &set, mu, horizon, dt, s).unwrap();
    (side(Side::Plus), side(Side::Minus))
}

fn plane_wave_profile(mu: Mu, k: f64, rule: RadiiRule, mode: ZeroMode) -> AsymptoticProfile {
    let (p, m) = series(0, 2, mu, 1.0, k);
    build_profile(p, m, 0, &rule, mode).unwrap()
}

fn pair_at(spec: MeshSpec, field: &dyn SpaceTimeField) -> GridPair {
    GridPair::from_complex_fn(spec, |x| field.eval(x, 0.0, 0, 0).unwrap())
}

#[test]
fn criterion_01_plane_wave_exactness() {
    let mut worst_u: f64 = 0.0;
    let mut worst_w: f64 = 0.0;
    for mu in [Mu::Focusing, Mu::Defocusing] {
        let spec = MeshSpec::new(0.05, 1e-4, 10.0, 1.0).unwrap();
        let prof = plane_wave_profile(mu, spec.k, RadiiRule::Damped, ZeroMode::Blend);
        let field: Arc<dyn SpaceTimeField> = Arc::new(prof.clone());
        let bg = BackgroundFields::from_field(spec, field, mu).unwrap();
        let run = march(GridPair::zeros(spec), &bg, &MarchConfig::new(mu)).unwrap();
        run.check().unwrap();
        worst_u = worst_u.max(run.max_norm_sh());

        let interp = combined_interp(extend_time(&run, 1.0).unwrap(), Some(256), Some(256));
        for i in 0..=40 {
            for j in 0..=20 {
                // Off-node points as well as nodes.
                let x = -5.0 + 0.25 * i as f64 + if i % 2 == 1 { 0.013 } else { 0.0 };
                let t = (0.05 * j as f64 - if j % 2 == 1 { 3.3e-5 } else { 0.0 }).min(1.0);
                let w = prof.eval(x, t, 0, 0).unwrap() + interp.eval(x, t, 0, 0).unwrap();
                let exact = Complex64::new(0.0, mu.value() * t).exp();
                worst_w = worst_w.max((w - exact).norm());
            }
        }
    }
    let ok = worst_u <= 1e-8 && worst_w <= 5e-4;
    report(
        1,
        "plane wave",
        ok,
        &format!("sup ||u_j||_S = {worst_u:.3e} (<= 1e-8), sup |f + Iu - w| = {worst_w:.3e} (<= 5e-4)"),
    );
}

fn soliton_tables() -> (ConvergenceTable, ConvergenceTable) {
    let study = StudyConfig {
        half_width: 20.0,
        horizon: 0.1,
        window: 5.0,
    };
    let k_ladder = [(0.0125, 4e-3), (0.0125, 2e-3), (0.0125, 1e-3), (0.0125, 5e-4)];
    let h_ladder = [(0.2, 1e-5), (0.1, 1e-5), (0.05, 1e-5), (0.025, 1e-5)];
    (
        convergence_study(ConvergencePreset::Soliton, &k_ladder, &study).unwrap(),
        convergence_study(ConvergencePreset::Soliton, &h_ladder, &study).unwrap(),
    )
}

#[test]
fn criterion_02_soliton_convergence() {
    let (kt, ht) = soliton_tables();
    let (kr, hr) = (kt.ratios(), ht.ratios());
    let ok = kr.len() == 3
        && hr.len() == 3
        && kr.iter().all(|r| (1.7..=2.3).contains(r))
        && hr.iter().all(|r| (3.4..=4.6).contains(r));
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(", ");
    report(
        2,
        "soliton convergence",
        ok,
        &format!("k-halving ratios [{}] in [1.7, 2.3]; h-halving ratios [{}] in [3.4, 4.6]", fmt(&kr), fmt(&hr)),
    );
}

#[test]
fn criterion_03_coercivity_monitor() {
    let mut violations = 0;
    let mut levels = 0;
    for mu in [Mu::Focusing, Mu::Defocusing] {
        let spec = MeshSpec::new(0.05, 1e-4, 10.0, 1.0).unwrap();
        let prof = plane_wave_profile(mu, spec.k, RadiiRule::Damped, ZeroMode::Blend);
        let bg = BackgroundFields::from_field(spec, Arc::new(prof), mu).unwrap();
        let mut cfg = MarchConfig::new(mu);
        cfg.storage = nls_core::scheme::Storage::Endpoints;
        let run = march(GridPair::zeros(spec), &bg, &cfg).unwrap();
        violations += run.coercivity_violations();
        levels += run.ledger.iter().filter(|r| r.coercivity.is_some()).count();
    }
    let (kt, ht) = soliton_tables();
    for row in kt.rows.iter().chain(&ht.rows) {
        violations += row.coercivity_violations;
    }
    report(
        3,
        "coercivity",
        violations == 0 && levels > 0,
        &format!("{violations} violations (plane-wave levels monitored: {levels}, plus all soliton rungs)"),
    );
}

#[test]
fn criterion_04_sinc_contracts() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut node_err: f64 = 0.0;
    let mut sandwich_slack = f64::INFINITY;
    for _ in 0..100 {
        let h = [0.1, 0.25, 0.5][rng.gen_range(0..3)];
        let spec = MeshSpec::new(h, 0.01, 10.0, 0.1).unwrap();
        let width: f64 = rng.gen_range(1.0..3.0);
        let values: Vec<f64> = spec
            .xs()
            .iter()
            .map(|x| rng.gen_range(-1.0..1.0) * (-(x / width).powi(2)).exp())
            .collect();
        let u = GridFn::new(spec, values).unwrap();
        let interp = sinc_interp(&u, 256);
        for (n, x) in spec.xs().iter().enumerate() {
            node_err = node_err.max((interp.eval(*x, 0).unwrap() - u.values()[n]).abs());
        }
    }
    // Smooth data for the continuum norms: random Gaussian mixtures.
    for _ in 0..20 {
        let spec = MeshSpec::new(0.25, 0.01, 10.0, 0.1).unwrap();
        let bumps: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-2.0..2.0), rng.gen_range(0.7..1.5)))
            .collect();
        let u = GridFn::from_fn(spec, |x| {
            bumps.iter().map(|(a, c, s)| a * (-((x - c) / s).powi(2)).exp()).sum()
        });
        for rel in check_norm_relations(&u, 2, DEFAULT_OVERSAMPLING).unwrap().iter().skip(1) {
            let (lo, hi) = rel.slack();
            sandwich_slack = sandwich_slack.min(lo).min(hi);
        }
    }
    let spec = MeshSpec::new(0.25, 0.01, 10.0, 0.1).unwrap();
    let gauss = GridFn::from_fn(spec, |x| (-x * x).exp());
    let isometry = check_norm_relations(&gauss, 0, DEFAULT_OVERSAMPLING).unwrap()[0].isometry_deviation();
    let weighted = check_weighted_relations(&gauss, 1, 3, 1, DEFAULT_OVERSAMPLING).unwrap();
    let (wlo, whi) = weighted.slack();
    let ok = node_err <= 1e-14 && isometry <= 1e-6 && sandwich_slack >= -1e-8 && wlo >= -1e-8 && whi >= -1e-8;
    report(
        4,
        "sinc interpolation",
        ok,
        &format!(
            "node error {node_err:.1e}, isometry deviation {isometry:.1e}, min sandwich slack {sandwich_slack:.1e}, weighted slack ({wlo:.1e}, {whi:.1e})"
        ),
    );
}

/// `{ sum of >= 1 generators - 2l >= -m }` by layered subset sums: each
/// generator contributes any multiple, deduplicated stage by stage.
fn lattice_oracle(gens: &[Exponent], m: i64) -> BTreeSet<Exponent> {
    let low = q(-m);
    // (value, used at least one generator)
    let mut sums: BTreeSet<(Exponent, bool)> = BTreeSet::new();
    sums.insert((q(0), false));
    for g in gens {
        let mut next = BTreeSet::new();
        for &(s, used) in &sums {
            next.insert((s, used));
            let mut v = s + g;
            let mut count = 1;
            while v >= low && count <= 64 {
                next.insert((v, true));
                if *g == q(0) {
                    break;
                }
                v += g;
                count += 1;
            }
        }
        sums = next;
    }
    let mut out = BTreeSet::new();
    for (s, used) in sums {
        if !used {
            continue;
        }
        let mut v = s;
        while v >= low {
            out.insert(v);
            v -= q(2);
        }
    }
    out
}

#[test]
fn criterion_05_exponent_lattice() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let m = 10;
    let mut mismatches = 0;
    let mut largest = 0;
    for _ in 0..50 {
        let count = rng.gen_range(1..=5);
        let mut gens: BTreeSet<Exponent> = BTreeSet::new();
        while gens.len() < count {
            let den = rng.gen_range(1..=4);
            let num = rng.gen_range(0..=3 * den);
            gens.insert(Exponent::new(-num, den));
        }
        let gens: Vec<Exponent> = gens.into_iter().rev().collect();
        let set = build_exponent_set(&gens, q(m)).unwrap();
        set.check_invariants().unwrap();
        let got: BTreeSet<Exponent> = set.exponents().iter().copied().collect();
        let ordered = set.exponents().windows(2).all(|w| w[0] > w[1]);
        if got != lattice_oracle(&gens, m) || !ordered || got.len() != set.len() {
            mismatches += 1;
        }
        largest = largest.max(set.len());
    }
    report(
        5,
        "exponent lattice",
        mismatches == 0,
        &format!("{mismatches} mismatches against brute force over 50 generator sets (largest lattice {largest})"),
    );
}

#[test]
fn criterion_06_formal_residual() {
    let mut worst: f64 = 0.0;
    let mut resolved = 0;
    let mut modulus_drift: f64 = 0.0;
    for (a0, floor) in [(0, 8), (-1, 5)] {
        for mu in [Mu::Focusing, Mu::Defocusing] {
            let (p, m) = series(a0, floor, mu, 1.0, 1e-3);
            for s in [&p, &m] {
                for e in formal_residual(s, s.len() - 1) {
                    if e.resolved {
                        resolved += 1;
                        worst = worst.max(e.max_abs);
                    }
                }
                if a0 == 0 {
                    let first = s.coefficients[0].values[0].norm_sqr();
                    for v in &s.coefficients[0].values {
                        modulus_drift = modulus_drift.max((v.norm_sqr() - first).abs());
                    }
                }
            }
        }
    }
    let ok = resolved > 0 && worst <= 1e-10 && modulus_drift <= 1e-10;
    report(
        6,
        "formal solution",
        ok,
        &format!("max residual {worst:.2e} over {resolved} resolved exponents; |a0|^2 + |b0|^2 drift {modulus_drift:.1e}"),
    );
}

#[test]
fn criterion_07_positive_exponent_obstruction() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never-created");
    let text = format!(
        "[problem]\nmu = 1\npreset = \"power_law\"\n[formal]\nbeta0 = 0.25\n[output]\ndir = {:?}\n",
        out.display().to_string()
    );
    let config_rejected = matches!(
        parse_config(&text, "inline"),
        Err(CliError::Field {
            source: nls_core::Error::PositiveLeadingExponent { .. },
            ..
        })
    );
    let library_rejects = matches!(
        build_exponent_set(&[Exponent::new(1, 4)], q(4)),
        Err(nls_core::Error::PositiveLeadingExponent { .. })
    );
    let ok = config_rejected && library_rejects && !out.exists();
    report(
        7,
        "positive exponent",
        ok,
        &format!("config rejected: {config_rejected}, lattice rejected: {library_rejects}, no artifacts: {}", !out.exists()),
    );
}

#[test]
fn criterion_08_uniqueness_and_stability() {
    let mut rates = Vec::new();
    let mut identical = true;
    let mut envelope = true;
    for (h, k) in [(0.05, 1e-3), (0.025, 5e-4)] {
        let spec = MeshSpec::new(h, k, 20.0, 0.1).unwrap();
        let a = pair_at(spec, &Soliton::default());
        let bump = GridPair::from_complex_fn(spec, |x| Complex64::new(1e-6 * (-x * x).exp(), 0.0));
        let b = a.axpy(1.0, &bump).unwrap();
        let bg = BackgroundFields::zero(spec);
        let cfg = MarchConfig::new(Mu::Focusing);
        identical &= uniqueness_experiment(a.clone(), a.clone(), &bg, &cfg, 0.05).unwrap().identical;
        let r = uniqueness_experiment(a, b, &bg, &cfg, 0.05).unwrap();
        envelope &= r.envelope_holds;
        rates.push(r.rate);
    }
    let stable = (rates[0] - rates[1]).abs() <= 0.2 * rates[0].abs();
    report(
        8,
        "uniqueness",
        identical && envelope && stable,
        &format!("identical runs: {identical}, envelope within 5%: {envelope}, fitted rates {:.4} / {:.4}", rates[0], rates[1]),
    );
}

#[test]
fn criterion_09_profile_independence() {
    let pw = PlaneWave {
        amplitude: Complex64::new(1.0, 0.0),
        mu: Mu::Focusing,
    };
    let mut rows = Vec::new();
    for (h, k) in [(0.05, 1e-3), (0.025, 5e-4)] {
        let mesh = MeshSpec::new(h, k, 10.0, 1.0).unwrap();
        let a = plane_wave_profile(Mu::Focusing, k, RadiiRule::Geometric { base: 1.0, ratio: 2.0 }, ZeroMode::Cutoff);
        let b = plane_wave_profile(Mu::Focusing, k, RadiiRule::Geometric { base: 2.0, ratio: 2.0 }, ZeroMode::Cutoff);
        let r = profile_independence_check(&pw, &a, &b, &mesh, 5.0, None).unwrap();
        rows.push((r.sup_difference, r.bound));
    }
    let ok = rows.iter().all(|(d, b)| d <= b) && rows[1].0 < rows[0].0;
    report(
        9,
        "profile independence",
        ok,
        &format!(
            "differences {:.3e} (bound {:.3e}) and {:.3e} (bound {:.3e})",
            rows[0].0, rows[0].1, rows[1].0, rows[1].1
        ),
    );
}

fn seminorm_table(field: &dyn SpaceTimeField, mu: Mu, half_width: f64) -> Vec<f64> {
    let mesh = MeshSpec::new(0.05, 0.01, half_width, 1.0).unwrap();
    let d = compute_defect(field, mu, &mesh).unwrap();
    let mut out = Vec::new();
    for weight in 0..=3 {
        for order in 0..=3 {
            out.push(schwartz_check(&d, weight, order));
        }
    }
    out
}

#[test]
fn criterion_10_defect_decay() {
    let (p, m) = series(-1, 22, Mu::Focusing, 1.0, 0.01);
    let n = p.len() - 1;
    let power_law = build_profile(p, m, n, &RadiiRule::Damped, ZeroMode::Blend).unwrap();
    let cases: Vec<(&str, AsymptoticProfile)> = vec![
        ("plane wave", plane_wave_profile(Mu::Focusing, 0.01, RadiiRule::Damped, ZeroMode::Blend)),
        (
            "plane wave (cutoff)",
            plane_wave_profile(Mu::Focusing, 0.01, RadiiRule::Damped, ZeroMode::Cutoff),
        ),
        ("power law", power_law),
    ];
    let mut details = Vec::new();
    let mut ok = true;
    for (name, prof) in &cases {
        let narrow = seminorm_table(prof, Mu::Focusing, 20.0);
        let wide = seminorm_table(prof, Mu::Focusing, 40.0);
        let change = narrow.iter().zip(&wide).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let finite = narrow.iter().chain(&wide).all(|v| v.is_finite());
        ok &= finite && change < 1e-8;
        details.push(format!("{name}: change {change:.1e}"));
    }
    report(10, "defect decay", ok, &details.join("; "));
}
