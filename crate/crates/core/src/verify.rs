//! End-to-end checks: continuum residuals, refinement studies, perturbation
//! growth, and independence of `w = f + I u-hat` from the cutoff choice.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::formal::Mu;
use crate::grid::{norm_l2h_pair, GridPair, MeshSpec};
use crate::interp::{combined_interp, DEFAULT_WINDOW};
use crate::profile::{AsymptoticProfile, SpaceTimeField, Soliton};
use crate::scheme::{
    extend_time, march, march_with, BackgroundFields, MarchConfig, Stepper, Storage,
};

/// Tensor lattice of evaluation points.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub xs: Vec<f64>,
    pub ts: Vec<f64>,
}

impl Lattice {
    /// `nx` points on `[x0, x1]` and `nt` points on `[t0, t1]`, endpoints included.
    pub fn uniform(x: (f64, f64), nx: usize, t: (f64, f64), nt: usize) -> Self {
        let line = |(a, b): (f64, f64), n: usize| -> Vec<f64> {
            if n <= 1 {
                return vec![a];
            }
            (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
        };
        Self {
            xs: line(x, nx),
            ts: line(t, nt),
        }
    }

    fn cell(&self) -> f64 {
        let span = |v: &[f64]| {
            if v.len() > 1 {
                (v[v.len() - 1] - v[0]) / (v.len() - 1) as f64
            } else {
                1.0
            }
        };
        span(&self.xs) * span(&self.ts)
    }
}

/// Equation whose residual is evaluated.
pub enum Equation<'a> {
    /// `i w_t + w_xx + mu |w|^2 w` for the given `w`.
    Nls(&'a dyn SpaceTimeField),
    /// `i u_t + u_xx + mu (u^2 ū + u^2 f̄ + f^2 ū + 2 u f ū + 2 u f f̄) + g` with
    /// `g = i f_t + f_xx + mu |f|^2 f`.
    Gnls {
        u: &'a dyn SpaceTimeField,
        f: &'a dyn SpaceTimeField,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPoint {
    pub t: f64,
    pub x: f64,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub lattice: Lattice,
    pub points: Vec<ResidualPoint>,
    pub max: f64,
    /// `sqrt(sum |r|^2 dx dt)` over the lattice.
    pub l2: f64,
}

impl ResidualReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,res1,res2")?;
        for p in &self.points {
            writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", p.t, p.x, p.value.re, p.value.im)?;
        }
        Ok(())
    }
}

fn nls_operator(w: &dyn SpaceTimeField, mu: f64, x: f64, t: f64) -> Result<Complex64> {
    let v = w.eval(x, t, 0, 0)?;
    Ok(Complex64::i() * w.eval(x, t, 0, 1)? + w.eval(x, t, 2, 0)? + (v * v) * v.conj() * mu)
}

pub fn pde_residual(eq: &Equation<'_>, mu: Mu, lattice: &Lattice) -> Result<ResidualReport> {
    let m = mu.value();
    let mut points = Vec::with_capacity(lattice.xs.len() * lattice.ts.len());
    for &t in &lattice.ts {
        for &x in &lattice.xs {
            let value = match eq {
                Equation::Nls(w) => nls_operator(*w, m, x, t)?,
                Equation::Gnls { u, f } => {
                    let uv = u.eval(x, t, 0, 0)?;
                    let fv = f.eval(x, t, 0, 0)?;
                    let lin = Complex64::i() * u.eval(x, t, 0, 1)? + u.eval(x, t, 2, 0)?;
                    let cubic = uv * uv * uv.conj()
                        + uv * uv * fv.conj()
                        + fv * fv * uv.conj()
                        + uv * fv * uv.conj() * 2.0
                        + uv * fv * fv.conj() * 2.0;
                    lin + cubic * m + nls_operator(*f, m, x, t)?
                }
            };
            points.push(ResidualPoint { t, x, value });
        }
    }
    let max = points.iter().fold(0.0f64, |a, p| a.max(p.value.norm()));
    let l2 = (points.iter().map(|p| p.value.norm_sqr()).sum::<f64>() * lattice.cell()).sqrt();
    Ok(ResidualReport {
        lattice: lattice.clone(),
        points,
        max,
        l2,
    })
}

/// Pointwise sum of fields.
pub struct Superposition {
    pub parts: Vec<Arc<dyn SpaceTimeField>>,
}

impl SpaceTimeField for Superposition {
    fn eval(&self, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        self.parts.iter().map(|p| p.eval(x, t, dx, dt)).sum()
    }
}

/// Problems with a closed-form reference solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConvergencePreset {
    /// `u0 = sqrt(2) sech x`, `mu = 1`, `f = g = 0`.
    Soliton,
    /// `u0 = 0`, `f = g = 0`.
    Zero,
}

impl ConvergencePreset {
    pub fn exact(&self, x: f64, t: f64) -> Complex64 {
        match self {
            ConvergencePreset::Soliton => Soliton::default()
                .eval(x, t, 0, 0)
                .unwrap_or(Complex64::new(f64::NAN, f64::NAN)),
            ConvergencePreset::Zero => Complex64::new(0.0, 0.0),
        }
    }

    pub fn mu(&self) -> Mu {
        Mu::Focusing
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub k: f64,
    pub error: f64,
    /// `error(previous rung) / error(this rung)`.
    pub ratio: Option<f64>,
    /// Levels at which the discrete coercivity inequality failed.
    pub coercivity_violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.ratio).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "h,k,error,ratio")?;
        for r in &self.rows {
            let ratio = r.ratio.map_or(String::new(), |v| format!("{v:.17e}"));
            writeln!(w, "{:.17e},{:.17e},{:.17e},{ratio}", r.h, r.k, r.error)?;
        }
        Ok(())
    }
}

/// Domain and window of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub half_width: f64,
    pub horizon: f64,
    /// Errors are measured on `|x| <= window`.
    pub window: f64,
}

/// Marches the preset on every rung and records the sup-norm error on
/// `[-window, window] x [0, T]` (all nodes, all levels).
pub fn convergence_study(
    preset: ConvergencePreset,
    ladder: &[(f64, f64)],
    study: &StudyConfig,
) -> Result<ConvergenceTable> {
    if ladder.len() < 2 {
        return Err(Error::LadderTooShort(ladder.len()));
    }
    let mut rungs = ladder.to_vec();
    rungs.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(rungs.len());
    for (h, k) in rungs {
        let spec = MeshSpec::new(h, k, study.half_width, study.horizon)?;
        let u0 = GridPair::from_complex_fn(spec, |x| preset.exact(x, 0.0));
        let bg = BackgroundFields::zero(spec);
        let mut cfg = MarchConfig::new(preset.mu());
        cfg.storage = Storage::Endpoints;
        cfg.norm_pairs.clear();
        let window: Vec<usize> = (0..spec.n_space)
            .filter(|&n| spec.x(n).abs() <= study.window + 1e-12)
            .collect();
        let mut error: f64 = 0.0;
        let run = march_with(u0, &bg, &cfg, |j, u| {
            let t = spec.t(j);
            for &n in &window {
                error = error.max((u.value(n) - preset.exact(spec.x(n), t)).norm());
            }
        })?;
        run.check()?;
        let ratio = rows.last().map(|p| p.error / error);
        rows.push(ConvergenceRow {
            h,
            k,
            error,
            ratio,
            coercivity_violations: run.coercivity_violations(),
        });
    }
    Ok(ConvergenceTable { rows })
}

/// Growth of `q = u_a - u_b` between two runs on a common background.
#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    /// `(t_j, ||q_j||_{L^2_h})`.
    pub q_norms: Vec<(f64, f64)>,
    /// Least-squares rate `C` in `||q_j|| ~ exp(C t_j) ||q_0||`.
    pub rate: f64,
    pub tolerance: f64,
    /// `max_j ||q_j|| / (exp(C t_j) ||q_0||)`.
    pub envelope_ratio: f64,
    pub envelope_holds: bool,
    /// Every level of both runs is bitwise equal.
    pub identical: bool,
}

impl UniquenessReport {
    /// `||q(T)|| / ||q(0)||`.
    pub fn amplification(&self) -> f64 {
        match (self.q_norms.first(), self.q_norms.last()) {
            (Some(a), Some(b)) if a.1 > 0.0 => b.1 / a.1,
            _ => 0.0,
        }
    }
}

/// Fits `log(eta_j / eta_0) = C t_j` through the origin, using levels with
/// `eta_j > 100 eps`.
pub fn fit_growth_rate(q_norms: &[(f64, f64)]) -> f64 {
    let Some(&(_, q0)) = q_norms.first() else {
        return 0.0;
    };
    if !(q0 > 1e2 * f64::EPSILON) {
        return 0.0;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, q) in q_norms {
        if q > 1e2 * f64::EPSILON && t > 0.0 {
            num += t * (q / q0).ln();
            den += t * t;
        }
    }
    if den > 0.0 { num / den } else { 0.0 }
}

/// Runs both initial data in lockstep on `bg`.
pub fn uniqueness_experiment(
    u0_a: GridPair,
    u0_b: GridPair,
    bg: &BackgroundFields,
    cfg: &MarchConfig,
    tolerance: f64,
) -> Result<UniquenessReport> {
    let spec = *bg.spec();
    let mut a = Stepper::new(u0_a, bg, cfg)?;
    let mut b = Stepper::new(u0_b, bg, cfg)?;
    let diff = |a: &GridPair, b: &GridPair| -> Result<(f64, bool)> {
        let q = a.axpy(-1.0, b)?;
        Ok((norm_l2h_pair(&q), a == b))
    };
    let (q0, same0) = diff(a.current(), b.current())?;
    let mut q_norms = vec![(0.0, q0)];
    let mut identical = same0;
    while !a.finished() {
        a.step()?;
        b.step()?;
        let (q, same) = diff(a.current(), b.current())?;
        identical &= same;
        q_norms.push((spec.t(a.level()), q));
    }
    let rate = fit_growth_rate(&q_norms);
    let envelope_ratio = if q0 > 0.0 {
        q_norms
            .iter()
            .map(|&(t, q)| q / ((rate * t).exp() * q0))
            .fold(0.0, f64::max)
    } else if identical {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(UniquenessReport {
        q_norms,
        rate,
        tolerance,
        envelope_ratio,
        envelope_holds: envelope_ratio <= 1.0 + tolerance,
        identical,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndependenceReport {
    /// `sup |w_a - w_b|` over window nodes and all levels.
    pub sup_difference: f64,
    /// `5 (k + h^2)`.
    pub bound: f64,
    /// Per-pipeline `sup |w - w_exact|` when an exact reference is supplied.
    pub reference_errors: Option<(f64, f64)>,
}

/// Solves `w = f + u` with two different profiles for the same data `w0`
/// and compares `f + I u-hat` at the mesh nodes of `[-window, window] x [0, T]`.
pub fn profile_independence_check(
    w0: &dyn SpaceTimeField,
    a: &AsymptoticProfile,
    b: &AsymptoticProfile,
    mesh: &MeshSpec,
    window: f64,
    reference: Option<&dyn SpaceTimeField>,
) -> Result<IndependenceReport> {
    let xs = mesh.xs();
    let nodes: Vec<usize> = (0..mesh.n_space)
        .filter(|&n| xs[n].abs() <= window + 1e-12)
        .collect();
    let pipeline = |p: &AsymptoticProfile| -> Result<Vec<Vec<Complex64>>> {
        let field: Arc<dyn SpaceTimeField> = Arc::new(p.clone());
        let bg = BackgroundFields::from_field(*mesh, field, p.mu())?;
        let f0 = p.eval_slice(&xs, 0.0, 0, 0)?;
        let w = w0.eval_slice(&xs, 0.0, 0, 0)?;
        let u0 = GridPair::from_complex_fn(*mesh, |x| {
            let n = ((x - xs[0]) / mesh.h).round() as usize;
            w[n] - f0[n]
        });
        let mut cfg = MarchConfig::new(p.mu());
        cfg.norm_pairs.clear();
        let run = march(u0, &bg, &cfg)?;
        run.check()?;
        let interp = combined_interp(extend_time(&run, 1.0)?, Some(DEFAULT_WINDOW), Some(DEFAULT_WINDOW));
        (0..=mesh.last_level())
            .map(|j| {
                let t = mesh.t(j);
                let sel: Vec<f64> = nodes.iter().map(|&n| xs[n]).collect();
                let f = p.eval_slice(&sel, t, 0, 0)?;
                sel.iter()
                    .zip(f)
                    .map(|(&x, fv)| Ok(fv + interp.eval(x, t, 0, 0)?))
                    .collect()
            })
            .collect()
    };
    let wa = pipeline(a)?;
    let wb = pipeline(b)?;
    let mut sup: f64 = 0.0;
    let mut errs = (0.0f64, 0.0f64);
    for (j, (ra, rb)) in wa.iter().zip(&wb).enumerate() {
        let t = mesh.t(j);
        for (i, (va, vb)) in ra.iter().zip(rb).enumerate() {
            sup = sup.max((va - vb).norm());
            if let Some(r) = reference {
                let e = r.eval(xs[nodes[i]], t, 0, 0)?;
                errs.0 = errs.0.max((va - e).norm());
                errs.1 = errs.1.max((vb - e).norm());
            }
        }
    }
    Ok(IndependenceReport {
        sup_difference: sup,
        bound: 5.0 * (mesh.k + mesh.h * mesh.h),
        reference_errors: reference.map(|_| errs),
    })
}
