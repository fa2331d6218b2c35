//! Pipeline orchestration: formal series, profile, scheme, smoothing and
//! verification, with every artifact written into one run directory.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use nls_core::formal::{
    aligned_ode_step, build_exponent_set, formal_residual, solve_coefficients, FormalSeries, Mu, Side,
};
use nls_core::grid::{schwartz_seminorm, GridPair, MeshSpec};
use nls_core::interp::combined_interp;
use nls_core::profile::{build_profile, AsymptoticProfile, PlaneWave, Soliton, SpaceTimeField, ZeroField, ZeroMode};
use nls_core::scheme::{extend_time, march, BackgroundFields, MarchConfig, SolverRun, Storage, Termination};
use nls_core::verify::{
    convergence_study, pde_residual, profile_independence_check, uniqueness_experiment, ConvergencePreset,
    Equation, Lattice, StudyConfig,
};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::{parse_config, ExperimentConfig, Mode, Preset, RadiiConfig, ZeroModeConfig};
use crate::error::{CliError, Stage};
use crate::plot::emit_plotdata;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.toml";

/// One pass/fail assertion of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub mode: Mode,
    pub checks: Vec<Check>,
    pub summary: BTreeMap<String, f64>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() { 0 } else { 1 }
    }
}

/// Contents of `manifest.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub mode: Mode,
    /// `pass`, `fail` or `error`.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    #[serde(default)]
    pub checks: Vec<Check>,
    pub config: ExperimentConfig,
}

/// Reloads the configuration echoed into a manifest.
pub fn config_from_manifest(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let m: Manifest = toml::from_str(&text).map_err(|e| CliError::Parse {
        origin: path.display().to_string(),
        message: e.to_string(),
    })?;
    let echoed = toml::to_string(&m.config).expect("config serializes");
    parse_config(&echoed, &path.display().to_string())
}

fn at<T>(stage: Stage, r: nls_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Stage { stage, source })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(CliError::io(path))?))
}

struct Run<'a> {
    cfg: &'a ExperimentConfig,
    mode: Mode,
    spec: MeshSpec,
    mu: Mu,
    dir: PathBuf,
    checks: Vec<Check>,
    summary: BTreeMap<String, f64>,
    series: Vec<&'static str>,
}

impl<'a> Run<'a> {
    fn check(&mut self, name: &str, passed: bool, detail: String) {
        if passed {
            info!("check {name}: pass ({detail})");
        } else {
            log::warn!("check {name}: FAIL ({detail})");
        }
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn note(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    fn write_manifest(&self, status: &str, failure: Option<&CliError>) -> Result<(), CliError> {
        let failed_stage = match failure {
            Some(CliError::Stage { stage, .. }) => Some(stage.name().to_string()),
            Some(_) => Some(Stage::Output.name().to_string()),
            None => None,
        };
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            mode: self.mode,
            status: status.to_string(),
            failed_stage,
            error: failure.map(|e| e.to_string()),
            summary: self.summary.clone(),
            checks: self.checks.clone(),
            config: self.cfg.clone(),
        };
        let path = self.dir.join(MANIFEST);
        let text = toml::to_string(&manifest).expect("manifest serializes");
        fs::write(&path, text).map_err(CliError::io(path))
    }

    fn series(&self) -> Result<Option<(FormalSeries, FormalSeries)>, CliError> {
        if !self.cfg.problem.preset.has_profile() {
            return Ok(None);
        }
        let gens = at(Stage::Formal, self.cfg.generators())?;
        let floor = at(Stage::Formal, self.cfg.floor())?;
        let set = at(Stage::Formal, build_exponent_set(&gens, floor))?;
        let dt = self
            .cfg
            .formal
            .ode_step
            .unwrap_or_else(|| aligned_ode_step(self.spec.horizon, self.spec.k));
        let side = |list: &[crate::config::Coefficient], side: Side| -> Result<FormalSeries, CliError> {
            let initial = list
                .iter()
                .map(|c| Ok((c.exponent.parse()?, c.value())))
                .collect::<nls_core::Result<Vec<_>>>();
            let initial = at(Stage::Formal, initial)?;
            at(
                Stage::Formal,
                solve_coefficients(&initial, &set, self.mu, self.spec.horizon, dt, side),
            )
        };
        let plus = side(&self.cfg.formal.plus, Side::Plus)?;
        let minus = side(&self.cfg.formal.minus, Side::Minus)?;
        info!("formal: {} exponents, ode step {dt:e}", set.len());
        Ok(Some((plus, minus)))
    }

    fn profile(
        &self,
        series: &(FormalSeries, FormalSeries),
        radii: &RadiiConfig,
    ) -> Result<AsymptoticProfile, CliError> {
        let (plus, minus) = series.clone();
        let n = self.cfg.formal.truncation.unwrap_or(plus.len().saturating_sub(1));
        let mode = match self.cfg.profile.zero_mode {
            ZeroModeConfig::Blend => ZeroMode::Blend,
            ZeroModeConfig::Cutoff => ZeroMode::Cutoff,
        };
        let mut p = at(Stage::Profile, build_profile(plus, minus, n, &radii.rule(), mode))?;
        p.cutoff_sharpness = self.cfg.profile.cutoff_sharpness;
        Ok(p)
    }

    /// Closed-form solution of the full equation, when the preset has one.
    fn exact(&self) -> Option<Box<dyn SpaceTimeField>> {
        match self.cfg.problem.preset {
            Preset::PlaneWave => Some(Box::new(PlaneWave {
                amplitude: Complex64::new(self.cfg.problem.amplitude, 0.0),
                mu: self.mu,
            })),
            Preset::Soliton => Some(Box::new(Soliton::default())),
            Preset::Zero => Some(Box::new(ZeroField)),
            Preset::PowerLaw | Preset::Custom => None,
        }
    }

    /// `u0 = w0 - f(., 0)`; `w0 = f(., 0)` for series-only data.
    fn initial_correction(&self, f: &dyn SpaceTimeField) -> Result<GridPair, CliError> {
        let xs = self.spec.xs();
        let w0 = match self.cfg.problem.preset {
            Preset::PlaneWave | Preset::Soliton => {
                let exact = self.exact().expect("preset has a closed form");
                at(Stage::Scheme, exact.eval_slice(&xs, 0.0, 0, 0))?
            }
            _ => return Ok(GridPair::zeros(self.spec)),
        };
        let f0 = at(Stage::Scheme, f.eval_slice(&xs, 0.0, 0, 0))?;
        let h = self.spec.h;
        let x0 = xs[0];
        Ok(GridPair::from_complex_fn(self.spec, |x| {
            let n = ((x - x0) / h).round() as usize;
            w0[n] - f0[n]
        }))
    }

    fn march_config(&self) -> MarchConfig {
        let s = &self.cfg.scheme;
        let mut m = MarchConfig::new(self.mu);
        m.norm_pairs = s.norm_pairs.iter().map(|&[w, o]| (w, o as usize)).collect();
        m.blow_up_factor = s.blow_up_factor;
        m.solve_tol = s.solve_tol;
        m.k_ceiling = s.k_ceiling;
        m.monitor_coercivity = s.monitor_coercivity;
        m.storage = Storage::All;
        m
    }

    fn background(&self) -> Result<(Arc<dyn SpaceTimeField>, BackgroundFields, Option<AsymptoticProfile>), CliError> {
        match self.series()? {
            Some(series) => {
                self.write_series(&series)?;
                let p = self.profile(&series, &self.cfg.profile.radii)?;
                let field: Arc<dyn SpaceTimeField> = Arc::new(p.clone());
                let bg = at(Stage::Profile, BackgroundFields::from_field(self.spec, field.clone(), self.mu))?;
                Ok((field, bg, Some(p)))
            }
            None => Ok((Arc::new(ZeroField), BackgroundFields::zero(self.spec), None)),
        }
    }

    fn write_series(&self, (plus, minus): &(FormalSeries, FormalSeries)) -> Result<(), CliError> {
        let stride = (plus.samples() / 100).max(1);
        for (name, s) in [("series_plus.txt", plus), ("series_minus.txt", minus)] {
            let path = self.dir.join(name);
            let mut w = create(&path)?;
            s.write_table(&mut w, stride).map_err(CliError::io(&path))?;
            w.flush().map_err(CliError::io(&path))?;
        }
        Ok(())
    }

    fn solve(&mut self) -> Result<(), CliError> {
        let (field, bg, profile) = self.background()?;
        if let Some(p) = &profile {
            let resolved = formal_residual(&p.plus, p.truncation)
                .into_iter()
                .chain(formal_residual(&p.minus, p.truncation))
                .filter(|e| e.resolved)
                .fold(0.0f64, |a, e| a.max(e.max_abs));
            self.note("formal_residual_resolved", resolved);
            self.note("truncation", p.truncation as f64);
            let mut worst: f64 = 0.0;
            for j in 0..=self.spec.last_level() {
                let g = at(Stage::Profile, bg.level(j))?.g;
                worst = worst.max(schwartz_seminorm(&g.re, 3, 3)).max(schwartz_seminorm(&g.im, 3, 3));
            }
            self.note("defect_schwartz_3_3", worst);
        }

        let u0 = self.initial_correction(field.as_ref())?;
        let cfg = self.march_config();
        let run = at(Stage::Scheme, march(u0, &bg, &cfg))?;
        self.write_norms(&run)?;
        self.write_snapshots(&run)?;
        self.note("attained_time", run.attained_time);
        self.note("max_norm_sh", run.max_norm_sh());
        self.note("coercivity_violations", run.coercivity_violations() as f64);
        self.note("boundary_mass_fraction", run.boundary_mass_fraction());
        self.note("gronwall_constant", run.gronwall_constant());
        let detail = match &run.termination {
            Termination::Completed => format!("reached t = {}", run.attained_time),
            Termination::Aborted(e) => format!("aborted at t = {}: {e}", run.attained_time),
        };
        self.check("completed", run.completed(), detail);
        if cfg.monitor_coercivity {
            let v = run.coercivity_violations();
            self.check("coercivity", v == 0, format!("{v} violating levels"));
        }
        let exact_profile = match self.cfg.problem.preset {
            Preset::Zero => true,
            Preset::PlaneWave => self.cfg.profile.zero_mode == ZeroModeConfig::Blend,
            _ => false,
        };
        if exact_profile {
            let sup = run.max_norm_sh();
            let tol = self.cfg.verify.correction_tol;
            self.check("correction", sup <= tol, format!("sup ||u_j||_S = {sup:e} (tol {tol:e})"));
        }
        if !run.completed() {
            return Ok(());
        }

        let ext = at(Stage::Interp, extend_time(&run, self.cfg.interp.time_cutoff_sharpness))?;
        let interp = combined_interp(ext, self.cfg.interp.window_x, self.cfg.interp.window_t);
        let v = &self.cfg.verify;
        let lattice = Lattice::uniform(
            (-v.window, v.window),
            v.residual_nx,
            (0.0, self.spec.horizon),
            v.residual_nt,
        );
        let report = at(
            Stage::Verify,
            pde_residual(
                &Equation::Gnls {
                    u: &interp,
                    f: field.as_ref(),
                },
                self.mu,
                &lattice,
            ),
        )?;
        let path = self.dir.join("residuals.csv");
        let mut w = create(&path)?;
        report.write_csv(&mut w).map_err(CliError::io(&path))?;
        w.flush().map_err(CliError::io(&path))?;
        self.note("residual_max", report.max);
        self.note("residual_l2", report.l2);
        if let Some(exact) = self.exact() {
            let mut err: f64 = 0.0;
            for &t in &lattice.ts {
                for &x in &lattice.xs {
                    let w = at(Stage::Verify, field.eval(x, t, 0, 0))?
                        + at(Stage::Verify, interp.eval(x, t, 0, 0))?;
                    err = err.max((w - at(Stage::Verify, exact.eval(x, t, 0, 0))?).norm());
                }
            }
            self.note("reference_error", err);
        }
        Ok(())
    }

    fn write_norms(&mut self, run: &SolverRun) -> Result<(), CliError> {
        let path = self.dir.join("norms.csv");
        let mut w = create(&path)?;
        let io = CliError::io(&path);
        let mut header = String::from("t,norm_sh");
        for (wt, o) in &run.config.norm_pairs {
            header.push_str(&format!(",schwartz_{wt}_{o}"));
        }
        let body = (|| -> std::io::Result<()> {
            writeln!(w, "{header}")?;
            for r in &run.ledger {
                write!(w, "{:.17e},{:.17e}", r.t, r.norm_sh)?;
                for s in &r.seminorms {
                    write!(w, ",{s:.17e}")?;
                }
                writeln!(w)?;
            }
            w.flush()
        })();
        body.map_err(io)?;
        self.series.push("norms");
        Ok(())
    }

    fn write_snapshots(&mut self, run: &SolverRun) -> Result<(), CliError> {
        let stride = self
            .cfg
            .output
            .snapshot_stride
            .unwrap_or_else(|| (self.spec.last_level() / 10).max(1));
        let path = self.dir.join("snapshots.csv");
        let mut w = create(&path)?;
        let io = CliError::io(&path);
        let body = (|| -> std::io::Result<()> {
            writeln!(w, "t,x,u1,u2")?;
            for (j, u) in &run.levels {
                if j % stride != 0 && *j != self.spec.last_level() {
                    continue;
                }
                let t = self.spec.t(*j);
                for n in 0..self.spec.n_space {
                    let v = u.value(n);
                    writeln!(w, "{t:.17e},{:.17e},{:.17e},{:.17e}", self.spec.x(n), v.re, v.im)?;
                }
            }
            w.flush()
        })();
        body.map_err(io)?;
        self.series.push("snapshots");
        Ok(())
    }

    fn converge(&mut self) -> Result<(), CliError> {
        let preset = match self.cfg.problem.preset {
            Preset::Soliton => ConvergencePreset::Soliton,
            Preset::Zero => ConvergencePreset::Zero,
            other => {
                return Err(CliError::Stage {
                    stage: Stage::Verify,
                    source: nls_core::Error::Precondition(format!(
                        "converge mode needs a closed-form reference; preset {other:?} has none"
                    )),
                })
            }
        };
        let ladder: Vec<(f64, f64)> = self.cfg.verify.ladder.iter().map(|&[h, k]| (h, k)).collect();
        let study = StudyConfig {
            half_width: self.spec.half_width,
            horizon: self.spec.horizon,
            window: self.cfg.verify.window,
        };
        let table = at(Stage::Verify, convergence_study(preset, &ladder, &study))?;
        let path = self.dir.join("convergence.csv");
        let mut w = create(&path)?;
        table.write_csv(&mut w).map_err(CliError::io(&path))?;
        w.flush().map_err(CliError::io(&path))?;
        self.series.push("convergence");

        let violations: usize = table.rows.iter().map(|r| r.coercivity_violations).sum();
        self.check("coercivity", violations == 0, format!("{violations} violating levels"));
        if preset == ConvergencePreset::Zero {
            let worst = table.rows.iter().fold(0.0f64, |a, r| a.max(r.error));
            self.check("zero_errors", worst == 0.0, format!("max error {worst:e}"));
            return Ok(());
        }
        let same_h = table.rows.windows(2).all(|p| p[0].h == p[1].h);
        let same_k = table.rows.windows(2).all(|p| p[0].k == p[1].k);
        let band = match (same_h, same_k) {
            (true, false) => Some(("k_order", self.cfg.verify.k_band)),
            (false, true) => Some(("h_order", self.cfg.verify.h_band)),
            _ => None,
        };
        let ratios = table.ratios();
        for (i, r) in ratios.iter().enumerate() {
            self.note(&format!("ratio_{}", i + 1), *r);
        }
        if let Some((name, [lo, hi])) = band {
            let ok = ratios.iter().all(|r| (lo..=hi).contains(r));
            self.check(name, ok, format!("ratios {ratios:?} against [{lo}, {hi}]"));
        }
        Ok(())
    }

    fn uniqueness(&mut self) -> Result<(), CliError> {
        let (field, bg, _) = self.background()?;
        let u0 = self.initial_correction(field.as_ref())?;
        let delta = self.cfg.verify.perturbation;
        let bump = GridPair::from_complex_fn(self.spec, |x| Complex64::new(delta * (-x * x).exp(), 0.0));
        let perturbed = at(Stage::Scheme, u0.axpy(1.0, &bump))?;
        let mut cfg = self.march_config();
        cfg.storage = Storage::Endpoints;
        let tol = self.cfg.verify.envelope_tol;

        let same = at(Stage::Verify, uniqueness_experiment(u0.clone(), u0.clone(), &bg, &cfg, tol))?;
        self.check("identical_runs", same.identical, format!("max ||q|| = {:e}", max_q(&same.q_norms)));

        let report = at(Stage::Verify, uniqueness_experiment(u0, perturbed, &bg, &cfg, tol))?;
        let path = self.dir.join("uniqueness.csv");
        let mut w = create(&path)?;
        let body = (|| -> std::io::Result<()> {
            writeln!(w, "t,q_norm")?;
            for (t, q) in &report.q_norms {
                writeln!(w, "{t:.17e},{q:.17e}")?;
            }
            w.flush()
        })();
        body.map_err(CliError::io(&path))?;
        self.series.push("uniqueness");
        self.note("growth_rate", report.rate);
        self.note("envelope_ratio", report.envelope_ratio);
        self.note("amplification", report.amplification());
        self.check(
            "envelope",
            report.envelope_holds,
            format!("max ratio {} (tol {tol})", report.envelope_ratio),
        );
        Ok(())
    }

    fn independence(&mut self) -> Result<(), CliError> {
        let Some(series) = self.series()? else {
            return Err(CliError::Stage {
                stage: Stage::Profile,
                source: nls_core::Error::Precondition(
                    "independence mode needs a series-built profile".into(),
                ),
            });
        };
        self.write_series(&series)?;
        let a = self.profile(&series, &self.cfg.profile.radii)?;
        let b = self.profile(&series, &self.cfg.verify.alt_radii)?;
        let exact = self.exact();
        let w0: &dyn SpaceTimeField = match &exact {
            Some(e) => e.as_ref(),
            None => &a,
        };
        let report = at(
            Stage::Verify,
            profile_independence_check(w0, &a, &b, &self.spec, self.cfg.verify.window, exact.as_deref()),
        )?;
        self.note("sup_difference", report.sup_difference);
        self.note("bound", report.bound);
        if let Some((ea, eb)) = report.reference_errors {
            self.note("reference_error_a", ea);
            self.note("reference_error_b", eb);
        }
        self.check(
            "independence",
            report.sup_difference <= report.bound,
            format!("sup |w_a - w_b| = {:e} (bound {:e})", report.sup_difference, report.bound),
        );
        Ok(())
    }
}

fn max_q(q: &[(f64, f64)]) -> f64 {
    q.iter().fold(0.0, |a, &(_, v)| a.max(v))
}

/// Runs `mode` and writes the manifest, CSV files and plot data into
/// `cfg.output.dir`. A stage error still leaves a manifest naming the stage.
pub fn run_experiment(cfg: &ExperimentConfig, mode: Mode) -> Result<RunOutcome, CliError> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(CliError::io(&dir))?;
    let spec = at(Stage::Scheme, cfg.mesh_spec())?;
    let mut run = Run {
        cfg,
        mode,
        spec,
        mu: cfg.mu(),
        dir: dir.clone(),
        checks: Vec::new(),
        summary: BTreeMap::new(),
        series: Vec::new(),
    };
    info!("{mode} run of preset {:?} into {}", cfg.problem.preset, dir.display());
    let result = match mode {
        Mode::Solve => run.solve(),
        Mode::Converge => run.converge(),
        Mode::Uniqueness => run.uniqueness(),
        Mode::Independence => run.independence(),
    };
    if let Err(e) = result {
        run.write_manifest("error", Some(&e))?;
        return Err(e);
    }
    for s in run.series.clone() {
        let selector = match s {
            "norms" => "norm_sh",
            "convergence" => "convergence",
            "uniqueness" => "uniqueness",
            _ => continue,
        };
        emit_plotdata(&dir, selector)?;
    }
    let outcome = RunOutcome {
        dir,
        mode,
        checks: run.checks.clone(),
        summary: run.summary.clone(),
    };
    run.write_manifest(if outcome.passed() { "pass" } else { "fail" }, None)?;
    Ok(outcome)
}
