//! Linearly implicit difference scheme for the correction `u = (u1, u2)`.
//!
//! Each step solves `(I + k Q_j) u_{j+1} = u_j - k mu F_j(u_j) - k (g2, -g1)_j`
//! where `Q_j` couples nearest neighbours through `D+D-` and carries
//! node-local 2x2 blocks built from `u_j` and `f_j`. The system is
//! block-tridiagonal and is solved directly.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::formal::Mu;
use crate::grid::{
    inner_sh, japanese, norm_l2h_pair, norm_sh, pairwise_sum, schwartz_seminorm, GridPair,
    MeshSpec,
};
use crate::profile::{defect_slice, smooth_step, SpaceTimeField};

/// Background `f` and defect `g` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundLevel {
    pub f: GridPair,
    pub g: GridPair,
}

#[derive(Clone)]
enum Source {
    Zero,
    Sampled(Arc<Vec<BackgroundLevel>>),
    Field(Arc<dyn SpaceTimeField>, Mu),
}

/// `f1, f2, g1, g2` on the space-time mesh, sampled on demand.
#[derive(Clone)]
pub struct BackgroundFields {
    spec: MeshSpec,
    source: Source,
    derivative_bound: f64,
}

impl std::fmt::Debug for BackgroundFields {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.source {
            Source::Zero => "zero",
            Source::Sampled(_) => "sampled",
            Source::Field(..) => "field",
        };
        f.debug_struct("BackgroundFields")
            .field("spec", &self.spec)
            .field("source", &kind)
            .field("derivative_bound", &self.derivative_bound)
            .finish()
    }
}

/// `sup_n <x_n> |D+ f_l(x_n)|` over interior nodes, both components.
fn weighted_derivative_sup(f: &GridPair) -> f64 {
    let spec = f.spec();
    let mut sup: f64 = 0.0;
    for part in [&f.re, &f.im] {
        let v = part.values();
        for n in 0..v.len().saturating_sub(1) {
            sup = sup.max(japanese(spec.x(n)) * ((v[n + 1] - v[n]) / spec.h).abs());
        }
    }
    sup
}

impl BackgroundFields {
    pub fn zero(spec: MeshSpec) -> Self {
        Self {
            spec,
            source: Source::Zero,
            derivative_bound: 0.0,
        }
    }

    /// One `(f, g)` pair per time level `0..=J`.
    pub fn sampled(spec: MeshSpec, levels: Vec<BackgroundLevel>) -> Result<Self> {
        if levels.len() != spec.n_time {
            return Err(Error::LengthMismatch {
                expected: spec.n_time,
                got: levels.len(),
            });
        }
        let mut bound: f64 = 0.0;
        for lvl in &levels {
            if *lvl.f.spec() != spec || *lvl.g.spec() != spec {
                return Err(Error::MeshMismatch);
            }
            if !lvl.f.is_finite() || !lvl.g.is_finite() {
                return Err(Error::Precondition("background contains non-finite values".into()));
            }
            bound = bound.max(weighted_derivative_sup(&lvl.f));
        }
        Ok(Self {
            spec,
            source: Source::Sampled(Arc::new(levels)),
            derivative_bound: bound,
        })
    }

    /// `f` from `field`, `g = i f_t + f_xx + mu |f|^2 f`, evaluated per level.
    pub fn from_field(spec: MeshSpec, field: Arc<dyn SpaceTimeField>, mu: Mu) -> Result<Self> {
        let mut bg = Self {
            spec,
            source: Source::Field(field, mu),
            derivative_bound: 0.0,
        };
        let mut bound: f64 = 0.0;
        for j in [0, spec.last_level()] {
            let lvl = bg.level(j)?;
            if !lvl.f.is_finite() || !lvl.g.is_finite() {
                return Err(Error::Precondition(format!("background non-finite at level {j}")));
            }
            bound = bound.max(weighted_derivative_sup(&lvl.f));
        }
        if !bound.is_finite() {
            return Err(Error::Precondition("sup <x> |D+ f| is not finite".into()));
        }
        bg.derivative_bound = bound;
        Ok(bg)
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.source, Source::Zero)
    }

    /// Observed `sup <x> |D+ f|` at build time.
    pub fn derivative_bound(&self) -> f64 {
        self.derivative_bound
    }

    pub fn level(&self, j: usize) -> Result<BackgroundLevel> {
        if j > self.spec.last_level() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.spec.n_time,
            });
        }
        match &self.source {
            Source::Zero => Ok(BackgroundLevel {
                f: GridPair::zeros(self.spec),
                g: GridPair::zeros(self.spec),
            }),
            Source::Sampled(levels) => Ok(levels[j].clone()),
            Source::Field(field, mu) => {
                let xs = self.spec.xs();
                let (f, g) = defect_slice(field.as_ref(), *mu, &xs, self.spec.t(j))?;
                Ok(BackgroundLevel {
                    f: pair_from(self.spec, &f),
                    g: pair_from(self.spec, &g),
                })
            }
        }
    }
}

fn pair_from(spec: MeshSpec, v: &[Complex64]) -> GridPair {
    GridPair::from_raw(
        spec,
        v.iter().map(|z| z.re).collect(),
        v.iter().map(|z| z.im).collect(),
    )
}

/// `I + k Q_j` in the node basis: node-local blocks
/// `[[A11, A12], [A21, A22]]` of `Q_j` plus the `D+D-` coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOperator {
    spec: MeshSpec,
    k: f64,
    blocks: Vec<[f64; 4]>,
}

/// Builds `Q_j` from `u_j` and `f_j`.
pub fn assemble_q(u: &GridPair, f: &GridPair, k: f64, mu: Mu) -> Result<StepOperator> {
    if u.spec() != f.spec() {
        return Err(Error::MeshMismatch);
    }
    let m = mu.value();
    let (u1, u2) = (u.re.values(), u.im.values());
    let (f1, f2) = (f.re.values(), f.im.values());
    let blocks = (0..u1.len())
        .map(|n| {
            let (a, b, p, q) = (u1[n], u2[n], f1[n], f2[n]);
            [
                m * (a * b + 2.0 * b * p + a * q),
                m * (b * b + 3.0 * b * q),
                -m * (a * a + 3.0 * p * a),
                -m * (a * b + p * b + 2.0 * q * a),
            ]
        })
        .collect();
    Ok(StepOperator {
        spec: *u.spec(),
        k,
        blocks,
    })
}

impl StepOperator {
    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn step(&self) -> f64 {
        self.k
    }

    /// Identity operator (`k = 0`).
    pub fn identity(spec: MeshSpec) -> Self {
        Self {
            spec,
            k: 0.0,
            blocks: vec![[0.0; 4]; spec.n_space],
        }
    }

    /// `Q_j rho`.
    pub fn apply_q(&self, rho: &GridPair) -> Result<GridPair> {
        if *rho.spec() != self.spec {
            return Err(Error::MeshMismatch);
        }
        let (r1, r2) = (rho.re.values(), rho.im.values());
        let h2 = self.spec.h * self.spec.h;
        let len = r1.len();
        let get = |v: &[f64], n: isize| if n < 0 || n as usize >= len { 0.0 } else { v[n as usize] };
        let mut out1 = Vec::with_capacity(len);
        let mut out2 = Vec::with_capacity(len);
        for n in 0..len {
            let i = n as isize;
            let lap2 = (get(r2, i + 1) - 2.0 * r2[n] + get(r2, i - 1)) / h2;
            let lap1 = (get(r1, i + 1) - 2.0 * r1[n] + get(r1, i - 1)) / h2;
            let [a11, a12, a21, a22] = self.blocks[n];
            out1.push(lap2 + a11 * r1[n] + a12 * r2[n]);
            out2.push(-lap1 + a21 * r1[n] + a22 * r2[n]);
        }
        Ok(GridPair::from_raw(self.spec, out1, out2))
    }

    /// `(I + k Q_j) rho`.
    pub fn apply(&self, rho: &GridPair) -> Result<GridPair> {
        self.apply_q(rho)?.scaled(self.k).axpy(1.0, rho)
    }
}

/// Right-hand side of the step, with the cross term `2 f1 f2 u1` of the
/// first component as in the expanded real/imaginary scheme.
pub fn step_rhs(u: &GridPair, bg: &BackgroundLevel, k: f64, mu: Mu) -> Result<GridPair> {
    if u.spec() != bg.f.spec() || u.spec() != bg.g.spec() {
        return Err(Error::MeshMismatch);
    }
    let m = mu.value();
    let (u1, u2) = (u.re.values(), u.im.values());
    let (f1, f2) = (bg.f.re.values(), bg.f.im.values());
    let (g1, g2) = (bg.g.re.values(), bg.g.im.values());
    let len = u1.len();
    let mut c1 = Vec::with_capacity(len);
    let mut c2 = Vec::with_capacity(len);
    for n in 0..len {
        let (a, b, p, q) = (u1[n], u2[n], f1[n], f2[n]);
        c1.push(a - k * m * (2.0 * p * q * a + p * p * b + 3.0 * q * q * b) - k * g2[n]);
        c2.push(b + k * m * (q * q * a + 3.0 * p * p * a + 2.0 * p * q * b) + k * g1[n]);
    }
    Ok(GridPair::from_raw(*u.spec(), c1, c2))
}

type Block = [[f64; 2]; 2];

/// Solves `m x = r` by Gaussian elimination with row pivoting.
fn solve2(m: &Block, r: [f64; 2]) -> Option<[f64; 2]> {
    let (p, q) = if m[0][0].abs() >= m[1][0].abs() { (0, 1) } else { (1, 0) };
    let piv = m[p][0];
    let scale = m[0][0].abs().max(m[0][1].abs()).max(m[1][0].abs()).max(m[1][1].abs());
    if piv.abs() <= 1e-14 * scale || scale == 0.0 {
        return None;
    }
    let l = m[q][0] / piv;
    let u22 = m[q][1] - l * m[p][1];
    if u22.abs() <= 1e-14 * scale {
        return None;
    }
    let y2 = r[q] - l * r[p];
    let x1 = y2 / u22;
    let x0 = (r[p] - m[p][1] * x1) / piv;
    Some([x0, x1])
}

/// Solves `(I + k Q_j) x = rhs` by block Thomas elimination.
pub fn solve_step(op: &StepOperator, rhs: &GridPair, tol: f64, level: usize) -> Result<GridPair> {
    if *rhs.spec() != op.spec {
        return Err(Error::MeshMismatch);
    }
    let spec = op.spec;
    let singular = || Error::SingularStep {
        level,
        time: spec.t(level),
    };
    let len = op.blocks.len();
    let k = op.k;
    let c = k / (spec.h * spec.h);
    // Neighbour block [[0, c], [-c, 0]] on both sides.
    let diag = |n: usize| -> Block {
        let [a11, a12, a21, a22] = op.blocks[n];
        [[1.0 + k * a11, k * a12 - 2.0 * c], [k * a21 + 2.0 * c, 1.0 + k * a22]]
    };
    let (r1, r2) = (rhs.re.values(), rhs.im.values());

    // Forward sweep stores G_n = A'_n^{-1} C and y_n = A'_n^{-1} r'_n.
    let mut gmat: Vec<Block> = Vec::with_capacity(len);
    let mut y: Vec<[f64; 2]> = Vec::with_capacity(len);
    for n in 0..len {
        let mut a = diag(n);
        let mut r = [r1[n], r2[n]];
        if n > 0 {
            // A'_n = A_n - B G_{n-1}, r'_n = r_n - B y_{n-1}, B = [[0, c], [-c, 0]].
            let g = gmat[n - 1];
            a[0][0] -= c * g[1][0];
            a[0][1] -= c * g[1][1];
            a[1][0] += c * g[0][0];
            a[1][1] += c * g[0][1];
            let yp = y[n - 1];
            r[0] -= c * yp[1];
            r[1] += c * yp[0];
        }
        let col0 = solve2(&a, [0.0, -c]).ok_or_else(singular)?;
        let col1 = solve2(&a, [c, 0.0]).ok_or_else(singular)?;
        gmat.push([[col0[0], col1[0]], [col0[1], col1[1]]]);
        y.push(solve2(&a, r).ok_or_else(singular)?);
    }
    let mut x = vec![[0.0; 2]; len];
    for n in (0..len).rev() {
        let mut v = y[n];
        if n + 1 < len {
            let g = gmat[n];
            let nx = x[n + 1];
            v[0] -= g[0][0] * nx[0] + g[0][1] * nx[1];
            v[1] -= g[1][0] * nx[0] + g[1][1] * nx[1];
        }
        x[n] = v;
    }
    let sol = GridPair::from_raw(
        spec,
        x.iter().map(|v| v[0]).collect(),
        x.iter().map(|v| v[1]).collect(),
    );
    if !sol.is_finite() {
        return Err(singular());
    }
    let resid = norm_l2h_pair(&op.apply(&sol)?.axpy(-1.0, rhs)?);
    if resid > tol * norm_l2h_pair(rhs) {
        return Err(singular());
    }
    Ok(sol)
}

/// `(<P_j u, u>_{S_h}, ||u||^2_{S_h} / 2)`.
pub fn coercivity_pair(op: &StepOperator, u: &GridPair) -> Result<(f64, f64)> {
    let pu = op.apply(u)?;
    let n = norm_sh(u);
    Ok((inner_sh(&pu, u)?, 0.5 * n * n))
}

/// Which levels a march keeps in memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    All,
    /// Level 0 and the latest level.
    Endpoints,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchConfig {
    pub mu: Mu,
    /// `(N, n)` pairs recorded as `|| <x>^N D+^n u_j ||` for both components.
    pub norm_pairs: Vec<(u32, usize)>,
    /// Abort once `||u_j||_{S_h}` exceeds this multiple of `max(1, ||u_0||_{S_h})`.
    pub blow_up_factor: f64,
    pub solve_tol: f64,
    pub storage: Storage,
    pub monitor_coercivity: bool,
    /// Upper bound accepted for `k`.
    pub k_ceiling: f64,
}

impl MarchConfig {
    pub fn new(mu: Mu) -> Self {
        Self {
            mu,
            norm_pairs: vec![(3, 0), (3, 3)],
            blow_up_factor: 1e3,
            solve_tol: 1e-12,
            storage: Storage::All,
            monitor_coercivity: true,
            k_ceiling: 0.1,
        }
    }
}

/// Per-level norms.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelRecord {
    pub j: usize,
    pub t: f64,
    pub norm_sh: f64,
    /// One entry per configured `(N, n)`: the larger of the two components.
    pub seminorms: Vec<f64>,
    /// `(<P u, u>_{S_h}, ||u||^2_{S_h} / 2)` for the step that produced this level.
    pub coercivity: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Completed,
    Aborted(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverRun {
    pub spec: MeshSpec,
    pub config: MarchConfig,
    /// Stored levels, paired with their indices.
    pub levels: Vec<(usize, GridPair)>,
    pub ledger: Vec<LevelRecord>,
    pub termination: Termination,
    pub attained_time: f64,
}

fn record(j: usize, u: &GridPair, cfg: &MarchConfig, coercivity: Option<(f64, f64)>) -> LevelRecord {
    LevelRecord {
        j,
        t: u.spec().t(j),
        norm_sh: norm_sh(u),
        seminorms: cfg
            .norm_pairs
            .iter()
            .map(|&(w, o)| schwartz_seminorm(&u.re, w, o).max(schwartz_seminorm(&u.im, w, o)))
            .collect(),
        coercivity,
    }
}

/// One march advanced level by level; several can run in lockstep.
pub struct Stepper<'a> {
    bg: &'a BackgroundFields,
    cfg: &'a MarchConfig,
    j: usize,
    u: GridPair,
    bg_level: BackgroundLevel,
    limit: f64,
    last_coercivity: Option<(f64, f64)>,
}

impl<'a> Stepper<'a> {
    pub fn new(u0: GridPair, bg: &'a BackgroundFields, cfg: &'a MarchConfig) -> Result<Self> {
        let spec = *bg.spec();
        if *u0.spec() != spec {
            return Err(Error::MeshMismatch);
        }
        if !u0.is_finite() {
            return Err(Error::Precondition("initial data not finite".into()));
        }
        if !(spec.k <= cfg.k_ceiling) {
            return Err(Error::Precondition(format!(
                "time step {} exceeds ceiling {}",
                spec.k, cfg.k_ceiling
            )));
        }
        let w = schwartz_seminorm(&u0.re, 3, 0) + schwartz_seminorm(&u0.im, 3, 0);
        if !w.is_finite() {
            return Err(Error::Precondition("initial data does not decay".into()));
        }
        let limit = cfg.blow_up_factor * norm_sh(&u0).max(1.0);
        let bg_level = bg.level(0)?;
        Ok(Self {
            bg,
            cfg,
            j: 0,
            u: u0,
            bg_level,
            limit,
            last_coercivity: None,
        })
    }

    pub fn level(&self) -> usize {
        self.j
    }

    pub fn current(&self) -> &GridPair {
        &self.u
    }

    pub fn finished(&self) -> bool {
        self.j >= self.bg.spec().last_level()
    }

    pub fn last_coercivity(&self) -> Option<(f64, f64)> {
        self.last_coercivity
    }

    /// Advances to level `j + 1`.
    pub fn step(&mut self) -> Result<&GridPair> {
        let spec = *self.bg.spec();
        let k = spec.k;
        let op = assemble_q(&self.u, &self.bg_level.f, k, self.cfg.mu)?;
        let rhs = step_rhs(&self.u, &self.bg_level, k, self.cfg.mu)?;
        let next = solve_step(&op, &rhs, self.cfg.solve_tol, self.j)?;
        self.last_coercivity = if self.cfg.monitor_coercivity {
            Some(coercivity_pair(&op, &next)?)
        } else {
            None
        };
        let n = norm_sh(&next);
        if !(n <= self.limit) {
            return Err(Error::BlowUpGuard {
                level: self.j + 1,
                time: spec.t(self.j + 1),
                norm: n,
                limit: self.limit,
            });
        }
        self.j += 1;
        self.u = next;
        if self.j <= spec.last_level() {
            self.bg_level = self.bg.level(self.j)?;
        }
        Ok(&self.u)
    }
}

/// Marches from `u0` to the horizon, calling `observer(j, u_j)` on every level.
pub fn march_with(
    u0: GridPair,
    bg: &BackgroundFields,
    cfg: &MarchConfig,
    mut observer: impl FnMut(usize, &GridPair),
) -> Result<SolverRun> {
    let spec = *bg.spec();
    let mut stepper = Stepper::new(u0, bg, cfg)?;
    observer(0, stepper.current());
    let mut ledger = vec![record(0, stepper.current(), cfg, None)];
    let mut levels = vec![(0, stepper.current().clone())];
    let mut termination = Termination::Completed;
    while !stepper.finished() {
        match stepper.step() {
            Ok(_) => {
                let j = stepper.level();
                let u = stepper.current();
                observer(j, u);
                ledger.push(record(j, u, cfg, stepper.last_coercivity()));
                match cfg.storage {
                    Storage::All => levels.push((j, u.clone())),
                    Storage::Endpoints => {
                        levels.truncate(1);
                        levels.push((j, u.clone()));
                    }
                }
            }
            Err(e @ (Error::SingularStep { .. } | Error::BlowUpGuard { .. })) => {
                termination = Termination::Aborted(e);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(SolverRun {
        spec,
        config: cfg.clone(),
        levels,
        attained_time: spec.t(stepper.level()),
        ledger,
        termination,
    })
}

pub fn march(u0: GridPair, bg: &BackgroundFields, cfg: &MarchConfig) -> Result<SolverRun> {
    march_with(u0, bg, cfg, |_, _| {})
}

impl SolverRun {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    /// The abort error, if any.
    pub fn check(&self) -> Result<()> {
        match &self.termination {
            Termination::Completed => Ok(()),
            Termination::Aborted(e) => Err(e.clone()),
        }
    }

    pub fn level(&self, j: usize) -> Result<&GridPair> {
        self.levels
            .iter()
            .find(|(i, _)| *i == j)
            .map(|(_, u)| u)
            .ok_or(Error::IndexOutOfRange {
                index: j,
                len: self.ledger.len(),
            })
    }

    pub fn last(&self) -> &GridPair {
        &self.levels.last().expect("level 0 is always stored").1
    }

    pub fn max_norm_sh(&self) -> f64 {
        self.ledger.iter().fold(0.0, |m, r| m.max(r.norm_sh))
    }

    /// Accepted steps with `<P u, u>_{S_h} < ||u||^2_{S_h} / 2`.
    pub fn coercivity_violations(&self) -> usize {
        self.ledger
            .iter()
            .filter_map(|r| r.coercivity)
            .filter(|(lhs, rhs)| lhs < rhs)
            .count()
    }

    /// Largest fraction of `L^2_h` mass carried by the outer 5% of nodes
    /// (both ends together) over the stored levels.
    pub fn boundary_mass_fraction(&self) -> f64 {
        let len = self.spec.n_space;
        let edge = ((len as f64) * 0.025).ceil() as usize;
        self.levels
            .iter()
            .map(|(_, u)| {
                let sq: Vec<f64> = (0..len).map(|n| u.value(n).norm_sqr()).collect();
                let total = pairwise_sum(&sq);
                if total == 0.0 {
                    return 0.0;
                }
                let outer: f64 = sq[..edge].iter().chain(&sq[len - edge..]).sum();
                outer / total
            })
            .fold(0.0, f64::max)
    }

    /// Whether the truncated domain was wide enough.
    pub fn domain_ok(&self) -> bool {
        self.boundary_mass_fraction() < 1e-8
    }

    /// Smallest `C >= 0` with `(eta_{j+1} - eta_j) / k <= C((eta_j^2 + 1) eta_{j+1} + eta_j + 1)`.
    pub fn gronwall_constant(&self) -> f64 {
        let k = self.spec.k;
        self.ledger
            .windows(2)
            .map(|w| {
                let (a, b) = (w[0].norm_sh, w[1].norm_sh);
                ((b - a) / k) / ((a * a + 1.0) * b + a + 1.0)
            })
            .fold(0.0, f64::max)
    }
}

/// Smooth temporal cutoff `phi`: 1 on `[-1, T+1]`, 0 outside `[-2, T+2]`.
pub fn time_cutoff(t: f64, horizon: f64, sharpness: f64) -> f64 {
    smooth_step(t + 2.0, sharpness)[0] * smooth_step(horizon + 2.0 - t, sharpness)[0]
}

/// `u-hat = phi * (quadratic extrapolation of u)` on `t_j in [-2-k, T+2+k]`.
#[derive(Debug, Clone)]
pub struct ExtendedField {
    spec: MeshSpec,
    levels: Vec<GridPair>,
    j_lo: isize,
    j_hi: isize,
    sharpness: f64,
}

/// Extends a completed run past both ends of `[0, T]`.
pub fn extend_time(run: &SolverRun, sharpness: f64) -> Result<ExtendedField> {
    let spec = run.spec;
    run.check()?;
    spec.check_extension()
        .map_err(|e| Error::InsufficientLevels(e.to_string()))?;
    let last = spec.last_level();
    if run.levels.len() != last + 1 || run.levels.iter().enumerate().any(|(i, (j, _))| i != *j) {
        return Err(Error::InsufficientLevels(
            "extension needs every level of the run".into(),
        ));
    }
    let pad = ((2.0 + spec.k) / spec.k + 1e-9).floor() as isize;
    Ok(ExtendedField {
        spec,
        levels: run.levels.iter().map(|(_, u)| u.clone()).collect(),
        j_lo: -pad,
        j_hi: last as isize + pad,
        sharpness,
    })
}

impl ExtendedField {
    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    /// Inclusive index range of the extended levels.
    pub fn range(&self) -> (isize, isize) {
        (self.j_lo, self.j_hi)
    }

    pub fn time(&self, j: isize) -> f64 {
        j as f64 * self.spec.k
    }

    pub fn cutoff(&self, j: isize) -> f64 {
        time_cutoff(self.time(j), self.spec.horizon, self.sharpness)
    }

    /// Extrapolated value before the cutoff is applied.
    pub fn raw_value(&self, n: usize, j: isize) -> Complex64 {
        let last = self.levels.len() as isize - 1;
        if (0..=last).contains(&j) {
            return self.levels[j as usize].value(n);
        }
        let m = if j > last { (j - last) as f64 } else { j as f64 };
        let (a, b, c) = if j > last {
            (last as usize, last as usize - 1, last as usize - 2)
        } else {
            (0, 1, 2)
        };
        let (va, vb, vc) = (self.levels[a].value(n), self.levels[b].value(n), self.levels[c].value(n));
        if j > last {
            va * ((m + 1.0) * (m + 2.0) / 2.0) - vb * (m * (m + 2.0)) + vc * (m * (m + 1.0) / 2.0)
        } else {
            va * ((m - 1.0) * (m - 2.0) / 2.0) - vb * (m * (m - 2.0)) + vc * (m * (m - 1.0) / 2.0)
        }
    }

    /// `u-hat(x_n, t_j)`; zero outside the extended range.
    pub fn value(&self, n: usize, j: isize) -> Complex64 {
        if j < self.j_lo || j > self.j_hi {
            return Complex64::new(0.0, 0.0);
        }
        let phi = self.cutoff(j);
        if phi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.raw_value(n, j) * phi
    }

    pub fn level(&self, j: isize) -> GridPair {
        let v: Vec<Complex64> = (0..self.spec.n_space).map(|n| self.value(n, j)).collect();
        pair_from(self.spec, &v)
    }

    /// `D_{t,+}^m u-hat` at level `j`.
    pub fn time_difference(&self, j: isize, m: u32) -> GridPair {
        let binom = |m: u32, i: u32| -> f64 {
            (0..i).fold(1.0, |acc, r| acc * (m - r) as f64 / (r + 1) as f64)
        };
        let scale = self.spec.k.powi(m as i32);
        let v: Vec<Complex64> = (0..self.spec.n_space)
            .map(|n| {
                (0..=m)
                    .map(|i| {
                        let sign = if (m - i) % 2 == 0 { 1.0 } else { -1.0 };
                        self.value(n, j + i as isize) * (sign * binom(m, i))
                    })
                    .sum::<Complex64>()
                    / scale
            })
            .collect();
        pair_from(self.spec, &v)
    }

    /// `max_j max_l || <x>^N D+^n D_{t,+}^m u-hat_l ||` over the extended range.
    pub fn time_difference_seminorm(&self, m: u32, weight: u32, order: usize) -> f64 {
        (self.j_lo..=self.j_hi - m as isize)
            .map(|j| {
                let d = self.time_difference(j, m);
                schwartz_seminorm(&d.re, weight, order).max(schwartz_seminorm(&d.im, weight, order))
            })
            .fold(0.0, f64::max)
    }
}
