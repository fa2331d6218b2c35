//! Formal power-series solutions `sum_k c_k(t) x^{gamma_k}` of the cubic NLS.
//!
//! Exponents are exact rationals so that lattice membership (`gamma_l +
//! gamma_m + gamma_n = gamma_j`, `gamma_p - 2 = gamma_j`) is decided without
//! floating-point comparison. The coefficient ODEs are, in complex form,
//!
//! ```text
//! c_j' = i mu sum_{gamma_l+gamma_m+gamma_n = gamma_j} c_l c_m conj(c_n)
//!      + i sum_{gamma_p - 2 = gamma_j} gamma_p (gamma_p - 1) c_p
//! ```
//!
//! where the triple sum runs over ordered index triples. Splitting into real
//! and imaginary parts gives the `(a_j', b_j')` system.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::io::{self, Write};
use std::sync::OnceLock;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact exponent in the lattice.
pub type Exponent = Rational64;

/// Parses `"-1"`, `"-0.25"` or `"-3/4"` into an exact exponent.
pub fn parse_exponent(text: &str) -> Result<Exponent> {
    let s = text.trim();
    let bad = || Error::InvalidGenerators(format!("cannot parse exponent `{text}`"));
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| bad())?;
        let d: i64 = den.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Rational64::new(n, d));
    }
    let (negative, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) || frac_part.len() > 12 {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let n: i64 = if digits.is_empty() { 0 } else { digits.parse().map_err(|_| bad())? };
    let d = 10i64.pow(frac_part.len() as u32);
    let r = Rational64::new(n, d);
    Ok(if negative { -r } else { r })
}

#[inline]
pub fn exponent_value(e: &Exponent) -> f64 {
    e.to_f64().unwrap_or(f64::NAN)
}

/// Sign of the cubic term: `+1` focusing, `-1` defocusing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mu {
    Focusing,
    Defocusing,
}

impl Mu {
    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            1 => Some(Mu::Focusing),
            -1 => Some(Mu::Defocusing),
            _ => None,
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Mu::Focusing => 1.0,
            Mu::Defocusing => -1.0,
        }
    }

    pub fn sign(self) -> i64 {
        self.value() as i64
    }

    pub fn flipped(self) -> Self {
        match self {
            Mu::Focusing => Mu::Defocusing,
            Mu::Defocusing => Mu::Focusing,
        }
    }
}

/// Which end of the real line an expansion describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    /// `+1` for `x -> +inf`, `-1` for `x -> -inf`.
    pub fn sign(self) -> f64 {
        match self {
            Side::Plus => 1.0,
            Side::Minus => -1.0,
        }
    }
}

/// Rejects a positive leading exponent.
///
/// For `beta_0 > 0` the top power of the cubic term, `x^{3 beta_0}`, exceeds
/// every power produced by `i w_t + w_xx`, which forces
/// `mu (a_0 + i b_0)^2 (a_0 - i b_0) = 0`.
pub fn reject_positive_beta(beta0: f64) -> Result<()> {
    if beta0 > 0.0 {
        Err(Error::PositiveLeadingExponent { beta: beta0 })
    } else {
        Ok(())
    }
}

/// Index tables for the coefficient recursion.
#[derive(Debug, Clone)]
pub struct RecursionTables {
    /// `triples[j]`: ordered `(l, m, n)` with `gamma_l + gamma_m + gamma_n = gamma_j`.
    pub triples: Vec<Vec<[usize; 3]>>,
    /// `shifted[j]`: indices `p` with `gamma_p - 2 = gamma_j`.
    pub shifted: Vec<Vec<usize>>,
}

impl RecursionTables {
    fn build(set: &ExponentSet) -> Self {
        let g = &set.exponents;
        let len = g.len();
        let mut triples = vec![Vec::new(); len];
        let mut shifted = vec![Vec::new(); len];
        for (l, gl) in g.iter().enumerate() {
            for (m, gm) in g.iter().enumerate() {
                let partial = gl + gm;
                if partial < -set.floor {
                    break;
                }
                for (n, gn) in g.iter().enumerate() {
                    let sum = partial + gn;
                    if sum < -set.floor {
                        break;
                    }
                    if let Some(&j) = set.index.get(&sum) {
                        triples[j].push([l, m, n]);
                    }
                }
            }
        }
        let two = Rational64::from_integer(2);
        for (p, gp) in g.iter().enumerate() {
            if let Some(&j) = set.index.get(&(gp - two)) {
                shifted[j].push(p);
            }
        }
        Self { triples, shifted }
    }

    /// Every coefficient index the right-hand side of `j` reads.
    pub fn dependencies(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.triples[j]
            .iter()
            .flat_map(|t| t.iter().copied())
            .chain(self.shifted[j].iter().copied())
    }

    pub fn max_dependency(&self, j: usize) -> Option<usize> {
        self.dependencies(j).max()
    }
}

/// `Gamma ∩ [-M, inf)`, sorted strictly decreasing.
#[derive(Debug, Clone)]
pub struct ExponentSet {
    exponents: Vec<Exponent>,
    generators: Vec<Exponent>,
    floor: Exponent,
    index: HashMap<Exponent, usize>,
    tables: OnceLock<RecursionTables>,
}

impl PartialEq for ExponentSet {
    fn eq(&self, other: &Self) -> bool {
        self.exponents == other.exponents
            && self.generators == other.generators
            && self.floor == other.floor
    }
}

impl ExponentSet {
    pub fn exponents(&self) -> &[Exponent] {
        &self.exponents
    }

    pub fn generators(&self) -> &[Exponent] {
        &self.generators
    }

    /// The positive floor `M`.
    pub fn floor(&self) -> Exponent {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn index_of(&self, e: &Exponent) -> Option<usize> {
        self.index.get(e).copied()
    }

    pub fn value(&self, j: usize) -> f64 {
        exponent_value(&self.exponents[j])
    }

    /// Built on first use.
    pub fn tables(&self) -> &RecursionTables {
        self.tables.get_or_init(|| RecursionTables::build(self))
    }

    /// Closure of the retained set under triple sums and `-2` shifts (within
    /// the floor), strict ordering, `A0 ⊆ Gamma` and `gamma_0 <= 0`.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidGenerators(msg));
        if self.exponents.windows(2).any(|w| w[0] <= w[1]) {
            return fail("exponents not strictly decreasing".into());
        }
        if self.exponents.first().is_some_and(|g| g.is_positive()) {
            return fail("leading exponent positive".into());
        }
        let low = -self.floor;
        for g in &self.generators {
            if *g >= low && self.index_of(g).is_none() {
                return fail(format!("generator {g} missing"));
            }
        }
        let two = Rational64::from_integer(2);
        for a in &self.exponents {
            if a - two >= low && self.index_of(&(a - two)).is_none() {
                return fail(format!("{a} - 2 missing"));
            }
            for b in &self.exponents {
                for c in &self.exponents {
                    let s = a + b + c;
                    if s >= low && self.index_of(&s).is_none() {
                        return fail(format!("{a} + {b} + {c} missing"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// All elements `sum_{p=1}^k beta_{i_p} - 2l >= -M` (`k >= 1`, `l >= 0`),
/// computed as the closure of `A0` under pairwise addition and `-2` shifts.
pub fn build_exponent_set(a0: &[Exponent], floor: Exponent) -> Result<ExponentSet> {
    if a0.is_empty() {
        return Err(Error::InvalidGenerators("no generators supplied".into()));
    }
    if !floor.is_positive() {
        return Err(Error::InvalidGenerators(format!("floor must be positive, got {floor}")));
    }
    for g in a0 {
        reject_positive_beta(exponent_value(g))?;
    }
    if a0.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::InvalidGenerators(
            "generators must be strictly decreasing".into(),
        ));
    }

    let low = -floor;
    let two = Rational64::from_integer(2);
    let mut set: BTreeSet<Exponent> = BTreeSet::new();
    let mut queue: VecDeque<Exponent> = VecDeque::new();
    for g in a0.iter().filter(|g| **g >= low) {
        if set.insert(*g) {
            queue.push_back(*g);
        }
    }
    while let Some(e) = queue.pop_front() {
        let mut fresh = Vec::new();
        if e - two >= low {
            fresh.push(e - two);
        }
        for other in set.iter() {
            let s = e + other;
            if s >= low {
                fresh.push(s);
            }
        }
        for s in fresh {
            if set.insert(s) {
                queue.push_back(s);
            }
        }
    }

    let exponents: Vec<Exponent> = set.into_iter().rev().collect();
    let index = exponents.iter().enumerate().map(|(i, e)| (*e, i)).collect();
    Ok(ExponentSet {
        exponents,
        generators: a0.to_vec(),
        floor,
        index,
        tables: OnceLock::new(),
    })
}

/// Right-hand side `(a_j', b_j')` of the coefficient ODE, packed as a complex
/// number.
pub fn coefficient_rhs(
    j: usize,
    current: &[Complex64],
    set: &ExponentSet,
    mu: Mu,
) -> Result<Complex64> {
    let tables = set.tables();
    if j >= set.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: set.len(),
        });
    }
    if let Some(dep) = tables.max_dependency(j).filter(|d| *d >= current.len()) {
        return Err(Error::MissingDependency {
            index: j,
            dependency: dep,
        });
    }
    Ok(rhs_unchecked(j, current, set, tables, mu))
}

fn rhs_unchecked(
    j: usize,
    c: &[Complex64],
    set: &ExponentSet,
    tables: &RecursionTables,
    mu: Mu,
) -> Complex64 {
    let mut cubic = Complex64::zero();
    for &[l, m, n] in &tables.triples[j] {
        cubic += c[l] * c[m] * c[n].conj();
    }
    let mut linear = Complex64::zero();
    for &p in &tables.shifted[j] {
        let g = set.value(p);
        linear += c[p] * (g * (g - 1.0));
    }
    Complex64::i() * (cubic * mu.value() + linear)
}

/// Sampled coefficient `a_j(t) + i b_j(t)` on the ODE grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    pub exponent: Exponent,
    pub initial: Complex64,
    pub values: Vec<Complex64>,
}

impl CoefficientPath {
    pub fn a(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|c| c.re)
    }

    pub fn b(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().map(|c| c.im)
    }

    pub fn max_modulus(&self) -> f64 {
        self.values.iter().fold(0.0, |m, c| m.max(c.norm()))
    }
}

/// One side of a formal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct FormalSeries {
    pub side: Side,
    pub mu: Mu,
    pub exponent_set: ExponentSet,
    pub coefficients: Vec<CoefficientPath>,
    /// ODE sample spacing.
    pub dt: f64,
    pub horizon: f64,
}

/// ODE step that divides the mesh step `k`, no larger than `k / 4` nor the
/// default `T / 10000`.
pub fn aligned_ode_step(horizon: f64, k: f64) -> f64 {
    let target = (horizon / 10_000.0).min(k / 4.0);
    k / (k / target).ceil()
}

/// Integrates the coefficient system from `initial` (pairs on `A0`) with the
/// classical fourth-order Runge-Kutta method.
///
/// Each right-hand side only reads indices `<= j` (strictly `< j` when
/// `gamma_0 < 0`), so the joint integration reproduces the index-ordered
/// recursion.
pub fn solve_coefficients(
    initial: &[(Exponent, Complex64)],
    set: &ExponentSet,
    mu: Mu,
    horizon: f64,
    dt_ode: f64,
    side: Side,
) -> Result<FormalSeries> {
    if let Some(lead) = set.exponents().first() {
        reject_positive_beta(exponent_value(lead))?;
    }
    if !(dt_ode > 0.0 && horizon > 0.0 && dt_ode <= horizon) {
        return Err(Error::Precondition(format!(
            "need 0 < dt_ode <= horizon (dt_ode = {dt_ode}, horizon = {horizon})"
        )));
    }
    let len = set.len();
    let mut c0 = vec![Complex64::zero(); len];
    for (e, value) in initial {
        reject_positive_beta(exponent_value(e))?;
        let j = set.index_of(e).ok_or_else(|| {
            Error::InvalidGenerators(format!("initial exponent {e} not in the lattice"))
        })?;
        c0[j] = *value;
    }

    let steps = (horizon / dt_ode).round().max(1.0) as usize;
    let dt = horizon / steps as f64;
    let tables = set.tables();
    let rhs = |c: &[Complex64]| -> Vec<Complex64> {
        (0..len).map(|j| rhs_unchecked(j, c, set, tables, mu)).collect()
    };

    let mut paths: Vec<Vec<Complex64>> = (0..len).map(|j| {
        let mut v = Vec::with_capacity(steps + 1);
        v.push(c0[j]);
        v
    }).collect();
    let mut c = c0.clone();
    let mut stage = vec![Complex64::zero(); len];
    for _ in 0..steps {
        let k1 = rhs(&c);
        for j in 0..len {
            stage[j] = c[j] + k1[j] * (0.5 * dt);
        }
        let k2 = rhs(&stage);
        for j in 0..len {
            stage[j] = c[j] + k2[j] * (0.5 * dt);
        }
        let k3 = rhs(&stage);
        for j in 0..len {
            stage[j] = c[j] + k3[j] * dt;
        }
        let k4 = rhs(&stage);
        for j in 0..len {
            c[j] += (k1[j] + (k2[j] + k3[j]) * 2.0 + k4[j]) * (dt / 6.0);
            paths[j].push(c[j]);
        }
    }

    let coefficients = paths
        .into_iter()
        .enumerate()
        .map(|(j, values)| CoefficientPath {
            exponent: set.exponents()[j],
            initial: c0[j],
            values,
        })
        .collect();
    Ok(FormalSeries {
        side,
        mu,
        exponent_set: set.clone(),
        coefficients,
        dt,
        horizon,
    })
}

impl FormalSeries {
    /// Series with every coefficient identically zero.
    pub fn zero(side: Side, mu: Mu, horizon: f64, dt: f64) -> Result<Self> {
        let set = build_exponent_set(&[Rational64::zero()], Rational64::from_integer(2))?;
        solve_coefficients(&[], &set, mu, horizon, dt, side)
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn samples(&self) -> usize {
        self.coefficients.first().map_or(0, |c| c.values.len())
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let tol = 1e-12 * self.horizon.max(1.0);
        if !(t >= -tol && t <= self.horizon + tol) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        let last = self.samples() - 1;
        let s = (t / self.dt).clamp(0.0, last as f64);
        let nearest = s.round();
        if (s - nearest).abs() < 1e-9 {
            return Ok((nearest as usize, 0.0));
        }
        let i = (s.floor() as usize).min(last - 1);
        Ok((i, s - i as f64))
    }

    /// Linearly interpolated coefficient values `c_j(t)` for every index.
    pub fn coefficients_at(&self, t: f64) -> Result<Vec<Complex64>> {
        let (i, w) = self.locate(t)?;
        Ok(self
            .coefficients
            .iter()
            .map(|p| {
                if w == 0.0 {
                    p.values[i]
                } else {
                    p.values[i] + (p.values[i + 1] - p.values[i]) * w
                }
            })
            .collect())
    }

    /// Time derivatives from the ODE right-hand side at the interpolated values.
    pub fn derivatives_from(&self, c: &[Complex64]) -> Vec<Complex64> {
        let tables = self.exponent_set.tables();
        (0..self.len())
            .map(|j| rhs_unchecked(j, c, &self.exponent_set, tables, self.mu))
            .collect()
    }

    /// Replaces the samples of coefficient `j` by `f(t)` (used to build
    /// deliberately wrong series).
    pub fn replace_path(&mut self, j: usize, f: impl Fn(f64) -> Complex64) {
        let dt = self.dt;
        for (i, v) in self.coefficients[j].values.iter_mut().enumerate() {
            *v = f(i as f64 * dt);
        }
    }

    /// Plain-text table `gamma t a b`, one row per exponent per sample.
    pub fn write_table<W: Write>(&self, mut w: W, stride: usize) -> io::Result<()> {
        writeln!(w, "gamma t a b")?;
        for path in &self.coefficients {
            let g = exponent_value(&path.exponent);
            for (i, c) in path.values.iter().enumerate().step_by(stride.max(1)) {
                writeln!(w, "{g:.17e} {:.17e} {:.17e} {:.17e}", self.time(i), c.re, c.im)?;
            }
        }
        Ok(())
    }
}

/// Partial sum `sum_{k <= n} c_k(t) (±x)^{gamma_k}`; requires `|x| >= 1` on the
/// series' side.
pub fn evaluate_series(series: &FormalSeries, x: f64, t: f64, truncation: usize) -> Result<Complex64> {
    if x.abs() < 1.0 || x * series.side.sign() < 0.0 {
        return Err(Error::OutsideAsymptoticRegion { x });
    }
    let c = series.coefficients_at(t)?;
    let r = x.abs();
    Ok(c.iter()
        .enumerate()
        .take(truncation + 1)
        .map(|(k, ck)| ck * r.powf(series.exponent_set.value(k)))
        .sum())
}

/// Residual of the truncated series at one exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualEntry {
    pub exponent: Exponent,
    /// `max_t` of the modulus of the `x^gamma` coefficient of
    /// `i w_t + w_xx + mu |w|^2 w`.
    pub max_abs: f64,
    /// Every contribution to this power comes from indices `<= truncation`.
    pub resolved: bool,
}

/// Finite-difference weights (Fornberg) for the first derivative at `z`
/// from nodes `xs`.
fn fd_weights(z: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut c = vec![[0.0f64; 2]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|w| w[1]).collect()
}

const FD_POINTS: usize = 9;

/// Substitutes the truncated series into `i w_t + w_xx + mu |w|^2 w` and
/// collects the coefficient of every retained power `x^{gamma_j}`, `j <=
/// truncation`.
///
/// Independent of the recursion tables: products are grouped by their exact
/// exponent, and time derivatives come from 9-point finite differences of
/// the samples (stencil spacing about 1% of the horizon).
pub fn formal_residual(series: &FormalSeries, truncation: usize) -> Vec<ResidualEntry> {
    let set = &series.exponent_set;
    let upto = truncation.min(series.len().saturating_sub(1));
    let g: Vec<Exponent> = set.exponents()[..=upto].to_vec();
    let gv: Vec<f64> = g.iter().map(exponent_value).collect();
    let two = Rational64::from_integer(2);
    let mu = series.mu.value();

    let mut triples: BTreeMap<Exponent, Vec<[usize; 3]>> = BTreeMap::new();
    for l in 0..=upto {
        for m in 0..=upto {
            for n in 0..=upto {
                triples.entry(g[l] + g[m] + g[n]).or_default().push([l, m, n]);
            }
        }
    }
    let full: BTreeSet<Exponent> = set.exponents().iter().copied().collect();
    let resolved = |gamma: &Exponent| -> bool {
        let within = |e: &Exponent| set.index_of(e).is_some_and(|i| i <= upto);
        if full.contains(&(gamma + two)) && !within(&(gamma + two)) {
            return false;
        }
        set.exponents().iter().all(|a| {
            set.exponents().iter().all(|b| {
                let rest = gamma - a - b;
                !full.contains(&rest) || (within(a) && within(b) && within(&rest))
            })
        })
    };

    let samples = series.samples();
    let stride = ((0.01 * series.horizon / series.dt).round() as usize)
        .max(1)
        .min((samples - 1) / (FD_POINTS - 1).max(1))
        .max(1);
    let span = stride * (FD_POINTS - 1);
    let derivative = |j: usize, i: usize| -> Complex64 {
        let vals = &series.coefficients[j].values;
        if samples < FD_POINTS || span >= samples {
            return Complex64::new(f64::NAN, f64::NAN);
        }
        let half = span / 2;
        let start = i.saturating_sub(half).min(samples - 1 - span);
        let nodes: Vec<f64> = (0..FD_POINTS)
            .map(|p| (start + p * stride) as f64 - i as f64)
            .collect();
        let w = fd_weights(0.0, &nodes);
        let sum: Complex64 = (0..FD_POINTS).map(|p| vals[start + p * stride] * w[p]).sum();
        sum / series.dt
    };

    (0..=upto)
        .map(|j| {
            let gamma = g[j];
            let cubic = triples.get(&gamma).cloned().unwrap_or_default();
            let source = set.index_of(&(gamma + two)).filter(|p| *p <= upto);
            let mut max_abs: f64 = 0.0;
            for i in 0..samples {
                let c = |idx: usize| series.coefficients[idx].values[i];
                let mut r = Complex64::i() * derivative(j, i);
                if let Some(p) = source {
                    r += c(p) * (gv[p] * (gv[p] - 1.0));
                }
                let mut nl = Complex64::zero();
                for &[l, m, n] in &cubic {
                    nl += c(l) * c(m) * c(n).conj();
                }
                r += nl * mu;
                max_abs = max_abs.max(r.norm());
            }
            ResidualEntry {
                exponent: gamma,
                max_abs,
                resolved: resolved(&gamma),
            }
        })
        .collect()
}
