//! Smooth backgrounds `f(x, t)` and their defects `g = i f_t + f_xx + mu |f|^2 f`.
//!
//! A series-built profile glues the two formal expansions together with
//! cutoffs `chi(|x| / R_k)`. Exact NLS solutions (plane wave, soliton) are
//! available as alternate backends through the same [`SpaceTimeField`] trait.

use std::io::{self, Write};

use num_complex::Complex64;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::formal::{FormalSeries, Mu, Side};
use crate::grid::{schwartz_seminorm, GridPair, MeshSpec};

/// A complex field on the line with partial derivatives `d_x^dx d_t^dt`.
pub trait SpaceTimeField: Send + Sync {
    fn eval(&self, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64>;

    /// Values at many points of one time slice.
    fn eval_slice(&self, xs: &[f64], t: f64, dx: usize, dt: usize) -> Result<Vec<Complex64>> {
        xs.iter().map(|&x| self.eval(x, t, dx, dt)).collect()
    }
}

/// Smooth step `s(tau) = psi(tau) / (psi(tau) + psi(1 - tau))` with
/// `psi(tau) = exp(-sigma / tau)` for `tau > 0`; returns `(s, s', s'')`.
pub fn smooth_step(tau: f64, sigma: f64) -> [f64; 3] {
    if tau <= 0.0 {
        return [0.0, 0.0, 0.0];
    }
    if tau >= 1.0 {
        return [1.0, 0.0, 0.0];
    }
    let psi = |z: f64| -> [f64; 3] {
        let p = (-sigma / z).exp();
        if p == 0.0 {
            return [0.0; 3];
        }
        let z2 = z * z;
        [p, p * sigma / z2, p * (sigma * sigma / (z2 * z2) - 2.0 * sigma / (z2 * z))]
    };
    let [p, p1, p2] = psi(tau);
    let [q, mq1, q2] = psi(1.0 - tau);
    // d/dtau of psi(1 - tau) flips the sign of the first derivative.
    let q1 = -mq1;
    let s = p + q;
    let s1 = p1 + q1;
    let num1 = p1 * q - p * q1;
    let num2 = p2 * q - p * q2;
    [p / s, num1 / (s * s), (num2 * s - 2.0 * num1 * s1) / (s * s * s)]
}

/// Cutoff `chi(r)`: 0 on `[0, 1]`, 1 on `[2, inf)`.
pub fn cutoff(r: f64, sigma: f64) -> [f64; 3] {
    smooth_step(r - 1.0, sigma)
}

fn check_orders(dx: usize, dt: usize, max_dx: usize, max_dt: usize) -> Result<()> {
    if dx > max_dx || dt > max_dt {
        Err(Error::UnsupportedDerivative { dx, dt })
    } else {
        Ok(())
    }
}

/// `f = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroField;

impl SpaceTimeField for ZeroField {
    fn eval(&self, _x: f64, _t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        check_orders(dx, dt, 4, 2)?;
        Ok(Complex64::zero())
    }
}

/// Exact plane wave `w0 exp(i mu |w0|^2 t)`.
#[derive(Debug, Clone, Copy)]
pub struct PlaneWave {
    pub amplitude: Complex64,
    pub mu: Mu,
}

impl SpaceTimeField for PlaneWave {
    fn eval(&self, _x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        check_orders(dx, dt, 4, 2)?;
        if dx > 0 {
            return Ok(Complex64::zero());
        }
        let omega = self.mu.value() * self.amplitude.norm_sqr();
        let w = self.amplitude * Complex64::new(0.0, omega * t).exp();
        Ok(w * Complex64::new(0.0, omega).powu(dt as u32))
    }
}

/// Focusing soliton `a sqrt(2) sech(a x) exp(i a^2 t)`.
#[derive(Debug, Clone, Copy)]
pub struct Soliton {
    pub amplitude: f64,
}

impl Default for Soliton {
    fn default() -> Self {
        Self { amplitude: 1.0 }
    }
}

impl SpaceTimeField for Soliton {
    fn eval(&self, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        check_orders(dx, dt, 4, 2)?;
        let a = self.amplitude;
        let z = a * x;
        let s = 1.0 / z.cosh();
        let th = z.tanh();
        let s2 = s * s;
        // d^n/dz^n sech z as polynomials in sech and tanh.
        let spatial = match dx {
            0 => s,
            1 => -s * th,
            2 => s - 2.0 * s * s2,
            3 => -s * th + 6.0 * s * s2 * th,
            _ => s - 20.0 * s * s2 + 24.0 * s * s2 * s2,
        } * a.powi(dx as i32);
        let omega = a * a;
        let phase = Complex64::new(0.0, omega * t).exp() * Complex64::new(0.0, omega).powu(dt as u32);
        Ok(phase * (a * std::f64::consts::SQRT_2 * spatial))
    }
}

/// How the activation radii `R_k` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum RadiiRule {
    /// `R_k = max(R_{k-1}, 1, (2^k max_t |c_k|)^{1/|gamma_k|})`, so each term is
    /// at most `2^{-k}` where it switches on.
    Damped,
    /// `R_k = base * ratio^k`.
    Geometric { base: f64, ratio: f64 },
    Explicit(Vec<f64>),
}

/// Treatment of `gamma = 0` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZeroMode {
    /// `c^- + H(x) (c^+ - c^-)` with a smooth step `H` switching on
    /// `[-1, 1]`; a common constant term is reproduced exactly everywhere.
    #[default]
    Blend,
    /// `chi(|x| / R_0) c^±` like every other term.
    Cutoff,
}

/// Series-built background `f`.
#[derive(Debug, Clone)]
pub struct AsymptoticProfile {
    pub plus: FormalSeries,
    pub minus: FormalSeries,
    pub radii: Vec<f64>,
    pub cutoff_sharpness: f64,
    pub truncation: usize,
    pub zero_mode: ZeroMode,
}

fn damped_radii(plus: &FormalSeries, minus: &FormalSeries, count: usize) -> Vec<f64> {
    let mut radii = Vec::with_capacity(count);
    let mut prev: f64 = 1.0;
    for k in 0..count {
        let mut r = prev;
        for s in [plus, minus] {
            if k < s.len() {
                let gamma = s.exponent_set.value(k);
                let size = s.coefficients[k].max_modulus();
                if gamma < 0.0 && size > 0.0 {
                    let need = (2f64.powi(k as i32) * size).powf(1.0 / gamma.abs());
                    r = r.max(need);
                }
            }
        }
        radii.push(r);
        prev = r;
    }
    radii
}

/// Builds `f = sum_{k <= N} chi(|x| / R_k) c_k^±(t) |x|^{gamma_k}` for `±x > 0`.
pub fn build_profile(
    plus: FormalSeries,
    minus: FormalSeries,
    truncation: usize,
    rule: &RadiiRule,
    zero_mode: ZeroMode,
) -> Result<AsymptoticProfile> {
    if plus.side != Side::Plus || minus.side != Side::Minus {
        return Err(Error::SideMismatch("expected (plus, minus) series".into()));
    }
    if plus.mu != minus.mu {
        return Err(Error::SideMismatch("series disagree on mu".into()));
    }
    if (plus.horizon - minus.horizon).abs() > 1e-12 * plus.horizon.max(1.0)
        || (plus.dt - minus.dt).abs() > 1e-15 * plus.dt.max(1.0)
    {
        return Err(Error::SideMismatch("series disagree on horizon or time step".into()));
    }
    let count = truncation + 1;
    let radii = match rule {
        RadiiRule::Damped => damped_radii(&plus, &minus, count),
        RadiiRule::Geometric { base, ratio } => {
            (0..count).map(|k| base * ratio.powi(k as i32)).collect()
        }
        RadiiRule::Explicit(r) => {
            if r.len() < count {
                return Err(Error::Precondition(format!(
                    "need {count} radii, got {}",
                    r.len()
                )));
            }
            r[..count].to_vec()
        }
    };
    if radii.first().is_some_and(|r| *r < 1.0) || radii.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition(
            "radii must be nondecreasing with R_0 >= 1".into(),
        ));
    }
    Ok(AsymptoticProfile {
        plus,
        minus,
        radii,
        cutoff_sharpness: 1.0,
        truncation,
        zero_mode,
    })
}

/// Coefficients and their time derivatives at one instant.
struct Snapshot {
    plus: (Vec<Complex64>, Vec<Complex64>),
    minus: (Vec<Complex64>, Vec<Complex64>),
}

impl AsymptoticProfile {
    pub fn mu(&self) -> Mu {
        self.plus.mu
    }

    pub fn horizon(&self) -> f64 {
        self.plus.horizon
    }

    fn snapshot(&self, t: f64) -> Result<Snapshot> {
        let side = |s: &FormalSeries| -> Result<(Vec<Complex64>, Vec<Complex64>)> {
            let c = s.coefficients_at(t)?;
            let dc = s.derivatives_from(&c);
            Ok((c, dc))
        };
        Ok(Snapshot {
            plus: side(&self.plus)?,
            minus: side(&self.minus)?,
        })
    }

    fn eval_at(&self, snap: &Snapshot, x: f64, dx: usize, dt: usize) -> Complex64 {
        let sigma = self.cutoff_sharpness;
        let pick = |pair: &(Vec<Complex64>, Vec<Complex64>), k: usize| -> Complex64 {
            if dt == 0 { pair.0[k] } else { pair.1[k] }
        };
        let mut total = Complex64::zero();

        let zero_index = |s: &FormalSeries| {
            s.exponent_set
                .exponents()
                .iter()
                .position(|g| g.numer() == &0)
                .filter(|k| *k <= self.truncation)
        };
        let (zp, zm) = (zero_index(&self.plus), zero_index(&self.minus));
        if self.zero_mode == ZeroMode::Blend {
            let cp = zp.map_or(Complex64::zero(), |k| pick(&snap.plus, k));
            let cm = zm.map_or(Complex64::zero(), |k| pick(&snap.minus, k));
            let [h0, h1, h2] = smooth_step((x + 1.0) / 2.0, sigma);
            total += match dx {
                0 => cm + (cp - cm) * h0,
                1 => (cp - cm) * (h1 / 2.0),
                _ => (cp - cm) * (h2 / 4.0),
            };
        }

        let (series, pair, sign) = if x > 0.0 {
            (&self.plus, &snap.plus, 1.0)
        } else {
            (&self.minus, &snap.minus, -1.0)
        };
        let r = x.abs();
        for k in 0..series.len().min(self.truncation + 1) {
            if self.zero_mode == ZeroMode::Blend && Some(k) == zero_index(series) {
                continue;
            }
            let radius = self.radii[k];
            if r <= radius {
                continue;
            }
            let c = pick(pair, k);
            if c == Complex64::zero() {
                continue;
            }
            let g = series.exponent_set.value(k);
            let [p0, p1, p2] = cutoff(r / radius, sigma);
            let pw = r.powf(g);
            // d^n/dx^n = sign^n d^n/dr^n on this side.
            let radial = match dx {
                0 => p0 * pw,
                1 => sign * (p1 / radius * pw + p0 * g * pw / r),
                _ => {
                    p2 / (radius * radius) * pw
                        + 2.0 * p1 / radius * g * pw / r
                        + p0 * g * (g - 1.0) * pw / (r * r)
                }
            };
            total += c * radial;
        }
        total
    }

    /// Partial sum of the initial data, `sum_{k <= N} c_k^±(0) |x|^{gamma_k}`.
    pub fn initial_partial_sum(&self, x: f64) -> Complex64 {
        let s = if x > 0.0 { &self.plus } else { &self.minus };
        s.coefficients
            .iter()
            .take(self.truncation + 1)
            .enumerate()
            .map(|(k, p)| p.initial * x.abs().powf(s.exponent_set.value(k)))
            .sum()
    }
}

impl SpaceTimeField for AsymptoticProfile {
    fn eval(&self, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        check_orders(dx, dt, 2, 1)?;
        let snap = self.snapshot(t)?;
        Ok(self.eval_at(&snap, x, dx, dt))
    }

    fn eval_slice(&self, xs: &[f64], t: f64, dx: usize, dt: usize) -> Result<Vec<Complex64>> {
        check_orders(dx, dt, 2, 1)?;
        let snap = self.snapshot(t)?;
        Ok(xs.iter().map(|&x| self.eval_at(&snap, x, dx, dt)).collect())
    }
}

/// `eval_profile(p, x, t, dx, dt)`.
pub fn eval_profile(p: &AsymptoticProfile, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
    p.eval(x, t, dx, dt)
}

/// `g = i f_t + f_xx + mu (f f) conj(f)` on one slice.
pub fn defect_slice(
    field: &dyn SpaceTimeField,
    mu: Mu,
    xs: &[f64],
    t: f64,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let f = field.eval_slice(xs, t, 0, 0)?;
    let fxx = field.eval_slice(xs, t, 2, 0)?;
    let ft = field.eval_slice(xs, t, 0, 1)?;
    let g = f
        .iter()
        .zip(&fxx)
        .zip(&ft)
        .map(|((f, fxx), ft)| Complex64::i() * ft + fxx + (f * f) * f.conj() * mu.value())
        .collect();
    Ok((f, g))
}

/// Defect sampled at every mesh node and level.
#[derive(Debug, Clone)]
pub struct DefectField {
    pub spec: MeshSpec,
    pub levels: Vec<GridPair>,
}

pub fn compute_defect(field: &dyn SpaceTimeField, mu: Mu, mesh: &MeshSpec) -> Result<DefectField> {
    let xs = mesh.xs();
    let levels = (0..=mesh.last_level())
        .map(|j| {
            let (_, g) = defect_slice(field, mu, &xs, mesh.t(j))?;
            for (n, v) in g.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { node: n });
                }
            }
            Ok(GridPair::from_raw(
                *mesh,
                g.iter().map(|z| z.re).collect(),
                g.iter().map(|z| z.im).collect(),
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DefectField { spec: *mesh, levels })
}

/// `max_j max(|| <x>^N D+^n g1_j ||, || <x>^N D+^n g2_j ||)`.
pub fn schwartz_check(d: &DefectField, weight: u32, order: usize) -> f64 {
    d.levels
        .iter()
        .flat_map(|g| [schwartz_seminorm(&g.re, weight, order), schwartz_seminorm(&g.im, weight, order)])
        .fold(0.0, f64::max)
}

impl DefectField {
    /// CSV with header `t,x,g1,g2`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,g1,g2")?;
        for (j, g) in self.levels.iter().enumerate() {
            let t = self.spec.t(j);
            for n in 0..g.re.len() {
                writeln!(
                    w,
                    "{t:.17e},{:.17e},{:.17e},{:.17e}",
                    self.spec.x(n),
                    g.re.values()[n],
                    g.im.values()[n]
                )?;
            }
        }
        Ok(())
    }

    pub fn level(&self, j: usize) -> Result<&GridPair> {
        self.levels.get(j).ok_or(Error::IndexOutOfRange {
            index: j,
            len: self.levels.len(),
        })
    }
}
