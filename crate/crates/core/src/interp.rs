//! Sinc (Whittaker-Shannon) interpolation of mesh functions in space, in time,
//! and in both variables at once.
//!
//! `U(x) = sum_l u_l sinc(pi (x - x_l) / h)`, truncated to the `W` nodes
//! nearest to `x` on each side.

use std::f64::consts::PI;
use std::io::{self, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{d_plus_pow, norm_l2h, GridFn};
use crate::profile::SpaceTimeField;
use crate::scheme::ExtendedField;

pub const DEFAULT_WINDOW: usize = 256;

const TAYLOR_TERMS: usize = 16;

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

/// `d^n/dz^n (sin z / z)` given `sin z` and `cos z` (passed separately so the
/// caller can reduce the argument exactly).
fn sinc_derivative(z: f64, sin_z: f64, cos_z: f64, n: usize) -> f64 {
    if z.abs() < 1.0 {
        let mut sum = 0.0;
        for i in 0..TAYLOR_TERMS {
            let p = 2 * i;
            if p < n {
                continue;
            }
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let coeff = factorial(p) / factorial(p - n) / factorial(p + 1);
            sum += sign * coeff * z.powi((p - n) as i32);
        }
        return sum;
    }
    let sin_deriv = |p: usize| match p % 4 {
        0 => sin_z,
        1 => cos_z,
        2 => -sin_z,
        _ => -cos_z,
    };
    let mut binom = 1.0;
    let mut sum = 0.0;
    for k in 0..=n {
        let inv = if k % 2 == 0 { 1.0 } else { -1.0 } * factorial(k) / z.powi(k as i32 + 1);
        sum += binom * sin_deriv(n - k) * inv;
        binom = binom * (n - k) as f64 / (k + 1) as f64;
    }
    sum
}

/// Weights `d^n/dx^n sinc(pi (x - x_m) / h)` for nodes `m = start..start+len`
/// where `s = (x - x_0) / h` is the position in node units.
fn kernel_weights(s: f64, count: usize, window: usize, order: usize, h: f64) -> (usize, Vec<f64>) {
    if count == 0 {
        return (0, Vec::new());
    }
    let c = s.round();
    let mut frac = s - c;
    if frac.abs() < 1e-12 {
        frac = 0.0;
    }
    if frac == 0.0 && order == 0 {
        // Cardinal property: only the node itself contributes.
        if c < 0.0 || c > count as f64 - 1.0 {
            return (0, Vec::new());
        }
        return (c as usize, vec![1.0]);
    }
    let (sf, cf) = (PI * frac).sin_cos();
    let lo = (c - window as f64).max(0.0);
    let hi = (c + window as f64).min(count as f64 - 1.0);
    if lo > hi {
        return (0, Vec::new());
    }
    let (lo, hi) = (lo as usize, hi as usize);
    let scale = (PI / h).powi(order as i32);
    let ci = c as i64;
    let w = (lo..=hi)
        .map(|m| {
            let d = ci - m as i64;
            let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let z = PI * (d as f64 + frac);
            scale * sinc_derivative(z, sign * sf, sign * cf, order)
        })
        .collect();
    (lo, w)
}

/// Band-limited interpolant of one real mesh function.
#[derive(Debug, Clone)]
pub struct SmoothInterpolant {
    x0: f64,
    h: f64,
    values: Vec<f64>,
    window: usize,
}

pub fn sinc_interp(u: &GridFn, window: usize) -> SmoothInterpolant {
    let spec = u.spec();
    SmoothInterpolant {
        x0: spec.x(0),
        h: spec.h,
        values: u.values().to_vec(),
        window,
    }
}

impl SmoothInterpolant {
    /// Interpolant of raw samples `values[m]` at `x0 + m h`.
    pub fn from_samples(x0: f64, h: f64, values: Vec<f64>, window: usize) -> Self {
        Self { x0, h, values, window }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// `d^order U / dx^order` at `x`, `order <= 4`.
    pub fn eval(&self, x: f64, order: usize) -> Result<f64> {
        if order > 4 {
            return Err(Error::UnsupportedDerivative { dx: order, dt: 0 });
        }
        let s = (x - self.x0) / self.h;
        let (lo, w) = kernel_weights(s, self.values.len(), self.window, order, self.h);
        Ok(w.iter().zip(&self.values[lo..]).map(|(w, v)| w * v).sum())
    }

    /// CSV `x,value` at the given abscissae.
    pub fn write_samples_csv<W: Write>(&self, xs: &[f64], order: usize, mut w: W) -> io::Result<()> {
        writeln!(w, "x,value")?;
        for &x in xs {
            let v = self.eval(x, order).map_err(io::Error::other)?;
            writeln!(w, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// Composite Simpson rule on `[a, b]` with `2 m` panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1) * 2;
    let step = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(a + i as f64 * step);
    }
    sum * step / 3.0
}

/// Quadrature grid used for continuum norms: `[-L-4, L+4]` at spacing `h / oversampling`.
fn continuum_norm(u: &GridFn, f: impl Fn(f64) -> f64, oversampling: usize) -> f64 {
    let spec = u.spec();
    let a = -spec.half_width - 4.0;
    let b = spec.half_width + 4.0;
    let panels = (((b - a) / spec.h) * oversampling as f64 / 2.0).ceil() as usize;
    simpson(|x| f(x).powi(2), a, b, panels).max(0.0).sqrt()
}

/// `(2/pi)^j ||d^j U||`, `||D+^j u||_h` and `||d^j U||`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormRelation {
    pub j: usize,
    pub lower: f64,
    pub discrete: f64,
    pub upper: f64,
}

impl NormRelation {
    /// `(discrete - lower, upper - discrete)`; both nonnegative when the
    /// sandwich holds. For `j = 0` these are `-/+` the isometry deviation.
    pub fn slack(&self) -> (f64, f64) {
        (self.discrete - self.lower, self.upper - self.discrete)
    }

    pub fn isometry_deviation(&self) -> f64 {
        (self.upper - self.discrete).abs()
    }
}

pub const DEFAULT_OVERSAMPLING: usize = 16;

/// Sandwich `(2/pi)^j ||d^j U|| <= ||D+^j u||_h <= ||d^j U||` for `j = 0..=j_max`.
pub fn check_norm_relations(u: &GridFn, j_max: usize, oversampling: usize) -> Result<Vec<NormRelation>> {
    if j_max > 4 {
        return Err(Error::UnsupportedDerivative { dx: j_max, dt: 0 });
    }
    let interp = sinc_interp(u, DEFAULT_WINDOW.max(u.len()));
    (0..=j_max)
        .map(|j| {
            let upper = continuum_norm(u, |x| interp.eval(x, j).unwrap_or(f64::NAN), oversampling);
            Ok(NormRelation {
                j,
                lower: if j == 0 { upper } else { (2.0 / PI).powi(j as i32) * upper },
                discrete: norm_l2h(&d_plus_pow(u, j)),
                upper,
            })
        })
        .collect()
}

/// Weighted sandwich for `x^N U` against `D+^j (x^N u)`; `decay` is the
/// order `M` with `x^M u` square summable and must satisfy `N <= M - 2`.
pub fn check_weighted_relations(
    u: &GridFn,
    weight: u32,
    decay: u32,
    j: usize,
    oversampling: usize,
) -> Result<NormRelation> {
    if weight + 2 > decay {
        return Err(Error::Precondition(format!(
            "weight N = {weight} needs decay order M >= N + 2, got M = {decay}"
        )));
    }
    if j > 4 {
        return Err(Error::UnsupportedDerivative { dx: j, dt: 0 });
    }
    let top = u.map(|x, v| x.powi(decay as i32) * v);
    if !norm_l2h(&top).is_finite() {
        return Err(Error::Precondition("x^M u is not square summable".into()));
    }
    let interp = sinc_interp(u, DEFAULT_WINDOW.max(u.len()));
    let nn = weight as i32;
    // d^j (x^N U) by the Leibniz rule.
    let weighted = |x: f64| -> f64 {
        let mut binom = 1.0;
        let mut sum = 0.0;
        for i in 0..=j {
            if i as i32 <= nn {
                let falling = (0..i).fold(1.0, |a, r| a * (nn - r as i32) as f64);
                let poly = falling * x.powi(nn - i as i32);
                sum += binom * poly * interp.eval(x, j - i).unwrap_or(f64::NAN);
            }
            binom = binom * (j - i) as f64 / (i + 1) as f64;
        }
        sum
    };
    let upper = continuum_norm(u, weighted, oversampling);
    let xu = u.map(|x, v| x.powi(nn) * v);
    Ok(NormRelation {
        j,
        lower: (2.0 / PI).powi(j as i32) * upper,
        discrete: norm_l2h(&d_plus_pow(&xu, j)),
        upper,
    })
}

/// `I u-hat = sum_{n, j} u-hat(x_n, t_j) sinc_h(x - x_n) sinc_k(t - t_j)`.
#[derive(Debug, Clone)]
pub struct CombinedInterpolant {
    field: ExtendedField,
    window_x: usize,
    window_t: usize,
}

/// A `None` window sums over every stored node in that direction. Truncated
/// windows make derivatives at nodes converge only like `1 / window`.
pub fn combined_interp(field: ExtendedField, window_x: Option<usize>, window_t: Option<usize>) -> CombinedInterpolant {
    let (lo, hi) = field.range();
    CombinedInterpolant {
        window_x: window_x.unwrap_or(field.spec().n_space),
        window_t: window_t.unwrap_or((hi - lo + 1) as usize),
        field,
    }
}

impl CombinedInterpolant {
    pub fn field(&self) -> &ExtendedField {
        &self.field
    }

    /// CSV `t,x,re,im` on the product of the given coordinates.
    pub fn write_samples_csv<W: Write>(&self, ts: &[f64], xs: &[f64], mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,re,im")?;
        for &t in ts {
            for &x in xs {
                let v = self.eval(x, t, 0, 0).map_err(io::Error::other)?;
                writeln!(w, "{t:.17e},{x:.17e},{:.17e},{:.17e}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

impl SpaceTimeField for CombinedInterpolant {
    fn eval(&self, x: f64, t: f64, dx: usize, dt: usize) -> Result<Complex64> {
        if dx > 4 || dt > 2 {
            return Err(Error::UnsupportedDerivative { dx, dt });
        }
        let spec = self.field.spec();
        let (lo, hi) = self.field.range();
        let count_t = (hi - lo + 1) as usize;
        let s_t = (t / spec.k) - lo as f64;
        let (t_start, wt) = kernel_weights(s_t, count_t, self.window_t, dt, spec.k);
        let s_x = (x - spec.x(0)) / spec.h;
        let (x_start, wx) = kernel_weights(s_x, spec.n_space, self.window_x, dx, spec.h);
        let mut total = Complex64::new(0.0, 0.0);
        for (a, wtj) in wt.iter().enumerate() {
            if *wtj == 0.0 {
                continue;
            }
            let j = lo + (t_start + a) as isize;
            let mut inner = Complex64::new(0.0, 0.0);
            for (b, wxn) in wx.iter().enumerate() {
                if *wxn != 0.0 {
                    inner += self.field.value(x_start + b, j) * *wxn;
                }
            }
            total += inner * *wtj;
        }
        Ok(total)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::MeshSpec;

    fn spec(h: f64, l: f64) -> MeshSpec {
        MeshSpec::new(h, 0.01, l, 1.0).unwrap()
    }

    /// Direct evaluation of the sinc sum, no window and no argument reduction.
    fn sinc_sum(u: &GridFn, x: f64) -> f64 {
        let s = u.spec();
        (0..u.len())
            .map(|n| {
                let z = PI * (x - s.x(n)) / s.h;
                let k = if z == 0.0 { 1.0 } else { z.sin() / z };
                u.values()[n] * k
            })
            .sum()
    }

    #[test]
    fn spike_example() {
        let u = GridFn::spike(spec(1.0, 5.0), 0.0);
        let i = sinc_interp(&u, DEFAULT_WINDOW);
        assert!((i.eval(0.5, 0).unwrap() - 2.0 / PI).abs() < 1e-15);
        assert_eq!(i.eval(0.0, 0).unwrap(), 1.0);
        assert_eq!(i.eval(3.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn zero_input() {
        let u = GridFn::zeros(spec(0.5, 4.0));
        let i = sinc_interp(&u, 64);
        for x in [-3.3, 0.1, 2.0] {
            for d in 0..=4 {
                assert_eq!(i.eval(x, d).unwrap(), 0.0);
            }
        }
        assert!(i.eval(0.0, 5).is_err());
        for r in check_norm_relations(&u, 2, 16).unwrap() {
            assert_eq!((r.lower, r.discrete, r.upper), (0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn matches_direct_sum() {
        let u = GridFn::from_fn(spec(0.25, 4.0), |x| (-x * x).exp() * (1.0 + x).sin());
        let i = sinc_interp(&u, DEFAULT_WINDOW);
        for x in [-4.6, -1.13, 0.0, 0.37, 2.999, 5.5] {
            assert!((i.eval(x, 0).unwrap() - sinc_sum(&u, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn kernel_derivatives_match_differences() {
        let eps = 1e-4;
        for z in [0.3, 0.99, 1.01, 2.5, 7.3, -4.2] {
            for n in 1..=4 {
                let f = |z: f64| sinc_derivative(z, z.sin(), z.cos(), n - 1);
                let fd = (f(z + eps) - f(z - eps)) / (2.0 * eps);
                let d = sinc_derivative(z, z.sin(), z.cos(), n);
                assert!((d - fd).abs() < 1e-7, "n {n} z {z}");
            }
        }
        assert!((sinc_derivative(0.0, 0.0, 1.0, 2) + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_isometry() {
        let u = GridFn::from_fn(spec(0.25, 8.0), |x| (-x * x).exp());
        let r = check_norm_relations(&u, 2, 16).unwrap();
        assert!(r[0].isometry_deviation() <= 1e-6);
        for rel in &r[1..] {
            let (a, b) = rel.slack();
            assert!(a >= -1e-8 && b >= -1e-8);
        }
    }

    #[test]
    fn weighted_relation_gaussian() {
        let u = GridFn::from_fn(spec(0.25, 8.0), |x| (-x * x).exp());
        let r = check_weighted_relations(&u, 1, 3, 1, 16).unwrap();
        let (a, b) = r.slack();
        assert!(a >= -1e-8 && b >= -1e-8, "{r:?}");
        assert!(matches!(
            check_weighted_relations(&u, 2, 3, 1, 16),
            Err(Error::Precondition(_))
        ));
        let z = GridFn::zeros(spec(0.25, 2.0));
        let r = check_weighted_relations(&z, 1, 3, 1, 16).unwrap();
        assert_eq!((r.lower, r.discrete, r.upper), (0.0, 0.0, 0.0));
    }

    #[test]
    fn window_convergence() {
        let u = GridFn::from_fn(spec(0.25, 40.0), |x| (-x * x / 4.0).exp());
        let a = sinc_interp(&u, 256);
        let b = sinc_interp(&u, 512);
        for x in [0.13, 1.7, -3.31] {
            assert!((a.eval(x, 0).unwrap() - b.eval(x, 0).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 3);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }
}
