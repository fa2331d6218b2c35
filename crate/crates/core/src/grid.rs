//! Uniform space-time meshes, difference and shift operators, and the
//! weighted discrete norms.
//!
//! The spatial domain is truncated to `[-L, L]` with nodes `x_n = n h`. Values
//! outside the stored nodes are treated as zero ("ghost" nodes), so `D+`, `D-`
//! and the shifts are total on every grid function.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Japanese bracket `<x> = sqrt(x^2 + 1)`.
#[inline]
pub fn japanese(x: f64) -> f64 {
    (x * x + 1.0).sqrt()
}

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() <= PAIRWISE_BLOCK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Geometry of the space-time mesh.
///
/// Spatial nodes are `x_n = (n - c) h` for `n = 0..n_space` with `c` the
/// centre index, so that they span `[-half_width, half_width]` exactly. Time
/// levels are `t_j = j k` for `j = 0..n_time`, ending at `horizon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshSpec {
    pub h: f64,
    pub k: f64,
    pub half_width: f64,
    pub horizon: f64,
    pub n_space: usize,
    pub n_time: usize,
}

fn integer_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let r = num / den;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * n.max(1.0) {
        return Err(Error::InvalidMesh(format!(
            "{what} must be an integer multiple of the step (ratio {r})"
        )));
    }
    Ok(n as usize)
}

impl MeshSpec {
    /// Steps must satisfy `0 < h, k <= 1`; `half_width / h` and
    /// `horizon / k` must be integers.
    pub fn new(h: f64, k: f64, half_width: f64, horizon: f64) -> Result<Self> {
        for (name, v) in [("h", h), ("k", k), ("half_width", half_width), ("horizon", horizon)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidMesh(format!("{name} must be positive, got {v}")));
            }
        }
        if h > 1.0 || k > 1.0 {
            return Err(Error::InvalidMesh(format!(
                "steps must lie in (0, 1], got h = {h}, k = {k}"
            )));
        }
        let half_nodes = integer_ratio(half_width, h, "half_width")?;
        let steps = integer_ratio(horizon, k, "horizon")?;
        Ok(Self {
            h,
            k,
            half_width,
            horizon,
            n_space: 2 * half_nodes + 1,
            n_time: steps + 1,
        })
    }

    /// Index of the node at `x = 0`.
    #[inline]
    pub fn center(&self) -> usize {
        (self.n_space - 1) / 2
    }

    #[inline]
    pub fn x(&self, n: usize) -> f64 {
        (n as f64 - self.center() as f64) * self.h
    }

    #[inline]
    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.k
    }

    /// Index of the last time level.
    #[inline]
    pub fn last_level(&self) -> usize {
        self.n_time - 1
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.n_space).map(|n| self.x(n)).collect()
    }

    /// Same mesh with a different time step (used by refinement ladders).
    pub fn with_steps(&self, h: f64, k: f64) -> Result<Self> {
        Self::new(h, k, self.half_width, self.horizon)
    }

    /// The time extension needs at least three steps inside `[0, T]`.
    pub fn check_extension(&self) -> Result<()> {
        if self.k > self.horizon / 3.0 + 1e-15 {
            return Err(Error::InvalidMesh(format!(
                "time extension requires k <= T/3 (k = {}, T = {})",
                self.k, self.horizon
            )));
        }
        Ok(())
    }
}

/// Real mesh function on the spatial nodes of a [`MeshSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFn {
    spec: MeshSpec,
    values: Vec<f64>,
}

impl GridFn {
    pub fn new(spec: MeshSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.n_space {
            return Err(Error::LengthMismatch {
                expected: spec.n_space,
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(Self { spec, values })
    }

    pub(crate) fn from_raw(spec: MeshSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.n_space);
        Self { spec, values }
    }

    pub fn zeros(spec: MeshSpec) -> Self {
        Self::from_raw(spec, vec![0.0; spec.n_space])
    }

    /// Samples `f` at every node.
    pub fn from_fn(spec: MeshSpec, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(spec, (0..spec.n_space).map(|n| f(spec.x(n))).collect())
    }

    /// Unit value at the node nearest `x`, zero elsewhere.
    pub fn spike(spec: MeshSpec, x: f64) -> Self {
        let mut values = vec![0.0; spec.n_space];
        let n = (x / spec.h).round() as i64 + spec.center() as i64;
        if (0..spec.n_space as i64).contains(&n) {
            values[n as usize] = 1.0;
        }
        Self::from_raw(spec, values)
    }

    #[inline]
    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at node `n` (zero for ghost nodes).
    #[inline]
    pub fn at(&self, n: isize) -> f64 {
        if n < 0 {
            0.0
        } else {
            self.values.get(n as usize).copied().unwrap_or(0.0)
        }
    }

    pub fn value_at_x(&self, x: f64) -> f64 {
        let n = (x / self.spec.h).round() as isize + self.spec.center() as isize;
        self.at(n)
    }

    pub fn map(&self, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(n, &v)| f(self.spec.x(n), v))
            .collect();
        Self::from_raw(self.spec, values)
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_raw(self.spec, self.values.iter().map(|v| a * v).collect())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &GridFn) -> Result<Self> {
        same_mesh(&self.spec, &other.spec)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x + a * y)
            .collect();
        Ok(Self::from_raw(self.spec, values))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Two-component mesh function `(u1, u2) = (Re u, Im u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPair {
    pub re: GridFn,
    pub im: GridFn,
}

impl GridPair {
    pub fn new(re: GridFn, im: GridFn) -> Result<Self> {
        same_mesh(re.spec(), im.spec())?;
        Ok(Self { re, im })
    }

    pub fn zeros(spec: MeshSpec) -> Self {
        Self {
            re: GridFn::zeros(spec),
            im: GridFn::zeros(spec),
        }
    }

    pub fn from_complex_fn(spec: MeshSpec, f: impl Fn(f64) -> Complex64) -> Self {
        let (re, im): (Vec<f64>, Vec<f64>) = (0..spec.n_space)
            .map(|n| {
                let z = f(spec.x(n));
                (z.re, z.im)
            })
            .unzip();
        Self {
            re: GridFn::from_raw(spec, re),
            im: GridFn::from_raw(spec, im),
        }
    }

    pub(crate) fn from_raw(spec: MeshSpec, re: Vec<f64>, im: Vec<f64>) -> Self {
        Self {
            re: GridFn::from_raw(spec, re),
            im: GridFn::from_raw(spec, im),
        }
    }

    #[inline]
    pub fn spec(&self) -> &MeshSpec {
        self.re.spec()
    }

    #[inline]
    pub fn value(&self, n: usize) -> Complex64 {
        Complex64::new(self.re.values[n], self.im.values[n])
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &GridPair) -> Result<Self> {
        Ok(Self {
            re: self.re.axpy(a, &other.re)?,
            im: self.im.axpy(a, &other.im)?,
        })
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            re: self.re.scaled(a),
            im: self.im.scaled(a),
        }
    }

    /// `max_n |u(x_n)|` of the complex value.
    pub fn sup_modulus(&self) -> f64 {
        (0..self.re.len()).fold(0.0, |m, n| m.max(self.value(n).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.re.values.iter().chain(&self.im.values).all(|v| v.is_finite())
    }
}

fn same_mesh(a: &MeshSpec, b: &MeshSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

pub(crate) fn d_plus_slice(v: &[f64], h: f64) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let next = if i + 1 < n { v[i + 1] } else { 0.0 };
            (next - v[i]) / h
        })
        .collect()
}

pub(crate) fn d_minus_slice(v: &[f64], h: f64) -> Vec<f64> {
    (0..v.len())
        .map(|i| {
            let prev = if i > 0 { v[i - 1] } else { 0.0 };
            (v[i] - prev) / h
        })
        .collect()
}

/// Forward difference `(u(x+h) - u(x)) / h`.
pub fn d_plus(u: &GridFn) -> GridFn {
    GridFn::from_raw(u.spec, d_plus_slice(&u.values, u.spec.h))
}

/// Backward difference `(u(x) - u(x-h)) / h`.
pub fn d_minus(u: &GridFn) -> GridFn {
    GridFn::from_raw(u.spec, d_minus_slice(&u.values, u.spec.h))
}

/// `D+^n u`.
pub fn d_plus_pow(u: &GridFn, n: usize) -> GridFn {
    let mut v = u.values.clone();
    for _ in 0..n {
        v = d_plus_slice(&v, u.spec.h);
    }
    GridFn::from_raw(u.spec, v)
}

/// Direction of the unit node shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shift {
    /// `(E u)(x) = u(x + h)`.
    Forward,
    /// `(E^-1 u)(x) = u(x - h)`.
    Backward,
}

pub fn shift(u: &GridFn, dir: Shift) -> GridFn {
    let n = u.len();
    let mut out = vec![0.0; n];
    match dir {
        Shift::Forward => out[..n.saturating_sub(1)].copy_from_slice(&u.values[1..]),
        Shift::Backward => out[1..].copy_from_slice(&u.values[..n.saturating_sub(1)]),
    }
    GridFn::from_raw(u.spec, out)
}

/// `(seq[j+1] - seq[j]) / k` componentwise.
pub fn d_t_plus(seq: &[GridPair], j: usize) -> Result<GridPair> {
    if j + 1 >= seq.len() {
        return Err(Error::IndexOutOfRange {
            index: j + 1,
            len: seq.len(),
        });
    }
    let k = seq[j].spec().k;
    seq[j + 1].axpy(-1.0, &seq[j]).map(|d| d.scaled(1.0 / k))
}

/// `(u, v)_{L^2_h} = sum_n u(x_n) v(x_n) h`.
pub fn inner_l2h(u: &GridFn, v: &GridFn) -> Result<f64> {
    same_mesh(&u.spec, &v.spec)?;
    Ok(pairwise_dot(&u.values, &v.values) * u.spec.h)
}

pub fn norm_l2h(u: &GridFn) -> f64 {
    (pairwise_dot(&u.values, &u.values) * u.spec.h).sqrt()
}

/// L^2_h norm of a pair: `sqrt(|u1|^2 + |u2|^2)`.
pub fn norm_l2h_pair(u: &GridPair) -> f64 {
    let h = u.spec().h;
    ((pairwise_dot(&u.re.values, &u.re.values) + pairwise_dot(&u.im.values, &u.im.values)) * h)
        .sqrt()
}

fn inner_sh_scalar(u: &[f64], v: &[f64], spec: &MeshSpec) -> f64 {
    let h = spec.h;
    let w2: Vec<f64> = (0..spec.n_space)
        .map(|n| {
            let x = spec.x(n);
            x * x + 1.0
        })
        .collect();
    let du = d_plus_slice(u, h);
    let dv = d_plus_slice(v, h);
    let d2u = d_plus_slice(&du, h);
    let d2v = d_plus_slice(&dv, h);
    let t0: Vec<f64> = (0..u.len()).map(|n| w2[n] * u[n] * v[n]).collect();
    let t1: Vec<f64> = (0..u.len()).map(|n| w2[n] * du[n] * dv[n]).collect();
    (pairwise_sum(&t0) + pairwise_sum(&t1) + pairwise_dot(&d2u, &d2v)) * h
}

/// Weighted Sobolev inner product
/// `(<x>u, <x>v) + (<x>D+u, <x>D+v) + (D+^2 u, D+^2 v)`, summed over both
/// components.
pub fn inner_sh(u: &GridPair, v: &GridPair) -> Result<f64> {
    same_mesh(u.spec(), v.spec())?;
    let spec = u.spec();
    Ok(inner_sh_scalar(&u.re.values, &v.re.values, spec)
        + inner_sh_scalar(&u.im.values, &v.im.values, spec))
}

pub fn norm_sh(u: &GridPair) -> f64 {
    let spec = u.spec();
    (inner_sh_scalar(&u.re.values, &u.re.values, spec)
        + inner_sh_scalar(&u.im.values, &u.im.values, spec))
    .max(0.0)
    .sqrt()
}

/// `|| <x>^N D+^n u ||_{L^2_h}`.
pub fn schwartz_seminorm(u: &GridFn, weight: u32, order: usize) -> f64 {
    let spec = u.spec;
    let d = d_plus_pow(u, order);
    let weighted: Vec<f64> = d
        .values
        .iter()
        .enumerate()
        .map(|(n, v)| japanese(spec.x(n)).powi(weight as i32) * v)
        .collect();
    norm_l2h(&GridFn::from_raw(spec, weighted))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mesh(h: f64, l: f64) -> MeshSpec {
        MeshSpec::new(h, 0.01, l, 1.0).unwrap()
    }

    #[test]
    fn mesh_geometry() {
        let m = mesh(0.25, 2.0);
        assert_eq!(m.n_space, 17);
        assert_eq!(m.x(0), -2.0);
        assert_eq!(m.x(16), 2.0);
        assert_eq!(m.x(m.center()), 0.0);
        assert_eq!(m.n_time, 101);
        assert!(MeshSpec::new(0.3, 0.01, 1.0, 1.0).is_err());
        assert!(MeshSpec::new(1.5, 0.01, 3.0, 1.0).is_err());
        assert!(MeshSpec::new(0.1, 0.0, 1.0, 1.0).is_err());
        assert!(MeshSpec::new(0.1, 0.5, 1.0, 1.0).unwrap().check_extension().is_err());
    }

    #[test]
    fn grid_fn_rejects_bad_values() {
        let m = mesh(0.5, 1.0);
        assert!(matches!(
            GridFn::new(m, vec![0.0; 4]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            GridFn::new(m, vec![0.0, f64::NAN, 0.0, 0.0, 0.0]),
            Err(Error::NonFinite { node: 1 })
        ));
    }

    #[test]
    fn d_plus_examples() {
        let m = mesh(0.5, 3.0);
        let lin = d_plus(&GridFn::from_fn(m, |x| x));
        for n in 0..m.n_space - 1 {
            assert!((lin.values()[n] - 1.0).abs() < 1e-14);
        }
        let sq = d_plus(&GridFn::from_fn(m, |x| x * x));
        assert!((sq.value_at_x(1.0) - 2.5).abs() < 1e-14);

        let m1 = mesh(1.0, 4.0);
        let spike = d_plus(&GridFn::spike(m1, 0.0));
        assert_eq!(spike.value_at_x(-1.0), 1.0);
        assert_eq!(spike.value_at_x(0.0), -1.0);
        assert_eq!(spike.values().iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn d_minus_examples() {
        let m = mesh(0.5, 3.0);
        let lin = d_minus(&GridFn::from_fn(m, |x| x));
        for n in 1..m.n_space {
            assert!((lin.values()[n] - 1.0).abs() < 1e-14);
        }
        let m1 = mesh(1.0, 4.0);
        let spike = d_minus(&GridFn::spike(m1, 0.0));
        assert_eq!(spike.value_at_x(0.0), 1.0);
        assert_eq!(spike.value_at_x(1.0), -1.0);

        let u = GridFn::from_fn(m, |x| (x * 1.3).sin() * x);
        let dd = d_minus(&d_plus(&u));
        let v = u.values();
        for n in 1..m.n_space - 1 {
            let second = (v[n + 1] - 2.0 * v[n] + v[n - 1]) / (m.h * m.h);
            assert!((dd.values()[n] - second).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_examples() {
        let m = mesh(0.25, 3.0);
        let z = GridFn::zeros(m);
        assert_eq!(shift(&z, Shift::Forward), z);
        assert_eq!(shift(&z, Shift::Backward), z);

        let u = GridFn::from_fn(m, |x| (-4.0 * x * x).exp());
        let e = shift(&u, Shift::Forward);
        assert_eq!(e.value_at_x(0.0), u.value_at_x(0.25));
        let back = shift(&e, Shift::Backward);
        for n in 1..m.n_space - 1 {
            assert_eq!(back.values()[n], u.values()[n]);
        }
        // Interior-supported data: isometry up to the dropped boundary node.
        let bump = GridFn::from_fn(m, |x| if x.abs() < 1.0 { 1.0 - x * x } else { 0.0 });
        assert!((norm_l2h(&shift(&bump, Shift::Forward)) - norm_l2h(&bump)).abs() < 1e-14);
    }

    #[test]
    fn d_t_plus_examples() {
        let m = MeshSpec::new(0.5, 0.1, 1.0, 1.0).unwrap();
        let ones = GridPair::from_complex_fn(m, |_| Complex64::new(1.0, 1.0));
        let constant = vec![ones.clone(); 3];
        let d = d_t_plus(&constant, 0).unwrap();
        assert_eq!(d.sup_modulus(), 0.0);

        let linear: Vec<GridPair> = (0..4).map(|j| ones.scaled(m.t(j))).collect();
        let d = d_t_plus(&linear, 2).unwrap();
        for n in 0..m.n_space {
            assert!((d.value(n) - Complex64::new(1.0, 1.0)).norm() < 1e-12);
        }

        let quad: Vec<GridPair> = (0..4).map(|j| ones.scaled(m.t(j).powi(2))).collect();
        let d = d_t_plus(&quad, 1).unwrap();
        let expected = 2.0 * m.t(1) + m.k;
        assert!((d.re.values()[0] - expected).abs() < 1e-12);

        assert!(matches!(
            d_t_plus(&quad, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn inner_l2h_examples() {
        let m = mesh(0.25, 2.0);
        let v = GridFn::from_fn(m, |x| x.cos());
        assert_eq!(inner_l2h(&GridFn::zeros(m), &v).unwrap(), 0.0);
        let s = GridFn::spike(m, 0.0);
        assert_eq!(inner_l2h(&s, &s).unwrap(), 0.25);
        let other = GridFn::zeros(mesh(0.5, 2.0));
        assert_eq!(inner_l2h(&s, &other), Err(Error::MeshMismatch));
    }

    #[test]
    fn norm_sh_examples() {
        let m = mesh(1.0, 5.0);
        assert_eq!(norm_sh(&GridPair::zeros(m)), 0.0);
        let u = GridPair::new(GridFn::spike(m, 0.0), GridFn::zeros(m)).unwrap();
        assert!((norm_sh(&u) - 10f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn schwartz_seminorm_examples() {
        let m = mesh(1.0, 5.0);
        let s = GridFn::spike(m, 0.0);
        assert_eq!(schwartz_seminorm(&s, 1, 0), 1.0);
        assert_eq!(schwartz_seminorm(&GridFn::zeros(m), 3, 2), 0.0);
        let g = GridFn::from_fn(mesh(0.1, 5.0), |x| (-x * x).exp());
        assert_eq!(schwartz_seminorm(&g, 0, 0), norm_l2h(&g));
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
    }

    fn interior_supported(values: Vec<f64>) -> GridFn {
        let m = mesh(0.1, 2.5);
        let mut padded = vec![0.0; m.n_space];
        padded[5..5 + values.len()].copy_from_slice(&values);
        GridFn::new(m, padded).unwrap()
    }

    proptest! {
        #[test]
        fn summation_by_parts(a in prop::collection::vec(-1.0f64..1.0, 30),
                              b in prop::collection::vec(-1.0f64..1.0, 30)) {
            let u = interior_supported(a);
            let v = interior_supported(b);
            let lhs = inner_l2h(&d_plus(&u), &v).unwrap();
            let rhs = -inner_l2h(&u, &d_minus(&v)).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-10);
        }

        #[test]
        fn differences_commute(a in prop::collection::vec(-1.0f64..1.0, 30)) {
            let u = interior_supported(a);
            let pm = d_plus(&d_minus(&u));
            let mp = d_minus(&d_plus(&u));
            for n in 1..u.len() - 1 {
                prop_assert!((pm.values()[n] - mp.values()[n]).abs() < 1e-9);
            }
        }

        #[test]
        fn shift_isometry(a in prop::collection::vec(-1.0f64..1.0, 30)) {
            let u = interior_supported(a);
            let e = shift(&u, Shift::Forward);
            prop_assert!((norm_l2h(&e) - norm_l2h(&u)).abs() < 1e-13);
        }

        #[test]
        fn sh_norm_dominates_weighted_l2(a in prop::collection::vec(-1.0f64..1.0, 30),
                                         b in prop::collection::vec(-1.0f64..1.0, 30)) {
            let u = GridPair::new(interior_supported(a), interior_supported(b)).unwrap();
            let weighted = |f: &GridFn| schwartz_seminorm(f, 1, 0);
            let w = (weighted(&u.re).powi(2) + weighted(&u.im).powi(2)).sqrt();
            prop_assert!(norm_sh(&u) >= w - 1e-12);
        }
    }
}
