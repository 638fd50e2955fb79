//! Functions on the circle `T = [-pi, pi)`.
//!
//! Test functions are piecewise constant on a dyadic grid of `2^level` equal
//! cells, the leftmost cell starting at `-pi`. Every integral the operators
//! need has a closed form on such a grid, so nothing in this crate relies on
//! quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub const TAU: f64 = 2.0 * PI;

/// Largest supported grid level. `2^24` cells is far beyond desk scale.
pub const MAX_LEVEL: u32 = 24;

/// `e^{2 pi i num / den}` with the numerator reduced exactly first.
#[inline]
pub fn root_of_unity(num: i128, den: u64) -> C64 {
    let den = den as i128;
    let r = num.rem_euclid(den);
    let (s, c) = (TAU * (r as f64) / (den as f64)).sin_cos();
    C64::new(c, s)
}

/// Index of the level-`level` dyadic cell containing `y`.
///
/// Works in units of `pi` so that dyadic multiples of `pi` land exactly on
/// their cell boundaries.
pub fn cell_index(y: f64, level: u32) -> u64 {
    let cells = 1u64 << level;
    let t = (y / PI + 1.0) * 0.5 * cells as f64;
    let idx = t.floor();
    if idx < 0.0 {
        0
    } else if idx >= cells as f64 {
        cells - 1
    } else {
        idx as u64
    }
}

/// Midpoint of cell `index` at `level`.
pub fn cell_midpoint(index: u64, level: u32) -> f64 {
    let cells = (1u64 << level) as f64;
    PI * ((2 * index + 1) as f64 / cells - 1.0)
}

/// Midpoints of the evaluation grid at `level`.
pub fn grid_midpoints(level: u32) -> Vec<f64> {
    (0..1u64 << level).map(|p| cell_midpoint(p, level)).collect()
}

/// Piecewise-constant function on the dyadic grid of the given level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PcFunctionRepr", into = "PcFunctionRepr")]
pub struct PcFunction {
    level: u32,
    values: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct PcFunctionRepr {
    level: u32,
    values: Vec<[f64; 2]>,
}

impl TryFrom<PcFunctionRepr> for PcFunction {
    type Error = Error;

    fn try_from(r: PcFunctionRepr) -> Result<Self> {
        PcFunction::new(
            r.level,
            r.values.into_iter().map(|[a, b]| C64::new(a, b)).collect(),
        )
    }
}

impl From<PcFunction> for PcFunctionRepr {
    fn from(f: PcFunction) -> Self {
        PcFunctionRepr {
            level: f.level,
            values: f.values.iter().map(|z| [z.re, z.im]).collect(),
        }
    }
}

impl PcFunction {
    pub fn new(level: u32, values: Vec<C64>) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::arg("level", format!("{level} exceeds {MAX_LEVEL}")));
        }
        if values.len() != 1usize << level {
            return Err(Error::arg(
                "values",
                format!("expected {} values for level {level}, got {}", 1u64 << level, values.len()),
            ));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("values", "all values must be finite"));
        }
        Ok(PcFunction { level, values })
    }

    pub fn from_real(level: u32, values: &[f64]) -> Result<Self> {
        Self::new(level, values.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn constant(level: u32, c: C64) -> Result<Self> {
        Self::new(level, vec![c; 1usize << level])
    }

    pub fn zero(level: u32) -> Result<Self> {
        Self::constant(level, C64::new(0.0, 0.0))
    }

    /// Samples `g` at the cell midpoints.
    pub fn from_midpoints(level: u32, g: impl Fn(f64) -> C64) -> Result<Self> {
        Self::new(
            level,
            (0..1u64 << level).map(|j| g(cell_midpoint(j, level))).collect(),
        )
    }

    /// Indicator of `[lo, hi)`; both ends must be cell boundaries at `level`
    /// (cells are included when their midpoint lies inside).
    pub fn indicator(level: u32, lo: f64, hi: f64) -> Result<Self> {
        Self::from_midpoints(level, |x| {
            if x >= lo && x < hi {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn cell_width(&self) -> f64 {
        TAU / self.values.len() as f64
    }

    /// `[a, b)` of cell `j`.
    pub fn cell_bounds(&self, j: usize) -> (f64, f64) {
        let h = self.cell_width();
        (-PI + j as f64 * h, -PI + (j + 1) as f64 * h)
    }

    pub fn value_at(&self, y: f64) -> C64 {
        self.values[cell_index(wrap(y), self.level) as usize]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|z| z.im == 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn abs(&self) -> PcFunction {
        PcFunction {
            level: self.level,
            values: self.values.iter().map(|z| C64::new(z.norm(), 0.0)).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> PcFunction {
        PcFunction {
            level: self.level,
            values: self.values.iter().map(|z| z * c).collect(),
        }
    }

    /// Same function on a finer grid.
    pub fn refine(&self, level: u32) -> Result<PcFunction> {
        if level < self.level {
            return Err(Error::arg("level", "refinement cannot coarsen"));
        }
        let rep = 1usize << (level - self.level);
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat(v).take(rep))
            .collect();
        PcFunction::new(level, values)
    }

    /// Pointwise linear combination `a*self + b*other`, on the finer grid.
    pub fn combine(&self, a: C64, other: &PcFunction, b: C64) -> Result<PcFunction> {
        let level = self.level.max(other.level);
        let x = self.refine(level)?;
        let y = other.refine(level)?;
        PcFunction::new(
            level,
            x.values.iter().zip(&y.values).map(|(u, v)| a * u + b * v).collect(),
        )
    }

    /// Cell values multiplied by `e^{i k x_c}` at the cell midpoints `x_c`.
    ///
    /// The modulus of every value is unchanged, which is all the dyadic
    /// constructions look at.
    pub fn modulate_midpoints(&self, k: i64) -> PcFunction {
        let cells = self.values.len() as u64;
        // k * x_c = k*pi*((2c+1)/M - 1) = 2*pi*(k*(2c+1) - k*M) / (2M)
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(c, v)| {
                let num = k as i128 * (2 * c as i128 + 1) - k as i128 * cells as i128;
                v * root_of_unity(num, 2 * cells)
            })
            .collect();
        PcFunction {
            level: self.level,
            values,
        }
    }

    /// Exact integral over `T`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.cell_width()
    }

    /// Direct DFT of the cell values, `V[r] = sum_j v_j e^{-2 pi i j r / M}`.
    ///
    /// Every Fourier coefficient of the function is a fixed multiple of one of
    /// these entries, see [`coefficient_from_dft`].
    pub fn cell_dft(&self) -> Vec<C64> {
        let mut buf = self.values.clone();
        rustfft::FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
        buf
    }

    /// Indices `j` where the value changes between cell `j-1` and cell `j`
    /// (cyclically, so `j = 0` compares against the last cell).
    pub fn jumps(&self) -> Vec<usize> {
        let m = self.values.len();
        (0..m)
            .filter(|&j| self.values[j] != self.values[(j + m - 1) % m])
            .collect()
    }
}

/// Reduce a real number into `[-pi, pi)`.
pub fn wrap(y: f64) -> f64 {
    let t = (y + PI).rem_euclid(TAU) - PI;
    if t >= PI {
        -PI
    } else {
        t
    }
}

/// `hat f(k)` from the cell DFT of a level-`level` function.
pub fn coefficient_from_dft(dft: &[C64], k: i64) -> C64 {
    let m = dft.len() as i64;
    if k == 0 {
        return dft[0] / m as f64;
    }
    let r = k.rem_euclid(m) as usize;
    // (-1)^k (1 - e^{-2 pi i k/M}) / (2 pi i k)
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let step = C64::new(1.0, 0.0) - root_of_unity(-(r as i128), m as u64);
    let denom = C64::new(0.0, TAU * k as f64);
    dft[r] * step * sign / denom
}

/// Exact `hat f(k) = (1/2pi) int_T f(x) e^{-ikx} dx`, summed cell by cell.
pub fn fourier_coefficient(f: &PcFunction, k: i64) -> C64 {
    if k == 0 {
        return f.integral() / TAU;
    }
    let m = f.len() as u64;
    let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let denom = C64::new(0.0, TAU * k as f64);
    let mut acc = C64::new(0.0, 0.0);
    for (j, v) in f.values.iter().enumerate() {
        // e^{-ik a_j} with a_j = -pi + 2 pi j / M
        let ea = root_of_unity(-(k as i128) * j as i128, m) * sign;
        let eb = root_of_unity(-(k as i128) * (j as i128 + 1), m) * sign;
        acc += v * (ea - eb);
    }
    acc / denom
}

/// Finite Fourier coefficient vector indexed `-degree..=degree`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    degree: usize,
    coeffs: Vec<C64>,
}

impl TrigPoly {
    pub fn new(degree: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * degree + 1 {
            return Err(Error::arg(
                "coeffs",
                format!("expected {} coefficients, got {}", 2 * degree + 1, coeffs.len()),
            ));
        }
        Ok(TrigPoly { degree, coeffs })
    }

    /// Polynomial with the given `(k, c_k)` pairs and zeros elsewhere.
    pub fn from_terms(terms: &[(i64, C64)]) -> Self {
        let degree = terms.iter().map(|(k, _)| k.unsigned_abs() as usize).max().unwrap_or(0);
        let mut coeffs = vec![C64::new(0.0, 0.0); 2 * degree + 1];
        for &(k, c) in terms {
            coeffs[(k + degree as i64) as usize] += c;
        }
        TrigPoly { degree, coeffs }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: i64) -> C64 {
        if k.unsigned_abs() as usize > self.degree {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(k + self.degree as i64) as usize]
        }
    }

    pub fn eval(&self, y: f64) -> C64 {
        eval_trig(self, y)
    }
}

/// `hat f(k)` for `|k| <= degree`.
pub fn bandlimit(f: &PcFunction, degree: usize) -> TrigPoly {
    let dft = f.cell_dft();
    let coeffs = (-(degree as i64)..=degree as i64)
        .map(|k| coefficient_from_dft(&dft, k))
        .collect();
    TrigPoly { degree, coeffs }
}

/// Sum `c_k e^{iky}`. The rotation is re-seeded every 64 terms so the
/// recurrence error stays at rounding level for large degrees.
pub fn eval_trig(p: &TrigPoly, y: f64) -> C64 {
    let d = p.degree as i64;
    let mut acc = p.coeff(0);
    let step = C64::from_polar(1.0, y);
    let mut rot = step;
    for k in 1..=d {
        if k % 64 == 0 {
            rot = C64::from_polar(1.0, (k as f64) * y);
        }
        acc += p.coeff(k) * rot + p.coeff(-k) * rot.conj();
        rot *= step;
    }
    acc
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Inf,
}

pub fn lp_norm(f: &PcFunction, p: Norm) -> f64 {
    let h = f.cell_width();
    match p {
        Norm::L1 => f.values.iter().map(|z| z.norm()).sum::<f64>() * h,
        Norm::L2 => (f.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * h).sqrt(),
        Norm::Inf => f.values.iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

/// Union of cells of a dyadic grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSet {
    level: u32,
    mask: Vec<bool>,
}

impl GridSet {
    pub fn new(level: u32, mask: Vec<bool>) -> Result<Self> {
        if level > MAX_LEVEL || mask.len() != 1usize << level {
            return Err(Error::arg("mask", format!("length must be 2^{level}")));
        }
        Ok(GridSet { level, mask })
    }

    pub fn empty(level: u32) -> Self {
        GridSet {
            level,
            mask: vec![false; 1usize << level],
        }
    }

    pub fn full(level: u32) -> Self {
        GridSet {
            level,
            mask: vec![true; 1usize << level],
        }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    pub fn measure(&self) -> f64 {
        TAU / self.mask.len() as f64 * self.count() as f64
    }

    pub fn contains_cell(&self, j: usize) -> bool {
        self.mask[j]
    }

    pub fn contains(&self, y: f64) -> bool {
        self.mask[cell_index(wrap(y), self.level) as usize]
    }

    pub(crate) fn set_range_cyclic(&mut self, start: u64, len: u64) {
        let n = self.mask.len() as u64;
        if len >= n {
            self.mask.iter_mut().for_each(|b| *b = true);
            return;
        }
        for t in 0..len {
            self.mask[((start + t) % n) as usize] = true;
        }
    }

    pub fn refine(&self, level: u32) -> Result<GridSet> {
        if level < self.level {
            return Err(Error::arg("level", "refinement cannot coarsen"));
        }
        let rep = 1usize << (level - self.level);
        GridSet::new(
            level,
            self.mask
                .iter()
                .flat_map(|&b| std::iter::repeat(b).take(rep))
                .collect(),
        )
    }

    fn zip_with(&self, other: &GridSet, op: impl Fn(bool, bool) -> bool) -> GridSet {
        let level = self.level.max(other.level);
        let a = self.refine(level).expect("finer level");
        let b = other.refine(level).expect("finer level");
        GridSet {
            level,
            mask: a.mask.iter().zip(&b.mask).map(|(&x, &y)| op(x, y)).collect(),
        }
    }

    pub fn union(&self, other: &GridSet) -> GridSet {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &GridSet) -> GridSet {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &GridSet) -> GridSet {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn complement(&self) -> GridSet {
        GridSet {
            level: self.level,
            mask: self.mask.iter().map(|b| !b).collect(),
        }
    }

    pub fn is_subset(&self, other: &GridSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn indicator(&self) -> PcFunction {
        PcFunction {
            level: self.level,
            values: self
                .mask
                .iter()
                .map(|&b| C64::new(if b { 1.0 } else { 0.0 }, 0.0))
                .collect(),
        }
    }
}

pub fn measure(s: &GridSet) -> f64 {
    s.measure()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn right_half(level: u32) -> PcFunction {
        PcFunction::indicator(level, 0.0, PI).unwrap()
    }

    /// Midpoint Riemann sum of `f(x) e^{-ikx}` with `2^20` points.
    fn riemann_coefficient(f: &PcFunction, k: i64) -> C64 {
        let n = 1u64 << 20;
        let mut acc = C64::new(0.0, 0.0);
        for p in 0..n {
            let x = cell_midpoint(p, 20);
            acc += f.value_at(x) * C64::from_polar(1.0, -(k as f64) * x);
        }
        acc / n as f64
    }

    #[test]
    fn constant_coefficients() {
        for level in [0, 3, 7] {
            let f = PcFunction::constant(level, C64::new(1.0, 0.0)).unwrap();
            assert!(close(fourier_coefficient(&f, 0), C64::new(1.0, 0.0), 1e-15));
            assert!(fourier_coefficient(&f, 3).norm() < 1e-15);
        }
    }

    #[test]
    fn indicator_first_coefficient_matches_riemann_oracle() {
        let f = right_half(1);
        let oracle = riemann_coefficient(&f, 1);
        let exact = fourier_coefficient(&f, 1);
        assert!(close(exact, oracle, 1e-9), "{exact} vs {oracle}");
        assert!(close(exact, C64::new(0.0, -1.0 / PI), 1e-15));
    }

    #[test]
    fn bandlimit_indicator() {
        let f = right_half(4);
        let p = bandlimit(&f, 1);
        let want = [
            C64::new(0.0, 1.0 / PI),
            C64::new(0.5, 0.0),
            C64::new(0.0, -1.0 / PI),
        ];
        for (got, want) in p.coeffs().iter().zip(want) {
            assert!(close(*got, want, 1e-14), "{got} vs {want}");
        }
        for k in -1..=1 {
            assert!(close(p.coeff(k), riemann_coefficient(&f, k), 1e-9));
        }
    }

    #[test]
    fn bandlimit_of_constant_and_mean() {
        let c = C64::new(2.5, -1.0);
        let f = PcFunction::constant(5, c).unwrap();
        let p = bandlimit(&f, 4);
        for k in -4..=4i64 {
            let want = if k == 0 { c } else { C64::new(0.0, 0.0) };
            assert!(close(p.coeff(k), want, 1e-13));
        }
        let g = PcFunction::from_real(2, &[1.0, -3.0, 4.0, 2.0]).unwrap();
        assert!(close(bandlimit(&g, 0).coeff(0), C64::new(1.0, 0.0), 1e-15));
    }

    #[test]
    fn dft_route_agrees_with_cellwise_route() {
        let f = PcFunction::from_real(5, &(0..32).map(|j| ((j * 7) % 5) as f64 - 2.0).collect::<Vec<_>>()).unwrap();
        let dft = f.cell_dft();
        for k in [-1000i64, -33, -32, -1, 0, 1, 5, 31, 32, 64, 12345] {
            let a = coefficient_from_dft(&dft, k);
            let b = fourier_coefficient(&f, k);
            assert!(close(a, b, 1e-13), "k={k}: {a} vs {b}");
        }
    }

    #[test]
    fn eval_trig_examples() {
        let one = TrigPoly::from_terms(&[(0, C64::new(1.0, 0.0))]);
        assert!(close(one.eval(1.234), C64::new(1.0, 0.0), 1e-15));
        let cos = TrigPoly::from_terms(&[(-1, C64::new(0.5, 0.0)), (1, C64::new(0.5, 0.0))]);
        assert!(close(cos.eval(0.0), C64::new(1.0, 0.0), 1e-15));
        let p = bandlimit(&right_half(10), 64);
        let v = p.eval(PI / 2.0);
        assert!((v - C64::new(1.0, 0.0)).norm() < 0.1, "{v}");
    }

    #[test]
    fn norms_of_indicator() {
        let f = right_half(3);
        assert!((lp_norm(&f, Norm::L1) - PI).abs() < 1e-14);
        assert!((lp_norm(&f, Norm::L2) - PI.sqrt()).abs() < 1e-14);
        assert_eq!(lp_norm(&f, Norm::Inf), 1.0);
        let one = PcFunction::constant(4, C64::new(1.0, 0.0)).unwrap();
        assert!((lp_norm(&one, Norm::L1) - TAU).abs() < 1e-14);
    }

    #[test]
    fn measures() {
        assert_eq!(GridSet::empty(4).measure(), 0.0);
        assert!((GridSet::full(4).measure() - TAU).abs() < 1e-15);
        let half = GridSet::new(2, vec![true, false, true, false]).unwrap();
        assert!((measure(&half) - PI).abs() < 1e-15);
    }

    #[test]
    fn cell_index_conventions() {
        assert_eq!(cell_index(0.0, 1), 1);
        assert_eq!(cell_index(-PI, 2), 0);
        assert_eq!(cell_index(PI / 2.0, 2), 3);
        assert_eq!(cell_index(-PI / 2.0, 2), 1);
        for level in 0..12 {
            for p in 0..(1u64 << level) {
                assert_eq!(cell_index(cell_midpoint(p, level), level), p);
            }
        }
    }

    #[test]
    fn rejects_bad_values() {
        assert!(PcFunction::new(2, vec![C64::new(0.0, 0.0); 3]).is_err());
        assert!(PcFunction::from_real(1, &[1.0, f64::NAN]).is_err());
        assert!(TrigPoly::new(1, vec![C64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn json_shape() {
        let f = PcFunction::from_real(1, &[1.0, -2.0]).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"level":1,"values":[[1.0,0.0],[-2.0,0.0]]}"#);
        let back: PcFunction = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<PcFunction>(r#"{"level":2,"values":[[1,0]]}"#).is_err());
    }

    #[test]
    fn modulation_preserves_modulus() {
        let f = PcFunction::from_real(6, &(0..64).map(|j| (j as f64).sin()).collect::<Vec<_>>()).unwrap();
        let g = f.modulate_midpoints(-1_000_000_007);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a.norm() - b.norm()).abs() < 1e-15);
        }
        let x = cell_midpoint(5, 6);
        let want = f.values()[5] * C64::from_polar(1.0, 3.0 * x);
        assert!(close(f.modulate_midpoints(3).values()[5], want, 1e-14));
    }
}
