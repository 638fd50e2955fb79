//! Operators on piecewise-constant functions.
//!
//! Band-limiting operators are Fourier multipliers with weights that are
//! piecewise linear in `|k|`. They are evaluated either at a single point by
//! summing coefficients directly, or on a whole midpoint grid by
//! [`apply_grid`], whose cost does not depend on the order. The localized
//! operators (truncated Hilbert transform, modified partial sums and the
//! local averages `E_l`) integrate closed-form antiderivatives over cell
//! pieces, so no quadrature is involved anywhere.

use std::f64::consts::PI;

use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::circle::{
    cell_index, coefficient_from_dft, grid_midpoints, root_of_unity, PcFunction, TrigPoly, C64, MAX_LEVEL, TAU,
};
use crate::dyadic::{cz_decompose, dilated_union, filter_beta, CzDecomposition};
use crate::error::{Error, Result};
use crate::sequences::{block_coords, scale_product, IndexSequence, LogBase};

/// A function together with its cell DFT, from which every Fourier
/// coefficient follows in O(1).
#[derive(Clone, Debug)]
pub struct Analysis {
    f: PcFunction,
    dft: Vec<C64>,
}

impl Analysis {
    pub fn new(f: PcFunction) -> Self {
        let dft = f.cell_dft();
        Analysis { f, dft }
    }

    pub fn function(&self) -> &PcFunction {
        &self.f
    }

    pub fn dft(&self) -> &[C64] {
        &self.dft
    }

    pub fn coeff(&self, k: i64) -> C64 {
        coefficient_from_dft(&self.dft, k)
    }
}

/// Operator input: a piecewise-constant function or an exact trigonometric
/// polynomial.
#[derive(Clone, Debug)]
pub enum Signal {
    Pc(Analysis),
    Trig(TrigPoly),
}

impl Signal {
    pub fn pc(f: PcFunction) -> Self {
        Signal::Pc(Analysis::new(f))
    }

    pub fn coeff(&self, k: i64) -> C64 {
        match self {
            Signal::Pc(a) => a.coeff(k),
            Signal::Trig(p) => p.coeff(k),
        }
    }
}

/// Weight `intercept + slope * |k|` on `lo <= |k| <= hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: u64,
    pub hi: u64,
    pub intercept: f64,
    pub slope: f64,
}

impl Segment {
    fn weight(&self, k: u64) -> f64 {
        self.intercept + self.slope * k as f64
    }

    /// `sum w(k)/k` over `k` in the segment with `k = residue (mod modulus)`.
    fn class_sum(&self, residue: u64, modulus: u64) -> f64 {
        let first = self.lo + (residue + modulus - self.lo % modulus) % modulus;
        if first > self.hi {
            return 0.0;
        }
        let count = (self.hi - first) / modulus + 1;
        self.intercept * progression_harmonic(first, modulus, count) + self.slope * count as f64
    }
}

/// Even Fourier multiplier: weight `center` at `k = 0` plus the segment
/// weights (summed where segments overlap) at `|k| >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multiplier {
    center: f64,
    segments: Vec<Segment>,
}

impl Multiplier {
    fn new(center: f64, segments: Vec<Segment>) -> Self {
        let segments = segments
            .into_iter()
            .filter(|s| s.lo >= 1 && s.lo <= s.hi)
            .collect();
        Multiplier { center, segments }
    }

    /// `S_n`.
    pub fn partial_sum(n: u64) -> Self {
        Multiplier::new(
            1.0,
            vec![Segment {
                lo: 1,
                hi: n,
                intercept: 1.0,
                slope: 0.0,
            }],
        )
    }

    /// `sigma_n`: weights `1 - |k|/(n+1)`.
    pub fn fejer(n: u64) -> Self {
        Multiplier::new(
            1.0,
            vec![Segment {
                lo: 1,
                hi: n,
                intercept: 1.0,
                slope: -1.0 / (n as f64 + 1.0),
            }],
        )
    }

    /// `V_n`: 1 up to `n`, then linear down to `1/n` at `2n - 1`.
    pub fn vallee_poussin(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "de la Vallee-Poussin order must be at least 1"));
        }
        let nf = n as f64;
        Ok(Multiplier::new(
            1.0,
            vec![
                Segment {
                    lo: 1,
                    hi: n,
                    intercept: 1.0,
                    slope: 0.0,
                },
                Segment {
                    lo: n + 1,
                    hi: 2 * n - 1,
                    intercept: 2.0,
                    slope: -1.0 / nf,
                },
            ],
        ))
    }

    /// `S_n - V_n`, supported on `n < |k| <= 2n - 1`.
    pub fn sv_difference(n: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("n", "order must be at least 1"));
        }
        Ok(Multiplier::new(
            0.0,
            vec![Segment {
                lo: n + 1,
                hi: 2 * n - 1,
                intercept: -2.0,
                slope: 1.0 / n as f64,
            }],
        ))
    }

    /// Arithmetic mean of several multipliers.
    pub fn average(parts: &[Multiplier]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::arg("parts", "cannot average zero multipliers"));
        }
        let s = 1.0 / parts.len() as f64;
        let center = parts.iter().map(|p| p.center).sum::<f64>() * s;
        let segments = parts
            .iter()
            .flat_map(|p| p.segments.iter())
            .map(|seg| Segment {
                intercept: seg.intercept * s,
                slope: seg.slope * s,
                ..*seg
            })
            .collect();
        Ok(Multiplier::new(center, segments))
    }

    pub fn weight(&self, k: i64) -> f64 {
        if k == 0 {
            return self.center;
        }
        let a = k.unsigned_abs();
        self.segments
            .iter()
            .filter(|s| (s.lo..=s.hi).contains(&a))
            .map(|s| s.weight(a))
            .sum()
    }

    /// Largest `|k|` with a possibly nonzero weight.
    pub fn bandwidth(&self) -> u64 {
        self.segments.iter().map(|s| s.hi).max().unwrap_or(0)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    /// Nonzero weights at `k >= 0`, ascending.
    pub fn nonzero_frequencies(&self) -> Vec<u64> {
        let mut ks: Vec<u64> = self.segments.iter().flat_map(|s| s.lo..=s.hi).collect();
        ks.sort_unstable();
        ks.dedup();
        ks.retain(|&k| self.weight(k as i64) != 0.0);
        if self.center != 0.0 {
            ks.insert(0, 0);
        }
        ks
    }
}

/// `sum_{t < count} 1/(first + t step)` for `first, step >= 1`.
fn progression_harmonic(first: u64, step: u64, count: u64) -> f64 {
    if count <= 64 {
        let mut acc = 0.0;
        for t in (0..count).rev() {
            acc += 1.0 / (first as f64 + (t * step) as f64);
        }
        return acc;
    }
    // sum 1/(z + t) with z = first/step: exact terms until z is large, then
    // a digamma difference from the asymptotic series.
    let stepf = step as f64;
    let mut head = 0.0;
    let mut t = 0u64;
    while t < count && (first as f64 + (t * step) as f64) / stepf < 32.0 {
        head += stepf / (first as f64 + (t * step) as f64);
        t += 1;
    }
    let rest = count - t;
    let z = (first as f64 + (t * step) as f64) / stepf;
    (head + digamma_difference(z, rest as f64)) / stepf
}

/// `psi(z + c) - psi(z)` for `z >= 32`.
fn digamma_difference(z: f64, c: f64) -> f64 {
    if c == 0.0 {
        return 0.0;
    }
    let x = z + c;
    let inv = |v: f64, p: i32| v.powi(-p);
    (c / z).ln_1p() - 0.5 * (inv(x, 1) - inv(z, 1)) - (inv(x, 2) - inv(z, 2)) / 12.0
        + (inv(x, 4) - inv(z, 4)) / 120.0
        - (inv(x, 6) - inv(z, 6)) / 252.0
        + (inv(x, 8) - inv(z, 8)) / 240.0
}

/// `sum_k w(k) c_k e^{iky}` by direct summation over the multiplier support.
pub fn apply_at(signal: &Signal, mult: &Multiplier, y: f64) -> C64 {
    let mut acc = signal.coeff(0) * mult.center;
    for seg in &mult.segments {
        let step = C64::from_polar(1.0, y);
        let mut rot = C64::from_polar(1.0, seg.lo as f64 * y);
        for k in seg.lo..=seg.hi {
            if (k - seg.lo) % 64 == 0 {
                rot = C64::from_polar(1.0, k as f64 * y);
            }
            let ki = k as i64;
            let pair = signal.coeff(ki) * rot + signal.coeff(-ki) * rot.conj();
            acc += pair * seg.weight(k);
            rot *= step;
        }
    }
    acc
}

fn check_grid_level(g: u32) -> Result<()> {
    if g > MAX_LEVEL {
        return Err(Error::arg("grid_level", format!("{g} exceeds {MAX_LEVEL}")));
    }
    Ok(())
}

/// The multiplier applied to `signal` at every midpoint of the level-`g` grid.
///
/// For piecewise-constant input the `k`-th term splits into `w(k)/k` times a
/// factor that depends only on `k mod L`, `L = max(M, 2G)`. Summing `w(k)/k`
/// per residue class (harmonic sums over arithmetic progressions) collapses
/// the series to `L` terms, followed by one length-`G` DFT.
pub fn apply_grid(signal: &Signal, mult: &Multiplier, g: u32) -> Result<Vec<C64>> {
    check_grid_level(g)?;
    match signal {
        Signal::Trig(p) => {
            let weighted = TrigPoly::from_terms(
                &(-(p.degree() as i64)..=p.degree() as i64)
                    .map(|k| (k, p.coeff(k) * mult.weight(k)))
                    .collect::<Vec<_>>(),
            );
            Ok(grid_midpoints(g).into_iter().map(|y| weighted.eval(y)).collect())
        }
        Signal::Pc(a) => Ok(apply_grid_pc(a, mult, g)),
    }
}

fn apply_grid_pc(a: &Analysis, mult: &Multiplier, g: u32) -> Vec<C64> {
    let grid = 1usize << g;
    let m = a.dft.len();
    let l = m.max(2 * grid);
    let mut folded = vec![C64::new(0.0, 0.0); grid];
    let scale = C64::new(0.0, -1.0 / TAU);
    for r in 0..l {
        let v = a.dft[r % m];
        if v == C64::new(0.0, 0.0) || r % m == 0 {
            // r = 0 mod M: the cell-jump factor vanishes.
            continue;
        }
        let mut h = 0.0;
        for seg in &mult.segments {
            h += seg.class_sum(r as u64, l as u64) - seg.class_sum(((l - r) % l) as u64, l as u64);
        }
        if h == 0.0 {
            continue;
        }
        let phase = (C64::new(1.0, 0.0) - root_of_unity(-(r as i128), m as u64)) * root_of_unity(r as i128, 2 * grid as u64);
        folded[r % grid] += v * phase * h * scale;
    }
    FftPlanner::new().plan_fft_inverse(grid).process(&mut folded);
    let dc = a.dft[0] / m as f64 * mult.center;
    folded.iter_mut().for_each(|z| *z += dc);
    folded
}

fn check_point(y: f64) -> Result<()> {
    if !(-PI..PI).contains(&y) {
        return Err(Error::arg("y", format!("{y} outside [-pi, pi)")));
    }
    Ok(())
}

/// `S_n f(y)`.
pub fn partial_sum(f: &PcFunction, n: u64, y: f64) -> Result<C64> {
    check_point(y)?;
    Ok(apply_at(&Signal::pc(f.clone()), &Multiplier::partial_sum(n), y))
}

/// `sigma_n f(y)`.
pub fn fejer_mean(f: &PcFunction, n: u64, y: f64) -> Result<C64> {
    check_point(y)?;
    Ok(apply_at(&Signal::pc(f.clone()), &Multiplier::fejer(n), y))
}

/// `V_n f(y)`.
pub fn vp_mean(f: &PcFunction, n: u64, y: f64) -> Result<C64> {
    check_point(y)?;
    Ok(apply_at(&Signal::pc(f.clone()), &Multiplier::vallee_poussin(n)?, y))
}

/// `S_n f(y) - V_n f(y)`.
pub fn sv_difference(f: &PcFunction, n: u64, y: f64) -> Result<C64> {
    check_point(y)?;
    Ok(apply_at(&Signal::pc(f.clone()), &Multiplier::sv_difference(n)?, y))
}

/// `|n| = floor(log2 n)`.
pub fn dyadic_order(n: u64) -> Result<u32> {
    if n == 0 {
        return Err(Error::arg("n", "order must be at least 1"));
    }
    Ok(63 - n.leading_zeros())
}

/// Finest exclusion level; the tripled interval is then about `1e-11` long.
pub const MAX_EXCLUSION_LEVEL: u32 = 40;

/// `3 I_{level}(y)` and its complement, in integer units of `2 pi / 2^res`
/// counted from `-pi`. Positions are unwrapped, so an arc may run past `2^res`.
#[derive(Clone, Copy, Debug)]
struct Exclusion {
    res: u32,
    /// First unit of `I_{level}(y)`.
    interval_start: i128,
    /// Units per `|I_{level}|`.
    interval_units: i128,
}

impl Exclusion {
    fn new(f: &PcFunction, level: u32, y: f64) -> Result<Self> {
        check_point(y)?;
        if level > MAX_EXCLUSION_LEVEL {
            return Err(Error::arg(
                "order",
                format!("exclusion level {level} exceeds {MAX_EXCLUSION_LEVEL}"),
            ));
        }
        let res = level.max(f.level());
        let interval_units = 1i128 << (res - level);
        Ok(Exclusion {
            res,
            interval_start: cell_index(y, level) as i128 * interval_units,
            interval_units,
        })
    }

    fn units(&self) -> i128 {
        1i128 << self.res
    }

    fn unit(&self) -> f64 {
        TAU / (1u128 << self.res) as f64
    }

    /// The tripled interval covers the circle.
    fn saturated(&self) -> bool {
        3 * self.interval_units >= self.units()
    }

    /// `(start, len)` of `3 I`.
    fn tripled(&self) -> (i128, i128) {
        (self.interval_start - self.interval_units, 3 * self.interval_units)
    }

    /// `(start, len)` of `T \ 3 I`.
    fn complement(&self) -> (i128, i128) {
        (
            self.interval_start + 2 * self.interval_units,
            (self.units() - 3 * self.interval_units).max(0),
        )
    }

    /// `y - x` for the unwrapped unit position of `x`.
    fn offset(&self, y: f64, pos: i128) -> f64 {
        (y + PI) - pos as f64 * self.unit()
    }
}

/// Value of `f` on the unit `[pos, pos + 1)`.
fn value_at_unit(f: &PcFunction, ex: &Exclusion, pos: i128) -> C64 {
    let per_cell = 1i128 << (ex.res - f.level());
    let cells = f.len() as i128;
    f.values()[pos.div_euclid(per_cell).rem_euclid(cells) as usize]
}

/// `int_arc f dPhi` for the antiderivative `phi` (given at unit positions):
/// the sum of `v (phi(b) - phi(a))` over the constant pieces of `f`,
/// rearranged as boundary terms plus one term per jump inside the arc.
fn telescope(f: &PcFunction, jumps: &[usize], ex: &Exclusion, arc: (i128, i128), phi: impl Fn(i128) -> f64) -> C64 {
    let (start, len) = arc;
    if len <= 0 {
        return C64::new(0.0, 0.0);
    }
    let end = start + len;
    let per_cell = 1i128 << (ex.res - f.level());
    let period = ex.units();
    let cells = f.len();
    let mut acc = value_at_unit(f, ex, end - 1) * phi(end) - value_at_unit(f, ex, start) * phi(start);
    for &j in jumps {
        let base = j as i128 * per_cell;
        let t_lo = (start + 1 - base).div_euclid(period) + i128::from((start + 1 - base).rem_euclid(period) != 0);
        let t_hi = (end - 1 - base).div_euclid(period);
        for t in t_lo..=t_hi {
            let pos = base + t * period;
            let jump = f.values()[j] - f.values()[(j + cells - 1) % cells];
            acc -= jump * phi(pos);
        }
    }
    acc
}

/// `int_arc f` exactly.
fn integrate_arc(f: &PcFunction, ex: &Exclusion, arc: (i128, i128)) -> C64 {
    let (start, len) = arc;
    let end = start + len;
    let per_cell = 1i128 << (ex.res - f.level());
    let mut acc = C64::new(0.0, 0.0);
    let mut c = start.div_euclid(per_cell);
    while c * per_cell < end {
        let lo = (c * per_cell).max(start);
        let hi = ((c + 1) * per_cell).min(end);
        acc += f.values()[c.rem_euclid(f.len() as i128) as usize] * (hi - lo) as f64;
        c += 1;
    }
    acc * ex.unit()
}

/// Evaluation context that shares the jump list of `f` across points.
#[derive(Clone, Debug)]
pub struct Localized<'a> {
    f: &'a PcFunction,
    jumps: Vec<usize>,
}

impl<'a> Localized<'a> {
    pub fn new(f: &'a PcFunction) -> Self {
        Localized { f, jumps: f.jumps() }
    }

    /// `H_n f(y)`.
    pub fn hilbert(&self, n: u64, y: f64) -> Result<C64> {
        let ex = Exclusion::new(self.f, dyadic_order(n)?, y)?;
        if ex.saturated() {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(telescope(self.f, &self.jumps, &ex, ex.complement(), |pos| {
            -2.0 * (0.5 * ex.offset(y, pos)).sin().abs().ln()
        }))
    }

    /// `(1/pi) int_{3I} f(x) D_l(y - x) dx`, the part `S_l` keeps and
    /// `S~_l` drops.
    pub fn near_dirichlet(&self, l: u64, n_exclusion: u64, y: f64) -> Result<C64> {
        let ex = Exclusion::new(self.f, dyadic_order(n_exclusion)?, y)?;
        if ex.saturated() {
            return Err(Error::arg("n_exclusion", "tripled interval covers the circle"));
        }
        Ok(telescope(self.f, &self.jumps, &ex, ex.tripled(), |pos| -dirichlet_primitive(l, ex.offset(y, pos))) / PI)
    }

    /// `S~_l f(y)` with the exclusion taken at `|n_exclusion|`.
    pub fn modified_partial_sum(&self, l: u64, n_exclusion: u64, y: f64, partial: C64) -> Result<C64> {
        let ex = Exclusion::new(self.f, dyadic_order(n_exclusion)?, y)?;
        if ex.saturated() {
            return Ok(C64::new(0.0, 0.0));
        }
        Ok(partial - self.near_dirichlet(l, n_exclusion, y)?)
    }

    /// `E_l f(y)` with the exclusion taken at `|n_exclusion|`.
    pub fn local_average(&self, l: u64, n_exclusion: u64, y: f64) -> Result<C64> {
        if l == 0 {
            return Err(Error::arg("l", "must be at least 1"));
        }
        let ex = Exclusion::new(self.f, dyadic_order(n_exclusion)?, y)?;
        let integral = if ex.saturated() {
            self.f.integral()
        } else {
            integrate_arc(self.f, &ex, ex.tripled())
        };
        Ok(integral * l as f64)
    }

    /// `H_n` applied to the exact modulation `f(x) e^{i theta x}`.
    ///
    /// Uses `cot(u/2) (e^{-i theta u} - 1) = -i (1 + 2 sum_{0<p<theta}
    /// e^{-ipu} + e^{-i theta u})`, so the cost grows with `|theta|`.
    pub fn hilbert_of_modulation(&self, n: u64, theta: i64, y: f64) -> Result<C64> {
        let base = self.hilbert(n, y)?;
        if theta == 0 {
            return Ok(base);
        }
        let ex = Exclusion::new(self.f, dyadic_order(n)?, y)?;
        if ex.saturated() {
            return Ok(C64::new(0.0, 0.0));
        }
        let s = theta.signum() as f64;
        let t = theta.unsigned_abs();
        let (start, len) = ex.complement();
        let end = start + len;
        let per_cell = 1i128 << (ex.res - self.f.level());
        let unit = ex.unit();
        // J(p) = int_arc f(x) e^{-i s p (y - x)} dx for p = 0..=t.
        let mut j = vec![C64::new(0.0, 0.0); t as usize + 1];
        let mut c = start.div_euclid(per_cell);
        while c * per_cell < end {
            let lo = (c * per_cell).max(start);
            let hi = ((c + 1) * per_cell).min(end);
            let v = self.f.values()[c.rem_euclid(self.f.len() as i128) as usize];
            let (ua, ub) = (ex.offset(y, lo), ex.offset(y, hi));
            j[0] += v * (hi - lo) as f64 * unit;
            for (p, slot) in j.iter_mut().enumerate().skip(1) {
                let w = s * p as f64;
                // int_a^b e^{-iw(y-x)} dx = (e^{-iw(y-b)} - e^{-iw(y-a)}) / (iw)
                let diff = C64::from_polar(1.0, -w * ub) - C64::from_polar(1.0, -w * ua);
                *slot += v * diff / C64::new(0.0, w);
            }
            c += 1;
        }
        let mut kernel = j[0] + j[t as usize];
        for slot in &j[1..t as usize] {
            kernel += 2.0 * slot;
        }
        Ok(C64::from_polar(1.0, theta as f64 * y) * (base - C64::new(0.0, s) * kernel))
    }
}

/// `G(u) = u/2 + sum_{k=1}^{l} sin(k u)/k`, a primitive of `D_l`.
fn dirichlet_primitive(l: u64, u: f64) -> f64 {
    let mut acc = 0.0;
    let step = C64::from_polar(1.0, u);
    let mut rot = step;
    for k in 1..=l {
        if k % 64 == 0 {
            rot = C64::from_polar(1.0, k as f64 * u);
        }
        acc += rot.im / k as f64;
        rot *= step;
    }
    0.5 * u + acc
}

/// `H_n f(y)`: the cotangent integral over `T` minus the tripled dyadic
/// interval of length `2 pi / 2^{|n|}` around `y`.
pub fn hilbert_modified(f: &PcFunction, n: u64, y: f64) -> Result<C64> {
    Localized::new(f).hilbert(n, y)
}

/// `S~_l f(y) = (1/pi) int_{T \ 3I_{|n_exclusion|}(y)} f(x) D_l(y - x) dx`.
pub fn modified_partial_sum(f: &PcFunction, l: u64, n_exclusion: u64, y: f64) -> Result<C64> {
    if l == 0 {
        return Err(Error::arg("l", "must be at least 1"));
    }
    let s = partial_sum(f, l, y)?;
    Localized::new(f).modified_partial_sum(l, n_exclusion, y, s)
}

/// `E_l f(y) = l int_{3I_{|n_exclusion|}(y)} f`.
pub fn e_operator(f: &PcFunction, l: u64, n_exclusion: u64, y: f64) -> Result<C64> {
    Localized::new(f).local_average(l, n_exclusion, y)
}

/// Pointwise evaluation of a localized operator over the level-`g` midpoints.
fn on_grid(g: u32, mut op: impl FnMut(f64) -> Result<C64>) -> Result<Vec<C64>> {
    check_grid_level(g)?;
    grid_midpoints(g).into_iter().map(&mut op).collect()
}

pub fn hilbert_grid(f: &PcFunction, n: u64, g: u32) -> Result<Vec<C64>> {
    let ctx = Localized::new(f);
    on_grid(g, |y| ctx.hilbert(n, y))
}

pub fn modified_partial_sum_grid(f: &PcFunction, l: u64, n_exclusion: u64, g: u32) -> Result<Vec<C64>> {
    if l == 0 {
        return Err(Error::arg("l", "must be at least 1"));
    }
    let partial = apply_grid(&Signal::pc(f.clone()), &Multiplier::partial_sum(l), g)?;
    let ctx = Localized::new(f);
    let mut p = 0;
    on_grid(g, |y| {
        let v = ctx.modified_partial_sum(l, n_exclusion, y, partial[p]);
        p += 1;
        v
    })
}

pub fn e_operator_grid(f: &PcFunction, l: u64, n_exclusion: u64, g: u32) -> Result<Vec<C64>> {
    let ctx = Localized::new(f);
    on_grid(g, |y| ctx.local_average(l, n_exclusion, y))
}

/// Parameters of the averaged operators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositeSpec {
    pub seq: IndexSequence,
    pub n: usize,
    pub beta: u64,
    pub delta: f64,
    #[serde(default)]
    pub log_base: LogBase,
}

impl CompositeSpec {
    pub fn new(seq: IndexSequence, n: usize, beta: u64, delta: f64) -> Result<Self> {
        let spec = CompositeSpec {
            seq,
            n,
            beta,
            delta,
            log_base: LogBase::Natural,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta % 2 == 0 || self.beta <= 7 {
            return Err(Error::hypothesis(
                "replacement",
                format!("beta = {} must be an odd integer > 7", self.beta),
            ));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::hypothesis(
                "replacement",
                format!("delta = {} must lie in (0, 1/2)", self.delta),
            ));
        }
        if self.n == 0 || self.n > self.seq.len() {
            return Err(Error::arg("N", format!("{} outside 1..={}", self.n, self.seq.len())));
        }
        Ok(())
    }

    /// `beta'_i` for the block coordinates of `i` at `self.n`.
    pub fn beta_prime(&self, i: usize) -> Result<f64> {
        let blocks = block_coords(self.n, self.delta)?;
        let (j, _) = blocks.coords(i);
        Ok(scale_product(j, self.log_base) / self.seq.term(i)? as f64)
    }
}

/// Multiplier of `T_N = (1/N) sum_{i <= N} (S_{n_i} - V_{n_i})`.
pub fn t_multiplier(seq: &IndexSequence, n: usize) -> Result<Multiplier> {
    if n == 0 || n > seq.len() {
        return Err(Error::arg("N", format!("{n} outside 1..={}", seq.len())));
    }
    let parts = (1..=n)
        .map(|i| Multiplier::sv_difference(seq.order(i)?))
        .collect::<Result<Vec<_>>>()?;
    Multiplier::average(&parts)
}

/// `T_N f(y)`.
pub fn t_operator(f: &PcFunction, seq: &IndexSequence, n: usize, y: f64) -> Result<C64> {
    check_point(y)?;
    Ok(apply_at(&Signal::pc(f.clone()), &t_multiplier(seq, n)?, y))
}

/// `1_{T \ beta F_{beta'}}` on the grid of the decomposition.
pub fn complement_indicator(cz: &CzDecomposition, beta: u64, beta_prime: f64) -> Result<PcFunction> {
    let set = dilated_union(&filter_beta(&cz.family, beta_prime), beta, cz.good.level())?;
    Ok(set.complement().indicator())
}

/// `m_i = floor(n_i / 10)`, at least 1.
fn fejer_order(seq: &IndexSequence, i: usize) -> Result<u64> {
    crate::sequences::m_param(seq, i)
}

/// `T_{N,beta} f(y)`.
pub fn t_beta_operator(f: &PcFunction, spec: &CompositeSpec, lambda: f64, y: f64) -> Result<C64> {
    check_point(y)?;
    spec.validate()?;
    let cz = cz_decompose(f, lambda)?;
    let signal = Signal::pc(f.clone());
    let mut acc = C64::new(0.0, 0.0);
    for i in 1..=spec.n {
        let sv = apply_at(&signal, &Multiplier::sv_difference(spec.seq.order(i)?)?, y);
        let ind = complement_indicator(&cz, spec.beta, spec.beta_prime(i)?)?;
        let damp = apply_at(&Signal::pc(ind), &Multiplier::fejer(fejer_order(&spec.seq, i)?), y);
        acc += sv * damp;
    }
    Ok(acc / spec.n as f64)
}

/// `T_{N,beta} f` at the level-`g` midpoints.
pub fn t_beta_grid(f: &PcFunction, spec: &CompositeSpec, lambda: f64, g: u32) -> Result<Vec<C64>> {
    spec.validate()?;
    let cz = cz_decompose(f, lambda)?;
    let signal = Signal::pc(f.clone());
    let mut acc = vec![C64::new(0.0, 0.0); 1 << g];
    for i in 1..=spec.n {
        let sv = apply_grid(&signal, &Multiplier::sv_difference(spec.seq.order(i)?)?, g)?;
        let ind = complement_indicator(&cz, spec.beta, spec.beta_prime(i)?)?;
        let damp = apply_grid(&Signal::pc(ind), &Multiplier::fejer(fejer_order(&spec.seq, i)?), g)?;
        for ((a, s), d) in acc.iter_mut().zip(&sv).zip(&damp) {
            *a += s * d;
        }
    }
    let scale = 1.0 / spec.n as f64;
    acc.iter_mut().for_each(|a| *a *= scale);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::fourier_coefficient;
    use crate::sequences::make_lacunary;

    fn steps(level: u32, seed: u64) -> PcFunction {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let vals: Vec<C64> = (0..1usize << level)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = ((s >> 33) % 7) as f64 - 3.0;
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = ((s >> 33) % 5) as f64 - 2.0;
                C64::new(a, 0.5 * b)
            })
            .collect();
        PcFunction::new(level, vals).unwrap()
    }

    /// Independent route: cellwise coefficients, plain summation.
    fn oracle_multiplier(f: &PcFunction, w: impl Fn(i64) -> f64, band: i64, y: f64) -> C64 {
        (-band..=band)
            .map(|k| fourier_coefficient(f, k) * w(k) * C64::from_polar(1.0, k as f64 * y))
            .sum()
    }

    #[test]
    fn partial_sum_examples() {
        let c = PcFunction::constant(4, C64::new(2.5, -1.0)).unwrap();
        for n in [0, 1, 7, 40] {
            assert!((partial_sum(&c, n, 0.3).unwrap() - C64::new(2.5, -1.0)).norm() < 1e-13);
        }
        let ind = PcFunction::indicator(1, 0.0, PI).unwrap();
        assert!((partial_sum(&ind, 1, 0.0).unwrap() - C64::new(0.5, 0.0)).norm() < 1e-15);
        let p = TrigPoly::from_terms(&[(-3, C64::new(1.0, 2.0)), (2, C64::new(0.5, 0.0))]);
        let sig = Signal::Trig(p.clone());
        for y in [-2.0, 0.1, 1.7] {
            assert!((apply_at(&sig, &Multiplier::partial_sum(3), y) - p.eval(y)).norm() < 1e-14);
            assert!((apply_at(&sig, &Multiplier::vallee_poussin(3).unwrap(), y) - p.eval(y)).norm() < 1e-14);
            assert!(apply_at(&sig, &Multiplier::sv_difference(3).unwrap(), y).norm() < 1e-14);
        }
    }

    #[test]
    fn vp_single_frequency() {
        let sig = Signal::Trig(TrigPoly::from_terms(&[(3, C64::new(1.0, 0.0))]));
        let y = 0.9;
        let v = apply_at(&sig, &Multiplier::vallee_poussin(2).unwrap(), y);
        assert!((v - C64::from_polar(0.5, 3.0 * y)).norm() < 1e-15);
        let d = apply_at(&sig, &Multiplier::sv_difference(2).unwrap(), y);
        assert!((d + C64::from_polar(0.5, 3.0 * y)).norm() < 1e-15);
    }

    #[test]
    fn fejer_of_one() {
        let one = PcFunction::constant(3, C64::new(1.0, 0.0)).unwrap();
        for n in [0, 4, 100] {
            assert!((fejer_mean(&one, n, -1.0).unwrap() - 1.0).norm() < 1e-13);
        }
        let f = steps(5, 3);
        let want = f.integral() / TAU;
        assert!((fejer_mean(&f, 0, 0.4).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn pointwise_matches_cellwise_oracle() {
        let f = steps(4, 11);
        for y in [-3.0, -0.77, 0.0, 2.2] {
            for n in [1u64, 5, 17, 40] {
                let ni = n as i64;
                let s = partial_sum(&f, n, y).unwrap();
                assert!((s - oracle_multiplier(&f, |_| 1.0, ni, y)).norm() < 1e-11);
                let v = vp_mean(&f, n, y).unwrap();
                let vw = |k: i64| {
                    let a = k.abs();
                    if a <= ni {
                        1.0
                    } else {
                        (2 * ni - a) as f64 / n as f64
                    }
                };
                assert!((v - oracle_multiplier(&f, vw, 2 * ni - 1, y)).norm() < 1e-11);
                let s_avg: C64 = (n..2 * n).map(|j| partial_sum(&f, j, y).unwrap()).sum::<C64>() / n as f64;
                assert!((v - s_avg).norm() < 1e-11);
                let sig: C64 = (0..=n).map(|j| partial_sum(&f, j, y).unwrap()).sum::<C64>() / (n + 1) as f64;
                assert!((fejer_mean(&f, n, y).unwrap() - sig).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn progression_harmonic_matches_direct_sum() {
        for (first, step, count) in [(1u64, 1u64, 1000u64), (7, 2048, 5000), (2047, 2048, 70), (3, 5, 100_000)] {
            let direct: f64 = (0..count).rev().map(|t| 1.0 / (first + t * step) as f64).sum();
            let fast = progression_harmonic(first, step, count);
            assert!((fast - direct).abs() < 1e-14 * direct.max(1.0), "{first} {step} {count}: {fast} vs {direct}");
        }
    }

    #[test]
    fn grid_engine_matches_direct_summation() {
        for (level, g) in [(3u32, 4u32), (6, 5), (8, 6), (5, 2)] {
            let f = steps(level, level as u64 + 1);
            let sig = Signal::pc(f);
            let mults = vec![
                Multiplier::partial_sum(0),
                Multiplier::partial_sum(37),
                Multiplier::fejer(150),
                Multiplier::vallee_poussin(61).unwrap(),
                Multiplier::sv_difference(200).unwrap(),
                Multiplier::average(&[
                    Multiplier::sv_difference(10).unwrap(),
                    Multiplier::sv_difference(23).unwrap(),
                    Multiplier::fejer(12),
                ])
                .unwrap(),
            ];
            for m in &mults {
                let fast = apply_grid(&sig, m, g).unwrap();
                for (p, y) in grid_midpoints(g).into_iter().enumerate() {
                    let slow = apply_at(&sig, m, y);
                    assert!((fast[p] - slow).norm() < 1e-10, "level {level} g {g} p {p}: {} vs {}", fast[p], slow);
                }
            }
        }
    }

    #[test]
    fn grid_engine_handles_huge_orders() {
        // S_n f -> f at midpoints away from jumps; the error decays like 1/n.
        let f = PcFunction::indicator(1, 0.0, PI).unwrap();
        let sig = Signal::pc(f.clone());
        let s = apply_grid(&sig, &Multiplier::partial_sum(1 << 31), 6).unwrap();
        for (p, y) in grid_midpoints(6).into_iter().enumerate() {
            assert!((s[p] - f.value_at(y)).norm() < 1e-6);
        }
        let d = apply_grid(&sig, &Multiplier::sv_difference(1 << 31).unwrap(), 6).unwrap();
        assert!(d.iter().all(|z| z.norm() < 1e-6));
    }

    #[test]
    fn sv_support_window() {
        let m = Multiplier::sv_difference(9).unwrap();
        for k in -30i64..=30 {
            let inside = (10..=17).contains(&k.abs());
            assert_eq!(m.weight(k) != 0.0, inside, "k = {k}");
        }
        assert_eq!(m.nonzero_frequencies(), (10..=17).collect::<Vec<_>>());
    }

    /// Midpoint-rule oracle for the excised cotangent integral.
    fn hilbert_oracle(f: &PcFunction, n: u64, y: f64, theta: i64) -> C64 {
        let res = 20u32;
        let ell = dyadic_order(n).unwrap();
        let cells = 1u64 << res;
        let h = TAU / cells as f64;
        let i = cell_index(y, ell);
        let scale = 1u64 << (res - ell);
        let start = (i + (1u64 << ell) - 1) % (1u64 << ell) * scale;
        let mut acc = C64::new(0.0, 0.0);
        for q in 0..cells {
            if (q + cells - start) % cells < 3 * scale {
                continue;
            }
            let x = crate::circle::cell_midpoint(q, res);
            acc += f.value_at(x) * C64::from_polar(1.0, theta as f64 * x) / (0.5 * (y - x)).tan();
        }
        acc * h
    }

    #[test]
    fn hilbert_examples() {
        let c = PcFunction::constant(5, C64::new(3.0, 0.0)).unwrap();
        for (n, idx) in [(8u64, 2u64), (64, 40), (1000, 300)] {
            let ell = dyadic_order(n).unwrap();
            let y = crate::circle::cell_midpoint(idx % (1 << ell), ell);
            assert!(hilbert_modified(&c, n, y).unwrap().norm() < 1e-12);
        }
        // Support inside the excluded set.
        let f = PcFunction::indicator(4, 0.0, TAU / 16.0).unwrap();
        assert_eq!(hilbert_modified(&f, 8, 0.1).unwrap(), C64::new(0.0, 0.0));
        // Orders below 4 exclude everything.
        assert_eq!(hilbert_modified(&steps(4, 1), 3, 0.1).unwrap(), C64::new(0.0, 0.0));
        // One far cell.
        let (a, b) = (-PI, -PI + TAU / 32.0);
        let far = PcFunction::indicator(5, a, b).unwrap().scale(C64::new(2.0, 0.0));
        let y = 1.0;
        let want = 2.0 * 2.0 * (((y - a) / 2.0).sin().abs().ln() - ((y - b) / 2.0).sin().abs().ln());
        let got = hilbert_modified(&far, 8, y).unwrap();
        assert!((got.re - want).abs() < 1e-12 * want.abs());
        assert!((got - hilbert_oracle(&far, 8, y, 0)).norm() < 1e-6 * want.abs());
    }

    #[test]
    fn hilbert_matches_quadrature() {
        for (seed, n, y) in [(1u64, 8u64, 0.3), (2, 100, -2.9), (3, 33, 3.1), (4, 5000, -0.001)] {
            let f = steps(5, seed);
            let got = hilbert_modified(&f, n, y).unwrap();
            let want = hilbert_oracle(&f, n, y, 0);
            assert!((got - want).norm() < 1e-6 * (1.0 + want.norm()), "{got} vs {want}");
        }
    }

    #[test]
    fn modulated_hilbert_matches_quadrature() {
        let f = steps(4, 9);
        for (n, theta, y) in [(16u64, 3i64, 0.4), (16, -5, -1.3), (40, 9, 2.0), (40, 0, 2.0)] {
            let got = Localized::new(&f).hilbert_of_modulation(n, theta, y).unwrap();
            let want = hilbert_oracle(&f, n, y, theta);
            assert!((got - want).norm() < 1e-5 * (1.0 + want.norm()), "theta {theta}: {got} vs {want}");
        }
    }

    /// Midpoint-rule oracle for the excised Dirichlet integral.
    fn modified_oracle(f: &PcFunction, l: u64, nex: u64, y: f64) -> C64 {
        let res = 18u32;
        let ell = dyadic_order(nex).unwrap();
        let cells = 1u64 << res;
        let h = TAU / cells as f64;
        let scale = 1u64 << (res - ell);
        let start = (cell_index(y, ell) + (1u64 << ell) - 1) % (1u64 << ell) * scale;
        let mut acc = C64::new(0.0, 0.0);
        for q in 0..cells {
            if (q + cells - start) % cells < 3 * scale {
                continue;
            }
            let x = crate::circle::cell_midpoint(q, res);
            acc += f.value_at(x) * crate::kernels::dirichlet_kernel(l, crate::circle::wrap(y - x));
        }
        acc * h / PI
    }

    #[test]
    fn modified_partial_sum_matches_quadrature() {
        for (seed, l, nex, y) in [(5u64, 8u64, 8u64, 0.2), (6, 12, 12, -1.0), (7, 5, 64, 2.5)] {
            let f = steps(4, seed);
            let got = modified_partial_sum(&f, l, nex, y).unwrap();
            let want = modified_oracle(&f, l, nex, y);
            assert!((got - want).norm() < 1e-5 * (1.0 + want.norm()), "{got} vs {want}");
        }
        let inside = PcFunction::indicator(4, 0.0, TAU / 16.0).unwrap();
        assert!(modified_partial_sum(&inside, 8, 8, 0.1).unwrap().norm() < 1e-13);
        assert_eq!(modified_partial_sum(&PcFunction::zero(3).unwrap(), 9, 9, 0.0).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn e_operator_examples() {
        let one = PcFunction::constant(3, C64::new(1.0, 0.0)).unwrap();
        for l in [4u64, 9, 1024, 5000] {
            let ell = dyadic_order(l).unwrap();
            let want = l as f64 * 3.0 * TAU / (1u64 << ell) as f64;
            assert!((e_operator(&one, l, l, 0.7).unwrap().re - want).abs() < 1e-12 * want);
        }
        assert_eq!(e_operator(&PcFunction::zero(3).unwrap(), 7, 7, 0.0).unwrap(), C64::new(0.0, 0.0));
    }

    #[test]
    fn domination_by_local_average() {
        for seed in 0..6u64 {
            let f = steps(5, seed);
            let abs = f.abs();
            for l in [8u64, 32] {
                for y in grid_midpoints(4) {
                    let s = partial_sum(&f, l, y).unwrap();
                    let st = modified_partial_sum(&f, l, l, y).unwrap();
                    let e = e_operator(&abs, l, l, y).unwrap().re;
                    assert!((s - st).norm() <= e + 1e-9);
                }
            }
        }
    }

    #[test]
    fn modified_partial_sum_square_bound() {
        let f = steps(5, 21);
        let l1 = crate::circle::lp_norm(&f, crate::circle::Norm::L1);
        let l = 8u64;
        let ctx = Localized::new(&f);
        for y in grid_midpoints(6) {
            let st = modified_partial_sum(&f, l, l, y).unwrap();
            let h1 = ctx.hilbert_of_modulation(l, -(l as i64 + 1), y).unwrap();
            let h2 = ctx.hilbert_of_modulation(l, l as i64, y).unwrap();
            assert!(st.norm_sqr() <= l1 * l1 + h1.norm_sqr() + h2.norm_sqr());
        }
    }

    #[test]
    fn grid_versions_match_pointwise() {
        let f = steps(5, 2);
        let g = 4;
        let h = hilbert_grid(&f, 64, g).unwrap();
        let s = modified_partial_sum_grid(&f, 20, 64, g).unwrap();
        let e = e_operator_grid(&f, 20, 64, g).unwrap();
        for (p, y) in grid_midpoints(g).into_iter().enumerate() {
            assert!((h[p] - hilbert_modified(&f, 64, y).unwrap()).norm() < 1e-12);
            assert!((s[p] - modified_partial_sum(&f, 20, 64, y).unwrap()).norm() < 1e-10);
            assert!((e[p] - e_operator(&f, 20, 64, y).unwrap()).norm() < 1e-12);
        }
    }

    #[test]
    fn t_operator_examples() {
        let seq = make_lacunary(2.0, 10, 6).unwrap();
        let f = steps(4, 8);
        let y = 0.25;
        let t1 = t_operator(&f, &seq, 1, y).unwrap();
        assert!((t1 - sv_difference(&f, 10, y).unwrap()).norm() < 1e-13);
        let g = steps(4, 9);
        let fg = f.combine(C64::new(2.0, 0.0), &g, C64::new(0.0, -1.0)).unwrap();
        let lin = t_operator(&f, &seq, 5, y).unwrap() * 2.0 + t_operator(&g, &seq, 5, y).unwrap() * C64::new(0.0, -1.0);
        assert!((t_operator(&fg, &seq, 5, y).unwrap() - lin).norm() < 1e-11);
        let p = Signal::Trig(TrigPoly::from_terms(&[(4, C64::new(1.0, 0.0)), (-9, C64::new(0.3, 0.0))]));
        assert!(apply_at(&p, &t_multiplier(&seq, 6).unwrap(), y).norm() < 1e-15);
    }

    #[test]
    fn t_beta_reduces_without_selected_intervals() {
        let seq = make_lacunary(2.0, 10, 8).unwrap();
        let spec = CompositeSpec::new(seq.clone(), 8, 9, 0.3).unwrap();
        let f = steps(4, 5);
        let lambda = 10.0 * crate::circle::lp_norm(&f, crate::circle::Norm::Inf);
        for y in [-1.0, 0.5] {
            let a = t_beta_operator(&f, &spec, lambda, y).unwrap();
            let b = t_operator(&f, &seq, 8, y).unwrap();
            assert!((a - b).norm() < 1e-11);
        }
        let grid = t_beta_grid(&f, &spec, lambda, 5).unwrap();
        let plain = apply_grid(&Signal::pc(f), &t_multiplier(&seq, 8).unwrap(), 5).unwrap();
        for (a, b) in grid.iter().zip(&plain) {
            assert!((a - b).norm() < 1e-11);
        }
    }

    #[test]
    fn composite_spec_gates() {
        let seq = make_lacunary(2.0, 10, 4).unwrap();
        assert!(CompositeSpec::new(seq.clone(), 4, 7, 0.3).is_err());
        assert!(CompositeSpec::new(seq.clone(), 4, 10, 0.3).is_err());
        assert!(CompositeSpec::new(seq.clone(), 4, 9, 0.5).is_err());
        assert!(CompositeSpec::new(seq.clone(), 5, 9, 0.3).is_err());
        assert!(CompositeSpec::new(seq, 4, 9, 0.3).is_ok());
    }
}
