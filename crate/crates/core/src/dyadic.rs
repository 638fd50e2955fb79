//! Dyadic intervals of `T`, the Calderon-Zygmund stopping-time decomposition
//! and the set algebra built on its selected intervals.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::circle::{cell_index, wrap, GridSet, Norm, PcFunction, C64, TAU};
use crate::error::{Error, Result};

/// Deepest dyadic level representable without overflowing index arithmetic.
pub const MAX_DYADIC_LEVEL: u32 = 62;

/// `[-pi + 2 pi k / 2^n, -pi + 2 pi (k+1) / 2^n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub index: u64,
}

impl DyadicInterval {
    pub fn new(level: u32, index: u64) -> Result<Self> {
        if level > MAX_DYADIC_LEVEL {
            return Err(Error::arg("level", format!("{level} exceeds {MAX_DYADIC_LEVEL}")));
        }
        if index >= 1u64 << level {
            return Err(Error::arg("index", format!("{index} out of range at level {level}")));
        }
        Ok(DyadicInterval { level, index })
    }

    pub fn root() -> Self {
        DyadicInterval { level: 0, index: 0 }
    }

    pub fn measure(&self) -> f64 {
        TAU / (1u64 << self.level) as f64
    }

    pub fn left(&self) -> f64 {
        -PI + self.index as f64 * self.measure()
    }

    pub fn right(&self) -> f64 {
        -PI + (self.index + 1) as f64 * self.measure()
    }

    pub fn midpoint(&self) -> f64 {
        crate::circle::cell_midpoint(self.index, self.level)
    }

    pub fn contains_point(&self, y: f64) -> bool {
        cell_index(wrap(y), self.level) == self.index
    }

    /// `other` is a (not necessarily strict) subset of `self`.
    pub fn contains(&self, other: &DyadicInterval) -> bool {
        other.level >= self.level && (other.index >> (other.level - self.level)) == self.index
    }

    pub fn is_disjoint(&self, other: &DyadicInterval) -> bool {
        !self.contains(other) && !other.contains(self)
    }

    pub fn parent(&self) -> Option<DyadicInterval> {
        (self.level > 0).then(|| DyadicInterval {
            level: self.level - 1,
            index: self.index >> 1,
        })
    }

    pub fn children(&self) -> [DyadicInterval; 2] {
        [
            DyadicInterval {
                level: self.level + 1,
                index: 2 * self.index,
            },
            DyadicInterval {
                level: self.level + 1,
                index: 2 * self.index + 1,
            },
        ]
    }

    /// `I + |I| i` modulo the circle.
    pub fn neighbor(&self, i: i64) -> DyadicInterval {
        let n = 1i128 << self.level;
        let index = (self.index as i128 + i as i128).rem_euclid(n) as u64;
        DyadicInterval {
            level: self.level,
            index,
        }
    }

    /// Cells `start, start+1, .. start+len-1` (cyclic) of the level-`level`
    /// grid covered by `gamma I`; `len` saturates at the whole circle.
    pub fn dilation_arc(&self, gamma: u64, level: u32) -> Result<(u64, u64)> {
        check_gamma(gamma)?;
        if level < self.level {
            return Err(Error::arg("level", "grid coarser than interval"));
        }
        let scale = 1u64 << (level - self.level);
        let cells = 1u64 << level;
        let half = (gamma - 1) / 2;
        let first = self.neighbor(-(half as i64));
        let len = (gamma as u128 * scale as u128).min(cells as u128) as u64;
        Ok((first.index * scale, len))
    }

    /// `gamma I` as a cell mask at `level` (at least the interval's own level).
    pub fn dilate_at(&self, gamma: u64, level: u32) -> Result<GridSet> {
        let level = level.max(self.level);
        let (start, len) = self.dilation_arc(gamma, level)?;
        let mut set = GridSet::empty(level);
        set.set_range_cyclic(start, len);
        Ok(set)
    }

    pub fn as_set(&self, level: u32) -> Result<GridSet> {
        self.dilate_at(1, level)
    }
}

fn check_gamma(gamma: u64) -> Result<()> {
    if gamma == 0 || gamma % 2 == 0 {
        return Err(Error::arg("gamma", format!("{gamma} must be an odd positive integer")));
    }
    Ok(())
}

/// `I_n(y)`.
pub fn containing_interval(y: f64, n: u32) -> Result<DyadicInterval> {
    if n > MAX_DYADIC_LEVEL {
        return Err(Error::arg("level", format!("{n} exceeds {MAX_DYADIC_LEVEL}")));
    }
    if !(-PI..PI).contains(&y) {
        return Err(Error::arg("y", format!("{y} outside [-pi, pi)")));
    }
    Ok(DyadicInterval {
        level: n,
        index: cell_index(y, n),
    })
}

pub fn neighbor(interval: &DyadicInterval, i: i64) -> DyadicInterval {
    interval.neighbor(i)
}

/// `gamma I` at the interval's own level.
pub fn dilate(interval: &DyadicInterval, gamma: u64) -> Result<GridSet> {
    interval.dilate_at(gamma, interval.level)
}

/// Pairwise-disjoint dyadic intervals, kept sorted by left endpoint.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalFamily {
    intervals: Vec<DyadicInterval>,
}

impl IntervalFamily {
    pub fn new(mut intervals: Vec<DyadicInterval>) -> Result<Self> {
        intervals.sort_by(|a, b| {
            a.left()
                .partial_cmp(&b.left())
                .expect("finite endpoints")
                .then(a.level.cmp(&b.level))
        });
        for w in intervals.windows(2) {
            if !w[0].is_disjoint(&w[1]) {
                return Err(Error::arg(
                    "family",
                    format!("intervals {:?} and {:?} overlap", w[0], w[1]),
                ));
            }
        }
        Ok(IntervalFamily { intervals })
    }

    pub fn empty() -> Self {
        IntervalFamily::default()
    }

    pub fn intervals(&self) -> &[DyadicInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &DyadicInterval> {
        self.intervals.iter()
    }

    pub fn finest_level(&self) -> u32 {
        self.intervals.iter().map(|i| i.level).max().unwrap_or(0)
    }

    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|i| i.measure()).sum()
    }

    /// Union of the intervals at `level` (raised to the finest member level).
    pub fn union_set(&self, level: u32) -> GridSet {
        dilated_union(self, 1, level).expect("gamma = 1 is odd")
    }

    /// Some member of the family contains `other`.
    pub fn covers(&self, other: &DyadicInterval) -> bool {
        self.intervals.iter().any(|i| i.contains(other))
    }
}

/// One bad part `f_i`, supported in its interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub interval: DyadicInterval,
    pub part: PcFunction,
    /// `|I|^{-1} int_I |f|`.
    pub abs_average: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub good: PcFunction,
    pub bad: Vec<BadPart>,
    pub family: IntervalFamily,
}

/// Per-level sums of a nonnegative (or complex) array, leaves at `sums[level]`.
struct DyadicSums<T> {
    sums: Vec<Vec<T>>,
}

impl<T: Copy + std::ops::Add<Output = T>> DyadicSums<T> {
    fn build(leaves: Vec<T>, level: u32) -> Self {
        let mut sums = vec![Vec::new(); level as usize + 1];
        sums[level as usize] = leaves;
        for l in (0..level as usize).rev() {
            let below = &sums[l + 1];
            let up = below.chunks_exact(2).map(|c| c[0] + c[1]).collect();
            sums[l] = up;
        }
        DyadicSums { sums }
    }

    fn get(&self, i: &DyadicInterval) -> T {
        self.sums[i.level as usize][i.index as usize]
    }
}

/// Stopping-time decomposition at height `lambda`.
///
/// Walks the dyadic tree from `T` and selects the maximal intervals whose
/// `|f|`-average exceeds `lambda`; the walk bottoms out at the grid level of
/// `f`, where the average over a cell is the cell value itself.
pub fn cz_decompose(f: &PcFunction, lambda: f64) -> Result<CzDecomposition> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::hypothesis("cz", format!("lambda = {lambda} must be finite and positive")));
    }
    let level = f.level();
    let cells = f.len() as f64;
    let abs = DyadicSums::build(f.values().iter().map(|z| z.norm()).collect(), level);
    let l1_mean = crate::circle::lp_norm(f, Norm::L1) / TAU;
    let root_mean = abs.get(&DyadicInterval::root()) / cells;
    if lambda <= l1_mean.max(root_mean) {
        return Err(Error::hypothesis(
            "cz",
            format!("lambda = {lambda} must exceed ||f||_1/(2 pi) = {l1_mean}"),
        ));
    }
    let vals = DyadicSums::build(f.values().to_vec(), level);

    let mut selected = Vec::new();
    let mut stack = vec![DyadicInterval::root()];
    while let Some(node) = stack.pop() {
        let count = (1u64 << (level - node.level)) as f64;
        let avg = abs.get(&node) / count;
        if avg > lambda {
            selected.push((node, avg));
        } else if node.level < level {
            let [l, r] = node.children();
            stack.push(r);
            stack.push(l);
        }
    }

    let mut good = f.values().to_vec();
    let mut bad = Vec::with_capacity(selected.len());
    for &(interval, abs_average) in &selected {
        let scale = 1usize << (level - interval.level);
        let lo = interval.index as usize * scale;
        let mean = vals.get(&interval) / scale as f64;
        let mut part = vec![C64::new(0.0, 0.0); f.len()];
        for j in lo..lo + scale {
            part[j] = f.values()[j] - mean;
            good[j] = mean;
        }
        bad.push(BadPart {
            interval,
            part: PcFunction::new(level, part)?,
            abs_average,
        });
    }
    let family = IntervalFamily::new(selected.iter().map(|s| s.0).collect())?;
    Ok(CzDecomposition {
        lambda,
        good: PcFunction::new(level, good)?,
        bad,
        family,
    })
}

impl CzDecomposition {
    /// `f^0 = sum_i f_i`.
    pub fn bad_sum(&self) -> PcFunction {
        let mut acc = vec![C64::new(0.0, 0.0); self.good.len()];
        for b in &self.bad {
            for (a, v) in acc.iter_mut().zip(b.part.values()) {
                *a += v;
            }
        }
        PcFunction::new(self.good.level(), acc).expect("same grid as f")
    }

    pub fn measure_f(&self) -> f64 {
        self.family.measure()
    }

    /// Measures every quantity the decomposition guarantees bounds for.
    pub fn audit(&self, f: &PcFunction) -> CzAudit {
        let f0 = self.bad_sum();
        let reconstruction = f
            .values()
            .iter()
            .zip(self.good.values())
            .zip(f0.values())
            .map(|((v, g), b)| (v - g - b).norm())
            .fold(0.0, f64::max);
        let h = f.cell_width();
        let mut max_bad_mean = 0.0f64;
        let mut min_avg_over_lambda = f64::INFINITY;
        let mut max_avg_over_lambda = 0.0f64;
        let mut max_bad_abs_avg_over_lambda = 0.0f64;
        for b in &self.bad {
            let scale = 1usize << (f.level() - b.interval.level);
            let lo = b.interval.index as usize * scale;
            let cells = &b.part.values()[lo..lo + scale];
            let mean: C64 = cells.iter().sum::<C64>() * h;
            max_bad_mean = max_bad_mean.max(mean.norm());
            let abs_avg: f64 = f.values()[lo..lo + scale].iter().map(|z| z.norm()).sum::<f64>() / scale as f64;
            min_avg_over_lambda = min_avg_over_lambda.min(abs_avg / self.lambda);
            max_avg_over_lambda = max_avg_over_lambda.max(abs_avg / self.lambda);
            let bad_avg: f64 = cells.iter().map(|z| z.norm()).sum::<f64>() / scale as f64;
            max_bad_abs_avg_over_lambda = max_bad_abs_avg_over_lambda.max(bad_avg / self.lambda);
        }
        let outside_support = self.bad.iter().all(|b| {
            let scale = 1usize << (f.level() - b.interval.level);
            let lo = b.interval.index as usize * scale;
            b.part
                .values()
                .iter()
                .enumerate()
                .all(|(j, v)| (lo..lo + scale).contains(&j) || (v.re == 0.0 && v.im == 0.0))
        });
        CzAudit {
            lambda: self.lambda,
            f_l1: crate::circle::lp_norm(f, Norm::L1),
            f_sup: crate::circle::lp_norm(f, Norm::Inf),
            reconstruction_defect: reconstruction,
            good_sup: crate::circle::lp_norm(&self.good, Norm::Inf),
            good_l1: crate::circle::lp_norm(&self.good, Norm::L1),
            max_bad_mean,
            bad_supported_in_interval: outside_support,
            min_avg_over_lambda: if self.bad.is_empty() { f64::NAN } else { min_avg_over_lambda },
            max_avg_over_lambda,
            max_bad_abs_avg_over_lambda,
            measure_f: self.measure_f(),
            intervals: self.family.len(),
            min_interval_level: self.family.iter().map(|i| i.level).min().unwrap_or(0),
        }
    }
}

/// Quantities the decomposition bounds for one `(f, lambda)`.
#[derive(Clone, Debug, Serialize)]
pub struct CzAudit {
    pub lambda: f64,
    pub f_l1: f64,
    pub f_sup: f64,
    pub reconstruction_defect: f64,
    pub good_sup: f64,
    pub good_l1: f64,
    pub max_bad_mean: f64,
    pub bad_supported_in_interval: bool,
    pub min_avg_over_lambda: f64,
    pub max_avg_over_lambda: f64,
    pub max_bad_abs_avg_over_lambda: f64,
    pub measure_f: f64,
    pub intervals: usize,
    pub min_interval_level: u32,
}

impl CzAudit {
    /// Every decomposition invariant at the pinned tolerances.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let slack = 1e-12;
        if self.reconstruction_defect > 1e-10 * (1.0 + self.f_sup) {
            out.push(format!("reconstruction defect {:e}", self.reconstruction_defect));
        }
        if self.good_sup > 2.0 * self.lambda * (1.0 + slack) {
            out.push(format!("||f0||_inf = {} > 2 lambda = {}", self.good_sup, 2.0 * self.lambda));
        }
        if self.good_l1 > 2.0 * self.f_l1 * (1.0 + slack) + 1e-300 {
            out.push(format!("||f0||_1 = {} > 2 ||f||_1", self.good_l1));
        }
        if self.max_bad_mean > 1e-10 * self.f_l1.max(f64::MIN_POSITIVE) {
            out.push(format!("bad part mean {:e}", self.max_bad_mean));
        }
        if !self.bad_supported_in_interval {
            out.push("bad part leaks outside its interval".into());
        }
        if self.intervals > 0 {
            if self.min_avg_over_lambda <= 1.0 {
                out.push(format!("selected average / lambda = {} <= 1", self.min_avg_over_lambda));
            }
            if self.max_avg_over_lambda > 2.0 * (1.0 + slack) {
                out.push(format!("selected average / lambda = {} > 2", self.max_avg_over_lambda));
            }
            if self.max_bad_abs_avg_over_lambda > 4.0 * (1.0 + slack) {
                out.push(format!("bad-part average / lambda = {} > 4", self.max_bad_abs_avg_over_lambda));
            }
            if self.min_interval_level == 0 {
                out.push("root interval selected".into());
            }
        }
        if self.measure_f > self.f_l1 / self.lambda * (1.0 + slack) {
            out.push(format!("|F| = {} > ||f||_1/lambda = {}", self.measure_f, self.f_l1 / self.lambda));
        }
        out
    }
}

/// `F_beta`: members longer than `beta`.
pub fn filter_beta(family: &IntervalFamily, beta: f64) -> IntervalFamily {
    IntervalFamily {
        intervals: family.iter().copied().filter(|i| i.measure() > beta).collect(),
    }
}

/// `gamma F` as a cell mask at `max(level, finest member level)`.
pub fn dilated_union(family: &IntervalFamily, gamma: u64, level: u32) -> Result<GridSet> {
    check_gamma(gamma)?;
    let level = level.max(family.finest_level());
    let mut set = GridSet::empty(level);
    for i in family.iter() {
        let (start, len) = i.dilation_arc(gamma, level)?;
        set.set_range_cyclic(start, len);
    }
    Ok(set)
}

/// Number of cells shared by two cyclic arcs of an `n`-cell circle.
fn arc_overlap(a: (u64, u64), b: (u64, u64), n: u64) -> u64 {
    let (sa, la) = a;
    let (sb, lb) = b;
    if la >= n {
        return lb.min(n);
    }
    if lb >= n {
        return la;
    }
    let d = (sb + n - sa % n) % n;
    let seg = |lo: i128, hi: i128| -> u64 { (hi.min(la as i128) - lo.max(0)).max(0) as u64 };
    seg(d as i128, d as i128 + lb as i128) + seg(d as i128 - n as i128, d as i128 - n as i128 + lb as i128)
}

/// `sum_{I, J} |gamma I cap gamma J|` over ordered pairs, diagonal included.
pub fn overlap_sum(family: &IntervalFamily, gamma: u64) -> Result<f64> {
    overlap_sum_at(family, gamma, family.finest_level())
}

/// [`overlap_sum`] evaluated on a grid of the given level (never coarser
/// than the finest member).
pub fn overlap_sum_at(family: &IntervalFamily, gamma: u64, level: u32) -> Result<f64> {
    check_gamma(gamma)?;
    let level = level.max(family.finest_level());
    let n = 1u64 << level;
    let arcs = family
        .iter()
        .map(|i| i.dilation_arc(gamma, level))
        .collect::<Result<Vec<_>>>()?;
    let mut cells: u128 = 0;
    for a in &arcs {
        for b in &arcs {
            cells += arc_overlap(*a, *b, n) as u128;
        }
    }
    Ok(cells as f64 * TAU / n as f64)
}

/// Members `J` whose shifted copy `J^(shift)` is not strictly inside the
/// shifted copy of another member.
pub fn maximal_selection(family: &IntervalFamily, shift: i64) -> IntervalFamily {
    let shifted: Vec<DyadicInterval> = family.iter().map(|j| j.neighbor(shift)).collect();
    let intervals = family
        .iter()
        .zip(&shifted)
        .filter(|(_, js)| !shifted.iter().any(|ks| ks != *js && ks.contains(js)))
        .map(|(j, _)| *j)
        .collect();
    IntervalFamily { intervals }
}

/// Serializable summary of a decomposition, as written by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CzReport {
    pub lambda: f64,
    pub intervals: Vec<DyadicInterval>,
    #[serde(rename = "measure_F")]
    pub measure_f: f64,
}

impl From<&CzDecomposition> for CzReport {
    fn from(d: &CzDecomposition) -> Self {
        CzReport {
            lambda: d.lambda,
            intervals: d.family.intervals().to_vec(),
            measure_f: d.measure_f(),
        }
    }
}
