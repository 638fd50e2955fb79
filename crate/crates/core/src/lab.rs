//! Experiments: exact identities asserted hard, inequalities measured as
//! bound ratios, weak-type estimates measured as level-set curves.

use std::collections::BTreeMap;

use rustfft::FftPlanner;
use serde::Serialize;

use crate::circle::{grid_midpoints, lp_norm, GridSet, Norm, PcFunction, C64, TAU};
use crate::corpus::CorpusItem;
use crate::dyadic::{cz_decompose, dilated_union, filter_beta, overlap_sum, overlap_sum_at, CzAudit, DyadicInterval, IntervalFamily};
use crate::error::{Error, Result};
use crate::kernels::{check_fejer_bounds, dirichlet_kernel, fejer_kernel};
use crate::operators::{
    apply_at, apply_grid, complement_indicator, e_operator_grid, hilbert_grid, Analysis, Localized, Multiplier, Signal,
};
use crate::sequences::{block_coords, scale_product, IndexSequence, LogBase, SequenceKind};

/// Empirical stand-in for an unspecified constant: `lhs / rhs` where `rhs`
/// is the right-hand side with the constant removed.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundRatioReport {
    pub lemma_id: String,
    pub corpus_item: String,
    pub grid_level: u32,
    pub params: BTreeMap<String, String>,
    pub lhs: f64,
    pub rhs_without_constant: f64,
    pub ratio: f64,
}

impl BoundRatioReport {
    fn new(lemma_id: &str, item: &str, grid_level: u32, params: BTreeMap<String, String>, lhs: f64, rhs: f64) -> Self {
        BoundRatioReport {
            lemma_id: lemma_id.into(),
            corpus_item: item.into(),
            grid_level,
            params,
            lhs,
            rhs_without_constant: rhs,
            ratio: ratio(lhs, rhs),
        }
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params.get(key).map(String::as_str)
    }

    /// `k=v;k=v` with keys sorted.
    pub fn params_string(&self) -> String {
        self.params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(";")
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

macro_rules! params {
    ($($k:expr => $v:expr),* $(,)?) => {{
        let mut m = BTreeMap::new();
        $(m.insert($k.to_string(), $v.to_string());)*
        m
    }};
}

/// Level-set measures against a reference bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WeakTypeCurve {
    pub corpus_item: String,
    pub grid_level: u32,
    pub lambdas: Vec<f64>,
    pub measures: Vec<f64>,
    pub bound_values: Vec<f64>,
}

impl WeakTypeCurve {
    pub fn is_monotone(&self) -> bool {
        self.measures.windows(2).all(|w| w[1] <= w[0])
    }

    /// Smallest `c` with `measure <= c * bound` along the curve.
    pub fn fitted_constant(&self) -> f64 {
        self.measures
            .iter()
            .zip(&self.bound_values)
            .map(|(m, b)| ratio(*m, *b))
            .fold(0.0, f64::max)
    }
}

/// `lambda = factor * ||f||_1 / (2 pi)`; factors above 1 satisfy the
/// decomposition precondition.
pub fn lambda_for(f: &PcFunction, factor: f64) -> f64 {
    factor * lp_norm(f, Norm::L1) / TAU
}

fn check_odd(name: &'static str, v: u64, above: u64) -> Result<()> {
    if v % 2 == 0 || v <= above {
        return Err(Error::hypothesis(name, format!("{name} = {v} must be an odd integer > {above}")));
    }
    Ok(())
}

fn check_gamma_beta(gamma: u64, beta: u64) -> Result<()> {
    check_odd("gamma", gamma, 5)?;
    check_odd("beta", beta, 5)?;
    if beta <= gamma {
        return Err(Error::hypothesis("beta", format!("beta = {beta} must exceed gamma = {gamma}")));
    }
    Ok(())
}

fn check_lacunary(seq: &IndexSequence, q: f64) -> Result<()> {
    let declared = match seq.kind() {
        SequenceKind::Lacunary { q } => q,
        _ => seq.min_ratio(),
    };
    if declared.min(seq.min_ratio()) < q {
        return Err(Error::hypothesis(
            "sequence",
            format!("lacunary ratio {} below the required {q}", declared.min(seq.min_ratio())),
        ));
    }
    Ok(())
}

fn check_strict_lacunary(seq: &IndexSequence, q: f64) -> Result<()> {
    let declared = match seq.kind() {
        SequenceKind::Lacunary { q } => q,
        _ => seq.min_ratio(),
    };
    let worst = declared.min(seq.min_ratio());
    if worst <= q {
        return Err(Error::hypothesis("sequence", format!("lacunary ratio {worst} must exceed {q}")));
    }
    Ok(())
}

/// `N log^5(N + 1)`.
fn sum_weight(n: usize) -> f64 {
    n as f64 * ((n + 1) as f64).ln().powi(5)
}

/// Membership of each level-`g` midpoint in `set`.
pub fn mask_on_grid(set: &GridSet, g: u32) -> Vec<bool> {
    if set.level() <= g {
        let shift = g - set.level();
        (0..1usize << g).map(|p| set.contains_cell(p >> shift)).collect()
    } else {
        grid_midpoints(g).into_iter().map(|y| set.contains(y)).collect()
    }
}

/// `int_set |v|^2` by the midpoint rule on the level-`g` grid.
fn grid_energy(values: &[C64], weight: Option<&[f64]>, mask: &[bool]) -> f64 {
    let h = TAU / values.len() as f64;
    let mut acc = 0.0;
    for (p, v) in values.iter().enumerate() {
        if mask[p] {
            let w = weight.map_or(1.0, |w| w[p] * w[p]);
            acc += v.norm_sqr() * w;
        }
    }
    acc * h
}

// ---------------------------------------------------------------- kernels

#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub max_order: u64,
    pub points: usize,
    /// Largest `|K_n - (1/(n+1)) sum_{k<=n} D_k|`.
    pub max_average_defect: f64,
    pub min_value: f64,
    pub max_decay_ratio: f64,
}

impl KernelReport {
    pub fn passes(&self) -> bool {
        self.max_average_defect <= 1e-10 && self.min_value >= -1e-12 && self.max_decay_ratio <= 1.0 + 1e-9
    }
}

pub fn check_kernel_identities(max_order: u64, points: usize) -> KernelReport {
    let h = TAU / points as f64;
    let us: Vec<f64> = (0..points).map(|p| -std::f64::consts::PI + (p as f64 + 0.5) * h).collect();
    let mut defect = 0.0f64;
    for (p, &u) in us.iter().enumerate() {
        let _ = p;
        let mut running = 0.0;
        for n in 0..=max_order {
            running += dirichlet_kernel(n, u).re;
            let avg = running / (n + 1) as f64;
            defect = defect.max((fejer_kernel(n, u) - avg).abs());
        }
    }
    let mut min_value = f64::INFINITY;
    let mut max_decay_ratio = 0.0f64;
    for n in 0..=max_order {
        let r = check_fejer_bounds(n, points);
        min_value = min_value.min(r.min_value);
        max_decay_ratio = max_decay_ratio.max(r.max_decay_ratio);
    }
    KernelReport {
        max_order,
        points,
        max_average_defect: defect,
        min_value,
        max_decay_ratio,
    }
}

// ------------------------------------------------------------------ cz

#[derive(Clone, Debug, Serialize)]
pub struct CzRow {
    pub corpus_item: String,
    pub lambda_factor: f64,
    pub audit: CzAudit,
    pub violations: Vec<String>,
    pub abs_invariant: bool,
    pub modulation_invariant: bool,
}

impl CzRow {
    pub fn passes(&self) -> bool {
        self.violations.is_empty() && self.abs_invariant && self.modulation_invariant
    }
}

/// Decomposition invariants, plus invariance of the selected family under
/// `f -> |f|` and under midpoint modulations.
pub fn check_cz(item: &CorpusItem, factors: &[f64]) -> Result<Vec<CzRow>> {
    let f = &item.function;
    let mut rows = Vec::new();
    for &factor in factors {
        let lambda = lambda_for(f, factor);
        let d = cz_decompose(f, lambda)?;
        let audit = d.audit(f);
        let violations = audit.violations();
        let abs_invariant = cz_decompose(&f.abs(), lambda)?.family == d.family;
        let modulation_invariant = [1i64, -7, 12345]
            .iter()
            .map(|&k| cz_decompose(&f.modulate_midpoints(k), lambda).map(|m| m.family == d.family))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .all(|b| b);
        rows.push(CzRow {
            corpus_item: item.name.clone(),
            lambda_factor: factor,
            audit,
            violations,
            abs_invariant,
            modulation_invariant,
        });
    }
    Ok(rows)
}

// ------------------------------------------------------------- overlap

#[derive(Clone, Debug, Serialize)]
pub struct OverlapRow {
    pub family: usize,
    pub intervals: usize,
    pub gamma: u64,
    pub measure_f: f64,
    pub overlap: f64,
    pub ratio: f64,
    pub bound: f64,
    /// Same value when recomputed two levels finer.
    pub level_invariant: bool,
}

impl OverlapRow {
    pub fn passes(&self) -> bool {
        self.ratio <= self.bound && self.level_invariant
    }
}

/// Random disjoint dyadic family with members between levels 2 and 8.
pub fn random_family(rng: &mut impl rand::Rng, target: usize) -> IntervalFamily {
    let mut chosen: Vec<DyadicInterval> = Vec::new();
    let mut attempts = 0;
    while chosen.len() < target && attempts < 50 * target {
        attempts += 1;
        let level = rng.gen_range(2..=8u32);
        let index = rng.gen_range(0..1u64 << level);
        let cand = DyadicInterval { level, index };
        if chosen.iter().all(|c| c.is_disjoint(&cand)) {
            chosen.push(cand);
        }
    }
    IntervalFamily::new(chosen).expect("disjoint by construction")
}

pub fn check_overlap(seed: u64, families: usize, gammas: &[u64]) -> Result<Vec<OverlapRow>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    for idx in 0..families {
        let target = rng.gen_range(1..=40);
        let fam = random_family(&mut rng, target);
        for &gamma in gammas {
            let overlap = overlap_sum(&fam, gamma)?;
            let finer = overlap_sum_at(&fam, gamma, fam.finest_level() + 2)?;
            let measure_f = fam.measure();
            rows.push(OverlapRow {
                family: idx,
                intervals: fam.len(),
                gamma,
                measure_f,
                overlap,
                ratio: ratio(overlap, measure_f),
                bound: (gamma * (2 * gamma - 1)) as f64,
                level_invariant: (finer - overlap).abs() <= 1e-12 * overlap.max(1.0),
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------- domination

#[derive(Clone, Debug, Serialize)]
pub struct DominationRow {
    pub corpus_item: String,
    pub order: u64,
    pub points: usize,
    /// Largest `|S_l f - S~_l f| - E_l|f|`; the check is `<= 1e-9`.
    pub max_excess: f64,
}

/// `|S_l f - S~_l f| <= E_l |f|` at the level-`g` midpoints.
pub fn check_domination(item: &CorpusItem, orders: &[u64], g: u32) -> Result<Vec<DominationRow>> {
    let f = &item.function;
    let abs = f.abs();
    let ctx = Localized::new(f);
    let abs_ctx = Localized::new(&abs);
    let signal = Signal::pc(f.clone());
    let mut rows = Vec::new();
    for &l in orders {
        let mult = Multiplier::partial_sum(l);
        let mut max_excess = f64::NEG_INFINITY;
        let ys = grid_midpoints(g);
        for &y in &ys {
            let s = apply_at(&signal, &mult, y);
            let st = ctx.modified_partial_sum(l, l, y, s)?;
            let e = abs_ctx.local_average(l, l, y)?.re;
            max_excess = max_excess.max((s - st).norm() - e);
        }
        rows.push(DominationRow {
            corpus_item: item.name.clone(),
            order: l,
            points: ys.len(),
            max_excess,
        });
    }
    Ok(rows)
}

// ------------------------------------------------- integral inequalities

/// Which operator an integral check evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Hilbert,
    PartialSum,
    SvDifference,
}

impl Quantity {
    fn tag(self) -> &'static str {
        match self {
            Quantity::Hilbert => "hilbert",
            Quantity::PartialSum => "partial_sum",
            Quantity::SvDifference => "sv",
        }
    }
}

/// One function at one height, with its decomposition.
struct Scene<'a> {
    item: &'a CorpusItem,
    lambda: f64,
    l1: f64,
    family: IntervalFamily,
    cz: crate::dyadic::CzDecomposition,
    g: u32,
    signal: Signal,
}

impl<'a> Scene<'a> {
    fn new(item: &'a CorpusItem, lambda: f64, g: u32) -> Result<Self> {
        let f = &item.function;
        let cz = cz_decompose(f, lambda)?;
        Ok(Scene {
            item,
            lambda,
            l1: lp_norm(f, Norm::L1),
            family: cz.family.clone(),
            cz,
            g,
            signal: Signal::pc(f.clone()),
        })
    }

    fn f(&self) -> &PcFunction {
        &self.item.function
    }

    /// `gamma F_{min_len}` (all of `F` when `min_len` is `None`) on the grid.
    fn dilated_mask(&self, gamma: u64, min_len: Option<f64>) -> Result<Vec<bool>> {
        let fam = match min_len {
            Some(b) => filter_beta(&self.family, b),
            None => self.family.clone(),
        };
        Ok(mask_on_grid(&dilated_union(&fam, gamma, self.f().level())?, self.g))
    }

    /// `sigma_m 1_{T \ beta F_eps}` at the grid midpoints.
    fn damping(&self, beta: u64, eps: f64, m: u64) -> Result<Vec<f64>> {
        let ind = complement_indicator(&self.cz, beta, eps)?;
        Ok(apply_grid(&Signal::pc(ind), &Multiplier::fejer(m), self.g)?
            .into_iter()
            .map(|z| z.re)
            .collect())
    }

    /// The operator of `kind` at order `n` on the grid; the Hilbert variant
    /// acts on the companion `f e^{i theta x_c}` when `theta` is given.
    fn values(&self, kind: Quantity, n: u64, theta: Option<i64>) -> Result<Vec<C64>> {
        match kind {
            Quantity::Hilbert => match theta {
                Some(t) => hilbert_grid(&self.f().modulate_midpoints(t), n, self.g),
                None => hilbert_grid(self.f(), n, self.g),
            },
            Quantity::PartialSum => apply_grid(&self.signal, &Multiplier::partial_sum(n), self.g),
            Quantity::SvDifference => apply_grid(&self.signal, &Multiplier::sv_difference(n)?, self.g),
        }
    }

    fn base_rhs(&self) -> f64 {
        self.l1 * self.lambda
    }
}

/// `int_{gamma F_eps} |Q_n f|^2 |sigma_m 1_{T \ beta F_eps}|^2`, maximized
/// over `eps in {2 pi / 2^s : s = 1..=g}`, against `||f||_1 lambda`.
#[allow(clippy::too_many_arguments)]
pub fn check_damped_on_gamma_f_eps(
    kind: Quantity,
    item: &CorpusItem,
    lambda: f64,
    gamma: u64,
    beta: u64,
    n: u64,
    m: u64,
    g: u32,
) -> Result<BoundRatioReport> {
    check_gamma_beta(gamma, beta)?;
    let cap = if kind == Quantity::SvDifference { 50 } else { 100 };
    if m == 0 || n > cap * m {
        return Err(Error::hypothesis("orders", format!("need n <= {cap} m, got n = {n}, m = {m}")));
    }
    let scene = Scene::new(item, lambda, g)?;
    let values = scene.values(kind, n, None)?;
    let mut best = (0.0f64, 0u32);
    let mut seen: Vec<usize> = Vec::new();
    for s in 1..=g {
        let eps = TAU / (1u64 << s) as f64;
        let members = filter_beta(&scene.family, eps).len();
        if seen.contains(&members) {
            continue;
        }
        seen.push(members);
        let mask = scene.dilated_mask(gamma, Some(eps))?;
        let damp = scene.damping(beta, eps, m)?;
        let lhs = grid_energy(&values, Some(&damp), &mask);
        if lhs > best.0 || best.1 == 0 {
            best = (lhs, s);
        }
    }
    let id = format!("damped_{}_on_gamma_f_eps", kind.tag());
    Ok(BoundRatioReport::new(
        &id,
        &item.name,
        g,
        params! {"lambda" => lambda, "gamma" => gamma, "beta" => beta, "n" => n, "m" => m, "eps_level" => best.1},
        best.0,
        scene.base_rhs(),
    ))
}

/// `beta_j` for the flat index `j`.
fn flat_beta(seq: &IndexSequence, j: usize, base: LogBase) -> Result<f64> {
    Ok(scale_product(j, base) / seq.term(j)? as f64)
}

/// `sum_{j<=N} int_{gamma F \ gamma F_{beta_j}} |Q_j|^2` for every `N` in
/// `n_list`, where `Q_j` is `H_{n_j} g_j` with `g_j = f e^{-i(n_j+1) x_c}`,
/// `S_{n_j} f` or `(S - V)_{n_j} f`.
#[allow(clippy::too_many_arguments)]
pub fn check_on_shell(
    kind: Quantity,
    item: &CorpusItem,
    lambda: f64,
    gamma: u64,
    seq: &IndexSequence,
    n_list: &[usize],
    g: u32,
    base: LogBase,
) -> Result<Vec<BoundRatioReport>> {
    check_odd("gamma", gamma, 5)?;
    check_lacunary(seq, 2.0)?;
    let top = n_list.iter().copied().max().unwrap_or(0);
    if top > seq.len() {
        return Err(Error::arg("N", format!("{top} exceeds the sequence length {}", seq.len())));
    }
    let scene = Scene::new(item, lambda, g)?;
    let full = scene.dilated_mask(gamma, None)?;
    let mut terms = Vec::with_capacity(top);
    let mut overlaps = Vec::with_capacity(top);
    for j in 1..=top {
        let n = seq.order(j)?;
        let long = scene.dilated_mask(gamma, Some(flat_beta(seq, j, base)?))?;
        let shell: Vec<bool> = full.iter().zip(&long).map(|(a, b)| *a && !*b).collect();
        let theta = (kind == Quantity::Hilbert).then(|| -(n as i64 + 1));
        let lhs = if shell.iter().any(|&b| b) {
            grid_energy(&scene.values(kind, n, theta)?, None, &shell)
        } else {
            0.0
        };
        terms.push(lhs);
        overlaps.push(shell);
    }
    let id = format!("{}_on_shell", kind.tag());
    let mut out = Vec::new();
    for &n_terms in n_list {
        let lhs: f64 = terms[..n_terms].iter().sum();
        // Shells far apart in j should not meet.
        let gap = ((n_terms as f64).ln().powi(2)).ceil().max(1.0) as usize;
        let mut far_meetings = 0usize;
        for a in 0..n_terms {
            for b in a + gap..n_terms {
                if overlaps[a].iter().zip(&overlaps[b]).any(|(x, y)| *x && *y) {
                    far_meetings += 1;
                }
            }
        }
        out.push(BoundRatioReport::new(
            &id,
            &item.name,
            g,
            params! {"lambda" => lambda, "gamma" => gamma, "N" => n_terms, "n_N" => seq.term(n_terms)?, "far_shell_meetings" => far_meetings},
            lhs,
            sum_weight(n_terms) * scene.base_rhs(),
        ));
    }
    Ok(out)
}

/// `int_{T \ gamma F} |Q_n f|^2` against `||f||_1 lambda`.
pub fn check_off_gamma_f(
    kind: Quantity,
    item: &CorpusItem,
    lambda: f64,
    gamma: u64,
    n: u64,
    g: u32,
) -> Result<BoundRatioReport> {
    check_odd("gamma", gamma, 5)?;
    let scene = Scene::new(item, lambda, g)?;
    let outside: Vec<bool> = scene.dilated_mask(gamma, None)?.into_iter().map(|b| !b).collect();
    let lhs = grid_energy(&scene.values(kind, n, None)?, None, &outside);
    Ok(BoundRatioReport::new(
        &format!("{}_off_gamma_f", kind.tag()),
        &item.name,
        g,
        params! {"lambda" => lambda, "gamma" => gamma, "n" => n},
        lhs,
        scene.base_rhs(),
    ))
}

/// `sum_{j<=N} int_T |(S - V)_{n_j} f|^2 |sigma_{m_j} 1_{T \ beta F_{beta_j}}|^2`
/// for every `N` in `n_list`, `m_j = floor(n_j / 10)`.
#[allow(clippy::too_many_arguments)]
pub fn check_damped_full_circle(
    item: &CorpusItem,
    lambda: f64,
    beta: u64,
    seq: &IndexSequence,
    n_list: &[usize],
    g: u32,
    base: LogBase,
) -> Result<Vec<BoundRatioReport>> {
    damped_sum(item, lambda, None, beta, seq, n_list, g, base)
}

/// As [`check_damped_full_circle`], integrated over `gamma F` only.
#[allow(clippy::too_many_arguments)]
pub fn check_damped_on_gamma_f(
    item: &CorpusItem,
    lambda: f64,
    gamma: u64,
    beta: u64,
    seq: &IndexSequence,
    n_list: &[usize],
    g: u32,
    base: LogBase,
) -> Result<Vec<BoundRatioReport>> {
    check_gamma_beta(gamma, beta)?;
    damped_sum(item, lambda, Some(gamma), beta, seq, n_list, g, base)
}

#[allow(clippy::too_many_arguments)]
fn damped_sum(
    item: &CorpusItem,
    lambda: f64,
    gamma: Option<u64>,
    beta: u64,
    seq: &IndexSequence,
    n_list: &[usize],
    g: u32,
    base: LogBase,
) -> Result<Vec<BoundRatioReport>> {
    check_odd("beta", beta, 7)?;
    check_lacunary(seq, 2.0)?;
    let top = n_list.iter().copied().max().unwrap_or(0);
    if top > seq.len() {
        return Err(Error::arg("N", format!("{top} exceeds the sequence length {}", seq.len())));
    }
    let scene = Scene::new(item, lambda, g)?;
    let region = match gamma {
        Some(gm) => scene.dilated_mask(gm, None)?,
        None => vec![true; 1 << g],
    };
    let mut terms = Vec::with_capacity(top);
    for j in 1..=top {
        let n = seq.order(j)?;
        let m = crate::sequences::m_param(seq, j)?;
        let damp = scene.damping(beta, flat_beta(seq, j, base)?, m)?;
        terms.push(grid_energy(&scene.values(Quantity::SvDifference, n, None)?, Some(&damp), &region));
    }
    let id = if gamma.is_some() { "damped_sv_on_gamma_f" } else { "damped_sv_full_circle" };
    let mut out = Vec::new();
    for &n_terms in n_list {
        let mut params = params! {"lambda" => lambda, "beta" => beta, "N" => n_terms, "n_N" => seq.term(n_terms)?};
        if let Some(gm) = gamma {
            params.insert("gamma".into(), gm.to_string());
        }
        out.push(BoundRatioReport::new(
            id,
            &item.name,
            g,
            params,
            terms[..n_terms].iter().sum(),
            sum_weight(n_terms) * scene.base_rhs(),
        ));
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingReport {
    pub corpus_item: String,
    pub lambda: f64,
    pub gamma: u64,
    pub order: u64,
    pub points_checked: usize,
    /// Largest `|E_l f^0(y)|` over grid points outside `gamma F`.
    pub max_abs: f64,
}

/// `E_l f^0 = 0` off `gamma F`: every selected interval that meets the
/// tripled interval around such a point lies inside it, and bad parts have
/// mean zero.
pub fn check_local_average_vanishing(
    item: &CorpusItem,
    lambda: f64,
    gamma: u64,
    orders: &[u64],
    g: u32,
) -> Result<Vec<VanishingReport>> {
    if gamma < 7 || gamma % 2 == 0 {
        return Err(Error::hypothesis("gamma", format!("gamma = {gamma} must be an odd integer >= 7")));
    }
    let scene = Scene::new(item, lambda, g)?;
    let outside: Vec<bool> = scene.dilated_mask(gamma, None)?.into_iter().map(|b| !b).collect();
    let f0 = scene.cz.bad_sum();
    let mut out = Vec::new();
    for &l in orders {
        let e = e_operator_grid(&f0, l, l, g)?;
        let max_abs = e
            .iter()
            .zip(&outside)
            .filter(|(_, o)| **o)
            .map(|(v, _)| v.norm())
            .fold(0.0, f64::max);
        out.push(VanishingReport {
            corpus_item: item.name.clone(),
            lambda,
            gamma,
            order: l,
            points_checked: outside.iter().filter(|&&b| b).count(),
            max_abs,
        });
    }
    Ok(out)
}

/// `t |{|H_n f| > t}| / ||f||_1` over thresholds `t`.
pub fn hilbert_weak_type(item: &CorpusItem, n: u64, thresholds: &[f64], g: u32) -> Result<WeakTypeCurve> {
    let f = &item.function;
    let l1 = lp_norm(f, Norm::L1);
    let h = hilbert_grid(f, n, g)?;
    let cell = TAU / h.len() as f64;
    let measures = thresholds
        .iter()
        .map(|&t| h.iter().filter(|v| v.norm() > t).count() as f64 * cell)
        .collect();
    Ok(WeakTypeCurve {
        corpus_item: item.name.clone(),
        grid_level: g,
        lambdas: thresholds.to_vec(),
        measures,
        bound_values: thresholds.iter().map(|t| l1 / t).collect(),
    })
}

// --------------------------------------------------------- orthogonality

#[derive(Clone, Debug, Serialize)]
pub struct SpectralWindow {
    pub j: usize,
    pub order: u64,
    /// Hull of the positive-frequency support of the addend (empty if `None`).
    pub support: Option<(u64, u64)>,
    pub window: (u64, u64),
}

#[derive(Clone, Debug, Serialize)]
pub struct OrthogonalityReport {
    pub corpus_item: String,
    pub lambda: f64,
    pub terms: usize,
    /// `||sum_j A_j||_2^2` from grid values of the operators.
    pub norm_of_sum: f64,
    /// `sum_j ||A_j||_2^2` from exact coefficient convolutions.
    pub sum_of_norms: f64,
    pub relative_defect: f64,
    pub windows: Vec<SpectralWindow>,
    pub windows_ok: bool,
    pub disjoint_ok: bool,
}

impl OrthogonalityReport {
    pub fn passes(&self) -> bool {
        self.relative_defect <= 1e-8 && self.windows_ok && self.disjoint_ok
    }
}

/// Linear convolution through zero-padded FFTs.
fn convolve(a: &[C64], b: &[C64]) -> Vec<C64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fa = a.to_vec();
    fa.resize(size, C64::new(0.0, 0.0));
    let mut fb = b.to_vec();
    fb.resize(size, C64::new(0.0, 0.0));
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    let s = 1.0 / size as f64;
    fa.truncate(len);
    fa.iter_mut().for_each(|z| *z *= s);
    fa
}

/// Largest grid the orthogonality check evaluates on.
pub const MAX_ORTHOGONALITY_LEVEL: u32 = 22;

/// Orthogonality of the damped addends
/// `A_j = (S - V)_{n_j} f * sigma_{m_j} 1_{T \ beta F_{beta_j}}`.
///
/// Each `A_j` is a trigonometric polynomial; its coefficients are the exact
/// convolution of the two factors' coefficients, and its frequency support
/// is bounded by integer arithmetic on the factors' supports. The norm of
/// the sum is computed separately from grid values on a grid fine enough to
/// integrate `|sum A_j|^2` exactly.
pub fn check_orthogonality_equality(
    item: &CorpusItem,
    seq: &IndexSequence,
    n_terms: usize,
    beta: u64,
    lambda: f64,
    base: LogBase,
) -> Result<OrthogonalityReport> {
    check_odd("beta", beta, 7)?;
    check_strict_lacunary(seq, 2.5)?;
    if n_terms == 0 || n_terms > seq.len() {
        return Err(Error::arg("N", format!("{n_terms} outside 1..={}", seq.len())));
    }
    let f = &item.function;
    let cz = cz_decompose(f, lambda)?;
    let analysis = Analysis::new(f.clone());
    let signal = Signal::Pc(analysis.clone());
    let top = seq.order(n_terms)?;
    let degree = (21 * top).div_ceil(10) + 1;
    let level = (64 - (4 * degree + 2).leading_zeros()).max(4);
    if level > MAX_ORTHOGONALITY_LEVEL {
        return Err(Error::arg("N", format!("n_N = {top} needs a grid of level {level}")));
    }
    let mut physical = vec![C64::new(0.0, 0.0); 1 << level];
    let mut sum_of_norms = 0.0;
    let mut windows = Vec::with_capacity(n_terms);
    let mut windows_ok = true;
    for j in 1..=n_terms {
        let n = seq.order(j)?;
        let m = crate::sequences::m_param(seq, j)?;
        let ind = complement_indicator(&cz, beta, flat_beta(seq, j, base)?)?;
        let ind_an = Analysis::new(ind.clone());
        let sv = Multiplier::sv_difference(n)?;
        let fej = Multiplier::fejer(m);

        let pos: Vec<C64> = (n + 1..=2 * n - 1).map(|k| analysis.coeff(k as i64) * sv.weight(k as i64)).collect();
        let neg: Vec<C64> = (n + 1..=2 * n - 1).map(|k| analysis.coeff(-(k as i64)) * sv.weight(k as i64)).collect();
        let damp: Vec<C64> = (-(m as i64)..=m as i64).map(|k| ind_an.coeff(k) * fej.weight(k)).collect();

        let nonzero = |v: &[C64], offset: i64| -> Option<(i64, i64)> {
            let lo = v.iter().position(|z| *z != C64::new(0.0, 0.0))?;
            let hi = v.iter().rposition(|z| *z != C64::new(0.0, 0.0))?;
            Some((lo as i64 + offset, hi as i64 + offset))
        };
        let window = ((9 * n).div_ceil(10), 21 * n / 10);
        let d_hull = nonzero(&damp, -(m as i64));
        let mut support = None;
        for (part, sign) in [(&pos, 1i64), (&neg, -1i64)] {
            let hull = nonzero(part, n as i64 + 1);
            if let (Some((a, b)), Some((c, d))) = (hull, d_hull) {
                // Positive part: k in [a, b]; mirrored part: -k in [a, b].
                let (lo, hi) = if sign > 0 { (a + c, b + d) } else { (a - d, b - c) };
                if lo < window.0 as i64 || hi > window.1 as i64 {
                    windows_ok = false;
                }
                let (slo, shi) = support.unwrap_or((lo, hi));
                support = Some((slo.min(lo), shi.max(hi)));
            }
        }
        windows.push(SpectralWindow {
            j,
            order: n,
            support: support.map(|(a, b)| (a as u64, b as u64)),
            window,
        });

        // Coefficient route. Mirrored part is reversed so indices run upward.
        let mut neg_up = neg.clone();
        neg_up.reverse();
        let energy: f64 = convolve(&pos, &damp)
            .iter()
            .chain(convolve(&neg_up, &damp).iter())
            .map(|z| z.norm_sqr())
            .sum();
        sum_of_norms += TAU * energy;

        // Grid route.
        let a = apply_grid(&signal, &sv, level)?;
        let b = apply_grid(&Signal::Pc(ind_an), &fej, level)?;
        for ((acc, x), y) in physical.iter_mut().zip(&a).zip(&b) {
            *acc += x * y;
        }
    }
    let norm_of_sum = physical.iter().map(|z| z.norm_sqr()).sum::<f64>() * TAU / physical.len() as f64;
    let relative_defect = if sum_of_norms == 0.0 && norm_of_sum == 0.0 {
        0.0
    } else {
        (norm_of_sum - sum_of_norms).abs() / sum_of_norms.max(norm_of_sum)
    };
    let mut disjoint_ok = true;
    let hulls: Vec<(u64, u64)> = windows.iter().filter_map(|w| w.support).collect();
    for (i, a) in hulls.iter().enumerate() {
        for b in &hulls[i + 1..] {
            if a.0 <= b.1 && b.0 <= a.1 {
                disjoint_ok = false;
            }
        }
    }
    Ok(OrthogonalityReport {
        corpus_item: item.name.clone(),
        lambda,
        terms: n_terms,
        norm_of_sum,
        sum_of_norms,
        relative_defect,
        windows,
        windows_ok,
        disjoint_ok,
    })
}

/// `||sum_j A_j||_2^2 / (N log^5(N+1) ||f||_1 lambda)` per corpus item.
pub fn check_orthogonality_bound(
    corpus: &[CorpusItem],
    seq: &IndexSequence,
    n_terms: usize,
    beta: u64,
    lambda_factor: f64,
    base: LogBase,
) -> Result<Vec<(BoundRatioReport, OrthogonalityReport)>> {
    corpus
        .iter()
        .map(|item| {
            let f = &item.function;
            let l1 = lp_norm(f, Norm::L1);
            // The zero function satisfies every bound trivially.
            let lambda = if l1 == 0.0 { lambda_factor } else { lambda_for(f, lambda_factor) };
            let rep = check_orthogonality_equality(item, seq, n_terms, beta, lambda, base)?;
            let report = BoundRatioReport::new(
                "orthogonal_sum_bound",
                &item.name,
                0,
                params! {"lambda" => lambda, "beta" => beta, "N" => n_terms, "n_N" => seq.term(n_terms)?},
                rep.sum_of_norms,
                sum_weight(n_terms) * l1 * lambda,
            );
            Ok((report, rep))
        })
        .collect()
}

// ----------------------------------------------------------- replacement

/// `|{y : max_{N <= n_max} |T_{N,beta} f - T_N f| > lambda/2}|` for each
/// `lambda`, against `sqrt(||f||_1 / lambda) / (1 - 2 delta)`.
#[allow(clippy::too_many_arguments)]
pub fn check_replacement(
    item: &CorpusItem,
    seq: &IndexSequence,
    beta: u64,
    delta: f64,
    lambdas: &[f64],
    n_max: usize,
    g: u32,
    base: LogBase,
) -> Result<WeakTypeCurve> {
    check_odd("beta", beta, 7)?;
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::hypothesis("delta", format!("delta = {delta} must lie in (0, 1/2)")));
    }
    if n_max == 0 || n_max > seq.len() {
        return Err(Error::arg("N_max", format!("{n_max} outside 1..={}", seq.len())));
    }
    let f = &item.function;
    let l1 = lp_norm(f, Norm::L1);
    let signal = Signal::pc(f.clone());
    let grid = 1usize << g;
    let sv: Vec<Vec<C64>> = (1..=n_max)
        .map(|i| apply_grid(&signal, &Multiplier::sv_difference(seq.order(i)?)?, g))
        .collect::<Result<_>>()?;
    let orders: Vec<u64> = (1..=n_max).map(|i| crate::sequences::m_param(seq, i)).collect::<Result<_>>()?;
    let mut measures = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let cz = cz_decompose(f, lambda)?;
        let mut sup = vec![0.0f64; grid];
        let mut acc = vec![C64::new(0.0, 0.0); grid];
        let mut current_k0 = 0usize;
        let mut cache: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        let term = |i: usize, k0: usize, cache: &mut BTreeMap<(usize, usize), Vec<f64>>| -> Result<Vec<C64>> {
            let blocks = crate::sequences::BlockCoords { n: 0, k: 0, k0 };
            let (j, _) = blocks.coords(i);
            let beta_prime = scale_product(j, base) / seq.term(i)? as f64;
            let d = match cache.entry((i, k0)) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => {
                    let ind = complement_indicator(&cz, beta, beta_prime)?;
                    let d = apply_grid(&Signal::pc(ind), &Multiplier::fejer(orders[i - 1]), g)?;
                    e.insert(d.into_iter().map(|z| z.re - 1.0).collect())
                }
            };
            Ok(sv[i - 1].iter().zip(d).map(|(s, w)| s * *w).collect())
        };
        for n in 1..=n_max {
            let k0 = block_coords(n, delta)?.k0;
            if k0 != current_k0 {
                current_k0 = k0;
                acc.iter_mut().for_each(|a| *a = C64::new(0.0, 0.0));
                for i in 1..n {
                    for (a, t) in acc.iter_mut().zip(term(i, k0, &mut cache)?) {
                        *a += t;
                    }
                }
            }
            for (a, t) in acc.iter_mut().zip(term(n, k0, &mut cache)?) {
                *a += t;
            }
            let scale = 1.0 / n as f64;
            for (s, a) in sup.iter_mut().zip(&acc) {
                *s = s.max(a.norm() * scale);
            }
        }
        let cell = TAU / grid as f64;
        measures.push(sup.iter().filter(|&&v| v > lambda / 2.0).count() as f64 * cell);
    }
    Ok(WeakTypeCurve {
        corpus_item: item.name.clone(),
        grid_level: g,
        lambdas: lambdas.to_vec(),
        measures,
        bound_values: lambdas.iter().map(|l| (l1 / l).sqrt() / (1.0 - 2.0 * delta)).collect(),
    })
}

// ----------------------------------------------------------- convergence

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceMode {
    /// `T_N f = (1/N) sum (S_{n_j} - V_{n_j}) f`.
    SvAverage,
    /// `(1/N) sum S_{n_j} f - f`.
    FullAverage,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergencePoint {
    pub n: usize,
    pub sup: f64,
    pub l1: f64,
    /// `(eps, |{|error| > eps}|)`.
    pub exceedance: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceCurve {
    pub label: String,
    pub grid_level: u32,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceCurve {
    /// Measures above `eps` along the curve.
    pub fn measures(&self, eps: f64) -> Vec<f64> {
        self.points
            .iter()
            .map(|p| p.exceedance.iter().find(|(e, _)| *e == eps).map_or(f64::NAN, |x| x.1))
            .collect()
    }
}

/// Ends below its start and increases at most once along the way.
pub fn decreasing_with_one_inversion(v: &[f64]) -> bool {
    if v.len() < 2 {
        return true;
    }
    let inversions = v.windows(2).filter(|w| w[1] >= w[0]).count();
    inversions <= 1 && v[v.len() - 1] < v[0]
}

fn reference_values(signal: &Signal, g: u32) -> Vec<C64> {
    let ys = grid_midpoints(g);
    match signal {
        Signal::Pc(a) => ys.iter().map(|&y| a.function().value_at(y)).collect(),
        Signal::Trig(p) => ys.iter().map(|&y| p.eval(y)).collect(),
    }
}

fn error_point(n: usize, err: &[C64], eps: &[f64]) -> ConvergencePoint {
    let cell = TAU / err.len() as f64;
    ConvergencePoint {
        n,
        sup: err.iter().map(|z| z.norm()).fold(0.0, f64::max),
        l1: err.iter().map(|z| z.norm()).sum::<f64>() * cell,
        exceedance: eps
            .iter()
            .map(|&e| (e, err.iter().filter(|z| z.norm() > e).count() as f64 * cell))
            .collect(),
    }
}

pub fn convergence_experiment(
    label: &str,
    signal: &Signal,
    seq: &IndexSequence,
    n_list: &[usize],
    mode: ConvergenceMode,
    g: u32,
    eps: &[f64],
) -> Result<ConvergenceCurve> {
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::arg("N_list", "must increase strictly"));
    }
    let reference = reference_values(signal, g);
    let mut points = Vec::new();
    for &n in n_list {
        let values = match mode {
            ConvergenceMode::SvAverage => apply_grid(signal, &crate::operators::t_multiplier(seq, n)?, g)?,
            ConvergenceMode::FullAverage => {
                let parts: Vec<Multiplier> = (1..=n)
                    .map(|j| seq.order(j).map(Multiplier::partial_sum))
                    .collect::<Result<_>>()?;
                let avg = apply_grid(signal, &Multiplier::average(&parts)?, g)?;
                avg.iter().zip(&reference).map(|(a, r)| a - r).collect()
            }
        };
        points.push(error_point(n, &values, eps));
    }
    Ok(ConvergenceCurve {
        label: label.into(),
        grid_level: g,
        points,
    })
}

/// `V_{n_j} f - f` for each `j` in `j_list`.
pub fn check_vp_convergence(
    label: &str,
    signal: &Signal,
    seq: &IndexSequence,
    j_list: &[usize],
    g: u32,
    eps: &[f64],
) -> Result<ConvergenceCurve> {
    let reference = reference_values(signal, g);
    let mut points = Vec::new();
    for &j in j_list {
        let v = apply_grid(signal, &Multiplier::vallee_poussin(seq.order(j)?)?, g)?;
        let err: Vec<C64> = v.iter().zip(&reference).map(|(a, r)| a - r).collect();
        points.push(error_point(j, &err, eps));
    }
    Ok(ConvergenceCurve {
        label: label.into(),
        grid_level: g,
        points,
    })
}

// ------------------------------------------------------------- summaries

/// Largest ratio among reports with the given id.
pub fn max_ratio<'a>(reports: impl IntoIterator<Item = &'a BoundRatioReport>, lemma_id: &str) -> f64 {
    reports
        .into_iter()
        .filter(|r| r.lemma_id == lemma_id)
        .map(|r| r.ratio)
        .fold(0.0, f64::max)
}

/// `max(a, b) / min(a, b)`, with `1` when both vanish.
pub fn spread(a: f64, b: f64) -> f64 {
    if a == 0.0 && b == 0.0 {
        1.0
    } else {
        a.max(b) / a.min(b)
    }
}

/// Strictly increasing and more than doubled from first to last.
pub fn blows_up(values: &[f64]) -> bool {
    values.len() >= 2
        && values.windows(2).all(|w| w[1] > w[0])
        && values[values.len() - 1] > 2.0 * values[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::sequences::make_lacunary;

    fn item(name: &str) -> CorpusItem {
        Corpus::named("default", 1)
            .unwrap()
            .items
            .into_iter()
            .find(|i| i.name == name)
            .unwrap()
    }

    #[test]
    fn kernel_report_passes() {
        assert!(check_kernel_identities(16, 256).passes());
    }

    #[test]
    fn empty_family_gives_zero_lhs() {
        // lambda above the sup norm selects nothing.
        let it = item("random_signs");
        let lambda = 1.5;
        let r = check_damped_on_gamma_f_eps(Quantity::Hilbert, &it, lambda, 7, 9, 40, 4, 8).unwrap();
        assert_eq!(r.lhs, 0.0);
        let seq = make_lacunary(2.0, 10, 4).unwrap();
        let r = check_on_shell(Quantity::SvDifference, &it, lambda, 7, &seq, &[4], 8, LogBase::Natural).unwrap();
        assert_eq!(r[0].lhs, 0.0);
    }

    #[test]
    fn hypothesis_gates() {
        let it = item("spike");
        let lambda = lambda_for(&it.function, 2.0);
        assert!(check_damped_on_gamma_f_eps(Quantity::Hilbert, &it, lambda, 7, 7, 40, 4, 8).is_err());
        assert!(check_damped_on_gamma_f_eps(Quantity::Hilbert, &it, lambda, 5, 9, 40, 4, 8).is_err());
        assert!(check_damped_on_gamma_f_eps(Quantity::PartialSum, &it, lambda, 7, 9, 500, 4, 8).is_err());
        assert!(check_damped_on_gamma_f_eps(Quantity::SvDifference, &it, lambda, 7, 9, 300, 5, 8).is_err());
        let q2 = make_lacunary(2.0, 10, 6).unwrap();
        assert!(check_orthogonality_equality(&it, &q2, 4, 9, lambda, LogBase::Natural).is_err());
        let q3 = make_lacunary(3.0, 10, 6).unwrap();
        assert!(check_orthogonality_equality(&it, &q3, 4, 8, lambda, LogBase::Natural).is_err());
        assert!(check_on_shell(Quantity::Hilbert, &it, 0.1, 7, &q2, &[2], 8, LogBase::Natural).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        let it = item("two_spikes");
        let lambda = lambda_for(&it.function, 2.0);
        let q3 = make_lacunary(3.0, 10, 8).unwrap();
        let one = check_orthogonality_equality(&it, &q3, 1, 9, lambda, LogBase::Natural).unwrap();
        assert!(one.passes(), "{one:?}");
        let six = check_orthogonality_equality(&it, &q3, 6, 9, lambda, LogBase::Natural).unwrap();
        assert!(six.passes(), "{six:?}");
        assert!(six.sum_of_norms > 0.0);
    }

    #[test]
    fn convolution_matches_direct() {
        let a: Vec<C64> = (0..7).map(|k| C64::new(k as f64, 1.0)).collect();
        let b: Vec<C64> = (0..4).map(|k| C64::new(1.0, -(k as f64))).collect();
        let c = convolve(&a, &b);
        for (k, z) in c.iter().enumerate() {
            let mut want = C64::new(0.0, 0.0);
            for i in 0..a.len() {
                if k >= i && k - i < b.len() {
                    want += a[i] * b[k - i];
                }
            }
            assert!((z - want).norm() < 1e-12);
        }
    }

    #[test]
    fn band_limited_sv_average_vanishes() {
        let seq = make_lacunary(2.0, 10, 8).unwrap();
        let p = crate::circle::TrigPoly::from_terms(&[(9, C64::new(1.0, 0.5)), (-3, C64::new(2.0, 0.0))]);
        let c = convergence_experiment("trig", &Signal::Trig(p), &seq, &[1, 4, 8], ConvergenceMode::SvAverage, 8, &[1e-3])
            .unwrap();
        assert!(c.points.iter().all(|p| p.sup == 0.0));
    }

    #[test]
    fn full_average_of_constant_is_exact() {
        let seq = IndexSequence::explicit((1..=12).map(|j| 1u128 << j).collect()).unwrap();
        let one = Signal::pc(PcFunction::constant(3, C64::new(1.0, 0.0)).unwrap());
        let c = convergence_experiment("one", &one, &seq, &[4, 8], ConvergenceMode::FullAverage, 8, &[1e-9]).unwrap();
        assert!(c.points.iter().all(|p| p.sup < 1e-12));
    }

    #[test]
    fn replacement_vanishes_for_large_lambda() {
        let it = item("random_signs");
        let seq = crate::sequences::make_delta_growth(0.3, 10, 16).unwrap();
        let curve = check_replacement(&it, &seq, 9, 0.3, &[2.0, 4.0], 16, 8, LogBase::Natural).unwrap();
        assert_eq!(curve.measures, vec![0.0, 0.0]);
    }

    #[test]
    fn trend_helpers() {
        assert!(decreasing_with_one_inversion(&[4.0, 3.0, 3.5, 1.0]));
        assert!(!decreasing_with_one_inversion(&[4.0, 5.0, 3.5, 3.6]));
        assert!(blows_up(&[1.0, 1.5, 2.5]));
        assert!(!blows_up(&[1.0, 0.9, 2.5]));
        assert_eq!(spread(0.0, 0.0), 1.0);
        assert_eq!(spread(2.0, 1.0), 2.0);
    }
}
