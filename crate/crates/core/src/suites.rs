//! Suites: groups of lab checks run as independent parallel jobs, merged
//! in job order and written as JSON documents plus flat CSV tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::circle::{lp_norm, Norm, PcFunction, TrigPoly, C64, TAU};
use crate::config::RunConfig;
use crate::corpus::{Corpus, CorpusItem};
use crate::error::{Error, Result};
use crate::lab::{self, BoundRatioReport, ConvergenceMode, Quantity};
use crate::operators::Signal;
use crate::sequences::{make_delta_growth, make_lacunary, IndexSequence, SequenceKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Kernels,
    Cz,
    Sets,
    Hilbert,
    Lemmas34,
    Lemmas5,
    Orthogonality,
    Replacement,
    Convergence,
    All,
}

impl Suite {
    pub const EACH: [Suite; 9] = [
        Suite::Kernels,
        Suite::Cz,
        Suite::Sets,
        Suite::Hilbert,
        Suite::Lemmas34,
        Suite::Lemmas5,
        Suite::Orthogonality,
        Suite::Replacement,
        Suite::Convergence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kernels => "kernels",
            Suite::Cz => "cz",
            Suite::Sets => "sets",
            Suite::Hilbert => "hilbert",
            Suite::Lemmas34 => "lemmas34",
            Suite::Lemmas5 => "lemmas5",
            Suite::Orthogonality => "orthogonality",
            Suite::Replacement => "replacement",
            Suite::Convergence => "convergence",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::EACH
            .iter()
            .chain(&[Suite::All])
            .find(|x| x.name() == s)
            .copied()
            .ok_or_else(|| Error::arg("suite", format!("unknown suite {s:?}")))
    }
}

/// Output of one suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    /// Failed exact checks; any entry makes the run fail.
    pub hard_failures: Vec<String>,
    pub rows: Vec<BoundRatioReport>,
    pub detail: serde_json::Value,
}

/// Worst-case summary of one check across a corpus at two grid levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stability {
    pub lemma_id: String,
    pub fine_level: u32,
    pub coarse_level: u32,
    pub max_ratio_fine: f64,
    pub max_ratio_coarse: f64,
    pub spread: f64,
    /// `(N, max ratio at the fine level)`.
    pub by_n: Vec<(usize, f64)>,
    pub blows_up: bool,
}

impl Stability {
    pub fn stable(&self) -> bool {
        self.spread <= 2.0 && !self.blows_up && self.max_ratio_fine.is_finite()
    }
}

pub fn stability(rows: &[BoundRatioReport], fine: u32, coarse: u32) -> Vec<Stability> {
    let mut ids: Vec<&str> = rows.iter().map(|r| r.lemma_id.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            let at = |g: u32| {
                lab::max_ratio(rows.iter().filter(|r| r.grid_level == g), id)
            };
            let (max_fine, max_coarse) = (at(fine), at(coarse));
            let mut ns: Vec<usize> = rows
                .iter()
                .filter(|r| r.lemma_id == id)
                .filter_map(|r| r.param("N").and_then(|v| v.parse().ok()))
                .collect();
            ns.sort_unstable();
            ns.dedup();
            let by_n: Vec<(usize, f64)> = ns
                .iter()
                .map(|&n| {
                    let want = n.to_string();
                    let m = lab::max_ratio(
                        rows.iter().filter(|r| r.grid_level == fine && r.param("N") == Some(want.as_str())),
                        id,
                    );
                    (n, m)
                })
                .collect();
            let curve: Vec<f64> = by_n.iter().map(|x| x.1).collect();
            Stability {
                lemma_id: id.into(),
                fine_level: fine,
                coarse_level: coarse,
                max_ratio_fine: max_fine,
                max_ratio_coarse: max_coarse,
                spread: lab::spread(max_fine, max_coarse),
                by_n,
                blows_up: lab::blows_up(&curve),
            }
        })
        .collect()
}

/// Shared state of one run.
pub struct Context {
    pub config: RunConfig,
    pub corpus: Corpus,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let corpus = Corpus::resolve(&config.corpus, config.seed)?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::arg("workers", e.to_string()))?;
        Ok(Context { config, corpus, pool })
    }

    /// Parallel map with results in input order.
    fn map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
        self.pool.install(|| items.par_iter().map(f).collect())
    }

    fn try_map<T: Sync, R: Send>(&self, items: &[T], f: impl Fn(&T) -> Result<R> + Sync + Send) -> Result<Vec<R>> {
        self.map(items, f).into_iter().collect()
    }

    fn levels(&self) -> [u32; 2] {
        [self.config.grid_level, self.config.grid_level - 1]
    }

    /// `(item, lambda factor, grid level)` jobs.
    fn ratio_jobs(&self) -> Vec<(usize, f64, u32)> {
        let mut jobs = Vec::new();
        for g in self.levels() {
            for i in 0..self.corpus.len() {
                for &l in &self.config.lambda_values {
                    jobs.push((i, l, g));
                }
            }
        }
        jobs
    }

    /// Configured sequences, or `fallback` when none are configured.
    fn sequences(&self, fallback: impl FnOnce() -> Result<Vec<(String, IndexSequence)>>) -> Result<Vec<(String, IndexSequence)>> {
        if self.config.sequences.is_empty() {
            fallback()
        } else {
            self.config.built_sequences()
        }
    }

    /// The lacunary sequence (ratio at least 2) the ratio suites sweep over.
    fn sweep_sequence(&self) -> Result<(String, IndexSequence)> {
        let top = *self.config.n_sweep.last().expect("validated nonempty");
        let seqs = self.sequences(|| Ok(vec![("lacunary(q=2,n1=10)".into(), make_lacunary(2.0, 10, top)?)]))?;
        let (label, seq) = seqs
            .into_iter()
            .next()
            .ok_or_else(|| Error::arg("sequences", "no sequence configured"))?;
        if seq.len() < top {
            return Err(Error::arg("sequences", format!("{label} has {} terms, N_sweep needs {top}", seq.len())));
        }
        Ok((label, seq))
    }

    fn lambda(&self, item: &CorpusItem, factor: f64) -> f64 {
        lab::lambda_for(&item.function, factor)
    }
}

fn tag(mut rows: Vec<BoundRatioReport>, key: &str, value: impl ToString) -> Vec<BoundRatioReport> {
    for r in &mut rows {
        r.params.insert(key.into(), value.to_string());
    }
    rows
}

fn check_row(id: &str, item: &str, grid_level: u32, measured: f64, limit: f64) -> BoundRatioReport {
    let mut r = BoundRatioReport {
        lemma_id: id.into(),
        corpus_item: item.into(),
        grid_level,
        params: Default::default(),
        lhs: measured,
        rhs_without_constant: limit,
        ratio: 0.0,
    };
    r.ratio = if limit > 0.0 { measured / limit } else { 0.0 };
    r
}

// ------------------------------------------------------------------ suites

pub fn kernels(_: &Context) -> Result<SuiteReport> {
    let r = lab::check_kernel_identities(64, 1024);
    let mut hard = Vec::new();
    if !r.passes() {
        hard.push(format!("kernel identities: {r:?}"));
    }
    Ok(SuiteReport {
        suite: "kernels".into(),
        hard_failures: hard,
        rows: vec![
            check_row("kernel_average_defect", "-", 0, r.max_average_defect, 1e-10),
            check_row("kernel_decay_ratio", "-", 0, r.max_decay_ratio, 1.0 + 1e-9),
        ],
        detail: json!(r),
    })
}

pub fn cz(ctx: &Context) -> Result<SuiteReport> {
    let per_item = ctx.try_map(&ctx.corpus.items, |it| lab::check_cz(it, &ctx.config.lambda_values))?;
    let mut hard = Vec::new();
    let mut rows = Vec::new();
    for row in per_item.iter().flatten() {
        if !row.passes() {
            hard.push(format!("cz {} at factor {}: {:?}", row.corpus_item, row.lambda_factor, row.violations));
        }
        let mut r = check_row("cz_measure_bound", &row.corpus_item, 0, row.audit.measure_f, row.audit.f_l1 / row.audit.lambda);
        r.params.insert("lambda".into(), row.audit.lambda.to_string());
        rows.push(r);
    }
    Ok(SuiteReport {
        suite: "cz".into(),
        hard_failures: hard,
        rows,
        detail: json!({ "items": per_item.into_iter().flatten().collect::<Vec<_>>() }),
    })
}

pub fn sets(ctx: &Context) -> Result<SuiteReport> {
    let overlap = lab::check_overlap(ctx.config.seed, 100, &[7, 9, 11])?;
    let items: Vec<&CorpusItem> = ctx.corpus.items.iter().take(20).collect();
    let domination = ctx.try_map(&items, |it| lab::check_domination(it, &[8, 32, 128], 6))?;
    let mut hard = Vec::new();
    let mut rows = Vec::new();
    for o in &overlap {
        if !o.passes() {
            hard.push(format!("overlap family {} gamma {}: {o:?}", o.family, o.gamma));
        }
        let mut r = check_row("overlap_ratio", &format!("family_{}", o.family), 0, o.overlap, o.bound * o.measure_f);
        r.params.insert("gamma".into(), o.gamma.to_string());
        rows.push(r);
    }
    for d in domination.iter().flatten() {
        if d.max_excess > 1e-9 {
            hard.push(format!("domination {} l={}: excess {:e}", d.corpus_item, d.order, d.max_excess));
        }
        let mut r = check_row("domination_excess", &d.corpus_item, 6, d.max_excess, 1e-9);
        r.params.insert("l".into(), d.order.to_string());
        rows.push(r);
    }
    Ok(SuiteReport {
        suite: "sets".into(),
        hard_failures: hard,
        rows,
        detail: json!({ "overlap": overlap, "domination": domination.into_iter().flatten().collect::<Vec<_>>() }),
    })
}

pub fn hilbert(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let (label, seq) = ctx.sweep_sequence()?;
    let jobs = ctx.ratio_jobs();
    let per_job = ctx.try_map(&jobs, |&(i, factor, g)| {
        let it = &ctx.corpus.items[i];
        let lambda = ctx.lambda(it, factor);
        let mut rows = Vec::new();
        for &n_terms in &c.n_sweep {
            let n = seq.order(n_terms)?;
            let m = n / 10;
            for kind in [Quantity::Hilbert, Quantity::PartialSum, Quantity::SvDifference] {
                let r = lab::check_damped_on_gamma_f_eps(kind, it, lambda, c.gamma, c.beta, n, m, g)?;
                rows.extend(tag(vec![r], "N", n_terms));
            }
        }
        Ok(tag(rows, "sequence", &label))
    })?;
    let rows: Vec<BoundRatioReport> = per_job.into_iter().flatten().collect();
    let top = seq.order(*c.n_sweep.last().expect("nonempty"))?;
    let curves = ctx.try_map(&ctx.corpus.items, |it| {
        let l1 = lp_norm(&it.function, Norm::L1);
        let ts: Vec<f64> = c.lambda_values.iter().map(|f| f * l1 / TAU).collect();
        lab::hilbert_weak_type(it, top, &ts, c.grid_level)
    })?;
    let [fine, coarse] = ctx.levels();
    Ok(SuiteReport {
        suite: "hilbert".into(),
        hard_failures: Vec::new(),
        detail: json!({ "stability": stability(&rows, fine, coarse), "weak_type": curves }),
        rows,
    })
}

pub fn lemmas34(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let (label, seq) = ctx.sweep_sequence()?;
    let jobs = ctx.ratio_jobs();
    let per_job = ctx.try_map(&jobs, |&(i, factor, g)| {
        let it = &ctx.corpus.items[i];
        let lambda = ctx.lambda(it, factor);
        let mut rows = Vec::new();
        for kind in [Quantity::Hilbert, Quantity::PartialSum, Quantity::SvDifference] {
            rows.extend(lab::check_on_shell(kind, it, lambda, c.gamma, &seq, &c.n_sweep, g, c.log_base)?);
        }
        rows.extend(lab::check_damped_on_gamma_f(it, lambda, c.gamma, c.beta, &seq, &c.n_sweep, g, c.log_base)?);
        Ok(tag(rows, "sequence", &label))
    })?;
    let rows: Vec<BoundRatioReport> = per_job.into_iter().flatten().collect();
    let [fine, coarse] = ctx.levels();
    Ok(SuiteReport {
        suite: "lemmas34".into(),
        hard_failures: Vec::new(),
        detail: json!({ "stability": stability(&rows, fine, coarse) }),
        rows,
    })
}

pub fn lemmas5(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let (label, seq) = ctx.sweep_sequence()?;
    let jobs = ctx.ratio_jobs();
    let per_job = ctx.try_map(&jobs, |&(i, factor, g)| {
        let it = &ctx.corpus.items[i];
        let lambda = ctx.lambda(it, factor);
        let mut rows = Vec::new();
        for &n_terms in &c.n_sweep {
            let n = seq.order(n_terms)?;
            for kind in [Quantity::Hilbert, Quantity::PartialSum, Quantity::SvDifference] {
                rows.extend(tag(vec![lab::check_off_gamma_f(kind, it, lambda, c.gamma, n, g)?], "N", n_terms));
            }
        }
        rows.extend(lab::check_damped_full_circle(it, lambda, c.beta, &seq, &c.n_sweep, g, c.log_base)?);
        let vanish = if g == c.grid_level {
            lab::check_local_average_vanishing(it, lambda, c.gamma, &[8, 64, 512], g)?
        } else {
            Vec::new()
        };
        Ok((tag(rows, "sequence", &label), vanish))
    })?;
    let mut rows = Vec::new();
    let mut vanishing = Vec::new();
    let mut hard = Vec::new();
    for (r, v) in per_job {
        rows.extend(r);
        for x in v {
            if x.max_abs > 1e-10 {
                hard.push(format!("local average of the bad part at {} l={}: {:e}", x.corpus_item, x.order, x.max_abs));
            }
            let mut row = check_row("bad_part_local_average", &x.corpus_item, c.grid_level, x.max_abs, 1e-10);
            row.params.insert("l".into(), x.order.to_string());
            row.params.insert("lambda".into(), x.lambda.to_string());
            rows.push(row);
            vanishing.push(x);
        }
    }
    let [fine, coarse] = ctx.levels();
    let ratio_rows: Vec<BoundRatioReport> =
        rows.iter().filter(|r| r.lemma_id != "bad_part_local_average").cloned().collect();
    Ok(SuiteReport {
        suite: "lemmas5".into(),
        hard_failures: hard,
        detail: json!({ "stability": stability(&ratio_rows, fine, coarse), "vanishing": vanishing }),
        rows,
    })
}

/// Cap on the largest order the orthogonality check evaluates.
pub const ORTHOGONALITY_MAX_ORDER: u128 = 1 << 16;

pub fn orthogonality(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let seqs = ctx.sequences(|| {
        [2.6, 3.0, 4.0]
            .iter()
            .map(|&q| Ok((format!("lacunary(q={q},n1=10)"), make_lacunary(q, 10, 16)?)))
            .collect()
    })?;
    let mut jobs = Vec::new();
    for (label, seq) in &seqs {
        if let SequenceKind::Lacunary { q } = seq.kind() {
            if q <= 2.5 {
                return Err(Error::hypothesis("sequence", format!("{label}: lacunary ratio q = {q} must exceed 2.5")));
            }
        } else if seq.min_ratio() <= 2.5 {
            return Err(Error::hypothesis(
                "sequence",
                format!("{label}: successive ratios must exceed 2.5, smallest is {}", seq.min_ratio()),
            ));
        }
        let top = (1..=seq.len().min(16))
            .take_while(|&j| seq.term(j).map_or(false, |t| t <= ORTHOGONALITY_MAX_ORDER))
            .last()
            .ok_or_else(|| Error::arg("sequence", format!("{label}: first term exceeds 2^16")))?;
        let mut ns: Vec<usize> = c.n_sweep.iter().copied().filter(|&n| n < top).collect();
        ns.push(top);
        for i in 0..ctx.corpus.len() {
            for &n in &ns {
                jobs.push((label.clone(), seq.clone(), i, n));
            }
        }
    }
    let factor = c.lambda_values[0];
    let results = ctx.try_map(&jobs, |(label, seq, i, n)| {
        let it = &ctx.corpus.items[*i];
        let lambda = ctx.lambda(it, factor);
        let rep = lab::check_orthogonality_equality(it, seq, *n, c.beta, lambda, c.log_base)?;
        Ok((label.clone(), rep))
    })?;
    let mut rows = Vec::new();
    let mut hard = Vec::new();
    for (label, rep) in &results {
        let it = ctx.corpus.items.iter().find(|x| x.name == rep.corpus_item).expect("job item");
        if !rep.passes() {
            hard.push(format!(
                "orthogonality {} {label} N={}: defect {:e}, windows {}, disjoint {}",
                rep.corpus_item, rep.terms, rep.relative_defect, rep.windows_ok, rep.disjoint_ok
            ));
        }
        let l1 = lp_norm(&it.function, Norm::L1);
        let w = rep.terms as f64 * ((rep.terms + 1) as f64).ln().powi(5);
        let mut bound = BoundRatioReport {
            lemma_id: "orthogonal_sum_bound".into(),
            corpus_item: rep.corpus_item.clone(),
            grid_level: 0,
            params: Default::default(),
            lhs: rep.sum_of_norms,
            rhs_without_constant: w * l1 * rep.lambda,
            ratio: 0.0,
        };
        bound.ratio = if bound.rhs_without_constant > 0.0 { bound.lhs / bound.rhs_without_constant } else { 0.0 };
        let mut defect = check_row("orthogonality_defect", &rep.corpus_item, 0, rep.relative_defect, 1e-8);
        for r in [&mut bound, &mut defect] {
            r.params.insert("N".into(), rep.terms.to_string());
            r.params.insert("sequence".into(), label.clone());
            r.params.insert("lambda".into(), rep.lambda.to_string());
            r.params.insert("beta".into(), c.beta.to_string());
        }
        rows.push(bound);
        rows.push(defect);
    }
    Ok(SuiteReport {
        suite: "orthogonality".into(),
        hard_failures: hard,
        rows,
        detail: json!({ "reports": results.iter().map(|(l, r)| json!({"sequence": l, "report": r})).collect::<Vec<_>>() }),
    })
}

/// Replacement curves: fitted constant per grid level and per item.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReplacementSummary {
    pub fine_constant: f64,
    pub coarse_constant: f64,
    pub spread: f64,
    pub all_monotone: bool,
    pub non_monotone_items: Vec<String>,
}

pub const REPLACEMENT_N_MAX: usize = 64;

pub fn replacement(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let seqs = ctx.sequences(|| {
        Ok(vec![(
            format!("delta_growth(delta={},n1=10)", c.delta),
            make_delta_growth(c.delta, 10, REPLACEMENT_N_MAX)?,
        )])
    })?;
    let (label, seq) = seqs
        .into_iter()
        .find(|(_, s)| matches!(s.kind(), SequenceKind::DeltaGrowth { .. }))
        .ok_or_else(|| Error::arg("sequences", "the replacement check needs a delta_growth sequence"))?;
    let n_max = seq.len().min(REPLACEMENT_N_MAX);
    let factors: Vec<f64> = (0..8).map(|s| 1.5 * f64::powi(2.0, s)).collect();
    let mut jobs = Vec::new();
    for g in ctx.levels() {
        for i in 0..ctx.corpus.len() {
            jobs.push((i, g));
        }
    }
    let curves = ctx.try_map(&jobs, |&(i, g)| {
        let it = &ctx.corpus.items[i];
        let lambdas: Vec<f64> = factors.iter().map(|&f| ctx.lambda(it, f)).collect();
        lab::check_replacement(it, &seq, c.beta, c.delta, &lambdas, n_max, g, c.log_base)
    })?;
    let [fine, coarse] = ctx.levels();
    let fitted = |g: u32| {
        curves
            .iter()
            .filter(|cv| cv.grid_level == g)
            .map(|cv| cv.fitted_constant())
            .fold(0.0, f64::max)
    };
    let non_monotone: Vec<String> = curves
        .iter()
        .filter(|cv| !cv.is_monotone())
        .map(|cv| format!("{}@{}", cv.corpus_item, cv.grid_level))
        .collect();
    let summary = ReplacementSummary {
        fine_constant: fitted(fine),
        coarse_constant: fitted(coarse),
        spread: lab::spread(fitted(fine), fitted(coarse)),
        all_monotone: non_monotone.is_empty(),
        non_monotone_items: non_monotone,
    };
    let mut rows = Vec::new();
    for cv in &curves {
        for ((l, m), b) in cv.lambdas.iter().zip(&cv.measures).zip(&cv.bound_values) {
            let mut r = check_row("replacement_level_set", &cv.corpus_item, cv.grid_level, *m, *b);
            r.params.insert("lambda".into(), l.to_string());
            r.params.insert("delta".into(), c.delta.to_string());
            r.params.insert("N_max".into(), n_max.to_string());
            r.params.insert("sequence".into(), label.clone());
            rows.push(r);
        }
    }
    Ok(SuiteReport {
        suite: "replacement".into(),
        hard_failures: Vec::new(),
        rows,
        detail: json!({ "summary": summary, "curves": curves }),
    })
}

/// Level for the threshold checked on the indicator convergence curve.
pub const CONVERGENCE_EPS: f64 = 0.1;

pub fn convergence(ctx: &Context) -> Result<SuiteReport> {
    let c = &ctx.config;
    let g = c.grid_level;
    let dyadic = IndexSequence::explicit((1..=40).map(|j| 1u128 << j).collect())?;
    let eps = [0.3, CONVERGENCE_EPS, 0.03];
    let half = Signal::pc(PcFunction::indicator(1, 0.0, std::f64::consts::PI)?);
    let mut hard = Vec::new();

    let full = lab::convergence_experiment("indicator_half", &half, &dyadic, &c.n_sweep, ConvergenceMode::FullAverage, g, &eps)?;
    if !lab::decreasing_with_one_inversion(&full.measures(CONVERGENCE_EPS)) {
        hard.push(format!("full average of indicator_half: measures {:?}", full.measures(CONVERGENCE_EPS)));
    }
    let vp = lab::check_vp_convergence("indicator_half", &half, &dyadic, &[2, 3, 4, 5, 6], g, &eps)?;
    if !lab::decreasing_with_one_inversion(&vp.measures(CONVERGENCE_EPS)) {
        hard.push(format!("de la Vallee-Poussin means of indicator_half: measures {:?}", vp.measures(CONVERGENCE_EPS)));
    }

    // Degree below n_1 = 2: every addend of the sv average vanishes.
    let trig = Signal::Trig(TrigPoly::from_terms(&[
        (-1, C64::new(0.5, -1.0)),
        (0, C64::new(2.0, 0.0)),
        (1, C64::new(-0.25, 3.0)),
    ]));
    let band = lab::convergence_experiment("band_limited", &trig, &dyadic, &c.n_sweep, ConvergenceMode::SvAverage, g, &eps)?;
    if band.points.iter().any(|p| p.sup != 0.0) {
        hard.push("sv average of a band-limited signal is not identically zero".into());
    }

    let per_item = ctx.try_map(&ctx.corpus.items, |it| {
        lab::convergence_experiment(&it.name, &Signal::pc(it.function.clone()), &dyadic, &c.n_sweep, ConvergenceMode::SvAverage, g, &eps)
    })?;

    let mut rows = Vec::new();
    for (id, curve) in [("full_average_error", &full), ("vp_error", &vp), ("sv_average_size", &band)]
        .into_iter()
        .chain(per_item.iter().map(|cv| ("sv_average_size", cv)))
    {
        for p in &curve.points {
            let mut r = check_row(id, &curve.label, g, p.exceedance.iter().find(|e| e.0 == CONVERGENCE_EPS).map_or(0.0, |e| e.1), TAU);
            r.params.insert("N".into(), p.n.to_string());
            r.params.insert("eps".into(), CONVERGENCE_EPS.to_string());
            r.params.insert("sup".into(), p.sup.to_string());
            r.params.insert("l1".into(), p.l1.to_string());
            rows.push(r);
        }
    }
    Ok(SuiteReport {
        suite: "convergence".into(),
        hard_failures: hard,
        rows,
        detail: json!({ "full_average": full, "vp": vp, "band_limited": band, "sv_average": per_item }),
    })
}

pub fn run_suite(ctx: &Context, suite: Suite) -> Result<Vec<SuiteReport>> {
    let one = |s: Suite| -> Result<SuiteReport> {
        match s {
            Suite::Kernels => kernels(ctx),
            Suite::Cz => cz(ctx),
            Suite::Sets => sets(ctx),
            Suite::Hilbert => hilbert(ctx),
            Suite::Lemmas34 => lemmas34(ctx),
            Suite::Lemmas5 => lemmas5(ctx),
            Suite::Orthogonality => orthogonality(ctx),
            Suite::Replacement => replacement(ctx),
            Suite::Convergence => convergence(ctx),
            Suite::All => unreachable!(),
        }
    };
    match suite {
        Suite::All => Suite::EACH.iter().map(|&s| one(s)).collect(),
        s => Ok(vec![one(s)?]),
    }
}

/// Column order of every CSV table.
pub const CSV_HEADER: [&str; 7] = ["lemma_id", "corpus_item", "grid_level", "params", "lhs", "rhs", "ratio"];

pub fn write_csv(path: &Path, rows: &[BoundRatioReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.lemma_id.clone(),
            r.corpus_item.clone(),
            r.grid_level.to_string(),
            r.params_string(),
            r.lhs.to_string(),
            r.rhs_without_constant.to_string(),
            r.ratio.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub suites: Vec<String>,
    pub files: Vec<PathBuf>,
    pub hard_failures: Vec<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.hard_failures.is_empty()
    }
}

/// Runs `suite` and writes `<suite>.json`, `<suite>.csv` per suite plus
/// `summary.json` into the configured output directory.
pub fn run(config: RunConfig, suite: Suite) -> Result<RunOutcome> {
    let ctx = Context::new(config)?;
    let reports = run_suite(&ctx, suite)?;
    let dir = &ctx.config.output_dir;
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut hard = Vec::new();
    for rep in &reports {
        let json_path = dir.join(format!("{}.json", rep.suite));
        std::fs::write(&json_path, serde_json::to_string_pretty(rep)? + "\n")?;
        let csv_path = dir.join(format!("{}.csv", rep.suite));
        write_csv(&csv_path, &rep.rows)?;
        files.push(json_path);
        files.push(csv_path);
        hard.extend(rep.hard_failures.iter().map(|h| format!("{}: {h}", rep.suite)));
    }
    let outcome = RunOutcome {
        suites: reports.iter().map(|r| r.suite.clone()).collect(),
        files: files.clone(),
        hard_failures: hard,
    };
    let summary = dir.join("summary.json");
    // Placement and thread count do not affect results; leave them out so
    // identical runs produce identical summaries.
    let mut echoed = serde_json::to_value(&ctx.config)?;
    if let Some(m) = echoed.as_object_mut() {
        m.remove("output_dir");
        m.remove("workers");
    }
    let doc = json!({
        "config": echoed,
        "suites": outcome.suites,
        "files": files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect::<Vec<_>>(),
        "hard_failures": outcome.hard_failures,
    });
    std::fs::write(&summary, serde_json::to_string_pretty(&doc)? + "\n")?;
    let mut outcome = outcome;
    outcome.files.push(summary);
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        RunConfig {
            grid_level: 8,
            corpus: "default".into(),
            lambda_values: vec![2.0],
            n_sweep: vec![2, 4],
            workers: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::EACH.iter().chain(&[Suite::All]) {
            assert_eq!(s.name().parse::<Suite>().unwrap(), *s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn orthogonality_rejects_small_ratio() {
        let mut c = small();
        c.sequences = vec![crate::config::SequenceSpec::Lacunary { q: 2.0, n1: 10, count: 8 }];
        let ctx = Context::new(c).unwrap();
        let err = orthogonality(&ctx).unwrap_err().to_string();
        assert!(err.contains("2.5"), "{err}");
    }

    #[test]
    fn stability_summary() {
        let mk = |g: u32, n: usize, ratio: f64| BoundRatioReport {
            lemma_id: "x".into(),
            corpus_item: "a".into(),
            grid_level: g,
            params: [("N".to_string(), n.to_string())].into_iter().collect(),
            lhs: ratio,
            rhs_without_constant: 1.0,
            ratio,
        };
        let rows = vec![mk(9, 4, 1.0), mk(9, 8, 2.0), mk(8, 4, 1.5), mk(8, 8, 0.5)];
        let s = &stability(&rows, 9, 8)[0];
        assert_eq!(s.max_ratio_fine, 2.0);
        assert_eq!(s.max_ratio_coarse, 1.5);
        assert_eq!(s.by_n, vec![(4, 1.0), (8, 2.0)]);
        assert!(!s.blows_up);
        assert!(s.stable());
    }

    #[test]
    fn kernels_suite_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small();
        c.output_dir = dir.path().to_path_buf();
        let out = run(c, Suite::Kernels).unwrap();
        assert!(out.passed());
        assert_eq!(out.files.len(), 3);
        let text = std::fs::read_to_string(dir.path().join("kernels.csv")).unwrap();
        assert!(text.starts_with("lemma_id,corpus_item,grid_level,params,lhs,rhs,ratio\n"));
    }
}
