//! Acceptance run: one PASS/FAIL line per criterion, with wall time against
//! its budget. Exits nonzero if any criterion fails or runs over budget.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use cesaro_lab::config::RunConfig;
use cesaro_lab::corpus::Corpus;
use cesaro_lab::lab;
use cesaro_lab::suites::{self, Context, ReplacementSummary, Stability};

type Outcome = Result<(bool, String), String>;

struct Tally {
    failed: usize,
}

impl Tally {
    fn check(&mut self, no: u32, title: &str, budget_s: u64, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let over = took > Duration::from_secs(budget_s);
        let (ok, detail) = match outcome {
            Ok((ok, d)) => (ok && !over, d),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            self.failed += 1;
        }
        let verdict = if ok { "PASS" } else { "FAIL" };
        let budget = if over { " OVER BUDGET" } else { "" };
        println!(
            "acceptance {no:02} {title}: {verdict} ({:.1}s of {budget_s}s{budget}) {detail}",
            took.as_secs_f64()
        );
    }
}

fn context() -> Context {
    Context::new(RunConfig {
        output_dir: std::env::temp_dir(),
        ..RunConfig::default()
    })
    .expect("default config is valid")
}

fn extended() -> Corpus {
    Corpus::named("extended", RunConfig::default().seed).expect("built-in corpus")
}

fn stability_of(report: &suites::SuiteReport) -> Result<Vec<Stability>, String> {
    serde_json::from_value(report.detail["stability"].clone()).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let mut t = Tally { failed: 0 };

    t.check(1, "kernel identities", 10, || {
        let r = lab::check_kernel_identities(64, 1024);
        Ok((
            r.passes(),
            format!(
                "defect={:.2e} min={:.2e} decay_ratio={:.6}",
                r.max_average_defect, r.min_value, r.max_decay_ratio
            ),
        ))
    });

    t.check(2, "decomposition invariants", 30, || {
        let corpus = extended();
        let factors = RunConfig::default().lambda_values;
        let mut bad = Vec::new();
        let mut rows = 0;
        for it in &corpus.items {
            for row in lab::check_cz(it, &factors).map_err(|e| e.to_string())? {
                rows += 1;
                if !row.passes() {
                    bad.push(format!("{}@{}", row.corpus_item, row.lambda_factor));
                }
            }
        }
        Ok((corpus.len() == 24 && factors.len() == 6 && bad.is_empty(), format!("rows={rows} failing={bad:?}")))
    });

    t.check(3, "overlap combinatorics", 30, || {
        let rows = lab::check_overlap(RunConfig::default().seed, 100, &[7, 9, 11]).map_err(|e| e.to_string())?;
        let worst = rows.iter().map(|r| r.ratio / r.bound).fold(0.0, f64::max);
        Ok((rows.iter().all(|r| r.passes()), format!("rows={} worst_ratio/bound={worst:.4}", rows.len())))
    });

    t.check(4, "domination", 60, || {
        let corpus = extended();
        let mut worst = f64::NEG_INFINITY;
        for it in corpus.items.iter().take(20) {
            for r in lab::check_domination(it, &[8, 32, 128], 6).map_err(|e| e.to_string())? {
                worst = worst.max(r.max_excess);
            }
        }
        Ok((worst <= 1e-9, format!("max excess={worst:.3e}")))
    });

    // Equality and windows come from the same run.
    let mut ortho = None;
    t.check(5, "orthogonality equality", 120, || {
        let ctx = context();
        let rep = suites::orthogonality(&ctx).map_err(|e| e.to_string())?;
        let defects: Vec<f64> = rep.rows.iter().filter(|r| r.lemma_id == "orthogonality_defect").map(|r| r.lhs).collect();
        let worst = defects.iter().copied().fold(0.0, f64::max);
        let reports = rep.detail["reports"].as_array().cloned().unwrap_or_default();
        let disjoint = reports.iter().all(|r| r["report"]["disjoint_ok"] == true);
        let ok = !defects.is_empty() && worst <= 1e-8 && disjoint;
        let detail = format!("checks={} worst_defect={worst:.2e} disjoint={disjoint}", defects.len());
        ortho = Some(reports);
        Ok((ok, detail))
    });

    t.check(6, "spectral windows", 1, || {
        let reports = ortho.take().ok_or("orthogonality run did not complete")?;
        let windows: usize = reports
            .iter()
            .map(|r| r["report"]["windows"].as_array().map_or(0, |w| w.len()))
            .sum();
        let ok = !reports.is_empty() && reports.iter().all(|r| r["report"]["windows_ok"] == true);
        Ok((ok, format!("addends checked={windows}")))
    });

    t.check(7, "bounded-ratio stability", 600, || {
        let ctx = context();
        let wanted = [
            "damped_hilbert_on_gamma_f_eps",
            "damped_partial_sum_on_gamma_f_eps",
            "hilbert_on_shell",
            "partial_sum_on_shell",
            "sv_on_shell",
            "sv_off_gamma_f",
            "damped_sv_full_circle",
        ];
        let mut all = Vec::new();
        for rep in [suites::hilbert(&ctx), suites::lemmas34(&ctx), suites::lemmas5(&ctx)] {
            all.extend(stability_of(&rep.map_err(|e| e.to_string())?)?);
        }
        let mut ok = true;
        let mut parts = Vec::new();
        for id in wanted {
            match all.iter().find(|s| s.lemma_id == id) {
                Some(s) => {
                    ok &= s.stable();
                    parts.push(format!("{id}={:.3}/{:.3}", s.max_ratio_fine, s.spread));
                }
                None => {
                    ok = false;
                    parts.push(format!("{id}=missing"));
                }
            }
        }
        Ok((ok, format!("max/spread: {}", parts.join(" "))))
    });

    t.check(8, "replacement weak type", 300, || {
        let ctx = context();
        let rep = suites::replacement(&ctx).map_err(|e| e.to_string())?;
        let s: ReplacementSummary =
            serde_json::from_value(rep.detail["summary"].clone()).map_err(|e| e.to_string())?;
        let fine = rep.rows.iter().filter(|r| r.grid_level == ctx.config.grid_level);
        let below = fine.into_iter().all(|r| r.lhs <= s.fine_constant * r.rhs_without_constant * (1.0 + 1e-12));
        Ok((
            s.all_monotone && s.spread <= 2.0 && below && s.fine_constant.is_finite(),
            format!("c={:.4} c_coarse={:.4} spread={:.3} non_monotone={:?}", s.fine_constant, s.coarse_constant, s.spread, s.non_monotone_items),
        ))
    });

    t.check(9, "convergence evidence", 120, || {
        let rep = suites::convergence(&context()).map_err(|e| e.to_string())?;
        let measures: Vec<f64> = rep
            .rows
            .iter()
            .filter(|r| r.lemma_id == "full_average_error" && r.corpus_item == "indicator_half")
            .map(|r| r.lhs)
            .collect();
        Ok((
            rep.hard_failures.is_empty() && lab::decreasing_with_one_inversion(&measures),
            format!("measures={measures:.4?} failures={:?}", rep.hard_failures),
        ))
    });

    t.check(10, "local average of the bad part", 60, || {
        let corpus = extended();
        let cfg = RunConfig::default();
        let mut worst = 0.0f64;
        let mut points = 0;
        for it in &corpus.items {
            for &factor in &cfg.lambda_values {
                let lambda = lab::lambda_for(&it.function, factor);
                for r in lab::check_local_average_vanishing(it, lambda, cfg.gamma, &[8, 64, 512], cfg.grid_level)
                    .map_err(|e| e.to_string())?
                {
                    worst = worst.max(r.max_abs);
                    points += r.points_checked;
                }
            }
        }
        Ok((worst <= 1e-10, format!("points={points} max={worst:.2e}")))
    });

    println!("acceptance summary: {} of 10 criteria failed", t.failed);
    if t.failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
