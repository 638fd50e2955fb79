//! Fixed, seeded families of piecewise-constant test functions.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circle::{lp_norm, Norm, PcFunction, C64, TAU};
use crate::error::{Error, Result};

/// Finest level used by the built-in corpora; evaluation grids of level 9
/// and above then never split a cell of a selected interval.
pub const CORPUS_MAX_LEVEL: u32 = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusItem {
    pub name: String,
    pub function: PcFunction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub items: Vec<CorpusItem>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemSummary {
    pub name: String,
    pub level: u32,
    pub l1: f64,
    pub sup: f64,
    pub jumps: usize,
    pub real: bool,
}

impl Corpus {
    pub const NAMES: [&'static str; 2] = ["default", "extended"];

    pub fn named(name: &str, seed: u64) -> Result<Self> {
        let items = match name {
            "default" => default_items(seed),
            "extended" => extended_items(seed),
            other => {
                return Err(Error::arg(
                    "corpus",
                    format!("unknown corpus {other:?}; expected one of {:?} or a file path", Self::NAMES),
                ))
            }
        };
        Ok(Corpus {
            name: name.into(),
            items,
        })
    }

    /// A built-in name, or else a JSON file written by [`Corpus::save`].
    pub fn resolve(spec: &str, seed: u64) -> Result<Self> {
        if Self::NAMES.contains(&spec) {
            return Self::named(spec, seed);
        }
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        Self::named(spec, seed)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let corpus: Corpus = serde_json::from_str(&text)?;
        if corpus.items.is_empty() {
            return Err(Error::arg("corpus", "file holds no items"));
        }
        Ok(corpus)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn summaries(&self) -> Vec<ItemSummary> {
        self.items
            .iter()
            .map(|it| ItemSummary {
                name: it.name.clone(),
                level: it.function.level(),
                l1: lp_norm(&it.function, Norm::L1),
                sup: lp_norm(&it.function, Norm::Inf),
                jumps: it.function.jumps().len(),
                real: it.function.is_real(),
            })
            .collect()
    }
}

fn item(name: impl Into<String>, function: PcFunction) -> CorpusItem {
    CorpusItem {
        name: name.into(),
        function,
    }
}

fn real(level: u32, values: Vec<f64>) -> PcFunction {
    PcFunction::from_real(level, &values).expect("corpus values are finite and sized")
}

/// Cell averages of `|x|^{-1/2}`, computed from its primitive.
pub fn inverse_sqrt_profile(level: u32) -> PcFunction {
    let cells = 1usize << level;
    let h = TAU / cells as f64;
    let prim = |x: f64| 2.0 * x.abs().sqrt() * x.signum();
    let values = (0..cells)
        .map(|j| {
            // Centered so the cell edge at 0 is exact.
            let a = (j as f64 - (cells / 2) as f64) * h;
            let b = a + h;
            (prim(b) - prim(a)).abs() / h
        })
        .collect();
    real(level, values)
}

fn spike(level: u32, index: usize, height: f64) -> PcFunction {
    let mut v = vec![0.0; 1 << level];
    v[index] = height;
    real(level, v)
}

fn mean_zero_blocks(level: u32, block: usize, rng: &mut ChaCha8Rng) -> PcFunction {
    let cells = 1usize << level;
    let mut v = vec![0.0; cells];
    for chunk in v.chunks_mut(block) {
        if rng.gen_bool(0.35) {
            let a: f64 = rng.gen_range(1.0..6.0);
            let half = chunk.len() / 2;
            chunk[..half].iter_mut().for_each(|x| *x = a);
            chunk[half..].iter_mut().for_each(|x| *x = -a);
        }
    }
    real(level, v)
}

fn random_signs(level: u32, rng: &mut ChaCha8Rng) -> PcFunction {
    real(level, (0..1 << level).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect())
}

fn sparse_complex(level: u32, density: f64, rng: &mut ChaCha8Rng) -> PcFunction {
    let values = (0..1usize << level)
        .map(|_| {
            if rng.gen_bool(density) {
                C64::new(rng.gen_range(-8.0..8.0), rng.gen_range(-8.0..8.0))
            } else {
                C64::new(0.0, 0.0)
            }
        })
        .collect();
    PcFunction::new(level, values).expect("sized")
}

fn default_items(seed: u64) -> Vec<CorpusItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two_spikes = {
        let mut v = vec![0.0; 256];
        v[37] = 48.0;
        v[200] = -20.0;
        v[201] = -20.0;
        real(8, v)
    };
    vec![
        item("indicator_half", PcFunction::indicator(1, 0.0, PI).expect("dyadic")),
        item("indicator_narrow", PcFunction::indicator(5, 0.0, PI / 16.0).expect("dyadic")),
        item("spike", spike(8, 100, 64.0)),
        item("two_spikes", two_spikes),
        item("mean_zero_blocks", mean_zero_blocks(6, 4, &mut rng)),
        item("random_signs", random_signs(8, &mut rng)),
        item("inverse_sqrt", inverse_sqrt_profile(8)),
        item("sparse_complex", sparse_complex(7, 0.08, &mut rng)),
    ]
}

fn extended_items(seed: u64) -> Vec<CorpusItem> {
    let mut items = default_items(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    for k in 0..4u32 {
        let level = 3 + 2 * (k % 3);
        let lo = rng.gen_range(0..(1u64 << level)) as f64;
        let w = TAU / (1u64 << level) as f64;
        let a = -PI + lo * w;
        let f = PcFunction::indicator(level, a, a + w).expect("dyadic");
        items.push(item(format!("cell_indicator_{k}"), f.scale(C64::new(rng.gen_range(1.0..10.0), 0.0))));
    }
    for k in 0..4u32 {
        let level = 5 + k % 4;
        let idx = rng.gen_range(0..1usize << level);
        items.push(item(format!("spike_{k}"), spike(level, idx, rng.gen_range(-100.0..100.0))));
    }
    for k in 0..3u32 {
        items.push(item(format!("blocks_{k}"), mean_zero_blocks(7 + k % 2, 2 << k, &mut rng)));
    }
    for k in 0..2u32 {
        items.push(item(format!("signs_{k}"), random_signs(4 + 3 * k, &mut rng)));
    }
    items.push(item("sparse_complex_dense", sparse_complex(6, 0.3, &mut rng)));
    items.push(item(
        "modulated_inverse_sqrt",
        inverse_sqrt_profile(8).modulate_midpoints(17),
    ));
    let ramp: Vec<f64> = (0..64).map(|j| if j < 32 { j as f64 } else { 0.0 }).collect();
    items.push(item("half_ramp", real(6, ramp)));
    items
}
