//! Index sequences `(n_j)` and the parameters derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Lacunary { q: f64 },
    DeltaGrowth { delta: f64 },
    Explicit,
}

/// Strictly increasing positive integers, 1-based in every accessor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SequenceRepr", into = "SequenceRepr")]
pub struct IndexSequence {
    kind: SequenceKind,
    terms: Vec<u128>,
}

#[derive(Serialize, Deserialize)]
struct SequenceRepr {
    kind: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    terms: Vec<u128>,
}

impl From<IndexSequence> for SequenceRepr {
    fn from(s: IndexSequence) -> Self {
        let mut params = BTreeMap::new();
        let kind = match s.kind {
            SequenceKind::Lacunary { q } => {
                params.insert("q".into(), q);
                "lacunary"
            }
            SequenceKind::DeltaGrowth { delta } => {
                params.insert("delta".into(), delta);
                "delta_growth"
            }
            SequenceKind::Explicit => "explicit",
        };
        SequenceRepr {
            kind: kind.into(),
            params,
            terms: s.terms,
        }
    }
}

impl TryFrom<SequenceRepr> for IndexSequence {
    type Error = Error;

    fn try_from(r: SequenceRepr) -> Result<Self> {
        let param = |name: &'static str| {
            r.params
                .get(name)
                .copied()
                .ok_or_else(|| Error::arg("params", format!("missing {name}")))
        };
        let kind = match r.kind.as_str() {
            "lacunary" => SequenceKind::Lacunary { q: param("q")? },
            "delta_growth" => SequenceKind::DeltaGrowth { delta: param("delta")? },
            "explicit" => SequenceKind::Explicit,
            other => return Err(Error::arg("kind", format!("unknown sequence kind {other:?}"))),
        };
        let seq = IndexSequence::explicit(r.terms)?;
        let seq = IndexSequence { kind, ..seq };
        if !seq.satisfies_growth() {
            return Err(Error::arg("terms", "terms violate the declared growth condition"));
        }
        Ok(seq)
    }
}

impl IndexSequence {
    pub fn explicit(terms: Vec<u128>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::arg("terms", "empty sequence"));
        }
        if terms[0] == 0 {
            return Err(Error::arg("terms", "terms must be positive"));
        }
        if terms.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("terms", "terms must increase strictly"));
        }
        Ok(IndexSequence {
            kind: SequenceKind::Explicit,
            terms,
        })
    }

    pub fn kind(&self) -> SequenceKind {
        self.kind
    }

    pub fn terms(&self) -> &[u128] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `n_j`, 1-based.
    pub fn term(&self, j: usize) -> Result<u128> {
        if j == 0 || j > self.terms.len() {
            return Err(Error::arg("j", format!("{j} outside 1..={}", self.terms.len())));
        }
        Ok(self.terms[j - 1])
    }

    /// `n_j` as an operator order.
    pub fn order(&self, j: usize) -> Result<u64> {
        let n = self.term(j)?;
        u64::try_from(n).map_err(|_| Error::arg("order", format!("n_{j} = {n} does not fit in 64 bits")))
    }

    /// First `count` terms.
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.terms.len() {
            return Err(Error::arg("count", format!("{count} outside 1..={}", self.terms.len())));
        }
        Ok(IndexSequence {
            kind: self.kind,
            terms: self.terms[..count].to_vec(),
        })
    }

    /// Smallest ratio `n_{j+1} / n_j`.
    pub fn min_ratio(&self) -> f64 {
        self.terms
            .windows(2)
            .map(|w| w[1] as f64 / w[0] as f64)
            .fold(f64::INFINITY, f64::min)
    }

    /// The growth condition of the declared kind holds term by term.
    pub fn satisfies_growth(&self) -> bool {
        match self.kind {
            SequenceKind::Lacunary { q } => self.terms.windows(2).all(|w| w[1] as f64 >= q * w[0] as f64),
            SequenceKind::DeltaGrowth { delta } => self
                .terms
                .windows(2)
                .enumerate()
                .all(|(i, w)| w[1] as f64 >= (1.0 + ((i + 1) as f64).powf(-delta)) * w[0] as f64),
            SequenceKind::Explicit => true,
        }
    }
}

fn grow(n: u128, factor: f64) -> Result<u128> {
    let next = (n as f64 * factor).ceil();
    if !next.is_finite() || next >= u128::MAX as f64 {
        return Err(Error::arg("count", "sequence overflows 128-bit terms"));
    }
    let mut next = (next as u128).max(n + 1);
    // Below 2^53 the float product is exact enough that this is a no-op;
    // above it, nudge up until the ratio survives rounding.
    while (next as f64) < factor * n as f64 {
        next += 1;
    }
    Ok(next)
}

/// `n_{j+1} = ceil(q n_j)`.
pub fn make_lacunary(q: f64, n1: u128, count: usize) -> Result<IndexSequence> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::hypothesis("lacunary", format!("ratio q = {q} must exceed 1")));
    }
    if n1 == 0 || count == 0 {
        return Err(Error::arg("n1/count", "n1 and count must be at least 1"));
    }
    let mut terms = vec![n1];
    for _ in 1..count {
        let last = *terms.last().expect("nonempty");
        terms.push(grow(last, q)?);
    }
    Ok(IndexSequence {
        kind: SequenceKind::Lacunary { q },
        terms,
    })
}

/// `n_{j+1} = ceil((1 + j^{-delta}) n_j)`.
pub fn make_delta_growth(delta: f64, n1: u128, count: usize) -> Result<IndexSequence> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::hypothesis("delta_growth", format!("delta = {delta} must lie in (0, 1/2)")));
    }
    if n1 == 0 || count == 0 {
        return Err(Error::arg("n1/count", "n1 and count must be at least 1"));
    }
    let mut terms = vec![n1];
    for j in 1..count {
        let last = *terms.last().expect("nonempty");
        terms.push(grow(last, 1.0 + (j as f64).powf(-delta))?);
    }
    Ok(IndexSequence {
        kind: SequenceKind::DeltaGrowth { delta },
        terms,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            LogBase::Natural => x.ln(),
            LogBase::Two => x.log2(),
        }
    }
}

/// `20 (j+1) log^2 (j+1)`, the product `n_j beta_j`.
pub fn scale_product(j: usize, base: LogBase) -> f64 {
    let t = (j + 1) as f64;
    let l = base.log(t);
    20.0 * t * l * l
}

/// `beta_j = 20 (j+1) log^2(j+1) / n_j`.
pub fn beta_param(seq: &IndexSequence, j: usize) -> Result<f64> {
    beta_param_with(seq, j, LogBase::Natural)
}

pub fn beta_param_with(seq: &IndexSequence, j: usize, base: LogBase) -> Result<f64> {
    let n = seq.term(j)? as f64;
    let product = scale_product(j, base);
    if product <= 16.0 {
        return Err(Error::Assert(format!("n_j beta_j = {product} must exceed 16 at j = {j}")));
    }
    Ok(product / n)
}

/// `m_j = floor(n_j / 10)`, rejected when zero.
pub fn m_param(seq: &IndexSequence, j: usize) -> Result<u64> {
    let m = seq.order(j)? / 10;
    if m == 0 {
        return Err(Error::hypothesis("m_j", format!("n_{j} < 10 gives m_j = 0")));
    }
    Ok(m)
}

/// Reindexing `i = (j-1) K0 + b`, `0 <= b < K0`, of `1..=N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCoords {
    pub n: usize,
    pub k: usize,
    pub k0: usize,
}

impl BlockCoords {
    /// `(j, b)` of the flat index `i`.
    pub fn coords(&self, i: usize) -> (usize, usize) {
        (i / self.k0 + 1, i % self.k0)
    }

    /// Flat index of `(j, b)`.
    pub fn index(&self, j: usize, b: usize) -> usize {
        (j - 1) * self.k0 + b
    }

    pub fn pairs(&self) -> Vec<(usize, usize)> {
        (1..=self.n).map(|i| self.coords(i)).collect()
    }
}

pub fn block_coords(n: usize, delta: f64) -> Result<BlockCoords> {
    if n == 0 {
        return Err(Error::arg("N", "must be at least 1"));
    }
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::hypothesis("block_coords", format!("delta = {delta} must lie in (0, 1/2)")));
    }
    let k = n.isqrt();
    let k0 = ((k as f64).powf(2.0 * delta).floor() as usize).max(1);
    Ok(BlockCoords { n, k, k0 })
}

#[derive(Clone, Debug, Serialize)]
pub struct BlockRatioRow {
    pub k: usize,
    pub k0: usize,
    /// Smallest `n_{a+K0} / n_a` over `a + K0 <= min((K+1)^2, len)`.
    pub min_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LacunarityAudit {
    pub delta: f64,
    pub n: usize,
    pub threshold: f64,
    pub rows: Vec<BlockRatioRow>,
    /// Smallest `K` from which every row clears the threshold.
    pub k_delta: Option<usize>,
    /// No `K <= sqrt(N)` clears the threshold, or `N < k_delta^2`.
    pub below_threshold: bool,
}

/// Scans the within-block ratios that make each block subsequence lacunary.
pub fn subsequence_lacunarity_audit(seq: &IndexSequence, delta: f64, n: usize) -> Result<LacunarityAudit> {
    if n == 0 || n > seq.len() {
        return Err(Error::arg("N", format!("{n} outside 1..={}", seq.len())));
    }
    let threshold = 2.6;
    let top = n.isqrt();
    let mut rows = Vec::with_capacity(top);
    for k in 1..=top {
        let k0 = block_coords(k * k, delta)?.k0;
        let last = ((k + 1) * (k + 1)).min(seq.len());
        let mut min_ratio = f64::INFINITY;
        for a in 1..=last.saturating_sub(k0) {
            let r = seq.terms[a + k0 - 1] as f64 / seq.terms[a - 1] as f64;
            min_ratio = min_ratio.min(r);
        }
        rows.push(BlockRatioRow { k, k0, min_ratio });
    }
    let mut k_delta = None;
    for row in rows.iter().rev() {
        if row.min_ratio >= threshold {
            k_delta = Some(row.k);
        } else {
            break;
        }
    }
    let below_threshold = match k_delta {
        None => true,
        Some(kd) => n < kd * kd,
    };
    Ok(LacunarityAudit {
        delta,
        n,
        threshold,
        rows,
        k_delta,
        below_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lacunary_examples() {
        assert_eq!(make_lacunary(2.0, 1, 5).unwrap().terms(), &[1, 2, 4, 8, 16]);
        assert_eq!(make_lacunary(2.5, 2, 3).unwrap().terms(), &[2, 5, 13]);
        assert!(make_lacunary(1.0, 1, 3).is_err());
        assert!(make_lacunary(0.5, 1, 3).is_err());
    }

    #[test]
    fn delta_growth_examples() {
        let s = make_delta_growth(0.4, 10, 3).unwrap();
        let third = (20.0 * (1.0 + 2f64.powf(-0.4))).ceil() as u128;
        assert_eq!(s.terms(), &[10, 20, third]);
        assert_eq!(make_delta_growth(0.3, 1, 2).unwrap().terms(), &[1, 2]);
        assert!(make_delta_growth(0.5, 1, 2).is_err());
        assert!(make_delta_growth(0.0, 1, 2).is_err());
    }

    #[test]
    fn beta_examples() {
        let s = make_lacunary(2.0, 10, 5).unwrap();
        let b1 = beta_param(&s, 1).unwrap();
        assert!((b1 * 10.0 - 40.0 * 2f64.ln().powi(2)).abs() < 1e-12);
        assert!((b1 * 10.0 - 19.2181).abs() < 1e-4);
        let b3 = beta_param(&s, 3).unwrap();
        assert!((b3 * 40.0 - 80.0 * 4f64.ln().powi(2)).abs() < 1e-10);
        assert!((b3 * 40.0 - 153.75).abs() < 0.01);
        assert!((beta_param_with(&s, 1, LogBase::Two).unwrap() * 10.0 - 40.0).abs() < 1e-12);
    }

    #[test]
    fn m_examples() {
        let s = IndexSequence::explicit(vec![5, 10, 99, 1000]).unwrap();
        assert!(m_param(&s, 1).is_err());
        assert_eq!(m_param(&s, 2).unwrap(), 1);
        assert_eq!(m_param(&s, 3).unwrap(), 9);
        assert_eq!(m_param(&s, 4).unwrap(), 100);
    }

    #[test]
    fn block_examples() {
        let b = block_coords(16, 0.25).unwrap();
        assert_eq!((b.k, b.k0), (4, 2));
        let one = block_coords(1, 0.3).unwrap();
        assert_eq!((one.k, one.k0), (1, 1));
        assert_eq!(one.coords(1), (2, 0));
        assert_eq!(b.coords(5), (3, 1));
        assert_eq!(b.index(3, 1), 5);
    }

    #[test]
    fn audit_examples() {
        let s = make_delta_growth(0.4, 1, 400).unwrap();
        let a = subsequence_lacunarity_audit(&s, 0.4, 400).unwrap();
        assert_eq!(a.rows.len(), 20);
        if let Some(kd) = a.k_delta {
            assert!(a.rows.iter().filter(|r| r.k >= kd).all(|r| r.min_ratio >= 2.6));
        }
        let l = make_lacunary(3.0, 1, 40).unwrap();
        let a = subsequence_lacunarity_audit(&l, 0.4, 36).unwrap();
        assert!(a.rows.iter().all(|r| r.min_ratio >= 3.0));
        assert_eq!(a.k_delta, Some(1));
        assert!(!a.below_threshold);
    }

    #[test]
    fn json_shape() {
        let s = make_lacunary(2.0, 1, 3).unwrap();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["kind"], "lacunary");
        assert_eq!(v["params"]["q"], 2.0);
        assert_eq!(v["terms"], serde_json::json!([1, 2, 4]));
        let back: IndexSequence = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"kind": "lacunary", "params": {"q": 3.0}, "terms": [1, 2]});
        assert!(serde_json::from_value::<IndexSequence>(bad).is_err());
    }
}
