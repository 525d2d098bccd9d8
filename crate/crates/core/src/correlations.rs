//! Counting zero-sum tuples of frequencies.
//!
//! All counts go through the representation function
//! `a(v) = #{(μ_1, μ_2) ∈ E² : μ_1 + μ_2 = v}`:
//! `|C(4)| = Σ_v a(v)²` and `|C(6)| = Σ_w t(w) t(−w)` with the triple count
//! `t(w) = Σ_μ a(w − μ)`.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::FrequencySet;
use crate::predict::alpha;
use crate::rational::{self, Rational};

/// Default cap on the number of distinct pair sums kept in memory.
pub const DEFAULT_TABLE_CAP: u64 = 50_000_000;

/// Dense slices above this many cells fall back to hashing.
const DENSE_SLICE_CAP: usize = 1 << 24;

/// Mixed-radix packing of integer vectors with `|v_k| ≤ span` into a `u128`.
///
/// The packing is affine in `v`, so `key(a + b) = key(a) + key(b) − offset`
/// holds whenever all three vectors are in range.
#[derive(Debug, Clone, Copy)]
pub struct KeyCodec {
    d: usize,
    span: i64,
    base: u128,
}

impl KeyCodec {
    pub fn new(d: usize, span: i64) -> Result<Self> {
        let base = (2 * span + 1) as u128;
        base.checked_pow(d as u32)
            .ok_or(Error::Overflow("vector key packing"))?;
        Ok(Self { d, span, base })
    }

    pub fn encode(&self, v: &[i64]) -> Option<u128> {
        let mut key = 0u128;
        for &c in v.iter().rev() {
            if c.abs() > self.span {
                return None;
            }
            key = key * self.base + (c + self.span) as u128;
        }
        Some(key)
    }

    pub fn decode(&self, mut key: u128) -> Vec<i64> {
        (0..self.d)
            .map(|_| {
                let c = (key % self.base) as i64 - self.span;
                key /= self.base;
                c
            })
            .collect()
    }
}

/// The representation function `a(v)` of a frequency set.
#[derive(Debug, Clone)]
pub struct PairSumTable {
    codec: KeyCodec,
    counts: HashMap<u128, u64>,
}

impl PairSumTable {
    pub fn get(&self, v: &[i64]) -> u64 {
        self.codec
            .encode(v)
            .and_then(|k| self.counts.get(&k).copied())
            .unwrap_or(0)
    }

    /// Number of `v` with `a(v) > 0`.
    pub fn support_len(&self) -> usize {
        self.counts.len()
    }

    /// `Σ_v a(v)`, which is `N²`.
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `Σ_v a(v)²`.
    pub fn energy(&self) -> Result<u64> {
        self.counts.values().try_fold(0u64, |acc, &a| {
            a.checked_mul(a)
                .and_then(|sq| acc.checked_add(sq))
                .ok_or(Error::Overflow("pair-sum energy"))
        })
    }

    /// `(v, a(v))` for every `v` in the support, sorted by `v`.
    pub fn entries(&self) -> Vec<(Vec<i64>, u64)> {
        let mut out: Vec<_> = self
            .counts
            .iter()
            .map(|(&k, &a)| (self.codec.decode(k), a))
            .collect();
        out.sort();
        out
    }
}

/// Builds `a(v)`; refuses if the support could exceed `entry_cap`.
pub fn pair_sum_table(set: &FrequencySet, entry_cap: u64) -> Result<PairSumTable> {
    let d = set.d();
    let n = set.n();
    let r = set.radius();
    let box_cells = ((4 * r + 1) as u64)
        .checked_pow(d as u32)
        .unwrap_or(u64::MAX);
    let estimate = box_cells.min((n as u64) * (n as u64));
    if estimate > entry_cap {
        return Err(Error::TableTooLarge {
            entries: estimate,
            cap: entry_cap,
        });
    }
    // span 3R so that lookups of -v-μ never alias.
    let codec = KeyCodec::new(d, 3 * r)?;
    let keys: Vec<u128> = set
        .points()
        .map(|p| codec.encode(p).expect("coordinates within radius"))
        .collect();
    let offset = codec.encode(&vec![0; d]).unwrap();

    let counts = (0..n)
        .into_par_iter()
        .fold(HashMap::new, |mut map: HashMap<u128, u64>, i| {
            for &kj in &keys {
                *map.entry(keys[i] + kj - offset).or_insert(0) += 1;
            }
            map
        })
        .reduce(HashMap::new, |mut a, b| {
            if a.len() < b.len() {
                return merge(b, a);
            }
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        });
    Ok(PairSumTable { codec, counts })
}

fn merge(mut into: HashMap<u128, u64>, from: HashMap<u128, u64>) -> HashMap<u128, u64> {
    for (k, v) in from {
        *into.entry(k).or_insert(0) += v;
    }
    into
}

/// `|C(4)|`, the number of ordered quadruples in `E⁴` summing to zero.
///
/// Evaluates `Σ_v a(v)²` one slice `v_1 = s` at a time so that only a
/// `(4R+1)^{d-1}` buffer is live.
pub fn count_c4(set: &FrequencySet) -> Result<u64> {
    let d = set.d();
    let r = set.radius();
    let base = 4 * r + 1;

    // Points are sorted, so each first-coordinate value is a contiguous run.
    let mut groups: Vec<std::ops::Range<usize>> = vec![0..0; (2 * r + 1) as usize];
    let mut start = 0;
    for i in 1..=set.n() {
        if i == set.n() || set.point(i)[0] != set.point(start)[0] {
            groups[(set.point(start)[0] + r) as usize] = start..i;
            start = i;
        }
    }

    let cells = (base as u128).checked_pow(d as u32 - 1).unwrap_or(u128::MAX);
    let dense = cells <= DENSE_SLICE_CAP as u128;
    let mut stride = 1i64;
    let mut lin = vec![0i64; set.n()];
    let mut offset = 0i64;
    for k in 1..d {
        for (i, l) in lin.iter_mut().enumerate() {
            *l += set.point(i)[k] * stride;
        }
        offset += 2 * r * stride;
        stride = stride.saturating_mul(base);
    }

    let slice_energy = |buf: &mut SliceBuffer, s: i64| -> Result<u64> {
        for c1 in (s - r).max(-r)..=(s + r).min(r) {
            let g1 = groups[(c1 + r) as usize].clone();
            let g2 = groups[(s - c1 + r) as usize].clone();
            for i in g1 {
                let li = lin[i] + offset;
                for j in g2.clone() {
                    buf.bump((li + lin[j]) as usize);
                }
            }
        }
        buf.drain_energy()
    };

    let parts: Vec<Result<u64>> = (-2 * r..=2 * r)
        .into_par_iter()
        .map_init(
            || SliceBuffer::new(dense, cells as usize),
            |buf, s| slice_energy(buf, s),
        )
        .collect();
    parts.into_iter().try_fold(0u64, |acc, p| {
        acc.checked_add(p?).ok_or(Error::Overflow("|C(4)|"))
    })
}

enum SliceBuffer {
    Dense { counts: Vec<u32>, touched: Vec<usize> },
    Sparse(HashMap<usize, u64>),
}

impl SliceBuffer {
    fn new(dense: bool, cells: usize) -> Self {
        if dense {
            SliceBuffer::Dense {
                counts: vec![0; cells],
                touched: Vec::new(),
            }
        } else {
            SliceBuffer::Sparse(HashMap::new())
        }
    }

    fn bump(&mut self, idx: usize) {
        match self {
            SliceBuffer::Dense { counts, touched } => {
                if counts[idx] == 0 {
                    touched.push(idx);
                }
                counts[idx] += 1;
            }
            SliceBuffer::Sparse(map) => *map.entry(idx).or_insert(0) += 1,
        }
    }

    fn drain_energy(&mut self) -> Result<u64> {
        let sq = |a: u64| a.checked_mul(a).ok_or(Error::Overflow("|C(4)|"));
        let mut total = 0u64;
        match self {
            SliceBuffer::Dense { counts, touched } => {
                for idx in touched.drain(..) {
                    total = total
                        .checked_add(sq(u64::from(counts[idx]))?)
                        .ok_or(Error::Overflow("|C(4)|"))?;
                    counts[idx] = 0;
                }
            }
            SliceBuffer::Sparse(map) => {
                for (_, a) in map.drain() {
                    total = total.checked_add(sq(a)?).ok_or(Error::Overflow("|C(4)|"))?;
                }
            }
        }
        Ok(total)
    }
}

/// Sizes of the degenerate classes of `C(4)` and of `X(4)`.
///
/// Each tuple is assigned to one class: `D″` first (all entries in one
/// antipodal pair `{μ, −μ}`), then `D′` (cancels in pairs), else `X(4)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct C4Decomposition {
    pub d_sym: u64,
    pub d_diag: u64,
    pub x4: u64,
}

/// Splits `|C(4)|` by inclusion–exclusion over the three pairings.
///
/// Each pairing contributes `N²` tuples, any two pairings share the `N`
/// tuples `(μ, −μ, −μ, μ)` up to order, and no tuple satisfies all three.
/// `D″` has `C(4,2) = 6` arrangements per antipodal pair.
pub fn decompose_c4(set: &FrequencySet) -> Result<C4Decomposition> {
    decompose_from_count(set.n() as u64, count_c4(set)?)
}

pub(crate) fn decompose_from_count(n: u64, c4: u64) -> Result<C4Decomposition> {
    let degenerate = 3 * n * n - 3 * n;
    let d_diag = 3 * n;
    let x4 = c4.checked_sub(degenerate).ok_or_else(|| {
        Error::Mismatch(format!("|C(4)| = {c4} below the degenerate count {degenerate}"))
    })?;
    Ok(C4Decomposition {
        d_sym: degenerate - d_diag,
        d_diag,
        x4,
    })
}

/// Work estimate `N · |support(a)|` for the order-6 convolution.
pub fn c6_work(set: &FrequencySet, table: &PairSumTable) -> u64 {
    set.n() as u64 * table.support_len() as u64
}

/// `|C(6)|`, refusing when `N · |support(a)|` exceeds `budget`.
pub fn count_c6(set: &FrequencySet, budget: u64) -> Result<u64> {
    let table = pair_sum_table(set, DEFAULT_TABLE_CAP)?;
    count_c6_with(set, &table, budget)
}

pub fn count_c6_with(set: &FrequencySet, table: &PairSumTable, budget: u64) -> Result<u64> {
    let work = c6_work(set, table);
    if work > budget {
        return Err(Error::BudgetExceeded {
            needed: work,
            budget,
        });
    }
    let codec = table.codec;
    let offset = codec.encode(&vec![0; set.d()]).unwrap();
    let point_keys: Vec<u128> = set.points().map(|p| codec.encode(p).unwrap()).collect();
    let entries: Vec<(u128, u64)> = table.counts.iter().map(|(&k, &a)| (k, a)).collect();
    // |v + μ| ≤ 3R stays inside the codec range
    let triples = entries
        .par_iter()
        .fold(HashMap::new, |mut t: HashMap<u128, u64>, &(kv, av)| {
            for &km in &point_keys {
                *t.entry(kv + km - offset).or_insert(0) += av;
            }
            t
        })
        .reduce(HashMap::new, |a, b| {
            if a.len() < b.len() {
                merge(b, a)
            } else {
                merge(a, b)
            }
        });
    triples.iter().try_fold(0u64, |acc, (&kw, &tw)| {
        let neg = triples.get(&(2 * offset - kw)).copied().unwrap_or(0);
        tw.checked_mul(neg)
            .and_then(|p| acc.checked_add(p))
            .ok_or(Error::Overflow("|C(6)|"))
    })
}

/// Why `|C(6)|` is absent from a census.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum C6Status {
    Computed,
    NotRequested,
    BudgetExceeded,
}

/// Exact correlation counts and moments `R(ℓ) = |C(ℓ)|/N^ℓ` for one set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCensus {
    pub d: usize,
    pub m: u64,
    pub n: u64,
    pub c4: u64,
    pub d_sym: u64,
    pub d_diag: u64,
    pub x4: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c6: Option<u64>,
    #[serde(serialize_with = "rational::serialize")]
    pub r4: Rational,
    #[serde(
        skip_serializing_if = "Option::is_none",
        serialize_with = "rational::serialize_opt"
    )]
    pub r6: Option<Rational>,
    #[serde(skip)]
    pub c6_status: C6Status,
}

impl CorrelationCensus {
    /// `c2 = |C(2)| = N`.
    pub fn c2(&self) -> u64 {
        self.n
    }
}

/// Counts `C(4)` and its classes; counts `C(6)` when a budget is given and suffices.
pub fn census(set: &FrequencySet, c6_budget: Option<u64>) -> Result<CorrelationCensus> {
    let n = set.n() as u64;
    let c4 = count_c4(set)?;
    let parts = decompose_from_count(n, c4)?;
    let (c6, c6_status) = match c6_budget {
        None => (None, C6Status::NotRequested),
        Some(budget) => match count_c6(set, budget) {
            Ok(c6) => (Some(c6), C6Status::Computed),
            Err(Error::BudgetExceeded { .. }) | Err(Error::TableTooLarge { .. }) => {
                (None, C6Status::BudgetExceeded)
            }
            Err(e) => return Err(e),
        },
    };
    let n128 = i128::from(n);
    let r4 = rational::ratio(i128::from(c4), rational::checked_pow(n128, 4)?)?;
    let r6 = match c6 {
        Some(c6) => Some(rational::ratio(
            i128::from(c6),
            rational::checked_pow(n128, 6)?,
        )?),
        None => None,
    };
    Ok(CorrelationCensus {
        d: set.d(),
        m: set.m(),
        n,
        c4,
        d_sym: parts.d_sym,
        d_diag: parts.d_diag,
        x4: parts.x4,
        c6,
        r4,
        r6,
        c6_status,
    })
}

/// Least-squares fit of `log|C(4)|` against `log N` next to the exponent `3 − α(d)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaFit {
    pub d: usize,
    pub alpha: f64,
    pub reference_exponent: f64,
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<AlphaPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaPoint {
    pub m: u64,
    pub n: u64,
    pub c4: u64,
    /// `|C(4)| / N^{3−α(d)}`
    pub ratio: f64,
    /// Fit residual in `log|C(4)|`.
    pub residual: f64,
}

pub fn check_alpha_bound(censuses: &[CorrelationCensus], d: usize) -> Result<AlphaFit> {
    const MIN_POINTS: usize = 5;
    let a = alpha(d).ok_or(Error::InvalidDimension { d, min: 4 })?;
    if let Some(c) = censuses.iter().find(|c| c.d != d) {
        return Err(Error::Mismatch(format!(
            "census at d = {} in a fit for d = {d}",
            c.d
        )));
    }
    let mut ms: Vec<u64> = censuses.iter().map(|c| c.m).collect();
    ms.sort_unstable();
    ms.dedup();
    if ms.len() < MIN_POINTS {
        return Err(Error::InsufficientData {
            needed: MIN_POINTS,
            got: ms.len(),
        });
    }
    if ms.len() != censuses.len() {
        return Err(Error::Mismatch("repeated m in alpha fit".into()));
    }

    let xs: Vec<f64> = censuses.iter().map(|c| (c.n as f64).ln()).collect();
    let ys: Vec<f64> = censuses.iter().map(|c| (c.c4 as f64).ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Mismatch("all censuses share one N".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let exponent = 3.0 - a;
    let points = censuses
        .iter()
        .zip(xs.iter().zip(&ys))
        .map(|(c, (x, y))| AlphaPoint {
            m: c.m,
            n: c.n,
            c4: c.c4,
            ratio: c.c4 as f64 / (c.n as f64).powf(exponent),
            residual: y - (intercept + slope * x),
        })
        .collect();
    Ok(AlphaFit {
        d,
        alpha: a,
        reference_exponent: exponent,
        slope,
        intercept,
        points,
    })
}
