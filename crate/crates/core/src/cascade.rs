//! The cascade calculus: symbolic cascade trees, the H^T coefficient
//! recursion with its diagonal identity, one-sided series thresholds, and the
//! two-sided Young-inequality threshold.

use crate::error::{CoreError, Result};
use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Magnitudes |alpha_r| of a one- or two-sided oscillatory spectrum.
/// alpha_0 is redefined to 1 in the iteration estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaSeq {
    /// r -> |alpha_r| for r != 0.
    pub alphas: BTreeMap<i64, f64>,
    /// Decay order M >= 2.
    pub decay_order: u32,
}

impl AlphaSeq {
    pub fn new(alphas: BTreeMap<i64, f64>, decay_order: u32) -> Result<Self> {
        if alphas.contains_key(&0) {
            return Err(CoreError::Config("alpha_0 is implicit; do not supply r = 0".into()));
        }
        if alphas.values().any(|a| *a < 0.0) {
            return Err(CoreError::Config("magnitudes must be nonnegative".into()));
        }
        Ok(Self {
            alphas,
            decay_order,
        })
    }

    pub fn one_sided(magnitudes: &[f64], decay_order: u32) -> Result<Self> {
        let map = magnitudes
            .iter()
            .enumerate()
            .map(|(i, a)| ((i + 1) as i64, *a))
            .collect();
        Self::new(map, decay_order)
    }

    /// |alpha_t| with the alpha_0 = 1 convention. The t = 1 weight also counts
    /// as 1: the displayed recursion absorbs it into the step constant.
    pub fn weight(&self, t: i64) -> f64 {
        match t {
            0 | 1 => 1.0,
            _ => self.alphas.get(&t).copied().unwrap_or(0.0),
        }
    }

    /// |alpha_r| itself (no conventions), zero off support.
    pub fn magnitude(&self, r: i64) -> f64 {
        self.alphas.get(&r).copied().unwrap_or(0.0)
    }

    pub fn is_one_sided(&self) -> bool {
        let pos = self.alphas.iter().any(|(r, a)| *r > 0 && *a > 0.0);
        let neg = self.alphas.iter().any(|(r, a)| *r < 0 && *a > 0.0);
        !(pos && neg)
    }

    /// Verify the decay bound |alpha_r| <= a |r|^-(M+k) for the smallest
    /// admissible amplitude constant a; returns that constant.
    pub fn decay_constant(&self, extra: u32) -> f64 {
        let m = (self.decay_order + extra) as i32;
        self.alphas
            .iter()
            .map(|(r, a)| a * (r.unsigned_abs() as f64).powi(m))
            .fold(0.0, f64::max)
    }
}

/// One leaf of a cascade tree: the data index j of its G_j together with the
/// chain of (step size r, inner-sum shift t) factors above it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaf {
    pub index: u32,
    pub chain: Vec<(u32, u32)>,
}

/// Fully expanded one-sided cascade tree of G^T_k.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CascadeTree {
    pub root: u32,
    pub leaves: Vec<Leaf>,
    /// Leaves grouped by expansion stage (stage 0 holds the root itself).
    pub stage_sizes: Vec<usize>,
    pub truncated: bool,
}

/// Cap on the number of leaves before expansion aborts with a partial tree.
pub const LEAF_CAP: usize = 1_000_000;

/// Expand the one-sided cascade of G^T_k.
///
/// Each term G_p spawns, for every step r = 1..p-1 and inner shift
/// t = 0..p-r-1, the child G_{p-r-t}; indices <= 0 are cut by the one-sided
/// truncation. `depth_limit` bounds the recursion depth (stages).
pub fn expand_tree(k: u32, depth_limit: usize) -> Result<CascadeTree> {
    if k < 1 {
        return Err(CoreError::Precondition("cascade root needs k >= 1".into()));
    }
    let mut leaves = Vec::new();
    let mut stage_sizes = Vec::new();
    let mut frontier = vec![Leaf {
        index: k,
        chain: Vec::new(),
    }];
    let mut truncated = false;
    let mut depth = 0usize;
    while !frontier.is_empty() {
        stage_sizes.push(frontier.len());
        let mut next = Vec::new();
        for leaf in frontier {
            let p = leaf.index;
            if p >= 2 && depth < depth_limit {
                for r in 1..p {
                    for t in 0..(p - r) {
                        let mut chain = leaf.chain.clone();
                        chain.push((r, t));
                        next.push(Leaf {
                            index: p - r - t,
                            chain,
                        });
                    }
                }
            } else if p >= 2 {
                truncated = true;
            }
            leaves.push(leaf);
            if leaves.len() + next.len() > LEAF_CAP {
                return Err(CoreError::BoundedExpansion(format!(
                    "cascade for k = {k} exceeded {LEAF_CAP} leaves"
                )));
            }
        }
        frontier = next;
        depth += 1;
    }
    Ok(CascadeTree {
        root: k,
        leaves,
        stage_sizes,
        truncated,
    })
}

impl CascadeTree {
    /// Total number of G-symbols in the expansion (= terms of the
    /// distributed G^T_k).
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    /// Multiset of leaf data indices.
    pub fn leaf_multiset(&self) -> BTreeMap<u32, usize> {
        let mut m = BTreeMap::new();
        for l in &self.leaves {
            *m.entry(l.index).or_insert(0) += 1;
        }
        m
    }

    /// Check constructively that every leaf chain embeds into a strictly
    /// decreasing admissible sequence: reading the chain top-down from the
    /// root, each factor consumes r + t >= 1 of the index.
    pub fn chains_admissible(&self) -> bool {
        self.leaves.iter().all(|leaf| {
            let mut idx = self.root as i64;
            for (r, t) in &leaf.chain {
                let next = idx - *r as i64 - *t as i64;
                if *r < 1 || next < 1 || next >= idx {
                    return false;
                }
                idx = next;
            }
            idx == leaf.index as i64
        })
    }

    /// Dump in the bracketed stage notation.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let mut offset = 0;
        for (stage, size) in self.stage_sizes.iter().enumerate() {
            let syms: Vec<String> = self.leaves[offset..offset + size]
                .iter()
                .map(|l| format!("G{}", l.index))
                .collect();
            out.push_str(&format!("stage {stage}: [{}]\n", syms.join(", ")));
            offset += size;
        }
        out
    }
}

/// Numeric or exact-rational coefficient scalar.
#[derive(Debug, Clone, PartialEq)]
pub enum Coeff {
    Num(f64),
    Exact(BigRational),
}

impl Coeff {
    pub fn to_f64(&self) -> f64 {
        match self {
            Coeff::Num(x) => *x,
            Coeff::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
        }
    }
}

/// Table of H^T coefficients g_{j,p} (coefficient of G_j in H^T_p).
#[derive(Debug, Clone)]
pub struct HtTable {
    pub kmax: usize,
    /// g1[m] = g_{1, m+1}; the first column determines the table via the
    /// diagonal identity.
    pub g1: Vec<Coeff>,
    /// Full rows built by the direct recursion (for the independent check):
    /// rows[p-1][j-1] = g_{j,p}.
    pub rows: Vec<Vec<Coeff>>,
    pub exact: bool,
}

/// Step-weight sum W_s = sum_{r + t = s} w(t) E_r with w(0) = w(1) = 1 and
/// w(t) = |alpha_t| otherwise; E_r = (C/gamma) r^-M.
fn step_weights_f64(alpha: &AlphaSeq, c_over_gamma: f64, m: u32, smax: usize) -> Vec<f64> {
    let e = |r: usize| c_over_gamma / (r as f64).powi(m as i32);
    (1..=smax)
        .map(|s| {
            (1..=s)
                .map(|r| alpha.weight((s - r) as i64) * e(r))
                .sum()
        })
        .collect()
}

fn step_weights_exact(
    alpha_exact: &BTreeMap<i64, BigRational>,
    c_over_gamma: &BigRational,
    m: u32,
    smax: usize,
) -> Vec<BigRational> {
    let weight = |t: i64| -> BigRational {
        match t {
            0 | 1 => BigRational::one(),
            _ => alpha_exact.get(&t).cloned().unwrap_or_else(BigRational::zero),
        }
    };
    let e = |r: usize| {
        c_over_gamma / BigRational::from_integer(BigInt::from((r as u64).pow(m)))
    };
    (1..=smax)
        .map(|s| {
            (1..=s)
                .map(|r| weight((s - r) as i64) * e(r))
                .fold(BigRational::zero(), |a, b| a + b)
        })
        .collect()
}

/// Build the H^T coefficient table by the displayed recursion, with
/// E_r = C / (gamma r^M). When `exact` rational data is supplied, all
/// coefficients are kept as exact rationals.
pub fn ht_coefficients(
    kmax: usize,
    alpha: &AlphaSeq,
    c: f64,
    gamma: f64,
    m: u32,
    exact: Option<(&BTreeMap<i64, BigRational>, BigRational, BigRational)>,
) -> Result<HtTable> {
    if gamma <= 0.0 && exact.is_none() {
        return Err(CoreError::Precondition("gamma must be positive".into()));
    }
    if let Some((alpha_exact, ce, ge)) = exact {
        let cg = ce / ge;
        let w = step_weights_exact(alpha_exact, &cg, m, kmax);
        let mut g1 = vec![BigRational::one()];
        for p in 2..=kmax {
            let mut acc = BigRational::zero();
            for s in 1..p {
                acc += &w[s - 1] * &g1[p - s - 1];
            }
            g1.push(acc);
        }
        let mut rows: Vec<Vec<BigRational>> = Vec::with_capacity(kmax);
        for p in 1..=kmax {
            let mut row = vec![BigRational::zero(); p];
            row[p - 1] = BigRational::one();
            // direct recursion on full rows: H^T_p = G_p + sum_s W_s H^T_{p-s}
            for s in 1..p {
                let prev = rows[p - s - 1].clone();
                for (j, v) in prev.iter().enumerate() {
                    row[j] += &w[s - 1] * v;
                }
            }
            rows.push(row);
        }
        return Ok(HtTable {
            kmax,
            g1: g1.into_iter().map(Coeff::Exact).collect(),
            rows: rows
                .into_iter()
                .map(|r| r.into_iter().map(Coeff::Exact).collect())
                .collect(),
            exact: true,
        });
    }

    let w = step_weights_f64(alpha, c / gamma, m, kmax);
    let mut g1 = vec![1.0f64];
    for p in 2..=kmax {
        let mut acc = 0.0;
        for s in 1..p {
            acc += w[s - 1] * g1[p - s - 1];
        }
        g1.push(acc);
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(kmax);
    for p in 1..=kmax {
        let mut row = vec![0.0f64; p];
        row[p - 1] = 1.0;
        for s in 1..p {
            let prev = rows[p - s - 1].clone();
            for (j, v) in prev.iter().enumerate() {
                row[j] += w[s - 1] * v;
            }
        }
        rows.push(row);
    }
    Ok(HtTable {
        kmax,
        g1: g1.into_iter().map(Coeff::Num).collect(),
        rows: rows
            .into_iter()
            .map(|r| r.into_iter().map(Coeff::Num).collect())
            .collect(),
        exact: false,
    })
}

impl HtTable {
    /// g_{j,p} from the directly-recursed rows (1-based indices).
    pub fn g(&self, j: usize, p: usize) -> Coeff {
        self.rows[p - 1][j - 1].clone()
    }
}

/// True iff g_{j,p} = g_{1, p-(j-1)} across the table: bit-exact in rational
/// mode, 1e-12 relative otherwise.
pub fn check_diagonal(table: &HtTable) -> bool {
    for p in 1..=table.kmax {
        for j in 1..=p {
            let lhs = table.g(j, p);
            let rhs = &table.g1[p - j];
            match (&lhs, rhs) {
                (Coeff::Exact(a), Coeff::Exact(b)) => {
                    if a != b {
                        return false;
                    }
                }
                _ => {
                    let (a, b) = (lhs.to_f64(), rhs.to_f64());
                    if (a - b).abs() > 1e-12 * b.abs().max(1.0) {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Thresholds and sums of the one-sided (and two-sided) cascade estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    /// C_M = 2 + sum_{i >= 2} |alpha_i|.
    pub c_m: f64,
    /// D_M = sum_{r >= 1} r^-M.
    pub d_m: f64,
    /// gamma_0 = C * C_M * D_M.
    pub gamma0: f64,
    /// E_M = (C / gamma) C_M D_M at the supplied gamma.
    pub e_m: f64,
    /// S = 1 / (1 - E_M) when finite.
    pub s: f64,
    /// ell^2 bound value sum |g_{1,k}|_{l1} * |(|G_k|)|_{l2}, without the
    /// (eps gamma)^-E prefactor.
    pub l2_bound: f64,
    /// Two-sided Young constant K1 (only set by `two_sided_bound`).
    pub k1: Option<f64>,
}

/// Riemann zeta at integer M >= 2 via truncated series plus Euler-Maclaurin
/// tail correction; accurate to well below 1e-12 for M >= 2.
pub fn zeta_int(m: u32) -> f64 {
    let n = 2000u64;
    let mi = m as i32;
    let head: f64 = (1..=n).map(|r| (r as f64).powi(-mi)).sum();
    let nf = n as f64;
    let m_f = m as f64;
    // integral + half-term + first Bernoulli correction
    let tail = nf.powi(1 - mi) / (m_f - 1.0) - 0.5 * nf.powi(-mi)
        + m_f / 12.0 * nf.powi(-mi - 1);
    head + tail
}

/// One-sided threshold formula and ell^2 bound evaluation.
///
/// Errors when gamma <= gamma_0 (divergent series), reporting the threshold.
pub fn one_sided_bound(
    alpha: &AlphaSeq,
    c: f64,
    gamma: f64,
    m: u32,
    data_l2: &[f64],
) -> Result<BoundReport> {
    if !alpha.is_one_sided() {
        return Err(CoreError::Precondition(
            "one-sided bound requires a one-sided spectrum".into(),
        ));
    }
    let c_m = 2.0
        + alpha
            .alphas
            .iter()
            .filter(|(r, _)| r.abs() >= 2)
            .map(|(_, a)| a)
            .sum::<f64>();
    let d_m = zeta_int(m);
    let gamma0 = c * c_m * d_m;
    if gamma <= gamma0 {
        return Err(CoreError::DivergentSeries { gamma, gamma0 });
    }
    let e_m = c / gamma * c_m * d_m;
    let s = 1.0 / (1.0 - e_m);
    let table = ht_coefficients(200, alpha, c, gamma, m, None)?;
    let g1_l1: f64 = table.g1.iter().map(|g| g.to_f64()).sum();
    let data_l2_norm = data_l2.iter().map(|x| x * x).sum::<f64>().sqrt();
    Ok(BoundReport {
        c_m,
        d_m,
        gamma0,
        e_m,
        s,
        l2_bound: g1_l1 * data_l2_norm,
        k1: None,
    })
}

/// Column-summation oracle for S: partial sums of g_{1,k} up to kmax.
pub fn column_sum_s(alpha: &AlphaSeq, c: f64, gamma: f64, m: u32, kmax: usize) -> Result<f64> {
    let table = ht_coefficients(kmax, alpha, c, gamma, m, None)?;
    Ok(table.g1.iter().map(|g| g.to_f64()).sum())
}

/// Two-sided absorption threshold via Young's inequality:
/// beta_r = |alpha_r| C |r|, K1 = |beta|_{l1} |alpha|_{l1} (alpha_0 = 1),
/// gamma_0 = 2 C_iter K1.
pub fn two_sided_bound(alpha: &AlphaSeq, c_bound: f64, c_iter: f64) -> Result<BoundReport> {
    // decay must make |alpha_r| |r| summable: check |alpha_r| <~ |r|^-(M+1)
    let a_const = alpha.decay_constant(1);
    if !a_const.is_finite() {
        return Err(CoreError::Precondition("decay too slow for the two-sided bound".into()));
    }
    let beta_l1: f64 = alpha
        .alphas
        .iter()
        .map(|(r, a)| a * c_bound * r.abs() as f64)
        .sum();
    let alpha_l1: f64 = 1.0 + alpha.alphas.values().sum::<f64>();
    let k1 = beta_l1 * alpha_l1;
    Ok(BoundReport {
        c_m: f64::NAN,
        d_m: f64::NAN,
        gamma0: 2.0 * c_iter * k1,
        e_m: f64::NAN,
        s: f64::NAN,
        l2_bound: f64::NAN,
        k1: Some(k1),
    })
}

/// Evaluate every leaf chain of a tree with E-weights and alpha inner-sum
/// weights, summed per leaf index. Reproduces the H^T coefficients exactly:
/// the second route of the tree/estimate correspondence.
pub fn tree_weighted_sums(
    tree: &CascadeTree,
    alpha: &AlphaSeq,
    c: f64,
    gamma: f64,
    m: u32,
) -> BTreeMap<u32, f64> {
    let e = |r: u32| c / gamma / (r as f64).powi(m as i32);
    let mut out: BTreeMap<u32, f64> = BTreeMap::new();
    for leaf in &tree.leaves {
        let w: f64 = leaf
            .chain
            .iter()
            .map(|(r, t)| alpha.weight(*t as i64) * e(*r))
            .product();
        *out.entry(leaf.index).or_insert(0.0) += w;
    }
    out
}
