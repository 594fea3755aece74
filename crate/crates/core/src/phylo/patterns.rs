//! Site-pattern classes and their probabilities on 3- and 4-taxon trees.
//!
//! Each JC branch matrix is `¼J + e·(I − ¼J)` with `e = exp(−4rt/3)`, so a
//! pattern probability is `Σ_S c_S Π_{i∈S} e_i` over branch subsets `S`.
//! The coefficients `c_S` do not depend on branch lengths; they are found
//! once by pruning with the two constant matrices, collapsing all raw
//! nucleotide tuples into classes. Rates then enter only through
//! `RateModel::decay` of each subset's total length.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::jc::RateModel;
use crate::error::{domain, Result};

/// Rooted clock trees for taxa (a, b, c).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology3 {
    /// ((a,b),c)
    T1,
    /// ((b,c),a)
    T2,
    /// ((c,a),b)
    T3,
    Star,
}

impl Topology3 {
    pub const BINARY: [Topology3; 3] = [Topology3::T1, Topology3::T2, Topology3::T3];
}

/// Unrooted trees for taxa (a, b, c, d).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology4 {
    /// ((a,b),(c,d))
    T1,
    /// ((a,c),(b,d))
    T2,
    /// ((a,d),(b,c))
    T3,
    Star,
}

impl Topology4 {
    pub const BINARY: [Topology4; 3] = [Topology4::T1, Topology4::T2, Topology4::T3];

    pub fn index(self) -> Option<usize> {
        match self {
            Topology4::T1 => Some(0),
            Topology4::T2 => Some(1),
            Topology4::T3 => Some(2),
            Topology4::Star => None,
        }
    }

    fn pairs(self) -> ([usize; 2], [usize; 2]) {
        match self {
            Topology4::T1 | Topology4::Star => ([0, 1], [2, 3]),
            Topology4::T2 => ([0, 2], [1, 3]),
            Topology4::T3 => ([0, 3], [1, 2]),
        }
    }
}

/// Internal branch `t0` and tip-to-cherry-ancestor length `t1`; the
/// outgroup tip sits at depth `t0 + t1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockBranchLengths {
    pub t0: f64,
    pub t1: f64,
}

impl ClockBranchLengths {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t0 >= 0.0 && t1 >= 0.0 && t0.is_finite() && t1.is_finite()) {
            return Err(domain(format!("branch lengths must be finite and non-negative, got ({t0}, {t1})")));
        }
        Ok(Self { t0, t1 })
    }
}

/// `[t0, t1, t2, t3, t4]`: internal branch then the external branches of a..d.
pub type QuartetBranches = [f64; 5];

fn check_quartet(bl: &QuartetBranches) -> Result<()> {
    if bl.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(domain(format!("branch lengths must be finite and non-negative, got {bl:?}")));
    }
    Ok(())
}

/// Class counts for one alignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SitePatternCounts {
    taxa: u8,
    counts: Vec<u64>,
}

impl SitePatternCounts {
    pub fn new(taxa: u8, counts: Vec<u64>) -> Result<Self> {
        let want = match taxa {
            3 => TRIPLET_CLASSES,
            4 => QUARTET_CLASSES,
            _ => return Err(domain(format!("only 3 or 4 taxa are supported, got {taxa}"))),
        };
        if counts.len() != want {
            return Err(domain(format!("{taxa} taxa need {want} class counts, got {}", counts.len())));
        }
        Ok(Self { taxa, counts })
    }

    pub fn taxa(&self) -> u8 {
        self.taxa
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub const TRIPLET_CLASSES: usize = 5;
pub const QUARTET_CLASSES: usize = 15;

/// Class of a nucleotide triple: xxx, xxy, yxx, xyx, xyz.
pub fn triplet_class(t: [u8; 3]) -> usize {
    match (t[0] == t[1], t[1] == t[2], t[0] == t[2]) {
        (true, true, _) => 0,
        (true, false, _) => 1,
        (false, true, _) => 2,
        (false, false, true) => 3,
        (false, false, false) => 4,
    }
}

/// Canonical order-of-first-appearance label of a 4-tuple.
pub fn canonical_label(t: [u8; 4]) -> [u8; 4] {
    let mut seen = [u8::MAX; 4];
    let mut next = 0u8;
    let mut out = [0u8; 4];
    for (k, &base) in t.iter().enumerate() {
        let slot = &mut seen[base as usize];
        if *slot == u8::MAX {
            *slot = next;
            next += 1;
        }
        out[k] = *slot;
    }
    out
}

/// The 15 canonical labels in lexicographic order.
pub fn quartet_labels() -> &'static [[u8; 4]; QUARTET_CLASSES] {
    static LABELS: OnceLock<[[u8; 4]; QUARTET_CLASSES]> = OnceLock::new();
    LABELS.get_or_init(|| {
        let mut v: Vec<[u8; 4]> = all_tuples4().map(canonical_label).collect();
        v.sort_unstable();
        v.dedup();
        v.try_into().expect("Bell(4) = 15")
    })
}

pub fn quartet_class(t: [u8; 4]) -> usize {
    let label = canonical_label(t);
    quartet_labels().binary_search(&label).expect("every label is listed")
}

fn all_tuples4() -> impl Iterator<Item = [u8; 4]> {
    (0..256u32).map(|k| [(k >> 6) as u8 & 3, (k >> 4) as u8 & 3, (k >> 2) as u8 & 3, k as u8 & 3])
}

fn all_tuples3() -> impl Iterator<Item = [u8; 3]> {
    (0..64u32).map(|k| [(k >> 4) as u8 & 3, (k >> 2) as u8 & 3, k as u8 & 3])
}

/// Raw 4-tuples per class (sums to 256).
pub fn quartet_multiplicities() -> [u32; QUARTET_CLASSES] {
    let mut m = [0; QUARTET_CLASSES];
    for t in all_tuples4() {
        m[quartet_class(t)] += 1;
    }
    m
}

/// Raw triples per class (sums to 64).
pub fn triplet_multiplicities() -> [u32; TRIPLET_CLASSES] {
    let mut m = [0; TRIPLET_CLASSES];
    for t in all_tuples3() {
        m[triplet_class(t)] += 1;
    }
    m
}

// Entry (i, j) of ¼J (branch outside S) or I − ¼J (branch in S).
fn expansion_entry(in_subset: bool, i: u8, j: u8) -> f64 {
    if in_subset {
        f64::from(u8::from(i == j)) - 0.25
    } else {
        0.25
    }
}

type StarTable = [[f64; 8]; TRIPLET_CLASSES];
type QuartetTable = [[f64; 32]; QUARTET_CLASSES];

// Star on (a, b, c); subset bit k is the branch to taxon k.
fn star3_table() -> &'static StarTable {
    static TABLE: OnceLock<StarTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [[0.0; 8]; TRIPLET_CLASSES];
        for s in 0..8usize {
            for t in all_tuples3() {
                let mut p = 0.0;
                for root in 0..4u8 {
                    let mut partial = 0.25;
                    for (k, &base) in t.iter().enumerate() {
                        partial *= expansion_entry(s >> k & 1 == 1, root, base);
                    }
                    p += partial;
                }
                table[triplet_class(t)][s] += p;
            }
        }
        table
    })
}

// Subset bit 0 is the internal branch; bit k + 1 is the branch to taxon k.
fn quartet_table(topo: Topology4) -> &'static QuartetTable {
    static TABLES: OnceLock<[QuartetTable; 3]> = OnceLock::new();
    let tables = TABLES.get_or_init(|| Topology4::BINARY.map(build_quartet_table));
    &tables[topo.index().unwrap_or(0)]
}

fn build_quartet_table(topo: Topology4) -> QuartetTable {
    let (left, right) = topo.pairs();
    let mut table = [[0.0; 32]; QUARTET_CLASSES];
    for s in 0..32usize {
        let on = |branch: usize| s >> branch & 1 == 1;
        for t in all_tuples4() {
            // Pruning: conditional likelihoods at the two internal nodes.
            let side = |pair: [usize; 2], node: u8| {
                pair.iter()
                    .map(|&k| expansion_entry(on(k + 1), node, t[k]))
                    .product::<f64>()
            };
            let mut p = 0.0;
            for u in 0..4u8 {
                let lu = side(left, u);
                if lu == 0.0 {
                    continue;
                }
                for v in 0..4u8 {
                    p += 0.25 * lu * expansion_entry(on(0), u, v) * side(right, v);
                }
            }
            table[quartet_class(t)][s] += p;
        }
    }
    table
}

fn subset_decays<const B: usize, const S: usize>(lengths: &[f64; B], rates: &RateModel) -> [f64; S] {
    let mut d = [1.0; S];
    if rates.is_jc() {
        let e: [f64; B] = lengths.map(|t| (-4.0 * t / 3.0).exp());
        for s in 1..S {
            let low = s.trailing_zeros() as usize;
            d[s] = d[s & (s - 1)] * e[low];
        }
    } else {
        let mut total = [0.0; S];
        for s in 1..S {
            let low = s.trailing_zeros() as usize;
            total[s] = total[s & (s - 1)] + lengths[low];
            d[s] = rates.decay(total[s]);
        }
    }
    d
}

fn apply<const S: usize, const C: usize>(table: &[[f64; S]; C], decays: &[f64; S]) -> [f64; C] {
    table.map(|row| row.iter().zip(decays).map(|(c, d)| c * d).sum::<f64>().max(0.0))
}

/// Class probabilities for a star on (a, b, c) with arbitrary branch lengths.
pub fn star3_pattern_probs(lengths: [f64; 3], rates: &RateModel) -> [f64; TRIPLET_CLASSES] {
    apply(star3_table(), &subset_decays::<3, 8>(&lengths, rates))
}

/// Class probabilities (xxx, xxy, yxx, xyx, xyz) on a 3-taxon clock tree.
pub fn pattern_probs_3taxon(topo: Topology3, bl: ClockBranchLengths, rates: &RateModel) -> Result<[f64; TRIPLET_CLASSES]> {
    ClockBranchLengths::new(bl.t0, bl.t1)?;
    let (short, long) = (bl.t1, 2.0 * bl.t0 + bl.t1);
    let lengths = match topo {
        Topology3::T1 => [short, short, long],
        Topology3::T2 => [long, short, short],
        Topology3::T3 => [short, long, short],
        Topology3::Star => [bl.t1; 3],
    };
    Ok(star3_pattern_probs(lengths, rates))
}

/// Class probabilities (multiplicities included) on an unrooted 4-taxon tree.
/// For `Star` the internal length is ignored.
pub fn pattern_probs_4taxon(topo: Topology4, bl: &QuartetBranches, rates: &RateModel) -> Result<[f64; QUARTET_CLASSES]> {
    check_quartet(bl)?;
    let mut lengths = *bl;
    if topo == Topology4::Star {
        lengths[0] = 0.0;
    }
    Ok(quartet_probs_unchecked(topo, &lengths, rates))
}

pub(crate) fn quartet_probs_unchecked(topo: Topology4, bl: &QuartetBranches, rates: &RateModel) -> [f64; QUARTET_CLASSES] {
    apply(quartet_table(topo), &subset_decays::<5, 32>(bl, rates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phylo::jc::jc_transition;
    use crate::rng::seeded_rng;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Gamma};

    fn jc_matrix(t: f64) -> [[f64; 4]; 4] {
        let (s, d) = jc_transition(t, 1.0).unwrap();
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { s } else { d }))
    }

    // Every tip assignment and every ancestral state on the rooted clock tree.
    fn brute_force_3taxon(topo: Topology3, bl: ClockBranchLengths) -> [f64; 5] {
        let (cherry, out) = match topo {
            Topology3::T1 | Topology3::Star => ([0, 1], 2),
            Topology3::T2 => ([1, 2], 0),
            Topology3::T3 => ([2, 0], 1),
        };
        let t0 = if topo == Topology3::Star { 0.0 } else { bl.t0 };
        let (p_int, p_tip, p_out) = (jc_matrix(t0), jc_matrix(bl.t1), jc_matrix(t0 + bl.t1));
        let mut probs = [0.0; 5];
        for t in all_tuples3() {
            let mut p = 0.0;
            for root in 0..4 {
                for anc in 0..4 {
                    p += 0.25
                        * p_int[root][anc]
                        * p_tip[anc][t[cherry[0]] as usize]
                        * p_tip[anc][t[cherry[1]] as usize]
                        * p_out[root][t[out] as usize];
                }
            }
            probs[triplet_class(t)] += p;
        }
        probs
    }

    fn brute_force_4taxon(topo: Topology4, bl: &QuartetBranches) -> [f64; 15] {
        let (left, right) = topo.pairs();
        let m: Vec<_> = bl.iter().map(|&t| jc_matrix(t)).collect();
        let mut probs = [0.0; 15];
        for t in all_tuples4() {
            let mut p = 0.0;
            for u in 0..4 {
                for v in 0..4 {
                    p += 0.25
                        * m[left[0] + 1][u][t[left[0]] as usize]
                        * m[left[1] + 1][u][t[left[1]] as usize]
                        * m[0][u][v]
                        * m[right[0] + 1][v][t[right[0]] as usize]
                        * m[right[1] + 1][v][t[right[1]] as usize];
                }
            }
            probs[quartet_class(t)] += p;
        }
        probs
    }

    #[test]
    fn class_tables() {
        assert_eq!(triplet_multiplicities(), [4, 12, 12, 12, 24]);
        let m = quartet_multiplicities();
        assert_eq!(m.iter().sum::<u32>(), 256);
        let labels = quartet_labels();
        assert_eq!(labels[0], [0, 0, 0, 0]);
        assert_eq!(labels[14], [0, 1, 2, 3]);
        for (label, mult) in labels.iter().zip(m) {
            let blocks = label.iter().max().unwrap() + 1;
            assert_eq!(mult, [4, 12, 24, 24][blocks as usize - 1]);
        }
        assert_eq!(quartet_class([2, 2, 3, 3]), quartet_class([0, 0, 1, 1]));
    }

    #[test]
    fn no_substitution_means_constant_pattern() {
        let p = pattern_probs_3taxon(Topology3::T1, ClockBranchLengths::new(0.0, 0.0).unwrap(), &RateModel::jc()).unwrap();
        assert_eq!(p, [1.0, 0.0, 0.0, 0.0, 0.0]);
        let q = pattern_probs_4taxon(Topology4::T2, &[0.0; 5], &RateModel::gamma(1.0).unwrap()).unwrap();
        assert_eq!(q[0], 1.0);
        assert_eq!(q[1..].iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn three_taxon_matches_brute_force() {
        let bl = ClockBranchLengths::new(0.1, 0.2).unwrap();
        for topo in [Topology3::T1, Topology3::T2, Topology3::T3, Topology3::Star] {
            let fast = pattern_probs_3taxon(topo, bl, &RateModel::jc()).unwrap();
            let slow = brute_force_3taxon(topo, bl);
            for k in 0..5 {
                assert!((fast[k] - slow[k]).abs() < 1e-12, "{topo:?} class {k}");
            }
        }
        let p = pattern_probs_3taxon(Topology3::T1, bl, &RateModel::jc()).unwrap();
        assert!(p[1] > p[2] && (p[2] - p[3]).abs() < 1e-15);
    }

    #[test]
    fn four_taxon_matches_brute_force() {
        let bl = [0.05, 0.2, 0.11, 0.3, 0.07];
        for topo in Topology4::BINARY {
            let fast = pattern_probs_4taxon(topo, &bl, &RateModel::jc()).unwrap();
            let slow = brute_force_4taxon(topo, &bl);
            for k in 0..15 {
                assert!((fast[k] - slow[k]).abs() < 1e-12, "{topo:?} class {k}");
            }
        }
    }

    #[test]
    fn every_tuple_in_a_class_is_equally_likely() {
        // Under JC a class probability is multiplicity × one representative.
        let bl = [0.03, 0.2, 0.15, 0.25, 0.1];
        let mult = quartet_multiplicities();
        let collapsed = pattern_probs_4taxon(Topology4::T1, &bl, &RateModel::jc()).unwrap();
        let m: Vec<_> = bl.iter().map(|&t| jc_matrix(t)).collect();
        for (k, label) in quartet_labels().iter().enumerate() {
            let t = label.map(|b| b as usize);
            let mut rep = 0.0;
            for u in 0..4 {
                for v in 0..4 {
                    rep += 0.25 * m[1][u][t[0]] * m[2][u][t[1]] * m[0][u][v] * m[3][v][t[2]] * m[4][v][t[3]];
                }
            }
            assert!((collapsed[k] - f64::from(mult[k]) * rep).abs() < 1e-14);
        }
    }

    #[test]
    fn gamma_quartet_matches_site_simulation() {
        // 10⁷ simulated sites on T1 with t0 = 0.05, external 0.2, α = 1.
        let bl = [0.05, 0.2, 0.2, 0.2, 0.2];
        let probs = pattern_probs_4taxon(Topology4::T1, &bl, &RateModel::gamma(1.0).unwrap()).unwrap();
        let sites = 10_000_000u64;
        let chunks = 100u64;
        use rayon::prelude::*;
        let counts = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = seeded_rng(1000 + c);
                let gamma = Gamma::new(1.0, 1.0).unwrap();
                let mut local = [0u64; 15];
                let evolve = |from: u8, t: f64, r: f64, rng: &mut crate::rng::ReplicateRng| {
                    let (same, _) = jc_transition(t, r).unwrap();
                    if rng.random::<f64>() < same {
                        from
                    } else {
                        (from + rng.random_range(1..4u8)) % 4
                    }
                };
                for _ in 0..sites / chunks {
                    let r: f64 = gamma.sample(&mut rng);
                    let u = rng.random_range(0..4u8);
                    let v = evolve(u, bl[0], r, &mut rng);
                    let a = evolve(u, bl[1], r, &mut rng);
                    let b = evolve(u, bl[2], r, &mut rng);
                    let c = evolve(v, bl[3], r, &mut rng);
                    let d = evolve(v, bl[4], r, &mut rng);
                    local[quartet_class([a, b, c, d])] += 1;
                }
                local
            })
            .reduce(|| [0u64; 15], |mut x, y| {
                for k in 0..15 {
                    x[k] += y[k];
                }
                x
            });
        let nf = sites as f64;
        for k in 0..15 {
            let freq = counts[k] as f64 / nf;
            let se = (probs[k] * (1.0 - probs[k]) / nf).sqrt();
            assert!((freq - probs[k]).abs() < 4.0 * se + 1e-12, "class {k}: {freq} vs {}", probs[k]);
        }
    }

    proptest! {
        #[test]
        fn probabilities_form_a_simplex(
            t in proptest::array::uniform5(0.0f64..3.0),
            alpha in prop_oneof![Just(f64::INFINITY), 0.1f64..20.0],
        ) {
            let rates = RateModel::gamma(alpha).unwrap();
            for topo in Topology4::BINARY {
                let p = pattern_probs_4taxon(topo, &t, &rates).unwrap();
                prop_assert!(p.iter().all(|&x| x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            for topo in Topology3::BINARY {
                let p = pattern_probs_3taxon(topo, ClockBranchLengths::new(t[0], t[1]).unwrap(), &rates).unwrap();
                prop_assert!(p.iter().all(|&x| x >= 0.0));
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn star_trees_are_indistinct(t in proptest::array::uniform5(0.0f64..3.0), alpha in 0.2f64..10.0) {
            let rates = RateModel::gamma(alpha).unwrap();
            let mut bl = t;
            bl[0] = 0.0;
            let base = pattern_probs_4taxon(Topology4::T1, &bl, &rates).unwrap();
            for topo in [Topology4::T2, Topology4::T3, Topology4::Star] {
                let other = pattern_probs_4taxon(topo, &bl, &rates).unwrap();
                for k in 0..15 {
                    prop_assert!((base[k] - other[k]).abs() <= 1e-14);
                }
            }
            let clock = ClockBranchLengths::new(0.0, t[1]).unwrap();
            let base = pattern_probs_3taxon(Topology3::T1, clock, &rates).unwrap();
            for topo in [Topology3::T2, Topology3::T3, Topology3::Star] {
                let other = pattern_probs_3taxon(topo, clock, &rates).unwrap();
                for k in 0..5 {
                    prop_assert!((base[k] - other[k]).abs() <= 1e-14);
                }
            }
        }
    }
}
