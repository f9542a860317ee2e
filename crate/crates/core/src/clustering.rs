//! Commuting-cluster partition of a Pauli sum by DSatur coloring of the
//! anticommutation graph.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliString, PauliSum};

/// Dense bitset adjacency. Node `k` stands for term `terms[k]` of the source
/// sum; nodes are numbered in (x_bits, z_bits) order.
#[derive(Clone, Debug)]
pub struct AnticommutationGraph {
    terms: Vec<usize>,
    strings: Vec<PauliString>,
    words: usize,
    rows: Vec<u64>,
}

impl AnticommutationGraph {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Source term index of node `k`.
    pub fn term_index(&self, k: usize) -> usize {
        self.terms[k]
    }

    pub fn string(&self, k: usize) -> &PauliString {
        &self.strings[k]
    }

    fn row(&self, k: usize) -> &[u64] {
        &self.rows[k * self.words..(k + 1) * self.words]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.row(a)[b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, k: usize) -> usize {
        self.row(k).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(k).iter().enumerate().flat_map(|(w, &bits)| {
            let mut b = bits;
            std::iter::from_fn(move || {
                if b == 0 {
                    return None;
                }
                let i = b.trailing_zeros() as usize;
                b &= b - 1;
                Some(w * 64 + i)
            })
        })
    }

    pub fn edge_count(&self) -> usize {
        (0..self.len()).map(|k| self.degree(k)).sum::<usize>() / 2
    }
}

pub fn build_graph(sum: &PauliSum) -> Result<AnticommutationGraph> {
    if sum.is_empty() {
        return Err(Error::InvalidParameter("empty Pauli sum".into()));
    }
    let mut terms: Vec<usize> = (0..sum.len()).collect();
    let key = |i: &usize| {
        let s = &sum.terms()[*i].string;
        (s.x_bits(), s.z_bits())
    };
    terms.sort_by_key(key);
    let strings: Vec<PauliString> = terms.iter().map(|&i| sum.terms()[i].string).collect();
    let m = strings.len();
    let words = m.div_ceil(64);
    let mut rows = vec![0u64; m * words];
    rows.par_chunks_mut(words).enumerate().for_each(|(a, row)| {
        for (b, s) in strings.iter().enumerate() {
            if strings[a].anticommutes_unchecked(s) {
                row[b / 64] |= 1 << (b % 64);
            }
        }
    });
    Ok(AnticommutationGraph {
        terms,
        strings,
        words,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPartition {
    /// Term indices of the source sum, one list per color.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterPartition {
    pub fn count(&self) -> usize {
        self.clusters.len()
    }

    pub fn term_count(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }

    /// Checks coverage, disjointness and pairwise commutation against `sum`.
    pub fn validate(&self, sum: &PauliSum) -> Result<()> {
        let mut seen = vec![false; sum.len()];
        for cluster in &self.clusters {
            for &i in cluster {
                if i >= sum.len() || std::mem::replace(&mut seen[i], true) {
                    return Err(Error::ContractViolation(format!(
                        "term {i} missing or repeated in partition"
                    )));
                }
            }
            for (a, &i) in cluster.iter().enumerate() {
                for &j in &cluster[a + 1..] {
                    let (p, q) = (&sum.terms()[i].string, &sum.terms()[j].string);
                    if p.anticommutes_unchecked(q) {
                        return Err(Error::ContractViolation(format!(
                            "{p} and {q} share a cluster but anticommute"
                        )));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::ContractViolation("partition does not cover every term".into()));
        }
        Ok(())
    }

    /// One line per cluster: `index: {P1, P2, ...}`.
    pub fn dump(&self, sum: &PauliSum) -> String {
        let mut out = String::new();
        for (k, cluster) in self.clusters.iter().enumerate() {
            let names: Vec<String> = cluster
                .iter()
                .map(|&i| sum.terms()[i].string.to_string())
                .collect();
            out.push_str(&format!("{k}: {{{}}}\n", names.join(", ")));
        }
        out
    }
}

/// Greedy DSatur: pick the uncolored node of highest saturation, then highest
/// degree, then lowest index, and give it the smallest free color.
pub fn dsatur_partition(g: &AnticommutationGraph) -> ClusterPartition {
    let m = g.len();
    let degree: Vec<usize> = (0..m).map(|k| g.degree(k)).collect();
    let mut color: Vec<Option<usize>> = vec![None; m];
    // neighbor colors seen by each node, as a growable bitset
    let mut seen: Vec<Vec<u64>> = vec![Vec::new(); m];
    let mut saturation = vec![0usize; m];
    let mut n_colors = 0;
    for _ in 0..m {
        let mut best: Option<usize> = None;
        for k in 0..m {
            if color[k].is_some() {
                continue;
            }
            best = match best {
                None => Some(k),
                Some(b) if (saturation[k], degree[k]) > (saturation[b], degree[b]) => Some(k),
                keep => keep,
            };
        }
        let v = best.expect("uncolored node remains");
        let used = &seen[v];
        let c = (0..)
            .find(|&c| used.get(c / 64).is_none_or(|w| w >> (c % 64) & 1 == 0))
            .expect("free color");
        color[v] = Some(c);
        n_colors = n_colors.max(c + 1);
        for u in g.neighbors(v) {
            if color[u].is_some() {
                continue;
            }
            let s = &mut seen[u];
            if s.len() <= c / 64 {
                s.resize(c / 64 + 1, 0);
            }
            if s[c / 64] >> (c % 64) & 1 == 0 {
                s[c / 64] |= 1 << (c % 64);
                saturation[u] += 1;
            }
        }
    }
    let mut clusters = vec![Vec::new(); n_colors];
    for (k, c) in color.iter().enumerate() {
        clusters[c.expect("all colored")].push(g.term_index(k));
    }
    ClusterPartition { clusters }
}

pub fn partition(sum: &PauliSum) -> Result<ClusterPartition> {
    let p = dsatur_partition(&build_graph(sum)?);
    p.validate(sum)?;
    Ok(p)
}

/// Reduced fraction `m / 𝒩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn reduction_factor(p: &ClusterPartition, m: usize) -> Result<Ratio> {
    let k = p.count() as u64;
    if k == 0 {
        return Err(Error::InvalidParameter("partition has no clusters".into()));
    }
    let g = gcd(m as u64, k);
    Ok(Ratio {
        num: m as u64 / g,
        den: k / g,
    })
}
