//! Random connected grids with a prescribed number of buses and independent
//! cycles: a uniformly random labelled spanning tree plus random chords.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Branch, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub nodes: usize,
    /// Lines beyond the spanning tree; each adds one independent cycle.
    pub chords: usize,
    pub reactance_min: f64,
    pub reactance_max: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(nodes: usize, chords: usize, seed: u64) -> Self {
        SynthSpec {
            nodes,
            chords,
            reactance_min: 0.01,
            reactance_max: 0.1,
            seed,
        }
    }
}

/// Bus ids are `1..=nodes` and the slack is bus 1. The same spec always
/// yields the same grid.
pub fn generate(spec: &SynthSpec) -> Result<Grid> {
    let n = spec.nodes;
    if n < 2 {
        return Err(Error::InvalidInput(
            "a grid needs at least two buses".into(),
        ));
    }
    let max_chords = n * (n - 1) / 2 - (n - 1);
    if spec.chords > max_chords {
        return Err(Error::InvalidInput(format!(
            "{n} buses allow at most {max_chords} chords, asked for {}",
            spec.chords
        )));
    }
    let (lo, hi) = (spec.reactance_min, spec.reactance_max);
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidInput(format!(
            "bad reactance range [{lo}, {hi}]"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let prufer: Vec<usize> = (0..n.saturating_sub(2))
        .map(|_| rng.random_range(0..n))
        .collect();
    let mut pairs = decode_prufer(n, &prufer);
    let mut used: HashSet<(usize, usize)> = pairs.iter().copied().collect();

    if spec.chords * 2 <= max_chords {
        while pairs.len() < n - 1 + spec.chords {
            let a = rng.random_range(0..n);
            let b = rng.random_range(0..n);
            let key = (a.min(b), a.max(b));
            if a != b && used.insert(key) {
                pairs.push(key);
            }
        }
    } else {
        // Dense request: enumerate what is left and pick without replacement.
        let free: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|p| !used.contains(p))
            .collect();
        for k in index::sample(&mut rng, free.len(), spec.chords) {
            pairs.push(free[k]);
        }
        used.clear();
    }

    let branches = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (a, b))| {
            let (tail, head) = if rng.random_bool(0.5) { (a, b) } else { (b, a) };
            let x = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            Branch::new(k, tail, head, x)
        })
        .collect();
    let ids: Vec<i64> = (1..=n as i64).collect();
    Grid::from_branches(
        format!("synth-{n}-{}-{}", spec.chords, spec.seed),
        &ids,
        branches,
        0,
    )
}

/// Tree edges of a Prüfer sequence, each as `(smaller, larger)`.
fn decode_prufer(n: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> =
        (0..n).filter(|&v| degree[v] == 1).map(Reverse).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let Reverse(leaf) = leaves.pop().expect("a tree always has a leaf");
        edges.push((leaf.min(v), leaf.max(v)));
        degree[v] -= 1;
        if degree[v] == 1 {
            leaves.push(Reverse(v));
        }
    }
    let Reverse(a) = leaves.pop().unwrap();
    let Reverse(b) = leaves.pop().unwrap();
    edges.push((a.min(b), a.max(b)));
    edges
}
