//! The physical network: buses, oriented branches and the slack bus.
//!
//! A [`Grid`] is always normalized: branch endpoints are dense bus indices,
//! parallel branches are merged into one, there are no self-loops and the
//! underlying undirected graph is connected.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bus {
    /// External identifier, e.g. the MATPOWER bus number.
    pub id: i64,
    /// Dense 0-based internal index.
    pub index: usize,
}

/// An oriented branch from `tail` to `head`.
///
/// `susceptance` is always exactly `1.0 / reactance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub index: usize,
    pub tail: usize,
    pub head: usize,
    pub susceptance: f64,
    pub reactance: f64,
}

impl Branch {
    pub fn new(index: usize, tail: usize, head: usize, reactance: f64) -> Self {
        Branch {
            index,
            tail,
            head,
            susceptance: 1.0 / reactance,
            reactance,
        }
    }

    /// The other endpoint, given one of them.
    pub fn opposite(&self, node: usize) -> usize {
        if node == self.tail {
            self.head
        } else {
            self.tail
        }
    }
}

/// A branch as read from an input file, keyed by external bus ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawBranch {
    pub from: i64,
    pub to: i64,
    pub reactance: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GridOptions {
    /// Keep branches with negative reactance (series capacitors). The nodal
    /// matrix may then be indefinite; solvers fall back to a pivoted
    /// factorization.
    pub allow_negative_reactance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    name: String,
    buses: Vec<Bus>,
    branches: Vec<Branch>,
    slack: usize,
    id_to_index: HashMap<i64, usize>,
}

impl Grid {
    /// Builds a normalized grid from external bus ids and raw branches.
    ///
    /// Branch orientation follows the input order (`from` is the tail).
    pub fn from_raw(
        name: impl Into<String>,
        bus_ids: &[i64],
        raw: &[RawBranch],
        slack_id: i64,
        options: GridOptions,
    ) -> Result<Grid> {
        let mut id_to_index = HashMap::with_capacity(bus_ids.len());
        for (index, &id) in bus_ids.iter().enumerate() {
            if id_to_index.insert(id, index).is_some() {
                return Err(Error::InvalidGrid(format!("duplicate bus id {id}")));
            }
        }
        let lookup = |id: i64| {
            id_to_index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::InvalidGrid(format!("branch references unknown bus {id}")))
        };

        let mut branches = Vec::with_capacity(raw.len());
        for r in raw {
            let (tail, head) = (lookup(r.from)?, lookup(r.to)?);
            if tail == head {
                return Err(Error::UnsupportedBranch {
                    from: r.from,
                    to: r.to,
                    reason: "self-loop".into(),
                });
            }
            check_reactance(r.from, r.to, r.reactance, options)?;
            branches.push(Branch::new(branches.len(), tail, head, r.reactance));
        }
        let branches = merge_parallel_lines(branches);
        for br in &branches {
            if !br.reactance.is_finite() || br.susceptance == 0.0 {
                return Err(Error::UnsupportedBranch {
                    from: bus_ids[br.tail],
                    to: bus_ids[br.head],
                    reason: "parallel branches cancel to zero net susceptance".into(),
                });
            }
        }

        let slack = lookup(slack_id)
            .map_err(|_| Error::InvalidGrid(format!("slack bus {slack_id} does not exist")))?;
        let buses = bus_ids
            .iter()
            .enumerate()
            .map(|(index, &id)| Bus { id, index })
            .collect();
        Grid::from_parts(name.into(), buses, branches, slack, id_to_index)
    }

    /// Builds a grid from already-indexed branches. Parallel branches are merged.
    pub fn from_branches(
        name: impl Into<String>,
        bus_ids: &[i64],
        branches: Vec<Branch>,
        slack: usize,
    ) -> Result<Grid> {
        let raw: Vec<RawBranch> = branches
            .iter()
            .map(|b| {
                let id = |i: usize| {
                    bus_ids.get(i).copied().ok_or_else(|| {
                        Error::InvalidGrid(format!("branch {} references bus index {i}", b.index))
                    })
                };
                Ok(RawBranch {
                    from: id(b.tail)?,
                    to: id(b.head)?,
                    reactance: b.reactance,
                })
            })
            .collect::<Result<_>>()?;
        let slack_id = *bus_ids
            .get(slack)
            .ok_or_else(|| Error::InvalidGrid(format!("slack index {slack} out of range")))?;
        let options = GridOptions {
            allow_negative_reactance: branches.iter().any(|b| b.reactance < 0.0),
        };
        Grid::from_raw(name, bus_ids, &raw, slack_id, options)
    }

    fn from_parts(
        name: String,
        buses: Vec<Bus>,
        branches: Vec<Branch>,
        slack: usize,
        id_to_index: HashMap<i64, usize>,
    ) -> Result<Grid> {
        if buses.len() < 2 {
            return Err(Error::InvalidGrid(format!(
                "a grid needs at least 2 buses, got {}",
                buses.len()
            )));
        }
        let grid = Grid {
            name,
            buses,
            branches,
            slack,
            id_to_index,
        };
        if let Some(bus) = grid.disconnected_bus() {
            return Err(Error::Disconnected { bus });
        }
        Ok(grid)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn buses(&self) -> &[Bus] {
        &self.buses
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn branch(&self, index: usize) -> &Branch {
        &self.branches[index]
    }

    /// Internal index of the slack bus.
    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn n_nodes(&self) -> usize {
        self.buses.len()
    }

    pub fn n_lines(&self) -> usize {
        self.branches.len()
    }

    /// Dimension of the cycle space, `L - N + 1`.
    pub fn n_cycles(&self) -> usize {
        self.n_lines() + 1 - self.n_nodes()
    }

    /// `(L - N + 1) / N`.
    pub fn cycles_per_node(&self) -> f64 {
        self.n_cycles() as f64 / self.n_nodes() as f64
    }

    pub fn bus_index(&self, id: i64) -> Option<usize> {
        self.id_to_index.get(&id).copied()
    }

    pub fn bus_id(&self, index: usize) -> i64 {
        self.buses[index].id
    }

    pub fn bus_ids(&self) -> Vec<i64> {
        self.buses.iter().map(|b| b.id).collect()
    }

    /// Looks up a bus index, failing with a descriptive error.
    pub fn require_bus(&self, id: i64) -> Result<usize> {
        self.bus_index(id)
            .ok_or_else(|| Error::InvalidInput(format!("unknown bus {id}")))
    }

    /// Same grid with a different slack bus.
    pub fn with_slack(&self, slack: usize) -> Result<Grid> {
        if slack >= self.n_nodes() {
            return Err(Error::InvalidInput(format!(
                "slack index {slack} out of range"
            )));
        }
        let mut g = self.clone();
        g.slack = slack;
        Ok(g)
    }

    /// Same topology with every reactance multiplied by `factor`.
    pub fn scaled_reactances(&self, factor: f64) -> Grid {
        let mut g = self.clone();
        for b in &mut g.branches {
            *b = Branch::new(b.index, b.tail, b.head, b.reactance * factor);
        }
        g
    }

    /// Undirected adjacency lists of `(neighbor, line)` in branch order.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.n_nodes()];
        for b in &self.branches {
            adj[b.tail].push((b.head, b.index));
            adj[b.head].push((b.tail, b.index));
        }
        adj
    }

    pub fn is_tree(&self) -> bool {
        self.n_lines() + 1 == self.n_nodes()
    }

    /// External id of a bus in the smallest connected component, if the
    /// grid has more than one component.
    fn disconnected_bus(&self) -> Option<i64> {
        let n = self.n_nodes();
        let adj = self.adjacency();
        let mut component = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if component[start] != usize::MAX {
                continue;
            }
            let id = sizes.len();
            let mut size = 0;
            let mut stack = vec![start];
            component[start] = id;
            while let Some(u) = stack.pop() {
                size += 1;
                for &(v, _) in &adj[u] {
                    if component[v] == usize::MAX {
                        component[v] = id;
                        stack.push(v);
                    }
                }
            }
            sizes.push(size);
        }
        if sizes.len() <= 1 {
            return None;
        }
        let smallest = (0..sizes.len()).min_by_key(|&c| sizes[c]).unwrap();
        let bus = component.iter().position(|&c| c == smallest).unwrap();
        Some(self.buses[bus].id)
    }
}

fn check_reactance(from: i64, to: i64, x: f64, options: GridOptions) -> Result<()> {
    let reason = if !x.is_finite() {
        Some("non-finite reactance")
    } else if x == 0.0 {
        Some("zero reactance")
    } else if x < 0.0 && !options.allow_negative_reactance {
        Some("negative reactance (series capacitor)")
    } else {
        None
    };
    match reason {
        Some(reason) => Err(Error::UnsupportedBranch {
            from,
            to,
            reason: format!("{reason}: x = {x}"),
        }),
        None => Ok(()),
    }
}

/// Merges branches that share an unordered node pair.
///
/// Susceptances of parallel members add; the merged branch keeps the
/// orientation of the first member and lines are re-indexed densely in
/// order of first appearance.
pub fn merge_parallel_lines(raw: Vec<Branch>) -> Vec<Branch> {
    let mut slot: HashMap<(usize, usize), usize> = HashMap::with_capacity(raw.len());
    // First member and the summed susceptance, if there was more than one.
    let mut merged: Vec<(Branch, Option<f64>)> = Vec::with_capacity(raw.len());
    for b in raw {
        let key = (b.tail.min(b.head), b.tail.max(b.head));
        match slot.get(&key) {
            Some(&i) => {
                let (first, sum) = &mut merged[i];
                *sum = Some(sum.unwrap_or(first.susceptance) + b.susceptance);
            }
            None => {
                slot.insert(key, merged.len());
                merged.push((b, None));
            }
        }
    }
    merged
        .into_iter()
        .enumerate()
        .map(|(index, (first, sum))| match sum {
            Some(b) => Branch::new(index, first.tail, first.head, 1.0 / b),
            None => Branch { index, ..first },
        })
        .collect()
}
