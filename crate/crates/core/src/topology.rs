//! Graph algebra of a grid: the oriented node-edge incidence matrix, a
//! spanning tree rooted at the slack with its path matrix, and the
//! fundamental cycle basis of the tree.
//!
//! All matrices here are integer valued with entries in {-1, 0, +1} and are
//! stored column-wise and sparse.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::sparse::CscMatrix;

/// A sparse matrix with entries in {-1, 0, +1}, stored by columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMatrix {
    nrows: usize,
    cols: Vec<Vec<(usize, i8)>>,
}

impl SignedMatrix {
    pub fn new(nrows: usize, mut cols: Vec<Vec<(usize, i8)>>) -> Self {
        for col in &mut cols {
            col.retain(|&(_, s)| s != 0);
            col.sort_unstable_by_key(|&(i, _)| i);
            debug_assert!(col.iter().all(|&(i, s)| i < nrows && s.abs() == 1));
        }
        SignedMatrix { nrows, cols }
    }

    /// From dense columns, e.g. a literal basis `[[0, 1, -1, ...], ...]`.
    pub fn from_dense_columns(nrows: usize, columns: &[Vec<i8>]) -> Result<Self> {
        let mut cols = Vec::with_capacity(columns.len());
        for (j, c) in columns.iter().enumerate() {
            if c.len() != nrows {
                return Err(Error::DimensionMismatch(format!(
                    "column {j} has {} entries, expected {nrows}",
                    c.len()
                )));
            }
            if let Some(v) = c.iter().find(|v| v.abs() > 1) {
                return Err(Error::InvalidInput(format!(
                    "entry {v} in column {j} is not in {{-1, 0, 1}}"
                )));
            }
            cols.push(
                c.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(i, &v)| (i, v))
                    .collect(),
            );
        }
        Ok(SignedMatrix::new(nrows, cols))
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.cols.len()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(Vec::len).sum()
    }

    pub fn column(&self, j: usize) -> &[(usize, i8)] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> i8 {
        match self.cols[j].binary_search_by_key(&i, |&(r, _)| r) {
            Ok(k) => self.cols[j][k].1,
            Err(_) => 0,
        }
    }

    pub fn to_csc(&self) -> CscMatrix {
        let cols = self
            .cols
            .iter()
            .map(|c| c.iter().map(|&(i, s)| (i, f64::from(s))).collect())
            .collect();
        CscMatrix::from_columns(self.nrows, cols)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, s) in col {
                out[(i, j)] = f64::from(s);
            }
        }
        out
    }

    pub fn to_dense_i32(&self) -> DMatrix<i32> {
        let mut out = DMatrix::zeros(self.nrows, self.ncols());
        for (j, col) in self.cols.iter().enumerate() {
            for &(i, s) in col {
                out[(i, j)] = i32::from(s);
            }
        }
        out
    }

    /// Copy with column `j` negated.
    pub fn negate_column(&self, j: usize) -> Self {
        let mut out = self.clone();
        for e in &mut out.cols[j] {
            e.1 = -e.1;
        }
        out
    }
}

/// The node-edge incidence matrix: column `l` has +1 at the tail of line
/// `l` and -1 at its head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    n_nodes: usize,
    tails: Vec<usize>,
    heads: Vec<usize>,
}

impl IncidenceMatrix {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_lines(&self) -> usize {
        self.tails.len()
    }

    pub fn tail(&self, line: usize) -> usize {
        self.tails[line]
    }

    pub fn head(&self, line: usize) -> usize {
        self.heads[line]
    }

    pub fn get(&self, node: usize, line: usize) -> i8 {
        if self.tails[line] == node {
            1
        } else if self.heads[line] == node {
            -1
        } else {
            0
        }
    }

    pub fn to_dense_i32(&self) -> DMatrix<i32> {
        let mut out = DMatrix::zeros(self.n_nodes, self.n_lines());
        for l in 0..self.n_lines() {
            out[(self.tails[l], l)] = 1;
            out[(self.heads[l], l)] = -1;
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.to_dense_i32().map(f64::from)
    }

    pub fn as_signed(&self) -> SignedMatrix {
        let cols = (0..self.n_lines())
            .map(|l| vec![(self.tails[l], 1), (self.heads[l], -1)])
            .collect();
        SignedMatrix::new(self.n_nodes, cols)
    }

    pub fn to_csc(&self) -> CscMatrix {
        self.as_signed().to_csc()
    }

    /// Net outflow at every node for the line flows `flows` (`I * flows`).
    pub fn apply(&self, flows: &[f64]) -> Vec<f64> {
        assert_eq!(flows.len(), self.n_lines());
        let mut out = vec![0.0; self.n_nodes];
        for (l, &f) in flows.iter().enumerate() {
            out[self.tails[l]] += f;
            out[self.heads[l]] -= f;
        }
        out
    }

    /// `I * m` in exact integer arithmetic, as sparse columns.
    pub fn apply_signed(&self, m: &SignedMatrix) -> Vec<Vec<(usize, i64)>> {
        assert_eq!(m.nrows(), self.n_lines());
        (0..m.ncols())
            .map(|j| {
                let mut acc = std::collections::BTreeMap::new();
                for &(l, s) in m.column(j) {
                    *acc.entry(self.tails[l]).or_insert(0i64) += i64::from(s);
                    *acc.entry(self.heads[l]).or_insert(0i64) -= i64::from(s);
                }
                acc.into_iter().filter(|&(_, v)| v != 0).collect()
            })
            .collect()
    }
}

pub fn build_incidence(grid: &Grid) -> IncidenceMatrix {
    IncidenceMatrix {
        n_nodes: grid.n_nodes(),
        tails: grid.branches().iter().map(|b| b.tail).collect(),
        heads: grid.branches().iter().map(|b| b.head).collect(),
    }
}

/// A spanning tree rooted at the slack and its path matrix `T` (L x N):
/// column `r` is the signed edge set of the tree path from the slack to `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpanningTreePaths {
    slack: usize,
    /// `(parent node, line)` for every node but the root.
    parent: Vec<Option<(usize, usize)>>,
    tree_edges: Vec<usize>,
    paths: SignedMatrix,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum TreeStrategy {
    #[default]
    BreadthFirst,
    DepthFirst,
}

impl SpanningTreePaths {
    /// Builds the path matrix for an explicit set of `N - 1` tree lines.
    pub fn from_tree_edges(grid: &Grid, root: usize, tree_edges: &[usize]) -> Result<Self> {
        let n = grid.n_nodes();
        if root >= n {
            return Err(Error::InvalidInput(format!("root {root} out of range")));
        }
        if tree_edges.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "a spanning tree of {n} nodes has {} lines, got {}",
                n - 1,
                tree_edges.len()
            )));
        }
        let mut adj = vec![Vec::new(); n];
        for &l in tree_edges {
            let b = grid
                .branches()
                .get(l)
                .ok_or_else(|| Error::InvalidInput(format!("tree line {l} out of range")))?;
            adj[b.tail].push((b.head, l));
            adj[b.head].push((b.tail, l));
        }
        let parent = search(&adj, root, TreeStrategy::BreadthFirst);
        if let Some(v) = (0..n).find(|&v| v != root && parent[v].is_none()) {
            return Err(Error::InvalidInput(format!(
                "tree lines do not reach bus index {v}"
            )));
        }
        Ok(Self::from_parents(grid, root, parent))
    }

    fn from_parents(grid: &Grid, root: usize, parent: Vec<Option<(usize, usize)>>) -> Self {
        let n = grid.n_nodes();
        let mut tree_edges: Vec<usize> = parent.iter().flatten().map(|&(_, l)| l).collect();
        tree_edges.sort_unstable();
        let cols = (0..n)
            .map(|r| {
                let mut col = Vec::new();
                let mut v = r;
                while let Some((p, l)) = parent[v] {
                    // +1 when the line points away from the root along the path.
                    let sign = if grid.branch(l).tail == p { 1 } else { -1 };
                    col.push((l, sign));
                    v = p;
                }
                col
            })
            .collect();
        SpanningTreePaths {
            slack: root,
            parent,
            tree_edges,
            paths: SignedMatrix::new(grid.n_lines(), cols),
        }
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    /// The path matrix `T`.
    pub fn paths(&self) -> &SignedMatrix {
        &self.paths
    }

    pub fn tree_edges(&self) -> &[usize] {
        &self.tree_edges
    }

    pub fn is_tree_edge(&self, line: usize) -> bool {
        self.tree_edges.binary_search(&line).is_ok()
    }

    pub fn parent(&self, node: usize) -> Option<(usize, usize)> {
        self.parent[node]
    }
}

/// Breadth-first spanning tree rooted at the grid's slack bus.
pub fn build_spanning_tree(grid: &Grid) -> SpanningTreePaths {
    build_spanning_tree_with(grid, grid.slack(), TreeStrategy::BreadthFirst)
}

pub fn build_spanning_tree_with(
    grid: &Grid,
    root: usize,
    strategy: TreeStrategy,
) -> SpanningTreePaths {
    let parent = search(&grid.adjacency(), root, strategy);
    SpanningTreePaths::from_parents(grid, root, parent)
}

fn search(
    adj: &[Vec<(usize, usize)>],
    root: usize,
    strategy: TreeStrategy,
) -> Vec<Option<(usize, usize)>> {
    let n = adj.len();
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    match strategy {
        TreeStrategy::BreadthFirst => {
            let mut queue = VecDeque::from([root]);
            while let Some(u) = queue.pop_front() {
                for &(v, l) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some((u, l));
                        queue.push_back(v);
                    }
                }
            }
        }
        TreeStrategy::DepthFirst => {
            let mut stack = vec![(root, 0usize)];
            while let Some((u, next)) = stack.pop() {
                if let Some(&(v, l)) = adj[u].get(next) {
                    stack.push((u, next + 1));
                    if !seen[v] {
                        seen[v] = true;
                        parent[v] = Some((u, l));
                        stack.push((v, 0));
                    }
                }
            }
        }
    }
    parent
}

/// A cycle basis `C` (L x (L - N + 1)). For a fundamental basis, `chords`
/// lists the non-tree line that generates each column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CycleBasis {
    matrix: SignedMatrix,
    chords: Option<Vec<usize>>,
}

impl CycleBasis {
    /// Wraps an arbitrary basis, checking `I * C = 0` and full column rank.
    pub fn from_matrix(incidence: &IncidenceMatrix, matrix: SignedMatrix) -> Result<Self> {
        if matrix.nrows() != incidence.n_lines() {
            return Err(Error::DimensionMismatch(format!(
                "basis has {} rows, grid has {} lines",
                matrix.nrows(),
                incidence.n_lines()
            )));
        }
        let expected = incidence.n_lines() + 1 - incidence.n_nodes();
        if matrix.ncols() != expected {
            return Err(Error::InvalidInput(format!(
                "a cycle basis needs {expected} columns, got {}",
                matrix.ncols()
            )));
        }
        if let Some(j) = incidence
            .apply_signed(&matrix)
            .iter()
            .position(|c| !c.is_empty())
        {
            return Err(Error::InvalidInput(format!("column {j} is not a cycle")));
        }
        if rank(&matrix.to_dense()) != matrix.ncols() {
            return Err(Error::InvalidInput(
                "basis columns are linearly dependent".into(),
            ));
        }
        Ok(CycleBasis {
            matrix,
            chords: None,
        })
    }

    pub fn matrix(&self) -> &SignedMatrix {
        &self.matrix
    }

    pub fn n_cycles(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_lines(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn chords(&self) -> Option<&[usize]> {
        self.chords.as_deref()
    }

    /// Lines that lie on at least one basis cycle.
    pub fn covered_lines(&self) -> Vec<bool> {
        let mut covered = vec![false; self.n_lines()];
        for j in 0..self.n_cycles() {
            for &(l, _) in self.matrix.column(j) {
                covered[l] = true;
            }
        }
        covered
    }
}

/// Fundamental cycle basis: for each chord `(t, h)` the chord itself (+1)
/// closed by the tree path from `h` back to `t`.
pub fn build_cycle_basis(grid: &Grid, tree: &SpanningTreePaths) -> CycleBasis {
    let t = tree.paths();
    let mut chords = Vec::with_capacity(grid.n_cycles());
    let mut cols = Vec::with_capacity(grid.n_cycles());
    for b in grid.branches() {
        if tree.is_tree_edge(b.index) {
            continue;
        }
        // e_chord + T[:, tail] - T[:, head]; the shared prefix above the
        // common ancestor cancels.
        let mut acc: std::collections::BTreeMap<usize, i8> = Default::default();
        *acc.entry(b.index).or_default() += 1;
        for &(l, s) in t.column(b.tail) {
            *acc.entry(l).or_default() += s;
        }
        for &(l, s) in t.column(b.head) {
            *acc.entry(l).or_default() -= s;
        }
        cols.push(acc.into_iter().filter(|&(_, s)| s != 0).collect());
        chords.push(b.index);
    }
    CycleBasis {
        matrix: SignedMatrix::new(grid.n_lines(), cols),
        chords: Some(chords),
    }
}

/// Whether two bases span the same cycle space, decided by comparing the
/// rank of each with the rank of their concatenation.
pub fn cycle_space_equal(a: &CycleBasis, b: &CycleBasis) -> Result<bool> {
    if a.n_lines() != b.n_lines() {
        return Err(Error::DimensionMismatch(format!(
            "bases over {} and {} lines",
            a.n_lines(),
            b.n_lines()
        )));
    }
    let (da, db) = (a.matrix.to_dense(), b.matrix.to_dense());
    let (ra, rb) = (rank(&da), rank(&db));
    if ra != rb {
        return Ok(false);
    }
    let joint = DMatrix::from_fn(a.n_lines(), da.ncols() + db.ncols(), |i, j| {
        if j < da.ncols() {
            da[(i, j)]
        } else {
            db[(i, j - da.ncols())]
        }
    });
    Ok(rank(&joint) == ra)
}

fn rank(m: &DMatrix<f64>) -> usize {
    if m.is_empty() {
        return 0;
    }
    let svd = m.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * m.nrows().max(m.ncols()) as f64 * 16.0;
    svd.singular_values.iter().filter(|&&s| s > tol).count()
}

/// Lines whose removal disconnects the grid (Tarjan's low-link method).
pub fn find_bridges(grid: &Grid) -> Vec<bool> {
    let n = grid.n_nodes();
    let adj = grid.adjacency();
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut bridge = vec![false; grid.n_lines()];
    let mut time = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = time;
        low[root] = time;
        time += 1;
        // (node, line to parent, next neighbor position)
        let mut stack = vec![(root, usize::MAX, 0usize)];
        while let Some(&mut (u, via, ref mut next)) = stack.last_mut() {
            if let Some(&(v, l)) = adj[u].get(*next) {
                *next += 1;
                if l == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = time;
                    low[v] = time;
                    time += 1;
                    stack.push((v, l, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(p, _, _)) = stack.last() {
                    low[p] = low[p].min(low[u]);
                    if low[u] > disc[p] {
                        bridge[via] = true;
                    }
                }
            }
        }
    }
    bridge
}

/// Everything topological the sensitivity methods need, computed once.
#[derive(Debug, Clone)]
pub struct Topology {
    pub incidence: IncidenceMatrix,
    pub tree: SpanningTreePaths,
    pub cycles: CycleBasis,
    pub bridges: Vec<bool>,
}

impl Topology {
    pub fn build(grid: &Grid) -> Self {
        let tree = build_spanning_tree(grid);
        let cycles = build_cycle_basis(grid, &tree);
        Topology {
            incidence: build_incidence(grid),
            tree,
            cycles,
            bridges: find_bridges(grid),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Branch, Grid};

    fn grid(n: usize, edges: &[(usize, usize)], slack: usize) -> Grid {
        let ids: Vec<i64> = (1..=n as i64).collect();
        let branches = edges
            .iter()
            .enumerate()
            .map(|(i, &(t, h))| Branch::new(i, t, h, 0.1 + 0.01 * i as f64))
            .collect();
        Grid::from_branches("t", &ids, branches, slack).unwrap()
    }

    #[test]
    fn single_line_incidence() {
        let g = grid(2, &[(0, 1)], 0);
        let i = build_incidence(&g).to_dense_i32();
        assert_eq!(i, DMatrix::from_row_slice(2, 1, &[1, -1]));
    }

    #[test]
    fn path_graph_tree_columns() {
        let g = grid(3, &[(0, 1), (1, 2)], 0);
        let tree = build_spanning_tree(&g);
        let t = tree.paths().to_dense_i32();
        assert_eq!(t.column(2).as_slice(), &[1, 1]);
        assert_eq!(t.column(1).as_slice(), &[1, 0]);
        assert_eq!(t.column(0).as_slice(), &[0, 0]);
        // Orientation against the path flips the sign.
        let g = grid(3, &[(1, 0), (1, 2)], 0);
        let t = build_spanning_tree(&g).paths().to_dense_i32();
        assert_eq!(t.column(2).as_slice(), &[-1, 1]);
    }

    #[test]
    fn tree_grid_has_empty_basis_and_all_bridges() {
        let g = grid(4, &[(0, 1), (1, 2), (1, 3)], 2);
        let topo = Topology::build(&g);
        assert_eq!(topo.cycles.n_cycles(), 0);
        assert!(topo.bridges.iter().all(|&b| b));
    }

    #[test]
    fn bridges_of_a_cycle_with_tail() {
        // Triangle 0-1-2 plus pendant 3 and a second triangle 3-4-5 joined by 2-3.
        let g = grid(
            6,
            &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 4), (4, 5), (5, 3)],
            0,
        );
        let bridges = find_bridges(&g);
        assert_eq!(
            bridges,
            vec![false, false, false, true, false, false, false]
        );
        let covered = Topology::build(&g).cycles.covered_lines();
        assert!(covered.iter().zip(&bridges).all(|(&c, &b)| c != b));
    }

    #[test]
    fn chord_coefficient_is_plus_one() {
        let g = grid(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (2, 0)], 0);
        let topo = Topology::build(&g);
        let chords = topo.cycles.chords().unwrap();
        assert_eq!(chords.len(), 2);
        for (j, &chord) in chords.iter().enumerate() {
            assert_eq!(topo.cycles.matrix().get(chord, j), 1);
            for &(l, _) in topo.cycles.matrix().column(j) {
                assert!(l == chord || topo.tree.is_tree_edge(l));
            }
        }
        assert!(topo
            .incidence
            .apply_signed(topo.cycles.matrix())
            .iter()
            .all(Vec::is_empty));
    }

    #[test]
    fn depth_first_tree_differs_but_spans_same_space() {
        let g = grid(
            5,
            &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0), (0, 2), (1, 3)],
            0,
        );
        let bfs = build_spanning_tree(&g);
        let dfs = build_spanning_tree_with(&g, 0, TreeStrategy::DepthFirst);
        assert_ne!(bfs.tree_edges(), dfs.tree_edges());
        let a = build_cycle_basis(&g, &bfs);
        let b = build_cycle_basis(&g, &dfs);
        assert!(cycle_space_equal(&a, &b).unwrap());
        assert!(cycle_space_equal(&a, &a).unwrap());
    }

    #[test]
    fn negated_column_spans_same_space() {
        let g = grid(4, &[(0, 1), (1, 2), (2, 0), (2, 3), (3, 0)], 0);
        let topo = Topology::build(&g);
        let flipped =
            CycleBasis::from_matrix(&topo.incidence, topo.cycles.matrix().negate_column(1))
                .unwrap();
        assert!(cycle_space_equal(&topo.cycles, &flipped).unwrap());
    }

    #[test]
    fn from_matrix_rejects_non_cycles() {
        let g = grid(3, &[(0, 1), (1, 2), (2, 0)], 0);
        let inc = build_incidence(&g);
        let bad = SignedMatrix::from_dense_columns(3, &[vec![1, 1, 0]]).unwrap();
        assert!(CycleBasis::from_matrix(&inc, bad).is_err());
        let good = SignedMatrix::from_dense_columns(3, &[vec![1, 1, 1]]).unwrap();
        assert!(CycleBasis::from_matrix(&inc, good).is_ok());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = Topology::build(&grid(3, &[(0, 1), (1, 2), (2, 0)], 0)).cycles;
        let b = Topology::build(&grid(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], 0)).cycles;
        assert!(matches!(
            cycle_space_equal(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn explicit_tree_edges_are_validated() {
        let g = grid(3, &[(0, 1), (1, 2), (2, 0)], 0);
        assert!(SpanningTreePaths::from_tree_edges(&g, 0, &[0, 2]).is_ok());
        assert!(SpanningTreePaths::from_tree_edges(&g, 0, &[0]).is_err());
    }
}
