//! Graded graph approximations `V_m` of the Sierpinski gasket in `R^{N-1}`.
//!
//! Points are kept in barycentric integer coordinates with respect to the
//! corners `p_1..p_N`: a level-`m` point is `b / 2^m` with `b_i >= 0` and
//! `Σ b_i = 2^m`. The map `S_i(x) = x/2 + p_i/2` sends `b` at level `m` to
//! `b + 2^m e_i` at level `m + 1`, so the whole construction is exact.
//! Because the corners form a unit-edge simplex,
//! `|x - y|^2 = ½ Σ (b_i - c_i)^2 / 4^m`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default upper bound on the number of vertices of a constructed graph.
pub const DEFAULT_VERTEX_CAP: usize = 5_000_000;

/// A vertex of `V_m` in exact barycentric coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    level: u32,
    bary: Vec<u64>,
}

impl Point {
    /// The corner `p_{i+1}` (zero-based `i`) as a level-0 point.
    pub fn corner(n: usize, i: usize) -> Point {
        let mut bary = vec![0; n];
        bary[i] = 1;
        Point { level: 0, bary }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Barycentric numerators; the coordinates are these over `2^level`.
    pub fn barycentric(&self) -> &[u64] {
        &self.bary
    }

    /// `S_i(self)` for a zero-based map index `i`.
    pub fn map(&self, i: usize) -> Point {
        let mut bary = self.bary.clone();
        bary[i] += 1u64 << self.level;
        Point {
            level: self.level + 1,
            bary,
        }
    }

    /// The same point expressed at the next level.
    pub fn lift(&self) -> Point {
        Point {
            level: self.level + 1,
            bary: self.bary.iter().map(|b| 2 * b).collect(),
        }
    }

    /// Midpoint of two same-level points, one level down.
    pub fn midpoint(a: &Point, b: &Point) -> Point {
        debug_assert_eq!(a.level, b.level);
        Point {
            level: a.level + 1,
            bary: a.bary.iter().zip(&b.bary).map(|(x, y)| x + y).collect(),
        }
    }

    /// `Σ (b_i - c_i)^2`; the squared distance is this over `2 · 4^level`.
    /// Both points must live on the same level.
    pub fn barycentric_gap(&self, other: &Point) -> u128 {
        debug_assert_eq!(self.level, other.level);
        self.bary
            .iter()
            .zip(&other.bary)
            .map(|(&a, &b)| {
                let d = a.abs_diff(b) as u128;
                d * d
            })
            .sum()
    }

    pub fn distance_sq(&self, other: &Point) -> f64 {
        let gap = self.barycentric_gap(other) as f64;
        gap / 2.0 * 4f64.powi(-(self.level as i32))
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.distance_sq(other).sqrt()
    }

    /// Cartesian coordinates given the corner positions from [`simplex_corners`].
    pub fn euclidean(&self, corners: &[Vec<f64>]) -> Vec<f64> {
        let dim = corners.first().map_or(0, Vec::len);
        let scale = 2f64.powi(-(self.level as i32));
        let mut x = vec![0.0; dim];
        for (b, p) in self.bary.iter().zip(corners) {
            let t = *b as f64 * scale;
            for (xk, pk) in x.iter_mut().zip(p) {
                *xk += t * pk;
            }
        }
        x
    }
}

/// Corners of the unit-edge simplex in `R^{N-1}`: `p_1` at the origin,
/// `p_2 = e_1`, and so on (Cholesky factor of the Gram matrix of `p_i - p_1`).
pub fn simplex_corners(n: usize) -> Vec<Vec<f64>> {
    let dim = n.saturating_sub(1);
    // Rows of the lower-triangular factor L with L L^T = G, G_ii = 1, G_ij = 1/2.
    let mut l = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let gij = if i == j { 1.0 } else { 0.5 };
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][j] = (gij - s).sqrt();
            } else {
                l[i][j] = (gij - s) / l[j][j];
            }
        }
    }
    let mut corners = Vec::with_capacity(n);
    corners.push(vec![0.0; dim]);
    corners.extend(l);
    corners
}

/// A word `w_1 … w_m` over `{1..N}` naming the cell `S_{w_1} ∘ … ∘ S_{w_m}(V)`.
/// Letters are stored zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellAddress(Vec<u8>);

impl CellAddress {
    /// Builds an address from one-based letters, as written in the literature.
    pub fn from_letters(n: usize, letters: &[usize]) -> Result<Self> {
        letters
            .iter()
            .map(|&l| {
                if (1..=n).contains(&l) {
                    Ok((l - 1) as u8)
                } else {
                    Err(Error::UnknownCell(format!("{letters:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(CellAddress)
    }

    pub fn root() -> Self {
        CellAddress(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// One-based letters.
    pub fn letters(&self) -> Vec<usize> {
        self.0.iter().map(|&l| l as usize + 1).collect()
    }

    fn from_index(n: usize, level: u32, mut k: usize) -> Self {
        let mut word = vec![0u8; level as usize];
        for slot in word.iter_mut().rev() {
            *slot = (k % n) as u8;
            k /= n;
        }
        CellAddress(word)
    }

    fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |k, &l| k * n + l as usize)
    }
}

impl std::fmt::Display for CellAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.letters().iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

/// The vertex/edge/cell structure of `V_m`.
///
/// Vertices are sorted lexicographically by barycentric tuple. Cells are
/// stored in lexicographic order of their words, so the `k`-th cell's word is
/// `k` written in base `N` with `m` digits.
#[derive(Clone, Debug)]
pub struct LevelGraph {
    n: usize,
    level: u32,
    points: Vec<Point>,
    edges: Vec<[usize; 2]>,
    boundary: Vec<usize>,
    /// Flat member list, stride `n`; member `j` of a cell is `S_w(p_{j+1})`.
    cell_members: Vec<usize>,
    multiplicity: Vec<u8>,
    adj_offsets: Vec<usize>,
    adj: Vec<usize>,
}

/// `|V_m|` from `|V_m| = N |V_{m-1}| - N(N-1)/2`, saturating.
pub fn vertex_count(n: usize, m: u32) -> u128 {
    let n = n as u128;
    let shared = n * (n - 1) / 2;
    let mut v = n;
    for _ in 0..m {
        v = v.saturating_mul(n).saturating_sub(shared);
    }
    v
}

fn check_params(n: usize, m: u32, cap: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "N must be >= 2 (got {n})"
        )));
    }
    if m > 60 {
        return Err(Error::ResourceLimit {
            what: "level",
            needed: m as u128,
            cap: 60,
        });
    }
    let needed = vertex_count(n, m);
    if needed > cap as u128 {
        return Err(Error::ResourceLimit {
            what: "vertex count",
            needed,
            cap,
        });
    }
    Ok(())
}

/// Builds `V_m` for the gasket with `N` corners, enumerating all words of
/// length `m` directly.
pub fn build_gasket(n: usize, m: u32) -> Result<LevelGraph> {
    build_gasket_with_cap(n, m, DEFAULT_VERTEX_CAP)
}

pub fn build_gasket_with_cap(n: usize, m: u32, cap: usize) -> Result<LevelGraph> {
    check_params(n, m, cap)?;
    let cells = n.pow(m);
    let mut cell_points = Vec::with_capacity(cells * n);
    for k in 0..cells {
        let word = CellAddress::from_index(n, m, k);
        let mut offset = vec![0u64; n];
        for (j, &l) in word.0.iter().enumerate() {
            offset[l as usize] += 1u64 << (m as usize - 1 - j);
        }
        for i in 0..n {
            let mut bary = offset.clone();
            bary[i] += 1;
            cell_points.push(Point { level: m, bary });
        }
    }
    Ok(LevelGraph::assemble(n, m, cell_points))
}

/// Builds `V_{m+1} = ⋃_i S_i(V_m)` from `g`, returning the new graph and the
/// index of every old vertex in it.
pub fn refine(g: &LevelGraph) -> Result<(LevelGraph, Vec<usize>)> {
    refine_with_cap(g, DEFAULT_VERTEX_CAP)
}

pub fn refine_with_cap(g: &LevelGraph, cap: usize) -> Result<(LevelGraph, Vec<usize>)> {
    let n = g.n;
    check_params(n, g.level + 1, cap)?;
    let mut cell_points = Vec::with_capacity(g.cell_members.len() * n);
    for i in 0..n {
        for &v in &g.cell_members {
            cell_points.push(g.points[v].map(i));
        }
    }
    let fine = LevelGraph::assemble(n, g.level + 1, cell_points);
    let map = g
        .points
        .iter()
        .map(|p| {
            fine.index_of(&p.lift())
                .expect("V_m is contained in V_{m+1}")
        })
        .collect();
    Ok((fine, map))
}

impl LevelGraph {
    fn assemble(n: usize, level: u32, cell_points: Vec<Point>) -> LevelGraph {
        let mut points = cell_points.clone();
        points.sort_unstable();
        points.dedup();

        let index = |p: &Point| points.binary_search(p).expect("point was inserted");
        let cell_members: Vec<usize> = cell_points.iter().map(index).collect();

        let mut multiplicity = vec![0u8; points.len()];
        for &v in &cell_members {
            multiplicity[v] += 1;
        }

        let mut edges = Vec::with_capacity(cell_members.len() / n * n * (n - 1) / 2);
        for cell in cell_members.chunks_exact(n) {
            for i in 0..n {
                for j in i + 1..n {
                    let (a, b) = (cell[i], cell[j]);
                    debug_assert_eq!(points[a].barycentric_gap(&points[b]), 2);
                    edges.push([a.min(b), a.max(b)]);
                }
            }
        }
        edges.sort_unstable();
        debug_assert!(edges.windows(2).all(|w| w[0] != w[1]));

        let side = 1u64 << level;
        let boundary = (0..n)
            .map(|i| {
                let mut bary = vec![0; n];
                bary[i] = side;
                index(&Point { level, bary })
            })
            .collect();

        let mut degree = vec![0usize; points.len()];
        for &[a, b] in &edges {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(points.len() + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![0; 2 * edges.len()];
        for &[a, b] in &edges {
            adj[fill[a]] = b;
            fill[a] += 1;
            adj[fill[b]] = a;
            fill[b] += 1;
        }

        LevelGraph {
            n,
            level,
            points,
            edges,
            boundary,
            cell_members,
            multiplicity,
            adj_offsets,
            adj,
        }
    }

    /// Number of corners `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.points.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cell_members.len() / self.n
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, v: usize) -> &Point {
        &self.points[v]
    }

    /// Edges `[i, j]` with `i < j`, sorted.
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Indices of `p_1..p_N`, in corner order.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary.contains(&v)
    }

    /// Non-boundary vertex indices in ascending order.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.points.len())
            .filter(|v| !self.is_boundary(*v))
            .collect()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_offsets[v + 1] - self.adj_offsets[v]
    }

    /// Number of level-`m` cells containing vertex `v` (1 or 2).
    pub fn multiplicity(&self, v: usize) -> u8 {
        self.multiplicity[v]
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        self.points.binary_search(p).ok()
    }

    /// Iterates `(address, members)` over all cells in word order.
    pub fn cells(&self) -> impl Iterator<Item = (CellAddress, &[usize])> + '_ {
        self.cell_members
            .chunks_exact(self.n)
            .enumerate()
            .map(|(k, m)| (CellAddress::from_index(self.n, self.level, k), m))
    }

    /// Members of the `k`-th cell in word order.
    pub fn cell_by_index(&self, k: usize) -> &[usize] {
        &self.cell_members[k * self.n..(k + 1) * self.n]
    }

    /// The `N` vertices `S_w(p_1), …, S_w(p_N)` of the cell with address `w`.
    pub fn cell_members(&self, addr: &CellAddress) -> Result<&[usize]> {
        if addr.len() != self.level as usize || addr.0.iter().any(|&l| l as usize >= self.n) {
            return Err(Error::UnknownCell(addr.to_string()));
        }
        Ok(self.cell_by_index(addr.index(self.n)))
    }

    /// For every vertex `x` of `self` (level `m`), the index of `S_i(x)` in
    /// `fine`, which must be the level-`m+1` graph.
    pub fn image_indices(&self, fine: &LevelGraph, i: usize) -> Result<Vec<usize>> {
        if fine.level != self.level + 1 || fine.n != self.n || i >= self.n {
            return Err(Error::InvalidParameter(format!(
                "image under S_{} needs a level-{} graph with N={}",
                i + 1,
                self.level + 1,
                self.n
            )));
        }
        Ok(self
            .points
            .iter()
            .map(|p| fine.index_of(&p.map(i)).expect("S_i(V_m) ⊂ V_{m+1}"))
            .collect())
    }

    /// Cartesian coordinates of every vertex, in vertex order.
    pub fn euclidean_coords(&self) -> Vec<Vec<f64>> {
        let corners = simplex_corners(self.n);
        self.points.iter().map(|p| p.euclidean(&corners)).collect()
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            n: self.n,
            m: self.level,
            vertices: self.points.iter().map(|p| p.bary.clone()).collect(),
            euclidean: self.euclidean_coords(),
            edges: self.edges.clone(),
            boundary: self.boundary.clone(),
            cells: self
                .cells()
                .map(|(w, members)| CellExport {
                    word: w.letters(),
                    members: members.to_vec(),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CellExport {
    pub word: Vec<usize>,
    pub members: Vec<usize>,
}

/// JSON layout of an exported graph.
#[derive(Debug, Serialize)]
pub struct GraphExport {
    #[serde(rename = "N")]
    pub n: usize,
    pub m: u32,
    pub vertices: Vec<Vec<u64>>,
    pub euclidean: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
    pub boundary: Vec<usize>,
    pub cells: Vec<CellExport>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    /// Independent oracle: apply every word of length m to every corner and
    /// deduplicate by exact coordinates.
    fn word_images(n: usize, m: u32) -> BTreeSet<Vec<u64>> {
        let mut set: BTreeSet<Vec<u64>> = (0..n).map(|i| Point::corner(n, i).bary).collect();
        for level in 0..m {
            let mut next = BTreeSet::new();
            for b in &set {
                for i in 0..n {
                    let mut c = b.clone();
                    c[i] += 1 << level;
                    next.insert(c);
                }
            }
            set = next;
        }
        set
    }

    #[test]
    fn level_zero_triangle() {
        let g = build_gasket(3, 0).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.edges().len(), 3);
        assert_eq!(g.num_cells(), 1);
        assert_eq!(g.boundary().len(), 3);
    }

    #[test]
    fn level_two_triangle_matches_word_oracle() {
        let g = build_gasket(3, 2).unwrap();
        assert_eq!(g.num_vertices(), 15);
        assert_eq!(g.edges().len(), 27);
        assert_eq!(g.num_cells(), 9);
        let oracle = word_images(3, 2);
        let got: BTreeSet<Vec<u64>> = g.points().iter().map(|p| p.bary.clone()).collect();
        assert_eq!(got, oracle);
    }

    #[test]
    fn interval_is_dyadic_grid() {
        let g = build_gasket(2, 3).unwrap();
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.edges().len(), 8);
        let xs: Vec<f64> = g.euclidean_coords().iter().map(|x| x[0]).collect();
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
        assert_eq!(sorted, expected);
    }

    #[test]
    fn refine_level_zero() {
        let g0 = build_gasket(3, 0).unwrap();
        let (g1, map) = refine(&g0).unwrap();
        assert_eq!(g1.num_vertices(), 6);
        for (old, &new) in map.iter().enumerate() {
            assert_eq!(g1.point(new), &g0.point(old).lift());
        }

        let (g, _) = refine(&build_gasket(2, 0).unwrap()).unwrap();
        let xs: Vec<f64> = g.euclidean_coords().iter().map(|x| x[0]).collect();
        assert_eq!(xs.len(), 3);
        assert!(xs.contains(&0.0) && xs.contains(&0.5) && xs.contains(&1.0));
    }

    #[test]
    fn refine_twice_equals_direct_build() {
        for n in 2..=5 {
            let g0 = build_gasket(n, 0).unwrap();
            let (g1, _) = refine(&g0).unwrap();
            let (g2, _) = refine(&g1).unwrap();
            let direct = build_gasket(n, 2).unwrap();
            assert_eq!(g2.points(), direct.points());
            assert_eq!(g2.edges(), direct.edges());
            assert_eq!(g2.boundary(), direct.boundary());
            assert_eq!(g2.cell_members, direct.cell_members);
        }
    }

    #[test]
    fn cell_members_examples() {
        let g = build_gasket(3, 0).unwrap();
        assert_eq!(g.cell_members(&CellAddress::root()).unwrap(), g.boundary());

        let g = build_gasket(3, 1).unwrap();
        let members = g
            .cell_members(&CellAddress::from_letters(3, &[1]).unwrap())
            .unwrap();
        let bary: Vec<&[u64]> = members.iter().map(|&v| g.point(v).barycentric()).collect();
        // p_1, (p_1+p_2)/2, (p_1+p_3)/2 at level 1
        assert_eq!(bary, vec![&[2, 0, 0][..], &[1, 1, 0][..], &[1, 0, 1][..]]);

        assert!(g.cell_members(&CellAddress::root()).is_err());
        assert!(CellAddress::from_letters(3, &[4]).is_err());
    }

    #[test]
    fn incidence_tally() {
        for (n, m) in [(2, 4), (3, 3), (4, 2)] {
            let g = build_gasket(n, m).unwrap();
            let mut tally = vec![0usize; g.num_vertices()];
            for (_, members) in g.cells() {
                for &v in members {
                    tally[v] += 1;
                }
            }
            for v in 0..g.num_vertices() {
                let expected = if g.is_boundary(v) { 1 } else { 2 };
                assert_eq!(tally[v], expected);
                assert_eq!(g.multiplicity(v) as usize, expected);
            }
        }
    }

    #[test]
    fn counts_and_edge_lengths() {
        for n in 2..=5usize {
            for m in 0..=4u32 {
                let g = build_gasket(n, m).unwrap();
                assert_eq!(g.edges().len(), n.pow(m) * n * (n - 1) / 2);
                assert_eq!(g.num_vertices() as u128, vertex_count(n, m));
                for &[a, b] in g.edges() {
                    // squared length 4^{-m} exactly: gap 2 over 2·4^m
                    assert_eq!(g.point(a).barycentric_gap(g.point(b)), 2);
                }
            }
        }
        for m in 0..=6 {
            let g = build_gasket(3, m).unwrap();
            assert_eq!(g.num_vertices(), (3usize.pow(m + 1) + 3) / 2);
        }
    }

    #[test]
    fn self_similarity_is_exact() {
        for n in 2..=4 {
            let coarse = build_gasket(n, 2).unwrap();
            let fine = build_gasket(n, 3).unwrap();
            let mut union = BTreeSet::new();
            for i in 0..n {
                for p in coarse.points() {
                    union.insert(p.map(i));
                }
            }
            let fine_set: BTreeSet<Point> = fine.points().iter().cloned().collect();
            assert_eq!(union, fine_set);
        }
    }

    #[test]
    fn corners_are_unit_simplex() {
        for n in 2..=6 {
            let c = simplex_corners(n);
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let d: f64 = c[i].iter().zip(&c[j]).map(|(a, b)| (a - b).powi(2)).sum();
                        assert!((d - 1.0).abs() < 1e-14);
                    }
                }
            }
        }
        let g = build_gasket(3, 3).unwrap();
        let xs = g.euclidean_coords();
        for &[a, b] in g.edges() {
            let d: f64 = xs[a].iter().zip(&xs[b]).map(|(p, q)| (p - q).powi(2)).sum();
            assert!((d.sqrt() - 0.125).abs() < 1e-14);
        }
    }

    fn components(g: &LevelGraph, removed: &[usize]) -> usize {
        let mut seen = vec![false; g.num_vertices()];
        for &r in removed {
            seen[r] = true;
        }
        let mut count = 0;
        for s in 0..g.num_vertices() {
            if seen[s] {
                continue;
            }
            count += 1;
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(v) = stack.pop() {
                for &w in g.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }

    #[test]
    fn connectivity() {
        for n in 2..=4 {
            for m in 0..=3 {
                let g = build_gasket(n, m).unwrap();
                assert_eq!(components(&g, &[]), 1);
                if m >= 1 && n >= 3 {
                    assert_eq!(components(&g, g.boundary()), 1);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(build_gasket(1, 2), Err(Error::InvalidParameter(_))));
        assert!(matches!(
            build_gasket_with_cap(3, 5, 100),
            Err(Error::ResourceLimit { .. })
        ));
        let g = build_gasket(3, 4).unwrap();
        assert!(matches!(refine_with_cap(&g, 200), Err(Error::ResourceLimit { .. })));
    }

    #[test]
    fn vertex_ordering_is_lexicographic() {
        let g = build_gasket(4, 3).unwrap();
        assert!(g.points().windows(2).all(|w| w[0].bary < w[1].bary));
    }

    #[test]
    fn export_shape() {
        let g = build_gasket(3, 1).unwrap();
        let e = g.export();
        assert_eq!(e.n, 3);
        assert_eq!(e.vertices.len(), 6);
        assert_eq!(e.cells.len(), 3);
        assert_eq!(e.cells[2].word, vec![3]);
    }
}
