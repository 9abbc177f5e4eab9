//! Photonic bath geometries: fractal and control lattices as graphs.
//!
//! Gaskets and the pyramid are vertex graphs of iterated simplex
//! subdivision. Vertices carry exact integer coordinates in a triangular
//! (tetrahedral) basis scaled by `b^g`, so copies that touch share
//! coordinates exactly and are merged by hashing. The Vicsek graph and the
//! carpets are cell graphs: a site is a retained cell of the `side^g` box,
//! edges join orthogonally adjacent cells.
//!
//! Boundary paths are tagged during construction. Each path is a geodesic
//! that starts at a corner (or arm tip), so the position along it equals the
//! chemical distance from its first site.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on the number of sites a spec may produce.
pub const DEFAULT_SITE_CAP: usize = 500_000;

/// A lattice family together with its size parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    Chain {
        length: usize,
    },
    Square {
        side: usize,
    },
    GasketB2 {
        generation: u32,
    },
    GasketB3 {
        generation: u32,
    },
    PyramidB2 {
        generation: u32,
    },
    Vicsek {
        generation: u32,
    },
    /// Sierpinski carpet `(m, n)` with `m = side²` pieces of which a centred
    /// `hole × hole` block (`n = hole²`) is removed at every level.
    Carpet {
        side: u32,
        hole: u32,
        generation: u32,
    },
}

impl FamilySpec {
    /// Carpet from the `(m, n)` piece-count notation, e.g. `(9, 1)` or `(16, 4)`.
    pub fn carpet(pieces: u32, removed: u32, generation: u32) -> Result<Self> {
        let side = exact_sqrt(pieces)
            .ok_or_else(|| Error::InvalidParams(format!("carpet piece count {pieces} is not a perfect square")))?;
        let hole = exact_sqrt(removed)
            .ok_or_else(|| Error::InvalidParams(format!("carpet hole count {removed} is not a perfect square")))?;
        let spec = FamilySpec::Carpet { side, hole, generation };
        spec.validate()?;
        Ok(spec)
    }

    pub fn generation(&self) -> u32 {
        match *self {
            FamilySpec::Chain { .. } | FamilySpec::Square { .. } => 0,
            FamilySpec::GasketB2 { generation }
            | FamilySpec::GasketB3 { generation }
            | FamilySpec::PyramidB2 { generation }
            | FamilySpec::Vicsek { generation }
            | FamilySpec::Carpet { generation, .. } => generation,
        }
    }

    /// Short family token used in file headers and reports.
    pub fn family_name(&self) -> String {
        match *self {
            FamilySpec::Chain { .. } => "chain".into(),
            FamilySpec::Square { .. } => "square".into(),
            FamilySpec::GasketB2 { .. } => "gasket-b2".into(),
            FamilySpec::GasketB3 { .. } => "gasket-b3".into(),
            FamilySpec::PyramidB2 { .. } => "pyramid-b2".into(),
            FamilySpec::Vicsek { .. } => "vicsek".into(),
            FamilySpec::Carpet { side, hole, .. } => {
                format!("carpet-{}-{}", side * side, hole * hole)
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            FamilySpec::Chain { length: 0 } => Err(Error::InvalidParams("chain length must be positive".into())),
            FamilySpec::Square { side: 0 } => Err(Error::InvalidParams("square side must be positive".into())),
            FamilySpec::Carpet { side, hole, .. } => {
                if hole == 0 || hole >= side || (side - hole) % 2 != 0 {
                    return Err(Error::InvalidParams(format!(
                        "carpet hole {hole}x{hole} is not strictly interior and centred in a {side}x{side} subdivision"
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Number of sites the construction produces, from the self-similar
    /// recursion. Saturates instead of overflowing.
    pub fn predicted_sites(&self) -> u64 {
        fn recur(base: u64, copies: u64, merged: u64, g: u32) -> u64 {
            (0..g).fold(base, |n, _| n.saturating_mul(copies).saturating_sub(merged))
        }
        match *self {
            FamilySpec::Chain { length } => length as u64,
            FamilySpec::Square { side } => (side as u64).saturating_mul(side as u64),
            FamilySpec::GasketB2 { generation } => recur(3, 3, 3, generation),
            FamilySpec::GasketB3 { generation } => recur(3, 6, 8, generation),
            FamilySpec::PyramidB2 { generation } => recur(4, 4, 6, generation),
            FamilySpec::Vicsek { generation } => 5u64.saturating_pow(generation),
            FamilySpec::Carpet { side, hole, generation } => {
                ((side * side - hole * hole) as u64).saturating_pow(generation)
            }
        }
    }
}

impl fmt::Display for FamilySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FamilySpec::Chain { length } => write!(f, "chain L={length}"),
            FamilySpec::Square { side } => write!(f, "square L={side}"),
            _ => write!(f, "{} g={}", self.family_name(), self.generation()),
        }
    }
}

fn exact_sqrt(n: u32) -> Option<u32> {
    let r = (n as f64).sqrt().round() as u32;
    (r * r == n).then_some(r)
}

/// Immutable photonic lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    spec: FamilySpec,
    coord_dim: usize,
    coords: Vec<[i64; 3]>,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    boundary_paths: Vec<Vec<usize>>,
    outer: Vec<usize>,
}

impl Graph {
    pub fn spec(&self) -> &FamilySpec {
        &self.spec
    }

    pub fn n_sites(&self) -> usize {
        self.coords.len()
    }

    pub fn neighbors(&self, site: usize) -> &[usize] {
        &self.neighbors[self.offsets[site]..self.offsets[site + 1]]
    }

    pub fn degree(&self, site: usize) -> usize {
        self.offsets[site + 1] - self.offsets[site]
    }

    pub fn n_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in site order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_sites()).flat_map(move |i| self.neighbors(i).iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    /// Integer coordinate tuple of a site (length 1, 2 or 3).
    pub fn coords(&self, site: usize) -> &[i64] {
        &self.coords[site][..self.coord_dim]
    }

    pub fn coord_dim(&self) -> usize {
        self.coord_dim
    }

    /// Tagged boundary paths. Each starts at a corner or arm tip and runs
    /// along a geodesic of the graph.
    pub fn boundary_paths(&self) -> &[Vec<usize>] {
        &self.boundary_paths
    }

    /// Sorted set of sites on the outer boundary (faces for the pyramid,
    /// outer edges for gaskets, bounding-box perimeter for cell graphs,
    /// the two ends for the chain).
    pub fn outer_boundary(&self) -> &[usize] {
        &self.outer
    }

    pub fn is_connected(&self) -> bool {
        self.n_sites() == 0 || chemical_distances(self, 0).dist.iter().all(|&d| d != UNREACHED)
    }

    pub fn degree_histogram(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut hist = std::collections::BTreeMap::new();
        for i in 0..self.n_sites() {
            *hist.entry(self.degree(i)).or_insert(0) += 1;
        }
        hist
    }

    fn from_parts(
        spec: FamilySpec,
        coord_dim: usize,
        coords: Vec<[i64; 3]>,
        mut adj: Vec<Vec<usize>>,
        boundary_paths: Vec<Vec<usize>>,
        mut outer: Vec<usize>,
    ) -> Self {
        let mut offsets = Vec::with_capacity(coords.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in adj.iter_mut() {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        outer.sort_unstable();
        outer.dedup();
        Graph { spec, coord_dim, coords, offsets, neighbors, boundary_paths, outer }
    }
}

/// Builds the lattice for `spec`, refusing specs above `DEFAULT_SITE_CAP`.
pub fn build_graph(spec: &FamilySpec) -> Result<Graph> {
    build_graph_capped(spec, DEFAULT_SITE_CAP)
}

pub fn build_graph_capped(spec: &FamilySpec, cap: usize) -> Result<Graph> {
    spec.validate()?;
    let requested = spec.predicted_sites();
    if requested > cap as u64 {
        return Err(Error::SizeCap { requested, cap });
    }
    let graph = match *spec {
        FamilySpec::Chain { length } => build_chain(spec, length),
        FamilySpec::Square { side } => build_cells(spec, side, |_, _| true),
        FamilySpec::GasketB2 { generation } => build_gasket(spec, 2, generation),
        FamilySpec::GasketB3 { generation } => build_gasket(spec, 3, generation),
        FamilySpec::PyramidB2 { generation } => build_pyramid(spec, generation),
        FamilySpec::Vicsek { generation } => {
            let n = 3usize.pow(generation);
            build_cells(spec, n, |x, y| digits_all(x, y, 3, generation, |a, b| a == 1 || b == 1))
        }
        FamilySpec::Carpet { side, hole, generation } => {
            let n = (side as usize).pow(generation);
            let lo = ((side - hole) / 2) as usize;
            let hi = lo + hole as usize;
            build_cells(spec, n, |x, y| {
                digits_all(x, y, side as usize, generation, |a, b| !(lo <= a && a < hi && lo <= b && b < hi))
            })
        }
    };
    debug_assert_eq!(graph.n_sites() as u64, requested);
    Ok(graph)
}

/// True when every base-`base` digit pair of `(x, y)` satisfies `keep`.
fn digits_all(mut x: usize, mut y: usize, base: usize, levels: u32, keep: impl Fn(usize, usize) -> bool) -> bool {
    for _ in 0..levels {
        if !keep(x % base, y % base) {
            return false;
        }
        x /= base;
        y /= base;
    }
    true
}

fn build_chain(spec: &FamilySpec, length: usize) -> Graph {
    let coords = (0..length as i64).map(|i| [i, 0, 0]).collect();
    let adj = (0..length)
        .map(|i| {
            let mut v = Vec::with_capacity(2);
            if i > 0 {
                v.push(i - 1);
            }
            if i + 1 < length {
                v.push(i + 1);
            }
            v
        })
        .collect();
    let outer = vec![0, length - 1];
    Graph::from_parts(*spec, 1, coords, adj, vec![(0..length).collect()], outer)
}

/// Cell graph on an `n × n` box keeping the cells accepted by `keep`.
/// Sites are numbered in row-major order (y outer, x inner).
fn build_cells(spec: &FamilySpec, n: usize, keep: impl Fn(usize, usize) -> bool) -> Graph {
    let mut index = vec![usize::MAX; n * n];
    let mut coords = Vec::new();
    for y in 0..n {
        for x in 0..n {
            if keep(x, y) {
                index[y * n + x] = coords.len();
                coords.push([x as i64, y as i64, 0]);
            }
        }
    }
    let id = |x: usize, y: usize| index[y * n + x];
    let mut adj = vec![Vec::with_capacity(4); coords.len()];
    for (site, c) in coords.iter().enumerate() {
        let (x, y) = (c[0] as usize, c[1] as usize);
        if x + 1 < n && id(x + 1, y) != usize::MAX {
            adj[site].push(id(x + 1, y));
            adj[id(x + 1, y)].push(site);
        }
        if y + 1 < n && id(x, y + 1) != usize::MAX {
            adj[site].push(id(x, y + 1));
            adj[id(x, y + 1)].push(site);
        }
    }

    let last = n - 1;
    let (paths, outer) = if let FamilySpec::Vicsek { .. } = spec {
        // Axes of the top-level cross, tip to opposite tip.
        let c = last / 2;
        let paths: Vec<Vec<usize>> =
            vec![(0..=last).map(|x| id(x, c)).collect(), (0..=last).map(|y| id(c, y)).collect()];
        let mut outer: Vec<usize> = paths.iter().flat_map(|p| [p[0], p[last]]).collect();
        outer.sort_unstable();
        (paths, outer)
    } else {
        let paths: Vec<Vec<usize>> = vec![
            (0..=last).map(|x| id(x, 0)).collect(),
            (0..=last).map(|y| id(last, y)).collect(),
            (0..=last).rev().map(|x| id(x, last)).collect(),
            (0..=last).rev().map(|y| id(0, y)).collect(),
        ];
        let outer = paths.iter().flatten().copied().collect();
        (paths, outer)
    };
    Graph::from_parts(*spec, 2, coords, adj, paths, outer)
}

/// Iterates a simplex substitution rule: generation `g` is the union of
/// copies of generation `g - 1` translated by `offsets · scale^(g-1)`.
/// Vertices with equal coordinates are merged.
fn iterate_simplex(
    base: Vec<[i64; 3]>,
    base_edges: Vec<(usize, usize)>,
    offsets: &[[i64; 3]],
    scale: i64,
    generation: u32,
) -> (Vec<[i64; 3]>, Vec<(usize, usize)>) {
    let mut coords = base;
    let mut edges = base_edges;
    let mut unit = 1i64;
    for _ in 0..generation {
        let mut lookup: HashMap<[i64; 3], usize> = HashMap::with_capacity(coords.len() * offsets.len());
        let mut next_coords = Vec::with_capacity(coords.len() * offsets.len());
        let mut next_edges = Vec::with_capacity(edges.len() * offsets.len());
        for off in offsets {
            let ids: Vec<usize> = coords
                .iter()
                .map(|c| {
                    let p = [c[0] + off[0] * unit, c[1] + off[1] * unit, c[2] + off[2] * unit];
                    *lookup.entry(p).or_insert_with(|| {
                        next_coords.push(p);
                        next_coords.len() - 1
                    })
                })
                .collect();
            next_edges.extend(edges.iter().map(|&(a, b)| (ids[a], ids[b])));
        }
        coords = next_coords;
        edges = next_edges;
        unit *= scale;
    }
    (coords, edges)
}

fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    adj
}

fn build_gasket(spec: &FamilySpec, b: i64, generation: u32) -> Graph {
    let base = vec![[0, 0, 0], [1, 0, 0], [0, 1, 0]];
    let offsets: Vec<[i64; 3]> = (0..b).flat_map(|j| (0..b - j).map(move |i| [i, j, 0])).collect();
    let (coords, edges) = iterate_simplex(base, vec![(0, 1), (1, 2), (0, 2)], &offsets, b, generation);
    let side = b.pow(generation);
    let lookup: HashMap<[i64; 3], usize> = coords.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let at = |i: i64, j: i64| lookup[&[i, j, 0]];
    let paths = vec![
        (0..=side).map(|k| at(k, 0)).collect::<Vec<_>>(),
        (0..=side).map(|k| at(side - k, k)).collect(),
        (0..=side).map(|k| at(0, side - k)).collect(),
    ];
    let outer = paths.iter().flatten().copied().collect();
    let adj = adjacency_from_edges(coords.len(), &edges);
    Graph::from_parts(*spec, 2, coords, adj, paths, outer)
}

fn build_pyramid(spec: &FamilySpec, generation: u32) -> Graph {
    let base = vec![[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let base_edges = vec![(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)];
    let offsets = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let (coords, edges) = iterate_simplex(base, base_edges, &offsets, 2, generation);
    let side = 2i64.pow(generation);
    let lookup: HashMap<[i64; 3], usize> = coords.iter().enumerate().map(|(i, c)| (*c, i)).collect();
    let at = |p: [i64; 3]| lookup[&p];
    let paths = vec![
        (0..=side).map(|k| at([k, 0, 0])).collect::<Vec<_>>(),
        (0..=side).map(|k| at([0, k, 0])).collect(),
        (0..=side).map(|k| at([0, 0, k])).collect(),
        (0..=side).map(|k| at([side - k, k, 0])).collect(),
        (0..=side).map(|k| at([side - k, 0, k])).collect(),
        (0..=side).map(|k| at([0, side - k, k])).collect(),
    ];
    let outer = coords
        .iter()
        .enumerate()
        .filter(|(_, c)| c[0] == 0 || c[1] == 0 || c[2] == 0 || c[0] + c[1] + c[2] == side)
        .map(|(i, _)| i)
        .collect();
    let adj = adjacency_from_edges(coords.len(), &edges);
    Graph::from_parts(*spec, 3, coords, adj, paths, outer)
}

/// Marker for sites not reached by a search.
pub const UNREACHED: u32 = u32::MAX;

/// Shortest-path hop counts from a source site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceField {
    pub source: usize,
    pub dist: Vec<u32>,
}

pub fn chemical_distances(graph: &Graph, source: usize) -> DistanceField {
    assert!(source < graph.n_sites(), "source {source} out of range");
    DistanceField { source, dist: bfs(graph, &[source], u32::MAX) }
}

/// Sites within `max_dist` hops of `source`, paired with their distance,
/// in BFS discovery order.
pub fn ball(graph: &Graph, source: usize, max_dist: u32) -> Vec<(usize, u32)> {
    let mut seen: HashMap<usize, u32> = HashMap::new();
    let mut order = vec![(source, 0)];
    seen.insert(source, 0);
    let mut head = 0;
    while head < order.len() {
        let (site, d) = order[head];
        head += 1;
        if d == max_dist {
            continue;
        }
        for &nb in graph.neighbors(site) {
            if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(nb) {
                e.insert(d + 1);
                order.push((nb, d + 1));
            }
        }
    }
    order
}

/// Multi-source BFS; sites further than `max_dist` stay `UNREACHED`.
fn bfs(graph: &Graph, sources: &[usize], max_dist: u32) -> Vec<u32> {
    let mut dist = vec![UNREACHED; graph.n_sites()];
    let mut queue = VecDeque::new();
    for &s in sources {
        if dist[s] != 0 {
            dist[s] = 0;
            queue.push_back(s);
        }
    }
    while let Some(site) = queue.pop_front() {
        let d = dist[site];
        if d >= max_dist {
            continue;
        }
        for &nb in graph.neighbors(site) {
            if dist[nb] == UNREACHED {
                dist[nb] = d + 1;
                queue.push_back(nb);
            }
        }
    }
    dist
}

/// Boundary path starting at `anchor`. An anchor at the start or end of a
/// tagged path yields that path oriented away from it; an interior anchor
/// yields the longer of its two halves.
pub fn boundary_path(graph: &Graph, anchor: usize) -> Result<Vec<usize>> {
    let mut best: Option<Vec<usize>> = None;
    for path in graph.boundary_paths() {
        let Some(pos) = path.iter().position(|&s| s == anchor) else { continue };
        let forward: Vec<usize> = path[pos..].to_vec();
        let backward: Vec<usize> = path[..=pos].iter().rev().copied().collect();
        let cand = if backward.len() > forward.len() { backward } else { forward };
        if best.as_ref().is_none_or(|b| cand.len() > b.len()) {
            best = Some(cand);
        }
    }
    best.ok_or(Error::NotOnBoundary(anchor))
}

/// Sites whose chemical distance to the outer boundary exceeds `r_bulk`,
/// in ascending site order. May be empty.
pub fn bulk_sites(graph: &Graph, r_bulk: u32) -> Vec<usize> {
    let dist = bfs(graph, graph.outer_boundary(), u32::MAX);
    (0..graph.n_sites()).filter(|&i| dist[i] != UNREACHED && dist[i] > r_bulk).collect()
}

/// Dimensional exponents of a lattice family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractalDimensions {
    pub d_f: f64,
    pub d_w: f64,
    pub d_s: f64,
    /// Near-field exponent; absent for the marginal two-dimensional lattice.
    pub beta: Option<f64>,
}

/// Tabulated fractal, walk and spectral dimensions with the near-field
/// exponent `beta = d_w - d_f`.
pub fn table_dimensions(spec: &FamilySpec) -> Result<FractalDimensions> {
    let row = |d_f, d_w, d_s, beta| Ok(FractalDimensions { d_f, d_w, d_s, beta });
    match *spec {
        FamilySpec::Chain { .. } => row(1.00, 2.00, 1.00, Some(1.00)),
        FamilySpec::Square { .. } => row(2.00, 2.00, 2.00, None),
        FamilySpec::Carpet { side: 3, hole: 1, .. } => row(1.89, 2.10, 1.80, Some(0.20)),
        FamilySpec::Carpet { side: 4, hole: 2, .. } => row(1.79, 2.16, 1.66, Some(0.37)),
        FamilySpec::GasketB2 { .. } => row(1.58, 2.32, 1.36, Some(0.74)),
        FamilySpec::GasketB3 { .. } => row(1.63, 2.32, 1.40, Some(0.69)),
        FamilySpec::PyramidB2 { .. } => row(2.00, 2.58, 1.55, Some(0.58)),
        FamilySpec::Vicsek { .. } => row(1.46, 2.46, 1.19, Some(1.00)),
        FamilySpec::Carpet { .. } => Err(Error::NoTableEntry(spec.family_name())),
    }
}
