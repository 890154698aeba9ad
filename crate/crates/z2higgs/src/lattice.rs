//! Trivalent lattices: hexagonal flakes, brick-wall patches, and 1-D
//! chains/cycles, with the qubit numbering used by every other module.
//!
//! Matter qubits come first in row-major coordinate order, then gauge
//! qubits in sorted endpoint order, so bitstrings are reproducible
//! across runs and machines.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::pauli::{Pauli, PauliString};
use crate::{Error, Result};

/// Which construction produced the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LatticeKind {
    /// Hexagonal flower with `radius` rings around a central hexagon
    /// (1, 7, 19, ... plaquettes).
    Flake { radius: usize },
    /// rows x cols parallelogram of hexagonal plaquettes in brick-wall
    /// arrangement.
    Brick { rows: usize, cols: usize },
    /// Open (1+1)-D chain of `nodes` matter sites (endpoints have
    /// degree 1; the trivalent invariant is relaxed for chains).
    Chain { nodes: usize },
    /// Closed ring of `nodes` matter sites.
    Cycle { nodes: usize },
}

impl fmt::Display for LatticeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatticeKind::Flake { radius } => write!(f, "flake({radius})"),
            LatticeKind::Brick { rows, cols } => write!(f, "brick({rows},{cols})"),
            LatticeKind::Chain { nodes } => write!(f, "chain({nodes})"),
            LatticeKind::Cycle { nodes } => write!(f, "cycle({nodes})"),
        }
    }
}

/// Immutable lattice graph. Node ids double as matter-qubit indices;
/// gauge qubit of edge `e` is `num_nodes() + e`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Lattice {
    kind: LatticeKind,
    /// Integer plotting coordinates per node, sorted row-major (y, x).
    coords: Vec<(i64, i64)>,
    /// Edges as (u, v) with u < v, sorted lexicographically.
    edges: Vec<(usize, usize)>,
    /// Incident edge ids per node.
    incidence: Vec<Vec<usize>>,
}

impl Lattice {
    /// Build the lattice described by a kind tag.
    pub fn from_kind(kind: LatticeKind) -> Lattice {
        match kind {
            LatticeKind::Flake { radius } => Lattice::flake(radius),
            LatticeKind::Brick { rows, cols } => Lattice::brick(rows, cols),
            LatticeKind::Chain { nodes } => Lattice::chain(nodes),
            LatticeKind::Cycle { nodes } => Lattice::cycle(nodes),
        }
    }

    /// Hexagonal flake: all hexagons within hex-distance `radius` of
    /// the center, i.e. 3R^2+3R+1 plaquettes.
    pub fn flake(radius: usize) -> Lattice {
        let r = radius as i64;
        let mut centers = Vec::new();
        for q in -r..=r {
            for s in (-r).max(-q - r)..=r.min(-q + r) {
                centers.push((q, s));
            }
        }
        Self::from_hexagons(LatticeKind::Flake { radius }, &centers)
    }

    /// Brick-wall patch: a rows x cols parallelogram of hexagons.
    pub fn brick(rows: usize, cols: usize) -> Lattice {
        assert!(rows >= 1 && cols >= 1, "brick lattice needs rows, cols >= 1");
        let mut centers = Vec::new();
        for rr in 0..rows as i64 {
            for qq in 0..cols as i64 {
                centers.push((qq, rr));
            }
        }
        Self::from_hexagons(LatticeKind::Brick { rows, cols }, &centers)
    }

    /// Open matter chain with `nodes` sites and `nodes - 1` links.
    pub fn chain(nodes: usize) -> Lattice {
        assert!(nodes >= 2, "chain needs at least 2 nodes");
        let coords: Vec<(i64, i64)> = (0..nodes as i64).map(|x| (0, x)).collect();
        let edges: Vec<(usize, usize)> = (0..nodes - 1).map(|i| (i, i + 1)).collect();
        Self::assemble(LatticeKind::Chain { nodes }, coords, edges)
    }

    /// Closed matter ring with `nodes` sites and `nodes` links.
    pub fn cycle(nodes: usize) -> Lattice {
        assert!(nodes >= 3, "cycle needs at least 3 nodes");
        let coords: Vec<(i64, i64)> = (0..nodes as i64).map(|x| (0, x)).collect();
        let mut edges: Vec<(usize, usize)> = (0..nodes - 1).map(|i| (i, i + 1)).collect();
        edges.push((0, nodes - 1));
        edges.sort_unstable();
        Self::assemble(LatticeKind::Cycle { nodes }, coords, edges)
    }

    /// Build the corner graph of a set of hexagons given by axial
    /// plaquette coordinates. Hexagon (q, r) gets center (2q + r, 3r)
    /// in integer corner coordinates; adjacent hexagons share corners
    /// exactly, so deduplication by coordinate is lossless.
    fn from_hexagons(kind: LatticeKind, centers: &[(i64, i64)]) -> Lattice {
        const CORNERS: [(i64, i64); 6] =
            [(0, 2), (1, 1), (1, -1), (0, -2), (-1, -1), (-1, 1)];
        let mut corner_set: BTreeSet<(i64, i64)> = BTreeSet::new();
        let mut edge_set: BTreeSet<((i64, i64), (i64, i64))> = BTreeSet::new();
        for &(q, r) in centers {
            let (cx, cy) = (2 * q + r, 3 * r);
            let ring: Vec<(i64, i64)> =
                CORNERS.iter().map(|&(dx, dy)| (cx + dx, cy + dy)).collect();
            for i in 0..6 {
                let a = ring[i];
                let b = ring[(i + 1) % 6];
                corner_set.insert(a);
                corner_set.insert(b);
                edge_set.insert(if a < b { (a, b) } else { (b, a) });
            }
        }
        // Row-major numbering: sort by (y, x).
        let mut coords: Vec<(i64, i64)> =
            corner_set.into_iter().map(|(x, y)| (y, x)).collect();
        coords.sort_unstable();
        let coords: Vec<(i64, i64)> = coords.into_iter().map(|(y, x)| (x, y)).collect();
        let index: BTreeMap<(i64, i64), usize> =
            coords.iter().enumerate().map(|(i, &c)| (c, i)).collect();
        let mut edges: Vec<(usize, usize)> = edge_set
            .into_iter()
            .map(|(a, b)| {
                let (u, v) = (index[&a], index[&b]);
                if u < v { (u, v) } else { (v, u) }
            })
            .collect();
        edges.sort_unstable();
        Self::assemble(kind, coords, edges)
    }

    fn assemble(kind: LatticeKind, coords: Vec<(i64, i64)>, edges: Vec<(usize, usize)>) -> Lattice {
        let mut incidence = vec![Vec::new(); coords.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            incidence[u].push(e);
            incidence[v].push(e);
        }
        let lattice = Lattice { kind, coords, edges, incidence };
        debug_assert!(lattice.is_connected(), "constructed lattice must be connected");
        lattice
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_qubits(&self) -> usize {
        self.num_nodes() + self.num_edges()
    }

    pub fn node_coord(&self, node: usize) -> (i64, i64) {
        self.coords[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_endpoints(&self, edge: usize) -> Result<(usize, usize)> {
        self.edges.get(edge).copied().ok_or(Error::UnknownEdge(edge))
    }

    pub fn incident_edges(&self, node: usize) -> Result<&[usize]> {
        self.incidence
            .get(node)
            .map(|v| v.as_slice())
            .ok_or(Error::UnknownNode(node))
    }

    pub fn degree(&self, node: usize) -> usize {
        self.incidence[node].len()
    }

    /// Number of degree-2 nodes (N_{n,2} in the error-bound formula).
    pub fn num_degree2(&self) -> usize {
        (0..self.num_nodes()).filter(|&n| self.degree(n) == 2).count()
    }

    /// Number of degree-3 nodes (N_{n,3}).
    pub fn num_degree3(&self) -> usize {
        (0..self.num_nodes()).filter(|&n| self.degree(n) == 3).count()
    }

    pub fn matter_qubit(&self, node: usize) -> usize {
        debug_assert!(node < self.num_nodes());
        node
    }

    pub fn gauge_qubit(&self, edge: usize) -> usize {
        debug_assert!(edge < self.num_edges());
        self.num_nodes() + edge
    }

    /// The edge joining `u` and `v`, if present.
    pub fn edge_between(&self, u: usize, v: usize) -> Option<usize> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.edges.binary_search(&key).ok()
    }

    /// Gauss-law generator at a node: Z on the matter qubit and on
    /// every incident gauge qubit.
    pub fn gauge_generator(&self, node: usize) -> Result<PauliString> {
        let incident = self.incident_edges(node)?;
        let mut letters = vec![(self.matter_qubit(node), Pauli::Z)];
        for &e in incident {
            letters.push((self.gauge_qubit(e), Pauli::Z));
        }
        Ok(PauliString::from_letters(letters))
    }

    fn is_connected(&self) -> bool {
        if self.coords.is_empty() {
            return true;
        }
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(n) = queue.pop_front() {
            for &e in &self.incidence[n] {
                let (u, v) = self.edges[e];
                let other = if u == n { v } else { u };
                if !seen[other] {
                    seen[other] = true;
                    count += 1;
                    queue.push_back(other);
                }
            }
        }
        count == self.num_nodes()
    }

    /// Two-color the matter nodes so no edge has both endpoints in the
    /// same set. Reports the first conflicting node pair if the graph
    /// has an odd cycle.
    pub fn matter_bipartition(&self) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut color = vec![-1i8; self.num_nodes()];
        for start in 0..self.num_nodes() {
            if color[start] >= 0 {
                continue;
            }
            color[start] = 0;
            let mut queue = VecDeque::from([start]);
            while let Some(n) = queue.pop_front() {
                for &e in &self.incidence[n] {
                    let (u, v) = self.edges[e];
                    let other = if u == n { v } else { u };
                    if color[other] < 0 {
                        color[other] = 1 - color[n];
                        queue.push_back(other);
                    } else if color[other] == color[n] {
                        return Err(Error::BipartitionConflict(n, other));
                    }
                }
            }
        }
        let set_a = (0..self.num_nodes()).filter(|&n| color[n] == 0).collect();
        let set_b = (0..self.num_nodes()).filter(|&n| color[n] == 1).collect();
        Ok((set_a, set_b))
    }

    /// Proper edge coloring with max-degree many colors (exists for
    /// bipartite graphs). Used by the compiler's fixed-depth CNOT
    /// schedule; call only on graphs whose bipartition succeeds.
    pub fn edge_coloring(&self) -> Result<Vec<usize>> {
        self.matter_bipartition()?;
        let delta = (0..self.num_nodes()).map(|n| self.degree(n)).max().unwrap_or(0);
        let ncolors = delta.max(1);
        const UNSET: usize = usize::MAX;
        let mut color = vec![UNSET; self.num_edges()];
        // free[n][c] = edge at node n carrying color c, or UNSET.
        let mut used: Vec<Vec<usize>> = vec![vec![UNSET; ncolors]; self.num_nodes()];
        let free = |used: &Vec<Vec<usize>>, n: usize| -> usize {
            used[n].iter().position(|&e| e == UNSET).expect("degree bound")
        };
        for e in 0..self.num_edges() {
            let (u, v) = self.edges[e];
            let a = free(&used, u);
            let b = free(&used, v);
            if a == b {
                color[e] = a;
                used[u][a] = e;
                used[v][a] = e;
                continue;
            }
            // Flip the a/b-alternating path starting from v; in a
            // bipartite graph it cannot reach u, so afterwards color a
            // is free at both endpoints.
            let mut path = Vec::new();
            let mut node = v;
            let mut want = a;
            while used[node][want] != UNSET {
                let edge = used[node][want];
                path.push(edge);
                let (x, y) = self.edges[edge];
                node = if x == node { y } else { x };
                want = if want == a { b } else { a };
            }
            for &edge in &path {
                let (x, y) = self.edges[edge];
                used[x][color[edge]] = UNSET;
                used[y][color[edge]] = UNSET;
            }
            for &edge in &path {
                color[edge] = if color[edge] == a { b } else { a };
                let (x, y) = self.edges[edge];
                used[x][color[edge]] = edge;
                used[y][color[edge]] = edge;
            }
            color[e] = a;
            used[u][a] = e;
            used[v][a] = e;
        }
        // Sanity: proper coloring achieved.
        for n in 0..self.num_nodes() {
            let mut seen = vec![false; ncolors];
            for &e in &self.incidence[n] {
                let c = color[e];
                if seen[c] {
                    return Err(Error::Other(format!(
                        "edge coloring failed at node {n}"
                    )));
                }
                seen[c] = true;
            }
        }
        Ok(color)
    }

    /// Line-oriented debug/export format.
    pub fn to_text(&self) -> String {
        let mut out = format!("lattice {}\n", self.kind);
        for (n, &(x, y)) in self.coords.iter().enumerate() {
            out.push_str(&format!("node {n} {x} {y}\n"));
        }
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            out.push_str(&format!("edge {e} {u} {v}\n"));
        }
        for n in 0..self.num_nodes() {
            out.push_str(&format!("qubit node {n} {}\n", self.matter_qubit(n)));
        }
        for e in 0..self.num_edges() {
            out.push_str(&format!("qubit edge {e} {}\n", self.gauge_qubit(e)));
        }
        out
    }
}
