//! Closed-walk decompositions of transition diagrams and the vertical
//! successor structure that extends a one-dimensional decomposition to a
//! grid.
//!
//! A decomposition assigns every edge a successor edge that starts where
//! the first one ends, forming a permutation of the edge set. Its cycles
//! partition the edges into closed walks. For an x-diagram, applying the
//! decomposition cycle by cycle drives a horizontal chain of cells; a
//! vertical successor is a second permutation, compatible with the first,
//! that plays the same role across rows.

use serde::{Deserialize, Serialize};

use crate::cell::BijectiveCell;
use crate::diagram::{DiagramKind, TransitionDiagram};
use crate::error::{Error, Result};

/// An edge-successor permutation of a transition diagram together with
/// its cycle partition.
///
/// Cycles are listed starting from their smallest edge id and sorted by
/// that id, so equal decompositions always compare and serialize equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decomposition {
    successor: Vec<u32>,
    cycles: Vec<Vec<u32>>,
}

fn check_permutation(map: &[u32], what: &str) -> Result<()> {
    let mut seen = vec![false; map.len()];
    for &t in map {
        if t as usize >= map.len() {
            return Err(Error::InvalidDecomposition(format!(
                "{what} maps to {t}, outside 0..{}",
                map.len()
            )));
        }
        if seen[t as usize] {
            return Err(Error::InvalidDecomposition(format!(
                "{what} repeats target {t}; not a permutation"
            )));
        }
        seen[t as usize] = true;
    }
    Ok(())
}

fn orbit_cycles(successor: &[u32]) -> Vec<Vec<u32>> {
    let mut visited = vec![false; successor.len()];
    let mut cycles = Vec::new();
    for start in 0..successor.len() as u32 {
        if visited[start as usize] {
            continue;
        }
        let mut cycle = Vec::new();
        let mut e = start;
        while !visited[e as usize] {
            visited[e as usize] = true;
            cycle.push(e);
            e = successor[e as usize];
        }
        cycles.push(cycle);
    }
    cycles
}

impl Decomposition {
    /// Validates `successor` against `diagram`: it must be a permutation
    /// of the edge ids in which every edge's successor starts at the node
    /// the edge ends on.
    pub fn from_successor(diagram: &TransitionDiagram, successor: Vec<u32>) -> Result<Self> {
        if successor.len() != diagram.edges().len() {
            return Err(Error::InvalidDecomposition(format!(
                "successor has {} entries for {} edges",
                successor.len(),
                diagram.edges().len()
            )));
        }
        check_permutation(&successor, "successor")?;
        for (e, &next) in successor.iter().enumerate() {
            let to = diagram.edge(e as u32).to;
            let from = diagram.edge(next).from;
            if to != from {
                return Err(Error::InvalidDecomposition(format!(
                    "edge {e} ends at node {to} but its successor {next} starts at node {from}"
                )));
            }
        }
        let cycles = orbit_cycles(&successor);
        Ok(Self { successor, cycles })
    }

    pub fn successor(&self) -> &[u32] {
        &self.successor
    }

    /// Successor of edge `e`.
    pub fn apply(&self, e: u32) -> u32 {
        self.successor[e as usize]
    }

    pub fn edge_count(&self) -> usize {
        self.successor.len()
    }

    /// Closed walks of the decomposition, each starting from its smallest
    /// edge id, sorted by that id.
    pub fn cycles(&self) -> &[Vec<u32>] {
        &self.cycles
    }

    /// Cycle lengths in the order of [`Decomposition::cycles`].
    pub fn cycle_lengths(&self) -> Vec<usize> {
        self.cycles.iter().map(Vec::len).collect()
    }

    pub fn to_json(&self) -> String {
        let raw = RawDecomposition {
            successor: self.successor.clone(),
            cycles: self.cycles.clone(),
        };
        let mut text = serde_json::to_string(&raw).expect("decomposition serializes");
        text.push('\n');
        text
    }

    /// Parses [`Decomposition::to_json`] output. Checks that `"H"` is a
    /// permutation whose orbits match the listed cycles; checking it
    /// against a particular diagram is [`Decomposition::from_successor`]'s
    /// job.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawDecomposition =
            serde_json::from_str(text).map_err(|e| Error::InvalidDecomposition(e.to_string()))?;
        check_permutation(&raw.successor, "H")?;
        let cycles = orbit_cycles(&raw.successor);
        if cycles != raw.cycles {
            return Err(Error::InvalidDecomposition(
                "listed cycles do not match the successor's orbits".into(),
            ));
        }
        Ok(Self {
            successor: raw.successor,
            cycles,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawDecomposition {
    #[serde(rename = "H")]
    successor: Vec<u32>,
    cycles: Vec<Vec<u32>>,
}

/// The unique decomposition of the state diagram: each edge's successor
/// is the edge leaving the state it reaches, i.e. the cell permutation
/// itself. Its cycles are the cell's state cycles.
///
/// The same successor is also valid on the x-diagram, where it always
/// admits a vertical successor (itself), so state cycles double as a grid
/// decomposition.
pub fn state_cycles(cell: &BijectiveCell) -> Decomposition {
    let diagram = TransitionDiagram::build(cell, DiagramKind::State);
    Decomposition::from_successor(&diagram, cell.table().to_vec())
        .expect("permutation table is a valid state decomposition")
}

fn sorted_pairing(diagram: &TransitionDiagram) -> Decomposition {
    let mut successor = vec![0u32; diagram.edges().len()];
    for node in 0..diagram.node_count() as u32 {
        for (&inc, &out) in diagram.incoming(node).iter().zip(diagram.outgoing(node)) {
            successor[inc as usize] = out;
        }
    }
    Decomposition::from_successor(diagram, successor)
        .expect("sorted pairing is a valid decomposition")
}

/// The first x-diagram decomposition in enumeration order: at every node
/// the incoming edges, in ascending id order, are paired with the
/// outgoing edges in ascending id order.
pub fn canonical_x_decomposition(cell: &BijectiveCell) -> Decomposition {
    sorted_pairing(&TransitionDiagram::build(cell, DiagramKind::X))
}

fn saturating_factorial(n: usize) -> u128 {
    let mut acc: u128 = 1;
    for k in 2..=n as u128 {
        acc = acc.saturating_mul(k);
    }
    acc
}

/// Number of decompositions of `diagram`: the product over nodes of
/// (out-degree)!, saturating at `u128::MAX`. Every choice of a
/// per-node pairing of incoming to outgoing edges is a decomposition and
/// vice versa.
pub fn decomposition_count(diagram: &TransitionDiagram) -> u128 {
    let mut count: u128 = 1;
    for node in 0..diagram.node_count() as u32 {
        count = count.saturating_mul(saturating_factorial(diagram.outgoing(node).len()));
    }
    count
}

/// Decodes the `index`-th permutation of `items` in lexicographic order
/// via the factorial number system.
fn nth_permutation(items: &[u32], mut index: u64) -> Vec<u32> {
    let mut pool: Vec<u32> = items.to_vec();
    let mut out = Vec::with_capacity(pool.len());
    let mut radix: u64 = (1..=pool.len() as u64).product();
    for remaining in (1..=pool.len() as u64).rev() {
        radix /= remaining;
        let digit = (index / radix) as usize;
        index %= radix;
        out.push(pool.remove(digit));
    }
    out
}

/// Lazy enumeration of every decomposition of the x-diagram, in a fixed
/// deterministic order.
///
/// Decomposition `g` is decoded from `g` written in mixed radix with one
/// digit per node (node 0 most significant, radix (out-degree)!); the
/// digit selects the lexicographic permutation of the node's outgoing
/// edges that its ascending incoming edges are paired with. Index 0 is
/// [`canonical_x_decomposition`].
#[derive(Debug)]
pub struct XDecompositions {
    diagram: TransitionDiagram,
    /// Product of radices strictly after each node; last entry 1.
    suffix: Vec<u64>,
    count: u64,
    next: u64,
}

impl XDecompositions {
    /// Total number of decompositions (not the iterator's remaining
    /// count).
    pub fn total(&self) -> u64 {
        self.count
    }

    /// Decodes the decomposition at `index` without stepping the iterator.
    pub fn get(&self, index: u64) -> Option<Decomposition> {
        if index >= self.count {
            return None;
        }
        let mut successor = vec![0u32; self.diagram.edges().len()];
        let mut rem = index;
        for node in 0..self.diagram.node_count() as u32 {
            let digit = rem / self.suffix[node as usize];
            rem %= self.suffix[node as usize];
            let pairing = nth_permutation(self.diagram.outgoing(node), digit);
            for (&inc, &out) in self.diagram.incoming(node).iter().zip(&pairing) {
                successor[inc as usize] = out;
            }
        }
        let cycles = orbit_cycles(&successor);
        Some(Decomposition { successor, cycles })
    }
}

impl Iterator for XDecompositions {
    type Item = Decomposition;

    fn next(&mut self) -> Option<Decomposition> {
        let item = self.get(self.next)?;
        self.next += 1;
        Some(item)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.count - self.next) as usize;
        (left, Some(left))
    }
}

/// Enumerates all decompositions of the x-diagram of `cell`, unless
/// there are more than `limit` of them ((2^v)! per node, 2^h nodes).
pub fn enumerate_x_decompositions(cell: &BijectiveCell, limit: u64) -> Result<XDecompositions> {
    let diagram = TransitionDiagram::build(cell, DiagramKind::X);
    let count = decomposition_count(&diagram);
    if count > limit as u128 {
        return Err(Error::CombinatoricsOverLimit { count, limit });
    }
    let node_count = diagram.node_count();
    let mut suffix = vec![1u64; node_count];
    for node in (0..node_count.saturating_sub(1)).rev() {
        let radix = saturating_factorial(diagram.outgoing(node as u32 + 1).len()) as u64;
        suffix[node] = suffix[node + 1] * radix;
    }
    Ok(XDecompositions {
        diagram,
        suffix,
        count: count as u64,
        next: 0,
    })
}

/// A permutation of the x-diagram edges that advances one row down a
/// grid, compatible with a horizontal decomposition.
///
/// For the decomposition's successor `H` and this map `V`:
/// * vertical continuity: the vertical output produced by edge `e`'s
///   label equals the vertical part of `V(e)`'s label, and
/// * commutation: `V(H(e)) = H(V(e))`,
///
/// so rows and columns of a grid can be advanced in either order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerticalSuccessor {
    map: Vec<u32>,
}

impl VerticalSuccessor {
    pub fn new(cell: &BijectiveCell, decomp: &Decomposition, map: Vec<u32>) -> Result<Self> {
        if map.len() != decomp.edge_count() {
            return Err(Error::InvalidVerticalSuccessor(format!(
                "map has {} entries for {} edges",
                map.len(),
                decomp.edge_count()
            )));
        }
        let mut seen = vec![false; map.len()];
        for &t in &map {
            if t as usize >= map.len() || seen[t as usize] {
                return Err(Error::InvalidVerticalSuccessor(
                    "map is not a permutation of the edge ids".into(),
                ));
            }
            seen[t as usize] = true;
        }
        for e in 0..map.len() as u32 {
            let produced = cell.project_v(cell.apply(e));
            let consumed = cell.project_v(map[e as usize]);
            if produced != consumed {
                return Err(Error::InvalidVerticalSuccessor(format!(
                    "edge {e} outputs vertical code {produced} but its vertical successor \
                     {} consumes {consumed}",
                    map[e as usize]
                )));
            }
        }
        for e in 0..map.len() as u32 {
            let vh = map[decomp.apply(e) as usize];
            let hv = decomp.apply(map[e as usize]);
            if vh != hv {
                return Err(Error::InvalidVerticalSuccessor(format!(
                    "does not commute with the decomposition at edge {e}: \
                     V(H(e)) = {vh} but H(V(e)) = {hv}"
                )));
            }
        }
        Ok(Self { map })
    }

    pub fn map(&self) -> &[u32] {
        &self.map
    }

    pub fn apply(&self, e: u32) -> u32 {
        self.map[e as usize]
    }
}

/// Searches for a vertical successor compatible with `decomp` on the
/// x-diagram of `cell`.
///
/// Commutation forces `V` to map each decomposition cycle onto a cycle of
/// the same length, fully determined by the image of one element. The
/// search assigns cycles in ascending order of their smallest edge,
/// trying candidate images in ascending id order, and backtracks on
/// conflict; the result is deterministic.
pub fn find_vertical_successor(
    cell: &BijectiveCell,
    decomp: &Decomposition,
) -> Option<VerticalSuccessor> {
    let n = decomp.edge_count();
    let cycles = decomp.cycles();
    let mut cycle_of = vec![0usize; n];
    for (ci, cycle) in cycles.iter().enumerate() {
        for &e in cycle {
            cycle_of[e as usize] = ci;
        }
    }
    // Vertical code each edge emits and the one each edge's label carries.
    let emits: Vec<u32> = (0..n as u32)
        .map(|e| cell.project_v(cell.apply(e)))
        .collect();
    let carries: Vec<u32> = (0..n as u32).map(|e| cell.project_v(e)).collect();

    let mut vmap: Vec<u32> = vec![0; n];
    let mut used = vec![false; n];

    struct Search<'a> {
        cycles: &'a [Vec<u32>],
        cycle_of: &'a [usize],
        emits: &'a [u32],
        carries: &'a [u32],
        decomp: &'a Decomposition,
    }

    impl Search<'_> {
        fn assign(&self, ci: usize, vmap: &mut [u32], used: &mut [bool]) -> bool {
            let Some(cycle) = self.cycles.get(ci) else {
                return true;
            };
            let rep = cycle[0];
            for cand in 0..used.len() as u32 {
                if used[cand as usize]
                    || self.carries[cand as usize] != self.emits[rep as usize]
                    || self.cycles[self.cycle_of[cand as usize]].len() != cycle.len()
                {
                    continue;
                }
                // Propagate V(H^k(rep)) = H^k(cand) around the cycle and
                // check vertical continuity at every step.
                let mut target = cand;
                let ok = cycle.iter().all(|&e| {
                    let fits = self.carries[target as usize] == self.emits[e as usize];
                    target = self.decomp.apply(target);
                    fits
                });
                if !ok {
                    continue;
                }
                let mut target = cand;
                for &e in cycle {
                    debug_assert!(!used[target as usize]);
                    vmap[e as usize] = target;
                    used[target as usize] = true;
                    target = self.decomp.apply(target);
                }
                if self.assign(ci + 1, vmap, used) {
                    return true;
                }
                let mut target = cand;
                for _ in cycle {
                    used[target as usize] = false;
                    target = self.decomp.apply(target);
                }
            }
            false
        }
    }

    let search = Search {
        cycles,
        cycle_of: &cycle_of,
        emits: &emits,
        carries: &carries,
        decomp,
    };
    if !search.assign(0, &mut vmap, &mut used) {
        return None;
    }
    Some(
        VerticalSuccessor::new(cell, decomp, vmap)
            .expect("search result satisfies the vertical successor laws"),
    )
}

/// A decomposition of the x-diagram together with a compatible vertical
/// successor and the decomposition's position in enumeration order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridDecomposition {
    pub index: u64,
    pub decomposition: Decomposition,
    pub vertical: VerticalSuccessor,
}

/// Scans the decompositions of the x-diagram of `cell` in enumeration
/// order and returns the first that admits a vertical successor, or
/// `None` when none of them does. Fails fast when the diagram has more
/// than `limit` decompositions.
pub fn search_grid_decomposition(
    cell: &BijectiveCell,
    limit: u64,
) -> Result<Option<GridDecomposition>> {
    let all = enumerate_x_decompositions(cell, limit)?;
    for (index, decomposition) in all.enumerate() {
        if let Some(vertical) = find_vertical_successor(cell, &decomposition) {
            return Ok(Some(GridDecomposition {
                index: index as u64,
                decomposition,
                vertical,
            }));
        }
    }
    Ok(None)
}
