//! Transition diagrams derived from a bijective cell.
//!
//! Each diagram is a directed multigraph with one edge per input code:
//!
//! * x-diagram: nodes are horizontal codes; edge `e` runs from the
//!   horizontal part of its label to the horizontal part of the cell
//!   output. Every node has in- and out-degree `2^v`.
//! * y-diagram: the same with the roles of the wire groups swapped;
//!   degrees are `2^h`.
//! * state diagram: nodes are full codes and edge `e` runs from `e` to
//!   `f(e)`; the functional graph of the permutation, degrees 1.

use std::fmt::Write as _;

use crate::cell::BijectiveCell;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagramKind {
    X,
    Y,
    State,
}

impl DiagramKind {
    fn name(self) -> &'static str {
        match self {
            DiagramKind::X => "x",
            DiagramKind::Y => "y",
            DiagramKind::State => "state",
        }
    }
}

/// One edge of a transition diagram. `id` is the input code the edge was
/// derived from, which doubles as its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub id: u32,
    pub from: u32,
    pub to: u32,
}

impl Edge {
    /// The full input code labeling this edge.
    pub fn label(&self) -> u32 {
        self.id
    }
}

/// Per-node degree check result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DegreeReport {
    /// Expected in- and out-degree of every node.
    pub expected: usize,
    /// `(node, in_degree, out_degree)` rows, one per node.
    pub degrees: Vec<(u32, usize, usize)>,
    /// True iff every node matches `expected` in both directions.
    pub balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionDiagram {
    kind: DiagramKind,
    h: usize,
    v: usize,
    node_count: usize,
    edges: Vec<Edge>,
    outgoing: Vec<Vec<u32>>,
    incoming: Vec<Vec<u32>>,
}

impl TransitionDiagram {
    pub fn build(cell: &BijectiveCell, kind: DiagramKind) -> Self {
        let (h, v) = (cell.h(), cell.v());
        let node_count = match kind {
            DiagramKind::X => 1usize << h,
            DiagramKind::Y => 1usize << v,
            DiagramKind::State => cell.code_count(),
        };
        let project = |code: u32| match kind {
            DiagramKind::X => cell.project_h(code),
            DiagramKind::Y => cell.project_v(code),
            DiagramKind::State => code,
        };
        let mut edges = Vec::with_capacity(cell.code_count());
        let mut outgoing = vec![Vec::new(); node_count];
        let mut incoming = vec![Vec::new(); node_count];
        for code in 0..cell.code_count() as u32 {
            let from = project(code);
            let to = project(cell.apply(code));
            edges.push(Edge { id: code, from, to });
            outgoing[from as usize].push(code);
            incoming[to as usize].push(code);
        }
        Self {
            kind,
            h,
            v,
            node_count,
            edges,
            outgoing,
            incoming,
        }
    }

    pub fn kind(&self) -> DiagramKind {
        self.kind
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: u32) -> Edge {
        self.edges[id as usize]
    }

    /// Edge ids leaving `node`, in ascending id order.
    pub fn outgoing(&self, node: u32) -> &[u32] {
        &self.outgoing[node as usize]
    }

    /// Edge ids entering `node`, in ascending id order.
    pub fn incoming(&self, node: u32) -> &[u32] {
        &self.incoming[node as usize]
    }

    /// In/out-degree table. For a bijective cell every diagram is balanced:
    /// x-diagrams at `2^v`, y-diagrams at `2^h`, state diagrams at 1.
    pub fn check_degrees(&self) -> DegreeReport {
        let expected = match self.kind {
            DiagramKind::X => 1usize << self.v,
            DiagramKind::Y => 1usize << self.h,
            DiagramKind::State => 1,
        };
        let degrees: Vec<(u32, usize, usize)> = (0..self.node_count as u32)
            .map(|n| {
                (
                    n,
                    self.incoming[n as usize].len(),
                    self.outgoing[n as usize].len(),
                )
            })
            .collect();
        let balanced = degrees
            .iter()
            .all(|&(_, ind, outd)| ind == expected && outd == expected);
        DegreeReport {
            expected,
            degrees,
            balanced,
        }
    }

    /// DOT identifier of a node: the node's code in binary, prefixed by
    /// the diagram kind ("h", "v", or "s").
    fn node_name(&self, node: u32) -> String {
        let (prefix, bits) = match self.kind {
            DiagramKind::X => ("h", self.h),
            DiagramKind::Y => ("v", self.v),
            DiagramKind::State => ("s", self.h + self.v),
        };
        format!("{prefix}{node:0width$b}", width = bits)
    }

    fn edge_label(&self, id: u32) -> String {
        let h_part = id >> self.v;
        let v_part = id & ((1u32 << self.v) - 1);
        format!("{h_part:0hw$b}/{v_part:0vw$b}", hw = self.h, vw = self.v)
    }

    /// Graphviz rendering. Nodes are emitted in ascending code order and
    /// edges in ascending id order, so output is byte-stable.
    pub fn to_dot(&self) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "digraph {}_diagram {{", self.kind.name()).expect("string write");
        for node in 0..self.node_count as u32 {
            writeln!(out, "  {};", self.node_name(node)).expect("string write");
        }
        for edge in &self.edges {
            writeln!(
                out,
                "  {} -> {} [label=\"{}\"];",
                self.node_name(edge.from),
                self.node_name(edge.to),
                self.edge_label(edge.id)
            )
            .expect("string write");
        }
        writeln!(out, "}}").expect("string write");
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::BijectiveCell;

    fn example_cell() -> BijectiveCell {
        BijectiveCell::from_table(2, 1, vec![1, 0, 3, 7, 6, 4, 5, 2]).unwrap()
    }

    #[test]
    fn x_diagram_edges_project_horizontal_parts() {
        let diagram = TransitionDiagram::build(&example_cell(), DiagramKind::X);
        assert_eq!(diagram.node_count(), 4);
        assert_eq!(diagram.edges().len(), 8);
        let endpoints: Vec<(u32, u32)> = diagram.edges().iter().map(|e| (e.from, e.to)).collect();
        assert_eq!(
            endpoints,
            vec![
                (0, 0),
                (0, 0),
                (1, 1),
                (1, 3),
                (2, 3),
                (2, 2),
                (3, 2),
                (3, 1),
            ]
        );
    }

    #[test]
    fn x_diagram_degrees_are_two() {
        let report = TransitionDiagram::build(&example_cell(), DiagramKind::X).check_degrees();
        assert_eq!(report.expected, 2);
        assert!(report.balanced);
        for &(_, ind, outd) in &report.degrees {
            assert_eq!((ind, outd), (2, 2));
        }
    }

    #[test]
    fn y_diagram_degrees_are_four() {
        let report = TransitionDiagram::build(&example_cell(), DiagramKind::Y).check_degrees();
        assert_eq!(report.expected, 4);
        assert!(report.balanced);
    }

    #[test]
    fn state_diagram_is_the_permutation_graph() {
        let cell = example_cell();
        let diagram = TransitionDiagram::build(&cell, DiagramKind::State);
        assert_eq!(diagram.node_count(), 8);
        for edge in diagram.edges() {
            assert_eq!(edge.from, edge.id);
            assert_eq!(edge.to, cell.apply(edge.id));
        }
        let report = diagram.check_degrees();
        assert_eq!(report.expected, 1);
        assert!(report.balanced);
    }

    #[test]
    fn adjacency_lists_sorted_by_edge_id() {
        let diagram = TransitionDiagram::build(&example_cell(), DiagramKind::X);
        assert_eq!(diagram.outgoing(0), &[0, 1]);
        assert_eq!(diagram.incoming(0), &[0, 1]);
        assert_eq!(diagram.outgoing(3), &[6, 7]);
        assert_eq!(diagram.incoming(3), &[3, 4]);
    }

    #[test]
    fn identity_cell_diagram_is_all_self_loops() {
        let cell = BijectiveCell::identity(1, 1).unwrap();
        let diagram = TransitionDiagram::build(&cell, DiagramKind::X);
        for edge in diagram.edges() {
            assert_eq!(edge.from, edge.to);
        }
        assert!(diagram.check_degrees().balanced);
    }

    #[test]
    fn dot_output_matches_golden() {
        let cell = BijectiveCell::from_table(1, 1, vec![1, 0, 3, 2]).unwrap();
        let dot = TransitionDiagram::build(&cell, DiagramKind::X)
            .to_dot()
            .unwrap();
        let expected = "digraph x_diagram {\n  h0;\n  h1;\n  h0 -> h0 [label=\"0/0\"];\n  h0 -> h0 [label=\"0/1\"];\n  h1 -> h1 [label=\"1/0\"];\n  h1 -> h1 [label=\"1/1\"];\n}\n";
        assert_eq!(dot, expected);
    }

    #[test]
    fn dot_edge_labels_split_wire_groups() {
        let dot = TransitionDiagram::build(&example_cell(), DiagramKind::X)
            .to_dot()
            .unwrap();
        assert!(dot.contains("h01 -> h11 [label=\"01/1\"]"));
        let dot = TransitionDiagram::build(&example_cell(), DiagramKind::State)
            .to_dot()
            .unwrap();
        assert!(dot.contains("s011 -> s111 [label=\"01/1\"]"));
    }

    #[test]
    fn dot_output_parses_as_graphviz() {
        for kind in [DiagramKind::X, DiagramKind::Y, DiagramKind::State] {
            let dot = TransitionDiagram::build(&example_cell(), kind)
                .to_dot()
                .unwrap();
            dot_parser::ast::Graph::try_from(dot.as_str())
                .unwrap_or_else(|e| panic!("{kind:?} diagram DOT rejected: {e:?}"));
        }
    }

    #[test]
    fn dot_output_is_byte_stable() {
        let a = TransitionDiagram::build(&example_cell(), DiagramKind::Y)
            .to_dot()
            .unwrap();
        let b = TransitionDiagram::build(&example_cell(), DiagramKind::Y)
            .to_dot()
            .unwrap();
        assert_eq!(a, b);
    }
}
