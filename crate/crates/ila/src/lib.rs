//! Modeling and test generation for iterative logic arrays of bijective
//! cells.
//!
//! The pipeline has three layers:
//!
//! * [`cell`] models a single `(h, v)` cell, either as a truth table or
//!   as a reversible netlist of multi-controlled inversions, and insists
//!   on bijectivity.
//! * [`diagram`] and [`decomp`] turn the cell into its x-, y-, and
//!   state-transition diagrams, decompose the x-diagram into closed
//!   walks, and search for a commuting vertical successor so a
//!   decomposition can tile two dimensions.
//! * [`testgen`] and [`sim`] produce constant-size test sets (the vector
//!   count depends only on the cell width, never on the array size) and
//!   verify them with an independent fault simulator.

pub mod cell;
pub mod decomp;
pub mod diagram;
pub mod error;
pub mod sim;
pub mod testgen;

pub use cell::{
    cell_spec_json, parse_cell_spec, random_cell, BijectiveCell, CnotGate, CnotNetlist,
    CombinationalFunction,
};
pub use decomp::{
    canonical_x_decomposition, enumerate_x_decompositions, find_vertical_successor,
    search_grid_decomposition, state_cycles, Decomposition, GridDecomposition, VerticalSuccessor,
    XDecompositions,
};
pub use diagram::{DegreeReport, DiagramKind, Edge, TransitionDiagram};
pub use error::{Error, Result};
pub use sim::{
    atomic_fault_universe, check_agreement, input_coverage, random_table_fault_campaign,
    run_campaign, simulate, CellCoverage, CoverageReport, Fault, FaultCampaignResult, FaultKind,
    IlaGrid, SimTrace,
};
pub use testgen::{
    gen_1d, gen_2d_atpg, gen_2d_euler, gen_nd, parse_code, render_code, GridShape, Method,
    PortValues, TestSet, TestVector,
};
