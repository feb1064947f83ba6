//! Fault simulation for arrays of one bijective cell.
//!
//! The simulator is deliberately independent of the generators: it knows
//! nothing about walks or cycles. It propagates boundary values through
//! the array cell by cell, optionally with one cell replaced by a faulty
//! function, and reports what the observable outputs look like. Fault
//! campaigns replay a whole test set against a list of faults and count
//! which faults some vector exposes.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::cell::{BijectiveCell, CombinationalFunction};
use crate::error::{Error, Result};
use crate::testgen::{GridShape, PortValues, TestSet, TestVector};

/// An array instance: one shared cell function plus a grid shape whose
/// wire groups add up to the cell's width.
#[derive(Debug, Clone)]
pub struct IlaGrid {
    cell: BijectiveCell,
    shape: GridShape,
    layout: Layout,
}

/// Precomputed indexing so the per-cell loop does no arithmetic beyond
/// shifts and adds.
#[derive(Debug, Clone)]
struct Layout {
    /// Rank distance between neighbors along each axis.
    strides: Vec<usize>,
    /// Bit offset and mask per wire group.
    shifts: Vec<usize>,
    masks: Vec<u32>,
    axis_of_group: Vec<Option<usize>>,
    group_of_axis: Vec<usize>,
    /// Per axis: cell rank -> index into the entry-face value list
    /// (unused entries hold `usize::MAX`).
    entry_face_index: Vec<Vec<usize>>,
    /// Per axis: exit-face index -> cell rank.
    exit_face_cells: Vec<Vec<usize>>,
}

impl IlaGrid {
    pub fn new(cell: BijectiveCell, shape: GridShape) -> Result<Self> {
        if shape.total_width() != cell.width() {
            return Err(Error::WidthMismatch {
                expected: cell.width(),
                got: shape.total_width(),
            });
        }
        let n = shape.dims();
        let m = shape.group_count();
        let count = shape.cell_count();
        let mut strides = vec![1usize; n];
        for axis in (0..n.saturating_sub(1)).rev() {
            strides[axis] = strides[axis + 1] * shape.sizes()[axis + 1];
        }
        let mut entry_face_index = Vec::with_capacity(n);
        let mut exit_face_cells = Vec::with_capacity(n);
        for axis in 0..n {
            let mut entry = vec![usize::MAX; count];
            let mut exit = Vec::with_capacity(shape.face_size(axis));
            for i in 0..shape.face_size(axis) {
                let coord = shape.face_unrank(axis, 0, i);
                entry[shape.rank(&coord)] = i;
                let coord = shape.face_unrank(axis, shape.sizes()[axis] - 1, i);
                exit.push(shape.rank(&coord));
            }
            entry_face_index.push(entry);
            exit_face_cells.push(exit);
        }
        let layout = Layout {
            strides,
            shifts: (0..m).map(|g| shape.group_shift(g)).collect(),
            masks: (0..m).map(|g| shape.group_mask(g)).collect(),
            axis_of_group: (0..m).map(|g| shape.axis_for_group(g)).collect(),
            group_of_axis: (0..n).map(|a| shape.group_for_axis(a)).collect(),
            entry_face_index,
            exit_face_cells,
        };
        Ok(Self {
            cell,
            shape,
            layout,
        })
    }

    pub fn cell(&self) -> &BijectiveCell {
        &self.cell
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    fn validate_ports(&self, ports: &PortValues, what: &str) -> Result<()> {
        if ports.boundary.len() != self.shape.dims() {
            return Err(Error::MalformedInputs(format!(
                "{what} lists {} boundary axes, shape has {}",
                ports.boundary.len(),
                self.shape.dims()
            )));
        }
        for (axis, values) in ports.boundary.iter().enumerate() {
            if values.len() != self.shape.face_size(axis) {
                return Err(Error::MalformedInputs(format!(
                    "{what} boundary[{axis}] has {} values, face has {} cells",
                    values.len(),
                    self.shape.face_size(axis)
                )));
            }
            let group = self.shape.group_for_axis(axis);
            if let Some(&bad) = values.iter().find(|&&v| v > self.shape.group_mask(group)) {
                return Err(Error::MalformedInputs(format!(
                    "{what} boundary[{axis}] value {bad} exceeds group width"
                )));
            }
        }
        match (&ports.free, self.shape.free_group()) {
            (None, None) => {}
            (Some(free), Some(group)) => {
                if free.len() != self.shape.cell_count() {
                    return Err(Error::MalformedInputs(format!(
                        "{what} has {} free values for {} cells",
                        free.len(),
                        self.shape.cell_count()
                    )));
                }
                if let Some(&bad) = free.iter().find(|&&v| v > self.shape.group_mask(group)) {
                    return Err(Error::MalformedInputs(format!(
                        "{what} free value {bad} exceeds group width"
                    )));
                }
            }
            (None, Some(_)) => {
                return Err(Error::MalformedInputs(format!(
                    "{what} is missing free inputs for the free wire group"
                )))
            }
            (Some(_), None) => {
                return Err(Error::MalformedInputs(format!(
                    "{what} carries free inputs but every group is chained"
                )))
            }
        }
        Ok(())
    }

    fn validate_fault(&self, fault: &Fault) -> Result<()> {
        if fault.position.len() != self.shape.dims() {
            return Err(Error::InvalidFault(format!(
                "position {:?} has {} coordinates, grid has {} dimensions",
                fault.position,
                fault.position.len(),
                self.shape.dims()
            )));
        }
        for (axis, (&c, &s)) in fault.position.iter().zip(self.shape.sizes()).enumerate() {
            if c >= s {
                return Err(Error::InvalidFault(format!(
                    "position {:?} is outside the grid on axis {axis}",
                    fault.position
                )));
            }
        }
        match &fault.kind {
            FaultKind::RowFlip {
                input_row,
                replacement,
            } => {
                let limit = self.cell.code_count() as u32;
                if *input_row >= limit || *replacement >= limit {
                    return Err(Error::InvalidFault(format!(
                        "row {input_row} -> {replacement} is outside the {limit}-row table"
                    )));
                }
                if self.cell.apply(*input_row) == *replacement {
                    return Err(Error::InvalidFault(format!(
                        "row {input_row} already maps to {replacement}"
                    )));
                }
            }
            FaultKind::TableReplace { table } => {
                if table.h() != self.cell.h() || table.v() != self.cell.v() {
                    return Err(Error::InvalidFault(format!(
                        "replacement is a ({}, {})-function, cell is ({}, {})",
                        table.h(),
                        table.v(),
                        self.cell.h(),
                        self.cell.v()
                    )));
                }
                if table.table() == self.cell.table() {
                    return Err(Error::InvalidFault(
                        "replacement equals the fault-free function".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Core propagation pass, row-major so every chained neighbor is
    /// already computed. `inputs`/`outputs` must hold `cell_count`
    /// entries.
    fn eval_into(
        &self,
        primary: &PortValues,
        fault: Option<&Fault>,
        inputs: &mut [u32],
        outputs: &mut [u32],
    ) {
        let shape = &self.shape;
        let layout = &self.layout;
        let n = shape.dims();
        let faulty = fault.map(|f| (shape.rank(&f.position), &f.kind));
        let mut coord = vec![0usize; n];
        for idx in 0..shape.cell_count() {
            let mut code: u32 = 0;
            for g in 0..shape.group_count() {
                let value = match layout.axis_of_group[g] {
                    None => primary.free.as_ref().expect("ports validated")[idx],
                    Some(axis) if coord[axis] == 0 => {
                        primary.boundary[axis][layout.entry_face_index[axis][idx]]
                    }
                    Some(axis) => {
                        (outputs[idx - layout.strides[axis]] >> layout.shifts[g]) & layout.masks[g]
                    }
                };
                code |= value << layout.shifts[g];
            }
            let out = match faulty {
                Some((pos, kind)) if pos == idx => match kind {
                    FaultKind::RowFlip {
                        input_row,
                        replacement,
                    } => {
                        if code == *input_row {
                            *replacement
                        } else {
                            self.cell.apply(code)
                        }
                    }
                    FaultKind::TableReplace { table } => table.apply(code),
                },
                _ => self.cell.apply(code),
            };
            inputs[idx] = code;
            outputs[idx] = out;
            for axis in (0..n).rev() {
                coord[axis] += 1;
                if coord[axis] < shape.sizes()[axis] {
                    break;
                }
                coord[axis] = 0;
            }
        }
    }

    /// True iff the fault changes some observable of this vector.
    fn vector_detects(
        &self,
        vector: &TestVector,
        fault: &Fault,
        inputs: &mut [u32],
        outputs: &mut [u32],
    ) -> bool {
        self.eval_into(&vector.primary_inputs, Some(fault), inputs, outputs);
        let layout = &self.layout;
        for axis in 0..self.shape.dims() {
            let g = layout.group_of_axis[axis];
            for (i, &rank) in layout.exit_face_cells[axis].iter().enumerate() {
                let seen = (outputs[rank] >> layout.shifts[g]) & layout.masks[g];
                if seen != vector.expected.boundary[axis][i] {
                    return true;
                }
            }
        }
        if let (Some(expected), Some(g)) = (&vector.expected.free, self.shape.free_group()) {
            for (idx, &want) in expected.iter().enumerate() {
                let seen = (outputs[idx] >> layout.shifts[g]) & layout.masks[g];
                if seen != want {
                    return true;
                }
            }
        }
        false
    }

    fn observables(&self, outputs: &[u32]) -> PortValues {
        let layout = &self.layout;
        let boundary = (0..self.shape.dims())
            .map(|axis| {
                let g = layout.group_of_axis[axis];
                layout.exit_face_cells[axis]
                    .iter()
                    .map(|&rank| (outputs[rank] >> layout.shifts[g]) & layout.masks[g])
                    .collect()
            })
            .collect();
        let free = self.shape.free_group().map(|g| {
            outputs
                .iter()
                .map(|&o| (o >> layout.shifts[g]) & layout.masks[g])
                .collect()
        });
        PortValues { boundary, free }
    }
}

/// Single-cell fault model: exactly one cell's function is wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaultKind {
    /// One truth-table row produces `replacement` instead of the correct
    /// output.
    RowFlip { input_row: u32, replacement: u32 },
    /// The whole function is replaced (not necessarily by a bijection).
    TableReplace { table: CombinationalFunction },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fault {
    position: Vec<usize>,
    kind: FaultKind,
}

impl Fault {
    pub fn row_flip(
        grid: &IlaGrid,
        position: Vec<usize>,
        input_row: u32,
        replacement: u32,
    ) -> Result<Fault> {
        let fault = Fault {
            position,
            kind: FaultKind::RowFlip {
                input_row,
                replacement,
            },
        };
        grid.validate_fault(&fault)?;
        Ok(fault)
    }

    pub fn table_replace(
        grid: &IlaGrid,
        position: Vec<usize>,
        table: CombinationalFunction,
    ) -> Result<Fault> {
        let fault = Fault {
            position,
            kind: FaultKind::TableReplace { table },
        };
        grid.validate_fault(&fault)?;
        Ok(fault)
    }

    pub fn position(&self) -> &[usize] {
        &self.position
    }

    pub fn kind(&self) -> &FaultKind {
        &self.kind
    }

    fn to_value(&self) -> Value {
        let mut obj = Map::new();
        obj.insert("position".into(), self.position.iter().copied().collect());
        match &self.kind {
            FaultKind::RowFlip {
                input_row,
                replacement,
            } => {
                obj.insert("kind".into(), "row_flip".into());
                obj.insert("input_row".into(), (*input_row).into());
                obj.insert("replacement".into(), (*replacement).into());
            }
            FaultKind::TableReplace { table } => {
                obj.insert("kind".into(), "table_replace".into());
                obj.insert("table".into(), table.table().iter().copied().collect());
            }
        }
        Value::Object(obj)
    }
}

/// Result of one fault-free propagation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    /// Full input code each cell actually received, row-major.
    pub cell_inputs: Vec<u32>,
    pub cell_outputs: Vec<u32>,
    /// What a tester sees: exit-face chained outputs plus free outputs.
    pub observables: PortValues,
}

/// Propagates one assignment of primary inputs through the array,
/// optionally with a fault injected.
pub fn simulate(grid: &IlaGrid, primary: &PortValues, fault: Option<&Fault>) -> Result<SimTrace> {
    grid.validate_ports(primary, "primary inputs")?;
    if let Some(f) = fault {
        grid.validate_fault(f)?;
    }
    let count = grid.shape().cell_count();
    let mut inputs = vec![0u32; count];
    let mut outputs = vec![0u32; count];
    grid.eval_into(primary, fault, &mut inputs, &mut outputs);
    let observables = grid.observables(&outputs);
    Ok(SimTrace {
        cell_inputs: inputs,
        cell_outputs: outputs,
        observables,
    })
}

/// Every single-cell row fault: each cell position, each input row, each
/// wrong output value. Order is (cell rank, row, replacement) ascending.
pub fn atomic_fault_universe(grid: &IlaGrid) -> Vec<Fault> {
    let rows = grid.cell().code_count() as u32;
    let mut faults = Vec::with_capacity(grid.shape().cell_count() * (rows * (rows - 1)) as usize);
    for idx in 0..grid.shape().cell_count() {
        let position = grid.shape().unrank(idx);
        for row in 0..rows {
            let good = grid.cell().apply(row);
            for replacement in (0..rows).filter(|&r| r != good) {
                faults.push(Fault {
                    position: position.clone(),
                    kind: FaultKind::RowFlip {
                        input_row: row,
                        replacement,
                    },
                });
            }
        }
    }
    faults
}

/// Per-cell tally of which input codes a test set applies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellCoverage {
    pub distinct: usize,
    /// Every code applied at least once.
    pub exhaustive: bool,
    pub has_duplicates: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageReport {
    pub per_cell: Vec<CellCoverage>,
    pub all_exhaustive: bool,
    pub any_duplicates: bool,
}

/// Measures, for every cell position, how much of the input space the
/// set's materialized codes exercise.
pub fn input_coverage(testset: &TestSet, grid: &IlaGrid) -> Result<CoverageReport> {
    check_testset_shape(testset, grid)?;
    let codes = grid.cell().code_count();
    let mut per_cell = Vec::with_capacity(grid.shape().cell_count());
    for idx in 0..grid.shape().cell_count() {
        let mut counts = vec![0usize; codes];
        for vector in &testset.vectors {
            counts[vector.cells[idx] as usize] += 1;
        }
        let distinct = counts.iter().filter(|&&c| c > 0).count();
        per_cell.push(CellCoverage {
            distinct,
            exhaustive: distinct == codes,
            has_duplicates: counts.iter().any(|&c| c > 1),
        });
    }
    Ok(CoverageReport {
        all_exhaustive: per_cell.iter().all(|c| c.exhaustive),
        any_duplicates: per_cell.iter().any(|c| c.has_duplicates),
        per_cell,
    })
}

fn check_testset_shape(testset: &TestSet, grid: &IlaGrid) -> Result<()> {
    if testset.shape != *grid.shape() {
        return Err(Error::ShapeMismatch(format!(
            "test set is for widths {:?} sizes {:?}, grid has widths {:?} sizes {:?}",
            testset.shape.widths(),
            testset.shape.sizes(),
            grid.shape().widths(),
            grid.shape().sizes()
        )));
    }
    let count = grid.shape().cell_count();
    let limit = grid.cell().code_count() as u32;
    for vector in &testset.vectors {
        if vector.cells.len() != count {
            return Err(Error::ShapeMismatch(format!(
                "vector {} materializes {} cells, grid has {count}",
                vector.id,
                vector.cells.len()
            )));
        }
        if let Some(&bad) = vector.cells.iter().find(|&&c| c >= limit) {
            return Err(Error::ShapeMismatch(format!(
                "vector {} applies code {bad}, cell has {limit} codes",
                vector.id
            )));
        }
        grid.validate_ports(&vector.primary_inputs, "primary inputs")?;
        grid.validate_ports(&vector.expected, "expected observables")?;
    }
    Ok(())
}

/// Simulates every vector fault-free and checks that the cells receive
/// exactly the materialized codes and the observables match the stored
/// expectations.
pub fn check_agreement(grid: &IlaGrid, testset: &TestSet) -> Result<()> {
    check_testset_shape(testset, grid)?;
    let count = grid.shape().cell_count();
    let mut inputs = vec![0u32; count];
    let mut outputs = vec![0u32; count];
    for vector in &testset.vectors {
        grid.eval_into(&vector.primary_inputs, None, &mut inputs, &mut outputs);
        if let Some(idx) = (0..count).find(|&i| inputs[i] != vector.cells[i]) {
            return Err(Error::VectorMismatch(format!(
                "vector {} cell {:?} receives code {}, set says {}",
                vector.id,
                grid.shape().unrank(idx),
                inputs[idx],
                vector.cells[idx]
            )));
        }
        let observables = grid.observables(&outputs);
        if observables != vector.expected {
            return Err(Error::VectorMismatch(format!(
                "vector {} observables disagree with the stored expectation",
                vector.id
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaultCampaignResult {
    pub total: usize,
    pub detected: usize,
    pub undetected: Vec<Fault>,
    /// How many of the faults each vector detects (a fault counts for
    /// every vector that exposes it).
    pub per_vector_detections: Vec<usize>,
    pub coverage: CoverageReport,
}

impl FaultCampaignResult {
    pub fn all_detected(&self) -> bool {
        self.undetected.is_empty()
    }

    /// Full verification verdict: no surviving fault and exhaustive
    /// per-cell input coverage.
    pub fn passed(&self) -> bool {
        self.all_detected() && self.coverage.all_exhaustive
    }

    pub fn to_json(&self) -> String {
        let mut text =
            serde_json::to_string(&self.to_json_value()).expect("campaign report serializes");
        text.push('\n');
        text
    }

    pub fn to_json_value(&self) -> Value {
        let mut root = Map::new();
        root.insert("total".into(), self.total.into());
        root.insert("detected".into(), self.detected.into());
        root.insert(
            "undetected".into(),
            self.undetected.iter().map(Fault::to_value).collect(),
        );
        root.insert(
            "per_vector_detections".into(),
            self.per_vector_detections.iter().copied().collect(),
        );
        let mut coverage = Map::new();
        coverage.insert("all_exhaustive".into(), self.coverage.all_exhaustive.into());
        coverage.insert("any_duplicates".into(), self.coverage.any_duplicates.into());
        coverage.insert(
            "per_cell".into(),
            self.coverage
                .per_cell
                .iter()
                .map(|c| {
                    let mut obj = Map::new();
                    obj.insert("distinct".into(), c.distinct.into());
                    obj.insert("exhaustive".into(), c.exhaustive.into());
                    obj.insert("has_duplicates".into(), c.has_duplicates.into());
                    Value::Object(obj)
                })
                .collect(),
        );
        root.insert("coverage".into(), Value::Object(coverage));
        Value::Object(root)
    }
}

/// Replays the whole test set against every fault. A fault is detected
/// if at least one vector changes some observable. All vectors are
/// evaluated for every fault so the per-vector tallies are complete.
pub fn run_campaign(
    grid: &IlaGrid,
    testset: &TestSet,
    faults: &[Fault],
) -> Result<FaultCampaignResult> {
    check_testset_shape(testset, grid)?;
    for fault in faults {
        grid.validate_fault(fault)?;
    }
    let coverage = input_coverage(testset, grid)?;
    let n_vectors = testset.vectors.len();
    let count = grid.shape().cell_count();

    let (mut undetected_idx, per_vector) = faults
        .par_iter()
        .enumerate()
        .fold(
            || {
                (
                    Vec::new(),
                    vec![0usize; n_vectors],
                    vec![0u32; count],
                    vec![0u32; count],
                )
            },
            |(mut undetected, mut per_vector, mut inputs, mut outputs), (idx, fault)| {
                let mut hit = false;
                for (v, vector) in testset.vectors.iter().enumerate() {
                    if grid.vector_detects(vector, fault, &mut inputs, &mut outputs) {
                        per_vector[v] += 1;
                        hit = true;
                    }
                }
                if !hit {
                    undetected.push(idx);
                }
                (undetected, per_vector, inputs, outputs)
            },
        )
        .map(|(undetected, per_vector, _, _)| (undetected, per_vector))
        .reduce(
            || (Vec::new(), vec![0usize; n_vectors]),
            |(mut u1, mut p1), (u2, p2)| {
                u1.extend(u2);
                for (a, b) in p1.iter_mut().zip(p2) {
                    *a += b;
                }
                (u1, p1)
            },
        );
    undetected_idx.sort_unstable();
    let undetected: Vec<Fault> = undetected_idx.iter().map(|&i| faults[i].clone()).collect();
    Ok(FaultCampaignResult {
        total: faults.len(),
        detected: faults.len() - undetected.len(),
        undetected,
        per_vector_detections: per_vector,
        coverage,
    })
}

/// Campaign against `trials` random whole-table replacements (uniform
/// over all functions, resampled if one equals the fault-free table) at
/// random positions. Deterministic in `seed`.
pub fn random_table_fault_campaign(
    grid: &IlaGrid,
    testset: &TestSet,
    trials: usize,
    seed: u64,
) -> Result<FaultCampaignResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let codes = grid.cell().code_count() as u32;
    let mut faults = Vec::with_capacity(trials);
    for _ in 0..trials {
        let position = grid
            .shape()
            .unrank(rng.gen_range(0..grid.shape().cell_count()));
        let table = loop {
            let table: Vec<u32> = (0..codes).map(|_| rng.gen_range(0..codes)).collect();
            if table != grid.cell().table() {
                break table;
            }
        };
        let func = CombinationalFunction::new(grid.cell().h(), grid.cell().v(), table)?;
        faults.push(Fault {
            position,
            kind: FaultKind::TableReplace { table: func },
        });
    }
    run_campaign(grid, testset, &faults)
}
