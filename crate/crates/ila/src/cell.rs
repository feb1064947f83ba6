//! Cell functions for iterative logic arrays: explicit truth tables and
//! k-CNOT netlists.
//!
//! An `(h, v)`-cell has `h` horizontal and `v` vertical wires on each side.
//! A full input or output code packs the horizontal bits in the high
//! positions and the vertical bits in the low positions:
//! `code = (h_bits << v) | v_bits`, with wire 0 the most significant
//! horizontal bit. Netlist wires `0..h` are horizontal and `h..h+v`
//! vertical, so wire `w` maps to bit `h + v - 1 - w` of the code.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default cap on `h + v`. 2^12-entry tables keep every exhaustive
/// operation (enumeration, fault universes) instant.
pub const DEFAULT_MAX_WIDTH: usize = 12;

/// An arbitrary combinational cell function over `h + v` wires.
///
/// No bijectivity is required; this type also represents faulty cell
/// behavior. Use [`BijectiveCell`] for validated permutations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CombinationalFunction {
    h: usize,
    v: usize,
    table: Vec<u32>,
}

impl CombinationalFunction {
    pub fn new(h: usize, v: usize, table: Vec<u32>) -> Result<Self> {
        Self::with_max_width(h, v, table, DEFAULT_MAX_WIDTH)
    }

    /// Like [`CombinationalFunction::new`] with an explicit width cap.
    pub fn with_max_width(h: usize, v: usize, table: Vec<u32>, cap: usize) -> Result<Self> {
        if h < 1 || v < 1 {
            return Err(Error::EmptyWireGroup { h, v });
        }
        let width = h + v;
        if width > cap {
            return Err(Error::WidthCap { width, cap });
        }
        let expected = 1usize << width;
        if table.len() != expected {
            return Err(Error::TableLength {
                expected,
                got: table.len(),
            });
        }
        if let Some(&code) = table.iter().find(|&&c| c as usize >= expected) {
            return Err(Error::CodeOutOfRange { code, width });
        }
        Ok(Self { h, v, table })
    }

    pub fn h(&self) -> usize {
        self.h
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn width(&self) -> usize {
        self.h + self.v
    }

    /// Number of input codes, `2^(h+v)`.
    pub fn code_count(&self) -> usize {
        self.table.len()
    }

    pub fn table(&self) -> &[u32] {
        &self.table
    }

    /// Output code for `code`. Panics if `code` is out of range.
    pub fn apply(&self, code: u32) -> u32 {
        self.table[code as usize]
    }

    /// Horizontal bits of a code: `code >> v`.
    pub fn project_h(&self, code: u32) -> u32 {
        code >> self.v
    }

    /// Vertical bits of a code: `code & (2^v - 1)`.
    pub fn project_v(&self, code: u32) -> u32 {
        code & ((1u32 << self.v) - 1)
    }
}

/// A validated bijective cell: the truth table is a permutation of the
/// input space. Bijectivity is what lets a single-cell discrepancy
/// propagate through fault-free neighbors to an observable output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BijectiveCell {
    func: CombinationalFunction,
}

impl BijectiveCell {
    /// Validates that `func`'s table is a permutation. On failure reports
    /// the first duplicated output code and both rows producing it.
    pub fn from_function(func: CombinationalFunction) -> Result<Self> {
        let mut seen_at: Vec<Option<u32>> = vec![None; func.code_count()];
        for (row, &code) in func.table.iter().enumerate() {
            if let Some(first) = seen_at[code as usize] {
                return Err(Error::NotBijective {
                    code,
                    first_index: first,
                    second_index: row as u32,
                });
            }
            seen_at[code as usize] = Some(row as u32);
        }
        Ok(Self { func })
    }

    pub fn from_table(h: usize, v: usize, table: Vec<u32>) -> Result<Self> {
        Self::from_function(CombinationalFunction::new(h, v, table)?)
    }

    /// The identity cell: every code maps to itself.
    pub fn identity(h: usize, v: usize) -> Result<Self> {
        let func = CombinationalFunction::new(h, v, (0..1u32 << (h + v)).collect())?;
        Ok(Self { func })
    }

    pub fn function(&self) -> &CombinationalFunction {
        &self.func
    }

    pub fn h(&self) -> usize {
        self.func.h()
    }

    pub fn v(&self) -> usize {
        self.func.v()
    }

    pub fn width(&self) -> usize {
        self.func.width()
    }

    pub fn code_count(&self) -> usize {
        self.func.code_count()
    }

    pub fn table(&self) -> &[u32] {
        self.func.table()
    }

    pub fn apply(&self, code: u32) -> u32 {
        self.func.apply(code)
    }

    pub fn project_h(&self, code: u32) -> u32 {
        self.func.project_h(code)
    }

    pub fn project_v(&self, code: u32) -> u32 {
        self.func.project_v(code)
    }

    /// Content hash binding test sets to the exact cell they were
    /// generated for.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!("ila-cell-v1 h={} v={} table=", self.h(), self.v()));
        for (i, code) in self.table().iter().enumerate() {
            if i > 0 {
                hasher.update(b",");
            }
            hasher.update(code.to_string());
        }
        format!("sha256:{}", hex::encode(hasher.finalize()))
    }
}

/// A controlled-NOT gate: passes every wire through unchanged except the
/// target, which is inverted iff all control wires carry 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnotGate {
    controls: Vec<usize>,
    target: usize,
}

impl CnotGate {
    /// Controls are stored sorted; duplicates and control==target are
    /// rejected. Width bounds are checked by [`CnotNetlist::new`].
    pub fn new(controls: impl IntoIterator<Item = usize>, target: usize) -> Result<Self> {
        let mut controls: Vec<usize> = controls.into_iter().collect();
        controls.sort_unstable();
        for pair in controls.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::DuplicateControl { wire: pair[0] });
            }
        }
        if controls.contains(&target) {
            return Err(Error::TargetIsControl { wire: target });
        }
        Ok(Self { controls, target })
    }

    pub fn controls(&self) -> &[usize] {
        &self.controls
    }

    pub fn target(&self) -> usize {
        self.target
    }
}

/// An ordered sequence of CNOT gates over `width` wires, evaluated
/// left-to-right. Each gate is an involution on codes, so the composite
/// mapping is always a permutation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CnotNetlist {
    width: usize,
    gates: Vec<CnotGate>,
}

fn wire_bit(width: usize, wire: usize) -> u32 {
    1u32 << (width - 1 - wire)
}

impl CnotNetlist {
    pub fn new(width: usize, gates: Vec<CnotGate>) -> Result<Self> {
        for gate in &gates {
            for &wire in gate.controls().iter().chain(std::iter::once(&gate.target)) {
                if wire >= width {
                    return Err(Error::WireOutOfRange { wire, width });
                }
            }
            // |controls| <= width - 1 follows from the two rules above.
            debug_assert!(gate.controls().len() <= width.saturating_sub(1));
        }
        Ok(Self { width, gates })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn gates(&self) -> &[CnotGate] {
        &self.gates
    }

    /// Applies the gates in listed order to `input`.
    pub fn eval(&self, input: u32) -> Result<u32> {
        if input as usize >= 1usize << self.width {
            return Err(Error::CodeOutOfRange {
                code: input,
                width: self.width,
            });
        }
        let mut code = input;
        for gate in &self.gates {
            let all_on = gate
                .controls()
                .iter()
                .all(|&c| code & wire_bit(self.width, c) != 0);
            if all_on {
                code ^= wire_bit(self.width, gate.target);
            }
        }
        Ok(code)
    }

    /// The same gates in reverse order. Each gate is self-inverse, so the
    /// reversed netlist computes the inverse permutation.
    pub fn reversed(&self) -> CnotNetlist {
        CnotNetlist {
            width: self.width,
            gates: self.gates.iter().rev().cloned().collect(),
        }
    }

    /// Compiles the netlist to a truth table cell with the given wire
    /// split.
    pub fn to_cell(&self, h: usize, v: usize) -> Result<BijectiveCell> {
        if h + v != self.width {
            return Err(Error::WidthMismatch {
                expected: h + v,
                got: self.width,
            });
        }
        let table: Vec<u32> = (0..1u32 << self.width)
            .map(|code| self.eval(code).expect("in-range code"))
            .collect();
        BijectiveCell::from_table(h, v, table)
    }
}

/// Uniform random bijective cell from a seeded deterministic PRNG.
/// The same seed always yields the same cell.
pub fn random_cell(h: usize, v: usize, seed: u64) -> Result<BijectiveCell> {
    random_cell_with_cap(h, v, seed, DEFAULT_MAX_WIDTH)
}

pub fn random_cell_with_cap(h: usize, v: usize, seed: u64, cap: usize) -> Result<BijectiveCell> {
    if h < 1 || v < 1 {
        return Err(Error::EmptyWireGroup { h, v });
    }
    if h + v > cap {
        return Err(Error::WidthCap { width: h + v, cap });
    }
    let mut table: Vec<u32> = (0..1u32 << (h + v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    table.shuffle(&mut rng);
    Ok(BijectiveCell {
        func: CombinationalFunction::with_max_width(h, v, table, cap)?,
    })
}

#[derive(Serialize, Deserialize)]
struct RawGate {
    controls: Vec<usize>,
    target: usize,
}

#[derive(Serialize, Deserialize)]
struct RawNetlist {
    gates: Vec<RawGate>,
}

#[derive(Serialize, Deserialize)]
struct RawCellSpec {
    h: usize,
    v: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    table: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    netlist: Option<RawNetlist>,
}

/// Parses a cell spec file. Exactly one of `"table"` / `"netlist"` must be
/// present; either way the result is a validated bijective cell.
pub fn parse_cell_spec(text: &str) -> Result<BijectiveCell> {
    let raw: RawCellSpec =
        serde_json::from_str(text).map_err(|e| Error::SpecFormat(e.to_string()))?;
    match (raw.table, raw.netlist) {
        (Some(table), None) => BijectiveCell::from_table(raw.h, raw.v, table),
        (None, Some(netlist)) => {
            let gates = netlist
                .gates
                .into_iter()
                .map(|g| CnotGate::new(g.controls, g.target))
                .collect::<Result<Vec<_>>>()?;
            CnotNetlist::new(raw.h + raw.v, gates)?.to_cell(raw.h, raw.v)
        }
        (Some(_), Some(_)) => Err(Error::SpecFormat(
            "spec has both \"table\" and \"netlist\"; exactly one is allowed".into(),
        )),
        (None, None) => Err(Error::SpecFormat(
            "spec needs either \"table\" or \"netlist\"".into(),
        )),
    }
}

/// Serializes a cell as a table-form spec. Byte-stable for a given cell.
pub fn cell_spec_json(cell: &BijectiveCell) -> String {
    let raw = RawCellSpec {
        h: cell.h(),
        v: cell.v(),
        table: Some(cell.table().to_vec()),
        netlist: None,
    };
    let mut text = serde_json::to_string(&raw).expect("cell spec serializes");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The (2,1)-cell used as the worked example throughout: states
    /// q0..q3 are the horizontal bit pairs 00..11.
    pub(crate) fn example_cell_2_1() -> BijectiveCell {
        BijectiveCell::from_table(2, 1, vec![1, 0, 3, 7, 6, 4, 5, 2]).unwrap()
    }

    #[test]
    fn toffoli_gate_flips_target_when_controls_on() {
        let netlist = CnotNetlist::new(3, vec![CnotGate::new([0, 1], 2).unwrap()]).unwrap();
        assert_eq!(netlist.eval(0b110).unwrap(), 0b111);
        assert_eq!(netlist.eval(0b111).unwrap(), 0b110);
    }

    #[test]
    fn gate_identity_when_any_control_off() {
        let netlist = CnotNetlist::new(3, vec![CnotGate::new([0, 1], 2).unwrap()]).unwrap();
        assert_eq!(netlist.eval(0b010).unwrap(), 0b010);
        assert_eq!(netlist.eval(0b001).unwrap(), 0b001);
    }

    #[test]
    fn zero_cnot_is_an_inverter() {
        let netlist = CnotNetlist::new(1, vec![CnotGate::new([], 0).unwrap()]).unwrap();
        assert_eq!(netlist.eval(0).unwrap(), 1);
        assert_eq!(netlist.eval(1).unwrap(), 0);
    }

    #[test]
    fn eval_rejects_out_of_range_input() {
        let netlist = CnotNetlist::new(2, vec![]).unwrap();
        assert!(matches!(
            netlist.eval(4),
            Err(Error::CodeOutOfRange { code: 4, width: 2 })
        ));
    }

    #[test]
    fn empty_netlist_compiles_to_identity() {
        let cell = CnotNetlist::new(2, vec![]).unwrap().to_cell(1, 1).unwrap();
        assert_eq!(cell.table(), &[0, 1, 2, 3]);
    }

    #[test]
    fn not_on_vertical_wire_flips_low_bit() {
        // Wire 1 of a (1,1)-cell is the vertical wire, i.e. the low bit.
        let netlist = CnotNetlist::new(2, vec![CnotGate::new([], 1).unwrap()]).unwrap();
        let cell = netlist.to_cell(1, 1).unwrap();
        assert_eq!(cell.table(), &[1, 0, 3, 2]);
    }

    #[test]
    fn netlist_width_mismatch_rejected() {
        let netlist = CnotNetlist::new(3, vec![]).unwrap();
        assert!(matches!(
            netlist.to_cell(1, 1),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn gate_constructors_reject_bad_wires() {
        assert!(matches!(
            CnotGate::new([1, 1], 0),
            Err(Error::DuplicateControl { wire: 1 })
        ));
        assert!(matches!(
            CnotGate::new([0, 2], 2),
            Err(Error::TargetIsControl { wire: 2 })
        ));
        let gate = CnotGate::new([0, 3], 1).unwrap();
        assert!(matches!(
            CnotNetlist::new(3, vec![gate]),
            Err(Error::WireOutOfRange { wire: 3, width: 3 })
        ));
    }

    fn random_netlist(width: usize, gates: usize, seed: u64) -> CnotNetlist {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gates = (0..gates)
            .map(|_| {
                let target = rng.gen_range(0..width);
                let controls: Vec<usize> = (0..width)
                    .filter(|&w| w != target && rng.gen_bool(0.5))
                    .collect();
                CnotGate::new(controls, target).unwrap()
            })
            .collect();
        CnotNetlist::new(width, gates).unwrap()
    }

    #[test]
    fn random_netlists_compile_to_permutations() {
        for seed in 0..20 {
            let netlist = random_netlist(4, 50, seed);
            let cell = netlist.to_cell(2, 2).expect("netlists are bijective");
            // Reversing the gate order inverts the permutation.
            let reversed = netlist.reversed();
            for code in 0..16u32 {
                assert_eq!(netlist.eval(reversed.eval(code).unwrap()).unwrap(), code);
            }
            assert_eq!(cell.width(), 4);
        }
    }

    #[test]
    fn example_cell_is_bijective() {
        let cell = example_cell_2_1();
        assert_eq!(cell.h(), 2);
        assert_eq!(cell.v(), 1);
        assert_eq!(cell.apply(0b000), 0b001);
        assert_eq!(cell.apply(0b111), 0b010);
    }

    #[test]
    fn duplicate_output_reported_with_both_rows() {
        let err = BijectiveCell::from_table(1, 1, vec![0, 0, 1, 2]).unwrap_err();
        match err {
            Error::NotBijective {
                code,
                first_index,
                second_index,
            } => {
                assert_eq!(code, 0);
                assert_eq!(first_index, 0);
                assert_eq!(second_index, 1);
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn wrong_table_length_rejected() {
        assert!(matches!(
            BijectiveCell::from_table(2, 1, vec![0, 1, 2, 3, 4, 5, 6]),
            Err(Error::TableLength {
                expected: 8,
                got: 7
            })
        ));
    }

    #[test]
    fn entry_out_of_range_rejected() {
        assert!(matches!(
            CombinationalFunction::new(1, 1, vec![0, 1, 2, 4]),
            Err(Error::CodeOutOfRange { code: 4, width: 2 })
        ));
    }

    #[test]
    fn width_cap_enforced() {
        let table: Vec<u32> = (0..1u32 << 13).collect();
        assert!(matches!(
            BijectiveCell::from_table(12, 1, table),
            Err(Error::WidthCap { width: 13, cap: 12 })
        ));
        assert!(random_cell(12, 1, 0).is_err());
        assert!(random_cell_with_cap(12, 1, 0, 13).is_ok());
    }

    #[test]
    fn projections_split_and_reassemble_codes() {
        let cell = example_cell_2_1();
        assert_eq!(cell.project_h(0b110), 0b11);
        assert_eq!(cell.project_v(0b110), 0);
        assert_eq!(cell.project_h(0), 0);
        assert_eq!(cell.project_v(0), 0);
        for code in 0..8u32 {
            assert_eq!((cell.project_h(code) << 1) | cell.project_v(code), code);
        }
    }

    #[test]
    fn random_cell_is_deterministic_per_seed() {
        let a = random_cell(1, 1, 7).unwrap();
        let b = random_cell(1, 1, 7).unwrap();
        assert_eq!(a.table(), b.table());
        let c = random_cell(2, 1, 3).unwrap();
        assert!(BijectiveCell::from_table(2, 1, c.table().to_vec()).is_ok());
    }

    #[test]
    fn random_cell_distribution_is_near_uniform() {
        // 1000 seeded draws over the 24 permutations of a (1,1)-cell.
        // Chi-square with 23 degrees of freedom: mean 23, sigma sqrt(46);
        // 23 + 5*sigma ~ 56.9.
        let mut counts = std::collections::BTreeMap::new();
        for seed in 0..1000u64 {
            let cell = random_cell(1, 1, seed).unwrap();
            *counts.entry(cell.table().to_vec()).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 24, "every permutation should appear");
        let expected = 1000.0 / 24.0;
        let chi2: f64 = counts
            .values()
            .map(|&n| {
                let d = n as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 56.9, "chi-square {chi2} too far from uniform");
    }

    #[test]
    fn spec_parses_table_form() {
        let cell = parse_cell_spec(r#"{"h":2,"v":1,"table":[1,0,3,7,6,4,5,2]}"#).unwrap();
        assert_eq!(cell.table(), example_cell_2_1().table());
    }

    #[test]
    fn spec_parses_netlist_form() {
        let text = r#"{"h":2,"v":1,"netlist":{"gates":[{"controls":[0,1],"target":2}]}}"#;
        let cell = parse_cell_spec(text).unwrap();
        // A single Toffoli targeting the vertical wire.
        assert_eq!(cell.table(), &[0, 1, 2, 3, 4, 5, 7, 6]);
    }

    #[test]
    fn spec_requires_exactly_one_form() {
        assert!(parse_cell_spec(r#"{"h":1,"v":1}"#).is_err());
        assert!(
            parse_cell_spec(r#"{"h":1,"v":1,"table":[0,1,2,3],"netlist":{"gates":[]}}"#).is_err()
        );
    }

    #[test]
    fn spec_round_trips_identically() {
        let cell = example_cell_2_1();
        let text = cell_spec_json(&cell);
        let parsed = parse_cell_spec(&text).unwrap();
        assert_eq!(parsed.table(), cell.table());
        assert_eq!(cell_spec_json(&parsed), text);
    }

    #[test]
    fn digest_is_stable_and_cell_specific() {
        let a = example_cell_2_1();
        let b = BijectiveCell::identity(2, 1).unwrap();
        assert_eq!(a.digest(), a.digest());
        assert_ne!(a.digest(), b.digest());
        assert!(a.digest().starts_with("sha256:"));
    }
}
