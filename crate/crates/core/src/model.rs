//! Node-level data model: identifiers, instruction set, connection tables,
//! and per-node programs, validated against the architectural limits
//! (16-bit address space, 256-entry connection memory, per-opcode arity).

use std::fmt;

use crate::config::SystemConfig;

/// Number of addressable nodes across all chiplets (16-bit address space).
pub const ADDRESS_SPACE: u32 = 65_536;

/// Maximum connection-table entries per node.
pub const MAX_FAN_IN: usize = 256;

/// Global node address, unique across all chiplets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    /// Chip index this id falls on for a given die size.
    pub fn chip_index(self, nodes_per_chip: u32) -> u32 {
        u32::from(self.0) / nodes_per_chip
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A node's epoch output: one 16-bit datapath word.
pub type Word = i16;

/// One inbound connection: source node plus an 8-bit weight.
///
/// Serialized as 24 bits (16-bit source, 8-bit weight) — the unit of one
/// connection-memory read per clock.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConnectionEntry {
    pub source: NodeId,
    pub weight: i8,
}

/// Boot-loaded connection table: up to 256 source entries, kept sorted by
/// source id so that matching against an ascending broadcast stream is a
/// single forward scan.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AddressTable {
    entries: Vec<ConnectionEntry>,
}

impl AddressTable {
    /// Builds a table from arbitrary entries, sorting them into canonical
    /// ascending-source order. Duplicates and over-length tables are
    /// representable; `validate_program` reports them as violations.
    pub fn new(mut entries: Vec<ConnectionEntry>) -> Self {
        entries.sort_by_key(|e| e.source);
        Self { entries }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ConnectionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First duplicated source id, if any.
    pub fn duplicate_source(&self) -> Option<NodeId> {
        self.entries
            .windows(2)
            .find(|w| w[0].source == w[1].source)
            .map(|w| w[0].source)
    }
}

/// The single task a core is initialized to perform.
///
/// Reducers (ACC, THRESH, MAX, MIN, AND, OR, XOR) take 1..=256 inputs;
/// PASS and NOT take exactly one; CONST takes none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Pass,
    Acc,
    Thresh,
    Max,
    Min,
    And,
    Or,
    Xor,
    Not,
    Const,
}

/// Inclusive input-count range an opcode accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArityClass {
    pub min: usize,
    pub max: usize,
}

impl Opcode {
    pub const ALL: [Opcode; 10] = [
        Opcode::Pass,
        Opcode::Acc,
        Opcode::Thresh,
        Opcode::Max,
        Opcode::Min,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Not,
        Opcode::Const,
    ];

    pub fn arity(self) -> ArityClass {
        match self {
            Opcode::Pass | Opcode::Not => ArityClass { min: 1, max: 1 },
            Opcode::Const => ArityClass { min: 0, max: 0 },
            _ => ArityClass {
                min: 1,
                max: MAX_FAN_IN,
            },
        }
    }

    /// True for opcodes that fold an input set down to one word.
    pub fn is_reducer(self) -> bool {
        matches!(
            self,
            Opcode::Acc
                | Opcode::Thresh
                | Opcode::Max
                | Opcode::Min
                | Opcode::And
                | Opcode::Or
                | Opcode::Xor
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Opcode::Pass => "PASS",
            Opcode::Acc => "ACC",
            Opcode::Thresh => "THRESH",
            Opcode::Max => "MAX",
            Opcode::Min => "MIN",
            Opcode::And => "AND",
            Opcode::Or => "OR",
            Opcode::Xor => "XOR",
            Opcode::Not => "NOT",
            Opcode::Const => "CONST",
        }
    }

    pub fn from_name(name: &str) -> Option<Opcode> {
        Opcode::ALL.iter().copied().find(|op| op.name() == name)
    }
}

impl fmt::Display for Opcode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One core's boot-loaded configuration: its task, parameter, connection
/// table, and host-readout flag.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeProgram {
    pub id: NodeId,
    pub opcode: Opcode,
    /// Threshold for THRESH, constant for CONST, ignored otherwise.
    pub param: i16,
    pub table: AddressTable,
    pub is_output: bool,
}

impl NodeProgram {
    pub fn new(id: NodeId, opcode: Opcode, param: i16, table: AddressTable) -> Self {
        Self {
            id,
            opcode,
            param,
            table,
            is_output: false,
        }
    }

    pub fn with_output(mut self) -> Self {
        self.is_output = true;
        self
    }
}

/// A violated architectural limit. Violations are data, not failures:
/// `validate_program` collects every one it finds, in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    IdOutOfRange {
        id: NodeId,
        total_nodes: u32,
    },
    FanInExceeded {
        id: NodeId,
        fan_in: usize,
    },
    ArityMismatch {
        id: NodeId,
        opcode: Opcode,
        fan_in: usize,
    },
    DuplicateSource {
        id: NodeId,
        source: NodeId,
    },
    DuplicateId {
        id: NodeId,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::IdOutOfRange { id, total_nodes } => {
                write!(
                    f,
                    "node {id}: id out of range (system has {total_nodes} nodes)"
                )
            }
            Violation::FanInExceeded { id, fan_in } => {
                write!(f, "node {id}: fan-in {fan_in} exceeds {MAX_FAN_IN}")
            }
            Violation::ArityMismatch { id, opcode, fan_in } => {
                let a = opcode.arity();
                write!(
                    f,
                    "node {id}: {opcode} takes {}..={} inputs, table has {fan_in}",
                    a.min, a.max
                )
            }
            Violation::DuplicateSource { id, source } => {
                write!(f, "node {id}: source {source} appears more than once")
            }
            Violation::DuplicateId { id } => write!(f, "node id {id} programmed more than once"),
        }
    }
}

/// Checks one program against the architectural limits. Returns every
/// violated invariant; an empty list means the program is loadable.
pub fn validate_program(program: &NodeProgram, cfg: &SystemConfig) -> Vec<Violation> {
    let mut violations = Vec::new();
    let id = program.id;
    if u32::from(id.0) >= cfg.total_nodes {
        violations.push(Violation::IdOutOfRange {
            id,
            total_nodes: cfg.total_nodes,
        });
    }
    let fan_in = program.table.len();
    if fan_in > MAX_FAN_IN {
        violations.push(Violation::FanInExceeded { id, fan_in });
    }
    let arity = program.opcode.arity();
    if fan_in < arity.min || fan_in > arity.max {
        // Avoid double-reporting: fan-in > 256 already covered above.
        if fan_in <= MAX_FAN_IN {
            violations.push(Violation::ArityMismatch {
                id,
                opcode: program.opcode,
                fan_in,
            });
        }
    }
    if let Some(source) = program.table.duplicate_source() {
        violations.push(Violation::DuplicateSource { id, source });
    }
    violations
}

/// Validates a whole system image: every program individually, plus the
/// rule that a node id is programmed at most once.
pub fn validate_system(programs: &[NodeProgram], cfg: &SystemConfig) -> Vec<Violation> {
    let mut violations = Vec::new();
    for program in programs {
        violations.extend(validate_program(program, cfg));
    }
    let mut ids: Vec<NodeId> = programs.iter().map(|p| p.id).collect();
    ids.sort();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] && violations.last() != Some(&Violation::DuplicateId { id: pair[0] })
        {
            violations.push(Violation::DuplicateId { id: pair[0] });
        }
    }
    violations
}

/// Evaluates one node over its matched `(value, weight)` pairs for the
/// epoch, in table order. Pure function of its arguments.
///
/// ACC and THRESH accumulate value×weight products in a 32-bit accumulator
/// with saturating adds, then saturate the result to the 16-bit datapath;
/// THRESH fires 1 when that clamped sum reaches `param`. Boolean opcodes
/// fold bitwise over the 16-bit words and ignore weights, as do MAX/MIN.
///
/// In sparse operation an input may be absent from the stream (its source
/// held zero); callers then pass fewer pairs than the table defines and
/// reducers fold over what arrived. A starved PASS yields 0 and a starved
/// NOT yields !0.
pub fn eval_node(program: &NodeProgram, inputs: &[(Word, i8)]) -> Word {
    debug_assert!(
        inputs.len() <= program.opcode.arity().max,
        "node {}: {} inputs exceed {} arity",
        program.id,
        inputs.len(),
        program.opcode
    );
    match program.opcode {
        Opcode::Pass => inputs.first().map_or(0, |&(v, _)| v),
        Opcode::Not => !inputs.first().map_or(0, |&(v, _)| v),
        Opcode::Const => program.param,
        Opcode::Acc => weighted_sum(inputs),
        Opcode::Thresh => {
            if weighted_sum(inputs) >= program.param {
                1
            } else {
                0
            }
        }
        Opcode::Max => reduce_values(inputs, Word::max),
        Opcode::Min => reduce_values(inputs, Word::min),
        Opcode::And => reduce_values(inputs, |a, b| a & b),
        Opcode::Or => reduce_values(inputs, |a, b| a | b),
        Opcode::Xor => reduce_values(inputs, |a, b| a ^ b),
    }
}

/// Folds input values with `f`, ignoring weights; zero inputs yield 0.
fn reduce_values(inputs: &[(Word, i8)], f: impl Fn(Word, Word) -> Word) -> Word {
    inputs.iter().map(|&(v, _)| v).reduce(f).unwrap_or(0)
}

/// Σ value×weight over a 32-bit saturating accumulator, saturated to the
/// 16-bit output range.
fn weighted_sum(inputs: &[(Word, i8)]) -> Word {
    let mut acc: i32 = 0;
    for &(value, weight) in inputs {
        acc = acc.saturating_add(i32::from(value) * i32::from(weight));
    }
    acc.clamp(i32::from(Word::MIN), i32::from(Word::MAX)) as Word
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SystemConfig;

    fn table(sources: &[(u16, i8)]) -> AddressTable {
        AddressTable::new(
            sources
                .iter()
                .map(|&(s, w)| ConnectionEntry {
                    source: NodeId(s),
                    weight: w,
                })
                .collect(),
        )
    }

    #[test]
    fn pass_is_identity() {
        let p = NodeProgram::new(NodeId(1), Opcode::Pass, 0, table(&[(0, 1)]));
        assert_eq!(eval_node(&p, &[(5, 1)]), 5);
    }

    #[test]
    fn thresh_fires_at_exact_boundary() {
        // 3*2 + 4*1 = 10, param 10: sum == param fires.
        let p = NodeProgram::new(NodeId(2), Opcode::Thresh, 10, table(&[(0, 2), (1, 1)]));
        assert_eq!(eval_node(&p, &[(3, 2), (4, 1)]), 1);
        // One short of the threshold does not fire.
        let p = NodeProgram::new(NodeId(2), Opcode::Thresh, 11, table(&[(0, 2), (1, 1)]));
        assert_eq!(eval_node(&p, &[(3, 2), (4, 1)]), 0);
    }

    #[test]
    fn xor_truth_table() {
        let p = NodeProgram::new(NodeId(3), Opcode::Xor, 0, table(&[(0, 1), (1, 1)]));
        assert_eq!(eval_node(&p, &[(0b1100, 1), (0b1010, 1)]), 0b0110);
    }

    #[test]
    fn acc_saturates_to_word_max() {
        // 32767 * 127 = 4_161_409 exceeds the 16-bit range.
        let p = NodeProgram::new(NodeId(4), Opcode::Acc, 0, table(&[(0, 127)]));
        assert_eq!(eval_node(&p, &[(32767, 127)]), 32767);
        let p = NodeProgram::new(NodeId(4), Opcode::Acc, 0, table(&[(0, -127)]));
        assert_eq!(eval_node(&p, &[(32767, -127)]), -32768);
    }

    #[test]
    fn thresh_compares_against_clamped_sum() {
        // Sum -50000 clamps to -32768 before the compare, so param -32768 fires.
        let p = NodeProgram::new(
            NodeId(5),
            Opcode::Thresh,
            -32768,
            table(&[(0, 125), (1, 125)]),
        );
        assert_eq!(eval_node(&p, &[(-200, 125), (-200, 125)]), 1);
    }

    #[test]
    fn const_ignores_inputs() {
        let p = NodeProgram::new(NodeId(6), Opcode::Const, -42, AddressTable::empty());
        assert_eq!(eval_node(&p, &[]), -42);
    }

    #[test]
    fn not_complements() {
        let p = NodeProgram::new(NodeId(7), Opcode::Not, 0, table(&[(0, 1)]));
        assert_eq!(eval_node(&p, &[(0, 1)]), !0i16);
        assert_eq!(eval_node(&p, &[(0b1100, 1)]), !0b1100i16);
    }

    #[test]
    fn minimal_legal_program_validates_clean() {
        let cfg = SystemConfig::single_chip();
        let p = NodeProgram::new(NodeId(5), Opcode::Pass, 0, table(&[(0, 1)]));
        assert!(validate_program(&p, &cfg).is_empty());
    }

    #[test]
    fn fan_in_boundary_plus_one_is_rejected() {
        let cfg = SystemConfig::single_chip();
        let entries: Vec<(u16, i8)> = (0..257).map(|i| (i as u16, 1)).collect();
        let p = NodeProgram::new(NodeId(500), Opcode::Acc, 0, table(&entries));
        assert_eq!(
            validate_program(&p, &cfg),
            vec![Violation::FanInExceeded {
                id: NodeId(500),
                fan_in: 257
            }]
        );
        // Exactly 256 is legal.
        let entries: Vec<(u16, i8)> = (0..256).map(|i| (i as u16, 1)).collect();
        let p = NodeProgram::new(NodeId(500), Opcode::Acc, 0, table(&entries));
        assert!(validate_program(&p, &cfg).is_empty());
    }

    #[test]
    fn id_one_past_system_size_is_rejected() {
        let cfg = SystemConfig::single_chip(); // 3200 nodes
        let p = NodeProgram::new(NodeId(3200), Opcode::Pass, 0, table(&[(0, 1)]));
        assert_eq!(
            validate_program(&p, &cfg),
            vec![Violation::IdOutOfRange {
                id: NodeId(3200),
                total_nodes: 3200
            }]
        );
    }

    #[test]
    fn arity_and_duplicate_violations_reported_together() {
        let cfg = SystemConfig::single_chip();
        let p = NodeProgram::new(NodeId(9), Opcode::Pass, 0, table(&[(0, 1), (0, 2), (1, 1)]));
        assert_eq!(
            validate_program(&p, &cfg),
            vec![
                Violation::ArityMismatch {
                    id: NodeId(9),
                    opcode: Opcode::Pass,
                    fan_in: 3
                },
                Violation::DuplicateSource {
                    id: NodeId(9),
                    source: NodeId(0)
                },
            ]
        );
    }

    #[test]
    fn duplicate_ids_reported_once_per_id() {
        let cfg = SystemConfig::single_chip();
        let a = NodeProgram::new(NodeId(1), Opcode::Const, 1, AddressTable::empty());
        let b = NodeProgram::new(NodeId(1), Opcode::Const, 2, AddressTable::empty());
        assert_eq!(
            validate_system(&[a, b], &cfg),
            vec![Violation::DuplicateId { id: NodeId(1) }]
        );
    }

    #[test]
    fn table_sorts_into_canonical_order() {
        let t = table(&[(9, 1), (2, 2), (5, 3)]);
        let sources: Vec<u16> = t.entries().iter().map(|e| e.source.0).collect();
        assert_eq!(sources, vec![2, 5, 9]);
    }
}
