//! Independent dense reference executor.
//!
//! A deliberately naive second implementation of the machine's epoch
//! semantics, kept free of the stream/match machinery: for each node it
//! loops over the address table and reads source outputs straight out of
//! a plain array. The engine in [`crate::sim`] must agree with this model
//! bit for bit; the equivalence suite holds the two implementations
//! against each other the way a behavioral model is held against the
//! hardware design it specifies.
//!
//! Nothing here may call into the simulator's gather path. The opcode
//! arithmetic is restated locally for the same reason.

use std::collections::BTreeMap;

use crate::config::SystemConfig;
use crate::model::{NodeId, NodeProgram, Opcode, Word};
use crate::sim::TraceRow;

/// Dense epoch executor over plain arrays.
pub struct ReferenceExecutor {
    programs: Vec<Option<NodeProgram>>,
    outputs: Vec<Word>,
    epoch: u32,
}

impl ReferenceExecutor {
    /// Callers are expected to validate programs first; this model
    /// assumes a loadable image.
    pub fn new(programs: Vec<NodeProgram>, cfg: &SystemConfig) -> Self {
        let mut slots: Vec<Option<NodeProgram>> = vec![None; cfg.total_nodes as usize];
        for program in programs {
            let index = usize::from(program.id.0);
            slots[index] = Some(program);
        }
        Self {
            programs: slots,
            outputs: vec![0; cfg.total_nodes as usize],
            epoch: 0,
        }
    }

    pub fn output(&self, id: NodeId) -> Word {
        self.outputs[usize::from(id.0)]
    }

    pub fn inject(&mut self, id: NodeId, value: Word) {
        self.outputs[usize::from(id.0)] = value;
    }

    pub fn step(&mut self, host_inputs: &[(NodeId, Word)]) {
        for &(id, value) in host_inputs {
            if let Some(p) = &mut self.programs[usize::from(id.0)] {
                if p.opcode == Opcode::Const {
                    p.param = value;
                }
            }
        }
        let previous = self.outputs.clone();
        for (id, slot) in self.programs.iter().enumerate() {
            self.outputs[id] = match slot {
                Some(program) => eval_against(program, &previous),
                None => 0,
            };
        }
        self.epoch += 1;
    }

    /// Runs `epochs` rounds, reading output-flagged nodes after each.
    pub fn run(
        &mut self,
        epochs: u32,
        schedule: &BTreeMap<u32, Vec<(NodeId, Word)>>,
    ) -> Vec<TraceRow> {
        let output_ids: Vec<NodeId> = self
            .programs
            .iter()
            .flatten()
            .filter(|p| p.is_output)
            .map(|p| p.id)
            .collect();
        let mut trace = Vec::new();
        let empty = Vec::new();
        for _ in 0..epochs {
            let epoch = self.epoch;
            self.step(schedule.get(&epoch).unwrap_or(&empty));
            for &id in &output_ids {
                trace.push(TraceRow {
                    epoch,
                    node: id,
                    value: self.output(id),
                });
            }
        }
        trace
    }
}

/// Evaluates one node against the full previous-output array, table entry
/// by table entry.
fn eval_against(program: &NodeProgram, previous: &[Word]) -> Word {
    let read = |source: NodeId| previous[usize::from(source.0)];
    match program.opcode {
        Opcode::Const => program.param,
        Opcode::Pass => program
            .table
            .entries()
            .first()
            .map_or(0, |e| read(e.source)),
        Opcode::Not => !program
            .table
            .entries()
            .first()
            .map_or(0, |e| read(e.source)),
        Opcode::Acc => saturating_dot(program, previous),
        Opcode::Thresh => {
            if saturating_dot(program, previous) >= program.param {
                1
            } else {
                0
            }
        }
        Opcode::Max => fold_sources(program, previous, |a, b| if b > a { b } else { a }),
        Opcode::Min => fold_sources(program, previous, |a, b| if b < a { b } else { a }),
        Opcode::And => fold_sources(program, previous, |a, b| a & b),
        Opcode::Or => fold_sources(program, previous, |a, b| a | b),
        Opcode::Xor => fold_sources(program, previous, |a, b| a ^ b),
    }
}

fn saturating_dot(program: &NodeProgram, previous: &[Word]) -> Word {
    let mut acc: i32 = 0;
    for entry in program.table.entries() {
        let value = previous[usize::from(entry.source.0)];
        acc = acc.saturating_add(i32::from(value) * i32::from(entry.weight));
    }
    if acc > i32::from(Word::MAX) {
        Word::MAX
    } else if acc < i32::from(Word::MIN) {
        Word::MIN
    } else {
        acc as Word
    }
}

fn fold_sources(program: &NodeProgram, previous: &[Word], f: impl Fn(Word, Word) -> Word) -> Word {
    let mut entries = program.table.entries().iter();
    let first = match entries.next() {
        Some(e) => previous[usize::from(e.source.0)],
        None => return 0,
    };
    entries.fold(first, |acc, e| f(acc, previous[usize::from(e.source.0)]))
}
