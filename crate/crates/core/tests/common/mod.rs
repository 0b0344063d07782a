//! Shared generators for randomized system images.

use rand::rngs::StdRng;
use rand::Rng;

use nv1_core::model::{AddressTable, ConnectionEntry, NodeId, NodeProgram, Opcode};

/// Random program for `id` wired to sources below `total`. Fan-ins are
/// mostly small with an occasional wide table.
pub fn random_program(rng: &mut StdRng, id: u16, total: u32, opcodes: &[Opcode]) -> NodeProgram {
    let opcode = opcodes[rng.random_range(0..opcodes.len())];
    let arity = opcode.arity();
    let max_fan_in = arity.max.min(total as usize);
    let fan_in = if arity.min == arity.max {
        arity.min
    } else if rng.random_bool(0.1) {
        rng.random_range(arity.min..=max_fan_in)
    } else {
        rng.random_range(arity.min..=max_fan_in.min(8))
    };
    let sources = rand::seq::index::sample(rng, total as usize, fan_in);
    let entries: Vec<ConnectionEntry> = sources
        .iter()
        .map(|s| ConnectionEntry {
            source: NodeId(s as u16),
            weight: rng.random(),
        })
        .collect();
    let param: i16 = match opcode {
        // Keep thresholds reachable so THRESH nodes actually toggle.
        Opcode::Thresh => rng.random_range(-500..=500),
        _ => rng.random(),
    };
    NodeProgram {
        id: NodeId(id),
        opcode,
        param,
        table: AddressTable::new(entries),
        is_output: rng.random_bool(0.25),
    }
}

/// Random system image: most node slots programmed, mixed opcodes.
pub fn random_system(rng: &mut StdRng, total: u32, opcodes: &[Opcode]) -> Vec<NodeProgram> {
    random_system_with_density(rng, total, opcodes, 0.9)
}

/// Random system with a given probability that each node slot is
/// programmed. Density 1.0 yields systems expressible as netlists, where
/// every referenced source must be declared.
pub fn random_system_with_density(
    rng: &mut StdRng,
    total: u32,
    opcodes: &[Opcode],
    density: f64,
) -> Vec<NodeProgram> {
    let mut programs = Vec::new();
    for id in 0..total {
        if rng.random_bool(density) {
            programs.push(random_program(rng, id as u16, total, opcodes));
        }
    }
    programs
}

/// Mixed instruction set weighted towards data movement and arithmetic.
pub fn mixed_opcodes() -> Vec<Opcode> {
    vec![
        Opcode::Const,
        Opcode::Const,
        Opcode::Pass,
        Opcode::Pass,
        Opcode::Acc,
        Opcode::Acc,
        Opcode::Thresh,
        Opcode::Max,
        Opcode::Min,
        Opcode::And,
        Opcode::Or,
        Opcode::Xor,
        Opcode::Not,
    ]
}
