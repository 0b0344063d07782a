//! Epoch-synchronous execution engine: double-buffered node outputs, host
//! I/O injection, statistics, and energy accounting.
//!
//! One epoch is one global round: every node gathers the previous round's
//! outputs from the sources in its address table, evaluates its single
//! task, and writes its result for the next round. Evaluation reads only
//! the previous buffer and writes only the next, so outputs computed in
//! epoch k become visible on the bus in epoch k+1 and node evaluations
//! within an epoch are order-independent.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::config::{SlotMode, SystemConfig};
use crate::interconnect::{
    match_stream, merge_streams, plan_chips, BroadcastEvent, ChipBridge, SlotSchedule,
};
use crate::model::{eval_node, validate_system, NodeId, NodeProgram, Opcode, Violation, Word};
use crate::perf::{chip_current, DinCondition};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid system image:\n{}", format_violations(.0))]
    InvalidSystem(Vec<Violation>),
    #[error("invalid configuration: {0}")]
    InvalidConfig(#[from] crate::config::ConfigError),
    #[error("host input for node {id}: {reason}")]
    HostIo { id: NodeId, reason: &'static str },
    #[error("broadcast protocol violation: {0}")]
    Protocol(#[from] crate::interconnect::ProtocolError),
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| format!("  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Per-epoch counters. One connection-memory read is charged per matched
/// table entry, so `sram_reads` always equals `matches`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpochStats {
    pub epoch: u32,
    /// Slots carried on the bus this epoch: every node in dense mode,
    /// firing nodes in sparse mode.
    pub broadcasts: u64,
    pub matches: u64,
    pub sram_reads: u64,
    pub ops_by_opcode: BTreeMap<Opcode, u64>,
    /// Fraction of nodes whose output this epoch is nonzero.
    pub firing_fraction: f64,
    /// Estimated chip energy for this epoch in millijoules.
    pub energy_mj: f64,
}

/// Counters summed over a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AggregateStats {
    pub epochs: u32,
    pub broadcasts: u64,
    pub matches: u64,
    pub sram_reads: u64,
    pub ops_by_opcode: BTreeMap<Opcode, u64>,
    pub energy_mj: f64,
}

impl AggregateStats {
    pub fn accumulate(&mut self, epoch: &EpochStats) {
        self.epochs += 1;
        self.broadcasts += epoch.broadcasts;
        self.matches += epoch.matches;
        self.sram_reads += epoch.sram_reads;
        for (&op, &count) in &epoch.ops_by_opcode {
            *self.ops_by_opcode.entry(op).or_insert(0) += count;
        }
        self.energy_mj += epoch.energy_mj;
    }
}

/// Whole-chip energy model: one characterized current line plus a supply
/// voltage. Per-opcode relative weights are optional and default to
/// uniform (1.0).
///
/// The 0.9 V supply is an assumption typical of the process class, not a
/// characterized value.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    pub condition: DinCondition,
    pub supply_volts: f64,
    pub opcode_weights: Option<BTreeMap<Opcode, f64>>,
}

impl Default for EnergyModel {
    fn default() -> Self {
        Self {
            condition: DinCondition::Vss,
            supply_volts: 0.9,
            opcode_weights: None,
        }
    }
}

impl EnergyModel {
    /// Mean relative current weight over the epoch's op mix; 1.0 when no
    /// table is configured or nothing executed.
    fn activity_factor(&self, ops: &BTreeMap<Opcode, u64>) -> f64 {
        let Some(weights) = &self.opcode_weights else {
            return 1.0;
        };
        let total: u64 = ops.values().sum();
        if total == 0 {
            return 1.0;
        }
        let weighted: f64 = ops
            .iter()
            .map(|(op, &n)| weights.get(op).copied().unwrap_or(1.0) * n as f64)
            .sum();
        weighted / total as f64
    }
}

/// Energy estimate in millijoules for `slots` bus slots at `clock_hz`:
/// `I(f) x V x slots / f`, scaled by the opcode activity factor. Labeled
/// an estimate: it applies the whole-chip current line, not
/// per-instruction silicon currents.
pub fn estimate_energy(
    slots: u64,
    ops_by_opcode: &BTreeMap<Opcode, u64>,
    clock_hz: u64,
    model: &EnergyModel,
) -> f64 {
    if slots == 0 || clock_hz == 0 {
        return 0.0;
    }
    let freq_mhz = clock_hz as f64 / 1e6;
    let current_ma = chip_current(freq_mhz, model.condition);
    let seconds = slots as f64 / clock_hz as f64;
    current_ma * model.supply_volts * seconds * model.activity_factor(ops_by_opcode)
}

/// Host-facing node roles: CONST nodes the host may overwrite each epoch
/// and nodes flagged for readout.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HostIo {
    pub input_ids: Vec<NodeId>,
    pub output_ids: Vec<NodeId>,
}

/// One readout row: an output-flagged node's value after a given epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRow {
    pub epoch: u32,
    pub node: NodeId,
    pub value: Word,
}

/// Host inputs per epoch: values written into CONST input nodes before
/// the epoch runs.
pub type InputSchedule = BTreeMap<u32, Vec<(NodeId, Word)>>;

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub trace: Vec<TraceRow>,
    pub per_epoch: Vec<EpochStats>,
    pub totals: AggregateStats,
    /// True when the run stopped early at a fixed point.
    pub fixed_point: bool,
}

/// The digital twin: programs, double-buffered state, chip plan, and
/// accumulated statistics.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: SystemConfig,
    chips: Vec<ChipBridge>,
    /// Program slot per node id; unprogrammed nodes hold `None` and
    /// output a constant 0.
    programs: Vec<Option<NodeProgram>>,
    prev: Vec<Word>,
    next: Vec<Word>,
    epoch: u32,
    energy: EnergyModel,
}

impl Simulator {
    /// Builds a simulator after validating the configuration and every
    /// program against the architectural limits.
    pub fn new(programs: Vec<NodeProgram>, cfg: SystemConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let violations = validate_system(&programs, &cfg);
        if !violations.is_empty() {
            return Err(SimError::InvalidSystem(violations));
        }
        let chips = plan_chips(cfg.total_nodes, cfg.nodes_per_chip, cfg.enforce_chip_limit)?;
        let mut slots: Vec<Option<NodeProgram>> = vec![None; cfg.total_nodes as usize];
        for program in programs {
            let index = usize::from(program.id.0);
            slots[index] = Some(program);
        }
        let n = cfg.total_nodes as usize;
        Ok(Self {
            cfg,
            chips,
            programs: slots,
            prev: vec![0; n],
            next: vec![0; n],
            epoch: 0,
            energy: EnergyModel::default(),
        })
    }

    pub fn with_energy_model(mut self, energy: EnergyModel) -> Self {
        self.energy = energy;
        self
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    /// Current output word of a node (last completed epoch).
    pub fn output(&self, id: NodeId) -> Word {
        self.prev[usize::from(id.0)]
    }

    /// Seeds a node's current output directly, making it visible on the
    /// bus in the next epoch. Test and bring-up hook; host I/O during a
    /// run goes through CONST input nodes instead.
    pub fn inject(&mut self, id: NodeId, value: Word) {
        self.prev[usize::from(id.0)] = value;
    }

    /// Ids of CONST nodes, the host-writable inputs.
    pub fn input_ids(&self) -> Vec<NodeId> {
        self.programs
            .iter()
            .flatten()
            .filter(|p| p.opcode == Opcode::Const)
            .map(|p| p.id)
            .collect()
    }

    /// Ids flagged for host readout.
    pub fn output_ids(&self) -> Vec<NodeId> {
        self.programs
            .iter()
            .flatten()
            .filter(|p| p.is_output)
            .map(|p| p.id)
            .collect()
    }

    /// The system's host-facing seam: writable inputs and readout nodes.
    pub fn host_io(&self) -> HostIo {
        HostIo {
            input_ids: self.input_ids(),
            output_ids: self.output_ids(),
        }
    }

    fn apply_host_inputs(&mut self, host_inputs: &[(NodeId, Word)]) -> Result<(), SimError> {
        for &(id, value) in host_inputs {
            let slot = self
                .programs
                .get_mut(usize::from(id.0))
                .ok_or(SimError::HostIo {
                    id,
                    reason: "id out of range",
                })?;
            match slot {
                Some(p) if p.opcode == Opcode::Const => p.param = value,
                Some(_) => {
                    return Err(SimError::HostIo {
                        id,
                        reason: "not a CONST input node",
                    });
                }
                None => {
                    return Err(SimError::HostIo {
                        id,
                        reason: "node is unprogrammed",
                    })
                }
            }
        }
        Ok(())
    }

    /// Builds the epoch's broadcast stream from the previous buffer:
    /// per-chip local streams bridged into one globally ascending stream.
    fn build_stream(&self) -> Result<Vec<BroadcastEvent>, SimError> {
        let mut global: Vec<BroadcastEvent> = Vec::new();
        for (chip_index, chip) in self.chips.iter().enumerate() {
            let local: Vec<BroadcastEvent> = chip
                .id_range
                .clone()
                .filter_map(|id| {
                    let value = self.prev[id as usize];
                    match self.cfg.mode {
                        SlotMode::Dense => Some(BroadcastEvent {
                            source: NodeId(id as u16),
                            value,
                        }),
                        SlotMode::Sparse if value != 0 => Some(BroadcastEvent {
                            source: NodeId(id as u16),
                            value,
                        }),
                        SlotMode::Sparse => None,
                    }
                })
                .collect();
            if chip_index == 0 {
                global = local;
            } else {
                global = merge_streams(&global, &local)?;
            }
        }
        Ok(global)
    }

    /// Runs one epoch: gather, evaluate, swap. Host inputs are written
    /// into their CONST nodes before evaluation, so they appear on the
    /// bus the following epoch.
    pub fn step(&mut self, host_inputs: &[(NodeId, Word)]) -> Result<EpochStats, SimError> {
        self.apply_host_inputs(host_inputs)?;
        let stream = self.build_stream()?;
        let schedule = SlotSchedule::of(self.cfg.mode, &stream);

        let mut stats = EpochStats {
            epoch: self.epoch,
            broadcasts: schedule.epoch_length as u64,
            ..Default::default()
        };

        for (id, slot) in self.programs.iter().enumerate() {
            let value = match slot {
                Some(program) => {
                    let inputs = match_stream(&program.table, &stream);
                    stats.matches += inputs.len() as u64;
                    *stats.ops_by_opcode.entry(program.opcode).or_insert(0) += 1;
                    eval_node(program, &inputs)
                }
                None => 0,
            };
            self.next[id] = value;
        }
        stats.sram_reads = stats.matches;
        let firing = self.next.iter().filter(|&&w| w != 0).count();
        stats.firing_fraction = firing as f64 / self.cfg.total_nodes.max(1) as f64;
        stats.energy_mj = estimate_energy(
            stats.broadcasts,
            &stats.ops_by_opcode,
            self.cfg.clock_hz,
            &self.energy,
        );

        std::mem::swap(&mut self.prev, &mut self.next);
        self.epoch += 1;
        Ok(stats)
    }

    /// Runs up to `cfg.max_epochs` epochs, feeding scheduled host inputs
    /// and recording output-flagged nodes after every epoch. Stops early
    /// at a fixed point when the configuration asks for it.
    pub fn run(&mut self, schedule: &InputSchedule) -> Result<RunOutput, SimError> {
        let output_ids = self.output_ids();
        let mut out = RunOutput::default();
        for _ in 0..self.cfg.max_epochs {
            let epoch = self.epoch;
            let empty = Vec::new();
            let inputs = schedule.get(&epoch).unwrap_or(&empty);
            let stats = self.step(inputs)?;

            let unchanged = self.prev == self.next;
            for &id in &output_ids {
                out.trace.push(TraceRow {
                    epoch,
                    node: id,
                    value: self.output(id),
                });
            }
            out.totals.accumulate(&stats);
            out.per_epoch.push(stats);

            if self.cfg.halt_on_fixed_point && unchanged {
                out.fixed_point = true;
                break;
            }
        }
        Ok(out)
    }
}

/// Renders a trace as CSV: one row per epoch per output node.
pub fn trace_to_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("epoch,node_id,value\n");
    for row in trace {
        out.push_str(&format!("{},{},{}\n", row.epoch, row.node, row.value));
    }
    out
}

/// Renders per-epoch statistics as CSV.
pub fn stats_to_csv(per_epoch: &[EpochStats]) -> String {
    let mut out =
        String::from("epoch,broadcasts,matches,sram_reads,ops,firing_fraction,energy_mj\n");
    for s in per_epoch {
        let ops: u64 = s.ops_by_opcode.values().sum();
        out.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.9}\n",
            s.epoch, s.broadcasts, s.matches, s.sram_reads, ops, s.firing_fraction, s.energy_mj
        ));
    }
    out
}

/// Human-readable run summary.
pub fn summarize(totals: &AggregateStats, cfg: &SystemConfig, fixed_point: bool) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "epochs run          : {}{}\n",
        totals.epochs,
        if fixed_point {
            " (halted at fixed point)"
        } else {
            ""
        }
    ));
    out.push_str(&format!(
        "nodes / chips       : {} / {}\n",
        cfg.total_nodes,
        cfg.chips()
    ));
    out.push_str(&format!("broadcast slots     : {}\n", totals.broadcasts));
    out.push_str(&format!("table matches       : {}\n", totals.matches));
    out.push_str(&format!("connection reads    : {}\n", totals.sram_reads));
    for (op, count) in &totals.ops_by_opcode {
        out.push_str(&format!("  ops {:<6}        : {}\n", op.name(), count));
    }
    out.push_str(&format!(
        "estimated energy    : {:.9} mJ\n",
        totals.energy_mj
    ));
    out
}
