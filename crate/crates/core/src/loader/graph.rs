//! Layered-graph compiler: maps logical neurons onto node programs, one
//! task per core, splitting any neuron whose fan-in exceeds the 256-entry
//! connection memory into ACC relay nodes feeding a combiner.
//!
//! Edge weights are quantized to signed 8-bit by symmetric scaling; the
//! per-layer scale is recorded in the output. A split adds one epoch of
//! latency for its layer, so a compiled network's outputs are read after
//! `latency_epochs` rounds of steady input.

use thiserror::Error;

use crate::config::SystemConfig;
use crate::model::{AddressTable, ConnectionEntry, NodeId, NodeProgram, Opcode, MAX_FAN_IN};

/// Task a logical neuron performs over its weighted inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeuronKind {
    /// Weighted sum, linear output.
    Acc,
    /// Weighted sum compared to a threshold, 1/0 output.
    Thresh { threshold: f64 },
}

/// One logical neuron: weighted edges into the previous layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Neuron {
    pub kind: NeuronKind,
    /// `(previous-layer index, weight)` pairs.
    pub edges: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Layer {
    pub neurons: Vec<Neuron>,
    /// Fixed quantization scale for this layer; derived from the largest
    /// weight magnitude when absent.
    pub scale_override: Option<f64>,
}

/// Minimal feed-forward network description: an input width plus layers
/// of neurons wired to the layer before them.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredGraph {
    pub input_count: usize,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(
        "layer {layer} neuron {neuron}: edge references input {index}, previous layer has {width}"
    )]
    BadEdge {
        layer: usize,
        neuron: usize,
        index: usize,
        width: usize,
    },
    #[error(
        "layer {layer} neuron {neuron}: no edges (every compute neuron needs at least one input)"
    )]
    NoEdges { layer: usize, neuron: usize },
    #[error("layer {layer}: weight {weight} quantizes to {quantized}, outside signed 8-bit range")]
    QuantizedWeightOutOfRange {
        layer: usize,
        weight: f64,
        quantized: i64,
    },
    #[error("layer {layer}: threshold {threshold} quantizes to {quantized}, outside signed 16-bit range")]
    ThresholdOutOfRange {
        layer: usize,
        threshold: f64,
        quantized: i64,
    },
    #[error("graph needs {required} nodes after splitting, system provides {capacity}")]
    Capacity { required: u32, capacity: u32 },
}

/// Compiler output: programs plus the host-facing id maps and the
/// recorded quantization scales.
#[derive(Debug, Clone, PartialEq)]
pub struct CompiledGraph {
    pub programs: Vec<NodeProgram>,
    /// CONST nodes holding the network inputs, in input order.
    pub input_ids: Vec<NodeId>,
    /// Output-flagged nodes of the final layer, in neuron order.
    pub output_ids: Vec<NodeId>,
    /// Quantization scale applied to each layer's weights.
    pub layer_scales: Vec<f64>,
    /// Epochs from an input change to settled outputs.
    pub latency_epochs: u32,
    pub required_nodes: u32,
}

fn relay_count(fan_in: usize) -> usize {
    if fan_in <= MAX_FAN_IN {
        0
    } else {
        fan_in.div_ceil(MAX_FAN_IN)
    }
}

/// Compiles a layered graph into node programs with deterministic id
/// assignment: inputs first, then layer-major neuron order, each neuron's
/// relays immediately before its combiner.
pub fn compile_graph(
    graph: &LayeredGraph,
    cfg: &SystemConfig,
) -> Result<CompiledGraph, CompileError> {
    // Validate shape and count required nodes before assigning anything.
    let mut required: u64 = graph.input_count as u64;
    let mut prev_width = graph.input_count;
    for (li, layer) in graph.layers.iter().enumerate() {
        for (ni, neuron) in layer.neurons.iter().enumerate() {
            if neuron.edges.is_empty() {
                return Err(CompileError::NoEdges {
                    layer: li,
                    neuron: ni,
                });
            }
            for &(index, _) in &neuron.edges {
                if index >= prev_width {
                    return Err(CompileError::BadEdge {
                        layer: li,
                        neuron: ni,
                        index,
                        width: prev_width,
                    });
                }
            }
            required += 1 + relay_count(neuron.edges.len()) as u64;
        }
        prev_width = layer.neurons.len();
    }
    if required > u64::from(cfg.total_nodes) {
        return Err(CompileError::Capacity {
            required: required.min(u64::from(u32::MAX)) as u32,
            capacity: cfg.total_nodes,
        });
    }

    let mut programs: Vec<NodeProgram> = Vec::with_capacity(required as usize);
    let mut next_id: u32 = 0;
    let mut alloc = || {
        let id = NodeId(next_id as u16);
        next_id += 1;
        id
    };

    let input_ids: Vec<NodeId> = (0..graph.input_count).map(|_| alloc()).collect();
    for &id in &input_ids {
        programs.push(NodeProgram::new(
            id,
            Opcode::Const,
            0,
            AddressTable::empty(),
        ));
    }

    let mut layer_scales = Vec::with_capacity(graph.layers.len());
    let mut split_layers = 0u32;
    let mut prev_ids = input_ids.clone();
    let last_layer = graph.layers.len().saturating_sub(1);

    for (li, layer) in graph.layers.iter().enumerate() {
        let scale = match layer.scale_override {
            Some(s) => s,
            None => {
                let max_w = layer
                    .neurons
                    .iter()
                    .flat_map(|n| n.edges.iter().map(|&(_, w)| w.abs()))
                    .fold(0.0f64, f64::max);
                if max_w == 0.0 {
                    1.0
                } else {
                    f64::from(i8::MAX) / max_w
                }
            }
        };
        layer_scales.push(scale);

        let quantize_weight = |w: f64| -> Result<i8, CompileError> {
            let q = (w * scale).round() as i64;
            i8::try_from(q).map_err(|_| CompileError::QuantizedWeightOutOfRange {
                layer: li,
                weight: w,
                quantized: q,
            })
        };

        let mut layer_split = false;
        let mut layer_ids = Vec::with_capacity(layer.neurons.len());
        for neuron in &layer.neurons {
            let entries: Vec<ConnectionEntry> = neuron
                .edges
                .iter()
                .map(|&(index, w)| {
                    Ok(ConnectionEntry {
                        source: prev_ids[index],
                        weight: quantize_weight(w)?,
                    })
                })
                .collect::<Result<_, CompileError>>()?;

            let (opcode, param) = match neuron.kind {
                NeuronKind::Acc => (Opcode::Acc, 0i16),
                NeuronKind::Thresh { threshold } => {
                    let q = (threshold * scale).round() as i64;
                    let param =
                        i16::try_from(q).map_err(|_| CompileError::ThresholdOutOfRange {
                            layer: li,
                            threshold,
                            quantized: q,
                        })?;
                    (Opcode::Thresh, param)
                }
            };

            let combiner_table = if entries.len() <= MAX_FAN_IN {
                AddressTable::new(entries)
            } else {
                // Relay tree: partial ACC sums, weight-1 edges into the
                // combiner. Adds one epoch for this layer.
                layer_split = true;
                let mut relay_ids = Vec::new();
                for chunk in entries.chunks(MAX_FAN_IN) {
                    let relay = alloc();
                    programs.push(NodeProgram::new(
                        relay,
                        Opcode::Acc,
                        0,
                        AddressTable::new(chunk.to_vec()),
                    ));
                    relay_ids.push(relay);
                }
                AddressTable::new(
                    relay_ids
                        .into_iter()
                        .map(|source| ConnectionEntry { source, weight: 1 })
                        .collect(),
                )
            };

            let id = alloc();
            let mut program = NodeProgram::new(id, opcode, param, combiner_table);
            if li == last_layer {
                program = program.with_output();
            }
            programs.push(program);
            layer_ids.push(id);
        }
        if layer_split {
            split_layers += 1;
        }
        prev_ids = layer_ids;
    }

    Ok(CompiledGraph {
        output_ids: prev_ids,
        input_ids,
        layer_scales,
        latency_epochs: graph.layers.len() as u32 + split_layers,
        required_nodes: required as u32,
        programs,
    })
}
