//! Loader contracts: netlist fixpoint, bit-exact boot images under
//! round-trip and byte-flip fuzzing, and compiler output checked against
//! direct evaluation of the source graph.

mod common;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use nv1_core::config::SystemConfig;
use nv1_core::interconnect::plan_chips;
use nv1_core::loader::{
    compile_graph, decode_boot_image, encode_boot_image, encode_chip_image, parse_netlist, Layer,
    LayeredGraph, NetlistDoc, Neuron, NeuronKind,
};
use nv1_core::model::{validate_system, NodeId, NodeProgram, Opcode, Word};
use nv1_core::sim::Simulator;

use common::{mixed_opcodes, random_system, random_system_with_density};

/// Direct feed-forward evaluation of a layered graph: the oracle the
/// compiled network is held against.
fn eval_graph(graph: &LayeredGraph, inputs: &[f64]) -> Vec<f64> {
    assert_eq!(inputs.len(), graph.input_count);
    let mut previous: Vec<f64> = inputs.to_vec();
    for layer in &graph.layers {
        previous = layer
            .neurons
            .iter()
            .map(|n| {
                let sum: f64 = n.edges.iter().map(|&(i, w)| previous[i] * w).sum();
                match n.kind {
                    NeuronKind::Acc => sum,
                    NeuronKind::Thresh { threshold } => {
                        if sum >= threshold {
                            1.0
                        } else {
                            0.0
                        }
                    }
                }
            })
            .collect();
    }
    previous
}

/// Loads a compiled graph into a simulator, drives the CONST inputs, and
/// reads the settled outputs.
fn run_compiled(
    programs: &[NodeProgram],
    input_ids: &[NodeId],
    output_ids: &[NodeId],
    inputs: &[Word],
    total: u32,
    epochs: u32,
) -> Vec<Word> {
    let cfg = SystemConfig {
        max_epochs: epochs,
        ..SystemConfig::with_geometry(total, total)
    };
    let mut sim = Simulator::new(programs.to_vec(), cfg).unwrap();
    let writes: Vec<(NodeId, Word)> = input_ids
        .iter()
        .copied()
        .zip(inputs.iter().copied())
        .collect();
    for _ in 0..epochs {
        sim.step(&writes).unwrap();
    }
    output_ids.iter().map(|&id| sim.output(id)).collect()
}

#[test]
fn xor_network_matches_direct_graph_evaluation() {
    // Classic 2-2-1 threshold network computing XOR:
    //   h0 = [a + b >= 1], h1 = [a + b >= 2], y = [h0 - h1 >= 1].
    let graph = LayeredGraph {
        input_count: 2,
        layers: vec![
            Layer {
                neurons: vec![
                    Neuron {
                        kind: NeuronKind::Thresh { threshold: 1.0 },
                        edges: vec![(0, 1.0), (1, 1.0)],
                    },
                    Neuron {
                        kind: NeuronKind::Thresh { threshold: 2.0 },
                        edges: vec![(0, 1.0), (1, 1.0)],
                    },
                ],
                scale_override: Some(1.0),
            },
            Layer {
                neurons: vec![Neuron {
                    kind: NeuronKind::Thresh { threshold: 1.0 },
                    edges: vec![(0, 1.0), (1, -1.0)],
                }],
                scale_override: Some(1.0),
            },
        ],
    };
    let cfg = SystemConfig::with_geometry(8, 8);
    let compiled = compile_graph(&graph, &cfg).unwrap();
    assert!(validate_system(&compiled.programs, &cfg).is_empty());
    assert_eq!(compiled.programs.len(), 5);

    for a in 0..=1i16 {
        for b in 0..=1i16 {
            let expected = eval_graph(&graph, &[f64::from(a), f64::from(b)]);
            let got = run_compiled(
                &compiled.programs,
                &compiled.input_ids,
                &compiled.output_ids,
                &[a, b],
                8,
                compiled.latency_epochs + 2,
            );
            assert_eq!(got, vec![expected[0] as Word], "xor({a},{b})");
            assert_eq!(got[0], a ^ b, "xor truth table");
        }
    }
}

#[test]
fn fan_in_300_split_equals_unsplit_dot_product() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0001);
    let weights: Vec<f64> = (0..300)
        .map(|_| f64::from(rng.random_range(-100i32..=100)))
        .collect();
    let graph = LayeredGraph {
        input_count: 300,
        layers: vec![Layer {
            neurons: vec![Neuron {
                kind: NeuronKind::Acc,
                edges: weights.iter().copied().enumerate().collect(),
            }],
            scale_override: Some(1.0),
        }],
    };
    let cfg = SystemConfig::with_geometry(320, 320);
    let compiled = compile_graph(&graph, &cfg).unwrap();
    assert_eq!(compiled.required_nodes, 303);
    assert!(validate_system(&compiled.programs, &SystemConfig::with_geometry(320, 320)).is_empty());

    for trial in 0..1000 {
        // Inputs small enough that no relay's partial sum saturates.
        let inputs: Vec<Word> = (0..300).map(|_| rng.random_range(-1i16..=1)).collect();
        let floats: Vec<f64> = inputs.iter().map(|&v| f64::from(v)).collect();
        let expected = eval_graph(&graph, &floats)[0];
        let got = run_compiled(
            &compiled.programs,
            &compiled.input_ids,
            &compiled.output_ids,
            &inputs,
            320,
            compiled.latency_epochs + 2,
        );
        assert_eq!(f64::from(got[0]), expected, "trial {trial}");
    }
}

#[test]
fn split_thresh_neurons_match_oracle_on_random_graphs() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0002);
    for _ in 0..20 {
        let fan_in = rng.random_range(257..=600);
        let threshold = f64::from(rng.random_range(-20i32..=20));
        let weights: Vec<f64> = (0..fan_in)
            .map(|_| f64::from(rng.random_range(-3i32..=3)))
            .collect();
        let graph = LayeredGraph {
            input_count: fan_in,
            layers: vec![Layer {
                neurons: vec![Neuron {
                    kind: NeuronKind::Thresh { threshold },
                    edges: weights.iter().copied().enumerate().collect(),
                }],
                scale_override: Some(1.0),
            }],
        };
        let total = fan_in as u32 + 8;
        let cfg = SystemConfig::with_geometry(total, total);
        let compiled = compile_graph(&graph, &cfg).unwrap();

        let inputs: Vec<Word> = (0..fan_in).map(|_| rng.random_range(0i16..=1)).collect();
        let floats: Vec<f64> = inputs.iter().map(|&v| f64::from(v)).collect();
        let expected = eval_graph(&graph, &floats)[0];
        let got = run_compiled(
            &compiled.programs,
            &compiled.input_ids,
            &compiled.output_ids,
            &inputs,
            total,
            compiled.latency_epochs + 2,
        );
        assert_eq!(f64::from(got[0]), expected, "fan-in {fan_in}");
    }
}

#[test]
fn compiled_graphs_always_validate() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0003);
    for _ in 0..30 {
        let input_count = rng.random_range(1..=40);
        let mut layers = Vec::new();
        let mut prev = input_count;
        for _ in 0..rng.random_range(1..=4) {
            let width = rng.random_range(1..=12);
            let neurons = (0..width)
                .map(|_| {
                    let fan = rng.random_range(1..=prev);
                    let picks = rand::seq::index::sample(&mut rng, prev, fan);
                    Neuron {
                        kind: if rng.random_bool(0.5) {
                            NeuronKind::Acc
                        } else {
                            NeuronKind::Thresh {
                                threshold: rng.random_range(-5.0..5.0),
                            }
                        },
                        edges: picks
                            .iter()
                            .map(|i| (i, rng.random_range(-1.0..1.0)))
                            .collect(),
                    }
                })
                .collect();
            layers.push(Layer {
                neurons,
                scale_override: None,
            });
            prev = width;
        }
        let graph = LayeredGraph {
            input_count,
            layers,
        };
        let cfg = SystemConfig::with_geometry(256, 256);
        let compiled = compile_graph(&graph, &cfg).unwrap();
        assert!(validate_system(&compiled.programs, &cfg).is_empty());
        assert_eq!(compiled.programs.len(), compiled.required_nodes as usize);
    }
}

#[test]
fn boot_images_round_trip_byte_identically() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0004);
    let opcodes = mixed_opcodes();
    for round in 0..1000 {
        let total = rng.random_range(1..=120);
        let programs = random_system(&mut rng, total, &opcodes);
        let chip_index = rng.random_range(0..21u16);
        let image = encode_chip_image(chip_index, &programs).unwrap();
        let decoded = decode_boot_image(&image).unwrap();
        assert_eq!(decoded.chip_index, chip_index);
        let reencoded = encode_chip_image(decoded.chip_index, &decoded.programs).unwrap();
        assert_eq!(reencoded, image, "round {round}");
    }
}

#[test]
fn multi_chip_images_partition_and_round_trip() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0005);
    for _ in 0..50 {
        let per_chip = rng.random_range(4..=32);
        let chips = rng.random_range(2..=6);
        let total = per_chip * chips;
        let programs = random_system(&mut rng, total, &mixed_opcodes());
        let plan = plan_chips(total, per_chip, true).unwrap();
        let images = encode_boot_image(&programs, &plan).unwrap();
        assert_eq!(images.len(), chips as usize);

        let mut recovered: Vec<NodeProgram> = Vec::new();
        for (chip, image) in images.iter().enumerate() {
            let decoded = decode_boot_image(image).unwrap();
            assert_eq!(u32::from(decoded.chip_index), chip as u32);
            for p in &decoded.programs {
                assert!(plan[chip].contains(p.id));
            }
            recovered.extend(decoded.programs);
        }
        let mut expected = programs.clone();
        expected.sort_by_key(|p| p.id);
        recovered.sort_by_key(|p| p.id);
        assert_eq!(recovered, expected);
    }
}

#[test]
fn single_byte_flips_never_corrupt_silently() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0006);
    let opcodes = mixed_opcodes();
    for _ in 0..40 {
        let total = rng.random_range(2..=24);
        let programs = random_system(&mut rng, total, &opcodes);
        let image = encode_chip_image(0, &programs).unwrap();
        let original = decode_boot_image(&image).unwrap();

        for offset in 0..image.len() {
            for bit in [0x01u8, 0x80] {
                let mut corrupted = image.clone();
                corrupted[offset] ^= bit;
                // A flip may still be a well-formed image, but it must
                // decode to something observably different.
                if let Ok(decoded) = decode_boot_image(&corrupted) {
                    assert!(
                        decoded.chip_index != original.chip_index
                            || decoded.programs != original.programs,
                        "flip at {offset} bit {bit:#x} was silently absorbed"
                    );
                }
            }
        }
    }
}

#[test]
fn truncated_and_padded_images_rejected() {
    let programs = random_system(&mut StdRng::seed_from_u64(7), 10, &mixed_opcodes());
    let image = encode_chip_image(0, &programs).unwrap();
    for cut in 0..image.len() {
        assert!(
            decode_boot_image(&image[..cut]).is_err(),
            "prefix {cut} accepted"
        );
    }
    let mut padded = image.clone();
    padded.extend_from_slice(&[0, 0, 0]);
    assert!(decode_boot_image(&padded).is_err());
}

#[test]
fn netlist_emit_parse_fixpoint_on_random_docs() {
    let mut rng = StdRng::seed_from_u64(0xC0DE_0007);
    for _ in 0..100 {
        let total = rng.random_range(2..=64);
        let programs = random_system_with_density(&mut rng, total, &mixed_opcodes(), 1.0);
        let doc = NetlistDoc::from_programs(&programs);
        let emitted = doc.emit();
        let reparsed = parse_netlist(&emitted).expect("canonical netlists parse");
        assert_eq!(reparsed.emit(), emitted);
        let mut sorted = programs.clone();
        sorted.sort_by_key(|p| p.id);
        assert_eq!(reparsed.to_programs(), sorted);
    }
}

#[test]
fn netlist_diagnostics_name_line_and_column() {
    let text = "node 0 CONST param=1\nnode 1 FROB\n";
    let err = parse_netlist(text).unwrap_err();
    assert_eq!(err.line, 2);
    assert_eq!(err.col, 8);
    assert!(err.to_string().contains("FROB"));
}

#[test]
fn compile_respects_chip_partition() {
    // A graph spanning several small dies: every program id must fall in
    // the plan, and the boot images load back into the same system.
    let graph = LayeredGraph {
        input_count: 20,
        layers: vec![Layer {
            neurons: (0..10)
                .map(|i| Neuron {
                    kind: NeuronKind::Acc,
                    edges: vec![(i, 1.0), (i + 10, 1.0)],
                })
                .collect(),
            scale_override: Some(1.0),
        }],
    };
    let cfg = SystemConfig::with_geometry(30, 10);
    let compiled = compile_graph(&graph, &cfg).unwrap();
    let plan = plan_chips(30, 10, true).unwrap();
    let images = encode_boot_image(&compiled.programs, &plan).unwrap();
    assert_eq!(images.len(), 3);
    let recovered: Vec<NodeProgram> = images
        .iter()
        .flat_map(|i| decode_boot_image(i).unwrap().programs)
        .collect();
    assert_eq!(recovered.len(), compiled.programs.len());
    assert_eq!(Opcode::Const, recovered[0].opcode);
}
