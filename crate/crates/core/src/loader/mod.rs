//! Programming toolchain: netlist text format, layered-graph compiler,
//! and the bit-exact boot-image codec.

mod graph;
mod image;
mod netlist;

pub use graph::{
    compile_graph, CompileError, CompiledGraph, Layer, LayeredGraph, Neuron, NeuronKind,
};
pub use image::{
    decode_boot_image, encode_boot_image, encode_chip_image, BootImage, ImageError, FORMAT_VERSION,
    HEADER_LEN, MAGIC,
};
pub use netlist::{parse_netlist, NetNode, NetlistDoc, ParseError, ParseErrorKind};
