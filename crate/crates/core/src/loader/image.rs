//! Bit-exact boot-image codec: the binary a chip is boot-loaded from.
//!
//! Per-chip layout, all little-endian:
//!
//! ```text
//! magic    "NV1B"           4 bytes
//! version  u16              currently 1
//! chip     u16              chip index in the array
//! count    u16              node records that follow
//! record   id u16, opcode u8, flags u8, param i16, table_len u16,
//!          then table_len x (source u16, weight i8)
//! ```
//!
//! Flags bit 0 is the host-readout mark; the remaining bits are reserved
//! and must be zero. Node records are written in ascending id order and
//! table entries in ascending source order, so every valid image has
//! exactly one encoding and `decode(encode(x)) == x` byte for byte.

use thiserror::Error;

use crate::interconnect::ChipBridge;
use crate::model::{AddressTable, ConnectionEntry, NodeId, NodeProgram, Opcode, MAX_FAN_IN};

pub const MAGIC: [u8; 4] = *b"NV1B";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ImageError {
    #[error("image truncated: need {need} bytes at offset {offset}")]
    Truncated { offset: usize, need: usize },
    #[error("bad magic {0:02x?}, expected \"NV1B\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("node {id}: table length {len} exceeds {MAX_FAN_IN}")]
    TableTooLong { id: NodeId, len: u16 },
    #[error("node {id}: unknown opcode byte 0x{byte:02x}")]
    UnknownOpcode { id: NodeId, byte: u8 },
    #[error("node {id}: reserved flag bits set (0x{flags:02x})")]
    ReservedFlags { id: NodeId, flags: u8 },
    #[error("node {id}: table sources not strictly ascending")]
    TableNotCanonical { id: NodeId },
    #[error("node records not in ascending id order (node {id})")]
    NodesNotCanonical { id: NodeId },
    #[error("{0} trailing bytes after the last node record")]
    TrailingBytes(usize),
    #[error("program {id} falls outside every chip range")]
    NodeOutsideChips { id: NodeId },
    #[error("chip {chip}: {count} nodes exceed the per-image limit")]
    TooManyNodes { chip: u32, count: usize },
}

/// Decoded per-chip image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BootImage {
    pub chip_index: u16,
    pub programs: Vec<NodeProgram>,
}

fn opcode_byte(op: Opcode) -> u8 {
    match op {
        Opcode::Pass => 0,
        Opcode::Acc => 1,
        Opcode::Thresh => 2,
        Opcode::Max => 3,
        Opcode::Min => 4,
        Opcode::And => 5,
        Opcode::Or => 6,
        Opcode::Xor => 7,
        Opcode::Not => 8,
        Opcode::Const => 9,
    }
}

fn opcode_from_byte(byte: u8) -> Option<Opcode> {
    Opcode::ALL
        .iter()
        .copied()
        .find(|&op| opcode_byte(op) == byte)
}

/// Encodes one chip's programs. Records are sorted into canonical
/// ascending-id order.
pub fn encode_chip_image(chip_index: u16, programs: &[NodeProgram]) -> Result<Vec<u8>, ImageError> {
    if programs.len() > usize::from(u16::MAX) {
        return Err(ImageError::TooManyNodes {
            chip: u32::from(chip_index),
            count: programs.len(),
        });
    }
    let mut sorted: Vec<&NodeProgram> = programs.iter().collect();
    sorted.sort_by_key(|p| p.id);

    let mut out = Vec::with_capacity(HEADER_LEN + sorted.len() * 8);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&chip_index.to_le_bytes());
    out.extend_from_slice(&(sorted.len() as u16).to_le_bytes());
    for program in sorted {
        out.extend_from_slice(&program.id.0.to_le_bytes());
        out.push(opcode_byte(program.opcode));
        out.push(u8::from(program.is_output));
        out.extend_from_slice(&program.param.to_le_bytes());
        out.extend_from_slice(&(program.table.len() as u16).to_le_bytes());
        for entry in program.table.entries() {
            out.extend_from_slice(&entry.source.0.to_le_bytes());
            out.push(entry.weight as u8);
        }
    }
    Ok(out)
}

/// Splits programs across the chip plan and encodes one image per chip.
/// Every chip in the plan gets an image, empty dies included.
pub fn encode_boot_image(
    programs: &[NodeProgram],
    chip_plan: &[ChipBridge],
) -> Result<Vec<Vec<u8>>, ImageError> {
    for program in programs {
        if !chip_plan.iter().any(|c| c.contains(program.id)) {
            return Err(ImageError::NodeOutsideChips { id: program.id });
        }
    }
    chip_plan
        .iter()
        .map(|chip| {
            let local: Vec<NodeProgram> = programs
                .iter()
                .filter(|p| chip.contains(p.id))
                .cloned()
                .collect();
            encode_chip_image(chip.chip_index as u16, &local)
        })
        .collect()
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ImageError> {
        if self.offset + n > self.bytes.len() {
            return Err(ImageError::Truncated {
                offset: self.offset,
                need: n,
            });
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u16(&mut self) -> Result<u16, ImageError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn i16(&mut self) -> Result<i16, ImageError> {
        let b = self.take(2)?;
        Ok(i16::from_le_bytes([b[0], b[1]]))
    }

    fn u8(&mut self) -> Result<u8, ImageError> {
        Ok(self.take(1)?[0])
    }
}

/// Decodes a per-chip image, rejecting any structural deviation from the
/// canonical encoding: bad magic or version, oversize or unsorted tables,
/// reserved flag bits, out-of-order records, truncation, trailing bytes.
pub fn decode_boot_image(bytes: &[u8]) -> Result<BootImage, ImageError> {
    let mut cur = Cursor { bytes, offset: 0 };
    let magic = cur.take(4)?;
    if magic != MAGIC {
        return Err(ImageError::BadMagic([
            magic[0], magic[1], magic[2], magic[3],
        ]));
    }
    let version = cur.u16()?;
    if version != FORMAT_VERSION {
        return Err(ImageError::UnsupportedVersion(version));
    }
    let chip_index = cur.u16()?;
    let count = cur.u16()?;
    let mut programs = Vec::with_capacity(usize::from(count));
    let mut last_id: Option<NodeId> = None;
    for _ in 0..count {
        let id = NodeId(cur.u16()?);
        if let Some(prev) = last_id {
            if id <= prev {
                return Err(ImageError::NodesNotCanonical { id });
            }
        }
        last_id = Some(id);
        let op_byte = cur.u8()?;
        let opcode =
            opcode_from_byte(op_byte).ok_or(ImageError::UnknownOpcode { id, byte: op_byte })?;
        let flags = cur.u8()?;
        if flags & !0x01 != 0 {
            return Err(ImageError::ReservedFlags { id, flags });
        }
        let param = cur.i16()?;
        let table_len = cur.u16()?;
        if usize::from(table_len) > MAX_FAN_IN {
            return Err(ImageError::TableTooLong { id, len: table_len });
        }
        let mut entries = Vec::with_capacity(usize::from(table_len));
        let mut last_source: Option<NodeId> = None;
        for _ in 0..table_len {
            let source = NodeId(cur.u16()?);
            if let Some(prev) = last_source {
                if source <= prev {
                    return Err(ImageError::TableNotCanonical { id });
                }
            }
            last_source = Some(source);
            let weight = cur.u8()? as i8;
            entries.push(ConnectionEntry { source, weight });
        }
        programs.push(NodeProgram {
            id,
            opcode,
            param,
            table: AddressTable::new(entries),
            is_output: flags & 0x01 != 0,
        });
    }
    if cur.offset != bytes.len() {
        return Err(ImageError::TrailingBytes(bytes.len() - cur.offset));
    }
    Ok(BootImage {
        chip_index,
        programs,
    })
}
