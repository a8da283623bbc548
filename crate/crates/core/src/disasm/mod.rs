//! Linear-sweep EVM disassembler.
//!
//! Decoding is total: unknown bytes become `INVALID` instructions and a
//! `PUSHn` that runs past the end of the code is kept with a zero-padded
//! operand and the [`Status::TruncatedPush`] flag.

mod opcodes;

use std::fmt;

pub use opcodes::{OpcodeInfo, OpcodeTable, TableError, INVALID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Status {
    Valid,
    InvalidOpcode,
    TruncatedPush,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instruction {
    pub offset: usize,
    pub opcode: u8,
    pub mnemonic: String,
    /// Inline data; always `n` bytes for `PUSHn`, empty otherwise.
    pub operand: Vec<u8>,
    pub status: Status,
}

impl Instruction {
    /// Bytes of the source actually covered by this instruction (the padding
    /// of a truncated push is not counted).
    pub fn consumed(&self, source_len: usize) -> usize {
        (1 + self.operand.len()).min(source_len - self.offset)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.offset, self.mnemonic)?;
        if !self.operand.is_empty() {
            write!(f, " 0x{}", hex::encode(&self.operand))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InstructionStream {
    pub instructions: Vec<Instruction>,
    pub source_len: usize,
}

impl InstructionStream {
    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Instruction> {
        self.instructions.iter()
    }

    /// Total source bytes covered; equals `source_len` for every stream
    /// produced by [`disassemble`].
    pub fn consumed_bytes(&self) -> usize {
        self.instructions
            .iter()
            .map(|i| i.consumed(self.source_len))
            .sum()
    }

    pub fn mnemonics(&self) -> impl Iterator<Item = &str> {
        self.instructions.iter().map(|i| i.mnemonic.as_str())
    }
}

impl fmt::Display for InstructionStream {
    /// One instruction per line: `offset mnemonic [operand-hex]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ins in &self.instructions {
            writeln!(f, "{ins}")?;
        }
        Ok(())
    }
}

/// Decodes `code` with the bundled opcode table.
pub fn disassemble(code: &[u8]) -> InstructionStream {
    disassemble_with(OpcodeTable::standard(), code)
}

pub fn disassemble_with(table: &OpcodeTable, code: &[u8]) -> InstructionStream {
    let mut instructions = Vec::with_capacity(code.len() / 2);
    let mut pc = 0;
    while pc < code.len() {
        let opcode = code[pc];
        let info = table.get(opcode);
        let width = info.immediate;
        let start = pc + 1;
        let end = start + width;
        let (operand, status) = if end <= code.len() {
            let status = if info.assigned {
                Status::Valid
            } else {
                Status::InvalidOpcode
            };
            (code[start..end].to_vec(), status)
        } else {
            let mut padded = code[start..].to_vec();
            padded.resize(width, 0);
            (padded, Status::TruncatedPush)
        };
        instructions.push(Instruction {
            offset: pc,
            opcode,
            mnemonic: info.mnemonic.clone(),
            operand,
            status,
        });
        pc = end;
    }
    InstructionStream {
        instructions,
        source_len: code.len(),
    }
}

/// Decodes a hex string with optional `0x` prefix.
pub fn decode_hex(text: &str) -> Result<Vec<u8>, hex::FromHexError> {
    let t = text.trim();
    let t = t
        .strip_prefix("0x")
        .or_else(|| t.strip_prefix("0X"))
        .unwrap_or(t);
    hex::decode(t)
}
