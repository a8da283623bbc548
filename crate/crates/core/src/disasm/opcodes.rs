//! Static EVM opcode table.
//!
//! The table is data: [`OpcodeTable::standard`] parses the bundled
//! `opcodes.tsv`, and [`OpcodeTable::parse`] accepts any file in the same
//! format so that later forks can be described without touching code.

use std::collections::HashSet;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Mnemonic assigned to every byte the table does not define.
pub const INVALID: &str = "INVALID";

const STANDARD_TABLE: &str = include_str!("opcodes.tsv");

#[derive(Debug, Error)]
pub enum TableError {
    #[error("opcode table line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("opcode table defines byte 0x{0:02x} twice")]
    DuplicateByte(u8),
    #[error("opcode table defines mnemonic {0} twice")]
    DuplicateMnemonic(String),
}

/// One row of the table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpcodeInfo {
    pub mnemonic: String,
    /// Inline operand bytes following the opcode (n for PUSHn, else 0).
    pub immediate: usize,
    /// False for bytes that fall back to [`INVALID`].
    pub assigned: bool,
}

/// Total map from byte value to mnemonic and operand length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpcodeTable {
    entries: Vec<OpcodeInfo>,
}

impl OpcodeTable {
    /// The bundled 136-operation table.
    pub fn standard() -> &'static OpcodeTable {
        static TABLE: OnceLock<OpcodeTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            OpcodeTable::parse(STANDARD_TABLE).expect("bundled opcode table is valid")
        })
    }

    /// Parses `byte<TAB>mnemonic<TAB>immediate` lines. Blank lines and `#`
    /// comments are ignored; any whitespace separates columns.
    pub fn parse(text: &str) -> Result<Self, TableError> {
        let mut entries: Vec<OpcodeInfo> = (0..256)
            .map(|_| OpcodeInfo {
                mnemonic: INVALID.to_string(),
                immediate: 0,
                assigned: false,
            })
            .collect();
        let mut names = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let cols: Vec<&str> = content.split_whitespace().collect();
            if cols.len() != 3 {
                return Err(TableError::Malformed {
                    line,
                    message: format!("expected 3 columns, found {}", cols.len()),
                });
            }
            let byte_text = cols[0].trim_start_matches("0x").trim_start_matches("0X");
            let byte = u8::from_str_radix(byte_text, 16).map_err(|e| TableError::Malformed {
                line,
                message: format!("bad byte {:?}: {e}", cols[0]),
            })?;
            let mnemonic = cols[1].to_ascii_uppercase();
            if mnemonic == INVALID {
                return Err(TableError::Malformed {
                    line,
                    message: "INVALID is implicit and cannot be assigned".into(),
                });
            }
            let immediate: usize = cols[2].parse().map_err(|e| TableError::Malformed {
                line,
                message: format!("bad immediate {:?}: {e}", cols[2]),
            })?;
            if immediate > 32 {
                return Err(TableError::Malformed {
                    line,
                    message: format!("immediate {immediate} exceeds 32 bytes"),
                });
            }
            if entries[byte as usize].assigned {
                return Err(TableError::DuplicateByte(byte));
            }
            if !names.insert(mnemonic.clone()) {
                return Err(TableError::DuplicateMnemonic(mnemonic));
            }
            entries[byte as usize] = OpcodeInfo {
                mnemonic,
                immediate,
                assigned: true,
            };
        }
        Ok(OpcodeTable { entries })
    }

    pub fn get(&self, byte: u8) -> &OpcodeInfo {
        &self.entries[byte as usize]
    }

    pub fn mnemonic(&self, byte: u8) -> &str {
        &self.entries[byte as usize].mnemonic
    }

    pub fn immediate(&self, byte: u8) -> usize {
        self.entries[byte as usize].immediate
    }

    /// Assigned mnemonics in byte order. `INVALID` is not among them.
    pub fn mnemonics(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|e| e.assigned)
            .map(|e| e.mnemonic.as_str())
    }

    pub fn assigned_count(&self) -> usize {
        self.entries.iter().filter(|e| e.assigned).count()
    }

    pub fn contains(&self, mnemonic: &str) -> bool {
        self.entries
            .iter()
            .any(|e| e.assigned && e.mnemonic == mnemonic)
    }

    /// Iterates `(byte, info)` over all 256 byte values.
    pub fn iter(&self) -> impl Iterator<Item = (u8, &OpcodeInfo)> {
        self.entries.iter().enumerate().map(|(b, e)| (b as u8, e))
    }
}

impl fmt::Display for OpcodeTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (byte, info) in self.iter().filter(|(_, e)| e.assigned) {
            writeln!(f, "0x{byte:02x}\t{}\t{}", info.mnemonic, info.immediate)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_table_has_136_operations() {
        let table = OpcodeTable::standard();
        assert_eq!(table.assigned_count(), 136);
        assert_eq!(table.iter().count(), 256);
    }

    #[test]
    fn listed_examples() {
        let t = OpcodeTable::standard();
        let expect = [
            (0x00, "STOP"),
            (0x01, "ADD"),
            (0x02, "MUL"),
            (0x03, "SUB"),
            (0x10, "LT"),
            (0x11, "GT"),
            (0x14, "EQ"),
            (0x15, "ISZERO"),
            (0x34, "CALLVALUE"),
            (0x35, "CALLDATALOAD"),
            (0x36, "CALLDATASIZE"),
            (0x50, "POP"),
            (0x52, "MSTORE"),
            (0x54, "SLOAD"),
        ];
        for (byte, name) in expect {
            assert_eq!(t.mnemonic(byte), name);
            assert_eq!(t.immediate(byte), 0);
        }
        assert_eq!(t.mnemonic(0xfe), INVALID);
        assert!(!t.get(0xfe).assigned);
    }

    #[test]
    fn push_widths() {
        let t = OpcodeTable::standard();
        for n in 1..=32u8 {
            let byte = 0x5f + n;
            assert_eq!(t.mnemonic(byte), format!("PUSH{n}"));
            assert_eq!(t.immediate(byte), n as usize);
        }
        assert_eq!(t.immediate(0x5f), 0);
    }

    #[test]
    fn display_round_trips() {
        let t = OpcodeTable::standard();
        let again = OpcodeTable::parse(&t.to_string()).unwrap();
        assert_eq!(&again, t);
    }

    #[test]
    fn rejects_duplicates() {
        assert!(matches!(
            OpcodeTable::parse("0x00 STOP 0\n0x00 ADD 0"),
            Err(TableError::DuplicateByte(0))
        ));
        assert!(matches!(
            OpcodeTable::parse("0x00 STOP 0\n0x01 STOP 0"),
            Err(TableError::DuplicateMnemonic(_))
        ));
        assert!(OpcodeTable::parse("0x00 STOP").is_err());
    }
}
