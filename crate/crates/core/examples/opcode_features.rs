//! Opcode-count feature vectors for a few contracts, using the default
//! 84-mnemonic schema or a custom one.

use gamblescan::disasm::{decode_hex, disassemble, OpcodeTable};
use gamblescan::features::{default_schema, featurize_contract, FeatureSchema};

fn main() -> anyhow::Result<()> {
    let table = OpcodeTable::standard();
    let schema = default_schema(table);
    println!(
        "default schema: {} mnemonics, digest {}",
        schema.len(),
        &schema.digest()[..16]
    );

    let code =
        decode_hex("0x60806040523415600e57600080fd5b4260005442600155600254600a0660005260206000f3")?;
    let counts = featurize_contract(&disassemble(&code), &schema).counts;
    for (name, n) in schema
        .mnemonics()
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n > 0)
    {
        println!("  {name:<14} {n}");
    }

    // a narrower schema, as a user-supplied file would define it
    let custom = FeatureSchema::parse("TIMESTAMP\nSLOAD\nMOD\nCALLDATACOPY\n", table)?;
    let v = featurize_contract(&disassemble(&code), &custom).counts;
    println!("custom schema {:?} -> {:?}", custom.mnemonics(), v);
    Ok(())
}
