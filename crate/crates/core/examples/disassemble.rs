//! Linear-sweep disassembly of a bytecode given on the command line.
//!
//!     cargo run --example disassemble -- 0x6080604052348015600f57600080fd5b

use gamblescan::disasm::{decode_hex, disassemble, Status};

fn main() -> anyhow::Result<()> {
    let hex = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "0x6080604052348015600f57600080fd5b5060".into());
    let code = decode_hex(&hex)?;
    let stream = disassemble(&code);
    for ins in stream.iter() {
        let note = match ins.status {
            Status::Valid => "",
            Status::InvalidOpcode => "  (unassigned byte)",
            Status::TruncatedPush => "  (operand runs past the end, zero padded)",
        };
        println!("{ins}{note}");
    }
    println!(
        "{} instructions covering {} of {} bytes",
        stream.len(),
        stream.consumed_bytes(),
        code.len()
    );
    Ok(())
}
