//! Builds the ego transaction graph of one address and prints its sixteen
//! structural and amount metrics.

use gamblescan::dataset::TransactionRecord;
use gamblescan::graph::{build_graph, graph_features, GraphFeatureVector};
use num_bigint::BigUint;

fn main() {
    let ether = |x: u64| BigUint::from(x) * BigUint::from(10u64).pow(18);
    let ego = "0x00000000000000000000000000000000000000e0";
    let peer = |i: u8| format!("0x{i:040x}");
    let mut txs = Vec::new();
    let mut push = |from: String, to: String, amount: BigUint| {
        txs.push(TransactionRecord {
            tx_id: format!("t{}", txs.len()),
            from,
            to,
            value_wei: amount,
        })
    };
    push(peer(1), ego.into(), ether(1));
    push(peer(2), ego.into(), ether(3));
    for p in [1, 3, 4, 5, 5] {
        push(ego.into(), peer(p), ether(2));
    }
    push(peer(7), peer(8), ether(40)); // does not touch the ego address

    let g = build_graph(ego, &txs);
    println!("{} vertices, {} edges", g.vertices().len(), g.edges().len());
    for (name, v) in GraphFeatureVector::NAMES
        .iter()
        .zip(graph_features(&g).to_array())
    {
        println!("  {name:<22} {v:.6}");
    }
}
