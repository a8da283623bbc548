//! Per-address ego transaction multigraphs and their summary metrics.
//!
//! Each transaction touching the ego address becomes one directed edge
//! weighted by its amount; parallel edges are kept. An edge is an output
//! edge when the ego pays (self-transfers included) and an input edge when
//! the ego receives.
//!
//! Degrees are averaged over all vertices, so the mean in-degree and mean
//! out-degree both equal E/V and the mean degree is 2E/V. The columns are
//! collinear but kept, since each is part of the feature layout.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;

use crate::dataset::{self, AddressRecord, DatasetError, LabeledDataset, TransactionRecord};

pub const ADDRESS_FEATURE_UNITS: &str =
    "counts; degrees averaged over all vertices incl. ego with edge multiplicity; amounts in ether (wei / 1e18), population variance";

const WEI_PER_ETHER: f64 = 1e18;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    In,
    Out,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tx_id: String,
    pub from: String,
    pub to: String,
    pub amount_wei: BigUint,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransactionGraph {
    ego: String,
    vertices: BTreeSet<String>,
    edges: Vec<Edge>,
}

impl TransactionGraph {
    pub fn new(ego: impl Into<String>) -> Self {
        let ego = dataset::normalize_address(&ego.into());
        let vertices = BTreeSet::from([ego.clone()]);
        TransactionGraph {
            ego,
            vertices,
            edges: Vec::new(),
        }
    }

    /// Adds the transaction if it touches the ego; returns whether it did.
    pub fn add(&mut self, tx: &TransactionRecord) -> bool {
        if tx.from != self.ego && tx.to != self.ego {
            return false;
        }
        self.vertices.insert(tx.from.clone());
        self.vertices.insert(tx.to.clone());
        self.edges.push(Edge {
            tx_id: tx.tx_id.clone(),
            from: tx.from.clone(),
            to: tx.to.clone(),
            amount_wei: tx.value_wei.clone(),
        });
        true
    }

    pub fn ego(&self) -> &str {
        &self.ego
    }

    pub fn vertices(&self) -> &BTreeSet<String> {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn direction(&self, edge: &Edge) -> Direction {
        if edge.from == self.ego {
            Direction::Out
        } else {
            Direction::In
        }
    }

    /// `(in_degree, out_degree)` per vertex, counting parallel edges.
    pub fn degrees(&self) -> BTreeMap<&str, (usize, usize)> {
        let mut d: BTreeMap<&str, (usize, usize)> =
            self.vertices.iter().map(|v| (v.as_str(), (0, 0))).collect();
        for e in &self.edges {
            d.get_mut(e.from.as_str()).expect("endpoint is a vertex").1 += 1;
            d.get_mut(e.to.as_str()).expect("endpoint is a vertex").0 += 1;
        }
        d
    }
}

/// Graph of every transaction in `txs` that involves `ego`.
pub fn build_graph(ego: &str, txs: &[TransactionRecord]) -> TransactionGraph {
    let mut g = TransactionGraph::new(ego);
    for tx in txs {
        g.add(tx);
    }
    g
}

/// Address -> transaction positions, built once and then shared.
pub struct TxIndex<'a> {
    txs: &'a [TransactionRecord],
    by_address: HashMap<&'a str, Vec<usize>>,
}

impl<'a> TxIndex<'a> {
    pub fn new(txs: &'a [TransactionRecord]) -> Self {
        let mut by_address: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, tx) in txs.iter().enumerate() {
            by_address.entry(tx.from.as_str()).or_default().push(i);
            if tx.to != tx.from {
                by_address.entry(tx.to.as_str()).or_default().push(i);
            }
        }
        TxIndex { txs, by_address }
    }

    pub fn transactions_of(
        &self,
        address: &str,
    ) -> impl Iterator<Item = &'a TransactionRecord> + '_ {
        self.by_address
            .get(address)
            .into_iter()
            .flatten()
            .map(move |&i| &self.txs[i])
    }

    pub fn build_graph(&self, ego: &str) -> TransactionGraph {
        let mut g = TransactionGraph::new(ego);
        let key = g.ego.clone();
        for tx in self.transactions_of(&key) {
            g.add(tx);
        }
        g
    }
}

/// Basic, degree and amount metrics of one ego graph.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraphFeatureVector {
    pub vertex_number: f64,
    pub edge_number: f64,
    pub in_edge_number: f64,
    pub out_edge_number: f64,
    pub vertex_degree: f64,
    pub vertex_in_degree: f64,
    pub vertex_out_degree: f64,
    pub total_amount: f64,
    pub total_in_amount: f64,
    pub total_out_amount: f64,
    pub avg_amount: f64,
    pub avg_in_amount: f64,
    pub avg_out_amount: f64,
    pub amount_variance: f64,
    pub in_amount_variance: f64,
    pub out_amount_variance: f64,
}

impl GraphFeatureVector {
    pub const NAMES: [&'static str; 16] = [
        "vertex_number",
        "edge_number",
        "in_edge_number",
        "out_edge_number",
        "vertex_degree",
        "vertex_in_degree",
        "vertex_out_degree",
        "total_amount",
        "total_in_amount",
        "total_out_amount",
        "avg_amount",
        "avg_in_amount",
        "avg_out_amount",
        "amount_variance",
        "in_amount_variance",
        "out_amount_variance",
    ];

    pub fn to_array(&self) -> [f64; 16] {
        [
            self.vertex_number,
            self.edge_number,
            self.in_edge_number,
            self.out_edge_number,
            self.vertex_degree,
            self.vertex_in_degree,
            self.vertex_out_degree,
            self.total_amount,
            self.total_in_amount,
            self.total_out_amount,
            self.avg_amount,
            self.avg_in_amount,
            self.avg_out_amount,
            self.amount_variance,
            self.in_amount_variance,
            self.out_amount_variance,
        ]
    }
}

pub fn wei_to_ether(wei: &BigUint) -> f64 {
    wei.to_f64().unwrap_or(f64::INFINITY) / WEI_PER_ETHER
}

/// Sum (exact, in wei), mean and population variance (in ether).
fn amount_stats<'a>(amounts: impl Iterator<Item = &'a BigUint> + Clone) -> (f64, f64, f64) {
    let count = amounts.clone().count();
    if count == 0 {
        return (0.0, 0.0, 0.0);
    }
    let total_wei = amounts.clone().fold(BigUint::zero(), |acc, a| acc + a);
    let total = wei_to_ether(&total_wei);
    let mean = total / count as f64;
    let var = amounts
        .map(|a| (wei_to_ether(a) - mean).powi(2))
        .sum::<f64>()
        / count as f64;
    (total, mean, var)
}

pub fn graph_features(g: &TransactionGraph) -> GraphFeatureVector {
    let vertices = g.vertices.len() as f64;
    let in_edges = || {
        g.edges
            .iter()
            .filter(|e| g.direction(e) == Direction::In)
            .map(|e| &e.amount_wei)
    };
    let out_edges = || {
        g.edges
            .iter()
            .filter(|e| g.direction(e) == Direction::Out)
            .map(|e| &e.amount_wei)
    };
    let all = || g.edges.iter().map(|e| &e.amount_wei);

    let degrees = g.degrees();
    let in_sum: usize = degrees.values().map(|d| d.0).sum();
    let out_sum: usize = degrees.values().map(|d| d.1).sum();

    let (total, avg, var) = amount_stats(all());
    let (total_in, avg_in, var_in) = amount_stats(in_edges());
    let (total_out, avg_out, var_out) = amount_stats(out_edges());

    GraphFeatureVector {
        vertex_number: vertices,
        edge_number: g.edges.len() as f64,
        in_edge_number: in_edges().count() as f64,
        out_edge_number: out_edges().count() as f64,
        vertex_degree: (in_sum + out_sum) as f64 / vertices,
        vertex_in_degree: in_sum as f64 / vertices,
        vertex_out_degree: out_sum as f64 / vertices,
        total_amount: total,
        total_in_amount: total_in,
        total_out_amount: total_out,
        avg_amount: avg,
        avg_in_amount: avg_in,
        avg_out_amount: avg_out,
        amount_variance: var,
        in_amount_variance: var_in,
        out_amount_variance: var_out,
    }
}

/// Builds graphs for `addresses` (in order) from one shared index.
pub fn build_graphs(
    addresses: &[AddressRecord],
    txs: &[TransactionRecord],
) -> Vec<TransactionGraph> {
    let index = TxIndex::new(txs);
    addresses
        .par_iter()
        .map(|a| index.build_graph(&a.account))
        .collect()
}

pub fn featurize_addresses(
    addresses: &[AddressRecord],
    graphs: &[TransactionGraph],
) -> Result<LabeledDataset, DatasetError> {
    assert_eq!(addresses.len(), graphs.len(), "one graph per address");
    let rows: Vec<[f64; 16]> = graphs
        .par_iter()
        .map(|g| graph_features(g).to_array())
        .collect();
    LabeledDataset::new(
        addresses.iter().map(|a| a.account.clone()).collect(),
        GraphFeatureVector::NAMES
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows.concat(),
        addresses.iter().map(|a| a.label).collect(),
    )
    .map(|ds| ds.with_units(ADDRESS_FEATURE_UNITS))
}

fn edges_file(dir: &Path, ego: &str) -> std::path::PathBuf {
    dir.join(format!("{ego}.edges.csv"))
}

/// Writes one `<address>.edges.csv` per graph plus `index.csv`
/// (`account,label,edges`).
pub fn write_graphs(
    dir: impl AsRef<Path>,
    addresses: &[AddressRecord],
    graphs: &[TransactionGraph],
) -> Result<(), DatasetError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    for g in graphs {
        let p = edges_file(dir, g.ego());
        dataset::write_csv(
            &p,
            &["tx_id", "from", "to", "value_wei"],
            g.edges.iter().map(|e| {
                vec![
                    e.tx_id.clone(),
                    e.from.clone(),
                    e.to.clone(),
                    e.amount_wei.to_string(),
                ]
            }),
        )?;
    }
    dataset::write_csv(
        &dir.join("index.csv"),
        &["account", "label", "edges"],
        addresses.iter().zip(graphs).map(|(a, g)| {
            vec![
                a.account.clone(),
                a.label.to_string(),
                g.edges.len().to_string(),
            ]
        }),
    )
}

/// Reads a directory written by [`write_graphs`].
pub fn read_graphs(
    dir: impl AsRef<Path>,
) -> Result<(Vec<AddressRecord>, Vec<TransactionGraph>), DatasetError> {
    let dir = dir.as_ref();
    let index_path = dir.join("index.csv");
    let mut rdr = csv::Reader::from_path(&index_path).map_err(|source| DatasetError::Csv {
        path: index_path.clone(),
        source,
    })?;
    let mut addresses = Vec::new();
    let mut graphs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| DatasetError::Csv {
            path: index_path.clone(),
            source,
        })?;
        if rec.len() != 3 {
            return Err(DatasetError::format(
                &index_path,
                "expected account,label,edges",
            ));
        }
        let account = rec[0].to_string();
        let label = rec[1].parse().map_err(|_| {
            DatasetError::format(&index_path, format!("invalid label for {account}"))
        })?;
        let expected: usize = rec[2]
            .parse()
            .map_err(|_| DatasetError::format(&index_path, "bad edge count"))?;
        let txs = dataset::load_transactions(edges_file(dir, &account))?;
        let g = build_graph(&account, &txs);
        if g.edges.len() != expected || g.edges.len() != txs.len() {
            return Err(DatasetError::format(
                &index_path,
                format!("edge list for {account} does not match index"),
            ));
        }
        addresses.push(AddressRecord { account, label });
        graphs.push(g);
    }
    Ok((addresses, graphs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    const ETH: u64 = 1_000_000_000_000_000_000;

    fn tx(id: &str, from: &str, to: &str, eth: u64) -> TransactionRecord {
        TransactionRecord {
            tx_id: id.into(),
            from: from.into(),
            to: to.into(),
            value_wei: BigUint::from(eth) * BigUint::from(ETH),
        }
    }

    /// Two incoming and five outgoing transactions with five counterparties.
    fn star() -> Vec<TransactionRecord> {
        vec![
            tx("i1", "0xb1", "0xe", 1),
            tx("i2", "0xb2", "0xe", 3),
            tx("o1", "0xe", "0xb1", 2),
            tx("o2", "0xe", "0xb3", 2),
            tx("o3", "0xe", "0xb4", 2),
            tx("o4", "0xe", "0xb5", 2),
            tx("o5", "0xe", "0xb5", 2),
            tx("x", "0xb1", "0xb2", 9),
        ]
    }

    #[test]
    fn star_graph_counts() {
        let g = build_graph("0xE", &star());
        let f = graph_features(&g);
        assert_eq!(f.edge_number, 7.0);
        assert_eq!(f.in_edge_number, 2.0);
        assert_eq!(f.out_edge_number, 5.0);
        assert_eq!(f.vertex_number, 6.0);
        assert_eq!(f.vertex_degree, 14.0 / 6.0);
        assert_eq!(f.vertex_in_degree, 7.0 / 6.0);
        assert_eq!(f.vertex_out_degree, 7.0 / 6.0);
    }

    #[test]
    fn star_graph_amounts() {
        let f = graph_features(&build_graph("0xe", &star()));
        // brute force over the seven edge amounts
        let amounts = [1.0, 3.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        let total: f64 = amounts.iter().sum();
        let mean = total / 7.0;
        let var = amounts.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / 7.0;
        assert_eq!(f.total_amount, total);
        assert_eq!(total, 14.0);
        assert_eq!(f.avg_amount, mean);
        assert!((f.amount_variance - var).abs() < 1e-12);
        assert_eq!(f.total_in_amount, 4.0);
        assert_eq!(f.avg_in_amount, 2.0);
        assert_eq!(f.in_amount_variance, 1.0);
        assert_eq!(f.out_amount_variance, 0.0);
        assert_eq!(f.total_out_amount, 10.0);
    }

    #[test]
    fn isolated_address() {
        let f = graph_features(&build_graph("0xz", &star()));
        assert_eq!(f.vertex_number, 1.0);
        assert_eq!(f.edge_number, 0.0);
        assert_eq!(f.avg_amount, 0.0);
        assert_eq!(f.amount_variance, 0.0);
        assert_eq!(f.vertex_degree, 0.0);
    }

    #[test]
    fn parallel_edges_kept() {
        let g = build_graph("0xa", &[tx("1", "0xa", "0xb", 1), tx("2", "0xa", "0xb", 1)]);
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.vertices().len(), 2);
        assert_eq!(graph_features(&g).vertex_degree, 2.0);
    }

    #[test]
    fn self_transfer_is_one_out_edge() {
        let g = build_graph("0xa", &[tx("1", "0xa", "0xa", 5)]);
        let f = graph_features(&g);
        assert_eq!(
            (f.edge_number, f.in_edge_number, f.out_edge_number),
            (1.0, 0.0, 1.0)
        );
        assert_eq!(f.vertex_number, 1.0);
        assert_eq!(f.vertex_degree, 2.0);
    }

    #[test]
    fn index_matches_linear_scan() {
        let txs = star();
        let index = TxIndex::new(&txs);
        for ego in ["0xe", "0xb1", "0xb5", "0xq"] {
            assert_eq!(index.build_graph(ego), build_graph(ego, &txs));
        }
    }

    #[test]
    fn graphs_persist() {
        let dir = tempfile::tempdir().unwrap();
        let addrs = vec![
            AddressRecord {
                account: "0xe".into(),
                label: Label::Gamble,
            },
            AddressRecord {
                account: "0xq".into(),
                label: Label::Unlabeled,
            },
        ];
        let graphs = build_graphs(&addrs, &star());
        write_graphs(dir.path(), &addrs, &graphs).unwrap();
        let (a2, g2) = read_graphs(dir.path()).unwrap();
        assert_eq!(a2, addrs);
        assert_eq!(g2, graphs);
        let ds = featurize_addresses(&a2, &g2).unwrap();
        assert_eq!(ds.n_features(), 16);
        assert_eq!(ds.row(0)[1], 7.0);
    }
}
