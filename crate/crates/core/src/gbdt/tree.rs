//! Histogram-based, leaf-wise regression tree growth on second-order
//! gradient statistics.

use std::ops::{Add, AddAssign, Sub};

use rayon::prelude::*;

use super::binning::BinnedData;
use super::{GradientState, Sample, TrainingConfig};

const PARALLEL_ROWS: usize = 4096;

#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        default_left: bool,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

/// Binary tree stored as a node arena; node 0 is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(weight: f64) -> Self {
        Tree {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    /// `x <= threshold` goes left; NaN follows the node's default direction.
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { weight } => return *weight,
                Node::Split {
                    feature,
                    threshold,
                    default_left,
                    left,
                    right,
                } => {
                    let x = row[*feature];
                    let go_left = if x.is_nan() {
                        *default_left
                    } else {
                        x <= *threshold
                    };
                    i = if go_left { *left } else { *right };
                }
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature),
            Node::Leaf { .. } => None,
        })
    }

    /// Checks that children indices form a proper tree rooted at node 0.
    pub fn validate(&self, n_features: usize) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if i >= self.nodes.len() {
                return Err(format!("child index {i} out of range"));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(format!("node {i} reached twice"));
            }
            if let Node::Split {
                feature,
                left,
                right,
                ..
            } = &self.nodes[i]
            {
                if *feature >= n_features {
                    return Err(format!("feature {feature} out of range"));
                }
                stack.push(*left);
                stack.push(*right);
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err("unreachable nodes".into())
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub(crate) struct BinStat {
    g: f64,
    h: f64,
    n: u32,
}

impl Add for BinStat {
    type Output = BinStat;
    fn add(self, o: BinStat) -> BinStat {
        BinStat {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }
}

impl AddAssign for BinStat {
    fn add_assign(&mut self, o: BinStat) {
        *self = *self + o;
    }
}

impl Sub for BinStat {
    type Output = BinStat;
    fn sub(self, o: BinStat) -> BinStat {
        BinStat {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

type Histogram = Vec<Vec<BinStat>>;

/// Gains this close count as ties, so the tie-break rule decides and not
/// the summation order (which differs between bundled and plain columns).
const GAIN_RTOL: f64 = 1e-9;

fn beats(gain: f64, incumbent: f64) -> bool {
    gain - incumbent > GAIN_RTOL * gain.abs().max(incumbent.abs())
}

#[derive(Clone, Copy, Debug)]
struct Candidate {
    gain: f64,
    feature: usize,
    bin: u32,
    default_left: bool,
}

struct Penalty {
    lambda: f64,
    gamma: f64,
    min_leaf: u32,
}

impl Penalty {
    fn score(&self, s: BinStat) -> f64 {
        s.g * s.g / (s.h + self.lambda)
    }

    fn weight(&self, s: BinStat) -> f64 {
        let denom = s.h + self.lambda;
        if denom > 0.0 && s.g != 0.0 {
            -s.g / denom
        } else {
            0.0
        }
    }

    fn gain(&self, left: BinStat, right: BinStat, total: BinStat) -> Option<f64> {
        if left.n < self.min_leaf || right.n < self.min_leaf {
            return None;
        }
        if left.h + self.lambda <= 0.0
            || right.h + self.lambda <= 0.0
            || total.h + self.lambda <= 0.0
        {
            return None;
        }
        Some(0.5 * (self.score(left) + self.score(right) - self.score(total)) - self.gamma)
    }
}

struct Grower<'a> {
    data: &'a BinnedData,
    wg: Vec<f64>,
    wh: Vec<f64>,
    penalty: Penalty,
}

impl Grower<'_> {
    fn histogram(&self, rows: &[usize]) -> Histogram {
        let build = |group: &super::binning::FeatureGroup| {
            let mut h = vec![BinStat::default(); group.total_bins];
            for &r in rows {
                let b = &mut h[group.data[r] as usize];
                b.g += self.wg[r];
                b.h += self.wh[r];
                b.n += 1;
            }
            h
        };
        if rows.len() >= PARALLEL_ROWS {
            self.data.groups.par_iter().map(build).collect()
        } else {
            self.data.groups.iter().map(build).collect()
        }
    }

    fn totals(&self, rows: &[usize]) -> BinStat {
        let mut t = BinStat::default();
        for &r in rows {
            t.g += self.wg[r];
            t.h += self.wh[r];
            t.n += 1;
        }
        t
    }

    /// Histogram of one feature (regular bins, then the missing bin).
    fn feature_histogram(&self, hist: &Histogram, feature: usize, total: BinStat) -> Vec<BinStat> {
        let (g, pos) = self.data.slots[feature];
        let group = &self.data.groups[g];
        let mapper = self.data.mapper(feature);
        if !group.bundled {
            return hist[g].clone();
        }
        let off = group.offsets[pos] as usize;
        let d = mapper.default_bin() as usize;
        let mut out = hist[g][off..off + mapper.total_bins()].to_vec();
        let mut others = BinStat::default();
        for (b, s) in out.iter().enumerate() {
            if b != d {
                others += *s;
            }
        }
        out[d] = total - others;
        out
    }

    fn best_for_feature(
        &self,
        hist: &Histogram,
        feature: usize,
        total: BinStat,
    ) -> Option<Candidate> {
        let mapper = self.data.mapper(feature);
        let nb = mapper.n_bins();
        if nb < 2 {
            return None;
        }
        let fh = self.feature_histogram(hist, feature, total);
        let missing = fh[nb];
        let mut best: Option<Candidate> = None;
        for default_left in [false, true] {
            if default_left && missing.n == 0 {
                continue;
            }
            let mut left = if default_left {
                missing
            } else {
                BinStat::default()
            };
            for (k, stat) in fh.iter().enumerate().take(nb - 1) {
                left += *stat;
                let right = total - left;
                if let Some(gain) = self.penalty.gain(left, right, total) {
                    if gain > 0.0 && best.is_none_or(|c| beats(gain, c.gain)) {
                        best = Some(Candidate {
                            gain,
                            feature,
                            bin: k as u32,
                            default_left,
                        });
                    }
                }
            }
        }
        best
    }

    fn best_split(&self, hist: &Histogram, total: BinStat) -> Option<Candidate> {
        let nf = self.data.n_features();
        let per_feature: Vec<Option<Candidate>> = if total.n as usize >= PARALLEL_ROWS {
            (0..nf)
                .into_par_iter()
                .map(|j| self.best_for_feature(hist, j, total))
                .collect()
        } else {
            (0..nf)
                .map(|j| self.best_for_feature(hist, j, total))
                .collect()
        };
        // first feature wins ties
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |acc: Option<Candidate>, c| match acc {
                Some(a) if !beats(c.gain, a.gain) => Some(a),
                _ => Some(c),
            })
    }
}

fn subtract(parent: &Histogram, child: &Histogram) -> Histogram {
    parent
        .iter()
        .zip(child)
        .map(|(p, c)| p.iter().zip(c).map(|(a, b)| *a - *b).collect())
        .collect()
}

struct OpenLeaf {
    node: usize,
    rows: Vec<usize>,
    hist: Histogram,
    total: BinStat,
    best: Option<Candidate>,
}

/// Grows one tree on the rows of `sample`, with each row's gradient and
/// hessian scaled by its sample weight. The leaf with the largest gain is
/// split first until `max_leaves` is reached or no split has positive gain.
pub fn grow_tree(
    data: &BinnedData,
    grads: &GradientState,
    sample: &Sample,
    config: &TrainingConfig,
) -> Tree {
    let n = data.n_rows();
    assert_eq!(grads.len(), n, "one gradient per row");
    let mut wg = vec![0.0; n];
    let mut wh = vec![0.0; n];
    for (&i, &w) in sample.indices.iter().zip(&sample.weights) {
        wg[i] = w * grads.grad[i];
        wh[i] = w * grads.hess[i];
    }
    let grower = Grower {
        data,
        wg,
        wh,
        penalty: Penalty {
            lambda: config.lambda,
            gamma: config.min_split_gain,
            min_leaf: config.min_samples_leaf.min(u32::MAX as usize) as u32,
        },
    };

    let rows = sample.indices.clone();
    let hist = grower.histogram(&rows);
    let total = grower.totals(&rows);
    let best = grower.best_split(&hist, total);
    let mut nodes = vec![Node::Leaf { weight: 0.0 }];
    let mut open = vec![OpenLeaf {
        node: 0,
        rows,
        hist,
        total,
        best,
    }];
    let mut n_leaves = 1;

    while n_leaves < config.max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.best.map(|c| (i, c.gain, l.node)))
            .fold(None, |acc: Option<(usize, f64, usize)>, c| match acc {
                Some(a) if beats(a.1, c.1) || (!beats(c.1, a.1) && a.2 < c.2) => Some(a),
                _ => Some(c),
            });
        let Some((idx, _, _)) = pick else { break };
        let leaf = open.remove(idx);
        let split = leaf.best.expect("picked leaves have a split");
        let mapper = data.mapper(split.feature);
        let missing = mapper.missing_bin();
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = leaf.rows.iter().partition(|&&r| {
            let b = data.bin(r, split.feature);
            if b == missing {
                split.default_left
            } else {
                b <= split.bin
            }
        });

        let (left_hist, right_hist) = if left_rows.len() <= right_rows.len() {
            let small = grower.histogram(&left_rows);
            let large = subtract(&leaf.hist, &small);
            (small, large)
        } else {
            let small = grower.histogram(&right_rows);
            let large = subtract(&leaf.hist, &small);
            (large, small)
        };
        let left_total = grower.totals(&left_rows);
        let right_total = grower.totals(&right_rows);

        let l = nodes.len();
        nodes.push(Node::Leaf { weight: 0.0 });
        nodes.push(Node::Leaf { weight: 0.0 });
        nodes[leaf.node] = Node::Split {
            feature: split.feature,
            threshold: mapper.threshold(split.bin as usize),
            default_left: split.default_left,
            left: l,
            right: l + 1,
        };
        n_leaves += 1;

        let left_best = grower.best_split(&left_hist, left_total);
        let right_best = grower.best_split(&right_hist, right_total);
        open.push(OpenLeaf {
            node: l,
            rows: left_rows,
            hist: left_hist,
            total: left_total,
            best: left_best,
        });
        open.push(OpenLeaf {
            node: l + 1,
            rows: right_rows,
            hist: right_hist,
            total: right_total,
            best: right_best,
        });
    }

    for leaf in &open {
        nodes[leaf.node] = Node::Leaf {
            weight: grower.penalty.weight(leaf.total),
        };
    }
    Tree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbdt::FeatureMatrix;

    fn cfg() -> TrainingConfig {
        TrainingConfig {
            min_samples_leaf: 1,
            lambda: 1.0,
            min_split_gain: 0.0,
            ..Default::default()
        }
    }

    fn state(g: &[f64]) -> GradientState {
        GradientState {
            grad: g.to_vec(),
            hess: vec![0.25; g.len()],
        }
    }

    #[test]
    fn separating_feature_leaf_weights() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![0.0], vec![1.0], vec![1.0]]);
        let data = BinnedData::new(&x, 255);
        let tree = grow_tree(
            &data,
            &state(&[-0.5, -0.5, 0.5, 0.5]),
            &Sample::full(4),
            &cfg(),
        );
        assert_eq!(tree.n_leaves(), 2);
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert!((tree.predict(&[0.0]) - 2.0 / 3.0).abs() < 1e-15);
        assert!((tree.predict(&[1.0]) + 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_single_leaf() {
        let x = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]);
        let data = BinnedData::new(&x, 255);
        let tree = grow_tree(&data, &state(&[0.0; 3]), &Sample::full(3), &cfg());
        assert_eq!(tree, Tree::leaf(0.0));
    }

    #[test]
    fn constant_column_never_used() {
        let x = FeatureMatrix::from_rows(&[
            vec![3.0, 0.0],
            vec![3.0, 1.0],
            vec![3.0, 0.0],
            vec![3.0, 1.0],
        ]);
        let data = BinnedData::new(&x, 255);
        let tree = grow_tree(
            &data,
            &state(&[-0.5, 0.5, -0.5, 0.5]),
            &Sample::full(4),
            &cfg(),
        );
        assert!(tree.split_features().all(|f| f == 1));
        assert_eq!(tree.split_features().count(), 1);

        let data = BinnedData::new(&FeatureMatrix::from_rows(&[vec![3.0], vec![3.0]]), 255);
        let tree = grow_tree(&data, &state(&[-0.5, 0.5]), &Sample::full(2), &cfg());
        assert_eq!(tree.n_leaves(), 1);
    }

    #[test]
    fn missing_values_follow_learned_direction() {
        let x = FeatureMatrix::from_rows(&[
            vec![f64::NAN],
            vec![f64::NAN],
            vec![1.0],
            vec![2.0],
            vec![5.0],
            vec![6.0],
        ]);
        let data = BinnedData::new(&x, 255);
        let g = [-0.5, -0.5, -0.5, -0.5, 0.5, 0.5];
        let tree = grow_tree(
            &data,
            &state(&g),
            &Sample::full(6),
            &TrainingConfig {
                max_leaves: 2,
                ..cfg()
            },
        );
        assert!(tree.predict(&[f64::NAN]) > 0.0);
        assert!(tree.predict(&[1.5]) > 0.0);
        assert!(tree.predict(&[6.0]) < 0.0);
    }

    #[test]
    fn respects_limits() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let g: Vec<f64> = (0..64)
            .map(|i| ((i * 13) % 11) as f64 / 11.0 - 0.5)
            .collect();
        let data = BinnedData::new(&FeatureMatrix::from_rows(&rows), 255);
        let c = TrainingConfig {
            max_leaves: 5,
            min_samples_leaf: 6,
            ..cfg()
        };
        let tree = grow_tree(&data, &state(&g), &Sample::full(64), &c);
        assert!(tree.n_leaves() <= 5);
        tree.validate(2).unwrap();
        // every leaf holds at least min_samples_leaf rows
        let mut counts = std::collections::HashMap::new();
        for r in &rows {
            *counts.entry(tree.predict(r).to_bits()).or_insert(0) += 1;
        }
        assert!(counts.values().all(|&c| c >= 6), "{counts:?}");
    }

    #[test]
    fn validate_catches_cycles() {
        let t = Tree {
            nodes: vec![Node::Split {
                feature: 0,
                threshold: 0.0,
                default_left: true,
                left: 0,
                right: 0,
            }],
        };
        assert!(t.validate(1).is_err());
        let t = Tree {
            nodes: vec![
                Node::Split {
                    feature: 3,
                    threshold: 0.0,
                    default_left: true,
                    left: 1,
                    right: 2,
                },
                Tree::leaf(0.0).nodes[0].clone(),
                Tree::leaf(1.0).nodes[0].clone(),
            ],
        };
        assert!(t.validate(2).is_err());
        assert!(t.validate(4).is_ok());
    }
}
