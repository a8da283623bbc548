//! Exclusive feature bundling.
//!
//! The conflict rate of two features is the share of rows where both are
//! nonzero among rows where at least one is (0 when neither ever is).
//! Features are visited by descending nonzero count and join the first
//! bundle whose worst pairwise conflict with its members stays within the
//! threshold.

use super::FeatureMatrix;

/// Result of [`efb_bundle`].
#[derive(Clone, Debug, PartialEq)]
pub struct Bundling {
    /// Partition of feature indices; members in insertion order.
    pub bundles: Vec<Vec<usize>>,
    /// Value offset of each member, aligned with `bundles`.
    pub offsets: Vec<Vec<f64>>,
    /// One column per bundle.
    pub bundled: FeatureMatrix,
}

struct NonzeroSets {
    bits: Vec<Vec<u64>>,
    counts: Vec<usize>,
}

impl NonzeroSets {
    fn new(x: &FeatureMatrix) -> Self {
        let words = x.n_rows().div_ceil(64);
        let mut bits = vec![vec![0u64; words]; x.n_cols()];
        for r in 0..x.n_rows() {
            for (j, set) in bits.iter_mut().enumerate() {
                if x.get(r, j) != 0.0 {
                    set[r / 64] |= 1 << (r % 64);
                }
            }
        }
        let counts = bits
            .iter()
            .map(|b| b.iter().map(|w| w.count_ones() as usize).sum())
            .collect();
        NonzeroSets { bits, counts }
    }

    fn conflict(&self, a: usize, b: usize) -> f64 {
        let (mut both, mut either) = (0u32, 0u32);
        for (x, y) in self.bits[a].iter().zip(&self.bits[b]) {
            both += (x & y).count_ones();
            either += (x | y).count_ones();
        }
        if either == 0 {
            0.0
        } else {
            both as f64 / either as f64
        }
    }
}

pub fn conflict_rate(x: &FeatureMatrix, a: usize, b: usize) -> f64 {
    NonzeroSets::new(x).conflict(a, b)
}

/// Greedy bundle assignment without building the bundled matrix.
pub fn efb_partition(x: &FeatureMatrix, threshold: f64) -> Vec<Vec<usize>> {
    let sets = NonzeroSets::new(x);
    let mut order: Vec<usize> = (0..x.n_cols()).collect();
    order.sort_by(|&a, &b| sets.counts[b].cmp(&sets.counts[a]).then(a.cmp(&b)));
    let mut bundles: Vec<Vec<usize>> = Vec::new();
    for f in order {
        let home = bundles
            .iter()
            .position(|members| members.iter().all(|&m| sets.conflict(f, m) <= threshold));
        match home {
            Some(i) => bundles[i].push(f),
            None => bundles.push(vec![f]),
        }
    }
    bundles
}

/// Bundles mutually (near-)exclusive features. Within a bundle a member's
/// nonzero values are shifted by the summed `max + 1` of earlier members;
/// a row takes the shifted value of its first nonzero member, or 0.
/// Assumes nonnegative feature values.
pub fn efb_bundle(x: &FeatureMatrix, threshold: f64) -> Bundling {
    let bundles = efb_partition(x, threshold);
    let col_max: Vec<f64> = (0..x.n_cols())
        .map(|j| x.column(j).fold(0.0, f64::max))
        .collect();
    let offsets: Vec<Vec<f64>> = bundles
        .iter()
        .map(|members| {
            let mut acc = 0.0;
            members
                .iter()
                .map(|&j| {
                    let off = acc;
                    acc += col_max[j] + 1.0;
                    off
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(x.n_rows() * bundles.len());
    for r in 0..x.n_rows() {
        for (members, offs) in bundles.iter().zip(&offsets) {
            let v = members.iter().zip(offs).find_map(|(&j, &off)| {
                let v = x.get(r, j);
                (v != 0.0).then_some(off + v)
            });
            values.push(v.unwrap_or(0.0));
        }
    }
    let bundled = FeatureMatrix::new(values, x.n_rows(), bundles.len());
    Bundling {
        bundles,
        offsets,
        bundled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn exclusive_pair_bundles() {
        let x = m(&[&[1.0, 0.0], &[0.0, 2.0], &[0.0, 0.0]]);
        assert_eq!(conflict_rate(&x, 0, 1), 0.0);
        let b = efb_bundle(&x, 0.0);
        assert_eq!(b.bundles.len(), 1);
    }

    #[test]
    fn overlapping_pair_stays_apart() {
        let x = m(&[&[1.0, 1.0], &[0.0, 2.0], &[3.0, 0.0]]);
        assert!((conflict_rate(&x, 0, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(efb_bundle(&x, 0.0).bundles.len(), 2);
        assert_eq!(efb_bundle(&x, 0.5).bundles.len(), 1);
    }

    #[test]
    fn never_nonzero_conflict_is_zero() {
        let x = m(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(conflict_rate(&x, 0, 1), 0.0);
    }

    #[test]
    fn one_hot_offsets() {
        // column maxima 2, 3, 1; nonzero counts 2, 2, 1 -> order 0, 1, 2
        let x = m(&[
            &[2.0, 0.0, 0.0],
            &[0.0, 3.0, 0.0],
            &[0.0, 0.0, 1.0],
            &[1.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0],
            &[0.0, 0.0, 0.0],
        ]);
        let b = efb_bundle(&x, 0.0);
        assert_eq!(b.bundles, vec![vec![0, 1, 2]]);
        assert_eq!(b.offsets, vec![vec![0.0, 3.0, 7.0]]);
        let col: Vec<f64> = b.bundled.column(0).collect();
        assert_eq!(col, [2.0, 6.0, 8.0, 1.0, 4.0, 0.0]);
    }

    #[test]
    fn greedy_orders_by_density() {
        // feature 2 is densest and conflicts with both others
        let x = m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 1.0], &[0.0, 0.0, 1.0]]);
        assert_eq!(efb_partition(&x, 0.0), vec![vec![2], vec![0, 1]]);
    }
}
