//! Quantile histogram bins and the bin-level feature groups (single
//! features or exclusive bundles) that histograms are accumulated over.

use super::FeatureMatrix;

/// Maps raw values of one feature to histogram bins.
///
/// Bin `k` holds values `x <= bounds[k]` not claimed by a lower bin; the
/// last regular bin is unbounded above. NaN goes to a dedicated missing
/// bin placed after the regular ones.
#[derive(Clone, Debug, PartialEq)]
pub struct BinMapper {
    bounds: Vec<f64>,
    default_bin: u32,
}

fn cut_between(lo: f64, hi: f64) -> f64 {
    if !lo.is_finite() || !hi.is_finite() {
        return lo;
    }
    let mid = lo / 2.0 + hi / 2.0;
    if lo < mid && mid < hi {
        mid
    } else {
        lo
    }
}

impl BinMapper {
    pub fn fit(column: impl Iterator<Item = f64>, max_bins: usize) -> Self {
        let mut values: Vec<f64> = column.filter(|v| !v.is_nan()).collect();
        values.sort_by(f64::total_cmp);
        let mut distinct: Vec<(f64, usize)> = Vec::new();
        for v in values.iter().copied() {
            match distinct.last_mut() {
                // total_cmp separates -0.0 and 0.0; bins should not
                Some((last, count)) if *last == v => *count += 1,
                _ => distinct.push((v, 1)),
            }
        }
        let max_bins = max_bins.max(2);
        let mut bounds = Vec::new();
        if distinct.len() <= max_bins {
            for w in distinct.windows(2) {
                bounds.push(cut_between(w[0].0, w[1].0));
            }
        } else {
            let n = values.len() as f64;
            let per_bin = n / max_bins as f64;
            let mut cum = 0usize;
            for i in 0..distinct.len() - 1 {
                cum += distinct[i].1;
                if cum as f64 >= per_bin * (bounds.len() + 1) as f64 {
                    bounds.push(cut_between(distinct[i].0, distinct[i + 1].0));
                }
            }
        }
        bounds.dedup();
        let mut mapper = BinMapper {
            bounds,
            default_bin: 0,
        };
        mapper.default_bin = mapper.bin(0.0);
        mapper
    }

    /// Regular (non-missing) bins.
    pub fn n_bins(&self) -> usize {
        self.bounds.len() + 1
    }

    pub fn missing_bin(&self) -> u32 {
        self.bounds.len() as u32 + 1
    }

    /// Regular bins plus the missing bin.
    pub fn total_bins(&self) -> usize {
        self.bounds.len() + 2
    }

    pub fn bin(&self, x: f64) -> u32 {
        if x.is_nan() {
            self.missing_bin()
        } else {
            self.bounds.partition_point(|b| *b < x) as u32
        }
    }

    /// Bin holding 0.0.
    pub fn default_bin(&self) -> u32 {
        self.default_bin
    }

    /// Raw threshold equivalent to "bin <= k".
    pub fn threshold(&self, k: usize) -> f64 {
        self.bounds[k]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }
}

/// Columns that share one histogram. A bundle stores, per row, the bin of
/// the first member whose bin differs from its default, shifted by that
/// member's offset; 0 means every member sits in its default bin.
#[derive(Clone, Debug)]
pub(crate) struct FeatureGroup {
    pub offsets: Vec<u32>,
    pub total_bins: usize,
    pub bundled: bool,
    pub data: Vec<u32>,
}

/// Training matrix in bin space.
#[derive(Clone, Debug)]
pub struct BinnedData {
    n_rows: usize,
    mappers: Vec<BinMapper>,
    pub(crate) groups: Vec<FeatureGroup>,
    /// feature -> (group, position within group)
    pub(crate) slots: Vec<(usize, usize)>,
}

impl BinnedData {
    /// Bins every feature separately.
    pub fn new(x: &FeatureMatrix, max_bins: usize) -> Self {
        let singles: Vec<Vec<usize>> = (0..x.n_cols()).map(|j| vec![j]).collect();
        Self::with_bundles(x, max_bins, &singles)
    }

    /// Bins features and packs each multi-member entry of `bundles` into a
    /// shared column. `bundles` must partition the feature indices.
    pub fn with_bundles(x: &FeatureMatrix, max_bins: usize, bundles: &[Vec<usize>]) -> Self {
        let n = x.n_rows();
        let mappers: Vec<BinMapper> = (0..x.n_cols())
            .map(|j| BinMapper::fit(x.column(j), max_bins))
            .collect();
        let mut slots = vec![(usize::MAX, 0); x.n_cols()];
        let mut groups = Vec::with_capacity(bundles.len());
        for (g, members) in bundles.iter().enumerate() {
            for (pos, &j) in members.iter().enumerate() {
                assert_eq!(slots[j].0, usize::MAX, "feature {j} appears in two bundles");
                slots[j] = (g, pos);
            }
            if members.len() == 1 {
                let j = members[0];
                let m = &mappers[j];
                groups.push(FeatureGroup {
                    offsets: vec![0],
                    total_bins: m.total_bins(),
                    bundled: false,
                    data: (0..n).map(|r| m.bin(x.get(r, j))).collect(),
                });
            } else {
                let mut offsets = Vec::with_capacity(members.len());
                let mut next = 1u32;
                for &j in members {
                    offsets.push(next);
                    next += mappers[j].total_bins() as u32;
                }
                let data = (0..n)
                    .map(|r| {
                        members
                            .iter()
                            .zip(&offsets)
                            .find_map(|(&j, &off)| {
                                let b = mappers[j].bin(x.get(r, j));
                                (b != mappers[j].default_bin()).then_some(off + b)
                            })
                            .unwrap_or(0)
                    })
                    .collect();
                groups.push(FeatureGroup {
                    offsets,
                    total_bins: next as usize,
                    bundled: true,
                    data,
                });
            }
        }
        assert!(
            slots.iter().all(|s| s.0 != usize::MAX),
            "bundles must cover every feature"
        );
        BinnedData {
            n_rows: n,
            mappers,
            groups,
            slots,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.mappers.len()
    }

    pub fn mapper(&self, feature: usize) -> &BinMapper {
        &self.mappers[feature]
    }

    pub fn n_groups(&self) -> usize {
        self.groups.len()
    }

    /// Bin of `feature` at `row` as seen by the histograms.
    pub fn bin(&self, row: usize, feature: usize) -> u32 {
        let (g, pos) = self.slots[feature];
        let group = &self.groups[g];
        let e = group.data[row];
        if !group.bundled {
            return e;
        }
        let off = group.offsets[pos];
        let width = self.mappers[feature].total_bins() as u32;
        if e >= off && e < off + width {
            e - off
        } else {
            self.mappers[feature].default_bin()
        }
    }
}
