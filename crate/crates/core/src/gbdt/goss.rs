//! Gradient-based one-side sampling.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GradientState;

/// Rows used to grow one tree and the weight applied to their gradients.
/// Indices are ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Sample {
    pub fn full(n: usize) -> Self {
        Sample {
            indices: (0..n).collect(),
            weights: vec![1.0; n],
        }
    }

    /// Given rows with unit weight; sorted and deduplicated.
    pub fn uniform(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let weights = vec![1.0; indices.len()];
        Sample { indices, weights }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Weighted gradient sum over the sample.
    pub fn gradient_sum(&self, grads: &GradientState) -> f64 {
        self.indices
            .iter()
            .zip(&self.weights)
            .map(|(&i, &w)| w * grads.grad[i])
            .sum()
    }
}

fn ceil_count(rate: f64, n: usize) -> usize {
    // guard against 0.2 * 10 landing just above 2
    (((rate * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Keeps the `ceil(top_rate * n)` rows with largest |g| (ties by lower
/// index) at weight 1 and draws `ceil(other_rate * n)` of the rest
/// uniformly without replacement at weight `(1 - top_rate) / other_rate`.
pub fn goss_sample(grads: &GradientState, top_rate: f64, other_rate: f64, seed: u64) -> Sample {
    let n = grads.len();
    let top_n = ceil_count(top_rate, n);
    if top_n >= n {
        return Sample::full(n);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        grads.grad[b]
            .abs()
            .total_cmp(&grads.grad[a].abs())
            .then(a.cmp(&b))
    });
    let rest = &order[top_n..];
    let other_n = if other_rate > 0.0 {
        ceil_count(other_rate, n).min(rest.len())
    } else {
        0
    };

    let mut picked: Vec<(usize, f64)> = order[..top_n].iter().map(|&i| (i, 1.0)).collect();
    if other_n > 0 {
        let amplify = (1.0 - top_rate) / other_rate;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for k in index::sample(&mut rng, rest.len(), other_n) {
            picked.push((rest[k], amplify));
        }
    }
    picked.sort_unstable_by_key(|p| p.0);
    let (indices, weights) = picked.into_iter().unzip();
    Sample { indices, weights }
}
