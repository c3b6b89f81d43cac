//! Synthetic classification data for the training experiments.

use crate::rng::CounterRng;
use alloc::vec;
use alloc::vec::Vec;

/// Labelled dataset with one-hot targets.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
    pub n: usize,
    pub c: usize,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<Vec<f64>>) -> Self {
        assert_eq!(inputs.len(), labels.len());
        let n = inputs.len();
        let c = labels.first().map(|l| l.len()).unwrap_or(0);
        Dataset { inputs, labels, n, c }
    }

    /// Integer class of sample `i` (argmax of the one-hot row).
    pub fn class_of(&self, i: usize) -> usize {
        self.labels[i]
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(k, _)| k)
            .unwrap_or(0)
    }
}

/// Class-conditional means of the three scalar clusters.
pub const CLASS_MEANS: [f64; 3] = [0.0, 10.0, -10.0];

/// 60 scalar points in 3 classes: the label is uniform over {0,1,2} and
/// `x | y ~ N(mean_y, 1)` with means 0, 10, -10. One-hot targets.
pub fn make_synthetic_dataset(seed: u64) -> Dataset {
    let n = 60;
    let c = 3;
    let mut label_rng = CounterRng::new(seed, 0);
    let mut x_rng = CounterRng::new(seed, 1);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = label_rng.below(c as u64) as usize;
        let x = CLASS_MEANS[y] + x_rng.normal();
        inputs.push(vec![x]);
        let mut onehot = vec![0.0; c];
        onehot[y] = 1.0;
        labels.push(onehot);
    }
    Dataset::new(inputs, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_gives_identical_datasets() {
        let a = make_synthetic_dataset(42);
        let b = make_synthetic_dataset(42);
        assert_eq!(a.inputs, b.inputs);
        assert_eq!(a.labels, b.labels);
        assert_eq!(a.n, 60);
        assert_eq!(a.c, 3);
    }

    #[test]
    fn class_conditional_means_are_near_the_targets() {
        // Aggregate over many seeds so each class-conditional mean is well
        // within 3 standard errors of its target.
        let mut sums = [0.0_f64; 3];
        let mut counts = [0usize; 3];
        for seed in 0..50 {
            let d = make_synthetic_dataset(seed);
            for i in 0..d.n {
                let y = d.class_of(i);
                sums[y] += d.inputs[i][0];
                counts[y] += 1;
            }
        }
        for y in 0..3 {
            let mean = sums[y] / counts[y] as f64;
            let se = 1.0 / (counts[y] as f64).sqrt();
            assert!(
                (mean - CLASS_MEANS[y]).abs() < 3.0 * se,
                "class {y}: mean {mean} vs {} (se {se})",
                CLASS_MEANS[y]
            );
        }
    }

    #[test]
    fn label_marginal_is_roughly_uniform() {
        // Binomial(60, 1/3) has mean 20 and sd ~3.65; a 99% band is about
        // mean ± 2.6 sd ≈ [10, 30]. Checked across seeds with a tiny
        // allowance for unlucky draws.
        let mut violations = 0;
        let total = 200;
        for seed in 0..total {
            let d = make_synthetic_dataset(seed);
            let mut counts = [0usize; 3];
            for i in 0..d.n {
                counts[d.class_of(i)] += 1;
            }
            for &cnt in &counts {
                if !(10..=30).contains(&cnt) {
                    violations += 1;
                }
            }
        }
        // 3 classes x 200 seeds = 600 binomial draws at ~1% tail mass.
        assert!(violations <= 18, "{violations} label-count excursions out of 600");
    }

    #[test]
    fn labels_are_one_hot() {
        let d = make_synthetic_dataset(7);
        for row in &d.labels {
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            assert_eq!(ones, 1);
            assert_eq!(zeros, 2);
        }
    }
}
