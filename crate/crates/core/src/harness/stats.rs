//! Ensemble statistics.

/// One-pass mean and population variance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }
}

/// Means of consecutive `window`-sized blocks; a trailing partial block is dropped.
pub fn window_means(values: &[f64], window: usize) -> Vec<f64> {
    values.chunks_exact(window).map(|c| c.iter().sum::<f64>() / window as f64).collect()
}

/// Column-wise mean and population standard deviation over members' series of equal length.
pub fn across_members(series: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let len = series.first().map_or(0, Vec::len);
    assert!(series.iter().all(|s| s.len() == len), "members' series differ in length");
    (0..len)
        .map(|k| {
            let mut w = Welford::default();
            series.iter().for_each(|s| w.push(s[k]));
            (w.mean(), w.std())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn small_example() {
        let mut w = Welford::default();
        [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0].iter().for_each(|&x| w.push(x));
        assert_eq!((w.mean(), w.std()), (5.0, 2.0));
        assert_eq!(window_means(&[1.0, 3.0, 5.0, 7.0, 100.0], 2), vec![2.0, 6.0]);
    }

    proptest! {
        #[test]
        fn matches_two_pass(xs in proptest::collection::vec(-1e3f64..1e3, 1..200)) {
            let mut w = Welford::default();
            xs.iter().for_each(|&x| w.push(x));
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            prop_assert!((w.mean() - mean).abs() < 1e-9);
            prop_assert!((w.std() - var.sqrt()).abs() < 1e-9);
        }
    }
}
