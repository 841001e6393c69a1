//! Running statistics and seeded streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Welford's running mean and variance, with Chan's merge.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let total = self.count + other.count;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / total as f64;
        self.m2 += other.m2 + delta * delta * (self.count as f64 * other.count as f64) / total as f64;
        self.count = total;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance.
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn estimate(&self, seed: u64) -> SimEstimate {
        SimEstimate {
            mean: self.mean,
            std_error: self.std_error(),
            samples: self.count,
            seed,
        }
    }
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    /// Replications, or batches for time averages.
    pub samples: u64,
    pub seed: u64,
}

impl SimEstimate {
    /// `|mean − target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.mean - target).abs();
        if self.std_error > 0.0 {
            diff / self.std_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        self.z_score(target) <= sigmas
    }
}

/// Splits `[start, end)` into equal batches for time averages.
#[derive(Debug, Clone)]
pub struct BatchMeans {
    start: f64,
    width: f64,
    batches: usize,
}

impl BatchMeans {
    pub fn new(start: f64, end: f64, batches: usize) -> Self {
        BatchMeans {
            start,
            width: (end - start) / batches as f64,
            batches,
        }
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    /// Calls `f(batch, duration)` for each batch overlapping `[a, b)`.
    pub fn split(&self, a: f64, b: f64, mut f: impl FnMut(usize, f64)) {
        let end = self.start + self.width * self.batches as f64;
        let (a, b) = (a.max(self.start), b.min(end));
        if b <= a {
            return;
        }
        let mut t = a;
        while t < b {
            let batch = (((t - self.start) / self.width) as usize).min(self.batches - 1);
            let batch_end = (self.start + (batch + 1) as f64 * self.width).min(b);
            let stop = if batch + 1 == self.batches { b } else { batch_end };
            if stop > t {
                f(batch, stop - t);
            }
            if stop <= t {
                break;
            }
            t = stop;
        }
    }

    /// Batch containing the instant `t`, if it is inside the window.
    pub fn batch_of(&self, t: f64) -> Option<usize> {
        if t < self.start {
            return None;
        }
        let batch = ((t - self.start) / self.width) as usize;
        (batch < self.batches).then_some(batch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..100).map(|k| ((k * 37) % 11) as f64 * 0.5).collect();
        let mut all = Welford::new();
        xs.iter().for_each(|x| all.push(*x));
        let mut a = Welford::new();
        let mut b = Welford::new();
        xs[..40].iter().for_each(|x| a.push(*x));
        xs[40..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_eq!(a.count(), 100);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-12);
    }

    #[test]
    fn streams_differ_and_repeat() {
        let x: f64 = stream_rng(7, 0).random();
        let y: f64 = stream_rng(7, 1).random();
        assert_ne!(x, y);
        assert_eq!(x, stream_rng(7, 0).random::<f64>());
    }

    #[test]
    fn batches_cover_interval() {
        let bm = BatchMeans::new(1.0, 5.0, 4);
        let mut got = vec![0.0; 4];
        bm.split(0.0, 3.5, |b, d| got[b] += d);
        assert_eq!(got, vec![1.0, 1.0, 0.5, 0.0]);
        assert_eq!(bm.batch_of(4.99), Some(3));
        assert_eq!(bm.batch_of(5.0), None);
    }
}
