//! Compensated summation and deterministic parallel reductions.

use rayon::prelude::*;

/// Rows per parallel work unit. Partial sums are always formed over
/// chunks of this fixed length and merged in chunk order, so every
/// reduction yields bit-identical results for any worker-thread count.
pub(crate) const CHUNK_LEN: usize = 8192;

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn merge(&mut self, other: Kahan) {
        self.add(other.sum);
        self.comp += other.comp;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Chunked parallel fold over a slice with a deterministic merge order.
pub(crate) fn chunk_reduce<T, A>(
    items: &[T],
    init: impl Fn() -> A + Sync,
    fold: impl Fn(&mut A, &T) + Sync,
    merge: impl Fn(&mut A, A),
) -> A
where
    T: Sync,
    A: Send,
{
    let partials: Vec<A> = items
        .par_chunks(CHUNK_LEN)
        .map(|chunk| {
            let mut acc = init();
            for item in chunk {
                fold(&mut acc, item);
            }
            acc
        })
        .collect();
    let mut out = init();
    for partial in partials {
        merge(&mut out, partial);
    }
    out
}

/// Running mean and (unnormalized) squared deviation, Welford's update.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub(crate) fn add(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub(crate) fn count(&self) -> u64 {
        self.n
    }

    pub(crate) fn mean(&self) -> f64 {
        self.mean
    }

    pub(crate) fn sample_variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the accumulated mean.
    pub(crate) fn mean_std_error(&self) -> f64 {
        if self.n < 2 {
            f64::INFINITY
        } else {
            (self.sample_variance() / self.n as f64).sqrt()
        }
    }
}
