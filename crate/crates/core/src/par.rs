//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose results are collected in
//! order and reduced sequentially, so parallel and sequential runs produce
//! bit-identical sums.

use serde::{Deserialize, Serialize};

/// Elements per work unit. Fixed so the reduction order never depends on
/// the thread count.
pub const CHUNK: usize = 16;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` degrades to `Sequential` when the `parallel` feature is off.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }
}

/// Map `f` over the chunks of `items`, keeping chunk order.
pub fn map_chunks<I, R, F>(exec: Execution, items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&[I]) -> R + Sync + Send,
{
    match exec.effective() {
        Execution::Sequential => items.chunks(CHUNK).map(f).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                items.par_chunks(CHUNK).map(f).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                items.chunks(CHUNK).map(f).collect()
            }
        }
    }
}

/// Map `f` over every element, keeping order.
pub fn map<I, R, F>(exec: Execution, items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(&I) -> R + Sync + Send,
{
    map_chunks(exec, items, |c| c.iter().map(&f).collect::<Vec<_>>())
        .into_iter()
        .flatten()
        .collect()
}

/// Element-wise `acc += x`.
pub fn add_into(acc: &mut [f64], x: &[f64]) {
    for (a, b) in acc.iter_mut().zip(x) {
        *a += b;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_bitwise() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() / 3.0).collect();
        let sum = |e| -> f64 { map_chunks(e, &xs, |c| c.iter().sum::<f64>()).iter().sum() };
        assert_eq!(sum(Execution::Sequential).to_bits(), sum(Execution::Parallel).to_bits());
        assert_eq!(map(Execution::Parallel, &xs, |x| x * 2.0)[999], xs[999] * 2.0);
    }
}
