//! Monte-Carlo estimates with a deterministic reduction order.
//!
//! Samples are drawn sequentially from the caller's generator, evaluated in
//! parallel, collected in draw order and summed sequentially, so results do not
//! depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::model::FlowModel;
use crate::quadrature::CompensatedSum;

/// Sample mean with its standard error `std / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, stderr: f64::NAN, n };
        }
        let mut s = CompensatedSum::new();
        values.iter().for_each(|&v| s.add(v));
        let mean = s.value() / n as f64;
        if n == 1 {
            return Self { mean, stderr: f64::INFINITY, n };
        }
        let mut q = CompensatedSum::new();
        values.iter().for_each(|&v| q.add((v - mean) * (v - mean)));
        let var = q.value() / (n - 1) as f64;
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }

    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }
}

pub fn sample_points<M: FlowModel, R: Rng + ?Sized>(model: &M, n: usize, rng: &mut R) -> Vec<M::Point> {
    (0..n).map(|_| model.sample(rng)).collect()
}

/// Order-preserving parallel map.
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.par_iter().map(f).collect()
}

/// Order-preserving parallel map that stops at the first error in draw order.
pub fn try_par_map<T, U, E, F>(items: &[T], f: F) -> Result<Vec<U>, E>
where
    T: Sync,
    U: Send,
    E: Send,
    F: Fn(&T) -> Result<U, E> + Sync + Send,
{
    let out: Vec<Result<U, E>> = items.par_iter().map(f).collect();
    out.into_iter().collect()
}
