//! Causal (online) discrete convolution for Volterra recursions.
//!
//! A recursion `x_k = step(k, sum_{j<k} f_{k-j} x_j)` normally costs O(n^2).
//! Splitting `[0, n)` recursively and pushing the left half's contribution into
//! the right half with one FFT product per node brings this to O(n log^2 n).

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;

const BASE: usize = 32;

/// `conv[link][k] += sum_j kernel[kernel_id][k - j] * lanes[source][j]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Link {
    pub kernel: usize,
    pub source: usize,
}

pub(crate) struct Causal<'a> {
    n: usize,
    padded: usize,
    kernels: &'a [Vec<Complex64>],
    links: &'a [Link],
    conv: Vec<Vec<Complex64>>,
    planner: FftPlanner<f64>,
    plans: HashMap<(usize, bool), Arc<dyn Fft<f64>>>,
    spectra: HashMap<(usize, usize), Vec<Complex64>>,
}

impl<'a> Causal<'a> {
    /// Every kernel must hold at least `n.next_power_of_two()` samples.
    pub fn new(n: usize, kernels: &'a [Vec<Complex64>], links: &'a [Link]) -> Self {
        let padded = n.next_power_of_two().max(BASE);
        assert!(kernels.iter().all(|k| k.len() >= padded), "kernel shorter than padded length");
        Self {
            n,
            padded,
            kernels,
            links,
            conv: vec![vec![Complex64::new(0.0, 0.0); n]; links.len()],
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            spectra: HashMap::new(),
        }
    }

    pub fn padded_len(n: usize) -> usize {
        n.next_power_of_two().max(BASE)
    }

    /// Runs `step(k, conv_k, lanes)` for `k = 0..n` in order; `step` must fill
    /// `lanes[*][k]` for every lane it owns.
    pub fn run<F>(mut self, lanes: &mut [Vec<Complex64>], mut step: F) -> Result<()>
    where
        F: FnMut(usize, &[Complex64], &mut [Vec<Complex64>]) -> Result<()>,
    {
        let mut scratch = vec![Complex64::new(0.0, 0.0); self.links.len()];
        self.solve(0, self.padded, lanes, &mut step, &mut scratch)
    }

    fn plan(&mut self, size: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
        let planner = &mut self.planner;
        self.plans
            .entry((size, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(size)
                } else {
                    planner.plan_fft_forward(size)
                }
            })
            .clone()
    }

    fn kernel_spectrum(&mut self, id: usize, size: usize) -> Vec<Complex64> {
        if let Some(s) = self.spectra.get(&(id, size)) {
            return s.clone();
        }
        let mut buf = self.kernels[id][..size].to_vec();
        self.plan(size, false).process(&mut buf);
        // only sizes that recur often are worth keeping
        if self.padded / size >= 4 {
            self.spectra.insert((id, size), buf.clone());
        }
        buf
    }

    fn solve<F>(
        &mut self,
        l: usize,
        r: usize,
        lanes: &mut [Vec<Complex64>],
        step: &mut F,
        scratch: &mut [Complex64],
    ) -> Result<()>
    where
        F: FnMut(usize, &[Complex64], &mut [Vec<Complex64>]) -> Result<()>,
    {
        if l >= self.n {
            return Ok(());
        }
        if r - l <= BASE {
            let (links, kernels) = (self.links, self.kernels);
            for k in l..r.min(self.n) {
                for (c, link) in links.iter().enumerate() {
                    let ker = &kernels[link.kernel];
                    let src = &lanes[link.source];
                    let mut acc = self.conv[c][k];
                    for j in l..k {
                        acc += ker[k - j] * src[j];
                    }
                    self.conv[c][k] = acc;
                    scratch[c] = acc;
                }
                step(k, scratch, lanes)?;
            }
            return Ok(());
        }
        let mid = (l + r) / 2;
        self.solve(l, mid, lanes, step, scratch)?;
        if mid < self.n {
            self.push_block(l, mid, r, lanes);
        }
        self.solve(mid, r, lanes, step, scratch)
    }

    // contribution of lanes[..][l..mid] to conv[..][mid..r]
    fn push_block(&mut self, l: usize, mid: usize, r: usize, lanes: &[Vec<Complex64>]) {
        let half = mid - l;
        let size = r - l;
        let forward = self.plan(size, false);
        let inverse = self.plan(size, true);
        let scale = 1.0 / size as f64;
        let mut sources: HashMap<usize, Vec<Complex64>> = HashMap::new();
        for link in self.links {
            sources.entry(link.source).or_insert_with(|| {
                let mut buf = vec![Complex64::new(0.0, 0.0); size];
                buf[..half].copy_from_slice(&lanes[link.source][l..mid]);
                forward.process(&mut buf);
                buf
            });
        }
        let links = self.links;
        for (c, link) in links.iter().enumerate() {
            let spectrum = self.kernel_spectrum(link.kernel, size);
            let src = &sources[&link.source];
            let mut prod: Vec<Complex64> = src.iter().zip(&spectrum).map(|(a, b)| a * b).collect();
            inverse.process(&mut prod);
            let end = r.min(self.n);
            let target = &mut self.conv[c];
            for k in mid..end {
                target[k] += prod[k - l] * scale;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(kernel: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        (0..x.len())
            .map(|k| (0..k).map(|j| kernel[k - j] * x[j]).sum())
            .collect()
    }

    #[test]
    fn matches_naive_convolution() {
        for &n in &[1usize, 5, 33, 100, 517, 1024] {
            let p = Causal::padded_len(n);
            let kernel: Vec<Complex64> = (0..p)
                .map(|d| Complex64::new(1.0 / (1.0 + d as f64), (d as f64 * 0.3).sin()))
                .collect();
            let links = [Link { kernel: 0, source: 0 }];
            let kernels = vec![kernel.clone()];
            let mut lanes = vec![vec![Complex64::new(0.0, 0.0); n]];
            let mut seen = vec![Complex64::new(0.0, 0.0); n];
            Causal::new(n, &kernels, &links)
                .run(&mut lanes, |k, conv, lanes| {
                    seen[k] = conv[0];
                    // x depends on its own history
                    lanes[0][k] = Complex64::new((k as f64).cos(), 0.1) + conv[0] * 0.01;
                    Ok(())
                })
                .unwrap();
            let expected = naive(&kernel, &lanes[0]);
            for k in 0..n {
                assert!((seen[k] - expected[k]).norm() < 1e-10 * (1.0 + expected[k].norm()), "n={n} k={k}");
            }
        }
    }
}
