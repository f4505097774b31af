//! Deterministic quasi-random sampling of chart x fiber points.
//!
//! All randomness in the crate funnels through seeded Halton sequences so
//! that a fixed seed reproduces runs byte for byte.

use serde::{Deserialize, Serialize};

const PRIMES: [u64; 10] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29];

/// Radical-inverse (van der Corput) value of `index` in the given base.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplePlan {
    pub count: usize,
    pub seed: u64,
    pub fiber_floor: f64,
}

impl Default for SamplePlan {
    fn default() -> SamplePlan {
        SamplePlan {
            count: 20,
            seed: 1,
            fiber_floor: crate::jets::DEFAULT_FIBER_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ChartBox {
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.lo.len()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }
}

/// Seeded Halton points strictly inside the chart box (5% inset per side)
/// paired with fiber vectors of norm in [0.5, 1.5].
pub fn sample_points(chart: &ChartBox, plan: &SamplePlan) -> Vec<(Vec<f64>, Vec<f64>)> {
    let n = chart.dim();
    let offset = plan.seed.wrapping_mul(7919).wrapping_add(31);
    let mut out = Vec::with_capacity(plan.count);
    let mut index = offset;
    while out.len() < plan.count {
        index += 1;
        let x: Vec<f64> = (0..n)
            .map(|d| {
                let u = halton(index, PRIMES[d]);
                chart.lo[d] + (0.05 + 0.9 * u) * (chart.hi[d] - chart.lo[d])
            })
            .collect();
        let dir: Vec<f64> = (0..n)
            .map(|d| 2.0 * halton(index, PRIMES[n + d]) - 1.0)
            .collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 0.2 {
            continue;
        }
        let scale = 0.5 + halton(index, PRIMES[2 * n]);
        let y: Vec<f64> = dir.iter().map(|v| v / norm * scale).collect();
        out.push((x, y));
    }
    out
}

/// One extra deterministic direction per sample, used as flag/transport
/// companion vectors.
pub fn companion_vector(n: usize, seed: u64, sample: usize) -> Vec<f64> {
    let index = seed
        .wrapping_mul(7919)
        .wrapping_add(977)
        .wrapping_add(sample as u64);
    let v: Vec<f64> = (0..n)
        .map(|d| 2.0 * halton(index, PRIMES[(2 * n + 1 + d) % PRIMES.len()]) - 1.0)
        .collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-6);
    v.into_iter().map(|x| x / norm).collect()
}
