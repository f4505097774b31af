//! Small dense tensor containers for chart-pointwise values, plus a
//! Taylor-valued tensor used internally by the derivative pipeline.

use crate::taylor::Taylor;

#[derive(Debug, Clone)]
pub struct Tensor2 {
    pub n: usize,
    pub data: Vec<f64>,
    pub symmetric: bool,
    pub name: &'static str,
}

impl Tensor2 {
    pub fn from_fn(n: usize, name: &'static str, mut f: impl FnMut(usize, usize) -> f64) -> Tensor2 {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        let symmetric = (0..n)
            .all(|i| (0..n).all(|j| (data[i * n + j] - data[j * n + i]).abs() < 1e-12));
        Tensor2 {
            n,
            data,
            symmetric,
            name,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct Tensor3 {
    pub n: usize,
    pub data: Vec<f64>,
    pub totally_symmetric: bool,
    pub name: &'static str,
}

impl Tensor3 {
    pub fn from_fn(
        n: usize,
        name: &'static str,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Tensor3 {
        let mut data = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    data[(i * n + j) * n + k] = f(i, j, k);
                }
            }
        }
        let mut t = Tensor3 {
            n,
            data,
            totally_symmetric: false,
            name,
        };
        t.totally_symmetric = t.symmetry_defect() < 1e-12;
        t
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[(i * self.n + j) * self.n + k]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max deviation from total symmetry over all index permutations.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.get(i, j, k);
                    for w in [
                        self.get(i, k, j),
                        self.get(j, i, k),
                        self.get(j, k, i),
                        self.get(k, i, j),
                        self.get(k, j, i),
                    ] {
                        worst = worst.max((v - w).abs());
                    }
                }
            }
        }
        worst
    }

    /// Max-abs of the contraction with y in the last slot.
    pub fn y_contraction_defect(&self, y: &[f64]) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|k| self.get(i, j, k) * y[k]).sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }
}

#[derive(Debug, Clone)]
pub struct Tensor4 {
    pub n: usize,
    pub data: Vec<f64>,
    pub name: &'static str,
}

impl Tensor4 {
    pub fn from_fn(
        n: usize,
        name: &'static str,
        mut f: impl FnMut(usize, usize, usize, usize) -> f64,
    ) -> Tensor4 {
        let mut data = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        data[((i * n + j) * n + k) * n + l] = f(i, j, k, l);
                    }
                }
            }
        }
        Tensor4 { n, data, name }
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[((i * self.n + j) * self.n + k) * self.n + l]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone)]
pub struct MeanVector {
    pub n: usize,
    pub data: Vec<f64>,
    pub name: &'static str,
}

impl MeanVector {
    pub fn get(&self, i: usize) -> f64 {
        self.data[i]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, v: &[f64]) -> f64 {
        self.data.iter().zip(v).map(|(a, b)| a * b).sum()
    }
}

/// Dense tensor of arbitrary rank; the value-level counterpart of
/// [`TaylorTensor`], used for covariant-derivative outputs.
#[derive(Debug, Clone)]
pub struct DenseTensor {
    pub n: usize,
    pub rank: usize,
    pub data: Vec<f64>,
    pub name: String,
}

impl DenseTensor {
    pub fn get(&self, idx: &[usize]) -> f64 {
        debug_assert_eq!(idx.len(), self.rank);
        self.data[idx.iter().fold(0, |acc, &i| acc * self.n + i)]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Taylor-valued dense tensor (internal pipeline currency).
#[derive(Clone)]
pub(crate) struct TaylorTensor {
    pub n: usize,
    pub rank: usize,
    pub v: Vec<Taylor>,
}

impl TaylorTensor {
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> Taylor) -> TaylorTensor {
        let total = n.pow(rank as u32);
        let mut v = Vec::with_capacity(total);
        let mut idx = vec![0usize; rank];
        for flat in 0..total {
            let mut rem = flat;
            for slot in (0..rank).rev() {
                idx[slot] = rem % n;
                rem /= n;
            }
            v.push(f(&idx));
        }
        TaylorTensor { n, rank, v }
    }

    fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn at(&self, idx: &[usize]) -> &Taylor {
        &self.v[self.flat(idx)]
    }

    pub fn value(&self, idx: &[usize]) -> f64 {
        self.at(idx).value()
    }

    pub fn zeros(
        ctx: &std::sync::Arc<crate::taylor::TaylorCtx>,
        n: usize,
        rank: usize,
        deg: usize,
    ) -> TaylorTensor {
        let zero = Taylor::constant(ctx, 0.0).capped(deg);
        TaylorTensor {
            n,
            rank,
            v: vec![zero; n.pow(rank as u32)],
        }
    }

    pub fn add(&self, o: &TaylorTensor) -> TaylorTensor {
        debug_assert_eq!((self.n, self.rank), (o.n, o.rank));
        TaylorTensor {
            n: self.n,
            rank: self.rank,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, o: &TaylorTensor) -> TaylorTensor {
        debug_assert_eq!((self.n, self.rank), (o.n, o.rank));
        TaylorTensor {
            n: self.n,
            rank: self.rank,
            v: self.v.iter().zip(&o.v).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    /// Entrywise product with a Taylor scalar.
    pub fn scale_t(&self, s: &Taylor) -> TaylorTensor {
        TaylorTensor {
            n: self.n,
            rank: self.rank,
            v: self.v.iter().map(|a| a.mul(s)).collect(),
        }
    }

}
