//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Taylor`] value is a polynomial `sum c_a u^a` in `nvars` infinitesimal
//! displacements, truncated at a total degree bound. Propagating these values
//! through a smooth expression yields exact mixed partial derivatives at the
//! expansion point: `d^a f = a! * c_a`.
//!
//! Every value carries a validity degree. Arithmetic tracks it so that a
//! polynomial derivative (which consumes one order) still reports how many
//! orders of the result are trustworthy.

use once_cell::sync::Lazy;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

/// Shared tables for one (nvars, max_deg) configuration.
pub struct TaylorCtx {
    pub nvars: usize,
    pub max_deg: usize,
    /// Monomial exponent vectors in graded order (by total degree, then lex).
    exps: Vec<Vec<u8>>,
    /// `deg_start[d]` is the index of the first monomial of total degree d;
    /// `deg_start[max_deg + 1]` is the total monomial count.
    deg_start: Vec<usize>,
    index: HashMap<Vec<u8>, usize>,
    /// Flattened product table: `prod[i * m + j]` is the index of the monomial
    /// `exps[i] + exps[j]` (only consulted when the degrees fit).
    prod: Vec<u32>,
    /// `a!` per monomial, for derivative extraction.
    factorial: Vec<f64>,
}

static CTX_CACHE: Lazy<Mutex<HashMap<(usize, usize), Arc<TaylorCtx>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn gen_monomials(nvars: usize, deg: usize, out: &mut Vec<Vec<u8>>) {
    // All exponent vectors of exact total degree `deg`, lexicographic in the
    // first variable descending.
    fn rec(rem: usize, pos: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if pos == cur.len() - 1 {
            cur[pos] = rem as u8;
            out.push(cur.clone());
            return;
        }
        for k in (0..=rem).rev() {
            cur[pos] = k as u8;
            rec(rem - k, pos + 1, cur, out);
        }
    }
    if nvars == 0 {
        if deg == 0 {
            out.push(Vec::new());
        }
        return;
    }
    let mut cur = vec![0u8; nvars];
    rec(deg, 0, &mut cur, out);
}

impl TaylorCtx {
    pub fn get(nvars: usize, max_deg: usize) -> Arc<TaylorCtx> {
        let mut cache = CTX_CACHE.lock().unwrap();
        cache
            .entry((nvars, max_deg))
            .or_insert_with(|| Arc::new(TaylorCtx::build(nvars, max_deg)))
            .clone()
    }

    fn build(nvars: usize, max_deg: usize) -> TaylorCtx {
        let mut exps = Vec::new();
        let mut deg_start = Vec::with_capacity(max_deg + 2);
        for d in 0..=max_deg {
            deg_start.push(exps.len());
            gen_monomials(nvars, d, &mut exps);
        }
        deg_start.push(exps.len());
        let m = exps.len();
        let mut index = HashMap::with_capacity(m);
        for (i, e) in exps.iter().enumerate() {
            index.insert(e.clone(), i);
        }
        let mut prod = vec![u32::MAX; m * m];
        for i in 0..m {
            let di: usize = exps[i].iter().map(|&e| e as usize).sum();
            for j in 0..m {
                let dj: usize = exps[j].iter().map(|&e| e as usize).sum();
                if di + dj > max_deg {
                    continue;
                }
                let sum: Vec<u8> = exps[i]
                    .iter()
                    .zip(exps[j].iter())
                    .map(|(a, b)| a + b)
                    .collect();
                prod[i * m + j] = index[&sum] as u32;
            }
        }
        let factorial = exps
            .iter()
            .map(|e| {
                e.iter()
                    .map(|&k| (1..=k as u64).product::<u64>() as f64)
                    .product::<f64>()
            })
            .collect();
        TaylorCtx {
            nvars,
            max_deg,
            exps,
            deg_start,
            index,
            prod,
            factorial,
        }
    }

    pub fn len_at(&self, deg: usize) -> usize {
        self.deg_start[deg.min(self.max_deg) + 1]
    }

    pub fn monomial_index(&self, exps: &[u8]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    pub fn exponents(&self, idx: usize) -> &[u8] {
        &self.exps[idx]
    }
}

/// Truncated Taylor expansion of a smooth function at a point.
#[derive(Clone)]
pub struct Taylor {
    pub ctx: Arc<TaylorCtx>,
    /// Orders 0..=deg of the coefficients are trustworthy.
    pub deg: usize,
    c: Vec<f64>,
}

impl Taylor {
    pub fn constant(ctx: &Arc<TaylorCtx>, v: f64) -> Taylor {
        let mut c = vec![0.0; ctx.len_at(ctx.max_deg)];
        c[0] = v;
        Taylor {
            ctx: ctx.clone(),
            deg: ctx.max_deg,
            c,
        }
    }

    /// Seeds variable `var` at base value `v`: the expansion `v + u_var`.
    pub fn variable(ctx: &Arc<TaylorCtx>, var: usize, v: f64) -> Taylor {
        assert!(var < ctx.nvars);
        let mut t = Taylor::constant(ctx, v);
        let mut e = vec![0u8; ctx.nvars];
        e[var] = 1;
        let idx = ctx.index[&e];
        t.c[idx] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Raw polynomial coefficient for the given exponent vector, or 0 if
    /// outside the stored range.
    pub fn coeff(&self, exps: &[u8]) -> f64 {
        match self.ctx.monomial_index(exps) {
            Some(i) if i < self.ctx.len_at(self.deg) => self.c[i],
            _ => 0.0,
        }
    }

    /// Mixed partial derivative value `d^a f` for the exponent vector `a`.
    pub fn deriv_value(&self, exps: &[u8]) -> f64 {
        match self.ctx.monomial_index(exps) {
            Some(i) if i < self.ctx.len_at(self.deg) => self.c[i] * self.ctx.factorial[i],
            _ => 0.0,
        }
    }

    /// Caps the validity degree (cheap truncation).
    pub fn capped(&self, deg: usize) -> Taylor {
        if deg >= self.deg {
            return self.clone();
        }
        let len = self.ctx.len_at(deg);
        Taylor {
            ctx: self.ctx.clone(),
            deg,
            c: self.c[..len].to_vec(),
        }
    }

    /// Polynomial derivative with respect to variable `var`; validity drops
    /// by one order.
    pub fn deriv(&self, var: usize) -> Taylor {
        assert!(var < self.ctx.nvars);
        let new_deg = self.deg.saturating_sub(1);
        let mut out = vec![0.0; self.ctx.len_at(new_deg)];
        let len = self.ctx.len_at(self.deg);
        for i in 0..len {
            let e = &self.ctx.exps[i];
            if e[var] == 0 || self.c[i] == 0.0 {
                continue;
            }
            let mut red = e.clone();
            red[var] -= 1;
            let j = self.ctx.index[&red];
            out[j] += self.c[i] * e[var] as f64;
        }
        Taylor {
            ctx: self.ctx.clone(),
            deg: new_deg,
            c: out,
        }
    }

    pub fn add(&self, o: &Taylor) -> Taylor {
        let deg = self.deg.min(o.deg);
        let len = self.ctx.len_at(deg);
        let mut c = self.c[..len].to_vec();
        for i in 0..len {
            c[i] += o.c[i];
        }
        Taylor {
            ctx: self.ctx.clone(),
            deg,
            c,
        }
    }

    pub fn sub(&self, o: &Taylor) -> Taylor {
        let deg = self.deg.min(o.deg);
        let len = self.ctx.len_at(deg);
        let mut c = self.c[..len].to_vec();
        for i in 0..len {
            c[i] -= o.c[i];
        }
        Taylor {
            ctx: self.ctx.clone(),
            deg,
            c,
        }
    }

    pub fn neg(&self) -> Taylor {
        self.scale(-1.0)
    }

    pub fn scale(&self, s: f64) -> Taylor {
        let mut c = self.c.clone();
        for v in c.iter_mut() {
            *v *= s;
        }
        Taylor {
            ctx: self.ctx.clone(),
            deg: self.deg,
            c,
        }
    }

    pub fn add_scalar(&self, s: f64) -> Taylor {
        let mut t = self.clone();
        t.c[0] += s;
        t
    }

    pub fn mul(&self, o: &Taylor) -> Taylor {
        let ctx = &self.ctx;
        let deg = self.deg.min(o.deg);
        let m = ctx.len_at(ctx.max_deg);
        let mut out = vec![0.0; ctx.len_at(deg)];
        for d_a in 0..=deg {
            let (a0, a1) = (ctx.deg_start[d_a], ctx.deg_start[d_a + 1]);
            let d_b_max = deg - d_a;
            let b1 = ctx.deg_start[d_b_max + 1];
            for i in a0..a1 {
                let ca = self.c[i];
                if ca == 0.0 {
                    continue;
                }
                let row = i * m;
                for j in 0..b1 {
                    let cb = o.c[j];
                    if cb == 0.0 {
                        continue;
                    }
                    out[ctx.prod[row + j] as usize] += ca * cb;
                }
            }
        }
        Taylor {
            ctx: ctx.clone(),
            deg,
            c: out,
        }
    }

    /// Composition with a smooth univariate function, given its derivatives
    /// `f^(k)(v0)` for `k = 0..=deg` at the value of `self`.
    pub fn compose(&self, derivs: &[f64]) -> Taylor {
        let deg = self.deg.min(derivs.len().saturating_sub(1));
        let u = self.capped(deg).add_scalar(-self.value());
        let mut fact = 1.0;
        let mut coeffs = Vec::with_capacity(deg + 1);
        for (k, d) in derivs.iter().take(deg + 1).enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            coeffs.push(d / fact);
        }
        let mut res = Taylor::constant(&self.ctx, coeffs[deg]).capped(deg);
        for k in (0..deg).rev() {
            res = res.mul(&u).add_scalar(coeffs[k]);
        }
        res
    }

    pub fn recip(&self) -> Taylor {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.deg + 1);
        let mut d = 1.0 / v;
        derivs.push(d);
        for k in 1..=self.deg {
            d *= -(k as f64) / v;
            derivs.push(d);
        }
        self.compose(&derivs)
    }

    pub fn div(&self, o: &Taylor) -> Taylor {
        self.mul(&o.recip())
    }

    pub fn sqrt(&self) -> Taylor {
        let v = self.value();
        let r = v.sqrt();
        let mut derivs = Vec::with_capacity(self.deg + 1);
        derivs.push(r);
        // d^k sqrt(v) = (1/2)(1/2 - 1)...(1/2 - k + 1) v^(1/2 - k)
        let mut d = r;
        for k in 1..=self.deg {
            d *= (0.5 - (k as f64 - 1.0)) / v;
            derivs.push(d);
        }
        self.compose(&derivs)
    }

    pub fn exp(&self) -> Taylor {
        let e = self.value().exp();
        let derivs = vec![e; self.deg + 1];
        self.compose(&derivs)
    }

    pub fn sin(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.deg).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Taylor {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.deg).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn powi(&self, mut k: u32) -> Taylor {
        let mut acc = Taylor::constant(&self.ctx, 1.0).capped(self.deg);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}
