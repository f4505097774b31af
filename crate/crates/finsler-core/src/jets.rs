//! Jet evaluation of smooth scalar fields on chart x fiber.
//!
//! [`eval_jet`] propagates truncated Taylor values through the field
//! expression and reads off exact mixed partials. [`fd_reference_jet`] is the
//! independent oracle: central-difference product stencils with optional
//! Richardson extrapolation, never touching the Taylor path.

use crate::error::{FinslerError, Result};
use crate::taylor::{Taylor, TaylorCtx};
use std::collections::BTreeMap;

pub const DEFAULT_FIBER_FLOOR: f64 = 1e-3;

/// Base point in a coordinate chart.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    pub x: Vec<f64>,
}

impl ChartPoint {
    pub fn new(x: Vec<f64>) -> Result<ChartPoint> {
        if x.len() < 2 {
            return Err(FinslerError::Dimension {
                expected: 2,
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(FinslerError::NonFinite {
                context: "chart point".into(),
            });
        }
        Ok(ChartPoint { x })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// Tangent vector; kept away from the singular cone y = 0 by a norm floor.
#[derive(Debug, Clone, PartialEq)]
pub struct FiberVector {
    pub y: Vec<f64>,
    pub floor: f64,
}

impl FiberVector {
    pub fn new(y: Vec<f64>) -> Result<FiberVector> {
        FiberVector::with_floor(y, DEFAULT_FIBER_FLOOR)
    }

    pub fn with_floor(y: Vec<f64>, floor: f64) -> Result<FiberVector> {
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(FinslerError::NonFinite {
                context: "fiber vector".into(),
            });
        }
        if norm < floor {
            return Err(FinslerError::FiberFloor { norm, floor });
        }
        Ok(FiberVector { y, floor })
    }

    pub fn norm(&self) -> f64 {
        self.y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A smooth scalar field f(x, y) that can be evaluated on Taylor values.
pub trait ScalarField: Sync {
    fn dim(&self) -> usize;

    fn eval_taylor(&self, x: &[Taylor], y: &[Taylor]) -> Taylor;

    /// Exact fields support the Taylor path; black-box callables do not and
    /// are differentiated by finite differences instead.
    fn is_exact(&self) -> bool {
        true
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let ctx = TaylorCtx::get(2 * self.dim(), 0);
        let xt: Vec<Taylor> = x.iter().map(|&v| Taylor::constant(&ctx, v)).collect();
        let yt: Vec<Taylor> = y.iter().map(|&v| Taylor::constant(&ctx, v)).collect();
        self.eval_taylor(&xt, &yt).value()
    }
}

/// Field given as a composable Taylor expression (closure over Taylor ops).
pub struct ExprField<F: Fn(&[Taylor], &[Taylor]) -> Taylor + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[Taylor], &[Taylor]) -> Taylor + Sync> ScalarField for ExprField<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_taylor(&self, x: &[Taylor], y: &[Taylor]) -> Taylor {
        (self.f)(x, y)
    }
}

/// Black-box callable; only pointwise values are available.
pub struct PointwiseField<F: Fn(&[f64], &[f64]) -> f64 + Sync> {
    pub n: usize,
    pub f: F,
}

impl<F: Fn(&[f64], &[f64]) -> f64 + Sync> ScalarField for PointwiseField<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn eval_taylor(&self, _x: &[Taylor], _y: &[Taylor]) -> Taylor {
        unreachable!("pointwise fields have no Taylor path")
    }
    fn is_exact(&self) -> bool {
        false
    }
    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        (self.f)(x, y)
    }
}

pub const MAX_X_ORDER: usize = 2;
pub const MAX_Y_ORDER: usize = 4;
pub const MAX_TOTAL_ORDER: usize = 5;

/// Mixed partial derivatives of a scalar field at one (x, y) point, keyed by
/// exponent multi-indices (alpha over x, beta over y).
#[derive(Debug, Clone)]
pub struct JetTable {
    pub n: usize,
    pub max_x_order: usize,
    pub max_y_order: usize,
    /// True when the values came from the finite-difference fallback.
    pub approximate: bool,
    values: BTreeMap<(Vec<u8>, Vec<u8>), f64>,
}

impl JetTable {
    /// Derivative value for index lists, e.g. `get(&[0], &[1, 1, 1])` is
    /// d^4 f / dx^0 dy^1 dy^1 dy^1. Order within a list is irrelevant.
    pub fn get(&self, x_idx: &[usize], y_idx: &[usize]) -> f64 {
        let key = (idx_to_exps(self.n, x_idx), idx_to_exps(self.n, y_idx));
        *self.values.get(&key).unwrap_or(&0.0)
    }

    pub fn value(&self) -> f64 {
        self.get(&[], &[])
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(Vec<u8>, Vec<u8>), &f64)> {
        self.values.iter()
    }

    /// Max |a - b| per entry, normalized by the largest magnitude among
    /// entries of the same total order (floored at 1).
    pub fn max_rel_diff(&self, other: &JetTable) -> f64 {
        let order = |k: &(Vec<u8>, Vec<u8>)| -> usize {
            k.0.iter().map(|&e| e as usize).sum::<usize>()
                + k.1.iter().map(|&e| e as usize).sum::<usize>()
        };
        let mut scale: BTreeMap<usize, f64> = BTreeMap::new();
        for (k, v) in &self.values {
            let s = scale.entry(order(k)).or_insert(1.0);
            *s = s.max(v.abs());
        }
        let mut worst: f64 = 0.0;
        for (k, v) in &self.values {
            let w = other.values.get(k).copied().unwrap_or(0.0);
            worst = worst.max((v - w).abs() / scale[&order(k)]);
        }
        worst
    }
}

fn idx_to_exps(n: usize, idx: &[usize]) -> Vec<u8> {
    let mut e = vec![0u8; n];
    for &i in idx {
        e[i] += 1;
    }
    e
}

fn check_orders(max_x: usize, max_y: usize) -> Result<()> {
    if max_x > MAX_X_ORDER || max_y > MAX_Y_ORDER {
        return Err(FinslerError::OrderOverflow {
            x_order: max_x,
            y_order: max_y,
        });
    }
    Ok(())
}

/// All exponent vectors over n slots with total degree <= max.
fn exps_up_to(n: usize, max: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![0u8; n]];
    for _ in 0..max {
        let mut next: Vec<Vec<u8>> = Vec::new();
        for e in &out {
            for i in 0..n {
                let mut f = e.clone();
                f[i] += 1;
                next.push(f);
            }
        }
        next.sort();
        next.dedup();
        out.extend(next.into_iter());
    }
    out.sort();
    out.dedup();
    out
}

/// Exact mixed partial derivatives through the truncated-Taylor path.
pub fn eval_jet(
    f: &dyn ScalarField,
    p: &ChartPoint,
    y: &FiberVector,
    max_x: usize,
    max_y: usize,
) -> Result<JetTable> {
    check_orders(max_x, max_y)?;
    let n = p.dim();
    if y.y.len() != n || f.dim() != n {
        return Err(FinslerError::Dimension {
            expected: n,
            got: y.y.len(),
        });
    }
    if !f.is_exact() {
        let mut t = fd_reference_jet(f, p, y, max_x, max_y, &StepPolicy::default())?;
        t.approximate = true;
        return Ok(t);
    }
    let total = (max_x + max_y).min(MAX_TOTAL_ORDER);
    let ctx = TaylorCtx::get(2 * n, total);
    let xt: Vec<Taylor> = (0..n)
        .map(|i| Taylor::variable(&ctx, i, p.x[i]))
        .collect();
    let yt: Vec<Taylor> = (0..n)
        .map(|i| Taylor::variable(&ctx, n + i, y.y[i]))
        .collect();
    let val = f.eval_taylor(&xt, &yt);
    if !val.is_finite() {
        return Err(FinslerError::NonFinite {
            context: "jet evaluation".into(),
        });
    }
    let mut values = BTreeMap::new();
    for a in exps_up_to(n, max_x) {
        let pa: usize = a.iter().map(|&e| e as usize).sum();
        for b in exps_up_to(n, max_y) {
            let pb: usize = b.iter().map(|&e| e as usize).sum();
            if pa + pb > MAX_TOTAL_ORDER {
                continue;
            }
            let mut full = a.clone();
            full.extend_from_slice(&b);
            values.insert((a.clone(), b), val.deriv_value(&full));
        }
    }
    Ok(JetTable {
        n,
        max_x_order: max_x,
        max_y_order: max_y,
        approximate: false,
        values,
    })
}

/// Multilinear contraction of the stored symmetric derivative tensors with
/// the given direction vectors.
pub fn contract_jet(t: &JetTable, x_dirs: &[Vec<f64>], y_dirs: &[Vec<f64>]) -> Result<f64> {
    if x_dirs.len() > t.max_x_order || y_dirs.len() > t.max_y_order {
        return Err(FinslerError::Invalid(format!(
            "contraction length mismatch: ({}, {}) directions against orders ({}, {})",
            x_dirs.len(),
            y_dirs.len(),
            t.max_x_order,
            t.max_y_order
        )));
    }
    let n = t.n;
    for d in x_dirs.iter().chain(y_dirs.iter()) {
        if d.len() != n {
            return Err(FinslerError::Dimension {
                expected: n,
                got: d.len(),
            });
        }
    }
    let mut total = 0.0;
    let px = x_dirs.len();
    let py = y_dirs.len();
    let combos = n.pow((px + py) as u32);
    for c in 0..combos {
        let mut rem = c;
        let mut xi = vec![0usize; px];
        let mut yi = vec![0usize; py];
        let mut w = 1.0;
        for (slot, dir) in x_dirs.iter().enumerate() {
            let i = rem % n;
            rem /= n;
            xi[slot] = i;
            w *= dir[i];
        }
        for (slot, dir) in y_dirs.iter().enumerate() {
            let i = rem % n;
            rem /= n;
            yi[slot] = i;
            w *= dir[i];
        }
        if w != 0.0 {
            total += w * t.get(&xi, &yi);
        }
    }
    Ok(total)
}

/// Finite-difference step policy.
///
/// With `base_step = None` the step adapts to the derivative order p as
/// `eps^(1/(p+4)) * max(1, |y|)`: high-order central stencils need wide steps
/// or cancellation noise dominates. An explicit `base_step` is applied to all
/// orders unchanged.
#[derive(Debug, Clone)]
pub struct StepPolicy {
    pub base_step: Option<f64>,
    pub richardson_levels: usize,
}

impl Default for StepPolicy {
    fn default() -> StepPolicy {
        StepPolicy {
            base_step: None,
            richardson_levels: 1,
        }
    }
}

impl StepPolicy {
    fn step(&self, total_order: usize, y_scale: f64) -> f64 {
        match self.base_step {
            Some(h) => h,
            None => f64::EPSILON.powf(1.0 / (total_order as f64 + 4.0)) * y_scale.max(1.0),
        }
    }
}

/// Central-difference stencil (offset, weight) pairs for the k-th derivative,
/// second-order accurate, to be scaled by 1/h^k.
fn stencil(k: usize) -> &'static [(i32, f64)] {
    match k {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        4 => &[(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)],
        _ => panic!("stencil order > 4"),
    }
}

fn fd_entry(
    f: &dyn ScalarField,
    x0: &[f64],
    y0: &[f64],
    a: &[u8],
    b: &[u8],
    h: f64,
) -> Result<f64> {
    let n = x0.len();
    // Tensor-product stencil over all variables with nonzero order.
    let mut active: Vec<(usize, &[(i32, f64)])> = Vec::new();
    for i in 0..n {
        if a[i] > 0 {
            active.push((i, stencil(a[i] as usize)));
        }
    }
    for i in 0..n {
        if b[i] > 0 {
            active.push((n + i, stencil(b[i] as usize)));
        }
    }
    let total: usize = a.iter().chain(b.iter()).map(|&e| e as usize).sum();
    let mut sum = 0.0;
    let mut counters = vec![0usize; active.len()];
    loop {
        let mut w = 1.0;
        let mut x = x0.to_vec();
        let mut y = y0.to_vec();
        for (slot, &(var, st)) in active.iter().enumerate() {
            let (off, wt) = st[counters[slot]];
            w *= wt;
            if var < n {
                x[var] += off as f64 * h;
            } else {
                y[var - n] += off as f64 * h;
            }
        }
        let v = f.eval(&x, &y);
        if !v.is_finite() {
            return Err(FinslerError::NonFinite {
                context: "finite-difference sample".into(),
            });
        }
        sum += w * v;
        // odometer
        let mut slot = 0;
        loop {
            if slot == active.len() {
                return Ok(sum / h.powi(total as i32));
            }
            counters[slot] += 1;
            if counters[slot] < active[slot].1.len() {
                break;
            }
            counters[slot] = 0;
            slot += 1;
        }
    }
}

/// Finite-difference reference jet: the oracle against the Taylor path.
pub fn fd_reference_jet(
    f: &dyn ScalarField,
    p: &ChartPoint,
    y: &FiberVector,
    max_x: usize,
    max_y: usize,
    policy: &StepPolicy,
) -> Result<JetTable> {
    check_orders(max_x, max_y)?;
    let n = p.dim();
    let y_norm = y.norm();
    let mut values = BTreeMap::new();
    for a in exps_up_to(n, max_x) {
        let pa: usize = a.iter().map(|&e| e as usize).sum();
        for b in exps_up_to(n, max_y) {
            let pb: usize = b.iter().map(|&e| e as usize).sum();
            let total = pa + pb;
            if total > MAX_TOTAL_ORDER {
                continue;
            }
            let v = if total == 0 {
                f.eval(&p.x, &y.y)
            } else {
                let h = policy.step(total, y_norm);
                // Widest stencil reaches 2h into the fiber.
                if pb > 0 && y_norm - 2.0 * h <= y.floor {
                    return Err(FinslerError::StepUnderflow {
                        step: h,
                        floor: y.floor,
                    });
                }
                let mut est = fd_entry(f, &p.x, &y.y, &a, &b, h)?;
                let mut hk = h;
                for _ in 0..policy.richardson_levels {
                    hk *= 0.5;
                    let fine = fd_entry(f, &p.x, &y.y, &a, &b, hk)?;
                    est = (4.0 * fine - est) / 3.0;
                }
                est
            };
            values.insert((a.clone(), b), v);
        }
    }
    Ok(JetTable {
        n,
        max_x_order: max_x,
        max_y_order: max_y,
        approximate: true,
        values,
    })
}
