//! Finsler metric models and the pointwise metric-level tensors:
//! fundamental tensor g, angular metric h, Cartan torsion C, mean Cartan
//! torsion I and Matsumoto torsion M.

use crate::error::{FinslerError, Result};
use crate::jets::{ScalarField, DEFAULT_FIBER_FLOOR};
use crate::sample::{sample_points, ChartBox, SamplePlan};
use crate::taylor::{Taylor, TaylorCtx};
use crate::tensor::{MeanVector, TaylorTensor, Tensor2, Tensor3};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Default Taylor truncation: deep enough for one more derivative layer on
/// top of the Landsberg tensor (curvatures of processed connections).
pub const DEFAULT_DEGREE: usize = 6;

/// Riemannian coefficient field a_ij(x).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AField {
    Identity,
    Constant { matrix: Vec<Vec<f64>> },
    /// Round-sphere chart: diag(1, sin^2 x1) in 2-D,
    /// diag(1, sin^2 x1, sin^2 x1 sin^2 x2) in 3-D.
    SpherePatch,
}

impl AField {
    pub fn eval_taylor(&self, x: &[Taylor]) -> Vec<Vec<Taylor>> {
        let n = x.len();
        let ctx = &x[0].ctx;
        let zero = Taylor::constant(ctx, 0.0);
        let one = Taylor::constant(ctx, 1.0);
        match self {
            AField::Identity => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if i == j { one.clone() } else { zero.clone() })
                        .collect()
                })
                .collect(),
            AField::Constant { matrix } => (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| Taylor::constant(ctx, matrix[i][j]))
                        .collect()
                })
                .collect(),
            AField::SpherePatch => {
                let mut m: Vec<Vec<Taylor>> = (0..n)
                    .map(|_| (0..n).map(|_| zero.clone()).collect())
                    .collect();
                m[0][0] = one;
                let s1 = x[0].sin();
                m[1][1] = s1.mul(&s1);
                if n >= 3 {
                    let s2 = x[1].sin();
                    m[2][2] = m[1][1].mul(&s2.mul(&s2));
                }
                m
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let ctx = TaylorCtx::get(1, 0);
        let xt: Vec<Taylor> = x.iter().map(|&v| Taylor::constant(&ctx, v)).collect();
        // Reuse the Taylor path at degree zero; SpherePatch only reads x[0], x[1].
        self.eval_taylor(&xt)
            .into_iter()
            .map(|row| row.into_iter().map(|t| t.value()).collect())
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, AField::SpherePatch)
    }
}

/// One-form coefficient field b_i(x).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BField {
    Zero,
    Constant { values: Vec<f64> },
    /// b = (amp * sin x2, 0, ...): the standard db != 0 example.
    SinX2 { amp: f64 },
}

impl BField {
    pub fn eval_taylor(&self, x: &[Taylor]) -> Vec<Taylor> {
        let n = x.len();
        let ctx = &x[0].ctx;
        match self {
            BField::Zero => (0..n).map(|_| Taylor::constant(ctx, 0.0)).collect(),
            BField::Constant { values } => {
                values.iter().map(|&v| Taylor::constant(ctx, v)).collect()
            }
            BField::SinX2 { amp } => {
                let mut out: Vec<Taylor> = (0..n).map(|_| Taylor::constant(ctx, 0.0)).collect();
                out[0] = x[1].sin().scale(*amp);
                out
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        !matches!(self, BField::SinX2 { .. })
    }

    pub fn is_zero(&self) -> bool {
        match self {
            BField::Zero => true,
            BField::Constant { values } => values.iter().all(|v| *v == 0.0),
            BField::SinX2 { amp } => *amp == 0.0,
        }
    }
}

/// The (alpha, beta)-profile phi(s).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Phi {
    /// phi(s) = 1 + s (Randers)
    Linear,
    /// phi(s) = (1 + s)^2
    Square,
    /// phi(s) = exp(s)
    Exp,
}

impl Phi {
    /// Derivatives of phi(s)^2 at s0, orders 0..=order.
    fn sq_derivs(&self, s0: f64, order: usize) -> Vec<f64> {
        match self {
            Phi::Linear => {
                // (1+s)^2
                let mut d = vec![0.0; order + 1];
                d[0] = (1.0 + s0) * (1.0 + s0);
                if order >= 1 {
                    d[1] = 2.0 * (1.0 + s0);
                }
                if order >= 2 {
                    d[2] = 2.0;
                }
                d
            }
            Phi::Square => {
                // (1+s)^4
                let mut d = vec![0.0; order + 1];
                let u = 1.0 + s0;
                let mut coeff = 1.0;
                for (k, slot) in d.iter_mut().enumerate() {
                    if k > 4 {
                        break;
                    }
                    *slot = coeff * u.powi(4 - k as i32);
                    coeff *= (4 - k) as f64;
                }
                d
            }
            Phi::Exp => {
                // exp(2s)
                let e = (2.0 * s0).exp();
                (0..=order).map(|k| 2f64.powi(k as i32) * e).collect()
            }
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            Phi::Linear => 1.0 + s,
            Phi::Square => (1.0 + s) * (1.0 + s),
            Phi::Exp => s.exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Riemannian,
    Randers,
    AlphaBeta,
    LocallyMinkowski,
}

/// A Finsler metric on a chart, exposed as a jet provider for F^2.
#[derive(Debug, Clone)]
pub struct MetricModel {
    pub n: usize,
    pub family: Family,
    pub a: AField,
    pub b: BField,
    pub phi: Phi,
    pub b0: f64,
    pub chart_domain: ChartBox,
    pub fiber_floor: f64,
}

impl ScalarField for MetricModel {
    fn dim(&self) -> usize {
        self.n
    }

    fn eval_taylor(&self, x: &[Taylor], y: &[Taylor]) -> Taylor {
        let a = self.a.eval_taylor(x);
        let n = self.n;
        let ctx = &x[0].ctx;
        let mut alpha2 = Taylor::constant(ctx, 0.0);
        for i in 0..n {
            for j in 0..n {
                alpha2 = alpha2.add(&a[i][j].mul(&y[i]).mul(&y[j]));
            }
        }
        match self.family {
            Family::Riemannian => alpha2,
            _ => {
                let b = self.b.eval_taylor(x);
                let mut beta = Taylor::constant(ctx, 0.0);
                for i in 0..n {
                    beta = beta.add(&b[i].mul(&y[i]));
                }
                let alpha = alpha2.sqrt();
                let s = beta.div(&alpha);
                let phi2 = s.compose(&self.phi.sq_derivs(s.value(), s.deg));
                phi2.mul(&alpha2)
            }
        }
    }
}

/// Descriptor for [`build_metric`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpec {
    pub family: Family,
    pub dimension: usize,
    #[serde(default = "default_a")]
    pub a: AField,
    #[serde(default = "default_b")]
    pub b: BField,
    #[serde(default = "default_phi")]
    pub phi: Phi,
    #[serde(default = "default_b0")]
    pub b0: f64,
    pub chart_domain: ChartBox,
    #[serde(default = "default_floor")]
    pub fiber_floor: f64,
}

fn default_a() -> AField {
    AField::Identity
}
fn default_b() -> BField {
    BField::Zero
}
fn default_phi() -> Phi {
    Phi::Linear
}
fn default_b0() -> f64 {
    1.0
}
fn default_floor() -> f64 {
    DEFAULT_FIBER_FLOOR
}

/// Builds and validates a metric model. Validation samples the chart: |b|_a
/// must stay below 1 for Randers, |beta/alpha| below b0 for (alpha, beta)
/// families, and g_y must be positive definite at every validation point.
pub fn build_metric(spec: &MetricSpec) -> Result<MetricModel> {
    let n = spec.dimension;
    if n < 2 {
        return Err(FinslerError::Dimension { expected: 2, got: n });
    }
    if spec.chart_domain.dim() != n {
        return Err(FinslerError::Config(format!(
            "chart domain dimension {} does not match metric dimension {}",
            spec.chart_domain.dim(),
            n
        )));
    }
    let phi = match spec.family {
        Family::Randers => Phi::Linear,
        _ => spec.phi,
    };
    let model = MetricModel {
        n,
        family: spec.family,
        a: spec.a.clone(),
        b: spec.b.clone(),
        phi,
        b0: spec.b0,
        chart_domain: spec.chart_domain.clone(),
        fiber_floor: spec.fiber_floor,
    };
    if spec.family == Family::LocallyMinkowski && !(spec.a.is_constant() && spec.b.is_constant()) {
        return Err(FinslerError::Config(
            "locally_minkowski requires x-independent a and b".into(),
        ));
    }
    validate_model(&model)?;
    Ok(model)
}

fn validate_model(model: &MetricModel) -> Result<()> {
    let plan = SamplePlan {
        count: 25,
        seed: 424242,
        fiber_floor: model.fiber_floor,
    };
    let uses_b = !matches!(model.family, Family::Riemannian);
    for (x, y) in sample_points(&model.chart_domain, &plan) {
        if uses_b {
            let a = model.a.eval(&x);
            let ctx = TaylorCtx::get(1, 0);
            let xt: Vec<Taylor> = x.iter().map(|&v| Taylor::constant(&ctx, v)).collect();
            let b: Vec<f64> = model.b.eval_taylor(&xt).iter().map(|t| t.value()).collect();
            let ainv = invert_real(&a)?;
            let mut nb2 = 0.0;
            for i in 0..model.n {
                for j in 0..model.n {
                    nb2 += ainv[i][j] * b[i] * b[j];
                }
            }
            let norm_b = nb2.max(0.0).sqrt();
            if norm_b >= 1.0 {
                return Err(FinslerError::RandersSlope { norm_b, at: x });
            }
            let mut alpha2 = 0.0;
            let mut beta = 0.0;
            for i in 0..model.n {
                beta += b[i] * y[i];
                for j in 0..model.n {
                    alpha2 += a[i][j] * y[i] * y[j];
                }
            }
            let s = beta / alpha2.sqrt();
            if s.abs() >= model.b0 {
                return Err(FinslerError::B0Exceeded {
                    s: s.abs(),
                    b0: model.b0,
                });
            }
        }
        let pt = ModelPoint::with_degree(model, &x, &y, 2)?;
        pt.check_positive_definite()?;
    }
    Ok(())
}

fn invert_real(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = m.len();
    let dm = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    let inv = dm.try_inverse().ok_or_else(|| FinslerError::Invalid(
        "singular coefficient matrix".into(),
    ))?;
    Ok((0..n)
        .map(|i| (0..n).map(|j| inv[(i, j)]).collect())
        .collect())
}

/// A metric model evaluated at one admissible (x, y): holds the truncated
/// Taylor expansion of F^2 and derives every pointwise tensor from it.
pub struct ModelPoint<'m> {
    pub model: &'m MetricModel,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub ctx: Arc<TaylorCtx>,
    pub f2: Taylor,
}

impl<'m> ModelPoint<'m> {
    pub fn new(model: &'m MetricModel, x: &[f64], y: &[f64]) -> Result<ModelPoint<'m>> {
        ModelPoint::with_degree(model, x, y, DEFAULT_DEGREE)
    }

    pub fn with_degree(
        model: &'m MetricModel,
        x: &[f64],
        y: &[f64],
        degree: usize,
    ) -> Result<ModelPoint<'m>> {
        let n = model.n;
        if x.len() != n || y.len() != n {
            return Err(FinslerError::Dimension {
                expected: n,
                got: x.len().max(y.len()),
            });
        }
        if !model.chart_domain.contains(x) {
            return Err(FinslerError::OutsideChart(x.to_vec()));
        }
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < model.fiber_floor {
            return Err(FinslerError::FiberFloor {
                norm,
                floor: model.fiber_floor,
            });
        }
        let ctx = TaylorCtx::get(2 * n, degree);
        let xt: Vec<Taylor> = (0..n).map(|i| Taylor::variable(&ctx, i, x[i])).collect();
        let yt: Vec<Taylor> = (0..n)
            .map(|i| Taylor::variable(&ctx, n + i, y[i]))
            .collect();
        let f2 = model.eval_taylor(&xt, &yt);
        if !f2.is_finite() {
            return Err(FinslerError::NonFinite {
                context: "F^2 expansion".into(),
            });
        }
        Ok(ModelPoint {
            model,
            x: x.to_vec(),
            y: y.to_vec(),
            ctx,
            f2,
        })
    }

    pub fn n(&self) -> usize {
        self.model.n
    }

    /// Taylor variable for the y^k coordinate function.
    pub(crate) fn y_var(&self, k: usize) -> Taylor {
        Taylor::variable(&self.ctx, self.n() + k, self.y[k])
    }

    pub fn f_value(&self) -> f64 {
        self.f2.value().max(0.0).sqrt()
    }

    pub(crate) fn f_taylor(&self, deg: usize) -> Taylor {
        self.f2.capped(deg).sqrt()
    }

    /// g_ij = (1/2) d^2 F^2 / dy_i dy_j, to the given validity degree.
    pub(crate) fn g_t(&self, deg: usize) -> TaylorTensor {
        let n = self.n();
        TaylorTensor::from_fn(n, 2, |idx| {
            self.f2
                .deriv(n + idx[0])
                .deriv(n + idx[1])
                .scale(0.5)
                .capped(deg)
        })
    }

    pub(crate) fn ginv_t(&self, deg: usize) -> Result<TaylorTensor> {
        invert_taylor_matrix(&self.g_t(deg))
    }

    /// Cartan torsion with all indices down: C_ijk = (1/4) d^3 F^2 / dy^3.
    pub(crate) fn c_lower_t(&self, deg: usize) -> TaylorTensor {
        let n = self.n();
        TaylorTensor::from_fn(n, 3, |idx| {
            self.f2
                .deriv(n + idx[0])
                .deriv(n + idx[1])
                .deriv(n + idx[2])
                .scale(0.25)
                .capped(deg)
        })
    }

    pub fn check_positive_definite(&self) -> Result<f64> {
        let n = self.n();
        let g = self.g_t(0);
        let dm = DMatrix::from_fn(n, n, |i, j| g.value(&[i, j]));
        let sym = (&dm + dm.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(min_eig > 0.0) {
            return Err(FinslerError::Indefinite {
                x: self.x.clone(),
                y: self.y.clone(),
                min_eig,
            });
        }
        Ok(min_eig)
    }
}

/// Gauss-Jordan inverse of a Taylor-valued matrix, pivoting on the value part.
pub(crate) fn invert_taylor_matrix(m: &TaylorTensor) -> Result<TaylorTensor> {
    let n = m.n;
    debug_assert_eq!(m.rank, 2);
    let ctx = &m.v[0].ctx;
    let deg = m.v.iter().map(|t| t.deg).min().unwrap();
    let mut a: Vec<Vec<Taylor>> = (0..n)
        .map(|i| (0..n).map(|j| m.at(&[i, j]).capped(deg)).collect())
        .collect();
    let mut inv: Vec<Vec<Taylor>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Taylor::constant(ctx, if i == j { 1.0 } else { 0.0 }).capped(deg))
                .collect()
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| {
                a[p][col]
                    .value()
                    .abs()
                    .partial_cmp(&a[q][col].value().abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot][col].value().abs() < 1e-300 {
            return Err(FinslerError::Invalid("singular Taylor matrix".into()));
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].recip();
        for j in 0..n {
            a[col][j] = a[col][j].mul(&p);
            inv[col][j] = inv[col][j].mul(&p);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col].clone();
            if f.value() == 0.0 && f.is_finite() {
                // still may have higher-order parts; keep the elimination
            }
            for j in 0..n {
                a[row][j] = a[row][j].sub(&f.mul(&a[col][j]));
                inv[row][j] = inv[row][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    let flat: Vec<Taylor> = inv.into_iter().flatten().collect();
    Ok(TaylorTensor {
        n,
        rank: 2,
        v: flat,
    })
}

/// Fundamental tensor g and its inverse at (x, y).
pub fn fundamental_tensor(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<(Tensor2, Tensor2)> {
    let pt = ModelPoint::with_degree(m, x, y, 2)?;
    pt.check_positive_definite()?;
    let g = pt.g_t(0);
    let ginv = pt.ginv_t(0)?;
    Ok((
        Tensor2::from_fn(m.n, "g", |i, j| g.value(&[i, j])),
        Tensor2::from_fn(m.n, "g_inv", |i, j| ginv.value(&[i, j])),
    ))
}

/// Angular metric h_ij = g_ij - F^-2 (g y)_i (g y)_j; annihilates y.
pub fn angular_metric(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<Tensor2> {
    let pt = ModelPoint::with_degree(m, x, y, 2)?;
    let g = pt.g_t(0);
    let f2 = pt.f2.value();
    let n = m.n;
    let gy: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|j| g.value(&[i, j]) * y[j]).sum())
        .collect();
    Ok(Tensor2::from_fn(n, "h", |i, j| {
        g.value(&[i, j]) - gy[i] * gy[j] / f2
    }))
}

/// Cartan torsion C_ijk = (1/4) d^3 F^2 / dy_i dy_j dy_k.
pub fn cartan_tensor(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<Tensor3> {
    let pt = ModelPoint::with_degree(m, x, y, 3)?;
    let c = pt.c_lower_t(0);
    Ok(Tensor3::from_fn(m.n, "C", |i, j, k| c.value(&[i, j, k])))
}

/// Mean Cartan torsion I_i = g^{jk} C_ijk and Matsumoto torsion
/// M_ijk = C_ijk - (1/(n+1)) { I_i h_jk + I_j h_ik + I_k h_ij }.
pub fn matsumoto_torsion(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<(MeanVector, Tensor3)> {
    let pt = ModelPoint::with_degree(m, x, y, 3)?;
    let n = m.n;
    let c = pt.c_lower_t(0);
    let ginv = pt.ginv_t(0)?;
    let h = angular_metric(m, x, y)?;
    let mut i_vec = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                i_vec[i] += ginv.value(&[j, k]) * c.value(&[i, j, k]);
            }
        }
    }
    let coeff = 1.0 / (n as f64 + 1.0);
    let m_t = Tensor3::from_fn(n, "M", |i, j, k| {
        c.value(&[i, j, k])
            - coeff * (i_vec[i] * h.get(j, k) + i_vec[j] * h.get(i, k) + i_vec[k] * h.get(i, j))
    });
    Ok((
        MeanVector {
            n,
            data: i_vec,
            name: "I",
        },
        m_t,
    ))
}

/// Convenience constructors for the models used throughout the tests.
pub mod presets {
    use super::*;

    pub fn box_chart(n: usize, half: f64) -> ChartBox {
        ChartBox {
            lo: vec![-half; n],
            hi: vec![half; n],
        }
    }

    pub fn euclidean(n: usize) -> MetricModel {
        build_metric(&MetricSpec {
            family: Family::Riemannian,
            dimension: n,
            a: AField::Identity,
            b: BField::Zero,
            phi: Phi::Linear,
            b0: 1.0,
            chart_domain: box_chart(n, 1.0),
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("euclidean preset is valid")
    }

    /// Unit-curvature sphere chart, x1 in (0.4, 2.7) away from the poles.
    pub fn sphere_patch(n: usize) -> MetricModel {
        let mut lo = vec![0.4; n];
        let mut hi = vec![2.7; n];
        if n >= 3 {
            lo[2] = -1.0;
            hi[2] = 1.0;
        }
        lo[n - 1] = -1.0;
        hi[n - 1] = 1.0;
        build_metric(&MetricSpec {
            family: Family::Riemannian,
            dimension: n,
            a: AField::SpherePatch,
            b: BField::Zero,
            phi: Phi::Linear,
            b0: 1.0,
            chart_domain: ChartBox { lo, hi },
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("sphere preset is valid")
    }

    pub fn randers_constant(n: usize, slope: f64) -> MetricModel {
        let mut b = vec![0.0; n];
        b[0] = slope;
        build_metric(&MetricSpec {
            family: Family::Randers,
            dimension: n,
            a: AField::Identity,
            b: BField::Constant { values: b },
            phi: Phi::Linear,
            b0: 1.0,
            chart_domain: box_chart(n, 1.0),
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("constant Randers preset is valid")
    }

    /// Randers with b = (amp sin x2, 0, ...): non-Berwald (db != 0).
    pub fn randers_sin(n: usize, amp: f64) -> MetricModel {
        build_metric(&MetricSpec {
            family: Family::Randers,
            dimension: n,
            a: AField::Identity,
            b: BField::SinX2 { amp },
            phi: Phi::Linear,
            b0: 1.0,
            chart_domain: box_chart(n, 1.0),
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("sin Randers preset is valid")
    }

    /// (alpha, beta)-metric with phi(s) = (1+s)^2: non-C-reducible.
    pub fn alpha_beta_square(n: usize, slope: f64) -> MetricModel {
        let mut b = vec![0.0; n];
        b[0] = slope;
        build_metric(&MetricSpec {
            family: Family::AlphaBeta,
            dimension: n,
            a: AField::Identity,
            b: BField::Constant { values: b },
            phi: Phi::Square,
            b0: 1.0,
            chart_domain: box_chart(n, 1.0),
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("alpha-beta preset is valid")
    }

    pub fn locally_minkowski(n: usize, slope: f64) -> MetricModel {
        let mut b = vec![0.0; n];
        b[0] = slope;
        build_metric(&MetricSpec {
            family: Family::LocallyMinkowski,
            dimension: n,
            a: AField::Identity,
            b: BField::Constant { values: b },
            phi: Phi::Linear,
            b0: 1.0,
            chart_domain: box_chart(n, 1.0),
            fiber_floor: DEFAULT_FIBER_FLOOR,
        })
        .expect("locally Minkowski preset is valid")
    }
}
