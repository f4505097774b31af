//! Spray geometry: geodesic coefficients G^i, nonlinear connection N^i_j,
//! Berwald and Riemann curvature, flag curvature, geodesic integration and
//! parallel transport.

use crate::error::{FinslerError, Result};
use crate::metrics::{invert_taylor_matrix, AField, MetricModel, ModelPoint};
use crate::jets::ScalarField;
use crate::taylor::{Taylor, TaylorCtx};
use crate::tensor::{TaylorTensor, Tensor2, Tensor4};

/// Spray coefficients G^i and nonlinear connection N^i_j at one point.
#[derive(Debug, Clone)]
pub struct SprayData {
    pub n: usize,
    pub g: Vec<f64>,
    pub n_mat: Tensor2,
}

/// G^i = (1/4) g^{il} { [F^2]_{x^k y^l} y^k - [F^2]_{x^l} } as Taylor values.
pub(crate) fn spray_t(pt: &ModelPoint) -> Result<TaylorTensor> {
    let n = pt.n();
    let gdeg = pt.f2.deg.saturating_sub(2);
    let ginv = pt.ginv_t(gdeg)?;
    let rhs = TaylorTensor::from_fn(n, 1, |idx| {
        let l = idx[0];
        let mut acc = pt.f2.deriv(l).neg();
        for k in 0..n {
            let mixed = pt.f2.deriv(k).deriv(n + l);
            acc = acc.add(&mixed.mul(&pt.y_var(k)));
        }
        acc
    });
    let spray = TaylorTensor::from_fn(n, 1, |idx| {
        let i = idx[0];
        let mut acc = Taylor::constant(&pt.ctx, 0.0).capped(gdeg);
        for l in 0..n {
            acc = acc.add(&ginv.at(&[i, l]).mul(rhs.at(&[l])));
        }
        acc.scale(0.25)
    });
    if spray.v.iter().any(|t| !t.is_finite()) {
        return Err(FinslerError::NonFinite {
            context: "spray coefficients".into(),
        });
    }
    Ok(spray)
}

/// N^i_j = dG^i/dy^j.
pub(crate) fn nonlinear_t(pt: &ModelPoint, spray: &TaylorTensor) -> TaylorTensor {
    let n = pt.n();
    TaylorTensor::from_fn(n, 2, |idx| spray.at(&[idx[0]]).deriv(n + idx[1]))
}

pub fn spray_coefficients(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<SprayData> {
    let pt = ModelPoint::with_degree(m, x, y, 4)?;
    let spray = spray_t(&pt)?;
    let nl = nonlinear_t(&pt, &spray);
    Ok(SprayData {
        n: m.n,
        g: (0..m.n).map(|i| spray.value(&[i])).collect(),
        n_mat: Tensor2::from_fn(m.n, "N", |i, j| nl.value(&[i, j])),
    })
}

/// Berwald curvature B^i_jkl = d^3 G^i / dy^j dy^k dy^l.
pub fn berwald_curvature(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<Tensor4> {
    let pt = ModelPoint::with_degree(m, x, y, 5)?;
    let n = m.n;
    let spray = spray_t(&pt)?;
    Ok(Tensor4::from_fn(n, "B", |i, j, k, l| {
        spray
            .at(&[i])
            .deriv(n + j)
            .deriv(n + k)
            .deriv(n + l)
            .value()
    }))
}

fn riemann_from_point(pt: &ModelPoint) -> Result<Tensor2> {
    let n = pt.n();
    let spray = spray_t(pt)?;
    Ok(Tensor2::from_fn(n, "R", |i, k| {
        let gi = spray.at(&[i]);
        let mut r = 2.0 * gi.deriv(k).value();
        for j in 0..n {
            r -= pt.y[j] * gi.deriv(j).deriv(n + k).value();
            r += 2.0 * spray.value(&[j]) * gi.deriv(n + j).deriv(n + k).value();
            r -= gi.deriv(n + j).value() * spray.at(&[j]).deriv(n + k).value();
        }
        r
    }))
}

/// Riemann curvature operator R^i_k =
/// 2 dG^i/dx^k - y^j d^2G^i/dx^j dy^k + 2 G^j d^2G^i/dy^j dy^k
/// - dG^i/dy^j dG^j/dy^k.
pub fn riemann_curvature(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<Tensor2> {
    let pt = ModelPoint::with_degree(m, x, y, 5)?;
    riemann_from_point(&pt)
}

/// Flag curvature K(y, v) = g(R_y v, v) / (g(y,y) g(v,v) - g(y,v)^2).
pub fn flag_curvature(m: &MetricModel, x: &[f64], y: &[f64], v: &[f64]) -> Result<f64> {
    let pt = ModelPoint::with_degree(m, x, y, 5)?;
    let n = m.n;
    let g = pt.g_t(0);
    let pair = |a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += g.value(&[i, j]) * a[i] * b[j];
            }
        }
        s
    };
    let gyy = pair(y, y);
    let gvv = pair(v, v);
    let gyv = pair(y, v);
    let gram = gyy * gvv - gyv * gyv;
    if gram <= 1e-8 * gyy.abs() * gvv.abs() {
        return Err(FinslerError::DegenerateFlag { gram });
    }
    let r = riemann_from_point(&pt)?;
    let mut num = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                num += g.value(&[i, j]) * r.get(i, k) * v[k] * v[j];
            }
        }
    }
    Ok(num / gram)
}

/// Scalar curvature function K(x, y) in dimension 2, where the flag plane is
/// the whole tangent space (companion = y rotated a quarter turn).
pub fn flag_scalar_2d(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<f64> {
    debug_assert_eq!(m.n, 2);
    flag_curvature(m, x, y, &[-y[1], y[0]])
}

/// RK4 geodesic trajectory with uniform steps.
#[derive(Debug, Clone)]
pub struct GeodesicTrajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: f64,
    pub order: usize,
}

/// Pointwise spray values; cheap low-degree evaluation for ODE right sides.
fn spray_values(m: &MetricModel, x: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
    let pt = ModelPoint::with_degree(m, x, v, 3).map_err(|e| match e {
        FinslerError::OutsideChart(_) => FinslerError::ChartExit { t },
        other => other,
    })?;
    let spray = spray_t(&pt)?;
    Ok((0..m.n).map(|i| spray.value(&[i])).collect())
}

/// Pointwise nonlinear-connection values N^i_j (row-major n x n).
fn n_values(m: &MetricModel, x: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
    let pt = ModelPoint::with_degree(m, x, v, 4).map_err(|e| match e {
        FinslerError::OutsideChart(_) => FinslerError::ChartExit { t },
        other => other,
    })?;
    let spray = spray_t(&pt)?;
    let nl = nonlinear_t(&pt, &spray);
    let n = m.n;
    Ok((0..n * n).map(|f| nl.v[f].value()).collect())
}

fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// The four RK4 stage states (x, v) for one geodesic step of size h.
fn geo_stages(
    m: &MetricModel,
    x: &[f64],
    v: &[f64],
    h: f64,
    t: f64,
) -> Result<[(Vec<f64>, Vec<f64>); 4]> {
    let a1: Vec<f64> = spray_values(m, x, v, t)?.iter().map(|g| -2.0 * g).collect();
    let x2 = axpy(x, 0.5 * h, v);
    let v2 = axpy(v, 0.5 * h, &a1);
    let a2: Vec<f64> = spray_values(m, &x2, &v2, t)?
        .iter()
        .map(|g| -2.0 * g)
        .collect();
    let x3 = axpy(x, 0.5 * h, &v2);
    let v3 = axpy(v, 0.5 * h, &a2);
    let a3: Vec<f64> = spray_values(m, &x3, &v3, t)?
        .iter()
        .map(|g| -2.0 * g)
        .collect();
    let x4 = axpy(x, h, &v3);
    let v4 = axpy(v, h, &a3);
    Ok([
        (x.to_vec(), v.to_vec()),
        (x2, v2),
        (x3, v3),
        (x4, v4),
    ])
}

/// Integrates the geodesic equation xdd^i + 2 G^i(x, xd) = 0 by classical
/// RK4 with uniform steps. The initial velocity is rescaled to unit speed
/// (F = 1) before integrating.
pub fn integrate_geodesic(
    m: &MetricModel,
    x0: &[f64],
    y0: &[f64],
    t_span: f64,
    steps: usize,
) -> Result<GeodesicTrajectory> {
    if steps == 0 || !(t_span > 0.0) {
        return Err(FinslerError::Invalid(
            "geodesic integration needs steps >= 1 and a positive duration".into(),
        ));
    }
    let n = m.n;
    let f0 = m.eval(x0, y0).max(0.0).sqrt();
    if !(f0 > 0.0) || !f0.is_finite() {
        return Err(FinslerError::NonFinite {
            context: "initial speed normalization".into(),
        });
    }
    let mut x = x0.to_vec();
    let mut v: Vec<f64> = y0.iter().map(|c| c / f0).collect();
    let h = t_span / steps as f64;
    let mut traj = GeodesicTrajectory {
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        v: Vec::with_capacity(steps + 1),
        step: h,
        order: 4,
    };
    traj.t.push(0.0);
    traj.x.push(x.clone());
    traj.v.push(v.clone());
    for k in 0..steps {
        let t = k as f64 * h;
        let stages = geo_stages(m, &x, &v, h, t)?;
        let mut kx = Vec::with_capacity(4);
        let mut kv = Vec::with_capacity(4);
        for (sx, sv) in &stages {
            kx.push(sv.clone());
            kv.push(
                spray_values(m, sx, sv, t)?
                    .iter()
                    .map(|g| -2.0 * g)
                    .collect::<Vec<f64>>(),
            );
        }
        for i in 0..n {
            x[i] += h / 6.0 * (kx[0][i] + 2.0 * kx[1][i] + 2.0 * kx[2][i] + kx[3][i]);
            v[i] += h / 6.0 * (kv[0][i] + 2.0 * kv[1][i] + 2.0 * kv[2][i] + kv[3][i]);
        }
        if !m.chart_domain.contains(&x) {
            return Err(FinslerError::ChartExit { t: t + h });
        }
        traj.t.push((k + 1) as f64 * h);
        traj.x.push(x.clone());
        traj.v.push(v.clone());
    }
    Ok(traj)
}

impl GeodesicTrajectory {
    /// Max relative drift of F(x, xd) from its initial value.
    pub fn speed_drift(&self, m: &MetricModel) -> f64 {
        let f0 = m.eval(&self.x[0], &self.v[0]).max(0.0).sqrt();
        self.x
            .iter()
            .zip(&self.v)
            .map(|(x, v)| (m.eval(x, v).max(0.0).sqrt() - f0).abs() / f0)
            .fold(0.0, f64::max)
    }
}

fn rk4_transport_step(
    m: &MetricModel,
    x: &[f64],
    v: &[f64],
    h: f64,
    t: f64,
    u: &[f64],
) -> Result<Vec<f64>> {
    let n = m.n;
    let stages = geo_stages(m, x, v, h, t)?;
    // dU^i/dt = -N^i_j(x, xd) U^j along the geodesic (the Cartan horizontal
    // coefficients contract with xd to N).
    let apply = |nm: &[f64], w: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| -(0..n).map(|j| nm[i * n + j] * w[j]).sum::<f64>())
            .collect()
    };
    let nm1 = n_values(m, &stages[0].0, &stages[0].1, t)?;
    let k1 = apply(&nm1, u);
    let nm2 = n_values(m, &stages[1].0, &stages[1].1, t)?;
    let k2 = apply(&nm2, &axpy(u, 0.5 * h, &k1));
    let nm3 = n_values(m, &stages[2].0, &stages[2].1, t)?;
    let k3 = apply(&nm3, &axpy(u, 0.5 * h, &k2));
    let nm4 = n_values(m, &stages[3].0, &stages[3].1, t)?;
    let k4 = apply(&nm4, &axpy(u, h, &k3));
    Ok((0..n)
        .map(|i| u[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Parallel transport of u0 along the trajectory with respect to the Cartan
/// connection; along a geodesic the horizontal coefficients contract with
/// the velocity to the nonlinear connection, so Chern/Berwald/Hashiguchi
/// transport coincides.
pub fn parallel_transport(
    m: &MetricModel,
    traj: &GeodesicTrajectory,
    u0: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(traj.t.len());
    out.push(u0.to_vec());
    for k in 0..traj.t.len() - 1 {
        let h = traj.t[k + 1] - traj.t[k];
        let next = rk4_transport_step(m, &traj.x[k], &traj.v[k], h, traj.t[k], &out[k])?;
        out.push(next);
    }
    Ok(out)
}

/// Transport backwards from the trajectory endpoint; returns fields in
/// forward time order, with the last entry equal to u_end.
pub fn reverse_transport(
    m: &MetricModel,
    traj: &GeodesicTrajectory,
    u_end: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let steps = traj.t.len() - 1;
    let mut out = vec![Vec::new(); traj.t.len()];
    out[steps] = u_end.to_vec();
    for k in (0..steps).rev() {
        let h = traj.t[k] - traj.t[k + 1];
        out[k] = rk4_transport_step(
            m,
            &traj.x[k + 1],
            &traj.v[k + 1],
            h,
            traj.t[k + 1],
            &out[k + 1],
        )?;
    }
    Ok(out)
}

/// Samples of the Cartan torsion contracted with three parallel fields along
/// a geodesic, plus a least-squares line through them.
#[derive(Debug, Clone)]
pub struct CartanLine {
    pub t: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS deviation of the samples from the fitted line.
    pub residual: f64,
}

pub fn cartan_along_geodesic(
    m: &MetricModel,
    traj: &GeodesicTrajectory,
    u: &[Vec<f64>],
    v: &[Vec<f64>],
    w: &[Vec<f64>],
) -> Result<CartanLine> {
    let n = m.n;
    let count = traj.t.len();
    if u.len() != count || v.len() != count || w.len() != count {
        return Err(FinslerError::Invalid(
            "transported fields must match the trajectory grid".into(),
        ));
    }
    let mut values = Vec::with_capacity(count);
    for s in 0..count {
        let pt = ModelPoint::with_degree(m, &traj.x[s], &traj.v[s], 3)?;
        let c = pt.c_lower_t(0);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    acc += c.value(&[i, j, k]) * u[s][i] * v[s][j] * w[s][k];
                }
            }
        }
        values.push(acc);
    }
    // least-squares line values ~ slope * t + intercept
    let count_f = count as f64;
    let mean_t = traj.t.iter().sum::<f64>() / count_f;
    let mean_v = values.iter().sum::<f64>() / count_f;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (t, val) in traj.t.iter().zip(&values) {
        cov += (t - mean_t) * (val - mean_v);
        var += (t - mean_t) * (t - mean_t);
    }
    let slope = if var > 0.0 { cov / var } else { 0.0 };
    let intercept = mean_v - slope * mean_t;
    let residual = (traj
        .t
        .iter()
        .zip(&values)
        .map(|(t, val)| {
            let d = val - (slope * t + intercept);
            d * d
        })
        .sum::<f64>()
        / count_f)
        .sqrt();
    Ok(CartanLine {
        t: traj.t.clone(),
        values,
        slope,
        intercept,
        residual,
    })
}

/// Classical Christoffel symbols gamma^i_jk of the Riemannian coefficient
/// field a_ij, computed by an x-only Taylor path independent of the spray
/// pipeline. Row-major n^3 layout [i][j][k].
pub fn classical_christoffel(a: &AField, n: usize, x: &[f64]) -> Result<Vec<f64>> {
    let gamma = christoffel_t(a, n, x, 3)?;
    Ok(gamma.v.iter().map(|t| t.value()).collect())
}

fn christoffel_t(a: &AField, n: usize, x: &[f64], deg: usize) -> Result<TaylorTensor> {
    let ctx = TaylorCtx::get(n, deg);
    let xt: Vec<Taylor> = (0..n).map(|i| Taylor::variable(&ctx, i, x[i])).collect();
    let at = a.eval_taylor(&xt);
    let a_tensor = TaylorTensor::from_fn(n, 2, |idx| at[idx[0]][idx[1]].clone());
    let ainv = invert_taylor_matrix(&a_tensor)?;
    Ok(TaylorTensor::from_fn(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let mut acc = Taylor::constant(&ctx, 0.0).capped(deg.saturating_sub(1));
        for l in 0..n {
            let term = at[l][k]
                .deriv(j)
                .add(&at[j][l].deriv(k))
                .sub(&at[j][k].deriv(l));
            acc = acc.add(&ainv.at(&[i, l]).mul(&term));
        }
        acc.scale(0.5)
    }))
}

/// Classical curvature tensor R_j{}^i{}_{kl} of a_ij (convention
/// R(d_k, d_l) d_j = R_j{}^i{}_{kl} d_i), row-major n^4 layout [i][j][k][l].
pub fn classical_riemann(a: &AField, n: usize, x: &[f64]) -> Result<Vec<f64>> {
    let gamma = christoffel_t(a, n, x, 3)?;
    let mut out = vec![0.0; n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut r = gamma.at(&[i, j, l]).deriv(k).value()
                        - gamma.at(&[i, j, k]).deriv(l).value();
                    for m2 in 0..n {
                        r += gamma.value(&[i, m2, k]) * gamma.value(&[m2, j, l])
                            - gamma.value(&[i, m2, l]) * gamma.value(&[m2, j, k]);
                    }
                    out[((i * n + j) * n + k) * n + l] = r;
                }
            }
        }
    }
    Ok(out)
}

/// Classical Riemann operator R^i_k = y^j y^l R_j{}^i{}_{kl}: the oracle for
/// the spray-based Riemann curvature on Riemannian models.
pub fn classical_riemann_operator(
    a: &AField,
    n: usize,
    x: &[f64],
    y: &[f64],
) -> Result<Tensor2> {
    let full = classical_riemann(a, n, x)?;
    Ok(Tensor2::from_fn(n, "R_classical", |i, k| {
        let mut s = 0.0;
        for j in 0..n {
            for l in 0..n {
                s += y[j] * y[l] * full[((i * n + j) * n + k) * n + l];
            }
        }
        s
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jets::DEFAULT_FIBER_FLOOR;
    use crate::metrics::presets::*;
    use crate::sample::{companion_vector, sample_points, SamplePlan};
    use approx::assert_relative_eq;

    fn plan(seed: u64) -> SamplePlan {
        SamplePlan {
            count: 20,
            seed,
            fiber_floor: DEFAULT_FIBER_FLOOR,
        }
    }

    #[test]
    fn euclidean_spray_vanishes() {
        let m = euclidean(2);
        let s = spray_coefficients(&m, &[0.3, -0.4], &[1.0, 0.5]).unwrap();
        assert!(s.g.iter().all(|v| v.abs() < 1e-12));
        assert!(s.n_mat.max_abs() < 1e-12);
    }

    #[test]
    fn locally_minkowski_spray_vanishes() {
        let m = locally_minkowski(2, 0.4);
        for (x, y) in sample_points(&m.chart_domain, &plan(11)) {
            let s = spray_coefficients(&m, &x, &y).unwrap();
            assert!(s.g.iter().all(|v| v.abs() < 1e-10), "G = {:?}", s.g);
        }
    }

    #[test]
    fn sphere_spray_matches_classical_christoffel() {
        let m = sphere_patch(2);
        for (x, y) in sample_points(&m.chart_domain, &plan(5)) {
            let s = spray_coefficients(&m, &x, &y).unwrap();
            let gamma = classical_christoffel(&m.a, 2, &x).unwrap();
            for i in 0..2 {
                let mut expect = 0.0;
                for j in 0..2 {
                    for k in 0..2 {
                        expect += 0.5 * gamma[(i * 2 + j) * 2 + k] * y[j] * y[k];
                    }
                }
                assert_relative_eq!(s.g[i], expect, epsilon = 1e-8, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn spray_homogeneity_and_euler() {
        let m = randers_sin(2, 0.3);
        for (x, y) in sample_points(&m.chart_domain, &plan(2)) {
            let s = spray_coefficients(&m, &x, &y).unwrap();
            // Euler: N^i_j y^j = 2 G^i
            for i in 0..2 {
                let ny: f64 = (0..2).map(|j| s.n_mat.get(i, j) * y[j]).sum();
                assert_relative_eq!(ny, 2.0 * s.g[i], epsilon = 1e-9, max_relative = 1e-9);
            }
            for lam in [0.5, 3.0] {
                let yl: Vec<f64> = y.iter().map(|v| v * lam).collect();
                let sl = spray_coefficients(&m, &x, &yl).unwrap();
                for i in 0..2 {
                    assert_relative_eq!(
                        sl.g[i],
                        lam * lam * s.g[i],
                        epsilon = 1e-9,
                        max_relative = 1e-9
                    );
                }
            }
        }
    }

    #[test]
    fn berwald_curvature_detects_berwald_metrics() {
        for m in [euclidean(2), sphere_patch(2), randers_constant(2, 0.3)] {
            for (x, y) in sample_points(&m.chart_domain, &plan(9)) {
                let b = berwald_curvature(&m, &x, &y).unwrap();
                assert!(b.max_abs() < 1e-8, "B = {} on Berwald model", b.max_abs());
            }
        }
        let m = randers_sin(2, 0.3);
        let mut worst: f64 = 0.0;
        for (x, y) in sample_points(&m.chart_domain, &plan(9)) {
            let b = berwald_curvature(&m, &x, &y).unwrap();
            worst = worst.max(b.max_abs());
            // total symmetry in jkl and y-contraction on the j slot
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            assert_relative_eq!(b.get(i, j, k, l), b.get(i, k, j, l), epsilon = 1e-9);
                            assert_relative_eq!(b.get(i, j, k, l), b.get(i, j, l, k), epsilon = 1e-9);
                        }
                        let by: f64 = (0..2).map(|l| b.get(i, j, k, l) * y[l]).sum();
                        assert!(by.abs() < 1e-9, "B y = {}", by);
                    }
                }
            }
        }
        assert!(worst > 1e-4, "expected non-Berwald, max|B| = {}", worst);
    }

    #[test]
    fn riemann_flat_models() {
        for m in [euclidean(2), locally_minkowski(2, 0.4)] {
            for (x, y) in sample_points(&m.chart_domain, &plan(13)) {
                let r = riemann_curvature(&m, &x, &y).unwrap();
                assert!(r.max_abs() < 1e-9, "R = {}", r.max_abs());
            }
        }
    }

    #[test]
    fn riemann_matches_classical_oracle_on_sphere() {
        let m = sphere_patch(2);
        for (x, y) in sample_points(&m.chart_domain, &plan(17)) {
            let r = riemann_curvature(&m, &x, &y).unwrap();
            let oracle = classical_riemann_operator(&m.a, 2, &x, &y).unwrap();
            let scale = oracle.max_abs().max(1.0);
            for i in 0..2 {
                for k in 0..2 {
                    assert!(
                        (r.get(i, k) - oracle.get(i, k)).abs() / scale < 1e-7,
                        "R^{}_{}: {} vs {}",
                        i,
                        k,
                        r.get(i, k),
                        oracle.get(i, k)
                    );
                }
            }
        }
    }

    #[test]
    fn riemann_g_symmetry() {
        for m in [sphere_patch(2), randers_sin(2, 0.3), alpha_beta_square(2, 0.3)] {
            for (x, y) in sample_points(&m.chart_domain, &plan(23)) {
                let r = riemann_curvature(&m, &x, &y).unwrap();
                let (g, _) = crate::metrics::fundamental_tensor(&m, &x, &y).unwrap();
                let n = m.n;
                let low = |i: usize, k: usize| -> f64 {
                    (0..n).map(|p| g.get(i, p) * r.get(p, k)).sum()
                };
                let scale = r.max_abs().max(1.0);
                for i in 0..n {
                    for k in 0..n {
                        assert!(
                            (low(i, k) - low(k, i)).abs() / scale < 1e-7,
                            "g-symmetry defect at ({}, {})",
                            i,
                            k
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn flag_curvature_euclidean_and_sphere() {
        let m = euclidean(2);
        let k = flag_curvature(&m, &[0.1, 0.2], &[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(k.abs() < 1e-10);

        let s = sphere_patch(2);
        for (idx, (x, y)) in sample_points(&s.chart_domain, &plan(29)).iter().enumerate() {
            let v = companion_vector(2, 29, idx);
            let gram_ok = {
                let d = y[0] * v[1] - y[1] * v[0];
                d.abs() > 1e-3
            };
            if !gram_ok {
                continue;
            }
            let k = flag_curvature(&s, x, y, &v).unwrap();
            assert_relative_eq!(k, 1.0, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn flag_curvature_plane_invariance_and_degeneracy() {
        let m = randers_sin(3, 0.25);
        let x = [0.2, 0.4, -0.1];
        let y = [0.9, 0.1, 0.3];
        let v = [0.1, 0.8, -0.5];
        let k0 = flag_curvature(&m, &x, &y, &v).unwrap();
        for t in [0.5, -1.2] {
            let vt: Vec<f64> = (0..3).map(|i| v[i] + t * y[i]).collect();
            let kt = flag_curvature(&m, &x, &y, &vt).unwrap();
            assert_relative_eq!(kt, k0, epsilon = 1e-8, max_relative = 1e-8);
        }
        // v parallel to y is a degenerate flag
        let yl: Vec<f64> = y.iter().map(|c| 2.0 * c).collect();
        assert!(matches!(
            flag_curvature(&m, &x, &y, &yl),
            Err(FinslerError::DegenerateFlag { .. })
        ));
    }

    #[test]
    fn euclidean_geodesics_are_straight() {
        let m = euclidean(2);
        let traj = integrate_geodesic(&m, &[0.0, 0.0], &[1.0, 0.0], 1.0, 64).unwrap();
        let end = traj.x.last().unwrap();
        assert_relative_eq!(end[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(end[1], 0.0, epsilon = 1e-9);
        assert!(traj.speed_drift(&m) < 1e-12);
    }

    #[test]
    fn geodesic_speed_conservation_non_berwald() {
        let m = randers_sin(2, 0.3);
        let traj = integrate_geodesic(&m, &[0.0, 0.0], &[0.8, 0.55], 0.8, 200).unwrap();
        assert!(traj.speed_drift(&m) < 1e-6, "drift {}", traj.speed_drift(&m));
    }

    #[test]
    fn geodesic_rk4_order_on_sphere() {
        let m = sphere_patch(2);
        let x0 = [1.4, 0.0];
        let y0 = [0.3, 0.8];
        let fine = integrate_geodesic(&m, &x0, &y0, 0.9, 512).unwrap();
        let reference = fine.x.last().unwrap().clone();
        let err_at = |steps: usize| -> f64 {
            let t = integrate_geodesic(&m, &x0, &y0, 0.9, steps).unwrap();
            t.x.last()
                .unwrap()
                .iter()
                .zip(&reference)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        let e1 = err_at(16);
        let e2 = err_at(32);
        let ratio = e1 / e2;
        assert!(
            (8.0..40.0).contains(&ratio),
            "expected ~16x error drop, got {} ({} / {})",
            ratio,
            e1,
            e2
        );
    }

    #[test]
    fn geodesic_chart_exit_detected() {
        let m = euclidean(2);
        let err = integrate_geodesic(&m, &[0.9, 0.0], &[1.0, 0.0], 1.0, 50);
        assert!(matches!(err, Err(FinslerError::ChartExit { .. })));
    }

    #[test]
    fn transport_euclidean_is_constant() {
        let m = euclidean(2);
        let traj = integrate_geodesic(&m, &[-0.5, 0.0], &[1.0, 0.2], 0.8, 64).unwrap();
        let u = parallel_transport(&m, &traj, &[0.3, -0.7]).unwrap();
        for field in &u {
            assert_relative_eq!(field[0], 0.3, epsilon = 1e-10);
            assert_relative_eq!(field[1], -0.7, epsilon = 1e-10);
        }
    }

    #[test]
    fn transport_round_trip_and_metricity() {
        let m = sphere_patch(2);
        let traj = integrate_geodesic(&m, &[1.4, 0.0], &[0.5, 0.6], 1.0, 400).unwrap();
        let u0 = [0.4, 0.9];
        let u = parallel_transport(&m, &traj, &u0).unwrap();
        // reverse transport of the endpoint recovers u0
        let back = reverse_transport(&m, &traj, u.last().unwrap()).unwrap();
        for i in 0..2 {
            assert_relative_eq!(back[0][i], u0[i], epsilon = 1e-6);
        }
        // g(U, U) constant along the trajectory
        let norms: Vec<f64> = traj
            .x
            .iter()
            .zip(&traj.v)
            .zip(&u)
            .map(|((x, v), w)| {
                let (g, _) = crate::metrics::fundamental_tensor(&m, x, v).unwrap();
                let mut s = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s += g.get(i, j) * w[i] * w[j];
                    }
                }
                s
            })
            .collect();
        let n0 = norms[0];
        for nv in &norms {
            assert!((nv - n0).abs() / n0 < 1e-6, "g(U,U) drift: {} vs {}", nv, n0);
        }
    }

    #[test]
    fn cartan_line_constant_on_berwald() {
        // Euclidean: C = 0 along any geodesic
        let m = euclidean(2);
        let traj = integrate_geodesic(&m, &[-0.5, -0.5], &[1.0, 1.0], 0.9, 64).unwrap();
        let u = parallel_transport(&m, &traj, &[1.0, 0.0]).unwrap();
        let line = cartan_along_geodesic(&m, &traj, &u, &u, &u).unwrap();
        assert!(line.values.iter().all(|v| v.abs() < 1e-12));

        // Berwald Randers: L = 0, so C along the geodesic has zero slope
        let m = randers_constant(2, 0.3);
        let traj = integrate_geodesic(&m, &[-0.5, 0.0], &[0.8, 0.5], 1.2, 200).unwrap();
        let u = parallel_transport(&m, &traj, &[0.2, 0.9]).unwrap();
        let w = parallel_transport(&m, &traj, &[1.0, -0.1]).unwrap();
        let line = cartan_along_geodesic(&m, &traj, &u, &u, &w).unwrap();
        assert!(line.values[0].abs() > 1e-4, "want a nonzero C sample");
        assert!(line.slope.abs() < 1e-6, "slope {}", line.slope);
        assert!(line.residual < 1e-6, "residual {}", line.residual);
    }
}
