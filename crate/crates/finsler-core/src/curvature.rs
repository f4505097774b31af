//! Curvature of a Finsler connection in the adapted coframe, a
//! finite-difference structure-equation oracle, and vanishing-tensor
//! metric classification.

use crate::connections::{eval_recipe, ConnCoeffs, FinslerConnection, Geometry, Recipe};
use crate::error::Result;
use crate::jets::ScalarField;
use crate::metrics::{cartan_tensor, fundamental_tensor, matsumoto_torsion, MetricModel};
use crate::sample::{sample_points, SamplePlan};
use crate::spray::berwald_curvature;
use crate::tensor::{TaylorTensor, Tensor2, Tensor4};
use serde::Serialize;

/// hh-, hv- and vv-curvature coefficient tensors, all stored as
/// [section j][output i][slot k][slot l].
///
/// R: curvature on two horizontal slots; antisymmetric in (k, l).
/// P: slot k horizontal, slot l vertical; no slot symmetry.
/// Q: curvature on two vertical slots; antisymmetric in (k, l).
#[derive(Debug, Clone)]
pub struct CurvatureTriple {
    pub r: Tensor4,
    pub p: Tensor4,
    pub q: Tensor4,
    pub frame: &'static str,
}

pub fn curvature_triple(c: &FinslerConnection, x: &[f64], y: &[f64]) -> Result<CurvatureTriple> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    Ok(curvature_values(&geo, &coeffs))
}

/// Curvature R^m_kl of the nonlinear connection: delta_k N^m_l - delta_l N^m_k.
pub(crate) fn nonlinear_curvature(geo: &Geometry) -> TaylorTensor {
    TaylorTensor::from_fn(geo.n, 3, |idx| {
        let (m, k, l) = (idx[0], idx[1], idx[2]);
        geo.delta(geo.nl.at(&[m, l]), k)
            .sub(&geo.delta(geo.nl.at(&[m, k]), l))
    })
}

pub(crate) fn curvature_values(geo: &Geometry, coeffs: &ConnCoeffs) -> CurvatureTriple {
    let n = geo.n;
    let rnl = nonlinear_curvature(geo);
    let h = &coeffs.h;
    let v = &coeffs.v;
    let r = Tensor4::from_fn(n, "R", |i, j, k, l| {
        // outer index order of from_fn is (j, i, k, l) by our storage contract
        let (j, i) = (i, j);
        let mut out = geo.delta(h.at(&[i, j, l]), k).value()
            - geo.delta(h.at(&[i, j, k]), l).value();
        for m in 0..n {
            out += h.value(&[m, j, l]) * h.value(&[i, m, k])
                - h.value(&[m, j, k]) * h.value(&[i, m, l]);
            out += v.value(&[i, j, m]) * rnl.value(&[m, k, l]);
        }
        out
    });
    let p = Tensor4::from_fn(n, "P", |i, j, k, l| {
        let (j, i) = (i, j);
        let mut out = geo.delta(v.at(&[i, j, l]), k).value()
            - h.at(&[i, j, k]).deriv(n + l).value();
        for m in 0..n {
            out += v.value(&[m, j, l]) * h.value(&[i, m, k])
                - h.value(&[m, j, k]) * v.value(&[i, m, l]);
            out -= geo.nl.at(&[m, k]).deriv(n + l).value() * v.value(&[i, j, m]);
        }
        out
    });
    let q = Tensor4::from_fn(n, "Q", |i, j, k, l| {
        let (j, i) = (i, j);
        let mut out = v.at(&[i, j, l]).deriv(n + k).value()
            - v.at(&[i, j, k]).deriv(n + l).value();
        for m in 0..n {
            out += v.value(&[m, j, l]) * v.value(&[i, m, k])
                - v.value(&[m, j, k]) * v.value(&[i, m, l]);
        }
        out
    });
    CurvatureTriple {
        r,
        p,
        q,
        frame: "adapted",
    }
}

/// Frame vector for the structure oracle: a horizontal basis field
/// delta_k or a vertical basis field d/dy^k.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameVector {
    Horizontal(usize),
    Vertical(usize),
}

/// Connection data at a single (possibly displaced) point, evaluated on an
/// independent low-degree path for the finite-difference oracle.
struct OraclePoint {
    h: Vec<f64>,
    v: Vec<f64>,
    nl: Vec<f64>,
}

fn oracle_point(m: &MetricModel, recipe: &Recipe, x: &[f64], y: &[f64]) -> Result<OraclePoint> {
    let geo = Geometry::with_degree(m, x, y, 4)?;
    let coeffs = eval_recipe(&geo, recipe);
    Ok(OraclePoint {
        h: coeffs.h.v.iter().map(|t| t.value()).collect(),
        v: coeffs.v.v.iter().map(|t| t.value()).collect(),
        nl: geo.nl.v.iter().map(|t| t.value()).collect(),
    })
}

const ORACLE_STEP: f64 = 1e-5;

/// Evaluates the curvature operator on the two frame directions by central
/// finite differences of the covariant derivative, including the frame
/// bracket term. Returns the matrix [output i][section j]; entry (i, j)
/// matches the corresponding block of [`curvature_triple`].
pub fn structure_oracle(
    c: &FinslerConnection,
    x: &[f64],
    y: &[f64],
    a: FrameVector,
    b: FrameVector,
) -> Result<Tensor2> {
    let m = &c.model;
    let n = m.n;
    let center = oracle_point(m, &c.recipe, x, y)?;
    let scale = y
        .iter()
        .chain(x.iter())
        .fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let h = ORACLE_STEP * scale;

    // Displace along a frame direction: horizontal displacement follows the
    // straight line tangent to delta_k at the center (x + t e_k,
    // y - t N(center) e_k); vertical displacement moves y only.
    let displaced = |dir: FrameVector, sign: f64| -> Result<OraclePoint> {
        match dir {
            FrameVector::Horizontal(k) => {
                let mut xd = x.to_vec();
                let mut yd = y.to_vec();
                xd[k] += sign * h;
                for mm in 0..n {
                    yd[mm] -= sign * h * center.nl[mm * n + k];
                }
                oracle_point(m, &c.recipe, &xd, &yd)
            }
            FrameVector::Vertical(k) => {
                let mut yd = y.to_vec();
                yd[k] += sign * h;
                oracle_point(m, &c.recipe, x, &yd)
            }
        }
    };

    // Connection coefficient of a frame direction: H^i_jk for delta_k,
    // V^i_jl for a vertical leg.
    let coeff = |p: &OraclePoint, i: usize, j: usize, dir: FrameVector| -> f64 {
        match dir {
            FrameVector::Horizontal(k) => p.h[(i * n + j) * n + k],
            FrameVector::Vertical(l) => p.v[(i * n + j) * n + l],
        }
    };

    let a_plus = displaced(a, 1.0)?;
    let a_minus = displaced(a, -1.0)?;
    let b_plus = displaced(b, 1.0)?;
    let b_minus = displaced(b, -1.0)?;

    // Bracket term: [delta_k, delta_l] = -R^m_kl d/dy^m with R^m_kl from
    // finite differences of N; [delta_k, d/dy^l] = (dN^m_k/dy^l) d/dy^m;
    // vertical frame fields commute.
    let mut bracket = vec![0.0; n]; // vertical components of [A, B]
    match (a, b) {
        (FrameVector::Horizontal(k), FrameVector::Horizontal(l)) => {
            for mm in 0..n {
                let dk_nl = (a_plus.nl[mm * n + l] - a_minus.nl[mm * n + l]) / (2.0 * h);
                let dl_nk = (b_plus.nl[mm * n + k] - b_minus.nl[mm * n + k]) / (2.0 * h);
                bracket[mm] = -(dk_nl - dl_nk);
            }
        }
        (FrameVector::Horizontal(k), FrameVector::Vertical(_)) => {
            for mm in 0..n {
                let dv_nk = (b_plus.nl[mm * n + k] - b_minus.nl[mm * n + k]) / (2.0 * h);
                bracket[mm] = dv_nk;
            }
        }
        (FrameVector::Vertical(_), FrameVector::Horizontal(k)) => {
            for mm in 0..n {
                let dv_nk = (a_plus.nl[mm * n + k] - a_minus.nl[mm * n + k]) / (2.0 * h);
                bracket[mm] = -dv_nk;
            }
        }
        (FrameVector::Vertical(_), FrameVector::Vertical(_)) => {}
    }

    Ok(Tensor2::from_fn(n, "oracle", |i, j| {
        // nabla_A nabla_B e_j - nabla_B nabla_A e_j - nabla_[A,B] e_j,
        // component i, for the constant section e_j.
        let da_cb = (coeff(&a_plus, i, j, b) - coeff(&a_minus, i, j, b)) / (2.0 * h);
        let db_ca = (coeff(&b_plus, i, j, a) - coeff(&b_minus, i, j, a)) / (2.0 * h);
        let mut out = da_cb - db_ca;
        for mm in 0..n {
            out += coeff(&center, mm, j, b) * coeff(&center, i, mm, a)
                - coeff(&center, mm, j, a) * coeff(&center, i, mm, b);
            out -= bracket[mm] * center.v[(i * n + j) * n + mm];
        }
        out
    }))
}

/// One vanishing-tensor predicate of the classification report.
#[derive(Debug, Clone, Serialize)]
pub struct PredicateResult {
    pub name: String,
    /// Max over samples of the scale-normalized tensor magnitude.
    pub max_abs: f64,
    pub verdict: bool,
    pub witness_x: Vec<f64>,
    pub witness_y: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub tolerance: f64,
    pub samples: usize,
    pub predicates: Vec<PredicateResult>,
    pub warnings: Vec<String>,
}

impl ClassificationReport {
    pub fn verdict(&self, name: &str) -> Option<bool> {
        self.predicates
            .iter()
            .find(|p| p.name == name)
            .map(|p| p.verdict)
    }
}

pub const CLASSIFY_TOLERANCE: f64 = 1e-7;

/// Evaluates the six vanishing-tensor predicates at seeded samples. Each
/// tensor is normalized so the verdict is invariant under F -> lambda F and
/// under rescaling of y: multiply by F to the tensor's y-homogeneity degree,
/// then divide by the matching power of the metric scale max|g|.
pub fn classify_metric(m: &MetricModel, plan: &SamplePlan) -> Result<ClassificationReport> {
    classify_metric_with_tolerance(m, plan, CLASSIFY_TOLERANCE)
}

pub fn classify_metric_with_tolerance(
    m: &MetricModel,
    plan: &SamplePlan,
    tolerance: f64,
) -> Result<ClassificationReport> {
    let pts = sample_points(&m.chart_domain, plan);
    let names = [
        "riemannian",
        "c_reducible",
        "berwald",
        "landsberg",
        "weakly_landsberg",
        "generalized_landsberg",
    ];
    let mut max_abs = [0.0_f64; 6];
    let mut witness: [Option<(Vec<f64>, Vec<f64>)>; 6] = Default::default();
    for (x, y) in &pts {
        let f = ScalarField::eval(m, x, y).sqrt();
        let (g, _) = fundamental_tensor(m, x, y)?;
        let gs = g.max_abs().max(1e-12);
        let cart = cartan_tensor(m, x, y)?;
        let (_, mats) = matsumoto_torsion(m, x, y)?;
        let b = berwald_curvature(m, x, y)?;
        let suite = crate::connections::landsberg_suite(m, x, y)?;
        let values = [
            cart.max_abs() * f / gs.powf(1.5),
            mats.max_abs() * f / gs.powf(1.5),
            b.max_abs() * f / gs.sqrt(),
            suite.l.max_abs() / gs,
            suite.j.max_abs(),
            suite.lbar.max_abs() / (f * gs.sqrt()),
        ];
        for (slot, v) in values.iter().enumerate() {
            if *v > max_abs[slot] {
                max_abs[slot] = *v;
                witness[slot] = Some((x.clone(), y.clone()));
            }
        }
    }
    let predicates: Vec<PredicateResult> = names
        .iter()
        .enumerate()
        .map(|(slot, name)| {
            let (wx, wy) = witness[slot].clone().unwrap_or_default();
            PredicateResult {
                name: name.to_string(),
                max_abs: max_abs[slot],
                verdict: max_abs[slot] < tolerance,
                witness_x: wx,
                witness_y: wy,
            }
        })
        .collect();
    let verdict = |name: &str| predicates.iter().find(|p| p.name == name).unwrap().verdict;
    let mut warnings = Vec::new();
    if verdict("riemannian") {
        for other in &names[1..] {
            if !verdict(other) {
                warnings.push(format!("riemannian holds but {} fails", other));
            }
        }
    }
    for (stronger, weaker) in [
        ("berwald", "landsberg"),
        ("landsberg", "weakly_landsberg"),
        ("landsberg", "generalized_landsberg"),
    ] {
        if verdict(stronger) && !verdict(weaker) {
            warnings.push(format!("{} holds but {} fails", stronger, weaker));
        }
    }
    Ok(ClassificationReport {
        tolerance,
        samples: pts.len(),
        predicates,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connections::{apply_process, build_connection, ConnectionKind, ProcessKind};
    use crate::jets::DEFAULT_FIBER_FLOOR;
    use crate::metrics::presets::*;
    use crate::spray::riemann_curvature;
    use approx::assert_relative_eq;

    fn plan(seed: u64, count: usize) -> SamplePlan {
        SamplePlan {
            count,
            seed,
            fiber_floor: DEFAULT_FIBER_FLOOR,
        }
    }

    #[test]
    fn euclidean_curvature_vanishes() {
        let m = euclidean(2);
        for kind in ConnectionKind::ALL {
            let c = build_connection(&m, kind).unwrap();
            let t = curvature_triple(&c, &[0.2, -0.1], &[0.8, 0.5]).unwrap();
            assert!(t.r.max_abs() < 1e-12);
            assert!(t.p.max_abs() < 1e-12);
            assert!(t.q.max_abs() < 1e-12);
        }
    }

    #[test]
    fn chern_vv_curvature_vanishes_exactly() {
        let m = randers_sin(2, 0.3);
        let c = build_connection(&m, ConnectionKind::Chern).unwrap();
        for (x, y) in sample_points(&m.chart_domain, &plan(5, 6)) {
            let t = curvature_triple(&c, &x, &y).unwrap();
            assert_eq!(t.q.max_abs(), 0.0);
        }
    }

    #[test]
    fn antisymmetries_hold() {
        let m = alpha_beta_square(2, 0.3);
        let cartan = build_connection(&m, ConnectionKind::Cartan).unwrap();
        for conn in [
            cartan.clone(),
            apply_process(&cartan, ProcessKind::ShenL),
            build_connection(&m, ConnectionKind::Hashiguchi).unwrap(),
        ] {
            for (x, y) in sample_points(&m.chart_domain, &plan(9, 4)) {
                let t = curvature_triple(&conn, &x, &y).unwrap();
                for j in 0..2 {
                    for i in 0..2 {
                        for k in 0..2 {
                            for l in 0..2 {
                                assert_relative_eq!(
                                    t.r.get(j, i, k, l),
                                    -t.r.get(j, i, l, k),
                                    epsilon = 1e-9
                                );
                                assert_relative_eq!(
                                    t.q.get(j, i, k, l),
                                    -t.q.get(j, i, l, k),
                                    epsilon = 1e-12
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn chern_hh_block_reproduces_riemann_operator() {
        for m in [sphere_patch(2), randers_sin(2, 0.3), alpha_beta_square(3, 0.25)] {
            let n = m.n;
            let c = build_connection(&m, ConnectionKind::Chern).unwrap();
            for (x, y) in sample_points(&m.chart_domain, &plan(13, 5)) {
                let t = curvature_triple(&c, &x, &y).unwrap();
                let rik = riemann_curvature(&m, &x, &y).unwrap();
                let scale = rik.max_abs().max(1.0);
                for i in 0..n {
                    for k in 0..n {
                        let mut s = 0.0;
                        for j in 0..n {
                            for l in 0..n {
                                s += y[j] * t.r.get(j, i, k, l) * y[l];
                            }
                        }
                        assert!(
                            (s - rik.get(i, k)).abs() / scale < 1e-6,
                            "hh contraction {} vs spray {}",
                            s,
                            rik.get(i, k)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn cartan_vv_curvature_is_skew_when_lowered() {
        let m = randers_sin(3, 0.25);
        let c = build_connection(&m, ConnectionKind::Cartan).unwrap();
        for (x, y) in sample_points(&m.chart_domain, &plan(17, 5)) {
            let t = curvature_triple(&c, &x, &y).unwrap();
            let (g, _) = fundamental_tensor(&m, &x, &y).unwrap();
            let scale = t.q.max_abs().max(1.0);
            for j in 0..3 {
                for i in 0..3 {
                    for k in 0..3 {
                        for l in 0..3 {
                            let mut low_ji = 0.0;
                            let mut low_ij = 0.0;
                            for s in 0..3 {
                                low_ji += g.get(i, s) * t.q.get(j, s, k, l);
                                low_ij += g.get(j, s) * t.q.get(i, s, k, l);
                            }
                            assert!(
                                (low_ji + low_ij).abs() / scale < 1e-7,
                                "lowered vv curvature not skew: {}",
                                low_ji + low_ij
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn structure_oracle_matches_all_blocks() {
        let m = randers_sin(2, 0.3);
        let cartan = build_connection(&m, ConnectionKind::Cartan).unwrap();
        let conns = [
            cartan.clone(),
            build_connection(&m, ConnectionKind::Berwald).unwrap(),
            apply_process(&cartan, ProcessKind::ShenC),
        ];
        for conn in &conns {
            for (x, y) in sample_points(&m.chart_domain, &plan(21, 3)) {
                let t = curvature_triple(conn, &x, &y).unwrap();
                for k in 0..2 {
                    for l in 0..2 {
                        let r_o = structure_oracle(
                            conn,
                            &x,
                            &y,
                            FrameVector::Horizontal(k),
                            FrameVector::Horizontal(l),
                        )
                        .unwrap();
                        let p_o = structure_oracle(
                            conn,
                            &x,
                            &y,
                            FrameVector::Horizontal(k),
                            FrameVector::Vertical(l),
                        )
                        .unwrap();
                        let q_o = structure_oracle(
                            conn,
                            &x,
                            &y,
                            FrameVector::Vertical(k),
                            FrameVector::Vertical(l),
                        )
                        .unwrap();
                        for i in 0..2 {
                            for j in 0..2 {
                                assert!(
                                    (r_o.get(i, j) - t.r.get(j, i, k, l)).abs() < 1e-4,
                                    "{}: R oracle {} vs {}",
                                    conn.name(),
                                    r_o.get(i, j),
                                    t.r.get(j, i, k, l)
                                );
                                assert!(
                                    (p_o.get(i, j) - t.p.get(j, i, k, l)).abs() < 1e-4,
                                    "{}: P oracle {} vs {}",
                                    conn.name(),
                                    p_o.get(i, j),
                                    t.p.get(j, i, k, l)
                                );
                                assert!(
                                    (q_o.get(i, j) - t.q.get(j, i, k, l)).abs() < 1e-4,
                                    "{}: Q oracle {} vs {}",
                                    conn.name(),
                                    q_o.get(i, j),
                                    t.q.get(j, i, k, l)
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn classify_riemannian_model() {
        let rep = classify_metric(&sphere_patch(2), &plan(1, 20)).unwrap();
        for p in &rep.predicates {
            assert!(p.verdict, "{} failed: {}", p.name, p.max_abs);
        }
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn classify_berwald_randers() {
        let rep = classify_metric(&randers_constant(3, 0.3), &plan(1, 20)).unwrap();
        assert_eq!(rep.verdict("riemannian"), Some(false));
        assert_eq!(rep.verdict("berwald"), Some(true));
        assert_eq!(rep.verdict("landsberg"), Some(true));
        assert_eq!(rep.verdict("c_reducible"), Some(true));
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn classify_square_metric() {
        let rep = classify_metric(&alpha_beta_square(3, 0.3), &plan(1, 20)).unwrap();
        assert_eq!(rep.verdict("riemannian"), Some(false));
        assert_eq!(rep.verdict("c_reducible"), Some(false));
    }

    #[test]
    fn classify_non_berwald_randers() {
        let rep = classify_metric(&randers_sin(2, 0.3), &plan(1, 20)).unwrap();
        assert_eq!(rep.verdict("berwald"), Some(false));
        assert_eq!(rep.verdict("landsberg"), Some(false));
        assert_eq!(rep.verdict("c_reducible"), Some(true));
    }

    #[test]
    fn classification_is_scale_invariant() {
        // Scaling a by 9 and b by 3 scales F by 3 pointwise (s = beta/alpha
        // is unchanged); every normalized magnitude must be unchanged too.
        let m = randers_sin(2, 0.3);
        let mut scaled = m.clone();
        scaled.a = crate::metrics::AField::Constant {
            matrix: vec![vec![9.0, 0.0], vec![0.0, 9.0]],
        };
        scaled.b = crate::metrics::BField::SinX2 { amp: 0.9 };
        let a = classify_metric(&m, &plan(1, 10)).unwrap();
        let b = classify_metric(&scaled, &plan(1, 10)).unwrap();
        for (pa, pb) in a.predicates.iter().zip(&b.predicates) {
            assert_relative_eq!(pa.max_abs, pb.max_abs, max_relative = 1e-8);
        }
    }
}
