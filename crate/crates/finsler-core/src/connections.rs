//! Finsler connections in the adapted coframe (dx^k, dy^k + N^k_m dx^m).
//!
//! A connection is stored as a recipe (named, or a process applied to a
//! base); evaluation at a point produces horizontal coefficients H^i_jk
//! (dx-leg) and vertical coefficients V^i_jk (delta-y-leg). The nonlinear
//! connection N is shared by all connections.

use crate::error::{FinslerError, Result};
use crate::jets::DEFAULT_FIBER_FLOOR;
use crate::metrics::{invert_taylor_matrix, MetricModel, ModelPoint, DEFAULT_DEGREE};
use crate::sample::{sample_points, SamplePlan};
use crate::spray::{nonlinear_t, spray_t};
use crate::taylor::Taylor;
use crate::tensor::{DenseTensor, MeanVector, TaylorTensor, Tensor3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectionKind {
    Cartan,
    Chern,
    Berwald,
    Hashiguchi,
    Shen,
}

impl ConnectionKind {
    pub const ALL: [ConnectionKind; 5] = [
        ConnectionKind::Cartan,
        ConnectionKind::Chern,
        ConnectionKind::Berwald,
        ConnectionKind::Hashiguchi,
        ConnectionKind::Shen,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ConnectionKind::Cartan => "cartan",
            ConnectionKind::Chern => "chern",
            ConnectionKind::Berwald => "berwald",
            ConnectionKind::Hashiguchi => "hashiguchi",
            ConnectionKind::Shen => "shen",
        }
    }
}

/// The four connection transformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    MatsumotoC,
    MatsumotoL,
    ShenC,
    ShenL,
}

impl ProcessKind {
    pub const ALL: [ProcessKind; 4] = [
        ProcessKind::MatsumotoC,
        ProcessKind::MatsumotoL,
        ProcessKind::ShenC,
        ProcessKind::ShenL,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::MatsumotoC => "matsumoto_c",
            ProcessKind::MatsumotoL => "matsumoto_l",
            ProcessKind::ShenC => "shen_c",
            ProcessKind::ShenL => "shen_l",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Recipe {
    Named(ConnectionKind),
    Processed {
        base: Box<Recipe>,
        process: ProcessKind,
    },
}

impl Recipe {
    pub fn name(&self) -> String {
        match self {
            Recipe::Named(k) => k.name().to_string(),
            Recipe::Processed { base, process } => {
                format!("{}({})", process.name(), base.name())
            }
        }
    }
}

/// A Finsler connection over a metric model.
#[derive(Debug, Clone)]
pub struct FinslerConnection {
    pub model: MetricModel,
    pub recipe: Recipe,
}

impl FinslerConnection {
    pub fn name(&self) -> String {
        self.recipe.name()
    }
}

/// Per-point cache of every Taylor tensor the connection algebra needs.
pub(crate) struct Geometry<'m> {
    pub n: usize,
    pub pt: ModelPoint<'m>,
    /// F as a Taylor value (capped to the torsion degree).
    pub f: Taylor,
    pub g: TaylorTensor,
    pub ginv: TaylorTensor,
    pub c_low: TaylorTensor,
    pub c_mix: TaylorTensor,
    pub spray: TaylorTensor,
    pub nl: TaylorTensor,
    /// Cartan horizontal coefficients from the delta-derivative metric formula.
    pub gamma: TaylorTensor,
    /// Berwald horizontal coefficients dN^i_j / dy^k.
    pub berwald_h: TaylorTensor,
    /// Landsberg tensor, all indices down.
    pub land_low: TaylorTensor,
    pub land_mix: TaylorTensor,
}

impl<'m> Geometry<'m> {
    pub fn new(model: &'m MetricModel, x: &[f64], y: &[f64]) -> Result<Geometry<'m>> {
        Geometry::with_degree(model, x, y, DEFAULT_DEGREE)
    }

    pub fn with_degree(
        model: &'m MetricModel,
        x: &[f64],
        y: &[f64],
        degree: usize,
    ) -> Result<Geometry<'m>> {
        let pt = ModelPoint::with_degree(model, x, y, degree)?;
        let n = model.n;
        let d = degree;
        let g = pt.g_t(d - 2);
        let ginv = invert_taylor_matrix(&g)?;
        let c_low = pt.c_lower_t(d - 3);
        let c_mix = mixed(&ginv, &c_low);
        let spray = spray_t(&pt)?;
        let nl = nonlinear_t(&pt, &spray);
        let berwald_h = TaylorTensor::from_fn(n, 3, |idx| nl.at(&[idx[0], idx[1]]).deriv(n + idx[2]));
        let f = pt.f2.capped(d - 3).sqrt();
        let placeholder = TaylorTensor::zeros(&pt.ctx, n, 3, 0);
        let mut geo = Geometry {
            n,
            pt,
            f,
            g,
            ginv,
            c_low,
            c_mix,
            spray,
            nl,
            gamma: placeholder.clone(),
            berwald_h,
            land_low: placeholder.clone(),
            land_mix: placeholder,
        };
        geo.gamma = geo.compute_gamma();
        geo.land_low = geo.compute_landsberg();
        geo.land_mix = mixed(&geo.ginv, &geo.land_low);
        Ok(geo)
    }

    /// Horizontal basis derivative delta_k = d/dx^k - N^m_k d/dy^m.
    pub fn delta(&self, t: &Taylor, k: usize) -> Taylor {
        let mut out = t.deriv(k);
        for m in 0..self.n {
            out = out.sub(&self.nl.at(&[m, k]).mul(&t.deriv(self.n + m)));
        }
        out
    }

    /// y^s delta_s = y^s d/dx^s - 2 G^m d/dy^m (the spray direction).
    pub fn spray_dir(&self, t: &Taylor) -> Taylor {
        let n = self.n;
        let mut out = self.pt.y_var(0).mul(&t.deriv(0));
        for s in 1..n {
            out = out.add(&self.pt.y_var(s).mul(&t.deriv(s)));
        }
        for m in 0..n {
            out = out.sub(&self.spray.at(&[m]).scale(2.0).mul(&t.deriv(n + m)));
        }
        out
    }

    fn compute_gamma(&self) -> TaylorTensor {
        let n = self.n;
        TaylorTensor::from_fn(n, 3, |idx| {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let mut acc: Option<Taylor> = None;
            for s in 0..n {
                let term = self
                    .delta(self.g.at(&[s, k]), j)
                    .add(&self.delta(self.g.at(&[j, s]), k))
                    .sub(&self.delta(self.g.at(&[j, k]), s));
                let piece = self.ginv.at(&[i, s]).mul(&term);
                acc = Some(match acc {
                    None => piece,
                    Some(a) => a.add(&piece),
                });
            }
            acc.unwrap().scale(0.5)
        })
    }

    /// L_ijk = C_ijk|s y^s with the Cartan connection; the y-contraction of
    /// the Cartan horizontal coefficients is N, so only N enters.
    fn compute_landsberg(&self) -> TaylorTensor {
        let n = self.n;
        TaylorTensor::from_fn(n, 3, |idx| {
            let (i, j, k) = (idx[0], idx[1], idx[2]);
            let mut out = self.spray_dir(self.c_low.at(&[i, j, k]));
            for m in 0..n {
                out = out.sub(&self.c_low.at(&[m, j, k]).mul(self.nl.at(&[m, i])));
                out = out.sub(&self.c_low.at(&[i, m, k]).mul(self.nl.at(&[m, j])));
                out = out.sub(&self.c_low.at(&[i, j, m]).mul(self.nl.at(&[m, k])));
            }
            out
        })
    }
}

/// g^{im} T_mjk... for a rank-3 lowered tensor: raise the first index.
fn mixed(ginv: &TaylorTensor, low: &TaylorTensor) -> TaylorTensor {
    let n = low.n;
    TaylorTensor::from_fn(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let mut acc: Option<Taylor> = None;
        for m in 0..n {
            let piece = ginv.at(&[i, m]).mul(low.at(&[m, j, k]));
            acc = Some(match acc {
                None => piece,
                Some(a) => a.add(&piece),
            });
        }
        acc.unwrap()
    })
}

/// Horizontal and vertical coefficient tensors of a connection at a point.
#[derive(Clone)]
pub(crate) struct ConnCoeffs {
    pub h: TaylorTensor,
    pub v: TaylorTensor,
}

/// Coefficient-level process shift in the adapted coframe. Pinned by:
/// matsumoto_c(Cartan) = Chern, matsumoto_l(Cartan) = Hashiguchi,
/// shen_c(Chern) = Shen; the Shen C-shift carries an F factor so that the
/// shifted horizontal coefficients stay 0-homogeneous.
pub(crate) fn apply_shift(geo: &Geometry, c: &ConnCoeffs, kind: ProcessKind) -> ConnCoeffs {
    match kind {
        ProcessKind::MatsumotoC => ConnCoeffs {
            h: c.h.clone(),
            v: c.v.sub(&geo.c_mix),
        },
        ProcessKind::MatsumotoL => ConnCoeffs {
            h: c.h.add(&geo.land_mix),
            v: c.v.clone(),
        },
        ProcessKind::ShenC => ConnCoeffs {
            h: c.h.sub(&geo.c_mix.scale_t(&geo.f)),
            v: c.v.clone(),
        },
        ProcessKind::ShenL => ConnCoeffs {
            h: c.h.clone(),
            v: c.v.sub(&geo.land_mix),
        },
    }
}

pub(crate) fn eval_recipe(geo: &Geometry, r: &Recipe) -> ConnCoeffs {
    let zero_v = || {
        let deg = geo.c_mix.v.iter().map(|t| t.deg).min().unwrap_or(0);
        TaylorTensor::zeros(&geo.pt.ctx, geo.n, 3, deg)
    };
    match r {
        Recipe::Named(kind) => match kind {
            ConnectionKind::Cartan => ConnCoeffs {
                h: geo.gamma.clone(),
                v: geo.c_mix.clone(),
            },
            ConnectionKind::Chern => ConnCoeffs {
                h: geo.gamma.clone(),
                v: zero_v(),
            },
            ConnectionKind::Berwald => ConnCoeffs {
                h: geo.berwald_h.clone(),
                v: zero_v(),
            },
            ConnectionKind::Hashiguchi => ConnCoeffs {
                h: geo.berwald_h.clone(),
                v: geo.c_mix.clone(),
            },
            ConnectionKind::Shen => {
                let chern = ConnCoeffs {
                    h: geo.gamma.clone(),
                    v: zero_v(),
                };
                apply_shift(geo, &chern, ProcessKind::ShenC)
            }
        },
        Recipe::Processed { base, process } => {
            let b = eval_recipe(geo, base);
            apply_shift(geo, &b, *process)
        }
    }
}

/// Builds a named connection. For the Berwald connection the coefficient
/// identity H^i_jk = dN^i_j/dy^k against the process path (Cartan H plus the
/// Landsberg shift) is checked at validation samples; disagreement is a hard
/// error because it pins the sign conventions.
pub fn build_connection(m: &MetricModel, kind: ConnectionKind) -> Result<FinslerConnection> {
    if kind == ConnectionKind::Berwald {
        let plan = SamplePlan {
            count: 5,
            seed: 99,
            fiber_floor: DEFAULT_FIBER_FLOOR,
        };
        let mut worst: f64 = 0.0;
        for (x, y) in sample_points(&m.chart_domain, &plan) {
            let geo = Geometry::new(m, &x, &y)?;
            let mut scale: f64 = 1.0;
            for flat in 0..geo.gamma.v.len() {
                scale = scale.max(geo.gamma.v[flat].value().abs());
            }
            for flat in 0..geo.berwald_h.v.len() {
                let process_path = geo.gamma.v[flat].value() + geo.land_mix.v[flat].value();
                worst = worst.max((geo.berwald_h.v[flat].value() - process_path).abs() / scale);
            }
        }
        if worst > 1e-7 {
            return Err(FinslerError::BerwaldIdentity { residual: worst });
        }
    }
    Ok(FinslerConnection {
        model: m.clone(),
        recipe: Recipe::Named(kind),
    })
}

/// Applies a process to a connection (recipe-level; evaluation is lazy).
pub fn apply_process(c: &FinslerConnection, kind: ProcessKind) -> FinslerConnection {
    FinslerConnection {
        model: c.model.clone(),
        recipe: Recipe::Processed {
            base: Box::new(c.recipe.clone()),
            process: kind,
        },
    }
}

/// Pointwise coefficient values (H, V) of a connection.
pub fn connection_coefficients(
    c: &FinslerConnection,
    x: &[f64],
    y: &[f64],
) -> Result<(DenseTensor, DenseTensor)> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    Ok((
        DenseTensor {
            n: geo.n,
            rank: 3,
            data: coeffs.h.v.iter().map(|t| t.value()).collect(),
            name: format!("H[{}]", c.name()),
        },
        DenseTensor {
            n: geo.n,
            rank: 3,
            data: coeffs.v.v.iter().map(|t| t.value()).collect(),
            name: format!("V[{}]", c.name()),
        },
    ))
}

/// hh-torsion S^i_kl = H^i_kl - H^i_lk and hv-torsion T^i_kl = V^i_kl.
#[derive(Debug, Clone)]
pub struct TorsionComponents {
    pub s: DenseTensor,
    pub t: DenseTensor,
}

pub fn torsion_components(c: &FinslerConnection, x: &[f64], y: &[f64]) -> Result<TorsionComponents> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    let n = geo.n;
    let mut s = vec![0.0; n * n * n];
    let mut t = vec![0.0; n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                s[(i * n + k) * n + l] =
                    coeffs.h.value(&[i, k, l]) - coeffs.h.value(&[i, l, k]);
                t[(i * n + k) * n + l] = coeffs.v.value(&[i, k, l]);
            }
        }
    }
    Ok(TorsionComponents {
        s: DenseTensor {
            n,
            rank: 3,
            data: s,
            name: "S".into(),
        },
        t: DenseTensor {
            n,
            rank: 3,
            data: t,
            name: "T".into(),
        },
    })
}

/// Index variance of one tensor slot, for covariant-derivative helpers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Upper,
    Lower,
}

fn cov_generic(
    geo: &Geometry,
    coeffs_tensor: &TaylorTensor,
    t: &TaylorTensor,
    slots: &[Slot],
    horizontal: bool,
) -> TaylorTensor {
    let n = geo.n;
    debug_assert_eq!(slots.len(), t.rank);
    TaylorTensor::from_fn(n, t.rank + 1, |idx| {
        let inner = &idx[..t.rank];
        let k = idx[t.rank];
        let base = t.at(inner);
        let mut out = if horizontal {
            geo.delta(base, k)
        } else {
            base.deriv(n + k)
        };
        let mut swapped = inner.to_vec();
        for (slot, &variance) in slots.iter().enumerate() {
            let orig = inner[slot];
            for m in 0..n {
                swapped[slot] = m;
                let term = match variance {
                    // X^{..i..} gains + X^{..m..} C^i_mk
                    Slot::Upper => t.at(&swapped).mul(coeffs_tensor.at(&[orig, m, k])),
                    // X_{..j..} gains - X_{..m..} C^m_jk
                    Slot::Lower => t
                        .at(&swapped)
                        .mul(coeffs_tensor.at(&[m, orig, k]))
                        .neg(),
                };
                out = out.add(&term);
            }
            swapped[slot] = orig;
        }
        out
    })
}

/// Horizontal covariant derivative: X|k = delta_k X + (H-terms per slot).
pub(crate) fn h_cov(
    geo: &Geometry,
    coeffs: &ConnCoeffs,
    t: &TaylorTensor,
    slots: &[Slot],
) -> TaylorTensor {
    cov_generic(geo, &coeffs.h, t, slots, true)
}

/// Vertical covariant derivative: X.k = d/dy^k X + (V-terms per slot).
pub(crate) fn v_cov(
    geo: &Geometry,
    coeffs: &ConnCoeffs,
    t: &TaylorTensor,
    slots: &[Slot],
) -> TaylorTensor {
    cov_generic(geo, &coeffs.v, t, slots, false)
}

/// Built-in tensor fields for the public covariant-derivative entry points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldSelector {
    /// Fundamental tensor g_ij.
    MetricG,
    /// Cartan torsion C_ijk, all indices down.
    CartanTorsion,
    /// The fiber coordinate field y^i.
    FiberVelocity,
    /// The scalar F^2.
    EnergyF2,
}

fn field_tensor(geo: &Geometry, field: FieldSelector) -> (TaylorTensor, Vec<Slot>) {
    match field {
        FieldSelector::MetricG => (geo.g.clone(), vec![Slot::Lower, Slot::Lower]),
        FieldSelector::CartanTorsion => (
            geo.c_low.clone(),
            vec![Slot::Lower, Slot::Lower, Slot::Lower],
        ),
        FieldSelector::FiberVelocity => (
            TaylorTensor::from_fn(geo.n, 1, |idx| geo.pt.y_var(idx[0])),
            vec![Slot::Upper],
        ),
        FieldSelector::EnergyF2 => (
            TaylorTensor {
                n: geo.n,
                rank: 0,
                v: vec![geo.pt.f2.clone()],
            },
            vec![],
        ),
    }
}

pub fn h_cov_deriv(
    c: &FinslerConnection,
    x: &[f64],
    y: &[f64],
    field: FieldSelector,
) -> Result<DenseTensor> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    let (t, slots) = field_tensor(&geo, field);
    let d = h_cov(&geo, &coeffs, &t, &slots);
    Ok(DenseTensor {
        n: geo.n,
        rank: d.rank,
        data: d.v.iter().map(|t| t.value()).collect(),
        name: format!("{:?}|k", field),
    })
}

pub fn v_cov_deriv(
    c: &FinslerConnection,
    x: &[f64],
    y: &[f64],
    field: FieldSelector,
) -> Result<DenseTensor> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    let (t, slots) = field_tensor(&geo, field);
    let d = v_cov(&geo, &coeffs, &t, &slots);
    Ok(DenseTensor {
        n: geo.n,
        rank: d.rank,
        data: d.v.iter().map(|t| t.value()).collect(),
        name: format!("{:?}.k", field),
    })
}

/// Horizontal and vertical metric defects g_ij|k and g_ij.k.
#[derive(Debug, Clone)]
pub struct CompatibilityDefect {
    pub horizontal: Tensor3,
    pub vertical: Tensor3,
}

pub fn compatibility_defect(
    c: &FinslerConnection,
    x: &[f64],
    y: &[f64],
) -> Result<CompatibilityDefect> {
    let geo = Geometry::new(&c.model, x, y)?;
    let coeffs = eval_recipe(&geo, &c.recipe);
    let slots = [Slot::Lower, Slot::Lower];
    let dh = h_cov(&geo, &coeffs, &geo.g, &slots);
    let dv = v_cov(&geo, &coeffs, &geo.g, &slots);
    Ok(CompatibilityDefect {
        horizontal: Tensor3::from_fn(geo.n, "g|k", |i, j, k| dh.value(&[i, j, k])),
        vertical: Tensor3::from_fn(geo.n, "g.k", |i, j, k| dv.value(&[i, j, k])),
    })
}

/// Landsberg curvature L, mean Landsberg J and generalized Landsberg Lbar,
/// all with the Cartan connection.
#[derive(Debug, Clone)]
pub struct LandsbergSuite {
    pub l: Tensor3,
    pub j: MeanVector,
    pub lbar: Tensor3,
}

pub fn landsberg_suite(m: &MetricModel, x: &[f64], y: &[f64]) -> Result<LandsbergSuite> {
    let geo = Geometry::new(m, x, y)?;
    let n = geo.n;
    let l = Tensor3::from_fn(n, "L", |i, j, k| geo.land_low.value(&[i, j, k]));
    let mut j_vec = vec![0.0; n];
    for i in 0..n {
        for a in 0..n {
            for b in 0..n {
                j_vec[i] += geo.ginv.value(&[a, b]) * l.get(i, a, b);
            }
        }
    }
    // Lbar_ijk = L_ijk|s y^s, same contraction pattern as L itself.
    let lbar_t = TaylorTensor::from_fn(n, 3, |idx| {
        let (i, j, k) = (idx[0], idx[1], idx[2]);
        let mut out = geo.spray_dir(geo.land_low.at(&[i, j, k]));
        for s in 0..n {
            out = out.sub(&geo.land_low.at(&[s, j, k]).mul(geo.nl.at(&[s, i])));
            out = out.sub(&geo.land_low.at(&[i, s, k]).mul(geo.nl.at(&[s, j])));
            out = out.sub(&geo.land_low.at(&[i, j, s]).mul(geo.nl.at(&[s, k])));
        }
        out
    });
    Ok(LandsbergSuite {
        l,
        j: MeanVector {
            n,
            data: j_vec,
            name: "J",
        },
        lbar: Tensor3::from_fn(n, "Lbar", |i, j, k| lbar_t.value(&[i, j, k])),
    })
}
