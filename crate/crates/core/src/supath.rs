//! su-paths, periodic cycle functionals and accessibility certificates.
//!
//! An su-path from `x_0` is a list of legs `x_{i+1} = leg_kind(x_i, u_i)`. The
//! periodic cycle functional of `tau` along one leg is the leafwise integral
//! `beta_kind(x_i, x_{i+1})`, and the path functional is their sum. Sliding
//! each vertex back by the running sum `t_k` turns an su-path of the old flow
//! into one of the time-changed flow, and an su-cycle at `x` into a path from
//! `x` to `g^tau_{-PCF}(x)`. A cycle family whose functionals take both signs
//! therefore puts an orbit segment through `x` inside its accessibility class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_tol, Error, Result};
use crate::foliation::{beta, phi, LeafPoint, MAX_LEG};
use crate::model::{CatSuspension, FlowModel, LegKind, PhasePoint};
use crate::stats::{par_map, sample_points, try_par_map, Estimate};
use crate::timechange::TimeChange;

/// Largest side accepted by [`quad_cycle`].
pub const MAX_QUAD_SIDE: f64 = 0.1;

/// Distance below which a path counts as closed.
pub const CYCLE_TOL: f64 = 1e-10;

/// Distance allowed between a path end and the orbit target in [`orbit_defect`].
pub const ENDPOINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuLeg {
    pub kind: LegKind,
    pub u: f64,
}

impl SuLeg {
    pub fn stable(u: f64) -> Self {
        Self { kind: LegKind::Stable, u }
    }

    pub fn unstable(u: f64) -> Self {
        Self { kind: LegKind::Unstable, u }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SuPathRecord {
    start: PhasePoint,
    legs: Vec<SuLeg>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SuPathRecord")]
pub struct SuPath {
    start: PhasePoint,
    legs: Vec<SuLeg>,
}

impl TryFrom<SuPathRecord> for SuPath {
    type Error = Error;

    fn try_from(r: SuPathRecord) -> Result<Self> {
        SuPath::new(r.start, r.legs)
    }
}

impl SuPath {
    pub fn new(start: PhasePoint, legs: Vec<SuLeg>) -> Result<Self> {
        if let Some(l) = legs.iter().find(|l| !(l.u.abs() <= MAX_LEG)) {
            return Err(Error::NonLocalLeg { u: l.u, bound: MAX_LEG });
        }
        Ok(Self { start, legs })
    }

    pub fn start(&self) -> &PhasePoint {
        &self.start
    }

    pub fn legs(&self) -> &[SuLeg] {
        &self.legs
    }

    /// `x_0, ..., x_n`.
    pub fn vertices(&self, model: &CatSuspension) -> Vec<PhasePoint> {
        let mut out = Vec::with_capacity(self.legs.len() + 1);
        let mut p = self.start;
        out.push(p);
        for l in &self.legs {
            p = model.leg(&p, l.kind, l.u);
            out.push(p);
        }
        out
    }

    pub fn end(&self, model: &CatSuspension) -> PhasePoint {
        *self.vertices(model).last().expect("vertex list holds the start")
    }

    pub fn is_cycle(&self, model: &CatSuspension) -> bool {
        model.dist(&self.end(model), &self.start) <= CYCLE_TOL
    }

    /// The same legs applied at another start point.
    pub fn translated(&self, start: PhasePoint) -> Self {
        Self { start, legs: self.legs.clone() }
    }

    /// The path traversed backwards, from the end point to the start.
    pub fn reversed(&self, model: &CatSuspension) -> Self {
        let legs = self.legs.iter().rev().map(|l| SuLeg { kind: l.kind, u: -l.u }).collect();
        Self { start: self.end(model), legs }
    }

    /// This path followed by `other`, which must start where this one ends.
    pub fn then(&self, other: &SuPath) -> Self {
        let mut legs = self.legs.clone();
        legs.extend_from_slice(&other.legs);
        Self { start: self.start, legs }
    }
}

/// The image of an su-path under the slide transport.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportedPath {
    /// `points[k] = g^tau_{-t_k}(x_k)`, with `t_0 = 0`.
    pub points: Vec<PhasePoint>,
    /// `t_1, ..., t_n`.
    pub slide_times: Vec<f64>,
    pub total_pcf: f64,
}

/// `PCF_{x, x'}(tau)` for `x' = leg_kind(x, u)`.
pub fn pcf_leg(tc: &TimeChange, x: &PhasePoint, kind: LegKind, u: f64, tol: f64) -> Result<f64> {
    Ok(beta(tc, &LeafPoint::new(*x, kind, u)?, tol)?.value)
}

fn leg_values(tc: &TimeChange, path: &SuPath, tol: f64) -> Result<(Vec<PhasePoint>, Vec<f64>)> {
    check_tol(tol)?;
    let vertices = path.vertices(tc.model());
    let values =
        path.legs.iter().zip(&vertices).map(|(l, x)| pcf_leg(tc, x, l.kind, l.u, tol)).collect::<Result<Vec<_>>>()?;
    Ok((vertices, values))
}

/// Sum of the leg functionals.
pub fn pcf_path(tc: &TimeChange, path: &SuPath, tol: f64) -> Result<f64> {
    let (_, values) = leg_values(tc, path, tol)?;
    let mut s = crate::quadrature::CompensatedSum::new();
    values.iter().for_each(|&v| s.add(v));
    Ok(s.value())
}

pub fn transport(tc: &TimeChange, path: &SuPath, tol: f64) -> Result<TransportedPath> {
    let (vertices, values) = leg_values(tc, path, tol)?;
    let mut s = crate::quadrature::CompensatedSum::new();
    let mut points = Vec::with_capacity(vertices.len());
    let mut slide_times = Vec::with_capacity(values.len());
    points.push(vertices[0]);
    for (x, v) in vertices[1..].iter().zip(&values) {
        s.add(*v);
        let t = s.value();
        slide_times.push(t);
        points.push(tc.flow_tau(x, -t, tol)?);
    }
    Ok(TransportedPath { points, slide_times, total_pcf: s.value() })
}

/// Consistency measurements of a transported path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransportCheck {
    /// `dist(points[n], g^tau_{-PCF}(x_n))`.
    pub endpoint_defect: f64,
    /// Largest `dist(points[k+1], Phi_{points[k]}(y_k))`, where `y_k` is the old-leaf
    /// point of `points[k]` on the orbit of `x_{k+1}`. This rebuilds each
    /// transported leg from the graph construction at the transported vertex.
    pub composition_defect: f64,
    /// Largest ratio `dist(g^tau_t p, g^tau_t q) / dist(p, q)` over transported
    /// legs `(p, q)`, with `t = horizon` for stable and `t = -horizon` for unstable legs.
    pub leaf_ratio: f64,
}

pub fn check_transport(tc: &TimeChange, path: &SuPath, horizon: f64, tol: f64) -> Result<TransportCheck> {
    let model = tc.model();
    let tp = transport(tc, path, tol)?;
    let vertices = path.vertices(model);
    let n = path.legs.len();
    let end_target = tc.flow_tau(&vertices[n], -tp.total_pcf, tol)?;
    let endpoint_defect = model.dist(&tp.points[n], &end_target);
    let lambda = model.lambda();
    let mut composition_defect: f64 = 0.0;
    let mut leaf_ratio: f64 = 0.0;
    for (k, leg) in path.legs.iter().enumerate() {
        let t_k = if k == 0 { 0.0 } else { tp.slide_times[k - 1] };
        let a_k = tc.alpha(&vertices[k], -t_k, tol)?.value;
        let crossings = model.crossings(&vertices[k], a_k) as i32;
        let u = match leg.kind {
            LegKind::Stable => leg.u * lambda.powi(-crossings),
            LegKind::Unstable => leg.u * lambda.powi(crossings),
        };
        let z = tp.points[k];
        let rebuilt = phi(tc, &LeafPoint::new(z, leg.kind, u)?, tol)?;
        composition_defect = composition_defect.max(model.dist(&rebuilt, &tp.points[k + 1]));
        let (p, q) = (tp.points[k], tp.points[k + 1]);
        let d0 = model.dist(&p, &q);
        if d0 > 0.0 {
            let t = match leg.kind {
                LegKind::Stable => horizon,
                LegKind::Unstable => -horizon,
            };
            let d1 = model.dist(&tc.flow_tau(&p, t, tol)?, &tc.flow_tau(&q, t, tol)?);
            leaf_ratio = leaf_ratio.max(d1 / d0);
        }
    }
    Ok(TransportCheck { endpoint_defect, composition_defect, leaf_ratio })
}

/// Legs `(s, u), (u, v), (s, -u), (u, -v)` at `x`.
pub fn quad_cycle(x: PhasePoint, u: f64, v: f64) -> Result<SuPath> {
    for side in [u, v] {
        if !(side.abs() <= MAX_QUAD_SIDE) {
            return Err(Error::NonLocalLeg { u: side, bound: MAX_QUAD_SIDE });
        }
    }
    SuPath::new(x, vec![SuLeg::stable(u), SuLeg::unstable(v), SuLeg::stable(-u), SuLeg::unstable(-v)])
}

/// PCF of the quadrilateral at `x`; the transported cycle ends at `g^tau_{-PCF}(x)`.
pub fn holonomy_displacement(tc: &TimeChange, x: &PhasePoint, u: f64, v: f64, tol: f64) -> Result<f64> {
    pcf_path(tc, &quad_cycle(*x, u, v)?, tol)
}

/// Outcome of a quadrilateral sweep around one anchor.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EngulfCertificate {
    pub anchor: PhasePoint,
    pub grid: Vec<(f64, f64)>,
    pub displacements: Vec<f64>,
    /// Some displacement exceeds `tol` and some is below `-tol`.
    pub both_signs: bool,
    pub max_abs: f64,
    /// `min(max positive, max |negative|)`: the orbit segment
    /// `g^tau_t(x), t in [-max_positive, max_negative]` is reached by the
    /// transported cycles; this is the shorter half-length.
    pub margin: f64,
    pub covered: (f64, f64),
    pub tol: f64,
}

pub fn engulf_sweep(tc: &TimeChange, x: &PhasePoint, grid: &[(f64, f64)], tol: f64) -> Result<EngulfCertificate> {
    check_tol(tol)?;
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty size grid".into()));
    }
    let displacements =
        grid.iter().map(|&(u, v)| holonomy_displacement(tc, x, u, v, tol)).collect::<Result<Vec<_>>>()?;
    let max_pos = displacements.iter().copied().fold(0.0, f64::max);
    let max_neg = displacements.iter().map(|d| -d).fold(0.0, f64::max);
    let max_abs = max_pos.max(max_neg);
    Ok(EngulfCertificate {
        anchor: *x,
        grid: grid.to_vec(),
        both_signs: max_pos > tol && max_neg > tol,
        max_abs,
        margin: max_pos.min(max_neg),
        covered: (-max_pos, max_neg),
        displacements,
        tol,
    })
}

/// Outcome of scanning Haar-random anchors for an engulfing sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccessSearch {
    pub certificate: EngulfCertificate,
    /// Index of the certifying anchor in draw order (the best one if none certifies).
    pub anchor_index: usize,
    pub anchors_tried: usize,
}

/// Draws up to `max_anchors` anchors and returns the first whose sweep attains
/// both signs, or the one with the largest margin if none does.
pub fn find_engulfing_anchor<R: Rng + ?Sized>(
    tc: &TimeChange,
    grid: &[(f64, f64)],
    max_anchors: usize,
    rng: &mut R,
    tol: f64,
) -> Result<AccessSearch> {
    if max_anchors == 0 {
        return Err(Error::InvalidArgument("need at least one anchor".into()));
    }
    let mut best: Option<(usize, EngulfCertificate)> = None;
    for i in 0..max_anchors {
        let x = tc.model().sample(rng);
        let cert = engulf_sweep(tc, &x, grid, tol)?;
        if cert.both_signs {
            return Ok(AccessSearch { certificate: cert, anchor_index: i, anchors_tried: i + 1 });
        }
        if best.as_ref().is_none_or(|(_, b)| cert.margin > b.margin) {
            best = Some((i, cert));
        }
    }
    let (anchor_index, certificate) = best.expect("at least one anchor was drawn");
    Ok(AccessSearch { certificate, anchor_index, anchors_tried: max_anchors })
}

/// The square grid `{+-a}^2` over the given side lengths.
pub fn symmetric_grid(sides: &[f64]) -> Vec<(f64, f64)> {
    let signed: Vec<f64> = sides.iter().flat_map(|&a| [-a, a]).collect();
    signed.iter().flat_map(|&u| signed.iter().map(move |&v| (u, v))).collect()
}

/// `D = PCF(path) - v(x, r)` for a path from `x` ending at `g_r(x)`.
pub fn orbit_defect(tc: &TimeChange, path: &SuPath, r: f64, tol: f64) -> Result<f64> {
    let model = tc.model();
    let target = model.flow(path.start(), r);
    let miss = model.dist(&path.end(model), &target);
    if miss > ENDPOINT_TOL {
        return Err(Error::EndpointMismatch(miss));
    }
    Ok(pcf_path(tc, path, tol)? - tc.v_cocycle(path.start(), r, tol)?.value)
}

/// Mean PCF of the translated cycles `C_y` (same legs at Haar-random `y`).
pub fn haar_average_pcf<R: Rng + ?Sized>(
    tc: &TimeChange,
    legs: &[SuLeg],
    n_samples: usize,
    rng: &mut R,
    tol: f64,
) -> Result<Estimate> {
    check_tol(tol)?;
    let template = SuPath::new(PhasePoint::new(0.0, 0.0, 0.0), legs.to_vec())?;
    let ys = sample_points(tc.model(), n_samples, rng);
    let values = try_par_map(&ys, |y| pcf_path(tc, &template.translated(*y), tol))?;
    Ok(Estimate::from_values(&values))
}

/// Mean of `int_0^r tau(g_t y) dt` over Haar-random `y`.
pub fn haar_average_orbit<R: Rng + ?Sized>(
    tc: &TimeChange,
    r: f64,
    n_samples: usize,
    rng: &mut R,
    tol: f64,
) -> Result<Estimate> {
    check_tol(tol)?;
    let ys = sample_points(tc.model(), n_samples, rng);
    let values = try_par_map(&ys, |y| tc.v_cocycle(y, r, tol).map(|c| c.value))?;
    Ok(Estimate::from_values(&values))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum CoboundaryVerdict {
    Vanishing { max_abs: f64 },
    Witnessed { cycle: SuPath, value: f64 },
}

impl CoboundaryVerdict {
    pub fn is_vanishing(&self) -> bool {
        matches!(self, Self::Vanishing { .. })
    }
}

/// `Vanishing` iff every cycle in the family has `|PCF| <= tol`; otherwise the
/// first violating cycle in family order.
pub fn coboundary_test(tc: &TimeChange, family: &[SuPath], tol: f64) -> Result<CoboundaryVerdict> {
    check_tol(tol)?;
    if family.is_empty() {
        return Err(Error::InvalidArgument("empty cycle family".into()));
    }
    // leg tolerance well below the verdict threshold
    let leg_tol = (tol * 1e-3).max(1e-15);
    let values = par_map(family, |c| pcf_path(tc, c, leg_tol));
    let mut max_abs: f64 = 0.0;
    for (c, v) in family.iter().zip(values) {
        let v = v?;
        if v.abs() > tol {
            return Ok(CoboundaryVerdict::Witnessed { cycle: c.clone(), value: v });
        }
        max_abs = max_abs.max(v.abs());
    }
    Ok(CoboundaryVerdict::Vanishing { max_abs })
}

/// Quadrilaterals with the given sides at each anchor, anchor-major.
pub fn quad_family(anchors: &[PhasePoint], sides: &[(f64, f64)]) -> Result<Vec<SuPath>> {
    anchors.iter().flat_map(|x| sides.iter().map(move |&(u, v)| quad_cycle(*x, u, v))).collect()
}
