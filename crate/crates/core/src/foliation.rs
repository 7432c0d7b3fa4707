//! Stable and unstable leaves of the time-changed flow by the graph construction.
//!
//! For `y` on the old stable leaf of `x`,
//!
//! ```text
//! beta_s(x, y) = int_0^inf (tau(g_r x) - tau(g_r y)) dr
//! beta_u(x, y) = -int_0^inf (tau(g_-r x) - tau(g_-r y)) dr
//! ```
//!
//! and `Phi_x(y) = g^tau_{-beta(x, y)}(y)` lies on the new leaf of `x`. On the cat
//! suspension the two orbits share their roof coordinate and their bases differ
//! by `lambda^-n u e_s` after `n` crossings, so the integral is a geometric sum
//! of per-panel differences. Coboundary terms contribute only on the first,
//! partial panel because `w` vanishes at both roof ends.

use crate::error::{check_tol, Error, Result};
use crate::model::{cat, cat_inv, FlowModel, LegKind, PhasePoint, TangentVector};
use crate::timechange::{fixed_to_f64, window, window_integral, window_mass, TimeChange};

/// Largest leg parameter accepted for a leaf point.
pub const MAX_LEG: f64 = 0.2;

const MAX_PANELS: usize = 400;

/// A point `leg_kind(anchor, u)` carried together with its anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPoint {
    anchor: PhasePoint,
    kind: LegKind,
    u: f64,
}

impl LeafPoint {
    pub fn new(anchor: PhasePoint, kind: LegKind, u: f64) -> Result<Self> {
        if !(u.abs() <= MAX_LEG) {
            return Err(Error::NonLocalLeg { u, bound: MAX_LEG });
        }
        Ok(Self { anchor, kind, u })
    }

    pub fn stable(anchor: PhasePoint, u: f64) -> Result<Self> {
        Self::new(anchor, LegKind::Stable, u)
    }

    pub fn unstable(anchor: PhasePoint, u: f64) -> Result<Self> {
        Self::new(anchor, LegKind::Unstable, u)
    }

    pub fn anchor(&self) -> &PhasePoint {
        &self.anchor
    }

    pub fn kind(&self) -> LegKind {
        self.kind
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    pub fn point(&self, tc: &TimeChange) -> PhasePoint {
        tc.model().leg(&self.anchor, self.kind, self.u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaValue {
    pub value: f64,
    /// Orbit time after which the integral is replaced by its tail bound.
    pub truncation_t: f64,
    pub err_bound: f64,
}

/// Number of panels after which the tail `lip * |u| * W * lambda^-N / (1 - 1/lambda)`
/// drops below `tol / 2`.
fn panel_count(tc: &TimeChange, scale: f64, tol: f64) -> usize {
    let lambda = tc.model().lambda();
    let c = tc.lip_base() * scale * window_mass() / (1.0 - 1.0 / lambda);
    if c == 0.0 {
        return 1;
    }
    let n = ((c / (0.5 * tol)).ln() / lambda.ln()).ceil();
    if n < 1.0 {
        1
    } else {
        (n as usize).min(MAX_PANELS)
    }
}

fn tail_bound(tc: &TimeChange, scale: f64, n: usize) -> f64 {
    let lambda = tc.model().lambda();
    tc.lip_base() * scale * window_mass() * lambda.powi(-(n as i32)) / (1.0 - 1.0 / lambda)
}

fn truncation_time(kind: LegKind, s0: f64, n: usize) -> f64 {
    match kind {
        LegKind::Stable => n as f64 - s0,
        LegKind::Unstable => s0 + n as f64 - 1.0,
    }
}

/// `beta_kind(anchor, point)`.
pub fn beta(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<BetaValue> {
    check_tol(tol)?;
    let x = y.anchor;
    let lambda = tc.model().lambda();
    let dir = tc.model().direction(y.kind);
    let n_panels = panel_count(tc, y.u.abs(), tol);
    let s0 = x.roof();
    let w_full = window_integral(0.0, 1.0);
    let mut base = x.base_fixed();
    let mut sum = crate::quadrature::CompensatedSum::new();
    let mut quad_err = 0.0;
    for n in 0..n_panels {
        let xb = fixed_to_f64(base);
        let scale = y.u * lambda.powi(-(n as i32));
        let (dc, dd) = tc.profile_diff(xb, [scale * dir[0], scale * dir[1]]);
        match y.kind {
            LegKind::Stable => {
                let (wq, wlo) = if n == 0 { (window_integral(s0, 1.0), window(s0)) } else { (w_full, 0.0) };
                sum.add(dc * wq.value - dd * wlo);
                quad_err += dc.abs() * wq.err;
                base = cat(base);
            }
            LegKind::Unstable => {
                let (wq, whi) = if n == 0 { (window_integral(0.0, s0), window(s0)) } else { (w_full, 0.0) };
                sum.add(-(dc * wq.value + dd * whi));
                quad_err += dc.abs() * wq.err;
                base = cat_inv(base);
            }
        }
    }
    Ok(BetaValue {
        value: sum.value(),
        truncation_t: truncation_time(y.kind, s0, n_panels),
        err_bound: tail_bound(tc, y.u.abs(), n_panels) + quad_err,
    })
}

fn expect_kind(y: &LeafPoint, kind: LegKind) -> Result<()> {
    if y.kind == kind {
        Ok(())
    } else {
        Err(Error::WrongLeaf { expected: kind, got: y.kind })
    }
}

pub fn beta_s(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<BetaValue> {
    expect_kind(y, LegKind::Stable)?;
    beta(tc, y, tol)
}

pub fn beta_u(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<BetaValue> {
    expect_kind(y, LegKind::Unstable)?;
    beta(tc, y, tol)
}

/// `Phi_x(y) = g^tau_{-beta(x, y)}(y)`, the point of the new leaf of `x` on the orbit of `y`.
pub fn phi(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<PhasePoint> {
    let b = beta(tc, y, tol)?;
    tc.flow_tau(&y.point(tc), -b.value, tol)
}

pub fn phi_s(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<PhasePoint> {
    expect_kind(y, LegKind::Stable)?;
    phi(tc, y, tol)
}

pub fn phi_u(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<PhasePoint> {
    expect_kind(y, LegKind::Unstable)?;
    phi(tc, y, tol)
}

/// Original-flow time `T` with `Phi_x(y) = g_T(y)`, i.e. `v(y, T) = -beta(x, y)`.
pub fn graph_time(tc: &TimeChange, y: &LeafPoint, tol: f64) -> Result<f64> {
    let b = beta(tc, y, tol)?;
    Ok(tc.alpha(&y.point(tc), -b.value, tol)?.value)
}

fn leaf_coefficient(v: &TangentVector, kind: LegKind) -> Result<f64> {
    let (along, off) = match kind {
        LegKind::Stable => (v.xi_s, [v.xi_u, v.xi_c]),
        LegKind::Unstable => (v.xi_u, [v.xi_s, v.xi_c]),
    };
    if off != [0.0, 0.0] {
        return Err(Error::NotInLeaf { kind });
    }
    Ok(along)
}

/// Derivative of `beta_kind(x, .)` at `x` along the leaf vector `v`:
/// `-int_0^inf d_{Dg_t v} tau (g_t x) dt` for the stable leaf, and the mirrored
/// backward integral with a plus sign for the unstable one.
pub fn dbeta(tc: &TimeChange, x: &PhasePoint, kind: LegKind, v: TangentVector, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    let xi = leaf_coefficient(&v, kind)?;
    if xi == 0.0 {
        return Ok(0.0);
    }
    let lambda = tc.model().lambda();
    let e = tc.model().direction(kind);
    let n_panels = panel_count(tc, xi.abs(), tol);
    let s0 = x.roof();
    let w_full = window_mass();
    let mut base = x.base_fixed();
    let mut sum = crate::quadrature::CompensatedSum::new();
    for n in 0..n_panels {
        let (gc, gd) = tc.profile_grad(fixed_to_f64(base));
        let dc = gc[0] * e[0] + gc[1] * e[1];
        let dd = gd[0] * e[0] + gd[1] * e[1];
        let k = lambda.powi(-(n as i32));
        match kind {
            LegKind::Stable => {
                let (wq, wlo) = if n == 0 { (window_integral(s0, 1.0).value, window(s0)) } else { (w_full, 0.0) };
                sum.add(-k * (dc * wq - dd * wlo));
                base = cat(base);
            }
            LegKind::Unstable => {
                let (wq, whi) = if n == 0 { (window_integral(0.0, s0).value, window(s0)) } else { (w_full, 0.0) };
                sum.add(k * (dc * wq + dd * whi));
                base = cat_inv(base);
            }
        }
    }
    Ok(xi * sum.value())
}

pub fn dbeta_s(tc: &TimeChange, x: &PhasePoint, v: TangentVector, tol: f64) -> Result<f64> {
    dbeta(tc, x, LegKind::Stable, v, tol)
}

pub fn dbeta_u(tc: &TimeChange, x: &PhasePoint, v: TangentVector, tol: f64) -> Result<f64> {
    dbeta(tc, x, LegKind::Unstable, v, tol)
}

/// `L_x v = v - (d_v beta(x, .) / tau(x)) X`, the tangent of `Phi_x` at `x`.
pub fn lift(tc: &TimeChange, x: &PhasePoint, kind: LegKind, v: TangentVector, tol: f64) -> Result<TangentVector> {
    let db = dbeta(tc, x, kind, v, tol)?;
    Ok(TangentVector::new(v.xi_s, v.xi_u, v.xi_c - db / tc.tau(x)))
}

pub fn lift_s(tc: &TimeChange, x: &PhasePoint, v: TangentVector, tol: f64) -> Result<TangentVector> {
    lift(tc, x, LegKind::Stable, v, tol)
}

pub fn lift_u(tc: &TimeChange, x: &PhasePoint, v: TangentVector, tol: f64) -> Result<TangentVector> {
    lift(tc, x, LegKind::Unstable, v, tol)
}

/// The transported splitting at a point, each direction in graph normal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFrame {
    pub e_s_tilde: TangentVector,
    pub e_u_tilde: TangentVector,
    pub e_c: TangentVector,
}

impl SplitFrame {
    pub fn at(tc: &TimeChange, x: &PhasePoint, tol: f64) -> Result<Self> {
        Ok(Self {
            e_s_tilde: lift_s(tc, x, TangentVector::stable(), tol)?,
            e_u_tilde: lift_u(tc, x, TangentVector::unstable(), tol)?,
            e_c: TangentVector::flow_direction(),
        })
    }
}

/// Distances below this are treated as the floating-point floor of the metric.
pub const DIST_FLOOR: f64 = 1e-14;

/// Least-squares slope of `log dist(g^tau_t x, g^tau_t Phi_x(leg_s(x, u)))`
/// over `n_samples_along` equally spaced times in `[1, t_max]`.
pub fn contraction_rate(
    tc: &TimeChange,
    x: &PhasePoint,
    u: f64,
    t_max: f64,
    n_samples_along: usize,
    tol: f64,
) -> Result<f64> {
    if !(t_max > 1.0) || n_samples_along < 2 {
        return Err(Error::InvalidArgument(format!(
            "need t_max > 1 and at least two samples, got t_max = {t_max}, n = {n_samples_along}"
        )));
    }
    let z = phi_s(tc, &LeafPoint::stable(*x, u)?, tol)?;
    let mut ts = Vec::with_capacity(n_samples_along);
    let mut logs = Vec::with_capacity(n_samples_along);
    for i in 0..n_samples_along {
        let t = 1.0 + (t_max - 1.0) * i as f64 / (n_samples_along - 1) as f64;
        let d = tc.model().dist(&tc.flow_tau(x, t, tol)?, &tc.flow_tau(&z, t, tol)?);
        if d < DIST_FLOOR {
            return Err(Error::DegenerateFit { t, dist: d });
        }
        ts.push(t);
        logs.push(d.ln());
    }
    Ok(ls_slope(&ts, &logs))
}

pub(crate) fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
