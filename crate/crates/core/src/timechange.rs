//! Time changes `tau` of the suspension flow and their cocycles.
//!
//! The time changes handled here have the separable form
//!
//! ```text
//! tau(x, s) = c0 + w(s) * C(x) + w'(s) * D(x)
//! C(x) = sum_i eps_i cos(2 pi k_i . x + phase_i)
//! D(x) = sum_j amp_j cos(2 pi k_j . x + phase_j)
//! ```
//!
//! where `w(s) = exp(4 - 1/(s(1-s)))` is a flat bump on the roof. Since `w` and
//! all its derivatives vanish at `s = 0, 1`, every such `tau` is smooth on the
//! quotient. The `D` part is the flow derivative of `xi = w(s) D(x)`, so a spec
//! with only `c0` and coboundary terms is cohomologous to the constant `c0`.
//!
//! Orbit integrals are split at roof crossings: along a panel the base is
//! frozen, and `int tau ds` reduces to `c0 (b - a) + C W(a,b) + D (w(b) - w(a))`
//! with `W(a,b) = int_a^b w` from a cached adaptive-Simpson primitive.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{check_tol, Error, Result};
use crate::model::{cat, cat_inv, split_time, CatSuspension, FlowModel, PhasePoint, TangentVector};
use crate::quadrature::{adaptive_simpson_depth, CompensatedSum, Quad};
use crate::roots::{solve_increasing, SolveOptions};

const TAU: f64 = 2.0 * PI;

/// The flat roof window `w(s) = exp(4 - 1/(s(1-s)))` on `(0,1)`, zero outside.
pub fn window(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    (4.0 - 1.0 / (s * (1.0 - s))).exp()
}

pub fn window_d1(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let q = s * (1.0 - s);
    window(s) * (1.0 - 2.0 * s) / (q * q)
}

pub fn window_d2(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        return 0.0;
    }
    let q = s * (1.0 - s);
    let g = (1.0 - 2.0 * s) / (q * q);
    let dg = (-2.0 * q - 2.0 * (1.0 - 2.0 * s).powi(2)) / (q * q * q);
    window(s) * (g * g + dg)
}

const PRIM_CELLS: usize = 1024;

/// Cached primitive of the window on a uniform grid, refined per call by
/// adaptive Simpson on the last partial cell.
struct WindowTable {
    prim: Vec<f64>,
    err: f64,
    max_abs_d1: f64,
}

fn window_table() -> &'static WindowTable {
    static TABLE: OnceLock<WindowTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let h = 1.0 / PRIM_CELLS as f64;
        let mut prim = Vec::with_capacity(PRIM_CELLS + 1);
        let mut acc = CompensatedSum::new();
        let mut err = 0.0;
        prim.push(0.0);
        for j in 0..PRIM_CELLS {
            let q = adaptive_simpson_depth(window, j as f64 * h, (j + 1) as f64 * h, 1e-19, 30);
            acc.add(q.value);
            err += q.err;
            prim.push(acc.value());
        }
        // dense scan, then a local golden-section refinement of the peak of |w'|
        let n = 20_000;
        let (mut best_s, mut best) = (0.0, 0.0);
        for i in 1..n {
            let s = i as f64 / n as f64;
            let v = window_d1(s).abs();
            if v > best {
                best = v;
                best_s = s;
            }
        }
        let (mut a, mut b) = (best_s - 1.0 / n as f64, best_s + 1.0 / n as f64);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let c = b - g * (b - a);
            let d = a + g * (b - a);
            if window_d1(c).abs() > window_d1(d).abs() {
                b = d;
            } else {
                a = c;
            }
        }
        let max_abs_d1 = window_d1(0.5 * (a + b)).abs().max(best) * (1.0 + 1e-9);
        WindowTable { prim, err, max_abs_d1 }
    })
}

fn window_prim(s: f64) -> Quad {
    let t = window_table();
    if s <= 0.0 {
        return Quad { value: 0.0, err: 0.0 };
    }
    if s >= 1.0 {
        return Quad { value: t.prim[PRIM_CELLS], err: t.err };
    }
    let j = ((s * PRIM_CELLS as f64) as usize).min(PRIM_CELLS - 1);
    let node = j as f64 / PRIM_CELLS as f64;
    let q = adaptive_simpson_depth(window, node, s, 1e-19, 30);
    Quad { value: t.prim[j] + q.value, err: t.err + q.err }
}

/// `int_a^b w(s) ds` for `0 <= a <= b <= 1`.
pub fn window_integral(a: f64, b: f64) -> Quad {
    if a == b {
        return Quad { value: 0.0, err: 0.0 };
    }
    if a <= 0.0 && b >= 1.0 {
        return window_prim(1.0);
    }
    let pa = window_prim(a);
    let pb = window_prim(b);
    Quad { value: pb.value - pa.value, err: pa.err + pb.err }
}

/// `int_0^1 w`.
pub fn window_mass() -> f64 {
    window_prim(1.0).value
}

/// `sup |w'|`.
pub fn window_d1_max() -> f64 {
    window_table().max_abs_d1
}

/// A roof-windowed trigonometric term `eps * w(s) * cos(2 pi k . x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub eps: f64,
    pub k: [i64; 2],
    #[serde(default)]
    pub phase: f64,
}

/// A coboundary term `amp * w'(s) * cos(2 pi k . x + phase)`, the flow
/// derivative of `amp * w(s) * cos(2 pi k . x + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoboundaryTerm {
    pub amp: f64,
    pub k: [i64; 2],
    #[serde(default)]
    pub phase: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeChangeRecord {
    c0: f64,
    #[serde(default)]
    bumps: Vec<Bump>,
    #[serde(default)]
    coboundary: Vec<CoboundaryTerm>,
}

/// A positive smooth time change on the suspension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TimeChangeRecord")]
pub struct TimeChangeSpec {
    c0: f64,
    bumps: Vec<Bump>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    coboundary: Vec<CoboundaryTerm>,
}

impl TryFrom<TimeChangeRecord> for TimeChangeSpec {
    type Error = Error;

    fn try_from(r: TimeChangeRecord) -> Result<Self> {
        TimeChangeSpec::new(r.c0, r.bumps, r.coboundary)
    }
}

impl TimeChangeSpec {
    pub fn new(c0: f64, bumps: Vec<Bump>, coboundary: Vec<CoboundaryTerm>) -> Result<Self> {
        if !c0.is_finite() {
            return Err(Error::InvalidSpec(format!("c0 = {c0}")));
        }
        let finite = bumps.iter().all(|b| b.eps.is_finite() && b.phase.is_finite())
            && coboundary.iter().all(|c| c.amp.is_finite() && c.phase.is_finite());
        if !finite {
            return Err(Error::InvalidSpec("non-finite amplitude or phase".into()));
        }
        let spec = Self { c0, bumps, coboundary };
        let tau_min = spec.lower_bound();
        if tau_min <= 0.0 {
            return Err(Error::NonPositiveTimeChange { tau_min });
        }
        Ok(spec)
    }

    pub fn constant(c0: f64) -> Result<Self> {
        Self::new(c0, vec![], vec![])
    }

    /// `c0 + eps w(s) cos(2 pi k . x + phase)`.
    pub fn single_bump(c0: f64, eps: f64, k: [i64; 2], phase: f64) -> Result<Self> {
        Self::new(c0, vec![Bump { eps, k, phase }], vec![])
    }

    /// `kappa + X xi` with `xi = amp w(s) cos(2 pi k . x + phase)`.
    pub fn coboundary_of(kappa: f64, amp: f64, k: [i64; 2], phase: f64) -> Result<Self> {
        Self::new(kappa, vec![], vec![CoboundaryTerm { amp, k, phase }])
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn coboundary(&self) -> &[CoboundaryTerm] {
        &self.coboundary
    }

    pub fn is_constant(&self) -> bool {
        self.bumps.iter().all(|b| b.eps == 0.0) && self.coboundary.iter().all(|c| c.amp == 0.0)
    }

    /// `c0 - sum|eps| - sup|w'| sum|amp|`.
    pub fn lower_bound(&self) -> f64 {
        self.c0 - self.bump_weight() - window_d1_max() * self.coboundary_weight()
    }

    pub fn upper_bound(&self) -> f64 {
        self.c0 + self.bump_weight() + window_d1_max() * self.coboundary_weight()
    }

    fn bump_weight(&self) -> f64 {
        self.bumps.iter().map(|b| b.eps.abs()).sum()
    }

    fn coboundary_weight(&self) -> f64 {
        self.coboundary.iter().map(|c| c.amp.abs()).sum()
    }
}

fn phase_of(k: [i64; 2], phase: f64, x: [f64; 2]) -> f64 {
    TAU * (k[0] as f64 * x[0] + k[1] as f64 * x[1]) + phase
}

/// Result of a cocycle evaluation: value plus an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CocycleValue {
    pub value: f64,
    /// For `v`: quadrature error estimate. For `alpha`: bound on `|v(p, alpha) - t|`.
    pub err_bound: f64,
}

/// A maximal piece of an orbit inside one roof sheet.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Panel {
    /// Signed crossing index: the base is `A^n x`.
    pub n: i64,
    pub base: [u64; 2],
    pub lo: f64,
    pub hi: f64,
}

/// Panels covering the orbit of `p` from time 0 to the point with crossing
/// index `n_end` and roof `r_end`, in orbit order.
pub(crate) fn panels_to(p: &PhasePoint, n_end: i64, r_end: f64) -> Vec<Panel> {
    let s0 = p.roof();
    let mut out = Vec::with_capacity(n_end.unsigned_abs() as usize + 1);
    let mut base = p.base_fixed();
    if is_forward(p, n_end, r_end) {
        for n in 0..=n_end {
            let lo = if n == 0 { s0 } else { 0.0 };
            let hi = if n == n_end { r_end } else { 1.0 };
            out.push(Panel { n, base, lo, hi });
            base = cat(base);
        }
    } else {
        for n in (n_end..=0).rev() {
            let hi = if n == 0 { s0 } else { 1.0 };
            let lo = if n == n_end { r_end } else { 0.0 };
            out.push(Panel { n, base, lo, hi });
            base = cat_inv(base);
        }
    }
    out
}

/// Whether the end point `(n_end, r_end)` lies ahead of `p` on its orbit.
pub(crate) fn is_forward(p: &PhasePoint, n_end: i64, r_end: f64) -> bool {
    n_end > 0 || (n_end == 0 && r_end >= p.roof())
}

struct AlphaSolution {
    value: f64,
    residual: f64,
    n: i64,
    roof: f64,
}

/// A time change bound to the cat suspension, with cached bounds.
#[derive(Debug, Clone)]
pub struct TimeChange {
    model: CatSuspension,
    spec: TimeChangeSpec,
    tau_min: f64,
    tau_max: f64,
    tau0: f64,
    lip: f64,
}

impl TimeChange {
    pub fn new(spec: TimeChangeSpec) -> Self {
        let w_mass = window_mass();
        let tau0 =
            spec.c0 + w_mass * spec.bumps.iter().filter(|b| b.k == [0, 0]).map(|b| b.eps * b.phase.cos()).sum::<f64>();
        let lip =
            spec.bumps.iter().map(|b| b.eps.abs() * TAU * ((b.k[0] * b.k[0] + b.k[1] * b.k[1]) as f64).sqrt()).sum();
        Self { model: CatSuspension::new(), tau_min: spec.lower_bound(), tau_max: spec.upper_bound(), spec, tau0, lip }
    }

    pub fn model(&self) -> &CatSuspension {
        &self.model
    }

    pub fn spec(&self) -> &TimeChangeSpec {
        &self.spec
    }

    pub fn tau_min(&self) -> f64 {
        self.tau_min
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// `int tau dm`, exact up to the window-mass quadrature (~1e-17).
    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    /// Lipschitz bound of the windowed part `C` in the base coordinates.
    pub fn lip_base(&self) -> f64 {
        self.lip
    }

    /// `(C(x), D(x))`.
    pub(crate) fn profile(&self, x: [f64; 2]) -> (f64, f64) {
        let c = self.spec.bumps.iter().map(|b| b.eps * phase_of(b.k, b.phase, x).cos()).sum();
        let d = self.spec.coboundary.iter().map(|t| t.amp * phase_of(t.k, t.phase, x).cos()).sum();
        (c, d)
    }

    /// Base gradients of `C` and `D`.
    pub(crate) fn profile_grad(&self, x: [f64; 2]) -> ([f64; 2], [f64; 2]) {
        let mut gc = [0.0; 2];
        let mut gd = [0.0; 2];
        for b in &self.spec.bumps {
            let s = -b.eps * TAU * phase_of(b.k, b.phase, x).sin();
            gc[0] += s * b.k[0] as f64;
            gc[1] += s * b.k[1] as f64;
        }
        for t in &self.spec.coboundary {
            let s = -t.amp * TAU * phase_of(t.k, t.phase, x).sin();
            gd[0] += s * t.k[0] as f64;
            gd[1] += s * t.k[1] as f64;
        }
        (gc, gd)
    }

    /// `(C(x) - C(x + d), D(x) - D(x + d))`, free of cancellation for small `d`.
    pub(crate) fn profile_diff(&self, x: [f64; 2], d: [f64; 2]) -> (f64, f64) {
        let diff = |k: [i64; 2], phase: f64| {
            let th = phase_of(k, phase, x);
            let dth = TAU * (k[0] as f64 * d[0] + k[1] as f64 * d[1]);
            2.0 * (th + 0.5 * dth).sin() * (0.5 * dth).sin()
        };
        let c = self.spec.bumps.iter().map(|b| b.eps * diff(b.k, b.phase)).sum();
        let dd = self.spec.coboundary.iter().map(|t| t.amp * diff(t.k, t.phase)).sum();
        (c, dd)
    }

    /// `tau` at raw coordinates; 1-periodic in the base.
    pub fn tau_at(&self, x: [f64; 2], s: f64) -> f64 {
        let (c, d) = self.profile(x);
        self.spec.c0 + window(s) * c + window_d1(s) * d
    }

    pub fn tau(&self, p: &PhasePoint) -> f64 {
        self.tau_at(p.base(), p.roof())
    }

    /// The potential `xi = w(s) D(x)` of the coboundary part: `X xi = w'(s) D(x)`.
    pub fn coboundary_potential(&self, p: &PhasePoint) -> f64 {
        window(p.roof()) * self.profile(p.base()).1
    }

    /// Directional derivative `d_v tau` in the frame `(e_s, e_u, X)`.
    pub fn dtau(&self, p: &PhasePoint, v: TangentVector) -> f64 {
        let x = p.base();
        let s = p.roof();
        let (c, d) = self.profile(x);
        let (gc, gd) = self.profile_grad(x);
        let es = self.model.e_s();
        let eu = self.model.e_u();
        let dir = [v.xi_s * es[0] + v.xi_u * eu[0], v.xi_s * es[1] + v.xi_u * eu[1]];
        let w = window(s);
        let w1 = window_d1(s);
        let base_part = (w * gc[0] + w1 * gd[0]) * dir[0] + (w * gc[1] + w1 * gd[1]) * dir[1];
        base_part + v.xi_c * (w1 * c + window_d2(s) * d)
    }

    /// `int_lo^hi tau(x, s) ds` on one panel with profile `(c, d)`.
    pub(crate) fn panel_integral(&self, c: f64, d: f64, lo: f64, hi: f64) -> Quad {
        let wq = window_integral(lo, hi);
        Quad { value: self.spec.c0 * (hi - lo) + c * wq.value + d * (window(hi) - window(lo)), err: c.abs() * wq.err }
    }

    /// `v(p, t) = int_0^t tau(g_s p) ds`.
    pub fn v_cocycle(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<CocycleValue> {
        check_tol(tol)?;
        if t == 0.0 {
            return Ok(CocycleValue { value: 0.0, err_bound: 0.0 });
        }
        let (n_end, r_end) = split_time(p.roof(), t);
        let mut acc = CompensatedSum::new();
        let mut err = 0.0;
        for panel in panels_to(p, n_end, r_end) {
            let (c, d) = self.profile(panel_base(&panel));
            let q = self.panel_integral(c, d, panel.lo, panel.hi);
            acc.add(q.value);
            err += q.err;
        }
        let value = if t > 0.0 { acc.value() } else { -acc.value() };
        if err > tol {
            return Err(Error::InvalidArgument(format!("quadrature error {err} exceeds tol {tol}")));
        }
        Ok(CocycleValue { value, err_bound: err })
    }

    fn solve_alpha(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<AlphaSolution> {
        check_tol(tol)?;
        let s0 = p.roof();
        if t == 0.0 {
            return Ok(AlphaSolution { value: 0.0, residual: 0.0, n: 0, roof: s0 });
        }
        let opts = SolveOptions { tol, newton_width: 1e-3, max_iter: 200 };
        let need_total = t.abs();
        let mut acc = CompensatedSum::new();
        let mut base = p.base_fixed();
        let mut n: i64 = 0;
        let forward = t > 0.0;
        loop {
            let x = fixed_to_f64(base);
            let (c, d) = self.profile(x);
            let (lo, hi) =
                if forward { (if n == 0 { s0 } else { 0.0 }, 1.0) } else { (0.0, if n == 0 { s0 } else { 1.0 }) };
            let full = self.panel_integral(c, d, lo, hi).value;
            let done = acc.value();
            if done + full >= need_total {
                let need = need_total - done;
                // F(s) = int_lo^s tau - target, increasing in s
                let target = if forward { need } else { full - need };
                let mut eval = |s: f64| {
                    let q = self.panel_integral(c, d, lo, s);
                    (q.value - target, self.tau_at(x, s))
                };
                let root = solve_increasing(&mut eval, lo, hi, opts);
                let mut roof = root.x.clamp(lo, hi);
                let mut n_end = n;
                let value = n as f64 + roof - s0;
                if roof >= 1.0 {
                    roof = 0.0;
                    n_end += 1;
                }
                return Ok(AlphaSolution { value, residual: root.residual.abs(), n: n_end, roof });
            }
            acc.add(full);
            if forward {
                n += 1;
                base = cat(base);
            } else {
                n -= 1;
                base = cat_inv(base);
            }
        }
    }

    /// `alpha(p, t)`: the original-flow time with `v(p, alpha) = t`.
    pub fn alpha(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<CocycleValue> {
        let sol = self.solve_alpha(p, t, tol)?;
        Ok(CocycleValue { value: sol.value, err_bound: sol.residual })
    }

    /// `g^tau_t(p) = g_{alpha(p,t)}(p)`.
    pub fn flow_tau(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<PhasePoint> {
        let sol = self.solve_alpha(p, t, tol)?;
        Ok(PhasePoint::from_fixed(crate::model::cat_pow(p.base_fixed(), sol.n), sol.roof))
    }

    /// `alpha` together with the image point it lands on.
    pub fn alpha_and_point(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<(CocycleValue, PhasePoint)> {
        let sol = self.solve_alpha(p, t, tol)?;
        let q = PhasePoint::from_fixed(crate::model::cat_pow(p.base_fixed(), sol.n), sol.roof);
        Ok((CocycleValue { value: sol.value, err_bound: sol.residual }, q))
    }

    /// Orbit panels from `p` to `g^tau_t(p)`.
    pub(crate) fn alpha_panels(&self, p: &PhasePoint, t: f64, tol: f64) -> Result<Vec<Panel>> {
        let sol = self.solve_alpha(p, t, tol)?;
        Ok(panels_to(p, sol.n, sol.roof))
    }

    /// `d_v tau_a(p) = int_0^a [d_{Dg_t v} tau](g_t p) dt` over the panels
    /// ending at crossing index `n_end`, roof `r_end`.
    fn orbit_derivative(&self, p: &PhasePoint, v: TangentVector, n_end: i64, r_end: f64) -> f64 {
        let es = self.model.e_s();
        let eu = self.model.e_u();
        let lambda = self.model.lambda();
        let mut acc = CompensatedSum::new();
        for panel in panels_to(p, n_end, r_end) {
            let x = panel_base(&panel);
            let (gc, gd) = self.profile_grad(x);
            let wq = window_integral(panel.lo, panel.hi).value;
            let dw = window(panel.hi) - window(panel.lo);
            let k = lambda.powi(panel.n as i32);
            let along = |e: [f64; 2]| (gc[0] * e[0] + gc[1] * e[1]) * wq + (gd[0] * e[0] + gd[1] * e[1]) * dw;
            acc.add(v.xi_s / k * along(es) + v.xi_u * k * along(eu));
        }
        let sign = if is_forward(p, n_end, r_end) { 1.0 } else { -1.0 };
        let end = PhasePoint::from_fixed(crate::model::cat_pow(p.base_fixed(), n_end), r_end);
        sign * acc.value() + v.xi_c * (self.tau(&end) - self.tau(p))
    }

    /// Derivative of the time-changed flow:
    /// `Dg^tau_T v = Dg_alpha v + (d_v alpha) X` with
    /// `d_v alpha * tau(g_alpha p) = -d_v tau_alpha(p)`.
    pub fn dflow_tau(&self, p: &PhasePoint, v: TangentVector, t: f64, tol: f64) -> Result<TangentVector> {
        let sol = self.solve_alpha(p, t, tol)?;
        let end = PhasePoint::from_fixed(crate::model::cat_pow(p.base_fixed(), sol.n), sol.roof);
        let j = self.orbit_derivative(p, v, sol.n, sol.roof);
        let d_alpha = -j / self.tau(&end);
        let k = self.model.lambda().powi(sol.n as i32);
        Ok(TangentVector::new(v.xi_s / k, v.xi_u * k, v.xi_c + d_alpha))
    }

    /// Density `tau / tau0` of the invariant measure of `g^tau` w.r.t. Haar.
    pub fn density(&self, p: &PhasePoint) -> f64 {
        self.tau(p) / self.tau0
    }
}

pub(crate) fn fixed_to_f64(b: [u64; 2]) -> [f64; 2] {
    [crate::model::from_fixed(b[0]), crate::model::from_fixed(b[1])]
}

pub(crate) fn panel_base(p: &Panel) -> [f64; 2] {
    fixed_to_f64(p.base)
}

impl FlowModel for TimeChange {
    type Point = PhasePoint;

    fn flow(&self, p: &PhasePoint, t: f64) -> PhasePoint {
        self.flow_tau(p, t, DEFAULT_TOL).expect("default tolerance is valid")
    }

    fn dflow(&self, p: &PhasePoint, v: TangentVector, t: f64) -> TangentVector {
        self.dflow_tau(p, v, t, DEFAULT_TOL).expect("default tolerance is valid")
    }

    fn leg(&self, p: &PhasePoint, kind: crate::model::LegKind, u: f64) -> PhasePoint {
        self.model.leg(p, kind, u)
    }

    fn dist(&self, p: &PhasePoint, q: &PhasePoint) -> f64 {
        self.model.dist(p, q)
    }

    fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        self.model.sample(rng)
    }
}

/// Tolerance used where callers do not pass one.
pub const DEFAULT_TOL: f64 = 1e-12;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bump() -> TimeChange {
        TimeChange::new(TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap())
    }

    #[test]
    fn window_shape() {
        assert_eq!(window(0.5), 1.0);
        assert_eq!(window(0.0), 0.0);
        assert_eq!(window(1.0), 0.0);
        assert!(window(1e-3) < 1e-300);
        // symmetric, derivative odd about 1/2
        assert!((window(0.3) - window(0.7)).abs() < 1e-16);
        assert!((window_d1(0.3) + window_d1(0.7)).abs() < 1e-14);
        let h = 1e-6;
        for s in [0.2, 0.35, 0.61, 0.8] {
            let fd1 = (window(s + h) - window(s - h)) / (2.0 * h);
            let fd2 = (window_d1(s + h) - window_d1(s - h)) / (2.0 * h);
            assert!((fd1 - window_d1(s)).abs() < 1e-7);
            assert!((fd2 - window_d2(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn window_integrals_agree_with_plain_simpson() {
        let m = window_mass();
        let reference = crate::quadrature::adaptive_simpson(window, 0.0, 1.0, 1e-15).value;
        assert!((m - reference).abs() < 1e-14);
        let part = window_integral(0.17, 0.73).value;
        let reference = crate::quadrature::adaptive_simpson(window, 0.17, 0.73, 1e-15).value;
        assert!((part - reference).abs() < 1e-14);
        assert!((window_integral(0.0, 0.5).value - 0.5 * m).abs() < 1e-15);
    }

    #[test]
    fn spec_rejects_nonpositive() {
        assert!(matches!(TimeChangeSpec::single_bump(0.3, 0.3, [1, 0], 0.0), Err(Error::NonPositiveTimeChange { .. })));
        assert!(TimeChangeSpec::constant(-1.0).is_err());
        assert!(TimeChangeSpec::coboundary_of(0.1, 0.1, [1, 0], 0.0).is_err());
    }

    #[test]
    fn spec_serde_roundtrip_and_strictness() {
        let spec = TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.25).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"c0":1.0,"bumps":[{"eps":0.3,"k":[1,0],"phase":0.25}]}"#);
        let back: TimeChangeSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"c0":1.0,"bumps":[{"epsilon":0.3,"k":[1,0]}]}"#;
        assert!(serde_json::from_str::<TimeChangeSpec>(bad).unwrap_err().to_string().contains("epsilon"));
        let neg = r#"{"c0":0.2,"bumps":[{"eps":0.3,"k":[1,0]}]}"#;
        assert!(serde_json::from_str::<TimeChangeSpec>(neg).is_err());
    }

    #[test]
    fn tau_examples() {
        let c = TimeChange::new(TimeChangeSpec::constant(2.0).unwrap());
        assert_eq!(c.tau(&PhasePoint::new(0.3, 0.1, 0.6)), 2.0);
        let b = bump();
        assert!((b.tau(&PhasePoint::new(0.0, 0.0, 0.5)) - 1.3).abs() < 1e-15);
        assert_eq!(b.tau(&PhasePoint::new(0.2, 0.7, 0.0)), 1.0);
        assert!((b.tau_min() - 0.7).abs() < 1e-15 && (b.tau_max() - 1.3).abs() < 1e-15);
        assert!((b.tau0() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dtau_matches_richardson_consistent_differences() {
        let tc = TimeChange::new(
            TimeChangeSpec::new(
                1.0,
                vec![Bump { eps: 0.2, k: [1, 2], phase: 0.3 }, Bump { eps: 0.1, k: [-1, 1], phase: 1.0 }],
                vec![CoboundaryTerm { amp: 0.05, k: [0, 1], phase: 0.0 }],
            )
            .unwrap(),
        );
        let m = tc.model();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let s = rng.gen_range(0.05..0.95);
            let v = TangentVector::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let es = m.e_s();
            let eu = m.e_u();
            let moved = |h: f64| {
                let y = [x[0] + h * (v.xi_s * es[0] + v.xi_u * eu[0]), x[1] + h * (v.xi_s * es[1] + v.xi_u * eu[1])];
                tc.tau_at(y, s + h * v.xi_c)
            };
            let fd = |h: f64| (moved(h) - moved(-h)) / (2.0 * h);
            let (d5, d6) = (fd(1e-5), fd(1e-6));
            // central differences are O(h^2): the two steps agree to ~h^2 |f'''|
            assert!((d5 - d6).abs() < 1e-7);
            let exact = tc.dtau(&PhasePoint::new(x[0], x[1], s), v);
            assert!((exact - d6).abs() <= 1e-8 * (1.0 + exact.abs()), "{exact} vs {d6}");
        }
        let c = TimeChange::new(TimeChangeSpec::constant(1.5).unwrap());
        assert_eq!(c.dtau(&PhasePoint::new(0.1, 0.2, 0.3), TangentVector::new(1.0, 1.0, 1.0)), 0.0);
        let b = bump();
        assert_eq!(b.dtau(&PhasePoint::new(0.1, 0.2, 0.0), TangentVector::flow_direction()), 0.0);
    }

    #[test]
    fn v_and_alpha_constant() {
        let c = TimeChange::new(TimeChangeSpec::constant(2.0).unwrap());
        let p = PhasePoint::new(0.4, 0.2, 0.3);
        assert!((c.v_cocycle(&p, 3.0, 1e-12).unwrap().value - 6.0).abs() < 1e-14);
        assert!((c.alpha(&p, 3.0, 1e-12).unwrap().value - 1.5).abs() < 1e-12);
        assert_eq!(c.v_cocycle(&p, 0.0, 1e-12).unwrap().value, 0.0);
        assert_eq!(c.alpha(&p, 0.0, 1e-12).unwrap().value, 0.0);
        let q = c.flow_tau(&p, 5.0, 1e-12).unwrap();
        assert!(c.model().dist(&q, &c.model().flow(&p, 2.5)) < 1e-12);
        assert_eq!(c.flow_tau(&p, 0.0, 1e-12).unwrap(), p);
        assert!(c.v_cocycle(&p, 1.0, 0.0).is_err());
    }

    #[test]
    fn alpha_negative_times() {
        let b = bump();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = b.model().sample(&mut rng);
            let t = rng.gen_range(-6.0..-0.01);
            let a = b.alpha(&p, t, 1e-13).unwrap();
            let v = b.v_cocycle(&p, a.value, 1e-13).unwrap().value;
            assert!((v - t).abs() < 1e-12, "{v} {t}");
            assert!(a.value >= t / b.tau_min() && a.value <= t / b.tau_max());
        }
    }

    #[test]
    fn flow_tau_agrees_with_flow_of_alpha() {
        let b = bump();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let p = b.model().sample(&mut rng);
            let t = rng.gen_range(-8.0..8.0);
            let a = b.alpha(&p, t, 1e-12).unwrap().value;
            let q = b.flow_tau(&p, t, 1e-12).unwrap();
            assert!(b.model().dist(&q, &b.model().flow(&p, a)) < 1e-12);
        }
    }

    #[test]
    fn density_normalized() {
        let c = TimeChange::new(TimeChangeSpec::constant(3.0).unwrap());
        assert_eq!(c.density(&PhasePoint::new(0.5, 0.1, 0.2)), 1.0);
        let b = bump();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let vals: Vec<f64> = (0..n).map(|_| b.density(&b.model().sample(&mut rng))).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 1.0).abs() <= 3.0 * (var / n as f64).sqrt());
        assert!(vals.iter().all(|&d| d >= b.tau_min() / b.tau0() - 1e-15));
    }

    #[test]
    fn dflow_tau_flow_direction_is_tau_ratio() {
        let b = bump();
        let p = PhasePoint::new(0.13, 0.52, 0.41);
        for t in [0.7, 3.0, -2.2] {
            let v = b.dflow_tau(&p, TangentVector::flow_direction(), t, 1e-13).unwrap();
            let q = b.flow_tau(&p, t, 1e-13).unwrap();
            assert!((v.xi_c - b.tau(&p) / b.tau(&q)).abs() < 1e-12);
            assert_eq!((v.xi_s, v.xi_u), (0.0, 0.0));
        }
    }
}
