//! Flow models.
//!
//! [`CatSuspension`] is the constant-roof suspension of the cat map
//! `A = [[2,1],[1,1]]`: the manifold `M = T^2 x [0,1] / (x,1) ~ (Ax,0)` with the
//! vertical unit-speed flow. Base coordinates are stored as 64-bit fixed point
//! fractions of the torus, so `A` and `A^{-1}` act as exact automorphisms of
//! `(Z/2^64)^2`: the flow group law, leg translations and su-cycle closure hold
//! bit for bit, and the orbit of a stored point is computed without rounding.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_POW_64: f64 = 18_446_744_073_709_551_616.0;
const TWO_POW_NEG_64: f64 = 1.0 / TWO_POW_64;
const TWO_POW_NEG_53: f64 = 1.0 / 9_007_199_254_740_992.0;

/// Distances above this are outside the chart where the quotient metric is computed.
pub const LOCAL_RADIUS: f64 = 0.25;

/// Fixed-point torus coordinate of a real, reduced mod 1.
pub fn to_fixed(x: f64) -> u64 {
    let f = x.rem_euclid(1.0);
    if f >= 1.0 {
        0
    } else {
        (f * TWO_POW_64) as u64
    }
}

/// Real in `[0, 1)` for a fixed-point coordinate (truncated to 53 bits).
pub fn from_fixed(k: u64) -> f64 {
    (k >> 11) as f64 * TWO_POW_NEG_53
}

/// Fixed-point translation by a real amount. Odd: `offset(-d) == offset(d).wrapping_neg()`.
pub fn offset(d: f64) -> u64 {
    let r = d - d.round();
    ((r * TWO_POW_64).round() as i64) as u64
}

/// Signed difference `a - b` on the circle, in `[-1/2, 1/2)`.
pub fn signed_diff(a: u64, b: u64) -> f64 {
    (a.wrapping_sub(b) as i64) as f64 * TWO_POW_NEG_64
}

/// One application of `A`.
pub fn cat(b: [u64; 2]) -> [u64; 2] {
    [b[0].wrapping_mul(2).wrapping_add(b[1]), b[0].wrapping_add(b[1])]
}

/// One application of `A^{-1} = [[1,-1],[-1,2]]`.
pub fn cat_inv(b: [u64; 2]) -> [u64; 2] {
    [b[0].wrapping_sub(b[1]), b[1].wrapping_mul(2).wrapping_sub(b[0])]
}

/// `A^n` for any signed `n`.
pub fn cat_pow(mut b: [u64; 2], n: i64) -> [u64; 2] {
    if n >= 0 {
        for _ in 0..n {
            b = cat(b);
        }
    } else {
        for _ in 0..n.unsigned_abs() {
            b = cat_inv(b);
        }
    }
    b
}

/// Splits a roof advance `s0 + t` into signed crossing count and new roof in `[0,1)`.
pub fn split_time(s0: f64, t: f64) -> (i64, f64) {
    let z = s0 + t;
    let n = z.floor();
    let mut r = z - n;
    let mut n = n as i64;
    if r >= 1.0 {
        r = 0.0;
        n += 1;
    }
    (n, r)
}

/// A point of the suspension manifold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PhasePoint {
    base: [u64; 2],
    roof_bits: u64,
}

impl PhasePoint {
    /// Builds a point from real coordinates. Base components are reduced mod 1;
    /// a roof outside `[0,1)` is brought back through the gluing `(x,1) ~ (Ax,0)`.
    pub fn new(b1: f64, b2: f64, roof: f64) -> Self {
        let (n, r) = split_time(0.0, roof);
        Self::from_fixed(cat_pow([to_fixed(b1), to_fixed(b2)], n), r)
    }

    /// Point from fixed-point base coordinates; `roof` must lie in `[0,1)`.
    pub fn from_fixed(base: [u64; 2], roof: f64) -> Self {
        debug_assert!((0.0..1.0).contains(&roof), "roof {roof} out of range");
        Self { base, roof_bits: roof.to_bits() }
    }

    pub fn base(&self) -> [f64; 2] {
        [from_fixed(self.base[0]), from_fixed(self.base[1])]
    }

    pub fn base_fixed(&self) -> [u64; 2] {
        self.base
    }

    pub fn roof(&self) -> f64 {
        f64::from_bits(self.roof_bits)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhasePointRecord {
    base: [f64; 2],
    roof: f64,
}

impl Serialize for PhasePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PhasePointRecord { base: self.base(), roof: self.roof() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PhasePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PhasePointRecord::deserialize(d)?;
        if !(r.base.iter().all(|b| b.is_finite()) && r.roof.is_finite()) {
            return Err(serde::de::Error::custom("phase point coordinates must be finite"));
        }
        Ok(PhasePoint::new(r.base[0], r.base[1], r.roof))
    }
}

/// Tangent vector in the frame `(e_s, e_u, X)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TangentVector {
    pub xi_s: f64,
    pub xi_u: f64,
    pub xi_c: f64,
}

impl TangentVector {
    pub const fn new(xi_s: f64, xi_u: f64, xi_c: f64) -> Self {
        Self { xi_s, xi_u, xi_c }
    }

    pub const fn stable() -> Self {
        Self::new(1.0, 0.0, 0.0)
    }

    pub const fn unstable() -> Self {
        Self::new(0.0, 1.0, 0.0)
    }

    pub const fn flow_direction() -> Self {
        Self::new(0.0, 0.0, 1.0)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.xi_s * o.xi_s + self.xi_u * o.xi_u + self.xi_c * o.xi_c
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.xi_u * o.xi_c - self.xi_c * o.xi_u,
            self.xi_c * o.xi_s - self.xi_s * o.xi_c,
            self.xi_s * o.xi_u - self.xi_u * o.xi_s,
        )
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::new(k * self.xi_s, k * self.xi_u, k * self.xi_c)
    }

    /// Angle in `[0, pi/2]` between the lines spanned by `self` and `o`.
    pub fn line_angle(&self, o: &Self) -> f64 {
        self.cross(o).norm().atan2(self.dot(o).abs())
    }
}

/// Leaf type of a leg.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LegKind {
    #[serde(rename = "s")]
    Stable,
    #[serde(rename = "u")]
    Unstable,
}

/// Interface for flows with a fixed frame `(e_s, e_u, X)` and parametrized leaves.
pub trait FlowModel: Send + Sync {
    type Point: Clone + Send + Sync;

    fn flow(&self, p: &Self::Point, t: f64) -> Self::Point;
    fn dflow(&self, p: &Self::Point, v: TangentVector, t: f64) -> TangentVector;
    /// Arc-length parametrization of the stable or unstable leaf through `p`.
    fn leg(&self, p: &Self::Point, kind: LegKind, u: f64) -> Self::Point;
    fn dist(&self, p: &Self::Point, q: &Self::Point) -> f64;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Point;
}

/// Distance from `p` to the nearest lift of `q` in the chart around `p`.
fn chart_dist(p: &PhasePoint, q: &PhasePoint) -> f64 {
    let pb = p.base_fixed();
    let qb = q.base_fixed();
    let candidates = [(qb, q.roof()), (cat_inv(qb), q.roof() + 1.0), (cat(qb), q.roof() - 1.0)];
    candidates
        .iter()
        .map(|(b, r)| {
            let d0 = signed_diff(b[0], pb[0]);
            let d1 = signed_diff(b[1], pb[1]);
            let dr = r - p.roof();
            (d0 * d0 + d1 * d1 + dr * dr).sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// The cat-map suspension flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CatSuspension {
    lambda: f64,
    e_s: [f64; 2],
    e_u: [f64; 2],
}

impl Default for CatSuspension {
    fn default() -> Self {
        Self::new()
    }
}

impl CatSuspension {
    pub const MATRIX: [[i64; 2]; 2] = [[2, 1], [1, 1]];

    pub fn new() -> Self {
        let sqrt5 = 5f64.sqrt();
        let lambda = 0.5 * (3.0 + sqrt5);
        // A (1, y) = lambda (1, y) for y = lambda - 2; e_s is its rotation by +90 degrees.
        let y = 0.5 * (sqrt5 - 1.0);
        let n = (1.0 + y * y).sqrt();
        Self { lambda, e_u: [1.0 / n, y / n], e_s: [-y / n, 1.0 / n] }
    }

    /// Expanding eigenvalue `(3 + sqrt 5)/2`.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    pub fn e_s(&self) -> [f64; 2] {
        self.e_s
    }

    pub fn e_u(&self) -> [f64; 2] {
        self.e_u
    }

    /// Unit base direction of a leaf type.
    pub fn direction(&self, kind: LegKind) -> [f64; 2] {
        match kind {
            LegKind::Stable => self.e_s,
            LegKind::Unstable => self.e_u,
        }
    }

    /// Constants `(a, b, A, B)` of uniform partial hyperbolicity in the product metric.
    pub fn uniform_rates(&self) -> (f64, f64, f64, f64) {
        let l = self.log_lambda();
        (0.0, 0.0, l, l)
    }

    /// Signed number of roof crossings of the orbit of `p` during `[0, t]`.
    pub fn crossings(&self, p: &PhasePoint, t: f64) -> i64 {
        split_time(p.roof(), t).0
    }

    /// Translates the base of `p` by the real vector `d`, keeping the roof.
    pub fn translate(&self, p: &PhasePoint, d: [f64; 2]) -> PhasePoint {
        let b = p.base_fixed();
        PhasePoint::from_fixed([b[0].wrapping_add(offset(d[0])), b[1].wrapping_add(offset(d[1]))], p.roof())
    }

    /// Distance in the local quotient metric with a locality check.
    pub fn dist_local(&self, p: &PhasePoint, q: &PhasePoint) -> Result<f64> {
        let d = self.dist(p, q);
        if d > LOCAL_RADIUS {
            Err(Error::NonLocal(d))
        } else {
            Ok(d)
        }
    }
}

impl FlowModel for CatSuspension {
    type Point = PhasePoint;

    fn flow(&self, p: &PhasePoint, t: f64) -> PhasePoint {
        let (n, r) = split_time(p.roof(), t);
        PhasePoint::from_fixed(cat_pow(p.base_fixed(), n), r)
    }

    fn dflow(&self, p: &PhasePoint, v: TangentVector, t: f64) -> TangentVector {
        let n = self.crossings(p, t);
        let k = self.lambda.powi(n as i32);
        TangentVector::new(v.xi_s / k, v.xi_u * k, v.xi_c)
    }

    fn leg(&self, p: &PhasePoint, kind: LegKind, u: f64) -> PhasePoint {
        let e = self.direction(kind);
        self.translate(p, [u * e[0], u * e[1]])
    }

    /// Minimum Euclidean distance in base x roof over the deck translations of `q`
    /// by roof shifts in `{-1, 0, 1}` (base shifts are taken care of by the
    /// signed circle difference).
    ///
    /// Charts on the two sides of the gluing differ by `A`, so both views are
    /// taken to keep the distance symmetric.
    fn dist(&self, p: &PhasePoint, q: &PhasePoint) -> f64 {
        chart_dist(p, q).min(chart_dist(q, p))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PhasePoint {
        let base = [rng.gen::<u64>(), rng.gen::<u64>()];
        PhasePoint::from_fixed(base, rng.gen::<f64>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eigen_structure() {
        let m = CatSuspension::new();
        let l = m.lambda();
        assert!(close(l, (3.0 + 5f64.sqrt()) / 2.0, 1e-15));
        let a = CatSuspension::MATRIX;
        assert_eq!(a[0][0] * a[1][1] - a[0][1] * a[1][0], 1);
        let apply = |v: [f64; 2]| [2.0 * v[0] + v[1], v[0] + v[1]];
        let au = apply(m.e_u());
        let as_ = apply(m.e_s());
        for i in 0..2 {
            assert!(close(au[i], l * m.e_u()[i], 1e-14));
            assert!(close(as_[i], m.e_s()[i] / l, 1e-14));
        }
        let dot = m.e_s()[0] * m.e_u()[0] + m.e_s()[1] * m.e_u()[1];
        assert!(dot.abs() < 1e-15);
        let (a_, b_, big_a, big_b) = m.uniform_rates();
        assert_eq!((a_, b_), (0.0, 0.0));
        assert!(close(big_a, l.ln(), 0.0) && close(big_b, l.ln(), 0.0));
    }

    #[test]
    fn flow_examples() {
        let m = CatSuspension::new();
        let p = PhasePoint::new(0.3, 0.4, 0.2);
        let q = m.flow(&p, 0.5);
        assert!(m.dist(&q, &PhasePoint::new(0.3, 0.4, 0.7)) < 1e-15);
        // A (0.3, 0.4) = (1.0, 0.7)
        let q = m.flow(&p, 1.0);
        assert!(m.dist(&q, &PhasePoint::new(0.0, 0.7, 0.2)) < 1e-15);
        assert!(close(q.roof(), 0.2, 1e-15));
        let back = m.flow(&m.flow(&p, -0.5), 0.5);
        assert!(m.dist(&back, &p) < 1e-12);
        assert_eq!(m.flow(&p, 0.0), p);
    }

    #[test]
    fn flow_group_law_is_exact_in_base() {
        let m = CatSuspension::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = m.sample(&mut rng);
            let t = rng.gen_range(-7.0..7.0);
            let u = rng.gen_range(-7.0..7.0);
            let a = m.flow(&m.flow(&p, t), u);
            let b = m.flow(&p, t + u);
            assert!(m.dist(&a, &b) <= 1e-10 * (1.0 + t.abs() + u.abs()));
        }
    }

    #[test]
    fn dflow_examples() {
        let m = CatSuspension::new();
        let l = m.lambda();
        let p0 = PhasePoint::new(0.1, 0.2, 0.0);
        let v = m.dflow(&p0, TangentVector::stable(), 2.0);
        assert!(close(v.xi_s, l.powi(-2), 1e-16) && v.xi_u == 0.0 && v.xi_c == 0.0);
        let v = m.dflow(&p0, TangentVector::flow_direction(), 3.7);
        assert_eq!(v, TangentVector::flow_direction());
        let p = PhasePoint::new(0.1, 0.2, 0.5);
        let v = m.dflow(&p, TangentVector::new(1.0, 1.0, 0.0), 1.0);
        assert!(close(v.xi_s, 1.0 / l, 1e-15) && close(v.xi_u, l, 1e-14));
    }

    #[test]
    fn dflow_cocycle() {
        let m = CatSuspension::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let p = m.sample(&mut rng);
            let v = TangentVector::new(rng.gen(), rng.gen(), rng.gen());
            let t = rng.gen_range(-4.0..4.0);
            let u = rng.gen_range(-4.0..4.0);
            let a = m.dflow(&m.flow(&p, t), m.dflow(&p, v, t), u);
            let b = m.dflow(&p, v, t + u);
            let scale = 1.0 + b.norm();
            assert!((a.xi_s - b.xi_s).abs() <= 1e-12 * scale);
            assert!((a.xi_u - b.xi_u).abs() <= 1e-12 * scale);
            assert!((a.xi_c - b.xi_c).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn leg_maps() {
        let m = CatSuspension::new();
        let p = PhasePoint::new(0.61, 0.27, 0.4);
        assert_eq!(m.leg(&p, LegKind::Stable, 0.0), p);
        let a = m.leg(&m.leg(&p, LegKind::Stable, 0.03), LegKind::Stable, 0.05);
        let b = m.leg(&p, LegKind::Stable, 0.08);
        assert!(m.dist(&a, &b) < 1e-15);
        // abelian translations: closing an su-cycle returns p bit for bit
        let q = m.leg(&p, LegKind::Unstable, 0.07);
        let q = m.leg(&q, LegKind::Stable, -0.04);
        let q = m.leg(&q, LegKind::Unstable, -0.07);
        let q = m.leg(&q, LegKind::Stable, 0.04);
        assert_eq!(q, p);
    }

    #[test]
    fn stable_leg_contracts() {
        let m = CatSuspension::new();
        let p = PhasePoint::new(0.2, 0.9, 0.3);
        let y = m.leg(&p, LegKind::Stable, 1e-3);
        for t in [0.5, 1.0, 3.2, 8.0, 15.5] {
            let d = m.dist(&m.flow(&p, t), &m.flow(&y, t));
            assert!(d <= 1.01e-3 * m.lambda().powi(-(t.floor() as i32)), "t={t} d={d}");
        }
    }

    #[test]
    fn dist_examples() {
        let m = CatSuspension::new();
        let p = PhasePoint::new(0.99, 0.0, 0.5);
        let q = PhasePoint::new(0.01, 0.0, 0.5);
        assert_eq!(m.dist(&p, &p), 0.0);
        assert!(close(m.dist(&p, &q), 0.02, 1e-15));
        assert!(close(m.dist(&q, &p), 0.02, 1e-15));
        let h = 1e-4;
        assert!(close(m.dist(&p, &m.flow(&p, h)), h, 1e-12));
        // across the gluing
        let top = PhasePoint::new(0.3, 0.4, 0.99995);
        assert!(close(m.dist(&top, &m.flow(&top, h)), h, 1e-12));
        assert!(m.dist_local(&PhasePoint::new(0.0, 0.0, 0.0), &PhasePoint::new(0.5, 0.5, 0.5)).is_err());
    }

    #[test]
    fn sampling_reproducible_and_uniform() {
        let m = CatSuspension::new();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..5).map(|_| m.sample(&mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let (mut c, mut r) = (0.0, 0.0);
        for _ in 0..n {
            let p = m.sample(&mut rng);
            c += (2.0 * std::f64::consts::PI * p.base()[0]).cos();
            r += p.roof();
        }
        let sd_cos = std::f64::consts::FRAC_1_SQRT_2;
        let sd_roof = (1.0f64 / 12.0).sqrt();
        assert!((c / n as f64).abs() <= 3.0 * sd_cos / (n as f64).sqrt());
        assert!((r / n as f64 - 0.5).abs() <= 3.0 * sd_roof / (n as f64).sqrt());
    }

    #[test]
    fn roof_reduction_on_construction() {
        let p = PhasePoint::new(0.3, 0.4, 1.2);
        let m = CatSuspension::new();
        assert!(m.dist(&p, &PhasePoint::new(0.0, 0.7, 0.2)) < 1e-15);
        assert!(p.base().iter().all(|b| (0.0..1.0).contains(b)));
    }
}
