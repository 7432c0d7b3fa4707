//! Adaptive composite Simpson quadrature with a Richardson-corrected estimate.

/// Result of a quadrature: value plus an error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub err: f64,
}

const DEFAULT_MAX_DEPTH: u32 = 40;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Halves the local tolerance on every bisection (Lyness criterion
/// `|S2 - S1| <= 15 tol`) and returns `S2 + (S2 - S1)/15` on each accepted
/// panel. Panels that reach the depth cap are accepted as they are; their
/// contribution still enters `err`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, tol: f64) -> Quad
where
    F: Fn(f64) -> f64,
{
    adaptive_simpson_depth(f, a, b, tol, DEFAULT_MAX_DEPTH)
}

pub fn adaptive_simpson_depth<F>(f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> Quad
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Quad { value: 0.0, err: 0.0 };
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut out = Quad { value: 0.0, err: 0.0 };
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32, out: &mut Quad)
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol || (m - a) * (b - m) <= 0.0 {
        out.value += left + right + delta / 15.0;
        out.err += delta.abs() / 15.0;
        return;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, out);
    recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, out);
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
