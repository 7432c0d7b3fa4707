//! Safeguarded root finding for increasing functions on a known bracket.

/// Outcome of [`solve_increasing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// `f(x)` at the returned point.
    pub residual: f64,
    pub iterations: u32,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Stop once `|f(x)| <= tol`.
    pub tol: f64,
    /// Bisect until the bracket is narrower than this, then switch to Newton.
    pub newton_width: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-12, newton_width: 1e-3, max_iter: 200 }
    }
}

/// Finds `x` in `[lo, hi]` with `f(x) = 0` for an increasing `f`.
///
/// `eval` returns `(f(x), f'(x))`. The caller guarantees `f(lo) <= 0 <= f(hi)`.
/// Bisection shrinks the bracket to `newton_width`; Newton steps then polish,
/// falling back to bisection whenever a step leaves the current bracket.
pub fn solve_increasing<F>(mut eval: F, mut lo: f64, mut hi: f64, opts: SolveOptions) -> Root
where
    F: FnMut(f64) -> (f64, f64),
{
    debug_assert!(lo <= hi);
    let mut iterations = 0;
    let mut best = (0.5 * (lo + hi), f64::INFINITY);

    while hi - lo > opts.newton_width && iterations < opts.max_iter {
        let mid = 0.5 * (lo + hi);
        let (fm, _) = eval(mid);
        iterations += 1;
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm.abs() <= opts.tol {
            return Root { x: mid, residual: fm, iterations };
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut x = 0.5 * (lo + hi);
    while iterations < opts.max_iter {
        let (fx, dfx) = eval(x);
        iterations += 1;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx.abs() <= opts.tol {
            return Root { x, residual: fx, iterations };
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if next == x || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1e-300) {
            break;
        }
        x = next;
    }
    Root { x: best.0, residual: best.1, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_root() {
        let r = solve_increasing(|x| (x * x * x - 2.0, 3.0 * x * x), 0.0, 2.0, SolveOptions::default());
        assert!((r.x - 2f64.cbrt()).abs() < 1e-12);
        assert!(r.residual.abs() <= 1e-12);
    }

    #[test]
    fn root_at_bracket_end() {
        let r = solve_increasing(|x| (x - 1.0, 1.0), 0.0, 1.0, SolveOptions::default());
        assert!((r.x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_derivative_falls_back_to_bisection() {
        // derivative reported as zero everywhere: pure bisection must still converge
        let r =
            solve_increasing(|x| (x.powi(3) - 0.125, 0.0), 0.0, 1.0, SolveOptions { tol: 1e-10, ..Default::default() });
        assert!((r.x - 0.5).abs() < 1e-8);
    }
}
