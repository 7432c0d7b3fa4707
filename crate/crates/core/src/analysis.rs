//! Finite-time rates of the time-changed flow, center bunching, correlations
//! and ergodic averages.
//!
//! With a one-dimensional center the exact center factor `c = tau(x)/tau(g^tau_T x)`
//! is the only center rate, so the defining inequalities `gamma <= |Dv| <= 1/gamma_hat`
//! are realized with a small exponential margin:
//! `gamma = c e^{-eta alpha}` and `gamma_hat = e^{-eta alpha} / c` with
//! [`CENTER_MARGIN`] `= eta`. This is the finite-time form of taking `a = b = eta > 0`
//! in the partial hyperbolicity constants, and keeps the chain strict.

use std::f64::consts::PI;
use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_tol, Error, Result};
use crate::foliation::{lift_s, lift_u};
use crate::model::{PhasePoint, TangentVector};
use crate::quadrature::{adaptive_simpson, CompensatedSum};
use crate::stats::{sample_points, try_par_map, Estimate};
use crate::timechange::TimeChange;

/// Exponential slack `eta` between the center factor and `gamma`, `1/gamma_hat`.
pub const CENTER_MARGIN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    /// Stable factor `|Dg^tau_T L^s e_s| / |L^s e_s|`.
    pub nu: f64,
    /// Reciprocal of the unstable factor.
    pub nu_hat: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    /// Exact center factor `|Dg^tau_T X|`.
    pub center: f64,
    pub alpha_xt: f64,
}

impl RateReport {
    /// `nu < 1`, `nu_hat < 1` and `nu < gamma < 1/gamma_hat < 1/nu_hat`.
    pub fn pointwise_ph(&self) -> bool {
        self.nu < 1.0
            && self.nu_hat < 1.0
            && self.nu < self.gamma
            && self.gamma < 1.0 / self.gamma_hat
            && 1.0 / self.gamma_hat < 1.0 / self.nu_hat
    }

    /// `nu < gamma gamma_hat` and `nu_hat < gamma gamma_hat`.
    pub fn center_bunched(&self) -> bool {
        let gg = self.gamma * self.gamma_hat;
        self.nu < gg && self.nu_hat < gg
    }

    /// `|log nu / (-log lambda alpha) - 1|`.
    pub fn linkage_error(&self, log_lambda: f64) -> f64 {
        (self.nu.ln() / (-log_lambda * self.alpha_xt) - 1.0).abs()
    }
}

pub fn finite_time_rates(tc: &TimeChange, x: &PhasePoint, t: f64, tol: f64) -> Result<RateReport> {
    if !(t >= 1.0) {
        return Err(Error::InvalidArgument(format!("rate horizon must be at least 1, got {t}")));
    }
    let (alpha, y) = tc.alpha_and_point(x, t, tol)?;
    let factor =
        |v: TangentVector, w: TangentVector| -> Result<f64> { Ok(tc.dflow_tau(x, v, t, tol)?.norm() / w.norm()) };
    let ls = lift_s(tc, x, TangentVector::stable(), tol)?;
    let lu = lift_u(tc, x, TangentVector::unstable(), tol)?;
    let nu = factor(ls, ls)?;
    let nu_hat = 1.0 / factor(lu, lu)?;
    let center = tc.tau(x) / tc.tau(&y);
    let slack = (-CENTER_MARGIN * alpha.value).exp();
    Ok(RateReport { nu, nu_hat, gamma: center * slack, gamma_hat: slack / center, center, alpha_xt: alpha.value })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BunchingReport {
    pub horizon: f64,
    /// Fraction of samples that are center bunched.
    pub pass_fraction: f64,
    /// Fraction of samples satisfying the pointwise partial hyperbolicity chain.
    pub ph_fraction: f64,
    pub reports: Vec<RateReport>,
}

pub fn center_bunching_check<R: Rng + ?Sized>(
    tc: &TimeChange,
    n_samples: usize,
    t: f64,
    rng: &mut R,
    tol: f64,
) -> Result<BunchingReport> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    // the certificate only holds for large horizons
    if !(t >= 5.0) {
        return Err(Error::InvalidArgument(format!("bunching horizon must be at least 5, got {t}")));
    }
    let xs = sample_points(tc.model(), n_samples, rng);
    let reports = try_par_map(&xs, |x| finite_time_rates(tc, x, t, tol))?;
    let frac = |ok: fn(&RateReport) -> bool| reports.iter().filter(|r| ok(r)).count() as f64 / n_samples as f64;
    Ok(BunchingReport {
        horizon: t,
        pass_fraction: frac(RateReport::center_bunched),
        ph_fraction: frac(RateReport::pointwise_ph),
        reports,
    })
}

/// Fixed catalog of observables on the suspension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    One,
    CosBase1,
    SinBase1,
    CosBase2,
    CosBaseSum,
    CosRoof,
    SinRoof,
    CosRoofBase1,
}

impl Observable {
    pub const ALL: [Observable; 8] = [
        Self::One,
        Self::CosBase1,
        Self::SinBase1,
        Self::CosBase2,
        Self::CosBaseSum,
        Self::CosRoof,
        Self::SinRoof,
        Self::CosRoofBase1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::One => "one",
            Self::CosBase1 => "cos_base1",
            Self::SinBase1 => "sin_base1",
            Self::CosBase2 => "cos_base2",
            Self::CosBaseSum => "cos_base_sum",
            Self::CosRoof => "cos_roof",
            Self::SinRoof => "sin_roof",
            Self::CosRoofBase1 => "cos_roof_base1",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.name() == name)
    }

    pub fn eval_at(self, b: [f64; 2], s: f64) -> f64 {
        let tau = 2.0 * PI;
        match self {
            Self::One => 1.0,
            Self::CosBase1 => (tau * b[0]).cos(),
            Self::SinBase1 => (tau * b[0]).sin(),
            Self::CosBase2 => (tau * b[1]).cos(),
            Self::CosBaseSum => (tau * (b[0] + b[1])).cos(),
            Self::CosRoof => (tau * s).cos(),
            Self::SinRoof => (tau * s).sin(),
            Self::CosRoofBase1 => (tau * s).cos() * (tau * b[0]).cos(),
        }
    }

    pub fn eval(self, p: &PhasePoint) -> f64 {
        self.eval_at(p.base(), p.roof())
    }
}

/// Correlation `int f (g o g^tau_t) dm^tau - int f dm^tau int g dm^tau` with
/// Haar samples reweighted by the density. The standard error comes from the
/// linearized estimator `rho f g_t - m_g rho f - m_f rho g_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationEstimate {
    pub value: f64,
    pub stderr: f64,
    pub mean_f: f64,
    pub mean_g: f64,
}

fn correlation_from(rho: &[f64], fx: &[f64], gy: &[f64]) -> CorrelationEstimate {
    let n = rho.len() as f64;
    let mean = |v: &mut dyn Iterator<Item = f64>| {
        let mut s = CompensatedSum::new();
        v.for_each(|x| s.add(x));
        s.value() / n
    };
    let mf = mean(&mut rho.iter().zip(fx).map(|(r, f)| r * f));
    let mg = mean(&mut rho.iter().zip(gy).map(|(r, g)| r * g));
    let mfg = mean(&mut rho.iter().zip(fx).zip(gy).map(|((r, f), g)| r * f * g));
    let z: Vec<f64> = rho.iter().zip(fx).zip(gy).map(|((r, f), g)| r * f * g - mg * r * f - mf * r * g).collect();
    CorrelationEstimate { value: mfg - mf * mg, stderr: Estimate::from_values(&z).stderr, mean_f: mf, mean_g: mg }
}

pub fn correlation<R: Rng + ?Sized>(
    tc: &TimeChange,
    f: Observable,
    g: Observable,
    t: f64,
    n_samples: usize,
    rng: &mut R,
    tol: f64,
) -> Result<CorrelationEstimate> {
    let s = mixing_profile(tc, f, g, &[t], n_samples, rng, tol)?;
    Ok(CorrelationEstimate { value: s.values[0], stderr: s.stderr[0], mean_f: s.mean_f, mean_g: s.mean_g })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub mean_f: f64,
    pub mean_g: f64,
}

/// Correlations at increasing times on one sample set; each orbit is advanced
/// incrementally by `g^tau` between consecutive times.
pub fn mixing_profile<R: Rng + ?Sized>(
    tc: &TimeChange,
    f: Observable,
    g: Observable,
    times: &[f64],
    n_samples: usize,
    rng: &mut R,
    tol: f64,
) -> Result<CorrelationSeries> {
    check_tol(tol)?;
    if n_samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) || times[0] < 0.0 {
        return Err(Error::InvalidArgument("times must be non-negative and strictly increasing".into()));
    }
    let xs = sample_points(tc.model(), n_samples, rng);
    let rho: Vec<f64> = xs.iter().map(|x| tc.density(x)).collect();
    let fx: Vec<f64> = xs.iter().map(|x| f.eval(x)).collect();
    let orbits = try_par_map(&xs, |x| -> Result<Vec<f64>> {
        let mut p = *x;
        let mut last = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            p = tc.flow_tau(&p, t - last, tol)?;
            last = t;
            out.push(g.eval(&p));
        }
        Ok(out)
    })?;
    let mut values = Vec::with_capacity(times.len());
    let mut stderr = Vec::with_capacity(times.len());
    let (mut mean_f, mut mean_g) = (0.0, 0.0);
    for k in 0..times.len() {
        let gy: Vec<f64> = orbits.iter().map(|o| o[k]).collect();
        let c = correlation_from(&rho, &fx, &gy);
        values.push(c.value);
        stderr.push(c.stderr);
        mean_f = c.mean_f;
        if k == 0 {
            mean_g = c.mean_g;
        }
    }
    Ok(CorrelationSeries { times: times.to_vec(), values, stderr, mean_f, mean_g })
}

/// `(1/T) int_0^T f(g^tau_t x) dt`, computed as `(1/T) int_0^alpha f tau ds`
/// along the original orbit with adaptive Simpson on each panel.
pub fn birkhoff_average(tc: &TimeChange, f: Observable, x: &PhasePoint, t_budget: f64, tol: f64) -> Result<f64> {
    check_tol(tol)?;
    if !(t_budget >= 100.0) || !t_budget.is_finite() {
        return Err(Error::InvalidArgument(format!("time budget must be at least 100, got {t_budget}")));
    }
    let panels = tc.alpha_panels(x, t_budget, tol)?;
    let per_panel = tol / panels.len() as f64;
    let mut sum = CompensatedSum::new();
    for p in &panels {
        let b = crate::timechange::panel_base(p);
        let q = adaptive_simpson(|s| f.eval_at(b, s) * tc.tau_at(b, s), p.lo, p.hi, per_panel);
        sum.add(q.value);
    }
    Ok(sum.value() / t_budget)
}

fn fmt_row(w: &mut dyn Write, cells: &[String]) -> io::Result<()> {
    writeln!(w, "{}", cells.join(","))
}

/// CSV with columns `t,value,stderr`.
pub fn write_series_csv(w: &mut dyn Write, s: &CorrelationSeries) -> io::Result<()> {
    writeln!(w, "t,value,stderr")?;
    for ((t, v), e) in s.times.iter().zip(&s.values).zip(&s.stderr) {
        fmt_row(w, &[t.to_string(), v.to_string(), e.to_string()])?;
    }
    Ok(())
}

/// CSV with columns `x_id,nu,nu_hat,gamma,gamma_hat,alpha_xT`.
pub fn write_rates_csv(w: &mut dyn Write, reports: &[RateReport]) -> io::Result<()> {
    writeln!(w, "x_id,nu,nu_hat,gamma,gamma_hat,alpha_xT")?;
    for (i, r) in reports.iter().enumerate() {
        fmt_row(
            w,
            &[
                i.to_string(),
                r.nu.to_string(),
                r.nu_hat.to_string(),
                r.gamma.to_string(),
                r.gamma_hat.to_string(),
                r.alpha_xt.to_string(),
            ],
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timechange::TimeChangeSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant() -> TimeChange {
        TimeChange::new(TimeChangeSpec::constant(1.0).unwrap())
    }

    #[test]
    fn constant_rates_are_crossing_powers() {
        let tc = constant();
        let lam = tc.model().lambda();
        let x = PhasePoint::new(0.3, 0.6, 0.25);
        let r = finite_time_rates(&tc, &x, 10.0, 1e-12).unwrap();
        assert!((r.nu - lam.powi(-10)).abs() < 1e-12 * lam.powi(-10));
        assert!((r.nu_hat - lam.powi(-10)).abs() < 1e-12 * lam.powi(-10));
        assert!((r.center - 1.0).abs() < 1e-15);
        assert!(r.pointwise_ph() && r.center_bunched());
        assert!((r.alpha_xt - 10.0).abs() < 1e-12);
        assert!(finite_time_rates(&tc, &x, 0.5, 1e-12).is_err());
    }

    #[test]
    fn observable_names_roundtrip() {
        for o in Observable::ALL {
            assert_eq!(Observable::from_name(o.name()), Some(o));
            assert_eq!(serde_json::to_string(&o).unwrap(), format!("\"{}\"", o.name()));
        }
        assert_eq!(Observable::from_name("nope"), None);
    }

    #[test]
    fn constant_observable_has_no_correlation() {
        let tc = TimeChange::new(TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = correlation(&tc, Observable::One, Observable::CosRoof, 2.0, 2000, &mut rng, 1e-10).unwrap();
        assert!(c.value.abs() <= 3.0 * c.stderr + 1e-15);
    }

    #[test]
    fn zero_lag_is_symmetric_variance() {
        let tc = TimeChange::new(TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap());
        let a = correlation(
            &tc,
            Observable::CosRoof,
            Observable::CosBase1,
            0.0,
            3000,
            &mut ChaCha8Rng::seed_from_u64(4),
            1e-10,
        )
        .unwrap();
        let b = correlation(
            &tc,
            Observable::CosBase1,
            Observable::CosRoof,
            0.0,
            3000,
            &mut ChaCha8Rng::seed_from_u64(4),
            1e-10,
        )
        .unwrap();
        assert!((a.value - b.value).abs() < 1e-15);
        let v = correlation(
            &tc,
            Observable::CosRoof,
            Observable::CosRoof,
            0.0,
            3000,
            &mut ChaCha8Rng::seed_from_u64(4),
            1e-10,
        )
        .unwrap();
        assert!(v.value > 0.0);
    }

    #[test]
    fn birkhoff_of_constant() {
        let tc = TimeChange::new(TimeChangeSpec::single_bump(1.0, 0.3, [1, 0], 0.0).unwrap());
        let x = PhasePoint::new(0.1, 0.2, 0.3);
        let a = birkhoff_average(&tc, Observable::One, &x, 120.0, 1e-10).unwrap();
        assert!((a - 1.0).abs() < 1e-9, "{a}");
        assert!(birkhoff_average(&tc, Observable::One, &x, 50.0, 1e-10).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = CorrelationSeries {
            times: vec![0.0, 1.5],
            values: vec![0.25, -1e-20],
            stderr: vec![0.1, 0.2],
            mean_f: 0.0,
            mean_g: 0.0,
        };
        let mut buf = Vec::new();
        write_series_csv(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("t,value,stderr"));
        let last: f64 = text.lines().nth(2).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(last, -1e-20);
    }
}
