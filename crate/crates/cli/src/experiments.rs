//! The named experiments. Each one composes library operations, records every
//! asserted bound as a metric and renders its per-sample data as CSV.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tchange::analysis::{center_bunching_check, mixing_profile, write_rates_csv, write_series_csv, Observable};
use tchange::foliation::{beta_s, contraction_rate, dbeta_s, lift_s, LeafPoint};
use tchange::stats::{par_map, sample_points, try_par_map, Estimate};
use tchange::supath::{
    check_transport, coboundary_test, find_engulfing_anchor, haar_average_orbit, haar_average_pcf, pcf_path,
    quad_cycle, quad_family, symmetric_grid, SuLeg, SuPath,
};
use tchange::{FlowModel, LegKind, Result, TangentVector, TimeChange};

use crate::certificate::Metric;
use crate::config::{Experiment, ExperimentConfig};

pub struct Outcome {
    pub metrics: Vec<Metric>,
    pub csv: String,
}

/// Side lengths of the engulfing grid `{+-0.02, +-0.05, +-0.08}^2`.
pub const ENGULF_SIDES: [f64; 3] = [0.02, 0.05, 0.08];

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let tc = TimeChange::new(cfg.tau.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    match cfg.experiment {
        Experiment::Identities => identities(&tc, cfg, &mut rng),
        Experiment::Foliation => foliation(&tc, cfg, &mut rng),
        Experiment::Rates => rates(&tc, cfg, &mut rng),
        Experiment::Pcf => pcf(&tc, cfg, &mut rng),
        Experiment::Access => access(&tc, cfg, &mut rng),
        Experiment::Averages => averages(&tc, cfg, &mut rng),
        Experiment::Mixing => mixing(&tc, cfg, &mut rng),
        Experiment::Coboundary => coboundary(&tc, cfg, &mut rng),
    }
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

fn identities(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let tol = cfg.tol;
    let t_max = cfg.t_max();
    let draws: Vec<_> = (0..cfg.samples())
        .map(|_| (tc.model().sample(rng), rng.gen_range(-t_max..=t_max), rng.gen_range(-t_max..=t_max)))
        .collect();
    let rows = try_par_map(&draws, |&(p, t, s)| -> Result<[f64; 5]> {
        let q = tc.flow_tau(&p, s, tol)?;
        let cocycle =
            (tc.alpha(&p, t + s, tol)?.value - tc.alpha(&p, s, tol)?.value - tc.alpha(&q, t, tol)?.value).abs();
        let a = tc.alpha(&p, t, tol)?.value;
        let inv_va = (tc.v_cocycle(&p, a, tol)?.value - t).abs();
        let inv_av = (tc.alpha(&p, tc.v_cocycle(&p, t, tol)?.value, tol)?.value - t).abs();
        let group = tc.model().dist(&tc.flow_tau(&q, t, tol)?, &tc.flow_tau(&p, t + s, tol)?);
        let (lo, hi) =
            if t >= 0.0 { (t / tc.tau_max(), t / tc.tau_min()) } else { (t / tc.tau_min(), t / tc.tau_max()) };
        let slack = 1e-12 * (1.0 + t.abs());
        let outside = if a < lo - slack || a > hi + slack { 1.0 } else { 0.0 };
        Ok([cocycle, inv_va, inv_av, group, outside])
    })?;
    let col = |i: usize| max_of(rows.iter().map(|r| r[i]));
    let metrics = vec![
        Metric::at_most("max_alpha_cocycle_residual", col(0), 1e-8),
        Metric::at_most("max_v_of_alpha_residual", col(1), 1e-8),
        Metric::at_most("max_alpha_of_v_residual", col(2), 1e-8),
        Metric::at_most("max_group_law_distance", col(3), 1e-8),
        Metric::at_most("positivity_violations", rows.iter().map(|r| r[4]).sum(), 0.0),
    ];
    let mut csv = String::from("id,t,s,alpha_cocycle,v_of_alpha,alpha_of_v,group_law\n");
    for (i, ((_, t, s), r)) in draws.iter().zip(&rows).enumerate() {
        writeln!(csv, "{i},{t},{s},{},{},{},{}", r[0], r[1], r[2], r[3]).unwrap();
    }
    Ok(Outcome { metrics, csv })
}

fn foliation(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let tol = cfg.tol;
    // distance fits need solver residuals well below the final separation
    let fit_tol = tol.min(1e-14);
    let t_max = cfg.t_max();
    let n_along = (2.0 * (t_max - 1.0)).ceil() as usize + 1;
    let xs = sample_points(tc.model(), cfg.samples(), rng);
    let rows = try_par_map(&xs, |x| -> Result<[f64; 5]> {
        let rate = contraction_rate(tc, x, 1e-3, t_max, n_along, fit_tol)?;
        let es = lift_s(tc, x, TangentVector::stable(), tol)?;
        let mut angle: f64 = 0.0;
        for t in [1.0, 2.0, 5.0, 10.0] {
            let image = tc.dflow_tau(x, es, t, tol)?;
            let there = lift_s(tc, &tc.flow_tau(x, t, tol)?, TangentVector::stable(), tol)?;
            angle = angle.max(image.line_angle(&there));
        }
        let h = 1e-5;
        let db = dbeta_s(tc, x, TangentVector::stable(), tol)?;
        let fd = (beta_s(tc, &LeafPoint::stable(*x, h)?, fit_tol)?.value
            - beta_s(tc, &LeafPoint::stable(*x, -h)?, fit_tol)?.value)
            / (2.0 * h);
        Ok([rate, angle, db, (db - fd).abs(), es.norm()])
    })?;
    let col = |i: usize| max_of(rows.iter().map(|r| r[i]));
    let max_rate = rows.iter().map(|r| r[0]).fold(f64::NEG_INFINITY, f64::max);
    let log_lambda = tc.model().log_lambda();
    let k_emp = 1.0 + max_of(rows.iter().map(|r| r[2].abs())) / tc.tau_min();
    let min_ratio = rows.iter().map(|r| r[4]).fold(f64::INFINITY, f64::min);
    let mut metrics = vec![
        Metric::at_most("max_contraction_rate", max_rate, -0.7 * log_lambda / tc.tau_max()),
        Metric::at_most("max_splitting_angle", col(1), 1e-5),
        Metric::at_most("max_dbeta_fd_error", col(3), 1e-6),
        Metric::at_most("max_lift_ratio", col(4), k_emp),
        Metric::at_least("min_lift_ratio", min_ratio, 1.0 / k_emp),
    ];
    if tc.spec().is_constant() {
        let target = -log_lambda / tc.spec().c0();
        let worst = max_of(rows.iter().map(|r| (r[0] / target - 1.0).abs()));
        metrics.push(Metric::at_most("max_rate_relative_error", worst, 0.05));
    }
    let mut csv = String::from("id,rate,splitting_angle,dbeta,dbeta_fd_error,lift_ratio\n");
    for (i, r) in rows.iter().enumerate() {
        writeln!(csv, "{i},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4]).unwrap();
    }
    Ok(Outcome { metrics, csv })
}

fn rates(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let report = center_bunching_check(tc, cfg.samples(), cfg.t_max(), rng, cfg.tol)?;
    let log_lambda = tc.model().log_lambda();
    let metrics = vec![
        Metric::at_least("center_bunching_fraction", report.pass_fraction, 1.0),
        Metric::at_least("pointwise_ph_fraction", report.ph_fraction, 1.0),
        Metric::at_most(
            "max_exponent_linkage_error",
            max_of(report.reports.iter().map(|r| r.linkage_error(log_lambda))),
            0.1,
        ),
    ];
    let mut buf = Vec::new();
    write_rates_csv(&mut buf, &report.reports).expect("writing to memory");
    Ok(Outcome { metrics, csv: String::from_utf8(buf).expect("ascii csv") })
}

/// Random four-leg paths with legs of random kind and `|u| <= 0.05`.
pub fn random_paths(tc: &TimeChange, n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<SuPath>> {
    (0..n)
        .map(|_| {
            let start = tc.model().sample(rng);
            let legs = (0..4)
                .map(|_| {
                    let kind = if rng.gen_bool(0.5) { LegKind::Stable } else { LegKind::Unstable };
                    SuLeg { kind, u: rng.gen_range(-0.05..=0.05) }
                })
                .collect();
            SuPath::new(start, legs)
        })
        .collect()
}

fn pcf(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let tol = cfg.tol;
    let paths = random_paths(tc, cfg.samples(), rng)?;
    let rows = try_par_map(&paths, |path| -> Result<[f64; 6]> {
        let value = pcf_path(tc, path, tol)?;
        let back = pcf_path(tc, &path.reversed(tc.model()), tol)?;
        let quad = pcf_path(tc, &quad_cycle(*path.start(), 0.05, 0.05)?, tol)?;
        let check = check_transport(tc, path, 15.0, tol)?;
        Ok([value, (value + back).abs(), quad, check.endpoint_defect, check.composition_defect, check.leaf_ratio])
    })?;
    let col = |i: usize| max_of(rows.iter().map(|r| r[i]));
    let mut metrics = vec![
        Metric::at_most("max_reversal_defect", col(1), 16.0 * tol),
        Metric::at_most("max_transport_endpoint_defect", col(3), 1e-7),
        Metric::at_most("max_transport_composition_defect", col(4), 1e-7),
        Metric::at_most("max_leaf_contraction_ratio_t15", col(5), 1e-2),
    ];
    if tc.spec().is_constant() {
        metrics.push(Metric::at_most("max_abs_path_pcf", max_of(rows.iter().map(|r| r[0].abs())), 1e-10));
        metrics.push(Metric::at_most("max_abs_quadrilateral_pcf", max_of(rows.iter().map(|r| r[2].abs())), 1e-10));
    }
    let mut csv =
        String::from("id,pcf,reversal_defect,quadrilateral_pcf,endpoint_defect,composition_defect,leaf_ratio\n");
    for (i, r) in rows.iter().enumerate() {
        writeln!(csv, "{i},{},{},{},{},{},{}", r[0], r[1], r[2], r[3], r[4], r[5]).unwrap();
    }
    Ok(Outcome { metrics, csv })
}

fn access(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let grid = symmetric_grid(&ENGULF_SIDES);
    let search = find_engulfing_anchor(tc, &grid, cfg.samples(), rng, cfg.tol)?;
    let cert = &search.certificate;
    let metrics =
        vec![Metric::holds("both_signs", cert.both_signs), Metric::at_least("max_abs_pcf", cert.max_abs, 1e-4)];
    let mut csv = String::from("anchor_index,u,v,displacement\n");
    for (&(u, v), d) in cert.grid.iter().zip(&cert.displacements) {
        writeln!(csv, "{},{u},{v},{d}", search.anchor_index).unwrap();
    }
    Ok(Outcome { metrics, csv })
}

fn averages(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let n = cfg.samples();
    let tol = cfg.tol;
    let legs = quad_cycle(tc.model().sample(rng), 0.05, 0.05)?.legs().to_vec();
    let mut rows: Vec<(String, Estimate, f64)> = Vec::new();
    rows.push(("cycle_pcf".into(), haar_average_pcf(tc, &legs, n, rng, tol)?, 0.0));
    for r in [1.0, 3.0] {
        rows.push((format!("orbit_integral_r{r}"), haar_average_orbit(tc, r, n, rng, tol)?, r * tc.tau0()));
    }
    let xs = sample_points(tc.model(), n, rng);
    rows.push(("density".into(), Estimate::from_values(&par_map(&xs, |x| tc.density(x))), 1.0));
    let z = |e: &Estimate, target: f64| {
        if e.stderr > 0.0 {
            (e.mean - target).abs() / e.stderr
        } else if e.mean == target {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let metrics =
        rows.iter().map(|(name, e, target)| Metric::at_most(format!("{name}_z_score"), z(e, *target), 3.0)).collect();
    let mut csv = String::from("quantity,mean,stderr,target\n");
    for (name, e, target) in &rows {
        writeln!(csv, "{name},{},{},{target}", e.mean, e.stderr).unwrap();
    }
    Ok(Outcome { metrics, csv })
}

fn mixing(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let constant = tc.spec().is_constant();
    // a constant suspension returns every point to its roof after c0 time units
    let step = if constant { tc.spec().c0() } else { 1.0 };
    let times: Vec<f64> = (0..=cfg.t_max().floor() as usize).map(|k| k as f64 * step).collect();
    let f = Observable::CosRoof;
    let s = mixing_profile(tc, f, f, &times, cfg.samples(), rng, cfg.tol)?;
    let var = s.values[0];
    let last = s.values.len() - 1;
    let metrics = if constant {
        let worst =
            (1..=last).map(|k| (s.values[k] - var).abs() / s.stderr[k].max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        vec![Metric::at_most("max_return_deviation_over_stderr", worst, 3.0)]
    } else {
        vec![Metric::at_most("abs_correlation_at_t_max", s.values[last].abs(), 0.2 * var + 3.0 * s.stderr[last])]
    };
    let mut buf = Vec::new();
    write_series_csv(&mut buf, &s).expect("writing to memory");
    Ok(Outcome { metrics, csv: String::from_utf8(buf).expect("ascii csv") })
}

fn coboundary(tc: &TimeChange, cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Outcome> {
    let anchors = sample_points(tc.model(), cfg.samples(), rng);
    let grid = symmetric_grid(&ENGULF_SIDES);
    let family = quad_family(&anchors, &grid)?;
    let verdict = coboundary_test(tc, &family, cfg.tol)?;
    let leg_tol = (cfg.tol * 1e-3).max(1e-15);
    let values = try_par_map(&family, |c| pcf_path(tc, c, leg_tol))?;
    let metrics = vec![
        Metric::at_most("max_abs_cycle_pcf", max_of(values.iter().map(|v| v.abs())), cfg.tol),
        Metric::holds("verdict_vanishing", verdict.is_vanishing()),
    ];
    let mut csv = String::from("anchor,u,v,pcf\n");
    for (i, v) in values.iter().enumerate() {
        let (u, w) = grid[i % grid.len()];
        writeln!(csv, "{},{u},{w},{v}", i / grid.len()).unwrap();
    }
    Ok(Outcome { metrics, csv })
}
