//! The four experiment suites. Each returns its CSV table, a summary record
//! and named verdicts.

use std::collections::BTreeMap;

use bowen_core::bowen::{center_candidates, delta_grid, distortion_from, pick_centers, shrink_from};
use bowen_core::charts::{LambdaIndex, UnstableChart, EPS1, EPS2};
use bowen_core::linalg::{from_f64, norm, scale, sub, Mat};
use bowen_core::linearization::{
    cauchy_constants, conjugacy_ladder, default_block, estimate_taylor_d, f_p_ladder, fit_rate, l_operator,
    lemma33a_ladder, random_probes, spread,
};
use bowen_core::splitting::{
    b1_candidates, b1_set, domination_constants, e1_increments, e1_taylor_d, omega_eps, p_eps, split_chart,
    splittings_at_centers, spectrum_rows, SplittingEstimate,
};
use bowen_core::systems::{sample_lambda, Blocked, DynamicalSystem, LambdaSample};
use bowen_core::{Dd, LabError, Real, Result};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{RunConfig, Suite};
use crate::model::{build, needs_extended};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Warn,
    Fail,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

pub const LINEARIZE_HEADER: &[&str] =
    &["system", "center_ix", "probe_ix", "u_norm", "p", "increment", "bound_ratio", "conj_residual", "l_norm", "l_dev"];
pub const BOWEN_HEADER: &[&str] =
    &["system", "center_ix", "p", "eps", "delta", "diam_eps", "diam_delta", "ratio", "ell_eps", "ell_delta", "defined"];
pub const SPECTRUM_HEADER: &[&str] = &["system", "center_ix", "alpha_hat", "beta_hat", "pinch_margin", "verdict"];
pub const B1SETS_HEADER: &[&str] =
    &["system", "center_ix", "p", "eps", "diam_prime_b1", "diam_prime_full", "ineq52_ok", "ineq53_ok"];

#[derive(Clone, Debug)]
pub struct SuiteOutput {
    pub suite: Suite,
    pub table: Option<Table>,
    pub summary: Value,
    pub verdicts: BTreeMap<String, Verdict>,
}

impl SuiteOutput {
    fn new(suite: Suite, header: &'static [&'static str]) -> Self {
        SuiteOutput { suite, table: Some(Table { header, rows: Vec::new() }), summary: json!({}), verdicts: BTreeMap::new() }
    }

    fn verdict(&mut self, name: &str, v: Verdict) {
        self.verdicts.insert(name.to_string(), v);
    }
}

/// Shortest round-trip decimal, in exponent form outside `[1e-5, 1e16)`.
pub fn real(x: f64) -> String {
    let a = x.abs();
    if x != 0.0 && a.is_finite() && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

/// Empty for missing values.
fn opt(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn run_part(cfg: &RunConfig, suite: Suite) -> Result<SuiteOutput> {
    match suite {
        Suite::Linearize => linearize(cfg),
        Suite::Distortion => distortion(cfg),
        Suite::Spectrum => spectrum(cfg),
        Suite::Splitting => splitting(cfg),
        Suite::Full => unreachable!("full is expanded into its parts"),
    }
}

fn index(system: &dyn DynamicalSystem<f64>, cfg: &RunConfig) -> Result<LambdaIndex<f64>> {
    Ok(LambdaIndex::new(sample_lambda(system, cfg.budget, cfg.seed)?, system.topology()))
}

fn centers_of(sample: &LambdaSample<f64>, cfg: &RunConfig) -> Result<Vec<Vec<f64>>> {
    Ok(pick_centers(sample.len(), cfg.centers, cfg.seed)?.into_iter().map(|i| sample.points[i].clone()).collect())
}

// ---------------------------------------------------------------- linearize

struct ProbeRecord {
    center_ix: usize,
    probe_ix: usize,
    u_norm: f64,
    /// `‖F⁽ᵖ⁺¹⁾ − F⁽ᵖ⁾‖` for `p = 1..p_max`.
    increments: Vec<f64>,
    /// Per `p = 1..=p_max`; `None` on the slow-bundle path.
    conj: Vec<Option<f64>>,
    l_norm: Vec<Option<f64>>,
    l_dev: Vec<Option<f64>>,
    /// `max_p ‖F⁽ᵖ⁾(u) − u‖`
    identity_gap: f64,
}

fn linearize(cfg: &RunConfig) -> Result<SuiteOutput> {
    let sys = build::<f64>(&cfg.system)?;
    let sample = sample_lambda(&*sys, cfg.budget.min(100_000), cfg.seed)?;
    let centers = centers_of(&sample, cfg)?;
    let mut out = SuiteOutput::new(Suite::Linearize, LINEARIZE_HEADER);
    let label = sys.label();

    // block exponent from the slow-bundle spectrum and the chart constant
    let splits: Vec<SplittingEstimate<f64>> =
        centers.par_iter().map(|x| split_chart(&*sys, x, cfg.horizon.max(10), 0)).collect::<Result<_>>()?;
    let alpha = splits.iter().map(|s| 2.0 * s.rates1.0 - s.rates1.1).fold(f64::INFINITY, f64::min);
    let c = splits.iter().map(|s| s.chart.constant()).fold(1.0, f64::max);
    let k = match cfg.block {
        Some(k) => k,
        None => default_block(c, alpha)?,
    };

    let slow_only = cfg.system.is_split() && needs_extended(&cfg.system);
    let (records, extra) = if slow_only {
        linearize_slow::<Dd>(cfg, &centers)?
    } else if needs_extended(&cfg.system) {
        linearize_full::<Dd>(cfg, &centers, k)?
    } else {
        linearize_full::<f64>(cfg, &centers, k)?
    };

    let norms: Vec<f64> = records.iter().map(|r| r.u_norm).collect();
    let incs: Vec<Vec<f64>> = records.iter().map(|r| r.increments.clone()).collect();
    let extended = slow_only || needs_extended(&cfg.system);
    let fit = if extended { fit_rate::<Dd>(&incs, &norms, 3) } else { fit_rate::<f64>(&incs, &norms, 3) };
    let gamma = fit.map(|f| f.gamma_hat);
    for r in &records {
        for p in 1..=cfg.p_max {
            let inc = (p < cfg.p_max).then(|| r.increments[p - 1]);
            let ratio = match (inc, gamma) {
                (Some(v), Some(g)) => Some(v / (g.powi(p as i32) * r.u_norm * r.u_norm)),
                _ => None,
            };
            out.table.as_mut().unwrap().rows.push(vec![
                label.clone(),
                r.center_ix.to_string(),
                r.probe_ix.to_string(),
                real(r.u_norm),
                p.to_string(),
                opt(inc),
                opt(ratio),
                opt(r.conj[p - 1]),
                opt(r.l_norm[p - 1]),
                opt(r.l_dev[p - 1]),
            ]);
        }
    }

    let max_of = |f: &dyn Fn(&ProbeRecord) -> f64| records.iter().map(f).fold(0.0, f64::max);
    let max_inc = max_of(&|r| r.increments.iter().cloned().fold(0.0, f64::max));
    let max_conj = max_of(&|r| r.conj.iter().flatten().cloned().fold(0.0, f64::max));
    let max_l = max_of(&|r| r.l_norm.iter().flatten().cloned().fold(0.0, f64::max));
    let max_ldev = max_of(&|r| r.l_dev.iter().flatten().cloned().fold(0.0, f64::max));
    let max_gap = max_of(&|r| r.identity_gap);
    let degenerate = extra.taylor_d <= 1e-9;

    let mut summary = json!({
        "block": k,
        "alpha_hat": alpha,
        "chart_constant": c,
        "taylor_d": extra.taylor_d,
        "gamma_hat": gamma,
        "fit_used": fit.map(|f| f.used),
        "fit_dropped": fit.map(|f| f.dropped),
        "max_increment": max_inc,
        "max_conj_residual": max_conj,
        "max_identity_gap": max_gap,
        "slow_bundle_only": slow_only,
    });
    if !slow_only {
        summary["max_l_norm"] = json!(max_l);
        summary["max_l_dev"] = json!(max_ldev);
    }

    if degenerate {
        out.verdict("linear_degeneracy", Verdict::of(max_inc.max(max_conj).max(max_ldev).max(max_gap) <= 1e-10));
    } else {
        match gamma {
            Some(g) => {
                out.verdict("cauchy_rate", Verdict::of(g <= 0.95));
                let consts = if extended {
                    cauchy_constants::<Dd>(&incs, &norms, g, 3)
                } else {
                    cauchy_constants::<f64>(&incs, &norms, g, 3)
                };
                let sp = spread(&consts);
                summary["cauchy_spread"] = json!(sp);
                out.verdict("cauchy_constant_spread", Verdict::of(sp <= 10.0));
                if !slow_only {
                    let c1 = 10.0 * extra.taylor_d / (1.0 - g);
                    summary["c1_hat"] = json!(c1);
                    let dev_ok = records.iter().all(|r| {
                        r.l_dev.iter().flatten().all(|&d| d <= c1 * r.u_norm / 2.0 + 1e-12)
                    });
                    out.verdict("l_operator_bound", Verdict::of(max_l <= 2.1));
                    out.verdict("l_operator_deviation", Verdict::of(g < 1.0 && dev_ok));
                }
            }
            None => out.verdict("cauchy_rate", Verdict::Fail),
        }
        if let Some(q) = &extra.quadratic {
            summary["quadratic_slope_min"] = json!(q.min_slope);
            summary["quadratic_slope_median"] = json!(q.median_slope);
            let ok = q.min_slope >= 1.8 && (q.median_slope - 2.0).abs() <= 0.2 && q.comparable;
            out.verdict("quadratic_error", Verdict::of(ok));
        }
    }
    out.summary = summary;
    Ok(out)
}

struct LinearizeExtra {
    taylor_d: f64,
    quadratic: Option<Quadratic>,
}

/// Log-log slopes of the quadratic chart error over the centers.
struct Quadratic {
    min_slope: f64,
    median_slope: f64,
    /// `‖df̂ᵖ(0)v‖ ≤ 2‖f̂ᵖ(v)‖` on every probe.
    comparable: bool,
}

fn linearize_full<T: Real>(cfg: &RunConfig, centers: &[Vec<f64>], k: usize) -> Result<(Vec<ProbeRecord>, LinearizeExtra)> {
    let sys = Blocked::new(build::<T>(&cfg.system)?, k)?;
    let p_max = cfg.p_max;
    let charts: Vec<UnstableChart<T>> =
        centers.par_iter().map(|x| UnstableChart::new(&sys, &from_f64::<T>(x), p_max + 1, 2)).collect::<Result<_>>()?;
    let taylor_d = estimate_taylor_d(&sys, &charts, EPS1, 8, cfg.seed)?;
    let d = sys.unstable_dim();
    let per_center: Vec<Vec<ProbeRecord>> = charts
        .par_iter()
        .enumerate()
        .map(|(ci, chart)| {
            let probes = random_probes::<T>(d, cfg.probes, EPS2, cfg.seed, ci as u64);
            probes
                .iter()
                .enumerate()
                .map(|(pi, u)| {
                    let vals = f_p_ladder(&sys, chart, u, p_max)?;
                    let increments = vals.windows(2).map(|w| norm(&sub(&w[1], &w[0])).to64()).collect();
                    let identity_gap = vals.iter().map(|v| norm(&sub(v, u)).to64()).fold(0.0, f64::max);
                    let xi = scale(u, T::of(0.5));
                    let eye = Mat::<T>::identity(d);
                    let conj = conjugacy_ladder(&sys, chart, u, p_max)?.into_iter().map(|r| Some(r.to64())).collect();
                    let mut l_norm = Vec::with_capacity(p_max);
                    let mut l_dev = Vec::with_capacity(p_max);
                    for p in 1..=p_max {
                        let l = l_operator(&sys, chart, &xi, p)?;
                        l_norm.push(Some(l.norm2().to64()));
                        l_dev.push(Some(l.minus(&eye).norm2().to64()));
                    }
                    Ok(ProbeRecord {
                        center_ix: ci,
                        probe_ix: pi,
                        u_norm: norm(u).to64(),
                        increments,
                        conj,
                        l_norm,
                        l_dev,
                        identity_gap,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let quadratic = if taylor_d > 1e-9 {
        let targets: Vec<f64> = (3..=8).map(|e| EPS2 * 2f64.powi(-e)).collect();
        let mut dir = vec![T::zero(); d];
        dir[0] = T::one();
        let res: Vec<(f64, bool)> = charts
            .par_iter()
            .map(|c| {
                let (rows, slope) = lemma33a_ladder(&sys, c, &dir, 2, &targets)?;
                Ok((slope, rows.iter().all(|r| r.comparable())))
            })
            .collect::<Result<_>>()?;
        let mut slopes: Vec<f64> = res.iter().map(|r| r.0).collect();
        slopes.sort_by(f64::total_cmp);
        Some(Quadratic { min_slope: slopes[0], median_slope: slopes[slopes.len() / 2], comparable: res.iter().all(|r| r.1) })
    } else {
        None
    };
    Ok((per_center.into_iter().flatten().collect(), LinearizeExtra { taylor_d, quadratic }))
}

/// The slow-bundle linearization of a split system, probes along `E1`.
fn linearize_slow<T: Real>(cfg: &RunConfig, centers: &[Vec<f64>]) -> Result<(Vec<ProbeRecord>, LinearizeExtra)> {
    let sys = build::<T>(&cfg.system)?;
    let p_max = cfg.p_max;
    let horizon = cfg.horizon.max(10);
    let per_center: Vec<(Vec<ProbeRecord>, f64)> = centers
        .par_iter()
        .enumerate()
        .map(|(ci, x)| {
            let split = split_chart(&*sys, &from_f64::<T>(x), horizon, p_max)?;
            let taylor_d = e1_taylor_d(&*sys, std::slice::from_ref(&split), EPS1, 8, cfg.seed ^ ci as u64)?;
            let e1 = split.e1.basis()[0].clone();
            let probes: Vec<Vec<T>> = random_probes::<T>(1, cfg.probes, EPS2, cfg.seed, ci as u64)
                .into_iter()
                .map(|s| scale(&e1, s[0]))
                .collect();
            let (inc, _) = e1_increments(&*sys, &split, &probes, p_max)?;
            let records: Vec<ProbeRecord> = probes
                .iter()
                .zip(inc)
                .enumerate()
                .map(|(pi, (u, increments))| ProbeRecord {
                    center_ix: ci,
                    probe_ix: pi,
                    u_norm: norm(u).to64(),
                    increments,
                    conj: vec![None; p_max],
                    l_norm: vec![None; p_max],
                    l_dev: vec![None; p_max],
                    identity_gap: 0.0,
                })
                .collect();
            Ok((records, taylor_d))
        })
        .collect::<Result<_>>()?;
    let taylor_d = per_center.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    Ok((per_center.into_iter().flat_map(|(r, _)| r).collect(), LinearizeExtra { taylor_d, quadratic: None }))
}

// --------------------------------------------------------------- distortion

fn distortion(cfg: &RunConfig) -> Result<SuiteOutput> {
    let sys = build::<f64>(&cfg.system)?;
    let idx = index(&*sys, cfg)?;
    let label = sys.label();
    let grid = delta_grid(cfg.eps, cfg.grid);
    let mut faces = grid.clone();
    faces.extend([cfg.delta, cfg.eps]);
    let cands = center_candidates(&*sys, &idx, cfg.eps, &faces, cfg.p_max, cfg.centers, cfg.seed)?;
    let rep = distortion_from(&cands, cfg.delta, cfg.eps);
    let shrink = shrink_from(&cands, cfg.eps, cfg.rho, &grid);

    let mut out = SuiteOutput::new(Suite::Distortion, BOWEN_HEADER);
    for r in &rep.rows {
        out.table.as_mut().unwrap().rows.push(vec![
            label.clone(),
            r.center_ix.to_string(),
            r.p.to_string(),
            real(r.eps),
            real(r.delta),
            real(r.diam_eps),
            real(r.diam_delta),
            opt(r.ratio),
            real(r.ell_eps),
            real(r.ell_delta),
            r.defined().to_string(),
        ]);
    }
    let h = cfg.p_max / 2;
    let (lo, hi) = (rep.max_over(1, h.max(1)), rep.max_over(h + 1, cfg.p_max));
    out.summary = json!({
        "r_hat": rep.r_hat,
        "per_center_max": rep.per_center_max,
        "coverage": rep.coverage,
        "max_ratio_low_p": lo,
        "max_ratio_high_p": hi,
        "shrink_delta": shrink.delta,
        "shrink_warn": shrink.warn,
        "shrink_ratios": shrink.ratios.iter().map(|(d, r)| json!([d, r])).collect::<Vec<_>>(),
        "sample_size": idx.sample.len(),
        "sample_resolution": idx.resolution(),
    });
    out.verdict("coverage", Verdict::of(rep.coverage >= 0.8));
    if cfg.p_max >= 2 {
        out.verdict("distortion_stable", Verdict::of(hi <= 1.5 * lo));
    } else {
        out.verdict("distortion_stable", Verdict::Warn);
    }
    if sys.is_linear() {
        let oracle = cfg.eps / cfg.delta;
        out.verdict("ratio_matches_linear_oracle", Verdict::of((rep.r_hat / oracle - 1.0).abs() <= 0.03));
    }
    out.verdict("shrink_delta", if shrink.warn { Verdict::Warn } else { Verdict::Pass });
    Ok(out)
}

// ----------------------------------------------------------------- spectrum

fn spectrum(cfg: &RunConfig) -> Result<SuiteOutput> {
    let sys = build::<f64>(&cfg.system)?;
    let sample = sample_lambda(&*sys, cfg.budget.min(100_000), cfg.seed)?;
    let centers = centers_of(&sample, cfg)?;
    let splits: Vec<SplittingEstimate<f64>> =
        centers.par_iter().map(|x| split_chart(&*sys, x, cfg.horizon, 0)).collect::<Result<_>>()?;
    let rows = spectrum_rows(&splits, cfg.alpha);
    let label = sys.label();
    let mut out = SuiteOutput::new(Suite::Spectrum, SPECTRUM_HEADER);
    for r in &rows {
        out.table.as_mut().unwrap().rows.push(vec![
            label.clone(),
            r.center_ix.to_string(),
            real(r.alpha_hat),
            real(r.beta_hat),
            real(r.pinch_margin),
            if r.pass { "pass" } else { "fail" }.to_string(),
        ]);
    }
    let min_margin = rows.iter().map(|r| r.pinch_margin).fold(f64::INFINITY, f64::min);
    let spread_max = rows.iter().map(|r| r.beta_hat - r.alpha_hat).fold(0.0, f64::max);
    out.summary = json!({ "alpha": cfg.alpha, "min_pinch_margin": min_margin, "max_rate_spread": spread_max });
    out.verdict("pinching", Verdict::of(rows.iter().all(|r| r.pass)));
    if cfg.system.is_split() {
        let margins: Vec<Option<f64>> = splits.iter().map(|s| s.domination_margin()).collect();
        let worst = margins.iter().map(|m| m.unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
        out.summary["min_domination_margin"] = json!(worst);
        out.verdict("domination", Verdict::of(worst >= 0.1));
    }
    Ok(out)
}

// ---------------------------------------------------------------- splitting

fn splitting(cfg: &RunConfig) -> Result<SuiteOutput> {
    if !cfg.system.is_split() {
        return Err(LabError::Domain(format!("system `{}` has no dominated splitting", cfg.system.name)));
    }
    let sys = build::<f64>(&cfg.system)?;
    let idx = index(&*sys, cfg)?;
    let label = sys.label();
    let splits = splittings_at_centers(&*sys, &idx, cfg.horizon, 0, cfg.centers, cfg.seed)?;
    let (lambda1, mu2) = domination_constants(&splits)?;
    let omega = omega_eps(&*sys, &idx, &splits, cfg.eps)?;
    let pe = p_eps(cfg.eps, omega.omega, mu2, lambda1).ok();
    let sets: Vec<Vec<(usize, f64, f64, bool, bool)>> = splits
        .par_iter()
        .map(|s| {
            let cands = b1_candidates(&*sys, s, &idx, cfg.eps, cfg.p_max)?;
            Ok((0..=cfg.p_max)
                .map(|p| {
                    let b = b1_set(&cands, s, p, cfg.eps);
                    (p, b.diam_prime_b1, b.diam_prime_full, b.ineq52(), b.ineq53())
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut out = SuiteOutput::new(Suite::Splitting, B1SETS_HEADER);
    let (mut ok52, mut ok53, mut checked53) = (true, true, 0usize);
    for (ci, rows) in sets.iter().enumerate() {
        for &(p, b1, full, i52, i53) in rows {
            ok52 &= i52;
            if pe.is_some_and(|pe| p >= pe) {
                ok53 &= i53;
                checked53 += 1;
            }
            out.table.as_mut().unwrap().rows.push(vec![
                label.clone(),
                ci.to_string(),
                p.to_string(),
                real(cfg.eps),
                real(b1),
                real(full),
                i52.to_string(),
                i53.to_string(),
            ]);
        }
    }
    let tol = if cfg.system.param("eta", 0.0) == 0.0 { 1e-6 } else { 1e-3 };
    let defects: Vec<f64> = splits.iter().map(|s| s.invariance_defect()).collect::<Result<_>>()?;
    let worst_defect = defects.iter().cloned().fold(0.0, f64::max);
    let margin = splits.iter().map(|s| s.domination_margin().unwrap_or(f64::NEG_INFINITY)).fold(f64::INFINITY, f64::min);
    out.summary = json!({
        "lambda1": lambda1,
        "mu2": mu2,
        "omega": omega.omega,
        "omega_per_center": omega.per_center,
        "omega_excluded": omega.excluded,
        "p_eps": pe,
        "ineq53_rows_checked": checked53,
        "invariance_defect": worst_defect,
        "min_domination_margin": margin,
    });
    out.verdict("ineq52", Verdict::of(ok52));
    out.verdict(
        "ineq53_beyond_p_eps",
        match pe {
            None => Verdict::Fail,
            Some(_) if checked53 == 0 => Verdict::Warn,
            Some(_) => Verdict::of(ok53),
        },
    );
    out.verdict("omega_positive", Verdict::of(omega.omega > 0.0 && !omega.violation));
    out.verdict("domination", Verdict::of(margin >= 0.1));
    out.verdict("splitting_invariance", Verdict::of(worst_defect <= tol));
    Ok(out)
}
