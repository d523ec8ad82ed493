//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the terminal.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use bowen_core::charts::{UnstableChart, EPS2};
use bowen_core::linalg::{from_f64, subspace_angle, Subspace};
use bowen_core::linearization::{default_block, gamma_for, lemma33a_ladder};
use bowen_core::splitting::split_chart;
use bowen_core::systems::{Blocked, PCat, Prod4};
use bowen_core::Dd;
use bowen_lab::{run, RunConfig, RunReport, Suite, SuiteOutput, Table, Verdict};
use serde_json::{json, Value};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)*) => {
        if !$cond {
            return Err(format!($($fmt)*));
        }
    };
}

const CAT: &str = include_str!("../../../configs/cat.json");
const PCAT: &str = include_str!("../../../configs/pcat.json");
const PROD4: &str = include_str!("../../../configs/prod4.json");
const PROD4_PERTURBED: &str = include_str!("../../../configs/prod4-perturbed.json");

fn lambda_plus() -> f64 {
    (3.0 + 5f64.sqrt()) / 2.0
}

fn with(base: &str, patch: Value) -> Value {
    let mut v: Value = serde_json::from_str(base).expect("shipped config parses");
    for (k, x) in patch.as_object().unwrap() {
        v[k] = x.clone();
    }
    v
}

fn run_json(v: &Value) -> Result<RunReport, String> {
    let cfg = RunConfig::from_json(&v.to_string()).map_err(|e| e.to_string())?;
    let r = run(&cfg, None).map_err(|e| e.to_string())?;
    if let Some((s, m)) = r.diagnostics.first() {
        return Err(format!("{s}: {m}"));
    }
    Ok(r)
}

fn part(r: &RunReport, s: Suite) -> Result<&SuiteOutput, String> {
    r.parts.iter().find(|p| p.suite == s).ok_or_else(|| format!("no {} output", s.name()))
}

fn num(v: &Value, key: &str) -> Result<f64, String> {
    v[key].as_f64().ok_or_else(|| format!("summary has no number `{key}`"))
}

fn verdict(o: &SuiteOutput, name: &str) -> Option<Verdict> {
    o.verdicts.get(name).copied()
}

/// Column `name` of `t` parsed as reals; empty cells become `None`.
fn column(t: &Table, name: &str) -> Vec<Option<f64>> {
    let j = t.header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    t.rows.iter().map(|r| if r[j].is_empty() { None } else { Some(r[j].parse().expect("real cell")) }).collect()
}

/// `F_p`, `L` and the conjugacy residual collapse to the identity on the
/// linear systems.
fn linear_degeneracy() -> Outcome {
    let systems = [
        json!({"name": "cat"}),
        json!({"name": "prod4", "params": {"eta": 0.0}}),
        json!({"name": "solenoid", "params": {"a": 0.5, "lambda": 0.1}}),
    ];
    let mut worst = 0.0f64;
    for s in systems {
        let cfg = json!({
            "system": s, "seed": 1, "suite": "linearize", "eps": 0.1, "delta": 0.05,
            "p_max": 12, "horizon": 20, "centers": 1, "budget": 20000, "probes": 64
        });
        let r = run_json(&cfg)?;
        let o = part(&r, Suite::Linearize)?;
        let t = o.table.as_ref().unwrap();
        ensure!(t.rows.len() == 64 * 12, "{}: {} rows", s["name"], t.rows.len());
        for key in ["max_increment", "max_conj_residual", "max_identity_gap", "max_l_dev"] {
            let v = num(&o.summary, key)?;
            ensure!(v <= 1e-10, "{} {key} = {v:e}", s["name"]);
            worst = worst.max(v);
        }
        let l = column(t, "l_norm");
        ensure!(l.iter().all(|x| x.is_some_and(|x| (x - 1.0).abs() <= 1e-10)), "{}: ‖L‖ ≠ 1", s["name"]);
    }
    Ok(format!("worst deviation {worst:.1e}"))
}

/// Pooled least-squares slope of `ln(increment/‖u‖²)` on `p ≥ 3`, computed
/// here from the CSV rather than by the library.
fn refit_gamma(t: &Table, floor: f64) -> f64 {
    let (u, p, inc) = (column(t, "u_norm"), column(t, "p"), column(t, "increment"));
    let pts: Vec<(f64, f64)> = (0..t.rows.len())
        .filter_map(|i| {
            let (u, p, v) = (u[i]?, p[i]?, inc[i]?);
            (p >= 3.0 && v > floor * u).then(|| (p, (v / (u * u)).ln()))
        })
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|q| q.0).sum::<f64>() / n;
    let my = pts.iter().map(|q| q.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|q| (q.0 - mx) * (q.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|q| (q.0 - mx) * (q.0 - mx)).sum();
    (sxy / sxx).exp()
}

fn cauchy_rate() -> Outcome {
    let r = run_json(&with(PCAT, json!({"suite": "linearize"})))?;
    let o = part(&r, Suite::Linearize)?;
    let s = &o.summary;
    let (g, sp) = (num(s, "gamma_hat")?, num(s, "cauchy_spread")?);
    let k = s["block"].as_u64().ok_or("no block")? as usize;
    let gk = gamma_for(num(s, "chart_constant")?, num(s, "alpha_hat")?, k);
    ensure!(gk < 0.9, "block {k} gives γ = {gk}");
    ensure!(g <= 0.95, "γ̂ = {g}");
    ensure!(sp <= 10.0, "constant spread {sp}");
    let floor = 64.0 * 2f64.powi(-104);
    let g2 = refit_gamma(o.table.as_ref().unwrap(), floor);
    ensure!((g2 / g - 1.0).abs() <= 1e-6, "refit γ = {g2} vs reported {g}");
    Ok(format!("k = {k}, γ = {gk:.3}, γ̂ = {g:.4}, spread = {sp:.2}"))
}

fn quadratic_error() -> Outcome {
    // the generic center, in double-double on the block system
    let f = PCat::<f64>::new(0.03).map_err(|e| e.to_string())?;
    let x = [0.2, 0.7];
    let sp = split_chart(&f, &x, 60, 0).map_err(|e| e.to_string())?;
    let k = default_block(sp.chart.constant(), 2.0 * sp.rates1.0 - sp.rates1.1).map_err(|e| e.to_string())?;
    let sys = Blocked::new(PCat::<Dd>::new(0.03).map_err(|e| e.to_string())?, k).map_err(|e| e.to_string())?;
    let chart = UnstableChart::new(&sys, &from_f64::<Dd>(&x), 3, 2).map_err(|e| e.to_string())?;
    let targets: Vec<f64> = (3..=8).map(|e| EPS2 * 2f64.powi(-e)).collect();
    let (rows, slope) = lemma33a_ladder(&sys, &chart, &from_f64::<Dd>(&[1.0]), 2, &targets).map_err(|e| e.to_string())?;
    ensure!((slope - 2.0).abs() <= 0.2, "slope {slope} at (0.2, 0.7)");
    ensure!(rows.iter().all(|r| r.comparable()), "comparability fails at (0.2, 0.7)");
    // and over sampled centers through the CLI
    let r = run_json(&with(PCAT, json!({"suite": "linearize", "centers": 16, "probes": 2})))?;
    let o = part(&r, Suite::Linearize)?;
    let med = num(&o.summary, "quadratic_slope_median")?;
    ensure!(verdict(o, "quadratic_error") == Some(Verdict::Pass), "quadratic_error verdict, median slope {med}");
    Ok(format!("slope {slope:.3} at (0.2, 0.7), median {med:.3} over 16 centers"))
}

fn l_operator() -> Outcome {
    let r = run_json(&with(PCAT, json!({"suite": "linearize", "centers": 16})))?;
    let o = part(&r, Suite::Linearize)?;
    let t = o.table.as_ref().unwrap();
    let c1 = 10.0 * num(&o.summary, "taylor_d")? / (1.0 - num(&o.summary, "gamma_hat")?);
    let (u, l, dev) = (column(t, "u_norm"), column(t, "l_norm"), column(t, "l_dev"));
    let mut max_l = 0.0f64;
    let mut worst = 0.0f64;
    for i in 0..t.rows.len() {
        let (u, l, dev) = (u[i].unwrap(), l[i].ok_or("missing l_norm")?, dev[i].ok_or("missing l_dev")?);
        let xi = u / 2.0;
        ensure!(xi <= EPS2 / 2.0 * (1.0 + 1e-12), "probe ‖ξ‖ = {xi}");
        max_l = max_l.max(l);
        worst = worst.max(dev / (c1 * xi));
    }
    ensure!(max_l <= 2.1, "max ‖L‖ = {max_l}");
    ensure!(worst <= 1.0, "‖L − I‖ reaches {worst:.3}·Ĉ₁‖ξ‖");
    Ok(format!("max ‖L‖ = {max_l:.4}, max ‖L − I‖/(Ĉ₁‖ξ‖) = {worst:.3}"))
}

fn cat_bowen_oracle() -> Outcome {
    let r = run_json(&with(CAT, json!({"suite": "distortion"})))?;
    let o = part(&r, Suite::Distortion)?;
    let t = o.table.as_ref().unwrap();
    let (p, diam) = (column(t, "p"), column(t, "diam_eps"));
    let mut worst = 0.0f64;
    for i in 0..t.rows.len() {
        let p = p[i].unwrap();
        let want = 0.2 * lambda_plus().powf(-p);
        let got = diam[i].ok_or("undefined ball")?;
        worst = worst.max((got / want - 1.0).abs());
    }
    ensure!(p.iter().flatten().fold(0.0f64, |a, &b| a.max(b)) == 10.0, "p does not reach 10");
    ensure!(worst <= 0.01, "diameter off by {:.3}%", 100.0 * worst);
    let rh = num(&o.summary, "r_hat")?;
    ensure!((rh / 10.0 - 1.0).abs() <= 0.03, "R̂ = {rh}");
    Ok(format!("max diameter error {:.2e}, R̂ = {rh:.6}", worst))
}

fn pcat_distortion() -> Outcome {
    let base = with(PCAT, json!({"suite": "distortion"}));
    ensure!(base["centers"] == 64 && base["p_max"] == 12, "config drifted");
    let r = run_json(&base)?;
    let o = part(&r, Suite::Distortion)?;
    let cov = num(&o.summary, "coverage")?;
    ensure!(cov >= 0.8, "coverage {cov}");
    let t = o.table.as_ref().unwrap();
    let (p, ratio) = (column(t, "p"), column(t, "ratio"));
    let max_in = |lo: f64, hi: f64| {
        (0..t.rows.len())
            .filter(|&i| (lo..=hi).contains(&p[i].unwrap()))
            .filter_map(|i| ratio[i])
            .fold(0.0f64, f64::max)
    };
    let (low, high) = (max_in(1.0, 6.0), max_in(7.0, 12.0));
    ensure!(high <= 1.5 * low, "max ratio {high} on [7,12] vs {low} on [1,6]");
    let d1 = num(&o.summary, "shrink_delta")?;
    let dense = run_json(&with(PCAT, json!({"suite": "distortion", "budget": 2_000_000})))?;
    let d2 = num(&part(&dense, Suite::Distortion)?.summary, "shrink_delta")?;
    let step = 0.1 / base["grid"].as_u64().unwrap_or(20) as f64;
    ensure!((d1 - d2).abs() <= step * (1.0 + 1e-9), "shrink δ {d1} vs {d2} after doubling");
    Ok(format!("coverage {cov}, ratios {low:.4}/{high:.4}, shrink δ {d1} → {d2}"))
}

fn ambient(chart: &UnstableChart<f64>, s: &Subspace<f64>) -> Result<Subspace<f64>, String> {
    let e = chart.frame_matrix();
    Subspace::span(&s.basis().iter().map(|b| e.mul_vec(b)).collect::<Vec<_>>()).map_err(|e| e.to_string())
}

fn splitting_recovery() -> Outcome {
    let lin = Prod4::<f64>::new(0.0);
    let l = lambda_plus();
    let v = {
        let n = (1.0 + (l - 2.0) * (l - 2.0)).sqrt();
        [1.0 / n, (l - 2.0) / n]
    };
    let block1 = Subspace::span(&[vec![v[0], v[1], 0.0, 0.0]]).unwrap();
    let block2 = Subspace::span(&[vec![0.0, 0.0, v[0], v[1]]]).unwrap();
    let centers = [[0.1, 0.2, 0.3, 0.4], [0.71, 0.05, 0.33, 0.9], [0.5, 0.5, 0.25, 0.125]];
    let (mut ang, mut rate) = (0.0f64, 0.0f64);
    for x in &centers {
        let sp = split_chart(&lin, x, 40, 0).map_err(|e| e.to_string())?;
        ang = ang.max(subspace_angle(&ambient(&sp.chart, &sp.e1)?, &block1).unwrap());
        ang = ang.max(subspace_angle(&ambient(&sp.chart, sp.e2.as_ref().unwrap())?, &block2).unwrap());
        let r2 = sp.rates2.unwrap();
        for (got, want) in [(sp.rates1.0, l.ln()), (sp.rates1.1, l.ln()), (r2.0, 2.0 * l.ln()), (r2.1, 2.0 * l.ln())] {
            rate = rate.max((got - want).abs());
        }
    }
    ensure!(ang < 1e-9, "angle to eigenblocks {ang:e}");
    ensure!(rate <= 1e-10, "rate error {rate:e}");

    let pert = Prod4::<f64>::new(0.02);
    let (mut margin, mut cauchy) = (f64::INFINITY, 0.0f64);
    for x in &centers {
        let a = split_chart(&pert, x, 60, 0).map_err(|e| e.to_string())?;
        let b = split_chart(&pert, x, 120, 0).map_err(|e| e.to_string())?;
        margin = margin.min(a.domination_margin().ok_or("no fast bundle")?);
        cauchy = cauchy.max(subspace_angle(&ambient(&a.chart, &a.e1)?, &ambient(&b.chart, &b.e1)?).unwrap());
    }
    ensure!(margin >= 0.5, "domination margin {margin}");
    ensure!(cauchy < 1e-6, "E1 moves {cauchy:e} rad between horizons 60 and 120");
    Ok(format!("angle {ang:.1e}, rate error {rate:.1e}, margin {margin:.3}, horizon drift {cauchy:.1e}"))
}

fn b1_inequalities() -> Outcome {
    let mut notes = Vec::new();
    for cfg in [PROD4, PROD4_PERTURBED] {
        let v = with(cfg, json!({"suite": "splitting"}));
        ensure!(v["budget"].as_u64().unwrap_or(0) >= 1_000_000, "budget below 1e6");
        let r = run_json(&v)?;
        let o = part(&r, Suite::Splitting)?;
        let s = &o.summary;
        let omega = num(s, "omega")?;
        ensure!(omega > 0.0, "ω̂ = {omega}");
        let pe = s["p_eps"].as_u64().ok_or("p_eps undefined")? as f64;
        let t = o.table.as_ref().unwrap();
        let p = column(t, "p");
        let (j52, j53) = (t.header.len() - 2, t.header.len() - 1);
        let mut checked = 0;
        for (i, row) in t.rows.iter().enumerate() {
            ensure!(row[j52] == "true", "B1 diameter bound fails at row {i}");
            if p[i].unwrap() >= pe {
                ensure!(row[j53] == "true", "B1 contraction bound fails at row {i}");
                checked += 1;
            }
        }
        ensure!(checked > 0, "no rows with p ≥ p_eps");
        notes.push(format!("{}: ω̂ = {omega}, p_eps = {pe}, {checked} rows", v["system"]["params"]["eta"]));
    }
    Ok(notes.join("; "))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cases = [
        ("full", json!({"system": {"name": "prod4", "params": {"eta": 0.02}}, "seed": 4, "eps": 0.1, "delta": 0.05,
            "p_max": 4, "horizon": 20, "centers": 10, "budget": 65536, "probes": 4})),
        ("full", json!({"system": {"name": "pcat", "params": {"eta": 0.03}}, "seed": 9, "eps": 0.1, "delta": 0.02,
            "p_max": 8, "horizon": 20, "centers": 4, "budget": 40000, "probes": 4})),
        ("full", json!({"system": {"name": "solenoid"}, "seed": 2, "eps": 0.1, "delta": 0.05,
            "p_max": 6, "horizon": 20, "centers": 2, "budget": 20000, "probes": 4})),
    ];
    let mut files = 0;
    for (ci, (suite, cfg)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("c{ci}.json"));
        std::fs::write(&path, cfg.to_string()).map_err(|e| e.to_string())?;
        let mut first: Option<Vec<(String, Vec<u8>)>> = None;
        for threads in [1, 2, 8] {
            let out = dir.path().join(format!("c{ci}-t{threads}"));
            let st = Command::new(env!("CARGO_BIN_EXE_bowen-lab"))
                .arg(suite)
                .arg("--config")
                .arg(&path)
                .arg("--out-dir")
                .arg(&out)
                .env("BOWEN_LAB_THREADS", threads.to_string())
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(st.status.code() != Some(2), "case {ci}: {}", String::from_utf8_lossy(&st.stderr));
            let csvs = read_csvs(&out)?;
            ensure!(!csvs.is_empty(), "case {ci}: no CSV written");
            match &first {
                None => first = Some(csvs),
                Some(f) => ensure!(*f == csvs, "case {ci}: CSVs differ under {threads} workers"),
            }
        }
        files += first.map_or(0, |f| f.len());
    }
    Ok(format!("{files} CSVs identical under 1, 2 and 8 workers"))
}

fn read_csvs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let p = e.map_err(|e| e.to_string())?.path();
        if p.extension().is_some_and(|x| x == "csv") {
            out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    out.sort();
    Ok(out)
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 9] = [
        ("linear degeneracy", 5.0, linear_degeneracy),
        ("Cauchy rate on pcat", 60.0, cauchy_rate),
        ("quadratic error", 30.0, quadratic_error),
        ("L operator bounds", 30.0, l_operator),
        ("cat Bowen-ball oracle", 120.0, cat_bowen_oracle),
        ("pcat distortion stability", 300.0, pcat_distortion),
        ("splitting recovery", 60.0, splitting_recovery),
        ("B1 inequalities", 180.0, b1_inequalities),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let mut res = check();
        let secs = start.elapsed().as_secs_f64();
        if res.is_ok() && secs > *limit {
            res = Err(format!("took {secs:.1} s, limit {limit} s"));
        }
        match res {
            Ok(d) => println!("PASS {} {name}: {d} ({secs:.1} s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("FAIL {} {name}: {e} ({secs:.1} s)", i + 1);
            }
        }
    }
    if failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
