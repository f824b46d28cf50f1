//! One function per command. Each writes its tables into the run directory
//! and returns module-level metadata for the manifest.

use serde::Deserialize;
use serde_json::{json, Value};

use wigner_gaps::dynamics::{coupled_relaxation_path, relaxation_t_floor, RELAXATION_BUDGET};
use wigner_gaps::ensembles::{sample_gaussian_invariant, sample_gxe_spectrum_tridiagonal, sample_wigner};
use wigner_gaps::gue_kernel::{poissonized_c, rho2_grid};
use wigner_gaps::moment_match::{build_matched_gde, DEFAULT_TOL, T_FLOOR};
use wigner_gaps::observables::{
    green_comparison, local_law_deviation, local_law_scale, resolvent, sandwich_check, ward_check, LOCAL_LAW_BUDGET,
};
use wigner_gaps::runner::{derive_stream, parallel_map, stream_seed};
use wigner_gaps::spectra::{bulk_gaps, gap_at, min_bulk_gap};
use wigner_gaps::stats::{
    dkw_bound, kolmogorov_distance, kolmogorov_distance_to, median, min_gap_limit_cdf, min_gap_limit_quantile,
    pooled_dkw_bound, rate_fit, sign_test_p_value,
};
use wigner_gaps::{c64, Ecdf, EntryLaw, SmoothingParams, Spectrum, SymmetryClass, WignerDraw};

use crate::config::{Command, ExperimentConfig};
use crate::output::{num, Failure, RunOutput, SeedBlock};

const DELTA: f64 = 0.05;

/// Replica seeds each command will use, for the manifest.
pub fn seed_plan(cfg: &ExperimentConfig) -> Vec<SeedBlock> {
    let per_n = |prefix: &str| {
        cfg.n
            .iter()
            .enumerate()
            .map(|(j, n)| SeedBlock::new(format!("{prefix} N={n}"), stream_seed(cfg.master_seed, j as u64), cfg.reps))
            .collect()
    };
    match cfg.command {
        Command::SampleGaps => per_n("sample-gaps"),
        Command::MinGap => per_n("min-gap"),
        Command::Relax => per_n("relax"),
        Command::LocalLaw => per_n("local-law"),
        Command::Compare => {
            let mut v = Vec::new();
            for (j, n) in cfg.n.iter().enumerate() {
                for (pi, p) in cfg.p.iter().enumerate() {
                    let master = derive_stream(compare_seed(cfg, j), pi as u64, 0);
                    v.push(SeedBlock::new(format!("compare N={n} p={p}"), master, cfg.reps));
                }
            }
            v
        }
        Command::MomentMatch | Command::Kernel | Command::Rate => Vec::new(),
    }
}

fn compare_seed(cfg: &ExperimentConfig, j: usize) -> u64 {
    stream_seed(cfg.master_seed, j as u64)
}

pub fn run(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    match cfg.command {
        Command::MomentMatch => moment_match(cfg, out),
        Command::SampleGaps => sample_gaps(cfg, out),
        Command::MinGap => min_gap(cfg, out),
        Command::Relax => relax(cfg, out),
        Command::LocalLaw => local_law(cfg, out),
        Command::Kernel => kernel(cfg, out),
        Command::Compare => compare(cfg, out),
        Command::Rate => rate(cfg, out),
    }
}

fn atomic(cfg: &ExperimentConfig) -> &wigner_gaps::AtomicLaw {
    match &cfg.ensemble {
        EntryLaw::Atomic(a) => a,
        _ => unreachable!("validated"),
    }
}

fn moment_match(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let mu = atomic(cfg);
    let results = cfg
        .p
        .iter()
        .map(|&p| build_matched_gde(mu, p, cfg.t, DEFAULT_TOL))
        .collect::<Result<Vec<_>, _>>()?;
    out.write_json("match.json", &json!({ "manifest_id": out.id(), "results": results }))?;
    Ok(json!({
        "tolerance": DEFAULT_TOL,
        "t_floor": T_FLOOR,
        "t_used": results.iter().map(|r| r.t_used).collect::<Vec<_>>(),
        "residual": results.iter().map(|r| r.residual).collect::<Vec<_>>(),
    }))
}

fn dense_or_tridiagonal(law: &EntryLaw, n: usize, class: SymmetryClass, seed: u64) -> wigner_gaps::Result<Spectrum> {
    match law {
        EntryLaw::StandardGaussian => sample_gxe_spectrum_tridiagonal(n, class, seed),
        _ => sample_wigner(law, n, class, seed)?.spectrum(),
    }
}

fn sample_gaps(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let class: SymmetryClass = cfg.class.into();
    let reference_id = class.gaussian_name();
    let header = ["ensemble_id", "N", "replica", "seed", "k", "raw_gap", "scaled_gap"];
    let (mut rows_a, mut rows_b, mut dk_rows, mut summary) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    let mut fit_points = Vec::new();
    for (j, &n) in cfg.n.iter().enumerate() {
        let k_mid = n / 2;
        let res = parallel_map(cfg.reps, cfg.workers, stream_seed(cfg.master_seed, j as u64), |_, s| {
            let a = sample_wigner(&cfg.ensemble, n, class, derive_stream(s, 0, 0))?.spectrum()?;
            let b = sample_gxe_spectrum_tridiagonal(n, class, derive_stream(s, 1, 0))?;
            Ok((s, bulk_gaps(&a, cfg.alpha), bulk_gaps(&b, cfg.alpha), gap_at(&a, k_mid).scaled_gap, gap_at(&b, k_mid).scaled_gap))
        })?;
        for (i, (s, ga, gb, _, _)) in res.iter().enumerate() {
            for (rows, gaps, id) in [(&mut rows_a, ga, cfg.ensemble.id()), (&mut rows_b, gb, reference_id.to_string())] {
                for g in gaps {
                    rows.push(vec![id.clone(), n.to_string(), i.to_string(), s.to_string(), g.k.to_string(), num(g.raw_gap), num(g.scaled_gap)]);
                }
            }
        }
        if cfg.reps == 0 {
            continue;
        }
        let mid_a = Ecdf::new(res.iter().map(|r| r.3).collect())?;
        let mid_b = Ecdf::new(res.iter().map(|r| r.4).collect())?;
        let d = kolmogorov_distance(&mid_a, &mid_b);
        let band = pooled_dkw_bound(cfg.reps, cfg.reps, DELTA);
        dk_rows.push(vec![n.to_string(), k_mid.to_string(), cfg.reps.to_string(), num(d), num(band)]);
        summary.push(json!({ "N": n, "k": k_mid, "d_k": d, "pooled_dkw": band }));
        fit_points.push((n as f64, d));
    }
    out.write_csv("gaps_wigner.csv", &header, rows_a)?;
    out.write_csv("gaps_reference.csv", &header, rows_b)?;
    out.write_csv("dk.csv", &["N", "k", "reps", "d_k", "dkw_pooled"], dk_rows)?;
    let fit = rate_fit(&fit_points).ok();
    out.write_json("dk_summary.json", &json!({ "manifest_id": out.id(), "rows": summary, "rate_fit": fit }))?;
    Ok(json!({ "reference_sampler": "tridiagonal", "dkw_delta": DELTA, "rate_slope": fit.map(|f| f.slope) }))
}

fn min_gap(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let class: SymmetryClass = cfg.class.into();
    let exponent = match class {
        SymmetryClass::ComplexHermitian => 4.0 / 3.0,
        SymmetryClass::RealSymmetric => 1.5,
    };
    let (mut rows, mut summary) = (Vec::new(), Vec::new());
    for (j, &n) in cfg.n.iter().enumerate() {
        let res = parallel_map(cfg.reps, cfg.workers, stream_seed(cfg.master_seed, j as u64), |_, s| {
            let spec = dense_or_tridiagonal(&cfg.ensemble, n, class, s)?;
            Ok((s, min_bulk_gap(&spec, cfg.alpha, exponent)?))
        })?;
        if res.is_empty() {
            continue;
        }
        let scaled: Vec<f64> = res.iter().map(|r| r.1.scaled_gap).collect();
        // The real class has no closed-form constant; calibrate on the median.
        let (c, mode) = match class {
            SymmetryClass::ComplexHermitian => (poissonized_c(cfg.alpha)?, "poissonized"),
            SymmetryClass::RealSymmetric => (min_gap_limit_quantile(0.5, class) / median(&scaled), "self_calibrated"),
        };
        let normalized: Vec<f64> = scaled.iter().map(|x| c * x).collect();
        for (i, ((s, g), z)) in res.iter().zip(&normalized).enumerate() {
            rows.push(vec![n.to_string(), i.to_string(), s.to_string(), g.k.to_string(), num(g.raw_gap), num(g.scaled_gap), num(*z)]);
        }
        let d = kolmogorov_distance_to(&Ecdf::new(normalized.clone())?, |x| min_gap_limit_cdf(x, class));
        summary.push(json!({
            "N": n,
            "c": c,
            "c_mode": mode,
            "exponent": exponent,
            "d_k": d,
            "dkw": dkw_bound(cfg.reps, DELTA),
            "median_normalized": median(&normalized),
            "limit_median": min_gap_limit_quantile(0.5, class),
        }));
    }
    out.write_csv("min_gaps.csv", &["N", "replica", "seed", "k", "raw_gap", "scaled_gap", "normalized"], rows)?;
    out.write_json("min_gap_summary.json", &json!({ "manifest_id": out.id(), "rows": summary }))?;
    Ok(json!({ "exponent": exponent, "dkw_delta": DELTA }))
}

fn relax(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let class: SymmetryClass = cfg.class.into();
    let coupling = cfg.coupling.into();
    let checkpoints = [cfg.t / 10.0, cfg.t];
    let (mut rows, mut summary) = (Vec::new(), Vec::new());
    for (j, &n) in cfg.n.iter().enumerate() {
        let res = parallel_map(cfg.reps, cfg.workers, stream_seed(cfg.master_seed, j as u64), |_, s| {
            coupled_relaxation_path(&cfg.ensemble, n, class, &checkpoints, cfg.dt, cfg.alpha, s, coupling)
        })?;
        let mut final_errs = Vec::new();
        let mut decreased = 0;
        for (path, reports) in res.iter().enumerate() {
            for r in reports {
                for row in &r.rows {
                    rows.push(vec![
                        path.to_string(),
                        row.k.to_string(),
                        num(row.gap_a),
                        num(row.gap_b),
                        num(row.abs_err),
                        n.to_string(),
                        num(r.t),
                        r.seed.to_string(),
                    ]);
                }
            }
            final_errs.extend(reports[1].rows.iter().map(|r| r.abs_err));
            if reports[1].median_error < reports[0].median_error {
                decreased += 1;
            }
        }
        if res.is_empty() {
            continue;
        }
        let nf = n as f64;
        summary.push(json!({
            "N": n,
            "t": cfg.t,
            "median_error": median(&final_errs),
            "target": RELAXATION_BUDGET / (nf * nf * cfg.t),
            "paths_decreasing": decreased,
            "paths": res.len(),
            "sign_test_p": sign_test_p_value(decreased, res.len()),
            "t_floor": relaxation_t_floor(n),
            "below_t_floor": cfg.t < relaxation_t_floor(n),
        }));
    }
    out.write_csv("relax.csv", &["path", "k", "gap_a", "gap_b", "abs_err", "N", "t", "seed"], rows)?;
    out.write_json("relax_summary.json", &json!({ "manifest_id": out.id(), "rows": summary }))?;
    Ok(json!({ "checkpoints": checkpoints, "coupling": cfg.coupling, "budget": RELAXATION_BUDGET }))
}

fn draw(law: &EntryLaw, n: usize, class: SymmetryClass, seed: u64) -> wigner_gaps::Result<WignerDraw> {
    match law {
        EntryLaw::StandardGaussian => sample_gaussian_invariant(n, class, seed),
        _ => sample_wigner(law, n, class, seed),
    }
}

fn local_law(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let class: SymmetryClass = cfg.class.into();
    let (mut rows, mut summary) = (Vec::new(), Vec::new());
    for (j, &n) in cfg.n.iter().enumerate() {
        let eta = cfg.eta.unwrap_or((n as f64).powf(-0.6));
        let params = SmoothingParams::new(cfg.epsilon, n)?;
        let res = parallel_map(cfg.reps, cfg.workers, stream_seed(cfg.master_seed, j as u64), |_, s| {
            let h = draw(&cfg.ensemble, n, class, s)?;
            let spec = h.spectrum()?;
            cfg.energies
                .iter()
                .map(|&e| {
                    let z = c64::new(e, eta);
                    let g = resolvent(&h, z)?;
                    Ok((local_law_deviation(&g), local_law_scale(n, z), ward_check(&g), sandwich_check(&spec, e, &params).holds()))
                })
                .collect::<wigner_gaps::Result<Vec<_>>>()
                .map(|v| (s, v))
        })?;
        for (ei, &e) in cfg.energies.iter().enumerate() {
            let (mut within, mut worst_ward, mut sandwich_failures) = (0usize, 0.0f64, 0usize);
            for (i, (s, v)) in res.iter().enumerate() {
                let (stat, scale, ward, holds) = v[ei];
                let bound = LOCAL_LAW_BUDGET * scale;
                within += (stat <= bound) as usize;
                worst_ward = worst_ward.max(ward);
                sandwich_failures += (!holds) as usize;
                rows.push(vec![
                    n.to_string(),
                    i.to_string(),
                    s.to_string(),
                    num(e),
                    num(eta),
                    num(stat),
                    num(scale),
                    num(bound),
                    (stat <= bound).to_string(),
                    num(ward),
                    holds.to_string(),
                ]);
            }
            summary.push(json!({
                "N": n,
                "E": e,
                "eta": eta,
                "fraction_within": if res.is_empty() { Value::Null } else { json!(within as f64 / res.len() as f64) },
                "max_ward_residual": worst_ward,
                "sandwich_failures": sandwich_failures,
            }));
        }
    }
    out.write_csv(
        "local_law.csv",
        &["N", "replica", "seed", "E", "eta", "stat", "scale", "bound", "within", "ward_residual", "sandwich_holds"],
        rows,
    )?;
    out.write_json("local_law_summary.json", &json!({ "manifest_id": out.id(), "rows": summary }))?;
    Ok(json!({ "budget": LOCAL_LAW_BUDGET, "epsilon": cfg.epsilon }))
}

fn kernel(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let (mut rows, mut summary) = (Vec::new(), Vec::new());
    for &n in &cfg.n {
        let grid = rho2_grid(n, cfg.x, &cfg.u)?;
        for ((u, r), a) in grid.u_values.iter().zip(&grid.rho2).zip(&grid.asymptotic) {
            rows.push(vec![n.to_string(), num(cfg.x), num(*u), num(*r), num(*a), num(r / a)]);
        }
        let pts: Vec<(f64, f64)> = grid.u_values.iter().copied().zip(grid.rho2.iter().copied()).collect();
        let fit = rate_fit(&pts).ok();
        summary.push(json!({ "N": n, "x": cfg.x, "log_log_slope": fit.map(|f| f.slope) }));
    }
    out.write_csv("kernel.csv", &["N", "x", "u", "rho2", "asymptotic", "ratio"], rows)?;
    out.write_json("kernel_summary.json", &json!({ "manifest_id": out.id(), "rows": summary }))?;
    Ok(json!({ "class": "GUE" }))
}

fn compare(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let mu = atomic(cfg);
    let eta = cfg.eta.expect("validated");
    let mut rows = Vec::new();
    let mut t_used = Vec::new();
    for (j, &n) in cfg.n.iter().enumerate() {
        for &e in &cfg.energies {
            let z = c64::new(e, eta);
            let table = green_comparison(mu, &cfg.p, n, z, cfg.t, cfg.reps, compare_seed(cfg, j), cfg.workers)?;
            for r in table {
                t_used.push(json!({ "N": n, "E": e, "p": r.p, "t_used": r.t_used }));
                rows.push(vec![r.p.to_string(), num(r.estimate), num(r.stderr), r.reps.to_string(), n.to_string(), num(e), num(eta)]);
            }
        }
    }
    out.write_csv("compare.csv", &["p", "estimate", "stderr", "reps", "N", "E", "eta"], rows)?;
    Ok(json!({ "t_used": t_used, "tolerance": DEFAULT_TOL }))
}

#[derive(Deserialize)]
struct RateRow {
    #[serde(rename = "N")]
    n: f64,
    d_k: f64,
}

fn rate(cfg: &ExperimentConfig, out: &RunOutput) -> Result<Value, Failure> {
    let path = cfg.input.as_ref().expect("validated");
    let mut rdr = csv::Reader::from_path(path)?;
    let pts = rdr
        .deserialize::<RateRow>()
        .map(|r| r.map(|r| (r.n, r.d_k)))
        .collect::<Result<Vec<_>, _>>()?;
    let fit = rate_fit(&pts)?;
    out.write_json("rate.json", &json!({ "manifest_id": out.id(), "fit": fit }))?;
    Ok(json!({ "points": pts.len() }))
}
