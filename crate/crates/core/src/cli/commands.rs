//! Command bodies: a resolved [`RunConfig`] in, output bytes out.

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::{parse_multiplier, CommandConfig, RunConfig};
use super::output::{compact_json, pretty_json};
use crate::diagnostics::{box_count_dimension, dyadic_scales, strong_diff_verdict, weak_residual};
use crate::error::{Error, Result};
use crate::evolution::{apply_extension, extension_bound_check, synthesize, uniform_grid};
use crate::spectral_model::Mode;
use crate::state_space::{classify, inverse_energy_mean, mean_energy, scale_norm, NormResult, ScaleIndex, StateVector};
use crate::trajectories::{integrate_bohmian, sample_nelson, sample_positions, summarize, TimeGrid, TrajectoryKind};

/// Files produced by one run. The first artifact goes to `--output`; the
/// others are written next to it with their suffix appended.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<(Option<&'static str>, Vec<u8>)>,
    pub summary: String,
}

pub fn norm_json(r: &NormResult) -> Value {
    match r {
        NormResult::Finite(b) => json!({"finite": true, "lo": b.lo, "hi": b.hi, "value": b.mid()}),
        NormResult::Divergent { witness } => json!({"finite": false, "witness": witness}),
    }
}

fn json_doc(config: &RunConfig, body: Value) -> Vec<u8> {
    let mut doc = Map::new();
    doc.insert("config".into(), serde_json::to_value(config).expect("config serializes"));
    if let Value::Object(fields) = body {
        doc.extend(fields);
    }
    pretty_json(&Value::Object(doc))
}

fn csv_header(config: &RunConfig) -> Vec<u8> {
    format!("# config: {}\n", compact_json(config)).into_bytes()
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Run a command. `config` receives the resolved model shifts.
pub fn execute(config: &mut RunConfig) -> Result<Outcome> {
    let f = config.prepare()?;
    let cfg = config.clone();
    match &cfg.command {
        CommandConfig::Classify => classify_cmd(&cfg, &f),
        CommandConfig::Norms => norms_cmd(&cfg, &f),
        CommandConfig::Evolve { t, truncation, points } => evolve_cmd(&cfg, &f, *t, *truncation, *points),
        CommandConfig::WeakCheck { t, max_mode, steps } => weak_cmd(&cfg, &f, *t, *max_mode, steps),
        CommandConfig::StrongCheck { t, steps } => strong_cmd(&cfg, &f, *t, steps),
        CommandConfig::Extension { multiplier, t } => extension_cmd(&cfg, &f, multiplier, *t),
        CommandConfig::Trajectories { kind, paths, t_end, dt, record_every } => {
            trajectories_cmd(&cfg, &f, *kind, *paths, *t_end, *dt, *record_every)
        }
        CommandConfig::Fractal { t, truncation, points, levels } => {
            fractal_cmd(&cfg, &f, *t, *truncation, *points, *levels)
        }
    }
}

fn classify_cmd(cfg: &RunConfig, f: &StateVector) -> Result<Outcome> {
    let c = classify(f);
    let body = json!({
        "k_star": c.k_star,
        "in_domain": c.in_domain,
        "finite_mean_energy": c.finite_mean_energy,
        "mean_energy": norm_json(&mean_energy(f, cfg.tol)),
        "inverse_energy_mean": norm_json(&inverse_energy_mean(f, cfg.tol)),
    });
    Ok(Outcome {
        artifacts: vec![(None, json_doc(cfg, body))],
        summary: format!(
            "classify: k* = {} (in D(H): {}, finite mean energy: {})",
            c.k_star,
            yes(c.in_domain),
            yes(c.finite_mean_energy)
        ),
    })
}

fn norms_cmd(cfg: &RunConfig, f: &StateVector) -> Result<Outcome> {
    let norms: Vec<Value> = ScaleIndex::ALL
        .iter()
        .map(|&k| json!({"k": k.get(), "norm_sq": norm_json(&scale_norm(f, k, cfg.tol))}))
        .collect();
    let k_star = classify(f).k_star;
    let body = json!({"k_star": k_star, "norms": norms});
    Ok(Outcome { artifacts: vec![(None, json_doc(cfg, body))], summary: format!("norms: finite for k ≤ {k_star}") })
}

fn evolve_cmd(cfg: &RunConfig, f: &StateVector, t: f64, truncation: Mode, points: usize) -> Result<Outcome> {
    if points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    let grid = uniform_grid(f.model(), truncation, points);
    let samples = synthesize(f, t, &grid, truncation)?;
    let prob = samples.total_probability();
    let mut bytes = csv_header(cfg);
    bytes.extend(
        format!(
            "# t: {:.16e}, truncation: {}, truncation_error: {:.16e}, total_probability: {:.16e}\n",
            t, truncation, samples.truncation_error, prob
        )
        .bytes(),
    );
    samples.write_csv(&mut bytes).expect("in-memory write");
    Ok(Outcome {
        artifacts: vec![(None, bytes)],
        summary: format!(
            "evolve: {points} samples at t = {t}, N = {truncation}, ∫|ψ|² = {prob:.12}, L² truncation bound {:.3e}",
            samples.truncation_error
        ),
    })
}

#[derive(Serialize)]
struct WeakMode {
    n: Mode,
    energy: f64,
    residuals: Vec<f64>,
    /// `r(h_i) / r(h_{i+1})`; absent when the coefficient vanishes.
    ratios: Option<Vec<f64>>,
}

fn weak_cmd(cfg: &RunConfig, f: &StateVector, t: f64, max_mode: Mode, steps: &[f64]) -> Result<Outcome> {
    if steps.len() < 2 {
        return Err(Error::InvalidArgument("need at least two steps".into()));
    }
    let model = f.model();
    let mut modes = Vec::new();
    for n in model.first_mode()..=max_mode {
        if !model.is_valid_mode(n) {
            continue;
        }
        let residuals = steps.iter().map(|&h| weak_residual(f, n, t, h)).collect::<Result<Vec<_>>>()?;
        let ratios =
            (f.coefficient(n).norm() > 0.0).then(|| residuals.windows(2).map(|w| w[0] / w[1]).collect::<Vec<f64>>());
        modes.push(WeakMode { n, energy: model.energy_unchecked(n), residuals, ratios });
    }
    let expected = (steps[0] / steps[1]).powi(2);
    let worst = modes
        .iter()
        .filter_map(|m| m.ratios.as_ref())
        .flatten()
        .map(|r| (r / expected - 1.0).abs())
        .fold(0.0, f64::max);
    let second_order = worst <= 0.1;
    let body = json!({
        "t": t,
        "steps": steps,
        "expected_ratio": expected,
        "max_relative_ratio_deviation": worst,
        "second_order": second_order,
        "modes": modes,
    });
    Ok(Outcome {
        artifacts: vec![(None, json_doc(cfg, body))],
        summary: format!(
            "weak-check: {} modes, worst ratio deviation {:.3}, second order: {}",
            modes.len(),
            worst,
            yes(second_order)
        ),
    })
}

fn strong_cmd(cfg: &RunConfig, f: &StateVector, t: f64, steps: &[f64]) -> Result<Outcome> {
    let v = strong_diff_verdict(f, t, steps)?;
    let residuals: Vec<Value> = v
        .residuals
        .iter()
        .map(|(h, r)| {
            let mut e = norm_json(r);
            e["h"] = json!(h);
            e
        })
        .collect();
    let body = json!({
        "state": cfg.state,
        "k_star": v.k_star,
        "verdict": v.verdict,
        "slope": v.slope,
        "witness": v.witness,
        "agrees_with_classification": v.agrees_with_classification,
        "residuals": residuals,
    });
    let slope = v.slope.map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"));
    Ok(Outcome {
        artifacts: vec![(None, json_doc(cfg, body))],
        summary: format!(
            "strong-check: {:?} (slope {slope}, k* = {}, agrees: {})",
            v.verdict,
            v.k_star,
            yes(v.agrees_with_classification)
        ),
    })
}

fn extension_cmd(cfg: &RunConfig, f: &StateVector, multiplier: &str, t: f64) -> Result<Outcome> {
    let u = parse_multiplier(multiplier)?;
    let seq = apply_extension(f, &u, t)?;
    let (lhs, rhs) = extension_bound_check(f, &u, t)?;
    let holds = lhs <= rhs + 1e-12;
    let coefficients: Vec<Value> = seq.head.iter().map(|(n, c)| json!([n, c.re, c.im])).collect();
    let body = json!({
        "multiplier": u,
        "t": t,
        "bound_m": seq.bound,
        "norm_sq": {"lo": seq.norm_sq.lo, "hi": seq.norm_sq.hi},
        "lhs": lhs,
        "rhs": rhs,
        "bound_holds": holds,
        "exactly_zero": seq.is_exactly_zero(),
        "tail_present": seq.tail.is_some(),
        "coefficients": coefficients,
    });
    Ok(Outcome {
        artifacts: vec![(None, json_doc(cfg, body))],
        summary: format!("extension: ‖Sψ‖² ≤ {lhs:.6e}, M‖f‖² = {rhs:.6e}, bound holds: {}", yes(holds)),
    })
}

fn trajectories_cmd(
    cfg: &RunConfig,
    f: &StateVector,
    kind: TrajectoryKind,
    paths: usize,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Outcome> {
    let grid = TimeGrid::covering(0.0, t_end, dt, record_every)?;
    let ensemble = match kind {
        TrajectoryKind::Bohmian => integrate_bohmian(f, &sample_positions(f, 0.0, paths, cfg.seed)?, grid)?,
        TrajectoryKind::Nelson => sample_nelson(f, paths, grid, cfg.seed)?,
    };
    let summary = summarize(&ensemble, f)?;
    let mut csv = csv_header(cfg);
    ensemble.write_csv(&mut csv).expect("in-memory write");
    let report = json_doc(cfg, json!({ "summary": summary }));
    let last = summary.ks.last().map_or(f64::NAN, |e| e.1);
    Ok(Outcome {
        artifacts: vec![(None, csv), (Some(".summary.json"), report)],
        summary: format!(
            "trajectories: {:?}, {} paths, KS at t = {} is {:.4}, {} breached, {} crossing times",
            kind, paths, t_end, last, summary.breach_count, summary.crossings
        ),
    })
}

fn fractal_cmd(
    cfg: &RunConfig,
    f: &StateVector,
    t: f64,
    truncation: Mode,
    points: usize,
    levels: u32,
) -> Result<Outcome> {
    if points < 2 {
        return Err(Error::InvalidArgument("need at least 2 grid points".into()));
    }
    let grid = uniform_grid(f.model(), truncation, points);
    let samples = synthesize(f, t, &grid, truncation)?;
    let est = box_count_dimension(&samples, &dyadic_scales(levels))?;
    let body = json!({
        "t": t,
        "truncation": truncation,
        "points": points,
        "truncation_error": samples.truncation_error,
        "dimension": est.dimension,
        "fit_residual": est.fit_residual,
        "counts": est.counts,
    });
    Ok(Outcome {
        artifacts: vec![(None, json_doc(cfg, body))],
        summary: format!("fractal: box-counting dimension {:.4} (fit rms {:.2e})", est.dimension, est.fit_residual),
    })
}
