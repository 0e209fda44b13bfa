//! Dispatch from a resolved configuration to the library.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use urtlab_core::cogrowth::{cogrowth_rho, invert_cogrowth, simple_from_lazy, variational_log_rho_lazy};
use urtlab_core::generators::{
    bernoulli_cluster, decoration_mtp_audit, line_with_decorations, spine_is_line, DecorationLaw, PercolationParams,
    ProfileSpec, Rooting,
};
use urtlab_core::rate::{ldp_check, RateFunction};
use urtlab_core::stats::MeanEstimate;
use urtlab_core::tree::{
    decorations, growth_estimates, ln_ambient_sphere, normalize, parse_tree, sphere_sizes, spine, write_tree,
    RootedTreeWindow,
};
use urtlab_core::two_three::{exponent_estimate, two_three_audit, Method, TwoThreeAudit};
use urtlab_core::verify::{fixture_law, run_criteria, Fault, VerifyConfig, CRITERIA};
use urtlab_core::walk::{build_kernel, return_series_streaming, KernelRows};

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;
use crate::output::{write_atomic, Check, RunRecord, Table};

/// What a command computed before it is wrapped into a record.
struct Outcome {
    results: Value,
    checks: Vec<Check>,
    table: Option<Table>,
}

impl Outcome {
    fn new(results: impl Serialize) -> Result<Self, CliError> {
        Ok(Self { results: to_value(results)?, checks: Vec::new(), table: None })
    }

    fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    fn check(mut self, name: &str, passed: bool, detail: impl Into<String>) -> Self {
        self.checks.push(Check::new(name, passed, detail));
        self
    }
}

fn to_value(v: impl Serialize) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Validation(format!("json encoding failed: {e}")))
}

/// Run a resolved configuration.
pub fn run(config: &ExperimentConfig) -> Result<RunRecord, CliError> {
    let start = Instant::now();
    let outcome = match config.command.as_str() {
        "rate-fn" => rate_fn(config)?,
        "ldp-check" => ldp(config)?,
        "walk kernel" => walk_kernel(config)?,
        "walk series" => walk_series(config)?,
        "exponent" => exponent(config)?,
        "cogrowth" => cogrowth(config)?,
        "percolate" => percolate(config)?,
        "two-three-audit" => audit(config, false)?,
        "mtp-audit" => audit(config, true)?,
        "spine" => spine_cmd(config)?,
        "growth" => growth(config)?,
        "verify" => verify(config)?,
        other => return Err(CliError::Usage(format!("unknown command `{other}`"))),
    };
    if config.effective_format() == Format::Csv && outcome.table.is_none() {
        return Err(CliError::Validation(format!("`{}` has no CSV output; use json", config.command)));
    }
    Ok(RunRecord {
        version: env!("CARGO_PKG_VERSION"),
        config: config.clone(),
        seed: config.seed,
        wall_time_s: Some(start.elapsed().as_secs_f64()),
        results: outcome.results,
        checks: outcome.checks,
        table: outcome.table,
    })
}

/// Serialized bytes of a record in the configured format. Files never carry
/// the wall time, so identical runs give identical files.
pub fn render(record: &RunRecord, for_file: bool) -> Result<Vec<u8>, CliError> {
    match record.config.effective_format() {
        Format::Csv => record.table.as_ref().expect("checked in run").to_csv(),
        Format::Json if for_file => record.without_timing().to_json(),
        Format::Json => record.to_json(),
    }
}

/// Write the record to the configured output, if any. Returns whether it
/// went to a file.
pub fn emit(record: &RunRecord) -> Result<bool, CliError> {
    match &record.config.out {
        Some(path) => {
            write_atomic(path, &render(record, true)?)?;
            Ok(true)
        }
        None => Ok(false),
    }
}

fn profile_spec(config: &ExperimentConfig) -> Result<ProfileSpec, CliError> {
    Ok(config.get_str("profile").unwrap_or_default().parse::<ProfileSpec>()?)
}

fn rate_fn(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let d: usize = c.get("d")?;
    let samples: usize = c.get("samples")?;
    if samples == 0 {
        return Err(CliError::Validation("samples must be positive".into()));
    }
    let f = RateFunction::new(d)?;
    let mut table = Table::new(vec!["t", "phi", "I", "phi_second"]);
    let mut rows = Vec::with_capacity(samples);
    for k in 1..=samples {
        let t = k as f64 / (samples + 1) as f64;
        let (phi, i, second) = (f.phi(t)?, f.rate_i(t)?, f.phi_second(t)?);
        table.push(vec![t.into(), phi.into(), i.into(), second.into()]);
        rows.push(json!({ "t": t, "phi": phi, "I": i, "phi_second": second }));
    }
    let concave = rows.iter().all(|r| r["phi_second"].as_f64().is_some_and(|v| v < 0.0));
    let max_i = rows.iter().filter_map(|r| r["I"].as_f64()).fold(f64::NEG_INFINITY, f64::max);
    Ok(Outcome::new(json!({
        "d": d,
        "r_const": f.r_const(),
        "s_const": f.s_const(),
        "phi_0": f.phi(0.0)?,
        "phi_1": f.phi(1.0)?,
        "i_prime_at_zero": f.i_prime_at_zero(),
        "rows": rows,
    }))?
    .with_table(table)
    .check("strictly_concave", concave, "phi'' < 0 on every grid point")
    .check("rate_nonpositive", max_i <= 1e-12, format!("max I = {max_i}")))
}

fn ldp(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (d, n): (usize, usize) = (c.get("d")?, c.get("n")?);
    let tol: f64 = c.get("tol")?;
    let kernel = build_kernel(d, n)?;
    let check = ldp_check(&kernel, c.get("a")?, c.get("b")?, n)?;
    let sup = RateFunction::new(d)?.max_rate(0.0, 1.0)?;
    Ok(Outcome::new(json!({ "d": d, "check": check, "sup_rate": sup.value, "sup_argmax": sup.x }))?
        .check("gap", check.gap <= tol, format!("gap {} vs tolerance {tol}", check.gap))
        .check("sup_rate_zero", sup.value.abs() <= 1e-8, format!("sup I = {}", sup.value)))
}

fn walk_kernel(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (d, n): (usize, usize) = (c.get("d")?, c.get("n")?);
    let csv = c.effective_format() == Format::Csv;
    let mut table = Table::new(vec!["n", "r", "logq"]);
    let mut logq = Vec::new();
    let mut mean = Vec::with_capacity(n + 1);
    for (step, row) in KernelRows::new(d)?.take(n + 1).enumerate() {
        mean.push(row.iter().enumerate().map(|(r, v)| r as f64 * v.exp()).sum::<f64>());
        if csv {
            table.rows.extend(row.iter().enumerate().map(|(r, &v)| vec![step.into(), r.into(), v.into()]));
        } else {
            logq.push(row);
        }
    }
    Ok(Outcome::new(json!({ "d": d, "steps": n, "mean_distance": mean, "logq": logq }))?.with_table(table))
}

fn walk_series(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = profile_spec(c)?;
    let n: usize = c.get("n")?;
    let profile = normalize(&spec.build(n)?)?;
    let series = return_series_streaming(&profile, profile.d(), n)?.with_source(spec.to_string());
    let mut table = Table::new(vec!["n", "logp"]);
    for (i, &v) in series.log_p.iter().enumerate() {
        table.push(vec![i.into(), v.into()]);
    }
    Ok(Outcome::new(&series)?.with_table(table))
}

fn exponent(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = profile_spec(c)?;
    let n: usize = c.get("n")?;
    let method: Method = c.get_str("method").unwrap_or("ratio").parse()?;
    let tol: f64 = c.get("tol")?;
    let profile = normalize(&spec.build(n)?)?;
    let d = profile.d();
    let series = return_series_streaming(&profile, d, n)?;
    let est = exponent_estimate(&series, method)?;
    let rho_lazy = est.rho_lazy();
    let predicted = match spec.log_growth()? {
        Some(g) => Some(cogrowth_rho(g, d)?),
        None => None,
    };
    let mut table = Table::new(vec!["n", "estimate"]);
    for &(k, v) in &est.diagnostics {
        table.push(vec![k.into(), v.into()]);
    }
    let mut out = Outcome::new(json!({
        "profile": spec.to_string(),
        "d": d,
        "steps": n,
        "method": method,
        "rho_lazy": rho_lazy,
        "rho_simple": simple_from_lazy(rho_lazy).ok(),
        "estimate": est,
        "predicted": predicted,
    }))?
    .with_table(table);
    if let Some(p) = predicted {
        let gap = (rho_lazy - p.rho_lazy).abs();
        out = out.check("cogrowth_prediction", gap <= tol, format!("|{rho_lazy} - {}| = {gap}", p.rho_lazy));
    }
    Ok(out)
}

fn cogrowth(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let d: usize = c.get("d")?;
    let (gamma, inverted) = match c.get_opt::<f64>("invert")? {
        Some(rho) => (invert_cogrowth(rho, d)?, Some(rho)),
        None => (c.get("gamma")?, None),
    };
    let r = cogrowth_rho(gamma, d)?;
    let gap = (variational_log_rho_lazy(r.gamma, d)?.exp() - r.rho_lazy).abs();
    let mut out = Outcome::new(json!({
        "d": d,
        "gamma": r.gamma,
        "rho_simple": r.rho_simple,
        "rho_lazy": r.rho_lazy,
        "branch": r.branch,
        "threshold": r.threshold,
        "variational_check_gap": gap,
    }))?
    .check("variational_agreement", gap <= 1e-6, format!("gap {gap}"));
    if let Some(rho) = inverted {
        let err = (r.rho_simple - rho).abs();
        out = out.check("inversion_round_trip", err <= 1e-10, format!("rho_simple error {err}"));
    }
    Ok(out)
}

#[derive(Serialize)]
struct ClusterRow {
    sample: u64,
    size: usize,
    alive_at_horizon: usize,
}

fn percolate(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (d, r, samples): (usize, usize, u64) = (c.get("d")?, c.get("r")?, c.get("samples")?);
    let p: f64 = c.get("p")?;
    if samples == 0 {
        return Err(CliError::Validation("samples must be positive".into()));
    }
    let params = PercolationParams::new(d, p, r, c.seed);
    let clusters: Vec<RootedTreeWindow> =
        (0..samples).into_par_iter().map(|i| bernoulli_cluster(&params.with_stream(i))).collect::<Result<_, _>>()?;
    if let Some(path) = c.get_str("tree-out") {
        write_atomic(std::path::Path::new(path), write_tree(&clusters[0]).as_bytes())?;
    }
    let rows: Vec<ClusterRow> = clusters
        .iter()
        .enumerate()
        .map(|(i, w)| ClusterRow { sample: i as u64, size: w.len(), alive_at_horizon: w.alive_count() })
        .collect();
    let sizes: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let mean = MeanEstimate::of(&sizes);
    let m = (d - 1) as f64 * p;
    let oracle = (m < 1.0).then(|| 1.0 + d as f64 * p / (1.0 - m));
    let truncated = rows.iter().filter(|r| r.alive_at_horizon > 0).count();
    let mut table = Table::new(vec!["sample", "size", "alive_at_horizon"]);
    for row in &rows {
        table.push(vec![row.sample.into(), row.size.into(), row.alive_at_horizon.into()]);
    }
    let first = &clusters[0];
    let counts = sphere_sizes(first).counts_u64();
    let mut out = Outcome::new(json!({
        "params": params,
        "samples": samples,
        "mean_size": mean,
        "oracle_mean_size": oracle,
        "clusters_reaching_horizon": truncated,
        "first_cluster": { "size": first.len(), "sphere_sizes": counts },
        "per_sample": rows,
    }))?
    .with_table(table);
    if let (Some(target), true) = (oracle, samples > 1) {
        let z = mean.z_score(target);
        out = out.check(
            "mean_size_oracle",
            z <= 3.0,
            format!("mean {} vs {target}, z = {z}; {truncated} clusters reach the horizon", mean.mean),
        );
    }
    Ok(out)
}

fn audit_json(a: &TwoThreeAudit) -> Value {
    json!({
        "params": a.params,
        "l": a.l,
        "samples": a.samples,
        "per_sample": a.per_sample,
        "mean_f1": a.f1.mean,
        "se_f1": a.f1.se,
        "mean_f2": a.f2.mean,
        "se_f2": a.f2.se,
        "min_slack1": a.min_slack1,
        "min_slack2": a.min_slack2,
    })
}

fn audit(c: &ExperimentConfig, means_only: bool) -> Result<Outcome, CliError> {
    let (d, l, samples): (usize, usize, usize) = (c.get("d")?, c.get("l")?, c.get("samples")?);
    let p: f64 = c.get("p")?;
    if l == 0 || samples == 0 {
        return Err(CliError::Validation("l and samples must be positive".into()));
    }
    let kernel = build_kernel(d, 6 * l)?;
    let a = two_three_audit(&PercolationParams::new(d, p, 6 * l, c.seed), l, samples, &kernel)?;
    let mut table = Table::new(vec!["sample", "f1", "f2", "p_2l", "p_4l", "p_6l", "slack1", "slack2", "cluster_size"]);
    for (i, r) in a.per_sample.iter().enumerate() {
        table.push(vec![
            i.into(),
            r.f1.into(),
            r.f2.into(),
            r.p_2l.into(),
            r.p_4l.into(),
            r.p_6l.into(),
            r.slack1.into(),
            r.slack2.into(),
            r.cluster_size.into(),
        ]);
    }
    let means = format!("f1 = {} +- {}, f2 = {} +- {}", a.f1.mean, a.f1.se, a.f2.mean, a.f2.se);
    let mut out = Outcome::new(audit_json(&a))?.with_table(table).check("means_within_3se", a.means_pass(), means);
    if !means_only {
        out = out.check(
            "slacks_nonnegative",
            a.slacks_pass(),
            format!("min slacks {} and {}", a.min_slack1, a.min_slack2),
        );
    }
    Ok(out)
}

fn decoration_law(name: &str, d: usize) -> Result<DecorationLaw, CliError> {
    Ok(match name {
        "fixture" => fixture_law(d)?,
        "leaf" => DecorationLaw::pendant_leaf(d, 0.5)?,
        "none" => DecorationLaw::none(d)?,
        other => return Err(CliError::Validation(format!("unknown law `{other}` (fixture, leaf, none)"))),
    })
}

fn spine_cmd(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let d: usize = c.get("d")?;
    let half: usize = c.get("half-length")?;
    let samples: usize = c.get("samples")?;
    let law = decoration_law(c.get_str("law").unwrap_or("fixture"), d)?;
    let rooting = match c.get_str("rooting").unwrap_or("center") {
        "center" => Rooting::Center,
        "uniform" => Rooting::Uniform,
        other => return Err(CliError::Validation(format!("unknown rooting `{other}` (center, uniform)"))),
    };
    let (window, source) = match c.get_str("tree") {
        Some(path) => {
            (parse_tree(&std::fs::read_to_string(path).map_err(urtlab_core::Error::from)?)?, path.to_string())
        }
        None => {
            let w = line_with_decorations(&law, half, c.seed, c.get("stream")?, rooting)?;
            (w, format!("decorated line, half length {half}"))
        }
    };
    let sp = spine(&window);
    let generated = c.get_str("tree").is_none();
    let mut table = Table::new(vec!["vertex", "label", "depth", "on_spine", "weight"]);
    let weights = if sp.is_empty() { None } else { Some(decorations(&window)?) };
    for v in 0..window.len() {
        let w = weights.as_ref().map_or(0, |ds| ds.weight(v));
        table.push(vec![v.into(), window.label(v).into(), window.depth(v).into(), sp.members[v].into(), w.into()]);
    }
    let spine_weights: Vec<f64> = weights
        .as_ref()
        .map(|ds| ds.weights.iter().filter(|&&w| w > 0).map(|&w| w as f64).collect())
        .unwrap_or_default();
    let mut results = json!({
        "source": source,
        "window_size": window.len(),
        "spine_size": sp.len(),
        "root_distance": sp.root_distance,
        "decoration_count": weights.as_ref().map_or(0, |ds| ds.components.len()),
        "root_weight": weights.as_ref().map(|ds| ds.weight(window.root())),
        "mean_spine_weight": (!spine_weights.is_empty()).then(|| MeanEstimate::of(&spine_weights)),
    });
    let mut checks = Vec::new();
    if generated {
        let is_line = spine_is_line(&window, half);
        results["spine_is_line"] = Value::Bool(is_line);
        if rooting == Rooting::Center {
            checks.push(Check::new("spine_is_line", is_line, "spine equals the base line"));
        }
    }
    if samples > 0 {
        let a = decoration_mtp_audit(&law, half, samples, c.seed)?;
        results["decoration_audit"] = to_value(a)?;
        checks.push(Check::new(
            "decoration_balance",
            a.passes(),
            format!("P(o in spine) E[w] = {} vs 1 + 3 x {}", a.product, a.se),
        ));
    }
    Ok(Outcome { results, checks, table: Some(table) })
}

fn growth(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = profile_spec(c)?;
    let n: usize = c.get("n")?;
    let profile = spec.build(n)?;
    let g = growth_estimates(&profile)?;
    let exact = spec.log_growth()?.map(f64::exp);
    let d = profile.d();
    let mut table = Table::new(vec!["r", "ln_s", "ln_a", "ball_root", "half_ratio"]);
    for (r, &ln_s) in profile.ln_spheres().iter().enumerate() {
        let (ball, half) = if r == 0 { (f64::NAN, f64::NAN) } else { (g.ball_root[r - 1], g.half_ratio[r - 1]) };
        table.push(vec![r.into(), ln_s.into(), (ln_s - ln_ambient_sphere(d, r)).into(), ball.into(), half.into()]);
    }
    Ok(Outcome::new(json!({
        "profile": spec.to_string(),
        "d": d,
        "horizon": profile.horizon(),
        "ln_spheres": profile.ln_spheres(),
        "estimate": g,
        "exact_growth": exact,
    }))?
    .with_table(table))
}

fn verify(c: &ExperimentConfig) -> Result<Outcome, CliError> {
    let fault = match c.get_str("inject-fault").unwrap_or("none") {
        "none" => None,
        "wrong-sphere-size" => Some(Fault::WrongSphereSize),
        other => return Err(CliError::Validation(format!("unknown fault `{other}` (none, wrong-sphere-size)"))),
    };
    let ids: Vec<u8> = match c.get_str("criteria").unwrap_or("all") {
        "all" => CRITERIA.to_vec(),
        list => list
            .split(',')
            .map(|s| s.trim().parse::<u8>().map_err(|_| CliError::Validation(format!("bad criterion id `{s}`"))))
            .collect::<Result<_, _>>()?,
    };
    let config = VerifyConfig { d: c.get("d")?, seed: c.seed, fault };
    let summary = run_criteria(&config, &ids)?;
    let mut table = Table::new(vec!["id", "name", "passed", "measured", "gap", "tolerance"]);
    let mut checks = Vec::new();
    for r in &summary.criteria {
        table.push(vec![
            (r.id as usize).into(),
            r.name.into(),
            r.passed.into(),
            r.measured.into(),
            r.gap.into(),
            r.tolerance.into(),
        ]);
        checks.push(Check::new(&format!("criterion_{}", r.id), r.passed, r.detail.clone()));
    }
    let failures: Vec<u8> = summary.failures().iter().map(|r| r.id).collect();
    // timings vary run to run, so they stay out of the payload
    let criteria: Vec<Value> = summary
        .criteria
        .iter()
        .map(|r| {
            json!({
                "id": r.id,
                "name": r.name,
                "passed": r.passed,
                "measured": r.measured,
                "gap": r.gap,
                "tolerance": r.tolerance,
                "time_limit_s": r.time_limit_s,
                "detail": r.detail,
            })
        })
        .collect();
    Ok(Outcome {
        results: json!({ "d": config.d, "fault": fault, "criteria": criteria, "failures": failures }),
        checks,
        table: Some(table),
    })
}
