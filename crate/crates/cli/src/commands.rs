//! One handler per subcommand. Each prints a single JSON document.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{Duration, NaiveDate};
use ipfnet::experiment::{
    experiment_misspec, experiment_sparsity, misspec_models, run_trial, sparsity_grid, ExperimentRow, Summary,
    TrialMetrics,
};
use ipfnet::io::{read_marginal, read_network, write_marginal, write_network};
use ipfnet::network::{aggregate_slices, validate_pair};
use ipfnet::repair::{conv_ipf, RepairConfig, RepairObjective, RepairReport, RowTiebreak};
use ipfnet::stats::{
    bipartite_laplacian_fiedler, error_bound, finite_mle_condition, fit_diagnostics, stationarity_check,
    Normalization, ScalingParameters,
};
use ipfnet::synth::{
    baseline_col_share, baseline_rank1, baseline_row_share, baseline_scale, cosine_similarity, fit_gravity,
    generate_trial, gravity_infer, Distances, GenerativeModel, GravityModel, SynthConfig,
};
use ipfnet::{
    check_feasibility, find_blocking_set, marginals, run_ipf, BlockingDiagnosis, Error, IpfConfig, IpfResult,
    IpfStatus, MarginalPair, SparseNetwork,
};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::ingest::{self, IngestDir, TimeWindow, TripColumns};
use crate::output::{input_error, Emitter, InfeasibleRun};
use crate::*;

pub fn dispatch(cli: &Cli) -> Result<()> {
    let out = Emitter {
        out: cli.out.as_deref(),
        meta: !cli.no_meta,
    };
    match &cli.command {
        Command::Ingest(a) => cmd_ingest(&out, a),
        Command::Check(a) => cmd_check(&out, a),
        Command::Run(a) => cmd_run(&out, a),
        Command::Repair(a) => cmd_repair(&out, a),
        Command::GravityFit(a) => cmd_gravity_fit(&out, a),
        Command::GravityInfer(a) => cmd_gravity_infer(&out, a),
        Command::Baseline(a) => cmd_baseline(&out, a),
        Command::Simulate(a) => cmd_simulate(&out, a),
        Command::Evaluate(a) => cmd_evaluate(&out, a),
        Command::Diagnose(a) => cmd_diagnose(&out, a),
        Command::Experiment(a) => cmd_experiment(&out, a),
    }
}

fn read_net(path: &Path) -> Result<SparseNetwork> {
    read_network(path).with_context(|| format!("reading network {}", path.display()))
}

fn load(a: &NetArgs) -> Result<(SparseNetwork, MarginalPair)> {
    let net = read_net(&a.network)?;
    let p = read_marginal(&a.p, Some(net.rows())).with_context(|| format!("reading {}", a.p.display()))?;
    let q = read_marginal(&a.q, Some(net.cols())).with_context(|| format!("reading {}", a.q.display()))?;
    let marg = validate_pair(&net, p, q, a.rel_tol)?;
    Ok((net, marg))
}

fn ipf_config(a: &IpfArgs) -> IpfConfig {
    IpfConfig {
        tolerance: a.tolerance,
        max_iterations: a.max_iterations,
        record_trace: true,
    }
}

fn repair_config(a: &RepairArgs) -> RepairConfig {
    RepairConfig {
        objective: match a.objective {
            ObjectiveArg::MinEdges => RepairObjective::MinEdges,
            ObjectiveArg::MinLambda1 => RepairObjective::MinLambda1,
        },
        tiebreak: match a.tiebreak {
            TiebreakArg::LargestP => RowTiebreak::LargestP,
            TiebreakArg::SmallestP => RowTiebreak::SmallestP,
        },
        edge_weight_multiplier: a.edge_weight_multiplier,
        max_rounds: a.max_rounds,
        ..Default::default()
    }
}

fn write_net_opt(path: Option<&Path>, net: &SparseNetwork) -> Result<()> {
    if let Some(p) = path {
        write_network(p, net).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn csv_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(p)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x.eq_ignore_ascii_case("csv")))
                .collect();
            inner.sort();
            files.extend(inner);
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(input_error("no trip CSV files found"));
    }
    Ok(files)
}

fn parse_time_flag(s: Option<&str>) -> Result<Option<chrono::NaiveDateTime>> {
    s.map(|s| ingest::parse_timestamp(s).ok_or_else(|| input_error(format!("cannot parse time {s:?}"))))
        .transpose()
}

fn cmd_ingest(out: &Emitter, a: &IngestArgs) -> Result<()> {
    let files = csv_files(&a.trips)?;
    let sources = files
        .iter()
        .map(|f| File::open(f).with_context(|| format!("opening {}", f.display())))
        .collect::<Result<Vec<_>>>()?;
    let window = TimeWindow {
        from: parse_time_flag(a.from.as_deref())?,
        to: parse_time_flag(a.to.as_deref())?,
    };
    let columns = TripColumns {
        started_at: a.started_field.clone(),
        ended_at: a.ended_field.clone(),
        start_station: a.start_field.clone(),
        end_station: a.end_field.clone(),
    };
    let report = ingest::ingest_trips(sources, &columns, window).map_err(|e| input_error(format!("{e:#}")))?;
    ingest::write_ingest(&a.out_dir, &report)?;
    out.emit(
        "ingest",
        &json!({
            "files": files.len(),
            "stations": report.stations.len(),
            "hours": report.series.len(),
            "counts": report.counts,
            "out_dir": a.out_dir,
        }),
    )
}

#[derive(Serialize)]
struct CheckOutput {
    feasible: bool,
    max_flow: f64,
    total: f64,
    blocking_set: Option<BlockingDiagnosis>,
}

fn cmd_check(out: &Emitter, a: &NetArgs) -> Result<()> {
    let (net, marg) = load(a)?;
    let flow = check_feasibility(&net, &marg)?;
    let blocking_set = if flow.feasible {
        None
    } else {
        Some(find_blocking_set(&net, &marg, &flow)?)
    };
    out.emit(
        "check",
        &CheckOutput {
            feasible: flow.feasible,
            max_flow: flow.max_flow_value,
            total: marg.total(),
            blocking_set,
        },
    )
}

#[derive(Serialize)]
struct RepairSummary {
    rounds: usize,
    total_edges_added: usize,
    added_edges: Vec<(usize, usize)>,
    edge_weight: Option<f64>,
    lambda1_before: f64,
    lambda1_after: f64,
}

impl From<&RepairReport> for RepairSummary {
    fn from(r: &RepairReport) -> Self {
        RepairSummary {
            rounds: r.rounds,
            total_edges_added: r.total_edges_added,
            added_edges: r.round_log.iter().flat_map(|x| x.additions.edges.iter().copied()).collect(),
            edge_weight: r.round_log.first().map(|x| x.additions.weight),
            lambda1_before: r.lambda1_before,
            lambda1_after: r.lambda1_after,
        }
    }
}

#[derive(Serialize)]
struct RunOutput {
    status: IpfStatus,
    iterations: usize,
    l1_marginal_error: Option<f64>,
    repair: Option<RepairSummary>,
    cosine_to_truth: Option<f64>,
    d0: Vec<f64>,
    d1: Vec<f64>,
}

fn write_trace(path: &Path, trace: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["half_sweep", "l1_error"])?;
    for (k, e) in trace.iter().enumerate() {
        w.write_record([k.to_string(), format!("{e:e}")])?;
    }
    w.flush()?;
    Ok(())
}

fn is_structural(e: &Error) -> bool {
    matches!(e, Error::StructurallyInfeasible { .. } | Error::StructurallyInfeasibleColumn { .. })
}

fn cmd_run(out: &Emitter, a: &RunArgs) -> Result<()> {
    let (mut net, marg) = load(&a.net)?;
    let cfg = ipf_config(&a.ipf);
    let mut repair = None;
    if a.repair && !check_feasibility(&net, &marg)?.feasible {
        let report = conv_ipf(&net, &marg, &repair_config(&a.repair_args))?;
        net = report.network.clone();
        repair = Some(RepairSummary::from(&report));
    }
    let res = run_ipf(&net, &marg, &cfg)?;
    let estimate = res.estimate(&net);
    write_net_opt(a.out_network.as_deref(), &estimate)?;
    if let Some(p) = &a.trace_csv {
        write_trace(p, &res.l1_trace)?;
    }
    let cosine_to_truth = match &a.truth {
        Some(t) => Some(cosine_similarity(&estimate, &read_net(t)?)?),
        None => None,
    };
    let status = res.status;
    out.emit(
        "run",
        &RunOutput {
            status,
            iterations: res.iterations,
            l1_marginal_error: res.l1_trace.last().copied(),
            repair,
            cosine_to_truth,
            d0: res.d0,
            d1: res.d1,
        },
    )?;
    if status == IpfStatus::Oscillating {
        return Err(InfeasibleRun("IPF oscillates between two accumulation points".into()).into());
    }
    Ok(())
}

fn cmd_repair(out: &Emitter, a: &RepairCmd) -> Result<()> {
    let (net, marg) = load(&a.net)?;
    let report = conv_ipf(&net, &marg, &repair_config(&a.repair))?;
    write_net_opt(a.out_network.as_deref(), &report.network)?;
    let mut v = serde_json::to_value(&report)?;
    if let Some(o) = v.as_object_mut() {
        o.remove("network");
    }
    v["network_nnz"] = json!(report.network.nnz());
    out.emit("repair", &v)
}

/// Euclidean distances between station coordinates (the units of the CSV,
/// typically degrees), or a triplet file of distances.
fn load_distances(a: &DistanceArgs, rows: usize, cols: usize) -> Result<Distances> {
    let d = match (&a.stations, &a.distances) {
        (Some(path), _) => {
            let mut pts = Vec::new();
            for row in csv::Reader::from_path(path)
                .with_context(|| format!("reading {}", path.display()))?
                .deserialize()
            {
                let s: ingest::Station = row?;
                match (s.lat, s.lng) {
                    (Some(lat), Some(lng)) => pts.push([lat, lng]),
                    _ => return Err(input_error(format!("station {} has no coordinates", s.id))),
                }
            }
            Distances::from_points(&pts, &pts)?
        }
        (None, Some(path)) => {
            let net = read_net(path)?;
            let mut values = vec![0.0; net.rows() * net.cols()];
            for (i, j, w) in net.entries() {
                values[i * net.cols() + j] = w;
            }
            Distances::new(net.rows(), net.cols(), values)?
        }
        (None, None) => return Err(input_error("one of --stations or --distances is required")),
    };
    if d.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            expected: format!("{:?}", (rows, cols)),
            got: format!("{:?}", d.shape()),
        }
        .into());
    }
    Ok(d)
}

fn cmd_gravity_fit(out: &Emitter, a: &GravityFitArgs) -> Result<()> {
    let net = read_net(&a.network)?;
    let d = load_distances(&a.dist, net.rows(), net.cols())?;
    let gm = fit_gravity(&net, &d, a.bin_width)?;
    out.emit("gravity-fit", &gm)
}

fn summary(net: &SparseNetwork) -> serde_json::Value {
    json!({ "rows": net.rows(), "cols": net.cols(), "nnz": net.nnz(), "total": net.total() })
}

fn cmd_gravity_infer(out: &Emitter, a: &GravityInferArgs) -> Result<()> {
    let p = read_marginal(&a.p, None)?;
    let q = read_marginal(&a.q, None)?;
    let marg = MarginalPair::new(p, q)?;
    let d = load_distances(&a.dist, marg.rows(), marg.cols())?;
    let gm = GravityModel::new(a.alpha, a.beta, &d)?;
    let est = gravity_infer(&gm, &marg, &ipf_config(&a.ipf))?;
    write_net_opt(a.out_network.as_deref(), &est)?;
    out.emit("gravity-infer", &summary(&est))
}

fn cmd_baseline(out: &Emitter, a: &BaselineArgs) -> Result<()> {
    let p = read_marginal(&a.p, None)?;
    let q = read_marginal(&a.q, None)?;
    let marg = MarginalPair::new(p, q)?;
    let xbar = || -> Result<SparseNetwork> {
        let path = a.network.as_ref().ok_or_else(|| input_error("--network is required for this method"))?;
        let net = read_net(path)?;
        marg.check_dims(&net)?;
        Ok(net)
    };
    let est = match a.method {
        BaselineMethod::Rank1 => baseline_rank1(&marg)?,
        BaselineMethod::RowShare => baseline_row_share(&xbar()?, marg.p())?,
        BaselineMethod::ColShare => baseline_col_share(&xbar()?, marg.q())?,
        BaselineMethod::Scale => baseline_scale(&xbar()?, marg.total())?,
    };
    write_net_opt(a.out_network.as_deref(), &est)?;
    out.emit("baseline", &summary(&est))
}

fn synth_config(a: &SynthArgs) -> SynthConfig {
    SynthConfig {
        m: a.m,
        n: a.n,
        sparsity: a.sparsity,
        seed: a.seed,
        ..Default::default()
    }
}

fn model_of(a: &SimulateArgs) -> GenerativeModel {
    match a.model {
        ModelArg::Poisson => GenerativeModel::Poisson,
        ModelArg::Exponential => GenerativeModel::Exponential,
        ModelArg::Negbinom => GenerativeModel::NegBinom { gamma: a.gamma },
        ModelArg::Interaction => GenerativeModel::Interaction {
            alpha: a.alpha,
            beta: a.beta,
        },
    }
}

#[derive(Serialize)]
struct TrialRow {
    model: String,
    sparsity: f64,
    trial: u64,
    status: IpfStatus,
    iterations: usize,
    bound_ratio: f64,
    l2_error: f64,
    cosine: f64,
    dispersion: f64,
    monotone_trace: bool,
}

fn trial_row(model: &str, sparsity: f64, t: &TrialMetrics) -> TrialRow {
    TrialRow {
        model: model.to_string(),
        sparsity,
        trial: t.trial,
        status: t.status,
        iterations: t.iterations,
        bound_ratio: t.bound_ratio,
        l2_error: t.l2_error,
        cosine: t.cosine,
        dispersion: t.dispersion,
        monotone_trace: t.monotone_trace,
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_instance(dir: &Path, cfg: &SynthConfig, model: &GenerativeModel, trial: u64) -> Result<()> {
    let inst = generate_trial(cfg, model, trial)?;
    let d = dir.join(format!("trial-{trial:04}"));
    fs::create_dir_all(&d)?;
    write_network(d.join("xbar.txt"), &inst.xbar)?;
    write_network(d.join("y.txt"), &inst.y)?;
    write_marginal(d.join("p.txt"), inst.marg.p())?;
    write_marginal(d.join("q.txt"), inst.marg.q())?;
    let truth = json!({ "u": inst.truth.u, "v": inst.truth.v, "positions": inst.positions });
    fs::write(d.join("truth.json"), serde_json::to_string_pretty(&truth)? + "\n")?;
    Ok(())
}

fn cmd_simulate(out: &Emitter, a: &SimulateArgs) -> Result<()> {
    let cfg = synth_config(&a.synth);
    let model = model_of(a);
    let ipf = IpfConfig::default();
    let metrics = (0..a.synth.trials as u64)
        .into_par_iter()
        .map(|t| {
            if let Some(dir) = &a.out_dir {
                write_instance(dir, &cfg, &model, t)?;
            }
            Ok(run_trial(&cfg, &model, t, &ipf)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let label = model.label();
    if let Some(p) = &a.metrics_csv {
        let rows: Vec<TrialRow> = metrics.iter().map(|t| trial_row(&label, cfg.sparsity, t)).collect();
        write_rows(p, &rows)?;
    }
    out.emit(
        "simulate",
        &json!({ "model": model, "config": cfg, "trials": metrics }),
    )
}

#[derive(Serialize)]
struct SummaryRow {
    model: String,
    sparsity: f64,
    trials: usize,
    converged: usize,
    iterations_mean: f64,
    iterations_lo: f64,
    iterations_hi: f64,
    bound_ratio_mean: f64,
    bound_ratio_lo: f64,
    bound_ratio_hi: f64,
    l2_error_mean: f64,
    l2_error_lo: f64,
    l2_error_hi: f64,
    cosine_mean: f64,
    cosine_lo: f64,
    cosine_hi: f64,
    dispersion_mean: f64,
    dispersion_lo: f64,
    dispersion_hi: f64,
}

fn summary_row(r: &ExperimentRow) -> SummaryRow {
    let s = |x: &Summary| (x.mean, x.lo, x.hi);
    let (iterations_mean, iterations_lo, iterations_hi) = s(&r.iterations);
    let (bound_ratio_mean, bound_ratio_lo, bound_ratio_hi) = s(&r.bound_ratio);
    let (l2_error_mean, l2_error_lo, l2_error_hi) = s(&r.l2_error);
    let (cosine_mean, cosine_lo, cosine_hi) = s(&r.cosine);
    let (dispersion_mean, dispersion_lo, dispersion_hi) = s(&r.dispersion);
    SummaryRow {
        model: r.model.clone(),
        sparsity: r.sparsity,
        trials: r.trials,
        converged: r.converged,
        iterations_mean,
        iterations_lo,
        iterations_hi,
        bound_ratio_mean,
        bound_ratio_lo,
        bound_ratio_hi,
        l2_error_mean,
        l2_error_lo,
        l2_error_hi,
        cosine_mean,
        cosine_lo,
        cosine_hi,
        dispersion_mean,
        dispersion_lo,
        dispersion_hi,
    }
}

fn cmd_experiment(out: &Emitter, a: &ExperimentArgs) -> Result<()> {
    let base = synth_config(&a.synth);
    let ipf = ipf_config(&a.ipf);
    let rows = match a.kind {
        ExperimentKind::Sparsity => experiment_sparsity(&base, &sparsity_grid(), a.synth.trials, &ipf)?,
        ExperimentKind::Misspec => experiment_misspec(&base, &misspec_models(), a.synth.trials, &ipf)?,
    };
    if let Some(p) = &a.csv {
        write_rows(p, &rows.iter().map(|(r, _)| summary_row(r)).collect::<Vec<_>>())?;
    }
    if let Some(p) = &a.trials_csv {
        let all: Vec<TrialRow> = rows
            .iter()
            .flat_map(|(r, ts)| ts.iter().map(|t| trial_row(&r.model, r.sparsity, t)))
            .collect();
        write_rows(p, &all)?;
    }
    let summaries: Vec<&ExperimentRow> = rows.iter().map(|(r, _)| r).collect();
    let name = match a.kind {
        ExperimentKind::Sparsity => "experiment-sparsity",
        ExperimentKind::Misspec => "experiment-misspec",
    };
    out.emit(name, &summaries)
}

/// IPF on `xbar`, repairing first when the marginals are not attainable.
fn ipf_with_repair(xbar: &SparseNetwork, marg: &MarginalPair, cfg: &IpfConfig) -> Result<SparseNetwork> {
    match run_ipf(xbar, marg, cfg) {
        Ok(res) if res.status != IpfStatus::Oscillating => return Ok(res.estimate(xbar)),
        Ok(_) => {}
        Err(e) if is_structural(&e) => {}
        Err(e) => return Err(e.into()),
    }
    let repaired = conv_ipf(xbar, marg, &RepairConfig::default())?.network;
    Ok(run_ipf(&repaired, marg, cfg)?.estimate(&repaired))
}

fn method_name(m: EvalMethod) -> &'static str {
    match m {
        EvalMethod::IpfMonth => "ipf-month",
        EvalMethod::IpfWeek => "ipf-week",
        EvalMethod::IpfDay => "ipf-day",
        EvalMethod::Gravity => "gravity",
        EvalMethod::NoAggregate => "no-aggregate",
        EvalMethod::NoP => "no-p",
        EvalMethod::NoQ => "no-q",
        EvalMethod::ScaleMonth => "scale-month",
        EvalMethod::ScaleWeek => "scale-week",
        EvalMethod::ScaleDay => "scale-day",
    }
}

fn label_date(label: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(label.get(..10)?, "%Y-%m-%d").ok()
}

fn station_distances(dir: &IngestDir) -> Option<Distances> {
    let pts: Option<Vec<[f64; 2]>> = dir.stations.iter().map(|s| Some([s.lat?, s.lng?])).collect();
    let pts = pts?;
    Distances::from_points(&pts, &pts).ok()
}

#[derive(Serialize)]
struct HourRow {
    hour: String,
    method: &'static str,
    cosine: f64,
}

fn cmd_evaluate(out: &Emitter, a: &EvaluateArgs) -> Result<()> {
    if let (Some(e), Some(t)) = (&a.estimate, &a.truth) {
        let c = cosine_similarity(&read_net(e)?, &read_net(t)?)?;
        return out.emit("evaluate", &json!({ "cosine": c }));
    }
    let (Some(dir), Some(day)) = (&a.ingest, &a.day) else {
        return Err(input_error("give either --estimate and --truth, or --ingest and --day"));
    };
    let day = NaiveDate::parse_from_str(day, "%Y-%m-%d").map_err(|e| input_error(format!("bad --day: {e}")))?;
    let data = ingest::read_ingest(dir)?;
    let labels = data.series.labels();
    let slices = data.series.slices();
    let within = |from: NaiveDate, to: NaiveDate| -> Vec<usize> {
        (0..labels.len())
            .filter(|&k| label_date(&labels[k]).is_some_and(|d| d >= from && d < to))
            .collect()
    };
    let day_idx = within(day, day + Duration::days(1));
    let hours: Vec<usize> = day_idx.iter().copied().filter(|&k| slices[k].total() > 0.0).collect();
    if hours.is_empty() {
        return Err(input_error(format!("no trips on {day} in {}", dir.display())));
    }
    let pick = |idx: &[usize]| aggregate_slices(&idx.iter().map(|&k| slices[k].clone()).collect::<Vec<_>>());
    let month = data.aggregated.clone();
    let week = pick(&within(day, day + Duration::days(7)))?;
    let day_agg = pick(&day_idx)?;
    let cfg = ipf_config(&a.ipf);

    let mut skipped = Vec::new();
    let gravity = if a.methods.contains(&EvalMethod::Gravity) {
        match station_distances(&data) {
            Some(d) => Some(fit_gravity(&month, &d, a.bin_width)?),
            None => {
                skipped.push("gravity");
                None
            }
        }
    } else {
        None
    };
    let methods: Vec<EvalMethod> = a
        .methods
        .iter()
        .copied()
        .filter(|&m| m != EvalMethod::Gravity || gravity.is_some())
        .collect();

    let rows = hours
        .par_iter()
        .map(|&k| -> Result<Vec<HourRow>> {
            let truth = &slices[k];
            let marg = marginals(truth);
            methods
                .iter()
                .map(|&m| {
                    let est = match m {
                        EvalMethod::IpfMonth => ipf_with_repair(&month, &marg, &cfg)?,
                        EvalMethod::IpfWeek => ipf_with_repair(&week, &marg, &cfg)?,
                        EvalMethod::IpfDay => ipf_with_repair(&day_agg, &marg, &cfg)?,
                        EvalMethod::Gravity => gravity_infer(gravity.as_ref().expect("fitted"), &marg, &cfg)?,
                        EvalMethod::NoAggregate => baseline_rank1(&marg)?,
                        EvalMethod::NoP => baseline_col_share(&month, marg.q())?,
                        EvalMethod::NoQ => baseline_row_share(&month, marg.p())?,
                        EvalMethod::ScaleMonth => baseline_scale(&month, marg.total())?,
                        EvalMethod::ScaleWeek => baseline_scale(&week, marg.total())?,
                        EvalMethod::ScaleDay => baseline_scale(&day_agg, marg.total())?,
                    };
                    Ok(HourRow {
                        hour: labels[k].clone(),
                        method: method_name(m),
                        cosine: cosine_similarity(&est, truth)?,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();

    if let Some(p) = &a.csv {
        write_rows(p, &rows)?;
    }
    let mut by_method: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &rows {
        by_method.entry(r.method).or_default().push(r.cosine);
    }
    let mean_cosine: BTreeMap<&str, f64> = methods
        .iter()
        .map(|&m| {
            let v = &by_method[method_name(m)];
            (method_name(m), v.iter().sum::<f64>() / v.len() as f64)
        })
        .collect();
    out.emit(
        "evaluate",
        &json!({
            "day": day.to_string(),
            "hours": hours.len(),
            "mean_cosine": mean_cosine,
            "gravity": gravity,
            "skipped": skipped,
        }),
    )
}

fn cmd_diagnose(out: &Emitter, a: &DiagnoseArgs) -> Result<()> {
    let (net, marg) = load(&a.net)?;
    let cfg = ipf_config(&a.ipf);
    let fiedler = bipartite_laplacian_fiedler(&net);
    let res: IpfResult = run_ipf(&net, &marg, &cfg)?;
    let estimate = res.estimate(&net);

    let all_positive = res.d0.iter().chain(&res.d1).all(|&d| d > 0.0);
    let (bound, finite_mle) = if all_positive && res.converged() {
        let params = ScalingParameters::from_factors(&res.d0, &res.d1, Normalization::SumZero)?;
        let sup = params.u.iter().chain(&params.v).fold(0.0f64, |m, x| m.max(x.abs()));
        let b = a.bound_b.unwrap_or(sup);
        (Some(error_bound(&net, &params, b)?), Some(finite_mle_condition(&net, &params)?))
    } else {
        (None, None)
    };

    let fit = match &a.observed {
        Some(path) => {
            let y = read_net(path)?;
            let rows = res.d0.iter().filter(|&&d| d > 0.0).count();
            let cols = res.d1.iter().filter(|&&d| d > 0.0).count();
            let d = fit_diagnostics(&y, &estimate, rows, cols)?;
            Some(json!({
                "dispersion": d.dispersion,
                "observations": d.observation_count,
                "degrees_of_freedom": d.degrees_of_freedom,
                "pearson_residuals": d.residual_percentiles()?,
            }))
        }
        None => None,
    };

    let stationarity = match &a.ingest {
        Some(dir) => {
            let data = ingest::read_ingest(dir)?;
            let results = data
                .series
                .slices()
                .par_iter()
                .filter(|s| s.total() > 0.0)
                .map(|s| Ok(run_ipf(&data.aggregated, &marginals(s), &cfg)?))
                .collect::<Result<Vec<_>>>()?;
            Some(stationarity_check(&results, &data.aggregated)?)
        }
        None => None,
    };

    out.emit(
        "diagnose",
        &json!({
            "fiedler": fiedler,
            "ipf": { "status": res.status, "iterations": res.iterations },
            "error_bound": bound,
            "finite_mle": finite_mle,
            "fit": fit,
            "stationarity": stationarity,
        }),
    )
}
