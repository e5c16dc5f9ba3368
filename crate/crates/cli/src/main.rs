mod config;
mod output;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use matchsync::combinatorics::{
    coalescence_bounds, count_for_trace, count_strongly_synchronizing, count_strongly_synchronizing_bruteforce,
    enumerate_traces, synchronizing_probability,
};
use matchsync::estimation::{
    chi_square_two_sample, fixed_horizon_sample, forward_counts, forward_seed, loss_replication, perfect_sample,
    perfect_word_sample, LossEstimate, PolicyComparison, Sampler, SamplerOps,
};
use matchsync::graph::random_connected_er;
use matchsync::randomness::derive_replication_seed;
use matchsync::{Error, InputTape, PatienceLaw, Policy};
use num_bigint::BigUint;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use config::{config_error, parse_graph, ModelArgs, ResolvedModel, ResolvedRun, RunArgs};

#[derive(Parser)]
#[command(name = "matchsync", version, about = "Perfect sampling for matching models with reneging")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args, Clone, Debug)]
struct OutputArgs {
    #[arg(long, value_enum, default_value = "json")]
    format: Format,

    /// Output file (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,

    /// Worker threads for replications (0 = all cores). Does not change
    /// the output.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Draw perfect samples.
    Sample {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Count strongly synchronizing words and bound the coalescence time.
    Count {
        #[arg(long, default_value = "paw")]
        graph: String,
        #[arg(long)]
        p: usize,
        /// Class probabilities for the general-μ horizon bound.
        #[arg(long, value_delimiter = ',')]
        mu: Option<Vec<f64>>,
        /// Also count by testing every word of length 2p.
        #[arg(long)]
        enumerate: bool,
        /// Report the count of every trace.
        #[arg(long)]
        per_trace: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Estimate loss rates from perfect samples.
    Loss {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Compare policies (loss rates, common random numbers) or samplers
    /// (operation counts).
    Compare {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Policies to compare, e.g. `fcfm;ml;priority:2,1`.
        #[arg(long, value_delimiter = ';')]
        policies: Option<Vec<String>>,
        /// Samplers to compare, e.g. `algo3,cftp`.
        #[arg(long, value_delimiter = ',')]
        samplers: Option<Vec<String>>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Chi-square agreement of perfect samples with a forward run.
    Validate {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1_000_000)]
        forward_steps: u64,
        #[arg(long, default_value_t = 0.01)]
        significance: f64,
        /// Replace the sampler by a fixed-horizon run from the empty state.
        #[arg(long)]
        negative_control: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Draw a connected Erdős–Rényi compatibility graph.
    GenGraph {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        q: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("i/o: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(Error::HorizonExceeded { .. }) => 3,
            CliError::Lib(_) => 2,
            CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Lib(Error::Input(_)) => "input",
            CliError::Lib(Error::Config(_)) => "config",
            CliError::Lib(Error::GraphGeneration { .. }) => "graph_generation",
            CliError::Lib(Error::HorizonExceeded { .. }) => "horizon_exceeded",
            CliError::Lib(Error::StateSpaceTooLarge { .. }) => "state_space_too_large",
            CliError::Io(_) => "io",
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = json!({"error": {"kind": e.kind(), "message": e.to_string(), "exit_code": e.exit_code()}});
            eprint!("{}", output::to_json(&record));
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Sample { model, run, out } => sample(&model.resolve()?, &run, &out),
        Command::Count {
            graph,
            p,
            mu,
            enumerate,
            per_trace,
            out,
        } => count(&graph, p, mu, enumerate, per_trace, &out),
        Command::Loss { model, run, out } => loss(&model.resolve()?, &run, &out),
        Command::Compare {
            model,
            run,
            policies,
            samplers,
            out,
        } => compare(&model.resolve()?, &run, policies, samplers, &out),
        Command::Validate {
            model,
            run,
            forward_steps,
            significance,
            negative_control,
            out,
        } => validate(&model.resolve()?, &run, forward_steps, significance, negative_control, &out),
        Command::GenGraph { n, q, seed, out } => gen_graph(n, q, seed, &out),
    }
}

/// Maps replications `0..reps` in parallel, keeping replication order.
fn par_reps<T: Send>(jobs: usize, reps: u64, f: impl Fn(u64) -> CliResult<T> + Sync + Send) -> CliResult<Vec<T>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Io(e.to_string()))?;
    pool.install(|| (0..reps).into_par_iter().map(f).collect())
}

fn emit<C: Serialize, R: Serialize, S: Serialize>(out: &OutputArgs, config: &C, rows: &[R], summary: &S) -> CliResult<()> {
    let text = match out.format {
        Format::Json => output::to_json(&json!({
            "config": config,
            "results": rows,
            "summary": summary,
        })),
        Format::Csv => output::to_csv(config, rows),
    };
    write_text(out, &text)
}

fn write_text(out: &OutputArgs, text: &str) -> CliResult<()> {
    match &out.output {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct Config<'a, E: Serialize> {
    command: &'static str,
    #[serde(flatten)]
    model: &'a ResolvedModel,
    #[serde(flatten)]
    run: &'a ResolvedRun,
    #[serde(flatten)]
    extra: E,
}

#[derive(Serialize)]
struct SampleRow {
    replication: u64,
    seed: u64,
    sample: String,
    iterations: u32,
    start_time: i64,
    detection_time: i64,
    events_consumed: u64,
    operations: u64,
}

fn sample(m: &ResolvedModel, args: &RunArgs, out: &OutputArgs) -> CliResult<()> {
    let r = args.resolve(m)?;
    let rows = par_reps(out.jobs, r.reps, |rep| {
        let seed = derive_replication_seed(r.seed, rep);
        let mut tape = InputTape::new(m.model.clone(), seed);
        let s = perfect_sample(&m.model, &r.policy, &m.graph, &mut tape, r.algorithm, &r.horizon)?;
        Ok(SampleRow {
            replication: rep,
            seed,
            sample: s.sample.to_string(),
            iterations: s.iterations,
            start_time: s.start_time,
            detection_time: s.detection_time,
            events_consumed: s.events_consumed,
            operations: s.operations,
        })
    })?;
    let n = rows.len() as f64;
    let summary = json!({
        "replications": rows.len(),
        "mean_operations": rows.iter().map(|r| r.operations as f64).sum::<f64>() / n,
        "mean_horizon": rows.iter().map(|r| -r.start_time as f64).sum::<f64>() / n,
        "mean_iterations": rows.iter().map(|r| r.iterations as f64).sum::<f64>() / n,
    });
    let config = Config { command: "sample", model: m, run: &r, extra: json!({}) };
    emit(out, &config, &rows, &summary)
}

fn big_to_json(x: &BigUint) -> Value {
    match u64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

/// Largest `n^{2p}` accepted by `count --enumerate`.
const ENUMERATION_CAP: u128 = 100_000_000;

fn count(graph_spec: &str, p: usize, mu: Option<Vec<f64>>, enumerate: bool, per_trace: bool, out: &OutputArgs) -> CliResult<()> {
    if p == 0 {
        return Err(config_error("--p must be at least 1").into());
    }
    let g = parse_graph(graph_spec)?;
    let n_words = count_strongly_synchronizing(&g, p);
    let mut result = serde_json::Map::new();
    result.insert("N".into(), big_to_json(&n_words));
    match coalescence_bounds(g.n(), p, &n_words) {
        Ok(b) => {
            result.insert("bound_I".into(), json!(b.bound_iterations));
            result.insert("bound_T".into(), json!(b.bound_horizon));
            result.insert("assumes_uniform_mu".into(), json!(true));
        }
        Err(e) => {
            result.insert("bound_I".into(), Value::Null);
            result.insert("bound_T".into(), Value::Null);
            result.insert("diagnostic".into(), json!(e.to_string()));
        }
    }
    if let Some(mu) = &mu {
        let model = matchsync::ArrivalModel::new(mu.clone(), PatienceLaw::Deterministic(p as u32), 0.0)?;
        if model.n() != g.n() {
            return Err(config_error(format!("mu has {} classes, graph has {}", model.n(), g.n())).into());
        }
        let q = synchronizing_probability(&g, p, mu)?;
        result.insert("q".into(), json!(q));
        result.insert("general_bound_T".into(), if q > 0.0 { json!(2.0 * p as f64 / q) } else { Value::Null });
    }
    if enumerate {
        let size = (g.n() as u128).checked_pow(2 * p as u32).unwrap_or(u128::MAX);
        if size > ENUMERATION_CAP {
            return Err(Error::StateSpaceTooLarge { size, cap: ENUMERATION_CAP }.into());
        }
        result.insert("N_enumerated".into(), json!(count_strongly_synchronizing_bruteforce(&g, p)));
    }
    let traces: Vec<Value> = enumerate_traces(&g)
        .iter()
        .map(|z| json!({"trace": z.to_string(), "N_z": big_to_json(&count_for_trace(z, p, &g))}))
        .collect();
    if per_trace {
        result.insert("per_trace".into(), Value::Array(traces.clone()));
    }
    let config = json!({"command": "count", "graph_spec": graph_spec, "graph": g, "p": p, "mu": mu});
    let text = match out.format {
        Format::Json => {
            let mut top = serde_json::Map::new();
            top.insert("config".into(), config);
            top.extend(result);
            output::to_json(&Value::Object(top))
        }
        Format::Csv if per_trace => output::to_csv(&config, &traces),
        Format::Csv => output::to_csv(&config, &[Value::Object(result)]),
    };
    write_text(out, &text)
}

#[derive(Serialize)]
struct LossRow {
    policy: String,
    class: String,
    rate: f64,
    std_error: f64,
}

fn loss_rows(policy: &Policy, est: &LossEstimate) -> Vec<LossRow> {
    let mut rows: Vec<LossRow> = est
        .per_class
        .iter()
        .map(|c| LossRow {
            policy: policy.to_string(),
            class: c.class.to_string(),
            rate: c.rate,
            std_error: c.std_error,
        })
        .collect();
    rows.push(LossRow {
        policy: policy.to_string(),
        class: "total".into(),
        rate: est.total,
        std_error: est.total_std_error,
    });
    rows
}

fn require_word_model(m: &ResolvedModel) -> CliResult<()> {
    if m.model.deterministic_patience().is_none() {
        return Err(config_error("loss estimation needs deterministic patience").into());
    }
    Ok(())
}

fn losses_for(m: &ResolvedModel, r: &ResolvedRun, policy: &Policy, jobs: usize) -> CliResult<Vec<Option<u32>>> {
    par_reps(jobs, r.reps, |rep| {
        Ok(loss_replication(&m.model, policy, &m.graph, r.seed, rep, r.algorithm, &r.horizon)?.lost)
    })
}

fn loss(m: &ResolvedModel, args: &RunArgs, out: &OutputArgs) -> CliResult<()> {
    require_word_model(m)?;
    let r = args.resolve(m)?;
    let losses = losses_for(m, &r, &r.policy, out.jobs)?;
    let est = LossEstimate::from_losses(m.model.n(), losses)?;
    let config = Config { command: "loss", model: m, run: &r, extra: json!({}) };
    emit(out, &config, &loss_rows(&r.policy, &est), &json!({"replications": est.replications}))
}

fn compare(
    m: &ResolvedModel,
    args: &RunArgs,
    policies: Option<Vec<String>>,
    samplers: Option<Vec<String>>,
    out: &OutputArgs,
) -> CliResult<()> {
    let r = args.resolve(m)?;
    if let Some(samplers) = samplers {
        let samplers: Vec<Sampler> = samplers
            .iter()
            .map(|s| s.parse().map_err(|e: Error| config_error(e.to_string())))
            .collect::<Result<_, _>>()?;
        let mut rows = Vec::new();
        for &s in &samplers {
            let reports = par_reps(out.jobs, r.reps, |rep| {
                let mut tape = InputTape::new(m.model.clone(), derive_replication_seed(r.seed, rep));
                Ok(perfect_sample(&m.model, &r.policy, &m.graph, &mut tape, s, &r.horizon)?)
            })?;
            rows.push(SamplerOps::from_reports(s, &reports));
        }
        let config = Config { command: "compare", model: m, run: &r, extra: json!({"samplers": samplers}) };
        return emit(out, &config, &rows, &json!({"replications": r.reps}));
    }
    require_word_model(m)?;
    let names = policies.ok_or_else(|| config_error("give --policies or --samplers"))?;
    if names.len() < 2 {
        return Err(config_error("compare at least two policies").into());
    }
    let mut per_policy = Vec::new();
    for name in &names {
        let pol: Policy = name.parse().map_err(|e: Error| config_error(e.to_string()))?;
        let losses = losses_for(m, &r, &pol, out.jobs)?;
        per_policy.push((pol, losses));
    }
    let table = PolicyComparison::from_losses(m.model.n(), per_policy)?;
    let rows: Vec<LossRow> = table.estimates.iter().flat_map(|(p, e)| loss_rows(p, e)).collect();
    let config = Config { command: "compare", model: m, run: &r, extra: json!({"policies": names}) };
    emit(out, &config, &rows, &json!({"replications": r.reps, "paired_differences": table.differences}))
}

fn validate(
    m: &ResolvedModel,
    args: &RunArgs,
    forward_steps: u64,
    significance: f64,
    negative_control: bool,
    out: &OutputArgs,
) -> CliResult<()> {
    require_word_model(m)?;
    if !(0.0..1.0).contains(&significance) {
        return Err(config_error("--significance must lie in (0, 1)").into());
    }
    let r = args.resolve(m)?;
    let samples = par_reps(out.jobs, r.reps, |rep| {
        let mut tape = InputTape::new(m.model.clone(), derive_replication_seed(r.seed, rep));
        let x = if negative_control {
            fixed_horizon_sample(&m.model, &r.policy, &m.graph, &mut tape)?
        } else {
            perfect_word_sample(&m.model, &r.policy, &m.graph, &mut tape, r.algorithm, &r.horizon)?.sample
        };
        Ok(x.to_string())
    })?;
    let mut perfect: BTreeMap<String, u64> = BTreeMap::new();
    for s in samples {
        *perfect.entry(s).or_default() += 1;
    }
    let forward = forward_counts(&m.model, &r.policy, &m.graph, forward_seed(r.seed), forward_steps)?;
    let report = chi_square_two_sample(&perfect, &forward, significance)?;
    let config = Config {
        command: "validate",
        model: m,
        run: &r,
        extra: json!({"forward_steps": forward_steps, "negative_control": negative_control}),
    };
    emit(out, &config, &[&report], &json!({"pass": report.pass}))
}

fn gen_graph(n: usize, q: f64, seed: u64, out: &OutputArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&q) {
        return Err(config_error("--q must lie in [0, 1]").into());
    }
    let g = random_connected_er(n, q, seed)?;
    let config = json!({"command": "gen-graph", "n": n, "q": q, "seed": seed});
    let text = match out.format {
        Format::Json => {
            let mut v = serde_json::to_value(&g).expect("serializable");
            v.as_object_mut().expect("object").insert("config".into(), config);
            output::to_json(&v)
        }
        Format::Csv => {
            let rows: Vec<Value> = g.edges().iter().map(|&(i, j)| json!({"i": i, "j": j})).collect();
            output::to_csv(&config, &rows)
        }
    };
    write_text(out, &text)
}
