//! Command-line entry points. Every artifact-producing command writes its
//! outputs and a `manifest.json` into `--out`; `rerun` re-executes a
//! manifest and checks that every output is reproduced byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use exnex_core::ess::{beta_moment_match, ess_report, EssRow};
use exnex_core::io::{
    animal_csv_string, format_posterior_report, format_simulation_report, load_animal_data,
    load_config, load_scenarios, load_trial_state, posterior_report, recommendation_json,
    round4, sha256_file, sha256_hex, to_json_string, write_json, write_text, ConfigFile,
    RunConfig, RunManifest, SimulationRecords, TrialSet,
};
use exnex_core::mcmc::prior_predictive;
use exnex_core::model::AnimalStudy;
use exnex_core::presets;
use exnex_core::sim::{
    operating_characteristics, simulate_replicates, ModelVariant, OcReport, ScenarioSpec,
};
use exnex_core::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

/// Exit status for an error: 2 configuration, 3 input data, 4 anything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::InvalidData(_) | Error::Parse { .. } | Error::Io { .. } => EXIT_DATA,
        Error::Replicate { source, .. } => exit_code(source).max(EXIT_RUNTIME),
        _ => EXIT_RUNTIME,
    }
}

#[derive(Debug, Parser)]
#[command(name = "exnex", version, about = "Bayesian dose escalation with animal co-data and subgroup bridging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Fit the model to trial data and write posterior summaries and draws.
    Fit(TrialArgs),
    /// Predictive priors of the per-dose DLT risks given animal data only.
    PriorPredict(InputArgs),
    /// Prior effective sample sizes, from a fit or from explicit moments.
    Ess(EssArgs),
    /// Simulate paired trials and report operating characteristics.
    Simulate(SimulateArgs),
    /// Recommend the next dose (or the starting dose) for the active subgroup.
    Recommend(TrialArgs),
    /// Run the HTTP conduct service.
    Serve(ServeArgs),
    /// Re-execute a run from its manifest and verify its outputs.
    Rerun(RerunArgs),
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct InputArgs {
    /// Configuration file; defaults to $EXNEX_CONFIG, then built-in defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Animal studies CSV (study_id,species,dose,n,r); defaults to the shipped studies.
    #[arg(long)]
    pub animal_data: Option<PathBuf>,
    /// Sampler seed (master seed for simulations); defaults to the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "exnex-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct TrialArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Trial state file.
    #[arg(long)]
    pub trial: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct EssArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Trial state file; without one the predictive priors are used.
    #[arg(long)]
    pub trial: Option<PathBuf>,
    /// Explicit `mean:sd` pairs instead of a fit, e.g. `0.25:0.1`.
    #[arg(long, value_delimiter = ',')]
    pub moments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    /// Standard scenario number (1-6) or a scenario file.
    #[arg(long)]
    pub scenario: String,
    /// Comma-separated variants (A, B, B-robust, C, D, E) or `all`.
    #[arg(long, default_value = "all")]
    pub model_variant: String,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub animal_data: Option<PathBuf>,
    /// Default session seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub bind: String,
    /// Static bearer token required on every request.
    #[arg(long, env = "EXNEX_TOKEN")]
    pub token: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct RerunArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the reproduced outputs.
    #[arg(long)]
    pub out: PathBuf,
}

/// What a command printed and wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<String>,
}

struct Inputs {
    run: RunConfig,
    manifest: RunManifest,
    animal: Vec<AnimalStudy>,
    seed: u64,
}

fn prepare(
    command: &Command,
    input: &InputArgs,
    config_override: Option<&ConfigFile>,
) -> Result<Inputs, Error> {
    let (run, file, bytes) = match config_override {
        Some(f) => {
            let bytes = to_json_string(f)?.into_bytes();
            (f.to_run_config()?, f.clone(), bytes)
        }
        None => load_config(input.config.as_deref())?,
    };
    let animal = match &input.animal_data {
        Some(p) => load_animal_data(p, run.model.reference_dose)?,
        None => presets::animal_studies(),
    };
    let seed = input.seed.unwrap_or(run.sampler.seed);
    let arguments = serde_json::to_value(command).map_err(|e| Error::Config(e.to_string()))?;
    let config_value = serde_json::to_value(&file).map_err(|e| Error::Config(e.to_string()))?;
    let mut manifest = RunManifest::new(command_name(command), arguments, &bytes, config_value, seed);
    match &input.animal_data {
        Some(p) => manifest.add_input("animal_data", p)?,
        None => {
            manifest
                .data_digests
                .insert("animal_data".into(), sha256_hex(animal_csv_string(&animal).as_bytes()));
        }
    }
    Ok(Inputs {
        run,
        manifest,
        animal,
        seed,
    })
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Fit(_) => "fit",
        Command::PriorPredict(_) => "prior-predict",
        Command::Ess(_) => "ess",
        Command::Simulate(_) => "simulate",
        Command::Recommend(_) => "recommend",
        Command::Serve(_) => "serve",
        Command::Rerun(_) => "rerun",
    }
}

fn load_trials(path: &Path, inputs: &mut Inputs) -> Result<TrialSet, Error> {
    inputs.manifest.add_input("trial", path)?;
    load_trial_state(path, &inputs.run.grid, &inputs.run.design)
}

fn finish(mut inputs: Inputs, out: &Path, files: Vec<String>, stdout: String) -> Result<Outcome, Error> {
    let names: Vec<&str> = files.iter().map(String::as_str).collect();
    inputs.manifest.finish(out, &names)?;
    inputs.manifest.write(&out.join("manifest.json"))?;
    Ok(Outcome { stdout, files })
}

/// Runs a command. `config_override` replaces `--config` (used by reruns,
/// which carry the configuration inside the manifest).
pub fn execute(command: &Command, config_override: Option<&ConfigFile>) -> Result<Outcome, Error> {
    match command {
        Command::Fit(a) => fit(command, a, config_override),
        Command::PriorPredict(a) => prior(command, a, config_override),
        Command::Ess(a) => ess(command, a, config_override),
        Command::Simulate(a) => simulate(command, a, config_override),
        Command::Recommend(a) => recommend(command, a, config_override),
        Command::Serve(a) => serve(a),
        Command::Rerun(a) => rerun(a),
    }
}

fn fit(command: &Command, a: &TrialArgs, cfg: Option<&ConfigFile>) -> Result<Outcome, Error> {
    let mut inputs = prepare(command, &a.input, cfg)?;
    let set = load_trials(&a.trial, &mut inputs)?;
    let post = inputs.run.fit(&inputs.animal, &set.trials, inputs.seed)?;
    let report = posterior_report(&post, &set.trials, &inputs.run.thresholds)?;
    let text = format_posterior_report(&report);
    let out = &a.input.out;
    write_json(&out.join("posterior.json"), &report)?;
    write_json(&out.join("draws.json"), &post)?;
    write_text(&out.join("report.txt"), &text)?;
    finish(inputs, out, vec!["posterior.json".into(), "draws.json".into(), "report.txt".into()], text)
}

fn prior_trials(inputs: &mut Inputs, trial: Option<&Path>) -> Result<Vec<exnex_core::model::HumanTrialState>, Error> {
    match trial {
        Some(p) => Ok(load_trials(p, inputs)?.trials),
        None => inputs.run.empty_trials(),
    }
}

fn prior(command: &Command, a: &InputArgs, cfg: Option<&ConfigFile>) -> Result<Outcome, Error> {
    let mut inputs = prepare(command, a, cfg)?;
    let trials = prior_trials(&mut inputs, None)?;
    let post = inputs.run.fit(&inputs.animal, &trials, inputs.seed)?;
    let report = posterior_report(&post, &trials, &inputs.run.thresholds)?;
    let text = format_posterior_report(&report);
    write_json(&a.out.join("prior_predictive.json"), &report)?;
    write_text(&a.out.join("report.txt"), &text)?;
    finish(inputs, &a.out, vec!["prior_predictive.json".into(), "report.txt".into()], text)
}

#[derive(Serialize)]
struct EssFile {
    schema_version: &'static str,
    rows: Vec<EssRow>,
}

fn parse_moments(pairs: &[String]) -> Result<Vec<EssRow>, Error> {
    pairs
        .iter()
        .map(|p| {
            let (m, s) = p
                .split_once(':')
                .ok_or_else(|| Error::Config(format!("--moments entry {p:?} is not mean:sd")))?;
            let parse = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("--moments entry {p:?} is not numeric")))
            };
            let (mean, sd) = (parse(m)?, parse(s)?);
            let beta = match beta_moment_match(mean, sd) {
                Ok(b) => Some(b),
                Err(Error::Infeasible { .. }) => None,
                Err(e) => return Err(e),
            };
            Ok(EssRow {
                subgroup_id: String::new(),
                dose: f64::NAN,
                mean,
                sd,
                ess: beta.map(|b| b.ess()),
                beta,
            })
        })
        .collect()
}

fn format_ess(rows: &[EssRow]) -> String {
    let mut s = format!(
        "{:>8} {:>8} {:>8} {:>8} {:>9} {:>9} {:>8}\n",
        "subgroup", "dose", "mean", "sd", "a", "b", "ESS"
    );
    for r in rows {
        let dose = if r.dose.is_nan() { "-".to_string() } else { r.dose.to_string() };
        let (a, b, e) = match r.beta {
            Some(beta) => (
                format!("{:.4}", beta.a),
                format!("{:.4}", beta.b),
                format!("{:.4}", beta.ess()),
            ),
            None => ("-".into(), "-".into(), "infeasible".into()),
        };
        let _ = writeln!(
            s,
            "{:>8} {:>8} {:>8.4} {:>8.4} {:>9} {:>9} {:>8}",
            if r.subgroup_id.is_empty() { "-" } else { &r.subgroup_id },
            dose,
            round4(r.mean),
            round4(r.sd),
            a,
            b,
            e
        );
    }
    s
}

fn ess(command: &Command, a: &EssArgs, cfg: Option<&ConfigFile>) -> Result<Outcome, Error> {
    let mut inputs = prepare(command, &a.input, cfg)?;
    let rows = if a.moments.is_empty() {
        let trials = prior_trials(&mut inputs, a.trial.as_deref())?;
        let post = if trials.iter().all(|t| t.cohorts().is_empty()) {
            prior_predictive(
                &inputs.animal,
                &trials,
                &inputs.run.model.select_subgroups(
                    &trials.iter().map(|t| t.subgroup_id.as_str()).collect::<Vec<_>>(),
                )?,
                &inputs.run.sampler.clone().with_seed(inputs.seed),
            )?
        } else {
            inputs.run.fit(&inputs.animal, &trials, inputs.seed)?.summaries()
        };
        ess_report(&post)
    } else {
        parse_moments(&a.moments)?
    };
    let text = format_ess(&rows);
    write_json(
        &a.input.out.join("ess.json"),
        &EssFile {
            schema_version: exnex_core::io::SCHEMA_VERSION,
            rows,
        },
    )?;
    write_text(&a.input.out.join("report.txt"), &text)?;
    finish(inputs, &a.input.out, vec!["ess.json".into(), "report.txt".into()], text)
}

fn parse_variants(s: &str) -> Result<Vec<ModelVariant>, Error> {
    if s.eq_ignore_ascii_case("all") {
        return Ok(ModelVariant::ALL.to_vec());
    }
    s.split(',').map(|v| v.trim().parse()).collect()
}

fn scenarios(arg: &str, inputs: &mut Inputs) -> Result<Vec<ScenarioSpec>, Error> {
    if let Ok(n) = arg.parse::<usize>() {
        return Ok(vec![ScenarioSpec::standard(n)?]);
    }
    let p = Path::new(arg);
    inputs.manifest.add_input("scenario", p)?;
    load_scenarios(p)
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

#[derive(Serialize)]
struct OcFile<'a> {
    schema_version: &'static str,
    reports: &'a [OcReport],
}

fn simulate(command: &Command, a: &SimulateArgs, cfg: Option<&ConfigFile>) -> Result<Outcome, Error> {
    let mut inputs = prepare(command, &a.input, cfg)?;
    let variants = parse_variants(&a.model_variant)?;
    let scenarios = scenarios(&a.scenario, &mut inputs)?;
    if a.replicates == 0 {
        return Err(Error::Config("--replicates must be positive".into()));
    }
    let out = &a.input.out;
    let mut files = Vec::new();
    let mut reports = Vec::new();
    for s in &scenarios {
        let runs = simulate_replicates(
            s,
            &variants,
            &inputs.animal,
            &inputs.run.simulation,
            a.replicates,
            inputs.seed,
        )?;
        for (v, records) in variants.iter().zip(runs) {
            reports.push(operating_characteristics(s, &records)?);
            let name = format!("records_{}_{}.json", slug(&s.name), slug(&v.to_string()));
            SimulationRecords::new(s, *v, inputs.seed, records).write(&out.join(&name))?;
            files.push(name);
        }
    }
    let text = format_simulation_report(&reports);
    write_json(
        &out.join("oc_report.json"),
        &OcFile {
            schema_version: exnex_core::io::SCHEMA_VERSION,
            reports: &reports,
        },
    )?;
    write_text(&out.join("report.txt"), &text)?;
    files.push("oc_report.json".into());
    files.push("report.txt".into());
    finish(inputs, out, files, text)
}

fn recommend(command: &Command, a: &TrialArgs, cfg: Option<&ConfigFile>) -> Result<Outcome, Error> {
    let mut inputs = prepare(command, &a.input, cfg)?;
    let set = load_trials(&a.trial, &mut inputs)?;
    let (_, report) = inputs.run.recommend(&inputs.animal, &set, inputs.seed)?;
    let json = recommendation_json(&report)?;
    write_text(&a.input.out.join("recommendation.json"), &json)?;
    finish(inputs, &a.input.out, vec!["recommendation.json".into()], json)
}

fn serve(a: &ServeArgs) -> Result<Outcome, Error> {
    let (run, file, _) = load_config(a.config.as_deref())?;
    let animal = match &a.animal_data {
        Some(p) => load_animal_data(p, run.model.reference_dose)?,
        None => presets::animal_studies(),
    };
    let defaults = exnex_service::Defaults {
        config: file,
        animal_csv: animal_csv_string(&animal),
        seed: a.seed.unwrap_or(run.sampler.seed),
    };
    let service = exnex_service::Service::new(defaults, a.token.clone());
    let rt = tokio::runtime::Runtime::new().map_err(|e| Error::Io {
        path: "<runtime>".into(),
        source: e,
    })?;
    rt.block_on(exnex_service::serve(service, &a.bind))
        .map_err(|source| Error::Io {
            path: a.bind.clone(),
            source,
        })?;
    Ok(Outcome::default())
}

/// Replaces the output directory of an artifact-producing command.
fn with_out(command: &Command, out: &Path) -> Result<Command, Error> {
    let mut c = command.clone();
    let slot = match &mut c {
        Command::Fit(a) | Command::Recommend(a) => &mut a.input.out,
        Command::PriorPredict(a) => &mut a.out,
        Command::Ess(a) => &mut a.input.out,
        Command::Simulate(a) => &mut a.input.out,
        Command::Serve(_) | Command::Rerun(_) => {
            return Err(Error::Config("manifest does not describe a rerunnable command".into()))
        }
    };
    *slot = out.to_path_buf();
    Ok(c)
}

fn rerun(a: &RerunArgs) -> Result<Outcome, Error> {
    let manifest = RunManifest::load(&a.manifest)?;
    let command: Command = serde_json::from_value(manifest.arguments.clone())
        .map_err(|e| Error::Parse {
            path: a.manifest.display().to_string(),
            message: format!("arguments: {e}"),
        })?;
    let config: ConfigFile = serde_json::from_value(manifest.config.clone()).map_err(|e| Error::Parse {
        path: a.manifest.display().to_string(),
        message: format!("config: {e}"),
    })?;
    let command = with_out(&command, &a.out)?;
    execute(&command, Some(&config))?;
    let fresh = RunManifest::load(&a.out.join("manifest.json"))?;
    for (role, digest) in &manifest.data_digests {
        if fresh.data_digests.get(role) != Some(digest) {
            return Err(Error::InvalidData(format!(
                "input {role} differs from the one recorded in the manifest"
            )));
        }
    }
    let bad = manifest.mismatched_outputs(&a.out)?;
    if !bad.is_empty() {
        return Err(Error::State(format!(
            "rerun outputs differ from the manifest: {}",
            bad.join(", ")
        )));
    }
    Ok(Outcome {
        stdout: format!(
            "reproduced {} outputs bit-identically in {}\n",
            manifest.outputs.len(),
            a.out.display()
        ),
        files: manifest.outputs.iter().map(|o| o.path.clone()).collect(),
    })
}

/// Digest of a file, for callers comparing outputs.
pub fn digest(path: &Path) -> Result<String, Error> {
    sha256_file(path)
}
