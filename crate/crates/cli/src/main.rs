//! caricheck: audit caricature in LLM persona simulations. Subcommands
//! map to pipeline stages over a project directory; `run` chains all of
//! them and writes aggregate reports.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use caricheck_core::{
    load_registry, required_sample_size, Dimension, PowerRequest, ScenarioSpec, Sides,
};
use clap::{Parser, Subcommand};
use serde_json::json;

use config::ProjectConfig;
use pipeline::{
    execute, scenario_report, select_targets, write_metric_report, write_reports, Filter, RunCtx,
    RunFlags, StageGoal, TargetOutcome,
};

#[derive(Parser)]
#[command(
    name = "caricheck",
    version,
    about = "Audit caricature in LLM persona simulations"
)]
struct Cli {
    /// Project config TOML.
    #[arg(long, global = true, default_value = "caricheck.toml")]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Restrict to specific scenario ids (repeatable).
    #[arg(long, global = true)]
    scenario: Vec<String>,
    /// Restrict to one persona label.
    #[arg(long, global = true)]
    persona: Option<String>,
    /// Restrict to one topic label.
    #[arg(long, global = true)]
    topic: Option<String>,
    /// Restrict to one context id.
    #[arg(long, global = true)]
    context: Option<String>,
    /// Scenario-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize corpora for the selected scenarios and their defaults.
    Generate,
    /// Embed corpora into document and sentence vectors.
    Embed,
    /// Select seed words from the default-topic vs default-persona pair.
    SeedWords,
    /// Build the persona-topic semantic axis and validate it.
    Axis,
    /// Print the leave-one-out validation detail for the axis.
    ValidateAxis,
    /// Classifier accuracy separating target from default-persona.
    Individuate {
        /// Classifier family: forest | logistic.
        #[arg(long)]
        classifier: Option<String>,
        /// Also compute the K-means/V-measure variant.
        #[arg(long)]
        vmeasure: bool,
    },
    /// Normalized exaggeration along the semantic axis.
    Exaggerate {
        /// Include per-document cosines in the output.
        #[arg(long)]
        per_doc: bool,
    },
    /// Required per-group sample size for a two-sample t test.
    Power {
        /// Expected mean of the measured group.
        #[arg(long)]
        mean: f64,
        /// Null-hypothesis mean.
        #[arg(long, default_value_t = 0.0)]
        null: f64,
        /// Common standard deviation.
        #[arg(long)]
        sd: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0.8)]
        power: f64,
        /// one | two
        #[arg(long, default_value = "two")]
        sides: String,
    },
    /// Aggregate one metric over one grouping dimension.
    Report {
        /// persona | topic | persona_topic | context
        #[arg(long)]
        dimension: String,
        /// individuation | exaggeration
        #[arg(long)]
        metric: String,
    },
    /// Full pipeline plus reports.
    Run {
        #[arg(long)]
        classifier: Option<String>,
        #[arg(long)]
        vmeasure: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("caricheck: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn dispatch(cli: Cli) -> anyhow::Result<u8> {
    if let Command::Power { mean, null, sd, alpha, power, sides } = &cli.command {
        let sides = match sides.as_str() {
            "one" => Sides::One,
            "two" => Sides::Two,
            other => anyhow::bail!("unknown --sides value: {other}"),
        };
        let request = PowerRequest {
            mean_effect_numerator: mean - null,
            sd: *sd,
            alpha: *alpha,
            power: *power,
            sides,
        };
        let n = required_sample_size(&request).context("power analysis")?;
        print_json(&json!({
            "effect_size": request.effect_size(),
            "required_per_group": n,
        }));
        return Ok(0);
    }

    let mut config =
        ProjectConfig::load(&cli.config).context("loading project config")?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        config.jobs = jobs.max(1);
    }
    if let Some(kind) = command_classifier(&cli.command) {
        config.classifier = config.classifier_override(kind)?;
    }
    let registry =
        load_registry(&config.registry_path).context("loading scenario registry")?;
    let ctx = RunCtx::new(config, registry).context("initializing pipeline")?;

    if let Command::Report { dimension, metric } = &cli.command {
        if !pipeline::METRICS.contains(&metric.as_str()) {
            anyhow::bail!("unknown metric: {metric}");
        }
        if Dimension::parse(dimension).is_none() {
            anyhow::bail!("unknown dimension: {dimension}");
        }
    }

    let filter = Filter {
        scenarios: cli.scenario.clone(),
        persona: cli.persona.clone(),
        topic: cli.topic.clone(),
        context: cli.context.clone(),
    };
    let targets = select_targets(&ctx.registry, &filter)?;

    let (goal, flags) = goal_for(&cli.command)?;
    let outcomes = execute(&ctx, &targets, goal, &flags);

    let mut failed = 0usize;
    for (spec, outcome) in &outcomes {
        match outcome {
            Ok(ok) => print_json(&outcome_json(&cli.command, spec, ok)),
            Err(err) => {
                failed += 1;
                eprintln!("caricheck: scenario {}: {err}", spec.scenario_id);
            }
        }
    }

    match &cli.command {
        Command::Run { .. } => {
            let summary = write_reports(&ctx, &outcomes)?;
            print_json(&json!({
                "n_ok": summary.n_ok,
                "n_failed": summary.n_failed,
                "reports_dir": ctx.config.reports_dir(),
                "reports": summary.reports,
            }));
        }
        Command::Report { dimension, metric } => {
            if !pipeline::METRICS.contains(&metric.as_str()) {
                anyhow::bail!("unknown metric: {metric}");
            }
            let dimension = Dimension::parse(dimension)
                .ok_or_else(|| anyhow::anyhow!("unknown dimension: {dimension}"))?;
            let written = write_metric_report(&ctx, &outcomes, metric, dimension)?;
            let dir = ctx.config.reports_dir();
            match written.first() {
                Some(csv) => print_json(&json!({
                    "metric": metric,
                    "dimension": dimension.as_str(),
                    "csv": dir.join(csv),
                    "json": dir.join(&written[1]),
                })),
                None => print_json(&json!({
                    "metric": metric,
                    "dimension": dimension.as_str(),
                    "csv": serde_json::Value::Null,
                    "note": "no applicable scores to aggregate",
                })),
            }
        }
        _ => {}
    }

    Ok(if failed > 0 { 1 } else { 0 })
}

fn command_classifier(command: &Command) -> Option<&str> {
    match command {
        Command::Individuate { classifier, .. } | Command::Run { classifier, .. } => {
            classifier.as_deref()
        }
        _ => None,
    }
}

fn goal_for(command: &Command) -> anyhow::Result<(StageGoal, RunFlags)> {
    let mut flags = RunFlags::default();
    let goal = match command {
        Command::Generate => StageGoal::Generate,
        Command::Embed => StageGoal::Embed,
        Command::SeedWords => StageGoal::SeedWords,
        Command::Axis | Command::ValidateAxis => StageGoal::Axis,
        Command::Individuate { vmeasure, .. } => {
            flags.vmeasure = *vmeasure;
            StageGoal::Individuate
        }
        Command::Exaggerate { per_doc } => {
            flags.per_doc = *per_doc;
            StageGoal::Exaggerate
        }
        Command::Report { metric, .. } => {
            if metric == "individuation" {
                StageGoal::Individuate
            } else {
                StageGoal::Exaggerate
            }
        }
        Command::Run { vmeasure, .. } => {
            flags.vmeasure = *vmeasure;
            StageGoal::Exaggerate
        }
        Command::Power { .. } => unreachable!("power handled before dispatch"),
    };
    Ok((goal, flags))
}

/// The per-scenario stdout line for each subcommand.
fn outcome_json(command: &Command, spec: &ScenarioSpec, outcome: &TargetOutcome) -> serde_json::Value {
    let id = &spec.scenario_id;
    match command {
        Command::Generate => {
            let cells = [
                &outcome.trio.target,
                &outcome.trio.default_persona,
                &outcome.trio.default_topic,
            ];
            json!({
                "scenario_id": id,
                "corpora": cells.iter().map(|c| json!({
                    "scenario_id": c.spec.scenario_id,
                    "n_records": c.n_records,
                    "path": c.corpus_path,
                })).collect::<Vec<_>>(),
            })
        }
        Command::Embed => {
            let cells = [
                &outcome.trio.target,
                &outcome.trio.default_persona,
                &outcome.trio.default_topic,
            ];
            json!({
                "scenario_id": id,
                "embedded": cells.iter().map(|c| json!({
                    "scenario_id": c.spec.scenario_id,
                    "dim": c.dim,
                    "n_docs": c.n_records,
                    "n_sentences": c.n_sentences,
                    "path": c.vec_path,
                })).collect::<Vec<_>>(),
            })
        }
        Command::SeedWords => {
            let sets = outcome.seed_sets.as_ref().expect("seed words computed");
            json!({
                "scenario_id": id,
                "persona_pole": sets.persona_pole,
                "topic_pole": sets.topic_pole,
                "fallback_used": sets.fallback_used,
            })
        }
        Command::Axis => {
            let axis = outcome.axis.as_ref().expect("axis computed");
            json!({
                "scenario_id": id,
                "axis_norm": axis.axis.axis_norm(),
                "pole_sizes": [axis.axis.persona_words.len(), axis.axis.topic_words.len()],
                "dropped_tokens": axis.axis.dropped,
                "loo_pass_rate": axis.loo.pass_rate,
            })
        }
        Command::ValidateAxis => {
            let axis = outcome.axis.as_ref().expect("axis computed");
            json!({
                "scenario_id": id,
                "loo_pass_rate": axis.loo.pass_rate,
                "persona_pole_skipped": axis.loo.persona_pole_skipped,
                "topic_pole_skipped": axis.loo.topic_pole_skipped,
                "entries": axis.loo.entries,
            })
        }
        Command::Individuate { .. } => {
            let indiv = outcome.individuation.as_ref().expect("individuation computed");
            json!({
                "scenario_id": id,
                "accuracy": indiv.score.accuracy,
                "wilson": [indiv.wilson_low, indiv.wilson_high],
                "individuated": indiv.individuated,
                "classifier_id": indiv.score.classifier_id,
                "n_train": indiv.score.n_train,
                "n_test": indiv.score.n_test,
                "vmeasure": outcome.vmeasure.as_ref().map(|v| &v.score),
            })
        }
        Command::Exaggerate { .. } => {
            let ex = outcome.exaggeration.as_ref().expect("exaggeration computed");
            let mut value = json!({
                "scenario_id": id,
                "raw": ex.score.raw,
                "normalized": ex.score.normalized,
                "denominator": ex.score.denominator,
                "flags": ex.score.flags,
                "applicable": ex.applicable,
            });
            if let Some(cosines) = &outcome.doc_cosines {
                value["doc_cosines"] = json!(cosines);
            }
            value
        }
        Command::Run { .. } | Command::Report { .. } => {
            serde_json::to_value(scenario_report(spec, &Ok(outcome.clone())))
                .unwrap_or(serde_json::Value::Null)
        }
        Command::Power { .. } => unreachable!("power handled before dispatch"),
    }
}
