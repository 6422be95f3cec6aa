//! Command-line parsing and the subcommands.

use std::collections::BTreeMap;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use mideu::mid::Interaction;
use mideu::model::{node_position, parse_step};
use mideu::oracle::joint_eu_numeric;
use mideu::policy::enumerate_policies;
use mideu::rational::format_rational;
use mideu::structure::{check_structure, predicted_structure};
use mideu::transforms::{apply_step, to_extensive_form, StepKind};
use mideu::{parse_model, symbolic_eu, Model, ModelDocument, Policy};
use serde_json::Value;

use crate::api::{self, AsymmetrySelection, AxisDoc, EvaluateRequest, SweepRequest};

#[derive(Debug, Parser)]
#[command(name = "mideu", version, about = "Symbolic expected utilities for multiplicative influence diagrams")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model and print its decision sequence and derived sets.
    Validate(ModelArg),
    /// Print an expected-utility vector, symbolic or substituted.
    Evaluate(EvaluateArgs),
    /// Compare predicted and actual polynomial structure at every stage.
    Structure(StructureArgs),
    /// Apply a graph transformation and print the resulting document.
    Transform(TransformArgs),
    /// Classify a grid over free parameters by preferred alternative.
    Sweep(SweepArgs),
    /// Check substituted symbolic EUs against direct enumeration.
    OracleCheck(OracleArgs),
    /// Serve the model over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ModelArg {
    /// Model file, or `@ex1` / `@ex2` for the bundled fixtures.
    pub model: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub stage: usize,
    /// Use the additive factorization.
    #[arg(long)]
    pub additive: bool,
    /// Prune with the model's asymmetries.
    #[arg(long)]
    pub asymmetries: bool,
    #[arg(long, default_value_t = 4)]
    pub places: usize,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct StructureArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub additive: bool,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Reverse the arc between two chance nodes, by label.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub reverse: Option<Vec<usize>>,
    #[arg(long, value_name = "I")]
    pub remove_barren: Option<usize>,
    /// Drop node I from the parents of decision J.
    #[arg(long, num_args = 2, value_names = ["I", "J"])]
    pub sufficiency: Option<Vec<usize>>,
    #[arg(long)]
    pub to_extensive: bool,
    /// Step text such as `ReverseArc(2,3)`; may repeat.
    #[arg(long = "step")]
    pub steps: Vec<String>,
    /// Emit only the transformed diagram instead of the document with its log.
    #[arg(long)]
    pub diagram_only: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long)]
    pub spec: Option<String>,
    /// Decision node id, e.g. `Y4`.
    #[arg(long)]
    pub decision: String,
    /// Observed value such as `Y3=1`; may repeat.
    #[arg(long)]
    pub given: Vec<String>,
    /// Numeric value for a free parameter off the axes, e.g. `p5111=0.7`.
    #[arg(long)]
    pub fix: Vec<String>,
    /// `name=lo:hi:steps`; one or two.
    #[arg(long, required = true)]
    pub axis: Vec<String>,
    #[arg(long, default_value_t = 4)]
    pub places: usize,
    /// Write the region table to this file.
    #[arg(long)]
    pub emit_plot_data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArg,
    /// Spec to check; defaults to every named spec. Unset parameters get fixed
    /// deterministic values.
    #[arg(long)]
    pub spec: Option<String>,
    #[arg(long, default_value_t = 4096)]
    pub max_policies: u64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: IpAddr,
}

pub fn load_model(path: &Path) -> anyhow::Result<Model> {
    let text = match path.to_str() {
        Some("@ex1") => mideu::fixtures::EX1_JSON.to_string(),
        Some("@ex2") => mideu::fixtures::EX2_JSON.to_string(),
        _ => std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
    };
    parse_model(&text).map_err(|diags| {
        let lines: Vec<String> = diags.iter().map(|d| format!("  {d}")).collect();
        anyhow!("{} is not a valid model:\n{}", path.display(), lines.join("\n"))
    })
}

/// Runs a parsed command, writing its report to `out`. Returns the exit status.
pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<i32> {
    match cli.command {
        Command::Validate(a) => validate(&load_model(&a.model)?, out),
        Command::Evaluate(a) => evaluate(&a, out),
        Command::Structure(a) => structure(&a, out),
        Command::Transform(a) => transform(&a, out),
        Command::Sweep(a) => sweep(&a, out),
        Command::OracleCheck(a) => oracle_check(&load_model(&a.model.model)?, a.spec.as_deref(), a.max_policies, out),
        Command::Serve(a) => serve(&a, out),
    }
}

fn validate(model: &Model, out: &mut dyn Write) -> anyhow::Result<i32> {
    let s = api::summarize(model);
    writeln!(out, "OK")?;
    for w in &s.warnings {
        writeln!(out, "{w}")?;
    }
    writeln!(out, "decision sequence: {}", s.decision_sequence)?;
    writeln!(out, "J: {{{}}}", s.j.join(","))?;
    for (node, b) in &s.b_sets {
        writeln!(out, "B({node}): {{{}}}", b.join(","))?;
    }
    writeln!(out, "extensive form: {}", s.extensive)?;
    if !model.transform_log.is_empty() {
        let t = model.transformed()?;
        let steps: Vec<String> = model.transform_log.iter().map(|k| k.to_string()).collect();
        let ds = t.decision_sequence().map(|ds| t.format_ds(&ds))?;
        writeln!(out, "after {}: decision sequence {ds}, extensive form: {}", steps.join(", "), t.is_extensive_form())?;
    }
    writeln!(
        out,
        "parameters: {} probabilities, {} utilities, {} weights",
        s.probability_parameters, s.utility_parameters, s.weights
    )?;
    Ok(0)
}

fn evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let model = load_model(&a.model.model)?;
    let req = EvaluateRequest {
        policy: a.policy.clone(),
        spec_name: a.spec.clone(),
        spec: None,
        stage: Some(a.stage),
        asymmetries: a.asymmetries.then_some(AsymmetrySelection::Model(true)),
        additive: a.additive,
        places: Some(a.places),
    };
    let resp = api::evaluate(&model, &req)?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&resp)?)?;
        return Ok(0);
    }
    writeln!(out, "stage {} under policy {} over ({})", resp.stage, resp.policy, resp.scope.join(","))?;
    for e in &resp.entries {
        match (&e.rounded, &e.value) {
            (Some(r), Some(v)) => writeln!(out, "({}): {r}  exact {v}", e.label)?,
            _ => writeln!(out, "({}): {}", e.label, e.polynomial_text)?,
        }
    }
    Ok(0)
}

fn structure(a: &StructureArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let model = load_model(&a.model.model)?;
    let mid = if a.additive { model.mid.clone().with_interaction(Interaction::Additive) } else { model.mid.clone() };
    let trace = symbolic_eu(&mid, &Policy::constant(&mid, 0))?;
    let mut status = 0;
    for i in (1..=mid.n() + 1).rev() {
        let pred = predicted_structure(&mid, i, a.additive)?;
        let v = trace.stage(i).expect("full evaluation records every stage");
        let c = check_structure(v, &pred);
        let verdict = if c.passed() { "ok".to_string() } else { c.to_string() };
        writeln!(out, "stage {i}: {} entries, predicted {}  [{verdict}]", pred.dimension, pred.summary())?;
        if !c.passed() {
            status = 1;
        }
    }
    Ok(status)
}

fn requested_steps(a: &TransformArgs) -> anyhow::Result<Vec<StepKind>> {
    let mut steps = Vec::new();
    for s in &a.steps {
        steps.push(parse_step(s).ok_or_else(|| anyhow!("cannot read step {s:?}"))?);
    }
    if let Some(v) = &a.reverse {
        steps.push(StepKind::ReverseArc(v[0], v[1]));
    }
    if let Some(i) = a.remove_barren {
        steps.push(StepKind::RemoveBarren(i));
    }
    if let Some(v) = &a.sufficiency {
        steps.push(StepKind::Sufficiency(v[0], v[1]));
    }
    Ok(steps)
}

fn transform(a: &TransformArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let model = load_model(&a.model.model)?;
    let mut mid = model.transformed()?;
    let mut applied = Vec::new();
    let mut report = Vec::new();
    for step in requested_steps(a)? {
        let (next, bindings) = apply_step(&mid, step).with_context(|| format!("applying {step}"))?;
        report.push(format!("{step}"));
        report.extend(bindings.iter().map(|b| format!("  {b}")));
        applied.push(step);
        mid = next;
    }
    if a.to_extensive {
        let (next, log) = to_extensive_form(&mid)?;
        for s in &log.steps {
            report.push(format!("{}", s.kind));
            report.extend(s.bindings.iter().map(|b| format!("  {b}")));
            applied.push(s.kind);
        }
        mid = next;
    }
    if applied.is_empty() {
        bail!("no transformation requested");
    }
    let doc = if a.diagram_only {
        ModelDocument::from_mid(&mid)
    } else {
        let mut doc = model.document.clone();
        doc.transform_log.get_or_insert_with(Vec::new).extend(applied.iter().map(|s| s.to_string()));
        doc
    };
    let json = doc.to_json();
    match &a.out {
        Some(path) => {
            std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
            for line in &report {
                writeln!(out, "{line}")?;
            }
            writeln!(out, "wrote {}", path.display())?;
        }
        None => {
            writeln!(out, "{json}")?;
        }
    }
    Ok(0)
}

fn split_pair<'a>(text: &'a str, what: &str) -> anyhow::Result<(&'a str, &'a str)> {
    text.split_once('=').map(|(a, b)| (a.trim(), b.trim())).ok_or_else(|| anyhow!("{what} {text:?} is not name=value"))
}

pub fn parse_axis(text: &str) -> anyhow::Result<AxisDoc> {
    let (var, range) = split_pair(text, "axis")?;
    let parts: Vec<&str> = range.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        bail!("axis {text:?} is not name=lo:hi:steps");
    };
    Ok(AxisDoc {
        var: var.to_string(),
        lo: Value::String(lo.to_string()),
        hi: Value::String(hi.to_string()),
        steps: steps.parse().with_context(|| format!("axis {text:?}: steps"))?,
    })
}

fn sweep(a: &SweepArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let model = load_model(&a.model.model)?;
    let mut given = BTreeMap::new();
    for g in &a.given {
        let (n, v) = split_pair(g, "--given")?;
        if node_position(&model.mid, n).is_none() {
            bail!("unknown node {n}");
        }
        given.insert(n.to_string(), v.parse().with_context(|| format!("--given {g:?}"))?);
    }
    let mut fix = BTreeMap::new();
    for f in &a.fix {
        let (n, v) = split_pair(f, "--fix")?;
        fix.insert(n.to_string(), Value::String(v.to_string()));
    }
    let req = SweepRequest {
        alternatives: None,
        decision: Some(a.decision.clone()),
        given,
        policy: a.policy.clone(),
        spec_name: a.spec.clone(),
        spec: None,
        fix,
        axes: a.axis.iter().map(|s| parse_axis(s)).collect::<anyhow::Result<_>>()?,
        places: Some(a.places),
        crossings: false,
    };
    let resp = api::sweep(&model, &req)?;
    for (label, poly) in resp.labels.iter().zip(&resp.alternatives) {
        writeln!(out, "{label}: {poly}")?;
    }
    let counts: Vec<String> = resp.counts.iter().map(|(k, v)| format!("{k} {v}")).collect();
    writeln!(out, "cells: {}", counts.join(", "))?;
    match &a.emit_plot_data {
        Some(path) => {
            std::fs::write(path, &resp.table).with_context(|| format!("writing {}", path.display()))?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => write!(out, "{}", resp.table)?,
    }
    Ok(0)
}

/// Policies whose substituted symbolic EU differs from enumeration.
pub fn oracle_mismatches(
    model: &Model,
    symbolic_spec: &mideu::oracle::NumericSpec,
    oracle_spec: &mideu::oracle::NumericSpec,
    max_policies: u64,
) -> anyhow::Result<(usize, Vec<String>)> {
    let mid = &model.mid;
    let mut checked = 0;
    let mut bad = Vec::new();
    for policy in enumerate_policies(mid, max_policies)? {
        let trace = symbolic_eu(mid, &policy)?;
        let eu = trace.expected_utility().expect("full evaluation reaches the root");
        let a = eu.eval_map(&symbolic_spec.values)?;
        let b = joint_eu_numeric(mid, oracle_spec, &policy)?;
        if a != b {
            bad.push(format!("{}: symbolic {} vs oracle {}", policy.describe(mid), format_rational(&a), format_rational(&b)));
        }
        checked += 1;
    }
    Ok((checked, bad))
}

fn oracle_check(model: &Model, spec: Option<&str>, max_policies: u64, out: &mut dyn Write) -> anyhow::Result<i32> {
    let names: Vec<Option<String>> = match spec {
        Some(s) => vec![Some(s.to_string())],
        None if model.specs.is_empty() => vec![None],
        None => model.specs.keys().cloned().map(Some).collect(),
    };
    let mut status = 0;
    for name in names {
        let base = match &name {
            Some(n) => model.spec(n)?.to_numeric(&model.mid)?,
            None => mideu::oracle::NumericSpec::default(),
        };
        let (numeric, filled) = base.filled(&model.mid);
        let label = name.as_deref().unwrap_or("(none)");
        let (checked, bad) = oracle_mismatches(model, &numeric, &numeric, max_policies)?;
        for b in &bad {
            writeln!(out, "MISMATCH [{label}] {b}")?;
        }
        writeln!(out, "spec {label}: {} parameters filled, {checked} policies, {} mismatches", filled.len(), bad.len())?;
        if !bad.is_empty() {
            status = 1;
        }
    }
    Ok(status)
}

fn serve(a: &ServeArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    let model = load_model(&a.model.model)?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = crate::service::bind(SocketAddr::new(a.host, a.port)).await?;
        writeln!(out, "listening on http://{}", listener.local_addr()?)?;
        out.flush()?;
        crate::service::serve(model, listener).await?;
        anyhow::Ok(())
    })?;
    Ok(0)
}
