//! JSON request and response bodies plus the pure handlers behind them.

use std::collections::BTreeMap;

use mideu::asymmetry::{symbolic_eu_asymmetric_until, Asymmetry};
use mideu::eu::config_label;
use mideu::mid::Interaction;
use mideu::model::{node_position, parse_number, resolve_asymmetry, resolve_spec, AsymmetryDoc, DocDiagnostic, SpecDoc};
use mideu::rational::{format_decimal, format_rational};
use mideu::sensitivity::{
    admissible_grid, apply_spec, decision_alternatives, indifference_samples, preferred_action_table, Axis,
    Classification, RegionGrid, SubstitutionSpec,
};
use mideu::{symbolic_eu_until, Mid, Model, ModelDocument, Policy, Polynomial, Rational};
use serde::{Deserialize, Serialize};
use serde_json::Value;

const DEFAULT_PLACES: usize = 4;

/// A failed request: HTTP-like status, message and document diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub error: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<DocDiagnostic>,
}

impl ApiError {
    pub fn bad_request(msg: impl Into<String>) -> Self {
        ApiError { status: 400, error: msg.into(), diagnostics: Vec::new() }
    }

    pub fn not_found(msg: impl Into<String>) -> Self {
        ApiError { status: 404, error: msg.into(), diagnostics: Vec::new() }
    }

    fn invalid(diagnostics: Vec<DocDiagnostic>) -> Self {
        ApiError { status: 400, error: "invalid request".into(), diagnostics }
    }
}

impl From<mideu::Error> for ApiError {
    fn from(e: mideu::Error) -> Self {
        let status = if matches!(e, mideu::Error::Incomplete(_)) { 422 } else { 400 };
        ApiError { status, error: e.to_string(), diagnostics: Vec::new() }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)?;
        for d in &self.diagnostics {
            write!(f, "\n  {d}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ApiError {}

pub type ApiResult<T> = Result<T, ApiError>;

/// Which asymmetries to honour: the model's (`true`), none, or an inline list.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AsymmetrySelection {
    Model(bool),
    Inline(Vec<AsymmetryDoc>),
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct EvaluateRequest {
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub spec_name: Option<String>,
    #[serde(default)]
    pub spec: Option<SpecDoc>,
    #[serde(default)]
    pub stage: Option<usize>,
    #[serde(default)]
    pub asymmetries: Option<AsymmetrySelection>,
    #[serde(default)]
    pub additive: bool,
    #[serde(default)]
    pub places: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EntryOut {
    /// `(node, value)` pairs, highest label first.
    pub config: Vec<(String, usize)>,
    pub label: String,
    pub polynomial_text: String,
    pub monomials: usize,
    /// Exact text, present when the entry is numeric.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rounded: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EvaluateResponse {
    pub stage: usize,
    pub policy: String,
    pub scope: Vec<String>,
    pub entries: Vec<EntryOut>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PolicyTableRequest {
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub spec_name: Option<String>,
    #[serde(default)]
    pub spec: Option<SpecDoc>,
    pub decision: String,
    #[serde(default)]
    pub places: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionRowOut {
    pub observed: Vec<(String, usize)>,
    pub values: Vec<String>,
    pub rounded: Vec<String>,
    pub best: usize,
    pub best_label: String,
    pub best_value: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runner_up: Option<String>,
    pub margin: String,
    pub margin_rounded: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyTableResponse {
    pub decision: String,
    pub policy: String,
    pub rows: Vec<ActionRowOut>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlternativeDoc {
    pub label: String,
    pub polynomial: String,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisDoc {
    pub var: String,
    pub lo: Value,
    pub hi: Value,
    pub steps: usize,
}

/// Alternatives are given as polynomial text, or derived from a decision
/// with `decision`, `given`, `policy` and a spec.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepRequest {
    #[serde(default)]
    pub alternatives: Option<Vec<AlternativeDoc>>,
    #[serde(default)]
    pub decision: Option<String>,
    #[serde(default)]
    pub given: BTreeMap<String, usize>,
    #[serde(default)]
    pub policy: Option<String>,
    #[serde(default)]
    pub spec_name: Option<String>,
    #[serde(default)]
    pub spec: Option<SpecDoc>,
    /// Extra numeric values for free parameters off the axes.
    #[serde(default)]
    pub fix: BTreeMap<String, Value>,
    pub axes: Vec<AxisDoc>,
    #[serde(default)]
    pub places: Option<usize>,
    #[serde(default)]
    pub crossings: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CellOut {
    pub index: Vec<usize>,
    pub point: Vec<String>,
    pub values: Vec<String>,
    pub preferred: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossingOut {
    pub point: Vec<String>,
    pub axis: usize,
    pub degenerate: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResponse {
    pub axes: Vec<String>,
    pub labels: Vec<String>,
    pub alternatives: Vec<String>,
    pub cells: Vec<CellOut>,
    pub counts: BTreeMap<String, usize>,
    pub table: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossings: Option<Vec<CrossingOut>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ModelSummary {
    pub decision_sequence: String,
    pub j: Vec<String>,
    pub b_sets: BTreeMap<String, Vec<String>>,
    pub extensive: bool,
    pub probability_parameters: usize,
    pub utility_parameters: usize,
    pub weights: usize,
    pub specs: Vec<String>,
    pub policies: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelResponse {
    pub document: ModelDocument,
    pub summary: ModelSummary,
}

fn names(mid: &Mid, positions: &[usize]) -> Vec<String> {
    positions.iter().map(|&p| mid.name(p)).collect()
}

pub fn summarize(model: &Model) -> ModelSummary {
    let mid = &model.mid;
    let all = mid.all_indeterminates();
    let count = |f: fn(&mideu::Indeterminate) -> bool| all.iter().filter(|x| f(x)).count();
    ModelSummary {
        decision_sequence: mid.decision_sequence().map(|ds| mid.format_ds(&ds)).unwrap_or_default(),
        j: names(mid, &mid.comp_j()),
        b_sets: (1..=mid.n()).map(|i| (mid.name(i), names(mid, &mid.comp_b(i)))).collect(),
        extensive: mid.is_extensive_form(),
        probability_parameters: count(|x| x.is_probability()),
        utility_parameters: count(|x| matches!(x, mideu::Indeterminate::UtilParam { .. })),
        weights: count(|x| matches!(x, mideu::Indeterminate::Weight(_))),
        specs: model.specs.keys().cloned().collect(),
        policies: model.policies.keys().cloned().collect(),
        warnings: model.warnings.iter().map(|d| d.to_string()).collect(),
    }
}

pub fn model_response(model: &Model) -> ModelResponse {
    ModelResponse { document: model.document.clone(), summary: summarize(model) }
}

/// The named policy, or the first named one when `name` is absent.
pub fn select_policy<'m>(model: &'m Model, name: Option<&str>) -> ApiResult<(String, &'m Policy)> {
    match name {
        Some(n) => model
            .policies
            .get(n)
            .map(|p| (n.to_string(), p))
            .ok_or_else(|| ApiError::not_found(format!("no policy named {n:?}"))),
        None => model
            .policies
            .iter()
            .next()
            .map(|(n, p)| (n.clone(), p))
            .ok_or_else(|| ApiError::bad_request("the model has no policies; name one")),
    }
}

pub fn select_spec(model: &Model, name: Option<&str>, inline: Option<&SpecDoc>) -> ApiResult<SubstitutionSpec> {
    match (name, inline) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("give either specName or spec, not both")),
        (Some(n), None) => {
            model.specs.get(n).cloned().ok_or_else(|| ApiError::not_found(format!("no spec named {n:?}")))
        }
        (None, Some(doc)) => resolve_spec(&model.mid, doc, "spec").map_err(ApiError::invalid),
        (None, None) => Ok(SubstitutionSpec::default()),
    }
}

pub fn select_asymmetries(model: &Model, sel: Option<&AsymmetrySelection>) -> ApiResult<Vec<Asymmetry>> {
    match sel {
        None | Some(AsymmetrySelection::Model(false)) => Ok(Vec::new()),
        Some(AsymmetrySelection::Model(true)) => Ok(model.asymmetries.clone()),
        Some(AsymmetrySelection::Inline(docs)) => {
            let mut out = Vec::new();
            let mut diags = Vec::new();
            for (q, d) in docs.iter().enumerate() {
                match resolve_asymmetry(&model.mid, d, &format!("asymmetries[{q}]")) {
                    Ok(a) => out.push(a),
                    Err(d) => diags.extend(d),
                }
            }
            if diags.is_empty() {
                Ok(out)
            } else {
                Err(ApiError::invalid(diags))
            }
        }
    }
}

pub fn decision_position(mid: &Mid, id: &str) -> ApiResult<usize> {
    let p = node_position(mid, id).ok_or_else(|| ApiError::not_found(format!("unknown node {id}")))?;
    if !mid.is_decision(p) {
        return Err(ApiError::bad_request(format!("{id} is not a decision")));
    }
    Ok(p)
}

fn numeric_text(p: &Polynomial, places: usize) -> (Option<String>, Option<String>) {
    match p.as_constant() {
        Some(c) => (Some(format_rational(&c)), Some(format_decimal(&c, places))),
        None => (None, None),
    }
}

pub fn evaluate(model: &Model, req: &EvaluateRequest) -> ApiResult<EvaluateResponse> {
    let mid = if req.additive { model.mid.clone().with_interaction(Interaction::Additive) } else { model.mid.clone() };
    let (policy_name, policy) = select_policy(model, req.policy.as_deref())?;
    let spec = select_spec(model, req.spec_name.as_deref(), req.spec.as_ref())?;
    let asys = select_asymmetries(model, req.asymmetries.as_ref())?;
    let stage = req.stage.unwrap_or(1);
    if stage == 0 || stage > mid.n() + 1 {
        return Err(ApiError::bad_request(format!("stage must lie in 1..={}", mid.n() + 1)));
    }
    let trace = if asys.is_empty() {
        symbolic_eu_until(&mid, policy, stage)?
    } else {
        symbolic_eu_asymmetric_until(&mid, policy, &asys, stage)?
    };
    let v = apply_spec(&mid, trace.stage(stage).expect("evaluation stops at the requested stage"), &spec)?;
    let places = req.places.unwrap_or(DEFAULT_PLACES);
    let entries = v
        .configs(&mid)
        .iter()
        .zip(&v.entries)
        .map(|(vals, p)| {
            let (value, rounded) = numeric_text(p, places);
            EntryOut {
                config: v.scope.iter().zip(vals).rev().map(|(&q, &x)| (mid.name(q), x)).collect(),
                label: config_label(&mid, &v.scope, vals),
                polynomial_text: p.to_string(),
                monomials: p.len(),
                value,
                rounded,
            }
        })
        .collect();
    Ok(EvaluateResponse { stage, policy: policy_name, scope: names(&mid, &v.scope), entries })
}

pub fn policy_table(model: &Model, req: &PolicyTableRequest) -> ApiResult<PolicyTableResponse> {
    let mid = &model.mid;
    let d = decision_position(mid, &req.decision)?;
    let (policy_name, policy) = select_policy(model, req.policy.as_deref())?;
    let spec = select_spec(model, req.spec_name.as_deref(), req.spec.as_ref())?;
    let places = req.places.unwrap_or(DEFAULT_PLACES);
    let rows = preferred_action_table(mid, &spec, policy, d)?
        .into_iter()
        .map(|r| ActionRowOut {
            observed: r.observed.iter().map(|&(l, v)| (format!("Y{l}"), v)).collect(),
            values: r.values.iter().map(format_rational).collect(),
            rounded: r.values.iter().map(|v| format_decimal(v, places)).collect(),
            best: r.best,
            best_label: format!("{}={}", req.decision, r.best),
            best_value: format_rational(&r.best_value),
            runner_up: r.runner_up.as_ref().map(format_rational),
            margin: format_rational(&r.margin),
            margin_rounded: format_decimal(&r.margin, places),
        })
        .collect();
    Ok(PolicyTableResponse { decision: req.decision.clone(), policy: policy_name, rows })
}

fn lookup(mid: &Mid, name: &str) -> ApiResult<mideu::Indeterminate> {
    mid.name_table().get(name).cloned().ok_or_else(|| ApiError::bad_request(format!("unknown parameter {name}")))
}

/// Alternatives of a sweep request, before the `fix` values are applied.
pub fn sweep_alternatives(model: &Model, req: &SweepRequest) -> ApiResult<Vec<(String, Polynomial)>> {
    let mid = &model.mid;
    match (&req.alternatives, &req.decision) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("give either alternatives or decision, not both")),
        (None, None) => Err(ApiError::bad_request("give alternatives or a decision")),
        (Some(alts), None) => {
            let table = mid.name_table();
            alts.iter()
                .map(|a| {
                    mideu::expr::parse_polynomial(&a.polynomial, &|s| table.get(s).cloned())
                        .map(|p| (a.label.clone(), p))
                        .map_err(|e| ApiError::bad_request(format!("alternative {:?}: {e}", a.label)))
                })
                .collect()
        }
        (None, Some(id)) => {
            let d = decision_position(mid, id)?;
            let (_, policy) = select_policy(model, req.policy.as_deref())?;
            let spec = select_spec(model, req.spec_name.as_deref(), req.spec.as_ref())?;
            let observed = req
                .given
                .iter()
                .map(|(n, &v)| {
                    node_position(mid, n)
                        .map(|p| (mid.label(p), v))
                        .ok_or_else(|| ApiError::bad_request(format!("unknown node {n}")))
                })
                .collect::<ApiResult<Vec<_>>>()?;
            Ok(decision_alternatives(mid, &spec, policy, d, &observed)?)
        }
    }
}

pub fn sweep(model: &Model, req: &SweepRequest) -> ApiResult<SweepResponse> {
    let mid = &model.mid;
    let mut alts = sweep_alternatives(model, req)?;
    if !req.fix.is_empty() {
        let mut fix = BTreeMap::new();
        for (n, v) in &req.fix {
            let r = parse_number(v).map_err(|e| ApiError::bad_request(format!("fix.{n}: {e}")))?;
            fix.insert(lookup(mid, n)?, Polynomial::constant(r));
        }
        for a in &mut alts {
            a.1 = a.1.substitute(&fix)?;
        }
    }
    let axes = req
        .axes
        .iter()
        .map(|a| {
            let num = |v: &Value, f: &str| {
                parse_number(v).map_err(|e| ApiError::bad_request(format!("axis {}: {f}: {e}", a.var)))
            };
            Ok(Axis { var: lookup(mid, &a.var)?, lo: num(&a.lo, "lo")?, hi: num(&a.hi, "hi")?, steps: a.steps })
        })
        .collect::<ApiResult<Vec<_>>>()?;
    let grid = admissible_grid(&alts, &axes)?;
    let places = req.places.unwrap_or(DEFAULT_PLACES);
    let crossings = if req.crossings && alts.len() == 2 {
        let diff = &alts[0].1 - &alts[1].1;
        Some(
            indifference_samples(&diff, &axes)?
                .into_iter()
                .map(|c| CrossingOut {
                    point: c.point.iter().map(|v| format_decimal(v, places)).collect(),
                    axis: c.axis,
                    degenerate: c.degenerate,
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(sweep_response(&grid, &alts, places, crossings))
}

fn class_label(grid: &RegionGrid, c: &Classification) -> String {
    match c {
        Classification::Best(k) => grid.labels[*k].clone(),
        Classification::Indifferent => "indifferent".into(),
    }
}

fn sweep_response(
    grid: &RegionGrid,
    alts: &[(String, Polynomial)],
    places: usize,
    crossings: Option<Vec<CrossingOut>>,
) -> SweepResponse {
    let mut counts = BTreeMap::new();
    let cells = grid
        .cells
        .iter()
        .map(|c| {
            let preferred = class_label(grid, &c.class);
            *counts.entry(preferred.clone()).or_insert(0) += 1;
            CellOut {
                index: c.index.clone(),
                point: c.point.iter().map(|v: &Rational| format_decimal(v, places)).collect(),
                values: c.values.iter().map(|v| format_decimal(v, places)).collect(),
                preferred,
            }
        })
        .collect();
    SweepResponse {
        axes: grid.axes.iter().map(|a| a.var.to_string()).collect(),
        labels: grid.labels.clone(),
        alternatives: alts.iter().map(|a| a.1.to_string()).collect(),
        cells,
        counts,
        table: grid.to_table(places),
        crossings,
    }
}
