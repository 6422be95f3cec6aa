//! JSON model documents: diagram, weights, named specs, asymmetries and policies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::asymmetry::{Asymmetry, Relation};
use crate::config;
use crate::error::Result;
use crate::expr::parse_polynomial;
use crate::mid::{solve_h, Interaction, Mid, Node, NodeKind, Severity, UtilityNode, Weight, Weights};
use crate::poly::Indeterminate;
use crate::policy::{DecisionRule, Policy};
use crate::rational::{format_rational, parse_rational, Rational};
use crate::sensitivity::SubstitutionSpec;
use crate::transforms::StepKind;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ModelDocument {
    pub diagram: DiagramDoc,
    #[serde(default)]
    pub weights: WeightsDoc,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub specs: BTreeMap<String, SpecDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub asymmetries: Vec<AsymmetryDoc>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub policies: BTreeMap<String, PolicyDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform_log: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramDoc {
    pub nodes: Vec<NodeDoc>,
    pub utilities: Vec<UtilityDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: String,
    pub kind: NodeKind,
    pub card: usize,
    #[serde(default)]
    pub parents: Vec<String>,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub gen: u32,
}

fn is_zero(g: &u32) -> bool {
    *g == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilityDoc {
    pub id: String,
    pub parents: Vec<String>,
}

/// `k` is `"symbolic"` or a list of numbers; `h` is `"symbolic"`, `"additive"`,
/// `"solve"` or a number.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsDoc {
    #[serde(default = "symbolic")]
    pub k: Value,
    #[serde(default = "symbolic")]
    pub h: Value,
}

fn symbolic() -> Value {
    Value::String("symbolic".into())
}

impl Default for WeightsDoc {
    fn default() -> Self {
        WeightsDoc { k: symbolic(), h: symbolic() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDoc {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub numeric: BTreeMap<String, Value>,
    /// Target name -> expression text.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub relations: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub free: Vec<String>,
}

/// `{"if": [["Y4", 1]], "then": ["Y6", "=", 1]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymmetryDoc {
    #[serde(rename = "if")]
    pub when: Vec<(String, usize)>,
    pub then: (String, String, usize),
}

/// Decision id -> rule.
pub type PolicyDoc = BTreeMap<String, RuleDoc>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cases: Vec<CaseDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<usize>,
    /// Actions in configuration order of the decision's domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseDoc {
    pub when: Vec<(String, usize)>,
    pub action: usize,
}

/// A problem found while loading, with the field it refers to.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DocDiagnostic {
    pub location: String,
    pub severity: Severity,
    pub message: String,
}

impl DocDiagnostic {
    pub fn error(location: impl Into<String>, message: impl Into<String>) -> Self {
        DocDiagnostic { location: location.into(), severity: Severity::Error, message: message.into() }
    }
}

impl fmt::Display for DocDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = if self.severity == Severity::Error { "error" } else { "warning" };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

/// A loaded and validated document.
#[derive(Clone, Debug)]
pub struct Model {
    pub document: ModelDocument,
    pub mid: Mid,
    pub specs: BTreeMap<String, SubstitutionSpec>,
    pub policies: BTreeMap<String, Policy>,
    pub asymmetries: Vec<Asymmetry>,
    pub transform_log: Vec<StepKind>,
    pub warnings: Vec<DocDiagnostic>,
}

/// Position of the node named `Y<label>`.
pub fn node_position(mid: &Mid, id: &str) -> Option<usize> {
    label_of(id, 'Y').and_then(|l| mid.position_of(l))
}

/// A number given as a JSON number or a decimal/fraction string.
pub fn parse_number(v: &Value) -> std::result::Result<Rational, String> {
    let text = value_text(v).ok_or_else(|| "expected a number".to_string())?;
    parse_rational(&text).map_err(|e| e.to_string())
}

fn label_of(id: &str, prefix: char) -> Option<usize> {
    let rest = id.strip_prefix(prefix)?;
    if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    rest.parse().ok().filter(|&l| l > 0)
}

/// Text of a number given either as a JSON number or a string.
fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::Number(n) => Some(n.to_string()),
        Value::String(s) => Some(s.clone()),
        _ => None,
    }
}

fn parse_value(v: &Value, loc: &str, diags: &mut Vec<DocDiagnostic>) -> Option<Rational> {
    match value_text(v).map(|t| parse_rational(&t)) {
        Some(Ok(r)) => Some(r),
        Some(Err(e)) => {
            diags.push(DocDiagnostic::error(loc, e.to_string()));
            None
        }
        None => {
            diags.push(DocDiagnostic::error(loc, "expected a number"));
            None
        }
    }
}

/// Reads `ReverseArc(2,3)`, `RemoveBarren(2)` or `Sufficiency(2,4)`.
pub fn parse_step(text: &str) -> Option<StepKind> {
    let (name, rest) = text.trim().split_once('(')?;
    let args: Vec<usize> = rest
        .strip_suffix(')')?
        .split(',')
        .map(|a| a.trim().trim_start_matches('Y').parse().ok())
        .collect::<Option<_>>()?;
    match (name.trim(), args.as_slice()) {
        ("ReverseArc", [i, j]) => Some(StepKind::ReverseArc(*i, *j)),
        ("RemoveBarren", [i]) => Some(StepKind::RemoveBarren(*i)),
        ("Sufficiency", [i, j]) => Some(StepKind::Sufficiency(*i, *j)),
        _ => None,
    }
}

fn build_mid(doc: &ModelDocument, diags: &mut Vec<DocDiagnostic>) -> Option<Mid> {
    let start = diags.len();
    let mut pos_of: BTreeMap<&str, usize> = BTreeMap::new();
    let mut nodes = Vec::new();
    for (k, nd) in doc.diagram.nodes.iter().enumerate() {
        let loc = format!("diagram.nodes[{k}]");
        let Some(label) = label_of(&nd.id, 'Y') else {
            diags.push(DocDiagnostic::error(format!("{loc}.id"), format!("node id {:?} is not of the form Y<number>", nd.id)));
            continue;
        };
        if pos_of.insert(nd.id.as_str(), k + 1).is_some() {
            diags.push(DocDiagnostic::error(format!("{loc}.id"), format!("duplicate node id {}", nd.id)));
        }
        if nd.card == 0 {
            diags.push(DocDiagnostic::error(format!("{loc}.card"), format!("{} has cardinality 0", nd.id)));
        }
        let mut parents = Vec::new();
        for (q, pid) in nd.parents.iter().enumerate() {
            let ploc = format!("{loc}.parents[{q}]");
            match doc.diagram.nodes.iter().position(|o| &o.id == pid) {
                None => diags.push(DocDiagnostic::error(ploc, format!("unknown parent {pid}"))),
                Some(p) if p >= k => diags.push(DocDiagnostic::error(
                    ploc,
                    format!("edge {pid} -> {}: parent does not precede its child", nd.id),
                )),
                Some(p) if parents.contains(&(p + 1)) => {
                    diags.push(DocDiagnostic::error(ploc, format!("parent {pid} listed twice")))
                }
                Some(p) => parents.push(p + 1),
            }
        }
        parents.sort_unstable();
        nodes.push(Node { label, kind: nd.kind, card: nd.card, parents, gen: nd.gen });
    }
    let mut utilities = Vec::new();
    let mut seen = BTreeSet::new();
    for (j, ud) in doc.diagram.utilities.iter().enumerate() {
        let loc = format!("diagram.utilities[{j}]");
        let Some(label) = label_of(&ud.id, 'U') else {
            diags.push(DocDiagnostic::error(format!("{loc}.id"), format!("utility id {:?} is not of the form U<number>", ud.id)));
            continue;
        };
        if !seen.insert(label) {
            diags.push(DocDiagnostic::error(format!("{loc}.id"), format!("duplicate utility id {}", ud.id)));
        }
        let mut parents = Vec::new();
        for (q, pid) in ud.parents.iter().enumerate() {
            match pos_of.get(pid.as_str()) {
                Some(&p) if !parents.contains(&p) => parents.push(p),
                Some(_) => diags.push(DocDiagnostic::error(format!("{loc}.parents[{q}]"), format!("parent {pid} listed twice"))),
                None => diags.push(DocDiagnostic::error(format!("{loc}.parents[{q}]"), format!("unknown node {pid}"))),
            }
        }
        parents.sort_unstable();
        utilities.push(UtilityNode { label, parents });
    }
    let m = utilities.len();
    let k = match &doc.weights.k {
        Value::String(s) if s == "symbolic" => vec![Weight::Symbolic; m],
        Value::Array(items) => {
            if items.len() != m {
                diags.push(DocDiagnostic::error("weights.k", format!("{} weights for {m} utilities", items.len())));
            }
            items
                .iter()
                .enumerate()
                .map(|(q, v)| match v {
                    Value::String(s) if s == "symbolic" => Weight::Symbolic,
                    _ => parse_value(v, &format!("weights.k[{q}]"), diags).map_or(Weight::Symbolic, Weight::Numeric),
                })
                .collect()
        }
        _ => {
            diags.push(DocDiagnostic::error("weights.k", "expected \"symbolic\" or a list of numbers"));
            vec![Weight::Symbolic; m]
        }
    };
    let h = match &doc.weights.h {
        Value::String(s) if s == "symbolic" => Interaction::Symbolic,
        Value::String(s) if s == "additive" => Interaction::Additive,
        Value::String(s) if s == "solve" => {
            let nums: Option<Vec<Rational>> = k
                .iter()
                .map(|w| match w {
                    Weight::Numeric(v) => Some(v.clone()),
                    Weight::Symbolic => None,
                })
                .collect();
            match nums.map(|ks| solve_h(&ks, 1e-12)) {
                None => {
                    diags.push(DocDiagnostic::error("weights.h", "\"solve\" needs numeric weights"));
                    Interaction::Symbolic
                }
                Some(Err(e)) => {
                    diags.push(DocDiagnostic::error("weights.h", e.to_string()));
                    Interaction::Symbolic
                }
                Some(Ok(sol)) if sol.additive => Interaction::Additive,
                Some(Ok(sol)) => Interaction::Numeric(sol.h),
            }
        }
        v => parse_value(v, "weights.h", diags).map_or(Interaction::Symbolic, Interaction::Numeric),
    };
    if diags.len() > start {
        return None;
    }
    let mid = Mid { nodes, utilities, weights: Weights { k, h } };
    let mut fatal = false;
    for d in mid.validate() {
        fatal |= d.severity == Severity::Error;
        diags.push(DocDiagnostic { location: "diagram".into(), severity: d.severity, message: d.message });
    }
    if let Err(e) = mid.decision_sequence() {
        fatal = true;
        diags.push(DocDiagnostic::error("diagram.utilities", e.to_string()));
    }
    (!fatal).then_some(mid)
}

/// Resolves a spec against the names of `mid`.
pub fn resolve_spec(mid: &Mid, doc: &SpecDoc, loc: &str) -> std::result::Result<SubstitutionSpec, Vec<DocDiagnostic>> {
    let table = mid.name_table();
    let lookup = |s: &str| table.get(s).cloned();
    let mut diags = Vec::new();
    let mut spec = SubstitutionSpec::default();
    let name = |n: &str, at: String, diags: &mut Vec<DocDiagnostic>| -> Option<Indeterminate> {
        let x = lookup(n);
        if x.is_none() {
            diags.push(DocDiagnostic::error(at, format!("unknown parameter {n}")));
        }
        x
    };
    for (n, v) in &doc.numeric {
        let at = format!("{loc}.numeric.{n}");
        if let (Some(x), Some(r)) = (name(n, at.clone(), &mut diags), parse_value(v, &at, &mut diags)) {
            let unit = !matches!(x, Indeterminate::Interaction);
            if unit && (r < Rational::from_integer(0.into()) || r > Rational::from_integer(1.into())) {
                diags.push(DocDiagnostic::error(at, format!("{n} must lie in [0, 1]")));
                continue;
            }
            spec.numeric.insert(x, r);
        }
    }
    for (n, text) in &doc.relations {
        let at = format!("{loc}.relations.{n}");
        let Some(x) = name(n, at.clone(), &mut diags) else { continue };
        match parse_polynomial(text, &lookup) {
            Ok(p) => {
                if spec.numeric.contains_key(&x) {
                    diags.push(DocDiagnostic::error(at, format!("{n} is both numeric and related")));
                } else {
                    spec.relations.insert(x, p);
                }
            }
            Err(e) => diags.push(DocDiagnostic::error(at, e.to_string())),
        }
    }
    for (q, n) in doc.free.iter().enumerate() {
        let at = format!("{loc}.free[{q}]");
        if let Some(x) = name(n, at.clone(), &mut diags) {
            if spec.numeric.contains_key(&x) || spec.relations.contains_key(&x) {
                diags.push(DocDiagnostic::error(at, format!("{n} is declared free and also bound")));
            } else {
                spec.free.insert(x);
            }
        }
    }
    if diags.is_empty() {
        if let Err(e) = spec.bindings(mid) {
            diags.push(DocDiagnostic::error(loc, e.to_string()));
        }
    }
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(diags)
    }
}

fn node_value(mid: &Mid, id: &str, value: usize, at: &str, diags: &mut Vec<DocDiagnostic>) -> Option<(usize, usize)> {
    let Some(label) = label_of(id, 'Y') else {
        diags.push(DocDiagnostic::error(at, format!("{id:?} is not a node id")));
        return None;
    };
    let Some(pos) = mid.position_of(label) else {
        diags.push(DocDiagnostic::error(at, format!("unknown node {id}")));
        return None;
    };
    if value >= mid.card(pos) {
        diags.push(DocDiagnostic::error(at, format!("value {value} out of range for {id}")));
        return None;
    }
    Some((label, value))
}

pub fn resolve_asymmetry(mid: &Mid, doc: &AsymmetryDoc, loc: &str) -> std::result::Result<Asymmetry, Vec<DocDiagnostic>> {
    let mut diags = Vec::new();
    let ante: Vec<Option<(usize, usize)>> = doc
        .when
        .iter()
        .enumerate()
        .map(|(q, (id, v))| node_value(mid, id, *v, &format!("{loc}.if[{q}]"), &mut diags))
        .collect();
    let (id, op, v) = &doc.then;
    let rel = match op.as_str() {
        "=" | "==" => Some(Relation::MustEqual),
        "!=" | "≠" => Some(Relation::MustNotEqual),
        _ => {
            diags.push(DocDiagnostic::error(format!("{loc}.then"), format!("unknown relation {op:?}")));
            None
        }
    };
    let cons = node_value(mid, id, *v, &format!("{loc}.then"), &mut diags);
    if !diags.is_empty() {
        return Err(diags);
    }
    let ante: Vec<(usize, usize)> = ante.into_iter().flatten().collect();
    let (var, value) = cons.expect("checked above");
    let asy = Asymmetry::new(ante, var, rel.expect("checked above"), value);
    asy.validate(mid).map_err(|e| vec![DocDiagnostic::error(loc, e.to_string())])?;
    Ok(asy)
}

pub fn resolve_policy(mid: &Mid, doc: &PolicyDoc, loc: &str) -> std::result::Result<Policy, Vec<DocDiagnostic>> {
    let mut diags = Vec::new();
    let mut policy = Policy::default();
    for (id, rule) in doc {
        let at = format!("{loc}.{id}");
        let pos = label_of(id, 'Y').and_then(|l| mid.position_of(l));
        let Some(d) = pos.filter(|&p| mid.is_decision(p)) else {
            diags.push(DocDiagnostic::error(at, format!("{id} is not a decision")));
            continue;
        };
        let domain = mid.comp_b(d);
        let cards = mid.cards(&domain);
        let r = mid.card(d);
        let actions: Vec<Option<usize>> = if let Some(table) = &rule.table {
            if table.len() != config::size(&cards) {
                diags.push(DocDiagnostic::error(
                    format!("{at}.table"),
                    format!("{} actions for {} configurations", table.len(), config::size(&cards)),
                ));
                continue;
            }
            table.iter().map(|&a| Some(a)).collect()
        } else {
            let mut cases = Vec::new();
            for (c, case) in rule.cases.iter().enumerate() {
                let mut cond = Vec::new();
                for (q, (nid, v)) in case.when.iter().enumerate() {
                    let cat = format!("{at}.cases[{c}].when[{q}]");
                    if let Some((label, v)) = node_value(mid, nid, *v, &cat, &mut diags) {
                        match domain.iter().position(|&p| mid.label(p) == label) {
                            Some(slot) => cond.push((slot, v)),
                            None => diags.push(DocDiagnostic::error(cat, format!("{id} does not observe {nid}"))),
                        }
                    }
                }
                cases.push((cond, case.action));
            }
            config::all(&cards)
                .iter()
                .map(|vals| {
                    cases
                        .iter()
                        .find(|(cond, _)| cond.iter().all(|&(s, v)| vals[s] == v))
                        .map(|c| c.1)
                        .or(rule.default)
                })
                .collect()
        };
        if actions.iter().any(|a| a.is_none()) {
            diags.push(DocDiagnostic::error(at, format!("rule for {id} is not total; add a default")));
            continue;
        }
        let actions: Vec<usize> = actions.into_iter().flatten().collect();
        if let Some(bad) = actions.iter().find(|&&a| a >= r) {
            diags.push(DocDiagnostic::error(at, format!("action {bad} out of range for {id}")));
            continue;
        }
        policy.rules.insert(d, DecisionRule { domain, actions });
    }
    if diags.is_empty() {
        if let Err(e) = policy.check(mid, 1) {
            diags.push(DocDiagnostic::error(loc, e.to_string()));
        }
    }
    if diags.is_empty() {
        Ok(policy)
    } else {
        Err(diags)
    }
}

/// Parses and validates a document. Errors are never repaired.
pub fn parse_model(text: &str) -> std::result::Result<Model, Vec<DocDiagnostic>> {
    let document: ModelDocument = serde_json::from_str(text).map_err(|e| {
        vec![DocDiagnostic::error(format!("line {} column {}", e.line(), e.column()), e.to_string())]
    })?;
    Model::from_document(document)
}

impl Model {
    pub fn from_document(document: ModelDocument) -> std::result::Result<Model, Vec<DocDiagnostic>> {
        let mut diags = Vec::new();
        let Some(mid) = build_mid(&document, &mut diags) else {
            return Err(diags);
        };
        let warnings = diags;
        let mut diags = Vec::new();
        let mut specs = BTreeMap::new();
        for (name, s) in &document.specs {
            match resolve_spec(&mid, s, &format!("specs.{name}")) {
                Ok(spec) => {
                    specs.insert(name.clone(), spec);
                }
                Err(d) => diags.extend(d),
            }
        }
        let mut asymmetries = Vec::new();
        for (q, a) in document.asymmetries.iter().enumerate() {
            match resolve_asymmetry(&mid, a, &format!("asymmetries[{q}]")) {
                Ok(a) => asymmetries.push(a),
                Err(d) => diags.extend(d),
            }
        }
        let mut policies = BTreeMap::new();
        for (name, p) in &document.policies {
            match resolve_policy(&mid, p, &format!("policies.{name}")) {
                Ok(p) => {
                    policies.insert(name.clone(), p);
                }
                Err(d) => diags.extend(d),
            }
        }
        let mut transform_log = Vec::new();
        for (q, s) in document.transform_log.iter().flatten().enumerate() {
            match parse_step(s) {
                Some(k) => transform_log.push(k),
                None => diags.push(DocDiagnostic::error(format!("transformLog[{q}]"), format!("cannot read step {s:?}"))),
            }
        }
        if !diags.is_empty() {
            return Err(diags);
        }
        Ok(Model { document, mid, specs, policies, asymmetries, transform_log, warnings })
    }

    pub fn spec(&self, name: &str) -> Result<&SubstitutionSpec> {
        self.specs.get(name).ok_or_else(|| crate::Error::Invalid(format!("no spec named {name:?}")))
    }

    pub fn policy(&self, name: &str) -> Result<&Policy> {
        self.policies.get(name).ok_or_else(|| crate::Error::Policy(format!("no policy named {name:?}")))
    }

    /// The diagram after replaying the transform log.
    pub fn transformed(&self) -> Result<Mid> {
        let mut cur = self.mid.clone();
        for &k in &self.transform_log {
            cur = crate::transforms::apply_step(&cur, k)?.0;
        }
        Ok(cur)
    }
}

impl ModelDocument {
    /// Document for a bare diagram, without specs or policies.
    pub fn from_mid(mid: &Mid) -> ModelDocument {
        let nodes = mid
            .nodes
            .iter()
            .map(|n| NodeDoc {
                id: format!("Y{}", n.label),
                kind: n.kind,
                card: n.card,
                parents: n.parents.iter().map(|&p| mid.name(p)).collect(),
                gen: n.gen,
            })
            .collect();
        let utilities = mid
            .utilities
            .iter()
            .map(|u| UtilityDoc { id: format!("U{}", u.label), parents: u.parents.iter().map(|&p| mid.name(p)).collect() })
            .collect();
        let num = |r: &Rational| Value::String(format_rational(r));
        let k = if mid.weights.k.iter().all(|w| *w == Weight::Symbolic) {
            symbolic()
        } else {
            Value::Array(
                mid.weights
                    .k
                    .iter()
                    .map(|w| match w {
                        Weight::Symbolic => symbolic(),
                        Weight::Numeric(r) => num(r),
                    })
                    .collect(),
            )
        };
        let h = match &mid.weights.h {
            Interaction::Symbolic => symbolic(),
            Interaction::Additive => Value::String("additive".into()),
            Interaction::Numeric(r) => num(r),
        };
        ModelDocument {
            diagram: DiagramDoc { nodes, utilities },
            weights: WeightsDoc { k, h },
            specs: BTreeMap::new(),
            asymmetries: Vec::new(),
            policies: BTreeMap::new(),
            transform_log: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("documents always serialize")
    }
}
