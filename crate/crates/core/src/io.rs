//! Model-class files, schema `decdim/v1`.
//!
//! ```json
//! { "version": "decdim/v1",
//!   "decisions": ["a", "b"],
//!   "observations": ["o0", "o1"] | "gaussian" | {"contexts": ["c0", "c1"]},
//!   "reward": [0.0, 1.0],
//!   "risk_mode": "reward-max" | "explicit-risk" | "estimation",
//!   "distance": [[0, 1], [1, 0]],
//!   "lipschitz_lr": 1.2,
//!   "models": [{"name": "m0", "channel": {"a": [0.5, 0.5], "b": [1, 0]},
//!               "value": [..], "risk": [..]}],
//!   "reference": {"channel": {..}, "c_kl": 0.69} }
//! ```
//!
//! A channel maps each decision to a probability vector (finite observations), a mean
//! (Gaussian), or a list of `[weight, mean]` pairs (Gaussian mixture). Contextual
//! channels are `{"context_distribution": [..], "means": {decision: [mean per context]}}`.
//! Reals are written with shortest round-trip formatting, so save/load is exact.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::distribution::FiniteDistribution;
use crate::error::{Error, Result};
use crate::model::{Channel, Model, ModelClass, ObservationSpace, ReferenceModel, RiskMode};

pub const SCHEMA_VERSION: &str = "decdim/v1";

/// Row-sum tolerance accepted at load.
pub const LOAD_ROW_TOL: f64 = 1e-9;

#[derive(Serialize, Deserialize)]
struct ModelEntry {
    name: String,
    channel: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    risk: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ReferenceEntry {
    channel: Value,
    c_kl: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassFile {
    version: String,
    decisions: Vec<String>,
    observations: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward: Option<Vec<f64>>,
    risk_mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lipschitz_lr: Option<f64>,
    models: Vec<ModelEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reference: Option<ReferenceEntry>,
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn parse_row(v: &Value, what: &str) -> Result<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| schema(format!("{what}: expected an array")))?;
    arr.iter()
        .map(|x| x.as_f64().ok_or_else(|| schema(format!("{what}: expected numbers"))))
        .collect()
}

fn parse_distribution(v: &Value, what: &str) -> Result<FiniteDistribution> {
    let mut row = parse_row(v, what)?;
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > LOAD_ROW_TOL {
        return Err(schema(format!("{what}: probabilities sum to {s}")));
    }
    if (s - 1.0).abs() > 1e-12 {
        for x in &mut row {
            *x /= s;
        }
    }
    FiniteDistribution::new(row).map_err(|e| schema(format!("{what}: {e}")))
}

fn parse_channel(v: &Value, decisions: &[String], space: &ObservationSpace, owner: &str) -> Result<Channel> {
    let obj = v.as_object().ok_or_else(|| schema(format!("{owner}: channel must be an object")))?;
    let entry = |d: &str| obj.get(d).ok_or_else(|| schema(format!("{owner}: channel lacks decision '{d}'")));
    match space {
        ObservationSpace::Finite(_) => {
            let rows = decisions
                .iter()
                .enumerate()
                .map(|(i, d)| parse_distribution(entry(d)?, &format!("{owner}: row {i} ({d})")))
                .collect::<Result<Vec<_>>>()?;
            Ok(Channel::Finite(rows))
        }
        ObservationSpace::Gaussian => {
            let first = entry(&decisions[0])?;
            if first.is_array() {
                let comps = decisions
                    .iter()
                    .map(|d| {
                        let arr = entry(d)?.as_array().ok_or_else(|| schema(format!("{owner}: mixture at '{d}'")))?;
                        arr.iter()
                            .map(|pair| {
                                let p = parse_row(pair, owner)?;
                                if p.len() != 2 {
                                    return Err(schema(format!("{owner}: mixture components are [weight, mean]")));
                                }
                                Ok((p[0], p[1]))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Channel::GaussianMixture(comps))
            } else {
                let means = decisions
                    .iter()
                    .map(|d| entry(d)?.as_f64().ok_or_else(|| schema(format!("{owner}: mean at '{d}'"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Channel::Gaussian(means))
            }
        }
        ObservationSpace::Contexts(_) => {
            let nu = parse_distribution(
                obj.get("context_distribution").ok_or_else(|| schema(format!("{owner}: missing context_distribution")))?,
                &format!("{owner}: context distribution"),
            )?;
            let means_obj = obj
                .get("means")
                .and_then(Value::as_object)
                .ok_or_else(|| schema(format!("{owner}: missing means")))?;
            let means = decisions
                .iter()
                .map(|d| parse_row(means_obj.get(d).ok_or_else(|| schema(format!("{owner}: means lack '{d}'")))?, owner))
                .collect::<Result<Vec<_>>>()?;
            Ok(Channel::ContextGaussian { nu, means })
        }
    }
}

fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn row_value(row: &[f64]) -> Value {
    Value::Array(row.iter().map(|&x| num(x)).collect())
}

fn channel_value(ch: &Channel, decisions: &[String]) -> Value {
    let mut map = Map::new();
    match ch {
        Channel::Finite(rows) => {
            for (d, r) in decisions.iter().zip(rows) {
                map.insert(d.clone(), row_value(r.weights()));
            }
        }
        Channel::Gaussian(means) => {
            for (d, &m) in decisions.iter().zip(means) {
                map.insert(d.clone(), num(m));
            }
        }
        Channel::GaussianMixture(comps) => {
            for (d, c) in decisions.iter().zip(comps) {
                map.insert(d.clone(), Value::Array(c.iter().map(|&(w, m)| row_value(&[w, m])).collect()));
            }
        }
        Channel::ContextGaussian { nu, means } => {
            map.insert("context_distribution".into(), row_value(nu.weights()));
            let mut m = Map::new();
            for (d, r) in decisions.iter().zip(means) {
                m.insert(d.clone(), row_value(r));
            }
            map.insert("means".into(), Value::Object(m));
        }
    }
    Value::Object(map)
}

/// Parses a class (and its optional reference) from JSON text.
pub fn parse_class(text: &str) -> Result<(ModelClass, Option<ReferenceModel>)> {
    let file: ClassFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    if file.version != SCHEMA_VERSION {
        return Err(schema(format!("unsupported version '{}'", file.version)));
    }
    if file.decisions.is_empty() {
        return Err(schema("empty decision list"));
    }
    let space = match &file.observations {
        Value::String(s) if s == "gaussian" => ObservationSpace::Gaussian,
        Value::Array(a) => ObservationSpace::Finite(
            a.iter()
                .map(|x| x.as_str().map(String::from).ok_or_else(|| schema("observation names must be strings")))
                .collect::<Result<_>>()?,
        ),
        Value::Object(o) => {
            let ctx = o.get("contexts").and_then(Value::as_array).ok_or_else(|| schema("observations object needs 'contexts'"))?;
            ObservationSpace::Contexts(
                ctx.iter()
                    .map(|x| x.as_str().map(String::from).ok_or_else(|| schema("context names must be strings")))
                    .collect::<Result<_>>()?,
            )
        }
        _ => return Err(schema("observations must be a list, \"gaussian\" or {\"contexts\": [..]}")),
    };
    let risk_mode = match file.risk_mode.as_str() {
        "reward-max" => RiskMode::RewardMax,
        "explicit-risk" => RiskMode::ExplicitRisk,
        "estimation" => RiskMode::Estimation {
            distance: file.distance.clone().ok_or_else(|| schema("estimation mode needs a distance table"))?,
        },
        other => return Err(schema(format!("unknown risk_mode '{other}'"))),
    };
    let mut models = Vec::with_capacity(file.models.len());
    for (k, entry) in file.models.iter().enumerate() {
        let owner = format!("model {k} ({})", entry.name);
        let channel = parse_channel(&entry.channel, &file.decisions, &space, &owner)?;
        let model = match (&risk_mode, &entry.value, &entry.risk) {
            (RiskMode::RewardMax, Some(v), _) => Model::reward_max(entry.name.clone(), channel, v.clone())?,
            (RiskMode::RewardMax, None, _) => Model::derived(entry.name.clone(), channel, file.reward.as_deref())?,
            (_, v, Some(g)) => Model::explicit(entry.name.clone(), channel, g.clone(), v.clone())?,
            (_, _, None) => return Err(schema(format!("{owner}: explicit risk table required"))),
        };
        if let (RiskMode::RewardMax, Some(g)) = (&risk_mode, &entry.risk) {
            if g.len() != model.risk.len() || g.iter().zip(&model.risk).any(|(a, b)| (a - b).abs() > 1e-9) {
                return Err(schema(format!("{owner}: risk table disagrees with the value gaps")));
            }
        }
        models.push(model);
    }
    let class = ModelClass::new(file.decisions.clone(), space.clone(), file.reward.clone(), risk_mode, file.lipschitz_lr, models)?;
    let reference = match &file.reference {
        None => None,
        Some(r) => {
            let channel = parse_channel(&r.channel, &file.decisions, &space, "reference")?;
            let n = file.decisions.len();
            let model = Model::explicit("reference", channel, vec![0.0; n], Some(vec![0.0; n]))?;
            Some(ReferenceModel::validated(&class, model, r.c_kl)?)
        }
    };
    Ok((class, reference))
}

pub fn class_to_json(class: &ModelClass, reference: Option<&ReferenceModel>) -> Result<String> {
    let observations = match &class.observations {
        ObservationSpace::Finite(o) => Value::Array(o.iter().cloned().map(Value::String).collect()),
        ObservationSpace::Gaussian => Value::String("gaussian".into()),
        ObservationSpace::Contexts(c) => {
            let mut m = Map::new();
            m.insert("contexts".into(), Value::Array(c.iter().cloned().map(Value::String).collect()));
            Value::Object(m)
        }
    };
    let (risk_mode, distance) = match &class.risk_mode {
        RiskMode::RewardMax => ("reward-max", None),
        RiskMode::ExplicitRisk => ("explicit-risk", None),
        RiskMode::Estimation { distance } => ("estimation", Some(distance.clone())),
    };
    let reward_max = class.risk_mode.is_reward_max();
    let file = ClassFile {
        version: SCHEMA_VERSION.into(),
        decisions: class.decisions.clone(),
        observations,
        reward: class.reward.clone(),
        risk_mode: risk_mode.into(),
        distance,
        lipschitz_lr: class.lipschitz_lr.is_finite().then_some(class.lipschitz_lr),
        models: class
            .models
            .iter()
            .map(|m| ModelEntry {
                name: m.name.clone(),
                channel: channel_value(&m.channel, &class.decisions),
                value: Some(m.value.clone()),
                risk: (!reward_max).then(|| m.risk.clone()),
            })
            .collect(),
        reference: reference.map(|r| ReferenceEntry { channel: channel_value(&r.model.channel, &class.decisions), c_kl: r.c_kl }),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

pub fn load_class(path: impl AsRef<Path>) -> Result<(ModelClass, Option<ReferenceModel>)> {
    let text = std::fs::read_to_string(path)?;
    parse_class(&text)
}

pub fn save_class(class: &ModelClass, reference: Option<&ReferenceModel>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, class_to_json(class, reference)? + "\n")?;
    Ok(())
}
