use anyhow::{anyhow, bail, Context};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use decdim::algorithms::{reduction_prepare, Algorithm, ExoPlus, FixedDecision, ReductionAlgorithm, Sampler, Ucb, UcbConfig};
use decdim::bounds::{self, BoundReport, MiBound, SandwichConfig};
use decdim::complexity::{self, exo, DecOptions, DecReport, HullConfig, Reference};
use decdim::io::load_class;
use decdim::simulator::{derive_seed, monte_carlo, run_episode, SUMMARY_CSV_HEADER};
use decdim::{DivergenceKind, FiniteDistribution, MixtureSpec, Model, ModelClass, ReferenceModel};

use crate::output::{fmt_num, Output};
use crate::params::{parse_grid, Params};

/// How a successful run ends; maps to the process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Infinite,
    BudgetExhausted,
}

pub struct Run {
    pub output: Output,
    pub status: Status,
    /// Printed to standard error when the status is not Ok.
    pub message: Option<String>,
}

impl Run {
    fn ok(output: Output) -> Self {
        Self { output, status: Status::Ok, message: None }
    }
}

type Factory = Box<dyn Fn() -> Box<dyn Algorithm> + Sync>;

const DEFAULT_GAME_TOL: f64 = 1e-6;
const DEFAULT_EXO_TOL: f64 = 1e-2;

fn load(params: &Params) -> anyhow::Result<(ModelClass, Option<ReferenceModel>)> {
    let path = params.class.as_ref().context("--class is required")?;
    load_class(path).with_context(|| format!("loading {}", path.display()))
}

fn c_kl(params: &Params, reference: &Option<ReferenceModel>) -> anyhow::Result<f64> {
    params
        .c_kl
        .or(reference.as_ref().map(|r| r.c_kl))
        .context("--c-kl is required when the class file has no reference")
}

enum RefChoice {
    One(Reference),
    Hull,
}

fn parse_reference(spec: &str, class: &ModelClass, file_ref: &Option<ReferenceModel>) -> anyhow::Result<RefChoice> {
    let n = class.n_models();
    Ok(match spec {
        "hull" => RefChoice::Hull,
        "uniform" => RefChoice::One(Reference::Mixture(MixtureSpec::new(FiniteDistribution::uniform(n)))),
        "file" => RefChoice::One(Reference::Model(
            file_ref.as_ref().map(|r| r.model.clone()).context("class file has no reference")?,
        )),
        s if s.starts_with("member:") => {
            let k: usize = s[7..].parse().context("member index")?;
            if k >= n {
                bail!("member {k} out of range, the class has {n} models");
            }
            RefChoice::One(Reference::Member(k))
        }
        s if s.starts_with("mixture:") => {
            let w = parse_grid(&s[8..])?;
            RefChoice::One(Reference::Mixture(MixtureSpec::new(FiniteDistribution::normalized(w)?)))
        }
        other => bail!("unknown reference '{other}'"),
    })
}

/// Applies `f` to the chosen reference, or takes the largest value over the hull proxy.
fn with_reference(
    class: &ModelClass,
    choice: &RefChoice,
    f: impl Fn(&Reference) -> decdim::Result<DecReport>,
) -> anyhow::Result<DecReport> {
    match choice {
        RefChoice::One(r) => Ok(f(r)?),
        RefChoice::Hull => {
            let (refs, mixed) = complexity::hull_references(class, &HullConfig::default())?;
            let mut best: Option<DecReport> = None;
            for m in refs {
                let r = f(&Reference::Model(m))?;
                if best.as_ref().is_none_or(|b| r.value > b.value) {
                    best = Some(r);
                }
            }
            let mut r = best.context("empty class")?;
            r.lower_certified = mixed;
            Ok(r)
        }
    }
}

pub const DDIM_CSV_HEADER: &str = "kind,delta,value,slack,witness_model";

pub fn ddim(params: &Params) -> anyhow::Result<Run> {
    let (class, _) = load(params)?;
    let delta = Params::require(params.delta, "delta")?;
    let r = complexity::decision_dimension(&class, delta)?;
    let mut out = Output::new("ddim", &r, DDIM_CSV_HEADER)?;
    out.csv_rows.push(format!(
        "ddim,{delta},{},{},{}",
        r.value,
        r.certificate.slack(),
        r.witness_model.map(|k| k.to_string()).unwrap_or_default()
    ));
    if r.is_infinite() {
        let k = r.witness_model.expect("infinite value carries a witness");
        let msg = format!("unlearnable at Δ = {delta}: model {k} ({}) has no Δ-optimal decision", class.models[k].name);
        return Ok(Run { output: out, status: Status::Infinite, message: Some(msg) });
    }
    Ok(Run::ok(out))
}

pub const DEC_CSV_HEADER: &str = "kind,delta,eps,gamma,quantile,value,slack,lower_certified,reference";

pub fn dec(params: &Params) -> anyhow::Result<Run> {
    let (class, file_ref) = load(params)?;
    let kind = params.kind.as_deref().context("--kind is required")?;
    let opts = DecOptions::default();
    let default_ref = match kind {
        "offset" | "constrained-r" | "constrained-p" | "quantile-p" | "quantile-r" | "lin-constrained" | "tdec" => "hull",
        _ => "uniform",
    };
    let choice = parse_reference(params.reference.as_deref().unwrap_or(default_ref), &class, &file_ref)?;
    let eps = || Params::require(params.eps, "eps");
    let quantile = || Params::require(params.quantile, "quantile");
    let mut tol = params.tol.unwrap_or(DEFAULT_GAME_TOL);
    let report = match kind {
        "ddim" => complexity::decision_dimension(&class, Params::require(params.delta, "delta")?)?,
        "offset" => {
            let g = Params::require(params.gamma, "gamma")?;
            with_reference(&class, &choice, |r| complexity::offset_rdec(&class, r, g, &opts))?
        }
        "constrained-r" => {
            let e = eps()?;
            with_reference(&class, &choice, |r| complexity::constrained_rdec(&class, r, e, &opts))?
        }
        "constrained-p" => {
            let e = eps()?;
            with_reference(&class, &choice, |r| complexity::constrained_pdec(&class, r, e, &opts))?
        }
        "quantile-p" => {
            let (e, d) = (eps()?, quantile()?);
            with_reference(&class, &choice, |r| complexity::quantile_pdec(&class, r, e, d, &opts))?
        }
        "quantile-r" => {
            let (e, d) = (eps()?, quantile()?);
            with_reference(&class, &choice, |r| complexity::quantile_rdec(&class, r, e, d, &opts))?
        }
        "lin-constrained" | "tdec" => {
            let (refs, mixed) = match &choice {
                RefChoice::Hull => complexity::hull_references(&class, &HullConfig::default())?,
                RefChoice::One(r) => (vec![r.resolve(&class)?], false),
            };
            if kind == "tdec" {
                complexity::tdec(&class, &refs, Params::require(params.delta, "delta")?, mixed, &opts)?
            } else {
                let grid = parse_grid(params.grid.as_deref().unwrap_or("0.05:1:0.05"))?;
                complexity::lin_constrained_rdec(&class, &refs, eps()?, &grid, mixed, &opts)?
            }
        }
        "exo" => {
            tol = params.tol.unwrap_or(DEFAULT_EXO_TOL);
            let g = Params::require(params.gamma, "gamma")?;
            exo::exo_value(&class, &exo::uniform_prior(&class), g, &complexity::ExoConfig::default())?.0
        }
        other => bail!("unknown DEC kind '{other}'"),
    };
    let mut out = Output::new("dec", &report, DEC_CSV_HEADER)?;
    let p = &report.params;
    out.csv_rows.push(format!(
        "{kind},{},{},{},{},{},{},{},{}",
        fmt_num(p.delta),
        fmt_num(p.eps),
        fmt_num(p.gamma),
        fmt_num(p.quantile),
        report.value,
        report.certificate.slack(),
        report.lower_certified,
        report.reference.clone().unwrap_or_default().replace(',', ";")
    ));
    if report.is_infinite() {
        return Ok(Run { output: out, status: Status::Infinite, message: Some(format!("{kind} is infinite")) });
    }
    if let complexity::Certificate::Gap { gap } = report.certificate {
        if gap > tol {
            let msg = format!("solver gap {gap} exceeds tolerance {tol}; result flagged");
            return Ok(Run { output: out, status: Status::BudgetExhausted, message: Some(msg) });
        }
    }
    Ok(Run::ok(out))
}

/// Tables for the bounds that do not read a model class.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundInput {
    #[serde(default)]
    prior: Option<Vec<f64>>,
    laws: Vec<Vec<f64>>,
    loss: Vec<Vec<f64>>,
    #[serde(default)]
    gap: Option<f64>,
    #[serde(default)]
    quantile: Option<f64>,
    #[serde(default)]
    candidates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    gaps: Option<Vec<f64>>,
    #[serde(default)]
    divergence: Option<DivergenceKind>,
    #[serde(default)]
    nu0: Option<Vec<f64>>,
    #[serde(default)]
    nu1: Option<Vec<f64>>,
}

fn bound_input(params: &Params) -> anyhow::Result<BoundInput> {
    let path = params.input.as_ref().context("--input is required for this bound")?;
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn dist(v: Option<Vec<f64>>, n: usize, what: &str) -> anyhow::Result<FiniteDistribution> {
    match v {
        Some(w) => FiniteDistribution::new(w).map_err(|e| anyhow!("{what}: {e}")),
        None => Ok(FiniteDistribution::uniform(n)),
    }
}

/// Builds a fresh-instance factory for the named algorithm.
pub fn make_factory(spec: &str, class: &ModelClass, params: &Params, horizon: usize) -> anyhow::Result<Factory> {
    let n = class.n_decisions();
    Ok(match spec {
        "ucb" => Box::new(move || Box::new(Ucb::new((0..n).collect(), UcbConfig::new(horizon))) as Box<dyn Algorithm>),
        "uniform" => Box::new(move || Box::new(Sampler::new(FiniteDistribution::uniform(n))) as Box<dyn Algorithm>),
        "reduction" => {
            let gap = Params::require(params.delta, "delta")?;
            let conf = params.confidence.unwrap_or(0.1);
            let mut rng = ChaCha8Rng::seed_from_u64(params.master_seed.unwrap_or(0));
            let red = reduction_prepare(class, gap, conf, &mut rng)?;
            Box::new(move || Box::new(ReductionAlgorithm::new(red.clone(), UcbConfig::new(horizon))) as Box<dyn Algorithm>)
        }
        "exo" => {
            let gamma = params.gamma.unwrap_or((horizon as f64).sqrt());
            let proto = class.clone();
            // Validate once so the factory itself cannot fail.
            ExoPlus::new(&proto, gamma, exo::uniform_prior(&proto), Default::default())?;
            Box::new(move || {
                Box::new(
                    ExoPlus::new(&proto, gamma, exo::uniform_prior(&proto), Default::default()).expect("validated"),
                ) as Box<dyn Algorithm>
            })
        }
        s if s.starts_with("fixed:") => {
            let k: usize = s[6..].parse().context("fixed decision index")?;
            if k >= n {
                bail!("decision {k} out of range");
            }
            Box::new(move || Box::new(FixedDecision(k)) as Box<dyn Algorithm>)
        }
        other => bail!("unknown algorithm '{other}'"),
    })
}

pub const BOUND_CSV_HEADER: &str = "kind,delta,quantile,value";

fn bound_row(r: &BoundReport) -> String {
    let kind = serde_json::to_value(r.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
    format!("{kind},{},{},{}", fmt_num(r.witness.gap), fmt_num(r.witness.quantile), r.value)
}

pub fn bound(params: &Params) -> anyhow::Result<Run> {
    let kind = params.kind.as_deref().context("--kind is required")?;
    let report = match kind {
        "general" => {
            let inp = bound_input(params)?;
            let prior = dist(inp.prior, inp.laws.len(), "prior")?;
            let quantile = params.quantile.or(inp.quantile).context("--quantile is required")?;
            let div = inp.divergence.unwrap_or(DivergenceKind::Kl);
            bounds::general_lower_bound(&prior, &inp.laws, &inp.loss, quantile, inp.candidates.as_deref(), inp.gaps.as_deref(), div)?
        }
        "fano" => {
            let inp = bound_input(params)?;
            let prior = dist(inp.prior, inp.laws.len(), "prior")?;
            let gap = params.delta.or(inp.gap).context("--delta is required")?;
            bounds::generalized_fano(&prior, &inp.laws, &inp.loss, gap)?
        }
        "mixmix" => {
            let inp = bound_input(params)?;
            let k = inp.laws.len();
            let nu0 = dist(inp.nu0, k, "nu0")?;
            let nu1 = dist(inp.nu1, k, "nu1")?;
            let gap = params.delta.or(inp.gap).context("--delta is required")?;
            bounds::mix_vs_mix(&nu0, &nu1, &inp.loss, gap, &inp.laws)?
        }
        "fano-dmso" => {
            let horizon = Params::require(params.horizon, "T")?;
            let grid = params.grid.as_deref().map(parse_grid).transpose()?;
            match params.dim {
                Some(d) => {
                    let mi = MiBound::Linear { d, c0: params.c0.unwrap_or(0.125) };
                    bounds::fano_dmso(None, horizon, &mi, grid.as_deref())?
                }
                None => {
                    let (class, _) = load(params)?;
                    let prior = FiniteDistribution::uniform(class.n_models());
                    let mi = MiBound::Cap(Params::require(params.mi_cap, "mi-cap")?);
                    bounds::fano_dmso(Some((&class, &prior)), horizon, &mi, grid.as_deref())?
                }
            }
        }
        "quantile-hellinger" => {
            let (class, _) = load(params)?;
            let horizon = Params::require(params.horizon, "T")?;
            let quantile = params.quantile.unwrap_or(0.5);
            let n_mc = params.mc.unwrap_or_else(|| bounds::required_replicates(quantile));
            let alg = params.algorithm.as_deref().unwrap_or("ucb");
            let factory = make_factory(alg, &class, params, horizon)?;
            let seed = params.master_seed.unwrap_or(0);
            bounds::quantile_hellinger_bound(&class, &*factory, horizon, quantile, &class.models, n_mc, seed)?
        }
        "ddim-sample" => {
            let (class, file_ref) = load(params)?;
            bounds::ddim_sample_lower(&class, Params::require(params.delta, "delta")?, c_kl(params, &file_ref)?)?
        }
        "sandwich" => {
            let (class, file_ref) = load(params)?;
            let gap = Params::require(params.delta, "delta")?;
            bounds::sandwich_report(&class, c_kl(params, &file_ref)?, gap, &SandwichConfig::default())?
        }
        other => bail!("unknown bound kind '{other}'"),
    };
    let mut out = Output::new("bound", &report, BOUND_CSV_HEADER)?;
    out.csv_rows.push(bound_row(&report));
    if report.value.is_infinite() {
        return Ok(Run { output: out, status: Status::Infinite, message: Some(report.notes.join("; ")) });
    }
    Ok(Run::ok(out))
}

pub fn simulate(params: &Params) -> anyhow::Result<Run> {
    let (class, _) = load(params)?;
    let horizon = Params::require(params.horizon, "T")?;
    let n_seeds = params.seeds.unwrap_or(1);
    let master = params.master_seed.unwrap_or(0);
    let k = params.model.unwrap_or(0);
    let model: &Model = class.models.get(k).with_context(|| format!("model {k} out of range"))?;
    let alg = params.algorithm.as_deref().unwrap_or("ucb");
    let factory = make_factory(alg, &class, params, horizon)?;
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| derive_seed(master, i)).collect();
    let reward = class.reward.as_deref();
    let summary = monte_carlo(model, reward, &*factory, horizon, &seeds)?;
    let doc = json!({ "algorithm": alg, "model": model.name, "master_seed": master, "summary": summary });
    let mut out = Output::new("simulate", doc, SUMMARY_CSV_HEADER)?;
    out.csv_rows = summary.to_csv().lines().skip(1).map(String::from).collect();
    if params.traces {
        for (i, &s) in seeds.iter().enumerate() {
            let mut a = factory();
            let trace = run_episode(model, reward, a.as_mut(), horizon, s)?;
            out.extra_csv.push((format!("trace_{i}.csv"), trace.to_csv()));
        }
    }
    Ok(Run::ok(out))
}

pub const SWEEP_CSV_HEADER: &str =
    "delta,tdec,tdec_hull,ddim_half,ddim_sample_lower,lower,upper,upper_log_models,ddim_below_log_models";

pub fn sweep(params: &Params) -> anyhow::Result<Run> {
    let (class, file_ref) = load(params)?;
    let ckl = c_kl(params, &file_ref)?;
    let grid = parse_grid(params.grid.as_deref().unwrap_or("0.05:0.5:0.05"))?;
    let cfg = SandwichConfig::default();
    let mut reports = Vec::with_capacity(grid.len());
    let mut rows = Vec::with_capacity(grid.len());
    let mut infinite = false;
    for &gap in &grid {
        if !(gap > 0.0) {
            bail!("sweep grid values must be positive, got {gap}");
        }
        let r = bounds::sandwich_report(&class, ckl, gap, &cfg)?;
        let c = |k: &str| r.components.get(k).copied().unwrap_or(f64::NAN);
        infinite |= r.value.is_infinite();
        rows.push(format!(
            "{gap},{},{},{},{},{},{},{},{}",
            c("tdec"),
            c("tdec_hull"),
            c("ddim_half"),
            c("ddim_sample_lower"),
            c("lower"),
            c("upper"),
            c("upper_log_models"),
            c("ddim_below_log_models") == 1.0
        ));
        reports.push(r);
    }
    let mut out = Output::new("sweep", &reports, SWEEP_CSV_HEADER)?;
    out.csv_rows = rows;
    if infinite {
        return Ok(Run { output: out, status: Status::Infinite, message: Some("some Δ is unlearnable".into()) });
    }
    Ok(Run::ok(out))
}
