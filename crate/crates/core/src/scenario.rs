//! Experiment scenarios: one TOML file naming the network, the node
//! profiles, strategies, change events and a budget sweep.
//!
//! ```toml
//! seed = 7
//! runs = 1000
//! iters = 1500
//! network = "tree.toml"        # relative to the scenario file
//! profiles = "profiles.toml"   # or a [synth] table
//!
//! [planning]
//! variant = "p2"
//! method = "exact"
//! network_budget = 8.0
//!
//! [[strategy]]
//! kind = "matc"
//!
//! [[event]]
//! at = 1000
//! action = "scale_noise"
//! factor = 4.0
//!
//! [sweep]
//! budgets = [0, 4, 8, 16]
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::datamodel::{build_blocks, synth_profiles, GlobalModel, SynthKind, SynthParams};
use crate::engine::{ChangeAction, ChangeEvent, RunOptions, StrategyConfig, StrategyKind, WeightRule};
use crate::error::{Error, Result};
use crate::io::{self, MAX_NODES};
use crate::optimizer::{self, Budgets, Method, Plan, Variant};
use crate::synth;
use crate::topology::Network;
use crate::weights::{solve_beta, BalanceCoefficient};

/// Iteration and run counts above this are rejected.
pub const MAX_ITERS: usize = 10_000_000;
pub const MAX_RUNS: usize = 1_000_000;
const BETA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub runs: usize,
    #[serde(default = "default_iters")]
    pub iters: usize,
    /// Balancing coefficient; solved from the profiles when absent.
    pub alpha: Option<f64>,
    pub network: Option<String>,
    pub profiles: Option<String>,
    pub synth: Option<SynthSpec>,
    #[serde(default)]
    pub planning: PlanningSpec,
    #[serde(default)]
    pub strategy: Vec<StrategySpec>,
    #[serde(default)]
    pub event: Vec<EventSpec>,
    pub sweep: Option<SweepSpec>,
}

fn default_seed() -> u64 {
    1
}

fn default_runs() -> usize {
    1000
}

fn default_iters() -> usize {
    1000
}

/// Regenerated profiles; without a `network` file the family's network is
/// regenerated too.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub family: String,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanningSpec {
    pub variant: Option<String>,
    pub method: Option<String>,
    /// Overrides the profiles' network budget.
    pub network_budget: Option<f64>,
    /// Overrides every node's budget.
    pub local_budget: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: String,
    pub label: Option<String>,
    pub weights: Option<String>,
    pub h: Option<usize>,
    /// Plan file for `matc`/`matc_async`; planned from `[planning]` otherwise.
    pub plan: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub at: usize,
    pub action: String,
    pub omega: Option<Vec<f64>>,
    pub factor: Option<f64>,
    /// New budget for `nodes` (1-based), or for every node when absent.
    pub budget: Option<f64>,
    pub nodes: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub budgets: Vec<f64>,
}

fn parse_synth_kind(family: &str) -> Result<SynthKind> {
    match family {
        "tree" => Ok(SynthKind::Tree),
        "random" => Ok(SynthKind::Random),
        other => Err(Error::Parse(format!("unknown synth family {other:?} (expected tree or random)"))),
    }
}

impl StrategySpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.clone())
    }

    fn config(&self) -> Result<StrategyConfig> {
        let kind: StrategyKind = self.kind.parse()?;
        let mut cfg = StrategyConfig::new(kind);
        if let Some(w) = &self.weights {
            cfg = cfg.with_weights(w.parse::<WeightRule>()?);
        }
        if let Some(h) = self.h {
            if h == 0 || h > 64 {
                return Err(Error::Parse(format!("strategy {}: h must lie in 1..=64, got {h}", self.label())));
            }
            cfg = cfg.with_hops(h);
        }
        if self.plan.is_some() && !kind.needs_plan() {
            return Err(Error::Parse(format!("strategy {}: kind {} takes no plan", self.label(), kind.name())));
        }
        Ok(cfg)
    }
}

impl EventSpec {
    fn to_event(&self) -> Result<ChangeEvent> {
        let action = match self.action.as_str() {
            "set_omega" => {
                let w = self.omega.clone().ok_or_else(|| Error::Parse("set_omega event needs omega".into()))?;
                if w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::Parse("omega must be finite".into()));
                }
                ChangeAction::SetOmega(w)
            }
            "scale_noise" => {
                let f = self.factor.ok_or_else(|| Error::Parse("scale_noise event needs factor".into()))?;
                if !(f > 0.0) || !f.is_finite() {
                    return Err(Error::Parse(format!("noise factor must be positive and finite, got {f}")));
                }
                ChangeAction::ScaleNoise(f)
            }
            "set_budgets" => {
                let b = self.budget.ok_or_else(|| Error::Parse("set_budgets event needs budget".into()))?;
                if !(b >= 0.0) {
                    return Err(Error::Parse(format!("budget must be nonnegative, got {b}")));
                }
                let nodes = self.nodes.clone().unwrap_or_default();
                if nodes.iter().any(|&k| k == 0 || k > MAX_NODES) {
                    return Err(Error::Parse("event nodes are 1-based".into()));
                }
                // an empty list is expanded once the node count is known
                ChangeAction::SetBudgets(nodes.into_iter().map(|k| (k - 1, b)).collect())
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown event action {other:?} (expected set_omega, scale_noise or set_budgets)"
                )))
            }
        };
        Ok(ChangeEvent { at_iteration: self.at, action })
    }
}

impl ScenarioFile {
    /// Checks everything that does not need the referenced files.
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 || self.runs > MAX_RUNS {
            return Err(Error::Parse(format!("runs must lie in 1..={MAX_RUNS}, got {}", self.runs)));
        }
        if self.iters == 0 || self.iters > MAX_ITERS {
            return Err(Error::Parse(format!("iters must lie in 1..={MAX_ITERS}, got {}", self.iters)));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a <= 1.0) {
                return Err(Error::Parse(format!("alpha must lie in (0, 1], got {a}")));
            }
        }
        match (&self.profiles, &self.synth) {
            (Some(_), Some(_)) => return Err(Error::Parse("give profiles or [synth], not both".into())),
            (None, None) => return Err(Error::Parse("scenario needs profiles or a [synth] table".into())),
            (Some(_), None) if self.network.is_none() => {
                return Err(Error::Parse("a profiles file needs a network file".into()))
            }
            _ => {}
        }
        if let Some(s) = &self.synth {
            parse_synth_kind(&s.family)?;
        }
        self.variant()?;
        self.method()?;
        for b in [self.planning.network_budget, self.planning.local_budget].into_iter().flatten() {
            if !(b >= 0.0) {
                return Err(Error::Parse(format!("budgets must be nonnegative, got {b}")));
            }
        }
        let mut labels = HashSet::new();
        for s in &self.strategy {
            s.config()?;
            if !labels.insert(s.label()) {
                return Err(Error::Parse(format!("duplicate strategy label {:?}", s.label())));
            }
        }
        for e in &self.event {
            e.to_event()?;
        }
        if let Some(sw) = &self.sweep {
            if sw.budgets.is_empty() {
                return Err(Error::Parse("sweep needs at least one budget".into()));
            }
            if let Some(b) = sw.budgets.iter().find(|b| !(**b >= 0.0)) {
                return Err(Error::Parse(format!("sweep budgets must be nonnegative, got {b}")));
            }
        }
        Ok(())
    }

    pub fn variant(&self) -> Result<Option<Variant>> {
        self.planning.variant.as_deref().map(str::parse).transpose()
    }

    pub fn method(&self) -> Result<Method> {
        Ok(self.planning.method.as_deref().map(str::parse).transpose()?.unwrap_or(Method::Exact))
    }
}

/// Parses and validates a scenario without touching referenced files.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    let file: ScenarioFile = toml::from_str(text)?;
    file.validate()?;
    Ok(file)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn with_path<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// A scenario with its files loaded and its balancing coefficient fixed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub file: ScenarioFile,
    pub net: Network,
    pub model: GlobalModel,
    pub balance: BalanceCoefficient,
    pub base_dir: PathBuf,
}

impl Experiment {
    /// Loads `path` and the files it references.
    pub fn load(path: &Path) -> Result<Self> {
        Self::load_with(path, |_| {})
    }

    /// Like [`Experiment::load`], applying `edit` to the parsed file before
    /// its references are resolved.
    pub fn load_with(path: &Path, edit: impl FnOnce(&mut ScenarioFile)) -> Result<Self> {
        let text = read(path)?;
        let mut file = with_path(path, parse_scenario(&text))?;
        edit(&mut file);
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        with_path(path, Self::resolve(file, &base))
    }

    /// Resolves relative file references against `base_dir`.
    pub fn resolve(file: ScenarioFile, base_dir: &Path) -> Result<Self> {
        file.validate()?;
        let load_net = |p: &str| -> Result<Network> {
            let path = base_dir.join(p);
            with_path(&path, io::parse_network(&read(&path)?))
        };
        let (net, mut model) = match (&file.network, &file.profiles, &file.synth) {
            (Some(n), Some(p), None) => {
                let net = load_net(n)?;
                let path = base_dir.join(p);
                (net, with_path(&path, io::parse_profiles(&read(&path)?))?)
            }
            (None, None, Some(s)) => {
                let seed = s.seed.unwrap_or(file.seed);
                match parse_synth_kind(&s.family)? {
                    SynthKind::Tree => synth::tree_scenario(seed),
                    SynthKind::Random => synth::random_scenario(seed),
                }
            }
            (Some(n), None, Some(s)) => {
                let net = load_net(n)?;
                let mut rng = ChaCha8Rng::seed_from_u64(s.seed.unwrap_or(file.seed));
                let model = synth_profiles(parse_synth_kind(&s.family)?, &mut rng, &SynthParams::new(net.node_count()));
                (net, model)
            }
            _ => unreachable!("validated above"),
        };
        if net.node_count() != model.node_count() {
            return Err(Error::Dimension(format!(
                "network has {} nodes, profiles describe {}",
                net.node_count(),
                model.node_count()
            )));
        }
        if let Some(b) = file.planning.local_budget {
            for p in &mut model.profiles {
                p.energy_budget = b;
            }
        }
        if let Some(b) = file.planning.network_budget {
            model.network_budget = b;
        }
        let balance = match file.alpha {
            Some(a) => BalanceCoefficient::from_beta(1.0 / a - 1.0),
            None => solve_beta(&build_blocks(&model), BETA_TOL)?,
        };
        let exp = Experiment { file, net, model, balance, base_dir: base_dir.to_path_buf() };
        exp.events()?;
        Ok(exp)
    }

    pub fn alpha(&self) -> f64 {
        self.balance.alpha
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.model.composite_variances(self.alpha())
    }

    /// P2 on simple topologies, P3 otherwise, unless the scenario says.
    pub fn variant(&self) -> Variant {
        match self.file.variant() {
            Ok(Some(v)) => v,
            _ if self.net.is_simple() => Variant::P2,
            _ => Variant::P3,
        }
    }

    pub fn method(&self) -> Method {
        self.file.method().unwrap_or(Method::Exact)
    }

    pub fn budgets(&self) -> Budgets {
        let n = self.net.node_count();
        let local = match self.file.planning.local_budget {
            Some(b) => vec![b; n],
            None => self.model.local_budgets(),
        };
        Budgets { local, network: self.file.planning.network_budget.unwrap_or(self.model.network_budget) }
    }

    pub fn plan(&self, variant: Variant, method: Method, budgets: &Budgets) -> Result<Plan> {
        optimizer::plan(variant, method, &self.net, &self.gammas(), budgets)
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        Ok(RunOptions::new(self.file.iters, self.file.runs, self.file.seed).with_events(self.events()?))
    }

    pub fn events(&self) -> Result<Vec<ChangeEvent>> {
        let n = self.net.node_count();
        let mut events = Vec::with_capacity(self.file.event.len());
        for spec in &self.file.event {
            let mut ev = spec.to_event()?;
            if let ChangeAction::SetBudgets(pairs) = &mut ev.action {
                if pairs.is_empty() {
                    let b = spec.budget.unwrap_or(0.0);
                    *pairs = (0..n).map(|k| (k, b)).collect();
                }
                if let Some(&(k, _)) = pairs.iter().find(|p| p.0 >= n) {
                    return Err(Error::Parse(format!("event names node {} of a {n}-node network", k + 1)));
                }
            }
            if let ChangeAction::SetOmega(w) = &ev.action {
                if w.len() != self.model.dim() {
                    return Err(Error::Dimension(format!(
                        "omega has {} entries, expected {}",
                        w.len(),
                        self.model.dim()
                    )));
                }
            }
            events.push(ev);
        }
        Ok(events)
    }

    /// Labelled strategy configurations; plan-driven kinds read their plan
    /// file or share one plan solved from `[planning]`.
    pub fn strategies(&self) -> Result<Vec<(String, StrategyConfig)>> {
        let specs: Vec<StrategySpec> = if self.file.strategy.is_empty() {
            ["noncoop", "atc", "matc", "centralized"]
                .into_iter()
                .map(|k| StrategySpec { kind: k.into(), label: None, weights: None, h: None, plan: None })
                .collect()
        } else {
            self.file.strategy.clone()
        };
        let mut shared: Option<Plan> = None;
        let mut out = Vec::with_capacity(specs.len());
        for spec in &specs {
            let mut cfg = spec.config()?.with_balance(self.balance);
            if cfg.kind.needs_plan() {
                let selection = match &spec.plan {
                    Some(p) => {
                        let path = self.base_dir.join(p);
                        let file = with_path(&path, io::parse_plan(&read(&path)?))?;
                        file.to_selection(&self.net, &self.gammas())?
                    }
                    None => {
                        if shared.is_none() {
                            shared = Some(self.plan(self.variant(), self.method(), &self.budgets())?);
                        }
                        shared.as_ref().unwrap().selection.clone()
                    }
                };
                cfg = cfg.with_plan(selection);
            }
            out.push((spec.label(), cfg));
        }
        Ok(out)
    }

    /// Sweep budgets, ascending.
    pub fn sweep(&self) -> Vec<f64> {
        let mut b = self.file.sweep.as_ref().map(|s| s.budgets.clone()).unwrap_or_default();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let s = parse_scenario("[synth]\nfamily = 'tree'\n").unwrap();
        assert_eq!((s.seed, s.runs, s.iters), (1, 1000, 1000));
        assert_eq!(s.method().unwrap(), Method::Exact);
    }

    #[test]
    fn validation_errors() {
        for text in [
            "runs = 0\n[synth]\nfamily = 'tree'",
            "[synth]\nfamily = 'ring'",
            "profiles = 'p.toml'",
            "network = 'n.toml'",
            "alpha = 1.5\n[synth]\nfamily = 'tree'",
            "[synth]\nfamily = 'tree'\n[sweep]\nbudgets = [1, -2]",
            "[synth]\nfamily = 'tree'\n[[strategy]]\nkind = 'matx'",
            "[synth]\nfamily = 'tree'\n[[strategy]]\nkind = 'atc'\nplan = 'x.toml'",
            "[synth]\nfamily = 'tree'\n[[strategy]]\nkind = 'atc'\n[[strategy]]\nkind = 'atc'",
            "[synth]\nfamily = 'tree'\n[[event]]\nat = 3\naction = 'scale_noise'",
            "[synth]\nfamily = 'tree'\n[[event]]\nat = 3\naction = 'set_budgets'\nbudget = 1\nnodes = [0]",
            "[synth]\nfamily = 'tree'\n[planning]\nvariant = 'p4'",
        ] {
            assert!(parse_scenario(text).is_err(), "{text}");
        }
    }

    #[test]
    fn synth_tree_resolves_and_plans() {
        let text = "runs = 2\niters = 10\nalpha = 0.9\n[synth]\nfamily = 'tree'\n[planning]\nnetwork_budget = 8\n[[event]]\nat = 5\naction = 'set_budgets'\nbudget = 0.5\n";
        let exp = Experiment::resolve(parse_scenario(text).unwrap(), Path::new(".")).unwrap();
        assert_eq!(exp.net.node_count(), 8);
        assert!((exp.alpha() - 0.9).abs() < 1e-15);
        assert_eq!(exp.variant(), Variant::P2);
        let ev = exp.events().unwrap();
        assert_eq!(ev[0].action, ChangeAction::SetBudgets((0..8).map(|k| (k, 0.5)).collect()));
        let strategies = exp.strategies().unwrap();
        let labels: Vec<&str> = strategies.iter().map(|s| s.0.as_str()).collect();
        assert_eq!(labels, ["noncoop", "atc", "matc", "centralized"]);
        let plan = strategies[2].1.plan.as_ref().unwrap();
        assert!(plan.total_cost <= 8.0 + 1e-9);
    }

    #[test]
    fn files_resolved_relative_to_scenario() {
        let dir = std::env::temp_dir().join(format!("mhdiff-scenario-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("net.toml"), "nodes = 2\nedges = [[1, 2]]\n").unwrap();
        std::fs::write(
            dir.join("prof.toml"),
            "w_true = [1.0]\n[[node]]\nsigma_v2 = 0.1\nr_u_diag = [1.0]\n[[node]]\nsigma_v2 = 0.2\nr_u_diag = [1.0]\n",
        )
        .unwrap();
        std::fs::write(dir.join("s.toml"), "network = 'net.toml'\nprofiles = 'prof.toml'\n").unwrap();
        let exp = Experiment::load(&dir.join("s.toml")).unwrap();
        assert_eq!(exp.model.node_count(), 2);
        assert!(exp.alpha() > 0.0 && exp.alpha() <= 1.0);
        std::fs::write(dir.join("bad.toml"), "network = 'net.toml'\nprofiles = 'missing.toml'\n").unwrap();
        assert!(matches!(Experiment::load(&dir.join("bad.toml")), Err(Error::Io(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
