//! TOML experiment configuration.
//!
//! ```toml
//! experiment = "base"          # base | compare | sweep
//! model = "ou-single"          # ou-single | cir-single | ou-sub | cir-sub
//! out_dir = "out"
//!
//! [population1]                # reference population (b and sigma are b1, sigma1)
//! nu = 0.0009944
//! delta = 11.4
//! m = 86.4515
//! b = 0.561
//! sigma = 0.0035
//!
//! [population2]                # members' sub-population, two-population models only
//! nu = 0.0009944
//! delta = 12.9374
//! m = 89.18
//! b21 = 0.0028
//! b22 = 0.65
//! sigma21 = 0.004
//! sigma22 = 0.005
//!
//! [market]
//! r = 0.04
//! theta_s = 0.05
//! sigma_s = 0.15
//! theta1 = -0.0005
//! bond_maturity = 20.0         # optional
//!
//! [scheme]
//! phi = 0.8
//! y0 = 100.0
//! # optional: pi, horizon, dt, n_paths, seed, t_max, retirement_age, rel_tol, max_refinements
//!
//! [sweep]                      # sweep experiments only
//! var = "theta1"               # theta1 | phi
//! values = [0.0, -0.0015, -0.003]
//! ```

use crate::affine::MarketParams;
use crate::control::SchemeScenario;
use crate::error::{Error, Result};
use crate::mortality::{Dynamics, GompertzMakehamParams, MortalityModel, SinglePopModel, TwoPopModel};
use crate::numerics::Tolerance;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use toml::{Table, Value};

pub const DEFAULT_HORIZON: f64 = 35.0;
pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_BOND_MATURITY: f64 = 20.0;
pub const DEFAULT_T_MAX: f64 = 120.0;
pub const DEFAULT_N_PATHS: usize = 100;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Base,
    Compare,
    Sweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelection {
    OuSingle,
    CirSingle,
    OuSub,
    CirSub,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    Theta1,
    Phi,
}

macro_rules! named_enum {
    ($ty:ident, $what:literal, $($variant:ident => $name:literal),+) => {
        impl $ty {
            pub fn name(&self) -> &'static str {
                match self { $($ty::$variant => $name),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    other => Err(Error::config(format!(
                        concat!("unknown ", $what, " '{}' (expected one of: {})"),
                        other,
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

named_enum!(ExperimentKind, "experiment", Base => "base", Compare => "compare", Sweep => "sweep");
named_enum!(ModelSelection, "model", OuSingle => "ou-single", CirSingle => "cir-single", OuSub => "ou-sub", CirSub => "cir-sub");
named_enum!(SweepVar, "sweep variable", Theta1 => "theta1", Phi => "phi");

impl ModelSelection {
    pub fn dynamics(&self) -> Dynamics {
        match self {
            ModelSelection::OuSingle | ModelSelection::OuSub => Dynamics::Ou,
            ModelSelection::CirSingle | ModelSelection::CirSub => Dynamics::Cir,
        }
    }

    pub fn two_population(&self) -> bool {
        matches!(self, ModelSelection::OuSub | ModelSelection::CirSub)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub selection: ModelSelection,
    pub model: MortalityModel,
    pub market: MarketParams,
    pub scenario: SchemeScenario,
    /// Members' age at `t = 0`; shifts the Gompertz–Makeham curves.
    pub retirement_age: f64,
    pub out_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

/// Parses configuration text; all missing required keys are reported together.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config(format!("invalid TOML: {e}")))?;
    let mut r = Reader::new(&root);

    let selection: Option<ModelSelection> = r.string("model").map(|s| s.parse()).transpose()?;
    let experiment = r
        .opt_string("experiment")
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(ExperimentKind::Base);
    let out_dir = PathBuf::from(r.opt_string("out_dir").unwrap_or_else(|| "out".into()));

    let p1 = [
        r.float("population1.nu"),
        r.float("population1.delta"),
        r.float("population1.m"),
        r.float("population1.b"),
        r.float("population1.sigma"),
    ];
    let p2 = match selection {
        Some(sel) if sel.two_population() => Some([
            r.float("population2.nu"),
            r.float("population2.delta"),
            r.float("population2.m"),
            r.float("population2.b21"),
            r.float("population2.b22"),
            r.float("population2.sigma21"),
            r.float("population2.sigma22"),
        ]),
        _ => None,
    };
    let market = [
        r.float("market.r"),
        r.float("market.theta_s"),
        r.float("market.sigma_s"),
        r.float("market.theta1"),
    ];
    let phi = r.float("scheme.phi");
    let y0 = r.float("scheme.y0");
    let bond_maturity = r.opt_float("market.bond_maturity").unwrap_or(DEFAULT_BOND_MATURITY);
    let pi = r.opt_float("scheme.pi").unwrap_or(1.0);
    let horizon = r.opt_float("scheme.horizon").unwrap_or(DEFAULT_HORIZON);
    let dt = r.opt_float("scheme.dt").unwrap_or(DEFAULT_DT);
    let n_paths = r.opt_uint("scheme.n_paths").unwrap_or(DEFAULT_N_PATHS as u64) as usize;
    let seed = r.opt_uint("scheme.seed").unwrap_or(DEFAULT_SEED);
    let t_max = r.opt_float("scheme.t_max").unwrap_or(DEFAULT_T_MAX);
    let retirement_age = r.opt_float("scheme.retirement_age").unwrap_or(0.0);
    let defaults = Tolerance::default();
    let rel_tol = r.opt_float("scheme.rel_tol").unwrap_or(defaults.rel_tol);
    let max_refinements = r
        .opt_uint("scheme.max_refinements")
        .unwrap_or(defaults.max_refinements as u64);

    let sweep = if r.has_table("sweep") || experiment == ExperimentKind::Sweep {
        let var: Option<SweepVar> = r.string("sweep.var").map(|s| s.parse()).transpose()?;
        let values = r.float_list("sweep.values");
        match (var, values) {
            (Some(var), Some(values)) => Some(SweepSpec { var, values }),
            _ => None,
        }
    } else {
        None
    };
    r.finish()?;

    // finish() guarantees every required value is present.
    let selection = selection.expect("checked");
    let [nu1, delta1, m1, b1, sigma1] = p1.map(|v| v.expect("checked"));
    let gm1 = GompertzMakehamParams::new(nu1, delta1, m1)?.with_start_age(retirement_age)?;
    let model = match p2 {
        None => MortalityModel::Single(SinglePopModel::new(selection.dynamics(), gm1, b1, sigma1)?),
        Some(p2) => {
            let [nu2, delta2, m2, b21, b22, sigma21, sigma22] = p2.map(|v| v.expect("checked"));
            let gm2 = GompertzMakehamParams::new(nu2, delta2, m2)?.with_start_age(retirement_age)?;
            let two = TwoPopModel {
                kind: selection.dynamics(),
                gm1,
                gm2,
                b1,
                b21,
                b22,
                sigma1,
                sigma21,
                sigma22,
            };
            if two.kind == Dynamics::Ou && b1 == b22 {
                return Err(Error::config(
                    "population1.b equals population2.b22: the two-population OU survival \
                     coefficient C1 is singular when b1 = b22",
                ));
            }
            two.validate()?;
            MortalityModel::TwoPop(two)
        }
    };
    let [rate, theta_s, sigma_s, theta1] = market.map(|v| v.expect("checked"));
    let market = MarketParams {
        r: rate,
        theta_s,
        sigma_s,
        theta1,
        bond_maturity,
    };
    market.validate()?;
    let max_refinements = u32::try_from(max_refinements)
        .map_err(|_| Error::config("scheme.max_refinements is too large"))?;
    let scenario = SchemeScenario {
        phi: phi.expect("checked"),
        pi,
        y0: y0.expect("checked"),
        horizon,
        dt,
        n_paths,
        seed,
        t_max,
        tol: Tolerance::new(rel_tol, max_refinements)?,
    };
    scenario.validate()?;
    scenario.grid()?;

    if experiment == ExperimentKind::Sweep && sweep.as_ref().is_none_or(|s| s.values.is_empty()) {
        return Err(Error::config("sweep experiments need a non-empty sweep.values list"));
    }

    Ok(ExperimentConfig {
        experiment,
        selection,
        model,
        market,
        scenario,
        retirement_age,
        out_dir,
        sweep,
    })
}

impl ExperimentConfig {
    /// Serialises to TOML that [`parse_config`] reads back to an equal value.
    pub fn to_toml_string(&self) -> Result<String> {
        let mut root = Table::new();
        root.insert("experiment".into(), self.experiment.name().into());
        root.insert("model".into(), self.selection.name().into());
        root.insert("out_dir".into(), self.out_dir.to_string_lossy().into_owned().into());

        let mut p1 = Table::new();
        let mut p2 = Table::new();
        let gm_entries = |t: &mut Table, gm: &GompertzMakehamParams| {
            t.insert("nu".into(), gm.nu.into());
            t.insert("delta".into(), gm.delta.into());
            t.insert("m".into(), gm.m.into());
        };
        match &self.model {
            MortalityModel::Single(m) => {
                gm_entries(&mut p1, &m.gm);
                p1.insert("b".into(), m.b.into());
                p1.insert("sigma".into(), m.sigma.into());
            }
            MortalityModel::TwoPop(m) => {
                gm_entries(&mut p1, &m.gm1);
                p1.insert("b".into(), m.b1.into());
                p1.insert("sigma".into(), m.sigma1.into());
                gm_entries(&mut p2, &m.gm2);
                p2.insert("b21".into(), m.b21.into());
                p2.insert("b22".into(), m.b22.into());
                p2.insert("sigma21".into(), m.sigma21.into());
                p2.insert("sigma22".into(), m.sigma22.into());
            }
        }
        root.insert("population1".into(), p1.into());
        if !p2.is_empty() {
            root.insert("population2".into(), p2.into());
        }

        let mk = &self.market;
        let mut market = Table::new();
        market.insert("r".into(), mk.r.into());
        market.insert("theta_s".into(), mk.theta_s.into());
        market.insert("sigma_s".into(), mk.sigma_s.into());
        market.insert("theta1".into(), mk.theta1.into());
        market.insert("bond_maturity".into(), mk.bond_maturity.into());
        root.insert("market".into(), market.into());

        let sc = &self.scenario;
        let seed = i64::try_from(sc.seed)
            .map_err(|_| Error::config(format!("seed {} does not fit a TOML integer", sc.seed)))?;
        let mut scheme = Table::new();
        scheme.insert("phi".into(), sc.phi.into());
        scheme.insert("pi".into(), sc.pi.into());
        scheme.insert("y0".into(), sc.y0.into());
        scheme.insert("horizon".into(), sc.horizon.into());
        scheme.insert("dt".into(), sc.dt.into());
        scheme.insert("n_paths".into(), Value::Integer(sc.n_paths as i64));
        scheme.insert("seed".into(), Value::Integer(seed));
        scheme.insert("t_max".into(), sc.t_max.into());
        scheme.insert("retirement_age".into(), self.retirement_age.into());
        scheme.insert("rel_tol".into(), sc.tol.rel_tol.into());
        scheme.insert("max_refinements".into(), Value::Integer(sc.tol.max_refinements as i64));
        root.insert("scheme".into(), scheme.into());

        if let Some(sw) = &self.sweep {
            let mut sweep = Table::new();
            sweep.insert("var".into(), sw.var.name().into());
            sweep.insert(
                "values".into(),
                Value::Array(sw.values.iter().map(|&v| v.into()).collect()),
            );
            root.insert("sweep".into(), sweep.into());
        }
        toml::to_string(&root).map_err(|e| Error::config(format!("cannot serialise config: {e}")))
    }
}

/// Collects missing and malformed keys so one error can name all of them.
struct Reader<'a> {
    root: &'a Table,
    missing: Vec<String>,
    invalid: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(root: &'a Table) -> Self {
        Self {
            root,
            missing: Vec::new(),
            invalid: Vec::new(),
        }
    }

    fn lookup(&mut self, key: &str) -> Option<&'a Value> {
        let mut table = self.root;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            let value = table.get(part)?;
            if parts.peek().is_none() {
                return Some(value);
            }
            match value.as_table() {
                Some(t) => table = t,
                None => {
                    self.invalid.push(format!("{part} must be a table"));
                    return None;
                }
            }
        }
        None
    }

    fn has_table(&mut self, key: &str) -> bool {
        self.root.get(key).is_some_and(Value::is_table)
    }

    fn opt_float(&mut self, key: &str) -> Option<f64> {
        match self.lookup(key)? {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => {
                self.invalid.push(format!("{key} must be a number"));
                None
            }
        }
    }

    fn float(&mut self, key: &str) -> Option<f64> {
        if self.lookup(key).is_none() {
            self.missing.push(key.to_string());
            return None;
        }
        self.opt_float(key)
    }

    fn opt_uint(&mut self, key: &str) -> Option<u64> {
        match self.lookup(key)? {
            Value::Integer(i) if *i >= 0 => Some(*i as u64),
            _ => {
                self.invalid.push(format!("{key} must be a non-negative integer"));
                None
            }
        }
    }

    fn opt_string(&mut self, key: &str) -> Option<String> {
        match self.lookup(key)? {
            Value::String(s) => Some(s.clone()),
            _ => {
                self.invalid.push(format!("{key} must be a string"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<String> {
        if self.lookup(key).is_none() {
            self.missing.push(key.to_string());
            return None;
        }
        self.opt_string(key)
    }

    fn float_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let Some(value) = self.lookup(key) else {
            self.missing.push(key.to_string());
            return None;
        };
        let parsed: Option<Vec<f64>> = value.as_array().and_then(|a| {
            a.iter()
                .map(|v| match v {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect()
        });
        if parsed.is_none() {
            self.invalid.push(format!("{key} must be a list of numbers"));
        }
        parsed
    }

    fn finish(self) -> Result<()> {
        let mut problems = Vec::new();
        if !self.missing.is_empty() {
            problems.push(format!("missing required keys: {}", self.missing.join(", ")));
        }
        problems.extend(self.invalid);
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::config(problems.join("; ")))
        }
    }
}
