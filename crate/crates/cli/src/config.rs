use std::fmt;
use std::path::{Path, PathBuf};

use noonphase::schemes::{HybridIncrement, PhaseGrid, Schedule, SizeObjective};
use noonphase::SchemeSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Bumped whenever a CSV layout changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Enumerate,
    Canonical,
    Sweep,
    Table,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Simulate => "simulate",
            Command::Enumerate => "enumerate",
            Command::Canonical => "canonical",
            Command::Sweep => "sweep",
            Command::Table => "table",
        };
        f.write_str(s)
    }
}

/// Named predefined experiments; expanded into explicit entries when resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipe {
    /// Adaptive QPEA, `M = 1..6`, `K = 1..9`.
    Fig2,
    /// `M = 4..6`, `K = 1..9`.
    Fig3,
    /// `K = 4`, increasing `M`, with the repetition bound.
    Fig4,
    /// Amplitudes of 100 copies of a 31-photon uniform state.
    Fig5,
    /// Amplitudes of the hybrid state with `N_K = 127`, `M = 64`.
    Fig6,
    /// Hybrid runs at `M = 2^K` with both phase increments.
    Fig7,
    /// Nonadaptive runs with constant `M`.
    Fig8,
    /// Nonadaptive runs with level-dependent `M`.
    Fig9,
    /// Size-adaptive runs with all three objectives.
    Fig10,
    /// Slope fits per scheme family.
    Table1,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct References {
    /// `tan²(π/(N+2))`.
    pub heisenberg: bool,
    /// `1/N`.
    pub sql: bool,
    /// `3/(M N_K (N_K+2))` for schemes with a single `K` and `M`.
    pub repetition_bound: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleDefaults {
    pub adaptive: u64,
    pub nonadaptive: u64,
}

impl Default for SampleDefaults {
    fn default() -> Self {
        Self {
            adaptive: 1 << 16,
            nonadaptive: 1 << 20,
        }
    }
}

/// Equivalent two-mode state for the canonical command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Uniform { n: usize },
    Copies { n_k: usize, m: usize },
    Hybrid { n_k: usize, m: usize },
}

impl StateSpec {
    pub fn label(&self) -> &'static str {
        match self {
            StateSpec::Uniform { .. } => "uniform",
            StateSpec::Copies { .. } => "copies",
            StateSpec::Hybrid { .. } => "hybrid",
        }
    }

    /// `(N_K, M)`, with a uniform state counted as one copy.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            StateSpec::Uniform { n } => (n, 1),
            StateSpec::Copies { n_k, m } | StateSpec::Hybrid { n_k, m } => (n_k, m),
        }
    }
}

/// Schemes whose fitted slope is compared against one scaling claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableGroup {
    pub label: String,
    /// Scaling class as written in the comparison table.
    pub claim: String,
    /// Exponent implied by the claim, when it has one.
    #[serde(default)]
    pub expected_slope: Option<f64>,
    pub schemes: Vec<SchemeSpec>,
}

/// One experiment. Every field has a default so a resolved config can be
/// written back out and rerun unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub recipe: Option<Recipe>,
    pub schemes: Vec<SchemeSpec>,
    pub states: Vec<StateSpec>,
    pub groups: Vec<TableGroup>,
    /// Overrides `sample_defaults` for every scheme.
    pub samples: Option<u64>,
    pub sample_defaults: SampleDefaults,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub references: References,
    /// Per-`n` amplitude dump for the canonical command.
    pub amplitudes: bool,
    /// Estimate at every resource count for size-adaptive schemes.
    pub curve: bool,
    /// Largest detection count for which the table command enumerates
    /// exactly instead of sampling.
    pub enumerate_up_to: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            command: None,
            recipe: None,
            schemes: Vec::new(),
            states: Vec::new(),
            groups: Vec::new(),
            samples: None,
            sample_defaults: SampleDefaults::default(),
            seed: 1,
            out: None,
            references: References::default(),
            amplitudes: false,
            curve: false,
            enumerate_up_to: 16,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Applies flags, expands the recipe and checks everything the chosen
    /// command will need.
    pub fn resolve(mut self, o: Overrides) -> Result<Self, CliError> {
        match (self.command, o.command) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!("config is for `{a}` but `{b}` was requested")));
            }
            (None, None) => return Err(CliError::Config("no command given".into())),
            (_, Some(b)) => self.command = Some(b),
            _ => {}
        }
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(samples) = o.samples {
            self.samples = Some(samples);
        }
        if o.out.is_some() {
            self.out = o.out;
        }
        if let Some(recipe) = self.recipe.take() {
            self.expand(recipe);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn command(&self) -> Command {
        self.command.expect("resolved config has a command")
    }

    fn validate(&self) -> Result<(), CliError> {
        let cmd = self.command();
        if let Some(s) = self.samples {
            if s < 2 {
                return Err(CliError::Config(format!("samples must be at least 2, got {s}")));
            }
        }
        if self.sample_defaults.adaptive < 2 || self.sample_defaults.nonadaptive < 2 {
            return Err(CliError::Config("sample defaults must be at least 2".into()));
        }
        let specs: Vec<&SchemeSpec> = match cmd {
            Command::Table => self.groups.iter().flat_map(|g| &g.schemes).collect(),
            _ => self.schemes.iter().collect(),
        };
        for s in &specs {
            s.validate().map_err(|e| CliError::Config(format!("{s}: {e}")))?;
        }
        match cmd {
            Command::Simulate | Command::Enumerate | Command::Sweep if self.schemes.is_empty() => {
                Err(CliError::Config(format!("`{cmd}` needs at least one scheme")))
            }
            Command::Canonical if self.states.is_empty() => Err(CliError::Config("`canonical` needs at least one state".into())),
            Command::Canonical => {
                for s in &self.states {
                    let (n_k, m) = s.shape();
                    if matches!(s, StateSpec::Copies { .. }) && (n_k == 0 || m == 0) {
                        return Err(CliError::Config("copies need N_K ≥ 1 and M ≥ 1".into()));
                    }
                }
                Ok(())
            }
            Command::Table if self.groups.is_empty() => Err(CliError::Config("`table` needs at least one group".into())),
            Command::Table => {
                for g in &self.groups {
                    let mut ns: Vec<u64> = g.schemes.iter().map(SchemeSpec::nominal_resources).collect();
                    ns.sort_unstable();
                    ns.dedup();
                    if ns.len() < crate::commands::MIN_FIT_POINTS {
                        return Err(CliError::Config(format!(
                            "group `{}` has {} distinct N values; a slope fit needs {}",
                            g.label,
                            ns.len(),
                            crate::commands::MIN_FIT_POINTS
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Samples for one scheme.
    pub fn samples_for(&self, spec: &SchemeSpec) -> u64 {
        self.samples.unwrap_or(match spec {
            SchemeSpec::Nonadaptive { .. } => self.sample_defaults.nonadaptive,
            _ => self.sample_defaults.adaptive,
        })
    }

    fn expand(&mut self, recipe: Recipe) {
        let qpea = |ms: &[usize], ks: std::ops::RangeInclusive<u32>| -> Vec<SchemeSpec> {
            ms.iter()
                .flat_map(|&m| ks.clone().map(move |k| SchemeSpec::GeneralizedQpea { k, m }))
                .collect()
        };
        match recipe {
            Recipe::Fig2 => {
                self.schemes.extend(qpea(&[1, 2, 3, 4, 5, 6], 1..=9));
                self.references.heisenberg = true;
            }
            Recipe::Fig3 => {
                self.schemes.extend(qpea(&[4, 5, 6], 1..=9));
                self.references.heisenberg = true;
            }
            Recipe::Fig4 => {
                self.schemes.extend((0..=8).map(|e| SchemeSpec::FixedK { k: 4, m: 1 << e }));
                self.references.repetition_bound = true;
                self.references.sql = true;
            }
            Recipe::Fig5 => {
                self.states.push(StateSpec::Copies { n_k: 31, m: 100 });
                self.amplitudes = true;
            }
            Recipe::Fig6 => {
                self.states.push(StateSpec::Hybrid { n_k: 127, m: 64 });
                self.amplitudes = true;
            }
            Recipe::Fig7 => {
                for increment in [HybridIncrement::PiOverM, HybridIncrement::PiOverTwo] {
                    self.schemes
                        .extend((4..=8).map(|k| SchemeSpec::Hybrid { k, m: 1 << k, increment }));
                }
                self.states.extend((4..=8).map(|k| StateSpec::Hybrid {
                    n_k: (2 << k) - 1,
                    m: 1 << k,
                }));
            }
            Recipe::Fig8 => {
                for m in [4, 8, 12, 16] {
                    self.schemes.extend((1..=8).map(|k| SchemeSpec::Nonadaptive {
                        k,
                        schedule: Schedule::Constant { m },
                        grid: PhaseGrid::HalfPeriod,
                    }));
                }
                self.references.heisenberg = true;
            }
            Recipe::Fig9 => {
                for (a, b) in [(2, 3), (4, 2)] {
                    self.schemes.extend((1..=8).map(|k| SchemeSpec::Nonadaptive {
                        k,
                        schedule: Schedule::Linear { a, b },
                        grid: PhaseGrid::HalfPeriod,
                    }));
                }
                self.references.heisenberg = true;
            }
            Recipe::Fig10 => {
                let objectives = [
                    SizeObjective::VhN2,
                    SizeObjective::EntropyC {
                        c: noonphase::schemes::default_entropy_offset(),
                    },
                    SizeObjective::EntropyEqualprob,
                ];
                for objective in objectives {
                    self.schemes.push(SchemeSpec::AdaptiveSize {
                        budget: 2000,
                        objective,
                        warmup: 10,
                    });
                }
                self.curve = true;
                self.references.heisenberg = true;
            }
            Recipe::Table1 => self.groups.extend(table1_groups()),
        }
    }
}

fn table1_groups() -> Vec<TableGroup> {
    let qpea = |m: usize, ks: std::ops::RangeInclusive<u32>| ks.map(|k| SchemeSpec::GeneralizedQpea { k, m }).collect();
    vec![
        TableGroup {
            label: "QPEA M=1".into(),
            claim: "Θ(1/N)".into(),
            expected_slope: Some(-1.0),
            schemes: qpea(1, 3..=8),
        },
        TableGroup {
            label: "generalized QPEA M=2".into(),
            claim: "Θ(1/N)".into(),
            expected_slope: Some(-1.0),
            schemes: qpea(2, 2..=7),
        },
        TableGroup {
            label: "generalized QPEA M=3".into(),
            claim: "Θ*(1/N^{3/2})".into(),
            expected_slope: Some(-1.5),
            schemes: qpea(3, 3..=8),
        },
        TableGroup {
            label: "generalized QPEA M=5".into(),
            claim: "Θ*(1/N²)".into(),
            expected_slope: Some(-2.0),
            schemes: qpea(5, 3..=8),
        },
        TableGroup {
            label: "generalized QPEA K=4 fixed".into(),
            claim: "Θ*(2^{-2K}/N)".into(),
            expected_slope: Some(-1.0),
            schemes: (3..=8).map(|e| SchemeSpec::FixedK { k: 4, m: 1 << e }).collect(),
        },
        TableGroup {
            label: "nonadaptive M=2+3(K-k)".into(),
            claim: "Θ(1/N²)".into(),
            expected_slope: Some(-2.0),
            schemes: (2..=7)
                .map(|k| SchemeSpec::Nonadaptive {
                    k,
                    schedule: Schedule::Linear { a: 2, b: 3 },
                    grid: PhaseGrid::HalfPeriod,
                })
                .collect(),
        },
        TableGroup {
            label: "hybrid QPEA+singles".into(),
            claim: "O(√(ln N)/N^{3/2})".into(),
            expected_slope: Some(-1.5),
            schemes: (3..=7)
                .map(|k| SchemeSpec::Hybrid {
                    k,
                    m: 1 << k,
                    increment: HybridIncrement::PiOverTwo,
                })
                .collect(),
        },
    ]
}
