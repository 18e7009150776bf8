//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::discriminate::{
    check_cascade_discrimination, check_stage_orthogonality, necessary_condition_probe,
    CascadeVerdictJson, DiscriminationInstance, StageVerdictJson,
};
use crate::error::{Error, Result};
use crate::measurement::{condition, CascadeStrategy};
use crate::network::{LinearNetwork, ModeRef, NetworkSpec, UNITARITY_TOLERANCE};
use crate::nogo::{run_suite, suite_report, summarize, SuiteConfig, VerifyOptions};
use crate::oracle::{run_oracle_check, OracleCheckConfig, OracleComparison};
use crate::poly::{AlgebraConfig, CreationPolynomial, ModeRegistry, PolynomialJson, TermJson};
use crate::report::{sig12, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFICATION_FAILED: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NON_UNITARY: i32 = 3;
pub const EXIT_CAP: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "fockcascade", version, about = "Linear-optics Fock-state simulator and no-go checker")]
pub struct Cli {
    /// Seed for randomized batches.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Main numeric tolerance of the command (unitarity for instance files,
    /// residual for verify-nogo, deviation for oracle-check).
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Largest photon number any polynomial may reach.
    #[arg(long, global = true, default_value_t = crate::poly::DEFAULT_PHOTON_CAP)]
    pub photon_cap: u32,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Push every input state through the instance network.
    Simulate {
        instance: PathBuf,
        /// Network file used instead of the instance's own network.
        #[arg(long)]
        network: Option<PathBuf>,
    },
    /// Condition every output state on a photon count.
    Condition {
        instance: PathBuf,
        /// Measured mode, by label or index (defaults to the instance's `measure`).
        #[arg(long)]
        mode: Option<String>,
        /// Photon count.
        #[arg(long)]
        n: u32,
    },
    /// Discrimination verdicts for the instance's states.
    Check { instance: PathBuf },
    /// Randomized check of the auxiliary-photon overlap relation.
    VerifyNogo(VerifyNogoArgs),
    /// Compare the polynomial engine against the dense simulator.
    OracleCheck(OracleCheckArgs),
}

#[derive(Debug, Args)]
pub struct VerifyNogoArgs {
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 3)]
    pub max_system_modes: usize,
    #[arg(long, default_value_t = 2)]
    pub max_aux_modes: usize,
    #[arg(long, default_value_t = 3)]
    pub max_photons: u32,
    #[arg(long, default_value_t = 2)]
    pub max_aux_photons: u32,
    /// Use the constant 1 as auxiliary state.
    #[arg(long)]
    pub no_aux: bool,
    /// Perturb M' before checking (exercises the failure path).
    #[arg(long, hide = true)]
    pub corrupt_m_prime: bool,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 4)]
    pub max_modes: usize,
    #[arg(long, default_value_t = 3)]
    pub max_photons: u32,
}

/// Instance file: a mode list, system states and optional auxiliary
/// state, network, measured mode and cascade strategy.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub modes: Vec<String>,
    pub states: Vec<StateJson>,
    #[serde(default)]
    pub aux: Option<StateJson>,
    #[serde(default)]
    pub network: Option<NetworkSpec>,
    #[serde(default)]
    pub measure: Option<ModeRef>,
    #[serde(default)]
    pub strategy: Option<CascadeStrategy>,
}

/// A polynomial whose `modes` may be left out inside an instance file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    #[serde(default)]
    pub modes: Option<Vec<String>>,
    pub terms: Vec<TermJson>,
}

/// Parsed instance on a shared registry.
#[derive(Clone, Debug)]
pub struct Instance {
    pub registry: Arc<ModeRegistry>,
    pub states: Vec<CreationPolynomial>,
    pub aux: Option<CreationPolynomial>,
    pub network: Option<LinearNetwork>,
    pub measure: Option<ModeRef>,
    pub strategy: Option<CascadeStrategy>,
}

impl Instance {
    pub fn from_file(file: InstanceFile, config: AlgebraConfig, unitarity_tol: f64) -> Result<Self> {
        let registry = ModeRegistry::with_config(file.modes.iter().cloned(), config)?;
        let read = |s: &StateJson| -> Result<CreationPolynomial> {
            match &s.modes {
                Some(modes) => CreationPolynomial::from_json_on(
                    &PolynomialJson {
                        modes: modes.clone(),
                        terms: s.terms.clone(),
                    },
                    &registry,
                ),
                None => CreationPolynomial::from_terms_json(&registry, &s.terms),
            }
        };
        if file.states.is_empty() {
            return Err(Error::Schema("instance lists no states".into()));
        }
        let states = file.states.iter().map(read).collect::<Result<Vec<_>>>()?;
        let aux = file.aux.as_ref().map(read).transpose()?;
        let network = file
            .network
            .as_ref()
            .map(|n| n.build_with_tolerance(&registry, unitarity_tol))
            .transpose()?;
        if let Some(m) = &file.measure {
            m.resolve(&registry)?;
        }
        Ok(Self {
            registry,
            states,
            aux,
            network,
            measure: file.measure,
            strategy: file.strategy,
        })
    }

    pub fn load(path: &Path, config: AlgebraConfig, unitarity_tol: f64) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Schema(format!("cannot read {}: {e}", path.display())))?;
        let file: InstanceFile = serde_json::from_str(&text)?;
        Self::from_file(file, config, unitarity_tol)
    }

    /// `P_aux P_i` for every state.
    pub fn inputs(&self) -> Result<Vec<CreationPolynomial>> {
        match &self.aux {
            Some(aux) => self.states.iter().map(|s| aux.mul(s)).collect(),
            None => Ok(self.states.clone()),
        }
    }

    pub fn network_or_identity(&self) -> LinearNetwork {
        self.network
            .clone()
            .unwrap_or_else(|| LinearNetwork::identity(&self.registry))
    }
}

#[derive(Debug, Serialize)]
struct SimulateReport {
    schema: &'static str,
    unitarity_deviation: f64,
    outputs: Vec<PolynomialJson>,
}

#[derive(Debug, Serialize)]
struct ConditionEntry {
    state: usize,
    weight: f64,
    conditional_state: PolynomialJson,
}

#[derive(Debug, Serialize)]
struct ConditionReport {
    schema: &'static str,
    mode: String,
    outcome: u32,
    results: Vec<ConditionEntry>,
}

#[derive(Debug, Serialize)]
struct ProbePairJson {
    i: usize,
    j: usize,
    u_prime_norm: f64,
    v_norm: f64,
    sigma_min: f64,
    bound_ok: bool,
    implication_ok: bool,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    schema: &'static str,
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<StageVerdictJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    cascade: Option<CascadeVerdictJson>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probe: Option<Vec<ProbePairJson>>,
}

#[derive(Debug, Serialize)]
struct OracleReport {
    schema: &'static str,
    config: OracleCheckConfig,
    instances: usize,
    failed: usize,
    max_deviation: f64,
    results: Vec<OracleComparison>,
}

/// Result of one command: JSON body, stderr summary line and exit code.
#[derive(Debug)]
pub struct Outcome {
    pub json: String,
    pub summary: String,
    pub code: i32,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::UnitarityViolation { .. } => EXIT_NON_UNITARY,
        Error::CapViolation(_) | Error::PhotonCap { .. } => EXIT_CAP,
        _ => EXIT_SCHEMA,
    }
}

/// Runs a parsed command without touching stdout or stderr.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let config = AlgebraConfig {
        photon_cap: cli.photon_cap,
        ..AlgebraConfig::default()
    };
    let unitarity_tol = cli.tolerance.unwrap_or(UNITARITY_TOLERANCE);
    match &cli.command {
        Command::Simulate { instance, network } => {
            let inst = Instance::load(instance, config, unitarity_tol)?;
            let net = match network {
                Some(path) => {
                    let text = fs::read_to_string(path).map_err(|e| {
                        Error::Schema(format!("cannot read {}: {e}", path.display()))
                    })?;
                    let spec: NetworkSpec = serde_json::from_str(&text)?;
                    spec.build_with_tolerance(&inst.registry, unitarity_tol)?
                }
                None => inst.network_or_identity(),
            };
            let outputs = inst
                .inputs()?
                .iter()
                .map(|p| net.substitute(p).map(|q| q.to_json()))
                .collect::<Result<Vec<_>>>()?;
            let report = SimulateReport {
                schema: SCHEMA_VERSION,
                unitarity_deviation: sig12(net.unitarity_deviation()),
                outputs,
            };
            Ok(Outcome {
                json: to_json(&report)?,
                summary: format!("simulated {} state(s)", report.outputs.len()),
                code: EXIT_OK,
            })
        }
        Command::Condition { instance, mode, n } => {
            let inst = Instance::load(instance, config, unitarity_tol)?;
            let mode_ref = match mode {
                Some(m) => parse_mode_ref(m),
                None => inst
                    .measure
                    .clone()
                    .ok_or_else(|| Error::Schema("no --mode given and instance has no `measure`".into()))?,
            };
            let c = mode_ref.resolve(&inst.registry)?;
            let net = inst.network_or_identity();
            let mut results = Vec::new();
            for (k, p) in inst.inputs()?.iter().enumerate() {
                let out = net.substitute(p)?;
                let cond = condition(&out, c, *n)?;
                results.push(ConditionEntry {
                    state: k,
                    weight: sig12(cond.weight),
                    conditional_state: cond.state.to_json(),
                });
            }
            let report = ConditionReport {
                schema: SCHEMA_VERSION,
                mode: inst.registry.label(c).to_string(),
                outcome: *n,
                results,
            };
            let weights: Vec<String> = report.results.iter().map(|r| format!("{}", r.weight)).collect();
            Ok(Outcome {
                json: to_json(&report)?,
                summary: format!(
                    "outcome N={} on {}: weights [{}]",
                    n,
                    report.mode,
                    weights.join(", ")
                ),
                code: EXIT_OK,
            })
        }
        Command::Check { instance } => {
            let inst = Instance::load(instance, config, unitarity_tol)?;
            let aux = inst
                .aux
                .clone()
                .unwrap_or_else(|| CreationPolynomial::one(&inst.registry));
            let di = DiscriminationInstance::new(inst.states.clone(), aux, inst.strategy.clone())?;
            let mut pass = true;
            let mut parts = Vec::new();
            let stage = match &inst.measure {
                Some(m) => {
                    let c = m.resolve(&inst.registry)?;
                    let v = check_stage_orthogonality(&di, &inst.network_or_identity(), c)?;
                    pass &= v.passed();
                    parts.push(format!("stage {}", verdict(v.passed())));
                    Some((v.to_json(), c))
                }
                None => None,
            };
            let probe = match (&stage, &inst.aux) {
                (Some((_, c)), Some(_)) if inst.states.len() >= 2 => {
                    let p = necessary_condition_probe(&di, &inst.network_or_identity(), *c)?;
                    pass &= p.passed();
                    parts.push(format!("probe {}", verdict(p.passed())));
                    Some(
                        p.pairs
                            .iter()
                            .map(|q| ProbePairJson {
                                i: q.i,
                                j: q.j,
                                u_prime_norm: sig12(q.u_prime_norm),
                                v_norm: sig12(q.v_norm),
                                sigma_min: sig12(q.sigma_min),
                                bound_ok: q.bound_ok,
                                implication_ok: q.implication_ok,
                            })
                            .collect(),
                    )
                }
                _ => None,
            };
            let cascade = match di.strategy() {
                Some(_) => {
                    let v = check_cascade_discrimination(&di)?;
                    pass &= v.passed();
                    parts.push(format!(
                        "cascade {} ({} ambiguous leaves)",
                        verdict(v.passed()),
                        v.ambiguous_leaves().count()
                    ));
                    Some(v.to_json())
                }
                None => None,
            };
            if parts.is_empty() {
                return Err(Error::Schema(
                    "check needs a `strategy` or a `measure` in the instance".into(),
                ));
            }
            let report = CheckReport {
                schema: SCHEMA_VERSION,
                verdict: verdict(pass),
                stage: stage.map(|(v, _)| v),
                cascade,
                probe,
            };
            Ok(Outcome {
                json: to_json(&report)?,
                summary: format!("{}: {}", verdict(pass), parts.join(", ")),
                code: EXIT_OK,
            })
        }
        Command::VerifyNogo(a) => {
            let suite = SuiteConfig {
                seed: cli.seed,
                count: a.count,
                max_system_modes: a.max_system_modes,
                max_aux_modes: a.max_aux_modes,
                max_photons: a.max_photons,
                max_aux_photons: a.max_aux_photons,
                no_aux: a.no_aux,
                options: VerifyOptions {
                    residual_tol: cli.tolerance.unwrap_or(VerifyOptions::default().residual_tol),
                    corrupt_m_prime: a.corrupt_m_prime,
                    ..VerifyOptions::default()
                },
            };
            let outcomes = run_suite(&suite)?;
            let summary = summarize(&outcomes);
            let report = suite_report(&suite, &outcomes);
            Ok(Outcome {
                json: to_json(&report)?,
                summary: format!(
                    "{}: instances={} failed={} max_residual={:e} max_det_deviation={:e}",
                    verdict(summary.failed == 0),
                    summary.instances,
                    summary.failed,
                    summary.max_residual_ratio,
                    summary.max_det_deviation
                ),
                code: if summary.failed == 0 {
                    EXIT_OK
                } else {
                    EXIT_VERIFICATION_FAILED
                },
            })
        }
        Command::OracleCheck(a) => {
            let cfg = OracleCheckConfig {
                seed: cli.seed,
                count: a.count,
                max_modes: a.max_modes,
                max_photons: a.max_photons,
                tolerance: cli.tolerance.unwrap_or(OracleCheckConfig::default().tolerance),
            };
            let results = run_oracle_check(&cfg)?;
            let failed = results.iter().filter(|r| !r.passed).count();
            let max_deviation = results
                .iter()
                .flat_map(|r| {
                    [
                        r.amplitude_deviation,
                        r.weight_deviation,
                        r.conditional_deviation,
                        r.phase_insensitive_deviation,
                    ]
                })
                .fold(0.0, f64::max);
            let report = OracleReport {
                schema: SCHEMA_VERSION,
                instances: results.len(),
                failed,
                max_deviation: sig12(max_deviation),
                config: cfg,
                results: results
                    .into_iter()
                    .map(|mut r| {
                        r.amplitude_deviation = sig12(r.amplitude_deviation);
                        r.weight_deviation = sig12(r.weight_deviation);
                        r.conditional_deviation = sig12(r.conditional_deviation);
                        r.phase_insensitive_deviation = sig12(r.phase_insensitive_deviation);
                        r.weight_sum = sig12(r.weight_sum);
                        r
                    })
                    .collect(),
            };
            Ok(Outcome {
                json: to_json(&report)?,
                summary: format!(
                    "{}: instances={} failed={} max_deviation={:e}",
                    verdict(failed == 0),
                    report.instances,
                    failed,
                    max_deviation
                ),
                code: if failed == 0 {
                    EXIT_OK
                } else {
                    EXIT_VERIFICATION_FAILED
                },
            })
        }
    }
}

fn parse_mode_ref(s: &str) -> ModeRef {
    match s.parse::<usize>() {
        Ok(k) => ModeRef::Index(k),
        Err(_) => ModeRef::Label(s.to_string()),
    }
}

/// Parses arguments, runs the command, writes the report and returns the
/// process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.out {
                Some(path) => fs::write(path, format!("{}\n", outcome.json)),
                None => writeln!(std::io::stdout(), "{}", outcome.json),
            };
            if let Err(e) = written {
                eprintln!("error: cannot write report: {e}");
                return EXIT_SCHEMA;
            }
            eprintln!("{}", outcome.summary);
            outcome.code
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
