//! Photon counting on one output mode, and cascades of counting stages.
//!
//! A state `P(c†, d†_k)|0⟩` is expanded as `Σ_n (c†)^n Q^(n)(d†_k)|0⟩`.
//! Observing `N` photons in `c` leaves the remaining modes in `Q^(N)|0⟩`,
//! kept unnormalized; the outcome probability is
//! `N! ‖Q^(N)|0⟩‖² / ‖P|0⟩‖²` and is carried separately.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{LinearNetwork, ModeRef, NetworkSpec};
use crate::poly::{factorial, CreationPolynomial, ModeId, ModeRegistry, Monomial};
use crate::report::sig12;

/// Outcome weights below this are treated as impossible outcomes.
pub const ZERO_WEIGHT: f64 = 1e-12;

/// Coefficients `Q^(0..=n_max)` of a polynomial in powers of one mode.
#[derive(Clone, Debug)]
pub struct ModeExpansion {
    measured: ModeId,
    source: Arc<ModeRegistry>,
    remaining: Arc<ModeRegistry>,
    coefficients: Vec<CreationPolynomial>,
    zero: CreationPolynomial,
}

impl ModeExpansion {
    pub fn measured(&self) -> ModeId {
        self.measured
    }

    pub fn source_registry(&self) -> &Arc<ModeRegistry> {
        &self.source
    }

    pub fn remaining_registry(&self) -> &Arc<ModeRegistry> {
        &self.remaining
    }

    /// Highest power of the measured mode; `None` for the zero polynomial.
    pub fn max_degree(&self) -> Option<u32> {
        if self.coefficients.iter().all(CreationPolynomial::is_zero) {
            None
        } else {
            Some(self.coefficients.len() as u32 - 1)
        }
    }

    /// `Q^(n)`; zero outside the stored range.
    pub fn coefficient(&self, n: i64) -> &CreationPolynomial {
        if n < 0 {
            return &self.zero;
        }
        self.coefficients.get(n as usize).unwrap_or(&self.zero)
    }

    pub fn coefficients(&self) -> &[CreationPolynomial] {
        &self.coefficients
    }

    /// `Σ_n (c†)^n Q^(n)` on the original registry.
    pub fn reassemble(&self) -> CreationPolynomial {
        let c = self.measured.index();
        let mut terms = BTreeMap::new();
        for (n, q) in self.coefficients.iter().enumerate() {
            for (m, coeff) in q.terms() {
                let mut exps = m.exponents().to_vec();
                exps.insert(c, n as u32);
                terms.insert(Monomial::new(exps), *coeff);
            }
        }
        CreationPolynomial::from_raw_terms(&self.source, terms)
    }
}

/// Splits `p` by its power of mode `c`.
pub fn expand_by_mode(p: &CreationPolynomial, c: ModeId) -> Result<ModeExpansion> {
    let source = Arc::clone(p.registry());
    if c.index() >= source.len() {
        return Err(Error::UnknownMode(format!("#{}", c.index())));
    }
    let remaining = source.without(c);
    let n_max = p.degree_in(c).unwrap_or(0) as usize;
    let mut buckets: Vec<BTreeMap<Monomial, Complex64>> = vec![BTreeMap::new(); n_max + 1];
    for (m, coeff) in p.terms() {
        let mut exps = m.exponents().to_vec();
        let n = exps.remove(c.index()) as usize;
        buckets[n].insert(Monomial::new(exps), *coeff);
    }
    let coefficients = buckets
        .into_iter()
        .map(|b| CreationPolynomial::from_raw_terms(&remaining, b))
        .collect();
    Ok(ModeExpansion {
        measured: c,
        zero: CreationPolynomial::zero(&remaining),
        source,
        remaining,
        coefficients,
    })
}

/// Largest measured-mode power over a set of expansions (`n_s` of a state set).
pub fn set_max_degree<'a, I>(expansions: I) -> Option<u32>
where
    I: IntoIterator<Item = &'a ModeExpansion>,
{
    expansions.into_iter().filter_map(ModeExpansion::max_degree).max()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalState {
    pub outcome: u32,
    /// Unnormalized `Q^(N)` on the remaining modes.
    pub state: CreationPolynomial,
    pub weight: f64,
}

/// Conditional state and probability for observing `n` photons in mode `c`.
pub fn condition(total: &CreationPolynomial, c: ModeId, n: u32) -> Result<ConditionalState> {
    let norm = total.norm_sqr();
    if total.is_zero() || norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let expansion = expand_by_mode(total, c)?;
    Ok(conditional_from_expansion(&expansion, norm, n))
}

fn conditional_from_expansion(expansion: &ModeExpansion, norm: f64, n: u32) -> ConditionalState {
    let state = expansion.coefficient(n as i64).clone();
    let weight = if state.is_zero() {
        0.0
    } else {
        factorial(n) * state.norm_sqr() / norm
    };
    ConditionalState {
        outcome: n,
        state,
        weight,
    }
}

/// Probabilities of every photon count `0..=deg_c(total)` in mode `c`.
pub fn outcome_distribution(total: &CreationPolynomial, c: ModeId) -> Result<Vec<(u32, f64)>> {
    let norm = total.norm_sqr();
    if total.is_zero() || norm == 0.0 {
        return Err(Error::ZeroState);
    }
    let expansion = expand_by_mode(total, c)?;
    let n_max = expansion.max_degree().unwrap_or(0);
    Ok((0..=n_max)
        .map(|n| (n, conditional_from_expansion(&expansion, norm, n).weight))
        .collect())
}

/// History-dependent sequence of networks and counting stages.
///
/// Every stage first applies its network to the surviving modes, then
/// counts photons in `measure`. Outcomes without a branch end the cascade.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeStrategy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkSpec>,
    pub measure: ModeRef,
    #[serde(default, deserialize_with = "branch_keys")]
    pub branches: BTreeMap<u32, Branch>,
}

fn branch_keys<'de, D: serde::Deserializer<'de>>(
    d: D,
) -> std::result::Result<BTreeMap<u32, Branch>, D::Error> {
    let raw = BTreeMap::<String, Branch>::deserialize(d)?;
    raw.into_iter()
        .map(|(k, v)| {
            k.parse::<u32>()
                .map(|n| (n, v))
                .map_err(|_| serde::de::Error::custom(format!("branch key {k:?} is not a photon count")))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Branch {
    Leaf(String),
    Stage(Box<CascadeStrategy>),
}

impl CascadeStrategy {
    /// A single counting stage with no follow-up.
    pub fn single(network: Option<NetworkSpec>, measure: ModeRef) -> Self {
        Self {
            network,
            measure,
            branches: BTreeMap::new(),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self
            .branches
            .values()
            .map(|b| match b {
                Branch::Leaf(_) => 0,
                Branch::Stage(s) => s.depth(),
            })
            .max()
            .unwrap_or(0)
    }

    /// Rejects branches keyed on outcomes above `max_photons`, the largest
    /// photon number any input could put into the measured mode.
    pub fn check_reachable(&self, max_photons: u32) -> Result<()> {
        self.check_reachable_from(&mut Vec::new(), max_photons)
    }

    fn check_reachable_from(&self, history: &mut Vec<u32>, left: u32) -> Result<()> {
        for (&n, branch) in &self.branches {
            if n > left {
                return Err(Error::UnreachableBranch {
                    history: history.clone(),
                    outcome: n,
                });
            }
            if let Branch::Stage(next) = branch {
                history.push(n);
                next.check_reachable_from(history, left - n)?;
                history.pop();
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CascadeStage {
    pub measured: String,
    pub outcomes: Vec<CascadeOutcome>,
}

#[derive(Clone, Debug)]
pub struct CascadeOutcome {
    pub history: Vec<u32>,
    /// Probability of the whole history.
    pub weight: f64,
    /// Probability of the last outcome given the earlier ones.
    pub conditional_weight: f64,
    pub zero_weight: bool,
    /// Unnormalized state of the modes still in play.
    pub state: CreationPolynomial,
    pub label: Option<String>,
    pub next: Option<CascadeStage>,
}

impl CascadeOutcome {
    pub fn measured_photons(&self) -> u32 {
        self.history.iter().sum()
    }

    /// Photons left in the surviving modes, when that number is definite.
    pub fn remaining_photons(&self) -> Option<u32> {
        if self.state.is_homogeneous() {
            self.state.degree()
        } else {
            None
        }
    }
}

impl CascadeStage {
    /// Terminal outcomes in history-lexicographic order.
    pub fn leaves(&self) -> Vec<&CascadeOutcome> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a CascadeOutcome>) {
        for o in &self.outcomes {
            match &o.next {
                Some(stage) => stage.collect_leaves(out),
                None => out.push(o),
            }
        }
    }

    pub fn to_json(&self) -> CascadeStageJson {
        CascadeStageJson {
            measured: self.measured.clone(),
            outcomes: self
                .outcomes
                .iter()
                .map(|o| CascadeOutcomeJson {
                    history: o.history.clone(),
                    weight: sig12(o.weight),
                    zero_weight: o.zero_weight,
                    label: o.label.clone(),
                    state: o.state.to_json(),
                    next: o.next.as_ref().map(|s| Box::new(s.to_json())),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeStageJson {
    pub measured: String,
    pub outcomes: Vec<CascadeOutcomeJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeOutcomeJson {
    pub history: Vec<u32>,
    pub weight: f64,
    pub zero_weight: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub state: crate::poly::PolynomialJson,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub next: Option<Box<CascadeStageJson>>,
}

/// Runs `strategy` on `input` and returns the full outcome tree, zero-weight
/// branches included.
pub fn run_cascade(input: &CreationPolynomial, strategy: &CascadeStrategy) -> Result<CascadeStage> {
    if input.norm_sqr() == 0.0 {
        return Err(Error::ZeroState);
    }
    let root_labels = input.registry().labels().to_vec();
    run_stage(input, strategy, &[], 1.0, &root_labels)
}

fn run_stage(
    state: &CreationPolynomial,
    strategy: &CascadeStrategy,
    history: &[u32],
    prefix_weight: f64,
    root_labels: &[String],
) -> Result<CascadeStage> {
    let registry = Arc::clone(state.registry());
    let c = match strategy.measure.resolve(&registry) {
        Ok(c) => c,
        Err(_) => {
            if let ModeRef::Label(l) = &strategy.measure {
                if root_labels.contains(l) {
                    return Err(Error::ConsumedMode(l.clone()));
                }
            }
            return Err(Error::UnknownMode(strategy.measure.to_string()));
        }
    };
    let net = match &strategy.network {
        Some(spec) => spec.build(&registry)?,
        None => LinearNetwork::identity(&registry),
    };
    let out = net.substitute(state)?;
    let norm = out.norm_sqr();
    let expansion = expand_by_mode(&out, c)?;
    let n_max = expansion.max_degree().unwrap_or(0);

    let mut outcomes = Vec::with_capacity(n_max as usize + 1);
    for n in 0..=n_max {
        let cond = conditional_from_expansion(&expansion, norm, n);
        let mut h = history.to_vec();
        h.push(n);
        let zero_weight = cond.weight < ZERO_WEIGHT;
        let (label, next) = match strategy.branches.get(&n) {
            Some(Branch::Leaf(l)) => (Some(l.clone()), None),
            Some(Branch::Stage(sub)) if !zero_weight => (
                None,
                Some(run_stage(
                    &cond.state,
                    sub,
                    &h,
                    prefix_weight * cond.weight,
                    root_labels,
                )?),
            ),
            _ => (None, None),
        };
        outcomes.push(CascadeOutcome {
            history: h,
            weight: prefix_weight * cond.weight,
            conditional_weight: cond.weight,
            zero_weight,
            state: cond.state,
            label,
            next,
        });
    }
    Ok(CascadeStage {
        measured: registry.label(c).to_string(),
        outcomes,
    })
}
