//! Zero-error identification of states from a known orthogonal set.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{
    condition, expand_by_mode, run_cascade, set_max_degree, CascadeStage, CascadeStrategy,
    ZERO_WEIGHT,
};
use crate::network::LinearNetwork;
use crate::nogo::{overlap_norms, verify_setup, NoGoSetup, VerifyOptions};
use crate::poly::{same_registry, CreationPolynomial, ModeId};
use crate::report::{sig12, ComplexOut};

/// Input orthogonality tolerance, relative to `max(1, ‖ψ_i‖‖ψ_j‖)`.
pub const INPUT_ORTHOGONALITY_TOL: f64 = 1e-10;
/// Conditional-state orthogonality tolerance, relative to
/// `max(1, ‖ψ_i^N‖‖ψ_j^N‖)`.
pub const STAGE_ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct DiscriminationInstance {
    states: Vec<CreationPolynomial>,
    aux: CreationPolynomial,
    strategy: Option<CascadeStrategy>,
}

impl DiscriminationInstance {
    pub fn new(
        states: Vec<CreationPolynomial>,
        aux: CreationPolynomial,
        strategy: Option<CascadeStrategy>,
    ) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::Degenerate("empty state list".into()));
        };
        let registry = first.registry().clone();
        if !same_registry(&registry, aux.registry())
            || states.iter().any(|s| !same_registry(&registry, s.registry()))
        {
            return Err(Error::RegistryMismatch);
        }
        if aux.is_zero() {
            return Err(Error::Degenerate("auxiliary polynomial is zero".into()));
        }
        let mut degree = None;
        for (k, s) in states.iter().enumerate() {
            if s.is_zero() || !s.is_homogeneous() {
                return Err(Error::NotHomogeneous(format!(
                    "state {k} must be a nonzero homogeneous polynomial"
                )));
            }
            let d = s.degree().unwrap_or(0);
            if *degree.get_or_insert(d) != d {
                return Err(Error::NotHomogeneous(format!(
                    "state {k} has {d} photons, expected {}",
                    degree.unwrap_or(0)
                )));
            }
        }
        for i in 0..states.len() {
            for j in i + 1..states.len() {
                let ip = states[i].vacuum_inner_product(&states[j])?.norm();
                let scale = (states[i].norm_sqr() * states[j].norm_sqr()).sqrt().max(1.0);
                if ip > INPUT_ORTHOGONALITY_TOL * scale {
                    return Err(Error::Structural(format!(
                        "states {i} and {j} are not orthogonal (|<i|j>| = {ip:.3e})"
                    )));
                }
            }
        }
        Ok(Self {
            states,
            aux,
            strategy,
        })
    }

    pub fn states(&self) -> &[CreationPolynomial] {
        &self.states
    }

    pub fn aux(&self) -> &CreationPolynomial {
        &self.aux
    }

    pub fn strategy(&self) -> Option<&CascadeStrategy> {
        self.strategy.as_ref()
    }

    /// `P_aux P_i` for every state.
    pub fn inputs(&self) -> Result<Vec<CreationPolynomial>> {
        self.states.iter().map(|s| self.aux.mul(s)).collect()
    }

    pub fn with_states(&self, states: Vec<CreationPolynomial>) -> Result<Self> {
        Self::new(states, self.aux.clone(), self.strategy.clone())
    }

    pub fn without_aux(&self) -> Self {
        Self {
            states: self.states.clone(),
            aux: CreationPolynomial::one(self.aux.registry()),
            strategy: self.strategy.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutcomeCheck {
    pub i: usize,
    pub j: usize,
    pub outcome: u32,
    pub inner_product: Complex64,
    pub weight_i: f64,
    pub weight_j: f64,
    /// `|⟨ψ_i^N|ψ_j^N⟩|` within tolerance of zero.
    pub orthogonal: bool,
    /// At least one conditional weight below [`ZERO_WEIGHT`].
    pub vacuous: bool,
}

impl OutcomeCheck {
    pub fn distinguished(&self) -> bool {
        self.orthogonal || self.vacuous
    }
}

#[derive(Clone, Debug)]
pub struct StageVerdict {
    pub measured: String,
    pub max_outcome: u32,
    pub checks: Vec<OutcomeCheck>,
}

impl StageVerdict {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(OutcomeCheck::distinguished)
    }

    pub fn to_json(&self) -> StageVerdictJson {
        StageVerdictJson {
            measured: self.measured.clone(),
            max_outcome: self.max_outcome,
            passed: self.passed(),
            checks: self
                .checks
                .iter()
                .map(|c| OutcomeCheckJson {
                    i: c.i,
                    j: c.j,
                    outcome: c.outcome,
                    inner_product: c.inner_product.into(),
                    weight_i: sig12(c.weight_i),
                    weight_j: sig12(c.weight_j),
                    orthogonal: c.orthogonal,
                    vacuous: c.vacuous,
                    distinguished: c.distinguished(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OutcomeCheckJson {
    pub i: usize,
    pub j: usize,
    pub outcome: u32,
    pub inner_product: ComplexOut,
    pub weight_i: f64,
    pub weight_j: f64,
    pub orthogonal: bool,
    pub vacuous: bool,
    pub distinguished: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageVerdictJson {
    pub measured: String,
    pub max_outcome: u32,
    pub passed: bool,
    pub checks: Vec<OutcomeCheckJson>,
}

/// Pairwise conditional-state orthogonality after one network and one
/// photon count on `c`, for every outcome `N = 0..=n_a + n_s`.
pub fn check_stage_orthogonality(
    instance: &DiscriminationInstance,
    net: &LinearNetwork,
    c: ModeId,
) -> Result<StageVerdict> {
    let outputs = instance
        .inputs()?
        .iter()
        .map(|p| net.substitute(p))
        .collect::<Result<Vec<_>>>()?;
    let expansions = outputs
        .iter()
        .map(|p| expand_by_mode(p, c))
        .collect::<Result<Vec<_>>>()?;
    let max_outcome = set_max_degree(&expansions).unwrap_or(0);
    let mut conditioned = Vec::with_capacity(outputs.len());
    for p in &outputs {
        conditioned.push(
            (0..=max_outcome)
                .map(|n| condition(p, c, n))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut checks = Vec::new();
    for i in 0..outputs.len() {
        for j in i + 1..outputs.len() {
            for n in 0..=max_outcome {
                let a = &conditioned[i][n as usize];
                let b = &conditioned[j][n as usize];
                let ip = a.state.vacuum_inner_product(&b.state)?;
                let scale = (a.state.norm_sqr() * b.state.norm_sqr()).sqrt().max(1.0);
                checks.push(OutcomeCheck {
                    i,
                    j,
                    outcome: n,
                    inner_product: ip,
                    weight_i: a.weight,
                    weight_j: b.weight,
                    orthogonal: ip.norm() <= STAGE_ORTHOGONALITY_TOL * scale,
                    vacuous: a.weight < ZERO_WEIGHT || b.weight < ZERO_WEIGHT,
                });
            }
        }
    }
    Ok(StageVerdict {
        measured: net.registry().label(c).to_string(),
        max_outcome,
        checks,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LeafReport {
    pub history: Vec<u32>,
    pub label: Option<String>,
    /// `(state index, weight)` for every state reaching this leaf.
    pub reached_by: Vec<(usize, f64)>,
}

impl LeafReport {
    pub fn ambiguous(&self) -> bool {
        self.reached_by.len() > 1
    }

    /// Unordered pairs of states that share this leaf.
    pub fn offending_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (a, &(i, _)) in self.reached_by.iter().enumerate() {
            for &(j, _) in &self.reached_by[a + 1..] {
                out.push((i, j));
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct CascadeVerdict {
    pub leaves: Vec<LeafReport>,
    pub trees: Vec<CascadeStage>,
}

impl CascadeVerdict {
    pub fn passed(&self) -> bool {
        !self.leaves.iter().any(LeafReport::ambiguous)
    }

    pub fn ambiguous_leaves(&self) -> impl Iterator<Item = &LeafReport> {
        self.leaves.iter().filter(|l| l.ambiguous())
    }

    pub fn to_json(&self) -> CascadeVerdictJson {
        CascadeVerdictJson {
            passed: self.passed(),
            leaves: self
                .leaves
                .iter()
                .map(|l| LeafReportJson {
                    history: l.history.clone(),
                    label: l.label.clone(),
                    ambiguous: l.ambiguous(),
                    reached_by: l
                        .reached_by
                        .iter()
                        .map(|&(state, w)| StateWeightJson {
                            state,
                            weight: sig12(w),
                        })
                        .collect(),
                    offending_pairs: l.offending_pairs(),
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StateWeightJson {
    pub state: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafReportJson {
    pub history: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub ambiguous: bool,
    pub reached_by: Vec<StateWeightJson>,
    pub offending_pairs: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CascadeVerdictJson {
    pub passed: bool,
    pub leaves: Vec<LeafReportJson>,
}

/// Runs the strategy on every `P_aux P_i`. The verdict passes iff no
/// nonzero-weight leaf is reached by more than one state.
pub fn check_cascade_discrimination(instance: &DiscriminationInstance) -> Result<CascadeVerdict> {
    let strategy = instance
        .strategy()
        .ok_or_else(|| Error::Structural("instance has no strategy".into()))?;
    let inputs = instance.inputs()?;
    let max_photons = inputs.iter().filter_map(|p| p.degree()).max().unwrap_or(0);
    strategy.check_reachable(max_photons)?;

    let mut leaves: BTreeMap<Vec<u32>, LeafReport> = BTreeMap::new();
    let mut trees = Vec::with_capacity(inputs.len());
    for (k, input) in inputs.iter().enumerate() {
        let tree = run_cascade(input, strategy)?;
        for leaf in tree.leaves() {
            if leaf.zero_weight {
                continue;
            }
            leaves
                .entry(leaf.history.clone())
                .or_insert_with(|| LeafReport {
                    history: leaf.history.clone(),
                    label: leaf.label.clone(),
                    reached_by: Vec::new(),
                })
                .reached_by
                .push((k, leaf.weight));
        }
        trees.push(tree);
    }
    Ok(CascadeVerdict {
        leaves: leaves.into_values().collect(),
        trees,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbePair {
    pub i: usize,
    pub j: usize,
    pub u_prime_norm: f64,
    pub v_norm: f64,
    pub sigma_min: f64,
    pub u_prime_zero: bool,
    pub v_zero: bool,
    /// `‖V‖ >= σ_min(M') ‖U'‖ - 1e-8`.
    pub bound_ok: bool,
    /// `U' != 0` implies `V != 0`.
    pub implication_ok: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub m_prime: DMatrix<f64>,
    pub pairs: Vec<ProbePair>,
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.bound_ok && p.implication_ok)
    }
}

/// Compares the overlaps with and without the auxiliary state for every
/// pair `i < j`.
pub fn necessary_condition_probe(
    instance: &DiscriminationInstance,
    net: &LinearNetwork,
    c: ModeId,
) -> Result<ProbeReport> {
    let setup = NoGoSetup::new(instance.aux(), instance.states(), net, c)?;
    let report = verify_setup(&setup, &VerifyOptions::default())?;
    let pairs = report
        .pairs
        .iter()
        .filter(|p| p.i < p.j)
        .map(|p| {
            let (v_norm, u_prime_norm, sigma_min) = overlap_norms(&report, p);
            ProbePair {
                i: p.i,
                j: p.j,
                u_prime_norm,
                v_norm,
                sigma_min,
                u_prime_zero: p.u_prime_zero,
                v_zero: p.v_zero,
                bound_ok: v_norm >= sigma_min * u_prime_norm - 1e-8,
                implication_ok: p.u_prime_zero || !p.v_zero,
            }
        })
        .collect();
    Ok(ProbeReport {
        m_prime: report.m_prime,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurement::Branch;
    use crate::network::ModeRef;
    use crate::poly::ModeRegistry;
    use std::f64::consts::FRAC_1_SQRT_2;
    use std::sync::Arc;

    fn hadamard(r: &Arc<ModeRegistry>) -> LinearNetwork {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        LinearNetwork::from_matrix(DMatrix::from_row_slice(2, 2, &[h, h, h, -h]), r).unwrap()
    }

    fn plus_minus(r: &Arc<ModeRegistry>) -> Vec<CreationPolynomial> {
        let a1 = CreationPolynomial::creation(r, r.mode("a1").unwrap());
        let a2 = CreationPolynomial::creation(r, r.mode("a2").unwrap());
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        vec![
            a1.add(&a2).unwrap().scale(h),
            a1.sub(&a2).unwrap().scale(h),
        ]
    }

    fn measure_both(network: Option<LinearNetwork>) -> CascadeStrategy {
        let second = CascadeStrategy::single(None, ModeRef::Label("a2".into()));
        CascadeStrategy {
            network: network.map(|n| n.to_spec()),
            measure: ModeRef::Label("a1".into()),
            branches: BTreeMap::from([
                (0, Branch::Stage(Box::new(second.clone()))),
                (1, Branch::Stage(Box::new(second))),
            ]),
        }
    }

    #[test]
    fn disjoint_single_photons() {
        let r = ModeRegistry::new(["a1", "a2"]).unwrap();
        let a1 = CreationPolynomial::creation(&r, r.mode("a1").unwrap());
        let a2 = CreationPolynomial::creation(&r, r.mode("a2").unwrap());
        let inst = DiscriminationInstance::new(
            vec![a1, a2],
            CreationPolynomial::one(&r),
            Some(measure_both(None)),
        )
        .unwrap();
        let stage =
            check_stage_orthogonality(&inst, &LinearNetwork::identity(&r), r.mode("a1").unwrap())
                .unwrap();
        assert!(stage.passed());
        assert!(stage.checks.iter().all(|c| c.vacuous));
        assert!(check_cascade_discrimination(&inst).unwrap().passed());
    }

    #[test]
    fn plus_minus_overlap_without_splitter() {
        let r = ModeRegistry::new(["a1", "a2"]).unwrap();
        let inst =
            DiscriminationInstance::new(plus_minus(&r), CreationPolynomial::one(&r), None).unwrap();
        let stage =
            check_stage_orthogonality(&inst, &LinearNetwork::identity(&r), r.mode("a1").unwrap())
                .unwrap();
        assert!(!stage.passed());
        for c in &stage.checks {
            assert!((c.inner_product.norm() - 0.5).abs() < 1e-12);
            assert!(!c.orthogonal && !c.vacuous);
        }
        let split = check_stage_orthogonality(&inst, &hadamard(&r), r.mode("a1").unwrap()).unwrap();
        assert!(split.passed());
    }

    #[test]
    fn cascade_verdicts() {
        let r = ModeRegistry::new(["a1", "a2"]).unwrap();
        let one = CreationPolynomial::one(&r);
        let fail =
            DiscriminationInstance::new(plus_minus(&r), one.clone(), Some(measure_both(None)))
                .unwrap();
        let v = check_cascade_discrimination(&fail).unwrap();
        assert!(!v.passed());
        let amb: Vec<_> = v.ambiguous_leaves().collect();
        assert_eq!(amb.len(), 2);
        assert_eq!(amb[0].offending_pairs(), vec![(0, 1)]);
        let strategy = CascadeStrategy::single(
            Some(hadamard(&r).to_spec()),
            ModeRef::Label("a1".into()),
        );
        let pass = DiscriminationInstance::new(plus_minus(&r), one, Some(strategy)).unwrap();
        assert!(check_cascade_discrimination(&pass).unwrap().passed());
        let mut reversed = plus_minus(&r);
        reversed.reverse();
        assert!(check_cascade_discrimination(&pass.with_states(reversed).unwrap())
            .unwrap()
            .passed());
    }

    #[test]
    fn rejects_non_orthogonal_inputs() {
        let r = ModeRegistry::new(["a1", "a2"]).unwrap();
        let a1 = CreationPolynomial::creation(&r, r.mode("a1").unwrap());
        let s = plus_minus(&r);
        assert!(matches!(
            DiscriminationInstance::new(vec![a1, s[0].clone()], CreationPolynomial::one(&r), None),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn probe_with_constant_aux() {
        let r = ModeRegistry::new(["a1", "a2"]).unwrap();
        let inst =
            DiscriminationInstance::new(plus_minus(&r), CreationPolynomial::one(&r), None).unwrap();
        let probe =
            necessary_condition_probe(&inst, &LinearNetwork::identity(&r), r.mode("a1").unwrap())
                .unwrap();
        assert!(probe.passed());
        let p = &probe.pairs[0];
        assert!((p.v_norm - p.u_prime_norm).abs() < 1e-14);
        assert!((p.sigma_min - 1.0).abs() < 1e-14);
    }
}
