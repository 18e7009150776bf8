//! Polynomials in bosonic creation operators.
//!
//! A state of a set of bosonic modes is written as `P(a†_1, ..., a†_M)|0⟩`,
//! where `P` is a finite sum of monomials with complex coefficients.
//! Creation operators on distinct (or equal) modes commute, so such
//! polynomials form an ordinary commutative algebra; the bosonic structure
//! only shows up in inner products (`⟨0|a^m a†^m|0⟩ = m!`) and when
//! annihilation operators act on a state.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PHOTON_CAP: u32 = 20;
pub const DEFAULT_PRUNE_THRESHOLD: f64 = 1e-12;

/// Largest `n` for which `n!` is finite in double precision.
const MAX_FACTORIAL: u32 = 170;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(MAX_FACTORIAL as usize + 1);
        t.push(1.0);
        for n in 1..=MAX_FACTORIAL {
            let prev = t[n as usize - 1];
            t.push(prev * n as f64);
        }
        t
    })
}

/// `n!` in double precision. Callers stay below the photon cap, which is
/// itself bounded by 170.
pub fn factorial(n: u32) -> f64 {
    factorial_table()[n as usize]
}

/// Knobs shared by every polynomial living on a registry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgebraConfig {
    /// Maximal total photon number of any polynomial.
    pub photon_cap: u32,
    /// Terms with `|c| < prune_threshold * max|c|` are dropped.
    pub prune_threshold: f64,
}

impl Default for AlgebraConfig {
    fn default() -> Self {
        Self {
            photon_cap: DEFAULT_PHOTON_CAP,
            prune_threshold: DEFAULT_PRUNE_THRESHOLD,
        }
    }
}

/// Position of a mode inside a [`ModeRegistry`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeId(usize);

impl ModeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered list of uniquely labelled modes.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeRegistry {
    labels: Vec<String>,
    config: AlgebraConfig,
}

impl ModeRegistry {
    pub fn new<I, S>(labels: I) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self::with_config(labels, AlgebraConfig::default())
    }

    pub fn with_config<I, S>(labels: I, config: AlgebraConfig) -> Result<Arc<Self>>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if config.photon_cap > MAX_FACTORIAL {
            return Err(Error::Structural(format!(
                "photon cap {} exceeds {}",
                config.photon_cap, MAX_FACTORIAL
            )));
        }
        if !(config.prune_threshold >= 0.0 && config.prune_threshold < 1.0) {
            return Err(Error::Structural(format!(
                "prune threshold {} must lie in [0, 1)",
                config.prune_threshold
            )));
        }
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::Structural("empty mode label".into()));
            }
            if labels[..i].contains(l) {
                return Err(Error::Structural(format!("duplicate mode label `{l}`")));
            }
        }
        Ok(Arc::new(Self { labels, config }))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn config(&self) -> AlgebraConfig {
        self.config
    }

    pub fn label(&self, mode: ModeId) -> &str {
        &self.labels[mode.0]
    }

    pub fn mode(&self, label: &str) -> Result<ModeId> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(ModeId)
            .ok_or_else(|| Error::UnknownMode(label.to_string()))
    }

    pub fn mode_at(&self, index: usize) -> Result<ModeId> {
        if index < self.labels.len() {
            Ok(ModeId(index))
        } else {
            Err(Error::UnknownMode(format!("#{index}")))
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = ModeId> {
        (0..self.labels.len()).map(ModeId)
    }

    /// Registry of the modes that remain once `mode` has been measured.
    pub fn without(&self, mode: ModeId) -> Arc<Self> {
        let mut labels = self.labels.clone();
        labels.remove(mode.0);
        Arc::new(Self {
            labels,
            config: self.config,
        })
    }
}

pub(crate) fn same_registry(a: &Arc<ModeRegistry>, b: &Arc<ModeRegistry>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Occupation multi-index: one exponent per registry mode.
///
/// Ordered graded-lexicographically: lower total degree first, then the
/// larger exponent on the earlier mode first, so `a1^2 < a1 a2 < a2^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Monomial(Box<[u32]>);

impl Monomial {
    pub fn new(exponents: impl Into<Box<[u32]>>) -> Self {
        Self(exponents.into())
    }

    pub fn one(modes: usize) -> Self {
        Self(vec![0; modes].into())
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `Π_i m_i!`, i.e. `⟨0|a^m a†^m|0⟩`.
    pub fn factorial_weight(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e)).product()
    }

    fn times(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Finite complex combination of creation-operator monomials.
#[derive(Clone, Debug)]
pub struct CreationPolynomial {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<Monomial, Complex64>,
}

impl PartialEq for CreationPolynomial {
    fn eq(&self, other: &Self) -> bool {
        same_registry(&self.registry, &other.registry) && self.terms == other.terms
    }
}

impl CreationPolynomial {
    pub fn zero(registry: &Arc<ModeRegistry>) -> Self {
        Self {
            registry: Arc::clone(registry),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(registry: &Arc<ModeRegistry>, value: Complex64) -> Self {
        Self::from_map(
            registry,
            BTreeMap::from([(Monomial::one(registry.len()), value)]),
        )
    }

    /// The constant polynomial `1`, i.e. the vacuum.
    pub fn one(registry: &Arc<ModeRegistry>) -> Self {
        Self::constant(registry, Complex64::new(1.0, 0.0))
    }

    /// A single creation operator `a†_mode`.
    pub fn creation(registry: &Arc<ModeRegistry>, mode: ModeId) -> Self {
        let mut exps = vec![0; registry.len()];
        exps[mode.0] = 1;
        Self::from_map(
            registry,
            BTreeMap::from([(Monomial::new(exps), Complex64::new(1.0, 0.0))]),
        )
    }

    pub fn monomial(
        registry: &Arc<ModeRegistry>,
        exponents: &[u32],
        coeff: Complex64,
    ) -> Result<Self> {
        Self::from_terms(registry, [(exponents.to_vec(), coeff)])
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// exponent vectors are summed.
    pub fn from_terms<I>(registry: &Arc<ModeRegistry>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Complex64)>,
    {
        let cap = registry.config.photon_cap;
        let mut map: BTreeMap<Monomial, Complex64> = BTreeMap::new();
        for (exps, c) in terms {
            if exps.len() != registry.len() {
                return Err(Error::Structural(format!(
                    "exponent vector of length {} on a registry of {} modes",
                    exps.len(),
                    registry.len()
                )));
            }
            if !(c.re.is_finite() && c.im.is_finite()) {
                return Err(Error::Structural("non-finite coefficient".into()));
            }
            let m = Monomial::new(exps);
            let degree = m.degree();
            if degree > cap {
                return Err(Error::PhotonCap { degree, cap });
            }
            *map.entry(m).or_default() += c;
        }
        Ok(Self::from_map(registry, map))
    }

    /// Applies the pruning pass.
    fn from_map(registry: &Arc<ModeRegistry>, mut terms: BTreeMap<Monomial, Complex64>) -> Self {
        let max = terms.values().map(|c| c.norm()).fold(0.0, f64::max);
        let cut = registry.config.prune_threshold * max;
        terms.retain(|_, c| c.norm() > 0.0 && c.norm() >= cut);
        Self {
            registry: Arc::clone(registry),
            terms,
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exponents: &[u32]) -> Complex64 {
        self.terms
            .get(&Monomial::new(exponents.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    /// Maximal total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().next_back().map(Monomial::degree)
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degrees = self.terms.keys().map(Monomial::degree);
        match degrees.next() {
            None => true,
            Some(d) => degrees.all(|e| e == d),
        }
    }

    /// Highest power of `a†_mode` appearing in any term.
    pub fn degree_in(&self, mode: ModeId) -> Option<u32> {
        self.terms.keys().map(|m| m.0[mode.0]).max()
    }

    /// Flags, per registry mode, whether any term carries that mode.
    pub fn support(&self) -> Vec<bool> {
        let mut used = vec![false; self.registry.len()];
        for m in self.terms.keys() {
            for (u, &e) in used.iter_mut().zip(m.0.iter()) {
                *u |= e > 0;
            }
        }
        used
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn check_registry(&self, other: &Self) -> Result<()> {
        if same_registry(&self.registry, &other.registry) {
            Ok(())
        } else {
            Err(Error::RegistryMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_registry(other)?;
        let mut terms = self.terms.clone();
        for (m, c) in &other.terms {
            *terms.entry(m.clone()).or_default() += c;
        }
        Ok(Self::from_map(&self.registry, terms))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| (m.clone(), c * factor))
            .collect();
        Self::from_map(&self.registry, terms)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_registry(other)?;
        if let (Some(a), Some(b)) = (self.degree(), other.degree()) {
            let cap = self.registry.config.photon_cap;
            if a + b > cap {
                return Err(Error::PhotonCap { degree: a + b, cap });
            }
        }
        let mut terms: BTreeMap<Monomial, Complex64> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                *terms.entry(ma.times(mb)).or_default() += ca * cb;
            }
        }
        Ok(Self::from_map(&self.registry, terms))
    }

    pub fn pow(&self, exponent: u32) -> Result<Self> {
        let mut acc = Self::one(&self.registry);
        for _ in 0..exponent {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// `⟨0|p† q|0⟩`, conjugate-linear in `self`.
    pub fn vacuum_inner_product(&self, other: &Self) -> Result<Complex64> {
        self.check_registry(other)?;
        let (small, large, flip) = if self.terms.len() <= other.terms.len() {
            (&self.terms, &other.terms, false)
        } else {
            (&other.terms, &self.terms, true)
        };
        let mut acc = Complex64::default();
        for (m, c) in small {
            if let Some(d) = large.get(m) {
                let (p, q) = if flip { (d, c) } else { (c, d) };
                acc += p.conj() * q * m.factorial_weight();
            }
        }
        Ok(acc)
    }

    /// `‖p|0⟩‖²`.
    pub fn norm_sqr(&self) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| c.norm_sqr() * m.factorial_weight())
            .sum()
    }

    /// Reads each monomial of `self` as a string of annihilation operators
    /// (coefficients taken as they are) and applies it to `other|0⟩`.
    pub fn apply_annihilation_contraction(&self, other: &Self) -> Result<Self> {
        self.contract(other, false)
    }

    /// `p† q|0⟩`: the adjoint of `self` acting on `other|0⟩`.
    pub fn adjoint_apply(&self, other: &Self) -> Result<Self> {
        self.contract(other, true)
    }

    fn contract(&self, other: &Self, conjugate: bool) -> Result<Self> {
        self.check_registry(other)?;
        let mut terms: BTreeMap<Monomial, Complex64> = BTreeMap::new();
        for (ma, ca) in &self.terms {
            let ca = if conjugate { ca.conj() } else { *ca };
            for (mb, cb) in &other.terms {
                // a^e a†^f |0⟩ = f!/(f-e)! a†^(f-e) |0⟩ for f >= e, else 0.
                let mut weight = 1.0;
                let mut exps = Vec::with_capacity(ma.0.len());
                let mut vanishes = false;
                for (&e, &f) in ma.0.iter().zip(mb.0.iter()) {
                    if e > f {
                        vanishes = true;
                        break;
                    }
                    weight *= factorial(f) / factorial(f - e);
                    exps.push(f - e);
                }
                if !vanishes {
                    *terms.entry(Monomial::new(exps)).or_default() += ca * cb * weight;
                }
            }
        }
        Ok(Self::from_map(&self.registry, terms))
    }

    pub(crate) fn from_raw_terms(
        registry: &Arc<ModeRegistry>,
        terms: BTreeMap<Monomial, Complex64>,
    ) -> Self {
        Self::from_map(registry, terms)
    }

    /// Entrywise comparison: `max |p_m - q_m| <= tol * max(1, max |coeff|)`.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        let Ok(diff) = self.sub(other) else {
            return false;
        };
        let scale = self.max_abs_coeff().max(other.max_abs_coeff()).max(1.0);
        diff.max_abs_coeff() <= tol * scale
    }

    pub fn to_json(&self) -> PolynomialJson {
        PolynomialJson {
            modes: self.registry.labels.clone(),
            terms: self.terms_json(),
        }
    }

    pub fn terms_json(&self) -> Vec<TermJson> {
        self.terms
            .iter()
            .map(|(m, c)| TermJson {
                exp: m.0.to_vec(),
                re: c.re,
                im: c.im,
            })
            .collect()
    }

    /// Reads a serialized polynomial, creating a fresh registry from its mode list.
    pub fn from_json(json: &PolynomialJson, config: AlgebraConfig) -> Result<Self> {
        let registry = ModeRegistry::with_config(json.modes.iter().cloned(), config)?;
        Self::from_terms_json(&registry, &json.terms)
    }

    /// Reads a serialized polynomial onto an existing registry; the mode
    /// lists have to agree.
    pub fn from_json_on(json: &PolynomialJson, registry: &Arc<ModeRegistry>) -> Result<Self> {
        if json.modes != registry.labels {
            return Err(Error::Schema(format!(
                "polynomial modes {:?} differ from registry {:?}",
                json.modes, registry.labels
            )));
        }
        Self::from_terms_json(registry, &json.terms)
    }

    pub fn from_terms_json(registry: &Arc<ModeRegistry>, terms: &[TermJson]) -> Result<Self> {
        Self::from_terms(
            registry,
            terms
                .iter()
                .map(|t| (t.exp.clone(), Complex64::new(t.re, t.im))),
        )
    }
}

impl fmt::Display for CreationPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({}{:+}i)", c.re, c.im)?;
            for (label, &e) in self.registry.labels.iter().zip(m.0.iter()) {
                match e {
                    0 => {}
                    1 => write!(f, " {label}†")?,
                    _ => write!(f, " {label}†^{e}")?,
                }
            }
        }
        Ok(())
    }
}

/// Wire form of a polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialJson {
    pub modes: Vec<String>,
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermJson {
    pub exp: Vec<u32>,
    pub re: f64,
    pub im: f64,
}

fn binomial(n: u32, k: u32) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Normal ordering of `c^m c†^n` for a single mode:
/// `c^m c†^n = Σ_k k!·C(m,k)·C(n,k) · c†^(n-k) c^(m-k)`, `0 <= k <= min(m, n)`.
///
/// Returns the pairs `(k, coefficient)`.
pub fn normal_order_pair(m: u32, n: u32) -> Vec<(u32, u128)> {
    let mut k_fact: u128 = 1;
    (0..=m.min(n))
        .map(|k| {
            if k > 0 {
                k_fact *= k as u128;
            }
            (k, k_fact * binomial(m, k) * binomial(n, k))
        })
        .collect()
}

/// Exact binomial coefficient as a float, for the combinatorial weights of
/// the coefficient recurrences.
pub fn binomial_f64(n: u32, k: u32) -> f64 {
    binomial(n, k) as f64
}
