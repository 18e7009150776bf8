//! Linear relation between outcome overlaps with and without auxiliary photons.
//!
//! Inputs are an auxiliary polynomial `P_aux` on auxiliary modes and a set
//! of homogeneous degree-`L` system polynomials `P_i` on disjoint system
//! modes, mixed by one network and counted on one output mode `c`. With
//! the output expansions `P̃_aux = Σ_n c†^n Q_a^(n)` (top power `n_a`) and
//! `P̃_i = Σ_n c†^n Q_i^(n)` (top power `n_s` over the set), define for a
//! pair `(i, j)`
//!
//! * `V_s  = ⟨ψ_i^N|ψ_j^N⟩` at `N = n_a + n_s - s`, from the conditional
//!   states of the full input `P_aux P_i`,
//! * `U'_p = ⟨0|Q_i^(n_s-p)† Q_j^(n_s-p)|0⟩`,
//!
//! for `s, p = 0..=n_s`. Then `V = M' U'` with `M'` lower triangular, its
//! diagonal equal to `D = ‖Q_a^(n_a)|0⟩‖²`, and its entries depending on
//! the auxiliary state only. This module computes both sides along
//! independent paths and reports the residual.
//!
//! The overlaps of the pieces of the conditional states are
//!
//! ```text
//! C^(s)_{n,m}(i,j) = ⟨0|Q_i^(n_s-n)† Q_a^(n_a-s+n)† Q_a^(n_a-s+m) Q_j^(n_s-m)|0⟩,
//! ```
//!
//! with `V_s = Σ_{n,m} C^(s)_{n,m}`. They satisfy `C_{n,m} = C_{m,n}` and,
//! for `n >= m`,
//!
//! ```text
//! C^(s)_{n,m} = δ_{nm} U'_{n} a_{n_a-s+n}
//!             - Σ_{k=1}^{min(n, s-m)} k! C(n_a-s+m+k, k) C(n_s-n+k, k) C^(s-k)_{n-k,m},
//! ```
//!
//! where `a_q = ‖Q_a^(q)|0⟩‖²`. Unrolling the recursion gives
//! `C^(s)_{n,m} = Σ_p A^(s)_p(n,m) U'_p` with real `A` built from the `a_q`
//! alone, and `M'_{s,p} = Σ_{n,m} A^(s)_p(n,m)`.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{condition, expand_by_mode, set_max_degree, ModeExpansion};
use crate::network::{LinearNetwork, NetworkSpec};
use crate::poly::{
    binomial_f64, factorial, same_registry, AlgebraConfig, CreationPolynomial, ModeId,
    ModeRegistry, PolynomialJson,
};
use crate::random::{haar_unitary, random_homogeneous, random_polynomial};
use crate::report::{complex_vec, sig12, ComplexOut, SCHEMA_VERSION};

/// `k! C(a+k, k) C(b+k, k)`, the weight of the k-th correction term.
fn contraction_weight(k: u32, a: u32, b: u32) -> f64 {
    factorial(k) * binomial_f64(a + k, k) * binomial_f64(b + k, k)
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Output expansions of an auxiliary state and a system state set.
#[derive(Clone, Debug)]
pub struct NoGoSetup {
    measured: ModeId,
    aux_expansion: ModeExpansion,
    state_outputs: Vec<CreationPolynomial>,
    state_expansions: Vec<ModeExpansion>,
    total_outputs: Vec<CreationPolynomial>,
    n_a: u32,
    n_s: u32,
    photons: u32,
}

impl NoGoSetup {
    pub fn new(
        aux: &CreationPolynomial,
        states: &[CreationPolynomial],
        net: &LinearNetwork,
        c: ModeId,
    ) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Degenerate("empty state list".into()));
        }
        if aux.norm_sqr() == 0.0 {
            return Err(Error::Degenerate("auxiliary polynomial is zero".into()));
        }
        let registry = aux.registry();
        if !same_registry(registry, net.registry())
            || states.iter().any(|s| !same_registry(registry, s.registry()))
        {
            return Err(Error::RegistryMismatch);
        }
        let photons = homogeneous_degree(states)?;

        let aux_support = aux.support();
        let mut shared = vec![false; registry.len()];
        for s in states {
            for (k, used) in s.support().into_iter().enumerate() {
                shared[k] |= used && aux_support[k];
            }
        }
        let overlap: Vec<String> = shared
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(k, _)| registry.labels()[k].clone())
            .collect();
        if !overlap.is_empty() {
            return Err(Error::OverlappingSupport(overlap));
        }

        let aux_out = net.substitute(aux)?;
        let aux_expansion = expand_by_mode(&aux_out, c)?;
        let n_a = aux_expansion
            .max_degree()
            .ok_or_else(|| Error::Degenerate("auxiliary output vanishes".into()))?;
        let state_outputs = states
            .iter()
            .map(|s| net.substitute(s))
            .collect::<Result<Vec<_>>>()?;
        let state_expansions = state_outputs
            .iter()
            .map(|s| expand_by_mode(s, c))
            .collect::<Result<Vec<_>>>()?;
        let n_s = set_max_degree(&state_expansions)
            .ok_or_else(|| Error::Degenerate("all system states vanish".into()))?;
        let total_outputs = states
            .iter()
            .map(|s| net.substitute(&aux.mul(s)?))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            measured: c,
            aux_expansion,
            state_outputs,
            state_expansions,
            total_outputs,
            n_a,
            n_s,
            photons,
        })
    }

    pub fn n_a(&self) -> u32 {
        self.n_a
    }

    pub fn n_s(&self) -> u32 {
        self.n_s
    }

    pub fn photons(&self) -> u32 {
        self.photons
    }

    pub fn state_count(&self) -> usize {
        self.state_outputs.len()
    }

    pub fn aux_expansion(&self) -> &ModeExpansion {
        &self.aux_expansion
    }

    pub fn state_expansion(&self, i: usize) -> &ModeExpansion {
        &self.state_expansions[i]
    }

    /// `D = ‖Q_a^(n_a)|0⟩‖²`.
    pub fn d(&self) -> f64 {
        self.aux_expansion.coefficient(self.n_a as i64).norm_sqr()
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        let k = self.state_count();
        if i >= k || j >= k {
            return Err(Error::IndexOutOfRange(format!(
                "state pair ({i}, {j}) with {k} states"
            )));
        }
        Ok(())
    }

    /// `V`, from the conditional states of `P_aux P_i` for
    /// `N = n_a + n_s` down to `n_a`.
    pub fn gram_vector_v(&self, i: usize, j: usize) -> Result<Vec<Complex64>> {
        self.check_pair(i, j)?;
        let top = self.n_a + self.n_s;
        (0..=self.n_s)
            .map(|s| {
                let n = top - s;
                let a = condition(&self.total_outputs[i], self.measured, n)?;
                let b = condition(&self.total_outputs[j], self.measured, n)?;
                a.state.vacuum_inner_product(&b.state)
            })
            .collect()
    }

    /// `U`, from the conditional states of `P_i` alone for `N = n_s` down to 0.
    pub fn gram_vector_u(&self, i: usize, j: usize) -> Result<Vec<Complex64>> {
        self.check_pair(i, j)?;
        (0..=self.n_s)
            .map(|s| {
                let n = self.n_s - s;
                let a = condition(&self.state_outputs[i], self.measured, n)?;
                let b = condition(&self.state_outputs[j], self.measured, n)?;
                a.state.vacuum_inner_product(&b.state)
            })
            .collect()
    }

    /// `U'_p = ⟨0|Q_i^(n_s-p)† Q_j^(n_s-p)|0⟩` for `p = 0..=n_s`.
    pub fn gram_vector_u_prime(&self, i: usize, j: usize) -> Result<Vec<Complex64>> {
        self.check_pair(i, j)?;
        (0..=self.n_s)
            .map(|p| self.u_prime_entry(i, j, p))
            .collect()
    }

    fn u_prime_entry(&self, i: usize, j: usize, p: u32) -> Result<Complex64> {
        let q = self.n_s as i64 - p as i64;
        self.state_expansions[i]
            .coefficient(q)
            .vacuum_inner_product(self.state_expansions[j].coefficient(q))
    }

    fn check_c_indices(&self, s: u32, n: u32, m: u32) -> Result<()> {
        let lo = s.saturating_sub(self.n_a);
        if s > self.n_a + self.n_s || n < lo || n > s || m < lo || m > s {
            return Err(Error::IndexOutOfRange(format!(
                "C^({s})_({n},{m}) needs s <= {} and {lo} <= n, m <= {s}",
                self.n_a + self.n_s
            )));
        }
        Ok(())
    }

    /// The two vectors `Q_a^(n_a-s+n) Q_i^(n_s-n)|0⟩` whose overlap is `C`.
    fn c_factors(
        &self,
        s: u32,
        n: u32,
        i: usize,
    ) -> Result<CreationPolynomial> {
        let qa = self
            .aux_expansion
            .coefficient(self.n_a as i64 - s as i64 + n as i64);
        let qi = self.state_expansions[i].coefficient(self.n_s as i64 - n as i64);
        qa.mul(qi)
    }

    /// `C^(s)_{n,m}(i,j)` evaluated directly as a vacuum overlap.
    pub fn compute_c(&self, s: u32, n: u32, m: u32, i: usize, j: usize) -> Result<Complex64> {
        self.check_pair(i, j)?;
        self.check_c_indices(s, n, m)?;
        let left = self.c_factors(s, n, i)?;
        let right = self.c_factors(s, m, j)?;
        left.vacuum_inner_product(&right)
    }

    /// Cauchy-Schwarz bound `|C^(s)_{n,m}| <= ‖left‖ ‖right‖`, the natural
    /// magnitude to compare `C` values against.
    pub fn c_scale(&self, s: u32, n: u32, m: u32, i: usize, j: usize) -> Result<f64> {
        self.check_pair(i, j)?;
        self.check_c_indices(s, n, m)?;
        let left = self.c_factors(s, n, i)?.norm_sqr();
        let right = self.c_factors(s, m, j)?.norm_sqr();
        Ok((left * right).sqrt())
    }

    /// `C^(s)_{n,m}(i,j)` from the recurrence, valid for `n >= m` and
    /// `s <= n_s`; lower-order values come from the recurrence too, with
    /// the symmetry `C_{n,m} = C_{m,n}` used whenever `n - k < m`.
    pub fn recurrence_c(&self, s: u32, n: u32, m: u32, i: usize, j: usize) -> Result<Complex64> {
        self.check_pair(i, j)?;
        self.check_c_indices(s, n, m)?;
        if n < m {
            return Err(Error::IndexOutOfRange(format!(
                "recurrence needs n >= m, got n={n}, m={m}"
            )));
        }
        if s > self.n_s {
            return Err(Error::IndexOutOfRange(format!(
                "recurrence needs s <= n_s = {}, got {s}",
                self.n_s
            )));
        }
        let u_prime = self.gram_vector_u_prime(i, j)?;
        let mut memo = HashMap::new();
        Ok(self.recurrence_inner(s, n, m, &u_prime, &mut memo))
    }

    fn aux_norm(&self, q: i64) -> f64 {
        self.aux_expansion.coefficient(q).norm_sqr()
    }

    fn recurrence_inner(
        &self,
        s: u32,
        n: u32,
        m: u32,
        u_prime: &[Complex64],
        memo: &mut HashMap<(u32, u32, u32), Complex64>,
    ) -> Complex64 {
        let (n, m) = if n >= m { (n, m) } else { (m, n) };
        if let Some(v) = memo.get(&(s, n, m)) {
            return *v;
        }
        let mut value = Complex64::default();
        if n == m {
            value += u_prime[n as usize]
                * self.aux_norm(self.n_a as i64 - s as i64 + n as i64);
        }
        for k in 1..=n.min(s - m) {
            let w = contraction_weight(k, self.n_a + m - s, self.n_s - n);
            value -= self.recurrence_inner(s - k, n - k, m, u_prime, memo) * w;
        }
        memo.insert((s, n, m), value);
        value
    }

    /// Direct `C^(s)_{n,m}(i,j)` for every `s <= n_s` and admissible `(n, m)`.
    pub fn c_table(&self, i: usize, j: usize) -> Result<BTreeMap<(u32, u32, u32), Complex64>> {
        let mut out = BTreeMap::new();
        for s in 0..=self.n_s {
            for n in s.saturating_sub(self.n_a)..=s {
                for m in s.saturating_sub(self.n_a)..=s {
                    out.insert((s, n, m), self.compute_c(s, n, m, i, j)?);
                }
            }
        }
        Ok(out)
    }

    pub fn coefficient_tables(&self) -> CoefficientTables {
        compute_a_table(&self.aux_expansion, self.n_s)
    }
}

fn homogeneous_degree(states: &[CreationPolynomial]) -> Result<u32> {
    let mut degree = None;
    for (k, s) in states.iter().enumerate() {
        if s.is_zero() {
            return Err(Error::NotHomogeneous(format!("state {k} is zero")));
        }
        if !s.is_homogeneous() {
            return Err(Error::NotHomogeneous(format!("state {k} mixes photon numbers")));
        }
        let d = s.degree().unwrap_or(0);
        match degree {
            None => degree = Some(d),
            Some(e) if e != d => {
                return Err(Error::NotHomogeneous(format!(
                    "state {k} has {d} photons, expected {e}"
                )))
            }
            _ => {}
        }
    }
    Ok(degree.unwrap_or(0))
}

/// Auxiliary-only coefficients: `D`, `A^(s)_p(n,m)` and `B^(s)_p`.
#[derive(Clone, Debug)]
pub struct CoefficientTables {
    pub n_a: u32,
    pub n_s: u32,
    pub d: f64,
    /// `a_q = ‖Q_a^(q)|0⟩‖²` for `q = 0..=n_a`.
    pub aux_norms: Vec<f64>,
    a: BTreeMap<(u32, u32, u32, u32), f64>,
    sums: BTreeMap<(u32, u32), f64>,
}

impl CoefficientTables {
    /// `A^(s)_p(n,m)`; zero outside the stored ranges.
    pub fn a(&self, s: u32, p: u32, n: u32, m: u32) -> f64 {
        self.a.get(&(s, p, n, m)).copied().unwrap_or(0.0)
    }

    /// `Σ_{n,m} A^(s)_p(n,m)`, the `(s, p)` entry of `M'`.
    pub fn m_entry(&self, s: u32, p: u32) -> f64 {
        self.sums.get(&(s, p)).copied().unwrap_or(0.0)
    }

    /// `B^(s)_p`, the entries of `M'` below the diagonal.
    pub fn b(&self, s: u32, p: u32) -> f64 {
        if p < s {
            self.m_entry(s, p)
        } else {
            0.0
        }
    }

    /// Stored `((s, p, n, m), A)` entries.
    pub fn a_entries(&self) -> impl Iterator<Item = (&(u32, u32, u32, u32), &f64)> {
        self.a.iter()
    }
}

/// Unrolls the `C` recurrence into coefficients of `U'`.
///
/// `A^(s)(n,m)` is kept as a vector over `p`; for `n >= m`
/// `A^(s)(n,m) = δ_{nm} a_{n_a-s+n} e_n - Σ_k w_k A^(s-k)(n-k, m)` and the
/// `n < m` half follows by symmetry.
pub fn compute_a_table(aux_expansion: &ModeExpansion, n_s: u32) -> CoefficientTables {
    let n_a = aux_expansion.max_degree().unwrap_or(0);
    let aux_norms: Vec<f64> = (0..=n_a)
        .map(|q| aux_expansion.coefficient(q as i64).norm_sqr())
        .collect();
    let len = n_s as usize + 1;
    let mut vectors: HashMap<(u32, u32, u32), Vec<f64>> = HashMap::new();
    for s in 0..=n_s {
        let lo = s.saturating_sub(n_a);
        for n in lo..=s {
            for m in lo..=n {
                let mut v = vec![0.0; len];
                if n == m {
                    v[n as usize] = aux_norms[(n_a + n - s) as usize];
                }
                for k in 1..=n.min(s - m) {
                    let w = contraction_weight(k, n_a + m - s, n_s - n);
                    let (hi, low) = if n - k >= m { (n - k, m) } else { (m, n - k) };
                    let prev = &vectors[&(s - k, hi, low)];
                    for (x, y) in v.iter_mut().zip(prev) {
                        *x -= w * y;
                    }
                }
                vectors.insert((s, n, m), v);
            }
        }
    }

    let mut a = BTreeMap::new();
    let mut sums = BTreeMap::new();
    for s in 0..=n_s {
        let lo = s.saturating_sub(n_a);
        for n in lo..=s {
            for m in lo..=s {
                let v = &vectors[&(s, n.max(m), n.min(m))];
                for (p, &x) in v.iter().enumerate() {
                    if x != 0.0 {
                        a.insert((s, p as u32, n, m), x);
                        *sums.entry((s, p as u32)).or_insert(0.0) += x;
                    }
                }
            }
        }
    }
    CoefficientTables {
        n_a,
        n_s,
        d: aux_norms[n_a as usize],
        aux_norms,
        a,
        sums,
    }
}

/// `M'_{s,p} = Σ_{n,m} A^(s)_p(n,m)`, rows `s` and columns `p` in `0..=n_s`.
pub fn build_m_prime(tables: &CoefficientTables) -> DMatrix<f64> {
    let n = tables.n_s as usize + 1;
    DMatrix::from_fn(n, n, |s, p| tables.m_entry(s as u32, p as u32))
}

/// Thresholds for [`verify_no_go`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VerifyOptions {
    /// `‖V - M'U'‖_max <= residual_tol * max(1, ‖V‖_max)`.
    pub residual_tol: f64,
    /// `|det M' - D^(n_s+1)| <= det_tol * D^(n_s+1)`.
    pub det_tol: f64,
    /// Relative deviation allowed between each diagonal entry and `D`.
    pub diag_tol: f64,
    /// A vector counts as zero when `‖x‖_max <= zero_tol * scale`.
    pub zero_tol: f64,
    /// Test hook: perturbs `M'` before checking.
    pub corrupt_m_prime: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            det_tol: 1e-8,
            diag_tol: 1e-10,
            zero_tol: 1e-9,
            corrupt_m_prime: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PairReport {
    pub i: usize,
    pub j: usize,
    pub v: Vec<Complex64>,
    pub u: Vec<Complex64>,
    pub u_prime: Vec<Complex64>,
    pub m_u_prime: Vec<Complex64>,
    /// `‖V - M'U'‖_max`.
    pub residual: f64,
    /// `residual / max(1, ‖V‖_max)`.
    pub residual_ratio: f64,
    pub residual_ok: bool,
    pub u_prime_zero: bool,
    pub v_zero: bool,
    /// `U' = 0` exactly when `V = 0` on this pair.
    pub equivalence_ok: bool,
}

#[derive(Clone, Debug)]
pub struct NoGoReport {
    pub n_a: u32,
    pub n_s: u32,
    pub photons: u32,
    pub d: f64,
    pub m_prime: DMatrix<f64>,
    pub det: f64,
    pub d_power: f64,
    /// `|det M' - D^(n_s+1)| / D^(n_s+1)`.
    pub det_deviation: f64,
    /// Largest `|M'_{ss} - D| / D`.
    pub diag_deviation: f64,
    pub triangular: bool,
    pub det_ok: bool,
    pub diag_ok: bool,
    pub pairs: Vec<PairReport>,
}

impl NoGoReport {
    pub fn max_residual_ratio(&self) -> f64 {
        self.pairs
            .iter()
            .map(|p| p.residual_ratio)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.triangular
            && self.det_ok
            && self.diag_ok
            && self
                .pairs
                .iter()
                .all(|p| p.residual_ok && p.equivalence_ok)
    }

    pub fn to_json(&self) -> NoGoReportJson {
        let n = self.m_prime.nrows();
        NoGoReportJson {
            n_a: self.n_a,
            n_s: self.n_s,
            photons: self.photons,
            d: sig12(self.d),
            m_prime: (0..n)
                .map(|r| (0..n).map(|c| sig12(self.m_prime[(r, c)])).collect())
                .collect(),
            det: sig12(self.det),
            d_power: sig12(self.d_power),
            det_deviation: sig12(self.det_deviation),
            diag_deviation: sig12(self.diag_deviation),
            triangular: self.triangular,
            det_ok: self.det_ok,
            diag_ok: self.diag_ok,
            max_residual_ratio: sig12(self.max_residual_ratio()),
            passed: self.passed(),
            pairs: self
                .pairs
                .iter()
                .map(|p| PairReportJson {
                    i: p.i,
                    j: p.j,
                    v: complex_vec(&p.v),
                    u: complex_vec(&p.u),
                    u_prime: complex_vec(&p.u_prime),
                    m_u_prime: complex_vec(&p.m_u_prime),
                    residual: sig12(p.residual),
                    residual_ratio: sig12(p.residual_ratio),
                    residual_ok: p.residual_ok,
                    u_prime_zero: p.u_prime_zero,
                    v_zero: p.v_zero,
                    equivalence_ok: p.equivalence_ok,
                })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReportJson {
    pub i: usize,
    pub j: usize,
    pub v: Vec<ComplexOut>,
    pub u: Vec<ComplexOut>,
    pub u_prime: Vec<ComplexOut>,
    pub m_u_prime: Vec<ComplexOut>,
    pub residual: f64,
    pub residual_ratio: f64,
    pub residual_ok: bool,
    pub u_prime_zero: bool,
    pub v_zero: bool,
    pub equivalence_ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct NoGoReportJson {
    pub n_a: u32,
    pub n_s: u32,
    pub photons: u32,
    pub d: f64,
    pub m_prime: Vec<Vec<f64>>,
    pub det: f64,
    pub d_power: f64,
    pub det_deviation: f64,
    pub diag_deviation: f64,
    pub triangular: bool,
    pub det_ok: bool,
    pub diag_ok: bool,
    pub max_residual_ratio: f64,
    pub passed: bool,
    pub pairs: Vec<PairReportJson>,
}

/// `M'U'` as a complex vector.
pub fn apply_m_prime(m_prime: &DMatrix<f64>, u_prime: &[Complex64]) -> Vec<Complex64> {
    (0..m_prime.nrows())
        .map(|r| {
            (0..m_prime.ncols())
                .map(|c| u_prime[c] * m_prime[(r, c)])
                .sum()
        })
        .collect()
}

/// Checks `V = M'U'`, the triangular shape of `M'`, its diagonal and
/// determinant, and the equivalence `U' = 0 <=> V = 0`, on every pair
/// `i <= j` of `states`.
pub fn verify_no_go(
    aux: &CreationPolynomial,
    states: &[CreationPolynomial],
    net: &LinearNetwork,
    c: ModeId,
    options: &VerifyOptions,
) -> Result<NoGoReport> {
    if states.len() < 2 {
        return Err(Error::Degenerate(format!(
            "need at least two states, got {}",
            states.len()
        )));
    }
    let setup = NoGoSetup::new(aux, states, net, c)?;
    verify_setup(&setup, options)
}

pub fn verify_setup(setup: &NoGoSetup, options: &VerifyOptions) -> Result<NoGoReport> {
    let tables = setup.coefficient_tables();
    let mut m_prime = build_m_prime(&tables);
    if options.corrupt_m_prime {
        let last = m_prime.nrows() - 1;
        m_prime[(last, 0)] += 0.25 * tables.d.max(1.0);
        m_prime[(0, 0)] *= 1.5;
    }
    let n = m_prime.nrows();
    let d = setup.d();
    let d_power = d.powi(n as i32);
    let det = m_prime.clone().lu().determinant();
    let det_deviation = (det - d_power).abs() / d_power;
    let diag_deviation = (0..n)
        .map(|k| (m_prime[(k, k)] - d).abs() / d)
        .fold(0.0, f64::max);
    let triangular = (0..n).all(|r| (r + 1..n).all(|c| m_prime[(r, c)] == 0.0));

    let mut pairs = Vec::new();
    for i in 0..setup.state_count() {
        for j in i..setup.state_count() {
            let v = setup.gram_vector_v(i, j)?;
            let u = setup.gram_vector_u(i, j)?;
            let u_prime = setup.gram_vector_u_prime(i, j)?;
            let m_u_prime = apply_m_prime(&m_prime, &u_prime);
            let residual = v
                .iter()
                .zip(&m_u_prime)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let residual_ratio = residual / max_abs(&v).max(1.0);

            let norm_i = setup.state_outputs[i].norm_sqr().sqrt();
            let norm_j = setup.state_outputs[j].norm_sqr().sqrt();
            let u_scale = (norm_i * norm_j).max(1.0);
            let v_scale = (d.max(tables.aux_norms.iter().sum::<f64>()) * norm_i * norm_j).max(1.0);
            let u_prime_zero = max_abs(&u_prime) <= options.zero_tol * u_scale;
            let v_zero = max_abs(&v) <= options.zero_tol * v_scale;
            pairs.push(PairReport {
                i,
                j,
                v,
                u,
                u_prime,
                m_u_prime,
                residual,
                residual_ratio,
                residual_ok: residual_ratio <= options.residual_tol,
                u_prime_zero,
                v_zero,
                equivalence_ok: u_prime_zero == v_zero,
            });
        }
    }
    Ok(NoGoReport {
        n_a: setup.n_a,
        n_s: setup.n_s,
        photons: setup.photons,
        d,
        det_ok: det_deviation <= options.det_tol,
        diag_ok: diag_deviation <= options.diag_tol,
        m_prime,
        det,
        d_power,
        det_deviation,
        diag_deviation,
        triangular,
        pairs,
    })
}

/// Largest deviation from the commutation identity
/// `Q_a^(n) Q_i^(m)† = Σ_{k>=0} k! C(m+k,k) C(n+k,k) Q_i^(m+k)† Q_a^(n+k)`,
/// both sides applied to `probe|0⟩` on the unmeasured modes.
pub fn commutation_lemma_residual(
    setup: &NoGoSetup,
    i: usize,
    n: u32,
    m: u32,
    probe: &CreationPolynomial,
) -> Result<f64> {
    setup.check_pair(i, i)?;
    let qa = setup.aux_expansion();
    let qi = setup.state_expansion(i);
    let lhs = qa.coefficient(n as i64).mul(&qi.coefficient(m as i64).adjoint_apply(probe)?)?;
    let mut rhs = CreationPolynomial::zero(probe.registry());
    let k_max = (setup.n_s - m.min(setup.n_s)).min(setup.n_a - n.min(setup.n_a));
    for k in 0..=k_max {
        let moved = qi
            .coefficient((m + k) as i64)
            .adjoint_apply(&qa.coefficient((n + k) as i64).mul(probe)?)?;
        rhs = rhs.add(&moved.scale(Complex64::new(contraction_weight(k, m, n), 0.0)))?;
    }
    let diff = lhs.sub(&rhs)?;
    Ok(diff.norm_sqr().sqrt())
}

/// Upper size limits accepted by the randomized suite.
pub const SUITE_CAPS: SuiteCaps = SuiteCaps {
    system_modes: 6,
    aux_modes: 4,
    photons: 6,
    aux_photons: 4,
    count: 100_000,
};

#[derive(Clone, Copy, Debug)]
pub struct SuiteCaps {
    pub system_modes: usize,
    pub aux_modes: usize,
    pub photons: u32,
    pub aux_photons: u32,
    pub count: usize,
}

/// Parameters of the seeded randomized theorem suite.
#[derive(Clone, Debug, Serialize)]
pub struct SuiteConfig {
    pub seed: u64,
    pub count: usize,
    pub max_system_modes: usize,
    pub max_aux_modes: usize,
    pub max_photons: u32,
    pub max_aux_photons: u32,
    /// Replace the auxiliary state by the constant 1.
    pub no_aux: bool,
    #[serde(skip)]
    pub options: VerifyOptions,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 200,
            max_system_modes: 3,
            max_aux_modes: 2,
            max_photons: 3,
            max_aux_photons: 2,
            no_aux: false,
            options: VerifyOptions::default(),
        }
    }
}

impl SuiteConfig {
    pub fn check_caps(&self) -> Result<()> {
        let caps = SUITE_CAPS;
        let mut bad = Vec::new();
        if self.max_system_modes == 0 || self.max_system_modes > caps.system_modes {
            bad.push(format!("system modes must be 1..={}", caps.system_modes));
        }
        if self.max_aux_modes > caps.aux_modes {
            bad.push(format!("aux modes must be <= {}", caps.aux_modes));
        }
        if self.max_photons == 0 || self.max_photons > caps.photons {
            bad.push(format!("photons must be 1..={}", caps.photons));
        }
        if self.max_aux_photons > caps.aux_photons {
            bad.push(format!("aux photons must be <= {}", caps.aux_photons));
        }
        if self.count == 0 || self.count > caps.count {
            bad.push(format!("count must be 1..={}", caps.count));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::CapViolation(bad.join("; ")))
        }
    }
}

/// One randomly drawn theorem instance, replayable from its JSON form.
#[derive(Clone, Debug)]
pub struct RandomInstance {
    pub index: usize,
    pub registry: Arc<ModeRegistry>,
    pub aux: CreationPolynomial,
    pub states: Vec<CreationPolynomial>,
    pub network: LinearNetwork,
    pub measured: ModeId,
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceJson {
    pub index: usize,
    pub modes: Vec<String>,
    pub aux: PolynomialJson,
    pub states: Vec<PolynomialJson>,
    pub network: NetworkSpec,
    pub measure: String,
}

impl RandomInstance {
    pub fn to_json(&self) -> InstanceJson {
        InstanceJson {
            index: self.index,
            modes: self.registry.labels().to_vec(),
            aux: self.aux.to_json(),
            states: self.states.iter().map(CreationPolynomial::to_json).collect(),
            network: self.network.to_spec(),
            measure: self.registry.label(self.measured).to_string(),
        }
    }
}

/// Per-instance generator: the stream of instance `index` depends only on
/// `(seed, index)`.
pub fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Draws instance `index` of the suite described by `config`.
pub fn random_instance(config: &SuiteConfig, index: usize) -> Result<RandomInstance> {
    let mut rng = instance_rng(config.seed, index);
    let system_modes = rng.random_range(1..=config.max_system_modes);
    let aux_modes = if config.no_aux {
        0
    } else {
        rng.random_range(0..=config.max_aux_modes)
    };
    let photons = rng.random_range(1..=config.max_photons);
    let aux_photons = if aux_modes == 0 {
        0
    } else {
        rng.random_range(0..=config.max_aux_photons)
    };
    let labels: Vec<String> = (1..=system_modes)
        .map(|k| format!("a{k}"))
        .chain((1..=aux_modes).map(|k| format!("b{k}")))
        .collect();
    let registry = ModeRegistry::with_config(labels, AlgebraConfig::default())?;
    let sys: Vec<ModeId> = registry.modes().take(system_modes).collect();
    let auxm: Vec<ModeId> = registry.modes().skip(system_modes).collect();

    let k = rng.random_range(2..=3);
    let states = (0..k)
        .map(|_| random_homogeneous(&registry, &sys, photons, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let aux = if aux_modes == 0 {
        CreationPolynomial::one(&registry)
    } else if rng.random_bool(0.5) {
        random_homogeneous(&registry, &auxm, aux_photons, &mut rng)?
    } else {
        random_polynomial(&registry, &auxm, aux_photons, &mut rng)?
    };
    let network = LinearNetwork::from_matrix(haar_unitary(registry.len(), &mut rng), &registry)?;
    let measured = registry.mode_at(rng.random_range(0..registry.len()))?;
    Ok(RandomInstance {
        index,
        registry,
        aux,
        states,
        network,
        measured,
    })
}

#[derive(Clone, Debug)]
pub struct SuiteOutcome {
    pub instance: RandomInstance,
    pub report: NoGoReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteSummary {
    pub instances: usize,
    pub failed: usize,
    pub max_residual_ratio: f64,
    pub max_det_deviation: f64,
    pub max_diag_deviation: f64,
}

/// Runs the randomized suite; instances are evaluated in parallel and
/// returned in index order.
pub fn run_suite(config: &SuiteConfig) -> Result<Vec<SuiteOutcome>> {
    config.check_caps()?;
    (0..config.count)
        .into_par_iter()
        .map(|index| {
            let instance = random_instance(config, index)?;
            let setup = NoGoSetup::new(
                &instance.aux,
                &instance.states,
                &instance.network,
                instance.measured,
            )?;
            let report = verify_setup(&setup, &config.options)?;
            Ok(SuiteOutcome { instance, report })
        })
        .collect()
}

pub fn summarize(outcomes: &[SuiteOutcome]) -> SuiteSummary {
    SuiteSummary {
        instances: outcomes.len(),
        failed: outcomes.iter().filter(|o| !o.report.passed()).count(),
        max_residual_ratio: sig12(
            outcomes
                .iter()
                .map(|o| o.report.max_residual_ratio())
                .fold(0.0, f64::max),
        ),
        max_det_deviation: sig12(
            outcomes
                .iter()
                .map(|o| o.report.det_deviation)
                .fold(0.0, f64::max),
        ),
        max_diag_deviation: sig12(
            outcomes
                .iter()
                .map(|o| o.report.diag_deviation)
                .fold(0.0, f64::max),
        ),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReportJson {
    pub schema: &'static str,
    pub config: SuiteConfig,
    pub summary: SuiteSummary,
    pub reports: Vec<SuiteEntryJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteEntryJson {
    pub seed: u64,
    pub instance: InstanceJson,
    pub report: NoGoReportJson,
}

pub fn suite_report(config: &SuiteConfig, outcomes: &[SuiteOutcome]) -> SuiteReportJson {
    SuiteReportJson {
        schema: SCHEMA_VERSION,
        config: config.clone(),
        summary: summarize(outcomes),
        reports: outcomes
            .iter()
            .map(|o| SuiteEntryJson {
                seed: config.seed,
                instance: o.instance.to_json(),
                report: o.report.to_json(),
            })
            .collect(),
    }
}

/// `‖V‖₂`, `‖U'‖₂` and `σ_min(M')` for one pair.
pub fn overlap_norms(report: &NoGoReport, pair: &PairReport) -> (f64, f64, f64) {
    let sv = report.m_prime.clone().svd(false, false).singular_values;
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    (norm2(&pair.v), norm2(&pair.u_prime), sigma_min)
}
