//! Dense truncated Fock-space reference simulator.
//!
//! Works on occupation-number amplitudes only and never expands
//! polynomials: a network is factored into two-mode rotations and phases,
//! and each rotation is lifted to the `(n_i, n_j)` blocks of the basis by
//! exponentiating its number-conserving generator.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measurement::{condition, ZERO_WEIGHT};
use crate::network::LinearNetwork;
use crate::nogo::instance_rng;
use crate::poly::{CreationPolynomial, ModeRegistry};
use crate::random::{haar_unitary, random_polynomial};

/// Occupation vectors on `modes` modes with total photon number `<= l_max`.
///
/// Ordered by total photon number, then reverse lexicographically, so the
/// two-mode, two-photon block reads `|2,0⟩, |1,1⟩, |0,2⟩`.
#[derive(Clone, Debug)]
pub struct FockBasis {
    modes: usize,
    l_max: u32,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, l_max: u32) -> Self {
        let mut states = Vec::new();
        for total in 0..=l_max {
            let mut current = vec![0; modes];
            fill(&mut current, 0, total, &mut states);
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(k, s)| (s.clone(), k))
            .collect();
        Self {
            modes,
            l_max,
            states,
            index,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn l_max(&self) -> u32 {
        self.l_max
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn index_of(&self, occupation: &[u32]) -> Option<usize> {
        self.index.get(occupation).copied()
    }
}

fn fill(current: &mut Vec<u32>, pos: usize, left: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 >= current.len() {
        if let Some(last) = current.last_mut() {
            *last = left;
            out.push(current.clone());
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=left).rev() {
        current[pos] = e;
        fill(current, pos + 1, left - e, out);
    }
    current[pos] = 0;
}

fn sqrt_factorial(n: u32) -> f64 {
    (1..=n).map(|k| (k as f64).sqrt()).product()
}

/// Amplitudes of `p|0⟩` in the orthonormal occupation basis: the
/// coefficient of `Π a†_k^{n_k}` times `Π √(n_k!)`.
pub fn embed(p: &CreationPolynomial, basis: &FockBasis) -> Result<DVector<Complex64>> {
    if p.registry().len() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            found: p.registry().len(),
        });
    }
    let mut v = DVector::zeros(basis.dim());
    for (m, c) in p.terms() {
        let e = m.exponents();
        let k = basis.index_of(e).ok_or(Error::PhotonCap {
            degree: m.degree(),
            cap: basis.l_max(),
        })?;
        v[k] = *c * e.iter().map(|&n| sqrt_factorial(n)).product::<f64>();
    }
    Ok(v)
}

/// One step of the factorization of a mode unitary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    /// `e^{iφ}` on mode `k`.
    Phase { k: usize, phi: f64 },
    /// `exp(θ K)` on modes `(i, j)` with `K = [[0, e^{iψ}], [-e^{-iψ}, 0]]`.
    Rotation {
        i: usize,
        j: usize,
        theta: f64,
        psi: f64,
    },
}

/// Factors `u` as a product of gates: `u = g_0 g_1 ... g_last` as mode
/// matrices, so vectors are acted on by `g_last` first.
///
/// Entries below the diagonal are nulled column by column with rotations on
/// adjacent rows; the leftover diagonal of phases goes last.
pub fn decompose(u: &DMatrix<Complex64>) -> Vec<Gate> {
    let n = u.nrows();
    let mut w = u.clone();
    // Each nulling step multiplies w on the left by G = diag(e^{-iα}, e^{iα}) R
    // acting on rows (r-1, r); u is then the product of the inverses.
    let mut inverse = Vec::new();
    for c in 0..n {
        for r in (c + 1..n).rev() {
            let a = w[(r - 1, c)];
            let b = w[(r, c)];
            if b.norm() == 0.0 {
                continue;
            }
            let theta = b.norm().atan2(a.norm());
            let (pa, pb) = (a.arg(), b.arg());
            let psi = pa - pb;
            let g00 = Complex64::from_polar(theta.cos(), -pa);
            let g01 = Complex64::from_polar(theta.sin(), -pb);
            let g10 = -Complex64::from_polar(theta.sin(), pb);
            let g11 = Complex64::from_polar(theta.cos(), pa);
            for col in 0..n {
                let x = w[(r - 1, col)];
                let y = w[(r, col)];
                w[(r - 1, col)] = g00 * x + g01 * y;
                w[(r, col)] = g10 * x + g11 * y;
            }
            // G^{-1} = R(-θ) diag(e^{iα}, e^{-iα}).
            inverse.push([
                Gate::Rotation {
                    i: r - 1,
                    j: r,
                    theta: -theta,
                    psi,
                },
                Gate::Phase { k: r - 1, phi: pa },
                Gate::Phase { k: r, phi: -pa },
            ]);
        }
    }
    // w is now diagonal: u = G_1^{-1} ... G_K^{-1} w.
    let mut gates: Vec<Gate> = inverse.into_iter().flatten().collect();
    for k in 0..n {
        gates.push(Gate::Phase {
            k,
            phi: w[(k, k)].arg(),
        });
    }
    drop_trivial_phases(gates)
}

fn drop_trivial_phases(gates: Vec<Gate>) -> Vec<Gate> {
    gates
        .into_iter()
        .filter(|g| !matches!(g, Gate::Phase { phi, .. } if *phi == 0.0))
        .collect()
}

/// Mode matrix of a gate sequence, as used by [`decompose`].
pub fn gates_matrix(gates: &[Gate], n: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::<Complex64>::identity(n, n);
    for g in gates {
        let mut gm = DMatrix::<Complex64>::identity(n, n);
        match *g {
            Gate::Phase { k, phi } => gm[(k, k)] = Complex64::from_polar(1.0, phi),
            Gate::Rotation { i, j, theta, psi } => {
                gm[(i, i)] = Complex64::new(theta.cos(), 0.0);
                gm[(j, j)] = Complex64::new(theta.cos(), 0.0);
                gm[(i, j)] = Complex64::from_polar(theta.sin(), psi);
                gm[(j, i)] = -Complex64::from_polar(theta.sin(), -psi);
            }
        }
        m *= gm;
    }
    m
}

/// `exp(θ K̂)` on the two-mode block with `t` photons, basis
/// `|t,0⟩, |t-1,1⟩, ..., |0,t⟩`, where `K̂ = e^{iψ} a†_i a_j - e^{-iψ} a†_j a_i`.
fn rotation_block(t: u32, theta: f64, psi: f64) -> DMatrix<Complex64> {
    let d = t as usize + 1;
    // H = i K̂ is Hermitian; exp(θ K̂) = exp(-iθ H).
    let mut h = DMatrix::<Complex64>::zeros(d, d);
    let e = Complex64::from_polar(1.0, psi);
    for col in 1..d {
        // |n_i, n_j⟩ = |t-col, col⟩ -> a†_i a_j gives √((n_i+1) n_j) |n_i+1, n_j-1⟩.
        let ni = (t as usize - col) as f64;
        let nj = col as f64;
        let amp = ((ni + 1.0) * nj).sqrt();
        h[(col - 1, col)] += Complex64::i() * e * amp;
        h[(col, col - 1)] += (Complex64::i() * e * amp).conj();
    }
    let eig = h.symmetric_eigen();
    let phases = DMatrix::from_diagonal(&eig.eigenvalues.map(|lam| {
        Complex64::from_polar(1.0, -theta * lam)
    }));
    &eig.eigenvectors * phases * eig.eigenvectors.adjoint()
}

fn apply_gate(v: &mut DVector<Complex64>, gate: &Gate, basis: &FockBasis) {
    match *gate {
        Gate::Phase { k, phi } => {
            for (idx, occ) in basis.states().iter().enumerate() {
                v[idx] *= Complex64::from_polar(1.0, phi * occ[k] as f64);
            }
        }
        Gate::Rotation { i, j, theta, psi } => {
            let mut blocks: HashMap<u32, DMatrix<Complex64>> = HashMap::new();
            let mut done = vec![false; basis.dim()];
            for start in 0..basis.dim() {
                if done[start] {
                    continue;
                }
                let occ = &basis.states()[start];
                let t = occ[i] + occ[j];
                let members: Vec<usize> = (0..=t)
                    .map(|nj| {
                        let mut o = occ.clone();
                        o[i] = t - nj;
                        o[j] = nj;
                        basis.index_of(&o).expect("block stays in the truncated basis")
                    })
                    .collect();
                let block = blocks
                    .entry(t)
                    .or_insert_with(|| rotation_block(t, theta, psi));
                let old: Vec<Complex64> = members.iter().map(|&k| v[k]).collect();
                for (r, &k) in members.iter().enumerate() {
                    v[k] = (0..members.len()).map(|c| block[(r, c)] * old[c]).sum();
                    done[k] = true;
                }
            }
        }
    }
}

/// Applies the Fock-space lift of `net` to `vec`.
pub fn apply_network_dense(
    vec: &DVector<Complex64>,
    net: &LinearNetwork,
    basis: &FockBasis,
) -> Result<DVector<Complex64>> {
    if net.registry().len() != basis.modes() {
        return Err(Error::DimensionMismatch {
            expected: basis.modes(),
            found: net.registry().len(),
        });
    }
    if vec.len() != basis.dim() {
        return Err(Error::DimensionMismatch {
            expected: basis.dim(),
            found: vec.len(),
        });
    }
    let mut v = vec.clone();
    for g in decompose(net.matrix()).iter().rev() {
        apply_gate(&mut v, g, basis);
    }
    Ok(v)
}

/// Amplitudes with `n` photons in `mode`, reindexed on the remaining modes,
/// and the fraction of the squared norm they carry.
pub fn project_outcome_dense(
    vec: &DVector<Complex64>,
    mode: usize,
    n: u32,
    basis: &FockBasis,
) -> Result<(DVector<Complex64>, FockBasis, f64)> {
    if mode >= basis.modes() {
        return Err(Error::IndexOutOfRange(format!(
            "mode {mode} of {}",
            basis.modes()
        )));
    }
    let reduced = FockBasis::new(basis.modes() - 1, basis.l_max());
    let mut out = DVector::zeros(reduced.dim());
    for (idx, occ) in basis.states().iter().enumerate() {
        if occ[mode] != n {
            continue;
        }
        let mut rest = occ.clone();
        rest.remove(mode);
        let k = reduced.index_of(&rest).expect("reduced basis has the same cap");
        out[k] = vec[idx];
    }
    let total = vec.norm_squared();
    let weight = if total > 0.0 {
        out.norm_squared() / total
    } else {
        0.0
    };
    Ok((out, reduced, weight))
}

/// `a_k` on the truncated basis.
pub fn annihilation_dense(k: usize, basis: &FockBasis) -> DMatrix<Complex64> {
    let mut m = DMatrix::zeros(basis.dim(), basis.dim());
    for (col, occ) in basis.states().iter().enumerate() {
        if occ[k] == 0 {
            continue;
        }
        let mut o = occ.clone();
        o[k] -= 1;
        let row = basis.index_of(&o).expect("lower occupation is in the basis");
        m[(row, col)] = Complex64::new((occ[k] as f64).sqrt(), 0.0);
    }
    m
}

/// `a†_k` on the truncated basis (zero on the top photon-number shell).
pub fn creation_dense(k: usize, basis: &FockBasis) -> DMatrix<Complex64> {
    annihilation_dense(k, basis).adjoint()
}

fn max_modulus(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `1 - |⟨u,v⟩| / (‖u‖‖v‖)`; zero when both vectors vanish.
pub fn phase_insensitive_distance(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 && nv == 0.0 {
        return 0.0;
    }
    if nu == 0.0 || nv == 0.0 {
        return 1.0;
    }
    1.0 - u.dotc(v).norm() / (nu * nv)
}

/// Parameters of the randomized two-path comparison.
#[derive(Clone, Debug, Serialize)]
pub struct OracleCheckConfig {
    pub seed: u64,
    pub count: usize,
    pub max_modes: usize,
    pub max_photons: u32,
    pub tolerance: f64,
}

impl Default for OracleCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100,
            max_modes: 4,
            max_photons: 3,
            tolerance: 1e-9,
        }
    }
}

impl OracleCheckConfig {
    pub fn check_caps(&self) -> Result<()> {
        if self.max_modes == 0 || self.max_modes > 6 || self.max_photons > 6 {
            return Err(Error::CapViolation(
                "oracle instances need 1..=6 modes and at most 6 photons".into(),
            ));
        }
        if self.count == 0 || self.count > 100_000 {
            return Err(Error::CapViolation("count must be 1..=100000".into()));
        }
        Ok(())
    }
}

/// Deviations between the polynomial and dense paths on one instance.
#[derive(Clone, Debug, Serialize)]
pub struct OracleComparison {
    pub index: usize,
    pub modes: usize,
    pub photons: u32,
    pub measured: usize,
    /// Largest amplitude difference after the network, relative to `max(1, ‖v‖)`.
    pub amplitude_deviation: f64,
    /// Largest outcome-weight difference.
    pub weight_deviation: f64,
    /// Largest conditional-state difference, relative to `max(1, ‖v‖)`.
    pub conditional_deviation: f64,
    /// Largest `1 - |⟨u,v⟩|/(‖u‖‖v‖)` over nonzero-weight outcomes.
    pub phase_insensitive_deviation: f64,
    pub weight_sum: f64,
    pub passed: bool,
}

/// Random polynomial and network (instance `index` of `config`) pushed
/// through both paths.
pub fn compare_instance(config: &OracleCheckConfig, index: usize) -> Result<OracleComparison> {
    let mut rng = instance_rng(config.seed, index);
    let modes = rng.random_range(1..=config.max_modes);
    let photons = rng.random_range(0..=config.max_photons);
    let labels: Vec<String> = (0..modes).map(|k| format!("m{k}")).collect();
    let registry = ModeRegistry::new(labels)?;
    let all: Vec<_> = registry.modes().collect();
    let state = random_polynomial(&registry, &all, photons, &mut rng)?;
    let net = LinearNetwork::from_matrix(haar_unitary(modes, &mut rng), &registry)?;
    let measured = rng.random_range(0..modes);
    compare(&state, &net, measured, photons, config.tolerance, index)
}

/// Compares `state` through `net` and a count on mode `measured` along
/// both paths, on a basis capped at `l_max` photons.
pub fn compare(
    state: &CreationPolynomial,
    net: &LinearNetwork,
    measured: usize,
    l_max: u32,
    tolerance: f64,
    index: usize,
) -> Result<OracleComparison> {
    let basis = FockBasis::new(state.registry().len(), l_max);
    let dense_in = embed(state, &basis)?;
    let scale = dense_in.norm().max(1.0);
    let dense_out = apply_network_dense(&dense_in, net, &basis)?;
    let poly_out = net.substitute(state)?;
    let amplitude_deviation = max_modulus(&(embed(&poly_out, &basis)? - &dense_out)) / scale;

    let c = state.registry().mode_at(measured)?;
    let mut weight_deviation: f64 = 0.0;
    let mut conditional_deviation: f64 = 0.0;
    let mut phase_insensitive_deviation: f64 = 0.0;
    let mut weight_sum = 0.0;
    for n in 0..=l_max {
        let (projected, reduced, weight) = project_outcome_dense(&dense_out, measured, n, &basis)?;
        weight_sum += weight;
        let cond = condition(&poly_out, c, n)?;
        weight_deviation = weight_deviation.max((cond.weight - weight).abs());
        let lifted = embed(&cond.state, &reduced)? * Complex64::new(sqrt_factorial(n), 0.0);
        conditional_deviation = conditional_deviation.max(max_modulus(&(&lifted - &projected)) / scale);
        if weight > ZERO_WEIGHT {
            phase_insensitive_deviation =
                phase_insensitive_deviation.max(phase_insensitive_distance(&lifted, &projected));
        }
    }
    let passed = amplitude_deviation <= tolerance
        && weight_deviation <= tolerance
        && conditional_deviation <= tolerance
        && phase_insensitive_deviation <= tolerance
        && (dense_in.norm() == 0.0 || (weight_sum - 1.0).abs() <= tolerance);
    Ok(OracleComparison {
        index,
        modes: state.registry().len(),
        photons: l_max,
        measured,
        amplitude_deviation,
        weight_deviation,
        conditional_deviation,
        phase_insensitive_deviation,
        weight_sum,
        passed,
    })
}

pub fn run_oracle_check(config: &OracleCheckConfig) -> Result<Vec<OracleComparison>> {
    config.check_caps()?;
    (0..config.count)
        .into_par_iter()
        .map(|k| compare_instance(config, k))
        .collect()
}
