//! Passive linear-optical networks.
//!
//! A network is a unitary `U` over an ordered set of modes. An input
//! creation operator is rewritten in terms of the output modes as
//! `a†_i -> Σ_j U_{ji} c†_j`; input and output modes share one registry.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{same_registry, CreationPolynomial, ModeId, ModeRegistry, Monomial};

/// Tolerance on `max |U†U - I|` for a freshly built network.
pub const UNITARITY_TOLERANCE: f64 = 1e-10;
/// Tolerance after composing networks.
pub const COMPOSED_UNITARITY_TOLERANCE: f64 = 1e-8;

/// `max |M†M - I|` over all entries.
pub fn unitarity_deviation(matrix: &DMatrix<Complex64>) -> f64 {
    let gram = matrix.adjoint() * matrix;
    let n = gram.nrows();
    let mut dev: f64 = 0.0;
    for r in 0..n {
        for c in 0..n {
            let target = if r == c { 1.0 } else { 0.0 };
            dev = dev.max((gram[(r, c)] - target).norm());
        }
    }
    dev
}

#[derive(Clone, Debug)]
pub struct LinearNetwork {
    registry: Arc<ModeRegistry>,
    matrix: DMatrix<Complex64>,
}

impl LinearNetwork {
    pub fn from_matrix(matrix: DMatrix<Complex64>, registry: &Arc<ModeRegistry>) -> Result<Self> {
        Self::from_matrix_with_tolerance(matrix, registry, UNITARITY_TOLERANCE)
    }

    pub fn from_matrix_with_tolerance(
        matrix: DMatrix<Complex64>,
        registry: &Arc<ModeRegistry>,
        tolerance: f64,
    ) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::Structural(format!(
                "network matrix is {}x{}, not square",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.nrows() != registry.len() {
            return Err(Error::DimensionMismatch {
                expected: registry.len(),
                found: matrix.nrows(),
            });
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Structural("non-finite matrix entry".into()));
        }
        let deviation = unitarity_deviation(&matrix);
        if !(deviation <= tolerance) {
            return Err(Error::UnitarityViolation { deviation });
        }
        Ok(Self {
            registry: Arc::clone(registry),
            matrix,
        })
    }

    pub fn identity(registry: &Arc<ModeRegistry>) -> Self {
        Self {
            registry: Arc::clone(registry),
            matrix: DMatrix::identity(registry.len(), registry.len()),
        }
    }

    /// Two-mode splitter acting as
    /// `[[cos θ, e^{iφ} sin θ], [-e^{-iφ} sin θ, cos θ]]` on modes `(i, j)`.
    pub fn beam_splitter(
        theta: f64,
        phi: f64,
        i: ModeId,
        j: ModeId,
        registry: &Arc<ModeRegistry>,
    ) -> Result<Self> {
        if i == j {
            return Err(Error::Structural(format!(
                "beam splitter needs two distinct modes, got `{}` twice",
                registry.label(i)
            )));
        }
        let n = registry.len();
        if i.index() >= n || j.index() >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: i.index().max(j.index()) + 1,
            });
        }
        let mut m = DMatrix::identity(n, n);
        let (s, c) = theta.sin_cos();
        let phase = Complex64::from_polar(1.0, phi);
        let (a, b) = (i.index(), j.index());
        m[(a, a)] = Complex64::new(c, 0.0);
        m[(a, b)] = phase * s;
        m[(b, a)] = -phase.conj() * s;
        m[(b, b)] = Complex64::new(c, 0.0);
        Self::from_matrix(m, registry)
    }

    pub fn phase_shifter(phi: f64, i: ModeId, registry: &Arc<ModeRegistry>) -> Result<Self> {
        let n = registry.len();
        if i.index() >= n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: i.index() + 1,
            });
        }
        let mut m = DMatrix::identity(n, n);
        m[(i.index(), i.index())] = Complex64::from_polar(1.0, phi);
        Self::from_matrix(m, registry)
    }

    /// `next` applied after `self`: the composed matrix is `next · self`.
    pub fn compose(&self, next: &LinearNetwork) -> Result<Self> {
        if !same_registry(&self.registry, &next.registry) {
            return Err(Error::RegistryMismatch);
        }
        Self::from_matrix_with_tolerance(
            &next.matrix * &self.matrix,
            &self.registry,
            COMPOSED_UNITARITY_TOLERANCE,
        )
    }

    pub fn adjoint(&self) -> Self {
        Self {
            registry: Arc::clone(&self.registry),
            matrix: self.matrix.adjoint(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }

    /// Rewrites an input-mode polynomial in terms of output modes.
    pub fn substitute(&self, state: &CreationPolynomial) -> Result<CreationPolynomial> {
        substitute(state, self)
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec::Matrix(MatrixNetworkJson {
            matrix: (0..self.matrix.nrows())
                .map(|r| {
                    (0..self.matrix.ncols())
                        .map(|c| ComplexJson::from(self.matrix[(r, c)]))
                        .collect()
                })
                .collect(),
        })
    }
}

/// Rewrites every `a†_i` of `state` as `Σ_j U_{ji} c†_j` and re-expands.
pub fn substitute(state: &CreationPolynomial, net: &LinearNetwork) -> Result<CreationPolynomial> {
    let registry = state.registry();
    if !same_registry(registry, &net.registry) {
        return Err(Error::RegistryMismatch);
    }
    let n = registry.len();
    let images: Vec<CreationPolynomial> = (0..n)
        .map(|i| {
            let terms: BTreeMap<Monomial, Complex64> = (0..n)
                .filter(|&j| net.matrix[(j, i)] != Complex64::default())
                .map(|j| {
                    let mut e = vec![0; n];
                    e[j] = 1;
                    (Monomial::new(e), net.matrix[(j, i)])
                })
                .collect();
            CreationPolynomial::from_raw_terms(registry, terms)
        })
        .collect();

    // powers[i][k] = (image of a†_i)^k, built lazily up to the needed order.
    let mut powers: Vec<Vec<CreationPolynomial>> = (0..n)
        .map(|_| vec![CreationPolynomial::one(registry)])
        .collect();
    for (m, _) in state.terms() {
        for (i, &e) in m.exponents().iter().enumerate() {
            while powers[i].len() <= e as usize {
                let next = powers[i].last().unwrap().mul(&images[i])?;
                powers[i].push(next);
            }
        }
    }

    let mut out = CreationPolynomial::zero(registry);
    for (m, c) in state.terms() {
        let mut term = CreationPolynomial::constant(registry, *c);
        for (i, &e) in m.exponents().iter().enumerate() {
            if e > 0 {
                term = term.mul(&powers[i][e as usize])?;
            }
        }
        out = out.add(&term)?;
    }
    debug_assert!(out.degree() == state.degree());
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<ComplexJson> for Complex64 {
    fn from(z: ComplexJson) -> Self {
        Complex64::new(z.re, z.im)
    }
}

/// A mode referenced either by registry position or by label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeRef {
    Index(usize),
    Label(String),
}

impl ModeRef {
    pub fn resolve(&self, registry: &ModeRegistry) -> Result<ModeId> {
        match self {
            ModeRef::Index(i) => registry.mode_at(*i),
            ModeRef::Label(l) => registry.mode(l),
        }
    }
}

impl std::fmt::Display for ModeRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeRef::Index(i) => write!(f, "#{i}"),
            ModeRef::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixNetworkJson {
    pub matrix: Vec<Vec<ComplexJson>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementsNetworkJson {
    pub elements: Vec<ElementSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementSpec {
    Bs(BeamSplitterSpec),
    Ps(PhaseShifterSpec),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSplitterSpec {
    pub theta: f64,
    #[serde(default)]
    pub phi: f64,
    pub i: ModeRef,
    pub j: ModeRef,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseShifterSpec {
    pub phi: f64,
    pub i: ModeRef,
}

/// Serialized network: an explicit matrix, or a list of elements applied
/// left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetworkSpec {
    Matrix(MatrixNetworkJson),
    Elements(ElementsNetworkJson),
}

impl NetworkSpec {
    pub fn build(&self, registry: &Arc<ModeRegistry>) -> Result<LinearNetwork> {
        self.build_with_tolerance(registry, UNITARITY_TOLERANCE)
    }

    /// As [`NetworkSpec::build`], with a custom unitarity tolerance for
    /// explicit matrices.
    pub fn build_with_tolerance(
        &self,
        registry: &Arc<ModeRegistry>,
        tolerance: f64,
    ) -> Result<LinearNetwork> {
        match self {
            NetworkSpec::Matrix(m) => {
                let n = m.matrix.len();
                if let Some(row) = m.matrix.iter().find(|r| r.len() != n) {
                    return Err(Error::Structural(format!(
                        "network matrix row of length {} in a {n}-row matrix",
                        row.len()
                    )));
                }
                let dense = DMatrix::from_fn(n, n, |r, c| m.matrix[r][c].into());
                LinearNetwork::from_matrix_with_tolerance(dense, registry, tolerance)
            }
            NetworkSpec::Elements(e) => {
                let mut net = LinearNetwork::identity(registry);
                for el in &e.elements {
                    let stage = match el {
                        ElementSpec::Bs(bs) => LinearNetwork::beam_splitter(
                            bs.theta,
                            bs.phi,
                            bs.i.resolve(registry)?,
                            bs.j.resolve(registry)?,
                            registry,
                        )?,
                        ElementSpec::Ps(ps) => {
                            LinearNetwork::phase_shifter(ps.phi, ps.i.resolve(registry)?, registry)?
                        }
                    };
                    net = net.compose(&stage)?;
                }
                Ok(net)
            }
        }
    }
}
