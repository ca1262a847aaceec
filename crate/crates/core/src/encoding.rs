//! Pauli-4 POVM encoding of qubit states and model input features.

use std::sync::OnceLock;

use nalgebra::Matrix4;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{BathParams, DensityMatrix, Mat2};
use crate::error::{Error, Result};

/// Label of the `|l>` convention, stamped into checkpoints.
pub const POVM_CONVENTION: &str = "pauli4:l=(|0>+i|1>)/sqrt2";

const CORRUPT_TRACE_TOL: f64 = 1e-6;

/// Outcome probabilities of the four POVM elements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PovmDistribution(pub [f64; 4]);

impl PovmDistribution {
    pub fn probabilities(&self) -> &[f64; 4] {
        &self.0
    }
}

fn projector(a: Complex64, b: Complex64) -> Mat2 {
    *DensityMatrix::pure(a, b).matrix()
}

/// `M1 = |0><0|/3`, `M2 = |l><l|/3`, `M3 = |+><+|/3`, `M4 = I - M1 - M2 - M3`.
pub fn povm_operators() -> [Mat2; 4] {
    let third = Complex64::new(1.0 / 3.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let m1 = projector(one, zero) * third;
    let m2 = projector(one, Complex64::new(0.0, 1.0)) * third;
    let m3 = projector(one, one) * third;
    let m4 = Mat2::identity() - m1 - m2 - m3;
    [m1, m2, m3, m4]
}

struct Reconstruction {
    operators: [Mat2; 4],
    overlap_inverse: Matrix4<f64>,
}

fn reconstruction() -> &'static Reconstruction {
    static CELL: OnceLock<Reconstruction> = OnceLock::new();
    CELL.get_or_init(|| {
        let operators = povm_operators();
        let overlap = Matrix4::from_fn(|a, b| (operators[a] * operators[b]).trace().re);
        let overlap_inverse = overlap.try_inverse().expect("Pauli-4 overlap matrix is invertible");
        Reconstruction {
            operators,
            overlap_inverse,
        }
    })
}

/// `p_a = Tr(rho M_a)`.
pub fn encode_density(rho: &DensityMatrix) -> PovmDistribution {
    let ops = &reconstruction().operators;
    let mut p = [0.0; 4];
    for (pa, m) in p.iter_mut().zip(ops) {
        *pa = (rho.matrix() * m).trace().re;
    }
    PovmDistribution(p)
}

/// Inverts [`encode_density`] through the overlap matrix of the POVM.
pub fn decode_distribution(p: &PovmDistribution) -> Result<DensityMatrix> {
    let rec = reconstruction();
    let mut rho = Mat2::zeros();
    for a in 0..4 {
        for b in 0..4 {
            let weight = p.0[a] * rec.overlap_inverse[(a, b)];
            rho += rec.operators[b] * Complex64::new(weight, 0.0);
        }
    }
    let trace = rho.trace().re;
    if (trace - 1.0).abs() > CORRUPT_TRACE_TOL {
        return Err(Error::CorruptDistribution(trace));
    }
    // Rounding leaves the diagonal imaginary parts at ~1e-17; snap them.
    rho[(0, 0)].im = 0.0;
    rho[(1, 1)].im = 0.0;
    let off = 0.5 * (rho[(0, 1)] + rho[(1, 0)].conj());
    rho[(0, 1)] = off;
    rho[(1, 0)] = off.conj();
    DensityMatrix::new(rho)
}

/// Training strategy: noise-unaware, per-environment, or environment-as-features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Case {
    NoEnvironment = 1,
    FixedEnvironment = 2,
    EnvironmentFeatures = 3,
}

impl Case {
    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn feature_width(self) -> usize {
        match self {
            Case::EnvironmentFeatures => 11,
            _ => 8,
        }
    }
}

impl TryFrom<u8> for Case {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Case::NoEnvironment),
            2 => Ok(Case::FixedEnvironment),
            3 => Ok(Case::EnvironmentFeatures),
            other => Err(Error::Config(format!("case must be 1, 2 or 3, got {other}"))),
        }
    }
}

impl From<Case> for u8 {
    fn from(case: Case) -> u8 {
        case.id()
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// How the three bath parameters enter the Case-3 feature tail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureScaling {
    #[default]
    Raw,
    /// Each parameter is divided by the matching scale.
    Divide {
        #[serde(rename = "Gamma")]
        coupling_strength: f64,
        #[serde(rename = "gamma")]
        char_frequency: f64,
        #[serde(rename = "T")]
        temperature: f64,
    },
}

pub type FeatureVector = Vec<f64>;

/// `[p_ini, p_tar]`, plus `[Gamma, gamma, T]` for Case 3.
pub fn build_features(
    p_ini: &PovmDistribution,
    p_tar: &PovmDistribution,
    bath: &BathParams,
    case: Case,
    scaling: &FeatureScaling,
) -> FeatureVector {
    let mut values = Vec::with_capacity(case.feature_width());
    values.extend_from_slice(&p_ini.0);
    values.extend_from_slice(&p_tar.0);
    if case == Case::EnvironmentFeatures {
        let (sg, sw, st) = match *scaling {
            FeatureScaling::Raw => (1.0, 1.0, 1.0),
            FeatureScaling::Divide {
                coupling_strength,
                char_frequency,
                temperature,
            } => (coupling_strength, char_frequency, temperature),
        };
        values.push(bath.coupling_strength / sg);
        values.push(bath.char_frequency / sw);
        values.push(bath.temperature / st);
    }
    values
}
