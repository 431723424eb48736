//! JSON description of a lattice.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Lattice, LinearCode};
use crate::error::{Error, Result};
use crate::linalg::SeededRng;

/// Serializable lattice description. `G` is the row-major `n x k` generator;
/// when omitted it is drawn from `generator_seed`. For `basis`, the columns
/// of `matrix` (given as a list of rows) generate the lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeSpec {
    Integer {
        n: usize,
    },
    ScaledInteger {
        n: usize,
        scale: f64,
    },
    ConstructionA {
        n: usize,
        q: u64,
        k: usize,
        #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<u64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator_seed: Option<u64>,
        scale: f64,
    },
    NestedFine {
        coarse: Box<LatticeSpec>,
        q: u64,
        k: usize,
        #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
        g: Option<Vec<u64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        generator_seed: Option<u64>,
    },
    Basis {
        matrix: Vec<Vec<f64>>,
    },
}

fn linear_code(
    n: usize,
    q: u64,
    k: usize,
    g: &Option<Vec<u64>>,
    seed: Option<u64>,
) -> Result<LinearCode> {
    match (g, seed) {
        (Some(g), None) => LinearCode::new(q, n, k, g.clone()),
        (None, Some(s)) => LinearCode::random(q, n, k, &mut SeededRng::new(s, 0x6E6E)),
        (None, None) => Err(Error::Config(
            "construction needs either G or generator_seed".into(),
        )),
        (Some(_), Some(_)) => Err(Error::Config(
            "give either G or generator_seed, not both".into(),
        )),
    }
}

impl LatticeSpec {
    pub fn dim(&self) -> usize {
        match self {
            LatticeSpec::Integer { n }
            | LatticeSpec::ScaledInteger { n, .. }
            | LatticeSpec::ConstructionA { n, .. } => *n,
            LatticeSpec::NestedFine { coarse, .. } => coarse.dim(),
            LatticeSpec::Basis { matrix } => matrix.len(),
        }
    }

    pub fn build(&self) -> Result<Lattice> {
        match self {
            LatticeSpec::Integer { n } => Lattice::integer(*n),
            LatticeSpec::ScaledInteger { n, scale } => Lattice::scaled_integer(*n, *scale),
            LatticeSpec::ConstructionA {
                n,
                q,
                k,
                g,
                generator_seed,
                scale,
            } => Lattice::construction_a(&linear_code(*n, *q, *k, g, *generator_seed)?, *scale),
            LatticeSpec::NestedFine {
                coarse,
                q,
                k,
                g,
                generator_seed,
            } => {
                let coarse = coarse.build()?;
                let code = linear_code(coarse.dim(), *q, *k, g, *generator_seed)?;
                Ok(Lattice::nested_construction_a(&coarse, &code)?.0)
            }
            LatticeSpec::Basis { matrix } => {
                let n = matrix.len();
                if matrix.iter().any(|row| row.len() != n) {
                    return Err(Error::Config("basis matrix must be square".into()));
                }
                Lattice::from_basis(DMatrix::from_fn(n, n, |i, j| matrix[i][j]))
            }
        }
    }

    /// The coarse lattice of a nested description.
    pub fn coarse(&self) -> Option<&LatticeSpec> {
        match self {
            LatticeSpec::NestedFine { coarse, .. } => Some(coarse),
            _ => None,
        }
    }
}
