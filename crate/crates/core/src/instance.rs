//! Seeded random test systems.
//!
//! - `GeneralUniform` / `GeneralGaussian`: i.i.d. entries, uniform on `[0, 1)`
//!   or standard normal.
//! - `LowRank`: `A = U S V^T` with Haar-random `U`, `V` and the spectrum of a
//!   freshly drawn uniform matrix, smallest `ceil(k/2)` values set to zero
//!   (`k = min(m, n)`).
//! - `IllConditioned`: as `LowRank`, but the smallest `ceil(k/2)` values are
//!   set to `0.001`.
//!
//! Consistent instances use `b = A x_true`. Inconsistent ones (low rank only)
//! add a nonzero `z` orthogonal to the range of `A`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, random_orthogonal, DenseMatrix, Vector};
use crate::{mm, oracles};

pub const ILL_CONDITIONED_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum InstanceKind {
    #[serde(rename = "uniform")]
    GeneralUniform,
    #[serde(rename = "gaussian")]
    GeneralGaussian,
    #[serde(rename = "lowrank")]
    LowRank,
    #[serde(rename = "illcond")]
    IllConditioned,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 4] = [
        InstanceKind::GeneralUniform,
        InstanceKind::GeneralGaussian,
        InstanceKind::LowRank,
        InstanceKind::IllConditioned,
    ];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::GeneralUniform => "uniform",
            InstanceKind::GeneralGaussian => "gaussian",
            InstanceKind::LowRank => "lowrank",
            InstanceKind::IllConditioned => "illcond",
        }
    }

    fn is_spectral(self) -> bool {
        matches!(self, InstanceKind::LowRank | InstanceKind::IllConditioned)
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "generaluniform" => Ok(InstanceKind::GeneralUniform),
            "gaussian" | "generalgaussian" => Ok(InstanceKind::GeneralGaussian),
            "lowrank" | "low-rank" => Ok(InstanceKind::LowRank),
            "illcond" | "ill-conditioned" | "illconditioned" => Ok(InstanceKind::IllConditioned),
            other => Err(Error::InvalidArgument(format!(
                "unknown instance kind `{other}` (expected uniform, gaussian, lowrank or illcond)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub kind: InstanceKind,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub consistent: bool,
}

impl InstanceSpec {
    pub fn new(kind: InstanceKind, m: usize, n: usize, seed: u64) -> Self {
        InstanceSpec {
            kind,
            m,
            n,
            seed,
            consistent: true,
        }
    }

    pub fn inconsistent(mut self) -> Self {
        self.consistent = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InvalidArgument("instance dimensions must be positive".into()));
        }
        if self.kind.is_spectral() && self.m.min(self.n) < 2 {
            return Err(Error::InvalidArgument(format!(
                "{} instances need min(m, n) >= 2",
                self.kind
            )));
        }
        if !self.consistent && self.kind != InstanceKind::LowRank {
            return Err(Error::InvalidArgument(format!(
                "inconsistent right-hand sides need a rank-deficient matrix; {} is full rank",
                self.kind
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: InstanceSpec,
    pub a: DenseMatrix,
    pub b: Vector,
    pub x_true: Option<Vector>,
    /// Component of `b` outside the range of `A` (inconsistent instances).
    pub z: Option<Vector>,
}

#[derive(Debug, Clone, Copy)]
enum Scalar {
    Uniform,
    Gaussian,
}

impl Scalar {
    fn of(kind: InstanceKind) -> Self {
        match kind {
            InstanceKind::GeneralGaussian => Scalar::Gaussian,
            // Spectral kinds start from a uniform matrix.
            _ => Scalar::Uniform,
        }
    }

    fn draw(self, rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        match self {
            Scalar::Uniform => (0..len).map(|_| rng.gen::<f64>()).collect(),
            Scalar::Gaussian => (0..len).map(|_| rng.sample(StandardNormal)).collect(),
        }
    }
}

/// Number of singular values replaced in the spectral kinds.
pub fn replaced_count(m: usize, n: usize) -> usize {
    m.min(n).div_ceil(2)
}

pub fn generate(spec: &InstanceSpec) -> Result<Instance> {
    spec.validate()?;
    let InstanceSpec { kind, m, n, .. } = *spec;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let scalar = Scalar::of(kind);
    let general = DenseMatrix::from_raw(m, n, scalar.draw(&mut rng, m * n));

    let (a, u_null) = if kind.is_spectral() {
        let k = m.min(n);
        let mut s = oracles::singular_values(&general);
        let keep = k - replaced_count(m, n);
        let floor = match kind {
            InstanceKind::LowRank => 0.0,
            _ => ILL_CONDITIONED_FLOOR,
        };
        s[keep..].iter_mut().for_each(|v| *v = floor);
        let used = if floor == 0.0 { keep } else { k };

        let u = random_orthogonal(m, rng.next_u64());
        let v = random_orthogonal(n, rng.next_u64());
        // U[:, :used] diag(s) V[:, :used]^T
        let mut us = vec![0.0; m * used];
        for i in 0..m {
            for j in 0..used {
                us[i * used + j] = u.get(i, j) * s[j];
            }
        }
        let mut vt = vec![0.0; used * n];
        for j in 0..used {
            for i in 0..n {
                vt[j * n + i] = v.get(i, j);
            }
        }
        let a = DenseMatrix::from_raw(m, used, us).matmul(&DenseMatrix::from_raw(used, n, vt))?;
        // Left null space: the columns of U past the retained rank.
        let null: Vec<Vec<f64>> = (used..m).map(|j| u.column(j)).collect();
        (a, null)
    } else {
        (general, Vec::new())
    };

    let x_true = Vector::from_vec_unchecked(scalar.draw(&mut rng, n));
    let mut b = linalg::matvec(&a, &x_true)?.into_inner();

    let z = if spec.consistent {
        None
    } else {
        let w = scalar.draw(&mut rng, m);
        let mut z = vec![0.0; m];
        for q in &u_null {
            linalg::axpy(linalg::dot(q, &w), q, &mut z);
        }
        if linalg::norm2(&z) == 0.0 {
            return Err(Error::Numerical("drawn inconsistency vanished".into()));
        }
        for (bi, zi) in b.iter_mut().zip(&z) {
            *bi += zi;
        }
        Some(Vector::from_vec_unchecked(z))
    };

    Ok(Instance {
        spec: *spec,
        a,
        b: Vector::from_vec_unchecked(b),
        x_true: Some(x_true),
        z,
    })
}

/// Paths written by [`Instance::export`].
#[derive(Debug, Clone, Serialize)]
pub struct ExportedPaths {
    pub matrix: PathBuf,
    pub rhs: PathBuf,
    pub x_true: Option<PathBuf>,
    pub sidecar: PathBuf,
}

impl Instance {
    /// Writes `<stem>_A.mtx`, `<stem>_b.mtx`, `<stem>_x.mtx` and a
    /// `<stem>.json` sidecar holding the spec.
    pub fn export(&self, dir: impl AsRef<Path>, stem: &str) -> Result<ExportedPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let matrix = dir.join(format!("{stem}_A.mtx"));
        let rhs = dir.join(format!("{stem}_b.mtx"));
        let sidecar = dir.join(format!("{stem}.json"));
        mm::write_matrix(&matrix, &self.a)?;
        mm::write_vector(&rhs, &self.b)?;
        let x_true = match &self.x_true {
            Some(x) => {
                let p = dir.join(format!("{stem}_x.mtx"));
                mm::write_vector(&p, x)?;
                Some(p)
            }
            None => None,
        };
        let json = serde_json::to_string_pretty(&self.spec)?;
        std::fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
        Ok(ExportedPaths {
            matrix,
            rhs,
            x_true,
            sidecar,
        })
    }
}
