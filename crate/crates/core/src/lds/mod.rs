//! Point sets in the unit cube: low-discrepancy sequences, pseudo-random points,
//! and star-discrepancy evaluation.

mod discrepancy;
mod halton;
mod sobol;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub use discrepancy::{local_discrepancy, star_discrepancy_exact, star_discrepancy_lower_bound};
pub use halton::{first_primes, radical_inverse};
pub use sobol::{direction_numbers, SobolDirections, SOBOL_BITS};

/// Largest dimension served by the Halton and Sobol generators.
pub const MAX_SEQUENCE_DIM: usize = 32;

/// Index of the first emitted point of a deterministic sequence. Index 0 is the origin.
pub const DEFAULT_START: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SamplerKind {
    VanDerCorput { base: u32 },
    Halton,
    Sobol,
    UniformRandom { seed: u64 },
}

impl SamplerKind {
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, SamplerKind::UniformRandom { .. })
    }

    /// Short label used in CSV output and on the command line.
    pub fn label(&self) -> &'static str {
        match self {
            SamplerKind::VanDerCorput { .. } => "vdc",
            SamplerKind::Halton => "halton",
            SamplerKind::Sobol => "sobol",
            SamplerKind::UniformRandom { .. } => "random",
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        let ok = match self {
            SamplerKind::VanDerCorput { .. } => dim == 1,
            SamplerKind::Halton | SamplerKind::Sobol => (1..=MAX_SEQUENCE_DIM).contains(&dim),
            SamplerKind::UniformRandom { .. } => dim >= 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::UnsupportedDimension {
                kind: self.label().to_string(),
                dim,
            })
        }
    }
}

/// Sampler family without generator parameters, as selected on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerFamily {
    Vdc,
    Halton,
    Sobol,
    Random,
}

impl SamplerFamily {
    pub fn with_seed(self, seed: u64) -> SamplerKind {
        match self {
            SamplerFamily::Vdc => SamplerKind::VanDerCorput { base: 2 },
            SamplerFamily::Halton => SamplerKind::Halton,
            SamplerFamily::Sobol => SamplerKind::Sobol,
            SamplerFamily::Random => SamplerKind::UniformRandom { seed },
        }
    }

    pub fn label(self) -> &'static str {
        self.with_seed(0).label()
    }
}

impl fmt::Display for SamplerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplerFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vdc" => Ok(SamplerFamily::Vdc),
            "halton" => Ok(SamplerFamily::Halton),
            "sobol" => Ok(SamplerFamily::Sobol),
            "random" => Ok(SamplerFamily::Random),
            other => Err(Error::InvalidArgument(format!("unknown sampler `{other}`"))),
        }
    }
}

/// Which generator produced a point set, and from which index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub kind: SamplerKind,
    /// Sequence index of the first point (1-based for every kind).
    pub start: u64,
}

/// An ordered list of points in `[0, 1)^dim`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
    provenance: Option<Provenance>,
}

impl PointSet {
    /// Wraps externally supplied points. Every coordinate must lie in `[0, 1)`.
    pub fn from_rows(dim: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut coords = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(dim, coords)
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not split into points of dimension {dim}",
                coords.len()
            )));
        }
        if let Some(bad) = coords.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(Error::InvalidArgument(format!(
                "coordinate {bad} outside [0, 1)"
            )));
        }
        Ok(Self {
            dim,
            coords,
            provenance: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    /// Row-major coordinates, `len() * dim()` values.
    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Writes the points as CSV with header `x1,...,xD` and 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record((1..=self.dim).map(|j| format!("x{j}")))?;
        for p in self.iter() {
            w.write_record(p.iter().map(|x| format!("{x:.16e}")))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Reads a CSV written by [`PointSet::write_csv`] (any header is accepted).
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let dim = r.headers()?.len();
        let mut coords = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: rec.len(),
                });
            }
            for field in rec.iter() {
                let x: f64 = field.trim().parse().map_err(|_| {
                    Error::InvalidArgument(format!("not a number: `{field}`"))
                })?;
                coords.push(x);
            }
        }
        Self::from_flat(dim, coords)
    }
}

/// First `n` points of the sequence, starting at index 1 for deterministic kinds.
pub fn generate(kind: SamplerKind, dim: usize, n: usize) -> Result<PointSet> {
    generate_from(kind, dim, n, DEFAULT_START)
}

/// `n` consecutive points beginning at sequence index `start` (1-based).
///
/// For random kinds the index counts points of the seeded stream, so disjoint index
/// ranges of one seed never share draws.
pub fn generate_from(kind: SamplerKind, dim: usize, n: usize, start: u64) -> Result<PointSet> {
    kind.check_dim(dim)?;
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    if start == 0 && !kind.is_deterministic() {
        return Err(Error::InvalidArgument("random streams are indexed from 1".into()));
    }
    let coords = match kind {
        SamplerKind::VanDerCorput { base } => {
            if base < 2 {
                return Err(Error::InvalidArgument(format!("base {base} < 2")));
            }
            (0..n as u64)
                .map(|i| radical_inverse(base as u64, start + i))
                .collect()
        }
        SamplerKind::Halton => halton::halton_points(dim, n, start),
        SamplerKind::Sobol => sobol::sobol_points(dim, n, start)?,
        SamplerKind::UniformRandom { seed } => {
            let mut rng = SplitMix64::new(seed);
            for _ in 0..(start - 1) * dim as u64 {
                rng.next_u64();
            }
            (0..n * dim).map(|_| rng.next_f64()).collect()
        }
    };
    Ok(PointSet {
        dim,
        coords,
        provenance: Some(Provenance { kind, start }),
    })
}
