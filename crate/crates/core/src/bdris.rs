//! Block-diagonal scattering matrices, training schedules and the
//! row-selection operators used to factor the cascaded channel.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;

use crate::error::{dim_check, Error, Result};
use crate::geometry::GroupLayout;
use crate::linalg::{fro_norm_sqr, haar_unitary, CMat, CVec, C64, ONE, ZERO};

/// Group-connected scattering matrix stored as its diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringMatrix {
    pub blocks: Vec<CMat>,
}

impl ScatteringMatrix {
    pub fn new(blocks: Vec<CMat>) -> Result<Self> {
        let n = blocks.first().map(|b| b.nrows()).unwrap_or(0);
        dim_check(n > 0 && blocks.iter().all(|b| b.shape() == (n, n)), || {
            "scattering blocks must be non-empty, square and equal-sized".into()
        })?;
        Ok(ScatteringMatrix { blocks })
    }

    pub fn identity(layout: &GroupLayout) -> Self {
        let n = layout.group_size();
        ScatteringMatrix { blocks: vec![CMat::identity(n, n); layout.group_count()] }
    }

    /// Diagonal (single-connected) matrix from per-element reflection coefficients.
    pub fn diagonal(entries: &CVec) -> Self {
        ScatteringMatrix { blocks: entries.iter().map(|&e| CMat::from_element(1, 1, e)).collect() }
    }

    pub fn group_size(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn group_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn matches(&self, layout: &GroupLayout) -> bool {
        self.group_count() == layout.group_count() && self.group_size() == layout.group_size()
    }

    pub fn to_dense(&self) -> CMat {
        let n = self.group_size();
        let m = n * self.group_count();
        let mut d = CMat::zeros(m, m);
        for (g, b) in self.blocks.iter().enumerate() {
            d.view_mut((g * n, g * n), (n, n)).copy_from(b);
        }
        d
    }

    /// Block-wise product `Φ v`.
    pub fn apply(&self, v: &CVec) -> Result<CVec> {
        let n = self.group_size();
        dim_check(v.len() == n * self.group_count(), || {
            format!("vector of length {} does not match {} groups of {}", v.len(), self.group_count(), n)
        })?;
        let mut out = CVec::zeros(v.len());
        for (g, b) in self.blocks.iter().enumerate() {
            let seg = b * v.rows(g * n, n);
            out.rows_mut(g * n, n).copy_from(&seg);
        }
        Ok(out)
    }

    /// Stacked column-major vectorisation of the blocks.
    pub fn vec_stack(&self) -> CVec {
        let n = self.group_size();
        let mut out = CVec::zeros(n * n * self.group_count());
        for (g, b) in self.blocks.iter().enumerate() {
            for (i, z) in b.iter().enumerate() {
                out[g * n * n + i] = *z;
            }
        }
        out
    }

    pub fn from_vec_stack(v: &[C64], group_size: usize, group_count: usize) -> Result<Self> {
        let nn = group_size * group_size;
        dim_check(group_size > 0 && v.len() == nn * group_count, || {
            format!("stacked vector of length {} does not match {} groups of {}", v.len(), group_count, group_size)
        })?;
        let blocks = (0..group_count)
            .map(|g| CMat::from_column_slice(group_size, group_size, &v[g * nn..(g + 1) * nn]))
            .collect();
        Ok(ScatteringMatrix { blocks })
    }

    /// Largest `‖Φ̄^H Φ̄ − I‖_F` over blocks.
    pub fn unitarity_error(&self) -> f64 {
        let n = self.group_size();
        self.blocks
            .iter()
            .map(|b| fro_norm_sqr(&(b.adjoint() * b - CMat::identity(n, n))).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() < tol
    }
}

/// Block-unitary scattering matrix with Haar-distributed blocks.
pub fn random_unitary_block_matrix<R: Rng + ?Sized>(layout: &GroupLayout, rng: &mut R) -> ScatteringMatrix {
    ScatteringMatrix {
        blocks: (0..layout.group_count()).map(|_| haar_unitary(rng, layout.group_size())).collect(),
    }
}

/// Training configurations, one stacked block vector per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule {
    /// `M̄²G × slots` matrix, one column per training slot.
    pub matrix: CMat,
    pub group_size: usize,
    pub group_count: usize,
    /// Seed the schedule was drawn from, when known.
    pub seed: Option<u64>,
}

impl TrainingSchedule {
    pub fn new(matrix: CMat, group_size: usize, group_count: usize) -> Result<Self> {
        dim_check(matrix.nrows() == group_size * group_size * group_count && matrix.ncols() > 0, || {
            format!("schedule has {} rows, expected {}", matrix.nrows(), group_size * group_size * group_count)
        })?;
        Ok(TrainingSchedule { matrix, group_size, group_count, seed: None })
    }

    pub fn slots(&self) -> usize {
        self.matrix.ncols()
    }

    /// Slot `t` as a block scattering matrix.
    pub fn slot(&self, t: usize) -> ScatteringMatrix {
        let col: Vec<C64> = self.matrix.column(t).iter().copied().collect();
        ScatteringMatrix::from_vec_stack(&col, self.group_size, self.group_count).expect("consistent by construction")
    }

    /// First `slots` columns.
    pub fn truncated(&self, slots: usize) -> Self {
        TrainingSchedule {
            matrix: self.matrix.columns(0, slots.min(self.slots())).into_owned(),
            ..self.clone()
        }
    }

    /// Text dump: a header line then one row of `+1`/`-1` (or complex pairs)
    /// per slot.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# training-schedule group_size={} groups={} slots={} seed={}\n",
            self.group_size,
            self.group_count,
            self.slots(),
            self.seed.map(|x| x.to_string()).unwrap_or_else(|| "none".into())
        );
        for t in 0..self.slots() {
            let row: Vec<String> = self
                .matrix
                .column(t)
                .iter()
                .map(|z| if z.im == 0.0 { format!("{}", z.re) } else { format!("{}{:+}i", z.re, z.im) })
                .collect();
            let _ = writeln!(s, "{}", row.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty schedule".into()))?;
        let field = |key: &str| -> Result<String> {
            header
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_owned))
                .ok_or_else(|| Error::Parse(format!("schedule header lacks {key}")))
        };
        let num = |key: &str| -> Result<usize> {
            field(key)?.parse().map_err(|_| Error::Parse(format!("bad {key} in schedule header")))
        };
        let (gs, gc, slots) = (num("group_size")?, num("groups")?, num("slots")?);
        let seed = match field("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::Parse("bad seed in schedule header".into()))?),
        };
        let rows = gs * gs * gc;
        let mut m = CMat::zeros(rows, slots);
        let mut t = 0;
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let vals: Vec<&str> = line.split_whitespace().collect();
            if t >= slots || vals.len() != rows {
                return Err(Error::Parse(format!("schedule row {t} malformed")));
            }
            for (r, v) in vals.iter().enumerate() {
                m[(r, t)] = parse_complex(v).ok_or_else(|| Error::Parse(format!("bad entry {v}")))?;
            }
            t += 1;
        }
        if t != slots {
            return Err(Error::Parse(format!("schedule has {t} rows, header says {slots}")));
        }
        let mut s = TrainingSchedule::new(m, gs, gc)?;
        s.seed = seed;
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

fn parse_complex(s: &str) -> Option<C64> {
    if let Some(body) = s.strip_suffix('i') {
        let split = body.char_indices().skip(1).filter(|(_, c)| *c == '+' || *c == '-').last()?.0;
        let re: f64 = body[..split].parse().ok()?;
        let im: f64 = body[split..].parse().ok()?;
        Some(C64::new(re, im))
    } else {
        s.parse::<f64>().ok().map(|re| C64::new(re, 0.0))
    }
}

/// Schedule with i.i.d. equiprobable ±1 entries, drawn slot by slot so that
/// shorter schedules from the same stream are prefixes of longer ones.
pub fn bernoulli_training_schedule<R: Rng + ?Sized>(layout: &GroupLayout, slots: usize, rng: &mut R) -> Result<TrainingSchedule> {
    if slots == 0 {
        return Err(Error::Config("a training schedule needs at least one slot".into()));
    }
    let rows = layout.vec_len();
    let mut m = CMat::zeros(rows, slots);
    for t in 0..slots {
        for r in 0..rows {
            m[(r, t)] = if rng.random::<bool>() { ONE } else { -ONE };
        }
    }
    TrainingSchedule::new(m, layout.group_size(), layout.group_count())
}

/// Blockwise `Φ̄ = (I + Z0·Ȳ)^{-1}(I − Z0·Ȳ)`.
pub fn admittance_to_scattering(admittance: &[CMat], z0: f64) -> Result<ScatteringMatrix> {
    let mut blocks = Vec::with_capacity(admittance.len());
    for (g, y) in admittance.iter().enumerate() {
        dim_check(y.is_square() && y.nrows() > 0, || format!("admittance block {g} is not square"))?;
        let n = y.nrows();
        let zy = y * C64::new(z0, 0.0);
        let plus = CMat::identity(n, n) + &zy;
        let minus = CMat::identity(n, n) - &zy;
        let sv = plus.singular_values();
        let (smin, smax) = sv.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
        if smax == 0.0 || smin <= smax * 1e-13 {
            return Err(Error::Singular { block: g });
        }
        let inv = plus.lu().try_inverse().ok_or(Error::Singular { block: g })?;
        blocks.push(inv * minus);
    }
    ScatteringMatrix::new(blocks)
}

/// Per group, the `M̄ × M̄²` matrix whose row `i` holds row `i` of the block in
/// columns `i·M̄ .. (i+1)·M̄`, so that `P_g (a ⊗ h) = Diag(a)·Φ̄_g·h`.
pub fn row_selection_blocks(scattering: &ScatteringMatrix) -> Vec<CMat> {
    let n = scattering.group_size();
    scattering
        .blocks
        .iter()
        .map(|b| {
            let mut p = CMat::from_element(n, n * n, ZERO);
            for i in 0..n {
                for j in 0..n {
                    p[(i, i * n + j)] = b[(i, j)];
                }
            }
            p
        })
        .collect()
}
