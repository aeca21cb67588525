//! Array responses, DFT bases, element grouping and angular dictionaries.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec, C64};

/// Uniform planar array: `horizontal × vertical` elements at a common spacing
/// (in wavelengths).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpaShape {
    pub horizontal: usize,
    pub vertical: usize,
    pub spacing: f64,
}

impl UpaShape {
    pub fn new(horizontal: usize, vertical: usize, spacing: f64) -> Result<Self> {
        let s = UpaShape { horizontal, vertical, spacing };
        s.validate()?;
        Ok(s)
    }

    /// Half-wavelength array.
    pub fn half_wave(horizontal: usize, vertical: usize) -> Result<Self> {
        Self::new(horizontal, vertical, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizontal == 0 || self.vertical == 0 {
            return Err(Error::Config(format!(
                "array dimensions must be positive, got {}x{}",
                self.horizontal, self.vertical
            )));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::Config(format!("element spacing must be positive, got {}", self.spacing)));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.horizontal * self.vertical
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Spatial frequencies of a plane wave; `vertical` multiplies the outer
/// (row) index of the array, `horizontal` the inner index.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpatialFrequencyPair {
    pub vertical: f64,
    pub horizontal: f64,
}

impl SpatialFrequencyPair {
    pub fn new(vertical: f64, horizontal: f64) -> Self {
        SpatialFrequencyPair { vertical, horizontal }
    }

    /// Both components reduced modulo one into `[-0.5, 0.5)`.
    pub fn wrapped(self) -> Self {
        Self::new(wrap_frequency(self.vertical), wrap_frequency(self.horizontal))
    }

    /// Largest component-wise distance modulo one.
    pub fn circular_distance(self, o: Self) -> f64 {
        wrap_frequency(self.vertical - o.vertical)
            .abs()
            .max(wrap_frequency(self.horizontal - o.horizontal).abs())
    }
}

impl std::ops::Neg for SpatialFrequencyPair {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.vertical, -self.horizontal)
    }
}

impl std::ops::Add for SpatialFrequencyPair {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.vertical + o.vertical, self.horizontal + o.horizontal)
    }
}

impl std::ops::Sub for SpatialFrequencyPair {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.vertical - o.vertical, self.horizontal - o.horizontal)
    }
}

/// Reduces a spatial frequency modulo one into `[-0.5, 0.5)`.
pub fn wrap_frequency(f: f64) -> f64 {
    let w = f - (f + 0.5).floor();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// How RIS elements are assigned to groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupOrdering {
    /// `s × s` square tiles, tiles and tile elements both visited row by row.
    #[default]
    SquareBlocks,
    /// The closed-form floor/mod index map, taken literally.
    Printed,
}

/// Partition of the RIS elements into equal groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupLayout {
    shape: UpaShape,
    group_count: usize,
    group_size: usize,
    ordering: GroupOrdering,
    permutation: Vec<usize>,
}

impl GroupLayout {
    pub fn new(shape: UpaShape, group_count: usize, ordering: GroupOrdering) -> Result<Self> {
        shape.validate()?;
        let m = shape.len();
        if group_count == 0 || !m.is_multiple_of(group_count) {
            return Err(Error::Config(format!(
                "group count {group_count} does not divide the {m} RIS elements"
            )));
        }
        let group_size = m / group_count;
        let permutation = match ordering {
            GroupOrdering::SquareBlocks => {
                square_block_permutation(shape.horizontal, shape.vertical, group_size)?
            }
            GroupOrdering::Printed => printed_permutation(shape.horizontal, shape.vertical, group_size)?,
        };
        Ok(GroupLayout { shape, group_count, group_size, ordering, permutation })
    }

    pub fn shape(&self) -> UpaShape {
        self.shape
    }

    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn ordering(&self) -> GroupOrdering {
        self.ordering
    }

    pub fn element_count(&self) -> usize {
        self.shape.len()
    }

    /// Length of a stacked block-vectorised scattering matrix.
    pub fn vec_len(&self) -> usize {
        self.group_size * self.group_size * self.group_count
    }

    /// Map from rearranged position to raw array index.
    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }
}

/// The closed-form grouping index map with 0-based indices:
/// `j = M̄·Mv·⌊i/(M̄·Mv)⌋ + Mv·(⌊i/M̄⌋ mod M̄) + (i mod M̄) + M̄·(⌊i/M̄²⌋ mod (Mv/M̄))`.
pub fn printed_permutation(mh: usize, mv: usize, group_size: usize) -> Result<Vec<usize>> {
    let m = mh * mv;
    let gs = group_size;
    if gs == 0 || !mv.is_multiple_of(gs) || !m.is_multiple_of(gs * mv) {
        return Err(Error::Config(format!(
            "index map needs the group size {gs} to divide {mv} and {gs}*{mv} to divide {m}"
        )));
    }
    let perm: Vec<usize> = (0..m)
        .map(|i| gs * mv * (i / (gs * mv)) + mv * ((i / gs) % gs) + i % gs + gs * ((i / (gs * gs)) % (mv / gs)))
        .collect();
    check_bijection(&perm)?;
    Ok(perm)
}

/// Square-tile grouping: group `g = gv·(Mh/s) + gh`, element `a·s + b`, raw
/// index `(gv·s + a)·Mh + gh·s + b`.
pub fn square_block_permutation(mh: usize, mv: usize, group_size: usize) -> Result<Vec<usize>> {
    let s = (group_size as f64).sqrt().round() as usize;
    if s * s != group_size || s == 0 || !mh.is_multiple_of(s) || !mv.is_multiple_of(s) {
        return Err(Error::Config(format!(
            "group size {group_size} must be a square whose side divides both {mh} and {mv}"
        )));
    }
    let tiles_h = mh / s;
    let mut perm = Vec::with_capacity(mh * mv);
    for g in 0..(mh * mv / group_size) {
        let (gv, gh) = (g / tiles_h, g % tiles_h);
        for a in 0..s {
            for b in 0..s {
                perm.push((gv * s + a) * mh + gh * s + b);
            }
        }
    }
    Ok(perm)
}

fn check_bijection(perm: &[usize]) -> Result<()> {
    let mut seen = vec![false; perm.len()];
    for &j in perm {
        if j >= perm.len() || seen[j] {
            return Err(Error::Config("grouping index map is not a bijection".into()));
        }
        seen[j] = true;
    }
    Ok(())
}

/// Rearranged-position → raw-index map of a layout.
pub fn rearrangement_permutation(layout: &GroupLayout) -> Vec<usize> {
    layout.permutation.clone()
}

/// ULA response: entry `i` is `exp(-j·2π·i·freq)`.
pub fn steering_vector(length: usize, freq: f64) -> CVec {
    CVec::from_iterator(length, (0..length).map(|i| C64::from_polar(1.0, -2.0 * PI * i as f64 * freq)))
}

/// UPA response `a_v(vertical) ⊗ a_h(horizontal)`.
pub fn upa_response(shape: &UpaShape, pair: SpatialFrequencyPair) -> CVec {
    let v = steering_vector(shape.vertical, pair.vertical);
    let h = steering_vector(shape.horizontal, pair.horizontal);
    crate::linalg::kron_vec(&v, &h)
}

/// UPA response reordered so that group members are contiguous.
pub fn rearranged_upa_response(layout: &GroupLayout, pair: SpatialFrequencyPair) -> CVec {
    let raw = upa_response(&layout.shape, pair);
    CVec::from_iterator(raw.len(), layout.permutation.iter().map(|&j| raw[j]))
}

/// Unitary DFT matrix, `U[m, n] = exp(-j2πmn/P)/√P`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |r, c| C64::from_polar(scale, -2.0 * PI * ((r * c) % n) as f64 / n as f64))
}

/// Two-dimensional DFT basis `U_vertical ⊗ U_horizontal`; column
/// `kv·P_h + kh` is the normalised response at `(kv/P_v, kh/P_h)`.
pub fn dft_transform_matrix(shape: &UpaShape) -> CMat {
    dft_matrix(shape.vertical).kronecker(&dft_matrix(shape.horizontal))
}

/// Grid point `g` of a `size`-point grid over `[-spacing, spacing)`.
pub fn grid_frequency(g: usize, size: usize, spacing: f64) -> f64 {
    (-1.0 + 2.0 * g as f64 / size as f64) * spacing
}

/// Overcomplete steering dictionary on a `vertical_grid × horizontal_grid`
/// frequency grid; column `gv·horizontal_grid + gh`.
#[derive(Debug, Clone)]
pub struct AngularDictionary {
    pub atoms: CMat,
    pub vertical_grid: usize,
    pub horizontal_grid: usize,
    pub grid_frequencies: Vec<SpatialFrequencyPair>,
}

impl AngularDictionary {
    pub fn len(&self) -> usize {
        self.grid_frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid_frequencies.is_empty()
    }

    pub fn column_index(&self, gv: usize, gh: usize) -> usize {
        gv * self.horizontal_grid + gh
    }

    /// Column whose grid pair is closest (modulo one) to `pair`.
    pub fn nearest_index(&self, pair: SpatialFrequencyPair) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (c, g) in self.grid_frequencies.iter().enumerate() {
            let d = g.circular_distance(pair);
            if d < best.0 {
                best = (d, c);
            }
        }
        best.1
    }

    pub fn atom(&self, c: usize) -> CVec {
        self.atoms.column(c).into_owned()
    }
}

fn grid_pairs(vertical_grid: usize, horizontal_grid: usize, spacing: f64) -> Vec<SpatialFrequencyPair> {
    let mut out = Vec::with_capacity(vertical_grid * horizontal_grid);
    for gv in 0..vertical_grid {
        for gh in 0..horizontal_grid {
            out.push(SpatialFrequencyPair::new(
                grid_frequency(gv, vertical_grid, spacing),
                grid_frequency(gh, horizontal_grid, spacing),
            ));
        }
    }
    out
}

fn check_grid(shape: &UpaShape, vertical_grid: usize, horizontal_grid: usize) -> Result<()> {
    if vertical_grid < shape.vertical || horizontal_grid < shape.horizontal {
        return Err(Error::Config(format!(
            "dictionary grid {vertical_grid}x{horizontal_grid} is smaller than the {}x{} array",
            shape.vertical, shape.horizontal
        )));
    }
    Ok(())
}

/// RIS-side dictionary of rearranged responses.
pub fn build_dictionary(layout: &GroupLayout, vertical_grid: usize, horizontal_grid: usize) -> Result<AngularDictionary> {
    check_grid(&layout.shape, vertical_grid, horizontal_grid)?;
    let grid = grid_pairs(vertical_grid, horizontal_grid, layout.shape.spacing);
    let mut atoms = CMat::zeros(layout.element_count(), grid.len());
    for (c, &p) in grid.iter().enumerate() {
        atoms.set_column(c, &rearranged_upa_response(layout, p));
    }
    Ok(AngularDictionary { atoms, vertical_grid, horizontal_grid, grid_frequencies: grid })
}

/// Dictionary of plain (not rearranged) UPA responses.
pub fn build_upa_dictionary(shape: &UpaShape, vertical_grid: usize, horizontal_grid: usize) -> Result<AngularDictionary> {
    check_grid(shape, vertical_grid, horizontal_grid)?;
    let grid = grid_pairs(vertical_grid, horizontal_grid, shape.spacing);
    let mut atoms = CMat::zeros(shape.len(), grid.len());
    for (c, &p) in grid.iter().enumerate() {
        atoms.set_column(c, &upa_response(shape, p));
    }
    Ok(AngularDictionary { atoms, vertical_grid, horizontal_grid, grid_frequencies: grid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm_sqr, ONE};
    use proptest::prelude::*;

    fn close(a: C64, b: C64) -> bool {
        (a - b).norm() < 1e-12
    }

    #[test]
    fn steering_vector_examples() {
        assert!(steering_vector(4, 0.0).iter().all(|&z| close(z, ONE)));
        let v = steering_vector(2, 0.5);
        assert!(close(v[0], ONE) && close(v[1], -ONE));
        let v = steering_vector(3, 0.25);
        let expect = [ONE, C64::new(0.0, -1.0), -ONE];
        for i in 0..3 {
            assert!(close(v[i], expect[i]));
        }
    }

    #[test]
    fn upa_response_examples() {
        let s = UpaShape::half_wave(2, 2).unwrap();
        assert!(upa_response(&s, SpatialFrequencyPair::new(0.0, 0.0)).iter().all(|&z| close(z, ONE)));
        let v = upa_response(&s, SpatialFrequencyPair::new(0.5, 0.0));
        let expect = [ONE, ONE, -ONE, -ONE];
        for i in 0..4 {
            assert!(close(v[i], expect[i]));
        }
        let line = UpaShape::half_wave(5, 1).unwrap();
        let p = SpatialFrequencyPair::new(0.3, -0.17);
        assert!((upa_response(&line, p) - steering_vector(5, -0.17)).norm() < 1e-14);
    }

    #[test]
    fn printed_map_examples() {
        assert_eq!(printed_permutation(2, 4, 2).unwrap(), vec![0, 1, 4, 5, 2, 3, 6, 7]);
        assert_eq!(printed_permutation(4, 4, 4).unwrap(), (0..16).collect::<Vec<_>>());
        let l = GroupLayout::new(UpaShape::half_wave(2, 4).unwrap(), 4, GroupOrdering::Printed).unwrap();
        assert_eq!(rearrangement_permutation(&l), vec![0, 1, 4, 5, 2, 3, 6, 7]);
    }

    #[test]
    fn printed_map_rejects_undefined_layouts() {
        // 6x6 with 9-element groups: the map is undefined
        assert!(GroupLayout::new(UpaShape::half_wave(6, 6).unwrap(), 4, GroupOrdering::Printed).is_err());
        assert!(GroupLayout::new(UpaShape::half_wave(6, 6).unwrap(), 4, GroupOrdering::SquareBlocks).is_ok());
    }

    #[test]
    fn square_blocks_are_contiguous_tiles() {
        let perm = square_block_permutation(4, 4, 4).unwrap();
        assert_eq!(perm, vec![0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15]);
        assert!(GroupLayout::new(UpaShape::half_wave(4, 4).unwrap(), 8, GroupOrdering::SquareBlocks).is_err());
    }

    #[test]
    fn rearranged_response_examples() {
        let l = GroupLayout::new(UpaShape::half_wave(2, 4).unwrap(), 4, GroupOrdering::Printed).unwrap();
        assert!(rearranged_upa_response(&l, SpatialFrequencyPair::default()).iter().all(|&z| close(z, ONE)));
        let p = SpatialFrequencyPair::new(0.25, 0.0);
        let raw = upa_response(&l.shape(), p);
        let ra = rearranged_upa_response(&l, p);
        for (i, &j) in [0, 1, 4, 5, 2, 3, 6, 7].iter().enumerate() {
            assert_eq!(ra[i], raw[j]);
        }
        let id = GroupLayout::new(UpaShape::half_wave(4, 4).unwrap(), 4, GroupOrdering::Printed).unwrap();
        let q = SpatialFrequencyPair::new(0.11, -0.3);
        assert_eq!(rearranged_upa_response(&id, q), upa_response(&id.shape(), q));
    }

    #[test]
    fn dft_examples() {
        let one = dft_transform_matrix(&UpaShape::half_wave(1, 1).unwrap());
        assert!(close(one[(0, 0)], ONE));
        for (h, v) in [(2, 2), (8, 8), (4, 2)] {
            let u = dft_transform_matrix(&UpaShape::half_wave(h, v).unwrap());
            let n = (h * v) as f64;
            let err = fro_norm_sqr(&(u.adjoint() * &u - CMat::identity(h * v, h * v))).sqrt();
            assert!(err < 1e-10 * n);
        }
    }

    #[test]
    fn dft_single_peak_on_grid() {
        let s = UpaShape::half_wave(8, 8).unwrap();
        let u = dft_transform_matrix(&s);
        for (kv, kh) in [(0usize, 0usize), (3, 5), (7, 1)] {
            let a = upa_response(&s, SpatialFrequencyPair::new(kv as f64 / 8.0, kh as f64 / 8.0));
            let z = u.adjoint() * a;
            let big: Vec<usize> = (0..64).filter(|&i| z[i].norm() > 1e-9).collect();
            assert_eq!(big, vec![kv * 8 + kh]);
            assert!((z[kv * 8 + kh].norm() - 8.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dictionary_examples() {
        let l = GroupLayout::new(UpaShape::half_wave(4, 4).unwrap(), 4, GroupOrdering::SquareBlocks).unwrap();
        let d = build_dictionary(&l, 4, 4).unwrap();
        let gram = d.atoms.adjoint() * &d.atoms;
        assert!(fro_norm_sqr(&(gram - CMat::identity(16, 16) * C64::new(16.0, 0.0))).sqrt() < 1e-9);
        let d = build_dictionary(&l, 8, 8).unwrap();
        assert_eq!(d.len(), 4 * l.element_count());
        for c in 0..d.len() {
            assert!((d.atoms.column(c).norm() - 4.0).abs() < 1e-12);
            assert_eq!(d.atom(c), rearranged_upa_response(&l, d.grid_frequencies[c]));
        }
        assert_eq!(d.grid_frequencies[d.column_index(1, 3)], SpatialFrequencyPair::new(-0.375, -0.125));
        assert!(build_dictionary(&l, 3, 8).is_err());
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_frequency(0.5), -0.5);
        assert_eq!(wrap_frequency(-0.5), -0.5);
        assert!((wrap_frequency(0.75) + 0.25).abs() < 1e-15);
        assert!((wrap_frequency(-1.2) + 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn permutations_are_bijections(side in 1usize..4, th in 1usize..4, tv in 1usize..4) {
            let l = GroupLayout::new(UpaShape::half_wave(side * th, side * tv).unwrap(), th * tv, GroupOrdering::SquareBlocks).unwrap();
            let mut p = rearrangement_permutation(&l);
            p.sort_unstable();
            prop_assert_eq!(p, (0..l.element_count()).collect::<Vec<_>>());
        }

        #[test]
        fn printed_map_is_bijection_when_defined(gs in 1usize..4, k in 1usize..3, mh in 1usize..5) {
            let mv = gs * k;
            if let Ok(mut p) = printed_permutation(mh * gs, mv, gs) {
                p.sort_unstable();
                prop_assert_eq!(p, (0..mh * gs * mv).collect::<Vec<_>>());
            }
        }

        #[test]
        fn upa_entries_follow_closed_form(h in 1usize..6, v in 1usize..6, z in -0.5f64..0.5, x in -0.5f64..0.5) {
            let s = UpaShape::half_wave(h, v).unwrap();
            let a = upa_response(&s, SpatialFrequencyPair::new(z, x));
            for iv in 0..v {
                for ih in 0..h {
                    let e = C64::from_polar(1.0, -2.0 * PI * (iv as f64 * z + ih as f64 * x));
                    prop_assert!((a[iv * h + ih] - e).norm() < 1e-12);
                }
            }
        }
    }
}
