//! Full cascaded-channel estimation for the typical user: sparse recovery of
//! the strongest path column, then correlation search and least squares for
//! the remaining columns.

use std::f64::consts::PI;

use crate::bdris::TrainingSchedule;
use crate::config::{DeltaObjective, SystemConfig};
use crate::error::{dim_check, Error, Result};
use crate::geometry::{rearranged_upa_response, AngularDictionary, GroupLayout, SpatialFrequencyPair};
use crate::linalg::{dotc, gemm, matmul, norm_sqr, CMat, CVec, Op, C64, ONE, ZERO};
use crate::sparse::{omp, StopRule};
use crate::stage1::AoaEstimate;

/// `((1/(N√p)) Â^H Y)^H`, one column per estimated path.
pub fn project_out_bs_aoa(yk: &CMat, a_hat: &CMat, transmit_power: f64) -> Result<CMat> {
    dim_check(yk.nrows() == a_hat.nrows(), || "measurement rows differ from BS steering rows".into())?;
    let scale = 1.0 / (a_hat.nrows() as f64 * transmit_power.sqrt());
    Ok(gemm(Op::H, yk, Op::N, a_hat) * C64::new(scale, 0.0))
}

/// Column of largest Euclidean norm, lowest index on ties.
pub fn select_reference_column(ytilde: &CMat) -> Result<usize> {
    let mut best = (0.0, None);
    for c in 0..ytilde.ncols() {
        let p = ytilde.column(c).norm_squared();
        if p > best.0 {
            best = (p, Some(c));
        }
    }
    best.1.ok_or_else(|| Error::Degenerate("equivalent measurement is zero".into()))
}

/// Stacked per-group atom with blocks `conj(a_user)_g ⊗ (a_ris)_g`.
pub fn grouped_atom(user_atom: &CVec, ris_atom: &CVec, layout: &GroupLayout) -> CVec {
    let n = layout.group_size();
    let mut out = CVec::zeros(layout.vec_len());
    for g in 0..layout.group_count() {
        for i1 in 0..n {
            let u = user_atom[g * n + i1].conj();
            for i2 in 0..n {
                out[g * n * n + i1 * n + i2] = u * ris_atom[g * n + i2];
            }
        }
    }
    out
}

/// Explicit grouped dictionary; column `c_user·P_ris + c_ris`. Intended for
/// checks at small sizes.
pub fn grouped_dictionary(user: &AngularDictionary, ris: &AngularDictionary, layout: &GroupLayout) -> CMat {
    let mut d = CMat::zeros(layout.vec_len(), user.len() * ris.len());
    for c1 in 0..user.len() {
        let a1 = user.atom(c1);
        for c2 in 0..ris.len() {
            d.set_column(c1 * ris.len() + c2, &grouped_atom(&a1, &ris.atom(c2), layout));
        }
    }
    d
}

/// Multiplies each group block of the rearranged RIS vectors by the slot's
/// scattering block: `Φ_t X`.
pub(crate) fn apply_slot(schedule: &TrainingSchedule, t: usize, x: &CMat) -> CMat {
    let n = schedule.group_size;
    let slot = schedule.slot(t);
    let mut out = CMat::zeros(x.nrows(), x.ncols());
    for (g, b) in slot.blocks.iter().enumerate() {
        let part = b * x.rows(g * n, n);
        out.rows_mut(g * n, n).copy_from(&part);
    }
    out
}

/// Equivalent dictionary `Θ^H D` without forming `D`: row `t` holds
/// `conj(A_ris^H Φ_t A_user)` laid out as `c_user·P_ris + c_ris`.
pub fn equivalent_dictionary(schedule: &TrainingSchedule, user: &AngularDictionary, ris: &AngularDictionary) -> CMat {
    let (p1, p2) = (user.len(), ris.len());
    let mut out = CMat::zeros(schedule.slots(), p1 * p2);
    for t in 0..schedule.slots() {
        let w = apply_slot(schedule, t, &user.atoms);
        let e = gemm(Op::H, &ris.atoms, Op::N, &w);
        for c1 in 0..p1 {
            for c2 in 0..p2 {
                out[(t, c1 * p2 + c2)] = e[(c2, c1)].conj();
            }
        }
    }
    out
}

/// One atom of a recovered column: grid indices and coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnAtom {
    pub user_index: usize,
    pub ris_index: usize,
    pub coefficient: C64,
}

/// Recovered strongest-path column.
#[derive(Debug, Clone)]
pub struct ReferenceColumn {
    pub column: CVec,
    /// Atoms sorted by decreasing coefficient magnitude.
    pub atoms: Vec<ColumnAtom>,
    /// Fewer than two training slots per selected atom.
    pub ill_conditioned: bool,
}

/// Sparse recovery of the strongest column on the grouped dictionary.
pub fn estimate_reference_column(
    y_ref: &CVec,
    equivalent: &CMat,
    user: &AngularDictionary,
    ris: &AngularDictionary,
    layout: &GroupLayout,
    stop: StopRule,
) -> Result<ReferenceColumn> {
    dim_check(equivalent.ncols() == user.len() * ris.len(), || "equivalent dictionary width mismatch".into())?;
    let sol = omp(equivalent, y_ref, stop)?;
    let ill_conditioned = y_ref.len() < 2 * sol.support.len();
    let mut atoms: Vec<ColumnAtom> = sol
        .support
        .iter()
        .zip(sol.coefficients.iter())
        .map(|(&c, &b)| ColumnAtom { user_index: c / ris.len(), ris_index: c % ris.len(), coefficient: b })
        .collect();
    atoms.sort_by(|a, b| b.coefficient.norm().total_cmp(&a.coefficient.norm()));
    let mut column = CVec::zeros(layout.vec_len());
    for a in &atoms {
        column += grouped_atom(&user.atom(a.user_index), &ris.atom(a.ris_index), layout) * a.coefficient;
    }
    Ok(ReferenceColumn { column, atoms, ill_conditioned })
}

/// Diagonal of the block phase-compensation matrix: entry `(g, i1, i2)` is
/// `a_ra(Δ)[g·M̄ + i2]`.
pub fn delta_compensation(layout: &GroupLayout, delta: SpatialFrequencyPair) -> CVec {
    let a = rearranged_upa_response(layout, delta);
    let n = layout.group_size();
    let mut d = CVec::zeros(layout.vec_len());
    for g in 0..layout.group_count() {
        for i1 in 0..n {
            for i2 in 0..n {
                d[g * n * n + i1 * n + i2] = a[g * n + i2];
            }
        }
    }
    d
}

/// Search grid for path differences over `[-2d/λ, 2d/λ)` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaGrid {
    pub vertical_points: usize,
    pub horizontal_points: usize,
    pub objective: DeltaObjective,
}

impl DeltaGrid {
    pub fn from_config(c: &SystemConfig) -> Self {
        let (vertical_points, horizontal_points) = c.delta_grid();
        DeltaGrid { vertical_points, horizontal_points, objective: c.estimation.delta_objective }
    }

    fn values(points: usize, spacing: f64) -> Vec<f64> {
        (0..points).map(|i| (-1.0 + 2.0 * i as f64 / points as f64) * 2.0 * spacing).collect()
    }
}

/// Result for one non-reference column.
#[derive(Debug, Clone)]
pub struct OtherColumn {
    pub delta: SpatialFrequencyPair,
    /// Conjugated gain ratio `γ*`.
    pub gain_conj: C64,
    pub column: CVec,
    /// Correlation magnitude at the selected delta and at zero delta.
    pub objective: f64,
    pub objective_at_zero: f64,
}

/// Per rearranged element `m`, `s_m = Σ conj(w_e) q_e` over the entries `e`
/// that the compensation multiplies by element `m`, with `w = Θ y`.
fn correlation_weights(y: &CVec, schedule: &TrainingSchedule, q_ref: &CVec, layout: &GroupLayout) -> Vec<C64> {
    let w = &schedule.matrix * y;
    let n = layout.group_size();
    let mut s = vec![ZERO; layout.element_count()];
    for g in 0..layout.group_count() {
        for i1 in 0..n {
            for i2 in 0..n {
                let e = g * n * n + i1 * n + i2;
                s[g * n + i2] += w[e].conj() * q_ref[e];
            }
        }
    }
    s
}

/// `|y^H Θ^H ΔD(Δ) q_ref|` over the whole delta grid, separably.
fn correlation_surface(
    s: &[C64],
    layout: &GroupLayout,
    grid: DeltaGrid,
) -> (Vec<f64>, Vec<f64>, CMat) {
    let shape = layout.shape();
    let (mh, mv) = (shape.horizontal, shape.vertical);
    // raw-index weights
    let mut raw = vec![ZERO; mh * mv];
    for (m, &j) in layout.permutation().iter().enumerate() {
        raw[j] = s[m];
    }
    let dv = DeltaGrid::values(grid.vertical_points, shape.spacing);
    let dh = DeltaGrid::values(grid.horizontal_points, shape.spacing);
    let mut partial = CMat::zeros(mv, dh.len());
    for (b, &x) in dh.iter().enumerate() {
        for iv in 0..mv {
            let mut acc = ZERO;
            for ih in 0..mh {
                acc += raw[iv * mh + ih] * C64::from_polar(1.0, -2.0 * PI * ih as f64 * x);
            }
            partial[(iv, b)] = acc;
        }
    }
    let mut surface = CMat::zeros(dv.len(), dh.len());
    for (a, &z) in dv.iter().enumerate() {
        for b in 0..dh.len() {
            let mut acc = ZERO;
            for iv in 0..mv {
                acc += partial[(iv, b)] * C64::from_polar(1.0, -2.0 * PI * iv as f64 * z);
            }
            surface[(a, b)] = acc;
        }
    }
    (dv, dh, surface)
}

/// `B` with `Θ^H ΔD(Δ) q_ref = B a(Δ)`: row `t`, rearranged element `m`.
fn compensation_basis(schedule: &TrainingSchedule, q_ref: &CVec, layout: &GroupLayout) -> CMat {
    let n = layout.group_size();
    let mut b = CMat::zeros(schedule.slots(), layout.element_count());
    for t in 0..schedule.slots() {
        for g in 0..layout.group_count() {
            for i1 in 0..n {
                for i2 in 0..n {
                    let e = g * n * n + i1 * n + i2;
                    b[(t, g * n + i2)] += schedule.matrix[(e, t)].conj() * q_ref[e];
                }
            }
        }
    }
    b
}

/// Least-squares fit `|c^H y| / ‖c‖` of every grid point.
fn normalized_surface(y: &CVec, schedule: &TrainingSchedule, q_ref: &CVec, layout: &GroupLayout, grid: DeltaGrid) -> (Vec<f64>, Vec<f64>, CMat) {
    let basis = compensation_basis(schedule, q_ref, layout);
    let spacing = layout.shape().spacing;
    let dv = DeltaGrid::values(grid.vertical_points, spacing);
    let dh = DeltaGrid::values(grid.horizontal_points, spacing);
    let mut atoms = CMat::zeros(layout.element_count(), dv.len() * dh.len());
    for (a, &v) in dv.iter().enumerate() {
        for (b, &h) in dh.iter().enumerate() {
            atoms.set_column(a * dh.len() + b, &rearranged_upa_response(layout, SpatialFrequencyPair::new(v, h)));
        }
    }
    let c = matmul(&basis, &atoms);
    let surface = CMat::from_fn(dv.len(), dh.len(), |a, b| {
        let col = c.column(a * dh.len() + b);
        let norm = col.norm();
        if norm == 0.0 {
            ZERO
        } else {
            C64::new(col.dotc(y).norm() / norm, 0.0)
        }
    });
    (dv, dh, surface)
}

/// Correlation search for the path difference, then the scalar least-squares
/// gain and the propagated column.
pub fn estimate_other_column(
    y: &CVec,
    schedule: &TrainingSchedule,
    q_ref: &CVec,
    layout: &GroupLayout,
    grid: DeltaGrid,
) -> Result<OtherColumn> {
    dim_check(y.len() == schedule.slots() && q_ref.len() == layout.vec_len(), || "column sizes do not match the schedule".into())?;
    let (dv, dh, surface, zero) = match grid.objective {
        DeltaObjective::Raw => {
            let s = correlation_weights(y, schedule, q_ref, layout);
            let (dv, dh, surface) = correlation_surface(&s, layout, grid);
            (dv, dh, surface, s.iter().sum::<C64>().norm())
        }
        DeltaObjective::Normalized => {
            let (dv, dh, surface) = normalized_surface(y, schedule, q_ref, layout, grid);
            let c = schedule.matrix.adjoint() * q_ref;
            let zero = if norm_sqr(&c) == 0.0 { 0.0 } else { c.dotc(y).norm() / c.norm() };
            (dv, dh, surface, zero)
        }
    };
    let mut best = (-1.0, 0, 0);
    for a in 0..dv.len() {
        for b in 0..dh.len() {
            let v = surface[(a, b)].norm();
            if v > best.0 {
                best = (v, a, b);
            }
        }
    }
    let delta = SpatialFrequencyPair::new(dv[best.1], dh[best.2]);
    let compensated = delta_compensation(layout, delta).component_mul(q_ref);
    let c = schedule.matrix.adjoint() * &compensated;
    let cc = norm_sqr(&c);
    if cc == 0.0 {
        return Err(Error::Degenerate("correlation vector is zero".into()));
    }
    let gain_conj = dotc(&c, y) / cc;
    Ok(OtherColumn { delta, gain_conj, column: compensated * gain_conj, objective: best.0, objective_at_zero: zero })
}

/// Stage II output.
#[derive(Debug, Clone)]
pub struct TypicalUserEstimate {
    pub reference_index: usize,
    pub reference: ReferenceColumn,
    /// Per path: difference to the reference RIS departure angle (zero for the reference).
    pub deltas: Vec<SpatialFrequencyPair>,
    /// Per path: `γ*` (one for the reference).
    pub gain_ratios_conj: Vec<C64>,
    /// `M̄²G × L̂` recovered columns.
    pub columns: CMat,
    /// `Â_N · columns^H`.
    pub cascaded: CMat,
}

impl TypicalUserEstimate {
    /// Grid index of the reference RIS departure angle (strongest atom).
    pub fn reference_aod_index(&self) -> Option<usize> {
        self.reference.atoms.first().map(|a| a.ris_index)
    }

    /// `α_r^* β̄^*`: coefficient of the strongest atom.
    pub fn leading_coefficient(&self) -> Option<C64> {
        self.reference.atoms.first().map(|a| a.coefficient)
    }
}

/// Dictionaries and search settings shared by Stages II and III.
#[derive(Debug, Clone)]
pub struct RisDictionaries {
    pub layout: GroupLayout,
    /// User-side (arrival) dictionary.
    pub user: AngularDictionary,
    /// RIS departure dictionary.
    pub ris: AngularDictionary,
}

impl RisDictionaries {
    pub fn new(layout: &GroupLayout, vertical_grid: usize, horizontal_grid: usize) -> Result<Self> {
        let d = crate::geometry::build_dictionary(layout, vertical_grid, horizontal_grid)?;
        Ok(RisDictionaries { layout: layout.clone(), user: d.clone(), ris: d })
    }
}

/// Full typical-user estimate.
pub fn estimate_typical_user(
    y1: &CMat,
    aoa: &AoaEstimate,
    schedule: &TrainingSchedule,
    dicts: &RisDictionaries,
    grid: DeltaGrid,
    stop: StopRule,
    transmit_power: f64,
) -> Result<TypicalUserEstimate> {
    let ytilde = project_out_bs_aoa(y1, &aoa.steering, transmit_power)?;
    let r = select_reference_column(&ytilde)?;
    let equivalent = equivalent_dictionary(schedule, &dicts.user, &dicts.ris);
    let reference = estimate_reference_column(&ytilde.column(r).into_owned(), &equivalent, &dicts.user, &dicts.ris, &dicts.layout, stop)?;
    if reference.atoms.is_empty() {
        return Err(Error::Degenerate("reference column recovery selected no atoms".into()));
    }
    let l_hat = ytilde.ncols();
    let mut deltas = vec![SpatialFrequencyPair::default(); l_hat];
    let mut gains = vec![ONE; l_hat];
    let mut columns = CMat::zeros(dicts.layout.vec_len(), l_hat);
    columns.set_column(r, &reference.column);
    for l in (0..l_hat).filter(|&l| l != r) {
        let o = estimate_other_column(&ytilde.column(l).into_owned(), schedule, &reference.column, &dicts.layout, grid)?;
        deltas[l] = o.delta;
        gains[l] = o.gain_conj;
        columns.set_column(l, &o.column);
    }
    let cascaded = gemm(Op::N, &aoa.steering, Op::H, &columns);
    Ok(TypicalUserEstimate { reference_index: r, reference, deltas, gain_ratios_conj: gains, columns, cascaded })
}

/// Alternative that runs the sparse recovery independently on every column.
pub fn estimate_typical_user_per_column(
    y1: &CMat,
    aoa: &AoaEstimate,
    schedule: &TrainingSchedule,
    dicts: &RisDictionaries,
    stop: StopRule,
    transmit_power: f64,
) -> Result<CMat> {
    let ytilde = project_out_bs_aoa(y1, &aoa.steering, transmit_power)?;
    let equivalent = equivalent_dictionary(schedule, &dicts.user, &dicts.ris);
    let mut columns = CMat::zeros(dicts.layout.vec_len(), ytilde.ncols());
    for l in 0..ytilde.ncols() {
        let c = estimate_reference_column(&ytilde.column(l).into_owned(), &equivalent, &dicts.user, &dicts.ris, &dicts.layout, stop)?;
        columns.set_column(l, &c.column);
    }
    Ok(matmul(&aoa.steering, &columns.adjoint()))
}
