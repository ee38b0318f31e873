//! Grasp stability from internal forces.
//!
//! A grasp is stable when some contact can push with unit normal force while
//! the remaining contacts, using non-negative normal forces only, cancel the
//! resulting object wrench. For each choice of pinned contact `j` we solve
//!
//! ```text
//! minimize ||W G^T [c_1 n_1 ... c_k n_k]||^2   s.t.  c >= 0,  c_j = 1
//! ```
//!
//! by projected gradient, then polish the result with an exact
//! least-squares solve on the detected support. `W = diag(1, 1, 1/rho)`
//! turns the torque into force units using the object's bounding radius.

use nalgebra::{DMatrix, DVector, Matrix3xX};

use crate::error::{Error, Result};
use crate::hand::{grasp_map_of, ContactInfo, ContactSet, ObjectShape, State};

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityConfig {
    /// Wrench-norm threshold below which the grasp counts as stable.
    pub eps_stab: f64,
    /// Length used to convert torque to force units (meters).
    pub torque_scale: f64,
    /// Stationarity tolerance of the projected-gradient iterations.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            eps_stab: 0.2,
            torque_scale: 0.05,
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

impl StabilityConfig {
    /// Default thresholds with the torque scale set to the object's
    /// bounding radius.
    pub fn for_shape(shape: &ObjectShape) -> Self {
        Self {
            torque_scale: shape.bounding_radius(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_stab > 0.0) || !(self.torque_scale > 0.0) || !(self.tolerance > 0.0) {
            return Err(Error::Config(
                "stability: eps_stab, torque_scale and tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilityResult {
    /// Minimal weighted wrench norm over all pinned indices.
    pub wrench_norm: f64,
    /// Optimal normal-force magnitudes for the best pinned index.
    pub magnitudes: Vec<f64>,
    pub pinned: usize,
    pub stable: bool,
}

/// Columns `W G_i^T n_i`: the weighted wrench of a unit normal force at each
/// contact.
fn wrench_columns(normals: &[[f64; 2]], grasp: &DMatrix<f64>, torque_scale: f64) -> Matrix3xX<f64> {
    let k = normals.len();
    let mut a = Matrix3xX::zeros(k);
    for (i, n) in normals.iter().enumerate() {
        for row in 0..3 {
            a[(row, i)] = grasp[(2 * i, row)] * n[0] + grasp[(2 * i + 1, row)] * n[1];
        }
        a[(2, i)] /= torque_scale;
    }
    a
}

fn objective(a: &Matrix3xX<f64>, c: &[f64]) -> f64 {
    (a * DVector::from_column_slice(c)).norm_squared()
}

/// Exact minimiser of `||A c||^2` with `c_j = 1` and the variables outside
/// `support` fixed at zero. `None` if a support variable comes out negative.
fn solve_on_support(a: &Matrix3xX<f64>, pinned: usize, support: &[usize]) -> Option<Vec<f64>> {
    let k = a.ncols();
    let mut c = vec![0.0; k];
    c[pinned] = 1.0;
    if support.is_empty() {
        return Some(c);
    }
    let mut af = DMatrix::zeros(3, support.len());
    for (col, &i) in support.iter().enumerate() {
        af.set_column(col, &a.column(i));
    }
    let rhs = -DVector::from_iterator(3, a.column(pinned).iter().copied());
    let sol = af.svd(true, true).solve(&rhs, 1e-12).ok()?;
    for (col, &i) in support.iter().enumerate() {
        if sol[col] < -1e-12 {
            return None;
        }
        c[i] = sol[col].max(0.0);
    }
    Some(c)
}

fn solve_pinned(a: &Matrix3xX<f64>, pinned: usize, config: &StabilityConfig) -> Vec<f64> {
    let k = a.ncols();
    let ata = a.transpose() * a;
    // 2 * trace bounds twice the largest eigenvalue.
    let lipschitz = 2.0 * ata.trace();
    let mut c = vec![0.0; k];
    c[pinned] = 1.0;
    if lipschitz > 0.0 && k > 1 {
        let step = 1.0 / lipschitz;
        for _ in 0..config.max_iterations {
            let mut moved: f64 = 0.0;
            let grad: Vec<f64> = (0..k)
                .map(|i| 2.0 * (0..k).map(|l| ata[(i, l)] * c[l]).sum::<f64>())
                .collect();
            for i in (0..k).filter(|&i| i != pinned) {
                let next = (c[i] - step * grad[i]).max(0.0);
                moved = moved.max((next - c[i]).abs());
                c[i] = next;
            }
            if moved < config.tolerance {
                break;
            }
        }
    }
    // Polish on the support found by the iterations.
    let support: Vec<usize> = (0..k).filter(|&i| i != pinned && c[i] > 1e-9).collect();
    if let Some(exact) = solve_on_support(a, pinned, &support) {
        if objective(a, &exact) <= objective(a, &c) + 1e-15 {
            return exact;
        }
    }
    c
}

/// Solves the internal-force program for `contacts` (all assumed active)
/// with grasp map `grasp` (`2k x 3`, rows in the same order).
pub fn internal_force_qp(
    contacts: &[ContactInfo],
    grasp: &DMatrix<f64>,
    config: &StabilityConfig,
) -> Result<StabilityResult> {
    if contacts.is_empty() {
        return Err(Error::EmptyContacts);
    }
    let normals: Vec<[f64; 2]> = contacts.iter().map(|c| [c.normal.x, c.normal.y]).collect();
    Ok(solve_normals(&normals, grasp, config))
}

pub(crate) fn solve_normals(
    normals: &[[f64; 2]],
    grasp: &DMatrix<f64>,
    config: &StabilityConfig,
) -> StabilityResult {
    let a = wrench_columns(normals, grasp, config.torque_scale);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for j in 0..normals.len() {
        let c = solve_pinned(&a, j, config);
        let norm = objective(&a, &c).sqrt();
        if best.as_ref().map_or(true, |(b, _, _)| norm < *b) {
            best = Some((norm, j, c));
        }
    }
    let (wrench_norm, pinned, magnitudes) = best.expect("at least one contact");
    StabilityResult {
        wrench_norm,
        magnitudes,
        pinned,
        stable: wrench_norm < config.eps_stab,
    }
}

/// Stability of the active contacts of `contacts` at `state`.
pub fn grasp_stability(
    state: &State,
    contacts: &ContactSet,
    config: &StabilityConfig,
) -> Result<StabilityResult> {
    let active: Vec<ContactInfo> = contacts.active().copied().collect();
    let g = grasp_map_of(state, &active);
    internal_force_qp(&active, &g, config)
}

/// `true` iff the minimal wrench norm is below `eps_stab`; no contacts
/// means unstable.
pub fn is_stable(contacts: &[ContactInfo], grasp: &DMatrix<f64>, config: &StabilityConfig) -> bool {
    internal_force_qp(contacts, grasp, config).is_ok_and(|r| r.stable)
}

/// [`is_stable`] for the active contacts of a contact set.
pub fn is_grasp_stable(state: &State, contacts: &ContactSet, config: &StabilityConfig) -> bool {
    grasp_stability(state, contacts, config).is_ok_and(|r| r.stable)
}

/// Exhaustive grid search for the pinned program: every free magnitude
/// ranges over `{0, step, 2 step, ..., cap}`. Used to validate the solver.
pub fn qp_bruteforce_oracle(
    contacts: &[ContactInfo],
    grasp: &DMatrix<f64>,
    pinned: usize,
    step: f64,
    cap: f64,
    torque_scale: f64,
) -> Result<f64> {
    let k = contacts.len();
    if k == 0 {
        return Err(Error::EmptyContacts);
    }
    if k > 4 {
        return Err(Error::OracleScope(k));
    }
    let normals: Vec<[f64; 2]> = contacts.iter().map(|c| [c.normal.x, c.normal.y]).collect();
    let a = wrench_columns(&normals, grasp, torque_scale);
    let levels = (cap / step).round() as usize + 1;
    let free: Vec<usize> = (0..k).filter(|&i| i != pinned).collect();
    let total = levels.pow(free.len() as u32);
    let base = a.column(pinned).into_owned();
    let mut best = f64::INFINITY;
    for idx in 0..total {
        let mut w = base;
        let mut rem = idx;
        for &i in &free {
            let c = (rem % levels) as f64 * step;
            rem /= levels;
            w += a.column(i) * c;
        }
        best = best.min(w.norm());
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector2;
    use std::f64::consts::PI;

    /// Contacts on a unit disc at the given angles, pushing toward the center.
    fn disc_contacts(angles: &[f64]) -> (Vec<ContactInfo>, DMatrix<f64>) {
        let contacts: Vec<ContactInfo> = angles
            .iter()
            .enumerate()
            .map(|(i, &a)| ContactInfo {
                finger: i,
                point: Vector2::new(a.cos(), a.sin()),
                normal: -Vector2::new(a.cos(), a.sin()),
                gap: 0.0,
                depth: 0.0,
                active: true,
            })
            .collect();
        let state = State::new(vec![], Default::default());
        let g = grasp_map_of(&state, &contacts);
        (contacts, g)
    }

    fn cfg() -> StabilityConfig {
        StabilityConfig {
            torque_scale: 1.0,
            ..Default::default()
        }
    }

    #[test]
    fn antipodal_pair_is_stable() {
        let (c, g) = disc_contacts(&[0.0, PI]);
        let r = internal_force_qp(&c, &g, &cfg()).unwrap();
        assert!(r.wrench_norm < 1e-12);
        assert!((r.magnitudes[0] - 1.0).abs() < 1e-12 && (r.magnitudes[1] - 1.0).abs() < 1e-12);
        assert!(r.stable);
    }

    #[test]
    fn single_contact_has_unit_wrench() {
        let (c, g) = disc_contacts(&[0.3]);
        let r = internal_force_qp(&c, &g, &cfg()).unwrap();
        assert!((r.wrench_norm - 1.0).abs() < 1e-12);
        assert!(!is_stable(&c, &g, &StabilityConfig { eps_stab: 0.1, ..cfg() }));
    }

    #[test]
    fn three_at_120_degrees_is_stable() {
        let (c, g) = disc_contacts(&[0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0]);
        let r = internal_force_qp(&c, &g, &cfg()).unwrap();
        assert!(r.wrench_norm < 1e-9, "{}", r.wrench_norm);
        assert!(r.stable);
    }

    #[test]
    fn orthogonal_normals_cannot_cancel() {
        let (c, g) = disc_contacts(&[0.0, PI / 2.0]);
        let r = internal_force_qp(&c, &g, &cfg()).unwrap();
        assert!((r.wrench_norm - 1.0).abs() < 1e-12);
        assert_eq!(r.magnitudes.iter().filter(|&&m| m == 0.0).count(), 1);
        assert!(!r.stable);
    }

    #[test]
    fn empty_contacts() {
        let g = DMatrix::zeros(0, 3);
        assert!(matches!(
            internal_force_qp(&[], &g, &cfg()),
            Err(Error::EmptyContacts)
        ));
        assert!(!is_stable(&[], &g, &cfg()));
    }

    #[test]
    fn oracle_matches_analytic_cases() {
        let (c, g) = disc_contacts(&[0.0, PI]);
        assert!(qp_bruteforce_oracle(&c, &g, 0, 0.05, 10.0, 1.0).unwrap() < 1e-12);
        let (c, g) = disc_contacts(&[1.0]);
        assert!((qp_bruteforce_oracle(&c, &g, 0, 0.05, 10.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        let (c, g) = disc_contacts(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert!(matches!(
            qp_bruteforce_oracle(&c, &g, 0, 0.05, 10.0, 1.0),
            Err(Error::OracleScope(5))
        ));
    }
}
