//! Non-equilibrium steady state and the derived thermodynamic observables:
//! heat currents, entropy production rate, COP, Carnot references and
//! internal temperatures.
//!
//! Sign convention: a positive current means heat flows from the bath into
//! the system.

use nalgebra::{Complex, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ChillerError, Result};
use crate::lindblad::{build_liouvillian, CMatrix, Liouvillian};
use crate::models::{Bath, BathSpec, ModelKind, ModelParams, PerBath, SystemModel};
use crate::scalar::{lit, Scalar};

/// Raw steady-state solution before observables are attached.
#[derive(Debug, Clone)]
pub struct SteadySolution<T: Scalar> {
    /// Density operator in the energy basis.
    pub rho: CMatrix<T>,
    /// `||L vec(rho)||_2` of the returned state.
    pub residual: T,
    /// Number of singular values of the generator at numerical zero.
    pub null_dim: usize,
}

/// Steady state plus every derived thermodynamic quantity.
#[derive(Debug, Clone)]
pub struct SteadyReport<T: Scalar> {
    /// Density operator in the energy basis.
    pub state: CMatrix<T>,
    /// Diagonal of the state in the energy basis.
    pub populations: DVector<T>,
    /// Heat current from each bath into the system.
    pub currents: PerBath<T>,
    /// Irreversible entropy production rate `-sum_a Qdot_a / T_a`.
    pub entropy_rate: T,
    /// `Qdot_c / Qdot_w`, defined only in the absorption-driven regime.
    pub cop: Option<T>,
    /// True iff net heat is extracted from the cold bath.
    pub cooling: bool,
    /// Model-dependent internal temperatures (empty where undefined).
    pub internal_temps: Vec<(String, T)>,
    /// Steady-state residual norm.
    pub residual: T,
    /// Kernel dimension seen by the solver (1 for a unique steady state).
    pub null_dim: usize,
}

/// Serialization mirror of [`SteadyReport`]: the state is flattened to
/// row-major `[re, im]` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SteadyReportData<T> {
    pub dim: usize,
    /// Row-major `[re, im]` entries of the density operator (energy basis).
    pub state: Vec<[T; 2]>,
    pub populations: Vec<T>,
    pub currents: PerBath<T>,
    pub entropy_rate: T,
    pub cop: Option<T>,
    pub cooling: bool,
    pub internal_temps: Vec<(String, T)>,
    pub residual: T,
    pub null_dim: usize,
}

impl<T: Scalar> SteadyReport<T> {
    pub fn to_data(&self) -> SteadyReportData<T> {
        let d = self.populations.len();
        let mut state = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let z = self.state[(i, j)];
                state.push([z.re, z.im]);
            }
        }
        SteadyReportData {
            dim: d,
            state,
            populations: self.populations.iter().copied().collect(),
            currents: self.currents,
            entropy_rate: self.entropy_rate,
            cop: self.cop,
            cooling: self.cooling,
            internal_temps: self.internal_temps.clone(),
            residual: self.residual,
            null_dim: self.null_dim,
        }
    }
}

/// Solve `L rho = 0` with unit trace.
///
/// The kernel dimension is established first (SVD); a non-unique steady
/// state is reported as an error rather than averaged over. The unique
/// solution comes from an LU solve with the trace-normalization row
/// replacing the first (redundant) equation, followed by symmetrization and
/// clipping of eigenvalue noise in `[-1e-10, 0)`.
pub fn steady_state<T: Scalar>(liouv: &Liouvillian<T>) -> Result<SteadySolution<T>> {
    let d = liouv.dim;
    let n = d * d;

    let svd = liouv.total.clone().svd(false, false);
    let mut smax = T::zero();
    for s in svd.singular_values.iter() {
        if *s > smax {
            smax = *s;
        }
    }
    if !(smax > T::zero()) {
        return Err(ChillerError::SolverFailure("zero generator".into()));
    }
    // 1e-10 relative for f64; widened to the working precision for f32
    let null_tol = smax * lit::<T>(1e-10).max(T::default_epsilon() * lit(100.0));
    let null_dim = svd
        .singular_values
        .iter()
        .filter(|s| **s <= null_tol)
        .count();
    if null_dim == 0 {
        return Err(ChillerError::SolverFailure(
            "no stationary state within tolerance".into(),
        ));
    }
    if null_dim > 1 {
        return Err(ChillerError::DegenerateSteadyState { null_dim });
    }

    let mut m = liouv.total.clone();
    for col in 0..n {
        m[(0, col)] = Complex::new(T::zero(), T::zero());
    }
    for i in 0..d {
        m[(0, i * d + i)] = Complex::new(T::one(), T::zero());
    }
    let mut b = nalgebra::DVector::from_element(n, Complex::new(T::zero(), T::zero()));
    b[0] = Complex::new(T::one(), T::zero());

    let v = m
        .lu()
        .solve(&b)
        .ok_or_else(|| ChillerError::SolverFailure("LU solve failed".into()))?;

    let rho_raw = liouv.devectorize(&v);
    let rho_sym = (&rho_raw + rho_raw.adjoint()) * Complex::new(lit::<T>(0.5), T::zero());

    // clip small negative eigenvalues, reject genuinely indefinite states
    let eig = rho_sym.clone().symmetric_eigen();
    let clip = -lit::<T>(1e-10).max(T::default_epsilon() * lit(100.0));
    let mut vals = eig.eigenvalues.clone();
    for i in 0..d {
        let ev = vals[i];
        if ev < clip {
            return Err(ChillerError::SolverFailure(format!(
                "steady state has negative eigenvalue {ev}"
            )));
        }
        if ev < T::zero() {
            vals[i] = T::zero();
        }
    }
    let mut trace = T::zero();
    for i in 0..d {
        trace += vals[i];
    }
    if !(trace > T::zero()) {
        return Err(ChillerError::SolverFailure("zero-trace steady state".into()));
    }
    let diag = CMatrix::from_diagonal(&vals.map(|x| Complex::new(x / trace, T::zero())));
    let rho = &eig.eigenvectors * diag * eig.eigenvectors.adjoint();

    let residual = (&liouv.total * liouv.vectorize(&rho)).norm();
    Ok(SteadySolution {
        rho,
        residual,
        null_dim,
    })
}

/// Heat currents `Qdot_alpha = tr{H L_alpha rho}` at the steady state.
pub fn heat_currents<T: Scalar>(liouv: &Liouvillian<T>, rho: &CMatrix<T>) -> PerBath<T> {
    let h = CMatrix::from_diagonal(&liouv.energies.map(|e| Complex::new(e, T::zero())));
    PerBath::new(
        current_of(liouv, Bath::Work, &h, rho),
        current_of(liouv, Bath::Hot, &h, rho),
        current_of(liouv, Bath::Cold, &h, rho),
    )
}

fn current_of<T: Scalar>(
    liouv: &Liouvillian<T>,
    bath: Bath,
    h: &CMatrix<T>,
    rho: &CMatrix<T>,
) -> T {
    let drho = liouv.apply_dissipator(bath, rho);
    (h * drho).trace().re
}

/// Entropy production rate `-sum_alpha Qdot_alpha / T_alpha`.
pub fn entropy_rate<T: Scalar>(currents: &PerBath<T>, temperatures: &PerBath<T>) -> T {
    let mut s = T::zero();
    for (bath, q) in currents.iter() {
        s -= *q / *temperatures.get(bath);
    }
    s
}

/// Coefficient of performance `Qdot_c / Qdot_w`, absent unless `Qdot_w > 0`.
pub fn cop<T: Scalar>(currents: &PerBath<T>) -> Option<T> {
    if currents.work > T::zero() {
        Some(currents.cold / currents.work)
    } else {
        None
    }
}

/// Threshold cold frequency below which the three-level device cools:
/// `omega_h T_c (T_w - T_h) / (T_h (T_w - T_c))`.
pub fn omega_c_rev<T: Scalar>(t_w: T, t_h: T, t_c: T, omega_h: T) -> Result<T> {
    check_temperature_order(t_w, t_h, t_c)?;
    Ok(omega_h * t_c * (t_w - t_h) / (t_h * (t_w - t_c)))
}

/// Carnot coefficient of performance `T_c (T_w - T_h) / (T_w (T_h - T_c))`.
pub fn carnot_cop<T: Scalar>(t_w: T, t_h: T, t_c: T) -> Result<T> {
    check_temperature_order(t_w, t_h, t_c)?;
    Ok(t_c * (t_w - t_h) / (t_w * (t_h - t_c)))
}

fn check_temperature_order<T: Scalar>(t_w: T, t_h: T, t_c: T) -> Result<()> {
    // T_w = T_h degenerates gracefully (no work gradient, zero window/COP);
    // T_h = T_c does not (the hot-cold gradient sits in a denominator)
    if t_w >= t_h && t_h > t_c && t_c > T::zero() {
        Ok(())
    } else {
        Err(ChillerError::InvalidBath(format!(
            "temperatures must satisfy T_w >= T_h > T_c > 0 (got {t_w}, {t_h}, {t_c})"
        )))
    }
}

fn tau<T: Scalar>(quantum: T, p_upper: T, p_lower: T) -> Option<T> {
    if p_upper > T::zero() && p_lower > T::zero() {
        let r = (p_upper / p_lower).ln();
        if r.abs() > T::zero() {
            return Some(-quantum / r);
        }
    }
    None
}

/// Internal temperatures from steady-state populations.
///
/// Defined for the three-level family (one value per contact) and the
/// four-level chiller (one value per contact and stage); other models get an
/// empty map.
pub fn internal_temperatures<T: Scalar>(
    kind: ModelKind,
    populations: &[T],
    params: &ModelParams<T>,
) -> Vec<(String, T)> {
    let mut out = Vec::new();
    let mut push = |name: &str, v: Option<T>| {
        if let Some(t) = v {
            out.push((name.to_string(), t));
        }
    };
    let wc = params.omega_c;
    let wh = params.omega_h;
    let ww = params.omega_w();
    let g = params.g;
    match kind {
        ModelKind::ThreeLevel | ModelKind::ThreeLevelShorted => {
            let (p1, p2, p3) = (populations[0], populations[1], populations[2]);
            push("tau_w", tau(ww, p3, p2));
            push("tau_h", tau(wh, p3, p1));
            push("tau_c", tau(wc, p2, p1));
        }
        ModelKind::FourLevel => {
            let (p1, p2, p3, p4) = (
                populations[0],
                populations[1],
                populations[2],
                populations[3],
            );
            push("tau_w_plus", tau(ww - g, p4, p3));
            push("tau_h_plus", tau(wh, p4, p1));
            push("tau_c_plus", tau(wc + g, p3, p1));
            push("tau_w_minus", tau(ww + g, p4, p2));
            push("tau_h_minus", tau(wh, p4, p1));
            push("tau_c_minus", tau(wc - g, p2, p1));
        }
        _ => {}
    }
    out
}

/// Build the generator, solve for the steady state and attach every
/// observable.
pub fn solve<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
) -> Result<SteadyReport<T>> {
    let liouv = build_liouvillian(model, baths)?;
    solve_with(model, &liouv)
}

/// As [`solve`], reusing an already-assembled Liouvillian.
pub fn solve_with<T: Scalar>(
    model: &SystemModel<T>,
    liouv: &Liouvillian<T>,
) -> Result<SteadyReport<T>> {
    let sol = steady_state(liouv)?;
    let currents = heat_currents(liouv, &sol.rho);
    let temps = liouv.baths.map(|_, b| b.temperature);
    let populations = DVector::from_iterator(
        liouv.dim,
        (0..liouv.dim).map(|i| sol.rho[(i, i)].re),
    );
    let pops: Vec<T> = populations.iter().copied().collect();

    // COP only when the driving current clears the numerical noise floor of
    // the current scale (rate times energy), so equilibrium round-off does
    // not masquerade as an absorption-driven regime
    let rate_scale = liouv
        .channel_table()
        .iter()
        .fold(T::zero(), |a, r| a.max(r.2).max(r.3));
    let energy_scale = liouv.energies[liouv.dim - 1] - liouv.energies[0];
    let floor = rate_scale * energy_scale * T::default_epsilon() * lit(1e3);
    let cop_value = if currents.work > floor {
        cop(&currents)
    } else {
        None
    };

    Ok(SteadyReport {
        state: sol.rho,
        populations,
        currents,
        entropy_rate: entropy_rate(&currents, &temps),
        cop: cop_value,
        cooling: currents.cold > T::zero(),
        internal_temps: internal_temperatures(model.kind, &pops, &model.params),
        residual: sol.residual,
        null_dim: sol.null_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{
        build_four_level, build_three_level, build_three_level_shorted, build_three_qubit,
    };
    use approx::assert_relative_eq;

    fn bench_baths(gamma: f64) -> PerBath<BathSpec<f64>> {
        BathSpec::flat_trio(9.0, 8.0, 7.0, gamma).unwrap()
    }

    #[test]
    fn omega_c_rev_value() {
        assert_relative_eq!(omega_c_rev(9.0, 8.0, 7.0, 6.0).unwrap(), 2.625, epsilon = 1e-15);
        // equal work and hot temperatures: no gradient, the window closes
        assert_eq!(omega_c_rev(8.0, 8.0, 7.0, 6.0).unwrap(), 0.0);
        // equal hot and cold temperatures: degenerate, rejected
        assert!(omega_c_rev(9.0, 7.0, 7.0, 6.0).is_err());
        assert!(omega_c_rev(9.0, 8.0, -1.0, 6.0).is_err());
    }

    #[test]
    fn carnot_value() {
        assert_relative_eq!(carnot_cop(9.0, 8.0, 7.0).unwrap(), 7.0 / 9.0, epsilon = 1e-15);
        // continuity toward the degenerate point
        let eps = carnot_cop(9.0, 8.999, 7.0).unwrap();
        assert!(eps > 0.0 && eps < 1e-3 * 7.0 / 9.0 * 10.0);
        // work-reservoir limit T_w -> infinity: eps -> T_c/(T_h - T_c)
        let big = carnot_cop(1e9, 8.0, 7.0).unwrap();
        assert_relative_eq!(big, 7.0, epsilon = 1e-6);
    }

    #[test]
    fn equilibrium_solution_is_gibbs() {
        let baths = BathSpec::flat_trio(7.0_f64, 7.0, 7.0, 1e-3).unwrap();
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let liouv = build_liouvillian(&m, &baths).unwrap();
        let report = solve_with(&m, &liouv).unwrap();
        let gibbs = liouv.gibbs(7.0);
        assert!((&report.state - &gibbs).norm() < 1e-10);
        for (_, q) in report.currents.iter() {
            assert!(q.abs() < 1e-13);
        }
        assert!(report.entropy_rate.abs() < 1e-13);
        assert!(report.cop.is_none());
        // Gibbs populations give every internal temperature equal to T
        assert_eq!(report.internal_temps.len(), 6);
        for (_, t) in &report.internal_temps {
            assert_relative_eq!(*t, 7.0, epsilon = 1e-6, max_relative = 1e-6);
        }
    }

    #[test]
    fn four_level_cooling_regime() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let r = solve(&m, &baths).unwrap();
        assert!(r.currents.work > 0.0, "Qw = {}", r.currents.work);
        assert!(r.currents.hot < 0.0, "Qh = {}", r.currents.hot);
        assert!(r.currents.cold > 0.0, "Qc = {}", r.currents.cold);
        assert!(r.cooling);
        let sum: f64 = r.currents.work + r.currents.hot + r.currents.cold;
        let max = r
            .currents
            .iter()
            .map(|(_, q)| q.abs())
            .fold(0.0_f64, f64::max);
        assert!(sum.abs() <= 1e-10 * max);
        assert!(r.entropy_rate >= -1e-12);
        assert!(r.residual < 1e-10);

        // the four-level channel structure couples populations only
        let mut coh: f64 = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    coh = coh.max(r.state[(i, j)].norm());
                }
            }
        }
        assert!(coh <= 1e-10, "coherences {coh}");
    }

    #[test]
    fn three_level_reversible_point() {
        let baths = bench_baths(1e-3);
        let wc_rev = omega_c_rev(9.0, 8.0, 7.0, 6.0).unwrap();
        let m = build_three_level(wc_rev, 6.0).unwrap();
        let r = solve(&m, &baths).unwrap();
        // populations take Boltzmann ratios at the bath temperatures
        let p = &r.populations;
        assert_relative_eq!(p[1] / p[0], (-wc_rev / 7.0_f64).exp(), epsilon = 1e-9);
        assert_relative_eq!(p[2] / p[0], (-6.0_f64 / 8.0).exp(), epsilon = 1e-9);
        // entropy production vanishes
        assert!(r.entropy_rate.abs() <= 1e-8 * 1e-3 * 216.0);
        // internal temperatures match the bath temperatures
        for (name, t) in &r.internal_temps {
            let expect = match name.as_str() {
                "tau_w" => 9.0,
                "tau_h" => 8.0,
                "tau_c" => 7.0,
                _ => unreachable!(),
            };
            assert_relative_eq!(*t, expect, max_relative = 1e-6);
        }
        assert_eq!(r.internal_temps.len(), 3);
    }

    #[test]
    fn three_level_cop_is_frequency_ratio() {
        let baths = bench_baths(1e-3);
        for wc in [0.5, 1.0, 2.0, 2.5] {
            let m = build_three_level(wc, 6.0).unwrap();
            let r = solve(&m, &baths).unwrap();
            let eps = r.cop.expect("inside the cooling window");
            assert_relative_eq!(eps, wc / (6.0 - wc), max_relative = 1e-10);
            assert!(eps <= carnot_cop(9.0, 8.0, 7.0).unwrap() + 1e-12);
        }
    }

    #[test]
    fn liouvillian_matches_classical_rate_equation() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let liouv = build_liouvillian(&m, &baths).unwrap();
        let r = solve_with(&m, &liouv).unwrap();

        let k = liouv.rate_matrix();
        let mut mrep = k.clone();
        for col in 0..4 {
            mrep[(0, col)] = 1.0;
        }
        let b = nalgebra::DVector::from_column_slice(&[1.0, 0.0, 0.0, 0.0]);
        let p = mrep.lu().solve(&b).unwrap();
        for i in 0..4 {
            assert!(
                (p[i] - r.populations[i]).abs() < 1e-10,
                "population {i}: classical {} vs quantum {}",
                p[i],
                r.populations[i]
            );
        }
    }

    #[test]
    fn gamma_scaling() {
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let r1 = solve(&m, &bench_baths(1e-3)).unwrap();
        let r2 = solve(&m, &bench_baths(3e-3)).unwrap();
        for bath in Bath::ALL {
            assert_relative_eq!(
                *r2.currents.get(bath),
                3.0 * *r1.currents.get(bath),
                max_relative = 1e-9
            );
        }
        assert_relative_eq!(r2.entropy_rate, 3.0 * r1.entropy_rate, max_relative = 1e-9);
        assert_relative_eq!(r2.cop.unwrap(), r1.cop.unwrap(), max_relative = 1e-10);
        assert!((&r2.state - &r1.state).norm() < 1e-10);
    }

    #[test]
    fn shorted_three_level_leaks() {
        let baths = bench_baths(1e-3);
        let plain = solve(&build_three_level_shorted(2.0, 6.0, 0.0).unwrap(), &baths).unwrap();
        let shorted = solve(&build_three_level_shorted(2.0, 6.0, 0.5).unwrap(), &baths).unwrap();
        // the parasitic contact strictly increases entropy production
        assert!(shorted.entropy_rate > plain.entropy_rate);
        // at equal temperatures everything still vanishes
        let eq = BathSpec::flat_trio(7.0_f64, 7.0, 7.0, 1e-3).unwrap();
        let r = solve(&build_three_level_shorted(2.0, 6.0, 1.0).unwrap(), &eq).unwrap();
        for (_, q) in r.currents.iter() {
            assert!(q.abs() < 1e-13);
        }
    }

    #[test]
    fn three_qubit_steady_state() {
        let baths = bench_baths(1e-3);
        let m = build_three_qubit(2.0, 6.0, 0.1).unwrap();
        let r = solve(&m, &baths).unwrap();
        assert!(r.cooling);
        assert!(r.residual < 1e-10);
        let sum: f64 = r.currents.work + r.currents.hot + r.currents.cold;
        assert!(sum.abs() < 1e-12);
        assert!(r.entropy_rate > 0.0);
    }

    #[test]
    fn degenerate_kernel_is_reported_not_averaged() {
        use crate::models::SpectralFilter;
        // blacking out every bath leaves only the commutator part, whose
        // kernel holds every diagonal state
        let mut baths = bench_baths(1e-3);
        for bath in Bath::ALL {
            baths.get_mut(bath).filter = SpectralFilter::HighCutoff { omega_max: 1e-6 };
        }
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let liouv = build_liouvillian(&m, &baths).unwrap();
        match steady_state(&liouv) {
            Err(crate::ChillerError::DegenerateSteadyState { null_dim }) => {
                assert_eq!(null_dim, 4)
            }
            other => panic!("expected degenerate-kernel error, got {other:?}"),
        }
    }

    #[test]
    fn f32_backend_solves() {
        let baths = BathSpec::flat_trio(9.0_f32, 8.0, 7.0, 1e-3).unwrap();
        let m = build_four_level(2.0_f32, 6.0, 0.1).unwrap();
        let r = solve(&m, &baths).unwrap();
        assert!(r.cooling);
        let sum = r.currents.work + r.currents.hot + r.currents.cold;
        assert!(sum.abs() < 1e-6);
    }
}
