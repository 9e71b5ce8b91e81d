//! Characteristic-curve sweeps, entropy-share scans and cooling-power
//! optimization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChillerError, Result};
use crate::lindblad::build_liouvillian;
use crate::models::{
    build_four_level, build_four_level_double_prime, build_four_level_prime, build_three_level,
    build_three_level_shorted, build_three_qubit, BathSpec, ModelKind, PerBath,
    SpectralFilter, SystemModel,
};
use crate::scalar::{lit, Scalar};
use crate::stages::{self, BreakdownRow};
use crate::thermo;

/// What to sweep: a model family with everything but the cold frequency
/// fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig<T> {
    pub kind: ModelKind,
    pub omega_h: T,
    pub g: T,
    pub kappa: T,
    pub baths: PerBath<BathSpec<T>>,
    /// Re-pin the work-bath cutoff to `omega_w = omega_h - omega_c` at every
    /// grid point (the reservoir-engineering configuration that opens the
    /// characteristic curve).
    pub track_work_cutoff: bool,
}

impl<T: Scalar> SweepConfig<T> {
    pub fn build_model(&self, omega_c: T) -> Result<SystemModel<T>> {
        match self.kind {
            ModelKind::ThreeLevel => build_three_level(omega_c, self.omega_h),
            ModelKind::ThreeLevelShorted => {
                build_three_level_shorted(omega_c, self.omega_h, self.kappa)
            }
            ModelKind::FourLevel => build_four_level(omega_c, self.omega_h, self.g),
            ModelKind::FourLevelPrime => build_four_level_prime(omega_c, self.omega_h, self.g),
            ModelKind::FourLevelDoublePrime => {
                build_four_level_double_prime(omega_c, self.omega_h, self.g)
            }
            ModelKind::ThreeQubit => build_three_qubit(omega_c, self.omega_h, self.g),
        }
    }

    pub fn baths_at(&self, omega_c: T) -> PerBath<BathSpec<T>> {
        let mut baths = self.baths;
        if self.track_work_cutoff {
            baths.work.filter = SpectralFilter::HighCutoff {
                omega_max: self.omega_h - omega_c,
            };
        }
        baths
    }
}

/// Observables of one converged sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint<T> {
    pub currents: PerBath<T>,
    pub cop: Option<T>,
    pub entropy: T,
    /// `(plus, minus, leak)` entropy shares; four-level model only.
    pub shares: Option<(T, T, T)>,
    pub cooling: bool,
}

/// One sweep row; solver failures are carried as row-level markers instead
/// of fabricated numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T> {
    pub omega_c: T,
    pub point: Option<SweepPoint<T>>,
    pub error: Option<String>,
}

/// Sweep the cold frequency over a uniform grid, one steady-state solve per
/// point. Points are independent and run in parallel.
pub fn sweep_characteristic<T: Scalar>(
    cfg: &SweepConfig<T>,
    omega_c_min: T,
    omega_c_max: T,
    points: usize,
) -> Result<Vec<SweepRow<T>>> {
    if points < 2 || !(omega_c_min < omega_c_max) || !(omega_c_max < cfg.omega_h) {
        return Err(ChillerError::InvalidModel(
            "sweep range must be an increasing interval inside (0, omega_h)".into(),
        ));
    }
    let grid: Vec<T> = (0..points)
        .map(|i| {
            omega_c_min
                + (omega_c_max - omega_c_min) * lit::<T>(i as f64)
                    / lit::<T>((points - 1) as f64)
        })
        .collect();
    Ok(grid
        .into_par_iter()
        .map(|wc| match evaluate_point(cfg, wc) {
            Ok(point) => SweepRow {
                omega_c: wc,
                point: Some(point),
                error: None,
            },
            Err(e) => SweepRow {
                omega_c: wc,
                point: None,
                error: Some(e.to_string()),
            },
        })
        .collect())
}

/// Solve one grid point.
pub fn evaluate_point<T: Scalar>(cfg: &SweepConfig<T>, omega_c: T) -> Result<SweepPoint<T>> {
    let model = cfg.build_model(omega_c)?;
    let baths = cfg.baths_at(omega_c);
    let liouv = build_liouvillian(&model, &baths)?;
    let report = thermo::solve_with(&model, &liouv)?;
    let shares = if model.kind == ModelKind::FourLevel {
        let bd = stages::stage_breakdown(&model, &baths)?;
        Some(bd.entropy)
    } else {
        None
    };
    Ok(SweepPoint {
        currents: report.currents,
        cop: report.cop,
        entropy: report.entropy_rate,
        shares,
        cooling: report.cooling,
    })
}

/// Entropy-share scan of the four-level chiller around the reversible
/// frequency; rows carry the full stage decomposition.
pub fn entropy_share_scan<T: Scalar>(
    cfg: &SweepConfig<T>,
    omega_c_min: T,
    omega_c_max: T,
    points: usize,
) -> Result<Vec<BreakdownRow<T>>> {
    if cfg.kind != ModelKind::FourLevel {
        return Err(ChillerError::Unsupported(
            "entropy shares are defined for the four-level chiller".into(),
        ));
    }
    if points < 2 || !(omega_c_min < omega_c_max) {
        return Err(ChillerError::InvalidModel("bad scan range".into()));
    }
    let grid: Vec<T> = (0..points)
        .map(|i| {
            omega_c_min
                + (omega_c_max - omega_c_min) * lit::<T>(i as f64)
                    / lit::<T>((points - 1) as f64)
        })
        .collect();
    let v = stages::verify_breakdown(cfg.omega_h, cfg.g, &cfg.baths, &grid, lit(1e-10))?;
    if let Some(wc) = v.violation {
        return Err(ChillerError::SolverFailure(format!(
            "stage-sum identity violated at omega_c = {wc}"
        )));
    }
    Ok(v.rows)
}

/// Location and performance of the cooling-power maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport<T> {
    pub omega_c_star: T,
    pub qdot_c_max: T,
    pub epsilon_star: T,
    /// Endoreversible reference `3/4 * epsilon_Carnot` for unstructured 3D baths.
    pub bound: T,
    pub bound_satisfied: bool,
    /// `bound - epsilon_star`.
    pub margin: T,
    /// Cooling-power peaks of the individual stages (four-level only).
    pub stage_peaks: Option<(T, T)>,
    /// Work-weighted mixture of the stage COPs at the optimum (four-level only).
    pub mixture_epsilon: Option<T>,
    /// Best value seen on the coarse grid (never exceeds `qdot_c_max`).
    pub coarse_max: T,
}

fn golden_section<T: Scalar>(
    mut lo: T,
    mut hi: T,
    rel_tol: T,
    mut f: impl FnMut(T) -> T,
) -> (T, T) {
    let phi = (lit::<T>(5.0).sqrt() - T::one()) / lit::<T>(2.0);
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > rel_tol * (lo.abs() + hi.abs()) {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = (lo + hi) / lit::<T>(2.0);
    let fx = f(x);
    (x, fx)
}

/// Locate the maximizer of the total cooling load over the cold frequency:
/// a 64-point coarse grid followed by golden-section refinement.
pub fn optimize_cooling<T: Scalar>(
    cfg: &SweepConfig<T>,
    omega_c_min: T,
    omega_c_max: T,
) -> Result<OptimumReport<T>> {
    const COARSE: usize = 64;
    if !(omega_c_min < omega_c_max) {
        return Err(ChillerError::InvalidModel("empty optimization range".into()));
    }
    let qdot_c = |wc: T| -> T {
        evaluate_point(cfg, wc)
            .map(|p| p.currents.cold)
            .unwrap_or_else(|_| -T::max_value().unwrap_or_else(T::one))
    };
    let grid: Vec<T> = (0..COARSE)
        .map(|i| {
            omega_c_min
                + (omega_c_max - omega_c_min) * lit::<T>(i as f64)
                    / lit::<T>((COARSE - 1) as f64)
        })
        .collect();
    let values: Vec<T> = grid.par_iter().map(|&wc| qdot_c(wc)).collect();
    let (best, _) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).expect("non-finite cooling load"))
        .expect("nonempty grid");
    let coarse_max = values[best];
    if !(coarse_max > T::zero()) {
        return Err(ChillerError::SolverFailure(
            "no cooling anywhere in the optimization range".into(),
        ));
    }
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(COARSE - 1)];
    let (wc_star, q_star) = golden_section(lo, hi, lit(1e-6), qdot_c);
    let (omega_c_star, qdot_c_max) = if q_star >= coarse_max {
        (wc_star, q_star)
    } else {
        (grid[best], coarse_max)
    };

    let point = evaluate_point(cfg, omega_c_star)?;
    let epsilon_star = point
        .cop
        .ok_or_else(|| ChillerError::SolverFailure("no COP at the cooling optimum".into()))?;

    let temps = cfg.baths.map(|_, b| b.temperature);
    let bound = lit::<T>(0.75) * thermo::carnot_cop(temps.work, temps.hot, temps.cold)?;

    let (stage_peaks, mixture_epsilon) = if cfg.kind == ModelKind::FourLevel {
        let stage_current = |plus: bool| {
            move |wc: T| -> T {
                let Ok(model) = cfg.build_model(wc) else {
                    return -T::one();
                };
                match stages::stage_breakdown(&model, &cfg.baths_at(wc)) {
                    Ok(bd) => {
                        if plus {
                            bd.plus.cold
                        } else {
                            bd.minus.cold
                        }
                    }
                    Err(_) => -T::one(),
                }
            }
        };
        let (wp, _) = golden_section(omega_c_min, omega_c_max, lit(1e-6), stage_current(true));
        let (wm, _) = golden_section(omega_c_min, omega_c_max, lit(1e-6), stage_current(false));

        let model = cfg.build_model(omega_c_star)?;
        let bd = stages::stage_breakdown(&model, &cfg.baths_at(omega_c_star))?;
        let qw = bd.plus.work + bd.minus.work + bd.leak.work;
        let mix = if qw > T::zero() {
            let g = cfg.g;
            let ww = cfg.omega_h - omega_c_star;
            let eps_p = (omega_c_star + g) / (ww - g);
            let eps_m = (omega_c_star - g) / (ww + g);
            Some((bd.plus.work * eps_p + bd.minus.work * eps_m) / qw)
        } else {
            None
        };
        (Some((wp, wm)), mix)
    } else {
        (None, None)
    };

    Ok(OptimumReport {
        omega_c_star,
        qdot_c_max,
        epsilon_star,
        bound,
        bound_satisfied: epsilon_star <= bound,
        margin: bound - epsilon_star,
        stage_peaks,
        mixture_epsilon,
        coarse_max,
    })
}

/// Compare the COP at maximum cooling load against the endoreversible bound.
pub fn bound_check<T: Scalar>(report: &OptimumReport<T>) -> (bool, T) {
    (report.bound_satisfied, report.margin)
}

/// Exploratory two-parameter optimization: scan the internal coupling on a
/// coarse grid and refine the cold frequency at each value. The release
/// checks only exercise the single-frequency scan; this is a convenience for
/// map-making.
pub fn optimize_cooling_over_g<T: Scalar>(
    cfg: &SweepConfig<T>,
    omega_c_min: T,
    omega_c_max: T,
    g_min: T,
    g_max: T,
    g_points: usize,
) -> Result<(T, OptimumReport<T>)> {
    if g_points < 2 || !(g_min < g_max) || g_min < T::zero() {
        return Err(ChillerError::InvalidModel("bad coupling range".into()));
    }
    let mut best: Option<(T, OptimumReport<T>)> = None;
    for i in 0..g_points {
        let g = g_min
            + (g_max - g_min) * lit::<T>(i as f64) / lit::<T>((g_points - 1) as f64);
        let mut c = *cfg;
        c.g = g;
        let lo = omega_c_min.max(g + (omega_c_max - omega_c_min) * lit(1e-3));
        let Ok(rep) = optimize_cooling(&c, lo, omega_c_max) else {
            continue;
        };
        if best
            .as_ref()
            .map(|(_, b)| rep.qdot_c_max > b.qdot_c_max)
            .unwrap_or(true)
        {
            best = Some((g, rep));
        }
    }
    best.ok_or_else(|| ChillerError::SolverFailure("no cooling in the scanned region".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: ModelKind, g: f64) -> SweepConfig<f64> {
        SweepConfig {
            kind,
            omega_h: 6.0,
            g,
            kappa: 0.0,
            baths: BathSpec::flat_trio(9.0, 8.0, 7.0, 1e-3).unwrap(),
            track_work_cutoff: false,
        }
    }

    #[test]
    fn closed_curve_structure() {
        let c = cfg(ModelKind::FourLevel, 0.1);
        let rows = sweep_characteristic(&c, 0.15, 2.9, 120).unwrap();
        // the rows where the device cools form one contiguous block starting
        // at the edge of the legal range
        let cooling: Vec<bool> = rows
            .iter()
            .map(|r| r.point.as_ref().map(|p| p.cooling).unwrap_or(false))
            .collect();
        let first = cooling.iter().position(|&c| c).unwrap();
        let last = cooling.iter().rposition(|&c| c).unwrap();
        assert!(cooling[first..=last].iter().all(|&c| c));
        assert_eq!(first, 0);
        assert!(rows[last + 1..].iter().all(|r| r
            .point
            .as_ref()
            .map(|p| !p.cooling)
            .unwrap_or(true)));

        // joint vanishing at the cooling stop: bisect the zero crossing of
        // the load and look at the COP on approach
        let stop = bisect_cooling_stop(&c, rows[last].omega_c, rows[last + 1].omega_c);
        let p = evaluate_point(&c, stop - 1e-7).unwrap();
        let eps_c = thermo::carnot_cop(9.0, 8.0, 7.0).unwrap();
        assert!(p.currents.cold > 0.0);
        let eps = p.cop.unwrap();
        assert!(
            eps < 0.01 * eps_c,
            "closed curve: COP {eps} should die with the load"
        );
        // the curve never opens: COP stays well below Carnot everywhere
        let max_eps = rows
            .iter()
            .filter_map(|r| r.point.as_ref().and_then(|p| p.cop))
            .fold(0.0, f64::max);
        assert!(max_eps < 0.9 * eps_c);
    }

    fn bisect_cooling_stop(c: &SweepConfig<f64>, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let q = evaluate_point(c, mid).map(|p| p.currents.cold).unwrap_or(-1.0);
            if q > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn open_curve_reaches_carnot() {
        let mut c = cfg(ModelKind::FourLevel, 0.1);
        c.track_work_cutoff = true;
        let rows = sweep_characteristic(&c, 2.3, 2.5249, 400).unwrap();
        let eps_c = thermo::carnot_cop(9.0, 8.0, 7.0).unwrap();
        let max_eps = rows
            .iter()
            .filter_map(|r| r.point.as_ref().and_then(|p| p.cop))
            .fold(0.0, f64::max);
        assert!(max_eps >= eps_c - 1e-3, "max eps {max_eps} vs {eps_c}");
        // and the load vanishes where the COP peaks
        let best = rows
            .iter()
            .filter_map(|r| r.point.as_ref().and_then(|p| p.cop.map(|e| (e, p.currents.cold))))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        let qmax = rows
            .iter()
            .filter_map(|r| r.point.as_ref().map(|p| p.currents.cold))
            .fold(0.0, f64::max);
        assert!(best.1 < 0.05 * qmax);
    }

    #[test]
    fn sweep_flags_builder_rejections() {
        // omega_c <= g is rejected by the builder, not fabricated
        let rows = sweep_characteristic(&cfg(ModelKind::FourLevel, 0.5), 0.3, 2.0, 18).unwrap();
        assert!(rows[0].point.is_none());
        assert!(rows[0].error.is_some());
        assert!(rows.last().unwrap().point.is_some());
    }

    #[test]
    fn entropy_scan_shares() {
        let rows = entropy_share_scan(&cfg(ModelKind::FourLevel, 0.1), 2.4, 2.85, 91).unwrap();
        // shares sum to the total entropy rate (the two sides take different
        // arithmetic routes, so allow a small absolute slack in gamma units)
        for r in &rows {
            let sum = r.entropy.0 + r.entropy.1 + r.entropy.2;
            assert!(
                (sum - r.entropy_total).abs() <= 1e-12 + 1e-8 * r.entropy_total.abs(),
                "shares {sum} vs total {}",
                r.entropy_total
            );
            assert!(r.entropy.2 > 0.0, "leak share always positive at g != 0");
        }
        // the plus share dies at 2.525, the minus share at 2.725
        let at = |wc: f64| {
            rows.iter()
                .min_by(|a, b| {
                    (a.omega_c - wc)
                        .abs()
                        .partial_cmp(&(b.omega_c - wc).abs())
                        .unwrap()
                })
                .unwrap()
        };
        let tol = 1e-8 * 1e-3 * 216.0;
        assert!(at(2.525).entropy.0.abs() <= tol);
        assert!(at(2.725).entropy.1.abs() <= tol);
    }

    #[test]
    fn optimum_four_level() {
        let rep = optimize_cooling(&cfg(ModelKind::FourLevel, 0.1), 0.2, 2.7).unwrap();
        assert!(rep.qdot_c_max >= rep.coarse_max);
        assert!(rep.bound_satisfied);
        assert!(rep.epsilon_star > 0.0 && rep.epsilon_star < rep.bound);
        let (wp, wm) = rep.stage_peaks.unwrap();
        let lo = wp.min(wm);
        let hi = wp.max(wm);
        assert!(
            rep.omega_c_star > lo && rep.omega_c_star < hi,
            "total peak {} outside stage peaks ({lo}, {hi})",
            rep.omega_c_star
        );
        // the mixture formula sits close to the actual COP (leak is small)
        let mix = rep.mixture_epsilon.unwrap();
        assert!((mix - rep.epsilon_star).abs() < 0.05 * rep.epsilon_star);
    }

    #[test]
    fn optimum_monotone_in_g() {
        let mut last = f64::INFINITY;
        for g in [0.1, 0.3, 0.5] {
            let rep = optimize_cooling(&cfg(ModelKind::FourLevel, g), g + 0.05, 2.7).unwrap();
            assert!(rep.epsilon_star < last, "eps* not decreasing at g = {g}");
            assert!(rep.bound_satisfied);
            last = rep.epsilon_star;
        }
    }

    #[test]
    fn optimum_three_qubit() {
        let rep = optimize_cooling(&cfg(ModelKind::ThreeQubit, 0.1), 0.3, 2.9).unwrap();
        let (ok, margin) = bound_check(&rep);
        assert!(ok && margin > 0.0);
    }

    #[test]
    fn two_parameter_scan_prefers_small_coupling() {
        // the cooling-load maximum over (omega_c, g) sits at the weakest
        // coupling of the scanned range
        let (g_star, rep) =
            optimize_cooling_over_g(&cfg(ModelKind::FourLevel, 0.1), 0.3, 2.7, 0.05, 0.5, 6)
                .unwrap();
        assert_eq!(g_star, 0.05);
        assert!(rep.bound_satisfied);
    }
}
