//! Three-way decomposition of the four-level chiller's steady-state heat
//! currents into two endoreversible stages and a heat-leak stage, plus the
//! graph-based diagnosis of arbitrary models.
//!
//! The closed-form stage rates take the *effective* transition rates between
//! energy eigenstates, i.e. the bare Ohmic rate of a channel multiplied by
//! the squared matrix element of its lowering operator (1/2 on each split
//! transition of the four-level chiller). Each stage rate is the net
//! circulation of one directed cycle pair: a detailed-balance bracket times
//! the spanning-forest weight of the contracted cycle, over the Markov
//! tree-sum normalization `D`. The plus/minus labels follow the transported
//! quanta — the bracket built from the `(omega_c + g, omega_w - g)` rates
//! drives the stage carrying those quanta — which is the unique assignment
//! satisfying both the exact-sum identity against the solved steady state
//! and the cooling windows, and the leak rate carries a factor two because
//! one leak loop moves `2g` between the work and cold baths.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ChillerError, Result};
use crate::lindblad::{bohr_channels, BohrChannel, Liouvillian};
use crate::models::{Bath, BathSpec, ModelKind, PerBath, SystemModel};
use crate::scalar::{lit, Scalar};
use crate::thermo;

/// Effective `(down, up)` rate pairs of the six four-level transitions,
/// labelled by the stage they belong to. `cold_minus`/`work_minus` sit at
/// frequencies `omega_c - g` and `omega_w + g`; `cold_plus`/`work_plus` at
/// `omega_c + g` and `omega_w - g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourLevelRates<T> {
    pub cold_minus: (T, T),
    pub cold_plus: (T, T),
    pub work_minus: (T, T),
    pub work_plus: (T, T),
    pub hot: (T, T),
}

impl<T: Scalar> FourLevelRates<T> {
    /// Rate pairs straight from the model parameters: Ohmic rates at the six
    /// transition frequencies times the squared eigenbasis matrix elements
    /// (exactly 1/2 on every split transition, 1 on the hot one). Continuous
    /// in `g`, including the resonant limit.
    pub fn from_params(
        model: &SystemModel<T>,
        baths: &PerBath<BathSpec<T>>,
    ) -> Result<Self> {
        if model.kind != ModelKind::FourLevel {
            return Err(ChillerError::Unsupported(
                "stage rates are defined for the four-level chiller".into(),
            ));
        }
        let g = model.params.g;
        let wc = model.params.omega_c;
        let wh = model.params.omega_h;
        let ww = model.params.omega_w();
        let half = lit::<T>(0.5);
        let pair = |spec: &BathSpec<T>, w: T, weight: T| -> Result<(T, T)> {
            let (down, up) = crate::lindblad::rate(spec, w)?;
            Ok((down * weight, up * weight))
        };
        Ok(Self {
            cold_minus: pair(baths.get(Bath::Cold), wc - g, half)?,
            cold_plus: pair(baths.get(Bath::Cold), wc + g, half)?,
            work_minus: pair(baths.get(Bath::Work), ww + g, half)?,
            work_plus: pair(baths.get(Bath::Work), ww - g, half)?,
            hot: pair(baths.get(Bath::Hot), wh, T::one())?,
        })
    }

    /// Extract the rate pairs from an assembled four-level Liouvillian.
    ///
    /// Transitions are identified by eigenstate indices (1 is the
    /// `omega_c - g` state, 2 the `omega_c + g` one), which stays correct
    /// under filters; requires a resolved splitting (`g` above the channel
    /// grouping tolerance).
    pub fn from_liouvillian(liouv: &Liouvillian<T>) -> Result<Self> {
        if liouv.dim != 4 {
            return Err(ChillerError::Unsupported(
                "stage decomposition requires the four-level chiller".into(),
            ));
        }
        let mut cold_minus = None;
        let mut cold_plus = None;
        let mut work_minus = None;
        let mut work_plus = None;
        let mut hot = None;
        let eff = |ch: &BohrChannel<T>, amp: T| (ch.rate_down * amp * amp, ch.rate_up * amp * amp);
        for ch in liouv.channels.get(Bath::Cold) {
            for (low, up, amp) in ch.dyads() {
                match (low, up) {
                    (0, 1) => cold_minus = Some(eff(ch, amp)),
                    (0, 2) => cold_plus = Some(eff(ch, amp)),
                    _ => {
                        return Err(ChillerError::Unsupported(format!(
                            "unexpected cold transition {low}<->{up}"
                        )))
                    }
                }
            }
        }
        for ch in liouv.channels.get(Bath::Work) {
            for (low, up, amp) in ch.dyads() {
                match (low, up) {
                    (1, 3) => work_minus = Some(eff(ch, amp)),
                    (2, 3) => work_plus = Some(eff(ch, amp)),
                    _ => {
                        return Err(ChillerError::Unsupported(format!(
                            "unexpected work transition {low}<->{up}"
                        )))
                    }
                }
            }
        }
        for ch in liouv.channels.get(Bath::Hot) {
            for (low, up, amp) in ch.dyads() {
                match (low, up) {
                    (0, 3) => hot = Some(eff(ch, amp)),
                    _ => {
                        return Err(ChillerError::Unsupported(format!(
                            "unexpected hot transition {low}<->{up}"
                        )))
                    }
                }
            }
        }
        match (cold_minus, cold_plus, work_minus, work_plus, hot) {
            (Some(cm), Some(cp), Some(wm), Some(wp), Some(h)) => Ok(Self {
                cold_minus: cm,
                cold_plus: cp,
                work_minus: wm,
                work_plus: wp,
                hot: h,
            }),
            _ => Err(ChillerError::Unsupported(
                "four-level channel structure incomplete".into(),
            )),
        }
    }
}

/// The three stage rates and the normalization determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageRates<T> {
    pub i_plus: T,
    pub i_minus: T,
    pub i_leak: T,
    pub d_norm: T,
}

/// Closed-form stage rates of the four-level chiller.
///
/// `d_norm` is minus the determinant of the classical rate matrix with its
/// redundant row replaced by the normalization row; it equals the Markov
/// spanning-tree sum and is strictly positive for any nonvanishing rate set.
pub fn stage_rates<T: Scalar>(rates: &FourLevelRates<T>) -> Result<StageRates<T>> {
    let (d2, u2) = rates.cold_minus;
    let (d3, u3) = rates.cold_plus;
    let (e2, v2) = rates.work_minus;
    let (e3, v3) = rates.work_plus;
    let (dh, uh) = rates.hot;

    for r in [d2, u2, d3, u3, e2, v2, e3, v3, dh, uh] {
        if !(r >= T::zero()) || !r.is_finite() {
            return Err(ChillerError::InvalidModel(format!(
                "stage rates must be finite and nonnegative, got {r}"
            )));
        }
    }

    let one = T::one();
    #[rustfmt::skip]
    let m = DMatrix::<T>::from_row_slice(4, 4, &[
        one, one, one, one,
        u2, -(d2 + v2), T::zero(), e2,
        u3, T::zero(), -(d3 + v3), e3,
        uh, v2, v3, -(dh + e2 + e3),
    ]);
    let d_norm = -m.determinant();

    let scale = [d2, u2, d3, u3, e2, v2, e3, v3, dh, uh]
        .into_iter()
        .fold(T::zero(), |a, b| a.max(b));
    let tol = scale * scale * scale * T::default_epsilon() * lit(1e3);
    if !(d_norm > tol) {
        return Err(ChillerError::SolverFailure(format!(
            "stage decomposition undefined: normalization D = {d_norm} vanishes"
        )));
    }

    let i_plus = (d2 + v2) * (u3 * v3 * dh - d3 * e3 * uh) / d_norm;
    let i_minus = (d3 + v3) * (u2 * v2 * dh - d2 * e2 * uh) / d_norm;
    let i_leak = lit::<T>(2.0) * (u3 * d2 * e2 * v3 - d3 * u2 * v2 * e3) / d_norm;

    Ok(StageRates {
        i_plus,
        i_minus,
        i_leak,
        d_norm,
    })
}

/// Cooling windows of the two stages in the cold frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoolingWindows<T> {
    /// Window of the stage carrying `(omega_c + g, omega_w - g)`; empty when
    /// `g >= omega_c_rev`.
    pub plus: Option<(T, T)>,
    /// Window of the stage carrying `(omega_c - g, omega_w + g)`.
    pub minus: (T, T),
    /// Set when the plus window collapsed and the device may no longer cool
    /// at any cold frequency.
    pub plus_window_lost: bool,
}

/// Stage cooling windows: plus stage `0 < omega_c < omega_c_rev - g`, minus
/// stage `g < omega_c < omega_c_rev + g`.
pub fn cooling_windows<T: Scalar>(omega_c_rev: T, g: T) -> Result<CoolingWindows<T>> {
    if !(omega_c_rev > T::zero()) || g < T::zero() {
        return Err(ChillerError::InvalidModel(
            "cooling windows need omega_c_rev > 0 and g >= 0".into(),
        ));
    }
    let plus = if g < omega_c_rev {
        Some((T::zero(), omega_c_rev - g))
    } else {
        None
    };
    Ok(CoolingWindows {
        plus,
        minus: (g, omega_c_rev + g),
        plus_window_lost: plus.is_none(),
    })
}

/// Per-stage heat currents and entropy production.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageBreakdown<T> {
    pub rates: StageRates<T>,
    /// Heat currents of the plus stage: `(omega_w - g, -omega_h, omega_c + g)`
    /// times `i_plus`.
    pub plus: PerBath<T>,
    /// Heat currents of the minus stage.
    pub minus: PerBath<T>,
    /// Heat-leak currents: `Qdot_c = g i_leak = -Qdot_w`, nothing on the hot
    /// bath.
    pub leak: PerBath<T>,
    /// Entropy production `-sum_a Qdot_a/T_a` per stage, in order
    /// `(plus, minus, leak)`.
    pub entropy: (T, T, T),
    /// Present when the temperatures are strictly ordered `T_w > T_h > T_c`.
    pub windows: Option<CoolingWindows<T>>,
}

impl<T: Scalar> StageBreakdown<T> {
    /// Summed stage currents, equal to the total steady-state currents.
    pub fn total(&self) -> PerBath<T> {
        PerBath::new(
            self.plus.work + self.minus.work + self.leak.work,
            self.plus.hot + self.minus.hot + self.leak.hot,
            self.plus.cold + self.minus.cold + self.leak.cold,
        )
    }
}

/// Entropy production of each stage from its currents.
pub fn stage_entropies<T: Scalar>(
    plus: &PerBath<T>,
    minus: &PerBath<T>,
    leak: &PerBath<T>,
    temperatures: &PerBath<T>,
) -> (T, T, T) {
    (
        thermo::entropy_rate(plus, temperatures),
        thermo::entropy_rate(minus, temperatures),
        thermo::entropy_rate(leak, temperatures),
    )
}

/// Full stage breakdown of a four-level chiller with the given baths.
pub fn stage_breakdown<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
) -> Result<StageBreakdown<T>> {
    let rates = stage_rates(&FourLevelRates::from_params(model, baths)?)?;
    let g = model.params.g;
    let wc = model.params.omega_c;
    let wh = model.params.omega_h;
    let ww = model.params.omega_w();

    let plus = PerBath::new(
        (ww - g) * rates.i_plus,
        -wh * rates.i_plus,
        (wc + g) * rates.i_plus,
    );
    let minus = PerBath::new(
        (ww + g) * rates.i_minus,
        -wh * rates.i_minus,
        (wc - g) * rates.i_minus,
    );
    let leak = PerBath::new(-g * rates.i_leak, T::zero(), g * rates.i_leak);

    let temps = baths.map(|_, b| b.temperature);
    let entropy = stage_entropies(&plus, &minus, &leak, &temps);
    let windows = thermo::omega_c_rev(temps.work, temps.hot, temps.cold, wh)
        .ok()
        .map(|wc_rev| cooling_windows(wc_rev, g))
        .transpose()?;
    Ok(StageBreakdown {
        rates,
        plus,
        minus,
        leak,
        entropy,
        windows,
    })
}

/// Evaluation of the stage-imbalance inequalities that decide which cycle
/// pairs net-cool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceCheck {
    /// Cooling cycle through the `omega_c + g` state outruns its reverse.
    pub plus_cools: bool,
    /// Cooling cycle through the `omega_c - g` state outruns its reverse.
    pub minus_cools: bool,
}

/// Triple-product inequalities for the C1/C2 and C3/C4 cycle pairs.
pub fn imbalance_check<T: Scalar>(rates: &FourLevelRates<T>) -> ImbalanceCheck {
    let (d2, u2) = rates.cold_minus;
    let (d3, u3) = rates.cold_plus;
    let (e2, v2) = rates.work_minus;
    let (e3, v3) = rates.work_plus;
    let (dh, uh) = rates.hot;
    ImbalanceCheck {
        plus_cools: u3 * v3 * dh > d3 * e3 * uh,
        minus_cools: u2 * v2 * dh > d2 * e2 * uh,
    }
}

/// One row of the breakdown verification / characteristic scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow<T> {
    pub omega_c: T,
    pub rates: StageRates<T>,
    pub plus: PerBath<T>,
    pub minus: PerBath<T>,
    pub leak: PerBath<T>,
    pub total: PerBath<T>,
    pub entropy: (T, T, T),
    pub entropy_total: T,
    /// Largest `|Qdot_a - sum of stage currents|` relative to `max |Qdot|`.
    pub rel_mismatch: T,
}

/// Result of checking the exact-sum identity over a cold-frequency grid.
#[derive(Debug, Clone)]
pub struct BreakdownVerification<T: Scalar> {
    pub rows: Vec<BreakdownRow<T>>,
    pub max_rel_mismatch: T,
    /// Identity violation past tolerance, if any: the offending grid point.
    pub violation: Option<T>,
    /// Stage windows of the scanned device (absent for unordered baths).
    pub windows: Option<CoolingWindows<T>>,
}

/// Solve the steady state on a grid and compare the summed stage currents
/// against `tr{H L_a rho}` point by point.
pub fn verify_breakdown<T: Scalar>(
    omega_h: T,
    g: T,
    baths: &PerBath<BathSpec<T>>,
    grid: &[T],
    tolerance: T,
) -> Result<BreakdownVerification<T>> {
    let mut rows = Vec::with_capacity(grid.len());
    let mut max_rel = T::zero();
    let mut violation = None;
    let mut windows = None;
    for &wc in grid {
        let model = crate::models::build_four_level(wc, omega_h, g)?;
        let liouv = crate::lindblad::build_liouvillian(&model, baths)?;
        let report = thermo::solve_with(&model, &liouv)?;
        let bd = stage_breakdown(&model, baths)?;
        if windows.is_none() {
            windows = bd.windows;
        }

        let total = bd.total();
        let mut qmax = T::zero();
        let mut mismatch = T::zero();
        for bath in Bath::ALL {
            qmax = qmax.max(report.currents.get(bath).abs());
            mismatch = mismatch.max((*report.currents.get(bath) - *total.get(bath)).abs());
        }
        let rel = if qmax > T::zero() { mismatch / qmax } else { T::zero() };
        if rel > max_rel {
            max_rel = rel;
        }
        if rel > tolerance && violation.is_none() {
            violation = Some(wc);
        }
        rows.push(BreakdownRow {
            omega_c: wc,
            rates: bd.rates,
            plus: bd.plus,
            minus: bd.minus,
            leak: bd.leak,
            total,
            entropy: bd.entropy,
            entropy_total: report.entropy_rate,
            rel_mismatch: rel,
        });
    }
    Ok(BreakdownVerification {
        rows,
        max_rel_mismatch: max_rel,
        violation,
        windows,
    })
}

// ---------------------------------------------------------------------------
// graph diagnosis
// ---------------------------------------------------------------------------

/// One dissipative transition between two energy eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord<T> {
    pub bath: Bath,
    pub omega: T,
    /// Lower eigenstate index (ascending-energy, zero-based).
    pub lower: usize,
    pub upper: usize,
    pub amplitude: T,
    pub rate_down: T,
    pub rate_up: T,
}

impl<T: Scalar> TransitionRecord<T> {
    pub fn alive(&self) -> bool {
        self.rate_down > T::zero() || self.rate_up > T::zero()
    }
}

/// An elementary three-bath cycle of the transition graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageCycle<T> {
    /// Eigenstate indices, ascending (zero-based).
    pub states: [usize; 3],
    /// Transition frequency contributed by each bath.
    pub quanta: PerBath<T>,
    /// All three transitions carry nonzero rates.
    pub alive: bool,
}

/// Cycles sharing one frequency triple form a stage (the three-qubit device
/// realizes each of its six stages twice).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageClass<T> {
    pub quanta: PerBath<T>,
    pub members: Vec<[usize; 3]>,
    pub alive_members: usize,
}

/// The three four-level configurations a detuned stage pair can realize,
/// keyed by the bath whose transition the pair shares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakConfiguration {
    /// Shared hot transition; parasitic flow between work and cold.
    FourLevel,
    /// Shared cold transition; parasitic flow between work and hot.
    FourLevelPrime,
    /// Shared work transition; parasitic flow between hot and cold.
    FourLevelDoublePrime,
}

/// A pair of detuned stages classified into a four-level configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StagePair<T> {
    pub configuration: LeakConfiguration,
    pub shared_bath: Bath,
    /// Predicted parasitic flow, hotter bath first.
    pub leak_from: Bath,
    pub leak_to: Bath,
    pub members: ([usize; 3], [usize; 3]),
    /// Frequency detuning of the mismatched baths.
    pub detuning: T,
}

/// A closed two-bath loop (four states, or two states when one transition is
/// parasitically addressed by a second bath).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoBathLoop<T> {
    pub states: Vec<usize>,
    pub baths: (Bath, Bath),
    pub quanta: Vec<T>,
}

/// Leak-direction classification of an arbitrary model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport<T> {
    pub kind: ModelKind,
    pub transitions: Vec<TransitionRecord<T>>,
    pub per_bath_frequencies: PerBath<Vec<T>>,
    /// Stage classes (distinct frequency triples) with their member cycles.
    pub stages: Vec<StageClass<T>>,
    /// All elementary three-bath cycles.
    pub cycles: Vec<StageCycle<T>>,
    /// Member cycles whose three transitions all survive the filters.
    pub surviving_cycles: Vec<[usize; 3]>,
    pub stage_pairs: Vec<StagePair<T>>,
    pub two_bath_loops: Vec<TwoBathLoop<T>>,
    /// Ordered `(from, to)` bath pairs with predicted parasitic flow.
    pub leak_directions: Vec<(Bath, Bath)>,
    /// Alive transitions that participate in no enumerated cycle.
    pub dangling: Vec<(Bath, usize, usize)>,
    /// No leak mechanism among surviving transitions.
    pub endoreversible: bool,
}

fn freq_eq<T: Scalar>(a: T, b: T, scale: T) -> bool {
    (a - b).abs() <= scale * lit::<T>(1e-9).max(T::default_epsilon() * lit(32.0))
}

/// Enumerate dissipative transitions, group them into stages, pair detuned
/// stages into the three four-level configurations and read off the leak
/// directions.
pub fn diagnose<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
) -> Result<DiagnosisReport<T>> {
    let eig = model.eigensystem();
    let channels = baths.map(|_, spec| bohr_channels(model, &eig, spec));
    let scale = eig.energies[model.dim - 1] - eig.energies[0];

    let mut transitions: Vec<TransitionRecord<T>> = Vec::new();
    for (bath, chans) in channels.iter() {
        for ch in chans {
            for (low, up, amp) in ch.dyads() {
                transitions.push(TransitionRecord {
                    bath,
                    omega: ch.omega,
                    lower: low,
                    upper: up,
                    amplitude: amp,
                    rate_down: ch.rate_down,
                    rate_up: ch.rate_up,
                });
            }
        }
    }
    transitions.sort_by(|a, b| {
        (a.bath, a.lower, a.upper)
            .cmp(&(b.bath, b.lower, b.upper))
    });

    let per_bath_frequencies = channels.map(|_, chans| {
        let mut f: Vec<T> = chans.iter().map(|c| c.omega).collect();
        f.sort_by(|a, b| a.partial_cmp(b).unwrap());
        f
    });

    // edge list keyed by the state pair; a pair may carry several baths
    let mut edges: std::collections::BTreeMap<(usize, usize), Vec<usize>> =
        std::collections::BTreeMap::new();
    for (idx, t) in transitions.iter().enumerate() {
        edges.entry((t.lower, t.upper)).or_default().push(idx);
    }

    // elementary 3-cycles touching all three baths
    let d = model.dim;
    let mut cycles: Vec<StageCycle<T>> = Vec::new();
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                let pairs = [(a, b), (a, c), (b, c)];
                if pairs.iter().any(|p| !edges.contains_key(p)) {
                    continue;
                }
                // every assignment of one transition per edge covering all baths
                let lists: Vec<&Vec<usize>> = pairs.iter().map(|p| &edges[p]).collect();
                for &i0 in lists[0] {
                    for &i1 in lists[1] {
                        for &i2 in lists[2] {
                            let trio = [&transitions[i0], &transitions[i1], &transitions[i2]];
                            let mut baths_seen: Vec<Bath> = trio.iter().map(|t| t.bath).collect();
                            baths_seen.sort();
                            baths_seen.dedup();
                            if baths_seen.len() != 3 {
                                continue;
                            }
                            let mut quanta = PerBath::splat(T::zero());
                            for t in trio {
                                *quanta.get_mut(t.bath) = t.omega;
                            }
                            cycles.push(StageCycle {
                                states: [a, b, c],
                                quanta,
                                alive: trio.iter().all(|t| t.alive()),
                            });
                        }
                    }
                }
            }
        }
    }

    // stage classes by frequency triple
    let mut stages: Vec<StageClass<T>> = Vec::new();
    for cy in &cycles {
        let found = stages.iter_mut().find(|s| {
            Bath::ALL
                .iter()
                .all(|&b| freq_eq(*s.quanta.get(b), *cy.quanta.get(b), scale))
        });
        match found {
            Some(s) => {
                s.members.push(cy.states);
                if cy.alive {
                    s.alive_members += 1;
                }
            }
            None => stages.push(StageClass {
                quanta: cy.quanta,
                members: vec![cy.states],
                alive_members: usize::from(cy.alive),
            }),
        }
    }

    let surviving_cycles: Vec<[usize; 3]> = cycles
        .iter()
        .filter(|c| c.alive)
        .map(|c| c.states)
        .collect();

    // detuned stage pairs: two alive cycles sharing exactly one edge at equal
    // frequency, with both remaining baths detuned
    let temps = baths.map(|_, b| b.temperature);
    let mut stage_pairs: Vec<StagePair<T>> = Vec::new();
    let alive_cycles: Vec<&StageCycle<T>> = cycles.iter().filter(|c| c.alive).collect();
    for (ia, ca) in alive_cycles.iter().enumerate() {
        for cb in alive_cycles.iter().skip(ia + 1) {
            let ea: std::collections::BTreeSet<(usize, usize)> = cycle_edges(ca.states).into();
            let eb: std::collections::BTreeSet<(usize, usize)> = cycle_edges(cb.states).into();
            let shared: Vec<_> = ea.intersection(&eb).collect();
            if shared.len() != 1 {
                continue;
            }
            // the shared edge must belong to the same bath at the same
            // frequency in both cycles
            let shared_edge = **shared.first().expect("one shared edge");
            let mut shared_bath = None;
            for &b in &Bath::ALL {
                if !freq_eq(*ca.quanta.get(b), *cb.quanta.get(b), scale) {
                    continue;
                }
                let owns = edges
                    .get(&shared_edge)
                    .map(|idxs| {
                        idxs.iter().any(|&i| {
                            transitions[i].bath == b
                                && freq_eq(transitions[i].omega, *ca.quanta.get(b), scale)
                        })
                    })
                    .unwrap_or(false);
                if owns {
                    shared_bath = Some(b);
                }
            }
            let Some(sb) = shared_bath else { continue };
            let others: Vec<Bath> = Bath::ALL.iter().copied().filter(|&b| b != sb).collect();
            let mismatch: Vec<Bath> = others
                .iter()
                .copied()
                .filter(|&b| !freq_eq(*ca.quanta.get(b), *cb.quanta.get(b), scale))
                .collect();
            if mismatch.len() != 2 {
                continue;
            }
            let configuration = match sb {
                Bath::Hot => LeakConfiguration::FourLevel,
                Bath::Cold => LeakConfiguration::FourLevelPrime,
                Bath::Work => LeakConfiguration::FourLevelDoublePrime,
            };
            let (from, to) = if temps.get(mismatch[0]) >= temps.get(mismatch[1]) {
                (mismatch[0], mismatch[1])
            } else {
                (mismatch[1], mismatch[0])
            };
            let detuning =
                (*ca.quanta.get(mismatch[0]) - *cb.quanta.get(mismatch[0])).abs();
            stage_pairs.push(StagePair {
                configuration,
                shared_bath: sb,
                leak_from: from,
                leak_to: to,
                members: (ca.states, cb.states),
                detuning,
            });
        }
    }

    // two-bath loops: 4-cycles alternating two baths, plus 2-state shortcut
    // loops where one transition is addressed by two baths
    let mut two_bath_loops: Vec<TwoBathLoop<T>> = Vec::new();
    for (&(i, j), idxs) in &edges {
        if idxs.len() < 2 {
            continue;
        }
        for (k, &x) in idxs.iter().enumerate() {
            for &y in idxs.iter().skip(k + 1) {
                let (tx, ty) = (&transitions[x], &transitions[y]);
                if tx.bath != ty.bath && tx.alive() && ty.alive() {
                    two_bath_loops.push(TwoBathLoop {
                        states: vec![i, j],
                        baths: sorted_pair(tx.bath, ty.bath),
                        quanta: vec![tx.omega, ty.omega],
                    });
                }
            }
        }
    }
    // 4-cycles with exactly two baths: a is the smallest state, b < c its
    // neighbours in the cycle, e the opposite corner
    for a in 0..d {
        for b in (a + 1)..d {
            for c in (b + 1)..d {
                for e in (a + 1)..d {
                    if e == b || e == c {
                        continue;
                    }
                    // cycle a-b-e-c-a
                    let quad: Vec<(usize, usize)> = [(a, b), (b, e), (e, c), (c, a)]
                        .iter()
                        .map(|&(x, y)| ord(x, y))
                        .collect();
                    if quad.iter().any(|p| !edges.contains_key(p)) {
                        continue;
                    }
                    let combos: Vec<&Vec<usize>> = quad.iter().map(|p| &edges[p]).collect();
                    for &i0 in combos[0] {
                        for &i1 in combos[1] {
                            for &i2 in combos[2] {
                                for &i3 in combos[3] {
                                    let ts = [
                                        &transitions[i0],
                                        &transitions[i1],
                                        &transitions[i2],
                                        &transitions[i3],
                                    ];
                                    if !ts.iter().all(|t| t.alive()) {
                                        continue;
                                    }
                                    let mut bs: Vec<Bath> =
                                        ts.iter().map(|t| t.bath).collect();
                                    bs.sort();
                                    bs.dedup();
                                    if bs.len() == 2 {
                                        two_bath_loops.push(TwoBathLoop {
                                            states: vec![a, b, e, c],
                                            baths: (bs[0], bs[1]),
                                            quanta: ts.iter().map(|t| t.omega).collect(),
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    // leak directions from stage pairs and shortcut loops, hotter bath first
    let mut leak_directions: Vec<(Bath, Bath)> = Vec::new();
    for p in &stage_pairs {
        leak_directions.push((p.leak_from, p.leak_to));
    }
    for l in &two_bath_loops {
        if l.states.len() == 2 {
            let (a, b) = l.baths;
            let (from, to) = if temps.get(a) >= temps.get(b) {
                (a, b)
            } else {
                (b, a)
            };
            leak_directions.push((from, to));
        }
    }
    leak_directions.sort();
    leak_directions.dedup();

    // alive transitions in no enumerated cycle
    let mut covered: std::collections::BTreeSet<(usize, usize)> = std::collections::BTreeSet::new();
    for cy in &cycles {
        if cy.alive {
            for e in cycle_edges(cy.states) {
                covered.insert(e);
            }
        }
    }
    for l in &two_bath_loops {
        if l.states.len() == 4 {
            let s = &l.states;
            for w in [(s[0], s[1]), (s[1], s[2]), (s[2], s[3]), (s[3], s[0])] {
                covered.insert(ord(w.0, w.1));
            }
        } else {
            covered.insert(ord(l.states[0], l.states[1]));
        }
    }
    let dangling: Vec<(Bath, usize, usize)> = transitions
        .iter()
        .filter(|t| t.alive() && !covered.contains(&(t.lower, t.upper)))
        .map(|t| (t.bath, t.lower, t.upper))
        .collect();

    let endoreversible = leak_directions.is_empty();

    Ok(DiagnosisReport {
        kind: model.kind,
        transitions,
        per_bath_frequencies,
        stages,
        cycles,
        surviving_cycles,
        stage_pairs,
        two_bath_loops,
        leak_directions,
        dangling,
        endoreversible,
    })
}

fn cycle_edges(states: [usize; 3]) -> [(usize, usize); 3] {
    let [a, b, c] = states;
    [(a, b), (a, c), (b, c)]
}

fn ord(a: usize, b: usize) -> (usize, usize) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn sorted_pair(a: Bath, b: Bath) -> (Bath, Bath) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lindblad::build_liouvillian;
    use crate::models::{
        build_four_level, build_four_level_double_prime, build_four_level_prime,
        build_three_level, build_three_level_shorted, build_three_qubit, SpectralFilter,
    };
    use approx::assert_relative_eq;

    fn bench_baths(gamma: f64) -> PerBath<BathSpec<f64>> {
        BathSpec::flat_trio(9.0, 8.0, 7.0, gamma).unwrap()
    }

    #[test]
    fn rate_extraction_routes_agree() {
        // parameter-derived rates equal the ones read off the assembled
        // channels whenever the splitting is resolved
        for (wc, g) in [(2.0, 0.1), (1.5, 0.45), (2.6, 0.2)] {
            let m = build_four_level(wc, 6.0, g).unwrap();
            let baths = bench_baths(1e-3);
            let liouv = build_liouvillian(&m, &baths).unwrap();
            let a = FourLevelRates::from_params(&m, &baths).unwrap();
            let b = FourLevelRates::from_liouvillian(&liouv).unwrap();
            for (x, y) in [
                (a.cold_minus, b.cold_minus),
                (a.cold_plus, b.cold_plus),
                (a.work_minus, b.work_minus),
                (a.work_plus, b.work_plus),
                (a.hot, b.hot),
            ] {
                assert_relative_eq!(x.0, y.0, max_relative = 1e-12);
                assert_relative_eq!(x.1, y.1, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn windows_arithmetic() {
        let w = cooling_windows(2.625, 0.1).unwrap();
        assert_eq!(w.plus, Some((0.0, 2.525)));
        assert_eq!(w.minus, (0.1, 2.725));
        assert!(!w.plus_window_lost);

        let w = cooling_windows(2.625, 0.0).unwrap();
        assert_eq!(w.plus, Some((0.0, 2.625)));
        assert_eq!(w.minus, (0.0, 2.625));

        let w = cooling_windows(2.625, 3.0).unwrap();
        assert!(w.plus.is_none());
        assert!(w.plus_window_lost);
    }

    #[test]
    fn breakdown_identity_at_benchmark_point() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let liouv = build_liouvillian(&m, &baths).unwrap();
        let report = thermo::solve_with(&m, &liouv).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        let total = bd.total();
        let qmax = report
            .currents
            .iter()
            .map(|(_, q)| q.abs())
            .fold(0.0_f64, f64::max);
        for bath in Bath::ALL {
            assert!(
                (*report.currents.get(bath) - *total.get(bath)).abs() <= 1e-10 * qmax,
                "bath {bath}: {} vs {}",
                report.currents.get(bath),
                total.get(bath)
            );
        }
        assert!(bd.rates.d_norm > 0.0);
        assert!(bd.rates.i_leak <= 0.0);
        assert!(bd.entropy.0 >= -1e-12);
        assert!(bd.entropy.1 >= -1e-12);
        assert!(bd.entropy.2 >= -1e-12);
    }

    #[test]
    fn per_stage_first_law() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(1.7, 6.0, 0.3).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        for stage in [&bd.plus, &bd.minus, &bd.leak] {
            let sum = stage.work + stage.hot + stage.cold;
            assert!(sum.abs() < 1e-16 + 1e-12 * stage.work.abs());
        }
    }

    #[test]
    fn stage_cop_is_quantum_ratio() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        let ww = 4.0;
        assert_relative_eq!(bd.plus.cold / bd.plus.work, 2.1 / (ww - 0.1), epsilon = 1e-12);
        assert_relative_eq!(
            bd.minus.cold / bd.minus.work,
            1.9 / (ww + 0.1),
            epsilon = 1e-12
        );
    }

    #[test]
    fn resonant_limit_kills_leak() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.0).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        assert!(bd.rates.i_leak.abs() < 1e-18);
        assert!(bd.rates.i_plus > 0.0);
        assert!(bd.rates.i_minus > 0.0);
    }

    #[test]
    fn equilibrium_kills_everything() {
        let baths = BathSpec::flat_trio(8.0_f64, 8.0, 8.0, 1e-3).unwrap();
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        assert!(bd.rates.i_plus.abs() < 1e-18);
        assert!(bd.rates.i_minus.abs() < 1e-18);
        assert!(bd.rates.i_leak.abs() < 1e-18);
    }

    #[test]
    fn stage_rates_reject_blackout() {
        let r = FourLevelRates {
            cold_minus: (0.0, 0.0),
            cold_plus: (0.0, 0.0),
            work_minus: (0.0, 0.0),
            work_plus: (0.0, 0.0),
            hot: (0.0, 0.0),
        };
        assert!(stage_rates(&r).is_err());
    }

    #[test]
    fn window_edge_reversibility() {
        let baths = bench_baths(1e-3);
        let tol = 1e-8 * 1e-3 * 216.0;
        // plus stage reversible at omega_c_rev - g
        let m = build_four_level(2.525, 6.0, 0.1).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        assert!(bd.entropy.0.abs() <= tol, "dS+ = {}", bd.entropy.0);
        assert!(bd.entropy.1 > tol);
        // minus stage reversible at omega_c_rev + g
        let m = build_four_level(2.725, 6.0, 0.1).unwrap();
        let bd = stage_breakdown(&m, &baths).unwrap();
        assert!(bd.entropy.1.abs() <= tol, "dS- = {}", bd.entropy.1);
        assert!(bd.entropy.0 > tol);
        // the leak share never closes
        assert!(bd.entropy.2 > 0.0);
    }

    #[test]
    fn imbalance_regimes() {
        let baths = bench_baths(1e-3);
        let of = |wc: f64| {
            let m = build_four_level(wc, 6.0, 0.1).unwrap();
            let liouv = build_liouvillian(&m, &baths).unwrap();
            imbalance_check(&FourLevelRates::from_liouvillian(&liouv).unwrap())
        };
        let both = of(2.0);
        assert!(both.plus_cools && both.minus_cools);
        let mid = of(2.6); // between 2.525 and 2.725
        assert!(!mid.plus_cools && mid.minus_cools);
        let none = of(2.8);
        assert!(!none.plus_cools && !none.minus_cools);
    }

    #[test]
    fn verify_breakdown_grid() {
        let baths = bench_baths(1e-3);
        let grid: Vec<f64> = (0..50).map(|i| 0.15 + i as f64 * (2.825 - 0.15) / 49.0).collect();
        let v = verify_breakdown(6.0, 0.1, &baths, &grid, 1e-10).unwrap();
        assert!(v.violation.is_none(), "violation at {:?}", v.violation);
        assert!(v.max_rel_mismatch <= 1e-10);
        for row in &v.rows {
            assert!(row.rates.i_leak <= 1e-18);
            assert!(row.entropy.0 >= -1e-12);
            assert!(row.entropy.1 >= -1e-12);
            assert!(row.entropy.2 >= -1e-12);
            // stage signs inside/outside the windows (skip boundary points)
            let margin = 1e-6;
            if row.omega_c < 2.525 - margin {
                assert!(row.rates.i_plus > 0.0, "I+ at {}", row.omega_c);
            } else if row.omega_c > 2.525 + margin {
                assert!(row.rates.i_plus < 0.0, "I+ at {}", row.omega_c);
            }
            if row.omega_c > 0.1 + margin && row.omega_c < 2.725 - margin {
                assert!(row.rates.i_minus > 0.0, "I- at {}", row.omega_c);
            } else if row.omega_c > 2.725 + margin {
                assert!(row.rates.i_minus < 0.0, "I- at {}", row.omega_c);
            }
        }
    }

    #[test]
    fn verify_breakdown_with_cutoff() {
        // killing the omega_w + g work channel zeroes the minus stage and the
        // leak while the identity still holds
        let wc = 2.0;
        let ww = 6.0 - wc;
        let mut baths = bench_baths(1e-3);
        baths.work.filter = SpectralFilter::HighCutoff { omega_max: ww };
        let v = verify_breakdown(6.0, 0.1, &baths, &[wc], 1e-10).unwrap();
        assert!(v.violation.is_none());
        let row = &v.rows[0];
        assert_eq!(row.rates.i_minus, 0.0);
        assert_eq!(row.rates.i_leak, 0.0);
        assert!(row.rates.i_plus > 0.0);
    }

    #[test]
    fn diagnose_three_level() {
        let baths = bench_baths(1e-3);
        let m = build_three_level(2.0, 6.0).unwrap();
        let d = diagnose(&m, &baths).unwrap();
        assert_eq!(d.transitions.len(), 3);
        assert_eq!(d.stages.len(), 1);
        assert_eq!(d.cycles.len(), 1);
        assert!(d.leak_directions.is_empty());
        assert!(d.endoreversible);
        assert!(d.dangling.is_empty());
    }

    #[test]
    fn diagnose_four_level() {
        let baths = bench_baths(1e-3);
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let d = diagnose(&m, &baths).unwrap();
        assert_eq!(d.transitions.len(), 5);
        assert_eq!(d.stages.len(), 2);
        assert_eq!(d.cycles.len(), 2);
        assert_eq!(d.stage_pairs.len(), 1);
        let p = &d.stage_pairs[0];
        assert_eq!(p.configuration, LeakConfiguration::FourLevel);
        assert_eq!(p.shared_bath, Bath::Hot);
        assert_eq!((p.leak_from, p.leak_to), (Bath::Work, Bath::Cold));
        assert_eq!(d.leak_directions, vec![(Bath::Work, Bath::Cold)]);
        // C5/C6: one two-bath four-state loop over work and cold
        assert_eq!(d.two_bath_loops.len(), 1);
        assert_eq!(d.two_bath_loops[0].baths, (Bath::Work, Bath::Cold));
        assert!(!d.endoreversible);
    }

    #[test]
    fn diagnose_variants_leak_directions() {
        let baths = bench_baths(1e-3);
        let p = diagnose(&build_four_level_prime(2.0, 6.0, 0.1).unwrap(), &baths).unwrap();
        assert_eq!(p.leak_directions, vec![(Bath::Work, Bath::Hot)]);
        assert_eq!(p.stage_pairs[0].configuration, LeakConfiguration::FourLevelPrime);

        let pp = diagnose(
            &build_four_level_double_prime(2.0, 6.0, 0.1).unwrap(),
            &baths,
        )
        .unwrap();
        assert_eq!(pp.leak_directions, vec![(Bath::Hot, Bath::Cold)]);
        assert_eq!(
            pp.stage_pairs[0].configuration,
            LeakConfiguration::FourLevelDoublePrime
        );
    }

    #[test]
    fn diagnose_shorted_three_level() {
        let baths = bench_baths(1e-3);
        let m = build_three_level_shorted(2.0, 6.0, 0.5).unwrap();
        let d = diagnose(&m, &baths).unwrap();
        // the work transition is parasitically addressed by the cold bath
        assert_eq!(d.transitions.len(), 4);
        assert!(d
            .two_bath_loops
            .iter()
            .any(|l| l.states.len() == 2 && l.baths == (Bath::Work, Bath::Cold)));
        assert!(d.leak_directions.contains(&(Bath::Work, Bath::Cold)));
        assert!(!d.endoreversible);
    }

    #[test]
    fn diagnose_three_qubit() {
        let baths = bench_baths(1e-3);
        let m = build_three_qubit(2.0, 6.0, 0.1).unwrap();
        let d = diagnose(&m, &baths).unwrap();
        assert_eq!(d.transitions.len(), 18);
        let n_channels: usize = d.per_bath_frequencies.iter().map(|(_, f)| f.len()).sum();
        assert_eq!(n_channels, 9);
        assert_eq!(d.stages.len(), 6);
        assert_eq!(d.cycles.len(), 12);
        for s in &d.stages {
            assert_eq!(s.members.len(), 2);
        }
        let mut dirs = d.leak_directions.clone();
        dirs.sort();
        assert_eq!(
            dirs,
            vec![
                (Bath::Work, Bath::Hot),
                (Bath::Work, Bath::Cold),
                (Bath::Hot, Bath::Cold),
            ]
        );
        assert!(d.dangling.is_empty());
    }

    #[test]
    fn diagnose_three_qubit_double_cutoff() {
        // cutoffs between omega_h - g and omega_h (hot) and between
        // omega_w - g and omega_w (work) leave two resonant uncoupled stages
        let wc = 2.0;
        let g = 0.1;
        let ww = 6.0 - wc;
        let mut baths = bench_baths(1e-3);
        baths.hot.filter = SpectralFilter::HighCutoff {
            omega_max: 6.0 - g / 2.0,
        };
        baths.work.filter = SpectralFilter::HighCutoff {
            omega_max: ww - g / 2.0,
        };
        let m = build_three_qubit(wc, 6.0, g).unwrap();
        let d = diagnose(&m, &baths).unwrap();
        assert_eq!(d.surviving_cycles.len(), 2);
        let mut sets: Vec<Vec<usize>> = d
            .surviving_cycles
            .iter()
            .map(|s| s.iter().map(|x| x + 1).collect())
            .collect();
        sets.sort();
        assert_eq!(sets, vec![vec![1, 2, 4], vec![5, 7, 8]]);
        // the two survivors are resonant (same frequency triple) and share no edge
        assert!(d.stage_pairs.is_empty());
        assert!(d.endoreversible);
    }
}
