//! Stochastic jump trajectories of the four-level chiller family.
//!
//! Every channel of these models is a single eigenstate dyad, so the secular
//! master equation closes on populations and the trajectory unravelling
//! reduces exactly to a continuous-time Markov jump process over energy
//! eigenstates. Closed trajectory segments are classified into the six
//! elementary cycles of the four-level chiller by loop erasure: a state
//! stack is maintained and every time a state repeats the enclosed primitive
//! loop is popped and tallied.
//!
//! Reproducibility contract: the stream of a trajectory is fully determined
//! by `(seed, trajectory index)` via a counter-based generator.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ChillerError, Result};
use crate::lindblad::build_liouvillian;
use crate::models::{Bath, BathSpec, ModelKind, PerBath, SystemModel};
use crate::scalar::{lit, Scalar};
use crate::thermo;

/// One stochastic jump between energy eigenstates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent<T> {
    pub time: T,
    pub from_state: usize,
    pub to_state: usize,
    pub bath: Bath,
    /// Energy gained by the system, `E(to) - E(from)`.
    pub quantum: T,
}

/// Tags of the six elementary four-level cycles; everything else (including
/// immediately-undone back-and-forth jumps) counts as `Other`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CycleTag {
    C1,
    C2,
    C3,
    C4,
    C5,
    C6,
    Other,
}

/// Loop counts over a trajectory ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTally<T> {
    pub counts: BTreeMap<CycleTag, u64>,
    pub total_time: T,
}

impl<T: Scalar> CycleTally<T> {
    fn empty(total_time: T) -> Self {
        let mut counts = BTreeMap::new();
        for tag in [
            CycleTag::C1,
            CycleTag::C2,
            CycleTag::C3,
            CycleTag::C4,
            CycleTag::C5,
            CycleTag::C6,
            CycleTag::Other,
        ] {
            counts.insert(tag, 0);
        }
        CycleTally { counts, total_time }
    }

    pub fn count(&self, tag: CycleTag) -> u64 {
        self.counts.get(&tag).copied().unwrap_or(0)
    }
}

/// Net stage fluxes reconstructed from loop counts, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageFluxEstimate<T> {
    /// `(N_C1 - N_C2)/t` per trajectory, averaged.
    pub i_plus: T,
    pub i_plus_se: T,
    /// `(N_C3 - N_C4)/t`.
    pub i_minus: T,
    pub i_minus_se: T,
    /// `2 (N_C6 - N_C5)/t`; each leak loop moves `2g` between the work and
    /// cold baths while the leak currents are written as `g I_leak`.
    pub i_leak: T,
    pub i_leak_se: T,
}

/// Ensemble estimate of the steady-state currents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurrentEstimate<T> {
    /// Per-bath mean current (positive: heat out of the bath into the system).
    pub currents: PerBath<T>,
    /// Standard error of each mean over the trajectory ensemble.
    pub std_err: PerBath<T>,
    pub n_trajectories: usize,
    pub duration: T,
    pub seed: u64,
    pub tally: CycleTally<T>,
    pub stage_flux: StageFluxEstimate<T>,
    /// Fraction of time spent in each eigenstate.
    pub occupation: Vec<T>,
    pub occupation_se: Vec<T>,
}

/// Validated jump-process sampler for a model whose dissipative channels are
/// all single eigenstate dyads.
#[derive(Debug, Clone)]
pub struct JumpProcess<T: Scalar> {
    kind: ModelKind,
    energies: Vec<T>,
    /// Outgoing transitions per state: `(target, rate, bath)`.
    outgoing: Vec<Vec<(usize, T, Bath)>>,
    /// Stationary populations used as the initial distribution.
    initial: Vec<T>,
}

impl<T: Scalar> JumpProcess<T> {
    /// Build the sampler: solves the steady state for the initial
    /// distribution and refuses models with coherence-carrying channels.
    pub fn new(model: &SystemModel<T>, baths: &PerBath<BathSpec<T>>) -> Result<Self> {
        let liouv = build_liouvillian(model, baths)?;
        for (bath, chans) in liouv.channels.iter() {
            for ch in chans {
                if ch.dyads().len() != 1 {
                    return Err(ChillerError::Unsupported(format!(
                        "bath {bath} has a merged channel at frequency {} coupling \
                         several transitions; jump sampling requires population-only \
                         dynamics (four-level family with g > 0)",
                        ch.omega
                    )));
                }
            }
        }
        let report = thermo::solve_with(model, &liouv)?;

        let d = model.dim;
        let mut outgoing = vec![Vec::new(); d];
        for (bath, chans) in liouv.channels.iter() {
            for ch in chans {
                let (low, up, amp) = ch.dyads()[0];
                let a2 = amp * amp;
                let down = ch.rate_down * a2;
                let up_rate = ch.rate_up * a2;
                if down > T::zero() {
                    outgoing[up].push((low, down, bath));
                }
                if up_rate > T::zero() {
                    outgoing[low].push((up, up_rate, bath));
                }
            }
        }
        Ok(JumpProcess {
            kind: model.kind,
            energies: liouv.energies.iter().copied().collect(),
            outgoing,
            initial: report.populations.iter().copied().collect(),
        })
    }

    pub fn stationary_populations(&self) -> &[T] {
        &self.initial
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    fn rng_for(seed: u64, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(index);
        rng
    }

    fn draw_initial(&self, rng: &mut ChaCha12Rng) -> usize {
        let u: T = lit(rng.random::<f64>());
        let mut acc = T::zero();
        for (i, p) in self.initial.iter().enumerate() {
            acc += *p;
            if u < acc {
                return i;
            }
        }
        self.initial.len() - 1
    }

    /// Sample one trajectory of the given duration; the event stream is a
    /// pure function of `(seed, index)`.
    pub fn sample_trajectory(&self, duration: T, seed: u64, index: u64) -> Vec<JumpEvent<T>> {
        let mut rng = Self::rng_for(seed, index);
        let mut state = self.draw_initial(&mut rng);
        let mut t = T::zero();
        let mut events = Vec::new();
        loop {
            let out = &self.outgoing[state];
            let total: T = out.iter().fold(T::zero(), |a, &(_, r, _)| a + r);
            if !(total > T::zero()) {
                break; // absorbing state (all outgoing channels filtered away)
            }
            let u: f64 = rng.random();
            let dt = lit::<T>(-(1.0 - u).ln()) / total;
            t += dt;
            if t > duration {
                break;
            }
            let x: T = lit::<T>(rng.random::<f64>()) * total;
            let mut acc = T::zero();
            let mut chosen = out.len() - 1;
            for (k, &(_, r, _)) in out.iter().enumerate() {
                acc += r;
                if x < acc {
                    chosen = k;
                    break;
                }
            }
            let (to, _, bath) = out[chosen];
            events.push(JumpEvent {
                time: t,
                from_state: state,
                to_state: to,
                bath,
                quantum: self.energies[to] - self.energies[state],
            });
            state = to;
        }
        events
    }

    /// Time spent in each state over `[0, duration]`.
    fn occupation(&self, events: &[JumpEvent<T>], start: usize, duration: T) -> Vec<T> {
        let mut occ = vec![T::zero(); self.energies.len()];
        let mut state = start;
        let mut last = T::zero();
        for ev in events {
            occ[state] += ev.time - last;
            last = ev.time;
            state = ev.to_state;
        }
        occ[state] += duration - last;
        occ
    }

    /// Ensemble current estimate with loop tallies and stage-flux
    /// reconstruction. Trajectories run in parallel; the reduction is over
    /// the fixed trajectory-index order, so results are schedule-independent.
    pub fn estimate_currents(
        &self,
        n_trajectories: usize,
        duration: T,
        seed: u64,
    ) -> Result<CurrentEstimate<T>> {
        if n_trajectories < 2 {
            return Err(ChillerError::Unsupported(
                "at least two trajectories are needed for a standard error".into(),
            ));
        }
        if !(duration > T::zero()) {
            return Err(ChillerError::Unsupported("duration must be positive".into()));
        }

        struct PerTraj<T> {
            currents: PerBath<T>,
            tally: CycleTally<T>,
            occupation: Vec<T>,
        }

        let d = self.energies.len();
        let per: Vec<PerTraj<T>> = (0..n_trajectories)
            .into_par_iter()
            .map(|k| {
                let events = self.sample_trajectory(duration, seed, k as u64);
                let start = events
                    .first()
                    .map(|e| e.from_state)
                    .unwrap_or_else(|| {
                        let mut rng = Self::rng_for(seed, k as u64);
                        self.draw_initial(&mut rng)
                    });
                let mut q = PerBath::splat(T::zero());
                for ev in &events {
                    *q.get_mut(ev.bath) += ev.quantum;
                }
                let currents = q.map(|_, v| *v / duration);
                let tally = classify_cycles(&events, self.kind, duration);
                let occupation = self
                    .occupation(&events, start, duration)
                    .into_iter()
                    .map(|x| x / duration)
                    .collect();
                PerTraj {
                    currents,
                    tally,
                    occupation,
                }
            })
            .collect();

        let n = lit::<T>(n_trajectories as f64);
        let mean_se = |xs: &dyn Fn(&PerTraj<T>) -> T| -> (T, T) {
            let mut mean = T::zero();
            for p in &per {
                mean += xs(p);
            }
            mean /= n;
            let mut var = T::zero();
            for p in &per {
                let dx = xs(p) - mean;
                var += dx * dx;
            }
            var /= n - T::one();
            (mean, (var / n).sqrt())
        };

        let mut currents = PerBath::splat(T::zero());
        let mut std_err = PerBath::splat(T::zero());
        for bath in Bath::ALL {
            let (m, s) = mean_se(&|p: &PerTraj<T>| *p.currents.get(bath));
            *currents.get_mut(bath) = m;
            *std_err.get_mut(bath) = s;
        }

        let flux = |a: CycleTag, b: CycleTag, scale: T| {
            mean_se(&|p: &PerTraj<T>| {
                scale * (lit::<T>(p.tally.count(a) as f64) - lit::<T>(p.tally.count(b) as f64))
                    / duration
            })
        };
        let (ip, ip_se) = flux(CycleTag::C1, CycleTag::C2, T::one());
        let (im, im_se) = flux(CycleTag::C3, CycleTag::C4, T::one());
        let (il, il_se) = flux(CycleTag::C6, CycleTag::C5, lit(2.0));

        let mut occupation = Vec::with_capacity(d);
        let mut occupation_se = Vec::with_capacity(d);
        for i in 0..d {
            let (m, s) = mean_se(&|p: &PerTraj<T>| p.occupation[i]);
            occupation.push(m);
            occupation_se.push(s);
        }

        let mut tally = CycleTally::empty(duration * n);
        for p in &per {
            for (tag, c) in &p.tally.counts {
                *tally.counts.get_mut(tag).unwrap() += c;
            }
        }

        Ok(CurrentEstimate {
            currents,
            std_err,
            n_trajectories,
            duration,
            seed,
            tally,
            stage_flux: StageFluxEstimate {
                i_plus: ip,
                i_plus_se: ip_se,
                i_minus: im,
                i_minus_se: im_se,
                i_leak: il,
                i_leak_se: il_se,
            },
            occupation,
            occupation_se,
        })
    }
}

/// Sample one trajectory (convenience wrapper building the sampler).
pub fn sample_trajectory<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
    duration: T,
    seed: u64,
) -> Result<Vec<JumpEvent<T>>> {
    Ok(JumpProcess::new(model, baths)?.sample_trajectory(duration, seed, 0))
}

/// Ensemble current estimate (convenience wrapper).
pub fn estimate_currents<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
    n_trajectories: usize,
    duration: T,
    seed: u64,
) -> Result<CurrentEstimate<T>> {
    JumpProcess::new(model, baths)?.estimate_currents(n_trajectories, duration, seed)
}

/// Cut an event stream into primitive loops by loop erasure and tally them
/// against the six elementary cycle patterns of the four-level chiller.
///
/// For model kinds other than the four-level chiller every loop lands in
/// `Other`; back-and-forth two-jump loops are always `Other`.
pub fn classify_cycles<T: Scalar>(
    trajectory: &[JumpEvent<T>],
    kind: ModelKind,
    total_time: T,
) -> CycleTally<T> {
    let mut tally = CycleTally::empty(total_time);
    let Some(first) = trajectory.first() else {
        return tally;
    };
    let mut stack: Vec<usize> = vec![first.from_state];
    let mut pending: Vec<(Bath, usize, usize)> = Vec::new();
    for ev in trajectory {
        pending.push((ev.bath, ev.from_state, ev.to_state));
        let s = ev.to_state;
        if let Some(pos) = stack.iter().position(|&x| x == s) {
            let loop_len = stack.len() - pos;
            let start = pending.len() - loop_len;
            let tag = if kind == ModelKind::FourLevel {
                classify_loop(&pending[start..])
            } else {
                CycleTag::Other
            };
            *tally.counts.get_mut(&tag).unwrap() += 1;
            pending.truncate(start);
            stack.truncate(pos + 1);
        } else {
            stack.push(s);
        }
    }
    tally
}

fn classify_loop(steps: &[(Bath, usize, usize)]) -> CycleTag {
    use Bath::{Cold as C, Hot as H, Work as W};
    const LEN3: usize = 3;
    const LEN4: usize = 4;
    if steps.len() != LEN3 && steps.len() != LEN4 {
        return CycleTag::Other;
    }
    // rotate so the loop starts at its smallest state
    let k = steps
        .iter()
        .enumerate()
        .min_by_key(|(_, s)| s.1)
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut rot = Vec::with_capacity(steps.len());
    rot.extend_from_slice(&steps[k..]);
    rot.extend_from_slice(&steps[..k]);

    let c1 = [(C, 0, 2), (W, 2, 3), (H, 3, 0)];
    let c2 = [(H, 0, 3), (W, 3, 2), (C, 2, 0)];
    let c3 = [(C, 0, 1), (W, 1, 3), (H, 3, 0)];
    let c4 = [(H, 0, 3), (W, 3, 1), (C, 1, 0)];
    let c5 = [(C, 0, 1), (W, 1, 3), (W, 3, 2), (C, 2, 0)];
    let c6 = [(C, 0, 2), (W, 2, 3), (W, 3, 1), (C, 1, 0)];

    if rot.len() == LEN3 {
        if rot == c1 {
            CycleTag::C1
        } else if rot == c2 {
            CycleTag::C2
        } else if rot == c3 {
            CycleTag::C3
        } else if rot == c4 {
            CycleTag::C4
        } else {
            CycleTag::Other
        }
    } else if rot == c5 {
        CycleTag::C5
    } else if rot == c6 {
        CycleTag::C6
    } else {
        CycleTag::Other
    }
}
