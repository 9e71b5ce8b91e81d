//! Eigenoperator decomposition of the thermal contacts, detailed-balance
//! Ohmic rates and assembly of the LGKS generator.
//!
//! Each contact operator `S_alpha` decomposes as `S_alpha = sum_w A_{alpha,w}`
//! with `[H, A_{alpha,w}] = -w A_{alpha,w}`; transitions of one bath sharing a
//! Bohr frequency (within tolerance) are merged into a single lowering
//! operator (full secular approximation). The superoperator acts on
//! column-major vectorized density operators.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{ChillerError, Result};
use crate::models::{Bath, BathSpec, Eigensystem, PerBath, SystemModel};
use crate::scalar::{lit, Scalar};

/// Complex matrix over the working scalar.
pub type CMatrix<T> = DMatrix<Complex<T>>;
/// Complex vector over the working scalar.
pub type CVector<T> = DVector<Complex<T>>;

/// One dissipative channel: a Bohr frequency of one bath together with its
/// lowering operator (in the energy basis) and the emission/absorption rates.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrChannel<T: Scalar> {
    pub bath: Bath,
    /// Positive Bohr frequency of the channel.
    pub omega: T,
    /// Real lowering operator `A` in the energy basis; maps upper eigenstates
    /// to lower ones, matrix elements inherited from `S_alpha`.
    pub lowering: DMatrix<T>,
    /// Emission rate `Gamma_{alpha, +omega}` (quanta into the bath).
    pub rate_down: T,
    /// Absorption rate `Gamma_{alpha, -omega}`.
    pub rate_up: T,
}

impl<T: Scalar> BohrChannel<T> {
    /// Dyadic components `(lower, upper, amplitude)` of the lowering operator.
    pub fn dyads(&self) -> Vec<(usize, usize, T)> {
        let d = self.lowering.nrows();
        let tol = T::default_epsilon() * lit(1e3);
        let mut out = Vec::new();
        for i in 0..d {
            for j in 0..d {
                if self.lowering[(i, j)].abs() > tol {
                    out.push((i, j, self.lowering[(i, j)]));
                }
            }
        }
        out
    }
}

/// Emission/absorption rate pair of a bath at Bohr frequency `omega > 0`:
/// `down = gamma w^3 (1 + n(w)) F(w)` and `up = down * exp(-w/T)`, with
/// `n(w) = 1/(exp(w/T) - 1)`. Detailed balance holds exactly by construction.
pub fn rate<T: Scalar>(bath: &BathSpec<T>, omega: T) -> Result<(T, T)> {
    if !(omega > T::zero()) {
        return Err(ChillerError::InvalidBath(format!(
            "rate requires a positive Bohr frequency, got {omega}"
        )));
    }
    let f = bath.filter.transmission(omega);
    let boltz = (-omega / bath.temperature).exp();
    // gamma w^3 (1 + n) = gamma w^3 / (1 - e^{-w/T})
    let down = bath.gamma * omega * omega * omega * f / (T::one() - boltz);
    let up = down * boltz;
    Ok((down, up))
}

/// Decompose one contact operator into Bohr channels, grouping transitions of
/// equal frequency (relative tolerance `1e-9`).
pub fn bohr_channels<T: Scalar>(
    model: &SystemModel<T>,
    eig: &Eigensystem<T>,
    bath: &BathSpec<T>,
) -> Vec<BohrChannel<T>> {
    let d = model.dim;
    let s_energy = eig.basis.transpose() * model.contacts.get(bath.bath) * &eig.basis;

    // energy scale for the zero/grouping tolerances
    let mut w_max = T::zero();
    for i in 0..d {
        for j in 0..d {
            let w = (eig.energies[j] - eig.energies[i]).abs();
            if w > w_max {
                w_max = w;
            }
        }
    }
    let rel = lit::<T>(1e-9).max(T::default_epsilon() * lit(32.0));
    let w_tol = w_max * rel;
    let amp_tol = T::default_epsilon() * lit(1e3);

    // strictly lowering components (upper -> lower)
    let mut parts: Vec<(T, usize, usize, T)> = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let w = eig.energies[j] - eig.energies[i];
            if w > w_tol && s_energy[(i, j)].abs() > amp_tol {
                parts.push((w, i, j, s_energy[(i, j)]));
            }
        }
    }
    parts.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("non-finite Bohr frequency"));

    let mut channels = Vec::new();
    let mut k = 0;
    while k < parts.len() {
        let mut group_end = k + 1;
        while group_end < parts.len() && parts[group_end].0 - parts[k].0 < w_tol {
            group_end += 1;
        }
        let mut lowering = DMatrix::zeros(d, d);
        let mut w_sum = T::zero();
        for &(w, i, j, a) in &parts[k..group_end] {
            lowering[(i, j)] = a;
            w_sum += w;
        }
        let omega = w_sum / T::from_usize(group_end - k).unwrap();
        let (rate_down, rate_up) = rate(bath, omega).expect("positive frequency by construction");
        channels.push(BohrChannel {
            bath: bath.bath,
            omega,
            lowering,
            rate_down,
            rate_up,
        });
        k = group_end;
    }
    channels
}

/// Dense LGKS generator on vectorized density operators, split per bath.
#[derive(Debug, Clone)]
pub struct Liouvillian<T: Scalar> {
    pub dim: usize,
    /// Eigenenergies of the model (ascending); the generator lives in this basis.
    pub energies: DVector<T>,
    /// Unitary commutator part `-i[H, .]`.
    pub hamiltonian_part: CMatrix<T>,
    /// Dissipator superoperator of each bath.
    pub dissipators: PerBath<CMatrix<T>>,
    /// `-i[H, .] + sum_alpha L_alpha`.
    pub total: CMatrix<T>,
    /// The Bohr channels each dissipator was assembled from.
    pub channels: PerBath<Vec<BohrChannel<T>>>,
    /// Bath specifications used at assembly.
    pub baths: PerBath<BathSpec<T>>,
}

fn complexify<T: Scalar>(m: &DMatrix<T>) -> CMatrix<T> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// Superoperator of `rho -> X rho Y` for column-major vectorization:
/// `vec(X rho Y) = (Y^T kron X) vec(rho)`.
fn sandwich<T: Scalar>(x: &CMatrix<T>, y: &CMatrix<T>) -> CMatrix<T> {
    y.transpose().kronecker(x)
}

fn dissipator_superop<T: Scalar>(a: &CMatrix<T>, rate: T) -> CMatrix<T> {
    let d = a.nrows();
    let id = CMatrix::<T>::identity(d, d);
    let a_dag = a.adjoint();
    let ada = &a_dag * a;
    let r = Complex::new(rate, T::zero());
    let half = Complex::new(lit::<T>(0.5), T::zero());
    (sandwich(a, &a_dag) - (sandwich(&ada, &id) + sandwich(&id, &ada)) * half) * r
}

/// Assemble the full generator for a model and a trio of baths.
pub fn build_liouvillian<T: Scalar>(
    model: &SystemModel<T>,
    baths: &PerBath<BathSpec<T>>,
) -> Result<Liouvillian<T>> {
    for (slot, spec) in baths.iter() {
        if spec.bath != slot {
            return Err(ChillerError::InvalidBath(format!(
                "bath spec labelled {} placed in slot {}",
                spec.bath, slot
            )));
        }
    }
    let eig = model.eigensystem();
    let d = model.dim;
    let channels = baths.map(|_, spec| bohr_channels(model, &eig, spec));

    let dissipators = channels.map(|_, chans| {
        let mut l = CMatrix::<T>::zeros(d * d, d * d);
        for ch in chans {
            let a = complexify(&ch.lowering);
            let a_dag = a.adjoint();
            if ch.rate_down > T::zero() {
                l += dissipator_superop(&a, ch.rate_down);
            }
            if ch.rate_up > T::zero() {
                l += dissipator_superop(&a_dag, ch.rate_up);
            }
        }
        l
    });

    let h = CMatrix::<T>::from_diagonal(&eig.energies.map(|e| Complex::new(e, T::zero())));
    let id = CMatrix::<T>::identity(d, d);
    let minus_i = Complex::new(T::zero(), -T::one());
    let hamiltonian_part = (sandwich(&h, &id) - sandwich(&id, &h)) * minus_i;

    let mut total = hamiltonian_part.clone();
    for (_, l) in dissipators.iter() {
        total += l;
    }

    Ok(Liouvillian {
        dim: d,
        energies: eig.energies,
        hamiltonian_part,
        dissipators,
        total,
        channels,
        baths: *baths,
    })
}

impl<T: Scalar> Liouvillian<T> {
    /// Column-major vectorization of a density operator.
    pub fn vectorize(&self, rho: &CMatrix<T>) -> CVector<T> {
        CVector::from_column_slice(rho.as_slice())
    }

    /// Inverse of [`Liouvillian::vectorize`].
    pub fn devectorize(&self, v: &CVector<T>) -> CMatrix<T> {
        CMatrix::from_column_slice(self.dim, self.dim, v.as_slice())
    }

    /// Apply one bath's dissipator: returns `L_alpha rho` as a matrix.
    pub fn apply_dissipator(&self, bath: Bath, rho: &CMatrix<T>) -> CMatrix<T> {
        self.devectorize(&(self.dissipators.get(bath) * self.vectorize(rho)))
    }

    /// Apply the full generator.
    pub fn apply_total(&self, rho: &CMatrix<T>) -> CMatrix<T> {
        self.devectorize(&(&self.total * self.vectorize(rho)))
    }

    /// Gibbs state `exp(-H/temp)/Z` in the energy basis.
    pub fn gibbs(&self, temperature: T) -> CMatrix<T> {
        let e0 = self.energies[0];
        let mut z = T::zero();
        let mut diag = DVector::zeros(self.dim);
        for i in 0..self.dim {
            let w = (-(self.energies[i] - e0) / temperature).exp();
            diag[i] = w;
            z += w;
        }
        CMatrix::from_diagonal(&diag.map(|x| Complex::new(x / z, T::zero())))
    }

    /// Classical generator over eigenstate populations: entry `(i, j)` is the
    /// `j -> i` transition rate, diagonal entries minus the exit rates. This
    /// is the population sector of the secular master equation.
    pub fn rate_matrix(&self) -> DMatrix<T> {
        let d = self.dim;
        let mut k = DMatrix::zeros(d, d);
        for (_, chans) in self.channels.iter() {
            for ch in chans {
                for (low, up, amp) in ch.dyads() {
                    let a2 = amp * amp;
                    let down = ch.rate_down * a2;
                    let upr = ch.rate_up * a2;
                    k[(low, up)] += down;
                    k[(up, up)] -= down;
                    k[(up, low)] += upr;
                    k[(low, low)] -= upr;
                }
            }
        }
        k
    }

    /// CSV-ish channel table `(bath, omega, rate_down, rate_up)` for debugging.
    pub fn channel_table(&self) -> Vec<(Bath, T, T, T)> {
        let mut rows = Vec::new();
        for (bath, chans) in self.channels.iter() {
            for ch in chans {
                rows.push((bath, ch.omega, ch.rate_down, ch.rate_up));
            }
        }
        rows
    }
}
