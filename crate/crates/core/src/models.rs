//! Device Hamiltonians, bath-contact operators and their eigendecompositions.
//!
//! Six model families are supported, all with real symmetric Hamiltonians.
//! Construction-basis ordering is fixed per family so that serialized states
//! are unambiguous:
//!
//! * three-level: `{|1>, |2>, |3>}`,
//! * four-level family: `{|a>, |b>, |c>, |d>}`,
//! * three-qubit: lexicographic `|n_w n_h n_c>` (index `4 n_w + 2 n_h + n_c`).
//!
//! Units: `hbar = k_B = 1`; every energy is a frequency.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ChillerError, Result};
use crate::scalar::{lit, Scalar};

/// Reservoir tag: work (hottest), hot, cold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Bath {
    #[serde(rename = "w")]
    Work,
    #[serde(rename = "h")]
    Hot,
    #[serde(rename = "c")]
    Cold,
}

impl Bath {
    pub const ALL: [Bath; 3] = [Bath::Work, Bath::Hot, Bath::Cold];

    pub fn label(self) -> &'static str {
        match self {
            Bath::Work => "w",
            Bath::Hot => "h",
            Bath::Cold => "c",
        }
    }
}

impl std::fmt::Display for Bath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// One value per reservoir, iterable in the fixed order `w, h, c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerBath<V> {
    pub work: V,
    pub hot: V,
    pub cold: V,
}

impl<V> PerBath<V> {
    pub fn new(work: V, hot: V, cold: V) -> Self {
        Self { work, hot, cold }
    }

    pub fn get(&self, bath: Bath) -> &V {
        match bath {
            Bath::Work => &self.work,
            Bath::Hot => &self.hot,
            Bath::Cold => &self.cold,
        }
    }

    pub fn get_mut(&mut self, bath: Bath) -> &mut V {
        match bath {
            Bath::Work => &mut self.work,
            Bath::Hot => &mut self.hot,
            Bath::Cold => &mut self.cold,
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Bath, &V) -> U) -> PerBath<U> {
        PerBath {
            work: f(Bath::Work, &self.work),
            hot: f(Bath::Hot, &self.hot),
            cold: f(Bath::Cold, &self.cold),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Bath, &V)> {
        [
            (Bath::Work, &self.work),
            (Bath::Hot, &self.hot),
            (Bath::Cold, &self.cold),
        ]
        .into_iter()
    }
}

impl<V: Clone> PerBath<V> {
    pub fn splat(v: V) -> Self {
        Self {
            work: v.clone(),
            hot: v.clone(),
            cold: v,
        }
    }
}

/// Spectral transmission profile applied multiplicatively to both the
/// emission and absorption rate of a reservoir, preserving detailed balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpectralFilter<T> {
    /// Unstructured reservoir.
    Flat,
    /// Debye-like sharp cutoff: transmission 1 for `|omega| <= omega_max`, 0 above.
    HighCutoff { omega_max: T },
    /// Symmetric Lorentzian transmission, normalized to 1 at the center.
    Lorentzian { center: T, width: T },
}

impl<T: Scalar> SpectralFilter<T> {
    /// Transmission `F(omega)`, even in `omega` and bounded in `[0, 1]`.
    pub fn transmission(&self, omega: T) -> T {
        let w = omega.abs();
        match *self {
            SpectralFilter::Flat => T::one(),
            SpectralFilter::HighCutoff { omega_max } => {
                if w <= omega_max {
                    T::one()
                } else {
                    T::zero()
                }
            }
            SpectralFilter::Lorentzian { center, width } => {
                let d = w - center;
                width * width / (d * d + width * width)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SpectralFilter::Flat => Ok(()),
            SpectralFilter::HighCutoff { omega_max } => {
                if omega_max > T::zero() {
                    Ok(())
                } else {
                    Err(ChillerError::InvalidBath("cutoff must be positive".into()))
                }
            }
            SpectralFilter::Lorentzian { center, width } => {
                if center > T::zero() && width > T::zero() {
                    Ok(())
                } else {
                    Err(ChillerError::InvalidBath(
                        "Lorentzian center and width must be positive".into(),
                    ))
                }
            }
        }
    }
}

/// Temperature, coupling scale and spectral filter of one reservoir.
///
/// `gamma` sets the dissipation time scale `tau_D ~ 1/gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathSpec<T> {
    pub bath: Bath,
    pub temperature: T,
    pub gamma: T,
    pub filter: SpectralFilter<T>,
}

impl<T: Scalar> BathSpec<T> {
    pub fn new(bath: Bath, temperature: T, gamma: T, filter: SpectralFilter<T>) -> Result<Self> {
        if !(temperature > T::zero()) {
            return Err(ChillerError::InvalidBath(format!(
                "temperature of bath {bath} must be positive"
            )));
        }
        if !(gamma > T::zero()) {
            return Err(ChillerError::InvalidBath(format!(
                "gamma of bath {bath} must be positive"
            )));
        }
        filter.validate()?;
        Ok(Self {
            bath,
            temperature,
            gamma,
            filter,
        })
    }

    /// All three baths flat-filtered with a common coupling scale.
    pub fn flat_trio(t_w: T, t_h: T, t_c: T, gamma: T) -> Result<PerBath<BathSpec<T>>> {
        Ok(PerBath::new(
            BathSpec::new(Bath::Work, t_w, gamma, SpectralFilter::Flat)?,
            BathSpec::new(Bath::Hot, t_h, gamma, SpectralFilter::Flat)?,
            BathSpec::new(Bath::Cold, t_c, gamma, SpectralFilter::Flat)?,
        ))
    }
}

/// Model family tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ThreeLevel,
    ThreeLevelShorted,
    FourLevel,
    FourLevelPrime,
    FourLevelDoublePrime,
    ThreeQubit,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::ThreeLevel => "three_level",
            ModelKind::ThreeLevelShorted => "three_level_shorted",
            ModelKind::FourLevel => "four_level",
            ModelKind::FourLevelPrime => "four_level_prime",
            ModelKind::FourLevelDoublePrime => "four_level_double_prime",
            ModelKind::ThreeQubit => "three_qubit",
        };
        f.write_str(s)
    }
}

/// Frequencies used at construction (`g` and `kappa` are zero when unused).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub omega_c: T,
    pub omega_h: T,
    pub g: T,
    pub kappa: T,
}

impl<T: Scalar> ModelParams<T> {
    /// Work-transition frequency `omega_w = omega_h - omega_c`.
    pub fn omega_w(&self) -> T {
        self.omega_h - self.omega_c
    }
}

/// Hamiltonian, bath-contact operators and labels for one device instance.
///
/// Values are immutable after construction and safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel<T: Scalar> {
    pub kind: ModelKind,
    pub dim: usize,
    /// Real symmetric Hamiltonian in the construction basis.
    pub hamiltonian: DMatrix<T>,
    /// Hermitian, traceless coupling operator `S_alpha` per bath.
    pub contacts: PerBath<DMatrix<T>>,
    pub params: ModelParams<T>,
    /// Soft-limit notices emitted at construction (e.g. `g` beyond the
    /// weak-coupling regime). Construction still succeeds.
    pub warnings: Vec<String>,
}

/// Exact eigendecomposition of a model Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigensystem<T: Scalar> {
    /// Eigenvalues in ascending order.
    pub energies: DVector<T>,
    /// Orthogonal matrix whose columns are the eigenvectors, in the same
    /// order; maps energy-basis coordinates to construction-basis ones.
    pub basis: DMatrix<T>,
}

impl<T: Scalar> Eigensystem<T> {
    /// `H` rebuilt as `Q diag(E) Q^T`.
    pub fn reconstruct(&self) -> DMatrix<T> {
        let diag = DMatrix::from_diagonal(&self.energies);
        &self.basis * diag * self.basis.transpose()
    }

    /// Smallest gap between consecutive (sorted) eigenvalues.
    pub fn min_gap(&self) -> T {
        let mut gap = T::max_value().unwrap_or_else(T::one);
        for i in 1..self.energies.len() {
            let d = self.energies[i] - self.energies[i - 1];
            if d < gap {
                gap = d;
            }
        }
        gap
    }
}

/// Eigendecomposition of a real symmetric Hamiltonian with ascending
/// eigenvalues and a deterministic sign convention per column.
pub fn eigendecompose<T: Scalar>(model: &SystemModel<T>) -> Eigensystem<T> {
    let eig = model.hamiltonian.clone().symmetric_eigen();
    let d = model.dim;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("non-finite eigenvalue")
    });
    let mut energies = DVector::zeros(d);
    let mut basis = DMatrix::zeros(d, d);
    for (col, &src) in order.iter().enumerate() {
        energies[col] = eig.eigenvalues[src];
        let mut v = eig.eigenvectors.column(src).clone_owned();
        // fix the overall sign: largest-magnitude component positive
        let mut imax = 0;
        for i in 1..d {
            if v[i].abs() > v[imax].abs() {
                imax = i;
            }
        }
        if v[imax] < T::zero() {
            v = -v;
        }
        basis.set_column(col, &v);
    }
    Eigensystem { energies, basis }
}

impl<T: Scalar> SystemModel<T> {
    pub fn eigensystem(&self) -> Eigensystem<T> {
        eigendecompose(self)
    }

    /// Work-transition frequency `omega_h - omega_c`.
    pub fn omega_w(&self) -> T {
        self.params.omega_w()
    }
}

fn sym_entry<T: Scalar>(m: &mut DMatrix<T>, i: usize, j: usize, v: T) {
    m[(i, j)] = v;
    m[(j, i)] = v;
}

fn dyad_pair<T: Scalar>(dim: usize, i: usize, j: usize) -> DMatrix<T> {
    let mut m = DMatrix::zeros(dim, dim);
    sym_entry(&mut m, i, j, T::one());
    m
}

fn check_frequencies<T: Scalar>(omega_c: T, omega_h: T) -> Result<()> {
    if !(omega_c > T::zero()) || !(omega_h > T::zero()) {
        return Err(ChillerError::InvalidModel(
            "frequencies must be positive".into(),
        ));
    }
    if !(omega_c < omega_h) {
        return Err(ChillerError::InvalidModel(format!(
            "omega_c must be below omega_h (got omega_c = {omega_c}, omega_h = {omega_h})"
        )));
    }
    Ok(())
}

fn check_coupling<T: Scalar>(g: T, omega_c: T, omega_h: T, warnings: &mut Vec<String>) -> Result<()> {
    if g < T::zero() {
        return Err(ChillerError::InvalidModel("g must be nonnegative".into()));
    }
    if g >= omega_c {
        return Err(ChillerError::InvalidModel(format!(
            "g = {g} >= omega_c = {omega_c}: eigenvalue ordering breaks"
        )));
    }
    if g > omega_h / lit(10.0) {
        warnings.push(format!(
            "g = {g} exceeds omega_h/10; the weak-coupling assumption is strained"
        ));
    }
    Ok(())
}

/// Three-level chiller: `H = omega_c |2><2| + omega_h |3><3|`, with the
/// cold bath on `1<->2`, the hot bath on `1<->3` and the work bath on `2<->3`.
pub fn build_three_level<T: Scalar>(omega_c: T, omega_h: T) -> Result<SystemModel<T>> {
    check_frequencies(omega_c, omega_h)?;
    let mut h = DMatrix::zeros(3, 3);
    h[(1, 1)] = omega_c;
    h[(2, 2)] = omega_h;
    Ok(SystemModel {
        kind: ModelKind::ThreeLevel,
        dim: 3,
        hamiltonian: h,
        contacts: PerBath::new(dyad_pair(3, 1, 2), dyad_pair(3, 0, 2), dyad_pair(3, 0, 1)),
        params: ModelParams {
            omega_c,
            omega_h,
            g: T::zero(),
            kappa: T::zero(),
        },
        warnings: Vec::new(),
    })
}

/// Three-level chiller with a thermal short circuit: the cold bath contact
/// additionally addresses the work transition, scaled by `kappa` in `[0, 1]`.
pub fn build_three_level_shorted<T: Scalar>(
    omega_c: T,
    omega_h: T,
    kappa: T,
) -> Result<SystemModel<T>> {
    if kappa < T::zero() || kappa > T::one() {
        return Err(ChillerError::InvalidModel(format!(
            "kappa = {kappa} outside [0, 1]"
        )));
    }
    let mut model = build_three_level(omega_c, omega_h)?;
    sym_entry(model.contacts.get_mut(Bath::Cold), 1, 2, kappa);
    model.kind = ModelKind::ThreeLevelShorted;
    model.params.kappa = kappa;
    Ok(model)
}

/// Four-level chiller: two detuned three-level stages sharing the hot
/// transition.
///
/// `H = omega_c (|b><b| + |c><c|) + omega_h |d><d| + g (|b><c| + h.c.)`,
/// with the cold bath on `a<->b`, the hot bath on `a<->d` and the work bath
/// on `c<->d`. Eigenvalues are exactly `{0, omega_c - g, omega_c + g, omega_h}`.
pub fn build_four_level<T: Scalar>(omega_c: T, omega_h: T, g: T) -> Result<SystemModel<T>> {
    check_frequencies(omega_c, omega_h)?;
    let mut warnings = Vec::new();
    check_coupling(g, omega_c, omega_h, &mut warnings)?;
    let mut h = DMatrix::zeros(4, 4);
    h[(1, 1)] = omega_c;
    h[(2, 2)] = omega_c;
    h[(3, 3)] = omega_h;
    sym_entry(&mut h, 1, 2, g);
    Ok(SystemModel {
        kind: ModelKind::FourLevel,
        dim: 4,
        hamiltonian: h,
        contacts: PerBath::new(dyad_pair(4, 2, 3), dyad_pair(4, 0, 3), dyad_pair(4, 0, 1)),
        params: ModelParams {
            omega_c,
            omega_h,
            g,
            kappa: T::zero(),
        },
        warnings,
    })
}

/// First variation of the four-level chiller; the detuned pair sits on the
/// hot and work contacts, so the parasitic flow runs from the work bath into
/// the hot bath.
///
/// `H' = omega_c |b><b| + omega_h (|c><c| + |d><d|) + g (|c><d| + h.c.)`,
/// cold on `a<->b`, hot on `a<->d`, work on `b<->c`.
pub fn build_four_level_prime<T: Scalar>(omega_c: T, omega_h: T, g: T) -> Result<SystemModel<T>> {
    check_frequencies(omega_c, omega_h)?;
    let mut warnings = Vec::new();
    check_coupling(g, omega_c, omega_h, &mut warnings)?;
    let mut h = DMatrix::zeros(4, 4);
    h[(1, 1)] = omega_c;
    h[(2, 2)] = omega_h;
    h[(3, 3)] = omega_h;
    sym_entry(&mut h, 2, 3, g);
    Ok(SystemModel {
        kind: ModelKind::FourLevelPrime,
        dim: 4,
        hamiltonian: h,
        contacts: PerBath::new(dyad_pair(4, 1, 2), dyad_pair(4, 0, 3), dyad_pair(4, 0, 1)),
        params: ModelParams {
            omega_c,
            omega_h,
            g,
            kappa: T::zero(),
        },
        warnings,
    })
}

/// Second variation; the detuned pair sits on the hot and cold contacts, so
/// heat leaks from the hot bath directly into the cold bath.
///
/// `H'' = omega_c |c><c| + omega_h |d><d| + g (|a><b| + h.c.)`,
/// cold on `b<->c`, hot on `a<->d`, work on `c<->d`.
pub fn build_four_level_double_prime<T: Scalar>(
    omega_c: T,
    omega_h: T,
    g: T,
) -> Result<SystemModel<T>> {
    check_frequencies(omega_c, omega_h)?;
    let mut warnings = Vec::new();
    check_coupling(g, omega_c, omega_h, &mut warnings)?;
    let mut h = DMatrix::zeros(4, 4);
    h[(2, 2)] = omega_c;
    h[(3, 3)] = omega_h;
    sym_entry(&mut h, 0, 1, g);
    Ok(SystemModel {
        kind: ModelKind::FourLevelDoublePrime,
        dim: 4,
        hamiltonian: h,
        contacts: PerBath::new(dyad_pair(4, 2, 3), dyad_pair(4, 0, 3), dyad_pair(4, 1, 2)),
        params: ModelParams {
            omega_c,
            omega_h,
            g,
            kappa: T::zero(),
        },
        warnings,
    })
}

/// Three-qubit chiller on `H_w (x) H_h (x) H_c`, with the work frequency
/// fixed by the resonance condition `omega_w = omega_h - omega_c` and a
/// three-body coupling of strength `g` between `|1_w 0_h 1_c>` and
/// `|0_w 1_h 0_c>`. Each bath couples through `sigma_x` on its own qubit.
pub fn build_three_qubit<T: Scalar>(omega_c: T, omega_h: T, g: T) -> Result<SystemModel<T>> {
    check_frequencies(omega_c, omega_h)?;
    if g < T::zero() {
        return Err(ChillerError::InvalidModel("g must be nonnegative".into()));
    }
    let omega_w = omega_h - omega_c;
    let dim = 8;
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        let nw = (n >> 2) & 1;
        let nh = (n >> 1) & 1;
        let nc = n & 1;
        let mut e = T::zero();
        if nw == 1 {
            e += omega_w;
        }
        if nh == 1 {
            e += omega_h;
        }
        if nc == 1 {
            e += omega_c;
        }
        h[(n, n)] = e;
    }
    // |1_w 0_h 1_c> = index 5, |0_w 1_h 0_c> = index 2
    sym_entry(&mut h, 5, 2, g);

    let mut warnings = Vec::new();
    // smallest nonzero Bohr gap of the uncoupled model
    let mut gaps: Vec<T> = Vec::new();
    for i in 0..dim {
        for j in (i + 1)..dim {
            let d = (h[(j, j)] - h[(i, i)]).abs();
            if d > T::default_epsilon().sqrt() {
                gaps.push(d);
            }
        }
    }
    let min_gap = gaps
        .into_iter()
        .fold(None::<T>, |acc, d| match acc {
            Some(m) if m <= d => Some(m),
            _ => Some(d),
        })
        .unwrap_or_else(T::zero);
    if g >= min_gap && g > T::zero() {
        warnings.push(format!(
            "g = {g} is at or above the smallest uncoupled Bohr gap {min_gap}; \
             the secular channel structure may merge"
        ));
    }
    if g > omega_h / lit(10.0) {
        warnings.push(format!(
            "g = {g} exceeds omega_h/10; the weak-coupling assumption is strained"
        ));
    }

    let sx = |q: usize| -> DMatrix<T> {
        let mut m = DMatrix::zeros(dim, dim);
        for n in 0..dim {
            let flipped = n ^ (1 << (2 - q)); // q = 0 (w), 1 (h), 2 (c)
            m[(n, flipped)] = T::one();
        }
        m
    };

    Ok(SystemModel {
        kind: ModelKind::ThreeQubit,
        dim,
        hamiltonian: h,
        contacts: PerBath::new(sx(0), sx(1), sx(2)),
        params: ModelParams {
            omega_c,
            omega_h,
            g,
            kappa: T::zero(),
        },
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn hermitian_traceless_contacts(m: &SystemModel<f64>) {
        for (_, s) in m.contacts.iter() {
            assert_relative_eq!((s - s.transpose()).norm(), 0.0, epsilon = 1e-14);
            assert_relative_eq!(s.trace(), 0.0, epsilon = 1e-14);
        }
        let h = &m.hamiltonian;
        assert_relative_eq!((h - h.transpose()).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn three_level_energies() {
        let m = build_three_level(2.0, 6.0).unwrap();
        let eig = m.eigensystem();
        assert_eq!(eig.energies.as_slice(), &[0.0, 2.0, 6.0]);
        hermitian_traceless_contacts(&m);
    }

    #[test]
    fn three_level_work_transition() {
        let m = build_three_level(2.625, 6.0).unwrap();
        assert_relative_eq!(m.omega_w(), 3.375, epsilon = 1e-15);
    }

    #[test]
    fn three_level_rejects_bad_frequencies() {
        assert!(build_three_level(6.0, 6.0).is_err());
        assert!(build_three_level(-1.0, 6.0).is_err());
        assert!(build_three_level::<f64>(2.0, 0.0).is_err());
    }

    #[test]
    fn four_level_closed_form_spectrum() {
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        let eig = m.eigensystem();
        let expect = [0.0, 1.9, 2.1, 6.0];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        hermitian_traceless_contacts(&m);

        // |2> = (|b> - |c>)/sqrt(2) up to a global sign
        let v = eig.basis.column(1);
        let s = 1.0 / 2.0_f64.sqrt();
        let same = (v[1] - s).abs() < 1e-12 && (v[2] + s).abs() < 1e-12;
        let flipped = (v[1] + s).abs() < 1e-12 && (v[2] - s).abs() < 1e-12;
        assert!(same || flipped, "eigenvector for omega_c - g: {v:?}");
        // |3> = (|b> + |c>)/sqrt(2)
        let v = eig.basis.column(2);
        assert_relative_eq!(v[1].abs(), s, epsilon = 1e-12);
        assert_relative_eq!(v[2].abs(), s, epsilon = 1e-12);
        assert_relative_eq!(v[1], v[2], epsilon = 1e-12);
    }

    #[test]
    fn four_level_degenerate_limit() {
        let m = build_four_level(2.0, 6.0, 0.0).unwrap();
        let eig = m.eigensystem();
        let expect = [0.0, 2.0, 2.0, 6.0];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn four_level_rejects_large_g() {
        assert!(build_four_level(2.0, 6.0, 2.0).is_err());
        assert!(build_four_level(2.0, 6.0, 2.5).is_err());
        assert!(build_four_level(2.0, 6.0, -0.1).is_err());
    }

    #[test]
    fn four_level_warns_on_strained_coupling() {
        let m = build_four_level(2.0, 6.0, 0.9).unwrap();
        assert!(!m.warnings.is_empty());
        let m = build_four_level(2.0, 6.0, 0.1).unwrap();
        assert!(m.warnings.is_empty());
    }

    #[test]
    fn prime_spectrum() {
        let m = build_four_level_prime(2.0, 6.0, 0.1).unwrap();
        let eig = m.eigensystem();
        let expect = [0.0, 2.0, 5.9, 6.1];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        let m0 = build_four_level_prime(2.0, 6.0, 0.0).unwrap();
        let e0 = m0.eigensystem().energies;
        for (e, x) in e0.iter().zip([0.0, 2.0, 6.0, 6.0]) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        hermitian_traceless_contacts(&m);
    }

    #[test]
    fn double_prime_spectrum() {
        let m = build_four_level_double_prime(2.0, 6.0, 0.1).unwrap();
        let eig = m.eigensystem();
        let expect = [-0.1, 0.1, 2.0, 6.0];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        let m0 = build_four_level_double_prime(2.0, 6.0, 0.0).unwrap();
        let e0 = m0.eigensystem().energies;
        for (e, x) in e0.iter().zip([0.0, 0.0, 2.0, 6.0]) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        hermitian_traceless_contacts(&m);
    }

    #[test]
    fn shorted_matches_plain_at_zero_kappa() {
        let a = build_three_level_shorted(2.0, 6.0, 0.0).unwrap();
        let b = build_three_level(2.0, 6.0).unwrap();
        assert_eq!(a.hamiltonian, b.hamiltonian);
        assert_eq!(a.contacts.cold, b.contacts.cold);
        assert!(build_three_level_shorted(2.0, 6.0, 1.5).is_err());
        assert!(build_three_level_shorted(2.0, 6.0, -0.1).is_err());
    }

    #[test]
    fn three_qubit_split_pair() {
        let m = build_three_qubit(2.0, 6.0, 0.1).unwrap();
        let eig = m.eigensystem();
        let expect = [0.0, 2.0, 4.0, 5.9, 6.1, 8.0, 10.0, 12.0];
        for (e, x) in eig.energies.iter().zip(expect) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
        hermitian_traceless_contacts(&m);
        assert!(m.warnings.is_empty());
        // a coupling at or above the smallest Bohr gap warns but builds
        let m = build_three_qubit(2.0, 6.0, 2.5).unwrap();
        assert!(!m.warnings.is_empty());
    }

    #[test]
    fn three_qubit_product_limit() {
        // g = 0: all eight energies are sums over {0, omega_w} x {0, omega_h} x {0, omega_c}
        let m = build_three_qubit(2.0, 6.0, 0.0).unwrap();
        let eig = m.eigensystem();
        let mut brute: Vec<f64> = (0..8)
            .map(|n| {
                let nw = ((n >> 2) & 1) as f64;
                let nh = ((n >> 1) & 1) as f64;
                let nc = (n & 1) as f64;
                nw * 4.0 + nh * 6.0 + nc * 2.0
            })
            .collect();
        brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (e, x) in eig.energies.iter().zip(brute) {
            assert_relative_eq!(*e, x, epsilon = 1e-12);
        }
    }

    #[test]
    fn reconstruction_round_trip() {
        for m in [
            build_three_level(2.0, 6.0).unwrap(),
            build_four_level(2.0, 6.0, 0.1).unwrap(),
            build_four_level_prime(2.0, 6.0, 0.3).unwrap(),
            build_four_level_double_prime(2.0, 6.0, 0.5).unwrap(),
            build_three_qubit(2.0, 6.0, 0.1).unwrap(),
            build_three_level_shorted(2.0, 6.0, 0.5).unwrap(),
        ] {
            let eig = m.eigensystem();
            let back = eig.reconstruct();
            let scale = m.hamiltonian.norm();
            assert!(
                (&back - &m.hamiltonian).norm() <= 1e-12 * scale,
                "reconstruction failed for {:?}",
                m.kind
            );
            // basis orthogonality
            let q = &eig.basis;
            let id = DMatrix::<f64>::identity(m.dim, m.dim);
            assert!((q.transpose() * q - id).norm() < 1e-12);
        }
    }

    #[test]
    fn filter_transmission_bounds() {
        let filters: Vec<SpectralFilter<f64>> = vec![
            SpectralFilter::Flat,
            SpectralFilter::HighCutoff { omega_max: 3.375 },
            SpectralFilter::Lorentzian {
                center: 3.4,
                width: 0.05,
            },
        ];
        for f in filters {
            for i in 0..200 {
                let w = -10.0 + 0.1 * i as f64;
                let t = f.transmission(w);
                assert!((0.0..=1.0).contains(&t));
                assert_relative_eq!(t, f.transmission(-w), epsilon = 1e-15);
            }
        }
        let hc = SpectralFilter::HighCutoff { omega_max: 3.375 };
        assert_eq!(hc.transmission(3.475), 0.0);
        assert_eq!(hc.transmission(3.375), 1.0);
        assert_eq!(hc.transmission(0.5), 1.0);
        let lor = SpectralFilter::Lorentzian {
            center: 3.4,
            width: 0.05,
        };
        assert_relative_eq!(lor.transmission(3.4), 1.0, epsilon = 1e-15);
    }
}
