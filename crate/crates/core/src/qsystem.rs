//! Multilevel systems, model presets and the Lindblad dissipator.
//!
//! Units throughout: hbar = 1, energies and frequencies in rad/fs, time in fs,
//! rates in 1/fs. Dipole elements are dimensionless couplings so that
//! `mu * E` carries rad/fs.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::scalar::{lit, Real};

/// A multilevel system: field-free energies, dipole couplings, relative
/// decoherence rates and the initial/target levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct LevelSystem<T> {
    pub n_levels: usize,
    pub energies: Vec<T>,
    pub dipole: Vec<Vec<T>>,
    /// `gamma_rates[j][n]` is the relative rate of the `n -> j` channel.
    pub gamma_rates: Vec<Vec<T>>,
    pub initial_state: usize,
    pub target_state: usize,
}

impl<T: Real> LevelSystem<T> {
    pub fn new(
        energies: Vec<T>,
        dipole: Vec<Vec<T>>,
        gamma_rates: Vec<Vec<T>>,
        initial_state: usize,
        target_state: usize,
    ) -> Result<Self> {
        let system = LevelSystem {
            n_levels: energies.len(),
            energies,
            dipole,
            gamma_rates,
            initial_state,
            target_state,
        };
        system.validate()?;
        Ok(system)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_levels;
        if n < 2 {
            return Err(Error::config("a system needs at least two levels"));
        }
        if self.energies.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.energies.len() });
        }
        if self.energies[0] != T::zero() {
            return Err(Error::config("energies[0] must be 0"));
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::config("energies must be finite"));
        }
        check_square(&self.dipole, n, "dipole")?;
        check_square(&self.gamma_rates, n, "gamma_rates")?;
        for j in 0..n {
            if self.gamma_rates[j][j] != T::zero() {
                return Err(Error::config(format!("gamma_rates[{j}][{j}] must be 0")));
            }
            for k in 0..n {
                if self.dipole[j][k] != self.dipole[k][j] {
                    return Err(Error::config(format!("dipole not symmetric at ({j}, {k})")));
                }
                let g = self.gamma_rates[j][k];
                if !(g >= T::zero()) || !g.is_finite() {
                    return Err(Error::config(format!("gamma_rates[{j}][{k}] must be >= 0")));
                }
            }
        }
        if self.initial_state >= n || self.target_state >= n {
            return Err(Error::IndexOutOfRange(format!(
                "initial/target state must lie in [0, {n})"
            )));
        }
        if self.initial_state == self.target_state {
            return Err(Error::config("initial_state and target_state must differ"));
        }
        Ok(())
    }

    /// omega_kj = e_j - e_k.
    pub fn transition_frequency(&self, k: usize, j: usize) -> T {
        self.energies[j] - self.energies[k]
    }

    /// Dipole-allowed pairs `(j, k, mu_jk)` with `j < k`, row-major order.
    pub fn couplings(&self) -> Vec<(usize, usize, T)> {
        let n = self.n_levels;
        let mut out = Vec::new();
        for j in 0..n {
            for k in j + 1..n {
                let mu = self.dipole[j][k];
                if mu != T::zero() {
                    out.push((j, k, mu));
                }
            }
        }
        out
    }

    /// Resonant carrier frequencies |e_k - e_j| of the dipole-allowed pairs.
    pub fn carriers(&self) -> Vec<T> {
        self.couplings()
            .into_iter()
            .map(|(j, k, _)| self.transition_frequency(j, k).abs())
            .collect()
    }

    pub fn dipole_matrix(&self) -> CMat<T> {
        let n = self.n_levels;
        Array2::from_shape_fn((n, n), |(i, j)| Complex::new(self.dipole[i][j], T::zero()))
    }

    pub fn hamiltonian(&self) -> CMat<T> {
        let mut h = linalg::zeros(self.n_levels);
        for (i, e) in self.energies.iter().enumerate() {
            h[(i, i)] = Complex::new(*e, T::zero());
        }
        h
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse { what: "system".into(), message: e.to_string() })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let sys: Self = toml::from_str(s)
            .map_err(|e| Error::Parse { what: "system".into(), message: e.to_string() })?;
        sys.validate()?;
        Ok(sys)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }
}

fn check_square<T>(m: &[Vec<T>], n: usize, what: &str) -> Result<()> {
    if m.len() != n {
        return Err(Error::config(format!("{what} must have {n} rows, found {}", m.len())));
    }
    for row in m {
        if row.len() != n {
            return Err(Error::config(format!("{what} rows must have {n} entries")));
        }
    }
    Ok(())
}

/// The four built-in model systems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    M1,
    M2,
    M3,
    M4,
}

impl Model {
    pub const ALL: [Model; 4] = [Model::M1, Model::M2, Model::M3, Model::M4];

    /// Levels belonging only to the right-hand path of the two-path model
    /// (1', 2', 3').
    pub fn right_path_levels(self) -> &'static [usize] {
        match self {
            Model::M4 => &[4, 5, 6],
            _ => &[],
        }
    }

    pub fn is_two_path(self) -> bool {
        self == Model::M4
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Model::M1 => "M1",
            Model::M2 => "M2",
            Model::M3 => "M3",
            Model::M4 => "M4",
        };
        f.write_str(s)
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "M1" | "1" => Ok(Model::M1),
            "M2" | "2" => Ok(Model::M2),
            "M3" | "3" => Ok(Model::M3),
            "M4" | "4" => Ok(Model::M4),
            other => Err(Error::config(format!("unknown model id '{other}'"))),
        }
    }
}

const LADDER_ENERGIES: [f64; 5] = [0.0, 1.511, 2.692, 3.453, 4.006];
const LADDER_DIPOLES: [f64; 4] = [0.5855, 0.7079, 0.8352, 0.9281];
const M1_RATES: [f64; 4] = [0.0895, 0.1942, 0.1209, 0.2344];
const M2_RATES: [f64; 4] = [0.03495, 0.1242, 0.3909, 0.6344];
const M3_TWO_QUANTA: [(usize, usize, f64, f64); 3] =
    [(0, 2, -0.1079, 0.01099), (1, 3, -0.1823, 0.1087), (2, 4, -0.2786, 0.1346)];

// Two-path model, levels ordered {0, 1, 2, 3, 1', 2', 3', 4}.
const M4_ENERGIES: [f64; 8] = [0.0, 1.511, 2.692, 3.453, 2.513, 3.859, 4.204, 4.006];
const M4_LEFT: [(usize, usize, f64, f64); 4] =
    [(0, 1, 0.5855, 0.0895), (1, 2, 0.7079, 0.1942), (2, 3, 0.8352, 0.1209), (3, 7, 0.9281, 0.2344)];
const M4_RIGHT: [(usize, usize, f64, f64); 4] =
    [(0, 4, 0.6525, 0.1164), (4, 5, 0.7848, 0.0885), (5, 6, 0.9023, 0.1557), (6, 7, 1.0322, 0.1280)];

fn symmetric_set<T: Real>(m: &mut [Vec<T>], a: usize, b: usize, v: f64) {
    m[a][b] = lit(v);
    m[b][a] = lit(v);
}

/// (lower level, upper level, dipole, relative rate)
type Edge = (usize, usize, f64, f64);

/// Builds one of the preset systems.
pub fn build_model<T: Real>(id: Model) -> LevelSystem<T> {
    let (energies, edges): (Vec<f64>, Vec<Edge>) = match id {
        Model::M1 | Model::M2 | Model::M3 => {
            let rates = if id == Model::M2 { M2_RATES } else { M1_RATES };
            let mut edges: Vec<_> = (0..4)
                .map(|k| (k, k + 1, LADDER_DIPOLES[k], rates[k]))
                .collect();
            if id == Model::M3 {
                edges.extend_from_slice(&M3_TWO_QUANTA);
            }
            (LADDER_ENERGIES.to_vec(), edges)
        }
        Model::M4 => (
            M4_ENERGIES.to_vec(),
            M4_LEFT.iter().chain(M4_RIGHT.iter()).copied().collect(),
        ),
    };
    let n = energies.len();
    let mut dipole = vec![vec![T::zero(); n]; n];
    let mut gamma = vec![vec![T::zero(); n]; n];
    for (a, b, mu, g) in edges {
        symmetric_set(&mut dipole, a, b, mu);
        symmetric_set(&mut gamma, a, b, g);
    }
    LevelSystem::new(energies.into_iter().map(lit).collect(), dipole, gamma, 0, n - 1)
        .expect("preset systems are valid")
}

/// Effective decoherence rates `R = gamma * Gamma` (possibly with a
/// different strength on different channel groups).
#[derive(Clone, Debug, PartialEq)]
pub struct Decoherence<T> {
    n: usize,
    /// Row-major, `rates[j * n + k]` is the rate of the `k -> j` channel.
    rates: Vec<T>,
}

impl<T: Real> Decoherence<T> {
    pub fn none(n: usize) -> Self {
        Decoherence { n, rates: vec![T::zero(); n * n] }
    }

    /// `gamma * Gamma` for a single global strength.
    pub fn uniform(system: &LevelSystem<T>, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero()) {
            return Err(Error::config("decoherence strength must be >= 0"));
        }
        let n = system.n_levels;
        let mut rates = vec![T::zero(); n * n];
        for j in 0..n {
            for k in 0..n {
                rates[j * n + k] = gamma * system.gamma_rates[j][k];
            }
        }
        Ok(Decoherence { n, rates })
    }

    /// Separate strengths for the two paths of a two-path system; a channel is
    /// on the right path when either endpoint is in `right_levels`.
    pub fn split(
        system: &LevelSystem<T>,
        right_levels: &[usize],
        gamma_left: T,
        gamma_right: T,
    ) -> Result<Self> {
        if !(gamma_left >= T::zero()) || !(gamma_right >= T::zero()) {
            return Err(Error::config("decoherence strengths must be >= 0"));
        }
        let n = system.n_levels;
        if let Some(&bad) = right_levels.iter().find(|&&l| l >= n) {
            return Err(Error::IndexOutOfRange(format!("right-path level {bad}")));
        }
        let mut rates = vec![T::zero(); n * n];
        for j in 0..n {
            for k in 0..n {
                let right = right_levels.contains(&j) || right_levels.contains(&k);
                let g = if right { gamma_right } else { gamma_left };
                rates[j * n + k] = g * system.gamma_rates[j][k];
            }
        }
        Ok(Decoherence { n, rates })
    }

    /// Directly from an effective rate matrix.
    pub fn from_rates(rates: &[Vec<T>]) -> Result<Self> {
        let n = rates.len();
        check_square(rates, n, "rates")?;
        let flat: Vec<T> = rates.iter().flatten().copied().collect();
        if flat.iter().any(|r| !(*r >= T::zero())) {
            return Err(Error::config("rates must be >= 0"));
        }
        Ok(Decoherence { n, rates: flat })
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn rate(&self, to: usize, from: usize) -> T {
        self.rates[to * self.n + from]
    }

    pub fn is_zero(&self) -> bool {
        self.rates.iter().all(|r| r.is_zero())
    }

    /// Total outflow rate of level `l`, sum_n R_nl.
    pub fn loss(&self, l: usize) -> T {
        (0..self.n).map(|m| self.rate(m, l)).sum()
    }

    /// The dissipator applied to `rho`.
    pub fn apply(&self, rho: &CMat<T>) -> Result<CMat<T>> {
        let n = self.n;
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
        }
        let half: T = lit(0.5);
        let loss: Vec<T> = (0..n).map(|l| self.loss(l)).collect();
        let mut out = linalg::zeros(n);
        for l in 0..n {
            for lp in 0..n {
                let mut v = rho[(l, lp)] * (-(loss[l] + loss[lp]) * half);
                if l == lp {
                    for m in 0..n {
                        v += rho[(m, m)] * self.rate(l, m);
                    }
                }
                out[(l, lp)] = v;
            }
        }
        Ok(out)
    }
}

/// `gamma * F{rho}` for the system's relative rates.
pub fn dissipator_apply<T: Real>(system: &LevelSystem<T>, gamma: T, rho: &CMat<T>) -> Result<CMat<T>> {
    Decoherence::uniform(system, gamma)?.apply(rho)
}

/// Explicit matrix of `gamma * F` acting on vectorised density matrices.
pub fn dissipator_superoperator<T: Real>(system: &LevelSystem<T>, gamma: T) -> Result<Superoperator<T>> {
    Ok(Superoperator::dissipator(&Decoherence::uniform(system, gamma)?))
}

/// Linear map on N x N matrices stored as an N^2 x N^2 matrix over
/// row-major vectorisation `(l, l') -> l * N + l'`.
#[derive(Clone, Debug, PartialEq)]
pub struct Superoperator<T> {
    n: usize,
    pub matrix: CMat<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn zero(n: usize) -> Self {
        Superoperator { n, matrix: linalg::zeros(n * n) }
    }

    pub fn from_matrix(n: usize, matrix: CMat<T>) -> Result<Self> {
        if matrix.nrows() != n * n || matrix.ncols() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: matrix.nrows() });
        }
        Ok(Superoperator { n, matrix })
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn index(&self, l: usize, lp: usize) -> usize {
        l * self.n + lp
    }

    pub fn dissipator(dec: &Decoherence<T>) -> Self {
        let n = dec.n_levels();
        let mut s = Self::zero(n);
        let half: T = lit(0.5);
        for l in 0..n {
            for lp in 0..n {
                let row = l * n + lp;
                s.matrix[(row, row)] = Complex::new(-(dec.loss(l) + dec.loss(lp)) * half, T::zero());
                if l == lp {
                    for m in 0..n {
                        s.matrix[(row, m * n + m)] += Complex::new(dec.rate(l, m), T::zero());
                    }
                }
            }
        }
        s
    }

    /// rho -> X rho - rho X.
    pub fn commutator(x: &CMat<T>) -> Self {
        let n = x.nrows();
        let mut s = Self::zero(n);
        for l in 0..n {
            for lp in 0..n {
                let row = l * n + lp;
                for m in 0..n {
                    s.matrix[(row, m * n + lp)] += x[(l, m)];
                    s.matrix[(row, l * n + m)] -= x[(m, lp)];
                }
            }
        }
        s
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Superoperator { n: self.n, matrix: self.matrix.mapv(|z| z * c) }
    }

    pub fn plus(&self, other: &Self) -> Self {
        Superoperator { n: self.n, matrix: &self.matrix + &other.matrix }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Superoperator { n: self.n, matrix: self.matrix.dot(&other.matrix) }
    }

    pub fn power(&self, k: usize) -> Self {
        let mut out = Superoperator { n: self.n, matrix: linalg::identity(self.n * self.n) };
        for _ in 0..k {
            out = out.compose(self);
        }
        out
    }

    pub fn exp(&self, t: T) -> Self {
        Superoperator { n: self.n, matrix: linalg::expm(&self.matrix.mapv(|z| z * t)) }
    }

    /// Matrix element <<a a'| S |b b'>>.
    pub fn element(&self, a: (usize, usize), b: (usize, usize)) -> Complex<T> {
        self.matrix[(self.index(a.0, a.1), self.index(b.0, b.1))]
    }

    pub fn apply(&self, rho: &CMat<T>) -> Result<CMat<T>> {
        if rho.nrows() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, found: rho.nrows() });
        }
        Ok(unvectorize(&self.matrix.dot(&vectorize(rho)), self.n))
    }
}

pub fn vectorize<T: Real>(m: &CMat<T>) -> ndarray::Array1<Complex<T>> {
    m.iter().copied().collect()
}

pub fn unvectorize<T: Real>(v: &ndarray::Array1<Complex<T>>, n: usize) -> CMat<T> {
    Array2::from_shape_fn((n, n), |(i, j)| v[i * n + j])
}
