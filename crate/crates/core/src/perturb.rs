//! Weak-field, weak-decoherence theory for ladders: first-order Magnus
//! coupling, the RWA Hamiltonian, perturbative yields and their
//! superoperator-exponential oracle.
//!
//! A ladder has levels 0..=N and rungs 1..=N; rung k joins levels k-1 and k.
//! Per-rung vectors are stored with rung k at index k-1.

use std::io::Write;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ControlField, DEFAULT_HORIZON, DEFAULT_WIDTH};
use crate::gaopt::CostParams;
use crate::linalg::{self, CMat};
use crate::lindblad::DensityMatrix;
use crate::qsystem::{Decoherence, LevelSystem, Superoperator};
use crate::scalar::{central_binomial, factorial, lit, Real};

/// Predicted yields above this are outside the perturbative regime.
pub const VALIDITY_LIMIT: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct LadderSpec<T> {
    /// mu_k, coupling levels k-1 and k.
    pub dipoles: Vec<T>,
    /// gamma_k, the symmetric relative rate between levels k-1 and k.
    pub rates: Vec<T>,
    /// omega_k = eps_k - eps_{k-1}.
    pub carriers: Vec<T>,
    pub amplitudes: Vec<T>,
    pub phases: Vec<T>,
}

impl<T: Real> LadderSpec<T> {
    pub fn new(dipoles: Vec<T>, rates: Vec<T>, carriers: Vec<T>, amplitudes: Vec<T>, phases: Vec<T>) -> Result<Self> {
        let l = LadderSpec { dipoles, rates, carriers, amplitudes, phases };
        l.validate()?;
        Ok(l)
    }

    /// Ladder view of a nearest-neighbour chain system with a field on its
    /// carriers. Fails if the system has couplings off the chain.
    pub fn from_system(system: &LevelSystem<T>, amplitudes: Vec<T>, phases: Vec<T>) -> Result<Self> {
        system.validate()?;
        let n = system.n_levels - 1;
        for (j, k, _) in system.couplings() {
            if k != j + 1 {
                return Err(Error::config(format!("coupling {j}-{k} is not a ladder rung")));
            }
        }
        for j in 0..=n {
            for k in 0..=n {
                if j.abs_diff(k) != 1 && j != k && system.gamma_rates[j][k] != T::zero() {
                    return Err(Error::config(format!("rate {k}->{j} is not a ladder rung")));
                }
            }
        }
        let rung = |k: usize| (k - 1, k);
        Self::new(
            (1..=n).map(|k| system.dipole[rung(k).0][rung(k).1]).collect(),
            (1..=n).map(|k| system.gamma_rates[k][k - 1]).collect(),
            (1..=n).map(|k| system.energies[k] - system.energies[k - 1]).collect(),
            amplitudes,
            phases,
        )
    }

    pub fn n_rungs(&self) -> usize {
        self.dipoles.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dipoles.len();
        if n == 0 {
            return Err(Error::config("a ladder needs at least one rung"));
        }
        for (name, len) in [
            ("rates", self.rates.len()),
            ("carriers", self.carriers.len()),
            ("amplitudes", self.amplitudes.len()),
            ("phases", self.phases.len()),
        ] {
            if len != n {
                return Err(Error::config(format!("{name} has {len} entries for {n} rungs")));
            }
        }
        if self.rates.iter().any(|r| !(*r >= T::zero())) {
            return Err(Error::config("ladder rates must be >= 0"));
        }
        if self.amplitudes.iter().any(|a| !(*a >= T::zero())) {
            return Err(Error::config("ladder amplitudes must be >= 0"));
        }
        if self.carriers.iter().any(|w| !(*w > T::zero())) {
            return Err(Error::config("ladder carriers must be > 0"));
        }
        for i in 0..n {
            for j in 0..i {
                if self.carriers[i] == self.carriers[j] {
                    return Err(Error::config("ladder transitions must be nondegenerate"));
                }
            }
        }
        Ok(())
    }

    pub fn energies(&self) -> Vec<T> {
        let mut e = vec![T::zero()];
        for w in &self.carriers {
            e.push(*e.last().unwrap() + *w);
        }
        e
    }

    /// Chain system from level 0 to level N with symmetric rung rates.
    pub fn to_system(&self) -> Result<LevelSystem<T>> {
        let n = self.n_rungs() + 1;
        let mut dipole = vec![vec![T::zero(); n]; n];
        let mut rates = vec![vec![T::zero(); n]; n];
        for k in 1..n {
            dipole[k - 1][k] = self.dipoles[k - 1];
            dipole[k][k - 1] = self.dipoles[k - 1];
            rates[k - 1][k] = self.rates[k - 1];
            rates[k][k - 1] = self.rates[k - 1];
        }
        LevelSystem::new(self.energies(), dipole, rates, 0, n - 1)
    }

    /// Resonant field on the rung carriers with the default window.
    pub fn field(&self) -> Result<ControlField<T>> {
        ControlField::resonant(&self.carriers, &self.amplitudes, &self.phases)
    }

    pub fn with_amplitude(&self, rung: usize, amplitude: T) -> Result<Self> {
        let mut l = self.clone();
        *l.amplitudes
            .get_mut(rung.wrapping_sub(1))
            .ok_or_else(|| Error::IndexOutOfRange(format!("rung {rung}")))? = amplitude;
        l.validate()?;
        Ok(l)
    }

    pub fn with_rate(&self, rung: usize, rate: T) -> Result<Self> {
        let mut l = self.clone();
        *l.rates
            .get_mut(rung.wrapping_sub(1))
            .ok_or_else(|| Error::IndexOutOfRange(format!("rung {rung}")))? = rate;
        l.validate()?;
        Ok(l)
    }
}

/// Field scale lambda and decoherence scale gamma.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ScaledStrengths<T> {
    pub lambda: T,
    pub gamma: T,
}

impl<T: Real> ScaledStrengths<T> {
    pub fn new(lambda: T, gamma: T) -> Result<Self> {
        if !(lambda >= T::zero()) || !(gamma >= T::zero()) {
            return Err(Error::config("lambda and gamma must be >= 0"));
        }
        Ok(ScaledStrengths { lambda, gamma })
    }

    /// gamma = lambda^2.
    pub fn cooperative(lambda: T) -> Result<Self> {
        Self::new(lambda, lambda * lambda)
    }

    pub fn is_cooperative(&self) -> bool {
        self.gamma == self.lambda * self.lambda
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EffectiveCoupling<T> {
    pub w: CMat<T>,
    /// Omega_k = |W_{k,k-1}|, rung k at index k-1.
    pub omega: Vec<T>,
}

impl<T: Real> EffectiveCoupling<T> {
    pub fn from_matrix(w: CMat<T>) -> Result<Self> {
        let n = w.nrows();
        if n < 2 || w.ncols() != n {
            return Err(Error::config("coupling matrix must be square with at least two levels"));
        }
        let omega = (1..n).map(|k| w[(k, k - 1)].norm()).collect();
        Ok(EffectiveCoupling { w, omega })
    }

    /// First-order Magnus coupling, W_kj = mu_kj eps(w_kj) / T_f.
    pub fn from_magnus(ladder: &LadderSpec<T>, field: &ControlField<T>, t_f: T) -> Result<Self> {
        magnus_w(ladder, field, t_f)
    }

    /// RWA coupling, W = H_F T_e / T_f.
    pub fn from_rwa(ladder: &LadderSpec<T>, t_e: T, t_f: T) -> Result<Self> {
        let scale = Complex::new(t_e / t_f, T::zero());
        Self::from_matrix(rwa_hamiltonian(ladder)?.mapv(|z| z * scale))
    }

    pub fn n_rungs(&self) -> usize {
        self.omega.len()
    }

    /// T_mn = Omega_{m+1} ... Omega_n for m <= n.
    pub fn transition_element(&self, m: usize, n: usize) -> Result<T> {
        if m > n || n > self.n_rungs() {
            return Err(Error::IndexOutOfRange(format!("T_{m}{n} on {} rungs", self.n_rungs())));
        }
        Ok(self.omega[m..n].iter().copied().fold(T::one(), |p, o| p * o))
    }
}

pub fn magnus_w<T: Real>(ladder: &LadderSpec<T>, field: &ControlField<T>, t_f: T) -> Result<EffectiveCoupling<T>> {
    ladder.validate()?;
    if !(t_f > T::zero()) {
        return Err(Error::config("T_f must be > 0"));
    }
    let e = ladder.energies();
    let n = e.len();
    let mut w = linalg::zeros(n);
    for k in 1..n {
        let mu = ladder.dipoles[k - 1];
        // w_{k,k-1} = eps_{k-1} - eps_k
        let up = field.spectrum_at(e[k - 1] - e[k]) * (mu / t_f);
        w[(k, k - 1)] = up;
        w[(k - 1, k)] = up.conj();
    }
    EffectiveCoupling::from_matrix(w)
}

/// Real symmetric tridiagonal `(H_F)_{k,k-1} = mu_k A_k`.
pub fn rwa_hamiltonian<T: Real>(ladder: &LadderSpec<T>) -> Result<CMat<T>> {
    ladder.validate()?;
    let n = ladder.n_rungs() + 1;
    let mut h = linalg::zeros(n);
    for k in 1..n {
        let v = Complex::new(ladder.dipoles[k - 1] * ladder.amplitudes[k - 1], T::zero());
        h[(k, k - 1)] = v;
        h[(k - 1, k)] = v;
    }
    Ok(h)
}

/// lambda^{2N} T_f^{2N} T_0N^2 / (N!)^2.
pub fn field_only_yield<T: Real>(coupling: &EffectiveCoupling<T>, lambda: T, t_f: T) -> T {
    let n = coupling.n_rungs();
    let t0n = coupling.omega.iter().copied().fold(T::one(), |p, o| p * o);
    let nf = factorial::<T>(n);
    (lambda * t_f).powi(2 * n as i32) * t0n * t0n / (nf * nf)
}

/// gamma^N T_f^N prod(gamma_k) / N!.
pub fn decoherence_only_yield<T: Real>(ladder: &LadderSpec<T>, gamma: T, t_f: T) -> T {
    let n = ladder.n_rungs();
    let prod = ladder.rates.iter().copied().fold(T::one(), |p, r| p * r);
    (gamma * t_f).powi(n as i32) * prod / factorial::<T>(n)
}

/// Lowest-order target population for independent lambda and gamma.
///
/// Sums over every subset D of rungs crossed by a decoherent jump; the
/// remaining rungs form coherent blocks between them. Each block of L rungs
/// contributes C(2L, L) prod Omega_k^2, each decoherent rung its gamma_k, and
/// the whole path T_f^{2N-m}/(2N-m)! with m = |D|. No division by Omega.
pub fn mixed_yield<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    strengths: ScaledStrengths<T>,
    t_f: T,
) -> Result<T> {
    let n = ladder.n_rungs();
    if coupling.n_rungs() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coupling.n_rungs() });
    }
    if n > 30 {
        return Err(Error::config("path enumeration is limited to 30 rungs"));
    }
    let mut total = T::zero();
    for mask in 0u32..(1u32 << n) {
        let m = mask.count_ones() as usize;
        let mut weight = T::one();
        let mut block = T::one();
        let mut block_len = 0usize;
        for k in 0..n {
            if mask & (1 << k) != 0 {
                weight = weight * central_binomial::<T>(block_len) * block * ladder.rates[k];
                block = T::one();
                block_len = 0;
            } else {
                block = block * coupling.omega[k] * coupling.omega[k];
                block_len += 1;
            }
        }
        weight = weight * central_binomial::<T>(block_len) * block;
        let order = 2 * n - m;
        let scale = strengths.lambda.powi(2 * (n - m) as i32) * strengths.gamma.powi(m as i32);
        total += scale * weight * t_f.powi(order as i32) / factorial::<T>(order);
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PerturbativeYield<T> {
    pub value: T,
    /// False when the prediction exceeds the perturbative regime.
    pub within_validity: bool,
}

/// Cooperative regime, gamma = lambda^2.
pub fn combined_yield<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    lambda: T,
    t_f: T,
) -> Result<PerturbativeYield<T>> {
    let value = mixed_yield(ladder, coupling, ScaledStrengths::cooperative(lambda)?, t_f)?;
    Ok(PerturbativeYield { value, within_validity: value < lit(VALIDITY_LIMIT) })
}

/// Decoherence superoperator F with unit scale for the ladder's rung rates.
pub fn ladder_dissipator<T: Real>(ladder: &LadderSpec<T>) -> Result<Superoperator<T>> {
    let sys = ladder.to_system()?;
    Ok(Superoperator::dissipator(&Decoherence::uniform(&sys, T::one())?))
}

/// exp[(i lambda E + gamma F) T_f] applied to |0><0|.
pub fn superop_exponential_oracle<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    strengths: ScaledStrengths<T>,
    t_f: T,
) -> Result<DensityMatrix<T>> {
    let n = ladder.n_rungs() + 1;
    if coupling.w.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: coupling.w.nrows() });
    }
    let e = Superoperator::commutator(&coupling.w).scaled(Complex::new(T::zero(), strengths.lambda));
    let f = ladder_dissipator(ladder)?.scaled(Complex::new(strengths.gamma, T::zero()));
    let prop = e.plus(&f).exp(t_f);
    let rho0 = DensityMatrix::pure(n, 0);
    Ok(DensityMatrix::from_matrix_unchecked(prop.apply(rho0.matrix())?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Identity {
    /// <<n+m,n+m| (iE)^{2m} |nn>> = C(2m, m) T_{n,n+m}^2
    Field,
    /// <<n+m,n+m| F^m |nn>> = gamma_{n+1} ... gamma_{n+m}
    Decoherence,
}

/// Both sides of a Liouville-space transfer identity, the left one from
/// explicit superoperator powers.
pub fn liouville_identity_check<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    identity: Identity,
    n: usize,
    m: usize,
) -> Result<(Complex<T>, T)> {
    let rungs = ladder.n_rungs();
    if n + m > rungs {
        return Err(Error::IndexOutOfRange(format!("n + m = {} exceeds {rungs} rungs", n + m)));
    }
    match identity {
        Identity::Field => {
            let ie = Superoperator::commutator(&coupling.w).scaled(Complex::new(T::zero(), T::one()));
            let lhs = ie.power(2 * m).element((n + m, n + m), (n, n));
            let t = coupling.transition_element(n, n + m)?;
            Ok((lhs, central_binomial::<T>(m) * t * t))
        }
        Identity::Decoherence => {
            let lhs = ladder_dissipator(ladder)?.power(m).element((n + m, n + m), (n, n));
            let rhs = ladder.rates[n..n + m].iter().copied().fold(T::one(), |p, r| p * r);
            Ok((lhs, rhs))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Decomposition<T> {
    pub rung: usize,
    /// dO/d(A_j^2)
    pub f1: T,
    /// dO/d(gamma_j)
    pub f2: T,
    pub amplitude_squared: T,
    pub amplitude: T,
    /// O_T - alpha / (2 F1), the yield at an unclamped optimum.
    pub optimal_outcome: T,
    pub clamped: bool,
}

/// Yield of the RWA-coupled ladder at unit lambda and the given gamma scale.
pub fn rwa_yield<T: Real>(ladder: &LadderSpec<T>, gamma: T, t_e: T, t_f: T) -> Result<T> {
    let coupling = EffectiveCoupling::from_rwa(ladder, t_e, t_f)?;
    mixed_yield(ladder, &coupling, ScaledStrengths::new(T::one(), gamma)?, t_f)
}

/// Splits O = A_j^2 F1 + gamma_j F2 on rung `rung` (1-based) and returns the
/// amplitude that minimises J with everything else held fixed.
pub fn decompose_and_optimize<T: Real>(
    ladder: &LadderSpec<T>,
    gamma: T,
    rung: usize,
    params: &CostParams<T>,
    t_e: T,
    t_f: T,
) -> Result<Decomposition<T>> {
    params.validate()?;
    if rung == 0 || rung > ladder.n_rungs() {
        return Err(Error::IndexOutOfRange(format!("rung {rung} of {}", ladder.n_rungs())));
    }
    let at = |a2: T, g: T| -> Result<T> {
        let l = ladder.with_amplitude(rung, a2.sqrt())?.with_rate(rung, g)?;
        rwa_yield(&l, gamma, t_e, t_f)
    };
    let half: T = lit(0.5);
    // [1 1/2; 1/2 1] [F1 F2]^T = [O1 O2]^T
    let o1 = at(T::one(), half)?;
    let o2 = at(half, T::one())?;
    let det: T = lit(0.75);
    let f1 = (o1 - half * o2) / det;
    let f2 = (o2 - half * o1) / det;
    if f1.abs() <= T::epsilon() * lit(16.0) * (o1.abs() + o2.abs()) {
        return Err(Error::NoControlAuthority { rung });
    }
    let gj = ladder.rates[rung - 1];
    let optimal_outcome = params.target_yield - params.fluence_weight / (lit::<T>(2.0) * f1);
    let raw = (optimal_outcome - gj * f2) / f1;
    let clamped = raw < T::zero();
    let amplitude_squared = raw.max(T::zero());
    Ok(Decomposition {
        rung,
        f1,
        f2,
        amplitude_squared,
        amplitude: amplitude_squared.sqrt(),
        optimal_outcome,
        clamped,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SweepRow<T> {
    pub lambda: T,
    pub gamma: T,
    pub o_perturbative: T,
    pub o_oracle: T,
    pub rel_error: T,
}

/// Perturbative yield against the oracle for each lambda; gamma = lambda^2
/// when `cooperative`, else zero.
pub fn oracle_sweep<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    lambdas: &[T],
    cooperative: bool,
    t_f: T,
) -> Result<Vec<SweepRow<T>>> {
    let target = ladder.n_rungs();
    lambdas
        .iter()
        .map(|&lambda| {
            let s = if cooperative {
                ScaledStrengths::cooperative(lambda)?
            } else {
                ScaledStrengths::new(lambda, T::zero())?
            };
            let o_perturbative = mixed_yield(ladder, coupling, s, t_f)?;
            let o_oracle = superop_exponential_oracle(ladder, coupling, s, t_f)?.population(target);
            Ok(SweepRow {
                lambda,
                gamma: s.gamma,
                o_perturbative,
                o_oracle,
                rel_error: ((o_perturbative - o_oracle) / o_oracle).abs(),
            })
        })
        .collect()
}

/// The lambda at which the predicted yield equals `target` (geometric
/// bisection; the prediction is monotone in lambda).
pub fn lambda_for_yield<T: Real>(
    ladder: &LadderSpec<T>,
    coupling: &EffectiveCoupling<T>,
    target: T,
    cooperative: bool,
    t_f: T,
) -> Result<T> {
    let predict = |lambda: T| {
        let gamma = if cooperative { lambda * lambda } else { T::zero() };
        mixed_yield(ladder, coupling, ScaledStrengths::new(lambda, gamma)?, t_f)
    };
    let (mut lo, mut hi): (T, T) = (lit(1e-8), lit(1e3));
    if !(target > T::zero()) || predict(hi)? < target {
        return Err(Error::config("target yield is not reached for lambda <= 1e3"));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if predict(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

pub fn write_sweep_csv<T: Real, W: Write>(rows: &[SweepRow<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["lambda", "gamma", "O_perturbative", "O_oracle", "rel_error"])?;
    for r in rows {
        w.write_record([r.lambda, r.gamma, r.o_perturbative, r.o_oracle, r.rel_error].map(|x| format!("{x:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// T_f and T_e of the default pulse window.
pub fn default_durations<T: Real>() -> (T, T) {
    let f = ControlField::<T>::new(Vec::new(), lit(DEFAULT_HORIZON * 0.5), lit(DEFAULT_WIDTH), lit(DEFAULT_HORIZON))
        .expect("default window is valid");
    (lit(DEFAULT_HORIZON), f.effective_duration())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsystem::{build_model, Model};

    fn ladder2() -> LadderSpec<f64> {
        LadderSpec::new(vec![0.5855, 0.7079], vec![0.0895, 0.1942], vec![1.511, 1.181], vec![0.02, 0.03], vec![0.0, 0.0])
            .unwrap()
    }

    #[test]
    fn ladder_validation() {
        assert!(LadderSpec::new(vec![1.0], vec![-0.1], vec![1.0], vec![0.1], vec![0.0]).is_err());
        assert!(LadderSpec::new(vec![1.0, 1.0], vec![0.1, 0.1], vec![1.0, 1.0], vec![0.1, 0.1], vec![0.0, 0.0]).is_err());
        assert!(LadderSpec::new(vec![1.0, 1.0], vec![0.1], vec![1.0, 2.0], vec![0.1, 0.1], vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn lambda_for_a_target_yield() {
        let l = ladder2();
        let c = EffectiveCoupling::from_rwa(&l, 75.0, 200.0).unwrap();
        for coop in [false, true] {
            let lam = lambda_for_yield(&l, &c, 1e-4, coop, 200.0).unwrap();
            let g = if coop { lam * lam } else { 0.0 };
            let o = mixed_yield(&l, &c, ScaledStrengths::new(lam, g).unwrap(), 200.0).unwrap();
            assert!((o / 1e-4 - 1.0).abs() < 1e-9);
        }
        let dark = EffectiveCoupling::from_matrix(linalg::zeros(3)).unwrap();
        assert!(lambda_for_yield(&l, &dark, 1e-4, false, 200.0).is_err());
    }

    #[test]
    fn ladder_from_model_one() {
        let sys = build_model::<f64>(Model::M1);
        let l = LadderSpec::from_system(&sys, vec![0.0; 4], vec![0.0; 4]).unwrap();
        assert_eq!(l.dipoles, vec![0.5855, 0.7079, 0.8352, 0.9281]);
        assert_eq!(l.rates, vec![0.0895, 0.1942, 0.1209, 0.2344]);
        assert!((l.carriers[3] - 0.553).abs() < 1e-12);
        let back = l.to_system().unwrap();
        assert_eq!(back.gamma_rates, sys.gamma_rates);
        assert!(LadderSpec::from_system(&build_model::<f64>(Model::M3), vec![0.0; 4], vec![0.0; 4]).is_err());
    }

    #[test]
    fn strengths() {
        let s = ScaledStrengths::cooperative(0.1f64).unwrap();
        assert!(s.is_cooperative());
        assert!(!ScaledStrengths::new(0.1f64, 0.02).unwrap().is_cooperative());
        assert!(ScaledStrengths::new(-0.1f64, 0.0).is_err());
    }

    #[test]
    fn zero_field_coupling() {
        let l = LadderSpec { amplitudes: vec![0.0, 0.0], ..ladder2() };
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        assert_eq!(linalg::max_abs(&c.w), 0.0);
        assert_eq!(c.transition_element(0, 2).unwrap(), 0.0);
        assert_eq!(c.transition_element(1, 1).unwrap(), 1.0);
        assert!(c.transition_element(2, 1).is_err());
        assert_eq!(linalg::max_abs(&rwa_hamiltonian(&l).unwrap()), 0.0);
    }

    #[test]
    fn rwa_two_level() {
        let l = LadderSpec::new(vec![1.0], vec![0.0], vec![1.0], vec![0.1], vec![0.0]).unwrap();
        let h = rwa_hamiltonian(&l).unwrap();
        assert_eq!(h[(0, 1)].re, 0.1);
        assert_eq!(h[(1, 0)].re, 0.1);
    }

    #[test]
    fn magnus_w_is_hermitian() {
        let l = LadderSpec { phases: vec![0.4, 2.2], ..ladder2() };
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        assert!(linalg::hermiticity_residual(&c.w) < 1e-15);
    }

    #[test]
    fn oracle_identity_at_zero_strength() {
        let l = ladder2();
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        let rho = superop_exponential_oracle(&l, &c, ScaledStrengths::new(0.0, 0.0).unwrap(), 200.0).unwrap();
        assert!(linalg::max_abs_diff(rho.matrix(), DensityMatrix::pure(3, 0).matrix()) < 1e-15);
    }

    #[test]
    fn identities_trivial_order() {
        let l = ladder2();
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        for id in [Identity::Field, Identity::Decoherence] {
            let (lhs, rhs) = liouville_identity_check(&l, &c, id, 1, 0).unwrap();
            assert_eq!((lhs.re, rhs), (1.0, 1.0));
        }
        assert!(liouville_identity_check(&l, &c, Identity::Field, 1, 2).is_err());
    }

    #[test]
    fn decoherence_identity_two_steps() {
        let l = ladder2();
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        let (lhs, rhs) = liouville_identity_check(&l, &c, Identity::Decoherence, 0, 2).unwrap();
        assert!((lhs.re - 0.0895 * 0.1942).abs() < 1e-15);
        assert_eq!(rhs, 0.0895 * 0.1942);
    }

    #[test]
    fn broken_chains_give_zero() {
        let l = LadderSpec { dipoles: vec![0.5855, 0.0], ..ladder2() };
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        assert_eq!(field_only_yield(&c, 1.0, 200.0), 0.0);
        let l = LadderSpec { rates: vec![0.1, 0.0], ..ladder2() };
        assert_eq!(decoherence_only_yield(&l, 1.0, 200.0), 0.0);
    }

    #[test]
    fn validity_flag() {
        let l = ladder2();
        let (t_f, t_e) = default_durations::<f64>();
        let c = EffectiveCoupling::from_rwa(&l, t_e, t_f).unwrap();
        assert!(combined_yield(&l, &c, 0.01, t_f).unwrap().within_validity);
        assert!(!combined_yield(&l, &c, 1.0, t_f).unwrap().within_validity);
    }

    #[test]
    fn no_control_authority() {
        let l = LadderSpec { dipoles: vec![0.5, 0.0], ..ladder2() };
        let (t_f, t_e) = default_durations::<f64>();
        let p = CostParams::new(1e-3, 1e-6).unwrap();
        assert!(matches!(
            decompose_and_optimize(&l, 1.0, 2, &p, t_e, t_f),
            Err(Error::NoControlAuthority { rung: 2 })
        ));
        assert!(decompose_and_optimize(&l, 1.0, 1, &p, t_e, t_f).is_ok());
        assert!(decompose_and_optimize(&l, 1.0, 3, &p, t_e, t_f).is_err());
    }

    #[test]
    fn sweep_csv_header() {
        let l = ladder2();
        let c = magnus_w(&l, &l.field().unwrap(), 200.0).unwrap();
        let rows = oracle_sweep(&l, &c, &[0.1, 0.05], true, 200.0).unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,gamma,O_perturbative,O_oracle,rel_error\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
