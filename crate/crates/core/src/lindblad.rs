//! Density-matrix propagation with fixed-step RK4.
//!
//! The integrator works in the interaction picture of the field-free
//! Hamiltonian, so the free phase rotation is exact and the step size only has
//! to resolve the field coupling. Reported states are in the lab frame.

use std::io::Write;

use ndarray::Array2;
use num_complex::Complex;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::linalg::{self, CMat};
use crate::qsystem::{Decoherence, LevelSystem, Superoperator};
use crate::scalar::{lit, to_f64, Real};

/// N x N reduced density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T> {
    matrix: CMat<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// |k><k| in an `n`-level space.
    pub fn pure(n: usize, k: usize) -> Self {
        let mut matrix = linalg::zeros(n);
        matrix[(k, k)] = Complex::new(T::one(), T::zero());
        DensityMatrix { matrix }
    }

    /// Wraps a matrix after checking it is square, Hermitian and unit-trace.
    pub fn from_matrix(matrix: CMat<T>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), found: matrix.ncols() });
        }
        let tol = lit::<T>(1e-9) * T::tolerance_scale();
        if linalg::hermiticity_residual(&matrix) > tol {
            return Err(Error::config("density matrix is not Hermitian"));
        }
        if (linalg::trace(&matrix) - Complex::new(T::one(), T::zero())).norm() > tol {
            return Err(Error::config("density matrix does not have unit trace"));
        }
        Ok(DensityMatrix { matrix })
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMat<T>) -> Self {
        DensityMatrix { matrix }
    }

    pub fn matrix(&self) -> &CMat<T> {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat<T> {
        self.matrix
    }

    pub fn n_levels(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn population(&self, k: usize) -> T {
        self.matrix[(k, k)].re
    }

    pub fn populations(&self) -> Vec<T> {
        self.matrix.diag().iter().map(|z| z.re).collect()
    }

    pub fn trace(&self) -> Complex<T> {
        linalg::trace(&self.matrix)
    }

    /// Tr rho^2.
    pub fn purity(&self) -> T {
        // Tr(rho rho) = sum_ij rho_ij rho_ji = sum_ij |rho_ij|^2 for Hermitian rho
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn hermiticity_residual(&self) -> T {
        linalg::hermiticity_residual(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::hermitian_min_eigenvalue(&self.matrix)
    }
}

/// Fixed-step integration settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropagationConfig<T> {
    pub dt: T,
    pub horizon: T,
    /// Snapshot stride in steps; 0 keeps only the initial and final states.
    pub store_every: usize,
    /// Trace / Hermiticity / population breach that aborts a run.
    pub divergence_tol: T,
}

pub const MAX_DT: f64 = 0.05;

impl<T: Real> Default for PropagationConfig<T> {
    fn default() -> Self {
        PropagationConfig {
            dt: lit(0.01),
            horizon: lit(crate::field::DEFAULT_HORIZON),
            store_every: 100,
            divergence_tol: lit::<T>(1e-6) * T::tolerance_scale(),
        }
    }
}

impl<T: Real> PropagationConfig<T> {
    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_horizon(mut self, horizon: T) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_store_every(mut self, store_every: usize) -> Self {
        self.store_every = store_every;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || self.dt > lit(MAX_DT) {
            return Err(Error::config(format!("dt must lie in (0, {MAX_DT}] fs")));
        }
        if !(self.horizon > T::zero()) || !self.horizon.is_finite() {
            return Err(Error::config("horizon must be > 0"));
        }
        Ok(())
    }

    /// Number of steps; the step is shrunk so that it divides the horizon.
    pub fn steps(&self) -> usize {
        let raw = to_f64(self.horizon) / to_f64(self.dt);
        (raw - 1e-9).ceil().max(1.0) as usize
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
    pub final_state: DensityMatrix<T>,
}

impl<T: Real> Trajectory<T> {
    /// CSV: t, p0..p{N-1}, then |rho_ij| for i < j when `offdiag` is set.
    pub fn write_csv<W: Write>(&self, writer: W, offdiag: bool) -> Result<()> {
        let n = self.final_state.n_levels();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((0..n).map(|k| format!("p{k}")));
        if offdiag {
            for i in 0..n {
                for j in i + 1..n {
                    header.push(format!("abs_{i}_{j}"));
                }
            }
        }
        w.write_record(&header)?;
        for (t, rho) in self.times.iter().zip(&self.states) {
            let mut row = vec![format!("{t}")];
            row.extend(rho.populations().iter().map(|p| format!("{p:e}")));
            if offdiag {
                for i in 0..n {
                    for j in i + 1..n {
                        row.push(format!("{:e}", rho.matrix()[(i, j)].norm()));
                    }
                }
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed right-hand side of the master equation, operating on flat
/// row-major buffers.
#[derive(Clone, Debug)]
pub struct Generator<T> {
    n: usize,
    /// -i (e_l - e_l') - (loss_l + loss_l') / 2 per element.
    diagonal: Vec<Complex<T>>,
    /// (to, from, rate) population feeding terms.
    gains: Vec<(usize, usize, T)>,
    /// (l, m, mu_lm) for every non-zero dipole element.
    dipoles: Vec<(usize, usize, T)>,
}

impl<T: Real> Generator<T> {
    pub fn new(system: &LevelSystem<T>, decoherence: &Decoherence<T>) -> Result<Self> {
        let n = system.n_levels;
        if decoherence.n_levels() != n {
            return Err(Error::DimensionMismatch { expected: n, found: decoherence.n_levels() });
        }
        let half: T = lit(0.5);
        let loss: Vec<T> = (0..n).map(|l| decoherence.loss(l)).collect();
        let mut diagonal = Vec::with_capacity(n * n);
        for l in 0..n {
            for lp in 0..n {
                diagonal.push(Complex::new(
                    -(loss[l] + loss[lp]) * half,
                    -(system.energies[l] - system.energies[lp]),
                ));
            }
        }
        let mut gains = Vec::new();
        let mut dipoles = Vec::new();
        for l in 0..n {
            for m in 0..n {
                let r = decoherence.rate(l, m);
                if l != m && !r.is_zero() {
                    gains.push((l, m, r));
                }
                let mu = system.dipole[l][m];
                if !mu.is_zero() {
                    dipoles.push((l, m, mu));
                }
            }
        }
        Ok(Generator { n, diagonal, gains, dipoles })
    }

    pub fn n_levels(&self) -> usize {
        self.n
    }

    /// `out = d rho / dt` for field value `e`.
    #[inline]
    pub fn apply(&self, rho: &[Complex<T>], e: T, out: &mut [Complex<T>]) {
        let n = self.n;
        for ((o, r), c) in out.iter_mut().zip(rho).zip(&self.diagonal) {
            *o = *r * *c;
        }
        for &(l, m, r) in &self.gains {
            out[l * n + l] += rho[m * n + m] * r;
        }
        if e.is_zero() {
            return;
        }
        // -i E [mu, rho]
        for &(l, m, mu) in &self.dipoles {
            let c = Complex::new(T::zero(), -e * mu);
            for k in 0..n {
                out[l * n + k] += c * rho[m * n + k];
                out[k * n + m] -= c * rho[k * n + l];
            }
        }
    }
}

/// Right-hand side in the interaction picture of H0:
/// `d rho_I/dt = -i E(t) [mu_I(t), rho_I] + F rho_I`, where
/// `mu_I(t)_lm = mu_lm exp(i (e_l - e_m) t)` and F is unchanged by the frame.
#[derive(Clone, Debug)]
struct InteractionGenerator<T> {
    n: usize,
    /// -(loss_l + loss_l') / 2 per element.
    decay: Vec<T>,
    gains: Vec<(usize, usize, T)>,
    /// (l, m, mu_lm, e_l - e_m) for l <= m.
    couplings: Vec<(usize, usize, T, T)>,
}

impl<T: Real> InteractionGenerator<T> {
    fn new(system: &LevelSystem<T>, decoherence: &Decoherence<T>) -> Result<Self> {
        let n = system.n_levels;
        if decoherence.n_levels() != n {
            return Err(Error::DimensionMismatch { expected: n, found: decoherence.n_levels() });
        }
        let half: T = lit(0.5);
        let loss: Vec<T> = (0..n).map(|l| decoherence.loss(l)).collect();
        let mut decay = Vec::with_capacity(n * n);
        for l in 0..n {
            for lp in 0..n {
                decay.push(-(loss[l] + loss[lp]) * half);
            }
        }
        let mut gains = Vec::new();
        let mut couplings = Vec::new();
        for l in 0..n {
            for m in 0..n {
                let r = decoherence.rate(l, m);
                if l != m && !r.is_zero() {
                    gains.push((l, m, r));
                }
                let mu = system.dipole[l][m];
                if l <= m && !mu.is_zero() {
                    couplings.push((l, m, mu, system.energies[l] - system.energies[m]));
                }
            }
        }
        Ok(InteractionGenerator { n, decay, gains, couplings })
    }

    /// Phase factors exp(i (e_l - e_m) t) of every coupling.
    fn phases(&self, t: T, out: &mut [Complex<T>]) {
        for (p, &(_, _, _, w)) in out.iter_mut().zip(&self.couplings) {
            let (s, c) = (w * t).sin_cos();
            *p = Complex::new(c, s);
        }
    }

    #[inline]
    fn apply(&self, rho: &[Complex<T>], e: T, phases: &[Complex<T>], out: &mut [Complex<T>]) {
        let n = self.n;
        for ((o, r), d) in out.iter_mut().zip(rho).zip(&self.decay) {
            *o = *r * *d;
        }
        for &(l, m, r) in &self.gains {
            out[l * n + l] += rho[m * n + m] * r;
        }
        if e.is_zero() {
            return;
        }
        for (&(l, m, mu, _), ph) in self.couplings.iter().zip(phases) {
            // -i E mu_I(t) for element (l, m); (m, l) carries the conjugate phase
            let c = Complex::new(ph.im, -ph.re) * (e * mu);
            for k in 0..n {
                out[l * n + k] += c * rho[m * n + k];
                out[k * n + m] -= c * rho[k * n + l];
            }
            if l != m {
                let cc = Complex::new(-ph.im, -ph.re) * (e * mu);
                for k in 0..n {
                    out[m * n + k] += cc * rho[l * n + k];
                    out[k * n + l] -= cc * rho[k * n + m];
                }
            }
        }
    }
}

/// d rho / dt at time `t` for a uniform decoherence strength.
pub fn derivative<T: Real>(
    system: &LevelSystem<T>,
    field: &ControlField<T>,
    gamma: T,
    rho: &DensityMatrix<T>,
    t: T,
) -> Result<CMat<T>> {
    let n = system.n_levels;
    if rho.n_levels() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.n_levels() });
    }
    let generator = Generator::new(system, &Decoherence::uniform(system, gamma)?)?;
    let flat: Vec<Complex<T>> = rho.matrix().iter().copied().collect();
    let mut out = vec![Complex::zero(); n * n];
    generator.apply(&flat, field.evaluate(t), &mut out);
    Ok(Array2::from_shape_vec((n, n), out).expect("n x n buffer"))
}

struct Rk4Buffers<T> {
    k1: Vec<Complex<T>>,
    k2: Vec<Complex<T>>,
    k3: Vec<Complex<T>>,
    k4: Vec<Complex<T>>,
    tmp: Vec<Complex<T>>,
}

impl<T: Real> Rk4Buffers<T> {
    fn new(len: usize) -> Self {
        let z = vec![Complex::zero(); len];
        Rk4Buffers { k1: z.clone(), k2: z.clone(), k3: z.clone(), k4: z.clone(), tmp: z }
    }
}

#[inline]
fn axpy<T: Real>(out: &mut [Complex<T>], x: &[Complex<T>], a: T, y: &[Complex<T>]) {
    for ((o, xi), yi) in out.iter_mut().zip(x).zip(y) {
        *o = *xi + *yi * a;
    }
}

struct StageInputs<'a, T> {
    e: [T; 3],
    phases: [&'a [Complex<T>]; 3],
}

fn rk4_step<T: Real>(
    gen: &InteractionGenerator<T>,
    rho: &mut [Complex<T>],
    inputs: StageInputs<'_, T>,
    dt: T,
    b: &mut Rk4Buffers<T>,
) {
    let half = dt * lit(0.5);
    let [e0, e_half, e1] = inputs.e;
    let [p0, p_half, p1] = inputs.phases;
    gen.apply(rho, e0, p0, &mut b.k1);
    axpy(&mut b.tmp, rho, half, &b.k1);
    gen.apply(&b.tmp, e_half, p_half, &mut b.k2);
    axpy(&mut b.tmp, rho, half, &b.k2);
    gen.apply(&b.tmp, e_half, p_half, &mut b.k3);
    axpy(&mut b.tmp, rho, dt, &b.k3);
    gen.apply(&b.tmp, e1, p1, &mut b.k4);
    let sixth = dt / lit(6.0);
    let two: T = lit(2.0);
    for (i, r) in rho.iter_mut().enumerate() {
        *r += (b.k1[i] + (b.k2[i] + b.k3[i]) * two + b.k4[i]) * sixth;
    }
}

/// Interaction-picture state to the lab frame at time `t`.
fn to_lab<T: Real>(rho: &[Complex<T>], energies: &[T], t: T) -> Vec<Complex<T>> {
    let n = energies.len();
    let mut out = rho.to_vec();
    for l in 0..n {
        for lp in 0..n {
            if l != lp {
                let (s, c) = ((energies[lp] - energies[l]) * t).sin_cos();
                out[l * n + lp] = rho[l * n + lp] * Complex::new(c, s);
            }
        }
    }
    out
}

fn check_state<T: Real>(rho: &[Complex<T>], n: usize, tol: T, full: bool) -> Option<String> {
    let mut tr = Complex::<T>::zero();
    for k in 0..n {
        tr += rho[k * n + k];
    }
    if !tr.re.is_finite() || !tr.im.is_finite() {
        return Some("non-finite density matrix".into());
    }
    if (tr - Complex::new(T::one(), T::zero())).norm() > tol {
        return Some(format!("trace drifted to {tr}"));
    }
    if full {
        for i in 0..n {
            if rho[i * n + i].re < -tol {
                return Some(format!("negative population {} in level {i}", rho[i * n + i].re));
            }
            for j in i + 1..n {
                if (rho[i * n + j] - rho[j * n + i].conj()).norm() > tol {
                    return Some(format!("Hermiticity lost at ({i}, {j})"));
                }
            }
        }
    }
    None
}

/// Integrates the master equation from `rho0` over `[0, cfg.horizon]` with
/// decoherence `dec` and an optional field (absent means E = 0).
pub fn propagate_with<T: Real>(
    system: &LevelSystem<T>,
    field: Option<&ControlField<T>>,
    dec: &Decoherence<T>,
    rho0: &DensityMatrix<T>,
    cfg: &PropagationConfig<T>,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let n = system.n_levels;
    if rho0.n_levels() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho0.n_levels() });
    }
    let gen = InteractionGenerator::new(system, dec)?;
    let steps = cfg.steps();
    let dt = cfg.horizon / lit(steps as f64);
    let half_dt = dt * lit(0.5);
    let e_at = |t: T| field.map_or(T::zero(), |f| f.evaluate(t));

    // rho0 is taken at t = 0, where both frames coincide
    let mut rho: Vec<Complex<T>> = rho0.matrix().iter().copied().collect();
    let mut buffers = Rk4Buffers::new(n * n);
    let mut times = vec![T::zero()];
    let mut states = vec![rho0.clone()];
    let energies = &system.energies;
    let snapshot = |rho: &[Complex<T>], t: T| {
        DensityMatrix::from_matrix_unchecked(
            Array2::from_shape_vec((n, n), to_lab(rho, energies, t)).expect("n x n"),
        )
    };

    let nc = gen.couplings.len();
    let mut p0 = vec![Complex::zero(); nc];
    let mut p_half = vec![Complex::zero(); nc];
    let mut p1 = vec![Complex::zero(); nc];
    gen.phases(T::zero(), &mut p0);
    let mut e0 = e_at(T::zero());
    let mut t1 = T::zero();
    for step in 0..steps {
        let t = dt * lit(step as f64);
        t1 = dt * lit((step + 1) as f64);
        let e_half = e_at(t + half_dt);
        let e1 = e_at(t1);
        if field.is_some() {
            gen.phases(t + half_dt, &mut p_half);
            gen.phases(t1, &mut p1);
        }
        let inputs = StageInputs { e: [e0, e_half, e1], phases: [&p0, &p_half, &p1] };
        rk4_step(&gen, &mut rho, inputs, dt, &mut buffers);
        e0 = e1;
        std::mem::swap(&mut p0, &mut p1);

        let last = step + 1 == steps;
        let store = last || (cfg.store_every > 0 && (step + 1) % cfg.store_every == 0);
        if let Some(reason) = check_state(&rho, n, cfg.divergence_tol, store || (step + 1) % 256 == 0) {
            return Err(Error::Diverged { step: step + 1, time: to_f64(t1), reason });
        }
        if store {
            times.push(t1);
            states.push(snapshot(&rho, t1));
        }
    }
    let final_state = snapshot(&rho, t1);
    Ok(Trajectory { times, states, final_state })
}

/// Propagation with a uniform decoherence strength `gamma`.
pub fn propagate<T: Real>(
    system: &LevelSystem<T>,
    field: Option<&ControlField<T>>,
    gamma: T,
    rho0: &DensityMatrix<T>,
    cfg: &PropagationConfig<T>,
) -> Result<Trajectory<T>> {
    propagate_with(system, field, &Decoherence::uniform(system, gamma)?, rho0, cfg)
}

/// Final state only, starting from the system's initial level.
pub fn final_state<T: Real>(
    system: &LevelSystem<T>,
    field: Option<&ControlField<T>>,
    dec: &Decoherence<T>,
    cfg: &PropagationConfig<T>,
) -> Result<DensityMatrix<T>> {
    let cfg = cfg.with_store_every(0);
    let rho0 = DensityMatrix::pure(system.n_levels, system.initial_state);
    Ok(propagate_with(system, field, dec, &rho0, &cfg)?.final_state)
}

/// O = Tr[rho |f><f|] = rho_ff, as a fraction.
pub fn outcome<T: Real>(rho_final: &DensityMatrix<T>, system: &LevelSystem<T>) -> T {
    rho_final.population(system.target_state)
}

/// Yield of `field` under `dec`, propagated from the initial level.
pub fn yield_of<T: Real>(
    system: &LevelSystem<T>,
    field: Option<&ControlField<T>>,
    dec: &Decoherence<T>,
    cfg: &PropagationConfig<T>,
) -> Result<T> {
    Ok(outcome(&final_state(system, field, dec, cfg)?, system))
}

/// Field-free evolution by exponentiating the full Liouvillian
/// `-i[H0, .] + D` over `horizon`.
pub fn superop_propagate_oracle<T: Real>(
    system: &LevelSystem<T>,
    dec: &Decoherence<T>,
    rho0: &DensityMatrix<T>,
    horizon: T,
) -> Result<DensityMatrix<T>> {
    let n = system.n_levels;
    if rho0.n_levels() != n || dec.n_levels() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho0.n_levels() });
    }
    let free = Superoperator::commutator(&system.hamiltonian()).scaled(Complex::new(T::zero(), -T::one()));
    let liouvillian = free.plus(&Superoperator::dissipator(dec));
    let out = liouvillian.exp(horizon).apply(rho0.matrix())?;
    Ok(DensityMatrix::from_matrix_unchecked(out))
}
