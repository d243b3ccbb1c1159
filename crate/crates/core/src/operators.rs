//! Operator algebra for N two-level emitters.
//!
//! Builds the dense matrices the rest of the library runs on: ladder
//! operators embedded in the 2^N product space, the rotating-frame
//! Hamiltonian of laser-driven emitters, Lindblad dissipators, and the
//! vectorized Liouvillian superoperator.
//!
//! Conventions:
//! - basis ordering is the tensor product with emitter 0 leftmost
//!   (most significant bit), per-site order (ground, excited);
//! - the master equation implemented downstream is
//!   drho/dt = +i[H, rho] + sum_k r_k D[x_k] rho
//!   with D[x] rho = x rho x+ - (x+ x rho + rho x+ x)/2; the +i sign
//!   pairs with the sign convention of [`build_hamiltonian`] (the
//!   detuning enters H with a minus sign), the two together are
//!   equivalent to the usual -i[H, .] form;
//! - vectorization is column-stacking, vec(A X B) = (B^T kron A) vec(X).

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Dense complex operator on the 2^N product space.
pub type Op = DMatrix<Complex64>;

/// Hard cap on emitter count; the Liouvillian is a 4^N x 4^N dense
/// matrix and 6 emitters (4096^2 complex entries) is the ceiling this
/// library is designed for.
pub const MAX_EMITTERS: usize = 6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("emitter index {index} out of range for {n_emitters} emitters")]
    IndexOutOfRange { index: usize, n_emitters: usize },
    #[error("{n_emitters} emitters exceeds the supported maximum of {MAX_EMITTERS}")]
    TooManyEmitters { n_emitters: usize },
    #[error("no emitters given")]
    NoEmitters,
    #[error("emitter {index}: {reason}")]
    BadEmitterParams { index: usize, reason: String },
    #[error("operator dimensions {a}x{a} and {b}x{b} do not match")]
    DimensionMismatch { a: usize, b: usize },
    #[error("negative rate {rate} for jump operator")]
    NegativeRate { rate: f64 },
}

/// Which ladder operator to embed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ladder {
    /// sigma^- = |g><e|, removes an excitation.
    Lower,
    /// sigma^+ = |e><g|, adds an excitation.
    Raise,
}

/// Parameters of one emitter. All rates and detunings are angular
/// frequencies in rad/ns.
#[derive(Debug, Clone, PartialEq)]
pub struct EmitterParams {
    /// Transition detuning from the common reference frequency.
    pub delta0: f64,
    /// Total radiative decay rate gamma_tot (guided + unguided).
    pub gamma_tot: f64,
    /// Pure dephasing rate gamma_d; enters as a jump sigma^+ sigma^-
    /// with rate 2 gamma_d.
    pub gamma_d: f64,
    /// Fraction of the decay that goes into the guided mode, in [0, 1].
    pub beta: f64,
    /// Standard deviation of the slow spectral-diffusion detuning shift.
    pub sigma_sd: f64,
    /// Propagation phase of this emitter's coupling to the guided mode.
    pub phase: f64,
}

impl EmitterParams {
    /// Emitter with the given guided fraction and total decay rate, on
    /// reference resonance, with no dephasing, no spectral diffusion,
    /// zero phase.
    pub fn new(beta: f64, gamma_tot: f64) -> Self {
        EmitterParams {
            delta0: 0.0,
            gamma_tot,
            gamma_d: 0.0,
            beta,
            sigma_sd: 0.0,
            phase: 0.0,
        }
    }

    /// Field amplitude coupling to the guided mode,
    /// kappa = sqrt(beta gamma_tot / 2).
    pub fn kappa(&self) -> f64 {
        (self.beta * self.gamma_tot / 2.0).sqrt()
    }

    /// Half width of the coherence decay, gamma_tot/2 + gamma_d.
    pub fn gamma2(&self) -> f64 {
        self.gamma_tot / 2.0 + self.gamma_d
    }

    pub fn validate(&self, index: usize) -> Result<(), OperatorError> {
        let fail = |reason: String| OperatorError::BadEmitterParams { index, reason };
        if self.gamma_tot <= 0.0 || !self.gamma_tot.is_finite() {
            return Err(fail(format!("gamma_tot must be positive, got {}", self.gamma_tot)));
        }
        if self.gamma_d < 0.0 || !self.gamma_d.is_finite() {
            return Err(fail(format!("gamma_d must be >= 0, got {}", self.gamma_d)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(fail(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if self.sigma_sd < 0.0 || !self.sigma_sd.is_finite() {
            return Err(fail(format!("sigma_sd must be >= 0, got {}", self.sigma_sd)));
        }
        if !self.delta0.is_finite() || !self.phase.is_finite() {
            return Err(fail("delta0 and phase must be finite".into()));
        }
        Ok(())
    }
}

/// Validate a full emitter list (count limits plus per-emitter ranges).
pub fn validate_emitters(emitters: &[EmitterParams]) -> Result<(), OperatorError> {
    if emitters.is_empty() {
        return Err(OperatorError::NoEmitters);
    }
    if emitters.len() > MAX_EMITTERS {
        return Err(OperatorError::TooManyEmitters {
            n_emitters: emitters.len(),
        });
    }
    for (i, e) in emitters.iter().enumerate() {
        e.validate(i)?;
    }
    Ok(())
}

/// Hilbert space dimension for n emitters.
pub fn hilbert_dim(n_emitters: usize) -> usize {
    1 << n_emitters
}

/// Identity on the n-emitter space.
pub fn identity(n_emitters: usize) -> Op {
    Op::identity(hilbert_dim(n_emitters), hilbert_dim(n_emitters))
}

/// Embed a single-site 2x2 operator at position `index` (emitter 0 is
/// the leftmost tensor factor).
fn embed_site(op2: &Op, index: usize, n_emitters: usize) -> Op {
    debug_assert_eq!(op2.nrows(), 2);
    let mut out = Op::identity(1, 1);
    for k in 0..n_emitters {
        let factor = if k == index {
            op2.clone()
        } else {
            Op::identity(2, 2)
        };
        out = out.kronecker(&factor);
    }
    out
}

/// Ladder operator sigma^-_i or sigma^+_i embedded in the full space.
pub fn ladder_operator(
    index: usize,
    n_emitters: usize,
    kind: Ladder,
) -> Result<Op, OperatorError> {
    if n_emitters == 0 {
        return Err(OperatorError::NoEmitters);
    }
    if n_emitters > MAX_EMITTERS {
        return Err(OperatorError::TooManyEmitters { n_emitters });
    }
    if index >= n_emitters {
        return Err(OperatorError::IndexOutOfRange { index, n_emitters });
    }
    let mut site = Op::zeros(2, 2);
    match kind {
        // basis order (g, e): sigma^- takes |e> to |g>.
        Ladder::Lower => site[(0, 1)] = ONE,
        Ladder::Raise => site[(1, 0)] = ONE,
    }
    Ok(embed_site(&site, index, n_emitters))
}

/// Excited-state projector sigma^+_i sigma^-_i embedded in the full space.
pub fn number_operator(index: usize, n_emitters: usize) -> Result<Op, OperatorError> {
    if index >= n_emitters {
        return Err(OperatorError::IndexOutOfRange { index, n_emitters });
    }
    let mut site = Op::zeros(2, 2);
    site[(1, 1)] = ONE;
    Ok(embed_site(&site, index, n_emitters))
}

/// Rotating-frame Hamiltonian of laser-driven emitters,
///
///   H = - sum_i (laser_detuning - delta0_i) sigma^+_i sigma^-_i
///       + i Omega sum_i (sigma^+_i - sigma^-_i)
///
/// with a single real drive amplitude Omega shared by all emitters.
/// The sign of the detuning term pairs with the +i[H, rho] convention
/// of the master equation.
pub fn build_hamiltonian(
    emitters: &[EmitterParams],
    laser_detuning: f64,
    rabi: f64,
) -> Result<Op, OperatorError> {
    let drives = vec![Complex64::new(rabi, 0.0); emitters.len()];
    build_hamiltonian_with_drives(emitters, laser_detuning, &drives)
}

/// Same Hamiltonian with an independent complex drive amplitude per
/// emitter,
///
///   H = - sum_i (laser_detuning - delta0_i) sigma^+_i sigma^-_i
///       + sum_i i (Omega_i sigma^+_i - conj(Omega_i) sigma^-_i),
///
/// which reduces to the single-Omega form for equal real amplitudes and
/// stays Hermitian for any complex Omega_i.
pub fn build_hamiltonian_with_drives(
    emitters: &[EmitterParams],
    laser_detuning: f64,
    drives: &[Complex64],
) -> Result<Op, OperatorError> {
    validate_emitters(emitters)?;
    if drives.len() != emitters.len() {
        return Err(OperatorError::DimensionMismatch {
            a: emitters.len(),
            b: drives.len(),
        });
    }
    let n = emitters.len();
    let d = hilbert_dim(n);
    let mut h = Op::zeros(d, d);
    for (i, e) in emitters.iter().enumerate() {
        let det = laser_detuning - e.delta0;
        if det != 0.0 {
            h += number_operator(i, n)?.scale(-det);
        }
        let om = drives[i];
        if om != ZERO {
            let sp = ladder_operator(i, n, Ladder::Raise)?;
            let sm = ladder_operator(i, n, Ladder::Lower)?;
            h += sp * (I * om) - sm * (I * om.conj());
        }
    }
    Ok(h)
}

/// Lindblad dissipator D[x] rho = x rho x+ - (x+ x rho + rho x+ x)/2
/// (GKSL form, unit rate).
pub fn dissipator(jump: &Op, rho: &Op) -> Result<Op, OperatorError> {
    if jump.nrows() != rho.nrows() || jump.nrows() != jump.ncols() {
        return Err(OperatorError::DimensionMismatch {
            a: jump.nrows(),
            b: rho.nrows(),
        });
    }
    let xdag = jump.adjoint();
    let xdx = &xdag * jump;
    let half = Complex64::new(0.5, 0.0);
    Ok(jump * rho * xdag - (&xdx * rho + rho * xdx).scale_c(half))
}

/// Vectorized generator of the master equation
///
///   drho/dt = i[H, rho] + sum_k r_k D[x_k] rho
///
/// as a dim^2 x dim^2 matrix acting on column-stacked rho. Jumps and
/// dephasers are both (rate, operator) pairs; they are kept as separate
/// arguments only because callers assemble them from different physics
/// (radiative decay vs pure dephasing at rate 2 gamma_d).
pub fn build_liouvillian(
    hamiltonian: &Op,
    jumps: &[(f64, Op)],
    dephasers: &[(f64, Op)],
) -> Result<Liouvillian, OperatorError> {
    let d = hamiltonian.nrows();
    if hamiltonian.ncols() != d {
        return Err(OperatorError::DimensionMismatch {
            a: d,
            b: hamiltonian.ncols(),
        });
    }
    let id = Op::identity(d, d);
    // i[H, rho] -> i (I kron H - H^T kron I)
    let mut l = (id.kronecker(hamiltonian) - hamiltonian.transpose().kronecker(&id)).scale_c(I);
    for (rate, x) in jumps.iter().chain(dephasers.iter()) {
        if *rate < 0.0 {
            return Err(OperatorError::NegativeRate { rate: *rate });
        }
        if x.nrows() != d || x.ncols() != d {
            return Err(OperatorError::DimensionMismatch { a: d, b: x.nrows() });
        }
        if *rate == 0.0 {
            continue;
        }
        let xdag = x.adjoint();
        let xdx = &xdag * x;
        // x rho x+ -> conj(x) kron x; the anticommutator halves split
        // into I kron x+x and (x+x)^T kron I.
        let term = x.map(|z| z.conj()).kronecker(x)
            - id.kronecker(&xdx).scale(0.5)
            - xdx.transpose().kronecker(&id).scale(0.5);
        l += term.scale(*rate);
    }
    Ok(Liouvillian { dim: d, mat: l })
}

/// Collective lowering operator sum_i sqrt(gamma_tot_i) e^{i phase_i}
/// sigma^-_i; used as a single jump when the emitters decay through a
/// shared mode (sub/superradiance).
pub fn collective_jump(emitters: &[EmitterParams]) -> Result<Op, OperatorError> {
    validate_emitters(emitters)?;
    let n = emitters.len();
    let d = hilbert_dim(n);
    let mut j = Op::zeros(d, d);
    for (i, e) in emitters.iter().enumerate() {
        let amp = Complex64::from_polar(e.gamma_tot.sqrt(), e.phase);
        j += ladder_operator(i, n, Ladder::Lower)?.scale_c(amp);
    }
    Ok(j)
}

/// Vectorized master-equation generator on a dim-dimensional Hilbert
/// space; `mat` acts on column-stacked density matrices.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    mat: DMatrix<Complex64>,
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.mat
    }

    /// Apply the generator to a density matrix: drho/dt.
    pub fn apply(&self, rho: &Op) -> Op {
        let v = vec_density(rho);
        let out = &self.mat * v;
        unvec_density(&out, self.dim)
    }
}

/// Column-stack a matrix into a vector (nalgebra stores column-major,
/// so this is a straight copy).
pub fn vec_density(rho: &Op) -> nalgebra::DVector<Complex64> {
    nalgebra::DVector::from_column_slice(rho.as_slice())
}

/// Undo [`vec_density`].
pub fn unvec_density(v: &nalgebra::DVector<Complex64>, dim: usize) -> Op {
    Op::from_column_slice(dim, dim, v.as_slice())
}

/// Largest absolute entry of (a - a+); zero for Hermitian matrices.
pub fn hermiticity_defect(a: &Op) -> f64 {
    let d = a - a.adjoint();
    d.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Helper scaling by a complex scalar (nalgebra's `scale` is real-only).
trait ScaleC {
    fn scale_c(&self, s: Complex64) -> Op;
}

impl ScaleC for Op {
    fn scale_c(&self, s: Complex64) -> Op {
        self.map(|z| z * s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_emitters(rng: &mut ChaCha8Rng, n: usize) -> Vec<EmitterParams> {
        (0..n)
            .map(|_| EmitterParams {
                delta0: rng.gen_range(-3.0..3.0),
                gamma_tot: rng.gen_range(0.2..2.0),
                gamma_d: rng.gen_range(0.0..0.5),
                beta: rng.gen_range(0.0..0.8),
                sigma_sd: rng.gen_range(0.0..1.0),
                phase: rng.gen_range(-3.0..3.0),
            })
            .collect()
    }

    #[test]
    fn ladder_single_emitter() {
        let sm = ladder_operator(0, 1, Ladder::Lower).unwrap();
        // |g><e|: single nonzero entry at (g, e).
        assert_eq!(sm[(0, 1)], c(1.0, 0.0));
        assert_eq!(sm[(0, 0)], c(0.0, 0.0));
        assert_eq!(sm[(1, 0)], c(0.0, 0.0));
        assert_eq!(sm[(1, 1)], c(0.0, 0.0));
        let sp = ladder_operator(0, 1, Ladder::Raise).unwrap();
        assert_eq!(sp, sm.adjoint());
    }

    #[test]
    fn ladder_two_emitter_embedding() {
        // Emitter 0 is the left tensor factor: sigma^- kron I.
        let sm0 = ladder_operator(0, 2, Ladder::Lower).unwrap();
        let sm = ladder_operator(0, 1, Ladder::Lower).unwrap();
        let expect = sm.kronecker(&Op::identity(2, 2));
        assert_eq!(sm0, expect);
        // Emitter 1 is the right factor.
        let sm1 = ladder_operator(1, 2, Ladder::Lower).unwrap();
        let expect1 = Op::identity(2, 2).kronecker(&sm);
        assert_eq!(sm1, expect1);
    }

    #[test]
    fn ladder_index_errors() {
        assert!(matches!(
            ladder_operator(2, 2, Ladder::Lower),
            Err(OperatorError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            ladder_operator(0, 7, Ladder::Lower),
            Err(OperatorError::TooManyEmitters { .. })
        ));
    }

    #[test]
    fn ladder_algebra() {
        // On each site sigma^- sigma^+ + sigma^+ sigma^- = I; operators on
        // different emitters commute.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(1..=4usize);
            let i = rng.gen_range(0..n);
            let sm = ladder_operator(i, n, Ladder::Lower).unwrap();
            let sp = ladder_operator(i, n, Ladder::Raise).unwrap();
            let anti = &sm * &sp + &sp * &sm;
            assert_abs_diff_eq!(
                (anti - identity(n)).iter().map(|z| z.norm()).fold(0.0, f64::max),
                0.0,
                epsilon = 1e-14
            );
            if n > 1 {
                let j = (i + 1) % n;
                let smj = ladder_operator(j, n, Ladder::Lower).unwrap();
                let comm = &sm * &smj - &smj * &sm;
                assert!(comm.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-14);
            }
        }
    }

    #[test]
    fn hamiltonian_single_emitter_matrix() {
        let em = vec![EmitterParams::new(0.5, 1.0)];
        let delta = 0.7;
        let omega = 0.3;
        // laser_detuning - delta0 = 0.7 on the excited diagonal with a
        // minus sign; drive fills the off-diagonals with -i Omega / +i Omega.
        let h = build_hamiltonian(&em, delta, omega).unwrap();
        assert_abs_diff_eq!((h[(1, 1)] - c(-delta, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((h[(0, 1)] - c(0.0, -omega)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((h[(1, 0)] - c(0.0, omega)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(h[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn hamiltonian_two_emitters_diagonal() {
        let em = vec![EmitterParams::new(0.1, 1.0), EmitterParams::new(0.1, 1.0)];
        let delta = 1.3;
        let h = build_hamiltonian(&em, delta, 0.0).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| h[(k, k)].re).collect();
        // states gg, ge, eg, ee
        assert_abs_diff_eq!(diag[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(diag[1], -delta, epsilon = 1e-15);
        assert_abs_diff_eq!(diag[2], -delta, epsilon = 1e-15);
        assert_abs_diff_eq!(diag[3], -2.0 * delta, epsilon = 1e-15);
        assert!(h.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn hamiltonian_hermitian_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..25 {
            let n = rng.gen_range(1..=3usize);
            let em = random_emitters(&mut rng, n);
            let drives: Vec<Complex64> = (0..n)
                .map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let h = build_hamiltonian_with_drives(&em, rng.gen_range(-2.0..2.0), &drives).unwrap();
            assert!(hermiticity_defect(&h) < 1e-14);
        }
    }

    #[test]
    fn dissipator_decay_of_excited_state() {
        let sm = ladder_operator(0, 1, Ladder::Lower).unwrap();
        let mut rho = Op::zeros(2, 2);
        rho[(1, 1)] = c(1.0, 0.0); // |e><e|
        let d = dissipator(&sm, &rho).unwrap();
        // D[sigma^-] |e><e| = |g><g| - |e><e|
        assert_abs_diff_eq!((d[(0, 0)] - c(1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((d[(1, 1)] - c(-1.0, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(d[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn dissipator_dephasing_halves_coherence() {
        let n = number_operator(0, 1).unwrap();
        let mut rho = Op::zeros(2, 2);
        rho[(1, 0)] = c(1.0, 0.0); // |e><g|
        let d = dissipator(&n, &rho).unwrap();
        assert_abs_diff_eq!((d[(1, 0)] - c(-0.5, 0.0)).norm(), 0.0, epsilon = 1e-15);
        assert_eq!(d[(0, 0)], c(0.0, 0.0));
        assert_eq!(d[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn dissipator_trace_free_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let d = 4;
            let x = Op::from_fn(d, d, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let mut rho = Op::from_fn(d, d, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            rho = &rho * rho.adjoint(); // positive semidefinite
            let tr: Complex64 = rho.trace();
            rho = rho.map(|z| z / tr);
            let diss = dissipator(&x, &rho).unwrap();
            assert!(diss.trace().norm() < 1e-12);
        }
    }

    /// The trace functional, vec(I)+, must annihilate the Liouvillian from
    /// the left: trace is conserved for every initial state.
    #[test]
    fn liouvillian_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..15 {
            let n = rng.gen_range(1..=3usize);
            let em = random_emitters(&mut rng, n);
            let h = build_hamiltonian(&em, rng.gen_range(-2.0..2.0), rng.gen_range(0.0..1.0))
                .unwrap();
            let mut jumps = Vec::new();
            let mut dephasers = Vec::new();
            for (i, e) in em.iter().enumerate() {
                jumps.push((e.gamma_tot, ladder_operator(i, n, Ladder::Lower).unwrap()));
                dephasers.push((2.0 * e.gamma_d, number_operator(i, n).unwrap()));
            }
            let l = build_liouvillian(&h, &jumps, &dephasers).unwrap();
            let d = l.dim();
            // row vector vec(I)^T conj applied to L: sum_k conj(vec(I))_j L_{j,k}
            let idv = vec_density(&identity(n));
            let lt = l.matrix();
            for k in 0..d * d {
                let mut s = ZERO;
                for j in 0..d * d {
                    s += idv[j].conj() * lt[(j, k)];
                }
                assert!(s.norm() < 1e-12, "trace functional leaked: |{}|", s.norm());
            }
        }
    }

    /// L maps Hermitian matrices to Hermitian matrices.
    #[test]
    fn liouvillian_preserves_hermiticity() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..10 {
            let n = rng.gen_range(1..=2usize);
            let em = random_emitters(&mut rng, n);
            let h = build_hamiltonian(&em, 0.4, 0.2).unwrap();
            let d = hilbert_dim(n);
            let jumps: Vec<(f64, Op)> = (0..n)
                .map(|i| (em[i].gamma_tot, ladder_operator(i, n, Ladder::Lower).unwrap()))
                .collect();
            let l = build_liouvillian(&h, &jumps, &[]).unwrap();
            let a = Op::from_fn(d, d, |_, _| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let herm = (&a + a.adjoint()).scale(0.5);
            let out = l.apply(&herm);
            assert!(hermiticity_defect(&out) < 1e-12);
        }
    }

    /// Two identical emitters with a shared decay channel: the symmetric
    /// one-excitation state decays at 2 gamma, the antisymmetric one is
    /// dark. Checked against the action of the collective Liouvillian on
    /// the two states directly.
    #[test]
    fn collective_jump_super_and_subradiance() {
        let gamma = 0.8;
        let em = vec![EmitterParams::new(0.3, gamma), EmitterParams::new(0.3, gamma)];
        let h = build_hamiltonian(&em, 0.0, 0.0).unwrap();
        let j = collective_jump(&em).unwrap();
        // rate 1: the sqrt(gamma) weights live inside the jump operator
        let l = build_liouvillian(&h, &[(1.0, j)], &[]).unwrap();

        let inv = 1.0 / 2f64.sqrt();
        // basis gg, ge, eg, ee; |S> = (|eg> + |ge>)/sqrt2, |A> with minus.
        let mut s = nalgebra::DVector::<Complex64>::zeros(4);
        s[1] = c(inv, 0.0);
        s[2] = c(inv, 0.0);
        let mut a = nalgebra::DVector::<Complex64>::zeros(4);
        a[1] = c(-inv, 0.0);
        a[2] = c(inv, 0.0);

        let proj = |v: &nalgebra::DVector<Complex64>| -> Op {
            Op::from_fn(4, 4, |r, q| v[r] * v[q].conj())
        };
        let ntot = number_operator(0, 2).unwrap() + number_operator(1, 2).unwrap();

        // d<n>/dt on |S><S| is -2 gamma (superradiant), on |A><A| zero.
        let ds = l.apply(&proj(&s));
        let rate_s = (&ntot * &ds).trace().re;
        assert_abs_diff_eq!(rate_s, -2.0 * gamma, epsilon = 1e-12);

        let da = l.apply(&proj(&a));
        let defect = da.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(defect < 1e-12, "antisymmetric state not dark: {defect}");
    }

    #[test]
    fn vec_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = Op::from_fn(4, 4, |_, _| c(rng.gen(), rng.gen()));
        let v = vec_density(&a);
        assert_eq!(unvec_density(&v, 4), a);
        // column-stacking: vec(A X B) = (B^T kron A) vec(X)
        let b = Op::from_fn(4, 4, |_, _| c(rng.gen(), rng.gen()));
        let x = Op::from_fn(4, 4, |_, _| c(rng.gen(), rng.gen()));
        let lhs = vec_density(&(&a * &x * &b));
        let rhs = b.transpose().kronecker(&a) * vec_density(&x);
        assert!((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn param_validation() {
        let mut e = EmitterParams::new(0.5, 1.0);
        assert!(e.validate(0).is_ok());
        e.beta = 1.2;
        assert!(e.validate(0).is_err());
        e.beta = 0.5;
        e.gamma_tot = 0.0;
        assert!(e.validate(0).is_err());
        e.gamma_tot = 1.0;
        e.gamma_d = -0.1;
        assert!(e.validate(0).is_err());
    }
}
