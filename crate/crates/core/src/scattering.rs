//! Transmission of a weak coherent beam past waveguide-coupled emitters.
//!
//! The output field downstream of the emitters is affine in the system
//! operators, a_out = s + M, with a scalar part s = z alpha carrying the
//! directly transmitted beam and an operator part M summing the fields
//! scattered by each emitter. The complex coefficient z describes the
//! Fabry-Perot response of the waveguide end facets; the drive strength
//! alpha = sqrt(F) converts an incident photon flux F (photons/ns) into
//! per-emitter Rabi amplitudes through each emitter's guided coupling
//! kappa_i = sqrt(beta_i gamma_i / 2).
//!
//! Everything here reports intensities normalized to the bare waveguide,
//! so an empty emitter list gives exactly 1 at every detuning. Slow
//! wandering of the emitter frequencies (spectral diffusion) is modeled
//! by averaging over Gaussian detuning draws, antithetic-paired and
//! seeded for reproducibility. Intensity correlations of the transmitted
//! light come from the regression theorem applied to the same affine
//! decomposition.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dynamics::{steady_state, two_time_correlator, DensityMatrix, DynamicsError};
use crate::operators::{
    build_hamiltonian_with_drives, build_liouvillian, hilbert_dim, ladder_operator,
    number_operator, validate_emitters, EmitterParams, Ladder, Liouvillian, Op, OperatorError,
};

#[derive(Debug, Error)]
pub enum ScatteringError {
    #[error("Fano coefficient must be finite and nonzero")]
    BadFanoCoefficient,
    #[error("photon flux must be positive and finite, got {0}")]
    BadFlux(f64),
    #[error("detuning grid must be non-empty, finite, and strictly increasing")]
    BadDetuningGrid,
    #[error("flux grid must be non-empty, positive, and strictly increasing")]
    BadFluxGrid,
    #[error("need at least one spectral-diffusion sample")]
    NoSamples,
    #[error("tau grid must start at 0 for a correlation function")]
    TauGridStart,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Fabry-Perot response of the waveguide end facets, condensed into one
/// complex coefficient z multiplying the directly transmitted beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideFano {
    z: Complex64,
}

impl WaveguideFano {
    pub fn from_z(z: Complex64) -> Result<Self, ScatteringError> {
        if !z.re.is_finite() || !z.im.is_finite() || z.norm() == 0.0 {
            return Err(ScatteringError::BadFanoCoefficient);
        }
        Ok(WaveguideFano { z })
    }

    /// z = 1 / (1 + i zeta), the one-parameter family for a lossless
    /// single-mode background.
    pub fn from_zeta(zeta: f64) -> Result<Self, ScatteringError> {
        if !zeta.is_finite() {
            return Err(ScatteringError::BadFanoCoefficient);
        }
        Ok(WaveguideFano {
            z: Complex64::new(1.0, 0.0) / Complex64::new(1.0, zeta),
        })
    }

    /// Featureless background, z = 1.
    pub fn unity() -> Self {
        WaveguideFano {
            z: Complex64::new(1.0, 0.0),
        }
    }

    pub fn z(&self) -> Complex64 {
        self.z
    }
}

/// How the background coefficient z enters the emitter-scattered part
/// of the output field.
///
/// `Scaled` multiplies the scattered field by the same z as the direct
/// beam. Normalized spectra are then independent of z and reduce
/// exactly to the linear-response form t = z (1 - sum_i beta_i L_i) in
/// the weak-drive limit; this is the default.
///
/// `Bare` leaves the scattered field at unit strength, so the direct
/// and scattered amplitudes interfere with a z-dependent relative
/// phase. A complex z then tilts the lineshape (Fano asymmetry) at the
/// price of leaving the simple normalized form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZConvention {
    #[default]
    Scaled,
    Bare,
}

/// How the emitters' spontaneous emission enters the master equation.
///
/// `Independent` gives each emitter its own jump at gamma_tot,i.
/// `Collective` routes the guided fractions through one shared jump
/// sum_i sqrt(beta_i gamma_i) e^{i phi_i} sigma_i^- and keeps the
/// unguided remainders (1 - beta_i) gamma_i independent, which
/// broadens resonant multi-emitter lines (superradiance) while leaving
/// a single emitter exactly as in the independent layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DecayLayout {
    #[default]
    Independent,
    Collective,
}

/// A driven emitter ensemble in a waveguide with a Fano background.
#[derive(Debug, Clone)]
pub struct ScatteringSystem {
    pub emitters: Vec<EmitterParams>,
    pub fano: WaveguideFano,
    pub layout: DecayLayout,
    pub convention: ZConvention,
    /// Incident photon flux in photons/ns; alpha = sqrt(flux).
    pub flux: f64,
}

impl ScatteringSystem {
    pub fn new(
        emitters: Vec<EmitterParams>,
        fano: WaveguideFano,
        layout: DecayLayout,
        convention: ZConvention,
        flux: f64,
    ) -> Result<Self, ScatteringError> {
        let sys = ScatteringSystem {
            emitters,
            fano,
            layout,
            convention,
            flux,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<(), ScatteringError> {
        if !self.emitters.is_empty() {
            validate_emitters(&self.emitters)?;
        }
        if self.flux <= 0.0 || !self.flux.is_finite() {
            return Err(ScatteringError::BadFlux(self.flux));
        }
        Ok(())
    }

    /// Model-validity notes that do not prevent evaluation.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        let beta_sum: f64 = self.emitters.iter().map(|e| e.beta).sum();
        if beta_sum > 1.0 {
            w.push(format!(
                "sum of beta factors is {beta_sum:.3} > 1; a single guided mode cannot collect more than the total emission"
            ));
        }
        w
    }

    fn alpha(&self) -> f64 {
        self.flux.sqrt()
    }

    /// Coefficient multiplying kappa_i e^{i phi_i} sigma_i^- in the
    /// output operator, per the selected z convention.
    fn scatter_coefficient(&self) -> Complex64 {
        let minus_i = Complex64::new(0.0, -1.0);
        match self.convention {
            ZConvention::Scaled => minus_i * self.fano.z,
            ZConvention::Bare => minus_i,
        }
    }
}

/// The affine output decomposition a_out = s + M: the scalar direct
/// beam s = z alpha and the operator M summing each emitter's
/// scattered field.
pub fn output_field_parts(system: &ScatteringSystem) -> Result<(Complex64, Op), ScatteringError> {
    system.validate()?;
    let n = system.emitters.len();
    let d = hilbert_dim(n);
    let s = system.fano.z() * system.alpha();
    let coeff = system.scatter_coefficient();
    let mut m = Op::zeros(d, d);
    for (i, em) in system.emitters.iter().enumerate() {
        let sm = ladder_operator(i, n, Ladder::Lower)?;
        let ci = coeff * em.kappa() * Complex64::cis(em.phase);
        m += sm.map(|x| x * ci);
    }
    Ok((s, m))
}

/// Master-equation generator for the driven system with each emitter's
/// transition frequency offset by `shifts[i]` (spectral diffusion).
fn liouvillian_with_shifts(
    system: &ScatteringSystem,
    laser_detuning: f64,
    shifts: &[f64],
) -> Result<Liouvillian, ScatteringError> {
    let n = system.emitters.len();
    let shifted: Vec<EmitterParams> = system
        .emitters
        .iter()
        .zip(shifts.iter())
        .map(|(em, dv)| {
            let mut e = em.clone();
            e.delta0 += dv;
            e
        })
        .collect();
    let alpha = system.alpha();
    // drive quadrature chosen so the weak-field transmitted amplitude
    // reduces to t = z (1 - sum beta_i L_i) under the Scaled convention
    let drives: Vec<Complex64> = shifted
        .iter()
        .map(|em| Complex64::new(0.0, alpha * em.kappa()))
        .collect();
    let h = build_hamiltonian_with_drives(&shifted, laser_detuning, &drives)?;

    let mut jumps: Vec<(f64, Op)> = Vec::new();
    match system.layout {
        DecayLayout::Independent => {
            for (i, em) in shifted.iter().enumerate() {
                jumps.push((em.gamma_tot, ladder_operator(i, n, Ladder::Lower)?));
            }
        }
        DecayLayout::Collective => {
            let d = hilbert_dim(n);
            let mut guided = Op::zeros(d, d);
            for (i, em) in shifted.iter().enumerate() {
                let c = Complex64::cis(em.phase)
                    * (em.beta * em.gamma_tot / 2.0).sqrt()
                    * Complex64::new(2.0f64.sqrt(), 0.0);
                guided += ladder_operator(i, n, Ladder::Lower)?.map(|x| x * c);
                let unguided_rate = (1.0 - em.beta) * em.gamma_tot;
                if unguided_rate > 0.0 {
                    jumps.push((unguided_rate, ladder_operator(i, n, Ladder::Lower)?));
                }
            }
            jumps.push((1.0, guided));
        }
    }

    let mut dephasers: Vec<(f64, Op)> = Vec::new();
    for (i, em) in shifted.iter().enumerate() {
        if em.gamma_d > 0.0 {
            dephasers.push((2.0 * em.gamma_d, number_operator(i, n)?));
        }
    }
    Ok(build_liouvillian(&h, &jumps, &dephasers)?)
}

fn intensity_from_state(rho: &DensityMatrix, s: Complex64, m: &Op) -> f64 {
    let mean_m = rho.expectation(m);
    let mdag_m = m.adjoint() * m;
    let occ = rho.expectation(&mdag_m).re;
    (s.norm_sqr() + 2.0 * (s.conj() * mean_m).re + occ) / s.norm_sqr()
}

fn steady_intensity(
    system: &ScatteringSystem,
    laser_detuning: f64,
    shifts: &[f64],
) -> Result<f64, ScatteringError> {
    let l = liouvillian_with_shifts(system, laser_detuning, shifts)?;
    let rho = steady_state(&l)?;
    let (s, m) = output_field_parts(system)?;
    Ok(intensity_from_state(&rho, s, &m))
}

/// Steady-state transmitted intensity normalized to the bare waveguide,
/// at the emitters' nominal frequencies (no spectral diffusion).
pub fn transmission_intensity(
    system: &ScatteringSystem,
    laser_detuning: f64,
) -> Result<f64, ScatteringError> {
    system.validate()?;
    if system.emitters.is_empty() {
        return Ok(1.0);
    }
    let zeros = vec![0.0; system.emitters.len()];
    steady_intensity(system, laser_detuning, &zeros)
}

/// Gaussian frequency offsets for each emitter across `n_samples`
/// realizations, antithetic-paired (each odd sample negates the one
/// before it) and then rescaled per emitter to exact zero mean and
/// variance sigma_sd^2, so the fixed set integrates the first two
/// moments of the Gaussian without sampling bias. A single sample sits
/// at the distribution center. Deterministic in `seed`.
pub fn sd_detuning_shifts(
    emitters: &[EmitterParams],
    n_samples: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    if n_samples < 2 {
        return vec![vec![0.0; emitters.len()]; n_samples];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    while out.len() < n_samples {
        let draw: Vec<f64> = emitters
            .iter()
            .map(|em| em.sigma_sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
            .collect();
        if out.len() + 1 < n_samples {
            let mirrored: Vec<f64> = draw.iter().map(|x| -x).collect();
            out.push(draw);
            out.push(mirrored);
        } else {
            out.push(draw);
        }
    }
    let nf = n_samples as f64;
    for j in 0..emitters.len() {
        let mean = out.iter().map(|d| d[j]).sum::<f64>() / nf;
        let var = out.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / nf;
        if var > 0.0 {
            let scale = emitters[j].sigma_sd / var.sqrt();
            for d in out.iter_mut() {
                d[j] = (d[j] - mean) * scale;
            }
        }
    }
    out
}

/// A transmission spectrum on a detuning grid (rad/ns), averaged over
/// spectral diffusion.
#[derive(Debug, Clone)]
pub struct SpectrumResult {
    pub detuning: Vec<f64>,
    pub intensity: Vec<f64>,
    /// 1 - min(intensity).
    pub dip: f64,
    /// Full width of the dip at half depth, by linear interpolation on
    /// the grid; None when the dip does not cross half depth on both
    /// sides within the grid.
    pub fwhm: Option<f64>,
    pub n_sd_samples: usize,
    pub seed: u64,
}

fn check_increasing(grid: &[f64]) -> bool {
    !grid.is_empty()
        && grid.iter().all(|x| x.is_finite())
        && grid.windows(2).all(|w| w[1] > w[0])
}

/// Width of the dip at half its depth, measuring from the unit
/// baseline: crossings of (1 + min) / 2 on both sides of the minimum.
fn fwhm_of_dip(grid: &[f64], intensity: &[f64]) -> Option<f64> {
    let (k_min, i_min) = intensity
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, &v)| {
            if v < acc.1 {
                (k, v)
            } else {
                acc
            }
        });
    if i_min >= 1.0 - 1e-12 {
        return None;
    }
    let half = (1.0 + i_min) / 2.0;
    let interp = |a: usize, b: usize| {
        let (x0, x1) = (grid[a], grid[b]);
        let (y0, y1) = (intensity[a], intensity[b]);
        x0 + (half - y0) * (x1 - x0) / (y1 - y0)
    };
    let mut left = None;
    for (j, &v) in intensity.iter().enumerate().take(k_min).rev() {
        if v >= half {
            left = Some(interp(j, j + 1));
            break;
        }
    }
    let mut right = None;
    for (j, &v) in intensity.iter().enumerate().skip(k_min + 1) {
        if v >= half {
            right = Some(interp(j, j - 1));
            break;
        }
    }
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    }
}

/// Transmission spectrum over `detuning_grid`, averaging each point
/// over `n_sd_samples` spectral-diffusion realizations. With all
/// sigma_sd zero the average collapses to a single evaluation and the
/// result equals pointwise `transmission_intensity`.
pub fn transmission_spectrum(
    system: &ScatteringSystem,
    detuning_grid: &[f64],
    n_sd_samples: usize,
    seed: u64,
) -> Result<SpectrumResult, ScatteringError> {
    system.validate()?;
    if !check_increasing(detuning_grid) {
        return Err(ScatteringError::BadDetuningGrid);
    }
    if n_sd_samples == 0 {
        return Err(ScatteringError::NoSamples);
    }

    let intensity: Vec<f64> = if system.emitters.is_empty() {
        vec![1.0; detuning_grid.len()]
    } else {
        let static_system = system.emitters.iter().all(|em| em.sigma_sd == 0.0);
        let shifts = if static_system {
            vec![vec![0.0; system.emitters.len()]]
        } else {
            sd_detuning_shifts(&system.emitters, n_sd_samples, seed)
        };
        // parallel over grid points; the per-point sample average runs
        // in fixed index order so results are independent of the
        // worker count
        detuning_grid
            .par_iter()
            .map(|&delta| {
                let mut acc = 0.0;
                for sh in &shifts {
                    acc += steady_intensity(system, delta, sh)?;
                }
                Ok(acc / shifts.len() as f64)
            })
            .collect::<Result<Vec<f64>, ScatteringError>>()?
    };

    let dip = 1.0 - intensity.iter().cloned().fold(f64::INFINITY, f64::min);
    let fwhm = fwhm_of_dip(detuning_grid, &intensity);
    Ok(SpectrumResult {
        detuning: detuning_grid.to_vec(),
        intensity,
        dip,
        fwhm,
        n_sd_samples,
        seed,
    })
}

/// Normalized intensity correlation of a field on a delay grid (ns).
#[derive(Debug, Clone)]
pub struct G2Result {
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    /// Value at zero delay (the grid's first point).
    pub g2_zero: f64,
}

/// How spectral-diffusion realizations combine into one g2 curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum G2Averaging {
    /// Average numerators and mean intensities separately, then
    /// normalize: what a photon-counting detector pair integrates
    /// while the lines wander. Can sit above 1 at long delay.
    #[default]
    DetectorCounts,
    /// Normalize each realization by its own intensity before
    /// averaging the curves. Always returns to 1 at long delay.
    PerRealization,
}

/// g2(tau) of the transmitted light. The numerator
/// <O+(0) O+O(tau) O(0)> with O = s + M comes from the regression
/// theorem; under spectral diffusion, numerators and mean intensities
/// are averaged over realizations separately before normalizing, which
/// is what a photon-counting measurement integrates.
pub fn g2_transmitted(
    system: &ScatteringSystem,
    laser_detuning: f64,
    tau_grid: &[f64],
    n_sd_samples: usize,
    seed: u64,
) -> Result<G2Result, ScatteringError> {
    g2_transmitted_with(
        system,
        laser_detuning,
        tau_grid,
        n_sd_samples,
        seed,
        G2Averaging::DetectorCounts,
    )
}

/// Same as [`g2_transmitted`] with an explicit averaging convention.
pub fn g2_transmitted_with(
    system: &ScatteringSystem,
    laser_detuning: f64,
    tau_grid: &[f64],
    n_sd_samples: usize,
    seed: u64,
    averaging: G2Averaging,
) -> Result<G2Result, ScatteringError> {
    system.validate()?;
    if tau_grid.first() != Some(&0.0) {
        return Err(ScatteringError::TauGridStart);
    }
    if n_sd_samples == 0 {
        return Err(ScatteringError::NoSamples);
    }
    if system.emitters.is_empty() {
        // coherent state: Poissonian at all delays
        return Ok(G2Result {
            tau: tau_grid.to_vec(),
            g2: vec![1.0; tau_grid.len()],
            g2_zero: 1.0,
        });
    }

    let static_system = system.emitters.iter().all(|em| em.sigma_sd == 0.0);
    let shifts = if static_system {
        vec![vec![0.0; system.emitters.len()]]
    } else {
        sd_detuning_shifts(&system.emitters, n_sd_samples, seed)
    };
    let (s, m) = output_field_parts(system)?;
    let d = m.nrows();
    let out_op = {
        let mut o = m.clone();
        for k in 0..d {
            o[(k, k)] += s;
        }
        o
    };
    let out_dag = out_op.adjoint();
    let occupancy = &out_dag * &out_op;

    let per_sample: Vec<(Vec<f64>, f64)> = shifts
        .par_iter()
        .map(|sh| {
            let l = liouvillian_with_shifts(system, laser_detuning, sh)?;
            let rho = steady_state(&l)?;
            let series = two_time_correlator(&rho, &l, &out_dag, &occupancy, &out_op, tau_grid)?;
            let numerator: Vec<f64> = series.values.iter().map(|v| v.re).collect();
            let intensity = rho.expectation(&occupancy).re;
            Ok((numerator, intensity))
        })
        .collect::<Result<_, ScatteringError>>()?;

    let n = per_sample.len() as f64;
    let raw: Vec<f64> = match averaging {
        G2Averaging::DetectorCounts => {
            let mut mean_num = vec![0.0; tau_grid.len()];
            let mut mean_int = 0.0;
            for (num, int) in &per_sample {
                for (acc, v) in mean_num.iter_mut().zip(num.iter()) {
                    *acc += v;
                }
                mean_int += int;
            }
            mean_int /= n;
            mean_num
                .iter()
                .map(|v| v / n / (mean_int * mean_int))
                .collect()
        }
        G2Averaging::PerRealization => {
            let mut mean = vec![0.0; tau_grid.len()];
            for (num, int) in &per_sample {
                for (acc, v) in mean.iter_mut().zip(num.iter()) {
                    *acc += v / (int * int);
                }
            }
            mean.iter().map(|v| v / n).collect()
        }
    };
    let g2: Vec<f64> = raw
        .iter()
        .map(|&val| {
            // clip float dust just below zero; anything lower is real
            if val < 0.0 && val > -1e-9 {
                0.0
            } else {
                val
            }
        })
        .collect();
    Ok(G2Result {
        tau: tau_grid.to_vec(),
        g2_zero: g2[0],
        g2,
    })
}

/// On-resonance dip versus incident flux.
#[derive(Debug, Clone)]
pub struct SaturationCurve {
    pub flux: Vec<f64>,
    pub dip: Vec<f64>,
    /// Flux where the dip falls to half its value at the lowest grid
    /// point, by log-linear interpolation; None when the grid never
    /// crosses half.
    pub critical_flux: Option<f64>,
    pub laser_detuning: f64,
}

/// Transmission dip as a function of flux at a fixed laser detuning
/// (defaulting to the mean emitter frequency), with the critical flux
/// where saturation has washed out half the weak-field dip. Spectral
/// diffusion draws are shared across flux points so the curve stays
/// smooth sample-to-sample.
pub fn saturation_curve(
    system: &ScatteringSystem,
    flux_grid: &[f64],
    laser_detuning: Option<f64>,
    n_sd_samples: usize,
    seed: u64,
) -> Result<SaturationCurve, ScatteringError> {
    system.validate()?;
    if !check_increasing(flux_grid) || flux_grid.iter().any(|f| *f <= 0.0) {
        return Err(ScatteringError::BadFluxGrid);
    }
    if n_sd_samples == 0 {
        return Err(ScatteringError::NoSamples);
    }
    let delta_l = laser_detuning.unwrap_or_else(|| {
        if system.emitters.is_empty() {
            0.0
        } else {
            system.emitters.iter().map(|e| e.delta0).sum::<f64>() / system.emitters.len() as f64
        }
    });

    let static_system = system.emitters.iter().all(|em| em.sigma_sd == 0.0);
    let shifts = if system.emitters.is_empty() || static_system {
        vec![vec![0.0; system.emitters.len()]]
    } else {
        sd_detuning_shifts(&system.emitters, n_sd_samples, seed)
    };

    let dip: Vec<f64> = flux_grid
        .par_iter()
        .map(|&f| {
            let mut sys_f = system.clone();
            sys_f.flux = f;
            if sys_f.emitters.is_empty() {
                return Ok(0.0);
            }
            let mut acc = 0.0;
            for sh in &shifts {
                acc += steady_intensity(&sys_f, delta_l, sh)?;
            }
            Ok(1.0 - acc / shifts.len() as f64)
        })
        .collect::<Result<Vec<f64>, ScatteringError>>()?;

    let critical_flux = critical_flux_from(flux_grid, &dip);
    Ok(SaturationCurve {
        flux: flux_grid.to_vec(),
        dip,
        critical_flux,
        laser_detuning: delta_l,
    })
}

fn critical_flux_from(flux: &[f64], dip: &[f64]) -> Option<f64> {
    let half = dip.first()? / 2.0;
    if half <= 0.0 || half.is_nan() {
        return None;
    }
    for k in 1..dip.len() {
        if dip[k] <= half {
            let (x0, x1) = (flux[k - 1].ln(), flux[k].ln());
            let (y0, y1) = (dip[k - 1], dip[k]);
            return Some((x0 + (half - y0) * (x1 - x0) / (y1 - y0)).exp());
        }
    }
    None
}

/// Linear-response transmitted amplitude
/// t(delta) = z (1 - rho sum_i beta_i L_i) with the complex Lorentzian
/// L_i = (gamma_i/2) / (gamma_i/2 + gamma_d,i + i (delta - delta0_i))
/// and rho = 1 (Scaled) or 1/z (Bare). Built from the stationary
/// two-level response alone, independent of the master-equation
/// pipeline; normalized intensity is |t/z|^2 plus the incoherent
/// emission term when gamma_d > 0 (see `linear_response_intensity`).
pub fn weak_drive_oracle(
    emitters: &[EmitterParams],
    fano: &WaveguideFano,
    convention: ZConvention,
    laser_detuning: f64,
) -> Complex64 {
    let z = fano.z();
    let mut resonant = Complex64::new(0.0, 0.0);
    for em in emitters {
        let delta = laser_detuning - em.delta0;
        let lor = Complex64::new(em.gamma_tot / 2.0, 0.0) / Complex64::new(em.gamma2(), delta);
        resonant += em.beta * lor;
    }
    match convention {
        ZConvention::Scaled => z * (Complex64::new(1.0, 0.0) - resonant),
        ZConvention::Bare => z - resonant,
    }
}

/// Linear-response normalized intensity: |t/z|^2 from the amplitude
/// oracle, plus each emitter's dephasing-fed incoherent emission
/// beta^2 (gamma/2) gamma_d / (Gamma_2^2 + delta^2), scaled by 1/|z|^2
/// under the Bare convention where the scattered field is not rescaled
/// by z.
pub fn linear_response_intensity(
    emitters: &[EmitterParams],
    fano: &WaveguideFano,
    convention: ZConvention,
    laser_detuning: f64,
) -> f64 {
    let z = fano.z();
    let t = weak_drive_oracle(emitters, fano, convention, laser_detuning);
    let coherent = (t / z).norm_sqr();
    let scatter_scale = match convention {
        ZConvention::Scaled => 1.0,
        ZConvention::Bare => 1.0 / z.norm_sqr(),
    };
    let mut incoherent = 0.0;
    for em in emitters {
        let delta = laser_detuning - em.delta0;
        let g2w = em.gamma2();
        incoherent += em.beta * em.beta * (em.gamma_tot / 2.0) * em.gamma_d
            / (g2w * g2w + delta * delta);
    }
    coherent + scatter_scale * incoherent
}

/// Exact normalized transmission of a single emitter from the
/// stationary two-level solution, valid at any drive strength. Used as
/// the fast path inside likelihood evaluations; pinned against
/// `transmission_intensity` by tests.
pub fn single_emitter_intensity(
    em: &EmitterParams,
    fano: &WaveguideFano,
    convention: ZConvention,
    flux: f64,
    laser_detuning: f64,
    extra_shift: f64,
) -> f64 {
    let delta = laser_detuning - (em.delta0 + extra_shift);
    let kappa = em.kappa();
    let g2w = em.gamma2();
    let alpha = flux.sqrt();
    let omega_sq = flux * kappa * kappa;
    let sat = 2.0 * omega_sq * g2w / (em.gamma_tot * (g2w * g2w + delta * delta));
    let w = 1.0 / (1.0 + 2.0 * sat);
    let rho_ee = sat * w;
    let omega = Complex64::new(0.0, alpha * kappa);
    let coherence = -omega * w / Complex64::new(g2w, delta);

    let z = fano.z();
    let minus_i = Complex64::new(0.0, -1.0);
    let coeff = match convention {
        ZConvention::Scaled => minus_i * z,
        ZConvention::Bare => minus_i,
    };
    let m = coeff * kappa * Complex64::cis(em.phase);
    let s = z * alpha;
    let coherent = (s + m * coherence).norm_sqr();
    let incoherent = m.norm_sqr() * (rho_ee - coherence.norm_sqr());
    (coherent + incoherent) / s.norm_sqr()
}
