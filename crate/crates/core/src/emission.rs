//! Photon statistics of incoherently pumped emitters.
//!
//! Under non-resonant excitation the emitters are fed by an incoherent
//! pump (a Lindblad jump sigma^+ per emitter) instead of the coherent
//! waveguide drive, and the observable is the intensity correlation
//! g2(tau) of the collected photoluminescence. Three limits anchor the
//! model: a single emitter antibunches completely, two mutually
//! detuned emitters of equal brightness give g2(0) = 1/2, and two
//! degenerate ones restore g2(0) = 1 through two-photon interference.
//!
//! A strongly detuned pair is handled by the `distinguishable` flag,
//! which adds per-emitter intensity correlations incoherently; beats at
//! laboratory-scale splittings are far outside any detector bandwidth,
//! so simulating them coherently would only add stiffness. The
//! indistinguishable path treats the emitters as exactly degenerate and
//! correlates the summed field sum_i e^{i phi_i} sigma^-_i through the
//! regression theorem. Slow spectral wandering has no effect on either
//! limit and is ignored here.

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::{steady_state, two_time_correlator, DynamicsError};
use crate::operators::{
    build_liouvillian, hilbert_dim, ladder_operator, number_operator, validate_emitters,
    EmitterParams, Ladder, Op, OperatorError,
};
use crate::scattering::G2Result;

/// Largest ensemble the photoluminescence path accepts. The regression
/// solve is the same 4^N-dimensional machinery as the scattering side,
/// but the physical limits this module reproduces are stated for small
/// ensembles, so the cap is tighter.
pub const MAX_PL_EMITTERS: usize = 4;

#[derive(Debug, Error)]
pub enum EmissionError {
    #[error("photoluminescence supports 1 to {MAX_PL_EMITTERS} emitters, got {got}")]
    BadEmitterCount { got: usize },
    #[error("pump rate must be positive and finite, got {0}")]
    BadPumpRate(f64),
    #[error("got {got} detector phases for {want} emitters")]
    PhaseCountMismatch { got: usize, want: usize },
    #[error("tau grid must start at 0 for a correlation function")]
    TauGridStart,
    #[error("tau grid and g2 values differ in length, {tau} vs {values}")]
    DataLengthMismatch { tau: usize, values: usize },
    #[error("need at least {0} samples to fit a decay")]
    TooFewPoints(usize),
    #[error("data carry no antibunching dip to fit")]
    NonDippedData,
    #[error("decay fit did not converge")]
    FitDiverged,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Incoherent excitation shared by all emitters, plus how the detector
/// combines their emission.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpParams {
    /// Excitation rate per emitter in rad/ns; enters as a Lindblad
    /// jump sigma^+ at this rate.
    pub pump_rate: f64,
    /// Collection phase per emitter. Empty means all zero; otherwise
    /// one entry per emitter. Only the indistinguishable path is
    /// sensitive to them.
    pub detector_phases: Vec<f64>,
    /// Treat the emitters as mutually distinguishable sources: their
    /// intensity correlations add with all cross-coherences dropped.
    pub distinguishable: bool,
}

impl PumpParams {
    /// Indistinguishable collection with zero phases at the given pump
    /// rate.
    pub fn new(pump_rate: f64) -> Self {
        PumpParams {
            pump_rate,
            detector_phases: Vec::new(),
            distinguishable: false,
        }
    }

    fn validate(&self, n_emitters: usize) -> Result<(), EmissionError> {
        if !(self.pump_rate > 0.0 && self.pump_rate.is_finite()) {
            return Err(EmissionError::BadPumpRate(self.pump_rate));
        }
        if !self.detector_phases.is_empty() && self.detector_phases.len() != n_emitters {
            return Err(EmissionError::PhaseCountMismatch {
                got: self.detector_phases.len(),
                want: n_emitters,
            });
        }
        Ok(())
    }

    fn phase(&self, i: usize) -> f64 {
        self.detector_phases.get(i).copied().unwrap_or(0.0)
    }
}

/// Builds the pumped-emitter generator: no Hamiltonian (degenerate
/// rotating frame), radiative decay at gamma_tot_i, pump jumps
/// sigma^+_i, dephasing as usual.
fn pumped_liouvillian(
    emitters: &[EmitterParams],
    pump_rate: f64,
) -> Result<crate::operators::Liouvillian, EmissionError> {
    let n = emitters.len();
    let d = hilbert_dim(n);
    let mut jumps = Vec::with_capacity(2 * n);
    let mut dephasers = Vec::new();
    for (i, em) in emitters.iter().enumerate() {
        jumps.push((em.gamma_tot, ladder_operator(i, n, Ladder::Lower)?));
        jumps.push((pump_rate, ladder_operator(i, n, Ladder::Raise)?));
        if em.gamma_d > 0.0 {
            dephasers.push((2.0 * em.gamma_d, number_operator(i, n)?));
        }
    }
    let h = Op::zeros(d, d);
    Ok(build_liouvillian(&h, &jumps, &dephasers)?)
}

/// Unnormalized G2(tau) = <D+(0) D+D(tau) D(0)> and mean intensity
/// <D+D> for a detection operator on a pumped ensemble.
fn pumped_correlation(
    emitters: &[EmitterParams],
    pump_rate: f64,
    detection: &Op,
    tau_grid: &[f64],
) -> Result<(Vec<f64>, f64), EmissionError> {
    let l = pumped_liouvillian(emitters, pump_rate)?;
    let rho = steady_state(&l)?;
    let ddag = detection.adjoint();
    let occupancy = &ddag * detection;
    let series = two_time_correlator(&rho, &l, &ddag, &occupancy, detection, tau_grid)?;
    let numerator = series.values.iter().map(|v| v.re).collect();
    let intensity = rho.expectation(&occupancy).re;
    Ok((numerator, intensity))
}

/// Intensity correlation of the collected photoluminescence on a delay
/// grid (ns, starting at 0).
///
/// Indistinguishable collection correlates D = sum_i e^{i phi_i}
/// sigma^-_i with all emitters degenerate. Distinguishable collection
/// computes each emitter's own correlation and adds cross terms as
/// products of mean intensities,
///
///   g2(tau) = (sum_i G2_i(tau) + sum_{i != j} I_i I_j) / (sum_i I_i)^2,
///
/// exact for independently pumped, independently decaying sources.
pub fn pl_g2(
    emitters: &[EmitterParams],
    pump: &PumpParams,
    tau_grid: &[f64],
) -> Result<G2Result, EmissionError> {
    let n = emitters.len();
    if n == 0 || n > MAX_PL_EMITTERS {
        return Err(EmissionError::BadEmitterCount { got: n });
    }
    validate_emitters(emitters)?;
    pump.validate(n)?;
    if tau_grid.first() != Some(&0.0) {
        return Err(EmissionError::TauGridStart);
    }

    // drop detunings: the degenerate frame is the model here, and the
    // detuned regime is the distinguishable flag
    let degenerate: Vec<EmitterParams> = emitters
        .iter()
        .map(|em| {
            let mut e = em.clone();
            e.delta0 = 0.0;
            e
        })
        .collect();

    let g2: Vec<f64> = if pump.distinguishable {
        let mut numerators: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut intensities: Vec<f64> = Vec::with_capacity(n);
        for em in &degenerate {
            let solo = std::slice::from_ref(em);
            let detection = ladder_operator(0, 1, Ladder::Lower)?;
            let (num, int) = pumped_correlation(solo, pump.pump_rate, &detection, tau_grid)?;
            numerators.push(num);
            intensities.push(int);
        }
        let total: f64 = intensities.iter().sum();
        let cross = total * total - intensities.iter().map(|i| i * i).sum::<f64>();
        (0..tau_grid.len())
            .map(|k| {
                let own: f64 = numerators.iter().map(|num| num[k]).sum();
                (own + cross) / (total * total)
            })
            .collect()
    } else {
        let d = hilbert_dim(n);
        let mut detection = Op::zeros(d, d);
        for i in 0..n {
            let amp = Complex64::from_polar(1.0, pump.phase(i));
            detection += ladder_operator(i, n, Ladder::Lower)?.map(|z| z * amp);
        }
        let (num, int) = pumped_correlation(&degenerate, pump.pump_rate, &detection, tau_grid)?;
        num.iter().map(|v| v / (int * int)).collect()
    };

    let g2: Vec<f64> = g2
        .into_iter()
        .map(|v| if v < 0.0 && v > -1e-9 { 0.0 } else { v })
        .collect();
    Ok(G2Result {
        tau: tau_grid.to_vec(),
        g2_zero: g2[0],
        g2,
    })
}

/// Decay constant of an antibunching dip, from a least-squares fit of
///
///   g2(tau) = 1 - a exp(-k tau),  a in (0, 1],
///
/// returning k. For a single pumped two-level emitter k is the sum of
/// the radiative and pump rates, so at weak pumping it estimates
/// gamma_tot directly.
pub fn radiative_rate_from_g2(tau_grid: &[f64], g2_values: &[f64]) -> Result<f64, EmissionError> {
    if tau_grid.len() != g2_values.len() {
        return Err(EmissionError::DataLengthMismatch {
            tau: tau_grid.len(),
            values: g2_values.len(),
        });
    }
    if tau_grid.len() < 3 {
        return Err(EmissionError::TooFewPoints(3));
    }
    let grid_ok = tau_grid.iter().all(|t| t.is_finite() && *t >= 0.0)
        && tau_grid.windows(2).all(|w| w[1] > w[0]);
    if !grid_ok {
        return Err(EmissionError::TauGridStart);
    }
    if g2_values.iter().any(|v| !v.is_finite()) {
        return Err(EmissionError::NonDippedData);
    }
    let dip0 = 1.0 - g2_values[0];
    if dip0 < 1e-3 {
        return Err(EmissionError::NonDippedData);
    }

    // seed: amplitude from the first point, rate from a log-linear
    // regression of the dip over its resolvable part
    let mut a = dip0.clamp(1e-3, 1.0);
    let mut k = {
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        let mut m = 0usize;
        for (t, y) in tau_grid.iter().zip(g2_values.iter()) {
            let dip = 1.0 - y;
            if dip > 0.05 * dip0 {
                let ly = dip.ln();
                sx += t;
                sy += ly;
                sxx += t * t;
                sxy += t * ly;
                m += 1;
            }
        }
        let denom = m as f64 * sxx - sx * sx;
        if m >= 2 && denom > 0.0 {
            let slope = (m as f64 * sxy - sx * sy) / denom;
            (-slope).max(1e-6)
        } else {
            // dip vanishes within one sample; start from the grid scale
            1.0 / (tau_grid[1] - tau_grid[0])
        }
    };

    // Gauss-Newton with step halving on the residual norm
    let sse = |a: f64, k: f64| -> f64 {
        tau_grid
            .iter()
            .zip(g2_values.iter())
            .map(|(t, y)| {
                let r = 1.0 - a * (-k * t).exp() - y;
                r * r
            })
            .sum()
    };
    let mut best = sse(a, k);
    for _ in 0..100 {
        let mut jaa = 0.0;
        let mut jak = 0.0;
        let mut jkk = 0.0;
        let mut ga = 0.0;
        let mut gk = 0.0;
        for (t, y) in tau_grid.iter().zip(g2_values.iter()) {
            let e = (-k * t).exp();
            let r = 1.0 - a * e - y;
            let da = -e;
            let dk = a * t * e;
            jaa += da * da;
            jak += da * dk;
            jkk += dk * dk;
            ga += da * r;
            gk += dk * r;
        }
        let det = jaa * jkk - jak * jak;
        if det.abs() <= 1e-300 || det.is_nan() {
            break;
        }
        let mut step_a = -(jkk * ga - jak * gk) / det;
        let mut step_k = -(jaa * gk - jak * ga) / det;
        let mut improved = false;
        for _ in 0..12 {
            let na = (a + step_a).clamp(1e-9, 1.0);
            let nk = (k + step_k).max(1e-9);
            let s = sse(na, nk);
            if s < best {
                let done = (na - a).abs() < 1e-12 * (1.0 + a.abs())
                    && (nk - k).abs() < 1e-12 * (1.0 + k.abs());
                a = na;
                k = nk;
                best = s;
                improved = true;
                if done {
                    return Ok(k);
                }
                break;
            }
            step_a *= 0.5;
            step_k *= 0.5;
        }
        if !improved {
            break;
        }
    }
    if !(k.is_finite() && k > 0.0) {
        return Err(EmissionError::FitDiverged);
    }
    Ok(k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emitter(gamma: f64) -> EmitterParams {
        EmitterParams::new(0.5, gamma)
    }

    fn tau_grid(step: f64, count: usize) -> Vec<f64> {
        (0..count).map(|k| k as f64 * step).collect()
    }

    #[test]
    fn single_emitter_antibunches_with_known_recovery() {
        let taus = tau_grid(0.05, 241);
        let pump = PumpParams::new(0.02);
        let g = pl_g2(&[emitter(1.0)], &pump, &taus).unwrap();
        assert!(g.g2_zero.abs() < 1e-6, "got g2(0) = {}", g.g2_zero);
        // exact recovery law for a pumped two-level emitter
        let rate = 1.0 + 0.02;
        for (t, v) in g.tau.iter().zip(g.g2.iter()) {
            let expect = 1.0 - (-rate * t).exp();
            assert!(
                (v - expect).abs() < 1e-8,
                "tau {}: {} vs {}",
                t,
                v,
                expect
            );
        }
    }

    #[test]
    fn distinguishable_pair_halves_the_dip() {
        let taus = tau_grid(0.1, 121);
        let mut pump = PumpParams::new(0.05);
        pump.distinguishable = true;
        let g = pl_g2(&[emitter(1.0), emitter(1.0)], &pump, &taus).unwrap();
        assert!((g.g2_zero - 0.5).abs() < 1e-3, "got {}", g.g2_zero);
        assert!((g.g2.last().unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn indistinguishable_pair_restores_poissonian_zero_delay() {
        let taus = tau_grid(0.1, 121);
        let pump = PumpParams::new(0.05);
        let g = pl_g2(&[emitter(1.0), emitter(1.0)], &pump, &taus).unwrap();
        assert!((g.g2_zero - 1.0).abs() < 1e-9, "got {}", g.g2_zero);
        assert!((g.g2.last().unwrap() - 1.0).abs() < 0.02);
        // two-photon interference survives saturation at equal brightness
        let strong = PumpParams::new(5.0);
        let gs = pl_g2(&[emitter(1.0), emitter(1.0)], &strong, &taus).unwrap();
        assert!((gs.g2_zero - 1.0).abs() < 1e-9, "got {}", gs.g2_zero);
    }

    #[test]
    fn distinguishable_equal_brightness_matches_mixture_arithmetic() {
        // equal-brightness N-source mixture: g2(0) = 1 - 1/N
        let taus = tau_grid(0.1, 81);
        for n in [2usize, 3] {
            let emitters: Vec<EmitterParams> = (0..n).map(|_| emitter(1.0)).collect();
            let mut pump = PumpParams::new(0.08);
            pump.distinguishable = true;
            let g = pl_g2(&emitters, &pump, &taus).unwrap();
            let expect = 1.0 - 1.0 / n as f64;
            assert!(
                (g.g2_zero - expect).abs() < 1e-3,
                "N = {}: {} vs {}",
                n,
                g.g2_zero,
                expect
            );

            // brute-force incoherent arithmetic from the one-emitter curve
            let solo = pl_g2(&emitters[..1], &PumpParams::new(0.08), &taus).unwrap();
            let nn = n as f64;
            for (k, v) in g.g2.iter().enumerate() {
                let arith = (solo.g2[k] + (nn - 1.0)) / nn;
                assert!((v - arith).abs() < 1e-9, "tau index {}: {} vs {}", k, v, arith);
            }
        }
    }

    #[test]
    fn unequal_brightness_keeps_the_exact_zero_delay_ratio() {
        // at zero delay the interference term doubles the cross
        // product: indistinguishable 4 I1 I2 / (I1+I2)^2, mixture
        // 2 I1 I2 / (I1+I2)^2
        let taus = tau_grid(0.2, 41);
        let pair = vec![emitter(1.0), emitter(2.7)];
        let mut dist = PumpParams::new(0.06);
        dist.distinguishable = true;
        let gd = pl_g2(&pair, &dist, &taus).unwrap();
        let gi = pl_g2(&pair, &PumpParams::new(0.06), &taus).unwrap();
        assert!(
            (gi.g2_zero - 2.0 * gd.g2_zero).abs() < 1e-9,
            "{} vs 2x{}",
            gi.g2_zero,
            gd.g2_zero
        );
        assert!(gi.g2_zero <= 1.0 + 1e-12);
        assert!(gd.g2_zero <= 0.5 + 1e-12);
    }

    #[test]
    fn indistinguishable_never_below_distinguishable() {
        let taus = tau_grid(0.15, 61);
        let sets: Vec<Vec<EmitterParams>> = vec![
            vec![emitter(1.0), emitter(1.0)],
            vec![emitter(0.8), emitter(1.9)],
            vec![emitter(1.0), emitter(1.0), emitter(1.0)],
        ];
        for emitters in sets {
            let mut dist = PumpParams::new(0.1);
            dist.distinguishable = true;
            let gd = pl_g2(&emitters, &dist, &taus).unwrap();
            let gi = pl_g2(&emitters, &PumpParams::new(0.1), &taus).unwrap();
            assert!(
                gi.g2_zero >= gd.g2_zero - 1e-12,
                "{} < {}",
                gi.g2_zero,
                gd.g2_zero
            );
        }
    }

    #[test]
    fn degenerate_triple_superbunches() {
        // diagonal steady state gives g2(0) = 2(N-1)/N for N equal
        // indistinguishable sources; thermal-light value 2 is the
        // large-N limit
        let taus = tau_grid(0.2, 31);
        let triple = vec![emitter(1.0), emitter(1.0), emitter(1.0)];
        let g = pl_g2(&triple, &PumpParams::new(0.07), &taus).unwrap();
        assert!((g.g2_zero - 4.0 / 3.0).abs() < 1e-6, "got {}", g.g2_zero);
    }

    #[test]
    fn long_delay_renormalizes() {
        let taus = vec![0.0, 2.0, 5.0, 10.0];
        let g = pl_g2(&[emitter(1.0)], &PumpParams::new(0.3), &taus).unwrap();
        assert!((g.g2.last().unwrap() - 1.0).abs() < 0.02);
    }

    #[test]
    fn emitter_count_and_inputs_are_validated() {
        let taus = tau_grid(0.1, 11);
        let pump = PumpParams::new(0.1);
        assert!(matches!(
            pl_g2(&[], &pump, &taus),
            Err(EmissionError::BadEmitterCount { got: 0 })
        ));
        let five: Vec<EmitterParams> = (0..5).map(|_| emitter(1.0)).collect();
        assert!(matches!(
            pl_g2(&five, &pump, &taus),
            Err(EmissionError::BadEmitterCount { got: 5 })
        ));
        assert!(matches!(
            pl_g2(&[emitter(1.0)], &PumpParams::new(0.0), &taus),
            Err(EmissionError::BadPumpRate(_))
        ));
        let mut wrong = PumpParams::new(0.1);
        wrong.detector_phases = vec![0.0, 0.0, 0.0];
        assert!(matches!(
            pl_g2(&[emitter(1.0)], &wrong, &taus),
            Err(EmissionError::PhaseCountMismatch { got: 3, want: 1 })
        ));
        assert!(matches!(
            pl_g2(&[emitter(1.0)], &pump, &[0.5, 1.0]),
            Err(EmissionError::TauGridStart)
        ));
    }

    #[test]
    fn rate_fit_round_trips() {
        let taus = tau_grid(0.08, 120);
        let clean: Vec<f64> = taus.iter().map(|t| 1.0 - 0.97 * (-1.0 * t).exp()).collect();
        let k = radiative_rate_from_g2(&taus, &clean).unwrap();
        assert!((k - 1.0).abs() < 1e-6, "clean fit got {}", k);

        // deterministic ripple well above the fit tolerance
        let noisy: Vec<f64> = taus
            .iter()
            .zip(clean.iter())
            .map(|(t, y)| y + 0.01 * (17.3 * t).sin())
            .collect();
        let k = radiative_rate_from_g2(&taus, &noisy).unwrap();
        assert!((k - 1.0).abs() < 0.02, "noisy fit got {}", k);
    }

    #[test]
    fn rate_fit_rejects_flat_data() {
        let taus = tau_grid(0.1, 60);
        let flat = vec![1.0; taus.len()];
        assert!(matches!(
            radiative_rate_from_g2(&taus, &flat),
            Err(EmissionError::NonDippedData)
        ));
        assert!(matches!(
            radiative_rate_from_g2(&taus[..2], &[0.0, 0.5]),
            Err(EmissionError::TooFewPoints(3))
        ));
        assert!(matches!(
            radiative_rate_from_g2(&taus, &flat[..10]),
            Err(EmissionError::DataLengthMismatch { .. })
        ));
    }

    #[test]
    fn simulated_dip_recovers_the_radiative_rate() {
        // gamma_tot/2pi = 0.16 GHz, pumped weakly; the fitted constant
        // is gamma_tot + pump, within 10% of gamma_tot
        let gamma = crate::units::ghz_to_radns(0.16);
        let pump = PumpParams::new(0.03 * gamma);
        let t_max = 12.0 / gamma;
        let taus: Vec<f64> = (0..160).map(|k| k as f64 * t_max / 159.0).collect();
        let g = pl_g2(&[emitter(gamma)], &pump, &taus).unwrap();
        let k = radiative_rate_from_g2(&g.tau, &g.g2).unwrap();
        assert!(
            (k - gamma).abs() / gamma < 0.10,
            "recovered {} for gamma_tot {}",
            k,
            gamma
        );
    }

    #[test]
    fn detector_phases_do_not_move_the_equal_pair() {
        // zero-delay interference of an equal pair is phase-insensitive
        let taus = tau_grid(0.1, 41);
        let mut pump = PumpParams::new(0.05);
        pump.detector_phases = vec![0.0, 2.1];
        let g = pl_g2(&[emitter(1.0), emitter(1.0)], &pump, &taus).unwrap();
        assert!((g.g2_zero - 1.0).abs() < 1e-9, "got {}", g.g2_zero);
    }
}
