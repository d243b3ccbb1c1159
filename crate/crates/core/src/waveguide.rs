//! Desk-scale optics of the waveguide itself: group index from
//! Fabry-Perot fringe spacing, photon number inside the guide, laser
//! power to photon flux, and end-facet reflectivity from a white-light
//! transmission spectrum.
//!
//! These are classical, closed-form utilities; nothing here touches the
//! emitter model. Units are laboratory ones (nm, um, uW, photons/ns)
//! and each function converts internally.

use thiserror::Error;

/// Speed of light in um/ns (= 2.99792458e8 m/s).
const SPEED_OF_LIGHT_UM_PER_NS: f64 = 299_792.458;
/// Planck constant in J s.
const PLANCK_J_S: f64 = 6.626_070_15e-34;
/// Speed of light in m/s.
const SPEED_OF_LIGHT_M_PER_S: f64 = 2.997_924_58e8;

#[derive(Debug, Error)]
pub enum WaveguideError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("group index must be at least 1, got {0}")]
    BadGroupIndex(f64),
    #[error("reflectivity must lie in [0, 1), got {0}")]
    BadReflectivity(f64),
    #[error("coupling efficiency must lie in (0, 1], got {0}")]
    BadCoupling(f64),
    #[error("spectrum must be finite, non-negative, with strictly increasing wavelengths")]
    BadSpectrum,
    #[error("too few fringes: {0}")]
    TooFewFringes(&'static str),
    #[error("fringe visibility {0} exceeds 1")]
    VisibilityOutOfRange(f64),
}

fn require_positive(name: &'static str, value: f64) -> Result<f64, WaveguideError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(WaveguideError::NonPositive { name, value })
    }
}

/// Static description of one waveguide device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideGeometry {
    /// Physical length in um.
    pub length_um: f64,
    /// Operating wavelength in nm.
    pub lambda_nm: f64,
    /// Group index of the guided mode.
    pub group_index: f64,
    /// End-facet power reflectivity, in [0, 1).
    pub reflectivity: f64,
    /// Fraction of the incident flux coupled into the guide, in (0, 1].
    pub coupling_efficiency: f64,
}

impl WaveguideGeometry {
    pub fn new(
        length_um: f64,
        lambda_nm: f64,
        group_index: f64,
        reflectivity: f64,
        coupling_efficiency: f64,
    ) -> Result<Self, WaveguideError> {
        require_positive("length", length_um)?;
        require_positive("wavelength", lambda_nm)?;
        if !(group_index >= 1.0 && group_index.is_finite()) {
            return Err(WaveguideError::BadGroupIndex(group_index));
        }
        if !((0.0..1.0).contains(&reflectivity) && reflectivity.is_finite()) {
            return Err(WaveguideError::BadReflectivity(reflectivity));
        }
        if !(coupling_efficiency > 0.0 && coupling_efficiency <= 1.0) {
            return Err(WaveguideError::BadCoupling(coupling_efficiency));
        }
        Ok(WaveguideGeometry {
            length_um,
            lambda_nm,
            group_index,
            reflectivity,
            coupling_efficiency,
        })
    }

    /// Photon dwell time L n_g / (c (1 - R)) in ns, counting the
    /// end-facet recycling.
    pub fn photon_lifetime_ns(&self) -> f64 {
        self.length_um * self.group_index
            / (SPEED_OF_LIGHT_UM_PER_NS * (1.0 - self.reflectivity))
    }

    /// Mean photon number inside the guide at the given incident flux
    /// (photons/ns).
    pub fn mean_photons(&self, flux_per_ns: f64) -> Result<f64, WaveguideError> {
        mean_photon_number(
            self.coupling_efficiency,
            flux_per_ns,
            self.length_um,
            self.group_index,
            self.reflectivity,
        )
    }
}

/// Group index from the Fabry-Perot fringe spacing of the device,
///
///   n_g = lambda^2 / (2 L delta_lambda),
///
/// with the wavelength and fringe spacing in nm and the length in um.
pub fn group_index(
    lambda_nm: f64,
    length_um: f64,
    delta_lambda_nm: f64,
) -> Result<f64, WaveguideError> {
    require_positive("wavelength", lambda_nm)?;
    require_positive("length", length_um)?;
    require_positive("fringe spacing", delta_lambda_nm)?;
    let length_nm = length_um * 1e3;
    Ok(lambda_nm * lambda_nm / (2.0 * length_nm * delta_lambda_nm))
}

/// Mean photon number inside the guide,
///
///   <n> = eta_c F tau_ph = eta_c F L n_g / (c (1 - R)),
///
/// for an incident flux F in photons/ns and a length in um.
pub fn mean_photon_number(
    eta_c: f64,
    flux_per_ns: f64,
    length_um: f64,
    n_g: f64,
    reflectivity: f64,
) -> Result<f64, WaveguideError> {
    if !(eta_c > 0.0 && eta_c <= 1.0) {
        return Err(WaveguideError::BadCoupling(eta_c));
    }
    if !(flux_per_ns >= 0.0 && flux_per_ns.is_finite()) {
        return Err(WaveguideError::NonPositive {
            name: "flux",
            value: flux_per_ns,
        });
    }
    require_positive("length", length_um)?;
    if !(n_g >= 1.0 && n_g.is_finite()) {
        return Err(WaveguideError::BadGroupIndex(n_g));
    }
    if !((0.0..1.0).contains(&reflectivity) && reflectivity.is_finite()) {
        return Err(WaveguideError::BadReflectivity(reflectivity));
    }
    let tau_ph = length_um * n_g / (SPEED_OF_LIGHT_UM_PER_NS * (1.0 - reflectivity));
    Ok(eta_c * flux_per_ns * tau_ph)
}

/// Photon flux of a laser beam, F = P lambda / (h c), in photons/ns
/// for a power in uW and a wavelength in nm.
pub fn power_to_flux(power_uw: f64, lambda_nm: f64) -> Result<f64, WaveguideError> {
    require_positive("power", power_uw)?;
    require_positive("wavelength", lambda_nm)?;
    let power_j_per_ns = power_uw * 1e-6 * 1e-9;
    let photon_energy_j = PLANCK_J_S * SPEED_OF_LIGHT_M_PER_S / (lambda_nm * 1e-9);
    Ok(power_j_per_ns / photon_energy_j)
}

/// What the white-light fringe analysis extracts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeAnalysis {
    /// Fringe spacing in nm.
    pub delta_lambda_nm: f64,
    /// End-facet reflectivity from the mean visibility through
    /// V = 2R/(1+R^2).
    pub reflectivity: f64,
    /// Mean peak-to-trough fringe visibility.
    pub visibility: f64,
    /// Number of whole fringe periods the spectrum spans.
    pub n_periods: usize,
}

/// Fringe spacing and end-facet reflectivity from a white-light
/// transmission spectrum, given as (wavelength nm, intensity) pairs on
/// an approximately uniform grid.
///
/// The fringe period comes from the dominant Fourier component of the
/// mean-subtracted, Hann-windowed intensity (with parabolic refinement
/// of the peak bin); the visibility from per-period intensity extrema
/// after subtracting a moving-median baseline whose window is five
/// estimated periods; and the reflectivity by inverting the two-beam
/// relation V = 2R/(1+R^2) on [0, 1).
pub fn fringe_analysis(white_light: &[(f64, f64)]) -> Result<FringeAnalysis, WaveguideError> {
    let n = white_light.len();
    if n < 32 {
        return Err(WaveguideError::TooFewFringes(
            "need at least 32 spectral points",
        ));
    }
    let ok = white_light.iter().all(|(w, i)| {
        w.is_finite() && i.is_finite() && *i >= 0.0
    }) && white_light.windows(2).all(|p| p[1].0 > p[0].0);
    if !ok {
        return Err(WaveguideError::BadSpectrum);
    }

    // resample onto a uniform wavelength grid so the Fourier step is
    // well defined even for slightly irregular spectrometers
    let lo = white_light[0].0;
    let hi = white_light[n - 1].0;
    let step = (hi - lo) / (n - 1) as f64;
    let mut y = Vec::with_capacity(n);
    {
        let mut j = 0usize;
        for k in 0..n {
            let x = lo + step * k as f64;
            while j + 2 < n && white_light[j + 1].0 < x {
                j += 1;
            }
            let (x0, y0) = white_light[j];
            let (x1, y1) = white_light[j + 1];
            let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
            y.push(y0 + t * (y1 - y0));
        }
    }

    // dominant spatial frequency of the intensity after removing its
    // best-fit line, so a sloped lamp envelope cannot masquerade as a
    // long-period fringe
    let mean = y.iter().sum::<f64>() / n as f64;
    let ac: Vec<f64> = {
        let kc = (n as f64 - 1.0) / 2.0;
        let mut skk = 0.0;
        let mut sky = 0.0;
        for (k, v) in y.iter().enumerate() {
            let dk = k as f64 - kc;
            skk += dk * dk;
            sky += dk * (v - mean);
        }
        let slope = if skk > 0.0 { sky / skk } else { 0.0 };
        y.iter()
            .enumerate()
            .map(|(k, v)| v - mean - slope * (k as f64 - kc))
            .collect()
    };
    let ac_power: f64 = ac.iter().map(|v| v * v).sum();
    if ac_power <= 1e-20 * (1.0 + mean * mean) * n as f64 {
        return Err(WaveguideError::TooFewFringes("no modulation"));
    }
    let windowed: Vec<f64> = ac
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let w = 0.5
                - 0.5 * (2.0 * std::f64::consts::PI * k as f64 / (n - 1) as f64).cos();
            v * w
        })
        .collect();
    let half = n / 2;
    let mut power = vec![0.0f64; half + 1];
    for (m, p) in power.iter_mut().enumerate().skip(1) {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, v) in windowed.iter().enumerate() {
            let ph = -2.0 * std::f64::consts::PI * (m * k) as f64 / n as f64;
            re += v * ph.cos();
            im += v * ph.sin();
        }
        *p = re * re + im * im;
    }
    let m_peak = power
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(m, _)| m)
        .unwrap();
    if m_peak < 3 {
        return Err(WaveguideError::TooFewFringes(
            "spectrum spans fewer than 3 fringe periods",
        ));
    }
    // parabolic refinement on log power around the peak bin
    let m_refined = if m_peak < half && power[m_peak - 1] > 0.0 && power[m_peak + 1] > 0.0 {
        let la = power[m_peak - 1].ln();
        let lb = power[m_peak].ln();
        let lc = power[m_peak + 1].ln();
        let denom = la - 2.0 * lb + lc;
        if denom < 0.0 {
            m_peak as f64 + 0.5 * (la - lc) / denom
        } else {
            m_peak as f64
        }
    } else {
        m_peak as f64
    };
    let delta_lambda = n as f64 * step / m_refined;
    let period_samples = (n as f64 / m_refined).round().max(2.0) as usize;

    // moving-median baseline over five periods, then per-period
    // extrema of the raw intensity at detrended extremum positions
    let w = (5 * period_samples).min(n) | 1;
    let hw = w / 2;
    let mut scratch = Vec::with_capacity(w);
    let baseline: Vec<f64> = (0..n)
        .map(|k| {
            let a = k.saturating_sub(hw);
            let b = (k + hw + 1).min(n);
            scratch.clear();
            scratch.extend_from_slice(&y[a..b]);
            scratch.sort_by(f64::total_cmp);
            scratch[scratch.len() / 2]
        })
        .collect();
    let detrended: Vec<f64> = y.iter().zip(baseline.iter()).map(|(a, b)| a - b).collect();

    let n_periods = n / period_samples;
    let mut visibilities = Vec::with_capacity(n_periods);
    for seg in 0..n_periods {
        let a = seg * period_samples;
        let b = ((seg + 1) * period_samples).min(n);
        if b - a < 3 {
            continue;
        }
        let mut k_hi = a;
        let mut k_lo = a;
        for k in a..b {
            if detrended[k] > detrended[k_hi] {
                k_hi = k;
            }
            if detrended[k] < detrended[k_lo] {
                k_lo = k;
            }
        }
        let peak = y[k_hi];
        let trough = y[k_lo];
        if peak + trough > 0.0 {
            visibilities.push((peak - trough) / (peak + trough));
        }
    }
    if visibilities.is_empty() {
        return Err(WaveguideError::TooFewFringes(
            "no complete fringe period resolved",
        ));
    }
    let visibility = visibilities.iter().sum::<f64>() / visibilities.len() as f64;
    if visibility > 1.0 {
        return Err(WaveguideError::VisibilityOutOfRange(visibility));
    }
    // V = 2R/(1+R^2) inverted on [0, 1)
    let reflectivity = if visibility <= 0.0 {
        0.0
    } else {
        (1.0 - (1.0 - visibility * visibility).sqrt()) / visibility
    };
    Ok(FringeAnalysis {
        delta_lambda_nm: delta_lambda,
        reflectivity,
        visibility,
        n_periods,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Low-finesse Fabry-Perot transmission with peak-trough
    /// visibility exactly 2R/(1+R^2).
    fn airy_spectrum(
        lambda_lo: f64,
        lambda_hi: f64,
        n: usize,
        delta_lambda: f64,
        r: f64,
        phase: f64,
    ) -> Vec<(f64, f64)> {
        (0..n)
            .map(|k| {
                let lam = lambda_lo + (lambda_hi - lambda_lo) * k as f64 / (n - 1) as f64;
                let delta = 2.0 * std::f64::consts::PI * lam / delta_lambda + phase;
                let t = (1.0 - r) * (1.0 - r) / (1.0 - 2.0 * r * delta.cos() + r * r);
                (lam, t)
            })
            .collect()
    }

    #[test]
    fn group_index_matches_the_device_numbers() {
        let n_g = group_index(917.0, 15.0, 3.74).unwrap();
        assert!((n_g - 7.5).abs() < 0.1, "got {}", n_g);
        // formula identities
        let half = group_index(917.0, 15.0, 7.48).unwrap();
        assert!((n_g - 2.0 * half).abs() < 1e-12);
        let unity = group_index(917.0, 15.0, 917.0 * 917.0 / (2.0 * 15.0e3)).unwrap();
        assert!((unity - 1.0).abs() < 1e-12);
        assert!(group_index(0.0, 15.0, 3.74).is_err());
        assert!(group_index(917.0, -1.0, 3.74).is_err());
    }

    #[test]
    fn photon_number_matches_the_quoted_occupancy() {
        let flux = power_to_flux(1.0, 917.0).unwrap();
        let n = mean_photon_number(1.0, flux, 15.0, 7.5, 0.17).unwrap();
        assert!(
            (n - 1.9).abs() / 1.9 < 0.2,
            "expected about 1.9 photons, got {}",
            n
        );
        assert_eq!(mean_photon_number(1.0, 0.0, 15.0, 7.5, 0.17).unwrap(), 0.0);
        // linear in flux and group index
        let n2 = mean_photon_number(1.0, 2.0 * flux, 15.0, 7.5, 0.17).unwrap();
        assert!((n2 - 2.0 * n).abs() < 1e-9 * n);
        let n3 = mean_photon_number(1.0, flux, 15.0, 15.0, 0.17).unwrap();
        assert!((n3 - 2.0 * n).abs() < 1e-9 * n);
        assert!(mean_photon_number(1.0, flux, 15.0, 7.5, 1.0).is_err());
        assert!(mean_photon_number(0.0, flux, 15.0, 7.5, 0.17).is_err());
    }

    #[test]
    fn laser_power_converts_to_flux() {
        let f = power_to_flux(1.0, 917.0).unwrap();
        assert!((f - 4.6e3).abs() / 4.6e3 < 0.01, "got {}", f);
        // photon energy check: hc/lambda at 917 nm is 2.166e-19 J
        let e = 1.0 * 1e-6 * 1e-9 / f;
        assert!((e - 2.166e-19).abs() / 2.166e-19 < 1e-3);
        let f2 = power_to_flux(1.0, 1834.0).unwrap();
        assert!((f2 - 2.0 * f).abs() < 1e-9 * f);
        let tiny = power_to_flux(1e-12, 917.0).unwrap();
        assert!((tiny - 1e-12 * f).abs() < 1e-20 * f);
        assert!(power_to_flux(0.0, 917.0).is_err());
        assert!(power_to_flux(1.0, 0.0).is_err());
    }

    #[test]
    fn geometry_validates_and_derives_lifetime() {
        let g = WaveguideGeometry::new(15.0, 917.0, 7.5, 0.17, 1.0).unwrap();
        let tau = g.photon_lifetime_ns();
        assert!((tau - 15.0 * 7.5 / (299_792.458 * 0.83)).abs() < 1e-12);
        let flux = power_to_flux(1.0, 917.0).unwrap();
        let a = g.mean_photons(flux).unwrap();
        let b = mean_photon_number(1.0, flux, 15.0, 7.5, 0.17).unwrap();
        assert_eq!(a, b);
        assert!(WaveguideGeometry::new(15.0, 917.0, 0.5, 0.17, 1.0).is_err());
        assert!(WaveguideGeometry::new(15.0, 917.0, 7.5, 1.0, 1.0).is_err());
        assert!(WaveguideGeometry::new(15.0, 917.0, 7.5, 0.17, 0.0).is_err());
        assert!(WaveguideGeometry::new(-15.0, 917.0, 7.5, 0.17, 1.0).is_err());
    }

    #[test]
    fn fringes_round_trip_spacing_and_reflectivity() {
        let spec = airy_spectrum(902.0, 932.0, 600, 3.74, 0.17, 0.4);
        let fa = fringe_analysis(&spec).unwrap();
        assert!(
            (fa.delta_lambda_nm - 3.74).abs() < 0.05,
            "spacing {}",
            fa.delta_lambda_nm
        );
        assert!(
            (fa.reflectivity - 0.17).abs() < 0.01,
            "reflectivity {}",
            fa.reflectivity
        );
        assert!(fa.n_periods >= 7);
    }

    #[test]
    fn fringe_spacing_feeds_the_group_index() {
        // generate from a known group index, recover it end to end
        let n_g_true = 7.5;
        let lam = 917.0;
        let length = 15.0;
        let dl = lam * lam / (2.0 * length * 1e3 * n_g_true);
        let spec = airy_spectrum(lam - 15.0, lam + 15.0, 700, dl, 0.17, 1.2);
        let fa = fringe_analysis(&spec).unwrap();
        let n_g = group_index(lam, length, fa.delta_lambda_nm).unwrap();
        assert!(
            (n_g - n_g_true).abs() / n_g_true < 0.02,
            "recovered {}",
            n_g
        );
    }

    #[test]
    fn constant_spectrum_has_no_fringes() {
        let flat: Vec<(f64, f64)> = (0..200)
            .map(|k| (900.0 + 0.1 * k as f64, 1.0))
            .collect();
        assert!(matches!(
            fringe_analysis(&flat),
            Err(WaveguideError::TooFewFringes(_))
        ));
        let short: Vec<(f64, f64)> = flat[..10].to_vec();
        assert!(matches!(
            fringe_analysis(&short),
            Err(WaveguideError::TooFewFringes(_))
        ));
    }

    #[test]
    fn under_three_periods_is_rejected() {
        let spec = airy_spectrum(902.0, 932.0, 400, 20.0, 0.17, 0.0);
        assert!(matches!(
            fringe_analysis(&spec),
            Err(WaveguideError::TooFewFringes(_))
        ));
    }

    #[test]
    fn mirror_free_spectrum_reports_negligible_reflectivity() {
        // smooth lamp envelope plus deterministic high-order ripple
        // standing in for noise; no fringe structure
        let n = 512;
        let spec: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let lam = 900.0 + 30.0 * k as f64 / (n - 1) as f64;
                let x = k as f64 / n as f64;
                let mut ripple = 0.0;
                for m in 6..=24 {
                    let a = 1e-3 / m as f64;
                    ripple += a * (2.0 * std::f64::consts::PI * (m as f64) * x
                        + 0.7 * m as f64)
                        .cos();
                }
                (lam, 1.0 + 0.05 * (x - 0.5) + ripple)
            })
            .collect();
        let fa = fringe_analysis(&spec).unwrap();
        assert!(
            fa.reflectivity < 0.02,
            "expected near-zero reflectivity, got {}",
            fa.reflectivity
        );
    }

    #[test]
    fn bad_spectra_are_rejected() {
        let mut spec = airy_spectrum(902.0, 932.0, 100, 3.74, 0.17, 0.0);
        spec[50].1 = f64::NAN;
        assert!(matches!(
            fringe_analysis(&spec),
            Err(WaveguideError::BadSpectrum)
        ));
        let mut spec = airy_spectrum(902.0, 932.0, 100, 3.74, 0.17, 0.0);
        spec[50].0 = spec[49].0;
        assert!(matches!(
            fringe_analysis(&spec),
            Err(WaveguideError::BadSpectrum)
        ));
        let mut spec = airy_spectrum(902.0, 932.0, 100, 3.74, 0.17, 0.0);
        spec[3].1 = -0.2;
        assert!(matches!(
            fringe_analysis(&spec),
            Err(WaveguideError::BadSpectrum)
        ));
    }

    #[test]
    fn unit_round_trips_are_exact() {
        // nm <-> m and uW <-> W factors used by the converters
        let lambda_nm: f64 = 917.0;
        let lambda_m = lambda_nm * 1e-9;
        assert!((lambda_m * 1e9 - lambda_nm).abs() < 1e-12 * lambda_nm);
        let p_uw: f64 = 2.5;
        let p_w = p_uw * 1e-6;
        assert!((p_w * 1e6 - p_uw).abs() < 1e-12 * p_uw);
        // c expressed in um/ns equals c in m/s scaled by 1e-3
        assert!((SPEED_OF_LIGHT_UM_PER_NS - SPEED_OF_LIGHT_M_PER_S * 1e-3).abs() < 1e-9);
    }
}
