//! Physical-layer formulas and the signal-level slot simulator.
//!
//! Covers the free-space path loss, the Neyman-Pearson threshold detector
//! with its mis-detection / false-alarm probabilities, the energy densities
//! `phi_s` (beam-alignment) and `phi_d` (data), the Rayleigh-fading outage
//! probability, and a per-slot matched-filter simulator used to validate the
//! analytic error model.
//!
//! All functions are stateless; the slot simulator takes an explicit RNG so
//! parallel trials stay deterministic.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::Scalar;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Link-level parameters shared by all users.
#[derive(Debug, Clone, Copy)]
pub struct PhyParams<F> {
    /// One-sided noise PSD (W/Hz).
    pub n0: F,
    /// System bandwidth (Hz).
    pub w_tot: F,
    /// Symbol duration (s).
    pub t_sy: F,
    /// Carrier frequency (Hz).
    pub carrier_freq: F,
    /// Coverage radius (m).
    pub d_max: F,
    /// Pilot energy `||s_k||^2` (unit-power symbol count).
    pub pilot_energy: F,
    /// Target per-slot detection error probability.
    pub p_e: F,
    /// Data outage target `rho`.
    pub rho: F,
}

impl<F: Scalar> PhyParams<F> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n0: F,
        w_tot: F,
        t_sy: F,
        carrier_freq: F,
        d_max: F,
        pilot_energy: F,
        p_e: F,
        rho: F,
    ) -> Result<Self> {
        for (name, v) in [
            ("n0", n0),
            ("w_tot", w_tot),
            ("t_sy", t_sy),
            ("carrier_freq", carrier_freq),
            ("d_max", d_max),
            ("pilot_energy", pilot_energy),
        ] {
            if !(v > F::zero()) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if !(p_e > F::zero() && p_e < F::one()) {
            return Err(Error::invalid("p_e must lie in (0, 1)"));
        }
        if !(rho > F::zero() && rho < F::one()) {
            return Err(Error::invalid("rho must lie in (0, 1)"));
        }
        Ok(PhyParams {
            n0,
            w_tot,
            t_sy,
            carrier_freq,
            d_max,
            pilot_energy,
            p_e,
            rho,
        })
    }
}

/// Per-user configuration for the data phase.
#[derive(Debug, Clone, Copy)]
pub struct UserConfig<F> {
    /// BS-UE distance (m), at most the coverage radius.
    pub distance: F,
    /// Minimum rate over the frame (bits/s).
    pub r_min: F,
    /// TDMA share `tau_i = T_d / M` (s).
    pub tau: F,
}

impl<F: Scalar> UserConfig<F> {
    pub fn new(distance: F, r_min: F, tau: F, params: &PhyParams<F>) -> Result<Self> {
        if !(distance > F::zero()) || distance > params.d_max {
            return Err(Error::invalid("distance must lie in (0, d_max]"));
        }
        if r_min < F::zero() {
            return Err(Error::invalid("r_min must be non-negative"));
        }
        if !(tau > F::zero()) {
            return Err(Error::invalid("tau must be positive"));
        }
        Ok(UserConfig {
            distance,
            r_min,
            tau,
        })
    }
}

/// Free-space path loss `(4 pi d f_c / c)^2`.
pub fn pathloss<F: Scalar>(d: F, params: &PhyParams<F>) -> F {
    let x = F::of(4.0) * F::PI() * d * params.carrier_freq / F::of(SPEED_OF_LIGHT);
    x * x
}

/// Detector threshold `tau_th = -ln(p_e)`, so that `p_fa = p_e`.
pub fn detector_threshold<F: Scalar>(p_e: F) -> Result<F> {
    if !(p_e > F::zero() && p_e < F::one()) {
        return Err(Error::invalid("p_e must lie in (0, 1)"));
    }
    Ok(-p_e.ln())
}

/// Beam-alignment energy density guaranteeing the detection targets at the
/// cell edge:
/// `phi_s = (N0 W T_sy / pi^2) [ln(p_e)/ln(1-p_e) - 1] l(d_max)`.
pub fn phi_s<F: Scalar>(params: &PhyParams<F>) -> F {
    let bracket = params.p_e.ln() / (F::one() - params.p_e).ln() - F::one();
    params.n0 * params.w_tot * params.t_sy / F::pi_squared()
        * bracket
        * pathloss(params.d_max, params)
}

/// Mis-detection and false-alarm probabilities of the threshold detector for
/// a slot with beam measure `|B|`, transmit power `P_k`, at distance `d`.
pub fn detection_error_probs<F: Scalar>(
    beam_measure: F,
    p_k: F,
    d: F,
    params: &PhyParams<F>,
) -> Result<(F, F)> {
    if !(beam_measure > F::zero()) {
        return Err(Error::invalid("beam measure must be positive"));
    }
    if p_k < F::zero() {
        return Err(Error::invalid("power must be non-negative"));
    }
    let tau_th = detector_threshold(params.p_e)?;
    let noise = beam_measure * params.n0 * params.w_tot * pathloss(d, params);
    let p_md =
        F::one() - (-tau_th * noise / (noise + p_k * F::pi_squared() * params.pilot_energy)).exp();
    let p_fa = (-tau_th).exp();
    Ok((p_md, p_fa))
}

/// Slot power meeting the mis-detection constraint with equality at the
/// coverage edge `d = d_max`:
/// `P_k = (N0 W l(d_max) / (pi^2 ||s||^2)) [ln(p_e)/ln(1-p_e) - 1] |B_k|`.
pub fn alignment_power<F: Scalar>(beam_measure: F, params: &PhyParams<F>) -> F {
    let bracket = params.p_e.ln() / (F::one() - params.p_e).ln() - F::one();
    params.n0 * params.w_tot * pathloss(params.d_max, params)
        / (F::pi_squared() * params.pilot_energy)
        * bracket
        * beam_measure
}

/// Minimum data energy density meeting the user's rate with outage `rho`:
/// `phi_d = tau l(d) N0 W [2^(T_fr R_min / (tau W)) - 1] / (pi^2 ln(1/(1-rho)))`.
pub fn phi_d<F: Scalar>(user: &UserConfig<F>, params: &PhyParams<F>, t_fr: F) -> Result<F> {
    if !(user.tau > F::zero()) {
        return Err(Error::invalid("tau must be positive"));
    }
    let bracket = (t_fr * user.r_min / (user.tau * params.w_tot)).exp2() - F::one();
    let denom = F::pi_squared() * (F::one() / (F::one() - params.rho)).ln();
    Ok(user.tau * pathloss(user.distance, params) * params.n0 * params.w_tot * bracket / denom)
}

/// Rayleigh-fading outage probability of a fixed-rate transmission:
/// `1 - exp(-(2^(R/W) - 1) l(d) N0 W |B| / (P pi^2))`.
///
/// An empty beam (or zero power at positive rate) delivers no energy and
/// counts as certain outage.
pub fn outage_probability<F: Scalar>(
    p: F,
    r: F,
    beam_measure: F,
    d: F,
    params: &PhyParams<F>,
) -> F {
    if r <= F::zero() {
        return F::zero();
    }
    if !(p > F::zero()) || !(beam_measure > F::zero()) {
        return F::one();
    }
    let snr_factor = (r / params.w_tot).exp2() - F::one();
    let exponent = snr_factor * pathloss(d, params) * params.n0 * params.w_tot * beam_measure
        / (p * F::pi_squared());
    F::one() - (-exponent).exp()
}

/// Matched-filter statistic `|s^H y|^2 / (N0 W ||s||^2)` for one slot.
///
/// Draws the Rayleigh channel and noise explicitly; under H0 the statistic
/// is unit-mean exponential. Normals are drawn in f64 so the stream is
/// scalar-type independent.
pub fn slot_statistic<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    aligned: bool,
    p_k: F,
    beam_measure: F,
    d: F,
    params: &PhyParams<F>,
) -> F {
    let pilot = params.pilot_energy;
    let noise_var = params.n0 * params.w_tot * pilot; // Var[s^H n]
    let half = F::of(0.5);
    let draw = |rng: &mut R| -> F {
        F::of(<StandardNormal as Distribution<f64>>::sample(
            &StandardNormal,
            rng,
        ))
    };
    let z_scale = (noise_var * half).sqrt();
    let mut re = draw(rng) * z_scale;
    let mut im = draw(rng) * z_scale;
    if aligned && p_k > F::zero() && beam_measure > F::zero() {
        // h ~ CN(0, 1/l(d)); s^H y gains h sqrt(P pi^2 / |B|) ||s||^2.
        let h_scale = (half / pathloss(d, params)).sqrt();
        let amp = (p_k * F::pi_squared() / beam_measure).sqrt() * pilot;
        re += draw(rng) * h_scale * amp;
        im += draw(rng) * h_scale * amp;
    }
    (re * re + im * im) / noise_var
}

/// One detector decision: `true` when H1 (alignment) is declared.
pub fn signal_level_slot<F: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    aligned: bool,
    p_k: F,
    beam_measure: F,
    d: F,
    params: &PhyParams<F>,
) -> bool {
    let tau_th = -params.p_e.ln();
    slot_statistic(rng, aligned, p_k, beam_measure, d, params) >= tau_th
}
