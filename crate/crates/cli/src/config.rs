//! Strict JSON run configuration.
//!
//! All quantities cross the I/O boundary in the units named by their keys;
//! dBm values are converted to SI here and nowhere else.

use serde::Deserialize;

use beamalign::codebook::CodebookKind;
use beamalign::phy::PhyParams;
use beamalign::sim::{ErrorMode, FrameConfig, Scenario};
use beamalign::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSection {
    pub t_fr_s: f64,
    pub slot_s: f64,
    pub t_fb_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhySection {
    pub n0_dbm_per_hz: f64,
    pub w_tot_hz: f64,
    pub t_sy_s: f64,
    pub carrier_freq_hz: f64,
    pub d_max_m: f64,
    pub pilot_symbols: f64,
    pub p_e: f64,
    pub rho: f64,
    /// Beam-alignment energy density override (dBm); when absent it is
    /// derived from the detection constraint.
    #[serde(default)]
    pub phi_s_dbm: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Scheme labels: "hamming74", "exhaustiveN", "uncodedN".
    pub codebooks: Vec<String>,
    pub distances_m: Vec<f64>,
    pub frame: FrameSection,
    pub phy: PhySection,
    pub rate_grid_bps: Vec<f64>,
    /// "analytic-injection" (default) or "signal-level".
    #[serde(default)]
    pub error_mode: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub trials: u64,
    /// Direct water-filling kappa for `optimize`; when absent kappa is
    /// derived from the first rate-grid point.
    #[serde(default)]
    pub kappa: Option<f64>,
    /// Slot count for `validate-detector` (default 100000).
    #[serde(default)]
    pub slots: Option<u64>,
    /// Slot power override (W) for `validate-detector`.
    #[serde(default)]
    pub p_k_override_w: Option<f64>,
}

pub fn parse_codebook(label: &str) -> Result<CodebookKind> {
    if label == "hamming74" {
        return Ok(CodebookKind::Hamming74);
    }
    if let Some(l) = label.strip_prefix("exhaustive") {
        let l: u32 = l
            .parse()
            .map_err(|_| Error::invalid(format!("bad codebook label {label:?}")))?;
        return Ok(CodebookKind::Exhaustive(l));
    }
    if let Some(l) = label.strip_prefix("uncoded") {
        let l: u32 = l
            .parse()
            .map_err(|_| Error::invalid(format!("bad codebook label {label:?}")))?;
        return Ok(CodebookKind::Uncoded(l));
    }
    Err(Error::invalid(format!(
        "unknown codebook {label:?}; expected hamming74, exhaustiveN or uncodedN"
    )))
}

impl RunConfig {
    pub fn error_mode(&self) -> Result<ErrorMode> {
        match self.error_mode.as_deref() {
            None | Some("analytic-injection") => Ok(ErrorMode::AnalyticInjection),
            Some("signal-level") => Ok(ErrorMode::SignalLevel),
            Some(other) => Err(Error::invalid(format!(
                "unknown error_mode {other:?}; expected analytic-injection or signal-level"
            ))),
        }
    }

    pub fn phy_params(&self) -> Result<PhyParams<f64>> {
        PhyParams::new(
            dbm_to_watts(self.phy.n0_dbm_per_hz),
            self.phy.w_tot_hz,
            self.phy.t_sy_s,
            self.phy.carrier_freq_hz,
            self.phy.d_max_m,
            self.phy.pilot_symbols,
            self.phy.p_e,
            self.phy.rho,
        )
    }

    pub fn codebook_kinds(&self) -> Result<Vec<CodebookKind>> {
        if self.codebooks.is_empty() {
            return Err(Error::invalid("at least one codebook is required"));
        }
        self.codebooks.iter().map(|s| parse_codebook(s)).collect()
    }

    /// One validated scenario per configured codebook.
    pub fn scenarios(&self, seed_override: Option<u64>) -> Result<Vec<(String, Scenario)>> {
        let phy = self.phy_params()?;
        let error_mode = self.error_mode()?;
        let seed = seed_override.or(self.seed).unwrap_or(0);
        self.codebook_kinds()?
            .into_iter()
            .zip(&self.codebooks)
            .map(|(kind, label)| {
                let scenario = Scenario {
                    codebook_kind: kind,
                    distances: self.distances_m.clone(),
                    frame: FrameConfig {
                        t_fr: self.frame.t_fr_s,
                        slot: self.frame.slot_s,
                        t_fb: self.frame.t_fb_s,
                    },
                    phy,
                    phi_s_override: self.phy.phi_s_dbm.map(dbm_to_watts),
                    rate_grid: self.rate_grid_bps.clone(),
                    error_mode,
                    seed,
                    trials: self.trials,
                };
                scenario.validate()?;
                Ok((label.clone(), scenario))
            })
            .collect()
    }
}

/// Parse the config with line/column information on schema violations.
pub fn load(text: &str) -> std::result::Result<RunConfig, String> {
    serde_json::from_str(text).map_err(|e| format!("config error at line {}: {e}", e.line()))
}
