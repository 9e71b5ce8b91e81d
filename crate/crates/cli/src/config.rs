//! Run configuration: JSON schema, validation and conversion into core
//! types. Unknown keys are rejected everywhere.

use serde::{Deserialize, Serialize};

use chiller_core::models::{
    build_four_level, build_four_level_double_prime, build_four_level_prime, build_three_level,
    build_three_level_shorted, build_three_qubit, Bath, BathSpec, ModelKind, PerBath,
    SpectralFilter, SystemModel,
};
use chiller_core::sweep::SweepConfig;

pub const DEFAULT_GAMMA: f64 = 1e-3;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelDoc,
    pub baths: Vec<BathDoc>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcwf: Option<McwfSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<BreakdownSection>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDoc {
    pub kind: ModelKind,
    pub omega_c: f64,
    pub omega_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BathDoc {
    pub label: Bath,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub filter: Option<FilterDoc>,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FilterDoc {
    Flat,
    HighCutoff { omega_max: f64 },
    Lorentzian { center: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub omega_c_min: f64,
    pub omega_c_max: f64,
    pub points: usize,
    #[serde(default)]
    pub track_work_cutoff: bool,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct McwfSection {
    pub n_trajectories: usize,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    pub omega_c_min: f64,
    pub omega_c_max: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct BreakdownSection {
    pub omega_c_min: f64,
    pub omega_c_max: f64,
    pub points: usize,
}

impl FilterDoc {
    pub fn to_core(self) -> SpectralFilter<f64> {
        match self {
            FilterDoc::Flat => SpectralFilter::Flat,
            FilterDoc::HighCutoff { omega_max } => SpectralFilter::HighCutoff { omega_max },
            FilterDoc::Lorentzian { center, width } => SpectralFilter::Lorentzian { center, width },
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("config schema violation: {e}"))
    }

    pub fn build_model(&self) -> Result<SystemModel<f64>, String> {
        let m = &self.model;
        let g = m.g.unwrap_or(0.0);
        let kappa = m.kappa.unwrap_or(0.0);
        let built = match m.kind {
            ModelKind::ThreeLevel => build_three_level(m.omega_c, m.omega_h),
            ModelKind::ThreeLevelShorted => {
                build_three_level_shorted(m.omega_c, m.omega_h, kappa)
            }
            ModelKind::FourLevel => build_four_level(m.omega_c, m.omega_h, g),
            ModelKind::FourLevelPrime => build_four_level_prime(m.omega_c, m.omega_h, g),
            ModelKind::FourLevelDoublePrime => {
                build_four_level_double_prime(m.omega_c, m.omega_h, g)
            }
            ModelKind::ThreeQubit => build_three_qubit(m.omega_c, m.omega_h, g),
        };
        built.map_err(|e| e.to_string())
    }

    pub fn build_baths(&self) -> Result<PerBath<BathSpec<f64>>, String> {
        if self.baths.len() != 3 {
            return Err(format!(
                "expected exactly 3 baths (w, h, c), got {}",
                self.baths.len()
            ));
        }
        let mut specs: [Option<BathSpec<f64>>; 3] = [None; 3];
        for doc in &self.baths {
            let idx = match doc.label {
                Bath::Work => 0,
                Bath::Hot => 1,
                Bath::Cold => 2,
            };
            if specs[idx].is_some() {
                return Err(format!("duplicate bath label {}", doc.label));
            }
            let spec = BathSpec::new(
                doc.label,
                doc.temperature,
                doc.gamma.unwrap_or(DEFAULT_GAMMA),
                doc.filter.map(FilterDoc::to_core).unwrap_or(SpectralFilter::Flat),
            )
            .map_err(|e| e.to_string())?;
            specs[idx] = Some(spec);
        }
        match specs {
            [Some(w), Some(h), Some(c)] => Ok(PerBath::new(w, h, c)),
            _ => Err("baths must carry the labels w, h and c".into()),
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig<f64>, String> {
        Ok(SweepConfig {
            kind: self.model.kind,
            omega_h: self.model.omega_h,
            g: self.model.g.unwrap_or(0.0),
            kappa: self.model.kappa.unwrap_or(0.0),
            baths: self.build_baths()?,
            track_work_cutoff: self.sweep.map(|s| s.track_work_cutoff).unwrap_or(false),
        })
    }
}
