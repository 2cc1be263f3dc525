//! The learned density estimator: an MLP slid over per-query k-NN distance
//! features, trained once per dimensionality on synthetic ground truth.

pub mod adam;
pub mod mlp;
pub mod pipeline;
pub mod smooth;
pub mod train;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamHyper, AdamState};
pub use mlp::{
    BnMode, CurvePoint, FeatureScale, Gradients, MlpConfig, MlpModel, TrainMeta, BN_EPS,
    BN_MOMENTUM,
};
pub use pipeline::{estimate, EstimateOptions, Estimates};
pub use smooth::{smooth_1d, smooth_1d_with_coeff, SMOOTH_BUDGET_COEFF};
pub use train::{infer_in_chunks, train, TrainConfig, TrainingData};

pub const MODEL_FORMAT: &str = "dde-model-v1";

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    model: MlpModel,
}

/// Write a model as versioned JSON (`dde-model-v1`).
pub fn save_model(path: &Path, model: &MlpModel) -> Result<()> {
    let file = ModelFile {
        format: MODEL_FORMAT.to_string(),
        model: model.clone(),
    };
    fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MlpModel> {
    let file: ModelFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    if file.format != MODEL_FORMAT {
        return Err(Error::Format(format!(
            "unsupported model format `{}`",
            file.format
        )));
    }
    if !file.model.is_finite() {
        return Err(Error::Format("model contains non-finite parameters".into()));
    }
    Ok(file.model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn model_file_round_trip() {
        let dir = std::env::temp_dir().join(format!("dde-model-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let config = MlpConfig {
            k: 6,
            hidden_widths: vec![4, 4],
            batch_norm: true,
            feature_scale: FeatureScale::SampleSizeScaled,
        };
        let model = MlpModel::init(config, &mut stream_rng(150, 0));
        save_model(&path, &model).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("dde-model-v1"));
        let back = load_model(&path).unwrap();
        assert_eq!(model, back);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
