use crate::datasets::{synth_samples, SynthSpec};
use crate::error::Result;
use crate::exec::Exec;
use crate::numerics::Matrix;
use crate::predictor::{gradient_check, GradCheckReport, PredictorConfig, PredictorParams};

pub const GRADCHECK_STEP: f64 = 1e-3;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
const PRESET_LEN: usize = 6;
const PRESET_BATCH: usize = 4;

/// Gradient check of the tiny preset (d_vocab 32, d_h 8, layout m,s) on
/// synthetic sequences of length 6, in f64.
pub fn preset_gradcheck(config: &PredictorConfig, seed: u64, h: f64) -> Result<GradCheckReport> {
    let spec = SynthSpec {
        count: PRESET_BATCH,
        len: PRESET_LEN,
        width: config.d_vocab,
        seed,
        ..SynthSpec::default()
    };
    let batch: Vec<(Matrix<f64>, f64)> = synth_samples(&spec, Exec::Sequential)?
        .into_iter()
        .map(|s| {
            let seq = s.fixtures.into_values().next().expect("one composition");
            (seq.cast(), s.score)
        })
        .collect();
    let params = PredictorParams::<f64>::init(config, seed)?;
    gradient_check(&params, &batch, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiny_preset_across_seeds() {
        let cfg = PredictorConfig::tiny();
        for seed in 0..8 {
            let r = preset_gradcheck(&cfg, seed, 1e-4).unwrap();
            assert!(r.passes(GRADCHECK_TOLERANCE), "seed {seed}: {:?}", r.worst());
        }
        assert!(preset_gradcheck(&cfg, 0, GRADCHECK_STEP).unwrap().passes(GRADCHECK_TOLERANCE));
    }
}
