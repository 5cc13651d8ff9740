//! Attack success rate and physical robustness.

use serde::{Deserialize, Serialize};

use crate::attack::AttackResult;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::oracle::{Objective, Oracle, Phase};
use crate::perturbation::{apply_perturbation, Perturbation};
use crate::transform::{apply_transform, TransformSpec};

/// Fraction of results that succeeded.
pub fn attack_success_rate(results: &[AttackResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::UndefinedMetric(
            "success rate of an empty result set".into(),
        ));
    }
    let wins = results.iter().filter(|r| r.success).count();
    Ok(wins as f64 / results.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Transforms under which the clean image keeps its true label and the
    /// perturbed image meets the objective.
    pub numerator: usize,
    /// Transforms under which the clean image keeps its true label.
    pub denominator: usize,
    pub value: f64,
    pub per_transform: Vec<TransformOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformOutcome {
    pub transform: TransformSpec,
    pub clean_label: usize,
    pub perturbed_label: usize,
    pub clean_correct: bool,
    pub attack_success: bool,
}

/// Fraction of transforms that fool the model only because of the
/// perturbation: among the transforms `t` for which the clean image `t(x)` is
/// classified as `true_label`, the share for which `t(x + p)` meets `obj`.
///
/// The perturbation is painted first and the transform applied afterwards.
pub fn physical_robustness(
    oracle: &Oracle,
    base: &Image,
    p: &Perturbation,
    transforms: &[TransformSpec],
    true_label: usize,
    obj: Objective,
) -> Result<RobustnessReport> {
    if transforms.is_empty() {
        return Err(Error::InvalidConfig(
            "physical robustness needs at least one transform".into(),
        ));
    }
    Objective::Untargeted(true_label).validate(oracle.num_classes())?;
    obj.validate(oracle.num_classes())?;
    let perturbed = apply_perturbation(base, p)?;

    let mut images = Vec::with_capacity(2 * transforms.len());
    for t in transforms {
        images.push(apply_transform(base, t)?);
        images.push(apply_transform(&perturbed, t)?);
    }
    let probs = oracle.phase(Phase::Evaluate).classify_batch(&images)?;

    let per_transform: Vec<TransformOutcome> = transforms
        .iter()
        .zip(probs.chunks_exact(2))
        .map(|(t, pair)| {
            let clean_label = pair[0].argmax();
            TransformOutcome {
                transform: *t,
                clean_label,
                perturbed_label: pair[1].argmax(),
                clean_correct: clean_label == true_label,
                attack_success: obj.is_success(&pair[1]),
            }
        })
        .collect();

    let denominator = per_transform.iter().filter(|o| o.clean_correct).count();
    let numerator = per_transform
        .iter()
        .filter(|o| o.clean_correct && o.attack_success)
        .count();
    if denominator == 0 {
        return Err(Error::UndefinedMetric(
            "clean image is misclassified under every transform".into(),
        ));
    }
    Ok(RobustnessReport {
        numerator,
        denominator,
        value: numerator as f64 / denominator as f64,
        per_transform,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::LedgerSnapshot;

    fn result(success: bool) -> AttackResult {
        AttackResult {
            success,
            objective: Objective::Untargeted(0),
            perturbation: None,
            winning_color: None,
            queries: LedgerSnapshot::default(),
            max_area: 4,
            trace: Vec::new(),
        }
    }

    #[test]
    fn asr_examples() {
        let r = [result(true), result(true), result(false), result(true)];
        assert_eq!(attack_success_rate(&r).unwrap(), 0.75);
        assert_eq!(attack_success_rate(&[result(false), result(false)]).unwrap(), 0.0);
        assert!(attack_success_rate(&[]).is_err());
    }
}
