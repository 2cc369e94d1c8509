//! End-to-end runs: per-view masks to cleaned 3D part labels.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::lift::{lift_masks, LiftConfig, LiftError};
use crate::mesh::PartLabeling;
use crate::postprocess::{postprocess, PostprocessConfig, PostprocessError};
use crate::scene::{Scene, SceneError};
use crate::segment::{auto_complete_opposite_view, oracle_masks, AutoCompleteConfig, MaskProvider, MaskSet, Prompt, SegmentError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Lift(#[from] LiftError),
    #[error(transparent)]
    Postprocess(#[from] PostprocessError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub lift: LiftConfig,
    pub post: PostprocessConfig,
    /// Fill the opposite view after every prompt.
    pub auto_complete: Option<AutoCompleteConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub masks: MaskSet,
    /// Straight out of the lift, before cleanup.
    pub lifted: PartLabeling,
    pub labeling: PartLabeling,
}

/// Lifts `masks` and post-processes the result.
pub fn lift_and_clean(scene: &Scene, masks: MaskSet, config: &PipelineConfig) -> Result<Segmentation, PipelineError> {
    let lifted = lift_masks(&scene.mesh, &scene.views, &scene.buffers, &masks, &config.lift)?;
    let labeling = postprocess(&lifted, &scene.mesh, &scene.adjacency, &config.post)?;
    Ok(Segmentation { masks, lifted, labeling })
}

/// Runs every prompt through `provider` in order, later masks painting over
/// earlier ones.
pub fn accumulate_masks(
    scene: &Scene,
    prompts: &[Prompt],
    provider: &dyn MaskProvider,
    auto_complete: Option<&AutoCompleteConfig>,
) -> Result<MaskSet, PipelineError> {
    let mut acc = MaskSet::empty(scene.width(), scene.height(), scene.views.len());
    for prompt in prompts {
        prompt.validate(scene.width(), scene.height(), scene.views.len())?;
        acc.overlay(&provider.masks(scene, prompt)?);
        if let Some(cfg) = auto_complete {
            acc = auto_complete_opposite_view(
                &acc,
                prompt.view_index,
                &scene.mesh,
                &scene.views,
                &scene.buffers,
                &scene.adjacency,
                cfg,
            )?;
        }
    }
    Ok(acc)
}

pub fn segment_prompts(
    scene: &Scene,
    prompts: &[Prompt],
    provider: &dyn MaskProvider,
    config: &PipelineConfig,
) -> Result<Segmentation, PipelineError> {
    let masks = accumulate_masks(scene, prompts, provider, config.auto_complete.as_ref())?;
    lift_and_clean(scene, masks, config)
}

/// Renders ground truth into every view and lifts it back.
pub fn oracle_segmentation(scene: &Scene, gt: &PartLabeling, config: &PipelineConfig) -> Result<Segmentation, PipelineError> {
    let masks = oracle_masks(&scene.mesh, gt, &scene.buffers)?;
    lift_and_clean(scene, masks, config)
}

/// Faces per part id, `-1` excluded.
pub fn part_face_counts(labeling: &PartLabeling) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for &l in labeling.labels.iter().filter(|&&l| l >= 0) {
        *out.entry(l).or_default() += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::class_agnostic_miou;
    use crate::mesh::Vec3;
    use crate::render::ViewConfig;
    use crate::segment::RegionGrowProvider;
    use crate::synth;

    #[test]
    fn oracle_run_recovers_table_parts() {
        let (mesh, labels) = synth::table(2);
        let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(128)).unwrap();
        let gt = PartLabeling::for_faces(&scene.mesh, labels).unwrap();
        let seg = oracle_segmentation(&scene, &gt, &PipelineConfig::default()).unwrap();
        assert_eq!(seg.labeling.unlabeled_count(), 0);
        assert!(class_agnostic_miou(&seg.labeling, &gt).unwrap() > 0.99);
    }

    #[test]
    fn prompts_accumulate_parts() {
        let scene = Scene::new(&synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 3), &ViewConfig::default().with_image_size(64)).unwrap();
        let mut cfg = PipelineConfig::default();
        cfg.post.fill = false;
        let provider = RegionGrowProvider::default();
        let one = segment_prompts(&scene, &[Prompt::click(0, 32.0, 32.0, 0)], &provider, &cfg).unwrap();
        let two = segment_prompts(
            &scene,
            &[Prompt::click(0, 32.0, 32.0, 0), Prompt::click(3, 32.0, 32.0, 1)],
            &provider,
            &cfg,
        )
        .unwrap();
        assert_eq!(part_face_counts(&one.labeling).len(), 1);
        assert_eq!(part_face_counts(&two.labeling).len(), 2);
        let bad = segment_prompts(&scene, &[Prompt::click(0, 1.0, 1.0, 0)], &provider, &cfg);
        assert!(matches!(bad, Err(PipelineError::Segment(SegmentError::NoSurface { .. }))));
    }
}
