// One click on the front of a sphere, with and without filling the unlabeled
// area of the opposite view.

use mvpart::pipeline::{segment_prompts, PipelineConfig};
use mvpart::render::ViewConfig;
use mvpart::scene::Scene;
use mvpart::segment::{AutoCompleteConfig, Prompt, RegionGrowProvider};
use mvpart::synth;

fn main() {
    let scene = Scene::new(&synth::icosphere(3, 0.5), &ViewConfig::default().with_image_size(96)).expect("scene");
    let prompts = [Prompt::click(0, 48.0, 48.0, 0)];
    let provider = RegionGrowProvider { angle_thresh_deg: 4.0 };
    let mut config = PipelineConfig::default();
    config.post.fill = false;
    let plain = segment_prompts(&scene, &prompts, &provider, &config).expect("plain");
    config.auto_complete = Some(AutoCompleteConfig::default());
    let completed = segment_prompts(&scene, &prompts, &provider, &config).expect("completed");
    let back = scene.views.opposite(0);
    println!("opposite of view 0 is view {back}");
    println!("without: {} labeled pixels there, {} unlabeled faces", plain.masks.labeled_count(back), plain.lifted.unlabeled_count());
    println!("with:    {} labeled pixels there, {} unlabeled faces", completed.masks.labeled_count(back), completed.lifted.unlabeled_count());
    println!("segment ids: {:?}", completed.masks.segment_ids());
}
