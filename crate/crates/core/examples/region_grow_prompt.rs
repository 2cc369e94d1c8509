// Segments a box with two clicks using the geometric region-grow segmenter.

use mvpart::mesh::Vec3;
use mvpart::pipeline::{part_face_counts, segment_prompts, PipelineConfig};
use mvpart::render::ViewConfig;
use mvpart::scene::Scene;
use mvpart::segment::{Prompt, RegionGrowProvider};
use mvpart::synth;

fn main() {
    let mesh = synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 6);
    let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(128)).expect("scene");
    // View 1 looks straight at one side; view 7 at the opposite side from below.
    let prompts = [Prompt::click(1, 64.0, 64.0, 0), Prompt::click(7, 64.0, 64.0, 1)];
    let provider = RegionGrowProvider { angle_thresh_deg: 30.0 };
    let mut config = PipelineConfig::default();
    config.post.fill = false;
    let seg = segment_prompts(&scene, &prompts, &provider, &config).expect("segmentation");
    for (part, faces) in part_face_counts(&seg.labeling) {
        println!("part {part}: {faces} faces");
    }
    println!("unlabeled: {} of {}", seg.labeling.unlabeled_count(), scene.mesh.face_count());
}
