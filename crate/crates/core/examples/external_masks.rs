// Lifts masks that came from another segmenter. Here they are produced by
// rendering ground truth, written as 16-bit PNGs and read back.

use mvpart::mesh::PartLabeling;
use mvpart::pipeline::{segment_prompts, PipelineConfig};
use mvpart::render::ViewConfig;
use mvpart::scene::Scene;
use mvpart::segment::{mask_file_name, oracle_masks, write_masks, ExternalProvider, Prompt};
use mvpart::synth;

fn main() {
    let (mesh, labels) = synth::table(3);
    let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(128)).expect("scene");
    let gt = PartLabeling::for_faces(&scene.mesh, labels).expect("labels");
    let dir = std::env::temp_dir().join("mvpart-external-masks");
    write_masks(&dir, &oracle_masks(&scene.mesh, &gt, &scene.buffers).expect("masks")).expect("write");
    println!("wrote {} .. {} to {}", mask_file_name(0), mask_file_name(11), dir.display());

    let provider = ExternalProvider { dir };
    let seg = segment_prompts(&scene, &[Prompt::click(0, 64.0, 64.0, 0)], &provider, &PipelineConfig::default())
        .expect("segmentation");
    let agree = seg.labeling.labels.iter().zip(&gt.labels).filter(|(a, b)| a == b).count();
    println!("{agree}/{} faces match ground truth", gt.labels.len());
}
