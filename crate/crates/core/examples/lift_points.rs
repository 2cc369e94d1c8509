// Lifts multi-view masks onto an arbitrary point set, here the mesh
// vertices, instead of faces.

use mvpart::lift::{lift_to_points, LiftConfig};
use mvpart::mesh::PartLabeling;
use mvpart::render::ViewConfig;
use mvpart::scene::Scene;
use mvpart::segment::oracle_masks;
use mvpart::synth;

fn main() {
    let (mesh, labels) = synth::snowman(2);
    let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(128)).expect("scene");
    let gt = PartLabeling::for_faces(&scene.mesh, labels).expect("labels");
    let masks = oracle_masks(&scene.mesh, &gt, &scene.buffers).expect("masks");
    let points = scene.mesh.vertices().to_vec();
    let lifted = lift_to_points(&points, &scene.mesh, &scene.views, &scene.buffers, &masks, &LiftConfig::default()).expect("lift");
    let mut counts = std::collections::BTreeMap::new();
    for &l in &lifted.labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    println!("{} vertices", points.len());
    for (label, n) in counts {
        println!("label {label:2}: {n}");
    }
}
