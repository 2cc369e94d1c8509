// Cleans a noisy labeling: tiny components are dropped and every unlabeled
// face is filled from its nearest labeled neighbors.

use mvpart::mesh::{FaceAdjacency, PartLabeling, Vec3};
use mvpart::postprocess::{postprocess, PostprocessConfig};
use mvpart::synth;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let mesh = synth::subdivided_box(Vec3::repeat(-0.5), Vec3::repeat(0.5), 12);
    let adjacency = FaceAdjacency::edge(&mesh);
    let truth = synth::box_side_labels(&mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noisy: Vec<i32> = truth
        .iter()
        .map(|&l| match rng.gen_range(0..100) {
            0..=4 => -1,
            5..=6 => rng.gen_range(0..6),
            _ => l,
        })
        .collect();
    let wrong = |labels: &[i32]| labels.iter().zip(&truth).filter(|(a, b)| a != b).count();
    let noisy = PartLabeling::for_faces(&mesh, noisy).expect("labels");
    let clean = postprocess(&noisy, &mesh, &adjacency, &PostprocessConfig::default()).expect("postprocess");
    println!("faces: {}", mesh.face_count());
    println!("before: {} unlabeled, {} differ from truth", noisy.unlabeled_count(), wrong(&noisy.labels));
    println!("after:  {} unlabeled, {} differ from truth", clean.unlabeled_count(), wrong(&clean.labels));
}
