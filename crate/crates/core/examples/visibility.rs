// Compares the two depth lookups used for visibility against exact ray
// casting on a self-occluding mesh.

use mvpart::lift::{ray_triangle, visible_pixel, DepthLookup, DEFAULT_DEPTH_TOL};
use mvpart::mesh::{normalize_mesh, sample_face_points, FaceAdjacency};
use mvpart::render::{canonical_views, render_views, ViewConfig};
use mvpart::synth;

fn main() {
    let mesh = normalize_mesh(&synth::table(2).0).expect("normalize");
    let views = canonical_views(&ViewConfig::default().with_image_size(256)).expect("views");
    let buffers = render_views(&mesh, &views);
    let adjacency = FaceAdjacency::edge(&mesh);
    let samples = sample_face_points(&mesh, 2, 0);
    let mut agree = [0usize; 2];
    let mut total = 0;
    for s in &samples {
        for (k, view) in views.views.iter().enumerate() {
            let c = view.pose.center();
            let d = s.position - c;
            let len = d.norm();
            let dir = d / len;
            let truth = !(0..mesh.face_count())
                .any(|f| f as u32 != s.face && ray_triangle(&c, &dir, &mesh.triangle(f)).is_some_and(|t| t < len - 1e-7));
            for (i, lookup) in [DepthLookup::NearestPixel, DepthLookup::LocalRayCast].into_iter().enumerate() {
                let seen = visible_pixel(&s.position, &view.pose, &buffers[k], &mesh, &adjacency, DEFAULT_DEPTH_TOL, lookup).is_some();
                agree[i] += usize::from(seen == truth);
            }
            total += 1;
        }
    }
    println!("{total} point-view pairs");
    println!("nearest pixel agreement:  {:.4}", agree[0] as f64 / total as f64);
    println!("local ray cast agreement: {:.4}", agree[1] as f64 / total as f64);
}
