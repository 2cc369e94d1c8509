// Renders the twelve canonical views of a synthetic table and writes the
// normal maps as PNGs.

use mvpart::render::{write_normal_png, ViewConfig};
use mvpart::scene::Scene;
use mvpart::synth;

fn main() {
    let (mesh, _) = synth::table(3);
    let scene = Scene::new(&mesh, &ViewConfig::default().with_image_size(128)).expect("table renders");
    let out = std::env::temp_dir().join("mvpart-render-views");
    std::fs::create_dir_all(&out).expect("output dir");
    for (k, (view, buffers)) in scene.views.views.iter().zip(&scene.buffers).enumerate() {
        let c = view.pose.center();
        write_normal_png(buffers, &out.join(format!("normal_{k:02}.png")), &out.join(format!("valid_{k:02}.png")))
            .expect("png written");
        println!("view {k:2}: camera at ({:+.2}, {:+.2}, {:+.2}), {} surface pixels", c.x, c.y, c.z, buffers.valid_count());
    }
    println!("normal maps in {}", out.display());
}
