// Scores predictions with class-agnostic mIoU and aggregates per category
// group.

use mvpart::eval::{aggregate_by_category, class_agnostic_miou, part_scores, Grouping};
use mvpart::mesh::PartLabeling;

fn main() {
    let gt = PartLabeling::for_points(vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2]);
    // Part ids need not match: 7 covers gt part 0, part 1 is split in two.
    let pred = PartLabeling::for_points(vec![7, 7, 7, 7, 3, 3, 4, 4, 9, 9]);
    for s in part_scores(&pred, &gt).expect("scores") {
        println!("{s:?}");
    }
    let miou = class_agnostic_miou(&pred, &gt).expect("miou");
    println!("mIoU: {miou:.4}");

    let grouping = Grouping::partnete();
    let objects = vec![("Chair".to_string(), miou), ("Laptop".to_string(), 0.9), ("Kettle".to_string(), 0.6)];
    let summary = aggregate_by_category(&objects, &grouping).expect("known categories");
    for (group, score) in &summary.per_group {
        println!("{group}: {score:.3}");
    }
    println!("overall: {:.3} over {} categories known", summary.overall, grouping.category_count());
}
