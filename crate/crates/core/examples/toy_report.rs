// Runs the encoder toy invariants (zero-init fusion, LoRA, memory bank) and
// prints the JSON report.

fn main() {
    let report = mvpart::toy::invariant_report(7).expect("report");
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    println!("all invariants hold: {}", report.passed);
}
