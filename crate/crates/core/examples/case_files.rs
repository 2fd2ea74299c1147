//! Load the bundled IEEE cases, build admittance matrices and graph shift
//! operators, and round-trip a case through the JSON schema.
//!
//! `cargo run --example case_files -- [path/to/case.m]`

use ugcn::caseio::{bundled_graph, load_case, parse_case, to_grid_graph, BUNDLED_CASES};
use ugcn::grid::{build_admittance, build_gso, GridKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("case     buses  lines  radial  |S|_2");
    for name in BUNDLED_CASES {
        let g = bundled_graph(name)?;
        let y = build_admittance(&g)?;
        let s = build_gso(&y)?;
        println!(
            "{name:8} {:5}  {:5}  {:6}  {:.3}",
            g.n(),
            g.in_service().count(),
            g.is_rooted_tree(),
            s.matrix.spectral_norm()?
        );
    }

    let case = load_case("ieee33")?;
    let json = case.to_json();
    let back = parse_case(&json)?;
    println!("ieee33 json: {} bytes, round trip equal: {}", json.len(), back.buses == case.buses);

    if let Some(path) = std::env::args().nth(1) {
        let c = load_case(&path)?;
        let g = to_grid_graph(&c, GridKind::Transmission, c.reference_bus())?;
        println!("{path}: {} buses, {} in-service branches", g.n(), g.in_service().count());
        for w in &c.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
