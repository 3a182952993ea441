//! Writes a synthetic city (grid network, trips, POIs) and a service config.
//!
//! `cargo run -p transtte-service --example demo_city -- <dir>`

use std::path::PathBuf;

use transtte::synthetic;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    let city = dir.join("gridville");
    let net = synthetic::grid_network(12, 12, 400.0, 1);
    synthetic::write_network(&net, &city)?;
    synthetic::write_trips(&synthetic::random_trips(&net, 3000, 0.05, 2), &city.join("trips.csv"))?;
    synthetic::write_pois(&synthetic::random_pois(&net, 300, 3), &city.join("pois.csv"))?;
    let config = serde_json::json!({
        "cities": {
            "gridville": {
                "nodes": "gridville/nodes.csv",
                "edges": "gridville/edges.csv",
                "trips": "gridville/trips.csv",
                "pois": "gridville/pois.csv",
                "params": "gridville/model.bin"
            }
        },
        "model_preset": "toy",
        "training": { "epochs": 10, "optimizer": { "lr": 0.002 } }
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config)?)?;
    println!("{}", path.display());
    Ok(())
}
