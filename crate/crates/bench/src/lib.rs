//! Shared inputs for the benchmarks.

use std::path::PathBuf;

use cosmoplan_core::{Alphabet, Dfa, Scene};

pub fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

/// Warehouse scene, global mission and per-robot alphabets.
pub fn warehouse() -> (Scene, Dfa, Vec<Alphabet>) {
    let scene = Scene::load(&data("warehouse/scene.json")).expect("warehouse scene");
    let g = Dfa::load(&data("warehouse/global.json")).expect("warehouse mission");
    let raw: Vec<Vec<String>> =
        serde_json::from_str(&std::fs::read_to_string(data("warehouse/alphabets.json")).expect("alphabets"))
            .expect("alphabets parse");
    (scene, g, raw.iter().map(|a| Alphabet::new(a).expect("alphabet")).collect())
}

/// Local missions of the ten-robot room.
pub fn room_missions() -> Vec<Dfa> {
    (1..=10).map(|i| Dfa::load(&data(&format!("room10/missions/k{i}.json"))).expect("room mission")).collect()
}
