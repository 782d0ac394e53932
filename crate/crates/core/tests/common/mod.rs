#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};

/// Three well separated groups in eight clustering variables `A1..A8`,
/// six linked variables `X1..X6` that follow the clustering signal, an
/// extra column `Z1`, a two-level flag `grp` and a label `name`.
pub fn fixture_csv(per_cluster: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let a: Vec<String> = (1..=8).map(|j| format!("A{j}")).collect();
    let x: Vec<String> = (1..=6).map(|j| format!("X{j}")).collect();
    out.push_str(&format!("name,{},{},Z1,grp\n", a.join(","), x.join(",")));
    let mut id = 0;
    for c in 0..3 {
        for _ in 0..per_cluster {
            id += 1;
            let mut row = vec![format!("obs{id}")];
            for j in 0..8 {
                let centre = if j % 3 == c { 6.0 } else { 0.0 };
                let e: f64 = rng.sample(StandardNormal);
                row.push(format!("{}", centre + 0.5 * e));
            }
            for j in 0..6 {
                let e: f64 = rng.sample(StandardNormal);
                row.push(format!("{}", (c as f64) * (j as f64 + 1.0) + e));
            }
            let z: f64 = rng.sample(StandardNormal);
            row.push(format!("{}", z * 3.0 + c as f64));
            row.push(if id % 2 == 0 { "even".into() } else { "odd".into() });
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

pub fn roles() -> Value {
    json!({
        "clustering": ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8"],
        "linked": ["X1", "X2", "X3", "X4", "X5", "X6"],
        "label": "name",
        "flags": ["grp"],
    })
}

/// Settings for the fixture with small embedding and tour budgets.
pub fn settings() -> Value {
    json!({
        "roles": roles(),
        "k": 3,
        "tour": {"kind": "guided", "d": 2, "seed": 7, "max_iter": 60},
    })
}
