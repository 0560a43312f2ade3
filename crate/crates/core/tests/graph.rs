use std::collections::BTreeSet;

use virus_damage::graph::{degree_stats, generate_scale_free, generate_small_world, load_edge_list};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 0 {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}

#[test]
fn smaller_exponent_gives_heavier_tail() {
    let stats = |exponent: f64, offset: u64| {
        let all: Vec<_> = (0..50)
            .map(|s| {
                let net = generate_scale_free(100, 109, exponent, offset + s).unwrap();
                net.validate().unwrap();
                assert!(net.is_connected());
                assert_eq!(net.edge_count(), 109);
                degree_stats(&net)
            })
            .collect();
        (
            median(all.iter().map(|d| d.estimated_power_exponent.unwrap()).collect()),
            median(all.iter().map(|d| d.degree_variance).collect()),
        )
    };
    let (heavy_exp, heavy_var) = stats(2.7, 0);
    let (light_exp, light_var) = stats(3.1, 1_000);
    assert!(heavy_exp < light_exp, "{heavy_exp} vs {light_exp}");
    assert!(heavy_var > light_var, "{heavy_var} vs {light_var}");
}

#[test]
fn generators_are_reproducible() {
    assert_eq!(generate_scale_free(100, 109, 2.9, 4).unwrap().edges(), generate_scale_free(100, 109, 2.9, 4).unwrap().edges());
    assert_eq!(generate_small_world(100, 4, 0.2, 4).unwrap().edges(), generate_small_world(100, 4, 0.2, 4).unwrap().edges());
    assert_ne!(generate_small_world(100, 4, 0.2, 4).unwrap().edges(), generate_small_world(100, 4, 0.2, 5).unwrap().edges());
}

#[test]
fn small_world_edge_count_is_conserved() {
    for (n, k) in [(6, 2), (20, 4), (100, 4), (50, 6)] {
        for p in [0.0, 0.1, 0.5, 1.0] {
            for seed in 0..10 {
                let net = generate_small_world(n, k, p, seed).unwrap();
                net.validate().unwrap();
                assert_eq!(net.edge_count(), n * k / 2);
            }
        }
    }
}

const SNAP_SAMPLE: &str = "\
# Undirected graph: sample.txt
# Nodes: 9 Edges: 12
# FromNodeId\tToNodeId
10\t20
20\t10
20\t30
30\t40
40\t10
40\t40
50\t60
60\t70
70\t50
70\t90
90\t80
80\t70
20\t30
10\t30
";

#[test]
fn snap_file_edge_count_matches_independent_parse() {
    let mut distinct = BTreeSet::new();
    for line in SNAP_SAMPLE.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut parts = line.split_whitespace().map(|t| t.parse::<u64>().unwrap());
        let (a, b) = (parts.next().unwrap(), parts.next().unwrap());
        if a != b {
            distinct.insert((a.min(b), a.max(b)));
        }
    }
    let net = load_edge_list(SNAP_SAMPLE.as_bytes(), false).unwrap();
    net.validate().unwrap();
    assert_eq!(net.edge_count(), distinct.len());
    assert_eq!(net.node_count(), 9);
}
