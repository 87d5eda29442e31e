mod common;

use std::collections::BTreeSet;
use std::path::PathBuf;

use common::*;
use conceptwalk::analytics::stats::{chi_square_sf, student_t_two_sided};
use conceptwalk::analytics::{corpus_report, suggestion_source_distance, welch_t_test_samples, CorpusMap};
use conceptwalk::io::open_text;
use conceptwalk::mindmap::Target;
use conceptwalk::{cosine_distance, EmbeddingTable, MindMap, NodeId, Regime, SuggestionLogEntry};
use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn mini_table() -> EmbeddingTable {
    EmbeddingTable::load(open_text(data("mini_numberbatch.txt")).unwrap()).unwrap().0
}

#[test]
fn p_values_agree_with_statrs() {
    for df in [1.0, 2.5, 7.0, 18.06, 40.0, 300.0] {
        let t_dist = StudentsT::new(0.0, 1.0, df).unwrap();
        let chi = ChiSquared::new(df).unwrap();
        for x in [0.0, 0.1, 0.9, 2.0, 3.47, 6.0, 12.0] {
            let expected = 2.0 * (1.0 - t_dist.cdf(x));
            assert!((student_t_two_sided(x, df) - expected).abs() < 1e-9, "t={x} df={df}");
            let expected = 1.0 - chi.cdf(x);
            assert!((chi_square_sf(x, df) - expected).abs() < 1e-9, "chi2={x} df={df}");
        }
    }
}

#[test]
fn welch_on_raw_samples_matches_statrs() {
    let mut r = rng(31);
    for _ in 0..20 {
        let a: Vec<f64> = (0..r.random_range(3..20)).map(|_| r.random_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..r.random_range(3..20)).map(|_| r.random_range(0.2..1.4)).collect();
        let w = welch_t_test_samples(&a, &b).unwrap();
        let expected = 2.0 * (1.0 - StudentsT::new(0.0, 1.0, w.df).unwrap().cdf(w.statistic.abs()));
        assert!((w.p_value - expected).abs() < 1e-9);
        let (lo, hi) = w.ci95.unwrap();
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        let diff = mean(&a) - mean(&b);
        assert!(lo < diff && diff < hi);
        assert!(((lo + hi) / 2.0 - diff).abs() < 1e-12);
    }
}

fn brute_force_depths(map: &MindMap) -> Vec<(NodeId, usize)> {
    let ids: Vec<NodeId> = map.nodes().map(|n| n.id).collect();
    let n = ids.len();
    let pos = |id: NodeId| ids.iter().position(|&x| x == id).unwrap();
    let mut d = vec![vec![usize::MAX / 4; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for l in map.links() {
        let (a, b) = l.endpoints();
        d[pos(a)][pos(b)] = 1;
        d[pos(b)][pos(a)] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                d[i][j] = d[i][j].min(d[i][k] + d[k][j]);
            }
        }
    }
    let root = pos(map.root());
    ids.iter().enumerate().map(|(i, &id)| (id, d[root][i])).collect()
}

fn random_map(r: &mut impl Rng, max_nodes: usize, chords: usize) -> MindMap {
    let n = r.random_range(1..=max_nodes);
    let concepts: Vec<String> = (0..n).map(word_label).collect();
    let parents: Vec<usize> = (1..n).map(|i| r.random_range(0..i)).collect();
    let mut map = map_from_tree("random", &concepts, &parents);
    if n > 1 {
        for _ in 0..chords {
            let (a, b) = (r.random_range(0..n) as u32, r.random_range(0..n) as u32);
            let _ = map.add_link(NodeId(a), NodeId(b));
        }
    }
    map
}

#[test]
fn mean_depth_matches_floyd_warshall() {
    let mut r = rng(41);
    for _ in 0..300 {
        let map = random_map(&mut r, 12, 4);
        let depths = brute_force_depths(&map);
        let non_root: Vec<usize> = depths.iter().filter(|(id, _)| *id != map.root()).map(|d| d.1).collect();
        let expected = if non_root.is_empty() {
            0.0
        } else {
            non_root.iter().sum::<usize>() as f64 / non_root.len() as f64
        };
        let m = map.metrics();
        assert_eq!(m.node_count, depths.len());
        assert!((m.mean_depth - expected).abs() < 1e-12);
        for (id, d) in depths {
            assert_eq!(map.depths()[&id], d);
        }
    }
}

#[test]
fn node_removal_matches_reachability() {
    let mut r = rng(42);
    for _ in 0..300 {
        let mut map = random_map(&mut r, 12, 2);
        if map.node_count() < 2 {
            continue;
        }
        let victim = NodeId(r.random_range(1..map.node_count() as u32));
        let before: BTreeSet<NodeId> = map.nodes().map(|n| n.id).collect();
        // Reachable from the root once the victim is gone.
        let mut reach = BTreeSet::from([map.root()]);
        let mut frontier = vec![map.root()];
        while let Some(v) = frontier.pop() {
            for l in map.links() {
                let (a, b) = l.endpoints();
                let other = if a == v { b } else if b == v { a } else { continue };
                if other != victim && reach.insert(other) {
                    frontier.push(other);
                }
            }
        }
        let mut removed = map.remove_element(Target::Node(victim)).unwrap();
        removed.sort();
        let expected: Vec<NodeId> = before.difference(&reach).copied().collect();
        assert_eq!(removed, expected);
        assert!(map.is_connected());
    }
}

#[test]
fn lookup_fallbacks_on_the_mini_table() {
    let t = mini_table();
    assert_eq!(t.dimension(), 6);
    let avg = |a: &str, b: &str| -> Vec<f64> {
        let (u, v) = (t.get(a).unwrap(), t.get(b).unwrap());
        u.iter().zip(v).map(|(x, y)| (f64::from(*x) + f64::from(*y)) / 2.0).collect()
    };
    let got = t.lookup("listening_to_radio").unwrap();
    for (g, e) in got.iter().zip(avg("listening", "radio")) {
        assert!((g - e).abs() < 1e-12);
    }
    let got = t.lookup("salt water").unwrap();
    for (g, e) in got.iter().zip(avg("salt", "water")) {
        assert!((g - e).abs() < 1e-12);
    }
    // Singularized tokens: "fishes" -> "fish".
    assert_eq!(t.lookup("fishes"), t.lookup("fish"));
    assert!(t.lookup("plage").is_none());
}

#[test]
fn gzip_table_round_trip_via_files() {
    use flate2::write::GzEncoder;
    let table = random_table(200, 12, 5);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("vectors.txt.gz");
    let mut gz = GzEncoder::new(std::fs::File::create(&path).unwrap(), flate2::Compression::fast());
    table.write_text(&mut gz).unwrap();
    gz.finish().unwrap();
    let (back, report) = EmbeddingTable::load(open_text(&path).unwrap()).unwrap();
    assert_eq!(report.rows, 200);
    assert_eq!(back.labels(), table.labels());
    for l in table.labels() {
        assert_eq!(back.get(l), table.get(l));
    }
}

fn entry(source: &str, offered: &[&str], accepted: Option<&str>, regime: Regime) -> SuggestionLogEntry {
    SuggestionLogEntry {
        timestamp: t0(),
        source: source.into(),
        regime,
        p: if regime == Regime::Bfs { 0.5 } else { 2.0 },
        q: if regime == Regime::Bfs { 2.0 } else { 0.5 },
        offered: offered.iter().map(|s| s.to_string()).collect(),
        accepted: accepted.map(str::to_string),
    }
}

#[test]
fn source_distance_over_a_four_entry_log() {
    let t = mini_table();
    let log = vec![
        entry("hawaii", &["beach", "island", "nowhere"], Some("island"), Regime::Bfs),
        entry("beach", &["sand", "surf"], None, Regime::Dfs),
        entry("unknownish", &["fish"], None, Regime::Bfs),
        entry("pizza", &["cheese", "milk", "monkey"], Some("monkey"), Regime::Dfs),
    ];
    let out = suggestion_source_distance(&log, &t);
    let mut expected = Vec::new();
    for e in &log {
        for s in &e.offered {
            if let (Some(u), Some(v)) = (t.get(&e.source), t.get(s)) {
                expected.push((s.clone(), oracle_cosine(u, v), e.accepted.as_deref() == Some(s)));
            }
        }
    }
    assert_eq!(out.rows.len(), expected.len());
    assert_eq!(out.skipped, 2);
    for (row, (s, d, acc)) in out.rows.iter().zip(expected) {
        assert_eq!(row.suggestion, s);
        assert!((row.distance - d).abs() < 1e-12);
        assert_eq!(row.accepted, acc);
    }
}

#[test]
fn report_acceptance_counts_cross_foot() {
    let t = mini_table();
    let concepts = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let mk = |group: &str, id: &str, cs: &[&str], log| CorpusMap {
        group: group.into(),
        map: map_from_tree(id, &concepts(cs), &(0..cs.len() - 1).collect::<Vec<_>>()),
        log,
    };
    let corpus = vec![
        mk("tool", "t1", &["hawaii", "beach", "island"], vec![entry("hawaii", &["beach", "island"], Some("island"), Regime::Bfs)]),
        mk("tool", "t2", &["ocean", "fish", "wave"], vec![entry("ocean", &["fish", "boat", "rock"], Some("fish"), Regime::Dfs)]),
        mk("base", "b1", &["pizza", "cheese"], vec![entry("pizza", &["cheese", "milk"], None, Regime::Bfs)]),
        mk("base", "b2", &["music", "radio", "ear"], vec![entry("music", &["radio", "ear"], Some("ear"), Regime::Dfs)]),
    ];
    let r = corpus_report(&corpus, &t);
    assert_eq!(r.totals.offered, 9);
    assert_eq!(r.totals.accepted, 3);
    assert_eq!(r.suggestions.acceptance_by_group.table, Some([[1, 3], [2, 3]]));
    assert_eq!(r.suggestions.acceptance_by_regime.table, Some([[1, 3], [2, 3]]));
    assert_eq!(r.maps.iter().map(|m| m.offered).sum::<usize>(), r.totals.offered);
    let json = r.to_json();
    assert_eq!(serde_json::from_str::<conceptwalk::analytics::Report>(&json).unwrap(), r);
}

proptest! {
    #[test]
    fn cosine_matches_oracle(u in prop::collection::vec(-1.0f32..1.0, 8), v in prop::collection::vec(-1.0f32..1.0, 8)) {
        prop_assume!(u.iter().any(|x| x.abs() > 1e-3) && v.iter().any(|x| x.abs() > 1e-3));
        let to64 = |x: &[f32]| x.iter().map(|&a| f64::from(a)).collect::<Vec<_>>();
        let d = cosine_distance(&to64(&u), &to64(&v)).unwrap();
        prop_assert!((d - oracle_cosine(&u, &v)).abs() < 1e-12);
    }
}
