use std::collections::HashMap;

use mmspace::fpp::{fpp_barycenter_track, passage_time_ball, scaled_space, FppInstance, Shell, WeightLaw};

/// Plain O(V²) Dijkstra over the box `[-r, r]^2`.
fn box_passage_times(inst: &FppInstance, r: i64) -> HashMap<[i64; 3], f64> {
    let sites: Vec<[i64; 3]> = (-r..=r).flat_map(|x| (-r..=r).map(move |y| [x, y, 0])).collect();
    let index: HashMap<[i64; 3], usize> = sites.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    let mut time = vec![f64::INFINITY; sites.len()];
    let mut done = vec![false; sites.len()];
    time[index[&[0, 0, 0]]] = 0.0;
    for _ in 0..sites.len() {
        let u = (0..sites.len())
            .filter(|&i| !done[i])
            .min_by(|&a, &b| time[a].total_cmp(&time[b]))
            .unwrap();
        done[u] = true;
        let s = sites[u];
        for axis in 0..2 {
            let mut up = s;
            up[axis] += 1;
            let mut down = s;
            down[axis] -= 1;
            for (nb, w) in [(up, inst.edge_weight(s, axis)), (down, inst.edge_weight(down, axis))] {
                if let Some(&v) = index.get(&nb) {
                    time[v] = time[v].min(time[u] + w);
                }
            }
        }
    }
    sites.into_iter().zip(time).collect()
}

#[test]
fn ball_matches_brute_force_dijkstra() {
    for seed in 0..3 {
        let inst = FppInstance::new(2, WeightLaw::Exponential { rate: 1.0 }, seed, 1e3).unwrap();
        let t = 6.0;
        let ball = passage_time_ball(&inst, t).unwrap();
        let reach = ball.sites.iter().map(|s| s[0].abs().max(s[1].abs())).max().unwrap();
        let oracle = box_passage_times(&inst, reach + 12);
        let mut expected: Vec<[i64; 3]> = oracle.iter().filter(|(_, &v)| v < t).map(|(s, _)| *s).collect();
        expected.sort_unstable();
        assert_eq!(ball.sites, expected, "seed {seed}");
        for (s, &v) in ball.sites.iter().zip(&ball.times) {
            assert!((v - oracle[s]).abs() <= 1e-12);
        }
    }
}

#[test]
fn balls_are_nested_and_runs_are_reproducible() {
    let inst = FppInstance::new(2, WeightLaw::Uniform { low: 0.5, high: 1.5 }, 11, 1e3).unwrap();
    let small = passage_time_ball(&inst, 4.0).unwrap();
    let large = passage_time_ball(&inst, 8.0).unwrap();
    assert!(small.sites.iter().all(|s| large.index_of(s).is_some()));
    assert_eq!(large, passage_time_ball(&inst, 8.0).unwrap());
}

#[test]
fn deterministic_weights_give_the_l1_ball() {
    let inst = FppInstance::new(2, WeightLaw::Deterministic { value: 1.0 }, 0, 1e3).unwrap();
    let ball = passage_time_ball(&inst, 5.5).unwrap();
    // |{y in Z^2 : |y|_1 <= 5}| = 2·5·6 + 1.
    assert_eq!(ball.len(), 61);
    let space = scaled_space(&inst, 5.5, Shell::Restricted).unwrap();
    let i = space.ball.index_of(&[3, -2, 0]).unwrap();
    let j = space.ball.index_of(&[-1, 1, 0]).unwrap();
    assert_eq!(space.space.d(i, j), 7.0 / 5.5);
    let track = fpp_barycenter_track(&inst, &[5.5], 2.0, Shell::Restricted).unwrap();
    assert_eq!(track[0].barycenters, vec![vec![0.0, 0.0]]);
}
