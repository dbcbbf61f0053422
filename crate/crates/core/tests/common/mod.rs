//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use spf_core::imagecore::Shape3;
use spf_core::mrftree::Edge;
use spf_core::Point;

/// Decodes a Prüfer sequence into the edge list of the labelled tree it encodes.
pub fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &s in seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in seq {
        let leaf = (0..n).find(|&i| degree[i] == 1).unwrap();
        edges.push((leaf.min(s), leaf.max(s)));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Minimum spanning tree by enumerating all `n^(n-2)` labelled trees.
/// Returns the total weight and the sorted edge list of the first minimum.
pub fn exhaustive_mst(nodes: &[Point]) -> (f64, Vec<(usize, usize)>) {
    let n = nodes.len();
    if n == 1 {
        return (0.0, Vec::new());
    }
    if n == 2 {
        return ((nodes[0] - nodes[1]).norm(), vec![(0, 1)]);
    }
    let mut best = (f64::INFINITY, Vec::new());
    let total = n.pow(n as u32 - 2);
    let mut seq = vec![0usize; n - 2];
    for code in 0..total {
        let mut c = code;
        for s in seq.iter_mut() {
            *s = c % n;
            c /= n;
        }
        let mut edges = prufer_edges(&seq, n);
        let w: f64 = edges.iter().map(|&(a, b)| (nodes[a] - nodes[b]).norm()).sum();
        if w < best.0 {
            edges.sort_unstable();
            best = (w, edges);
        }
    }
    best
}

pub fn sorted_pairs(edges: &[Edge]) -> Vec<(usize, usize)> {
    let mut p: Vec<(usize, usize)> = edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
    p.sort_unstable();
    p
}

/// Node minimizing the maximum hop distance (smallest id on ties), by
/// Floyd–Warshall over hop counts.
pub fn eccentricity_center(n: usize, edges: &[(usize, usize)]) -> usize {
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for &(a, b) in edges {
        d[a][b] = 1;
        d[b][a] = 1;
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    (0..n).min_by_key(|&v| (d[v].iter().max().copied().unwrap(), v)).unwrap()
}

/// Median filter by sorting every (border-truncated) window; lower median
/// for even counts.
pub fn brute_median(src: &[u16], shape: Shape3, window: [usize; 3]) -> Vec<u16> {
    let [hx, hy, hz] = window.map(|w| (w / 2) as i64);
    let mut out = vec![0; src.len()];
    for z in 0..shape.z as i64 {
        for y in 0..shape.y as i64 {
            for x in 0..shape.x as i64 {
                let mut vals = Vec::new();
                for zz in z - hz..=z + hz {
                    for yy in y - hy..=y + hy {
                        for xx in x - hx..=x + hx {
                            if shape.contains([xx, yy, zz]) {
                                vals.push(src[shape.index(zz as usize, yy as usize, xx as usize)]);
                            }
                        }
                    }
                }
                vals.sort_unstable();
                out[shape.index(z as usize, y as usize, x as usize)] = vals[(vals.len() - 1) / 2];
            }
        }
    }
    out
}

/// Size of a maximum one-to-one matching between detections and
/// annotations closer than `radius`, by exhaustive search.
pub fn brute_max_matching(det: &[Point], ann: &[Point], radius: f64) -> usize {
    fn go(i: usize, det: &[Point], ann: &[Point], r: f64, used: &mut Vec<bool>) -> usize {
        if i == det.len() {
            return 0;
        }
        let mut best = go(i + 1, det, ann, r, used);
        for j in 0..ann.len() {
            if !used[j] && (det[i] - ann[j]).norm() <= r {
                used[j] = true;
                best = best.max(1 + go(i + 1, det, ann, r, used));
                used[j] = false;
            }
        }
        best
    }
    go(0, det, ann, radius, &mut vec![false; ann.len()])
}

/// Checks that `pairs` is a valid one-to-one matching within `radius`.
pub fn is_valid_matching(pairs: &[(usize, usize)], det: &[Point], ann: &[Point], radius: f64) -> bool {
    let mut seen_d = vec![false; det.len()];
    let mut seen_a = vec![false; ann.len()];
    pairs.iter().all(|&(i, j)| {
        let fresh = !seen_d[i] && !seen_a[j];
        seen_d[i] = true;
        seen_a[j] = true;
        fresh && (det[i] - ann[j]).norm() <= radius
    })
}
