//! Brute-force reference implementations, written independently of the
//! library code paths (plain loops, no shared helpers).

#![allow(dead_code)]

use std::collections::BTreeSet;

use boxvis::boxes::{BoxEntry, BoxTrack, ClipDims, Pixel};
use boxvis::rng::RngStream;
use boxvis::tensor::Tensor;

pub const SMOOTH: f64 = 1e-4;

pub fn sig(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn dice(p: &[f64], q: &[f64]) -> f64 {
    let mut inter = 0.0;
    let mut pp = 0.0;
    let mut qq = 0.0;
    for i in 0..p.len() {
        inter += p[i] * q[i];
        pp += p[i] * p[i];
        qq += q[i] * q[i];
    }
    1.0 - (2.0 * inter + SMOOTH) / (pp + qq + SMOOTH)
}

fn at3(t: &Tensor, f: usize, y: usize, x: usize) -> f64 {
    let d = t.dims();
    t.data()[(f * d[1] + y) * d[2] + x]
}

/// Column maxima and row maxima of every frame, concatenated frame by frame.
pub fn max_projections(values: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let d = values.dims();
    let (tn, h, w) = (d[0], d[1], d[2]);
    let mut px = Vec::new();
    let mut py = Vec::new();
    for t in 0..tn {
        for x in 0..w {
            let mut m = f64::NEG_INFINITY;
            for y in 0..h {
                m = m.max(at3(values, t, y, x));
            }
            px.push(m);
        }
        for y in 0..h {
            let mut m = f64::NEG_INFINITY;
            for x in 0..w {
                m = m.max(at3(values, t, y, x));
            }
            py.push(m);
        }
    }
    (px, py)
}

pub fn projection_loss(logits: &Tensor, box_mask: &Tensor) -> f64 {
    let prob = logits.map(sig);
    let (px, py) = max_projections(&prob);
    let (bx, by) = max_projections(box_mask);
    dice(&px, &bx) + dice(&py, &by)
}

pub fn in_any_box(tracks: &[BoxTrack], p: Pixel) -> bool {
    tracks.iter().any(|tr| {
        tr.entries()
            .iter()
            .any(|e| e.frame == p.t && p.x >= e.x0 && p.x < e.x1 && p.y >= e.y0 && p.y < e.y1)
    })
}

/// All same-frame (a, b) with b directly right of or below a, kept when an
/// endpoint is inside a box.
pub fn spatial_edges(dims: ClipDims, tracks: &[BoxTrack]) -> BTreeSet<(Pixel, Pixel)> {
    let mut all = Vec::new();
    for t in 0..dims.frames {
        for y in 0..dims.height {
            for x in 0..dims.width {
                all.push(Pixel { t, x, y });
            }
        }
    }
    let mut out = BTreeSet::new();
    for &a in &all {
        for &b in &all {
            let right = b.t == a.t && b.y == a.y && b.x == a.x + 1;
            let below = b.t == a.t && b.x == a.x && b.y == a.y + 1;
            if (right || below) && (in_any_box(tracks, a) || in_any_box(tracks, b)) {
                out.insert((a, b));
            }
        }
    }
    out
}

fn round_away(v: f64) -> i64 {
    if v >= 0.0 {
        (v + 0.5).floor() as i64
    } else {
        -((-v + 0.5).floor() as i64)
    }
}

/// Center-shifted temporal pairs with the 5- or 3-neighborhood.
pub fn temporal_edges(dims: ClipDims, tracks: &[BoxTrack], neighbors: usize) -> BTreeSet<(Pixel, Pixel)> {
    let hood: Vec<(i64, i64)> = if neighbors == 5 {
        vec![(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)]
    } else {
        vec![(0, 0), (1, 0), (0, 1)]
    };
    let mut out = BTreeSet::new();
    for tr in tracks {
        for t in 0..dims.frames.saturating_sub(1) {
            let (Some(a), Some(b)) = (
                tr.entries().iter().find(|e| e.frame == t),
                tr.entries().iter().find(|e| e.frame == t + 1),
            ) else {
                continue;
            };
            let dx = round_away((b.x0 + b.x1) as f64 / 2.0 - (a.x0 + a.x1) as f64 / 2.0);
            let dy = round_away((b.y0 + b.y1) as f64 / 2.0 - (a.y0 + a.y1) as f64 / 2.0);
            for y in a.y0..a.y1 {
                for x in a.x0..a.x1 {
                    for &(ox, oy) in &hood {
                        let tx = x as i64 + dx + ox;
                        let ty = y as i64 + dy + oy;
                        if tx >= 0 && ty >= 0 && (tx as usize) < dims.width && (ty as usize) < dims.height {
                            out.insert((Pixel { t, x, y }, Pixel { t: t + 1, x: tx as usize, y: ty as usize }));
                        }
                    }
                }
            }
        }
    }
    out
}

fn vec_at(t: &Tensor, p: Pixel) -> Vec<f64> {
    let d = t.dims();
    let depth = d[3];
    let base = ((p.t * d[1] + p.y) * d[2] + p.x) * depth;
    t.data()[base..base + depth].to_vec()
}

pub fn lab_sim(lab: &Tensor, a: Pixel, b: Pixel, theta: f64) -> f64 {
    let (u, v) = (vec_at(lab, a), vec_at(lab, b));
    let mut s = 0.0;
    for i in 0..3 {
        s += (u[i] - v[i]).powi(2);
    }
    (-s.sqrt() / theta).exp()
}

/// Mean cosine over the `(2k+1)²` clamped patch offsets.
pub fn patch_corr(feat: &Tensor, a: Pixel, b: Pixel, k: usize) -> f64 {
    let d = feat.dims();
    let (h, w) = (d[1] as i64, d[2] as i64);
    let k = k as i64;
    let mut total = 0.0;
    let mut n = 0.0;
    for oy in -k..=k {
        for ox in -k..=k {
            let pa = Pixel {
                t: a.t,
                x: (a.x as i64 + ox).clamp(0, w - 1) as usize,
                y: (a.y as i64 + oy).clamp(0, h - 1) as usize,
            };
            let pb = Pixel {
                t: b.t,
                x: (b.x as i64 + ox).clamp(0, w - 1) as usize,
                y: (b.y as i64 + oy).clamp(0, h - 1) as usize,
            };
            let (u, v) = (vec_at(feat, pa), vec_at(feat, pb));
            let dot: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
            let nu = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nu > 0.0 && nv > 0.0 {
                total += dot / (nu * nv);
            }
            n += 1.0;
        }
    }
    total / n
}

/// `−(1/N) Σ log clamp(P)` over edges whose affinity clears `tau`.
pub fn affinity_loss(
    logits: &Tensor,
    edges: &BTreeSet<(Pixel, Pixel)>,
    affinity: impl Fn(Pixel, Pixel) -> f64,
    tau: f64,
) -> f64 {
    let mut total = 0.0;
    let mut n = 0usize;
    for &(a, b) in edges {
        if affinity(a, b) >= tau {
            let ma = sig(at3(logits, a.t, a.y, a.x));
            let mb = sig(at3(logits, b.t, b.y, b.x));
            let p = (ma * mb + (1.0 - ma) * (1.0 - mb)).clamp(1e-6, 1.0);
            total -= p.ln();
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub fn tv3d(logits: &Tensor) -> f64 {
    let d = logits.dims();
    let (tn, h, w) = (d[0], d[1], d[2]);
    let m = |t, y, x| sig(at3(logits, t, y, x));
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..tn {
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    total += (m(t, y, x + 1) - m(t, y, x)).abs();
                    count += 1;
                }
                if y + 1 < h {
                    total += (m(t, y + 1, x) - m(t, y, x)).abs();
                    count += 1;
                }
                if t + 1 < tn {
                    total += (m(t + 1, y, x) - m(t, y, x)).abs();
                    count += 1;
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

pub fn bce_dice(logits: &Tensor, target: &Tensor) -> f64 {
    let p: Vec<f64> = logits.data().iter().map(|&z| sig(z)).collect();
    let q = target.data();
    let mut bce = 0.0;
    for i in 0..p.len() {
        bce -= q[i] * p[i].ln() + (1.0 - q[i]) * (1.0 - p[i]).ln();
    }
    bce / p.len() as f64 + dice(&p, q)
}

pub fn cross_entropy(logits: &Tensor, targets: &[usize]) -> f64 {
    let c = logits.dims()[1];
    let mut total = 0.0;
    for (r, &t) in targets.iter().enumerate() {
        let row = &logits.data()[r * c..(r + 1) * c];
        let z: f64 = row.iter().map(|v| v.exp()).sum();
        total -= (row[t].exp() / z).ln();
    }
    total / targets.len() as f64
}

/// Lexicographically first optimal injective assignment by exhaustive
/// search over row-to-column maps (rows ≤ cols) or column-to-row maps.
pub fn brute_force_assignment(cost: &Tensor) -> (f64, Vec<(usize, usize)>) {
    let (r, c) = (cost.dims()[0], cost.dims()[1]);
    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    let mut consider = |mut pairs: Vec<(usize, usize)>| {
        pairs.sort();
        let total: f64 = pairs.iter().map(|&(i, j)| cost.get(&[i, j])).sum();
        let better = match &best {
            None => true,
            Some((b, bp)) => total < *b || (total == *b && pairs < *bp),
        };
        if better {
            best = Some((total, pairs));
        }
    };
    fn rec(
        depth: usize,
        n_small: usize,
        n_large: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<usize>,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        if depth == n_small {
            visit(chosen);
            return;
        }
        for j in 0..n_large {
            if !used[j] {
                used[j] = true;
                chosen.push(j);
                rec(depth + 1, n_small, n_large, used, chosen, visit);
                chosen.pop();
                used[j] = false;
            }
        }
    }
    let (small, large) = (r.min(c), r.max(c));
    let mut used = vec![false; large];
    let mut chosen = Vec::new();
    rec(0, small, large, &mut used, &mut chosen, &mut |m| {
        let pairs: Vec<(usize, usize)> = if r <= c {
            m.iter().enumerate().map(|(i, &j)| (i, j)).collect()
        } else {
            m.iter().enumerate().map(|(j, &i)| (i, j)).collect()
        };
        consider(pairs);
    });
    best.unwrap_or((0.0, Vec::new()))
}

pub fn random_tensor(dims: &[usize], lo: f64, hi: f64, rng: &mut RngStream) -> Tensor {
    let mut t = Tensor::zeros(dims);
    for v in t.data_mut() {
        *v = rng.uniform(lo, hi).unwrap();
    }
    t
}

/// A random box per frame, occasionally skipping a frame.
pub fn random_track(id: i64, dims: ClipDims, rng: &mut RngStream) -> BoxTrack {
    let mut entries = Vec::new();
    for frame in 0..dims.frames {
        if dims.frames > 1 && rng.index(6).unwrap() == 0 {
            continue;
        }
        let x0 = rng.uniform_int(0, dims.width as u64 - 1).unwrap() as usize;
        let y0 = rng.uniform_int(0, dims.height as u64 - 1).unwrap() as usize;
        let x1 = rng.uniform_int(x0 as u64 + 1, dims.width as u64).unwrap() as usize;
        let y1 = rng.uniform_int(y0 as u64 + 1, dims.height as u64).unwrap() as usize;
        entries.push(BoxEntry { frame, x0, y0, x1, y1 });
    }
    BoxTrack::new(id, entries).unwrap()
}

/// Two-tone LAB clip with small jitter, so both passing and failing edges
/// occur.
pub fn random_lab(dims: ClipDims, rng: &mut RngStream) -> Tensor {
    let mut lab = Tensor::zeros(&[dims.frames, dims.height, dims.width, 3]);
    for px in lab.data_mut().chunks_mut(3) {
        let l = if rng.index(2).unwrap() == 0 { 40.0 } else { 60.0 };
        px[0] = l + rng.uniform(-1.0, 1.0).unwrap();
        px[1] = rng.uniform(-1.0, 1.0).unwrap();
        px[2] = rng.uniform(-1.0, 1.0).unwrap();
    }
    lab
}

pub fn edge_set(edges: &[boxvis::Edge]) -> BTreeSet<(Pixel, Pixel)> {
    edges.iter().map(|e| (e.a, e.b)).collect()
}

/// Three-source manifest with weights 1/2, 1/4, 1/4.
pub fn three_source_manifest() -> boxvis::datasetkit::DatasetManifest {
    use boxvis::datasetkit::{Category, DatasetManifest, Item, Source, SourceKind};
    let source = |name: &str, kind: SourceKind, weight: f64, frames: usize| Source {
        name: name.into(),
        kind,
        weight,
        items: (0..4)
            .map(|i| Item {
                id: format!("{name}-{i}"),
                frames,
                annotations: Vec::new(),
            })
            .collect(),
    };
    DatasetManifest {
        categories: vec![Category { id: 1, name: "person".into() }],
        sources: vec![
            source("ytvis", SourceKind::Video, 0.5, 5),
            source("ovis", SourceKind::Video, 0.25, 5),
            source("coco", SourceKind::Image, 0.25, 1),
        ],
    }
}

/// One invocation per subcommand, with inputs written into `dir`. Each
/// entry is (label, args, output file or None).
pub fn cli_invocations(dir: &std::path::Path, tag: &str) -> Vec<(String, Vec<String>, std::path::PathBuf)> {
    let manifest = dir.join("manifest.json");
    three_source_manifest().write(&manifest).unwrap();
    let mut cases: Vec<(String, Vec<String>)> = Vec::new();
    for loss in ["projection", "pairwise", "stpa", "tv3d", "bce-dice", "classification"] {
        cases.push((format!("loss-eval {loss}"), vec!["loss-eval".into(), "--loss".into(), loss.into()]));
    }
    let strs = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    cases.push(("grad-check".into(), strs(&["grad-check", "--loss", "all", "--points", "3"])));
    cases.push(("clip-gen".into(), strs(&["clip-gen", "--frames", "2"])));
    cases.push(("merge-cats".into(), strs(&["merge-cats"])));
    cases.push(("cost".into(), strs(&["cost", "--objects", "978000"])));
    cases.push((
        "sample".into(),
        vec!["sample".into(), "--manifest".into(), manifest.display().to_string(), "-n".into(), "500".into()],
    ));
    cases.push(("toy-train".into(), strs(&["toy-train", "--steps", "20"])));
    cases.push((
        "ablate".into(),
        strs(&["ablate", "--scenes", "2", "--recipes", "proj,proj+stpa", "--seeds", "0,1", "--steps", "10"]),
    ));
    cases
        .into_iter()
        .enumerate()
        .map(|(i, (label, mut args))| {
            let out = dir.join(format!("out-{tag}-{i}"));
            args.extend(["--seed".into(), "7".into(), "--threads".into(), "1".into()]);
            args.extend(["--out".into(), out.display().to_string()]);
            (label, args, out)
        })
        .collect()
}
