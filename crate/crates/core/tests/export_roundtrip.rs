use num_complex::Complex64 as C;

use parasphere::export::{build_mesh, format_sig9, obj_string};
use parasphere::verify::ChartWindow;
use parasphere::{eval_point, parse};

/// Minimal OBJ reader: vertex strings and 1-based faces.
fn read_obj(text: &str) -> (Vec<[String; 3]>, Vec<[usize; 3]>) {
    let mut v = Vec::new();
    let mut f = Vec::new();
    for line in text.lines() {
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let c: Vec<String> = parts.map(String::from).collect();
                v.push([c[0].clone(), c[1].clone(), c[2].clone()]);
            }
            Some("f") => {
                let c: Vec<usize> = parts.map(|s| s.parse().unwrap()).collect();
                f.push([c[0], c[1], c[2]]);
            }
            other => panic!("unexpected line kind {other:?}"),
        }
    }
    (v, f)
}

#[test]
fn obj_vertices_are_the_immersion() {
    let e = parse("z1^3/6 + i*z1^2/4", 1).unwrap();
    let (lo, hi) = (vec![-1.0, 0.25], vec![1.0, 1.25]);
    let (ni, nj) = (7, 5);
    let w = ChartWindow {
        n: 1,
        lo: lo.clone(),
        hi: hi.clone(),
        sampling: parasphere::Sampling::UniformGrid { per_axis: vec![ni, nj] },
    };
    let (verts, faces) = read_obj(&obj_string(&build_mesh(&e, &w).unwrap()));
    assert_eq!(verts.len(), ni * nj);
    assert_eq!(faces.len(), 2 * (ni - 1) * (nj - 1));
    for i in 0..ni {
        for j in 0..nj {
            let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (ni - 1) as f64;
            let u = lo[1] + (hi[1] - lo[1]) * j as f64 / (nj - 1) as f64;
            let p = eval_point(&e, &[C::new(x, u)]).unwrap();
            let want: Vec<String> = p.imm.iter().map(|&v| format_sig9(v)).collect();
            assert_eq!(verts[i * nj + j].to_vec(), want, "vertex ({i}, {j})");
        }
    }
    // every face lies inside a single grid cell
    for f in &faces {
        assert!(f.iter().all(|&k| (1..=ni * nj).contains(&k)));
        let cells: Vec<(usize, usize)> = f.iter().map(|&k| ((k - 1) / nj, (k - 1) % nj)).collect();
        let imin = cells.iter().map(|c| c.0).min().unwrap();
        let jmin = cells.iter().map(|c| c.1).min().unwrap();
        assert!(cells.iter().all(|c| c.0 - imin <= 1 && c.1 - jmin <= 1));
    }
}

#[test]
fn sig9_parses_back_within_nine_digits() {
    for x in [1.0 / 7.0, -123.456789012, 6.02e23, -1e-12, 2.5] {
        let s = format_sig9(x);
        let y: f64 = s.parse().unwrap();
        assert!((y - x).abs() <= 5e-9 * x.abs(), "{x} -> {s}");
    }
}
