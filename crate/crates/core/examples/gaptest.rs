use loopsplit::Curve;
use std::f64::consts::PI;
fn main() {
    let samples = 1024;
    let pts: Vec<Vec<f64>> = (0..samples).map(|k| {
        let th = 2.0 * PI * k as f64 / samples as f64;
        vec![th.cos(), th.sin(), 0.0]
    }).collect();
    let curve = Curve::new(pts, true).unwrap();
    for i in 0..8 {
        let t1 = i as f64 / 17.0 % 0.5;
        let t2 = t1 + 0.13;
        let v: Vec<Vec<f64>> = [t1, t2, t1 + 0.5, t2 + 0.5].iter().map(|&t| curve.point_at(t)).collect();
        let gap: Vec<f64> = (0..3).map(|k| v[0][k] + v[2][k] - v[1][k] - v[3][k]).collect();
        let n = gap.iter().map(|x| x*x).sum::<f64>().sqrt();
        println!("i={} t1={:.6} gap={:.3e}", i, t1, n);
    }
}
