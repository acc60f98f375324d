use crate::angular::ArrayLayout;
use crate::{Error, Result};

/// Log-barrier of the region and spacing constraints; `-∞` unless strictly interior.
pub fn log_barrier(layout: &ArrayLayout) -> f64 {
    if !layout.is_strictly_interior() {
        return f64::NEG_INFINITY;
    }
    let n = layout.len() as f64;
    let region = layout.region();
    let hx2 = region.size_x * region.size_x / 4.0;
    let hy2 = region.size_y * region.size_y / 4.0;
    let d2 = region.min_spacing * region.min_spacing;
    let pos = layout.positions();
    let mut spacing = 0.0;
    for i in 0..pos.len() {
        for k in i + 1..pos.len() {
            let r2 = (pos[i][0] - pos[k][0]).powi(2) + (pos[i][1] - pos[k][1]).powi(2);
            spacing += (r2 - d2).ln();
        }
    }
    let walls: f64 = pos.iter().map(|p| (hx2 - p[0] * p[0]).ln() + (hy2 - p[1] * p[1]).ln()).sum();
    spacing / (n * n) + walls / n
}

/// Gradient of [`log_barrier`] with respect to the x and y coordinates.
pub fn barrier_gradient(layout: &ArrayLayout) -> Result<(Vec<f64>, Vec<f64>)> {
    if !layout.is_strictly_interior() {
        return Err(Error::Infeasible("barrier gradient needs a strictly interior layout".into()));
    }
    let n = layout.len();
    let nf = n as f64;
    let region = layout.region();
    let half2 = [region.size_x * region.size_x / 4.0, region.size_y * region.size_y / 4.0];
    let d2 = region.min_spacing * region.min_spacing;
    let pos = layout.positions();
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    for i in 0..n {
        gx[i] = 2.0 * pos[i][0] / (nf * (pos[i][0] * pos[i][0] - half2[0]));
        gy[i] = 2.0 * pos[i][1] / (nf * (pos[i][1] * pos[i][1] - half2[1]));
    }
    for i in 0..n {
        for k in i + 1..n {
            let dx = pos[i][0] - pos[k][0];
            let dy = pos[i][1] - pos[k][1];
            let w = 2.0 / (nf * nf * (dx * dx + dy * dy - d2));
            gx[i] += w * dx;
            gx[k] -= w * dx;
            gy[i] += w * dy;
            gy[k] -= w * dy;
        }
    }
    Ok((gx, gy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::Region;
    use proptest::prelude::*;

    fn region() -> Region {
        Region::new(0.24, 0.18, 0.03).unwrap()
    }

    #[test]
    fn boundary_cases() {
        let r = region();
        let on_edge = ArrayLayout::new(vec![[0.12, 0.0]], r).unwrap();
        assert_eq!(log_barrier(&on_edge), f64::NEG_INFINITY);
        let touching = ArrayLayout::new(vec![[0.0, 0.0], [0.03, 0.0]], r).unwrap();
        assert_eq!(log_barrier(&touching), f64::NEG_INFINITY);
        assert!(barrier_gradient(&touching).is_err());

        let s = 0.2;
        let single = ArrayLayout::new(vec![[0.0, 0.0]], Region::square(s, 0.05).unwrap()).unwrap();
        assert!((log_barrier(&single) - 2.0 * (s * s / 4.0).ln()).abs() < 1e-14);
        let (gx, gy) = barrier_gradient(&single).unwrap();
        assert_eq!((gx[0], gy[0]), (0.0, 0.0));
    }

    #[test]
    fn symmetric_pair_has_opposite_gradients() {
        let l = ArrayLayout::new(vec![[-0.05, 0.0], [0.05, 0.0]], region()).unwrap();
        let (gx, gy) = barrier_gradient(&l).unwrap();
        assert!((gx[0] + gx[1]).abs() < 1e-14 * gx[0].abs());
        assert!(gy.iter().all(|&v| v == 0.0));
    }

    fn interior_layout() -> impl Strategy<Value = Vec<[f64; 2]>> {
        proptest::collection::vec((-0.11f64..0.11, -0.08f64..0.08), 1..7)
            .prop_map(|v| v.into_iter().map(|(x, y)| [x, y]).collect())
            .prop_filter("strictly interior", |p: &Vec<[f64; 2]>| {
                ArrayLayout::new(p.clone(), region()).unwrap().is_strictly_interior()
            })
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_difference(pos in interior_layout()) {
            let l = ArrayLayout::new(pos.clone(), region()).unwrap();
            let (gx, gy) = barrier_gradient(&l).unwrap();
            let n = pos.len();
            let analytic: Vec<f64> = gx.iter().chain(&gy).cloned().collect();
            let h = 1e-7;
            let mut fd = vec![0.0; 2 * n];
            for j in 0..2 * n {
                let mut e = vec![0.0; 2 * n];
                e[j] = 1.0;
                let up = log_barrier(&l.displaced(&e, h));
                let down = log_barrier(&l.displaced(&e, -h));
                prop_assume!(up.is_finite() && down.is_finite());
                fd[j] = (up - down) / (2.0 * h);
            }
            let err: f64 = analytic.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-6 * norm.max(1e-12), "{} vs {}", err, norm);
        }
    }
}
