use crate::rng::Stream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutOptions {
    pub iterations: usize,
    pub seed: u64,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            iterations: 500,
            seed: 0,
        }
    }
}

/// Fruchterman-Reingold spring layout. Attraction along an edge scales
/// with its weight relative to the strongest edge. Positions evolve in the
/// unit square under a linearly cooling step bound and are then mapped
/// into `[0.1, 0.9]`.
pub fn spring_layout(weights: &[Vec<f64>], iterations: usize, seed: u64) -> Vec<(f64, f64)> {
    let p = weights.len();
    if p == 0 {
        return Vec::new();
    }
    if p == 1 {
        return vec![(0.5, 0.5)];
    }
    let w_max = weights
        .iter()
        .flatten()
        .map(|w| w.abs())
        .fold(0.0, f64::max);
    let w = |i: usize, j: usize| {
        if w_max == 0.0 {
            0.0
        } else {
            weights[i][j].abs().max(weights[j][i].abs()) / w_max
        }
    };

    let mut s = Stream::new(seed, 0);
    let mut pos: Vec<[f64; 2]> = (0..p).map(|_| [s.uniform(), s.uniform()]).collect();
    let k = (1.0 / p as f64).sqrt();
    let t0 = 0.1;
    for it in 0..iterations {
        let temp = t0 * (1.0 - it as f64 / iterations as f64);
        let mut disp = vec![[0.0f64; 2]; p];
        for i in 0..p {
            for j in 0..p {
                if i == j {
                    continue;
                }
                let mut dx = pos[i][0] - pos[j][0];
                let mut dy = pos[i][1] - pos[j][1];
                let mut d = (dx * dx + dy * dy).sqrt();
                if d < 1e-9 {
                    // Coincident points: separate along a fixed direction.
                    dx = 1e-9 * (i as f64 - j as f64);
                    dy = 0.0;
                    d = dx.abs();
                }
                let force = k * k / d - w(i, j) * d * d / k;
                disp[i][0] += dx / d * force;
                disp[i][1] += dy / d * force;
            }
        }
        for i in 0..p {
            let len = (disp[i][0].powi(2) + disp[i][1].powi(2)).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                pos[i][0] = (pos[i][0] + disp[i][0] / len * step).clamp(0.0, 1.0);
                pos[i][1] = (pos[i][1] + disp[i][1] / len * step).clamp(0.0, 1.0);
            }
        }
    }
    pos.into_iter()
        .map(|[x, y]| (0.1 + 0.8 * x, 0.1 + 0.8 * y))
        .collect()
}
