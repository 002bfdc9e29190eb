use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Fruchterman–Reingold layout of `n` nodes with weighted `edges`
/// `(i, j, w)`. Attraction scales with `w`; the temperature cools linearly
/// to zero. Coordinates are rescaled (aspect preserved) and centred into the
/// unit square.
pub fn fr_layout(n: usize, edges: &[(usize, usize, f64)], iterations: usize, seed: u64) -> Vec<[f64; 2]> {
    if n == 0 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random::<f64>(), rng.random::<f64>()])
        .collect();
    let k = (1.0 / n as f64).sqrt();
    let t0 = 0.1;
    for it in 0..iterations {
        let temp = t0 * (1.0 - it as f64 / iterations as f64);
        let mut disp = vec![[0.0f64; 2]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = pos[i][0] - pos[j][0];
                let dy = pos[i][1] - pos[j][1];
                let d = (dx * dx + dy * dy).sqrt().max(1e-9);
                let f = k * k / d;
                disp[i][0] += dx / d * f;
                disp[i][1] += dy / d * f;
                disp[j][0] -= dx / d * f;
                disp[j][1] -= dy / d * f;
            }
        }
        for &(i, j, w) in edges {
            let dx = pos[i][0] - pos[j][0];
            let dy = pos[i][1] - pos[j][1];
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let f = w * d * d / k;
            disp[i][0] -= dx / d * f;
            disp[i][1] -= dy / d * f;
            disp[j][0] += dx / d * f;
            disp[j][1] += dy / d * f;
        }
        for (p, dp) in pos.iter_mut().zip(&disp) {
            let len = (dp[0] * dp[0] + dp[1] * dp[1]).sqrt();
            if len > 0.0 {
                let step = len.min(temp);
                p[0] += dp[0] / len * step;
                p[1] += dp[1] / len * step;
            }
        }
    }
    normalize(&mut pos);
    pos
}

fn normalize(pos: &mut [[f64; 2]]) {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in pos.iter() {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    for p in pos.iter_mut() {
        for d in 0..2 {
            let centre = (lo[d] + hi[d]) / 2.0;
            p[d] = if span > 0.0 {
                (0.5 + (p[d] - centre) / span).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
    }
}
