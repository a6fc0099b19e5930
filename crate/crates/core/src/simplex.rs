//! Deterministic Nelder–Mead minimization with box constraints enforced by projection.

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Initial edge length as a fraction of each box side (absolute when the box is unbounded).
    pub initial_step: f64,
    /// Stop once the largest vertex distance from the best vertex drops below this.
    pub diameter_tol: f64,
    pub max_iter: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.1,
            diameter_tol: 1e-7,
            max_iter: 4000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` starting from `x0` inside `[lo, hi]` (use infinities for free coordinates).
///
/// Non-finite objective values are treated as `+∞`, so the simplex retreats from them.
pub fn minimize<F>(
    mut f: F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: SimplexOptions,
) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    assert!(
        lo.len() == n && hi.len() == n,
        "bounds must match the dimension"
    );
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };

    let mut start = x0.to_vec();
    project(&mut start, lo, hi);
    let mut pts = vec![start.clone()];
    for i in 0..n {
        let width = hi[i] - lo[i];
        let step = if width.is_finite() {
            opts.initial_step * width
        } else {
            opts.initial_step.max(0.05 * start[i].abs())
        };
        let mut p = start.clone();
        // step inward when the start sits on the upper face
        p[i] = if p[i] + step <= hi[i] {
            p[i] + step
        } else {
            p[i] - step
        };
        project(&mut p, lo, hi);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut converged = false;
    let mut iter = 0;
    while iter < opts.max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&k| pts[k].clone()).collect();
        vals = order.iter().map(|&k| vals[k]).collect();

        let diameter = pts[1..]
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&pts[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if diameter < opts.diameter_tol {
            converged = true;
            break;
        }
        iter += 1;

        let mut centroid = vec![0.0; n];
        for p in &pts[..n] {
            for (c, v) in centroid.iter_mut().zip(p) {
                *c += v / n as f64;
            }
        }
        let toward = |coef: f64| {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            project(&mut p, lo, hi);
            p
        };

        let xr = toward(alpha);
        let fr = eval(&xr);
        if fr < vals[0] {
            let xe = toward(gamma);
            let fe = eval(&xe);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < vals[n] {
            let xc = toward(rho * alpha);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = toward(-rho);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for k in 1..=n {
            let shrunk: Vec<f64> = pts[0]
                .iter()
                .zip(&pts[k])
                .map(|(b, p)| b + sigma * (p - b))
                .collect();
            vals[k] = eval(&shrunk);
            pts[k] = shrunk;
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        converged,
        iterations: iter,
    }
}
