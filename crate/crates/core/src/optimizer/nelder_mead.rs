//! Bounded Nelder–Mead simplex search with seeded random restarts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub algorithm: Algorithm,
    /// Number of simplex runs. The first starts from the supplied initial
    /// point (if any), the rest from seeded uniform samples.
    pub restarts: usize,
    /// Objective evaluations allowed per run.
    pub max_evals: usize,
    pub seed: u64,
    /// Stop when the simplex diameter, relative to the bound widths, falls
    /// below this value...
    pub x_tolerance: f64,
    /// ...and the spread of vertex values falls below this value (absolute).
    pub f_tolerance: f64,
    /// Initial simplex edge as a fraction of each bound width.
    pub initial_step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            algorithm: Algorithm::NelderMead,
            restarts: 8,
            max_evals: 400,
            seed: 0x5eed_2008,
            x_tolerance: 1e-8,
            f_tolerance: 1e-14,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub index: usize,
    pub restart: usize,
    pub params: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub best_restart: usize,
    pub evaluations: usize,
    /// Whether the run that produced the optimum met both tolerances.
    pub converged: bool,
    pub history: Vec<Evaluation>,
}

struct Recorder<'a, F> {
    f: &'a mut F,
    history: Vec<Evaluation>,
    best: f64,
    restart: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Recorder<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let mut v = (self.f)(x)?;
        if v.is_nan() {
            v = f64::INFINITY;
        }
        self.best = self.best.min(v);
        self.history.push(Evaluation {
            index: self.history.len(),
            restart: self.restart,
            params: x.to_vec(),
            value: v,
            best_so_far: self.best,
        });
        Ok(v)
    }
}

fn clamp(x: &mut [f64], bounds: &[(f64, f64)]) {
    for (v, (lo, hi)) in x.iter_mut().zip(bounds) {
        *v = v.clamp(*lo, *hi);
    }
}

/// One simplex run from `start`. Returns (best point, value, converged).
fn simplex_run<F: FnMut(&[f64]) -> Result<f64>>(
    rec: &mut Recorder<'_, F>,
    start: &[f64],
    bounds: &[(f64, f64)],
    cfg: &SearchConfig,
) -> Result<(Vec<f64>, f64, bool)> {
    let n = start.len();
    let widths: Vec<f64> = bounds.iter().map(|(lo, hi)| hi - lo).collect();
    let budget_end = rec.history.len() + cfg.max_evals;

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(start.to_vec());
    for k in 0..n {
        let mut v = start.to_vec();
        let step = cfg.initial_step * widths[k];
        // step inward if the vertex would leave the box
        v[k] = if v[k] + step <= bounds[k].1 { v[k] + step } else { v[k] - step };
        clamp(&mut v, bounds);
        simplex.push(v);
    }
    let mut values = Vec::with_capacity(n + 1);
    for v in &simplex {
        values.push(rec.eval(v)?);
    }

    let mut converged = false;
    while rec.history.len() < budget_end {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&simplex[0])
                    .zip(&widths)
                    .map(|((a, b), w)| ((a - b) / w).abs())
                    .fold(0.0f64, f64::max)
            })
            .fold(0.0f64, f64::max);
        let spread = values[n] - values[0];
        if diameter <= cfg.x_tolerance && spread <= cfg.f_tolerance {
            converged = true;
            break;
        }
        if diameter <= 1e-3 * cfg.x_tolerance {
            // collapsed but still noisy; nothing more to gain
            converged = spread.is_finite();
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|v| v[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> =
                centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            clamp(&mut p, bounds);
            p
        };

        let xr = along(1.0);
        let fr = rec.eval(&xr)?;
        if fr < values[0] {
            let xe = along(2.0);
            let fe = rec.eval(&xe)?;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(0.5);
            let fc = rec.eval(&xc)?;
            (xc, fc)
        } else {
            let xc = along(-0.5);
            let fc = rec.eval(&xc)?;
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // shrink toward the best vertex
        for k in 1..=n {
            let p: Vec<f64> =
                simplex[0].iter().zip(&simplex[k]).map(|(b, v)| b + 0.5 * (v - b)).collect();
            values[k] = rec.eval(&p)?;
            simplex[k] = p;
            if rec.history.len() >= budget_end {
                break;
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b))).unwrap_or(0);
    Ok((simplex[best].clone(), values[best], converged))
}

/// Minimizes `f` inside the box `bounds`.
pub fn minimize<F>(
    mut f: F,
    bounds: &[(f64, f64)],
    initial: Option<&[f64]>,
    cfg: &SearchConfig,
) -> Result<SearchResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if bounds.is_empty() {
        return Err(invalid("at least one free parameter is required"));
    }
    if bounds.iter().any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && hi > lo)) {
        return Err(invalid("bounds must be finite with lower < upper"));
    }
    if cfg.restarts == 0 || cfg.max_evals < bounds.len() + 2 {
        return Err(invalid("search budget too small"));
    }
    if let Some(x0) = initial {
        if x0.len() != bounds.len() {
            return Err(invalid("initial point has the wrong dimension"));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rec = Recorder { f: &mut f, history: Vec::new(), best: f64::INFINITY, restart: 0 };
    let mut best: Option<(Vec<f64>, f64, bool, usize)> = None;

    for r in 0..cfg.restarts {
        rec.restart = r;
        // always draw, so restart k sees the same start regardless of `initial`
        let sample: Vec<f64> = bounds.iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
        let start = match (r, initial) {
            (0, Some(x0)) => {
                let mut s = x0.to_vec();
                clamp(&mut s, bounds);
                s
            }
            _ => sample,
        };
        let (x, v, conv) = simplex_run(&mut rec, &start, bounds, cfg)?;
        let better = match &best {
            None => true,
            Some((_, bv, _, _)) => v < *bv,
        };
        if better {
            best = Some((x, v, conv, r));
        }
    }
    let (best_params, best_value, converged, best_restart) = best.expect("at least one restart");
    Ok(SearchResult {
        best_params,
        best_value,
        best_restart,
        evaluations: rec.history.len(),
        converged,
        history: rec.history,
    })
}
